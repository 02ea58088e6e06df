fn main() {
    std::process::exit(ctdgan_cli::run(std::env::args_os()));
}
