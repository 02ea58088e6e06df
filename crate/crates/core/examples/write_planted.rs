//! Writes the planted-cluster benchmark and its schema.
//!
//! `cargo run -p ctdgan --example write_planted -- <dir> [seed]`

use std::path::PathBuf;

use ctdgan::data::synthetic::{planted_clusters, planted_schema};
use ctdgan::data::{write_csv, write_schema};

fn main() -> ctdgan::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data".into()));
    let seed = args.next().map_or(0, |s| s.parse().expect("seed must be an integer"));
    write_csv(&planted_clusters(seed), dir.join("planted.csv"))?;
    write_schema(&planted_schema(), dir.join("planted.schema.json"))?;
    Ok(())
}
