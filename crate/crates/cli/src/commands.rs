use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ctdgan::data::{infer_schema, load_csv, read_schema, write_csv, write_schema};
use ctdgan::eval::plot::{loss_curves, metric_bars};
use ctdgan::eval::{run_experiment, ClassifierKind, Method, MlpConfig, Protocol, ProtocolConfig};
use ctdgan::sampler::{balance, sample, to_dataset};
use ctdgan::transform::SegmentKind;
use ctdgan::{train, Error, FittedModel, Result, SampleConditions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::args::{
    BalanceArgs, ClassifierArg, Command, EvaluateArgs, FitArgs, InferSchemaArgs, InspectArgs, ProtocolArg, SampleArgs,
};

pub fn dispatch(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Fit(a) => fit(a),
        Command::Sample(a) => sample_cmd(a),
        Command::Balance(a) => balance_cmd(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Inspect(a) => inspect(a),
        Command::InferSchema(a) => infer(a),
    }
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "input file {} does not exist",
            path.display()
        )))
    }
}

fn require_writable(path: &Path) -> Result<()> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
    match parent {
        Some(dir) if !dir.is_dir() => Err(Error::InvalidArgument(format!(
            "output directory {} does not exist",
            dir.display()
        ))),
        _ if path.is_dir() => Err(Error::InvalidArgument(format!(
            "output {} is a directory",
            path.display()
        ))),
        _ => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn fit(a: &FitArgs) -> Result<()> {
    require_file(&a.data.data)?;
    require_file(&a.data.schema)?;
    require_writable(&a.out)?;
    if let Some(p) = &a.plot {
        require_writable(p)?;
    }
    let cfg = a.train.to_config();
    cfg.validate()?;
    let schema = read_schema(&a.data.schema)?;
    let ds = load_csv(&a.data.data, &schema)?;
    let model = train(&ds, &cfg)?;
    model.save(&a.out)?;
    if let Some(p) = &a.plot {
        write_text(p, &loss_curves(&model.loss_history))?;
    }
    log::info!("checkpoint written to {}", a.out.display());
    Ok(())
}

fn sample_cmd(a: &SampleArgs) -> Result<()> {
    require_file(&a.model)?;
    require_writable(&a.out)?;
    let model = FittedModel::load(&a.model)?;
    let cond = SampleConditions::from_labels(&model.schema, a.class.as_deref(), &a.conditions)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let rows = sample(&model, a.n, &cond, &mut rng)?;
    log::info!("{} rows accepted after {} attempts", rows.len(), rows.attempts);
    if !cond.discrete.is_empty() {
        // only the class condition is enforced by rejection
        log::info!("discrete condition match rate {:.4}", rows.condition_match_rate(&cond));
    }
    write_csv(&to_dataset(&model, &rows)?, &a.out)
}

fn balance_cmd(a: &BalanceArgs) -> Result<()> {
    require_file(&a.model)?;
    require_file(&a.data)?;
    require_writable(&a.out)?;
    let model = FittedModel::load(&a.model)?;
    let ds = load_csv(&a.data, &model.schema)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let balanced = balance(&model, &ds, &mut rng)?;
    log::info!("{} rows in, {} rows out", ds.n_rows(), balanced.n_rows());
    write_csv(&balanced, &a.out)
}

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    require_file(&a.data.data)?;
    require_file(&a.data.schema)?;
    require_writable(&a.out)?;
    if let Some(p) = &a.plot {
        require_writable(p)?;
    }
    let base = a.train.to_config();
    base.validate()?;
    let methods = a
        .methods
        .iter()
        .map(|m| Method::parse(m, &base))
        .collect::<Result<Vec<_>>>()?;
    let classifier = match a.classifier {
        ClassifierArg::Mlp => ClassifierKind::Mlp(MlpConfig {
            epochs: a.mlp_epochs,
            ..MlpConfig::default()
        }),
        ClassifierArg::NearestNeighbor => ClassifierKind::NearestNeighbor,
    };
    let cfg = ProtocolConfig {
        seeds: a.seeds.clone(),
        n_folds: a.folds,
        classifier,
    };
    let protocol = match a.protocol {
        ProtocolArg::Oversampling => Protocol::Oversampling,
        ProtocolArg::Fidelity => Protocol::Fidelity,
    };
    let schema = read_schema(&a.data.schema)?;
    let ds = load_csv(&a.data.data, &schema)?;
    let name = a
        .data
        .data
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let report = run_experiment(protocol, &name, &ds, &methods, &cfg)?;
    for m in &report.methods {
        log::info!(
            "{}: f1 {:?}, balanced accuracy {:?}",
            m.method,
            m.f1,
            m.balanced_accuracy
        );
    }
    write_text(&a.out, &(report.to_json()? + "\n"))?;
    if let Some(p) = &a.plot {
        write_text(p, &metric_bars(&report))?;
    }
    Ok(())
}

/// Text summary of a checkpoint.
pub fn inspect_text(model: &FittedModel) -> String {
    let mut s = String::new();
    let h = &model.header;
    let _ = writeln!(s, "format: {}", h.format);
    let _ = writeln!(s, "schema hash: {}", h.schema_hash);
    let _ = writeln!(s, "k: {}", h.k);
    let _ = writeln!(s, "classes: {} ({})", h.n_classes, model.schema.class_labels.join(", "));
    let _ = writeln!(s, "P_s:");
    for (y, label) in model.schema.class_labels.iter().enumerate() {
        let row: Vec<String> = model.probability_matrix.row(y).iter().map(|p| p.to_string()).collect();
        let _ = writeln!(s, "  {label}: {}", row.join(" "));
    }
    let _ = writeln!(s, "layout width: {}", h.layout.width);
    for seg in &h.layout.segments {
        let name = match &seg.kind {
            SegmentKind::Continuous => "continuous".to_string(),
            SegmentKind::Discrete { column } => format!("discrete {}", model.schema.columns[*column].name),
            SegmentKind::Cluster => "cluster".to_string(),
            SegmentKind::Class => "class".to_string(),
        };
        let _ = writeln!(s, "  {name}: offset {} width {}", seg.offset, seg.width);
    }
    let hist = &model.loss_history;
    match (hist.epoch_critic.last(), hist.epoch_generator.last()) {
        (Some(c), Some(g)) => {
            let _ = writeln!(
                s,
                "final losses (epoch {}): critic {c} generator {g}",
                hist.epoch_critic.len()
            );
        }
        _ => {
            let _ = writeln!(s, "final losses: none recorded");
        }
    }
    s
}

fn inspect_json(model: &FittedModel) -> Result<String> {
    let hist = &model.loss_history;
    let doc = serde_json::json!({
        "format": model.header.format,
        "schema_hash": model.header.schema_hash,
        "k": model.header.k,
        "n_classes": model.header.n_classes,
        "class_labels": model.schema.class_labels,
        "P_s": (0..model.header.n_classes).map(|y| model.probability_matrix.row(y).to_vec()).collect::<Vec<_>>(),
        "layout": model.header.layout,
        "epochs": hist.epoch_critic.len(),
        "final_critic_loss": hist.epoch_critic.last(),
        "final_generator_loss": hist.epoch_generator.last(),
    });
    Ok(serde_json::to_string_pretty(&doc)?)
}

fn inspect(a: &InspectArgs) -> Result<()> {
    require_file(&a.model)?;
    let model = FittedModel::load(&a.model)?;
    if a.json {
        println!("{}", inspect_json(&model)?);
    } else {
        print!("{}", inspect_text(&model));
    }
    Ok(())
}

fn infer(a: &InferSchemaArgs) -> Result<()> {
    require_file(&a.data)?;
    require_writable(&a.out)?;
    let schema = infer_schema(&a.data, &a.target, a.threshold)?;
    write_schema(&schema, &a.out)
}
