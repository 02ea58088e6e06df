use ctdgan::data::synthetic::{planted_clusters, planted_schema};
use ctdgan::data::{infer_schema, load_csv, read_schema, write_csv, write_schema};
use ctdgan::sampler::{balance, sample, SampleConditions};
use ctdgan::{train, Error, FittedModel, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_config() -> TrainConfig {
    TrainConfig {
        epochs: 2,
        latent_dim: 8,
        generator_dim: 16,
        critic_dim: 16,
        k_max: 4,
        ..TrainConfig::with_seed(9)
    }
}

#[test]
fn csv_and_schema_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let ds = planted_clusters(4);
    let csv = dir.path().join("d.csv");
    let schema_path = dir.path().join("s.json");
    write_csv(&ds, &csv).unwrap();
    write_schema(ds.schema(), &schema_path).unwrap();
    let schema = read_schema(&schema_path).unwrap();
    assert_eq!(&schema, ds.schema());
    let back = load_csv(&csv, &schema).unwrap();
    assert_eq!(back.values(), ds.values());
    assert_eq!(back.labels(), ds.labels());
    assert_eq!(infer_schema(&csv, "label", 20).unwrap(), planted_schema());
}

#[test]
fn checkpoint_roundtrip_preserves_sampling() {
    let dir = tempfile::tempdir().unwrap();
    let ds = planted_clusters(5);
    let model = train(&ds, &small_config()).unwrap();
    let path = dir.path().join("m.json");
    model.save(&path).unwrap();
    let loaded = FittedModel::load(&path).unwrap();
    assert_eq!(loaded.to_json().unwrap(), model.to_json().unwrap());

    let cond = SampleConditions::for_class(1);
    let a = sample(&model, 40, &cond, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let b = sample(&loaded, 40, &cond, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    assert_eq!(a, b);
    assert!(a.labels.iter().all(|&y| y == 1));

    let balanced = balance(&loaded, &ds, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert_eq!(balanced.class_counts(), vec![500, 500]);
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let ds = planted_clusters(6);
    let model = train(&ds, &small_config()).unwrap();
    let json = model.to_json().unwrap();
    let wrong_format = json.replacen("ctdgan-checkpoint/1", "ctdgan-checkpoint/0", 1);
    assert!(FittedModel::from_json(&wrong_format).is_err());
    assert!(matches!(FittedModel::from_json("{"), Err(Error::Json(_))));
    assert!(matches!(
        FittedModel::load("/nonexistent/model.json"),
        Err(Error::Io { .. })
    ));
}
