use ndarray::Array2;
use rand::Rng;

use pmae::data::{ColumnSchema, IncompleteDataset, TabularDataset};
use pmae::masking::MaskingFunctionSpec;
use pmae::missingness::MaskMatrix;
use pmae::nn::{
    fill_missing, imputation_matrix, impute, load_checkpoint, predict_all, save_checkpoint, token_mixing_magnitudes,
    train, BlockKind, ModelConfig, ModelParameters, ResidualForm, Stage, TrainConfig,
};
use pmae::rng::rng_from_seed;

fn small_model(kind: BlockKind) -> ModelConfig {
    ModelConfig {
        width: 16,
        encoder_depth: 2,
        decoder_depth: 1,
        heads: 2,
        block_kind: kind,
        dropout: 0.0,
        expansion_ratio: 2,
        residual: ResidualForm::DoubleNorm,
    }
}

/// Four numerical columns driven by two latent factors, each entry observed
/// with probability 0.8.
fn linear_dataset(n: usize, seed: u64) -> IncompleteDataset {
    let mut rng = rng_from_seed(seed);
    let a = [[0.6, 0.2], [0.1, 0.7], [0.4, 0.4], [0.7, -0.3]];
    let mut values = Array2::zeros((n, 4));
    for i in 0..n {
        let z: [f64; 2] = [rng.gen(), rng.gen()];
        for j in 0..4 {
            let y = 0.15 + a[j][0] * z[0] + a[j][1] * z[1] + 0.01 * (rng.gen::<f64>() - 0.5);
            values[[i, j]] = y.clamp(0.0, 1.0);
        }
    }
    let schema = (0..4).map(|j| ColumnSchema::numerical(format!("x{j}"))).collect();
    let base = TabularDataset::from_encoded(values, schema).unwrap();
    let mut mask = MaskMatrix::from_fn(n, 4, |_, _| rng.gen::<f64>() < 0.8);
    for i in 0..n {
        if mask.row_count(i) == 0 {
            mask.set(i, 0, true);
        }
    }
    IncompleteDataset::new(base, mask).unwrap()
}

fn quick_train(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        lr: 3e-3,
        warmup_epochs: 2,
        batch_size: Some(64),
        ..TrainConfig::default()
    }
}

#[test]
fn training_reduces_loss_tenfold() {
    let ds = linear_dataset(256, 1);
    for kind in [BlockKind::Mixer, BlockKind::Transformer] {
        let out = train(&ds, &small_model(kind), &quick_train(60), &MaskingFunctionSpec::default(), 5).unwrap();
        let first = out.curve[0].loss;
        let last = out.curve.last().unwrap().loss;
        assert!(last * 10.0 < first, "{kind}: {first} -> {last}");
    }
}

#[test]
fn one_epoch_is_bitwise_reproducible() {
    let ds = linear_dataset(128, 2);
    let cfg = ModelConfig {
        dropout: 0.1,
        ..small_model(BlockKind::Mixer)
    };
    let run = || train(&ds, &cfg, &quick_train(1), &MaskingFunctionSpec::default(), 9).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.params.values, b.params.values);
    assert_eq!(a.curve, b.curve);
    let other = train(&ds, &cfg, &quick_train(1), &MaskingFunctionSpec::default(), 10).unwrap();
    assert_ne!(a.params.values, other.params.values);
}

#[test]
fn imputation_keeps_observed_entries() {
    let ds = linear_dataset(100, 3);
    let params = ModelParameters::init(4, small_model(BlockKind::Mixer), &mut rng_from_seed(0)).unwrap();
    let completed = impute(&params, &ds).unwrap();
    for ((i, j), v) in completed.indexed_iter() {
        if ds.observed_mask.get(i, j) {
            assert_eq!(*v, ds.values[[i, j]]);
        } else {
            assert!((0.0..=1.0).contains(v));
        }
    }
    let full = IncompleteDataset::new(ds.base.clone(), MaskMatrix::ones(100, 4)).unwrap();
    assert_eq!(impute(&params, &full).unwrap(), full.values);
    let only = imputation_matrix(&ds, &predict_all(&params, &ds).unwrap());
    for ((i, j), v) in only.indexed_iter() {
        if ds.observed_mask.get(i, j) {
            assert_eq!(*v, 0.0);
        }
    }
}

#[test]
fn postprocessing_snaps_and_clips() {
    let schema = vec![ColumnSchema::categorical("c", Some(3)), ColumnSchema::numerical("x")];
    let base = TabularDataset::from_encoded(ndarray::array![[0.0, 0.2], [1.0, 0.4]], schema).unwrap();
    let mask = MaskMatrix::from_rows(&[vec![0, 0], vec![1, 1]]).unwrap();
    let ds = IncompleteDataset::new(base, mask).unwrap();
    let pred = ndarray::array![[0.62, 1.7], [0.0, 0.0]];
    let out = fill_missing(&ds, &pred);
    assert_eq!(out[[0, 0]], 0.5);
    assert_eq!(out[[0, 1]], 1.0);
    let pred = ndarray::array![[0.9, -0.3], [0.0, 0.0]];
    let out = fill_missing(&ds, &pred);
    assert_eq!(out[[0, 0]], 1.0);
    assert_eq!(out[[0, 1]], 0.0);
}

#[test]
fn mixing_diagnostic_covers_every_block_and_column() {
    let params = ModelParameters::init(4, small_model(BlockKind::Mixer), &mut rng_from_seed(1)).unwrap();
    let x = Array2::from_shape_fn((10, 4), |(i, j)| ((i + j) % 5) as f64 / 4.0);
    let rows = token_mixing_magnitudes(&params, x.view(), &MaskMatrix::ones(10, 4));
    assert_eq!(rows.len(), (2 + 1) * 4);
    assert_eq!(rows.iter().filter(|r| r.stage == Stage::Encoder).count(), 8);
    assert!(rows.iter().all(|r| r.tokens == 10 && r.before.is_finite() && r.after.is_finite()));
}

#[test]
fn zero_token_mixing_leaves_magnitudes_unchanged() {
    for kind in [BlockKind::Mixer, BlockKind::Transformer] {
        let cfg = ModelConfig {
            residual: ResidualForm::PreNorm,
            ..small_model(kind)
        };
        let mut params = ModelParameters::init(4, cfg, &mut rng_from_seed(2)).unwrap();
        for e in &params.arch.layout.entries {
            let mixing = e.name.contains(".attn.") || e.name.contains(".token_mlp.");
            if mixing {
                e.at.slice_mut(&mut params.values).fill(0.0);
            }
        }
        let x = Array2::from_shape_fn((6, 4), |(i, j)| ((i * 3 + j) % 7) as f64 / 6.0);
        let visible = MaskMatrix::from_fn(6, 4, |i, j| (i + j) % 3 != 0);
        for r in token_mixing_magnitudes(&params, x.view(), &visible) {
            if r.tokens > 0 {
                assert!((r.before - r.after).abs() < 1e-12, "{kind} {r:?}");
            }
        }
    }
}

#[test]
fn checkpoint_file_round_trip() {
    let params = ModelParameters::init(5, small_model(BlockKind::Transformer), &mut rng_from_seed(3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&path, &params).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back.values, params.values);
    assert_eq!(back.arch.config, params.arch.config);
    let x = Array2::from_elem((3, 5), 0.4);
    let vis = MaskMatrix::from_fn(3, 5, |i, j| i != j);
    assert_eq!(back.predict(x.view(), &vis).unwrap(), params.predict(x.view(), &vis).unwrap());
    assert!(load_checkpoint(dir.path().join("absent.ckpt")).is_err());
}
