//! Trains a model on a masked synthetic table, imputes it and scores the

//! imputations against the held-back truth.
//!
//! cargo run --release --example train_impute -- [mixer|transformer] [epochs]

use pmae::data::synthetic::{generate, SyntheticSpec};
use pmae::data::IncompleteDataset;
use pmae::eval::{imputation_accuracy, split_ground_truth};
use pmae::masking::MaskingFunctionSpec;
use pmae::missingness::{generate_masks, Mechanism, PatternConfig};
use pmae::nn::{impute, train, write_loss_curve, BlockKind, ModelConfig, TrainConfig};
use pmae::rng::rng_from_seed;

fn main() -> pmae::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let kind: BlockKind = args.first().map(|s| s.parse()).transpose()?.unwrap_or(BlockKind::Mixer);
    let epochs = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(60);

    let ds = generate(&SyntheticSpec::diabetes_like(), 0)?;
    let gm = generate_masks(&ds, &PatternConfig::general(), Mechanism::Mnar, &mut rng_from_seed(1))?;
    let (x_star, _) = split_ground_truth(&ds, &gm.mask)?;
    let incomplete = IncompleteDataset::new(ds.clone(), gm.mask.clone())?;

    let model = ModelConfig {
        width: 16,
        encoder_depth: 2,
        decoder_depth: 1,
        ..ModelConfig::default()
    }
    .with_block_kind(kind);
    let cfg = TrainConfig {
        epochs,
        lr: 3e-3,
        warmup_epochs: epochs / 10,
        ..TrainConfig::default()
    };
    let out = train(&incomplete, &model, &cfg, &MaskingFunctionSpec::default(), 3)?;
    println!("{kind} model, {} parameters", out.params.n_params());
    let mut curve = Vec::new();
    write_loss_curve(&mut curve, &out.curve)?;
    for line in String::from_utf8_lossy(&curve).lines().step_by((epochs / 10).max(1)) {
        println!("  {line}");
    }

    let completed = impute(&out.params, &incomplete)?;
    let m = imputation_accuracy(&completed, &x_star, &gm.mask, &ds.schema)?;
    println!("Imp.Acc {:.4}  R² {:?}  Acc {:?}  RMSE {:.4}", m.imp_acc, m.r2, m.acc, m.rmse_all);
    for c in &m.columns {
        println!("  {:>4} {:>12} missing {:>3}  score {:?}", c.column, c.kind, c.n_missing, c.score);
    }
    Ok(())
}
