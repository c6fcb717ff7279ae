//! Trains a small model and reports how much each token-mixing sub-block
//! changes the per-column token magnitudes.

use pmae::data::synthetic::{generate, SyntheticSpec};
use pmae::data::IncompleteDataset;
use pmae::masking::MaskingFunctionSpec;
use pmae::missingness::{generate_masks, Mechanism, PatternConfig};
use pmae::nn::{token_mixing_magnitudes, train, BlockKind, ModelConfig, TrainConfig};
use pmae::rng::rng_from_seed;

fn main() -> pmae::Result<()> {
    let ds = generate(&SyntheticSpec::diabetes_like(), 0)?;
    let gm = generate_masks(&ds, &PatternConfig::general(), Mechanism::Mcar, &mut rng_from_seed(2))?;
    let inc = IncompleteDataset::new(ds.clone(), gm.mask.clone())?;
    for kind in [BlockKind::Mixer, BlockKind::Transformer] {
        let model = ModelConfig {
            width: 16,
            encoder_depth: 2,
            decoder_depth: 1,
            ..ModelConfig::default()
        }
        .with_block_kind(kind);
        let cfg = TrainConfig {
            epochs: 20,
            lr: 3e-3,
            warmup_epochs: 2,
            ..TrainConfig::default()
        };
        let params = train(&inc, &model, &cfg, &MaskingFunctionSpec::default(), 0)?.params;
        let rows = token_mixing_magnitudes(&params, inc.zero_filled().view(), &inc.observed_mask);
        println!("{kind}:");
        for r in rows {
            println!(
                "  {:>7} {} col {:>2}: {:.3} -> {:.3}  ({} tokens)",
                r.stage.name(),
                r.block,
                r.column,
                r.before,
                r.after,
                r.tokens
            );
        }
    }
    Ok(())
}
