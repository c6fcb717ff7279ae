//! Draws observed masks for every pattern and mechanism on a synthetic table
//! and compares realised observed rates with their targets.

use pmae::data::synthetic::{generate, SyntheticSpec};
use pmae::missingness::{generate_masks, ExpandedFeatures, Mechanism, Pattern, PatternConfig};
use pmae::rng::{derive_seed, stream_rng, Stream};

fn main() -> pmae::Result<()> {
    let ds = generate(&SyntheticSpec::diabetes_like(), 0)?;
    let x = ExpandedFeatures::from_dataset(&ds);
    for pattern in [Pattern::Monotone, Pattern::QuasiMonotone, Pattern::General] {
        for mechanism in [Mechanism::Mcar, Mechanism::Mar, Mechanism::Mnar] {
            let seed = derive_seed(42, &[pattern as u64, mechanism as u64]);
            let mut rng = stream_rng(seed, Stream::Missingness);
            let gm = generate_masks(&ds, &PatternConfig::for_pattern(pattern), mechanism, &mut rng)?;
            let observed = gm.mask.count() as f64 / (ds.n_rows() * ds.n_cols()) as f64;
            println!("{pattern:>14} {mechanism:?}: {} columns with missingness, {observed:.3} observed overall", gm.missing_set.len());
            let rates = gm.mask.column_means();
            for m in &gm.models {
                println!(
                    "    column {:>2}: target {:.3}  expected {:.3}  realised {:.3}",
                    m.target_column,
                    m.target_rate,
                    m.mean_rate(&x),
                    rates[m.target_column]
                );
            }
        }
    }
    Ok(())
}
