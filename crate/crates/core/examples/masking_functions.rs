//! Tabulates every masking-rate variant and samples an additional mask for
//! one batch.

use pmae::masking::{batch_rates, sample_additional_mask, MaskingFunctionSpec, MaskingKind};
use pmae::missingness::MaskMatrix;
use pmae::rng::rng_from_seed;

fn main() -> pmae::Result<()> {
    let grid = [0.1, 0.2, 0.3, 0.5, 0.7, 0.9, 1.0];
    print!("{:>13}", "p_obs");
    for p in grid {
        print!("{p:>8.2}");
    }
    println!();
    for kind in MaskingKind::ALL {
        let spec = MaskingFunctionSpec::of_kind(kind);
        print!("{:>13}", kind.name());
        for p in grid {
            print!("{:>8.4}", spec.rate(p));
        }
        println!();
    }

    // Columns observed at 100%, 75%, 50% and 25% of the batch.
    let observed = MaskMatrix::from_fn(8, 4, |i, j| i < 8 - 2 * j);
    let spec = MaskingFunctionSpec::default();
    let rates = batch_rates(&spec, &observed)?;
    let pair = sample_additional_mask(&observed, &rates, &mut rng_from_seed(1))?;
    println!("\nlogit rates per column: {rates:.3?}");
    println!("observed (m), visible (m+), hidden (m-):");
    for i in 0..8 {
        let row = |m: &MaskMatrix| (0..4).map(|j| if m.get(i, j) { '1' } else { '.' }).collect::<String>();
        println!("  {}  {}  {}", row(&observed), row(&pair.m_plus), row(&pair.m_minus));
    }
    Ok(())
}
