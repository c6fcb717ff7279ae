//! Complete-case and inverse-propensity weighted loss estimates against the
//! full-data loss, using the true propensities of a generated mask and the
//! per-entry errors of a mean fill.

use pmae::baselines::naive_fill_values;
use pmae::data::synthetic::{generate, SyntheticSpec};
use pmae::data::IncompleteDataset;
use pmae::eval::ips_diagnostic;
use pmae::missingness::{generate_masks, ExpandedFeatures, Mechanism, PatternConfig};
use pmae::rng::{stream_rng, Stream};

fn main() -> pmae::Result<()> {
    let ds = generate(&SyntheticSpec::wine_like(), 0)?;
    let features = ExpandedFeatures::from_dataset(&ds);
    for mechanism in [Mechanism::Mcar, Mechanism::Mnar] {
        let mut rng = stream_rng(9, Stream::Missingness);
        let gm = generate_masks(&ds, &PatternConfig::general(), mechanism, &mut rng)?;
        let fill = naive_fill_values(&IncompleteDataset::new(ds.clone(), gm.mask.clone())?)?;
        let losses = ndarray::Array2::from_shape_fn(ds.values.dim(), |(i, j)| (ds.values[[i, j]] - fill[j]).powi(2));
        let propensities = gm.propensity_matrix(&features);
        let r = ips_diagnostic(&losses, &propensities, 2_000, &mut stream_rng(9, Stream::Diagnostics))?;
        println!(
            "{mechanism:?}: full {:.5}  naive {:.5} ± {:.5}  ips {:.5} ± {:.5}",
            r.full, r.naive.mean, r.naive.se, r.ips.mean, r.ips.se
        );
    }
    Ok(())
}
