//! Mean/mode and KNN imputation on the same masked table.

use pmae::baselines::{knn_impute, naive_impute, DEFAULT_K};
use pmae::data::synthetic::{generate, SyntheticSpec};
use pmae::data::IncompleteDataset;
use pmae::eval::{imputation_accuracy, split_ground_truth};
use pmae::missingness::{generate_masks, Mechanism, Pattern, PatternConfig};
use pmae::rng::rng_from_seed;

fn main() -> pmae::Result<()> {
    let ds = generate(&SyntheticSpec::wine_like(), 0)?;
    for mechanism in [Mechanism::Mcar, Mechanism::Mnar] {
        let cfg = PatternConfig::for_pattern(Pattern::General);
        let gm = generate_masks(&ds, &cfg, mechanism, &mut rng_from_seed(5))?;
        let (x_star, _) = split_ground_truth(&ds, &gm.mask)?;
        let inc = IncompleteDataset::new(ds.clone(), gm.mask.clone())?;
        for (name, filled) in [("naive", naive_impute(&inc)?), ("knn", knn_impute(&inc, DEFAULT_K)?)] {
            let m = imputation_accuracy(&filled, &x_star, &gm.mask, &ds.schema)?;
            println!("{mechanism:?} {name:>6}: Imp.Acc {:.4}  RMSE {:.4}", m.imp_acc, m.rmse_all);
        }
    }
    Ok(())
}
