//! Semi-synthetic missingness: logistic observation models per column and
//! the monotone, quasi-monotone and general patterns.

mod generate;
mod mask;
mod pattern;
mod propensity;

pub use generate::{generate_masks, GeneratedMissingness, MAX_ROW_REDRAWS};
pub use mask::MaskMatrix;
pub use pattern::{sample_missing_columns, Mechanism, Pattern, PatternConfig, RateDist};
pub use propensity::{
    build_propensity, calibrate_intercept, logit, sigmoid, ExpandedFeatures, PropensityModel,
    CALIBRATION_TOL, INTERCEPT_BRACKET,
};
