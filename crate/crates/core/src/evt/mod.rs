//! Generalized Pareto tail modeling: distribution functions, maximum
//! likelihood fits over a threshold, threshold scans, PP/QQ diagnostics and
//! peaks-over-threshold stability checks.

mod diagnostics;
mod fit;
mod gpd;

pub use diagnostics::{
    exceedance_cdf, exceedances, pot_stability_check, pp_points, qq_points, tail_model, threshold_scan,
    EmpiricalCdf, PotReport, TailModel, ThresholdScanEntry,
};
pub use fit::{fit_gpd_mle, fit_gpd_mle_with, FitOptions, GpdFit, DEFAULT_MIN_EXCEEDANCES};
pub use gpd::{standard_quantile, Distribution, GpdParams, XI_ZERO};
