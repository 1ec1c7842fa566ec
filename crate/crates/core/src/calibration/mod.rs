//! Coefficient fitting by batch gradient descent on RMSE.

pub mod dataset;
pub mod fit;
pub mod optimizer;
pub mod sensitivity;

pub use dataset::{generate_synthetic, CalibrationSample, SyntheticConfig};
pub use fit::{
    calibrate, calibrate_ca50, calibrate_intake, validation_report, CalibrationOutcome,
    CombustionFit, IntakeFit, ValidationReport,
};
pub use optimizer::{batch_gradient_descent, rmse, OptimizerConfig};
pub use sensitivity::{error_response_study, reference_perturbations, SensitivityTable};
