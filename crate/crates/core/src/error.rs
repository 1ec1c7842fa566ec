use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "oxygen sensing is ill-conditioned: ambient {ambient} and exhaust {exhaust} fractions differ by less than 1e-6"
    )]
    IllConditionedSensing { ambient: f64, exhaust: f64 },

    #[error("{quantity} = {value} is outside its valid domain")]
    Domain { quantity: &'static str, value: f64 },

    #[error("model evaluation is not finite: {0}")]
    ModelDomain(String),

    #[error("coefficient domain violated: {0}")]
    CoefficientDomain(String),

    #[error("no ignition: knock integral reached {reached:.4} by {end:.2} CAD aTDC")]
    NoIgnition { reached: f64, end: f64 },

    #[error("optimizer failed after {} iterations: {reason}", log.len())]
    OptimizerFailure { reason: String, log: Vec<f64> },

    #[error("coefficient file: {0}")]
    CoefficientFile(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("plant aborted: {0}")]
    PlantAbort(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn ensure_positive(quantity: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::Domain { quantity, value })
    }
}

pub(crate) fn ensure_fraction(quantity: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::Domain { quantity, value })
    }
}
