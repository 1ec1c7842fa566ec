//! Batch gradient descent on an RMSE objective.
//!
//! Coordinates are normalised by the magnitude of the initial guess, so a
//! unit move changes every coefficient by roughly its own size. Gradients are
//! central finite differences. Each iteration backtracks (halving) until the
//! objective does not increase; after an accepted step the next trial step
//! grows by half.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_HALVINGS: usize = 30;
const STEP_GROWTH: f64 = 1.5;
const MAX_NONFINITE_STREAK: usize = 10;

pub fn rmse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != targets.len() {
        return Err(Error::Domain {
            quantity: "rmse input length",
            value: predictions.len() as f64,
        });
    }
    let sq: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok((sq / predictions.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GradientMethod {
    CentralDifference { relative_step: f64 },
}

impl Default for GradientMethod {
    fn default() -> Self {
        Self::CentralDifference {
            relative_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Initial step in normalised coordinates.
    pub learning_rate: f64,
    pub max_iterations: usize,
    /// Stop once an accepted step improves RMSE by less than this.
    pub stop_tolerance: f64,
    /// Stop once the normalised gradient norm falls below this.
    pub gradient_tolerance: f64,
    pub gradient: GradientMethod,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            max_iterations: 2000,
            stop_tolerance: 1e-9,
            gradient_tolerance: 1e-10,
            gradient: GradientMethod::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate = {} must be positive",
                self.learning_rate
            )));
        }
        if !(self.stop_tolerance >= 0.0) || !(self.gradient_tolerance >= 0.0) {
            return Err(Error::Config("tolerances must be nonnegative".into()));
        }
        let GradientMethod::CentralDifference { relative_step } = self.gradient;
        if !(relative_step > 0.0) {
            return Err(Error::Config(
                "finite-difference step must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    GradientTolerance,
    StopTolerance,
    NoDescent,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub coefficients: Vec<f64>,
    /// RMSE at the start and after every iteration. Nonincreasing.
    pub log: Vec<f64>,
    pub stop: StopReason,
}

impl FitResult {
    pub fn initial_rmse(&self) -> f64 {
        self.log[0]
    }

    pub fn final_rmse(&self) -> f64 {
        *self.log.last().unwrap()
    }
}

/// Minimises `objective` starting from `initial`. The objective is treated
/// as opaque; non-finite values count as rejections.
pub fn batch_gradient_descent<F>(
    objective: F,
    initial: &[f64],
    config: &OptimizerConfig,
) -> Result<FitResult>
where
    F: Fn(&[f64]) -> f64,
{
    config.validate()?;
    if initial.is_empty() {
        return Err(Error::Domain {
            quantity: "coefficient count",
            value: 0.0,
        });
    }
    let scale: Vec<f64> = initial
        .iter()
        .map(|v| if v.abs() > 0.0 { v.abs() } else { 1.0 })
        .collect();
    let to_x = |z: &[f64]| -> Vec<f64> { z.iter().zip(&scale).map(|(z, s)| z * s).collect() };
    let f = |z: &[f64]| objective(&to_x(z));
    let GradientMethod::CentralDifference { relative_step } = config.gradient;

    let mut z: Vec<f64> = initial.iter().zip(&scale).map(|(x, s)| x / s).collect();
    let mut fz = f(&z);
    if !fz.is_finite() {
        return Err(Error::OptimizerFailure {
            reason: "objective not finite at the initial coefficients".into(),
            log: vec![fz],
        });
    }
    let mut log = vec![fz];
    let mut step = config.learning_rate;
    let mut nonfinite_streak = 0;
    let mut stop = StopReason::MaxIterations;

    for _ in 0..config.max_iterations {
        let mut grad = vec![0.0; z.len()];
        let mut probe = z.clone();
        for i in 0..z.len() {
            let h = relative_step * z[i].abs().max(1.0);
            probe[i] = z[i] + h;
            let up = f(&probe);
            probe[i] = z[i] - h;
            let down = f(&probe);
            probe[i] = z[i];
            grad[i] = (up - down) / (2.0 * h);
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::OptimizerFailure {
                reason: "gradient not finite".into(),
                log,
            });
        }
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < config.gradient_tolerance {
            stop = StopReason::GradientTolerance;
            break;
        }

        let mut accepted = None;
        let mut saw_nonfinite = false;
        let mut trial_step = step;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = z
                .iter()
                .zip(&grad)
                .map(|(z, g)| z - trial_step * g)
                .collect();
            let ft = f(&trial);
            if !ft.is_finite() {
                saw_nonfinite = true;
            } else if ft <= fz {
                accepted = Some((trial, ft));
                break;
            }
            trial_step *= 0.5;
        }

        match accepted {
            Some((trial, ft)) => {
                nonfinite_streak = 0;
                let improvement = fz - ft;
                z = trial;
                fz = ft;
                log.push(fz);
                step = trial_step * STEP_GROWTH;
                if improvement < config.stop_tolerance {
                    stop = StopReason::StopTolerance;
                    break;
                }
            }
            None if saw_nonfinite => {
                nonfinite_streak += 1;
                log.push(fz);
                if nonfinite_streak >= MAX_NONFINITE_STREAK {
                    return Err(Error::OptimizerFailure {
                        reason: format!(
                            "objective diverged for {MAX_NONFINITE_STREAK} consecutive iterations"
                        ),
                        log,
                    });
                }
                step = trial_step;
            }
            None => {
                stop = StopReason::NoDescent;
                break;
            }
        }
    }

    Ok(FitResult {
        coefficients: to_x(&z),
        log,
        stop,
    })
}
