//! Audit of the quadratic Lyapunov function `V(k) = e(k)²` for the adaptive
//! loop. With a matched plant and frozen true states the observer update
//! gives `e(k+1) = 0.7 e(k)`, hence `ΔV(k) = −0.51 e(k)²`.

use serde::{Deserialize, Serialize};

use super::adaptive::{adaptive_control_law, adaptive_update, AdaptiveObserverState};
use super::SoiBand;

pub const CONTRACTION: f64 = 0.7;
pub const DECREMENT: f64 = 1.0 - CONTRACTION * CONTRACTION;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovAudit {
    pub v: Vec<f64>,
    pub delta_v: Vec<f64>,
    /// `e(k+1) / e(k)`; NaN where `e(k) = 0`.
    pub ratios: Vec<f64>,
    /// Largest relative deviation of ΔV from `−0.51 e²` and of the ratio
    /// from 0.7, over steps with nonzero error.
    pub max_relative_deviation: f64,
    /// False when the frozen-state assumption does not hold; the checks are
    /// then reported but carry no meaning.
    pub applicable: bool,
}

impl LyapunovAudit {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.applicable && self.max_relative_deviation <= tolerance
    }
}

pub fn lyapunov_audit(errors: &[f64], states_frozen: bool) -> LyapunovAudit {
    let v: Vec<f64> = errors.iter().map(|e| e * e).collect();
    let mut delta_v = Vec::new();
    let mut ratios = Vec::new();
    let mut worst: f64 = 0.0;
    for k in 0..errors.len().saturating_sub(1) {
        let dv = v[k + 1] - v[k];
        delta_v.push(dv);
        let e = errors[k];
        if e == 0.0 {
            ratios.push(f64::NAN);
            if errors[k + 1] != 0.0 {
                worst = f64::INFINITY;
            }
            continue;
        }
        let expected = -DECREMENT * e * e;
        worst = worst.max(((dv - expected) / expected).abs());
        let ratio = errors[k + 1] / e;
        ratios.push(ratio);
        worst = worst.max(((ratio - CONTRACTION) / CONTRACTION).abs());
    }
    LyapunovAudit {
        v,
        delta_v,
        ratios,
        max_relative_deviation: worst,
        applicable: states_frozen,
    }
}

/// Error sequence `y − y_d` of the adaptive law on the plant
/// `y = u + α x1 + β x2` with constant `α, β, x1, x2`. The observer starts
/// offset from the true states along `(α, β)` so that `e(0) = e0`.
pub fn matched_plant_errors(
    y_d: f64,
    alpha: f64,
    beta: f64,
    true_x: (f64, f64),
    e0: f64,
    cycles: usize,
) -> Vec<f64> {
    let norm = alpha * alpha + beta * beta;
    let mut obs = AdaptiveObserverState {
        x1_hat: true_x.0 - e0 * alpha / norm,
        x2_hat: true_x.1 - e0 * beta / norm,
        alpha,
        beta,
        cylinder_index: 0,
    };
    let unbounded = SoiBand {
        min: f64::NEG_INFINITY,
        max: f64::INFINITY,
    };
    let truth = alpha * true_x.0 + beta * true_x.1;
    let mut errors = Vec::with_capacity(cycles + 1);
    for k in 0..=cycles {
        let u = adaptive_control_law(y_d, &obs, &unbounded, k).soi;
        debug_assert!((u - (y_d - obs.predicted_offset())).abs() == 0.0);
        // y − y_d = u + truth − y_d; with the unclamped law this is exactly
        // truth − α x̂1 − β x̂2, evaluated without the reference's rounding
        let e = truth - obs.predicted_offset();
        errors.push(e);
        obs = adaptive_update(&obs, y_d + e, y_d);
    }
    errors
}
