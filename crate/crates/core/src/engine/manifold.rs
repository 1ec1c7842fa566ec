//! Intake manifold pressure as an underdamped second-order lag.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ManifoldParams {
    /// s
    pub natural_period: f64,
    pub damping_ratio: f64,
    /// Integration substep, s.
    pub substep: f64,
    /// Pressure at start-up, bar.
    pub ambient: f64,
}

impl Default for ManifoldParams {
    /// First peak about 1.36 s after a step, within ±2 % by about 5.5 s.
    fn default() -> Self {
        Self {
            natural_period: 2.6,
            damping_ratio: 0.3,
            substep: 1e-3,
            ambient: 1.0,
        }
    }
}

impl ManifoldParams {
    pub fn omega(&self) -> f64 {
        std::f64::consts::TAU / self.natural_period
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldState {
    /// bar
    pub p_im: f64,
    pub p_im_target: f64,
    /// K
    pub t_im: f64,
    /// bar/s
    pub velocity: f64,
}

impl ManifoldState {
    pub fn at_rest(p_im: f64, p_im_target: f64, t_im: f64) -> Self {
        Self {
            p_im,
            p_im_target,
            t_im,
            velocity: 0.0,
        }
    }
}

fn rk4(p: f64, v: f64, target: f64, w: f64, z: f64, h: f64) -> (f64, f64) {
    let acc = |p: f64, v: f64| w * w * (target - p) - 2.0 * z * w * v;
    let (k1p, k1v) = (v, acc(p, v));
    let (k2p, k2v) = (v + 0.5 * h * k1v, acc(p + 0.5 * h * k1p, v + 0.5 * h * k1v));
    let (k3p, k3v) = (v + 0.5 * h * k2v, acc(p + 0.5 * h * k2p, v + 0.5 * h * k2v));
    let (k4p, k4v) = (v + h * k3v, acc(p + h * k3p, v + h * k3v));
    (
        p + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
        v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
    )
}

/// Advances by `dt` seconds toward the held target in substeps no longer
/// than `params.substep`.
pub fn manifold_step(state: &ManifoldState, params: &ManifoldParams, dt: f64) -> ManifoldState {
    debug_assert!(dt >= 0.0);
    if dt == 0.0 {
        return *state;
    }
    let n = (dt / params.substep).ceil().max(1.0) as usize;
    let h = dt / n as f64;
    let (w, z) = (params.omega(), params.damping_ratio);
    let (mut p, mut v) = (state.p_im, state.velocity);
    for _ in 0..n {
        (p, v) = rk4(p, v, state.p_im_target, w, z, h);
    }
    ManifoldState {
        p_im: p,
        velocity: v,
        ..*state
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Peak time and overshoot fraction of a step, and the last time the
    /// response is outside ±2 % of the step.
    fn step_metrics(params: &ManifoldParams, from: f64, to: f64) -> (f64, f64, f64) {
        let mut s = ManifoldState::at_rest(from, to, 300.0);
        let dt = 1e-3;
        let (mut peak, mut peak_t, mut last_out) = (from, 0.0, 0.0);
        for k in 1..=12_000 {
            s = manifold_step(&s, params, dt);
            let t = k as f64 * dt;
            if s.p_im > peak {
                peak = s.p_im;
                peak_t = t;
            }
            if (s.p_im - to).abs() > 0.02 * (to - from) {
                last_out = t;
            }
        }
        (peak_t, (peak - to) / (to - from), last_out)
    }

    #[test]
    fn equilibrium_is_fixed() {
        let s = ManifoldState::at_rest(2.0, 2.0, 300.0);
        assert_eq!(manifold_step(&s, &ManifoldParams::default(), 0.5), s);
    }

    #[test]
    fn step_shape() {
        let p = ManifoldParams::default();
        let (peak_t, overshoot, settle) = step_metrics(&p, 1.0, 2.0);
        assert!(overshoot > 0.05, "{overshoot}");
        assert!(settle < 6.0, "{settle}");
        let (peak_t_22, _, _) = step_metrics(&p, 1.0, 2.2);
        assert!((peak_t_22 - 1.3).abs() <= 0.2, "{peak_t_22}");
        assert!((peak_t - peak_t_22).abs() < 1e-9);
    }

    #[test]
    fn more_damping_less_overshoot() {
        let p = ManifoldParams::default();
        let stiff = ManifoldParams {
            damping_ratio: 2.0 * p.damping_ratio,
            ..p
        };
        assert!(step_metrics(&stiff, 1.0, 2.0).1 < step_metrics(&p, 1.0, 2.0).1);
    }

    #[test]
    fn substeps_match_analytic_response() {
        let p = ManifoldParams::default();
        let s = manifold_step(&ManifoldState::at_rest(1.0, 2.0, 300.0), &p, 1.0);
        let (w, z) = (p.omega(), p.damping_ratio);
        let wd = w * (1.0 - z * z).sqrt();
        let t = 1.0;
        let exact = 2.0 - (-z * w * t).exp() * ((wd * t).cos() + z * w / wd * (wd * t).sin());
        assert!((s.p_im - exact).abs() < 1e-10);
    }
}
