//! Discrete PID baseline on CA50 error with integral anti-windup, and a
//! relay experiment for picking its gains.
//!
//! Sign convention: a positive error (CA50 later than the reference) moves
//! SOI earlier.

use serde::{Deserialize, Serialize};

use super::{ControlCommand, Controller, ControllerKind, Measurement, SoiBand, BOOTSTRAP_SOI};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Accumulator limit, CAD·cycles.
    pub integral_limit: f64,
}

impl Default for PidGains {
    /// Relay-tuned at the first operating point of case 1 around SOI +5;
    /// see [`relay_autotune`].
    fn default() -> Self {
        Self {
            kp: 0.35,
            ki: 0.08,
            kd: 0.0,
            integral_limit: 200.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidState {
    pub gains: PidGains,
    pub integral: f64,
    pub previous_error: Option<f64>,
    /// SOI at zero correction.
    pub trim: f64,
}

impl PidState {
    pub fn new(gains: PidGains, trim: f64) -> Self {
        Self {
            gains,
            integral: 0.0,
            previous_error: None,
            trim,
        }
    }

    /// `−(kp e + ki Σe + kd Δe)` in CAD of SOI.
    pub fn correction(&self, error: f64) -> f64 {
        let d = self.previous_error.map_or(0.0, |p| error - p);
        -(self.gains.kp * error + self.gains.ki * self.integral + self.gains.kd * d)
    }
}

/// One PID step. The accumulator is clamped to `±integral_limit`, and the
/// integral is frozen while the output saturates in the direction the error
/// would push it.
pub fn pid_soi(
    state: &PidState,
    error: f64,
    band: &SoiBand,
    cylinder_index: usize,
    cycle_index: usize,
) -> (ControlCommand, PidState) {
    let limit = state.gains.integral_limit;
    let mut next = *state;
    next.integral = (state.integral + error).clamp(-limit, limit);
    let cmd = ControlCommand::clamped_from(
        state.trim + next.correction(error),
        band,
        cylinder_index,
        cycle_index,
    );
    if cmd.clamped {
        let pushing_out =
            (cmd.raw_soi > band.max && error < 0.0) || (cmd.raw_soi < band.min && error > 0.0);
        if pushing_out {
            next.integral = state.integral;
        }
    }
    next.previous_error = Some(error);
    (cmd, next)
}

/// Outcome of a relay experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelayResult {
    pub ultimate_gain: f64,
    /// Cycles.
    pub ultimate_period: f64,
    pub output_amplitude: f64,
    pub gains: PidGains,
}

/// Relay feedback around `center`: each cycle applies `center ∓ amplitude`
/// according to the sign of the last error, then estimates the ultimate
/// gain `4d/(πa)` and period from the sustained oscillation and applies
/// Tyreus–Luyben PI rules (`kp = Ku/3.2`, `Ti = 2.2 Pu`).
///
/// `plant` maps an SOI to a CA50 measurement for one cycle.
pub fn relay_autotune<F>(
    mut plant: F,
    reference: f64,
    center: f64,
    amplitude: f64,
    cycles: usize,
) -> RelayResult
where
    F: FnMut(f64) -> f64,
{
    let mut ys = Vec::with_capacity(cycles);
    let mut last_error = 0.0;
    for _ in 0..cycles {
        let u = if last_error > 0.0 {
            center - amplitude
        } else {
            center + amplitude
        };
        let y = plant(u);
        last_error = y - reference;
        ys.push(y);
    }
    let tail = &ys[cycles / 2..];
    let max = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let a = 0.5 * (max - min);
    let mid = 0.5 * (max + min);
    let crossings: Vec<usize> = tail
        .windows(2)
        .enumerate()
        .filter(|(_, w)| (w[0] - mid) <= 0.0 && (w[1] - mid) > 0.0)
        .map(|(i, _)| i)
        .collect();
    let period = if crossings.len() >= 2 {
        (crossings[crossings.len() - 1] - crossings[0]) as f64 / (crossings.len() - 1) as f64
    } else {
        2.0
    };
    let ku = 4.0 * amplitude / (std::f64::consts::PI * a.max(1e-12));
    let kp = ku / 3.2;
    let ki = kp / (2.2 * period);
    RelayResult {
        ultimate_gain: ku,
        ultimate_period: period,
        output_amplitude: a,
        gains: PidGains {
            kp,
            ki,
            kd: 0.0,
            ..PidGains::default()
        },
    }
}

#[derive(Debug, Clone)]
pub struct PidController {
    band: SoiBand,
    states: Vec<PidState>,
    gains: PidGains,
    pending_error: Vec<f64>,
}

impl PidController {
    pub fn new(gains: PidGains, n_cylinders: usize, band: SoiBand) -> Self {
        Self {
            band,
            states: vec![PidState::new(gains, BOOTSTRAP_SOI); n_cylinders],
            gains,
            pending_error: vec![0.0; n_cylinders],
        }
    }

    pub fn state(&self, cylinder: usize) -> &PidState {
        &self.states[cylinder]
    }
}

impl Controller for PidController {
    fn kind(&self) -> ControllerKind {
        ControllerKind::Pid
    }

    fn initialize(&mut self, _start: &Measurement, _reference: f64) {
        let g = self.gains;
        self.states
            .iter_mut()
            .for_each(|s| *s = PidState::new(g, BOOTSTRAP_SOI));
        self.pending_error.iter_mut().for_each(|e| *e = 0.0);
    }

    fn command(
        &mut self,
        cylinder: usize,
        cycle: usize,
        _m: &Measurement,
        _reference: f64,
    ) -> ControlCommand {
        let (cmd, next) = pid_soi(
            &self.states[cylinder],
            self.pending_error[cylinder],
            &self.band,
            cylinder,
            cycle,
        );
        self.states[cylinder] = next;
        cmd
    }

    fn observe(&mut self, _m: &Measurement, applied: &ControlCommand, ca50: f64, reference: f64) {
        self.pending_error[applied.cylinder_index] = ca50 - reference;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p_only() -> PidGains {
        PidGains {
            kp: 1.0,
            ki: 0.0,
            kd: 0.0,
            integral_limit: 5.0,
        }
    }

    #[test]
    fn zero_error_zero_correction() {
        let s = PidState::new(PidGains::default(), -5.0);
        let (cmd, _) = pid_soi(&s, 0.0, &SoiBand::EXTENDED, 0, 3);
        assert_eq!(cmd.soi, -5.0);
    }

    #[test]
    fn positive_error_advances_soi() {
        let s = PidState::new(p_only(), -5.0);
        let (cmd, _) = pid_soi(&s, 1.0, &SoiBand::EXTENDED, 0, 3);
        assert_eq!(cmd.soi - s.trim, -1.0);
    }

    #[test]
    fn windup_is_bounded_under_saturation() {
        let gains = PidGains {
            kp: 0.5,
            ki: 0.5,
            kd: 0.1,
            integral_limit: 5.0,
        };
        let mut s = PidState::new(gains, -5.0);
        for k in 0..1000 {
            let (cmd, next) = pid_soi(&s, -3.0, &SoiBand::CALIBRATED, 0, k);
            assert!(next.integral.abs() <= 5.0);
            assert!(SoiBand::CALIBRATED.contains(cmd.soi));
            s = next;
        }
        // unclamped band: accumulator clamps at its own limit
        let mut s = PidState::new(gains, -5.0);
        for k in 0..1000 {
            s = pid_soi(
                &s,
                2.0,
                &SoiBand {
                    min: -1e6,
                    max: 1e6,
                },
                0,
                k,
            )
            .1;
        }
        assert_eq!(s.integral, 5.0);
    }

    #[test]
    fn relay_on_static_gain_with_delay() {
        // y = g u + d with the measurement available one cycle later
        let g = 1.1;
        let r = relay_autotune(|u| g * u + 3.0, 8.0, 4.5, 1.0, 60);
        assert!((r.output_amplitude - g).abs() < 1e-12);
        assert!((r.ultimate_gain - 4.0 / (std::f64::consts::PI * g)).abs() < 1e-12);
        assert_eq!(r.ultimate_period, 2.0);
        assert!(r.gains.kp > 0.0 && r.gains.ki > 0.0);
    }
}
