//! SOI controllers acting on one cylinder-cycle at a time.
//!
//! All controllers share the [`Controller`] interface used by the simulation
//! loop. Per-cylinder state is indexed by zero-based cylinder index; no
//! control law couples cylinders.

pub mod adaptive;
pub mod feedforward;
pub mod lyapunov;
pub mod pid;

use serde::{Deserialize, Serialize};

pub use adaptive::{AdaptiveController, AdaptiveObserverState};
pub use feedforward::FeedforwardController;
pub use pid::{PidController, PidGains, PidState};

/// Inclusive SOI limits, CAD aTDC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoiBand {
    pub min: f64,
    pub max: f64,
}

impl SoiBand {
    /// The SOI range the published model was calibrated over.
    pub const CALIBRATED: SoiBand = SoiBand {
        min: -10.0,
        max: 0.0,
    };

    /// Operating band of the virtual engine. Its ignition delays are short
    /// enough that the reference CA50 values need injection after TDC.
    pub const EXTENDED: SoiBand = SoiBand {
        min: -10.0,
        max: 10.0,
    };

    pub fn clamp(&self, raw: f64) -> (f64, bool) {
        let soi = raw.clamp(self.min, self.max);
        (soi, soi != raw)
    }

    pub fn contains(&self, soi: f64) -> bool {
        (self.min..=self.max).contains(&soi)
    }
}

impl Default for SoiBand {
    fn default() -> Self {
        Self::EXTENDED
    }
}

/// Default SOI of the first fuelled cycle, CAD aTDC.
pub const BOOTSTRAP_SOI: f64 = -5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    pub soi: f64,
    /// Zero-based.
    pub cylinder_index: usize,
    pub cycle_index: usize,
    /// The control law asked for an SOI outside the band.
    pub clamped: bool,
    /// Pre-clamp value.
    pub raw_soi: f64,
}

impl ControlCommand {
    pub fn clamped_from(
        raw: f64,
        band: &SoiBand,
        cylinder_index: usize,
        cycle_index: usize,
    ) -> Self {
        let (soi, clamped) = band.clamp(raw);
        Self {
            soi,
            cylinder_index,
            cycle_index,
            clamped,
            raw_soi: raw,
        }
    }
}

/// Quantities available to a controller at a firing event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub time: f64,
    pub n: f64,
    pub phi: f64,
    pub p_im: f64,
    pub t_im: f64,
    /// From the oxygen sensors.
    pub egr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Adaptive,
    Feedforward,
    Pid,
}

impl ControllerKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Adaptive => "adaptive",
            Self::Feedforward => "feedforward",
            Self::Pid => "pid",
        }
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "adaptive" => Ok(Self::Adaptive),
            "feedforward" => Ok(Self::Feedforward),
            "pid" => Ok(Self::Pid),
            other => Err(crate::Error::Config(format!(
                "unknown controller '{other}' (expected adaptive, feedforward or pid)"
            ))),
        }
    }
}

pub trait Controller {
    fn kind(&self) -> ControllerKind;

    /// Called once before the first cycle with the conditions the controller
    /// assumes at start-up.
    fn initialize(&mut self, start: &Measurement, reference: f64);

    /// SOI for `cylinder` in the current cycle.
    fn command(
        &mut self,
        cylinder: usize,
        cycle: usize,
        m: &Measurement,
        reference: f64,
    ) -> ControlCommand;

    /// Feedback after a fuelled cycle with the applied command and the
    /// measured CA50.
    fn observe(
        &mut self,
        m: &Measurement,
        applied: &ControlCommand,
        ca50_measured: f64,
        reference: f64,
    );

    /// Observer estimates `(x1_hat, x2_hat)` for recording, if any.
    fn observer_state(&self, _cylinder: usize) -> Option<(f64, f64)> {
        None
    }
}
