//! Ground-truth cylinder model of the virtual engine.
//!
//! The plant runs the unsimplified chain: per-cylinder intake models, a
//! motored polytropic compression trace, the knock integral for SOC, the
//! burn-duration model and the Wiebe CA50. It differs from the controller
//! model through seeded coefficient perturbations, a polytropic exponent
//! that falls with EGR, and a jittered residual fraction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::actuator::DEFAULT_EGR_TIME_CONSTANT;
use super::manifold::ManifoldParams;
use crate::coefficients::CoefficientSet;
use crate::combustion::{self, WiebeParams, PRODUCTION_STEP};
use crate::control::{ControlCommand, SoiBand};
use crate::error::{Error, Result};
use crate::gas::{self, GasState, RESIDUAL_RANGE};
use crate::geometry::EngineGeometry;

pub const MAX_PERTURBATION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MismatchConfig {
    /// Half-width of the uniform relative perturbation of each `c1..c9`.
    pub intake_perturbation: f64,
    /// Half-width of the uniform relative perturbation of `c10..c18`.
    pub combustion_perturbation: f64,
    pub seed: u64,
    /// Relative offset of the plant polytropic exponent from `k_c`.
    pub k_offset: f64,
    /// Reduction of the plant polytropic exponent per unit EGR fraction.
    pub k_egr_slope: f64,
}

impl Default for MismatchConfig {
    fn default() -> Self {
        Self {
            intake_perturbation: 0.03,
            combustion_perturbation: 0.0,
            seed: 2024,
            k_offset: 0.0,
            k_egr_slope: 0.02,
        }
    }
}

impl MismatchConfig {
    pub fn none() -> Self {
        Self {
            intake_perturbation: 0.0,
            combustion_perturbation: 0.0,
            seed: 0,
            k_offset: 0.0,
            k_egr_slope: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Standard deviation of the CA50 measurement noise, CAD.
    pub ca50_std: f64,
    /// Truncation of the CA50 noise, CAD.
    pub ca50_bound: Option<f64>,
    /// Standard deviation of each oxygen-sensor reading (mole fraction).
    pub oxygen_std: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            ca50_std: 0.0,
            ca50_bound: None,
            oxygen_std: 0.0,
        }
    }
}

impl NoiseConfig {
    /// The noise-study setting: σ = 0.25 CAD truncated at ±0.5 CAD.
    pub fn measurement_study() -> Self {
        Self {
            ca50_std: 0.25,
            ca50_bound: Some(0.5),
            oxygen_std: 0.0,
        }
    }

    /// Standard deviation of the configured CA50 noise after truncation.
    pub fn effective_ca50_std(&self) -> f64 {
        let s = self.ca50_std;
        match self.ca50_bound {
            None => s,
            Some(b) if s > 0.0 => {
                // variance of N(0, s²) truncated to [−b, b]
                let c = b / s;
                let pdf = (-0.5 * c * c).exp() / (2.0 * std::f64::consts::PI).sqrt();
                let mass = erf(c / std::f64::consts::SQRT_2);
                s * (1.0 - 2.0 * c * pdf / mass).sqrt()
            }
            Some(_) => 0.0,
        }
    }
}

/// Abramowitz–Stegun 7.1.26; absolute error below 1.5e-7.
fn erf(x: f64) -> f64 {
    let t = 1.0 / (1.0 + 0.327_591_1 * x.abs());
    let y = 1.0
        - (((((1.061_405_429 * t - 1.453_152_027) * t) + 1.421_413_741) * t - 0.284_496_736) * t
            + 0.254_829_592)
            * t
            * (-x * x).exp();
    y.copysign(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResidualConfig {
    /// Half-width of the uniform jitter around the EGR-driven trend.
    pub jitter: f64,
    pub min: f64,
    pub max: f64,
}

impl Default for ResidualConfig {
    fn default() -> Self {
        Self {
            jitter: 0.003,
            min: RESIDUAL_RANGE.0,
            max: RESIDUAL_RANGE.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantConfig {
    /// Unperturbed plant coefficients.
    pub coefficients: CoefficientSet,
    pub geometry: EngineGeometry,
    pub wiebe: WiebeParams,
    pub mismatch: MismatchConfig,
    pub noise: NoiseConfig,
    pub residual: ResidualConfig,
    pub manifold: ManifoldParams,
    /// s
    pub egr_time_constant: f64,
    /// Knock-integral step, CAD.
    pub quadrature_step: f64,
    pub soi_band: SoiBand,
    pub firing_order: Vec<usize>,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            coefficients: CoefficientSet::published(),
            geometry: EngineGeometry::default(),
            wiebe: WiebeParams::default(),
            mismatch: MismatchConfig::default(),
            noise: NoiseConfig::default(),
            residual: ResidualConfig::default(),
            manifold: ManifoldParams::default(),
            egr_time_constant: DEFAULT_EGR_TIME_CONSTANT,
            quadrature_step: PRODUCTION_STEP,
            soi_band: SoiBand::default(),
            firing_order: super::firing::DEFAULT_FIRING_ORDER.to_vec(),
        }
    }
}

impl PlantConfig {
    /// Plant identical to the controller model: no perturbation, constant
    /// polytropic exponent, no residual jitter, no noise.
    pub fn matched() -> Self {
        Self {
            mismatch: MismatchConfig::none(),
            residual: ResidualConfig {
                jitter: 0.0,
                ..ResidualConfig::default()
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.coefficients.validate()?;
        self.geometry.validate()?;
        let m = &self.mismatch;
        for (name, v) in [
            ("intake_perturbation", m.intake_perturbation),
            ("combustion_perturbation", m.combustion_perturbation),
            ("k_offset", m.k_offset),
        ] {
            if !(v.abs() <= MAX_PERTURBATION) || (name != "k_offset" && v < 0.0) {
                return Err(Error::Config(format!(
                    "{name} = {v} outside [0, {MAX_PERTURBATION}]"
                )));
            }
        }
        let k = &self.coefficients.combustion.k_c;
        if !(k * (1.0 + m.k_offset) - m.k_egr_slope > 1.0) || !(m.k_egr_slope >= 0.0) {
            return Err(Error::Config(
                "plant polytropic exponent must stay above 1 for EGR in [0, 1]".into(),
            ));
        }
        let n = &self.noise;
        if !(n.ca50_std >= 0.0)
            || !(n.oxygen_std >= 0.0)
            || n.ca50_bound.is_some_and(|b| !(b > 0.0))
        {
            return Err(Error::Config("noise magnitudes must be nonnegative".into()));
        }
        let r = &self.residual;
        if !(r.jitter >= 0.0 && r.min >= 0.0 && r.min <= r.max && r.max < 1.0) {
            return Err(Error::Config("residual configuration out of range".into()));
        }
        if !(self.egr_time_constant > 0.0 && self.quadrature_step > 0.0) {
            return Err(Error::Config(
                "time constants and steps must be positive".into(),
            ));
        }
        let mut order = self.firing_order.clone();
        order.sort_unstable();
        if order != (1..=self.coefficients.intake.len()).collect::<Vec<_>>() {
            return Err(Error::Config(format!(
                "firing order {:?} is not a permutation of the cylinders",
                self.firing_order
            )));
        }
        if !(self.manifold.natural_period > 0.0 && self.manifold.damping_ratio > 0.0) {
            return Err(Error::Config("manifold parameters must be positive".into()));
        }
        Ok(())
    }
}

/// Inputs of one cylinder-cycle at its firing time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleConditions {
    pub cycle: usize,
    pub segment: usize,
    pub segment_cycle: usize,
    pub time: f64,
    pub n: f64,
    pub phi: f64,
    pub p_im: f64,
    pub t_im: f64,
    /// Actual EGR fraction.
    pub egr: f64,
    pub egr_target: f64,
    pub ca50_ref: f64,
}

/// One row of the record stream. Combustion fields are `None` on the
/// unfuelled cycle and on misfires.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle: usize,
    pub segment: usize,
    pub segment_cycle: usize,
    pub time: f64,
    /// 1-based.
    pub cylinder: usize,
    pub n: f64,
    pub phi: f64,
    pub p_im: f64,
    pub t_im: f64,
    pub egr: f64,
    pub x_r: f64,
    pub ca50_ref: f64,
    pub soi: Option<f64>,
    pub clamped: bool,
    pub p_ivc: f64,
    pub t_ivc: f64,
    pub p_soi: Option<f64>,
    pub t_soi: Option<f64>,
    pub soc: Option<f64>,
    pub bd: Option<f64>,
    pub ca50_true: Option<f64>,
    pub ca50_measured: Option<f64>,
    pub misfire: bool,
    pub x1_hat: Option<f64>,
    pub x2_hat: Option<f64>,
}

impl CycleRecord {
    /// True CA50 minus reference.
    pub fn error(&self) -> Option<f64> {
        self.ca50_true.map(|c| c - self.ca50_ref)
    }

    pub fn measured_error(&self) -> Option<f64> {
        self.ca50_measured.map(|c| c - self.ca50_ref)
    }
}

/// Random draws consumed by one cylinder-cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleDraws {
    /// Uniform in [−1, 1].
    pub residual: f64,
    pub ca50_noise: f64,
}

#[derive(Debug, Clone)]
pub struct Plant {
    config: PlantConfig,
    truth: CoefficientSet,
    c15: f64,
    noise: Normal<f64>,
}

impl Plant {
    pub fn new(config: PlantConfig) -> Result<Self> {
        config.validate()?;
        let truth = perturbed(&config.coefficients, &config.mismatch);
        let c15 = config.coefficients.combustion.c15(&config.wiebe);
        let noise = Normal::new(0.0, config.noise.ca50_std)
            .map_err(|e| Error::Config(format!("ca50 noise: {e}")))?;
        Ok(Self {
            config,
            truth,
            c15,
            noise,
        })
    }

    pub fn config(&self) -> &PlantConfig {
        &self.config
    }

    /// Coefficients actually used by the plant after perturbation.
    pub fn truth(&self) -> &CoefficientSet {
        &self.truth
    }

    pub fn n_cylinders(&self) -> usize {
        self.truth.intake.len()
    }

    pub fn polytropic_exponent(&self, egr: f64) -> f64 {
        let m = &self.config.mismatch;
        self.truth.combustion.k_c * (1.0 + m.k_offset) - m.k_egr_slope * egr
    }

    pub fn residual_fraction(&self, egr_target: f64, unit_draw: f64) -> f64 {
        let r = &self.config.residual;
        (gas::nominal_residual_fraction(egr_target) + r.jitter * unit_draw).clamp(r.min, r.max)
    }

    /// Draws for one cycle. The stream consumption is the same whatever the
    /// noise settings, so records stay aligned across configurations.
    pub fn draw(&self, rng: &mut ChaCha8Rng) -> CycleDraws {
        let residual = rng.random_range(-1.0..=1.0);
        let ca50_noise = match self.config.noise.ca50_bound {
            Some(b) if self.config.noise.ca50_std > 0.0 => loop {
                let v = self.noise.sample(rng);
                if v.abs() <= b {
                    break v;
                }
            },
            _ => self.noise.sample(rng),
        };
        CycleDraws {
            residual,
            ca50_noise,
        }
    }

    /// Oxygen-sensor EGR estimate for the actual EGR and equivalence ratio.
    pub fn sensed_egr(&self, egr: f64, phi: f64, rng: &mut ChaCha8Rng) -> f64 {
        let (amb, int, exh) = gas::oxygen_fractions(egr, phi);
        let s = self.config.noise.oxygen_std;
        if s == 0.0 {
            return gas::egr_fraction(amb, int, exh).unwrap_or(egr);
        }
        let n = Normal::new(0.0, s).expect("validated");
        let int = (int + n.sample(rng)).clamp(0.0, 1.0);
        let exh = (exh + n.sample(rng)).clamp(0.0, 1.0);
        gas::egr_fraction(amb, int.min(amb), exh).unwrap_or(egr)
    }

    /// Runs one cylinder-cycle. `command = None` is an unfuelled cycle.
    pub fn cylinder_cycle(
        &self,
        cylinder_index: usize,
        command: Option<&ControlCommand>,
        cond: &CycleConditions,
        draws: CycleDraws,
    ) -> Result<CycleRecord> {
        let intake = &self.truth.intake[cylinder_index];
        let c = &self.truth.combustion;
        let geom = &self.config.geometry;
        let t_ivc = gas::t_ivc(intake, cond.t_im, cond.p_im, cond.phi, cond.n, cond.egr)?;
        let p_ivc = gas::p_ivc(intake, cond.t_im, cond.n, cond.p_im)?;
        let x_r = self.residual_fraction(cond.egr_target, draws.residual);
        let mut rec = CycleRecord {
            cycle: cond.cycle,
            segment: cond.segment,
            segment_cycle: cond.segment_cycle,
            time: cond.time,
            cylinder: cylinder_index + 1,
            n: cond.n,
            phi: cond.phi,
            p_im: cond.p_im,
            t_im: cond.t_im,
            egr: cond.egr,
            x_r,
            ca50_ref: cond.ca50_ref,
            soi: None,
            clamped: false,
            p_ivc,
            t_ivc,
            p_soi: None,
            t_soi: None,
            soc: None,
            bd: None,
            ca50_true: None,
            ca50_measured: None,
            misfire: false,
            x1_hat: None,
            x2_hat: None,
        };
        let Some(cmd) = command else {
            return Ok(rec);
        };
        let soi = cmd.soi;
        rec.soi = Some(soi);
        rec.clamped = cmd.clamped;
        let k = self.polytropic_exponent(cond.egr);
        let ivc = GasState::new(p_ivc, t_ivc, geom.ivc)?;
        let soi_state = gas::polytropic_to_soi(ivc, geom.volume(geom.ivc), geom.volume(soi), k);
        rec.p_soi = Some(soi_state.pressure);
        rec.t_soi = Some(soi_state.temperature);
        let soc = match combustion::soc_full_polytropic(
            geom,
            ivc,
            k,
            soi,
            geom.evo,
            self.config.quadrature_step,
            cond.n,
            cond.egr,
            cond.phi,
            c,
        ) {
            Ok(s) => s,
            Err(Error::NoIgnition { .. }) => {
                rec.misfire = true;
                return Ok(rec);
            }
            Err(e) => return Err(e),
        };
        let bd = combustion::burn_duration(
            gas::dilution_fraction(cond.egr, x_r),
            cond.phi,
            self.c15,
            c,
        )?;
        let ca50 = combustion::ca50_from_wiebe(soc, bd, &self.config.wiebe);
        rec.soc = Some(soc);
        rec.bd = Some(bd);
        rec.ca50_true = Some(ca50);
        rec.ca50_measured = Some(ca50 + draws.ca50_noise);
        Ok(rec)
    }
}

fn perturbed(base: &CoefficientSet, m: &MismatchConfig) -> CoefficientSet {
    let mut rng = ChaCha8Rng::seed_from_u64(m.seed);
    let mut out = base.clone();
    let factor = |half: f64, rng: &mut ChaCha8Rng| {
        let u: f64 = rng.random_range(-1.0..=1.0);
        1.0 + half * u
    };
    for intake in &mut out.intake {
        let mut c = intake.as_array();
        for v in &mut c {
            *v *= factor(m.intake_perturbation, &mut rng);
        }
        *intake = crate::gas::IntakeCoefficients::from_array(c);
    }
    let cc = &mut out.combustion;
    for v in [
        &mut cc.c10,
        &mut cc.c11,
        &mut cc.c12,
        &mut cc.c13,
        &mut cc.c14,
        &mut cc.c16,
        &mut cc.c17,
        &mut cc.c18,
    ] {
        *v *= factor(m.combustion_perturbation, &mut rng);
    }
    out
}
