//! Model-based SOI: the closed-form CA50 model solved for SOI.
//!
//! The SOI state is compressed to the cylinder volume at the previous
//! cycle's SOI, so the law is explicit; the lag settles in a few cycles.

use super::adaptive::MEAN_RESIDUAL_FRACTION;
use super::{ControlCommand, Controller, ControllerKind, Measurement, SoiBand, BOOTSTRAP_SOI};
use crate::coefficients::CoefficientSet;
use crate::combustion::{ca50_burn_term, ignition_delay, CombustionCoefficients};
use crate::error::Result;
use crate::gas::{self, GasState};
use crate::geometry::EngineGeometry;

/// Operating inputs of [`feedforward_soi`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedforwardInputs {
    pub ca50_ref: f64,
    pub egr: f64,
    pub n: f64,
    pub phi: f64,
    pub p_ivc: f64,
    pub t_ivc: f64,
    pub v_ivc: f64,
    pub v_soi_prev: f64,
    pub x_r_bar: f64,
}

/// `SOI = CA50_ref − ID(P_SOI, T_SOI) − c18 (1 + EGR + X̄_r)^c16 φ^c17`,
/// clamped to `band`. Returns the unclamped value on the command as well.
pub fn feedforward_soi(
    inputs: &FeedforwardInputs,
    coeffs: &CombustionCoefficients,
    band: &SoiBand,
    cylinder_index: usize,
    cycle_index: usize,
) -> Result<ControlCommand> {
    let i = inputs;
    let ivc = GasState::new(i.p_ivc, i.t_ivc, 0.0)?;
    let soi_state = gas::polytropic_to_soi(ivc, i.v_ivc, i.v_soi_prev, coeffs.k_c);
    let raw = i.ca50_ref
        - ignition_delay(&soi_state, i.n, i.egr, i.phi, coeffs)?
        - ca50_burn_term(i.egr + i.x_r_bar, i.phi, coeffs);
    Ok(ControlCommand::clamped_from(
        raw,
        band,
        cylinder_index,
        cycle_index,
    ))
}

#[derive(Debug, Clone)]
pub struct FeedforwardController {
    model: CoefficientSet,
    geometry: EngineGeometry,
    band: SoiBand,
    x_r_bar: f64,
    last_soi: Vec<f64>,
}

impl FeedforwardController {
    pub fn new(model: CoefficientSet, geometry: EngineGeometry, band: SoiBand) -> Self {
        let n = model.intake.len();
        Self {
            model,
            geometry,
            band,
            x_r_bar: MEAN_RESIDUAL_FRACTION,
            last_soi: vec![BOOTSTRAP_SOI; n],
        }
    }

    pub fn with_mean_residual(mut self, x_r_bar: f64) -> Self {
        self.x_r_bar = x_r_bar;
        self
    }

    pub fn inputs(
        &self,
        cylinder: usize,
        m: &Measurement,
        reference: f64,
    ) -> Result<FeedforwardInputs> {
        let intake = &self.model.intake[cylinder];
        Ok(FeedforwardInputs {
            ca50_ref: reference,
            egr: m.egr,
            n: m.n,
            phi: m.phi,
            p_ivc: gas::p_ivc(intake, m.t_im, m.n, m.p_im)?,
            t_ivc: gas::t_ivc(intake, m.t_im, m.p_im, m.phi, m.n, m.egr)?,
            v_ivc: self.geometry.volume(self.geometry.ivc),
            v_soi_prev: self.geometry.volume(self.last_soi[cylinder]),
            x_r_bar: self.x_r_bar,
        })
    }
}

impl Controller for FeedforwardController {
    fn kind(&self) -> ControllerKind {
        ControllerKind::Feedforward
    }

    fn initialize(&mut self, _start: &Measurement, _reference: f64) {
        self.last_soi.iter_mut().for_each(|s| *s = BOOTSTRAP_SOI);
    }

    fn command(
        &mut self,
        cylinder: usize,
        cycle: usize,
        m: &Measurement,
        reference: f64,
    ) -> ControlCommand {
        let inputs = self
            .inputs(cylinder, m, reference)
            .expect("measured conditions inside the model domain");
        feedforward_soi(&inputs, &self.model.combustion, &self.band, cylinder, cycle)
            .expect("measured conditions inside the model domain")
    }

    fn observe(&mut self, _m: &Measurement, applied: &ControlCommand, _ca50: f64, _reference: f64) {
        self.last_soi[applied.cylinder_index] = applied.soi;
    }
}
