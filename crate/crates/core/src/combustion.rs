//! Start of combustion, burn duration and CA50.
//!
//! Two SOC predictors are provided. [`soc_full`] accumulates the knock
//! integral over a crank-resolved compression trace; [`soc_simplified`] is
//! the closed form obtained by freezing the integrand at the SOI state. The
//! controllers use the closed form and the full integral serves as its
//! oracle.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_fraction, ensure_positive, Error, Result};
use crate::gas::{polytropic_to_soi, GasState};
use crate::geometry::EngineGeometry;

/// Production quadrature step for the knock integral, CAD.
pub const PRODUCTION_STEP: f64 = 0.1;
/// Oracle quadrature step, CAD.
pub const ORACLE_STEP: f64 = 0.01;
/// First trace length tried past SOI before extending to EVO, CAD.
const INITIAL_TRACE_SPAN: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombustionCoefficients {
    pub c10: f64,
    pub c11: f64,
    pub c12: f64,
    pub c13: f64,
    pub c14: f64,
    pub c16: f64,
    pub c17: f64,
    pub c18: f64,
    pub k_c: f64,
    /// Raw burn-duration scale. When absent it is derived from `c18` and the
    /// configured Wiebe parameters.
    #[serde(default)]
    pub c15: Option<f64>,
}

impl CombustionCoefficients {
    pub fn published() -> Self {
        Self {
            c10: 1.11e-5,
            c11: 8.03e-4,
            c12: 7.56e-2,
            c13: 8.22e4,
            c14: -1.15,
            c16: 4.59,
            c17: 0.628,
            c18: 0.0251,
            k_c: 1.25,
            c15: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.c10, self.c11, self.c12, self.c13, self.c14, self.c16, self.c17, self.c18,
            self.k_c,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::CoefficientDomain(
                "combustion coefficient not finite".into(),
            ));
        }
        if !(self.c13 > 0.0) || !(self.c14 < 0.0) {
            return Err(Error::CoefficientDomain(format!(
                "need c13 > 0 and c14 < 0 (c13={}, c14={})",
                self.c13, self.c14
            )));
        }
        // affine in EGR, so the endpoints bound it on [0, 1]
        if !(self.c11 > 0.0 && self.c10 + self.c11 > 0.0) {
            return Err(Error::CoefficientDomain(format!(
                "c10*EGR + c11 must stay positive on [0, 1] (c10={}, c11={})",
                self.c10, self.c11
            )));
        }
        if !(self.k_c > 1.0) {
            return Err(Error::CoefficientDomain(format!("k_c = {} <= 1", self.k_c)));
        }
        if let Some(c15) = self.c15 {
            if !(c15 > 0.0) {
                return Err(Error::CoefficientDomain(format!("c15 = {c15} <= 0")));
            }
        }
        Ok(())
    }

    /// `c15`, derived as `c18 / (ln2/a)^(1/b)` when not set explicitly.
    pub fn c15(&self, wiebe: &WiebeParams) -> f64 {
        self.c15.unwrap_or(self.c18 / wiebe.half_burn_factor())
    }

    fn egr_term(&self, egr: f64) -> Result<f64> {
        let v = self.c10 * egr + self.c11;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::CoefficientDomain(format!(
                "c10*EGR + c11 = {v} at EGR = {egr}"
            )))
        }
    }

    fn arrhenius_exponent(&self, state: &GasState) -> f64 {
        self.c13 * state.pressure.powf(self.c14) / state.temperature
    }
}

impl Default for CombustionCoefficients {
    fn default() -> Self {
        Self::published()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WiebeParams {
    pub a: f64,
    pub b: f64,
}

impl WiebeParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        ensure_positive("wiebe a", a)?;
        ensure_positive("wiebe b", b)?;
        Ok(Self { a, b })
    }

    /// `(ln2/a)^(1/b)`: fraction of BD between SOC and CA50.
    pub fn half_burn_factor(&self) -> f64 {
        (LN_2 / self.a).powf(1.0 / self.b)
    }
}

impl Default for WiebeParams {
    /// 99.9 % burned at SOC + BD.
    fn default() -> Self {
        Self { a: 6.9078, b: 1.5 }
    }
}

/// Crank-resolved in-cylinder states, strictly increasing in crank angle.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressionTrace {
    samples: Vec<GasState>,
}

impl CompressionTrace {
    pub fn from_samples(samples: Vec<GasState>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Domain {
                quantity: "trace length",
                value: samples.len() as f64,
            });
        }
        for w in samples.windows(2) {
            if !(w[1].crank_angle > w[0].crank_angle) {
                return Err(Error::Domain {
                    quantity: "trace crank angle",
                    value: w[1].crank_angle,
                });
            }
        }
        for s in &samples {
            ensure_positive("trace pressure", s.pressure)?;
            ensure_positive("trace temperature", s.temperature)?;
        }
        Ok(Self { samples })
    }

    /// Uniform samples of `[start, end]`; the last step may be shorter.
    fn grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
        ensure_positive("trace step", step)?;
        if !(end > start) {
            return Err(Error::Domain {
                quantity: "trace end",
                value: end,
            });
        }
        let n = ((end - start) / step).ceil() as usize;
        Ok((0..=n)
            .map(|i| (start + i as f64 * step).min(end))
            .collect())
    }

    pub fn constant(state: GasState, start: f64, end: f64, step: f64) -> Result<Self> {
        let angles = Self::grid(start, end, step)?;
        Self::from_samples(angles.into_iter().map(|t| state.at(t)).collect())
    }

    /// Motored polytropic trace from the IVC state, exponent `k`.
    pub fn polytropic(
        geom: &EngineGeometry,
        ivc_state: GasState,
        k: f64,
        start: f64,
        end: f64,
        step: f64,
    ) -> Result<Self> {
        let v_ivc = geom.volume(ivc_state.crank_angle);
        let angles = Self::grid(start, end, step)?;
        Self::from_samples(
            angles
                .into_iter()
                .map(|t| polytropic_to_soi(ivc_state, v_ivc, geom.volume(t), k).at(t))
                .collect(),
        )
    }

    pub fn samples(&self) -> &[GasState] {
        &self.samples
    }

    pub fn start(&self) -> f64 {
        self.samples[0].crank_angle
    }

    pub fn end(&self) -> f64 {
        self.samples[self.samples.len() - 1].crank_angle
    }
}

/// Ignition rate term `φ^c12 exp(−c13 P^c14 / T) / (c10 EGR + c11)`.
pub fn arrhenius_tau(
    state: &GasState,
    egr: f64,
    phi: f64,
    coeffs: &CombustionCoefficients,
) -> Result<f64> {
    ensure_positive("pressure", state.pressure)?;
    ensure_positive("temperature", state.temperature)?;
    ensure_positive("phi", phi)?;
    let a = coeffs.egr_term(egr)?;
    Ok(phi.powf(coeffs.c12) * (-coeffs.arrhenius_exponent(state)).exp() / a)
}

/// SOC from the knock integral: trapezoidal accumulation over the trace and
/// linear interpolation inside the step where the integral crosses one.
pub fn soc_full(
    trace: &CompressionTrace,
    soi: f64,
    n: f64,
    egr: f64,
    phi: f64,
    coeffs: &CombustionCoefficients,
) -> Result<f64> {
    ensure_positive("n", n)?;
    if (trace.start() - soi).abs() > 1e-9 {
        return Err(Error::Domain {
            quantity: "trace start (must equal SOI)",
            value: trace.start(),
        });
    }
    let scale = 1.0 / n;
    let mut prev = arrhenius_tau(&trace.samples[0], egr, phi, coeffs)? * scale;
    let mut acc = 0.0;
    for w in trace.samples.windows(2) {
        let next = arrhenius_tau(&w[1], egr, phi, coeffs)? * scale;
        let h = w[1].crank_angle - w[0].crank_angle;
        let inc = 0.5 * (prev + next) * h;
        if acc + inc >= 1.0 {
            return Ok(w[0].crank_angle + (1.0 - acc) / inc * h);
        }
        acc += inc;
        prev = next;
    }
    Err(Error::NoIgnition {
        reached: acc,
        end: trace.end(),
    })
}

/// [`soc_full`] on a polytropic trace from the IVC state. The trace covers
/// SOI..SOI+60 first and is extended to `end` (typically EVO) only if the
/// integral has not reached one.
#[allow(clippy::too_many_arguments)]
pub fn soc_full_polytropic(
    geom: &EngineGeometry,
    ivc_state: GasState,
    k: f64,
    soi: f64,
    end: f64,
    step: f64,
    n: f64,
    egr: f64,
    phi: f64,
    coeffs: &CombustionCoefficients,
) -> Result<f64> {
    let first_end = (soi + INITIAL_TRACE_SPAN).min(end);
    let trace = CompressionTrace::polytropic(geom, ivc_state, k, soi, first_end, step)?;
    match soc_full(&trace, soi, n, egr, phi, coeffs) {
        Err(Error::NoIgnition { .. }) if first_end < end => {
            let trace = CompressionTrace::polytropic(geom, ivc_state, k, soi, end, step)?;
            soc_full(&trace, soi, n, egr, phi, coeffs)
        }
        other => other,
    }
}

/// Ignition delay `(c10 EGR + c11) N φ^(−c12) exp(c13 P_SOI^c14 / T_SOI)`.
pub fn ignition_delay(
    soi_state: &GasState,
    n: f64,
    egr: f64,
    phi: f64,
    coeffs: &CombustionCoefficients,
) -> Result<f64> {
    ensure_positive("n", n)?;
    ensure_fraction("egr", egr)?;
    Ok(n / arrhenius_tau(soi_state, egr, phi, coeffs)?)
}

pub fn soc_simplified(
    soi: f64,
    soi_state: &GasState,
    n: f64,
    egr: f64,
    phi: f64,
    coeffs: &CombustionCoefficients,
) -> Result<f64> {
    Ok(soi + ignition_delay(soi_state, n, egr, phi, coeffs)?)
}

/// `c15 (1 + X_d)^c16 φ^c17`, CAD.
pub fn burn_duration(x_d: f64, phi: f64, c15: f64, coeffs: &CombustionCoefficients) -> Result<f64> {
    if !(x_d >= 0.0) {
        return Err(Error::Domain {
            quantity: "x_d",
            value: x_d,
        });
    }
    ensure_positive("phi", phi)?;
    ensure_positive("c15", c15)?;
    Ok(c15 * (1.0 + x_d).powf(coeffs.c16) * phi.powf(coeffs.c17))
}

pub fn wiebe_burn_fraction(theta: f64, soc: f64, bd: f64, wiebe: &WiebeParams) -> Result<f64> {
    ensure_positive("bd", bd)?;
    if theta < soc {
        return Err(Error::Domain {
            quantity: "theta before SOC",
            value: theta,
        });
    }
    Ok(1.0 - (-wiebe.a * ((theta - soc) / bd).powf(wiebe.b)).exp())
}

pub fn ca50_from_wiebe(soc: f64, bd: f64, wiebe: &WiebeParams) -> f64 {
    soc + wiebe.half_burn_factor() * bd
}

/// Composite burn term `c18 (1 + X_d)^c16 φ^c17`: CA50 minus SOC.
pub fn ca50_burn_term(x_d: f64, phi: f64, coeffs: &CombustionCoefficients) -> f64 {
    coeffs.c18 * (1.0 + x_d).powf(coeffs.c16) * phi.powf(coeffs.c17)
}

/// Closed-form CA50: SOI plus ignition delay plus the composite burn term.
pub fn ca50_simplified(
    soi: f64,
    egr: f64,
    n: f64,
    phi: f64,
    soi_state: &GasState,
    x_d: f64,
    coeffs: &CombustionCoefficients,
) -> Result<f64> {
    if !(x_d >= 0.0) {
        return Err(Error::Domain {
            quantity: "x_d",
            value: x_d,
        });
    }
    Ok(soc_simplified(soi, soi_state, n, egr, phi, coeffs)? + ca50_burn_term(x_d, phi, coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pub_c() -> CombustionCoefficients {
        CombustionCoefficients::published()
    }

    fn state(p: f64, t: f64, theta: f64) -> GasState {
        GasState::new(p, t, theta).unwrap()
    }

    #[test]
    fn arrhenius_direct_evaluation() {
        let c = pub_c();
        let expected = 0.7_f64.powf(7.56e-2) * (-8.22e4 * 50_f64.powf(-1.15) / 900.0).exp()
            / (1.11e-5 * 0.25 + 8.03e-4);
        let v = arrhenius_tau(&state(50.0, 900.0, 0.0), 0.25, 0.7, &c).unwrap();
        assert_relative_eq!(v, expected, max_relative = 1e-14);
        assert!(v > 0.0);
    }

    #[test]
    fn arrhenius_unit_phi_and_temperature_trend() {
        let c = pub_c();
        let no_phi = CombustionCoefficients { c12: 0.0, ..c };
        let s = state(50.0, 900.0, 0.0);
        assert_eq!(
            arrhenius_tau(&s, 0.25, 1.0, &c).unwrap(),
            arrhenius_tau(&s, 0.25, 1.0, &no_phi).unwrap()
        );
        let mut last = 0.0;
        for t in (600..=1400).step_by(10) {
            let v = arrhenius_tau(&state(50.0, t as f64, 0.0), 0.25, 0.7, &c).unwrap();
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn arrhenius_rejects_nonpositive_egr_term() {
        let c = CombustionCoefficients {
            c10: -1e-3,
            ..pub_c()
        };
        assert!(matches!(
            arrhenius_tau(&state(50.0, 900.0, 0.0), 1.0, 0.7, &c),
            Err(Error::CoefficientDomain(_))
        ));
    }

    #[test]
    fn soc_full_constant_trace_matches_closed_form() {
        let c = pub_c();
        let s = state(60.0, 950.0, -5.0);
        let trace = CompressionTrace::constant(s, -5.0, 30.0, ORACLE_STEP).unwrap();
        let full = soc_full(&trace, -5.0, 1200.0, 0.25, 0.7, &c).unwrap();
        let closed = soc_simplified(-5.0, &s, 1200.0, 0.25, 0.7, &c).unwrap();
        assert!((full - closed).abs() < 1e-6, "{full} vs {closed}");
    }

    #[test]
    fn soc_full_doubling_speed_delays_ignition() {
        let c = pub_c();
        let s = state(60.0, 950.0, -5.0);
        let trace = CompressionTrace::constant(s, -5.0, 30.0, PRODUCTION_STEP).unwrap();
        let slow = soc_full(&trace, -5.0, 1200.0, 0.25, 0.7, &c).unwrap();
        let fast = soc_full(&trace, -5.0, 2400.0, 0.25, 0.7, &c).unwrap();
        assert!(fast > slow);
    }

    #[test]
    fn soc_full_no_ignition_and_start_check() {
        let c = pub_c();
        let cold = state(2.0, 300.0, -5.0);
        let trace = CompressionTrace::constant(cold, -5.0, 10.0, 0.1).unwrap();
        assert!(matches!(
            soc_full(&trace, -5.0, 1200.0, 0.25, 0.7, &c),
            Err(Error::NoIgnition { .. })
        ));
        assert!(soc_full(&trace, -4.0, 1200.0, 0.25, 0.7, &c).is_err());
    }

    #[test]
    fn soc_simplified_direct_evaluation() {
        let c = pub_c();
        let expected = -5.0
            + (1.11e-5 * 0.25 + 8.03e-4)
                * 1200.0
                * 0.7_f64.powf(-7.56e-2)
                * (8.22e4 * 60_f64.powf(-1.15) / 950.0).exp();
        let v = soc_simplified(-5.0, &state(60.0, 950.0, -5.0), 1200.0, 0.25, 0.7, &c).unwrap();
        assert_relative_eq!(v, expected, max_relative = 1e-13);
    }

    #[test]
    fn soc_simplified_falls_with_pressure() {
        let c = pub_c();
        let lo = soc_simplified(-5.0, &state(40.0, 950.0, -5.0), 1200.0, 0.25, 0.7, &c).unwrap();
        let hi = soc_simplified(-5.0, &state(80.0, 950.0, -5.0), 1200.0, 0.25, 0.7, &c).unwrap();
        assert!(hi < lo && hi > -5.0);
    }

    #[test]
    fn burn_duration_cases() {
        let c = pub_c();
        assert_eq!(burn_duration(0.0, 1.0, 0.2, &c).unwrap(), 0.2);
        let a = burn_duration(0.2, 0.7, 0.2, &c).unwrap();
        // (1 + 0.2) doubled to 2.4 corresponds to x_d = 1.4
        let b = burn_duration(1.4, 0.7, 0.2, &c).unwrap();
        assert_relative_eq!(b / a, 2f64.powf(4.59), max_relative = 1e-12);
        let mut last = 0.0;
        for i in 0..=100 {
            let v = burn_duration(i as f64 * 0.01, 0.7, 0.2, &c).unwrap();
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn wiebe_landmarks() {
        let w = WiebeParams::default();
        assert_eq!(wiebe_burn_fraction(3.0, 3.0, 20.0, &w).unwrap(), 0.0);
        let half = 3.0 + 20.0 * (LN_2 / w.a).powf(1.0 / w.b);
        assert!((wiebe_burn_fraction(half, 3.0, 20.0, &w).unwrap() - 0.5).abs() < 1e-12);
        assert!(wiebe_burn_fraction(1e6, 3.0, 20.0, &w).unwrap() > 1.0 - 1e-12);
        assert!(wiebe_burn_fraction(2.9, 3.0, 20.0, &w).is_err());
        // a = 6.9078 puts 99.9 % burned at SOC + BD
        assert!((wiebe_burn_fraction(23.0, 3.0, 20.0, &w).unwrap() - 0.999).abs() < 1e-6);
    }

    #[test]
    fn ca50_from_wiebe_cases() {
        let w = WiebeParams::default();
        assert_eq!(ca50_from_wiebe(4.0, 0.0, &w), 4.0);
        let unit = WiebeParams::new(LN_2, 1.0).unwrap();
        assert_relative_eq!(ca50_from_wiebe(4.0, 7.0, &unit), 11.0, max_relative = 1e-15);

        // bisection on the burn fraction itself
        let (soc, bd) = (2.0, 15.0);
        let (mut lo, mut hi) = (soc, soc + 10.0 * bd);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if wiebe_burn_fraction(mid, soc, bd, &w).unwrap() < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((ca50_from_wiebe(soc, bd, &w) - 0.5 * (lo + hi)).abs() < 1e-10);
    }

    #[test]
    fn default_c15_is_consistent_with_c18() {
        let c = pub_c();
        let w = WiebeParams::default();
        let c15 = c.c15(&w);
        assert!((c15 - 0.1162).abs() < 5e-4);
        let bd = burn_duration(0.3, 0.7, c15, &c).unwrap();
        assert_relative_eq!(
            ca50_from_wiebe(0.0, bd, &w),
            ca50_burn_term(0.3, 0.7, &c),
            max_relative = 1e-12
        );
    }

    #[test]
    fn ca50_simplified_composition_and_unit_soi_gain() {
        let c = pub_c();
        let s = state(55.0, 920.0, -3.0);
        let ca50 = ca50_simplified(-3.0, 0.25, 1200.0, 0.7, &s, 0.31, &c).unwrap();
        let soc = soc_simplified(-3.0, &s, 1200.0, 0.25, 0.7, &c).unwrap();
        assert_eq!(
            ca50,
            soc + 0.0251 * 1.31_f64.powf(4.59) * 0.7_f64.powf(0.628)
        );
        let shifted = ca50_simplified(-2.0, 0.25, 1200.0, 0.7, &s, 0.31, &c).unwrap();
        assert_relative_eq!(shifted - ca50, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn trace_rejects_bad_samples() {
        let s = state(2.0, 300.0, 0.0);
        assert!(CompressionTrace::from_samples(vec![s.at(0.0), s.at(0.0)]).is_err());
        assert!(CompressionTrace::from_samples(vec![s]).is_err());
        let t = CompressionTrace::constant(s, 0.0, 1.05, 0.1).unwrap();
        assert_eq!(t.end(), 1.05);
    }

    proptest! {
        #[test]
        fn wiebe_monotone(
            a in 0.5f64..10.0, b in 0.5f64..4.0,
            soc in -10.0f64..10.0, bd in 0.05f64..40.0,
            d in 0.0f64..100.0,
        ) {
            let w = WiebeParams::new(a, b).unwrap();
            let x1 = wiebe_burn_fraction(soc + d, soc, bd, &w).unwrap();
            let x2 = wiebe_burn_fraction(soc + d + 1e-3, soc, bd, &w).unwrap();
            prop_assert!(x2 - x1 >= -1e-12);
            prop_assert!((0.0..=1.0).contains(&x1));
        }

        #[test]
        fn ca50_is_half_burn(
            a in 0.5f64..10.0, b in 0.5f64..4.0,
            soc in -10.0f64..10.0, bd in 0.05f64..40.0,
        ) {
            let w = WiebeParams::new(a, b).unwrap();
            let x = wiebe_burn_fraction(ca50_from_wiebe(soc, bd, &w), soc, bd, &w).unwrap();
            prop_assert!((x - 0.5).abs() < 1e-12);
        }

        #[test]
        fn ca50_simplified_increasing_in_egr(
            p in 20.0f64..120.0, t in 700.0f64..1100.0,
            n in 1200.0f64..1500.0, phi in 0.5f64..0.9,
            egr in 0.0f64..0.49, x_r in 0.0344f64..0.0909,
        ) {
            let c = pub_c();
            let s = state(p, t, 0.0);
            let lo = ca50_simplified(0.0, egr, n, phi, &s, egr + x_r, &c).unwrap();
            let hi = ca50_simplified(0.0, egr + 0.01, n, phi, &s, egr + 0.01 + x_r, &c).unwrap();
            prop_assert!(hi > lo);
            prop_assert!(lo.is_finite());
        }
    }
}
