//! Intake-side gas properties: EGR from oxygen sensing, cylinder-specific IVC
//! pressure and temperature, residual and dilution fractions, and polytropic
//! compression from IVC to SOI.
//!
//! Units are fixed: bar, K, RPM, CAD aTDC. Coefficients are bound to them.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_fraction, ensure_positive, Error, Result};

/// Intake oxygen may read above ambient by this much before it is treated as
/// a sensing fault rather than jitter around zero EGR.
pub const OXYGEN_SENSOR_TOLERANCE: f64 = 0.002;

/// Default ambient oxygen mole fraction. A configuration value.
pub const AMBIENT_OXYGEN_FRACTION: f64 = 0.2095;

/// Coefficients of the IVC temperature (`c1..c7`) and pressure (`c8, c9`)
/// models for one cylinder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntakeCoefficients {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub c7: f64,
    pub c8: f64,
    pub c9: f64,
}

impl IntakeCoefficients {
    pub fn temperature_terms(&self) -> [f64; 7] {
        [
            self.c1, self.c2, self.c3, self.c4, self.c5, self.c6, self.c7,
        ]
    }

    pub fn pressure_terms(&self) -> [f64; 2] {
        [self.c8, self.c9]
    }

    pub fn with_temperature_terms(mut self, t: &[f64]) -> Self {
        [
            self.c1, self.c2, self.c3, self.c4, self.c5, self.c6, self.c7,
        ] = [t[0], t[1], t[2], t[3], t[4], t[5], t[6]];
        self
    }

    pub fn with_pressure_terms(mut self, p: &[f64]) -> Self {
        self.c8 = p[0];
        self.c9 = p[1];
        self
    }

    pub fn as_array(&self) -> [f64; 9] {
        [
            self.c1, self.c2, self.c3, self.c4, self.c5, self.c6, self.c7, self.c8, self.c9,
        ]
    }

    pub fn from_array(c: [f64; 9]) -> Self {
        Self {
            c1: c[0],
            c2: c[1],
            c3: c[2],
            c4: c[3],
            c5: c[4],
            c6: c[5],
            c7: c[6],
            c8: c[7],
            c9: c[8],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasState {
    /// bar
    pub pressure: f64,
    /// K
    pub temperature: f64,
    /// CAD aTDC
    pub crank_angle: f64,
}

impl GasState {
    pub fn new(pressure: f64, temperature: f64, crank_angle: f64) -> Result<Self> {
        ensure_positive("pressure", pressure)?;
        ensure_positive("temperature", temperature)?;
        Ok(Self {
            pressure,
            temperature,
            crank_angle,
        })
    }

    pub fn at(self, crank_angle: f64) -> Self {
        Self {
            crank_angle,
            ..self
        }
    }
}

/// Charge dilution for one cylinder-cycle. `x_d` is always `egr + x_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargeComposition {
    pub egr: f64,
    pub x_r: f64,
    pub x_d: f64,
    pub phi: f64,
}

impl ChargeComposition {
    pub fn new(egr: f64, x_r: f64, phi: f64) -> Result<Self> {
        ensure_fraction("egr", egr)?;
        if !(0.0..1.0).contains(&x_r) {
            return Err(Error::Domain {
                quantity: "x_r",
                value: x_r,
            });
        }
        ensure_positive("phi", phi)?;
        Ok(Self {
            egr,
            x_r,
            x_d: dilution_fraction(egr, x_r),
            phi,
        })
    }
}

pub fn dilution_fraction(egr: f64, x_r: f64) -> f64 {
    egr + x_r
}

/// EGR fraction from ambient, intake and exhaust oxygen mole fractions.
///
/// Intake readings up to [`OXYGEN_SENSOR_TOLERANCE`] outside the
/// exhaust..ambient interval are clamped; larger excursions are errors.
pub fn egr_fraction(x_o2_amb: f64, x_o2_int: f64, x_o2_exh: f64) -> Result<f64> {
    ensure_fraction("x_o2_amb", x_o2_amb)?;
    ensure_fraction("x_o2_int", x_o2_int)?;
    ensure_fraction("x_o2_exh", x_o2_exh)?;
    let span = x_o2_amb - x_o2_exh;
    if span < 1e-6 {
        return Err(Error::IllConditionedSensing {
            ambient: x_o2_amb,
            exhaust: x_o2_exh,
        });
    }
    if x_o2_int > x_o2_amb + OXYGEN_SENSOR_TOLERANCE
        || x_o2_int < x_o2_exh - OXYGEN_SENSOR_TOLERANCE
    {
        return Err(Error::Domain {
            quantity: "x_o2_int",
            value: x_o2_int,
        });
    }
    Ok(((x_o2_amb - x_o2_int) / span).clamp(0.0, 1.0))
}

/// The semi-empirical temperature term
/// `(c1 T² + c2 T + c3) φ^c4 N^c5 P^c7 / (1 + EGR)^c6`.
///
/// With the published coefficients this evaluates to a few tens of kelvin;
/// it is the charge heating between the manifold and IVC (see [`t_ivc`]).
pub fn t_ivc_rise(
    coeffs: &IntakeCoefficients,
    t_im: f64,
    p_im: f64,
    phi: f64,
    n: f64,
    egr: f64,
) -> Result<f64> {
    ensure_positive("t_im", t_im)?;
    ensure_positive("p_im", p_im)?;
    ensure_positive("phi", phi)?;
    ensure_positive("n", n)?;
    ensure_fraction("egr", egr)?;
    let c = coeffs;
    let quadratic = c.c1 * t_im * t_im + c.c2 * t_im + c.c3;
    let value =
        quadratic * phi.powf(c.c4) * n.powf(c.c5) * p_im.powf(c.c7) / (1.0 + egr).powf(c.c6);
    if !value.is_finite() {
        return Err(Error::ModelDomain(format!(
            "T_IVC term not finite for t_im={t_im}, p_im={p_im}, phi={phi}, n={n}, egr={egr}"
        )));
    }
    Ok(value)
}

/// In-cylinder temperature at IVC, K: manifold temperature plus
/// [`t_ivc_rise`].
pub fn t_ivc(
    coeffs: &IntakeCoefficients,
    t_im: f64,
    p_im: f64,
    phi: f64,
    n: f64,
    egr: f64,
) -> Result<f64> {
    let t = t_im + t_ivc_rise(coeffs, t_im, p_im, phi, n, egr)?;
    if !(t > 0.0) {
        return Err(Error::ModelDomain(format!(
            "T_IVC = {t} K for t_im={t_im}, p_im={p_im}, phi={phi}, n={n}, egr={egr}"
        )));
    }
    Ok(t)
}

/// In-cylinder pressure at IVC, bar: `T_im^c8 N^c9 P_im`.
pub fn p_ivc(coeffs: &IntakeCoefficients, t_im: f64, n: f64, p_im: f64) -> Result<f64> {
    ensure_positive("t_im", t_im)?;
    ensure_positive("n", n)?;
    ensure_positive("p_im", p_im)?;
    Ok(t_im.powf(coeffs.c8) * n.powf(coeffs.c9) * p_im)
}

/// Residual gas mass fraction `m_r / (m_air + m_fuel + m_egr)`.
pub fn residual_fraction(m_r: f64, m_air: f64, m_fuel: f64, m_egr: f64) -> Result<f64> {
    for (q, v) in [
        ("m_r", m_r),
        ("m_air", m_air),
        ("m_fuel", m_fuel),
        ("m_egr", m_egr),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::Domain {
                quantity: q,
                value: v,
            });
        }
    }
    let fresh = m_air + m_fuel + m_egr;
    if fresh <= 0.0 {
        return Err(Error::Domain {
            quantity: "m_air + m_fuel + m_egr",
            value: fresh,
        });
    }
    Ok(m_r / fresh)
}

/// Residual fraction trend of the reference engine: 0.0721 at zero EGR
/// falling linearly to 0.0415 at 50 % EGR.
pub fn nominal_residual_fraction(egr: f64) -> f64 {
    RESIDUAL_AT_ZERO_EGR + (RESIDUAL_AT_HALF_EGR - RESIDUAL_AT_ZERO_EGR) * egr / 0.5
}

pub const RESIDUAL_AT_ZERO_EGR: f64 = 0.0721;
pub const RESIDUAL_AT_HALF_EGR: f64 = 0.0415;
/// Envelope of residual fractions seen across the operating range.
pub const RESIDUAL_RANGE: (f64, f64) = (0.0344, 0.0909);

/// Oxygen mole fractions (ambient, intake, exhaust) consistent with a given
/// EGR fraction and equivalence ratio: exhaust oxygen is depleted in
/// proportion to `phi` and the intake is the EGR-weighted mixture.
pub fn oxygen_fractions(egr: f64, phi: f64) -> (f64, f64, f64) {
    let amb = AMBIENT_OXYGEN_FRACTION;
    let exh = amb * (1.0 - phi.min(1.0));
    (amb, amb - egr * (amb - exh), exh)
}

/// Polytropic compression (or expansion) from the IVC state to the volume at
/// SOI. The crank angle of the input is carried through unchanged.
pub fn polytropic_to_soi(ivc_state: GasState, v_ivc: f64, v_soi: f64, k_c: f64) -> GasState {
    debug_assert!(v_ivc > 0.0 && v_soi > 0.0 && k_c > 1.0);
    let ratio = v_ivc / v_soi;
    GasState {
        pressure: ivc_state.pressure * ratio.powf(k_c),
        temperature: ivc_state.temperature * ratio.powf(k_c - 1.0),
        crank_angle: ivc_state.crank_angle,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientSet;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cyl(i: usize) -> IntakeCoefficients {
        CoefficientSet::published().intake[i]
    }

    #[test]
    fn egr_endpoints_and_midpoint() {
        assert_eq!(egr_fraction(0.2095, 0.2095, 0.10).unwrap(), 0.0);
        assert_eq!(egr_fraction(0.2095, 0.10, 0.10).unwrap(), 1.0);
        let v = egr_fraction(0.2095, 0.16, 0.11).unwrap();
        assert_relative_eq!(v, 0.0495 / 0.0995, max_relative = 1e-14);
        assert!((v - 0.497487).abs() < 1e-6);
    }

    #[test]
    fn egr_sensor_tolerance() {
        assert_eq!(egr_fraction(0.2095, 0.2105, 0.10).unwrap(), 0.0);
        assert!(matches!(
            egr_fraction(0.2095, 0.2200, 0.10),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            egr_fraction(0.2095, 0.15, 0.2095),
            Err(Error::IllConditionedSensing { .. })
        ));
        assert!(matches!(
            egr_fraction(1.2, 0.15, 0.1),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn t_ivc_direct_evaluation_cylinder_1() {
        // independent arithmetic with cylinder 1 of the default intake coefficients
        let (t, p, phi, n, egr) = (310.0_f64, 2.0_f64, 0.7_f64, 1300.0_f64, 0.25_f64);
        let quad = -7.35e-4 * t * t + 0.842 * t - 12.1;
        let expected =
            quad * phi.powf(0.111) * n.powf(-0.167) * p.powf(0.0600) / (1.0 + egr).powf(0.0204);
        let rise = t_ivc_rise(&cyl(0), t, p, phi, n, egr).unwrap();
        assert_relative_eq!(rise, expected, max_relative = 1e-14);
        assert_relative_eq!(
            t_ivc(&cyl(0), t, p, phi, n, egr).unwrap(),
            t + expected,
            max_relative = 1e-14
        );
    }

    #[test]
    fn unit_equivalence_ratio_contributes_nothing() {
        let c = cyl(0);
        let no_phi = IntakeCoefficients { c4: 0.0, ..c };
        assert_eq!(
            t_ivc_rise(&c, 310.0, 2.0, 1.0, 1300.0, 0.25).unwrap(),
            t_ivc_rise(&no_phi, 310.0, 2.0, 1.0, 1300.0, 0.25).unwrap()
        );
    }

    #[test]
    fn t_ivc_falls_with_egr() {
        let c = cyl(0);
        assert!(
            t_ivc(&c, 310.0, 2.0, 0.7, 1300.0, 0.0).unwrap()
                > t_ivc(&c, 310.0, 2.0, 0.7, 1300.0, 0.5).unwrap()
        );
    }

    #[test]
    fn p_ivc_direct_evaluation_and_cylinder_variation() {
        let expected = 310.0_f64.powf(-0.0580) * 1300.0_f64.powf(0.0810) * 2.0;
        let p1 = p_ivc(&cyl(0), 310.0, 1300.0, 2.0).unwrap();
        assert_relative_eq!(p1, expected, max_relative = 1e-14);
        let p6 = p_ivc(&cyl(5), 310.0, 1300.0, 2.0).unwrap();
        assert!((p1 - p6).abs() > 1e-3);
    }

    #[test]
    fn residual_fraction_cases() {
        assert_eq!(residual_fraction(0.0, 1.0, 0.05, 0.3).unwrap(), 0.0);
        assert_relative_eq!(
            residual_fraction(0.06, 0.8, 0.04, 0.16).unwrap(),
            0.06,
            max_relative = 1e-12
        );
        assert!(residual_fraction(0.1, 0.0, 0.0, 0.0).is_err());
        assert!(residual_fraction(-0.1, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn sensed_egr_recovers_commanded() {
        for &(egr, phi) in &[(0.0, 0.5), (0.25, 0.7), (0.5, 0.9)] {
            let (a, i, e) = oxygen_fractions(egr, phi);
            assert_relative_eq!(egr_fraction(a, i, e).unwrap(), egr, epsilon = 1e-12);
        }
        assert_relative_eq!(nominal_residual_fraction(0.0), 0.0721);
        assert_relative_eq!(nominal_residual_fraction(0.5), 0.0415);
    }

    #[test]
    fn composition_sums_dilution() {
        let c = ChargeComposition::new(0.25, 0.0642, 0.7).unwrap();
        assert_eq!(c.x_d, 0.25 + 0.0642);
        assert!(ChargeComposition::new(1.5, 0.05, 0.7).is_err());
        assert!(ChargeComposition::new(0.2, 1.0, 0.7).is_err());
    }

    #[test]
    fn polytropic_cases() {
        let ivc = GasState::new(2.0, 330.0, -148.5).unwrap();
        assert_eq!(polytropic_to_soi(ivc, 1.3, 1.3, 1.25), ivc);
        let soi = polytropic_to_soi(ivc, 10.0, 1.0, 1.25);
        assert_relative_eq!(soi.pressure, 2.0 * 10f64.powf(1.25), max_relative = 1e-14);
        assert_relative_eq!(
            soi.temperature,
            330.0 * 10f64.powf(0.25),
            max_relative = 1e-14
        );
        let smaller = polytropic_to_soi(ivc, 10.0, 0.9, 1.25);
        assert!(smaller.pressure > soi.pressure && smaller.temperature > soi.temperature);
    }

    proptest! {
        #[test]
        fn egr_affine_invariance(
            amb in 0.15f64..0.25,
            exh_frac in 0.1f64..0.8,
            int_frac in 0.0f64..1.0,
            a in 0.5f64..2.0,
            b in -0.05f64..0.05,
        ) {
            let exh = amb * exh_frac;
            let int = exh + int_frac * (amb - exh);
            let base = egr_fraction(amb, int, exh).unwrap();
            let scaled = egr_fraction(a * amb + b, a * int + b, a * exh + b);
            if let Ok(s) = scaled {
                prop_assert!((s - base).abs() < 1e-9);
            }
        }

        #[test]
        fn t_ivc_strictly_decreasing_in_egr(
            cyl_idx in 0usize..6,
            t in 302.52f64..333.29,
            p in 1.43f64..2.97,
            phi in 0.5f64..0.9,
            n in 1200.0f64..1500.0,
            e in 0.0f64..0.49,
        ) {
            let c = cyl(cyl_idx);
            prop_assert!(t_ivc(&c, t, p, phi, n, e).unwrap() > t_ivc(&c, t, p, phi, n, e + 0.01).unwrap());
        }

        #[test]
        fn p_ivc_homogeneous_degree_one(
            cyl_idx in 0usize..6,
            t in 250.0f64..400.0,
            n in 600.0f64..2500.0,
            p in 0.5f64..4.0,
            k in 0.1f64..10.0,
        ) {
            let c = cyl(cyl_idx);
            let a = p_ivc(&c, t, n, k * p).unwrap();
            let b = k * p_ivc(&c, t, n, p).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * b.abs());
        }

        #[test]
        fn polytropic_roundtrip(
            p in 0.5f64..5.0,
            t in 250.0f64..500.0,
            v1 in 0.1f64..3.0,
            v2 in 0.1f64..3.0,
            k in 1.05f64..1.45,
        ) {
            let s = GasState::new(p, t, 0.0).unwrap();
            let back = polytropic_to_soi(polytropic_to_soi(s, v1, v2, k), v2, v1, k);
            prop_assert!((back.pressure - p).abs() <= 1e-12 * p);
            prop_assert!((back.temperature - t).abs() <= 1e-12 * t);
        }
    }
}
