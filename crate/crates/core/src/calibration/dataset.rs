//! Calibration samples, their CSV form, and the seeded synthetic generator.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientSet, N_CYLINDERS};
use crate::combustion::{self, WiebeParams, ORACLE_STEP};
use crate::error::{Error, Result};
use crate::gas::{self, GasState, RESIDUAL_RANGE};
use crate::geometry::EngineGeometry;

/// Operating envelope of the reference engine: (min, max).
pub mod envelope {
    pub const SPEED: (f64, f64) = (1200.0, 1500.0);
    pub const T_IM: (f64, f64) = (302.52, 333.29);
    pub const P_IM: (f64, f64) = (1.43, 2.97);
    pub const PHI: (f64, f64) = (0.5, 0.9);
    pub const EGR: (f64, f64) = (0.0, 0.5);
    pub const SOI: (f64, f64) = (-10.0, 0.0);
}

/// Margin applied to the envelope when validating loaded samples.
const ENVELOPE_MARGIN: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSample {
    /// 1-based.
    pub cylinder: usize,
    pub t_im: f64,
    pub p_im: f64,
    pub n: f64,
    pub phi: f64,
    pub egr: f64,
    pub soi: f64,
    pub x_r: f64,
    pub x_o2_amb: f64,
    pub x_o2_int: f64,
    pub x_o2_exh: f64,
    pub t_ivc: f64,
    pub p_ivc: f64,
    pub soc: f64,
    pub ca50: f64,
}

fn within(name: &str, v: f64, (lo, hi): (f64, f64)) -> Result<()> {
    let m = ENVELOPE_MARGIN * (hi - lo);
    if v.is_finite() && v >= lo - m && v <= hi + m {
        Ok(())
    } else {
        Err(Error::Dataset(format!(
            "{name} = {v} outside [{lo}, {hi}] with 20% margin"
        )))
    }
}

impl CalibrationSample {
    pub fn validate(&self) -> Result<()> {
        if !(1..=N_CYLINDERS).contains(&self.cylinder) {
            return Err(Error::Dataset(format!(
                "cylinder {} out of range",
                self.cylinder
            )));
        }
        within("n", self.n, envelope::SPEED)?;
        within("t_im", self.t_im, envelope::T_IM)?;
        within("p_im", self.p_im, envelope::P_IM)?;
        within("phi", self.phi, envelope::PHI)?;
        within("egr", self.egr, envelope::EGR)?;
        within("soi", self.soi, envelope::SOI)?;
        within("x_r", self.x_r, RESIDUAL_RANGE)?;
        for (name, v) in [
            ("x_o2_amb", self.x_o2_amb),
            ("x_o2_int", self.x_o2_int),
            ("x_o2_exh", self.x_o2_exh),
            ("t_ivc", self.t_ivc),
            ("p_ivc", self.p_ivc),
            ("soc", self.soc),
            ("ca50", self.ca50),
        ] {
            if !v.is_finite() {
                return Err(Error::Dataset(format!("{name} is not finite")));
            }
        }
        Ok(())
    }

    pub fn x_d(&self) -> f64 {
        gas::dilution_fraction(self.egr, self.x_r)
    }
}

pub fn write_csv<W: Write>(samples: &[CalibrationSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in samples {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<CalibrationSample>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in r.deserialize() {
        let s: CalibrationSample = row?;
        s.validate()?;
        out.push(s);
    }
    if out.is_empty() {
        return Err(Error::Dataset("no samples".into()));
    }
    Ok(out)
}

/// Settings for [`generate_synthetic`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub per_cylinder: usize,
    pub seed: u64,
    /// Standard deviation of Gaussian noise on the CA50 target, CAD.
    pub ca50_noise: f64,
    /// Standard deviation of Gaussian noise on the SOC target, CAD.
    pub soc_noise: f64,
    /// Half-width of the uniform jitter on the residual fraction.
    pub x_r_jitter: f64,
}

impl Default for SyntheticConfig {
    /// 288 samples in total.
    fn default() -> Self {
        Self {
            per_cylinder: 48,
            seed: 7,
            ca50_noise: 0.3,
            soc_noise: 0.3,
            x_r_jitter: 0.01,
        }
    }
}

/// Draws operating points uniformly over the envelope and labels them with
/// the generating model: intake models from `truth`, SOC from the knock
/// integral on a polytropic trace, CA50 from the Wiebe landmark.
pub fn generate_synthetic(
    truth: &CoefficientSet,
    geom: &EngineGeometry,
    wiebe: &WiebeParams,
    config: &SyntheticConfig,
) -> Result<Vec<CalibrationSample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let ca50_noise = Normal::new(0.0, config.ca50_noise)
        .map_err(|e| Error::Config(format!("ca50_noise: {e}")))?;
    let soc_noise =
        Normal::new(0.0, config.soc_noise).map_err(|e| Error::Config(format!("soc_noise: {e}")))?;
    let c = &truth.combustion;
    let c15 = c.c15(wiebe);
    let mut out = Vec::with_capacity(config.per_cylinder * truth.intake.len());
    let draw = |(lo, hi): (f64, f64), rng: &mut ChaCha8Rng| rng.random_range(lo..=hi);

    for _ in 0..config.per_cylinder {
        for (idx, intake) in truth.intake.iter().enumerate() {
            let n = draw(envelope::SPEED, &mut rng);
            let t_im = draw(envelope::T_IM, &mut rng);
            let p_im = draw(envelope::P_IM, &mut rng);
            let phi = draw(envelope::PHI, &mut rng);
            let egr = draw(envelope::EGR, &mut rng);
            let soi = draw(envelope::SOI, &mut rng);
            let jitter = if config.x_r_jitter > 0.0 {
                rng.random_range(-config.x_r_jitter..=config.x_r_jitter)
            } else {
                0.0
            };
            let x_r = (gas::nominal_residual_fraction(egr) + jitter)
                .clamp(RESIDUAL_RANGE.0, RESIDUAL_RANGE.1);
            let (x_o2_amb, x_o2_int, x_o2_exh) = gas::oxygen_fractions(egr, phi);
            let t_ivc = gas::t_ivc(intake, t_im, p_im, phi, n, egr)?;
            let p_ivc = gas::p_ivc(intake, t_im, n, p_im)?;
            let ivc = GasState::new(p_ivc, t_ivc, geom.ivc)?;
            let soc = combustion::soc_full_polytropic(
                geom,
                ivc,
                c.k_c,
                soi,
                geom.evo,
                ORACLE_STEP,
                n,
                egr,
                phi,
                c,
            )?;
            let bd = combustion::burn_duration(egr + x_r, phi, c15, c)?;
            let ca50 = combustion::ca50_from_wiebe(soc, bd, wiebe);
            out.push(CalibrationSample {
                cylinder: idx + 1,
                t_im,
                p_im,
                n,
                phi,
                egr,
                soi,
                x_r,
                x_o2_amb,
                x_o2_int,
                x_o2_exh,
                t_ivc,
                p_ivc,
                soc: soc + soc_noise.sample(&mut rng),
                ca50: ca50 + ca50_noise.sample(&mut rng),
            });
        }
    }
    Ok(out)
}

/// Deterministic train/validation split: within each cylinder the first
/// `train_fraction` of samples (in dataset order) train, the rest validate.
pub fn split(
    samples: &[CalibrationSample],
    train_fraction: f64,
) -> (Vec<CalibrationSample>, Vec<CalibrationSample>) {
    let mut train = Vec::new();
    let mut validate = Vec::new();
    for cyl in 1..=N_CYLINDERS {
        let rows: Vec<_> = samples.iter().filter(|s| s.cylinder == cyl).collect();
        let k = (rows.len() as f64 * train_fraction).round() as usize;
        for (i, s) in rows.into_iter().enumerate() {
            if i < k {
                train.push(*s);
            } else {
                validate.push(*s);
            }
        }
    }
    (train, validate)
}

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.7;

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Vec<CalibrationSample> {
        let cfg = SyntheticConfig {
            per_cylinder: 5,
            ..SyntheticConfig::default()
        };
        generate_synthetic(
            &CoefficientSet::published(),
            &EngineGeometry::default(),
            &WiebeParams::default(),
            &cfg,
        )
        .unwrap()
    }

    #[test]
    fn generator_is_seeded_and_valid() {
        let a = small();
        assert_eq!(a.len(), 30);
        assert_eq!(a, small());
        for s in &a {
            s.validate().unwrap();
            assert!(s.ca50 > s.soi);
        }
        let cfg = SyntheticConfig {
            per_cylinder: 5,
            seed: 8,
            ..SyntheticConfig::default()
        };
        let b = generate_synthetic(
            &CoefficientSet::published(),
            &EngineGeometry::default(),
            &WiebeParams::default(),
            &cfg,
        )
        .unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn csv_round_trip() {
        let a = small();
        let mut buf = Vec::new();
        write_csv(&a, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("cylinder,t_im,p_im,n,phi,egr,soi,x_r,"));
        assert_eq!(read_csv(buf.as_slice()).unwrap(), a);
    }

    #[test]
    fn loader_rejects_out_of_envelope() {
        let mut a = small();
        a[0].n = 3000.0;
        let mut buf = Vec::new();
        write_csv(&a, &mut buf).unwrap();
        assert!(matches!(read_csv(buf.as_slice()), Err(Error::Dataset(_))));
    }

    #[test]
    fn split_is_per_cylinder() {
        let a = small();
        let (t, v) = split(&a, 0.7);
        assert_eq!(t.len() + v.len(), a.len());
        assert_eq!(t.iter().filter(|s| s.cylinder == 3).count(), 4);
    }
}
