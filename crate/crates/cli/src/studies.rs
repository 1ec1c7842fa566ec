//! Calibration, error studies and the simplification oracle grid.

use std::fmt::Write as _;

use phasing_core::calibration::dataset::{envelope, read_csv};
use phasing_core::calibration::{
    calibrate, error_response_study, generate_synthetic, reference_perturbations,
    CalibrationOutcome, CalibrationSample, SensitivityTable,
};
use phasing_core::combustion::{self, soc_full_polytropic, ORACLE_STEP};
use phasing_core::control::ControllerKind;
use phasing_core::engine::{run_case, CasePreset, Plant, RunOutput};
use phasing_core::gas::{self, GasState};
use phasing_core::{stats, CoefficientSet, Error, Result};
use serde::{Deserialize, Serialize};

use crate::manifest::HarnessConfig;
use crate::summary::summarize;

/// The calibration dataset: the configured file or the seeded generator.
pub fn dataset(cfg: &HarnessConfig, seed: Option<u64>) -> Result<Vec<CalibrationSample>> {
    if let Some(path) = &cfg.calibration.dataset {
        let f = std::fs::File::open(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        return read_csv(f);
    }
    let mut syn = cfg.calibration.synthetic;
    if let Some(s) = seed {
        syn.seed = s;
    }
    generate_synthetic(
        &cfg.plant.coefficients,
        &cfg.plant.geometry,
        &cfg.plant.wiebe,
        &syn,
    )
}

pub fn run_calibration(
    cfg: &HarnessConfig,
    samples: &[CalibrationSample],
) -> Result<CalibrationOutcome> {
    calibrate(
        samples,
        &cfg.model()?,
        &cfg.plant.geometry,
        &cfg.calibration.optimizer,
    )
}

/// Input-error study on the dataset with coefficients fitted to it.
pub fn sensitivity(
    cfg: &HarnessConfig,
    seed: Option<u64>,
) -> Result<(SensitivityTable, CoefficientSet)> {
    let samples = dataset(cfg, seed)?;
    let fitted = run_calibration(cfg, &samples)?.coefficients;
    let table = error_response_study(
        &samples,
        &fitted,
        &cfg.plant.geometry,
        &reference_perturbations(),
    )?;
    Ok((table, fitted))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub cylinder: usize,
    /// Std of CA50 error over the whole run without measurement noise.
    pub std_without: f64,
    pub std_with: f64,
    /// Steady-state half-width of the noisy run.
    pub steady_with: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseStudy {
    pub preset: String,
    pub seed: u64,
    pub duration: f64,
    pub rows: Vec<NoiseRow>,
}

impl NoiseStudy {
    pub fn worst_steady(&self) -> f64 {
        self.rows.iter().map(|r| r.steady_with).fold(0.0, f64::max)
    }

    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:>4} {:>22} {:>22} {:>16}\n",
            "cyl", "error std, no noise", "error std, noise", "steady |e| max"
        );
        for r in &self.rows {
            writeln!(
                s,
                "{:>4} {:>22.4} {:>22.4} {:>16.4}",
                r.cylinder, r.std_without, r.std_with, r.steady_with
            )
            .unwrap();
        }
        s
    }
}

/// Adaptive control at the first operating point of case 2 with and
/// without CA50 measurement noise. Standard deviations cover every fuelled
/// cycle, start-up transient included.
pub fn noise_study(cfg: &HarnessConfig, seed: u64) -> Result<(NoiseStudy, RunOutput, RunOutput)> {
    let preset = CasePreset::builtin("case2")?;
    let duration = preset.segment_duration;
    let run = |noise| -> Result<RunOutput> {
        let mut pc = cfg.plant.clone();
        pc.noise = noise;
        let plant = Plant::new(pc)?;
        let mut ctl = cfg.controller(ControllerKind::Adaptive)?;
        run_case(&preset, &plant, ctl.as_mut(), Some(duration), seed)
    };
    let clean = run(phasing_core::engine::NoiseConfig::default())?;
    let noisy = run(cfg.noise_study.noise)?;
    let summary = summarize(&noisy.records, &cfg.summary)?;
    let errs = |out: &RunOutput, cyl: usize| -> Vec<f64> {
        out.records
            .iter()
            .filter(|r| r.cylinder == cyl)
            .filter_map(|r| r.error())
            .collect()
    };
    let rows = (1..=cfg.plant.coefficients.intake.len())
        .map(|cyl| NoiseRow {
            cylinder: cyl,
            std_without: stats::std_dev(&errs(&clean, cyl)),
            std_with: stats::std_dev(&errs(&noisy, cyl)),
            steady_with: summary[0]
                .cylinders
                .iter()
                .find(|c| c.cylinder == cyl)
                .map_or(f64::INFINITY, |c| c.steady_half_width()),
        })
        .collect();
    Ok((
        NoiseStudy {
            preset: preset.name.clone(),
            seed,
            duration,
            rows,
        },
        clean,
        noisy,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OraclePoint {
    pub n: f64,
    pub p_im: f64,
    pub egr: f64,
    pub soi: f64,
    pub phi: f64,
    pub soc_full: f64,
    pub soc_simplified: f64,
}

impl OraclePoint {
    pub fn gap(&self) -> f64 {
        (self.soc_full - self.soc_simplified).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub t_im: f64,
    pub points: Vec<OraclePoint>,
}

impl OracleReport {
    pub fn worst(&self) -> &OraclePoint {
        self.points
            .iter()
            .max_by(|a, b| a.gap().total_cmp(&b.gap()))
            .expect("grid is nonempty")
    }

    pub fn to_text(&self) -> String {
        let w = self.worst();
        format!(
            "points {}\nT_im {} K\nmax |soc_full - soc_simplified| {:.4} CAD\n\
             at N {} RPM, P_im {} bar, EGR {}, SOI {} CAD, phi {}\n",
            self.points.len(),
            self.t_im,
            w.gap(),
            w.n,
            w.p_im,
            w.egr,
            w.soi,
            w.phi
        )
    }
}

fn levels((lo, hi): (f64, f64), k: usize) -> Vec<f64> {
    (0..k)
        .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
        .collect()
}

/// Knock-integral SOC at the oracle step against the closed form, over a
/// 5×5×5×5×3 grid of speed, boost, EGR, SOI and equivalence ratio with the
/// intake temperature at the middle of its range. Intake states come from
/// cylinder 1 of `set`.
pub fn oracle_check(
    set: &CoefficientSet,
    geom: &phasing_core::geometry::EngineGeometry,
) -> Result<OracleReport> {
    let t_im = 0.5 * (envelope::T_IM.0 + envelope::T_IM.1);
    let intake = set.cylinder(0);
    let c = &set.combustion;
    let mut points = Vec::with_capacity(5 * 5 * 5 * 5 * 3);
    for &n in &levels(envelope::SPEED, 5) {
        for &p_im in &levels(envelope::P_IM, 5) {
            for &egr in &levels(envelope::EGR, 5) {
                for &soi in &levels(envelope::SOI, 5) {
                    for &phi in &levels(envelope::PHI, 3) {
                        let t_ivc = gas::t_ivc(intake, t_im, p_im, phi, n, egr)?;
                        let p_ivc = gas::p_ivc(intake, t_im, n, p_im)?;
                        let ivc = GasState::new(p_ivc, t_ivc, geom.ivc)?;
                        let full = soc_full_polytropic(
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
                        let st = gas::polytropic_to_soi(
                            ivc,
                            geom.volume(geom.ivc),
                            geom.volume(soi),
                            c.k_c,
                        )
                        .at(soi);
                        let simple = combustion::soc_simplified(soi, &st, n, egr, phi, c)?;
                        points.push(OraclePoint {
                            n,
                            p_im,
                            egr,
                            soi,
                            phi,
                            soc_full: full,
                            soc_simplified: simple,
                        });
                    }
                }
            }
        }
    }
    Ok(OracleReport { t_im, points })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_levels_span_ranges() {
        assert_eq!(levels((0.0, 1.0), 5), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(levels(envelope::PHI, 3), vec![0.5, 0.7, 0.9]);
    }

    #[test]
    fn noise_study_has_six_rows_and_clean_column_is_noise_free() {
        let cfg = HarnessConfig::default();
        let (study, clean, _) = noise_study(&cfg, 3).unwrap();
        assert_eq!(study.rows.len(), 6);
        assert!(clean.records.iter().all(|r| r.ca50_measured == r.ca50_true));
        assert!(study.to_table().lines().count() == 7);
    }
}
