//! CA50 prediction error under biased model inputs.

use serde::{Deserialize, Serialize};

use super::dataset::CalibrationSample;
use super::fit::{predict, Prediction};
use crate::coefficients::CoefficientSet;
use crate::error::Result;
use crate::geometry::EngineGeometry;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PerturbedInput {
    IntakeTemperature,
    IntakePressure,
    Egr,
    EquivalenceRatio,
    ResidualFraction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub input: PerturbedInput,
    /// Additive offset in the input's own units (K, bar, or fraction).
    pub delta: f64,
}

impl Perturbation {
    pub fn label(&self) -> String {
        let (name, unit, scale) = match self.input {
            PerturbedInput::IntakeTemperature => ("T_im", " K", 1.0),
            PerturbedInput::IntakePressure => ("P_im", " bar", 1.0),
            PerturbedInput::Egr => ("EGR", "%", 100.0),
            PerturbedInput::EquivalenceRatio => ("phi", "", 1.0),
            PerturbedInput::ResidualFraction => ("X_r", "", 1.0),
        };
        let v = self.delta * scale;
        format!(
            "{name} {}{}{unit}",
            if v >= 0.0 { "+" } else { "-" },
            fmt_num(v.abs())
        )
    }

    /// Applies the offset. Fractions are kept inside their physical bounds.
    pub fn apply(&self, s: &CalibrationSample) -> CalibrationSample {
        let mut p = *s;
        match self.input {
            PerturbedInput::IntakeTemperature => p.t_im += self.delta,
            PerturbedInput::IntakePressure => p.p_im += self.delta,
            PerturbedInput::Egr => p.egr = (p.egr + self.delta).clamp(0.0, 1.0),
            PerturbedInput::EquivalenceRatio => p.phi += self.delta,
            PerturbedInput::ResidualFraction => p.x_r = (p.x_r + self.delta).clamp(0.0, 0.999),
        }
        p
    }
}

fn fmt_num(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// The ten input errors of the reference study, in table order.
pub fn reference_perturbations() -> Vec<Perturbation> {
    use PerturbedInput::*;
    [
        (IntakeTemperature, 5.0),
        (IntakeTemperature, -5.0),
        (IntakePressure, 0.1),
        (IntakePressure, -0.1),
        (Egr, 0.05),
        (Egr, -0.05),
        (EquivalenceRatio, 0.05),
        (EquivalenceRatio, -0.05),
        (ResidualFraction, 0.03),
        (ResidualFraction, -0.03),
    ]
    .into_iter()
    .map(|(input, delta)| Perturbation { input, delta })
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub label: String,
    pub perturbation: Option<Perturbation>,
    pub ca50_std: f64,
    pub ca50_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityTable {
    /// First row is the unperturbed baseline.
    pub rows: Vec<SensitivityRow>,
}

impl SensitivityTable {
    pub fn baseline(&self) -> &SensitivityRow {
        &self.rows[0]
    }

    /// Largest |std − baseline std| over the perturbed rows.
    pub fn max_std_shift(&self) -> f64 {
        let b = self.baseline().ca50_std;
        self.rows[1..]
            .iter()
            .map(|r| (r.ca50_std - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<16}{:>12}{:>12}\n",
            "input error", "std [CAD]", "max [CAD]"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<16}{:>12.3}{:>12.3}\n",
                r.label, r.ca50_std, r.ca50_max
            ));
        }
        out
    }
}

fn row(
    label: String,
    perturbation: Option<Perturbation>,
    samples: &[CalibrationSample],
    set: &CoefficientSet,
    geom: &EngineGeometry,
) -> Result<SensitivityRow> {
    let errors = samples
        .iter()
        .map(|s| {
            let input = perturbation.map_or(*s, |p| p.apply(s));
            predict(&input, set, geom).map(|Prediction { ca50, .. }| ca50 - s.ca50)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SensitivityRow {
        label,
        perturbation,
        ca50_std: stats::std_dev(&errors),
        ca50_max: stats::max_abs(&errors),
    })
}

/// Recomputes CA50 predictions with each input offset and reports the error
/// statistics against the unperturbed targets. The baseline row comes first.
pub fn error_response_study(
    samples: &[CalibrationSample],
    set: &CoefficientSet,
    geom: &EngineGeometry,
    perturbations: &[Perturbation],
) -> Result<SensitivityTable> {
    let mut rows = vec![row("No error".into(), None, samples, set, geom)?];
    for p in perturbations {
        rows.push(row(p.label(), Some(*p), samples, set, geom)?);
    }
    Ok(SensitivityTable { rows })
}
