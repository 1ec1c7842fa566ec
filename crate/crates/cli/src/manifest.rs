//! Run manifests and the harness configuration file.

use std::path::{Path, PathBuf};

use phasing_core::calibration::{OptimizerConfig, SyntheticConfig};
use phasing_core::control::{
    AdaptiveController, Controller, ControllerKind, FeedforwardController, PidController, PidGains,
};
use phasing_core::engine::{CasePreset, NoiseConfig, Plant, PlantConfig};
use phasing_core::{CoefficientSet, Error, Result};
use serde::{Deserialize, Serialize};

use crate::summary::SummaryConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    pub synthetic: SyntheticConfig,
    pub optimizer: OptimizerConfig,
    /// Dataset CSV; a synthetic dataset is generated when absent.
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseStudyConfig {
    /// Noise applied in the "with noise" column.
    pub noise: NoiseConfig,
    /// Steady-state band the noisy run must stay inside, CAD.
    pub steady_band: f64,
}

impl Default for NoiseStudyConfig {
    fn default() -> Self {
        Self {
            noise: NoiseConfig::measurement_study(),
            steady_band: 1.0,
        }
    }
}

/// Contents of a `--config` TOML file. Every section is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub plant: PlantConfig,
    /// Coefficient file for the plant truth; overrides `plant.coefficients`.
    pub plant_coefficients: Option<PathBuf>,
    /// Coefficient file for the controller-side model; published values
    /// when absent.
    pub model_coefficients: Option<PathBuf>,
    pub pid: PidGains,
    pub summary: SummaryConfig,
    pub calibration: CalibrationConfig,
    pub noise_study: NoiseStudyConfig,
}

impl HarnessConfig {
    /// Parses a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.plant_coefficients,
            &mut cfg.model_coefficients,
            &mut cfg.calibration.dataset,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg: Self =
            toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        if let Some(p) = &cfg.plant_coefficients {
            cfg.plant.coefficients = CoefficientSet::load(p)?;
        }
        cfg.plant.validate()?;
        cfg.calibration.optimizer.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn model(&self) -> Result<CoefficientSet> {
        match &self.model_coefficients {
            Some(p) => CoefficientSet::load(p),
            None => Ok(CoefficientSet::published()),
        }
    }

    pub fn plant(&self) -> Result<Plant> {
        Plant::new(self.plant.clone())
    }

    pub fn controller(&self, kind: ControllerKind) -> Result<Box<dyn Controller>> {
        let model = self.model()?;
        if model.intake.len() != self.plant.coefficients.intake.len() {
            return Err(Error::Config(format!(
                "model has {} cylinders, plant has {}",
                model.intake.len(),
                self.plant.coefficients.intake.len()
            )));
        }
        let (geom, band) = (self.plant.geometry, self.plant.soi_band);
        Ok(match kind {
            ControllerKind::Adaptive => Box::new(AdaptiveController::new(model, geom, band)),
            ControllerKind::Feedforward => Box::new(FeedforwardController::new(model, geom, band)),
            ControllerKind::Pid => Box::new(PidController::new(self.pid, model.intake.len(), band)),
        })
    }
}

/// Built-in preset name, or a path to a preset file.
pub fn resolve_case(case: &str) -> Result<CasePreset> {
    let path = Path::new(case);
    if case.ends_with(".toml") {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("case file {}: {e}", path.display())))?;
        return CasePreset::parse(&text);
    }
    CasePreset::builtin(case)
}

/// Everything one `run` invocation needs, validated before anything is
/// written.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub case: String,
    pub preset: CasePreset,
    pub controller: ControllerKind,
    pub seed: u64,
    pub out: PathBuf,
    pub duration: Option<f64>,
    pub config: HarnessConfig,
}

impl RunManifest {
    pub fn new(
        case: &str,
        controller: ControllerKind,
        seed: u64,
        out: PathBuf,
        duration: Option<f64>,
        config: HarnessConfig,
    ) -> Result<Self> {
        let preset = resolve_case(case)?;
        if let Some(d) = duration {
            if !(d > 0.0) {
                return Err(Error::Config(format!("duration must be positive, got {d}")));
            }
        }
        Ok(Self {
            case: case.to_string(),
            preset,
            controller,
            seed,
            out,
            duration,
            config,
        })
    }
}
