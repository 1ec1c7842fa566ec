//! Two-segment case presets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    /// RPM
    pub speed: f64,
    /// K
    pub intake_temperature: f64,
    /// Manifold pressure target, bar.
    pub boost: f64,
    pub phi: f64,
    pub egr: f64,
    /// CAD aTDC
    pub ca50_ref: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasePreset {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// s
    pub segment_duration: f64,
    /// Speed and equivalence-ratio ramp time after the switch, s.
    pub transition_time: f64,
    #[serde(rename = "segment")]
    pub segments: Vec<OperatingPoint>,
}

const BUILTIN: [(&str, &str); 4] = [
    ("case1", include_str!("../../presets/case1.toml")),
    ("case2", include_str!("../../presets/case2.toml")),
    ("case3", include_str!("../../presets/case3.toml")),
    ("case4", include_str!("../../presets/case4.toml")),
];

/// Cubic ease from 0 to 1 on `[0, 1]`.
fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

impl CasePreset {
    pub fn builtin_names() -> Vec<&'static str> {
        BUILTIN.iter().map(|(n, _)| *n).collect()
    }

    /// Built-in preset by name; `"1"` is accepted for `"case1"`.
    pub fn builtin(name: &str) -> Result<Self> {
        let key = if name.starts_with("case") {
            name.to_string()
        } else {
            format!("case{name}")
        };
        let text = BUILTIN
            .iter()
            .find(|(n, _)| *n == key)
            .map(|(_, t)| *t)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown case '{name}' (known: {})",
                    Self::builtin_names().join(", ")
                ))
            })?;
        Self::parse(text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let p: Self =
            toml::from_str(text).map_err(|e| Error::Config(format!("case preset: {e}")))?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.len() != 2 {
            return Err(Error::Config(format!(
                "preset {} needs exactly 2 segments, has {}",
                self.name,
                self.segments.len()
            )));
        }
        if !(self.segment_duration > 0.0) || !(self.transition_time >= 0.0) {
            return Err(Error::Config(format!("preset {}: bad timing", self.name)));
        }
        for s in &self.segments {
            let ok = s.speed > 0.0
                && s.intake_temperature > 0.0
                && s.boost > 0.0
                && s.phi > 0.0
                && (0.0..=0.5).contains(&s.egr)
                && s.ca50_ref.is_finite();
            if !ok {
                return Err(Error::Config(format!(
                    "preset {}: operating point out of range: {s:?}",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn segment_index(&self, t: f64) -> usize {
        usize::from(t >= self.segment_duration)
    }

    pub fn segment(&self, t: f64) -> &OperatingPoint {
        &self.segments[self.segment_index(t)]
    }

    fn ramp(&self, t: f64, f: impl Fn(&OperatingPoint) -> f64) -> f64 {
        let (a, b) = (f(&self.segments[0]), f(&self.segments[1]));
        let x = if self.transition_time > 0.0 {
            (t - self.segment_duration) / self.transition_time
        } else if t >= self.segment_duration {
            1.0
        } else {
            0.0
        };
        a + (b - a) * smoothstep(x)
    }

    pub fn speed(&self, t: f64) -> f64 {
        self.ramp(t, |p| p.speed)
    }

    pub fn phi(&self, t: f64) -> f64 {
        self.ramp(t, |p| p.phi)
    }
}
