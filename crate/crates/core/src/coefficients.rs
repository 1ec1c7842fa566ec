//! Default coefficient set and the plain-text coefficient file format.
//!
//! The file has one `cylinder` header row, rows `c1`..`c9` with one column
//! per cylinder, then scalar rows for the shared combustion coefficients.
//! `#` starts a comment. An optional
//! `units K bar RPM CAD` line is accepted; any other unit declaration is
//! rejected because the coefficients are only meaningful in those units.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::combustion::CombustionCoefficients;
use crate::error::{Error, Result};
use crate::gas::IntakeCoefficients;

pub const N_CYLINDERS: usize = 6;
pub const UNITS: [&str; 4] = ["K", "bar", "RPM", "CAD"];

const INTAKE_KEYS: [&str; 9] = ["c1", "c2", "c3", "c4", "c5", "c6", "c7", "c8", "c9"];
const SCALAR_KEYS: [&str; 9] = [
    "c10", "c11", "c12", "c13", "c14", "c16", "c17", "c18", "k_c",
];

#[rustfmt::skip]
const PUBLISHED_INTAKE: [[f64; N_CYLINDERS]; 9] = [
    [-7.35e-4, -7.68e-4, -8.00e-4, -8.24e-4, -8.53e-4, -8.73e-4],
    [0.842, 0.855, 0.850, 0.852, 0.844, 0.839],
    [-12.1, -10.2, -11.2, -5.21, -4.29, 4.69],
    [0.111, 0.109, 0.114, 0.112, 0.116, 0.112],
    [-0.167, -0.165, -0.161, -0.168, -0.165, -0.166],
    [0.0204, 0.0195, 0.0177, 0.0171, 0.0152, 0.0136],
    [0.0600, 0.0602, 0.0585, 0.0594, 0.0598, 0.0594],
    [-0.0580, -0.0504, -0.0462, -0.0488, -0.0386, -0.0388],
    [0.0810, 0.0713, 0.0651, 0.0710, 0.0569, 0.0582],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    /// Indexed by cylinder number minus one.
    pub intake: Vec<IntakeCoefficients>,
    pub combustion: CombustionCoefficients,
}

impl CoefficientSet {
    pub fn published() -> Self {
        let intake = (0..N_CYLINDERS)
            .map(|cyl| {
                let mut c = [0.0; 9];
                for (k, row) in PUBLISHED_INTAKE.iter().enumerate() {
                    c[k] = row[cyl];
                }
                IntakeCoefficients::from_array(c)
            })
            .collect();
        Self {
            intake,
            combustion: CombustionCoefficients::published(),
        }
    }

    pub fn cylinder(&self, index: usize) -> &IntakeCoefficients {
        &self.intake[index]
    }

    /// Sign and count checks that the monotonicity properties rely on.
    pub fn validate(&self) -> Result<()> {
        if self.intake.len() != N_CYLINDERS {
            return Err(Error::CoefficientFile(format!(
                "expected {N_CYLINDERS} cylinders, found {}",
                self.intake.len()
            )));
        }
        for (i, c) in self.intake.iter().enumerate() {
            if c.as_array().iter().any(|v| !v.is_finite()) {
                return Err(Error::CoefficientDomain(format!(
                    "cylinder {} has a non-finite coefficient",
                    i + 1
                )));
            }
            if !(c.c6 > 0.0 && c.c7 > 0.0) {
                return Err(Error::CoefficientDomain(format!(
                    "cylinder {}: c6 and c7 must be positive (c6={}, c7={})",
                    i + 1,
                    c.c6,
                    c.c7
                )));
            }
        }
        self.combustion.validate()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cylinders: Option<Vec<usize>> = None;
        let mut rows: [Option<Vec<f64>>; 9] = Default::default();
        let mut scalars: [Option<f64>; 9] = [None; 9];
        let mut c15 = None;

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::CoefficientFile(format!("line {}: {msg}", lineno + 1));
            let mut fields = line.split_whitespace();
            let key = fields.next().unwrap_or_default();
            let rest: Vec<&str> = fields.collect();
            match key {
                "units" => {
                    if rest != UNITS {
                        return Err(err(format!(
                            "unit override '{}' rejected; coefficients are bound to {}",
                            rest.join(" "),
                            UNITS.join(" ")
                        )));
                    }
                }
                "cylinder" => {
                    let idx = rest
                        .iter()
                        .map(|s| s.parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| err(format!("bad cylinder index: {e}")))?;
                    let expected: Vec<usize> = (1..=N_CYLINDERS).collect();
                    if idx != expected {
                        return Err(err(format!(
                            "cylinder row must list 1..{N_CYLINDERS}, found {idx:?}"
                        )));
                    }
                    cylinders = Some(idx);
                }
                _ => {
                    let values = rest
                        .iter()
                        .map(|s| s.parse::<f64>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| err(format!("bad number for {key}: {e}")))?;
                    if let Some(k) = INTAKE_KEYS.iter().position(|&n| n == key) {
                        if values.len() != N_CYLINDERS {
                            return Err(err(format!(
                                "{key} needs {N_CYLINDERS} values, found {}",
                                values.len()
                            )));
                        }
                        rows[k] = Some(values);
                    } else if let Some(k) = SCALAR_KEYS.iter().position(|&n| n == key) {
                        if values.len() != 1 {
                            return Err(err(format!("{key} takes a single value")));
                        }
                        scalars[k] = Some(values[0]);
                    } else if key == "c15" {
                        if values.len() != 1 {
                            return Err(err("c15 takes a single value".into()));
                        }
                        c15 = Some(values[0]);
                    } else {
                        return Err(err(format!("unknown key '{key}'")));
                    }
                }
            }
        }

        if cylinders.is_none() {
            return Err(Error::CoefficientFile("missing 'cylinder' row".into()));
        }
        let mut intake = vec![[0.0; 9]; N_CYLINDERS];
        for (k, row) in rows.iter().enumerate() {
            let row = row
                .as_ref()
                .ok_or_else(|| Error::CoefficientFile(format!("missing key {}", INTAKE_KEYS[k])))?;
            for (cyl, v) in row.iter().enumerate() {
                intake[cyl][k] = *v;
            }
        }
        let mut s = [0.0; 9];
        for (k, v) in scalars.iter().enumerate() {
            s[k] =
                v.ok_or_else(|| Error::CoefficientFile(format!("missing key {}", SCALAR_KEYS[k])))?;
        }
        let set = Self {
            intake: intake
                .into_iter()
                .map(IntakeCoefficients::from_array)
                .collect(),
            combustion: CombustionCoefficients {
                c10: s[0],
                c11: s[1],
                c12: s[2],
                c13: s[3],
                c14: s[4],
                c16: s[5],
                c17: s[6],
                c18: s[7],
                k_c: s[8],
                c15,
            },
        };
        set.validate()?;
        Ok(set)
    }

    /// Serializes in the format [`CoefficientSet::parse`] reads. Values use
    /// the shortest round-tripping representation.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "units {}", UNITS.join(" ")).unwrap();
        let idx: Vec<String> = (1..=self.intake.len()).map(|i| i.to_string()).collect();
        writeln!(out, "cylinder {}", idx.join(" ")).unwrap();
        for (k, key) in INTAKE_KEYS.iter().enumerate() {
            let vals: Vec<String> = self
                .intake
                .iter()
                .map(|c| format!("{:?}", c.as_array()[k]))
                .collect();
            writeln!(out, "{key} {}", vals.join(" ")).unwrap();
        }
        let c = &self.combustion;
        let scalars = [
            c.c10, c.c11, c.c12, c.c13, c.c14, c.c16, c.c17, c.c18, c.k_c,
        ];
        for (key, v) in SCALAR_KEYS.iter().zip(scalars) {
            writeln!(out, "{key} {v:?}").unwrap();
        }
        if let Some(v) = c.c15 {
            writeln!(out, "c15 {v:?}").unwrap();
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::CoefficientFile(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    /// Hex SHA-256 of the canonical text form; tags run records.
    pub fn checksum(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}

impl Default for CoefficientSet {
    fn default() -> Self {
        Self::published()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_tables_spot_values() {
        let set = CoefficientSet::published();
        set.validate().unwrap();
        assert_eq!(set.intake[0].c1, -7.35e-4);
        assert_eq!(set.intake[5].c3, 4.69);
        assert_eq!(set.intake[3].c8, -0.0488);
        assert_eq!(set.intake[2].c9, 0.0651);
        assert_eq!(set.combustion.c13, 8.22e4);
        assert_eq!(set.combustion.k_c, 1.25);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let set = CoefficientSet::published();
        let back = CoefficientSet::parse(&set.to_text()).unwrap();
        assert_eq!(back, set);
        assert_eq!(back.checksum(), set.checksum());
    }

    #[test]
    fn rejects_unit_override() {
        let text = CoefficientSet::published()
            .to_text()
            .replace("units K bar RPM CAD", "units C bar RPM CAD");
        assert!(matches!(
            CoefficientSet::parse(&text),
            Err(Error::CoefficientFile(_))
        ));
    }

    #[test]
    fn rejects_missing_key_and_wrong_count() {
        let text = CoefficientSet::published().to_text();
        let no_c4: String = text
            .lines()
            .filter(|l| !l.starts_with("c4 "))
            .map(|l| format!("{l}\n"))
            .collect();
        assert!(CoefficientSet::parse(&no_c4).is_err());
        let five = text.replace("cylinder 1 2 3 4 5 6", "cylinder 1 2 3 4 5");
        assert!(CoefficientSet::parse(&five).is_err());
    }

    #[test]
    fn rejects_sign_violations() {
        let mut set = CoefficientSet::published();
        set.intake[2].c6 = -0.01;
        assert!(matches!(set.validate(), Err(Error::CoefficientDomain(_))));
        let mut set = CoefficientSet::published();
        set.combustion.c14 = 0.5;
        assert!(CoefficientSet::parse(&set.to_text()).is_err());
    }

    #[test]
    fn checksum_tracks_content() {
        let a = CoefficientSet::published();
        let mut b = a.clone();
        b.intake[0].c2 += 1e-9;
        assert_ne!(a.checksum(), b.checksum());
        assert_eq!(a.checksum().len(), 64);
    }
}
