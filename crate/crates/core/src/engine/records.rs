//! Record-stream CSV.
//!
//! Files start with `#` attribution lines, then a header row naming the
//! [`CycleRecord`] fields. Floats are written with six decimals so that the
//! bytes depend only on the simulated values.

use std::io::{Read, Write};

use super::plant::CycleRecord;
use super::sim::RunOutput;
use crate::error::{Error, Result};

pub const FIELDS: [&str; 25] = [
    "cycle",
    "segment",
    "segment_cycle",
    "time",
    "cylinder",
    "n",
    "phi",
    "p_im",
    "t_im",
    "egr",
    "x_r",
    "ca50_ref",
    "soi",
    "clamped",
    "p_ivc",
    "t_ivc",
    "p_soi",
    "t_soi",
    "soc",
    "bd",
    "ca50_true",
    "ca50_measured",
    "misfire",
    "x1_hat",
    "x2_hat",
];

fn f(v: f64) -> String {
    format!("{v:.6}")
}

fn opt(v: Option<f64>) -> String {
    v.map(f).unwrap_or_default()
}

/// `x_hat` values are small; they get scientific notation to keep precision.
fn opt_sci(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.9e}")).unwrap_or_default()
}

fn row(r: &CycleRecord) -> [String; 25] {
    [
        r.cycle.to_string(),
        r.segment.to_string(),
        r.segment_cycle.to_string(),
        f(r.time),
        r.cylinder.to_string(),
        f(r.n),
        f(r.phi),
        f(r.p_im),
        f(r.t_im),
        f(r.egr),
        f(r.x_r),
        f(r.ca50_ref),
        opt(r.soi),
        r.clamped.to_string(),
        f(r.p_ivc),
        f(r.t_ivc),
        opt(r.p_soi),
        opt(r.t_soi),
        opt(r.soc),
        opt(r.bd),
        opt(r.ca50_true),
        opt(r.ca50_measured),
        r.misfire.to_string(),
        opt_sci(r.x1_hat),
        opt_sci(r.x2_hat),
    ]
}

/// Attribution lines shared by every output file of a run.
pub fn header_lines(out: &RunOutput) -> Vec<String> {
    vec![
        format!("# seed = {}", out.seed),
        format!("# preset = {}", out.preset),
        format!("# controller = {}", out.controller.name()),
        format!("# duration = {}", out.duration),
        format!("# coefficients_sha256 = {}", out.coefficients_sha256),
    ]
}

pub fn write_records<W: Write>(out: &RunOutput, mut w: W) -> Result<()> {
    for line in header_lines(out) {
        writeln!(w, "{line}")?;
    }
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(FIELDS)?;
    for r in &out.records {
        csv.write_record(row(r))?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(r: R) -> Result<Vec<CycleRecord>> {
    let mut csv = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let header = csv.headers()?.clone();
    if header.iter().ne(FIELDS.iter().copied()) {
        return Err(Error::Dataset(format!(
            "unexpected record header: {header:?}"
        )));
    }
    csv.deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{Controller, FeedforwardController};
    use crate::engine::cases::CasePreset;
    use crate::engine::plant::{Plant, PlantConfig};
    use crate::engine::sim::run_case;

    #[test]
    fn csv_round_trip() {
        let plant = Plant::new(PlantConfig::default()).unwrap();
        let c = plant.config();
        let mut ctl = FeedforwardController::new(c.coefficients.clone(), c.geometry, c.soi_band);
        let preset = CasePreset::builtin("case2").unwrap();
        let out = run_case(
            &preset,
            &plant,
            &mut ctl as &mut dyn Controller,
            Some(0.5),
            9,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_records(&out, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# seed = 9\n"));
        assert!(text.contains(&out.coefficients_sha256));
        let back = read_records(buf.as_slice()).unwrap();
        assert_eq!(back.len(), out.records.len());
        for (a, b) in back.iter().zip(&out.records) {
            assert_eq!(
                (a.cycle, a.cylinder, a.misfire, a.soi.is_some()),
                (b.cycle, b.cylinder, b.misfire, b.soi.is_some())
            );
            assert!((a.time - b.time).abs() <= 5e-7);
            if let (Some(x), Some(y)) = (a.ca50_true, b.ca50_true) {
                assert!((x - y).abs() <= 5e-7);
            }
        }
        let mut again = Vec::new();
        write_records(&out, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(read_records("a,b\n1,2\n".as_bytes()).is_err());
    }
}
