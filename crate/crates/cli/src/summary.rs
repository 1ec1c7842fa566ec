//! Settling, steady-state band and overshoot per cylinder and segment.
//!
//! Everything here is a pure function of the record stream, so a summary
//! can be recomputed from a records CSV alone. Errors are true CA50 minus
//! reference; a misfire counts as out of band.

use std::fmt::Write as _;

use phasing_core::engine::CycleRecord;
use phasing_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// First engine cycle commanded by the controller (cycle 1 is unfuelled,
/// cycle 2 is the bootstrap injection).
pub const FIRST_CONTROLLED_CYCLE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SummaryConfig {
    /// Band for the settling index, CAD.
    pub settle_band: f64,
    /// Trailing fraction of each segment treated as steady state.
    pub steady_fraction: f64,
}

impl Default for SummaryConfig {
    fn default() -> Self {
        Self {
            settle_band: 1.0,
            steady_fraction: 0.2,
        }
    }
}

/// 1-based index of the first sample after which every sample is within
/// `±band`; `None` when the last sample is outside. `None` entries are
/// out of band.
pub fn settling_index(errors: &[Option<f64>], band: f64) -> Option<usize> {
    let inside = |e: &Option<f64>| e.is_some_and(|e| e.abs() <= band);
    match errors.iter().rposition(|e| !inside(e)) {
        None if errors.is_empty() => None,
        None => Some(1),
        Some(i) if i + 1 < errors.len() => Some(i + 2),
        Some(_) => None,
    }
}

/// Largest excursion past zero opposite to the first error's sign.
pub fn overshoot(errors: &[f64]) -> f64 {
    let Some(&first) = errors.first() else {
        return 0.0;
    };
    let s = first.signum();
    if first == 0.0 {
        return 0.0;
    }
    errors.iter().map(|e| -s * e).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderSummary {
    pub cylinder: usize,
    /// Controlled cycles of this cylinder in the segment.
    pub cycles: usize,
    /// 1-based, counted from the first controlled cycle of the segment.
    pub settling_cycle: Option<usize>,
    pub steady_min: f64,
    pub steady_max: f64,
    pub overshoot: f64,
    pub misfires: usize,
}

impl CylinderSummary {
    /// Half-width of the smallest symmetric band containing the interval.
    pub fn steady_half_width(&self) -> f64 {
        self.steady_min.abs().max(self.steady_max.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSummary {
    pub segment: usize,
    pub ca50_ref: f64,
    pub cylinders: Vec<CylinderSummary>,
}

impl SegmentSummary {
    pub fn worst_half_width(&self) -> f64 {
        self.cylinders
            .iter()
            .map(|c| c.steady_half_width())
            .fold(0.0, f64::max)
    }

    /// Latest settling cycle over cylinders; `None` if any cylinder never
    /// settles.
    pub fn worst_settling(&self) -> Option<usize> {
        self.cylinders
            .iter()
            .map(|c| c.settling_cycle)
            .try_fold(0, |acc, s| s.map(|s| acc.max(s)))
    }
}

pub fn summarize(records: &[CycleRecord], cfg: &SummaryConfig) -> Result<Vec<SegmentSummary>> {
    if records.is_empty() {
        return Err(Error::Dataset("empty record stream".into()));
    }
    let mut segments: Vec<usize> = records.iter().map(|r| r.segment).collect();
    segments.sort_unstable();
    segments.dedup();
    let mut cylinders: Vec<usize> = records.iter().map(|r| r.cylinder).collect();
    cylinders.sort_unstable();
    cylinders.dedup();

    let mut out = Vec::new();
    for &seg in &segments {
        let mut cyl_summaries = Vec::new();
        let mut reference = f64::NAN;
        for &cyl in &cylinders {
            let rows: Vec<&CycleRecord> = records
                .iter()
                .filter(|r| {
                    r.segment == seg && r.cylinder == cyl && r.cycle >= FIRST_CONTROLLED_CYCLE
                })
                .collect();
            if rows.is_empty() {
                continue;
            }
            reference = rows[0].ca50_ref;
            let errors: Vec<Option<f64>> = rows.iter().map(|r| r.error()).collect();
            let n_tail =
                ((rows.len() as f64 * cfg.steady_fraction).ceil() as usize).clamp(1, rows.len());
            let tail: Vec<f64> = errors[rows.len() - n_tail..]
                .iter()
                .flatten()
                .copied()
                .collect();
            let tail_misfire = tail.len() < n_tail;
            let (lo, hi) = if tail_misfire || tail.is_empty() {
                (f64::NEG_INFINITY, f64::INFINITY)
            } else {
                tail.iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| {
                        (lo.min(e), hi.max(e))
                    })
            };
            let fired: Vec<f64> = errors.iter().flatten().copied().collect();
            cyl_summaries.push(CylinderSummary {
                cylinder: cyl,
                cycles: rows.len(),
                settling_cycle: settling_index(&errors, cfg.settle_band),
                steady_min: lo,
                steady_max: hi,
                overshoot: overshoot(&fired),
                misfires: rows.iter().filter(|r| r.misfire).count(),
            });
        }
        out.push(SegmentSummary {
            segment: seg,
            ca50_ref: reference,
            cylinders: cyl_summaries,
        });
    }
    Ok(out)
}

/// Human-readable rendering of [`summarize`] output.
pub fn to_table(segments: &[SegmentSummary], cfg: &SummaryConfig) -> String {
    let mut s = String::new();
    for seg in segments {
        writeln!(
            s,
            "segment {} (CA50 ref {} CAD aTDC)",
            seg.segment + 1,
            seg.ca50_ref
        )
        .unwrap();
        writeln!(
            s,
            "  {:>4} {:>7} {:>12} {:>10} {:>10} {:>10} {:>9}",
            "cyl",
            "cycles",
            format!("settle±{}", cfg.settle_band),
            "steady min",
            "steady max",
            "overshoot",
            "misfires"
        )
        .unwrap();
        for c in &seg.cylinders {
            let settle = c.settling_cycle.map_or("-".into(), |v| v.to_string());
            writeln!(
                s,
                "  {:>4} {:>7} {:>12} {:>10.4} {:>10.4} {:>10.4} {:>9}",
                c.cylinder, c.cycles, settle, c.steady_min, c.steady_max, c.overshoot, c.misfires
            )
            .unwrap();
        }
        writeln!(
            s,
            "  worst steady half-width {:.4} CAD",
            seg.worst_half_width()
        )
        .unwrap();
    }
    s
}
