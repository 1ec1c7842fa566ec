//! Harness behind the `phasing` binary: run manifests, summaries, studies
//! and artifact output.

// `!(x > 0.0)` guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod manifest;
pub mod output;
pub mod studies;
pub mod summary;

use std::fs;
use std::path::{Path, PathBuf};

use phasing_core::engine::{run_case, RunOutput};
use phasing_core::{Error, Result};

use manifest::{HarnessConfig, RunManifest};
use summary::{summarize, SegmentSummary};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PLANT_ABORT: i32 = 3;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::PlantAbort(_) => EXIT_PLANT_ABORT,
        Error::Config(_)
        | Error::CoefficientFile(_)
        | Error::Dataset(_)
        | Error::CoefficientDomain(_) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

/// Simulates the manifest without touching the filesystem.
pub fn simulate(m: &RunManifest) -> Result<(RunOutput, Vec<SegmentSummary>)> {
    let plant = m.config.plant()?;
    let mut controller = m.config.controller(m.controller)?;
    let out = run_case(&m.preset, &plant, controller.as_mut(), m.duration, m.seed)?;
    let summary = summarize(&out.records, &m.config.summary)?;
    Ok((out, summary))
}

/// `run`: simulate, then write all artifacts. Nothing is written when the
/// simulation fails.
pub fn run(m: &RunManifest) -> Result<Vec<PathBuf>> {
    let (out, summary) = simulate(m)?;
    output::write_run(&m.out, &out, &summary, &m.config.summary)
}

fn attribution(seed: u64, what: &str, checksum: &str) -> String {
    format!("# seed = {seed}\n# preset = {what}\n# coefficients_sha256 = {checksum}\n")
}

/// `calibrate`: fit on the configured or synthetic dataset, write the fitted
/// coefficient file, the dataset and the validation report.
pub fn calibrate(cfg: &HarnessConfig, seed: Option<u64>, out: &Path) -> Result<Vec<PathBuf>> {
    let samples = studies::dataset(cfg, seed)?;
    let outcome = studies::run_calibration(cfg, &samples)?;
    let seed = seed.unwrap_or(cfg.calibration.synthetic.seed);
    let head = attribution(seed, "calibration", &outcome.coefficients.checksum());
    fs::create_dir_all(out)?;
    let mut written = Vec::new();

    let path = out.join("dataset.csv");
    let mut buf = head.clone().into_bytes();
    phasing_core::calibration::dataset::write_csv(&samples, &mut buf)?;
    fs::write(&path, buf)?;
    written.push(path);

    let path = out.join("coefficients.txt");
    fs::write(&path, format!("{head}{}", outcome.coefficients.to_text()))?;
    written.push(path);

    let path = out.join("validation.txt");
    let mut text = format!(
        "{head}train {} / validate {}\nCA50 fit RMSE {:.4} CAD\n",
        outcome.train_samples, outcome.validation_samples, outcome.combustion.ca50_rmse
    );
    for f in &outcome.intake {
        text.push_str(&format!(
            "cyl {} T_IVC RMSE {:.4} K, P_IVC RMSE {:.5} bar\n",
            f.cylinder, f.t_ivc_rmse, f.p_ivc_rmse
        ));
    }
    text.push_str(&outcome.report.to_table());
    fs::write(&path, text)?;
    written.push(path);

    let path = out.join("validation.json");
    fs::write(
        &path,
        output::json_text(&serde_json::json!({
            "seed": seed,
            "preset": "calibration",
            "coefficients_sha256": outcome.coefficients.checksum(),
            "train_samples": outcome.train_samples,
            "validation_samples": outcome.validation_samples,
            "ca50_rmse": outcome.combustion.ca50_rmse,
            "report": outcome.report,
            "intake": outcome.intake.iter().map(|f| serde_json::json!({
                "cylinder": f.cylinder,
                "t_ivc_rmse": f.t_ivc_rmse,
                "p_ivc_rmse": f.p_ivc_rmse,
            })).collect::<Vec<_>>(),
        })),
    )?;
    written.push(path);
    Ok(written)
}

/// `noise-study`: the with/without-noise table plus both record streams.
pub fn noise_study(cfg: &HarnessConfig, seed: u64, out: &Path) -> Result<Vec<PathBuf>> {
    let (study, clean, noisy) = studies::noise_study(cfg, seed)?;
    let head = attribution(seed, &study.preset, &clean.coefficients_sha256);
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    for (name, run) in [("records_clean.csv", &clean), ("records_noisy.csv", &noisy)] {
        let path = out.join(name);
        phasing_core::engine::records::write_records(run, fs::File::create(&path)?)?;
        written.push(path);
    }
    let path = out.join("noise_study.txt");
    fs::write(&path, format!("{head}{}", study.to_table()))?;
    written.push(path);
    let path = out.join("noise_study.json");
    fs::write(
        &path,
        output::json_text(&serde_json::json!({
            "seed": seed,
            "preset": study.preset,
            "coefficients_sha256": clean.coefficients_sha256,
            "study": study,
        })),
    )?;
    written.push(path);
    Ok(written)
}

/// `sensitivity`: the input-error table on the calibration dataset.
pub fn sensitivity(cfg: &HarnessConfig, seed: Option<u64>, out: &Path) -> Result<Vec<PathBuf>> {
    let (table, fitted) = studies::sensitivity(cfg, seed)?;
    let seed = seed.unwrap_or(cfg.calibration.synthetic.seed);
    let head = attribution(seed, "sensitivity", &fitted.checksum());
    fs::create_dir_all(out)?;
    let path_txt = out.join("sensitivity.txt");
    fs::write(&path_txt, format!("{head}{}", table.to_table()))?;
    let path_json = out.join("sensitivity.json");
    fs::write(
        &path_json,
        output::json_text(&serde_json::json!({
            "seed": seed,
            "preset": "sensitivity",
            "coefficients_sha256": fitted.checksum(),
            "max_std_shift": table.max_std_shift(),
            "table": table,
        })),
    )?;
    Ok(vec![path_txt, path_json])
}

/// `oracle-check`: knock integral against the closed-form SOC on the grid.
pub fn oracle_check(
    cfg: &HarnessConfig,
    out: &Path,
) -> Result<(studies::OracleReport, Vec<PathBuf>)> {
    let report = studies::oracle_check(&cfg.plant.coefficients, &cfg.plant.geometry)?;
    let head = attribution(0, "oracle-check", &cfg.plant.coefficients.checksum());
    fs::create_dir_all(out)?;
    let path = out.join("oracle_check.txt");
    fs::write(&path, format!("{head}{}", report.to_text()))?;
    Ok((report, vec![path]))
}
