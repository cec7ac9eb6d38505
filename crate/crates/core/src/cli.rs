//! `ionlink <command> --config <path> --out <dir> [--seed N]`
//!
//! Exit status: 0 on success, 1 on a runtime failure, 2 on a usage or
//! configuration error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Serialize;

use crate::bell::ChshSettings;
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::runsim::{self, ExperimentConfig, Link};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Bell,
    TomoIonphoton,
    TomoIonion,
    Calibrate,
    Predict,
}

#[derive(Debug, Parser)]
#[command(name = "ionlink", version, about = "Heralded remote-ion entanglement simulator")]
pub struct Manifest {
    #[arg(value_enum)]
    pub command: Command,
    /// Experiment configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run bootstrap resamples on one thread.
    #[arg(long)]
    pub sequential: bool,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let manifest = match Manifest::try_parse_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let cfg = match load_config(&manifest) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("ionlink: configuration error: {e}");
            return EXIT_USAGE;
        }
    };
    match run(&manifest, &cfg) {
        Ok(()) => EXIT_OK,
        Err(e @ (Error::Config(_) | Error::OutOfRange { .. })) => {
            eprintln!("ionlink: configuration error: {e}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("ionlink: {e}");
            EXIT_RUNTIME
        }
    }
}

fn load_config(m: &Manifest) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&m.config)?;
    if let Some(seed) = m.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

pub fn run(m: &Manifest, cfg: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(&m.out)?;
    let exec = if m.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match m.command {
        Command::Bell => cmd_bell(cfg, &m.out),
        Command::TomoIonphoton => cmd_tomo(cfg, Link::IonPhoton, &m.out, exec),
        Command::TomoIonion => cmd_tomo(cfg, Link::IonIon, &m.out, exec),
        Command::Calibrate => cmd_calibrate(cfg, &m.out),
        Command::Predict => cmd_predict(cfg, &m.out),
    }
}

/// Six significant digits, printed in the shortest form that re-parses to
/// the rounded value.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float");
    format!("{rounded}")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_events(path: &Path, log: &runsim::EventLog) -> Result<()> {
    let mut f = fs::File::create(path)?;
    log.write_csv(&mut f)?;
    f.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct BellReport<'a> {
    chsh: &'a crate::bell::ChshResult,
    predicted_s: f64,
    rates: runsim::RateReport,
}

/// `correlations.csv`, `chsh.json`, `events.csv`.
pub fn cmd_bell(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let settings = ChshSettings::reference();
    let (log, result) = runsim::run_bell_experiment(cfg, settings)?;
    let rows: Vec<Vec<String>> = settings
        .pairs()
        .iter()
        .zip(&result.correlations)
        .map(|((a, b), e)| {
            vec![
                sig6(a.theta()),
                sig6(b.theta()),
                sig6(e.value),
                sig6(e.std_error),
                e.n_events.to_string(),
            ]
        })
        .collect();
    write_table(&out.join("correlations.csv"), &["theta_a", "theta_b", "E", "error", "n_events"], &rows)?;
    let predicted_s = runsim::predict(cfg)?.s_ii;
    write_json(
        &out.join("chsh.json"),
        &BellReport {
            chsh: &result,
            predicted_s,
            rates: runsim::rate_report(&log)?,
        },
    )?;
    write_events(&out.join("events.csv"), &log)?;
    println!(
        "S = {:.3} ± {:.3} from {} events (predicted {:.3})",
        result.s_value,
        result.std_error,
        log.records.len(),
        predicted_s
    );
    Ok(())
}

fn basis_labels(link: Link) -> [&'static str; 4] {
    match link {
        Link::IonIon => ["up,up", "up,down", "down,up", "down,down"],
        Link::IonPhoton => ["up,H", "up,V", "down,H", "down,V"],
    }
}

/// `counts.csv`, `reconstruction.json`, `matrix_plot.csv`, `events.csv`.
pub fn cmd_tomo(cfg: &ExperimentConfig, link: Link, out: &Path, exec: Execution) -> Result<()> {
    let run = runsim::run_tomography_experiment(cfg, link, cfg.target_events, exec)?;
    if run.counts.total_events() == 0 {
        return Err(Error::EmptyCounts);
    }
    let mut f = fs::File::create(out.join("counts.csv"))?;
    run.counts.write_csv(&mut f)?;
    f.flush()?;
    let mut json = run.result.to_json()?;
    json.push('\n');
    fs::write(out.join("reconstruction.json"), json)?;

    let labels = basis_labels(link);
    let m = run.result.rho.matrix();
    let mut rows = Vec::with_capacity(16);
    for i in 0..4 {
        for j in 0..4 {
            rows.push(vec![
                i.to_string(),
                j.to_string(),
                labels[i].to_string(),
                labels[j].to_string(),
                sig6(m[(i, j)].re),
                sig6(m[(i, j)].im),
            ]);
        }
    }
    write_table(&out.join("matrix_plot.csv"), &["row", "col", "ket", "bra", "re", "im"], &rows)?;
    write_events(&out.join("events.csv"), &run.log)?;

    let ms = run.result.measures;
    match run.result.errors {
        Some(e) => println!(
            "F = {:.3} ± {:.3}, C = {:.3} ± {:.3}, E_F = {:.3} ± {:.3} from {} events",
            ms.fidelity,
            e.fidelity,
            ms.concurrence,
            e.concurrence,
            ms.eof,
            e.eof,
            run.counts.total_events()
        ),
        None => println!(
            "F = {:.3}, C = {:.3}, E_F = {:.3} from {} events",
            ms.fidelity,
            ms.concurrence,
            ms.eof,
            run.counts.total_events()
        ),
    }
    Ok(())
}

#[derive(Serialize)]
struct CalibrationReport {
    mode_overlap: f64,
    collection_detection_prob: f64,
    fiber_collection_prob: f64,
    herald_probability: f64,
    target_herald_probability: f64,
    mean_interval_s: f64,
    schedule_interval_s: f64,
    ion_photon_rate_hz: f64,
    f_ii: f64,
}

/// `calibrated_config.json` plus `calibration.json`.
pub fn cmd_calibrate(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let cal = runsim::calibrate(cfg)?;
    let p = runsim::predict(&cal)?;
    let report = CalibrationReport {
        mode_overlap: cal.interferometer.mode_overlap(),
        collection_detection_prob: cal.collection_detection_prob,
        fiber_collection_prob: cal.arrival_probability(),
        herald_probability: p.herald_probability,
        target_herald_probability: 1.0 / (cfg.calibration.target_interval_s * cfg.excitation_rate_hz),
        mean_interval_s: p.mean_interval_s,
        schedule_interval_s: 1.0 / (p.herald_probability * cal.schedule_rate_hz()),
        ion_photon_rate_hz: cal.collection_detection_prob * cal.excitation_rate_hz,
        f_ii: p.f_ii,
    };
    let mut text = cal.to_json()?;
    text.push('\n');
    fs::write(out.join("calibrated_config.json"), text)?;
    write_json(&out.join("calibration.json"), &report)?;
    println!(
        "mode_overlap = {:.4}, collection_detection_prob = {:.4e}",
        report.mode_overlap, report.collection_detection_prob
    );
    Ok(())
}

/// `prediction.json` and `noise_budget.csv`.
pub fn cmd_predict(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let p = runsim::predict(cfg)?;
    write_json(&out.join("prediction.json"), &p)?;
    let rows: Vec<Vec<String>> = runsim::noise_budget(cfg)?
        .into_iter()
        .map(|r| vec![r.source, sig6(r.f_ip), sig6(r.s_ip), sig6(r.f_ii), sig6(r.s_ii)])
        .collect();
    write_table(&out.join("noise_budget.csv"), &["source", "f_ip", "s_ip", "f_ii", "s_ii"], &rows)?;
    println!("F_ip = {:.3}, S_ip = {:.3}, F_ii = {:.3}, S_ii = {:.3}", p.f_ip, p.s_ip, p.f_ii, p.s_ii);
    Ok(())
}
