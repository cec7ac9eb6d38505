//! Monte Carlo experiment driver: the attempt loop, heralding, analysis
//! rotations, readout and the event log, plus the analytic predictions
//! and calibrations that share its noise model.
//!
//! Per herald the noise enters in physical order: leakage of each source,
//! interferometer conditioning, ion dephasing during the wait, the analysis
//! rotation, then readout confusion.

use std::f64::consts::PI;
use std::io;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::bell::{self, ChshResult, ChshSettings};
use crate::error::{check_probability, Error, Result};
use crate::herald::{self, InterferometerModel, JointSourceState};
use crate::measure::{self, DetectionModel, Outcome, OutcomeCounts, OutcomeProbs, RotationSetting};
use crate::par::{self, Execution};
use crate::states::{self, DensityMatrix, QubitChannel};
use crate::tomo::{self, CountsTable, MleOptions, Readout, ReconstructionResult, Target, TomographySetting};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseBudget {
    /// Phase-flip probability per ion between herald and analysis.
    pub p_dephase: f64,
    /// Probability per source that the ion-photon pair is replaced by a
    /// fully mixed state (decay to the clock state, stray polarization).
    pub p_leak: f64,
    /// Photon polarization is rotated by `±polarization_error_rad`.
    pub polarization_error_rad: f64,
    #[serde(default = "default_polarization_axis")]
    pub polarization_axis: [f64; 3],
}

/// Residual retardance between H and V: a rotation about the Bloch z axis.
fn default_polarization_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

impl NoiseBudget {
    pub fn none() -> Self {
        Self {
            p_dephase: 0.0,
            p_leak: 0.0,
            polarization_error_rad: 0.0,
            polarization_axis: default_polarization_axis(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisOptions {
    /// Fit tomography data with readout confusion in the forward model.
    pub deconvolve_detection: bool,
    /// Draw the analysis setting uniformly per herald instead of cycling.
    pub randomize_settings: bool,
    pub bootstrap_resamples: usize,
    pub mle_restarts: usize,
    pub mle_max_iter: usize,
    pub mle_tol: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        let mle = MleOptions::default();
        Self {
            deconvolve_detection: false,
            randomize_settings: false,
            bootstrap_resamples: 200,
            mle_restarts: mle.restarts,
            mle_max_iter: mle.max_iter,
            mle_tol: mle.tol,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationTargets {
    pub target_interval_s: f64,
    pub target_ionion_fidelity: f64,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        Self {
            target_interval_s: 39.0,
            target_ionion_fidelity: 0.813,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Authoritative attempt rate for rate predictions.
    pub excitation_rate_hz: f64,
    pub cycle_us: f64,
    pub cycles_per_cooling: u64,
    pub cooling_us: f64,
    /// Per ion and attempt: photon collected into the fiber and detected.
    pub collection_detection_prob: f64,
    pub interferometer: InterferometerModel,
    pub noise: NoiseBudget,
    pub detection: DetectionModel,
    pub target_events: u64,
    pub seed: u64,
    #[serde(default)]
    pub analysis: AnalysisOptions,
    #[serde(default)]
    pub calibration: CalibrationTargets,
}

impl ExperimentConfig {
    /// Paper-scale budget before calibration: 97% contrast, a collection
    /// probability near the one that gives 39 s between heralds.
    pub fn reference() -> Self {
        Self {
            excitation_rate_hz: 0.52e6,
            cycle_us: 1.4,
            cycles_per_cooling: 107,
            cooling_us: 40.0,
            collection_detection_prob: 4.4e-4,
            interferometer: InterferometerModel::new(0.97, 0.15, 3.0, 50.0).expect("valid preset"),
            noise: NoiseBudget {
                p_dephase: 0.02,
                p_leak: 0.04 / 3.0,
                // cos ε = 0.98: a 1% loss of ion-photon fidelity
                polarization_error_rad: 0.98f64.acos(),
                polarization_axis: default_polarization_axis(),
            },
            detection: DetectionModel::new(0.98).expect("valid preset"),
            target_events: 2276,
            seed: 1,
            analysis: AnalysisOptions::default(),
            calibration: CalibrationTargets::default(),
        }
    }

    /// Noise-free apparatus with the reference timing and unit photon efficiency.
    pub fn ideal() -> Self {
        Self {
            collection_detection_prob: 0.01,
            interferometer: InterferometerModel::ideal(),
            noise: NoiseBudget::none(),
            detection: DetectionModel::ideal(),
            target_events: 10_000,
            ..Self::reference()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("excitation_rate_hz", self.excitation_rate_hz),
            ("cycle_us", self.cycle_us),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.cooling_us >= 0.0 && self.cooling_us.is_finite()) {
            return Err(Error::Config(format!("cooling_us must be nonnegative, got {}", self.cooling_us)));
        }
        if self.cycles_per_cooling == 0 {
            return Err(Error::Config("cycles_per_cooling must be positive".into()));
        }
        check_probability("collection_detection_prob", self.collection_detection_prob)?;
        if self.collection_detection_prob > self.interferometer.pmt_efficiency() {
            return Err(Error::Config(format!(
                "collection_detection_prob {} exceeds pmt_efficiency {}",
                self.collection_detection_prob,
                self.interferometer.pmt_efficiency()
            )));
        }
        check_probability("noise.p_dephase", self.noise.p_dephase)?;
        check_probability("noise.p_leak", self.noise.p_leak)?;
        if !self.noise.polarization_error_rad.is_finite() {
            return Err(Error::Config("noise.polarization_error_rad must be finite".into()));
        }
        if self.noise.polarization_axis.iter().map(|x| x * x).sum::<f64>() == 0.0 {
            return Err(Error::Config("noise.polarization_axis has zero length".into()));
        }
        if self.analysis.mle_restarts == 0 || self.analysis.mle_max_iter == 0 || !(self.analysis.mle_tol > 0.0) {
            return Err(Error::Config("mle settings must be positive".into()));
        }
        if !(self.calibration.target_interval_s > 0.0) {
            return Err(Error::Config("calibration.target_interval_s must be positive".into()));
        }
        check_probability("calibration.target_ionion_fidelity", self.calibration.target_ionion_fidelity)?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Probability that a photon reaches the beamsplitter, before the PMT.
    pub fn arrival_probability(&self) -> f64 {
        let eta = self.interferometer.pmt_efficiency();
        if eta > 0.0 {
            (self.collection_detection_prob / eta).min(1.0)
        } else {
            0.0
        }
    }

    /// Wall time after `attempts` attempts, cooling blocks included.
    pub fn wall_time_s(&self, attempts: u64) -> f64 {
        let cooling_blocks = attempts / self.cycles_per_cooling;
        (attempts as f64 * self.cycle_us + cooling_blocks as f64 * self.cooling_us) * 1e-6
    }

    /// Attempt rate implied by the cycle schedule.
    pub fn schedule_rate_hz(&self) -> f64 {
        let block = self.cycles_per_cooling as f64 * self.cycle_us + self.cooling_us;
        self.cycles_per_cooling as f64 / (block * 1e-6)
    }

    pub fn mle_options(&self, target: Target) -> MleOptions {
        MleOptions {
            include_confusion: self.analysis.deconvolve_detection,
            restarts: self.analysis.mle_restarts,
            max_iter: self.analysis.mle_max_iter,
            tol: self.analysis.mle_tol,
            seed: self.seed,
            target,
        }
    }
}

/// One ion-photon pair on (ion, photon) after leakage and polarization error.
pub fn source_state(cfg: &ExperimentConfig) -> Result<DensityMatrix> {
    let ideal = states::ion_photon_state().to_density();
    let leaked = ideal.mix(&DensityMatrix::maximally_mixed(2), cfg.noise.p_leak)?;
    if cfg.noise.polarization_error_rad == 0.0 {
        return Ok(leaked);
    }
    let jitter = QubitChannel::rotation_jitter(cfg.noise.polarization_axis, cfg.noise.polarization_error_rad)?;
    states::apply_channel(&leaked, &jitter, 1)
}

fn dephase(rho: &DensityMatrix, p: f64, ions: &[usize]) -> Result<DensityMatrix> {
    if p == 0.0 {
        return Ok(rho.clone());
    }
    let ch = QubitChannel::dephasing(p)?;
    ions.iter().try_fold(rho.clone(), |r, &q| states::apply_channel(&r, &ch, q))
}

/// Readout confusion seen as a state map: symmetric bit flips in every
/// measured basis shrink the Bloch vector by `2p − 1`.
pub fn apparent_state(rho: &DensityMatrix, readout: Readout) -> Result<DensityMatrix> {
    let mut out = rho.clone();
    for (q, det) in [(0, readout.a), (1, readout.b)] {
        if det.p_correct() < 1.0 {
            out = states::apply_channel(&out, &QubitChannel::depolarizing(det.contrast())?, q)?;
        }
    }
    Ok(out)
}

/// Which entangled pair a run produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    IonPhoton,
    IonIon,
}

impl Link {
    pub fn target(self) -> Target {
        match self {
            Link::IonPhoton => Target::IonPhoton,
            Link::IonIon => Target::IonIon,
        }
    }
}

/// Everything the Monte Carlo needs about one herald.
#[derive(Clone, Debug)]
pub struct HeraldModel {
    /// Two-qubit state after a true herald and dephasing, before readout.
    pub truth: DensityMatrix,
    /// State left by a dark-count herald.
    pub background: DensityMatrix,
    pub herald_probability: f64,
    pub false_fraction: f64,
    pub readout: Readout,
}

impl HeraldModel {
    /// Ensemble state over true and false heralds, before readout.
    pub fn expected_state(&self) -> Result<DensityMatrix> {
        self.truth.mix(&self.background, self.false_fraction)
    }

    /// What a reconstruction without readout deconvolution converges to.
    pub fn apparent_state(&self) -> Result<DensityMatrix> {
        apparent_state(&self.expected_state()?, self.readout)
    }
}

pub fn herald_model(cfg: &ExperimentConfig, link: Link) -> Result<HeraldModel> {
    let src = source_state(cfg)?;
    match link {
        Link::IonIon => {
            let joint = JointSourceState::from_sources(&src, &src)?;
            let arrival = cfg.arrival_probability();
            let full = herald::herald_with_arrival(&joint, &cfg.interferometer, arrival)?;
            let dark_free = cfg.interferometer.with_dark_rate(0.0)?;
            let truth = match herald::herald_with_arrival(&joint, &dark_free, arrival) {
                Ok(r) => r.conditioned_state,
                // only dark counts can herald
                Err(Error::NoHeraldSupport(_)) => joint.ion_background()?,
                Err(e) => return Err(e),
            };
            Ok(HeraldModel {
                truth: dephase(&truth, cfg.noise.p_dephase, &[0, 1])?,
                background: dephase(&joint.ion_background()?, cfg.noise.p_dephase, &[0, 1])?,
                herald_probability: full.success_probability,
                false_fraction: full.false_herald_fraction,
                readout: Readout::both(cfg.detection),
            })
        }
        Link::IonPhoton => {
            let q = cfg.collection_detection_prob;
            let d = cfg.interferometer.dark_click_probability();
            let p_false = (1.0 - q) * d;
            let total = q + p_false;
            if total < herald::MIN_HERALD_PROBABILITY {
                return Err(Error::NoHeraldSupport(total));
            }
            let ion = src.reduce(&[0])?;
            Ok(HeraldModel {
                truth: dephase(&src, cfg.noise.p_dephase, &[0])?,
                background: dephase(&ion, cfg.noise.p_dephase, &[0])?.tensor(&DensityMatrix::maximally_mixed(1)),
                herald_probability: total,
                false_fraction: p_false / total,
                // polarization analysis is ideal apart from the polarization error
                readout: Readout {
                    a: cfg.detection,
                    b: DetectionModel::ideal(),
                },
            })
        }
    }
}

/// CHSH settings for the ion-photon pair: the photon's analysis phase is
/// `3π/2` because the ion's x axis correlates with the photon's y axis.
pub fn ion_photon_chsh_settings() -> ChshSettings {
    ChshSettings::reference()
        .with_phase_b(3.0 * PI / 2.0)
        .expect("finite phase")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub f_ip: f64,
    pub s_ip: f64,
    pub f_ii: f64,
    pub c_ii: f64,
    pub s_ii: f64,
    /// Largest ion-ion S over all projective settings.
    pub s_ii_optimal: f64,
    /// Ion-ion fidelity for ideal interference of two reconstructed-style
    /// (readout-blurred) ion-photon states.
    pub f_ii_ideal_interference: f64,
    pub herald_probability: f64,
    pub false_herald_fraction: f64,
    pub mean_interval_s: f64,
}

/// Analytic expectations for a configuration. Fidelities are those of the
/// readout-blurred states unless `deconvolve_detection` is set; S values
/// always include readout.
pub fn predict(cfg: &ExperimentConfig) -> Result<Prediction> {
    let ip = herald_model(cfg, Link::IonPhoton)?;
    let ii = herald_model(cfg, Link::IonIon)?;
    let (ip_seen, ii_seen) = if cfg.analysis.deconvolve_detection {
        (ip.expected_state()?, ii.expected_state()?)
    } else {
        (ip.apparent_state()?, ii.apparent_state()?)
    };
    let ii_expected = ii.expected_state()?;
    let ip_expected = ip.expected_state()?;
    let from_ip = herald::predict_ionion_from_ionphoton(&ip_seen, &ip_seen)?;
    Ok(Prediction {
        f_ip: states::fidelity_with_pure(&ip_seen, &states::ion_photon_state())?,
        s_ip: bell::chsh_predicted_with(&ip_expected, &ion_photon_chsh_settings(), ip.readout.a, ip.readout.b)?,
        f_ii: states::fidelity_with_pure(&ii_seen, &states::ion_ion_singlet())?,
        c_ii: states::concurrence(&ii_seen)?,
        s_ii: bell::chsh_predicted(&ii_expected, &ChshSettings::reference(), cfg.detection)?,
        s_ii_optimal: bell::chsh_optimal(&apparent_state(&ii_expected, ii.readout)?)?,
        f_ii_ideal_interference: states::fidelity_with_pure(&from_ip, &states::ion_ion_singlet())?,
        herald_probability: ii.herald_probability,
        false_herald_fraction: ii.false_fraction,
        mean_interval_s: 1.0 / (ii.herald_probability * cfg.excitation_rate_hz),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetRow {
    pub source: String,
    pub f_ip: f64,
    pub s_ip: f64,
    pub f_ii: f64,
    pub s_ii: f64,
}

/// Predictions with every noise source off, then each one alone, then all.
pub fn noise_budget(cfg: &ExperimentConfig) -> Result<Vec<BudgetRow>> {
    let quiet = ExperimentConfig {
        noise: NoiseBudget {
            polarization_axis: cfg.noise.polarization_axis,
            ..NoiseBudget::none()
        },
        detection: DetectionModel::ideal(),
        interferometer: cfg.interferometer.with_mode_overlap(1.0)?.with_dark_rate(0.0)?,
        ..*cfg
    };
    let variants: Vec<(&str, ExperimentConfig)> = vec![
        ("none", quiet),
        (
            "detection",
            ExperimentConfig {
                detection: cfg.detection,
                ..quiet
            },
        ),
        (
            "dephasing",
            ExperimentConfig {
                noise: NoiseBudget {
                    p_dephase: cfg.noise.p_dephase,
                    ..quiet.noise
                },
                ..quiet
            },
        ),
        (
            "polarization",
            ExperimentConfig {
                noise: NoiseBudget {
                    polarization_error_rad: cfg.noise.polarization_error_rad,
                    ..quiet.noise
                },
                ..quiet
            },
        ),
        (
            "leakage",
            ExperimentConfig {
                noise: NoiseBudget {
                    p_leak: cfg.noise.p_leak,
                    ..quiet.noise
                },
                ..quiet
            },
        ),
        (
            "dark_counts",
            ExperimentConfig {
                interferometer: quiet.interferometer.with_dark_rate(cfg.interferometer.dark_rate_hz())?,
                ..quiet
            },
        ),
        (
            "mode_overlap",
            ExperimentConfig {
                interferometer: quiet.interferometer.with_mode_overlap(cfg.interferometer.mode_overlap())?,
                ..quiet
            },
        ),
        ("all", *cfg),
    ];
    variants
        .into_iter()
        .map(|(name, c)| {
            let p = predict(&c)?;
            Ok(BudgetRow {
                source: name.to_string(),
                f_ip: p.f_ip,
                s_ip: p.s_ip,
                f_ii: p.f_ii,
                s_ii: p.s_ii,
            })
        })
        .collect()
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    // f increasing, f(lo) < 0 < f(hi)
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.abs().max(1e-300) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn herald_probability_at(cfg: &ExperimentConfig, q: f64) -> Result<f64> {
    let c = ExperimentConfig {
        collection_detection_prob: q,
        ..*cfg
    };
    let src = source_state(&c)?;
    let joint = JointSourceState::from_sources(&src, &src)?;
    match herald::herald_with_arrival(&joint, &c.interferometer, c.arrival_probability()) {
        Ok(r) => Ok(r.success_probability),
        Err(Error::NoHeraldSupport(p)) => Ok(p),
        Err(e) => Err(e),
    }
}

/// Collection-and-detection probability per ion giving `target_interval_s`
/// between ion-ion heralds at `excitation_rate_hz`.
pub fn calibrate_collection_prob(cfg: &ExperimentConfig, target_interval_s: f64) -> Result<f64> {
    if !(target_interval_s > 0.0) {
        return Err(Error::Config(format!("target interval must be positive, got {target_interval_s}")));
    }
    let target = 1.0 / (target_interval_s * cfg.excitation_rate_hz);
    let q_max = cfg.interferometer.pmt_efficiency();
    if herald_probability_at(cfg, 0.0)? >= target {
        return Ok(0.0);
    }
    if q_max <= 0.0 || herald_probability_at(cfg, q_max)? < target {
        return Err(Error::NoSolution(format!(
            "herald probability {target:.3e} per attempt is out of reach"
        )));
    }
    bisect(0.0, q_max, |q| Ok(herald_probability_at(cfg, q)? - target))
}

/// Mode overlap at which the readout-blurred (or, with deconvolution, the
/// pre-readout) ion-ion fidelity equals `target_fidelity`.
pub fn fit_mode_overlap(cfg: &ExperimentConfig, target_fidelity: f64) -> Result<f64> {
    let fid = |mu: f64| -> Result<f64> {
        let c = ExperimentConfig {
            interferometer: cfg.interferometer.with_mode_overlap(mu)?,
            ..*cfg
        };
        Ok(predict(&c)?.f_ii - target_fidelity)
    };
    let (lo, hi) = (fid(0.0)?, fid(1.0)?);
    if lo > 0.0 || hi < 0.0 {
        return Err(Error::NoSolution(format!(
            "ion-ion fidelity {target_fidelity} outside the reachable [{:.4}, {:.4}]",
            lo + target_fidelity,
            hi + target_fidelity
        )));
    }
    bisect(0.0, 1.0, fid)
}

/// Fits the mode overlap to the target fidelity and the collection
/// probability to the target interval (the two barely interact; two passes).
pub fn calibrate(cfg: &ExperimentConfig) -> Result<ExperimentConfig> {
    let mut out = *cfg;
    for _ in 0..2 {
        let mu = fit_mode_overlap(&out, cfg.calibration.target_ionion_fidelity)?;
        out.interferometer = out.interferometer.with_mode_overlap(mu)?;
        out.collection_detection_prob = calibrate_collection_prob(&out, cfg.calibration.target_interval_s)?;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeraldRecord {
    /// Zero-based index of the attempt that heralded.
    pub attempt_index: u64,
    pub wall_time_s: f64,
    pub is_false_herald: bool,
    pub setting_index: usize,
    pub setting_a: RotationSetting,
    pub setting_b: RotationSetting,
    pub outcome_a: Outcome,
    pub outcome_b: Outcome,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogSummary {
    pub n_attempts: u64,
    pub n_heralds: usize,
    pub mean_interval_s: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct EventLog {
    pub records: Vec<HeraldRecord>,
    pub n_attempts: u64,
}

#[derive(Serialize, Deserialize)]
struct RecordRow {
    attempt_index: u64,
    wall_time_s: f64,
    is_false_herald: bool,
    setting_index: usize,
    theta_a: f64,
    phi_a: f64,
    theta_b: f64,
    phi_b: f64,
    outcome_a: char,
    outcome_b: char,
}

fn outcome_char(o: Outcome) -> char {
    match o {
        Outcome::Bright => 'b',
        Outcome::Dark => 'd',
    }
}

fn outcome_from_char(c: char) -> Result<Outcome> {
    match c {
        'b' => Ok(Outcome::Bright),
        'd' => Ok(Outcome::Dark),
        other => Err(Error::Config(format!("unknown outcome {other:?}"))),
    }
}

impl EventLog {
    pub fn summary(&self) -> LogSummary {
        let n = self.records.len();
        let mean_interval_s = match self.records.last() {
            Some(r) => r.wall_time_s / n as f64,
            None => f64::NAN,
        };
        LogSummary {
            n_attempts: self.n_attempts,
            n_heralds: n,
            mean_interval_s,
        }
    }

    /// Gaps between consecutive heralds, the first measured from time zero.
    pub fn intervals_s(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.records
            .iter()
            .map(|r| {
                let d = r.wall_time_s - prev;
                prev = r.wall_time_s;
                d
            })
            .collect()
    }

    /// One row per herald. Floats are written in shortest round-trip form
    /// so the log re-parses exactly.
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.records {
            wr.serialize(RecordRow {
                attempt_index: r.attempt_index,
                wall_time_s: r.wall_time_s,
                is_false_herald: r.is_false_herald,
                setting_index: r.setting_index,
                theta_a: r.setting_a.theta(),
                phi_a: r.setting_a.phi(),
                theta_b: r.setting_b.theta(),
                phi_b: r.setting_b.phi(),
                outcome_a: outcome_char(r.outcome_a),
                outcome_b: outcome_char(r.outcome_b),
            })?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Inverse of [`write_csv`](Self::write_csv). The attempt count is not
    /// part of the rows and is taken from the last herald.
    pub fn read_csv<R: io::Read>(r: R) -> Result<Self> {
        let mut records = Vec::new();
        for row in csv::Reader::from_reader(r).deserialize() {
            let row: RecordRow = row?;
            records.push(HeraldRecord {
                attempt_index: row.attempt_index,
                wall_time_s: row.wall_time_s,
                is_false_herald: row.is_false_herald,
                setting_index: row.setting_index,
                setting_a: RotationSetting::new(row.theta_a, row.phi_a)?,
                setting_b: RotationSetting::new(row.theta_b, row.phi_b)?,
                outcome_a: outcome_from_char(row.outcome_a)?,
                outcome_b: outcome_from_char(row.outcome_b)?,
            });
        }
        let n_attempts = records.last().map_or(0, |r| r.attempt_index + 1);
        Ok(Self { records, n_attempts })
    }
}

/// Herald loop shared by all runs. `settings[k]` is measured with outcome
/// distributions `truth_probs[k]` / `false_probs[k]`.
fn simulate(
    cfg: &ExperimentConfig,
    model: &HeraldModel,
    settings: &[(RotationSetting, RotationSetting)],
    n_events: u64,
    rng: &mut impl Rng,
) -> Result<EventLog> {
    let prob_tables = |rho: &DensityMatrix| -> Result<Vec<OutcomeProbs>> {
        settings
            .iter()
            .map(|&(a, b)| measure::outcome_probabilities_with(rho, a, b, model.readout.a, model.readout.b))
            .collect()
    };
    let truth_probs = prob_tables(&model.truth)?;
    let false_probs = prob_tables(&model.background)?;
    let gaps = Geometric::new(model.herald_probability)
        .map_err(|_| Error::NoHeraldSupport(model.herald_probability))?;

    let mut log = EventLog::default();
    let mut attempts: u64 = 0;
    for k in 0..n_events {
        attempts += gaps.sample(rng) + 1;
        let setting_index = if cfg.analysis.randomize_settings {
            rng.random_range(0..settings.len())
        } else {
            (k % settings.len() as u64) as usize
        };
        let is_false = rng.random::<f64>() < model.false_fraction;
        let probs = if is_false {
            &false_probs[setting_index]
        } else {
            &truth_probs[setting_index]
        };
        let (oa, ob) = measure::split_index(measure::sample_one(probs, rng));
        let (sa, sb) = settings[setting_index];
        log.records.push(HeraldRecord {
            attempt_index: attempts - 1,
            wall_time_s: cfg.wall_time_s(attempts),
            is_false_herald: is_false,
            setting_index,
            setting_a: sa,
            setting_b: sb,
            outcome_a: oa,
            outcome_b: ob,
        });
    }
    log.n_attempts = attempts;
    Ok(log)
}

/// Per-setting outcome counts from a log.
pub fn counts_by_setting(log: &EventLog, n_settings: usize) -> Vec<OutcomeCounts> {
    let mut counts = vec![[0u64; 4]; n_settings];
    for r in &log.records {
        counts[r.setting_index][measure::joint_index(r.outcome_a, r.outcome_b)] += 1;
    }
    counts
}

/// Ion-ion Bell test with `cfg.target_events` heralds.
pub fn run_bell_experiment(cfg: &ExperimentConfig, settings: ChshSettings) -> Result<(EventLog, ChshResult)> {
    cfg.validate()?;
    if cfg.target_events < 4 {
        return Err(Error::Config(format!("a Bell run needs at least 4 events, got {}", cfg.target_events)));
    }
    let model = herald_model(cfg, Link::IonIon)?;
    let mut rng = par::rng_for(cfg.seed, 0);
    let log = simulate(cfg, &model, &settings.pairs(), cfg.target_events, &mut rng)?;
    let counts = counts_by_setting(&log, 4);
    let counts: [OutcomeCounts; 4] = counts.try_into().expect("four settings");
    if counts.iter().any(|c| c.iter().sum::<u64>() == 0) {
        // only possible with randomized settings and very few events
        return Err(Error::EmptyCounts);
    }
    let result = bell::chsh_from_counts(&counts, settings)?;
    Ok((log, result))
}

/// Independent Bell runs with seeds `seeds[i]`, in parallel when enabled.
pub fn run_bell_batch(cfg: &ExperimentConfig, settings: ChshSettings, seeds: &[u64], exec: Execution) -> Result<Vec<ChshResult>> {
    par::map_indexed(seeds.len(), exec, |i| {
        let c = ExperimentConfig { seed: seeds[i], ..*cfg };
        run_bell_experiment(&c, settings).map(|(_, r)| r)
    })
    .into_iter()
    .collect()
}

#[derive(Clone, Debug)]
pub struct TomographyRun {
    pub log: EventLog,
    pub counts: CountsTable,
    pub result: ReconstructionResult,
}

/// Nine-basis tomography of the ion-photon or ion-ion pair from
/// `total_events` heralds, with bootstrap errors if configured.
pub fn run_tomography_experiment(cfg: &ExperimentConfig, link: Link, total_events: u64, exec: Execution) -> Result<TomographyRun> {
    cfg.validate()?;
    let model = herald_model(cfg, link)?;
    let bases = TomographySetting::all();
    let settings: Vec<_> = bases
        .iter()
        .map(|s| (measure::pauli_setting(s.basis_a), measure::pauli_setting(s.basis_b)))
        .collect();
    let mut rng = par::rng_for(cfg.seed, 1);
    let log = simulate(cfg, &model, &settings, total_events, &mut rng)?;
    let mut counts = CountsTable::new();
    for (s, c) in bases.iter().zip(counts_by_setting(&log, bases.len())) {
        if c.iter().sum::<u64>() > 0 {
            counts.add(*s, c);
        }
    }
    let opts = cfg.mle_options(link.target());
    let result = tomo::reconstruct_with_errors(&counts, model.readout, &opts, cfg.analysis.bootstrap_resamples, exec)?;
    Ok(TomographyRun { log, counts, result })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub n_heralds: usize,
    pub n_attempts: u64,
    pub mean_interval_s: f64,
    pub herald_rate_hz: f64,
    pub attempts_per_herald: f64,
    pub false_herald_fraction: f64,
}

pub fn rate_report(log: &EventLog) -> Result<RateReport> {
    let s = log.summary();
    if s.n_heralds == 0 {
        return Err(Error::EmptyLog);
    }
    let n_false = log.records.iter().filter(|r| r.is_false_herald).count();
    Ok(RateReport {
        n_heralds: s.n_heralds,
        n_attempts: s.n_attempts,
        mean_interval_s: s.mean_interval_s,
        herald_rate_hz: 1.0 / s.mean_interval_s,
        attempts_per_herald: s.n_attempts as f64 / s.n_heralds as f64,
        false_herald_fraction: n_false as f64 / s.n_heralds as f64,
    })
}
