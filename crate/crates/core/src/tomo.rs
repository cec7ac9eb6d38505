//! Two-qubit state tomography in the nine Pauli product bases:
//! forward simulation, maximum-likelihood reconstruction and bootstrap errors.

use std::fmt;
use std::io;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bell::std_dev;
use crate::error::{Error, Result};
use crate::measure::{self, DetectionModel, OutcomeCounts, OutcomeProbs};
use crate::par::{self, Execution};
use crate::qmat::{c, ComplexMatrix, C64};
use crate::states::{self, DensityMatrix, Measures, PureState};

const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    X,
    Y,
    Z,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::X, Basis::Y, Basis::Z];
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::X => "x",
            Basis::Y => "y",
            Basis::Z => "z",
        })
    }
}

impl FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(Basis::X),
            "y" => Ok(Basis::Y),
            "z" => Ok(Basis::Z),
            other => Err(Error::Config(format!("unknown basis {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TomographySetting {
    pub basis_a: Basis,
    pub basis_b: Basis,
}

impl TomographySetting {
    pub fn new(basis_a: Basis, basis_b: Basis) -> Self {
        Self { basis_a, basis_b }
    }

    /// All nine settings, `xx, xy, …, zz`.
    pub fn all() -> [TomographySetting; 9] {
        std::array::from_fn(|i| Self::new(Basis::ALL[i / 3], Basis::ALL[i % 3]))
    }
}

/// Readout models for the two qubits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Readout {
    pub a: DetectionModel,
    pub b: DetectionModel,
}

impl Readout {
    pub fn both(det: DetectionModel) -> Self {
        Self { a: det, b: det }
    }

    pub fn ideal() -> Self {
        Self::both(DetectionModel::ideal())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct CountsTable {
    rows: Vec<(TomographySetting, OutcomeCounts)>,
}

#[derive(Serialize, Deserialize)]
struct CountsRow {
    basis_a: Basis,
    basis_b: Basis,
    n_bb: u64,
    n_bd: u64,
    n_db: u64,
    n_dd: u64,
}

impl CountsTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `counts` to the row for `setting`, creating it if absent.
    pub fn add(&mut self, setting: TomographySetting, counts: OutcomeCounts) {
        match self.rows.iter_mut().find(|(s, _)| *s == setting) {
            Some((_, c)) => c.iter_mut().zip(counts).for_each(|(a, b)| *a += b),
            None => self.rows.push((setting, counts)),
        }
    }

    pub fn rows(&self) -> &[(TomographySetting, OutcomeCounts)] {
        &self.rows
    }

    pub fn get(&self, setting: TomographySetting) -> Option<OutcomeCounts> {
        self.rows.iter().find(|(s, _)| *s == setting).map(|(_, c)| *c)
    }

    pub fn total_events(&self) -> u64 {
        self.rows.iter().flat_map(|(_, c)| c.iter()).sum()
    }

    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for (s, c) in &self.rows {
            wr.serialize(CountsRow {
                basis_a: s.basis_a,
                basis_b: s.basis_b,
                n_bb: c[0],
                n_bd: c[1],
                n_db: c[2],
                n_dd: c[3],
            })?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: io::Read>(r: R) -> Result<Self> {
        let mut table = Self::new();
        for row in csv::Reader::from_reader(r).deserialize() {
            let row: CountsRow = row?;
            table.add(
                TomographySetting::new(row.basis_a, row.basis_b),
                [row.n_bb, row.n_bd, row.n_db, row.n_dd],
            );
        }
        Ok(table)
    }
}

/// Multinomial counts in all nine settings.
pub fn simulate_tomography_counts(
    rho_true: &DensityMatrix,
    readout: Readout,
    events_per_setting: u64,
    seed: u64,
) -> Result<CountsTable> {
    let mut rng = par::rng_for(seed, 0);
    let mut table = CountsTable::new();
    if events_per_setting == 0 {
        return Ok(table);
    }
    for s in TomographySetting::all() {
        let p = setting_probabilities(rho_true, s, readout)?;
        table.add(s, measure::sample_outcomes(&p, events_per_setting, &mut rng));
    }
    Ok(table)
}

pub fn setting_probabilities(rho: &DensityMatrix, s: TomographySetting, readout: Readout) -> Result<OutcomeProbs> {
    measure::outcome_probabilities_with(
        rho,
        measure::pauli_setting(s.basis_a),
        measure::pauli_setting(s.basis_b),
        readout.a,
        readout.b,
    )
}

/// Which ideal state the derived measures are scored against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    #[default]
    IonIon,
    IonPhoton,
}

impl Target {
    pub fn state(self) -> PureState {
        match self {
            Target::IonIon => states::ion_ion_singlet(),
            Target::IonPhoton => states::ion_photon_state(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MleOptions {
    /// Fit to confusion-blurred probabilities, so the estimate is the
    /// pre-readout state. Off: readout errors stay in the estimate.
    pub include_confusion: bool,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    pub target: Target,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            include_confusion: true,
            restarts: 5,
            max_iter: 10_000,
            tol: 1e-9,
            seed: 0,
            target: Target::IonIon,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureErrors {
    pub fidelity: f64,
    pub concurrence: f64,
    pub eof: f64,
    pub purity: f64,
    pub n_resamples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionResult {
    pub rho: DensityMatrix,
    pub nll: f64,
    pub iterations: usize,
    pub converged: bool,
    pub measures: Measures,
    pub errors: Option<MeasureErrors>,
}

#[derive(Serialize, Deserialize)]
struct ReconstructionJson {
    rho: Vec<Vec<[f64; 2]>>,
    nll: f64,
    iterations: usize,
    converged: bool,
    measures: Measures,
    errors: Option<MeasureErrors>,
}

impl ReconstructionResult {
    pub fn to_json(&self) -> Result<String> {
        let m = self.rho.matrix();
        let rho = (0..m.rows())
            .map(|i| (0..m.cols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect();
        Ok(serde_json::to_string_pretty(&ReconstructionJson {
            rho,
            nll: self.nll,
            iterations: self.iterations,
            converged: self.converged,
            measures: self.measures,
            errors: self.errors,
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: ReconstructionJson = serde_json::from_str(s)?;
        let n = j.rho.len();
        if j.rho.iter().any(|r| r.len() != n) {
            return Err(Error::NotSquare {
                rows: n,
                cols: j.rho.first().map_or(0, Vec::len),
            });
        }
        let data: Vec<C64> = j.rho.iter().flatten().map(|&[a, b]| c(a, b)).collect();
        Ok(Self {
            rho: DensityMatrix::new(ComplexMatrix::from_vec(n, n, data)?)?,
            nll: j.nll,
            iterations: j.iterations,
            converged: j.converged,
            measures: j.measures,
            errors: j.errors,
        })
    }
}

/// `T†T / tr(T†T)` for a lower-triangular `T`: four real diagonal entries
/// followed by six complex sub-diagonal entries as (re, im) pairs.
pub fn rho_from_params(params: &[f64; 16]) -> DensityMatrix {
    let mut t = ComplexMatrix::zeros(4, 4);
    for i in 0..4 {
        t[(i, i)] = c(params[i], 0.0);
    }
    let mut k = 4;
    for i in 1..4 {
        for j in 0..i {
            t[(i, j)] = c(params[k], params[k + 1]);
            k += 2;
        }
    }
    let m = &t.adjoint() * &t;
    let tr = m.trace().re;
    if tr <= f64::MIN_POSITIVE {
        return DensityMatrix::maximally_mixed(2);
    }
    let mut m = m.scale_re(1.0 / tr).hermitian_part();
    // exact Hermitian symmetry and real diagonal keep the trace at 1 to round-off
    for i in 0..4 {
        m[(i, i)] = c(m[(i, i)].re, 0.0);
    }
    DensityMatrix::from_trusted(m)
}

/// Effects with nonzero data, flattened for the likelihood loop.
struct Problem {
    effects: Vec<ComplexMatrix>,
    freqs: Vec<f64>,
    n_total: f64,
}

impl Problem {
    fn new(counts: &CountsTable, readout: Readout, include_confusion: bool) -> Result<Self> {
        let n_total = counts.total_events();
        if n_total == 0 {
            return Err(Error::EmptyCounts);
        }
        let readout = if include_confusion { readout } else { Readout::ideal() };
        let mut effects = Vec::new();
        let mut freqs = Vec::new();
        for (s, c) in counts.rows() {
            let es = measure::effects(
                measure::pauli_setting(s.basis_a),
                measure::pauli_setting(s.basis_b),
                readout.a,
                readout.b,
            );
            for (e, &n) in es.into_iter().zip(c) {
                if n > 0 {
                    effects.push(e);
                    freqs.push(n as f64 / n_total as f64);
                }
            }
        }
        Ok(Self {
            effects,
            freqs,
            n_total: n_total as f64,
        })
    }

    fn probs(&self, rho: &ComplexMatrix) -> Vec<f64> {
        self.effects.iter().map(|e| trace_product(e, rho).max(PROB_FLOOR)).collect()
    }

    /// Per-event negative log-likelihood for the given model probabilities.
    fn nll_of(&self, probs: &[f64]) -> f64 {
        -self.freqs.iter().zip(probs).map(|(f, p)| f * p.ln()).sum::<f64>()
    }

    fn r_operator(&self, probs: &[f64]) -> ComplexMatrix {
        let mut r = ComplexMatrix::zeros(4, 4);
        for ((e, f), p) in self.effects.iter().zip(&self.freqs).zip(probs) {
            r = &r + &e.scale_re(f / p);
        }
        r
    }
}

fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let n = a.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

struct Fit {
    rho: ComplexMatrix,
    nll: f64,
    iterations: usize,
    converged: bool,
}

/// Diluted `RρR` ascent: `ρ ← (I + εR)ρ(I + εR)/tr`, a step taken only if
/// it lowers the NLL; ε grows after accepted steps and shrinks otherwise.
fn ascend(problem: &Problem, rho0: ComplexMatrix, opts: &MleOptions) -> Fit {
    let id = ComplexMatrix::identity(4);
    let mut rho = rho0;
    let mut probs = problem.probs(&rho);
    let mut nll = problem.nll_of(&probs);
    let mut eps = 1.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let r = problem.r_operator(&probs);
        let step = &id + &r.scale_re(eps);
        let mut cand = rho.conjugate_by(&step);
        let tr = cand.trace().re;
        cand = cand.scale_re(1.0 / tr).hermitian_part();
        let cand_probs = problem.probs(&cand);
        let cand_nll = problem.nll_of(&cand_probs);
        if cand_nll < nll {
            let gain = (nll - cand_nll) / nll.abs().max(f64::MIN_POSITIVE);
            rho = cand;
            probs = cand_probs;
            nll = cand_nll;
            eps = (eps * 2.0).min(1e8);
            if gain < opts.tol {
                converged = true;
                break;
            }
        } else {
            eps *= 0.5;
            if eps < 1e-12 {
                // no ascent direction left at machine precision
                converged = true;
                break;
            }
        }
    }
    Fit {
        rho,
        nll,
        iterations,
        converged,
    }
}

fn initial_state(rng: &mut impl Rng) -> ComplexMatrix {
    let mut p = [0.0; 16];
    for (i, x) in p.iter_mut().enumerate() {
        let base = if i < 4 { 0.5 } else { 0.0 };
        *x = base + 1e-3 * (2.0 * rng.random::<f64>() - 1.0);
    }
    rho_from_params(&p).into_matrix()
}

/// Maximum-likelihood two-qubit state for `counts`; `errors` is left empty.
pub fn mle_reconstruct(counts: &CountsTable, readout: Readout, opts: &MleOptions) -> Result<ReconstructionResult> {
    let problem = Problem::new(counts, readout, opts.include_confusion)?;
    let mut rng = par::rng_for(opts.seed, 1 << 32);
    let mut best: Option<Fit> = None;
    for _ in 0..opts.restarts.max(1) {
        let fit = ascend(&problem, initial_state(&mut rng), opts);
        if best.as_ref().is_none_or(|b| fit.nll < b.nll) {
            best = Some(fit);
        }
    }
    let best = best.expect("at least one restart");
    if !best.nll.is_finite() {
        return Err(Error::NonFiniteLikelihood);
    }
    let rho = DensityMatrix::from_trusted(best.rho);
    let measures = Measures::of(&rho, &opts.target.state())?;
    Ok(ReconstructionResult {
        rho,
        nll: best.nll * problem.n_total,
        iterations: best.iterations,
        converged: best.converged,
        measures,
        errors: None,
    })
}

/// Multinomial resample of every row around its empirical frequencies.
pub fn resample_counts(counts: &CountsTable, rng: &mut impl Rng) -> CountsTable {
    let mut out = CountsTable::new();
    for (s, c) in counts.rows() {
        let n: u64 = c.iter().sum();
        if n == 0 {
            out.add(*s, [0; 4]);
            continue;
        }
        let p = OutcomeProbs(c.map(|k| k as f64 / n as f64));
        out.add(*s, measure::sample_outcomes(&p, n, rng));
    }
    out
}

/// Standard deviation of each derived measure over `n_resamples` bootstrap
/// reconstructions. Resample `i` draws from stream `i` of `seed`.
pub fn bootstrap_measures(
    counts: &CountsTable,
    readout: Readout,
    opts: &MleOptions,
    n_resamples: usize,
    seed: u64,
    exec: Execution,
) -> Result<MeasureErrors> {
    if n_resamples < 2 {
        return Err(Error::Config("bootstrap needs at least two resamples".into()));
    }
    let results = par::map_indexed(n_resamples, exec, |i| {
        let mut rng = par::rng_for(seed, i as u64);
        let resampled = resample_counts(counts, &mut rng);
        mle_reconstruct(&resampled, readout, opts).map(|r| r.measures)
    });
    let ms = results.into_iter().collect::<Result<Vec<_>>>()?;
    let sd = |f: fn(&Measures) -> f64| std_dev(&ms.iter().map(f).collect::<Vec<_>>());
    Ok(MeasureErrors {
        fidelity: sd(|m| m.fidelity),
        concurrence: sd(|m| m.concurrence),
        eof: sd(|m| m.eof),
        purity: sd(|m| m.purity),
        n_resamples,
    })
}

/// Reconstruction followed by bootstrap error bars.
pub fn reconstruct_with_errors(
    counts: &CountsTable,
    readout: Readout,
    opts: &MleOptions,
    n_resamples: usize,
    exec: Execution,
) -> Result<ReconstructionResult> {
    let mut r = mle_reconstruct(counts, readout, opts)?;
    if n_resamples >= 2 {
        r.errors = Some(bootstrap_measures(counts, readout, opts, n_resamples, opts.seed ^ 0xb007, exec)?);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{ion_ion_singlet, rotation, werner_state};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn quick() -> MleOptions {
        MleOptions {
            restarts: 1,
            ..MleOptions::default()
        }
    }

    #[test]
    fn nine_distinct_settings() {
        let all = TomographySetting::all();
        let set: std::collections::HashSet<_> = all.iter().collect();
        assert_eq!(set.len(), 9);
    }

    #[test]
    fn simulation_basics() {
        let singlet = ion_ion_singlet().to_density();
        let t = simulate_tomography_counts(&singlet, Readout::ideal(), 0, 1).unwrap();
        assert_eq!(t.total_events(), 0);
        let t = simulate_tomography_counts(&singlet, Readout::ideal(), 1000, 1).unwrap();
        assert_eq!(t.total_events(), 9000);
        let zz = t.get(TomographySetting::new(Basis::Z, Basis::Z)).unwrap();
        assert_eq!((zz[0], zz[3]), (0, 0));

        let n = 100_000;
        let t = simulate_tomography_counts(&DensityMatrix::maximally_mixed(2), Readout::ideal(), n, 2).unwrap();
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for (_, c) in t.rows() {
            for &k in c {
                assert!((k as f64 - n as f64 / 4.0).abs() < 5.0 * sigma);
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let t = simulate_tomography_counts(&werner_state(0.8).unwrap(), Readout::ideal(), 50, 3).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("basis_a,basis_b,n_bb,n_bd,n_db,n_dd\nx,x,"));
        assert_eq!(CountsTable::read_csv(&buf[..]).unwrap(), t);
    }

    #[test]
    fn round_trip_singlet() {
        let singlet = ion_ion_singlet();
        let t = simulate_tomography_counts(&singlet.to_density(), Readout::ideal(), 100_000, 4).unwrap();
        let r = mle_reconstruct(&t, Readout::ideal(), &quick()).unwrap();
        assert!(r.measures.fidelity >= 0.999, "{}", r.measures.fidelity);
    }

    #[test]
    fn uniform_counts_give_identity() {
        let mut t = CountsTable::new();
        for s in TomographySetting::all() {
            t.add(s, [250; 4]);
        }
        let r = mle_reconstruct(&t, Readout::ideal(), &MleOptions::default()).unwrap();
        assert!(r.rho.trace_distance(&DensityMatrix::maximally_mixed(2)) < 0.01);
        assert!(r.converged);
    }

    #[test]
    fn confusion_in_forward_model_recovers_pre_readout_state() {
        let rho = werner_state(0.9).unwrap();
        let readout = Readout::both(DetectionModel::new(0.98).unwrap());
        let t = simulate_tomography_counts(&rho, readout, 200_000, 5).unwrap();
        let with = mle_reconstruct(&t, readout, &quick()).unwrap();
        let without = mle_reconstruct(
            &t,
            readout,
            &MleOptions {
                include_confusion: false,
                ..quick()
            },
        )
        .unwrap();
        // fidelity of a Werner state: (1 + 3p)/4
        assert!((with.measures.fidelity - 0.925).abs() < 0.005);
        let blurred = (1.0 + 3.0 * 0.9 * 0.96 * 0.96) / 4.0;
        assert!((without.measures.fidelity - blurred).abs() < 0.005);
    }

    #[test]
    fn empty_counts_rejected() {
        let mut t = CountsTable::new();
        t.add(TomographySetting::new(Basis::X, Basis::X), [0; 4]);
        assert!(matches!(mle_reconstruct(&t, Readout::ideal(), &quick()), Err(Error::EmptyCounts)));
    }

    #[test]
    fn ascent_is_monotone() {
        let t = simulate_tomography_counts(&werner_state(0.7).unwrap(), Readout::ideal(), 300, 6).unwrap();
        let problem = Problem::new(&t, Readout::ideal(), true).unwrap();
        let mut rng = par::rng_for(0, 0);
        let mut rho = initial_state(&mut rng);
        let mut prev = problem.nll_of(&problem.probs(&rho));
        for _ in 0..50 {
            let fit = ascend(
                &problem,
                rho.clone(),
                &MleOptions {
                    max_iter: 3,
                    ..quick()
                },
            );
            assert!(fit.nll <= prev);
            prev = fit.nll;
            rho = fit.rho;
        }
    }

    #[test]
    fn json_round_trip() {
        let t = simulate_tomography_counts(&werner_state(0.6).unwrap(), Readout::ideal(), 200, 7).unwrap();
        let r = reconstruct_with_errors(&t, Readout::ideal(), &quick(), 4, Execution::Sequential).unwrap();
        let back = ReconstructionResult::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn consistency_with_sample_size() {
        let truth = werner_state(0.8).unwrap();
        let mut medians = Vec::new();
        for n in [100, 1_000, 10_000, 100_000] {
            let mut d: Vec<f64> = (0..20)
                .map(|seed| {
                    let t = simulate_tomography_counts(&truth, Readout::ideal(), n, seed).unwrap();
                    mle_reconstruct(&t, Readout::ideal(), &quick()).unwrap().rho.trace_distance(&truth)
                })
                .collect();
            d.sort_by(f64::total_cmp);
            medians.push((d[9] + d[10]) / 2.0);
        }
        assert!(medians.windows(2).all(|w| w[1] < w[0]), "{medians:?}");
    }

    fn permuted_basis(b: Basis) -> Basis {
        match b {
            Basis::X => Basis::Y,
            Basis::Y => Basis::Z,
            Basis::Z => Basis::X,
        }
    }

    #[test]
    fn permutation_covariance() {
        let tight = MleOptions {
            tol: 1e-14,
            max_iter: 100_000,
            ..quick()
        };
        let t = simulate_tomography_counts(&werner_state(0.7).unwrap(), Readout::ideal(), 2000, 8).unwrap();
        let base = mle_reconstruct(&t, Readout::ideal(), &tight).unwrap().rho;

        // x → y → z → x on qubit a is a 2π/3 turn about (1,1,1)
        let mut relabeled = CountsTable::new();
        for (s, c) in t.rows() {
            relabeled.add(TomographySetting::new(permuted_basis(s.basis_a), s.basis_b), *c);
        }
        let r = mle_reconstruct(&relabeled, Readout::ideal(), &tight).unwrap().rho;
        let n = 1.0 / 3f64.sqrt();
        let v = rotation([n, n, n], 2.0 * PI / 3.0).unwrap();
        let expected = states::apply_local_unitary(&base, &v, 0).unwrap();
        assert!(r.trace_distance(&expected) < 1e-6, "{}", r.trace_distance(&expected));

        // swapping the qubits swaps the mixed outcomes
        let mut swapped = CountsTable::new();
        for (s, c) in t.rows() {
            swapped.add(TomographySetting::new(s.basis_b, s.basis_a), [c[0], c[2], c[1], c[3]]);
        }
        let r = mle_reconstruct(&swapped, Readout::ideal(), &tight).unwrap().rho;
        let expected = base.permute_qubits(&[1, 0]).unwrap();
        assert!(r.trace_distance(&expected) < 1e-6);
    }

    #[test]
    fn bootstrap_spread() {
        let t = simulate_tomography_counts(&ion_ion_singlet().to_density(), Readout::ideal(), 10_000, 9).unwrap();
        let e = bootstrap_measures(&t, Readout::ideal(), &quick(), 20, 1, Execution::Parallel).unwrap();
        assert!(e.fidelity < 0.01 && e.fidelity > 0.0);
        assert!(matches!(
            bootstrap_measures(&t, Readout::ideal(), &quick(), 1, 1, Execution::Parallel),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn bootstrap_of_deterministic_counts() {
        // every row concentrated on one outcome resamples to itself
        let mut t = CountsTable::new();
        for s in TomographySetting::all() {
            t.add(s, [0, 40, 0, 0]);
        }
        let e = bootstrap_measures(&t, Readout::ideal(), &quick(), 2, 1, Execution::Sequential).unwrap();
        assert!(e.fidelity < 1e-9 && e.purity < 1e-9);
    }

    proptest! {
        #[test]
        fn parametrization_is_physical(p in prop::array::uniform16(-3.0f64..3.0)) {
            let rho = rho_from_params(&p);
            prop_assert!((rho.matrix().trace().re - 1.0).abs() < 1e-12);
            prop_assert!(rho.eigenvalues()[0] > -1e-12);
            prop_assert!(rho.matrix().is_hermitian(1e-14));
        }
    }
}
