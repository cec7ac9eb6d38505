//! CHSH analysis: correlation functions, the S combination and its
//! counting-statistics error.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{self, DetectionModel, OutcomeCounts, OutcomeProbs, RotationSetting};
use crate::par::{self, Execution};
use crate::qmat::{self, kron, ComplexMatrix};
use crate::states::DensityMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_events: u64,
}

impl CorrelationEstimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            std_error: 0.0,
            n_events: 0,
        }
    }
}

/// Analysis settings `(a, a′, b, b′)` for the two qubits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshSettings {
    pub a: RotationSetting,
    pub a_prime: RotationSetting,
    pub b: RotationSetting,
    pub b_prime: RotationSetting,
}

impl ChshSettings {
    /// `θa = π/2, θa′ = 0, θb = π/4, θb′ = 3π/4`, all phases zero.
    pub fn reference() -> Self {
        Self::polar(PI / 2.0, 0.0, PI / 4.0, 3.0 * PI / 4.0)
    }

    pub fn polar(theta_a: f64, theta_a_prime: f64, theta_b: f64, theta_b_prime: f64) -> Self {
        Self {
            a: RotationSetting::polar(theta_a),
            a_prime: RotationSetting::polar(theta_a_prime),
            b: RotationSetting::polar(theta_b),
            b_prime: RotationSetting::polar(theta_b_prime),
        }
    }

    /// Same angles with the phase of qubit b's analysis set to `phi_b`.
    pub fn with_phase_b(self, phi_b: f64) -> Result<Self> {
        Ok(Self {
            b: RotationSetting::new(self.b.theta(), phi_b)?,
            b_prime: RotationSetting::new(self.b_prime.theta(), phi_b)?,
            ..self
        })
    }

    /// `(a,b), (a′,b), (a,b′), (a′,b′)`: the order used throughout.
    pub fn pairs(&self) -> [(RotationSetting, RotationSetting); 4] {
        [
            (self.a, self.b),
            (self.a_prime, self.b),
            (self.a, self.b_prime),
            (self.a_prime, self.b_prime),
        ]
    }
}

impl Default for ChshSettings {
    fn default() -> Self {
        Self::reference()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshResult {
    pub s_value: f64,
    pub std_error: f64,
    pub settings: ChshSettings,
    pub correlations: [CorrelationEstimate; 4],
}

impl ChshResult {
    pub fn recompute_s(&self) -> f64 {
        s_combination(self.correlations.map(|c| c.value))
    }
}

/// `E = p(b,b) + p(d,d) − p(b,d) − p(d,b)`
pub fn correlation_from_probs(p: &OutcomeProbs) -> f64 {
    p.0[0] + p.0[3] - p.0[1] - p.0[2]
}

/// Empirical correlation with the multinomial error `√((1 − E²)/N)`.
pub fn correlation_from_counts(counts: &OutcomeCounts) -> Result<CorrelationEstimate> {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(Error::EmptyCounts);
    }
    let nf = n as f64;
    let value = (counts[0] as f64 + counts[3] as f64 - counts[1] as f64 - counts[2] as f64) / nf;
    let std_error = ((1.0 - value * value).max(0.0) / nf).sqrt();
    Ok(CorrelationEstimate {
        value,
        std_error,
        n_events: n,
    })
}

fn s_combination(e: [f64; 4]) -> f64 {
    (e[0] + e[1]).abs() + (e[2] - e[3]).abs()
}

/// `S = |E(a,b) + E(a′,b)| + |E(a,b′) − E(a′,b′)|`, errors added in quadrature.
pub fn chsh(correlations: [CorrelationEstimate; 4], settings: ChshSettings) -> ChshResult {
    let s_value = s_combination(correlations.map(|c| c.value));
    let std_error = correlations.iter().map(|c| c.std_error * c.std_error).sum::<f64>().sqrt();
    ChshResult {
        s_value,
        std_error,
        settings,
        correlations,
    }
}

pub fn chsh_from_counts(counts: &[OutcomeCounts; 4], settings: ChshSettings) -> Result<ChshResult> {
    let mut est = [CorrelationEstimate::exact(0.0); 4];
    for (slot, c) in est.iter_mut().zip(counts) {
        *slot = correlation_from_counts(c)?;
    }
    Ok(chsh(est, settings))
}

/// Exact S for a state and readout model, no sampling.
pub fn chsh_predicted(rho: &DensityMatrix, settings: &ChshSettings, det: DetectionModel) -> Result<f64> {
    chsh_predicted_with(rho, settings, det, det)
}

pub fn chsh_predicted_with(
    rho: &DensityMatrix,
    settings: &ChshSettings,
    det_a: DetectionModel,
    det_b: DetectionModel,
) -> Result<f64> {
    let mut e = [0.0; 4];
    for (slot, (sa, sb)) in e.iter_mut().zip(settings.pairs()) {
        *slot = correlation_from_probs(&measure::outcome_probabilities_with(rho, sa, sb, det_a, det_b)?);
    }
    Ok(s_combination(e))
}

/// Correlation matrix `T_ij = tr(ρ σ_i ⊗ σ_j)`.
pub fn correlation_tensor(rho: &DensityMatrix) -> Result<[[f64; 3]; 3]> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch("correlation tensor needs two qubits".into()));
    }
    let paulis = [ComplexMatrix::pauli_x(), ComplexMatrix::pauli_y(), ComplexMatrix::pauli_z()];
    let mut t = [[0.0; 3]; 3];
    for (i, si) in paulis.iter().enumerate() {
        for (j, sj) in paulis.iter().enumerate() {
            t[i][j] = (&kron(si, sj) * rho.matrix()).trace().re;
        }
    }
    Ok(t)
}

/// Largest S reachable with projective settings, `2√(m₁ + m₂)` over the two
/// largest eigenvalues of `TᵀT`.
pub fn chsh_optimal(rho: &DensityMatrix) -> Result<f64> {
    let t = correlation_tensor(rho)?;
    let mut ttt = ComplexMatrix::zeros(3, 3);
    for i in 0..3 {
        for j in 0..3 {
            ttt[(i, j)] = qmat::re((0..3).map(|k| t[k][i] * t[k][j]).sum());
        }
    }
    let ev = qmat::eigenvalues(&ttt)?;
    Ok(2.0 * (ev[2] + ev[1]).max(0.0).sqrt())
}

/// Standard deviation of S over multinomial resamples of the four count vectors.
pub fn bootstrap_chsh_error(counts: &[OutcomeCounts; 4], n_resamples: usize, seed: u64, exec: Execution) -> Result<f64> {
    if n_resamples < 2 {
        return Err(Error::Config("bootstrap needs at least two resamples".into()));
    }
    let mut probs = [OutcomeProbs([0.0; 4]); 4];
    for (p, c) in probs.iter_mut().zip(counts) {
        let n: u64 = c.iter().sum();
        if n == 0 {
            return Err(Error::EmptyCounts);
        }
        *p = OutcomeProbs(c.map(|k| k as f64 / n as f64));
    }
    let values = par::map_indexed(n_resamples, exec, |i| {
        let mut rng = par::rng_for(seed, i as u64);
        let e = std::array::from_fn(|k| {
            let n: u64 = counts[k].iter().sum();
            let resampled = measure::sample_outcomes(&probs[k], n, &mut rng);
            correlation_from_probs(&OutcomeProbs(resampled.map(|x| x as f64 / n as f64)))
        });
        s_combination(e)
    });
    Ok(std_dev(&values))
}

pub(crate) fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{ion_ion_singlet, werner_state};
    use std::f64::consts::{FRAC_PI_4, SQRT_2};

    #[test]
    fn correlation_extremes() {
        assert_eq!(correlation_from_probs(&OutcomeProbs([0.5, 0.0, 0.0, 0.5])), 1.0);
        assert_eq!(correlation_from_probs(&OutcomeProbs([0.0, 0.5, 0.5, 0.0])), -1.0);
        let p = measure::outcome_probabilities(
            &ion_ion_singlet().to_density(),
            RotationSetting::polar(PI / 2.0),
            RotationSetting::polar(FRAC_PI_4),
            DetectionModel::ideal(),
        )
        .unwrap();
        assert!((correlation_from_probs(&p) + 0.70711).abs() < 1e-5);
    }

    #[test]
    fn counts_estimates() {
        let e = correlation_from_counts(&[50, 0, 0, 50]).unwrap();
        assert_eq!((e.value, e.std_error, e.n_events), (1.0, 0.0, 100));
        let e = correlation_from_counts(&[25, 25, 25, 25]).unwrap();
        assert_eq!(e.value, 0.0);
        assert!((e.std_error - 0.1).abs() < 1e-15);
        assert!(matches!(correlation_from_counts(&[0; 4]), Err(Error::EmptyCounts)));
    }

    #[test]
    fn reported_row_error() {
        // 569 events with E ≈ −0.518: (bb + dd) − (bd + db) = −295
        let e = correlation_from_counts(&[70, 212, 220, 67]).unwrap();
        assert!((e.value + 0.518).abs() < 1e-3);
        assert!((e.std_error - 0.036).abs() < 5e-4);
    }

    #[test]
    fn reported_correlations_arithmetic() {
        let values = [(-0.518, 0.036), (-0.581, 0.034), (-0.546, 0.034), (0.573, 0.035)];
        let est = values.map(|(v, s)| CorrelationEstimate {
            value: v,
            std_error: s,
            n_events: 569,
        });
        let r = chsh(est, ChshSettings::reference());
        assert!((r.s_value - 2.218).abs() < 1e-12);
        assert!((r.std_error - 0.0695).abs() < 1e-3);
        assert_eq!(r.recompute_s(), r.s_value);
        assert_eq!(chsh([CorrelationEstimate::exact(0.0); 4], ChshSettings::reference()).s_value, 0.0);
    }

    #[test]
    fn singlet_reaches_tsirelson() {
        let s = chsh_predicted(&ion_ion_singlet().to_density(), &ChshSettings::reference(), DetectionModel::ideal()).unwrap();
        assert!((s - 2.0 * SQRT_2).abs() < 1e-12);
        let s = chsh_predicted(&ion_ion_singlet().to_density(), &ChshSettings::reference(), DetectionModel::new(0.98).unwrap()).unwrap();
        assert!((s - 2.0 * SQRT_2 * 0.9216).abs() < 1e-12);
        assert!((s - 2.6068).abs() < 5e-4);
        assert!((chsh_optimal(&ion_ion_singlet().to_density()).unwrap() - 2.0 * SQRT_2).abs() < 1e-10);
    }

    #[test]
    fn werner_scaling() {
        for p in [0.0, 0.3, 0.7, 1.0] {
            let s = chsh_predicted(&werner_state(p).unwrap(), &ChshSettings::reference(), DetectionModel::ideal()).unwrap();
            assert!((s - 2.0 * SQRT_2 * p).abs() < 1e-12);
        }
    }

    #[test]
    fn bootstrap_agrees_with_analytic_error() {
        let counts = [[70, 212, 220, 67], [60, 225, 224, 60], [65, 220, 220, 64], [225, 60, 60, 224]];
        let r = chsh_from_counts(&counts, ChshSettings::reference()).unwrap();
        let boot = bootstrap_chsh_error(&counts, 400, 3, Execution::Parallel).unwrap();
        assert!((boot / r.std_error - 1.0).abs() < 0.15, "{boot} vs {}", r.std_error);
    }
}
