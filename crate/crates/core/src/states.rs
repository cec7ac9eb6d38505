//! Ion and photon states, the noise channels of the error budget, and
//! two-qubit entanglement measures.
//!
//! Basis order is shared by every module: ion qubit `(|1,1⟩, |1,−1⟩)`,
//! photon qubit `(H, V)`, with qubit 0 the most significant tensor factor.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::qmat::{self, c, embed_qubit_op, kron, re, ComplexMatrix, C64};

pub const NORM_TOL: f64 = 1e-10;
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-9;
pub const MIN_EIGENVALUE: f64 = -1e-9;
pub const KRAUS_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amplitudes: Vec<C64>,
}

impl PureState {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if amplitudes.is_empty() || (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("state norm {norm}")));
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes `amplitudes` before building the state.
    pub fn normalized(mut amplitudes: Vec<C64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-300 || !norm.is_finite() {
            return Err(Error::InvalidState("zero vector".into()));
        }
        amplitudes.iter_mut().for_each(|z| *z /= norm);
        Self::new(amplitudes)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::from_trusted(ComplexMatrix::projector(&self.amplitudes))
    }

    pub fn tensor(&self, other: &PureState) -> PureState {
        PureState {
            amplitudes: qmat::kron_vec(&self.amplitudes, &other.amplitudes),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() || !matrix.rows().is_power_of_two() {
            return Err(Error::InvalidState(format!(
                "{}x{} is not a qubit-register shape",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let anti = matrix.max_abs_diff(&matrix.adjoint());
        if anti > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {anti:e})")));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        let matrix = matrix.hermitian_part();
        let min = qmat::eigenvalues(&matrix)?[0];
        if min < MIN_EIGENVALUE {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self { matrix })
    }

    /// Normalizes the trace, then validates.
    pub fn normalized(matrix: ComplexMatrix) -> Result<Self> {
        let tr = matrix.trace().re;
        if !(tr > 0.0) {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        Self::new(matrix.scale_re(1.0 / tr))
    }

    /// For matrices that are physical by construction (projectors, products).
    pub(crate) fn from_trusted(matrix: ComplexMatrix) -> Self {
        debug_assert!(matrix.is_hermitian(1e-9));
        Self {
            matrix: matrix.hermitian_part(),
        }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let d = 1 << n_qubits;
        Self::from_trusted(ComplexMatrix::identity(d).scale_re(1.0 / d as f64))
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn n_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        Self::from_trusted(kron(&self.matrix, &other.matrix))
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        qmat::eigenvalues(&self.matrix).expect("density matrices are square")
    }

    /// `(1 − w) ρ + w σ`
    pub fn mix(&self, other: &DensityMatrix, w: f64) -> Result<DensityMatrix> {
        check_probability("mixing weight", w)?;
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch("mixing states of different size".into()));
        }
        Ok(Self::from_trusted(
            &self.matrix.scale_re(1.0 - w) + &other.matrix.scale_re(w),
        ))
    }

    /// Reduced state on the `keep` qubits (in their original order).
    pub fn reduce(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let n = self.n_qubits();
        let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
        Ok(Self::from_trusted(qmat::trace_out_qubits(&self.matrix, n, &traced)?))
    }

    /// `U ρ U†` for a unitary on the full register.
    pub fn evolve(&self, u: &ComplexMatrix) -> Result<DensityMatrix> {
        if u.rows() != self.dim() || !u.is_square() {
            return Err(Error::DimensionMismatch("unitary size".into()));
        }
        Ok(Self::from_trusted(self.matrix.conjugate_by(u)))
    }

    pub fn permute_qubits(&self, perm: &[usize]) -> Result<DensityMatrix> {
        Ok(Self::from_trusted(qmat::permute_qubits(
            &self.matrix,
            self.n_qubits(),
            perm,
        )?))
    }

    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        let diff = &self.matrix - &other.matrix;
        0.5 * qmat::eigenvalues(&diff)
            .expect("square")
            .iter()
            .map(|x| x.abs())
            .sum::<f64>()
    }
}

/// A completely positive trace-preserving map on one or two qubits.
#[derive(Clone, Debug)]
pub struct QubitChannel {
    kraus: Vec<ComplexMatrix>,
}

impl QubitChannel {
    pub fn new(kraus: Vec<ComplexMatrix>) -> Result<Self> {
        let d = kraus
            .first()
            .map(|k| k.rows())
            .ok_or_else(|| Error::InvalidState("channel without Kraus operators".into()))?;
        if !d.is_power_of_two() || kraus.iter().any(|k| k.rows() != d || k.cols() != d) {
            return Err(Error::DimensionMismatch("Kraus operator shapes".into()));
        }
        let mut sum = ComplexMatrix::zeros(d, d);
        for k in &kraus {
            sum = &sum + &(&k.adjoint() * k);
        }
        let dev = (&sum - &ComplexMatrix::identity(d)).frobenius_norm();
        if dev > KRAUS_TOL {
            return Err(Error::NotTracePreserving(dev));
        }
        Ok(Self { kraus })
    }

    pub fn identity(n_qubits: usize) -> Self {
        Self {
            kraus: vec![ComplexMatrix::identity(1 << n_qubits)],
        }
    }

    /// Phase flip with probability `p`: Kraus `{√(1−p) I, √p σz}`.
    pub fn dephasing(p: f64) -> Result<Self> {
        check_probability("dephasing probability", p)?;
        Self::new(vec![
            ComplexMatrix::identity(2).scale_re((1.0 - p).sqrt()),
            ComplexMatrix::pauli_z().scale_re(p.sqrt()),
        ])
    }

    /// Random rotation by `±angle` about `axis` (each sign with probability ½).
    pub fn rotation_jitter(axis: [f64; 3], angle: f64) -> Result<Self> {
        let plus = rotation(axis, angle)?;
        let minus = rotation(axis, -angle)?;
        Self::new(vec![plus.scale_re(FRAC_1_SQRT_2), minus.scale_re(FRAC_1_SQRT_2)])
    }

    /// Single-qubit depolarizing map `ρ ↦ λρ + (1−λ) tr(ρ) I/2`, `λ ∈ [−1/3, 1]`.
    pub fn depolarizing(lambda: f64) -> Result<Self> {
        if !(-1.0 / 3.0..=1.0).contains(&lambda) {
            return Err(Error::OutOfRange {
                name: "depolarizing lambda",
                value: lambda,
                range: "[-1/3, 1]",
            });
        }
        let w = (1.0 - lambda) / 4.0;
        Self::new(vec![
            ComplexMatrix::identity(2).scale_re((1.0 - 3.0 * w).sqrt()),
            ComplexMatrix::pauli_x().scale_re(w.sqrt()),
            ComplexMatrix::pauli_y().scale_re(w.sqrt()),
            ComplexMatrix::pauli_z().scale_re(w.sqrt()),
        ])
    }

    /// With probability `p` the input is discarded and replaced by `background`.
    pub fn replacement(p: f64, background: &DensityMatrix) -> Result<Self> {
        check_probability("replacement probability", p)?;
        let d = background.dim();
        let eig = qmat::hermitian_eig(background.matrix())?;
        let mut kraus = vec![ComplexMatrix::identity(d).scale_re((1.0 - p).sqrt())];
        for (k, &lambda) in eig.values.iter().enumerate() {
            if lambda <= 0.0 {
                continue;
            }
            let v = eig.vectors.column(k);
            for j in 0..d {
                let mut e = vec![re(0.0); d];
                e[j] = re(1.0);
                kraus.push(ComplexMatrix::outer(&v, &e).scale_re((p * lambda).sqrt()));
            }
        }
        Self::new(kraus)
    }

    pub fn n_qubits(&self) -> usize {
        self.kraus[0].rows().trailing_zeros() as usize
    }

    pub fn kraus_operators(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    /// Sequential composition: `self` first, then `next`.
    pub fn then(&self, next: &QubitChannel) -> Result<QubitChannel> {
        let mut kraus = Vec::with_capacity(self.kraus.len() * next.kraus.len());
        for b in &next.kraus {
            for a in &self.kraus {
                kraus.push(b * a);
            }
        }
        QubitChannel::new(kraus)
    }
}

/// `exp(−i angle n·σ / 2)`
pub fn rotation(axis: [f64; 3], angle: f64) -> Result<ComplexMatrix> {
    let norm = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::InvalidState("rotation axis has zero length".into()));
    }
    let [nx, ny, nz] = axis.map(|x| x / norm);
    let (s, co) = (angle / 2.0).sin_cos();
    Ok(ComplexMatrix::from_rows(&[
        &[c(co, -s * nz), c(-s * ny, -s * nx)],
        &[c(s * ny, -s * nx), c(co, s * nz)],
    ]))
}

/// Ion-photon state after the quarter-wave plate, `(|1,1⟩|V⟩ − i|1,−1⟩|H⟩)/√2`,
/// on (ion ⊗ photon).
pub fn ion_photon_state() -> PureState {
    let s = FRAC_1_SQRT_2;
    PureState {
        amplitudes: vec![re(0.0), re(s), c(0.0, -s), re(0.0)],
    }
}

/// Heralded two-ion state `(|1,1⟩|1,−1⟩ − |1,−1⟩|1,1⟩)/√2`.
pub fn ion_ion_singlet() -> PureState {
    let s = FRAC_1_SQRT_2;
    PureState {
        amplitudes: vec![re(0.0), re(s), re(-s), re(0.0)],
    }
}

/// `p |ψ⁻⟩⟨ψ⁻| + (1 − p) I/4`
pub fn werner_state(p: f64) -> Result<DensityMatrix> {
    check_probability("werner p", p)?;
    ion_ion_singlet()
        .to_density()
        .mix(&DensityMatrix::maximally_mixed(2), 1.0 - p)
}

/// Applies `ch` to the qubits `target .. target + ch.n_qubits()`.
pub fn apply_channel(rho: &DensityMatrix, ch: &QubitChannel, target: usize) -> Result<DensityMatrix> {
    let n = rho.n_qubits();
    let k = ch.n_qubits();
    if target + k > n {
        return Err(Error::DimensionMismatch(format!(
            "{k}-qubit channel at qubit {target} of a {n}-qubit state"
        )));
    }
    let left = ComplexMatrix::identity(1 << target);
    let right = ComplexMatrix::identity(1 << (n - target - k));
    let mut out = ComplexMatrix::zeros(rho.dim(), rho.dim());
    for op in ch.kraus_operators() {
        let full = kron(&kron(&left, op), &right);
        out = &out + &rho.matrix().conjugate_by(&full);
    }
    DensityMatrix::new(out)
}

/// `⟨ψ|ρ|ψ⟩`
pub fn fidelity_with_pure(rho: &DensityMatrix, psi: &PureState) -> Result<f64> {
    if rho.dim() != psi.dim() {
        return Err(Error::DimensionMismatch("state and target sizes differ".into()));
    }
    Ok(rho.matrix().expectation(psi.amplitudes()).re.clamp(0.0, 1.0))
}

/// Wootters concurrence, from the Hermitian product `√ρ ρ̃ √ρ`.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch("concurrence needs a two-qubit state".into()));
    }
    let yy = kron(&ComplexMatrix::pauli_y(), &ComplexMatrix::pauli_y());
    let flipped = rho.matrix().conj().conjugate_by(&yy);
    let root = qmat::sqrt_psd(rho.matrix())?;
    let product = &(&root * &flipped) * &root;
    let mut lambdas: Vec<f64> = qmat::eigenvalues(&product)?
        .into_iter()
        .map(|x| x.max(0.0).sqrt())
        .collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    Ok((lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).clamp(0.0, 1.0))
}

fn binary_entropy(x: f64) -> f64 {
    [x, 1.0 - x]
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

pub fn entanglement_of_formation(concurrence: f64) -> Result<f64> {
    check_probability("concurrence", concurrence)?;
    let x = (1.0 + (1.0 - concurrence * concurrence).sqrt()) / 2.0;
    Ok(binary_entropy(x))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measures {
    pub fidelity: f64,
    pub concurrence: f64,
    pub eof: f64,
    pub purity: f64,
}

impl Measures {
    pub fn of(rho: &DensityMatrix, target: &PureState) -> Result<Self> {
        let concurrence = concurrence(rho)?;
        Ok(Self {
            fidelity: fidelity_with_pure(rho, target)?,
            concurrence,
            eof: entanglement_of_formation(concurrence)?,
            purity: rho.purity(),
        })
    }
}

/// Lifts a single-qubit unitary onto qubit `target` of `rho` and applies it.
pub fn apply_local_unitary(rho: &DensityMatrix, u: &ComplexMatrix, target: usize) -> Result<DensityMatrix> {
    rho.evolve(&embed_qubit_op(u, target, rho.n_qubits()))
}
