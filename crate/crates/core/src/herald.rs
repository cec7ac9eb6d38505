//! Two-photon Bell-state analyzer: a 50/50 beamsplitter followed by one
//! threshold detector per output port. A click on both ports heralds the two
//! ions in the singlet.
//!
//! Each photon is expanded into single-photon modes labelled by output port,
//! polarization and a mode-match label. The match label of photon `k` is
//! `√s |shared⟩ + √(1−s) |own_k⟩` with `s = √mode_overlap`, so the two photons'
//! internal overlap squared (the two-photon interference visibility) equals
//! `mode_overlap`.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::qmat::{self, re, ComplexMatrix, C64};
use crate::states::{DensityMatrix, PureState};

/// Below this the herald is treated as never firing.
pub const MIN_HERALD_PROBABILITY: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InterferometerRepr", into = "InterferometerRepr")]
pub struct InterferometerModel {
    mode_overlap: f64,
    pmt_efficiency: f64,
    dark_rate_hz: f64,
    coincidence_window_ns: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InterferometerRepr {
    mode_overlap: f64,
    pmt_efficiency: f64,
    dark_rate_hz: f64,
    /// Full width; a ±25 ns window is 50.
    coincidence_window_ns: f64,
}

impl TryFrom<InterferometerRepr> for InterferometerModel {
    type Error = Error;

    fn try_from(r: InterferometerRepr) -> Result<Self> {
        InterferometerModel::new(r.mode_overlap, r.pmt_efficiency, r.dark_rate_hz, r.coincidence_window_ns)
    }
}

impl From<InterferometerModel> for InterferometerRepr {
    fn from(m: InterferometerModel) -> Self {
        Self {
            mode_overlap: m.mode_overlap,
            pmt_efficiency: m.pmt_efficiency,
            dark_rate_hz: m.dark_rate_hz,
            coincidence_window_ns: m.coincidence_window_ns,
        }
    }
}

impl InterferometerModel {
    pub fn new(mode_overlap: f64, pmt_efficiency: f64, dark_rate_hz: f64, coincidence_window_ns: f64) -> Result<Self> {
        check_probability("mode_overlap", mode_overlap)?;
        check_probability("pmt_efficiency", pmt_efficiency)?;
        if !(dark_rate_hz >= 0.0) || !dark_rate_hz.is_finite() {
            return Err(Error::OutOfRange {
                name: "dark_rate_hz",
                value: dark_rate_hz,
                range: "[0, inf)",
            });
        }
        if !(coincidence_window_ns > 0.0) || !coincidence_window_ns.is_finite() {
            return Err(Error::OutOfRange {
                name: "coincidence_window_ns",
                value: coincidence_window_ns,
                range: "(0, inf)",
            });
        }
        Ok(Self {
            mode_overlap,
            pmt_efficiency,
            dark_rate_hz,
            coincidence_window_ns,
        })
    }

    /// Perfect mode match, unit efficiency, no dark counts, 50 ns window.
    pub fn ideal() -> Self {
        Self::new(1.0, 1.0, 0.0, 50.0).expect("valid")
    }

    pub fn mode_overlap(&self) -> f64 {
        self.mode_overlap
    }

    pub fn pmt_efficiency(&self) -> f64 {
        self.pmt_efficiency
    }

    pub fn dark_rate_hz(&self) -> f64 {
        self.dark_rate_hz
    }

    pub fn coincidence_window_ns(&self) -> f64 {
        self.coincidence_window_ns
    }

    pub fn with_mode_overlap(self, mode_overlap: f64) -> Result<Self> {
        Self::new(mode_overlap, self.pmt_efficiency, self.dark_rate_hz, self.coincidence_window_ns)
    }

    pub fn with_pmt_efficiency(self, pmt_efficiency: f64) -> Result<Self> {
        Self::new(self.mode_overlap, pmt_efficiency, self.dark_rate_hz, self.coincidence_window_ns)
    }

    pub fn with_dark_rate(self, dark_rate_hz: f64) -> Result<Self> {
        Self::new(self.mode_overlap, self.pmt_efficiency, dark_rate_hz, self.coincidence_window_ns)
    }

    /// Probability that one detector registers at least one dark count in the window.
    pub fn dark_click_probability(&self) -> f64 {
        -(-self.dark_rate_hz * self.coincidence_window_ns * 1e-9).exp_m1()
    }
}

/// Two ion-photon pairs on `(ion_a, photon_a, ion_b, photon_b)`.
#[derive(Clone, Debug)]
pub struct JointSourceState {
    matrix: DensityMatrix,
}

impl JointSourceState {
    pub fn new(matrix: DensityMatrix) -> Result<Self> {
        if matrix.dim() != 16 {
            return Err(Error::DimensionMismatch(format!(
                "joint source state must be 16-dimensional, got {}",
                matrix.dim()
            )));
        }
        Ok(Self { matrix })
    }

    /// `ρ_a ⊗ ρ_b` for two (ion ⊗ photon) pairs.
    pub fn from_sources(source_a: &DensityMatrix, source_b: &DensityMatrix) -> Result<Self> {
        if source_a.dim() != 4 || source_b.dim() != 4 {
            return Err(Error::DimensionMismatch("sources must be ion-photon pairs".into()));
        }
        Self::new(source_a.tensor(source_b))
    }

    pub fn density(&self) -> &DensityMatrix {
        &self.matrix
    }

    /// Product of the two single-ion marginals: what a dark-count herald leaves behind.
    pub fn ion_background(&self) -> Result<DensityMatrix> {
        let a = self.matrix.reduce(&[0])?;
        let b = self.matrix.reduce(&[2])?;
        Ok(a.tensor(&b))
    }

    /// Ion pair (qubits 0 and 2) with the photons swapped in as qubits 2 and 3.
    fn ions_first(&self) -> Result<ComplexMatrix> {
        Ok(qmat::permute_qubits(self.matrix.matrix(), 4, &[0, 2, 1, 3])?)
    }
}

#[derive(Clone, Debug)]
pub struct HeraldResult {
    pub success_probability: f64,
    pub conditioned_state: DensityMatrix,
    pub false_herald_fraction: f64,
}

/// Internal single-photon mode at one output port: polarization (H = 0, V = 1)
/// times match label (0 = shared, 1 = own to source a, 2 = own to source b).
const LABELS: usize = 3;
const INTERNAL: usize = 2 * LABELS;

fn label_amplitudes(mode_overlap: f64) -> [[f64; LABELS]; 2] {
    let shared = mode_overlap.sqrt().sqrt();
    let own = (1.0 - mode_overlap.sqrt()).max(0.0).sqrt();
    [[shared, own, 0.0], [shared, 0.0, own]]
}

/// Two-photon effect on the polarization pair `(photon_a, photon_b)` for a
/// click on both output ports, at unit detector efficiency.
///
/// Source `a` enters port 1 and maps to `(c + d)/√2`; source `b` enters port 2
/// and maps to `(c − d)/√2`. The cross-port part of the output is a sum over
/// Fock states `|1_{c,u} 1_{d,v}⟩` of internal modes `u, v`.
pub fn cross_port_effect(mode_overlap: f64) -> ComplexMatrix {
    let alpha = label_amplitudes(mode_overlap);
    // amplitude[(u, v)][(pa, pb)]
    let mut amp = vec![[re(0.0); 4]; INTERNAL * INTERNAL];
    for pa in 0..2 {
        for pb in 0..2 {
            for la in 0..LABELS {
                for lb in 0..LABELS {
                    let w = alpha[0][la] * alpha[1][lb];
                    if w == 0.0 {
                        continue;
                    }
                    let x = pa * LABELS + la;
                    let y = pb * LABELS + lb;
                    // c†_x d†_y from (c_x + d_x)(c_y − d_y)/2 carries −½; d†_x c†_y carries +½
                    amp[x * INTERNAL + y][2 * pa + pb] += re(-0.5 * w);
                    amp[y * INTERNAL + x][2 * pa + pb] += re(0.5 * w);
                }
            }
        }
    }
    let mut effect = ComplexMatrix::zeros(4, 4);
    for row in &amp {
        for i in 0..4 {
            for j in 0..4 {
                effect[(i, j)] += row[i].conj() * row[j];
            }
        }
    }
    effect
}

/// `Tr_photons[(I_ions ⊗ E) ρ]` for a joint state with ions first.
fn condition_ions(ions_first: &ComplexMatrix, photon_effect: &ComplexMatrix) -> ComplexMatrix {
    let lifted = qmat::kron(&ComplexMatrix::identity(4), photon_effect);
    let weighted = &lifted * ions_first;
    qmat::partial_trace(&weighted, qmat::Subsystem::A, 4, 4).expect("16 = 4 x 4")
}

/// Herald statistics when each photon independently reaches the beamsplitter
/// with probability `arrival_prob`; the interferometer model supplies detector
/// efficiency and dark counts.
pub fn herald_with_arrival(
    joint: &JointSourceState,
    model: &InterferometerModel,
    arrival_prob: f64,
) -> Result<HeraldResult> {
    check_probability("arrival probability", arrival_prob)?;
    let ions_first = joint.ions_first()?;
    let unnormalized = condition_ions(&ions_first, &cross_port_effect(model.mode_overlap));
    let p_cross = unnormalized.trace().re.max(0.0);

    let r = arrival_prob * model.pmt_efficiency;
    let p_real = r * r * p_cross;
    let single_click = 2.0 * r * (1.0 - r) + r * r * (1.0 - p_cross);
    let d = model.dark_click_probability();
    let p_false = single_click * d + (1.0 - r) * (1.0 - r) * d * d;
    let total = p_real + p_false;
    if total < MIN_HERALD_PROBABILITY {
        return Err(Error::NoHeraldSupport(total));
    }
    let false_fraction = p_false / total;
    let conditioned_state = if p_real > 0.0 && p_cross > MIN_HERALD_PROBABILITY {
        let truth = DensityMatrix::normalized(unnormalized)?;
        if false_fraction > 0.0 {
            truth.mix(&joint.ion_background()?, false_fraction)?
        } else {
            truth
        }
    } else {
        joint.ion_background()?
    };
    Ok(HeraldResult {
        success_probability: total,
        conditioned_state,
        false_herald_fraction: false_fraction,
    })
}

/// Both photons present at the beamsplitter on every attempt.
pub fn beamsplitter_coincidence(joint: &JointSourceState, model: &InterferometerModel) -> Result<HeraldResult> {
    herald_with_arrival(joint, model, 1.0)
}

/// Probability per attempt that dark counts fake a coincidence: a real click on
/// one port (probability `photon_click_prob`) paired with a dark count on the
/// other, or dark counts on both.
pub fn false_herald_probability(model: &InterferometerModel, photon_click_prob: f64) -> f64 {
    let d = model.dark_click_probability();
    let c = photon_click_prob.clamp(0.0, 1.0);
    c * d + (1.0 - c) * d * d
}

/// Two-ion state heralded by an ideal singlet projection of two photons, one
/// from each (ion ⊗ photon) source.
pub fn predict_ionion_from_ionphoton(rho_ip_a: &DensityMatrix, rho_ip_b: &DensityMatrix) -> Result<DensityMatrix> {
    let joint = JointSourceState::from_sources(rho_ip_a, rho_ip_b)?;
    let singlet = crate::states::ion_ion_singlet();
    let projector = ComplexMatrix::projector(singlet.amplitudes());
    let unnormalized = condition_ions(&joint.ions_first()?, &projector);
    let p = unnormalized.trace().re;
    if p < MIN_HERALD_PROBABILITY {
        return Err(Error::NoHeraldSupport(p));
    }
    DensityMatrix::normalized(unnormalized)
}

/// Two identical Eq.-(2)-type sources.
pub fn ideal_joint_source() -> JointSourceState {
    let src = crate::states::ion_photon_state().to_density();
    JointSourceState::from_sources(&src, &src).expect("4 x 4 sources")
}

/// Pure product test input `|ion_a, pol_a⟩ ⊗ |ion_b, pol_b⟩`.
pub fn product_source(ion_a: [C64; 2], pol_a: [C64; 2], ion_b: [C64; 2], pol_b: [C64; 2]) -> Result<JointSourceState> {
    let v = qmat::kron_vec(&qmat::kron_vec(&ion_a, &pol_a), &qmat::kron_vec(&ion_b, &pol_b));
    JointSourceState::new(PureState::normalized(v)?.to_density())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{fidelity_with_pure, ion_ion_singlet, ion_photon_state, werner_state};

    const H: [C64; 2] = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    const V: [C64; 2] = [C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
    const UP: [C64; 2] = H;

    fn swap() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
        ])
    }

    #[test]
    fn effect_closed_form() {
        // E = (I − μ SWAP)/2
        for mu in [0.0, 0.3, 0.81, 0.97, 1.0] {
            let e = cross_port_effect(mu);
            let expected = (&ComplexMatrix::identity(4) - &swap().scale_re(mu)).scale_re(0.5);
            assert!((&e - &expected).frobenius_norm() < 1e-14, "mu = {mu}");
        }
    }

    #[test]
    fn ideal_herald_gives_singlet() {
        let r = beamsplitter_coincidence(&ideal_joint_source(), &InterferometerModel::ideal()).unwrap();
        assert!((r.success_probability - 0.25).abs() < 1e-14);
        let f = fidelity_with_pure(&r.conditioned_state, &ion_ion_singlet()).unwrap();
        assert!((f - 1.0).abs() < 1e-10);
        assert_eq!(r.false_herald_fraction, 0.0);
    }

    #[test]
    fn hong_ou_mandel_bunching() {
        let joint = product_source(UP, H, UP, H).unwrap();
        let r = beamsplitter_coincidence(&joint, &InterferometerModel::ideal());
        assert!(matches!(r, Err(Error::NoHeraldSupport(_))));
        let e = cross_port_effect(1.0);
        let hh = [re(1.0), re(0.0), re(0.0), re(0.0)];
        assert!(e.expectation(&hh).re.abs() < 1e-15);
    }

    #[test]
    fn distinguishable_photons_split_half_the_time() {
        let model = InterferometerModel::ideal().with_mode_overlap(0.0).unwrap();
        for (pa, pb) in [(H, H), (H, V), (V, V)] {
            let joint = product_source(UP, pa, UP, pb).unwrap();
            let r = beamsplitter_coincidence(&joint, &model).unwrap();
            assert!((r.success_probability - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn efficiency_enters_squared() {
        let model = InterferometerModel::ideal().with_pmt_efficiency(0.15).unwrap();
        let r = beamsplitter_coincidence(&ideal_joint_source(), &model).unwrap();
        assert!((r.success_probability - 0.25 * 0.0225).abs() < 1e-15);
    }

    #[test]
    fn success_nondecreasing_in_efficiency() {
        let model = InterferometerModel::new(0.9, 0.0, 3.0, 50.0).unwrap();
        let joint = ideal_joint_source();
        let mut last = 0.0;
        for i in 1..=50 {
            let m = model.with_pmt_efficiency(i as f64 / 50.0).unwrap();
            let p = beamsplitter_coincidence(&joint, &m).unwrap().success_probability;
            assert!(p >= last);
            last = p;
        }
    }

    #[test]
    fn herald_probability_bounded_by_half() {
        let noisy = werner_state(0.3).unwrap();
        for mu in [0.0, 0.5, 1.0] {
            let model = InterferometerModel::ideal().with_mode_overlap(mu).unwrap();
            for joint in [
                JointSourceState::from_sources(&noisy, &noisy).unwrap(),
                ideal_joint_source(),
                product_source(UP, H, UP, V).unwrap(),
            ] {
                let r = beamsplitter_coincidence(&joint, &model).unwrap();
                assert!(r.success_probability <= 0.5 + 1e-14);
                assert!((r.conditioned_state.matrix().trace().re - 1.0).abs() < 1e-9);
            }
        }
        // orthogonal polarizations are distinguishable and split half the time
        let r = beamsplitter_coincidence(&product_source(UP, H, UP, V).unwrap(), &InterferometerModel::ideal()).unwrap();
        assert!((r.success_probability - 0.5).abs() < 1e-14);
        let r = beamsplitter_coincidence(&ideal_joint_source(), &InterferometerModel::ideal()).unwrap();
        assert!(r.success_probability <= 0.25 + 1e-14);
    }

    #[test]
    fn exchange_symmetry() {
        let a = werner_state(0.8).unwrap();
        let b = ion_photon_state().to_density();
        let model = InterferometerModel::new(0.9, 0.5, 0.0, 50.0).unwrap();
        let ab = beamsplitter_coincidence(&JointSourceState::from_sources(&a, &b).unwrap(), &model).unwrap();
        let ba = beamsplitter_coincidence(&JointSourceState::from_sources(&b, &a).unwrap(), &model).unwrap();
        let swapped = ba.conditioned_state.permute_qubits(&[1, 0]).unwrap();
        assert!((swapped.matrix() - ab.conditioned_state.matrix()).frobenius_norm() < 1e-12);
        assert!((ab.success_probability - ba.success_probability).abs() < 1e-15);
    }

    #[test]
    fn perfect_overlap_matches_singlet_projection() {
        let a = werner_state(0.9).unwrap().mix(&ion_photon_state().to_density(), 0.5).unwrap();
        let b = ion_photon_state().to_density().mix(&DensityMatrix::maximally_mixed(2), 0.2).unwrap();
        let herald = beamsplitter_coincidence(&JointSourceState::from_sources(&a, &b).unwrap(), &InterferometerModel::ideal()).unwrap();
        let predicted = predict_ionion_from_ionphoton(&a, &b).unwrap();
        assert!((herald.conditioned_state.matrix() - predicted.matrix()).frobenius_norm() < 1e-12);
    }

    #[test]
    fn dark_count_probabilities() {
        let quiet = InterferometerModel::ideal();
        assert_eq!(false_herald_probability(&quiet, 0.3), 0.0);
        let dark = InterferometerModel::new(0.97, 0.15, 3.0, 50.0).unwrap();
        let d = dark.dark_click_probability();
        assert!((d - 1.5e-7).abs() < 1e-13);
        assert!((false_herald_probability(&dark, 0.0) - 2.25e-14).abs() < 1e-19);
        let p = false_herald_probability(&dark, 3.1e-4);
        assert!((p - 4.65e-11).abs() < 1e-13, "{p}");
    }

    #[test]
    fn false_heralds_mix_in_background() {
        let model = InterferometerModel::new(1.0, 1.0, 1e5, 50.0).unwrap();
        let r = herald_with_arrival(&ideal_joint_source(), &model, 0.01).unwrap();
        assert!(r.false_herald_fraction > 0.0 && r.false_herald_fraction < 1.0);
        let f = fidelity_with_pure(&r.conditioned_state, &ion_ion_singlet()).unwrap();
        let expected = 1.0 - r.false_herald_fraction * 0.75;
        assert!((f - expected).abs() < 1e-12);
    }

    #[test]
    fn predicted_state_of_ideal_sources() {
        let src = ion_photon_state().to_density();
        let out = predict_ionion_from_ionphoton(&src, &src).unwrap();
        assert!((fidelity_with_pure(&out, &ion_ion_singlet()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(InterferometerModel::new(1.2, 0.5, 0.0, 50.0).is_err());
        assert!(InterferometerModel::new(1.0, 0.5, -1.0, 50.0).is_err());
        assert!(InterferometerModel::new(1.0, 0.5, 0.0, 0.0).is_err());
        assert!(JointSourceState::new(DensityMatrix::maximally_mixed(2)).is_err());
        let json = r#"{"mode_overlap":0.97,"pmt_efficiency":0.15,"dark_rate_hz":3.0,"coincidence_window_ns":50.0}"#;
        let m: InterferometerModel = serde_json::from_str(json).unwrap();
        assert_eq!(serde_json::to_string(&m).unwrap(), json);
    }
}
