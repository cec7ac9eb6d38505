//! Microwave analysis rotations and fluorescence state detection.
//!
//! An analysis setting `(θ, φ)` maps `cos(θ/2)|1,1⟩ + sin(θ/2)e^{iφ}|1,−1⟩` to
//! the bright state and its orthogonal complement to the dark state. The same
//! map describes the wave-plate/polarizer analysis of a photon qubit with
//! `H` in place of `|1,1⟩`.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmat::{kron, re, ComplexMatrix, C64};
use crate::states::DensityMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationSetting {
    theta: f64,
    phi: f64,
}

fn canonical_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

impl RotationSetting {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() {
            return Err(Error::InvalidState("non-finite analysis angle".into()));
        }
        Ok(Self {
            theta: canonical_angle(theta),
            phi: canonical_angle(phi),
        })
    }

    /// Bell-test setting: phase held at zero.
    pub fn polar(theta: f64) -> Self {
        Self::new(theta, 0.0).expect("finite angle")
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// The state reported as bright.
    pub fn bright_vector(&self) -> [C64; 2] {
        let (s, co) = (self.theta / 2.0).sin_cos();
        [re(co), C64::from_polar(s, self.phi)]
    }

    /// The state reported as dark.
    pub fn dark_vector(&self) -> [C64; 2] {
        let (s, co) = (self.theta / 2.0).sin_cos();
        [-C64::from_polar(s, -self.phi), re(co)]
    }
}

/// Unitary taking the setting's bright vector to basis index 0 and the dark
/// vector to index 1.
pub fn rotation_map(s: RotationSetting) -> ComplexMatrix {
    let b = s.bright_vector();
    let d = s.dark_vector();
    ComplexMatrix::from_rows(&[&[b[0].conj(), b[1].conj()], &[d[0].conj(), d[1].conj()]])
}

/// Symmetric readout error: each result is reported correctly with probability `p_correct`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DetectionModelRepr", into = "DetectionModelRepr")]
pub struct DetectionModel {
    p_correct: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectionModelRepr {
    p_correct: f64,
}

impl TryFrom<DetectionModelRepr> for DetectionModel {
    type Error = Error;

    fn try_from(r: DetectionModelRepr) -> Result<Self> {
        DetectionModel::new(r.p_correct)
    }
}

impl From<DetectionModel> for DetectionModelRepr {
    fn from(d: DetectionModel) -> Self {
        Self { p_correct: d.p_correct }
    }
}

impl Default for DetectionModel {
    fn default() -> Self {
        Self::ideal()
    }
}

impl DetectionModel {
    pub fn new(p_correct: f64) -> Result<Self> {
        if !(0.5..=1.0).contains(&p_correct) {
            return Err(Error::OutOfRange {
                name: "p_correct",
                value: p_correct,
                range: "[0.5, 1]",
            });
        }
        Ok(Self { p_correct })
    }

    pub fn ideal() -> Self {
        Self { p_correct: 1.0 }
    }

    pub fn p_correct(&self) -> f64 {
        self.p_correct
    }

    /// `(2p − 1)`: the factor by which every single-qubit expectation value shrinks.
    pub fn contrast(&self) -> f64 {
        2.0 * self.p_correct - 1.0
    }

    /// `P(reported | true)`, outcomes indexed bright = 0, dark = 1.
    pub fn confusion(&self, reported: usize, actual: usize) -> f64 {
        if reported == actual {
            self.p_correct
        } else {
            1.0 - self.p_correct
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Bright,
    Dark,
}

impl Outcome {
    pub fn index(self) -> usize {
        match self {
            Outcome::Bright => 0,
            Outcome::Dark => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Outcome::Bright
        } else {
            Outcome::Dark
        }
    }
}

/// Joint outcome distribution in the order `[bb, bd, db, dd]` (first letter: qubit a).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeProbs(pub [f64; 4]);

impl OutcomeProbs {
    pub fn get(&self, a: Outcome, b: Outcome) -> f64 {
        self.0[joint_index(a, b)]
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

pub fn joint_index(a: Outcome, b: Outcome) -> usize {
    2 * a.index() + b.index()
}

pub fn split_index(i: usize) -> (Outcome, Outcome) {
    (Outcome::from_index(i / 2), Outcome::from_index(i % 2))
}

/// Counts in the same `[bb, bd, db, dd]` order.
pub type OutcomeCounts = [u64; 4];

pub fn outcome_probabilities(
    rho: &DensityMatrix,
    s_a: RotationSetting,
    s_b: RotationSetting,
    det: DetectionModel,
) -> Result<OutcomeProbs> {
    outcome_probabilities_with(rho, s_a, s_b, det, det)
}

/// As [`outcome_probabilities`] with separate readout models per qubit.
pub fn outcome_probabilities_with(
    rho: &DensityMatrix,
    s_a: RotationSetting,
    s_b: RotationSetting,
    det_a: DetectionModel,
    det_b: DetectionModel,
) -> Result<OutcomeProbs> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch("outcome probabilities need a two-qubit state".into()));
    }
    let u = kron(&rotation_map(s_a), &rotation_map(s_b));
    let rotated = rho.matrix().conjugate_by(&u);
    let ideal: Vec<f64> = (0..4).map(|i| rotated[(i, i)].re.max(0.0)).collect();
    let mut probs = [0.0; 4];
    for (rep, slot) in probs.iter_mut().enumerate() {
        let (ra, rb) = (rep / 2, rep % 2);
        *slot = (0..4)
            .map(|act| det_a.confusion(ra, act / 2) * det_b.confusion(rb, act % 2) * ideal[act])
            .sum();
    }
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(OutcomeProbs(probs))
}

/// Measurement effects `E_o` with `p_o = tr(E_o ρ)`, readout confusion folded in.
pub fn effects(
    s_a: RotationSetting,
    s_b: RotationSetting,
    det_a: DetectionModel,
    det_b: DetectionModel,
) -> [ComplexMatrix; 4] {
    let proj = |s: RotationSetting| {
        [
            ComplexMatrix::projector(&s.bright_vector()),
            ComplexMatrix::projector(&s.dark_vector()),
        ]
    };
    let noisy = |s: RotationSetting, d: DetectionModel| {
        let [pb, pd] = proj(s);
        [
            &pb.scale_re(d.confusion(0, 0)) + &pd.scale_re(d.confusion(0, 1)),
            &pb.scale_re(d.confusion(1, 0)) + &pd.scale_re(d.confusion(1, 1)),
        ]
    };
    let ea = noisy(s_a, det_a);
    let eb = noisy(s_b, det_b);
    std::array::from_fn(|i| kron(&ea[i / 2], &eb[i % 2]))
}

/// Multinomial sample of `n_events` joint outcomes.
pub fn sample_outcomes(probs: &OutcomeProbs, n_events: u64, rng: &mut impl Rng) -> OutcomeCounts {
    let mut counts = [0; 4];
    let mut remaining = n_events;
    let mut mass = 1.0;
    for i in 0..3 {
        if remaining == 0 {
            break;
        }
        let p = if mass > 0.0 {
            (probs.0[i] / mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let k = Binomial::new(remaining, p).expect("valid binomial").sample(rng);
        counts[i] = k;
        remaining -= k;
        mass -= probs.0[i];
    }
    counts[3] = remaining;
    counts
}

/// One joint outcome index drawn from `probs`.
pub fn sample_one(probs: &OutcomeProbs, rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.0.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // u landed in round-off above the cumulative sum
    probs.0.iter().rposition(|&p| p > 0.0).unwrap_or(3)
}

/// Analysis settings for a Pauli basis: σz has no rotation, σx is `θ = π/2`,
/// σy is `θ = π/2, φ = π/2`.
pub fn pauli_setting(basis: crate::tomo::Basis) -> RotationSetting {
    use crate::tomo::Basis;
    match basis {
        Basis::X => RotationSetting::new(PI / 2.0, 0.0),
        Basis::Y => RotationSetting::new(PI / 2.0, PI / 2.0),
        Basis::Z => RotationSetting::new(0.0, 0.0),
    }
    .expect("finite angles")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{ion_ion_singlet, werner_state, DensityMatrix};
    use crate::qmat::ComplexMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_4;

    fn singlet() -> DensityMatrix {
        ion_ion_singlet().to_density()
    }

    fn e_of(p: &OutcomeProbs) -> f64 {
        p.0[0] + p.0[3] - p.0[1] - p.0[2]
    }

    #[test]
    fn rotation_map_basis_cases() {
        let u = rotation_map(RotationSetting::polar(0.0));
        assert!((&u - &ComplexMatrix::identity(2)).frobenius_norm() < 1e-15);
        // θ = π sends |1,−1⟩ to bright
        let u = rotation_map(RotationSetting::polar(PI));
        let out = u.matvec(&[re(0.0), re(1.0)]);
        assert!((out[0].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rotation_map_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let s = RotationSetting::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)).unwrap();
            let u = rotation_map(s);
            let uu = &u.adjoint() * &u;
            assert!((&uu - &ComplexMatrix::identity(2)).frobenius_norm() < 1e-12);
            let b = u.matvec(&s.bright_vector());
            assert!((b[0].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn singlet_is_anticorrelated_in_z() {
        let z = RotationSetting::polar(0.0);
        let p = outcome_probabilities(&singlet(), z, z, DetectionModel::ideal()).unwrap();
        assert!(p.0[0].abs() < 1e-15 && p.0[3].abs() < 1e-15);
        assert!((p.0[1] - 0.5).abs() < 1e-15 && (p.0[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn singlet_correlation_closed_form() {
        let p = outcome_probabilities(
            &singlet(),
            RotationSetting::polar(PI / 2.0),
            RotationSetting::polar(FRAC_PI_4),
            DetectionModel::ideal(),
        )
        .unwrap();
        // p(b,b) = sin²((θb − θa)/2)/2
        assert!((p.0[0] - (FRAC_PI_4 / 2.0).sin().powi(2) / 2.0).abs() < 1e-12);
        assert!((e_of(&p) + FRAC_PI_4.cos()).abs() < 1e-12);

        let noisy = outcome_probabilities(
            &singlet(),
            RotationSetting::polar(PI / 2.0),
            RotationSetting::polar(FRAC_PI_4),
            DetectionModel::new(0.98).unwrap(),
        )
        .unwrap();
        assert!((e_of(&noisy) + 0.9216 * FRAC_PI_4.cos()).abs() < 1e-12);
        assert!((e_of(&noisy) + 0.6517).abs() < 1e-4);
    }

    #[test]
    fn uninformative_detection_gives_uniform() {
        let det = DetectionModel::new(0.5).unwrap();
        for rho in [singlet(), werner_state(0.3).unwrap()] {
            let p = outcome_probabilities(&rho, RotationSetting::polar(0.3), RotationSetting::polar(2.0), det).unwrap();
            for x in p.0 {
                assert!((x - 0.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn product_states_factorize() {
        let a = DensityMatrix::new(ComplexMatrix::from_real_rows(&[&[0.7, 0.2], &[0.2, 0.3]])).unwrap();
        let b = DensityMatrix::new(ComplexMatrix::from_real_rows(&[&[0.4, -0.1], &[-0.1, 0.6]])).unwrap();
        let sa = RotationSetting::new(1.1, 0.4).unwrap();
        let sb = RotationSetting::new(2.3, 5.0).unwrap();
        let det = DetectionModel::new(0.9).unwrap();
        let p = outcome_probabilities(&a.tensor(&b), sa, sb, det).unwrap();
        let pa = outcome_probabilities(&a.tensor(&DensityMatrix::maximally_mixed(1)), sa, sb, det).unwrap();
        let pb = outcome_probabilities(&DensityMatrix::maximally_mixed(1).tensor(&b), sa, sb, det).unwrap();
        let ma = [pa.0[0] + pa.0[1], pa.0[2] + pa.0[3]];
        let mb = [pb.0[0] + pb.0[2], pb.0[1] + pb.0[3]];
        for i in 0..4 {
            assert!((p.0[i] - ma[i / 2] * mb[i % 2]).abs() < 1e-12);
        }
    }

    #[test]
    fn effects_match_probabilities() {
        let rho = werner_state(0.8).unwrap();
        let sa = RotationSetting::new(0.9, 1.3).unwrap();
        let sb = RotationSetting::new(2.0, 0.2).unwrap();
        let (da, db) = (DetectionModel::new(0.97).unwrap(), DetectionModel::new(0.9).unwrap());
        let p = outcome_probabilities_with(&rho, sa, sb, da, db).unwrap();
        let e = effects(sa, sb, da, db);
        for i in 0..4 {
            let q = (&e[i] * rho.matrix()).trace().re;
            assert!((p.0[i] - q).abs() < 1e-12);
        }
    }

    #[test]
    fn angle_canonicalization() {
        let s = RotationSetting::new(-PI / 2.0, 7.0 * PI).unwrap();
        assert!((s.theta() - 1.5 * PI).abs() < 1e-12);
        assert!((s.phi() - PI).abs() < 1e-12);
        assert!(RotationSetting::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn detection_model_range() {
        assert!(DetectionModel::new(0.49).is_err());
        assert!(DetectionModel::new(1.01).is_err());
        let d: DetectionModel = serde_json::from_str(r#"{"p_correct":0.98}"#).unwrap();
        assert_eq!(d.p_correct(), 0.98);
        assert!(serde_json::from_str::<DetectionModel>(r#"{"p_correct":0.3}"#).is_err());
    }

    #[test]
    fn sampling_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(sample_outcomes(&OutcomeProbs([0.25; 4]), 0, &mut rng), [0; 4]);
        assert_eq!(sample_outcomes(&OutcomeProbs([1.0, 0.0, 0.0, 0.0]), 100, &mut rng), [100, 0, 0, 0]);
        assert_eq!(sample_outcomes(&OutcomeProbs([0.0, 0.0, 0.0, 1.0]), 7, &mut rng), [0, 0, 0, 7]);
    }

    #[test]
    fn sampling_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 1_000_000u64;
        let counts = sample_outcomes(&OutcomeProbs([0.25; 4]), n, &mut rng);
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for k in counts {
            assert!((k as f64 - 250_000.0).abs() < 5.0 * sigma);
        }
        assert_eq!(counts.iter().sum::<u64>(), n);
    }

    #[test]
    fn sampling_is_reproducible() {
        let p = OutcomeProbs([0.1, 0.2, 0.3, 0.4]);
        let a = sample_outcomes(&p, 1000, &mut ChaCha8Rng::seed_from_u64(9));
        let b = sample_outcomes(&p, 1000, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    proptest::proptest! {
        #[test]
        fn probabilities_normalized_and_periodic(
            ta in -7.0..7.0f64, pa in -7.0..7.0f64, tb in -7.0..7.0f64, pb in -7.0..7.0f64,
            w in 0.0..1.0f64, pc in 0.5..1.0f64,
        ) {
            let rho = werner_state(w).unwrap();
            let det = DetectionModel::new(pc).unwrap();
            let sa = RotationSetting::new(ta, pa).unwrap();
            let sb = RotationSetting::new(tb, pb).unwrap();
            let p = outcome_probabilities(&rho, sa, sb, det).unwrap();
            proptest::prop_assert!((p.total() - 1.0).abs() < 1e-12);
            let shifted = outcome_probabilities(&rho, RotationSetting::new(ta + TAU, pa).unwrap(), sb, det).unwrap();
            for i in 0..4 {
                proptest::prop_assert!((p.0[i] - shifted.0[i]).abs() < 1e-12);
            }
        }
    }
}
