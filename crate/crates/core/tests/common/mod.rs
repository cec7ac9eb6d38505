//! First-quantized two-boson oracle for the beamsplitter herald: each photon
//! lives in port ⊗ polarization ⊗ a two-dimensional label space where the
//! two photons' labels overlap by `√μ`.
#![allow(dead_code)]

use ionlink::qmat::{self, c, ComplexMatrix, C64};
use ionlink::states::DensityMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const SP: usize = 8; // port × pol × label

pub fn sp_index(port: usize, pol: usize, label: usize) -> usize {
    port * 4 + pol * 2 + label
}

pub fn labels(mu: f64) -> [[f64; 2]; 2] {
    [[1.0, 0.0], [mu.sqrt(), (1.0 - mu).sqrt()]]
}

/// Symmetrized two-photon state: photon a in port 0 with polarization `pa`,
/// photon b in port 1 with polarization `pb`.
pub fn two_photon(pa: usize, pb: usize, mu: f64) -> Vec<C64> {
    let l = labels(mu);
    let mut single_a = vec![c(0.0, 0.0); SP];
    let mut single_b = vec![c(0.0, 0.0); SP];
    for k in 0..2 {
        single_a[sp_index(0, pa, k)] = c(l[0][k], 0.0);
        single_b[sp_index(1, pb, k)] = c(l[1][k], 0.0);
    }
    let ab = qmat::kron_vec(&single_a, &single_b);
    let ba = qmat::kron_vec(&single_b, &single_a);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ab.iter().zip(&ba).map(|(x, y)| (x + y) * s).collect()
}

/// `(U⊗U)† (P_c⊗P_d + P_d⊗P_c) (U⊗U)` with the 50/50 splitter acting on ports.
pub fn cross_port_operator() -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let bs = ComplexMatrix::from_real_rows(&[&[s, s], &[s, -s]]);
    let u = qmat::kron(&bs, &ComplexMatrix::identity(4));
    let pc = qmat::kron(&ComplexMatrix::diag(&[1.0, 0.0]), &ComplexMatrix::identity(4));
    let pd = qmat::kron(&ComplexMatrix::diag(&[0.0, 1.0]), &ComplexMatrix::identity(4));
    let coinc = &qmat::kron(&pc, &pd) + &qmat::kron(&pd, &pc);
    let uu = qmat::kron(&u, &u);
    &(&uu.adjoint() * &coinc) * &uu
}

pub fn oracle_effect(mu: f64) -> ComplexMatrix {
    let m = cross_port_operator();
    let basis: Vec<Vec<C64>> = (0..4).map(|i| two_photon(i / 2, i % 2, mu)).collect();
    let mut e = ComplexMatrix::zeros(4, 4);
    for i in 0..4 {
        let mv = m.matvec(&basis[i]);
        for j in 0..4 {
            e[(j, i)] = basis[j].iter().zip(&mv).map(|(x, y)| x.conj() * y).sum();
        }
    }
    e
}

pub fn random_state(rng: &mut ChaCha8Rng, dim: usize) -> DensityMatrix {
    let g: Vec<C64> = (0..dim * dim)
        .map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let g = ComplexMatrix::from_vec(dim, dim, g).unwrap();
    DensityMatrix::normalized(&g * &g.adjoint()).unwrap()
}

/// Ion state heralded by effect `e`, by explicit index loops on
/// `(ion_a, photon_a, ion_b, photon_b)`.
pub fn oracle_conditioned(rho: &DensityMatrix, e: &ComplexMatrix) -> (f64, ComplexMatrix) {
    let idx = |ia: usize, pa: usize, ib: usize, pb: usize| ia * 8 + pa * 4 + ib * 2 + pb;
    let m = rho.matrix();
    let mut out = ComplexMatrix::zeros(4, 4);
    for ia in 0..2 {
        for ib in 0..2 {
            for ja in 0..2 {
                for jb in 0..2 {
                    let mut acc = c(0.0, 0.0);
                    for p in 0..4 {
                        for q in 0..4 {
                            // Tr_ph[(I ⊗ E) ρ]_{(ia ib),(ja jb)} = Σ E_{pq} ρ_{(ia q ib),(ja p jb)}
                            acc += e[(p, q)] * m[(idx(ia, q / 2, ib, q % 2), idx(ja, p / 2, jb, p % 2))];
                        }
                    }
                    out[(ia * 2 + ib, ja * 2 + jb)] = acc;
                }
            }
        }
    }
    let p = out.trace().re;
    (p, out.scale_re(1.0 / p))
}
