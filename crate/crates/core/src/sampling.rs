//! Seeded random generators for observables and unitaries. Draws are
//! reproducible across platforms (ChaCha stream cipher RNG), which keeps
//! verification reports byte-identical for a fixed seed.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bell::{ghz_state, Realization};
use crate::error::Result;
use crate::linalg::{CMatrix, CVector};
use crate::observables::{omega_int, QuditObservable};
use crate::scenario::BellScenario;

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Haar-ish random unitary: QR of a complex Gaussian matrix via modified
/// Gram-Schmidt. Good enough for conjugation tests; no distribution claims.
pub fn random_unitary(dim: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let mut cols: Vec<CVector> = Vec::with_capacity(dim);
    for _ in 0..dim {
        let mut v = CVector::new(
            (0..dim)
                .map(|_| Complex64::new(standard_normal(rng), standard_normal(rng)))
                .collect(),
        );
        for c in &cols {
            let overlap = c.dot(&v);
            v = v.sub(&c.scaled(overlap));
        }
        cols.push(v.normalized());
    }
    CMatrix::from_fn(dim, dim, |r, c| cols[c].entries()[r])
}

/// Random d-outcome observable: a random unitary basis with eigenvalues
/// drawn uniformly (with repetition) from the d-th roots of unity. The
/// spectrum is exact by construction, so the observable passes validation
/// at machine precision.
pub fn random_root_of_unity_observable(d: usize, rng: &mut ChaCha8Rng) -> QuditObservable {
    let q = random_unitary(d, rng);
    let phases: Vec<Complex64> = (0..d)
        .map(|_| omega_int(d, rng.gen_range(0..d) as i64))
        .collect();
    let mut a = CMatrix::zeros(d, d);
    for r in 0..d {
        for c in 0..d {
            let mut acc = Complex64::new(0.0, 0.0);
            for l in 0..d {
                acc += q[(r, l)] * phases[l] * q[(c, l)].conj();
            }
            a[(r, c)] = acc;
        }
    }
    QuditObservable::new(a, d, "random root-of-unity draw").expect("exact spectrum by construction")
}

/// GHZ state plus independently drawn random observables for every
/// (party, input).
pub fn random_realization(scenario: &BellScenario, seed: u64) -> Result<Realization> {
    let mut rng = seeded_rng(seed);
    let d = scenario.outcomes();
    let observables = (0..scenario.parties())
        .map(|_| {
            (0..scenario.inputs())
                .map(|_| random_root_of_unity_observable(d, &mut rng))
                .collect()
        })
        .collect();
    Realization::new(*scenario, ghz_state(scenario.parties(), d)?, observables)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::check_root_of_unity_observable;

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = seeded_rng(1);
        let u = random_unitary(4, &mut rng);
        let res = u
            .adjoint()
            .matmul(&u)
            .sub(&CMatrix::identity(4))
            .frobenius_norm();
        assert!(res < 1e-12);
    }

    #[test]
    fn random_observable_is_valid() {
        let mut rng = seeded_rng(2);
        for d in 2..=5 {
            let a = random_root_of_unity_observable(d, &mut rng);
            let rep = check_root_of_unity_observable(a.matrix(), d, 1e-12).unwrap();
            assert!(rep.is_unitary && rep.order_d_holds);
        }
    }

    #[test]
    fn draws_are_reproducible() {
        let a = random_root_of_unity_observable(3, &mut seeded_rng(9));
        let b = random_root_of_unity_observable(3, &mut seeded_rng(9));
        assert!(a.matrix().sub(b.matrix()).frobenius_norm() == 0.0);
    }
}
