//! Seeded generator of admissible random instances, for tests and the
//! CLI's self-checks.

use alloc::vec::Vec;

use rand::Rng;

use crate::linalg::{self, Matrix, Vector};
use crate::model::{InputProcess, ProblemSpec, TerminalValue};
use crate::tree::atoms_at;

/// Shape of a random instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RandomShape {
    pub horizon: usize,
    pub state_dim: usize,
    pub control_dim: usize,
    /// Draw `q, η, ρ, ξ` independently on every atom.
    pub path_dependent: bool,
}

fn uniform<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| scale * rng.random_range(-1.0..=1.0))
}

/// A random instance satisfying the standing assumptions:
/// `R = LLᵀ + ½I`, `Q = SᵀR⁻¹S + ½MMᵀ`, `G0 = GGᵀ`.
pub fn random_spec<R: Rng>(rng: &mut R, shape: RandomShape) -> ProblemSpec {
    let RandomShape {
        horizon: big_n,
        state_dim: n,
        control_dim: m,
        path_dependent,
    } = shape;
    let mut a = Vec::with_capacity(big_n);
    let mut b = Vec::with_capacity(big_n);
    let mut c = Vec::with_capacity(big_n);
    let mut q_cost = Vec::with_capacity(big_n);
    let mut s_cost = Vec::with_capacity(big_n);
    let mut r_cost = Vec::with_capacity(big_n);
    for _ in 0..big_n {
        a.push(uniform(rng, n, n, 1.0));
        b.push(uniform(rng, n, m, 1.0));
        c.push(uniform(rng, n, n, 0.7));
        let l = uniform(rng, m, m, 1.0);
        let r = linalg::symmetrize(&(&l * l.transpose() + Matrix::identity(m, m) * 0.5));
        let s = uniform(rng, m, n, 1.0);
        let lq = uniform(rng, n, n, 1.0);
        let r_inv = linalg::spd_inverse(&r, "R", 0).expect("R is positive definite");
        let q = linalg::symmetrize(&(s.transpose() * r_inv * &s + &lq * lq.transpose() * 0.5));
        r_cost.push(r);
        s_cost.push(s);
        q_cost.push(q);
    }
    let g = uniform(rng, n, n, 1.0);
    let g0 = linalg::symmetrize(&(&g * g.transpose()));

    let mut data = |dim: usize| -> InputProcess {
        if path_dependent {
            InputProcess::Adapted((0..big_n).map(|k| uniform(rng, dim, atoms_at(k), 1.0)).collect())
        } else {
            InputProcess::PerStep(
                (0..big_n)
                    .map(|_| Vector::from_fn(dim, |_, _| rng.random_range(-1.0..=1.0)))
                    .collect(),
            )
        }
    };
    let q = data(n);
    let eta = data(n);
    let rho = data(m);
    let xi = if path_dependent {
        TerminalValue::Adapted(uniform(rng, n, atoms_at(big_n), 1.0))
    } else {
        TerminalValue::Constant(Vector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0)))
    };
    ProblemSpec {
        horizon: big_n,
        state_dim: n,
        control_dim: m,
        a,
        b,
        c,
        q_cost,
        s_cost,
        r_cost,
        g0,
        q,
        eta,
        rho,
        xi,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_spec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_specs_are_admissible_and_seeded() {
        for seed in 0..10 {
            let shape = RandomShape {
                horizon: 3,
                state_dim: 3,
                control_dim: 2,
                path_dependent: seed % 2 == 0,
            };
            let s1 = random_spec(&mut ChaCha8Rng::seed_from_u64(seed), shape);
            let s2 = random_spec(&mut ChaCha8Rng::seed_from_u64(seed), shape);
            assert_eq!(s1, s2);
            assert!(validate_spec(&s1).unwrap().is_empty());
        }
    }
}
