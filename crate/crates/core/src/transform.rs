//! The `H`-equation and the coefficient transformation that removes the
//! cost cross term.

use alloc::vec::Vec;

use crate::error::Result;
use crate::linalg::{self, Matrix};
use crate::model::TreeProblem;
use crate::tree::AdaptedProcess;

/// `H_0..H_N` plus the barred and hatted coefficients.
#[derive(Clone, Debug)]
pub struct TransformedCoefficients {
    /// `H_0 = G0`, `H_{k+1} = AᵀHA + (AᵀHB)R⁻¹(BᵀHA)`; length `N + 1`.
    pub h: Vec<Matrix>,
    /// `R_k⁻¹`.
    pub r_inv: Vec<Matrix>,
    /// `C̄ = C − BR⁻¹(BᵀHA + S)`.
    pub cbar: Vec<Matrix>,
    /// `Q̄ = Q − SᵀR⁻¹S`.
    pub qbar: Vec<Matrix>,
    /// `R̄ = R + BᵀHB`.
    pub rbar: Vec<Matrix>,
    pub rbar_inv: Vec<Matrix>,
    /// `η̄ = η − (AᵀHB + Sᵀ)R⁻¹ρ + AᵀHq`.
    pub etabar: AdaptedProcess,
    /// `ρ̄ = ρ + BᵀHq`.
    pub rhobar: AdaptedProcess,
    /// `Q̂ = Q − SᵀR⁻¹S + (AᵀHB)R⁻¹(BᵀHA)`.
    pub qhat: Vec<Matrix>,
    /// `Ŝ = −BᵀHA`.
    pub shat: Vec<Matrix>,
    /// `η̂ = η − (AᵀHB + Sᵀ)R⁻¹ρ`.
    pub etahat: AdaptedProcess,
    /// Asymmetry of each `H_{k+1}` before symmetrization.
    pub h_asymmetry: Vec<f64>,
}

/// Forward `H` recursion.
pub fn solve_h(problem: &TreeProblem) -> Result<(Vec<Matrix>, Vec<f64>)> {
    let spec = &problem.spec;
    let mut h = Vec::with_capacity(spec.horizon + 1);
    let mut asym = Vec::with_capacity(spec.horizon);
    h.push(spec.g0.clone());
    for k in 0..spec.horizon {
        let (a, b) = (&spec.a[k], &spec.b[k]);
        let r_inv = linalg::spd_inverse(&spec.r_cost[k], "R", k)?;
        let hk = &h[k];
        let bha = b.transpose() * hk * a;
        let next = a.transpose() * hk * a + bha.transpose() * r_inv * &bha;
        asym.push(linalg::relative_asymmetry(&next));
        h.push(linalg::symmetrize(&next));
    }
    Ok((h, asym))
}

/// Builds all transformed coefficients from `H`.
#[allow(clippy::needless_range_loop)]
pub fn transform_coefficients(problem: &TreeProblem) -> Result<TransformedCoefficients> {
    let spec = &problem.spec;
    let big_n = spec.horizon;
    let (h, h_asymmetry) = solve_h(problem)?;

    let mut r_inv = Vec::with_capacity(big_n);
    let mut cbar = Vec::with_capacity(big_n);
    let mut qbar = Vec::with_capacity(big_n);
    let mut rbar = Vec::with_capacity(big_n);
    let mut rbar_inv = Vec::with_capacity(big_n);
    let mut qhat = Vec::with_capacity(big_n);
    let mut shat = Vec::with_capacity(big_n);
    let mut etabar = Vec::with_capacity(big_n);
    let mut rhobar = Vec::with_capacity(big_n);
    let mut etahat = Vec::with_capacity(big_n);

    for k in 0..big_n {
        let (a, b, c) = (&spec.a[k], &spec.b[k], &spec.c[k]);
        let (q, s, r) = (&spec.q_cost[k], &spec.s_cost[k], &spec.r_cost[k]);
        let hk = &h[k];
        let ri = linalg::spd_inverse(r, "R", k)?;
        let bha = b.transpose() * hk * a;
        let aht = hk * a;

        let qb = linalg::symmetrize(&(q - s.transpose() * &ri * s));
        let rb = linalg::symmetrize(&(r + b.transpose() * hk * b));
        let rbi = linalg::spd_inverse(&rb, "R̄", k)?;
        cbar.push(c - b * &ri * (&bha + s));
        qhat.push(linalg::symmetrize(&(&qb + bha.transpose() * &ri * &bha)));
        shat.push(-&bha);

        // η̂ = η − (AᵀHB + Sᵀ)R⁻¹ρ, adapted through ρ
        let eta_map = (bha.transpose() + s.transpose()) * &ri;
        let eh = problem.eta.at(k) - &eta_map * problem.rho.at(k);
        etabar.push(&eh + aht.transpose() * problem.q.at(k));
        etahat.push(eh);
        rhobar.push(problem.rho.at(k) + b.transpose() * hk * problem.q.at(k));

        r_inv.push(ri);
        qbar.push(qb);
        rbar.push(rb);
        rbar_inv.push(rbi);
    }

    let (n, m) = (spec.state_dim, spec.control_dim);
    Ok(TransformedCoefficients {
        h,
        r_inv,
        cbar,
        qbar,
        rbar,
        rbar_inv,
        etabar: AdaptedProcess::from_levels_unchecked(n, 0, etabar),
        rhobar: AdaptedProcess::from_levels_unchecked(m, 0, rhobar),
        qhat,
        shat,
        etahat: AdaptedProcess::from_levels_unchecked(n, 0, etahat),
        h_asymmetry,
    })
}

/// Largest residual of the algebraic identities linking the original
/// and the transformed cost:
///
/// * `Q̂ + AᵀHA − H_{k+1} = Q̄`
/// * `Ŝ + BᵀHA = 0`
/// * `R + BᵀHB = R̄`
/// * `η̂ + AᵀHq = η̄`
/// * `ρ + BᵀHq = ρ̄`
pub fn cancellation_residual(problem: &TreeProblem, tc: &TransformedCoefficients) -> f64 {
    let spec = &problem.spec;
    let mut worst = 0.0_f64;
    // Each identity is measured relative to its largest term.
    let mut track = |terms: &[Matrix], expected: &Matrix| {
        let sum = terms.iter().fold(-expected.clone(), |acc, t| acc + t);
        let scale = terms.iter().fold(expected.amax(), |s, t| s.max(t.amax()));
        worst = worst.max(sum.amax() / scale.max(1.0));
    };
    for k in 0..spec.horizon {
        let (a, b) = (&spec.a[k], &spec.b[k]);
        let hk = &tc.h[k];
        track(&[tc.qhat[k].clone(), a.transpose() * hk * a], &(&tc.h[k + 1] + &tc.qbar[k]));
        track(&[tc.shat[k].clone(), b.transpose() * hk * a], &Matrix::zeros(b.ncols(), a.ncols()));
        track(&[spec.r_cost[k].clone(), b.transpose() * hk * b], &tc.rbar[k]);
        track(&[tc.etahat.at(k).clone(), a.transpose() * hk * problem.q.at(k)], tc.etabar.at(k));
        track(&[problem.rho.at(k).clone(), b.transpose() * hk * problem.q.at(k)], tc.rhobar.at(k));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::example::example_spec;
    use crate::model::InputProcess;

    #[test]
    fn h_starts_at_g0_and_stays_symmetric() {
        let p = TreeProblem::new(&example_spec()).unwrap();
        let (h, asym) = solve_h(&p).unwrap();
        assert_eq!(h.len(), 5);
        assert_eq!(h[0], p.spec.g0);
        assert!(h.iter().all(|m| linalg::asymmetry(m) == 0.0));
        assert!(asym.iter().all(|&a| a < 1e-14));
        assert!(h.iter().all(|m| linalg::is_psd(m, 1e-10)));
    }

    #[test]
    fn zero_g0_gives_zero_h() {
        let mut spec = example_spec();
        spec.g0 = Matrix::zeros(3, 3);
        let p = TreeProblem::new(&spec).unwrap();
        let (h, _) = solve_h(&p).unwrap();
        assert!(h.iter().all(|m| m.amax() == 0.0));
    }

    #[test]
    fn data_free_transform_collapses() {
        let mut spec = example_spec();
        spec.q = InputProcess::zeros(3);
        spec.rho = InputProcess::zeros(2);
        let p = TreeProblem::new(&spec).unwrap();
        let tc = transform_coefficients(&p).unwrap();
        assert_eq!(tc.rhobar.max_abs(), 0.0);
        assert_eq!(tc.etabar, p.eta);
    }

    #[test]
    fn identities_and_rbar_positivity() {
        let p = TreeProblem::new(&example_spec()).unwrap();
        let tc = transform_coefficients(&p).unwrap();
        assert!(cancellation_residual(&p, &tc) < 1e-12);
        for rb in &tc.rbar {
            assert!(linalg::min_eigenvalue(rb) > 0.0);
        }
        for qb in &tc.qbar {
            assert!(linalg::is_psd(qb, 1e-10));
        }
    }
}
