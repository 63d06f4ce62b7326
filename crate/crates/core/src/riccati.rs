//! Backward Riccati recursion that decouples the Hamiltonian system
//! through `y = −Σx + φ`.
//!
//! Both solver routes share one recursion of the form
//!
//! ```text
//! Σ_N = 0,   Σ_k = F_k Γ_k F_kᵀ + L_k Σ_{k+1} L_kᵀ + P_k,
//! Θ_k = I + W_k Σ_{k+1},   Γ_k = Σ_{k+1} Θ_k⁻¹,
//! ```
//!
//! where the transformed route uses `F = A`, `W = Q̄`, `P = B R̄⁻¹ Bᵀ` and
//! no `L` term, and the decoupled route uses `F = A − B R⁻¹ S`, `W = Q̄`,
//! `P = B R⁻¹ Bᵀ`, `L = C`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, Factor, Matrix};

/// Per-step coefficients of one backward step.
#[derive(Clone, Debug)]
pub struct RiccatiCoefficients<'a> {
    pub f: &'a Matrix,
    pub w: &'a Matrix,
    pub p: &'a Matrix,
    pub l: Option<&'a Matrix>,
}

/// Output of one backward step.
#[derive(Clone, Debug)]
pub struct RiccatiStep {
    pub sigma: Matrix,
    /// Factor of `Θ = I + WΣ'`.
    pub theta: Factor,
    /// Factor of `Θᵀ = I + Σ'W`.
    pub theta_t: Factor,
    /// `Σ'Θ⁻¹`, symmetrized.
    pub gamma: Matrix,
    /// Relative asymmetry of `Σ'Θ⁻¹` as computed.
    pub gamma_asymmetry: f64,
    /// Relative asymmetry of `Σ_k` before symmetrization.
    pub sigma_asymmetry: f64,
}

/// One backward step from `Σ_{k+1}` to `Σ_k`.
pub fn riccati_step(coef: &RiccatiCoefficients<'_>, sigma_next: &Matrix, k: usize) -> Result<RiccatiStep> {
    let n = sigma_next.nrows();
    let id = Matrix::identity(n, n);
    let theta = Factor::new(&(&id + coef.w * sigma_next), "Θ", k)?;
    let theta_t = Factor::new(&(&id + sigma_next * coef.w), "Θᵀ", k)?;
    // Γ = Σ'Θ⁻¹ = (Θ⁻ᵀ Σ')ᵀ
    let gamma_raw = theta_t.solve(sigma_next).transpose();
    let gamma_asymmetry = linalg::relative_asymmetry(&gamma_raw);
    let gamma = linalg::symmetrize(&gamma_raw);

    let mut sigma = coef.f * &gamma * coef.f.transpose() + coef.p;
    if let Some(l) = coef.l {
        sigma += l * sigma_next * l.transpose();
    }
    if !linalg::all_finite(&sigma) {
        return Err(Error::Singular {
            what: "Σ",
            step: k,
            condition: f64::INFINITY,
        });
    }
    let sigma_asymmetry = linalg::relative_asymmetry(&sigma);
    Ok(RiccatiStep {
        sigma: linalg::symmetrize(&sigma),
        theta,
        theta_t,
        gamma,
        gamma_asymmetry,
        sigma_asymmetry,
    })
}

/// `Σ_0..Σ_N` with the per-step factors kept for reuse.
#[derive(Clone, Debug)]
pub struct RiccatiSolution {
    /// Length `N + 1`, `Σ_N = 0`.
    pub sigma: Vec<Matrix>,
    /// Per step `k < N`.
    pub theta: Vec<Factor>,
    pub theta_t: Vec<Factor>,
    pub gamma: Vec<Matrix>,
    pub gamma_asymmetry: Vec<f64>,
    pub sigma_asymmetry: Vec<f64>,
    /// `λ_min(Σ_k)` for every `k`.
    pub sigma_min_eigenvalue: Vec<f64>,
}

impl RiccatiSolution {
    pub fn horizon(&self) -> usize {
        self.theta.len()
    }

    pub fn theta_conditions(&self) -> Vec<f64> {
        self.theta.iter().map(Factor::condition).collect()
    }

    /// Smallest `λ_min(Σ_k) / max(1, ‖Σ_k‖)`.
    pub fn worst_scaled_min_eigenvalue(&self) -> f64 {
        self.sigma
            .iter()
            .zip(&self.sigma_min_eigenvalue)
            .map(|(s, l)| l / linalg::spectral_scale(s))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_gamma_asymmetry(&self) -> f64 {
        self.gamma_asymmetry.iter().copied().fold(0.0, f64::max)
    }
}

/// Runs the recursion; `coefficients(k)` supplies step `k`.
pub fn solve_riccati<'a>(
    n: usize,
    horizon: usize,
    mut coefficients: impl FnMut(usize) -> RiccatiCoefficients<'a>,
) -> Result<RiccatiSolution> {
    let mut sigma = alloc::vec![Matrix::zeros(n, n); horizon + 1];
    let mut steps: Vec<Option<RiccatiStep>> = (0..horizon).map(|_| None).collect();
    for k in (0..horizon).rev() {
        let step = riccati_step(&coefficients(k), &sigma[k + 1], k)?;
        sigma[k] = step.sigma.clone();
        steps[k] = Some(step);
    }
    let steps: Vec<RiccatiStep> = steps.into_iter().flatten().collect();
    let sigma_min_eigenvalue = sigma.iter().map(linalg::min_eigenvalue).collect();
    let mut theta = Vec::with_capacity(horizon);
    let mut theta_t = Vec::with_capacity(horizon);
    let mut gamma = Vec::with_capacity(horizon);
    let mut gamma_asymmetry = Vec::with_capacity(horizon);
    let mut sigma_asymmetry = Vec::with_capacity(horizon);
    for s in steps {
        theta.push(s.theta);
        theta_t.push(s.theta_t);
        gamma.push(s.gamma);
        gamma_asymmetry.push(s.gamma_asymmetry);
        sigma_asymmetry.push(s.sigma_asymmetry);
    }
    Ok(RiccatiSolution {
        sigma,
        theta,
        theta_t,
        gamma,
        gamma_asymmetry,
        sigma_asymmetry,
        sigma_min_eigenvalue,
    })
}

/// Compares `(I + WΣ)⁻¹` with the inversion-lemma form
/// `I − D(I + DᵀΣD)⁻¹DᵀΣ`, `W = DDᵀ`. Returns the max-abs difference.
pub fn inversion_lemma_gap(sigma: &Matrix, w: &Matrix) -> Result<f64> {
    let n = sigma.nrows();
    let id = Matrix::identity(n, n);
    let direct = Factor::new(&(&id + w * sigma), "Θ", 0)?.solve(&id);
    let d = linalg::psd_sqrt(w);
    let inner = Factor::new(&(&id + d.transpose() * sigma * &d), "I + DᵀΣD", 0)?;
    let lemma = &id - &d * inner.solve(&(d.transpose() * sigma));
    Ok((direct - lemma).amax())
}
