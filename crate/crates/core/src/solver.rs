//! End-to-end solution of the control problem on the tree.
//!
//! Two routes are available.
//!
//! * [`Route::Decoupled`] (default) decouples the original Hamiltonian
//!   system with `y = −Σx + φ` directly. Its output satisfies the
//!   stationarity condition of the original problem and its value
//!   equals the exact cost of the returned control.
//! * [`Route::Transformed`] first removes the cross term through the
//!   `H`-equation and then runs the Riccati/`φ` recursions of the
//!   transformed problem with gains `K = −R̄⁻¹Bᵀ`, `b = −R̄⁻¹ρ̄`. It is
//!   kept because its intermediate quantities are the standard
//!   published ones; its control is not optimal for the original cost
//!   in general, which the oracle reports.

use alloc::vec::Vec;

use crate::error::Result;
use crate::linalg::{self, Factor, Matrix};
use crate::model::TreeProblem;
use crate::riccati::{solve_riccati, RiccatiCoefficients, RiccatiSolution};
use crate::transform::{cancellation_residual, transform_coefficients, TransformedCoefficients};
use crate::tree::{branch, cond_drift, cond_pair, expect_inner, refine, AdaptedProcess, Level};

/// Which decoupling to use for the optimal pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Route {
    #[default]
    Decoupled,
    Transformed,
}

impl Route {
    pub fn name(self) -> &'static str {
        match self {
            Route::Decoupled => "decoupled",
            Route::Transformed => "transformed",
        }
    }
}

/// Closed-form value expressions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ValueVariant {
    /// Value of the decoupled system; equals the cost of the optimal
    /// control.
    #[default]
    Decoupled,
    /// Transformed-problem formula without the `⟨H_k q_k, q_k⟩` terms.
    Theorem,
    /// Transformed-problem formula with the `⟨H_k q_k, q_k⟩` terms.
    Derivation,
}

impl ValueVariant {
    pub const ALL: [ValueVariant; 3] = [
        ValueVariant::Decoupled,
        ValueVariant::Theorem,
        ValueVariant::Derivation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ValueVariant::Decoupled => "decoupled",
            ValueVariant::Theorem => "theorem",
            ValueVariant::Derivation => "derivation",
        }
    }
}

/// All value expressions evaluated on the same problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValueSet {
    pub decoupled: f64,
    pub theorem: f64,
    pub derivation: f64,
}

impl ValueSet {
    pub fn get(&self, v: ValueVariant) -> f64 {
        match v {
            ValueVariant::Decoupled => self.decoupled,
            ValueVariant::Theorem => self.theorem,
            ValueVariant::Derivation => self.derivation,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolveOptions {
    pub route: Route,
    pub value_variant: ValueVariant,
}

/// Coefficients of the decoupled system:
/// `F = A − BR⁻¹S`, `P = BR⁻¹Bᵀ`, `e = η − SᵀR⁻¹ρ`, `f = q − BR⁻¹ρ`.
#[derive(Clone, Debug)]
pub struct DecoupledCoefficients {
    pub f: Vec<Matrix>,
    pub p: Vec<Matrix>,
    pub e: AdaptedProcess,
    pub f_data: AdaptedProcess,
}

pub fn decoupled_coefficients(problem: &TreeProblem, tc: &TransformedCoefficients) -> DecoupledCoefficients {
    let spec = &problem.spec;
    let mut f = Vec::with_capacity(spec.horizon);
    let mut p = Vec::with_capacity(spec.horizon);
    let mut e = Vec::with_capacity(spec.horizon);
    let mut f_data = Vec::with_capacity(spec.horizon);
    for k in 0..spec.horizon {
        let (b, s, ri) = (&spec.b[k], &spec.s_cost[k], &tc.r_inv[k]);
        let bri = b * ri;
        f.push(&spec.a[k] - &bri * s);
        p.push(linalg::symmetrize(&(&bri * b.transpose())));
        e.push(problem.eta.at(k) - s.transpose() * ri * problem.rho.at(k));
        f_data.push(problem.q.at(k) - &bri * problem.rho.at(k));
    }
    DecoupledCoefficients {
        f,
        p,
        e: AdaptedProcess::from_levels_unchecked(spec.state_dim, 0, e),
        f_data: AdaptedProcess::from_levels_unchecked(spec.state_dim, 0, f_data),
    }
}

/// Riccati solution together with the matching `φ` process.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub riccati: RiccatiSolution,
    /// `φ_0..φ_N`, `φ_N = ξ`.
    pub phi: AdaptedProcess,
    /// Factor of `I + G0Σ_0`.
    pub initial: Factor,
}

/// Numerical health indicators collected along the pipeline.
#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics {
    pub theta_conditions: Vec<f64>,
    pub initial_condition: f64,
    pub sigma_min_eigenvalue: Vec<f64>,
    pub sigma_asymmetry: f64,
    pub gamma_asymmetry: f64,
    pub h_asymmetry: f64,
    pub cancellation_residual: f64,
    pub rbar_min_eigenvalue: f64,
    /// `max |x*_0 − G0 y*_0|`.
    pub boundary_residual: f64,
    /// `max |y*_N − ξ|`.
    pub terminal_residual: f64,
}

/// Complete output of [`solve`].
#[derive(Clone, Debug)]
pub struct FeedbackSolution {
    pub route: Route,
    pub coefficients: TransformedCoefficients,
    pub decoupled_coefficients: DecoupledCoefficients,
    /// Recursions of the transformed problem.
    pub transformed: Decomposition,
    /// Recursions of the decoupled original problem.
    pub decoupled: Decomposition,
    /// Adjoint `x*_0..x*_N`.
    pub x_star: AdaptedProcess,
    /// State `y*_0..y*_N`.
    pub y_star: AdaptedProcess,
    /// Control `u*_0..u*_{N−1}`.
    pub u_star: AdaptedProcess,
    /// Transformed control `ū*` (transformed route only).
    pub ubar_star: Option<AdaptedProcess>,
    /// `K_k` (m×n).
    pub gains: Vec<Matrix>,
    /// `b_k` (adapted m-vectors).
    pub offsets: AdaptedProcess,
    pub values: ValueSet,
    pub value_variant: ValueVariant,
    pub value: f64,
    pub diagnostics: Diagnostics,
}

impl FeedbackSolution {
    /// Decomposition used by the active route.
    pub fn active(&self) -> &Decomposition {
        match self.route {
            Route::Decoupled => &self.decoupled,
            Route::Transformed => &self.transformed,
        }
    }

    pub fn sigma(&self) -> &[Matrix] {
        &self.active().riccati.sigma
    }

    pub fn phi(&self) -> &AdaptedProcess {
        &self.active().phi
    }

    /// Copy with every offset `b_k` replaced by zero and the control
    /// shifted accordingly. Used to exercise the verifier.
    pub fn with_zero_offsets(&self) -> Self {
        let mut out = self.clone();
        out.u_star = self
            .u_star
            .combine(1.0, &self.offsets, -1.0)
            .expect("offsets share the control shape");
        if let Some(ubar) = &self.ubar_star {
            out.ubar_star = Some(ubar.combine(1.0, &self.offsets, -1.0).expect("same shape"));
        }
        out.offsets = self.offsets.scaled(0.0);
        out
    }
}

fn transformed_decomposition(problem: &TreeProblem, tc: &TransformedCoefficients) -> Result<Decomposition> {
    let spec = &problem.spec;
    let n = spec.state_dim;
    let p: Vec<Matrix> = (0..spec.horizon)
        .map(|k| linalg::symmetrize(&(&spec.b[k] * &tc.rbar_inv[k] * spec.b[k].transpose())))
        .collect();
    let riccati = solve_riccati(n, spec.horizon, |k| RiccatiCoefficients {
        f: &spec.a[k],
        w: &tc.qbar[k],
        p: &p[k],
        l: None,
    })
    .map_err(|e| e.in_stage("riccati"))?;

    let mut levels: Vec<Level> = alloc::vec![Matrix::zeros(0, 0); spec.horizon + 1];
    levels[spec.horizon] = problem.xi.clone();
    for k in (0..spec.horizon).rev() {
        let (drift, mart) = cond_pair(&levels[k + 1])?;
        let a = &spec.a[k];
        let inner = &tc.qbar[k] * &drift + tc.etabar.at(k);
        let correction = a * &riccati.sigma[k + 1] * riccati.theta[k].solve(&inner);
        levels[k] = a * &drift - correction + &tc.cbar[k] * &mart
            - &spec.b[k] * &tc.rbar_inv[k] * tc.rhobar.at(k)
            + problem.q.at(k);
    }
    let phi = AdaptedProcess::from_levels_unchecked(n, 0, levels);
    let initial = initial_factor(problem, &riccati)?;
    Ok(Decomposition {
        riccati,
        phi,
        initial,
    })
}

fn decoupled_decomposition(
    problem: &TreeProblem,
    tc: &TransformedCoefficients,
    dc: &DecoupledCoefficients,
) -> Result<Decomposition> {
    let spec = &problem.spec;
    let n = spec.state_dim;
    let riccati = solve_riccati(n, spec.horizon, |k| RiccatiCoefficients {
        f: &dc.f[k],
        w: &tc.qbar[k],
        p: &dc.p[k],
        l: Some(&spec.c[k]),
    })
    .map_err(|e| e.in_stage("riccati"))?;

    let mut levels: Vec<Level> = alloc::vec![Matrix::zeros(0, 0); spec.horizon + 1];
    levels[spec.horizon] = problem.xi.clone();
    for k in (0..spec.horizon).rev() {
        let (drift, mart) = cond_pair(&levels[k + 1])?;
        let shifted = drift - &riccati.sigma[k + 1] * dc.e.at(k);
        levels[k] = &dc.f[k] * riccati.theta_t[k].solve(&shifted)
            + &spec.c[k] * &mart
            + dc.f_data.at(k);
    }
    let phi = AdaptedProcess::from_levels_unchecked(n, 0, levels);
    let initial = initial_factor(problem, &riccati)?;
    Ok(Decomposition {
        riccati,
        phi,
        initial,
    })
}

fn initial_factor(problem: &TreeProblem, riccati: &RiccatiSolution) -> Result<Factor> {
    let n = problem.n();
    Factor::new(
        &(Matrix::identity(n, n) + &problem.spec.g0 * &riccati.sigma[0]),
        "I + G0Σ_0",
        0,
    )
    .map_err(|e| e.in_stage("adjoint"))
}

/// `x*_0 = (I + G0Σ_0)⁻¹G0φ_0`.
fn initial_adjoint(problem: &TreeProblem, d: &Decomposition) -> Level {
    d.initial.solve(&(&problem.spec.g0 * d.phi.at(0)))
}

struct Trajectory {
    x: AdaptedProcess,
    u: AdaptedProcess,
    ubar: Option<AdaptedProcess>,
    gains: Vec<Matrix>,
    offsets: AdaptedProcess,
}

fn transformed_trajectory(
    problem: &TreeProblem,
    tc: &TransformedCoefficients,
    d: &Decomposition,
) -> Result<Trajectory> {
    let spec = &problem.spec;
    let (n, m, big_n) = (spec.state_dim, spec.control_dim, spec.horizon);
    let mut x: Vec<Level> = Vec::with_capacity(big_n + 1);
    x.push(initial_adjoint(problem, d));
    for k in 0..big_n {
        let drift = cond_drift(d.phi.at(k + 1))?;
        let base = spec.a[k].transpose() * &x[k] + &tc.qbar[k] * &drift + tc.etabar.at(k);
        let slope = tc.cbar[k].transpose() * &x[k];
        x.push(d.riccati.theta[k].solve(&branch(&base, &slope)));
    }
    let gains: Vec<Matrix> = (0..big_n)
        .map(|k| -(&tc.rbar_inv[k] * spec.b[k].transpose()))
        .collect();
    let offsets: Vec<Level> = (0..big_n)
        .map(|k| -(&tc.rbar_inv[k] * tc.rhobar.at(k)))
        .collect();
    let y: Vec<Level> = (0..=big_n)
        .map(|k| d.phi.at(k) - &d.riccati.sigma[k] * &x[k])
        .collect();
    let mut ubar = Vec::with_capacity(big_n);
    let mut u = Vec::with_capacity(big_n);
    for k in 0..big_n {
        let ub = &gains[k] * &x[k] + &offsets[k];
        let (_, mart) = cond_pair(&y[k + 1])?;
        let bha = spec.b[k].transpose() * &tc.h[k] * &spec.a[k];
        let shift = &tc.r_inv[k] * (bha + &spec.s_cost[k]) * mart;
        u.push(&ub - shift);
        ubar.push(ub);
    }
    Ok(Trajectory {
        x: AdaptedProcess::from_levels_unchecked(n, 0, x),
        u: AdaptedProcess::from_levels_unchecked(m, 0, u),
        ubar: Some(AdaptedProcess::from_levels_unchecked(m, 0, ubar)),
        gains,
        offsets: AdaptedProcess::from_levels_unchecked(m, 0, offsets),
    })
}

fn decoupled_trajectory(
    problem: &TreeProblem,
    tc: &TransformedCoefficients,
    dc: &DecoupledCoefficients,
    d: &Decomposition,
) -> Result<Trajectory> {
    let spec = &problem.spec;
    let (n, m, big_n) = (spec.state_dim, spec.control_dim, spec.horizon);
    let ric = &d.riccati;

    // K = −R⁻¹(Bᵀ − SΓFᵀ),  b = −R⁻¹[S(I + Σ'W)⁻¹(𝔼φ' − Σ'e) + ρ]
    let mut gains = Vec::with_capacity(big_n);
    let mut offsets = Vec::with_capacity(big_n);
    for k in 0..big_n {
        let (b, s, ri) = (&spec.b[k], &spec.s_cost[k], &tc.r_inv[k]);
        gains.push(-(ri * (b.transpose() - s * &ric.gamma[k] * dc.f[k].transpose())));
        let drift = cond_drift(d.phi.at(k + 1))?;
        let yhat = ric.theta_t[k].solve(&(drift - &ric.sigma[k + 1] * dc.e.at(k)));
        offsets.push(-(ri * (s * yhat + problem.rho.at(k))));
    }

    let mut x: Vec<Level> = Vec::with_capacity(big_n + 1);
    let mut u: Vec<Level> = Vec::with_capacity(big_n);
    x.push(initial_adjoint(problem, d));
    for k in 0..big_n {
        let xk = &x[k];
        let drift = cond_drift(d.phi.at(k + 1))?;
        let sig = &ric.sigma[k + 1];
        // 𝔼_{k−1}[y_{k+1}] on the optimal pair
        let y_next = ric.theta_t[k].solve(&(drift - sig * dc.f[k].transpose() * xk - sig * dc.e.at(k)));
        let base = dc.f[k].transpose() * xk + &tc.qbar[k] * &y_next + dc.e.at(k);
        let slope = spec.c[k].transpose() * xk;
        u.push(&gains[k] * xk + &offsets[k]);
        x.push(branch(&base, &slope));
    }
    Ok(Trajectory {
        x: AdaptedProcess::from_levels_unchecked(n, 0, x),
        u: AdaptedProcess::from_levels_unchecked(m, 0, u),
        ubar: None,
        gains,
        offsets: AdaptedProcess::from_levels_unchecked(m, 0, offsets),
    })
}

/// `⟨(I + G0Σ_0)⁻¹G0φ_0, φ_0⟩`.
fn initial_term(problem: &TreeProblem, d: &Decomposition) -> f64 {
    let m0 = d.initial.solve(&problem.spec.g0);
    expect_inner(&(m0 * d.phi.at(0)), d.phi.at(0))
}

/// Value of the decoupled system:
/// `½𝔼{Σ_k [⟨W𝔼φ', 𝔼φ'⟩ + 2⟨e, 𝔼φ'⟩ − ⟨Γg, g⟩ − ⟨ρ, R⁻¹ρ⟩] + ⟨(I + G0Σ_0)⁻¹G0φ_0, φ_0⟩}`
/// with `g = W𝔼φ' + e`.
pub fn decoupled_value(
    problem: &TreeProblem,
    tc: &TransformedCoefficients,
    dc: &DecoupledCoefficients,
    d: &Decomposition,
) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..problem.horizon() {
        let drift = cond_drift(d.phi.at(k + 1))?;
        let w = &tc.qbar[k];
        let e = dc.e.at(k);
        let g = w * &drift + e;
        let rho = problem.rho.at(k);
        total += expect_inner(&(w * &drift), &drift) + 2.0 * expect_inner(e, &drift)
            - expect_inner(&(&d.riccati.gamma[k] * &g), &g)
            - expect_inner(&(&tc.r_inv[k] * rho), rho);
    }
    Ok(0.5 * (total + initial_term(problem, d)))
}

/// Closed-form value of the transformed problem. With
/// `include_q_terms` the per-step `⟨H_k q_k, q_k⟩` summands are added.
pub fn transformed_value(
    problem: &TreeProblem,
    tc: &TransformedCoefficients,
    d: &Decomposition,
    include_q_terms: bool,
) -> f64 {
    let big_n = problem.horizon();
    let mut total = 0.0;
    for k in 0..big_n {
        let qb = &tc.qbar[k];
        let gamma = &d.riccati.gamma[k];
        let next = d.phi.at(k + 1);
        let etabar = tc.etabar.at(k);
        let lin = (qb - qb * gamma * qb) * next + refine(etabar);
        total += expect_inner(&lin, next);
        total -= expect_inner(&(gamma * etabar), etabar);
        total -= expect_inner(&(&tc.rbar_inv[k] * tc.rhobar.at(k)), tc.rhobar.at(k));
        if include_q_terms {
            let q = problem.q.at(k);
            total += expect_inner(&(&tc.h[k] * q), q);
        }
    }
    total += expect_inner(&(&tc.h[big_n] * &problem.xi), &problem.xi);
    total += initial_term(problem, d);
    0.5 * total
}

/// Full pipeline: `H`, transformed coefficients, both Riccati/`φ`
/// decompositions, the optimal pair of the selected route, gains,
/// offsets, values and diagnostics.
pub fn solve(problem: &TreeProblem, options: SolveOptions) -> Result<FeedbackSolution> {
    let tc = transform_coefficients(problem).map_err(|e| e.in_stage("H-equation"))?;
    let dc = decoupled_coefficients(problem, &tc);
    let transformed = transformed_decomposition(problem, &tc).map_err(|e| e.in_stage("transformed"))?;
    let decoupled = decoupled_decomposition(problem, &tc, &dc).map_err(|e| e.in_stage("decoupled"))?;

    let traj = match options.route {
        Route::Decoupled => decoupled_trajectory(problem, &tc, &dc, &decoupled),
        Route::Transformed => transformed_trajectory(problem, &tc, &transformed),
    }
    .map_err(|e| e.in_stage("adjoint"))?;

    let values = ValueSet {
        decoupled: decoupled_value(problem, &tc, &dc, &decoupled)?,
        theorem: transformed_value(problem, &tc, &transformed, false),
        derivation: transformed_value(problem, &tc, &transformed, true),
    };

    let active = match options.route {
        Route::Decoupled => &decoupled,
        Route::Transformed => &transformed,
    };
    let big_n = problem.horizon();
    let y_levels: Vec<Level> = (0..=big_n)
        .map(|k| active.phi.at(k) - &active.riccati.sigma[k] * traj.x.at(k))
        .collect();
    let y_star = AdaptedProcess::from_levels_unchecked(problem.n(), 0, y_levels);

    let ric = &active.riccati;
    let diagnostics = Diagnostics {
        theta_conditions: ric.theta_conditions(),
        initial_condition: active.initial.condition(),
        sigma_min_eigenvalue: ric.sigma_min_eigenvalue.clone(),
        sigma_asymmetry: ric.sigma_asymmetry.iter().copied().fold(0.0, f64::max),
        gamma_asymmetry: ric.max_gamma_asymmetry(),
        h_asymmetry: tc.h_asymmetry.iter().copied().fold(0.0, f64::max),
        cancellation_residual: cancellation_residual(problem, &tc),
        rbar_min_eigenvalue: tc
            .rbar
            .iter()
            .map(linalg::min_eigenvalue)
            .fold(f64::INFINITY, f64::min),
        boundary_residual: (traj.x.at(0) - &problem.spec.g0 * y_star.at(0)).amax(),
        terminal_residual: (y_star.at(big_n) - &problem.xi).amax(),
    };

    Ok(FeedbackSolution {
        route: options.route,
        value_variant: options.value_variant,
        value: values.get(options.value_variant),
        values,
        coefficients: tc,
        decoupled_coefficients: dc,
        transformed,
        decoupled,
        x_star: traj.x,
        y_star,
        u_star: traj.u,
        ubar_star: traj.ubar,
        gains: traj.gains,
        offsets: traj.offsets,
        diagnostics,
    })
}
