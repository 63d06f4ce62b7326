//! Formula-free checks on the tree: the state equation and cost are
//! evaluated directly for arbitrary controls, and a brute-force QP over
//! all control coordinates gives an independent optimum.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::model::TreeProblem;
use crate::solver::{FeedbackSolution, ValueVariant};
use crate::tree::{branch, cond_drift, cond_pair, expect_inner, AdaptedProcess, Level};

/// Default limit on the stacked control dimension for QP assembly.
pub const DEFAULT_QP_CAP: usize = 512;

/// A control to be evaluated.
#[derive(Clone, Debug)]
pub enum ControlPolicy {
    /// `u_k` on the `2^k` atoms of each step.
    OpenLoop(AdaptedProcess),
    /// `u_k = K_k x_k + b_k` along a given adjoint path.
    Feedback {
        gains: Vec<Matrix>,
        offsets: AdaptedProcess,
        state: AdaptedProcess,
    },
}

impl ControlPolicy {
    /// Open-loop control realized by the policy.
    pub fn unroll(&self) -> Result<AdaptedProcess> {
        match self {
            ControlPolicy::OpenLoop(u) => Ok(u.clone()),
            ControlPolicy::Feedback {
                gains,
                offsets,
                state,
            } => {
                if gains.len() != offsets.len() || state.len() < offsets.len() {
                    return Err(Error::Level("feedback policy: inconsistent horizons".into()));
                }
                let levels = gains
                    .iter()
                    .enumerate()
                    .map(|(k, g)| g * state.at(k) + offsets.at(k))
                    .collect();
                AdaptedProcess::new(offsets.dim(), 0, levels)
            }
        }
    }
}

impl FeedbackSolution {
    /// Policy that reproduces `u*`. The decoupled route is a pure
    /// feedback on `x*`; the transformed route also depends on the
    /// martingale part of `y*` and is replayed open loop.
    pub fn policy(&self) -> ControlPolicy {
        match self.route {
            crate::solver::Route::Decoupled => ControlPolicy::Feedback {
                gains: self.gains.clone(),
                offsets: self.offsets.clone(),
                state: self.x_star.clone(),
            },
            crate::solver::Route::Transformed => ControlPolicy::OpenLoop(self.u_star.clone()),
        }
    }
}

fn check_control(problem: &TreeProblem, u: &AdaptedProcess) -> Result<()> {
    if u.dim() != problem.m() || u.first_time() != 0 || u.len() != problem.horizon() {
        return Err(Error::Level(alloc::format!(
            "control must be {}-dimensional on times 0..{}",
            problem.m(),
            problem.horizon()
        )));
    }
    Ok(())
}

/// Solves the state equation backward for control `u` with explicit
/// terminal value and inhomogeneity.
pub fn evaluate_bsde_with(
    problem: &TreeProblem,
    xi: &Level,
    u: &AdaptedProcess,
    q: &AdaptedProcess,
) -> Result<AdaptedProcess> {
    check_control(problem, u)?;
    let spec = &problem.spec;
    let big_n = spec.horizon;
    let mut levels: Vec<Level> = alloc::vec![Matrix::zeros(0, 0); big_n + 1];
    levels[big_n] = xi.clone();
    for k in (0..big_n).rev() {
        let (drift, mart) = cond_pair(&levels[k + 1])?;
        levels[k] = &spec.a[k] * drift + &spec.b[k] * u.at(k) + &spec.c[k] * mart + q.at(k);
    }
    AdaptedProcess::new(spec.state_dim, 0, levels)
}

/// `y` for control `u` with the problem's own `ξ` and `q`.
pub fn evaluate_bsde(problem: &TreeProblem, u: &AdaptedProcess) -> Result<AdaptedProcess> {
    evaluate_bsde_with(problem, &problem.xi, u, &problem.q)
}

fn cost_terms(problem: &TreeProblem, u: &AdaptedProcess, y: &AdaptedProcess, linear: bool) -> Result<f64> {
    let spec = &problem.spec;
    let mut total = expect_inner(&(&spec.g0 * y.at(0)), y.at(0));
    for k in 0..spec.horizon {
        let yn = cond_drift(y.at(k + 1))?;
        let uk = u.at(k);
        let mut t = expect_inner(&(&spec.q_cost[k] * &yn), &yn)
            + 2.0 * expect_inner(&(&spec.s_cost[k] * &yn), uk)
            + expect_inner(&(&spec.r_cost[k] * uk), uk);
        if linear {
            t += 2.0 * expect_inner(problem.eta.at(k), &yn) + 2.0 * expect_inner(problem.rho.at(k), uk);
        }
        total += t;
    }
    Ok(0.5 * total)
}

/// Exact cost `𝒥(N, ξ; u)` given the matching state `y`.
pub fn evaluate_cost(problem: &TreeProblem, u: &AdaptedProcess, y: &AdaptedProcess) -> Result<f64> {
    check_control(problem, u)?;
    cost_terms(problem, u, y, true)
}

/// State and cost for `u`.
pub fn cost(problem: &TreeProblem, u: &AdaptedProcess) -> Result<f64> {
    let y = evaluate_bsde(problem, u)?;
    cost_terms(problem, u, &y, true)
}

/// `𝒥⁰(N, 0; v)`: cost with `ξ = q = η = ρ = 0`.
pub fn evaluate_cost_homogeneous(problem: &TreeProblem, v: &AdaptedProcess) -> Result<f64> {
    let n = problem.n();
    let big_n = problem.horizon();
    let xi = Matrix::zeros(n, crate::tree::atoms_at(big_n));
    let q = AdaptedProcess::zeros(n, 0, big_n);
    let y = evaluate_bsde_with(problem, &xi, v, &q)?;
    cost_terms(problem, v, &y, false)
}

/// Adjoint forward recursion
/// `x_{k+1} = Aᵀx + Q𝔼[y'] + Sᵀu + η ± Cᵀx`, `x_0 = G0 y_0`.
pub fn adjoint_forward(problem: &TreeProblem, u: &AdaptedProcess, y: &AdaptedProcess) -> Result<AdaptedProcess> {
    check_control(problem, u)?;
    let spec = &problem.spec;
    let mut levels: Vec<Level> = Vec::with_capacity(spec.horizon + 1);
    levels.push(&spec.g0 * y.at(0));
    for k in 0..spec.horizon {
        let xk = &levels[k];
        let yn = cond_drift(y.at(k + 1))?;
        let base = spec.a[k].transpose() * xk
            + &spec.q_cost[k] * yn
            + spec.s_cost[k].transpose() * u.at(k)
            + problem.eta.at(k);
        let slope = spec.c[k].transpose() * xk;
        let next = branch(&base, &slope);
        levels.push(next);
    }
    AdaptedProcess::new(spec.state_dim, 0, levels)
}

/// Per-step maximum of `|Bᵀx + S𝔼[y'] + Ru + ρ|` over atoms and
/// components.
pub fn stationarity_residuals(
    problem: &TreeProblem,
    u: &AdaptedProcess,
    y: &AdaptedProcess,
    x: &AdaptedProcess,
) -> Result<Vec<f64>> {
    check_control(problem, u)?;
    let spec = &problem.spec;
    (0..spec.horizon)
        .map(|k| {
            let yn = cond_drift(y.at(k + 1))?;
            let r = spec.b[k].transpose() * x.at(k)
                + &spec.s_cost[k] * yn
                + &spec.r_cost[k] * u.at(k)
                + problem.rho.at(k);
            Ok(r.amax())
        })
        .collect()
}

pub fn stationarity_residual(
    problem: &TreeProblem,
    u: &AdaptedProcess,
    y: &AdaptedProcess,
    x: &AdaptedProcess,
) -> Result<f64> {
    Ok(stationarity_residuals(problem, u, y, x)?
        .into_iter()
        .fold(0.0, f64::max))
}

/// Outcome of one quadratic-expansion probe around `u` in direction `v`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpansionCheck {
    pub delta: f64,
    /// `𝒥(u + δv) − 𝒥(u)`.
    pub lhs: f64,
    /// `δ²𝒥⁰(0; v)`.
    pub quadratic: f64,
    /// Recovered first-order coefficient `(𝒥(u+δv) − 𝒥(u−δv)) / 2δ`.
    pub linear: f64,
    /// `|lhs − quadratic − δ·linear|`; zero for an exact quadratic.
    pub error: f64,
    /// `|lhs − quadratic|`; zero at the optimum.
    pub error_at_optimum: f64,
    /// `|𝒥(u)|`, for scaling.
    pub base_cost: f64,
}

pub fn quadratic_expansion_check(
    problem: &TreeProblem,
    u: &AdaptedProcess,
    v: &AdaptedProcess,
    delta: f64,
) -> Result<ExpansionCheck> {
    let j = cost(problem, u)?;
    let jp = cost(problem, &u.combine(1.0, v, delta)?)?;
    let jm = cost(problem, &u.combine(1.0, v, -delta)?)?;
    let quadratic = delta * delta * evaluate_cost_homogeneous(problem, v)?;
    let lhs = jp - j;
    let linear = (jp - jm) / (2.0 * delta);
    Ok(ExpansionCheck {
        delta,
        lhs,
        quadratic,
        linear,
        error: (lhs - quadratic - delta * linear).abs(),
        error_at_optimum: (lhs - quadratic).abs(),
        base_cost: j.abs(),
    })
}

/// `𝒥(u) = ½uᵀ𝒜u + gᵀu + c` over stacked control coordinates.
#[derive(Clone, Debug)]
pub struct QuadraticProgram {
    pub hessian: Matrix,
    pub gradient: Vector,
    pub constant: f64,
}

impl QuadraticProgram {
    pub fn eval(&self, u: &Vector) -> f64 {
        0.5 * linalg::quad(&self.hessian, u) + self.gradient.dot(u) + self.constant
    }
}

fn unit_control(problem: &TreeProblem, coords: &[(usize, f64)]) -> AdaptedProcess {
    let dim = problem.spec.control_coordinates();
    let mut v = Vector::zeros(dim);
    for &(i, s) in coords {
        v[i] += s;
    }
    AdaptedProcess::unstack(problem.m(), 0, problem.horizon(), &v).expect("coordinate count matches")
}

/// Builds the QP by probing the cost with unit controls: `𝒥(0)`,
/// `𝒥(±e_i)` and `𝒥(e_i + e_j)` for `i < j`.
pub fn assemble_qp(problem: &TreeProblem, cap: usize) -> Result<QuadraticProgram> {
    let dim = problem.spec.control_coordinates();
    if dim > cap {
        return Err(Error::QpCap { dim, cap });
    }
    let constant = cost(problem, &problem.zero_control())?;
    let mut plus = Vec::with_capacity(dim);
    let mut gradient = Vector::zeros(dim);
    let mut hessian = Matrix::zeros(dim, dim);
    for i in 0..dim {
        let jp = cost(problem, &unit_control(problem, &[(i, 1.0)]))?;
        let jm = cost(problem, &unit_control(problem, &[(i, -1.0)]))?;
        gradient[i] = 0.5 * (jp - jm);
        hessian[(i, i)] = jp + jm - 2.0 * constant;
        plus.push(jp);
    }
    for i in 0..dim {
        for j in i + 1..dim {
            let jij = cost(problem, &unit_control(problem, &[(i, 1.0), (j, 1.0)]))?;
            // 𝒥(e_i + e_j) = c + g_i + g_j + ½(𝒜_ii + 𝒜_jj) + 𝒜_ij
            let hij = jij - constant - gradient[i] - gradient[j] - 0.5 * (hessian[(i, i)] + hessian[(j, j)]);
            hessian[(i, j)] = hij;
            hessian[(j, i)] = hij;
        }
    }
    Ok(QuadraticProgram {
        hessian,
        gradient,
        constant,
    })
}

/// Minimizer of the assembled QP, `𝒜u = −g`.
pub fn qp_solve(problem: &TreeProblem, qp: &QuadraticProgram) -> Result<AdaptedProcess> {
    let min_eigenvalue = linalg::min_eigenvalue(&qp.hessian);
    if min_eigenvalue.is_nan() || min_eigenvalue <= 0.0 {
        return Err(Error::NotConvex { min_eigenvalue });
    }
    let chol = linalg::symmetrize(&qp.hessian)
        .cholesky()
        .ok_or(Error::NotConvex { min_eigenvalue })?;
    let u = chol.solve(&(-&qp.gradient));
    AdaptedProcess::unstack(problem.m(), 0, problem.horizon(), &u)
}

/// `max |y^{(ξ,u,q)} − (y^ξ + y^u + y^q)| / max(1, max|y|)`.
pub fn superposition_check(problem: &TreeProblem, u: &AdaptedProcess) -> Result<f64> {
    let n = problem.n();
    let big_n = problem.horizon();
    let zero_xi = Matrix::zeros(n, crate::tree::atoms_at(big_n));
    let zero_q = AdaptedProcess::zeros(n, 0, big_n);
    let zero_u = problem.zero_control();
    let full = evaluate_bsde_with(problem, &problem.xi, u, &problem.q)?;
    let from_xi = evaluate_bsde_with(problem, &problem.xi, &zero_u, &zero_q)?;
    let from_u = evaluate_bsde_with(problem, &zero_xi, u, &zero_q)?;
    let from_q = evaluate_bsde_with(problem, &zero_xi, &zero_u, &problem.q)?;
    let sum = from_xi.combine(1.0, &from_u, 1.0)?.combine(1.0, &from_q, 1.0)?;
    Ok(full.max_abs_diff(&sum)? / full.max_abs().max(1.0))
}

/// Random control with entries uniform in `[−1, 1]`.
pub fn random_control<R: Rng>(problem: &TreeProblem, rng: &mut R) -> AdaptedProcess {
    let dim = problem.spec.control_coordinates();
    let v = Vector::from_fn(dim, |_, _| rng.random_range(-1.0..=1.0));
    AdaptedProcess::unstack(problem.m(), 0, problem.horizon(), &v).expect("coordinate count matches")
}

/// Pass/fail thresholds used by [`verify`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Absolute bound on the stationarity residual.
    pub stationarity: f64,
    /// `𝒥⁰(v) ≥ −homogeneous`.
    pub homogeneous: f64,
    /// Expansion error relative to `max(1, |𝒥(u*)|)`.
    pub expansion: f64,
    /// Max-norm gap between the QP minimizer and `u*`.
    pub qp_control: f64,
    /// Gap between the QP optimal cost and `𝒥(u*)`.
    pub qp_cost: f64,
    /// Relative superposition error.
    pub superposition: f64,
    /// Value formula vs. exact cost, relative to `max(1, |𝒥|)`.
    pub value: f64,
    /// Solver `y*`, `x*` vs. oracle, relative to `max(1, magnitude)`.
    pub consistency: f64,
    /// `x*_0 = G0 y*_0`.
    pub boundary: f64,
    /// Relative asymmetry of `Σ'Θ⁻¹`.
    pub symmetry: f64,
    /// Scaled PSD threshold for `Σ_k`.
    pub psd: f64,
    /// Transformation identities.
    pub cancellation: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            stationarity: 1e-9,
            homogeneous: 1e-12,
            expansion: 1e-8,
            qp_control: 1e-6,
            qp_cost: 1e-6,
            superposition: 1e-10,
            value: 1e-8,
            consistency: 1e-9,
            boundary: 1e-10,
            symmetry: 1e-10,
            psd: 1e-10,
            cancellation: 1e-10,
        }
    }
}

impl Tolerances {
    pub const KEYS: [&'static str; 12] = [
        "stationarity",
        "homogeneous",
        "expansion",
        "qp_control",
        "qp_cost",
        "superposition",
        "value",
        "consistency",
        "boundary",
        "symmetry",
        "psd",
        "cancellation",
    ];

    /// Overrides one threshold by name.
    pub fn set(&mut self, key: &str, value: f64) -> Option<()> {
        let slot = match key {
            "stationarity" => &mut self.stationarity,
            "homogeneous" => &mut self.homogeneous,
            "expansion" => &mut self.expansion,
            "qp_control" => &mut self.qp_control,
            "qp_cost" => &mut self.qp_cost,
            "superposition" => &mut self.superposition,
            "value" => &mut self.value,
            "consistency" => &mut self.consistency,
            "boundary" => &mut self.boundary,
            "symmetry" => &mut self.symmetry,
            "psd" => &mut self.psd,
            "cancellation" => &mut self.cancellation,
            _ => return None,
        };
        *slot = value;
        Some(())
    }
}

/// When to run the brute-force QP.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum QpMode {
    /// Only if the stacked control dimension is within the cap.
    #[default]
    Auto,
    Always,
    Never,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Random directions for the `𝒥⁰ ≥ 0` check.
    pub homogeneous_samples: usize,
    /// Random directions for the expansion check.
    pub expansion_samples: usize,
    pub deltas: [f64; 3],
    pub qp: QpMode,
    pub qp_cap: usize,
    pub tolerances: Tolerances,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            homogeneous_samples: 100,
            expansion_samples: 20,
            deltas: [0.5, 1.0, 2.0],
            qp: QpMode::Auto,
            qp_cap: DEFAULT_QP_CAP,
            tolerances: Tolerances::default(),
        }
    }
}

/// One thresholded check.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
    pub detail: String,
}

/// QP cross-check results.
#[derive(Clone, Debug, PartialEq)]
pub struct QpComparison {
    pub dim: usize,
    pub min_eigenvalue: f64,
    pub control_gap: f64,
    pub cost: f64,
    pub cost_gap: f64,
}

/// Everything [`verify`] measured.
#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub seed: u64,
    pub oracle_cost: f64,
    pub stationarity_max_residual: f64,
    pub stationarity_per_step: Vec<f64>,
    pub homogeneous_min: f64,
    pub expansion_max_error: f64,
    pub quadratic_exactness: f64,
    pub superposition_error: f64,
    pub state_consistency: f64,
    pub adjoint_consistency: f64,
    pub boundary_residual: f64,
    pub gamma_asymmetry: f64,
    pub sigma_scaled_min_eigenvalue: f64,
    pub cancellation_residual: f64,
    pub qp: Option<QpComparison>,
    /// `(variant, |value − oracle cost|)` for every value expression.
    pub value_match: Vec<(ValueVariant, f64)>,
    /// Variant closest to the oracle cost, if within tolerance.
    pub matching_variant: Option<ValueVariant>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl VerificationReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

fn push_check(checks: &mut Vec<Check>, name: &'static str, value: f64, threshold: f64, pass: bool, detail: String) {
    checks.push(Check {
        name,
        value,
        threshold,
        pass,
        detail,
    });
}

/// Runs every oracle check against a solver output.
pub fn verify(problem: &TreeProblem, solution: &FeedbackSolution, options: &VerifyOptions) -> Result<VerificationReport> {
    use alloc::format;
    let tol = &options.tolerances;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);

    let u = solution.policy().unroll()?;
    let y = evaluate_bsde(problem, &u)?;
    let x = adjoint_forward(problem, &u, &y)?;
    let oracle_cost = evaluate_cost(problem, &u, &y)?;
    let scale = oracle_cost.abs().max(1.0);

    let per_step = stationarity_residuals(problem, &u, &y, &x)?;
    let stationarity = per_step.iter().copied().fold(0.0, f64::max);

    let state_consistency = y.max_abs_diff(&solution.y_star)? / y.max_abs().max(1.0);
    let adjoint_consistency = x.max_abs_diff(&solution.x_star)? / x.max_abs().max(1.0);

    // QP first, so its eigenvectors can join the 𝒥⁰ directions.
    let dim = problem.spec.control_coordinates();
    let run_qp = match options.qp {
        QpMode::Auto => dim <= options.qp_cap,
        QpMode::Always => true,
        QpMode::Never => false,
    };
    let mut qp_cmp = None;
    let mut eigen_dirs: Vec<AdaptedProcess> = Vec::new();
    let mut qp_error = None;
    if run_qp {
        let cap = if options.qp == QpMode::Always { usize::MAX } else { options.qp_cap };
        let qp = assemble_qp(problem, cap)?;
        let eig = nalgebra::linalg::SymmetricEigen::new(linalg::symmetrize(&qp.hessian));
        let min_eigenvalue = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        for j in 0..dim {
            let v = eig.eigenvectors.column(j).into_owned();
            eigen_dirs.push(AdaptedProcess::unstack(problem.m(), 0, problem.horizon(), &v)?);
        }
        match qp_solve(problem, &qp) {
            Ok(u_qp) => {
                let qp_cost = cost(problem, &u_qp)?;
                qp_cmp = Some(QpComparison {
                    dim,
                    min_eigenvalue,
                    control_gap: u_qp.max_abs_diff(&u)?,
                    cost: qp_cost,
                    cost_gap: (qp_cost - solution.value).abs(),
                });
            }
            Err(e) => qp_error = Some(e),
        }
    }

    let mut homogeneous_min = f64::INFINITY;
    for _ in 0..options.homogeneous_samples {
        let v = random_control(problem, &mut rng);
        homogeneous_min = homogeneous_min.min(evaluate_cost_homogeneous(problem, &v)?);
    }
    for v in &eigen_dirs {
        homogeneous_min = homogeneous_min.min(evaluate_cost_homogeneous(problem, v)?);
    }
    if options.homogeneous_samples == 0 && eigen_dirs.is_empty() {
        homogeneous_min = 0.0;
    }

    let mut expansion_max_error = 0.0_f64;
    let mut quadratic_exactness = 0.0_f64;
    for _ in 0..options.expansion_samples {
        let v = random_control(problem, &mut rng);
        let mut linear_terms = [0.0; 3];
        for (i, &delta) in options.deltas.iter().enumerate() {
            let c = quadratic_expansion_check(problem, &u, &v, delta)?;
            expansion_max_error = expansion_max_error.max(c.error_at_optimum / scale);
            quadratic_exactness = quadratic_exactness.max(c.error / scale);
            linear_terms[i] = c.linear;
        }
        let spread = linear_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - linear_terms.iter().copied().fold(f64::INFINITY, f64::min);
        quadratic_exactness = quadratic_exactness.max(spread / scale);
    }

    let superposition_error = superposition_check(problem, &u)?;

    let value_match: Vec<(ValueVariant, f64)> = ValueVariant::ALL
        .iter()
        .map(|&v| (v, (solution.values.get(v) - oracle_cost).abs()))
        .collect();
    let matching_variant = value_match
        .iter()
        .filter(|(_, err)| *err <= tol.value * scale)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(v, _)| *v);

    let ric = &solution.active().riccati;
    let boundary_residual = (x.at(0) - &problem.spec.g0 * y.at(0)).amax();
    let solver_boundary = solution.diagnostics.boundary_residual;
    let sigma_scaled_min_eigenvalue = ric.worst_scaled_min_eigenvalue();

    let mut checks = Vec::new();
    push_check(
        &mut checks,
        "stationarity",
        stationarity,
        tol.stationarity,
        stationarity <= tol.stationarity,
        format!(
            "per-step max residual {:?}",
            per_step.iter().map(|r| format!("{r:.3e}")).collect::<Vec<_>>()
        ),
    );
    push_check(
        &mut checks,
        "homogeneous_nonnegative",
        homogeneous_min,
        -tol.homogeneous,
        homogeneous_min >= -tol.homogeneous,
        format!(
            "{} random directions, {} Hessian eigenvectors",
            options.homogeneous_samples,
            eigen_dirs.len()
        ),
    );
    push_check(
        &mut checks,
        "quadratic_expansion",
        expansion_max_error,
        tol.expansion,
        expansion_max_error <= tol.expansion,
        format!("{} directions, deltas {:?}", options.expansion_samples, options.deltas),
    );
    push_check(
        &mut checks,
        "quadratic_exactness",
        quadratic_exactness,
        tol.expansion,
        quadratic_exactness <= tol.expansion,
        "first-order coefficient independent of delta".into(),
    );
    push_check(
        &mut checks,
        "superposition",
        superposition_error,
        tol.superposition,
        superposition_error <= tol.superposition,
        String::new(),
    );
    push_check(
        &mut checks,
        "state_consistency",
        state_consistency,
        tol.consistency,
        state_consistency <= tol.consistency,
        "solver y* vs oracle state for u*".into(),
    );
    push_check(
        &mut checks,
        "adjoint_consistency",
        adjoint_consistency,
        tol.consistency,
        adjoint_consistency <= tol.consistency,
        "solver x* vs oracle adjoint for u*".into(),
    );
    let boundary = boundary_residual.max(solver_boundary);
    push_check(
        &mut checks,
        "boundary",
        boundary,
        tol.boundary,
        boundary <= tol.boundary,
        "x*_0 = G0 y*_0".into(),
    );
    push_check(
        &mut checks,
        "gamma_symmetry",
        ric.max_gamma_asymmetry(),
        tol.symmetry,
        ric.max_gamma_asymmetry() <= tol.symmetry,
        String::new(),
    );
    push_check(
        &mut checks,
        "sigma_psd",
        sigma_scaled_min_eigenvalue,
        -tol.psd,
        sigma_scaled_min_eigenvalue >= -tol.psd,
        String::new(),
    );
    let cancellation = solution.diagnostics.cancellation_residual;
    push_check(
        &mut checks,
        "cancellation",
        cancellation,
        tol.cancellation,
        cancellation <= tol.cancellation,
        String::new(),
    );
    let selected_err = (solution.value - oracle_cost).abs();
    push_check(
        &mut checks,
        "value",
        selected_err,
        tol.value * scale,
        selected_err <= tol.value * scale,
        format!(
            "{} value {} vs oracle cost {}",
            solution.value_variant.name(),
            solution.value,
            oracle_cost
        ),
    );
    if let Some(e) = qp_error {
        push_check(&mut checks, "qp", f64::NAN, 0.0, false, format!("{e}"));
    }
    if let Some(q) = &qp_cmp {
        push_check(
            &mut checks,
            "qp_control",
            q.control_gap,
            tol.qp_control,
            q.control_gap <= tol.qp_control,
            format!("{} coordinates, min Hessian eigenvalue {:.6e}", q.dim, q.min_eigenvalue),
        );
        push_check(
            &mut checks,
            "qp_cost",
            q.cost_gap,
            tol.qp_cost,
            q.cost_gap <= tol.qp_cost,
            format!("QP optimum {}", q.cost),
        );
    }

    let pass = checks.iter().all(|c| c.pass);
    Ok(VerificationReport {
        seed: options.seed,
        oracle_cost,
        stationarity_max_residual: stationarity,
        stationarity_per_step: per_step,
        homogeneous_min,
        expansion_max_error,
        quadratic_exactness,
        superposition_error,
        state_consistency,
        adjoint_consistency,
        boundary_residual: boundary,
        gamma_asymmetry: ric.max_gamma_asymmetry(),
        sigma_scaled_min_eigenvalue,
        cancellation_residual: cancellation,
        qp: qp_cmp,
        value_match,
        matching_variant,
        checks,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::example::example_spec;
    use crate::linalg::Vector;
    use crate::model::{InputProcess, ProblemSpec, TerminalValue};
    use crate::solver::{solve, SolveOptions};
    use alloc::vec;

    fn one_step(a: f64, b: f64, c: f64, xi: TerminalValue) -> TreeProblem {
        let id = |s: f64| Matrix::from_element(1, 1, s);
        let spec = ProblemSpec {
            horizon: 1,
            state_dim: 1,
            control_dim: 1,
            a: vec![id(a)],
            b: vec![id(b)],
            c: vec![id(c)],
            q_cost: vec![id(1.0)],
            s_cost: vec![id(0.0)],
            r_cost: vec![id(1.0)],
            g0: id(1.0),
            q: InputProcess::zeros(1),
            eta: InputProcess::zeros(1),
            rho: InputProcess::zeros(1),
            xi,
        };
        TreeProblem::new(&spec).unwrap()
    }

    #[test]
    fn identity_dynamics_pass_xi_through() {
        let p = one_step(1.0, 0.0, 0.0, TerminalValue::Constant(Vector::from_element(1, 3.0)));
        let y = evaluate_bsde(&p, &p.zero_control()).unwrap();
        assert_eq!(y.at(0)[(0, 0)], 3.0);
    }

    #[test]
    fn martingale_part_enters_through_c() {
        let xi = Matrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let p = one_step(1.0, 0.0, 1.0, TerminalValue::Adapted(xi));
        let y = evaluate_bsde(&p, &p.zero_control()).unwrap();
        assert_eq!(y.at(0)[(0, 0)], 1.0);
    }

    #[test]
    fn zero_problem_costs_nothing() {
        let p = TreeProblem::new(&example_spec()).unwrap().homogeneous();
        let u = p.zero_control();
        let y = evaluate_bsde(&p, &u).unwrap();
        assert_eq!(evaluate_cost(&p, &u, &y).unwrap(), 0.0);
        assert_eq!(evaluate_cost_homogeneous(&p, &u).unwrap(), 0.0);
        let x = adjoint_forward(&p, &u, &y).unwrap();
        assert_eq!(x.max_abs(), 0.0);
        assert_eq!(stationarity_residual(&p, &u, &y, &x).unwrap(), 0.0);
    }

    #[test]
    fn one_step_adjoint_unrolls() {
        let p = TreeProblem::new(&example_spec()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_control(&p, &mut rng);
        let y = evaluate_bsde(&p, &u).unwrap();
        let x = adjoint_forward(&p, &u, &y).unwrap();
        let s = &p.spec;
        let x0 = x.value(0, 0);
        let ey = cond_drift(y.at(1)).unwrap().column(0).into_owned();
        let base = s.a[0].transpose() * &x0 + &s.q_cost[0] * ey + s.s_cost[0].transpose() * u.value(0, 0) + p.eta.value(0, 0);
        let slope = s.c[0].transpose() * &x0;
        assert!((x.value(1, 0) - (&base + &slope)).amax() < 1e-13);
        assert!((x.value(1, 1) - (&base - &slope)).amax() < 1e-13);
    }

    #[test]
    fn qp_reconstructs_cost_and_diagonal() {
        let p = TreeProblem::new(&example_spec()).unwrap();
        let qp = assemble_qp(&p, DEFAULT_QP_CAP).unwrap();
        assert_eq!(qp.hessian.nrows(), 30);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let u = random_control(&p, &mut rng);
            let direct = cost(&p, &u).unwrap();
            assert!((qp.eval(&u.stacked()) - direct).abs() < 1e-8 * direct.abs().max(1.0));
        }
        let e0 = unit_control(&p, &[(0, 1.0)]);
        let j0 = evaluate_cost_homogeneous(&p, &e0).unwrap();
        assert!((2.0 * j0 - qp.hessian[(0, 0)]).abs() < 1e-10);
        assert!(linalg::min_eigenvalue(&qp.hessian) > 0.0);
    }

    #[test]
    fn qp_cap_is_enforced() {
        let p = TreeProblem::new(&example_spec()).unwrap();
        assert!(matches!(assemble_qp(&p, 10), Err(Error::QpCap { dim: 30, cap: 10 })));
    }

    #[test]
    fn zero_spec_qp_is_zero() {
        let p = TreeProblem::new(&example_spec()).unwrap().homogeneous();
        let qp = assemble_qp(&p, DEFAULT_QP_CAP).unwrap();
        assert_eq!(qp_solve(&p, &qp).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn non_convex_qp_is_rejected() {
        let p = TreeProblem::new(&example_spec()).unwrap();
        let mut qp = assemble_qp(&p, DEFAULT_QP_CAP).unwrap();
        qp.hessian[(0, 0)] = -1.0;
        assert!(matches!(qp_solve(&p, &qp), Err(Error::NotConvex { .. })));
    }

    #[test]
    fn perturbation_is_detected_by_stationarity() {
        let p = TreeProblem::new(&example_spec()).unwrap();
        let s = solve(&p, SolveOptions::default()).unwrap();
        let mut u = s.u_star.clone();
        u.at_mut(2)[(1, 3)] += 0.1;
        let y = evaluate_bsde(&p, &u).unwrap();
        let x = adjoint_forward(&p, &u, &y).unwrap();
        assert!(stationarity_residual(&p, &u, &y, &x).unwrap() > 0.1 * 5.0 * 0.9);
    }

    #[test]
    fn superposition_trivial_case() {
        let mut spec = example_spec();
        spec.q = InputProcess::zeros(3);
        let p = TreeProblem::new(&spec).unwrap();
        let y = evaluate_bsde(&p, &p.zero_control()).unwrap();
        let zq = AdaptedProcess::zeros(3, 0, 4);
        let yx = evaluate_bsde_with(&p, &p.xi, &p.zero_control(), &zq).unwrap();
        assert_eq!(y, yx);
    }

    #[test]
    fn expansion_is_exact_anywhere() {
        let p = TreeProblem::new(&example_spec()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_control(&p, &mut rng);
        let v = random_control(&p, &mut rng);
        let lin: Vec<f64> = [0.5, 1.0, 2.0]
            .iter()
            .map(|&d| quadratic_expansion_check(&p, &u, &v, d).unwrap().linear)
            .collect();
        assert!((lin[0] - lin[2]).abs() < 1e-10 * lin[1].abs().max(1.0));
        let zero = quadratic_expansion_check(&p, &u, &p.zero_control(), 1.0).unwrap();
        assert_eq!(zero.lhs, 0.0);
        assert_eq!(zero.quadratic, 0.0);
    }

    #[test]
    fn verify_example_and_tampered() {
        let p = TreeProblem::new(&example_spec()).unwrap();
        let s = solve(&p, SolveOptions::default()).unwrap();
        let report = verify(&p, &s, &VerifyOptions::default()).unwrap();
        assert!(report.pass, "{:?}", report.failed().collect::<Vec<_>>());
        assert_eq!(report.matching_variant, Some(ValueVariant::Decoupled));

        let bad = verify(&p, &s.with_zero_offsets(), &VerifyOptions::default()).unwrap();
        assert!(!bad.pass);
        assert!(bad.stationarity_per_step.iter().all(|&r| r > 1e-3));
    }

    #[test]
    fn verify_zero_problem() {
        let mut spec = example_spec();
        spec.q = InputProcess::zeros(3);
        spec.eta = InputProcess::zeros(3);
        spec.rho = InputProcess::zeros(2);
        spec.xi = TerminalValue::Constant(Vector::zeros(3));
        let p = TreeProblem::new(&spec).unwrap();
        let s = solve(&p, SolveOptions::default()).unwrap();
        let r = verify(&p, &s, &VerifyOptions::default()).unwrap();
        assert!(r.pass);
        assert_eq!(r.stationarity_max_residual, 0.0);
        assert_eq!(r.oracle_cost, 0.0);
        assert_eq!(r.superposition_error, 0.0);
    }

    #[test]
    fn feedback_policy_unrolls_to_u_star() {
        let p = TreeProblem::new(&example_spec()).unwrap();
        let s = solve(&p, SolveOptions::default()).unwrap();
        let u = s.policy().unroll().unwrap();
        assert!(u.max_abs_diff(&s.u_star).unwrap() == 0.0);
    }
}
