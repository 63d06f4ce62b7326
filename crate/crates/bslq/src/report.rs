//! JSON reports written by the CLI.

use bslq_core::oracle::{self, QuadraticProgram, VerificationReport};
use bslq_core::solver::{FeedbackSolution, ValueSet, ValueVariant};
use bslq_core::{AdaptedProcess, Result, TreeProblem};
use serde::Serialize;

use crate::problem_file::{rows_of, tree_table, RowMajor, TreeTable};

pub const TOOL: &str = "bslq";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn table(p: &AdaptedProcess) -> TreeTable {
    tree_table(p.levels(), p.first_time())
}

/// Variant whose value is closest to the exact cost (ties resolved in
/// [`ValueVariant::ALL`] order).
pub fn closest_variant(values: &ValueSet, oracle_cost: f64) -> ValueVariant {
    let mut best = ValueVariant::ALL[0];
    for v in ValueVariant::ALL {
        if (values.get(v) - oracle_cost).abs() < (values.get(best) - oracle_cost).abs() {
            best = v;
        }
    }
    best
}

#[derive(Serialize)]
struct Values {
    decoupled: f64,
    theorem: f64,
    derivation: f64,
    oracle_cost: f64,
}

#[derive(Serialize)]
struct Transformed {
    #[serde(rename = "Sigma")]
    sigma: Vec<RowMajor>,
    phi: TreeTable,
    #[serde(rename = "K")]
    gains: Vec<RowMajor>,
    b: TreeTable,
}

#[derive(Serialize)]
struct Diagnostics {
    theta_conditions: Vec<f64>,
    initial_condition: f64,
    sigma_min_eigenvalue: Vec<f64>,
    sigma_asymmetry: f64,
    gamma_asymmetry: f64,
    h_asymmetry: f64,
    cancellation_residual: f64,
    rbar_min_eigenvalue: f64,
    boundary_residual: f64,
    terminal_residual: f64,
    stationarity_residual: f64,
}

/// Report of `bslq solve`.
#[derive(Serialize)]
pub struct SolutionReport {
    tool: &'static str,
    version: &'static str,
    seed: u64,
    route: &'static str,
    value_variant: &'static str,
    value: f64,
    values: Values,
    notes: Vec<String>,
    horizon: usize,
    state_dim: usize,
    control_dim: usize,
    #[serde(rename = "H")]
    h: Vec<RowMajor>,
    #[serde(rename = "Sigma")]
    sigma: Vec<RowMajor>,
    #[serde(rename = "K")]
    gains: Vec<RowMajor>,
    b: TreeTable,
    phi: TreeTable,
    transformed: Transformed,
    diagnostics: Diagnostics,
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Explanations for disagreements between the value expressions.
pub fn value_notes(values: &ValueSet, oracle_cost: f64, q_is_zero: bool) -> Vec<String> {
    let mut notes = Vec::new();
    if values.theorem != values.derivation {
        notes.push(format!(
            "theorem and derivation values differ by {:.6e}: the derivation adds the per-step <H_k q_k, q_k> terms{}",
            values.derivation - values.theorem,
            if q_is_zero { "" } else { " and q is nonzero" }
        ));
    }
    for v in ValueVariant::ALL {
        let gap = relative_gap(values.get(v), oracle_cost);
        if gap > 1e-8 {
            notes.push(format!(
                "{} value {:.6} differs from the exact cost {:.6} of the returned control (relative gap {gap:.3e})",
                v.name(),
                values.get(v),
                oracle_cost
            ));
        }
    }
    notes
}

impl SolutionReport {
    /// Builds the report; the exact cost and stationarity residual of
    /// `u*` are evaluated on the tree.
    pub fn new(problem: &TreeProblem, sol: &FeedbackSolution, seed: u64) -> Result<Self> {
        let y = oracle::evaluate_bsde(problem, &sol.u_star)?;
        let x = oracle::adjoint_forward(problem, &sol.u_star, &y)?;
        let oracle_cost = oracle::evaluate_cost(problem, &sol.u_star, &y)?;
        let stationarity = oracle::stationarity_residual(problem, &sol.u_star, &y, &x)?;
        let variant = sol.value_variant;
        let tc = &sol.coefficients;
        let spec = &problem.spec;
        let t_gains: Vec<RowMajor> = (0..spec.horizon)
            .map(|k| rows_of(&-(&tc.rbar_inv[k] * spec.b[k].transpose())))
            .collect();
        let t_offsets: Vec<_> = (0..spec.horizon).map(|k| -(&tc.rbar_inv[k] * tc.rhobar.at(k))).collect();
        let d = &sol.diagnostics;
        Ok(Self {
            tool: TOOL,
            version: VERSION,
            seed,
            route: sol.route.name(),
            value_variant: variant.name(),
            value: sol.values.get(variant),
            values: Values {
                decoupled: sol.values.decoupled,
                theorem: sol.values.theorem,
                derivation: sol.values.derivation,
                oracle_cost,
            },
            notes: value_notes(&sol.values, oracle_cost, problem.q.max_abs() == 0.0),
            horizon: spec.horizon,
            state_dim: spec.state_dim,
            control_dim: spec.control_dim,
            h: tc.h.iter().map(rows_of).collect(),
            sigma: sol.sigma().iter().map(rows_of).collect(),
            gains: sol.gains.iter().map(rows_of).collect(),
            b: table(&sol.offsets),
            phi: table(sol.phi()),
            transformed: Transformed {
                sigma: sol.transformed.riccati.sigma.iter().map(rows_of).collect(),
                phi: table(&sol.transformed.phi),
                gains: t_gains,
                b: tree_table(&t_offsets, 0),
            },
            diagnostics: Diagnostics {
                theta_conditions: d.theta_conditions.clone(),
                initial_condition: d.initial_condition,
                sigma_min_eigenvalue: d.sigma_min_eigenvalue.clone(),
                sigma_asymmetry: d.sigma_asymmetry,
                gamma_asymmetry: d.gamma_asymmetry,
                h_asymmetry: d.h_asymmetry,
                cancellation_residual: d.cancellation_residual,
                rbar_min_eigenvalue: d.rbar_min_eigenvalue,
                boundary_residual: d.boundary_residual,
                terminal_residual: d.terminal_residual,
                stationarity_residual: stationarity,
            },
        })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn oracle_cost(&self) -> f64 {
        self.values.oracle_cost
    }

    pub fn value_variant(&self) -> &'static str {
        self.value_variant
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }
}

#[derive(Serialize)]
struct CheckOut {
    name: &'static str,
    value: f64,
    threshold: f64,
    pass: bool,
    detail: String,
}

#[derive(Serialize)]
struct QpOut {
    dim: usize,
    min_eigenvalue: f64,
    control_gap: f64,
    cost: f64,
    cost_gap: f64,
}

#[derive(Serialize)]
struct ValueMatch {
    variant: &'static str,
    value: f64,
    abs_error: f64,
}

/// Report of `bslq verify`.
#[derive(Serialize)]
pub struct VerifyReport {
    tool: &'static str,
    version: &'static str,
    seed: u64,
    pass: bool,
    route: &'static str,
    value_variant: &'static str,
    value: f64,
    oracle_cost: f64,
    matching_variant: Option<&'static str>,
    value_match: Vec<ValueMatch>,
    stationarity_per_step: Vec<f64>,
    checks: Vec<CheckOut>,
    qp: Option<QpOut>,
    notes: Vec<String>,
}

impl VerifyReport {
    pub fn new(problem: &TreeProblem, sol: &FeedbackSolution, r: &VerificationReport) -> Self {
        Self {
            tool: TOOL,
            version: VERSION,
            seed: r.seed,
            pass: r.pass,
            route: sol.route.name(),
            value_variant: sol.value_variant.name(),
            value: sol.value,
            oracle_cost: r.oracle_cost,
            matching_variant: r.matching_variant.map(ValueVariant::name),
            value_match: r
                .value_match
                .iter()
                .map(|&(v, e)| ValueMatch {
                    variant: v.name(),
                    value: sol.values.get(v),
                    abs_error: e,
                })
                .collect(),
            stationarity_per_step: r.stationarity_per_step.clone(),
            checks: r
                .checks
                .iter()
                .map(|c| CheckOut {
                    name: c.name,
                    value: c.value,
                    threshold: c.threshold,
                    pass: c.pass,
                    detail: c.detail.clone(),
                })
                .collect(),
            qp: r.qp.as_ref().map(|q| QpOut {
                dim: q.dim,
                min_eigenvalue: q.min_eigenvalue,
                control_gap: q.control_gap,
                cost: q.cost,
                cost_gap: q.cost_gap,
            }),
            notes: value_notes(&sol.values, r.oracle_cost, problem.q.max_abs() == 0.0),
        }
    }
}

/// Report of `bslq oracle`: the brute-force QP on its own.
#[derive(Serialize)]
pub struct OracleReport {
    tool: &'static str,
    version: &'static str,
    dim: usize,
    min_eigenvalue: f64,
    zero_control_cost: f64,
    qp_cost: Option<f64>,
    u: Option<TreeTable>,
    error: Option<String>,
}

impl OracleReport {
    pub fn new(problem: &TreeProblem, qp: &QuadraticProgram) -> Result<Self> {
        let min_eigenvalue = bslq_core::linalg::min_eigenvalue(&qp.hessian);
        let (qp_cost, u, error) = match oracle::qp_solve(problem, qp) {
            Ok(u) => (Some(oracle::cost(problem, &u)?), Some(table(&u)), None),
            Err(e) => (None, None, Some(e.to_string())),
        };
        Ok(Self {
            tool: TOOL,
            version: VERSION,
            dim: qp.gradient.len(),
            min_eigenvalue,
            zero_control_cost: qp.constant,
            qp_cost,
            u,
            error,
        })
    }

    pub fn is_convex(&self) -> bool {
        self.error.is_none()
    }
}
