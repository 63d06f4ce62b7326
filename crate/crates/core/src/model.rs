//! Problem instances: coefficients, weights, nonhomogeneous data and the
//! terminal condition, plus validation of the standing assumptions.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::tree::{atoms_at, AdaptedProcess, Level, TreeSpace, DEFAULT_PATH_CAP};

/// Relative Frobenius tolerance for symmetry of `G0`, `Q_k`, `R_k`.
pub const TOL_SYM: f64 = 1e-9;
/// `R_k ≫ 0` means `λ_min(R_k) ≥ TOL_POSITIVE · max(1, ‖R_k‖)`.
pub const TOL_POSITIVE: f64 = 1e-8;
/// `M ⪰ 0` means `λ_min(M) ≥ −TOL_PSD · max(1, ‖M‖)`.
pub const TOL_PSD: f64 = 1e-10;

/// Vector data indexed by time `0..N`.
#[derive(Clone, Debug, PartialEq)]
pub enum InputProcess {
    /// One deterministic vector for every step.
    Constant(Vector),
    /// One deterministic vector per step.
    PerStep(Vec<Vector>),
    /// Per step `k` a `dim × 2^k` level.
    Adapted(Vec<Level>),
}

impl InputProcess {
    pub fn zeros(dim: usize) -> Self {
        InputProcess::Constant(Vector::zeros(dim))
    }

    fn check(&self, field: &'static str, dim: usize, horizon: usize) -> Result<()> {
        match self {
            InputProcess::Constant(v) => check_vec(field, 0, v, dim),
            InputProcess::PerStep(vs) => {
                check_len(field, vs.len(), horizon)?;
                vs.iter()
                    .enumerate()
                    .try_for_each(|(k, v)| check_vec(field, k, v, dim))
            }
            InputProcess::Adapted(levels) => {
                check_len(field, levels.len(), horizon)?;
                levels
                    .iter()
                    .enumerate()
                    .try_for_each(|(k, l)| check_level(field, k, l, dim))
            }
        }
    }

    fn materialize(&self, dim: usize, horizon: usize) -> AdaptedProcess {
        let levels = (0..horizon)
            .map(|k| match self {
                InputProcess::Constant(v) => linalg::repeat_columns(v, atoms_at(k)),
                InputProcess::PerStep(vs) => linalg::repeat_columns(&vs[k], atoms_at(k)),
                InputProcess::Adapted(ls) => ls[k].clone(),
            })
            .collect();
        AdaptedProcess::from_levels_unchecked(dim, 0, levels)
    }

    pub fn is_zero(&self) -> bool {
        match self {
            InputProcess::Constant(v) => v.iter().all(|&x| x == 0.0),
            InputProcess::PerStep(vs) => vs.iter().all(|v| v.iter().all(|&x| x == 0.0)),
            InputProcess::Adapted(ls) => ls.iter().all(|l| l.iter().all(|&x| x == 0.0)),
        }
    }
}

/// Terminal condition `ξ`, measurable at the last level (`2^N` atoms).
#[derive(Clone, Debug, PartialEq)]
pub enum TerminalValue {
    Constant(Vector),
    Adapted(Level),
}

impl TerminalValue {
    fn materialize(&self, horizon: usize) -> Level {
        match self {
            TerminalValue::Constant(v) => linalg::repeat_columns(v, atoms_at(horizon)),
            TerminalValue::Adapted(l) => l.clone(),
        }
    }
}

/// A full problem instance. Coefficient sequences have one entry per
/// step `k = 0..N−1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub horizon: usize,
    pub state_dim: usize,
    pub control_dim: usize,
    pub a: Vec<Matrix>,
    pub b: Vec<Matrix>,
    pub c: Vec<Matrix>,
    /// State weights `Q_k` (n×n).
    pub q_cost: Vec<Matrix>,
    /// Cross weights `S_k` (m×n).
    pub s_cost: Vec<Matrix>,
    /// Control weights `R_k` (m×m).
    pub r_cost: Vec<Matrix>,
    pub g0: Matrix,
    /// Inhomogeneity of the state equation.
    pub q: InputProcess,
    pub eta: InputProcess,
    pub rho: InputProcess,
    pub xi: TerminalValue,
}

fn check_len(field: &'static str, found: usize, expected: usize) -> Result<()> {
    if found != expected {
        return Err(Error::Length {
            field,
            expected,
            found,
        });
    }
    Ok(())
}

fn check_mat(field: &'static str, index: usize, m: &Matrix, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::Dimension {
            field,
            index,
            expected: format!("{rows}×{cols}"),
            found: format!("{}×{}", m.nrows(), m.ncols()),
        });
    }
    if !linalg::all_finite(m) {
        return Err(Error::NonFinite { field, index });
    }
    Ok(())
}

fn check_vec(field: &'static str, index: usize, v: &Vector, dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(Error::Dimension {
            field,
            index,
            expected: format!("{dim}"),
            found: format!("{}", v.len()),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { field, index });
    }
    Ok(())
}

fn check_level(field: &'static str, time: usize, l: &Level, dim: usize) -> Result<()> {
    if l.nrows() != dim {
        return Err(Error::Dimension {
            field,
            index: time,
            expected: format!("{dim}"),
            found: format!("{}", l.nrows()),
        });
    }
    if l.ncols() != atoms_at(time) {
        return Err(Error::AtomCount {
            field,
            time,
            expected: atoms_at(time),
            found: l.ncols(),
        });
    }
    if !linalg::all_finite(l) {
        return Err(Error::NonFinite { field, index: time });
    }
    Ok(())
}

impl ProblemSpec {
    /// Structural consistency: horizon, dimensions, sequence lengths,
    /// atom counts and finiteness. Assumption checks are separate
    /// ([`validate_spec`]).
    pub fn check_structure(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::EmptyHorizon);
        }
        if self.state_dim == 0 {
            return Err(Error::EmptyDimension { what: "state_dim" });
        }
        if self.control_dim == 0 {
            return Err(Error::EmptyDimension { what: "control_dim" });
        }
        let (n, m, big_n) = (self.state_dim, self.control_dim, self.horizon);
        let seqs: [(&'static str, &Vec<Matrix>, usize, usize); 6] = [
            ("A", &self.a, n, n),
            ("B", &self.b, n, m),
            ("C", &self.c, n, n),
            ("Q", &self.q_cost, n, n),
            ("S", &self.s_cost, m, n),
            ("R", &self.r_cost, m, m),
        ];
        for (field, seq, rows, cols) in seqs {
            check_len(field, seq.len(), big_n)?;
            for (k, mat) in seq.iter().enumerate() {
                check_mat(field, k, mat, rows, cols)?;
            }
        }
        check_mat("G0", 0, &self.g0, n, n)?;
        self.q.check("q", n, big_n)?;
        self.eta.check("eta", n, big_n)?;
        self.rho.check("rho", m, big_n)?;
        match &self.xi {
            TerminalValue::Constant(v) => check_vec("xi", big_n, v, n)?,
            TerminalValue::Adapted(l) => check_level("xi", big_n, l, n)?,
        }
        Ok(())
    }

    /// Copy with `G0`, `Q_k`, `R_k` replaced by their symmetric parts.
    pub fn symmetrized(&self) -> Self {
        let mut out = self.clone();
        out.g0 = linalg::symmetrize(&self.g0);
        out.q_cost = self.q_cost.iter().map(linalg::symmetrize).collect();
        out.r_cost = self.r_cost.iter().map(linalg::symmetrize).collect();
        out
    }

    /// Same coefficients with `ξ = q = η = ρ = 0`.
    pub fn homogeneous(&self) -> Self {
        let mut out = self.clone();
        out.q = InputProcess::zeros(self.state_dim);
        out.eta = InputProcess::zeros(self.state_dim);
        out.rho = InputProcess::zeros(self.control_dim);
        out.xi = TerminalValue::Constant(Vector::zeros(self.state_dim));
        out
    }

    /// Number of stacked control coordinates `m·(2^N − 1)`.
    pub fn control_coordinates(&self) -> usize {
        self.control_dim * (atoms_at(self.horizon) - 1)
    }
}

/// What kind of standing assumption failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    Asymmetric,
    NotPositive,
    NotPsd,
}

/// One violated assumption.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Time index of the offending coefficient (0 for `G0`).
    pub index: usize,
    /// Offending eigenvalue or relative asymmetry.
    pub magnitude: f64,
    pub message: String,
}

/// Violated standing assumptions; empty when the spec is admissible.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn contains(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.message.contains(needle))
    }

    fn push(&mut self, kind: ViolationKind, index: usize, magnitude: f64, message: String) {
        self.violations.push(Violation {
            kind,
            index,
            magnitude,
            message,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "  {}", v.message)?;
        }
        Ok(())
    }
}

/// Checks symmetry of `G0, Q_k, R_k`, `G0 ⪰ 0`, `R_k ≫ 0` and
/// `Q_k − S_kᵀR_k⁻¹S_k ⪰ 0`. The spec must be structurally consistent.
pub fn validate_spec(spec: &ProblemSpec) -> Result<ValidationReport> {
    spec.check_structure()?;
    let mut report = ValidationReport::default();

    let symmetric = |report: &mut ValidationReport, name: String, k: usize, m: &Matrix| {
        let asym = linalg::relative_asymmetry(m);
        if asym > TOL_SYM {
            report.push(
                ViolationKind::Asymmetric,
                k,
                asym,
                format!("{name} not symmetric (relative asymmetry {asym:.3e})"),
            );
        }
    };
    symmetric(&mut report, "G0".into(), 0, &spec.g0);
    for k in 0..spec.horizon {
        symmetric(&mut report, format!("Q_{k}"), k, &spec.q_cost[k]);
        symmetric(&mut report, format!("R_{k}"), k, &spec.r_cost[k]);
    }

    let g0 = linalg::symmetrize(&spec.g0);
    let lg = linalg::min_eigenvalue(&g0);
    if !linalg::is_psd(&g0, TOL_PSD) {
        report.push(
            ViolationKind::NotPsd,
            0,
            lg,
            format!("G0 not PSD (min eigenvalue {lg:.6e})"),
        );
    }

    for k in 0..spec.horizon {
        let r = linalg::symmetrize(&spec.r_cost[k]);
        let lr = linalg::min_eigenvalue(&r);
        if lr < TOL_POSITIVE * linalg::spectral_scale(&r) {
            report.push(
                ViolationKind::NotPositive,
                k,
                lr,
                format!("R_{k} not uniformly positive (min eigenvalue {lr:.6e})"),
            );
            continue;
        }
        let Ok(r_inv) = linalg::spd_inverse(&r, "R", k) else {
            report.push(
                ViolationKind::NotPositive,
                k,
                lr,
                format!("R_{k} not uniformly positive (Cholesky failed)"),
            );
            continue;
        };
        let s = &spec.s_cost[k];
        let qbar = linalg::symmetrize(&spec.q_cost[k]) - s.transpose() * &r_inv * s;
        let lq = linalg::min_eigenvalue(&qbar);
        if !linalg::is_psd(&qbar, TOL_PSD) {
            report.push(
                ViolationKind::NotPsd,
                k,
                lq,
                format!("Q_{k} − S_{k}ᵀR_{k}⁻¹S_{k} not PSD (min eigenvalue {lq:.6e})"),
            );
        }
    }
    Ok(report)
}

/// A spec laid out on its tree: coefficients (symmetrized) plus every
/// data process materialized atom by atom.
#[derive(Clone, Debug)]
pub struct TreeProblem {
    pub spec: ProblemSpec,
    pub tree: TreeSpace,
    pub q: AdaptedProcess,
    pub eta: AdaptedProcess,
    pub rho: AdaptedProcess,
    /// `ξ` on the `2^N` atoms of the terminal level.
    pub xi: Level,
}

/// Materializes `q, η, ρ, ξ` on the atoms of `tree`. Only structure is
/// checked; deterministic inputs are copied to every atom and adapted
/// inputs pass through unchanged.
pub fn broadcast(spec: &ProblemSpec, tree: TreeSpace) -> Result<TreeProblem> {
    spec.check_structure()?;
    if tree.depth() != spec.horizon {
        return Err(Error::Level(format!(
            "tree depth {} differs from horizon {}",
            tree.depth(),
            spec.horizon
        )));
    }
    let (n, m, big_n) = (spec.state_dim, spec.control_dim, spec.horizon);
    Ok(TreeProblem {
        q: spec.q.materialize(n, big_n),
        eta: spec.eta.materialize(n, big_n),
        rho: spec.rho.materialize(m, big_n),
        xi: spec.xi.materialize(big_n),
        spec: spec.clone(),
        tree,
    })
}

impl TreeProblem {
    /// Validates the assumptions, symmetrizes and broadcasts with the
    /// default path cap.
    pub fn new(spec: &ProblemSpec) -> Result<Self> {
        Self::with_cap(spec, DEFAULT_PATH_CAP)
    }

    pub fn with_cap(spec: &ProblemSpec, cap: usize) -> Result<Self> {
        let report = validate_spec(spec)?;
        if !report.is_empty() {
            return Err(Error::Invalid(report));
        }
        let tree = TreeSpace::with_cap(spec.horizon, cap)?;
        broadcast(&spec.symmetrized(), tree)
    }

    /// Structural checks only; used by the oracle, which does not need
    /// the convexity assumptions.
    pub fn unchecked(spec: &ProblemSpec, cap: usize) -> Result<Self> {
        spec.check_structure()?;
        let tree = TreeSpace::with_cap(spec.horizon, cap)?;
        broadcast(spec, tree)
    }

    pub fn horizon(&self) -> usize {
        self.spec.horizon
    }

    pub fn n(&self) -> usize {
        self.spec.state_dim
    }

    pub fn m(&self) -> usize {
        self.spec.control_dim
    }

    /// Same coefficients, all data zero.
    pub fn homogeneous(&self) -> Self {
        let n = self.n();
        let m = self.m();
        let big_n = self.horizon();
        Self {
            spec: self.spec.homogeneous(),
            tree: self.tree,
            q: AdaptedProcess::zeros(n, 0, big_n),
            eta: AdaptedProcess::zeros(n, 0, big_n),
            rho: AdaptedProcess::zeros(m, 0, big_n),
            xi: Matrix::zeros(n, atoms_at(big_n)),
        }
    }

    /// Zero control process of the right shape.
    pub fn zero_control(&self) -> AdaptedProcess {
        AdaptedProcess::zeros(self.m(), 0, self.horizon())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::example::example_spec;
    use alloc::vec;

    #[test]
    fn example_is_admissible() {
        let report = validate_spec(&example_spec()).unwrap();
        assert!(report.is_empty(), "{report}");
    }

    #[test]
    fn zero_r_is_reported() {
        let mut spec = example_spec();
        spec.r_cost[0] = Matrix::zeros(2, 2);
        let report = validate_spec(&spec).unwrap();
        assert!(report.contains("R_0 not uniformly positive"), "{report}");
    }

    #[test]
    fn zero_q_with_cross_term_is_not_psd() {
        let mut spec = example_spec();
        spec.q_cost[0] = Matrix::zeros(3, 3);
        let report = validate_spec(&spec).unwrap();
        assert!(report.contains("Q_0 − S_0ᵀR_0⁻¹S_0 not PSD"), "{report}");
        let v = &report.violations[0];
        assert_eq!(v.index, 0);
        assert!(v.magnitude < -TOL_PSD);
    }

    #[test]
    fn exact_zero_eigenvalue_passes() {
        let mut spec = example_spec();
        let r_inv = linalg::spd_inverse(&spec.r_cost[0], "R", 0).unwrap();
        let s = spec.s_cost[0].clone();
        spec.q_cost[0] = s.transpose() * r_inv * s;
        assert!(validate_spec(&spec).unwrap().is_empty());
    }

    #[test]
    fn asymmetry_is_reported_and_validation_is_pure() {
        let mut spec = example_spec();
        spec.g0[(0, 1)] = 1e-3;
        let before = spec.clone();
        let r1 = validate_spec(&spec).unwrap();
        let r2 = validate_spec(&spec).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(spec, before);
        assert!(r1.contains("G0 not symmetric"));
    }

    #[test]
    fn structural_errors_are_distinct() {
        let mut spec = example_spec();
        spec.horizon = 0;
        assert!(matches!(validate_spec(&spec), Err(Error::EmptyHorizon)));

        let mut spec = example_spec();
        spec.b[2] = Matrix::zeros(3, 3);
        assert!(matches!(
            validate_spec(&spec),
            Err(Error::Dimension { field: "B", index: 2, .. })
        ));

        let mut spec = example_spec();
        spec.xi = TerminalValue::Adapted(Matrix::zeros(3, 8));
        assert!(matches!(
            spec.check_structure(),
            Err(Error::AtomCount { field: "xi", time: 4, expected: 16, found: 8 })
        ));
    }

    #[test]
    fn broadcast_copies_deterministic_data() {
        let p = TreeProblem::new(&example_spec()).unwrap();
        let q2 = p.q.at(2);
        assert_eq!(q2.ncols(), 4);
        for h in 0..4 {
            assert_eq!(q2.column(h).as_slice(), &[0.1, 0.0, 0.1]);
        }
        assert_eq!(p.xi.ncols(), 16);
        assert!(p.xi.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn broadcast_passes_adapted_data_through() {
        let mut spec = example_spec();
        let xi = Matrix::from_fn(3, 16, |i, j| (i * 16 + j) as f64 * 0.125 - 1.0);
        spec.xi = TerminalValue::Adapted(xi.clone());
        let levels: Vec<Level> = (0..4)
            .map(|k| Matrix::from_fn(2, atoms_at(k), |i, j| (i + 3 * j) as f64))
            .collect();
        spec.rho = InputProcess::Adapted(levels.clone());
        let p = TreeProblem::new(&spec).unwrap();
        assert_eq!(p.xi, xi);
        assert_eq!(p.rho.levels(), &levels[..]);
    }

    #[test]
    fn per_step_data_is_checked() {
        let mut spec = example_spec();
        spec.q = InputProcess::PerStep(vec![Vector::zeros(3); 3]);
        assert!(matches!(
            spec.check_structure(),
            Err(Error::Length { field: "q", expected: 4, found: 3 })
        ));
    }
}
