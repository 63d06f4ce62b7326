//! Discrete-time backward stochastic linear-quadratic control on an
//! exact binary filtration tree.
//!
//! The state runs backward from a terminal condition `ξ`:
//!
//! ```text
//! y_k = A_k 𝔼_{k−1}[y_{k+1}] + B_k u_k + C_k 𝔼_{k−1}[y_{k+1} ω_k] + q_k,   y_N = ξ,
//! ```
//!
//! with Rademacher noise `ω_k = ±1`, and the cost is a quadratic in
//! `(y_0, 𝔼_{k−1}[y_{k+1}], u_k)` with cross and linear terms. The crate
//! computes the optimal control through a Riccati decoupling
//! ([`solver`]) and checks it against direct evaluation on the tree
//! ([`oracle`]).
//!
//! ```
//! use bslq_core::{example::example_spec, model::TreeProblem, solver};
//!
//! let problem = TreeProblem::new(&example_spec()).unwrap();
//! let sol = solver::solve(&problem, Default::default()).unwrap();
//! let cost = bslq_core::oracle::cost(&problem, &sol.u_star).unwrap();
//! assert!((sol.value - cost).abs() < 1e-10);
//! ```

#![no_std]

extern crate alloc;

pub mod error;
pub mod example;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod random;
pub mod riccati;
pub mod solver;
pub mod transform;
pub mod tree;

pub use error::{Error, Result};
pub use model::{InputProcess, ProblemSpec, TerminalValue, TreeProblem, ValidationReport};
pub use oracle::{verify, ControlPolicy, VerificationReport, VerifyOptions};
pub use solver::{solve, FeedbackSolution, Route, SolveOptions, ValueVariant};
pub use tree::{AdaptedProcess, TreeSpace};
