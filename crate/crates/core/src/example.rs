//! The four-period reference instance used throughout the tests and
//! shipped by the CLI.

use alloc::vec;

use crate::linalg::{Matrix, Vector};
use crate::model::{InputProcess, ProblemSpec, TerminalValue};

/// Four-period, three-state, two-control instance with constant
/// coefficients, `ξ = (1, 1, 1)ᵀ`.
pub fn example_spec() -> ProblemSpec {
    let n = 4;
    let a = Matrix::from_row_slice(3, 3, &[0.8, 0.2, 0.1, 0.0, 0.9, 0.3, 0.0, 0.1, 0.7]);
    let b = Matrix::from_row_slice(3, 2, &[0.8, 0.2, 0.5, 0.6, 0.3, 0.1]);
    let c = Matrix::from_row_slice(3, 3, &[0.3, 0.2, 0.1, 0.2, 0.5, 0.6, 0.1, 0.4, 0.2]);
    let q = Matrix::from_diagonal(&Vector::from_vec(vec![5.0, 3.0, 4.0]));
    let r = Matrix::from_diagonal(&Vector::from_vec(vec![10.0, 5.0]));
    let s = Matrix::from_row_slice(2, 3, &[0.5, 0.0, 0.0, 0.0, 0.5, 0.2]);
    let g0 = Matrix::from_diagonal(&Vector::from_vec(vec![2.0, 1.0, 1.0]));
    ProblemSpec {
        horizon: n,
        state_dim: 3,
        control_dim: 2,
        a: vec![a; n],
        b: vec![b; n],
        c: vec![c; n],
        q_cost: vec![q; n],
        s_cost: vec![s; n],
        r_cost: vec![r; n],
        g0,
        q: InputProcess::Constant(Vector::from_vec(vec![0.1, 0.0, 0.1])),
        eta: InputProcess::Constant(Vector::from_vec(vec![1.0, 0.0, 1.0])),
        rho: InputProcess::Constant(Vector::from_vec(vec![0.0, 1.0])),
        xi: TerminalValue::Constant(Vector::from_element(3, 1.0)),
    }
}

/// Published four-decimal reference values for [`example_spec`], row-major.
/// `H[k]` is `H_{k+1}`; the other arrays start at time 0.
pub mod reference {
    pub const H: [[f64; 9]; 4] = [
        [1.4643, 0.4627, 0.2451, 0.4627, 1.0434, 0.4581, 0.2451, 0.4581, 0.6439],
        [1.1220, 0.8192, 0.5239, 0.8192, 1.4768, 0.9736, 0.5239, 0.9736, 0.8205],
        [0.9308, 1.1921, 0.8687, 1.1921, 2.4303, 1.8462, 0.8687, 1.8462, 1.4749],
        [0.8849, 1.7796, 1.4200, 1.7796, 4.5299, 3.7023, 1.4200, 3.7023, 3.0580],
    ];

    pub const SIGMA: [[f64; 9]; 4] = [
        [0.1207, 0.1065, 0.0440, 0.1065, 0.1633, 0.0441, 0.0440, 0.0441, 0.0166],
        [0.1111, 0.0958, 0.0407, 0.0958, 0.1482, 0.0397, 0.0407, 0.0397, 0.0154],
        [0.0896, 0.0738, 0.0333, 0.0738, 0.1172, 0.0310, 0.0333, 0.0310, 0.0126],
        [0.0491, 0.0361, 0.0187, 0.0361, 0.0628, 0.0156, 0.0187, 0.0156, 0.0072],
    ];

    pub const PHI: [[f64; 3]; 5] = [
        [0.2674, 0.0126, 0.3167],
        [0.5356, 0.3112, 0.4496],
        [0.9041, 0.7369, 0.6504],
        [1.1671, 1.0813, 0.8762],
        [1.0, 1.0, 1.0],
    ];

    pub const K: [[f64; 6]; 4] = [
        [-0.0630, -0.0201, -0.0254, -0.0137, -0.0669, -0.0354],
        [-0.0522, -0.0532, -0.0516, -0.0280, -0.0853, -0.0721],
        [-0.0545, -0.1010, -0.0899, -0.0479, -0.1392, -0.1234],
        [-0.0811, -0.1832, -0.1486, -0.0951, -0.2532, -0.2075],
    ];

    pub const B: [[f64; 2]; 4] = [[-0.0056, -0.1920], [-0.0016, -0.1953], [0.0013, -0.1953], [0.0039, -0.1932]];

    pub const VALUE: f64 = 27.4609;
}
