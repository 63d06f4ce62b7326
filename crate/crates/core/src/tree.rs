//! Exact finite probability space for Rademacher noise.
//!
//! The filtration is generated by `ω_0, …, ω_{N−1}` with `ω_k = ±1`,
//! each with probability ½. An `𝓕_{t−1}`-atom is a bit-path
//! `(ω_0, …, ω_{t−1})` read as a binary number with `ω_0` as the most
//! significant bit and `ω = +1 ↦ 0`. Time index `t` therefore owns
//! `2^t` atoms, and the two children of atom `h` at time `t` are `2h`
//! (`ω_t = +1`) and `2h + 1` (`ω_t = −1`).
//!
//! Process values at one time index are stored as a `dim × 2^t` matrix
//! whose columns are the atoms, so coefficient maps act on all atoms at
//! once with a single matrix product.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// Default maximum tree depth.
pub const DEFAULT_PATH_CAP: usize = 22;

/// Values of one vector process at one time index: `dim × atoms`.
pub type Level = Matrix;

/// Number of atoms owned by time index `t`.
pub fn atoms_at(time: usize) -> usize {
    1usize << time
}

/// Exact `2^{-t}` scaling factor.
pub fn atom_weight(time: usize) -> f64 {
    1.0 / (1u64 << time) as f64
}

/// A dyadic probability `numerator / 2^exponent`, kept exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dyadic {
    pub numerator: u64,
    pub exponent: u32,
}

impl Dyadic {
    pub fn to_f64(self) -> f64 {
        self.numerator as f64 / (1u64 << self.exponent) as f64
    }
}

/// One full noise path with its probability.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    /// `true` for `ω = −1` (bit 1).
    pub bits: Vec<bool>,
    pub probability: Dyadic,
}

impl Path {
    /// `±1` realisations along the path.
    pub fn signs(&self) -> Vec<i8> {
        self.bits.iter().map(|&b| if b { -1 } else { 1 }).collect()
    }
}

/// Binary non-recombining tree of a given depth.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TreeSpace {
    depth: usize,
}

impl TreeSpace {
    pub fn new(depth: usize) -> Result<Self> {
        Self::with_cap(depth, DEFAULT_PATH_CAP)
    }

    pub fn with_cap(depth: usize, cap: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::EmptyHorizon);
        }
        if depth > cap || depth > 52 {
            return Err(Error::DepthCap {
                depth,
                cap: cap.min(52),
            });
        }
        Ok(Self { depth })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn atoms(&self, time: usize) -> usize {
        atoms_at(time)
    }

    /// All `2^N` full paths in lexicographic bit order.
    pub fn enumerate_paths(&self) -> Vec<Path> {
        let n = self.depth;
        (0..atoms_at(n))
            .map(|idx| Path {
                bits: atom_bits(idx, n),
                probability: Dyadic {
                    numerator: 1,
                    exponent: n as u32,
                },
            })
            .collect()
    }
}

/// Bit-path of atom `index` at time `time` (most significant first).
pub fn atom_bits(index: usize, time: usize) -> Vec<bool> {
    (0..time).rev().map(|s| (index >> s) & 1 == 1).collect()
}

/// Inverse of [`atom_bits`].
pub fn atom_index(bits: &[bool]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | usize::from(b))
}

/// An adapted vector process over a contiguous range of time indices.
/// `levels[i]` holds time `first_time + i` on `2^{first_time+i}` atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptedProcess {
    dim: usize,
    first_time: usize,
    levels: Vec<Level>,
}

impl AdaptedProcess {
    pub fn new(dim: usize, first_time: usize, levels: Vec<Level>) -> Result<Self> {
        for (i, level) in levels.iter().enumerate() {
            let t = first_time + i;
            if level.nrows() != dim || level.ncols() != atoms_at(t) {
                return Err(Error::Level(alloc::format!(
                    "time {t}: got {}×{}, expected {dim}×{}",
                    level.nrows(),
                    level.ncols(),
                    atoms_at(t)
                )));
            }
            if level.iter().any(|x| !x.is_finite()) {
                return Err(Error::Level(alloc::format!("time {t}: non-finite entry")));
            }
        }
        Ok(Self {
            dim,
            first_time,
            levels,
        })
    }

    /// Zero process on times `first_time .. first_time + len`.
    pub fn zeros(dim: usize, first_time: usize, len: usize) -> Self {
        let levels = (first_time..first_time + len)
            .map(|t| Matrix::zeros(dim, atoms_at(t)))
            .collect();
        Self {
            dim,
            first_time,
            levels,
        }
    }

    /// Deterministic process: the same vector on every atom of every time.
    pub fn constant(v: &Vector, first_time: usize, len: usize) -> Self {
        let levels = (first_time..first_time + len)
            .map(|t| crate::linalg::repeat_columns(v, atoms_at(t)))
            .collect();
        Self {
            dim: v.len(),
            first_time,
            levels,
        }
    }

    pub(crate) fn from_levels_unchecked(dim: usize, first_time: usize, levels: Vec<Level>) -> Self {
        debug_assert!(levels
            .iter()
            .enumerate()
            .all(|(i, l)| l.nrows() == dim && l.ncols() == atoms_at(first_time + i)));
        Self {
            dim,
            first_time,
            levels,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn first_time(&self) -> usize {
        self.first_time
    }

    /// One past the last time index.
    pub fn end_time(&self) -> usize {
        self.first_time + self.levels.len()
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    /// Values at time `t`.
    pub fn at(&self, t: usize) -> &Level {
        &self.levels[t - self.first_time]
    }

    pub fn at_mut(&mut self, t: usize) -> &mut Level {
        &mut self.levels[t - self.first_time]
    }

    /// Vector at time `t` on atom `atom`.
    pub fn value(&self, t: usize, atom: usize) -> Vector {
        self.at(t).column(atom).into_owned()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.first_time == other.first_time
            && self.levels.len() == other.levels.len()
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if !self.same_shape(other) {
            return Err(Error::Level("combine: shape mismatch".into()));
        }
        let levels = self
            .levels
            .iter()
            .zip(&other.levels)
            .map(|(x, y)| x * a + y * b)
            .collect();
        Ok(Self::from_levels_unchecked(self.dim, self.first_time, levels))
    }

    pub fn scaled(&self, a: f64) -> Self {
        let levels = self.levels.iter().map(|x| x * a).collect();
        Self::from_levels_unchecked(self.dim, self.first_time, levels)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.levels
            .iter()
            .flat_map(|l| l.iter())
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Largest absolute entry of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        Ok(self.combine(1.0, other, -1.0)?.max_abs())
    }

    /// Stacks all entries, time-major, then atom, then component.
    pub fn stacked(&self) -> Vector {
        let total: usize = self.levels.iter().map(|l| l.len()).sum();
        let mut out = Vector::zeros(total);
        let mut o = 0;
        for l in &self.levels {
            // column-major storage is atom-major, component-minor
            out.rows_mut(o, l.len()).copy_from_slice(l.as_slice());
            o += l.len();
        }
        out
    }

    /// Inverse of [`AdaptedProcess::stacked`].
    pub fn unstack(dim: usize, first_time: usize, len: usize, v: &Vector) -> Result<Self> {
        let total: usize = (first_time..first_time + len)
            .map(|t| dim * atoms_at(t))
            .sum();
        if v.len() != total {
            return Err(Error::Level(alloc::format!(
                "unstack: {} entries, expected {total}",
                v.len()
            )));
        }
        let mut o = 0;
        let levels = (first_time..first_time + len)
            .map(|t| {
                let cols = atoms_at(t);
                let l = Matrix::from_column_slice(dim, cols, &v.as_slice()[o..o + dim * cols]);
                o += dim * cols;
                l
            })
            .collect();
        Ok(Self::from_levels_unchecked(dim, first_time, levels))
    }
}

/// Conditional drift and martingale part of a level one step ahead:
/// given values on the `2^{k+1}` atoms of time `k+1`, returns
/// `(𝔼_{k−1}[v], 𝔼_{k−1}[v ω_k])` on the `2^k` atoms of time `k`.
pub fn cond_pair(next: &Level) -> Result<(Level, Level)> {
    let cols = next.ncols();
    if cols < 2 || !cols.is_power_of_two() {
        return Err(Error::Level(alloc::format!(
            "cond_pair: {cols} atoms is not a level below time 0"
        )));
    }
    let half = cols / 2;
    let dim = next.nrows();
    let mut drift = Matrix::zeros(dim, half);
    let mut mart = Matrix::zeros(dim, half);
    for h in 0..half {
        let up = next.column(2 * h);
        let down = next.column(2 * h + 1);
        for i in 0..dim {
            drift[(i, h)] = 0.5 * (up[i] + down[i]);
            mart[(i, h)] = 0.5 * (up[i] - down[i]);
        }
    }
    Ok((drift, mart))
}

/// Only the conditional drift `𝔼_{k−1}[v]`.
pub fn cond_drift(next: &Level) -> Result<Level> {
    Ok(cond_pair(next)?.0)
}

/// Forward branching: `v(h, ±1) = base(h) ± slope(h)`.
pub fn branch(base: &Level, slope: &Level) -> Level {
    debug_assert_eq!(base.shape(), slope.shape());
    let (dim, cols) = base.shape();
    let mut next = Matrix::zeros(dim, 2 * cols);
    for h in 0..cols {
        for i in 0..dim {
            next[(i, 2 * h)] = base[(i, h)] + slope[(i, h)];
            next[(i, 2 * h + 1)] = base[(i, h)] - slope[(i, h)];
        }
    }
    next
}

/// Lifts a level at time `t` onto the `2^{t+1}` atoms of time `t+1`
/// (each value copied to both children).
pub fn refine(level: &Level) -> Level {
    branch(level, &Matrix::zeros(level.nrows(), level.ncols()))
}

/// `𝔼[⟨a, b⟩]` for two levels of the same time index.
pub fn expect_inner(a: &Level, b: &Level) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    let t = a.ncols().trailing_zeros() as usize;
    let mut s = 0.0;
    for h in 0..a.ncols() {
        s += a.column(h).dot(&b.column(h));
    }
    s * atom_weight(t)
}

/// `𝔼[⟨M a, a⟩]` on one level.
pub fn expect_quad(m: &Matrix, a: &Level) -> f64 {
    expect_inner(&(m * a), a)
}

/// `𝔼 Σ_k ⟨φ_k, ψ_k⟩`, summed time by time in a fixed order.
pub fn expect_sum(a: &AdaptedProcess, b: &AdaptedProcess) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::Level("expect_sum: shape mismatch".into()));
    }
    Ok(a
        .levels()
        .iter()
        .zip(b.levels())
        .map(|(x, y)| expect_inner(x, y))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn lvl(dim: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Level {
        Matrix::from_fn(dim, cols, f)
    }

    #[test]
    fn deterministic_next_value_has_no_martingale_part() {
        let next = lvl(2, 2, |i, _| 1.5 + i as f64);
        let (d, m) = cond_pair(&next).unwrap();
        assert_eq!(d, lvl(2, 1, |i, _| 1.5 + i as f64));
        assert_eq!(m, Matrix::zeros(2, 1));
    }

    #[test]
    fn two_point_average_and_difference() {
        let next = Matrix::from_row_slice(1, 2, &[2.0, 0.0]);
        let (d, m) = cond_pair(&next).unwrap();
        assert_eq!(d[(0, 0)], 1.0);
        assert_eq!(m[(0, 0)], 1.0);
    }

    #[test]
    fn cond_pair_rejects_root_level() {
        assert!(cond_pair(&Matrix::zeros(3, 1)).is_err());
        assert!(cond_pair(&Matrix::zeros(3, 6)).is_err());
    }

    #[test]
    fn expect_sum_small_cases() {
        let e1 = Vector::from_vec(vec![1.0, 0.0]);
        let p = AdaptedProcess::constant(&e1, 0, 2);
        assert_eq!(expect_sum(&p, &p).unwrap(), 2.0);
        let z = AdaptedProcess::zeros(2, 0, 2);
        assert_eq!(expect_sum(&p, &z).unwrap(), 0.0);
        let short = AdaptedProcess::zeros(2, 0, 1);
        assert!(expect_sum(&p, &short).is_err());
    }

    #[test]
    fn enumerate_paths_is_lexicographic_and_normalized() {
        let one = TreeSpace::new(1).unwrap().enumerate_paths();
        assert_eq!(one.len(), 2);
        assert_eq!(one[0].signs(), vec![1]);
        assert_eq!(one[1].signs(), vec![-1]);
        assert_eq!(one[0].probability.to_f64(), 0.5);

        let two = TreeSpace::new(2).unwrap().enumerate_paths();
        assert_eq!(two.len(), 4);
        assert!(two.iter().all(|p| p.probability.to_f64() == 0.25));
        assert_eq!(two[1].bits, vec![false, true]);

        let four = TreeSpace::new(4).unwrap().enumerate_paths();
        assert_eq!(four.len(), 16);
        let total: f64 = four.iter().map(|p| p.probability.to_f64()).sum();
        assert_eq!(total, 1.0);
    }

    #[test]
    fn depth_cap_is_enforced() {
        assert!(matches!(
            TreeSpace::new(23),
            Err(Error::DepthCap { depth: 23, cap: 22 })
        ));
        assert!(TreeSpace::with_cap(23, 30).is_ok());
        assert!(matches!(TreeSpace::new(0), Err(Error::EmptyHorizon)));
    }

    #[test]
    fn atom_addressing_round_trips() {
        for t in 0..6 {
            for h in 0..atoms_at(t) {
                assert_eq!(atom_index(&atom_bits(h, t)), h);
            }
        }
        // ω_0 = −1, ω_1 = +1  ->  bits 1,0  ->  index 2
        assert_eq!(atom_index(&[true, false]), 2);
    }

    #[test]
    fn branch_then_cond_pair_recovers_inputs() {
        let base = lvl(3, 4, |i, j| (i * 7 + j) as f64 * 0.25);
        let slope = lvl(3, 4, |i, j| (i as f64) - (j as f64) * 0.5);
        let (d, m) = cond_pair(&branch(&base, &slope)).unwrap();
        assert_eq!(d, base);
        assert_eq!(m, slope);
    }

    #[test]
    fn process_shape_is_checked() {
        assert!(AdaptedProcess::new(2, 0, vec![Matrix::zeros(2, 1), Matrix::zeros(2, 3)]).is_err());
        assert!(AdaptedProcess::new(2, 1, vec![Matrix::zeros(2, 2)]).is_ok());
        let bad = Matrix::from_element(1, 1, f64::NAN);
        assert!(AdaptedProcess::new(1, 0, vec![bad]).is_err());
    }

    #[test]
    fn stack_unstack_identity() {
        let p = AdaptedProcess::new(
            2,
            0,
            vec![lvl(2, 1, |i, _| i as f64), lvl(2, 2, |i, j| (10 * i + j) as f64)],
        )
        .unwrap();
        let s = p.stacked();
        assert_eq!(s.len(), 6);
        assert_eq!(AdaptedProcess::unstack(2, 0, 2, &s).unwrap(), p);
    }
}
