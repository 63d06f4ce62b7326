//! Strict JSON problem files.
//!
//! ```json
//! {"horizon": 4, "state_dim": 3, "control_dim": 2,
//!  "A": M | [M], "B": ..., "C": ..., "Q": ..., "S": ..., "R": ..., "G0": M,
//!  "q": V | [V] | tree-table, "eta": ..., "rho": ..., "xi": V | tree-table}
//! ```
//!
//! Matrices are row-major arrays of rows. A tree-table lists one vector
//! per atom, `{"atoms": [[[0, 1], [..vector..]], ...]}`, where the path
//! holds the noise signs as bits (`0` for `+1`, `1` for `−1`). For the
//! per-step data `q, η, ρ` the table covers every atom of every step
//! `0..N−1` (path lengths `0..N−1`); for `ξ` it covers the `2^N` paths of
//! length `N`.

use std::collections::BTreeMap;

use bslq_core::linalg::{Matrix, Vector};
use bslq_core::tree::{atom_bits, atom_index, atoms_at, Level};
use bslq_core::{InputProcess, ProblemSpec, TerminalValue};
use serde::{Deserialize, Serialize};

use crate::json;

/// Reasons a problem file cannot be turned into a spec.
#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("field `{field}`: {message}")]
    Field { field: &'static str, message: String },
    #[error(transparent)]
    Structure(#[from] bslq_core::Error),
}

pub(crate) type RowMajor = Vec<Vec<f64>>;

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MatrixData {
    One(RowMajor),
    PerStep(Vec<RowMajor>),
}

/// One vector per atom, keyed by bit-path.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct TreeTable {
    pub atoms: Vec<(Vec<u8>, Vec<f64>)>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum VectorData {
    One(Vec<f64>),
    PerStep(Vec<Vec<f64>>),
    Tree(TreeTable),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TerminalData {
    One(Vec<f64>),
    Tree(TreeTable),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    horizon: usize,
    state_dim: usize,
    control_dim: usize,
    #[serde(rename = "A")]
    a: MatrixData,
    #[serde(rename = "B")]
    b: MatrixData,
    #[serde(rename = "C")]
    c: MatrixData,
    #[serde(rename = "Q")]
    q_cost: MatrixData,
    #[serde(rename = "S")]
    s_cost: MatrixData,
    #[serde(rename = "R")]
    r_cost: MatrixData,
    #[serde(rename = "G0")]
    g0: RowMajor,
    q: VectorData,
    eta: VectorData,
    rho: VectorData,
    xi: TerminalData,
}

fn matrix(field: &'static str, rows: &RowMajor) -> Result<Matrix, LoadError> {
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
        return Err(LoadError::Field {
            field,
            message: format!("row {bad} has {} entries, row 0 has {ncols}", rows[bad].len()),
        });
    }
    Ok(Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub(crate) fn rows_of(m: &Matrix) -> RowMajor {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn matrices(field: &'static str, data: &MatrixData, horizon: usize) -> Result<Vec<Matrix>, LoadError> {
    match data {
        MatrixData::One(rows) => Ok(vec![matrix(field, rows)?; horizon]),
        MatrixData::PerStep(list) => list.iter().map(|rows| matrix(field, rows)).collect(),
    }
}

fn matrix_data(seq: &[Matrix]) -> MatrixData {
    match seq.first() {
        Some(first) if seq.iter().all(|m| m == first) => MatrixData::One(rows_of(first)),
        _ => MatrixData::PerStep(seq.iter().map(rows_of).collect()),
    }
}

/// Collects a tree-table into one level per path length in `times`.
fn tree_levels(
    field: &'static str,
    table: &TreeTable,
    dim: usize,
    times: std::ops::Range<usize>,
) -> Result<Vec<Level>, LoadError> {
    let mut seen: BTreeMap<(usize, usize), Vector> = BTreeMap::new();
    for (bits, vector) in &table.atoms {
        let t = bits.len();
        if !times.contains(&t) {
            return Err(LoadError::Field {
                field,
                message: format!("path {bits:?} has length {t}, expected {times:?}"),
            });
        }
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(LoadError::Field {
                field,
                message: format!("path {bits:?} contains bit {b}"),
            });
        }
        if vector.len() != dim {
            return Err(LoadError::Field {
                field,
                message: format!("vector at path {bits:?} has {} entries, expected {dim}", vector.len()),
            });
        }
        let flags: Vec<bool> = bits.iter().map(|&b| b == 1).collect();
        let key = (t, atom_index(&flags));
        if seen.insert(key, Vector::from_column_slice(vector)).is_some() {
            return Err(LoadError::Field {
                field,
                message: format!("path {bits:?} appears twice"),
            });
        }
    }
    times
        .map(|t| {
            let mut level = Matrix::zeros(dim, atoms_at(t));
            for h in 0..atoms_at(t) {
                let v = seen.get(&(t, h)).ok_or_else(|| LoadError::Field {
                    field,
                    message: format!(
                        "missing atom {:?} at time {t}",
                        atom_bits(h, t).iter().map(|&b| u8::from(b)).collect::<Vec<_>>()
                    ),
                })?;
                level.set_column(h, v);
            }
            Ok(level)
        })
        .collect()
}

pub(crate) fn tree_table(levels: &[Level], first_time: usize) -> TreeTable {
    let mut atoms = Vec::new();
    for (i, level) in levels.iter().enumerate() {
        let t = first_time + i;
        for h in 0..level.ncols() {
            let bits = atom_bits(h, t).iter().map(|&b| u8::from(b)).collect();
            atoms.push((bits, level.column(h).iter().copied().collect()));
        }
    }
    TreeTable { atoms }
}

fn input(field: &'static str, data: &VectorData, dim: usize, horizon: usize) -> Result<InputProcess, LoadError> {
    Ok(match data {
        VectorData::One(v) => InputProcess::Constant(Vector::from_column_slice(v)),
        VectorData::PerStep(vs) => InputProcess::PerStep(vs.iter().map(|v| Vector::from_column_slice(v)).collect()),
        VectorData::Tree(table) => InputProcess::Adapted(tree_levels(field, table, dim, 0..horizon)?),
    })
}

fn input_data(p: &InputProcess) -> VectorData {
    match p {
        InputProcess::Constant(v) => VectorData::One(v.iter().copied().collect()),
        InputProcess::PerStep(vs) => VectorData::PerStep(vs.iter().map(|v| v.iter().copied().collect()).collect()),
        InputProcess::Adapted(levels) => VectorData::Tree(tree_table(levels, 0)),
    }
}

fn location(e: &serde_json::Error) -> LoadError {
    LoadError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Parses a problem file and checks its structure. Standing assumptions
/// are not checked here (see [`bslq_core::model::validate_spec`]).
pub fn load_spec(text: &str) -> Result<ProblemSpec, LoadError> {
    let file: ProblemFile = serde_json::from_str(text).map_err(|e| location(&e))?;
    if file.horizon == 0 {
        return Err(bslq_core::Error::EmptyHorizon.into());
    }
    let big_n = file.horizon;
    let spec = ProblemSpec {
        horizon: big_n,
        state_dim: file.state_dim,
        control_dim: file.control_dim,
        a: matrices("A", &file.a, big_n)?,
        b: matrices("B", &file.b, big_n)?,
        c: matrices("C", &file.c, big_n)?,
        q_cost: matrices("Q", &file.q_cost, big_n)?,
        s_cost: matrices("S", &file.s_cost, big_n)?,
        r_cost: matrices("R", &file.r_cost, big_n)?,
        g0: matrix("G0", &file.g0)?,
        q: input("q", &file.q, file.state_dim, big_n)?,
        eta: input("eta", &file.eta, file.state_dim, big_n)?,
        rho: input("rho", &file.rho, file.control_dim, big_n)?,
        xi: match &file.xi {
            TerminalData::One(v) => TerminalValue::Constant(Vector::from_column_slice(v)),
            TerminalData::Tree(table) => {
                let mut levels = tree_levels("xi", table, file.state_dim, big_n..big_n + 1)?;
                TerminalValue::Adapted(levels.pop().expect("one level"))
            }
        },
    };
    spec.check_structure()?;
    Ok(spec)
}

/// Serializes a spec. Constant coefficient sequences are written as a
/// single matrix and adapted data as tree-tables.
pub fn save_spec(spec: &ProblemSpec) -> String {
    let file = ProblemFile {
        horizon: spec.horizon,
        state_dim: spec.state_dim,
        control_dim: spec.control_dim,
        a: matrix_data(&spec.a),
        b: matrix_data(&spec.b),
        c: matrix_data(&spec.c),
        q_cost: matrix_data(&spec.q_cost),
        s_cost: matrix_data(&spec.s_cost),
        r_cost: matrix_data(&spec.r_cost),
        g0: rows_of(&spec.g0),
        q: input_data(&spec.q),
        eta: input_data(&spec.eta),
        rho: input_data(&spec.rho),
        xi: match &spec.xi {
            TerminalValue::Constant(v) => TerminalData::One(v.iter().copied().collect()),
            TerminalValue::Adapted(l) => TerminalData::Tree(tree_table(std::slice::from_ref(l), spec.horizon)),
        },
    };
    json::to_string(&file).expect("problem files are always serializable")
}

#[cfg(test)]
mod tests {
    use super::*;
    use bslq_core::example::example_spec;

    #[test]
    fn example_round_trip() {
        let spec = example_spec();
        let text = save_spec(&spec);
        assert_eq!(load_spec(&text).unwrap(), spec);
        assert!(text.contains("\"A\": [\n    [0.80000000000000004, 0.20000000000000001, 0.10000000000000001],"));
    }

    #[test]
    fn zero_horizon() {
        let text = save_spec(&example_spec()).replace("\"horizon\": 4", "\"horizon\": 0");
        let err = load_spec(&text).unwrap_err();
        assert_eq!(err.to_string(), "horizon must be ≥ 1");
    }

    #[test]
    fn unknown_field_is_rejected_with_location() {
        let text = save_spec(&example_spec()).replacen("{", "{\n  \"extra\": 1,", 1);
        match load_spec(&text).unwrap_err() {
            LoadError::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("extra"), "{message}");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn ragged_matrix() {
        let text = save_spec(&example_spec()).replace("[2, 0, 0]", "[2, 0]");
        assert!(matches!(load_spec(&text), Err(LoadError::Field { field: "G0", .. })));
    }

    #[test]
    fn tree_table_must_be_complete() {
        let mut spec = example_spec();
        spec.xi = TerminalValue::Adapted(Matrix::from_fn(3, 16, |i, j| (i + j) as f64));
        let text = save_spec(&spec);
        assert_eq!(load_spec(&text).unwrap(), spec);
        let broken = text.replacen("[0, 0, 0, 0]", "[0, 0, 0, 1]", 1);
        let err = load_spec(&broken).unwrap_err().to_string();
        assert!(err.contains("appears twice"), "{err}");
    }
}
