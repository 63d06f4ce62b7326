//! CSV dump of adapted processes, one row per (process, time, atom,
//! component).

use std::io::{Read, Write};

use bslq_core::solver::FeedbackSolution;
use bslq_core::tree::atom_bits;
use bslq_core::AdaptedProcess;
use serde::{Deserialize, Serialize};

use crate::json::g17;

/// One CSV row. `path` is the atom's bit-path (`0` for `ω = +1`),
/// empty at time 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub process: String,
    pub time: usize,
    pub path: String,
    pub component: usize,
    pub value: String,
}

fn rows(name: &str, p: &AdaptedProcess, out: &mut Vec<Row>) {
    for (i, level) in p.levels().iter().enumerate() {
        let time = p.first_time() + i;
        for h in 0..level.ncols() {
            let path: String = atom_bits(h, time).iter().map(|&b| if b { '1' } else { '0' }).collect();
            for (component, &v) in level.column(h).iter().enumerate() {
                out.push(Row {
                    process: name.to_string(),
                    time,
                    path: path.clone(),
                    component,
                    value: g17(v),
                });
            }
        }
    }
}

/// Rows for `y*`, `u*`, `x*`, `φ` and, on the transformed route, `ū*`.
pub fn solution_rows(sol: &FeedbackSolution) -> Vec<Row> {
    let mut out = Vec::new();
    rows("y", &sol.y_star, &mut out);
    rows("u", &sol.u_star, &mut out);
    rows("x", &sol.x_star, &mut out);
    rows("phi", sol.phi(), &mut out);
    if let Some(ubar) = &sol.ubar_star {
        rows("ubar", ubar, &mut out);
    }
    out
}

pub fn write_rows<W: Write>(w: W, rows: &[Row]) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    for r in rows {
        writer.serialize(r)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(r: R) -> csv::Result<Vec<Row>> {
    csv::Reader::from_reader(r).deserialize().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use bslq_core::example::example_spec;
    use bslq_core::{solve, TreeProblem};

    #[test]
    fn csv_round_trip() {
        let p = TreeProblem::new(&example_spec()).unwrap();
        let sol = solve(&p, Default::default()).unwrap();
        let rows = solution_rows(&sol);
        // y, x, phi: 31 atoms each; u: 15 atoms
        assert_eq!(rows.len(), 3 * 31 * 3 + 15 * 2);
        let mut buf = Vec::new();
        write_rows(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("process,time,path,component,value\n"));
        assert_eq!(read_rows(&buf[..]).unwrap(), rows);
    }
}
