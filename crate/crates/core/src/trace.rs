//! Solver traces, run reports and side-by-side comparison tables.
//!
//! Traces are CSV files with header `t,obj_true,obj_sampled,gamma,eigvecs,wall_ms`.
//! Floats are written in shortest round-trip form, so a trace read back is
//! bit-identical to the one written.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TRACE_HEADER: [&str; 6] = ["t", "obj_true", "obj_sampled", "gamma", "eigvecs", "wall_ms"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    /// Exact objective at the reported iterate (diagnostic, not charged).
    pub obj_true: f64,
    /// Objective value seen by the algorithm at this iteration.
    pub obj_sampled: f64,
    pub gamma: f64,
    /// Cumulative eigenvector equivalents charged so far.
    pub eigvecs: f64,
    pub wall_ms: f64,
}

pub fn write_trace<W: Write>(records: &[TraceRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record(TRACE_HEADER).map_err(csv_err)?;
    }
    for r in records {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.iter().ne(TRACE_HEADER.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            msg: format!("unexpected trace header {:?}", header.iter().collect::<Vec<_>>()),
        });
    }
    rd.deserialize()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| Error::Parse {
                line: i + 2,
                msg: e.to_string(),
            })
        })
        .collect()
}

pub fn write_trace_file(records: &[TraceRecord], path: impl AsRef<Path>) -> Result<()> {
    write_trace(records, std::fs::File::create(path)?)
}

pub fn read_trace_file(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>> {
    read_trace(std::fs::File::open(path)?)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::invalid(format!("csv: {other:?}")),
    }
}

/// Summary of one solver run; costs are in eigenvector units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub algorithm: String,
    pub problem: String,
    pub n: usize,
    pub seed: u64,
    pub iterations: usize,
    pub total_eigvecs: f64,
    pub best_objective: f64,
    pub final_objective: f64,
    pub completed: bool,
    pub trace_path: String,
}

impl RunReport {
    /// Checks that the report agrees with the trace it points to.
    pub fn check_against(&self, trace: &[TraceRecord]) -> Result<()> {
        let last = trace
            .last()
            .ok_or_else(|| Error::invalid(format!("empty trace for {}", self.algorithm)))?;
        if last.eigvecs != self.total_eigvecs {
            return Err(Error::invalid(format!(
                "report charges {} eigenvectors, trace ends at {}",
                self.total_eigvecs, last.eigvecs
            )));
        }
        Ok(())
    }
}

/// Best objective so far after each trace row.
pub fn best_so_far(trace: &[TraceRecord]) -> Vec<(f64, f64)> {
    let mut best = f64::INFINITY;
    trace
        .iter()
        .map(|r| {
            best = best.min(r.obj_true);
            (r.eigvecs, best)
        })
        .collect()
}

/// Cumulative eigenvectors at which `trace` first reaches `target` (within `tol`).
pub fn eigvecs_to_reach(trace: &[TraceRecord], target: f64, tol: f64) -> Option<f64> {
    trace
        .iter()
        .find(|r| r.obj_true <= target + tol)
        .map(|r| r.eigvecs)
}

/// Merged table keyed on cumulative eigenvectors: one best-so-far column per
/// trace, `None` before that trace has a row at or below the key.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub labels: Vec<String>,
    pub rows: Vec<(f64, Vec<Option<f64>>)>,
}

pub fn compare(traces: &[(String, Vec<TraceRecord>)]) -> Result<Comparison> {
    if traces.len() < 2 {
        return Err(Error::invalid("compare needs at least two traces"));
    }
    for (label, t) in traces {
        if t.is_empty() {
            return Err(Error::invalid(format!("trace {label:?} is empty")));
        }
        if t.windows(2).any(|w| w[1].eigvecs < w[0].eigvecs) {
            return Err(Error::invalid(format!("trace {label:?} has decreasing eigvecs")));
        }
    }
    let curves: Vec<Vec<(f64, f64)>> = traces.iter().map(|(_, t)| best_so_far(t)).collect();
    let mut keys: Vec<f64> = curves.iter().flatten().map(|p| p.0).collect();
    keys.sort_by(f64::total_cmp);
    keys.dedup();
    let rows = keys
        .into_iter()
        .map(|key| {
            let cols = curves
                .iter()
                .map(|c| c.iter().take_while(|p| p.0 <= key).last().map(|p| p.1))
                .collect();
            (key, cols)
        })
        .collect();
    Ok(Comparison {
        labels: traces.iter().map(|(l, _)| l.clone()).collect(),
        rows,
    })
}

impl Comparison {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["eigvecs".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for (key, cols) in &self.rows {
            let mut rec = vec![key.to_string()];
            rec.extend(cols.iter().map(|c| c.map_or(String::new(), |v| v.to_string())));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: usize, obj: f64, eig: f64) -> TraceRecord {
        TraceRecord {
            t,
            obj_true: obj,
            obj_sampled: obj + 0.1,
            gamma: 1.0 / 3.0,
            eigvecs: eig,
            wall_ms: 0.0,
        }
    }

    #[test]
    fn round_trip_is_lossless() {
        let trace = vec![rec(1, 0.1 + 0.2, 6.0), rec(2, 1e-300, 12.0), rec(3, -2.5e17, 18.0)];
        let mut buf = Vec::new();
        write_trace(&trace, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,obj_true,obj_sampled,gamma,eigvecs,wall_ms\n"));
        assert_eq!(read_trace(buf.as_slice()).unwrap(), trace);
    }

    #[test]
    fn bad_header_is_rejected() {
        assert!(read_trace("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn compare_identical_runs() {
        let t = vec![rec(1, 3.0, 5.0), rec(2, 2.0, 10.0), rec(3, 2.5, 15.0)];
        let c = compare(&[("a".into(), t.clone()), ("b".into(), t)]).unwrap();
        for (_, cols) in &c.rows {
            assert_eq!(cols[0], cols[1]);
        }
        assert_eq!(c.rows.last().unwrap().1[0], Some(2.0));
    }

    #[test]
    fn compare_rejects_empty() {
        let t = vec![rec(1, 3.0, 5.0)];
        assert!(compare(&[("a".into(), t), ("b".into(), vec![])]).is_err());
    }

    #[test]
    fn reach_target() {
        let t = vec![rec(1, 3.0, 5.0), rec(2, 2.0, 10.0)];
        assert_eq!(eigvecs_to_reach(&t, 2.5, 0.0), Some(10.0));
        assert_eq!(eigvecs_to_reach(&t, 1.0, 0.0), None);
    }
}
