use std::io::{Read, Write};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::Method;
use crate::error::{Error, Result};

/// Column order of trace CSV files.
pub const TRACE_COLUMNS: [&str; 5] = ["t", "objective", "grad_norm", "step_norm", "elapsed_seconds"];

/// Numeric part of one iteration record; exactly the trace CSV columns.
///
/// Row `t = 0` describes the starting point (`step_norm = 0`, elapsed time
/// of the one-time setup). Row `t ≥ 1` describes the iterate after the
/// `t`-th update, with `step_norm = ‖βₜ − βₜ₋₁‖₂` and the wall time of that
/// update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub step_norm: f64,
    pub elapsed_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    #[serde(flatten)]
    pub row: TraceRow,
    /// The ball projection was active for this iterate.
    pub projected: bool,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    /// A non-finite objective or step was produced; the trace ends at the
    /// last finite iterate.
    Diverged,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIterations => "max_iterations",
            Termination::Diverged => "diverged",
        }
    }
}

/// Resolved run parameters that were filled in from defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunParameters {
    pub gamma: Option<f64>,
    pub sample_size: Option<usize>,
    pub rank: Option<usize>,
    pub sigma2_hat: Option<f64>,
}

/// Full record of one optimizer run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub method: Method,
    pub tol_eps: f64,
    pub records: Vec<IterRecord>,
    pub beta: DVector<f64>,
    pub termination: Termination,
    pub parameters: RunParameters,
    /// Run-level warnings, not tied to one iteration.
    pub warnings: Vec<String>,
    /// `β̂⁰, β̂¹, …` when the run kept them; empty otherwise.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub iterates: Vec<DVector<f64>>,
}

impl IterationTrace {
    /// Final iteration index `t`, i.e. the number of updates performed.
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.row.t)
    }

    pub fn final_record(&self) -> Option<&IterRecord> {
        self.records.last()
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.records.last().map(|r| r.row.objective)
    }

    /// Sum of per-iteration wall times, setup included.
    pub fn total_elapsed(&self) -> f64 {
        self.records.iter().map(|r| r.row.elapsed_seconds).sum()
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.row.objective).collect()
    }

    pub fn step_norms(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.row.step_norm).collect()
    }

    pub fn rows(&self) -> Vec<TraceRow> {
        self.records.iter().map(|r| r.row.clone()).collect()
    }

    /// Every warning, run-level first, then per-iteration ones tagged by `t`.
    pub fn all_warnings(&self) -> Vec<String> {
        let mut out = self.warnings.clone();
        for r in &self.records {
            out.extend(r.warnings.iter().map(|w| format!("t={}: {w}", r.row.t)));
        }
        out
    }

    /// Recorded gradient norm at iteration `t`.
    pub fn grad_norm_at(&self, t: usize) -> Result<f64> {
        self.records
            .iter()
            .find(|r| r.row.t == t)
            .map(|r| r.row.grad_norm)
            .ok_or(Error::IndexOutOfRange { index: t, len: self.records.len() })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_rows(&self.rows(), writer)
    }
}

pub fn write_rows<W: Write>(rows: &[TraceRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    if rows.is_empty() {
        w.write_record(TRACE_COLUMNS)?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a trace CSV written by [`IterationTrace::write_csv`].
pub fn read_rows<R: Read>(reader: R) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != TRACE_COLUMNS {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {}", TRACE_COLUMNS.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in r.deserialize::<TraceRow>().enumerate() {
        let row = rec.map_err(|e| Error::Parse { line: i + 2, message: e.to_string() })?;
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace() -> IterationTrace {
        let rec = |t: usize, obj: f64| IterRecord {
            row: TraceRow { t, objective: obj, grad_norm: obj / 3.0, step_norm: 0.1 / (t as f64 + 1.0), elapsed_seconds: 1e-3 },
            projected: false,
            warnings: vec![],
        };
        IterationTrace {
            method: Method::Gd,
            tol_eps: 1e-8,
            records: vec![rec(0, 0.7), rec(1, 0.5), rec(2, 0.1 + 0.2)],
            beta: DVector::zeros(2),
            termination: Termination::MaxIterations,
            parameters: RunParameters::default(),
            warnings: vec![],
            iterates: vec![],
        }
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let t = trace();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,objective,grad_norm,step_norm,elapsed_seconds\n"));
        assert_eq!(read_rows(buf.as_slice()).unwrap(), t.rows());
    }

    #[test]
    fn grad_norm_lookup() {
        let t = trace();
        assert_eq!(t.grad_norm_at(0).unwrap(), 0.7 / 3.0);
        assert!(matches!(t.grad_norm_at(3), Err(Error::IndexOutOfRange { .. })));
        let empty = IterationTrace { records: vec![], ..t };
        assert!(empty.grad_norm_at(0).is_err());
        assert_eq!(empty.iterations(), 0);
    }

    #[test]
    fn rejects_bad_header_and_rows() {
        assert!(read_rows("a,b\n1,2\n".as_bytes()).is_err());
        let bad = "t,objective,grad_norm,step_norm,elapsed_seconds\n0,1,1,0,0\n1,x,1,0,0\n";
        match read_rows(bad.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
