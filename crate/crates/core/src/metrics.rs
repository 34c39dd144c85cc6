//! Solution-quality measures and convergence trace rows.

use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::error::{check_dim, Result, VrviError};
use crate::oracle::ComponentFamily;
use crate::point::Point;
use crate::problem::CompositeVIProblem;

/// Evaluates `Q(x'; x*) = <H(x*), x' - x*> + g(x') - g(x*)`.
#[derive(Clone, Debug)]
pub struct GapEvaluator {
    reference_solution: Point,
    h_at_ref: Point,
    g: ComponentFamily,
    g_at_ref: f64,
}

impl GapEvaluator {
    pub fn new(problem: &CompositeVIProblem, x_star: Point) -> Result<Self> {
        check_dim(problem.dim(), x_star.dim())?;
        let g_at_ref = problem
            .g_value(&x_star)
            .ok_or_else(|| VrviError::InvalidArgument("gap evaluation needs g-components with values".into()))?;
        Ok(GapEvaluator {
            h_at_ref: problem.h_sum(&x_star),
            reference_solution: x_star,
            g: problem.g.clone(),
            g_at_ref,
        })
    }

    pub fn reference_solution(&self) -> &Point {
        &self.reference_solution
    }

    pub fn dist_sq(&self, x: &Point) -> f64 {
        x.dist_sq(&self.reference_solution)
    }
}

pub fn q_gap(eval: &GapEvaluator, x_prime: &Point) -> Result<f64> {
    check_dim(eval.reference_solution.dim(), x_prime.dim())?;
    if x_prime == &eval.reference_solution {
        return Ok(0.0);
    }
    let lin = eval.h_at_ref.dot(&x_prime.sub(&eval.reference_solution));
    let g = eval.g.value_sum(x_prime).unwrap_or(f64::NAN);
    Ok(lin + g - eval.g_at_ref)
}

/// `||sum_i H_i(x) + sum_i grad g_i(x)||` with exact evaluation.
pub fn residual_norm(problem: &CompositeVIProblem, x: &Point) -> f64 {
    problem.operator(x).norm()
}

/// Problem-specific metrics computed from the primal part of an iterate.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ExtraValues {
    pub cons_viol: Option<f64>,
    pub obj_gap: Option<f64>,
}

pub type ExtraMetrics = Arc<dyn Fn(&Point) -> ExtraValues + Send + Sync>;

/// One logged row. Metrics that were not computed are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub iter: u64,
    pub epoch: u64,
    pub oracle_h_calls: u64,
    pub oracle_g_calls: u64,
    pub dist_sq: Option<f64>,
    pub q_gap: Option<f64>,
    pub res_norm: Option<f64>,
    pub cons_viol: Option<f64>,
    pub obj_gap: Option<f64>,
    pub wall_ms: f64,
}

pub const CSV_HEADER: &str =
    "iter,epoch,oracle_h_calls,oracle_g_calls,dist_sq,q_gap,res_norm,cons_viol,obj_gap,wall_ms";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl TraceRecord {
    pub fn oracle_calls(&self) -> u64 {
        self.oracle_h_calls + self.oracle_g_calls
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.iter,
            self.epoch,
            self.oracle_h_calls,
            self.oracle_g_calls,
            opt(self.dist_sq),
            opt(self.q_gap),
            opt(self.res_norm),
            opt(self.cons_viol),
            opt(self.obj_gap),
            self.wall_ms
        )
    }

    pub fn from_csv_row(line: &str, line_no: usize) -> Result<Self> {
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        let err = |msg: String| VrviError::Parse { line: line_no, msg };
        if fields.len() != 10 {
            return Err(err(format!("expected 10 fields, found {}", fields.len())));
        }
        let int = |s: &str| s.parse::<u64>().map_err(|e| err(format!("{s:?}: {e}")));
        let real = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse::<f64>().map(Some).map_err(|e| err(format!("{s:?}: {e}")))
            }
        };
        Ok(TraceRecord {
            iter: int(fields[0])?,
            epoch: int(fields[1])?,
            oracle_h_calls: int(fields[2])?,
            oracle_g_calls: int(fields[3])?,
            dist_sq: real(fields[4])?,
            q_gap: real(fields[5])?,
            res_norm: real(fields[6])?,
            cons_viol: real(fields[7])?,
            obj_gap: real(fields[8])?,
            wall_ms: real(fields[9])?.unwrap_or(0.0),
        })
    }
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_csv_row())
    }
}

pub fn write_csv<W: Write>(mut out: W, records: &[TraceRecord]) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.to_csv_row())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<TraceRecord>> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim_end() != CSV_HEADER {
        return Err(VrviError::Parse {
            line: 1,
            msg: "missing or wrong CSV header".into(),
        });
    }
    let mut out = vec![];
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(TraceRecord::from_csv_row(&line, i + 2)?);
    }
    Ok(out)
}

/// Averages traces row by row (by position, which matches iteration index for
/// equal logging schedules). Rows beyond the shortest trace are dropped.
/// A metric is averaged over the seeds that report it.
pub fn mean_traces(traces: &[Vec<TraceRecord>]) -> Vec<TraceRecord> {
    let Some(len) = traces.iter().map(|t| t.len()).min() else {
        return vec![];
    };
    let k = traces.len() as f64;
    let mean_opt = |vals: Vec<Option<f64>>| {
        let present: Vec<f64> = vals.into_iter().flatten().collect();
        (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
    };
    (0..len)
        .map(|r| {
            let rows: Vec<&TraceRecord> = traces.iter().map(|t| &t[r]).collect();
            let avg_u = |f: fn(&TraceRecord) -> u64| (rows.iter().map(|x| f(x) as f64).sum::<f64>() / k).round() as u64;
            TraceRecord {
                iter: rows[0].iter,
                epoch: avg_u(|x| x.epoch),
                oracle_h_calls: avg_u(|x| x.oracle_h_calls),
                oracle_g_calls: avg_u(|x| x.oracle_g_calls),
                dist_sq: mean_opt(rows.iter().map(|x| x.dist_sq).collect()),
                q_gap: mean_opt(rows.iter().map(|x| x.q_gap).collect()),
                res_norm: mean_opt(rows.iter().map(|x| x.res_norm).collect()),
                cons_viol: mean_opt(rows.iter().map(|x| x.cons_viol).collect()),
                obj_gap: mean_opt(rows.iter().map(|x| x.obj_gap).collect()),
                wall_ms: rows.iter().map(|x| x.wall_ms).sum::<f64>() / k,
            }
        })
        .collect()
}

/// What a solver run measures at each logging step.
#[derive(Clone, Default)]
pub struct Monitor {
    pub gap: Option<GapEvaluator>,
    /// Compute the exact residual norm (one full noiseless operator pass).
    pub residual: bool,
    pub extra: Option<ExtraMetrics>,
}

impl fmt::Debug for Monitor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Monitor")
            .field("gap", &self.gap.is_some())
            .field("residual", &self.residual)
            .field("extra", &self.extra.is_some())
            .finish()
    }
}

impl Monitor {
    pub fn with_gap(gap: GapEvaluator) -> Self {
        Monitor {
            gap: Some(gap),
            residual: true,
            extra: None,
        }
    }

    /// Fills the metric fields of a record for the point `x`.
    pub fn measure(&self, problem: &CompositeVIProblem, x: &Point, rec: &mut TraceRecord) {
        if let Some(gap) = &self.gap {
            rec.dist_sq = Some(gap.dist_sq(x));
            rec.q_gap = q_gap(gap, x).ok().filter(|v| !v.is_nan());
        }
        if self.residual {
            rec.res_norm = Some(residual_norm(problem, x));
        }
        if let Some(extra) = &self.extra {
            let e = extra(x);
            rec.cons_viol = e.cons_viol;
            rec.obj_gap = e.obj_gap;
        }
    }
}
