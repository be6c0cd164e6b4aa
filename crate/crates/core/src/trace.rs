//! Per-checkpoint convergence records and their CSV form.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// One checkpoint of a stochastic subgradient projection run.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub alpha: f64,
    pub obj_est: Option<f64>,
    pub feas_residual: f64,
    pub dist_sq_opt: Option<f64>,
    pub elapsed_ms: f64,
}

/// One epoch of a linear-feasibility run.
#[derive(Clone, Debug, PartialEq)]
pub struct LsTraceRow {
    pub epoch: usize,
    pub eq_residual: f64,
    pub ineq_residual: f64,
    pub elapsed_ms: f64,
}

pub const SSP_TRACE_HEADER: &str = "iter,alpha,obj_est,feas_residual,dist_sq_opt,elapsed_ms";
pub const LS_TRACE_HEADER: &str = "epoch,eq_residual,ineq_residual,elapsed_ms";

#[derive(Clone, Debug, PartialEq)]
pub enum ConvergenceTrace {
    Ssp(Vec<TraceRow>),
    Ls(Vec<LsTraceRow>),
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ConvergenceTrace {
    pub fn len(&self) -> usize {
        match self {
            ConvergenceTrace::Ssp(r) => r.len(),
            ConvergenceTrace::Ls(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self {
            ConvergenceTrace::Ssp(rows) => {
                out.push_str(SSP_TRACE_HEADER);
                out.push('\n');
                for r in rows {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{:.3}",
                        r.iter,
                        r.alpha,
                        opt(r.obj_est),
                        r.feas_residual,
                        opt(r.dist_sq_opt),
                        r.elapsed_ms
                    );
                }
            }
            ConvergenceTrace::Ls(rows) => {
                out.push_str(LS_TRACE_HEADER);
                out.push('\n');
                for r in rows {
                    let _ = writeln!(
                        out,
                        "{},{},{},{:.3}",
                        r.epoch, r.eq_residual, r.ineq_residual, r.elapsed_ms
                    );
                }
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}
