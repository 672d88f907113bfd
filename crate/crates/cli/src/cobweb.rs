//! Staircase data `(n, x_n, T x_n)` for cobweb plots.

use disloc_fix::solver::fmt_float;
use disloc_fix::{
    solve_alternating, solve_picard, ControlFunction, DislocatedMetric, IterationTrace, SamplingPlan, SelfMap,
    SolveError, SolverConfig,
};
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CobwebRow {
    pub step: usize,
    pub x: f64,
    pub tx: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<&'static str>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CobwebSeries {
    pub rows: Vec<CobwebRow>,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl CobwebSeries {
    fn from_trace(
        trace: &IterationTrace<f64>,
        apply: impl Fn(usize, f64) -> disloc_fix::Result<f64>,
        converged: bool,
    ) -> Result<Self, CliError> {
        let mut rows = Vec::with_capacity(trace.len());
        for s in &trace.steps {
            let tx = apply(s.n, s.x).map_err(CliError::from)?;
            rows.push(CobwebRow { step: s.n, x: s.x, tx, map: s.map });
        }
        let warning = (!converged).then(|| format!("no convergence; series truncated at {} rows", rows.len()));
        Ok(CobwebSeries { rows, converged, warning })
    }

    /// `step,x,tx` (plus `map` for alternating schemes).
    pub fn to_csv(&self) -> String {
        let labelled = self.rows.iter().any(|r| r.map.is_some());
        let mut out = String::from(if labelled { "step,x,tx,map\n" } else { "step,x,tx\n" });
        for r in &self.rows {
            out.push_str(&format!("{},{},{}", r.step, fmt_float(r.x), fmt_float(r.tx)));
            if labelled {
                out.push(',');
                out.push_str(r.map.unwrap_or(""));
            }
            out.push('\n');
        }
        out
    }

    pub fn last_x(&self) -> Option<f64> {
        self.rows.last().map(|r| r.tx)
    }
}

fn split<C: std::fmt::Debug>(result: Result<C, SolveError<C>>) -> Result<(C, bool), CliError> {
    match result {
        Ok(c) => Ok((c, true)),
        Err(SolveError::Input(e)) => Err(e.into()),
        Err(SolveError::NotConverged(c)) | Err(SolveError::ContractionViolated { report: c, .. }) => Ok((*c, false)),
    }
}

pub fn emit_cobweb(
    map: &SelfMap<f64>,
    metric: &DislocatedMetric<f64>,
    control: Option<&ControlFunction<f64>>,
    cfg: &SolverConfig<f64>,
) -> Result<CobwebSeries, CliError> {
    let cfg = cfg.record_trace(true);
    let (cert, converged) = split(solve_picard(map, metric, control, &cfg))?;
    CobwebSeries::from_trace(cert.trace.as_ref().expect("trace recorded"), |_, x| map.apply(x), converged)
}

#[allow(clippy::too_many_arguments)]
pub fn emit_cobweb_alternating(
    t: &SelfMap<f64>,
    s: &SelfMap<f64>,
    d: &DislocatedMetric<f64>,
    delta: &DislocatedMetric<f64>,
    alpha: &ControlFunction<f64>,
    cfg: &SolverConfig<f64>,
    plan: &SamplingPlan,
) -> Result<CobwebSeries, CliError> {
    let cfg = cfg.record_trace(true);
    let (cert, converged) = split(solve_alternating(t, s, d, delta, alpha, &cfg, plan))?;
    let apply = |n: usize, x: f64| if n.is_multiple_of(2) { t.apply(x) } else { s.apply(x) };
    CobwebSeries::from_trace(cert.trace.as_ref().expect("trace recorded"), apply, converged)
}
