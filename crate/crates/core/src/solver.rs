//! Picard iteration with error certificates, and sampled verification of
//! the contraction inequality for single maps and map families.
//!
//! With a contraction constant `k`, the Cauchy estimate of the existence
//! proof gives `d(x_n, z) <= k^n / (1 - k) * d(x_0, x_1)` (a priori) and
//! `d(x_{n+1}, z) <= k / (1 - k) * d(x_n, x_{n+1})` (a posteriori). The
//! solver stops once the a posteriori bound is below `tol`.

use serde::Serialize;
use thiserror::Error;

use crate::control::{A2Report, ContractionConstant, ControlFunction, KSource, DEFAULT_K_MAX};
use crate::error::{Error, Result};
use crate::maps::{MapFamily, SelfMap};
use crate::metric::DislocatedMetric;
use crate::sampling::{scan, AxiomReport, Measured, SamplingPlan, Stream};
use crate::scalar::Scalar;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITERS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig<S: Scalar> {
    pub x0: S,
    pub tol: S,
    pub max_iters: usize,
    pub record_trace: bool,
    /// Used to estimate `k` when the control function declares none.
    pub sampling: SamplingPlan,
    pub k_max: S,
}

impl<S: Scalar> SolverConfig<S> {
    pub fn new(x0: S) -> Self {
        SolverConfig {
            x0,
            tol: S::lit(DEFAULT_TOL),
            max_iters: DEFAULT_MAX_ITERS,
            record_trace: true,
            sampling: SamplingPlan::default(),
            k_max: S::lit(DEFAULT_K_MAX),
        }
    }

    pub fn tol(mut self, tol: S) -> Self {
        self.tol = tol;
        self
    }

    pub fn max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn record_trace(mut self, record: bool) -> Self {
        self.record_trace = record;
        self
    }

    pub(crate) fn validate(&self, metric: &DislocatedMetric<S>) -> Result<()> {
        if !(self.tol > S::zero() && self.tol.is_finite()) {
            return Err(Error::param("tol", "must be positive and finite"));
        }
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be positive"));
        }
        self.sampling.validate()?;
        metric.domain().require("x0", self.x0)?;
        Ok(())
    }
}

/// One recorded step: `x_n` and the distance to the next iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceStep<S: Scalar> {
    pub n: usize,
    pub x: S,
    pub step_distance: S,
    /// Map applied to produce `x_{n+1}` (alternating schemes).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<&'static str>,
    /// Step measured in a second metric (alternating schemes).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_step: Option<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct IterationTrace<S: Scalar> {
    pub steps: Vec<TraceStep<S>>,
}

impl<S: Scalar> Default for IterationTrace<S> {
    fn default() -> Self {
        IterationTrace { steps: Vec::new() }
    }
}

impl<S: Scalar> IterationTrace<S> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// CSV with header `n,x_n,step_distance` (plus `map` when labelled).
    pub fn to_csv(&self) -> String {
        let labelled = self.steps.iter().any(|s| s.map.is_some());
        let mut out = String::from(if labelled { "n,x_n,step_distance,map\n" } else { "n,x_n,step_distance\n" });
        for s in &self.steps {
            out.push_str(&format!("{},{},{}", s.n, fmt_float(s.x), fmt_float(s.step_distance)));
            if labelled {
                out.push(',');
                out.push_str(s.map.unwrap_or(""));
            }
            out.push('\n');
        }
        out
    }
}

/// Locale-independent float text with 17 significant digits.
pub fn fmt_float<S: Scalar>(v: S) -> String {
    let v = v.as_f64();
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    MaxItersExceeded,
    ContractionViolated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StoppingRule {
    /// `d(x_n, x_{n+1}) <= tol (1 - k) / max(k, atol)`
    APosteriori,
    /// `d(x_n, x_{n+1}) <= tol`, no contraction constant used.
    StepDistance,
}

/// A report attached to a certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ConditionReport<S: Scalar> {
    Axiom(AxiomReport<S>),
    A2(A2Report<S>),
}

impl<S: Scalar> ConditionReport<S> {
    pub fn passed(&self) -> bool {
        match self {
            ConditionReport::Axiom(r) => r.passed(),
            ConditionReport::A2(r) => r.passed(),
        }
    }
}

impl<S: Scalar> From<AxiomReport<S>> for ConditionReport<S> {
    fn from(r: AxiomReport<S>) -> Self {
        ConditionReport::Axiom(r)
    }
}

impl<S: Scalar> From<A2Report<S>> for ConditionReport<S> {
    fn from(r: A2Report<S>) -> Self {
        ConditionReport::A2(r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointCertificate<S: Scalar> {
    pub status: SolveStatus,
    pub z: S,
    /// `d(z, T z)`; for families the maximum over the verification subset.
    pub residual: S,
    /// `d(z, z)`, reported but not required to vanish.
    pub self_distance: S,
    pub iterations: usize,
    pub x0: S,
    pub tol: S,
    pub d01: S,
    pub k_used: Option<S>,
    pub k_source: Option<KSource>,
    pub stopping_rule: StoppingRule,
    /// `k^n / (1 - k) * d(x_0, x_1)` at the stopping index `n`.
    pub apriori_bound_at_stop: Option<S>,
    /// `k / (1 - k) * d(x_{n-1}, x_n)` at the stopping index `n`.
    pub aposteriori_bound: Option<S>,
    pub trace: Option<IterationTrace<S>>,
    pub condition_reports: Vec<ConditionReport<S>>,
    pub notes: Vec<String>,
}

impl<S: Scalar> FixedPointCertificate<S> {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    pub fn attach(&mut self, report: impl Into<ConditionReport<S>>) {
        self.condition_reports.push(report.into());
    }

    /// Converged and every attached report passed.
    pub fn sound(&self) -> bool {
        self.converged() && self.condition_reports.iter().all(ConditionReport::passed)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError<C: std::fmt::Debug> {
    #[error(transparent)]
    Input(#[from] Error),
    #[error("no convergence within the iteration budget")]
    NotConverged(Box<C>),
    #[error("step {step}: distance {current} exceeds k * previous = {k} * {previous}")]
    ContractionViolated { step: usize, previous: f64, current: f64, k: f64, report: Box<C> },
}

impl<C: std::fmt::Debug> SolveError<C> {
    /// The failure report, when the solver got far enough to produce one.
    pub fn report(&self) -> Option<&C> {
        match self {
            SolveError::Input(_) => None,
            SolveError::NotConverged(c) | SolveError::ContractionViolated { report: c, .. } => Some(c),
        }
    }
}

/// `k^n d01 / (1 - k)`.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn apriori_bound<S: Scalar>(k: S, d01: S, n: usize) -> Result<S> {
    if !(k >= S::zero() && k < S::one()) {
        return Err(Error::param("k", format!("{k} is not in [0, 1)")));
    }
    if !(d01 >= S::zero()) {
        return Err(Error::param("d01", "must be nonnegative"));
    }
    let n = i32::try_from(n).unwrap_or(i32::MAX);
    Ok(k.powi(n) * d01 / (S::one() - k))
}

// ---------------------------------------------------------------------------
// Iteration engine shared by every solver.

pub(crate) struct Engine<S: Scalar> {
    pub x0: S,
    pub tol: S,
    pub max_iters: usize,
    pub record_trace: bool,
    pub atol: S,
    pub rule: StoppingRule,
    /// Stopping constant for the a posteriori rule.
    pub k_stop: Option<S>,
    /// Constant for the runtime check `step_n <= k step_{n-1} + atol`.
    pub k_check: Option<S>,
}

pub(crate) struct Run<S: Scalar> {
    pub status: SolveStatus,
    pub z: S,
    pub iterations: usize,
    pub d01: S,
    pub last_step: S,
    pub residual: S,
    pub trace: IterationTrace<S>,
    pub violation: Option<(usize, S, S)>,
}

impl<S: Scalar> Engine<S> {
    fn stops(&self, n: usize, step: S) -> bool {
        if n == 0 && step == S::zero() {
            return true;
        }
        match (self.rule, self.k_stop) {
            (StoppingRule::APosteriori, Some(k)) => step <= self.tol * (S::one() - k) / k.max(self.atol),
            _ => step <= self.tol,
        }
    }

    /// Runs `x_{n+1} = next(n, x_n)`. `residual(z)` must be at most `tol`
    /// before a stopping candidate is accepted.
    pub fn run<N, D, R>(
        &self,
        mut next: N,
        dist: D,
        secondary: Option<&dyn Fn(S, S) -> Result<S>>,
        mut residual: R,
    ) -> Result<Run<S>>
    where
        N: FnMut(usize, S) -> Result<(S, Option<&'static str>)>,
        D: Fn(S, S) -> Result<S>,
        R: FnMut(S) -> Result<S>,
    {
        let mut trace = IterationTrace::default();
        let mut x = self.x0;
        let mut d01 = S::zero();
        let mut prev: Option<S> = None;
        let mut last_step = S::zero();
        for n in 0..self.max_iters {
            let (x_next, label) = next(n, x)?;
            let step = dist(x, x_next)?;
            if self.record_trace {
                let d_step = secondary.map(|f| f(x, x_next)).transpose()?;
                trace.steps.push(TraceStep { n, x, step_distance: step, map: label, d_step });
            }
            if n == 0 {
                d01 = step;
            }
            last_step = step;
            if let (Some(k), Some(p)) = (self.k_check, prev) {
                if step > k * p + self.atol {
                    return Ok(Run {
                        status: SolveStatus::ContractionViolated,
                        z: x_next,
                        iterations: n + 1,
                        d01,
                        last_step,
                        residual: S::nan(),
                        trace,
                        violation: Some((n, p, step)),
                    });
                }
            }
            prev = Some(step);
            let stop = self.stops(n, step);
            x = x_next;
            if stop {
                let r = residual(x)?;
                if r <= self.tol {
                    return Ok(Run {
                        status: SolveStatus::Converged,
                        z: x,
                        iterations: n + 1,
                        d01,
                        last_step,
                        residual: r,
                        trace,
                        violation: None,
                    });
                }
            }
        }
        Ok(Run {
            status: SolveStatus::MaxItersExceeded,
            z: x,
            iterations: self.max_iters,
            d01,
            last_step,
            residual: S::nan(),
            trace,
            violation: None,
        })
    }
}

pub(crate) struct Bounds<S: Scalar> {
    pub apriori: Option<S>,
    pub aposteriori: Option<S>,
}

pub(crate) fn bounds<S: Scalar>(k: Option<S>, run: &Run<S>) -> Result<Bounds<S>> {
    Ok(match k {
        Some(k) => Bounds {
            apriori: Some(apriori_bound(k, run.d01, run.iterations)?),
            aposteriori: Some(k / (S::one() - k) * run.last_step),
        },
        None => Bounds { apriori: None, aposteriori: None },
    })
}

pub(crate) type ResolvedK<S> = (ContractionConstant<S>, Option<A2Report<S>>);

/// Resolves the contraction constant, estimating it through A2 when
/// undeclared.
pub(crate) fn resolve_k<S: Scalar>(
    control: Option<&ControlFunction<S>>,
    metric: &DislocatedMetric<S>,
    cfg: &SolverConfig<S>,
) -> Result<Option<ResolvedK<S>>> {
    let Some(alpha) = control else {
        return Ok(None);
    };
    if let Some(k) = alpha.declared_k() {
        return Ok(Some((ContractionConstant { k, source: KSource::Declared }, None)));
    }
    let bound = metric.sampling_bound(&cfg.sampling)?;
    let report = alpha.check_a2(&cfg.sampling, bound, cfg.k_max)?;
    if !report.passed() {
        return Err(Error::ContractionConstant(format!(
            "A2 check failed (k_hat = {}, k_max = {})",
            report.k_hat, report.k_max
        )));
    }
    Ok(Some((ContractionConstant { k: report.k_hat, source: KSource::Estimated }, Some(report))))
}

fn finish<S: Scalar>(
    run: Run<S>,
    cfg: &SolverConfig<S>,
    metric: &DislocatedMetric<S>,
    k: Option<ContractionConstant<S>>,
    rule: StoppingRule,
    reports: Vec<ConditionReport<S>>,
    notes: Vec<String>,
) -> std::result::Result<FixedPointCertificate<S>, SolveError<FixedPointCertificate<S>>> {
    let b = bounds(k.map(|c| c.k).filter(|_| rule == StoppingRule::APosteriori), &run)?;
    let cert = FixedPointCertificate {
        status: run.status,
        z: run.z,
        residual: run.residual,
        self_distance: metric.self_distance(run.z)?,
        iterations: run.iterations,
        x0: cfg.x0,
        tol: cfg.tol,
        d01: run.d01,
        k_used: k.map(|c| c.k),
        k_source: k.map(|c| c.source),
        stopping_rule: rule,
        apriori_bound_at_stop: b.apriori,
        aposteriori_bound: b.aposteriori,
        trace: cfg.record_trace.then_some(run.trace),
        condition_reports: reports,
        notes,
    };
    match cert.status {
        SolveStatus::Converged => Ok(cert),
        SolveStatus::MaxItersExceeded => Err(SolveError::NotConverged(Box::new(cert))),
        SolveStatus::ContractionViolated => {
            let (step, previous, current) = run.violation.expect("violation recorded");
            Err(SolveError::ContractionViolated {
                step,
                previous: previous.as_f64(),
                current: current.as_f64(),
                k: cert.k_used.map_or(f64::NAN, Scalar::as_f64),
                report: Box::new(cert),
            })
        }
    }
}

const NO_K_NOTE: &str = "no control function: plain step-distance stopping, no error bound certified";

/// Picard iteration `x_{n+1} = T x_n` from `cfg.x0`.
///
/// With a control function the a posteriori rule stops the run and every
/// step is checked against `d(x_n, x_{n+1}) <= k d(x_{n-1}, x_n)`.
/// Without one, the run stops once a step is at most `tol`.
pub fn solve_picard<S: Scalar>(
    map: &SelfMap<S>,
    metric: &DislocatedMetric<S>,
    control: Option<&ControlFunction<S>>,
    cfg: &SolverConfig<S>,
) -> std::result::Result<FixedPointCertificate<S>, SolveError<FixedPointCertificate<S>>> {
    cfg.validate(metric)?;
    let resolved = resolve_k(control, metric, cfg)?;
    let k = resolved.as_ref().map(|(c, _)| *c);
    let (rule, notes) = match k {
        Some(_) => (StoppingRule::APosteriori, vec![]),
        None => (StoppingRule::StepDistance, vec![NO_K_NOTE.to_string()]),
    };
    let engine = Engine {
        x0: cfg.x0,
        tol: cfg.tol,
        max_iters: cfg.max_iters,
        record_trace: cfg.record_trace,
        atol: cfg.sampling.atol(),
        rule,
        k_stop: k.map(|c| c.k),
        k_check: k.map(|c| c.k),
    };
    let run = engine.run(
        |_, x| Ok((map.apply(x)?, None)),
        |a, b| metric.eval(a, b),
        None,
        |z| metric.eval(z, map.apply(z)?),
    )?;
    let reports = resolved.and_then(|(_, r)| r).map(ConditionReport::from).into_iter().collect();
    finish(run, cfg, metric, k, rule, reports, notes)
}

/// Default residual subset for families: `{1, 2, index_budget}`.
pub fn family_verification_indices(budget: usize) -> Vec<usize> {
    let mut v: Vec<usize> = [1, 2, budget].into_iter().filter(|&n| n >= 1 && n <= budget).collect();
    v.dedup();
    v
}

/// Iterates `x_n = f_n x_{n-1}` for `n >= 1`. Indices past the budget wrap
/// back to 1 and the certificate notes it.
pub fn solve_sequence<S: Scalar>(
    family: &MapFamily<S>,
    metric: &DislocatedMetric<S>,
    control: Option<&ControlFunction<S>>,
    cfg: &SolverConfig<S>,
) -> std::result::Result<FixedPointCertificate<S>, SolveError<FixedPointCertificate<S>>> {
    cfg.validate(metric)?;
    let members = family.members()?;
    let budget = family.index_budget();
    let resolved = resolve_k(control, metric, cfg)?;
    let k = resolved.as_ref().map(|(c, _)| *c);
    let rule = if k.is_some() { StoppingRule::APosteriori } else { StoppingRule::StepDistance };
    let engine = Engine {
        x0: cfg.x0,
        tol: cfg.tol,
        max_iters: cfg.max_iters,
        record_trace: cfg.record_trace,
        atol: cfg.sampling.atol(),
        rule,
        k_stop: k.map(|c| c.k),
        k_check: k.map(|c| c.k),
    };
    let check_set = family_verification_indices(budget);
    let run = engine.run(
        |n, x| Ok((members[n % budget].apply(x)?, None)),
        |a, b| metric.eval(a, b),
        None,
        |z| {
            let mut worst = S::zero();
            for &i in &check_set {
                worst = worst.max(metric.eval(z, members[i - 1].apply(z)?)?);
            }
            Ok(worst)
        },
    )?;
    let mut notes = vec![format!("residual is max d(z, f_n z) over n in {check_set:?}")];
    if k.is_none() {
        notes.push(NO_K_NOTE.to_string());
    }
    if run.iterations > budget {
        notes.push(format!("family index wrapped at index_budget = {budget}"));
    }
    let reports = resolved.and_then(|(_, r)| r).map(ConditionReport::from).into_iter().collect();
    finish(run, cfg, metric, k, rule, reports, notes)
}

/// `d(Tx, Ty) - alpha(d(x, y), d(x, Tx), d(y, Ty))` and the ratio
/// `d(Tx, Ty) / d(x, y)`.
pub fn contraction_slack<S: Scalar>(
    left: &SelfMap<S>,
    right: &SelfMap<S>,
    metric: &DislocatedMetric<S>,
    alpha: &ControlFunction<S>,
    x: S,
    y: S,
) -> Result<(S, S, S)> {
    let (tx, ty) = (left.apply(x)?, right.apply(y)?);
    let dxy = metric.eval(x, y)?;
    let lhs = metric.eval(tx, ty)?;
    let rhs = alpha.eval(dxy, metric.eval(x, tx)?, metric.eval(y, ty)?)?;
    Ok((lhs - rhs, lhs, dxy))
}

fn ratio<S: Scalar>(lhs: S, base: S, atol: S) -> Option<S> {
    (base > atol).then(|| lhs / base)
}

/// Samples `d(Tx, Ty) <= alpha(d(x, y), d(x, Tx), d(y, Ty))` over the
/// domain. The report also carries the largest `d(Tx, Ty) / d(x, y)`.
pub fn verify_contraction<S: Scalar>(
    map: &SelfMap<S>,
    metric: &DislocatedMetric<S>,
    alpha: &ControlFunction<S>,
    plan: &SamplingPlan,
) -> Result<AxiomReport<S>> {
    plan.validate()?;
    let atol = plan.atol();
    let dom = metric.domain();
    let samples = plan.pairs(dom.lo(), dom.hi(), Stream::Pairs);
    let s = scan(&["x", "y"], &samples, |&[x, y]| {
        let (slack, lhs, dxy) = contraction_slack(map, map, metric, alpha, x, y)?;
        Ok(Measured::new(slack, vec![x, y]).aux(ratio(lhs, dxy, atol)))
    })?;
    Ok(AxiomReport::from_scan("contraction", s, atol, plan))
}

/// Default index pairs: every `(i, j)` with `i, j <= min(budget, 8)`, plus
/// `(1, budget)`.
pub fn default_index_pairs(budget: usize) -> Vec<(usize, usize)> {
    let m = budget.min(8);
    let mut pairs: Vec<(usize, usize)> = (1..=m).flat_map(|i| (1..=m).map(move |j| (i, j))).collect();
    if !pairs.contains(&(1, budget)) {
        pairs.push((1, budget));
    }
    pairs
}

/// Samples `d(f_i x, f_j y) <= alpha(d(x, y), d(x, f_i x), d(y, f_j y))`
/// over the given index pairs (default [`default_index_pairs`]).
pub fn verify_family_contraction<S: Scalar>(
    family: &MapFamily<S>,
    metric: &DislocatedMetric<S>,
    alpha: &ControlFunction<S>,
    plan: &SamplingPlan,
    index_pairs: Option<&[(usize, usize)]>,
) -> Result<AxiomReport<S>> {
    plan.validate()?;
    let atol = plan.atol();
    let pairs = index_pairs.map_or_else(|| default_index_pairs(family.index_budget()), <[_]>::to_vec);
    if pairs.is_empty() {
        return Err(Error::param("index_pairs", "must not be empty"));
    }
    let mut members = std::collections::BTreeMap::new();
    for &(i, j) in &pairs {
        for n in [i, j] {
            if let std::collections::btree_map::Entry::Vacant(e) = members.entry(n) {
                e.insert(family.member(n)?);
            }
        }
    }
    let dom = metric.domain();
    let points = plan.pairs(dom.lo(), dom.hi(), Stream::Pairs);
    let samples: Vec<(usize, usize, S, S)> =
        pairs.iter().flat_map(|&(i, j)| points.iter().map(move |&[x, y]| (i, j, x, y))).collect();
    let s = scan(&["i", "j", "x", "y"], &samples, |&(i, j, x, y)| {
        let (slack, lhs, dxy) = contraction_slack(&members[&i], &members[&j], metric, alpha, x, y)?;
        Ok(Measured::new(slack, vec![S::lit(i as f64), S::lit(j as f64), x, y]).aux(ratio(lhs, dxy, atol)))
    })?;
    let checked: Vec<String> = pairs.iter().map(|(i, j)| format!("({i},{j})")).collect();
    Ok(AxiomReport::from_scan("family contraction", s, atol, plan).note(format!(
        "index set truncated to {} of all (i, j): {}",
        pairs.len(),
        checked.join(" ")
    )))
}
