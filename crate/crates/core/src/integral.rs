//! Integral-type contractions: `Psi(s) = int_0^s phi(t) dt` by adaptive
//! Simpson quadrature, Φ-class membership checks, and the condition
//! `Psi(d(Tx, Ty)) <= alpha(Psi(d(x, y)), Psi(d(x, Tx)), Psi(d(y, Ty)))`.

use serde::{Deserialize, Serialize};

use crate::control::ControlFunction;
use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::maps::SelfMap;
use crate::metric::DislocatedMetric;
use crate::sampling::{scan, AxiomReport, Measured, SamplingPlan, Stream};
use crate::scalar::Scalar;
use crate::solver::{
    resolve_k, ConditionReport, Engine, FixedPointCertificate, SolveError, SolveStatus, SolverConfig, StoppingRule,
};

/// Dyadic scales `B 2^-j`, `j = 0..=PHI_EPS_STEPS`, tested for positivity.
const PHI_EPS_STEPS: i32 = 20;

#[derive(Debug, Clone, PartialEq)]
pub enum PhiBody {
    /// Expression in `t`.
    Expr(Expression),
    ConstantOne,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiFunction {
    body: PhiBody,
}

impl PhiFunction {
    pub fn new(body: PhiBody) -> Result<Self> {
        if let PhiBody::Expr(e) = &body {
            e.check_variables(&["t"]).map_err(|name| Error::UnexpectedVariable { role: "phi", name, allowed: "t" })?;
        }
        Ok(PhiFunction { body })
    }

    pub fn constant_one() -> Self {
        PhiFunction { body: PhiBody::ConstantOne }
    }

    pub fn from_expr(source: &str) -> Result<Self> {
        Self::new(PhiBody::Expr(source.parse()?))
    }

    pub fn body(&self) -> &PhiBody {
        &self.body
    }

    /// `phi(t)` without the sign check.
    pub fn eval_raw<S: Scalar>(&self, t: S) -> Result<S> {
        match &self.body {
            PhiBody::ConstantOne => Ok(S::one()),
            PhiBody::Expr(e) => {
                e.evaluate(&[("t", t)]).map_err(|source| Error::Eval { role: "phi", at: vec![t.as_f64()], source })
            }
        }
    }

    pub fn eval<S: Scalar>(&self, t: S) -> Result<S> {
        let v = self.eval_raw(t)?;
        if v < S::zero() || v.is_nan() {
            return Err(Error::NegativeValue { role: "phi", at: vec![t.as_f64()], value: v.as_f64() });
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureMethod {
    AdaptiveSimpson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub method: QuadratureMethod,
    pub abs_tol: f64,
    pub max_depth: u32,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { method: QuadratureMethod::AdaptiveSimpson, abs_tol: 1e-10, max_depth: 40 }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(Error::param("quadrature.abs_tol", "must be positive and finite"));
        }
        Ok(())
    }
}

struct Simpson<'a> {
    phi: &'a PhiFunction,
    max_depth: u32,
    /// Floor for the per-interval tolerance; keeps integrable endpoint
    /// singularities (e.g. `sqrt(t)` at 0) from exhausting the depth.
    min_eps: f64,
}

impl Simpson<'_> {
    #[allow(clippy::too_many_arguments)]
    fn refine<S: Scalar>(&self, a: S, b: S, fa: S, fm: S, fb: S, whole: S, eps: S, depth: u32) -> Result<S> {
        let two = S::lit(2.0);
        let m = (a + b) / two;
        let (lm, rm) = ((a + m) / two, (m + b) / two);
        if !(a < lm && lm < m && m < rm && rm < b) {
            // Interval exhausted the floating point resolution.
            return Ok(whole);
        }
        let (flm, frm) = (self.phi.eval(lm)?, self.phi.eval(rm)?);
        let six = S::lit(6.0);
        let four = S::lit(4.0);
        let left = (m - a) / six * (fa + four * flm + fm);
        let right = (b - m) / six * (fm + four * frm + fb);
        let delta = left + right - whole;
        if delta.abs() <= S::lit(15.0) * eps {
            return Ok(left + right + delta / S::lit(15.0));
        }
        if depth == 0 {
            return Err(Error::Quadrature { a: a.as_f64(), b: b.as_f64(), max_depth: self.max_depth });
        }
        let eps = (eps / two).max(S::lit(self.min_eps));
        Ok(self.refine(a, m, fa, flm, fm, left, eps, depth - 1)?
            + self.refine(m, b, fm, frm, fb, right, eps, depth - 1)?)
    }
}

/// `Psi(s) = int_0^s phi(t) dt` to within `q.abs_tol`. `Psi(0) = 0` exactly.
pub fn psi<S: Scalar>(phi: &PhiFunction, s: S, q: &QuadratureConfig) -> Result<S> {
    q.validate()?;
    if !(s >= S::zero() && s.is_finite()) {
        return Err(Error::param("s", format!("must be finite and nonnegative, got {s}")));
    }
    if s == S::zero() {
        return Ok(S::zero());
    }
    if let PhiBody::ConstantOne = phi.body {
        return Ok(s);
    }
    let (a, b) = (S::zero(), s);
    let m = s / S::lit(2.0);
    let (fa, fm, fb) = (phi.eval(a)?, phi.eval(m)?, phi.eval(b)?);
    let whole = s / S::lit(6.0) * (fa + S::lit(4.0) * fm + fb);
    let rule = Simpson { phi, max_depth: q.max_depth, min_eps: q.abs_tol * 2f64.powi(-20) };
    let v = rule.refine(a, b, fa, fm, fb, whole, S::lit(q.abs_tol), q.max_depth)?;
    Ok(v.max(S::zero()))
}

/// Cached `Psi` values for one verification run, made monotone in `s`
/// by a running maximum over the sorted arguments.
pub struct PsiTable<S: Scalar> {
    keys: Vec<S>,
    values: Vec<S>,
}

impl<S: Scalar> PsiTable<S> {
    pub fn build(phi: &PhiFunction, args: impl IntoIterator<Item = S>, q: &QuadratureConfig) -> Result<Self> {
        let mut keys: Vec<S> = args.into_iter().collect();
        keys.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
        keys.dedup();
        let mut values = Vec::with_capacity(keys.len());
        let mut running = S::zero();
        for &s in &keys {
            running = running.max(psi(phi, s, q)?);
            values.push(running);
        }
        Ok(PsiTable { keys, values })
    }

    pub fn get(&self, s: S) -> Option<S> {
        self.keys.binary_search_by(|k| k.partial_cmp(&s).expect("finite distances")).ok().map(|i| self.values[i])
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

/// Nonnegativity of `phi` on `[0, bound]` and `Psi(eps) > 0` for
/// `eps = bound * 2^-j`, `j = 0..=20`.
pub fn check_phi_class<S: Scalar>(
    phi: &PhiFunction,
    plan: &SamplingPlan,
    q: &QuadratureConfig,
    bound: S,
) -> Result<AxiomReport<S>> {
    plan.validate()?;
    q.validate()?;
    let atol: S = plan.atol();
    let points = plan.points(S::zero(), bound, Stream::Phi);
    let sign = scan(&["t"], &points, |&t| Ok(Measured::new(-phi.eval_raw(t)?, vec![t]).case("nonnegativity")))?;
    let report = AxiomReport::from_scan("phi class", sign, atol, plan);
    if !report.passed() {
        return Ok(report.note("phi takes negative values; integral positivity not evaluated"));
    }
    let scales: Vec<S> = (0..=PHI_EPS_STEPS).map(|j| bound * S::lit(2f64.powi(-j))).collect();
    let positivity = scan(&["eps"], &scales, |&eps| {
        let v = psi(phi, eps, q)?;
        let slack = if v <= S::zero() { eps } else { -v };
        Ok(Measured::new(slack, vec![eps]).case("positivity"))
    })?;
    let pos_report = AxiomReport::from_scan("phi class", positivity, atol, plan);
    let mut merged = if pos_report.passed() {
        AxiomReport { samples_checked: report.samples_checked + pos_report.samples_checked, ..report }
    } else {
        AxiomReport { samples_checked: report.samples_checked + pos_report.samples_checked, ..pos_report }
    };
    merged.notes.push(format!(
        "positivity of int_0^eps phi sampled only at eps = {bound} * 2^-j, j = 0..={PHI_EPS_STEPS}; \
         local summability is assumed"
    ));
    Ok(merged)
}

/// Integral-condition slack at `(x, y)` with direct quadrature.
#[allow(clippy::too_many_arguments)]
pub fn integral_slack<S: Scalar>(
    map: &SelfMap<S>,
    metric: &DislocatedMetric<S>,
    alpha: &ControlFunction<S>,
    phi: &PhiFunction,
    q: &QuadratureConfig,
    x: S,
    y: S,
) -> Result<S> {
    let [lhs, dxy, dxt, dyt] = distances(map, metric, x, y)?;
    let p = |s| psi(phi, s, q);
    Ok(p(lhs)? - alpha.eval(p(dxy)?, p(dxt)?, p(dyt)?)?)
}

fn distances<S: Scalar>(map: &SelfMap<S>, metric: &DislocatedMetric<S>, x: S, y: S) -> Result<[S; 4]> {
    let (tx, ty) = (map.apply(x)?, map.apply(y)?);
    Ok([metric.eval(tx, ty)?, metric.eval(x, y)?, metric.eval(x, tx)?, metric.eval(y, ty)?])
}

/// Samples the integral-type condition. Violations are reported only
/// beyond `violation_atol + 4 abs_tol` so quadrature error is not
/// mistaken for a counterexample.
pub fn verify_integral_contraction<S: Scalar>(
    map: &SelfMap<S>,
    metric: &DislocatedMetric<S>,
    alpha: &ControlFunction<S>,
    phi: &PhiFunction,
    plan: &SamplingPlan,
    q: &QuadratureConfig,
) -> Result<AxiomReport<S>> {
    plan.validate()?;
    q.validate()?;
    let atol: S = plan.atol();
    let dom = metric.domain();
    let points = plan.pairs(dom.lo(), dom.hi(), Stream::Pairs);
    let mut samples = Vec::with_capacity(points.len());
    for &[x, y] in &points {
        samples.push((x, y, distances(map, metric, x, y)?));
    }
    let table = PsiTable::build(phi, samples.iter().flat_map(|s| s.2), q)?;
    let p = |s: S| table.get(s).expect("distance cached");
    let s = scan(&["x", "y"], &samples, |&(x, y, [lhs, dxy, dxt, dyt])| {
        let left = p(lhs);
        let base = p(dxy);
        let slack = left - alpha.eval(base, p(dxt), p(dyt))?;
        Ok(Measured::new(slack, vec![x, y]).aux((base > atol).then(|| left / base)))
    })?;
    let threshold = atol + S::lit(4.0 * q.abs_tol);
    Ok(AxiomReport::from_scan("integral contraction", s, threshold, plan)
        .note(format!("Psi evaluated at {} distinct distances", table.len())))
}

/// Verifies the integral condition, then runs Picard iteration with the
/// plain step rule. `k` from `alpha` is recorded but contracts the
/// `Psi`-transformed steps, so no a priori bound on `d` is claimed.
#[allow(clippy::too_many_arguments)]
pub fn solve_integral<S: Scalar>(
    map: &SelfMap<S>,
    metric: &DislocatedMetric<S>,
    alpha: &ControlFunction<S>,
    phi: &PhiFunction,
    cfg: &SolverConfig<S>,
    plan: &SamplingPlan,
    q: &QuadratureConfig,
) -> std::result::Result<FixedPointCertificate<S>, SolveError<FixedPointCertificate<S>>> {
    cfg.validate(metric)?;
    let report = verify_integral_contraction(map, metric, alpha, phi, plan, q)?;
    let resolved = resolve_k(Some(alpha), metric, cfg)?;
    let k = resolved.as_ref().map(|(c, _)| *c);
    let engine = Engine {
        x0: cfg.x0,
        tol: cfg.tol,
        max_iters: cfg.max_iters,
        record_trace: cfg.record_trace,
        atol: cfg.sampling.atol(),
        rule: StoppingRule::StepDistance,
        k_stop: None,
        k_check: None,
    };
    let run = engine.run(
        |_, x| Ok((map.apply(x)?, None)),
        |a, b| metric.eval(a, b),
        None,
        |z| metric.eval(z, map.apply(z)?),
    )?;
    let mut reports: Vec<ConditionReport<S>> = vec![report.into()];
    reports.extend(resolved.and_then(|(_, r)| r).map(ConditionReport::from));
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
        stopping_rule: StoppingRule::StepDistance,
        apriori_bound_at_stop: None,
        aposteriori_bound: None,
        trace: cfg.record_trace.then_some(run.trace),
        condition_reports: reports,
        notes: vec!["k bounds the Psi-transformed step sequence; stopping uses the plain step distance".into()],
    };
    match cert.status {
        SolveStatus::Converged => Ok(cert),
        _ => Err(SolveError::NotConverged(Box::new(cert))),
    }
}
