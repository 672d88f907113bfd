//! Two dislocated metrics `d <= delta` and the alternating scheme
//! `x_{2n+1} = T x_{2n}`, `x_{2n+2} = S x_{2n+1}` for a common fixed point.

use serde::Serialize;

use crate::control::{ControlFunction, KSource};
use crate::error::{Error, Result};
use crate::maps::SelfMap;
use crate::metric::DislocatedMetric;
use crate::sampling::{scan, AxiomReport, Measured, SamplingPlan, Stream};
use crate::scalar::Scalar;
use crate::solver::{
    bounds, resolve_k, ConditionReport, Engine, IterationTrace, SolveError, SolveStatus, SolverConfig, StoppingRule,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommonFixedPointCertificate<S: Scalar> {
    pub status: SolveStatus,
    pub z: S,
    /// `delta(z, T z)`
    #[serde(rename = "residual_T")]
    pub residual_t: S,
    /// `delta(z, S z)`
    #[serde(rename = "residual_S")]
    pub residual_s: S,
    /// `delta(z, z)`
    pub self_distance: S,
    pub iterations: usize,
    pub x0: S,
    pub tol: S,
    /// `delta(x_0, x_1)`
    pub d01: S,
    pub k_used: Option<S>,
    pub k_source: Option<KSource>,
    pub stopping_rule: StoppingRule,
    pub apriori_bound_at_stop: Option<S>,
    pub aposteriori_bound: Option<S>,
    /// Steps under `delta`; `d_step` holds the same step under `d`.
    pub trace: Option<IterationTrace<S>>,
    pub condition_reports: Vec<ConditionReport<S>>,
    /// Converged and every attached report passed.
    pub sound: bool,
    pub notes: Vec<String>,
}

impl<S: Scalar> CommonFixedPointCertificate<S> {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

fn same_domain<S: Scalar>(d: &DislocatedMetric<S>, delta: &DislocatedMetric<S>) -> Result<()> {
    if d.domain() != delta.domain() {
        return Err(Error::DomainMismatch);
    }
    Ok(())
}

/// Samples `d(x, y) <= delta(x, y)`.
pub fn check_dominance<S: Scalar>(
    d: &DislocatedMetric<S>,
    delta: &DislocatedMetric<S>,
    plan: &SamplingPlan,
) -> Result<AxiomReport<S>> {
    plan.validate()?;
    same_domain(d, delta)?;
    let dom = d.domain();
    let samples = plan.pairs(dom.lo(), dom.hi(), Stream::Pairs);
    let s = scan(&["x", "y"], &samples, |&[x, y]| Ok(Measured::new(d.eval(x, y)? - delta.eval(x, y)?, vec![x, y])))?;
    Ok(AxiomReport::from_scan("dominance", s, plan.atol(), plan))
}

/// Slacks of `delta(Tx, Sy) <= alpha(delta(x, y), delta(x, Tx), delta(y, Sy))`
/// and of its mirror `delta(Sy, Tx) <= alpha(delta(y, x), delta(y, Sy), delta(x, Tx))`.
pub fn pair_contraction_slacks<S: Scalar>(
    t: &SelfMap<S>,
    s: &SelfMap<S>,
    delta: &DislocatedMetric<S>,
    alpha: &ControlFunction<S>,
    x: S,
    y: S,
) -> Result<(S, S)> {
    let (tx, sy) = (t.apply(x)?, s.apply(y)?);
    let (dxt, dys) = (delta.eval(x, tx)?, delta.eval(y, sy)?);
    let forward = delta.eval(tx, sy)? - alpha.eval(delta.eval(x, y)?, dxt, dys)?;
    let mirror = delta.eval(sy, tx)? - alpha.eval(delta.eval(y, x)?, dys, dxt)?;
    Ok((forward, mirror))
}

/// Checks both pair inequalities at every sample. The witness case names
/// the violated one ("T-S" or "S-T").
pub fn verify_pair_contraction<S: Scalar>(
    t: &SelfMap<S>,
    s: &SelfMap<S>,
    delta: &DislocatedMetric<S>,
    alpha: &ControlFunction<S>,
    plan: &SamplingPlan,
) -> Result<AxiomReport<S>> {
    plan.validate()?;
    let atol: S = plan.atol();
    let dom = delta.domain();
    let points = plan.pairs(dom.lo(), dom.hi(), Stream::Pairs);
    let samples: Vec<(bool, [S; 2])> = points.iter().flat_map(|&p| [(false, p), (true, p)]).collect();
    let r = scan(&["x", "y"], &samples, |&(mirror, [x, y])| {
        let (forward, back) = pair_contraction_slacks(t, s, delta, alpha, x, y)?;
        let (tx, sy) = (t.apply(x)?, s.apply(y)?);
        let base = delta.eval(x, y)?;
        let (slack, lhs, case) =
            if mirror { (back, delta.eval(sy, tx)?, "S-T") } else { (forward, delta.eval(tx, sy)?, "T-S") };
        Ok(Measured::new(slack, vec![x, y]).case(case).aux((base > atol).then(|| lhs / base)))
    })?;
    Ok(AxiomReport::from_scan("pair contraction", r, atol, plan))
}

const CONTINUITY_NOTE: &str = "continuity of T with respect to d is assumed, not checked";

/// Alternates `T` and `S` from `cfg.x0` (first map applied is `T`).
///
/// Steps and residuals are measured in `delta`; each trace step also
/// records its length under `d`. The dominance and pair-contraction
/// reports are attached; failing ones make the certificate unsound but do
/// not stop the solve. `plan` drives those checks.
#[allow(clippy::too_many_arguments)]
pub fn solve_alternating<S: Scalar>(
    t: &SelfMap<S>,
    s: &SelfMap<S>,
    d: &DislocatedMetric<S>,
    delta: &DislocatedMetric<S>,
    alpha: &ControlFunction<S>,
    cfg: &SolverConfig<S>,
    plan: &SamplingPlan,
) -> std::result::Result<CommonFixedPointCertificate<S>, SolveError<CommonFixedPointCertificate<S>>> {
    cfg.validate(delta)?;
    same_domain(d, delta)?;
    let mut reports: Vec<ConditionReport<S>> =
        vec![check_dominance(d, delta, plan)?.into(), verify_pair_contraction(t, s, delta, alpha, plan)?.into()];
    let resolved = resolve_k(Some(alpha), delta, cfg)?;
    let k = resolved.as_ref().map(|(c, _)| *c);
    reports.extend(resolved.and_then(|(_, r)| r).map(ConditionReport::from));
    let engine = Engine {
        x0: cfg.x0,
        tol: cfg.tol,
        max_iters: cfg.max_iters,
        record_trace: cfg.record_trace,
        atol: cfg.sampling.atol(),
        rule: StoppingRule::APosteriori,
        k_stop: k.map(|c| c.k),
        k_check: k.map(|c| c.k),
    };
    let in_d = |a: S, b: S| d.eval(a, b);
    let run = engine.run(
        |n, x| Ok(if n.is_multiple_of(2) { (t.apply(x)?, Some("T")) } else { (s.apply(x)?, Some("S")) }),
        |a, b| delta.eval(a, b),
        Some(&in_d),
        |z| Ok(delta.eval(z, t.apply(z)?)?.max(delta.eval(z, s.apply(z)?)?).max(delta.eval(z, z)?)),
    )?;
    let b = bounds(k.map(|c| c.k), &run)?;
    let z = run.z;
    let converged = run.status == SolveStatus::Converged;
    let cert = CommonFixedPointCertificate {
        status: run.status,
        z,
        residual_t: delta.eval(z, t.apply(z)?)?,
        residual_s: delta.eval(z, s.apply(z)?)?,
        self_distance: delta.self_distance(z)?,
        iterations: run.iterations,
        x0: cfg.x0,
        tol: cfg.tol,
        d01: run.d01,
        k_used: k.map(|c| c.k),
        k_source: k.map(|c| c.source),
        stopping_rule: StoppingRule::APosteriori,
        apriori_bound_at_stop: b.apriori,
        aposteriori_bound: b.aposteriori,
        trace: cfg.record_trace.then_some(run.trace),
        sound: converged && reports.iter().all(ConditionReport::passed),
        condition_reports: reports,
        notes: vec![CONTINUITY_NOTE.to_string()],
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Domain;
    use crate::solver::solve_picard;

    fn plan() -> SamplingPlan {
        SamplingPlan { random_samples: 512, ..SamplingPlan::default() }
    }

    struct Setup {
        t: SelfMap<f64>,
        d: DislocatedMetric<f64>,
        delta: DislocatedMetric<f64>,
        alpha: ControlFunction<f64>,
    }

    fn example2() -> Setup {
        let dom = Domain::unit();
        let d = DislocatedMetric::absplus(dom);
        Setup {
            t: SelfMap::affine(0.25, 0.0, dom, &plan()).unwrap(),
            delta: d.scale(2.0).unwrap(),
            d,
            alpha: ControlFunction::scaled_first(0.5).unwrap(),
        }
    }

    fn example4() -> Setup {
        let dom = Domain::unit();
        let d = DislocatedMetric::centered(0.5, dom).unwrap();
        Setup {
            t: SelfMap::affine(0.5, 0.25, dom, &plan()).unwrap(),
            delta: d.scale(2.0).unwrap(),
            d,
            alpha: ControlFunction::scaled_first(0.75).unwrap(),
        }
    }

    #[test]
    fn dominance_examples() {
        let e = example2();
        assert!(check_dominance(&e.d, &e.delta, &plan()).unwrap().passed());
        let r = check_dominance(&e.delta, &e.d, &plan()).unwrap();
        assert!(!r.passed());
        let w = r.witness.unwrap();
        assert!(e.d.eval(w.point[0], w.point[1]).unwrap() > 0.0);
        let eq = check_dominance(&e.d, &e.d, &plan()).unwrap();
        assert!(eq.passed());
        assert_eq!(eq.max_violation, 0.0);
        let other = DislocatedMetric::absplus(Domain::new(0.0, 2.0).unwrap());
        assert_eq!(check_dominance(&e.d, &other, &plan()).unwrap_err(), Error::DomainMismatch);
    }

    #[test]
    fn pair_contraction_examples() {
        let e = example4();
        let r = verify_pair_contraction(&e.t, &e.t, &e.delta, &e.alpha, &plan()).unwrap();
        assert!(r.passed());
        assert!((r.max_ratio.unwrap() - 0.5).abs() <= 1e-12);
        let e = example2();
        let r = verify_pair_contraction(&e.t, &e.t, &e.delta, &e.alpha, &plan()).unwrap();
        assert!(r.passed());
        assert!((r.max_ratio.unwrap() - 0.25).abs() <= 1e-12);
    }

    #[test]
    fn mismatched_pair_fails_at_origin() {
        let e = example2();
        let s = SelfMap::affine(0.5, 0.5, Domain::unit(), &plan()).unwrap();
        let (forward, _) = pair_contraction_slacks(&e.t, &s, &e.delta, &e.alpha, 0.0, 0.0).unwrap();
        assert_eq!(forward, 2.0);
        assert!(!verify_pair_contraction(&e.t, &s, &e.delta, &e.alpha, &plan()).unwrap().passed());
    }

    #[test]
    fn example4_alternating() {
        let e = example4();
        let cert = solve_alternating(&e.t, &e.t, &e.d, &e.delta, &e.alpha, &SolverConfig::new(0.9), &plan()).unwrap();
        assert!((cert.z - 0.5).abs() <= 1e-9);
        assert!(cert.self_distance <= 1e-9);
        assert!(cert.sound);
        let trace = cert.trace.unwrap();
        let xs: Vec<f64> = trace.steps.iter().map(|s| s.x).collect();
        assert_eq!(&xs[..4], &[0.9, 0.7, 0.6, 0.55]);
        assert_eq!(trace.steps[0].map, Some("T"));
        assert_eq!(trace.steps[1].map, Some("S"));
        for step in &trace.steps {
            assert!(step.d_step.unwrap() <= step.step_distance + 1e-9);
        }
    }

    #[test]
    fn example2_alternating_matches_picard() {
        let e = example2();
        let cfg = SolverConfig::new(1.0);
        let cert = solve_alternating(&e.t, &e.t, &e.d, &e.delta, &e.alpha, &cfg, &plan()).unwrap();
        assert!(cert.z.abs() <= 1e-9);
        assert!(cert.self_distance <= 1e-9);
        let single = solve_picard(&e.t, &e.delta, Some(&e.alpha), &cfg).unwrap();
        assert!((single.z - cert.z).abs() <= 2e-9);
    }
}
