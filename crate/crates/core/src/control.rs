//! Control functions `alpha(u, v, w)` and sampled checks of the three
//! axioms they must satisfy.
//!
//! The only quantity the solvers need from A2 is the uniform constant
//! `k`; it is either declared by the user or estimated from the largest
//! ratio `a / b` seen over triggered samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::sampling::{grid_nodes, scan, AxiomReport, Measured, SamplingPlan, Scan, Stream, Verdict, Witness};
use crate::scalar::Scalar;

pub const DEFAULT_K_MAX: f64 = 0.999;

/// Coarse cells per axis for the continuity heuristic.
const CONTINUITY_CELLS: usize = 16;
/// Required shrink factor of the neighbor difference under halving.
const CONTINUITY_FACTOR: f64 = 1.5;
const BISECTION_STEPS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub enum ControlBody<S: Scalar> {
    Expr(Expression),
    /// `c * u`
    ScaledFirst(S),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KSource {
    Declared,
    Estimated,
}

/// Contraction constant handed to the solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionConstant<S: Scalar> {
    pub k: S,
    pub source: KSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlFunction<S: Scalar> {
    body: ControlBody<S>,
    declared_k: Option<S>,
}

/// Result of the A2 check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct A2Report<S: Scalar> {
    pub axiom: String,
    pub verdict: Verdict,
    /// Largest `a / b` over triggered samples with `b > atol`.
    pub k_hat: S,
    pub k_max: S,
    pub witness: Option<Witness<S>>,
    pub samples_checked: usize,
    pub seed: u64,
    pub notes: Vec<String>,
}

impl<S: Scalar> A2Report<S> {
    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }
}

fn check_k<S: Scalar>(k: S) -> Result<S> {
    if k >= S::zero() && k < S::one() {
        Ok(k)
    } else {
        Err(Error::param("declared_k", format!("{k} is not in [0, 1)")))
    }
}

impl<S: Scalar> ControlFunction<S> {
    /// `alpha(u, v, w) = c u` with `0 <= c < 1`; declares `k = c`.
    pub fn scaled_first(c: S) -> Result<Self> {
        let c = check_k(c).map_err(|_| Error::param("c", format!("{c} is not in [0, 1)")))?;
        Ok(ControlFunction { body: ControlBody::ScaledFirst(c), declared_k: Some(c) })
    }

    pub fn from_expr(source: &str, declared_k: Option<S>) -> Result<Self> {
        Self::new(ControlBody::Expr(source.parse()?), declared_k)
    }

    pub fn new(body: ControlBody<S>, declared_k: Option<S>) -> Result<Self> {
        match &body {
            ControlBody::ScaledFirst(c) => {
                if declared_k.is_some_and(|k| k != *c) {
                    return Err(Error::param("declared_k", "must equal c for scaled_first"));
                }
                return Self::scaled_first(*c);
            }
            ControlBody::Expr(e) => e.check_variables(&["u", "v", "w"]).map_err(|name| Error::UnexpectedVariable {
                role: "alpha",
                name,
                allowed: "u, v, w",
            })?,
        }
        let declared_k = declared_k.map(check_k).transpose()?;
        Ok(ControlFunction { body, declared_k })
    }

    pub fn body(&self) -> &ControlBody<S> {
        &self.body
    }

    pub fn declared_k(&self) -> Option<S> {
        self.declared_k
    }

    pub fn eval(&self, u: S, v: S, w: S) -> Result<S> {
        if !(u >= S::zero() && v >= S::zero() && w >= S::zero()) {
            return Err(Error::param("alpha arguments", format!("must be nonnegative, got ({u}, {v}, {w})")));
        }
        let value = match &self.body {
            ControlBody::ScaledFirst(c) => *c * u,
            ControlBody::Expr(e) => e.evaluate(&[("u", u), ("v", v), ("w", w)]).map_err(|source| Error::Eval {
                role: "alpha",
                at: vec![u.as_f64(), v.as_f64(), w.as_f64()],
                source,
            })?,
        };
        if value < S::zero() || value.is_nan() {
            return Err(Error::NegativeValue {
                role: "alpha",
                at: vec![u.as_f64(), v.as_f64(), w.as_f64()],
                value: value.as_f64(),
            });
        }
        Ok(value)
    }

    /// Which of the three A2 trigger inequalities holds at `(a, b)`, if any.
    pub fn a2_trigger(&self, a: S, b: S) -> Result<Option<&'static str>> {
        if a <= self.eval(a, b, b)? {
            return Ok(Some("a<=alpha(a,b,b)"));
        }
        if a <= self.eval(b, a, b)? {
            return Ok(Some("a<=alpha(b,a,b)"));
        }
        if a <= self.eval(b, b, a)? {
            return Ok(Some("a<=alpha(b,b,a)"));
        }
        Ok(None)
    }

    /// `alpha(t, s1, s2) - t + 2 atol`: exceeds `atol` exactly when
    /// `alpha(t, s1, s2) > t - atol`.
    pub fn a3_slack(&self, t: S, s1: S, s2: S, atol: S) -> Result<S> {
        Ok(self.eval(t, s1, s2)? - t + atol + atol)
    }

    /// Continuity heuristic on `[0, bound]^3`.
    ///
    /// Compares the largest difference between axis neighbours on a grid
    /// of spacing `h` with the same quantity at `h / 2`. Continuous
    /// functions shrink it under refinement; a jump does not. The slack is
    /// `D(h/2) - D(h) / 1.5`.
    pub fn check_a1_continuity(&self, plan: &SamplingPlan, bound: S) -> Result<AxiomReport<S>> {
        plan.validate()?;
        let cells = (plan.grid_points_per_axis - 1).min(CONTINUITY_CELLS);
        let fine_n = 2 * cells + 1;
        let nodes = grid_nodes(S::zero(), bound, fine_n);
        let idx = |i: usize, j: usize, k: usize| (i * fine_n + j) * fine_n + k;
        let mut values = Vec::with_capacity(fine_n.pow(3));
        for &u in &nodes {
            for &v in &nodes {
                for &w in &nodes {
                    values.push(self.eval(u, v, w)?);
                }
            }
        }
        // Largest axis-neighbour difference with index stride `step`.
        let level = |step: usize| -> (S, [usize; 3]) {
            let mut best = (S::zero(), [0usize; 3]);
            for i in (0..fine_n).step_by(step) {
                for j in (0..fine_n).step_by(step) {
                    for k in (0..fine_n).step_by(step) {
                        let here = values[idx(i, j, k)];
                        for (ni, nj, nk) in [(i + step, j, k), (i, j + step, k), (i, j, k + step)] {
                            if ni >= fine_n || nj >= fine_n || nk >= fine_n {
                                continue;
                            }
                            let diff = (values[idx(ni, nj, nk)] - here).abs();
                            if diff > best.0 {
                                best = (diff, [i, j, k]);
                            }
                        }
                    }
                }
            }
            best
        };
        let (coarse, _) = level(2);
        let (fine, at) = level(1);
        let slack = fine - coarse / S::lit(CONTINUITY_FACTOR);
        let scan = Scan {
            best: Some(Witness {
                names: vec!["u", "v", "w"],
                point: at.iter().map(|&i| nodes[i]).collect(),
                slack,
                case: None,
            }),
            count: values.len(),
            max_aux: None,
        };
        let report = AxiomReport::from_scan("A1 continuity (heuristic)", scan, plan.atol(), plan);
        Ok(report.note(format!(
            "heuristic: neighbour difference {coarse} at spacing h, {fine} at h/2 over [0, {bound}]^3; \
             continuity cannot be decided from samples"
        )))
    }

    /// Necessary consequence of A2 on `[0, bound]^2`.
    ///
    /// Every sampled `(a, b)` that satisfies one of the trigger
    /// inequalities contributes the ratio `a / b`; a triggered pair with
    /// `b <= atol < a` fails outright. Along each grid row the trigger
    /// boundary in `a` is refined by bisection so that `k_hat` approaches
    /// the supremum rather than the nearest grid ratio.
    pub fn check_a2(&self, plan: &SamplingPlan, bound: S, k_max: S) -> Result<A2Report<S>> {
        plan.validate()?;
        if !(k_max >= S::zero() && k_max < S::one()) {
            return Err(Error::param("k_max", "must lie in [0, 1)"));
        }
        let atol: S = plan.atol();
        let mut samples = plan.pairs(S::zero(), bound, Stream::Control);
        samples.extend(self.a2_boundary(plan, bound, atol)?);

        let s = scan(&["a", "b"], &samples, |&[a, b]| {
            Ok(match self.a2_trigger(a, b)? {
                None => Measured::new(S::neg_infinity(), vec![a, b]),
                Some(case) if b <= atol => {
                    let slack = if a > atol { S::infinity() } else { S::neg_infinity() };
                    Measured::new(slack, vec![a, b]).case(case)
                }
                Some(case) => {
                    let ratio = a / b;
                    Measured::new(ratio, vec![a, b]).case(case).aux(Some(ratio))
                }
            })
        })?;
        let k_hat = s.max_aux.unwrap_or(S::zero());
        let degenerate = s.best.as_ref().is_some_and(|w| w.slack == S::infinity());
        let failed = degenerate || k_hat > k_max;
        let mut notes = vec!["tests a necessary consequence of A2, not the axiom itself".to_string()];
        if degenerate {
            notes.push("triggered with b = 0 and a > 0, so a <= psi(0) * 0 cannot hold".into());
        }
        Ok(A2Report {
            axiom: "A2".into(),
            verdict: if failed { Verdict::Fail } else { Verdict::Pass },
            k_hat,
            k_max,
            witness: if failed { s.best } else { None },
            samples_checked: s.count,
            seed: plan.seed,
            notes,
        })
    }

    fn a2_boundary(&self, plan: &SamplingPlan, bound: S, atol: S) -> Result<Vec<[S; 2]>> {
        let nodes = grid_nodes(S::zero(), bound, plan.grid_points_per_axis);
        let mut out = Vec::new();
        for &b in nodes.iter().filter(|&&b| b > atol) {
            let mut prev = (nodes[0], self.a2_trigger(nodes[0], b)?.is_some());
            for &a in &nodes[1..] {
                let hit = self.a2_trigger(a, b)?.is_some();
                if prev.1 && !hit {
                    let (mut lo, mut hi) = (prev.0, a);
                    for _ in 0..BISECTION_STEPS {
                        let mid = lo + (hi - lo) / S::lit(2.0);
                        if mid <= lo || mid >= hi {
                            break;
                        }
                        if self.a2_trigger(mid, b)?.is_some() {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    out.push([lo, b]);
                }
                prev = (a, hit);
            }
        }
        Ok(out)
    }

    pub fn check_a3(&self, plan: &SamplingPlan, bound: S) -> Result<AxiomReport<S>> {
        plan.validate()?;
        let atol: S = plan.atol();
        let samples: Vec<[S; 3]> =
            plan.triples(S::zero(), bound, Stream::ControlTriples).into_iter().filter(|p| p[0] > atol).collect();
        let s = scan(&["t", "s1", "s2"], &samples, |&[t, s1, s2]| {
            Ok(Measured::new(self.a3_slack(t, s1, s2, atol)?, vec![t, s1, s2]))
        })?;
        Ok(AxiomReport::from_scan("A3", s, atol, plan)
            .note("max_violation is alpha(t,s1,s2) - t + 2*atol; equality alpha = t counts as a violation"))
    }

    /// Declared `k` when present, otherwise `k_hat` from a passing A2 check.
    pub fn effective_k(&self, plan: &SamplingPlan, bound: S, k_max: S) -> Result<ContractionConstant<S>> {
        if let Some(k) = self.declared_k {
            return Ok(ContractionConstant { k, source: KSource::Declared });
        }
        let report = self.check_a2(plan, bound, k_max)?;
        if !report.passed() {
            return Err(Error::ContractionConstant(format!(
                "A2 check failed (k_hat = {}, k_max = {})",
                report.k_hat, report.k_max
            )));
        }
        Ok(ContractionConstant { k: report.k_hat, source: KSource::Estimated })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan() -> SamplingPlan {
        SamplingPlan { random_samples: 512, ..SamplingPlan::default() }
    }

    fn expr(src: &str) -> ControlFunction<f64> {
        ControlFunction::from_expr(src, None).unwrap()
    }

    #[test]
    fn scaled_first_values() {
        let a = ControlFunction::scaled_first(0.5).unwrap();
        assert_eq!(a.eval(2.0, 7.0, 9.0).unwrap(), 1.0);
        assert_eq!(ControlFunction::scaled_first(0.75).unwrap().eval(1.0, 0.0, 0.0).unwrap(), 0.75);
        assert_eq!(a.eval(0.0, 0.0, 0.0).unwrap(), 0.0);
        assert_eq!(a.declared_k(), Some(0.5));
        assert!(ControlFunction::scaled_first(1.0).is_err());
        assert!(a.eval(-1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn construction_errors() {
        assert!(ControlFunction::<f64>::from_expr("x + u", None).is_err());
        assert!(ControlFunction::<f64>::from_expr("0.5*u", Some(1.5)).is_err());
        assert!(ControlFunction::new(ControlBody::ScaledFirst(0.5), Some(0.25)).is_err());
        assert!(matches!(expr("u - 1").eval(0.0, 0.0, 0.0), Err(Error::NegativeValue { .. })));
    }

    #[test]
    fn a2_scaled_first() {
        for c in [0.5f64, 0.25] {
            let r = ControlFunction::scaled_first(c).unwrap().check_a2(&plan(), 4.0, 0.999).unwrap();
            assert!(r.passed());
            assert!((r.k_hat - c).abs() < 1e-12, "k_hat {} for c {c}", r.k_hat);
        }
    }

    #[test]
    fn a2_boundary_refinement_finds_off_grid_constant() {
        let r = ControlFunction::scaled_first(0.123456789f64).unwrap().check_a2(&plan(), 3.7, 0.999).unwrap();
        assert!((r.k_hat - 0.123456789).abs() < 1e-12, "{}", r.k_hat);
    }

    #[test]
    fn a2_identity_fails() {
        let r = expr("u").check_a2(&plan(), 4.0, 0.999).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(r.witness.is_some());
    }

    #[test]
    fn a2_monotone_in_k_max() {
        let a = ControlFunction::scaled_first(0.6).unwrap();
        assert!(!a.check_a2(&plan(), 2.0, 0.5).unwrap().passed());
        assert!(a.check_a2(&plan(), 2.0, 0.6).unwrap().passed());
        assert!(a.check_a2(&plan(), 2.0, 0.9).unwrap().passed());
    }

    #[test]
    fn a3_examples() {
        let atol = 1e-9;
        assert!(ControlFunction::scaled_first(0.5).unwrap().check_a3(&plan(), 4.0).unwrap().passed());
        let r = expr("u").check_a3(&plan(), 4.0).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        let w = r.witness.unwrap();
        assert!(w.point[0] > atol);
        let r = expr("w").check_a3(&plan(), 4.0).unwrap();
        let w = r.witness.unwrap();
        assert_eq!(w.get("s2"), Some(4.0));
        // The witness slack is reproduced by direct evaluation.
        let again = expr("w").a3_slack(w.point[0], w.point[1], w.point[2], atol).unwrap();
        assert_eq!(again, w.slack);
        let direct = expr("w").a3_slack(0.1, 0.0, 5.0, atol).unwrap();
        assert!(direct > atol);
    }

    #[test]
    fn a1_examples() {
        let p = plan();
        assert!(ControlFunction::scaled_first(0.5).unwrap().check_a1_continuity(&p, 4.0).unwrap().passed());
        assert!(expr("min(u, 1)").check_a1_continuity(&p, 4.0).unwrap().passed());
        let r = expr("max(0, min(1, (u-1)*1e12))").check_a1_continuity(&p, 4.0).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        let u = r.witness.unwrap().point[0];
        assert!((u - 1.0).abs() <= 4.0 / 32.0, "witness u = {u}");
    }

    #[test]
    fn effective_k_sources() {
        let p = plan();
        let declared = ControlFunction::scaled_first(0.5).unwrap().effective_k(&p, 2.0, 0.999).unwrap();
        assert_eq!(declared, ContractionConstant { k: 0.5, source: KSource::Declared });
        let est = expr("0.3*u").effective_k(&p, 2.0, 0.999).unwrap();
        assert_eq!(est.source, KSource::Estimated);
        assert!((est.k - 0.3).abs() < 1e-12);
        assert!(expr("u").effective_k(&p, 2.0, 0.999).is_err());
    }
}
