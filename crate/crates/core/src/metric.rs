//! Dislocated metrics on a closed interval and sampled falsifiers for
//! their three axioms.
//!
//! Self-distance `d(x, x)` may be positive; only symmetry, "zero distance
//! implies equality" and the triangle inequality are required.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::sampling::{scan, AxiomReport, Measured, SamplingPlan, Stream};
use crate::scalar::Scalar;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Domain<S: Scalar> {
    lo: S,
    hi: S,
}

impl<S: Scalar> Domain<S> {
    pub fn new(lo: S, hi: S) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidDomain { lo: lo.as_f64(), hi: hi.as_f64() });
        }
        Ok(Domain { lo, hi })
    }

    pub fn unit() -> Self {
        Domain { lo: S::zero(), hi: S::one() }
    }

    pub fn lo(&self) -> S {
        self.lo
    }

    pub fn hi(&self) -> S {
        self.hi
    }

    pub fn contains(&self, x: S) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub(crate) fn require(&self, role: &'static str, x: S) -> Result<S> {
        if self.contains(x) {
            Ok(x)
        } else {
            Err(Error::OutsideDomain { role, value: x.as_f64(), lo: self.lo.as_f64(), hi: self.hi.as_f64() })
        }
    }
}

/// Formula of a metric: a DSL expression in `x`, `y` or one of the builtins.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricBody<S: Scalar> {
    Expr(Expression),
    /// `|x - y| + x + y`
    AbsPlus,
    /// `|x - y| + |x - c| + |y - c|`
    Centered(S),
    /// `s * inner(x, y)`
    Scale(Box<MetricBody<S>>, S),
}

impl<S: Scalar> MetricBody<S> {
    fn eval(&self, x: S, y: S) -> Result<S> {
        Ok(match self {
            MetricBody::Expr(e) => e.evaluate(&[("x", x), ("y", y)]).map_err(|source| Error::Eval {
                role: "metric",
                at: vec![x.as_f64(), y.as_f64()],
                source,
            })?,
            MetricBody::AbsPlus => (x - y).abs() + x + y,
            MetricBody::Centered(c) => (x - y).abs() + (x - *c).abs() + (y - *c).abs(),
            MetricBody::Scale(inner, s) => *s * inner.eval(x, y)?,
        })
    }

    fn validate(&self) -> Result<()> {
        match self {
            MetricBody::Expr(e) => e.check_variables(&["x", "y"]).map_err(|name| Error::UnexpectedVariable {
                role: "metric",
                name,
                allowed: "x, y",
            }),
            MetricBody::AbsPlus => Ok(()),
            MetricBody::Centered(c) if !c.is_finite() => Err(Error::param("centered.c", "must be finite")),
            MetricBody::Centered(_) => Ok(()),
            MetricBody::Scale(inner, s) => {
                if !(*s > S::zero() && s.is_finite()) {
                    return Err(Error::param("scale.s", "must be positive and finite"));
                }
                inner.validate()
            }
        }
    }
}

/// Nonnegative distance on a closed interval.
#[derive(Debug, Clone, PartialEq)]
pub struct DislocatedMetric<S: Scalar> {
    body: MetricBody<S>,
    domain: Domain<S>,
}

impl<S: Scalar> DislocatedMetric<S> {
    pub fn new(body: MetricBody<S>, domain: Domain<S>) -> Result<Self> {
        body.validate()?;
        Ok(DislocatedMetric { body, domain })
    }

    pub fn from_expr(source: &str, domain: Domain<S>) -> Result<Self> {
        Self::new(MetricBody::Expr(source.parse()?), domain)
    }

    pub fn absplus(domain: Domain<S>) -> Self {
        DislocatedMetric { body: MetricBody::AbsPlus, domain }
    }

    pub fn centered(c: S, domain: Domain<S>) -> Result<Self> {
        Self::new(MetricBody::Centered(c), domain)
    }

    /// `s * self`, for `s > 0`.
    pub fn scale(&self, s: S) -> Result<Self> {
        Self::new(MetricBody::Scale(Box::new(self.body.clone()), s), self.domain)
    }

    pub fn body(&self) -> &MetricBody<S> {
        &self.body
    }

    pub fn domain(&self) -> &Domain<S> {
        &self.domain
    }

    /// `d(x, y)`; fails for points outside the domain or a negative value.
    pub fn eval(&self, x: S, y: S) -> Result<S> {
        self.domain.require("metric argument", x)?;
        self.domain.require("metric argument", y)?;
        let v = self.body.eval(x, y)?;
        if v < S::zero() || v.is_nan() {
            return Err(Error::NegativeValue { role: "metric", at: vec![x.as_f64(), y.as_f64()], value: v.as_f64() });
        }
        Ok(v)
    }

    pub fn self_distance(&self, x: S) -> Result<S> {
        self.eval(x, x)
    }

    pub fn symmetry_slack(&self, x: S, y: S) -> Result<S> {
        Ok((self.eval(x, y)? - self.eval(y, x)?).abs())
    }

    /// `|x - y|` when the metric calls two points at distance at most
    /// `atol`, otherwise `atol - d(x, y)`.
    pub fn identity_slack(&self, x: S, y: S, atol: S) -> Result<S> {
        let d = self.eval(x, y)?;
        Ok(if d <= atol { (x - y).abs() } else { atol - d })
    }

    pub fn triangle_slack(&self, x: S, y: S, z: S) -> Result<S> {
        Ok(self.eval(x, y)? - self.eval(x, z)? - self.eval(z, y)?)
    }

    pub fn check_symmetry(&self, plan: &SamplingPlan) -> Result<AxiomReport<S>> {
        plan.validate()?;
        let samples = plan.pairs(self.domain.lo, self.domain.hi, Stream::Pairs);
        let s = scan(&["x", "y"], &samples, |&[x, y]| Ok(Measured::new(self.symmetry_slack(x, y)?, vec![x, y])))?;
        Ok(AxiomReport::from_scan("symmetry", s, plan.atol(), plan))
    }

    pub fn check_identity(&self, plan: &SamplingPlan) -> Result<AxiomReport<S>> {
        plan.validate()?;
        let atol = plan.atol();
        let samples = plan.pairs(self.domain.lo, self.domain.hi, Stream::Pairs);
        let s = scan(&["x", "y"], &samples, |&[x, y]| Ok(Measured::new(self.identity_slack(x, y, atol)?, vec![x, y])))?;
        Ok(AxiomReport::from_scan("identity", s, atol, plan))
    }

    pub fn check_triangle(&self, plan: &SamplingPlan) -> Result<AxiomReport<S>> {
        plan.validate()?;
        let samples = plan.triples(self.domain.lo, self.domain.hi, Stream::Triples);
        let s = scan(&["x", "y", "z"], &samples, |&[x, y, z]| {
            Ok(Measured::new(self.triangle_slack(x, y, z)?, vec![x, y, z]))
        })?;
        Ok(AxiomReport::from_scan("triangle", s, plan.atol(), plan))
    }

    /// All three axiom reports, in the order symmetry, identity, triangle.
    pub fn check_axioms(&self, plan: &SamplingPlan) -> Result<Vec<AxiomReport<S>>> {
        Ok(vec![self.check_symmetry(plan)?, self.check_identity(plan)?, self.check_triangle(plan)?])
    }

    /// Largest value of the metric on the `grid_points_per_axis` grid.
    pub fn grid_max(&self, plan: &SamplingPlan) -> Result<S> {
        let nodes = crate::sampling::grid_nodes(self.domain.lo, self.domain.hi, plan.grid_points_per_axis);
        let mut best = S::zero();
        for &x in &nodes {
            for &y in &nodes {
                best = best.max(self.eval(x, y)?);
            }
        }
        Ok(best)
    }

    /// Box bound for control-function sampling: twice the largest metric
    /// value on the grid, at least 1.
    pub fn sampling_bound(&self, plan: &SamplingPlan) -> Result<S> {
        Ok((S::lit(2.0) * self.grid_max(plan)?).max(S::one()))
    }
}
