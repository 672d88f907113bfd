//! Self-maps of the domain and indexed families of them.

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::metric::Domain;
use crate::sampling::{grid_nodes, SamplingPlan};
use crate::scalar::Scalar;

pub const DEFAULT_INDEX_BUDGET: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum MapBody<S: Scalar> {
    /// Expression in `x`.
    Expr(Expression),
    /// `a x + b`
    Affine { a: S, b: S },
    /// Family template in `x` and `n`, instantiated at `n`.
    Member { template: Expression, n: usize },
    /// `x / (n + 3)`
    HarmonicShift { n: usize },
}

impl<S: Scalar> MapBody<S> {
    fn eval(&self, x: S) -> Result<S> {
        let at = |source| Error::Eval { role: "map", at: vec![x.as_f64()], source };
        match self {
            MapBody::Expr(e) => e.evaluate(&[("x", x)]).map_err(at),
            MapBody::Affine { a, b } => Ok(*a * x + *b),
            MapBody::Member { template, n } => template.evaluate(&[("x", x), ("n", S::lit(*n as f64))]).map_err(at),
            MapBody::HarmonicShift { n } => Ok(x / S::lit((*n + 3) as f64)),
        }
    }
}

/// A map `T: [lo, hi] -> [lo, hi]`.
///
/// The self-map property is checked on a grid at construction. Images that
/// leave the domain by at most `violation_atol` are clamped to the nearest
/// endpoint; anything further is an error.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfMap<S: Scalar> {
    body: MapBody<S>,
    domain: Domain<S>,
    atol: S,
}

impl<S: Scalar> SelfMap<S> {
    pub fn new(body: MapBody<S>, domain: Domain<S>, plan: &SamplingPlan) -> Result<Self> {
        plan.validate()?;
        match &body {
            MapBody::Expr(e) => e.check_variables(&["x"]).map_err(|name| Error::UnexpectedVariable {
                role: "map",
                name,
                allowed: "x",
            })?,
            MapBody::Affine { a, b } if !(a.is_finite() && b.is_finite()) => {
                return Err(Error::param("affine", "coefficients must be finite"))
            }
            _ => {}
        }
        let map = SelfMap { body, domain, atol: plan.atol() };
        for x in grid_nodes(domain.lo(), domain.hi(), plan.grid_points_per_axis) {
            map.apply(x)?;
        }
        Ok(map)
    }

    pub fn from_expr(source: &str, domain: Domain<S>, plan: &SamplingPlan) -> Result<Self> {
        Self::new(MapBody::Expr(source.parse()?), domain, plan)
    }

    pub fn affine(a: S, b: S, domain: Domain<S>, plan: &SamplingPlan) -> Result<Self> {
        Self::new(MapBody::Affine { a, b }, domain, plan)
    }

    pub fn body(&self) -> &MapBody<S> {
        &self.body
    }

    pub fn domain(&self) -> &Domain<S> {
        &self.domain
    }

    pub fn apply(&self, x: S) -> Result<S> {
        self.domain.require("map argument", x)?;
        let y = self.body.eval(x)?;
        let (lo, hi) = (self.domain.lo(), self.domain.hi());
        if y >= lo && y <= hi {
            Ok(y)
        } else if y < lo && lo - y <= self.atol {
            Ok(lo)
        } else if y > hi && y - hi <= self.atol {
            Ok(hi)
        } else {
            Err(Error::Escape { role: "map", x: x.as_f64(), image: y.as_f64(), lo: lo.as_f64(), hi: hi.as_f64() })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FamilyTemplate {
    /// Expression in `x` and `n`.
    Expr(Expression),
    /// `f_n(x) = x / (n + 3)`
    HarmonicShift,
}

/// Sequence `f_1, f_2, ...` of self-maps, truncated at `index_budget`.
#[derive(Debug, Clone, PartialEq)]
pub struct MapFamily<S: Scalar> {
    template: FamilyTemplate,
    index_budget: usize,
    domain: Domain<S>,
    plan: SamplingPlan,
}

impl<S: Scalar> MapFamily<S> {
    pub fn new(template: FamilyTemplate, index_budget: usize, domain: Domain<S>, plan: &SamplingPlan) -> Result<Self> {
        plan.validate()?;
        if index_budget == 0 {
            return Err(Error::param("index_budget", "must be positive"));
        }
        if let FamilyTemplate::Expr(e) = &template {
            e.check_variables(&["x", "n"]).map_err(|name| Error::UnexpectedVariable {
                role: "map family",
                name,
                allowed: "x, n",
            })?;
        }
        Ok(MapFamily { template, index_budget, domain, plan: *plan })
    }

    pub fn harmonic_shift(index_budget: usize, domain: Domain<S>, plan: &SamplingPlan) -> Result<Self> {
        Self::new(FamilyTemplate::HarmonicShift, index_budget, domain, plan)
    }

    pub fn from_expr(source: &str, index_budget: usize, domain: Domain<S>, plan: &SamplingPlan) -> Result<Self> {
        Self::new(FamilyTemplate::Expr(source.parse()?), index_budget, domain, plan)
    }

    pub fn index_budget(&self) -> usize {
        self.index_budget
    }

    pub fn domain(&self) -> &Domain<S> {
        &self.domain
    }

    /// The map `x -> template(x, n)`, for `1 <= n <= index_budget`.
    pub fn member(&self, n: usize) -> Result<SelfMap<S>> {
        if n == 0 || n > self.index_budget {
            return Err(Error::IndexOutOfBudget { index: n, budget: self.index_budget });
        }
        let body = match &self.template {
            FamilyTemplate::Expr(e) => MapBody::Member { template: e.clone(), n },
            FamilyTemplate::HarmonicShift => MapBody::HarmonicShift { n },
        };
        SelfMap::new(body, self.domain, &self.plan)
    }

    /// Every member `f_1 ..= f_budget`, validated.
    pub fn members(&self) -> Result<Vec<SelfMap<S>>> {
        (1..=self.index_budget).map(|n| self.member(n)).collect()
    }
}
