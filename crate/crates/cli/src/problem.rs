//! JSON problem files.

use std::path::Path;

use disloc_fix::sampling::{DEFAULT_GRID_POINTS, DEFAULT_RANDOM_SAMPLES, DEFAULT_SEED, DEFAULT_VIOLATION_ATOL};
use disloc_fix::solver::{DEFAULT_MAX_ITERS, DEFAULT_TOL};
use disloc_fix::{
    ControlFunction, DislocatedMetric, Domain, MapFamily, PhiFunction, QuadratureConfig, SamplingPlan, SelfMap,
    SolverConfig,
};
use serde::Deserialize;

use crate::CliError;

pub const SEED_ENV: &str = "DISLOC_FIX_SEED";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default)]
    pub description: Option<String>,
    pub domain: DomainSpec,
    #[serde(default)]
    pub metric: Option<MetricSpec>,
    #[serde(default)]
    pub metric_d: Option<MetricSpec>,
    #[serde(default)]
    pub metric_delta: Option<MetricSpec>,
    #[serde(default)]
    pub map: Option<MapSpec>,
    #[serde(default)]
    pub map_family: Option<FamilySpec>,
    #[serde(default)]
    pub map_t: Option<MapSpec>,
    #[serde(default)]
    pub map_s: Option<MapSpec>,
    #[serde(default)]
    pub alpha: Option<AlphaSpec>,
    #[serde(default)]
    pub phi: Option<PhiSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub sampling: SamplingSpec,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MetricSpec {
    Expr {
        expr: String,
    },
    Builtin {
        name: String,
        #[serde(default)]
        c: Option<f64>,
        #[serde(default)]
        s: Option<f64>,
        #[serde(default)]
        inner: Option<Box<MetricSpec>>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MapSpec {
    Affine { a: f64, b: f64 },
    Expr { expr: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FamilySpec {
    Expr {
        expr: String,
        #[serde(default = "default_budget")]
        index_budget: usize,
    },
    Builtin {
        name: String,
        #[serde(default = "default_budget")]
        index_budget: usize,
    },
}

fn default_budget() -> usize {
    disloc_fix::maps::DEFAULT_INDEX_BUDGET
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AlphaSpec {
    ScaledFirst {
        c: f64,
    },
    Expr {
        expr: String,
        #[serde(default)]
        declared_k: Option<f64>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PhiSpec {
    Expr { expr: String },
    Builtin { name: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub x0: Option<f64>,
    pub tol: f64,
    pub max_iters: usize,
    pub record_trace: bool,
    pub k_max: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            x0: None,
            tol: DEFAULT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
            record_trace: true,
            k_max: disloc_fix::control::DEFAULT_K_MAX,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSpec {
    pub grid_points_per_axis: Option<usize>,
    pub random_samples: Option<usize>,
    pub seed: Option<u64>,
    pub violation_atol: Option<f64>,
}

/// Which map form a subcommand needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapForm {
    Single,
    Family,
    Pair,
}

impl MapForm {
    fn describe(self) -> &'static str {
        match self {
            MapForm::Single => "map",
            MapForm::Family => "map_family",
            MapForm::Pair => "map_t/map_s",
        }
    }
}

/// Command-line overrides.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
}

fn input(key: &str, source: disloc_fix::Error) -> CliError {
    CliError::Input { key: key.to_string(), message: source.to_string() }
}

fn invalid(key: &str, message: impl Into<String>) -> CliError {
    CliError::Input { key: key.to_string(), message: message.into() }
}

impl ProblemFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid("--problem", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Schema(e.to_string()))
    }

    pub fn domain(&self) -> Result<Domain<f64>, CliError> {
        Domain::new(self.domain.lo, self.domain.hi).map_err(|e| input("domain", e))
    }

    /// The map form present in the file; more than one is an error.
    pub fn map_form(&self) -> Result<Option<MapForm>, CliError> {
        let pair = self.map_t.is_some() || self.map_s.is_some();
        let present: Vec<MapForm> = [
            (self.map.is_some(), MapForm::Single),
            (self.map_family.is_some(), MapForm::Family),
            (pair, MapForm::Pair),
        ]
        .into_iter()
        .filter_map(|(p, f)| p.then_some(f))
        .collect();
        match present.as_slice() {
            [] => Ok(None),
            [one] => Ok(Some(*one)),
            _ => Err(invalid("map", "exactly one of map, map_family, map_t/map_s may be given")),
        }
    }

    pub fn require_form(&self, form: MapForm) -> Result<(), CliError> {
        match self.map_form()? {
            Some(f) if f == form => Ok(()),
            _ => Err(invalid(form.describe(), "required by this subcommand")),
        }
    }

    pub fn sampling(&self, overrides: &Overrides) -> Result<(SamplingPlan, u64), CliError> {
        let env_seed = match std::env::var(SEED_ENV) {
            Ok(v) => Some(v.trim().parse::<u64>().map_err(|_| invalid(SEED_ENV, format!("not an integer: {v:?}")))?),
            Err(_) => None,
        };
        let seed = overrides.seed.or(self.sampling.seed).or(env_seed).unwrap_or(DEFAULT_SEED);
        let plan = SamplingPlan {
            grid_points_per_axis: self.sampling.grid_points_per_axis.unwrap_or(DEFAULT_GRID_POINTS),
            random_samples: self.sampling.random_samples.unwrap_or(DEFAULT_RANDOM_SAMPLES),
            seed,
            violation_atol: self.sampling.violation_atol.unwrap_or(DEFAULT_VIOLATION_ATOL),
        };
        plan.validate().map_err(|e| input("sampling", e))?;
        Ok((plan, seed))
    }

    pub fn solver(&self, domain: &Domain<f64>, plan: &SamplingPlan, o: &Overrides) -> SolverConfig<f64> {
        SolverConfig {
            x0: self.solver.x0.unwrap_or(domain.hi()),
            tol: o.tol.unwrap_or(self.solver.tol),
            max_iters: o.max_iters.unwrap_or(self.solver.max_iters),
            record_trace: self.solver.record_trace,
            sampling: *plan,
            k_max: self.solver.k_max,
        }
    }

    /// `metric`, or `metric_d` for two-metric files.
    pub fn metric(&self, domain: Domain<f64>) -> Result<DislocatedMetric<f64>, CliError> {
        match (&self.metric, &self.metric_d) {
            (Some(m), None) => build_metric(m, domain, "metric"),
            (None, Some(m)) => build_metric(m, domain, "metric_d"),
            (Some(_), Some(_)) => Err(invalid("metric_d", "give either metric or metric_d, not both")),
            (None, None) => Err(invalid("metric", "missing")),
        }
    }

    pub fn metric_delta(&self, domain: Domain<f64>) -> Result<Option<DislocatedMetric<f64>>, CliError> {
        self.metric_delta.as_ref().map(|m| build_metric(m, domain, "metric_delta")).transpose()
    }

    /// The metric the contraction condition is stated in: `metric_delta`
    /// when present.
    pub fn contraction_metric(&self, domain: Domain<f64>) -> Result<DislocatedMetric<f64>, CliError> {
        match self.metric_delta(domain)? {
            Some(m) => Ok(m),
            None => self.metric(domain),
        }
    }

    pub fn map(&self, domain: Domain<f64>, plan: &SamplingPlan) -> Result<SelfMap<f64>, CliError> {
        let spec = self.map.as_ref().ok_or_else(|| invalid("map", "missing"))?;
        build_map(spec, domain, plan, "map")
    }

    pub fn map_pair(&self, domain: Domain<f64>, plan: &SamplingPlan) -> Result<(SelfMap<f64>, SelfMap<f64>), CliError> {
        let t = self.map_t.as_ref().ok_or_else(|| invalid("map_t", "missing"))?;
        let s = self.map_s.as_ref().ok_or_else(|| invalid("map_s", "missing"))?;
        Ok((build_map(t, domain, plan, "map_t")?, build_map(s, domain, plan, "map_s")?))
    }

    pub fn family(&self, domain: Domain<f64>, plan: &SamplingPlan) -> Result<MapFamily<f64>, CliError> {
        let key = "map_family";
        match self.map_family.as_ref().ok_or_else(|| invalid(key, "missing"))? {
            FamilySpec::Expr { expr, index_budget } => {
                MapFamily::from_expr(expr, *index_budget, domain, plan).map_err(|e| input(key, e))
            }
            FamilySpec::Builtin { name, index_budget } => match name.as_str() {
                "harmonic_shift" => MapFamily::harmonic_shift(*index_budget, domain, plan).map_err(|e| input(key, e)),
                other => Err(invalid("map_family.name", format!("unknown builtin family `{other}`"))),
            },
        }
    }

    pub fn alpha(&self) -> Result<Option<ControlFunction<f64>>, CliError> {
        let key = "alpha";
        self.alpha
            .as_ref()
            .map(|a| match a {
                AlphaSpec::ScaledFirst { c } => ControlFunction::scaled_first(*c),
                AlphaSpec::Expr { expr, declared_k } => ControlFunction::from_expr(expr, *declared_k),
            })
            .transpose()
            .map_err(|e| input(key, e))
    }

    pub fn require_alpha(&self) -> Result<ControlFunction<f64>, CliError> {
        self.alpha()?.ok_or_else(|| invalid("alpha", "missing"))
    }

    pub fn phi(&self) -> Result<Option<PhiFunction>, CliError> {
        self.phi
            .as_ref()
            .map(|p| match p {
                PhiSpec::Expr { expr } => PhiFunction::from_expr(expr).map_err(|e| input("phi", e)),
                PhiSpec::Builtin { name } => match name.as_str() {
                    "constant_one" => Ok(PhiFunction::constant_one()),
                    other => Err(invalid("phi.name", format!("unknown builtin `{other}`"))),
                },
            })
            .transpose()
    }

    pub fn quadrature(&self) -> Result<QuadratureConfig, CliError> {
        self.quadrature.validate().map_err(|e| input("quadrature", e))?;
        Ok(self.quadrature)
    }
}

fn build_metric(spec: &MetricSpec, domain: Domain<f64>, key: &str) -> Result<DislocatedMetric<f64>, CliError> {
    match spec {
        MetricSpec::Expr { expr } => DislocatedMetric::from_expr(expr, domain).map_err(|e| input(key, e)),
        MetricSpec::Builtin { name, c, s, inner } => {
            let unused = |field: &str, present: bool| {
                if present {
                    Err(invalid(&format!("{key}.{field}"), format!("not a parameter of builtin `{name}`")))
                } else {
                    Ok(())
                }
            };
            match name.as_str() {
                "absplus" => {
                    unused("c", c.is_some())?;
                    unused("s", s.is_some())?;
                    unused("inner", inner.is_some())?;
                    Ok(DislocatedMetric::absplus(domain))
                }
                "centered" => {
                    unused("s", s.is_some())?;
                    unused("inner", inner.is_some())?;
                    let c = c.ok_or_else(|| invalid(&format!("{key}.c"), "missing"))?;
                    DislocatedMetric::centered(c, domain).map_err(|e| input(&format!("{key}.c"), e))
                }
                "scale" => {
                    unused("c", c.is_some())?;
                    let s = s.ok_or_else(|| invalid(&format!("{key}.s"), "missing"))?;
                    let inner = inner.as_ref().ok_or_else(|| invalid(&format!("{key}.inner"), "missing"))?;
                    build_metric(inner, domain, &format!("{key}.inner"))?
                        .scale(s)
                        .map_err(|e| input(&format!("{key}.s"), e))
                }
                other => Err(invalid(&format!("{key}.name"), format!("unknown builtin metric `{other}`"))),
            }
        }
    }
}

fn build_map(spec: &MapSpec, domain: Domain<f64>, plan: &SamplingPlan, key: &str) -> Result<SelfMap<f64>, CliError> {
    match spec {
        MapSpec::Affine { a, b } => SelfMap::affine(*a, *b, domain, plan),
        MapSpec::Expr { expr } => SelfMap::from_expr(expr, domain, plan),
    }
    .map_err(|e| input(key, e))
}
