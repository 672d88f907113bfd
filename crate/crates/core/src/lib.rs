//! Fixed-point solving and hypothesis falsification on dislocated metric
//! spaces over a real interval.
//!
//! Every component is generic over the scalar type ([`Scalar`], implemented
//! for `f32` and `f64`). The `*F64` / `*F32` aliases below fix the choice.
//!
//! ```
//! use disloc_fix::{ControlFunction, DislocatedMetric, Domain, SamplingPlan, SelfMap, SolverConfig};
//!
//! let dom: Domain<f64> = Domain::unit();
//! let plan = SamplingPlan::default();
//! let t = SelfMap::affine(0.25, 0.0, dom, &plan).unwrap();
//! let d = DislocatedMetric::absplus(dom);
//! let alpha = ControlFunction::scaled_first(0.5).unwrap();
//! let cert = disloc_fix::solve_picard(&t, &d, Some(&alpha), &SolverConfig::new(1.0)).unwrap();
//! assert!(cert.z.abs() <= 1e-9);
//! ```

pub mod control;
pub mod error;
pub mod expr;
pub mod integral;
pub mod maps;
pub mod metric;
pub mod sampling;
pub mod scalar;
pub mod solver;
pub mod two_metric;

pub use control::{A2Report, ContractionConstant, ControlBody, ControlFunction, KSource};
pub use error::{Error, Result};
pub use expr::{EvalError, Expression, ParseError};
pub use integral::{
    check_phi_class, psi, solve_integral, verify_integral_contraction, PhiBody, PhiFunction, QuadratureConfig,
};
pub use maps::{FamilyTemplate, MapBody, MapFamily, SelfMap};
pub use metric::{DislocatedMetric, Domain, MetricBody};
pub use sampling::{AxiomReport, SamplingPlan, Verdict, Witness};
pub use scalar::Scalar;
pub use solver::{
    apriori_bound, default_index_pairs, solve_picard, solve_sequence, verify_contraction, verify_family_contraction,
    ConditionReport, FixedPointCertificate, IterationTrace, SolveError, SolveStatus, SolverConfig, StoppingRule,
    TraceStep,
};
pub use two_metric::{check_dominance, solve_alternating, verify_pair_contraction, CommonFixedPointCertificate};

pub type DomainF64 = Domain<f64>;
pub type MetricF64 = DislocatedMetric<f64>;
pub type ControlF64 = ControlFunction<f64>;
pub type SelfMapF64 = SelfMap<f64>;
pub type MapFamilyF64 = MapFamily<f64>;
pub type SolverConfigF64 = SolverConfig<f64>;
pub type CertificateF64 = FixedPointCertificate<f64>;
pub type CommonCertificateF64 = CommonFixedPointCertificate<f64>;
pub type AxiomReportF64 = AxiomReport<f64>;

pub type DomainF32 = Domain<f32>;
pub type MetricF32 = DislocatedMetric<f32>;
pub type ControlF32 = ControlFunction<f32>;
pub type SelfMapF32 = SelfMap<f32>;
pub type MapFamilyF32 = MapFamily<f32>;
pub type SolverConfigF32 = SolverConfig<f32>;
pub type CertificateF32 = FixedPointCertificate<f32>;
pub type CommonCertificateF32 = CommonFixedPointCertificate<f32>;
pub type AxiomReportF32 = AxiomReport<f32>;
