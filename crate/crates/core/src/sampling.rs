//! Deterministic sample generation and the falsifier reduction shared by
//! every checker.
//!
//! A check evaluates a slack function on every sample and keeps the sample
//! with the largest slack. Ties go to the lexicographically smallest point,
//! so the result does not depend on how rayon splits the work.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_GRID_POINTS: usize = 64;
pub const DEFAULT_RANDOM_SAMPLES: usize = 4096;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_VIOLATION_ATOL: f64 = 1e-9;
/// Subintervals per axis for triple grids.
pub const TRIPLE_GRID_INTERVALS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingPlan {
    pub grid_points_per_axis: usize,
    pub random_samples: usize,
    pub seed: u64,
    pub violation_atol: f64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan {
            grid_points_per_axis: DEFAULT_GRID_POINTS,
            random_samples: DEFAULT_RANDOM_SAMPLES,
            seed: DEFAULT_SEED,
            violation_atol: DEFAULT_VIOLATION_ATOL,
        }
    }
}

/// Independent random streams so that checks on the same plan do not reuse
/// each other's samples.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Stream {
    Pairs = 1,
    Triples = 2,
    Control = 3,
    ControlTriples = 4,
    Phi = 5,
}

impl SamplingPlan {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_points_per_axis < 2 {
            return Err(Error::param("grid_points_per_axis", "must be at least 2"));
        }
        if !(self.violation_atol > 0.0 && self.violation_atol.is_finite()) {
            return Err(Error::param("violation_atol", "must be positive and finite"));
        }
        Ok(())
    }

    pub fn atol<S: Scalar>(&self) -> S {
        S::lit(self.violation_atol)
    }

    /// Node count per axis used for triple grids: 32 subintervals, capped
    /// by `grid_points_per_axis`.
    pub fn triple_grid_points(&self) -> usize {
        self.grid_points_per_axis.min(TRIPLE_GRID_INTERVALS + 1)
    }

    fn rng(&self, stream: Stream) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream as u64);
        rng
    }

    /// Full `g x g` grid over `[lo, hi]^2` followed by the seeded random pairs.
    pub(crate) fn pairs<S: Scalar>(&self, lo: S, hi: S, stream: Stream) -> Vec<[S; 2]> {
        let nodes = grid_nodes(lo, hi, self.grid_points_per_axis);
        let mut out = Vec::with_capacity(nodes.len() * nodes.len() + self.random_samples);
        for &x in &nodes {
            for &y in &nodes {
                out.push([x, y]);
            }
        }
        let mut rng = self.rng(stream);
        for _ in 0..self.random_samples {
            out.push([uniform(&mut rng, lo, hi), uniform(&mut rng, lo, hi)]);
        }
        out
    }

    pub(crate) fn triples<S: Scalar>(&self, lo: S, hi: S, stream: Stream) -> Vec<[S; 3]> {
        let nodes = grid_nodes(lo, hi, self.triple_grid_points());
        let mut out = Vec::with_capacity(nodes.len().pow(3) + self.random_samples);
        for &x in &nodes {
            for &y in &nodes {
                for &z in &nodes {
                    out.push([x, y, z]);
                }
            }
        }
        let mut rng = self.rng(stream);
        for _ in 0..self.random_samples {
            out.push([uniform(&mut rng, lo, hi), uniform(&mut rng, lo, hi), uniform(&mut rng, lo, hi)]);
        }
        out
    }

    pub(crate) fn points<S: Scalar>(&self, lo: S, hi: S, stream: Stream) -> Vec<S> {
        let mut out = grid_nodes(lo, hi, self.grid_points_per_axis);
        let mut rng = self.rng(stream);
        out.extend((0..self.random_samples).map(|_| uniform(&mut rng, lo, hi)));
        out
    }
}

/// `n` evenly spaced nodes on `[lo, hi]`, both endpoints included exactly.
pub fn grid_nodes<S: Scalar>(lo: S, hi: S, n: usize) -> Vec<S> {
    if n <= 1 {
        return vec![lo];
    }
    let width = hi - lo;
    let last = S::lit((n - 1) as f64);
    (0..n).map(|i| if i + 1 == n { hi } else { lo + width * S::lit(i as f64) / last }).collect()
}

fn uniform<S: Scalar>(rng: &mut ChaCha8Rng, lo: S, hi: S) -> S {
    let u: f64 = rng.gen();
    let v = lo + (hi - lo) * S::lit(u);
    if v > hi {
        hi
    } else {
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

/// A sampled point together with the slack measured there.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness<S: Scalar> {
    pub names: Vec<&'static str>,
    pub point: Vec<S>,
    pub slack: S,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case: Option<&'static str>,
}

impl<S: Scalar> Witness<S> {
    /// Coordinate named `name`, if present.
    pub fn get(&self, name: &str) -> Option<S> {
        self.names.iter().position(|n| *n == name).map(|i| self.point[i])
    }
}

/// Verdict for one axiom or inequality.
///
/// `Fail` holds exactly when `max_violation > threshold`, and then the
/// witness is the sample that attains `max_violation`. A pass means no
/// counterexample was found among `samples_checked` samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport<S: Scalar> {
    pub axiom: String,
    pub verdict: Verdict,
    pub witness: Option<Witness<S>>,
    pub samples_checked: usize,
    pub max_violation: S,
    pub threshold: S,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_ratio: Option<S>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl<S: Scalar> AxiomReport<S> {
    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }

    pub(crate) fn from_scan(axiom: impl Into<String>, scan: Scan<S>, threshold: S, plan: &SamplingPlan) -> Self {
        let max_violation = scan.best.as_ref().map_or(S::zero(), |b| b.slack);
        let failed = max_violation > threshold;
        AxiomReport {
            axiom: axiom.into(),
            verdict: if failed { Verdict::Fail } else { Verdict::Pass },
            witness: if failed { scan.best } else { None },
            samples_checked: scan.count,
            max_violation,
            threshold,
            seed: plan.seed,
            max_ratio: scan.max_aux,
            notes: Vec::new(),
        }
    }

    pub(crate) fn note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

/// Outcome of evaluating one sample.
pub(crate) struct Measured<S: Scalar> {
    pub slack: S,
    pub point: Vec<S>,
    pub case: Option<&'static str>,
    /// Auxiliary quantity reduced by maximum (e.g. a contraction ratio).
    pub aux: Option<S>,
}

impl<S: Scalar> Measured<S> {
    pub fn new(slack: S, point: Vec<S>) -> Self {
        Measured { slack, point, case: None, aux: None }
    }

    pub fn case(mut self, case: &'static str) -> Self {
        self.case = Some(case);
        self
    }

    pub fn aux(mut self, aux: Option<S>) -> Self {
        self.aux = aux;
        self
    }
}

pub(crate) struct Scan<S: Scalar> {
    pub best: Option<Witness<S>>,
    pub count: usize,
    pub max_aux: Option<S>,
}

fn lex_cmp<S: Scalar>(a: &[S], b: &[S]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// True when `a` should replace `b` as the reported witness.
fn beats<S: Scalar>(a: &Witness<S>, b: &Witness<S>) -> bool {
    if a.slack != b.slack {
        return a.slack > b.slack;
    }
    match lex_cmp(&a.point, &b.point) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => a.case < b.case,
    }
}

fn max_opt<S: Scalar>(a: Option<S>, b: Option<S>) -> Option<S> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if y > x { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    }
}

struct Partial<S: Scalar> {
    best: Option<Witness<S>>,
    count: usize,
    max_aux: Option<S>,
    // Earliest error by sample index, for worker-count independence.
    error: Option<(usize, Error)>,
}

impl<S: Scalar> Partial<S> {
    fn empty() -> Self {
        Partial { best: None, count: 0, max_aux: None, error: None }
    }

    fn merge(mut self, other: Self) -> Self {
        self.count += other.count;
        self.max_aux = max_opt(self.max_aux, other.max_aux);
        self.best = match (self.best, other.best) {
            (Some(a), Some(b)) => Some(if beats(&b, &a) { b } else { a }),
            (a, None) => a,
            (None, b) => b,
        };
        self.error = match (self.error, other.error) {
            (Some(a), Some(b)) => Some(if b.0 < a.0 { b } else { a }),
            (a, None) => a,
            (None, b) => b,
        };
        self
    }
}

/// Evaluates `measure` on every sample in parallel and reduces
/// deterministically. The first error by sample order wins.
pub(crate) fn scan<S, P, F>(names: &[&'static str], samples: &[P], measure: F) -> Result<Scan<S>>
where
    S: Scalar,
    P: Sync,
    F: Fn(&P) -> Result<Measured<S>> + Sync,
{
    let partial = samples
        .par_iter()
        .enumerate()
        .fold(Partial::empty, |acc, (i, p)| {
            let single = match measure(p) {
                Ok(m) => Partial {
                    best: Some(Witness {
                        names: names.to_vec(),
                        point: m.point,
                        slack: if m.slack.is_nan() { S::infinity() } else { m.slack },
                        case: m.case,
                    }),
                    count: 1,
                    max_aux: m.aux,
                    error: None,
                },
                Err(e) => Partial { error: Some((i, e)), ..Partial::empty() },
            };
            acc.merge(single)
        })
        .reduce(Partial::empty, Partial::merge);
    if let Some((_, e)) = partial.error {
        return Err(e);
    }
    Ok(Scan { best: partial.best, count: partial.count, max_aux: partial.max_aux })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_contains_endpoints_and_midpoint() {
        let g = grid_nodes(0.0, 2.0, 33);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[16], 1.0);
        assert_eq!(g[32], 2.0);
        let g = grid_nodes(0.0f32, 1.0, 2);
        assert_eq!(g, vec![0.0, 1.0]);
    }

    #[test]
    fn samples_are_reproducible_and_in_range() {
        let plan = SamplingPlan { random_samples: 500, ..SamplingPlan::default() };
        let a = plan.pairs(0.0, 1.0, Stream::Pairs);
        let b = plan.pairs(0.0, 1.0, Stream::Pairs);
        assert_eq!(a, b);
        assert_eq!(a.len(), 64 * 64 + 500);
        assert!(a.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
        let other = plan.with_seed(7).pairs(0.0, 1.0, Stream::Pairs);
        assert_ne!(a[64 * 64..], other[64 * 64..]);
    }

    #[test]
    fn triple_grid_size() {
        let plan = SamplingPlan { random_samples: 0, ..SamplingPlan::default() };
        assert_eq!(plan.triples(0.0, 1.0, Stream::Triples).len(), 33 * 33 * 33);
        let small = SamplingPlan { grid_points_per_axis: 5, random_samples: 0, ..plan };
        assert_eq!(small.triples(0.0, 1.0, Stream::Triples).len(), 125);
    }

    #[test]
    fn plan_validation() {
        assert!(SamplingPlan::default().validate().is_ok());
        assert!(SamplingPlan { grid_points_per_axis: 1, ..Default::default() }.validate().is_err());
        assert!(SamplingPlan { violation_atol: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn reduction_prefers_slack_then_lexicographic_point() {
        let samples: Vec<[f64; 2]> = vec![[0.5, 0.0], [0.2, 0.9], [0.1, 0.3], [0.9, 0.9]];
        let scan =
            scan(&["x", "y"], &samples, |p| Ok(Measured::new(if p[0] < 0.6 { 1.0 } else { 0.5 }, p.to_vec()))).unwrap();
        let best = scan.best.unwrap();
        assert_eq!(best.point, vec![0.1, 0.3]);
        assert_eq!(scan.count, 4);
    }

    #[test]
    fn reduction_reports_first_error() {
        let samples: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let res = scan(&["x"], &samples, |&x| {
            if x >= 10.0 {
                Err(Error::param("x", format!("{x}")))
            } else {
                Ok(Measured::new(0.0, vec![x]))
            }
        });
        assert_eq!(res.err().unwrap(), Error::param("x", "10"));
    }
}
