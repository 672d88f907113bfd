//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

// Negated comparisons make NaN results fail.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use disloc_fix::{
    check_dominance, solve_alternating, solve_integral, solve_picard, solve_sequence, verify_contraction,
    verify_family_contraction, verify_integral_contraction, AxiomReport, CommonFixedPointCertificate, ControlFunction,
    DislocatedMetric, Domain, FixedPointCertificate, PhiFunction, QuadratureConfig, SamplingPlan, SelfMap,
    SolverConfig, Verdict,
};
use disloc_fix_cli::{emit_cobweb, Overrides, ProblemFile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;
const RATIO_TOL: f64 = 1e-12;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn problem_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("problems").join(name)
}

struct Loaded {
    file: ProblemFile,
    domain: Domain<f64>,
    plan: SamplingPlan,
    cfg: SolverConfig<f64>,
}

fn load(name: &str) -> Loaded {
    let file = ProblemFile::load(&problem_path(name)).unwrap();
    let domain = file.domain().unwrap();
    let overrides = Overrides { seed: Some(42), ..Overrides::default() };
    let (plan, _) = file.sampling(&overrides).unwrap();
    let cfg = file.solver(&domain, &plan, &overrides);
    Loaded { file, domain, plan, cfg }
}

struct Single {
    t: SelfMap<f64>,
    d: DislocatedMetric<f64>,
    alpha: ControlFunction<f64>,
    l: Loaded,
}

fn single(name: &str) -> Single {
    let l = load(name);
    Single {
        t: l.file.map(l.domain, &l.plan).unwrap(),
        d: l.file.metric(l.domain).unwrap(),
        alpha: l.file.require_alpha().unwrap(),
        l,
    }
}

struct Pair {
    t: SelfMap<f64>,
    s: SelfMap<f64>,
    d: DislocatedMetric<f64>,
    delta: DislocatedMetric<f64>,
    alpha: ControlFunction<f64>,
    l: Loaded,
}

fn pair(name: &str) -> Pair {
    let l = load(name);
    let (t, s) = l.file.map_pair(l.domain, &l.plan).unwrap();
    Pair {
        t,
        s,
        d: l.file.metric(l.domain).unwrap(),
        delta: l.file.metric_delta(l.domain).unwrap().unwrap(),
        alpha: l.file.require_alpha().unwrap(),
        l,
    }
}

fn picard(p: &Single, x0: f64) -> FixedPointCertificate<f64> {
    solve_picard(&p.t, &p.d, Some(&p.alpha), &SolverConfig { x0, ..p.l.cfg }).unwrap()
}

fn alternating(p: &Pair, x0: f64) -> CommonFixedPointCertificate<f64> {
    solve_alternating(&p.t, &p.s, &p.d, &p.delta, &p.alpha, &SolverConfig { x0, ..p.l.cfg }, &p.l.plan).unwrap()
}

fn timed<T>(limit: Duration, what: &str, f: impl FnOnce() -> T) -> Result<T, String> {
    let start = Instant::now();
    let v = f();
    let took = start.elapsed();
    ensure!(took < limit, "{what} took {took:?}, limit {limit:?}");
    Ok(v)
}

fn ratio(r: &AxiomReport<f64>) -> f64 {
    r.max_ratio.unwrap_or(f64::NAN)
}

fn example1() -> Outcome {
    let (cert, report) = timed(Duration::from_secs(1), "example 1", || {
        let p = single("example1.json");
        let cert = picard(&p, p.l.cfg.x0);
        (cert, verify_contraction(&p.t, &p.d, &p.alpha, &p.l.plan).unwrap())
    })?;
    ensure!(cert.z.abs() <= TOL, "z = {}", cert.z);
    ensure!(report.passed(), "contraction check failed");
    ensure!((ratio(&report) - 0.25).abs() <= RATIO_TOL, "ratio {}", ratio(&report));
    Ok(format!("z = {:.3e}, ratio = {}", cert.z, ratio(&report)))
}

fn example3() -> Outcome {
    let (cert, report, series) = timed(Duration::from_secs(1), "example 3", || {
        let p = single("example3.json");
        let cert = picard(&p, p.l.cfg.x0);
        let series = emit_cobweb(&p.t, &p.d, Some(&p.alpha), &p.l.cfg).unwrap();
        (cert, verify_contraction(&p.t, &p.d, &p.alpha, &p.l.plan).unwrap(), series)
    })?;
    ensure!((cert.z - 2.0 / 3.0).abs() <= TOL, "z = {}", cert.z);
    ensure!(series.rows.windows(2).all(|w| w[1].x > w[0].x), "staircase not strictly increasing");
    ensure!(series.rows.iter().all(|r| r.tx > r.x), "staircase not strictly increasing");
    ensure!(report.passed(), "contraction check failed");
    ensure!((ratio(&report) - 0.5).abs() <= RATIO_TOL, "ratio {}", ratio(&report));
    Ok(format!("z = {}, {} cobweb rows, ratio = {}", cert.z, series.rows.len(), ratio(&report)))
}

fn two_metric() -> Outcome {
    let mut parts = Vec::new();
    for (name, z_expected) in [("example2.json", 0.0), ("example4.json", 0.5)] {
        let (cert, dominance) = timed(Duration::from_secs(1), name, || {
            let p = pair(name);
            let cert = alternating(&p, p.l.cfg.x0);
            (cert, check_dominance(&p.d, &p.delta, &p.l.plan).unwrap())
        })?;
        ensure!((cert.z - z_expected).abs() <= TOL, "{name}: z = {}", cert.z);
        ensure!(cert.self_distance <= TOL, "{name}: delta(z,z) = {}", cert.self_distance);
        ensure!(dominance.passed(), "{name}: dominance failed");
        ensure!(cert.sound, "{name}: attached checks failed");
        parts.push(format!("{name}: z = {:.3e}, delta(z,z) = {:.3e}", cert.z, cert.self_distance));
    }
    Ok(parts.join("; "))
}

fn family() -> Outcome {
    let l = load("example1_family.json");
    let fam = l.file.family(l.domain, &l.plan).unwrap();
    let d = l.file.metric(l.domain).unwrap();
    let alpha = l.file.require_alpha().unwrap();
    let cert = solve_sequence(&fam, &d, Some(&alpha), &l.cfg).map_err(|e| e.to_string())?;
    ensure!(cert.z.abs() <= TOL, "z = {}", cert.z);
    let ok = verify_family_contraction(&fam, &d, &alpha, &l.plan, None).unwrap();
    ensure!(ok.passed(), "family contraction failed with alpha = 0.5 u");
    let weak = ControlFunction::scaled_first(0.1).unwrap();
    let bad = verify_family_contraction(&fam, &d, &weak, &l.plan, None).unwrap();
    ensure!(!bad.passed(), "weakened alpha was not falsified");
    let w = bad.witness.ok_or("no witness")?;
    ensure!(w.names == ["i", "j", "x", "y"] && w.point.len() == 4, "witness shape {:?}", w.names);
    Ok(format!("z = {:.3e}; weak witness (i,j,x,y) = {:?}", cert.z, w.point))
}

/// Random affine contraction `T x = a x + z (1 - a)` on `[0, 1]` with the
/// metric centered at its fixed point `z`, for which `d(Tx, Ty) = a d(x, y)`.
struct RandomAffine {
    t: SelfMap<f64>,
    d: DislocatedMetric<f64>,
    a: f64,
}

fn random_affine(rng: &mut ChaCha8Rng, plan: &SamplingPlan) -> RandomAffine {
    let dom = Domain::unit();
    let z: f64 = rng.gen_range(0.0..1.0);
    let a: f64 = rng.gen_range(0.0..0.95);
    RandomAffine {
        t: SelfMap::affine(a, z * (1.0 - a), dom, plan).unwrap(),
        d: DislocatedMetric::centered(z, dom).unwrap(),
        a,
    }
}

fn integral_reduction() -> Outcome {
    let p = single("example1.json");
    let one = PhiFunction::constant_one();
    let q = QuadratureConfig::default();
    let plan = SamplingPlan { random_samples: 256, ..p.l.plan };
    let same = |t: &SelfMap<f64>, d: &DislocatedMetric<f64>, alpha: &ControlFunction<f64>| -> (Verdict, Verdict) {
        (
            verify_integral_contraction(t, d, alpha, &one, &plan, &q).unwrap().verdict,
            verify_contraction(t, d, alpha, &plan).unwrap().verdict,
        )
    };
    let (vi, vc) = same(&p.t, &p.d, &p.alpha);
    ensure!(vi == vc && vi == Verdict::Pass, "example 1: integral {vi:?} vs plain {vc:?}");
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    let mut fails = 0;
    for i in 0..100 {
        let r = random_affine(&mut rng, &plan);
        // Keep the declared constant at least 0.01 away from the true ratio.
        let c = if rng.gen_bool(0.5) {
            rng.gen_range(r.a + 0.01..0.99)
        } else {
            rng.gen_range(0.0..1.0) * (r.a - 0.01).max(0.0)
        };
        let alpha = ControlFunction::scaled_first(c).unwrap();
        let (vi, vc) = same(&r.t, &r.d, &alpha);
        ensure!(vi == vc, "triple {i} (a = {}, c = {c}): integral {vi:?} vs plain {vc:?}", r.a);
        fails += usize::from(vc == Verdict::Fail);
    }
    let phi = PhiFunction::from_expr("2*t").unwrap();
    let cert = solve_integral(&p.t, &p.d, &p.alpha, &phi, &p.l.cfg, &p.l.plan, &q).map_err(|e| e.to_string())?;
    ensure!(cert.z.abs() <= 2e-9, "phi = 2t: z = {}", cert.z);
    Ok(format!("101 verdicts agree ({fails} random fails); phi = 2t gives z = {:.3e}", cert.z))
}

/// `(n, d(x_n, z), d(x_n, x_{n+1}))` for every recorded iterate.
fn check_bounds(
    label: &str,
    k: f64,
    d01: f64,
    z: f64,
    steps: impl Iterator<Item = (usize, f64, f64)>,
    dist: impl Fn(f64, f64) -> f64,
) -> Result<usize, String> {
    let mut count = 0;
    for (n, x, step) in steps {
        let kn = k.powi(n as i32);
        let to_z = dist(x, z);
        ensure!(to_z <= kn / (1.0 - k) * d01 + TOL, "{label}: a priori bound broken at n = {n}");
        ensure!(step <= kn * d01 + 1e-12, "{label}: step bound broken at n = {n}");
        count += 1;
    }
    Ok(count)
}

fn bound_soundness() -> Outcome {
    let mut checked = 0;
    for name in ["example1.json", "example3.json"] {
        let p = single(name);
        let cert = picard(&p, p.l.cfg.x0);
        let steps = cert.trace.as_ref().unwrap().steps.iter().map(|s| (s.n, s.x, s.step_distance));
        checked += check_bounds(name, cert.k_used.unwrap(), cert.d01, cert.z, steps, |a, b| p.d.eval(a, b).unwrap())?;
    }
    for name in ["example2.json", "example4.json"] {
        let p = pair(name);
        let cert = alternating(&p, p.l.cfg.x0);
        let steps = cert.trace.as_ref().unwrap().steps.iter().map(|s| (s.n, s.x, s.step_distance));
        let dist = |a, b| p.delta.eval(a, b).unwrap();
        checked += check_bounds(name, cert.k_used.unwrap(), cert.d01, cert.z, steps, dist)?;
    }
    let plan = SamplingPlan::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..50 {
        let r = random_affine(&mut rng, &plan);
        let k = rng.gen_range(r.a + 0.01..0.99);
        let alpha = ControlFunction::scaled_first(k).unwrap();
        let x0 = rng.gen_range(0.0..1.0);
        let cert = solve_picard(&r.t, &r.d, Some(&alpha), &SolverConfig::new(x0)).map_err(|e| format!("{i}: {e}"))?;
        let steps = cert.trace.as_ref().unwrap().steps.iter().map(|s| (s.n, s.x, s.step_distance));
        checked += check_bounds(&format!("random {i}"), k, cert.d01, cert.z, steps, |a, b| r.d.eval(a, b).unwrap())?;
    }
    Ok(format!("{checked} iterates within both bounds"))
}

fn falsifiers() -> Outcome {
    let plan = SamplingPlan::default();
    let limit = Duration::from_secs(2);
    let square = DislocatedMetric::from_expr("(x - y)*(x - y)", Domain::new(0.0, 2.0).unwrap()).unwrap();
    let tri = timed(limit, "triangle", || square.check_triangle(&plan).unwrap())?;
    ensure!(!tri.passed(), "triangle check passed on (x-y)^2");
    let w = tri.witness.ok_or("no triangle witness")?;
    ensure!(w.slack >= 2.0 - 1e-9, "triangle slack {}", w.slack);
    let id = ControlFunction::<f64>::from_expr("u", None).unwrap();
    let a3 = timed(limit, "A3", || id.check_a3(&plan, 2.0).unwrap())?;
    ensure!(!a3.passed(), "A3 passed for alpha = u");
    let zero = DislocatedMetric::<f64>::from_expr("0", Domain::unit()).unwrap();
    let ident = timed(limit, "identity", || zero.check_identity(&plan).unwrap())?;
    ensure!(!ident.passed(), "identity passed for the zero metric");
    Ok(format!("triangle witness {:?} slack {}", w.point, w.slack))
}

fn uniqueness() -> Outcome {
    let mut worst: f64 = 0.0;
    for name in ["example1.json", "example3.json"] {
        let p = single(name);
        let (a, b) = (picard(&p, p.l.domain.lo()), picard(&p, p.l.domain.hi()));
        let gap = p.d.eval(a.z, b.z).unwrap();
        ensure!(gap <= 2.0 * TOL, "{name}: d(z, z') = {gap}");
        worst = worst.max(gap);
    }
    for name in ["example2.json", "example4.json"] {
        let p = pair(name);
        let (a, b) = (alternating(&p, p.l.domain.lo()), alternating(&p, p.l.domain.hi()));
        let gap = p.d.eval(a.z, b.z).unwrap();
        ensure!(gap <= 2.0 * TOL, "{name}: d(z, z') = {gap}");
        worst = worst.max(gap);
    }
    let l = load("example1_family.json");
    let fam = l.file.family(l.domain, &l.plan).unwrap();
    let d = l.file.metric(l.domain).unwrap();
    let alpha = l.file.require_alpha().unwrap();
    let z = |x0| solve_sequence(&fam, &d, Some(&alpha), &SolverConfig { x0, ..l.cfg }).unwrap().z;
    let gap = d.eval(z(0.0), z(1.0)).unwrap();
    ensure!(gap <= 2.0 * TOL, "family: d(z, z') = {gap}");
    Ok(format!("max d(z, z') = {:.3e}", worst.max(gap)))
}

fn determinism() -> Outcome {
    let runs: &[(&str, &[&str])] = &[
        ("example1.json", &["check-metric", "check-alpha", "check-contraction", "solve", "cobweb"]),
        ("example1_family.json", &["check-contraction", "solve-seq"]),
        ("example1_integral.json", &["check-contraction", "solve-integral"]),
        ("example2.json", &["check-metric", "check-contraction", "solve-two-metric", "cobweb"]),
        ("example3.json", &["check-metric", "solve", "cobweb"]),
        ("example4.json", &["check-contraction", "solve-two-metric", "cobweb"]),
        ("bad_alpha_c1.json", &["check-alpha"]),
        ("triangle_square.json", &["check-metric"]),
    ];
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut compared = 0;
    for (file, commands) in runs {
        let problem = problem_path(file);
        for cmd in *commands {
            let mut texts = Vec::new();
            for run in 0..2 {
                let out = dir.path().join(format!("{file}.{cmd}.{run}"));
                let argv = [
                    "disloc-fix",
                    cmd,
                    "--problem",
                    problem.to_str().unwrap(),
                    "--seed",
                    "42",
                    "--out",
                    out.to_str().unwrap(),
                ];
                let code = disloc_fix_cli::run(argv);
                ensure!(code != 2, "{cmd} {file}: exit {code}");
                texts.push(std::fs::read(&out).map_err(|e| e.to_string())?);
            }
            ensure!(texts[0] == texts[1], "{cmd} {file}: outputs differ");
            compared += 1;
        }
    }
    Ok(format!("{compared} command/problem pairs byte-identical"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("x/4 under absplus converges to 0", example1),
        ("centered metric cobweb converges to 2/3", example3),
        ("two-metric alternating scheme", two_metric),
        ("map family convergence and falsification", family),
        ("integral-type reduction with phi = 1", integral_reduction),
        ("a priori and step bound soundness", bound_soundness),
        ("falsifier sensitivity", falsifiers),
        ("uniqueness from distinct starts", uniqueness),
        ("determinism of bundled problems", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        match result {
            Ok(detail) => println!("criterion {}: PASS  {name} ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} ({why})", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
