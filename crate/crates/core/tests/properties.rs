use disloc_fix::{
    apriori_bound, psi, solve_picard, ControlFunction, DislocatedMetric, Domain, PhiFunction, QuadratureConfig,
    SamplingPlan, SelfMap, SolverConfig,
};
use proptest::prelude::*;

fn small_plan(seed: u64) -> SamplingPlan {
    SamplingPlan { grid_points_per_axis: 12, random_samples: 64, seed, ..SamplingPlan::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn axiom_verdicts_survive_scaling(s in 0.1f64..10.0, which in 0usize..3, seed in any::<u64>()) {
        let dom = Domain::new(0.0, 2.0).unwrap();
        let base = match which {
            0 => DislocatedMetric::absplus(dom),
            1 => DislocatedMetric::centered(0.7, dom).unwrap(),
            _ => DislocatedMetric::from_expr("(x - y)*(x - y)", dom).unwrap(),
        };
        let plan = small_plan(seed);
        let a = base.check_axioms(&plan).unwrap();
        let b = base.scale(s).unwrap().check_axioms(&plan).unwrap();
        for (ra, rb) in a.iter().zip(&b) {
            prop_assert_eq!(ra.verdict, rb.verdict, "{}", ra.axiom);
        }
    }

    #[test]
    fn reports_are_deterministic(seed in any::<u64>()) {
        let d = DislocatedMetric::from_expr("(x - y)*(x - y)", Domain::new(0.0, 2.0).unwrap()).unwrap();
        let plan = small_plan(seed);
        prop_assert_eq!(d.check_triangle(&plan).unwrap(), d.check_triangle(&plan).unwrap());
    }

    #[test]
    fn a2_constant_is_monotone_in_scale(c1 in 0.0f64..0.99, c2 in 0.0f64..0.99) {
        let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
        let plan = small_plan(7);
        let k_lo = ControlFunction::scaled_first(lo).unwrap().check_a2(&plan, 2.0, 0.999).unwrap().k_hat;
        let k_hi = ControlFunction::scaled_first(hi).unwrap().check_a2(&plan, 2.0, 0.999).unwrap().k_hat;
        prop_assert!(k_lo <= k_hi + 1e-15);
    }

    #[test]
    fn psi_is_monotone(a in 0.0f64..3.0, b in 0.0f64..3.0, p in 0u32..4) {
        let phi = PhiFunction::from_expr(&format!("1 + t*{p}")).unwrap();
        let q = QuadratureConfig::default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(psi(&phi, lo, &q).unwrap() <= psi(&phi, hi, &q).unwrap() + 1e-12);
    }

    #[test]
    fn psi_is_exact_on_cubics(c in prop::array::uniform4(0.0f64..2.0), s in 0.0f64..2.0) {
        let phi = PhiFunction::from_expr(&format!("{} + {}*t + {}*t*t + {}*t*t*t", c[0], c[1], c[2], c[3])).unwrap();
        let exact = c[0] * s + c[1] * s * s / 2.0 + c[2] * s.powi(3) / 3.0 + c[3] * s.powi(4) / 4.0;
        let got = psi(&phi, s, &QuadratureConfig::default()).unwrap();
        prop_assert!((got - exact).abs() <= 1e-12 * (1.0 + exact), "{got} vs {exact}");
    }

    #[test]
    fn affine_iterates_respect_both_bounds(z in 0.0f64..1.0, a in 0.0f64..0.95, x0 in 0.0f64..1.0, margin in 0.01f64..0.04) {
        let dom = Domain::unit();
        let plan = small_plan(1);
        let t = SelfMap::affine(a, z * (1.0 - a), dom, &plan).unwrap();
        let d = DislocatedMetric::centered(z, dom).unwrap();
        let k = (a + margin).min(0.99);
        let alpha = ControlFunction::scaled_first(k).unwrap();
        let cfg = SolverConfig::new(x0);
        let cert = solve_picard(&t, &d, Some(&alpha), &cfg).unwrap();
        for step in &cert.trace.as_ref().unwrap().steps {
            let bound = apriori_bound(k, cert.d01, step.n).unwrap();
            prop_assert!(d.eval(step.x, cert.z).unwrap() <= bound + cfg.tol);
            prop_assert!(step.step_distance <= k.powi(step.n as i32) * cert.d01 + 1e-12);
        }
    }
}
