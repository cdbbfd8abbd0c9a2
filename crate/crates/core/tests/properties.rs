use proptest::prelude::*;
use surveykit::estimators::{est_t1, est_tp, est_tpd, FamilyConfig, Sample, SampleMeans, Sign, TwoPhaseMeans};
use surveykit::population::{
    compute_moments, finite_factors, load_population, save_population, FinitePopulation, PopulationMoments,
};
use surveykit::theory::{
    min_mse_tp, min_mse_tpd, mse_mean, theory_t1, theory_t2, theory_tp, theory_tpd, TheoryInput,
};
use surveykit::weights::{solve_weights, solve_weights_two_phase, MAX_RESIDUAL_OPT, MAX_RESIDUAL_SUM};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn population() -> impl Strategy<Value = FinitePopulation> {
    prop::collection::vec((1.0..100.0f64, 1.0..100.0f64), 4..30)
        .prop_filter_map("degenerate", |pairs| {
            let (y, x): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let pop = FinitePopulation::from_columns(&y, &x).ok()?;
            compute_moments(&pop).ok()?;
            Some(pop)
        })
}

prop_compose! {
    fn moments()(
        ybar in 0.5..500.0f64,
        xbar in 0.5..500.0f64,
        cy in 0.05..1.2f64,
        cx in 0.05..1.2f64,
        rho in -0.95..0.95f64,
        beta2x in 1.2..8.0f64,
        pop_size in 20usize..2000,
    ) -> PopulationMoments {
        PopulationMoments::from_parameters(ybar, xbar, cy, cx, rho, beta2x, pop_size)
    }
}

prop_compose! {
    fn family()(
        k1 in 0.2..5.0f64,
        plus in any::<bool>(),
        k3 in 0.0..3.0f64,
        k4 in 0.2..5.0f64,
        k5 in 0.0..3.0f64,
        alpha in -2.0..2.0f64,
        beta in -2.0..2.0f64,
        lambda in -2.0..2.0f64,
        m in -2.0..2.0f64,
        q in -2.0..2.0f64,
        gamma in -2.0..2.0f64,
    ) -> FamilyConfig {
        FamilyConfig {
            k1, k2: if plus { Sign::Plus } else { Sign::Minus }, k3, k4, k5,
            alpha, beta, lambda, m, q, gamma,
        }
    }
}

proptest! {
    #[test]
    fn shape_parameters_ignore_y_scale(pop in population(), c in 0.01..100.0f64) {
        let a = compute_moments(&pop).unwrap();
        let b = compute_moments(&pop.scale_y(c).unwrap()).unwrap();
        prop_assert!(rel(b.ybar, c * a.ybar) < 1e-12);
        prop_assert!(rel(b.cy, a.cy) < 1e-10);
        prop_assert_eq!(a.cx, b.cx);
        prop_assert!((b.rho - a.rho).abs() < 1e-10);
        prop_assert!((b.kx - a.kx).abs() < 1e-9 * a.kx.abs().max(1.0));
        prop_assert_eq!(a.beta2x, b.beta2x);
    }

    #[test]
    fn f1_decreases_with_n(big_n in 3usize..500, n in 2usize..499) {
        prop_assume!(n < big_n);
        let a = finite_factors(big_n, n, None).unwrap();
        let b = finite_factors(big_n, n + 1, None).unwrap();
        prop_assert!(b.f1 < a.f1);
        prop_assert!(b.f1 >= 0.0);
    }

    #[test]
    fn csv_round_trip(pop in population()) {
        let mut buf = Vec::new();
        save_population(&pop, &mut buf).unwrap();
        let back = load_population(buf.as_slice()).unwrap();
        prop_assert_eq!(back.units(), pop.units());
    }

    #[test]
    fn t1_is_linear_in_y(pop in population(), c in 0.01..100.0f64, cfg in family(), take in 2usize..4) {
        let m = compute_moments(&pop).unwrap();
        prop_assume!(cfg.validate_for(m.xbar).is_ok());
        let cfg = FamilyConfig { alpha: cfg.alpha.round(), ..cfg };
        let s = Sample::new(pop.units()[..take].to_vec()).unwrap();
        let scaled = s.scale_y(c).unwrap();
        if let (Ok(a), Ok(b)) = (est_t1(&s, m.xbar, &cfg), est_t1(&scaled, m.xbar, &cfg)) {
            prop_assert!(rel(b, c * a) < 1e-12);
        }
    }

    #[test]
    fn theory_is_homogeneous_in_ybar(m in moments(), cfg in family(), n in 2usize..20, c in 0.1..10.0f64) {
        let f = finite_factors(m.pop_size, n, None).unwrap();
        let scaled = PopulationMoments::from_parameters(c * m.ybar, m.xbar, m.cy, m.cx, m.rho, m.beta2x, m.pop_size);
        let Ok(a) = TheoryInput::new(m, f, cfg) else { return Ok(()) };
        let b = TheoryInput::new(scaled, f, cfg).unwrap();
        for (x, y) in [(theory_t1(&a), theory_t1(&b)), (theory_t2(&a), theory_t2(&b))] {
            prop_assert!((y.bias - c * x.bias).abs() <= 1e-12 * (c * x.bias).abs().max(m.ybar * 1e-12));
            prop_assert!(rel(y.mse, c * c * x.mse) < 1e-10);
        }
    }

    #[test]
    fn combination_never_beats_the_bound(m in moments(), cfg in family(), n in 2usize..20, w1 in -3.0..3.0f64, w2 in -3.0..3.0f64) {
        let f = finite_factors(m.pop_size, n, None).unwrap();
        let Ok(input) = TheoryInput::new(m, f, cfg) else { return Ok(()) };
        let w = [1.0 - w1 - w2, w1, w2];
        let bound = min_mse_tp(&m, &f);
        prop_assert!(theory_tp(&input, &w).mse >= bound * (1.0 - 1e-12));
        prop_assert!(theory_t1(&input).mse >= bound * (1.0 - 1e-12));
        prop_assert!(bound <= mse_mean(&m, &f));
    }

    #[test]
    fn solved_weights_reach_the_bound(m in moments(), cfg in family(), n in 2usize..20) {
        let f = finite_factors(m.pop_size, n, None).unwrap();
        let Ok(input) = TheoryInput::new(m, f, cfg) else { return Ok(()) };
        if let Ok(sol) = solve_weights(&input) {
            prop_assert!(sol.residual_sum <= MAX_RESIDUAL_SUM);
            prop_assert!(sol.residual_opt <= MAX_RESIDUAL_OPT);
            let t = theory_tp(&input, &sol.weights);
            prop_assert!(rel(t.mse, min_mse_tp(&m, &f)) < 1e-9);
        }
    }

    #[test]
    fn two_phase_bound_sits_between(m in moments(), cfg in family(), n in 2usize..10, extra in 1usize..10) {
        let np = (n + extra).min(m.pop_size);
        prop_assume!(np > n);
        let f = finite_factors(m.pop_size, n, Some(np)).unwrap();
        let single = finite_factors(m.pop_size, n, None).unwrap();
        let bound = min_mse_tpd(&m, &f).unwrap();
        prop_assert!(bound >= min_mse_tp(&m, &single) * (1.0 - 1e-12));
        prop_assert!(bound <= mse_mean(&m, &single) * (1.0 + 1e-12));
        let Ok(input) = TheoryInput::new(m, f, cfg) else { return Ok(()) };
        if let Ok(sol) = solve_weights_two_phase(&input) {
            let t = theory_tpd(&input, &sol.weights).unwrap();
            prop_assert!(rel(t.mse, bound) < 1e-9);
        }
    }

    #[test]
    fn unit_first_weight_gives_sample_mean(ybar in 1.0..100.0f64, xbar in 1.0..100.0f64, xf in 1.0..100.0f64, cfg in family()) {
        let s = SampleMeans { ybar, xbar };
        prop_assert_eq!(est_tp(&s, 50.0, &cfg, &[1.0, 0.0, 0.0]).unwrap(), ybar);
        let d = TwoPhaseMeans { ybar, xbar, xbar_first: xf };
        prop_assert_eq!(est_tpd(&d, &cfg, &[1.0, 0.0, 0.0]).unwrap(), ybar);
    }
}
