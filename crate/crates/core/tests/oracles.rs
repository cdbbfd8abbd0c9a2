use std::path::PathBuf;

use surveykit::catalog::{EstimatorId, Prepared};
use surveykit::estimators::{est_mean, est_t1, est_t1d, FamilyConfig};
use surveykit::population::{compute_moments, finite_factors, load_population, FinitePopulation};
use surveykit::theory::{theory_t1, theory_t1d, TheoryInput};
use surveykit::verify::{binomial, enumerate_srswor, enumerate_two_phase, monte_carlo, monte_carlo_two_phase};

fn fixture(name: &str) -> FinitePopulation {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "fixtures", name].iter().collect();
    load_population(std::fs::File::open(path).unwrap()).unwrap()
}

fn in_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn enumeration_visits_every_subset_once() {
    let pop = fixture("pop10.csv");
    for n in 2..=10 {
        let d = enumerate_srswor(&pop, n, "mean", |s| Ok(est_mean(s))).unwrap();
        assert_eq!(d.count as u128, binomial(10, n));
        assert_eq!(d.estimates.len() as u64, d.count);
    }
    let d = enumerate_two_phase(&pop, 6, 3, "mean", |s| Ok(s.ybar)).unwrap();
    assert_eq!(d.count as u128, binomial(10, 6) * binomial(6, 3));
}

#[test]
fn enumeration_is_partition_independent() {
    let pop = fixture("pop12.csv");
    let xbar = compute_moments(&pop).unwrap().xbar;
    let cfg = FamilyConfig::default();
    let run = || enumerate_srswor(&pop, 5, "t1", |s| est_t1(s, xbar, &cfg)).unwrap();
    let a = in_pool(1, run);
    let b = in_pool(5, run);
    assert_eq!(a.estimates, b.estimates);
    assert_eq!(a.exact_bias, b.exact_bias);
    assert_eq!(a.exact_mse, b.exact_mse);
}

#[test]
fn monte_carlo_is_thread_count_independent() {
    let pop = fixture("pop10.csv");
    let xbar = compute_moments(&pop).unwrap().xbar;
    let cfg = FamilyConfig::default();
    let run = || monte_carlo(&pop, 4, "t1", |s| est_t1(s, xbar, &cfg), 5_000, 99).unwrap();
    assert_eq!(in_pool(1, run), in_pool(3, run));
    let run2 = || monte_carlo_two_phase(&pop, 6, 3, "t1d", |s| est_t1d(s, &cfg), 5_000, 99).unwrap();
    assert_eq!(in_pool(1, run2), in_pool(4, run2));
}

#[test]
fn monte_carlo_mean_is_unbiased_at_scale() {
    let pop = fixture("pop24.csv");
    let e = monte_carlo(&pop, 5, "mean", |s| Ok(s.ybar), 100_000, 2024).unwrap();
    assert!(e.emp_bias.abs() <= 4.0 * e.stderr_bias);
    assert!(e.stderr_bias.is_finite() && e.stderr_mse.is_finite());
}

#[test]
fn monte_carlo_agrees_with_enumeration_for_t1() {
    let pop = fixture("pop8.csv");
    let xbar = compute_moments(&pop).unwrap().xbar;
    let cfg = FamilyConfig::default();
    let exact = enumerate_srswor(&pop, 3, "t1", |s| est_t1(s, xbar, &cfg)).unwrap();
    let mc = monte_carlo(&pop, 3, "t1", |s| est_t1(s, xbar, &cfg), 100_000, 11).unwrap();
    assert!((mc.emp_mse - exact.exact_mse).abs() <= 4.0 * mc.stderr_mse);
    assert!((mc.emp_bias - exact.exact_bias).abs() <= 4.0 * mc.stderr_bias);
}

#[test]
fn first_order_bias_of_t1_tracks_enumeration() {
    // the O(1/n^2) remainder is still visible at n = 3, so only sign and rough size are checked
    let pop = fixture("pop8.csv");
    let m = compute_moments(&pop).unwrap();
    let cfg = FamilyConfig::default();
    let input = TheoryInput::new(m, finite_factors(8, 3, None).unwrap(), cfg).unwrap();
    let analytic = theory_t1(&input).bias;
    let exact = enumerate_srswor(&pop, 3, "t1", |s| est_t1(s, m.xbar, &cfg)).unwrap().exact_bias;
    assert_eq!(analytic.signum(), exact.signum());
    assert!((exact - analytic).abs() <= 0.25 * analytic.abs(), "{exact} vs {analytic}");
}

#[test]
fn two_phase_t1d_bias_tracks_enumeration() {
    let pop = fixture("pop10.csv");
    let units: Vec<_> = pop.units()[..7].to_vec();
    let pop = FinitePopulation::new(units).unwrap();
    let m = compute_moments(&pop).unwrap();
    let cfg = FamilyConfig::default();
    let input = TheoryInput::new(m, finite_factors(7, 2, Some(4)).unwrap(), cfg).unwrap();
    let analytic = theory_t1d(&input).unwrap();
    let d = enumerate_two_phase(&pop, 4, 2, "t1d", |s| est_t1d(s, &cfg)).unwrap();
    assert_eq!(d.count, 35 * 6);
    assert_eq!(analytic.bias.signum(), d.exact_bias.signum());
    assert!((d.exact_bias - analytic.bias).abs() <= 0.5 * analytic.bias.abs());
    assert!((d.exact_mse - analytic.mse).abs() <= 0.2 * analytic.mse);
}

#[test]
fn census_first_phase_collapses_every_estimator() {
    let pop = fixture("pop8.csv");
    let m = compute_moments(&pop).unwrap();
    let cfg = FamilyConfig { gamma: 0.5, ..FamilyConfig::default() };
    let single = TheoryInput::new(m, finite_factors(8, 3, None).unwrap(), cfg).unwrap();
    let nested = TheoryInput::new(m, finite_factors(8, 3, Some(8)).unwrap(), cfg).unwrap();
    let t1 = Prepared::new(EstimatorId::T1, single).unwrap();
    let t1d = Prepared::new(EstimatorId::T1d, nested).unwrap();
    let a = enumerate_srswor(&pop, 3, "t1", |s| t1.estimate(s)).unwrap();
    let b = enumerate_two_phase(&pop, 8, 3, "t1d", |s| t1d.estimate_two_phase(s)).unwrap();
    assert_eq!(a.estimates, b.estimates);
    let (x, y) = (t1.analytic().unwrap(), t1d.analytic().unwrap());
    assert!((x.bias - y.bias).abs() <= 1e-12 * x.bias.abs());
    assert!((x.mse - y.mse).abs() <= 1e-12 * x.mse);
}

#[test]
fn regression_theory_is_exact() {
    let pop = fixture("pop12.csv");
    let m = compute_moments(&pop).unwrap();
    let input = TheoryInput::new(m, finite_factors(12, 4, None).unwrap(), FamilyConfig::default()).unwrap();
    let p = Prepared::new(EstimatorId::Reg, input).unwrap();
    let d = enumerate_srswor(&pop, 4, "reg", |s| p.estimate(s)).unwrap();
    let a = p.analytic().unwrap();
    assert!(d.exact_bias.abs() < 1e-12 * m.ybar);
    assert!((d.exact_mse - a.mse).abs() < 1e-10 * a.mse);
}
