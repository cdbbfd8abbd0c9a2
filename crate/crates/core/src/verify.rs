//! Ground truth for the first-order theory: exhaustive enumeration of every
//! SRSWOR sample (single-phase and nested two-phase), seeded Monte Carlo,
//! and the comparison rows built on top of them.
//!
//! Both engines split work across rayon threads but always combine the
//! per-sample estimates in a fixed order, so results do not depend on the
//! number of worker threads.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{est_t1, est_tp, FamilyConfig, SampleMeans, TwoPhaseMeans};
use crate::population::{compute_moments, finite_factors, FinitePopulation};
use crate::sum::NeumaierSum;
use crate::theory::{theory_t1, theory_t1d, BiasMse, TheoryInput};
use crate::weights::{solve_weights, solve_weights_two_phase};

/// Largest number of samples either enumerator will visit.
pub const MAX_SUBSETS: u128 = 10_000_000;
/// Smallest accepted Monte Carlo replicate count.
pub const MIN_REPS: u64 = 1_000;
/// Monte Carlo allowance in standard errors when comparing against theory.
pub const MC_SIGMAS: f64 = 4.0;

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Calls `visit` with every `k`-subset of `pool` in lexicographic order of
/// positions. Stops at the first error.
fn for_each_subset<F>(pool: &[usize], k: usize, mut visit: F) -> Result<()>
where
    F: FnMut(&[usize]) -> Result<()>,
{
    let n = pool.len();
    if k > n {
        return Ok(());
    }
    let mut pos: Vec<usize> = (0..k).collect();
    let mut chosen: Vec<usize> = pos.iter().map(|&p| pool[p]).collect();
    loop {
        visit(&chosen)?;
        // advance the rightmost position that still has room
        let mut i = k;
        loop {
            if i == 0 {
                return Ok(());
            }
            i -= 1;
            if pos[i] < n - k + i {
                break;
            }
        }
        pos[i] += 1;
        chosen[i] = pool[pos[i]];
        for j in (i + 1)..k {
            pos[j] = pos[j - 1] + 1;
            chosen[j] = pool[pos[j]];
        }
    }
}

fn means_of(pop: &FinitePopulation, idx: &[usize]) -> SampleMeans {
    let units = pop.units();
    let (mut sy, mut sx) = (0.0, 0.0);
    for &i in idx {
        sy += units[i].y;
        sx += units[i].x;
    }
    let n = idx.len() as f64;
    SampleMeans {
        ybar: sy / n,
        xbar: sx / n,
    }
}

fn mean_x(pop: &FinitePopulation, idx: &[usize]) -> f64 {
    let units = pop.units();
    idx.iter().map(|&i| units[i].x).sum::<f64>() / idx.len() as f64
}

/// Exact sampling distribution of an estimator over all equally likely samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactDistribution {
    pub estimator: String,
    /// One estimate per sample, in lexicographic order of the index sets.
    #[serde(skip)]
    pub estimates: Vec<f64>,
    /// Number of equally likely samples.
    pub count: u64,
    /// Probability of each sample, `1 / count`.
    pub probability: f64,
    pub mean_estimate: f64,
    pub exact_bias: f64,
    pub exact_mse: f64,
}

impl ExactDistribution {
    fn from_estimates(estimator: &str, estimates: Vec<f64>, target: f64) -> Self {
        let mut total = NeumaierSum::new();
        let mut dev = NeumaierSum::new();
        let mut sq = NeumaierSum::new();
        for &t in &estimates {
            total += t;
            dev += t - target;
            sq += (t - target) * (t - target);
        }
        let count = estimates.len() as f64;
        Self {
            estimator: estimator.to_string(),
            count: estimates.len() as u64,
            probability: 1.0 / count,
            mean_estimate: total.sum() / count,
            exact_bias: dev.sum() / count,
            exact_mse: sq.sum() / count,
            estimates,
        }
    }
}

/// Evaluates `est` on every `n`-subset of the population.
pub fn enumerate_srswor<F>(pop: &FinitePopulation, n: usize, label: &str, est: F) -> Result<ExactDistribution>
where
    F: Fn(&SampleMeans) -> Result<f64> + Sync,
{
    let big_n = pop.len();
    finite_factors(big_n, n, None)?;
    let count = binomial(big_n, n);
    if count > MAX_SUBSETS {
        return Err(Error::TooManySubsets {
            count,
            limit: MAX_SUBSETS,
        });
    }
    let target = crate::sum::compensated_mean(&pop.ys());

    // chunk by the smallest index in the subset
    let chunks: Vec<Result<Vec<f64>>> = (0..=big_n - n)
        .into_par_iter()
        .map(|first| {
            let rest: Vec<usize> = ((first + 1)..big_n).collect();
            let mut out = Vec::with_capacity(binomial(rest.len(), n - 1) as usize);
            let mut idx = Vec::with_capacity(n);
            for_each_subset(&rest, n - 1, |tail| {
                idx.clear();
                idx.push(first);
                idx.extend_from_slice(tail);
                let t = est(&means_of(pop, &idx)).map_err(|e| Error::EstimatorFailed {
                    indices: idx.clone(),
                    source: Box::new(e),
                })?;
                out.push(t);
                Ok(())
            })?;
            Ok(out)
        })
        .collect();

    let mut estimates = Vec::with_capacity(count as usize);
    for chunk in chunks {
        estimates.extend(chunk?);
    }
    debug_assert_eq!(estimates.len() as u128, count);
    Ok(ExactDistribution::from_estimates(label, estimates, target))
}

/// Evaluates `est` on every (first-phase `n'`-subset, second-phase
/// `n`-subset of it) pair; all pairs are equally likely.
pub fn enumerate_two_phase<F>(
    pop: &FinitePopulation,
    n_prime: usize,
    n: usize,
    label: &str,
    est: F,
) -> Result<ExactDistribution>
where
    F: Fn(&TwoPhaseMeans) -> Result<f64> + Sync,
{
    let big_n = pop.len();
    finite_factors(big_n, n, Some(n_prime))?;
    let count = binomial(big_n, n_prime).saturating_mul(binomial(n_prime, n));
    if count > MAX_SUBSETS {
        return Err(Error::TooManySubsets {
            count,
            limit: MAX_SUBSETS,
        });
    }
    let target = crate::sum::compensated_mean(&pop.ys());
    let all: Vec<usize> = (0..big_n).collect();
    let mut first_phases = Vec::with_capacity(binomial(big_n, n_prime) as usize);
    for_each_subset(&all, n_prime, |s| {
        first_phases.push(s.to_vec());
        Ok(())
    })?;

    let chunks: Vec<Result<Vec<f64>>> = first_phases
        .par_iter()
        .map(|outer| {
            let xbar_first = mean_x(pop, outer);
            let mut out = Vec::with_capacity(binomial(n_prime, n) as usize);
            for_each_subset(outer, n, |inner| {
                let m = means_of(pop, inner);
                let s = TwoPhaseMeans {
                    ybar: m.ybar,
                    xbar: m.xbar,
                    xbar_first,
                };
                let t = est(&s).map_err(|e| Error::EstimatorFailed {
                    indices: inner.to_vec(),
                    source: Box::new(e),
                })?;
                out.push(t);
                Ok(())
            })?;
            Ok(out)
        })
        .collect();

    let mut estimates = Vec::with_capacity(count as usize);
    for chunk in chunks {
        estimates.extend(chunk?);
    }
    Ok(ExactDistribution::from_estimates(label, estimates, target))
}

/// Monte Carlo summary of an estimator's sampling distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalStats {
    pub estimator: String,
    pub reps: u64,
    pub seed: u64,
    pub mean_estimate: f64,
    pub emp_bias: f64,
    pub emp_mse: f64,
    pub stderr_bias: f64,
    pub stderr_mse: f64,
}

impl EmpiricalStats {
    fn from_estimates(estimator: &str, estimates: &[f64], target: f64, seed: u64) -> Self {
        let reps = estimates.len() as f64;
        let mut dev = NeumaierSum::new();
        let mut sq = NeumaierSum::new();
        for &t in estimates {
            dev += t - target;
            sq += (t - target) * (t - target);
        }
        let bias = dev.sum() / reps;
        let mse = sq.sum() / reps;
        let mut var_t = NeumaierSum::new();
        let mut var_sq = NeumaierSum::new();
        for &t in estimates {
            let d = t - target;
            var_t += (d - bias) * (d - bias);
            var_sq += (d * d - mse) * (d * d - mse);
        }
        Self {
            estimator: estimator.to_string(),
            reps: estimates.len() as u64,
            seed,
            mean_estimate: target + bias,
            emp_bias: bias,
            emp_mse: mse,
            stderr_bias: (var_t.sum() / (reps - 1.0) / reps).sqrt(),
            stderr_mse: (var_sq.sum() / (reps - 1.0) / reps).sqrt(),
        }
    }
}

/// Random stream for replicate `r`: ChaCha8 keyed by `seed`, stream `r`.
fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

fn check_reps(reps: u64) -> Result<()> {
    if reps < MIN_REPS {
        return Err(Error::TooFewReplicates {
            got: reps,
            min: MIN_REPS,
        });
    }
    Ok(())
}

/// Draws `reps` independent SRSWOR samples of size `n`.
pub fn monte_carlo<F>(
    pop: &FinitePopulation,
    n: usize,
    label: &str,
    est: F,
    reps: u64,
    seed: u64,
) -> Result<EmpiricalStats>
where
    F: Fn(&SampleMeans) -> Result<f64> + Sync,
{
    check_reps(reps)?;
    let big_n = pop.len();
    finite_factors(big_n, n, None)?;
    let estimates: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r);
            let idx = index::sample(&mut rng, big_n, n).into_vec();
            est(&means_of(pop, &idx)).map_err(|e| Error::ReplicateFailed {
                replicate: r,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let target = crate::sum::compensated_mean(&pop.ys());
    Ok(EmpiricalStats::from_estimates(label, &estimates, target, seed))
}

/// Two-phase Monte Carlo: SRSWOR of `n'` units, then SRSWOR of `n` among them.
pub fn monte_carlo_two_phase<F>(
    pop: &FinitePopulation,
    n_prime: usize,
    n: usize,
    label: &str,
    est: F,
    reps: u64,
    seed: u64,
) -> Result<EmpiricalStats>
where
    F: Fn(&TwoPhaseMeans) -> Result<f64> + Sync,
{
    check_reps(reps)?;
    let big_n = pop.len();
    finite_factors(big_n, n, Some(n_prime))?;
    let estimates: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r);
            let outer = index::sample(&mut rng, big_n, n_prime).into_vec();
            let inner: Vec<usize> = index::sample(&mut rng, n_prime, n)
                .into_iter()
                .map(|p| outer[p])
                .collect();
            let m = means_of(pop, &inner);
            let s = TwoPhaseMeans {
                ybar: m.ybar,
                xbar: m.xbar,
                xbar_first: mean_x(pop, &outer),
            };
            est(&s).map_err(|e| Error::ReplicateFailed {
                replicate: r,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let target = crate::sum::compensated_mean(&pop.ys());
    Ok(EmpiricalStats::from_estimates(label, &estimates, target, seed))
}

/// Either kind of ground truth, as seen by [`compare`].
pub trait GroundTruth {
    fn truth_bias(&self) -> f64;
    fn truth_mse(&self) -> f64;
    /// Sampling-noise allowance added to the bias tolerance.
    fn bias_allowance(&self) -> f64 {
        0.0
    }
    /// Sampling-noise allowance added to the MSE tolerance.
    fn mse_allowance(&self) -> f64 {
        0.0
    }
}

impl GroundTruth for ExactDistribution {
    fn truth_bias(&self) -> f64 {
        self.exact_bias
    }
    fn truth_mse(&self) -> f64 {
        self.exact_mse
    }
}

impl GroundTruth for EmpiricalStats {
    fn truth_bias(&self) -> f64 {
        self.emp_bias
    }
    fn truth_mse(&self) -> f64 {
        self.emp_mse
    }
    fn bias_allowance(&self) -> f64 {
        MC_SIGMAS * self.stderr_bias
    }
    fn mse_allowance(&self) -> f64 {
        MC_SIGMAS * self.stderr_mse
    }
}

/// Pass thresholds for one comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    /// Absolute bound on `|analytic bias - true bias|`.
    pub bias_abs: f64,
    /// Bound on `|analytic mse - true mse|` relative to the analytic MSE.
    pub mse_rel: f64,
    /// Absolute floor added to the MSE bound (covers zero-MSE estimators).
    pub mse_abs: f64,
}

impl Tolerance {
    /// First-order default: 15% relative on MSE.
    pub const DEFAULT_MSE_REL: f64 = 0.15;
}

/// One line of a verification report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRow {
    pub estimator: String,
    pub analytic_bias: f64,
    pub analytic_mse: f64,
    pub truth_bias: f64,
    pub truth_mse: f64,
    pub bias_diff: f64,
    /// `(truth - analytic) / analytic`; absent when the analytic MSE is zero.
    pub mse_rel_diff: Option<f64>,
    pub pre_analytic: Option<f64>,
    pub pre_truth: Option<f64>,
    pub bias_pass: bool,
    pub mse_pass: bool,
    pub pass: bool,
}

/// Compares analytic values with ground truth. `mse_base` is the MSE of the
/// sample mean, used for the PRE columns.
pub fn compare<T: GroundTruth + ?Sized>(
    estimator: &str,
    analytic: BiasMse,
    truth: &T,
    tol: Tolerance,
    mse_base: f64,
) -> VerificationRow {
    let truth_bias = truth.truth_bias();
    let truth_mse = truth.truth_mse();
    let bias_diff = truth_bias - analytic.bias;
    let mse_diff = truth_mse - analytic.mse;
    let bias_pass = bias_diff.abs() <= tol.bias_abs + truth.bias_allowance();
    let mse_pass = mse_diff.abs() <= tol.mse_rel * analytic.mse.abs() + tol.mse_abs + truth.mse_allowance();
    let pre = |mse: f64| crate::theory::pre_percent(mse_base, mse).ok();
    VerificationRow {
        estimator: estimator.to_string(),
        analytic_bias: analytic.bias,
        analytic_mse: analytic.mse,
        truth_bias,
        truth_mse,
        bias_diff,
        mse_rel_diff: (analytic.mse != 0.0).then(|| mse_diff / analytic.mse),
        pre_analytic: pre(analytic.mse),
        pre_truth: pre(truth_mse),
        bias_pass,
        mse_pass,
        pass: bias_pass && mse_pass,
    }
}

/// How ground-truth bias is obtained in [`bias_annihilation_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TruthMode {
    Exact,
    MonteCarlo { reps: u64, seed: u64 },
}

/// Largest allowed `max |n b(t_p)| / max |n b(t_1)|`.
pub const ANNIHILATION_RATIO: f64 = 0.2;
/// Growth allowed between consecutive `|n b(t_p)|` values.
pub const ANNIHILATION_SLACK: f64 = 1.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnihilationRow {
    pub n: usize,
    pub n_prime: Option<usize>,
    pub weights: [f64; 3],
    pub bias_t1: f64,
    pub bias_tp: f64,
    /// `n * bias_t1`
    pub scaled_t1: f64,
    /// `n * bias_tp`
    pub scaled_tp: f64,
    pub analytic_bias_t1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnihilationReport {
    pub rows: Vec<AnnihilationRow>,
    pub max_scaled_t1: f64,
    pub max_scaled_tp: f64,
    pub ratio_pass: bool,
    pub monotone_pass: bool,
    pub pass: bool,
}

fn summarize(rows: Vec<AnnihilationRow>, floor: f64) -> AnnihilationReport {
    let max_t1 = rows.iter().map(|r| r.scaled_t1.abs()).fold(0.0, f64::max);
    let max_tp = rows.iter().map(|r| r.scaled_tp.abs()).fold(0.0, f64::max);
    let ratio_pass = max_tp <= ANNIHILATION_RATIO * max_t1 + floor;
    // compare consecutive rows of the same first-phase size
    let monotone_pass = rows.windows(2).all(|w| {
        w[0].n_prime != w[1].n_prime
            || w[1].scaled_tp.abs() <= ANNIHILATION_SLACK * w[0].scaled_tp.abs() + floor
    });
    AnnihilationReport {
        max_scaled_t1: max_t1,
        max_scaled_tp: max_tp,
        ratio_pass,
        monotone_pass,
        pass: ratio_pass && monotone_pass,
        rows,
    }
}

fn check_grid(n_grid: &[usize]) -> Result<()> {
    if n_grid.len() < 3 || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidGrid(format!(
            "need at least 3 strictly increasing sample sizes, got {n_grid:?}"
        )));
    }
    Ok(())
}

/// Checks that re-solved weights remove the order-`1/n` bias: along the
/// grid, `n b(t_p)` must stay well below `n b(t_1)` and must not grow.
pub fn bias_annihilation_check(
    pop: &FinitePopulation,
    cfg: &FamilyConfig,
    n_grid: &[usize],
    mode: TruthMode,
) -> Result<AnnihilationReport> {
    check_grid(n_grid)?;
    let moments = compute_moments(pop)?;
    let xbar = moments.xbar;
    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let input = TheoryInput::new(moments, finite_factors(pop.len(), n, None)?, *cfg)?;
        let w = solve_weights(&input)?.weights;
        let t1 = |s: &SampleMeans| est_t1(s, xbar, cfg);
        let tp = |s: &SampleMeans| est_tp(s, xbar, cfg, &w);
        let (b1, bp) = match mode {
            TruthMode::Exact => (
                enumerate_srswor(pop, n, "t1", t1)?.exact_bias,
                enumerate_srswor(pop, n, "tp", tp)?.exact_bias,
            ),
            TruthMode::MonteCarlo { reps, seed } => (
                monte_carlo(pop, n, "t1", t1, reps, seed)?.emp_bias,
                monte_carlo(pop, n, "tp", tp, reps, seed)?.emp_bias,
            ),
        };
        rows.push(AnnihilationRow {
            n,
            n_prime: None,
            weights: w,
            bias_t1: b1,
            bias_tp: bp,
            scaled_t1: n as f64 * b1,
            scaled_tp: n as f64 * bp,
            analytic_bias_t1: theory_t1(&input).bias,
        });
    }
    Ok(summarize(rows, 1e-12 * moments.ybar.abs()))
}

/// Two-phase version over `(n', n)` designs, using exhaustive nested enumeration.
pub fn bias_annihilation_check_two_phase(
    pop: &FinitePopulation,
    cfg: &FamilyConfig,
    designs: &[(usize, usize)],
) -> Result<AnnihilationReport> {
    if designs.is_empty() {
        return Err(Error::InvalidGrid("no two-phase designs given".into()));
    }
    let moments = compute_moments(pop)?;
    let mut rows = Vec::with_capacity(designs.len());
    for &(n_prime, n) in designs {
        let input = TheoryInput::new(moments, finite_factors(pop.len(), n, Some(n_prime))?, *cfg)?;
        let h = solve_weights_two_phase(&input)?.weights;
        let b1 = enumerate_two_phase(pop, n_prime, n, "t1d", |s| crate::estimators::est_t1d(s, cfg))?.exact_bias;
        let bp = enumerate_two_phase(pop, n_prime, n, "tpd", |s| crate::estimators::est_tpd(s, cfg, &h))?.exact_bias;
        rows.push(AnnihilationRow {
            n,
            n_prime: Some(n_prime),
            weights: h,
            bias_t1: b1,
            bias_tp: bp,
            scaled_t1: n as f64 * b1,
            scaled_tp: n as f64 * bp,
            analytic_bias_t1: theory_t1d(&input)?.bias,
        });
    }
    Ok(summarize(rows, 1e-12 * moments.ybar.abs()))
}
