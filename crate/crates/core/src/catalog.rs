//! Named estimators, so callers can pick them from a list and get both the
//! sample-level estimate and the first-order theory from one place.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    est_exp_ratio, est_mean, est_product, est_ratio, est_regression, est_t1, est_t1d, est_t2,
    est_t2d, est_tp, est_tpd, SampleMeans, TwoPhaseMeans,
};
use crate::population::FinitePopulation;
use crate::theory::{
    mse_mean, theory_exp_ratio, theory_product, theory_ratio, theory_regression, theory_t1,
    theory_t1d, theory_t2, theory_t2d, theory_tp, theory_tpd, BiasMse, TheoryInput,
};
use crate::verify::{
    compare, enumerate_srswor, enumerate_two_phase, monte_carlo, monte_carlo_two_phase, Tolerance,
    VerificationRow,
};
use crate::weights::{solve_weights, solve_weights_two_phase, WeightSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorId {
    Mean,
    Ratio,
    Product,
    Exp,
    Reg,
    T1,
    T2,
    Tp,
    T1d,
    T2d,
    Tpd,
}

impl EstimatorId {
    pub const ALL: [EstimatorId; 11] = [
        EstimatorId::Mean,
        EstimatorId::Ratio,
        EstimatorId::Product,
        EstimatorId::Exp,
        EstimatorId::Reg,
        EstimatorId::T1,
        EstimatorId::T2,
        EstimatorId::Tp,
        EstimatorId::T1d,
        EstimatorId::T2d,
        EstimatorId::Tpd,
    ];
    pub const SINGLE_PHASE_DEFAULT: [EstimatorId; 5] = [
        EstimatorId::Mean,
        EstimatorId::Ratio,
        EstimatorId::T1,
        EstimatorId::T2,
        EstimatorId::Tp,
    ];
    pub const TWO_PHASE_DEFAULT: [EstimatorId; 4] = [
        EstimatorId::Mean,
        EstimatorId::T1d,
        EstimatorId::T2d,
        EstimatorId::Tpd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorId::Mean => "mean",
            EstimatorId::Ratio => "ratio",
            EstimatorId::Product => "product",
            EstimatorId::Exp => "exp",
            EstimatorId::Reg => "reg",
            EstimatorId::T1 => "t1",
            EstimatorId::T2 => "t2",
            EstimatorId::Tp => "tp",
            EstimatorId::T1d => "t1d",
            EstimatorId::T2d => "t2d",
            EstimatorId::Tpd => "tpd",
        }
    }

    /// Needs a first-phase sample. The sample mean works in either design.
    pub fn is_two_phase(self) -> bool {
        matches!(self, EstimatorId::T1d | EstimatorId::T2d | EstimatorId::Tpd)
    }

    /// Usable in a two-phase design.
    pub fn allowed_two_phase(self) -> bool {
        self == EstimatorId::Mean || self.is_two_phase()
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown estimator `{s}`")))
    }
}

/// An estimator bound to a design: theory inputs plus solved weights when
/// the estimator is a combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prepared {
    pub id: EstimatorId,
    pub input: TheoryInput,
    pub weights: Option<WeightSolution>,
}

impl Prepared {
    pub fn new(id: EstimatorId, input: TheoryInput) -> Result<Self> {
        if id.is_two_phase() && !input.factors.is_two_phase() {
            return Err(Error::MissingFirstPhase);
        }
        if input.factors.is_two_phase() && !id.allowed_two_phase() {
            return Err(Error::InvalidConfig(format!(
                "estimator `{id}` is not defined for a two-phase design"
            )));
        }
        let weights = match id {
            EstimatorId::Tp => Some(solve_weights(&input)?),
            EstimatorId::Tpd => Some(solve_weights_two_phase(&input)?),
            _ => None,
        };
        Ok(Self { id, input, weights })
    }

    fn w(&self) -> [f64; 3] {
        self.weights.map(|s| s.weights).unwrap_or([1.0, 0.0, 0.0])
    }

    /// First-order bias and MSE (exact for the sample mean and the regression estimator).
    pub fn analytic(&self) -> Result<BiasMse> {
        let inp = &self.input;
        let (m, f) = (&inp.moments, &inp.factors);
        Ok(match self.id {
            EstimatorId::Mean => BiasMse {
                bias: 0.0,
                mse: mse_mean(m, f),
            },
            EstimatorId::Ratio => theory_ratio(m, f),
            EstimatorId::Product => theory_product(m, f),
            EstimatorId::Exp => theory_exp_ratio(m, f),
            EstimatorId::Reg => theory_regression(m, f, m.slope()),
            EstimatorId::T1 => theory_t1(inp),
            EstimatorId::T2 => theory_t2(inp),
            EstimatorId::Tp => theory_tp(inp, &self.w()),
            EstimatorId::T1d => theory_t1d(inp)?,
            EstimatorId::T2d => theory_t2d(inp)?,
            EstimatorId::Tpd => theory_tpd(inp, &self.w())?,
        })
    }

    /// Estimate from a single-phase sample.
    pub fn estimate(&self, s: &SampleMeans) -> Result<f64> {
        let xbar = self.input.moments.xbar;
        let cfg = &self.input.cfg;
        match self.id {
            EstimatorId::Mean => Ok(est_mean(s)),
            EstimatorId::Ratio => est_ratio(s, xbar),
            EstimatorId::Product => est_product(s, xbar),
            EstimatorId::Exp => est_exp_ratio(s, xbar),
            EstimatorId::Reg => Ok(est_regression(s, xbar, self.input.moments.slope())),
            EstimatorId::T1 => est_t1(s, xbar, cfg),
            EstimatorId::T2 => est_t2(s, xbar, cfg),
            EstimatorId::Tp => est_tp(s, xbar, cfg, &self.w()),
            EstimatorId::T1d | EstimatorId::T2d | EstimatorId::Tpd => Err(Error::MissingFirstPhase),
        }
    }

    /// Estimate from a two-phase sample.
    pub fn estimate_two_phase(&self, s: &TwoPhaseMeans) -> Result<f64> {
        let cfg = &self.input.cfg;
        match self.id {
            EstimatorId::Mean => Ok(est_mean(s)),
            EstimatorId::T1d => est_t1d(s, cfg),
            EstimatorId::T2d => est_t2d(s, cfg),
            EstimatorId::Tpd => est_tpd(s, cfg, &self.w()),
            other => Err(Error::InvalidConfig(format!(
                "estimator `{other}` is not defined for a two-phase design"
            ))),
        }
    }
}

/// Source of ground truth for [`run_verification`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroundTruthMode {
    Enumerate,
    MonteCarlo { reps: u64, seed: u64 },
}

/// User-facing tolerances. `bias` is a multiple of the standard error of
/// the sample mean, `mse` is relative to the analytic MSE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyTolerance {
    pub bias: f64,
    pub mse: f64,
}

impl Default for VerifyTolerance {
    fn default() -> Self {
        Self {
            bias: 0.1,
            mse: Tolerance::DEFAULT_MSE_REL,
        }
    }
}

/// Rounding floor added to every bound, relative to the quantity's natural scale.
pub const ROUNDING_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub pop_size: usize,
    pub n: usize,
    pub n_prime: Option<usize>,
    pub mode: GroundTruthMode,
    pub tolerance: VerifyTolerance,
    pub mse_mean: f64,
    pub rows: Vec<VerificationRow>,
    pub pass: bool,
}

/// Compares every estimator in `ids` against exhaustive enumeration or Monte Carlo.
pub fn run_verification(
    pop: &FinitePopulation,
    input: &TheoryInput,
    ids: &[EstimatorId],
    mode: GroundTruthMode,
    tol: VerifyTolerance,
) -> Result<VerificationReport> {
    if ids.is_empty() {
        return Err(Error::InvalidConfig("no estimators selected".into()));
    }
    let f = &input.factors;
    let base = mse_mean(&input.moments, f);
    let tolerance = Tolerance {
        bias_abs: tol.bias * base.sqrt() + ROUNDING_FLOOR * input.moments.ybar.abs(),
        mse_rel: tol.mse,
        mse_abs: ROUNDING_FLOOR * base,
    };
    let mut rows = Vec::with_capacity(ids.len());
    for &id in ids {
        let p = Prepared::new(id, *input)?;
        let analytic = p.analytic()?;
        let label = id.name();
        let row = match (f.n_prime(), mode) {
            (None, GroundTruthMode::Enumerate) => {
                let d = enumerate_srswor(pop, f.n, label, |s| p.estimate(s))?;
                compare(label, analytic, &d, tolerance, base)
            }
            (None, GroundTruthMode::MonteCarlo { reps, seed }) => {
                let e = monte_carlo(pop, f.n, label, |s| p.estimate(s), reps, seed)?;
                compare(label, analytic, &e, tolerance, base)
            }
            (Some(np), GroundTruthMode::Enumerate) => {
                let d = enumerate_two_phase(pop, np, f.n, label, |s| p.estimate_two_phase(s))?;
                compare(label, analytic, &d, tolerance, base)
            }
            (Some(np), GroundTruthMode::MonteCarlo { reps, seed }) => {
                let e = monte_carlo_two_phase(pop, np, f.n, label, |s| p.estimate_two_phase(s), reps, seed)?;
                compare(label, analytic, &e, tolerance, base)
            }
        };
        rows.push(row);
    }
    Ok(VerificationReport {
        pop_size: f.pop_size,
        n: f.n,
        n_prime: f.n_prime(),
        mode,
        tolerance: tol,
        mse_mean: base,
        pass: rows.iter().all(|r| r.pass),
        rows,
    })
}
