//! First-order (order `1/n`) bias and MSE of every estimator, the
//! minimum-MSE bounds, and percentage relative efficiency.
//!
//! Writing `ybar = Ybar(1 + e0)`, `xbar = Xbar(1 + e1)` and, in two-phase
//! designs, `xbar' = Xbar(1 + e1')`, every estimator here expands to
//! `Ybar[1 + e0 - L d + c d^2 - L e0 d]` with `d = e1` (single phase) or
//! `d = e1 - e1'` (two phase). The bias is `Ybar F Cx^2 (c - L Kx)` and the
//! MSE `Ybar^2 [f1 Cy^2 + F Cx^2 (L^2 - 2 L Kx)]`, where `F` is `f1` or `f3`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{FamilyConfig, ShapeFactors};
use crate::population::{FiniteFactors, PopulationMoments};

/// Everything the closed-form expressions depend on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryInput {
    pub moments: PopulationMoments,
    pub factors: FiniteFactors,
    pub cfg: FamilyConfig,
    pub shape: ShapeFactors,
}

impl TheoryInput {
    /// Derives the shape factors from `cfg` and the population mean of `x`.
    pub fn new(moments: PopulationMoments, factors: FiniteFactors, cfg: FamilyConfig) -> Result<Self> {
        let shape = cfg.shape(moments.xbar)?;
        Ok(Self {
            moments,
            factors,
            cfg,
            shape,
        })
    }

    fn cx2(&self) -> f64 {
        self.moments.cx * self.moments.cx
    }
}

/// First-order bias and mean squared error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasMse {
    pub bias: f64,
    pub mse: f64,
}

/// Generic single-phase form with linear coefficient `l` and curvature `c`.
fn single_phase(m: &PopulationMoments, f1: f64, l: f64, c: f64) -> BiasMse {
    let cx2 = m.cx * m.cx;
    BiasMse {
        bias: m.ybar * f1 * cx2 * (c - l * m.kx),
        mse: m.ybar * m.ybar * f1 * (m.cy * m.cy + cx2 * (l * l - 2.0 * l * m.kx)),
    }
}

/// Generic two-phase form; the auxiliary contrast only carries `f3`.
fn two_phase(m: &PopulationMoments, f1: f64, f3: f64, l: f64, c: f64) -> BiasMse {
    let cx2 = m.cx * m.cx;
    BiasMse {
        bias: m.ybar * f3 * cx2 * (c - l * m.kx),
        mse: m.ybar * m.ybar * (f1 * m.cy * m.cy + f3 * cx2 * (l * l - 2.0 * l * m.kx)),
    }
}

/// MSE of the sample mean, `Ybar^2 f1 Cy^2` (exact under SRSWOR).
pub fn mse_mean(moments: &PopulationMoments, factors: &FiniteFactors) -> f64 {
    moments.ybar * moments.ybar * factors.f1 * moments.cy * moments.cy
}

/// Ratio-type family member.
pub fn theory_t1(input: &TheoryInput) -> BiasMse {
    let m = &input.moments;
    let f1 = input.factors.f1;
    let cx2 = input.cx2();
    let a = input.cfg.alpha;
    let v1 = input.shape.v1;
    BiasMse {
        bias: m.ybar * f1 * cx2 * (a * (a + 1.0) * v1 * v1 / 2.0 - a * v1 * m.kx),
        mse: m.ybar * m.ybar * f1 * (m.cy * m.cy + cx2 * (a * a * v1 * v1 - 2.0 * v1 * a * m.kx)),
    }
}

/// Exponential family member.
pub fn theory_t2(input: &TheoryInput) -> BiasMse {
    let m = &input.moments;
    let f1 = input.factors.f1;
    let cx2 = input.cx2();
    let b = input.cfg.beta;
    let l = input.cfg.lambda;
    let v2 = input.shape.v2;
    let kx = m.kx;
    let bias_coef = l * v2 * b / 2.0 - b * (b - 1.0) / 2.0 - l * (l + 2.0) * v2 * v2 / 8.0 - b * kx
        + l * v2 * kx / 2.0;
    BiasMse {
        bias: m.ybar * f1 * cx2 * bias_coef,
        mse: m.ybar
            * m.ybar
            * f1
            * (m.cy * m.cy + cx2 * (b * b + l * l * v2 * v2 / 4.0 - b * l * v2)
                - 2.0 * kx * cx2 * (b - l * v2 / 2.0)),
    }
}

/// Effective linear coefficient of the combination: `w1 alpha V1 + w2 (beta - lambda V2 / 2)`.
pub fn q_coefficient(input: &TheoryInput, w: &[f64; 3]) -> f64 {
    w[1] * input.cfg.alpha * input.shape.v1
        + w[2] * (input.cfg.beta - input.cfg.lambda * input.shape.v2 / 2.0)
}

/// Weighted combination; weights are assumed to sum to one.
pub fn theory_tp(input: &TheoryInput, w: &[f64; 3]) -> BiasMse {
    let m = &input.moments;
    let b1 = theory_t1(input).bias;
    let b2 = theory_t2(input).bias;
    let q = q_coefficient(input, w);
    BiasMse {
        bias: w[1] * b1 + w[2] * b2,
        mse: m.ybar * m.ybar * input.factors.f1 * (m.cy * m.cy + input.cx2() * (q * q - 2.0 * q * m.kx)),
    }
}

/// Lower bound `Ybar^2 f1 Cy^2 (1 - rho^2)`, reached at `Q = Kx`.
pub fn min_mse_tp(moments: &PopulationMoments, factors: &FiniteFactors) -> f64 {
    mse_mean(moments, factors) * (1.0 - moments.rho * moments.rho)
}

/// Two-phase ratio-type member.
pub fn theory_t1d(input: &TheoryInput) -> Result<BiasMse> {
    let f3 = input.factors.f3()?;
    let m = input.cfg.m;
    let r1 = input.shape.r1;
    Ok(two_phase(
        &input.moments,
        input.factors.f1,
        f3,
        m * r1,
        m * (m + 1.0) * r1 * r1 / 2.0,
    ))
}

/// `q - gamma R2`, the linear coefficient of the two-phase exponential member.
pub fn l1_coefficient(input: &TheoryInput) -> f64 {
    input.cfg.q - input.cfg.gamma * input.shape.r2
}

/// Two-phase exponential member.
pub fn theory_t2d(input: &TheoryInput) -> Result<BiasMse> {
    let f3 = input.factors.f3()?;
    let q = input.cfg.q;
    let g = input.cfg.gamma;
    let r2 = input.shape.r2;
    let curvature = -(q * (q - 1.0) / 2.0 - q * g * r2 + g * (g + 2.0) * r2 * r2 / 2.0);
    Ok(two_phase(
        &input.moments,
        input.factors.f1,
        f3,
        l1_coefficient(input),
        curvature,
    ))
}

/// `h1 m R1 + h2 (q - gamma R2)`.
pub fn l2_coefficient(input: &TheoryInput, h: &[f64; 3]) -> f64 {
    h[1] * input.cfg.m * input.shape.r1 + h[2] * l1_coefficient(input)
}

/// Two-phase weighted combination.
pub fn theory_tpd(input: &TheoryInput, h: &[f64; 3]) -> Result<BiasMse> {
    let f3 = input.factors.f3()?;
    let b1 = theory_t1d(input)?.bias;
    let b2 = theory_t2d(input)?.bias;
    let m = &input.moments;
    let l2 = l2_coefficient(input, h);
    Ok(BiasMse {
        bias: h[1] * b1 + h[2] * b2,
        mse: m.ybar * m.ybar * (input.factors.f1 * m.cy * m.cy + f3 * input.cx2() * (l2 * l2 - 2.0 * l2 * m.kx)),
    })
}

/// Two-phase lower bound `Ybar^2 Cy^2 (f1 - f3 rho^2)`.
pub fn min_mse_tpd(moments: &PopulationMoments, factors: &FiniteFactors) -> Result<f64> {
    let f3 = factors.f3()?;
    Ok(moments.ybar * moments.ybar * moments.cy * moments.cy * (factors.f1 - f3 * moments.rho * moments.rho))
}

/// Classical ratio estimator (`alpha = 1`, `V1 = 1`).
pub fn theory_ratio(moments: &PopulationMoments, factors: &FiniteFactors) -> BiasMse {
    single_phase(moments, factors.f1, 1.0, 1.0)
}

/// Classical product estimator (`alpha = -1`, `V1 = 1`).
pub fn theory_product(moments: &PopulationMoments, factors: &FiniteFactors) -> BiasMse {
    single_phase(moments, factors.f1, -1.0, 0.0)
}

/// Exponential ratio-type estimator: `exp[-e1/(2 + e1)] = 1 - e1/2 + 3 e1^2 / 8 + ...`.
pub fn theory_exp_ratio(moments: &PopulationMoments, factors: &FiniteFactors) -> BiasMse {
    single_phase(moments, factors.f1, 0.5, 0.375)
}

/// Regression estimator with a fixed slope; linear in the sample means, so
/// these values are exact rather than first-order.
pub fn theory_regression(moments: &PopulationMoments, factors: &FiniteFactors, beta_coef: f64) -> BiasMse {
    let b = beta_coef;
    BiasMse {
        bias: 0.0,
        mse: factors.f1 * (moments.sy2 - 2.0 * b * moments.syx + b * b * moments.sx2),
    }
}

/// Percentage relative efficiency `100 mse_base / mse_est`.
pub fn pre_percent(mse_base: f64, mse_est: f64) -> Result<f64> {
    if mse_est.is_nan() || mse_est <= 0.0 || !mse_est.is_finite() {
        return Err(Error::ZeroMse);
    }
    Ok(100.0 * mse_base / mse_est)
}
