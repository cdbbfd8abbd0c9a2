//! Point estimators of the population mean: the sample mean, classical
//! ratio/product/exponential baselines, the two tunable families, their
//! weighted combination, and the two-phase counterparts in which the
//! first-phase mean of `x` stands in for the unknown population mean.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::{FiniteFactors, PopulationMoments, Unit};
use crate::sum::compensated_mean;

/// Summary statistics an estimator needs from a single-phase sample.
pub trait SampleStats {
    fn ybar(&self) -> f64;
    fn xbar(&self) -> f64;
}

/// Summary statistics of a nested two-phase sample.
pub trait TwoPhaseStats: SampleStats {
    /// Mean of `x` over the first-phase sample.
    fn xbar_first(&self) -> f64;
}

/// Sample means without the underlying units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMeans {
    pub ybar: f64,
    pub xbar: f64,
}

impl SampleStats for SampleMeans {
    fn ybar(&self) -> f64 {
        self.ybar
    }
    fn xbar(&self) -> f64 {
        self.xbar
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPhaseMeans {
    pub ybar: f64,
    pub xbar: f64,
    pub xbar_first: f64,
}

impl SampleStats for TwoPhaseMeans {
    fn ybar(&self) -> f64 {
        self.ybar
    }
    fn xbar(&self) -> f64 {
        self.xbar
    }
}

impl TwoPhaseStats for TwoPhaseMeans {
    fn xbar_first(&self) -> f64 {
        self.xbar_first
    }
}

/// Units drawn without replacement; at least two, all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    units: Vec<Unit>,
    ybar: f64,
    xbar: f64,
}

impl Sample {
    pub fn new(units: Vec<Unit>) -> Result<Self> {
        if units.len() < 2 {
            return Err(Error::InvalidSample(format!(
                "need at least 2 units, got {}",
                units.len()
            )));
        }
        if units.iter().any(|u| !u.y.is_finite() || !u.x.is_finite()) {
            return Err(Error::InvalidSample("non-finite value".into()));
        }
        let ys: Vec<f64> = units.iter().map(|u| u.y).collect();
        let xs: Vec<f64> = units.iter().map(|u| u.x).collect();
        Ok(Self {
            ybar: compensated_mean(&ys),
            xbar: compensated_mean(&xs),
            units,
        })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(y, x)| Unit { y, x }).collect())
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn scale_y(&self, c: f64) -> Result<Self> {
        Self::new(self.units.iter().map(|u| Unit::new(c * u.y, u.x)).collect())
    }
}

impl SampleStats for Sample {
    fn ybar(&self) -> f64 {
        self.ybar
    }
    fn xbar(&self) -> f64 {
        self.xbar
    }
}

/// First-phase `x` values plus a second-phase sample nested inside them.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhaseSample {
    first_phase_x: Vec<f64>,
    second_phase: Sample,
    xbar_first: f64,
}

impl TwoPhaseSample {
    pub fn new(first_phase_x: Vec<f64>, second_phase: Sample) -> Result<Self> {
        if second_phase.len() > first_phase_x.len() {
            return Err(Error::InvalidSample(format!(
                "second phase ({}) larger than first phase ({})",
                second_phase.len(),
                first_phase_x.len()
            )));
        }
        if first_phase_x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSample("non-finite first-phase value".into()));
        }
        let mut outer = first_phase_x.clone();
        let mut inner: Vec<f64> = second_phase.units().iter().map(|u| u.x).collect();
        outer.sort_by(f64::total_cmp);
        inner.sort_by(f64::total_cmp);
        let mut it = outer.iter();
        for v in &inner {
            if !it.by_ref().any(|o| o == v) {
                return Err(Error::InvalidSample(format!(
                    "second-phase x value {v} is not part of the first phase"
                )));
            }
        }
        Ok(Self {
            xbar_first: compensated_mean(&first_phase_x),
            first_phase_x,
            second_phase,
        })
    }

    pub fn first_phase_x(&self) -> &[f64] {
        &self.first_phase_x
    }

    pub fn second_phase(&self) -> &Sample {
        &self.second_phase
    }
}

impl SampleStats for TwoPhaseSample {
    fn ybar(&self) -> f64 {
        self.second_phase.ybar
    }
    fn xbar(&self) -> f64 {
        self.second_phase.xbar
    }
}

impl TwoPhaseStats for TwoPhaseSample {
    fn xbar_first(&self) -> f64 {
        self.xbar_first
    }
}

/// The `K2` constant, restricted to `+1` or `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

impl TryFrom<i8> for Sign {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            other => Err(format!("K2 must be +1 or -1, got {other}")),
        }
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        match s {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

impl FromStr for Sign {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "1" | "+1" => Ok(Sign::Plus),
            "-1" => Ok(Sign::Minus),
            other => Err(format!("K2 must be +1 or -1, got `{other}`")),
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+1",
            Sign::Minus => "-1",
        })
    }
}

/// Known population quantities usable as `K` constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParamAtom {
    #[serde(rename = "unity")]
    Unity,
    #[serde(rename = "C_x")]
    Cx,
    #[serde(rename = "beta2_x")]
    Beta2x,
    #[serde(rename = "rho_yx")]
    RhoYx,
    #[serde(rename = "S_x")]
    Sx,
    #[serde(rename = "f")]
    SamplingFraction,
    #[serde(rename = "g")]
    Complement,
    #[serde(rename = "K_x")]
    Kx,
    #[serde(rename = "N")]
    PopSize,
    #[serde(rename = "n")]
    SampleSize,
    #[serde(rename = "Xbar")]
    Xbar,
    #[serde(rename = "N_Xbar")]
    PopTotalX,
}

impl ParamAtom {
    pub const ALL: [ParamAtom; 12] = [
        ParamAtom::Unity,
        ParamAtom::Cx,
        ParamAtom::Beta2x,
        ParamAtom::RhoYx,
        ParamAtom::Sx,
        ParamAtom::SamplingFraction,
        ParamAtom::Complement,
        ParamAtom::Kx,
        ParamAtom::PopSize,
        ParamAtom::SampleSize,
        ParamAtom::Xbar,
        ParamAtom::PopTotalX,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamAtom::Unity => "unity",
            ParamAtom::Cx => "C_x",
            ParamAtom::Beta2x => "beta2_x",
            ParamAtom::RhoYx => "rho_yx",
            ParamAtom::Sx => "S_x",
            ParamAtom::SamplingFraction => "f",
            ParamAtom::Complement => "g",
            ParamAtom::Kx => "K_x",
            ParamAtom::PopSize => "N",
            ParamAtom::SampleSize => "n",
            ParamAtom::Xbar => "Xbar",
            ParamAtom::PopTotalX => "N_Xbar",
        }
    }

    /// Evaluates the atom once against a population and design.
    pub fn resolve(self, moments: &PopulationMoments, factors: &FiniteFactors) -> f64 {
        match self {
            ParamAtom::Unity => 1.0,
            ParamAtom::Cx => moments.cx,
            ParamAtom::Beta2x => moments.beta2x,
            ParamAtom::RhoYx => moments.rho,
            ParamAtom::Sx => moments.sx(),
            ParamAtom::SamplingFraction => factors.f,
            ParamAtom::Complement => factors.g,
            ParamAtom::Kx => moments.kx,
            ParamAtom::PopSize => moments.pop_size as f64,
            ParamAtom::SampleSize => factors.n as f64,
            ParamAtom::Xbar => moments.xbar,
            ParamAtom::PopTotalX => moments.pop_size as f64 * moments.xbar,
        }
    }
}

impl FromStr for ParamAtom {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        ParamAtom::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown parameter atom `{s}`"))
    }
}

impl fmt::Display for ParamAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A `K` constant given either as a named atom or as a literal number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KValue {
    Atom(ParamAtom),
    Literal(f64),
}

impl KValue {
    pub fn resolve(self, moments: &PopulationMoments, factors: &FiniteFactors) -> f64 {
        match self {
            KValue::Atom(a) => a.resolve(moments, factors),
            KValue::Literal(v) => v,
        }
    }
}

impl FromStr for KValue {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if let Ok(atom) = s.parse::<ParamAtom>() {
            return Ok(KValue::Atom(atom));
        }
        match s.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(KValue::Literal(v)),
            _ => Err(format!("`{s}` is neither a parameter atom nor a finite number")),
        }
    }
}

impl fmt::Display for KValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KValue::Atom(a) => a.fmt(f),
            KValue::Literal(v) => write!(f, "{v}"),
        }
    }
}

/// Tuning constants of both families. Atoms are already resolved to numbers.
///
/// `alpha` drives the ratio-type family, `beta`/`lambda` the exponential
/// family; `m`, `q`, `gamma` are their two-phase analogues.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyConfig {
    pub k1: f64,
    pub k2: Sign,
    pub k3: f64,
    pub k4: f64,
    pub k5: f64,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub m: f64,
    pub q: f64,
    pub gamma: f64,
}

impl Default for FamilyConfig {
    /// Ratio estimator for the first family, `ybar (2 - xbar/Xbar)` for the second.
    fn default() -> Self {
        Self {
            k1: 1.0,
            k2: Sign::Plus,
            k3: 0.0,
            k4: 1.0,
            k5: 0.0,
            alpha: 1.0,
            beta: 1.0,
            lambda: 0.0,
            m: 1.0,
            q: 1.0,
            gamma: 0.0,
        }
    }
}

impl FamilyConfig {
    fn k2k3(&self) -> f64 {
        self.k2.value() * self.k3
    }

    /// Checks the constants against a population mean of `x` and derives
    /// the shape factors.
    pub fn shape(&self, pop_xbar: f64) -> Result<ShapeFactors> {
        let values = [
            self.k1, self.k3, self.k4, self.k5, self.alpha, self.beta, self.lambda, self.m,
            self.q, self.gamma,
        ];
        if values.iter().any(|v| !v.is_finite()) || !pop_xbar.is_finite() {
            return Err(Error::InvalidConfig("non-finite constant".into()));
        }
        let d1 = self.k1 * pop_xbar + self.k2k3();
        if d1 == 0.0 {
            return Err(Error::DegenerateDenominator("K1*Xbar + K2*K3"));
        }
        let d2 = self.k4 * pop_xbar + self.k5;
        if d2 == 0.0 {
            return Err(Error::DegenerateDenominator("K4*Xbar + K5"));
        }
        let v1 = self.k1 * pop_xbar / d1;
        let v2 = self.k4 * pop_xbar / d2;
        Ok(ShapeFactors {
            v1,
            v2,
            r1: v1,
            r2: v2 / 2.0,
        })
    }

    /// Like [`shape`](Self::shape) but additionally rejects brackets that
    /// are non-positive where a non-integer exponent is applied to them.
    pub fn validate_for(&self, pop_xbar: f64) -> Result<ShapeFactors> {
        let shape = self.shape(pop_xbar)?;
        let d1 = self.k1 * pop_xbar + self.k2k3();
        if (!is_integer(self.alpha) || !is_integer(self.m)) && d1 <= 0.0 {
            return Err(Error::NonPositiveBase("K1*Xbar + K2*K3"));
        }
        let d2 = self.k4 * pop_xbar + self.k5;
        if (self.lambda != 0.0 || self.gamma != 0.0) && d2 <= 0.0 {
            return Err(Error::NonPositiveBase("K4*Xbar + K5"));
        }
        Ok(shape)
    }
}

/// Relative position of the population mean inside each family's bracket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeFactors {
    pub v1: f64,
    pub v2: f64,
    pub r1: f64,
    /// Half of `v2`.
    pub r2: f64,
}

fn is_integer(v: f64) -> bool {
    v.fract() == 0.0 && v.abs() <= i32::MAX as f64
}

/// `(num/den)^exponent`. Integer exponents go through `powi` (any nonzero
/// base) and negative ones invert the fraction instead of the power, so
/// `exponent = -1` yields exactly `den/num`. Non-integer exponents need
/// both terms positive.
fn ratio_power(num: f64, den: f64, exponent: f64, what: &'static str) -> Result<f64> {
    if exponent == 0.0 {
        return Ok(1.0);
    }
    if num == 0.0 || den == 0.0 {
        return Err(Error::DegenerateDenominator(what));
    }
    if is_integer(exponent) {
        let e = exponent as i32;
        return Ok(if e > 0 {
            (num / den).powi(e)
        } else {
            (den / num).powi(-e)
        });
    }
    if num <= 0.0 || den <= 0.0 {
        return Err(Error::NonPositiveBase(what));
    }
    Ok((num / den).powf(exponent))
}

/// Shared body of the ratio-type family: `ybar ((K1 a + K2K3)/(K1 xbar + K2K3))^exponent`
/// where `a` is the known (or first-phase) mean of `x`.
fn ratio_family(ybar: f64, anchor: f64, xbar: f64, cfg: &FamilyConfig, exponent: f64) -> Result<f64> {
    let k2k3 = cfg.k2k3();
    let num = cfg.k1 * anchor + k2k3;
    let den = cfg.k1 * xbar + k2k3;
    if den == 0.0 {
        return Err(Error::DegenerateDenominator("K1*xbar + K2*K3"));
    }
    Ok(ybar * ratio_power(num, den, exponent, "ratio-type bracket")?)
}

/// Shared body of the exponential family:
/// `ybar {2 - (xbar/a)^power exp[coef ((K4 a + K5) - (K4 xbar + K5)) / ((K4 a + K5) + (K4 xbar + K5))]}`.
fn exp_family(ybar: f64, anchor: f64, xbar: f64, cfg: &FamilyConfig, power: f64, coef: f64) -> Result<f64> {
    let scale = ratio_power(xbar, anchor, power, "xbar/Xbar")?;
    let tilt = if coef == 0.0 {
        1.0
    } else {
        let a = cfg.k4 * anchor + cfg.k5;
        let b = cfg.k4 * xbar + cfg.k5;
        if a + b == 0.0 {
            return Err(Error::DegenerateDenominator("exponential term"));
        }
        if a <= 0.0 || b <= 0.0 {
            return Err(Error::NonPositiveBase("K4*xbar + K5"));
        }
        (coef * (a - b) / (a + b)).exp()
    };
    Ok(ybar * (2.0 - scale * tilt))
}

fn check_normalized(w: &[f64; 3]) -> Result<()> {
    let sum = w[0] + w[1] + w[2];
    let scale = w.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    if !sum.is_finite() || (sum - 1.0).abs() > 1e-9 * scale {
        return Err(Error::WeightsNotNormalized(sum));
    }
    Ok(())
}

/// Sample mean of `y`.
pub fn est_mean<S: SampleStats + ?Sized>(s: &S) -> f64 {
    s.ybar()
}

/// Classical ratio estimator `ybar Xbar / xbar`.
pub fn est_ratio<S: SampleStats + ?Sized>(s: &S, pop_xbar: f64) -> Result<f64> {
    let xbar = s.xbar();
    if xbar == 0.0 {
        return Err(Error::ZeroSampleMeanX);
    }
    Ok(s.ybar() * (pop_xbar / xbar))
}

/// Classical product estimator `ybar xbar / Xbar`.
pub fn est_product<S: SampleStats + ?Sized>(s: &S, pop_xbar: f64) -> Result<f64> {
    if pop_xbar == 0.0 {
        return Err(Error::DegenerateDenominator("Xbar"));
    }
    Ok(s.ybar() * (s.xbar() / pop_xbar))
}

/// Exponential ratio-type estimator `ybar exp[(Xbar - xbar)/(Xbar + xbar)]`.
pub fn est_exp_ratio<S: SampleStats + ?Sized>(s: &S, pop_xbar: f64) -> Result<f64> {
    let denom = pop_xbar + s.xbar();
    if denom == 0.0 {
        return Err(Error::DegenerateDenominator("Xbar + xbar"));
    }
    Ok(s.ybar() * ((pop_xbar - s.xbar()) / denom).exp())
}

/// Ratio-type family member with exponent `alpha`.
pub fn est_t1<S: SampleStats + ?Sized>(s: &S, pop_xbar: f64, cfg: &FamilyConfig) -> Result<f64> {
    ratio_family(s.ybar(), pop_xbar, s.xbar(), cfg, cfg.alpha)
}

/// Exponential family member with power `beta` and exponential coefficient `lambda`.
pub fn est_t2<S: SampleStats + ?Sized>(s: &S, pop_xbar: f64, cfg: &FamilyConfig) -> Result<f64> {
    exp_family(s.ybar(), pop_xbar, s.xbar(), cfg, cfg.beta, cfg.lambda)
}

/// Weighted combination `w0 ybar + w1 t1 + w2 t2`; weights must sum to one.
/// Members with zero weight are not evaluated.
pub fn est_tp<S: SampleStats + ?Sized>(
    s: &S,
    pop_xbar: f64,
    cfg: &FamilyConfig,
    w: &[f64; 3],
) -> Result<f64> {
    check_normalized(w)?;
    let mut total = w[0] * s.ybar();
    if w[1] != 0.0 {
        total += w[1] * est_t1(s, pop_xbar, cfg)?;
    }
    if w[2] != 0.0 {
        total += w[2] * est_t2(s, pop_xbar, cfg)?;
    }
    Ok(total)
}

/// Linear regression estimator `ybar + b (Xbar - xbar)` with a fixed slope.
pub fn est_regression<S: SampleStats + ?Sized>(s: &S, pop_xbar: f64, beta_coef: f64) -> f64 {
    s.ybar() + beta_coef * (pop_xbar - s.xbar())
}

/// Two-phase ratio-type member with exponent `m`.
pub fn est_t1d<S: TwoPhaseStats + ?Sized>(s: &S, cfg: &FamilyConfig) -> Result<f64> {
    ratio_family(s.ybar(), s.xbar_first(), s.xbar(), cfg, cfg.m)
}

/// Two-phase exponential member with power `q` and coefficient `gamma`.
pub fn est_t2d<S: TwoPhaseStats + ?Sized>(s: &S, cfg: &FamilyConfig) -> Result<f64> {
    exp_family(s.ybar(), s.xbar_first(), s.xbar(), cfg, cfg.q, cfg.gamma)
}

/// Two-phase weighted combination `h0 ybar + h1 t1d + h2 t2d`.
pub fn est_tpd<S: TwoPhaseStats + ?Sized>(s: &S, cfg: &FamilyConfig, h: &[f64; 3]) -> Result<f64> {
    check_normalized(h)?;
    let mut total = h[0] * s.ybar();
    if h[1] != 0.0 {
        total += h[1] * est_t1d(s, cfg)?;
    }
    if h[2] != 0.0 {
        total += h[2] * est_t2d(s, cfg)?;
    }
    Ok(total)
}
