//! Finite populations of paired `(y, x)` values, their moments, and the
//! finite-population correction factors used by every MSE formula.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::{compensated_mean, NeumaierSum};

/// One population unit: study value `y` and auxiliary value `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    pub y: f64,
    pub x: f64,
}

impl Unit {
    pub fn new(y: f64, x: f64) -> Self {
        Self { y, x }
    }
}

/// An ordered list of at least three units with finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct FinitePopulation {
    units: Vec<Unit>,
}

impl FinitePopulation {
    pub fn new(units: Vec<Unit>) -> Result<Self> {
        if units.len() < 3 {
            return Err(Error::TooFewRows(units.len()));
        }
        for (i, u) in units.iter().enumerate() {
            if !u.y.is_finite() {
                return Err(Error::NonNumericCell { row: i + 1, column: "y" });
            }
            if !u.x.is_finite() {
                return Err(Error::NonNumericCell { row: i + 1, column: "x" });
            }
        }
        Ok(Self { units })
    }

    /// Builds a population from parallel `y` and `x` columns.
    pub fn from_columns(y: &[f64], x: &[f64]) -> Result<Self> {
        if y.len() != x.len() {
            return Err(Error::InvalidSample(format!(
                "column lengths differ: {} y values, {} x values",
                y.len(),
                x.len()
            )));
        }
        Self::new(y.iter().zip(x).map(|(&y, &x)| Unit { y, x }).collect())
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    /// Population size `N`.
    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.units.iter().map(|u| u.y).collect()
    }

    pub fn xs(&self) -> Vec<f64> {
        self.units.iter().map(|u| u.x).collect()
    }

    /// Returns a copy with every `y` multiplied by `c`.
    pub fn scale_y(&self, c: f64) -> Result<Self> {
        Self::new(
            self.units
                .iter()
                .map(|u| Unit { y: c * u.y, x: u.x })
                .collect(),
        )
    }
}

/// Parses a CSV stream with a header naming columns `y` and `x`
/// (case-insensitive, any order, extra columns ignored).
pub fn load_population<R: Read>(source: R) -> Result<FinitePopulation> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let find = |name: &'static str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or(Error::MissingColumn(name))
    };
    let y_col = find("y")?;
    let x_col = find("x")?;

    let mut units = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let cell = |col: usize, column: &'static str| -> Result<f64> {
            record
                .get(col)
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or(Error::NonNumericCell { row, column })
        };
        let y = cell(y_col, "y")?;
        let x = cell(x_col, "x")?;
        units.push(Unit { y, x });
    }
    FinitePopulation::new(units)
}

/// Writes the population as `y,x` CSV with shortest round-trip float formatting.
pub fn save_population<W: Write>(pop: &FinitePopulation, sink: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(["y", "x"])?;
    for u in pop.units() {
        writer.write_record([u.y.to_string(), u.x.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

/// Population parameters. Variances and covariance use divisor `N - 1`;
/// `beta2x` uses central moments with divisor `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationMoments {
    pub ybar: f64,
    pub xbar: f64,
    pub sy2: f64,
    pub sx2: f64,
    pub syx: f64,
    pub cy: f64,
    pub cx: f64,
    pub rho: f64,
    pub kx: f64,
    pub beta2x: f64,
    pub pop_size: usize,
}

impl PopulationMoments {
    /// Assembles a consistent moment set from relative parameters, for
    /// theory work without an underlying population.
    pub fn from_parameters(
        ybar: f64,
        xbar: f64,
        cy: f64,
        cx: f64,
        rho: f64,
        beta2x: f64,
        pop_size: usize,
    ) -> Self {
        let sy = cy * ybar;
        let sx = cx * xbar;
        Self {
            ybar,
            xbar,
            sy2: sy * sy,
            sx2: sx * sx,
            syx: rho * sy * sx,
            cy,
            cx,
            rho,
            kx: rho * cy / cx,
            beta2x,
            pop_size,
        }
    }

    pub fn sy(&self) -> f64 {
        self.sy2.sqrt()
    }

    pub fn sx(&self) -> f64 {
        self.sx2.sqrt()
    }

    /// Population regression slope of `y` on `x`.
    pub fn slope(&self) -> f64 {
        self.syx / self.sx2
    }
}

pub fn compute_moments(pop: &FinitePopulation) -> Result<PopulationMoments> {
    let units = pop.units();
    let first = units[0];
    if units.iter().all(|u| u.x == first.x) {
        return Err(Error::DegenerateVariance("x"));
    }
    if units.iter().all(|u| u.y == first.y) {
        return Err(Error::DegenerateVariance("y"));
    }

    let n = units.len() as f64;
    let ybar = compensated_mean(&pop.ys());
    let xbar = compensated_mean(&pop.xs());
    if ybar == 0.0 {
        return Err(Error::ZeroMean("y"));
    }
    if xbar == 0.0 {
        return Err(Error::ZeroMean("x"));
    }

    let mut syy = NeumaierSum::new();
    let mut sxx = NeumaierSum::new();
    let mut sxy = NeumaierSum::new();
    let mut sx4 = NeumaierSum::new();
    for u in units {
        let dy = u.y - ybar;
        let dx = u.x - xbar;
        syy += dy * dy;
        sxx += dx * dx;
        sxy += dy * dx;
        sx4 += dx * dx * dx * dx;
    }
    let sy2 = syy.sum() / (n - 1.0);
    let sx2 = sxx.sum() / (n - 1.0);
    let syx = sxy.sum() / (n - 1.0);
    let m2 = sxx.sum() / n;
    let m4 = sx4.sum() / n;

    let cy = sy2.sqrt() / ybar;
    let cx = sx2.sqrt() / xbar;
    Ok(PopulationMoments {
        ybar,
        xbar,
        sy2,
        sx2,
        syx,
        cy,
        cx,
        rho: syx / (sy2 * sx2).sqrt(),
        kx: syx * xbar / (sx2 * ybar),
        beta2x: m4 / (m2 * m2),
        pop_size: units.len(),
    })
}

/// Finite-population correction factors for a single- or two-phase design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteFactors {
    pub pop_size: usize,
    pub n: usize,
    pub f1: f64,
    /// Sampling fraction `n / N`.
    pub f: f64,
    pub g: f64,
    n_prime: Option<usize>,
    f2: Option<f64>,
    f3: Option<f64>,
}

impl FiniteFactors {
    /// `f1 = 1/n - 1/N`; with a first phase of size `n'`, `f2 = 1/n' - 1/N`,
    /// `f3 = 1/n - 1/n'` and `f1` is taken as `f2 + f3`.
    pub fn new(pop_size: usize, n: usize, n_prime: Option<usize>) -> Result<Self> {
        let bad = || Error::InvalidSizes {
            pop_size,
            n,
            n_prime,
        };
        if n < 2 || n > pop_size {
            return Err(bad());
        }
        let inv_n = 1.0 / n as f64;
        let inv_pop = 1.0 / pop_size as f64;
        let (f1, f2, f3) = match n_prime {
            Some(np) => {
                if np < n || np > pop_size {
                    return Err(bad());
                }
                let inv_np = 1.0 / np as f64;
                let f2 = inv_np - inv_pop;
                let f3 = inv_n - inv_np;
                (f2 + f3, Some(f2), Some(f3))
            }
            None => (inv_n - inv_pop, None, None),
        };
        let f = n as f64 / pop_size as f64;
        Ok(Self {
            pop_size,
            n,
            f1,
            f,
            g: 1.0 - f,
            n_prime,
            f2,
            f3,
        })
    }

    pub fn n_prime(&self) -> Option<usize> {
        self.n_prime
    }

    pub fn is_two_phase(&self) -> bool {
        self.n_prime.is_some()
    }

    pub fn f2(&self) -> Result<f64> {
        self.f2.ok_or(Error::MissingFirstPhase)
    }

    pub fn f3(&self) -> Result<f64> {
        self.f3.ok_or(Error::MissingFirstPhase)
    }
}

/// Shorthand for [`FiniteFactors::new`].
pub fn finite_factors(pop_size: usize, n: usize, n_prime: Option<usize>) -> Result<FiniteFactors> {
    FiniteFactors::new(pop_size, n, n_prime)
}

/// Recipe for a bivariate-normal-shaped population with positive `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    #[serde(alias = "N")]
    pub size: usize,
    pub target_rho: f64,
    pub mean_y: f64,
    pub mean_x: f64,
    pub cv_y: f64,
    pub cv_x: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub const MAX_ATTEMPTS: usize = 100;
    /// Populations at least this large must hit the correlation target.
    pub const RHO_CHECK_MIN_SIZE: usize = 200;
    pub const RHO_TOLERANCE: f64 = 0.1;

    fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidSyntheticSpec(msg.to_string()));
        if self.size < 10 {
            return fail("N must be at least 10");
        }
        if !(self.target_rho > -1.0 && self.target_rho < 1.0) {
            return fail("target_rho must lie strictly inside (-1, 1)");
        }
        if !(self.mean_y > 0.0 && self.mean_x > 0.0 && self.mean_y.is_finite() && self.mean_x.is_finite()) {
            return fail("means must be positive and finite");
        }
        if !(self.cv_y > 0.0 && self.cv_x > 0.0 && self.cv_y.is_finite() && self.cv_x.is_finite()) {
            return fail("coefficients of variation must be positive and finite");
        }
        Ok(())
    }
}

/// Draws `x = X(1 + cv_x z1)` and `y = Y(1 + cv_y(rho z1 + sqrt(1 - rho^2) z2))`
/// from a seeded ChaCha stream, redrawing populations containing a
/// non-positive `x` (or, for large `N`, missing the correlation target).
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<FinitePopulation> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let rho = spec.target_rho;
    let resid = (1.0 - rho * rho).sqrt();

    for _ in 0..SyntheticSpec::MAX_ATTEMPTS {
        let units: Vec<Unit> = (0..spec.size)
            .map(|_| {
                let z1: f64 = StandardNormal.sample(&mut rng);
                let z2: f64 = StandardNormal.sample(&mut rng);
                Unit {
                    y: spec.mean_y * (1.0 + spec.cv_y * (rho * z1 + resid * z2)),
                    x: spec.mean_x * (1.0 + spec.cv_x * z1),
                }
            })
            .collect();
        if units.iter().any(|u| u.x <= 0.0) {
            continue;
        }
        let pop = FinitePopulation::new(units)?;
        if spec.size >= SyntheticSpec::RHO_CHECK_MIN_SIZE {
            match compute_moments(&pop) {
                Ok(m) if (m.rho - rho).abs() <= SyntheticSpec::RHO_TOLERANCE => {}
                _ => continue,
            }
        }
        return Ok(pop);
    }
    Err(Error::TargetUnreachable(SyntheticSpec::MAX_ATTEMPTS))
}
