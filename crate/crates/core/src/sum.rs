use std::ops::{Add, AddAssign};

/// Neumaier's variant of Kahan summation.
///
/// Partial sums combine with `+`, so work split across threads can be
/// reduced in a fixed order without losing the compensation term.
#[derive(Debug, Default, Clone, Copy)]
pub struct NeumaierSum {
    s: f64,
    c: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sum(&self) -> f64 {
        self.s + self.c
    }
}

impl From<f64> for NeumaierSum {
    fn from(value: f64) -> Self {
        Self { s: value, c: 0.0 }
    }
}

impl AddAssign<f64> for NeumaierSum {
    fn add_assign(&mut self, rhs: f64) {
        let (s, c) = two_sum(self.s, rhs);
        self.s = s;
        self.c += c;
    }
}

impl Add<f64> for NeumaierSum {
    type Output = Self;

    fn add(mut self, rhs: f64) -> Self {
        self += rhs;
        self
    }
}

impl Add for NeumaierSum {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        let (s, c1) = two_sum(self.s, rhs.s);
        Self {
            s,
            c: self.c + rhs.c + c1,
        }
    }
}

impl std::iter::Sum<f64> for NeumaierSum {
    fn sum<I: Iterator<Item = f64>>(iter: I) -> Self {
        iter.fold(Self::new(), |acc, v| acc + v)
    }
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let c = if a.abs() >= b.abs() {
        (a - s) + b
    } else {
        (b - s) + a
    };
    (s, c)
}

/// Compensated sum of a slice.
pub fn compensated_sum(values: &[f64]) -> f64 {
    values.iter().copied().sum::<NeumaierSum>().sum()
}

/// Compensated arithmetic mean; `NaN` for an empty slice.
pub fn compensated_mean(values: &[f64]) -> f64 {
    compensated_sum(values) / values.len() as f64
}
