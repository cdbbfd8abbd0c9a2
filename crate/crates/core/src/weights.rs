//! Weights that make the combined estimator reach the minimum first-order
//! MSE while cancelling its first-order bias.
//!
//! Three linear conditions fix the three weights:
//!
//! ```text
//! [ 1   1        1       ] [w0]   [ 1  ]
//! [ 0   c1       c2      ] [w1] = [ Kx ]
//! [ 0   B(t1)    B(t2)   ] [w2]   [ 0  ]
//! ```
//!
//! where `c1`, `c2` are the members' linear coefficients. The system is
//! solved directly and the constraints are re-checked on the result.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::theory::{
    l1_coefficient, l2_coefficient, q_coefficient, theory_t1, theory_t1d, theory_t2, theory_t2d,
    TheoryInput,
};

/// Pivots below this multiple of the largest (equilibrated) row norm mark
/// the system as singular.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-12;

pub const MAX_RESIDUAL_SUM: f64 = 1e-12;
pub const MAX_RESIDUAL_OPT: f64 = 1e-10;
/// Scaled by `max(1, |B(t1)|, |B(t2)|)`.
pub const MAX_RESIDUAL_BIAS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSolution {
    pub weights: [f64; 3],
    /// `|w0 + w1 + w2 - 1|`
    pub residual_sum: f64,
    /// `|Q - Kx|` (or `|L2 - Kx|` in two-phase designs)
    pub residual_opt: f64,
    /// `|w1 B(t1) + w2 B(t2)|`
    pub residual_bias: f64,
    /// Largest over smallest pivot magnitude after row equilibration.
    pub condition_estimate: f64,
}

/// Result of [`solve_3x3`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solved3 {
    pub x: [f64; 3],
    pub condition_estimate: f64,
}

/// Dense 3x3 solve: rows are scaled to unit max-norm, then eliminated with
/// partial pivoting, followed by one step of iterative refinement.
/// Returns `None` when the smallest pivot falls below
/// [`SINGULAR_PIVOT_RATIO`] times the largest row norm.
#[allow(clippy::needless_range_loop)]
pub fn solve_3x3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<Solved3> {
    let mut m = a;
    let mut rhs = b;
    for i in 0..3 {
        let scale = m[i].iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if scale == 0.0 || !scale.is_finite() {
            return None;
        }
        for v in m[i].iter_mut() {
            *v /= scale;
        }
        rhs[i] /= scale;
    }
    let scaled = m;
    let scaled_rhs = rhs;
    let max_row_norm = scaled
        .iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0f64, f64::max);

    let mut perm = [0usize, 1, 2];
    let mut pivots = [0.0f64; 3];
    for col in 0..3 {
        let p = (col..3)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .expect("non-empty range");
        m.swap(col, p);
        perm.swap(col, p);
        let pivot = m[col][col];
        pivots[col] = pivot.abs();
        if pivot.abs() < SINGULAR_PIVOT_RATIO * max_row_norm {
            return None;
        }
        for r in (col + 1)..3 {
            let factor = m[r][col] / pivot;
            m[r][col] = factor;
            for c in (col + 1)..3 {
                m[r][c] -= factor * m[col][c];
            }
        }
    }
    let lu = m;
    let solve = |rhs: &[f64; 3]| -> [f64; 3] {
        let mut y = [rhs[perm[0]], rhs[perm[1]], rhs[perm[2]]];
        for r in 1..3 {
            for c in 0..r {
                y[r] -= lu[r][c] * y[c];
            }
        }
        let mut x = [0.0; 3];
        for r in (0..3).rev() {
            let mut acc = y[r];
            for c in (r + 1)..3 {
                acc -= lu[r][c] * x[c];
            }
            x[r] = acc / lu[r][r];
        }
        x
    };
    let mut x = solve(&scaled_rhs);
    let mut residual = [0.0; 3];
    for i in 0..3 {
        residual[i] = scaled_rhs[i] - (0..3).map(|j| scaled[i][j] * x[j]).sum::<f64>();
    }
    let dx = solve(&residual);
    for i in 0..3 {
        x[i] += dx[i];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let max_pivot = pivots.iter().copied().fold(0.0f64, f64::max);
    let min_pivot = pivots.iter().copied().fold(f64::INFINITY, f64::min);
    Some(Solved3 {
        x,
        condition_estimate: max_pivot / min_pivot,
    })
}

fn solve_constrained(row_opt: [f64; 3], row_bias: [f64; 3], kx: f64) -> Result<WeightSolution> {
    let solved = solve_3x3([[1.0, 1.0, 1.0], row_opt, row_bias], [1.0, kx, 0.0])
        .ok_or(Error::SingularSystem { row_opt, row_bias })?;
    let w = solved.x;
    let residual_sum = (w[0] + w[1] + w[2] - 1.0).abs();
    let residual_opt = (row_opt[1] * w[1] + row_opt[2] * w[2] - kx).abs();
    let residual_bias = (row_bias[1] * w[1] + row_bias[2] * w[2]).abs();
    let bias_scale = 1f64.max(row_bias[1].abs()).max(row_bias[2].abs());
    if !(residual_sum <= MAX_RESIDUAL_SUM
        && residual_opt <= MAX_RESIDUAL_OPT
        && residual_bias <= MAX_RESIDUAL_BIAS * bias_scale)
    {
        return Err(Error::ResidualTooLarge {
            sum: residual_sum,
            opt: residual_opt,
            bias: residual_bias,
        });
    }
    Ok(WeightSolution {
        weights: w,
        residual_sum,
        residual_opt,
        residual_bias,
        condition_estimate: solved.condition_estimate,
    })
}

/// Single-phase weights `(w0, w1, w2)`.
pub fn solve_weights(input: &TheoryInput) -> Result<WeightSolution> {
    let cfg = &input.cfg;
    let row_opt = [
        0.0,
        cfg.alpha * input.shape.v1,
        cfg.beta - cfg.lambda * input.shape.v2 / 2.0,
    ];
    let row_bias = [0.0, theory_t1(input).bias, theory_t2(input).bias];
    let sol = solve_constrained(row_opt, row_bias, input.moments.kx)?;
    debug_assert!((q_coefficient(input, &sol.weights) - input.moments.kx).abs() <= MAX_RESIDUAL_OPT * 2.0);
    Ok(sol)
}

/// Two-phase weights `(h0, h1, h2)`; needs a first-phase size in the factors.
pub fn solve_weights_two_phase(input: &TheoryInput) -> Result<WeightSolution> {
    let row_opt = [0.0, input.cfg.m * input.shape.r1, l1_coefficient(input)];
    let row_bias = [0.0, theory_t1d(input)?.bias, theory_t2d(input)?.bias];
    let sol = solve_constrained(row_opt, row_bias, input.moments.kx)?;
    debug_assert!((l2_coefficient(input, &sol.weights) - input.moments.kx).abs() <= MAX_RESIDUAL_OPT * 2.0);
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::FamilyConfig;
    use crate::population::{finite_factors, PopulationMoments};
    use crate::theory::{min_mse_tp, min_mse_tpd, theory_tp, theory_tpd};

    fn moments(kx: f64) -> PopulationMoments {
        let cx = (3.0f64 / 7.0).sqrt();
        PopulationMoments::from_parameters(4.0, 7.0 / 3.0, 0.5, cx, kx * cx / 0.5, 1.5, 100)
    }

    fn input(kx: f64, cfg: FamilyConfig, n_prime: Option<usize>) -> TheoryInput {
        let n = if n_prime.is_some() { 10 } else { 20 };
        TheoryInput::new(moments(kx), finite_factors(100, n, n_prime).unwrap(), cfg).unwrap()
    }

    #[test]
    fn hand_solved_fixture() {
        let sol = solve_weights(&input(0.75, FamilyConfig::default(), None)).unwrap();
        let expected = [0.25, 0.5625, 0.1875];
        for (w, e) in sol.weights.iter().zip(expected) {
            assert!((w - e).abs() < 1e-12, "{:?}", sol.weights);
        }
        assert!(sol.condition_estimate >= 1.0);
    }

    #[test]
    fn zero_kx_gives_sample_mean() {
        let sol = solve_weights(&input(0.0, FamilyConfig::default(), None)).unwrap();
        assert_eq!(sol.weights, [1.0, 0.0, 0.0]);
        let sol = solve_weights_two_phase(&input(0.0, FamilyConfig { gamma: 0.5, ..FamilyConfig::default() }, Some(40))).unwrap();
        assert_eq!(sol.weights, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn dependent_members_are_singular() {
        // beta = -alpha makes t2 = 2 ybar - t1, an affine copy of t1.
        let cfg = FamilyConfig { beta: -1.0, ..FamilyConfig::default() };
        match solve_weights(&input(0.75, cfg, None)) {
            Err(Error::SingularSystem { row_opt, row_bias }) => {
                assert_eq!(row_opt, [0.0, 1.0, -1.0]);
                assert!((row_bias[1] + row_bias[2]).abs() < 1e-15);
            }
            other => panic!("expected singular system, got {other:?}"),
        }
        let vanishing = FamilyConfig { alpha: 0.0, beta: 0.0, lambda: 0.0, ..FamilyConfig::default() };
        assert!(matches!(solve_weights(&input(0.75, vanishing, None)), Err(Error::SingularSystem { .. })));
    }

    #[test]
    fn two_phase_singular_when_row_vanishes() {
        // m = 0 and q = gamma R2 (R2 = 1/2 with K4 = 1, K5 = 0)
        let cfg = FamilyConfig { m: 0.0, q: 0.5, gamma: 1.0, ..FamilyConfig::default() };
        assert!(matches!(
            solve_weights_two_phase(&input(0.75, cfg, Some(40))),
            Err(Error::SingularSystem { .. })
        ));
    }

    #[test]
    fn two_phase_collapses_to_single_phase() {
        let cfg = FamilyConfig::default();
        let single = solve_weights(&input(0.75, cfg, None)).unwrap();
        let census = solve_weights_two_phase(&input(0.75, cfg, Some(100))).unwrap();
        for (a, b) in single.weights.iter().zip(census.weights) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn solved_weights_reach_the_bounds() {
        let cfg = FamilyConfig { lambda: 0.6, k5: 2.0, alpha: 1.3, ..FamilyConfig::default() };
        let inp = input(0.6, cfg, None);
        let w = solve_weights(&inp).unwrap().weights;
        let r = theory_tp(&inp, &w);
        assert!(r.bias.abs() < 1e-12);
        let floor = min_mse_tp(&inp.moments, &inp.factors);
        assert!((r.mse - floor).abs() <= 1e-10 * floor);

        let inp = input(0.6, cfg, Some(40));
        let h = solve_weights_two_phase(&inp).unwrap().weights;
        let r = theory_tpd(&inp, &h).unwrap();
        assert!(r.bias.abs() < 1e-12);
        let floor = min_mse_tpd(&inp.moments, &inp.factors).unwrap();
        assert!((r.mse - floor).abs() <= 1e-10 * floor);
    }

    #[test]
    fn bias_row_scaling_does_not_move_solution() {
        let a = [[1.0, 1.0, 1.0], [0.0, 1.0, 1.0], [0.0, 0.0171, -0.0514]];
        let base = solve_3x3(a, [1.0, 0.75, 0.0]).unwrap().x;
        for c in [1e-9, 3.7, -250.0, 1e12] {
            let mut s = a;
            s[2] = [0.0, c * a[2][1], c * a[2][2]];
            let x = solve_3x3(s, [1.0, 0.75, 0.0]).unwrap().x;
            for (p, q) in base.iter().zip(x) {
                assert!((p - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn general_solve_with_pivoting() {
        let a = [[0.0, 2.0, 1.0], [1.0, 0.0, 0.0], [3.0, 1.0, 4.0]];
        let x = solve_3x3(a, [5.0, 1.0, 16.0]).unwrap().x;
        let expected = [1.0, 1.0, 3.0];
        for (v, e) in x.iter().zip(expected) {
            assert!((v - e).abs() < 1e-14);
        }
        assert!(solve_3x3([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 1.0, 1.0]], [1.0, 2.0, 3.0]).is_none());
    }
}
