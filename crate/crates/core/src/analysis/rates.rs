//! Predicted convergence exponents of the error estimate.
//!
//! `beta_d`, `beta_m` and `A` follow the piecewise formulas verbatim, with one
//! exception: for `d = 2` the momentum exponent is zero for every `gamma >= 2`.

use std::fmt;

use crate::error::{Error, Result};
use crate::state::SchemeKind;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatePrediction {
    pub scheme: SchemeKind,
    pub dim: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub beta_d: f64,
    pub beta_m: f64,
    pub rate: f64,
}

fn check(dim: usize, gamma: f64, epsilon: f64) -> Result<()> {
    if dim != 2 && dim != 3 {
        return Err(Error::InvalidParameter { name: "d", reason: format!("{dim} is not 2 or 3") });
    }
    if !(gamma > 1.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter { name: "gamma", reason: format!("{gamma} must exceed 1") });
    }
    if !(epsilon > -1.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter { name: "epsilon", reason: format!("{epsilon} must exceed -1") });
    }
    Ok(())
}

pub fn beta_d(dim: usize, gamma: f64, epsilon: f64) -> f64 {
    let d = dim as f64;
    if gamma < 2.0 {
        (-(3.0 * epsilon + 3.0 + d) / (6.0 * gamma)).max((gamma - 2.0) / (2.0 * gamma) * d)
    } else {
        0.0
    }
}

pub fn beta_m(dim: usize, gamma: f64, epsilon: f64) -> f64 {
    let d = dim as f64;
    if gamma < 2.0 {
        -(3.0 * epsilon + 3.0 + d) / (6.0 * gamma)
    } else if dim == 3 && gamma < 3.0 {
        (gamma - 3.0) / (3.0 * gamma) * d
    } else {
        0.0
    }
}

pub fn predict_rate(scheme: SchemeKind, dim: usize, gamma: f64, epsilon: f64) -> Result<RatePrediction> {
    check(dim, gamma, epsilon)?;
    let bd = beta_d(dim, gamma, epsilon);
    let bm = beta_m(dim, gamma, epsilon);
    let mut rate = 1.0f64.min(1.0 + epsilon).min(1.0 + bd).min(1.0 + bm);
    if scheme == SchemeKind::Mac {
        rate = rate.min(1.0 + epsilon + bd);
    }
    Ok(RatePrediction { scheme, dim, gamma, epsilon, beta_d: bd, beta_m: bm, rate })
}

/// Grid resolution of the epsilon search.
pub const EPSILON_STEP: f64 = 1e-4;

/// Maximises the predicted rate over `epsilon` in `[lo, hi]` (and above -1), returning `(epsilon, A)`.
///
/// Candidates are the grid `k * EPSILON_STEP`, the crossing points of the FV branches,
/// and `0`; the best grid point is refined by ternary search within one grid step.
pub fn optimal_epsilon_in(scheme: SchemeKind, dim: usize, gamma: f64, lo: f64, hi: f64) -> Result<(f64, f64)> {
    check(dim, gamma, 0.0)?;
    if !(lo >= -1.0 && hi > lo) {
        return Err(Error::InvalidParameter { name: "epsilon", reason: format!("empty range [{lo}, {hi}]") });
    }
    let rate = |e: f64| predict_rate(scheme, dim, gamma, e).map(|p| p.rate).unwrap_or(f64::NEG_INFINITY);
    let pick = |cands: &mut dyn Iterator<Item = f64>| {
        cands.filter(|&e| e >= lo && e <= hi).map(|e| (e, rate(e))).fold((f64::NAN, f64::NEG_INFINITY), |b, c| {
            if c.1 > b.1 {
                c
            } else {
                b
            }
        })
    };
    let k0 = (lo / EPSILON_STEP).floor() as i64;
    let k1 = (hi / EPSILON_STEP).ceil() as i64;
    let grid = pick(&mut (k0..=k1).map(|k| k as f64 * EPSILON_STEP).chain([hi]));
    let (mut a, mut b) = ((grid.0 - EPSILON_STEP).max(lo), (grid.0 + EPSILON_STEP).min(hi));
    for _ in 0..100 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if rate(m1) < rate(m2) {
            a = m1;
        } else {
            b = m2;
        }
    }
    // Closed-form candidates go first so exact values win ties.
    let cands = [-5.0 / (3.0 + 6.0 * gamma), -2.0 / (1.0 + 2.0 * gamma), 0.0, grid.0, 0.5 * (a + b)];
    Ok(pick(&mut cands.into_iter()))
}

/// `optimal_epsilon_in` over `(-1, 2]`.
pub fn optimal_epsilon(scheme: SchemeKind, dim: usize, gamma: f64) -> Result<(f64, f64)> {
    optimal_epsilon_in(scheme, dim, gamma, -1.0, 2.0)
}

/// Plain-text table of predictions over a `(gamma, epsilon)` grid.
pub struct RateTable(pub Vec<RatePrediction>);

impl RateTable {
    pub fn build(schemes: &[SchemeKind], dims: &[usize], gammas: &[f64], epsilons: &[f64]) -> Result<Self> {
        let mut rows = Vec::new();
        for &s in schemes {
            for &d in dims {
                for &g in gammas {
                    for &e in epsilons {
                        rows.push(predict_rate(s, d, g, e)?);
                    }
                }
            }
        }
        Ok(RateTable(rows))
    }
}

impl fmt::Display for RateTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<6}{:>3}{:>10}{:>10}{:>12}{:>12}{:>12}", "scheme", "d", "gamma", "eps", "beta_D", "beta_M", "A")?;
        for p in &self.0 {
            writeln!(
                f,
                "{:<6}{:>3}{:>10.4}{:>10.4}{:>12.6}{:>12.6}{:>12.6}",
                p.scheme.name(),
                p.dim,
                p.gamma,
                p.epsilon,
                p.beta_d,
                p.beta_m,
                p.rate
            )?;
        }
        Ok(())
    }
}
