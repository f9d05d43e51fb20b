//! Independent low-order solver for the dividend HJB obstacle problem by
//! policy iteration on an upwind finite-difference discretisation.
//!
//! Shares no numerics with the marching solvers: first derivatives are
//! one-sided differences, the claim integral is a trapezoid rule on CDF
//! increments, and each linear system is solved by eliminating the single
//! superdiagonal of the (lower Hessenberg) matrix.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gridfn::{Grid, GridFn};
use crate::model::{ClaimDist, ModelParams};

/// Largest grid accepted by the oracle.
pub const MAX_INTERVALS: usize = 2000;

#[derive(Debug, Clone)]
pub struct OracleSolution {
    v: GridFn,
    pay: Vec<bool>,
    gamma: Vec<f64>,
    iterations: usize,
    residual_history: Vec<f64>,
    value_increments: Vec<f64>,
}

impl OracleSolution {
    /// Value samples with centred-difference slopes.
    pub fn value(&self) -> &GridFn {
        &self.v
    }

    /// Whether the converged policy pays dividends at each node.
    pub fn pay(&self) -> &[bool] {
        &self.pay
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Discrete HJB residual after each policy evaluation.
    pub fn residual_history(&self) -> &[f64] {
        &self.residual_history
    }

    /// Smallest pointwise change `V_{k+1} - V_k` between successive policy
    /// values; nonnegative when the iteration improves monotonically.
    pub fn value_increments(&self) -> &[f64] {
        &self.value_increments
    }

    /// Pay flag at the node nearest `x`.
    pub fn pays_at(&self, x: f64) -> bool {
        let g = self.v.grid();
        let i = ((x / g.h()).round() as usize).min(g.n());
        self.pay[i]
    }
}

/// CDF increments `F(x_{k+1}) - F(x_k)`.
fn cdf_steps(dist: &ClaimDist, grid: &Grid) -> Vec<f64> {
    (0..grid.n()).map(|k| dist.cdf(grid.x(k + 1)) - dist.cdf(grid.x(k))).collect()
}

/// Discrete operator rows. Row `i` has entries in columns `0..=i+1`.
struct System {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

fn build(params: &ModelParams, grid: &Grid, df: &[f64], pay: &[bool], gamma: &[f64]) -> System {
    let n = grid.n();
    let h = grid.h();
    let cb = params.c + params.beta;
    let mut rows = Vec::with_capacity(n + 1);
    let mut rhs = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let mut row = vec![0.0; (i + 2).min(n + 1)];
        if i == 0 {
            // p V'(0) - (c + beta) V(0) = 0
            row[0] = -params.p / h - cb;
            row[1] = params.p / h;
            rhs.push(0.0);
        } else if pay[i] || i == n {
            // (V_i - V_{i-1}) / h = 1
            row[i] = 1.0;
            row[i - 1] = -1.0;
            rhs.push(h);
        } else {
            let x = grid.x(i);
            let g = gamma[i];
            let a = 0.5 * (params.sigma * g * x).powi(2) / (h * h);
            let b = (params.p + params.r * g * x) / h;
            row[i - 1] += a;
            row[i] += -2.0 * a - b - cb;
            row[i + 1] += a + b;
            // beta * sum_k dF_k (V_{i-k} + V_{i-k-1}) / 2
            for (k, &w) in df.iter().enumerate().take(i) {
                let half = 0.5 * params.beta * w;
                row[i - k] += half;
                row[i - k - 1] += half;
            }
            rhs.push(0.0);
        }
        rows.push(row);
    }
    System { rows, rhs }
}

/// Eliminates the superdiagonal from the bottom up, then substitutes forward.
fn solve(mut sys: System) -> Result<Vec<f64>> {
    let n = sys.rows.len() - 1;
    for i in (1..=n).rev() {
        let piv = sys.rows[i][i];
        if piv == 0.0 || !piv.is_finite() {
            return Err(Error::NoConvergence { iterations: 0, residual: f64::NAN });
        }
        let f = sys.rows[i - 1][i] / piv;
        if f != 0.0 {
            let (upper, lower) = sys.rows.split_at_mut(i);
            let above = &mut upper[i - 1];
            for (t, s) in above.iter_mut().zip(&lower[0][..i]) {
                *t -= f * s;
            }
            above[i] = 0.0;
            sys.rhs[i - 1] -= f * sys.rhs[i];
        }
    }
    let mut v = vec![0.0; n + 1];
    for i in 0..=n {
        let row = &sys.rows[i];
        let s: f64 = row[..i].iter().zip(&v[..i]).map(|(a, b)| a * b).sum();
        v[i] = (sys.rhs[i] - s) / row[i];
    }
    Ok(v)
}

/// Value of a fixed policy (`pay` flag and investment fraction per node).
pub fn evaluate_policy(
    params: &ModelParams,
    dist: &ClaimDist,
    grid: &Grid,
    pay: &[bool],
    gamma: &[f64],
) -> Result<Vec<f64>> {
    if pay.len() != grid.len() || gamma.len() != grid.len() {
        return Err(Error::InvalidGrid(format!("policy needs {} entries per array", grid.len())));
    }
    let df = cdf_steps(dist, grid);
    solve(build(params, grid, &df, pay, gamma))
}

/// Per-node best action and residual of `max{1 - V', sup_gamma L_gamma V}`.
fn improve(params: &ModelParams, grid: &Grid, df: &[f64], v: &[f64]) -> (Vec<bool>, Vec<f64>, f64) {
    let n = grid.n();
    let h = grid.h();
    let cb = params.c + params.beta;
    let mut pay = vec![false; n + 1];
    let mut gamma = vec![1.0; n + 1];
    pay[n] = true;
    // nothing can be paid at zero, so node 0 always follows the generator,
    // in which the investment fraction drops out; the obstacle still counts
    // towards the residual
    let d0 = (v[1] - v[0]) / h;
    let mut residual = (1.0 - d0).max(params.p * d0 - cb * v[0]).abs();
    for i in 1..n {
        let x = grid.x(i);
        let d1f = (v[i + 1] - v[i]) / h;
        let d1b = (v[i] - v[i - 1]) / h;
        let d2 = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
        let conv: f64 = df.iter().take(i).enumerate().map(|(k, &w)| 0.5 * w * (v[i - k] + v[i - k - 1])).sum();
        let base = params.p * d1f - cb * v[i] + params.beta * conv;
        // quadratic in gamma: qa g^2 + qb g + base
        let qa = 0.5 * (params.sigma * x).powi(2) * d2;
        let qb = params.r * x * d1f;
        let at = |g: f64| qa * g * g + qb * g + base;
        let mut best = (at(0.0), 0.0);
        if at(1.0) >= best.0 {
            best = (at(1.0), 1.0);
        }
        if qa < 0.0 {
            let g = (-qb / (2.0 * qa)).clamp(0.0, 1.0);
            if at(g) > best.0 {
                best = (at(g), g);
            }
        }
        let obstacle = 1.0 - d1b;
        gamma[i] = best.1;
        pay[i] = obstacle > best.0;
        residual = residual.max(obstacle.max(best.0).abs());
    }
    (pay, gamma, residual)
}

/// Policy iteration from the policy that pays everything above zero.
pub fn policy_iteration_solve(
    params: &ModelParams,
    dist: &ClaimDist,
    grid: &Grid,
    max_iter: usize,
    tol: f64,
) -> Result<OracleSolution> {
    params.validate()?;
    if grid.n() > MAX_INTERVALS {
        return Err(Error::InvalidGrid(format!("oracle grid has {} intervals, limit {MAX_INTERVALS}", grid.n())));
    }
    let n = grid.n();
    let df = cdf_steps(dist, grid);
    let mut pay = vec![true; n + 1];
    pay[0] = false;
    let mut gamma = vec![1.0; n + 1];
    let mut history = Vec::new();
    let mut increments = Vec::new();
    let mut prev: Option<Vec<f64>> = None;
    for it in 1..=max_iter {
        let v = solve(build(params, grid, &df, &pay, &gamma))?;
        if let Some(p) = &prev {
            increments.push(v.iter().zip(p).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min));
        }
        let (new_pay, new_gamma, residual) = improve(params, grid, &df, &v);
        history.push(residual);
        let stable = new_pay == pay && new_gamma.iter().zip(&gamma).all(|(a, b)| (a - b).abs() <= 1e-8);
        if stable && residual <= tol {
            let h = grid.h();
            let deriv = (0..=n)
                .map(|i| match i {
                    0 => (v[1] - v[0]) / h,
                    i if i == n => (v[n] - v[n - 1]) / h,
                    i => (v[i + 1] - v[i - 1]) / (2.0 * h),
                })
                .collect();
            return Ok(OracleSolution {
                v: GridFn::new(*grid, v, deriv)?,
                pay,
                gamma,
                iterations: it,
                residual_history: history,
                value_increments: increments,
            });
        }
        prev = Some(v);
        pay = new_pay;
        gamma = new_gamma;
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: history.last().copied().unwrap_or(f64::NAN) })
}

/// Summary used by reports.
#[derive(Debug, Clone, Serialize)]
pub struct OracleSummary {
    pub iterations: usize,
    pub final_residual: f64,
    pub pay_intervals: Vec<(f64, f64)>,
}

impl OracleSolution {
    pub fn summary(&self) -> OracleSummary {
        let g = self.v.grid();
        let mut intervals = Vec::new();
        let mut start: Option<usize> = None;
        for (i, &p) in self.pay.iter().enumerate() {
            match (p, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    intervals.push((g.x(s), g.x(i - 1)));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            intervals.push((g.x(s), g.x_max()));
        }
        OracleSummary {
            iterations: self.iterations,
            final_residual: self.residual_history.last().copied().unwrap_or(f64::NAN),
            pay_intervals: intervals,
        }
    }
}
