//! Numerical viscosity-supersolution certificate for candidate value functions.
//!
//! A candidate passes when `max{1 - V'(x), sup_gamma L_gamma(V)(x)} <= tol` at
//! every grid node. Second derivatives come from central differences of the
//! stored `V'`; on payout stretches `V'' = 0`; next to a gluing point the
//! stencil stays on the continuation side.

use serde::Serialize;

use crate::barrier::CandidateValue;
use crate::exec::Execution;
use crate::gridfn::ClaimKernel;
use crate::model::{ClaimDist, ModelParams};

pub const DEFAULT_GAMMA_SAMPLES: usize = 41;

/// `L_gamma(u)(x) = sigma^2 gamma^2 x^2 u''/2 + (p + r gamma x) u' - M(u)(x)`.
pub fn generator(params: &ModelParams, x: f64, d1: f64, d2: f64, m: f64, gamma: f64) -> f64 {
    let s = params.sigma * gamma * x;
    0.5 * s * s * d2 + (params.p + params.r * gamma * x) * d1 - m
}

/// Supremum of `L_gamma` over a uniform sample of `[0, 1]` of size `samples`
/// plus the parabola vertex clamped to `[0, 1]`. Returns `(sup, argmax)`.
pub fn generator_sup(params: &ModelParams, x: f64, d1: f64, d2: f64, m: f64, samples: usize) -> (f64, f64) {
    let mut best = (f64::NEG_INFINITY, 0.0);
    let mut consider = |g: f64| {
        let v = generator(params, x, d1, d2, m, g);
        if v > best.0 {
            best = (v, g);
        }
    };
    if samples >= 2 {
        for k in 0..samples {
            consider(k as f64 / (samples - 1) as f64);
        }
    } else {
        consider(0.0);
        consider(1.0);
    }
    // L_gamma = a gamma^2 + b gamma + const
    let a = 0.5 * (params.sigma * x).powi(2) * d2;
    let b = params.r * x * d1;
    if a < 0.0 {
        consider((-b / (2.0 * a)).clamp(0.0, 1.0));
    }
    best
}

/// Exact maximum of the quadratic `gamma -> L_gamma` over `[0, 1]`.
pub fn generator_max(params: &ModelParams, x: f64, d1: f64, d2: f64, m: f64) -> f64 {
    let a = 0.5 * (params.sigma * x).powi(2) * d2;
    let b = params.r * x * d1;
    let mut best = generator(params, x, d1, d2, m, 0.0).max(generator(params, x, d1, d2, m, 1.0));
    if a < 0.0 {
        let g = -b / (2.0 * a);
        if (0.0..=1.0).contains(&g) {
            best = best.max(generator(params, x, d1, d2, m, g));
        }
    }
    best
}

#[derive(Debug, Clone, Copy)]
pub struct CertifyOptions {
    pub gamma_samples: usize,
    pub tol: f64,
    pub execution: Execution,
}

impl CertifyOptions {
    /// Default tolerance `1e-3 (c + beta) V(a*)`.
    pub fn for_candidate(params: &ModelParams, v: &CandidateValue) -> Self {
        Self {
            gamma_samples: DEFAULT_GAMMA_SAMPLES,
            tol: 1e-3 * (params.c + params.beta) * v.value_at_top(),
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub x: f64,
    pub gamma: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub passed: bool,
    pub tol: f64,
    /// Largest `max{1 - V', sup L_gamma V}` over the grid.
    pub max_residual: f64,
    pub max_residual_x: f64,
    /// Nodes above tolerance, largest residual first.
    pub witnesses: Vec<Witness>,
    /// Gluing points whose nearest node has residual within 10% of `tol`.
    pub marginal_knots: Vec<f64>,
}

impl Certificate {
    /// Positive part of the worst residual.
    pub fn max_positive_residual(&self) -> f64 {
        self.max_residual.max(0.0)
    }
}

/// Per-node residuals `(x, gamma, residual)` of the HJB obstacle operator.
pub fn residuals(
    v: &CandidateValue,
    params: &ModelParams,
    dist: &ClaimDist,
    gamma_samples: usize,
    execution: Execution,
) -> Vec<Witness> {
    let grid = *v.grid();
    let h = grid.h();
    let vals = v.core().values();
    let d1 = v.core().deriv();
    let kernel = ClaimKernel::for_grid(dist, &grid);
    let region: Vec<Option<usize>> = grid.xs().map(|x| v.bands().continuation_component(x)).collect();
    let second = |i: usize| -> f64 {
        let Some(comp) = region[i] else { return 0.0 };
        let same = |j: usize| region[j] == Some(comp);
        let left = i >= 1 && same(i - 1);
        let right = i + 1 < vals.len() && same(i + 1);
        if left && right {
            (d1[i + 1] - d1[i - 1]) / (2.0 * h)
        } else if left {
            if i >= 2 && same(i - 2) {
                (3.0 * d1[i] - 4.0 * d1[i - 1] + d1[i - 2]) / (2.0 * h)
            } else {
                (d1[i] - d1[i - 1]) / h
            }
        } else if right {
            if i + 2 < vals.len() && same(i + 2) {
                (-3.0 * d1[i] + 4.0 * d1[i + 1] - d1[i + 2]) / (2.0 * h)
            } else {
                (d1[i + 1] - d1[i]) / h
            }
        } else {
            0.0
        }
    };
    execution.map_indexed(grid.len(), |i| {
        let x = grid.x(i);
        let m = (params.c + params.beta) * vals[i] - params.beta * kernel.convolve(vals, i);
        let (sup, g) = generator_sup(params, x, d1[i], second(i), m, gamma_samples);
        let obstacle = 1.0 - d1[i];
        if obstacle > sup {
            Witness { x, gamma: f64::NAN, residual: obstacle }
        } else {
            Witness { x, gamma: g, residual: sup }
        }
    })
}

/// Checks the supersolution inequality of the HJB equation on the grid.
pub fn certify(v: &CandidateValue, params: &ModelParams, dist: &ClaimDist, opts: CertifyOptions) -> Certificate {
    let res = residuals(v, params, dist, opts.gamma_samples, opts.execution);
    let (max_residual, max_residual_x) = res
        .iter()
        .fold((f64::NEG_INFINITY, 0.0), |acc, w| if w.residual > acc.0 { (w.residual, w.x) } else { acc });
    let mut witnesses: Vec<Witness> = res.iter().filter(|w| w.residual > opts.tol).copied().collect();
    witnesses.sort_by(|a, b| b.residual.total_cmp(&a.residual).then(a.x.total_cmp(&b.x)));
    let h = v.grid().h();
    let marginal_knots = v
        .bands()
        .knots()
        .into_iter()
        .filter(|&k| {
            res.iter()
                .filter(|w| (w.x - k).abs() <= h)
                .any(|w| w.residual > 0.9 * opts.tol && w.residual <= opts.tol)
        })
        .collect();
    Certificate {
        passed: witnesses.is_empty(),
        tol: opts.tol,
        max_residual,
        max_residual_x,
        witnesses,
        marginal_knots,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampled_sup_never_exceeds_exact_max() {
        let params = ModelParams::new(4.0, 1.0, 0.5, 0.3, 2.0);
        for &(x, d1, d2, m) in &[(1.0, 1.2, -0.3, 5.0), (0.5, 2.0, 1.0, 3.0), (3.0, 1.0, -0.01, 4.0), (2.0, 1.1, -4.0, 2.0)] {
            let (sup, _) = generator_sup(&params, x, d1, d2, m, 41);
            let exact = generator_max(&params, x, d1, d2, m);
            assert!(sup <= exact + 1e-12);
            assert!(sup >= exact - 1e-12, "vertex included: {sup} vs {exact}");
        }
    }

    #[test]
    fn generator_at_zero_drops_diffusion_and_claims() {
        let params = ModelParams::new(4.0, 1.0, 0.5, 0.3, 2.0);
        // L_0(W)(0) = p W'(0) - (c + beta) W(0)
        let v = generator(&params, 0.0, 0.375, -0.1375, 1.5, 0.0);
        assert!(v.abs() < 1e-15);
    }
}
