//! The increasing classical solution `W` of `L*(W) = 0` with `W(0) = 1`,
//! built by forward marching, together with the investment profile `gamma~`.
//!
//! The marcher is shared with the continuation solver in [`crate::bands`]:
//! both integrate `(W, W')' = (W', W'')` where `W''` is solved from
//! `L_{gamma~}(W) = 0` using the already-marched history inside `M(W)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gridfn::{central_second_derivative, ClaimKernel, Grid, GridFn};
use crate::model::{ClaimDist, ModelParams};
use crate::verify::{generator, generator_sup, DEFAULT_GAMMA_SAMPLES};

/// Lower clamp on the investment fraction.
pub const GAMMA_FLOOR: f64 = 1e-8;

/// Default number of Taylor-seeded grid steps.
pub const DEFAULT_SEED_STEPS: usize = 10;

/// `min{1, 2(M - p w') / (r x w')}` clamped below at [`GAMMA_FLOOR`].
pub fn gamma_tilde(m_val: f64, wprime: f64, x: f64, params: &ModelParams) -> Result<f64> {
    if !(wprime > 0.0) {
        return Err(Error::MonotonicityLost { x, deriv: wprime });
    }
    if !(x > 0.0) {
        return Ok(1.0);
    }
    let ratio = 2.0 * (m_val - params.p * wprime) / (params.r * x * wprime);
    Ok(ratio.clamp(GAMMA_FLOOR, 1.0))
}

/// Second-order Taylor values `(W, W', W'')` near zero from the boundary
/// derivatives `W'(0+) = (c + beta)/p` and
/// `W''(0+) = (c + beta - r)(c + beta)/p^2 - F'(0) beta / p`.
pub fn taylor_seed(params: &ModelParams, dist: &ClaimDist, x: f64) -> (f64, f64, f64) {
    let (d1, d2) = boundary_derivatives(params, dist);
    (1.0 + d1 * x + 0.5 * d2 * x * x, d1 + d2 * x, d2)
}

/// `(W'(0+), W''(0+))`.
pub fn boundary_derivatives(params: &ModelParams, dist: &ClaimDist) -> (f64, f64) {
    let cb = params.c + params.beta;
    let d1 = cb / params.p;
    let d2 = (cb - params.r) * cb / (params.p * params.p) - dist.density_at_zero() * params.beta / params.p;
    (d1, d2)
}

/// `W''` and `gamma~` from `L_{gamma~}(W)(x) = 0` given `M(W)(x)` and `W'(x)`.
pub(crate) fn closure(params: &ModelParams, x: f64, m: f64, w: f64) -> Result<(f64, f64)> {
    let g = gamma_tilde(m, w, x, params)?;
    let s = params.sigma * g * x;
    let q = 2.0 * (m - (params.p + params.r * g * x) * w) / (s * s);
    if !q.is_finite() {
        return Err(Error::StepFailed { x });
    }
    Ok((q, g))
}

/// Solution state at a (possibly off-grid) point.
#[derive(Debug, Clone, Copy)]
pub(crate) struct State {
    pub x: f64,
    pub val: f64,
    pub der: f64,
    pub sec: f64,
}

/// Full-grid arrays being filled by a march.
#[derive(Debug, Clone)]
pub(crate) struct Track {
    pub val: Vec<f64>,
    pub der: Vec<f64>,
    pub sec: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl Track {
    pub fn zeros(len: usize) -> Self {
        Self { val: vec![0.0; len], der: vec![0.0; len], sec: vec![0.0; len], gamma: vec![0.0; len] }
    }

    pub fn state(&self, grid: &Grid, i: usize) -> State {
        State { x: grid.x(i), val: self.val[i], der: self.der[i], sec: self.sec[i] }
    }
}

/// Implicit marcher: the first step from a state without history is backward
/// Euler, later steps use variable-step BDF2 on the whole system. Both are
/// L-stable, which the stiffness `2p / (sigma x)^2` near zero requires.
pub(crate) struct Marcher<'a> {
    pub params: &'a ModelParams,
    pub kernel: &'a ClaimKernel,
    pub grid: Grid,
}

impl Marcher<'_> {
    /// Fills nodes `start..=last` (or until `stop` returns true) and returns
    /// the last node written. `track` must hold valid values below `start`.
    pub fn run(
        &self,
        track: &mut Track,
        start: usize,
        mut prev: State,
        mut older: Option<State>,
        last: usize,
        mut stop: impl FnMut(usize, &Track) -> bool,
    ) -> Result<usize> {
        let mut j = start;
        while j <= last {
            let s = self.step(track, j, prev, older)?;
            track.val[j] = s.0.val;
            track.der[j] = s.0.der;
            track.sec[j] = s.0.sec;
            track.gamma[j] = s.1;
            older = Some(prev);
            prev = s.0;
            if stop(j, track) {
                return Ok(j);
            }
            j += 1;
        }
        Ok(last)
    }

    fn step(&self, track: &Track, j: usize, prev: State, older: Option<State>) -> Result<(State, f64)> {
        let p = self.params;
        let x = self.grid.x(j);
        let delta = x - prev.x;
        // W = cv + dv * w,  residual R(w) = w - cw - dq * q(W, w)
        let (cv, dv, cw, dq) = match older {
            None => (prev.val, delta, prev.der, delta),
            Some(o) => {
                let om = delta / (prev.x - o.x);
                let den = 1.0 + 2.0 * om;
                let a1 = (1.0 + om) * (1.0 + om) / den;
                let a2 = om * om / den;
                let b = delta * (1.0 + om) / den;
                (a1 * prev.val - a2 * o.val, b, a1 * prev.der - a2 * o.der, b)
            }
        };
        let hist = self.kernel.history(&track.val, j);
        let coef = p.c + p.beta - p.beta * self.kernel.self_weight();
        // R is increasing in w on the admissible set M(W(w)) > p w, where it
        // runs from negative values near 0 to +inf at the boundary.
        let eval = |w: f64| -> (f64, f64, f64) {
            let v = cv + dv * w;
            let m = coef * v - p.beta * hist;
            match closure(p, x, m, w) {
                Ok((q, g)) => (w - cw - dq * q, q, g),
                Err(_) => (f64::INFINITY, f64::NAN, f64::NAN),
            }
        };
        let slope_d = coef * dv - p.p;
        let mut hi = if slope_d < 0.0 { -(coef * cv - p.beta * hist) / slope_d } else { f64::INFINITY };
        if !(hi > 0.0) {
            return Err(Error::MonotonicityLost { x, deriv: hi });
        }
        if !hi.is_finite() {
            hi = 2.0 * prev.der.abs().max(1.0);
            while eval(hi).0 <= 0.0 {
                hi *= 2.0;
                if hi > 1e300 {
                    return Err(Error::StepFailed { x });
                }
            }
        }
        let mut lo = 0.0;
        let mut w = match older {
            Some(o) => prev.der + (prev.der - o.der) * delta / (prev.x - o.x),
            None => prev.der + delta * prev.sec,
        };
        if !(w > lo && w < hi) {
            w = 0.5 * (lo + hi);
        }
        for _ in 0..200 {
            let (r0, q, g) = eval(w);
            if r0 == 0.0 {
                return Ok((State { x, val: cv + dv * w, der: w, sec: q }, g));
            }
            if r0 > 0.0 {
                hi = w;
            } else {
                lo = w;
            }
            let eps = 1e-7 * w;
            let (wa, wb) = if w + eps < hi { (w, w + eps) } else { (w - eps, w) };
            let (ra, rb) = if wa == w { (r0, eval(wb).0) } else { (eval(wa).0, r0) };
            let slope = (rb - ra) / (wb - wa);
            let mut next = w - r0 / slope;
            if !(slope > 0.0 && next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - w).abs() <= 1e-13 * w || hi - lo <= 1e-15 * hi {
                let (r1, q1, g1) = eval(next);
                if r1.is_finite() {
                    return Ok((State { x, val: cv + dv * next, der: next, sec: q1 }, g1));
                }
                return Ok((State { x, val: cv + dv * w, der: w, sec: q }, g));
            }
            w = next;
        }
        if hi < 1e-200 {
            Err(Error::MonotonicityLost { x, deriv: hi })
        } else {
            Err(Error::StepFailed { x })
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub seed_steps: usize,
    /// Residual tolerance; `None` means `1e-4 (c + beta) max W`.
    pub tol_resid: Option<f64>,
    pub gamma_samples: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { seed_steps: DEFAULT_SEED_STEPS, tol_resid: None, gamma_samples: DEFAULT_GAMMA_SAMPLES }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualReport {
    /// Largest `L_gamma(W)(x_i)` over grid nodes and sampled `gamma`.
    pub max_sup: f64,
    pub max_sup_x: f64,
    /// Largest `|L_{gamma~}(W)(x_i)|`.
    pub max_abs_tilde: f64,
    pub max_abs_tilde_x: f64,
    pub tol: f64,
}

impl ResidualReport {
    pub fn passed(&self) -> bool {
        self.max_sup <= self.tol && self.max_abs_tilde <= self.tol
    }
}

/// The solved `W` on a grid.
#[derive(Debug, Clone)]
pub struct WSolution {
    w: GridFn,
    w2: Vec<f64>,
    gamma: Vec<f64>,
    params: ModelParams,
    dist: ClaimDist,
    seed_steps: usize,
}

impl WSolution {
    pub fn grid(&self) -> &Grid {
        self.w.grid()
    }

    /// `W` with derivative samples `W'`.
    pub fn w(&self) -> &GridFn {
        &self.w
    }

    /// `W''` samples from the marching closure.
    pub fn w2(&self) -> &[f64] {
        &self.w2
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn dist(&self) -> &ClaimDist {
        &self.dist
    }

    pub fn seed_steps(&self) -> usize {
        self.seed_steps
    }

    /// `W'` as a grid function whose derivative samples are `W''`.
    pub fn wprime(&self) -> GridFn {
        GridFn::new(*self.grid(), self.w.deriv().to_vec(), self.w2.clone()).expect("lengths match")
    }

    /// Number of leading nodes with `gamma~ = 1`.
    pub fn full_investment_prefix(&self) -> usize {
        self.gamma.iter().take_while(|&&g| g == 1.0).count()
    }
}

/// Marches `W` on `grid` with default options and checks the residual.
pub fn solve_w(params: &ModelParams, dist: &ClaimDist, grid: Grid) -> Result<WSolution> {
    solve_w_with(params, dist, grid, SolveOptions::default())
}

pub fn solve_w_with(params: &ModelParams, dist: &ClaimDist, grid: Grid, opts: SolveOptions) -> Result<WSolution> {
    params.validate_allow_no_claims()?;
    let seed = opts.seed_steps.clamp(1, grid.n() - 1);
    let len = grid.len();
    let mut track = Track::zeros(len);
    for i in 0..=seed {
        let (v, d, s) = taylor_seed(params, dist, grid.x(i));
        track.val[i] = v;
        track.der[i] = d;
        track.sec[i] = s;
        track.gamma[i] = 1.0;
    }
    track.der[0] = (params.c + params.beta) / params.p;
    let kernel = ClaimKernel::for_grid(dist, &grid);
    let marcher = Marcher { params, kernel: &kernel, grid };
    let prev = track.state(&grid, seed);
    let older = track.state(&grid, seed - 1);
    marcher.run(&mut track, seed + 1, prev, Some(older), grid.n(), |_, _| false)?;
    let Track { val, der, sec, gamma } = track;
    let ws = WSolution {
        w: GridFn::new(grid, val, der)?,
        w2: sec,
        gamma,
        params: *params,
        dist: dist.clone(),
        seed_steps: seed,
    };
    let report = hjb_residual_with(&ws, opts.gamma_samples, opts.tol_resid);
    if !report.passed() {
        let (residual, x) = if report.max_abs_tilde > report.tol {
            (report.max_abs_tilde, report.max_abs_tilde_x)
        } else {
            (report.max_sup, report.max_sup_x)
        };
        return Err(Error::ResidualTooLarge { residual, tol: report.tol, x });
    }
    Ok(ws)
}

/// Default residual tolerance `1e-4 (c + beta) max W`.
pub fn default_tol_resid(ws: &WSolution) -> f64 {
    let max_w = ws.w.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    1e-4 * (ws.params.c + ws.params.beta) * max_w
}

/// Residual of `L_gamma(W)` on the grid with `W''` from central differences of
/// the stored `W'`.
pub fn hjb_residual(ws: &WSolution, gamma_samples: usize) -> ResidualReport {
    hjb_residual_with(ws, gamma_samples, None)
}

fn hjb_residual_with(ws: &WSolution, gamma_samples: usize, tol: Option<f64>) -> ResidualReport {
    let grid = ws.grid();
    let p = &ws.params;
    let vals = ws.w.values();
    let d1 = ws.w.deriv();
    let d2 = central_second_derivative(d1, grid.h());
    let kernel = ClaimKernel::for_grid(&ws.dist, grid);
    let mut rep = ResidualReport {
        max_sup: f64::NEG_INFINITY,
        max_sup_x: 0.0,
        max_abs_tilde: 0.0,
        max_abs_tilde_x: 0.0,
        tol: tol.unwrap_or_else(|| default_tol_resid(ws)),
    };
    for i in 0..grid.len() {
        let x = grid.x(i);
        let m = (p.c + p.beta) * vals[i] - p.beta * kernel.convolve(vals, i);
        let (sup, _) = generator_sup(p, x, d1[i], d2[i], m, gamma_samples);
        let tilde = generator(p, x, d1[i], d2[i], m, ws.gamma[i]);
        let sup = sup.max(tilde);
        if sup > rep.max_sup {
            rep.max_sup = sup;
            rep.max_sup_x = x;
        }
        if tilde.abs() > rep.max_abs_tilde {
            rep.max_abs_tilde = tilde.abs();
            rep.max_abs_tilde_x = x;
        }
    }
    rep
}
