//! Continuation solutions glued above a known lower piece, the `Lambda`
//! function with the A/B/C point classification, and the search for one-,
//! two- and k-band candidates.

use serde::Serialize;

use crate::barrier::{barrier_value, golden_min, optimal_barrier, Band, BandStructure, CandidateValue};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gridfn::{convolve_at, hermite_cell, ClaimKernel, Grid, GridFn};
use crate::model::{ClaimDist, ModelParams};
use crate::verify::{certify, generator, Certificate, CertifyOptions, DEFAULT_GAMMA_SAMPLES};
use crate::wsolve::{closure, solve_w, Marcher, State, Track, WSolution};

/// Tolerance on `|V' - 1|` for payout points.
pub const DEFAULT_TOL_D: f64 = 1e-6;

/// Scan stride for band bottoms, in grid steps.
pub const SCAN_STRIDE: usize = 10;

/// Near-tangency threshold for [`find_touch`].
pub const TOUCH_TOL: f64 = 1e-7;

/// Level of `U' - 1` below which a scan march is stopped early.
const EARLY_STOP: f64 = 1e-3;

/// Lower piece `w0` a continuation is glued to.
#[derive(Debug, Clone, Copy)]
pub enum Base<'a> {
    Candidate(&'a CandidateValue),
    Grid(&'a GridFn),
}

impl Base<'_> {
    fn value(&self, x: f64) -> f64 {
        match self {
            Base::Candidate(v) => v.eval(x.max(0.0)).unwrap_or(f64::NAN),
            Base::Grid(f) => f.eval(x.max(0.0)).unwrap_or(f64::NAN),
        }
    }

    fn deriv(&self, x: f64) -> f64 {
        match self {
            Base::Candidate(v) => v.eval_deriv(x.max(0.0)).unwrap_or(f64::NAN),
            Base::Grid(f) => f.eval_deriv(x.max(0.0)).unwrap_or(f64::NAN),
        }
    }

    fn gamma(&self, i: usize) -> f64 {
        match self {
            Base::Candidate(v) => v.gamma().get(i).copied().unwrap_or(0.0),
            Base::Grid(_) => 0.0,
        }
    }
}

/// Solution `U` of `L*(U, W0) = 0` on `[x0, x_end]` seeded with the value and
/// slope of `w0` at `x0`.
#[derive(Debug, Clone)]
pub struct ContinuationSolution {
    grid: Grid,
    x0: f64,
    head: State,
    head_gamma: f64,
    start: usize,
    end: usize,
    track: Track,
}

impl ContinuationSolution {
    pub fn x0(&self) -> f64 {
        self.x0
    }

    /// `(U(x0), U'(x0), U''(x0+))`.
    pub fn seed(&self) -> (f64, f64, f64) {
        (self.head.val, self.head.der, self.head.sec)
    }

    /// Last grid point reached by the march.
    pub fn x_end(&self) -> f64 {
        self.grid.x(self.end)
    }

    /// First grid node solved by the march.
    pub fn start_index(&self) -> usize {
        self.start
    }

    pub fn end_index(&self) -> usize {
        self.end
    }

    /// `U` on grid nodes `0..=end`, with `w0` below `x0`.
    pub fn u(&self) -> Result<GridFn> {
        let g = self.grid.truncated(self.end)?;
        GridFn::new(g, self.track.val[..=self.end].to_vec(), self.track.der[..=self.end].to_vec())
    }

    /// `U''` samples on marched nodes (zero below the march).
    pub fn second(&self) -> &[f64] {
        &self.track.sec[..=self.end]
    }

    /// `gamma~(U, W0)` on nodes `0..=end`.
    pub fn gamma(&self) -> &[f64] {
        &self.track.gamma[..=self.end]
    }

    /// Derivative samples `(x, U', U'')` starting at `x0`.
    fn slope_points(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        std::iter::once((self.x0, self.head.der, self.head.sec))
            .chain((self.start..=self.end).map(|j| (self.grid.x(j), self.track.der[j], self.track.sec[j])))
    }

    /// `U` and `U'` at `x` in `[x0, x_end]` by cubic Hermite interpolation.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let (a, va, da, b, vb, db) = self.cell(x, false);
        hermite_cell(b - a, (x - a) / (b - a), va, vb, da, db)
    }

    /// `U'` and `U''` at `x`, interpolating `(U', U'')`.
    pub fn eval_slope(&self, x: f64) -> (f64, f64) {
        let (a, va, da, b, vb, db) = self.cell(x, true);
        hermite_cell(b - a, (x - a) / (b - a), va, vb, da, db)
    }

    fn cell(&self, x: f64, slope: bool) -> (f64, f64, f64, f64, f64, f64) {
        let pick = |s: &State| if slope { (s.der, s.sec) } else { (s.val, s.der) };
        let first = self.track.state(&self.grid, self.start);
        if x <= first.x {
            let (va, da) = pick(&self.head);
            let (vb, db) = pick(&first);
            return (self.head.x, va, da, first.x, vb, db);
        }
        let k = ((x / self.grid.h()).floor() as usize).clamp(self.start, self.end.max(self.start + 1) - 1);
        let s0 = self.track.state(&self.grid, k);
        let s1 = self.track.state(&self.grid, k + 1);
        let (va, da) = pick(&s0);
        let (vb, db) = pick(&s1);
        (s0.x, va, da, s1.x, vb, db)
    }

    /// Smallest `U'` after the first local maximum of `U'`, as `(x, U'(x))`.
    fn min_after_peak(&self) -> (f64, f64) {
        let pts: Vec<(f64, f64, f64)> = self.slope_points().collect();
        let mut k = 0;
        while k + 1 < pts.len() && pts[k + 1].1 >= pts[k].1 {
            k += 1;
        }
        let mut best = k;
        for (i, p) in pts.iter().enumerate().skip(k) {
            if p.1 < pts[best].1 {
                best = i;
            }
        }
        if best == 0 || best + 1 >= pts.len() {
            return (pts[best].0, pts[best].1);
        }
        let (x, v) = golden_min(|x| self.eval_slope(x).0, pts[best - 1].0, pts[best + 1].0, self.grid.h() * 1e-4);
        if v < pts[best].1 {
            (x, v)
        } else {
            (pts[best].0, pts[best].1)
        }
    }

    /// Largest `|L_{gamma~}(U, W0)|` over interior marched nodes, with `U''`
    /// from central differences of the stored `U'`.
    pub fn residual(&self, params: &ModelParams, dist: &ClaimDist) -> f64 {
        let kernel = ClaimKernel::for_grid(dist, &self.grid);
        let h = self.grid.h();
        let t = &self.track;
        let mut worst = 0.0f64;
        for j in self.start + 1..self.end {
            let x = self.grid.x(j);
            let m = (params.c + params.beta) * t.val[j] - params.beta * kernel.convolve(&t.val, j);
            let d2 = (t.der[j + 1] - t.der[j - 1]) / (2.0 * h);
            worst = worst.max(generator(params, x, t.der[j], d2, m, t.gamma[j]).abs());
        }
        worst
    }
}

/// Solves `L*(U, W0) = 0` on `[x0, x_max]` with `U = w0`, `U' = w0'` at `x0`.
pub fn continuation_solve(
    params: &ModelParams,
    dist: &ClaimDist,
    w0: Base<'_>,
    x0: f64,
    grid: Grid,
) -> Result<ContinuationSolution> {
    params.validate_allow_no_claims()?;
    let kernel = ClaimKernel::for_grid(dist, &grid);
    let cs = march(params, dist, &kernel, w0, x0, grid, grid.n(), false)?;
    let max_u = cs.track.val[..=cs.end].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-4 * (params.c + params.beta) * max_u;
    let residual = cs.residual(params, dist);
    if residual > tol {
        return Err(Error::ResidualTooLarge { residual, tol, x: x0 });
    }
    Ok(cs)
}

#[allow(clippy::too_many_arguments)]
fn march(
    params: &ModelParams,
    dist: &ClaimDist,
    kernel: &ClaimKernel,
    w0: Base<'_>,
    x0: f64,
    grid: Grid,
    last: usize,
    early_stop: bool,
) -> Result<ContinuationSolution> {
    let h = grid.h();
    if !(x0 > 0.0 && x0 + 1.5 * h <= grid.x_max()) {
        return Err(Error::Domain { x: x0, lo: 0.0, hi: grid.x_max() - 1.5 * h });
    }
    let start = ((x0 + 0.5 * h) / h).ceil() as usize;
    let start = if grid.x(start) - x0 < 0.5 * h { start + 1 } else { start };
    let last = last.min(grid.n()).max(start);
    let mut track = Track::zeros(grid.len());
    for i in 0..start {
        let x = grid.x(i);
        track.val[i] = w0.value(x);
        track.der[i] = w0.deriv(x);
        track.gamma[i] = w0.gamma(i);
    }
    let u0 = w0.value(x0);
    let d0 = w0.deriv(x0);
    let m0 = (params.c + params.beta) * u0 - params.beta * convolve_at(|y| w0.value(y), dist, x0, h);
    let (q0, g0) = closure(params, x0, m0, d0)?;
    let head = State { x: x0, val: u0, der: d0, sec: q0 };
    let marcher = Marcher { params, kernel, grid };
    let end = marcher.run(&mut track, start, head, None, last, |j, t| early_stop && t.der[j] < 1.0 - EARLY_STOP)?;
    Ok(ContinuationSolution { grid, x0, head, head_gamma: g0, start, end, track })
}

/// Smallest `z > x0 + h` with `U'(z) = 1`, by a sign change of `U' - 1` or a
/// near-tangential local minimum within [`TOUCH_TOL`].
pub fn find_touch(cs: &ContinuationSolution) -> Option<f64> {
    let h = cs.grid.h();
    let pts: Vec<(f64, f64, f64)> = cs.slope_points().filter(|p| p.0 > cs.x0 + h).collect();
    for k in 0..pts.len().saturating_sub(1) {
        let (xa, da, _) = pts[k];
        let (xb, db, _) = pts[k + 1];
        if da - 1.0 > 0.0 && db - 1.0 <= 0.0 {
            let (mut lo, mut hi) = (xa, xb);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if cs.eval_slope(mid).0 > 1.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-12 * xb.max(1.0) {
                    break;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        if k > 0 && pts[k - 1].1 > da && da <= db && da - 1.0 <= TOUCH_TOL {
            let (x, _) = golden_min(|x| cs.eval_slope(x).0, pts[k - 1].0, xb, h * 1e-4);
            return Some(x);
        }
    }
    None
}

/// `Lambda(x) = (p + r x) - M(V)(x)` with `V` affine beyond `a*`.
pub fn lambda_fn(v: &CandidateValue, params: &ModelParams, dist: &ClaimDist, x: f64) -> f64 {
    let val = |y: f64| v.eval(y.max(0.0)).unwrap_or(f64::NAN);
    let m = (params.c + params.beta) * val(x) - params.beta * convolve_at(val, dist, x, v.grid().h());
    params.p + params.r * x - m
}

/// `Lambda` at every grid node.
pub fn lambda_on_grid(v: &CandidateValue, params: &ModelParams, dist: &ClaimDist) -> Vec<f64> {
    let grid = v.grid();
    let kernel = ClaimKernel::for_grid(dist, grid);
    let vals = v.core().values();
    (0..grid.len())
        .map(|i| {
            let m = (params.c + params.beta) * vals[i] - params.beta * kernel.convolve(vals, i);
            params.p + params.r * grid.x(i) - m
        })
        .collect()
}

/// Default `tol_Lambda = 1e-3 (c + beta) V(a*)`.
pub fn default_tol_lambda(v: &CandidateValue, params: &ModelParams) -> f64 {
    1e-3 * (params.c + params.beta) * v.value_at_top()
}

/// Point label: reflection (`V' = 1`, `Lambda = 0`), payout (`V' = 1`,
/// `Lambda < 0`) or continuation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Label {
    A,
    B,
    C,
}

/// Labels every grid node with default tolerances.
pub fn classify(v: &CandidateValue, params: &ModelParams, dist: &ClaimDist) -> Result<Vec<Label>> {
    classify_with(v, params, dist, DEFAULT_TOL_D, default_tol_lambda(v, params))
}

pub fn classify_with(
    v: &CandidateValue,
    params: &ModelParams,
    dist: &ClaimDist,
    tol_d: f64,
    tol_lambda: f64,
) -> Result<Vec<Label>> {
    let lam = lambda_on_grid(v, params, dist);
    let grid = v.grid();
    v.core()
        .deriv()
        .iter()
        .zip(&lam)
        .enumerate()
        .map(|(i, (&d, &l))| {
            if d < 1.0 - tol_d {
                Err(Error::NotAValueFunction { x: grid.x(i), deriv: d })
            } else if (d - 1.0).abs() <= tol_d {
                Ok(if l.abs() <= tol_lambda {
                    Label::A
                } else if l < 0.0 {
                    Label::B
                } else {
                    Label::C
                })
            } else {
                Ok(Label::C)
            }
        })
        .collect()
}

/// Outcome of adding one band above an existing candidate.
#[derive(Debug, Clone)]
pub struct Extension {
    /// Bottom of the new continuation band.
    pub y: f64,
    /// Reflection level at the top of the new band.
    pub z: f64,
    pub candidate: CandidateValue,
    /// `(y, g(y))` on the coarse scan mesh.
    pub scan: Vec<(f64, f64)>,
}

/// Result of the scan for a new band above `prev`.
#[derive(Debug, Clone)]
pub enum ExtensionOutcome {
    /// `g <= 0` already at the first scan point: no new band.
    Degenerate { scan: Vec<(f64, f64)> },
    Found(Extension),
}

/// `g(y) = min U_y' - 1` after the first peak, for the continuation from `y`.
fn touch_gap(
    params: &ModelParams,
    dist: &ClaimDist,
    kernel: &ClaimKernel,
    prev: &CandidateValue,
    y: f64,
    last: usize,
) -> Result<f64> {
    let cs = march(params, dist, kernel, Base::Candidate(prev), y, *prev.grid(), last, true)?;
    Ok(cs.min_after_peak().1 - 1.0)
}

/// Scans band bottoms `y` above `prev`'s top for the smallest root of `g`, then
/// glues the continuation from that `y` up to its touch point.
pub fn extend_band(
    params: &ModelParams,
    dist: &ClaimDist,
    prev: &CandidateValue,
    execution: Execution,
) -> Result<ExtensionOutcome> {
    let grid = *prev.grid();
    let h = grid.h();
    let kernel = ClaimKernel::for_grid(dist, &grid);
    let bound = params.payout_bound().min(grid.x_max());
    let last = (((1.25 * params.payout_bound()) / h).ceil() as usize + 2).min(grid.n());
    let base = prev.a_star();
    let step = SCAN_STRIDE as f64 * h;
    let count = ((bound - base) / step).floor() as usize;
    if count == 0 {
        return Err(Error::NoRoot { lo: base, hi: bound });
    }
    let chunk = if execution.is_parallel() { 4 * rayon_threads().max(1) } else { 8 };
    let mut scan: Vec<(f64, f64)> = Vec::new();
    let mut bracket = None;
    let mut k = 1;
    'outer: while k <= count {
        let ks: Vec<usize> = (k..=(k + chunk - 1).min(count)).collect();
        let gs = execution.map_slice(&ks, |&k| {
            let y = base + k as f64 * step;
            touch_gap(params, dist, &kernel, prev, y, last).map(|g| (y, g))
        });
        for r in gs {
            let (y, g) = r?;
            scan.push((y, g));
            if g <= 0.0 {
                if scan.len() == 1 {
                    return Ok(ExtensionOutcome::Degenerate { scan });
                }
                bracket = Some((scan[scan.len() - 2].0, y));
                break 'outer;
            }
        }
        k += chunk;
    }
    let Some((mut lo, mut hi)) = bracket else {
        return Err(Error::NoRoot { lo: base, hi: bound });
    };
    while hi - lo > 1e-12 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if touch_gap(params, dist, &kernel, prev, mid, last)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let y = lo;
    let cs = march(params, dist, &kernel, Base::Candidate(prev), y, grid, last, false)?;
    let (z, _) = cs.min_after_peak();
    if z >= cs.x_end() - h {
        return Err(Error::NoRoot { lo: base, hi: bound });
    }
    let candidate = glue(prev, &cs, y, z)?;
    Ok(ExtensionOutcome::Found(Extension { y, z, candidate, scan }))
}

#[cfg(feature = "parallel")]
fn rayon_threads() -> usize {
    rayon::current_num_threads()
}

#[cfg(not(feature = "parallel"))]
fn rayon_threads() -> usize {
    1
}

/// `prev` below `y`, `U` on `[y, z]`, slope one above `z`.
fn glue(prev: &CandidateValue, cs: &ContinuationSolution, y: f64, z: f64) -> Result<CandidateValue> {
    let grid = *prev.grid();
    let (uz, _) = cs.eval(z);
    let t = &cs.track;
    let mut values = Vec::with_capacity(grid.len());
    let mut deriv = Vec::with_capacity(grid.len());
    let mut gamma = Vec::with_capacity(grid.len());
    let mut last_gamma = cs.head_gamma;
    for i in 0..grid.len() {
        let x = grid.x(i);
        if i < cs.start {
            values.push(prev.core().values()[i]);
            deriv.push(prev.core().deriv()[i]);
            gamma.push(prev.gamma()[i]);
        } else if x <= z {
            values.push(t.val[i]);
            deriv.push(t.der[i]);
            last_gamma = t.gamma[i];
            gamma.push(last_gamma);
        } else {
            values.push(uz + (x - z));
            deriv.push(1.0);
            gamma.push(last_gamma);
        }
    }
    let mut bands = prev.bands().bands().to_vec();
    bands.push(Band { bottom: y, top: z });
    let v = CandidateValue::new(GridFn::new(grid, values, deriv)?, gamma, BandStructure::new(bands)?)?;
    Ok(v.with_top_value(uz))
}

/// Result of the two-band construction.
#[derive(Debug, Clone)]
pub struct TwoBand {
    pub y1: f64,
    pub z1: f64,
    pub candidate: CandidateValue,
    /// True when `g` is already nonpositive at the first scan point and the
    /// candidate is the optimal barrier.
    pub degenerate: bool,
    pub scan: Vec<(f64, f64)>,
}

/// Two-band candidate built above the zero-surplus strategy `x + p/(c + beta)`.
pub fn two_band_search(params: &ModelParams, dist: &ClaimDist, grid: Grid) -> Result<TwoBand> {
    params.validate()?;
    let ws = solve_w(params, dist, grid)?;
    two_band_from(&ws, Execution::default())
}

pub fn two_band_from(ws: &WSolution, execution: Execution) -> Result<TwoBand> {
    let base = barrier_value(ws, 0.0)?;
    match extend_band(ws.params(), ws.dist(), &base, execution)? {
        ExtensionOutcome::Degenerate { scan } => {
            let candidate = optimal_barrier(ws)?;
            Ok(TwoBand { y1: 0.0, z1: candidate.a_star(), candidate, degenerate: true, scan })
        }
        ExtensionOutcome::Found(e) => {
            Ok(TwoBand { y1: e.y, z1: e.z, candidate: e.candidate, degenerate: false, scan: e.scan })
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BandSearchOptions {
    pub max_bands: usize,
    pub gamma_samples: usize,
    /// Certification tolerance; `None` means `1e-3 (c + beta) V(a*)`.
    pub tol: Option<f64>,
    pub execution: Execution,
}

impl Default for BandSearchOptions {
    fn default() -> Self {
        Self { max_bands: 2, gamma_samples: DEFAULT_GAMMA_SAMPLES, tol: None, execution: Execution::default() }
    }
}

/// A certified candidate and the attempts that led to it.
#[derive(Debug, Clone)]
pub struct BandSearch {
    pub candidate: CandidateValue,
    pub certificate: Certificate,
    /// Number of bands tried when the candidate passed.
    pub k: usize,
    /// `(k, certificate)` of every candidate tried, in order.
    pub attempts: Vec<(usize, Certificate)>,
}

/// First candidate with at most `max_bands` bands that passes certification.
pub fn band_search(params: &ModelParams, dist: &ClaimDist, grid: Grid, max_bands: usize) -> Result<CandidateValue> {
    let opts = BandSearchOptions { max_bands, ..Default::default() };
    Ok(band_search_with(params, dist, grid, opts)?.candidate)
}

pub fn band_search_with(
    params: &ModelParams,
    dist: &ClaimDist,
    grid: Grid,
    opts: BandSearchOptions,
) -> Result<BandSearch> {
    if opts.max_bands == 0 {
        return Err(Error::NoBandCandidate { max_bands: 0 });
    }
    params.validate()?;
    let ws = solve_w(params, dist, grid)?;
    search_from(&ws, opts)
}

/// Band search reusing an already solved `W`.
pub fn search_from(ws: &WSolution, opts: BandSearchOptions) -> Result<BandSearch> {
    if opts.max_bands == 0 {
        return Err(Error::NoBandCandidate { max_bands: 0 });
    }
    let (params, dist) = (ws.params(), ws.dist());
    let mut attempts = Vec::new();
    let check = |v: &CandidateValue| {
        let mut co = CertifyOptions::for_candidate(params, v);
        co.gamma_samples = opts.gamma_samples;
        co.execution = opts.execution;
        if let Some(t) = opts.tol {
            co.tol = t;
        }
        certify(v, params, dist, co)
    };
    let mut current = optimal_barrier(ws)?;
    for k in 1..=opts.max_bands {
        if k == 2 {
            let tb = match two_band_from(ws, opts.execution) {
                Ok(tb) => tb,
                Err(Error::NoRoot { .. }) => break,
                Err(e) => return Err(e),
            };
            if tb.degenerate {
                break;
            }
            current = tb.candidate;
        } else if k > 2 {
            match extend_band(params, dist, &current, opts.execution) {
                Ok(ExtensionOutcome::Found(e)) => current = e.candidate,
                Ok(ExtensionOutcome::Degenerate { .. }) | Err(Error::NoRoot { .. }) => break,
                Err(e) => return Err(e),
            }
        }
        let cert = check(&current);
        attempts.push((k, cert.clone()));
        if cert.passed {
            return Ok(BandSearch { candidate: current, certificate: cert, k, attempts });
        }
    }
    Err(Error::NoBandCandidate { max_bands: opts.max_bands })
}
