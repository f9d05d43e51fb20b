//! Barrier value functions built by rescaling `W`, the optimal barrier
//! `x* = argmin W'`, and the piecewise candidate representation shared with
//! the band search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridfn::{Grid, GridFn};
use crate::wsolve::WSolution;

/// One continuation component `[bottom, top]`. Surplus is reflected at `top`;
/// above `top` and up to the next bottom, the excess is paid down to `top`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub bottom: f64,
    pub top: f64,
}

/// Ordered continuation components of a stationary band strategy.
///
/// A single band `{0, y}` is the barrier strategy at `y`. A first band `{0, 0}`
/// means surplus at zero is frozen while the whole premium is paid out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandStructure {
    bands: Vec<Band>,
}

impl BandStructure {
    pub fn new(bands: Vec<Band>) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::InvalidGrid("band structure needs at least one band".into()));
        }
        if bands[0].bottom != 0.0 {
            return Err(Error::InvalidGrid(format!("first band must start at 0, got {}", bands[0].bottom)));
        }
        for (k, b) in bands.iter().enumerate() {
            if !(b.bottom.is_finite() && b.top.is_finite() && b.bottom <= b.top) {
                return Err(Error::InvalidGrid(format!("band {k} has bottom {} above top {}", b.bottom, b.top)));
            }
            if k > 0 && !(bands[k - 1].top < b.bottom) {
                return Err(Error::InvalidGrid(format!(
                    "band {k} starts at {} below the previous top {}",
                    b.bottom,
                    bands[k - 1].top
                )));
            }
        }
        Ok(Self { bands })
    }

    /// Barrier strategy at level `y`.
    pub fn barrier(y: f64) -> Self {
        Self { bands: vec![Band { bottom: 0.0, top: y.max(0.0) }] }
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    /// Largest reflection level; the value is affine with slope one above it.
    pub fn a_star(&self) -> f64 {
        self.bands.last().map_or(0.0, |b| b.top)
    }

    /// Whether zero is a reflection point of an empty continuation band.
    pub fn zero_absorbing(&self) -> bool {
        self.bands[0].top == 0.0
    }

    /// Index of the continuation component containing `x` (endpoints included).
    pub fn continuation_component(&self, x: f64) -> Option<usize> {
        self.bands.iter().position(|b| b.bottom <= x && x <= b.top)
    }

    /// Level the surplus is paid down to, or `None` inside a continuation band.
    pub fn payout_target(&self, x: f64) -> Option<f64> {
        if self.continuation_component(x).is_some() {
            return None;
        }
        self.bands.iter().rev().find(|b| b.top < x).map(|b| b.top)
    }

    /// Reflection levels, i.e. the points where `V' = 1` and `Lambda = 0`.
    pub fn tops(&self) -> Vec<f64> {
        self.bands.iter().map(|b| b.top).collect()
    }

    /// Positive gluing points (band bottoms and tops).
    pub fn knots(&self) -> Vec<f64> {
        let mut k: Vec<f64> = self.bands.iter().flat_map(|b| [b.bottom, b.top]).filter(|&v| v > 0.0).collect();
        k.dedup();
        k
    }
}

/// Candidate value function: grid samples on the full grid, exactly affine
/// with slope one above `a*`, plus the investment fraction and band layout.
#[derive(Debug, Clone)]
pub struct CandidateValue {
    core: GridFn,
    gamma: Vec<f64>,
    a_star: f64,
    v_top: f64,
    bands: BandStructure,
}

impl CandidateValue {
    /// Assembles a candidate; `gamma` has one sample per grid node.
    pub fn new(core: GridFn, gamma: Vec<f64>, bands: BandStructure) -> Result<Self> {
        if gamma.len() != core.grid().len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} gamma samples, got {}",
                core.grid().len(),
                gamma.len()
            )));
        }
        let a_star = bands.a_star();
        let v_top = core.eval(a_star)?;
        Ok(Self { core, gamma, a_star, v_top, bands })
    }

    pub fn grid(&self) -> &Grid {
        self.core.grid()
    }

    pub fn core(&self) -> &GridFn {
        &self.core
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn a_star(&self) -> f64 {
        self.a_star
    }

    pub fn v0(&self) -> f64 {
        self.core.values()[0]
    }

    /// `V(a*)`.
    pub fn value_at_top(&self) -> f64 {
        self.v_top
    }

    pub fn bands(&self) -> &BandStructure {
        &self.bands
    }

    /// Replaces the stored `V(a*)` by an exactly known value.
    pub(crate) fn with_top_value(mut self, v_top: f64) -> Self {
        self.v_top = v_top;
        self
    }

    /// `V(x)` for any `x >= 0`, affine beyond `a*`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if x >= self.a_star {
            return Ok(self.v_top + (x - self.a_star));
        }
        self.core.eval(x)
    }

    pub fn eval_deriv(&self, x: f64) -> Result<f64> {
        if x >= self.a_star {
            return Ok(1.0);
        }
        self.core.eval_deriv(x)
    }

    /// Investment fraction at `x`, linear between nodes and constant beyond the grid.
    pub fn gamma_at(&self, x: f64) -> f64 {
        let g = self.grid();
        if x >= g.x_max() {
            return self.gamma[g.n()];
        }
        let k = g.cell(x);
        let t = ((x - g.x(k)) / g.h()).clamp(0.0, 1.0);
        self.gamma[k] + t * (self.gamma[k + 1] - self.gamma[k])
    }
}

/// `(w1, x*)`: minimum of `W'` and its smallest minimizer, refined by golden
/// section on the Hermite interpolant of `W'` to `h / 100`.
pub fn argmin_wprime(ws: &WSolution) -> Result<(f64, f64)> {
    let grid = ws.grid();
    let d = ws.w().deriv();
    let mut idx = 0;
    for (i, &v) in d.iter().enumerate() {
        if v < d[idx] {
            idx = i;
        }
    }
    if idx == grid.n() {
        return Err(Error::GridTooShort { x_max: grid.x_max() });
    }
    if idx == 0 {
        return Ok((d[0], 0.0));
    }
    let wp = ws.wprime();
    let f = |x: f64| wp.hermite(x).0;
    let (x, v) = golden_min(f, grid.x(idx - 1), grid.x(idx + 1), grid.h() / 100.0);
    if v < d[idx] {
        Ok((v, x))
    } else {
        Ok((d[idx], grid.x(idx)))
    }
}

/// Golden-section minimization of a unimodal `f` on `[a, b]`.
pub(crate) fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Value of the barrier strategy at `y`: `W(x)/W'(y)` below `y`, slope one above.
pub fn barrier_value(ws: &WSolution, y: f64) -> Result<CandidateValue> {
    let grid = *ws.grid();
    if !(0.0..=grid.x_max()).contains(&y) {
        return Err(Error::Domain { x: y, lo: 0.0, hi: grid.x_max() });
    }
    let wy = ws.wprime().hermite(y).0;
    let top = ws.w().hermite(y).0 / wy;
    let w = ws.w().values();
    let d = ws.w().deriv();
    let mut values = Vec::with_capacity(grid.len());
    let mut deriv = Vec::with_capacity(grid.len());
    let mut gamma = Vec::with_capacity(grid.len());
    let mut last_gamma = ws.gamma()[0];
    for i in 0..grid.len() {
        let x = grid.x(i);
        if x <= y {
            values.push(w[i] / wy);
            deriv.push(d[i] / wy);
            last_gamma = ws.gamma()[i];
        } else {
            values.push(top + (x - y));
            deriv.push(1.0);
        }
        gamma.push(last_gamma);
    }
    let mut v = CandidateValue::new(GridFn::new(grid, values, deriv)?, gamma, BandStructure::barrier(y))?;
    v.v_top = top;
    Ok(v)
}

pub const BARRIER_PROBES: usize = 50;

/// Barrier value at `x* = argmin W'`, checked on `[0, x*]` against a probe
/// set of other barriers.
pub fn optimal_barrier(ws: &WSolution) -> Result<CandidateValue> {
    let (_, x_star) = argmin_wprime(ws)?;
    let v = barrier_value(ws, x_star)?;
    if let Some((y, x, _)) = barrier_excess(ws, &v, x_star) {
        return Err(Error::BarrierNotMaximal { y, x });
    }
    Ok(v)
}

/// Largest amount `(y, x, excess)` by which a probe barrier `y` beats `v` at a
/// grid node `x <= x_limit`, if any exceeds `1e-9` relative.
pub fn barrier_excess(ws: &WSolution, v: &CandidateValue, x_limit: f64) -> Option<(f64, f64, f64)> {
    let grid = ws.grid();
    let w = ws.w().values();
    let wp = ws.wprime();
    let mut worst: Option<(f64, f64, f64)> = None;
    for k in 0..BARRIER_PROBES {
        let y = grid.x_max() * k as f64 / BARRIER_PROBES as f64;
        let wy = wp.hermite(y).0;
        let top = ws.w().hermite(y).0 / wy;
        for (i, &vi) in v.core().values().iter().enumerate() {
            let x = grid.x(i);
            if x > x_limit {
                break;
            }
            let other = if x <= y { w[i] / wy } else { top + (x - y) };
            let excess = other - vi;
            if excess > 1e-9 * vi.abs().max(1.0) && worst.is_none_or(|t| excess > t.2) {
                worst = Some((y, x, excess));
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClaimDist, ModelParams};
    use crate::wsolve::solve_w;
    use approx::assert_abs_diff_eq;

    #[test]
    fn band_structure_validation_and_lookup() {
        assert!(BandStructure::new(vec![]).is_err());
        assert!(BandStructure::new(vec![Band { bottom: 0.5, top: 1.0 }]).is_err());
        assert!(BandStructure::new(vec![Band { bottom: 0.0, top: 1.0 }, Band { bottom: 0.8, top: 2.0 }]).is_err());
        let b = BandStructure::new(vec![Band { bottom: 0.0, top: 0.0 }, Band { bottom: 0.3, top: 2.9 }]).unwrap();
        assert!(b.zero_absorbing());
        assert_eq!(b.a_star(), 2.9);
        assert_eq!(b.payout_target(0.1), Some(0.0));
        assert_eq!(b.payout_target(1.0), None);
        assert_eq!(b.payout_target(5.0), Some(2.9));
        assert_eq!(b.knots(), vec![0.3, 2.9]);
    }

    #[test]
    fn golden_finds_parabola_vertex() {
        let (x, v) = golden_min(|x| (x - 0.3).powi(2) + 1.0, 0.0, 1.0, 1e-9);
        assert_abs_diff_eq!(x, 0.3, epsilon = 1e-7);
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn barrier_at_zero_is_shifted_identity() {
        let p = ModelParams::new(4.0, 1.0, 0.5, 0.3, 2.0);
        let d = ClaimDist::exponential(1.0).unwrap();
        let ws = solve_w(&p, &d, Grid::new(30.0, 2.5e-3).unwrap()).unwrap();
        let v = barrier_value(&ws, 0.0).unwrap();
        for x in [0.0, 0.5, 3.0, 17.3] {
            assert_abs_diff_eq!(v.eval(x).unwrap(), x + p.p / (p.c + p.beta), epsilon = 1e-12);
        }
        assert!(v.bands().zero_absorbing());
    }

    #[test]
    fn barrier_slope_is_one_at_the_barrier() {
        let p = ModelParams::new(4.0, 1.0, 0.5, 0.3, 2.0);
        let d = ClaimDist::exponential(1.0).unwrap();
        let ws = solve_w(&p, &d, Grid::new(30.0, 2.5e-3).unwrap()).unwrap();
        for y in [1.0, 2.5, 7.5] {
            let v = barrier_value(&ws, y).unwrap();
            assert_abs_diff_eq!(v.core().eval_deriv(y).unwrap(), 1.0, epsilon = 1e-12);
            assert_eq!(v.eval_deriv(y + 0.1).unwrap(), 1.0);
        }
    }
}
