//! Uniform grids, sampled functions with derivative data, and the claim
//! convolution `int_0^x f(x - a) dF(a)` shared by every operator.

use crate::error::{Error, Result};
use crate::model::{ClaimDist, ModelParams};

/// Uniform grid `x_i = i * h`, `i = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    h: f64,
    n: usize,
}

impl Grid {
    pub const MIN_INTERVALS: usize = 16;

    /// Grid on `[0, x_max]` with step `h`; `x_max` must be a multiple of `h`.
    pub fn new(x_max: f64, h: f64) -> Result<Self> {
        if !(h > 0.0 && x_max > 0.0 && x_max.is_finite()) {
            return Err(Error::InvalidGrid(format!("need h > 0 and x_max > 0, got h = {h}, x_max = {x_max}")));
        }
        let n = (x_max / h).round() as usize;
        if (n as f64 * h - x_max).abs() > 1e-12 * x_max.max(1.0) {
            return Err(Error::InvalidGrid(format!("x_max = {x_max} is not a multiple of h = {h}")));
        }
        Self::with_intervals(h, n)
    }

    pub fn with_intervals(h: f64, n: usize) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidGrid(format!("step must be positive, got {h}")));
        }
        if n < Self::MIN_INTERVALS {
            return Err(Error::InvalidGrid(format!(
                "need at least {} intervals, got {n}",
                Self::MIN_INTERVALS
            )));
        }
        Ok(Self { h, n })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Number of intervals; there are `n + 1` nodes.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.n)
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n).map(move |i| self.x(i))
    }

    /// Index of the cell `[x_k, x_{k+1}]` containing `x`, clamped to the grid.
    pub fn cell(&self, x: f64) -> usize {
        ((x / self.h).floor().max(0.0) as usize).min(self.n - 1)
    }

    /// Same grid step, restricted to the first `n` intervals.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        Self::with_intervals(self.h, n.min(self.n))
    }

    /// Grid with half the step over the same interval.
    pub fn refined(&self) -> Self {
        Self { h: self.h / 2.0, n: self.n * 2 }
    }
}

/// A function sampled on a grid together with its first derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFn {
    grid: Grid,
    values: Vec<f64>,
    deriv: Vec<f64>,
}

impl GridFn {
    pub fn new(grid: Grid, values: Vec<f64>, deriv: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() || deriv.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} samples, got {} values and {} derivatives",
                grid.len(),
                values.len(),
                deriv.len()
            )));
        }
        Ok(Self { grid, values, deriv })
    }

    /// Samples `f` and `df` at the grid nodes.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> Self {
        let values = grid.xs().map(&f).collect();
        let deriv = grid.xs().map(&df).collect();
        Self { grid, values, deriv }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn deriv(&self) -> &[f64] {
        &self.deriv
    }

    fn check(&self, x: f64) -> Result<()> {
        let hi = self.grid.x_max();
        if !(0.0..=hi * (1.0 + 1e-14)).contains(&x) {
            return Err(Error::Domain { x, lo: 0.0, hi });
        }
        Ok(())
    }

    /// Cubic Hermite interpolation on the containing cell.
    pub fn eval(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        Ok(self.hermite(x).0)
    }

    /// Derivative of the Hermite interpolant.
    pub fn eval_deriv(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        Ok(self.hermite(x).1)
    }

    /// Value and derivative of the interpolant; `x` is assumed in range.
    pub(crate) fn hermite(&self, x: f64) -> (f64, f64) {
        let h = self.grid.h;
        let k = self.grid.cell(x);
        hermite_cell(
            h,
            (x - self.grid.x(k)) / h,
            self.values[k],
            self.values[k + 1],
            self.deriv[k],
            self.deriv[k + 1],
        )
    }
}

/// Cubic Hermite on a cell of width `h` at relative position `t`.
pub(crate) fn hermite_cell(h: f64, t: f64, y0: f64, y1: f64, d0: f64, d1: f64) -> (f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let value = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
    let dh00 = (6.0 * t2 - 6.0 * t) / h;
    let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
    let dh01 = (-6.0 * t2 + 6.0 * t) / h;
    let dh11 = 3.0 * t2 - 2.0 * t;
    let slope = dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1;
    (value, slope)
}

/// Product-integration weights for `int_0^{x_i} f(x_i - a) dF(a)` with `f`
/// linear between nodes and `dF` integrated exactly on each cell.
///
/// The cell `[x_k, x_{k+1}]` contributes `lead_k f(x_{i-k}) + trail_k f(x_{i-k-1})`.
/// Summing by node gives one weight per offset; see [`ClaimKernel::convolve`].
#[derive(Debug, Clone)]
pub struct ClaimKernel {
    // combined weight on f(x_{i-j}) for j < i
    combined: Vec<f64>,
    // trail weight of cell j, used for the final node f(x_0)
    trail: Vec<f64>,
}

impl ClaimKernel {
    pub fn new(dist: &ClaimDist, h: f64, n: usize) -> Self {
        let cells = ((dist.effective_support() / h).ceil() as usize + 1).min(n);
        let mut lead = Vec::with_capacity(cells);
        let mut trail = Vec::with_capacity(cells);
        for k in 0..cells {
            let a = k as f64 * h;
            let b = a + h;
            let mass = dist.mass(a, b);
            let moment = dist.partial_moment(a, b);
            // int (a - x_k)/h dF = (moment - x_k mass)/h
            let t = ((moment - a * mass) / h).clamp(0.0, mass);
            trail.push(t);
            lead.push(mass - t);
        }
        let mut combined = Vec::with_capacity(cells + 1);
        for j in 0..=cells {
            let a = lead.get(j).copied().unwrap_or(0.0);
            let b = if j > 0 { trail[j - 1] } else { 0.0 };
            combined.push(a + b);
        }
        Self { combined, trail }
    }

    pub fn for_grid(dist: &ClaimDist, grid: &Grid) -> Self {
        Self::new(dist, grid.h(), grid.n())
    }

    /// Weight multiplying `f(x_i)` itself.
    pub fn self_weight(&self) -> f64 {
        self.combined[0]
    }

    /// Convolution at node `i` from node samples `v[0..=i]`.
    pub fn convolve(&self, v: &[f64], i: usize) -> f64 {
        if i == 0 {
            return 0.0;
        }
        self.self_weight() * v[i] + self.history(v, i)
    }

    /// Convolution at node `i` excluding the `f(x_i)` term; reads only `v[0..i]`.
    pub fn history(&self, v: &[f64], i: usize) -> f64 {
        if i == 0 {
            return 0.0;
        }
        let jmax = (i - 1).min(self.combined.len() - 1);
        let mut s = 0.0;
        // j = 1..=jmax over v[i-1], v[i-2], ...
        for (w, x) in self.combined[1..=jmax].iter().zip(v[i - jmax..i].iter().rev()) {
            s += w * x;
        }
        if let Some(t) = self.trail.get(i - 1) {
            s += t * v[0];
        }
        s
    }
}

/// `int_0^{x_i} f(x_i - a) dF(a)` by product trapezoidal quadrature on the grid.
pub fn claim_convolve(f: &GridFn, dist: &ClaimDist, i: usize) -> Result<f64> {
    if i > f.grid.n() {
        return Err(Error::Domain { x: f.grid.x(i), lo: 0.0, hi: f.grid.x_max() });
    }
    let kernel = ClaimKernel::for_grid(dist, &f.grid);
    Ok(kernel.convolve(&f.values, i))
}

/// Convolution at an arbitrary point `x` with mesh `a_k = k h` (last cell partial),
/// `f` linear between mesh points and `dF` integrated exactly.
pub fn convolve_at(f: impl Fn(f64) -> f64, dist: &ClaimDist, x: f64, h: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let end = x.min(dist.effective_support() + h);
    let mut s = 0.0;
    let mut a = 0.0;
    let mut fa = f(x);
    while a < end {
        let b = (a + h).min(x);
        let width = b - a;
        let mass = dist.mass(a, b);
        let moment = dist.partial_moment(a, b);
        let t = ((moment - a * mass) / width).clamp(0.0, mass);
        let fb = f(x - b);
        s += (mass - t) * fa + t * fb;
        a = b;
        fa = fb;
    }
    s
}

/// `M(f)(x_i) = (c + beta) f(x_i) - beta int_0^{x_i} g(x_i - a) dF(a)` where `g`
/// is `f` above `x0` and `w0` below it. With no `w0` this is the plain operator.
pub fn m_operator(
    f: &GridFn,
    w0: Option<(&GridFn, f64)>,
    dist: &ClaimDist,
    params: &ModelParams,
    i: usize,
) -> Result<f64> {
    let grid = f.grid;
    if i > grid.n() {
        return Err(Error::Domain { x: grid.x(i), lo: 0.0, hi: grid.x_max() });
    }
    let x = grid.x(i);
    let kernel = ClaimKernel::for_grid(dist, &grid);
    let conv = match w0 {
        None => kernel.convolve(&f.values, i),
        Some((w0, x0)) => {
            if x < x0 {
                return Err(Error::Domain { x, lo: x0, hi: grid.x_max() });
            }
            let joined: Vec<f64> = (0..=i)
                .map(|j| if grid.x(j) < x0 { w0.values[j] } else { f.values[j] })
                .collect();
            kernel.convolve(&joined, i)
        }
    };
    Ok((params.c + params.beta) * f.values[i] - params.beta * conv)
}

/// Second derivative from stored first derivatives by central differences,
/// with second-order one-sided stencils at the ends.
pub fn central_second_derivative(deriv: &[f64], h: f64) -> Vec<f64> {
    let n = deriv.len();
    (0..n)
        .map(|i| {
            if i == 0 {
                (-3.0 * deriv[0] + 4.0 * deriv[1] - deriv[2]) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * deriv[i] - 4.0 * deriv[i - 1] + deriv[i - 2]) / (2.0 * h)
            } else {
                (deriv[i + 1] - deriv[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn exp1() -> ClaimDist {
        ClaimDist::exponential(1.0).unwrap()
    }

    #[test]
    fn grid_rejects_short_or_misaligned() {
        assert!(Grid::new(1.0, 0.1).is_err());
        assert!(Grid::new(1.0, 0.3).is_err());
        let g = Grid::new(30.0, 1e-3).unwrap();
        assert_eq!(g.n(), 30_000);
        assert!((g.x_max() - 30.0).abs() < 1e-12);
    }

    #[test]
    fn hermite_reproduces_constants_and_lines() {
        let g = Grid::new(2.0, 0.1).unwrap();
        let one = GridFn::from_fn(g, |_| 1.0, |_| 0.0);
        assert_abs_diff_eq!(one.eval(0.734).unwrap(), 1.0, epsilon = 1e-15);
        let id = GridFn::from_fn(g, |x| x, |_| 1.0);
        assert_abs_diff_eq!(id.eval(0.05).unwrap(), 0.05, epsilon = 1e-15);
        let cubic = GridFn::from_fn(g, |x| x * x * x - x, |x| 3.0 * x * x - 1.0);
        assert_abs_diff_eq!(cubic.eval(1.234).unwrap(), 1.234f64.powi(3) - 1.234, epsilon = 1e-13);
        assert_abs_diff_eq!(cubic.eval_deriv(1.234).unwrap(), 3.0 * 1.234f64.powi(2) - 1.0, epsilon = 1e-12);
    }

    #[test]
    fn eval_outside_domain_fails() {
        let g = Grid::new(2.0, 0.1).unwrap();
        let f = GridFn::from_fn(g, |x| x, |_| 1.0);
        assert!(matches!(f.eval(-0.1), Err(Error::Domain { .. })));
        assert!(matches!(f.eval(2.5), Err(Error::Domain { .. })));
    }

    #[test]
    fn convolving_one_gives_cdf() {
        let g = Grid::new(4.0, 1e-2).unwrap();
        let one = GridFn::from_fn(g, |_| 1.0, |_| 0.0);
        for d in [exp1(), ClaimDist::piecewise_uniform(0.7, 1.0).unwrap()] {
            for i in [0, 50, 80, 100, 400] {
                let got = claim_convolve(&one, &d, i).unwrap();
                assert_abs_diff_eq!(got, d.cdf(g.x(i)), epsilon = 1e-12);
            }
        }
        let got = claim_convolve(&one, &exp1(), 100).unwrap();
        assert_abs_diff_eq!(got, 1.0 - (-1.0f64).exp(), epsilon = 1e-6);
    }

    #[test]
    fn m_operator_at_zero_and_one() {
        let params = ModelParams::new(4.0, 1.0, 0.5, 0.3, 2.0);
        let g = Grid::new(2.0, 1e-3).unwrap();
        let one = GridFn::from_fn(g, |_| 1.0, |_| 0.0);
        assert_eq!(m_operator(&one, None, &exp1(), &params, 0).unwrap(), 1.5);
        let m1 = m_operator(&one, None, &exp1(), &params, 1000).unwrap();
        assert_abs_diff_eq!(m1, 1.5 - (1.0 - (-1.0f64).exp()), epsilon = 1e-5);
    }

    #[test]
    fn split_operator_with_matching_pieces_is_plain() {
        let params = ModelParams::new(4.0, 1.0, 0.5, 0.3, 2.0);
        let g = Grid::new(3.0, 1e-2).unwrap();
        let f = GridFn::from_fn(g, |x| 1.0 + x * x, |x| 2.0 * x);
        let plain = m_operator(&f, None, &exp1(), &params, 250).unwrap();
        let split = m_operator(&f, Some((&f, 1.234)), &exp1(), &params, 250).unwrap();
        assert_abs_diff_eq!(plain, split, epsilon = 1e-14);
        assert!(m_operator(&f, Some((&f, 1.234)), &exp1(), &params, 100).is_err());
    }

    #[test]
    fn convolve_at_agrees_with_grid_rule_on_nodes() {
        let g = Grid::new(3.0, 1e-2).unwrap();
        let f = GridFn::from_fn(g, |x| (0.5 * x).sin() + 2.0, |x| 0.5 * (0.5 * x).cos());
        let d = exp1();
        let on_grid = claim_convolve(&f, &d, 170).unwrap();
        let off = convolve_at(|y| f.eval(y.max(0.0)).unwrap(), &d, g.x(170), g.h());
        assert_abs_diff_eq!(on_grid, off, epsilon = 1e-12);
    }
}
