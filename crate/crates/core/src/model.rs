//! Model parameters and claim-size distributions.
//!
//! The surplus evolves as a compound Poisson risk process with premium rate
//! `p` and claim intensity `beta`, part of which may be held in a risky asset
//! with drift `r` and volatility `sigma`. Dividends are discounted at rate `c`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The five scalar parameters of the controlled surplus process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Premium rate.
    pub p: f64,
    /// Claim arrival intensity.
    pub beta: f64,
    /// Discount rate.
    pub c: f64,
    /// Drift of the risky asset.
    pub r: f64,
    /// Volatility of the risky asset.
    pub sigma: f64,
}

impl ModelParams {
    pub fn new(p: f64, beta: f64, c: f64, r: f64, sigma: f64) -> Self {
        Self { p, beta, c, r, sigma }
    }

    /// Checks `p, beta, sigma > 0` and `c > r > 0`.
    pub fn validate(&self) -> Result<()> {
        self.check(false)
    }

    /// Same as [`validate`](Self::validate) but admits `beta = 0` (no claims),
    /// which the scale-function solver accepts as a degenerate input.
    pub fn validate_allow_no_claims(&self) -> Result<()> {
        self.check(true)
    }

    fn check(&self, allow_zero_beta: bool) -> Result<()> {
        let positive = |name: &'static str, value: f64| {
            if value > 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(Error::NonPositiveParam { name, value })
            }
        };
        positive("p", self.p)?;
        if !(allow_zero_beta && self.beta == 0.0) {
            positive("beta", self.beta)?;
        }
        positive("sigma", self.sigma)?;
        positive("r", self.r)?;
        if !self.c.is_finite() || self.c <= self.r {
            return Err(Error::DiscountBelowDrift { c: self.c, r: self.r });
        }
        Ok(())
    }

    /// `p / (c - r)`: the level above which the payout region is guaranteed to start.
    pub fn payout_bound(&self) -> f64 {
        self.p / (self.c - self.r)
    }

    /// `p / (c + beta)`: value at zero of the strategy paying the premium until ruin.
    pub fn zero_surplus_value(&self) -> f64 {
        self.p / (self.c + self.beta)
    }
}

/// Mass below which the distribution tail is ignored by quadrature.
pub const TAIL_MASS: f64 = 1e-12;

/// Claim-size law with a bounded density on `[0, inf)`.
#[derive(Debug, Clone, PartialEq)]
pub enum ClaimDist {
    Exponential { rate: f64 },
    /// Uniform density on `[lo, hi]`; the CDF is piecewise linear.
    PiecewiseUniform { lo: f64, hi: f64 },
    Tabulated(Tabulated),
}

/// Piecewise-linear density through samples at `x_k = k * dx`, zero beyond the
/// last sample. Samples are renormalised to unit mass on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    dx: f64,
    density: Vec<f64>,
    // cdf at the sample points
    cum: Vec<f64>,
}

impl Tabulated {
    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn density_samples(&self) -> &[f64] {
        &self.density
    }

    fn end(&self) -> f64 {
        self.dx * (self.density.len() - 1) as f64
    }

    fn segment(&self, x: f64) -> Option<(usize, f64)> {
        if x < 0.0 || x >= self.end() {
            return None;
        }
        let k = ((x / self.dx).floor() as usize).min(self.density.len() - 2);
        Some((k, x - k as f64 * self.dx))
    }

    fn density(&self, x: f64) -> f64 {
        match self.segment(x) {
            Some((k, t)) => {
                let slope = (self.density[k + 1] - self.density[k]) / self.dx;
                self.density[k] + slope * t
            }
            None if x == self.end() => *self.density.last().unwrap(),
            None => 0.0,
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self.segment(x) {
            Some((k, t)) => {
                let slope = (self.density[k + 1] - self.density[k]) / self.dx;
                (self.cum[k] + self.density[k] * t + 0.5 * slope * t * t).min(1.0)
            }
            None => 1.0,
        }
    }

    /// `int_a^b x f(x) dx` over one segment, `[a, b]` inside segment `k`.
    fn segment_moment(&self, k: usize, a: f64, b: f64) -> f64 {
        let x0 = k as f64 * self.dx;
        let slope = (self.density[k + 1] - self.density[k]) / self.dx;
        // f(x) = d0 + slope (x - x0) = (d0 - slope x0) + slope x
        let c0 = self.density[k] - slope * x0;
        c0 * (b * b - a * a) / 2.0 + slope * (b * b * b - a * a * a) / 3.0
    }

    fn moment(&self, a: f64, b: f64) -> f64 {
        let a = a.max(0.0);
        let b = b.min(self.end());
        if b <= a {
            return 0.0;
        }
        let last = self.density.len() - 2;
        let ka = ((a / self.dx).floor() as usize).min(last);
        let kb = ((b / self.dx).floor() as usize).min(last);
        let mut total = 0.0;
        for k in ka..=kb {
            let lo = a.max(k as f64 * self.dx);
            let hi = b.min((k + 1) as f64 * self.dx);
            if hi > lo {
                total += self.segment_moment(k, lo, hi);
            }
        }
        total
    }

    fn quantile(&self, u: f64) -> f64 {
        // first segment whose end cdf reaches u
        let k = match self.cum.iter().position(|&c| c >= u) {
            Some(0) => 0,
            Some(j) => j - 1,
            None => return self.end(),
        };
        let k = k.min(self.density.len() - 2);
        let slope = (self.density[k + 1] - self.density[k]) / self.dx;
        let target = u - self.cum[k];
        let d0 = self.density[k];
        // solve d0 t + slope t^2 / 2 = target on [0, dx]
        let t = if slope.abs() < 1e-14 * d0.max(1.0) {
            if d0 > 0.0 {
                target / d0
            } else {
                0.0
            }
        } else {
            let disc = (d0 * d0 + 2.0 * slope * target).max(0.0);
            // numerically stable root of the quadratic
            2.0 * target / (d0 + disc.sqrt())
        };
        k as f64 * self.dx + t.clamp(0.0, self.dx)
    }
}

impl ClaimDist {
    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidDistribution(format!(
                "exponential rate must be positive, got {rate}"
            )));
        }
        Ok(ClaimDist::Exponential { rate })
    }

    pub fn piecewise_uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::InvalidDistribution(format!(
                "uniform support must satisfy 0 <= lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(ClaimDist::PiecewiseUniform { lo, hi })
    }

    /// Tabulated density samples at spacing `dx`, starting at zero.
    pub fn tabulated(dx: f64, samples: Vec<f64>) -> Result<Self> {
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::InvalidDistribution(format!("sample spacing must be positive, got {dx}")));
        }
        if samples.len() < 2 {
            return Err(Error::InvalidDistribution("need at least two density samples".into()));
        }
        if let Some((i, v)) = samples.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidDistribution(format!("density sample {i} is {v}")));
        }
        let mass: f64 = samples.windows(2).map(|w| 0.5 * dx * (w[0] + w[1])).sum();
        if mass <= 0.0 {
            return Err(Error::InvalidDistribution("density has zero mass".into()));
        }
        let density: Vec<f64> = samples.iter().map(|v| v / mass).collect();
        let mut cum = Vec::with_capacity(density.len());
        cum.push(0.0);
        for w in density.windows(2) {
            let last = *cum.last().unwrap();
            cum.push(last + 0.5 * dx * (w[0] + w[1]));
        }
        Ok(ClaimDist::Tabulated(Tabulated { dx, density, cum }))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            ClaimDist::Exponential { rate } => -(-rate * x).exp_m1(),
            ClaimDist::PiecewiseUniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            ClaimDist::Tabulated(t) => t.cdf(x),
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match self {
            ClaimDist::Exponential { rate } => rate * (-rate * x).exp(),
            ClaimDist::PiecewiseUniform { lo, hi } => {
                if x > *lo && x <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            ClaimDist::Tabulated(t) => t.density(x),
        }
    }

    /// Right limit of the density at zero, `F'(0+)`.
    pub fn density_at_zero(&self) -> f64 {
        match self {
            ClaimDist::Exponential { rate } => *rate,
            ClaimDist::PiecewiseUniform { lo, hi } => {
                if *lo == 0.0 {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            ClaimDist::Tabulated(t) => t.density[0],
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ClaimDist::Exponential { rate } => 1.0 / rate,
            ClaimDist::PiecewiseUniform { lo, hi } => 0.5 * (lo + hi),
            ClaimDist::Tabulated(t) => t.moment(0.0, t.end()),
        }
    }

    pub fn density_bound(&self) -> f64 {
        match self {
            ClaimDist::Exponential { rate } => *rate,
            ClaimDist::PiecewiseUniform { lo, hi } => 1.0 / (hi - lo),
            ClaimDist::Tabulated(t) => t.density.iter().cloned().fold(0.0, f64::max),
        }
    }

    /// Point beyond which the remaining claim mass is below [`TAIL_MASS`].
    pub fn effective_support(&self) -> f64 {
        match self {
            ClaimDist::Exponential { rate } => -TAIL_MASS.ln() / rate,
            ClaimDist::PiecewiseUniform { hi, .. } => *hi,
            ClaimDist::Tabulated(t) => t.end(),
        }
    }

    /// `F(b) - F(a)`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        match self {
            ClaimDist::Exponential { rate } => {
                let a = a.max(0.0);
                if b <= a {
                    return 0.0;
                }
                (-rate * a).exp() * -(-rate * (b - a)).exp_m1()
            }
            _ => self.cdf(b) - self.cdf(a),
        }
    }

    /// First partial moment `int_a^b x dF(x)`.
    pub fn partial_moment(&self, a: f64, b: f64) -> f64 {
        let a = a.max(0.0);
        if b <= a {
            return 0.0;
        }
        match self {
            ClaimDist::Exponential { rate } => {
                let d = b - a;
                let inv = 1.0 / rate;
                // e^{-ra} [ (a + 1/r)(1 - e^{-rd}) - d e^{-rd} ]
                (-rate * a).exp() * ((a + inv) * -(-rate * d).exp_m1() - d * (-rate * d).exp())
            }
            ClaimDist::PiecewiseUniform { lo, hi } => {
                let a = a.max(*lo);
                let b = b.min(*hi);
                if b <= a {
                    0.0
                } else {
                    (b * b - a * a) / (2.0 * (hi - lo))
                }
            }
            ClaimDist::Tabulated(t) => t.moment(a, b),
        }
    }

    /// Inverse-CDF sampling from a uniform draw `u` in `(0, 1)`.
    pub fn sample(&self, u: f64) -> f64 {
        match self {
            ClaimDist::Exponential { rate } => -(-u).ln_1p() / rate,
            ClaimDist::PiecewiseUniform { lo, hi } => lo + u * (hi - lo),
            ClaimDist::Tabulated(t) => t.quantile(u),
        }
    }
}
