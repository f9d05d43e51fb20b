//! Numbers checked against independent quadrature or closed forms computed in
//! this file, then frozen.

use approx::assert_abs_diff_eq;
use divband::barrier::barrier_value;
use divband::gridfn::{convolve_at, m_operator};
use divband::oracle::evaluate_policy;
use divband::wsolve::{boundary_derivatives, solve_w, taylor_seed};
use divband::{ClaimDist, Grid, GridFn, ModelParams};

/// Adaptive Simpson quadrature, used only as an independent reference.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 40)
}

fn barrier_model() -> (ModelParams, ClaimDist) {
    (ModelParams::new(4.0, 1.0, 0.5, 0.3, 2.0), ClaimDist::exponential(1.0).unwrap())
}

fn two_band_model() -> (ModelParams, ClaimDist) {
    (ModelParams::new(1.6, 1.0, 0.3, 0.2, 1.0), ClaimDist::piecewise_uniform(0.7, 1.0).unwrap())
}

#[test]
fn convolution_of_identity_against_exponential_claims() {
    let reference = simpson(&|a: f64| (2.0 - a) * (-a).exp(), 0.0, 2.0, 1e-13);
    let frozen = 1.135_335_283_236_612_7;
    assert_abs_diff_eq!(reference, frozen, epsilon = 1e-11);
    assert_abs_diff_eq!(frozen, 1.0 + (-2.0f64).exp(), epsilon = 1e-15);
    // exact for piecewise-linear integrands
    let d = ClaimDist::exponential(1.0).unwrap();
    assert_abs_diff_eq!(convolve_at(|y| y, &d, 2.0, 1e-3), frozen, epsilon = 1e-12);
    assert_abs_diff_eq!(convolve_at(|y| y, &d, 2.0, 0.37), frozen, epsilon = 1e-12);
}

#[test]
fn m_operator_of_square_against_uniform_claims() {
    let (p, d) = two_band_model();
    let reference = (p.c + p.beta) - p.beta * simpson(&|a: f64| (1.0 - a).powi(2) * 10.0 / 3.0, 0.7, 1.0, 1e-14);
    let frozen = 1.27;
    assert_abs_diff_eq!(reference, frozen, epsilon = 1e-12);
    let g = Grid::new(2.0, 1e-3).unwrap();
    let f = GridFn::from_fn(g, |x| x * x, |x| 2.0 * x);
    let i = 1000;
    assert_abs_diff_eq!(g.x(i), 1.0, epsilon = 1e-15);
    assert_abs_diff_eq!(m_operator(&f, None, &d, &p, i).unwrap(), frozen, epsilon = 1e-6);
}

#[test]
fn boundary_seed_values() {
    let (p, d) = barrier_model();
    let (d1, d2) = boundary_derivatives(&p, &d);
    assert_abs_diff_eq!(d1, 0.375, epsilon = 1e-15);
    assert_abs_diff_eq!(d2, -0.1375, epsilon = 1e-15);
    let (p, d) = two_band_model();
    let (d1, d2) = boundary_derivatives(&p, &d);
    assert_abs_diff_eq!(d1, 0.8125, epsilon = 1e-15);
    // no claim density at zero
    assert_abs_diff_eq!(d2, 1.1 * 1.3 / 2.56, epsilon = 1e-15);
    let (w, wd, wdd) = taylor_seed(&p, &d, 0.0);
    assert_eq!((w, wd, wdd), (1.0, d1, d2));
}

#[test]
fn barrier_at_zero_is_zero_surplus_strategy() {
    let (p, d) = two_band_model();
    let ws = solve_w(&p, &d, Grid::new(24.0, 1e-3).unwrap()).unwrap();
    let v = barrier_value(&ws, 0.0).unwrap();
    for x in [0.0, 0.3, 1.7, 5.0, 7.9] {
        assert_abs_diff_eq!(v.eval(x).unwrap(), x + p.p / (p.c + p.beta), epsilon = 1e-12);
        assert_abs_diff_eq!(v.eval_deriv(x).unwrap(), 1.0, epsilon = 1e-12);
    }
}

#[test]
fn no_claims_no_investment_policy_value_is_exponential() {
    // p V' = c V below the barrier b, V'(b) = 1: V(x) = (p/c) exp(c (x - b) / p)
    let p = ModelParams::new(2.0, 0.0, 0.4, 0.1, 1.0);
    let d = ClaimDist::exponential(1.0).unwrap();
    let g = Grid::new(6.0, 1e-3).unwrap();
    let b = 3.0;
    let pay: Vec<bool> = g.xs().map(|x| x > b + 1e-9).collect();
    let v = evaluate_policy(&p, &d, &g, &pay, &vec![0.0; g.len()]).unwrap();
    for x in [0.0, 1.0, 2.5] {
        let i = (x / g.h()).round() as usize;
        let exact = p.p / p.c * (p.c * (x - b) / p.p).exp();
        assert_abs_diff_eq!(v[i], exact, epsilon = 2e-3 * exact);
    }
}
