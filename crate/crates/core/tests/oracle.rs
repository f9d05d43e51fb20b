use divband::oracle::policy_iteration_solve;
use divband::{ClaimDist, Error, Grid, ModelParams};

fn models() -> Vec<(ModelParams, ClaimDist, f64)> {
    vec![
        (ModelParams::new(4.0, 1.0, 0.5, 0.3, 2.0), ClaimDist::exponential(1.0).unwrap(), 15.0),
        (ModelParams::new(1.6, 1.0, 0.3, 0.2, 1.0), ClaimDist::piecewise_uniform(0.7, 1.0).unwrap(), 12.0),
    ]
}

#[test]
fn value_lies_between_the_affine_bounds() {
    for (p, d, span) in models() {
        let g = Grid::with_intervals(span / 600.0, 600).unwrap();
        let o = policy_iteration_solve(&p, &d, &g, 1000, 1e-6).unwrap();
        let tol = 1e-6;
        for (i, v) in o.value().values().iter().enumerate() {
            let x = g.x(i);
            assert!(*v >= x + p.p / (p.beta + p.c) - tol, "x = {x}, V = {v}");
            assert!(*v <= x + p.p / p.c + tol, "x = {x}, V = {v}");
        }
    }
}

#[test]
fn policy_values_improve_monotonically() {
    for (p, d, span) in models() {
        let g = Grid::with_intervals(span / 600.0, 600).unwrap();
        let o = policy_iteration_solve(&p, &d, &g, 1000, 1e-6).unwrap();
        assert!(o.iterations() > 1);
        for (k, inc) in o.value_increments().iter().enumerate() {
            assert!(*inc >= -1e-9, "sweep {k}: {inc}");
        }
        assert!(*o.residual_history().last().unwrap() <= 1e-6);
    }
}

#[test]
fn iteration_budget_is_reported() {
    let (p, d, span) = models().remove(1);
    let g = Grid::with_intervals(span / 600.0, 600).unwrap();
    assert!(matches!(policy_iteration_solve(&p, &d, &g, 2, 1e-6), Err(Error::NoConvergence { iterations: 2, .. })));
}
