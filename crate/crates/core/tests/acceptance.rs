//! End-to-end acceptance checks on the two reference models. Prints one
//! PASS/FAIL line per criterion and exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use divband::bands::{continuation_solve, lambda_fn, two_band_from, Base};
use divband::barrier::{argmin_wprime, barrier_value, optimal_barrier, BandStructure, CandidateValue};
use divband::oracle::policy_iteration_solve;
use divband::simulate::{estimate_value, horizon_for, SimConfig, StrategySpec};
use divband::verify::{certify, CertifyOptions};
use divband::wsolve::{boundary_derivatives, solve_w, WSolution};
use divband::{ClaimDist, Execution, Grid, ModelParams};

const H: f64 = 1e-3;

struct Model {
    params: ModelParams,
    dist: ClaimDist,
    x_max: f64,
}

fn barrier_model() -> Model {
    Model {
        params: ModelParams::new(4.0, 1.0, 0.5, 0.3, 2.0),
        dist: ClaimDist::exponential(1.0).unwrap(),
        x_max: 30.0,
    }
}

fn two_band_model() -> Model {
    Model {
        params: ModelParams::new(1.6, 1.0, 0.3, 0.2, 1.0),
        dist: ClaimDist::piecewise_uniform(0.7, 1.0).unwrap(),
        x_max: 24.0,
    }
}

/// Solved reference models shared by the criteria.
struct Fixture {
    m1: Model,
    ws1: WSolution,
    x_star: f64,
    v1: CandidateValue,
    t1: Duration,
    m2: Model,
    ws2: WSolution,
    y1: f64,
    z1: f64,
    v2: CandidateValue,
}

impl Fixture {
    fn build() -> Self {
        let m1 = barrier_model();
        let t = Instant::now();
        let ws1 = solve_w(&m1.params, &m1.dist, Grid::new(m1.x_max, H).unwrap()).unwrap();
        let (_, x_star) = argmin_wprime(&ws1).unwrap();
        let t1 = t.elapsed();
        let v1 = optimal_barrier(&ws1).unwrap();
        let m2 = two_band_model();
        let ws2 = solve_w(&m2.params, &m2.dist, Grid::new(m2.x_max, H).unwrap()).unwrap();
        let tb = two_band_from(&ws2, Execution::default()).unwrap();
        Self { m1, ws1, x_star, v1, t1, m2, ws2, y1: tb.y1, z1: tb.z1, v2: tb.candidate }
    }
}

type Outcome = (bool, String);
type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn criterion_1(f: &Fixture) -> Outcome {
    let ok = (f.x_star - 4.846).abs() <= 0.05 && f.t1 <= Duration::from_secs(60);
    (ok, format!("x_star = {:.6}, solve + argmin {:.2?}", f.x_star, f.t1))
}

fn criterion_2(f: &Fixture) -> Outcome {
    let p = &f.m1.params;
    let c1 = certify(&f.v1, p, &f.m1.dist, CertifyOptions::for_candidate(p, &f.v1));
    let ws_half = solve_w(p, &f.m1.dist, Grid::new(f.m1.x_max, H / 2.0).unwrap()).unwrap();
    let v_half = optimal_barrier(&ws_half).unwrap();
    let c_half = certify(&v_half, p, &f.m1.dist, CertifyOptions::for_candidate(p, &v_half));
    let (r1, r2) = (c1.max_positive_residual(), c_half.max_positive_residual());
    let ok = c1.passed && r1 >= 2.0 * r2;
    (ok, format!("certified = {}, tol = {:.3e}, max residual h: {r1:.3e}, h/2: {r2:.3e}", c1.passed, c1.tol))
}

fn criterion_3(f: &Fixture) -> Outcome {
    let (p, d) = (&f.m2.params, &f.m2.dist);
    let wd = f.ws2.w().deriv();
    let argmin_at_zero = wd[1..].iter().all(|&v| v > wd[0]);
    let base = barrier_value(&f.ws2, 0.0).unwrap();
    let cb = certify(&base, p, d, CertifyOptions::for_candidate(p, &base));
    let c2 = certify(&f.v2, p, d, CertifyOptions::for_candidate(p, &f.v2));
    let ok = argmin_at_zero
        && (f.y1 - 0.291).abs() <= 0.03
        && (f.z1 - 2.926).abs() <= 0.03
        && !cb.passed
        && !cb.witnesses.is_empty()
        && c2.passed;
    let detail = format!(
        "argmin W' at 0: {argmin_at_zero}, y1 = {:.6}, z1 = {:.6}, barrier-at-0 passes: {} ({} witnesses), two-band passes: {} (max {:.3e} vs tol {:.3e})",
        f.y1,
        f.z1,
        cb.passed,
        cb.witnesses.len(),
        c2.passed,
        c2.max_residual,
        c2.tol
    );
    (ok, detail)
}

fn criterion_4(f: &Fixture) -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (m, ws, expect) in [(&f.m1, &f.ws1, 0.375), (&f.m2, &f.ws2, 0.8125)] {
        let (d1, _) = boundary_derivatives(&m.params, &m.dist);
        let w0 = ws.w().values()[0];
        let wd0 = ws.w().deriv()[0];
        ok &= (w0 - 1.0).abs() <= 1e-12 && (wd0 - expect).abs() <= 1e-12 && (d1 - expect).abs() <= 1e-12;
        detail.push(format!("W(0) = {w0}, W'(0) = {wd0}"));
    }
    (ok, detail.join("; "))
}

fn check_mc(m: &Model, v: &CandidateValue, x0: f64, master: u64) -> (bool, String) {
    let spec = StrategySpec::from_candidate(v).unwrap();
    let target = v.eval(x0).unwrap();
    let cfg = SimConfig { dt: 1e-3, t_max: horizon_for(&m.params, v.a_star(), 1e-3 * target) };
    let r = estimate_value(&spec, x0, &m.params, &m.dist, 50_000, cfg, master).unwrap();
    let allowed = (3.0 * r.stderr + r.truncation_bound).max(0.02 * target);
    let err = (r.estimate - target).abs();
    let ok = err <= allowed && r.truncation_bound <= 1e-3 * target * (1.0 + 1e-9);
    (ok, format!("x0={x0}: {:.4} vs {:.4} (err {err:.4}, allowed {allowed:.4})", r.estimate, target))
}

fn criterion_5(f: &Fixture) -> Outcome {
    let t = Instant::now();
    let mut ok = true;
    let mut detail = Vec::new();
    for x0 in [1.0, 2.0, 4.0] {
        let (o, d) = check_mc(&f.m1, &f.v1, x0, 91);
        ok &= o;
        detail.push(d);
    }
    for x0 in [0.2, 1.5] {
        let (o, d) = check_mc(&f.m2, &f.v2, x0, 92);
        ok &= o;
        detail.push(d);
    }
    let elapsed = t.elapsed();
    ok &= elapsed <= Duration::from_secs(600);
    (ok, format!("{}; {elapsed:.2?}", detail.join("; ")))
}

fn criterion_6() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for m in [barrier_model(), two_band_model()] {
        let target = m.params.p / (m.params.beta + m.params.c);
        let spec = StrategySpec::constant_gamma(BandStructure::barrier(0.0), Grid::new(1.0, 1e-2).unwrap(), 0.0).unwrap();
        let cfg = SimConfig { dt: 1e-3, t_max: horizon_for(&m.params, 0.0, 1e-6 * target) };
        let r = estimate_value(&spec, 0.0, &m.params, &m.dist, 50_000, cfg, 6).unwrap();
        ok &= spec.zero_absorbing() && (r.estimate - target).abs() <= 3.0 * r.stderr;
        detail.push(format!("{:.4} vs {:.4} (stderr {:.4})", r.estimate, target, r.stderr));
    }
    (ok, detail.join("; "))
}

fn oracle_gap(m: &Model, v: &CandidateValue, span: f64) -> (f64, divband::OracleSolution) {
    let grid = Grid::with_intervals(span / 2000.0, 2000).unwrap();
    let o = policy_iteration_solve(&m.params, &m.dist, &grid, 1000, 1e-6).unwrap();
    let gap = (0..grid.len())
        .map(|i| grid.x(i))
        .filter(|&x| x <= v.a_star())
        .map(|x| (o.value().eval(x).unwrap() - v.eval(x).unwrap()).abs())
        .fold(0.0, f64::max);
    (gap, o)
}

fn criterion_7(f: &Fixture) -> Outcome {
    let (g1, _) = oracle_gap(&f.m1, &f.v1, 15.0);
    let (g2, o2) = oracle_gap(&f.m2, &f.v2, 12.0);
    let r1 = g1 / f.v1.value_at_top();
    let r2 = g2 / f.v2.value_at_top();
    let probes = o2.pays_at(0.1) && o2.pays_at(3.2) && !o2.pays_at(1.0) && !o2.pays_at(2.0);
    let ok = r1 <= 0.01 && r2 <= 0.01 && probes;
    (ok, format!("relative sup gap barrier model: {r1:.3e}, two-band model: {r2:.3e}; pay probes match: {probes}"))
}

fn criterion_8(f: &Fixture) -> Outcome {
    let mut fails = Vec::new();
    let mut worst_f: f64 = 0.0;
    for (name, m, ws, v) in [("barrier", &f.m1, &f.ws1, &f.v1), ("two-band", &f.m2, &f.ws2, &f.v2)] {
        let p = &m.params;
        let tol = CertifyOptions::for_candidate(p, v).tol;
        let grid = v.grid();
        // (a) slope at least one
        let min_slope = grid.xs().map(|x| v.eval_deriv(x).unwrap()).fold(f64::INFINITY, f64::min);
        if min_slope < 1.0 - 1e-9 {
            fails.push(format!("{name} (a): min V' = {min_slope}"));
        }
        // (b) value bounds
        for x in grid.xs() {
            let val = v.eval(x).unwrap();
            if val < x + p.p / (p.beta + p.c) - tol || val > x + p.p / p.c + tol {
                fails.push(format!("{name} (b): V({x}) = {val}"));
                break;
            }
        }
        // (c) reflection level below the payout bound
        if v.a_star() > p.payout_bound() + tol {
            fails.push(format!("{name} (c): a* = {}", v.a_star()));
        }
        // (d) full investment near zero
        if ws.full_investment_prefix() < 2 {
            fails.push(format!("{name} (d): prefix {}", ws.full_investment_prefix()));
        }
        // (e) Lambda vanishes at reflection levels
        for a in v.bands().tops() {
            let l = lambda_fn(v, p, &m.dist, a);
            if l.abs() > tol {
                fails.push(format!("{name} (e): Lambda({a}) = {l}"));
            }
        }
        // (f) continuing W from an interior point reproduces W
        let w = ws.w();
        let x0 = 1.0;
        let cs = continuation_solve(p, &m.dist, Base::Grid(w), x0, *ws.grid()).unwrap();
        let gap = (cs.start_index()..=cs.end_index())
            .map(|i| (cs.eval(grid.x(i)).0 - w.values()[i]).abs() / w.values()[i])
            .fold(0.0, f64::max);
        worst_f = worst_f.max(gap);
        if gap > 2e-4 {
            fails.push(format!("{name} (f): relative gap {gap:.3e}"));
        }
    }
    (fails.is_empty(), if fails.is_empty() { format!("(a)-(f) hold on both models, continuation gap {worst_f:.3e}") } else { fails.join("; ") })
}

fn main() -> ExitCode {
    let fixture = Fixture::build();
    let runs: Vec<(&str, Check)> = vec![
        ("1 reproduction of the single-barrier model", Box::new(|| criterion_1(&fixture))),
        ("2 certification and refinement", Box::new(|| criterion_2(&fixture))),
        ("3 reproduction of the two-band model", Box::new(|| criterion_3(&fixture))),
        ("4 exact boundary seeds", Box::new(|| criterion_4(&fixture))),
        ("5 Monte Carlo cross-validation", Box::new(|| criterion_5(&fixture))),
        ("6 zero-surplus strategy value", Box::new(criterion_6)),
        ("7 policy-iteration agreement", Box::new(|| criterion_7(&fixture))),
        ("8 property suite", Box::new(|| criterion_8(&fixture))),
    ];
    let mut all = true;
    for (name, run) in runs {
        let (ok, detail) = run();
        all &= ok;
        println!("{} criterion {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
