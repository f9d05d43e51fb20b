use std::path::Path;

use divband::bands::{search_from, BandSearch, BandSearchOptions};
use divband::barrier::{argmin_wprime, optimal_barrier, CandidateValue};
use divband::oracle::policy_iteration_solve;
use divband::simulate::{estimate_value, horizon_for, SimConfig, StrategySpec};
use divband::verify::{certify as run_certify, Certificate, CertifyOptions, DEFAULT_GAMMA_SAMPLES};
use divband::wsolve::{solve_w_with, SolveOptions, WSolution};
use divband::{Execution, Grid};
use serde::Serialize;

use crate::config::{ClaimSpec, Config, GridSpec, Model, SimSpec, TolSpec};
use crate::error::CliError;
use crate::output::{
    ensure_dir, read_candidate, sig12, write_candidate, write_csv, write_json, write_text, BandsFile,
};
use crate::svg::{line_chart, Series};
use crate::Example;

const DEFAULT_PATHS: usize = 10_000;
const DEFAULT_DT: f64 = 1e-3;

fn load(config: &Path) -> Result<Model, CliError> {
    Config::load(config)?.model()
}

fn solve(model: &Model) -> Result<WSolution, CliError> {
    let opts = SolveOptions {
        tol_resid: model.tol.resid,
        gamma_samples: model.tol.gamma_samples.unwrap_or(DEFAULT_GAMMA_SAMPLES),
        ..SolveOptions::default()
    };
    Ok(solve_w_with(&model.params, &model.dist, model.grid, opts)?)
}

fn search(model: &Model, ws: &WSolution, max_bands: usize) -> Result<BandSearch, CliError> {
    let opts = BandSearchOptions {
        max_bands,
        gamma_samples: model.tol.gamma_samples.unwrap_or(DEFAULT_GAMMA_SAMPLES),
        tol: model.tol.certify,
        execution: Execution::default(),
    };
    Ok(search_from(ws, opts)?)
}

fn certify_options(model: &Model, v: &CandidateValue) -> CertifyOptions {
    let mut opts = CertifyOptions::for_candidate(&model.params, v);
    if let Some(t) = model.tol.certify {
        opts.tol = t;
    }
    if let Some(g) = model.tol.gamma_samples {
        opts.gamma_samples = g;
    }
    opts
}

fn write_w(path: &Path, ws: &WSolution) -> Result<(), CliError> {
    let g = *ws.grid();
    let w = ws.w();
    write_csv(
        path,
        &["x", "W", "Wprime", "Wsecond", "gamma"],
        (0..g.len()).map(|i| vec![g.x(i), w.values()[i], w.deriv()[i], ws.w2()[i], ws.gamma()[i]]),
    )
}

fn print_bands(v: &CandidateValue) {
    for (k, b) in v.bands().bands().iter().enumerate() {
        if k == 0 {
            println!("band 0: [0, {}]", sig12(b.top));
        } else {
            println!("band {k}: y{k} = {}, z{k} = {}", sig12(b.bottom), sig12(b.top));
        }
    }
    println!("a_star = {}", sig12(v.a_star()));
    println!("v0 = {}", sig12(v.v0()));
}

fn print_certificate(cert: &Certificate, show: usize) {
    println!("{}", if cert.passed { "PASS" } else { "FAIL" });
    println!("tol = {}", sig12(cert.tol));
    println!("max_residual = {} at x = {}", sig12(cert.max_residual), sig12(cert.max_residual_x));
    println!("witnesses = {}", cert.witnesses.len());
    if !cert.witnesses.is_empty() && show > 0 {
        println!("{:>14} {:>14} {:>14}", "x", "gamma", "residual");
        for w in cert.witnesses.iter().take(show) {
            println!("{:>14} {:>14} {:>14}", sig12(w.x), sig12(w.gamma), sig12(w.residual));
        }
    }
    if !cert.marginal_knots.is_empty() {
        let k: Vec<String> = cert.marginal_knots.iter().map(|x| sig12(*x)).collect();
        println!("marginal at gluing points: {}", k.join(", "));
    }
}

pub fn solve_w(config: &Path, out: &Path) -> Result<(), CliError> {
    let model = load(config)?;
    let ws = solve(&model)?;
    ensure_dir(out)?;
    write_w(&out.join("w.csv"), &ws)?;
    println!("W(x_max) = {}", sig12(*ws.w().values().last().expect("nonempty grid")));
    println!("full investment on the first {} nodes", ws.full_investment_prefix());
    Ok(())
}

pub fn barrier(config: &Path, out: &Path) -> Result<(), CliError> {
    let model = load(config)?;
    let ws = solve(&model)?;
    let (w1, x_star) = argmin_wprime(&ws)?;
    let v = optimal_barrier(&ws)?;
    ensure_dir(out)?;
    write_candidate(&out.join("v1.csv"), &v)?;
    println!("w1 = {}", sig12(w1));
    println!("x_star = {}", sig12(x_star));
    Ok(())
}

pub fn bands(config: &Path, max_bands: usize, out: &Path) -> Result<(), CliError> {
    let model = load(config)?;
    let ws = solve(&model)?;
    let found = search(&model, &ws, max_bands)?;
    ensure_dir(out)?;
    write_candidate(&out.join("v.csv"), &found.candidate)?;
    write_json(&out.join("bands.json"), &BandsFile::new(&found.candidate, found.certificate.passed))?;
    print_bands(&found.candidate);
    println!(
        "certified = {} (k = {}, max residual {}, tol {})",
        found.certificate.passed,
        found.k,
        sig12(found.certificate.max_residual),
        sig12(found.certificate.tol)
    );
    Ok(())
}

pub fn certify(config: &Path, candidate: &Path, bands: Option<&Path>, show: usize) -> Result<(), CliError> {
    let model = load(config)?;
    let bands_path = match bands {
        Some(p) => p.to_path_buf(),
        None => candidate.with_file_name("bands.json"),
    };
    let layout = BandsFile::read(&bands_path)?.structure()?;
    let v = read_candidate(candidate, layout)?;
    let cert = run_certify(&v, &model.params, &model.dist, certify_options(&model, &v));
    print_certificate(&cert, show);
    Ok(())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SimOverrides {
    pub paths: Option<usize>,
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
    pub seed: Option<u64>,
}

pub fn simulate(config: &Path, x0: f64, flags: SimOverrides, max_bands: usize) -> Result<(), CliError> {
    let model = load(config)?;
    if !(x0 >= 0.0 && x0.is_finite()) {
        return Err(CliError::Config(format!("x0 must be nonnegative, got {x0}")));
    }
    let ws = solve(&model)?;
    let found = search(&model, &ws, max_bands)?;
    let v = &found.candidate;
    let SimSpec { paths, dt, t_max, seed } = model.sim;
    let target = v.eval(x0).map_err(CliError::invalid)?;
    let cfg = SimConfig {
        dt: flags.dt.or(dt).unwrap_or(DEFAULT_DT),
        t_max: flags.t_max.or(t_max).unwrap_or_else(|| horizon_for(&model.params, v.a_star(), 1e-3 * target)),
    };
    let n = flags.paths.or(paths).unwrap_or(DEFAULT_PATHS);
    let spec = StrategySpec::from_candidate(v)?;
    let r = estimate_value(&spec, x0, &model.params, &model.dist, n, cfg, flags.seed.or(seed).unwrap_or(0))?;
    println!("estimate = {}", sig12(r.estimate));
    println!("stderr = {}", sig12(r.stderr));
    println!("n_paths = {}", r.n_paths);
    println!("ruin_fraction = {}", sig12(r.ruin_fraction));
    println!("truncation_bound = {}", sig12(r.truncation_bound));
    println!("dt = {}", sig12(r.dt));
    println!("t_max = {}", sig12(r.t_max));
    println!("candidate_value = {}", sig12(target));
    Ok(())
}

pub fn oracle(
    config: &Path,
    intervals: usize,
    span: Option<f64>,
    max_iter: usize,
    tol: f64,
    out: &Path,
) -> Result<(), CliError> {
    let model = load(config)?;
    let span = span.unwrap_or(model.grid.x_max());
    if !(span > 0.0 && span.is_finite()) || intervals == 0 {
        return Err(CliError::Config(format!("oracle grid needs a positive span and intervals, got {span}, {intervals}")));
    }
    let grid = Grid::with_intervals(span / intervals as f64, intervals).map_err(CliError::invalid)?;
    let o = policy_iteration_solve(&model.params, &model.dist, &grid, max_iter, tol).map_err(|e| match e {
        divband::Error::InvalidGrid(_) => CliError::invalid(e),
        e => CliError::Solver(e),
    })?;
    ensure_dir(out)?;
    let v = o.value();
    write_csv(
        &out.join("oracle.csv"),
        &["x", "V", "pay", "gamma"],
        (0..grid.len()).map(|i| vec![grid.x(i), v.values()[i], f64::from(u8::from(o.pay()[i])), o.gamma()[i]]),
    )?;
    let s = o.summary();
    println!("iterations = {}", s.iterations);
    println!("final_residual = {}", sig12(s.final_residual));
    for (a, b) in &s.pay_intervals {
        println!("pay on [{}, {}]", sig12(*a), sig12(*b));
    }
    Ok(())
}

fn reference_config(example: Example) -> Config {
    let (p, beta, c, r, sigma, claim) = match example {
        Example::Barrier => (4.0, 1.0, 0.5, 0.3, 2.0, ClaimSpec::Exponential { rate: 1.0 }),
        Example::TwoBand => (1.6, 1.0, 0.3, 0.2, 1.0, ClaimSpec::PiecewiseUniform { lo: 0.7, hi: 1.0 }),
    };
    Config {
        p,
        beta,
        c,
        r,
        sigma,
        claim,
        grid: Some(GridSpec { x_max: None, h: None }),
        tol: TolSpec::default(),
        sim: SimSpec::default(),
    }
}

#[derive(Debug, Serialize)]
struct Summary {
    example: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    x_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    y1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    z1: Option<f64>,
    v0: f64,
    a_star: f64,
    certified: bool,
    max_residual: f64,
    tol: f64,
}

/// Samples of `f` on grid nodes up to `limit`.
fn curve(v: &CandidateValue, limit: f64, f: impl Fn(usize, f64) -> f64) -> Vec<(f64, f64)> {
    let g = v.grid();
    (0..g.len()).map(|i| (i, g.x(i))).take_while(|&(_, x)| x <= limit).map(|(i, x)| (x, f(i, x))).collect()
}

pub fn reproduce(example: Example, outdir: &Path) -> Result<(), CliError> {
    let model = reference_config(example).model()?;
    let ws = solve(&model)?;
    let found = search(&model, &ws, 2)?;
    let v = &found.candidate;
    ensure_dir(outdir)?;
    write_w(&outdir.join("w.csv"), &ws)?;
    write_candidate(&outdir.join("v.csv"), v)?;
    write_json(&outdir.join("bands.json"), &BandsFile::new(v, found.certificate.passed))?;

    let limit = (2.0 * v.a_star() + 2.0).min(model.grid.x_max());
    let core = v.core();
    let excess = curve(v, limit, |i, x| core.values()[i] - x);
    let slope = curve(v, limit, |i, _| core.deriv()[i]);
    let gamma = curve(v, v.a_star(), |i, _| v.gamma()[i]);
    let chart = |title: &str, y: &str, pts: Vec<(f64, f64)>| line_chart(title, "surplus x", y, &[Series::new(y, pts)]);

    let bands = v.bands().bands();
    let summary = match example {
        Example::Barrier => {
            let (_, x_star) = argmin_wprime(&ws)?;
            write_text(&outdir.join("fig1.svg"), &chart("Value minus surplus", "V(x) - x", excess))?;
            write_text(&outdir.join("fig2.svg"), &chart("Investment fraction", "gamma*(x)", gamma))?;
            Summary {
                example: "9.1",
                x_star: Some(round12(x_star)),
                y1: None,
                z1: None,
                v0: round12(v.v0()),
                a_star: round12(v.a_star()),
                certified: found.certificate.passed,
                max_residual: round12(found.certificate.max_residual),
                tol: round12(found.certificate.tol),
            }
        }
        Example::TwoBand => {
            write_text(&outdir.join("fig3.svg"), &chart("Value minus surplus", "V(x) - x", excess))?;
            write_text(&outdir.join("fig4.svg"), &chart("Marginal value", "V'(x)", slope))?;
            write_text(&outdir.join("fig5.svg"), &chart("Investment fraction", "gamma*(x)", gamma))?;
            let second = bands.get(1);
            Summary {
                example: "9.2",
                x_star: None,
                y1: Some(round12(second.map_or(0.0, |b| b.bottom))),
                z1: Some(round12(second.map_or(v.a_star(), |b| b.top))),
                v0: round12(v.v0()),
                a_star: round12(v.a_star()),
                certified: found.certificate.passed,
                max_residual: round12(found.certificate.max_residual),
                tol: round12(found.certificate.tol),
            }
        }
    };
    write_json(&outdir.join("summary.json"), &summary)?;
    print_bands(v);
    if v.bands().zero_absorbing() {
        let cb = model.params.c + model.params.beta;
        println!(
            "zero-surplus value p/(c+beta) = {}; reciprocal (c+beta)/p = {}",
            sig12(model.params.p / cb),
            sig12(cb / model.params.p)
        );
    }
    println!("certified = {}", summary.certified);
    Ok(())
}

fn round12(v: f64) -> f64 {
    sig12(v).parse().expect("formatted float parses")
}
