//! The five commands. Each returns a report and writes its artifacts to the
//! output directory.
//!
//! CSV columns:
//! - `mesh.csv`: `elements,order,nodes,interfaces,boundary_edges,closed,tree_depth`
//! - `stats.csv`: `elements,order,unknowns,factor_seconds,solve_seconds,max_error,rel_max_error,interface_jump,flux_residual`
//! - `converge.csv`: `level,elements,h,rel_max_error,rel_l2_error`;
//!   `fit.csv`: `order,norm,fitted_order,fitted_max,fitted_l2`
//! - `simulate.csv`: `step,time,species,min,max,l2`
//! - `bench.csv`: `elements,unknowns,factor_seconds,solve_seconds,rhs_update_seconds,memory_bytes`;
//!   `bench_fit.csv`: `quantity,exponent`
//!
//! Timing columns vary between runs; every other column is reproducible
//! for a fixed configuration and seed, whatever the thread count.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;

use super::config::RunConfig;
use super::expr::Expr;
use super::family::MeshFamily;
use crate::apps::imex::{ImexIntegrator, ImexScheme, ReactionModel, State};
use crate::apps::models::{
    random_complex_state, random_state, smooth_random_complex_state, smooth_random_state, CglParams, TuringParams,
};
use crate::apps::{l2_norm, node_weights, project_mean_zero};
use crate::error::{Error, Result};
use crate::hierarchy::{load_factorization, sample_nodes, save_factorization, Factorization};
use crate::mesh::{build_merge_tree, load_mesh, save_mesh, SurfaceMesh};
use crate::scalar::Scalar;
use crate::solver::{flux_residual, solve, Solution};
use crate::surface_ops::CoefficientField;

/// Default smooth load for surfaces without an analytic solution.
pub const DEFAULT_LOAD: &str = "exp(x) * sin(2 * y) + z * z - x * y * z";

fn write_file(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn build_mesh(cfg: &RunConfig, refine: usize) -> Result<SurfaceMesh> {
    match (&cfg.mesh.file, cfg.mesh.family()?) {
        (Some(path), _) => load_mesh(path),
        (None, Some(f)) => f.generate(refine, cfg.mesh.order),
        (None, None) => Err(Error::Config("no mesh source".into())),
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn fitted_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Operator, load and reference data of a solve.
#[derive(Clone, Debug)]
pub struct Problem {
    pub coeff: CoefficientField<f64>,
    pub rhs: Option<Expr>,
    pub exact: Option<Expr>,
    pub boundary: Option<Expr>,
    /// Operator description keyed into the factorization cache.
    pub tag: String,
}

impl Problem {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let pde = &cfg.pde;
        let sphere = cfg.mesh.file.is_none() && cfg.mesh.family()? == Some(MeshFamily::Sphere);
        let parse = |s: &Option<String>| s.as_deref().map(Expr::parse).transpose();
        let (coeff, shift, tag) = match pde.preset.as_str() {
            "laplace-beltrami" => (
                CoefficientField::laplace_beltrami(),
                0.0,
                "laplace-beltrami".to_string(),
            ),
            "helmholtz-beltrami" => (
                CoefficientField::helmholtz(pde.shift),
                pde.shift,
                format!("helmholtz-beltrami|{:?}", pde.shift),
            ),
            "custom" => {
                let mut coeff = CoefficientField::zero();
                let mut tag = String::from("custom");
                let a = [&pde.a11, &pde.a22, &pde.a33, &pde.a12, &pde.a23, &pde.a13];
                let ij = [(1, 1), (2, 2), (3, 3), (1, 2), (2, 3), (1, 3)];
                for (src, (i, j)) in a.iter().zip(ij) {
                    if let Some(e) = parse(src)? {
                        let _ = write!(tag, "|a{i}{j}={}", e.source());
                        coeff = coeff.with_a(i, j, move |x| e.eval(x));
                    }
                }
                for (i, src) in [&pde.b1, &pde.b2, &pde.b3].iter().enumerate() {
                    if let Some(e) = parse(src)? {
                        let _ = write!(tag, "|b{}={}", i + 1, e.source());
                        coeff = coeff.with_b(i + 1, move |x| e.eval(x));
                    }
                }
                if let Some(e) = parse(&pde.c)? {
                    let _ = write!(tag, "|c={}", e.source());
                    coeff = coeff.with_c(move |x| e.eval(x));
                }
                (coeff, f64::NAN, tag)
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown PDE preset `{other}` (expected laplace-beltrami, helmholtz-beltrami or custom)"
                )))
            }
        };
        let harmonic = sphere && shift.is_finite();
        let rhs = match (&pde.rhs, harmonic) {
            (Some(_), _) => parse(&pde.rhs)?,
            (None, true) => Some(Expr::parse(&format!("({shift:?} - 20.0) * ylm(4, 2)"))?),
            (None, false) if shift.is_finite() => Some(Expr::parse(DEFAULT_LOAD)?),
            (None, false) => None,
        };
        let exact = match (&pde.exact, harmonic && pde.rhs.is_none()) {
            (Some(_), _) => parse(&pde.exact)?,
            (None, true) => Some(Expr::parse("ylm(4, 2)")?),
            (None, false) => None,
        };
        Ok(Self {
            coeff,
            rhs,
            exact,
            boundary: parse(&pde.boundary)?,
            tag,
        })
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub fact: Factorization<f64>,
    pub solution: Solution<f64>,
    pub factor_seconds: f64,
    pub solve_seconds: f64,
    /// Errors against the exact solution, when one is given.
    pub error: Option<ErrorNorms>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorNorms {
    pub max: f64,
    /// Max error over the max of the reference.
    pub rel_max: f64,
    /// Quadrature L2 error over the L2 norm of the reference.
    pub rel_l2: f64,
}

fn error_norms(
    weights: &[Vec<f64>],
    reference: &[Vec<f64>],
    approx: impl Fn(usize, usize) -> Result<f64>,
) -> Result<ErrorNorms> {
    let (mut max, mut scale, mut e2, mut r2) = (0.0f64, 0.0f64, 0.0, 0.0);
    for (k, (vals, w)) in reference.iter().zip(weights).enumerate() {
        for (n, (v, w)) in vals.iter().zip(w).enumerate() {
            let d = approx(k, n)? - v;
            max = max.max(d.abs());
            scale = scale.max(v.abs());
            e2 += w * d * d;
            r2 += w * v * v;
        }
    }
    Ok(ErrorNorms {
        max,
        rel_max: max / scale,
        rel_l2: (e2 / r2).sqrt(),
    })
}

fn factorization(mesh: &SurfaceMesh, problem: &Problem, cache: Option<&Path>) -> Result<Factorization<f64>> {
    if let Some(path) = cache {
        if path.exists() {
            match load_factorization(path, mesh, &problem.tag) {
                Ok(f) => {
                    log::info!("loaded factorization from {}", path.display());
                    return Ok(f);
                }
                Err(e) => log::warn!("ignoring factorization cache: {e}"),
            }
        }
    }
    let fact = Factorization::new(mesh, &problem.coeff)?;
    if let Some(path) = cache {
        save_factorization(&fact, &problem.tag, path)?;
    }
    Ok(fact)
}

/// Factorizes (or loads), applies the load and boundary data and solves.
/// Closed surfaces with a singular operator get mean-zero loads and
/// solutions.
pub fn solve_problem(mesh: &SurfaceMesh, problem: &Problem, cache: Option<&Path>) -> Result<SolveOutcome> {
    let t0 = Instant::now();
    let mut fact = factorization(mesh, problem, cache)?;
    let factor_seconds = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let weights = if fact.fix_applied() {
        Some(node_weights(mesh)?)
    } else {
        None
    };
    let mut f = match &problem.rhs {
        Some(e) => sample_nodes(mesh, |x| e.eval(x)),
        None => vec![vec![0.0; (mesh.order() + 1).pow(2)]; mesh.len()],
    };
    if let Some(w) = &weights {
        project_mean_zero(w, &mut f);
    }
    fact.update_rhs(&f)?;
    let g: Vec<f64> = match (&problem.boundary, &problem.exact) {
        (Some(e), _) | (None, Some(e)) => fact.root_points().iter().map(|x| e.eval(x)).collect(),
        (None, None) => vec![0.0; fact.n_root_boundary()],
    };
    let mut solution = solve(&fact, &g)?;
    if let Some(w) = &weights {
        project_mean_zero(w, &mut solution.values);
    }
    let solve_seconds = t1.elapsed().as_secs_f64();

    let error = match &problem.exact {
        Some(e) => {
            let mut exact = sample_nodes(mesh, |x| e.eval(x));
            if let Some(w) = &weights {
                project_mean_zero(w, &mut exact);
            }
            let w = match weights {
                Some(ref w) => w.clone(),
                None => node_weights(mesh)?,
            };
            Some(error_norms(&w, &exact, |k, n| Ok(solution.values[k][n]))?)
        }
        None => None,
    };
    Ok(SolveOutcome {
        fact,
        solution,
        factor_seconds,
        solve_seconds,
        error,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeshReport {
    pub elements: usize,
    pub nodes: usize,
    pub interfaces: usize,
    pub boundary_edges: usize,
    pub closed: bool,
    pub tree_depth: usize,
}

pub fn cmd_mesh(cfg: &RunConfig) -> Result<MeshReport> {
    let mesh = build_mesh(cfg, cfg.mesh.refine)?;
    let tree = build_merge_tree(&mesh)?;
    let report = MeshReport {
        elements: mesh.len(),
        nodes: mesh.num_nodes(),
        interfaces: mesh.interfaces().len(),
        boundary_edges: mesh.boundary_edges().len(),
        closed: mesh.closed(),
        tree_depth: tree.depth(),
    };
    let dir = &cfg.output.dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_mesh(&mesh, dir.join("mesh.txt"))?;
    let csv = format!(
        "elements,order,nodes,interfaces,boundary_edges,closed,tree_depth\n{},{},{},{},{},{},{}\n",
        report.elements,
        mesh.order(),
        report.nodes,
        report.interfaces,
        report.boundary_edges,
        report.closed,
        report.tree_depth
    );
    write_file(dir, "mesh.csv", &csv)?;
    Ok(report)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |v| format!("{v:e}"))
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<SolveOutcome> {
    let mesh = build_mesh(cfg, cfg.mesh.refine)?;
    let problem = Problem::from_config(cfg)?;
    let out = solve_problem(&mesh, &problem, cfg.run.cache.as_deref())?;
    let dir = &cfg.output.dir;
    write_file(dir, "solution.txt", &out.solution.to_point_cloud())?;
    let csv = format!(
        "elements,order,unknowns,factor_seconds,solve_seconds,max_error,rel_max_error,interface_jump,flux_residual\n{},{},{},{:e},{:e},{},{},{:e},{:e}\n",
        mesh.len(),
        mesh.order(),
        mesh.num_nodes(),
        out.factor_seconds,
        out.solve_seconds,
        fmt_opt(out.error.map(|e| e.max)),
        fmt_opt(out.error.map(|e| e.rel_max)),
        out.solution.interface_jump(),
        flux_residual(&out.fact, &out.solution),
    );
    write_file(dir, "stats.csv", &csv)?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergeRow {
    pub level: usize,
    pub elements: usize,
    pub h: f64,
    pub rel_max: f64,
    pub rel_l2: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergeReport {
    pub rows: Vec<ConvergeRow>,
    /// Fitted order in the configured norm.
    pub fitted_order: f64,
    pub fitted_max: f64,
    pub fitted_l2: f64,
    /// Level of the self-convergence reference, if one was used.
    pub reference: Option<usize>,
}

/// Difference between a coarse solution and the reference, measured at the
/// reference nodes.
fn self_error(
    family: MeshFamily,
    coarse: &Solution<f64>,
    level: usize,
    reference: &Solution<f64>,
    ref_level: usize,
    ref_weights: &[Vec<f64>],
) -> Result<ErrorNorms> {
    let grid = crate::spectral::cheb2_nodes(reference.order())?;
    let n1 = grid.len();
    error_norms(ref_weights, &reference.values, |k, node| {
        let (xi, eta) = (grid.nodes[node / n1], grid.nodes[node % n1]);
        let (patch, s, t) = family.param(ref_level, k, xi, eta);
        let (kc, a, b) = family.locate(level, patch, s, t);
        coarse.evaluate(kc, a, b)
    })
}

pub fn cmd_converge(cfg: &RunConfig) -> Result<ConvergeReport> {
    let family = cfg
        .mesh
        .family()?
        .ok_or_else(|| Error::Config("converge needs a generator-backed mesh family (--gen)".into()))?;
    let mut levels = cfg.converge.levels.clone();
    levels.sort_unstable();
    levels.dedup();
    if levels.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "convergence fit needs at least 3 refinement levels, got {}",
            levels.len()
        )));
    }
    let problem = Problem::from_config(cfg)?;
    let p = cfg.mesh.order;
    let reference = match (&problem.exact, cfg.converge.reference) {
        (_, Some(r)) => Some(r),
        (None, None) => Some(levels[levels.len() - 1] + 1),
        (Some(_), None) => None,
    };
    if let Some(r) = reference {
        if levels.iter().any(|&l| l >= r) {
            return Err(Error::Config(format!(
                "reference level {r} must exceed every convergence level"
            )));
        }
    }
    let l2 = match cfg.converge.norm.as_str() {
        "max" => false,
        "l2" => true,
        other => {
            return Err(Error::Config(format!(
                "unknown error norm `{other}` (expected max or l2)"
            )))
        }
    };
    let ref_solution = match reference {
        Some(r) => {
            let mesh = family.generate(r, p)?;
            Some((node_weights(&mesh)?, solve_problem(&mesh, &problem, None)?.solution))
        }
        None => None,
    };
    let mut rows = Vec::with_capacity(levels.len());
    for &level in &levels {
        let mesh = family.generate(level, p)?;
        let out = solve_problem(&mesh, &problem, None)?;
        let err = match (&ref_solution, reference) {
            (Some((w, u_ref)), Some(r)) => self_error(family, &out.solution, level, u_ref, r, w)?,
            _ => out.error.expect("exact solution"),
        };
        log::info!(
            "level {level}: {} elements, max {:e}, l2 {:e}",
            mesh.len(),
            err.rel_max,
            err.rel_l2
        );
        rows.push(ConvergeRow {
            level,
            elements: mesh.len(),
            h: family.h(level),
            rel_max: err.rel_max,
            rel_l2: err.rel_l2,
        });
    }
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let fitted_max = fitted_slope(&h, &rows.iter().map(|r| r.rel_max).collect::<Vec<_>>());
    let fitted_l2 = fitted_slope(&h, &rows.iter().map(|r| r.rel_l2).collect::<Vec<_>>());
    let fitted_order = if l2 { fitted_l2 } else { fitted_max };
    let mut csv = String::from("level,elements,h,rel_max_error,rel_l2_error\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{:e},{:e},{:e}",
            r.level, r.elements, r.h, r.rel_max, r.rel_l2
        );
    }
    write_file(&cfg.output.dir, "converge.csv", &csv)?;
    let fit = format!(
        "order,norm,fitted_order,fitted_max,fitted_l2\n{p},{},{fitted_order:e},{fitted_max:e},{fitted_l2:e}\n",
        cfg.converge.norm
    );
    write_file(&cfg.output.dir, "fit.csv", &fit)?;
    Ok(ConvergeReport {
        rows,
        fitted_order,
        fitted_max,
        fitted_l2,
        reference,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulateReport {
    pub steps: usize,
    pub snapshots: usize,
    pub final_time: f64,
    pub factorizations: usize,
    /// Per-species max modulus of the final state.
    pub final_max: Vec<f64>,
}

fn turing_params(cfg: &RunConfig) -> Result<TuringParams> {
    let t = &cfg.time;
    let mut p = match t.preset.as_str() {
        "blob" => TuringParams::blob(),
        "stellarator" => TuringParams::stellarator(),
        "cow" => TuringParams::cow(),
        other => return Err(Error::Config(format!("unknown parameter preset `{other}`"))),
    };
    if let Some(d) = t.delta_v {
        p = TuringParams {
            delta_u: 0.516 * d,
            delta_v: d,
            ..p
        };
    }
    if let Some(tau2) = t.tau2 {
        p.tau2 = tau2;
    }
    if let Some(a) = t.alpha {
        p.alpha = a;
    }
    if let Some(b) = t.beta {
        p.beta = b;
    }
    Ok(p)
}

fn cgl_params(cfg: &RunConfig) -> Result<CglParams> {
    let t = &cfg.time;
    let mut p = match t.preset.as_str() {
        "blob" => CglParams::blob(),
        "stellarator" => CglParams::stellarator(),
        "cow" => CglParams::cow(),
        other => return Err(Error::Config(format!("unknown parameter preset `{other}`"))),
    };
    if let Some(a) = t.alpha {
        p.alpha = a;
    }
    if let Some(b) = t.beta {
        p.beta = b;
    }
    if let Some(d) = t.delta {
        p.delta = d;
    }
    Ok(p)
}

fn snapshot_text<T: Scalar>(mesh: &SurfaceMesh, step: usize, time: f64, state: &State<T>) -> String {
    let mut out = format!("# step {step} time {time:?}\n");
    for (k, e) in mesh.elements().iter().enumerate() {
        let _ = writeln!(out, "# element {}", e.id);
        for (n, x) in e.nodes.iter().enumerate() {
            let _ = write!(out, "{:?} {:?} {:?}", x[0], x[1], x[2]);
            for s in state {
                let v = s[k][n];
                match T::KIND {
                    crate::scalar::ScalarKind::Real => {
                        let _ = write!(out, " {:?}", v.real_part());
                    }
                    crate::scalar::ScalarKind::Complex => {
                        let _ = write!(out, " {:?} {:?}", v.real_part(), v.imaginary());
                    }
                }
            }
            out.push('\n');
        }
    }
    out
}

fn run_model<T: Scalar, M: ReactionModel<T>>(
    cfg: &RunConfig,
    mesh: &SurfaceMesh,
    model: &M,
    dt: f64,
    steps: usize,
    initial: State<T>,
) -> Result<SimulateReport> {
    let weights = node_weights(mesh)?;
    let every = cfg.time.every.max(1);
    let dir = &cfg.output.dir;
    let mut csv = String::from("step,time,species,min,max,l2\n");
    let mut record = |step: usize, time: f64, state: &State<T>| -> Result<()> {
        write_file(
            dir,
            &format!("snapshot_{step:06}.txt"),
            &snapshot_text(mesh, step, time, state),
        )?;
        for (s, field) in state.iter().enumerate() {
            let (lo, hi) = field
                .iter()
                .flatten()
                .map(|v| {
                    if T::KIND == crate::scalar::ScalarKind::Real {
                        v.real_part()
                    } else {
                        v.modulus()
                    }
                })
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            let _ = writeln!(csv, "{step},{time:e},{s},{lo:e},{hi:e},{:e}", l2_norm(&weights, field));
        }
        Ok(())
    };
    let mut it = ImexIntegrator::new(mesh, model, ImexScheme::bdf(cfg.time.scheme)?, dt, initial)?;
    record(0, 0.0, it.state())?;
    let mut snapshots = 1;
    for _ in 0..steps {
        it.step()?;
        if it.step_index() % every == 0 {
            record(it.step_index(), it.time(), it.state())?;
            snapshots += 1;
        }
    }
    write_file(dir, "simulate.csv", &csv)?;
    Ok(SimulateReport {
        steps,
        snapshots,
        final_time: it.time(),
        factorizations: it.factorizations_built(),
        final_max: it
            .state()
            .iter()
            .map(|f| f.iter().flatten().fold(0.0f64, |m, v| m.max(v.modulus())))
            .collect(),
    })
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<SimulateReport> {
    let mesh = build_mesh(cfg, cfg.mesh.refine)?;
    let t = &cfg.time;
    let seed = cfg.run.seed;
    let n1 = (mesh.order() + 1).pow(2);
    match t.model.as_str() {
        "turing" => {
            let params = turing_params(cfg)?;
            let init = match t.init.as_str() {
                "random" => random_state(&mesh, 2, t.amplitude, seed),
                "smooth" => smooth_random_state(&mesh, 2, t.amplitude, seed),
                "constant" => vec![vec![vec![t.amplitude; n1]; mesh.len()]; 2],
                other => return Err(Error::Config(format!("unknown initial condition `{other}`"))),
            };
            run_model(cfg, &mesh, &params, t.dt.unwrap_or(0.1), t.steps.unwrap_or(2000), init)
        }
        "cgl" => {
            let params = cgl_params(cfg)?;
            let init = match t.init.as_str() {
                "random" => random_complex_state(&mesh, t.amplitude, seed),
                "smooth" => smooth_random_complex_state(&mesh, t.amplitude, seed),
                "constant" => vec![vec![vec![Complex64::new(t.amplitude, 0.0); n1]; mesh.len()]],
                other => return Err(Error::Config(format!("unknown initial condition `{other}`"))),
            };
            run_model(cfg, &mesh, &params, t.dt.unwrap_or(0.03), t.steps.unwrap_or(2000), init)
        }
        other => Err(Error::Config(format!(
            "unknown model `{other}` (expected turing or cgl)"
        ))),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub elements: usize,
    pub unknowns: usize,
    pub factor_seconds: f64,
    pub solve_seconds: f64,
    pub rhs_update_seconds: f64,
    pub memory_bytes: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Fitted exponents against `N`: factor, solve, RHS update, memory.
    pub exponents: [f64; 4],
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

pub fn cmd_bench(cfg: &RunConfig) -> Result<BenchReport> {
    let family = cfg
        .mesh
        .family()?
        .ok_or_else(|| Error::Config("bench needs a generator-backed mesh family (--gen)".into()))?;
    let mut levels = cfg.bench.levels.clone();
    levels.sort_unstable();
    levels.dedup();
    if levels.len() < 2 {
        return Err(Error::InsufficientData("bench needs at least 2 levels".into()));
    }
    let reps = cfg.bench.repetitions.max(1);
    let p = cfg.mesh.order;
    let coeff = Problem::from_config(cfg)?.coeff;
    let load = Expr::parse(DEFAULT_LOAD)?;

    // warm-up
    let warm = family.generate(levels[0], p)?;
    let f = Factorization::new(&warm, &coeff)?;
    solve(&f, &vec![0.0; f.n_root_boundary()])?;

    let mut rows = Vec::with_capacity(levels.len());
    for &level in &levels {
        let mesh = family.generate(level, p)?;
        let f = sample_nodes(&mesh, |x| load.eval(x));
        let (mut tf, mut ts, mut tr) = (Vec::new(), Vec::new(), Vec::new());
        let mut memory = 0;
        for _ in 0..reps {
            let t0 = Instant::now();
            let mut fact = Factorization::new(&mesh, &coeff)?;
            tf.push(t0.elapsed().as_secs_f64());
            let t1 = Instant::now();
            fact.update_rhs(&f)?;
            tr.push(t1.elapsed().as_secs_f64());
            let g = vec![0.0; fact.n_root_boundary()];
            let t2 = Instant::now();
            let u = solve(&fact, &g)?;
            ts.push(t2.elapsed().as_secs_f64());
            std::hint::black_box(u);
            memory = fact.memory_bytes();
        }
        rows.push(BenchRow {
            elements: mesh.len(),
            unknowns: mesh.num_nodes(),
            factor_seconds: median(tf),
            solve_seconds: median(ts),
            rhs_update_seconds: median(tr),
            memory_bytes: memory,
        });
    }
    let n: Vec<f64> = rows.iter().map(|r| r.elements as f64).collect();
    let col = |g: fn(&BenchRow) -> f64| fitted_slope(&n, &rows.iter().map(g).collect::<Vec<_>>());
    let exponents = [
        col(|r| r.factor_seconds),
        col(|r| r.solve_seconds),
        col(|r| r.rhs_update_seconds),
        col(|r| r.memory_bytes as f64),
    ];
    let mut csv = String::from("elements,unknowns,factor_seconds,solve_seconds,rhs_update_seconds,memory_bytes\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{:e},{:e},{:e},{}",
            r.elements, r.unknowns, r.factor_seconds, r.solve_seconds, r.rhs_update_seconds, r.memory_bytes
        );
    }
    write_file(&cfg.output.dir, "bench.csv", &csv)?;
    let fit = format!(
        "quantity,exponent\nfactor,{:e}\nsolve,{:e}\nrhs_update,{:e}\nmemory,{:e}\n",
        exponents[0], exponents[1], exponents[2], exponents[3]
    );
    write_file(&cfg.output.dir, "bench_fit.csv", &fit)?;
    Ok(BenchReport { rows, exponents })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(dir: &Path, text: &str) -> RunConfig {
        let mut c = RunConfig::from_toml(text).unwrap();
        c.output.dir = dir.to_path_buf();
        c
    }

    #[test]
    fn slope_fit() {
        let x = [1.0, 0.5, 0.25];
        let y: Vec<f64> = x.iter().map(|h: &f64| 3.0 * h.powi(4)).collect();
        assert!((fitted_slope(&x, &y) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn solve_sphere_preset() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), "[mesh]\ngen = \"sphere\"\nrefine = 1\norder = 10\n");
        let out = cmd_solve(&cfg).unwrap();
        let rel = out.error.unwrap().rel_max;
        assert!(rel < 1e-5, "{rel}");
        let stats = fs::read_to_string(dir.path().join("stats.csv")).unwrap();
        assert!(stats.starts_with("elements,order,unknowns,"));
        assert_eq!(stats.lines().nth(1).unwrap().split(',').count(), 9);
        assert!(dir.path().join("solution.txt").exists());
    }

    #[test]
    fn open_mesh_custom_pde() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = crate::mesh::build_connectivity(
            vec![
                crate::mesh::tests::flat_element(0, 6, 0.0, 0.5, 0.0, 1.0),
                crate::mesh::tests::flat_element(1, 6, 0.5, 1.0, 0.0, 1.0),
            ],
            None,
        )
        .unwrap();
        save_mesh(&mesh, dir.path().join("flat.txt")).unwrap();
        let text = format!(
            "[mesh]\nfile = {:?}\n[pde]\npreset = \"custom\"\na11 = \"1\"\na22 = \"1\"\nc = \"-1\"\nrhs = \"-x*x*y\"\nexact = \"x*x*y\"\nb1=\"0\"\n",
            dir.path().join("flat.txt")
        );
        let mut cfg = config(dir.path(), &text);
        // Δ(x²y) − x²y = 2y − x²y
        cfg.pde.rhs = Some("2*y - x*x*y".into());
        let out = cmd_solve(&cfg).unwrap();
        assert!(out.error.unwrap().max < 1e-10);
    }

    #[test]
    fn cache_round_trip_through_solve() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config(dir.path(), "[mesh]\ngen = \"sphere\"\nrefine = 0\norder = 6\n");
        cfg.run.cache = Some(dir.path().join("fact.bin"));
        let a = cmd_solve(&cfg).unwrap();
        assert!(dir.path().join("fact.bin").exists());
        let b = cmd_solve(&cfg).unwrap();
        assert_eq!(a.solution.values, b.solution.values);
        cfg.pde.preset = "helmholtz-beltrami".into();
        let c = cmd_solve(&cfg).unwrap();
        assert!(!c.fact.fix_applied());
    }

    #[test]
    fn converge_needs_three_levels() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config(
            dir.path(),
            "[mesh]\ngen = \"sphere\"\norder = 4\n[converge]\nlevels = [0, 1]\n",
        );
        assert!(matches!(cmd_converge(&cfg), Err(Error::InsufficientData(_))));
        cfg.mesh.file = Some("x.mesh".into());
        assert!(matches!(cmd_converge(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn converge_self_reference() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), "[mesh]\ngen = \"torus\"\norder = 4\n[converge]\nlevels = [0, 1, 2]\nreference = 3\n[pde]\npreset = \"helmholtz-beltrami\"\nrhs = \"x + z*z\"\n");
        let rep = cmd_converge(&cfg).unwrap();
        assert_eq!(rep.rows.len(), 3);
        assert!(rep
            .rows
            .windows(2)
            .all(|w| w[1].rel_max < w[0].rel_max && w[1].rel_l2 < w[0].rel_l2));
        assert!(rep.fitted_order > 2.0, "{}", rep.fitted_order);
    }

    #[test]
    fn simulate_snapshot_cadence() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), "[mesh]\ngen = \"sphere\"\nrefine = 0\norder = 4\n[time]\nmodel = \"cgl\"\npreset = \"stellarator\"\ninit = \"constant\"\namplitude = 0.3\ndt = 0.015625\nsteps = 64\nevery = 16\n");
        let rep = cmd_simulate(&cfg).unwrap();
        assert_eq!(rep.snapshots, 5);
        assert!((rep.final_time - 1.0).abs() < 1e-14);
        let exact = crate::apps::models::cgl_constant_mode(0.3, 1.5, 1.0).norm();
        assert!((rep.final_max[0] - exact).abs() < 1e-6);
        assert!(dir.path().join("snapshot_000064.txt").exists());
        let csv = fs::read_to_string(dir.path().join("simulate.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 5);
    }

    #[test]
    fn bench_rows() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(
            dir.path(),
            "[mesh]\ngen = \"sphere\"\norder = 4\n[bench]\nlevels = [0, 1]\nrepetitions = 1\n",
        );
        let rep = cmd_bench(&cfg).unwrap();
        assert_eq!(rep.rows.len(), 2);
        assert!(rep.rows[1].memory_bytes > rep.rows[0].memory_bytes);
        assert!(rep.exponents.iter().all(|e| e.is_finite()));
    }
}
