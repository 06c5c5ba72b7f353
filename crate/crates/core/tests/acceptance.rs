//! Acceptance suite: one line per criterion. Pass criterion numbers as
//! arguments to run a subset. Failures are always reported; the exit
//! status reflects them only with `ACCEPTANCE_STRICT=1`.

mod common;

use std::time::Instant;

use common::*;
use num_complex::Complex64;
use surfhps::apps::hodge::{
    cross_normal, field_norm, harmonic_residuals, hodge_decompose, random_tangent_field, surface_gradient,
};
use surfhps::apps::imex::{ImexIntegrator, ImexScheme, ImplicitOperators, State};
use surfhps::apps::models::{
    random_state, simulate_cgl, simulate_turing, smooth_random_complex_state, CglParams, RunSpec, TuringParams,
};
use surfhps::apps::{LaplaceBeltrami, SurfaceCalculus};
use surfhps::cli::commands::{cmd_bench, cmd_converge, fitted_slope};
use surfhps::cli::{MeshFamily, RunConfig};
use surfhps::hierarchy::{sample_nodes, Factorization};
use surfhps::mesh::{generate_cube, generate_cubed_sphere, Point, SurfaceMesh};
use surfhps::solver::{boundary_data, flux_residual, solve};
use surfhps::spectral::{cheb2_nodes, diff_matrix};
use surfhps::surface_ops::{element_geometry, CoefficientField, ReferenceElement};

type Outcome = (bool, String);

fn config(text: &str, dir: &std::path::Path) -> RunConfig {
    let mut c = RunConfig::from_toml(text).unwrap();
    c.output.dir = dir.to_path_buf();
    c
}

fn load(x: &Point) -> f64 {
    (x[0] + 2.0 * x[1]).sin() + x[2] * x[0]
}

fn data(x: &Point) -> f64 {
    (0.5 * x[0]).exp() * (x[1] + 0.3).cos()
}

fn hps(mesh: &SurfaceMesh, coeff: &CoefficientField<f64>, f: &[Vec<f64>], g: impl Fn(&Point) -> f64) -> Vec<Vec<f64>> {
    let mut fact = Factorization::new(mesh, coeff).unwrap();
    fact.update_rhs(f).unwrap();
    let sol = solve(&fact, &boundary_data(&fact, g)).unwrap();
    (0..mesh.len()).map(|k| sol.element(k).to_vec()).collect()
}

fn criterion_1() -> Outcome {
    let meshes = [
        ("flat pair", flat_pair(6)),
        ("cube", generate_cube(0, 6).unwrap()),
        ("sphere", generate_cubed_sphere(0, 6).unwrap()),
    ];
    let fields: [(&str, CoefficientField<f64>); 3] = [
        ("laplace-beltrami", CoefficientField::laplace_beltrami()),
        (
            "variable c",
            CoefficientField::laplace_beltrami().with_c(|x: &Point| -1.5 - x[0] * x[0]),
        ),
        ("random a,b,c", random_smooth_field(42)),
    ];
    let mut worst = 0.0f64;
    for (_, mesh) in &meshes {
        for (_, coeff) in &fields {
            let dense = DenseSystem::assemble(mesh, coeff);
            let f = dense.compatible_load(&sample(mesh, load));
            let mut a = dense.solve(&f, data);
            let mut b = hps(mesh, coeff, &f, data);
            if mesh.closed() && coeff.c.is_none() {
                remove_mean(&mut a);
                remove_mean(&mut b);
            }
            let gap = max_diff(&a, &b) / max_abs(&a);
            worst = worst.max(gap);
        }
    }
    (
        worst <= 1e-9,
        format!("worst relative max difference {worst:.2e} over 9 cases (tol 1e-9)"),
    )
}

fn criterion_2() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for p in [4usize, 8, 12] {
        let cfg = config(
            &format!("[mesh]\ngen = \"sphere\"\norder = {p}\n[converge]\nlevels = [1, 2, 3]\n"),
            dir.path(),
        );
        let r = cmd_converge(&cfg).unwrap();
        let finest = r.rows.last().unwrap().rel_max;
        let mut pass = r.fitted_order >= (p - 2) as f64;
        if p == 12 {
            pass &= finest <= 1e-9;
        }
        ok &= pass;
        parts.push(format!(
            "p={p} order {:.2} (need >= {}) finest {finest:.2e}{}",
            r.fitted_order,
            p - 2,
            if pass { "" } else { " [fail]" }
        ));
    }
    (ok, parts.join("; "))
}

fn criterion_3() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for p in 3..=6 {
        let cfg = config(
            &format!("[mesh]\ngen = \"cube\"\norder = {p}\n[converge]\nlevels = [1, 2, 3]\nreference = 4\n"),
            dir.path(),
        );
        let r = cmd_converge(&cfg).unwrap();
        let pass = (r.fitted_max - 2.0).abs() <= 0.3;
        ok &= pass;
        parts.push(format!(
            "p={p} max-norm {:.2} (l2 {:.2}){}",
            r.fitted_max,
            r.fitted_l2,
            if pass { "" } else { " [fail]" }
        ));
    }
    (ok, format!("{} (need 2 +- 0.3)", parts.join("; ")))
}

fn criterion_4() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        "[mesh]\ngen = \"twisted-torus\"\norder = 8\n[converge]\nlevels = [0, 1, 2]\nreference = 3\n",
        dir.path(),
    );
    let r = cmd_converge(&cfg).unwrap();
    let errs: Vec<String> = r.rows.iter().map(|row| format!("{:.1e}", row.rel_max)).collect();
    (
        r.fitted_order >= 6.0,
        format!(
            "p=8 order {:.2} (need >= 6), errors [{}]",
            r.fitted_order,
            errs.join(", ")
        ),
    )
}

fn criterion_5() -> Outcome {
    let mesh = MeshFamily::DeformedTorus.generate(1, 12).unwrap();
    let calc = SurfaceCalculus::new(&mesh).unwrap();
    let mut lb = LaplaceBeltrami::new(&mesh).unwrap();
    let f = random_tangent_field(&calc, 42, 6);
    let nf = field_norm(&calc, &f);
    let h = hodge_decompose(&calc, &mut lb, &f).unwrap();
    let (rd, rc) = harmonic_residuals(&calc, &h.w).unwrap();
    let (rd, rc) = (rd / nf, rc / nf);

    let s = calc.sample(|x| (x[0] + 0.5 * x[2]).sin() * x[1]);
    let grad = surface_gradient(&calc, &s).unwrap();
    let hg = hodge_decompose(&calc, &mut lb, &grad).unwrap();
    let ng = field_norm(&calc, &grad);
    let curl_free = field_norm(
        &calc,
        &cross_normal(&calc, &surface_gradient(&calc, &hg.v.values).unwrap()).unwrap(),
    )
    .max(field_norm(&calc, &hg.w))
        / ng;
    let rot = cross_normal(&calc, &grad).unwrap();
    let hr = hodge_decompose(&calc, &mut lb, &rot).unwrap();
    let div_free =
        field_norm(&calc, &surface_gradient(&calc, &hr.u.values).unwrap()).max(field_norm(&calc, &hr.w)) / ng;
    let ok = rd <= 1e-5 && rc <= 1e-5 && curl_free <= 1e-8 && div_free <= 1e-8;
    (
        ok,
        format!(
            "{} elements p=12: div w {rd:.1e}, curl w {rc:.1e} (tol 1e-5); cross-terms {curl_free:.1e} / {div_free:.1e} (tol 1e-8)",
            mesh.len()
        ),
    )
}

fn cgl_at_one(mesh: &SurfaceMesh, params: &CglParams, k: usize, dt: f64, init: &State<Complex64>) -> Vec<Complex64> {
    let steps = (1.0 / dt).round() as usize;
    let mut it = ImexIntegrator::new(mesh, params, ImexScheme::bdf(k).unwrap(), dt, init.clone()).unwrap();
    for _ in 0..steps {
        it.step().unwrap();
    }
    it.state()[0].iter().flatten().copied().collect()
}

fn criterion_6() -> Outcome {
    let mesh = MeshFamily::DeformedTorus.generate(0, 8).unwrap();
    let params = CglParams::cow();
    let init = smooth_random_complex_state(&mesh, 0.5, 42);
    let dts: Vec<f64> = (4..=8).map(|j| 0.5f64.powi(j)).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for k in 1..=4 {
        let reference = cgl_at_one(&mesh, &params, k, 0.5f64.powi(10), &init);
        let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        let errs: Vec<f64> = dts
            .iter()
            .map(|&dt| {
                let u = cgl_at_one(&mesh, &params, k, dt, &init);
                u.iter().zip(&reference).fold(0.0f64, |m, (a, b)| m.max((a - b).norm())) / scale
            })
            .collect();
        let slope = fitted_slope(&dts, &errs);
        let pass = (slope - k as f64).abs() <= 0.3;
        ok &= pass;
        parts.push(format!("K={k} slope {slope:.2}{}", if pass { "" } else { " [fail]" }));
    }
    (ok, format!("{} (need K +- 0.3)", parts.join("; ")))
}

fn criterion_7() -> Outcome {
    let mesh = generate_cubed_sphere(3, 8).unwrap();
    let params = TuringParams::blob();
    let dt = 0.1;
    let t0 = Instant::now();
    let ops = ImplicitOperators::<f64>::new(&mesh, &params, ImexScheme::bdf(4).unwrap().omega * dt).unwrap();
    let refactor = t0.elapsed().as_secs_f64() / ops.num_factorizations() as f64;
    drop(ops);
    let init = random_state(&mesh, 2, 0.1, 42);
    let mut it = ImexIntegrator::new(&mesh, &params, ImexScheme::bdf(4).unwrap(), dt, init).unwrap();
    for _ in 0..4 {
        it.step().unwrap();
    }
    let n = 10;
    let t1 = Instant::now();
    for _ in 0..n {
        it.step().unwrap();
    }
    let per_step = t1.elapsed().as_secs_f64() / n as f64;
    let ratio = refactor / per_step;

    let blob = MeshFamily::Blob { amplitude: 0.2 }.generate(1, 8).unwrap();
    let turing = simulate_turing(
        &blob,
        &params,
        &RunSpec::bdf4(0.1, 2000, 2000),
        random_state(&blob, 2, 0.1, 42),
    );
    let turing_ok = turing.as_ref().is_ok_and(|s| s.last().is_some_and(|s| s.step == 2000));
    let torus = MeshFamily::DeformedTorus.generate(0, 8).unwrap();
    let cgl = simulate_cgl(
        &torus,
        &CglParams::stellarator(),
        &RunSpec::bdf4(0.03, 2000, 2000),
        smooth_random_complex_state(&torus, 0.1, 42),
    );
    let cgl_ok = cgl.as_ref().is_ok_and(|s| s.last().is_some_and(|s| s.step == 2000));
    (
        ratio >= 10.0 && turing_ok && cgl_ok,
        format!(
            "{} elements: factorization {refactor:.3}s vs step {per_step:.4}s, ratio {ratio:.0} (need >= 10); 2000-step turing {}, cgl {}",
            mesh.len(),
            if turing_ok { "ok" } else { "diverged" },
            if cgl_ok { "ok" } else { "diverged" }
        ),
    )
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        "[mesh]\ngen = \"sphere\"\norder = 8\n[bench]\nlevels = [1, 2, 3]\nrepetitions = 3\n",
        dir.path(),
    );
    let r = cmd_bench(&cfg).unwrap();
    let [fa, so, rh, me] = r.exponents;
    let last = r.rows.last().unwrap();
    let rhs_ratio = last.factor_seconds / last.rhs_update_seconds;
    let ok = fa <= 1.6 && so <= 1.3 && rh <= 1.3 && me <= 1.3 && rhs_ratio >= 10.0;
    (
        ok,
        format!(
            "{}-{} elements: factor {fa:.2} (<= 1.6), solve {so:.2}, rhs {rh:.2}, memory {me:.2} (<= 1.3); factor/rhs at largest N {rhs_ratio:.0}",
            r.rows[0].elements, last.elements
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };

    // spectral exactness
    let p = 10;
    let g = cheb2_nodes(p).unwrap();
    let d = diff_matrix(p).unwrap();
    let v: Vec<f64> = g.nodes.iter().map(|x| x.powi(p as i32)).collect();
    let dv = &d * nalgebra::DVector::from_vec(v);
    let exact = g.nodes.iter().map(|x| p as f64 * x.powi(p as i32 - 1));
    check(
        "spectral exactness",
        dv.iter().zip(exact).all(|(a, b)| (a - b).abs() < 1e-10),
    );

    // metric duality
    let mesh = MeshFamily::DeformedTorus.generate(0, 8).unwrap();
    let r = ReferenceElement::new(8).unwrap();
    let mut dual = 0.0f64;
    for e in mesh.elements() {
        let m = element_geometry(&r, e).unwrap().metric;
        for k in 0..m.x_u.len() {
            let dot = |a: &Point, b: &Point| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
            dual = dual
                .max((dot(&m.xi_x[k], &m.x_u[k]) - 1.0).abs())
                .max(dot(&m.xi_x[k], &m.x_v[k]).abs())
                .max(dot(&m.eta_x[k], &m.x_u[k]).abs())
                .max((dot(&m.eta_x[k], &m.x_v[k]) - 1.0).abs());
        }
    }
    check("metric duality", dual < 1e-12);

    // DtN annihilates constants for a zeroth-order-free operator
    let lb = Factorization::new(&mesh, &CoefficientField::<f64>::laplace_beltrami()).unwrap();
    let kernel = lb
        .leaves()
        .iter()
        .map(|l| l.sigma.column_sum().amax() / l.sigma.amax())
        .fold(0.0, f64::max);
    check("DtN constants kernel", kernel < 1e-10);

    // continuity, flux balance, linearity, thread determinism
    let sphere = generate_cubed_sphere(1, 8).unwrap();
    let coeff = CoefficientField::helmholtz(-2.0).with_b(1, |x: &Point| 0.3 * x[1]);
    let f1 = sample_nodes(&sphere, load);
    let f2 = sample_nodes(&sphere, |x| x[2].cos());
    let run = |f: &[Vec<f64>], threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let mut fact = Factorization::new(&sphere, &coeff).unwrap();
            fact.update_rhs(f).unwrap();
            let sol = solve(&fact, &[]).unwrap();
            (sol.interface_jump(), flux_residual(&fact, &sol), sol)
        })
    };
    let (jump, flux, s1) = run(&f1, 1);
    let scale = s1.max_abs();
    check("interface continuity", jump <= 1e-10 * scale);
    check("flux balance", flux <= 1e-8 * scale);
    let (_, _, s2) = run(&f2, 1);
    let f12: Vec<Vec<f64>> = f1
        .iter()
        .zip(&f2)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| 2.0 * x - y).collect())
        .collect();
    let (_, _, s12) = run(&f12, 1);
    let lin = (0..sphere.len())
        .flat_map(|k| {
            let (a, b, c) = (s1.element(k), s2.element(k), s12.element(k));
            (0..a.len()).map(move |i| (2.0 * a[i] - b[i] - c[i]).abs())
        })
        .fold(0.0, f64::max);
    check("linearity", lin <= 1e-10 * scale);
    let (_, _, s4) = run(&f1, 4);
    check(
        "thread determinism",
        (0..sphere.len()).all(|k| s1.element(k) == s4.element(k)),
    );

    let ok = failures.is_empty();
    (
        ok,
        if ok {
            "spectral exactness, metric duality, DtN kernel, continuity, flux balance, linearity, thread determinism; module property suites run under cargo test".into()
        } else {
            format!("failed: {}", failures.join(", "))
        },
    )
}

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, &str, fn() -> Outcome); 9] = [
        (1, "dense-oracle equivalence", criterion_1),
        (2, "spherical-harmonic convergence", criterion_2),
        (3, "cube order reduction", criterion_3),
        (4, "twisted-torus high order", criterion_4),
        (5, "hodge decomposition", criterion_5),
        (6, "temporal order", criterion_6),
        (7, "factorization reuse", criterion_7),
        (8, "complexity slopes", criterion_8),
        (9, "invariant suites", criterion_9),
    ];
    let mut failed = 0;
    for (n, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let (ok, detail) = run();
        failed += usize::from(!ok);
        println!(
            "criterion {n} ({name}): {} {detail} [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        if std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}
