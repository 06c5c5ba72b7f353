//! The hierarchical solve against one dense solve of the same discrete system.

mod common;

use common::*;
use proptest::prelude::*;
use surfhps::hierarchy::Factorization;
use surfhps::mesh::{generate_cube, generate_cubed_sphere, Point, SurfaceMesh};
use surfhps::solver::{boundary_data, solve};
use surfhps::surface_ops::CoefficientField;

fn hps(mesh: &SurfaceMesh, coeff: &CoefficientField<f64>, f: &[Vec<f64>], g: impl Fn(&Point) -> f64) -> Vec<Vec<f64>> {
    let mut fact = Factorization::new(mesh, coeff).unwrap();
    fact.update_rhs(f).unwrap();
    let data = boundary_data(&fact, g);
    let sol = solve(&fact, &data).unwrap();
    (0..mesh.len()).map(|k| sol.element(k).to_vec()).collect()
}

fn relative_gap(
    mesh: &SurfaceMesh,
    coeff: &CoefficientField<f64>,
    load: impl Fn(&Point) -> f64,
    g: impl Fn(&Point) -> f64 + Copy,
) -> f64 {
    let dense = DenseSystem::assemble(mesh, coeff);
    let f = dense.compatible_load(&sample(mesh, load));
    let mut a = dense.solve(&f, g);
    let mut b = hps(mesh, coeff, &f, g);
    if mesh.closed() && coeff.c.is_none() {
        remove_mean(&mut a);
        remove_mean(&mut b);
    }
    max_diff(&a, &b) / max_abs(&a)
}

fn load(x: &Point) -> f64 {
    (x[0] + 2.0 * x[1]).sin() + x[2] * x[0]
}

fn data(x: &Point) -> f64 {
    (0.5 * x[0]).exp() * (x[1] + 0.3).cos()
}

#[test]
fn flat_pair_laplacian() {
    let mesh = flat_pair(6);
    let gap = relative_gap(&mesh, &CoefficientField::laplace_beltrami(), load, data);
    assert!(gap < 1e-10, "{gap:e}");
}

#[test]
fn flat_grid_variable_c() {
    let mesh = flat_grid(5, 3);
    let coeff = CoefficientField::laplace_beltrami().with_c(|x: &Point| -1.0 - x[0] * x[0]);
    let gap = relative_gap(&mesh, &coeff, load, data);
    assert!(gap < 1e-10, "{gap:e}");
}

#[test]
fn sphere_laplace_beltrami_closed() {
    let mesh = generate_cubed_sphere(0, 6).unwrap();
    let gap = relative_gap(&mesh, &CoefficientField::laplace_beltrami(), load, data);
    assert!(gap < 1e-9, "{gap:e}");
}

#[test]
fn cube_laplace_beltrami_closed() {
    let mesh = generate_cube(0, 6).unwrap();
    let gap = relative_gap(&mesh, &CoefficientField::laplace_beltrami(), load, data);
    assert!(gap < 1e-9, "{gap:e}");
}

#[test]
fn cube_variable_c() {
    let mesh = generate_cube(0, 6).unwrap();
    let coeff = CoefficientField::laplace_beltrami().with_c(|x: &Point| -2.0 + 0.5 * x[2]);
    let gap = relative_gap(&mesh, &coeff, load, data);
    assert!(gap < 1e-9, "{gap:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn random_smooth_coefficients(seed in any::<u64>(), closed in any::<bool>()) {
        let mesh = if closed { generate_cubed_sphere(0, 5).unwrap() } else { flat_grid(5, 2) };
        let gap = relative_gap(&mesh, &random_smooth_field(seed), load, data);
        prop_assert!(gap < 1e-9, "{:e}", gap);
    }
}
