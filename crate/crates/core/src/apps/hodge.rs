//! Tangential vector fields and the Hodge decomposition
//! `F = ∇_Γ u + n × ∇_Γ v + w`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{check_shape, l2_norm, LaplaceBeltrami, NodalField, SurfaceCalculus};
use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::solver::Solution;

/// Per-element tangent vectors at the tensor nodes.
pub type TangentField = Vec<Vec<Point>>;

pub const TANGENCY_TOL: f64 = 1e-10;

fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn check_tangent(calc: &SurfaceCalculus, f: &TangentField) -> Result<()> {
    check_shape(calc.mesh(), f, "tangent field")?;
    for (element, (vs, ns)) in f.iter().zip(calc.normals()).enumerate() {
        for (node, (v, n)) in vs.iter().zip(ns).enumerate() {
            let normal_component = dot(v, n).abs();
            if normal_component > TANGENCY_TOL * dot(v, v).sqrt() {
                return Err(Error::Tangency {
                    element,
                    node,
                    normal_component,
                });
            }
        }
    }
    Ok(())
}

pub fn surface_gradient(calc: &SurfaceCalculus, u: &[Vec<f64>]) -> Result<TangentField> {
    check_shape(calc.mesh(), u, "scalar field")?;
    Ok(u.par_iter()
        .enumerate()
        .map(|(k, u)| {
            let [gx, gy, gz] = calc.ops(k).gradient(u);
            (0..u.len()).map(|i| [gx[i], gy[i], gz[i]]).collect()
        })
        .collect())
}

pub fn surface_divergence(calc: &SurfaceCalculus, f: &TangentField) -> Result<NodalField<f64>> {
    check_shape(calc.mesh(), f, "tangent field")?;
    Ok(f.par_iter()
        .enumerate()
        .map(|(k, f)| {
            let mut out = vec![0.0; f.len()];
            for c in 0..3 {
                let fc = nalgebra::DVector::from_iterator(f.len(), f.iter().map(|v| v[c]));
                let d = calc.ops(k).component(c) * fc;
                out.iter_mut().zip(d.iter()).for_each(|(o, v)| *o += v);
            }
            out
        })
        .collect())
}

/// Pointwise `n × F`.
pub fn cross_normal(calc: &SurfaceCalculus, f: &TangentField) -> Result<TangentField> {
    check_shape(calc.mesh(), f, "tangent field")?;
    Ok(f.iter()
        .zip(calc.normals())
        .map(|(vs, ns)| vs.iter().zip(ns).map(|(v, n)| cross(n, v)).collect())
        .collect())
}

pub fn field_norm(calc: &SurfaceCalculus, f: &TangentField) -> f64 {
    let sq: NodalField<f64> = f
        .iter()
        .map(|vs| vs.iter().map(|v| dot(v, v).sqrt()).collect())
        .collect();
    l2_norm(calc.weights(), &sq)
}

pub fn field_sub(a: &TangentField, b: &TangentField) -> TangentField {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            x.iter()
                .zip(y)
                .map(|(p, q)| [p[0] - q[0], p[1] - q[1], p[2] - q[2]])
                .collect()
        })
        .collect()
}

pub fn field_add(a: &TangentField, b: &TangentField) -> TangentField {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            x.iter()
                .zip(y)
                .map(|(p, q)| [p[0] + q[0], p[1] + q[1], p[2] + q[2]])
                .collect()
        })
        .collect()
}

/// Smooth tangent field: a seeded sum of ambient trigonometric modes
/// projected onto the tangent planes.
pub fn random_tangent_field(calc: &SurfaceCalculus, seed: u64, modes: usize) -> TangentField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(Point, f64, Point)> = (0..modes)
        .map(|_| {
            let k = [
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.5..1.5),
            ];
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            let amp = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            (k, phase, amp)
        })
        .collect();
    calc.mesh()
        .elements()
        .iter()
        .zip(calc.normals())
        .map(|(e, ns)| {
            e.nodes
                .iter()
                .zip(ns)
                .map(|(x, n)| {
                    let mut v = [0.0; 3];
                    for (k, phase, amp) in &modes {
                        let s = (dot(k, x) + phase).sin();
                        (0..3).for_each(|c| v[c] += amp[c] * s);
                    }
                    let vn = dot(&v, n);
                    [v[0] - vn * n[0], v[1] - vn * n[1], v[2] - vn * n[2]]
                })
                .collect()
        })
        .collect()
}

pub struct HodgeDecomposition {
    /// Curl-free potential, mean zero.
    pub u: Solution<f64>,
    /// Divergence-free stream function, mean zero.
    pub v: Solution<f64>,
    /// Harmonic remainder.
    pub w: TangentField,
}

/// Solves `Δ_Γ u = ∇_Γ·F` and `Δ_Γ v = −∇_Γ·(n × F)` with one shared
/// factorization and returns `w = F − ∇_Γ u − n × ∇_Γ v`.
pub fn hodge_decompose(
    calc: &SurfaceCalculus,
    lb: &mut LaplaceBeltrami,
    f: &TangentField,
) -> Result<HodgeDecomposition> {
    check_tangent(calc, f)?;
    let div = surface_divergence(calc, f)?;
    let u = lb.solve(&div)?;
    let mut curl = surface_divergence(calc, &cross_normal(calc, f)?)?;
    curl.iter_mut().flatten().for_each(|c| *c = -*c);
    let v = lb.solve(&curl)?;
    let gu = surface_gradient(calc, &u.values)?;
    let ngv = cross_normal(calc, &surface_gradient(calc, &v.values)?)?;
    let w = field_sub(&field_sub(f, &gu), &ngv);
    Ok(HodgeDecomposition { u, v, w })
}

/// `‖∇_Γ·w‖₂` and `‖∇_Γ·(n × w)‖₂`.
pub fn harmonic_residuals(calc: &SurfaceCalculus, w: &TangentField) -> Result<(f64, f64)> {
    let d = surface_divergence(calc, w)?;
    let c = surface_divergence(calc, &cross_normal(calc, w)?)?;
    Ok((l2_norm(calc.weights(), &d), l2_norm(calc.weights(), &c)))
}
