//! Two-species Turing system and the complex Ginzburg–Landau equation.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::imex::{ImexIntegrator, ImexScheme, ReactionModel, Snapshot, State};
use crate::error::Result;
use crate::mesh::SurfaceMesh;

/// `u_t = δ_u Δu + αu(1 − τ₁v²) + v(1 − τ₂u)`,
/// `v_t = δ_v Δv + βv(1 + (ατ₁/β)uv) + u(γ + τ₂v)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TuringParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub delta_u: f64,
    pub delta_v: f64,
}

impl TuringParams {
    /// Shared parameters with `δ_u = 0.516 δ_v`.
    pub fn new(delta_v: f64, tau2: f64) -> Self {
        Self {
            alpha: 0.899,
            beta: -0.91,
            gamma: -0.899,
            tau1: 0.02,
            tau2,
            delta_u: 0.516 * delta_v,
            delta_v,
        }
    }

    pub fn blob() -> Self {
        Self::new(0.005, 0.15)
    }

    pub fn stellarator() -> Self {
        Self::new(0.02, 0.2)
    }

    pub fn cow() -> Self {
        Self::new(0.001, 0.2)
    }
}

impl ReactionModel<f64> for TuringParams {
    fn species(&self) -> usize {
        2
    }

    fn diffusion(&self, species: usize) -> f64 {
        if species == 0 {
            self.delta_u
        } else {
            self.delta_v
        }
    }

    fn react(&self, x: &[f64], out: &mut [f64]) {
        let (u, v) = (x[0], x[1]);
        out[0] = self.alpha * u * (1.0 - self.tau1 * v * v) + v * (1.0 - self.tau2 * u);
        out[1] = self.beta * v + self.alpha * self.tau1 * u * v * v + u * (self.gamma + self.tau2 * v);
    }
}

/// `u_t = δ(1 + αi) Δu + u − (1 + βi) u|u|²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CglParams {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
}

impl CglParams {
    pub fn blob() -> Self {
        Self {
            alpha: 0.0,
            beta: -1.5,
            delta: 1e-3,
        }
    }

    pub fn stellarator() -> Self {
        Self {
            alpha: 0.0,
            beta: 1.5,
            delta: 1e-2,
        }
    }

    pub fn cow() -> Self {
        Self {
            alpha: 0.0,
            beta: 1.5,
            delta: 5e-4,
        }
    }
}

impl ReactionModel<Complex64> for CglParams {
    fn species(&self) -> usize {
        1
    }

    fn diffusion(&self, _: usize) -> Complex64 {
        Complex64::new(self.delta, self.delta * self.alpha)
    }

    fn react(&self, x: &[Complex64], out: &mut [Complex64]) {
        let u = x[0];
        out[0] = u - Complex64::new(1.0, self.beta) * u * u.norm_sqr();
    }
}

/// Spatially constant CGL solution from real `r0 > 0`: the reaction ODE
/// `u' = u − (1 + βi)u|u|²` in closed form.
pub fn cgl_constant_mode(r0: f64, beta: f64, t: f64) -> Complex64 {
    let s = 1.0 + r0 * r0 * ((2.0 * t).exp() - 1.0);
    let r = r0 * t.exp() / s.sqrt();
    Complex64::from_polar(r, -0.5 * beta * s.ln())
}

/// Independent uniform values in `[−amplitude, amplitude]` per node and
/// species.
pub fn random_state(mesh: &SurfaceMesh, species: usize, amplitude: f64, seed: u64) -> State<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n1 = (mesh.order() + 1).pow(2);
    (0..species)
        .map(|_| {
            (0..mesh.len())
                .map(|_| (0..n1).map(|_| rng.gen_range(-amplitude..=amplitude)).collect())
                .collect()
        })
        .collect()
}

pub fn random_complex_state(mesh: &SurfaceMesh, amplitude: f64, seed: u64) -> State<Complex64> {
    let parts = random_state(mesh, 2, amplitude, seed);
    vec![parts[0]
        .iter()
        .zip(&parts[1])
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| Complex64::new(*x, *y)).collect())
        .collect()]
}

/// Seeded sum of ambient trigonometric modes, scaled to `amplitude`.
pub fn smooth_random_state(mesh: &SurfaceMesh, species: usize, amplitude: f64, seed: u64) -> State<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..species)
        .map(|_| {
            let modes: Vec<([f64; 3], f64)> = (0..6)
                .map(|_| {
                    let k = [
                        rng.gen_range(-2.0..2.0),
                        rng.gen_range(-2.0..2.0),
                        rng.gen_range(-2.0..2.0),
                    ];
                    (k, rng.gen_range(0.0..std::f64::consts::TAU))
                })
                .collect();
            mesh.elements()
                .iter()
                .map(|e| {
                    e.nodes
                        .iter()
                        .map(|x| {
                            let s: f64 = modes
                                .iter()
                                .map(|(k, ph)| (k[0] * x[0] + k[1] * x[1] + k[2] * x[2] + ph).sin())
                                .sum();
                            amplitude * s / modes.len() as f64
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

pub fn smooth_random_complex_state(mesh: &SurfaceMesh, amplitude: f64, seed: u64) -> State<Complex64> {
    let parts = smooth_random_state(mesh, 2, amplitude, seed);
    let (re, im) = (&parts[0], &parts[1]);
    vec![re
        .iter()
        .zip(im)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| Complex64::new(*x, *y)).collect())
        .collect()]
}

#[derive(Clone, Copy, Debug)]
pub struct RunSpec {
    pub order: usize,
    pub dt: f64,
    pub steps: usize,
    pub snapshot_every: usize,
}

impl RunSpec {
    /// IMEX-BDF4 with one snapshot per `every` steps.
    pub fn bdf4(dt: f64, steps: usize, every: usize) -> Self {
        Self {
            order: 4,
            dt,
            steps,
            snapshot_every: every,
        }
    }
}

pub fn simulate_turing(
    mesh: &SurfaceMesh,
    params: &TuringParams,
    run: &RunSpec,
    initial: State<f64>,
) -> Result<Vec<Snapshot<f64>>> {
    let mut it = ImexIntegrator::new(mesh, params, ImexScheme::bdf(run.order)?, run.dt, initial)?;
    it.run(run.steps, run.snapshot_every)
}

pub fn simulate_cgl(
    mesh: &SurfaceMesh,
    params: &CglParams,
    run: &RunSpec,
    initial: State<Complex64>,
) -> Result<Vec<Snapshot<Complex64>>> {
    let mut it = ImexIntegrator::new(mesh, params, ImexScheme::bdf(run.order)?, run.dt, initial)?;
    it.run(run.steps, run.snapshot_every)
}
