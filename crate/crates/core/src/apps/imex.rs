//! IMEX-BDF time stepping for reaction–diffusion systems
//! `∂u/∂t = L u + N(u)` with `L = d Δ_Γ` per species.
//!
//! Each step solves `(I − ωΔt L) u^{k+1} = Σ μ_i u^{k−i} + Δt Σ ν_i N(u^{k−i})`
//! with a factorization built once per distinct diffusivity.

use std::collections::VecDeque;

use rayon::prelude::*;

use super::NodalField;
use crate::error::{Error, Result};
use crate::hierarchy::Factorization;
use crate::mesh::SurfaceMesh;
use crate::scalar::Scalar;
use crate::solver::solve;
use crate::surface_ops::CoefficientField;

/// Species × element × node.
pub type State<T> = Vec<NodalField<T>>;

/// Numerators over a common denominator: `(den, ω, μ, ν)`.
const TABLES: [(i64, i64, &[i64], &[i64]); 4] = [
    (1, 1, &[1], &[1]),
    (3, 2, &[4, -1], &[4, -2]),
    (11, 6, &[18, -9, 2], &[18, -18, 6]),
    (25, 12, &[48, -36, 16, -3], &[48, -72, 48, -12]),
];

#[derive(Clone, Debug, PartialEq)]
pub struct ImexScheme {
    pub order: usize,
    pub omega: f64,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
}

impl ImexScheme {
    pub fn bdf(order: usize) -> Result<Self> {
        let (den, omega, mu, nu) = Self::rational(order)?;
        let d = den as f64;
        Ok(Self {
            order,
            omega: omega as f64 / d,
            mu: mu.iter().map(|&m| m as f64 / d).collect(),
            nu: nu.iter().map(|&n| n as f64 / d).collect(),
        })
    }

    /// Exact coefficient table as integers over `den`.
    pub fn rational(order: usize) -> Result<(i64, i64, &'static [i64], &'static [i64])> {
        if !(1..=4).contains(&order) {
            return Err(Error::Config(format!("IMEX-BDF order must be 1..4, got {order}")));
        }
        Ok(TABLES[order - 1])
    }
}

/// Pointwise reaction terms and per-species diffusivities.
pub trait ReactionModel<T: Scalar>: Sync {
    fn species(&self) -> usize;
    fn diffusion(&self, species: usize) -> T;
    /// `out[s] = N_s(u)` for the species values `u` at one node.
    fn react(&self, u: &[T], out: &mut [T]);
}

pub fn evaluate_reactions<T: Scalar, M: ReactionModel<T> + ?Sized>(model: &M, state: &State<T>) -> State<T> {
    let ns = model.species();
    let per_element: Vec<Vec<Vec<T>>> = (0..state[0].len())
        .into_par_iter()
        .map(|k| {
            let n = state[0][k].len();
            let mut out = vec![vec![T::zero(); n]; ns];
            let mut u = vec![T::zero(); ns];
            let mut r = vec![T::zero(); ns];
            for i in 0..n {
                (0..ns).for_each(|s| u[s] = state[s][k][i]);
                model.react(&u, &mut r);
                (0..ns).for_each(|s| out[s][i] = r[s]);
            }
            out
        })
        .collect();
    (0..ns)
        .map(|s| per_element.iter().map(|e| e[s].clone()).collect())
        .collect()
}

/// Factorization of `I − w d Δ_Γ`.
pub struct ImplicitSolver<T: Scalar> {
    fact: Factorization<T>,
    weight: f64,
    diffusion: T,
}

impl<T: Scalar> ImplicitSolver<T> {
    pub fn new(mesh: &SurfaceMesh, diffusion: T, weight: f64) -> Result<Self> {
        let coeff = CoefficientField::shifted_laplacian(-diffusion.scale(weight), T::one());
        Ok(Self {
            fact: Factorization::new(mesh, &coeff)?,
            weight,
            diffusion,
        })
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn diffusion(&self) -> T {
        self.diffusion
    }

    pub fn factorization(&self) -> &Factorization<T> {
        &self.fact
    }

    pub fn solve(&mut self, rhs: &[Vec<T>]) -> Result<NodalField<T>> {
        self.fact.update_rhs(rhs)?;
        let g = vec![T::zero(); self.fact.n_root_boundary()];
        Ok(solve(&self.fact, &g)?.values)
    }
}

/// One solver per distinct diffusivity; species with equal diffusivity
/// share it.
pub struct ImplicitOperators<T: Scalar> {
    solvers: Vec<ImplicitSolver<T>>,
    species: Vec<usize>,
    weight: f64,
}

impl<T: Scalar> ImplicitOperators<T> {
    pub fn new<M: ReactionModel<T> + ?Sized>(mesh: &SurfaceMesh, model: &M, weight: f64) -> Result<Self> {
        let mut solvers: Vec<ImplicitSolver<T>> = Vec::new();
        let mut species = Vec::with_capacity(model.species());
        for s in 0..model.species() {
            let d = model.diffusion(s);
            match solvers.iter().position(|sv| (sv.diffusion - d).modulus() == 0.0) {
                Some(i) => species.push(i),
                None => {
                    species.push(solvers.len());
                    solvers.push(ImplicitSolver::new(mesh, d, weight)?);
                }
            }
        }
        Ok(Self {
            solvers,
            species,
            weight,
        })
    }

    /// The `ωΔt` the factorizations were built for.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn num_factorizations(&self) -> usize {
        self.solvers.len()
    }

    pub fn solver(&self, species: usize) -> &ImplicitSolver<T> {
        &self.solvers[self.species[species]]
    }

    fn solve(&mut self, species: usize, rhs: &[Vec<T>]) -> Result<NodalField<T>> {
        self.solvers[self.species[species]].solve(rhs)
    }
}

fn check_weight(cached: f64, requested: f64) -> Result<()> {
    if (cached - requested).abs() > 1e-12 * requested.abs() {
        return Err(Error::StaleFactorization { cached, requested });
    }
    Ok(())
}

/// One IMEX-BDF step from `states` (newest first, at least `K` entries) and
/// their reaction terms.
pub fn imex_bdf_step_with<T: Scalar>(
    ops: &mut ImplicitOperators<T>,
    scheme: &ImexScheme,
    states: &[&State<T>],
    reactions: &[&State<T>],
    dt: f64,
) -> Result<State<T>> {
    let k = scheme.order;
    if states.len() < k || reactions.len() < k {
        return Err(Error::InsufficientData(format!(
            "IMEX-BDF{k} needs {k} history states, got {}",
            states.len().min(reactions.len())
        )));
    }
    check_weight(ops.weight, scheme.omega * dt)?;
    let ns = states[0].len();
    let mut next = Vec::with_capacity(ns);
    for s in 0..ns {
        let rhs: NodalField<T> = (0..states[0][s].len())
            .map(|e| {
                (0..states[0][s][e].len())
                    .map(|n| {
                        let mut acc = T::zero();
                        for i in 0..k {
                            acc +=
                                states[i][s][e][n].scale(scheme.mu[i]) + reactions[i][s][e][n].scale(dt * scheme.nu[i]);
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        next.push(ops.solve(s, &rhs)?);
    }
    Ok(next)
}

/// As [`imex_bdf_step_with`], evaluating the reactions of `history`.
pub fn imex_bdf_step<T: Scalar, M: ReactionModel<T> + ?Sized>(
    ops: &mut ImplicitOperators<T>,
    scheme: &ImexScheme,
    history: &[State<T>],
    model: &M,
    dt: f64,
) -> Result<State<T>> {
    let k = scheme.order.min(history.len());
    let reactions: Vec<State<T>> = history[..k].iter().map(|h| evaluate_reactions(model, h)).collect();
    let states: Vec<&State<T>> = history.iter().collect();
    let refs: Vec<&State<T>> = reactions.iter().collect();
    imex_bdf_step_with(ops, scheme, &states, &refs, dt)
}

fn is_finite<T: Scalar>(state: &State<T>) -> bool {
    state.iter().flatten().flatten().all(|v| v.finite())
}

/// Richardson weights for sub-step counts `1..=m`, cancelling the
/// `h, h², …, h^{m−1}` error terms of IMEX-Euler.
pub fn richardson_weights(m: usize) -> Vec<f64> {
    (1..=m)
        .map(|j| {
            (1..=m)
                .filter(|&l| l != j)
                .map(|l| j as f64 / (j as f64 - l as f64))
                .product()
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct Snapshot<T> {
    pub step: usize,
    pub time: f64,
    pub state: State<T>,
}

/// Fixed-step IMEX-BDF integrator. The first `K − 1` steps use
/// Richardson-extrapolated IMEX-Euler so that order `K` is retained.
pub struct ImexIntegrator<'a, T: Scalar, M: ReactionModel<T> + ?Sized> {
    mesh: &'a SurfaceMesh,
    model: &'a M,
    scheme: ImexScheme,
    dt: f64,
    ops: ImplicitOperators<T>,
    startup: Vec<ImplicitOperators<T>>,
    /// `(state, N(state))`, newest first.
    history: VecDeque<(State<T>, State<T>)>,
    step: usize,
    built: usize,
}

impl<'a, T: Scalar, M: ReactionModel<T> + ?Sized> ImexIntegrator<'a, T, M> {
    pub fn new(mesh: &'a SurfaceMesh, model: &'a M, scheme: ImexScheme, dt: f64, initial: State<T>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        if initial.len() != model.species() {
            return Err(Error::Shape {
                what: "species count",
                expected: model.species(),
                got: initial.len(),
            });
        }
        for f in &initial {
            super::check_shape(mesh, f, "initial state")?;
        }
        let ops = ImplicitOperators::new(mesh, model, scheme.omega * dt)?;
        let built = ops.num_factorizations();
        let reactions = evaluate_reactions(model, &initial);
        Ok(Self {
            mesh,
            model,
            scheme,
            dt,
            ops,
            startup: Vec::new(),
            history: VecDeque::from([(initial, reactions)]),
            step: 0,
            built,
        })
    }

    pub fn state(&self) -> &State<T> {
        &self.history[0].0
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn operators(&self) -> &ImplicitOperators<T> {
        &self.ops
    }

    /// Factorizations built so far, startup included.
    pub fn factorizations_built(&self) -> usize {
        self.built
    }

    fn startup_step(&mut self) -> Result<State<T>> {
        let m = self.scheme.order;
        if self.startup.is_empty() {
            for n in 1..=m {
                let ops = ImplicitOperators::new(self.mesh, self.model, self.dt / n as f64)?;
                self.built += ops.num_factorizations();
                self.startup.push(ops);
            }
        }
        let euler = ImexScheme::bdf(1)?;
        let weights = richardson_weights(m);
        let mut combined: Option<State<T>> = None;
        for (n, (ops, w)) in self.startup.iter_mut().zip(&weights).enumerate() {
            let h = self.dt / (n + 1) as f64;
            let mut u = self.history[0].0.clone();
            let mut r = self.history[0].1.clone();
            for _ in 0..=n {
                u = imex_bdf_step_with(ops, &euler, &[&u], &[&r], h)?;
                r = evaluate_reactions(self.model, &u);
            }
            match &mut combined {
                None => {
                    u.iter_mut().flatten().flatten().for_each(|v| *v = v.scale(*w));
                    combined = Some(u);
                }
                Some(acc) => {
                    for (a, b) in acc.iter_mut().flatten().flatten().zip(u.iter().flatten().flatten()) {
                        *a += b.scale(*w);
                    }
                }
            }
        }
        Ok(combined.expect("at least one sub-step count"))
    }

    pub fn step(&mut self) -> Result<&State<T>> {
        let k = self.scheme.order;
        let next = if self.history.len() < k {
            self.startup_step()?
        } else {
            let states: Vec<&State<T>> = self.history.iter().map(|h| &h.0).collect();
            let reactions: Vec<&State<T>> = self.history.iter().map(|h| &h.1).collect();
            imex_bdf_step_with(&mut self.ops, &self.scheme, &states, &reactions, self.dt)?
        };
        self.step += 1;
        if !is_finite(&next) {
            return Err(Error::Divergence { step: self.step });
        }
        if self.history.len() + 1 >= k {
            self.startup.clear();
        }
        let r = evaluate_reactions(self.model, &next);
        self.history.push_front((next, r));
        self.history.truncate(k);
        Ok(&self.history[0].0)
    }

    /// Advances `steps` steps, keeping the state at step 0 and every
    /// `every`-th step.
    pub fn run(&mut self, steps: usize, every: usize) -> Result<Vec<Snapshot<T>>> {
        let every = every.max(1);
        let mut snaps = Vec::new();
        if self.step.is_multiple_of(every) {
            snaps.push(self.snapshot());
        }
        for _ in 0..steps {
            self.step()?;
            if self.step.is_multiple_of(every) {
                snaps.push(self.snapshot());
            }
        }
        Ok(snaps)
    }

    fn snapshot(&self) -> Snapshot<T> {
        Snapshot {
            step: self.step,
            time: self.time(),
            state: self.state().clone(),
        }
    }
}
