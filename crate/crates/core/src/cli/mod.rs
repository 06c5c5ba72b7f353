//! The `surfhps` command line: `mesh`, `solve`, `converge`, `simulate` and
//! `bench`. Settings come from an optional TOML file; flags override it.
//!
//! Exit codes: 0 on success, 1 on numerical failure (singular or degenerate
//! operators, divergence), 2 on input or configuration errors.

pub mod commands;
pub mod config;
pub mod expr;
pub mod family;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
pub use config::{Overrides, RunConfig};
pub use family::MeshFamily;

#[derive(Parser, Debug)]
#[command(
    name = "surfhps",
    version,
    about = "Fast direct solver for elliptic PDEs on high-order surface meshes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Mesh file to read.
    #[arg(long, global = true, conflicts_with = "gen")]
    pub mesh: Option<PathBuf>,
    /// Mesh generator: sphere, cube, blob, torus, deformed-torus, twisted-torus.
    #[arg(long, global = true)]
    pub gen: Option<String>,
    /// Refinement level of generated meshes.
    #[arg(long, global = true)]
    pub refine: Option<usize>,
    /// Polynomial order per element.
    #[arg(long, global = true)]
    pub order: Option<usize>,
    /// PDE preset: laplace-beltrami, helmholtz-beltrami or custom.
    #[arg(long, global = true)]
    pub pde: Option<String>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    /// IMEX-BDF order, 1 to 4.
    #[arg(long, global = true)]
    pub scheme: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Factorization cache file, reused when it matches the mesh and operator.
    #[arg(long, global = true)]
    pub cache_factorization: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Build or read a mesh and write it with its statistics.
    Mesh,
    /// Factor and solve one boundary value problem.
    Solve,
    /// Measure the error over refinement levels and fit the order.
    Converge,
    /// Run a reaction-diffusion simulation.
    Simulate,
    /// Time factorization, solve and RHS update over refinement levels.
    Bench,
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            mesh: self.mesh.clone(),
            gen: self.gen.clone(),
            refine: self.refine,
            order: self.order,
            pde: self.pde.clone(),
            dt: self.dt,
            steps: self.steps,
            scheme: self.scheme,
            out: self.out.clone(),
            threads: self.threads,
            seed: self.seed,
            cache: self.cache_factorization.clone(),
        }
    }

    pub fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        cfg.apply(&self.overrides());
        Ok(cfg)
    }
}

/// Runs `command` inside a pool of `cfg.run.threads` workers.
pub fn execute(command: Command, cfg: &RunConfig) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| match command {
        Command::Mesh => {
            let r = commands::cmd_mesh(cfg)?;
            println!(
                "mesh: {} elements, {} nodes, {} interfaces, {} boundary edges, tree depth {}",
                r.elements, r.nodes, r.interfaces, r.boundary_edges, r.tree_depth
            );
            Ok(())
        }
        Command::Solve => {
            let r = commands::cmd_solve(cfg)?;
            print!(
                "solve: {} elements, factor {:.3}s, solve {:.3}s",
                r.solution.mesh().len(),
                r.factor_seconds,
                r.solve_seconds
            );
            match r.error {
                Some(e) => println!(", max error {:.3e} (relative {:.3e})", e.max, e.rel_max),
                None => println!(),
            }
            Ok(())
        }
        Command::Converge => {
            let r = commands::cmd_converge(cfg)?;
            for row in &r.rows {
                println!(
                    "level {}: {} elements, max error {:.3e}, l2 error {:.3e}",
                    row.level, row.elements, row.rel_max, row.rel_l2
                );
            }
            println!(
                "fitted order {:.2} (max {:.2}, l2 {:.2})",
                r.fitted_order, r.fitted_max, r.fitted_l2
            );
            Ok(())
        }
        Command::Simulate => {
            let r = commands::cmd_simulate(cfg)?;
            println!(
                "simulate: {} steps to t = {}, {} snapshots, {} factorizations",
                r.steps, r.final_time, r.snapshots, r.factorizations
            );
            Ok(())
        }
        Command::Bench => {
            let r = commands::cmd_bench(cfg)?;
            for row in &r.rows {
                println!(
                    "{} elements: factor {:.3e}s, solve {:.3e}s, rhs {:.3e}s, {} bytes",
                    row.elements, row.factor_seconds, row.solve_seconds, row.rhs_update_seconds, row.memory_bytes
                );
            }
            let e = r.exponents;
            println!(
                "exponents: factor {:.2}, solve {:.2}, rhs {:.2}, memory {:.2}",
                e[0], e[1], e[2], e[3]
            );
            Ok(())
        }
    })
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        1
    } else {
        2
    }
}

/// Parses nothing; runs an already parsed command line and returns the
/// process exit code.
pub fn run(cli: &Cli) -> i32 {
    match cli.config().and_then(|cfg| execute(cli.command, &cfg)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_parse_after_subcommand() {
        let cli =
            Cli::try_parse_from(["surfhps", "solve", "--gen", "torus", "--order", "6", "--threads", "2"]).unwrap();
        assert_eq!(cli.command, Command::Solve);
        let cfg = cli.config().unwrap();
        assert_eq!(cfg.mesh.family().unwrap(), Some(MeshFamily::Torus));
        assert_eq!((cfg.mesh.order, cfg.run.threads), (6, 2));
        assert!(Cli::try_parse_from(["surfhps", "solve", "--mesh", "a", "--gen", "sphere"]).is_err());
    }

    #[test]
    fn exit_codes() {
        let cli = Cli::try_parse_from(["surfhps", "mesh", "--mesh", "/nonexistent/surface.mesh"]).unwrap();
        assert_eq!(run(&cli), 2);
        assert_eq!(
            exit_code(&Error::SingularMerge {
                node: 0,
                level: 0,
                condition: 1e20
            }),
            1
        );
    }
}
