//! Run configuration: a TOML file with sections, overridden by flags.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::family::MeshFamily;
use crate::error::{Error, Result};

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub file: Option<PathBuf>,
    pub gen: Option<String>,
    pub refine: usize,
    pub order: usize,
    /// Blob deformation amplitude.
    pub amplitude: f64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            file: None,
            gen: None,
            refine: 1,
            order: 8,
            amplitude: 0.2,
        }
    }
}

impl MeshConfig {
    pub fn family(&self) -> Result<Option<MeshFamily>> {
        if self.file.is_some() {
            return Ok(None);
        }
        let f = self.gen.as_deref().unwrap_or("sphere").parse()?;
        Ok(Some(match f {
            MeshFamily::Blob { .. } => MeshFamily::Blob {
                amplitude: self.amplitude,
            },
            f => f,
        }))
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PdeConfig {
    /// `laplace-beltrami`, `helmholtz-beltrami` or `custom`.
    pub preset: String,
    /// Zeroth-order coefficient of the Helmholtz preset.
    pub shift: f64,
    pub a11: Option<String>,
    pub a22: Option<String>,
    pub a33: Option<String>,
    pub a12: Option<String>,
    pub a23: Option<String>,
    pub a13: Option<String>,
    pub b1: Option<String>,
    pub b2: Option<String>,
    pub b3: Option<String>,
    pub c: Option<String>,
    pub rhs: Option<String>,
    pub exact: Option<String>,
    pub boundary: Option<String>,
}

impl Default for PdeConfig {
    fn default() -> Self {
        Self {
            preset: "laplace-beltrami".into(),
            shift: -1.0,
            a11: None,
            a22: None,
            a33: None,
            a12: None,
            a23: None,
            a13: None,
            b1: None,
            b2: None,
            b3: None,
            c: None,
            rhs: None,
            exact: None,
            boundary: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergeConfig {
    pub levels: Vec<usize>,
    /// Level of the self-convergence reference; defaults to one above the
    /// finest level when no exact solution is given.
    pub reference: Option<usize>,
    /// Norm of the fitted order: `max` or `l2`.
    pub norm: String,
}

impl Default for ConvergeConfig {
    fn default() -> Self {
        Self {
            levels: vec![0, 1, 2],
            reference: None,
            norm: "max".into(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    /// `turing` or `cgl`.
    pub model: String,
    /// Parameter set: `blob`, `stellarator` or `cow`.
    pub preset: String,
    pub scheme: usize,
    pub dt: Option<f64>,
    pub steps: Option<usize>,
    pub every: usize,
    /// `random`, `smooth` or `constant`.
    pub init: String,
    pub amplitude: f64,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub delta: Option<f64>,
    pub delta_v: Option<f64>,
    pub tau2: Option<f64>,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            model: "turing".into(),
            preset: "blob".into(),
            scheme: 4,
            dt: None,
            steps: None,
            every: 100,
            init: "random".into(),
            amplitude: 0.1,
            alpha: None,
            beta: None,
            delta: None,
            delta_v: None,
            tau2: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub levels: Vec<usize>,
    pub repetitions: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            levels: vec![0, 1, 2],
            repetitions: 3,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// 0 uses all cores.
    pub threads: usize,
    pub seed: u64,
    pub cache: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            threads: 0,
            seed: 42,
            cache: None,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mesh: MeshConfig,
    pub pde: PdeConfig,
    pub converge: ConvergeConfig,
    pub time: TimeConfig,
    pub bench: BenchConfig,
    pub output: OutputConfig,
    pub run: RunSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Flag values that override the file; `None` keeps the file's value.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub mesh: Option<PathBuf>,
    pub gen: Option<String>,
    pub refine: Option<usize>,
    pub order: Option<usize>,
    pub pde: Option<String>,
    pub dt: Option<f64>,
    pub steps: Option<usize>,
    pub scheme: Option<usize>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub cache: Option<PathBuf>,
}

impl RunConfig {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(m) = &o.mesh {
            self.mesh.file = Some(m.clone());
            self.mesh.gen = None;
        }
        if let Some(g) = &o.gen {
            self.mesh.gen = Some(g.clone());
            self.mesh.file = None;
        }
        if let Some(r) = o.refine {
            self.mesh.refine = r;
        }
        if let Some(p) = o.order {
            self.mesh.order = p;
        }
        if let Some(p) = &o.pde {
            self.pde.preset = p.clone();
        }
        if let Some(dt) = o.dt {
            self.time.dt = Some(dt);
        }
        if let Some(s) = o.steps {
            self.time.steps = Some(s);
        }
        if let Some(k) = o.scheme {
            self.time.scheme = k;
        }
        if let Some(d) = &o.out {
            self.output.dir = d.clone();
        }
        if let Some(t) = o.threads {
            self.run.threads = t;
        }
        if let Some(s) = o.seed {
            self.run.seed = s;
        }
        if let Some(c) = &o.cache {
            self.run.cache = Some(c.clone());
        }
    }
}
