use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid order {order}: {reason}")]
    InvalidOrder { order: i64, reason: &'static str },

    #[error("element {element} side {side} matches {count} other sides")]
    AmbiguousMesh {
        element: usize,
        side: &'static str,
        count: usize,
    },

    #[error("element {element} side {side} partially coincides with element {other} side {other_side}")]
    NonconformingMesh {
        element: usize,
        side: &'static str,
        other: usize,
        other_side: &'static str,
    },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("element adjacency graph has {components} connected components")]
    MultipleComponents { components: usize },

    #[error("degenerate element {element}: det g = {det_g:e} at node {node}")]
    DegenerateElement { element: usize, node: usize, det_g: f64 },

    #[error("coefficient `{name}` is not finite at node {node} of element {element} ({point:?})")]
    CoefficientEvaluation {
        name: &'static str,
        element: usize,
        node: usize,
        point: [f64; 3],
    },

    #[error("interior operator of element {element} is singular (pivot {pivot:e})")]
    SingularLeaf { element: usize, pivot: f64 },

    #[error("interface system of merge node {node} (level {level}) is singular, estimated condition {condition:e}")]
    SingularMerge { node: usize, level: usize, condition: f64 },

    #[error("connectivity error: {0}")]
    Connectivity(String),

    #[error("shape mismatch for {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("parameter ({xi}, {eta}) outside the reference square")]
    Domain { xi: f64, eta: f64 },

    #[error("mesh has a boundary; use the general solve with Dirichlet data")]
    RequiresBoundaryData,

    #[error("field is not tangent at element {element} node {node} (normal component {normal_component:e})")]
    Tangency {
        element: usize,
        node: usize,
        normal_component: f64,
    },

    #[error("factorization built for implicit weight {cached}, step requires {requested}")]
    StaleFactorization { cached: f64, requested: f64 },

    #[error("state became non-finite at step {step}")]
    Divergence { step: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("factorization cache: {0}")]
    Cache(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the numerics rather than by the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularLeaf { .. }
                | Error::SingularMerge { .. }
                | Error::DegenerateElement { .. }
                | Error::Divergence { .. }
                | Error::CoefficientEvaluation { .. }
        )
    }
}
