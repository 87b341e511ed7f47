use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid parameters: {}", .0.join("; "))]
    InvalidParams(Vec<String>),

    #[error("degenerate rotation (det = {determinant})")]
    DegenerateRotation { determinant: f64 },

    #[error("singular linear system (condition estimate {condition:e}){}", fmt_node(.node))]
    SingularSystem { condition: f64, node: Option<usize> },

    #[error("tendon {tendon} has a degenerate path tangent{}", fmt_node(.node))]
    SingularTendonPath { tendon: usize, node: Option<usize> },

    #[error("non-finite rod state at node {node}")]
    Divergence { node: usize },

    #[error(
        "shooting did not converge after {iterations} iterations (best residual {residual:e})"
    )]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("uncontrollable configuration: |b_c| = {b_c:e} is below the floor {floor:e}")]
    Uncontrollable { b_c: f64, floor: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("solver failed at iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

fn fmt_node(node: &Option<usize>) -> String {
    match node {
        Some(n) => format!(" at node {n}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn at_node(self, index: usize) -> Self {
        match self {
            Error::SingularSystem {
                condition,
                node: None,
            } => Error::SingularSystem {
                condition,
                node: Some(index),
            },
            Error::SingularTendonPath { tendon, node: None } => Error::SingularTendonPath {
                tendon,
                node: Some(index),
            },
            other => other,
        }
    }

    /// True for failures of the numerical solver, as opposed to bad input.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::InvalidArgument(_) | Error::InvalidParams(_) | Error::InsufficientData(_) => {
                false
            }
            Error::AtIteration { source, .. } => source.is_solver_failure(),
            _ => true,
        }
    }
}
