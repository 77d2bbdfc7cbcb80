//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Syntax or semantic error in a netlist or expression.
    #[error("line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    /// Structural problem with the circuit graph.
    #[error("graph error: {0}")]
    Graph(String),

    /// Chart construction failed (rank deficiency, bad coordinate override).
    #[error("chart error: {0}")]
    Chart(String),

    /// The network violates a determinant condition (capacitor or inductor loop).
    #[error("degenerate network: {0}")]
    Degenerate(String),

    /// Evaluating a device characteristic left its domain.
    #[error("domain error in `{expr}`: {msg}")]
    Domain { expr: String, msg: String },

    /// Adaptive quadrature failed to reach tolerance.
    #[error("quadrature did not converge on [{a}, {b}] at depth {depth}")]
    Quadrature { a: f64, b: f64, depth: usize },

    /// The mass matrix is singular at the reported state.
    #[error("singular mass matrix at q = {q:?}, q' = {qdot:?}")]
    SingularMass { q: Vec<f64>, qdot: Vec<f64> },

    /// Inductor initial currents violate Kirchhoff's current law.
    #[error("inconsistent initial currents: residual {residual:e} exceeds 1e-9")]
    InconsistentCurrents { residual: f64 },

    /// Trajectory norm exceeded the blow-up bound.
    #[error("state blow-up at t = {t}: |state| = {norm:e}")]
    BlowUp { t: f64, norm: f64 },

    /// An internal cross-check failed; indicates a bug, not bad input.
    #[error("internal check failed: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
