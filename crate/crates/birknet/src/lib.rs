//! Stability analysis of LC and RLC electrical networks through the
//! Birkhoffian formulation and Liapunov's direct method.
//!
//! The pipeline runs: netlist parsing -> graph matrices -> affine
//! configuration chart -> Birkhoffian assembly -> energy / dissipation
//! structure -> equilibrium classification -> numerical verification.
//!
//! ```
//! use birknet::netlist::parse_netlist;
//! use birknet::graph::CircuitGraph;
//!
//! let doc = parse_netlist(birknet::netlist::SIX_BRANCH_EXAMPLE).unwrap();
//! let g = CircuitGraph::build(&doc).unwrap();
//! assert_eq!((g.b, g.n, g.m), (6, 4, 2));
//! ```

pub mod error;
pub mod linalg;
pub mod netlist;
pub mod graph;
pub mod configspace;
pub mod birkhoffian;
pub mod energy;
pub mod stability;

pub use error::{Error, Result};
