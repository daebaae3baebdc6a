//! Exact gluing identities for even-subset and perfect-matching
//! polynomials, Kasteleyn signs on surfaces of genus at most two, and
//! numerical checks on critical rhomboid tori.

pub mod cft;
pub mod corpus;
pub mod critical;
pub mod error;
pub mod exterior;
pub mod gluing;
pub mod graph;
pub mod io;
pub mod ising;
pub mod kasteleyn;
pub mod linalg;
pub mod pfaffian;
pub mod poly;
pub mod surface;

pub use error::{Error, Result};
pub use graph::{EdgeSubset, Graph, Weight};
pub use poly::{Monomial, MultiPoly, Rational, Var};
