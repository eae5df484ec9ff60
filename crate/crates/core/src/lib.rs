//! Locality classes of tripartite binary Bell scenarios.

pub mod behavior;
pub mod error;
pub mod fixtures;
pub mod inequalities;
pub mod linalg;
pub mod membership;
pub mod quantum;
pub mod scalar;
pub mod scenario;
pub mod solver;
pub mod vertices;

pub use behavior::{Behavior, CorrelatorForm};
pub use error::{Error, Result};
pub use scalar::{Mode, Rational, Scalar};
pub use scenario::{Bipartition, Party, Term};
