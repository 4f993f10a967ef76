//! Discrete dislocation dynamics on two-dimensional lattice complexes.

pub mod barrier;
pub mod complex;
pub mod ddd;
pub mod dislocation;
pub mod error;
pub mod force;
pub mod forms;
pub mod full_lattice;
pub mod geom;
pub mod kmc;
pub mod lattice;
pub mod ldp;
pub mod par;
pub mod quadrature;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
pub use geom::Vec2;
pub use lattice::{build_lattice, CellKey, LatticeKind, LatticeSpec};
