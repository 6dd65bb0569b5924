//! Numerical laboratory for finite-dimensional operator systems realized as
//! `*`-closed subspaces of `M_d`.

pub mod decomp;
pub mod duality;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod polytope;
pub mod rng;
pub mod serde_f64;
pub mod algebra;
pub mod conic;
pub mod system;

pub use error::{Error, Result};
pub use system::{
    build_system, is_positive, op_norm, project_to_system, realize, LevelElement, LevelFrame, OperatorSystemSpec,
    PositivityReport, ToleranceConfig,
};
