//! Necessary conditions, conservation laws and a collocation solver for
//! isoperimetric variational and optimal-control problems with a constant
//! time delay.

pub mod calculus;
pub mod dubois_reymond;
pub mod error;
pub mod euler_lagrange;
pub mod expr;
pub mod noether;
pub mod optimal_control;
pub mod problem;
pub mod registry;
pub mod report;
pub mod solver;
pub mod trajectory;

mod along;

pub use error::{Error, Result};
pub use problem::{
    augmented_integrand, constraint_defect, constraint_values, functional_value, ArgLayout,
    AugmentedSetup, ControlProblem, History, Integrand, IsoperimetricProblem, TransformationGroup,
};
pub use trajectory::{Grid, PolySegment, Side, Trajectory};
