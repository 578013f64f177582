//! Upper bounds on `‖S(t)‖` for strongly continuous semigroups: weighted-norm
//! bounds, two-profile bounds, Riccati-based sharp bounds and Wei-type
//! estimates, with numerical certification against matrix semigroups.

pub mod bounds;
pub mod domain;
pub mod error;
pub mod harness;
pub mod koperator;
pub mod linalg;
pub mod ode;
pub mod quad;
pub mod riccati;
pub mod wnorm;

pub use domain::{BoundParams, GridFunction, SemigroupSystem, WeightSpec};
pub use error::{Error, Result};
