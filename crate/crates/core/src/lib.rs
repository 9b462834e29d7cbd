//! Certified lower bounds for binary quadratic programs and quadratic
//! assignment problems via a Lagrangian doubly nonnegative relaxation.
//!
//! The relaxation is solved by bracketing its optimal value `y*`: each probe
//! `y` evaluates `g(y) = dist(Q - H y, K1* + K2*)` with an accelerated
//! proximal gradient method ([`apg`]) and turns the resulting dual matrix
//! into a certified lower bound ([`bracket::valid_lb`]).

pub mod apg;
pub mod bracket;
pub mod cli;
pub mod cones;
mod eigen;
pub mod error;
pub mod io;
pub mod matspace;
pub mod model;
pub mod oracle;
pub mod synth;

pub use error::{Error, Result};
pub use matspace::SymMatrix;
pub use nalgebra;
