//! Shared numerical services: damped least squares, matrix exponential for
//! the 4-state generator, adaptive quadrature, deterministic splittable
//! random streams, and a chi-square goodness-of-fit helper.

mod expm;
mod lm;
mod quad;
mod rng;
mod stats;

pub(crate) use expm::stochastic_propagator;
pub use expm::{matrix_exponential, matrix_exponential_action};
pub use lm::{central_difference_jacobian, least_squares, FitOptions, FitOutcome, FitProblem};
pub use quad::{quadrature, Domain};
pub use rng::RandomStream;
pub use stats::{chi_square_test, ChiSquareReport};
