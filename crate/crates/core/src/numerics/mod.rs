//! Dense linear algebra, scalar functions, seeded randomness, SGD, and
//! finite-difference gradient checks.

mod functions;
mod gradcheck;
mod matrix;
mod optim;
mod rng;

pub use functions::{lambert_w, log_sigmoid, relu, sigmoid, softmax, softmax_ce, softplus};
pub use gradcheck::{
    finite_diff_grad, max_relative_error, relative_error, DEFAULT_EPS, REL_ERROR_FLOOR,
};
pub use matrix::{argmax, dot, Matrix};
pub use optim::{sgd_step, SgdState};
pub use rng::Rng;
