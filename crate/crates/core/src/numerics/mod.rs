//! Dense linear algebra, stable nonlinearities, seeded streams and the
//! finite-difference gradient checker.

mod gradcheck;
mod linalg;
pub mod rng;

pub use gradcheck::{finite_diff_check, GradCheckOptions, GradCheckReport};
pub use linalg::{
    axpy, cosine_sim, cosine_with_grad, dot, log_sum_exp, norm, scaled, sigmoid, softmax,
    softplus, solve_spd, sub, CosineGrad, Mat64,
};
pub use rng::{fnv1a64, Key, SplitMix64};
