//! Dense linear algebra, Gaussian likelihoods, derivative-free optimization,
//! random streams and scalar probability transforms.

mod linalg;
mod matrix;
mod optim;
mod rng;
mod scalar;
mod special;

pub use linalg::{
    chol_solve, cholesky, gaussian_loglik, singular_value_range, solve_checked, JitterPolicy, Lu,
    SpdFactor, SymmetricEigen,
};
pub use matrix::Mat;
pub use optim::{nelder_mead, Minimum, NelderMead};
pub use rng::RngStream;
pub use scalar::{axpy, dot, mean, median, quantile_sorted, variance, Scalar};
pub use special::{gamma_shape1_quantile, normal_cdf, normal_quantile, two_sided_z};
