//! Shared numerical machinery: forward-mode differentiation, Adam, SVD least
//! squares and gradient checking.

pub mod adam;
pub mod gradcheck;
pub mod linalg;
pub mod scalar;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{finite_difference, grad_check, relative_errors, FnGrad, GradProvider};
pub use linalg::{least_squares, pseudo_inverse, PseudoInverse, SVD_CUTOFF};
pub use scalar::{Dual, Real};
