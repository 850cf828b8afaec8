//! Dense decompositions used by the spectrum estimators.

mod matrix;
mod qr;
mod svd;

pub use matrix::Matrix;
pub use qr::{qr, QrFactors};
pub use svd::{log_singular_values, singular_values, svd, SvdFactors, DEFAULT_SV_FLOOR, MAX_SWEEPS};
