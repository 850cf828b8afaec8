//! Forward-mode differentiation of transition maps and finite-difference oracles.

mod fd;
mod jacobian;
mod jet;
mod scalar;

pub use fd::{fd_step, finite_diff_jacobian, grad_scalar_fd, DEFAULT_FD_STEP};
pub use jacobian::{jacobian_params, jacobian_state, jacobian_state_generic, JacobianMatrix, MAX_JET_WIDTH};
pub use jet::{Jet, JetVector};
pub use scalar::Real;

/// Run `$body` with `$W` bound to a jet width `>= $n` from a fixed ladder.
///
/// Widths are bucketed so that only a handful of monomorphisations exist;
/// unused tangent slots stay zero.
#[macro_export]
#[doc(hidden)]
macro_rules! with_jet_width {
    ($n:expr, $W:ident => $body:expr, else $fallback:expr) => {
        match $n {
            0..=1 => {
                const $W: usize = 1;
                $body
            }
            2 => {
                const $W: usize = 2;
                $body
            }
            3..=4 => {
                const $W: usize = 4;
                $body
            }
            5..=8 => {
                const $W: usize = 8;
                $body
            }
            9..=16 => {
                const $W: usize = 16;
                $body
            }
            17..=32 => {
                const $W: usize = 32;
                $body
            }
            _ => $fallback,
        }
    };
}

/// Narrower ladder for jets of jets, where every width multiplies the cost.
#[macro_export]
#[doc(hidden)]
macro_rules! with_nested_width {
    ($n:expr, $W:ident => $body:expr, else $fallback:expr) => {
        match $n {
            0..=2 => {
                const $W: usize = 2;
                $body
            }
            3..=4 => {
                const $W: usize = 4;
                $body
            }
            5..=8 => {
                const $W: usize = 8;
                $body
            }
            9..=16 => {
                const $W: usize = 16;
                $body
            }
            _ => $fallback,
        }
    };
}
