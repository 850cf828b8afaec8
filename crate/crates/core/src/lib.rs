//! Robustness of controlled dynamical systems measured by Lyapunov spectra of
//! differentiable transition maps, and gradient-based co-design of hardware
//! and controller parameters against that measure.
//!
//! ```
//! use lyra::dynsys::TransitionMap;
//! use lyra::lyap::{rollout, spectrum_qr_propagated};
//!
//! let map = TransitionMap::henon(1.4, 0.3).unwrap();
//! let traj = rollout(&map, &[0.1, 0.1], 20_000).unwrap();
//! let spec = spectrum_qr_propagated(&traj).unwrap();
//! assert!((spec.metric().l_lambda - 0.3f64.ln()).abs() < 1e-9);
//! ```

pub mod diffcore;
pub mod dynsys;
pub mod linalg;
pub mod lyap;
pub mod opt;

mod error;

pub use error::{Error, Result};
