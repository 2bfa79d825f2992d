//! Output-feedback backstepping for the linearized Korteweg–de Vries equation
//!
//! ```text
//! u_t + u_x + u_xxx = 0  on (0, L),   u(0) = 0, u(L) = U(t), u_x(L) = V(t)
//! ```
//!
//! with left-endpoint trace measurements u_x(0), u_xx(0).
//!
//! The crate is `no_std` (it needs `alloc`) and is organised bottom-up:
//!
//! * [`poly2`]: dense bivariate polynomials used to carry the kernels exactly
//! * [`kernel`]: Picard iteration for the kernel, gains and decay constants
//! * [`volterra`]: discrete Volterra transform `I - K` and its inverses
//! * [`fdsolver`]: grid, the implicit operator `D+D+D- + D` and the steppers
//! * [`sim`]: plant/observer/error time loop and decay-rate diagnostics
#![cfg_attr(not(test), no_std)]

extern crate alloc;

mod error;
pub mod fdsolver;
pub mod kernel;
pub mod poly2;
pub mod sim;
pub mod volterra;

pub use error::{Error, Result};
pub use fdsolver::{Grid, GridFunction, StateKind, Stepper};
pub use kernel::{DecayConstants, EpsilonChoice, KernelSet};
pub use poly2::{AffineMap, BiPoly, UniPoly, Var};
pub use sim::{DecayReport, InitialDatum, Mode, SimConfig};
pub use volterra::VolterraOp;
