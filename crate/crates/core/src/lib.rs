//! Numerical bridge between the special double confluent Heun equation
//! `z^2 E'' + ((l+1) z + mu (1 - z^2)) E' + (-mu (l+1) z + lambda) E = 0`
//! and the overdamped Josephson junction equation
//! `phi' + sin(phi) = B + A cos(omega t)`.

pub mod bridge;
pub mod cli;
pub mod cover;
pub mod eigenbasis;
pub mod error;
pub mod heun;
pub mod monodromy;
pub mod odeint;
pub mod params;
pub mod rsj;
pub mod sweep;

pub use cover::{CoverPath, CoverPoint};
pub use error::{Error, Result};
pub use params::Params;
