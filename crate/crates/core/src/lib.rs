//! Exact computation of large numbers of power-series moments for coupled
//! linear ODE systems depending on a parameter `eps`.

pub mod arith;
pub mod engine;
pub mod epsolve;
pub mod error;
pub mod expr;
pub mod formats;
pub mod guess;
pub mod ode2rec;
pub mod stream;
pub mod system;
pub mod uncouple;

pub use error::{Error, Result};
