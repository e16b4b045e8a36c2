pub mod cli;
pub mod error;
pub mod exit;
pub mod identity;
pub mod inversion;
pub mod levy_model;
pub mod montecarlo;
mod poly;
pub mod quadrature;
pub mod roots;
pub mod scale;

pub use error::{Error, Result};
pub use levy_model::{JumpDistribution, LevyModel};
