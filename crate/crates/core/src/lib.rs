pub mod access;
pub mod backhaul;
pub mod error;
pub mod experiment;
pub mod model;
pub mod numerics;
pub mod mc_oracle;
pub mod optimizer;
pub mod rng;

pub use error::{Error, Result};
