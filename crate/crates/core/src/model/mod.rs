//! Network geometry, system parameters, path loss and the hotspot traffic
//! model.

mod geometry;
mod params;
mod traffic;

pub use geometry::{wrap_shift, Grid, Layout, Point};
pub use params::{noise_power_mw, pathloss, BackhaulMode, NetworkParams};
pub use traffic::{generate_traffic, TrafficModel, TrafficParams};
