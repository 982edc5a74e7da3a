use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::access::AccessModel;
use crate::error::Result;

pub const REPORT_JSON: &str = "report.json";
pub const RRH_LOCATIONS_CSV: &str = "rrh_locations.csv";
pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const TRAFFIC_GRID_CSV: &str = "traffic_grid.csv";

/// One line of `rrh_locations.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RrhRow {
    pub cell: usize,
    pub rrh: usize,
    pub x_m: f64,
    pub y_m: f64,
    pub cu_dist_m: f64,
    pub outage: f64,
}

/// Traffic density at one quadrature node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficGridRow {
    pub cell: usize,
    pub x_m: f64,
    pub y_m: f64,
    /// users per m^2, normalized per cell
    pub pdf_per_m2: f64,
}

pub(super) fn traffic_grid(model: &AccessModel) -> Vec<TrafficGridRow> {
    let mut rows = Vec::new();
    for (q, rule) in model.rules.iter().enumerate() {
        for (x, y, _) in rule.iter() {
            rows.push(TrafficGridRow {
                cell: q,
                x_m: x,
                y_m: y,
                pdf_per_m2: model.traffic.pdf(q, x, y),
            });
        }
    }
    rows
}

/// Writes `rows` with a header line.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for row in r.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}
