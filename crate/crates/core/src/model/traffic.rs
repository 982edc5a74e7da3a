use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::geometry::{Grid, Point};
use crate::error::{Error, Result};
use crate::numerics::{integrate_2d, QuadratureRule, Rect};
use crate::rng;

/// Parameters of the hotspot traffic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficParams {
    /// Probability mass of the uniform component.
    pub p0: f64,
    /// Hotspot spread, meters.
    pub sigma_h: f64,
    /// Hotspot count bounds. Network-wide unless `per_cell` is set.
    pub hotspots_min: usize,
    pub hotspots_max: usize,
    /// Draw the hotspot count and centers independently for every cell.
    pub per_cell: bool,
}

impl Default for TrafficParams {
    fn default() -> Self {
        TrafficParams {
            p0: 0.1,
            sigma_h: 100.0,
            hotspots_min: 18,
            hotspots_max: 36,
            per_cell: false,
        }
    }
}

impl TrafficParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p0) {
            return Err(Error::config("traffic.p0", "must lie in [0, 1]"));
        }
        if !(self.sigma_h.is_finite() && self.sigma_h > 0.0) {
            return Err(Error::config("traffic.sigma_h", "must be positive"));
        }
        if self.hotspots_min > self.hotspots_max {
            return Err(Error::config(
                "traffic.hotspots_min",
                "must not exceed hotspots_max",
            ));
        }
        if self.p0 < 1.0 && self.hotspots_max == 0 {
            return Err(Error::config(
                "traffic.hotspots_max",
                "p0 < 1 requires at least one hotspot",
            ));
        }
        Ok(())
    }
}

/// Per-cell traffic density: a uniform floor of weight `p0` plus an equal
/// mixture of isotropic Gaussians, truncated to the cell and renormalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficModel {
    pub p0: f64,
    pub sigma_h: f64,
    pub hotspots: Vec<Point>,
    /// Normalizer f0 for each cell.
    pub f0: Vec<f64>,
    pub cells: Vec<Rect>,
}

impl TrafficModel {
    /// Builds the model and computes each cell's normalizer by quadrature of
    /// the given order.
    pub fn new(
        p0: f64,
        sigma_h: f64,
        hotspots: Vec<Point>,
        grid: &Grid,
        order: usize,
    ) -> Result<Self> {
        let cells: Vec<Rect> = (0..grid.num_cells()).map(|q| grid.cell_rect(q)).collect();
        let mut model = TrafficModel {
            p0,
            sigma_h,
            hotspots,
            f0: vec![1.0; cells.len()],
            cells,
        };
        for q in 0..model.cells.len() {
            let rule = QuadratureRule::new(order, model.cells[q]);
            let mass = integrate_2d(|x, y| model.unnormalized(q, x, y), &rule)?;
            if !(mass > 0.0) {
                return Err(Error::non_finite(format!("traffic mass of cell {q} is {mass}")));
            }
            model.f0[q] = 1.0 / mass;
        }
        Ok(model)
    }

    /// Density before the f0 scaling.
    pub fn unnormalized(&self, q: usize, x: f64, y: f64) -> f64 {
        let uniform = self.p0 / self.cells[q].area();
        if self.hotspots.is_empty() || self.p0 >= 1.0 {
            return uniform;
        }
        let s2 = self.sigma_h * self.sigma_h;
        let bumps: f64 = self
            .hotspots
            .iter()
            .map(|h| (-((x - h.x).powi(2) + (y - h.y).powi(2)) / (2.0 * s2)).exp())
            .sum();
        let nh = self.hotspots.len() as f64;
        uniform + (1.0 - self.p0) / (nh * 2.0 * std::f64::consts::PI * s2) * bumps
    }

    /// Normalized density of cell `q` at `(x, y)`, in 1/m^2.
    pub fn pdf(&self, q: usize, x: f64, y: f64) -> f64 {
        debug_assert!(
            self.cells[q].contains(x, y),
            "({x}, {y}) lies outside cell {q}"
        );
        self.f0[q] * self.unnormalized(q, x, y)
    }

    /// Draws a user position in cell `q` by rejection from the untruncated
    /// mixture.
    pub fn sample<R: Rng>(&self, q: usize, rng: &mut R) -> Point {
        let rect = self.cells[q];
        let normal = Normal::new(0.0, self.sigma_h).expect("sigma_h > 0");
        loop {
            let p = if self.hotspots.is_empty() || rng.random::<f64>() < self.p0 {
                Point::new(
                    rng.random_range(rect.x0..rect.x1),
                    rng.random_range(rect.y0..rect.y1),
                )
            } else {
                let h = self.hotspots[rng.random_range(0..self.hotspots.len())];
                Point::new(h.x + normal.sample(rng), h.y + normal.sample(rng))
            };
            if rect.contains(p.x, p.y) {
                return p;
            }
        }
    }
}

/// Draws a traffic model from `seed`: the hotspot count is uniform on
/// `[hotspots_min, hotspots_max]` and centers are uniform over the network
/// (or over each cell when `per_cell` is set).
pub fn generate_traffic(
    seed: u64,
    params: &TrafficParams,
    grid: &Grid,
    order: usize,
) -> Result<TrafficModel> {
    params.validate()?;
    let mut rng = rng::stream(seed, rng::TRAFFIC_STREAM);
    let draw_count = |rng: &mut rand_chacha::ChaCha8Rng| {
        rng.random_range(params.hotspots_min..=params.hotspots_max)
    };
    let mut hotspots = Vec::new();
    if params.per_cell {
        for q in 0..grid.num_cells() {
            let r = grid.cell_rect(q);
            let n = draw_count(&mut rng);
            for _ in 0..n {
                hotspots.push(Point::new(
                    rng.random_range(r.x0..r.x1),
                    rng.random_range(r.y0..r.y1),
                ));
            }
        }
    } else {
        let n = draw_count(&mut rng);
        for _ in 0..n {
            hotspots.push(Point::new(
                rng.random_range(0.0..grid.width()),
                rng.random_range(0.0..grid.height()),
            ));
        }
    }
    TrafficModel::new(params.p0, params.sigma_h, hotspots, grid, order)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid3() -> Grid {
        Grid::new(3, 1000.0, 1000.0)
    }

    #[test]
    fn pure_uniform() {
        let m = TrafficModel::new(1.0, 100.0, vec![], &grid3(), 8).unwrap();
        for q in 0..9 {
            assert!((m.f0[q] - 1.0).abs() < 1e-12);
            let c = grid3().cell_center(q);
            assert!((m.pdf(q, c.x, c.y) - 1e-6).abs() < 1e-18);
        }
    }

    #[test]
    fn single_central_hotspot_peak() {
        let g = Grid::new(1, 1000.0, 1000.0);
        let m = TrafficModel::new(0.0, 50.0, vec![Point::new(500.0, 500.0)], &g, 64).unwrap();
        let peak = m.pdf(0, 500.0, 500.0);
        let want = 1.0 / (2.0 * std::f64::consts::PI * 2500.0);
        assert!((peak / want - 1.0).abs() < 1e-6, "{peak} vs {want}");
    }

    #[test]
    fn hotspot_count_bounds_and_determinism() {
        let p = TrafficParams {
            hotspots_min: 7,
            hotspots_max: 7,
            ..Default::default()
        };
        let m = generate_traffic(4, &p, &grid3(), 16).unwrap();
        assert_eq!(m.hotspots.len(), 7);

        let table = TrafficParams::default();
        for seed in 0..30 {
            let m = generate_traffic(seed, &table, &grid3(), 8).unwrap();
            assert!((18..=36).contains(&m.hotspots.len()));
        }
        let a = generate_traffic(99, &table, &grid3(), 16).unwrap();
        let b = generate_traffic(99, &table, &grid3(), 16).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generated_models_are_normalized() {
        for seed in 0..5 {
            let m = generate_traffic(seed, &TrafficParams::default(), &grid3(), 32).unwrap();
            for q in 0..9 {
                let rule = QuadratureRule::new(32, m.cells[q]);
                let mass = integrate_2d(|x, y| m.pdf(q, x, y), &rule).unwrap();
                assert!((mass - 1.0).abs() < 1e-6, "seed {seed} cell {q}: {mass}");
            }
        }
    }

    #[test]
    fn per_cell_hotspots_land_in_their_cells() {
        let p = TrafficParams {
            per_cell: true,
            hotspots_min: 2,
            hotspots_max: 2,
            ..Default::default()
        };
        let m = generate_traffic(1, &p, &grid3(), 8).unwrap();
        assert_eq!(m.hotspots.len(), 18);
        for (i, h) in m.hotspots.iter().enumerate() {
            assert_eq!(grid3().cell_of(*h), Some(i / 2));
        }
    }

    #[test]
    fn samples_stay_in_cell() {
        let m = generate_traffic(2, &TrafficParams::default(), &grid3(), 8).unwrap();
        let mut r = rng::stream(2, 77);
        for q in 0..9 {
            for _ in 0..200 {
                let p = m.sample(q, &mut r);
                assert!(m.cells[q].contains(p.x, p.y));
            }
        }
    }
}
