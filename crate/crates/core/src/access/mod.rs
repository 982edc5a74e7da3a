//! Closed-form lower bound on the ZF access spectral efficiency and its
//! average over the cell traffic density.
//!
//! Rates are in nats/s/Hz throughout; conversion to bits happens only when
//! reporting.
//!
//! The inter-cell interference term averages the interfering cell's
//! beamforming power split over that cell's own traffic density. That inner
//! average does not depend on the victim user, so it is computed once per
//! interfering RRH and held in an [`IciCache`] until the cell's RRHs move.
//!
//! Cell averages of the rate go through [`CellNodes`], which resolves the
//! serving-gain peak at each RRH with a polar rule.

mod cell_nodes;

pub use cell_nodes::{CellNodes, IciField, NearFieldRule};

use serde::{Deserialize, Serialize};

use crate::model::{Grid, Layout, NetworkParams, Point, TrafficModel};
use crate::numerics::QuadratureRule;

/// A user position and its rate lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub user_xy: Point,
    /// nats/s/Hz
    pub rate: f64,
}

/// `xi(q', j) = tr(D_{q'j}) = M * sum_m l_j(x_{q'm}, y_{q'm})`.
pub fn xi(rrhs: &[Point], user: Point, params: &NetworkParams) -> f64 {
    params.antennas_per_rrh as f64 * rrhs.iter().map(|r| params.pathloss(r.dist(&user))).sum::<f64>()
}

/// Quadrature grid of every cell together with the traffic mass carried by
/// each node (weight times density).
#[derive(Debug, Clone)]
pub struct AccessModel {
    pub params: NetworkParams,
    pub grid: Grid,
    pub traffic: TrafficModel,
    pub rules: Vec<QuadratureRule>,
    /// `w_i * f_q(node_i)` per cell.
    pub mass: Vec<Vec<f64>>,
    pub near_field: Vec<NearFieldRule>,
}

impl AccessModel {
    pub fn new(params: NetworkParams, traffic: TrafficModel, order: usize) -> Self {
        let grid = params.grid();
        let rules: Vec<QuadratureRule> = (0..grid.num_cells())
            .map(|q| QuadratureRule::new(order, grid.cell_rect(q)))
            .collect();
        let mass = rules
            .iter()
            .enumerate()
            .map(|(q, rule)| rule.iter().map(|(x, y, w)| w * traffic.pdf(q, x, y)).collect())
            .collect();
        let near_field = rules
            .iter()
            .map(|r| NearFieldRule::for_cell(&r.rect, order))
            .collect();
        AccessModel {
            params,
            grid,
            traffic,
            rules,
            mass,
            near_field,
        }
    }

    pub fn num_cells(&self) -> usize {
        self.grid.num_cells()
    }

    pub fn node(&self, q: usize, i: usize) -> Point {
        Point::new(self.rules[q].nodes_x[i], self.rules[q].nodes_y[i])
    }

    /// `int int l_j(x_l, y_l) / xi(q, j) f_q dx dy` for each RRH `l` of cell `q`.
    pub fn interference_weights(&self, q: usize, rrhs: &[Point]) -> Vec<f64> {
        let p = &self.params;
        let m = p.antennas_per_rrh as f64;
        let mut out = vec![0.0; rrhs.len()];
        let mut gains = vec![0.0; rrhs.len()];
        for (i, &mass) in self.mass[q].iter().enumerate() {
            let user = self.node(q, i);
            let mut total = 0.0;
            for (g, r) in gains.iter_mut().zip(rrhs) {
                *g = p.pathloss(r.dist(&user));
                total += *g;
            }
            let xi = m * total;
            for (o, g) in out.iter_mut().zip(&gains) {
                *o += mass * g / xi;
            }
        }
        out
    }

    /// Traffic-averaged ICI that cell `interferer` causes at `user`:
    /// `K * sum_l l_k(x_l, y_l) * weights[l]`. `shifted_rrhs` must already be
    /// the wrap-around image seen from the user's cell.
    pub fn ici_traffic_avg(&self, user: Point, shifted_rrhs: &[Point], weights: &[f64]) -> f64 {
        let p = &self.params;
        p.users_per_cell as f64
            * shifted_rrhs
                .iter()
                .zip(weights)
                .map(|(r, w)| p.pathloss(r.dist(&user)) * w)
                .sum::<f64>()
    }

    /// Sum of traffic-averaged ICI at `user` (inside cell `q`) over all
    /// other cells.
    pub fn total_ici(&self, q: usize, user: Point, layout: &Layout, cache: &IciCache) -> f64 {
        let mut sum = 0.0;
        let mut shifted = Vec::with_capacity(self.params.rrhs_per_cell);
        for other in 0..self.num_cells() {
            if other == q {
                continue;
            }
            let (dx, dy) = self.grid.wrap_offset(q, other);
            shifted.clear();
            shifted.extend(layout.rrh[other].iter().map(|r| r.translated(dx, dy)));
            sum += self.ici_traffic_avg(user, &shifted, cache.weights(other));
        }
        sum
    }

    /// `gamma_k` from the summed ICI.
    pub fn gamma_from_ici(&self, ici_sum: f64) -> f64 {
        let p = &self.params;
        let (n, m, k) = (
            p.rrhs_per_cell as f64,
            p.antennas_per_rrh as f64,
            p.users_per_cell as f64,
        );
        let rho = p.rho();
        n * k / ((n * m - k) * rho) * (m * rho / k * ici_sum + 1.0)
    }

    pub fn gamma_k(&self, q: usize, user: Point, layout: &Layout, cache: &IciCache) -> f64 {
        self.gamma_from_ici(self.total_ici(q, user, layout, cache))
    }

    /// `log(1 + gamma^-1 * sum_n l_k(x_qn, y_qn))` in nats.
    pub fn rate_access_lb(&self, q: usize, user: Point, layout: &Layout, cache: &IciCache) -> f64 {
        let inv_gamma = 1.0 / self.gamma_k(q, user, layout, cache);
        rate_from_parts(inv_gamma, self.serving_gain(user, &layout.rrh[q]))
    }

    pub fn rate_point(&self, q: usize, user: Point, layout: &Layout, cache: &IciCache) -> RatePoint {
        RatePoint {
            user_xy: user,
            rate: self.rate_access_lb(q, user, layout, cache),
        }
    }

    /// Sum of path gains from the serving RRHs to `user`.
    pub fn serving_gain(&self, user: Point, rrhs: &[Point]) -> f64 {
        rrhs.iter().map(|r| self.params.pathloss(r.dist(&user))).sum()
    }

    /// `1 / gamma_k` at every quadrature node of cell `q`. Depends only on the
    /// RRHs of the other cells.
    pub fn inv_gamma_field(&self, q: usize, layout: &Layout, cache: &IciCache) -> Vec<f64> {
        (0..self.rules[q].len())
            .map(|i| 1.0 / self.gamma_k(q, self.node(q, i), layout, cache))
            .collect()
    }

    /// Average of the rate lower bound over cell `q`'s traffic density.
    pub fn expected_rate(&self, q: usize, layout: &Layout, cache: &IciCache) -> f64 {
        CellNodes::from_layout(self, q, layout, cache).expected_rate()
    }

    pub fn expected_rates(&self, layout: &Layout, cache: &IciCache) -> Vec<f64> {
        (0..self.num_cells())
            .map(|q| self.expected_rate(q, layout, cache))
            .collect()
    }
}

#[inline]
pub fn rate_from_parts(inv_gamma: f64, serving_gain: f64) -> f64 {
    (inv_gamma * serving_gain).ln_1p()
}

/// Per-cell interference weights, see [`AccessModel::interference_weights`].
///
/// Reads take `&self`; a refresh after a cell's RRHs move needs `&mut self`.
#[derive(Debug, Clone, PartialEq)]
pub struct IciCache {
    weights: Vec<Vec<f64>>,
}

impl IciCache {
    pub fn new(model: &AccessModel, layout: &Layout) -> Self {
        IciCache {
            weights: (0..model.num_cells())
                .map(|q| model.interference_weights(q, &layout.rrh[q]))
                .collect(),
        }
    }

    pub fn weights(&self, q: usize) -> &[f64] {
        &self.weights[q]
    }

    pub fn refresh(&mut self, q: usize, model: &AccessModel, layout: &Layout) {
        self.weights[q] = model.interference_weights(q, &layout.rrh[q]);
    }
}
