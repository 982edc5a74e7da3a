use serde::{Deserialize, Serialize};

use super::geometry::Grid;
use crate::error::{Error, Result};

/// How the backhaul bandwidth is shared by the N CU-RRH links of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BackhaulMode {
    /// Every link uses the full backhaul bandwidth (parallel directional links).
    #[default]
    Shared,
    /// Backhaul bandwidth is split evenly in frequency across the N links.
    DividedByN,
}

/// Scalar system parameters. Defaults are the reference
/// deployment (9 wrap-around cells of 1 km^2, 10 RRHs x 8 antennas serving
/// 10 users, 5/20 RB access/backhaul split).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkParams {
    /// Q; must be a perfect square.
    pub num_cells: usize,
    pub cell_width: f64,
    pub cell_height: f64,
    /// N
    pub rrhs_per_cell: usize,
    /// M
    pub antennas_per_rrh: usize,
    /// K
    pub users_per_cell: usize,
    /// Total access power of a cell, dBm.
    pub access_power_dbm: f64,
    /// CU backhaul transmit power, dBm.
    pub backhaul_power_dbm: f64,
    pub rb_bandwidth_hz: f64,
    pub total_rbs: usize,
    /// omega, in resource blocks.
    pub access_rbs: usize,
    /// omega_c, in resource blocks.
    pub backhaul_rbs: usize,
    pub noise_density_dbm_hz: f64,
    pub noise_figure_db: f64,
    /// d0, meters.
    pub ref_distance: f64,
    /// alpha
    pub pathloss_exponent: f64,
    /// LoS amplitude of the backhaul fading.
    pub eta1: f64,
    /// NLoS amplitude of the backhaul fading.
    pub eta2: f64,
    /// Optional Rician K-factor in dB, cross-checked against eta1/eta2.
    pub rician_k_db: Option<f64>,
    /// epsilon
    pub outage_budget: f64,
    pub backhaul_mode: BackhaulMode,
}

impl Default for NetworkParams {
    fn default() -> Self {
        NetworkParams {
            num_cells: 9,
            cell_width: 1000.0,
            cell_height: 1000.0,
            rrhs_per_cell: 10,
            antennas_per_rrh: 8,
            users_per_cell: 10,
            access_power_dbm: 30.0,
            backhaul_power_dbm: 45.0,
            rb_bandwidth_hz: 180e3,
            total_rbs: 25,
            access_rbs: 5,
            backhaul_rbs: 20,
            noise_density_dbm_hz: -174.0,
            noise_figure_db: 8.0,
            ref_distance: 0.392,
            pathloss_exponent: 3.76,
            eta1: 8.0,
            eta2: std::f64::consts::SQRT_2,
            rician_k_db: Some(15.0),
            outage_budget: 0.2,
            backhaul_mode: BackhaulMode::Shared,
        }
    }
}

/// `(1 + d/d0)^-alpha`; negative distances are treated as zero.
#[inline]
pub fn pathloss(d: f64, d0: f64, alpha: f64) -> f64 {
    (1.0 + d.max(0.0) / d0).powf(-alpha)
}

/// Thermal noise power in mW over `bw_hz`, from a density in dBm/Hz and a
/// noise figure in dB.
pub fn noise_power_mw(bw_hz: f64, density_dbm_hz: f64, figure_db: f64) -> f64 {
    10f64.powf((density_dbm_hz + figure_db) / 10.0) * bw_hz
}

fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

impl NetworkParams {
    pub fn validate(&self) -> Result<()> {
        let side = (self.num_cells as f64).sqrt().round() as usize;
        if self.num_cells == 0 || side * side != self.num_cells {
            return Err(Error::config(
                "network.num_cells",
                format!("{} is not a perfect square", self.num_cells),
            ));
        }
        for (name, v) in [
            ("network.cell_width", self.cell_width),
            ("network.cell_height", self.cell_height),
            ("network.rb_bandwidth_hz", self.rb_bandwidth_hz),
            ("network.ref_distance", self.ref_distance),
            ("network.eta2", self.eta2),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.eta1.is_finite() && self.eta1 >= 0.0) {
            return Err(Error::config("network.eta1", "must be nonnegative"));
        }
        if self.rrhs_per_cell == 0 || self.antennas_per_rrh == 0 || self.users_per_cell == 0 {
            return Err(Error::config(
                "network",
                "rrhs_per_cell, antennas_per_rrh and users_per_cell must be at least 1",
            ));
        }
        if self.rrhs_per_cell * self.antennas_per_rrh <= self.users_per_cell {
            return Err(Error::config(
                "network.rrhs_per_cell",
                format!(
                    "N*M = {} must exceed K = {}",
                    self.rrhs_per_cell * self.antennas_per_rrh,
                    self.users_per_cell
                ),
            ));
        }
        if self.access_rbs < 1 || self.backhaul_rbs < 1 {
            return Err(Error::config(
                "network.access_rbs",
                "access_rbs and backhaul_rbs must be at least 1",
            ));
        }
        if self.access_rbs + self.backhaul_rbs > self.total_rbs {
            return Err(Error::config(
                "network.access_rbs",
                format!(
                    "access_rbs + backhaul_rbs = {} exceeds total_rbs = {}",
                    self.access_rbs + self.backhaul_rbs,
                    self.total_rbs
                ),
            ));
        }
        if !(self.outage_budget > 0.0 && self.outage_budget < 1.0) {
            return Err(Error::config("network.outage_budget", "must lie in (0, 1)"));
        }
        if !(self.pathloss_exponent > 2.0) {
            return Err(Error::config("network.pathloss_exponent", "must exceed 2"));
        }
        if let Some(k_db) = self.rician_k_db {
            let implied = self.rician_k_factor_db();
            if (implied - k_db).abs() > 0.1 {
                return Err(Error::config(
                    "network.rician_k_db",
                    format!("{k_db} dB disagrees with eta1^2/eta2^2 = {implied:.3} dB"),
                ));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Grid {
        let side = (self.num_cells as f64).sqrt().round() as usize;
        Grid::new(side, self.cell_width, self.cell_height)
    }

    pub fn rician_k_factor_db(&self) -> f64 {
        10.0 * (self.eta1 * self.eta1 / (self.eta2 * self.eta2)).log10()
    }

    pub fn pathloss(&self, d: f64) -> f64 {
        pathloss(d, self.ref_distance, self.pathloss_exponent)
    }

    pub fn access_bandwidth_hz(&self) -> f64 {
        self.access_rbs as f64 * self.rb_bandwidth_hz
    }

    /// Bandwidth seen by one CU-RRH link.
    pub fn backhaul_link_bandwidth_hz(&self) -> f64 {
        let bw = self.backhaul_rbs as f64 * self.rb_bandwidth_hz;
        match self.backhaul_mode {
            BackhaulMode::Shared => bw,
            BackhaulMode::DividedByN => bw / self.rrhs_per_cell as f64,
        }
    }

    /// sigma_z^2 in mW.
    pub fn access_noise_mw(&self) -> f64 {
        noise_power_mw(
            self.access_bandwidth_hz(),
            self.noise_density_dbm_hz,
            self.noise_figure_db,
        )
    }

    /// sigma^2 of one backhaul link in mW.
    pub fn backhaul_noise_mw(&self) -> f64 {
        noise_power_mw(
            self.backhaul_link_bandwidth_hz(),
            self.noise_density_dbm_hz,
            self.noise_figure_db,
        )
    }

    pub fn access_power_mw(&self) -> f64 {
        dbm_to_mw(self.access_power_dbm)
    }

    /// rho = p / sigma_z^2
    pub fn rho(&self) -> f64 {
        self.access_power_mw() / self.access_noise_mw()
    }

    /// rho_c = p_c / sigma^2
    pub fn rho_c(&self) -> f64 {
        dbm_to_mw(self.backhaul_power_dbm) / self.backhaul_noise_mw()
    }

    /// K * omega / omega_c with omega_c the per-link bandwidth.
    pub fn backhaul_load_ratio(&self) -> f64 {
        let k = self.users_per_cell as f64;
        k * self.access_bandwidth_hz() / self.backhaul_link_bandwidth_hz()
    }
}
