//! Outage of the point-to-point Rician backhaul links and its inversion into
//! a maximum CU-RRH distance.
//!
//! A link of RRH `n` in cell `q` is in outage when its instantaneous rate,
//! scaled by the backhaul bandwidth, cannot carry the `K` users' traffic:
//! `omega_c * log(1 + rho_c |g|^2 l(d)) <= K * omega * R`. With
//! `|g|^2` Rician-power distributed this is a Marcum Q expression.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{NetworkParams, Point};
use crate::numerics::{bessel_i0_scaled, bisect, marcum_q1};

/// Exponent beyond which `exp(K omega / omega_c * R)` is treated as infinite.
const EXP_GUARD: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageQuery {
    pub rrh_xy: Point,
    pub cu_xy: Point,
    /// Cell-average access rate, nats/s/Hz.
    pub avg_access_rate: f64,
}

impl OutageQuery {
    pub fn distance(&self) -> f64 {
        self.rrh_xy.dist(&self.cu_xy)
    }

    pub fn zeta(&self, params: &NetworkParams) -> f64 {
        zeta(self.distance(), self.avg_access_rate, params)
    }

    pub fn outage_prob(&self, params: &NetworkParams) -> Result<f64> {
        outage_prob(self.distance(), self.avg_access_rate, params)
    }
}

/// Fading-power threshold below which the link is in outage:
/// `(exp(K omega/omega_c R) - 1) / (rho_c l(d))`. Returns `+inf` when the
/// exponent exceeds the overflow guard.
pub fn zeta(cu_distance: f64, avg_access_rate: f64, params: &NetworkParams) -> f64 {
    let exponent = params.backhaul_load_ratio() * avg_access_rate.max(0.0);
    if exponent > EXP_GUARD {
        return f64::INFINITY;
    }
    if exponent == 0.0 {
        return 0.0;
    }
    let ln_zeta = exponent.exp_m1().ln() - params.rho_c().ln()
        + params.pathloss_exponent * (cu_distance.max(0.0) / params.ref_distance).ln_1p();
    ln_zeta.exp()
}

/// `P_qn = 1 - Q1(sqrt(2) eta1 / eta2, sqrt(2 zeta) / eta2)`.
pub fn outage_prob(cu_distance: f64, avg_access_rate: f64, params: &NetworkParams) -> Result<f64> {
    outage_from_zeta(zeta(cu_distance, avg_access_rate, params), params)
}

pub fn outage_from_zeta(zeta: f64, params: &NetworkParams) -> Result<f64> {
    if zeta.is_infinite() {
        return Ok(1.0);
    }
    let a = std::f64::consts::SQRT_2 * params.eta1 / params.eta2;
    let b = (2.0 * zeta).sqrt() / params.eta2;
    Ok(1.0 - marcum_q1(a, b)?)
}

/// Density of `delta = |g|^2` for Rician fading with LoS amplitude `eta1`
/// and NLoS power `eta2^2`.
pub fn rician_power_pdf(delta: f64, eta1: f64, eta2: f64) -> f64 {
    if delta < 0.0 {
        return 0.0;
    }
    let e2 = eta2 * eta2;
    let z = 2.0 * eta1 * delta.sqrt() / e2;
    let scaled = bessel_i0_scaled(z).expect("finite nonnegative argument");
    (z - (eta1 * eta1 + delta) / e2).exp() * scaled / e2
}

/// `P[|g|^2 <= delta]`.
pub fn rician_power_cdf(delta: f64, eta1: f64, eta2: f64) -> Result<f64> {
    if delta <= 0.0 {
        return Ok(0.0);
    }
    let a = std::f64::consts::SQRT_2 * eta1 / eta2;
    Ok(1.0 - marcum_q1(a, (2.0 * delta).sqrt() / eta2)?)
}

/// Result of inverting the outage constraint for a fixed access rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum BackhaulLimit {
    /// Outage equals the budget at this CU-RRH distance.
    Binding { distance: f64 },
    /// Outage stays within budget out to the search limit.
    Inactive { distance: f64 },
    /// Even an RRH on top of its CU violates the budget.
    Infeasible { outage_at_cu: f64 },
}

impl BackhaulLimit {
    /// Usable maximum distance, if any.
    pub fn distance(&self) -> Option<f64> {
        match *self {
            BackhaulLimit::Binding { distance } | BackhaulLimit::Inactive { distance } => {
                Some(distance)
            }
            BackhaulLimit::Infeasible { .. } => None,
        }
    }
}

/// Largest CU-RRH distance in `[0, search_limit]` whose outage stays within
/// `params.outage_budget`, found by bisection to `|P - eps| <= 1e-7`.
pub fn max_backhaul_distance(
    avg_access_rate: f64,
    params: &NetworkParams,
    search_limit: f64,
) -> Result<BackhaulLimit> {
    let eps = params.outage_budget;
    let at_cu = outage_prob(0.0, avg_access_rate, params)?;
    if at_cu > eps {
        return Ok(BackhaulLimit::Infeasible { outage_at_cu: at_cu });
    }
    if outage_prob(search_limit, avg_access_rate, params)? <= eps {
        return Ok(BackhaulLimit::Inactive {
            distance: search_limit,
        });
    }
    let g = |d: f64| outage_prob(d, avg_access_rate, params).unwrap_or(f64::NAN) - eps;
    let d = bisect(g, 0.0, search_limit, 1e-7)?;
    Ok(BackhaulLimit::Binding { distance: d })
}
