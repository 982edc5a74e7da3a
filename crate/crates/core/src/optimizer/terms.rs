//! Per-cell working state and the gradient terms of the placement updates.

use crate::access::{AccessModel, CellNodes, IciCache, IciField};
use crate::backhaul;
use crate::error::{Error, Result};
use crate::model::{Layout, Point};
use crate::numerics::bessel_i0_scaled;

/// Traffic-weighted moments of `A1` for one RRH:
/// `(int A1 f, int x A1 f, int y A1 f)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct A1Moments {
    pub mass: f64,
    pub x: f64,
    pub y: f64,
}

impl A1Moments {
    pub fn centroid(&self) -> Point {
        Point::new(self.x / self.mass, self.y / self.mass)
    }
}

/// `A1 = g^-1 (1 + d/d0)^(-1-alpha) / (d (1 + g^-1 sum_n l_n))` with `d`
/// clamped below by `min_distance`.
#[inline]
pub fn a1_term(
    inv_gamma: f64,
    distance: f64,
    serving_gain: f64,
    d0: f64,
    alpha: f64,
    min_distance: f64,
) -> f64 {
    let d = distance.max(min_distance);
    inv_gamma * (1.0 + d / d0).powf(-1.0 - alpha) / (d * (1.0 + inv_gamma * serving_gain))
}

/// Working copy of one cell while its RRHs are being updated: the cell's
/// integration nodes (with the frozen `1/gamma` field, which depends only on
/// the other cells) and the current traffic-averaged rate.
#[derive(Debug, Clone)]
pub struct CellContext<'a> {
    pub model: &'a AccessModel,
    pub q: usize,
    pub cu: Point,
    pub rrhs: Vec<Point>,
    nodes: CellNodes,
    rate: f64,
    pub min_distance: f64,
}

impl<'a> CellContext<'a> {
    pub fn new(
        model: &'a AccessModel,
        q: usize,
        layout: &Layout,
        cache: &IciCache,
        min_distance: f64,
    ) -> Self {
        let field = IciField::new(model, q, layout, cache);
        Self::with_field(model, q, layout.rrh[q].clone(), layout.cu[q], field, min_distance)
    }

    pub fn with_field(
        model: &'a AccessModel,
        q: usize,
        rrhs: Vec<Point>,
        cu: Point,
        field: IciField,
        min_distance: f64,
    ) -> Self {
        let nodes = CellNodes::new(model, q, rrhs.clone(), field);
        let rate = nodes.expected_rate();
        CellContext {
            model,
            q,
            cu,
            rrhs,
            nodes,
            rate,
            min_distance,
        }
    }

    /// Current traffic-averaged rate of the cell, nats/s/Hz.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn nodes(&self) -> &CellNodes {
        &self.nodes
    }

    pub fn set_rrh(&mut self, m: usize, p: Point) {
        self.rrhs[m] = p;
        self.nodes.set_rrh(self.model, m, p);
        self.rate = self.nodes.expected_rate();
    }

    /// Rate the cell would have with RRH `m` at `p`, everything else fixed.
    pub fn rate_with(&self, m: usize, p: Point) -> f64 {
        let mut nodes = self.nodes.clone();
        nodes.set_rrh(self.model, m, p);
        nodes.expected_rate()
    }

    pub fn a1_moments(&self, m: usize) -> A1Moments {
        let p = &self.model.params;
        let rrh = self.rrhs[m];
        let mut out = A1Moments {
            mass: 0.0,
            x: 0.0,
            y: 0.0,
        };
        for (u, mass, inv_gamma, serving) in self.nodes.iter() {
            let a1 = a1_term(
                inv_gamma,
                rrh.dist(&u),
                serving,
                p.ref_distance,
                p.pathloss_exponent,
                self.min_distance,
            );
            let w = a1 * mass;
            out.mass += w;
            out.x += w * u.x;
            out.y += w * u.y;
        }
        out
    }

    pub fn cu_distance(&self, m: usize) -> f64 {
        self.rrhs[m].dist(&self.cu)
    }

    pub fn outage(&self, m: usize) -> Result<f64> {
        backhaul::outage_prob(self.cu_distance(m), self.rate, &self.model.params)
    }

    pub fn outages(&self) -> Result<Vec<f64>> {
        (0..self.rrhs.len()).map(|m| self.outage(m)).collect()
    }

    /// Cell-local Lagrangian `-R + sum_n lambda_n (P_n - eps)`.
    pub fn lagrangian(&self, lambdas: &[f64]) -> Result<f64> {
        let eps = self.model.params.outage_budget;
        let mut l = -self.rate;
        for (m, &lam) in lambdas.iter().enumerate() {
            if lam != 0.0 {
                l += lam * (self.outage(m)? - eps);
            }
        }
        Ok(l)
    }
}

/// Constraint-gradient terms of the direct update for RRH `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintTerms {
    pub a2: f64,
    pub a3: f64,
    /// Cross-RRH term from the chain rule through the shared cell rate.
    pub a4: f64,
    /// The cross-RRH term with the printed inner exponential
    /// `exp(-(eta1^2/eta2^2 + J_m^2/2))` in place of the rate.
    pub a4_printed: f64,
}

fn finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::non_finite(format!("constraint term {name} = {v}")))
    }
}

/// Evaluates `A2, A3, A4` for RRH `m` of the cell.
///
/// Products of very large and very small factors (`exp(cR)`,
/// `(1 + d/d0)^(alpha/2)`, `1/sqrt(rho_c)`) are combined as logarithms; the
/// Rician kernel `exp(-(a^2/2 + J^2/2)) I0(a J)` is evaluated as
/// `exp(-(a - J)^2 / 2) * e^{-aJ} I0(aJ)`.
pub fn a2_a3_a4_terms(ctx: &CellContext<'_>, m: usize, lambdas: &[f64]) -> Result<ConstraintTerms> {
    let p = &ctx.model.params;
    let c = p.backhaul_load_ratio();
    let cr = c * ctx.rate();
    let zero = ConstraintTerms {
        a2: 0.0,
        a3: 0.0,
        a4: 0.0,
        a4_printed: 0.0,
    };
    if lambdas.iter().all(|&l| l == 0.0) || cr <= 0.0 {
        return Ok(zero);
    }
    if cr > 700.0 {
        return Err(Error::non_finite(format!(
            "constraint terms: exp(K omega/omega_c R) overflows (exponent {cr})"
        )));
    }
    let a = std::f64::consts::SQRT_2 * p.eta1 / p.eta2;
    let ln_em1 = cr.exp_m1().ln();
    let ln_rho_c = p.rho_c().ln();
    let half_alpha = 0.5 * p.pathloss_exponent;
    let log_stretch = |d: f64| (d / p.ref_distance).ln_1p();

    // G_n = lambda_n J_n kernel(J_n), each J_n = sqrt(2 zeta_n) / eta2
    let mut j = Vec::with_capacity(ctx.rrhs.len());
    let mut g = Vec::with_capacity(ctx.rrhs.len());
    for (n, &lam) in lambdas.iter().enumerate() {
        let dn = ctx.cu_distance(n);
        let ln_zeta = ln_em1 - ln_rho_c + p.pathloss_exponent * log_stretch(dn);
        let jn = (2.0f64.ln() + ln_zeta).mul_add(0.5, 0.0).exp() / p.eta2;
        let kernel = (-0.5 * (a - jn) * (a - jn)).exp()
            * bessel_i0_scaled(a * jn).map_err(|_| Error::non_finite(format!("J_{n} = {jn}")))?;
        j.push(jn);
        g.push(lam * jn * kernel);
    }

    // c e^{cR} / (eta2 sqrt(2 rho_c (e^{cR} - 1))), in logs
    let ln_front = c.ln() + cr - p.eta2.ln() - 0.5 * (2.0f64.ln() + ln_rho_c + ln_em1);
    let weighted = |n: usize| {
        if g[n] == 0.0 {
            0.0
        } else {
            (g[n].ln() + half_alpha * log_stretch(ctx.cu_distance(n))).exp()
        }
    };

    let a2 = finite("A2", if g[m] == 0.0 { 0.0 } else { (ln_front + g[m].ln() + half_alpha * log_stretch(ctx.cu_distance(m))).exp() })?;

    let dm = ctx.cu_distance(m).max(ctx.min_distance);
    let a3 = if g[m] == 0.0 {
        0.0
    } else {
        (g[m].ln() + 0.5 * ln_em1 - p.eta2.ln() - 0.5 * (2.0f64.ln() + ln_rho_c)
            + (half_alpha - 1.0) * log_stretch(dm)
            - dm.ln())
        .exp()
    };
    let a3 = finite("A3", a3)?;

    let cross: f64 = (0..ctx.rrhs.len()).filter(|&n| n != m).map(weighted).sum();
    let a4 = finite("A4", if cross == 0.0 { 0.0 } else { (ln_front + cross.ln()).exp() })?;

    let inner = (-(p.eta1 * p.eta1 / (p.eta2 * p.eta2) + 0.5 * j[m] * j[m])).exp();
    let ci = c * inner;
    let a4_printed = if cross == 0.0 || ci == 0.0 {
        0.0
    } else {
        (c.ln() + ci - p.eta2.ln() - 0.5 * (2.0f64.ln() + ln_rho_c + ci.exp_m1().ln()) + cross.ln())
            .exp()
    };

    Ok(ConstraintTerms {
        a2,
        a3,
        a4,
        a4_printed,
    })
}

/// Analytic gradient of the cell-local Lagrangian with respect to the
/// coordinates of RRH `m`:
/// `(alpha/d0) [ (1 - A2 - A4)(x_m I - I_x) + A3 (x_m - x_cu) ]`.
pub fn lagrangian_gradient(ctx: &CellContext<'_>, m: usize, lambdas: &[f64]) -> Result<(f64, f64)> {
    let p = &ctx.model.params;
    let mom = ctx.a1_moments(m);
    let t = a2_a3_a4_terms(ctx, m, lambdas)?;
    let s = 1.0 - t.a2 - t.a4;
    let k = p.pathloss_exponent / p.ref_distance;
    let r = ctx.rrhs[m];
    Ok((
        k * (s * (r.x * mom.mass - mom.x) + t.a3 * (r.x - ctx.cu.x)),
        k * (s * (r.y * mom.mass - mom.y) + t.a3 * (r.y - ctx.cu.y)),
    ))
}
