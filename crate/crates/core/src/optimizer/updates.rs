//! Single-RRH update rules of the two placement schemes.

use super::terms::{a2_a3_a4_terms, A1Moments, CellContext, ConstraintTerms};
use crate::error::{Error, Result};
use crate::model::Point;
use crate::numerics::bisect;

/// Doubling cap when bracketing the distance-mode multiplier.
pub const LAMBDA_DOUBLING_CAP: usize = 60;
/// Target accuracy of the post-update CU distance, meters.
pub const DISTANCE_TOL: f64 = 1e-3;

/// Projected dual ascent step `[lambda + nu (P - eps)]^+`.
pub fn update_lambda(lambda: f64, outage: f64, nu: f64, budget: f64) -> f64 {
    (lambda + nu * (outage - budget)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DirectStep {
    Moved { to: Point, terms: ConstraintTerms },
    /// The update denominator was not positive; the RRH stays put.
    Fallback { terms: ConstraintTerms },
}

/// Direct-method position update of RRH `m`, clamped to the cell.
pub fn update_xy_direct(ctx: &CellContext<'_>, m: usize, lambdas: &[f64]) -> Result<DirectStep> {
    let terms = a2_a3_a4_terms(ctx, m, lambdas)?;
    let mom = ctx.a1_moments(m);
    let Some(to) = direct_position(&mom, &terms, ctx.cu) else {
        return Ok(DirectStep::Fallback { terms });
    };
    if !(to.x.is_finite() && to.y.is_finite()) {
        return Err(Error::non_finite(format!(
            "direct update of cell {} RRH {m}",
            ctx.q
        )));
    }
    let (x, y) = ctx.model.grid.cell_rect(ctx.q).clamp(to.x, to.y);
    Ok(DirectStep::Moved {
        to: Point::new(x, y),
        terms,
    })
}

/// Unclamped direct update `[s I_x + A3 x_cu] / [s I + A3]` with
/// `s = 1 - A2 - A4`; `None` when the denominator is not positive.
pub fn direct_position(mom: &A1Moments, terms: &ConstraintTerms, cu: Point) -> Option<Point> {
    let s = 1.0 - terms.a2 - terms.a4;
    let den = s * mom.mass + terms.a3;
    if !(den > 0.0) || !den.is_finite() {
        return None;
    }
    Some(Point::new(
        (s * mom.x + terms.a3 * cu.x) / den,
        (s * mom.y + terms.a3 * cu.y) / den,
    ))
}

/// Distance-method position update of RRH `m` for a given multiplier.
pub fn update_xy_distance(ctx: &CellContext<'_>, m: usize, lambda: f64, d_out: f64) -> Point {
    let p = &ctx.model.params;
    let mom = ctx.a1_moments(m);
    distance_update(ctx, m, &mom, p.pathloss_exponent / p.ref_distance, lambda, d_out)
}

fn distance_update(
    ctx: &CellContext<'_>,
    m: usize,
    mom: &A1Moments,
    k: f64,
    lambda: f64,
    d_out: f64,
) -> Point {
    let t = lambda / (d_out * ctx.cu_distance(m).max(ctx.min_distance));
    let den = k * mom.mass + t;
    let x = (k * mom.x + t * ctx.cu.x) / den;
    let y = (k * mom.y + t * ctx.cu.y) / den;
    let (x, y) = ctx.model.grid.cell_rect(ctx.q).clamp(x, y);
    Point::new(x, y)
}

/// Smallest multiplier whose distance-mode update lands within `d_out` of
/// the CU, and that update.
pub fn lambda_bisect(ctx: &CellContext<'_>, m: usize, d_out: f64) -> Result<(f64, Point)> {
    if !(d_out > 0.0) {
        return Err(Error::Domain {
            func: "lambda_bisect",
            value: d_out,
        });
    }
    let p = &ctx.model.params;
    let k = p.pathloss_exponent / p.ref_distance;
    let mom = ctx.a1_moments(m);
    let at = |lam: f64| distance_update(ctx, m, &mom, k, lam, d_out);
    let free = at(0.0);
    if free.dist(&ctx.cu) <= d_out {
        return Ok((0.0, free));
    }
    // scale where the CU pull equals the A1 weight
    let mut hi = k * mom.mass * d_out * ctx.cu_distance(m).max(ctx.min_distance);
    if !(hi > 0.0 && hi.is_finite()) {
        hi = 1.0;
    }
    let mut doublings = 0;
    while at(hi).dist(&ctx.cu) > d_out {
        doublings += 1;
        if doublings > LAMBDA_DOUBLING_CAP {
            return Err(Error::IterationCap {
                what: "lambda bracket doubling",
                cap: LAMBDA_DOUBLING_CAP,
            });
        }
        hi *= 2.0;
    }
    let g = |u: f64| at(u * hi).dist(&ctx.cu) - d_out;
    let u = bisect(g, 0.0, 1.0, 1e-14)?;
    let lam = u * hi;
    Ok((lam, at(lam)))
}
