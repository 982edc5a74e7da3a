//! RRH placement: the direct Lagrangian fixed-point scheme and the
//! distance-constrained scheme, driven by a cell-by-cell outer loop.

mod terms;
mod updates;

pub use terms::{a1_term, a2_a3_a4_terms, lagrangian_gradient, A1Moments, CellContext, ConstraintTerms};
pub use updates::{
    lambda_bisect, update_lambda, direct_position, update_xy_direct, update_xy_distance, DirectStep,
    DISTANCE_TOL, LAMBDA_DOUBLING_CAP,
};

use serde::{Deserialize, Serialize};

use crate::access::{AccessModel, IciCache};
use crate::backhaul::{max_backhaul_distance, BackhaulLimit};
use crate::error::{Error, Result};
use crate::model::{Layout, Point};
use crate::rng;

const SAFEGUARD_HALVINGS: usize = 8;
/// Growth factor and cap of the per-RRH step multiplier.
const ACCEL_GROWTH: f64 = 1.5;
const ACCEL_MAX: f64 = 64.0;
const MIN_D_OUT_RELAX: f64 = 1.0 / 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Direct,
    Distance,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "direct" => Ok(Mode::Direct),
            "distance" => Ok(Mode::Distance),
            other => Err(format!("unknown mode `{other}` (expected direct or distance)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerParams {
    pub mode: Mode,
    /// Outer loop stops once no RRH moved by this much (meters).
    pub d_cvg: f64,
    /// Dual step size of the direct scheme.
    pub nu: f64,
    pub max_outer_iters: usize,
    pub quadrature_order: usize,
    /// Freeze every multiplier at zero.
    pub no_constraint: bool,
    /// Lower clamp on user-RRH and CU-RRH distances, meters.
    pub min_distance: f64,
    /// Best-of-R random initializations.
    pub restarts: usize,
    /// Allowed outage overshoot before a run counts as converged.
    pub feasibility_tol: f64,
    /// Objective tolerance (nats) behind the move-halving safeguard, which
    /// triggers on a Lagrangian increase above ten times this value.
    pub objective_tol: f64,
    pub record_trajectory: bool,
}

impl Default for OptimizerParams {
    fn default() -> Self {
        OptimizerParams {
            mode: Mode::Direct,
            d_cvg: 1.0,
            nu: 1.0,
            max_outer_iters: 500,
            quadrature_order: 32,
            no_constraint: false,
            min_distance: 1.0,
            restarts: 1,
            feasibility_tol: 1e-3,
            objective_tol: 1e-7,
            record_trajectory: true,
        }
    }
}

impl OptimizerParams {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.d_cvg) {
            return Err(Error::config("optimizer.d_cvg", "must be positive"));
        }
        if !pos(self.nu) {
            return Err(Error::config("optimizer.nu", "must be positive"));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::config("optimizer.max_outer_iters", "must be at least 1"));
        }
        if self.quadrature_order == 0 {
            return Err(Error::config("optimizer.quadrature_order", "must be at least 1"));
        }
        if !pos(self.min_distance) {
            return Err(Error::config("optimizer.min_distance", "must be positive"));
        }
        if self.restarts == 0 {
            return Err(Error::config("optimizer.restarts", "must be at least 1"));
        }
        if !(self.feasibility_tol >= 0.0) {
            return Err(Error::config("optimizer.feasibility_tol", "must be nonnegative"));
        }
        if !(self.objective_tol >= 0.0) {
            return Err(Error::config("optimizer.objective_tol", "must be nonnegative"));
        }
        Ok(())
    }
}

/// Mutable state of the outer loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptState {
    pub layout: Layout,
    pub lambdas: Vec<Vec<f64>>,
    /// Dual step per cell (halved on each fallback in that cell).
    pub nu: Vec<f64>,
    pub d_cvg: f64,
    pub mode: Mode,
    pub d_max_trace: Vec<f64>,
    /// Network mean access rate after each outer iteration, nats/s/Hz.
    pub objective_trace: Vec<f64>,
    /// Maximum CU distance used at the last visit of each cell (distance
    /// mode).
    pub d_out: Vec<Option<f64>>,
    /// Relaxation factor applied to each cell's `d_out` refresh; halved
    /// whenever the refresh changes direction, doubled when it keeps it.
    pub d_out_relax: Vec<f64>,
    d_out_last_change: Vec<f64>,
    /// Step multiplier of each RRH's move.
    pub accel: Vec<Vec<f64>>,
    last_step: Vec<Vec<(f64, f64)>>,
}

impl OptState {
    pub fn new(layout: Layout, params: &OptimizerParams) -> Self {
        let q = layout.num_cells();
        let n = layout.rrh.first().map_or(0, Vec::len);
        OptState {
            layout,
            lambdas: vec![vec![0.0; n]; q],
            nu: vec![params.nu; q],
            d_cvg: params.d_cvg,
            mode: params.mode,
            d_max_trace: Vec::new(),
            objective_trace: Vec::new(),
            d_out: vec![None; q],
            d_out_relax: vec![1.0; q],
            d_out_last_change: vec![0.0; q],
            accel: vec![vec![1.0; n]; q],
            last_step: vec![vec![(0.0, 0.0); n]; q],
        }
    }
}

impl OptState {
    /// Moves cell `q`'s distance limit toward `target` by the cell's
    /// relaxation factor, halving the factor when the direction flips and
    /// doubling it (up to one) when it holds.
    fn relax_d_out(&mut self, q: usize, target: f64) -> f64 {
        let Some(prev) = self.d_out[q] else {
            return target;
        };
        let change = target - prev;
        let turn = change * self.d_out_last_change[q];
        if turn < 0.0 {
            self.d_out_relax[q] = (0.5 * self.d_out_relax[q]).max(MIN_D_OUT_RELAX);
        } else if turn > 0.0 {
            self.d_out_relax[q] = (2.0 * self.d_out_relax[q]).min(1.0);
        }
        self.d_out_last_change[q] = change;
        prev + self.d_out_relax[q] * change
    }
}

impl OptState {
    /// Stretches the plain move `old -> pos` of RRH `m` in cell `q` by its
    /// multiplier, which grows while consecutive moves point the same way and
    /// halves when they reverse.
    fn stretched(&mut self, q: usize, m: usize, old: Point, pos: Point) -> Option<Point> {
        let step = (pos.x - old.x, pos.y - old.y);
        let prev = self.last_step[q][m];
        let dot = step.0 * prev.0 + step.1 * prev.1;
        let beta = &mut self.accel[q][m];
        if dot > 0.0 {
            *beta = (*beta * ACCEL_GROWTH).min(ACCEL_MAX);
        } else if dot < 0.0 {
            *beta = (*beta * 0.5).max(1.0);
        }
        (*beta > 1.0).then(|| Point::new(old.x + *beta * step.0, old.y + *beta * step.1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub iteration: usize,
    pub cell: usize,
    pub rrh: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOutcome {
    pub state: OptState,
    pub converged: bool,
    pub iterations: usize,
    /// Direct updates skipped because of a nonpositive denominator.
    pub fallback_count: usize,
    /// Moves halved by the safeguard.
    pub safeguard_count: usize,
    /// Direct updates where the printed cross term differed from the chain
    /// rule value by more than 1e-6 relative.
    pub a4_printed_mismatch_count: usize,
    /// Largest relative gap seen between the two cross-term forms.
    pub a4_printed_max_rel_gap: f64,
    /// Initial layout (iteration 0) followed by the layout after every
    /// outer iteration, when recording is on.
    pub trajectory: Vec<TrajectoryRow>,
}

impl OptimizeOutcome {
    /// Final network-mean rate, nats/s/Hz.
    pub fn objective(&self) -> f64 {
        self.state.objective_trace.last().copied().unwrap_or(f64::NAN)
    }
}

/// Uniform random initial layout for `seed`.
pub fn initial_layout(model: &AccessModel, seed: u64) -> Layout {
    restart_layout(model, seed, 0)
}

/// Initial layout of restart `r`; restart 0 is [`initial_layout`].
pub fn restart_layout(model: &AccessModel, seed: u64, r: usize) -> Layout {
    let mut rng = rng::stream(seed, rng::layout_stream(r));
    Layout::random(&model.grid, model.params.rrhs_per_cell, &mut rng)
}

fn push_trajectory(rows: &mut Vec<TrajectoryRow>, iteration: usize, layout: &Layout) {
    for (q, cell) in layout.rrh.iter().enumerate() {
        for (n, p) in cell.iter().enumerate() {
            rows.push(TrajectoryRow {
                iteration,
                cell: q,
                rrh: n,
                x: p.x,
                y: p.y,
            });
        }
    }
}

/// Runs the outer loop from `layout` until the largest per-iteration move
/// drops below `d_cvg` (and, for constrained runs, every link meets its
/// budget within `feasibility_tol`), or the iteration cap is hit.
pub fn optimize(model: &AccessModel, layout: Layout, params: &OptimizerParams) -> Result<OptimizeOutcome> {
    params.validate()?;
    let np = &model.params;
    let num_cells = model.num_cells();
    if layout.num_cells() != num_cells {
        return Err(Error::config("layout", "cell count does not match the network"));
    }
    let search_limit = np.grid().diagonal();
    let constrained = !params.no_constraint;
    let eps = np.outage_budget;

    let mut state = OptState::new(layout, params);
    let mut cache = IciCache::new(model, &state.layout);
    let mut out = OptimizeOutcome {
        state: state.clone(),
        converged: false,
        iterations: 0,
        fallback_count: 0,
        safeguard_count: 0,
        a4_printed_mismatch_count: 0,
        a4_printed_max_rel_gap: 0.0,
        trajectory: Vec::new(),
    };
    if params.record_trajectory {
        push_trajectory(&mut out.trajectory, 0, &state.layout);
    }

    for iter in 1..=params.max_outer_iters {
        let mut d_max = 0.0f64;
        for q in 0..num_cells {
            let mut ctx = CellContext::new(model, q, &state.layout, &cache, params.min_distance);
            let n_rrh = ctx.rrhs.len();
            let d_out = if constrained && params.mode == Mode::Distance {
                match max_backhaul_distance(ctx.rate(), np, search_limit)? {
                    BackhaulLimit::Infeasible { outage_at_cu } => {
                        return Err(Error::Infeasible {
                            cell: q,
                            outage: outage_at_cu,
                            budget: eps,
                        })
                    }
                    lim => lim.distance().map(|target| state.relax_d_out(q, target)),
                }
            } else {
                None
            };
            state.d_out[q] = d_out;

            let mut d_q = 0.0f64;
            for m in 0..n_rrh {
                let old = ctx.rrhs[m];
                let new = match params.mode {
                    Mode::Distance => {
                        let (lam, pos) = match d_out {
                            Some(d) => lambda_bisect(&ctx, m, d)?,
                            None => (0.0, update_xy_distance(&ctx, m, 0.0, 1.0)),
                        };
                        state.lambdas[q][m] = lam;
                        let limit = d_out.unwrap_or(f64::INFINITY) + DISTANCE_TOL;
                        let zeros = vec![0.0; n_rrh];
                        let mut plain = safeguard(&ctx, m, old, pos, &zeros, params, &mut out.safeguard_count)?;
                        if plain.0.dist(&ctx.cu) > limit {
                            let mut c = ctx.clone();
                            c.set_rrh(m, pos);
                            let value = c.lagrangian(&zeros)?;
                            plain = (pos, c, value);
                        }
                        let far = state.stretched(q, m, old, plain.0).map(|p| {
                            let p = clamp_to_cell(model, q, p);
                            match d_out {
                                Some(d) if p.dist(&ctx.cu) > d => project_to_disc(ctx.cu, p, d),
                                _ => p,
                            }
                        });
                        let (at, moved) = accept_stretch(plain, m, far, &zeros, &mut state.accel[q][m])?;
                        ctx = moved;
                        at
                    }
                    Mode::Direct => {
                        let mut moved_ctx = None;
                        let lambdas = state.lambdas[q].clone();
                        let outage = if constrained { ctx.outage(m)? } else { eps };
                        let step = update_xy_direct(&ctx, m, &lambdas)?;
                        let pos = match step {
                            DirectStep::Moved { to, terms } => {
                                track_a4(&mut out, &terms);
                                let plain = safeguard(&ctx, m, old, to, &lambdas, params, &mut out.safeguard_count)?;
                                let far = state
                                    .stretched(q, m, old, plain.0)
                                    .map(|p| clamp_to_cell(model, q, p));
                                let (at, moved) = accept_stretch(plain, m, far, &lambdas, &mut state.accel[q][m])?;
                                moved_ctx = Some(moved);
                                at
                            }
                            DirectStep::Fallback { terms } => {
                                track_a4(&mut out, &terms);
                                out.fallback_count += 1;
                                state.nu[q] *= 0.5;
                                log::debug!("cell {q} RRH {m}: nonpositive update denominator, keeping position");
                                old
                            }
                        };
                        if constrained {
                            state.lambdas[q][m] =
                                update_lambda(lambdas[m], outage, state.nu[q], eps);
                        }
                        if let Some(moved) = moved_ctx {
                            ctx = moved;
                        }
                        pos
                    }
                };
                state.last_step[q][m] = (new.x - old.x, new.y - old.y);
                d_q = d_q.max((new.x - old.x).abs()).max((new.y - old.y).abs());
            }
            state.layout.rrh[q] = ctx.rrhs.clone();
            cache.refresh(q, model, &state.layout);
            d_max = d_max.max(d_q);
        }

        let rates = model.expected_rates(&state.layout, &cache);
        let objective = rates.iter().sum::<f64>() / rates.len() as f64;
        state.d_max_trace.push(d_max);
        state.objective_trace.push(objective);
        if params.record_trajectory {
            push_trajectory(&mut out.trajectory, iter, &state.layout);
        }
        out.iterations = iter;
        log::debug!("iteration {iter}: d_max {d_max:.4} m, objective {objective:.6} nats");

        if d_max < params.d_cvg
            && (!constrained || constraints_met(model, &state, &rates, params)?)
        {
            out.converged = true;
            break;
        }
    }
    if !out.converged {
        log::warn!(
            "placement did not converge within {} outer iterations",
            params.max_outer_iters
        );
    }
    out.state = state;
    Ok(out)
}

fn track_a4(out: &mut OptimizeOutcome, t: &ConstraintTerms) {
    let scale = t.a4.abs().max(t.a4_printed.abs());
    if scale == 0.0 {
        return;
    }
    let gap = (t.a4 - t.a4_printed).abs() / scale;
    out.a4_printed_max_rel_gap = out.a4_printed_max_rel_gap.max(gap);
    if gap > 1e-6 {
        out.a4_printed_mismatch_count += 1;
    }
}

/// Halves the move of RRH `m` while it raises the cell Lagrangian by more
/// than ten times the objective tolerance (at most `SAFEGUARD_HALVINGS`
/// times; the last halved move is kept). Returns the accepted point with the
/// context moved there and its Lagrangian.
fn safeguard<'a>(
    ctx: &CellContext<'a>,
    m: usize,
    old: Point,
    new: Point,
    lambdas: &[f64],
    params: &OptimizerParams,
    count: &mut usize,
) -> Result<(Point, CellContext<'a>, f64)> {
    let before = ctx.lagrangian(lambdas)?;
    let mut trial = ctx.clone();
    let mut cand = new;
    for _ in 0..SAFEGUARD_HALVINGS {
        trial.set_rrh(m, cand);
        let value = trial.lagrangian(lambdas)?;
        if value <= before + 10.0 * params.objective_tol {
            return Ok((cand, trial, value));
        }
        *count += 1;
        cand = Point::new(0.5 * (old.x + cand.x), 0.5 * (old.y + cand.y));
    }
    trial.set_rrh(m, cand);
    let value = trial.lagrangian(lambdas)?;
    Ok((cand, trial, value))
}

fn clamp_to_cell(model: &AccessModel, q: usize, p: Point) -> Point {
    let (x, y) = model.grid.cell_rect(q).clamp(p.x, p.y);
    Point::new(x, y)
}

fn project_to_disc(center: Point, p: Point, radius: f64) -> Point {
    let d = p.dist(&center);
    let s = radius / d;
    Point::new(center.x + s * (p.x - center.x), center.y + s * (p.y - center.y))
}

/// Keeps the stretched move when it does not raise the cell Lagrangian
/// above the plain move's value; otherwise resets the multiplier.
fn accept_stretch<'a>(
    plain: (Point, CellContext<'a>, f64),
    m: usize,
    far: Option<Point>,
    lambdas: &[f64],
    beta: &mut f64,
) -> Result<(Point, CellContext<'a>)> {
    let (at, ctx, value) = plain;
    let Some(far) = far else {
        return Ok((at, ctx));
    };
    let mut trial = ctx.clone();
    trial.set_rrh(m, far);
    if trial.lagrangian(lambdas)? <= value {
        Ok((far, trial))
    } else {
        *beta = 1.0;
        Ok((at, ctx))
    }
}

fn constraints_met(
    model: &AccessModel,
    state: &OptState,
    rates: &[f64],
    params: &OptimizerParams,
) -> Result<bool> {
    let np = &model.params;
    for (q, &rate) in rates.iter().enumerate() {
        for n in 0..state.layout.rrh[q].len() {
            let d = state.layout.cu_distance(q, n);
            if crate::backhaul::outage_prob(d, rate, np)? > np.outage_budget + params.feasibility_tol {
                return Ok(false);
            }
        }
        if params.mode == Mode::Distance {
            let lim = max_backhaul_distance(rate, np, np.grid().diagonal())?;
            let Some(d_out) = lim.distance() else {
                return Ok(false);
            };
            if state.layout.rrh[q].iter().any(|p| p.dist(&state.layout.cu[q]) > d_out + 1e-2) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests;
