//! Integration nodes of one cell for a given set of serving RRHs.
//!
//! The serving gain `(1 + d/d0)^-alpha` is sharply peaked at every RRH of the
//! cell, so a fixed tensor grid would reward RRHs for sitting on its nodes.
//! The cell integral is therefore split with a partition of unity. Around
//! each RRH `n` a bump `w_n` (flat at the RRH, zero beyond `radius`)
//! times that RRH's share of the serving gain `s_n = l_n / sum_k l_k` is
//! integrated on a polar grid centred on the RRH, graded logarithmically in
//! the radius and clipped to the cell along every ray. The remainder
//! `1 - sum_n w_n s_n` vanishes at each RRH and goes to the tensor grid.

use super::AccessModel;
use crate::access::IciCache;
use crate::model::{Layout, Point};
use crate::numerics::{gauss_legendre, Rect};

/// Fewest angular nodes on one arc between kinks.
const MIN_ARC_ORDER: usize = 4;

/// Shape of the polar rule placed around each RRH.
#[derive(Debug, Clone, PartialEq)]
pub struct NearFieldRule {
    /// Partition radius, meters.
    pub radius: f64,
    /// Innermost radius integrated on a plain linear rule, meters.
    pub core: f64,
    angular: usize,
    core_order: usize,
    log_order: usize,
    outer_order: usize,
    /// Gauss-Legendre rules indexed by order, up to the largest one used.
    gl: Vec<(Vec<f64>, Vec<f64>)>,
}

impl NearFieldRule {
    /// Radius of eight mean tensor-node spacings, capped at half the cell.
    pub fn for_cell(rect: &Rect, tensor_order: usize) -> Self {
        let span = rect.width().max(rect.height());
        let radius = (8.0 * span / tensor_order as f64).min(0.5 * rect.width().min(rect.height()));
        NearFieldRule::new(radius, 1.0, 24, 4, 8, 6)
    }

    pub fn new(
        radius: f64,
        core: f64,
        angular: usize,
        core_order: usize,
        log_order: usize,
        outer_order: usize,
    ) -> Self {
        let top = angular.max(core_order).max(log_order).max(outer_order).max(MIN_ARC_ORDER);
        NearFieldRule {
            radius,
            core,
            angular,
            core_order,
            log_order,
            outer_order,
            gl: (0..=top).map(|n| if n == 0 { (vec![], vec![]) } else { gauss_legendre(n) }).collect(),
        }
    }

    fn gl(&self, order: usize) -> (&[f64], &[f64]) {
        let (t, w) = &self.gl[order];
        (t, w)
    }

    /// Radial nodes and weights on `[0, r]`, Jacobian `d` included.
    fn radial(&self, r: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.core_order + self.log_order + self.outer_order);
        let linear = |a: f64, b: f64, order: usize, out: &mut Vec<(f64, f64)>| {
            let (t, w) = self.gl(order);
            let h = 0.5 * (b - a);
            for (ti, wi) in t.iter().zip(w) {
                let d = a + h * (ti + 1.0);
                out.push((d, wi * h * d));
            }
        };
        if r <= self.core {
            linear(0.0, r, self.core_order, &mut out);
            return out;
        }
        linear(0.0, self.core, self.core_order, &mut out);
        let b = (0.25 * r).max(self.core);
        if b > self.core {
            // d = core * (b/core)^s, s in [0, 1]
            let (t, w) = self.gl(self.log_order);
            let span = (b / self.core).ln();
            for (ti, wi) in t.iter().zip(w) {
                let s = 0.5 * (ti + 1.0);
                let d = self.core * (s * span).exp();
                out.push((d, 0.5 * wi * d * span * d));
            }
        }
        linear(b, r, self.outer_order, &mut out);
        out
    }

    /// Polar nodes around `center`, clipped to `rect`: `(point, weight)`.
    ///
    /// The clipped reach `min(radius, exit distance)` has kinks at the
    /// corner directions and where the circle crosses a side, so the angle
    /// range is split there and each arc gets its own Gauss-Legendre rule.
    pub fn nodes(&self, center: Point, rect: &Rect) -> Vec<(Point, f64)> {
        use std::f64::consts::TAU;
        let mut cuts = vec![0.0, TAU];
        let mut angle = |dx: f64, dy: f64| cuts.push(dy.atan2(dx).rem_euclid(TAU));
        for (x, y) in [(rect.x0, rect.y0), (rect.x1, rect.y0), (rect.x0, rect.y1), (rect.x1, rect.y1)] {
            angle(x - center.x, y - center.y);
        }
        let r = self.radius;
        for x in [rect.x0, rect.x1] {
            let h = x - center.x;
            if h.abs() < r {
                let v = (r * r - h * h).sqrt();
                angle(h, v);
                angle(h, -v);
            }
        }
        for y in [rect.y0, rect.y1] {
            let h = y - center.y;
            if h.abs() < r {
                let v = (r * r - h * h).sqrt();
                angle(v, h);
                angle(-v, h);
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

        let mut out = Vec::new();
        let push_ray = |theta: f64, weight: f64, out: &mut Vec<(Point, f64)>| {
            let (s, c) = theta.sin_cos();
            let reach = ray_exit(center, c, s, rect).min(r);
            if reach > 0.0 {
                for (d, wr) in self.radial(reach) {
                    out.push((Point::new(center.x + d * c, center.y + d * s), wr * weight));
                }
            }
        };
        for arc in cuts.windows(2) {
            let (t0, t1) = (arc[0], arc[1]);
            let order = ((self.angular as f64 * (t1 - t0) / TAU).ceil() as usize).clamp(MIN_ARC_ORDER, self.angular.max(MIN_ARC_ORDER));
            let (t, w) = self.gl(order);
            let mid = 0.5 * (t0 + t1);
            let (sm, cm) = mid.sin_cos();
            match exit_side(center, cm, sm, rect, r) {
                // rays end on the circle: plain rule in the angle
                None => {
                    let h = 0.5 * (t1 - t0);
                    for (ti, wi) in t.iter().zip(w) {
                        push_ray(t0 + h * (ti + 1.0), wi * h, &mut out);
                    }
                }
                // rays end on a side at normal offset `h`: integrate over
                // the position `s` along it, d(theta)/ds = h / (h^2 + s^2)
                Some((vertical, h)) => {
                    let along = |theta: f64| {
                        let (st, ct) = theta.sin_cos();
                        if vertical {
                            h * st / ct
                        } else {
                            h * ct / st
                        }
                    };
                    let (s0, s1) = (along(t0), along(t1));
                    let half = 0.5 * (s1 - s0);
                    for (ti, wi) in t.iter().zip(w) {
                        let sv = s0 + half * (ti + 1.0);
                        let theta = if vertical {
                            sv.atan2(h)
                        } else {
                            h.atan2(sv)
                        };
                        let jac = h.abs() / (h * h + sv * sv);
                        push_ray(theta.rem_euclid(TAU), wi * half.abs() * jac, &mut out);
                    }
                }
            }
        }
        out
    }

    /// Bump weight at distance `d` from the RRH: a C-infinity step from one
    /// at the RRH (flat to all orders there) down to zero at `radius`.
    pub fn bump(&self, d: f64) -> f64 {
        let u = d / self.radius;
        if u <= 0.0 {
            1.0
        } else if u >= 1.0 {
            0.0
        } else {
            let rise = |v: f64| (-1.0 / v).exp();
            let (a, b) = (rise(1.0 - u), rise(u));
            a / (a + b)
        }
    }
}

/// Side of `rect` hit first along direction `(c, s)` when that happens
/// within `r`: whether it is vertical, and its signed offset from `p`.
fn exit_side(p: Point, c: f64, s: f64, rect: &Rect, r: f64) -> Option<(bool, f64)> {
    let tx = if c > 0.0 {
        Some((rect.x1 - p.x, (rect.x1 - p.x) / c))
    } else if c < 0.0 {
        Some((rect.x0 - p.x, (rect.x0 - p.x) / c))
    } else {
        None
    };
    let ty = if s > 0.0 {
        Some((rect.y1 - p.y, (rect.y1 - p.y) / s))
    } else if s < 0.0 {
        Some((rect.y0 - p.y, (rect.y0 - p.y) / s))
    } else {
        None
    };
    let best = match (tx, ty) {
        (Some(x), Some(y)) if x.1 <= y.1 => Some((true, x)),
        (Some(_), Some(y)) => Some((false, y)),
        (Some(x), None) => Some((true, x)),
        (None, Some(y)) => Some((false, y)),
        (None, None) => None,
    };
    best.filter(|(_, (h, dist))| *dist < r && *h != 0.0)
        .map(|(vertical, (h, _))| (vertical, h))
}

/// Distance from `p` along direction `(c, s)` to the boundary of `rect`.
fn ray_exit(p: Point, c: f64, s: f64, rect: &Rect) -> f64 {
    let along = |pos: f64, dir: f64, lo: f64, hi: f64| {
        if dir > 0.0 {
            (hi - pos) / dir
        } else if dir < 0.0 {
            (lo - pos) / dir
        } else {
            f64::INFINITY
        }
    };
    along(p.x, c, rect.x0, rect.x1)
        .min(along(p.y, s, rect.y0, rect.y1))
        .max(0.0)
}

/// Interfering RRHs of all other cells, wrap-shifted around cell `q`, with
/// their traffic-averaged beam weights.
#[derive(Debug, Clone, PartialEq)]
pub struct IciField {
    sources: Vec<(Point, f64)>,
}

impl IciField {
    pub fn new(model: &AccessModel, q: usize, layout: &Layout, cache: &IciCache) -> Self {
        let mut sources = Vec::new();
        for other in 0..model.num_cells() {
            if other == q {
                continue;
            }
            let (dx, dy) = model.grid.wrap_offset(q, other);
            for (r, &w) in layout.rrh[other].iter().zip(cache.weights(other)) {
                sources.push((r.translated(dx, dy), w));
            }
        }
        IciField { sources }
    }

    pub fn inv_gamma(&self, model: &AccessModel, p: Point) -> f64 {
        let k = model.params.users_per_cell as f64;
        let ici: f64 = self
            .sources
            .iter()
            .map(|(r, w)| model.params.pathloss(r.dist(&p)) * w)
            .sum();
        1.0 / model.gamma_from_ici(k * ici)
    }
}

/// Quadrature points of a block with their base mass (weight times traffic
/// density) and `1/gamma`.
#[derive(Debug, Clone, PartialEq)]
struct Block {
    points: Vec<Point>,
    base: Vec<f64>,
    inv_gamma: Vec<f64>,
    /// `Some(n)` for the polar block of RRH `n`.
    owner: Option<usize>,
}

/// Node set of cell `q`: the tensor block plus one polar block per RRH,
/// with the partition already folded into `mass`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellNodes {
    pub q: usize,
    pub rrhs: Vec<Point>,
    rule: NearFieldRule,
    rect: Rect,
    field: IciField,
    blocks: Vec<Block>,
    /// Per block: `gains[b][n][j]` and `bumps[b][n][j]`.
    gains: Vec<Vec<Vec<f64>>>,
    bumps: Vec<Vec<Vec<f64>>>,
    /// Per block: serving gain sum and effective mass.
    serving: Vec<Vec<f64>>,
    mass: Vec<Vec<f64>>,
}

impl CellNodes {
    pub fn new(model: &AccessModel, q: usize, rrhs: Vec<Point>, field: IciField) -> Self {
        let rect = model.grid.cell_rect(q);
        let rule = model.near_field[q].clone();
        let tensor = Block {
            points: (0..model.rules[q].len()).map(|i| model.node(q, i)).collect(),
            base: model.mass[q].clone(),
            inv_gamma: (0..model.rules[q].len())
                .map(|i| field.inv_gamma(model, model.node(q, i)))
                .collect(),
            owner: None,
        };
        let mut nodes = CellNodes {
            q,
            rrhs: Vec::new(),
            rule,
            rect,
            field,
            blocks: vec![tensor],
            gains: Vec::new(),
            bumps: Vec::new(),
            serving: Vec::new(),
            mass: Vec::new(),
        };
        for (n, &r) in rrhs.iter().enumerate() {
            let block = nodes.polar_block(model, n, r);
            nodes.blocks.push(block);
        }
        nodes.rrhs = rrhs;
        nodes.refresh(model);
        nodes
    }

    /// Builds the node set from a full layout (cell `q`'s RRHs are taken
    /// from the layout).
    pub fn from_layout(model: &AccessModel, q: usize, layout: &Layout, cache: &IciCache) -> Self {
        Self::new(model, q, layout.rrh[q].clone(), IciField::new(model, q, layout, cache))
    }

    fn polar_block(&self, model: &AccessModel, n: usize, center: Point) -> Block {
        let nodes = self.rule.nodes(center, &self.rect);
        let mut block = Block {
            points: Vec::with_capacity(nodes.len()),
            base: Vec::with_capacity(nodes.len()),
            inv_gamma: Vec::with_capacity(nodes.len()),
            owner: Some(n),
        };
        for (p, w) in nodes {
            block.points.push(p);
            block.base.push(w * model.traffic.pdf(self.q, p.x, p.y));
            block.inv_gamma.push(self.field.inv_gamma(model, p));
        }
        block
    }

    /// Path gain and bump of RRH `n` at every node of block `b`.
    fn rows(&self, model: &AccessModel, b: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
        let r = self.rrhs[n];
        self.blocks[b]
            .points
            .iter()
            .map(|p| {
                let d = r.dist(p);
                (model.params.pathloss(d), self.rule.bump(d))
            })
            .unzip()
    }

    fn refresh(&mut self, model: &AccessModel) {
        self.gains.clear();
        self.bumps.clear();
        for b in 0..self.blocks.len() {
            let (g, w): (Vec<_>, Vec<_>) = (0..self.rrhs.len()).map(|n| self.rows(model, b, n)).unzip();
            self.gains.push(g);
            self.bumps.push(w);
        }
        self.combine();
    }

    /// Serving gains and partitioned masses from the cached rows.
    fn combine(&mut self) {
        let n_rrh = self.rrhs.len();
        self.serving.resize(self.blocks.len(), Vec::new());
        self.mass.resize(self.blocks.len(), Vec::new());
        for (bi, b) in self.blocks.iter().enumerate() {
            let (g, w) = (&self.gains[bi], &self.bumps[bi]);
            let serving = &mut self.serving[bi];
            let mass = &mut self.mass[bi];
            serving.clear();
            mass.clear();
            for j in 0..b.points.len() {
                let total: f64 = g.iter().map(|gn| gn[j]).sum();
                serving.push(total);
                let share = |n: usize| {
                    if total > 0.0 {
                        g[n][j] / total
                    } else {
                        1.0 / n_rrh as f64
                    }
                };
                let factor = match b.owner {
                    None => 1.0 - (0..n_rrh).map(|n| w[n][j] * share(n)).sum::<f64>(),
                    Some(n) => w[n][j] * share(n),
                };
                mass.push(b.base[j] * factor);
            }
        }
    }

    /// Moves RRH `m`, rebuilding its polar block and its rows elsewhere.
    pub fn set_rrh(&mut self, model: &AccessModel, m: usize, p: Point) {
        self.rrhs[m] = p;
        let own = m + 1;
        self.blocks[own] = self.polar_block(model, m, p);
        for b in 0..self.blocks.len() {
            if b == own {
                let (g, w): (Vec<_>, Vec<_>) = (0..self.rrhs.len()).map(|n| self.rows(model, b, n)).unzip();
                self.gains[b] = g;
                self.bumps[b] = w;
            } else {
                let (g, w) = self.rows(model, b, m);
                self.gains[b][m] = g;
                self.bumps[b][m] = w;
            }
        }
        self.combine();
    }

    /// Iterates `(point, mass, 1/gamma, serving gain)` over every node.
    pub fn iter(&self) -> impl Iterator<Item = (Point, f64, f64, f64)> + '_ {
        self.blocks.iter().enumerate().flat_map(move |(bi, b)| {
            (0..b.points.len()).map(move |j| {
                (b.points[j], self.mass[bi][j], b.inv_gamma[j], self.serving[bi][j])
            })
        })
    }

    pub fn len(&self) -> usize {
        self.blocks.iter().map(|b| b.points.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `int g f` over the cell.
    pub fn integrate<G: FnMut(Point, f64, f64) -> f64>(&self, mut g: G) -> f64 {
        self.iter().map(|(p, m, ig, s)| m * g(p, ig, s)).sum()
    }

    /// Traffic-averaged rate lower bound, nats/s/Hz.
    pub fn expected_rate(&self) -> f64 {
        self.integrate(|_, ig, s| super::rate_from_parts(ig, s))
    }

    pub fn field(&self) -> &IciField {
        &self.field
    }
}
