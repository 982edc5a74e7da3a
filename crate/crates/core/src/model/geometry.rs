use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numerics::Rect;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    #[inline]
    pub fn dist(&self, other: &Point) -> f64 {
        let (dx, dy) = (self.x - other.x, self.y - other.y);
        (dx * dx + dy * dy).sqrt()
    }

    #[inline]
    pub fn dist_xy(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (self.x - x, self.y - y);
        (dx * dx + dy * dy).sqrt()
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Point {
        Point::new(self.x + dx, self.y + dy)
    }
}

/// Square grid of `side x side` rectangular cells, indexed row-major from the
/// origin corner. The grid wraps around on a torus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub side: usize,
    pub cell_w: f64,
    pub cell_h: f64,
}

impl Grid {
    pub fn new(side: usize, cell_w: f64, cell_h: f64) -> Self {
        Grid {
            side,
            cell_w,
            cell_h,
        }
    }

    pub fn num_cells(&self) -> usize {
        self.side * self.side
    }

    fn row_col(&self, q: usize) -> (usize, usize) {
        (q / self.side, q % self.side)
    }

    pub fn cell_rect(&self, q: usize) -> Rect {
        let (r, c) = self.row_col(q);
        let x0 = c as f64 * self.cell_w;
        let y0 = r as f64 * self.cell_h;
        Rect::new(x0, x0 + self.cell_w, y0, y0 + self.cell_h)
    }

    pub fn cell_center(&self, q: usize) -> Point {
        let (x, y) = self.cell_rect(q).center();
        Point::new(x, y)
    }

    pub fn width(&self) -> f64 {
        self.side as f64 * self.cell_w
    }

    pub fn height(&self) -> f64 {
        self.side as f64 * self.cell_h
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    /// Which cell contains `p` (points on shared edges go to the higher index).
    pub fn cell_of(&self, p: Point) -> Option<usize> {
        if p.x < 0.0 || p.y < 0.0 || p.x > self.width() || p.y > self.height() {
            return None;
        }
        let c = ((p.x / self.cell_w) as usize).min(self.side - 1);
        let r = ((p.y / self.cell_h) as usize).min(self.side - 1);
        Some(r * self.side + c)
    }

    /// Translation to apply to cell `other` so that it becomes the torus
    /// image nearest to cell `center`. Index offsets are folded into
    /// `[-side/2, side/2]`; on even grids the tie goes to the positive side.
    pub fn wrap_offset(&self, center: usize, other: usize) -> (f64, f64) {
        let (cr, cc) = self.row_col(center);
        let (or, oc) = self.row_col(other);
        let fold = |from: usize, to: usize| -> i64 {
            let s = self.side as i64;
            let raw = to as i64 - from as i64;
            let mut d = raw.rem_euclid(s);
            if 2 * d > s {
                d -= s;
            }
            d - raw
        };
        (
            fold(cc, oc) as f64 * self.cell_w,
            fold(cr, or) as f64 * self.cell_h,
        )
    }

    /// Offsets for every cell relative to `center` (zero for `center`).
    pub fn wrap_offsets(&self, center: usize) -> Vec<(f64, f64)> {
        (0..self.num_cells())
            .map(|o| self.wrap_offset(center, o))
            .collect()
    }
}

/// RRH coordinates per cell plus the CU of each cell (the cell center).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub rrh: Vec<Vec<Point>>,
    pub cu: Vec<Point>,
}

impl Layout {
    /// Uniformly random RRHs inside each cell.
    pub fn random<R: Rng>(grid: &Grid, rrhs_per_cell: usize, rng: &mut R) -> Self {
        let q = grid.num_cells();
        let rrh = (0..q)
            .map(|c| {
                let r = grid.cell_rect(c);
                (0..rrhs_per_cell)
                    .map(|_| {
                        Point::new(
                            rng.random_range(r.x0..r.x1),
                            rng.random_range(r.y0..r.y1),
                        )
                    })
                    .collect()
            })
            .collect();
        Layout {
            rrh,
            cu: (0..q).map(|c| grid.cell_center(c)).collect(),
        }
    }

    /// All RRHs placed on their CU.
    pub fn colocated(grid: &Grid, rrhs_per_cell: usize) -> Self {
        let cu: Vec<Point> = (0..grid.num_cells()).map(|c| grid.cell_center(c)).collect();
        Layout {
            rrh: cu.iter().map(|&p| vec![p; rrhs_per_cell]).collect(),
            cu,
        }
    }

    pub fn num_cells(&self) -> usize {
        self.cu.len()
    }

    /// CU-RRH distance.
    pub fn cu_distance(&self, q: usize, n: usize) -> f64 {
        self.rrh[q][n].dist(&self.cu[q])
    }

    /// Checks that every RRH sits inside its cell.
    pub fn is_inside(&self, grid: &Grid) -> bool {
        self.rrh.iter().enumerate().all(|(q, cell)| {
            let r = grid.cell_rect(q);
            cell.iter().all(|p| r.contains(p.x, p.y))
        })
    }
}

/// Copy of `layout` with every cell moved to its torus image nearest to cell
/// `center`; cell `center` itself stays in place. All distances seen from
/// inside `center` are then plain Euclidean distances.
pub fn wrap_shift(layout: &Layout, center: usize, grid: &Grid) -> Layout {
    let offsets = grid.wrap_offsets(center);
    Layout {
        rrh: layout
            .rrh
            .iter()
            .zip(&offsets)
            .map(|(cell, &(dx, dy))| cell.iter().map(|p| p.translated(dx, dy)).collect())
            .collect(),
        cu: layout
            .cu
            .iter()
            .zip(&offsets)
            .map(|(p, &(dx, dy))| p.translated(dx, dy))
            .collect(),
    }
}
