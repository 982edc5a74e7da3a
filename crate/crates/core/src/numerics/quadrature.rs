use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]` in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    /// Closed containment test with a small absolute slack.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        const SLACK: f64 = 1e-9;
        x >= self.x0 - SLACK && x <= self.x1 + SLACK && y >= self.y0 - SLACK && y <= self.y1 + SLACK
    }

    pub fn clamp(&self, x: f64, y: f64) -> (f64, f64) {
        (x.clamp(self.x0, self.x1), y.clamp(self.y0, self.y1))
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "quadrature order must be positive");
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, refined by Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_n(x), p0 = P_{n-1}(x)
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Tensor-product Gauss-Legendre rule over a rectangle.
///
/// Node `i * order + j` sits at `(x_i, y_j)`; its weight already includes the
/// Jacobian, so the weights sum to the rectangle area.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes_x: Vec<f64>,
    pub nodes_y: Vec<f64>,
    pub weights: Vec<f64>,
    pub order: usize,
    pub rect: Rect,
}

impl QuadratureRule {
    pub fn new(order: usize, rect: Rect) -> Self {
        let (t, w) = gauss_legendre(order);
        let hx = 0.5 * rect.width();
        let hy = 0.5 * rect.height();
        let (cx, cy) = rect.center();
        let n = order * order;
        let mut nodes_x = Vec::with_capacity(n);
        let mut nodes_y = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..order {
            for j in 0..order {
                nodes_x.push(cx + hx * t[i]);
                nodes_y.push(cy + hy * t[j]);
                weights.push(w[i] * w[j] * hx * hy);
            }
        }
        QuadratureRule {
            nodes_x,
            nodes_y,
            weights,
            order,
            rect,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Iterator over `(x, y, weight)` triples.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.nodes_x
            .iter()
            .zip(&self.nodes_y)
            .zip(&self.weights)
            .map(|((&x, &y), &w)| (x, y, w))
    }
}

/// Integrates `f` over the rule's rectangle. A non-finite evaluation at any
/// node is an error.
pub fn integrate_2d<F>(f: F, rule: &QuadratureRule) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
{
    let mut sum = 0.0;
    for (x, y, w) in rule.iter() {
        let v = f(x, y);
        if !v.is_finite() {
            return Err(Error::non_finite(format!(
                "integrand at quadrature node ({x}, {y})"
            )));
        }
        sum += w * v;
    }
    Ok(sum)
}
