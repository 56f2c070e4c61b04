//! Composite Gauss–Legendre quadrature on finite intervals.

use std::f64::consts::PI;

use crate::{Error, Result, C64};

/// Gauss–Legendre nodes and weights on [-1, 1].
fn legendre_rule(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let m = order.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(order, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(order, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(order: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=order {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = order as f64;
    let d = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A composite Gauss–Legendre rule on the unit interval.
///
/// The interval is split into `panels` equal pieces with an `order`-point
/// rule on each, so the total node count is `panels * order`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    panels: usize,
    order: usize,
}

impl GaussLegendre {
    pub fn composite(panels: usize, order: usize) -> Result<Self> {
        if panels == 0 || order == 0 {
            return Err(Error::InvalidParameter(
                "quadrature needs at least one panel and one node".into(),
            ));
        }
        let (ref_nodes, ref_weights) = legendre_rule(order);
        let h = 1.0 / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let a = p as f64 * h;
            for (x, w) in ref_nodes.iter().zip(&ref_weights) {
                nodes.push(a + 0.5 * h * (x + 1.0));
                weights.push(0.5 * h * w);
            }
        }
        Ok(Self {
            nodes,
            weights,
            panels,
            order,
        })
    }

    /// Rule with roughly `total` nodes, using 16-point panels.
    pub fn with_nodes(total: usize) -> Result<Self> {
        let order = 16.min(total.max(1));
        let panels = total.div_ceil(order).max(1);
        Self::composite(panels, order)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Same layout with twice as many panels.
    pub fn refined(&self) -> Self {
        Self::composite(2 * self.panels, self.order).expect("refining a valid rule")
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrates over [0, 1].
    pub fn integrate<F: FnMut(f64) -> C64>(&self, mut f: F) -> C64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| f(z) * w)
            .sum()
    }

    /// Integrates over [a, b] by affine mapping.
    pub fn integrate_over<F: FnMut(f64) -> C64>(&self, a: f64, b: f64, mut f: F) -> C64 {
        let h = b - a;
        self.integrate(|s| f(a + h * s)) * h
    }
}

impl Default for GaussLegendre {
    fn default() -> Self {
        Self::composite(4, 16).expect("default rule")
    }
}
