//! Computational grids on `(0, x_max]` with attached quadrature weights.
//!
//! Densities in this crate live on grids that are log-graded near the
//! absorbing origin (where Gibbs densities can blow up like `1/x`) and
//! uniform in the bulk.  Quadrature weights come from a composite
//! Simpson rule on irregularly spaced nodes, so smooth integrands are
//! integrated with fourth-order accuracy.

use crate::error::{Error, Result};

/// Composite Simpson weights for strictly increasing, irregularly
/// spaced nodes.  Interval pairs get the exact-for-quadratics two-panel
/// rule; a leftover final interval gets the quadratic end-correction
/// through the last three nodes.
pub fn simpson_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    assert!(n >= 3, "need at least 3 nodes for Simpson weights");
    let mut w = vec![0.0; n];
    let mut i = 0;
    while i + 2 < n {
        let h0 = nodes[i + 1] - nodes[i];
        let h1 = nodes[i + 2] - nodes[i + 1];
        let s = h0 + h1;
        w[i] += s * (2.0 * h0 - h1) / (6.0 * h0);
        w[i + 1] += s * s * s / (6.0 * h0 * h1);
        w[i + 2] += s * (2.0 * h1 - h0) / (6.0 * h1);
        i += 2;
    }
    if i + 1 < n {
        // One interval left: integrate it with the quadratic through the
        // last three nodes (exact for quadratics, like the paired rule).
        let h0 = nodes[n - 2] - nodes[n - 3];
        let h1 = nodes[n - 1] - nodes[n - 2];
        w[n - 3] += -h1 * h1 * h1 / (6.0 * h0 * (h0 + h1));
        w[n - 2] += h1 * h1 / (6.0 * h0) + 0.5 * h1;
        w[n - 1] += (h1 * h1 / 3.0 + h0 * h1 / 2.0) / (h0 + h1);
    }
    w
}

/// A quadrature grid: strictly increasing positive nodes plus weights.
#[derive(Debug, Clone)]
pub struct Grid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    /// Grid from explicit nodes (strictly increasing, first node
    /// `>= 1e-12` so that `1/x`-type integrands stay representable).
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Grid> {
        if nodes.len() < 8 {
            return Err(Error::InvalidArgument("grid needs at least 8 nodes".into()));
        }
        if nodes[0] < 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "grid must start at x >= 1e-12 (got {:e})",
                nodes[0]
            )));
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "grid nodes must be strictly increasing".into(),
            ));
        }
        let weights = simpson_weights(&nodes);
        Ok(Grid { nodes, weights })
    }

    /// Log-graded nodes on `[x_lo, x_break]` followed by uniform nodes on
    /// `[x_break, x_max]`, `n` nodes in total with ~40% in the log section.
    pub fn graded(x_lo: f64, x_break: f64, x_max: f64, n: usize) -> Result<Grid> {
        if !(x_lo > 0.0 && x_lo < x_break && x_break < x_max) {
            return Err(Error::InvalidArgument(format!(
                "graded grid needs 0 < x_lo < x_break < x_max (got {x_lo:e}, {x_break:e}, {x_max:e})"
            )));
        }
        if n < 64 {
            return Err(Error::InvalidArgument("graded grid needs n >= 64".into()));
        }
        let intervals = n - 1;
        let m = ((intervals as f64) * 0.4).round().max(8.0) as usize; // log section
        let p = intervals - m; // uniform section
        let ratio = (x_break / x_lo).ln() / m as f64;
        let mut nodes = Vec::with_capacity(n);
        for i in 0..m {
            nodes.push(x_lo * (ratio * i as f64).exp());
        }
        let h = (x_max - x_break) / p as f64;
        for j in 0..=p {
            nodes.push(x_break + h * j as f64);
        }
        Grid::from_nodes(nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn x_lo(&self) -> f64 {
        self.nodes[0]
    }

    pub fn x_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Quadrature of pointwise `values` against the grid weights.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.nodes.len());
        self.weights
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum()
    }
}
