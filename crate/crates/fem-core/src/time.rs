//! Time grids with trapezoidal quadrature weights.
//!
//! Weights use the forward convention `α_j = (δt_j + δt_{j+1})/2` in the
//! interior and half steps at both ends, so they always sum to `T`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Spacing {
    Uniform,
    /// Explicit nodes; must start at 0 and be strictly increasing.
    Nodes(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl TimeGrid {
    pub fn new(t_final: f64, n: usize, spacing: Spacing) -> Result<Self> {
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::InvalidArgument(format!("final time must be positive, got {t_final}")));
        }
        if n < 2 {
            return Err(Error::InvalidArgument(format!("need at least two time nodes, got {n}")));
        }
        let nodes = match spacing {
            Spacing::Uniform => {
                let dt = t_final / (n - 1) as f64;
                let mut v: Vec<f64> = (0..n).map(|j| dt * j as f64).collect();
                v[n - 1] = t_final;
                v
            }
            Spacing::Nodes(v) => {
                if v.len() != n || v[0] != 0.0 || (v[n - 1] - t_final).abs() > 1e-12 * t_final {
                    return Err(Error::InvalidArgument("explicit nodes must run from 0 to T".into()));
                }
                v
            }
        };
        Self::from_nodes(nodes)
    }

    /// Grid from arbitrary strictly increasing nodes (the first need not be 0).
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidArgument("need at least two time nodes".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || nodes.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("time nodes must be finite and strictly increasing".into()));
        }
        let n = nodes.len();
        let mut weights = vec![0.0; n];
        for j in 1..n {
            let dt = nodes[j] - nodes[j - 1];
            weights[j - 1] += dt / 2.0;
            weights[j] += dt / 2.0;
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn t(&self, j: usize) -> f64 {
        self.nodes[j]
    }

    /// Quadrature weights α_j.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Step ending at node `j` (`j ≥ 1`, zero-based).
    pub fn dt(&self, j: usize) -> f64 {
        self.nodes[j] - self.nodes[j - 1]
    }

    pub fn steps(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn t_start(&self) -> f64 {
        self.nodes[0]
    }

    pub fn t_final(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn duration(&self) -> f64 {
        self.t_final() - self.t_start()
    }

    pub fn dt_min(&self) -> f64 {
        self.steps().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn dt_max(&self) -> f64 {
        self.steps().into_iter().fold(0.0, f64::max)
    }

    /// Ratio Δt/δt of the largest to the smallest step.
    pub fn zeta_ratio(&self) -> f64 {
        self.dt_max() / self.dt_min()
    }

    /// Sub-grid of nodes `start..start+len`.
    pub fn window(&self, start: usize, len: usize) -> Result<Self> {
        if len < 2 || start + len > self.len() {
            return Err(Error::InvalidArgument(format!("window {start}+{len} outside grid of {} nodes", self.len())));
        }
        Self::from_nodes(self.nodes[start..start + len].to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_three_nodes() {
        let g = TimeGrid::new(1.0, 3, Spacing::Uniform).unwrap();
        assert_eq!(g.weights(), &[0.25, 0.5, 0.25]);
    }

    #[test]
    fn uniform_five_nodes() {
        let g = TimeGrid::new(1.0, 5, Spacing::Uniform).unwrap();
        assert_eq!(g.weights(), &[0.125, 0.25, 0.25, 0.25, 0.125]);
    }

    #[test]
    fn nonuniform_nodes() {
        let g = TimeGrid::new(1.0, 3, Spacing::Nodes(vec![0.0, 0.2, 1.0])).unwrap();
        let w = g.weights();
        assert!((w[0] - 0.1).abs() < 1e-15 && (w[1] - 0.5).abs() < 1e-15 && (w[2] - 0.4).abs() < 1e-15);
        assert!((g.zeta_ratio() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn bad_input_is_rejected() {
        assert!(TimeGrid::new(0.0, 3, Spacing::Uniform).is_err());
        assert!(TimeGrid::new(1.0, 1, Spacing::Uniform).is_err());
        assert!(TimeGrid::new(1.0, 3, Spacing::Nodes(vec![0.0, 0.6, 0.5])).is_err());
    }
}
