use serde::{Deserialize, Serialize};

/// Fixed latent-trait integration grid with normalized prior weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub n_nodes: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { n_nodes: 61, lo: -6.0, hi: 6.0 }
    }
}

impl QuadratureGrid {
    /// Equally spaced nodes carrying a discretized N(0, sd²) prior.
    pub fn new(spec: QuadratureSpec, sd: f64) -> Self {
        assert!(spec.n_nodes >= 2 && spec.hi > spec.lo, "invalid quadrature spec");
        let step = (spec.hi - spec.lo) / (spec.n_nodes - 1) as f64;
        let nodes: Vec<f64> = (0..spec.n_nodes).map(|q| spec.lo + step * q as f64).collect();
        let weights = normal_weights(&nodes, sd);
        Self { nodes, weights }
    }

    pub fn standard() -> Self {
        Self::new(QuadratureSpec::default(), 1.0)
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

    /// Same nodes, prior reweighted to N(0, sd²).
    pub fn with_sd(&self, sd: f64) -> Self {
        Self { nodes: self.nodes.clone(), weights: normal_weights(&self.nodes, sd) }
    }
}

pub(crate) fn normal_weights(nodes: &[f64], sd: f64) -> Vec<f64> {
    let raw: Vec<f64> = nodes.iter().map(|t| (-0.5 * (t / sd).powi(2)).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}
