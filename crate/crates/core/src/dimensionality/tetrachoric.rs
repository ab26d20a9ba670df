use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::DimensionalityError;
use crate::ingest::ResponseMatrix;
use crate::stats::{bvn_cdf, normal_cdf, normal_quantile};

/// Estimate reported for tables with a structural zero cell.
pub const BOUNDARY_RHO: f64 = 0.999;

/// 2×2 contingency table; `counts[x][y]` counts responses `x` on the first
/// item and `y` on the second (0 = incorrect, 1 = correct).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TwoByTwo {
    pub counts: [[u64; 2]; 2],
}

impl TwoByTwo {
    pub fn new(counts: [[u64; 2]; 2]) -> Self {
        Self { counts }
    }

    pub fn from_columns(x: &[u8], y: &[u8]) -> Self {
        let mut counts = [[0u64; 2]; 2];
        for (&a, &b) in x.iter().zip(y) {
            counts[a as usize][b as usize] += 1;
        }
        Self { counts }
    }

    pub fn transpose(&self) -> Self {
        let c = self.counts;
        Self { counts: [[c[0][0], c[1][0]], [c[0][1], c[1][1]]] }
    }

    /// Recodes the first item (swaps its 0/1 labels).
    pub fn flip_first(&self) -> Self {
        let c = self.counts;
        Self { counts: [c[1], c[0]] }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairFlag {
    Interior,
    /// A zero cell forces the likelihood to the ±1 boundary.
    Boundary,
    /// One item is constant; no estimate exists.
    Undefined,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TetrachoricEstimate {
    pub rho: f64,
    pub flag: PairFlag,
}

/// Two-step maximum-likelihood tetrachoric correlation: thresholds from the
/// margins, then the ρ maximizing the bivariate-normal likelihood.
pub fn tetrachoric(table: &TwoByTwo) -> Result<TetrachoricEstimate, DimensionalityError> {
    let [[n00, n01], [n10, n11]] = table.counts;
    let n = table.total() as f64;
    let x0 = n00 + n01;
    let y0 = n00 + n10;
    if x0 == 0 || y0 == 0 || x0 as f64 == n || y0 as f64 == n {
        return Err(DimensionalityError::UndefinedPair);
    }
    if n01 == 0 || n10 == 0 {
        return Ok(TetrachoricEstimate { rho: BOUNDARY_RHO, flag: PairFlag::Boundary });
    }
    if n00 == 0 || n11 == 0 {
        return Ok(TetrachoricEstimate { rho: -BOUNDARY_RHO, flag: PairFlag::Boundary });
    }
    let tau1 = normal_quantile(x0 as f64 / n);
    let tau2 = normal_quantile(y0 as f64 / n);
    let (p1, p2) = (normal_cdf(tau1), normal_cdf(tau2));
    let counts = [n00 as f64, n01 as f64, n10 as f64, n11 as f64];
    // The bracketed score term is strictly decreasing in ρ, so its root is
    // the unique maximizer.
    let score = |rho: f64| -> f64 {
        // Cells can round to zero or below near ρ = ±1.
        let tiny = f64::MIN_POSITIVE;
        let p00 = bvn_cdf(tau1, tau2, rho).max(tiny);
        let p01 = (p1 - p00).max(tiny);
        let p10 = (p2 - p00).max(tiny);
        let p11 = (1.0 - p1 - p2 + p00).max(tiny);
        counts[0] / p00 - counts[1] / p01 - counts[2] / p10 + counts[3] / p11
    };
    let (mut lo, mut hi) = (-0.999_999, 0.999_999);
    if score(hi) >= 0.0 {
        return Ok(TetrachoricEstimate { rho: hi, flag: PairFlag::Interior });
    }
    if score(lo) <= 0.0 {
        return Ok(TetrachoricEstimate { rho: lo, flag: PairFlag::Interior });
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if score(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(TetrachoricEstimate { rho: 0.5 * (lo + hi), flag: PairFlag::Interior })
}

/// J×J tetrachoric correlations with per-pair flags.
#[derive(Debug, Clone, PartialEq)]
pub struct TetrachoricMatrix {
    pub item_ids: Vec<String>,
    pub values: DMatrix<f64>,
    pub flags: DMatrix<PairFlag>,
}

impl TetrachoricMatrix {
    /// Wraps a known correlation matrix with every pair interior.
    pub fn from_correlations(item_ids: Vec<String>, values: DMatrix<f64>) -> Self {
        let j = values.nrows();
        Self { item_ids, values, flags: DMatrix::from_element(j, j, PairFlag::Interior) }
    }

    pub fn n_items(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_flagged_pairs(&self) -> usize {
        let j = self.n_items();
        (0..j).flat_map(|a| (0..a).map(move |b| (a, b))).filter(|&(a, b)| self.flags[(a, b)] != PairFlag::Interior).count()
    }
}

/// Pairwise tetrachorics over all item pairs, reduced in pair order.
pub fn tetrachoric_matrix(m: &ResponseMatrix) -> TetrachoricMatrix {
    let j = m.n_items();
    let cols: Vec<Vec<u8>> = (0..j).map(|c| m.column(c)).collect();
    let mut values = DMatrix::identity(j, j);
    let mut flags = DMatrix::from_element(j, j, PairFlag::Interior);
    for a in 0..j {
        for b in 0..a {
            let (rho, flag) = match tetrachoric(&TwoByTwo::from_columns(&cols[a], &cols[b])) {
                Ok(est) => (est.rho, est.flag),
                Err(_) => (0.0, PairFlag::Undefined),
            };
            values[(a, b)] = rho;
            values[(b, a)] = rho;
            flags[(a, b)] = flag;
            flags[(b, a)] = flag;
        }
    }
    TetrachoricMatrix { item_ids: m.item_ids().to_vec(), values, flags }
}
