//! Classical test theory item analysis.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{LikertTable, ResponseMatrix};
use crate::stats;

#[derive(Debug, Error, PartialEq)]
pub enum CttError {
    #[error("group fraction {0} outside (0, 0.5]")]
    InvalidFraction(f64),
    #[error("total-score variance is zero")]
    DegenerateTest,
    #[error("need at least 2 columns and 2 rows")]
    TooSmall,
}

/// Proportion correct per item.
pub fn item_difficulty(m: &ResponseMatrix) -> Vec<f64> {
    let n = m.n_examinees() as f64;
    (0..m.n_items())
        .map(|j| m.rows().filter(|r| r[j] == 1).count() as f64 / n)
        .collect()
}

/// Item-total (or item-rest when `corrected`) Pearson correlation.
/// `None` marks an undefined value (constant item or constant criterion).
pub fn discrimination_point_biserial(m: &ResponseMatrix, corrected: bool) -> Vec<Option<f64>> {
    let totals = m.total_scores();
    (0..m.n_items())
        .map(|j| {
            let item = m.column_f64(j);
            let criterion: Vec<f64> = totals
                .iter()
                .zip(&item)
                .map(|(&t, &x)| if corrected { t as f64 - x } else { t as f64 })
                .collect();
            if m.n_examinees() < 3 {
                return None;
            }
            stats::pearson(&item, &criterion)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpperLowerDenominator {
    /// Divide by the number of examinees.
    TotalN,
    /// Divide by the size of one extreme group.
    GroupN,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpperLowerResult {
    pub values: Vec<f64>,
    pub group_size: usize,
    /// Examinee row indices, best first, ties in file order.
    pub upper_rows: Vec<usize>,
    /// Examinee row indices, worst first, ties in file order.
    pub lower_rows: Vec<usize>,
}

/// Upper-lower group discrimination index.
pub fn discrimination_upper_lower(
    m: &ResponseMatrix,
    group_fraction: f64,
    denominator: UpperLowerDenominator,
) -> Result<UpperLowerResult, CttError> {
    if !(group_fraction > 0.0 && group_fraction <= 0.5) {
        return Err(CttError::InvalidFraction(group_fraction));
    }
    let n = m.n_examinees();
    let g = ((group_fraction * n as f64) - 1e-9).ceil().max(1.0) as usize;
    let totals = m.total_scores();
    let mut order: Vec<usize> = (0..n).collect();
    // stable sorts keep file order within ties
    order.sort_by(|&a, &b| totals[b].cmp(&totals[a]));
    let upper_rows = order[..g].to_vec();
    order.sort_by(|&a, &b| totals[a].cmp(&totals[b]));
    let lower_rows = order[..g].to_vec();
    let denom = match denominator {
        UpperLowerDenominator::TotalN => n as f64,
        UpperLowerDenominator::GroupN => g as f64,
    };
    let values = (0..m.n_items())
        .map(|j| {
            let u = upper_rows.iter().filter(|&&i| m.get(i, j) == 1).count() as f64;
            let l = lower_rows.iter().filter(|&&i| m.get(i, j) == 1).count() as f64;
            (u - l) / denom
        })
        .collect();
    Ok(UpperLowerResult { values, group_size: g, upper_rows, lower_rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemStats {
    pub item_id: String,
    pub difficulty: f64,
    /// `None` when undefined (constant item).
    pub disc_point_biserial: Option<f64>,
    pub disc_upper_lower: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscriminationVariant {
    #[default]
    PointBiserial,
    UpperLower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CttConfig {
    pub corrected: bool,
    pub group_fraction: f64,
    pub denominator: UpperLowerDenominator,
}

impl Default for CttConfig {
    fn default() -> Self {
        Self { corrected: false, group_fraction: 0.27, denominator: UpperLowerDenominator::TotalN }
    }
}

/// Difficulty plus both discrimination indices for every item.
pub fn item_stats(m: &ResponseMatrix, cfg: &CttConfig) -> Result<(Vec<ItemStats>, UpperLowerResult), CttError> {
    let p = item_difficulty(m);
    let pbis = discrimination_point_biserial(m, cfg.corrected);
    let ul = discrimination_upper_lower(m, cfg.group_fraction, cfg.denominator)?;
    let stats = m
        .item_ids()
        .iter()
        .enumerate()
        .map(|(j, id)| ItemStats {
            item_id: id.clone(),
            difficulty: p[j],
            disc_point_biserial: pbis[j],
            disc_upper_lower: ul.values[j],
        })
        .collect();
    Ok((stats, ul))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub retained: Vec<String>,
    pub excluded: Vec<String>,
    pub threshold: f64,
    pub variant: DiscriminationVariant,
}

impl ItemStats {
    /// Driving index for the filter; an undefined point-biserial counts as 0.
    pub fn discrimination(&self, variant: DiscriminationVariant) -> f64 {
        match variant {
            DiscriminationVariant::PointBiserial => self.disc_point_biserial.unwrap_or(0.0),
            DiscriminationVariant::UpperLower => self.disc_upper_lower,
        }
    }
}

/// Excludes items whose chosen discrimination is below `threshold`.
/// Difficulty is reported but never filters.
pub fn select_items(stats: &[ItemStats], threshold: f64, variant: DiscriminationVariant) -> SelectionReport {
    let (retained, excluded): (Vec<&ItemStats>, Vec<&ItemStats>) =
        stats.iter().partition(|s| s.discrimination(variant) >= threshold);
    SelectionReport {
        retained: retained.into_iter().map(|s| s.item_id.clone()).collect(),
        excluded: excluded.into_iter().map(|s| s.item_id.clone()).collect(),
        threshold,
        variant,
    }
}

/// Cronbach's alpha from an item covariance matrix.
pub fn alpha_from_covariance(cov: &DMatrix<f64>) -> Result<f64, CttError> {
    let k = cov.nrows();
    if k < 2 {
        return Err(CttError::TooSmall);
    }
    let total = cov.sum();
    if total.abs() < 1e-12 {
        return Err(CttError::DegenerateTest);
    }
    let kf = k as f64;
    Ok(kf / (kf - 1.0) * (1.0 - cov.trace() / total))
}

/// Sample covariance (n − 1) of the columns of `m`.
pub fn covariance(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows() as f64;
    let means = m.row_mean();
    let centered = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] - means[j]);
    centered.transpose() * &centered / (n - 1.0)
}

/// Cronbach's alpha over the columns of an examinee × item matrix.
pub fn cronbach_alpha(m: &DMatrix<f64>) -> Result<f64, CttError> {
    if m.ncols() < 2 || m.nrows() < 2 {
        return Err(CttError::TooSmall);
    }
    alpha_from_covariance(&covariance(m))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LikertSummary {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub alpha: f64,
}

/// Per-question mean and SD plus alpha across questions.
pub fn likert_summary(t: &LikertTable) -> Result<LikertSummary, CttError> {
    let (means, sds) = (0..t.n_questions())
        .map(|q| {
            let col = t.column(q);
            (stats::mean(&col), stats::sample_variance(&col).sqrt())
        })
        .unzip();
    let alpha = cronbach_alpha(&t.to_f64_matrix())?;
    Ok(LikertSummary { means, sds, alpha })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mat(rows: &[&[u8]]) -> ResponseMatrix {
        ResponseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn difficulty_examples() {
        let m = mat(&[&[1, 1], &[1, 0], &[1, 1], &[1, 0]]);
        assert_eq!(item_difficulty(&m), vec![1.0, 0.5]);
        let rows: Vec<Vec<u8>> = (0..10).map(|i| vec![u8::from(i < 7), 0]).collect();
        let m = ResponseMatrix::from_rows(&rows).unwrap();
        assert_eq!(item_difficulty(&m)[0], 7.0 / 10.0);
    }

    #[test]
    fn corrected_pbis_perfect_agreement() {
        // item 0 is [1,1,0,0]; the other three items give rest scores [3,3,1,1]
        let m = mat(&[&[1, 1, 1, 1], &[1, 1, 1, 1], &[0, 1, 0, 0], &[0, 0, 1, 0]]);
        let r = discrimination_point_biserial(&m, true);
        assert!((r[0].unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_item_is_undefined() {
        let m = mat(&[&[1, 1], &[1, 0], &[1, 1]]);
        assert_eq!(discrimination_point_biserial(&m, false)[0], None);
    }

    fn brute_pearson(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let sxx: f64 = x.iter().map(|a| a * a).sum();
        let syy: f64 = y.iter().map(|a| a * a).sum();
        (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
    }

    #[test]
    fn pbis_matches_raw_sum_formula_on_6x3() {
        let m = mat(&[&[1, 0, 1], &[1, 1, 1], &[0, 0, 1], &[1, 0, 0], &[0, 1, 0], &[1, 1, 1]]);
        let totals: Vec<f64> = m.total_scores().iter().map(|&t| t as f64).collect();
        let r = discrimination_point_biserial(&m, false);
        for j in 0..3 {
            let want = brute_pearson(&m.column_f64(j), &totals);
            assert!((r[j].unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn upper_lower_examples() {
        // 10 examinees ranked by total; item 0 correct for the top 3 only
        let rows: Vec<Vec<u8>> = (0..10)
            .map(|i| {
                let score = 10 - i; // distinct totals via filler items
                let mut r = vec![u8::from(i < 3), 1];
                r.extend((0..10).map(|f| u8::from(f < score)));
                r
            })
            .collect();
        let m = ResponseMatrix::from_rows(&rows).unwrap();
        let total = discrimination_upper_lower(&m, 0.3, UpperLowerDenominator::TotalN).unwrap();
        assert_eq!(total.group_size, 3);
        assert!((total.values[0] - 0.3).abs() < 1e-15);
        let group = discrimination_upper_lower(&m, 0.3, UpperLowerDenominator::GroupN).unwrap();
        assert!((group.values[0] - 1.0).abs() < 1e-15);
        // item 1 answered identically by both groups
        assert_eq!(group.values[1], 0.0);
        assert_eq!(
            discrimination_upper_lower(&m, 0.6, UpperLowerDenominator::GroupN),
            Err(CttError::InvalidFraction(0.6))
        );
        assert!(discrimination_upper_lower(&m, 0.0, UpperLowerDenominator::GroupN).is_err());
    }

    #[test]
    fn upper_lower_ties_follow_file_order() {
        let m = mat(&[&[1, 0], &[1, 0], &[0, 1], &[0, 1]]);
        let r = discrimination_upper_lower(&m, 0.5, UpperLowerDenominator::GroupN).unwrap();
        assert_eq!(r.upper_rows, vec![0, 1]);
        assert_eq!(r.lower_rows, vec![0, 1]);
    }

    fn stats_from(pairs: &[(f64, f64)]) -> Vec<ItemStats> {
        pairs
            .iter()
            .enumerate()
            .map(|(i, &(p, d))| ItemStats {
                item_id: (i + 1).to_string(),
                difficulty: p,
                disc_point_biserial: Some(d),
                disc_upper_lower: d,
            })
            .collect()
    }

    #[test]
    fn selection_boundaries() {
        let s = stats_from(&[(0.5, 0.31), (0.2, 0.4), (0.9, 0.3)]);
        assert!(select_items(&s, 0.3, DiscriminationVariant::PointBiserial).excluded.is_empty());
        let s = stats_from(&[(0.5, -0.1), (0.2, 0.0), (0.9, 0.05)]);
        let r = select_items(&s, 0.0, DiscriminationVariant::UpperLower);
        assert_eq!(r.excluded, vec!["1".to_string()]);
    }

    #[test]
    fn alpha_examples() {
        let col = [1.0, 0.0, 1.0, 1.0, 0.0];
        let m = DMatrix::from_fn(5, 4, |i, _| col[i]);
        assert!((cronbach_alpha(&m).unwrap() - 1.0).abs() < 1e-12);
        let m = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
        assert_eq!(cronbach_alpha(&m), Err(CttError::DegenerateTest));
    }

    #[test]
    fn likert_examples() {
        let t = LikertTable::new(vec![vec![4, 4, 4]; 5], 1, 5).unwrap();
        assert_eq!(likert_summary(&t), Err(CttError::DegenerateTest));
        let t = LikertTable::new(vec![vec![3, 1], vec![5, 2]], 1, 5).unwrap();
        let s = likert_summary(&t).unwrap();
        assert_eq!(s.means[0], 4.0);
        assert!((s.sds[0] - 2f64.sqrt()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn selection_partitions_and_is_monotone(
            ds in proptest::collection::vec(-0.5f64..1.0, 1..30),
            t1 in -0.5f64..1.0, t2 in -0.5f64..1.0,
        ) {
            let pairs: Vec<(f64, f64)> = ds.iter().map(|&d| (0.5, d)).collect();
            let s = stats_from(&pairs);
            let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            let a = select_items(&s, lo, DiscriminationVariant::PointBiserial);
            let b = select_items(&s, hi, DiscriminationVariant::PointBiserial);
            prop_assert_eq!(a.retained.len() + a.excluded.len(), s.len());
            for id in &a.excluded {
                prop_assert!(b.excluded.contains(id));
                prop_assert!(!a.retained.contains(id));
            }
        }

        #[test]
        fn alpha_shift_invariant(
            rows in proptest::collection::vec(proptest::collection::vec(0u8..2, 5), 6..20),
            shift in -10f64..10.0, col in 0usize..5,
        ) {
            let m = DMatrix::from_fn(rows.len(), 5, |i, j| rows[i][j] as f64);
            let mut shifted = m.clone();
            for i in 0..rows.len() { shifted[(i, col)] += shift; }
            match (cronbach_alpha(&m), cronbach_alpha(&shifted)) {
                (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-9),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false),
            }
        }

        #[test]
        fn row_relabeling_preserves_statistics(
            rows in proptest::collection::vec(proptest::collection::vec(0u8..2, 4), 4..20),
            seed in any::<u64>(),
        ) {
            let m = ResponseMatrix::from_rows(&rows).unwrap();
            let mut order: Vec<usize> = (0..rows.len()).collect();
            // deterministic shuffle
            let mut s = seed | 1;
            for i in (1..order.len()).rev() {
                s ^= s << 13; s ^= s >> 7; s ^= s << 17;
                order.swap(i, (s % (i as u64 + 1)) as usize);
            }
            let p = m.permute_rows(&order);
            prop_assert_eq!(item_difficulty(&m), item_difficulty(&p));
            for (a, b) in discrimination_point_biserial(&m, false).iter().zip(discrimination_point_biserial(&p, false)) {
                match (a, b) {
                    (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-12),
                    (None, None) => {}
                    _ => prop_assert!(false),
                }
            }
            let totals = m.total_scores();
            let mut sorted = totals.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() == totals.len() {
                let a = discrimination_upper_lower(&m, 0.27, UpperLowerDenominator::GroupN).unwrap();
                let b = discrimination_upper_lower(&p, 0.27, UpperLowerDenominator::GroupN).unwrap();
                prop_assert_eq!(a.values, b.values);
            }
        }
    }
}
