use serde::{Deserialize, Serialize};

use super::compare::benjamini_hochberg;
use super::FitError;
use crate::ingest::ResponseMatrix;
use crate::irt::{probability_table, IrtFit};
use crate::stats::chi2_sf;

/// Minimum expected correct and incorrect count per rest-score group.
pub const MIN_EXPECTED: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemFitRow {
    pub item_id: String,
    /// `None` marks the item as undefined (too few groups, or df ≤ 0).
    pub s_chi2: Option<f64>,
    pub df: i64,
    pub p_value: Option<f64>,
    pub p_adjusted: Option<f64>,
    pub groups: usize,
}

impl ItemFitRow {
    pub fn is_defined(&self) -> bool {
        self.s_chi2.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Group {
    n: f64,
    observed: f64,
    expected: f64,
}

impl Group {
    fn deficient(&self) -> bool {
        self.expected < MIN_EXPECTED || self.n - self.expected < MIN_EXPECTED
    }
}

/// Merges deficient groups into their inward neighbour, always handling the
/// deficient group closest to either tail first.
fn collapse(mut groups: Vec<Group>) -> Vec<Group> {
    while groups.len() > 1 {
        let g_count = groups.len();
        let pick = (0..g_count)
            .filter(|&g| groups[g].deficient())
            .min_by_key(|&g| (g.min(g_count - 1 - g), g));
        let Some(g) = pick else { break };
        let target = if g <= g_count - 1 - g { g + 1 } else { g - 1 };
        let src = groups.remove(g);
        let t = if target > g { target - 1 } else { target };
        groups[t].n += src.n;
        groups[t].observed += src.observed;
        groups[t].expected += src.expected;
    }
    groups
}

/// Rest-score distribution at each node via Lord-Wingersky, skipping `skip`.
/// Returns a (J) × Q table, score-major.
fn rest_score_distribution(probs: &[f64], n_items: usize, nq: usize, skip: usize) -> Vec<f64> {
    let max = n_items - 1;
    let mut f = vec![0.0; (max + 1) * nq];
    f[..nq].fill(1.0);
    let mut used = 0;
    for i in (0..n_items).filter(|&i| i != skip) {
        let p = &probs[i * nq..(i + 1) * nq];
        used += 1;
        for s in (0..=used).rev() {
            for q in 0..nq {
                let stay = if s < used { f[s * nq + q] * (1.0 - p[q]) } else { 0.0 };
                let up = if s > 0 { f[(s - 1) * nq + q] * p[q] } else { 0.0 };
                f[s * nq + q] = stay + up;
            }
        }
    }
    f
}

/// Orlando-Thissen S-χ² for every item, with BH adjustment across the
/// defined items.
pub fn s_chi2(fit: &IrtFit, m: &ResponseMatrix) -> Result<Vec<ItemFitRow>, FitError> {
    if fit.item_ids.as_slice() != m.item_ids() {
        return Err(FitError::DataMismatch);
    }
    let j = m.n_items();
    if j < 2 {
        return Err(FitError::TooFewItems(j));
    }
    let grid = fit.grid();
    let w = grid.weights();
    let nq = grid.len();
    let probs = probability_table(&fit.items, grid.nodes());
    let totals = m.total_scores();
    let n_params = fit.kind.item_param_count() as i64;

    let mut rows: Vec<ItemFitRow> = (0..j)
        .map(|item| {
            let f = rest_score_distribution(&probs, j, nq, item);
            let p = &probs[item * nq..(item + 1) * nq];
            let mut counts = vec![(0.0f64, 0.0f64); j];
            for (row, &t) in m.rows().zip(&totals) {
                let x = row[item];
                let rest = t as usize - usize::from(x);
                counts[rest].0 += 1.0;
                counts[rest].1 += f64::from(x);
            }
            let groups: Vec<Group> = (0..j)
                .map(|s| {
                    let fs = &f[s * nq..(s + 1) * nq];
                    let den: f64 = (0..nq).map(|q| w[q] * fs[q]).sum();
                    let num: f64 = (0..nq).map(|q| w[q] * fs[q] * p[q]).sum();
                    let e = if den > 0.0 { num / den } else { 0.0 };
                    Group { n: counts[s].0, observed: counts[s].1, expected: counts[s].0 * e }
                })
                .collect();
            let groups = collapse(groups);
            let df = groups.len() as i64 - n_params;
            let defined = groups.len() >= 2 && df > 0 && !groups.iter().any(Group::deficient);
            let stat = defined.then(|| {
                groups
                    .iter()
                    .map(|g| {
                        let ei = g.n - g.expected;
                        (g.observed - g.expected).powi(2) / g.expected
                            + ((g.n - g.observed) - ei).powi(2) / ei
                    })
                    .sum::<f64>()
            });
            ItemFitRow {
                item_id: m.item_ids()[item].clone(),
                s_chi2: stat,
                df,
                p_value: stat.map(|s| chi2_sf(s, df as f64)),
                p_adjusted: None,
                groups: groups.len(),
            }
        })
        .collect();

    let defined: Vec<usize> = (0..j).filter(|&i| rows[i].p_value.is_some()).collect();
    let ps: Vec<f64> = defined.iter().map(|&i| rows[i].p_value.unwrap_or(1.0)).collect();
    for (&i, adj) in defined.iter().zip(benjamini_hochberg(&ps)) {
        rows[i].p_adjusted = Some(adj);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::irt::{fit_mml, FitConfig, ModelKind};
    use crate::simulate::{simulate_responses, SimSpec};

    fn g(n: f64, o: f64, e: f64) -> Group {
        Group { n, observed: o, expected: e }
    }

    #[test]
    fn collapse_merges_tails_inward() {
        let out = collapse(vec![g(1.0, 0.0, 0.2), g(10.0, 4.0, 5.0), g(10.0, 6.0, 5.0), g(2.0, 2.0, 1.5)]);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0], g(11.0, 4.0, 5.2));
        assert_eq!(out[1], g(12.0, 8.0, 6.5));
    }

    #[test]
    fn collapse_to_single_group() {
        let out = collapse(vec![g(0.5, 0.0, 0.2), g(0.5, 0.0, 0.3)]);
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn lord_wingersky_sums_to_one() {
        let items = vec![
            crate::irt::ItemParams::new(1.0, 0.0, 0.0),
            crate::irt::ItemParams::new(1.5, -1.0, 0.2),
            crate::irt::ItemParams::new(0.7, 0.5, 0.1),
        ];
        let nodes = [-1.0, 0.0, 2.0];
        let probs = probability_table(&items, &nodes);
        let f = rest_score_distribution(&probs, 3, 3, 0);
        for q in 0..3 {
            let total: f64 = (0..3).map(|s| f[s * 3 + q]).sum();
            assert!((total - 1.0).abs() < 1e-12);
            // two rest items: closed form for score 2
            let p1 = probs[3 + q];
            let p2 = probs[6 + q];
            assert!((f[2 * 3 + q] - p1 * p2).abs() < 1e-12);
            assert!((f[q] - (1.0 - p1) * (1.0 - p2)).abs() < 1e-12);
        }
    }

    #[test]
    fn rows_are_well_formed() {
        let data = simulate_responses(&SimSpec::two_pl_ranges(10, 800, (0.8, 2.0), (-1.5, 1.5), 4));
        let fit = fit_mml(&data.responses, ModelKind::TwoPl, &FitConfig::default()).unwrap();
        let rows = s_chi2(&fit, &data.responses).unwrap();
        assert_eq!(rows.len(), 10);
        for r in &rows {
            if r.is_defined() {
                assert!(r.df >= 1);
                let (p, adj) = (r.p_value.unwrap(), r.p_adjusted.unwrap());
                assert!((0.0..=1.0).contains(&p));
                assert!(adj >= p);
            }
        }
        let order: Vec<usize> = (0..800).rev().collect();
        let permuted = data.responses.permute_rows(&order);
        assert_eq!(s_chi2(&fit, &permuted).unwrap(), rows);
    }
}
