//! Seeded synthetic data for parameter recovery and calibration studies.
//!
//! Randomness comes from ChaCha20 (`rand_chacha::ChaCha20Rng`), a 64-bit
//! counter-based generator. The seed selects the key and every consumer
//! draws from its own stream: stream 0 samples item parameters, stream
//! `1 + i` serves examinee (or regression row) `i`. Per-row output is thus
//! independent of generation order. Uniforms take the top 53 bits of a
//! `u64` shifted to the open interval; normals go through the AS 241
//! inverse CDF.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::ingest::{ResponseMatrix, ScoreTable};
use crate::irt::{icc, IrtFit, ItemParams};
use crate::stats::normal_quantile;

/// Independent random stream `stream` under `seed`.
pub fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    SimRng(rng)
}

pub struct SimRng(ChaCha20Rng);

impl SimRng {
    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.0.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        normal_quantile(self.uniform())
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Unbiased integer in `0..n` by rejection.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let v = self.0.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            xs.swap(i, j);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemSource {
    Fixed(Vec<ItemParams>),
    Ranges { n_items: usize, a: (f64, f64), b: (f64, f64), c: (f64, f64) },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub n_examinees: usize,
    pub items: ItemSource,
    #[serde(default)]
    pub latent_mean: f64,
    #[serde(default = "one")]
    pub latent_sd: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

impl SimSpec {
    pub fn two_pl_ranges(n_items: usize, n_examinees: usize, a: (f64, f64), b: (f64, f64), seed: u64) -> Self {
        Self {
            n_examinees,
            items: ItemSource::Ranges { n_items, a, b, c: (0.0, 0.0) },
            latent_mean: 0.0,
            latent_sd: 1.0,
            seed,
        }
    }

    pub fn fixed(items: Vec<ItemParams>, n_examinees: usize, seed: u64) -> Self {
        Self { n_examinees, items: ItemSource::Fixed(items), latent_mean: 0.0, latent_sd: 1.0, seed }
    }

    /// Parametric bootstrap spec drawing from a fitted model.
    pub fn from_fit(fit: &IrtFit, n_examinees: usize, seed: u64) -> Self {
        Self {
            n_examinees,
            items: ItemSource::Fixed(fit.items.clone()),
            latent_mean: 0.0,
            latent_sd: fit.latent_sd,
            seed,
        }
    }

    pub fn item_params(&self) -> Vec<ItemParams> {
        match &self.items {
            ItemSource::Fixed(items) => items.clone(),
            ItemSource::Ranges { n_items, a, b, c } => {
                let mut rng = stream(self.seed, 0);
                (0..*n_items)
                    .map(|_| ItemParams {
                        a: rng.uniform_range(a.0, a.1),
                        b: rng.uniform_range(b.0, b.1),
                        c: rng.uniform_range(c.0, c.1),
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimData {
    pub responses: ResponseMatrix,
    pub thetas: Vec<f64>,
    pub items: Vec<ItemParams>,
}

/// Draws θ_i from the latent normal and x_ij ~ Bernoulli(icc(θ_i)).
pub fn simulate_responses(spec: &SimSpec) -> SimData {
    let items = spec.item_params();
    let j = items.len();
    let mut thetas = Vec::with_capacity(spec.n_examinees);
    let mut cells = Vec::with_capacity(spec.n_examinees * j);
    for i in 0..spec.n_examinees {
        let mut rng = stream(spec.seed, 1 + i as u64);
        let theta = spec.latent_mean + spec.latent_sd * rng.normal();
        thetas.push(theta);
        cells.extend(items.iter().map(|p| u8::from(rng.uniform() < icc(p, theta))));
    }
    let examinees = (1..=spec.n_examinees).map(|i| format!("s{i:05}")).collect();
    let item_ids = (1..=j).map(|k| format!("i{k:02}")).collect();
    let responses = ResponseMatrix::new(examinees, item_ids, cells).expect("simulated matrix is valid");
    SimData { responses, thetas, items }
}

/// Independent standard-normal predictors and `dv = Σ β_k x_k + ε`.
pub fn simulate_regression(n: usize, betas: &[(&str, f64)], noise_sd: f64, seed: u64, dv: &str) -> ScoreTable {
    let k = betas.len();
    let mut columns = vec![Vec::with_capacity(n); k + 1];
    for i in 0..n {
        let mut rng = stream(seed, 1 + i as u64);
        let mut y = 0.0;
        for (c, (_, beta)) in betas.iter().enumerate() {
            let x = rng.normal();
            columns[c].push(x);
            y += beta * x;
        }
        columns[k].push(y + noise_sd * rng.normal());
    }
    let mut names: Vec<String> = betas.iter().map(|(n, _)| n.to_string()).collect();
    names.push(dv.to_string());
    ScoreTable::new(names, columns).expect("simulated table is valid")
}
