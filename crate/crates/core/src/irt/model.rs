use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Logistic item parameters: slope `a`, location `b`, lower asymptote `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItemParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ItemParams {
    pub const fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    pub const fn two_pl(a: f64, b: f64) -> Self {
        Self { a, b, c: 0.0 }
    }

    pub const fn rasch(b: f64) -> Self {
        Self { a: 1.0, b, c: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "rasch")]
    Rasch,
    #[serde(rename = "2pl")]
    TwoPl,
    #[serde(rename = "3pl")]
    ThreePl,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Rasch, ModelKind::TwoPl, ModelKind::ThreePl];

    /// Free parameters per item.
    pub fn item_param_count(self) -> usize {
        match self {
            ModelKind::Rasch => 1,
            ModelKind::TwoPl => 2,
            ModelKind::ThreePl => 3,
        }
    }

    /// Total free parameters; Rasch adds the latent variance.
    pub fn param_count(self, n_items: usize) -> usize {
        match self {
            ModelKind::Rasch => n_items + 1,
            k => k.item_param_count() * n_items,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Rasch => "rasch",
            ModelKind::TwoPl => "2pl",
            ModelKind::ThreePl => "3pl",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rasch" | "1pl" => Ok(ModelKind::Rasch),
            "2pl" => Ok(ModelKind::TwoPl),
            "3pl" => Ok(ModelKind::ThreePl),
            other => Err(format!("unknown model `{other}`")),
        }
    }
}

#[inline]
pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Probability of a correct response, `c + (1 - c) / (1 + exp(-a(θ - b)))`.
#[inline]
pub fn icc(p: &ItemParams, theta: f64) -> f64 {
    p.c + (1.0 - p.c) * logistic(p.a * (theta - p.b))
}

/// Fisher information of one item at `theta`.
pub fn item_information(p: &ItemParams, theta: f64) -> f64 {
    let prob = icc(p, theta);
    if p.c == 0.0 {
        return p.a * p.a * prob * (1.0 - prob);
    }
    let num = p.a * p.a * (prob - p.c).powi(2) * (1.0 - prob);
    num / ((1.0 - p.c).powi(2) * prob)
}
