use std::cmp::Ordering;
use std::collections::HashSet;

use rand::Rng;
use thiserror::Error;

/// Tolerance for "sums to one" checks.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistError {
    #[error("distribution has no tokens")]
    EmptyDistribution,
    #[error("token `{0}` appears twice")]
    DuplicateToken(String),
    #[error("probability {prob} for `{token}` is negative or not finite")]
    InvalidProbability { token: String, prob: f64 },
    #[error("all probabilities are zero")]
    ZeroMass,
    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("nucleus must lie in (0, 1], got {0}")]
    InvalidNucleus(f64),
}

/// A probability mass function over next tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDistribution {
    entries: Vec<(String, f64)>,
}

impl TokenDistribution {
    /// Validates and normalizes non-negative weights.
    pub fn from_weights<S: Into<String>>(
        weights: impl IntoIterator<Item = (S, f64)>,
    ) -> Result<Self, DistError> {
        let mut seen = HashSet::new();
        let mut entries = Vec::new();
        for (tok, w) in weights {
            let tok = tok.into();
            if !w.is_finite() || w < 0.0 {
                return Err(DistError::InvalidProbability { token: tok, prob: w });
            }
            if !seen.insert(tok.clone()) {
                return Err(DistError::DuplicateToken(tok));
            }
            entries.push((tok, w));
        }
        if entries.is_empty() {
            return Err(DistError::EmptyDistribution);
        }
        let total: f64 = entries.iter().map(|e| e.1).sum();
        if total <= 0.0 {
            return Err(DistError::ZeroMass);
        }
        for e in &mut entries {
            e.1 /= total;
        }
        Ok(TokenDistribution { entries })
    }

    /// All mass on one token.
    pub fn one_hot(token: impl Into<String>) -> Self {
        TokenDistribution {
            entries: vec![(token.into(), 1.0)],
        }
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn prob(&self, token: &str) -> f64 {
        self.entries
            .iter()
            .find(|e| e.0 == token)
            .map_or(0.0, |e| e.1)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    /// Most probable token; ties go to the lexicographically smaller one.
    pub fn argmax(&self) -> Option<&str> {
        self.entries
            .iter()
            .min_by(|a, b| rank_order(a, b))
            .map(|e| e.0.as_str())
    }
}

/// Descending probability, then ascending token.
fn rank_order(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.0.cmp(&b.0))
}

/// Sharpens (`T < 1`) or flattens (`T > 1`) a distribution: each
/// probability is raised to `1/T` and the result renormalized. Computed in
/// log space relative to the maximum so tiny temperatures degrade to a
/// greedy one-hot instead of underflowing.
pub fn apply_temperature(pmf: &TokenDistribution, temperature: f64) -> Result<TokenDistribution, DistError> {
    if temperature.is_nan() || temperature <= 0.0 || temperature.is_infinite() {
        return Err(DistError::NonPositiveTemperature(temperature));
    }
    if temperature == 1.0 {
        return Ok(pmf.clone());
    }
    let max = pmf.entries.iter().map(|e| e.1).fold(0.0f64, f64::max);
    let log_max = max.ln();
    let weights = pmf.entries.iter().map(|(t, p)| {
        let w = if *p == 0.0 {
            0.0
        } else {
            ((p.ln() - log_max) / temperature).exp()
        };
        (t.clone(), w)
    });
    TokenDistribution::from_weights(weights)
}

/// Keeps the shortest highest-probability prefix whose cumulative mass is
/// strictly greater than `nucleus`, then renormalizes. If rounding keeps
/// any prefix from exceeding it (always the case for `nucleus == 1`),
/// every token is kept. Output is sorted by descending probability with
/// ties broken by token order.
pub fn nucleus_filter(pmf: &TokenDistribution, nucleus: f64) -> Result<TokenDistribution, DistError> {
    if !(nucleus > 0.0 && nucleus <= 1.0) {
        return Err(DistError::InvalidNucleus(nucleus));
    }
    let mut sorted = pmf.entries.clone();
    sorted.sort_by(rank_order);
    let mut cumulative = 0.0;
    let mut keep = sorted.len();
    for (i, e) in sorted.iter().enumerate() {
        cumulative += e.1;
        if cumulative > nucleus {
            keep = i + 1;
            break;
        }
    }
    sorted.truncate(keep);
    TokenDistribution::from_weights(sorted)
}

/// Draws one token: a uniform number in `[0, total)` is located on the
/// cumulative mass of the entries in their stored order.
pub fn sample_token<R: Rng + ?Sized>(pmf: &TokenDistribution, rng: &mut R) -> Result<String, DistError> {
    let last = pmf.entries.iter().rposition(|e| e.1 > 0.0).ok_or(DistError::EmptyDistribution)?;
    let u: f64 = rng.random::<f64>() * pmf.total();
    let mut cumulative = 0.0;
    for (tok, p) in &pmf.entries[..last] {
        cumulative += p;
        if u < cumulative {
            return Ok(tok.clone());
        }
    }
    Ok(pmf.entries[last].0.clone())
}
