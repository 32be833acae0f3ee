//! Token-by-token generation of candidate models from a seed text.
//!
//! Each step asks a [`Backend`] for the next-token distribution given the
//! text so far, sharpens or flattens it with the temperature, cuts it down
//! to its nucleus, and draws one token. Generation stops at the
//! end-of-text token or when the token budget runs out.

mod bridge;
mod dist;
mod ngram;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use bridge::{BridgeBackend, BridgeRequest, BridgeResponse};
pub use dist::{
    apply_temperature, nucleus_filter, sample_token, DistError, TokenDistribution, NORMALIZATION_TOLERANCE,
};
pub use ngram::{NGramError, NGramModel, BACKOFF_FACTOR};

pub const DEFAULT_SEED_TEXT: &str = "Model {";
pub const DEFAULT_EOT: &str = "<endoftext>";

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub seed_text: String,
    pub temperature: f64,
    pub nucleus: f64,
    pub max_tokens: usize,
    pub rng_seed: u64,
    pub eot_token: String,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            seed_text: DEFAULT_SEED_TEXT.to_string(),
            temperature: 1.0,
            nucleus: 0.9,
            max_tokens: 4096,
            rng_seed: 0,
            eot_token: DEFAULT_EOT.to_string(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.temperature.is_nan() || self.temperature <= 0.0 || self.temperature.is_infinite() {
            return Err(SamplerError::InvalidConfig(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if !(self.nucleus > 0.0 && self.nucleus <= 1.0) {
            return Err(SamplerError::InvalidConfig(format!(
                "nucleus must lie in (0, 1], got {}",
                self.nucleus
            )));
        }
        if self.max_tokens == 0 {
            return Err(SamplerError::InvalidConfig("max_tokens must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("backend failure: {0}")]
pub struct BackendError(pub String);

/// Anything that can answer "what comes next after this text".
pub trait Backend {
    fn next_distribution(&self, context: &str) -> Result<TokenDistribution, BackendError>;

    /// Whether concurrent generations may share this backend without
    /// serializing on it.
    fn is_concurrent(&self) -> bool {
        false
    }
}

impl<B: Backend + ?Sized> Backend for &B {
    fn next_distribution(&self, context: &str) -> Result<TokenDistribution, BackendError> {
        (**self).next_distribution(context)
    }

    fn is_concurrent(&self) -> bool {
        (**self).is_concurrent()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationResult {
    /// Seed plus every drawn token, space separated; the end-of-text token
    /// itself is not included.
    pub text: String,
    pub completed: bool,
    pub tokens_emitted: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplerError {
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("{source} (after {} tokens)", partial.tokens_emitted)]
    BackendFailure {
        source: BackendError,
        partial: GenerationResult,
    },
    #[error("bad distribution from backend: {source}")]
    Distribution {
        source: DistError,
        partial: GenerationResult,
    },
}

pub fn generate(backend: &(impl Backend + ?Sized), cfg: &SamplerConfig) -> Result<GenerationResult, SamplerError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut text = cfg.seed_text.clone();
    let mut emitted = 0;
    let partial = |text: &str, emitted| GenerationResult {
        text: text.to_string(),
        completed: false,
        tokens_emitted: emitted,
    };
    for _ in 0..cfg.max_tokens {
        let pmf = backend
            .next_distribution(&text)
            .map_err(|source| SamplerError::BackendFailure {
                source,
                partial: partial(&text, emitted),
            })?;
        let token = apply_temperature(&pmf, cfg.temperature)
            .and_then(|d| nucleus_filter(&d, cfg.nucleus))
            .and_then(|d| sample_token(&d, &mut rng))
            .map_err(|source| SamplerError::Distribution {
                source,
                partial: partial(&text, emitted),
            })?;
        if token == cfg.eot_token {
            return Ok(GenerationResult {
                text,
                completed: true,
                tokens_emitted: emitted,
            });
        }
        if !text.is_empty() {
            text.push(' ');
        }
        text.push_str(&token);
        emitted += 1;
    }
    Ok(partial(&text, emitted))
}

/// Replays a fixed token script: the next token is chosen by how many
/// tokens the context holds beyond the seed. Past the end of the script it
/// emits `tail` forever. Useful as a stand-in language model.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    seed_tokens: usize,
    script: Vec<String>,
    tail: String,
}

impl ScriptedBackend {
    pub fn new(seed_text: &str, script: impl IntoIterator<Item = impl Into<String>>, tail: &str) -> Self {
        ScriptedBackend {
            seed_tokens: seed_text.split_whitespace().count(),
            script: script.into_iter().map(Into::into).collect(),
            tail: tail.to_string(),
        }
    }

    /// Replays `text` token by token after `seed_text`, then the
    /// end-of-text token.
    pub fn completing(seed_text: &str, text: &str, eot: &str) -> Self {
        let seed_len = seed_text.split_whitespace().count();
        let body: Vec<String> = text.split_whitespace().skip(seed_len).map(str::to_string).collect();
        ScriptedBackend::new(seed_text, body, eot)
    }
}

impl Backend for ScriptedBackend {
    fn next_distribution(&self, context: &str) -> Result<TokenDistribution, BackendError> {
        let pos = context.split_whitespace().count().saturating_sub(self.seed_tokens);
        let tok = self.script.get(pos).unwrap_or(&self.tail);
        Ok(TokenDistribution::one_hot(tok.clone()))
    }

    fn is_concurrent(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Failing;
    impl Backend for Failing {
        fn next_distribution(&self, context: &str) -> Result<TokenDistribution, BackendError> {
            if context.split_whitespace().count() >= 4 {
                Err(BackendError("down".into()))
            } else {
                Ok(TokenDistribution::one_hot("x"))
            }
        }
    }

    #[test]
    fn completes_at_eot() {
        let b = ScriptedBackend::new("Model {", ["}"], DEFAULT_EOT);
        let r = generate(&b, &SamplerConfig::default()).unwrap();
        assert_eq!(r.text, "Model { }");
        assert!(r.completed);
        assert_eq!(r.tokens_emitted, 1);
    }

    #[test]
    fn budget_exhausted() {
        let b = ScriptedBackend::new("Model {", Vec::<String>::new(), "x");
        let cfg = SamplerConfig {
            max_tokens: 10,
            ..SamplerConfig::default()
        };
        let r = generate(&b, &cfg).unwrap();
        assert!(!r.completed);
        assert_eq!(r.tokens_emitted, 10);
        assert_eq!(r.text.split_whitespace().count(), 12);
    }

    #[test]
    fn backend_failure_keeps_partial_output() {
        let err = generate(&Failing, &SamplerConfig::default()).unwrap_err();
        match err {
            SamplerError::BackendFailure { partial, .. } => {
                assert_eq!(partial.text, "Model { x x");
                assert_eq!(partial.tokens_emitted, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let bad = [
            SamplerConfig {
                temperature: 0.0,
                ..Default::default()
            },
            SamplerConfig {
                nucleus: 0.0,
                ..Default::default()
            },
            SamplerConfig {
                nucleus: 1.01,
                ..Default::default()
            },
            SamplerConfig {
                max_tokens: 0,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(matches!(
                generate(&ScriptedBackend::new("", ["a"], "a"), &cfg),
                Err(SamplerError::InvalidConfig(_))
            ));
        }
    }

    #[test]
    fn scripted_completion_replays_text() {
        let text = "Model { Name \"m\" }";
        let b = ScriptedBackend::completing("Model {", text, DEFAULT_EOT);
        let r = generate(&b, &SamplerConfig::default()).unwrap();
        assert_eq!(r.text, text);
        assert!(r.completed);
    }
}
