//! Word-level n-gram model with stupid-backoff scoring, usable as a small
//! stand-in for a neural next-token model.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Backend, BackendError, TokenDistribution};
use crate::syntax::{tokenize, TokenSeq};

/// Multiplier applied each time scoring falls back to a shorter context.
pub const BACKOFF_FACTOR: f64 = 0.4;

#[derive(Debug, Error)]
pub enum NGramError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("n-gram order must be at least 1")]
    InvalidOrder,
    #[error("model file: {0}")]
    Format(#[from] serde_json::Error),
    #[error("model file is inconsistent: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Successors {
    total: u64,
    counts: BTreeMap<u32, u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    eot: String,
    vocab: Vec<String>,
    ids: HashMap<String, u32>,
    unigram: Vec<u64>,
    /// `tables[m - 1]` maps a context of `m` tokens to its successor counts.
    tables: Vec<HashMap<Vec<u32>, Successors>>,
}

impl NGramModel {
    /// Counts every n-gram of order `1..=order` over the documents, each
    /// followed by `eot`.
    pub fn train(corpus: &[TokenSeq], order: usize, eot: &str) -> Result<Self, NGramError> {
        if order == 0 {
            return Err(NGramError::InvalidOrder);
        }
        if corpus.is_empty() {
            return Err(NGramError::EmptyCorpus);
        }
        let mut m = NGramModel {
            order,
            eot: eot.to_string(),
            vocab: Vec::new(),
            ids: HashMap::new(),
            unigram: Vec::new(),
            tables: vec![HashMap::new(); order - 1],
        };
        for doc in corpus {
            let ids: Vec<u32> = doc
                .tokens()
                .iter()
                .map(String::as_str)
                .chain(std::iter::once(eot))
                .map(|t| m.intern(t))
                .collect();
            for (i, &w) in ids.iter().enumerate() {
                m.unigram[w as usize] += 1;
                for ctx_len in 1..order.min(i + 1) {
                    let ctx = ids[i - ctx_len..i].to_vec();
                    let succ = m.tables[ctx_len - 1].entry(ctx).or_default();
                    succ.total += 1;
                    *succ.counts.entry(w).or_default() += 1;
                }
            }
        }
        Ok(m)
    }

    fn intern(&mut self, tok: &str) -> u32 {
        if let Some(&id) = self.ids.get(tok) {
            return id;
        }
        let id = self.vocab.len() as u32;
        self.vocab.push(tok.to_string());
        self.ids.insert(tok.to_string(), id);
        self.unigram.push(0);
        id
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn eot(&self) -> &str {
        &self.eot
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    /// Count of `context` followed by `token`; an empty context gives the
    /// unigram count.
    pub fn count(&self, context: &[&str], token: &str) -> u64 {
        let Some(&w) = self.ids.get(token) else { return 0 };
        if context.is_empty() {
            return self.unigram[w as usize];
        }
        if context.len() >= self.order {
            return 0;
        }
        let Some(ctx) = context.iter().map(|t| self.ids.get(*t).copied()).collect::<Option<Vec<_>>>() else {
            return 0;
        };
        self.tables[context.len() - 1]
            .get(&ctx)
            .and_then(|s| s.counts.get(&w))
            .copied()
            .unwrap_or(0)
    }

    /// Stupid-backoff score of `token` after `context`: the relative
    /// frequency at the longest context suffix where `token` was seen,
    /// times `BACKOFF_FACTOR` per level skipped, bottoming out at the
    /// unigram frequency. Scores are not normalized.
    pub fn score(&self, context: &[String], token: &str) -> f64 {
        let Some(&w) = self.ids.get(token) else { return 0.0 };
        let max_ctx = (self.order - 1).min(context.len());
        let mut factor = 1.0;
        for len in (1..=max_ctx).rev() {
            if let Some(succ) = self.successors(&context[context.len() - len..]) {
                if let Some(&c) = succ.counts.get(&w) {
                    return factor * c as f64 / succ.total as f64;
                }
            }
            factor *= BACKOFF_FACTOR;
        }
        factor * self.unigram[w as usize] as f64 / self.unigram_total() as f64
    }

    /// Next-token distribution read off the longest suffix of `context`
    /// that occurred in training, falling back to unigram frequencies when
    /// no suffix did.
    pub fn next_dist(&self, context: &[String]) -> TokenDistribution {
        let max_ctx = (self.order - 1).min(context.len());
        for len in (1..=max_ctx).rev() {
            if let Some(succ) = self.successors(&context[context.len() - len..]) {
                let weights = succ
                    .counts
                    .iter()
                    .map(|(&w, &c)| (self.vocab[w as usize].clone(), c as f64));
                return TokenDistribution::from_weights(weights).expect("observed successors");
            }
        }
        let weights = self.vocab.iter().cloned().zip(self.unigram.iter().map(|&c| c as f64));
        TokenDistribution::from_weights(weights).expect("trained model has positive mass")
    }

    fn successors(&self, context: &[String]) -> Option<&Successors> {
        let ids: Vec<u32> = context
            .iter()
            .map(|t| self.ids.get(t).copied())
            .collect::<Option<_>>()?;
        self.tables[context.len() - 1].get(&ids)
    }

    fn unigram_total(&self) -> u64 {
        self.unigram.iter().sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_wire()).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, NGramError> {
        let wire: Wire = serde_json::from_str(text)?;
        Self::from_wire(wire)
    }

    fn to_wire(&self) -> Wire {
        let tables = self
            .tables
            .iter()
            .map(|t| {
                let mut rows: Vec<WireRow> = t
                    .iter()
                    .map(|(k, s)| (k.clone(), s.counts.iter().map(|(&w, &c)| (w, c)).collect()))
                    .collect();
                rows.sort();
                rows
            })
            .collect();
        Wire {
            order: self.order,
            eot: self.eot.clone(),
            vocab: self.vocab.clone(),
            unigram: self.unigram.clone(),
            tables,
        }
    }

    fn from_wire(w: Wire) -> Result<Self, NGramError> {
        let bad = |m: &str| NGramError::Inconsistent(m.to_string());
        if w.order == 0 {
            return Err(NGramError::InvalidOrder);
        }
        if w.vocab.is_empty() || w.vocab.len() != w.unigram.len() || w.tables.len() != w.order - 1 {
            return Err(bad("table sizes disagree with vocabulary or order"));
        }
        if w.unigram.contains(&0) {
            return Err(bad("zero unigram count"));
        }
        let n = w.vocab.len() as u32;
        let ids: HashMap<String, u32> = w.vocab.iter().cloned().zip(0..).collect();
        if ids.len() != w.vocab.len() || !ids.contains_key(&w.eot) {
            return Err(bad("vocabulary has duplicates or lacks the end-of-text token"));
        }
        let mut tables = Vec::with_capacity(w.tables.len());
        for (level, rows) in w.tables.into_iter().enumerate() {
            let mut table = HashMap::new();
            for (ctx, succ) in rows {
                if ctx.len() != level + 1 || ctx.iter().chain(succ.iter().map(|s| &s.0)).any(|&i| i >= n) {
                    return Err(bad("context length or token id out of range"));
                }
                let counts: BTreeMap<u32, u64> = succ.into_iter().collect();
                let total = counts.values().sum();
                table.insert(ctx, Successors { total, counts });
            }
            tables.push(table);
        }
        Ok(NGramModel {
            order: w.order,
            eot: w.eot,
            vocab: w.vocab,
            ids,
            unigram: w.unigram,
            tables,
        })
    }
}

/// Context ids and their (successor id, count) pairs.
type WireRow = (Vec<u32>, Vec<(u32, u64)>);

#[derive(Serialize, Deserialize)]
struct Wire {
    order: usize,
    eot: String,
    vocab: Vec<String>,
    unigram: Vec<u64>,
    tables: Vec<Vec<WireRow>>,
}

impl Backend for NGramModel {
    fn next_distribution(&self, context: &str) -> Result<TokenDistribution, BackendError> {
        // each whitespace chunk holds at least one token, so the last
        // order - 1 chunks cover the context window
        let want = self.order - 1;
        let mut chunks: Vec<&str> = context.split_whitespace().rev().take(want).collect();
        chunks.reverse();
        let toks = tokenize(&chunks.join(" ")).0;
        let keep = want.min(toks.len());
        Ok(self.next_dist(&toks[toks.len() - keep..]))
    }

    fn is_concurrent(&self) -> bool {
        true
    }
}
