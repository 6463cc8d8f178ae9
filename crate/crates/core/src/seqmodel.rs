//! Sequence and probability types shared by decoders, estimators and the
//! synthetic models.
//!
//! All probabilities are natural-log. A zero-probability token is `-inf`;
//! `NaN` is rejected at construction.

use std::collections::HashMap;

use crate::error::{input, Error, Result};

pub type TokenId = u32;

/// Tolerance on `sum(exp(log_probs)) == 1`.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Vocab(usize);

impl Vocab {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 {
            return input(format!("vocabulary size must be at least 2, got {size}"));
        }
        Ok(Vocab(size))
    }

    pub fn size(self) -> usize {
        self.0
    }

    pub fn contains(self, token: TokenId) -> bool {
        (token as usize) < self.0
    }
}

/// Next-token distribution over a vocabulary, stored as log-probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDistribution {
    log_probs: Vec<f64>,
}

impl TokenDistribution {
    pub fn from_log_probs(log_probs: Vec<f64>) -> Result<Self> {
        if log_probs.len() < 2 {
            return input("distribution needs at least 2 entries");
        }
        if let Some(i) = log_probs.iter().position(|lp| lp.is_nan() || *lp > 0.0) {
            return input(format!("log-prob {} at index {i} is not in [-inf, 0]", log_probs[i]));
        }
        let total: f64 = log_probs.iter().map(|lp| lp.exp()).sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return input(format!("probabilities sum to {total}, expected 1"));
        }
        Ok(Self { log_probs })
    }

    pub fn from_probs(probs: &[f64]) -> Result<Self> {
        if let Some(p) = probs.iter().find(|p| p.is_nan() || **p < 0.0) {
            return input(format!("probability {p} is negative or NaN"));
        }
        Self::from_log_probs(probs.iter().map(|p| p.ln()).collect())
    }

    pub fn uniform(vocab: Vocab) -> Self {
        let lp = -(vocab.size() as f64).ln();
        Self { log_probs: vec![lp; vocab.size()] }
    }

    pub fn one_hot(vocab: Vocab, token: TokenId) -> Self {
        let mut log_probs = vec![f64::NEG_INFINITY; vocab.size()];
        log_probs[token as usize] = 0.0;
        Self { log_probs }
    }

    /// Builds a distribution from log-probabilities that are known to be
    /// normalized up to rounding (e.g. freshly normalized samples).
    pub(crate) fn from_log_probs_unchecked(log_probs: Vec<f64>) -> Self {
        debug_assert!(log_probs.iter().all(|lp| !lp.is_nan() && *lp <= 0.0));
        Self { log_probs }
    }

    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }

    pub fn log_prob(&self, token: TokenId) -> f64 {
        self.log_probs[token as usize]
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn probs(&self) -> impl Iterator<Item = f64> + '_ {
        self.log_probs.iter().map(|lp| lp.exp())
    }

    /// Most likely token; the lowest id wins ties.
    pub fn argmax(&self) -> TokenId {
        let mut best = 0;
        for (i, lp) in self.log_probs.iter().enumerate().skip(1) {
            if *lp > self.log_probs[best] {
                best = i;
            }
        }
        best as TokenId
    }
}

/// A token sequence together with the log-probability of each token.
///
/// Sequences read from traces may not carry token ids; in that case
/// `tokens` is empty and only the log-probabilities are meaningful.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSequence {
    tokens: Vec<TokenId>,
    token_log_probs: Vec<f64>,
}

impl ScoredSequence {
    pub fn new(tokens: Vec<TokenId>, token_log_probs: Vec<f64>) -> Result<Self> {
        if tokens.len() != token_log_probs.len() {
            return input(format!("{} tokens but {} log-probs", tokens.len(), token_log_probs.len()));
        }
        Self::validated(tokens, token_log_probs)
    }

    /// A sequence known only through its per-token log-probabilities.
    pub fn from_token_log_probs(token_log_probs: Vec<f64>) -> Result<Self> {
        Self::validated(Vec::new(), token_log_probs)
    }

    fn validated(tokens: Vec<TokenId>, token_log_probs: Vec<f64>) -> Result<Self> {
        if token_log_probs.is_empty() {
            return input("sequence has no token log-probs");
        }
        if let Some(lp) = token_log_probs.iter().find(|lp| lp.is_nan() || **lp > 0.0) {
            return input(format!("token log-prob {lp} is not in [-inf, 0]"));
        }
        Ok(Self { tokens, token_log_probs })
    }

    pub fn tokens(&self) -> &[TokenId] {
        &self.tokens
    }

    pub fn token_log_probs(&self) -> &[f64] {
        &self.token_log_probs
    }

    pub fn len(&self) -> usize {
        self.token_log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_log_probs.is_empty()
    }

    /// `log p(y)`: left-to-right sum of the token log-probs.
    pub fn total_log_prob(&self) -> f64 {
        self.token_log_probs.iter().fold(0.0, |acc, lp| acc + lp)
    }

    /// `log p̄(y)`, the per-token mean log-probability.
    pub fn ln_log_prob(&self) -> f64 {
        self.total_log_prob() / self.len() as f64
    }
}

/// Provider of next-token distributions for a fixed maximum length.
///
/// Implementations must be pure: the same prefix always yields the same
/// distribution, and `next` may be called concurrently.
pub trait TokenDistributionSource: Sync {
    fn vocab(&self) -> Vocab;

    fn max_len(&self) -> usize;

    /// Distribution of the token following `prefix`, with `prefix.len() < max_len()`.
    fn next(&self, prefix: &[TokenId]) -> TokenDistribution;
}

impl<S: TokenDistributionSource + ?Sized> TokenDistributionSource for &S {
    fn vocab(&self) -> Vocab {
        (**self).vocab()
    }
    fn max_len(&self) -> usize {
        (**self).max_len()
    }
    fn next(&self, prefix: &[TokenId]) -> TokenDistribution {
        (**self).next(prefix)
    }
}

fn check_tokens<S: TokenDistributionSource + ?Sized>(source: &S, tokens: &[TokenId]) -> Result<()> {
    if tokens.len() > source.max_len() {
        return input(format!("sequence length {} exceeds max length {}", tokens.len(), source.max_len()));
    }
    let vocab = source.vocab();
    if let Some(t) = tokens.iter().find(|t| !vocab.contains(**t)) {
        return input(format!("token id {t} out of range for vocabulary of {}", vocab.size()));
    }
    Ok(())
}

/// Per-token log-probabilities of `tokens` under `source`.
pub fn score_tokens<S: TokenDistributionSource + ?Sized>(source: &S, tokens: &[TokenId]) -> Result<ScoredSequence> {
    check_tokens(source, tokens)?;
    let lps = (0..tokens.len()).map(|t| source.next(&tokens[..t]).log_prob(tokens[t])).collect();
    ScoredSequence::new(tokens.to_vec(), lps)
}

/// `Σ_t log p(y_t | y_<t)`; `-inf` if any token has zero probability.
pub fn sequence_log_prob<S: TokenDistributionSource + ?Sized>(source: &S, tokens: &[TokenId]) -> Result<f64> {
    check_tokens(source, tokens)?;
    let mut total = 0.0;
    for t in 0..tokens.len() {
        total += source.next(&tokens[..t]).log_prob(tokens[t]);
        if total == f64::NEG_INFINITY {
            break;
        }
    }
    Ok(total)
}

/// Mean per-token log-probability `(1/T) Σ_t log p(y_t | y_<t)`.
pub fn length_normalized_log_prob(token_log_probs: &[f64]) -> Result<f64> {
    if token_log_probs.is_empty() {
        return input("length normalization of an empty sequence");
    }
    let total = token_log_probs.iter().fold(0.0, |acc, lp| acc + lp);
    Ok(total / token_log_probs.len() as f64)
}

/// Uniform next-token distribution at every step.
#[derive(Debug, Clone)]
pub struct UniformSource {
    vocab: Vocab,
    max_len: usize,
}

impl UniformSource {
    pub fn new(vocab: Vocab, max_len: usize) -> Self {
        Self { vocab, max_len }
    }
}

impl TokenDistributionSource for UniformSource {
    fn vocab(&self) -> Vocab {
        self.vocab
    }
    fn max_len(&self) -> usize {
        self.max_len
    }
    fn next(&self, _prefix: &[TokenId]) -> TokenDistribution {
        TokenDistribution::uniform(self.vocab)
    }
}

/// Deterministic model: at step `t` it emits `path[t]` with probability 1,
/// regardless of the prefix.
#[derive(Debug, Clone)]
pub struct OneHotSource {
    vocab: Vocab,
    path: Vec<TokenId>,
}

impl OneHotSource {
    pub fn new(vocab: Vocab, path: Vec<TokenId>) -> Result<Self> {
        if path.is_empty() {
            return input("forced path must be non-empty");
        }
        if let Some(t) = path.iter().find(|t| !vocab.contains(**t)) {
            return input(format!("token id {t} out of range"));
        }
        Ok(Self { vocab, path })
    }

    pub fn path(&self) -> &[TokenId] {
        &self.path
    }
}

impl TokenDistributionSource for OneHotSource {
    fn vocab(&self) -> Vocab {
        self.vocab
    }
    fn max_len(&self) -> usize {
        self.path.len()
    }
    fn next(&self, prefix: &[TokenId]) -> TokenDistribution {
        TokenDistribution::one_hot(self.vocab, self.path[prefix.len()])
    }
}

/// Explicit prefix → distribution table. Every prefix shorter than
/// `max_len` must have an entry.
#[derive(Debug, Clone)]
pub struct TableSource {
    vocab: Vocab,
    max_len: usize,
    table: HashMap<Vec<TokenId>, TokenDistribution>,
}

impl TableSource {
    pub fn new(
        vocab: Vocab,
        max_len: usize,
        entries: impl IntoIterator<Item = (Vec<TokenId>, TokenDistribution)>,
    ) -> Result<Self> {
        if max_len == 0 {
            return input("max_len must be at least 1");
        }
        let table: HashMap<_, _> = entries.into_iter().collect();
        for dist in table.values() {
            if dist.len() != vocab.size() {
                return input(format!("distribution over {} tokens in a vocabulary of {}", dist.len(), vocab.size()));
            }
        }
        let mut frontier = vec![Vec::new()];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for prefix in frontier {
                if !table.contains_key(&prefix) {
                    return Err(Error::Input(format!("no distribution for prefix {prefix:?}")));
                }
                for t in 0..vocab.size() as TokenId {
                    let mut p = prefix.clone();
                    p.push(t);
                    next.push(p);
                }
            }
            frontier = next;
        }
        Ok(Self { vocab, max_len, table })
    }
}

impl TokenDistributionSource for TableSource {
    fn vocab(&self) -> Vocab {
        self.vocab
    }
    fn max_len(&self) -> usize {
        self.max_len
    }
    fn next(&self, prefix: &[TokenId]) -> TokenDistribution {
        self.table[prefix].clone()
    }
}
