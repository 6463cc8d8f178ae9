//! Semantic clustering of generated answers.
//!
//! Clustering is a single greedy pass: each answer is compared with the
//! first member of every existing cluster, in creation order, and joins the
//! first one it is equivalent to. Otherwise it opens a new cluster. Ids are
//! dense and numbered in order of first appearance.
//!
//! Entailment-based equivalence delegates to an external oracle over HTTP:
//!
//! ```text
//! POST <endpoint>
//! {"premise": "...", "hypothesis": "...", "context": "..."}   // context optional
//! → 200 {"entails": true}
//! ```

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::eval::normalize_answer;

/// Environment variable holding the default oracle endpoint.
pub const NLI_ENDPOINT_ENV: &str = "SEQSCORE_NLI_ENDPOINT";

#[derive(Debug, Clone, PartialEq)]
pub struct EntailmentConfig {
    pub endpoint: String,
    pub timeout: Duration,
    pub cache: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClusterStrategy {
    Exact,
    Normalized,
    Entailment(EntailmentConfig),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntailmentVerdict {
    pub premise: String,
    pub hypothesis: String,
    pub entails: bool,
}

/// Anything that can decide whether `premise` entails `hypothesis`.
pub trait EntailmentOracle {
    fn entails(&self, premise: &str, hypothesis: &str, context: Option<&str>) -> Result<bool>;
}

#[derive(Serialize)]
struct EntailmentRequest<'a> {
    premise: &'a str,
    hypothesis: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    context: Option<&'a str>,
}

#[derive(Deserialize)]
struct EntailmentReply {
    entails: bool,
}

type CacheKey = (String, String, Option<String>);

/// Blocking HTTP client for an entailment oracle.
pub struct HttpOracle {
    endpoint: String,
    agent: ureq::Agent,
    cache: Option<Mutex<HashMap<CacheKey, bool>>>,
    requests: AtomicUsize,
}

impl HttpOracle {
    pub fn new(config: &EntailmentConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint: config.endpoint.clone(),
            agent,
            cache: config.cache.then(|| Mutex::new(HashMap::new())),
            requests: AtomicUsize::new(0),
        }
    }

    /// Number of HTTP requests issued so far (cache hits excluded).
    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::Relaxed)
    }

    fn request(&self, premise: &str, hypothesis: &str, context: Option<&str>) -> Result<bool> {
        self.requests.fetch_add(1, Ordering::Relaxed);
        let body = EntailmentRequest { premise, hypothesis, context };
        let mut response = self.agent.post(&self.endpoint).send_json(&body).map_err(transport_error)?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(Error::OracleStatus(status));
        }
        let text = response.body_mut().read_to_string().map_err(transport_error)?;
        let reply: EntailmentReply =
            serde_json::from_str(&text).map_err(|e| Error::Protocol(format!("bad reply `{}`: {e}", text.trim())))?;
        Ok(reply.entails)
    }
}

fn transport_error(e: ureq::Error) -> Error {
    match e {
        ureq::Error::Timeout(t) => Error::Timeout(t.to_string()),
        ureq::Error::StatusCode(code) => Error::OracleStatus(code),
        other => Error::Transport(other.to_string()),
    }
}

impl EntailmentOracle for HttpOracle {
    fn entails(&self, premise: &str, hypothesis: &str, context: Option<&str>) -> Result<bool> {
        let Some(cache) = &self.cache else {
            return self.request(premise, hypothesis, context);
        };
        let key = (premise.to_owned(), hypothesis.to_owned(), context.map(str::to_owned));
        if let Some(hit) = cache.lock().expect("cache poisoned").get(&key) {
            return Ok(*hit);
        }
        let verdict = self.request(premise, hypothesis, context)?;
        cache.lock().expect("cache poisoned").insert(key, verdict);
        Ok(verdict)
    }
}

/// One-off entailment query against `endpoint`.
pub fn entails(premise: &str, hypothesis: &str, endpoint: &str, timeout: Duration) -> Result<EntailmentVerdict> {
    let oracle = HttpOracle::new(&EntailmentConfig { endpoint: endpoint.to_owned(), timeout, cache: false });
    Ok(EntailmentVerdict {
        premise: premise.to_owned(),
        hypothesis: hypothesis.to_owned(),
        entails: oracle.entails(premise, hypothesis, None)?,
    })
}

/// Greedy representative clustering under an arbitrary equivalence test.
pub fn cluster_by<F>(answers: &[String], mut equivalent: F) -> Result<Vec<usize>>
where
    F: FnMut(&str, &str) -> Result<bool>,
{
    if answers.is_empty() {
        return input("nothing to cluster");
    }
    let mut representatives: Vec<usize> = Vec::new();
    let mut ids = Vec::with_capacity(answers.len());
    'answers: for (i, answer) in answers.iter().enumerate() {
        for (id, rep) in representatives.iter().enumerate() {
            if equivalent(&answers[*rep], answer)? {
                ids.push(id);
                continue 'answers;
            }
        }
        ids.push(representatives.len());
        representatives.push(i);
    }
    Ok(ids)
}

/// Clusters by bidirectional entailment: `a ~ b` iff the oracle says
/// `a ⊨ b` and `b ⊨ a`.
pub fn cluster_with_oracle(
    answers: &[String],
    oracle: &dyn EntailmentOracle,
    context: Option<&str>,
) -> Result<Vec<usize>> {
    cluster_by(
        answers,
        |rep, answer| Ok(oracle.entails(rep, answer, context)? && oracle.entails(answer, rep, context)?),
    )
}

pub fn cluster(answers: &[String], strategy: &ClusterStrategy) -> Result<Vec<usize>> {
    cluster_in_context(answers, strategy, None)
}

/// Like [`cluster`], forwarding `context` (typically the question) to the
/// entailment oracle.
pub fn cluster_in_context(answers: &[String], strategy: &ClusterStrategy, context: Option<&str>) -> Result<Vec<usize>> {
    match strategy {
        ClusterStrategy::Exact => cluster_by(answers, |a, b| Ok(a == b)),
        ClusterStrategy::Normalized => {
            let normalized: Vec<String> = answers.iter().map(|a| normalize_answer(a)).collect();
            cluster_by(&normalized, |a, b| Ok(a == b))
        }
        ClusterStrategy::Entailment(config) => cluster_with_oracle(answers, &HttpOracle::new(config), context),
    }
}
