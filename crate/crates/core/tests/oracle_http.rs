mod common;

use std::time::Duration;

use common::{normalized_equality_oracle, spawn_oracle};
use seqscore::semcluster::{
    cluster, cluster_in_context, cluster_with_oracle, entails, ClusterStrategy, EntailmentConfig, EntailmentOracle,
    HttpOracle,
};
use seqscore::Error;

fn config(endpoint: &str, cache: bool) -> EntailmentConfig {
    EntailmentConfig { endpoint: endpoint.to_owned(), timeout: Duration::from_secs(5), cache }
}

fn strs(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

#[test]
fn identical_strings_entail() {
    let mock = spawn_oracle(|req| (200, format!(r#"{{"entails": {}}}"#, req["premise"] == req["hypothesis"])));
    let verdict = entails("Paris", "Paris", &mock.endpoint, Duration::from_secs(5)).unwrap();
    assert!(verdict.entails);
    let verdict = entails("Paris", "Lyon", &mock.endpoint, Duration::from_secs(5)).unwrap();
    assert!(!verdict.entails);
    assert_eq!(mock.calls(), 2);
}

#[test]
fn request_body_schema() {
    let mock = spawn_oracle(|_| (200, r#"{"entails": true}"#.into()));
    let oracle = HttpOracle::new(&config(&mock.endpoint, false));
    oracle.entails("a cat", "the cat", None).unwrap();
    oracle.entails("a cat", "the cat", Some("What animal?")).unwrap();
    let bodies: Vec<serde_json::Value> = mock.bodies().iter().map(|b| serde_json::from_str(b).unwrap()).collect();
    assert_eq!(bodies[0], serde_json::json!({"premise": "a cat", "hypothesis": "the cat"}));
    assert_eq!(bodies[1], serde_json::json!({"premise": "a cat", "hypothesis": "the cat", "context": "What animal?"}));
}

#[test]
fn always_false_gives_singletons() {
    let mock = spawn_oracle(|_| (200, r#"{"entails": false}"#.into()));
    let ids =
        cluster(&strs(&["a", "a", "b", "c"]), &ClusterStrategy::Entailment(config(&mock.endpoint, true))).unwrap();
    assert_eq!(ids, vec![0, 1, 2, 3]);
}

#[test]
fn cache_avoids_repeat_requests() {
    let mock = normalized_equality_oracle();
    let oracle = HttpOracle::new(&config(&mock.endpoint, true));
    assert!(oracle.entails("Paris", "paris", None).unwrap());
    assert!(oracle.entails("Paris", "paris", None).unwrap());
    assert_eq!(mock.calls(), 1);
    assert_eq!(oracle.requests(), 1);
    // the pair is ordered
    assert!(oracle.entails("paris", "Paris", None).unwrap());
    assert_eq!(mock.calls(), 2);
    // and so is the context
    assert!(oracle.entails("Paris", "paris", Some("q")).unwrap());
    assert_eq!(mock.calls(), 3);

    let uncached = HttpOracle::new(&config(&mock.endpoint, false));
    uncached.entails("x", "x", None).unwrap();
    uncached.entails("x", "x", None).unwrap();
    assert_eq!(uncached.requests(), 2);
}

#[test]
fn clustering_through_http() {
    let mock = normalized_equality_oracle();
    let oracle = HttpOracle::new(&config(&mock.endpoint, true));
    let answers = strs(&["Paris", "the paris", "Lyon", "PARIS!", "lyon", "Nice"]);
    let ids = cluster_with_oracle(&answers, &oracle, Some("Which city?")).unwrap();
    assert_eq!(ids, vec![0, 0, 1, 0, 1, 2]);
    let normalized = cluster(&answers, &ClusterStrategy::Normalized).unwrap();
    assert_eq!(ids, normalized);
    let via_strategy =
        cluster_in_context(&answers, &ClusterStrategy::Entailment(config(&mock.endpoint, true)), Some("Which city?"))
            .unwrap();
    assert_eq!(via_strategy, ids);
}

#[test]
fn non_2xx_is_status_error() {
    let mock = spawn_oracle(|_| (503, r#"{"error": "loading"}"#.into()));
    let err = entails("a", "b", &mock.endpoint, Duration::from_secs(5)).unwrap_err();
    assert!(matches!(err, Error::OracleStatus(503)), "{err:?}");
}

#[test]
fn malformed_reply_is_protocol_error() {
    for reply in [r#"{"entailment": true}"#, "not json", r#"{"entails": "yes"}"#] {
        let mock = spawn_oracle(move |_| (200, reply.to_owned()));
        let err = entails("a", "b", &mock.endpoint, Duration::from_secs(5)).unwrap_err();
        assert!(matches!(err, Error::Protocol(_)), "{reply}: {err:?}");
    }
}

#[test]
fn slow_oracle_times_out() {
    let mock = spawn_oracle(|_| {
        std::thread::sleep(Duration::from_millis(1500));
        (200, r#"{"entails": true}"#.into())
    });
    let err = entails("a", "b", &mock.endpoint, Duration::from_millis(200)).unwrap_err();
    assert!(matches!(err, Error::Timeout(_)), "{err:?}");
}

#[test]
fn errors_are_not_swallowed_by_clustering() {
    let mock = spawn_oracle(|_| (500, String::new()));
    let err = cluster(&strs(&["a", "b"]), &ClusterStrategy::Entailment(config(&mock.endpoint, true))).unwrap_err();
    assert!(matches!(err, Error::OracleStatus(500)), "{err:?}");
}
