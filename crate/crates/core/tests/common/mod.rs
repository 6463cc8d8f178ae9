//! Minimal HTTP entailment oracle for tests.

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

pub struct MockOracle {
    pub endpoint: String,
    calls: Arc<AtomicUsize>,
    bodies: Arc<Mutex<Vec<String>>>,
}

impl MockOracle {
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Raw request bodies received so far.
    pub fn bodies(&self) -> Vec<String> {
        self.bodies.lock().unwrap().clone()
    }
}

/// Serves `respond(request_json) -> (status, body)` on a loopback port,
/// one request per connection.
pub fn spawn_oracle<F>(respond: F) -> MockOracle
where
    F: Fn(&serde_json::Value) -> (u16, String) + Send + Sync + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}/entails", listener.local_addr().unwrap());
    let calls = Arc::new(AtomicUsize::new(0));
    let bodies = Arc::new(Mutex::new(Vec::new()));
    let respond = Arc::new(respond);
    {
        let calls = calls.clone();
        let bodies = bodies.clone();
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let calls = calls.clone();
                let bodies = bodies.clone();
                let respond = respond.clone();
                thread::spawn(move || {
                    let mut reader = BufReader::new(stream.try_clone().unwrap());
                    let mut content_length = 0usize;
                    loop {
                        let mut line = String::new();
                        if reader.read_line(&mut line).unwrap_or(0) == 0 {
                            return;
                        }
                        let line = line.trim_end();
                        if line.is_empty() {
                            break;
                        }
                        if let Some((k, v)) = line.split_once(':') {
                            if k.eq_ignore_ascii_case("content-length") {
                                content_length = v.trim().parse().unwrap_or(0);
                            }
                        }
                    }
                    let mut body = vec![0u8; content_length];
                    reader.read_exact(&mut body).unwrap();
                    let body = String::from_utf8(body).unwrap();
                    calls.fetch_add(1, Ordering::SeqCst);
                    bodies.lock().unwrap().push(body.clone());
                    let request: serde_json::Value = serde_json::from_str(&body).unwrap_or(serde_json::Value::Null);
                    let (status, reply) = respond(&request);
                    let head = format!(
                        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                        reply.len()
                    );
                    let _ = stream.write_all(head.as_bytes());
                    let _ = stream.write_all(reply.as_bytes());
                    let _ = stream.flush();
                });
            }
        });
    }
    MockOracle { endpoint, calls, bodies }
}

/// Oracle that says `premise ⊨ hypothesis` iff the normalized texts match.
pub fn normalized_equality_oracle() -> MockOracle {
    spawn_oracle(|req| {
        let p = seqscore::eval::normalize_answer(req["premise"].as_str().unwrap_or_default());
        let h = seqscore::eval::normalize_answer(req["hypothesis"].as_str().unwrap_or_default());
        (200, format!("{{\"entails\": {}}}", p == h))
    })
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}
