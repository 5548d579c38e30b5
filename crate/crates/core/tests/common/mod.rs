#![allow(dead_code)]

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread::JoinHandle;

use clozecheck::answerer::{Candidate, PredictRequest, PredictResponse, WireResult};
use clozecheck::dataset::{ClaimRecord, GoldLabel};
use clozecheck::tagger::{EntityType, Gazetteer};

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

/// Copy the shipped fixtures into `dir` so tests never write into the repo.
pub fn copy_fixtures(dir: &Path) {
    for entry in fs::read_dir(fixture_dir()).unwrap() {
        let entry = entry.unwrap();
        if entry.file_type().unwrap().is_file() {
            fs::copy(entry.path(), dir.join(entry.file_name())).unwrap();
        }
    }
}

/// Rewrite the copied config's backend section.
pub fn set_backend(dir: &Path, backend_toml: &str) {
    let path = dir.join("config.toml");
    let text = fs::read_to_string(&path).unwrap();
    let head = text.split("[backend]").next().unwrap();
    fs::write(&path, format!("{head}[backend]\n{backend_toml}\n")).unwrap();
}

pub fn write_claims(path: &Path, claims: &[ClaimRecord]) {
    let mut out = String::new();
    for c in claims {
        let line = serde_json::json!({
            "id": c.id,
            "claim": c.claim,
            "label": c.gold_label.to_string(),
            "verifiable": if c.verifiable { "VERIFIABLE" } else { "NOT VERIFIABLE" },
        });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    fs::write(path, out).unwrap();
}

pub fn write_gazetteer(path: &Path, gazetteer: &Gazetteer) {
    let mut out = String::new();
    for (name, etype) in gazetteer.iter() {
        out.push_str(&format!("{name}\t{etype}\n"));
    }
    fs::write(path, out).unwrap();
}

pub const PLACES: &[&str] = &["Berlin", "Paris", "Rome", "Oslo", "Vienna", "Madrid", "Lisbon", "Dublin"];
pub const PEOPLE: &[&str] = &["Alice Moreau", "Taran", "Nikolaj", "Burnaby Smith", "Ravi Kumar"];

/// Claim text naming exactly the given places, each separated by
/// lowercase words so the rule tagger sees one span per place.
pub fn claim_with_places(places: &[&str]) -> String {
    if places.is_empty() {
        return "the cat sat on the mat.".to_string();
    }
    format!("the trip went to {}.", places.join(" and then to "))
}

/// Deterministic synthetic claims with a gazetteer covering every entity.
///
/// Claim `i` (1-based) names `i % 5` places, plus a person when `i % 3 == 0`.
/// Every seventh claim is gold `REFUTES`, every eleventh `NOT ENOUGH INFO`;
/// the rest are `SUPPORTS`.
pub fn synthetic_claims(n: u64) -> (Vec<ClaimRecord>, Gazetteer) {
    let gazetteer: Gazetteer = PLACES
        .iter()
        .map(|p| (*p, EntityType::Location))
        .chain(PEOPLE.iter().map(|p| (*p, EntityType::Person)))
        .collect();
    let claims = (1..=n)
        .map(|i| {
            let k = (i % 5) as usize;
            let places: Vec<&str> = (0..k).map(|j| PLACES[(i as usize + j) % PLACES.len()]).collect();
            let mut claim = claim_with_places(&places);
            if i % 3 == 0 {
                claim = format!("{} once said that {}", PEOPLE[i as usize % PEOPLE.len()], claim);
            }
            let gold_label = if i % 11 == 0 {
                GoldLabel::NotEnoughInfo
            } else if i % 7 == 0 {
                GoldLabel::Refutes
            } else {
                GoldLabel::Supports
            };
            ClaimRecord {
                id: i,
                claim,
                gold_label,
                verifiable: gold_label != GoldLabel::NotEnoughInfo,
            }
        })
        .collect();
    (claims, gazetteer)
}

pub const SYNTHETIC_VOCAB: &str = "[PAD]\n[UNK]\n[MASK]\nthe\ntrip\nwent\nto\nand\nthen\n.\ncat\nsat\non\nmat\nonce\nsaid\nthat\nberlin\nparis\nrome\noslo\nvienna\nmadrid\nlisbon\ndublin\ntara\n##n\n";

/// Lay out a synthetic run directory and return the config path.
pub fn synthetic_run_dir(dir: &Path, n: u64, backend_toml: &str, phi: &str) -> PathBuf {
    let (claims, gazetteer) = synthetic_claims(n);
    write_claims(&dir.join("claims.jsonl"), &claims);
    write_gazetteer(&dir.join("gazetteer.tsv"), &gazetteer);
    fs::write(dir.join("vocab.txt"), SYNTHETIC_VOCAB).unwrap();
    let config = dir.join("config.toml");
    fs::write(
        &config,
        format!(
            "claims_path = \"claims.jsonl\"\nvocab_path = \"vocab.txt\"\ngazetteer_path = \"gazetteer.tsv\"\noutput_dir = \"out\"\nphi = \"{phi}\"\nretry_base_ms = 1\n\n[backend]\n{backend_toml}\n"
        ),
    )
    .unwrap();
    config
}

type Handler = dyn Fn(&str) -> (u16, String) + Send + Sync;

/// Minimal HTTP server answering every request through `handler`.
pub struct StubServer {
    pub url: String,
    server: Arc<tiny_http::Server>,
    thread: Option<JoinHandle<()>>,
}

impl StubServer {
    pub fn start(handler: impl Fn(&str) -> (u16, String) + Send + Sync + 'static) -> Self {
        let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").unwrap());
        let port = server.server_addr().to_ip().unwrap().port();
        let handler: Arc<Handler> = Arc::new(handler);
        let worker = Arc::clone(&server);
        let thread = std::thread::spawn(move || {
            for mut request in worker.incoming_requests() {
                let mut body = String::new();
                request.as_reader().read_to_string(&mut body).unwrap();
                let (status, reply) = handler(&body);
                let response = tiny_http::Response::from_string(reply).with_status_code(status);
                let _ = request.respond(response);
            }
        });
        StubServer {
            url: format!("http://127.0.0.1:{port}/predict"),
            server,
            thread: Some(thread),
        }
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Masked-LM stub: answers request id `claim:question` from `answers`,
/// padding with lower-scored filler tokens up to `top_k`.
pub fn mlm_stub(answers: HashMap<String, String>) -> StubServer {
    StubServer::start(move |body| {
        let request: PredictRequest = match serde_json::from_str(body) {
            Ok(r) => r,
            Err(e) => return (400, e.to_string()),
        };
        let results = request
            .queries
            .iter()
            .map(|q| {
                let mut candidates = vec![Candidate::new(
                    answers.get(&q.id).cloned().unwrap_or_else(|| "[UNK]".into()),
                    1.0,
                )];
                for i in 1..q.top_k {
                    candidates.push(Candidate::new(format!("filler{i}"), 1.0 / (i as f64 + 1.0)));
                }
                WireResult {
                    id: q.id.clone(),
                    mask_position: q.mask_position,
                    candidates,
                }
            })
            .collect();
        (200, serde_json::to_string(&PredictResponse { results }).unwrap())
    })
}

/// An address nothing listens on.
pub fn dead_endpoint() -> String {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    drop(listener);
    format!("http://127.0.0.1:{port}/predict")
}
