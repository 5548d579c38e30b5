//! Answering Cloze questions with a masked-token predictor.
//!
//! A question becomes a [`MaskedQuery`]: WordPiece tokens of the question
//! with the placeholder carried through as exactly one mask token, whatever
//! the length of the gold answer. A [`Backend`] fills the mask, and the
//! prediction is correct only when it equals the gold answer after
//! lowercasing and trimming. An answer that WordPiece splits into several
//! pieces can therefore never be matched by a single predicted piece.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clozegen::{ClozeQuestion, MASK_PLACEHOLDER};
use crate::dataset::{Stage, StageRecord};
use crate::http::{JsonClient, PostError, RetryPolicy};
use crate::tokenizer::{tokenize, AnswerUnits, Vocab};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BackendError {
    #[error("backend transport failure: {0}")]
    Transport(String),
    #[error("malformed backend response for request {request_id}: {message}")]
    Malformed { request_id: String, message: String },
    #[error("no answer for claim {claim_id} question {question_index}")]
    MissingKey { claim_id: u64, question_index: u32 },
    #[error("{0}")]
    Script(String),
}

impl BackendError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, BackendError::Transport(_))
    }
}

#[derive(Debug, Error)]
pub enum AnswerError {
    #[error("claim {claim_id} question {question_index}: expected one mask placeholder, found {count}")]
    Placeholder {
        claim_id: u64,
        question_index: u32,
        count: usize,
    },
    #[error("claim {claim_id} question {question_index}: mask token lost during tokenization")]
    MaskLost { claim_id: u64, question_index: u32 },
    #[error("request {request_id}: backend returned no candidates")]
    EmptyCandidates { request_id: String },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskedQuery {
    pub claim_id: u64,
    pub question_index: u32,
    pub tokens: Vec<String>,
    pub mask_position: usize,
    pub top_k: usize,
    pub gold: String,
    pub answer_units: AnswerUnits,
}

impl MaskedQuery {
    /// Identifier used on the wire.
    pub fn request_id(&self) -> String {
        format!("{}:{}", self.claim_id, self.question_index)
    }

    fn key(&self) -> (u64, u32) {
        (self.claim_id, self.question_index)
    }
}

/// Tokenize `question` around its single placeholder.
pub fn build_query(question: &ClozeQuestion, vocab: &Vocab, top_k: usize) -> Result<MaskedQuery, AnswerError> {
    let count = question.question_text.matches(MASK_PLACEHOLDER).count();
    if count != 1 {
        return Err(AnswerError::Placeholder {
            claim_id: question.claim_id,
            question_index: question.question_index,
            count,
        });
    }
    let (left, right) = question
        .question_text
        .split_once(MASK_PLACEHOLDER)
        .expect("placeholder counted above");
    let mut tokens = tokenize(left, vocab).tokens;
    let mask_position = tokens.len();
    tokens.push(vocab.mask_token().to_string());
    tokens.extend(tokenize(right, vocab).tokens);

    let masks = tokens.iter().filter(|t| *t == vocab.mask_token()).count();
    if masks != 1 || tokens[mask_position] != vocab.mask_token() {
        return Err(AnswerError::MaskLost {
            claim_id: question.claim_id,
            question_index: question.question_index,
        });
    }
    Ok(MaskedQuery {
        claim_id: question.claim_id,
        question_index: question.question_index,
        tokens,
        mask_position,
        top_k: top_k.max(1),
        gold: question.answer_text.clone(),
        answer_units: AnswerUnits::for_entity(&question.answer_text, vocab),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub token: String,
    pub score: f64,
}

impl Candidate {
    pub fn new(token: impl Into<String>, score: f64) -> Self {
        Candidate {
            token: token.into(),
            score,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnswerResult {
    pub claim_id: u64,
    pub question_index: u32,
    pub predicted: String,
    pub candidates: Vec<Candidate>,
    pub gold: String,
    pub correct: bool,
}

fn normalize(s: &str) -> String {
    s.trim().to_lowercase()
}

/// Uncased exact match after trimming.
pub fn is_correct(predicted: &str, gold: &str) -> bool {
    normalize(predicted) == normalize(gold)
}

/// A masked-token predictor. `predict` returns one candidate list per query,
/// in query order.
pub trait Backend: Send + Sync {
    fn predict(&self, queries: &[MaskedQuery]) -> Result<Vec<Vec<Candidate>>, BackendError>;

    /// Preferred number of queries per `predict` call.
    fn batch_size(&self) -> usize {
        64
    }
}

fn to_result(query: &MaskedQuery, mut candidates: Vec<Candidate>) -> Result<AnswerResult, AnswerError> {
    candidates.sort_by(|a, b| b.score.total_cmp(&a.score));
    candidates.truncate(query.top_k);
    let predicted = match candidates.first() {
        Some(c) => c.token.clone(),
        None => {
            return Err(AnswerError::EmptyCandidates {
                request_id: query.request_id(),
            })
        }
    };
    Ok(AnswerResult {
        claim_id: query.claim_id,
        question_index: query.question_index,
        correct: is_correct(&predicted, &query.gold),
        predicted,
        candidates,
        gold: query.gold.clone(),
    })
}

/// Answer one query.
pub fn answer(query: &MaskedQuery, backend: &dyn Backend) -> Result<AnswerResult, AnswerError> {
    let mut lists = backend.predict(std::slice::from_ref(query))?;
    to_result(query, lists.pop().unwrap_or_default())
}

/// Answer a batch of queries, preserving order.
pub fn answer_batch(queries: &[MaskedQuery], backend: &dyn Backend) -> Result<Vec<AnswerResult>, AnswerError> {
    let lists = backend.predict(queries)?;
    if lists.len() != queries.len() {
        return Err(BackendError::Script(format!(
            "backend returned {} results for {} queries",
            lists.len(),
            queries.len()
        ))
        .into());
    }
    queries.iter().zip(lists).map(|(q, c)| to_result(q, c)).collect()
}

/// Deterministic backend returning a fixed token per question with score 1.
#[derive(Debug, Clone, Default)]
pub struct OracleBackend {
    key: HashMap<(u64, u32), String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnswerKeyEntry {
    pub claim_id: u64,
    pub question_index: u32,
    pub token: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub claim_id: u64,
    pub question_index: u32,
    pub candidates: Vec<Candidate>,
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, BackendError> {
    let file = File::open(path).map_err(|e| BackendError::Script(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| BackendError::Script(format!("{}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| BackendError::Script(format!("{} line {}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

impl OracleBackend {
    pub fn new(key: HashMap<(u64, u32), String>) -> Self {
        OracleBackend { key }
    }

    /// Key every question to its own gold answer.
    pub fn from_gold(questions: &[ClozeQuestion]) -> Self {
        OracleBackend {
            key: questions
                .iter()
                .map(|q| ((q.claim_id, q.question_index), q.answer_text.clone()))
                .collect(),
        }
    }

    /// Load `{claim_id, question_index, token}` lines.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let entries: Vec<AnswerKeyEntry> = read_jsonl(path.as_ref())?;
        Ok(OracleBackend {
            key: entries
                .into_iter()
                .map(|e| ((e.claim_id, e.question_index), e.token))
                .collect(),
        })
    }

    pub fn key(&self) -> &HashMap<(u64, u32), String> {
        &self.key
    }
}

impl Backend for OracleBackend {
    fn predict(&self, queries: &[MaskedQuery]) -> Result<Vec<Vec<Candidate>>, BackendError> {
        queries
            .iter()
            .map(|q| match self.key.get(&q.key()) {
                Some(token) => Ok(vec![Candidate::new(token.clone(), 1.0)]),
                None => Err(BackendError::MissingKey {
                    claim_id: q.claim_id,
                    question_index: q.question_index,
                }),
            })
            .collect()
    }
}

/// Backend replaying recorded candidate lists.
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    script: HashMap<(u64, u32), Vec<Candidate>>,
}

impl ScriptedBackend {
    pub fn new(script: HashMap<(u64, u32), Vec<Candidate>>) -> Self {
        ScriptedBackend { script }
    }

    /// Load `{claim_id, question_index, candidates: [{token, score}]}` lines.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let entries: Vec<ScriptEntry> = read_jsonl(path.as_ref())?;
        Ok(ScriptedBackend {
            script: entries
                .into_iter()
                .map(|e| ((e.claim_id, e.question_index), e.candidates))
                .collect(),
        })
    }
}

impl Backend for ScriptedBackend {
    fn predict(&self, queries: &[MaskedQuery]) -> Result<Vec<Vec<Candidate>>, BackendError> {
        queries
            .iter()
            .map(|q| {
                self.script.get(&q.key()).cloned().ok_or(BackendError::MissingKey {
                    claim_id: q.claim_id,
                    question_index: q.question_index,
                })
            })
            .collect()
    }
}

/// Request body of the masked-LM service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictRequest {
    pub queries: Vec<WireQuery>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireQuery {
    pub id: String,
    pub tokens: Vec<String>,
    pub mask_position: usize,
    pub top_k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub results: Vec<WireResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireResult {
    pub id: String,
    pub mask_position: usize,
    pub candidates: Vec<Candidate>,
}

impl From<&MaskedQuery> for WireQuery {
    fn from(q: &MaskedQuery) -> Self {
        WireQuery {
            id: q.request_id(),
            tokens: q.tokens.clone(),
            mask_position: q.mask_position,
            top_k: q.top_k,
        }
    }
}

/// Check a response against the request it answers and return candidate
/// lists in request order. Every request id must appear exactly once with
/// the same mask position and at most `top_k` candidates sorted by
/// descending score.
pub fn validate_response(
    request: &PredictRequest,
    response: PredictResponse,
) -> Result<Vec<Vec<Candidate>>, BackendError> {
    let malformed = |id: &str, message: String| BackendError::Malformed {
        request_id: id.to_string(),
        message,
    };
    let mut by_id: HashMap<String, WireResult> = HashMap::with_capacity(response.results.len());
    for result in response.results {
        if let Some(dup) = by_id.insert(result.id.clone(), result) {
            return Err(malformed(&dup.id, "duplicate result id".into()));
        }
    }
    let mut out = Vec::with_capacity(request.queries.len());
    for query in &request.queries {
        let result = by_id
            .remove(&query.id)
            .ok_or_else(|| malformed(&query.id, "no result for request".into()))?;
        if result.mask_position != query.mask_position {
            return Err(malformed(
                &query.id,
                format!(
                    "mask position {} does not match request {}",
                    result.mask_position, query.mask_position
                ),
            ));
        }
        if result.candidates.len() > query.top_k {
            return Err(malformed(
                &query.id,
                format!("{} candidates exceed top_k {}", result.candidates.len(), query.top_k),
            ));
        }
        if result.candidates.windows(2).any(|w| w[0].score < w[1].score) {
            return Err(malformed(&query.id, "candidates not sorted by descending score".into()));
        }
        out.push(result.candidates);
    }
    if let Some(extra) = by_id.into_keys().next() {
        return Err(malformed(&extra, "result for unknown request".into()));
    }
    Ok(out)
}

/// Client for a masked-LM prediction service.
pub struct RemoteBackend {
    client: JsonClient,
    batch_size: usize,
}

impl RemoteBackend {
    pub fn new(endpoint: impl Into<String>, timeout: Duration, batch_size: usize, retry: RetryPolicy) -> Self {
        RemoteBackend {
            client: JsonClient::new(endpoint, timeout, retry),
            batch_size: batch_size.max(1),
        }
    }

    fn predict_chunk(&self, queries: &[MaskedQuery]) -> Result<Vec<Vec<Candidate>>, BackendError> {
        let request = PredictRequest {
            queries: queries.iter().map(WireQuery::from).collect(),
        };
        let first_id = request.queries.first().map(|q| q.id.clone()).unwrap_or_default();
        let body = serde_json::to_string(&request).expect("serializable request");
        let text = self.client.post(&body).map_err(|e| match e {
            PostError::Transport(msg) => BackendError::Transport(msg),
            PostError::Rejected { status, body } => BackendError::Malformed {
                request_id: first_id.clone(),
                message: format!("HTTP {status}: {body}"),
            },
        })?;
        let response: PredictResponse = serde_json::from_str(&text).map_err(|e| BackendError::Malformed {
            request_id: first_id,
            message: e.to_string(),
        })?;
        validate_response(&request, response)
    }
}

impl Backend for RemoteBackend {
    fn predict(&self, queries: &[MaskedQuery]) -> Result<Vec<Vec<Candidate>>, BackendError> {
        let mut out = Vec::with_capacity(queries.len());
        for chunk in queries.chunks(self.batch_size) {
            out.extend(self.predict_chunk(chunk)?);
        }
        Ok(out)
    }

    fn batch_size(&self) -> usize {
        self.batch_size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerStatus {
    AnswerFailed,
}

/// One line of the answers stage file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub claim_id: u64,
    pub question_index: u32,
    pub predicted: String,
    pub gold: String,
    pub correct: bool,
    /// Present only when the claim could not be answered.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<AnswerStatus>,
}

impl AnswerRecord {
    pub fn failed(&self) -> bool {
        self.status == Some(AnswerStatus::AnswerFailed)
    }
}

impl From<&AnswerResult> for AnswerRecord {
    fn from(r: &AnswerResult) -> Self {
        AnswerRecord {
            claim_id: r.claim_id,
            question_index: r.question_index,
            predicted: r.predicted.clone(),
            gold: r.gold.clone(),
            correct: r.correct,
            status: None,
        }
    }
}

impl StageRecord for AnswerRecord {
    const STAGE: Stage = Stage::Answers;

    fn claim_id(&self) -> u64 {
        self.claim_id
    }

    fn sub_index(&self) -> u32 {
        self.question_index
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerOutcome {
    pub records: Vec<AnswerRecord>,
    /// Claims whose backend calls failed after retries.
    pub failed_claims: BTreeSet<u64>,
    /// Questions whose gold answer needed the whole-word fallback.
    pub fallback_questions: usize,
}

/// Answer every question in bounded batches (parallel under the current
/// rayon pool). Transport failures mark every question of the affected
/// claims `answer_failed`; if every batch fails the transport error is
/// returned instead. Other errors abort.
pub fn answer_questions(
    questions: &[ClozeQuestion],
    vocab: &Vocab,
    backend: &dyn Backend,
    top_k: usize,
) -> Result<AnswerOutcome, AnswerError> {
    let queries = questions
        .par_iter()
        .map(|q| build_query(q, vocab, top_k))
        .collect::<Result<Vec<_>, _>>()?;
    let fallback_questions = queries.iter().filter(|q| q.answer_units.used_fallback()).count();

    let batch = backend.batch_size().max(1);
    let outcomes: Vec<Result<Vec<AnswerResult>, AnswerError>> =
        queries.par_chunks(batch).map(|chunk| answer_batch(chunk, backend)).collect();

    let mut records = Vec::with_capacity(queries.len());
    let mut failed_claims = BTreeSet::new();
    let mut last_transport = None;
    let mut any_ok = false;
    for (chunk, outcome) in queries.chunks(batch).zip(outcomes) {
        match outcome {
            Ok(results) => {
                any_ok = true;
                records.extend(results.iter().map(AnswerRecord::from));
            }
            Err(AnswerError::Backend(BackendError::Transport(msg))) => {
                failed_claims.extend(chunk.iter().map(|q| q.claim_id));
                records.extend(chunk.iter().map(|q| AnswerRecord {
                    claim_id: q.claim_id,
                    question_index: q.question_index,
                    predicted: String::new(),
                    gold: q.gold.clone(),
                    correct: false,
                    status: Some(AnswerStatus::AnswerFailed),
                }));
                last_transport = Some(msg);
            }
            Err(other) => return Err(other),
        }
    }
    if !any_ok {
        if let Some(msg) = last_transport {
            return Err(BackendError::Transport(msg).into());
        }
    }
    for record in &mut records {
        if failed_claims.contains(&record.claim_id) && !record.failed() {
            record.predicted.clear();
            record.correct = false;
            record.status = Some(AnswerStatus::AnswerFailed);
        }
    }
    Ok(AnswerOutcome {
        records,
        failed_claims,
        fallback_questions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tagger::EntityType;

    fn vocab() -> Vocab {
        Vocab::new([
            "[UNK]", "[MASK]", "is", "the", "capital", "of", "germany", ".", "berlin", "tara", "##n",
        ])
        .unwrap()
    }

    fn question(claim_id: u64, idx: u32, text: &str, answer: &str) -> ClozeQuestion {
        ClozeQuestion {
            claim_id,
            question_index: idx,
            question_text: text.into(),
            answer_text: answer.into(),
            etype: EntityType::Misc,
            start: 0,
            end: answer.chars().count(),
        }
    }

    #[test]
    fn query_for_berlin() {
        let q = build_query(&question(1, 0, "[MASK] is the capital of Germany.", "Berlin"), &vocab(), 1).unwrap();
        assert_eq!(q.tokens, ["[MASK]", "is", "the", "capital", "of", "germany", "."]);
        assert_eq!(q.mask_position, 0);
        assert!(!q.answer_units.used_fallback());
    }

    #[test]
    fn query_single_mask_only() {
        let q = build_query(&question(1, 0, "[MASK]", "Berlin"), &vocab(), 1).unwrap();
        assert_eq!(q.tokens, ["[MASK]"]);
        assert_eq!(q.mask_position, 0);
        assert!(matches!(
            build_query(&question(1, 0, "[MASK] [MASK]", "x"), &vocab(), 1),
            Err(AnswerError::Placeholder { count: 2, .. })
        ));
        assert!(matches!(
            build_query(&question(1, 0, "no mask", "x"), &vocab(), 1),
            Err(AnswerError::Placeholder { count: 0, .. })
        ));
    }

    #[test]
    fn mid_sentence_mask_and_fallback() {
        let q = build_query(&question(3, 1, "Berlin is the capital of [MASK].", "Taran"), &vocab(), 1).unwrap();
        assert_eq!(q.mask_position, 5);
        assert_eq!(q.tokens[5], "[MASK]");
        assert!(q.answer_units.used_fallback());
    }

    #[test]
    fn correctness_rules() {
        assert!(is_correct("germany", "Germany"));
        assert!(is_correct(" Berlin ", "berlin"));
        assert!(!is_correct("tara", "Taran"));
        assert!(!is_correct("london", "Burnaby"));
    }

    #[test]
    fn multi_piece_gold_judged_incorrect() {
        let v = vocab();
        let q = build_query(&question(5, 0, "[MASK] is the capital of Germany.", "Taran"), &v, 1).unwrap();
        let backend = ScriptedBackend::new(HashMap::from([((5, 0), vec![Candidate::new("tara", 0.9)])]));
        let r = answer(&q, &backend).unwrap();
        assert_eq!(r.predicted, "tara");
        assert!(!r.correct);
    }

    #[test]
    fn oracle_behaviour() {
        let v = vocab();
        let qs = [
            question(1, 0, "[MASK] is the capital of Germany.", "Berlin"),
            question(1, 1, "Berlin is the capital of [MASK].", "Germany"),
        ];
        let gold = OracleBackend::from_gold(&qs);
        for q in &qs {
            let r = answer(&build_query(q, &v, 1).unwrap(), &gold).unwrap();
            assert!(r.correct);
            assert_eq!(r.candidates, vec![Candidate::new(q.answer_text.clone(), 1.0)]);
        }
        let wrong = OracleBackend::new(HashMap::from([((1, 0), "paris".to_string())]));
        let r = answer(&build_query(&qs[0], &v, 1).unwrap(), &wrong).unwrap();
        assert!(!r.correct);
        let err = answer(&build_query(&qs[1], &v, 1).unwrap(), &wrong).unwrap_err();
        assert!(matches!(
            err,
            AnswerError::Backend(BackendError::MissingKey { claim_id: 1, question_index: 1 })
        ));
    }

    #[test]
    fn candidates_sorted_and_empty_rejected() {
        let v = vocab();
        let q = build_query(&question(2, 0, "[MASK] is the capital of Germany.", "Berlin"), &v, 2).unwrap();
        let backend = ScriptedBackend::new(HashMap::from([(
            (2, 0),
            vec![Candidate::new("paris", 0.1), Candidate::new("berlin", 0.7), Candidate::new("rome", 0.2)],
        )]));
        let r = answer(&q, &backend).unwrap();
        assert_eq!(r.predicted, "berlin");
        assert_eq!(r.candidates.len(), 2);
        assert!(r.correct);
        let empty = ScriptedBackend::new(HashMap::from([((2, 0), vec![])]));
        assert!(matches!(answer(&q, &empty), Err(AnswerError::EmptyCandidates { .. })));
    }

    fn wire_request() -> PredictRequest {
        PredictRequest {
            queries: vec![
                WireQuery { id: "1:0".into(), tokens: vec!["[MASK]".into()], mask_position: 0, top_k: 2 },
                WireQuery { id: "1:1".into(), tokens: vec!["a".into(), "[MASK]".into()], mask_position: 1, top_k: 2 },
            ],
        }
    }

    #[test]
    fn response_reordered_by_id() {
        let resp = PredictResponse {
            results: vec![
                WireResult { id: "1:1".into(), mask_position: 1, candidates: vec![Candidate::new("b", 0.5)] },
                WireResult { id: "1:0".into(), mask_position: 0, candidates: vec![Candidate::new("a", 0.5)] },
            ],
        };
        let lists = validate_response(&wire_request(), resp).unwrap();
        assert_eq!(lists[0][0].token, "a");
        assert_eq!(lists[1][0].token, "b");
    }

    #[test]
    fn response_violations() {
        let good = |id: &str, pos| WireResult { id: id.into(), mask_position: pos, candidates: vec![Candidate::new("x", 1.0)] };
        let bad_mask = PredictResponse { results: vec![good("1:0", 0), good("1:1", 0)] };
        assert!(matches!(
            validate_response(&wire_request(), bad_mask),
            Err(BackendError::Malformed { request_id, .. }) if request_id == "1:1"
        ));
        let missing = PredictResponse { results: vec![good("1:0", 0)] };
        assert!(validate_response(&wire_request(), missing).is_err());
        let extra = PredictResponse { results: vec![good("1:0", 0), good("1:1", 1), good("9:9", 0)] };
        assert!(validate_response(&wire_request(), extra).is_err());
        let mut too_many = good("1:0", 0);
        too_many.candidates = vec![Candidate::new("a", 0.3), Candidate::new("b", 0.2), Candidate::new("c", 0.1)];
        assert!(validate_response(&wire_request(), PredictResponse { results: vec![too_many, good("1:1", 1)] }).is_err());
        let mut unsorted = good("1:0", 0);
        unsorted.candidates = vec![Candidate::new("a", 0.1), Candidate::new("b", 0.2)];
        assert!(validate_response(&wire_request(), PredictResponse { results: vec![unsorted, good("1:1", 1)] }).is_err());
    }

    struct Flaky;

    impl Backend for Flaky {
        fn predict(&self, queries: &[MaskedQuery]) -> Result<Vec<Vec<Candidate>>, BackendError> {
            if queries.iter().any(|q| q.claim_id == 2) {
                Err(BackendError::Transport("down".into()))
            } else {
                Ok(queries.iter().map(|q| vec![Candidate::new(q.gold.clone(), 1.0)]).collect())
            }
        }

        fn batch_size(&self) -> usize {
            1
        }
    }

    #[test]
    fn transport_failures_mark_claims() {
        let qs = [
            question(1, 0, "[MASK] is the capital of Germany.", "Berlin"),
            question(2, 0, "[MASK] is the capital of Germany.", "Berlin"),
            question(2, 1, "Berlin is the capital of [MASK].", "Germany"),
        ];
        let out = answer_questions(&qs, &vocab(), &Flaky, 1).unwrap();
        assert_eq!(out.failed_claims, BTreeSet::from([2]));
        assert!(out.records[0].correct && !out.records[0].failed());
        assert!(out.records[1].failed() && out.records[2].failed());

        let all_down = answer_questions(&qs[1..], &vocab(), &Flaky, 1).unwrap_err();
        assert!(matches!(all_down, AnswerError::Backend(BackendError::Transport(_))));
    }

    #[test]
    fn answer_record_format() {
        let r = AnswerRecord {
            claim_id: 1,
            question_index: 0,
            predicted: "berlin".into(),
            gold: "Berlin".into(),
            correct: true,
            status: None,
        };
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"claim_id":1,"question_index":0,"predicted":"berlin","gold":"Berlin","correct":true}"#
        );
    }
}
