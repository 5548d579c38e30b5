//! Named-entity spans for claims.
//!
//! [`Tagger`] is the seam between claim text and question generation. Two
//! implementations ship: [`RuleTagger`], a gazetteer plus capitalisation and
//! number heuristics good enough for fixtures and small corpora, and
//! [`RemoteTagger`], a client for an external NER service.
//!
//! Offsets are character offsets (not bytes) into the claim text.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::LazyLock;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::ClaimRecord;
use crate::http::{JsonClient, PostError, RetryPolicy};

#[derive(Debug, Error)]
pub enum TagError {
    #[error("cannot tag an empty claim")]
    EmptyClaim,
    #[error("tagger transport failure: {0}")]
    Transport(String),
    #[error("{}invalid entity span: {reason}", claim_prefix(*.claim_id))]
    InvalidSpan { claim_id: Option<u64>, reason: String },
    #[error("malformed tagger response: {0}")]
    Malformed(String),
    #[error("gazetteer line {line}: {message}")]
    Gazetteer { line: usize, message: String },
    #[error("gazetteer {path}: {message}")]
    GazetteerIo { path: String, message: String },
}

fn claim_prefix(id: Option<u64>) -> String {
    id.map(|id| format!("claim {id}: ")).unwrap_or_default()
}

impl TagError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, TagError::Transport(_))
    }

    fn for_claim(self, id: u64) -> Self {
        match self {
            TagError::InvalidSpan { reason, .. } => TagError::InvalidSpan {
                claim_id: Some(id),
                reason,
            },
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EntityType {
    Person,
    Location,
    Organization,
    Date,
    Number,
    Misc,
}

impl EntityType {
    /// Map an external type name onto the closed type set. Anything not
    /// recognised becomes `MISC`.
    pub fn from_external(name: &str) -> Self {
        name.parse().unwrap_or(EntityType::Misc)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            EntityType::Person => "PERSON",
            EntityType::Location => "LOCATION",
            EntityType::Organization => "ORGANIZATION",
            EntityType::Date => "DATE",
            EntityType::Number => "NUMBER",
            EntityType::Misc => "MISC",
        }
    }
}

impl FromStr for EntityType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "PERSON" => Ok(EntityType::Person),
            "LOCATION" => Ok(EntityType::Location),
            "ORGANIZATION" => Ok(EntityType::Organization),
            "DATE" => Ok(EntityType::Date),
            "NUMBER" => Ok(EntityType::Number),
            "MISC" => Ok(EntityType::Misc),
            _ => Err(format!("unknown entity type {s:?}")),
        }
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntitySpan {
    pub text: String,
    pub etype: EntityType,
    /// Inclusive character offset.
    pub start: usize,
    /// Exclusive character offset.
    pub end: usize,
}

/// Slice `text` by character offsets.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut indices = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let begin = indices.by_ref().nth(start)?;
    let finish = if end == start { begin } else { indices.nth(end - start - 1)? };
    Some(&text[begin..finish])
}

/// Check spans against a claim: in bounds, non-empty, text matching the
/// claim exactly, sorted and non-overlapping.
pub fn validate_spans(claim: &str, spans: &[EntitySpan]) -> Result<(), TagError> {
    let len = claim.chars().count();
    let invalid = |reason: String| TagError::InvalidSpan { claim_id: None, reason };
    let mut prev_end = 0;
    for (i, span) in spans.iter().enumerate() {
        if span.start >= span.end || span.end > len {
            return Err(invalid(format!(
                "span {i} ({}, {}) out of bounds for claim of length {len}",
                span.start, span.end
            )));
        }
        let actual = char_slice(claim, span.start, span.end).unwrap_or_default();
        if actual != span.text {
            return Err(invalid(format!(
                "span {i} text {:?} does not match claim text {actual:?}",
                span.text
            )));
        }
        if i > 0 && span.start < prev_end {
            return Err(invalid(format!("span {i} overlaps or precedes the previous span")));
        }
        prev_end = span.end;
    }
    Ok(())
}

pub trait Tagger: Send + Sync {
    fn tag(&self, claim: &str) -> Result<Vec<EntitySpan>, TagError>;
}

/// Tag one claim record, attaching the claim id to span errors.
pub fn tag_record(tagger: &dyn Tagger, record: &ClaimRecord) -> Result<Vec<EntitySpan>, TagError> {
    tagger.tag(&record.claim).map_err(|e| e.for_claim(record.id))
}

/// Surface form to entity type.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Gazetteer {
    entries: BTreeMap<String, EntityType>,
}

impl Gazetteer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, etype: EntityType) -> Result<(), TagError> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(TagError::Gazetteer {
                line: 0,
                message: "empty gazetteer key".into(),
            });
        }
        self.entries.insert(name, etype);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<EntityType> {
        self.entries.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, EntityType)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Parse `surface<TAB>TYPE` lines. `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, TagError> {
        let mut gazetteer = Gazetteer::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, etype) = line.rsplit_once('\t').ok_or_else(|| TagError::Gazetteer {
                line: line_no,
                message: "expected `surface<TAB>TYPE`".into(),
            })?;
            let etype = etype.trim().parse().map_err(|message| TagError::Gazetteer {
                line: line_no,
                message,
            })?;
            gazetteer.insert(name, etype).map_err(|_| TagError::Gazetteer {
                line: line_no,
                message: "empty gazetteer key".into(),
            })?;
        }
        Ok(gazetteer)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TagError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| TagError::GazetteerIo {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }
}

impl<S: Into<String>> FromIterator<(S, EntityType)> for Gazetteer {
    fn from_iter<I: IntoIterator<Item = (S, EntityType)>>(iter: I) -> Self {
        let mut g = Gazetteer::new();
        for (name, etype) in iter {
            let name = name.into();
            if !name.trim().is_empty() {
                g.entries.insert(name, etype);
            }
        }
        g
    }
}

/// Closed-class words that commonly start a sentence capitalised.
const SENTENCE_STARTERS: &[&str] = &[
    "A", "An", "The", "This", "That", "These", "Those", "It", "Its", "He", "She", "His", "Her",
    "They", "Their", "We", "Our", "I", "You", "Your", "There", "Here", "In", "On", "At", "Of", "For",
    "From", "By", "With", "To", "As", "After", "Before", "During", "Since", "Until", "And", "But",
    "Or", "If", "When", "While", "Who", "What", "Which", "Where", "Why", "How", "Some", "Many",
    "Most", "All", "No", "Not", "One", "Every", "Each", "Is", "Was", "Are", "Were", "Be", "Been",
    "Has", "Had", "Have", "Do", "Does", "Did", "Can", "Could", "Will", "Would", "Should", "May",
    "Might", "Only", "Also", "Both", "Either", "Neither", "Several", "Among", "Although",
];

const MONTHS: &str = "January|February|March|April|May|June|July|August|September|October|November|December";

static DATE_PATTERNS: LazyLock<Vec<Regex>> = LazyLock::new(|| {
    [
        // March 5, 1963 / March 5 1963 / March 5th
        format!(r"\b(?:{MONTHS})\s+\d{{1,2}}(?:st|nd|rd|th)?(?:,?\s+\d{{4}})?\b"),
        // 5 March 1963 / 5th of March
        format!(r"\b\d{{1,2}}(?:st|nd|rd|th)?\s+(?:of\s+)?(?:{MONTHS})(?:,?\s+\d{{4}})?\b"),
        // March 1963
        format!(r"\b(?:{MONTHS})\s+\d{{4}}\b"),
        // years and decades
        r"\b(?:1\d{3}|20\d{2})s?\b".to_string(),
    ]
    .iter()
    .map(|p| Regex::new(p).expect("static date pattern"))
    .collect()
});

static NUMBER_PATTERN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b\d+(?:[.,]\d+)*\b").expect("static number pattern"));

/// Candidate source, in tie-break priority order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Source {
    Gazetteer,
    Date,
    Number,
    Capitalized,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    start: usize,
    end: usize,
    etype: EntityType,
    source: Source,
}

#[derive(Debug, Clone, Copy)]
struct Word {
    start: usize,
    end: usize,
    sentence_initial: bool,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

fn is_joiner(c: char) -> bool {
    matches!(c, '-' | '\'' | '\u{2019}')
}

fn split_words(chars: &[char]) -> Vec<Word> {
    let mut words = Vec::new();
    let mut i = 0;
    let mut at_sentence_start = true;
    while i < chars.len() {
        let c = chars[i];
        if is_word_char(c) {
            let start = i;
            while i < chars.len()
                && (is_word_char(chars[i])
                    || (is_joiner(chars[i]) && i + 1 < chars.len() && is_word_char(chars[i + 1])))
            {
                i += 1;
            }
            words.push(Word {
                start,
                end: i,
                sentence_initial: at_sentence_start,
            });
            at_sentence_start = false;
        } else {
            if matches!(c, '.' | '!' | '?') {
                at_sentence_start = true;
            }
            i += 1;
        }
    }
    words
}

fn char_to_byte_offsets(text: &str) -> Vec<usize> {
    text.char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(text.len()))
        .collect()
}

/// Gazetteer and heuristic tagger.
///
/// Emits gazetteer matches, digit-bearing dates and numbers, and maximal
/// runs of capitalised words. A capitalised word at the start of a sentence
/// is dropped from its run when it is a common closed-class word (`The`,
/// `He`, `In`, ...) that is not itself in the gazetteer. Overlapping
/// candidates are resolved leftmost-longest.
#[derive(Debug, Clone, Default)]
pub struct RuleTagger {
    gazetteer: Gazetteer,
    by_first_word: HashMap<String, Vec<(Vec<char>, EntityType)>>,
    capitalized_runs: bool,
}

impl RuleTagger {
    pub fn new(gazetteer: Gazetteer) -> Self {
        let mut by_first_word: HashMap<String, Vec<(Vec<char>, EntityType)>> = HashMap::new();
        for (name, etype) in gazetteer.iter() {
            let chars: Vec<char> = name.chars().collect();
            let first: String = chars.iter().take_while(|c| is_word_char(**c)).collect();
            by_first_word.entry(first).or_default().push((chars, etype));
        }
        for entries in by_first_word.values_mut() {
            entries.sort_by_key(|e| std::cmp::Reverse(e.0.len()));
        }
        RuleTagger {
            gazetteer,
            by_first_word,
            capitalized_runs: true,
        }
    }

    /// Disable the capitalised-run heuristic, leaving only gazetteer and
    /// date/number matches.
    pub fn without_capitalized_runs(mut self) -> Self {
        self.capitalized_runs = false;
        self
    }

    pub fn gazetteer(&self) -> &Gazetteer {
        &self.gazetteer
    }

    fn gazetteer_candidates(&self, chars: &[char], words: &[Word], out: &mut Vec<Candidate>) {
        for w in words {
            let first: String = chars[w.start..w.end].iter().collect();
            let Some(entries) = self.by_first_word.get(&first) else {
                continue;
            };
            for (name, etype) in entries {
                let end = w.start + name.len();
                if end > chars.len() || chars[w.start..end] != name[..] {
                    continue;
                }
                if end < chars.len() && is_word_char(chars[end]) {
                    continue;
                }
                out.push(Candidate {
                    start: w.start,
                    end,
                    etype: *etype,
                    source: Source::Gazetteer,
                });
            }
        }
    }

    fn capitalized_candidates(&self, chars: &[char], words: &[Word], out: &mut Vec<Candidate>) {
        let is_cap = |w: &Word| chars[w.start].is_uppercase();
        let text = |w: &Word| chars[w.start..w.end].iter().collect::<String>();
        let mut i = 0;
        while i < words.len() {
            if !is_cap(&words[i]) {
                i += 1;
                continue;
            }
            let mut run_start = i;
            let mut j = i;
            let mut end = possessive_trim(chars, &words[j]);
            while end == words[j].end
                && j + 1 < words.len()
                && is_cap(&words[j + 1])
                && !words[j + 1].sentence_initial
                && chars[words[j].end..words[j + 1].start].iter().all(|c| *c == ' ')
                && words[j + 1].start > words[j].end
            {
                j += 1;
                end = possessive_trim(chars, &words[j]);
            }
            let first = &words[run_start];
            if first.sentence_initial {
                let word = text(first);
                if SENTENCE_STARTERS.contains(&word.as_str()) && self.gazetteer.get(&word).is_none() {
                    run_start += 1;
                }
            }
            if run_start <= j {
                out.push(Candidate {
                    start: words[run_start].start,
                    end,
                    etype: EntityType::Misc,
                    source: Source::Capitalized,
                });
            }
            i = j + 1;
        }
    }
}

fn possessive_trim(chars: &[char], w: &Word) -> usize {
    let len = w.end - w.start;
    if len > 2 && matches!(chars[w.end - 2], '\'' | '\u{2019}') && chars[w.end - 1] == 's' {
        w.end - 2
    } else {
        w.end
    }
}

fn regex_candidates(text: &str, byte_to_char: &HashMap<usize, usize>, out: &mut Vec<Candidate>) {
    for pattern in DATE_PATTERNS.iter() {
        for m in pattern.find_iter(text) {
            out.push(Candidate {
                start: byte_to_char[&m.start()],
                end: byte_to_char[&m.end()],
                etype: EntityType::Date,
                source: Source::Date,
            });
        }
    }
    for m in NUMBER_PATTERN.find_iter(text) {
        out.push(Candidate {
            start: byte_to_char[&m.start()],
            end: byte_to_char[&m.end()],
            etype: EntityType::Number,
            source: Source::Number,
        });
    }
}

fn resolve_leftmost_longest(mut candidates: Vec<Candidate>) -> Vec<Candidate> {
    candidates.sort_by(|a, b| {
        a.start
            .cmp(&b.start)
            .then((b.end - b.start).cmp(&(a.end - a.start)))
            .then(a.source.cmp(&b.source))
    });
    let mut kept: Vec<Candidate> = Vec::new();
    for c in candidates {
        if kept.last().is_none_or(|last| c.start >= last.end) {
            kept.push(c);
        }
    }
    kept
}

impl Tagger for RuleTagger {
    fn tag(&self, claim: &str) -> Result<Vec<EntitySpan>, TagError> {
        if claim.is_empty() {
            return Err(TagError::EmptyClaim);
        }
        let chars: Vec<char> = claim.chars().collect();
        let words = split_words(&chars);
        let offsets = char_to_byte_offsets(claim);
        let byte_to_char: HashMap<usize, usize> =
            offsets.iter().enumerate().map(|(c, b)| (*b, c)).collect();

        let mut candidates = Vec::new();
        self.gazetteer_candidates(&chars, &words, &mut candidates);
        regex_candidates(claim, &byte_to_char, &mut candidates);
        if self.capitalized_runs {
            self.capitalized_candidates(&chars, &words, &mut candidates);
        }

        Ok(resolve_leftmost_longest(candidates)
            .into_iter()
            .map(|c| EntitySpan {
                text: claim[offsets[c.start]..offsets[c.end]].to_string(),
                etype: c.etype,
                start: c.start,
                end: c.end,
            })
            .collect())
    }
}

/// Tag `claim` with a [`RuleTagger`] over `gazetteer`.
pub fn rule_tag(claim: &str, gazetteer: &Gazetteer) -> Vec<EntitySpan> {
    RuleTagger::new(gazetteer.clone()).tag(claim).unwrap_or_default()
}

#[derive(Serialize)]
struct TagRequest<'a> {
    text: &'a str,
}

/// One entity as it appears on the wire.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireEntity {
    pub text: String,
    #[serde(rename = "type")]
    pub etype: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagResponse {
    pub entities: Vec<WireEntity>,
}

/// Client for an external NER service: one claim per POST request
/// `{"text": ...}`, answered with `{"entities": [...]}`.
pub struct RemoteTagger {
    client: JsonClient,
}

impl RemoteTagger {
    pub fn new(endpoint: impl Into<String>, timeout: Duration, retry: RetryPolicy) -> Self {
        RemoteTagger {
            client: JsonClient::new(endpoint, timeout, retry),
        }
    }

    pub fn endpoint(&self) -> &str {
        self.client.endpoint()
    }
}

/// Convert a wire response into validated spans.
pub fn spans_from_response(claim: &str, response: TagResponse) -> Result<Vec<EntitySpan>, TagError> {
    let mut spans: Vec<EntitySpan> = response
        .entities
        .into_iter()
        .map(|e| EntitySpan {
            etype: EntityType::from_external(&e.etype),
            text: e.text,
            start: e.start,
            end: e.end,
        })
        .collect();
    spans.sort_by_key(|s| (s.start, s.end));
    validate_spans(claim, &spans)?;
    Ok(spans)
}

impl Tagger for RemoteTagger {
    fn tag(&self, claim: &str) -> Result<Vec<EntitySpan>, TagError> {
        if claim.is_empty() {
            return Err(TagError::EmptyClaim);
        }
        let body = serde_json::to_string(&TagRequest { text: claim }).expect("serializable request");
        let text = self.client.post(&body).map_err(|e| match e {
            PostError::Transport(msg) => TagError::Transport(msg),
            PostError::Rejected { status, body } => TagError::Malformed(format!("HTTP {status}: {body}")),
        })?;
        let response: TagResponse =
            serde_json::from_str(&text).map_err(|e| TagError::Malformed(e.to_string()))?;
        spans_from_response(claim, response)
    }
}
