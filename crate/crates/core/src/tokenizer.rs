//! WordPiece tokenization and the whole-word fallback.
//!
//! The pipeline is uncased: [`basic_tokenize`] lowercases and strips accents
//! before [`wordpiece`] splits each word by greedy longest-prefix match.
//! When a masked entity is not a single in-vocabulary piece, the entity is
//! kept as whole words by [`fallback_tokenize`] instead.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use thiserror::Error;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Words longer than this many characters become the unknown token.
pub const MAX_WORD_CHARS: usize = 100;

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("vocab {path}: {message}")]
    Io { path: String, message: String },
    #[error("vocab line {line}: duplicate token {token:?}")]
    Duplicate { token: String, line: usize },
    #[error("vocab line {line}: empty token")]
    EmptyToken { line: usize },
    #[error("vocab is missing special token {0:?}")]
    MissingSpecial(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    entries: Vec<String>,
    index: HashMap<String, u32>,
    unk_token: String,
    mask_token: String,
    continuation_prefix: String,
}

impl Vocab {
    /// Vocabulary with the default `[UNK]`, `[MASK]` and `##` conventions.
    pub fn new<I, S>(tokens: I) -> Result<Self, VocabError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::with_specials(tokens, "[UNK]", "[MASK]", "##")
    }

    pub fn with_specials<I, S>(
        tokens: I,
        unk_token: &str,
        mask_token: &str,
        continuation_prefix: &str,
    ) -> Result<Self, VocabError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let entries: Vec<String> = tokens.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(entries.len());
        for (i, token) in entries.iter().enumerate() {
            if token.is_empty() {
                return Err(VocabError::EmptyToken { line: i + 1 });
            }
            if index.insert(token.clone(), i as u32).is_some() {
                return Err(VocabError::Duplicate {
                    token: token.clone(),
                    line: i + 1,
                });
            }
        }
        for special in [unk_token, mask_token] {
            if !index.contains_key(special) {
                return Err(VocabError::MissingSpecial(special.to_string()));
            }
        }
        Ok(Vocab {
            entries,
            index,
            unk_token: unk_token.to_string(),
            mask_token: mask_token.to_string(),
            continuation_prefix: continuation_prefix.to_string(),
        })
    }

    /// One token per line; the line number (from 0) is the token id.
    pub fn parse(text: &str) -> Result<Self, VocabError> {
        Self::new(text.lines())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, VocabError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| VocabError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.entries.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn unk_token(&self) -> &str {
        &self.unk_token
    }

    pub fn mask_token(&self) -> &str {
        &self.mask_token
    }

    pub fn continuation_prefix(&self) -> &str {
        &self.continuation_prefix
    }
}

fn is_punctuation(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace() && !c.is_control()
}

fn split_words(text: &str, normalize: impl Fn(&str) -> String) -> Vec<String> {
    let mut words = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_whitespace() || c.is_control() {
            if !current.is_empty() {
                words.push(normalize(&std::mem::take(&mut current)));
            }
        } else if is_punctuation(c) {
            if !current.is_empty() {
                words.push(normalize(&std::mem::take(&mut current)));
            }
            words.push(normalize(&c.to_string()));
        } else {
            current.push(c);
        }
    }
    if !current.is_empty() {
        words.push(normalize(&current));
    }
    words.retain(|w| !w.is_empty());
    words
}

fn uncase(word: &str) -> String {
    word.to_lowercase().nfd().filter(|c| !is_combining_mark(*c)).collect()
}

/// Lowercase, strip accents, split on whitespace and punctuation.
pub fn basic_tokenize(text: &str) -> Vec<String> {
    split_words(text, uncase)
}

/// Same segmentation as [`basic_tokenize`] but with the original casing.
pub fn fallback_tokenize(text: &str) -> Vec<String> {
    split_words(text, str::to_string)
}

/// Greedy longest-prefix WordPiece split of one word.
pub fn wordpiece(word: &str, vocab: &Vocab) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    if chars.len() > MAX_WORD_CHARS {
        return vec![vocab.unk_token().to_string()];
    }
    let mut pieces = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let mut end = chars.len();
        let mut found = None;
        while end > start {
            let mut candidate: String = chars[start..end].iter().collect();
            if start > 0 {
                candidate.insert_str(0, vocab.continuation_prefix());
            }
            if vocab.contains(&candidate) {
                found = Some(candidate);
                break;
            }
            end -= 1;
        }
        match found {
            Some(piece) => pieces.push(piece),
            None => return vec![vocab.unk_token().to_string()],
        }
        start = end;
    }
    pieces
}

/// True when `entity_text` is one word that WordPiece keeps as one known piece.
pub fn is_single_piece(entity_text: &str, vocab: &Vocab) -> bool {
    let words = basic_tokenize(entity_text);
    if words.len() != 1 {
        return false;
    }
    let pieces = wordpiece(&words[0], vocab);
    pieces.len() == 1 && pieces[0] != vocab.unk_token()
}

/// Tokens of a text plus the token range each basic word occupies.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    /// `(start, end)` token indices, end exclusive, one entry per word.
    pub word_boundaries: Vec<(usize, usize)>,
}

impl TokenSequence {
    pub fn push_word(&mut self, pieces: Vec<String>) {
        let start = self.tokens.len();
        self.tokens.extend(pieces);
        self.word_boundaries.push((start, self.tokens.len()));
    }
}

pub fn tokenize(text: &str, vocab: &Vocab) -> TokenSequence {
    let mut seq = TokenSequence::default();
    for word in basic_tokenize(text) {
        seq.push_word(wordpiece(&word, vocab));
    }
    seq
}

/// How a gold answer is segmented.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnswerUnits {
    /// The entity is a single vocabulary piece.
    Piece(String),
    /// WordPiece failed on the entity; whole words from the fallback tokenizer.
    Fallback(Vec<String>),
}

impl AnswerUnits {
    pub fn for_entity(entity_text: &str, vocab: &Vocab) -> Self {
        if is_single_piece(entity_text, vocab) {
            let word = basic_tokenize(entity_text).remove(0);
            AnswerUnits::Piece(word)
        } else {
            AnswerUnits::Fallback(fallback_tokenize(entity_text))
        }
    }

    pub fn used_fallback(&self) -> bool {
        matches!(self, AnswerUnits::Fallback(_))
    }
}
