//! Claim ingestion and line-delimited stage files.
//!
//! A stage file starts with a header line `{"stage":"<name>","version":1}`
//! followed by one JSON record per line, sorted by claim id.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const STAGE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate claim id {0}")]
    DuplicateId(u64),
    #[error("stage mismatch: expected `{expected}` file, found `{found}`")]
    StageMismatch { expected: Stage, found: Stage },
    #[error("unsupported stage file version {0}")]
    UnsupportedVersion(u32),
    #[error("line {line}: records are not sorted by claim id")]
    Unsorted { line: usize },
}

impl DatasetError {
    fn io(path: &Path, source: io::Error) -> Self {
        DatasetError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn malformed(line: usize, message: impl fmt::Display) -> Self {
        DatasetError::Malformed {
            line,
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GoldLabel {
    #[serde(rename = "SUPPORTS")]
    Supports,
    #[serde(rename = "REFUTES")]
    Refutes,
    #[serde(rename = "NOT ENOUGH INFO")]
    NotEnoughInfo,
}

impl FromStr for GoldLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "SUPPORTS" => Ok(GoldLabel::Supports),
            "REFUTES" => Ok(GoldLabel::Refutes),
            "NOT ENOUGH INFO" => Ok(GoldLabel::NotEnoughInfo),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

impl fmt::Display for GoldLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GoldLabel::Supports => "SUPPORTS",
            GoldLabel::Refutes => "REFUTES",
            GoldLabel::NotEnoughInfo => "NOT ENOUGH INFO",
        })
    }
}

/// One claim as read from the input file. The claim text is kept exactly as
/// given; nothing downstream rewrites it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClaimRecord {
    pub id: u64,
    pub claim: String,
    pub gold_label: GoldLabel,
    pub verifiable: bool,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum VerifiableField {
    Flag(bool),
    Text(String),
}

#[derive(Deserialize)]
struct RawClaim {
    id: u64,
    claim: String,
    label: String,
    verifiable: VerifiableField,
}

fn parse_verifiable(v: VerifiableField) -> Result<bool, String> {
    match v {
        VerifiableField::Flag(b) => Ok(b),
        VerifiableField::Text(s) => match s.as_str() {
            "VERIFIABLE" | "true" | "TRUE" | "True" => Ok(true),
            "NOT VERIFIABLE" | "false" | "FALSE" | "False" => Ok(false),
            other => Err(format!("unknown verifiable value {other:?}")),
        },
    }
}

/// Load claim records from a line-delimited file, in file order.
pub fn load_claims(path: impl AsRef<Path>) -> Result<Vec<ClaimRecord>, DatasetError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| DatasetError::io(path, e))?;
    read_claims(BufReader::new(file)).map_err(|e| match e {
        DatasetError::Io { source, .. } => DatasetError::io(path, source),
        other => other,
    })
}

/// Parse claim records from any buffered reader. Blank lines are skipped;
/// fields other than `id`, `claim`, `label` and `verifiable` are ignored.
pub fn read_claims<R: BufRead>(reader: R) -> Result<Vec<ClaimRecord>, DatasetError> {
    let mut seen = HashSet::new();
    let mut claims = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| DatasetError::io(Path::new("<claims>"), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawClaim =
            serde_json::from_str(&line).map_err(|e| DatasetError::malformed(line_no, e))?;
        if raw.claim.trim().is_empty() {
            return Err(DatasetError::malformed(line_no, "claim text is empty"));
        }
        let gold_label = raw
            .label
            .parse()
            .map_err(|e| DatasetError::malformed(line_no, e))?;
        let verifiable =
            parse_verifiable(raw.verifiable).map_err(|e| DatasetError::malformed(line_no, e))?;
        if !seen.insert(raw.id) {
            return Err(DatasetError::DuplicateId(raw.id));
        }
        claims.push(ClaimRecord {
            id: raw.id,
            claim: raw.claim,
            gold_label,
            verifiable,
        });
    }
    Ok(claims)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Questions,
    Answers,
    Verdicts,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Questions => "questions",
            Stage::Answers => "answers",
            Stage::Verdicts => "verdicts",
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct StageHeader {
    stage: Stage,
    version: u32,
}

/// A record type that can live in a stage file.
pub trait StageRecord: Serialize + DeserializeOwned {
    const STAGE: Stage;

    fn claim_id(&self) -> u64;

    /// Secondary ordering within a claim.
    fn sub_index(&self) -> u32 {
        0
    }

    fn order_key(&self) -> (u64, u32) {
        (self.claim_id(), self.sub_index())
    }
}

fn check_sorted<T: StageRecord>(records: &[T]) -> Result<(), DatasetError> {
    for (i, pair) in records.windows(2).enumerate() {
        if pair[0].order_key() > pair[1].order_key() {
            // header is line 1, records[i + 1] sits on line i + 3
            return Err(DatasetError::Unsorted { line: i + 3 });
        }
    }
    Ok(())
}

/// Write `records` as a stage file, returning the number of records written.
pub fn write_stage<T: StageRecord>(path: impl AsRef<Path>, records: &[T]) -> Result<usize, DatasetError> {
    let path = path.as_ref();
    check_sorted(records)?;
    let file = File::create(path).map_err(|e| DatasetError::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_stage_to(&mut out, records).map_err(|e| DatasetError::io(path, e))?;
    out.flush().map_err(|e| DatasetError::io(path, e))?;
    Ok(records.len())
}

fn write_stage_to<W: Write, T: StageRecord>(out: &mut W, records: &[T]) -> io::Result<()> {
    let header = StageHeader {
        stage: T::STAGE,
        version: STAGE_VERSION,
    };
    serde_json::to_writer(&mut *out, &header)?;
    out.write_all(b"\n")?;
    for record in records {
        serde_json::to_writer(&mut *out, record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Render a stage file in memory.
pub fn stage_to_string<T: StageRecord>(records: &[T]) -> Result<String, DatasetError> {
    check_sorted(records)?;
    let mut buf = Vec::new();
    write_stage_to(&mut buf, records).map_err(|e| DatasetError::io(Path::new("<memory>"), e))?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Read a stage file, checking its header against `T::STAGE`.
pub fn read_stage<T: StageRecord>(path: impl AsRef<Path>) -> Result<Vec<T>, DatasetError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| DatasetError::io(path, e))?;
    parse_stage(BufReader::new(file)).map_err(|e| match e {
        DatasetError::Io { source, .. } => DatasetError::io(path, source),
        other => other,
    })
}

pub fn parse_stage<T: StageRecord, R: BufRead>(reader: R) -> Result<Vec<T>, DatasetError> {
    let mut lines = reader.lines().enumerate();
    let header: StageHeader = match lines.next() {
        Some((_, line)) => {
            let line = line.map_err(|e| DatasetError::io(Path::new("<stage>"), e))?;
            serde_json::from_str(&line)
                .map_err(|e| DatasetError::malformed(1, format!("bad stage header: {e}")))?
        }
        None => return Err(DatasetError::malformed(1, "missing stage header")),
    };
    if header.stage != T::STAGE {
        return Err(DatasetError::StageMismatch {
            expected: T::STAGE,
            found: header.stage,
        });
    }
    if header.version != STAGE_VERSION {
        return Err(DatasetError::UnsupportedVersion(header.version));
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| DatasetError::io(Path::new("<stage>"), e))?;
        if line.is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| DatasetError::malformed(i + 1, e))?;
        records.push(record);
    }
    check_sorted(&records)?;
    Ok(records)
}
