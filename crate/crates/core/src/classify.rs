//! Correctness scores, threshold labelling and evaluation.
//!
//! A claim's score is `n_correct / n_questions`, held as an exact rational.
//! It is labelled `SUPPORTS` when the score is at least the threshold and
//! `MANUAL_REVIEW` otherwise. Thresholds are exact too, so `2/3` against
//! `0.67` and `3/4` against `0.76` come out `MANUAL_REVIEW`, with no float
//! rounding involved.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::answerer::{AnswerRecord, AnswerResult};
use crate::clozegen::{conversion_stats, ClozeQuestion, ConversionStats};
use crate::dataset::{ClaimRecord, GoldLabel, Stage, StageRecord};
use crate::percent::Percentage;

pub type Score = Ratio<u64>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClassifyError {
    #[error("cannot score a claim with no answers")]
    NoAnswers,
    #[error("answers for claims {0} and {1} passed as one claim")]
    MixedClaims(u64, u64),
    #[error("invalid threshold {0:?}: {1}")]
    InvalidPhi(String, String),
    #[error("unknown objective {0:?}")]
    InvalidObjective(String),
    #[error("threshold derivation needs at least one gold SUPPORTS and one other claim")]
    DegenerateGold,
    #[error("no threshold satisfies objective {0}")]
    Unsatisfiable(Objective),
    #[error("label accuracy undefined: no scored gold SUPPORTS claims")]
    EmptyDenominator,
    #[error("claim {0} has no gold label")]
    MissingGold(u64),
    #[error("claim {claim_id} question {question_index}: {message}")]
    Inconsistent {
        claim_id: u64,
        question_index: u32,
        message: String,
    },
    #[error("verdict for claim {0} is inconsistent")]
    BadVerdict(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "SUPPORTS")]
    Supports,
    #[serde(rename = "MANUAL_REVIEW")]
    ManualReview,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Supports => "SUPPORTS",
            Label::ManualReview => "MANUAL_REVIEW",
        })
    }
}

fn format_ratio(r: Ratio<u64>) -> String {
    // terminating decimals print as decimals, everything else as num/den
    let mut den = *r.denom();
    let (mut twos, mut fives) = (0u32, 0u32);
    while den.is_multiple_of(2) {
        den /= 2;
        twos += 1;
    }
    while den.is_multiple_of(5) {
        den /= 5;
        fives += 1;
    }
    let places = twos.max(fives);
    if den != 1 || places > 18 {
        return format!("{}/{}", r.numer(), r.denom());
    }
    let scale = 10u64.pow(places);
    let scaled = (r * Ratio::from_integer(scale)).to_integer();
    if places == 0 {
        return scaled.to_string();
    }
    format!("{}.{:0width$}", scaled / scale, scaled % scale, width = places as usize)
}

fn parse_unit_ratio(s: &str) -> Result<Ratio<u64>, String> {
    let s = s.trim();
    let fraction = s.split_once('/').or_else(|| s.split_once("-of-"));
    let value = if let Some((num, den)) = fraction {
        let num: u64 = num.trim().parse().map_err(|_| "bad numerator".to_string())?;
        let den: u64 = den.trim().parse().map_err(|_| "bad denominator".to_string())?;
        if den == 0 {
            return Err("zero denominator".into());
        }
        Ratio::new(num, den)
    } else {
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        let digits_ok = |d: &str| d.chars().all(|c| c.is_ascii_digit());
        if (int.is_empty() && frac.is_empty()) || !digits_ok(int) || !digits_ok(frac) || frac.len() > 18 {
            return Err("expected a decimal such as 0.76 or a fraction such as 3/4".into());
        }
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| "integer part too large".to_string())? };
        let scale = 10u64.pow(frac.len() as u32);
        let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| "bad fraction".to_string())? };
        let numer = int
            .checked_mul(scale)
            .and_then(|v| v.checked_add(frac))
            .ok_or_else(|| "value too large".to_string())?;
        Ratio::new(numer, scale)
    };
    if value > Ratio::from_integer(1) {
        return Err("must lie in [0, 1]".into());
    }
    Ok(value)
}

/// Classification threshold, an exact rational in `[0, 1]`.
///
/// Parses decimals (`0.76`) exactly, and also `k/N` or `k-of-N` for a
/// "k correct out of N" reading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Phi(Ratio<u64>);

impl Phi {
    pub fn new(value: Ratio<u64>) -> Option<Self> {
        (value <= Ratio::from_integer(1)).then_some(Phi(value))
    }

    pub fn value(&self) -> Ratio<u64> {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

impl FromStr for Phi {
    type Err = ClassifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_unit_ratio(s)
            .map(Phi)
            .map_err(|why| ClassifyError::InvalidPhi(s.to_string(), why))
    }
}

impl fmt::Display for Phi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_ratio(self.0))
    }
}

impl Serialize for Phi {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Phi {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub const STRICT_PHI: &str = "0.76";
pub const LENIENT_PHI: &str = "0.67";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdOrigin {
    Preset,
    Derived,
}

impl fmt::Display for ThresholdOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ThresholdOrigin::Preset => "preset",
            ThresholdOrigin::Derived => "derived",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Threshold {
    pub phi: Phi,
    pub origin: ThresholdOrigin,
}

impl Threshold {
    pub fn preset(phi: Phi) -> Self {
        Threshold {
            phi,
            origin: ThresholdOrigin::Preset,
        }
    }

    /// φ = 0.76.
    pub fn strict() -> Self {
        Self::preset(STRICT_PHI.parse().expect("valid preset"))
    }

    /// φ = 0.67.
    pub fn lenient() -> Self {
        Self::preset(LENIENT_PHI.parse().expect("valid preset"))
    }
}

/// Objective for picking a threshold off the precision-recall curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    MaxF1,
    /// Highest recall among thresholds with at least this precision.
    PrecisionAtLeast(Ratio<u64>),
    /// Highest precision among thresholds with at least this recall.
    RecallAtLeast(Ratio<u64>),
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::MaxF1 => f.write_str("max_f1"),
            Objective::PrecisionAtLeast(p) => write!(f, "precision_at_least({})", format_ratio(*p)),
            Objective::RecallAtLeast(r) => write!(f, "recall_at_least({})", format_ratio(*r)),
        }
    }
}

impl FromStr for Objective {
    type Err = ClassifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let bad = || ClassifyError::InvalidObjective(s.to_string());
        if t == "max_f1" {
            return Ok(Objective::MaxF1);
        }
        let arg = |prefix: &str, op: &str| -> Option<Result<Ratio<u64>, ClassifyError>> {
            let inner = t
                .strip_prefix(&format!("{prefix}_at_least("))
                .and_then(|r| r.strip_suffix(')'))
                .or_else(|| t.strip_prefix(&format!("{prefix}{op}")))?;
            Some(parse_unit_ratio(inner).map_err(|_| bad()))
        };
        if let Some(p) = arg("precision", ">=") {
            return p.map(Objective::PrecisionAtLeast);
        }
        if let Some(r) = arg("recall", ">=") {
            return r.map(Objective::RecallAtLeast);
        }
        Err(bad())
    }
}

/// Threshold setting from configuration: a fixed value or a derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdSpec {
    Fixed(Threshold),
    Derive(Objective),
}

impl FromStr for ThresholdSpec {
    type Err = ClassifyError;

    /// `strict`, `lenient`, `0.76`, `3/4`, `3-of-4`, `derive(max_f1)`,
    /// `derive(precision_at_least(0.9))`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        match t {
            "strict" => return Ok(ThresholdSpec::Fixed(Threshold::strict())),
            "lenient" => return Ok(ThresholdSpec::Fixed(Threshold::lenient())),
            _ => {}
        }
        if let Some(inner) = t.strip_prefix("derive(").and_then(|r| r.strip_suffix(')')) {
            return inner.parse().map(ThresholdSpec::Derive);
        }
        t.parse().map(|phi| ThresholdSpec::Fixed(Threshold::preset(phi)))
    }
}

impl fmt::Display for ThresholdSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdSpec::Fixed(t) => write!(f, "{}", t.phi),
            ThresholdSpec::Derive(o) => write!(f, "derive({o})"),
        }
    }
}

/// Anything carrying a per-question correctness judgment.
pub trait Judged {
    fn claim_id(&self) -> u64;
    fn is_correct(&self) -> bool;
}

impl Judged for AnswerResult {
    fn claim_id(&self) -> u64 {
        self.claim_id
    }
    fn is_correct(&self) -> bool {
        self.correct
    }
}

impl Judged for AnswerRecord {
    fn claim_id(&self) -> u64 {
        self.claim_id
    }
    fn is_correct(&self) -> bool {
        self.correct
    }
}

/// `(n_correct, n_questions, n_correct / n_questions)` for one claim.
pub fn score_claim<T: Judged>(answers: &[T]) -> Result<(u32, u32, Score), ClassifyError> {
    let first = answers.first().ok_or(ClassifyError::NoAnswers)?;
    if let Some(other) = answers.iter().find(|a| a.claim_id() != first.claim_id()) {
        return Err(ClassifyError::MixedClaims(first.claim_id(), other.claim_id()));
    }
    let n = answers.len() as u32;
    let correct = answers.iter().filter(|a| a.is_correct()).count() as u32;
    Ok((correct, n, Ratio::new(correct as u64, n as u64)))
}

pub fn assign_label(score: Score, phi: Phi) -> Label {
    if score >= phi.0 {
        Label::Supports
    } else {
        Label::ManualReview
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "VerdictLine", try_from = "VerdictLine")]
pub struct Verdict {
    pub claim_id: u64,
    pub n_correct: u32,
    pub n_questions: u32,
    pub score: Score,
    pub label: Label,
}

impl Verdict {
    pub fn new(claim_id: u64, n_correct: u32, n_questions: u32, phi: Phi) -> Self {
        let score = Ratio::new(n_correct as u64, n_questions as u64);
        Verdict {
            claim_id,
            n_correct,
            n_questions,
            score,
            label: assign_label(score, phi),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct VerdictLine {
    claim_id: u64,
    n_correct: u32,
    n_questions: u32,
    score_num: u64,
    score_den: u64,
    label: Label,
}

impl From<Verdict> for VerdictLine {
    fn from(v: Verdict) -> Self {
        VerdictLine {
            claim_id: v.claim_id,
            n_correct: v.n_correct,
            n_questions: v.n_questions,
            score_num: *v.score.numer(),
            score_den: *v.score.denom(),
            label: v.label,
        }
    }
}

impl TryFrom<VerdictLine> for Verdict {
    type Error = ClassifyError;

    fn try_from(line: VerdictLine) -> Result<Self, Self::Error> {
        let bad = || ClassifyError::BadVerdict(line.claim_id);
        if line.n_questions == 0 || line.n_correct > line.n_questions || line.score_den == 0 {
            return Err(bad());
        }
        let score = Ratio::new(line.n_correct as u64, line.n_questions as u64);
        if score != Ratio::new(line.score_num, line.score_den) {
            return Err(bad());
        }
        Ok(Verdict {
            claim_id: line.claim_id,
            n_correct: line.n_correct,
            n_questions: line.n_questions,
            score,
            label: line.label,
        })
    }
}

impl StageRecord for Verdict {
    const STAGE: Stage = Stage::Verdicts;

    fn claim_id(&self) -> u64 {
        self.claim_id
    }
}

/// A point on the threshold sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Cutoff {
    At(Score),
    /// Above every achievable score: nothing is labelled `SUPPORTS`.
    AboveMax,
}

impl Cutoff {
    fn admits(&self, score: Score) -> bool {
        match self {
            Cutoff::At(phi) => score >= *phi,
            Cutoff::AboveMax => false,
        }
    }
}

impl fmt::Display for Cutoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cutoff::At(r) => f.write_str(&format_ratio(*r)),
            Cutoff::AboveMax => f.write_str(">1"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrPoint {
    pub cutoff: Cutoff,
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub supports_count: u64,
    /// 1 when nothing is predicted positive.
    pub precision: Ratio<u64>,
    pub recall: Ratio<u64>,
    pub f1: Ratio<u64>,
}

impl Serialize for PrPoint {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let f = |r: Ratio<u64>| r.to_f64().unwrap_or(f64::NAN);
        let mut s = serializer.serialize_struct("PrPoint", 9)?;
        s.serialize_field("phi_candidate", &self.cutoff.to_string())?;
        s.serialize_field(
            "phi_value",
            &match self.cutoff {
                Cutoff::At(r) => Some(f(r)),
                Cutoff::AboveMax => None,
            },
        )?;
        s.serialize_field("precision", &f(self.precision))?;
        s.serialize_field("recall", &f(self.recall))?;
        s.serialize_field("f1", &f(self.f1))?;
        s.serialize_field("supports_count", &self.supports_count)?;
        s.serialize_field("true_positives", &self.true_positives)?;
        s.serialize_field("false_positives", &self.false_positives)?;
        s.serialize_field("false_negatives", &self.false_negatives)?;
        s.end()
    }
}

/// Sweep every distinct score, plus 0 and a cutoff above the maximum.
/// Positives are gold `SUPPORTS` claims.
pub fn pr_curve(samples: &[(Score, bool)]) -> Result<Vec<PrPoint>, ClassifyError> {
    let positives = samples.iter().filter(|(_, gold)| *gold).count() as u64;
    if positives == 0 || positives == samples.len() as u64 {
        return Err(ClassifyError::DegenerateGold);
    }
    let mut cutoffs: BTreeSet<Cutoff> = samples.iter().map(|(s, _)| Cutoff::At(*s)).collect();
    cutoffs.insert(Cutoff::At(Ratio::zero()));
    cutoffs.insert(Cutoff::AboveMax);

    Ok(cutoffs
        .into_iter()
        .map(|cutoff| {
            let (mut tp, mut fp) = (0u64, 0u64);
            for (score, gold) in samples {
                if cutoff.admits(*score) {
                    if *gold {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                }
            }
            let predicted = tp + fp;
            let fneg = positives - tp;
            PrPoint {
                cutoff,
                true_positives: tp,
                false_positives: fp,
                false_negatives: fneg,
                supports_count: predicted,
                precision: if predicted == 0 { Ratio::from_integer(1) } else { Ratio::new(tp, predicted) },
                recall: Ratio::new(tp, positives),
                f1: Ratio::new(2 * tp, 2 * tp + fp + fneg),
            }
        })
        .collect())
}

/// Pick a threshold from the sweep. Ties go to the larger threshold.
pub fn select_threshold(curve: &[PrPoint], objective: Objective) -> Result<Threshold, ClassifyError> {
    let mut best: Option<&PrPoint> = None;
    for point in curve.iter().filter(|p| matches!(p.cutoff, Cutoff::At(_))) {
        let (eligible, key, best_key) = match objective {
            Objective::MaxF1 => (true, point.f1, best.map(|b| b.f1)),
            Objective::PrecisionAtLeast(p) => (point.precision >= p, point.recall, best.map(|b| b.recall)),
            Objective::RecallAtLeast(r) => (point.recall >= r, point.precision, best.map(|b| b.precision)),
        };
        if eligible && best_key.is_none_or(|b| key >= b) {
            best = Some(point);
        }
    }
    match best.map(|p| p.cutoff) {
        Some(Cutoff::At(phi)) => Ok(Threshold {
            phi: Phi(phi),
            origin: ThresholdOrigin::Derived,
        }),
        _ => Err(ClassifyError::Unsatisfiable(objective)),
    }
}

fn gold_samples(verdicts: &[Verdict], gold: &HashMap<u64, GoldLabel>) -> Result<Vec<(Score, bool)>, ClassifyError> {
    verdicts
        .iter()
        .map(|v| {
            let label = gold.get(&v.claim_id).ok_or(ClassifyError::MissingGold(v.claim_id))?;
            Ok((v.score, *label == GoldLabel::Supports))
        })
        .collect()
}

pub fn derive_threshold(
    verdicts: &[Verdict],
    gold: &HashMap<u64, GoldLabel>,
    objective: Objective,
) -> Result<(Threshold, Vec<PrPoint>), ClassifyError> {
    let curve = pr_curve(&gold_samples(verdicts, gold)?)?;
    let threshold = select_threshold(&curve, objective)?;
    Ok((threshold, curve))
}

/// Share of scored gold-`SUPPORTS` claims labelled `SUPPORTS` at `phi`.
/// Only claims that have verdicts (converted, answered) are counted.
pub fn label_accuracy_supports(
    verdicts: &[Verdict],
    gold: &HashMap<u64, GoldLabel>,
    phi: Phi,
) -> Result<Percentage, ClassifyError> {
    let (mut hits, mut total) = (0u64, 0u64);
    for v in verdicts {
        let label = gold.get(&v.claim_id).ok_or(ClassifyError::MissingGold(v.claim_id))?;
        if *label == GoldLabel::Supports {
            total += 1;
            if assign_label(v.score, phi) == Label::Supports {
                hits += 1;
            }
        }
    }
    Percentage::of(hits, total).ok_or(ClassifyError::EmptyDenominator)
}

pub fn gold_map(claims: &[ClaimRecord]) -> HashMap<u64, GoldLabel> {
    claims.iter().map(|c| (c.id, c.gold_label)).collect()
}

/// Group answers by claim and score every claim that was fully answered.
/// Returns the verdicts and the claims with failed answers.
pub fn score_answers(answers: &[AnswerRecord], phi: Phi) -> Result<(Vec<Verdict>, BTreeSet<u64>), ClassifyError> {
    let mut by_claim: BTreeMap<u64, Vec<&AnswerRecord>> = BTreeMap::new();
    for a in answers {
        by_claim.entry(a.claim_id).or_default().push(a);
    }
    let mut verdicts = Vec::with_capacity(by_claim.len());
    let mut failed = BTreeSet::new();
    for (claim_id, group) in by_claim {
        if group.iter().any(|a| a.failed()) {
            failed.insert(claim_id);
            continue;
        }
        let owned: Vec<AnswerRecord> = group.into_iter().cloned().collect();
        let (n_correct, n_questions, _) = score_claim(&owned)?;
        verdicts.push(Verdict::new(claim_id, n_correct, n_questions, phi));
    }
    Ok((verdicts, failed))
}

fn check_answers_cover_questions(questions: &[ClozeQuestion], answers: &[AnswerRecord]) -> Result<(), ClassifyError> {
    let asked: BTreeMap<(u64, u32), &str> = questions
        .iter()
        .map(|q| ((q.claim_id, q.question_index), q.answer_text.as_str()))
        .collect();
    let mut answered = BTreeSet::new();
    for a in answers {
        let key = (a.claim_id, a.question_index);
        let inconsistent = |message: &str| ClassifyError::Inconsistent {
            claim_id: a.claim_id,
            question_index: a.question_index,
            message: message.to_string(),
        };
        match asked.get(&key) {
            None => return Err(inconsistent("answer without a question")),
            Some(gold) if *gold != a.gold => return Err(inconsistent("gold answer differs from question")),
            Some(_) => {}
        }
        if !answered.insert(key) {
            return Err(inconsistent("answered twice"));
        }
    }
    if let Some(&(claim_id, question_index)) = asked.keys().find(|k| !answered.contains(k)) {
        return Err(ClassifyError::Inconsistent {
            claim_id,
            question_index,
            message: "question has no answer".into(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LabelCounts {
    pub total_claims: u64,
    pub supports: u64,
    pub manual_review: u64,
    pub unconverted: u64,
    pub answer_failed: u64,
    /// Claims whose gold record is marked not verifiable. Overlaps the
    /// buckets above.
    pub unverifiable: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelAccuracy {
    pub phi: Phi,
    pub label_accuracy_supports: Option<Percentage>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub conversion: ConversionStats,
    pub threshold: Threshold,
    pub threshold_setting: String,
    /// Configured threshold first, then the 0.76 and 0.67 presets.
    pub label_accuracy: Vec<LabelAccuracy>,
    pub counts: LabelCounts,
    pub gold_supports_scored: u64,
    pub pr_curve: Option<Vec<PrPoint>>,
}

impl EvalReport {
    pub fn accuracy_at(&self, phi: Phi) -> Option<Percentage> {
        self.label_accuracy
            .iter()
            .find(|a| a.phi == phi)
            .and_then(|a| a.label_accuracy_supports)
    }
}

/// Score, label and evaluate a full run.
pub fn evaluate(
    claims: &[ClaimRecord],
    questions: &[ClozeQuestion],
    answers: &[AnswerRecord],
    spec: ThresholdSpec,
) -> Result<(Vec<Verdict>, EvalReport), crate::Error> {
    let conversion = conversion_stats(claims, questions)?;
    check_answers_cover_questions(questions, answers)?;
    let gold = gold_map(claims);

    // labels are reassigned once the threshold is known
    let (mut verdicts, failed) = score_answers(answers, Phi(Ratio::zero()))?;
    let samples = gold_samples(&verdicts, &gold)?;
    let curve = pr_curve(&samples).ok();
    let threshold = match spec {
        ThresholdSpec::Fixed(t) => t,
        ThresholdSpec::Derive(objective) => {
            let curve = curve.as_ref().ok_or(ClassifyError::DegenerateGold)?;
            select_threshold(curve, objective)?
        }
    };
    for v in &mut verdicts {
        v.label = assign_label(v.score, threshold.phi);
    }

    let mut phis = vec![threshold.phi];
    for preset in [Threshold::strict().phi, Threshold::lenient().phi] {
        if !phis.contains(&preset) {
            phis.push(preset);
        }
    }
    let label_accuracy = phis
        .into_iter()
        .map(|phi| LabelAccuracy {
            phi,
            label_accuracy_supports: label_accuracy_supports(&verdicts, &gold, phi).ok(),
        })
        .collect();

    let supports = verdicts.iter().filter(|v| v.label == Label::Supports).count() as u64;
    let counts = LabelCounts {
        total_claims: claims.len() as u64,
        supports,
        manual_review: verdicts.len() as u64 - supports,
        unconverted: conversion.total_claims - conversion.converted_claims,
        answer_failed: failed.len() as u64,
        unverifiable: claims.iter().filter(|c| !c.verifiable).count() as u64,
    };
    let report = EvalReport {
        conversion,
        threshold,
        threshold_setting: spec.to_string(),
        label_accuracy,
        counts,
        gold_supports_scored: samples.iter().filter(|(_, g)| *g).count() as u64,
        pr_curve: curve,
    };
    Ok((verdicts, report))
}

fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| rows.iter().map(|r| r[i].chars().count()).chain([h.chars().count()]).max().unwrap_or(0))
        .collect();
    let line = |cells: Vec<String>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!(" {c:>w$} ", w = *w))
            .collect();
        format!("|{}|\n", padded.join("|"))
    };
    let mut out = line(headers.iter().map(|h| h.to_string()).collect());
    out.push_str(&format!(
        "|{}|\n",
        widths.iter().map(|w| "-".repeat(w + 2)).collect::<Vec<_>>().join("|")
    ));
    for row in rows {
        out.push_str(&line(row.clone()));
    }
    out
}

pub fn render_conversion_table(stats: &ConversionStats) -> String {
    let median = |m: Option<u32>| m.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
    table(
        &[
            "Total Claims",
            "Claims Converted to Questions",
            "Conversion Accuracy",
            "Total Questions",
            "Questions per claim (Median)",
        ],
        &[vec![
            stats.total_claims.to_string(),
            stats.converted_claims.to_string(),
            stats.conversion_accuracy.truncated(2),
            stats.total_questions.to_string(),
            median(stats.median_questions_per_claim),
        ]],
    )
}

/// Human-readable report: question generation table, label accuracy table,
/// label counts and, when available, the precision-recall sweep.
pub fn render_report(report: &EvalReport) -> String {
    let mut out = String::from("Question generation\n");
    out.push_str(&render_conversion_table(&report.conversion));
    out.push_str(&format!(
        "median questions per claim over all claims: {}\n\n",
        report
            .conversion
            .median_questions_all_claims
            .map(|m| m.to_string())
            .unwrap_or_else(|| "-".into())
    ));

    out.push_str("Label classification\n");
    let headers: Vec<String> = report
        .label_accuracy
        .iter()
        .map(|a| format!("Label Accuracy (φ = {})", a.phi))
        .collect();
    let header_refs: Vec<&str> = headers.iter().map(String::as_str).collect();
    let row: Vec<String> = report
        .label_accuracy
        .iter()
        .map(|a| a.label_accuracy_supports.map(|p| p.truncated(2)).unwrap_or_else(|| "-".into()))
        .collect();
    out.push_str(&table(&header_refs, &[row]));
    out.push_str(&format!(
        "threshold: φ = {} ({}, setting {})\n\n",
        report.threshold.phi, report.threshold.origin, report.threshold_setting
    ));

    let c = &report.counts;
    out.push_str("Labels\n");
    out.push_str(&table(
        &["SUPPORTS", "MANUAL_REVIEW", "unconverted", "answer_failed", "total", "unverifiable (overlapping)"],
        &[vec![
            c.supports.to_string(),
            c.manual_review.to_string(),
            c.unconverted.to_string(),
            c.answer_failed.to_string(),
            c.total_claims.to_string(),
            c.unverifiable.to_string(),
        ]],
    ));

    if let Some(curve) = &report.pr_curve {
        out.push_str("\nPrecision-recall sweep\n");
        let rows: Vec<Vec<String>> = curve
            .iter()
            .map(|p| {
                let f = |r: Ratio<u64>| format!("{:.4}", r.to_f64().unwrap_or(f64::NAN));
                vec![
                    p.cutoff.to_string(),
                    f(p.precision),
                    f(p.recall),
                    f(p.f1),
                    p.supports_count.to_string(),
                ]
            })
            .collect();
        out.push_str(&table(&["φ", "precision", "recall", "f1", "SUPPORTS"], &rows));
    }
    out
}
