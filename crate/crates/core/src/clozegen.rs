//! Cloze question generation: one question per entity span, with that span
//! replaced by the mask placeholder and every other character left alone.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{ClaimRecord, Stage, StageRecord};
use crate::percent::Percentage;
use crate::tagger::{char_slice, validate_spans, EntitySpan, EntityType};

/// Text form of the mask in question text.
pub const MASK_PLACEHOLDER: &str = "[MASK]";

#[derive(Debug, Error)]
pub enum ClozeError {
    #[error("claim {claim_id}: {reason}")]
    InvalidSpan { claim_id: u64, reason: String },
    #[error("claim {claim_id} already contains the mask placeholder")]
    PlaceholderInClaim { claim_id: u64 },
    #[error("question references unknown claim {claim_id}")]
    OrphanQuestion { claim_id: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClozeQuestion {
    pub claim_id: u64,
    pub question_index: u32,
    pub question_text: String,
    pub answer_text: String,
    pub etype: EntityType,
    pub start: usize,
    pub end: usize,
}

impl ClozeQuestion {
    /// Put the answer back where the placeholder is.
    pub fn reconstruct(&self) -> String {
        self.question_text.replacen(MASK_PLACEHOLDER, &self.answer_text, 1)
    }
}

impl StageRecord for ClozeQuestion {
    const STAGE: Stage = Stage::Questions;

    fn claim_id(&self) -> u64 {
        self.claim_id
    }

    fn sub_index(&self) -> u32 {
        self.question_index
    }
}

/// Build one question per span. Zero spans gives zero questions.
pub fn generate(claim: &ClaimRecord, spans: &[EntitySpan]) -> Result<Vec<ClozeQuestion>, ClozeError> {
    validate_spans(&claim.claim, spans).map_err(|e| ClozeError::InvalidSpan {
        claim_id: claim.id,
        reason: e.to_string(),
    })?;
    if !spans.is_empty() && claim.claim.contains(MASK_PLACEHOLDER) {
        return Err(ClozeError::PlaceholderInClaim { claim_id: claim.id });
    }
    let len = claim.claim.chars().count();
    spans
        .iter()
        .enumerate()
        .map(|(i, span)| {
            // validated above, so these slices exist
            let before = char_slice(&claim.claim, 0, span.start).unwrap_or_default();
            let after = char_slice(&claim.claim, span.end, len).unwrap_or_default();
            Ok(ClozeQuestion {
                claim_id: claim.id,
                question_index: i as u32,
                question_text: format!("{before}{MASK_PLACEHOLDER}{after}"),
                answer_text: span.text.clone(),
                etype: span.etype,
                start: span.start,
                end: span.end,
            })
        })
        .collect()
}

/// Summary of question generation over a claim set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConversionStats {
    pub total_claims: u64,
    /// Claims with at least one question.
    pub converted_claims: u64,
    pub total_questions: u64,
    /// Median questions per converted claim; lower middle for even counts.
    pub median_questions_per_claim: Option<u32>,
    /// Same median, with unconverted claims counted as zero.
    pub median_questions_all_claims: Option<u32>,
    pub conversion_accuracy: Percentage,
}

fn lower_median(mut values: Vec<u32>) -> Option<u32> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable();
    Some(values[(values.len() - 1) / 2])
}

/// Per-claim question counts, keyed by claim id. Claims without questions map to 0.
pub fn questions_per_claim(
    claims: &[ClaimRecord],
    questions: &[ClozeQuestion],
) -> Result<BTreeMap<u64, u32>, ClozeError> {
    let mut counts: BTreeMap<u64, u32> = claims.iter().map(|c| (c.id, 0)).collect();
    for q in questions {
        match counts.get_mut(&q.claim_id) {
            Some(n) => *n += 1,
            None => return Err(ClozeError::OrphanQuestion { claim_id: q.claim_id }),
        }
    }
    Ok(counts)
}

pub fn conversion_stats(claims: &[ClaimRecord], questions: &[ClozeQuestion]) -> Result<ConversionStats, ClozeError> {
    let counts = questions_per_claim(claims, questions)?;
    let per_converted: Vec<u32> = counts.values().copied().filter(|n| *n > 0).collect();
    let total_claims = counts.len() as u64;
    let converted_claims = per_converted.len() as u64;
    Ok(ConversionStats {
        total_claims,
        converted_claims,
        total_questions: questions.len() as u64,
        median_questions_per_claim: lower_median(per_converted),
        median_questions_all_claims: lower_median(counts.values().copied().collect()),
        conversion_accuracy: Percentage::of(converted_claims, total_claims).unwrap_or_else(Percentage::zero),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::GoldLabel;

    fn claim(id: u64, text: &str) -> ClaimRecord {
        ClaimRecord {
            id,
            claim: text.into(),
            gold_label: GoldLabel::Supports,
            verifiable: true,
        }
    }

    fn span(text: &str, start: usize, end: usize) -> EntitySpan {
        EntitySpan {
            text: text.into(),
            etype: EntityType::Location,
            start,
            end,
        }
    }

    #[test]
    fn berlin_germany_questions() {
        let c = claim(1, "Berlin is the capital of Germany.");
        let qs = generate(&c, &[span("Berlin", 0, 6), span("Germany", 25, 32)]).unwrap();
        assert_eq!(qs.len(), 2);
        assert_eq!(qs[0].question_text, "[MASK] is the capital of Germany.");
        assert_eq!(qs[0].answer_text, "Berlin");
        assert_eq!(qs[1].question_text, "Berlin is the capital of [MASK].");
        assert_eq!(qs[1].answer_text, "Germany");
        for (i, q) in qs.iter().enumerate() {
            assert_eq!(q.question_index, i as u32);
            assert_eq!(q.reconstruct(), c.claim);
            assert_eq!(q.question_text.matches(MASK_PLACEHOLDER).count(), 1);
        }
    }

    #[test]
    fn no_spans_no_questions() {
        assert!(generate(&claim(2, "A View to a Kill is an action movie."), &[]).unwrap().is_empty());
    }

    #[test]
    fn single_span_reconstructs() {
        let c = claim(3, "Zürich is lovely");
        let qs = generate(&c, &[span("Zürich", 0, 6)]).unwrap();
        assert_eq!(qs.len(), 1);
        assert_eq!(qs[0].question_text, "[MASK] is lovely");
        assert_eq!(qs[0].reconstruct(), c.claim);
    }

    #[test]
    fn bad_span_names_claim() {
        let c = claim(9, "Short.");
        match generate(&c, &[span("Short.", 0, 60)]) {
            Err(ClozeError::InvalidSpan { claim_id, .. }) => assert_eq!(claim_id, 9),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn literal_placeholder_in_claim_rejected() {
        let c = claim(4, "Berlin [MASK]");
        assert!(matches!(
            generate(&c, &[span("Berlin", 0, 6)]),
            Err(ClozeError::PlaceholderInClaim { claim_id: 4 })
        ));
    }

    #[test]
    fn lower_middle_median() {
        assert_eq!(lower_median(vec![1, 3, 3, 5]), Some(3));
        assert_eq!(lower_median(vec![5, 1, 2, 4]), Some(2));
        assert_eq!(lower_median(vec![7]), Some(7));
        assert_eq!(lower_median(vec![]), None);
    }

    #[test]
    fn stats_and_orphans() {
        let claims: Vec<_> = (1..=4).map(|i| claim(i, "Berlin x")).collect();
        let q = |id| ClozeQuestion {
            claim_id: id,
            question_index: 0,
            question_text: "[MASK] x".into(),
            answer_text: "Berlin".into(),
            etype: EntityType::Location,
            start: 0,
            end: 6,
        };
        let stats = conversion_stats(&claims, &[q(1), q(1), q(3)]).unwrap();
        assert_eq!(stats.total_claims, 4);
        assert_eq!(stats.converted_claims, 2);
        assert_eq!(stats.total_questions, 3);
        assert_eq!(stats.median_questions_per_claim, Some(1));
        assert_eq!(stats.median_questions_all_claims, Some(0));
        assert_eq!(stats.conversion_accuracy.truncated(2), "50.00");
        assert!(matches!(
            conversion_stats(&claims, &[q(42)]),
            Err(ClozeError::OrphanQuestion { claim_id: 42 })
        ));
        let empty = conversion_stats(&[], &[]).unwrap();
        assert_eq!(empty.total_claims, 0);
        assert_eq!(empty.median_questions_per_claim, None);
    }
}
