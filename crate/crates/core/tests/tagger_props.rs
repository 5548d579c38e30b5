mod common;

use clozecheck::tagger::{
    char_slice, rule_tag, validate_spans, EntitySpan, EntityType, Gazetteer, RemoteTagger, RuleTagger, TagError,
    TagResponse, Tagger, WireEntity,
};
use clozecheck::RetryPolicy;
use common::StubServer;
use proptest::prelude::*;
use std::time::Duration;

fn gazetteer() -> Gazetteer {
    [
        ("Burnaby", EntityType::Location),
        ("New York", EntityType::Location),
        ("New York City", EntityType::Location),
        ("Zoë Kravitz", EntityType::Person),
        ("the", EntityType::Misc),
    ]
    .into_iter()
    .collect()
}

fn claim_strategy() -> impl Strategy<Value = String> {
    let word = prop_oneof![
        "[a-z]{1,6}",
        "[A-Z][a-z]{0,5}",
        "[0-9]{1,4}",
        Just("Burnaby".to_string()),
        Just("New York".to_string()),
        Just("New York City".to_string()),
        Just("Zoë Kravitz".to_string()),
        Just("March 3, 1999".to_string()),
        Just("O'Neil's".to_string()),
        Just("é".to_string()),
    ];
    let sep = prop_oneof![Just(" "), Just(", "), Just(". "), Just("-"), Just(" (")];
    prop::collection::vec((word, sep), 1..12).prop_map(|parts| {
        let mut s: String = parts.into_iter().map(|(w, p)| format!("{w}{p}")).collect();
        s.push('.');
        s
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn spans_satisfy_invariants(claim in claim_strategy()) {
        let spans = rule_tag(&claim, &gazetteer());
        prop_assert!(validate_spans(&claim, &spans).is_ok());
        for pair in spans.windows(2) {
            prop_assert!(pair[0].end <= pair[1].start);
        }
        for s in &spans {
            prop_assert_eq!(char_slice(&claim, s.start, s.end), Some(s.text.as_str()));
        }
        prop_assert_eq!(rule_tag(&claim, &gazetteer()), spans);
    }
}

fn wire(spans: &[EntitySpan]) -> TagResponse {
    TagResponse {
        entities: spans
            .iter()
            .map(|s| WireEntity {
                text: s.text.clone(),
                etype: s.etype.to_string(),
                start: s.start,
                end: s.end,
            })
            .collect(),
    }
}

fn quick_retry() -> RetryPolicy {
    RetryPolicy {
        max_retries: 2,
        base_delay: Duration::from_millis(1),
    }
}

#[test]
fn remote_tagger_matches_rule_tagger_via_echo_server() {
    let server = StubServer::start(|body| {
        let request: serde_json::Value = serde_json::from_str(body).unwrap();
        let text = request["text"].as_str().unwrap();
        let spans = rule_tag(text, &gazetteer());
        (200, serde_json::to_string(&wire(&spans)).unwrap())
    });
    let remote = RemoteTagger::new(server.url.clone(), Duration::from_secs(5), quick_retry());
    let local = RuleTagger::new(gazetteer());
    for claim in [
        "Taran grew up in Burnaby.",
        "Zoë Kravitz moved to New York City on March 3, 1999.",
        "the cat sat.",
        "He was born in 1963.",
    ] {
        assert_eq!(remote.tag(claim).unwrap(), local.tag(claim).unwrap(), "{claim}");
    }
}

#[test]
fn remote_tagger_rejects_bad_spans_and_accepts_empty() {
    let server = StubServer::start(|body| {
        let request: serde_json::Value = serde_json::from_str(body).unwrap();
        let text = request["text"].as_str().unwrap();
        if text.starts_with("empty") {
            return (200, r#"{"entities": []}"#.to_string());
        }
        let len = text.chars().count();
        (
            200,
            format!(r#"{{"entities": [{{"text": "x", "type": "PERSON", "start": 0, "end": {}}}]}}"#, len + 5),
        )
    });
    let remote = RemoteTagger::new(server.url.clone(), Duration::from_secs(5), quick_retry());
    assert!(matches!(remote.tag("Berlin is big."), Err(TagError::InvalidSpan { .. })));
    assert!(remote.tag("empty claim").unwrap().is_empty());

    let record = clozecheck::dataset::ClaimRecord {
        id: 77,
        claim: "Berlin is big.".into(),
        gold_label: clozecheck::dataset::GoldLabel::Supports,
        verifiable: true,
    };
    let err = clozecheck::tagger::tag_record(&remote, &record).unwrap_err();
    assert!(err.to_string().contains("claim 77"), "{err}");
}

#[test]
fn remote_tagger_transport_failure_is_retriable() {
    let remote = RemoteTagger::new(common::dead_endpoint(), Duration::from_millis(500), quick_retry());
    let err = remote.tag("Berlin is big.").unwrap_err();
    assert!(err.is_retriable());
}
