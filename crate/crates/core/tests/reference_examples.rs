//! Worked examples with known answers, plus golden input files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use reenact::audio::format_duration;
use reenact::corpus::{self, find_translation, load_metadata, parse_conversation_id, AudioLayout, ConversationId};
use reenact::eaf::{parse_eaf, serialize_eaf, Annotation, MarkupDocument, Tier};
use reenact::pairing::{extract_fragments, pair_fragments, FragmentKind, FragmentSide};
use reenact::release::round1;
use reenact::testkit::{oracle, FixtureSpec};
use reenact::validate::{validate_corpus, DiagnosticCode};

fn fixtures() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures"))
}

fn id(text: &str) -> ConversationId {
    parse_conversation_id(text).unwrap()
}

#[test]
fn conversation_ids() {
    let a = id("EN_633");
    assert_eq!((a.lang().as_str(), a.number()), ("en", 633));
    let b = id("ES_008");
    assert_eq!((b.lang().as_str(), b.number()), ("es", 8));
    assert_eq!(b.to_string(), "ES_008");
}

#[test]
fn golden_metadata_round_trips() {
    let dir = fixtures().join("metadata");
    let m = load_metadata(&dir).unwrap();
    let p = &m.participants[0];
    assert_eq!((p.id, p.lang_strength, p.is_producer), (7, 3, false));
    assert_eq!(p.dialect_note2, "El Paso / Juarez");
    for (file, bytes) in [
        (corpus::PARTICIPANT_FILE, corpus::write_participants(&m.participants)),
        (corpus::PRODUCER_FILE, corpus::write_producers(&m.producers)),
        (corpus::CONVERSATION_FILE, corpus::write_conversations(&m.conversations)),
    ] {
        assert_eq!(bytes, fs::read(dir.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn translation_lookup() {
    let (corpus, _) = FixtureSpec::clean(0).in_memory();
    let en = corpus.conversation("EN_001").unwrap();
    assert_eq!(find_translation(en, &corpus).unwrap().id, "ES_001");
}

#[test]
fn golden_markup_file() {
    let doc = parse_eaf(&fs::read(fixtures().join("EN_006.eaf")).unwrap()).unwrap();
    assert_eq!(doc.media_descriptors(), ["file:///sessions/EN_006.wav"]);
    let names: Vec<&str> = doc.tiers().iter().map(|t| t.name()).collect();
    assert_eq!(names, ["Utterance", "LittleLeft", "LittleRight"]);
    // Sorted by start time, so DELETE comes first.
    let utterance = doc.tier("Utterance").unwrap().annotations();
    assert_eq!(
        utterance.iter().map(|a| (a.value(), a.start_ms(), a.end_ms())).collect::<Vec<_>>(),
        [("DELETE", 2000, 2900), ("#29", 10_000, 13_500)]
    );
    assert_eq!(doc.tier("LittleRight").unwrap().annotations()[0].value(), "29.1");
    assert_eq!(parse_eaf(&serialize_eaf(&doc).unwrap()).unwrap(), doc);

    let (frags, redactions) = extract_fragments(id("EN_006"), &doc);
    assert_eq!(redactions.len(), 1);
    let long = frags.iter().find(|f| f.kind == FragmentKind::Long).unwrap();
    assert_eq!((long.canonical_value.as_str(), long.start_ms, long.end_ms), ("29", 10_000, 13_500));
    assert_eq!(long.id().to_string(), "EN_006_29");
}

fn one_tier(name: &str, value: &str, start: u64, end: u64) -> MarkupDocument {
    MarkupDocument::new(vec![], vec![Tier::new(name, vec![Annotation::new(value, start, end).unwrap()])]).unwrap()
}

#[test]
fn short_fragment_and_ids() {
    let doc = one_tier("LittleLeft", "18", 62_000, 64_100);
    let (frags, _) = extract_fragments(id("ES_008"), &doc);
    assert_eq!(frags.len(), 1);
    assert_eq!((frags[0].kind, frags[0].side), (FragmentKind::Short, FragmentSide::Left));
    assert_eq!(frags[0].id().to_string(), "ES_008_18");

    let doc = one_tier("Utterance", "3.34", 0, 1000);
    let (frags, _) = extract_fragments(id("ES_002"), &doc);
    assert_eq!(frags[0].id().to_string(), "ES_002_3.34");
}

#[test]
fn long_pair_across_translation() {
    let (og, _) = extract_fragments(id("EN_006"), &one_tier("Utterance", "#29", 10_000, 13_500));
    let (re, _) = extract_fragments(id("ES_006"), &one_tier("Utterance", "29", 9_000, 12_000));
    let (pairs, unmatched) = pair_fragments(og, re);
    assert!(unmatched.is_empty());
    assert_eq!(pairs.len(), 1);
    assert_eq!((pairs[0].og.id().to_string(), pairs[0].re.id().to_string()), ("EN_006_29".into(), "ES_006_29".into()));
}

#[test]
fn diagnostic_examples() {
    let mut spec = FixtureSpec::clean(0);
    spec.conversations[0].id = "EN_12".into();
    let (corpus, markups) = spec.in_memory();
    let report = validate_corpus(&corpus, &markups);
    assert_eq!(report.count(DiagnosticCode::BadConversationId), 1);
    assert!(report.exclusions.contains("EN_12"));

    let mut spec = FixtureSpec::clean(0);
    spec.conversations[2]
        .annotations
        .push(reenact::testkit::AnnotationPlan::new("Default", "5", 90_000, 90_500));
    let (corpus, markups) = spec.in_memory();
    assert_eq!(validate_corpus(&corpus, &markups).count(DiagnosticCode::BadTier), 1);
}

#[test]
fn dual_mono_layout_detected() {
    let tmp = tempfile::tempdir().unwrap();
    let rec = tmp.path().join("recordings");
    fs::create_dir_all(rec.join("EN_633")).unwrap();
    for f in ["EN_633/7.wav", "EN_633/8.wav", "EN_633.eaf"] {
        fs::write(rec.join(f), b"").unwrap();
    }
    let record = corpus::ConversationRecord {
        id: "EN_633".into(),
        date: "01_02_2023".into(),
        original_or_reenacted: "OG".into(),
        participant_id_left: 7,
        participant_id_right: 8,
        producer_id: 1,
        trans_id: None,
    };
    let files = corpus::locate_files(&rec, &record);
    assert!(matches!(files.audio, Some(AudioLayout::DualMono { .. })));
    assert!(files.markup.is_some());
}

#[test]
fn durations_and_means() {
    assert_eq!(format_duration(2300), "00:02.300");
    assert_eq!(format_duration(138_700), "02:18.700");
    assert_eq!(round1((2.0 + 2.6) / 2.0), 2.3);
}

#[test]
fn oracle_agrees_with_clean_construction() {
    let expected = oracle(&FixtureSpec::clean(0));
    let by_kind: BTreeMap<bool, usize> = expected.pairs.iter().fold(BTreeMap::new(), |mut m, p| {
        *m.entry(p.long).or_default() += 1;
        m
    });
    assert_eq!(by_kind, BTreeMap::from([(false, 10), (true, 6)]));
}
