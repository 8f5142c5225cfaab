//! Fragments extracted from markup, DELETE redaction, and matching of
//! fragments between a conversation and its translation.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::audio::TimeRange;
use crate::corpus::{ConversationId, Side};
use crate::eaf::MarkupDocument;
use crate::validate::{
    canonical_markup_value, ValidationReport, DELETE_DIRECTIVE, LITTLE_LEFT_TIER, LITTLE_RIGHT_TIER,
    UTTERANCE_TIER,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum FragmentKind {
    /// Utterance tier; may contain both speakers.
    Long,
    /// LittleLeft / LittleRight tier; one speaker.
    Short,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum FragmentSide {
    Left,
    Right,
    Mixed,
}

impl FragmentSide {
    pub fn channel(self) -> Option<Side> {
        match self {
            FragmentSide::Left => Some(Side::Left),
            FragmentSide::Right => Some(Side::Right),
            FragmentSide::Mixed => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fragment {
    pub conv_id: ConversationId,
    pub kind: FragmentKind,
    pub side: FragmentSide,
    pub canonical_value: String,
    pub start_ms: u64,
    pub end_ms: u64,
}

impl Fragment {
    pub fn tier_name(&self) -> &'static str {
        match self.side {
            FragmentSide::Mixed => UTTERANCE_TIER,
            FragmentSide::Left => LITTLE_LEFT_TIER,
            FragmentSide::Right => LITTLE_RIGHT_TIER,
        }
    }

    pub fn range(&self) -> TimeRange {
        // start < end holds for every fragment built from an annotation.
        TimeRange::new(self.start_ms, self.end_ms).expect("fragment span is non-empty")
    }

    pub fn duration_ms(&self) -> u64 {
        self.end_ms - self.start_ms
    }

    pub fn id(&self) -> FragmentId {
        fragment_id(self)
    }
}

/// `<LANG>_<ddd>_<value>`, e.g. `EN_006_29`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FragmentId {
    pub conv: ConversationId,
    pub value: String,
}

impl fmt::Display for FragmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.conv, self.value)
    }
}

pub fn fragment_id(frag: &Fragment) -> FragmentId {
    FragmentId {
        conv: frag.conv_id,
        value: frag.canonical_value.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RedactionSpan {
    pub conv_id: ConversationId,
    pub start_ms: u64,
    pub end_ms: u64,
}

impl RedactionSpan {
    pub fn range(&self) -> TimeRange {
        TimeRange::new(self.start_ms, self.end_ms).expect("redaction span is non-empty")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FragmentPair {
    pub og: Fragment,
    pub re: Fragment,
}

/// Fragments and DELETE spans of one conversation's markup. Annotations on
/// unknown tiers or with malformed values produce nothing.
pub fn extract_fragments(conv_id: ConversationId, doc: &MarkupDocument) -> (Vec<Fragment>, Vec<RedactionSpan>) {
    let mut fragments = Vec::new();
    let mut redactions = Vec::new();
    for tier in doc.tiers() {
        let (kind, side) = match tier.name() {
            UTTERANCE_TIER => (FragmentKind::Long, FragmentSide::Mixed),
            LITTLE_LEFT_TIER => (FragmentKind::Short, FragmentSide::Left),
            LITTLE_RIGHT_TIER => (FragmentKind::Short, FragmentSide::Right),
            _ => continue,
        };
        for a in tier.annotations() {
            if kind == FragmentKind::Long && a.value() == DELETE_DIRECTIVE {
                redactions.push(RedactionSpan {
                    conv_id,
                    start_ms: a.start_ms(),
                    end_ms: a.end_ms(),
                });
                continue;
            }
            let Some(value) = canonical_markup_value(a.value()) else { continue };
            fragments.push(Fragment {
                conv_id,
                kind,
                side,
                canonical_value: value.to_owned(),
                start_ms: a.start_ms(),
                end_ms: a.end_ms(),
            });
        }
    }
    (fragments, redactions)
}

/// Drop fragments whose key validation excluded.
pub fn retain_valid(fragments: Vec<Fragment>, report: &ValidationReport) -> Vec<Fragment> {
    fragments
        .into_iter()
        .filter(|f| !report.is_fragment_excluded(&f.conv_id, f.tier_name(), &f.canonical_value))
        .collect()
}

/// Split fragments into those clear of every redaction span and those
/// overlapping one by at least 1 ms.
pub fn apply_redactions(fragments: Vec<Fragment>, redactions: &[RedactionSpan]) -> (Vec<Fragment>, Vec<Fragment>) {
    // Merge spans so each fragment needs one binary search.
    let mut spans: Vec<(u64, u64)> = redactions.iter().map(|r| (r.start_ms, r.end_ms)).collect();
    spans.sort_unstable();
    let mut merged: Vec<(u64, u64)> = Vec::with_capacity(spans.len());
    for (s, e) in spans {
        match merged.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    let overlaps = |f: &Fragment| {
        // First merged span ending after the fragment starts.
        let i = merged.partition_point(|&(_, e)| e <= f.start_ms);
        merged.get(i).is_some_and(|&(s, _)| s < f.end_ms)
    };
    fragments.into_iter().partition(|f| !overlaps(f))
}

type MatchKey = (FragmentKind, FragmentSide, String);

/// Pair fragments sharing kind, side and canonical value, when exactly one
/// fragment on each side has that key. Pairs are ordered by the original's
/// start time.
pub fn pair_fragments(og: Vec<Fragment>, re: Vec<Fragment>) -> (Vec<FragmentPair>, Vec<Fragment>) {
    fn group(frags: Vec<Fragment>) -> HashMap<MatchKey, Vec<Fragment>> {
        let mut map: HashMap<MatchKey, Vec<Fragment>> = HashMap::new();
        for f in frags {
            map.entry((f.kind, f.side, f.canonical_value.clone())).or_default().push(f);
        }
        map
    }
    let og_groups = group(og);
    let mut re_groups = group(re);
    let mut pairs = Vec::new();
    let mut unmatched = Vec::new();
    for (key, mut og_list) in og_groups {
        match re_groups.remove(&key) {
            Some(mut re_list) if og_list.len() == 1 && re_list.len() == 1 => {
                pairs.push(FragmentPair {
                    og: og_list.remove(0),
                    re: re_list.remove(0),
                });
            }
            Some(re_list) => {
                unmatched.extend(og_list);
                unmatched.extend(re_list);
            }
            None => unmatched.append(&mut og_list),
        }
    }
    unmatched.extend(re_groups.into_values().flatten());
    pairs.sort_by(|a, b| {
        (a.og.start_ms, a.og.end_ms, a.og.kind, a.og.side, &a.og.canonical_value).cmp(&(
            b.og.start_ms,
            b.og.end_ms,
            b.og.kind,
            b.og.side,
            &b.og.canonical_value,
        ))
    });
    unmatched.sort_by(|a, b| {
        (a.conv_id, a.start_ms, a.end_ms, a.kind, a.side, &a.canonical_value).cmp(&(
            b.conv_id,
            b.start_ms,
            b.end_ms,
            b.kind,
            b.side,
            &b.canonical_value,
        ))
    });
    (pairs, unmatched)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eaf::{Annotation, Tier};
    use proptest::prelude::*;

    fn cid(s: &str) -> ConversationId {
        s.parse().unwrap()
    }

    fn frag(conv: &str, kind: FragmentKind, side: FragmentSide, value: &str, s: u64, e: u64) -> Fragment {
        Fragment {
            conv_id: cid(conv),
            kind,
            side,
            canonical_value: value.into(),
            start_ms: s,
            end_ms: e,
        }
    }

    #[test]
    fn extraction() {
        let doc = MarkupDocument::new(
            vec![],
            vec![
                Tier::new(
                    "Utterance",
                    vec![
                        Annotation::new("#29", 10_000, 13_500).unwrap(),
                        Annotation::new("DELETE", 300_000, 320_000).unwrap(),
                    ],
                ),
                Tier::new("LittleLeft", vec![Annotation::new("18", 62_000, 64_100).unwrap()]),
                Tier::new("Default", vec![Annotation::new("5", 1, 2).unwrap()]),
            ],
        )
        .unwrap();
        let (frags, redactions) = extract_fragments(cid("EN_006"), &doc);
        assert_eq!(
            frags,
            [
                frag("EN_006", FragmentKind::Long, FragmentSide::Mixed, "29", 10_000, 13_500),
                frag("EN_006", FragmentKind::Short, FragmentSide::Left, "18", 62_000, 64_100),
            ]
        );
        assert_eq!(
            redactions,
            [RedactionSpan {
                conv_id: cid("EN_006"),
                start_ms: 300_000,
                end_ms: 320_000
            }]
        );
    }

    #[test]
    fn fragment_ids() {
        let ids = [
            ("EN_006", "29", "EN_006_29"),
            ("ES_008", "18", "ES_008_18"),
            ("ES_002", "3.34", "ES_002_3.34"),
        ];
        for (conv, value, expected) in ids {
            let f = frag(conv, FragmentKind::Long, FragmentSide::Mixed, value, 0, 1);
            assert_eq!(fragment_id(&f).to_string(), expected);
        }
    }

    #[test]
    fn redaction_cases() {
        let span = RedactionSpan {
            conv_id: cid("EN_001"),
            start_ms: 20_000,
            end_ms: 30_000,
        };
        let disjoint = frag("EN_001", FragmentKind::Long, FragmentSide::Mixed, "1", 10_000, 13_000);
        let overlapping = frag("EN_001", FragmentKind::Long, FragmentSide::Mixed, "2", 19_500, 21_000);
        let touching = frag("EN_001", FragmentKind::Long, FragmentSide::Mixed, "3", 30_000, 31_000);
        let (kept, dropped) = apply_redactions(vec![disjoint.clone(), overlapping.clone(), touching.clone()], &[span]);
        assert_eq!(kept, [disjoint, touching]);
        assert_eq!(dropped, [overlapping]);
    }

    #[test]
    fn pairing_cases() {
        let og = vec![
            frag("EN_006", FragmentKind::Long, FragmentSide::Mixed, "29", 0, 10),
            frag("EN_006", FragmentKind::Short, FragmentSide::Left, "18", 0, 5),
        ];
        let re = vec![
            frag("ES_006", FragmentKind::Long, FragmentSide::Mixed, "29", 50, 60),
            frag("ES_006", FragmentKind::Short, FragmentSide::Right, "18", 50, 55),
        ];
        let (pairs, unmatched) = pair_fragments(og, re);
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].og.canonical_value, "29");
        assert_eq!(pairs[0].re.conv_id, cid("ES_006"));
        assert_eq!(unmatched.len(), 2);
    }

    fn arb_fragments(conv: &'static str) -> impl Strategy<Value = Vec<Fragment>> {
        prop::collection::vec((0u8..3, 0u8..6, 0u64..500, 1u64..100), 0..20).prop_map(move |items| {
            items
                .into_iter()
                .map(|(tier, value, start, len)| {
                    let (kind, side) = match tier {
                        0 => (FragmentKind::Long, FragmentSide::Mixed),
                        1 => (FragmentKind::Short, FragmentSide::Left),
                        _ => (FragmentKind::Short, FragmentSide::Right),
                    };
                    frag(conv, kind, side, &value.to_string(), start, start + len)
                })
                .collect()
        })
    }

    /// Cross-product matcher: a pair exists iff its key occurs once per side.
    fn brute_pairs(og: &[Fragment], re: &[Fragment]) -> Vec<(Fragment, Fragment)> {
        let same = |a: &Fragment, b: &Fragment| a.kind == b.kind && a.side == b.side && a.canonical_value == b.canonical_value;
        let mut out = Vec::new();
        for a in og {
            for b in re {
                if same(a, b)
                    && og.iter().filter(|x| same(x, a)).count() == 1
                    && re.iter().filter(|x| same(x, b)).count() == 1
                {
                    out.push((a.clone(), b.clone()));
                }
            }
        }
        out.sort_by_key(|(a, _)| (a.start_ms, a.end_ms, a.kind, a.side, a.canonical_value.clone()));
        out
    }

    proptest! {
        #[test]
        fn pairing_matches_cross_product(og in arb_fragments("EN_001"), re in arb_fragments("ES_001")) {
            let total = og.len() + re.len();
            let expected = brute_pairs(&og, &re);
            let (pairs, unmatched) = pair_fragments(og, re);
            let got: Vec<_> = pairs.iter().map(|p| (p.og.clone(), p.re.clone())).collect();
            prop_assert_eq!(&got, &expected);
            prop_assert_eq!(pairs.len() * 2 + unmatched.len(), total);
            for p in &pairs {
                prop_assert_eq!(p.og.kind, p.re.kind);
                prop_assert_eq!(p.og.side, p.re.side);
            }
        }

        #[test]
        fn redaction_matches_interval_scan(
            frags in arb_fragments("EN_001"),
            spans in prop::collection::vec((0u64..600, 1u64..80), 0..8),
        ) {
            let spans: Vec<RedactionSpan> = spans
                .into_iter()
                .map(|(s, l)| RedactionSpan { conv_id: cid("EN_001"), start_ms: s, end_ms: s + l })
                .collect();
            let expected_dropped: Vec<Fragment> = frags
                .iter()
                .filter(|f| spans.iter().any(|r| f.start_ms < r.end_ms && r.start_ms < f.end_ms))
                .cloned()
                .collect();
            let (kept, dropped) = apply_redactions(frags.clone(), &spans);
            prop_assert_eq!(&dropped, &expected_dropped);
            prop_assert_eq!(kept.len() + dropped.len(), frags.len());
            for f in &kept {
                prop_assert!(spans.iter().all(|r| !f.range().overlaps(&r.range())));
            }
        }
    }
}
