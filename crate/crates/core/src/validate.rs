//! Checks a discovered corpus and its markup against the naming and markup
//! rules, and derives which conversations and fragments stay out of a release.
//!
//! Validation never fails. Every problem becomes a [`Diagnostic`]; a
//! conversation-level problem excludes the conversation and its translation
//! partner, a markup-level problem excludes the fragment key on both sides of
//! the pair.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::corpus::{find_translation, ConversationId, ConversationRecord, Corpus, TranslationError};
use crate::eaf::MarkupDocument;

pub const UTTERANCE_TIER: &str = "Utterance";
pub const LITTLE_LEFT_TIER: &str = "LittleLeft";
pub const LITTLE_RIGHT_TIER: &str = "LittleRight";
pub const KNOWN_TIERS: [&str; 3] = [UTTERANCE_TIER, LITTLE_LEFT_TIER, LITTLE_RIGHT_TIER];
pub const DELETE_DIRECTIVE: &str = "DELETE";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DiagnosticCode {
    MissingMarkup,
    MissingAudio,
    BadConversationId,
    BadOgReCode,
    BadTranslation,
    BadMarkupValue,
    BadTier,
    DuplicateMarkupValue,
    FragmentTranslationMismatch,
}

impl DiagnosticCode {
    pub const ALL: [DiagnosticCode; 9] = [
        DiagnosticCode::MissingMarkup,
        DiagnosticCode::MissingAudio,
        DiagnosticCode::BadConversationId,
        DiagnosticCode::BadOgReCode,
        DiagnosticCode::BadTranslation,
        DiagnosticCode::BadMarkupValue,
        DiagnosticCode::BadTier,
        DiagnosticCode::DuplicateMarkupValue,
        DiagnosticCode::FragmentTranslationMismatch,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticCode::MissingMarkup => "MISSING_MARKUP",
            DiagnosticCode::MissingAudio => "MISSING_AUDIO",
            DiagnosticCode::BadConversationId => "BAD_CONVERSATION_ID",
            DiagnosticCode::BadOgReCode => "BAD_OG_RE_CODE",
            DiagnosticCode::BadTranslation => "BAD_TRANSLATION",
            DiagnosticCode::BadMarkupValue => "BAD_MARKUP_VALUE",
            DiagnosticCode::BadTier => "BAD_TIER",
            DiagnosticCode::DuplicateMarkupValue => "DUPLICATE_MARKUP_VALUE",
            DiagnosticCode::FragmentTranslationMismatch => "FRAGMENT_TRANSLATION_MISMATCH",
        }
    }

    pub fn is_conversation_level(self) -> bool {
        self <= DiagnosticCode::BadTranslation
    }
}

impl fmt::Display for DiagnosticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A markup value on one tier of one conversation. `value` is canonical
/// (leading `#` stripped) when the value is well formed, verbatim otherwise.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct FragmentKey {
    pub conversation: String,
    pub tier: String,
    pub value: String,
}

impl fmt::Display for FragmentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.conversation, self.tier, self.value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(untagged)]
pub enum Subject {
    Conversation(String),
    Markup(FragmentKey),
}

impl Subject {
    pub fn conversation(&self) -> &str {
        match self {
            Subject::Conversation(c) => c,
            Subject::Markup(k) => &k.conversation,
        }
    }
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Conversation(c) => f.write_str(c),
            Subject::Markup(k) => k.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    pub subject: Subject,
    pub message: String,
    pub hint: String,
}

impl Diagnostic {
    pub fn new(code: DiagnosticCode, subject: Subject) -> Self {
        let (message, hint) = describe(code, &subject);
        Diagnostic {
            code,
            subject,
            message,
            hint,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "warning[{}] {}: {} (hint: {})", self.code, self.subject, self.message, self.hint)
    }
}

fn describe(code: DiagnosticCode, subject: &Subject) -> (String, String) {
    let conv = subject.conversation();
    let (tier, value) = match subject {
        Subject::Markup(k) => (k.tier.as_str(), k.value.as_str()),
        Subject::Conversation(_) => ("", ""),
    };
    match code {
        DiagnosticCode::MissingMarkup => (
            format!("conversation {conv} has no markup file"),
            format!("add recordings/{conv}.eaf or fix the id in conversation.csv"),
        ),
        DiagnosticCode::MissingAudio => (
            format!("conversation {conv} has no audio"),
            format!(
                "add recordings/{conv}.wav, or recordings/{conv}/<participant id>.wav for both participants"
            ),
        ),
        DiagnosticCode::BadConversationId => (
            format!("conversation id {conv:?} is not <language code>_<three digits>"),
            "use an ISO 639-1 code, an underscore and exactly three digits, e.g. EN_001".into(),
        ),
        DiagnosticCode::BadOgReCode => (
            format!("conversation {conv} has an original_or_reenacted value other than OG or RE"),
            "set original_or_reenacted to OG or RE".into(),
        ),
        DiagnosticCode::BadTranslation => (
            format!("conversation {conv} does not have exactly one translation"),
            "the translation needs another language code, the same three digits and the opposite OG/RE code"
                .into(),
        ),
        DiagnosticCode::BadMarkupValue => (
            format!("markup {value:?} in tier {tier} of {conv} is not a fragment number"),
            "use an optional '#' followed by digits; remove comments or typos".into(),
        ),
        DiagnosticCode::BadTier => (
            format!("markup {value:?} of {conv} is in unexpected tier {tier:?}"),
            "move it to Utterance, LittleLeft or LittleRight".into(),
        ),
        DiagnosticCode::DuplicateMarkupValue => (
            format!("markup value {value} appears more than once in tier {tier} of {conv}"),
            "renumber one of the markups so each value in a tier is unique".into(),
        ),
        DiagnosticCode::FragmentTranslationMismatch => (
            format!("fragment {value} in tier {tier} of {conv} does not have exactly one translation"),
            format!("mark the matching fragment with value {value} in tier {tier} of the translation"),
        ),
    }
}

/// `#? digits ("." digits)?`, returned without the `#`.
pub fn canonical_markup_value(value: &str) -> Option<&str> {
    let body = value.strip_prefix('#').unwrap_or(value);
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    let all_digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    (all_digits(int) && frac.is_none_or(all_digits)).then_some(body)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub diagnostics: Vec<Diagnostic>,
    /// Conversation keys (see [`ConversationRecord::key`]).
    pub exclusions: BTreeSet<String>,
    pub fragment_exclusions: BTreeSet<FragmentKey>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.diagnostics.is_empty()
    }

    pub fn count(&self, code: DiagnosticCode) -> usize {
        self.diagnostics.iter().filter(|d| d.code == code).count()
    }

    pub fn is_fragment_excluded(&self, conversation: &ConversationId, tier: &str, value: &str) -> bool {
        self.fragment_exclusions.contains(&FragmentKey {
            conversation: conversation.to_string(),
            tier: tier.to_owned(),
            value: value.to_owned(),
        })
    }
}

/// Loose reading of an id as `<letters>_<digits>` with any digit count.
fn loose_id(text: &str) -> Option<(String, u32)> {
    let (letters, digits) = text.split_once('_')?;
    if letters.is_empty() || digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some((letters.to_ascii_uppercase(), digits.parse().ok()?))
}

/// Conversations that could be meant as the translation of `conv`, even when
/// either id or code is malformed: another language prefix, same number.
fn possible_partners<'a>(conv: &ConversationRecord, corpus: &'a Corpus) -> Vec<&'a ConversationRecord> {
    let Some((letters, number)) = loose_id(&conv.id) else {
        return Vec::new();
    };
    corpus
        .conversations
        .iter()
        .filter(|other| {
            loose_id(&other.id).is_some_and(|(l, n)| n == number && l != letters)
        })
        .collect()
}

struct TierValues<'a> {
    /// Canonical value -> occurrence count, for well-formed non-directive values.
    counts: BTreeMap<&'a str, usize>,
}

pub fn validate_corpus(corpus: &Corpus, markups: &BTreeMap<String, MarkupDocument>) -> ValidationReport {
    let mut diagnostics = Vec::new();
    let mut flagged: BTreeSet<String> = BTreeSet::new();

    // Conversation level.
    let mut malformed: BTreeSet<String> = BTreeSet::new();
    for conv in &corpus.conversations {
        let key = conv.key();
        let files = corpus.files_for(conv);
        if files.markup.is_none() {
            diagnostics.push(Diagnostic::new(DiagnosticCode::MissingMarkup, Subject::Conversation(key.clone())));
            flagged.insert(key.clone());
        }
        if files.audio.is_none() {
            diagnostics.push(Diagnostic::new(DiagnosticCode::MissingAudio, Subject::Conversation(key.clone())));
            flagged.insert(key.clone());
        }
        if conv.conversation_id().is_err() {
            diagnostics.push(Diagnostic::new(
                DiagnosticCode::BadConversationId,
                Subject::Conversation(key.clone()),
            ));
            flagged.insert(key.clone());
            malformed.insert(key.clone());
        }
        if conv.kind().is_none() {
            diagnostics.push(Diagnostic::new(DiagnosticCode::BadOgReCode, Subject::Conversation(key.clone())));
            flagged.insert(key.clone());
            malformed.insert(key.clone());
        }
    }
    for conv in &corpus.conversations {
        let key = conv.key();
        if malformed.contains(&key) {
            continue;
        }
        match find_translation(conv, corpus) {
            Ok(_) => {}
            Err(TranslationError::Invalid(_)) => {}
            Err(_) => {
                // A malformed would-be partner has already been reported.
                let blamed = possible_partners(conv, corpus)
                    .iter()
                    .any(|p| malformed.contains(&p.key()));
                if !blamed {
                    diagnostics.push(Diagnostic::new(
                        DiagnosticCode::BadTranslation,
                        Subject::Conversation(key.clone()),
                    ));
                }
                flagged.insert(key);
            }
        }
    }

    let mut exclusions = BTreeSet::new();
    for conv in &corpus.conversations {
        let key = conv.key();
        if !flagged.contains(&key) {
            continue;
        }
        exclusions.insert(key.clone());
        match find_translation(conv, corpus) {
            Ok(partner) => {
                exclusions.insert(partner.key());
            }
            Err(_) => {
                for p in possible_partners(conv, corpus) {
                    exclusions.insert(p.key());
                }
            }
        }
    }

    // Markup level.
    let mut markup_diagnostics: Vec<Diagnostic> = Vec::new();
    let mut tier_values: BTreeMap<(String, String), TierValues<'_>> = BTreeMap::new();
    for conv in &corpus.conversations {
        let key = conv.key();
        let Some(doc) = markups.get(&key) else { continue };
        for tier in doc.tiers() {
            let known = KNOWN_TIERS.contains(&tier.name());
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for a in tier.annotations() {
                let raw = a.value();
                let is_directive = tier.name() == UTTERANCE_TIER && raw == DELETE_DIRECTIVE;
                let canonical = canonical_markup_value(raw);
                let subject_value = canonical.unwrap_or(raw);
                if !known {
                    markup_diagnostics.push(Diagnostic::new(
                        DiagnosticCode::BadTier,
                        Subject::Markup(FragmentKey {
                            conversation: key.clone(),
                            tier: tier.name().to_owned(),
                            value: subject_value.to_owned(),
                        }),
                    ));
                }
                if is_directive {
                    continue;
                }
                match canonical {
                    Some(v) => *counts.entry(v).or_default() += 1,
                    None => markup_diagnostics.push(Diagnostic::new(
                        DiagnosticCode::BadMarkupValue,
                        Subject::Markup(FragmentKey {
                            conversation: key.clone(),
                            tier: tier.name().to_owned(),
                            value: raw.to_owned(),
                        }),
                    )),
                }
            }
            for (&value, &n) in &counts {
                if n > 1 {
                    markup_diagnostics.push(Diagnostic::new(
                        DiagnosticCode::DuplicateMarkupValue,
                        Subject::Markup(FragmentKey {
                            conversation: key.clone(),
                            tier: tier.name().to_owned(),
                            value: value.to_owned(),
                        }),
                    ));
                }
            }
            if known {
                tier_values.insert((key.clone(), tier.name().to_owned()), TierValues { counts });
            }
        }
    }

    let partner_of = |conv_key: &str| -> Option<String> {
        let conv = corpus.conversation(conv_key)?;
        find_translation(conv, corpus).ok().map(|p| p.key())
    };

    let mut fragment_exclusions = BTreeSet::new();
    let exclude_pair = |set: &mut BTreeSet<FragmentKey>, k: &FragmentKey| {
        set.insert(k.clone());
        if let Some(partner) = partner_of(&k.conversation) {
            set.insert(FragmentKey {
                conversation: partner,
                ..k.clone()
            });
        }
    };
    for d in &markup_diagnostics {
        if let Subject::Markup(k) = &d.subject {
            exclude_pair(&mut fragment_exclusions, k);
        }
    }

    // Translation matching, skipping keys already excluded above.
    let mut mismatches = Vec::new();
    for conv in &corpus.conversations {
        let key = conv.key();
        let Some(partner) = partner_of(&key) else { continue };
        if !markups.contains_key(&key) || !markups.contains_key(&partner) {
            continue;
        }
        for tier in KNOWN_TIERS {
            let Some(mine) = tier_values.get(&(key.clone(), tier.to_owned())) else { continue };
            let theirs = tier_values.get(&(partner.clone(), tier.to_owned()));
            for &value in mine.counts.keys() {
                let k = FragmentKey {
                    conversation: key.clone(),
                    tier: tier.to_owned(),
                    value: value.to_owned(),
                };
                if fragment_exclusions.contains(&k) {
                    continue;
                }
                let matches = theirs.and_then(|t| t.counts.get(value)).copied().unwrap_or(0);
                if matches != 1 {
                    mismatches.push(k);
                }
            }
        }
    }
    for k in mismatches {
        exclude_pair(&mut fragment_exclusions, &k);
        markup_diagnostics.push(Diagnostic::new(
            DiagnosticCode::FragmentTranslationMismatch,
            Subject::Markup(k),
        ));
    }

    diagnostics.extend(markup_diagnostics);
    diagnostics.sort_by(|a, b| (a.code, &a.subject).cmp(&(b.code, &b.subject)));
    diagnostics.dedup();
    ValidationReport {
        diagnostics,
        exclusions,
        fragment_exclusions,
    }
}

/// Machine-readable report: one CSV row per diagnostic.
pub fn report_csv(diagnostics: &[Diagnostic]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let _ = w.write_record(["code", "subject", "message", "hint"]);
    for d in diagnostics {
        let _ = w.write_record([d.code.as_str(), &d.subject.to_string(), &d.message, &d.hint]);
    }
    w.into_inner().unwrap_or_default()
}
