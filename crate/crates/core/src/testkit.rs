//! Synthetic corpus fixtures, fault injection, and a brute-force oracle.
//!
//! A [`FixtureSpec`] describes conversations as plain annotation plans. It can
//! be written to disk as an ordinary input tree ([`make_fixture`]), loaded
//! in memory ([`FixtureSpec::in_memory`]), or fed to [`oracle`], which derives
//! the expected release contents by quadratic scans over the plans alone.
//!
//! Recordings carry a 440 Hz tone on the left channel and 660 Hz on the
//! right, so a swapped or mixed channel is detectable in the output.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::{ms_to_sample, write_wav, WavBuffer};
use crate::corpus::{
    self, AudioLayout, ConversationFiles, Corpus, LanguageCode, Participant, Producer,
};
use crate::eaf::{serialize_eaf, parse_eaf, Annotation, MarkupDocument, Tier};
use crate::validate::DiagnosticCode;

pub const SAMPLE_RATE: u32 = 44_100;
pub const LEFT_TONE_HZ: f64 = 440.0;
pub const RIGHT_TONE_HZ: f64 = 660.0;
const AMPLITUDE: f64 = 8000.0;

const UTTERANCE: &str = "Utterance";
const LITTLE_LEFT: &str = "LittleLeft";
const LITTLE_RIGHT: &str = "LittleRight";
const DELETE: &str = "DELETE";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationPlan {
    pub tier: String,
    pub value: String,
    pub start_ms: u64,
    pub end_ms: u64,
}

impl AnnotationPlan {
    pub fn new(tier: &str, value: &str, start_ms: u64, end_ms: u64) -> Self {
        AnnotationPlan {
            tier: tier.to_owned(),
            value: value.to_owned(),
            start_ms,
            end_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AudioLayoutPlan {
    Stereo,
    /// One mono file per participant; the right track is `right_shortfall_ms` shorter.
    DualMono { right_shortfall_ms: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AudioPlan {
    pub duration_ms: u64,
    pub left_hz: f64,
    pub right_hz: f64,
    pub layout: AudioLayoutPlan,
}

impl AudioPlan {
    pub fn stereo(duration_ms: u64) -> Self {
        AudioPlan {
            duration_ms,
            left_hz: LEFT_TONE_HZ,
            right_hz: RIGHT_TONE_HZ,
            layout: AudioLayoutPlan::Stereo,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConversationPlan {
    pub id: String,
    pub date: String,
    pub og_or_re: String,
    pub left: u32,
    pub right: u32,
    pub producer: u32,
    pub annotations: Vec<AnnotationPlan>,
    /// `None` writes no audio at all.
    pub audio: Option<AudioPlan>,
    pub write_markup: bool,
}

impl ConversationPlan {
    pub fn end_ms(&self) -> u64 {
        self.annotations.iter().map(|a| a.end_ms).max().unwrap_or(0)
    }

    fn tier_names(&self) -> Vec<&str> {
        let mut names = vec![UTTERANCE, LITTLE_LEFT, LITTLE_RIGHT];
        for a in &self.annotations {
            if !names.contains(&a.tier.as_str()) {
                names.push(&a.tier);
            }
        }
        names
    }

    pub fn document(&self) -> MarkupDocument {
        let tiers = self
            .tier_names()
            .into_iter()
            .map(|name| {
                let annotations = self
                    .annotations
                    .iter()
                    .filter(|a| a.tier == name)
                    .map(|a| {
                        Annotation::new(&a.value, a.start_ms, a.end_ms)
                            .expect("annotation plans have non-empty values and spans")
                    })
                    .collect();
                Tier::new(name, annotations)
            })
            .collect();
        MarkupDocument::new(vec![format!("{}.wav", self.id)], tiers).expect("tier names are unique")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub participants: Vec<Participant>,
    pub producers: Vec<Producer>,
    pub conversations: Vec<ConversationPlan>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FaultKind {
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

impl FaultKind {
    pub const ALL: [FaultKind; 9] = [
        FaultKind::MissingMarkup,
        FaultKind::MissingAudio,
        FaultKind::BadConversationId,
        FaultKind::BadOgReCode,
        FaultKind::BadTranslation,
        FaultKind::BadMarkupValue,
        FaultKind::BadTier,
        FaultKind::DuplicateMarkupValue,
        FaultKind::FragmentTranslationMismatch,
    ];

    pub fn code(self) -> DiagnosticCode {
        match self {
            FaultKind::MissingMarkup => DiagnosticCode::MissingMarkup,
            FaultKind::MissingAudio => DiagnosticCode::MissingAudio,
            FaultKind::BadConversationId => DiagnosticCode::BadConversationId,
            FaultKind::BadOgReCode => DiagnosticCode::BadOgReCode,
            FaultKind::BadTranslation => DiagnosticCode::BadTranslation,
            FaultKind::BadMarkupValue => DiagnosticCode::BadMarkupValue,
            FaultKind::BadTier => DiagnosticCode::BadTier,
            FaultKind::DuplicateMarkupValue => DiagnosticCode::DuplicateMarkupValue,
            FaultKind::FragmentTranslationMismatch => DiagnosticCode::FragmentTranslationMismatch,
        }
    }
}

fn lang(code: &str) -> LanguageCode {
    code.parse().expect("fixture language codes are assigned")
}

fn participant(id: u32, l1: &str, l2: &str, strength: u8, is_producer: bool) -> Participant {
    Participant {
        id,
        lang1: lang(l1),
        lang2: lang(l2),
        lang_strength: strength,
        dialect_note1: "El Paso".into(),
        dialect_note2: "El Paso / Juarez".into(),
        is_producer,
        notes: String::new(),
    }
}

/// Lays out utterances one after another, with the short fragments of each
/// utterance spread evenly inside it.
struct Timeline<'a> {
    rng: &'a mut ChaCha8Rng,
    cursor: u64,
    annotations: Vec<AnnotationPlan>,
}

impl<'a> Timeline<'a> {
    fn new(rng: &'a mut ChaCha8Rng) -> Self {
        Timeline {
            rng,
            cursor: 500,
            annotations: Vec::new(),
        }
    }

    fn utterance(&mut self, value: &str, shorts: &[(&str, String)]) {
        let length = self.rng.random_range(1500..4000u64);
        let start = self.cursor;
        let end = start + length;
        self.annotations.push(AnnotationPlan::new(UTTERANCE, value, start, end));
        if !shorts.is_empty() {
            let slot = length / shorts.len() as u64;
            for (i, (tier, v)) in shorts.iter().enumerate() {
                let s = start + slot * i as u64 + slot / 10;
                let e = start + slot * (i as u64 + 1) - slot / 10;
                self.annotations.push(AnnotationPlan::new(tier, v, s, e));
            }
        }
        self.cursor = end + self.rng.random_range(300..800u64);
    }

    fn delete(&mut self, length: u64) {
        self.annotations
            .push(AnnotationPlan::new(UTTERANCE, DELETE, self.cursor, self.cursor + length));
        self.cursor += length + 200;
    }

    fn finish(self, tail_ms: u64) -> (Vec<AnnotationPlan>, u64) {
        (self.annotations, self.cursor + tail_ms)
    }
}

fn conversation(
    id: &str,
    kind: &str,
    left: u32,
    right: u32,
    annotations: Vec<AnnotationPlan>,
    duration_ms: u64,
) -> ConversationPlan {
    ConversationPlan {
        id: id.to_owned(),
        date: "05_11_2022".into(),
        og_or_re: kind.to_owned(),
        left,
        right,
        producer: 1,
        annotations,
        audio: Some(AudioPlan::stereo(duration_ms)),
        write_markup: true,
    }
}

/// Plans for one OG/RE pair carrying the same long and short values. Each
/// side gets its own random timing and one DELETE span after the last
/// utterance.
fn planned_pair(
    rng: &mut ChaCha8Rng,
    ids: (&str, &str),
    speakers: (u32, u32),
    long_values: &[&str],
    shorts: &[(&str, &str)],
) -> (ConversationPlan, ConversationPlan) {
    let mut sides = Vec::new();
    for _ in 0..2 {
        let mut timeline = Timeline::new(rng);
        for (i, value) in long_values.iter().enumerate() {
            let mine: Vec<(&str, String)> = shorts
                .iter()
                .enumerate()
                .filter(|(j, _)| j % long_values.len() == i)
                .map(|(_, (tier, v))| (*tier, v.to_string()))
                .collect();
            timeline.utterance(value, &mine);
        }
        timeline.delete(1000);
        sides.push(timeline.finish(1500));
    }
    let (re_ann, re_dur) = sides.pop().unwrap_or_default();
    let (og_ann, og_dur) = sides.pop().unwrap_or_default();
    (
        conversation(ids.0, "OG", speakers.0, speakers.1, og_ann, og_dur),
        conversation(ids.1, "RE", speakers.0, speakers.1, re_ann, re_dur),
    )
}

impl FixtureSpec {
    /// One OG/RE pair with a single utterance pair.
    pub fn minimal(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (og, re) = planned_pair(&mut rng, ("EN_001", "ES_001"), (1, 2), &["#1"], &[]);
        FixtureSpec {
            participants: vec![participant(1, "en", "es", 2, true), participant(2, "es", "en", 4, false)],
            producers: vec![Producer {
                id: 1,
                name: "Operator".into(),
            }],
            conversations: vec![og, re],
            seed,
        }
    }

    /// Two clean pairs, EN_001/ES_001 and ES_002/EN_002, with 3 long and 5
    /// short fragment pairs each, one DELETE span per conversation, and
    /// EN_002 recorded as one file per participant.
    pub fn clean(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a_og, a_re) = planned_pair(
            &mut rng,
            ("EN_001", "ES_001"),
            (1, 2),
            &["#1", "#2", "#3"],
            &[(LITTLE_LEFT, "1"), (LITTLE_RIGHT, "1"), (LITTLE_LEFT, "2"), (LITTLE_LEFT, "3"), (LITTLE_RIGHT, "3")],
        );
        let (b_og, mut b_re) = planned_pair(
            &mut rng,
            ("ES_002", "EN_002"),
            (3, 4),
            &["1", "2", "#3"],
            &[(LITTLE_RIGHT, "1"), (LITTLE_LEFT, "2"), (LITTLE_RIGHT, "2"), (LITTLE_RIGHT, "3"), (LITTLE_LEFT, "4")],
        );
        if let Some(audio) = b_re.audio.as_mut() {
            audio.layout = AudioLayoutPlan::DualMono { right_shortfall_ms: 0 };
        }
        FixtureSpec {
            participants: vec![
                participant(1, "en", "es", 2, true),
                participant(2, "es", "en", 3, false),
                participant(3, "es", "en", 1, false),
                participant(4, "en", "es", 5, false),
            ],
            producers: vec![Producer {
                id: 1,
                name: "Operator".into(),
            }],
            conversations: vec![a_og, a_re, b_og, b_re],
            seed,
        }
    }

    /// Random conversation pairs, each tier holding at most
    /// `options.max_per_tier` annotations, with faults sprinkled in at the rates
    /// given by `options`.
    pub fn random(seed: u64, options: &RandomOptions) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let langs = ["en", "es", "ja", "bn", "fr"];
        let pair_count = rng.random_range(1..=options.max_pairs);
        let mut participants = Vec::new();
        let mut conversations = Vec::new();
        for p in 0..pair_count {
            let a = rng.random_range(0..langs.len());
            let b = (a + rng.random_range(1..langs.len())) % langs.len();
            let number = (p as u16 + 1) * 7 % 1000;
            let left = p as u32 * 2 + 1;
            let right = left + 1;
            participants.push(participant(left, langs[a], langs[b], rng.random_range(1..=5), p == 0));
            participants.push(participant(right, langs[b], langs[a], rng.random_range(1..=5), false));

            // Shared value pools so most values pair, some do not.
            let mut tiers: BTreeMap<&str, (Vec<String>, Vec<String>)> = BTreeMap::new();
            for tier in [UTTERANCE, LITTLE_LEFT, LITTLE_RIGHT] {
                let n = rng.random_range(0..=options.max_per_tier);
                let mut og_values = Vec::new();
                let mut re_values = Vec::new();
                for i in 1..=n {
                    let value = if rng.random_bool(options.duplicate_rate) {
                        rng.random_range(1..=i).to_string()
                    } else {
                        i.to_string()
                    };
                    let value = if rng.random_bool(0.3) { format!("#{value}") } else { value };
                    if !rng.random_bool(options.one_sided_rate) || rng.random_bool(0.5) {
                        og_values.push(value.clone());
                    }
                    if !rng.random_bool(options.one_sided_rate) || rng.random_bool(0.5) {
                        re_values.push(value);
                    }
                }
                tiers.insert(tier, (og_values, re_values));
            }

            for (side, kind) in [(0usize, "OG"), (1, "RE")] {
                let code = if side == 0 { langs[a] } else { langs[b] };
                let id = format!("{}_{:03}", code.to_ascii_uppercase(), number);
                let mut annotations = Vec::new();
                let mut end = 0;
                for (tier, (og_values, re_values)) in &tiers {
                    let values = if side == 0 { og_values } else { re_values };
                    let mut values: Vec<String> = values.clone();
                    if *tier == UTTERANCE {
                        for _ in 0..rng.random_range(0..=2u32) {
                            let at = rng.random_range(0..=values.len());
                            values.insert(at, DELETE.to_owned());
                        }
                    }
                    if rng.random_bool(options.bad_value_rate) {
                        values.push("12a".into());
                    }
                    let mut cursor = rng.random_range(0..options.max_gap_ms);
                    for v in values {
                        let start = cursor + rng.random_range(options.min_gap_ms..options.max_gap_ms);
                        let stop = start + rng.random_range(options.min_len_ms..options.max_len_ms);
                        annotations.push(AnnotationPlan::new(tier, &v, start, stop));
                        cursor = stop;
                    }
                    end = end.max(cursor);
                }
                if rng.random_bool(options.bad_tier_rate) {
                    annotations.push(AnnotationPlan::new("Default", "1", 0, 100));
                    end = end.max(100);
                }
                let duration = end + rng.random_range(0..500u64) + 1;
                let mut plan = conversation(&id, kind, left, right, annotations, duration);
                if rng.random_bool(options.dual_mono_rate) {
                    if let Some(audio) = plan.audio.as_mut() {
                        audio.layout = AudioLayoutPlan::DualMono {
                            right_shortfall_ms: rng.random_range(0..duration.min(300)),
                        };
                    }
                }
                if rng.random_bool(options.missing_audio_rate) {
                    plan.audio = None;
                }
                if rng.random_bool(options.missing_markup_rate) {
                    plan.write_markup = false;
                }
                conversations.push(plan);
            }
        }
        FixtureSpec {
            participants,
            producers: vec![Producer {
                id: 1,
                name: "Operator".into(),
            }],
            conversations,
            seed,
        }
    }

    pub fn participant_csv(&self) -> Vec<u8> {
        corpus::write_participants(&self.participants)
    }

    pub fn producer_csv(&self) -> Vec<u8> {
        corpus::write_producers(&self.producers)
    }

    /// Rows in plan order, written directly so malformed ids survive.
    pub fn conversation_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let _ = w.write_record(corpus::CONVERSATION_HEADER);
        for c in &self.conversations {
            let _ = w.write_record([
                c.id.as_str(),
                &c.date,
                &c.og_or_re,
                &c.left.to_string(),
                &c.right.to_string(),
                &c.producer.to_string(),
                "",
            ]);
        }
        w.into_inner().unwrap_or_default()
    }

    /// The corpus and parsed markup as discovery would produce them, without
    /// touching the filesystem. Metadata and markup go through their real
    /// serializers and parsers.
    pub fn in_memory(&self) -> (Corpus, BTreeMap<String, MarkupDocument>) {
        let participants = corpus::parse_participants(&self.participant_csv()).expect("participant table");
        let producers = corpus::parse_producers(&self.producer_csv()).expect("producer table");
        let conversations = corpus::parse_conversations(&self.conversation_csv(), &participants, &producers)
            .expect("conversation table");
        let root = PathBuf::from("recordings");
        let mut files = BTreeMap::new();
        let mut markups = BTreeMap::new();
        for (record, plan) in conversations.iter().zip(&self.conversations) {
            let key = record.key();
            let markup = plan.write_markup.then(|| root.join(format!("{}.eaf", plan.id)));
            let audio = plan.audio.as_ref().map(|a| match a.layout {
                AudioLayoutPlan::Stereo => AudioLayout::StereoSingle(root.join(format!("{}.wav", plan.id))),
                AudioLayoutPlan::DualMono { .. } => AudioLayout::DualMono {
                    left: root.join(&plan.id).join(format!("{}.wav", plan.left)),
                    right: root.join(&plan.id).join(format!("{}.wav", plan.right)),
                },
            });
            if plan.write_markup {
                let bytes = serialize_eaf(&plan.document()).expect("plans serialize");
                markups.insert(key.clone(), parse_eaf(&bytes).expect("serialized markup parses"));
            }
            files.insert(key, ConversationFiles { markup, audio });
        }
        (
            Corpus {
                participants,
                producers,
                conversations,
                recordings_dir: root,
                files,
            },
            markups,
        )
    }
}

/// Knobs for [`FixtureSpec::random`].
#[derive(Debug, Clone)]
pub struct RandomOptions {
    pub max_pairs: usize,
    pub max_per_tier: usize,
    pub min_len_ms: u64,
    pub max_len_ms: u64,
    pub min_gap_ms: u64,
    pub max_gap_ms: u64,
    pub duplicate_rate: f64,
    pub one_sided_rate: f64,
    pub bad_value_rate: f64,
    pub bad_tier_rate: f64,
    pub missing_audio_rate: f64,
    pub missing_markup_rate: f64,
    pub dual_mono_rate: f64,
}

impl Default for RandomOptions {
    fn default() -> Self {
        RandomOptions {
            max_pairs: 3,
            max_per_tier: 20,
            min_len_ms: 100,
            max_len_ms: 1500,
            min_gap_ms: 0,
            max_gap_ms: 400,
            duplicate_rate: 0.05,
            one_sided_rate: 0.1,
            bad_value_rate: 0.05,
            bad_tier_rate: 0.05,
            missing_audio_rate: 0.03,
            missing_markup_rate: 0.03,
            dual_mono_rate: 0.3,
        }
    }
}

impl RandomOptions {
    /// Short annotations so that fixtures written to disk stay small.
    pub fn compact() -> Self {
        RandomOptions {
            min_len_ms: 20,
            max_len_ms: 200,
            max_gap_ms: 60,
            ..RandomOptions::default()
        }
    }
}

/// Return a copy of a clean spec differing just enough from it that
/// validation reports `kind`. Faults land on the first two conversations.
pub fn inject_fault(spec: &FixtureSpec, kind: FaultKind) -> FixtureSpec {
    let mut spec = spec.clone();
    let first = &spec.conversations[0];
    let free_at = first.end_ms() + 100;
    let first_long = first
        .annotations
        .iter()
        .find(|a| a.tier == UTTERANCE && a.value != DELETE)
        .cloned();
    let conv = &mut spec.conversations[0];
    let grow = |conv: &mut ConversationPlan, end: u64| {
        if let Some(audio) = conv.audio.as_mut() {
            audio.duration_ms = audio.duration_ms.max(end + 500);
        }
    };
    match kind {
        FaultKind::MissingMarkup => conv.write_markup = false,
        FaultKind::MissingAudio => conv.audio = None,
        FaultKind::BadConversationId => {
            let (letters, digits) = conv.id.split_once('_').unwrap_or(("EN", "001"));
            conv.id = format!("{letters}_{}", &digits[1..]);
        }
        FaultKind::BadOgReCode => conv.og_or_re = "XX".into(),
        FaultKind::BadTranslation => {
            let code = conv.og_or_re.clone();
            spec.conversations[1].og_or_re = code;
        }
        FaultKind::BadMarkupValue => {
            conv.annotations
                .push(AnnotationPlan::new(UTTERANCE, "12a", free_at, free_at + 400));
            grow(conv, free_at + 400);
        }
        FaultKind::BadTier => {
            conv.annotations
                .push(AnnotationPlan::new("Default", "1", free_at, free_at + 400));
            grow(conv, free_at + 400);
        }
        FaultKind::DuplicateMarkupValue => {
            let value = first_long.map_or("#1".to_owned(), |a| a.value);
            let digits = value.trim_start_matches('#');
            conv.annotations
                .push(AnnotationPlan::new(UTTERANCE, &format!("#{digits}"), free_at, free_at + 400));
            grow(conv, free_at + 400);
        }
        FaultKind::FragmentTranslationMismatch => {
            conv.annotations
                .push(AnnotationPlan::new(UTTERANCE, "#900", free_at, free_at + 400));
            grow(conv, free_at + 400);
        }
    }
    spec
}

fn tone(frames: usize, hz: f64) -> impl Iterator<Item = i16> {
    (0..frames).map(move |i| {
        let t = i as f64 / SAMPLE_RATE as f64;
        (AMPLITUDE * (2.0 * std::f64::consts::PI * hz * t).sin()).round() as i16
    })
}

/// The recording a plan describes, as the stereo buffer the release reads.
/// A short right track of a dual-mono layout is zero-padded.
pub fn synthesize(audio: &AudioPlan) -> WavBuffer {
    let frames = ms_to_sample(audio.duration_ms, SAMPLE_RATE) as usize;
    let right_frames = match audio.layout {
        AudioLayoutPlan::Stereo => frames,
        AudioLayoutPlan::DualMono { right_shortfall_ms } => {
            ms_to_sample(audio.duration_ms.saturating_sub(right_shortfall_ms), SAMPLE_RATE) as usize
        }
    };
    let samples = tone(frames, audio.left_hz)
        .zip(tone(right_frames, audio.right_hz).chain(std::iter::repeat(0)))
        .flat_map(|(l, r)| [l, r])
        .collect();
    WavBuffer::new(SAMPLE_RATE, 2, samples).expect("stereo tone buffer")
}

/// Write `spec` as an input tree under `dir`: the three metadata CSVs at the
/// top and `recordings/` with audio and markup.
pub fn make_fixture(spec: &FixtureSpec, dir: &Path) -> io::Result<PathBuf> {
    let recordings = dir.join("recordings");
    fs::create_dir_all(&recordings)?;
    fs::write(dir.join(corpus::PARTICIPANT_FILE), spec.participant_csv())?;
    fs::write(dir.join(corpus::PRODUCER_FILE), spec.producer_csv())?;
    fs::write(dir.join(corpus::CONVERSATION_FILE), spec.conversation_csv())?;
    for plan in &spec.conversations {
        if plan.write_markup {
            let bytes = serialize_eaf(&plan.document()).map_err(io::Error::other)?;
            fs::write(recordings.join(format!("{}.eaf", plan.id)), bytes)?;
        }
        let Some(audio) = &plan.audio else { continue };
        match audio.layout {
            AudioLayoutPlan::Stereo => {
                fs::write(recordings.join(format!("{}.wav", plan.id)), write_wav(&synthesize(audio)))?;
            }
            AudioLayoutPlan::DualMono { right_shortfall_ms } => {
                let folder = recordings.join(&plan.id);
                fs::create_dir_all(&folder)?;
                let frames = ms_to_sample(audio.duration_ms, SAMPLE_RATE) as usize;
                let right_frames =
                    ms_to_sample(audio.duration_ms.saturating_sub(right_shortfall_ms), SAMPLE_RATE) as usize;
                let left = WavBuffer::new(SAMPLE_RATE, 1, tone(frames, audio.left_hz).collect())
                    .map_err(io::Error::other)?;
                let right = WavBuffer::new(SAMPLE_RATE, 1, tone(right_frames, audio.right_hz).collect())
                    .map_err(io::Error::other)?;
                fs::write(folder.join(format!("{}.wav", plan.left)), write_wav(&left))?;
                fs::write(folder.join(format!("{}.wav", plan.right)), write_wav(&right))?;
            }
        }
    }
    Ok(dir.to_owned())
}

/// A random markup document for round-trip testing: arbitrary tier names and
/// values, including characters that need escaping.
pub fn random_document(rng: &mut ChaCha8Rng) -> MarkupDocument {
    const ALPHABET: &[char] = &[
        'a', 'Z', '0', '9', '#', '.', ' ', '&', '<', '>', '"', '\'', '\t', '\n', '\r', 'é', 'ñ', '日', '🎙',
        ';', '=', '/',
    ];
    let text = |rng: &mut ChaCha8Rng, min: usize| -> String {
        let n = rng.random_range(min..12);
        (0..n).map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())]).collect()
    };
    let tier_count = rng.random_range(0..5);
    let mut names = BTreeSet::new();
    let mut tiers = Vec::new();
    for _ in 0..tier_count {
        let name = text(rng, 1);
        if !names.insert(name.clone()) {
            continue;
        }
        let mut annotations = Vec::new();
        for _ in 0..rng.random_range(0..8) {
            let mut value = text(rng, 1);
            if value.trim().is_empty() {
                value.push('x');
            }
            let start = rng.random_range(0..100_000u64);
            let end = start + rng.random_range(1..5_000u64);
            annotations.push(Annotation::new(&value, start, end).expect("non-empty value and span"));
        }
        tiers.push(Tier::new(name, annotations));
    }
    let media = (0..rng.random_range(0..3)).map(|_| text(rng, 0)).collect();
    MarkupDocument::new(media, tiers).expect("unique tier names")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One expected fragment pair, keyed the way release tables name clips.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExpectedPair {
    pub long: bool,
    /// Fragment ids as written in the CSV `id` column.
    pub og_id: String,
    pub re_id: String,
    pub og_ms: (u64, u64),
    pub re_ms: (u64, u64),
}

/// What a release built from a spec must contain.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Expected {
    pub pairs: BTreeSet<ExpectedPair>,
    pub excluded_conversations: BTreeSet<String>,
    pub excluded_fragments: BTreeSet<(String, String, String)>,
    pub included_conversations: BTreeSet<String>,
    pub participants: BTreeSet<u32>,
}

impl Expected {
    pub fn long_pairs(&self) -> usize {
        self.pairs.iter().filter(|p| p.long).count()
    }

    pub fn short_pairs(&self) -> usize {
        self.pairs.iter().filter(|p| !p.long).count()
    }

    /// Mean over both members of every pair, in seconds, unrounded.
    pub fn mean_duration_s(&self, long: bool) -> f64 {
        let durations: Vec<u64> = self
            .pairs
            .iter()
            .filter(|p| p.long == long)
            .flat_map(|p| [p.og_ms.1 - p.og_ms.0, p.re_ms.1 - p.re_ms.0])
            .collect();
        if durations.is_empty() {
            0.0
        } else {
            durations.iter().sum::<u64>() as f64 / durations.len() as f64 / 1000.0
        }
    }
}

struct OracleConv<'a> {
    plan: &'a ConversationPlan,
    /// (uppercase language, number) when the id is well formed.
    id: Option<(String, u16)>,
    kind: Option<bool>,
    key: String,
}

fn oracle_id(text: &str) -> Option<(String, u16)> {
    let bytes = text.as_bytes();
    if bytes.len() != 6 || bytes[2] != b'_' {
        return None;
    }
    let letters = text[..2].to_ascii_lowercase();
    if !letters.bytes().all(|b| b.is_ascii_lowercase()) || !crate::iso639::CODES.contains(&letters.as_str()) {
        return None;
    }
    if !text[3..].bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some((letters.to_ascii_uppercase(), text[3..].parse().ok()?))
}

fn oracle_value(value: &str) -> Option<String> {
    let body = value.strip_prefix('#').unwrap_or(value);
    let mut parts = body.split('.');
    let int = parts.next()?;
    let frac = parts.next();
    if parts.next().is_some() {
        return None;
    }
    let ok = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_ascii_digit());
    (ok(int) && frac.is_none_or(ok)).then(|| body.to_owned())
}

fn loose(text: &str) -> Option<(String, u64)> {
    let (l, d) = text.split_once('_')?;
    if l.is_empty() || d.is_empty() || !d.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    Some((l.to_ascii_uppercase(), d.parse().ok()?))
}

/// Expected release contents for `spec`, computed from the plans by brute
/// force: every lookup is a linear scan and every match a cross product.
pub fn oracle(spec: &FixtureSpec) -> Expected {
    let convs: Vec<OracleConv<'_>> = spec
        .conversations
        .iter()
        .map(|plan| {
            let id = oracle_id(&plan.id);
            let key = id
                .as_ref()
                .map_or_else(|| plan.id.clone(), |(l, n)| format!("{l}_{n:03}"));
            let kind = match plan.og_or_re.as_str() {
                "OG" => Some(true),
                "RE" => Some(false),
                _ => None,
            };
            OracleConv { plan, id, kind, key }
        })
        .collect();

    let candidates = |i: usize| -> Vec<usize> {
        let (Some((lang, num)), Some(kind)) = (&convs[i].id, convs[i].kind) else { return vec![] };
        (0..convs.len())
            .filter(|&j| match (&convs[j].id, convs[j].kind) {
                (Some((l, n)), Some(k)) => l != lang && n == num && k != kind,
                _ => false,
            })
            .collect()
    };
    let translation = |i: usize| -> Option<usize> {
        match candidates(i).as_slice() {
            [j] if candidates(*j).len() == 1 => Some(*j),
            _ => None,
        }
    };
    let loose_partners = |i: usize| -> Vec<usize> {
        let Some((l, n)) = loose(&convs[i].plan.id) else { return vec![] };
        (0..convs.len())
            .filter(|&j| loose(&convs[j].plan.id).is_some_and(|(l2, n2)| n2 == n && l2 != l))
            .collect()
    };

    let mut expected = Expected::default();
    let mut flagged = BTreeSet::new();
    for (i, c) in convs.iter().enumerate() {
        if !c.plan.write_markup
            || c.plan.audio.is_none()
            || c.id.is_none()
            || c.kind.is_none()
            || translation(i).is_none()
        {
            flagged.insert(i);
        }
    }
    for &i in &flagged {
        expected.excluded_conversations.insert(convs[i].key.clone());
        match translation(i) {
            Some(j) => {
                expected.excluded_conversations.insert(convs[j].key.clone());
            }
            None => {
                for j in loose_partners(i) {
                    expected.excluded_conversations.insert(convs[j].key.clone());
                }
            }
        }
    }

    // Occurrences of a canonical value on a tier, DELETE directives aside.
    let count = |i: usize, tier: &str, value: &str| -> usize {
        convs[i]
            .plan
            .annotations
            .iter()
            .filter(|a| a.tier == tier && oracle_value(&a.value).as_deref() == Some(value))
            .count()
    };
    let known = |tier: &str| [UTTERANCE, LITTLE_LEFT, LITTLE_RIGHT].contains(&tier);

    let mut excluded: BTreeSet<(String, String, String)> = BTreeSet::new();
    let exclude = |set: &mut BTreeSet<(String, String, String)>, i: usize, tier: &str, value: &str| {
        set.insert((convs[i].key.clone(), tier.to_owned(), value.to_owned()));
        if let Some(j) = translation(i) {
            set.insert((convs[j].key.clone(), tier.to_owned(), value.to_owned()));
        }
    };
    for (i, c) in convs.iter().enumerate() {
        if !c.plan.write_markup {
            continue;
        }
        for a in &c.plan.annotations {
            let directive = a.tier == UTTERANCE && a.value == DELETE;
            let canonical = oracle_value(&a.value);
            if !known(&a.tier) {
                exclude(&mut excluded, i, &a.tier, canonical.as_deref().unwrap_or(&a.value));
            }
            if directive {
                continue;
            }
            match canonical {
                None => exclude(&mut excluded, i, &a.tier, &a.value),
                Some(v) if count(i, &a.tier, &v) > 1 => exclude(&mut excluded, i, &a.tier, &v),
                Some(_) => {}
            }
        }
    }
    let mut mismatched = Vec::new();
    for (i, c) in convs.iter().enumerate() {
        let Some(j) = translation(i) else { continue };
        if !c.plan.write_markup || !convs[j].plan.write_markup {
            continue;
        }
        for a in &c.plan.annotations {
            if !known(&a.tier) || (a.tier == UTTERANCE && a.value == DELETE) {
                continue;
            }
            let Some(v) = oracle_value(&a.value) else { continue };
            if excluded.contains(&(c.key.clone(), a.tier.clone(), v.clone())) {
                continue;
            }
            if count(j, &a.tier, &v) != 1 {
                mismatched.push((i, a.tier.clone(), v));
            }
        }
    }
    for (i, tier, v) in mismatched {
        exclude(&mut excluded, i, &tier, &v);
    }
    expected.excluded_fragments = excluded.clone();

    let deletes = |i: usize| -> Vec<(u64, u64)> {
        convs[i]
            .plan
            .annotations
            .iter()
            .filter(|a| a.tier == UTTERANCE && a.value == DELETE)
            .map(|a| (a.start_ms, a.end_ms))
            .collect()
    };
    let clear = |i: usize, span: (u64, u64)| deletes(i).iter().all(|&(s, e)| !(span.0 < e && s < span.1));

    for (i, c) in convs.iter().enumerate() {
        if c.kind != Some(true) || expected.excluded_conversations.contains(&c.key) {
            continue;
        }
        let Some(j) = translation(i) else { continue };
        if expected.excluded_conversations.contains(&convs[j].key) {
            continue;
        }
        expected.included_conversations.insert(c.key.clone());
        expected.included_conversations.insert(convs[j].key.clone());
        expected.participants.extend([c.plan.left, c.plan.right, convs[j].plan.left, convs[j].plan.right]);
        for a in &c.plan.annotations {
            if !known(&a.tier) || (a.tier == UTTERANCE && a.value == DELETE) {
                continue;
            }
            let Some(v) = oracle_value(&a.value) else { continue };
            if excluded.contains(&(c.key.clone(), a.tier.clone(), v.clone())) {
                continue;
            }
            for b in &convs[j].plan.annotations {
                if b.tier != a.tier || oracle_value(&b.value).as_deref() != Some(v.as_str()) {
                    continue;
                }
                let og_ms = (a.start_ms, a.end_ms);
                let re_ms = (b.start_ms, b.end_ms);
                if !clear(i, og_ms) || !clear(j, re_ms) {
                    continue;
                }
                let suffix = match a.tier.as_str() {
                    LITTLE_LEFT => "_L",
                    LITTLE_RIGHT => "_R",
                    _ => "",
                };
                expected.pairs.insert(ExpectedPair {
                    long: a.tier == UTTERANCE,
                    og_id: format!("{}_{v}{suffix}", c.key),
                    re_id: format!("{}_{v}{suffix}", convs[j].key),
                    og_ms,
                    re_ms,
                });
            }
        }
    }
    expected
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validate::validate_corpus;

    #[test]
    fn minimal_spec_has_one_long_pair() {
        let expected = oracle(&FixtureSpec::minimal(1));
        assert_eq!(expected.pairs.len(), 1);
        assert_eq!(expected.long_pairs(), 1);
    }

    #[test]
    fn clean_spec_counts() {
        let spec = FixtureSpec::clean(7);
        let expected = oracle(&spec);
        assert_eq!(expected.long_pairs(), 6);
        assert_eq!(expected.short_pairs(), 10);
        assert_eq!(expected.included_conversations.len(), 4);
        let (corpus, markups) = spec.in_memory();
        let report = validate_corpus(&corpus, &markups);
        assert!(report.is_clean(), "{:?}", report.diagnostics);
    }

    #[test]
    fn duplicate_fault_removes_only_that_pair() {
        let spec = FixtureSpec::clean(7);
        let faulty = inject_fault(&spec, FaultKind::DuplicateMarkupValue);
        let before = oracle(&spec);
        let after = oracle(&faulty);
        assert_eq!(after.long_pairs(), before.long_pairs() - 1);
        assert_eq!(after.short_pairs(), before.short_pairs());
        assert!(after.pairs.iter().all(|p| p.og_id != "EN_001_1"));
    }

    #[test]
    fn every_fault_yields_its_code_alone() {
        let spec = FixtureSpec::clean(3);
        for kind in FaultKind::ALL {
            let (corpus, markups) = inject_fault(&spec, kind).in_memory();
            let report = validate_corpus(&corpus, &markups);
            let codes: BTreeSet<_> = report.diagnostics.iter().map(|d| d.code).collect();
            assert_eq!(codes, BTreeSet::from([kind.code()]), "{kind:?}: {:?}", report.diagnostics);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let options = RandomOptions::default();
        assert_eq!(FixtureSpec::random(11, &options), FixtureSpec::random(11, &options));
        assert_eq!(FixtureSpec::clean(11), FixtureSpec::clean(11));
        let mut a = rng(5);
        let mut b = rng(5);
        assert_eq!(random_document(&mut a), random_document(&mut b));
    }

    #[test]
    fn fixture_tree() {
        let dir = tempfile::tempdir().unwrap();
        let spec = FixtureSpec::minimal(2);
        make_fixture(&spec, dir.path()).unwrap();
        let mut names: Vec<String> = fs::read_dir(dir.path().join("recordings"))
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        assert_eq!(names, ["EN_001.eaf", "EN_001.wav", "ES_001.eaf", "ES_001.wav"]);
        for csv in ["participant.csv", "producer.csv", "conversation.csv"] {
            assert!(dir.path().join(csv).is_file());
        }
        let wav = crate::audio::read_wav(&fs::read(dir.path().join("recordings/EN_001.wav")).unwrap()).unwrap();
        let duration = spec.conversations[0].audio.as_ref().unwrap().duration_ms;
        assert_eq!(wav.frames() as u64, (duration * 44_100 + 500) / 1000);
    }
}
