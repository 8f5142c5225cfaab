//! Conversation naming, the three metadata tables, and discovery of the
//! recordings that belong to each conversation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::iso639;

pub const PARTICIPANT_FILE: &str = "participant.csv";
pub const PRODUCER_FILE: &str = "producer.csv";
pub const CONVERSATION_FILE: &str = "conversation.csv";

pub const PARTICIPANT_HEADER: [&str; 8] = [
    "id",
    "lang1",
    "lang2",
    "lang_strength",
    "dialect_note1",
    "dialect_note2",
    "is_producer",
    "notes",
];
pub const PRODUCER_HEADER: [&str; 2] = ["id", "name"];
pub const CONVERSATION_HEADER: [&str; 7] = [
    "id",
    "date",
    "original_or_reenacted",
    "participant_id_left",
    "participant_id_right",
    "producer_id",
    "trans_id",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdError {
    #[error("{0:?} is not of the form <language code>_<three digits>")]
    Shape(String),
    #[error("{text:?} has {found} digits after the underscore, expected three")]
    DigitCount { text: String, found: usize },
    #[error("{0:?} is not an assigned ISO 639-1 language code")]
    UnknownLanguage(String),
}

/// An assigned ISO 639-1 code, stored lowercase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LanguageCode([u8; 2]);

impl LanguageCode {
    pub fn as_str(&self) -> &str {
        // Always two ASCII lowercase letters.
        std::str::from_utf8(&self.0).unwrap_or("??")
    }

    pub fn upper(&self) -> String {
        self.as_str().to_ascii_uppercase()
    }
}

impl FromStr for LanguageCode {
    type Err = IdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        if lower.len() != 2 || !lower.bytes().all(|b| b.is_ascii_lowercase()) {
            return Err(IdError::UnknownLanguage(s.to_owned()));
        }
        if !iso639::is_assigned(&lower) {
            return Err(IdError::UnknownLanguage(s.to_owned()));
        }
        let b = lower.as_bytes();
        Ok(LanguageCode([b[0], b[1]]))
    }
}

impl fmt::Display for LanguageCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `<LANG>_<ddd>`, e.g. `EN_633`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConversationId {
    lang: LanguageCode,
    number: u16,
}

impl ConversationId {
    pub fn new(lang: LanguageCode, number: u16) -> Option<Self> {
        (number < 1000).then_some(ConversationId { lang, number })
    }

    pub fn lang(&self) -> LanguageCode {
        self.lang
    }

    pub fn number(&self) -> u16 {
        self.number
    }
}

impl fmt::Display for ConversationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{:03}", self.lang.upper(), self.number)
    }
}

impl Serialize for ConversationId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

pub fn parse_conversation_id(text: &str) -> Result<ConversationId, IdError> {
    let (letters, digits) = text
        .split_once('_')
        .ok_or_else(|| IdError::Shape(text.to_owned()))?;
    if letters.len() != 2 || !letters.bytes().all(|b| b.is_ascii_alphabetic()) {
        return Err(IdError::Shape(text.to_owned()));
    }
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(IdError::Shape(text.to_owned()));
    }
    if digits.len() != 3 {
        return Err(IdError::DigitCount {
            text: text.to_owned(),
            found: digits.len(),
        });
    }
    let lang: LanguageCode = letters.parse()?;
    let number = digits.parse().map_err(|_| IdError::Shape(text.to_owned()))?;
    Ok(ConversationId { lang, number })
}

impl FromStr for ConversationId {
    type Err = IdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_conversation_id(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum OgRe {
    Original,
    Reenacted,
}

impl OgRe {
    pub fn code(self) -> &'static str {
        match self {
            OgRe::Original => "OG",
            OgRe::Reenacted => "RE",
        }
    }

    pub fn opposite(self) -> OgRe {
        match self {
            OgRe::Original => OgRe::Reenacted,
            OgRe::Reenacted => OgRe::Original,
        }
    }
}

impl FromStr for OgRe {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "OG" => Ok(OgRe::Original),
            "RE" => Ok(OgRe::Reenacted),
            _ => Err(()),
        }
    }
}

impl fmt::Display for OgRe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Participant {
    pub id: u32,
    pub lang1: LanguageCode,
    pub lang2: LanguageCode,
    /// 1 = language 1 stronger ... 5 = language 2 stronger. Stored verbatim.
    pub lang_strength: u8,
    pub dialect_note1: String,
    pub dialect_note2: String,
    pub is_producer: bool,
    pub notes: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Producer {
    pub id: u32,
    pub name: String,
}

/// One row of `conversation.csv`.
///
/// The id and OG/RE code are kept as entered so that malformed values reach
/// validation instead of failing the load.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConversationRecord {
    pub id: String,
    pub date: String,
    pub original_or_reenacted: String,
    pub participant_id_left: u32,
    pub participant_id_right: u32,
    pub producer_id: u32,
    pub trans_id: Option<String>,
}

impl ConversationRecord {
    pub fn conversation_id(&self) -> Result<ConversationId, IdError> {
        parse_conversation_id(&self.id)
    }

    pub fn kind(&self) -> Option<OgRe> {
        self.original_or_reenacted.parse().ok()
    }

    /// Canonical id text when the id is valid, the raw text otherwise.
    pub fn key(&self) -> String {
        match self.conversation_id() {
            Ok(id) => id.to_string(),
            Err(_) => self.id.clone(),
        }
    }
}

#[derive(Debug, Error)]
pub enum MetadataError {
    #[error("{file}: {source}")]
    Io {
        file: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{file}: header must be {expected:?}, found {found:?}")]
    Header {
        file: String,
        expected: Vec<&'static str>,
        found: Vec<String>,
    },
    #[error("{file}:{line}: column {column}: {message}")]
    Field {
        file: String,
        line: u64,
        column: String,
        message: String,
    },
    #[error("{file}:{line}: {message}")]
    Row {
        file: String,
        line: u64,
        message: String,
    },
}

/// The three metadata tables in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Metadata {
    pub participants: Vec<Participant>,
    pub producers: Vec<Producer>,
    pub conversations: Vec<ConversationRecord>,
}

struct Rows {
    file: String,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Rows {
    fn read(file: &str, bytes: &[u8], header: &[&'static str]) -> Result<Rows, MetadataError> {
        let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(bytes);
        let mut records = reader.records();
        let found = match records.next() {
            Some(r) => r.map_err(|e| csv_error(file, e))?,
            None => csv::StringRecord::new(),
        };
        if found.iter().ne(header.iter().copied()) {
            return Err(MetadataError::Header {
                file: file.to_owned(),
                expected: header.to_vec(),
                found: found.iter().map(str::to_owned).collect(),
            });
        }
        let mut rows = Vec::new();
        for record in records {
            let record = record.map_err(|e| csv_error(file, e))?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() == 1 && record[0].trim().is_empty() {
                continue;
            }
            if record.len() != header.len() {
                return Err(MetadataError::Row {
                    file: file.to_owned(),
                    line,
                    message: format!("expected {} fields, found {}", header.len(), record.len()),
                });
            }
            rows.push((line, record));
        }
        Ok(Rows {
            file: file.to_owned(),
            rows,
        })
    }

    fn field_error(&self, line: u64, column: &str, message: impl Into<String>) -> MetadataError {
        MetadataError::Field {
            file: self.file.clone(),
            line,
            column: column.to_owned(),
            message: message.into(),
        }
    }

    fn parse<T: FromStr>(
        &self,
        line: u64,
        record: &csv::StringRecord,
        index: usize,
        column: &str,
    ) -> Result<T, MetadataError> {
        let raw = record[index].trim();
        raw.parse()
            .map_err(|_| self.field_error(line, column, format!("cannot parse {raw:?}")))
    }
}

fn csv_error(file: &str, e: csv::Error) -> MetadataError {
    MetadataError::Row {
        file: file.to_owned(),
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}

fn valid_date(date: &str) -> bool {
    let parts: Vec<&str> = date.split('_').collect();
    if parts.len() != 3
        || parts[0].len() != 2
        || parts[1].len() != 2
        || parts[2].len() != 4
        || !parts.iter().all(|p| p.bytes().all(|b| b.is_ascii_digit()))
    {
        return false;
    }
    let day: u32 = parts[0].parse().unwrap_or(0);
    let month: u32 = parts[1].parse().unwrap_or(0);
    (1..=31).contains(&day) && (1..=12).contains(&month)
}

pub fn parse_participants(bytes: &[u8]) -> Result<Vec<Participant>, MetadataError> {
    let rows = Rows::read(PARTICIPANT_FILE, bytes, &PARTICIPANT_HEADER)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(rows.rows.len());
    for (line, r) in &rows.rows {
        let line = *line;
        let id: u32 = rows.parse(line, r, 0, "id")?;
        if !seen.insert(id) {
            return Err(rows.field_error(line, "id", format!("duplicate participant id {id}")));
        }
        let lang1: LanguageCode = rows.parse(line, r, 1, "lang1")?;
        let lang2: LanguageCode = rows.parse(line, r, 2, "lang2")?;
        if lang1 == lang2 {
            return Err(rows.field_error(line, "lang2", "lang2 must differ from lang1"));
        }
        let lang_strength: u8 = rows.parse(line, r, 3, "lang_strength")?;
        if !(1..=5).contains(&lang_strength) {
            return Err(rows.field_error(line, "lang_strength", "must be an integer 1 through 5"));
        }
        let is_producer = match r[6].trim() {
            "*" => true,
            "" => false,
            other => {
                return Err(rows.field_error(
                    line,
                    "is_producer",
                    format!("expected '*' or blank, found {other:?}"),
                ))
            }
        };
        out.push(Participant {
            id,
            lang1,
            lang2,
            lang_strength,
            dialect_note1: r[4].to_owned(),
            dialect_note2: r[5].to_owned(),
            is_producer,
            notes: r[7].to_owned(),
        });
    }
    Ok(out)
}

pub fn parse_producers(bytes: &[u8]) -> Result<Vec<Producer>, MetadataError> {
    let rows = Rows::read(PRODUCER_FILE, bytes, &PRODUCER_HEADER)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(rows.rows.len());
    for (line, r) in &rows.rows {
        let id: u32 = rows.parse(*line, r, 0, "id")?;
        if !seen.insert(id) {
            return Err(rows.field_error(*line, "id", format!("duplicate producer id {id}")));
        }
        out.push(Producer {
            id,
            name: r[1].to_owned(),
        });
    }
    Ok(out)
}

/// Parses `conversation.csv` and resolves participant and producer references.
pub fn parse_conversations(
    bytes: &[u8],
    participants: &[Participant],
    producers: &[Producer],
) -> Result<Vec<ConversationRecord>, MetadataError> {
    let rows = Rows::read(CONVERSATION_FILE, bytes, &CONVERSATION_HEADER)?;
    let participant_ids: BTreeSet<u32> = participants.iter().map(|p| p.id).collect();
    let producer_ids: BTreeSet<u32> = producers.iter().map(|p| p.id).collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(rows.rows.len());
    for (line, r) in &rows.rows {
        let line = *line;
        let id = r[0].trim().to_owned();
        let date = r[1].trim().to_owned();
        if !valid_date(&date) {
            return Err(rows.field_error(line, "date", format!("{date:?} is not dd_mm_yyyy")));
        }
        let left: u32 = rows.parse(line, r, 3, "participant_id_left")?;
        let right: u32 = rows.parse(line, r, 4, "participant_id_right")?;
        let producer: u32 = rows.parse(line, r, 5, "producer_id")?;
        for (column, pid) in [("participant_id_left", left), ("participant_id_right", right)] {
            if !participant_ids.contains(&pid) {
                return Err(rows.field_error(line, column, format!("unknown participant {pid}")));
            }
        }
        if !producer_ids.contains(&producer) {
            return Err(rows.field_error(line, "producer_id", format!("unknown producer {producer}")));
        }
        let record = ConversationRecord {
            id,
            date,
            original_or_reenacted: r[2].trim().to_owned(),
            participant_id_left: left,
            participant_id_right: right,
            producer_id: producer,
            trans_id: Some(r[6].trim().to_owned()).filter(|t| !t.is_empty()),
        };
        if !seen.insert(record.key().to_ascii_uppercase()) {
            return Err(rows.field_error(line, "id", format!("duplicate conversation id {:?}", record.id)));
        }
        out.push(record);
    }
    Ok(out)
}

fn read_file(path: &Path) -> Result<Vec<u8>, MetadataError> {
    fs::read(path).map_err(|source| MetadataError::Io {
        file: path.to_owned(),
        source,
    })
}

/// Load `participant.csv`, `producer.csv` and `conversation.csv` from `dir`.
pub fn load_metadata(dir: &Path) -> Result<Metadata, MetadataError> {
    let participants = parse_participants(&read_file(&dir.join(PARTICIPANT_FILE))?)?;
    let producers = parse_producers(&read_file(&dir.join(PRODUCER_FILE))?)?;
    let conversations = parse_conversations(
        &read_file(&dir.join(CONVERSATION_FILE))?,
        &participants,
        &producers,
    )?;
    Ok(Metadata {
        participants,
        producers,
        conversations,
    })
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(writer: csv::Writer<Vec<u8>>) -> Vec<u8> {
    // Writing into a Vec cannot fail.
    writer.into_inner().unwrap_or_default()
}

/// Canonical `participant.csv`: rows sorted by id.
pub fn write_participants(participants: &[Participant]) -> Vec<u8> {
    let mut rows: Vec<&Participant> = participants.iter().collect();
    rows.sort_by_key(|p| p.id);
    let mut w = csv_writer();
    let _ = w.write_record(PARTICIPANT_HEADER);
    for p in rows {
        let _ = w.write_record([
            p.id.to_string().as_str(),
            p.lang1.as_str(),
            p.lang2.as_str(),
            p.lang_strength.to_string().as_str(),
            &p.dialect_note1,
            &p.dialect_note2,
            if p.is_producer { "*" } else { "" },
            &p.notes,
        ]);
    }
    finish(w)
}

/// Canonical `producer.csv`: rows sorted by id.
pub fn write_producers(producers: &[Producer]) -> Vec<u8> {
    let mut rows: Vec<&Producer> = producers.iter().collect();
    rows.sort_by_key(|p| p.id);
    let mut w = csv_writer();
    let _ = w.write_record(PRODUCER_HEADER);
    for p in rows {
        let _ = w.write_record([p.id.to_string().as_str(), &p.name]);
    }
    finish(w)
}

/// Canonical `conversation.csv`: rows sorted by canonical id.
pub fn write_conversations(conversations: &[ConversationRecord]) -> Vec<u8> {
    let mut rows: Vec<(String, &ConversationRecord)> =
        conversations.iter().map(|c| (c.key(), c)).collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    let mut w = csv_writer();
    let _ = w.write_record(CONVERSATION_HEADER);
    for (key, c) in rows {
        let trans = c
            .trans_id
            .as_deref()
            .map(|t| parse_conversation_id(t).map_or(t.to_owned(), |id| id.to_string()))
            .unwrap_or_default();
        let _ = w.write_record([
            key.as_str(),
            &c.date,
            &c.original_or_reenacted,
            c.participant_id_left.to_string().as_str(),
            c.participant_id_right.to_string().as_str(),
            c.producer_id.to_string().as_str(),
            trans.as_str(),
        ]);
    }
    finish(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AudioLayout {
    /// `<ID>.wav`, left and right speakers on the two channels.
    StereoSingle(PathBuf),
    /// `<ID>/<participant_id>.wav`, one mono or stereo file per speaker.
    DualMono { left: PathBuf, right: PathBuf },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConversationFiles {
    pub markup: Option<PathBuf>,
    pub audio: Option<AudioLayout>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Metadata(#[from] MetadataError),
}

/// Metadata plus which files exist for each conversation.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub participants: Vec<Participant>,
    pub producers: Vec<Producer>,
    pub conversations: Vec<ConversationRecord>,
    pub recordings_dir: PathBuf,
    /// Keyed by [`ConversationRecord::key`].
    pub files: BTreeMap<String, ConversationFiles>,
}

impl Corpus {
    pub fn files_for(&self, conv: &ConversationRecord) -> ConversationFiles {
        self.files.get(&conv.key()).cloned().unwrap_or_default()
    }

    pub fn conversation(&self, key: &str) -> Option<&ConversationRecord> {
        self.conversations.iter().find(|c| c.key() == key)
    }

    pub fn participant(&self, id: u32) -> Option<&Participant> {
        self.participants.iter().find(|p| p.id == id)
    }
}

fn candidate_names(conv: &ConversationRecord) -> Vec<String> {
    let mut names = vec![conv.id.clone()];
    let key = conv.key();
    if key != conv.id {
        names.push(key);
    }
    names
}

/// Record which markup and audio files exist for each conversation. Missing
/// files are not an error here; validation reports them.
pub fn locate_files(recordings_dir: &Path, conv: &ConversationRecord) -> ConversationFiles {
    let names = candidate_names(conv);
    let markup = names
        .iter()
        .map(|n| recordings_dir.join(format!("{n}.eaf")))
        .find(|p| p.is_file());
    let stereo = names
        .iter()
        .map(|n| recordings_dir.join(format!("{n}.wav")))
        .find(|p| p.is_file());
    let audio = match stereo {
        Some(path) => Some(AudioLayout::StereoSingle(path)),
        None => names.iter().map(|n| recordings_dir.join(n)).find_map(|dir| {
            let left = dir.join(format!("{}.wav", conv.participant_id_left));
            let right = dir.join(format!("{}.wav", conv.participant_id_right));
            (left.is_file() && right.is_file()).then_some(AudioLayout::DualMono { left, right })
        }),
    };
    ConversationFiles { markup, audio }
}

pub fn discover_corpus(recordings_dir: &Path, metadata_dir: &Path) -> Result<Corpus, CorpusError> {
    fs::read_dir(recordings_dir).map_err(|source| CorpusError::Io {
        path: recordings_dir.to_owned(),
        source,
    })?;
    let metadata = load_metadata(metadata_dir)?;
    let files = metadata
        .conversations
        .iter()
        .map(|c| (c.key(), locate_files(recordings_dir, c)))
        .collect();
    Ok(Corpus {
        participants: metadata.participants,
        producers: metadata.producers,
        conversations: metadata.conversations,
        recordings_dir: recordings_dir.to_owned(),
        files,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranslationError {
    #[error("conversation {0:?} has no valid id and OG/RE code")]
    Invalid(String),
    #[error("conversation {0} has no translation")]
    NoTranslation(String),
    #[error("conversation {conversation} has several translation candidates: {candidates:?}")]
    Ambiguous {
        conversation: String,
        candidates: Vec<String>,
    },
}

fn translation_candidates(id: ConversationId, kind: OgRe, corpus: &Corpus) -> Vec<&ConversationRecord> {
    corpus
        .conversations
        .iter()
        .filter(|other| match (other.conversation_id(), other.kind()) {
            (Ok(oid), Some(okind)) => {
                oid.lang() != id.lang() && oid.number() == id.number() && okind == kind.opposite()
            }
            _ => false,
        })
        .collect()
}

/// The unique conversation with another language, the same number and the
/// opposite OG/RE code. Uniqueness is required in both directions, which keeps
/// the relation symmetric.
pub fn find_translation<'a>(
    conv: &ConversationRecord,
    corpus: &'a Corpus,
) -> Result<&'a ConversationRecord, TranslationError> {
    let (id, kind) = match (conv.conversation_id(), conv.kind()) {
        (Ok(id), Some(kind)) => (id, kind),
        _ => return Err(TranslationError::Invalid(conv.id.clone())),
    };
    let candidates = translation_candidates(id, kind, corpus);
    let partner = match candidates.as_slice() {
        [] => return Err(TranslationError::NoTranslation(id.to_string())),
        [one] => *one,
        many => {
            return Err(TranslationError::Ambiguous {
                conversation: id.to_string(),
                candidates: many.iter().map(|c| c.key()).collect(),
            })
        }
    };
    let back = partner
        .conversation_id()
        .ok()
        .zip(partner.kind())
        .map(|(pid, pkind)| translation_candidates(pid, pkind, corpus))
        .unwrap_or_default();
    if back.len() != 1 {
        return Err(TranslationError::Ambiguous {
            conversation: id.to_string(),
            candidates: back.iter().map(|c| c.key()).collect(),
        });
    }
    Ok(partner)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, kind: &str) -> ConversationRecord {
        ConversationRecord {
            id: id.into(),
            date: "05_11_2022".into(),
            original_or_reenacted: kind.into(),
            participant_id_left: 1,
            participant_id_right: 2,
            producer_id: 1,
            trans_id: None,
        }
    }

    fn corpus(records: Vec<ConversationRecord>) -> Corpus {
        Corpus {
            participants: vec![],
            producers: vec![],
            conversations: records,
            recordings_dir: PathBuf::new(),
            files: BTreeMap::new(),
        }
    }

    #[test]
    fn conversation_ids() {
        let id = parse_conversation_id("EN_633").unwrap();
        assert_eq!((id.lang().as_str(), id.number()), ("en", 633));
        let id = parse_conversation_id("ES_008").unwrap();
        assert_eq!((id.lang().as_str(), id.number()), ("es", 8));
        assert_eq!(id.to_string(), "ES_008");
        assert_eq!(parse_conversation_id("es_008").unwrap(), id);
    }

    #[test]
    fn conversation_id_errors() {
        assert_eq!(
            parse_conversation_id("EN_33"),
            Err(IdError::DigitCount {
                text: "EN_33".into(),
                found: 2
            })
        );
        assert!(matches!(parse_conversation_id("XX_001"), Err(IdError::UnknownLanguage(_))));
        for bad in ["EN001", "ENG_001", "E1_001", "EN_", "EN_00a", "_001", ""] {
            assert!(matches!(parse_conversation_id(bad), Err(IdError::Shape(_))), "{bad}");
        }
    }

    #[test]
    fn og_re_codes() {
        assert_eq!("OG".parse(), Ok(OgRe::Original));
        assert_eq!("RE".parse(), Ok(OgRe::Reenacted));
        assert!("og".parse::<OgRe>().is_err());
        assert_eq!(OgRe::Original.to_string(), "OG");
    }

    #[test]
    fn translation_found() {
        let c = corpus(vec![record("EN_006", "OG"), record("ES_006", "RE"), record("ES_007", "RE")]);
        assert_eq!(find_translation(&c.conversations[0], &c).unwrap().id, "ES_006");
        assert_eq!(find_translation(&c.conversations[1], &c).unwrap().id, "EN_006");
    }

    #[test]
    fn translation_missing() {
        let c = corpus(vec![record("EN_006", "OG"), record("ES_007", "RE")]);
        assert_eq!(
            find_translation(&c.conversations[0], &c),
            Err(TranslationError::NoTranslation("EN_006".into()))
        );
    }

    #[test]
    fn translation_requires_opposite_code() {
        let c = corpus(vec![record("EN_006", "OG"), record("ES_006", "OG")]);
        assert!(find_translation(&c.conversations[0], &c).is_err());
    }

    /// Candidates enumerated by hand for a three-way collision.
    #[test]
    fn translation_ambiguous() {
        let c = corpus(vec![record("EN_006", "OG"), record("ES_006", "RE"), record("JA_006", "RE")]);
        let brute: Vec<&str> = c
            .conversations
            .iter()
            .filter(|o| o.id != "EN_006" && o.id.ends_with("_006") && o.original_or_reenacted == "RE")
            .map(|o| o.id.as_str())
            .collect();
        assert_eq!(brute.len(), 2);
        assert!(matches!(
            find_translation(&c.conversations[0], &c),
            Err(TranslationError::Ambiguous { .. })
        ));
        // Each RE side sees only EN_006, but EN_006 is ambiguous.
        assert!(find_translation(&c.conversations[1], &c).is_err());
        assert!(find_translation(&c.conversations[2], &c).is_err());
    }

    #[test]
    fn participant_row() {
        let csv = "id,lang1,lang2,lang_strength,dialect_note1,dialect_note2,is_producer,notes\n\
                   7,en,es,3,El Paso,El Paso / Juarez,,\n";
        let p = &parse_participants(csv.as_bytes()).unwrap()[0];
        assert_eq!(p.id, 7);
        assert_eq!(p.lang_strength, 3);
        assert!(!p.is_producer);
        assert_eq!(p.dialect_note2, "El Paso / Juarez");
        assert_eq!(write_participants(std::slice::from_ref(p)), csv.as_bytes());
    }

    #[test]
    fn participant_errors_carry_location() {
        let bad_strength = "id,lang1,lang2,lang_strength,dialect_note1,dialect_note2,is_producer,notes\n\
                            1,en,es,3,,,*,\n2,en,es,6,,,,\n";
        match parse_participants(bad_strength.as_bytes()).unwrap_err() {
            MetadataError::Field { line, column, .. } => {
                assert_eq!(line, 3);
                assert_eq!(column, "lang_strength");
            }
            other => panic!("{other:?}"),
        }
        let same_lang = "id,lang1,lang2,lang_strength,dialect_note1,dialect_note2,is_producer,notes\n\
                         1,en,en,3,,,,\n";
        assert!(parse_participants(same_lang.as_bytes()).is_err());
        let misordered = "id,lang2,lang1,lang_strength,dialect_note1,dialect_note2,is_producer,notes\n";
        assert!(matches!(
            parse_participants(misordered.as_bytes()),
            Err(MetadataError::Header { .. })
        ));
    }

    #[test]
    fn conversation_row_without_translation() {
        let participants = parse_participants(
            b"id,lang1,lang2,lang_strength,dialect_note1,dialect_note2,is_producer,notes\n1,en,es,1,,,*,\n2,es,en,2,,,,\n",
        )
        .unwrap();
        let producers = parse_producers(b"id,name\n1,Operator\n").unwrap();
        let csv = "id,date,original_or_reenacted,participant_id_left,participant_id_right,producer_id,trans_id\n\
                   EN_001,05_11_2022,OG,1,2,1,\n";
        let rows = parse_conversations(csv.as_bytes(), &participants, &producers).unwrap();
        assert_eq!(rows[0].trans_id, None);
        assert_eq!(rows[0].kind(), Some(OgRe::Original));
        assert_eq!(write_conversations(&rows), csv.as_bytes());

        let unknown = csv.replace(",1,2,1,", ",1,9,1,");
        assert!(matches!(
            parse_conversations(unknown.as_bytes(), &participants, &producers),
            Err(MetadataError::Field { column, .. }) if column == "participant_id_right"
        ));
        let bad_date = csv.replace("05_11_2022", "2022-11-05");
        assert!(parse_conversations(bad_date.as_bytes(), &participants, &producers).is_err());
        let duplicate = format!("{csv}en_001,06_11_2022,RE,1,2,1,\n");
        assert!(parse_conversations(duplicate.as_bytes(), &participants, &producers).is_err());
    }

    #[test]
    fn quoted_fields_round_trip() {
        let producers = vec![Producer {
            id: 2,
            name: "Avila, Jonathan".into(),
        }];
        let bytes = write_producers(&producers);
        assert_eq!(bytes, b"id,name\n2,\"Avila, Jonathan\"\n");
        assert_eq!(parse_producers(&bytes).unwrap(), producers);
    }

    #[test]
    fn dates() {
        assert!(valid_date("05_11_2022"));
        assert!(valid_date("31_12_1999"));
        assert!(!valid_date("32_01_2022"));
        assert!(!valid_date("01_13_2022"));
        assert!(!valid_date("1_1_2022"));
    }
}
