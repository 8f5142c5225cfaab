//! Reading and writing the subset of the ELAN Annotation Format (EAF) used by
//! the recording protocol: a time order of millisecond time slots and tiers of
//! time-aligned annotations.
//!
//! Reference annotations and controlled vocabularies are rejected. Any other
//! element or attribute outside the subset is skipped, so files written by
//! different ELAN versions load the same way.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use thiserror::Error;

/// Violation of a markup type invariant.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InvariantError {
    #[error("annotation value is empty")]
    EmptyValue,
    #[error("annotation span {start_ms}..{end_ms} ms is empty or reversed")]
    EmptySpan { start_ms: u64, end_ms: u64 },
    #[error("tier name {0:?} appears more than once")]
    DuplicateTier(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("input is not UTF-8 (byte offset {offset})")]
    Encoding { offset: u64 },
    #[error("malformed XML at byte offset {offset}: {message}")]
    Xml { offset: u64, message: String },
    #[error("root element must be ANNOTATION_DOCUMENT (byte offset {offset})")]
    Root { offset: u64 },
    #[error("<{element}> is missing attribute {attribute} (byte offset {offset})")]
    MissingAttribute {
        element: String,
        attribute: &'static str,
        offset: u64,
    },
    #[error("unsupported element <{element}> at byte offset {offset}")]
    Unsupported { element: String, offset: u64 },
    #[error("time slot {slot} has an invalid TIME_VALUE {value:?}")]
    BadTimeValue { slot: String, value: String },
    #[error("annotation {annotation} references missing time slot {slot}")]
    MissingTimeSlot { annotation: String, slot: String },
    #[error("annotation {annotation} references time slot {slot}, which has no time value")]
    UnvaluedTimeSlot { annotation: String, slot: String },
    #[error("annotation {annotation}: {source}")]
    Annotation {
        annotation: String,
        source: InvariantError,
    },
    #[error(transparent)]
    Document(#[from] InvariantError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SerializeError {
    #[error("{what} contains a character that XML 1.0 cannot represent: {text:?}")]
    Unrepresentable { what: &'static str, text: String },
}

/// One time-aligned region on a tier.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Annotation {
    value: String,
    start_ms: u64,
    end_ms: u64,
}

impl Annotation {
    /// Surrounding whitespace of `value` is trimmed; internal whitespace is kept.
    pub fn new(value: &str, start_ms: u64, end_ms: u64) -> Result<Self, InvariantError> {
        let value = value.trim();
        if value.is_empty() {
            return Err(InvariantError::EmptyValue);
        }
        if start_ms >= end_ms {
            return Err(InvariantError::EmptySpan { start_ms, end_ms });
        }
        Ok(Annotation {
            value: value.to_owned(),
            start_ms,
            end_ms,
        })
    }

    pub fn value(&self) -> &str {
        &self.value
    }

    pub fn start_ms(&self) -> u64 {
        self.start_ms
    }

    pub fn end_ms(&self) -> u64 {
        self.end_ms
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tier {
    name: String,
    annotations: Vec<Annotation>,
}

impl Tier {
    /// Annotations are sorted by start time, then end time. The sort is stable,
    /// so identical spans keep their input order.
    pub fn new(name: impl Into<String>, mut annotations: Vec<Annotation>) -> Self {
        annotations.sort_by_key(|a| (a.start_ms, a.end_ms));
        Tier {
            name: name.into(),
            annotations,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn annotations(&self) -> &[Annotation] {
        &self.annotations
    }
}

/// The contents of one `.eaf` file.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MarkupDocument {
    media_descriptors: Vec<String>,
    tiers: Vec<Tier>,
}

impl MarkupDocument {
    pub fn new(media_descriptors: Vec<String>, tiers: Vec<Tier>) -> Result<Self, InvariantError> {
        let mut seen = HashSet::new();
        for tier in &tiers {
            if !seen.insert(tier.name.as_str()) {
                return Err(InvariantError::DuplicateTier(tier.name.clone()));
            }
        }
        Ok(MarkupDocument {
            media_descriptors,
            tiers,
        })
    }

    pub fn media_descriptors(&self) -> &[String] {
        &self.media_descriptors
    }

    pub fn tiers(&self) -> &[Tier] {
        &self.tiers
    }

    pub fn tier(&self, name: &str) -> Option<&Tier> {
        self.tiers.iter().find(|t| t.name == name)
    }
}

struct PendingAnnotation {
    id: String,
    slot_start: String,
    slot_end: String,
    value: String,
}

struct PendingTier {
    name: String,
    annotations: Vec<PendingAnnotation>,
}

fn attribute(
    element: &BytesStart<'_>,
    key: &'static str,
    offset: u64,
) -> Result<Option<String>, ParseError> {
    for attr in element.attributes() {
        let attr = attr.map_err(|e| ParseError::Xml {
            offset,
            message: e.to_string(),
        })?;
        if attr.key.as_ref() == key {
            let value = attr
                .normalized_value(quick_xml::XmlVersion::Implicit1_0)
                .map_err(|e| ParseError::Xml {
                    offset,
                    message: e.to_string(),
                })?;
            return Ok(Some(value.into_owned()));
        }
    }
    Ok(None)
}

fn required_attribute(
    element: &BytesStart<'_>,
    key: &'static str,
    offset: u64,
) -> Result<String, ParseError> {
    attribute(element, key, offset)?.ok_or_else(|| ParseError::MissingAttribute {
        element: element.name().as_ref().to_owned(),
        attribute: key,
        offset,
    })
}

fn resolve_entity(name: &str) -> Option<char> {
    match name {
        "lt" => Some('<'),
        "gt" => Some('>'),
        "amp" => Some('&'),
        "apos" => Some('\''),
        "quot" => Some('"'),
        _ => None,
    }
}

/// Parse an EAF document from raw bytes.
pub fn parse_eaf(bytes: &[u8]) -> Result<MarkupDocument, ParseError> {
    let text = std::str::from_utf8(bytes).map_err(|e| ParseError::Encoding {
        offset: e.valid_up_to() as u64,
    })?;
    let mut reader = Reader::from_str(text);

    let mut slots: HashMap<String, Option<u64>> = HashMap::new();
    let mut media = Vec::new();
    let mut tiers: Vec<PendingTier> = Vec::new();
    let mut stack: Vec<String> = Vec::new();
    let mut current_tier: Option<PendingTier> = None;
    let mut current_annotation: Option<PendingAnnotation> = None;
    let mut in_value = false;
    let mut saw_root = false;

    loop {
        let offset = reader.buffer_position();
        let event = reader.read_event().map_err(|e| ParseError::Xml {
            offset: reader.error_position(),
            message: e.to_string(),
        })?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let is_empty = matches!(event, Event::Empty(_));
                let name = e.name().as_ref().to_owned();
                if stack.is_empty() {
                    if saw_root || name != "ANNOTATION_DOCUMENT" {
                        return Err(ParseError::Root { offset });
                    }
                    saw_root = true;
                }
                match name.as_str() {
                    "REF_ANNOTATION" | "CONTROLLED_VOCABULARY" => {
                        return Err(ParseError::Unsupported {
                            element: name.clone(),
                            offset,
                        });
                    }
                    "MEDIA_DESCRIPTOR" => {
                        if let Some(url) = attribute(e, "MEDIA_URL", offset)? {
                            media.push(url);
                        }
                    }
                    "TIME_SLOT" => {
                        let id = required_attribute(e, "TIME_SLOT_ID", offset)?;
                        let value = match attribute(e, "TIME_VALUE", offset)? {
                            Some(v) => Some(v.trim().parse::<u64>().map_err(|_| {
                                ParseError::BadTimeValue {
                                    slot: id.clone(),
                                    value: v.clone(),
                                }
                            })?),
                            None => None,
                        };
                        slots.insert(id, value);
                    }
                    "TIER" => {
                        let tier = PendingTier {
                            name: required_attribute(e, "TIER_ID", offset)?,
                            annotations: Vec::new(),
                        };
                        if is_empty {
                            tiers.push(tier);
                        } else {
                            current_tier = Some(tier);
                        }
                    }
                    "ALIGNABLE_ANNOTATION" => {
                        let annotation = PendingAnnotation {
                            id: required_attribute(e, "ANNOTATION_ID", offset)?,
                            slot_start: required_attribute(e, "TIME_SLOT_REF1", offset)?,
                            slot_end: required_attribute(e, "TIME_SLOT_REF2", offset)?,
                            value: String::new(),
                        };
                        if is_empty {
                            if let Some(tier) = current_tier.as_mut() {
                                tier.annotations.push(annotation);
                            }
                        } else {
                            current_annotation = Some(annotation);
                        }
                    }
                    "ANNOTATION_VALUE" if !is_empty && current_annotation.is_some() => {
                        in_value = true;
                    }
                    _ => {}
                }
                if !is_empty {
                    stack.push(name);
                }
            }
            Event::End(e) => {
                match e.name().as_ref() {
                    "ANNOTATION_VALUE" => in_value = false,
                    "ALIGNABLE_ANNOTATION" => {
                        if let (Some(annotation), Some(tier)) =
                            (current_annotation.take(), current_tier.as_mut())
                        {
                            tier.annotations.push(annotation);
                        }
                    }
                    "TIER" => {
                        if let Some(tier) = current_tier.take() {
                            tiers.push(tier);
                        }
                    }
                    _ => {}
                }
                stack.pop();
            }
            Event::Text(t) if in_value => {
                if let Some(a) = current_annotation.as_mut() {
                    a.value.push_str(&t.xml10_content());
                }
            }
            Event::CData(t) if in_value => {
                if let Some(a) = current_annotation.as_mut() {
                    a.value.push_str(&t.xml10_content());
                }
            }
            Event::GeneralRef(r) => {
                let offset = reader.buffer_position();
                let ch = match r.resolve_char_ref() {
                    Ok(Some(c)) => c,
                    Ok(None) => resolve_entity(&r.xml10_content()).ok_or_else(|| {
                        ParseError::Xml {
                            offset,
                            message: format!("unknown entity &{};", r.xml10_content()),
                        }
                    })?,
                    Err(e) => {
                        return Err(ParseError::Xml {
                            offset,
                            message: e.to_string(),
                        })
                    }
                };
                if in_value {
                    if let Some(a) = current_annotation.as_mut() {
                        a.value.push(ch);
                    }
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }

    if !saw_root {
        return Err(ParseError::Root {
            offset: reader.buffer_position(),
        });
    }

    let resolve = |annotation: &str, slot: &str| -> Result<u64, ParseError> {
        match slots.get(slot) {
            None => Err(ParseError::MissingTimeSlot {
                annotation: annotation.to_owned(),
                slot: slot.to_owned(),
            }),
            Some(None) => Err(ParseError::UnvaluedTimeSlot {
                annotation: annotation.to_owned(),
                slot: slot.to_owned(),
            }),
            Some(Some(ms)) => Ok(*ms),
        }
    };

    let mut built = Vec::with_capacity(tiers.len());
    for tier in tiers {
        let mut annotations = Vec::with_capacity(tier.annotations.len());
        for pending in tier.annotations {
            let start = resolve(&pending.id, &pending.slot_start)?;
            let end = resolve(&pending.id, &pending.slot_end)?;
            let annotation = Annotation::new(&pending.value, start, end).map_err(|source| {
                ParseError::Annotation {
                    annotation: pending.id.clone(),
                    source,
                }
            })?;
            annotations.push(annotation);
        }
        built.push(Tier::new(tier.name, annotations));
    }
    Ok(MarkupDocument::new(media, built)?)
}

fn is_xml_char(c: char) -> bool {
    matches!(c, '\u{9}' | '\u{A}' | '\u{D}' | '\u{20}'..='\u{D7FF}' | '\u{E000}'..='\u{FFFD}' | '\u{10000}'..='\u{10FFFF}')
}

fn escape_into(out: &mut String, text: &str, attribute: bool) {
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            '\r' => out.push_str("&#13;"),
            '\n' if attribute => out.push_str("&#10;"),
            '\t' if attribute => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
}

fn check_representable(what: &'static str, text: &str) -> Result<(), SerializeError> {
    if text.chars().all(is_xml_char) {
        Ok(())
    } else {
        Err(SerializeError::Unrepresentable {
            what,
            text: text.to_owned(),
        })
    }
}

/// Serialize a document as EAF 3.0 XML. Time slots are numbered `ts1`, `ts2`,
/// ... in tier order, two per annotation.
pub fn serialize_eaf(doc: &MarkupDocument) -> Result<Vec<u8>, SerializeError> {
    for url in &doc.media_descriptors {
        check_representable("media descriptor", url)?;
    }
    for tier in &doc.tiers {
        check_representable("tier name", &tier.name)?;
        for a in &tier.annotations {
            check_representable("annotation value", &a.value)?;
        }
    }

    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(
        "<ANNOTATION_DOCUMENT AUTHOR=\"\" DATE=\"1970-01-01T00:00:00+00:00\" FORMAT=\"3.0\" VERSION=\"3.0\">\n",
    );
    out.push_str("    <HEADER MEDIA_FILE=\"\" TIME_UNITS=\"milliseconds\">\n");
    for url in &doc.media_descriptors {
        out.push_str("        <MEDIA_DESCRIPTOR MEDIA_URL=\"");
        escape_into(&mut out, url, true);
        out.push_str("\" MIME_TYPE=\"audio/x-wav\"/>\n");
    }
    out.push_str("    </HEADER>\n");

    out.push_str("    <TIME_ORDER>\n");
    let mut slot = 0usize;
    for tier in &doc.tiers {
        for a in &tier.annotations {
            for ms in [a.start_ms, a.end_ms] {
                slot += 1;
                let _ = writeln!(
                    out,
                    "        <TIME_SLOT TIME_SLOT_ID=\"ts{slot}\" TIME_VALUE=\"{ms}\"/>"
                );
            }
        }
    }
    out.push_str("    </TIME_ORDER>\n");

    let mut slot = 0usize;
    for tier in &doc.tiers {
        out.push_str("    <TIER LINGUISTIC_TYPE_REF=\"default-lt\" TIER_ID=\"");
        escape_into(&mut out, &tier.name, true);
        out.push_str("\">\n");
        for a in &tier.annotations {
            let first = slot + 1;
            let second = slot + 2;
            slot += 2;
            let _ = writeln!(out, "        <ANNOTATION>");
            let _ = writeln!(
                out,
                "            <ALIGNABLE_ANNOTATION ANNOTATION_ID=\"a{}\" TIME_SLOT_REF1=\"ts{first}\" TIME_SLOT_REF2=\"ts{second}\">",
                second / 2
            );
            out.push_str("                <ANNOTATION_VALUE>");
            escape_into(&mut out, &a.value, false);
            out.push_str("</ANNOTATION_VALUE>\n");
            out.push_str("            </ALIGNABLE_ANNOTATION>\n");
            out.push_str("        </ANNOTATION>\n");
        }
        out.push_str("    </TIER>\n");
    }
    out.push_str(
        "    <LINGUISTIC_TYPE GRAPHIC_REFERENCES=\"false\" LINGUISTIC_TYPE_ID=\"default-lt\" TIME_ALIGNABLE=\"true\"/>\n",
    );
    out.push_str("</ANNOTATION_DOCUMENT>\n");
    Ok(out.into_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<ANNOTATION_DOCUMENT AUTHOR="" FORMAT="3.0" VERSION="3.0">
  <HEADER MEDIA_FILE="" TIME_UNITS="milliseconds">
    <MEDIA_DESCRIPTOR MEDIA_URL="file:///recordings/EN_001.wav" MIME_TYPE="audio/x-wav"/>
    <PROPERTY NAME="lastUsedAnnotationId">1</PROPERTY>
  </HEADER>
  <TIME_ORDER>
    <TIME_SLOT TIME_SLOT_ID="ts1" TIME_VALUE="1000"/>
    <TIME_SLOT TIME_SLOT_ID="ts2" TIME_VALUE="4000"/>
  </TIME_ORDER>
  <TIER LINGUISTIC_TYPE_REF="default-lt" TIER_ID="Utterance">
    <ANNOTATION>
      <ALIGNABLE_ANNOTATION ANNOTATION_ID="a1" TIME_SLOT_REF1="ts1" TIME_SLOT_REF2="ts2">
        <ANNOTATION_VALUE>#1</ANNOTATION_VALUE>
      </ALIGNABLE_ANNOTATION>
    </ANNOTATION>
  </TIER>
  <LINGUISTIC_TYPE LINGUISTIC_TYPE_ID="default-lt" TIME_ALIGNABLE="true"/>
</ANNOTATION_DOCUMENT>
"#;

    fn doc_with(body: &str) -> String {
        format!(
            "<ANNOTATION_DOCUMENT><TIME_ORDER>\
             <TIME_SLOT TIME_SLOT_ID=\"ts1\" TIME_VALUE=\"100\"/>\
             <TIME_SLOT TIME_SLOT_ID=\"ts2\" TIME_VALUE=\"200\"/>\
             <TIME_SLOT TIME_SLOT_ID=\"ts3\"/>\
             </TIME_ORDER>{body}</ANNOTATION_DOCUMENT>"
        )
    }

    #[test]
    fn minimal_document() {
        let doc = parse_eaf(MINIMAL.as_bytes()).unwrap();
        assert_eq!(doc.tiers().len(), 1);
        assert_eq!(doc.media_descriptors(), ["file:///recordings/EN_001.wav"]);
        let tier = &doc.tiers()[0];
        assert_eq!(tier.name(), "Utterance");
        assert_eq!(tier.annotations(), [Annotation::new("#1", 1000, 4000).unwrap()]);
    }

    #[test]
    fn zero_tiers() {
        let doc = parse_eaf(b"<ANNOTATION_DOCUMENT><HEADER/><TIME_ORDER/></ANNOTATION_DOCUMENT>").unwrap();
        assert!(doc.tiers().is_empty());
    }

    #[test]
    fn values_are_trimmed_and_unescaped() {
        let xml = doc_with(
            "<TIER TIER_ID=\"Utterance\"><ANNOTATION><ALIGNABLE_ANNOTATION ANNOTATION_ID=\"a1\" \
             TIME_SLOT_REF1=\"ts1\" TIME_SLOT_REF2=\"ts2\"><ANNOTATION_VALUE>  #12 a &amp; b&#33;\n</ANNOTATION_VALUE>\
             </ALIGNABLE_ANNOTATION></ANNOTATION></TIER>",
        );
        let doc = parse_eaf(xml.as_bytes()).unwrap();
        assert_eq!(doc.tiers()[0].annotations()[0].value(), "#12 a & b!");
    }

    #[test]
    fn annotations_sorted_by_start_then_end() {
        let doc = MarkupDocument::new(
            vec![],
            vec![Tier::new(
                "LittleLeft",
                vec![
                    Annotation::new("3", 500, 900).unwrap(),
                    Annotation::new("2", 100, 400).unwrap(),
                    Annotation::new("1", 100, 300).unwrap(),
                ],
            )],
        )
        .unwrap();
        let parsed = parse_eaf(&serialize_eaf(&doc).unwrap()).unwrap();
        let values: Vec<_> = parsed.tiers()[0].annotations().iter().map(|a| a.value()).collect();
        assert_eq!(values, ["1", "2", "3"]);
    }

    #[test]
    fn malformed_xml_reports_offset() {
        let err = parse_eaf(b"<ANNOTATION_DOCUMENT><TIER TIER_ID=\"x\"></ANNOTATION_DOCUMENT>").unwrap_err();
        assert!(matches!(err, ParseError::Xml { offset, .. } if offset > 0), "{err:?}");
    }

    #[test]
    fn missing_and_unvalued_slots() {
        let missing = doc_with(
            "<TIER TIER_ID=\"Utterance\"><ANNOTATION><ALIGNABLE_ANNOTATION ANNOTATION_ID=\"a7\" \
             TIME_SLOT_REF1=\"ts1\" TIME_SLOT_REF2=\"ts9\"><ANNOTATION_VALUE>1</ANNOTATION_VALUE>\
             </ALIGNABLE_ANNOTATION></ANNOTATION></TIER>",
        );
        assert_eq!(
            parse_eaf(missing.as_bytes()).unwrap_err(),
            ParseError::MissingTimeSlot {
                annotation: "a7".into(),
                slot: "ts9".into()
            }
        );
        let unvalued = missing.replace("ts9", "ts3");
        assert_eq!(
            parse_eaf(unvalued.as_bytes()).unwrap_err(),
            ParseError::UnvaluedTimeSlot {
                annotation: "a7".into(),
                slot: "ts3".into()
            }
        );
    }

    #[test]
    fn reversed_span_names_annotation() {
        let xml = doc_with(
            "<TIER TIER_ID=\"Utterance\"><ANNOTATION><ALIGNABLE_ANNOTATION ANNOTATION_ID=\"a2\" \
             TIME_SLOT_REF1=\"ts2\" TIME_SLOT_REF2=\"ts1\"><ANNOTATION_VALUE>1</ANNOTATION_VALUE>\
             </ALIGNABLE_ANNOTATION></ANNOTATION></TIER>",
        );
        match parse_eaf(xml.as_bytes()).unwrap_err() {
            ParseError::Annotation { annotation, source } => {
                assert_eq!(annotation, "a2");
                assert_eq!(source, InvariantError::EmptySpan { start_ms: 200, end_ms: 100 });
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reference_annotations_rejected() {
        let xml = doc_with(
            "<TIER TIER_ID=\"x\"><ANNOTATION><REF_ANNOTATION ANNOTATION_ID=\"a2\" ANNOTATION_REF=\"a1\">\
             <ANNOTATION_VALUE>1</ANNOTATION_VALUE></REF_ANNOTATION></ANNOTATION></TIER>",
        );
        assert!(matches!(
            parse_eaf(xml.as_bytes()).unwrap_err(),
            ParseError::Unsupported { element, .. } if element == "REF_ANNOTATION"
        ));
    }

    #[test]
    fn duplicate_tier_rejected() {
        let xml = doc_with("<TIER TIER_ID=\"Utterance\"/><TIER TIER_ID=\"Utterance\"/>");
        assert_eq!(
            parse_eaf(xml.as_bytes()).unwrap_err(),
            ParseError::Document(InvariantError::DuplicateTier("Utterance".into()))
        );
    }

    #[test]
    fn wrong_root_rejected() {
        assert!(matches!(parse_eaf(b"<html/>").unwrap_err(), ParseError::Root { .. }));
        assert!(matches!(parse_eaf(b"").unwrap_err(), ParseError::Root { .. }));
    }

    #[test]
    fn empty_document_round_trips() {
        let empty = MarkupDocument::default();
        let bytes = serialize_eaf(&empty).unwrap();
        assert_eq!(parse_eaf(&bytes).unwrap(), empty);
    }

    #[test]
    fn minimal_document_round_trips() {
        let doc = parse_eaf(MINIMAL.as_bytes()).unwrap();
        assert_eq!(parse_eaf(&serialize_eaf(&doc).unwrap()).unwrap(), doc);
    }

    #[test]
    fn control_characters_are_unrepresentable() {
        let doc = MarkupDocument::new(
            vec![],
            vec![Tier::new("Utterance", vec![Annotation::new("1\u{1}", 0, 1).unwrap()])],
        )
        .unwrap();
        assert!(matches!(serialize_eaf(&doc), Err(SerializeError::Unrepresentable { .. })));
    }
}
