//! Building a release tree from a validated input corpus, recomputing its
//! statistics, and the command-line front end.
//!
//! Output layout:
//!
//! ```text
//! <out>/recordings/<ConvId>.wav                     full recording, DELETE spans silenced
//! <out>/fragments-long/<FragmentId>.wav             stereo
//! <out>/fragments-short/<FragmentId>_<L|R>.wav      mono
//! <out>/fragments-short-concat/<ConvId>_<left|right>.wav
//! <out>/{conversation,participant,producer}.csv
//! <out>/fragments-long.csv, fragments-short.csv
//! <out>/manifest.json
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::audio::{
    self, cut, extract_channel, format_duration, interleave, mix_to_mono, pad_to, parse_duration,
    read_wav, silence_clamped, write_wav, AudioError, WavBuffer,
};
use crate::corpus::{
    self, discover_corpus, find_translation, load_metadata, AudioLayout, ConversationId, ConversationRecord, Corpus,
    CorpusError, MetadataError, OgRe, Side,
};
use crate::eaf::{parse_eaf, MarkupDocument, ParseError};
use crate::pairing::{
    apply_redactions, extract_fragments, pair_fragments, retain_valid, Fragment, FragmentKind, FragmentPair,
    FragmentSide, RedactionSpan,
};
use crate::validate::{report_csv, validate_corpus, ValidationReport};

pub const RECORDINGS_DIR: &str = "recordings";
pub const LONG_DIR: &str = "fragments-long";
pub const SHORT_DIR: &str = "fragments-short";
pub const CONCAT_DIR: &str = "fragments-short-concat";
pub const LONG_TABLE: &str = "fragments-long.csv";
pub const SHORT_TABLE: &str = "fragments-short.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const FRAGMENT_HEADER: [&str; 6] = ["id", "time_start", "time_end", "duration", "conv_id", "trans_id"];
pub const REDACTION_MODE: &str = "silence";

#[derive(Debug, Clone)]
pub struct ReleaseConfig {
    pub input_dir: PathBuf,
    pub output_dir: PathBuf,
    pub strict: bool,
    pub report_path: Option<PathBuf>,
    /// Run conversation pairs on the rayon pool. Output is identical either way.
    pub parallel: bool,
}

impl ReleaseConfig {
    pub fn new(input_dir: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        ReleaseConfig {
            input_dir: input_dir.into(),
            output_dir: output_dir.into(),
            strict: false,
            report_path: None,
            parallel: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum ReleaseError {
    #[error("input and output directory are the same: {0}")]
    SameDirectory(PathBuf),
    #[error("output directory {0} exists and is not empty")]
    OutputNotEmpty(PathBuf),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {source}")]
    Markup {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
    #[error("{path}: {source}")]
    Audio {
        path: PathBuf,
        #[source]
        source: AudioError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("strict mode: {} diagnostic(s), nothing written", .0.diagnostics.len())]
    Strict(Box<ValidationReport>),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ReleaseError + '_ {
    move |source| ReleaseError::Io {
        path: path.to_owned(),
        source,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct OutputCounts {
    pub recordings: usize,
    pub long_clips: usize,
    pub short_clips: usize,
    pub concatenations: usize,
    pub fragment_tables: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ReleaseManifest {
    pub included_conversations: Vec<String>,
    pub counts: OutputCounts,
    /// Diagnostic code -> number of occurrences.
    pub diagnostics: BTreeMap<String, usize>,
    pub redaction: String,
    pub warnings: Vec<String>,
}

/// One surviving OG/RE conversation pair and the fragment pairs it yields.
#[derive(Debug, Clone)]
pub struct PairJob {
    pub og: ConversationRecord,
    pub re: ConversationRecord,
    pub og_id: ConversationId,
    pub re_id: ConversationId,
    pub og_audio: Option<AudioLayout>,
    pub re_audio: Option<AudioLayout>,
    pub pairs: Vec<FragmentPair>,
    pub og_redactions: Vec<RedactionSpan>,
    pub re_redactions: Vec<RedactionSpan>,
}

#[derive(Debug, Clone)]
pub struct ReleasePlan {
    pub report: ValidationReport,
    /// Ordered by OG conversation id.
    pub jobs: Vec<PairJob>,
}

impl ReleasePlan {
    pub fn pairs(&self) -> impl Iterator<Item = &FragmentPair> {
        self.jobs.iter().flat_map(|j| &j.pairs)
    }
}

/// Validation plus pairing, with no audio or filesystem access.
pub fn plan_release(corpus: &Corpus, markups: &BTreeMap<String, MarkupDocument>) -> ReleasePlan {
    let report = validate_corpus(corpus, markups);
    let mut jobs = Vec::new();
    for og in &corpus.conversations {
        if og.kind() != Some(OgRe::Original) || report.exclusions.contains(&og.key()) {
            continue;
        }
        let (Ok(og_id), Ok(re)) = (og.conversation_id(), find_translation(og, corpus)) else { continue };
        let Ok(re_id) = re.conversation_id() else { continue };
        if report.exclusions.contains(&re.key()) {
            continue;
        }
        let (Some(og_doc), Some(re_doc)) = (markups.get(&og.key()), markups.get(&re.key())) else { continue };
        let side = |id: ConversationId, doc: &MarkupDocument| {
            let (fragments, redactions) = extract_fragments(id, doc);
            let (kept, _) = apply_redactions(retain_valid(fragments, &report), &redactions);
            (kept, redactions)
        };
        let (og_frags, og_redactions) = side(og_id, og_doc);
        let (re_frags, re_redactions) = side(re_id, re_doc);
        let (pairs, _) = pair_fragments(og_frags, re_frags);
        jobs.push(PairJob {
            og: og.clone(),
            re: re.clone(),
            og_id,
            re_id,
            og_audio: corpus.files_for(og).audio,
            re_audio: corpus.files_for(re).audio,
            pairs,
            og_redactions,
            re_redactions,
        });
    }
    jobs.sort_by_key(|j| j.og_id);
    ReleasePlan { report, jobs }
}

/// Discover the corpus under `input_dir` and parse every markup file found.
pub fn load_input(input_dir: &Path) -> Result<(Corpus, BTreeMap<String, MarkupDocument>), ReleaseError> {
    let corpus = discover_corpus(&input_dir.join(RECORDINGS_DIR), input_dir)?;
    let mut markups = BTreeMap::new();
    for (key, files) in &corpus.files {
        let Some(path) = &files.markup else { continue };
        let bytes = fs::read(path).map_err(io_err(path))?;
        let doc = parse_eaf(&bytes).map_err(|source| ReleaseError::Markup {
            path: path.clone(),
            source,
        })?;
        markups.insert(key.clone(), doc);
    }
    Ok((corpus, markups))
}

#[derive(Debug, Clone)]
pub struct Release {
    pub manifest: ReleaseManifest,
    pub report: ValidationReport,
}

/// One row of a fragment table.
#[derive(Debug, Clone, PartialEq, Eq)]
struct FragmentRow {
    id: String,
    start_ms: u64,
    end_ms: u64,
    conv_id: String,
    trans_id: String,
}

#[derive(Debug, Default)]
struct JobOutput {
    long_rows: Vec<FragmentRow>,
    short_rows: Vec<FragmentRow>,
    counts: OutputCounts,
    warnings: Vec<String>,
}

fn read_audio(path: &Path) -> Result<WavBuffer, ReleaseError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    read_wav(&bytes).map_err(|source| ReleaseError::Audio {
        path: path.to_owned(),
        source,
    })
}

/// The conversation recording as one stereo buffer, left participant on the
/// left channel.
fn load_stereo(conv: ConversationId, layout: &AudioLayout, warnings: &mut Vec<String>) -> Result<WavBuffer, ReleaseError> {
    let wrap = |path: &Path| {
        let path = path.to_owned();
        move |source| ReleaseError::Audio { path, source }
    };
    match layout {
        AudioLayout::StereoSingle(path) => {
            let buf = read_audio(path)?;
            if buf.channels() == 2 {
                return Ok(buf);
            }
            warnings.push(format!("{conv}: mono recording duplicated to both channels"));
            interleave(&buf, &buf).map_err(wrap(path))
        }
        AudioLayout::DualMono { left, right } => {
            let mut l = read_audio(left)?;
            let mut r = read_audio(right)?;
            if l.channels() != 1 || r.channels() != 1 {
                warnings.push(format!("{conv}: stereo participant track mixed down to mono"));
                l = mix_to_mono(&l);
                r = mix_to_mono(&r);
            }
            if l.frames() != r.frames() {
                warnings.push(format!(
                    "{conv}: participant tracks differ in length ({} vs {} frames), shorter one padded",
                    l.frames(),
                    r.frames()
                ));
                let frames = l.frames().max(r.frames());
                l = pad_to(&l, frames).map_err(wrap(left))?;
                r = pad_to(&r, frames).map_err(wrap(right))?;
            }
            interleave(&l, &r).map_err(wrap(left))
        }
    }
}

fn short_suffix(side: FragmentSide) -> &'static str {
    match side {
        FragmentSide::Left => "_L",
        FragmentSide::Right => "_R",
        FragmentSide::Mixed => "",
    }
}

fn clip_name(frag: &Fragment) -> String {
    format!("{}{}", frag.id(), short_suffix(frag.side))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ReleaseError> {
    fs::write(path, bytes).map_err(io_err(path))
}

struct Prepared<'a> {
    id: ConversationId,
    audio: WavBuffer,
    redactions: &'a [RedactionSpan],
}

fn prepare_side<'a>(
    id: ConversationId,
    layout: &Option<AudioLayout>,
    redactions: &'a [RedactionSpan],
    warnings: &mut Vec<String>,
) -> Result<Prepared<'a>, ReleaseError> {
    let Some(layout) = layout else {
        // Validation excludes conversations without audio.
        return Err(ReleaseError::Io {
            path: PathBuf::from(id.to_string()),
            source: io::Error::new(io::ErrorKind::NotFound, "no audio"),
        });
    };
    let mut audio = load_stereo(id, layout, warnings)?;
    for span in redactions {
        if silence_clamped(&mut audio, span.range()) {
            warnings.push(format!(
                "{id}: DELETE span {}..{} ms runs past the end of the recording",
                span.start_ms, span.end_ms
            ));
        }
    }
    Ok(Prepared { id, audio, redactions })
}

fn run_job(job: &PairJob, out: &Path) -> Result<JobOutput, ReleaseError> {
    let mut output = JobOutput::default();
    let og = prepare_side(job.og_id, &job.og_audio, &job.og_redactions, &mut output.warnings)?;
    let re = prepare_side(job.re_id, &job.re_audio, &job.re_redactions, &mut output.warnings)?;

    for side in [&og, &re] {
        let path = out.join(RECORDINGS_DIR).join(format!("{}.wav", side.id));
        write_file(&path, &write_wav(&side.audio))?;
        output.counts.recordings += 1;
    }

    // Short clips per (conversation, channel), for the concatenations.
    let mut tracks: BTreeMap<(ConversationId, Side), Vec<(u64, WavBuffer)>> = BTreeMap::new();
    for pair in &job.pairs {
        let clips = [(&pair.og, &og), (&pair.re, &re)].map(|(frag, side)| {
            debug_assert!(side.redactions.iter().all(|r| !r.range().overlaps(&frag.range())));
            cut(&side.audio, frag.range())
        });
        let [Ok(og_clip), Ok(re_clip)] = clips else {
            output.warnings.push(format!(
                "{} / {}: fragment lies outside the recording, pair dropped",
                clip_name(&pair.og),
                clip_name(&pair.re)
            ));
            continue;
        };
        for (frag, partner, clip) in [(&pair.og, &pair.re, og_clip), (&pair.re, &pair.og, re_clip)] {
            let row = FragmentRow {
                id: clip_name(frag),
                start_ms: frag.start_ms,
                end_ms: frag.end_ms,
                conv_id: frag.conv_id.to_string(),
                trans_id: clip_name(partner),
            };
            match (frag.kind, frag.side.channel()) {
                (FragmentKind::Short, Some(channel)) => {
                    let mono = extract_channel(&clip, channel).map_err(|source| ReleaseError::Audio {
                        path: PathBuf::from(&row.id),
                        source,
                    })?;
                    write_file(&out.join(SHORT_DIR).join(format!("{}.wav", row.id)), &write_wav(&mono))?;
                    tracks.entry((frag.conv_id, channel)).or_default().push((frag.start_ms, mono));
                    output.counts.short_clips += 1;
                    output.short_rows.push(row);
                }
                _ => {
                    write_file(&out.join(LONG_DIR).join(format!("{}.wav", row.id)), &write_wav(&clip))?;
                    output.counts.long_clips += 1;
                    output.long_rows.push(row);
                }
            }
        }
    }

    for ((conv, channel), mut clips) in tracks {
        clips.sort_by_key(|(start, _)| *start);
        let buffers: Vec<WavBuffer> = clips.into_iter().map(|(_, b)| b).collect();
        let name = match channel {
            Side::Left => format!("{conv}_left.wav"),
            Side::Right => format!("{conv}_right.wav"),
        };
        let path = out.join(CONCAT_DIR).join(name);
        let joined = audio::concat(&buffers).map_err(|source| ReleaseError::Audio {
            path: path.clone(),
            source,
        })?;
        write_file(&path, &write_wav(&joined))?;
        output.counts.concatenations += 1;
    }
    Ok(output)
}

fn fragment_table(rows: &mut [FragmentRow]) -> Vec<u8> {
    rows.sort_by(|a, b| a.id.cmp(&b.id));
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let _ = w.write_record(FRAGMENT_HEADER);
    for r in rows.iter() {
        let _ = w.write_record([
            r.id.as_str(),
            &format_duration(r.start_ms),
            &format_duration(r.end_ms),
            &format_duration(r.end_ms - r.start_ms),
            &r.conv_id,
            &r.trans_id,
        ]);
    }
    w.into_inner().unwrap_or_default()
}

fn ensure_empty_output(dir: &Path) -> Result<(), ReleaseError> {
    match fs::read_dir(dir) {
        Ok(mut entries) => {
            if entries.next().is_some() {
                return Err(ReleaseError::OutputNotEmpty(dir.to_owned()));
            }
            Ok(())
        }
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(()),
        Err(e) => Err(io_err(dir)(e)),
    }
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (fs::canonicalize(a), fs::canonicalize(b)) {
        (Ok(a), Ok(b)) => a == b,
        _ => a == b,
    }
}

pub fn build_release(cfg: &ReleaseConfig) -> Result<Release, ReleaseError> {
    if same_dir(&cfg.input_dir, &cfg.output_dir) {
        return Err(ReleaseError::SameDirectory(cfg.output_dir.clone()));
    }
    let (corpus, markups) = load_input(&cfg.input_dir)?;
    let plan = plan_release(&corpus, &markups);
    if let Some(path) = &cfg.report_path {
        write_file(path, &report_csv(&plan.report.diagnostics))?;
    }
    if cfg.strict && !plan.report.is_clean() {
        return Err(ReleaseError::Strict(Box::new(plan.report)));
    }
    ensure_empty_output(&cfg.output_dir)?;
    let out = &cfg.output_dir;
    for dir in [RECORDINGS_DIR, LONG_DIR, SHORT_DIR, CONCAT_DIR] {
        let path = out.join(dir);
        fs::create_dir_all(&path).map_err(io_err(&path))?;
    }

    let results: Vec<Result<JobOutput, ReleaseError>> = if cfg.parallel {
        plan.jobs.par_iter().map(|job| run_job(job, out)).collect()
    } else {
        plan.jobs.iter().map(|job| run_job(job, out)).collect()
    };

    let mut manifest = ReleaseManifest {
        redaction: REDACTION_MODE.to_owned(),
        ..ReleaseManifest::default()
    };
    let mut long_rows = Vec::new();
    let mut short_rows = Vec::new();
    let mut included = Vec::new();
    for (job, result) in plan.jobs.iter().zip(results) {
        let output = result?;
        manifest.counts.recordings += output.counts.recordings;
        manifest.counts.long_clips += output.counts.long_clips;
        manifest.counts.short_clips += output.counts.short_clips;
        manifest.counts.concatenations += output.counts.concatenations;
        manifest.warnings.extend(output.warnings);
        long_rows.extend(output.long_rows);
        short_rows.extend(output.short_rows);
        for (conv, partner) in [(&job.og, job.re_id), (&job.re, job.og_id)] {
            let mut row = conv.clone();
            row.id = conv.key();
            row.trans_id = Some(partner.to_string());
            included.push(row);
        }
    }
    if plan.jobs.is_empty() {
        manifest.warnings.push("no conversation pair survived validation".to_owned());
    }

    write_file(&out.join(LONG_TABLE), &fragment_table(&mut long_rows))?;
    write_file(&out.join(SHORT_TABLE), &fragment_table(&mut short_rows))?;
    manifest.counts.fragment_tables = 2;
    write_file(&out.join(corpus::CONVERSATION_FILE), &corpus::write_conversations(&included))?;
    write_file(&out.join(corpus::PARTICIPANT_FILE), &corpus::write_participants(&corpus.participants))?;
    write_file(&out.join(corpus::PRODUCER_FILE), &corpus::write_producers(&corpus.producers))?;

    let mut ids: Vec<String> = included.iter().map(|r| r.id.clone()).collect();
    ids.sort();
    manifest.included_conversations = ids;
    for d in &plan.report.diagnostics {
        *manifest.diagnostics.entry(d.code.as_str().to_owned()).or_default() += 1;
    }
    let mut json = serde_json::to_vec_pretty(&manifest).map_err(|e| io_err(out)(io::Error::other(e)))?;
    json.push(b'\n');
    write_file(&out.join(MANIFEST_FILE), &json)?;

    Ok(Release {
        manifest,
        report: plan.report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub conversations: usize,
    pub participants: usize,
    pub long_pairs: usize,
    pub mean_long_duration_s: f64,
    pub short_pairs: usize,
    pub mean_short_duration_s: f64,
}

impl CorpusStats {
    /// `metric,value` lines.
    pub fn to_csv(&self) -> String {
        format!(
            "metric,value\nconversations,{}\nparticipants,{}\nlong_pairs,{}\nmean_long_duration_s,{:.1}\nshort_pairs,{}\nmean_short_duration_s,{:.1}\n",
            self.conversations,
            self.participants,
            self.long_pairs,
            self.mean_long_duration_s,
            self.short_pairs,
            self.mean_short_duration_s
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsReport {
    pub stats: CorpusStats,
    pub warnings: Vec<String>,
}

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("missing {0}")]
    Missing(PathBuf),
    #[error(transparent)]
    Metadata(#[from] MetadataError),
    #[error("{file}: {message}")]
    Table { file: String, message: String },
}

/// Round to one decimal place.
pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

struct TableRow {
    duration_ms: u64,
    trans_id: String,
}

fn read_fragment_table(
    dir: &Path,
    table: &str,
    clip_dir: &str,
    warnings: &mut Vec<String>,
) -> Result<BTreeMap<String, TableRow>, StatsError> {
    let err = |message: String| StatsError::Table {
        file: table.to_owned(),
        message,
    };
    let path = dir.join(table);
    let bytes = fs::read(&path).map_err(|_| StatsError::Missing(path.clone()))?;
    let mut reader = csv::ReaderBuilder::new().from_reader(bytes.as_slice());
    let header = reader.headers().map_err(|e| err(e.to_string()))?;
    if header.iter().ne(FRAGMENT_HEADER) {
        return Err(err(format!("unexpected header {header:?}")));
    }
    let mut rows = BTreeMap::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| err(e.to_string()))?;
        let field = |i: usize| record.get(i).unwrap_or_default();
        let time = |i: usize| parse_duration(field(i)).map_err(|e| err(format!("row {}: {e}", line + 2)));
        let (start, end, listed) = (time(1)?, time(2)?, time(3)?);
        if end <= start {
            return Err(err(format!("row {}: time_end not after time_start", line + 2)));
        }
        let id = field(0).to_owned();
        let duration_ms = end - start;
        if listed != duration_ms {
            warnings.push(format!("{id}: duration column {listed} ms, times give {duration_ms} ms"));
        }
        let clip = dir.join(clip_dir).join(format!("{id}.wav"));
        match fs::read(&clip).ok().and_then(|b| read_wav(&b).ok()) {
            Some(buf) => {
                let clip_ms = buf.frames() as f64 * 1000.0 / buf.sample_rate() as f64;
                if (clip_ms - duration_ms as f64).abs() > 1.0 {
                    warnings.push(format!("{id}: clip is {clip_ms:.3} ms, table says {duration_ms} ms"));
                }
            }
            None => warnings.push(format!("{id}: clip file missing or unreadable")),
        }
        let trans_id = field(5).to_owned();
        if rows.insert(id.clone(), TableRow { duration_ms, trans_id }).is_some() {
            return Err(err(format!("duplicate id {id}")));
        }
    }
    Ok(rows)
}

/// (pair count, mean duration in seconds over both members of every pair).
fn pair_stats(rows: &BTreeMap<String, TableRow>, warnings: &mut Vec<String>) -> (usize, f64) {
    let mut pairs = 0;
    let mut total_ms = 0u64;
    for (id, row) in rows {
        match rows.get(&row.trans_id) {
            Some(partner) if &partner.trans_id == id => {
                if id < &row.trans_id {
                    pairs += 1;
                    total_ms += row.duration_ms + partner.duration_ms;
                }
            }
            _ => warnings.push(format!("{id}: trans_id {} does not point back", row.trans_id)),
        }
    }
    let mean = if pairs == 0 {
        0.0
    } else {
        total_ms as f64 / (2 * pairs) as f64 / 1000.0
    };
    (pairs, mean)
}

pub fn compute_stats(release_dir: &Path) -> Result<StatsReport, StatsError> {
    for file in [
        corpus::CONVERSATION_FILE,
        corpus::PARTICIPANT_FILE,
        corpus::PRODUCER_FILE,
        LONG_TABLE,
        SHORT_TABLE,
    ] {
        let path = release_dir.join(file);
        if !path.is_file() {
            return Err(StatsError::Missing(path));
        }
    }
    let metadata = load_metadata(release_dir)?;
    let known: BTreeSet<u32> = metadata.participants.iter().map(|p| p.id).collect();
    let participants: BTreeSet<u32> = metadata
        .conversations
        .iter()
        .flat_map(|c| [c.participant_id_left, c.participant_id_right])
        .filter(|id| known.contains(id))
        .collect();

    let mut warnings = Vec::new();
    let long = read_fragment_table(release_dir, LONG_TABLE, LONG_DIR, &mut warnings)?;
    let short = read_fragment_table(release_dir, SHORT_TABLE, SHORT_DIR, &mut warnings)?;
    let (long_pairs, long_mean) = pair_stats(&long, &mut warnings);
    let (short_pairs, short_mean) = pair_stats(&short, &mut warnings);
    Ok(StatsReport {
        stats: CorpusStats {
            conversations: metadata.conversations.len(),
            participants: participants.len(),
            long_pairs,
            mean_long_duration_s: round1(long_mean),
            short_pairs,
            mean_short_duration_s: round1(short_mean),
        },
        warnings,
    })
}

#[derive(Parser, Debug)]
#[command(name = "reenact", version, about = "Validate a bilingual re-enactment corpus and build releases")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Report diagnostics for an input directory.
    Validate {
        input: PathBuf,
        /// Also write the diagnostics as CSV.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Build a release tree.
    Build {
        input: PathBuf,
        output: PathBuf,
        /// Fail without writing anything if any diagnostic is raised.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Process conversation pairs one at a time.
        #[arg(long)]
        serial: bool,
    },
    /// Print corpus statistics of a built release as CSV.
    Stats { release: PathBuf },
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

fn print_report(report: &ValidationReport) {
    for d in &report.diagnostics {
        eprintln!("{} {}: {} ({})", d.code, d.subject, d.message, d.hint);
    }
    eprintln!("{} diagnostic(s)", report.diagnostics.len());
}

/// Run the command line; returns the process exit code.
pub fn cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Validate { input, report } => {
            let (corpus, markups) = match load_input(&input) {
                Ok(loaded) => loaded,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_FAILURE;
                }
            };
            let result = validate_corpus(&corpus, &markups);
            print_report(&result);
            if let Some(path) = report {
                if let Err(e) = fs::write(&path, report_csv(&result.diagnostics)) {
                    eprintln!("error: {}: {e}", path.display());
                    return EXIT_FAILURE;
                }
            }
            EXIT_OK
        }
        Command::Build {
            input,
            output,
            strict,
            report,
            serial,
        } => {
            let cfg = ReleaseConfig {
                input_dir: input,
                output_dir: output,
                strict,
                report_path: report,
                parallel: !serial,
            };
            match build_release(&cfg) {
                Ok(release) => {
                    print_report(&release.report);
                    for w in &release.manifest.warnings {
                        eprintln!("warning: {w}");
                    }
                    let c = &release.manifest.counts;
                    eprintln!(
                        "wrote {} recordings, {} long clips, {} short clips, {} concatenations to {}",
                        c.recordings,
                        c.long_clips,
                        c.short_clips,
                        c.concatenations,
                        cfg.output_dir.display()
                    );
                    EXIT_OK
                }
                Err(ReleaseError::Strict(report)) => {
                    print_report(&report);
                    eprintln!("error: strict mode, no output written");
                    EXIT_FAILURE
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_FAILURE
                }
            }
        }
        Command::Stats { release } => match compute_stats(&release) {
            Ok(report) => {
                for w in &report.warnings {
                    eprintln!("warning: {w}");
                }
                print!("{}", report.stats.to_csv());
                EXIT_OK
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_FAILURE
            }
        },
    }
}
