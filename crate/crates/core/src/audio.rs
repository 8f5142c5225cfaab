//! 16-bit PCM WAV buffers with sample-exact editing.
//!
//! Millisecond positions map to frame indices through [`ms_to_sample`], which
//! rounds half up. Cutting, silencing and the release statistics all go
//! through it, so clip boundaries agree everywhere.

use std::fmt;

use thiserror::Error;

use crate::corpus::Side;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AudioError {
    #[error("WAV {chunk} chunk: {message}")]
    Format { chunk: &'static str, message: String },
    #[error("range {start_ms}..{end_ms} ms exceeds buffer of {frames} frames")]
    Range {
        start_ms: u64,
        end_ms: u64,
        frames: usize,
    },
    #[error("cannot pad {frames} frames down to {target}")]
    Pad { frames: usize, target: usize },
    #[error("channel extraction needs stereo input, got {0} channel(s)")]
    Channel(u16),
    #[error("cannot concatenate: {0}")]
    Concat(String),
    #[error("invalid buffer: {0}")]
    Invalid(String),
    #[error("malformed duration {0:?}, expected mm:ss.mmm")]
    Duration(String),
}

/// Interleaved signed 16-bit PCM.
#[derive(Clone, PartialEq, Eq)]
pub struct WavBuffer {
    sample_rate: u32,
    channels: u16,
    samples: Vec<i16>,
}

impl fmt::Debug for WavBuffer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WavBuffer")
            .field("sample_rate", &self.sample_rate)
            .field("channels", &self.channels)
            .field("frames", &self.frames())
            .finish()
    }
}

impl WavBuffer {
    pub fn new(sample_rate: u32, channels: u16, samples: Vec<i16>) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::Invalid("sample rate is zero".into()));
        }
        if !(1..=2).contains(&channels) {
            return Err(AudioError::Invalid(format!("{channels} channels")));
        }
        if !samples.len().is_multiple_of(channels as usize) {
            return Err(AudioError::Invalid(format!(
                "{} samples do not divide into {channels} channels",
                samples.len()
            )));
        }
        Ok(WavBuffer {
            sample_rate,
            channels,
            samples,
        })
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channels(&self) -> u16 {
        self.channels
    }

    pub fn samples(&self) -> &[i16] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<i16> {
        self.samples
    }

    pub fn frames(&self) -> usize {
        self.samples.len() / self.channels as usize
    }

    /// Duration in whole milliseconds, rounded down.
    pub fn duration_ms(&self) -> u64 {
        self.frames() as u64 * 1000 / self.sample_rate as u64
    }

    fn frame_range(&self, range: TimeRange) -> Result<(usize, usize), AudioError> {
        let start = ms_to_sample(range.start_ms, self.sample_rate) as usize;
        let end = ms_to_sample(range.end_ms, self.sample_rate) as usize;
        if end > self.frames() {
            return Err(AudioError::Range {
                start_ms: range.start_ms,
                end_ms: range.end_ms,
                frames: self.frames(),
            });
        }
        Ok((start, end))
    }
}

/// Half-open millisecond interval with `start_ms < end_ms`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeRange {
    start_ms: u64,
    end_ms: u64,
}

impl TimeRange {
    pub fn new(start_ms: u64, end_ms: u64) -> Option<Self> {
        (start_ms < end_ms).then_some(TimeRange { start_ms, end_ms })
    }

    pub fn start_ms(&self) -> u64 {
        self.start_ms
    }

    pub fn end_ms(&self) -> u64 {
        self.end_ms
    }

    pub fn overlaps(&self, other: &TimeRange) -> bool {
        self.start_ms < other.end_ms && other.start_ms < self.end_ms
    }
}

/// `round_half_up(ms * rate / 1000)`.
pub fn ms_to_sample(ms: u64, rate: u32) -> u64 {
    (ms * rate as u64 + 500) / 1000
}

fn format_error(chunk: &'static str, message: impl Into<String>) -> AudioError {
    AudioError::Format {
        chunk,
        message: message.into(),
    }
}

const PCM: u16 = 1;
const EXTENSIBLE: u16 = 0xFFFE;

/// Decode a RIFF/WAVE file holding 16-bit PCM with one or two channels.
/// Chunks other than `fmt ` and `data` are skipped.
pub fn read_wav(bytes: &[u8]) -> Result<WavBuffer, AudioError> {
    if bytes.len() < 12 {
        return Err(format_error("RIFF", "file shorter than the RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(format_error("RIFF", "missing RIFF/WAVE signature"));
    }

    let mut pos = 12;
    let mut format: Option<(u16, u32)> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes([bytes[pos + 4], bytes[pos + 5], bytes[pos + 6], bytes[pos + 7]])
            as usize;
        let body_start = pos + 8;
        let body_end = body_start.saturating_add(size);
        match id {
            b"fmt " => {
                if body_end > bytes.len() {
                    return Err(format_error("fmt ", "chunk is truncated"));
                }
                format = Some(parse_fmt(&bytes[body_start..body_end])?);
            }
            b"data" => {
                if body_end > bytes.len() {
                    return Err(format_error("data", "chunk is truncated"));
                }
                data = Some(&bytes[body_start..body_end]);
            }
            _ => {}
        }
        // Chunks are word aligned.
        pos = body_end.saturating_add(size & 1);
    }

    let (channels, sample_rate) = format.ok_or_else(|| format_error("fmt ", "chunk is missing"))?;
    let data = data.ok_or_else(|| format_error("data", "chunk is missing"))?;
    let block = 2 * channels as usize;
    if data.len() % block != 0 {
        return Err(format_error(
            "data",
            format!("{} bytes is not a whole number of {block}-byte frames", data.len()),
        ));
    }
    let samples = data
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]))
        .collect();
    WavBuffer::new(sample_rate, channels, samples)
}

fn parse_fmt(body: &[u8]) -> Result<(u16, u32), AudioError> {
    if body.len() < 16 {
        return Err(format_error("fmt ", "chunk shorter than 16 bytes"));
    }
    let u16_at = |i: usize| u16::from_le_bytes([body[i], body[i + 1]]);
    let u32_at = |i: usize| u32::from_le_bytes([body[i], body[i + 1], body[i + 2], body[i + 3]]);
    let mut tag = u16_at(0);
    let channels = u16_at(2);
    let sample_rate = u32_at(4);
    let block_align = u16_at(12);
    let bits = u16_at(14);
    if tag == EXTENSIBLE {
        if body.len() < 26 {
            return Err(format_error("fmt ", "extensible format without sub-format"));
        }
        tag = u16_at(24);
    }
    if tag != PCM {
        return Err(format_error("fmt ", format!("format tag {tag} is not PCM")));
    }
    if bits != 16 {
        return Err(format_error("fmt ", format!("{bits}-bit samples are not supported")));
    }
    if !(1..=2).contains(&channels) {
        return Err(format_error("fmt ", format!("{channels} channels are not supported")));
    }
    if sample_rate == 0 {
        return Err(format_error("fmt ", "sample rate is zero"));
    }
    if block_align != 2 * channels {
        return Err(format_error("fmt ", format!("block align {block_align} does not match")));
    }
    Ok((channels, sample_rate))
}

/// Encode as a canonical 44-byte-header WAV: `fmt ` then `data`, nothing else.
pub fn write_wav(buf: &WavBuffer) -> Vec<u8> {
    let data_len = (buf.samples.len() * 2) as u32;
    let block_align = 2 * buf.channels;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM.to_le_bytes());
    out.extend_from_slice(&buf.channels.to_le_bytes());
    out.extend_from_slice(&buf.sample_rate.to_le_bytes());
    out.extend_from_slice(&(buf.sample_rate * block_align as u32).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in &buf.samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

/// Frames `ms_to_sample(start)..ms_to_sample(end)`.
pub fn cut(buf: &WavBuffer, range: TimeRange) -> Result<WavBuffer, AudioError> {
    let (start, end) = buf.frame_range(range)?;
    let ch = buf.channels as usize;
    Ok(WavBuffer {
        sample_rate: buf.sample_rate,
        channels: buf.channels,
        samples: buf.samples[start * ch..end * ch].to_vec(),
    })
}

pub fn extract_channel(buf: &WavBuffer, side: Side) -> Result<WavBuffer, AudioError> {
    if buf.channels != 2 {
        return Err(AudioError::Channel(buf.channels));
    }
    let offset = match side {
        Side::Left => 0,
        Side::Right => 1,
    };
    Ok(WavBuffer {
        sample_rate: buf.sample_rate,
        channels: 1,
        samples: buf.samples.iter().skip(offset).step_by(2).copied().collect(),
    })
}

pub fn concat(buffers: &[WavBuffer]) -> Result<WavBuffer, AudioError> {
    let first = buffers
        .first()
        .ok_or_else(|| AudioError::Concat("no buffers".into()))?;
    let mut samples = Vec::with_capacity(buffers.iter().map(|b| b.samples.len()).sum());
    for b in buffers {
        if b.sample_rate != first.sample_rate || b.channels != first.channels {
            return Err(AudioError::Concat(format!(
                "{} Hz/{} ch does not match {} Hz/{} ch",
                b.sample_rate, b.channels, first.sample_rate, first.channels
            )));
        }
        samples.extend_from_slice(&b.samples);
    }
    Ok(WavBuffer {
        sample_rate: first.sample_rate,
        channels: first.channels,
        samples,
    })
}

/// Zero every channel inside `range`; all other samples are untouched.
pub fn silence(buf: &WavBuffer, range: TimeRange) -> Result<WavBuffer, AudioError> {
    let mut out = buf.clone();
    silence_in_place(&mut out, range)?;
    Ok(out)
}

pub fn silence_in_place(buf: &mut WavBuffer, range: TimeRange) -> Result<(), AudioError> {
    let (start, end) = buf.frame_range(range)?;
    let ch = buf.channels as usize;
    buf.samples[start * ch..end * ch].fill(0);
    Ok(())
}

/// Like [`silence_in_place`] but cuts the range off at the end of the buffer.
/// Returns whether any of the range lay beyond it.
pub fn silence_clamped(buf: &mut WavBuffer, range: TimeRange) -> bool {
    let frames = buf.frames();
    let start = (ms_to_sample(range.start_ms, buf.sample_rate) as usize).min(frames);
    let end = ms_to_sample(range.end_ms, buf.sample_rate) as usize;
    let ch = buf.channels as usize;
    buf.samples[start * ch..end.min(frames) * ch].fill(0);
    end > frames
}

/// Zero-pad at the end to exactly `frames` frames.
pub fn pad_to(buf: &WavBuffer, frames: usize) -> Result<WavBuffer, AudioError> {
    if frames < buf.frames() {
        return Err(AudioError::Pad {
            frames: buf.frames(),
            target: frames,
        });
    }
    let mut out = buf.clone();
    out.samples.resize(frames * buf.channels as usize, 0);
    Ok(out)
}

/// Interleave two mono buffers of equal rate and length into stereo.
pub fn interleave(left: &WavBuffer, right: &WavBuffer) -> Result<WavBuffer, AudioError> {
    if left.channels != 1 || right.channels != 1 {
        return Err(AudioError::Channel(left.channels.max(right.channels)));
    }
    if left.sample_rate != right.sample_rate || left.frames() != right.frames() {
        return Err(AudioError::Concat(format!(
            "tracks differ: {} Hz/{} frames vs {} Hz/{} frames",
            left.sample_rate,
            left.frames(),
            right.sample_rate,
            right.frames()
        )));
    }
    let samples = left
        .samples
        .iter()
        .zip(&right.samples)
        .flat_map(|(&l, &r)| [l, r])
        .collect();
    Ok(WavBuffer {
        sample_rate: left.sample_rate,
        channels: 2,
        samples,
    })
}

/// Average a stereo buffer down to mono; mono input is returned unchanged.
pub fn mix_to_mono(buf: &WavBuffer) -> WavBuffer {
    if buf.channels == 1 {
        return buf.clone();
    }
    let samples = buf
        .samples
        .chunks_exact(2)
        .map(|f| ((f[0] as i32 + f[1] as i32) / 2) as i16)
        .collect();
    WavBuffer {
        sample_rate: buf.sample_rate,
        channels: 1,
        samples,
    }
}

/// `mm:ss.mmm`; minutes widen past two digits only from 100 minutes on.
pub fn format_duration(ms: u64) -> String {
    let minutes = ms / 60_000;
    let seconds = (ms / 1000) % 60;
    let millis = ms % 1000;
    format!("{minutes:02}:{seconds:02}.{millis:03}")
}

pub fn parse_duration(text: &str) -> Result<u64, AudioError> {
    let err = || AudioError::Duration(text.to_owned());
    let (minutes, rest) = text.split_once(':').ok_or_else(err)?;
    let (seconds, millis) = rest.split_once('.').ok_or_else(err)?;
    let digits = |s: &str, len: Option<usize>| {
        !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) && len.is_none_or(|l| s.len() == l)
    };
    if !digits(minutes, None) || minutes.len() < 2 || !digits(seconds, Some(2)) || !digits(millis, Some(3)) {
        return Err(err());
    }
    let minutes: u64 = minutes.parse().map_err(|_| err())?;
    let seconds: u64 = seconds.parse().map_err(|_| err())?;
    let millis: u64 = millis.parse().map_err(|_| err())?;
    if seconds >= 60 {
        return Err(err());
    }
    minutes
        .checked_mul(60_000)
        .and_then(|m| m.checked_add(seconds * 1000 + millis))
        .ok_or_else(err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(rate: u32, channels: u16, frames: usize) -> WavBuffer {
        let samples = (0..frames * channels as usize).map(|i| (i % 30_000) as i16 - 15_000).collect();
        WavBuffer::new(rate, channels, samples).unwrap()
    }

    fn range(a: u64, b: u64) -> TimeRange {
        TimeRange::new(a, b).unwrap()
    }

    #[test]
    fn one_second_stereo() {
        let buf = ramp(44_100, 2, 44_100);
        let back = read_wav(&write_wav(&buf)).unwrap();
        assert_eq!(back.samples().len(), 88_200);
        assert_eq!(back, buf);
    }

    #[test]
    fn rejects_24_bit() {
        let mut bytes = write_wav(&ramp(44_100, 1, 10));
        bytes[34] = 24;
        assert_eq!(
            read_wav(&bytes),
            Err(AudioError::Format {
                chunk: "fmt ",
                message: "24-bit samples are not supported".into()
            })
        );
    }

    #[test]
    fn rejects_non_pcm_and_truncation() {
        let mut float = write_wav(&ramp(8000, 1, 10));
        float[20] = 3;
        assert!(matches!(read_wav(&float), Err(AudioError::Format { chunk: "fmt ", .. })));
        let full = write_wav(&ramp(8000, 1, 10));
        assert!(matches!(
            read_wav(&full[..full.len() - 4]),
            Err(AudioError::Format { chunk: "data", .. })
        ));
        assert!(matches!(read_wav(b"RIFX"), Err(AudioError::Format { chunk: "RIFF", .. })));
    }

    #[test]
    fn skips_unknown_chunks() {
        let buf = ramp(16_000, 2, 5);
        let plain = write_wav(&buf);
        let mut with_list = plain[..36].to_vec();
        with_list.extend_from_slice(b"LIST");
        with_list.extend_from_slice(&3u32.to_le_bytes());
        with_list.extend_from_slice(b"abc\0");
        with_list.extend_from_slice(&plain[36..]);
        assert_eq!(read_wav(&with_list).unwrap(), buf);
    }

    #[test]
    fn sample_rounding() {
        assert_eq!(ms_to_sample(1000, 44_100), 44_100);
        assert_eq!(ms_to_sample(1, 44_100), 44);
        assert_eq!(ms_to_sample(3, 44_100), 132);
        // 10 * 44.1 = 441.0, 5 * 44.1 = 220.5 rounds up
        assert_eq!(ms_to_sample(5, 44_100), 221);
        assert_eq!(ms_to_sample(0, 44_100), 0);
    }

    #[test]
    fn cut_is_sample_exact() {
        let buf = ramp(44_100, 2, 44_100 * 4);
        let clip = cut(&buf, range(1000, 3300)).unwrap();
        assert_eq!(clip.frames(), 101_430);
        assert_eq!(clip.channels(), 2);
        assert_eq!(&clip.samples()[..2], &buf.samples()[88_200..88_202]);
        assert_eq!(cut(&buf, range(0, 4000)).unwrap(), buf);
        assert!(matches!(cut(&buf, range(0, 4001)), Err(AudioError::Range { .. })));
    }

    #[test]
    fn channel_extraction() {
        let left_only: Vec<i16> = (0..20).flat_map(|i| [i as i16, 0]).collect();
        let buf = WavBuffer::new(8000, 2, left_only).unwrap();
        let left = extract_channel(&buf, Side::Left).unwrap();
        assert_eq!(left.samples(), (0..20).map(|i| i as i16).collect::<Vec<_>>());
        assert!(extract_channel(&buf, Side::Right).unwrap().samples().iter().all(|&s| s == 0));
        assert_eq!(extract_channel(&left, Side::Left), Err(AudioError::Channel(1)));
    }

    #[test]
    fn concat_lengths() {
        let a = ramp(8000, 1, 100);
        let b = ramp(8000, 1, 250);
        assert_eq!(concat(std::slice::from_ref(&a)).unwrap(), a);
        assert_eq!(concat(&[a.clone(), b]).unwrap().frames(), 350);
        assert!(concat(&[]).is_err());
        assert!(concat(&[a, ramp(8000, 2, 10)]).is_err());
        assert!(concat(&[ramp(8000, 1, 1), ramp(16_000, 1, 1)]).is_err());
    }

    #[test]
    fn silence_cases() {
        let buf = ramp(1000, 2, 100);
        let all = silence(&buf, range(0, 100)).unwrap();
        assert!(all.samples().iter().all(|&s| s == 0));
        let part = silence(&buf, range(10, 20)).unwrap();
        for (i, (&a, &b)) in buf.samples().iter().zip(part.samples()).enumerate() {
            if (20..40).contains(&i) {
                assert_eq!(b, 0);
            } else {
                assert_eq!(a, b);
            }
        }
        assert!(silence(&buf, range(50, 101)).is_err());
    }

    #[test]
    fn padding() {
        let buf = ramp(8000, 1, 100);
        assert_eq!(pad_to(&buf, 100).unwrap(), buf);
        let padded = pad_to(&buf, 150).unwrap();
        assert_eq!(padded.frames(), 150);
        assert_eq!(&padded.samples()[..100], buf.samples());
        assert!(padded.samples()[100..].iter().all(|&s| s == 0));
        assert!(matches!(pad_to(&buf, 99), Err(AudioError::Pad { .. })));

        let right = ramp(8000, 1, 130);
        let target = buf.frames().max(right.frames());
        let stereo = interleave(&pad_to(&buf, target).unwrap(), &pad_to(&right, target).unwrap()).unwrap();
        assert_eq!(stereo.frames(), 130);
        assert_eq!(extract_channel(&stereo, Side::Right).unwrap(), right);
        assert!(interleave(&buf, &right).is_err());
    }

    #[test]
    fn durations() {
        assert_eq!(format_duration(0), "00:00.000");
        assert_eq!(format_duration(138_700), "02:18.700");
        assert_eq!(format_duration(2300), "00:02.300");
        assert_eq!(format_duration(6_000_000), "100:00.000");
        assert_eq!(parse_duration("02:18.700"), Ok(138_700));
        for bad in ["2:18.700", "02:18.70", "02:60.000", "02-18.700", "02:18", "aa:bb.ccc", ""] {
            assert!(parse_duration(bad).is_err(), "{bad}");
        }
    }

    proptest! {
        #[test]
        fn wav_round_trip(channels in 1u16..=2, rate in 1u32..200_000, frames in 0usize..500, seed in any::<u64>()) {
            let samples: Vec<i16> = (0..frames * channels as usize)
                .map(|i| (seed.wrapping_mul(i as u64 + 1) >> 17) as i16)
                .collect();
            let buf = WavBuffer::new(rate, channels, samples).unwrap();
            prop_assert_eq!(read_wav(&write_wav(&buf)).unwrap(), buf);
        }

        #[test]
        fn duration_round_trip(ms in 0u64..1_000_000_000) {
            prop_assert_eq!(parse_duration(&format_duration(ms)).unwrap(), ms);
        }

        #[test]
        fn split_rejoin(total_ms in 2u64..3000, split in 1u64..3000, channels in 1u16..=2) {
            let split = 1 + split % (total_ms - 1);
            let frames = ms_to_sample(total_ms, 44_100) as usize;
            let buf = ramp(44_100, channels, frames);
            let a = cut(&buf, range(0, split)).unwrap();
            let b = cut(&buf, range(split, total_ms)).unwrap();
            prop_assert_eq!(concat(&[a, b]).unwrap(), buf);
        }

        #[test]
        fn deinterleave_reinterleave(frames in 0usize..400) {
            let buf = ramp(22_050, 2, frames);
            let l = extract_channel(&buf, Side::Left).unwrap();
            let r = extract_channel(&buf, Side::Right).unwrap();
            prop_assert_eq!(interleave(&l, &r).unwrap(), buf);
        }
    }
}
