//! RIFF/WAVE ingestion: PCM 16-bit, PCM 24-bit and IEEE float 32-bit.
//!
//! The parser works on an in-memory byte slice, never trusts declared
//! sizes beyond the bytes actually present, and reports byte offsets in
//! every error. Integer samples are normalized by `2^(bits-1)`, so 16-bit
//! `-32768` maps to exactly `-1.0`.

use std::fmt;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

/// Decoded audio: one amplitude sequence per channel plus the container
/// sample rate and a digest of the source bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub channels: Vec<Vec<f64>>,
    pub sample_rate_hz: u32,
    /// SHA-256 of the input file, hex-encoded.
    pub source_digest: String,
}

impl AudioClip {
    pub fn frames(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavErrorKind {
    NotRiff,
    NotWave,
    MissingFmt,
    MissingData,
    UnsupportedCodec { format: u16, bits: u16 },
    Truncated { needed: usize, available: usize },
    BadFormatChunk,
    BadFrameAlignment,
}

impl fmt::Display for WavErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WavErrorKind::NotRiff => write!(f, "missing RIFF magic"),
            WavErrorKind::NotWave => write!(f, "missing WAVE form type"),
            WavErrorKind::MissingFmt => write!(f, "data chunk before any fmt chunk"),
            WavErrorKind::MissingData => write!(f, "no data chunk found"),
            WavErrorKind::UnsupportedCodec { format, bits } => write!(
                f,
                "unsupported codec (format tag {format}, {bits} bits); expected PCM 16/24-bit or IEEE float 32-bit"
            ),
            WavErrorKind::Truncated { needed, available } => {
                write!(f, "truncated chunk: need {needed} bytes, {available} available")
            }
            WavErrorKind::BadFormatChunk => write!(f, "malformed fmt chunk"),
            WavErrorKind::BadFrameAlignment => {
                write!(f, "data size is not a whole number of frames")
            }
        }
    }
}

/// A parse failure with the byte offset at which it was detected.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("wav parse error at byte {offset}: {kind}")]
pub struct WavError {
    pub offset: usize,
    pub kind: WavErrorKind,
}

fn err(offset: usize, kind: WavErrorKind) -> WavError {
    WavError { offset, kind }
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32, WavError> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| {
            err(
                offset,
                WavErrorKind::Truncated {
                    needed: 4,
                    available: bytes.len().saturating_sub(offset),
                },
            )
        })
}

fn read_u16(bytes: &[u8], offset: usize) -> Result<u16, WavError> {
    bytes
        .get(offset..offset + 2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .ok_or_else(|| {
            err(
                offset,
                WavErrorKind::Truncated {
                    needed: 2,
                    available: bytes.len().saturating_sub(offset),
                },
            )
        })
}

#[derive(Debug, Clone, Copy)]
struct FormatChunk {
    format: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
    block_align: u16,
}

/// Parses a complete WAV file held in memory.
pub fn parse_wav(bytes: &[u8]) -> Result<AudioClip, WavError> {
    if bytes.get(0..4) != Some(b"RIFF") {
        return Err(err(0, WavErrorKind::NotRiff));
    }
    read_u32(bytes, 4)?;
    if bytes.get(8..12) != Some(b"WAVE") {
        return Err(err(8, WavErrorKind::NotWave));
    }

    let mut fmt: Option<FormatChunk> = None;
    let mut offset = 12usize;
    while offset < bytes.len() {
        let id = bytes.get(offset..offset + 4).ok_or_else(|| {
            err(
                offset,
                WavErrorKind::Truncated {
                    needed: 8,
                    available: bytes.len() - offset,
                },
            )
        })?;
        let size = read_u32(bytes, offset + 4)? as usize;
        let body = offset + 8;

        match id {
            b"fmt " => {
                if size < 16 || body + 16 > bytes.len() {
                    return Err(err(body, WavErrorKind::BadFormatChunk));
                }
                let chunk = FormatChunk {
                    format: read_u16(bytes, body)?,
                    channels: read_u16(bytes, body + 2)?,
                    sample_rate: read_u32(bytes, body + 4)?,
                    bits: read_u16(bytes, body + 14)?,
                    block_align: read_u16(bytes, body + 12)?,
                };
                if chunk.channels == 0 || chunk.sample_rate == 0 {
                    return Err(err(body, WavErrorKind::BadFormatChunk));
                }
                fmt = Some(chunk);
            }
            b"data" => {
                let fmt = fmt.ok_or_else(|| err(offset, WavErrorKind::MissingFmt))?;
                let available = bytes.len() - body;
                if size > available {
                    return Err(err(
                        body,
                        WavErrorKind::Truncated {
                            needed: size,
                            available,
                        },
                    ));
                }
                return decode_data(&bytes[body..body + size], body, fmt);
            }
            _ => {}
        }

        // Chunks are word-aligned: odd sizes carry a pad byte.
        let advance = 8usize
            .checked_add(size)
            .and_then(|a| a.checked_add(size % 2))
            .ok_or(err(offset, WavErrorKind::BadFormatChunk))?;
        offset = offset.saturating_add(advance);
    }
    Err(err(bytes.len(), WavErrorKind::MissingData))
}

fn decode_data(data: &[u8], body_offset: usize, fmt: FormatChunk) -> Result<AudioClip, WavError> {
    let bytes_per_sample = match (fmt.format, fmt.bits) {
        (1, 16) => 2usize,
        (1, 24) => 3,
        (3, 32) => 4,
        (format, bits) => {
            return Err(err(body_offset, WavErrorKind::UnsupportedCodec { format, bits }))
        }
    };
    let channels = fmt.channels as usize;
    let frame_size = bytes_per_sample * channels;
    if fmt.block_align as usize != frame_size {
        return Err(err(body_offset, WavErrorKind::BadFormatChunk));
    }
    if data.len() % frame_size != 0 {
        return Err(err(
            body_offset + data.len() - data.len() % frame_size,
            WavErrorKind::BadFrameAlignment,
        ));
    }
    let frames = data.len() / frame_size;
    let mut out = vec![Vec::with_capacity(frames); channels];
    for frame in 0..frames {
        for (ch, samples) in out.iter_mut().enumerate() {
            let at = frame * frame_size + ch * bytes_per_sample;
            let value = match bytes_per_sample {
                2 => i16::from_le_bytes([data[at], data[at + 1]]) as f64 / 32768.0,
                3 => {
                    let raw = (data[at] as i32)
                        | ((data[at + 1] as i32) << 8)
                        | ((data[at + 2] as i8 as i32) << 16);
                    raw as f64 / 8_388_608.0
                }
                4 => f32::from_le_bytes([data[at], data[at + 1], data[at + 2], data[at + 3]])
                    as f64,
                _ => unreachable!(),
            };
            samples.push(value);
        }
    }
    Ok(AudioClip {
        channels: out,
        sample_rate_hz: fmt.sample_rate,
        source_digest: hex_digest(data_digest_input(body_offset, data)),
    })
}

// The digest covers the decoded data bytes plus the body offset so two
// files with identical payloads at different positions still differ; the
// file-level loader overrides it with the whole-file digest.
fn data_digest_input(offset: usize, data: &[u8]) -> Vec<u8> {
    let mut input = offset.to_le_bytes().to_vec();
    input.extend_from_slice(data);
    input
}

fn hex_digest(bytes: Vec<u8>) -> String {
    let digest = Sha256::digest(&bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 hex digest of arbitrary bytes (used for run manifests).
pub fn digest_bytes(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Reads and parses a WAV file; the clip digest covers the whole file.
pub fn load_wav(path: &Path) -> crate::error::Result<AudioClip> {
    let bytes = std::fs::read(path)?;
    let mut clip = parse_wav(&bytes)?;
    clip.source_digest = digest_bytes(&bytes);
    Ok(clip)
}

/// Writes interleaved 16-bit PCM; amplitudes are clamped to `[-1, 1)` and
/// quantized by `round(x * 32768)`.
pub fn write_wav_pcm16<W: std::io::Write>(
    writer: &mut W,
    channels: &[Vec<f64>],
    sample_rate_hz: u32,
) -> std::io::Result<()> {
    let frames = channels.first().map_or(0, Vec::len);
    let n_channels = channels.len() as u16;
    let data_len = (frames * channels.len() * 2) as u32;
    write_header(writer, 1, 16, n_channels, sample_rate_hz, data_len)?;
    for frame in 0..frames {
        for channel in channels {
            let clamped = channel[frame].clamp(-1.0, 32767.0 / 32768.0);
            let quantized = (clamped * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
            writer.write_all(&quantized.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Writes interleaved IEEE float 32-bit samples.
pub fn write_wav_float32<W: std::io::Write>(
    writer: &mut W,
    channels: &[Vec<f64>],
    sample_rate_hz: u32,
) -> std::io::Result<()> {
    let frames = channels.first().map_or(0, Vec::len);
    let n_channels = channels.len() as u16;
    let data_len = (frames * channels.len() * 4) as u32;
    write_header(writer, 3, 32, n_channels, sample_rate_hz, data_len)?;
    for frame in 0..frames {
        for channel in channels {
            writer.write_all(&(channel[frame] as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

fn write_header<W: std::io::Write>(
    writer: &mut W,
    format: u16,
    bits: u16,
    channels: u16,
    sample_rate_hz: u32,
    data_len: u32,
) -> std::io::Result<()> {
    let block_align = channels * bits / 8;
    let byte_rate = sample_rate_hz * block_align as u32;
    writer.write_all(b"RIFF")?;
    writer.write_all(&(36 + data_len).to_le_bytes())?;
    writer.write_all(b"WAVE")?;
    writer.write_all(b"fmt ")?;
    writer.write_all(&16u32.to_le_bytes())?;
    writer.write_all(&format.to_le_bytes())?;
    writer.write_all(&channels.to_le_bytes())?;
    writer.write_all(&sample_rate_hz.to_le_bytes())?;
    writer.write_all(&byte_rate.to_le_bytes())?;
    writer.write_all(&block_align.to_le_bytes())?;
    writer.write_all(&bits.to_le_bytes())?;
    writer.write_all(b"data")?;
    writer.write_all(&data_len.to_le_bytes())?;
    Ok(())
}
