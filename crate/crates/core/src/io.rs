//! Signal files and block-wise processing.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Reads one value per line, or `index,value` rows under a header line.
/// Blank lines are skipped.
pub fn read_signal_csv(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    parse_signal_csv(&fs::read_to_string(path)?)
}

pub fn parse_signal_csv(text: &str) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    let mut seen_first = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let field = match line.rsplit_once(',') {
            Some((_, v)) => v.trim(),
            None => line,
        };
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(v) => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("non-finite value {v}"),
                })
            }
            // a non-numeric first row is a header
            Err(_) if !seen_first && field.chars().any(char::is_alphabetic) => {}
            Err(e) => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("`{line}`: {e}"),
                })
            }
        }
        seen_first = true;
    }
    if values.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no values found".into(),
        });
    }
    Ok(values)
}

/// Writes `index,value` rows with shortest round-trip formatting.
pub fn write_signal_csv(path: impl AsRef<Path>, signal: &[f64]) -> Result<()> {
    fs::write(path, format_signal_csv(signal))?;
    Ok(())
}

pub fn format_signal_csv(signal: &[f64]) -> String {
    let mut out = String::with_capacity(signal.len() * 24 + 12);
    out.push_str("index,value\n");
    for (i, v) in signal.iter().enumerate() {
        out.push_str(&format!("{i},{v:?}\n"));
    }
    out
}

/// Multichannel audio with samples in `[-1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub channels: Vec<Vec<f64>>,
    pub sample_rate: u32,
    pub bit_depth: u16,
}

impl AudioBuffer {
    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.channels.first() else {
            return Err(Error::Format("audio has no channels".into()));
        };
        if self.channels.iter().any(|c| c.len() != first.len()) {
            return Err(Error::Format("audio channels differ in length".into()));
        }
        if self.sample_rate == 0 {
            return Err(Error::Format("sample rate must be positive".into()));
        }
        Ok(())
    }

    pub fn frames(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }
}

const PCM16_SCALE: f64 = 32768.0;

fn wav_error(e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => Error::Format(format!("unreadable WAV: {other}")),
    }
}

/// Reads 16-bit integer PCM; anything else is a format error naming the encoding found.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let mut reader = hound::WavReader::open(path).map_err(wav_error)?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        let kind = match spec.sample_format {
            hound::SampleFormat::Int => "integer PCM",
            hound::SampleFormat::Float => "float",
        };
        return Err(Error::Format(format!(
            "only 16-bit integer PCM WAV is supported, found {}-bit {kind}",
            spec.bits_per_sample
        )));
    }
    let nch = spec.channels as usize;
    if nch == 0 {
        return Err(Error::Format("WAV declares zero channels".into()));
    }
    let mut channels = vec![Vec::with_capacity(reader.len() as usize / nch); nch];
    for (i, s) in reader.samples::<i16>().enumerate() {
        channels[i % nch].push(s.map_err(wav_error)? as f64 / PCM16_SCALE);
    }
    let buffer = AudioBuffer {
        channels,
        sample_rate: spec.sample_rate,
        bit_depth: 16,
    };
    buffer.validate()?;
    Ok(buffer)
}

/// Writes 16-bit PCM, rounding to the nearest step and clamping to the i16 range.
pub fn write_wav(path: impl AsRef<Path>, audio: &AudioBuffer) -> Result<()> {
    audio.validate()?;
    let nch = u16::try_from(audio.channels.len())
        .map_err(|_| Error::Format(format!("too many channels ({})", audio.channels.len())))?;
    let spec = hound::WavSpec {
        channels: nch,
        sample_rate: audio.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wav_error)?;
    for frame in 0..audio.frames() {
        for ch in &audio.channels {
            writer.write_sample(quantize(ch[frame])).map_err(wav_error)?;
        }
    }
    writer.finalize().map_err(wav_error)
}

pub fn quantize(v: f64) -> i16 {
    if v.is_nan() {
        return 0;
    }
    (v * PCM16_SCALE).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    None,
    Hann,
}

/// How a long signal is cut into transform-sized blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockPlan {
    pub block_size: usize,
    pub overlap: usize,
    pub window: Window,
}

impl Default for BlockPlan {
    fn default() -> Self {
        BlockPlan {
            block_size: 4096,
            overlap: 0,
            window: Window::None,
        }
    }
}

impl BlockPlan {
    /// Disjoint blocks when `overlap == 0`, Hann overlap-add otherwise.
    pub fn new(block_size: usize, overlap: usize) -> Result<Self> {
        let plan = BlockPlan {
            block_size,
            overlap,
            window: if overlap > 0 { Window::Hann } else { Window::None },
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_size == 0 || !self.block_size.is_power_of_two() {
            return Err(Error::Sizing(format!(
                "block size must be a power of two, got {}",
                self.block_size
            )));
        }
        if self.overlap >= self.block_size {
            return Err(Error::Sizing(format!(
                "overlap {} must be smaller than the block size {}",
                self.overlap, self.block_size
            )));
        }
        if self.overlap > 0 && self.window != Window::Hann {
            return Err(Error::Domain("overlapping blocks need the hann window".into()));
        }
        Ok(())
    }

    pub fn hop(&self) -> usize {
        self.block_size - self.overlap
    }

    /// Start offsets of the blocks covering `len` samples.
    pub fn starts(&self, len: usize) -> Vec<usize> {
        let hop = self.hop();
        let mut out = vec![0];
        while out[out.len() - 1] + self.block_size < len {
            out.push(out[out.len() - 1] + hop);
        }
        out
    }
}

/// Strictly positive Hann taps `sin²(π(k + 1/2)/B)`.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|k| (std::f64::consts::PI * (k as f64 + 0.5) / len as f64).sin().powi(2))
        .collect()
}

/// Runs `per_block` over zero-padded blocks and stitches the results.
///
/// Disjoint blocks are concatenated; overlapping blocks are Hann-weighted and
/// divided by the summed window, so an identity `per_block` returns the input.
pub fn process_blocks<F>(signal: &[f64], plan: &BlockPlan, mut per_block: F) -> Result<Vec<f64>>
where
    F: FnMut(usize, &[f64]) -> Result<Vec<f64>>,
{
    plan.validate()?;
    let len = signal.len();
    let b = plan.block_size;
    if len < b {
        return Err(Error::Sizing(format!(
            "signal has {len} samples, fewer than the block size {b}"
        )));
    }
    let weights = match plan.window {
        Window::None => vec![1.0; b],
        Window::Hann => hann(b),
    };
    let mut acc = vec![0.0; len];
    let mut wsum = vec![0.0; len];
    let mut block = vec![0.0; b];
    for (i, &start) in plan.starts(len).iter().enumerate() {
        let end = (start + b).min(len);
        block.fill(0.0);
        block[..end - start].copy_from_slice(&signal[start..end]);
        let out = per_block(i, &block)?;
        if out.len() != b {
            return Err(Error::Sizing(format!(
                "block {i} came back with {} samples, expected {b}",
                out.len()
            )));
        }
        for k in 0..end - start {
            acc[start + k] += weights[k] * out[k];
            wsum[start + k] += weights[k];
        }
    }
    Ok(acc.iter().zip(&wsum).map(|(a, w)| a / w).collect())
}
