//! WAV ingest, linear resampling and fixed-length segmentation.

use std::io;
use std::path::Path;

use crate::error::{Error, Result};

/// Sample rate every downstream stage assumes.
pub const CANONICAL_RATE: u32 = 22_050;
/// Samples in one 0.6 s segment at [`CANONICAL_RATE`].
pub const SEGMENT_LEN: usize = 13_230;
/// Segments taken from each clip.
pub const SEGMENTS_PER_CLIP: usize = 5;
/// Samples consumed per clip (3.0 s).
pub const CLIP_LEN: usize = SEGMENT_LEN * SEGMENTS_PER_CLIP;

/// A mono signal with amplitudes in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    /// Builds a clip, clamping every sample into `[-1, 1]`. NaN becomes 0.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::BadConfig("sample rate must be positive".into()));
        }
        let samples = samples
            .into_iter()
            .map(|s| if s.is_nan() { 0.0 } else { s.clamp(-1.0, 1.0) })
            .collect();
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// One 0.6 s slice of a clip.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    samples: Vec<f64>,
    origin_offset: usize,
}

impl Segment {
    pub fn new(samples: Vec<f64>, origin_offset: usize) -> Result<Self> {
        if samples.len() != SEGMENT_LEN {
            return Err(Error::DimensionMismatch(format!(
                "segment has {} samples, expected {SEGMENT_LEN}",
                samples.len()
            )));
        }
        Ok(Self {
            samples,
            origin_offset,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn origin_offset(&self) -> usize {
        self.origin_offset
    }
}

fn map_hound(e: hound::Error) -> Error {
    match e {
        hound::Error::FormatError(msg) => Error::MalformedWav(msg.to_string()),
        hound::Error::Unsupported => Error::UnsupportedEncoding("unsupported format tag".into()),
        hound::Error::TooWide => Error::UnsupportedEncoding("sample width too large".into()),
        // The file is already open, so read failures mean truncated chunks.
        hound::Error::IoError(io) => Error::MalformedWav(format!("truncated file: {io}")),
        other => Error::MalformedWav(other.to_string()),
    }
}

/// Reads a PCM16 or float32 WAV file and downmixes it to mono by averaging
/// channels.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let file = std::fs::File::open(path)?;
    load_wav_from(io::BufReader::new(file))
}

/// Same as [`load_wav`] over any byte source.
pub fn load_wav_from<R: io::Read>(source: R) -> Result<AudioClip> {
    let reader = hound::WavReader::new(source).map_err(map_hound)?;
    read_wav(reader)
}

fn read_wav<R: io::Read>(reader: hound::WavReader<R>) -> Result<AudioClip> {
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::MalformedWav("zero channels".into()));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(map_hound)?,
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(map_hound)?,
        (fmt, bits) => {
            return Err(Error::UnsupportedEncoding(format!(
                "{bits}-bit {fmt:?} samples"
            )))
        }
    };
    if !interleaved.len().is_multiple_of(channels) {
        return Err(Error::MalformedWav("partial final frame".into()));
    }
    let mono = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();
    AudioClip::new(mono, spec.sample_rate)
}

/// Writes a mono 16-bit PCM WAV file. Samples are scaled by 32768 and
/// saturated to the `i16` range, the inverse of [`load_wav`].
pub fn write_wav_pcm16(path: impl AsRef<Path>, clip: &AudioClip) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(map_hound)?;
    for &s in &clip.samples {
        w.write_sample(pcm16(s)).map_err(map_hound)?;
    }
    w.finalize().map_err(map_hound)
}

/// Quantizes one amplitude to 16-bit PCM.
pub fn pcm16(s: f64) -> i16 {
    (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Resamples by linear interpolation at fractional source positions.
///
/// Output sample `k` is taken at source position `k * source_rate / target_rate`.
pub fn resample_linear(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    if clip.is_empty() {
        return Err(Error::EmptyClip);
    }
    if target_rate == 0 {
        return Err(Error::BadConfig("target rate must be positive".into()));
    }
    if target_rate == clip.sample_rate {
        return Ok(clip.clone());
    }
    let src = &clip.samples;
    let out_len = (src.len() as u128 * target_rate as u128 / clip.sample_rate as u128) as usize;
    let step = clip.sample_rate as f64 / target_rate as f64;
    let last = src.len() - 1;
    let samples = (0..out_len)
        .map(|k| {
            let pos = k as f64 * step;
            let i = pos.floor() as usize;
            if i >= last {
                return src[last];
            }
            let frac = pos - i as f64;
            src[i] + (src[i + 1] - src[i]) * frac
        })
        .collect();
    AudioClip::new(samples, target_rate)
}

/// Splits the first 3.0 s of a 22050 Hz clip into five contiguous segments.
/// Anything past 3.0 s is dropped.
pub fn segment_clip(clip: &AudioClip) -> Result<Vec<Segment>> {
    if clip.sample_rate != CANONICAL_RATE {
        return Err(Error::WrongRate {
            expected: CANONICAL_RATE,
            got: clip.sample_rate,
        });
    }
    if clip.len() < CLIP_LEN {
        return Err(Error::TooShort {
            got: clip.len(),
            need: CLIP_LEN,
        });
    }
    clip.samples[..CLIP_LEN]
        .chunks_exact(SEGMENT_LEN)
        .enumerate()
        .map(|(i, chunk)| Segment::new(chunk.to_vec(), i * SEGMENT_LEN))
        .collect()
}
