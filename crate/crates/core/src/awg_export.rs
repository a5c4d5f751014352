//! Two-tone RF drive synthesis and waveform files for an arbitrary
//! waveform generator.
//!
//! Each tone carries amplitude C·|Ω_tone(t)| on a carrier at its own RF
//! frequency. A negative field value is encoded as a π phase offset, and
//! the |0⟩ tone additionally carries the static phase −φ of its pair.

use std::f64::consts::{PI, TAU};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulse_model::{Envelope, PulsePair, PulseSequence};

/// Relative tolerance on f1 − f0 = f₁₀.
const SPLITTING_TOLERANCE: f64 = 1e-9;

/// Hardware description. Every field is required; nothing here has a
/// meaningful default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RfSpec {
    /// |1⟩ ↔ |e⟩ tone, MHz.
    pub f1_mhz: f64,
    /// |0⟩ ↔ |e⟩ tone, MHz.
    pub f0_mhz: f64,
    /// Qubit splitting f₁₀, MHz.
    pub qubit_splitting_mhz: f64,
    /// Amplitude per unit Rabi frequency (per rad/µs).
    pub conversion: f64,
    /// Samples per µs.
    pub sample_rate: f64,
}

impl RfSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("f1_mhz", self.f1_mhz),
            ("f0_mhz", self.f0_mhz),
            ("qubit_splitting_mhz", self.qubit_splitting_mhz),
            ("conversion", self.conversion),
            ("sample_rate", self.sample_rate),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        let diff = self.f1_mhz - self.f0_mhz;
        if (diff - self.qubit_splitting_mhz).abs()
            > SPLITTING_TOLERANCE * self.f1_mhz.max(self.f0_mhz)
        {
            return Err(Error::InvalidParameter(format!(
                "f1 − f0 = {diff} MHz does not match the qubit splitting {} MHz",
                self.qubit_splitting_mhz
            )));
        }
        let max_freq = self.f1_mhz.max(self.f0_mhz);
        if self.sample_rate <= 2.0 * max_freq {
            return Err(Error::Aliasing {
                rate: self.sample_rate,
                max_freq,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tone {
    /// |1⟩ ↔ |e⟩
    One,
    /// |0⟩ ↔ |e⟩
    Zero,
}

/// Static description of one tone within a pair: the field is
/// `weight · Ω(t) · e^{i·static_phase}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToneParams {
    pub weight: f64,
    pub static_phase: f64,
}

/// Instantaneous drive of one tone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToneSample {
    /// C·|Ω_tone(t)|.
    pub amplitude: f64,
    /// The field value is negative and is encoded as a π offset.
    pub flipped: bool,
    /// static phase + π·flipped.
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfPair {
    pub envelope: Envelope,
    pub tone1: ToneParams,
    pub tone0: ToneParams,
}

impl RfPair {
    pub fn tone(&self, tone: Tone) -> ToneParams {
        match tone {
            Tone::One => self.tone1,
            Tone::Zero => self.tone0,
        }
    }

    /// Drive of `tone` at local time `t`, scaled by `conversion`.
    pub fn sample(&self, tone: Tone, t: f64, conversion: f64) -> Result<ToneSample> {
        let p = self.tone(tone);
        let v = p.weight * self.envelope.value(t)?;
        Ok(tone_sample(v, p.static_phase, conversion))
    }
}

fn tone_sample(value: f64, static_phase: f64, conversion: f64) -> ToneSample {
    let flipped = value < 0.0;
    ToneSample {
        amplitude: conversion * value.abs(),
        flipped,
        phase: static_phase + if flipped { PI } else { 0.0 },
    }
}

/// Tone weights and static phases of a pair: (2B, 0) for the |1⟩ tone and
/// (2A, −φ) for the |0⟩ tone.
pub fn rf_parameters(pair: &PulsePair) -> RfPair {
    let (w1, w0) = pair.tone_weights();
    RfPair {
        envelope: pair.envelope.clone(),
        tone1: ToneParams {
            weight: w1,
            static_phase: 0.0,
        },
        tone0: ToneParams {
            weight: w0,
            static_phase: -pair.params.phi(),
        },
    }
}

/// Sampled waveform; multi-channel data is stored frame by frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub samples: Vec<f64>,
    /// Samples per µs.
    pub rate: f64,
    pub channels: Vec<String>,
    pub duration_us: f64,
}

impl Waveform {
    pub fn frames(&self) -> usize {
        self.samples.len() / self.channels.len().max(1)
    }

    pub fn channel(&self, idx: usize) -> impl Iterator<Item = f64> + '_ {
        self.samples
            .iter()
            .skip(idx)
            .step_by(self.channels.len())
            .copied()
    }

    pub fn time(&self, frame: usize) -> f64 {
        frame as f64 / self.rate
    }
}

pub const SUM_CHANNEL: &str = "tone1+tone0";

fn frame_count(seq: &PulseSequence, rate: f64) -> usize {
    (seq.t2_us * rate).ceil() as usize
}

/// Per-tone drives at global time t, with t clamped into [0, t2].
fn drives_at(rf: &[RfPair; 2], seq: &PulseSequence, t: f64, conversion: f64) -> [ToneSample; 2] {
    let t = t.clamp(0.0, seq.t2_us);
    let (idx, local) = if t < seq.t1_us {
        (0, t)
    } else {
        (1, t - seq.t1_us)
    };
    let pair = &rf[idx];
    let omega = pair.envelope.eval(local.min(pair.envelope.duration()));
    [
        tone_sample(
            pair.tone1.weight * omega,
            pair.tone1.static_phase,
            conversion,
        ),
        tone_sample(
            pair.tone0.weight * omega,
            pair.tone0.static_phase,
            conversion,
        ),
    ]
}

fn tone_values(seq: &PulseSequence, spec: &RfSpec) -> Result<Vec<[f64; 2]>> {
    spec.validate()?;
    let rf = [rf_parameters(&seq.pair1), rf_parameters(&seq.pair2)];
    let freqs = [spec.f1_mhz, spec.f0_mhz];
    Ok((0..frame_count(seq, spec.sample_rate))
        .map(|k| {
            let t = k as f64 / spec.sample_rate;
            let d = drives_at(&rf, seq, t, spec.conversion);
            // the carrier runs on global time, so its phase is continuous
            // across pair boundaries and flips
            [0, 1].map(|i| d[i].amplitude * (TAU * freqs[i] * t + d[i].phase).cos())
        })
        .collect())
}

/// Summed two-tone waveform over [0, t₂], ceil(t₂·rate) samples at t = k/rate.
pub fn synthesize(seq: &PulseSequence, spec: &RfSpec) -> Result<Waveform> {
    let samples = tone_values(seq, spec)?
        .into_iter()
        .map(|[a, b]| a + b)
        .collect();
    Ok(Waveform {
        samples,
        rate: spec.sample_rate,
        channels: vec![SUM_CHANNEL.to_string()],
        duration_us: seq.t2_us,
    })
}

/// The two tones on separate channels.
pub fn synthesize_split(seq: &PulseSequence, spec: &RfSpec) -> Result<Waveform> {
    let samples = tone_values(seq, spec)?.into_iter().flatten().collect();
    Ok(Waveform {
        samples,
        rate: spec.sample_rate,
        channels: vec!["tone1".to_string(), "tone0".to_string()],
        duration_us: seq.t2_us,
    })
}

/// Informational rise-time summary of the tone amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSummary {
    /// max |dE/dt| over both tones, amplitude units per µs. Jumps between
    /// pairs count as one-sample slopes.
    pub max_slope: f64,
    /// Smallest baseband frequency containing 99% of the envelope energy, MHz.
    pub bandwidth_99_mhz: f64,
}

pub fn envelope_summary(seq: &PulseSequence, spec: &RfSpec) -> Result<EnvelopeSummary> {
    spec.validate()?;
    let rf = [rf_parameters(&seq.pair1), rf_parameters(&seq.pair2)];
    let n = frame_count(seq, spec.sample_rate).max(2);
    let dt = 1.0 / spec.sample_rate;
    let signed: Vec<[f64; 2]> = (0..n)
        .map(|k| {
            let d = drives_at(&rf, seq, k as f64 * dt, spec.conversion);
            d.map(|s| if s.flipped { -s.amplitude } else { s.amplitude })
        })
        .collect();
    let max_slope = signed
        .windows(2)
        .flat_map(|w| {
            [
                (w[1][0] - w[0][0]).abs() / dt,
                (w[1][1] - w[0][1]).abs() / dt,
            ]
        })
        .fold(0.0, f64::max);

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let mut bandwidth = 0.0f64;
    for tone in 0..2 {
        let mut buf: Vec<Complex<f64>> =
            signed.iter().map(|s| Complex::new(s[tone], 0.0)).collect();
        fft.process(&mut buf);
        let power: Vec<f64> = buf.iter().map(|c| c.norm_sqr()).collect();
        let total: f64 = power.iter().sum();
        if total == 0.0 {
            continue;
        }
        // fold negative frequencies onto positive ones
        let mut acc = power[0];
        let mut bin = 0;
        while acc < 0.99 * total && bin < n / 2 {
            bin += 1;
            acc += power[bin];
            if n - bin != bin {
                acc += power[n - bin];
            }
        }
        bandwidth = bandwidth.max(bin as f64 * spec.sample_rate / n as f64);
    }
    Ok(EnvelopeSummary {
        max_slope,
        bandwidth_99_mhz: bandwidth,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveformFormat {
    Csv,
    /// Little-endian f32 stream; samples are rounded to single precision.
    F32,
}

impl std::str::FromStr for WaveformFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "f32" | "f32le" | "bin" => Ok(Self::F32),
            other => Err(Error::InvalidParameter(format!(
                "unknown waveform format `{other}`"
            ))),
        }
    }
}

/// Metadata written next to every exported waveform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub format: WaveformFormat,
    pub rate: f64,
    pub channels: Vec<String>,
    pub duration_us: f64,
    pub frames: usize,
}

/// `<path>.json`
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the waveform and its sidecar. CSV values use the shortest
/// representation that parses back to the same f64.
pub fn export(w: &Waveform, path: &Path, format: WaveformFormat) -> Result<()> {
    if w.channels.is_empty() || !w.samples.len().is_multiple_of(w.channels.len()) {
        return Err(Error::Format(
            "sample count is not a multiple of the channel count".into(),
        ));
    }
    if w.samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Format("waveform has non-finite samples".into()));
    }
    let mut out = BufWriter::new(fs::File::create(path)?);
    match format {
        WaveformFormat::Csv => {
            let header = if w.channels.len() == 1 {
                "value".to_string()
            } else {
                w.channels.join(",")
            };
            writeln!(out, "t_us,{header}")?;
            for (k, frame) in w.samples.chunks(w.channels.len()).enumerate() {
                write!(out, "{}", w.time(k))?;
                for v in frame {
                    write!(out, ",{v}")?;
                }
                writeln!(out)?;
            }
        }
        WaveformFormat::F32 => {
            for v in &w.samples {
                out.write_all(&(*v as f32).to_le_bytes())?;
            }
        }
    }
    out.flush()?;
    let sidecar = Sidecar {
        format,
        rate: w.rate,
        channels: w.channels.clone(),
        duration_us: w.duration_us,
        frames: w.frames(),
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

/// Reads a waveform written by [`export`]; the sidecar must be present.
pub fn import(path: &Path) -> Result<Waveform> {
    let sidecar: Sidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    let width = sidecar.channels.len();
    if width == 0 {
        return Err(Error::Format("sidecar lists no channels".into()));
    }
    let samples = match sidecar.format {
        WaveformFormat::Csv => {
            let mut lines = BufReader::new(fs::File::open(path)?).lines();
            let header = lines
                .next()
                .ok_or_else(|| Error::Format("empty CSV".into()))??;
            if header.split(',').count() != width + 1 {
                return Err(Error::Format(format!(
                    "CSV header `{header}` does not match {width} channel(s)"
                )));
            }
            let mut samples = Vec::with_capacity(sidecar.frames * width);
            for (i, line) in lines.enumerate() {
                let line = line?;
                let fields: Vec<&str> = line.split(',').collect();
                if fields.len() != width + 1 {
                    return Err(Error::Format(format!(
                        "line {}: expected {} fields",
                        i + 2,
                        width + 1
                    )));
                }
                for f in &fields[1..] {
                    samples.push(
                        f.trim()
                            .parse::<f64>()
                            .map_err(|e| Error::Format(format!("line {}: {e}", i + 2)))?,
                    );
                }
            }
            samples
        }
        WaveformFormat::F32 => {
            let bytes = fs::read(path)?;
            if bytes.len() % 4 != 0 {
                return Err(Error::Format(format!(
                    "{} bytes is not a whole number of f32 samples",
                    bytes.len()
                )));
            }
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect()
        }
    };
    if samples.len() != sidecar.frames * width {
        return Err(Error::Format(format!(
            "expected {} samples, found {}",
            sidecar.frames * width,
            samples.len()
        )));
    }
    Ok(Waveform {
        samples,
        rate: sidecar.rate,
        channels: sidecar.channels,
        duration_us: sidecar.duration_us,
    })
}
