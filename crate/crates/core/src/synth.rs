//! Deterministic fixture generators.
//!
//! All randomness comes from [`Lcg`], a 32-bit linear congruential generator
//! with the Numerical Recipes constants, so fixtures are reproducible from
//! their arguments on any platform.

use std::f64::consts::PI;

use thiserror::Error;

use crate::bp::GrayImage;
use crate::dsp::{SampleStream, Segment, RATE_HZ, WINDOW_LEN};
use crate::quality::QualityClass;

pub const CARRIER_HZ: f64 = 400.0;
pub const CARRIER_AMPLITUDE: f64 = 0.5;
/// Raised-cosine beat burst length.
pub const BURST_S: f64 = 0.120;

pub const SILENT_NOISE: f64 = 0.0005;
pub const GOOD_NOISE: f64 = 0.05;
pub const INTERFERENCE_NOISE: f64 = 0.3;
/// Beat modulation depth of the Poor fixture; the carrier keeps sounding
/// between beats so the heartbeat periodicity is weak.
pub const POOR_BEAT_DEPTH: f64 = 0.18;
/// Noise of the Poor fixture. A shallow beat alone leaves a near-pure
/// carrier tone, which the peak-bin rule reads as Interference.
pub const POOR_NOISE: f64 = 0.36;
pub const CLASS_FIXTURE_BPM: f64 = 140.0;

pub const TALKING_F0_HZ: f64 = 150.0;
pub const TALKING_HARMONICS: usize = 5;
pub const TALKING_SYLLABLE_HZ: f64 = 3.0;
pub const TALKING_AMPLITUDE: f64 = 0.3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("{name} = {value} is outside {lo}..={hi}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
}

fn check(name: &'static str, value: f64, lo: f64, hi: f64) -> Result<(), SynthError> {
    if value.is_finite() && (lo..=hi).contains(&value) {
        Ok(())
    } else {
        Err(SynthError::OutOfRange {
            name,
            value,
            lo,
            hi,
        })
    }
}

/// `x <- 1664525 x + 1013904223 (mod 2^32)`.
#[derive(Debug, Clone)]
pub struct Lcg {
    state: u32,
}

impl Lcg {
    /// Seeds with the low 32 bits of `seed`.
    pub fn new(seed: u64) -> Self {
        Self { state: seed as u32 }
    }

    pub fn next_u32(&mut self) -> u32 {
        self.state = self
            .state
            .wrapping_mul(1_664_525)
            .wrapping_add(1_013_904_223);
        self.state
    }

    /// Uniform in [0, 1).
    pub fn unit(&mut self) -> f64 {
        f64::from(self.next_u32()) / 4_294_967_296.0
    }

    /// Uniform in [-1, 1).
    pub fn uniform(&mut self) -> f64 {
        2.0 * self.unit() - 1.0
    }

    /// Standard normal via Box-Muller (consumes two draws).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.unit();
        let u2 = self.unit();
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DopplerParams {
    pub bpm: f64,
    pub noise_level: f64,
    pub seed: u64,
    /// 1.0 silences the carrier between beats; 0.0 removes the beats.
    pub beat_depth: f64,
    pub carrier_amplitude: f64,
    /// Time of the first beat onset, in seconds.
    pub phase_s: f64,
}

impl DopplerParams {
    pub fn new(bpm: f64, noise_level: f64, seed: u64) -> Self {
        Self {
            bpm,
            noise_level,
            seed,
            beat_depth: 1.0,
            carrier_amplitude: CARRIER_AMPLITUDE,
            phase_s: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        check("bpm", self.bpm, 60.0, 240.0)?;
        check("noise_level", self.noise_level, 0.0, 1.0)?;
        check("beat_depth", self.beat_depth, 0.0, 1.0)?;
        check("carrier_amplitude", self.carrier_amplitude, 0.0, 1.0)?;
        check("phase_s", self.phase_s, 0.0, f64::MAX)
    }
}

/// Beat envelope value at time `t`: a raised-cosine burst at each beat onset.
fn beat_shape(t: f64, period_s: f64) -> f64 {
    let tau = t - period_s * (t / period_s).floor();
    if tau < BURST_S {
        0.5 * (1.0 - (2.0 * PI * tau / BURST_S).cos())
    } else {
        0.0
    }
}

/// Streaming Doppler generator. Sample `n` depends only on the parameters
/// and `n`, so any chunking produces the same stream. The noise level may be
/// changed mid-stream.
#[derive(Debug, Clone)]
pub struct DopplerSynth {
    params: DopplerParams,
    rng: Lcg,
    next: u64,
}

impl DopplerSynth {
    pub fn new(params: DopplerParams) -> Result<Self, SynthError> {
        params.validate()?;
        let rng = Lcg::new(params.seed);
        Ok(Self {
            params,
            rng,
            next: 0,
        })
    }

    pub fn params(&self) -> &DopplerParams {
        &self.params
    }

    pub fn position(&self) -> u64 {
        self.next
    }

    pub fn set_noise_level(&mut self, level: f64) -> Result<(), SynthError> {
        check("noise_level", level, 0.0, 1.0)?;
        self.params.noise_level = level;
        Ok(())
    }

    pub fn next_chunk(&mut self, len: usize) -> Vec<f64> {
        let p = &self.params;
        let period = 60.0 / p.bpm;
        let out = (0..len as u64)
            .map(|i| {
                let t = (self.next + i) as f64 / f64::from(RATE_HZ);
                let env = (1.0 - p.beat_depth) + p.beat_depth * beat_shape(t + p.phase_s, period);
                let carrier = (2.0 * PI * CARRIER_HZ * t).sin();
                let noise = self.rng.uniform();
                (p.carrier_amplitude * env * carrier + p.noise_level * noise).clamp(-1.0, 1.0)
            })
            .collect();
        self.next += len as u64;
        out
    }
}

fn n_samples(duration_s: f64) -> Result<usize, SynthError> {
    check("duration_s", duration_s, 1.0 / f64::from(RATE_HZ), 86_400.0)?;
    Ok((duration_s * f64::from(RATE_HZ)).round() as usize)
}

/// Carrier at 400 Hz amplitude-modulated by 120 ms beat bursts every
/// `60 / bpm` seconds, plus seeded uniform noise.
pub fn synth_doppler(
    bpm: f64,
    duration_s: f64,
    noise_level: f64,
    seed: u64,
) -> Result<SampleStream, SynthError> {
    synth_doppler_with(DopplerParams::new(bpm, noise_level, seed), duration_s)
}

pub fn synth_doppler_with(params: DopplerParams, duration_s: f64) -> Result<SampleStream, SynthError> {
    let n = n_samples(duration_s)?;
    let mut gen = DopplerSynth::new(params)?;
    Ok(SampleStream::new(RATE_HZ, gen.next_chunk(n)).expect("generator output is clamped"))
}

/// Voiced-speech stand-in: a harmonic stack on `TALKING_F0_HZ` with a slow
/// syllabic amplitude modulation and no heartbeat bursts.
pub fn synth_talking(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = Lcg::new(seed);
    let phases: Vec<f64> = (0..TALKING_HARMONICS).map(|_| 2.0 * PI * rng.unit()).collect();
    let am_phase = 2.0 * PI * rng.unit();
    let norm: f64 = (1..=TALKING_HARMONICS).map(|h| 1.0 / h as f64).sum();
    (0..n)
        .map(|i| {
            let t = i as f64 / f64::from(RATE_HZ);
            let voiced: f64 = phases
                .iter()
                .enumerate()
                .map(|(k, ph)| {
                    let h = (k + 1) as f64;
                    (2.0 * PI * TALKING_F0_HZ * h * t + ph).sin() / h
                })
                .sum::<f64>()
                / norm;
            let syllable = 0.6 + 0.4 * (2.0 * PI * TALKING_SYLLABLE_HZ * t + am_phase).sin();
            (TALKING_AMPLITUDE * syllable * voiced + 0.01 * rng.uniform()).clamp(-1.0, 1.0)
        })
        .collect()
}

fn noise(n: usize, amplitude: f64, seed: u64) -> Vec<f64> {
    let mut rng = Lcg::new(seed);
    (0..n).map(|_| amplitude * rng.uniform()).collect()
}

/// One analysis window whose signature matches `class`.
pub fn synth_class(class: QualityClass, seed: u64) -> Segment {
    let samples = match class {
        QualityClass::Silent => noise(WINDOW_LEN, SILENT_NOISE, seed),
        QualityClass::Interference => noise(WINDOW_LEN, INTERFERENCE_NOISE, seed),
        QualityClass::Talking => synth_talking(WINDOW_LEN, seed),
        QualityClass::Good | QualityClass::Poor => {
            let mut params = DopplerParams::new(CLASS_FIXTURE_BPM, GOOD_NOISE, seed);
            // vary the beat phase with the seed too
            params.phase_s = Lcg::new(seed ^ 0x5eed).unit() * 60.0 / CLASS_FIXTURE_BPM;
            if class == QualityClass::Poor {
                params.beat_depth = POOR_BEAT_DEPTH;
                params.noise_level = POOR_NOISE;
            }
            DopplerSynth::new(params)
                .expect("fixed parameters are valid")
                .next_chunk(WINDOW_LEN)
        }
    };
    Segment::new(0, samples).expect("fixture length is one window")
}

/// Corrupts about `fraction` of the pixels: half set to 0, half to 255.
pub fn salt_and_pepper(img: &mut GrayImage, fraction: f64, seed: u64) {
    let mut rng = Lcg::new(seed);
    for p in img.pixels_mut() {
        let u = rng.unit();
        if u < fraction / 2.0 {
            *p = 0;
        } else if u < fraction {
            *p = 255;
        }
    }
}
