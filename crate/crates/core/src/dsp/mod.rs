//! Sample-stream primitives shared by the analysis stages.

mod ring;
pub mod spsc;

use std::cell::RefCell;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

pub use ring::{PopError, RingBuffer, WindowSource};

/// Internal sample rate. Every window and hop constant below assumes it.
pub const RATE_HZ: u32 = 4000;
/// 3.75 s analysis window.
pub const WINDOW_LEN: usize = 15_000;
/// 1 s hop between consecutive windows.
pub const HOP_LEN: usize = 4_000;
/// 8 s of audio.
pub const DEFAULT_RING_CAPACITY: usize = 32_000;
/// Centered moving-average length used by [`envelope`] (about 25 ms).
pub const ENVELOPE_LEN: usize = 101;

/// Full scale for 16-bit PCM ingestion.
pub const PCM16_FULL_SCALE: f64 = 32768.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("empty sample stream")]
    EmptyStream,
    #[error("sample rate must be positive")]
    ZeroRate,
    #[error("sample {index} is not a finite amplitude in [-1, 1]: {value}")]
    BadSample { index: usize, value: f64 },
    #[error("segment must hold exactly {WINDOW_LEN} samples, got {0}")]
    SegmentLength(usize),
}

/// Mono audio at a known rate, amplitudes normalized to [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStream {
    rate_hz: u32,
    samples: Vec<f64>,
}

impl SampleStream {
    pub fn new(rate_hz: u32, samples: Vec<f64>) -> Result<Self, DspError> {
        if rate_hz == 0 {
            return Err(DspError::ZeroRate);
        }
        check_samples(&samples)?;
        Ok(Self { rate_hz, samples })
    }

    /// Builds a stream from 16-bit PCM, dividing by 32768.
    pub fn from_pcm16(rate_hz: u32, pcm: &[i16]) -> Result<Self, DspError> {
        let samples = pcm.iter().map(|&s| f64::from(s) / PCM16_FULL_SCALE).collect();
        Self::new(rate_hz, samples)
    }

    pub fn rate_hz(&self) -> u32 {
        self.rate_hz
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.rate_hz)
    }
}

fn check_samples(samples: &[f64]) -> Result<(), DspError> {
    match samples
        .iter()
        .position(|v| !v.is_finite() || v.abs() > 1.0)
    {
        Some(index) => Err(DspError::BadSample {
            index,
            value: samples[index],
        }),
        None => Ok(()),
    }
}

/// One 3.75 s analysis window at 4000 Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    samples: Vec<f64>,
    index: u64,
}

impl Segment {
    pub fn new(index: u64, samples: Vec<f64>) -> Result<Self, DspError> {
        if samples.len() != WINDOW_LEN {
            return Err(DspError::SegmentLength(samples.len()));
        }
        check_samples(&samples)?;
        Ok(Self { samples, index })
    }

    /// Emission ordinal; segment `k` covers stream samples `[4000k, 4000k + 15000)`.
    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn start_time_s(&self) -> f64 {
        self.index as f64 * (HOP_LEN as f64 / f64::from(RATE_HZ))
    }

    pub fn end_time_s(&self) -> f64 {
        self.start_time_s() + WINDOW_LEN as f64 / f64::from(RATE_HZ)
    }

    /// First stream sample covered by this segment.
    pub fn first_sample(&self) -> u64 {
        self.index * HOP_LEN as u64
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }
}

/// Linear-interpolation rate conversion.
///
/// Output sample `i` sits at input position `i * rate_in / rate_out`; positions
/// past the last input sample hold the last value.
pub fn resample(input: &SampleStream, target_rate_hz: u32) -> Result<SampleStream, DspError> {
    if target_rate_hz == 0 {
        return Err(DspError::ZeroRate);
    }
    if input.is_empty() {
        return Err(DspError::EmptyStream);
    }
    if input.rate_hz == target_rate_hz {
        return Ok(input.clone());
    }
    let n_in = input.samples.len();
    let rate_in = u64::from(input.rate_hz);
    let rate_out = u64::from(target_rate_hz);
    let n_out = ((n_in as f64) * (rate_out as f64) / (rate_in as f64)).round() as usize;
    let last = input.samples[n_in - 1];
    let samples = (0..n_out)
        .map(|i| {
            // exact integer position numerator keeps long streams drift-free
            let num = i as u64 * rate_in;
            let base = (num / rate_out) as usize;
            let frac = (num % rate_out) as f64 / rate_out as f64;
            if base + 1 >= n_in {
                return if base < n_in { input.samples[base] } else { last };
            }
            let (a, b) = (input.samples[base], input.samples[base + 1]);
            a + (b - a) * frac
        })
        .collect();
    Ok(SampleStream {
        rate_hz: target_rate_hz,
        samples,
    })
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn remove_mean(x: &[f64]) -> Vec<f64> {
    let m = mean(x);
    x.iter().map(|v| v - m).collect()
}

/// Mean-removed, full-wave rectified signal smoothed by a centered
/// [`ENVELOPE_LEN`]-sample moving average. Edge windows shrink to the samples
/// that exist.
pub fn envelope(x: &[f64]) -> Vec<f64> {
    let m = mean(x);
    let rect: Vec<f64> = x.iter().map(|v| (v - m).abs()).collect();
    moving_average(&rect, ENVELOPE_LEN / 2)
}

fn moving_average(x: &[f64], half: usize) -> Vec<f64> {
    let n = x.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in x {
        acc += v;
        prefix.push(acc);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            // prefix differences can dip a hair below zero
            ((prefix[hi] - prefix[lo]) / (hi - lo) as f64).max(0.0)
        })
        .collect()
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn fft_in_place(buf: &mut [Complex<f64>], inverse: bool) {
    let plan = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(buf.len())
        } else {
            p.plan_fft_forward(buf.len())
        }
    });
    plan.process(buf);
}

/// One-sided power spectrum of the mean-removed signal, bins `0..=N/2`.
///
/// Bin `k` corresponds to `k * rate / N` Hz. Interior bins carry both the
/// positive and negative frequency halves, and everything is divided by `N`,
/// so the bins sum to the time-domain energy of the mean-removed signal.
pub fn power_spectrum(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let m = mean(x);
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v - m, 0.0)).collect();
    fft_in_place(&mut buf, false);
    let half = n / 2;
    let scale = 1.0 / n as f64;
    (0..=half)
        .map(|k| {
            let p = buf[k].norm_sqr() * scale;
            if k == 0 || (n % 2 == 0 && k == half) {
                p
            } else {
                2.0 * p
            }
        })
        .collect()
}

/// Frequency in Hz of spectrum bin `k` for an `n`-sample transform.
pub fn bin_frequency(k: usize, n: usize, rate_hz: u32) -> f64 {
    k as f64 * f64::from(rate_hz) / n as f64
}
