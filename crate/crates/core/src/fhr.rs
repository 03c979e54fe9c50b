//! Fetal heart rate from the normalized autocorrelation of the envelope.
//!
//! Heartbeats show up in Doppler audio as amplitude modulation of the
//! carrier, so the search runs on [`envelope`] output over lags covering
//! 60 to 240 BPM. The strongest lag wins (ties go to the shorter lag, which
//! keeps sub-harmonics out) and a parabola through its neighbours refines it
//! to sub-sample resolution.

use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{envelope, fft_in_place, remove_mean, Segment, RATE_HZ};

/// 240 BPM.
pub const LAG_MIN: usize = 1000;
/// 60 BPM.
pub const LAG_MAX: usize = 4000;
/// Below this periodicity strength the window has no usable heartbeat.
pub const MIN_RHO: f64 = 0.3;

const ZERO_ENERGY: f64 = 1e-12;
/// Work above which the autocorrelation switches to the FFT route.
const DIRECT_WORK_LIMIT: usize = 2_000_000;
/// Grid for input normalization, see [`normalize_peak`].
const QUANT: f64 = (1u64 << 24) as f64;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum FhrError {
    #[error("signal has no energy")]
    ZeroEnergy,
    #[error("no periodicity in the heart-rate band (rho {rho:.3})")]
    NoPeriodicity { rho: f64 },
    #[error("invalid lag range {lag_min}..={lag_max} for {len} samples")]
    BadLagRange {
        lag_min: usize,
        lag_max: usize,
        len: usize,
    },
}

impl FhrError {
    /// Stable snake_case tag used in logs.
    pub fn reason(&self) -> &'static str {
        match self {
            FhrError::ZeroEnergy => "zero_energy",
            FhrError::NoPeriodicity { .. } => "no_periodicity",
            FhrError::BadLagRange { .. } => "bad_lag_range",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FhrEstimate {
    pub bpm: f64,
    /// Peak normalized autocorrelation, in [0, 1].
    pub rho: f64,
    /// Sub-sample beat period.
    pub lag_samples: f64,
}

/// Normalized autocorrelation over an inclusive lag range.
#[derive(Debug, Clone, PartialEq)]
pub struct Autocorrelation {
    lag_min: usize,
    values: Vec<f64>,
}

impl Autocorrelation {
    pub fn lag_min(&self) -> usize {
        self.lag_min
    }

    pub fn lag_max(&self) -> usize {
        self.lag_min + self.values.len() - 1
    }

    pub fn at(&self, lag: usize) -> f64 {
        self.values[lag - self.lag_min]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Lag with the largest value; ties resolve to the smaller lag.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        self.lag_min + best
    }
}

/// `r[lag] = sum x[n] x[n + lag] / sum x[n]^2` for `lag_min..=lag_max`.
///
/// `x` is expected to be mean-removed already.
pub fn autocorr_normalized(
    x: &[f64],
    lag_min: usize,
    lag_max: usize,
) -> Result<Autocorrelation, FhrError> {
    if lag_min < 1 || lag_max < lag_min || x.len() <= lag_max {
        return Err(FhrError::BadLagRange {
            lag_min,
            lag_max,
            len: x.len(),
        });
    }
    let energy: f64 = x.iter().map(|v| v * v).sum();
    if energy < ZERO_ENERGY {
        return Err(FhrError::ZeroEnergy);
    }
    let n_lags = lag_max - lag_min + 1;
    let raw = if n_lags * x.len() <= DIRECT_WORK_LIMIT {
        (lag_min..=lag_max)
            .map(|lag| x[..x.len() - lag].iter().zip(&x[lag..]).map(|(a, b)| a * b).sum())
            .collect::<Vec<f64>>()
    } else {
        fft_autocorr(x, lag_min, lag_max)
    };
    let values = raw
        .into_iter()
        .map(|v: f64| (v / energy).clamp(-1.0, 1.0))
        .collect();
    Ok(Autocorrelation { lag_min, values })
}

fn fft_autocorr(x: &[f64], lag_min: usize, lag_max: usize) -> Vec<f64> {
    let m = (x.len() + lag_max).next_power_of_two();
    let mut buf = vec![Complex::new(0.0, 0.0); m];
    for (b, v) in buf.iter_mut().zip(x) {
        b.re = *v;
    }
    fft_in_place(&mut buf, false);
    for b in buf.iter_mut() {
        *b = Complex::new(b.norm_sqr(), 0.0);
    }
    fft_in_place(&mut buf, true);
    let scale = 1.0 / m as f64;
    buf[lag_min..=lag_max].iter().map(|c| c.re * scale).collect()
}

/// Scales so the largest magnitude is 1 and snaps to a 2^-24 grid.
///
/// Snapping absorbs the last-bit differences between `k * x / max(k * x)`
/// and `x / max(x)`, which makes everything downstream exactly gain
/// invariant. Returns `None` for an all-zero input.
pub fn normalize_peak(x: &[f64]) -> Option<Vec<f64>> {
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 || !peak.is_finite() {
        return None;
    }
    Some(x.iter().map(|v| (v / peak * QUANT).round() / QUANT).collect())
}

/// Refined autocorrelation peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub lag: f64,
    pub value: f64,
}

/// Parabolic refinement around the integer argmax. Band edges are returned
/// unrefined.
pub fn refine_peak(ac: &Autocorrelation) -> Peak {
    let best = ac.argmax();
    let y0 = ac.at(best);
    if best == ac.lag_min() || best == ac.lag_max() {
        return Peak {
            lag: best as f64,
            value: y0,
        };
    }
    let (ym, yp) = (ac.at(best - 1), ac.at(best + 1));
    let denom = ym - 2.0 * y0 + yp;
    if denom >= 0.0 {
        return Peak {
            lag: best as f64,
            value: y0,
        };
    }
    let delta = (0.5 * (ym - yp) / denom).clamp(-0.5, 0.5);
    Peak {
        lag: best as f64 + delta,
        value: y0 - 0.25 * (ym - yp) * delta,
    }
}

/// Strongest heartbeat-band periodicity of a raw window, before the
/// [`MIN_RHO`] gate. The returned value is clamped to [0, 1].
pub fn envelope_periodicity(samples: &[f64]) -> Result<Peak, FhrError> {
    let x = normalize_peak(samples).ok_or(FhrError::ZeroEnergy)?;
    let env = remove_mean(&envelope(&x));
    let ac = autocorr_normalized(&env, LAG_MIN, LAG_MAX)?;
    let peak = refine_peak(&ac);
    Ok(Peak {
        lag: peak.lag,
        value: peak.value.clamp(0.0, 1.0),
    })
}

pub fn bpm_from_lag(lag_samples: f64) -> f64 {
    60.0 * f64::from(RATE_HZ) / lag_samples
}

pub fn estimate_fhr(seg: &Segment) -> Result<FhrEstimate, FhrError> {
    estimate_fhr_samples(seg.samples())
}

/// [`estimate_fhr`] on a bare slice (any length above the lag band).
pub fn estimate_fhr_samples(samples: &[f64]) -> Result<FhrEstimate, FhrError> {
    let peak = envelope_periodicity(samples)?;
    if peak.value < MIN_RHO {
        return Err(FhrError::NoPeriodicity { rho: peak.value });
    }
    Ok(FhrEstimate {
        bpm: bpm_from_lag(peak.lag),
        rho: peak.value,
        lag_samples: peak.lag,
    })
}
