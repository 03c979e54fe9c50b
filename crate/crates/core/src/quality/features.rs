use serde::{Deserialize, Serialize};

use crate::dsp::{power_spectrum, remove_mean, Segment, RATE_HZ};
use crate::fhr::{autocorr_normalized, envelope_periodicity, normalize_peak};

/// Spectrum bins averaged together before the flatness ratio. A raw
/// periodogram of white noise has exponentially distributed bins whose
/// geometric/arithmetic ratio sits near 0.56; averaging 50 bins pulls it
/// close to 1.
pub const FLATNESS_BAND: usize = 50;

/// Lags searched for a voice fundamental: 4000/300 to 4000/85 samples.
pub const VOICE_LAG_MIN: usize = 14;
pub const VOICE_LAG_MAX: usize = 47;
/// Shortest lag considered when locating the dominant fundamental (2 kHz).
const PITCH_SEARCH_MIN: usize = 2;
/// A local maximum this close to the strongest one counts as the pitch.
pub const PITCH_PEAK_RATIO: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityFeatures {
    /// Root mean square in full-scale units.
    pub rms: f64,
    pub zcr_hz: f64,
    pub flatness: f64,
    /// Heartbeat-band periodicity strength of the envelope.
    pub rho_fhr: f64,
    /// Autocorrelation strength of a voice-band fundamental.
    pub rho_voice: f64,
    pub peak_bin_fraction: f64,
}

/// Geometric over arithmetic mean of the band-averaged spectrum, bin 0
/// excluded. Zero when any band is silent.
pub fn spectral_flatness(spectrum: &[f64]) -> f64 {
    let bands: Vec<f64> = spectrum
        .get(1..)
        .unwrap_or(&[])
        .chunks(FLATNESS_BAND)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    if bands.is_empty() {
        return 0.0;
    }
    let arith = bands.iter().sum::<f64>() / bands.len() as f64;
    if arith <= 0.0 || bands.iter().any(|&b| b <= 0.0) {
        return 0.0;
    }
    let log_mean = bands.iter().map(|b| b.ln()).sum::<f64>() / bands.len() as f64;
    (log_mean.exp() / arith).clamp(0.0, 1.0)
}

/// Strength of the fundamental short-lag periodicity, counted only when that
/// fundamental lies in the voice band.
///
/// The fundamental is the shortest-lag local maximum of the autocorrelation
/// (lags 2 to 47) reaching [`PITCH_PEAK_RATIO`] of the strongest one. A
/// 400 Hz Doppler carrier peaks at lag 10 and again, about as high, at
/// 20, 30 and 40; taking the first strong peak keeps those multiples from
/// reading as a voice pitch.
fn voice_strength(x: &[f64]) -> f64 {
    let Ok(ac) = autocorr_normalized(x, PITCH_SEARCH_MIN - 1, VOICE_LAG_MAX + 1) else {
        return 0.0;
    };
    let peaks: Vec<(usize, f64)> = (PITCH_SEARCH_MIN..=VOICE_LAG_MAX)
        .map(|lag| (lag, ac.at(lag)))
        .filter(|&(lag, v)| v > 0.0 && v >= ac.at(lag - 1) && v > ac.at(lag + 1))
        .collect();
    let top = peaks.iter().fold(0.0f64, |m, &(_, v)| m.max(v));
    match peaks.iter().find(|&&(_, v)| v >= PITCH_PEAK_RATIO * top) {
        Some(&(lag, v)) if lag >= VOICE_LAG_MIN => v.min(1.0),
        _ => 0.0,
    }
}

pub fn extract_features(seg: &Segment) -> QualityFeatures {
    features_of(seg.samples())
}

pub(crate) fn features_of(samples: &[f64]) -> QualityFeatures {
    let n = samples.len() as f64;
    let rms = (samples.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    let centered = remove_mean(samples);
    let crossings = centered
        .windows(2)
        .filter(|w| (w[0] < 0.0) != (w[1] < 0.0))
        .count();
    let zcr_hz = crossings as f64 / (n / f64::from(RATE_HZ));

    let spectrum = power_spectrum(samples);
    let total: f64 = spectrum.iter().sum();
    let peak_bin_fraction = if total > 0.0 {
        (spectrum.iter().fold(0.0f64, |m, &p| m.max(p)) / total).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let flatness = spectral_flatness(&spectrum);

    let rho_fhr = envelope_periodicity(samples).map_or(0.0, |p| p.value);
    let rho_voice = normalize_peak(samples)
        .map(|x| voice_strength(&remove_mean(&x)))
        .unwrap_or(0.0);

    QualityFeatures {
        rms,
        zcr_hz,
        flatness,
        rho_fhr,
        rho_voice,
        peak_bin_fraction,
    }
}
