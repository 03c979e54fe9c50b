use std::collections::BTreeMap;

use serde::Serialize;

use super::{IoError, SessionLog, TickRow};

/// Row fields that can be compared. `scores.<Class>` is accepted too.
pub const NUMERIC_FIELDS: [&str; 6] = [
    "fhr_bpm",
    "fhr_rho",
    "ga_weeks",
    "ga_windows",
    "t_end_s",
    "processing_ms",
];

/// Agreement between two runs on one field, errors taken as `a - b`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParityReport {
    pub field: String,
    pub n: usize,
    pub mae: f64,
    /// Sample SD of the signed errors; 0 when `n` is 1.
    pub sd_error: f64,
    pub max_abs_error: f64,
    #[serde(skip)]
    pub mean_error: f64,
}

fn extractor(field: &str) -> Option<fn(&TickRow) -> Option<f64>> {
    let f: fn(&TickRow) -> Option<f64> = match field {
        "fhr_bpm" => |r| r.fhr_bpm,
        "fhr_rho" => |r| r.fhr_rho,
        "ga_weeks" => |r| r.ga_weeks,
        "ga_windows" => |r| Some(r.ga_windows as f64),
        "t_end_s" => |r| Some(r.t_end_s),
        "processing_ms" => |r| Some(r.processing_ms),
        "scores.Good" => |r| Some(r.scores.good),
        "scores.Poor" => |r| Some(r.scores.poor),
        "scores.Interference" => |r| Some(r.scores.interference),
        "scores.Talking" => |r| Some(r.scores.talking),
        "scores.Silent" => |r| Some(r.scores.silent),
        _ => return None,
    };
    Some(f)
}

pub fn compare_runs(a: &SessionLog, b: &SessionLog, field: &str) -> Result<ParityReport, IoError> {
    let get = extractor(field).ok_or_else(|| IoError::FieldMissing(field.to_string()))?;
    let b_by_tick: BTreeMap<u64, f64> = b
        .rows
        .iter()
        .filter_map(|r| get(r).map(|v| (r.tick, v)))
        .collect();
    let errors: Vec<f64> = a
        .rows
        .iter()
        .filter_map(|r| Some(get(r)? - b_by_tick.get(&r.tick)?))
        .collect();
    if errors.is_empty() {
        return Err(IoError::NoOverlap);
    }
    let n = errors.len();
    let mean = errors.iter().sum::<f64>() / n as f64;
    let sd = if n < 2 {
        0.0
    } else {
        (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    Ok(ParityReport {
        field: field.to_string(),
        n,
        mae: errors.iter().map(|e| e.abs()).sum::<f64>() / n as f64,
        sd_error: sd,
        max_abs_error: errors.iter().fold(0.0, |m, e| m.max(e.abs())),
        mean_error: mean,
    })
}
