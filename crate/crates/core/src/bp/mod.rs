//! Blood-pressure monitor transcription: locate the LCD, split it into
//! rows and digit cells, decode each seven-segment digit, then validate the
//! reading.

mod detect;
mod digit;
mod image;
mod render;

use serde::Serialize;
use thiserror::Error;

pub use detect::{locate_lcd, FixedDetector, LcdDetector, OtsuDetector, OTSU_DETECTOR_NAME};
pub use digit::{
    decode_digit, draw_pattern, read_pattern, SegmentPattern, UndecodablePattern, DIGIT_ASPECT,
    DIGIT_PATTERNS,
};
pub use image::{otsu_threshold, GrayImage};
pub use render::{panel_box, render_lcd, render_lcd_rows};

pub const SYSTOLIC_RANGE: (u32, u32) = (60, 260);
pub const DIASTOLIC_RANGE: (u32, u32) = (30, 160);
pub const PULSE_RANGE: (u32, u32) = (30, 220);

/// A row band shorter than this fraction of the tallest band is noise.
const MIN_ROW_FRAC: f64 = 0.3;
/// Column groups with fewer ink pixels than this times `h^2` are noise.
const MIN_BLOB_INK: f64 = 0.05;
/// Blobs narrower than this fraction of a digit width are a bare `1`.
const NARROW_BLOB_FRAC: f64 = 0.6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BpError {
    #[error("no LCD panel found")]
    NoLcdFound,
    #[error("undecodable pattern {pattern} at row {row}, cell {cell}")]
    UndecodablePattern {
        row: usize,
        cell: usize,
        pattern: SegmentPattern,
    },
    #[error("expected 2 or 3 text rows, found {found}")]
    RowSplitFailure { found: usize },
    #[error("value {0} cannot be shown on a 3-digit display")]
    OutOfRangeValue(i64),
    #[error("image {width}x{height} is below the 64x64 minimum")]
    ImageTooSmall { width: usize, height: usize },
    #[error("bad image: {0}")]
    BadImage(String),
}

impl BpError {
    pub fn reason(&self) -> &'static str {
        match self {
            BpError::NoLcdFound => "no_lcd_found",
            BpError::UndecodablePattern { .. } => "undecodable_pattern",
            BpError::RowSplitFailure { .. } => "row_split_failure",
            BpError::OutOfRangeValue(_) => "out_of_range_value",
            BpError::ImageTooSmall { .. } => "image_too_small",
            BpError::BadImage(_) => "bad_image",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LcdRegion {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

/// Why a transcribed reading failed validation. Checks run in declaration
/// order and the first failure is recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Violation {
    SystolicOutOfRange,
    DiastolicOutOfRange,
    SystolicNotGreater,
    PulseAbsent,
    PulseOutOfRange,
}

impl Violation {
    pub fn as_str(self) -> &'static str {
        match self {
            Violation::SystolicOutOfRange => "systolic_out_of_range",
            Violation::DiastolicOutOfRange => "diastolic_out_of_range",
            Violation::SystolicNotGreater => "systolic_not_greater",
            Violation::PulseAbsent => "pulse_absent",
            Violation::PulseOutOfRange => "pulse_out_of_range",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BpReading {
    pub systolic: u32,
    pub diastolic: u32,
    /// 0 when the display has no pulse row.
    pub pulse: u32,
    pub valid: bool,
    #[serde(rename = "reason", skip_serializing_if = "Option::is_none")]
    pub violation: Option<Violation>,
    #[serde(skip)]
    pub digit_patterns: Vec<Vec<SegmentPattern>>,
    #[serde(skip)]
    pub region: Option<LcdRegion>,
}

fn in_range(v: u32, (lo, hi): (u32, u32)) -> bool {
    (lo..=hi).contains(&v)
}

pub fn validate(systolic: u32, diastolic: u32, pulse: Option<u32>) -> Option<Violation> {
    if !in_range(systolic, SYSTOLIC_RANGE) {
        Some(Violation::SystolicOutOfRange)
    } else if !in_range(diastolic, DIASTOLIC_RANGE) {
        Some(Violation::DiastolicOutOfRange)
    } else if systolic <= diastolic {
        Some(Violation::SystolicNotGreater)
    } else {
        match pulse {
            None => Some(Violation::PulseAbsent),
            Some(p) if !in_range(p, PULSE_RANGE) => Some(Violation::PulseOutOfRange),
            Some(_) => None,
        }
    }
}

impl BpReading {
    fn new(values: &[u32], patterns: Vec<Vec<SegmentPattern>>, region: LcdRegion) -> Self {
        let pulse = values.get(2).copied();
        let violation = validate(values[0], values[1], pulse);
        Self {
            systolic: values[0],
            diastolic: values[1],
            pulse: pulse.unwrap_or(0),
            valid: violation.is_none(),
            violation,
            digit_patterns: patterns,
            region: Some(region),
        }
    }
}

/// Groups consecutive indices whose count is non-zero into inclusive runs.
fn runs(counts: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &c) in counts.iter().enumerate() {
        match (c > 0, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, counts.len() - 1));
    }
    out
}

/// Shrinks a detector box to the panel: outer rows and columns that are
/// mostly dark belong to the background.
fn trim_to_panel(img: &GrayImage, t: u8) -> (usize, usize, usize, usize) {
    let (w, h) = (img.width(), img.height());
    let bright_row = |y: usize| (0..w).filter(|&x| img.get(x, y) > t).count() * 2 >= w;
    let bright_col = |x: usize, y0: usize, y1: usize| {
        (y0..y1).filter(|&y| img.get(x, y) > t).count() * 2 >= y1 - y0
    };
    let mut y0 = 0;
    while y0 < h && !bright_row(y0) {
        y0 += 1;
    }
    let mut y1 = h;
    while y1 > y0 && !bright_row(y1 - 1) {
        y1 -= 1;
    }
    let mut x0 = 0;
    while x0 < w && !bright_col(x0, y0, y1) {
        x0 += 1;
    }
    let mut x1 = w;
    while x1 > x0 && !bright_col(x1 - 1, y0, y1) {
        x1 -= 1;
    }
    (x0, y0, x1, y1)
}

/// Two-step transcription with `detector` doing the localization.
pub fn transcribe_bp(img: &GrayImage, detector: &dyn LcdDetector) -> Result<BpReading, BpError> {
    let clean = img.median3();
    let region = detector.locate(&clean)?;
    let lcd = clean.crop(region.x, region.y, region.w, region.h);
    let t = otsu_threshold(&lcd).ok_or(BpError::RowSplitFailure { found: 0 })?;
    let (x0, y0, x1, y1) = trim_to_panel(&lcd, t);
    if x1 <= x0 || y1 <= y0 {
        return Err(BpError::NoLcdFound);
    }
    let panel = lcd.crop(x0, y0, x1 - x0, y1 - y0);
    let (pw, ph) = (panel.width(), panel.height());
    let ink = |x: usize, y: usize| panel.get(x, y) <= t;

    let row_counts: Vec<usize> = (0..ph).map(|y| (0..pw).filter(|&x| ink(x, y)).count()).collect();
    let mut rows = runs(&row_counts);
    let tallest = rows.iter().map(|(a, b)| b - a + 1).max().unwrap_or(0);
    rows.retain(|(a, b)| (b - a + 1) as f64 >= MIN_ROW_FRAC * tallest as f64);
    if rows.len() != 2 && rows.len() != 3 {
        return Err(BpError::RowSplitFailure { found: rows.len() });
    }

    let mut values = Vec::with_capacity(rows.len());
    let mut patterns = Vec::with_capacity(rows.len());
    for (ri, &(r0, r1)) in rows.iter().enumerate() {
        let h = r1 - r0 + 1;
        let col_counts: Vec<usize> = (0..pw)
            .map(|x| (r0..=r1).filter(|&y| ink(x, y)).count())
            .collect();
        let min_ink = MIN_BLOB_INK * (h * h) as f64;
        let blobs: Vec<(usize, usize)> = runs(&col_counts)
            .into_iter()
            .filter(|&(a, b)| col_counts[a..=b].iter().sum::<usize>() as f64 >= min_ink)
            .collect();
        if blobs.is_empty() {
            return Err(BpError::RowSplitFailure { found: rows.len() });
        }
        let digit_w = (DIGIT_ASPECT * h as f64).round() as usize;
        let mut value: u32 = 0;
        let mut row_patterns = Vec::with_capacity(blobs.len());
        for (ci, &(c0, c1)) in blobs.iter().enumerate() {
            let c0 = if ((c1 - c0 + 1) as f64) < NARROW_BLOB_FRAC * digit_w as f64 {
                (c1 + 1).saturating_sub(digit_w)
            } else {
                c0
            };
            let cell = panel.crop(c0, r0, c1 - c0 + 1, h);
            let pattern = read_pattern(&cell);
            let d = pattern.digit().ok_or(BpError::UndecodablePattern {
                row: ri,
                cell: ci,
                pattern,
            })?;
            value = value.saturating_mul(10).saturating_add(u32::from(d));
            row_patterns.push(pattern);
        }
        values.push(value);
        patterns.push(row_patterns);
    }
    Ok(BpReading::new(&values, patterns, region))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::salt_and_pepper;

    fn read(sys: i64, dia: i64, pulse: i64) -> BpReading {
        transcribe_bp(&render_lcd(sys, dia, pulse, 320, 240).unwrap(), &OtsuDetector).unwrap()
    }

    #[test]
    fn transcribes_typical_reading() {
        let r = read(104, 65, 72);
        assert_eq!((r.systolic, r.diastolic, r.pulse, r.valid), (104, 65, 72, true));
        assert_eq!(r.violation, None);
    }

    #[test]
    fn inverted_reading_is_invalid() {
        let r = read(65, 104, 72);
        assert_eq!((r.systolic, r.diastolic, r.pulse), (65, 104, 72));
        assert!(!r.valid);
        assert_eq!(r.violation, Some(Violation::SystolicNotGreater));
    }

    #[test]
    fn all_eights() {
        let r = read(888, 88, 88);
        assert_eq!((r.systolic, r.diastolic, r.pulse), (888, 88, 88));
        let eight = SegmentPattern::for_digit(8).unwrap();
        let flat: Vec<_> = r.digit_patterns.iter().flatten().collect();
        assert_eq!(flat.len(), 7);
        assert!(flat.iter().all(|p| **p == eight));
        assert_eq!(r.violation, Some(Violation::SystolicOutOfRange));
    }

    #[test]
    fn ones_and_zero_rows() {
        let r = read(111, 10, 1);
        assert_eq!((r.systolic, r.diastolic, r.pulse), (111, 10, 1));
        let r = read(0, 7, 100);
        assert_eq!((r.systolic, r.diastolic, r.pulse), (0, 7, 100));
    }

    #[test]
    fn two_row_display_has_no_pulse() {
        let img = render_lcd_rows(&[128, 84], 320, 240).unwrap();
        let r = transcribe_bp(&img, &OtsuDetector).unwrap();
        assert_eq!((r.systolic, r.diastolic, r.pulse), (128, 84, 0));
        assert_eq!(r.violation, Some(Violation::PulseAbsent));
    }

    #[test]
    fn one_row_is_a_split_failure() {
        let img = render_lcd_rows(&[128], 320, 240).unwrap();
        assert_eq!(
            transcribe_bp(&img, &OtsuDetector),
            Err(BpError::RowSplitFailure { found: 1 })
        );
    }

    #[test]
    fn black_image() {
        assert_eq!(
            transcribe_bp(&GrayImage::filled(320, 240, 0), &OtsuDetector),
            Err(BpError::NoLcdFound)
        );
    }

    #[test]
    fn salt_and_pepper_noise_is_tolerated() {
        let mut img = render_lcd(120, 80, 60, 320, 240).unwrap();
        salt_and_pepper(&mut img, 0.05, 9);
        let r = transcribe_bp(&img, &OtsuDetector).unwrap();
        assert_eq!((r.systolic, r.diastolic, r.pulse, r.valid), (120, 80, 60, true));
    }

    #[test]
    fn loose_detector_boxes_read_the_same() {
        let img = render_lcd(143, 92, 77, 320, 240).unwrap();
        let truth = locate_lcd(&img.median3()).unwrap();
        let base = transcribe_bp(&img, &OtsuDetector).unwrap();
        for (dx, dy, dw, dh) in [(-5i64, -5i64, 10i64, 10i64), (5, 5, -10, -10), (-3, 4, 8, -2), (5, -5, 0, 10)] {
            let r = LcdRegion {
                x: (truth.x as i64 + dx) as usize,
                y: (truth.y as i64 + dy) as usize,
                w: (truth.w as i64 + dw) as usize,
                h: (truth.h as i64 + dh) as usize,
            };
            let got = transcribe_bp(&img, &FixedDetector(r)).unwrap();
            assert_eq!(
                (got.systolic, got.diastolic, got.pulse, got.violation),
                (base.systolic, base.diastolic, base.pulse, base.violation),
                "{r:?}"
            );
        }
    }

    #[test]
    fn validation_order() {
        assert_eq!(validate(59, 40, Some(70)), Some(Violation::SystolicOutOfRange));
        assert_eq!(validate(120, 29, Some(70)), Some(Violation::DiastolicOutOfRange));
        assert_eq!(validate(80, 80, Some(70)), Some(Violation::SystolicNotGreater));
        assert_eq!(validate(120, 80, None), Some(Violation::PulseAbsent));
        assert_eq!(validate(120, 80, Some(221)), Some(Violation::PulseOutOfRange));
        assert_eq!(validate(260, 160, Some(30)), None);
    }

    #[test]
    fn reading_json_shape() {
        let json = serde_json::to_string(&read(104, 65, 72)).unwrap();
        assert_eq!(json, r#"{"systolic":104,"diastolic":65,"pulse":72,"valid":true}"#);
        let json = serde_json::to_string(&read(65, 104, 72)).unwrap();
        assert!(json.ends_with(r#""valid":false,"reason":"systolic_not_greater"}"#));
    }
}
