//! Seven-segment glyph geometry shared by the renderer and the decoder.
//!
//! Segments are named the usual way: `a` top, `b` upper right, `c` lower
//! right, `d` bottom, `e` lower left, `f` upper left, `g` middle. All
//! coordinates are fractions of the digit cell, whose box is exactly the
//! glyph's ink extent for every digit except `1` (see [`DIGIT_ASPECT`]).

use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use super::image::GrayImage;

/// Cell width over cell height.
pub const DIGIT_ASPECT: f64 = 0.6;
/// Probe patch side as a fraction of cell height (11 px on a 100 px cell).
pub const PROBE_FRAC: f64 = 0.11;
/// On/off threshold as a fraction of the cell's dynamic range.
pub const ON_THRESHOLD: f64 = 0.5;

pub const SEGMENT_NAMES: [char; 7] = ['a', 'b', 'c', 'd', 'e', 'f', 'g'];

/// Probe centers `(x, y)` for segments a..g.
pub const PROBES: [(f64, f64); 7] = [
    (0.5, 0.1),
    (0.85, 0.3),
    (0.85, 0.7),
    (0.5, 0.9),
    (0.15, 0.7),
    (0.15, 0.3),
    (0.5, 0.5),
];

/// Rendered bar rectangles `(x0, x1, y0, y1)` for segments a..g. Each bar is
/// centered on its probe.
pub const BARS: [(f64, f64, f64, f64); 7] = [
    (0.0, 1.0, 0.0, 0.2),
    (0.7, 1.0, 0.0, 0.5),
    (0.7, 1.0, 0.5, 1.0),
    (0.0, 1.0, 0.8, 1.0),
    (0.0, 0.3, 0.5, 1.0),
    (0.0, 0.3, 0.0, 0.5),
    (0.0, 1.0, 0.4, 0.6),
];

/// Set of lit segments, bit `i` for segment `SEGMENT_NAMES[i]`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SegmentPattern(u8);

const fn pat(s: &str) -> SegmentPattern {
    let b = s.as_bytes();
    let mut bits = 0u8;
    let mut i = 0;
    while i < b.len() {
        bits |= 1 << (b[i] - b'a');
        i += 1;
    }
    SegmentPattern(bits)
}

/// Canonical pattern for each digit 0-9.
pub const DIGIT_PATTERNS: [SegmentPattern; 10] = [
    pat("abcdef"),
    pat("bc"),
    pat("abged"),
    pat("abgcd"),
    pat("fgbc"),
    pat("afgcd"),
    pat("afgedc"),
    pat("abc"),
    pat("abcdefg"),
    pat("abcfgd"),
];

impl SegmentPattern {
    pub const EMPTY: SegmentPattern = SegmentPattern(0);

    /// Parses segment letters, e.g. `"bc"`. Unknown letters are rejected.
    pub fn parse(s: &str) -> Option<Self> {
        let mut bits = 0u8;
        for ch in s.chars() {
            let i = SEGMENT_NAMES.iter().position(|&n| n == ch)?;
            bits |= 1 << i;
        }
        Some(SegmentPattern(bits))
    }

    pub fn for_digit(d: u8) -> Option<Self> {
        DIGIT_PATTERNS.get(d as usize).copied()
    }

    pub fn digit(self) -> Option<u8> {
        DIGIT_PATTERNS.iter().position(|&p| p == self).map(|d| d as u8)
    }

    pub fn is_on(self, segment: usize) -> bool {
        self.0 & (1 << segment) != 0
    }

    pub fn with(self, segment: usize) -> Self {
        SegmentPattern(self.0 | (1 << segment))
    }

    pub fn bits(self) -> u8 {
        self.0
    }
}

impl fmt::Display for SegmentPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == 0 {
            return f.write_str("-");
        }
        for (i, n) in SEGMENT_NAMES.iter().enumerate() {
            if self.is_on(i) {
                write!(f, "{n}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for SegmentPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SegmentPattern({self})")
    }
}

impl Serialize for SegmentPattern {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("segment pattern {0} is not a digit")]
pub struct UndecodablePattern(pub SegmentPattern);

fn patch_mean(cell: &GrayImage, cx: f64, cy: f64, side: usize) -> f64 {
    let (w, h) = (cell.width(), cell.height());
    let half = side as f64 / 2.0;
    let x0 = (cx * w as f64 - half).round().max(0.0) as usize;
    let y0 = (cy * h as f64 - half).round().max(0.0) as usize;
    let x1 = (x0 + side).min(w);
    let y1 = (y0 + side).min(h);
    let mut sum = 0u64;
    let mut n = 0u64;
    for y in y0..y1 {
        for x in x0..x1 {
            sum += u64::from(cell.get(x, y));
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum as f64 / n as f64
    }
}

/// Samples the seven probe patches of a digit cell.
pub fn read_pattern(cell: &GrayImage) -> SegmentPattern {
    if cell.width() == 0 || cell.height() == 0 {
        return SegmentPattern::EMPTY;
    }
    let (lo, hi) = cell.min_max();
    let range = f64::from(hi) - f64::from(lo);
    if range == 0.0 {
        return SegmentPattern::EMPTY;
    }
    // background: mean of the pixels on the bright side of mid-range
    let mid = (f64::from(lo) + f64::from(hi)) / 2.0;
    let (mut sum, mut n) = (0.0, 0usize);
    for &p in cell.pixels() {
        if f64::from(p) > mid {
            sum += f64::from(p);
            n += 1;
        }
    }
    let background = sum / n as f64;
    let side = ((PROBE_FRAC * cell.height() as f64).round() as usize).max(1);
    let mut pattern = SegmentPattern::EMPTY;
    for (i, &(px, py)) in PROBES.iter().enumerate() {
        if (patch_mean(cell, px, py, side) - background).abs() > ON_THRESHOLD * range {
            pattern = pattern.with(i);
        }
    }
    pattern
}

pub fn decode_digit(cell: &GrayImage) -> Result<u8, UndecodablePattern> {
    let p = read_pattern(cell);
    p.digit().ok_or(UndecodablePattern(p))
}

/// Draws `pattern` into the `w x h` cell at `(x, y)` with intensity `ink`.
pub fn draw_pattern(
    img: &mut GrayImage,
    pattern: SegmentPattern,
    x: usize,
    y: usize,
    w: usize,
    h: usize,
    ink: u8,
) {
    // a pixel is covered when its center falls inside the bar
    let span = |lo: f64, hi: f64, n: usize| {
        let a = (lo * n as f64 - 0.5).ceil().max(0.0) as usize;
        let b = ((hi * n as f64 - 0.5).ceil().max(0.0) as usize).min(n);
        (a, b)
    };
    for (i, &(x0, x1, y0, y1)) in BARS.iter().enumerate() {
        if pattern.is_on(i) {
            let (ax, bx) = span(x0, x1, w);
            let (ay, by) = span(y0, y1, h);
            img.fill_rect(x + ax, y + ay, x + bx, y + by, ink);
        }
    }
}
