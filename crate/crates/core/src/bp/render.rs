//! Synthetic BP monitor photos: a bright LCD panel on a dark background
//! with three right-aligned rows of seven-segment digits.

use super::digit::{draw_pattern, SegmentPattern, DIGIT_ASPECT};
use super::image::GrayImage;
use super::BpError;

pub const BACKGROUND: u8 = 20;
pub const PANEL: u8 = 230;
pub const INK: u8 = 40;

/// Panel inset from each image edge, as a fraction of that dimension.
pub const PANEL_MARGIN: f64 = 0.1;
pub const ROWS: usize = 3;
/// Digit height as a fraction of its row band.
pub const DIGIT_HEIGHT_FRAC: f64 = 0.6;
/// Gap between digits as a fraction of digit width.
pub const DIGIT_GAP_FRAC: f64 = 0.35;
/// Space right of the last digit as a fraction of panel width.
pub const RIGHT_MARGIN_FRAC: f64 = 0.12;
pub const MIN_IMAGE: usize = 64;

/// Pixel box of the LCD panel in a `width x height` render.
pub fn panel_box(width: usize, height: usize) -> (usize, usize, usize, usize) {
    let x0 = (PANEL_MARGIN * width as f64).round() as usize;
    let y0 = (PANEL_MARGIN * height as f64).round() as usize;
    (x0, y0, width - 2 * x0, height - 2 * y0)
}

fn digits_of(v: u32) -> Vec<u8> {
    v.to_string().bytes().map(|b| b - b'0').collect()
}

/// Renders systolic, diastolic and pulse rows.
pub fn render_lcd(
    systolic: i64,
    diastolic: i64,
    pulse: i64,
    width: usize,
    height: usize,
) -> Result<GrayImage, BpError> {
    render_lcd_rows(&[systolic, diastolic, pulse], width, height)
}

/// Renders one to three rows of values top-down; unused bands stay blank.
pub fn render_lcd_rows(values: &[i64], width: usize, height: usize) -> Result<GrayImage, BpError> {
    if width < MIN_IMAGE || height < MIN_IMAGE {
        return Err(BpError::ImageTooSmall { width, height });
    }
    if values.is_empty() || values.len() > ROWS {
        return Err(BpError::BadImage(format!("cannot render {} rows", values.len())));
    }
    let values = values
        .iter()
        .map(|&v| {
            u32::try_from(v)
                .ok()
                .filter(|&v| v <= 999)
                .ok_or(BpError::OutOfRangeValue(v))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut img = GrayImage::filled(width, height, BACKGROUND);
    let (px, py, pw, ph) = panel_box(width, height);
    img.fill_rect(px, py, px + pw, py + ph, PANEL);

    let band = ph as f64 / ROWS as f64;
    let dh = (DIGIT_HEIGHT_FRAC * band).round() as usize;
    let dw = (DIGIT_ASPECT * dh as f64).round() as usize;
    let gap = (DIGIT_GAP_FRAC * dw as f64).round() as usize;
    let right = px + pw - (RIGHT_MARGIN_FRAC * pw as f64).round() as usize;
    for (row, v) in values.iter().enumerate() {
        let top = py + (row as f64 * band + (band - dh as f64) / 2.0).round() as usize;
        // leading zeros suppressed: digits fill slots from the right
        for (slot, d) in digits_of(*v).iter().rev().enumerate() {
            let x = right - (slot + 1) * dw - slot * gap;
            let p = SegmentPattern::for_digit(*d).expect("decimal digit");
            draw_pattern(&mut img, p, x, top, dw, dh, INK);
        }
    }
    Ok(img)
}
