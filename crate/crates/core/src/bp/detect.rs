use super::image::{components, otsu_threshold, GrayImage};
use super::{BpError, LcdRegion};

/// Registry name of [`OtsuDetector`].
pub const OTSU_DETECTOR_NAME: &str = "otsu-cc-v1";

pub const MIN_REGION_SIDE: usize = 30;
pub const MIN_ASPECT: f64 = 1.0;
pub const MAX_ASPECT: f64 = 3.0;
pub const MIN_IMAGE_SIDE: usize = 64;

/// LCD localization step. Implementations must be usable from several
/// threads once built.
pub trait LcdDetector: Send + Sync {
    fn name(&self) -> &str;
    fn locate(&self, img: &GrayImage) -> Result<LcdRegion, BpError>;
}

/// Classical detector: Otsu binarization, then the largest bright
/// 4-connected component whose box passes the size and aspect gates.
#[derive(Debug, Clone, Copy, Default)]
pub struct OtsuDetector;

impl LcdDetector for OtsuDetector {
    fn name(&self) -> &str {
        OTSU_DETECTOR_NAME
    }

    fn locate(&self, img: &GrayImage) -> Result<LcdRegion, BpError> {
        locate_lcd(img)
    }
}

/// Detector returning a fixed box, for callers that already know where the
/// display is.
#[derive(Debug, Clone, Copy)]
pub struct FixedDetector(pub LcdRegion);

impl LcdDetector for FixedDetector {
    fn name(&self) -> &str {
        "fixed"
    }

    fn locate(&self, img: &GrayImage) -> Result<LcdRegion, BpError> {
        let r = self.0;
        if r.x + r.w > img.width() || r.y + r.h > img.height() {
            return Err(BpError::NoLcdFound);
        }
        Ok(r)
    }
}

pub fn locate_lcd(img: &GrayImage) -> Result<LcdRegion, BpError> {
    let (w, h) = (img.width(), img.height());
    if w < MIN_IMAGE_SIDE || h < MIN_IMAGE_SIDE {
        return Err(BpError::ImageTooSmall {
            width: w,
            height: h,
        });
    }
    let mask: Vec<bool> = match otsu_threshold(img) {
        Some(t) => img.pixels().iter().map(|&p| p > t).collect(),
        // single gray level: all bright or nothing
        None => vec![img.pixels()[0] >= 128; w * h],
    };
    components(&mask, w, h)
        .into_iter()
        .filter(|c| {
            let aspect = c.width() as f64 / c.height() as f64;
            c.width() >= MIN_REGION_SIDE
                && c.height() >= MIN_REGION_SIDE
                && (MIN_ASPECT..=MAX_ASPECT).contains(&aspect)
        })
        .max_by_key(|c| (c.pixels, std::cmp::Reverse((c.y0, c.x0))))
        .map(|c| LcdRegion {
            x: c.x0,
            y: c.y0,
            w: c.width(),
            h: c.height(),
        })
        .ok_or(BpError::NoLcdFound)
}
