//! Frame delivery pipeline: scale, optionally stamp the capture time, encode.
//!
//! Every function here is pure. The order inside [`render`] is fixed so the
//! timestamp font size is measured in output pixels.

mod encode;
mod overlay;
mod scale;
mod settings;

use chrono::{DateTime, Utc};

use crate::frame::Frame;

pub use encode::{encode, luma, quantize, EncodedImage, JPEG_QUALITY, MAX_PALETTE};
pub use overlay::{band_size, overlay_timestamp, timestamp_text, BAND_MARGIN, GLYPH_HEIGHT, GLYPH_WIDTH};
pub use scale::{scale, scaled_dimensions};
pub use settings::{
    approximate_image_size, Encoding, FontSize, RenderSettings, SettingsError, TargetSize,
    MAX_DIMENSION, MIN_DIMENSION,
};

/// Intermediate raster of [`render`], before encoding.
pub fn compose(frame: &Frame, settings: &RenderSettings, time: DateTime<Utc>) -> Frame {
    let scaled = scale(frame, settings);
    if settings.show_time {
        overlay_timestamp(&scaled, time, settings.font_size)
    } else {
        scaled
    }
}

pub fn render(frame: &Frame, settings: &RenderSettings, time: DateTime<Utc>) -> EncodedImage {
    encode(&compose(frame, settings, time), settings.encoding)
}
