//! Timestamp overlay: `YYYY-MM-DD HH:MM:SS` in a 5x7 bitmap font, white on
//! an opaque black band in the bottom-left corner.

use chrono::{DateTime, Utc};

use crate::frame::Frame;

use super::settings::FontSize;

pub const GLYPH_WIDTH: u32 = 5;
pub const GLYPH_HEIGHT: u32 = 7;
/// Padding between the band edge and the text, in output pixels.
pub const BAND_MARGIN: u32 = 2;

const WHITE: [u8; 3] = [255, 255, 255];
const BLACK: [u8; 3] = [0, 0, 0];

/// Rows of a glyph, top to bottom; bit 4 is the leftmost column.
fn glyph(c: char) -> [u8; 7] {
    match c {
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
        '3' => [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        '-' => [0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00],
        ':' => [0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00],
        _ => [0; 7],
    }
}

pub fn timestamp_text(time: DateTime<Utc>) -> String {
    time.format("%Y-%m-%d %H:%M:%S").to_string()
}

/// `(width, height)` of the band for `glyphs` characters before clipping.
pub fn band_size(glyphs: u32, font_size: FontSize) -> (u32, u32) {
    let s = font_size.scale();
    let advance = (GLYPH_WIDTH + 1) * s;
    let text_w = if glyphs == 0 { 0 } else { glyphs * advance - s };
    (text_w + 2 * BAND_MARGIN, GLYPH_HEIGHT * s + 2 * BAND_MARGIN)
}

/// Draws the timestamp band. Anything past the frame edges is clipped.
pub fn overlay_timestamp(frame: &Frame, time: DateTime<Utc>, font_size: FontSize) -> Frame {
    let text = timestamp_text(time);
    let (fw, fh) = (frame.width() as i64, frame.height() as i64);
    let s = font_size.scale() as i64;
    let (band_w, band_h) = band_size(text.chars().count() as u32, font_size);
    let band_top = fh - band_h as i64;

    let mut pixels = frame.pixels().to_vec();
    let mut put = |x: i64, y: i64, rgb: [u8; 3]| {
        if (0..fw).contains(&x) && (0..fh).contains(&y) {
            let i = ((y * fw + x) * 3) as usize;
            pixels[i..i + 3].copy_from_slice(&rgb);
        }
    };

    for y in band_top.max(0)..fh {
        for x in 0..(band_w as i64).min(fw) {
            put(x, y, BLACK);
        }
    }

    let text_top = band_top + BAND_MARGIN as i64;
    let advance = (GLYPH_WIDTH as i64 + 1) * s;
    for (i, c) in text.chars().enumerate() {
        let left = BAND_MARGIN as i64 + i as i64 * advance;
        if left >= fw {
            break;
        }
        for (row, bits) in glyph(c).iter().enumerate() {
            for col in 0..GLYPH_WIDTH as i64 {
                if bits & (0x10 >> col) == 0 {
                    continue;
                }
                let x0 = left + col * s;
                let y0 = text_top + row as i64 * s;
                for dy in 0..s {
                    for dx in 0..s {
                        put(x0 + dx, y0 + dy, WHITE);
                    }
                }
            }
        }
    }

    frame.with_raster(frame.width(), frame.height(), pixels)
}
