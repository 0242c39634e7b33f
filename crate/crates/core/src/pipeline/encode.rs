use std::collections::HashMap;

use image::codecs::jpeg::JpegEncoder;
use image::ExtendedColorType;

use crate::frame::Frame;

use super::settings::Encoding;

pub const JPEG_QUALITY: u8 = 75;
pub const MAX_PALETTE: usize = 256;

/// Bytes ready to send, with the dimensions actually produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedImage {
    pub bytes: Vec<u8>,
    pub encoding: Encoding,
    pub width: u32,
    pub height: u32,
}

impl EncodedImage {
    pub fn media_type(&self) -> &'static str {
        self.encoding.media_type()
    }
}

pub fn encode(frame: &Frame, encoding: Encoding) -> EncodedImage {
    let bytes = match encoding {
        Encoding::Jpeg => encode_jpeg(frame),
        Encoding::Png24 => write_png(frame, png::ColorType::Rgb, None, frame.pixels()),
        Encoding::PngGray => write_png(frame, png::ColorType::Grayscale, None, &grayscale(frame)),
        Encoding::Png8 => {
            let (palette, indices) = quantize(frame.pixels());
            let flat: Vec<u8> = palette.iter().flatten().copied().collect();
            write_png(frame, png::ColorType::Indexed, Some(flat), &indices)
        }
    };
    EncodedImage {
        bytes,
        encoding,
        width: frame.width(),
        height: frame.height(),
    }
}

/// Rec.601 luma, rounded half up: `round(0.299 R + 0.587 G + 0.114 B)`.
/// Integer arithmetic keeps exact halves exact.
pub fn luma(rgb: [u8; 3]) -> u8 {
    let weighted = 299 * rgb[0] as u32 + 587 * rgb[1] as u32 + 114 * rgb[2] as u32;
    ((weighted + 500) / 1000) as u8
}

fn grayscale(frame: &Frame) -> Vec<u8> {
    frame
        .pixels()
        .chunks_exact(3)
        .map(|p| luma([p[0], p[1], p[2]]))
        .collect()
}

fn encode_jpeg(frame: &Frame) -> Vec<u8> {
    let mut out = Vec::new();
    JpegEncoder::new_with_quality(&mut out, JPEG_QUALITY)
        .encode(
            frame.pixels(),
            frame.width(),
            frame.height(),
            ExtendedColorType::Rgb8,
        )
        .expect("in-memory JPEG encoding of a valid RGB frame");
    out
}

fn write_png(frame: &Frame, color: png::ColorType, palette: Option<Vec<u8>>, data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, frame.width(), frame.height());
        encoder.set_color(color);
        encoder.set_depth(png::BitDepth::Eight);
        if let Some(palette) = palette {
            encoder.set_palette(palette);
        }
        let mut writer = encoder
            .write_header()
            .expect("in-memory PNG header for a valid frame");
        writer
            .write_image_data(data)
            .expect("in-memory PNG data sized to the frame");
    }
    out
}

/// Reduces RGB pixels to at most 256 colours.
///
/// Sources with 256 or fewer distinct colours keep them all (sorted, so the
/// palette is deterministic). Larger sources go through median cut: the box
/// with the widest channel range is split at its pixel-weighted median until
/// 256 boxes exist, and each box is represented by its weighted mean.
pub fn quantize(pixels: &[u8]) -> (Vec<[u8; 3]>, Vec<u8>) {
    let mut histogram: HashMap<[u8; 3], u64> = HashMap::new();
    for p in pixels.chunks_exact(3) {
        *histogram.entry([p[0], p[1], p[2]]).or_default() += 1;
    }
    let mut colors: Vec<([u8; 3], u64)> = histogram.into_iter().collect();
    colors.sort_unstable();

    let (palette, lookup): (Vec<[u8; 3]>, HashMap<[u8; 3], u8>) = if colors.len() <= MAX_PALETTE {
        let palette: Vec<[u8; 3]> = colors.iter().map(|&(c, _)| c).collect();
        let lookup = palette
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i as u8))
            .collect();
        (palette, lookup)
    } else {
        median_cut(colors)
    };

    let indices = pixels
        .chunks_exact(3)
        .map(|p| lookup[&[p[0], p[1], p[2]]])
        .collect();
    (palette, indices)
}

struct ColorBox {
    colors: Vec<([u8; 3], u64)>,
    /// `(range, channel)` of the widest channel.
    widest: (u8, usize),
}

impl ColorBox {
    fn new(colors: Vec<([u8; 3], u64)>) -> Self {
        let widest = (0..3)
            .map(|ch| {
                let (lo, hi) = colors
                    .iter()
                    .fold((u8::MAX, u8::MIN), |(lo, hi), (c, _)| (lo.min(c[ch]), hi.max(c[ch])));
                (hi - lo, ch)
            })
            .max_by_key(|&(range, ch)| (range, std::cmp::Reverse(ch)))
            .expect("three channels");
        Self { colors, widest }
    }

    fn split(mut self) -> (ColorBox, ColorBox) {
        let (_, ch) = self.widest;
        self.colors.sort_unstable_by_key(|&(c, _)| (c[ch], c));
        let total: u64 = self.colors.iter().map(|&(_, n)| n).sum();
        let mut acc = 0;
        let mut cut = self.colors.len() - 1;
        for (i, &(_, n)) in self.colors.iter().enumerate() {
            acc += n;
            if acc * 2 >= total {
                cut = i + 1;
                break;
            }
        }
        // both halves must be non-empty
        let cut = cut.clamp(1, self.colors.len() - 1);
        let upper = self.colors.split_off(cut);
        (ColorBox::new(self.colors), ColorBox::new(upper))
    }

    fn mean(&self) -> [u8; 3] {
        let total: u64 = self.colors.iter().map(|&(_, n)| n).sum();
        let mut out = [0u8; 3];
        for (ch, slot) in out.iter_mut().enumerate() {
            let sum: u64 = self.colors.iter().map(|&(c, n)| c[ch] as u64 * n).sum();
            *slot = ((sum + total / 2) / total) as u8;
        }
        out
    }
}

fn median_cut(colors: Vec<([u8; 3], u64)>) -> (Vec<[u8; 3]>, HashMap<[u8; 3], u8>) {
    let mut boxes = vec![ColorBox::new(colors)];
    while boxes.len() < MAX_PALETTE {
        let candidate = boxes
            .iter()
            .enumerate()
            .filter(|(_, b)| b.colors.len() > 1)
            .max_by_key(|(i, b)| (b.widest.0, std::cmp::Reverse(*i)))
            .map(|(i, _)| i);
        let Some(i) = candidate else { break };
        let (a, b) = boxes.swap_remove(i).split();
        boxes.push(a);
        boxes.push(b);
    }

    let mut palette = Vec::with_capacity(boxes.len());
    let mut lookup = HashMap::new();
    for (index, b) in boxes.iter().enumerate() {
        palette.push(b.mean());
        for &(c, _) in &b.colors {
            lookup.insert(c, index as u8);
        }
    }
    (palette, lookup)
}
