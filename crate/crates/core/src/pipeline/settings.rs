use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MIN_DIMENSION: u32 = 8;
pub const MAX_DIMENSION: u32 = 4096;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SettingsError {
    #[error("target size {width}x{height} outside {MIN_DIMENSION}..={MAX_DIMENSION}")]
    TargetOutOfRange { width: u32, height: u32 },
    #[error("unknown encoding {0:?} (expected jpeg, png24, png8 or pnggray)")]
    UnknownEncoding(String),
    #[error("unknown font size {0:?} (expected 1, 2 or 3)")]
    UnknownFontSize(String),
}

/// Output formats offered to clients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Encoding {
    Jpeg,
    Png24,
    Png8,
    PngGray,
}

impl Encoding {
    pub const ALL: [Encoding; 4] = [
        Encoding::Jpeg,
        Encoding::Png24,
        Encoding::Png8,
        Encoding::PngGray,
    ];

    /// The query-string spelling.
    pub fn param(self) -> &'static str {
        match self {
            Encoding::Jpeg => "jpeg",
            Encoding::Png24 => "png24",
            Encoding::Png8 => "png8",
            Encoding::PngGray => "pnggray",
        }
    }

    pub fn media_type(self) -> &'static str {
        match self {
            Encoding::Jpeg => "image/jpeg",
            _ => "image/png",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Encoding::Jpeg => "jpg",
            _ => "png",
        }
    }

    /// `(bytes per pixel, assumed compression ratio)` for size estimates.
    fn size_model(self) -> (u64, u64) {
        match self {
            Encoding::Jpeg => (3, 12),
            Encoding::Png24 => (3, 2),
            Encoding::Png8 => (1, 2),
            Encoding::PngGray => (1, 2),
        }
    }
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.param())
    }
}

impl FromStr for Encoding {
    type Err = SettingsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Encoding::ALL
            .into_iter()
            .find(|e| e.param() == s)
            .ok_or_else(|| SettingsError::UnknownEncoding(s.to_string()))
    }
}

/// Overlay glyph scale factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FontSize {
    Small = 1,
    Medium = 2,
    Large = 3,
}

impl FontSize {
    pub fn scale(self) -> u32 {
        self as u32
    }

    pub fn from_scale(scale: u32) -> Option<Self> {
        match scale {
            1 => Some(FontSize::Small),
            2 => Some(FontSize::Medium),
            3 => Some(FontSize::Large),
            _ => None,
        }
    }
}

impl FromStr for FontSize {
    type Err = SettingsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse::<u32>()
            .ok()
            .and_then(FontSize::from_scale)
            .ok_or_else(|| SettingsError::UnknownFontSize(s.to_string()))
    }
}

/// Requested output size, guaranteed within `8..=4096` on both axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TargetSize {
    width: u32,
    height: u32,
}

impl TargetSize {
    pub fn new(width: u32, height: u32) -> Result<Self, SettingsError> {
        let range = MIN_DIMENSION..=MAX_DIMENSION;
        if range.contains(&width) && range.contains(&height) {
            Ok(Self { width, height })
        } else {
            Err(SettingsError::TargetOutOfRange { width, height })
        }
    }

    pub fn width(self) -> u32 {
        self.width
    }

    pub fn height(self) -> u32 {
        self.height
    }
}

/// A client's delivery preferences for one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RenderSettings {
    pub target: TargetSize,
    pub constrain: bool,
    pub encoding: Encoding,
    pub show_time: bool,
    pub font_size: FontSize,
}

impl RenderSettings {
    /// Constrained JPEG with a medium timestamp, the server's defaults.
    pub fn new(target: TargetSize) -> Self {
        Self {
            target,
            constrain: true,
            encoding: Encoding::Jpeg,
            show_time: true,
            font_size: FontSize::Medium,
        }
    }

    pub fn with_encoding(mut self, encoding: Encoding) -> Self {
        self.encoding = encoding;
        self
    }

    pub fn with_constrain(mut self, constrain: bool) -> Self {
        self.constrain = constrain;
        self
    }

    pub fn with_time(mut self, show_time: bool, font_size: FontSize) -> Self {
        self.show_time = show_time;
        self.font_size = font_size;
        self
    }
}

/// Rough encoded size in bytes for a frame of the target size, used by
/// clients to pre-size receive buffers. An estimate, not a bound.
pub fn approximate_image_size(settings: &RenderSettings) -> u64 {
    let (bytes_per_pixel, ratio) = settings.encoding.size_model();
    let raw = settings.target.width() as u64 * settings.target.height() as u64 * bytes_per_pixel;
    raw.div_ceil(ratio)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(w: u32, h: u32, enc: Encoding) -> RenderSettings {
        RenderSettings::new(TargetSize::new(w, h).unwrap()).with_encoding(enc)
    }

    #[test]
    fn size_table_examples() {
        assert_eq!(approximate_image_size(&settings(160, 120, Encoding::Jpeg)), 4800);
        assert_eq!(approximate_image_size(&settings(160, 120, Encoding::Png24)), 28800);
        assert_eq!(approximate_image_size(&settings(8, 8, Encoding::PngGray)), 32);
        // 9*9*3/12 = 20.25 rounds up
        assert_eq!(approximate_image_size(&settings(9, 9, Encoding::Jpeg)), 21);
    }

    #[test]
    fn target_bounds() {
        assert!(TargetSize::new(8, 8).is_ok());
        assert!(TargetSize::new(4096, 4096).is_ok());
        assert!(TargetSize::new(7, 8).is_err());
        assert!(TargetSize::new(8, 4097).is_err());
    }

    #[test]
    fn parses_query_spellings() {
        for e in Encoding::ALL {
            assert_eq!(e.param().parse::<Encoding>().unwrap(), e);
        }
        assert!("PNG24".parse::<Encoding>().is_err());
        assert_eq!("3".parse::<FontSize>().unwrap(), FontSize::Large);
        assert!("0".parse::<FontSize>().is_err());
        assert!("big".parse::<FontSize>().is_err());
    }
}
