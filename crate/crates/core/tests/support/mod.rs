//! Minimal PNG reader used as a test oracle. Written from the PNG format
//! description (chunks, zlib, per-row filters) and shares no code with the
//! encoder under test. Handles 8-bit greyscale, truecolour and indexed only.

use std::io::Read;

use flate2::read::ZlibDecoder;

#[derive(Debug)]
pub enum Samples {
    Gray(Vec<u8>),
    Rgb(Vec<u8>),
    Indexed { palette: Vec<[u8; 3]>, indices: Vec<u8> },
}

#[derive(Debug)]
pub struct DecodedPng {
    pub width: u32,
    pub height: u32,
    pub samples: Samples,
}

impl DecodedPng {
    /// Expands every format to RGB triples.
    pub fn rgb(&self) -> Vec<u8> {
        match &self.samples {
            Samples::Rgb(v) => v.clone(),
            Samples::Gray(v) => v.iter().flat_map(|&g| [g, g, g]).collect(),
            Samples::Indexed { palette, indices } => {
                indices.iter().flat_map(|&i| palette[i as usize]).collect()
            }
        }
    }
}

fn be32(b: &[u8]) -> u32 {
    u32::from_be_bytes([b[0], b[1], b[2], b[3]])
}

pub fn decode_png(bytes: &[u8]) -> DecodedPng {
    assert_eq!(&bytes[..8], b"\x89PNG\r\n\x1a\n", "PNG signature");
    let mut pos = 8;
    let (mut width, mut height, mut color) = (0, 0, 0u8);
    let mut palette = Vec::new();
    let mut idat = Vec::new();
    while pos < bytes.len() {
        let len = be32(&bytes[pos..]) as usize;
        let kind = &bytes[pos + 4..pos + 8];
        let data = &bytes[pos + 8..pos + 8 + len];
        match kind {
            b"IHDR" => {
                width = be32(data);
                height = be32(&data[4..]);
                assert_eq!(data[8], 8, "bit depth");
                color = data[9];
                assert_eq!(data[12], 0, "interlace");
            }
            b"PLTE" => palette = data.chunks(3).map(|c| [c[0], c[1], c[2]]).collect(),
            b"IDAT" => idat.extend_from_slice(data),
            b"IEND" => break,
            _ => {}
        }
        pos += 12 + len;
    }
    let bpp = match color {
        0 | 3 => 1,
        2 => 3,
        other => panic!("unsupported colour type {other}"),
    };
    let mut raw = Vec::new();
    ZlibDecoder::new(&idat[..]).read_to_end(&mut raw).unwrap();
    let stride = width as usize * bpp;
    assert_eq!(raw.len(), (stride + 1) * height as usize);

    let mut out = vec![0u8; stride * height as usize];
    for y in 0..height as usize {
        let filter = raw[y * (stride + 1)];
        let line = &raw[y * (stride + 1) + 1..(y + 1) * (stride + 1)];
        for x in 0..stride {
            let a = if x >= bpp { out[y * stride + x - bpp] as i16 } else { 0 };
            let b = if y > 0 { out[(y - 1) * stride + x] as i16 } else { 0 };
            let c = if x >= bpp && y > 0 { out[(y - 1) * stride + x - bpp] as i16 } else { 0 };
            let predictor = match filter {
                0 => 0,
                1 => a,
                2 => b,
                3 => (a + b) / 2,
                4 => {
                    let p = a + b - c;
                    let (pa, pb, pc) = ((p - a).abs(), (p - b).abs(), (p - c).abs());
                    if pa <= pb && pa <= pc {
                        a
                    } else if pb <= pc {
                        b
                    } else {
                        c
                    }
                }
                f => panic!("bad filter {f}"),
            };
            out[y * stride + x] = line[x].wrapping_add(predictor as u8);
        }
    }
    let samples = match color {
        0 => Samples::Gray(out),
        2 => Samples::Rgb(out),
        _ => Samples::Indexed { palette, indices: out },
    };
    DecodedPng { width, height, samples }
}
