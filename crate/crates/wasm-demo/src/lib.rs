//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export has a plain Rust twin returning `Result<_, String>` so the
//! logic can be tested natively.

use chrono::DateTime;
use gvss_core::{
    approximate_image_size, debounce_trace, render, synthetic_frame, BeamStatus, Encoding, FontSize,
    RenderSettings, TargetSize,
};
use wasm_bindgen::prelude::*;

/// Largest synthetic source the demo will build.
pub const MAX_SOURCE: u32 = 2048;

#[wasm_bindgen]
pub struct Rendered {
    bytes: Vec<u8>,
    width: u32,
    height: u32,
    media_type: &'static str,
    estimate: u64,
}

#[wasm_bindgen]
impl Rendered {
    #[wasm_bindgen(getter)]
    pub fn bytes(&self) -> Vec<u8> {
        self.bytes.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> u32 {
        self.height
    }

    #[wasm_bindgen(getter, js_name = mediaType)]
    pub fn media_type(&self) -> String {
        self.media_type.to_string()
    }

    /// Size the server would advertise for these settings.
    #[wasm_bindgen(getter, js_name = estimatedSize)]
    pub fn estimated_size(&self) -> f64 {
        self.estimate as f64
    }
}

#[derive(Debug, Clone)]
pub struct RenderRequest<'a> {
    pub source_width: u32,
    pub source_height: u32,
    pub sequence: u64,
    pub target_width: u32,
    pub target_height: u32,
    pub constrain: bool,
    pub encoding: &'a str,
    pub show_time: bool,
    pub font: u32,
    pub unix_ms: i64,
}

/// Renders one synthetic camera frame with the given delivery settings.
pub fn render_synthetic(req: &RenderRequest) -> Result<Rendered, String> {
    if !(1..=MAX_SOURCE).contains(&req.source_width) || !(1..=MAX_SOURCE).contains(&req.source_height) {
        return Err(format!("source size must be 1..={MAX_SOURCE} on each side"));
    }
    let target = TargetSize::new(req.target_width, req.target_height).map_err(|e| e.to_string())?;
    let encoding: Encoding = req.encoding.parse().map_err(|e: gvss_core::SettingsError| e.to_string())?;
    let font = FontSize::from_scale(req.font).ok_or_else(|| format!("font must be 1, 2 or 3, got {}", req.font))?;
    let time = DateTime::from_timestamp_millis(req.unix_ms).ok_or("timestamp out of range")?;
    let settings = RenderSettings::new(target)
        .with_constrain(req.constrain)
        .with_encoding(encoding)
        .with_time(req.show_time, font);
    let frame = synthetic_frame(req.source_width, req.source_height, req.sequence).map_err(|e| e.to_string())?;
    let image = render(&frame, &settings, time);
    Ok(Rendered {
        width: image.width,
        height: image.height,
        media_type: image.media_type(),
        estimate: approximate_image_size(&settings),
        bytes: image.bytes,
    })
}

/// Parses `C`/`O`/`CLEAR`/`OBSTRUCTED` tokens separated by spaces or commas.
pub fn parse_readings(text: &str) -> Result<Vec<BeamStatus>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| match t {
            "C" | "c" => Ok(BeamStatus::Clear),
            "O" | "o" => Ok(BeamStatus::Obstructed),
            other => other.parse().map_err(|_| format!("unknown reading `{other}`")),
        })
        .collect()
}

/// Accepted transitions as `(reading index, status token)`.
pub fn debounce_text(required: u32, readings: &str) -> Result<Vec<(usize, &'static str)>, String> {
    let readings = parse_readings(readings)?;
    let trace = debounce_trace(required, &readings).map_err(|e| e.to_string())?;
    Ok(trace.into_iter().map(|(i, s)| (i, s.token())).collect())
}

pub fn estimate(width: u32, height: u32, encoding: &str) -> Result<u64, String> {
    let target = TargetSize::new(width, height).map_err(|e| e.to_string())?;
    let encoding: Encoding = encoding.parse().map_err(|e: gvss_core::SettingsError| e.to_string())?;
    Ok(approximate_image_size(&RenderSettings::new(target).with_encoding(encoding)))
}

#[wasm_bindgen(js_name = renderFrame)]
#[allow(clippy::too_many_arguments)]
pub fn render_frame(
    source_width: u32,
    source_height: u32,
    sequence: u32,
    target_width: u32,
    target_height: u32,
    constrain: bool,
    encoding: &str,
    show_time: bool,
    font: u32,
    unix_ms: f64,
) -> Result<Rendered, JsError> {
    render_synthetic(&RenderRequest {
        source_width,
        source_height,
        sequence: sequence as u64,
        target_width,
        target_height,
        constrain,
        encoding,
        show_time,
        font,
        unix_ms: unix_ms as i64,
    })
    .map_err(|e| JsError::new(&e))
}

/// Flat `[index, status, index, status, ...]` where status is 0 for CLEAR
/// and 1 for OBSTRUCTED.
#[wasm_bindgen(js_name = debounceTrace)]
pub fn debounce_trace_js(required: u32, readings: &str) -> Result<Vec<u32>, JsError> {
    let trace = debounce_text(required, readings).map_err(|e| JsError::new(&e))?;
    Ok(trace
        .into_iter()
        .flat_map(|(i, s)| [i as u32, u32::from(s == "OBSTRUCTED")])
        .collect())
}

#[wasm_bindgen(js_name = estimateSize)]
pub fn estimate_size(width: u32, height: u32, encoding: &str) -> Result<f64, JsError> {
    estimate(width, height, encoding)
        .map(|n| n as f64)
        .map_err(|e| JsError::new(&e))
}
