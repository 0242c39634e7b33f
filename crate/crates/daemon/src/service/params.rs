//! Query-string parsing for `/frame` and `POST /snapshots`.

use std::collections::HashMap;

use gvss_core::{Encoding, FontSize, RenderSettings, TargetSize};

use crate::camera::{CameraDescriptor, ResolutionMode};

/// Builds render settings from `w`, `h`, `res`, `constrain`, `enc`, `time`
/// and `font`. Missing values fall back to the camera's normal resolution,
/// constrain on, JPEG, timestamp on, medium font.
pub fn render_settings(
    params: &HashMap<String, String>,
    camera: &CameraDescriptor,
) -> Result<RenderSettings, String> {
    let mode = match params.get("res") {
        Some(r) => r.parse::<ResolutionMode>()?,
        None => ResolutionMode::Normal,
    };
    let (default_w, default_h) = camera.resolution(mode);
    let dim = |key: &str, default: u32| -> Result<u32, String> {
        match params.get(key) {
            Some(v) => v.parse().map_err(|_| format!("`{key}` must be a positive integer, got `{v}`")),
            None => Ok(default),
        }
    };
    let target = TargetSize::new(dim("w", default_w)?, dim("h", default_h)?).map_err(|e| e.to_string())?;

    let mut settings = RenderSettings::new(target);
    if let Some(v) = params.get("constrain") {
        settings.constrain = flag("constrain", v)?;
    }
    if let Some(v) = params.get("enc") {
        settings.encoding = v.parse::<Encoding>().map_err(|e| e.to_string())?;
    }
    if let Some(v) = params.get("time") {
        settings.show_time = flag("time", v)?;
    }
    if let Some(v) = params.get("font") {
        settings.font_size = v.parse::<FontSize>().map_err(|e| e.to_string())?;
    }
    Ok(settings)
}

fn flag(key: &str, value: &str) -> Result<bool, String> {
    match value {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        other => Err(format!("`{key}` must be true or false, got `{other}`")),
    }
}
