use crate::frame::Frame;

use super::settings::RenderSettings;

/// Output dimensions for a `src_w x src_h` source.
///
/// With `constrain` the source is multiplied by
/// `min(target_w / src_w, target_h / src_h)` and floored, so one axis lands
/// exactly on its target and the other is at most its target. Upscaling
/// follows the same rule. Without `constrain` the target is used verbatim.
pub fn scaled_dimensions(src_w: u32, src_h: u32, settings: &RenderSettings) -> (u32, u32) {
    let (tw, th) = (settings.target.width(), settings.target.height());
    if !settings.constrain {
        return (tw, th);
    }
    let (sw, sh) = (src_w as u64, src_h as u64);
    let (tw, th) = (tw as u64, th as u64);
    // Compare tw/sw against th/sh without division.
    let (w, h) = if tw * sh <= th * sw {
        (tw, sh * tw / sw)
    } else {
        (sw * th / sh, th)
    };
    (w.max(1) as u32, h.max(1) as u32)
}

/// Nearest-neighbour resample to the dimensions chosen by
/// [`scaled_dimensions`]. Each output pixel samples the source pixel under
/// its centre, so equal dimensions copy the frame unchanged.
pub fn scale(frame: &Frame, settings: &RenderSettings) -> Frame {
    let (sw, sh) = (frame.width(), frame.height());
    let (ow, oh) = scaled_dimensions(sw, sh, settings);
    if (ow, oh) == (sw, sh) {
        return frame.clone();
    }
    let columns: Vec<usize> = (0..ow).map(|x| nearest(x, ow, sw)).collect();
    let src = frame.pixels();
    let row_stride = sw as usize * 3;
    let mut out = Vec::with_capacity(ow as usize * oh as usize * 3);
    for y in 0..oh {
        let row = &src[nearest(y, oh, sh) * row_stride..][..row_stride];
        for &sx in &columns {
            out.extend_from_slice(&row[sx * 3..sx * 3 + 3]);
        }
    }
    frame.with_raster(ow, oh, out)
}

fn nearest(out_index: u32, out_len: u32, src_len: u32) -> usize {
    let s = (2 * out_index as u64 + 1) * src_len as u64 / (2 * out_len as u64);
    s.min(src_len as u64 - 1) as usize
}
