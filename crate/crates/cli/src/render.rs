//! Grayscale display of real grids.

use bcdi_core::grid::{crop_center, RealGrid};

use crate::config::{RenderSection, Scale};
use crate::CliError;

/// Display levels in `0..=65535`, row-major with `y = 0` on top. Negative
/// values show as black.
pub fn levels(g: &RealGrid, opts: &RenderSection) -> Result<(usize, usize, Vec<u16>), CliError> {
    let g = match opts.crop {
        Some([w, h]) => crop_center(g, (w, h))?,
        None => g.clone(),
    };
    let peak = g.max();
    let norm = 10f64.powf(opts.decades);
    let out = g
        .data()
        .iter()
        .map(|&v| {
            let t = if peak > 0.0 { (v / peak).clamp(0.0, 1.0) } else { 0.0 };
            let d = match opts.scale {
                Scale::Linear => t,
                Scale::Log => (norm * t).ln_1p() / norm.ln_1p(),
            };
            (d.powf(1.0 / opts.gamma) * 65535.0).round() as u16
        })
        .collect();
    Ok((g.width(), g.height(), out))
}

pub fn encode_png(width: usize, height: usize, levels: &[u16]) -> Result<Vec<u8>, CliError> {
    let io = |e: png::EncodingError| CliError::Io(format!("png: {e}"));
    let mut buf = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut buf, width as u32, height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Sixteen);
        let mut writer = enc.write_header().map_err(io)?;
        let bytes: Vec<u8> = levels.iter().flat_map(|v| v.to_be_bytes()).collect();
        writer.write_image_data(&bytes).map_err(io)?;
        writer.finish().map_err(io)?;
    }
    Ok(buf)
}
