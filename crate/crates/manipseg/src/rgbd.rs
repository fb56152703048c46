//! Depth/color PNG pairs with pinhole intrinsics.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use manipseg_core::{CameraIntrinsics, RgbdFrame, Vec3};
use serde::{Deserialize, Serialize};

use crate::error::{FormatError, FormatResult};

/// Depth units per meter are `1 / depth_scale`; sensors usually store millimeters.
pub const DEFAULT_DEPTH_SCALE: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntrinsicsFile {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl IntrinsicsFile {
    pub fn to_intrinsics(self) -> manipseg_core::Result<CameraIntrinsics> {
        CameraIntrinsics::new(self.fx, self.fy, self.cx, self.cy, self.width, self.height)
    }
}

impl From<CameraIntrinsics> for IntrinsicsFile {
    fn from(k: CameraIntrinsics) -> Self {
        Self {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            width: k.width,
            height: k.height,
        }
    }
}

pub fn read_intrinsics(path: &Path) -> FormatResult<CameraIntrinsics> {
    let read = || -> FormatResult<CameraIntrinsics> {
        let f: IntrinsicsFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        Ok(f.to_intrinsics()?)
    };
    read().map_err(|e| e.at(path))
}

struct Image {
    width: usize,
    height: usize,
    channels: usize,
    samples: Vec<u16>,
}

fn read_png(path: &Path) -> FormatResult<Image> {
    let read = || -> FormatResult<Image> {
        let mut decoder = png::Decoder::new(BufReader::new(File::open(path)?));
        decoder.set_transformations(png::Transformations::EXPAND);
        let mut reader = decoder.read_info()?;
        let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
        let info = reader.next_frame(&mut buf)?;
        let channels = info.color_type.samples();
        let samples = match info.bit_depth {
            png::BitDepth::Sixteen => buf[..info.buffer_size()]
                .chunks_exact(2)
                .map(|b| u16::from_be_bytes([b[0], b[1]]))
                .collect(),
            png::BitDepth::Eight => buf[..info.buffer_size()].iter().map(|&b| b as u16).collect(),
            d => return Err(FormatError::malformed(format!("unsupported PNG bit depth {d:?}"))),
        };
        Ok(Image {
            width: info.width as usize,
            height: info.height as usize,
            channels,
            samples,
        })
    };
    read().map_err(|e| e.at(path))
}

/// Load a registered depth/color pair. Depth must be a single-channel 16-bit
/// PNG whose raw values times `depth_scale` give meters (0 = no reading);
/// color an 8-bit RGB(A) PNG of the same size.
pub fn read_rgbd(depth: &Path, color: &Path, intrinsics: &CameraIntrinsics, depth_scale: f64) -> FormatResult<RgbdFrame> {
    let d = read_png(depth)?;
    if d.channels != 1 {
        return Err(FormatError::malformed("depth PNG must be single-channel").at(depth));
    }
    let c = read_png(color)?;
    if c.channels < 3 {
        return Err(FormatError::malformed("color PNG must be RGB or RGBA").at(color));
    }
    for (img, path) in [(&d, depth), (&c, color)] {
        if (img.width, img.height) != (intrinsics.width, intrinsics.height) {
            return Err(FormatError::malformed(format!(
                "image is {}x{} but intrinsics say {}x{}",
                img.width, img.height, intrinsics.width, intrinsics.height
            ))
            .at(path));
        }
    }
    let depth_m = d.samples.iter().map(|&v| v as f64 * depth_scale).collect();
    let colors = c
        .samples
        .chunks_exact(c.channels)
        .map(|px| Vec3::new(px[0] as f64, px[1] as f64, px[2] as f64) / 255.0)
        .collect();
    Ok(RgbdFrame::new(depth_m, colors, *intrinsics)?)
}

/// Inverse of [`read_rgbd`]; depths are rounded to the nearest unit and
/// clamped to the 16-bit range.
pub fn write_rgbd(frame: &RgbdFrame, depth: &Path, color: &Path, depth_scale: f64) -> FormatResult<()> {
    let (w, h) = (frame.intrinsics.width as u32, frame.intrinsics.height as u32);
    let write = |path: &Path, color_type, bit_depth, data: &[u8]| -> FormatResult<()> {
        let mut enc = png::Encoder::new(BufWriter::new(File::create(path)?), w, h);
        enc.set_color(color_type);
        enc.set_depth(bit_depth);
        enc.write_header()?.write_image_data(data)?;
        Ok(())
    };
    let raw: Vec<u8> = frame
        .depth
        .iter()
        .flat_map(|&z| ((z / depth_scale).round().clamp(0.0, u16::MAX as f64) as u16).to_be_bytes())
        .collect();
    write(depth, png::ColorType::Grayscale, png::BitDepth::Sixteen, &raw).map_err(|e| e.at(depth))?;
    let rgb: Vec<u8> = frame
        .color
        .iter()
        .flat_map(|c| c.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect::<Vec<_>>())
        .collect();
    write(color, png::ColorType::Rgb, png::BitDepth::Eight, &rgb).map_err(|e| e.at(color))
}
