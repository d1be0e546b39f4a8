//! Tensor, PNG and palette files.

use std::fs;
use std::path::Path;

use image::{ImageBuffer, Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use sharpnet_core::data::{Palette, PaletteEntry};
use sharpnet_core::tnsr::{self, DType};
use sharpnet_core::Tensor;

use crate::error::{CliError, Result};

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    tnsr::decode(&read_bytes(path)?).map_err(|e| CliError::Data(format!("{}: {}", path.display(), e)))
}

pub fn write_tensor(path: &Path, tensor: &Tensor, dtype: DType) -> Result<()> {
    write_bytes(path, &tnsr::encode(tensor, dtype)?)
}

/// Decoded 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rgb8 {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

pub fn read_png(path: &Path) -> Result<Rgb8> {
    let img = image::open(path).map_err(|e| CliError::Data(format!("{}: {}", path.display(), e)))?;
    let rgb = img.to_rgb8();
    Ok(Rgb8 {
        width: rgb.width() as usize,
        height: rgb.height() as usize,
        data: rgb.into_raw(),
    })
}

pub fn write_png(path: &Path, width: usize, height: usize, data: Vec<u8>) -> Result<()> {
    let img: RgbImage = ImageBuffer::<Rgb<u8>, _>::from_raw(width as u32, height as u32, data).ok_or_else(|| {
        CliError::Data(format!(
            "{}: buffer does not match {}×{}",
            path.display(),
            width,
            height
        ))
    })?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    img.save(path)
        .map_err(|e| CliError::Data(format!("{}: {}", path.display(), e)))
}

#[derive(Debug, Serialize, Deserialize)]
struct PaletteRow {
    class_name: String,
    r: u8,
    g: u8,
    b: u8,
    ciw: f64,
}

/// Reads a `class_name,r,g,b,ciw` CSV with header; row order is class order.
pub fn load_palette(path: &Path) -> Result<Palette> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::Data(format!("{}: {}", path.display(), e)))?;
    let mut entries = Vec::new();
    for row in reader.deserialize::<PaletteRow>() {
        let row = row.map_err(|e| CliError::Data(format!("{}: {}", path.display(), e)))?;
        entries.push(PaletteEntry {
            name: row.class_name,
            rgb: [row.r, row.g, row.b],
            ciw: row.ciw,
        });
    }
    Palette::new(entries).map_err(|e| CliError::Data(format!("{}: {}", path.display(), e)))
}

pub fn save_palette(path: &Path, palette: &Palette) -> Result<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for e in palette.entries() {
        writer
            .serialize(PaletteRow {
                class_name: e.name.clone(),
                r: e.rgb[0],
                g: e.rgb[1],
                b: e.rgb[2],
                ciw: e.ciw,
            })
            .map_err(|e| CliError::Data(e.to_string()))?;
    }
    let bytes = writer.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
    write_bytes(path, &bytes)
}
