//! On-disk dataset layout: `images/<id>.png`, `masks/<id>.png` and
//! `palette.csv` under one root.

use std::fs;
use std::path::Path;

use sharpnet_core::data::{decode_mask, encode_mask_rgb, ColorMode, Palette, Sample};

use crate::error::{CliError, Result};
use crate::files::{load_palette, read_png, save_palette, write_png};

#[derive(Debug, Clone)]
pub struct Dataset {
    pub palette: Palette,
    /// Sorted by id.
    pub samples: Vec<Sample>,
}

pub fn load_dataset(root: &Path, mode: ColorMode) -> Result<Dataset> {
    let palette = load_palette(&root.join("palette.csv"))?;
    let image_dir = root.join("images");
    let mut ids: Vec<String> = fs::read_dir(&image_dir)
        .map_err(|e| CliError::io(&image_dir, e))?
        .filter_map(|entry| {
            let path = entry.ok()?.path();
            (path.extension()? == "png").then(|| path.file_stem()?.to_str().map(str::to_owned))?
        })
        .collect();
    ids.sort();
    if ids.is_empty() {
        return Err(CliError::Data(format!("{}: no PNG images", image_dir.display())));
    }
    let mut samples = Vec::with_capacity(ids.len());
    for id in ids {
        let img = read_png(&image_dir.join(format!("{id}.png")))?;
        let mask_path = root.join("masks").join(format!("{id}.png"));
        let mask_rgb = read_png(&mask_path)?;
        if (mask_rgb.width, mask_rgb.height) != (img.width, img.height) {
            return Err(CliError::Data(format!(
                "{}: mask is {}×{} but image is {}×{}",
                mask_path.display(),
                mask_rgb.width,
                mask_rgb.height,
                img.width,
                img.height
            )));
        }
        let mask = decode_mask(&mask_rgb.data, mask_rgb.width, mask_rgb.height, &palette, mode)
            .map_err(|e| CliError::Data(format!("{}: {}", mask_path.display(), e)))?;
        samples.push(Sample::new(id, img.width, img.height, img.data, mask)?);
    }
    Ok(Dataset { palette, samples })
}

pub fn save_dataset(root: &Path, dataset: &Dataset) -> Result<()> {
    save_palette(&root.join("palette.csv"), &dataset.palette)?;
    for s in &dataset.samples {
        write_png(
            &root.join("images").join(format!("{}.png", s.id)),
            s.width,
            s.height,
            s.image.clone(),
        )?;
        let rgb = encode_mask_rgb(&s.mask, &dataset.palette)?;
        write_png(
            &root.join("masks").join(format!("{}.png", s.id)),
            s.width,
            s.height,
            rgb,
        )?;
    }
    Ok(())
}
