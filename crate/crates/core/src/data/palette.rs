use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::ClassMap;
use crate::error::{bail, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PaletteEntry {
    pub name: String,
    pub rgb: [u8; 3],
    /// Class importance weight in [0, 1].
    pub ciw: f64,
}

/// Class index ↔ colour ↔ importance weight. Index 0 is background.
#[derive(Debug, Clone, PartialEq)]
pub struct Palette {
    entries: Vec<PaletteEntry>,
    lookup: BTreeMap<[u8; 3], u8>,
}

/// What to do with mask colours missing from the palette.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ColorMode {
    #[default]
    Strict,
    /// Unknown colours decode to background.
    Lenient,
}

impl Palette {
    pub fn new(entries: Vec<PaletteEntry>) -> Result<Self> {
        if entries.is_empty() {
            bail!(InvalidArgument, "palette has no entries");
        }
        if entries.len() > 256 {
            bail!(
                InvalidArgument,
                "palette has {} entries, at most 256 supported",
                entries.len()
            );
        }
        let mut lookup = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            if !(0.0..=1.0).contains(&e.ciw) {
                bail!(InvalidArgument, "weight {} of {:?} outside [0, 1]", e.ciw, e.name);
            }
            if lookup.insert(e.rgb, i as u8).is_some() {
                bail!(InvalidArgument, "colour {:?} used twice (at {:?})", e.rgb, e.name);
            }
        }
        Ok(Self { entries, lookup })
    }

    /// Background plus the nine defect classes with their importance weights.
    /// Colours are placeholders.
    pub fn culvert_sewer() -> Self {
        let rows: [(&str, [u8; 3], f64); 10] = [
            ("Background", [0, 0, 0], 0.0),
            ("Water Level", [0, 0, 255], 0.0310),
            ("Cracks", [255, 0, 0], 1.0),
            ("Roots", [0, 255, 0], 1.0),
            ("Holes", [255, 255, 0], 1.0),
            ("Joint Problems", [255, 0, 255], 0.6419),
            ("Deformation", [0, 255, 255], 0.1622),
            ("Fracture", [255, 128, 0], 0.5100),
            ("Encrustation/Deposits", [128, 0, 255], 0.3518),
            ("Loose Gasket", [128, 128, 128], 0.5419),
        ];
        Self::new(
            rows.into_iter()
                .map(|(name, rgb, ciw)| PaletteEntry {
                    name: name.into(),
                    rgb,
                    ciw,
                })
                .collect(),
        )
        .expect("built-in palette is valid")
    }

    /// `k` distinct colours with uniform weights (background 0), for
    /// synthetic data.
    pub fn synthetic(k: usize) -> Result<Self> {
        const BASE: [[u8; 3]; 8] = [
            [0, 0, 0],
            [255, 0, 0],
            [0, 255, 0],
            [0, 0, 255],
            [255, 255, 0],
            [255, 0, 255],
            [0, 255, 255],
            [255, 255, 255],
        ];
        let entries = (0..k)
            .map(|i| PaletteEntry {
                name: alloc::format!("class{}", i),
                rgb: if i < BASE.len() {
                    BASE[i]
                } else {
                    [(i * 37 % 256) as u8, (i * 91 % 256) as u8, (i * 53 % 256) as u8]
                },
                ciw: if i == 0 { 0.0 } else { 1.0 },
            })
            .collect();
        Self::new(entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[PaletteEntry] {
        &self.entries
    }

    pub fn class_of(&self, rgb: [u8; 3]) -> Option<u8> {
        self.lookup.get(&rgb).copied()
    }

    pub fn ciw_weights(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.ciw).collect()
    }
}

/// Maps an interleaved RGB mask to class indices.
pub fn decode_mask(rgb: &[u8], width: usize, height: usize, palette: &Palette, mode: ColorMode) -> Result<ClassMap> {
    if rgb.len() != width * height * 3 {
        bail!(
            InvalidShape,
            "mask buffer of {} bytes for {}×{}",
            rgb.len(),
            width,
            height
        );
    }
    let mut classes = Vec::with_capacity(width * height);
    for (p, px) in rgb.chunks_exact(3).enumerate() {
        let color = [px[0], px[1], px[2]];
        match (palette.class_of(color), mode) {
            (Some(c), _) => classes.push(c),
            (None, ColorMode::Lenient) => classes.push(0),
            (None, ColorMode::Strict) => bail!(
                Data,
                "pixel ({}, {}) has colour {:?} which is not in the palette",
                p % width,
                p / width,
                color
            ),
        }
    }
    ClassMap::new(width, height, classes)
}

/// Inverse of [`decode_mask`] for masks whose classes exist in the palette.
pub fn encode_mask_rgb(mask: &ClassMap, palette: &Palette) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(mask.classes().len() * 3);
    for &c in mask.classes() {
        let Some(e) = palette.entries.get(c as usize) else {
            bail!(Data, "class {} has no palette colour", c);
        };
        out.extend_from_slice(&e.rgb);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn two_colour_mask() {
        let pal = Palette::synthetic(2).unwrap();
        let rgb = [0, 0, 0, 255, 0, 0, 255, 0, 0, 0, 0, 0];
        let m = decode_mask(&rgb, 2, 2, &pal, ColorMode::Strict).unwrap();
        assert_eq!(m.classes(), &[0, 1, 1, 0]);
        assert_eq!(encode_mask_rgb(&m, &pal).unwrap(), rgb);
    }

    #[test]
    fn unknown_colour_handling() {
        let pal = Palette::synthetic(2).unwrap();
        let rgb = [0, 0, 0, 9, 9, 9];
        let err = decode_mask(&rgb, 2, 1, &pal, ColorMode::Strict).unwrap_err();
        let msg = alloc::format!("{err}");
        assert!(msg.contains("(1, 0)") && msg.contains("[9, 9, 9]"), "{msg}");
        let m = decode_mask(&rgb, 2, 1, &pal, ColorMode::Lenient).unwrap();
        assert_eq!(m.classes(), &[0, 0]);
    }

    #[test]
    fn palette_validation() {
        let dup = vec![
            PaletteEntry {
                name: "a".into(),
                rgb: [1, 2, 3],
                ciw: 0.0,
            },
            PaletteEntry {
                name: "b".into(),
                rgb: [1, 2, 3],
                ciw: 0.5,
            },
        ];
        assert!(Palette::new(dup).is_err());
        let heavy = vec![PaletteEntry {
            name: "a".into(),
            rgb: [1, 2, 3],
            ciw: 1.5,
        }];
        assert!(Palette::new(heavy).is_err());
        let p = Palette::culvert_sewer();
        assert_eq!(p.len(), 10);
        assert_eq!(p.entries()[1].ciw, 0.0310);
        assert_eq!(p.entries()[5].ciw, 0.6419);
    }
}
