//! Rotation, zoom and brightness transforms, and dataset expansion with them.
//!
//! All resampling is nearest-neighbour, so every transform is an explicit
//! index map.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::{DatasetManifest, ManifestItem, Provenance};
use super::image::GrayImage;
use crate::error::{Error, Result};
use crate::seed::derive_seed;

pub const SCALE_RANGE: (f64, f64) = (0.5, 2.0);
pub const BRIGHTNESS_RANGE: (f64, f64) = (0.25, 4.0);

/// Counter-clockwise rotation by `degrees`.
///
/// Multiples of 90° are exact index permutations (a quarter turn swaps width
/// and height). Other angles resample about the centre, keep the original
/// extent and fill uncovered pixels with the image's median intensity.
pub fn rotate(img: &GrayImage, degrees: f64) -> GrayImage {
    let turns = degrees / 90.0;
    if turns.fract() == 0.0 && turns.is_finite() {
        return rotate_quarters(img, turns.rem_euclid(4.0) as u8);
    }
    let (w, h) = (img.width(), img.height());
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (sin, cos) = degrees.to_radians().sin_cos();
    let fill = img.median();
    GrayImage::from_fn(w, h, |r, c| {
        let (dx, dy) = (c as f64 - cx, r as f64 - cy);
        let sx = (cx + dx * cos - dy * sin).round();
        let sy = (cy + dx * sin + dy * cos).round();
        if sx < 0.0 || sy < 0.0 || sx >= w as f64 || sy >= h as f64 {
            fill
        } else {
            img.get(sy as usize, sx as usize)
        }
    })
}

fn rotate_quarters(img: &GrayImage, quarters: u8) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    match quarters {
        0 => img.clone(),
        // out[r][c] = in[c][w-1-r]
        1 => GrayImage::from_fn(h, w, |r, c| img.get(c, w - 1 - r)),
        2 => GrayImage::from_fn(w, h, |r, c| img.get(h - 1 - r, w - 1 - c)),
        _ => GrayImage::from_fn(h, w, |r, c| img.get(h - 1 - c, r)),
    }
}

/// Zoom about the centre, keeping the extent. `factor > 1` crops, `factor < 1`
/// pads by edge replication. Source index is
/// `floor(centre + (dst − centre) / factor)`, clamped to the image.
pub fn scale_image(img: &GrayImage, factor: f64) -> Result<GrayImage> {
    check_range("scale factor", factor, SCALE_RANGE)?;
    if factor == 1.0 {
        return Ok(img.clone());
    }
    let (w, h) = (img.width(), img.height());
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let src = |d: usize, centre: f64, extent: usize| -> usize {
        let s = (centre + (d as f64 - centre) / factor).floor();
        s.clamp(0.0, (extent - 1) as f64) as usize
    };
    Ok(GrayImage::from_fn(w, h, |r, c| {
        img.get(src(r, cy, h), src(c, cx, w))
    }))
}

/// `round(p · factor)` clamped to `[0, 255]`.
pub fn adjust_brightness(img: &GrayImage, factor: f64) -> Result<GrayImage> {
    check_range("brightness factor", factor, BRIGHTNESS_RANGE)?;
    let px = img
        .pixels()
        .iter()
        .map(|&p| (p as f64 * factor).round().clamp(0.0, 255.0) as u8)
        .collect();
    GrayImage::new(img.width(), img.height(), px)
}

fn check_range(what: &str, v: f64, (lo, hi): (f64, f64)) -> Result<()> {
    if !(lo..=hi).contains(&v) {
        return Err(Error::Config(format!("{what} {v} outside [{lo}, {hi}]")));
    }
    Ok(())
}

/// Transform sets sampled by [`augment_dataset`].
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentSpec {
    /// Counter-clockwise angles in degrees.
    pub rotations: Vec<f64>,
    pub scales: Vec<f64>,
    pub brightness: Vec<f64>,
    /// Variants generated per original image.
    pub variants: usize,
    pub seed: u64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self {
            rotations: vec![90.0, 180.0, 270.0],
            scales: vec![0.8, 1.2],
            brightness: vec![0.8, 1.2],
            variants: 3,
            seed: 0,
        }
    }
}

impl AugmentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rotations.is_empty() || self.scales.is_empty() || self.brightness.is_empty() {
            return Err(Error::Config(
                "rotation, scale and brightness sets must be non-empty".into(),
            ));
        }
        if let Some(a) = self.rotations.iter().find(|a| !a.is_finite()) {
            return Err(Error::Config(format!("rotation angle {a} is not finite")));
        }
        for &s in &self.scales {
            check_range("scale factor", s, SCALE_RANGE)?;
        }
        for &b in &self.brightness {
            check_range("brightness factor", b, BRIGHTNESS_RANGE)?;
        }
        Ok(())
    }

    /// Applies one seeded composition `rotate ∘ scale ∘ brightness`.
    pub fn apply(&self, img: &GrayImage, seed: u64) -> Result<GrayImage> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let angle = *self.rotations.choose(&mut rng).expect("validated non-empty");
        let scale = *self.scales.choose(&mut rng).expect("validated non-empty");
        let gain = *self.brightness.choose(&mut rng).expect("validated non-empty");
        let out = adjust_brightness(img, gain)?;
        let out = scale_image(&out, scale)?;
        Ok(rotate(&out, angle))
    }
}

/// Returns the originals followed by `spec.variants` transformed copies of
/// each, in item order. Variant `v` of item `i` uses the seed
/// `derive_seed(spec.seed, [i, v])`, independent of processing order.
pub fn augment_dataset(manifest: &DatasetManifest, spec: &AugmentSpec) -> Result<DatasetManifest> {
    spec.validate()?;
    let mut items = manifest.items().to_vec();
    items.reserve(manifest.len() * spec.variants);
    for (i, item) in manifest.items().iter().enumerate() {
        for v in 0..spec.variants {
            let seed = derive_seed(spec.seed, &[i as u64, v as u64]);
            let image = spec.apply(&item.image, seed)?;
            items.push(ManifestItem {
                path: variant_path(&item.path, v),
                label: item.label,
                image,
            });
        }
    }
    DatasetManifest::new(
        manifest.class_names().to_vec(),
        items,
        Provenance::Augmented,
        Some(spec.seed),
    )
}

fn variant_path(path: &str, v: usize) -> String {
    let stem = path.rsplit_once('.').map_or(path, |(s, _)| s);
    format!("{stem}_aug{v}.pgm")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(w: usize, h: usize, px: &[u8]) -> GrayImage {
        GrayImage::new(w, h, px.to_vec()).unwrap()
    }

    #[test]
    fn quarter_turn_matches_hand_layout() {
        // [[a,b],[c,d]] -> [[b,d],[a,c]]
        let src = img(2, 2, &[1, 2, 3, 4]);
        assert_eq!(rotate(&src, 90.0).pixels(), &[2, 4, 1, 3]);
        assert_eq!(rotate(&src, 180.0).pixels(), &[4, 3, 2, 1]);
        assert_eq!(rotate(&src, 270.0).pixels(), &[3, 1, 4, 2]);
        assert_eq!(rotate(&src, -90.0), rotate(&src, 270.0));
    }

    #[test]
    fn quarter_turn_enumerated_index_map() {
        let (w, h) = (4, 3);
        let src = GrayImage::from_fn(w, h, |r, c| (r * w + c) as u8);
        let out = rotate(&src, 90.0);
        assert_eq!((out.width(), out.height()), (h, w));
        for r in 0..out.height() {
            for c in 0..out.width() {
                assert_eq!(out.get(r, c), src.get(c, w - 1 - r));
            }
        }
    }

    #[test]
    fn identity_angles() {
        let src = GrayImage::from_fn(5, 5, |r, c| (r * 13 + c * 7) as u8);
        assert_eq!(rotate(&src, 0.0), src);
        assert_eq!(rotate(&src, 360.0), src);
        let mut four = src.clone();
        for _ in 0..4 {
            four = rotate(&four, 90.0);
        }
        assert_eq!(four, src);
    }

    #[test]
    fn arbitrary_angle_keeps_extent_and_fills_with_median() {
        let src = GrayImage::from_fn(9, 9, |r, c| if r == 4 || c == 4 { 0 } else { 200 });
        let out = rotate(&src, 45.0);
        assert_eq!((out.width(), out.height()), (9, 9));
        // centre is a fixed point
        assert_eq!(out.get(4, 4), 0);
        // corners rotate out of frame
        assert_eq!(out.get(0, 0), src.median());
    }

    #[test]
    fn scale_examples() {
        let src = GrayImage::from_fn(6, 6, |r, c| (r * 6 + c) as u8);
        assert_eq!(scale_image(&src, 1.0).unwrap(), src);
        let flat = GrayImage::filled(7, 5, 42);
        for f in [0.5, 0.8, 1.2, 2.0] {
            assert_eq!(scale_image(&flat, f).unwrap(), flat);
        }
        let mut dot = GrayImage::filled(4, 4, 0);
        dot.set(1, 1, 255);
        let out = scale_image(&dot, 2.0).unwrap();
        #[rustfmt::skip]
        let want = [
            0,   0,   0, 0,
            0, 255, 255, 0,
            0, 255, 255, 0,
            0,   0,   0, 0,
        ];
        assert_eq!(out.pixels(), &want);
        assert!(matches!(scale_image(&src, 2.5), Err(Error::Config(_))));
    }

    #[test]
    fn shrink_replicates_edges() {
        let src = GrayImage::from_fn(4, 4, |_, c| if c == 0 { 10 } else { 90 });
        let out = scale_image(&src, 0.5).unwrap();
        // column 0 maps below the left edge and is clamped to it
        for r in 0..4 {
            assert_eq!(out.get(r, 0), 10);
        }
    }

    #[test]
    fn brightness_examples() {
        let src = img(3, 1, &[100, 200, 0]);
        assert_eq!(adjust_brightness(&src, 1.0).unwrap(), src);
        let out = adjust_brightness(&src, 1.5).unwrap();
        assert_eq!(out.pixels(), &[150, 255, 0]);
        assert!(adjust_brightness(&src, 0.1).is_err());
        assert!(adjust_brightness(&src, 4.5).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(AugmentSpec::default().validate().is_ok());
        let bad = AugmentSpec {
            scales: vec![3.0],
            ..AugmentSpec::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let empty = AugmentSpec {
            rotations: vec![],
            ..AugmentSpec::default()
        };
        assert!(empty.validate().is_err());
    }

    #[test]
    fn variant_paths() {
        assert_eq!(variant_path("linear/a.ppm", 2), "linear/a_aug2.pgm");
        assert_eq!(variant_path("noext", 0), "noext_aug0.pgm");
    }
}
