//! Procedural pavement-distress images.
//!
//! Each image is a light, noisy asphalt-like background with one dark class
//! signature drawn on top:
//!
//! - `linear`: one polyline of width 1–3 px running between two opposite
//!   borders;
//! - `fatigue`: a web of 4–8 crossing polylines (at least two per direction)
//!   that encloses cells, kept off the image border;
//! - `potholes`: one filled ellipse, full axes 15–40 % of the side, axis
//!   ratio ≥ 0.6 (eccentricity ≤ 0.8).
//!
//! Signature pixels are always darker than [`DARK_THRESHOLD`] and background
//! pixels never are, so the signature is exactly the thresholded mask. A draw
//! whose mask fails [`signature_holds`] is re-rolled from the next sub-seed.

use std::collections::VecDeque;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::{DatasetManifest, LabeledImage, ManifestItem, Provenance};
use super::image::GrayImage;
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Pixels strictly below this are signature ("dark") pixels.
pub const DARK_THRESHOLD: u8 = 100;
pub const MIN_SYNTH_SIZE: usize = 32;
const MAX_REROLLS: u64 = 64;

/// The three distress classes, in label order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DistressClass {
    Fatigue,
    Linear,
    Pothole,
}

impl DistressClass {
    pub const ALL: [DistressClass; 3] = [
        DistressClass::Fatigue,
        DistressClass::Linear,
        DistressClass::Pothole,
    ];

    pub fn label(self) -> usize {
        self as usize
    }

    /// Corpus directory name; sorted order matches the labels.
    pub fn dir_name(self) -> &'static str {
        match self {
            DistressClass::Fatigue => "fatigue",
            DistressClass::Linear => "linear",
            DistressClass::Pothole => "potholes",
        }
    }
}

impl FromStr for DistressClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fatigue" => Ok(DistressClass::Fatigue),
            "linear" => Ok(DistressClass::Linear),
            "pothole" | "potholes" => Ok(DistressClass::Pothole),
            other => Err(Error::Config(format!(
                "unknown distress class {other:?}; expected fatigue, linear or potholes"
            ))),
        }
    }
}

/// Generates one labelled image, deterministic in `(class, size, seed)`.
pub fn synth_generate(class: DistressClass, size: usize, seed: u64) -> Result<LabeledImage> {
    if size < MIN_SYNTH_SIZE {
        return Err(Error::Config(format!(
            "synthetic images need size >= {MIN_SYNTH_SIZE}, got {size}"
        )));
    }
    for attempt in 0..MAX_REROLLS {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[class.label() as u64, attempt]));
        let image = draw(class, size, &mut rng);
        if signature_holds(class, &image) {
            return Ok(LabeledImage {
                image,
                label: class.label(),
            });
        }
    }
    Err(Error::Numeric(format!(
        "no valid {class:?} draw for seed {seed} after {MAX_REROLLS} attempts"
    )))
}

/// `per_class` images of every class, named `<class>/<class>_NNNN.pgm`.
pub fn synth_corpus(per_class: usize, size: usize, seed: u64) -> Result<DatasetManifest> {
    let mut items = Vec::with_capacity(per_class * 3);
    for class in DistressClass::ALL {
        for i in 0..per_class {
            let li = synth_generate(class, size, derive_seed(seed, &[class.label() as u64, i as u64]))?;
            items.push(ManifestItem {
                path: format!("{0}/{0}_{i:04}.pgm", class.dir_name()),
                label: li.label,
                image: li.image,
            });
        }
    }
    let names = DistressClass::ALL.iter().map(|c| c.dir_name().to_string()).collect();
    DatasetManifest::new(names, items, Provenance::Synthetic, Some(seed))
}

struct Canvas {
    size: usize,
    dark: Vec<Option<u8>>,
}

impl Canvas {
    fn new(size: usize) -> Self {
        Self {
            size,
            dark: vec![None; size * size],
        }
    }

    fn mark(&mut self, r: isize, c: isize, v: u8) {
        if r >= 0 && c >= 0 && (r as usize) < self.size && (c as usize) < self.size {
            let slot = &mut self.dark[r as usize * self.size + c as usize];
            *slot = Some(slot.map_or(v, |old| old.min(v)));
        }
    }

    /// Stamps a `width × width` square at every sample along each segment.
    fn polyline(&mut self, pts: &[(f64, f64)], width: usize, tone: u8) {
        let off = (width as isize - 1) / 2;
        for seg in pts.windows(2) {
            let ((r0, c0), (r1, c1)) = (seg[0], seg[1]);
            let steps = ((r1 - r0).abs().max((c1 - c0).abs()) * 4.0).ceil().max(1.0) as usize;
            for s in 0..=steps {
                let t = s as f64 / steps as f64;
                let r = (r0 + (r1 - r0) * t).round() as isize;
                let c = (c0 + (c1 - c0) * t).round() as isize;
                for dr in 0..width as isize {
                    for dc in 0..width as isize {
                        self.mark(r - off + dr, c - off + dc, tone);
                    }
                }
            }
        }
    }
}

fn draw(class: DistressClass, size: usize, rng: &mut ChaCha8Rng) -> GrayImage {
    let mut canvas = Canvas::new(size);
    let s = size as f64;
    match class {
        DistressClass::Linear => {
            let width = rng.gen_range(1..=3);
            let tone = rng.gen_range(25..70);
            let vertices = rng.gen_range(3..=5);
            let start = rng.gen_range(0.1 * s..0.9 * s);
            let end = rng.gen_range(0.1 * s..0.9 * s);
            let jitter = 0.08 * s;
            // along = 0 and along = s-1 pin the path to two opposite borders
            let path: Vec<(f64, f64)> = (0..vertices)
                .map(|v| {
                    let t = v as f64 / (vertices - 1) as f64;
                    let along = t * (s - 1.0);
                    let mut across = start + (end - start) * t;
                    if v > 0 && v + 1 < vertices {
                        across += rng.gen_range(-jitter..jitter);
                    }
                    (along, across.clamp(1.0, s - 2.0))
                })
                .collect();
            let vertical = rng.gen_bool(0.5);
            let pts: Vec<_> = if vertical {
                path
            } else {
                path.into_iter().map(|(a, b)| (b, a)).collect()
            };
            canvas.polyline(&pts, width, tone);
        }
        DistressClass::Fatigue => {
            let width = rng.gen_range(1..=2);
            let tone = rng.gen_range(25..70);
            let side = rng.gen_range(0.55 * s..0.8 * s);
            let top = rng.gen_range(3.0..s - side - 3.0);
            let left = rng.gen_range(3.0..s - side - 3.0);
            let n_rows = rng.gen_range(2..=4);
            let n_cols = rng.gen_range(2..=4);
            let strand = |rng: &mut ChaCha8Rng, n: usize, i: usize| -> Vec<(f64, f64)> {
                // strand i of n, running across the whole region
                let spacing = side / (n as f64 + 1.0);
                let base = spacing * (i as f64 + 1.0);
                let wobble = spacing * 0.25;
                (0..5)
                    .map(|v| {
                        let along = side * v as f64 / 4.0;
                        (along, base + rng.gen_range(-wobble..wobble))
                    })
                    .collect()
            };
            for i in 0..n_rows {
                let pts: Vec<_> = strand(rng, n_rows, i)
                    .into_iter()
                    .map(|(a, b)| (top + b, left + a))
                    .collect();
                canvas.polyline(&pts, width, tone);
            }
            for i in 0..n_cols {
                let pts: Vec<_> = strand(rng, n_cols, i)
                    .into_iter()
                    .map(|(a, b)| (top + a, left + b))
                    .collect();
                canvas.polyline(&pts, width, tone);
            }
        }
        DistressClass::Pothole => {
            let major = rng.gen_range(0.15..0.4) * s;
            let minor = (major * rng.gen_range(0.6..1.0)).max(0.15 * s);
            let (a, b) = (major / 2.0, minor / 2.0);
            let reach = a + 1.0;
            let cr = rng.gen_range(reach..s - 1.0 - reach);
            let cc = rng.gen_range(reach..s - 1.0 - reach);
            let (sin, cos) = rng.gen_range(0.0..std::f64::consts::PI).sin_cos();
            let tone = rng.gen_range(20..55);
            for r in 0..size {
                for c in 0..size {
                    let (dr, dc) = (r as f64 - cr, c as f64 - cc);
                    let u = dc * cos + dr * sin;
                    let v = -dc * sin + dr * cos;
                    let q = (u / a).powi(2) + (v / b).powi(2);
                    if q <= 1.0 {
                        // darker towards the centre of the bowl
                        let shade = (tone as f64 + 25.0 * q).round() as u8;
                        canvas.mark(r as isize, c as isize, shade);
                    }
                }
            }
        }
    }
    render(&canvas, rng)
}

/// Background texture in `[120, 230]` plus signature pixels in `[15, 90]`.
fn render(canvas: &Canvas, rng: &mut ChaCha8Rng) -> GrayImage {
    let size = canvas.size;
    let base = rng.gen_range(150.0..200.0);
    // a few soft blotches for low-frequency texture
    let blotches: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.gen_range(0.0..size as f64),
                rng.gen_range(0.0..size as f64),
                rng.gen_range(4.0..size as f64 / 2.0),
                rng.gen_range(-15.0..15.0),
            )
        })
        .collect();
    let mut pixels = Vec::with_capacity(size * size);
    for r in 0..size {
        for c in 0..size {
            let noise: f64 = rng.gen_range(-12.0..12.0);
            let v = match canvas.dark[r * size + c] {
                Some(tone) => (tone as f64 + noise * 0.5).clamp(15.0, 90.0),
                None => {
                    let mut bg = base + noise;
                    for &(br, bc, rad, amp) in &blotches {
                        let d2 = (r as f64 - br).powi(2) + (c as f64 - bc).powi(2);
                        bg += amp * (-d2 / (2.0 * rad * rad)).exp();
                    }
                    bg.clamp(120.0, 230.0)
                }
            };
            pixels.push(v.round() as u8);
        }
    }
    GrayImage::new(size, size, pixels).expect("canvas dimensions")
}

/// Connected components of a boolean mask; returns a label per pixel
/// (`usize::MAX` for unset) and the component count.
fn components(mask: &[bool], size: usize, eight: bool) -> (Vec<usize>, usize) {
    let mut label = vec![usize::MAX; mask.len()];
    let mut n = 0;
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || label[start] != usize::MAX {
            continue;
        }
        label[start] = n;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            let (r, c) = ((p / size) as isize, (p % size) as isize);
            for dr in -1..=1isize {
                for dc in -1..=1isize {
                    if (dr == 0 && dc == 0) || (!eight && dr != 0 && dc != 0) {
                        continue;
                    }
                    let (nr, nc) = (r + dr, c + dc);
                    if nr < 0 || nc < 0 || nr >= size as isize || nc >= size as isize {
                        continue;
                    }
                    let q = nr as usize * size + nc as usize;
                    if mask[q] && label[q] == usize::MAX {
                        label[q] = n;
                        queue.push_back(q);
                    }
                }
            }
        }
        n += 1;
    }
    (label, n)
}

/// Checks the class signature on the thresholded dark mask (8-connected
/// dark components, 4-connected background).
pub fn signature_holds(class: DistressClass, img: &GrayImage) -> bool {
    let size = img.width();
    if img.height() != size {
        return false;
    }
    let mask: Vec<bool> = img.pixels().iter().map(|&p| p < DARK_THRESHOLD).collect();
    let (label, n) = components(&mask, size, true);
    let touches = |comp: usize, side: u8| -> bool {
        (0..size).any(|i| {
            let p = match side {
                0 => i,                     // top
                1 => (size - 1) * size + i, // bottom
                2 => i * size,              // left
                _ => i * size + size - 1,   // right
            };
            label[p] == comp
        })
    };
    match class {
        DistressClass::Linear => (0..n).any(|comp| {
            (touches(comp, 0) && touches(comp, 1)) || (touches(comp, 2) && touches(comp, 3))
        }),
        DistressClass::Pothole => {
            if n != 1 {
                return false;
            }
            let (mut r0, mut r1, mut c0, mut c1, mut area) = (size, 0, size, 0, 0);
            for (p, &m) in mask.iter().enumerate() {
                if m {
                    let (r, c) = (p / size, p % size);
                    r0 = r0.min(r);
                    r1 = r1.max(r);
                    c0 = c0.min(c);
                    c1 = c1.max(c);
                    area += 1;
                }
            }
            let bbox = (r1 - r0 + 1) * (c1 - c0 + 1);
            area as f64 / bbox as f64 >= 0.6
        }
        DistressClass::Fatigue => {
            if n != 1 {
                return false;
            }
            // closed cells: light regions not connected to the border
            let light: Vec<bool> = mask.iter().map(|&m| !m).collect();
            let (bl, bn) = components(&light, size, false);
            let mut on_border = vec![false; bn];
            for i in 0..size {
                for p in [i, (size - 1) * size + i, i * size, i * size + size - 1] {
                    if bl[p] != usize::MAX {
                        on_border[bl[p]] = true;
                    }
                }
            }
            on_border.iter().any(|&b| !b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        for class in DistressClass::ALL {
            let a = synth_generate(class, 64, 5).unwrap();
            let b = synth_generate(class, 64, 5).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.label, class.label());
            assert_ne!(a.image, synth_generate(class, 64, 6).unwrap().image);
        }
    }

    #[test]
    fn class_parsing() {
        assert_eq!("potholes".parse::<DistressClass>().unwrap(), DistressClass::Pothole);
        assert_eq!("pothole".parse::<DistressClass>().unwrap(), DistressClass::Pothole);
        assert!(matches!("block".parse::<DistressClass>(), Err(Error::Config(_))));
        let mut names: Vec<_> = DistressClass::ALL.iter().map(|c| c.dir_name()).collect();
        let before = names.clone();
        names.sort();
        assert_eq!(names, before);
    }

    #[test]
    fn too_small_is_rejected() {
        assert!(matches!(
            synth_generate(DistressClass::Linear, 16, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn validator_distinguishes_classes() {
        // a pothole never passes as linear, and a linear crack never forms cells
        for seed in 0..20 {
            let p = synth_generate(DistressClass::Pothole, 64, seed).unwrap().image;
            assert!(!signature_holds(DistressClass::Linear, &p));
            let l = synth_generate(DistressClass::Linear, 64, seed).unwrap().image;
            assert!(!signature_holds(DistressClass::Fatigue, &l));
        }
    }

    #[test]
    fn corpus_layout() {
        let m = synth_corpus(4, 32, 1).unwrap();
        assert_eq!(m.counts(), &[4, 4, 4]);
        assert_eq!(m.class_names(), &["fatigue", "linear", "potholes"]);
        assert_eq!(m.items()[5].path, "linear/linear_0001.pgm");
    }
}
