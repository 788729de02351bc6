//! Class-indexed corpora: loading, splitting, export and batching.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::image::GrayImage;
use super::pnm;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed::derive_seed;
use crate::tensor::Tensor;

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const MANIFEST_HEADER: [&str; 3] = ["path", "label", "class"];

/// Smallest accepted image side.
pub const MIN_IMAGE_SIDE: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Loaded,
    Synthetic,
    Augmented,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Provenance::Loaded => "loaded",
            Provenance::Synthetic => "synthetic",
            Provenance::Augmented => "augmented",
        })
    }
}

/// A grayscale image with its class index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledImage {
    pub image: GrayImage,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestItem {
    /// Path relative to the corpus root, `<class>/<file>`.
    pub path: String,
    pub label: usize,
    pub image: GrayImage,
}

/// In-memory corpus with sorted class names and per-class counts.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    class_names: Vec<String>,
    counts: Vec<usize>,
    items: Vec<ManifestItem>,
    provenance: Provenance,
    seed: Option<u64>,
    warnings: Vec<String>,
}

impl DatasetManifest {
    pub fn new(
        class_names: Vec<String>,
        items: Vec<ManifestItem>,
        provenance: Provenance,
        seed: Option<u64>,
    ) -> Result<Self> {
        for (i, name) in class_names.iter().enumerate() {
            if class_names[..i].contains(name) {
                return Err(Error::Corpus(format!("duplicate class name {name:?}")));
            }
        }
        let mut counts = vec![0; class_names.len()];
        for item in &items {
            if item.label >= class_names.len() {
                return Err(Error::Corpus(format!(
                    "item {} has label {} but only {} classes exist",
                    item.path,
                    item.label,
                    class_names.len()
                )));
            }
            if item.image.width() < MIN_IMAGE_SIDE || item.image.height() < MIN_IMAGE_SIDE {
                return Err(Error::Corpus(format!(
                    "item {} is {}x{}; images must be at least {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE}",
                    item.path,
                    item.image.width(),
                    item.image.height()
                )));
            }
            counts[item.label] += 1;
        }
        Ok(Self {
            class_names,
            counts,
            items,
            provenance,
            seed,
            warnings: Vec::new(),
        })
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn items(&self) -> &[ManifestItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Files skipped while loading, with the reason.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn labels(&self) -> Vec<usize> {
        self.items.iter().map(|i| i.label).collect()
    }

    /// A manifest holding `indices` of this one, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let items = indices.iter().map(|&i| self.items[i].clone()).collect();
        Self::new(self.class_names.clone(), items, self.provenance, self.seed)
    }

    /// Recounts items per class and compares with the stored counts.
    pub fn check_consistency(&self) -> Result<()> {
        let mut counts = vec![0; self.class_names.len()];
        for item in &self.items {
            if item.label >= counts.len() {
                return Err(Error::Consistency(format!(
                    "label {} out of range for {} classes",
                    item.label,
                    counts.len()
                )));
            }
            counts[item.label] += 1;
        }
        if counts != self.counts {
            return Err(Error::Consistency(format!(
                "class counts {:?} disagree with items {:?}",
                self.counts, counts
            )));
        }
        Ok(())
    }
}

fn is_pixmap(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "pgm" | "ppm" | "pnm"))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

/// Loads `<root>/<class>/<file>.pgm|.ppm`. Classes are the sorted
/// subdirectory names; unreadable and non-image files are skipped and listed
/// in [`DatasetManifest::warnings`].
pub fn load_dataset(root: &Path) -> Result<DatasetManifest> {
    let class_dirs: Vec<PathBuf> = sorted_entries(root)?
        .into_iter()
        .filter(|p| p.is_dir())
        .collect();
    if class_dirs.len() < 2 {
        return Err(Error::Corpus(format!(
            "{} has {} class directories; at least 2 are required",
            root.display(),
            class_dirs.len()
        )));
    }
    let mut class_names = Vec::with_capacity(class_dirs.len());
    let mut items = Vec::new();
    let mut warnings = Vec::new();
    for (label, dir) in class_dirs.iter().enumerate() {
        let class = dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::Corpus(format!("class directory {} is not UTF-8", dir.display())))?
            .to_string();
        let mut usable = 0;
        for file in sorted_entries(dir)? {
            let rel = format!(
                "{class}/{}",
                file.file_name().map(|n| n.to_string_lossy()).unwrap_or_default()
            );
            if !file.is_file() || !is_pixmap(&file) {
                warnings.push(format!("{rel}: not a pixmap, skipped"));
                continue;
            }
            match pnm::read(&file) {
                Ok(image) if image.width() >= MIN_IMAGE_SIDE && image.height() >= MIN_IMAGE_SIDE => {
                    usable += 1;
                    items.push(ManifestItem {
                        path: rel,
                        label,
                        image,
                    });
                }
                Ok(image) => warnings.push(format!(
                    "{rel}: {}x{} is smaller than {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE}, skipped",
                    image.width(),
                    image.height()
                )),
                Err(e) => warnings.push(format!("{rel}: {e}")),
            }
        }
        if usable == 0 {
            return Err(Error::Corpus(format!("class {class:?} has no usable images")));
        }
        class_names.push(class);
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    let mut manifest = DatasetManifest::new(class_names, items, Provenance::Loaded, None)?;
    manifest.warnings = warnings;
    Ok(manifest)
}

/// Writes `manifest.csv` with header `path,label,class`.
pub fn write_manifest_csv(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    let to_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{other:?}")),
    };
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    w.write_record(MANIFEST_HEADER).map_err(to_err)?;
    for item in manifest.items() {
        let label = item.label.to_string();
        w.write_record([
            item.path.as_str(),
            label.as_str(),
            manifest.class_names()[item.label].as_str(),
        ])
        .map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes every image as P5 under `root/<class>/` plus `root/manifest.csv`.
/// Item paths are normalised to a `.pgm` extension.
pub fn write_corpus(manifest: &DatasetManifest, root: &Path) -> Result<DatasetManifest> {
    for class in manifest.class_names() {
        let dir = root.join(class);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let mut written = manifest.clone();
    for item in &mut written.items {
        let file = Path::new(&item.path)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| item.path.clone());
        item.path = format!("{}/{file}.pgm", manifest.class_names()[item.label]);
        pnm::write_pgm(&root.join(&item.path), &item.image)?;
    }
    write_manifest_csv(&written, &root.join(MANIFEST_FILE))?;
    Ok(written)
}

/// Per-class stratified split.
///
/// Each class is shuffled with its own derived seed and contributes
/// `floor(n·ratio)` items to the training side. Remainder items then go to
/// training one per class, in class order, until the training side holds
/// `round(N·ratio)` items; a class never gives up its last validation item.
pub fn stratified_split(
    manifest: &DatasetManifest,
    train_ratio: f64,
    seed: u64,
) -> Result<(DatasetManifest, DatasetManifest)> {
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(Error::Config(format!(
            "train ratio must lie in (0, 1), got {train_ratio}"
        )));
    }
    let k = manifest.class_count();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, item) in manifest.items().iter().enumerate() {
        by_class[item.label].push(i);
    }
    for (c, members) in by_class.iter_mut().enumerate() {
        if members.len() < 2 {
            return Err(Error::Corpus(format!(
                "class {:?} has {} items; splitting needs at least 2",
                manifest.class_names()[c],
                members.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[c as u64]));
        members.shuffle(&mut rng);
    }
    let mut take: Vec<usize> = by_class
        .iter()
        .map(|m| (m.len() as f64 * train_ratio).floor() as usize)
        .collect();
    let target = (manifest.len() as f64 * train_ratio).round() as usize;
    let mut total: usize = take.iter().sum();
    for (c, members) in by_class.iter().enumerate() {
        if total >= target {
            break;
        }
        let has_remainder = (members.len() as f64 * train_ratio).fract() > 0.0;
        if has_remainder && take[c] + 1 < members.len() {
            take[c] += 1;
            total += 1;
        }
    }
    let mut train = Vec::with_capacity(total);
    let mut val = Vec::with_capacity(manifest.len() - total);
    for (members, &t) in by_class.iter().zip(&take) {
        train.extend_from_slice(&members[..t]);
        val.extend_from_slice(&members[t..]);
    }
    Ok((manifest.subset(&train)?, manifest.subset(&val)?))
}

/// One mini-batch of normalised images.
#[derive(Clone, Debug)]
pub struct Batch<T> {
    /// `[b × 1 × S × S]`, pixels scaled by `1/255`.
    pub images: Tensor<T>,
    pub labels: Vec<usize>,
    /// Positions of the batch items in the source manifest.
    pub indices: Vec<usize>,
}

/// Converts one image to `[1 × 1 × S × S]` values in `[0, 1]`, resizing by
/// nearest neighbour if needed.
pub fn image_tensor<T: Scalar>(img: &GrayImage, size: usize) -> Result<Tensor<T>> {
    let img = img.resize_nearest(size, size);
    let scale = T::lit(1.0 / 255.0);
    let data = img
        .pixels()
        .iter()
        .map(|&p| T::from_u8(p).expect("u8 fits scalar") * scale)
        .collect();
    Tensor::new(&[1, 1, size, size], data)
}

/// Splits the manifest into batches of at most `batch_size`; the last one may
/// be short. With `shuffle = Some(seed)` the item order is a seeded
/// permutation, otherwise manifest order.
pub fn to_batches<T: Scalar>(
    manifest: &DatasetManifest,
    batch_size: usize,
    size: usize,
    shuffle: Option<u64>,
) -> Result<Vec<Batch<T>>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    manifest.check_consistency()?;
    let mut order: Vec<usize> = (0..manifest.len()).collect();
    if let Some(seed) = shuffle {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let plane = size * size;
    order
        .chunks(batch_size)
        .map(|idx| {
            let mut data = Vec::with_capacity(idx.len() * plane);
            for &i in idx {
                data.extend_from_slice(image_tensor::<T>(&manifest.items()[i].image, size)?.data());
            }
            Ok(Batch {
                images: Tensor::new(&[idx.len(), 1, size, size], data)?,
                labels: idx.iter().map(|&i| manifest.items()[i].label).collect(),
                indices: idx.to_vec(),
            })
        })
        .collect()
}
