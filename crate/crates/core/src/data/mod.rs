//! Corpus handling: pixmap I/O, augmentation, synthetic generation,
//! stratified splitting and batching.

pub mod augment;
pub mod dataset;
pub mod image;
pub mod pnm;
pub mod synth;

pub use augment::{adjust_brightness, augment_dataset, rotate, scale_image, AugmentSpec};
pub use dataset::{
    image_tensor, load_dataset, stratified_split, to_batches, write_corpus, write_manifest_csv,
    Batch, DatasetManifest, LabeledImage, ManifestItem, Provenance, MANIFEST_FILE,
};
pub use image::{luma, GrayImage};
pub use synth::{synth_corpus, synth_generate, DistressClass};
