//! MNIST IDX ingestion, 0/1 filtering, 28×28 → 16×16 area resampling and
//! a flat binary cache of encoded samples.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::classifier::EncodedSample;
use crate::error::{Error, Result};

pub const SIDE: usize = 28;
pub const OUT_SIDE: usize = 16;
pub const FEATURES: usize = OUT_SIDE * OUT_SIDE;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;
pub const CACHE_MAGIC: &[u8; 4] = b"QRB1";

/// File names probed inside a dataset directory, in load order.
pub const IDX_PAIRS: [(&str, &str); 2] = [
    ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
];

pub type Grid16 = [[f64; OUT_SIDE]; OUT_SIDE];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    pixels: Box<[[u8; SIDE]; SIDE]>,
    label: u8,
}

impl RawImage {
    pub fn new(pixels: [[u8; SIDE]; SIDE], label: u8) -> Result<Self> {
        if label >= 10 {
            return Err(Error::InvalidConfig(format!(
                "digit label {label} out of range"
            )));
        }
        Ok(Self {
            pixels: Box::new(pixels),
            label,
        })
    }

    /// From `SIDE * SIDE` row-major bytes.
    pub fn from_bytes(bytes: &[u8], label: u8) -> Result<Self> {
        if bytes.len() != SIDE * SIDE {
            return Err(Error::DimensionMismatch {
                expected: SIDE * SIDE,
                found: bytes.len(),
            });
        }
        let mut pixels = [[0u8; SIDE]; SIDE];
        for (row, chunk) in pixels.iter_mut().zip(bytes.chunks_exact(SIDE)) {
            row.copy_from_slice(chunk);
        }
        Self::new(pixels, label)
    }

    pub fn pixels(&self) -> &[[u8; SIDE]; SIDE] {
        &self.pixels
    }

    pub fn label(&self) -> u8 {
        self.label
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, needed: usize) -> Result<&'a [u8]> {
        let available = self.bytes.len() - self.offset;
        if available < needed {
            return Err(Error::Truncated {
                offset: self.offset,
                needed,
                available,
            });
        }
        let out = &self.bytes[self.offset..self.offset + needed];
        self.offset += needed;
        Ok(out)
    }

    fn u32_be(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u32_le(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }
}

fn expect_magic(r: &mut Reader, expected: u32) -> Result<()> {
    let found = r.u32_be()?;
    if found != expected {
        return Err(Error::BadMagic { expected, found });
    }
    Ok(())
}

/// Parses an IDX3 image stream into row-major pixel buffers.
pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<Vec<u8>>> {
    let mut r = Reader { bytes, offset: 0 };
    expect_magic(&mut r, IMAGES_MAGIC)?;
    let count = r.u32_be()? as usize;
    let rows = r.u32_be()? as usize;
    let cols = r.u32_be()? as usize;
    if rows != SIDE || cols != SIDE {
        return Err(Error::ImageGeometry { rows, cols });
    }
    (0..count)
        .map(|_| Ok(r.take(rows * cols)?.to_vec()))
        .collect()
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let mut r = Reader { bytes, offset: 0 };
    expect_magic(&mut r, LABELS_MAGIC)?;
    let count = r.u32_be()? as usize;
    Ok(r.take(count)?.to_vec())
}

/// Combines parsed image and label streams.
pub fn parse_idx(images: &[u8], labels: &[u8]) -> Result<Vec<RawImage>> {
    let pixels = parse_idx_images(images)?;
    let labels = parse_idx_labels(labels)?;
    if pixels.len() != labels.len() {
        return Err(Error::CountMismatch {
            images: pixels.len(),
            labels: labels.len(),
        });
    }
    pixels
        .iter()
        .zip(labels)
        .map(|(p, l)| RawImage::from_bytes(p, l))
        .collect()
}

pub fn load_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<Vec<RawImage>> {
    let read = |p: &Path| fs::read(p).map_err(|e| Error::io(p, e));
    parse_idx(&read(images_path.as_ref())?, &read(labels_path.as_ref())?)
}

/// Serializes images back into an (images, labels) IDX byte pair.
pub fn write_idx(images: &[RawImage]) -> (Vec<u8>, Vec<u8>) {
    let count = images.len() as u32;
    let mut img = Vec::with_capacity(16 + images.len() * SIDE * SIDE);
    for word in [IMAGES_MAGIC, count, SIDE as u32, SIDE as u32] {
        img.extend_from_slice(&word.to_be_bytes());
    }
    let mut lab = Vec::with_capacity(8 + images.len());
    lab.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&count.to_be_bytes());
    for im in images {
        im.pixels.iter().for_each(|row| img.extend_from_slice(row));
        lab.push(im.label);
    }
    (img, lab)
}

pub fn filter_binary(images: Vec<RawImage>) -> Vec<RawImage> {
    images.into_iter().filter(|im| im.label <= 1).collect()
}

/// `weights()[k]` lists `(input index, overlap / cell length)` for output
/// cell `k`, which spans `[k·s, (k+1)·s)` with `s = 28/16`.
fn weights() -> &'static [Vec<(usize, f64)>; OUT_SIDE] {
    static W: std::sync::OnceLock<[Vec<(usize, f64)>; OUT_SIDE]> = std::sync::OnceLock::new();
    W.get_or_init(|| {
        let cell = SIDE as f64 / OUT_SIDE as f64;
        std::array::from_fn(|k| {
            let (lo, hi) = (k as f64 * cell, (k + 1) as f64 * cell);
            (lo.floor() as usize..(hi.ceil() as usize).min(SIDE))
                .filter_map(|i| {
                    let overlap = (hi.min(i as f64 + 1.0) - lo.max(i as f64)).max(0.0);
                    (overlap > 0.0).then_some((i, overlap / cell))
                })
                .collect()
        })
    })
}

/// Area-average resampling of a real 28×28 grid.
pub fn downscale_grid(src: &[[f64; SIDE]; SIDE]) -> Grid16 {
    let w = weights();
    let mut out = [[0.0; OUT_SIDE]; OUT_SIDE];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, x) in row.iter_mut().enumerate() {
            *x = w[r]
                .iter()
                .flat_map(|&(i, wi)| w[c].iter().map(move |&(j, wj)| wi * wj * src[i][j]))
                .sum();
        }
    }
    out
}

pub fn downscale_16(img: &RawImage) -> Grid16 {
    let mut src = [[0.0; SIDE]; SIDE];
    for (dst, row) in src.iter_mut().zip(img.pixels.iter()) {
        for (d, &p) in dst.iter_mut().zip(row) {
            *d = p as f64;
        }
    }
    downscale_grid(&src)
}

/// Row-major flatten and L2-normalize.
pub fn to_sample(grid: &Grid16, label: u8) -> Result<EncodedSample> {
    EncodedSample::normalized(grid.iter().flatten().copied().collect(), label)
}

/// Filters, downscales and encodes; all-zero images are dropped.
pub fn preprocess(images: &[RawImage]) -> Vec<EncodedSample> {
    images
        .par_iter()
        .filter(|im| im.label <= 1)
        .filter_map(|im| to_sample(&downscale_16(im), im.label).ok())
        .collect()
}

/// Header (`QRB1`, u32 LE count, u32 LE dim), then per sample `dim`
/// little-endian f64 features and a label byte.
pub fn write_cache(samples: &[EncodedSample]) -> Result<Vec<u8>> {
    let dim = samples.first().map_or(FEATURES, |s| s.features().len());
    let mut out = Vec::with_capacity(12 + samples.len() * (dim * 8 + 1));
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&(samples.len() as u32).to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for s in samples {
        if s.features().len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: s.features().len(),
            });
        }
        s.features()
            .iter()
            .for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
        out.push(s.label());
    }
    Ok(out)
}

pub fn read_cache(bytes: &[u8]) -> Result<Vec<EncodedSample>> {
    let mut r = Reader { bytes, offset: 0 };
    let magic = r.take(4)?;
    if magic != CACHE_MAGIC {
        return Err(Error::BadMagic {
            expected: u32::from_be_bytes(*CACHE_MAGIC),
            found: u32::from_be_bytes(magic.try_into().expect("4 bytes")),
        });
    }
    let count = r.u32_le()? as usize;
    let dim = r.u32_le()? as usize;
    (0..count)
        .map(|_| {
            let features = r
                .take(dim * 8)?
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect();
            let label = r.take(1)?[0];
            EncodedSample::new(features, label)
        })
        .collect()
}

pub fn save_cache(samples: &[EncodedSample], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_cache(samples)?).map_err(|e| Error::io(path, e))
}

pub fn load_cache(path: impl AsRef<Path>) -> Result<Vec<EncodedSample>> {
    let path = path.as_ref();
    read_cache(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// Loads every IDX pair found in `dir`, in [`IDX_PAIRS`] order.
pub fn load_dir(dir: impl AsRef<Path>) -> Result<Vec<RawImage>> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
        ));
    }
    let mut images = Vec::new();
    let mut found = false;
    for (img, lab) in IDX_PAIRS {
        let (img, lab): (PathBuf, PathBuf) = (dir.join(img), dir.join(lab));
        if img.exists() && lab.exists() {
            found = true;
            images.extend(load_idx(&img, &lab)?);
        }
    }
    if !found {
        return Err(Error::io(
            dir.join(IDX_PAIRS[0].0),
            std::io::Error::new(std::io::ErrorKind::NotFound, "no IDX image/label pair"),
        ));
    }
    Ok(images)
}

/// A seeded train/test partition of encoded 0/1 samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<EncodedSample>,
    pub test: Vec<EncodedSample>,
}

/// Shuffles `samples` with `seed` and takes the first `train` then the next
/// `test` items.
pub fn split(
    mut samples: Vec<EncodedSample>,
    train: usize,
    test: usize,
    seed: u64,
) -> Result<Split> {
    if samples.len() < train + test {
        return Err(Error::InvalidConfig(format!(
            "need {} samples for a {train}/{test} split, have {}",
            train + test,
            samples.len()
        )));
    }
    samples.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test_set = samples[train..train + test].to_vec();
    samples.truncate(train);
    Ok(Split {
        train: samples,
        test: test_set,
    })
}

/// Loads a dataset directory and produces a seeded 0/1 split.
pub fn load_split(dir: impl AsRef<Path>, train: usize, test: usize, seed: u64) -> Result<Split> {
    split(preprocess(&load_dir(dir)?), train, test, seed)
}
