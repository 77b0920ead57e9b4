//! MNIST IDX files: big-endian header, then raw unsigned bytes.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;
pub const DIGIT_SIZE: usize = 28;
pub const DIGIT_PIXELS: usize = DIGIT_SIZE * DIGIT_SIZE;

/// One 28×28 MNIST digit with intensities scaled to [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct DigitSprite {
    pub pixels: Box<[f32; DIGIT_PIXELS]>,
    pub label: u8,
}

impl DigitSprite {
    pub fn new(pixels: &[f32], label: u8) -> Result<Self> {
        let pixels: Box<[f32; DIGIT_PIXELS]> = pixels
            .to_vec()
            .into_boxed_slice()
            .try_into()
            .map_err(|_| Error::Data(format!("sprite must have {DIGIT_PIXELS} pixels")))?;
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Data("sprite pixel outside [0, 1]".into()));
        }
        if label > 9 {
            return Err(Error::Data(format!("label {label} outside 0..=9")));
        }
        Ok(DigitSprite { pixels, label })
    }

    pub fn pixel_sum(&self) -> f64 {
        self.pixels.iter().map(|&p| p as f64).sum()
    }
}

fn read_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Data(format!("{what}: truncated header")))
}

/// Parses an IDX3 image file into `(count, rows, cols, pixels)`.
pub fn parse_images(bytes: &[u8]) -> Result<(usize, usize, usize, &[u8])> {
    let magic = read_u32(bytes, 0, "images")?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Data(format!(
            "images: magic number {magic:#010x}, expected {IMAGES_MAGIC:#010x}"
        )));
    }
    let count = read_u32(bytes, 4, "images")? as usize;
    let rows = read_u32(bytes, 8, "images")? as usize;
    let cols = read_u32(bytes, 12, "images")? as usize;
    let body = &bytes[16..];
    let want = count * rows * cols;
    if body.len() != want {
        return Err(Error::Data(format!(
            "images: header promises {count}×{rows}×{cols} = {want} bytes, file holds {}",
            body.len()
        )));
    }
    Ok((count, rows, cols, body))
}

/// Parses an IDX1 label file.
pub fn parse_labels(bytes: &[u8]) -> Result<&[u8]> {
    let magic = read_u32(bytes, 0, "labels")?;
    if magic != LABELS_MAGIC {
        return Err(Error::Data(format!(
            "labels: magic number {magic:#010x}, expected {LABELS_MAGIC:#010x}"
        )));
    }
    let count = read_u32(bytes, 4, "labels")? as usize;
    let body = &bytes[8..];
    if body.len() != count {
        return Err(Error::Data(format!(
            "labels: header promises {count} labels, file holds {}",
            body.len()
        )));
    }
    if let Some(bad) = body.iter().find(|&&l| l > 9) {
        return Err(Error::Data(format!("labels: value {bad} outside 0..=9")));
    }
    Ok(body)
}

pub fn decode_mnist(images: &[u8], labels: &[u8]) -> Result<Vec<DigitSprite>> {
    let (count, rows, cols, pixels) = parse_images(images)?;
    if rows != DIGIT_SIZE || cols != DIGIT_SIZE {
        return Err(Error::Data(format!(
            "images are {rows}×{cols}, expected {DIGIT_SIZE}×{DIGIT_SIZE}"
        )));
    }
    let labels = parse_labels(labels)?;
    if labels.len() != count {
        return Err(Error::Data(format!("{count} images but {} labels", labels.len())));
    }
    Ok(pixels
        .chunks_exact(DIGIT_PIXELS)
        .zip(labels)
        .map(|(chunk, &label)| {
            let mut px = Box::new([0.0f32; DIGIT_PIXELS]);
            for (d, &s) in px.iter_mut().zip(chunk) {
                *d = s as f32 / 255.0;
            }
            DigitSprite { pixels: px, label }
        })
        .collect())
}

pub fn load_mnist(images_path: &Path, labels_path: &Path) -> Result<Vec<DigitSprite>> {
    let read = |p: &Path| fs::read(p).map_err(|e| Error::io(format!("reading {}", p.display()), e));
    let images = read(images_path)?;
    let labels = read(labels_path)?;
    decode_mnist(&images, &labels).map_err(|e| match e {
        Error::Data(msg) => Error::Data(format!("{}: {msg}", images_path.display())),
        other => other,
    })
}

/// Encodes sprites back into IDX image and label files (used to build
/// fixtures).
pub fn encode_mnist(sprites: &[DigitSprite]) -> (Vec<u8>, Vec<u8>) {
    let mut images = Vec::with_capacity(16 + sprites.len() * DIGIT_PIXELS);
    images.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    images.extend_from_slice(&(sprites.len() as u32).to_be_bytes());
    images.extend_from_slice(&(DIGIT_SIZE as u32).to_be_bytes());
    images.extend_from_slice(&(DIGIT_SIZE as u32).to_be_bytes());
    let mut labels = Vec::with_capacity(8 + sprites.len());
    labels.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    labels.extend_from_slice(&(sprites.len() as u32).to_be_bytes());
    for s in sprites {
        images.extend(s.pixels.iter().map(|&p| (p * 255.0).round() as u8));
        labels.push(s.label);
    }
    (images, labels)
}
