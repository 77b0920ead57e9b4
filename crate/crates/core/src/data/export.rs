//! Sequence dumps and PNG frame grids.
//!
//! Dump layout: four little-endian u32 values `(count, 20, 64, 64)`, then
//! `count · 20 · 64 · 64` bytes, each `round(255 · pixel)`, sequence-major,
//! frame-major, row-major.
//!
//! Grids: cells of 64×64 separated and surrounded by a white margin of
//! `GRID_MARGIN` pixels; absent cells are white.

use std::io::{Read, Write};
use std::path::Path;

use image::{GrayImage, Luma};

use super::moving::{VideoSequence, FRAME_PIXELS, FRAME_SIZE, SEQUENCE_LENGTH};
use crate::error::{Error, Result};

pub const GRID_MARGIN: usize = 2;

pub fn quantize(v: f32) -> u8 {
    (255.0 * v.clamp(0.0, 1.0)).round() as u8
}

pub fn write_dump<W: Write>(mut out: W, sequences: &[VideoSequence]) -> Result<()> {
    let header = [
        sequences.len() as u32,
        SEQUENCE_LENGTH as u32,
        FRAME_SIZE as u32,
        FRAME_SIZE as u32,
    ];
    let mut bytes = Vec::with_capacity(16 + sequences.len() * SEQUENCE_LENGTH * FRAME_PIXELS);
    for h in header {
        bytes.extend_from_slice(&h.to_le_bytes());
    }
    for s in sequences {
        bytes.extend(s.frames.iter().map(|&v| quantize(v)));
    }
    out.write_all(&bytes).map_err(|e| Error::io("writing sequence dump", e))
}

/// Reads a dump back as `count` sequences of quantized frames scaled to [0, 1].
pub fn read_dump<R: Read>(mut input: R) -> Result<Vec<Vec<f32>>> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io("reading sequence dump", e))?;
    if bytes.len() < 16 {
        return Err(Error::Data("sequence dump: truncated header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap()) as usize;
    let (count, frames, h, w) = (word(0), word(1), word(2), word(3));
    let per = frames * h * w;
    if bytes.len() - 16 != count * per {
        return Err(Error::Data(format!(
            "sequence dump: header promises {count}×{frames}×{h}×{w} bytes, file holds {}",
            bytes.len() - 16
        )));
    }
    Ok(bytes[16..]
        .chunks_exact(per.max(1))
        .take(count)
        .map(|c| c.iter().map(|&b| b as f32 / 255.0).collect())
        .collect())
}

/// Pixel size `(width, height)` of a grid with `rows × cols` cells.
pub fn grid_size(rows: usize, cols: usize) -> (usize, usize) {
    (
        cols * FRAME_SIZE + (cols + 1) * GRID_MARGIN,
        rows * FRAME_SIZE + (rows + 1) * GRID_MARGIN,
    )
}

/// Lays out 64×64 frames in a grid; `None` cells stay white.
pub fn render_grid(cells: &[Vec<Option<&[f32]>>]) -> Result<GrayImage> {
    let rows = cells.len();
    let cols = cells.iter().map(Vec::len).max().unwrap_or(0);
    let (w, h) = grid_size(rows, cols);
    let mut img = GrayImage::from_pixel(w as u32, h as u32, Luma([255]));
    for (r, row) in cells.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            let Some(frame) = cell else { continue };
            if frame.len() != FRAME_PIXELS {
                return Err(Error::InvalidArgument(format!(
                    "grid cell ({r}, {c}) has {} pixels, expected {FRAME_PIXELS}",
                    frame.len()
                )));
            }
            let x0 = GRID_MARGIN + c * (FRAME_SIZE + GRID_MARGIN);
            let y0 = GRID_MARGIN + r * (FRAME_SIZE + GRID_MARGIN);
            for (i, &v) in frame.iter().enumerate() {
                let (y, x) = (i / FRAME_SIZE, i % FRAME_SIZE);
                img.put_pixel((x0 + x) as u32, (y0 + y) as u32, Luma([quantize(v)]));
            }
        }
    }
    Ok(img)
}

/// Two rows: the 20 ground-truth frames, then 10 blanks followed by the 10
/// predicted future frames (when given).
pub fn prediction_grid(sequence: &VideoSequence, predictions: Option<&[Vec<f32>]>) -> Result<GrayImage> {
    let top: Vec<Option<&[f32]>> = (0..SEQUENCE_LENGTH).map(|t| Some(sequence.frame(t))).collect();
    let mut bottom: Vec<Option<&[f32]>> = vec![None; SEQUENCE_LENGTH];
    if let Some(p) = predictions {
        for (slot, frame) in bottom[SEQUENCE_LENGTH - p.len().min(SEQUENCE_LENGTH)..]
            .iter_mut()
            .zip(p)
        {
            *slot = Some(frame.as_slice());
        }
    }
    render_grid(&[top, bottom])
}

pub fn save_png(img: &GrayImage, path: &Path) -> Result<()> {
    img.save(path)
        .map_err(|e| Error::Data(format!("writing {}: {e}", path.display())))
}
