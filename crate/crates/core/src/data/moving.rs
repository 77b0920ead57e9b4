//! Bouncing-digit video synthesis.

use std::f64::consts::PI;

use super::idx::{DigitSprite, DIGIT_SIZE};
use super::rng::{KeyedRng, StreamKey};
use crate::error::{Error, Result};

pub const FRAME_SIZE: usize = 64;
pub const FRAME_PIXELS: usize = FRAME_SIZE * FRAME_SIZE;
pub const SEQUENCE_LENGTH: usize = 20;
pub const PAST_FRAMES: usize = 10;
pub const DIGITS_PER_SEQUENCE: usize = 2;
/// Largest top-left coordinate that keeps a sprite inside the frame.
pub const POSITION_LIMIT: f64 = (FRAME_SIZE - DIGIT_SIZE) as f64;
pub const MIN_SPEED: f64 = 2.0;
pub const MAX_SPEED: f64 = 5.0;

/// Continuous top-left position and constant-magnitude velocity of a sprite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DigitTrajectory {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

fn reflect(pos: &mut f64, vel: &mut f64, limit: f64) {
    if *pos < 0.0 {
        *pos = -*pos;
        *vel = -*vel;
    } else if *pos > limit {
        *pos = 2.0 * limit - *pos;
        *vel = -*vel;
    }
}

impl DigitTrajectory {
    /// Moves one frame; a coordinate that overshoots `[0, limit]` is mirrored
    /// back and its velocity component negated.
    pub fn advance(&mut self, limit: f64) {
        self.x += self.vx;
        self.y += self.vy;
        reflect(&mut self.x, &mut self.vx, limit);
        reflect(&mut self.y, &mut self.vy, limit);
    }

    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    /// Integer paste position.
    pub fn cell(&self) -> (usize, usize) {
        (self.x.round() as usize, self.y.round() as usize)
    }
}

/// Record of one digit's path through a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitPath {
    pub sprite_index: usize,
    pub label: u8,
    /// State at each of the frames.
    pub states: Vec<DigitTrajectory>,
}

/// Twenty 64×64 frames in [0, 1]: ten past, ten future.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoSequence {
    pub frames: Vec<f32>,
    pub key: StreamKey,
    pub digits: Vec<DigitPath>,
}

impl VideoSequence {
    pub fn frame(&self, t: usize) -> &[f32] {
        &self.frames[t * FRAME_PIXELS..(t + 1) * FRAME_PIXELS]
    }

    pub fn past(&self) -> impl Iterator<Item = &[f32]> {
        (0..PAST_FRAMES).map(|t| self.frame(t))
    }

    pub fn future(&self) -> impl Iterator<Item = &[f32]> {
        (PAST_FRAMES..SEQUENCE_LENGTH).map(|t| self.frame(t))
    }
}

/// Pastes `sprite` with its top-left at `(col, row)`, keeping the per-pixel
/// maximum with what is already there.
pub fn paste_max(frame: &mut [f32], sprite: &DigitSprite, col: usize, row: usize) {
    for r in 0..DIGIT_SIZE {
        let dst = &mut frame[(row + r) * FRAME_SIZE + col..(row + r) * FRAME_SIZE + col + DIGIT_SIZE];
        let src = &sprite.pixels[r * DIGIT_SIZE..(r + 1) * DIGIT_SIZE];
        for (d, &s) in dst.iter_mut().zip(src) {
            *d = d.max(s);
        }
    }
}

/// Draws one sequence. Per digit, in order: sprite index, x, y, direction
/// angle in [0, 2π), speed in [2, 5).
pub fn generate_sequence(pool: &[DigitSprite], key: StreamKey) -> Result<VideoSequence> {
    if pool.is_empty() {
        return Err(Error::Data(
            "cannot generate sequences from an empty sprite pool".into(),
        ));
    }
    let mut rng = KeyedRng::new(key);
    let mut tracks: Vec<(usize, DigitTrajectory)> = (0..DIGITS_PER_SEQUENCE)
        .map(|_| {
            let sprite = rng.index(pool.len());
            let x = rng.uniform() * POSITION_LIMIT;
            let y = rng.uniform() * POSITION_LIMIT;
            let theta = rng.uniform() * 2.0 * PI;
            let speed = MIN_SPEED + rng.uniform() * (MAX_SPEED - MIN_SPEED);
            (
                sprite,
                DigitTrajectory {
                    x,
                    y,
                    vx: speed * theta.cos(),
                    vy: speed * theta.sin(),
                },
            )
        })
        .collect();

    let mut frames = vec![0.0f32; SEQUENCE_LENGTH * FRAME_PIXELS];
    let mut digits: Vec<DigitPath> = tracks
        .iter()
        .map(|&(i, _)| DigitPath {
            sprite_index: i,
            label: pool[i].label,
            states: Vec::with_capacity(SEQUENCE_LENGTH),
        })
        .collect();
    for t in 0..SEQUENCE_LENGTH {
        let frame = &mut frames[t * FRAME_PIXELS..(t + 1) * FRAME_PIXELS];
        for ((sprite, traj), path) in tracks.iter_mut().zip(digits.iter_mut()) {
            let (col, row) = traj.cell();
            paste_max(frame, &pool[*sprite], col, row);
            path.states.push(*traj);
            traj.advance(POSITION_LIMIT);
        }
    }
    Ok(VideoSequence { frames, key, digits })
}
