//! Dataset invariants shared by the dataset tests and the acceptance run.

use vln::data::{
    DigitSprite, MovingMnist, StreamKind, VideoSequence, DIGIT_SIZE, FRAME_PIXELS, FRAME_SIZE, POSITION_LIMIT,
    SEQUENCE_LENGTH,
};

const SPEED_TOLERANCE: f64 = 1e-9;

/// Checks one sequence against its recorded digit paths. Every frame must
/// equal the max-composite of the sprites at their rounded positions.
pub fn check_sequence(seq: &VideoSequence, pool: &[DigitSprite]) -> Result<(), String> {
    if seq.frames.len() != SEQUENCE_LENGTH * FRAME_PIXELS {
        return Err(format!(
            "{} values, expected {}",
            seq.frames.len(),
            SEQUENCE_LENGTH * FRAME_PIXELS
        ));
    }
    if let Some(v) = seq.frames.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(format!("pixel {v} outside [0, 1]"));
    }
    for d in &seq.digits {
        if d.states.len() != SEQUENCE_LENGTH {
            return Err(format!("digit has {} states", d.states.len()));
        }
        let speed = d.states[0].speed();
        if !(2.0..5.0).contains(&speed) {
            return Err(format!("initial speed {speed} outside [2, 5)"));
        }
        for s in &d.states {
            if !(0.0..=POSITION_LIMIT).contains(&s.x) || !(0.0..=POSITION_LIMIT).contains(&s.y) {
                return Err(format!("digit box at ({}, {}) leaves the frame", s.x, s.y));
            }
            let (c, r) = s.cell();
            if c + DIGIT_SIZE > FRAME_SIZE || r + DIGIT_SIZE > FRAME_SIZE {
                return Err(format!("paste cell ({c}, {r}) leaves the frame"));
            }
            if (s.speed() - speed).abs() > SPEED_TOLERANCE {
                return Err(format!("speed changed from {speed} to {}", s.speed()));
            }
        }
    }
    for t in 0..SEQUENCE_LENGTH {
        let mut expect = vec![0.0f32; FRAME_PIXELS];
        for d in &seq.digits {
            let (c, r) = d.states[t].cell();
            vln::data::moving::paste_max(&mut expect, &pool[d.sprite_index], c, r);
        }
        if expect != seq.frame(t) {
            return Err(format!("frame {t} differs from the composite of its digit paths"));
        }
    }
    Ok(())
}

/// Invariants over the first `count` sequences of a stream, including
/// bit-identical regeneration.
pub fn check_stream(data: &MovingMnist, kind: StreamKind, epoch: u64, count: usize) -> Result<(), String> {
    for (i, seq) in data.epoch_stream(kind, epoch, count).enumerate() {
        let seq = seq.map_err(|e| e.to_string())?;
        check_sequence(&seq, data.pool(kind)).map_err(|e| format!("sequence {i}: {e}"))?;
        let again = data.sequence(kind, epoch, i as u64).map_err(|e| e.to_string())?;
        if again
            .frames
            .iter()
            .map(|v| v.to_bits())
            .ne(seq.frames.iter().map(|v| v.to_bits()))
        {
            return Err(format!("sequence {i} is not bit-reproducible"));
        }
    }
    Ok(())
}

/// Train/validation sizes and per-class validation share in percent.
pub fn split_summary(data: &MovingMnist) -> (usize, usize, Vec<f64>) {
    let mut per_class = Vec::new();
    for c in 0..10u8 {
        let t = data.train.iter().filter(|s| s.label == c).count();
        let v = data.validation.iter().filter(|s| s.label == c).count();
        per_class.push(100.0 * v as f64 / (t + v) as f64);
    }
    (data.train.len(), data.validation.len(), per_class)
}
