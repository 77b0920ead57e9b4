//! Moving MNIST: IDX parsing, stratified splitting, deterministic sequence
//! synthesis and export.

pub mod export;
pub mod fetch;
pub mod idx;
pub mod moving;
pub mod rng;
pub mod split;
pub mod stream;

pub use idx::{load_mnist, DigitSprite, DIGIT_PIXELS, DIGIT_SIZE};
pub use moving::{
    generate_sequence, DigitPath, DigitTrajectory, VideoSequence, FRAME_PIXELS, FRAME_SIZE, PAST_FRAMES,
    POSITION_LIMIT, SEQUENCE_LENGTH,
};
pub use rng::{KeyedRng, Purpose, StreamKey};
pub use split::{stratified_split, Split};
pub use stream::{default_count, MovingMnist, StreamKind};
