//! Video ladder models: VLN, VLN-ResNet and the VLN-BL / VLN-BL-FF baselines.

pub mod config;
pub mod convlstm;
pub mod decoder;
pub mod encoder;
pub mod layers;
pub mod merge;
pub mod params;
pub mod vln;

pub use config::{ModelConfig, Variant};
pub use convlstm::{convlstm_step, ConvLstmState, ConvLstmWeights};
pub use layers::{BnMode, ShapeTrace};
pub use merge::{lateral_merge, MergeWeights};
pub use params::{ParamStore, Parameter};
pub use vln::{ModelState, Vln};
