//! Ladder model: encoder, per-level laterals (conv-LSTM and/or feedforward)
//! merged into a top-down decoder.

use std::fmt::Write as _;

use super::config::ModelConfig;
use super::convlstm::{ConvLstmCell, ConvLstmState};
use super::decoder::Decoder;
use super::encoder::Encoder;
use super::layers::{BnMode, Conv, Ctx, ShapeTrace};
use super::merge::Merge;
use super::params::{ParamBuilder, ParamStore, Parameter};
use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// Lateral pathway of one level.
#[derive(Debug, Clone)]
pub struct Lateral {
    pub lstm: Option<ConvLstmCell>,
    /// Linear 1×1 map from the LSTM width to the level width when they differ.
    pub proj: Option<Conv>,
    /// `None` passes the decoder input through unchanged.
    pub merge: Option<Merge>,
    pub feedforward: bool,
}

/// Recurrent state of every level; `None` is the all-zero state (or a level
/// without a conv-LSTM).
#[derive(Debug, Clone)]
pub struct ModelState<T: Element = f32> {
    pub lstm: Vec<Option<ConvLstmState<T>>>,
}

impl<T: Element> ModelState<T> {
    pub fn zeros(levels: usize) -> Self {
        ModelState {
            lstm: vec![None; levels],
        }
    }

    pub fn detach(&self) -> Self {
        ModelState {
            lstm: self
                .lstm
                .iter()
                .map(|s| s.as_ref().map(ConvLstmState::detach))
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Vln<T: Element = f32> {
    config: ModelConfig,
    store: ParamStore<T>,
    encoder: Encoder,
    laterals: Vec<Lateral>,
    decoder: Decoder,
    bn_mode: BnMode,
}

impl Vln<f32> {
    /// Builds and initializes a model. All random draws come from one stream
    /// seeded by `seed`, consumed in construction order.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut pb = ParamBuilder::new(seed);
        let encoder = Encoder::new(&config, &mut pb);
        let levels = config.levels();
        let laterals = (0..levels)
            .map(|l| {
                let prefix = format!("lateral{}", l + 1);
                let c = config.level_channels(l);
                let hidden = config.lstm_channels[l];
                let lstm = (hidden > 0).then(|| ConvLstmCell::new(&mut pb, &format!("{prefix}.lstm"), c, hidden));
                let proj =
                    (hidden > 0 && hidden != c).then(|| Conv::pointwise(&mut pb, &format!("{prefix}.proj"), hidden, c));
                let feedforward = config.feedforward[l];
                let above = l + 1 < levels;
                let merge = (lstm.is_some() || feedforward).then(|| {
                    let first_in = if above { c } else { 0 } + if lstm.is_some() { c } else { 0 };
                    let ff_in = if feedforward { c } else { 0 };
                    Merge::new(&mut pb, &format!("{prefix}.merge"), first_in, ff_in, c)
                });
                Lateral {
                    lstm,
                    proj,
                    merge,
                    feedforward,
                }
            })
            .collect();
        let decoder = Decoder::new(&config, &mut pb);
        Ok(Vln {
            config,
            store: pb.finish(),
            encoder,
            laterals,
            decoder,
            bn_mode: BnMode::Train,
        })
    }
}

impl<T: Element> Vln<T> {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore<T> {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.store
    }

    pub fn parameters(&self) -> &[Parameter<T>] {
        self.store.parameters()
    }

    pub fn parameter_count(&self) -> usize {
        self.store.count()
    }

    pub fn laterals(&self) -> &[Lateral] {
        &self.laterals
    }

    pub fn zero_grads(&self) {
        self.store.zero_grads();
    }

    pub fn bn_mode(&self) -> BnMode {
        self.bn_mode
    }

    pub fn set_bn_mode(&mut self, mode: BnMode) {
        self.bn_mode = mode;
    }

    pub fn levels(&self) -> usize {
        self.config.levels()
    }

    pub fn zero_state(&self) -> ModelState<T> {
        ModelState::zeros(self.levels())
    }

    /// Copy of the model in another precision.
    pub fn cast<U: Element>(&self) -> Vln<U> {
        Vln {
            config: self.config.clone(),
            store: self.store.cast(),
            encoder: self.encoder.clone(),
            laterals: self.laterals.clone(),
            decoder: self.decoder.clone(),
            bn_mode: self.bn_mode,
        }
    }

    fn ctx(&self) -> Ctx<'_, T> {
        Ctx {
            store: &self.store,
            bn: self.bn_mode,
            slope: T::from_f64(self.config.leaky_slope),
            bn_epsilon: self.config.bn_epsilon,
            bn_momentum: self.config.bn_momentum,
        }
    }

    fn check_inputs(&self, frame: &Tensor<T>, state: &ModelState<T>) -> Result<()> {
        let s = self.config.frame_size;
        let sh = frame.shape();
        if sh.len() != 4 || sh[1] != 1 || sh[2] != s || sh[3] != s {
            return Err(Error::shape(
                "model_step",
                format!("frame must be [N, 1, {s}, {s}], got {sh:?}"),
            ));
        }
        if state.lstm.len() != self.levels() {
            return Err(Error::shape(
                "model_step",
                format!("state has {} levels, model has {}", state.lstm.len(), self.levels()),
            ));
        }
        for (l, (st, lat)) in state.lstm.iter().zip(&self.laterals).enumerate() {
            if st.is_some() && lat.lstm.is_none() {
                return Err(Error::shape(
                    "model_step",
                    format!("state holds a conv-LSTM state for level {} which has none", l + 1),
                ));
            }
        }
        Ok(())
    }

    /// Encoder plus conv-LSTMs: returns the per-level features and the new
    /// state.
    fn lower(
        &self,
        ctx: &Ctx<'_, T>,
        frame: &Tensor<T>,
        state: &ModelState<T>,
        trace: &mut ShapeTrace,
    ) -> Result<(Vec<Tensor<T>>, ModelState<T>)> {
        self.check_inputs(frame, state)?;
        let zs = self.encoder.forward(ctx, frame, trace)?;
        let mut next = ModelState::zeros(self.levels());
        for (l, (lat, z)) in self.laterals.iter().zip(&zs).enumerate() {
            if let Some(cell) = &lat.lstm {
                let s = cell.step(ctx, z, state.lstm[l].as_ref())?;
                trace.record(|| format!("lateral{}.h", l + 1), &s.hidden);
                trace.record(|| format!("lateral{}.c", l + 1), &s.cell);
                next.lstm[l] = Some(s);
            }
        }
        Ok((zs, next))
    }

    /// Consumes a frame without decoding; used for warm-up steps whose
    /// predictions are discarded.
    pub fn advance(&self, frame: &Tensor<T>, state: &ModelState<T>) -> Result<ModelState<T>> {
        let ctx = self.ctx();
        Ok(self.lower(&ctx, frame, state, &mut ShapeTrace::disabled())?.1)
    }

    /// One prediction step: `(x̂_{t+1}, new state)`.
    pub fn step(&self, frame: &Tensor<T>, state: &ModelState<T>) -> Result<(Tensor<T>, ModelState<T>)> {
        self.step_traced(frame, state, &mut ShapeTrace::disabled())
    }

    pub fn step_traced(
        &self,
        frame: &Tensor<T>,
        state: &ModelState<T>,
        trace: &mut ShapeTrace,
    ) -> Result<(Tensor<T>, ModelState<T>)> {
        let ctx = self.ctx();
        trace.record(|| "input".into(), frame);
        let (zs, next) = self.lower(&ctx, frame, state, trace)?;
        let mut above: Option<Tensor<T>> = None;
        for l in (0..self.levels()).rev() {
            let lat = &self.laterals[l];
            let h = match (&next.lstm[l], &lat.proj) {
                (Some(s), Some(p)) => {
                    let y = p.forward(&ctx, &s.hidden)?;
                    trace.record(|| format!("lateral{}.proj", l + 1), &y);
                    Some(y)
                }
                (Some(s), None) => Some(s.hidden.clone()),
                (None, _) => None,
            };
            let z = lat.feedforward.then_some(&zs[l]);
            let merged = match &lat.merge {
                Some(m) => m.forward(&ctx, above.as_ref(), h.as_ref(), z)?,
                None => above.clone().ok_or_else(|| {
                    Error::Config(format!("level {} has no lateral input and nothing above it", l + 1))
                })?,
            };
            trace.record(|| format!("lateral{}.merged", l + 1), &merged);
            above = Some(self.decoder.level_forward(&ctx, l, &merged, trace)?);
        }
        let prediction = above.expect("at least one level");
        trace.record(|| "prediction".into(), &prediction);
        Ok((prediction, next))
    }

    /// Records the shape of every intermediate tensor for a zero input batch.
    pub fn trace_shapes(&self, batch: usize) -> Result<ShapeTrace> {
        let _g = crate::tensor::no_grad();
        let s = self.config.frame_size;
        let frame = Tensor::zeros(&[batch, 1, s, s]);
        let mut probe = self.clone();
        probe.set_bn_mode(BnMode::Train);
        let mut trace = ShapeTrace::enabled();
        let (_, state) = probe.step_traced(&frame, &probe.zero_state(), &mut ShapeTrace::disabled())?;
        probe.step_traced(&frame, &state, &mut trace)?;
        Ok(trace)
    }

    /// Parameter listing: one `name shape count` line each, then the total.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "variant {}", self.config.variant);
        let width = self.parameters().iter().map(|p| p.name.len()).max().unwrap_or(0);
        for p in self.parameters() {
            let _ = writeln!(
                out,
                "{:<width$}  {:<16}  {:>9}",
                p.name,
                format!("{:?}", p.value.shape()),
                p.value.numel()
            );
        }
        let _ = writeln!(out, "total parameters {}", self.parameter_count());
        out
    }
}
