//! Deterministic training loop with resumable state and per-epoch history.

use alloc::format;
use alloc::vec::Vec;

use crate::data::{batch_indices, Dataset, SemanticProvider, Split};
use crate::encoder::{encoder_gradients_with, init_params, GradientOptions, SharedEncoderConfig, SharedEncoderParams, Sharing};
use crate::error::{Error, Result};
use crate::metrics::{alignment_score, embed_rows, modality_gap};
use crate::objectives::{LossBreakdown, LossConfig};
use crate::optim::{lr_at, optimizer_step, AdamWConfig, OptimizerState};

/// Warmup length used when none is configured, as a fraction of all steps.
pub const DEFAULT_WARMUP_FRACTION: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    /// `None` means [`DEFAULT_WARMUP_FRACTION`] of the total step count.
    pub warmup_steps: Option<u64>,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub loss: LossConfig,
    pub model: SharedEncoderConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let o = AdamWConfig::default();
        Self {
            epochs: 30,
            batch_size: 64,
            base_lr: 1e-3,
            warmup_steps: None,
            weight_decay: o.weight_decay,
            beta1: o.beta1,
            beta2: o.beta2,
            eps: o.eps,
            loss: LossConfig::alignclip(),
            model: SharedEncoderConfig::toy(Sharing::Shared),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.epochs == 0 {
            return fail("epochs must be >= 1");
        }
        if self.batch_size < 2 {
            return Err(Error::BatchTooSmall { got: self.batch_size, min: 2 });
        }
        if !(self.base_lr > 0.0) || !self.base_lr.is_finite() {
            return fail("base_lr must be positive");
        }
        if !(self.weight_decay >= 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return fail("weight_decay must be >= 0 and betas in [0, 1)");
        }
        if !(self.eps > 0.0) {
            return fail("eps must be positive");
        }
        self.loss.validate()?;
        self.model.validate()
    }

    pub fn adamw(&self) -> AdamWConfig {
        AdamWConfig {
            weight_decay: self.weight_decay,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    pub fn warmup_for(&self, total_steps: u64) -> u64 {
        self.warmup_steps
            .unwrap_or_else(|| crate::math::round(total_steps as f64 * DEFAULT_WARMUP_FRACTION) as u64)
    }
}

/// Errors unless the model can consume the dataset's images and captions.
pub fn check_compatible(model: &SharedEncoderConfig, dataset: &Dataset) -> Result<()> {
    if model.image_size != dataset.image_size() {
        return Err(Error::ShapeMismatch(format!(
            "model expects {}px images, dataset has {}px",
            model.image_size,
            dataset.image_size()
        )));
    }
    if model.vocab_size < dataset.config.vocab.size() {
        return Err(Error::ShapeMismatch(format!(
            "model vocabulary {} is smaller than the dataset's {}",
            model.vocab_size,
            dataset.config.vocab.size()
        )));
    }
    let longest = dataset.captions.iter().map(Vec::len).max().unwrap_or(0);
    if longest > model.max_seq_len {
        return Err(Error::ShapeMismatch(format!(
            "captions of {longest} tokens exceed max_seq_len {}",
            model.max_seq_len
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Optimizer steps completed so far.
    pub step: u64,
    /// Mean over the epoch's batches.
    pub loss: LossBreakdown,
    pub val_alignment: f64,
    pub val_gap: f64,
    /// Rate used by the last step of the epoch.
    pub lr: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunHistory {
    pub records: Vec<EpochRecord>,
}

/// Everything needed to continue a run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub params: SharedEncoderParams,
    pub optimizer: OptimizerState,
    pub history: RunHistory,
    /// Sum of the current epoch's batch losses.
    pub epoch_sum: LossBreakdown,
    pub epoch_batches: u64,
}

impl TrainState {
    pub fn new(params: SharedEncoderParams) -> Self {
        Self {
            optimizer: OptimizerState::new(&params),
            params,
            history: RunHistory::default(),
            epoch_sum: LossBreakdown::default(),
            epoch_batches: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.optimizer.step
    }
}

/// Shuffle seed of one epoch.
pub fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    let mut z = seed ^ (epoch as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn accumulate(sum: &mut LossBreakdown, b: &LossBreakdown) {
    sum.clip += b.clip;
    sum.crsep += b.crsep;
    sum.imsep_image += b.imsep_image;
    sum.imsep_text += b.imsep_text;
    sum.total += b.total;
}

fn mean(sum: &LossBreakdown, n: u64) -> LossBreakdown {
    let n = n.max(1) as f64;
    LossBreakdown {
        clip: sum.clip / n,
        crsep: sum.crsep / n,
        imsep_image: sum.imsep_image / n,
        imsep_text: sum.imsep_text / n,
        total: sum.total / n,
    }
}

pub struct Trainer<'a> {
    cfg: TrainConfig,
    dataset: &'a Dataset,
    provider: &'a dyn SemanticProvider,
    state: TrainState,
    steps_per_epoch: u64,
    total_steps: u64,
    warmup_steps: u64,
    val_rows: Vec<usize>,
    order: Option<(usize, Vec<Vec<usize>>)>,
    parallel: bool,
}

impl<'a> Trainer<'a> {
    /// Fresh run with parameters initialized from `cfg.seed`.
    pub fn new(cfg: TrainConfig, dataset: &'a Dataset, provider: &'a dyn SemanticProvider) -> Result<Self> {
        cfg.validate()?;
        let params = init_params(&cfg.model, cfg.seed)?;
        Self::resume(cfg, dataset, provider, TrainState::new(params))
    }

    /// Continues from a saved state at its step count.
    pub fn resume(cfg: TrainConfig, dataset: &'a Dataset, provider: &'a dyn SemanticProvider, state: TrainState) -> Result<Self> {
        cfg.validate()?;
        check_compatible(&cfg.model, dataset)?;
        if state.params.config() != &cfg.model {
            return Err(Error::InvalidConfig("saved parameters were built for a different model config".into()));
        }
        let train_rows = dataset.split_indices(Split::Train).len();
        let steps_per_epoch = (train_rows / cfg.batch_size) as u64;
        if steps_per_epoch == 0 {
            return Err(Error::BatchTooSmall { got: train_rows, min: cfg.batch_size });
        }
        let val_rows = dataset.split_indices(Split::Val);
        if val_rows.is_empty() {
            return Err(Error::InvalidConfig("dataset has no validation rows".into()));
        }
        let total_steps = steps_per_epoch * cfg.epochs as u64;
        let warmup_steps = cfg.warmup_for(total_steps);
        if state.step() > total_steps {
            return Err(Error::InvalidConfig(format!(
                "saved step {} is past the end of a {total_steps}-step run",
                state.step()
            )));
        }
        Ok(Self {
            cfg,
            dataset,
            provider,
            state,
            steps_per_epoch,
            total_steps,
            warmup_steps,
            val_rows,
            order: None,
            parallel: false,
        })
    }

    /// Evaluate the two modality paths concurrently (`parallel` feature).
    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn into_state(self) -> TrainState {
        self.state
    }

    pub fn steps_per_epoch(&self) -> u64 {
        self.steps_per_epoch
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    pub fn warmup_steps(&self) -> u64 {
        self.warmup_steps
    }

    pub fn is_finished(&self) -> bool {
        self.state.step() >= self.total_steps
    }

    /// One optimizer update. Returns the epoch record when the step closes an epoch.
    pub fn step(&mut self) -> Result<Option<EpochRecord>> {
        let step = self.state.step();
        if step >= self.total_steps {
            return Ok(None);
        }
        let epoch = (step / self.steps_per_epoch) as usize;
        let within = (step % self.steps_per_epoch) as usize;
        if self.order.as_ref().map(|o| o.0) != Some(epoch) {
            let order = batch_indices(self.dataset, Split::Train, self.cfg.batch_size, epoch_seed(self.cfg.seed, epoch))?;
            self.order = Some((epoch, order));
        }
        let rows = &self.order.as_ref().expect("batch order cached above").1[within];
        let inputs = self.dataset.paired_inputs(rows, self.cfg.model.max_seq_len, self.provider)?;
        let opts = GradientOptions {
            detach: None,
            parallel: self.parallel,
        };
        let g = encoder_gradients_with(&inputs, &self.state.params, &self.cfg.loss, opts).map_err(|e| match e {
            Error::NonFinite(_) | Error::ZeroRow { .. } => Error::NumericalAbort { step },
            e => e,
        })?;
        if !g.breakdown.total.is_finite() {
            return Err(Error::NumericalAbort { step });
        }
        let lr = lr_at(step, self.total_steps, self.warmup_steps, self.cfg.base_lr);
        optimizer_step(&mut self.state.params, &g.grads, &mut self.state.optimizer, lr, &self.cfg.adamw())?;
        if !self.state.params.is_finite() {
            return Err(Error::NumericalAbort { step });
        }
        accumulate(&mut self.state.epoch_sum, &g.breakdown);
        self.state.epoch_batches += 1;
        if within + 1 < self.steps_per_epoch as usize {
            return Ok(None);
        }
        let (ev, et) = embed_rows(&self.state.params, self.dataset, &self.val_rows)
            .map_err(|e| if matches!(e, Error::ZeroRow { .. }) { Error::NumericalAbort { step } } else { e })?;
        let record = EpochRecord {
            epoch: epoch + 1,
            step: step + 1,
            loss: mean(&self.state.epoch_sum, self.state.epoch_batches),
            val_alignment: alignment_score(&ev, &et)?.score,
            val_gap: modality_gap(&ev, &et)?,
            lr,
        };
        self.state.history.records.push(record);
        self.state.epoch_sum = LossBreakdown::default();
        self.state.epoch_batches = 0;
        Ok(Some(record))
    }

    /// Runs to the end of the schedule, calling `on_epoch` after each epoch.
    pub fn run_with(&mut self, mut on_epoch: impl FnMut(&EpochRecord)) -> Result<()> {
        while !self.is_finished() {
            if let Some(r) = self.step()? {
                on_epoch(&r);
            }
        }
        Ok(())
    }

    pub fn run(&mut self) -> Result<()> {
        self.run_with(|_| {})
    }
}

/// Trains from scratch; the returned state holds last-epoch parameters.
pub fn train(cfg: &TrainConfig, dataset: &Dataset, provider: &dyn SemanticProvider) -> Result<TrainState> {
    let mut t = Trainer::new(cfg.clone(), dataset, provider)?;
    t.run()?;
    Ok(t.into_state())
}
