//! Training objective and optimization loops.

use std::collections::BTreeMap;
use std::fmt;

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::config::KeyValues;
use crate::dataset::{PhraseBook, TrainingPair};
use crate::encoders::{Embedding, EmbeddingCache, TextEncoder, VisionAdapter};
use crate::error::{Error, Result};
use crate::geometry::{frechet_distance, GroundGaussian};
use crate::model::checkpoint::Checkpoint;
use crate::model::head::{default_hidden, frechet_loss_grad, output_region, AffordanceHead, Target};
use crate::model::optim::Adam;
use crate::scalar::Real;
use crate::seed::rng_for;

/// Rows per gradient shard. Shards are fixed so results do not depend on
/// the number of worker threads.
const SHARD_ROWS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub step_size: f64,
    pub seed: u64,
    pub adapter_trainable: bool,
    pub rephrasing_sampling: bool,
    /// Fraction of the pairs visited per epoch.
    pub subsample: f64,
    /// Hidden widths; `None` picks [`default_hidden`] for the embedding size.
    pub hidden: Option<Vec<usize>>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 150,
            batch_size: 256,
            step_size: 1e-4,
            seed: 0,
            adapter_trainable: true,
            rephrasing_sampling: true,
            subsample: 1.0,
            hidden: None,
        }
    }
}

impl TrainConfig {
    pub const FINETUNE_EPOCHS: usize = 25;
    pub const KEYS: [&'static str; 8] = [
        "epochs",
        "batch_size",
        "step_size",
        "seed",
        "adapter_trainable",
        "rephrasing_sampling",
        "subsample",
        "hidden",
    ];

    pub fn finetune() -> Self {
        Self { epochs: Self::FINETUNE_EPOCHS, ..Self::default() }
    }

    /// Overrides fields present in `kv`; other keys are ignored.
    pub fn apply(mut self, kv: &KeyValues) -> Result<Self> {
        self.epochs = kv.get_or("epochs", self.epochs)?;
        self.batch_size = kv.get_or("batch_size", self.batch_size)?;
        self.step_size = kv.get_or("step_size", self.step_size)?;
        self.seed = kv.get_or("seed", self.seed)?;
        self.adapter_trainable = kv.get_or("adapter_trainable", self.adapter_trainable)?;
        self.rephrasing_sampling = kv.get_or("rephrasing_sampling", self.rephrasing_sampling)?;
        self.subsample = kv.get_or("subsample", self.subsample)?;
        if let Some(h) = kv.get_list("hidden")? {
            self.hidden = Some(h);
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::Config(format!("step_size must be positive, got {}", self.step_size)));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::Config(format!("subsample must be in (0, 1], got {}", self.subsample)));
        }
        if matches!(&self.hidden, Some(h) if h.is_empty() || h.contains(&0)) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        Ok(())
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.set("epochs", self.epochs);
        kv.set("batch_size", self.batch_size);
        kv.set("step_size", self.step_size);
        kv.set("seed", self.seed);
        kv.set("adapter_trainable", self.adapter_trainable);
        kv.set("rephrasing_sampling", self.rephrasing_sampling);
        kv.set("subsample", self.subsample);
        if let Some(h) = &self.hidden {
            kv.set("hidden", h.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(","));
        }
        kv
    }
}

impl fmt::Display for TrainConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kv = self.to_key_values();
        let parts: Vec<String> = kv.iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(" "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FinetuneMode {
    /// Adapter frozen, head trained.
    HeadOnly,
    /// Adapter and head trained.
    All,
}

impl std::str::FromStr for FinetuneMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "head_only" | "head-only" => Ok(Self::HeadOnly),
            "all" => Ok(Self::All),
            other => Err(Error::Config(format!("unknown fine-tune mode {other:?}"))),
        }
    }
}

/// Vision adapter followed by the affordance head.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T: Real = f32> {
    pub adapter: VisionAdapter<T>,
    pub head: AffordanceHead<T>,
}

/// Batch loss with gradients.
pub struct LossGrad<T: Real> {
    /// Sum of per-example distances.
    pub total: T,
    pub head: Vec<T>,
    pub adapter: Option<Vec<T>>,
}

impl<T: Real> Network<T> {
    pub fn new(dim: usize, hidden: &[usize], seed: u64, adapter_trainable: bool) -> Self {
        let mut adapter = VisionAdapter::identity(dim);
        adapter.trainable = adapter_trainable;
        Self { adapter, head: AffordanceHead::seeded(2 * dim, hidden, seed) }
    }

    pub fn dim(&self) -> usize {
        self.adapter.dim()
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network { adapter: self.adapter.cast(), head: self.head.cast() }
    }

    fn head_input(&self, vision: ArrayView2<'_, T>, text: ArrayView2<'_, T>) -> Result<Array2<T>> {
        let d = self.dim();
        for width in [vision.ncols(), text.ncols()] {
            if width != d {
                return Err(Error::Shape { expected: d, actual: width });
            }
        }
        let mut x = Array2::zeros((vision.nrows(), 2 * d));
        let mut adapted = vision.dot(&self.adapter.weight().t());
        adapted += &ndarray::ArrayView1::from(self.adapter.bias());
        x.slice_mut(s![.., ..d]).assign(&adapted);
        x.slice_mut(s![.., d..]).assign(&text);
        Ok(x)
    }

    /// Raw output rows for a batch of raw vision and text embeddings.
    pub fn forward_rows(&self, vision: ArrayView2<'_, T>, text: ArrayView2<'_, T>) -> Result<Array2<T>> {
        let x = self.head_input(vision, text)?;
        Ok(self.head.forward_batch(x.view())?.output)
    }

    pub fn predict(&self, vision: &[T], text: &[T]) -> Result<GroundGaussian> {
        let v = ArrayView2::from_shape((1, vision.len()), vision)
            .map_err(|_| Error::Shape { expected: self.dim(), actual: vision.len() })?;
        let t = ArrayView2::from_shape((1, text.len()), text)
            .map_err(|_| Error::Shape { expected: self.dim(), actual: text.len() })?;
        Ok(output_region(self.forward_rows(v, t)?.row(0)))
    }

    /// Sum of distances over the batch and gradients of `sum / normalizer`.
    pub fn loss_grad(
        &self,
        vision: ArrayView2<'_, T>,
        text: ArrayView2<'_, T>,
        targets: &[Target<T>],
        normalizer: T,
        with_adapter: bool,
    ) -> Result<LossGrad<T>> {
        let x = self.head_input(vision, text)?;
        let tape = self.head.forward_batch(x.view())?;
        let mut d_out = Array2::zeros(tape.output.raw_dim());
        let total = frechet_loss_grad(tape.output.view(), targets, normalizer, d_out.view_mut());
        let mut head = vec![T::zero(); self.head.param_count()];
        let dx = self.head.backward(&tape, d_out.view(), &mut head);
        let adapter = with_adapter.then(|| {
            let d = self.dim();
            let dv = dx.slice(s![.., ..d]);
            let mut g = dv.t().dot(&vision).into_raw_vec_and_offset().0;
            g.extend(dv.sum_axis(Axis(0)).iter().copied());
            g
        });
        Ok(LossGrad { total, head, adapter })
    }
}

/// One example for [`loss`]: raw embeddings and the ego-frame target.
pub struct Example<'a> {
    pub vision: &'a Embedding,
    pub text: &'a Embedding,
    pub target: GroundGaussian,
}

/// Mean Frechet distance between targets and predictions over a batch.
pub fn loss(batch: &[Example<'_>], network: &Network<f32>) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut total = 0.0;
    for ex in batch {
        let pred = network.predict(&ex.vision.0, &ex.text.0)?;
        total += frechet_distance(&ex.target, &pred);
    }
    Ok(total / batch.len() as f64)
}

/// Pairs resolved to rows of dense embedding tables.
struct ResolvedData {
    vision: Array2<f32>,
    text: Array2<f32>,
    /// Per pair: vision row, range of text rows (its phrasings), target.
    rows: Vec<(usize, std::ops::Range<usize>, Target<f32>)>,
}

fn resolve(
    pairs: &[TrainingPair],
    phrases: &PhraseBook,
    vision: &EmbeddingCache,
    text: &dyn TextEncoder,
) -> Result<ResolvedData> {
    let dim = vision.dimension();
    if text.dimension() != dim {
        return Err(Error::Shape { expected: dim, actual: text.dimension() });
    }
    let mut image_rows: BTreeMap<&str, usize> = BTreeMap::new();
    let mut task_rows: BTreeMap<&str, std::ops::Range<usize>> = BTreeMap::new();
    let mut vision_values = Vec::new();
    let mut text_values = Vec::new();
    let mut rows = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let next = image_rows.len();
        let image_row = match image_rows.get(pair.image_key.as_str()) {
            Some(&r) => r,
            None => {
                vision_values.extend_from_slice(&vision.get(&pair.image_key)?.0);
                image_rows.insert(&pair.image_key, next);
                next
            }
        };
        let range = match task_rows.get(pair.task_id.as_str()) {
            Some(r) => r.clone(),
            None => {
                let start = text_values.len() / dim;
                for phrase in phrases.get(&pair.task_id)? {
                    let e = text.encode_text(phrase)?;
                    if e.dim() != dim {
                        return Err(Error::Shape { expected: dim, actual: e.dim() });
                    }
                    text_values.extend_from_slice(&e.0);
                }
                let r = start..text_values.len() / dim;
                task_rows.insert(&pair.task_id, r.clone());
                r
            }
        };
        rows.push((image_row, range, Target::from(&pair.target_region_ego)));
    }
    let n_images = vision_values.len() / dim.max(1);
    let n_phrases = text_values.len() / dim.max(1);
    Ok(ResolvedData {
        vision: Array2::from_shape_vec((n_images, dim), vision_values).expect("vision table"),
        text: Array2::from_shape_vec((n_phrases, dim), text_values).expect("text table"),
        rows,
    })
}

/// Everything `train` needs besides the configuration.
pub struct TrainingData<'a> {
    pub pairs: &'a [TrainingPair],
    pub phrases: &'a PhraseBook,
    pub vision: &'a EmbeddingCache,
    pub text: &'a dyn TextEncoder,
}

fn run_epochs(
    network: &mut Network<f32>,
    data: &TrainingData<'_>,
    config: &TrainConfig,
    train_adapter: bool,
) -> Result<Vec<f64>> {
    config.validate()?;
    if data.pairs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let resolved = resolve(data.pairs, data.phrases, data.vision, data.text)?;
    let dim = network.dim();
    if resolved.vision.ncols() != dim {
        return Err(Error::Shape { expected: dim, actual: resolved.vision.ncols() });
    }
    let mut head_opt = Adam::<f32>::new(network.head.param_count(), config.step_size);
    let mut adapter_opt = Adam::<f32>::new(network.adapter.params().len(), config.step_size);
    let n = resolved.rows.len();
    let per_epoch = ((config.subsample * n as f64).ceil() as usize).clamp(1, n);
    let mut history = Vec::with_capacity(config.epochs);
    let mut step = 0usize;

    for epoch in 0..config.epochs {
        let mut rng = rng_for(config.seed, &format!("epoch:{epoch}"));
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        order.truncate(per_epoch);
        let mut epoch_total = 0.0f64;

        for batch in order.chunks(config.batch_size) {
            let b = batch.len();
            let mut vision = Array2::<f32>::zeros((b, dim));
            let mut text = Array2::<f32>::zeros((b, dim));
            let mut targets = Vec::with_capacity(b);
            for (r, &i) in batch.iter().enumerate() {
                let (img, phr, target) = &resolved.rows[i];
                let t =
                    if config.rephrasing_sampling && phr.len() > 1 { rng.gen_range(phr.clone()) } else { phr.start };
                vision.row_mut(r).assign(&resolved.vision.row(*img));
                text.row_mut(r).assign(&resolved.text.row(t));
                targets.push(*target);
            }
            let normalizer = b as f32;
            let net = &*network;
            let shards: Vec<LossGrad<f32>> = (0..b)
                .step_by(SHARD_ROWS)
                .collect::<Vec<_>>()
                .into_par_iter()
                .map(|start| {
                    let end = (start + SHARD_ROWS).min(b);
                    net.loss_grad(
                        vision.slice(s![start..end, ..]),
                        text.slice(s![start..end, ..]),
                        &targets[start..end],
                        normalizer,
                        train_adapter,
                    )
                })
                .collect::<Result<_>>()?;
            let mut shards = shards.into_iter();
            let mut acc = shards.next().expect("non-empty batch");
            for shard in shards {
                acc.total += shard.total;
                acc.head.iter_mut().zip(&shard.head).for_each(|(a, g)| *a += g);
                if let (Some(a), Some(g)) = (acc.adapter.as_mut(), shard.adapter.as_ref()) {
                    a.iter_mut().zip(g).for_each(|(a, g)| *a += g);
                }
            }
            let batch_loss = acc.total as f64 / b as f64;
            if !batch_loss.is_finite() {
                return Err(Error::Divergence { epoch, step, loss: batch_loss });
            }
            epoch_total += acc.total as f64;
            head_opt.update(network.head.params_mut(), &acc.head);
            if let Some(g) = &acc.adapter {
                adapter_opt.update(network.adapter.params_mut(), g);
            }
            step += 1;
        }
        history.push(epoch_total / per_epoch as f64);
    }
    Ok(history)
}

/// Trains a fresh network on `data`.
pub fn train(data: &TrainingData<'_>, config: &TrainConfig) -> Result<Checkpoint> {
    config.validate()?;
    let dim = data.vision.dimension();
    let hidden = config.hidden.clone().unwrap_or_else(|| default_hidden(dim));
    let mut network = Network::new(dim, &hidden, config.seed, config.adapter_trainable);
    let history = run_epochs(&mut network, data, config, config.adapter_trainable)?;
    Ok(Checkpoint { network, config: config.clone(), loss_history: history })
}

/// Continues training an existing checkpoint with fresh optimizer state.
pub fn finetune(
    checkpoint: &Checkpoint,
    data: &TrainingData<'_>,
    mode: FinetuneMode,
    config: &TrainConfig,
) -> Result<Checkpoint> {
    if data.vision.dimension() != checkpoint.dimension() {
        return Err(Error::Shape { expected: checkpoint.dimension(), actual: data.vision.dimension() });
    }
    let mut network = checkpoint.network.clone();
    let train_adapter = mode == FinetuneMode::All;
    network.adapter.trainable = train_adapter;
    let history = run_epochs(&mut network, data, config, train_adapter)?;
    let mut loss_history = checkpoint.loss_history.clone();
    loss_history.extend(history);
    Ok(Checkpoint { network, config: config.clone(), loss_history })
}
