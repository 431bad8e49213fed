//! Loading data roots, checkpoints and configuration for the commands.

use std::fs;
use std::path::{Path, PathBuf};

use affordance_core::config::KeyValues;
use affordance_core::dataset::{load_videos, PhraseBook, DEFAULT_FRAME_HOLDOUT, DEFAULT_TASK_TRAIN_RATIO};
use affordance_core::encoders::load_cache;
use affordance_core::eval::{prepare_splits, SceneSplit};
use affordance_core::synth::{TEXT_CACHE_FILE, VISION_CACHE_FILE};
use affordance_core::{Checkpoint, EgoVideo, EmbeddingCache, PreparedVideo};
use anyhow::{bail, Context, Result};

use crate::Common;

pub const MODEL_FILE: &str = "model.ckpt";
pub const LOSS_FILE: &str = "loss_history.tsv";
/// Written next to a checkpoint so later commands can find its data root.
pub const DATA_LINK_FILE: &str = "data.path";

pub fn config(common: &Common) -> Result<KeyValues> {
    match &common.config {
        Some(path) => KeyValues::load(path).with_context(|| format!("reading config {}", path.display())),
        None => Ok(KeyValues::default()),
    }
}

/// Output directory, created if needed; defaults to the working directory.
pub fn out_dir(common: &Common) -> Result<PathBuf> {
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

pub fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// A checkpoint path may name the file or the directory holding it.
pub fn model_file(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MODEL_FILE)
    } else {
        path.to_path_buf()
    }
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = model_file(path);
    Ok(Checkpoint::load(&file)?)
}

/// Data root given explicitly or recorded next to the checkpoint.
pub fn data_root(data: Option<&Path>, model: Option<&Path>) -> Result<PathBuf> {
    if let Some(d) = data {
        return Ok(d.to_path_buf());
    }
    if let Some(m) = model {
        let dir = if m.is_dir() { m.to_path_buf() } else { m.parent().map(Path::to_path_buf).unwrap_or_default() };
        let link = dir.join(DATA_LINK_FILE);
        if let Ok(text) = fs::read_to_string(&link) {
            return Ok(PathBuf::from(text.trim()));
        }
    }
    bail!("no --data given and no recorded data root next to the model")
}

/// Videos, phrasings and both embedding caches of a data root.
pub struct Data {
    pub videos: Vec<EgoVideo>,
    pub phrases: PhraseBook,
    pub vision: EmbeddingCache,
    pub text: EmbeddingCache,
}

impl Data {
    pub fn load(root: &Path) -> Result<Self> {
        let videos = load_videos(root)?;
        for v in &videos {
            v.validate()?;
        }
        let phrases = PhraseBook::from_videos(&videos)?;
        let vision = load_cache(root.join(VISION_CACHE_FILE))?;
        let text = load_cache(root.join(TEXT_CACHE_FILE))?;
        if vision.dimension() != text.dimension() {
            bail!(
                "vision cache dimension {} differs from text cache dimension {}",
                vision.dimension(),
                text.dimension()
            );
        }
        Ok(Self { videos, phrases, vision, text })
    }

    /// Seeded splits of every video, using the split fractions in `kv`.
    pub fn splits(&self, kv: &KeyValues, seed: u64) -> Result<Vec<SceneSplit>> {
        let ratio = kv.get_or("task_train_ratio", DEFAULT_TASK_TRAIN_RATIO)?;
        let holdout = kv.get_or("frame_holdout", DEFAULT_FRAME_HOLDOUT)?;
        Ok(prepare_splits(self.videos.clone(), ratio, holdout, seed)?)
    }

    /// Resolves a task id to its description; other text passes through.
    pub fn task_text<'a>(&'a self, task: &'a str) -> &'a str {
        self.phrases.description(task).unwrap_or(task)
    }
}

/// Keeps the splits whose scene is listed; an empty list keeps everything.
pub fn select_scenes(splits: Vec<SceneSplit>, scenes: &[String]) -> Result<Vec<SceneSplit>> {
    if scenes.is_empty() {
        return Ok(splits);
    }
    for s in scenes {
        if !splits.iter().any(|sp| &sp.prepared.video.scene_id == s) {
            bail!("unknown scene {s:?}");
        }
    }
    Ok(splits.into_iter().filter(|sp| scenes.contains(&sp.prepared.video.scene_id)).collect())
}

pub fn prepared(splits: &[SceneSplit]) -> Vec<PreparedVideo> {
    splits.iter().map(|s| s.prepared.clone()).collect()
}

/// Seed from the flag, then the config file, then the fallback.
pub fn seed(common: &Common, kv: &KeyValues, fallback: u64) -> Result<u64> {
    match common.seed {
        Some(s) => Ok(s),
        None => Ok(kv.get_or("seed", fallback)?),
    }
}

pub fn parse_xy(text: &str) -> Result<affordance_core::Vec2> {
    let v = parse_floats(text, 2)?;
    Ok(affordance_core::Vec2::new(v[0], v[1]))
}

pub fn parse_floats(text: &str, n: usize) -> Result<Vec<f64>> {
    let values: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("expected {n} comma-separated numbers, got {text:?}"))?;
    if values.len() != n {
        bail!("expected {n} comma-separated numbers, got {text:?}");
    }
    Ok(values)
}
