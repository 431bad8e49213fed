//! Evaluation protocols: localization error, multiple-choice grounding,
//! rephrasing stability and Welch's t-test.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::baseline::{baseline_ground, SceneIndex};
use crate::dataset::{make_pairs, split_frames, split_tasks, EgoVideo, PhraseBook, PreparedVideo, TrainingPair};
use crate::encoders::{EmbeddingCache, TextEncoder};
use crate::error::{Error, Result};
use crate::geometry::{frechet_distance, rectify, GroundGaussian, Vec3};
use crate::model::Checkpoint;
use crate::seed::rng_for;

/// A task query: the id locates ground truth, the text is what a model sees.
#[derive(Debug, Clone, Copy)]
pub struct Query<'a> {
    pub task_id: &'a str,
    pub text: &'a str,
}

/// Anything that predicts an ego-frame region for a task at a frame.
pub trait Predictor: Sync {
    fn predict(&self, video: &PreparedVideo, position: usize, query: Query<'_>) -> Result<GroundGaussian>;
}

pub struct ModelPredictor<'a> {
    pub checkpoint: &'a Checkpoint,
    pub vision: &'a EmbeddingCache,
    pub text: &'a (dyn TextEncoder + Sync),
}

impl Predictor for ModelPredictor<'_> {
    fn predict(&self, video: &PreparedVideo, position: usize, query: Query<'_>) -> Result<GroundGaussian> {
        let key = &video.video.frames[position].image_key;
        self.checkpoint.predict(key, query.text, self.vision, self.text)
    }
}

/// Whole-scene retrieval, re-expressed in the query frame's ego frame.
pub struct BaselinePredictor<'a> {
    pub indices: BTreeMap<String, SceneIndex>,
    pub text: &'a (dyn TextEncoder + Sync),
}

impl<'a> BaselinePredictor<'a> {
    pub fn build(
        videos: &[PreparedVideo],
        vision: &EmbeddingCache,
        text: &'a (dyn TextEncoder + Sync),
    ) -> Result<Self> {
        let indices = videos
            .iter()
            .map(|v| Ok((v.video.scene_id.clone(), SceneIndex::build(v, vision)?)))
            .collect::<Result<_>>()?;
        Ok(Self { indices, text })
    }

    pub fn predict_global(&self, scene_id: &str, text: &str) -> Result<GroundGaussian> {
        let index = self.indices.get(scene_id).ok_or(Error::EmptyScene)?;
        crate::baseline::baseline_predict(index, text, self.text)
    }
}

impl Predictor for BaselinePredictor<'_> {
    fn predict(&self, video: &PreparedVideo, position: usize, query: Query<'_>) -> Result<GroundGaussian> {
        let global = self.predict_global(&video.video.scene_id, query.text)?;
        Ok(rectify(&global, &video.aligned[position]))
    }
}

/// Returns the true rectified region.
pub struct OraclePredictor;

impl Predictor for OraclePredictor {
    fn predict(&self, video: &PreparedVideo, position: usize, query: Query<'_>) -> Result<GroundGaussian> {
        video.target(position, query.task_id)
    }
}

/// Predicts the same ego-frame region everywhere.
pub struct ConstantPredictor(pub GroundGaussian);

impl Predictor for ConstantPredictor {
    fn predict(&self, _: &PreparedVideo, _: usize, _: Query<'_>) -> Result<GroundGaussian> {
        Ok(self.0)
    }
}

/// Pairwise (cascade) summation; the result does not depend on how the
/// values were produced, only on their order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        values.iter().sum()
    } else {
        let (a, b) = values.split_at(values.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    (mean, (pairwise_sum(&sq) / (n - 1.0)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Regime {
    /// Test tasks seen from held-out frames.
    UnseenBoth,
    /// Test tasks seen from training frames.
    UnseenTask,
    /// Training tasks seen from held-out frames.
    UnseenImage,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::UnseenBoth, Regime::UnseenTask, Regime::UnseenImage];

    pub fn name(self) -> &'static str {
        match self {
            Regime::UnseenBoth => "unseen_task_unseen_image",
            Regime::UnseenTask => "unseen_task_seen_image",
            Regime::UnseenImage => "seen_task_unseen_image",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL.into_iter().find(|r| r.name() == s).ok_or_else(|| Error::Config(format!("unknown regime {s:?}")))
    }
}

/// One prepared video with its task and frame splits.
#[derive(Debug, Clone)]
pub struct SceneSplit {
    pub prepared: PreparedVideo,
    pub train_tasks: Vec<String>,
    pub test_tasks: Vec<String>,
    pub train_frames: Vec<usize>,
    pub test_frames: Vec<usize>,
}

impl SceneSplit {
    /// Training pairs: training tasks from training frames.
    pub fn training_pairs(&self) -> Result<Vec<TrainingPair>> {
        make_pairs(&self.prepared, &self.train_tasks, &self.train_frames)
    }

    pub fn regime_pairs(&self, regime: Regime) -> Result<Vec<TrainingPair>> {
        match regime {
            Regime::UnseenBoth => make_pairs(&self.prepared, &self.test_tasks, &self.test_frames),
            Regime::UnseenTask => make_pairs(&self.prepared, &self.test_tasks, &self.train_frames),
            Regime::UnseenImage => make_pairs(&self.prepared, &self.train_tasks, &self.test_frames),
        }
    }

    /// Held-out, velocity-passing frames inside some task span.
    pub fn grounding_frames(&self) -> Vec<usize> {
        let video = &self.prepared.video;
        self.test_frames
            .iter()
            .copied()
            .filter(|&p| self.prepared.passing[p] && video.tasks.iter().any(|t| video.span_positions(t).contains(&p)))
            .collect()
    }
}

/// Prepares videos and applies the seeded task and frame splits.
pub fn prepare_splits(videos: Vec<EgoVideo>, train_ratio: f64, holdout: f64, seed: u64) -> Result<Vec<SceneSplit>> {
    let task_splits = split_tasks(&videos, train_ratio, seed)?;
    videos
        .into_iter()
        .zip(task_splits)
        .map(|(video, tasks)| {
            let (train_frames, test_frames) = split_frames(&video, holdout, seed)?;
            Ok(SceneSplit {
                prepared: PreparedVideo::new(video)?,
                train_tasks: tasks.train,
                test_tasks: tasks.test,
                train_frames,
                test_frames,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationRow {
    pub scene: String,
    pub regime: String,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationReport {
    /// Per-scene rows followed by a pooled row with scene `all`.
    pub rows: Vec<LocalizationRow>,
    /// Every pair error, in pair order.
    pub errors: Vec<f64>,
}

impl LocalizationReport {
    pub fn pooled(&self) -> &LocalizationRow {
        self.rows.last().expect("report has a pooled row")
    }
}

pub const LOCALIZATION_HEADER: &str = "scene\tregime\tmean\tstd\tn";

pub fn localization_table(rows: &[LocalizationRow]) -> String {
    let mut out = format!("{LOCALIZATION_HEADER}\n");
    for r in rows {
        let _ = writeln!(out, "{}\t{}\t{:.6}\t{:.6}\t{}", r.scene, r.regime, r.mean, r.std, r.n);
    }
    out
}

/// Frechet error of every pair's prediction against its target.
pub fn eval_localization(
    predictor: &dyn Predictor,
    videos: &[PreparedVideo],
    phrases: &PhraseBook,
    pairs: &[TrainingPair],
    regime: &str,
) -> Result<LocalizationReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyEval(format!("no pairs for regime {regime}")));
    }
    let by_scene: BTreeMap<&str, &PreparedVideo> = videos.iter().map(|v| (v.video.scene_id.as_str(), v)).collect();
    let errors: Vec<f64> = pairs
        .par_iter()
        .map(|pair| {
            let video = by_scene
                .get(pair.scene_id.as_str())
                .ok_or_else(|| Error::EmptyEval(format!("unknown scene {:?}", pair.scene_id)))?;
            let query = Query { task_id: &pair.task_id, text: phrases.description(&pair.task_id)? };
            let predicted = predictor.predict(video, pair.image_frame_index, query)?;
            Ok(frechet_distance(&pair.target_region_ego, &predicted))
        })
        .collect::<Result<_>>()?;
    let mut per_scene: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (pair, e) in pairs.iter().zip(&errors) {
        per_scene.entry(&pair.scene_id).or_default().push(*e);
    }
    let row = |scene: &str, values: &[f64]| {
        let (mean, std) = mean_std(values);
        LocalizationRow { scene: scene.to_string(), regime: regime.to_string(), mean, std, n: values.len() }
    };
    let mut rows: Vec<LocalizationRow> = per_scene.iter().map(|(s, v)| row(s, v)).collect();
    rows.push(row("all", &errors));
    Ok(LocalizationReport { rows, errors })
}

/// Histogram of `values` over `[0, max)` in `bins` equal bins; values at or
/// above `max` land in the last bin.
pub fn histogram(values: &[f64], bins: usize, max: f64) -> Vec<(f64, f64, usize)> {
    let width = max / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = ((v / width).floor().max(0.0) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts.into_iter().enumerate().map(|(i, c)| (i as f64 * width, (i + 1) as f64 * width, c)).collect()
}

pub fn histogram_table(label: &str, values: &[f64], bins: usize, max: f64) -> String {
    let mut out = String::new();
    for (lo, hi, c) in histogram(values, bins, max) {
        let _ = writeln!(out, "{label}\t{lo:.4}\t{hi:.4}\t{c}");
    }
    out
}

/// Chooses which candidate task is happening at a frame.
pub trait Grounder: Sync {
    fn choose(&self, video: &PreparedVideo, position: usize, candidates: &[Query<'_>], trial: u64) -> Result<usize>;
}

/// Picks the candidate whose predicted ego-frame mean is closest to the
/// camera.
pub struct NearestPrediction<'a>(pub &'a dyn Predictor);

impl Grounder for NearestPrediction<'_> {
    fn choose(&self, video: &PreparedVideo, position: usize, candidates: &[Query<'_>], _: u64) -> Result<usize> {
        let mut best = (0, f64::INFINITY);
        for (i, q) in candidates.iter().enumerate() {
            let d = self.0.predict(video, position, *q)?.mean.norm();
            if d < best.1 {
                best = (i, d);
            }
        }
        Ok(best.0)
    }
}

/// Highest cosine similarity between the raw image and the candidate text.
pub struct BaselineGrounder<'a> {
    pub vision: &'a EmbeddingCache,
    pub text: &'a (dyn TextEncoder + Sync),
}

impl Grounder for BaselineGrounder<'_> {
    fn choose(&self, video: &PreparedVideo, position: usize, candidates: &[Query<'_>], _: u64) -> Result<usize> {
        let image = self.vision.get(&video.video.frames[position].image_key)?;
        let texts = candidates.iter().map(|q| self.text.encode_text(q.text)).collect::<Result<Vec<_>>>()?;
        Ok(baseline_ground(image, &texts))
    }
}

/// Uniformly random choice, seeded per trial.
pub struct RandomGrounder {
    pub seed: u64,
}

impl Grounder for RandomGrounder {
    fn choose(&self, _: &PreparedVideo, _: usize, candidates: &[Query<'_>], trial: u64) -> Result<usize> {
        Ok(rng_for(self.seed, &format!("random-grounder:{trial}")).gen_range(0..candidates.len()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundingReport {
    pub trials: usize,
    pub correct: usize,
}

impl GroundingReport {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.trials as f64
    }
}

/// Multiple-choice grounding. Each trial draws a frame from `frames`
/// (pairs of video index and frame position that lie in some task span),
/// the true task containing it, and `n_choices - 1` distractor tasks of the
/// same video, in shuffled order.
pub fn eval_grounding(
    grounder: &dyn Grounder,
    videos: &[PreparedVideo],
    phrases: &PhraseBook,
    frames: &[(usize, usize)],
    n_choices: usize,
    trials: usize,
    seed: u64,
) -> Result<GroundingReport> {
    if n_choices < 2 {
        return Err(Error::Config("grounding needs at least two choices".into()));
    }
    if let Some(v) = videos.iter().find(|v| v.video.tasks.len() < n_choices) {
        return Err(Error::Config(format!(
            "scene {:?} has {} tasks, fewer than {n_choices} choices",
            v.video.scene_id,
            v.video.tasks.len()
        )));
    }
    if frames.is_empty() || trials == 0 {
        return Err(Error::EmptyEval("no grounding frames".into()));
    }
    let outcomes: Vec<bool> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = rng_for(seed, &format!("grounding:{trial}"));
            let (vi, position) = frames[rng.gen_range(0..frames.len())];
            let video = &videos[vi];
            let tasks = &video.video.tasks;
            let containing: Vec<usize> =
                (0..tasks.len()).filter(|&t| video.video.span_positions(&tasks[t]).contains(&position)).collect();
            let truth = *containing
                .first()
                .ok_or_else(|| Error::EmptyEval(format!("frame {position} lies in no task span")))?;
            let others: Vec<usize> = (0..tasks.len()).filter(|t| !containing.contains(t)).collect();
            if others.len() < n_choices - 1 {
                return Err(Error::Config("not enough distractor tasks".into()));
            }
            let mut chosen: Vec<usize> = others.choose_multiple(&mut rng, n_choices - 1).copied().collect();
            chosen.push(truth);
            chosen.shuffle(&mut rng);
            let queries = chosen
                .iter()
                .map(|&t| Ok(Query { task_id: &tasks[t].task_id, text: phrases.description(&tasks[t].task_id)? }))
                .collect::<Result<Vec<_>>>()?;
            let pick = grounder.choose(video, position, &queries, trial)?;
            Ok(chosen[pick] == truth)
        })
        .collect::<Result<_>>()?;
    Ok(GroundingReport { trials, correct: outcomes.iter().filter(|&&c| c).count() })
}

/// `sqrt(mean ||m_i - mean(m)||^2)` over a set of predicted means.
pub fn positional_std(means: &[Vec3]) -> f64 {
    let n = means.len() as f64;
    let centroid = means.iter().fold(Vec3::zeros(), |acc, m| acc + m) / n;
    let sq: Vec<f64> = means.iter().map(|m| (m - centroid).norm_squared()).collect();
    (pairwise_sum(&sq) / n).sqrt()
}

/// One stability probe: a task seen from a frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StabilityProbe {
    pub video: usize,
    pub position: usize,
    pub task_id: String,
}

/// `per_task` seeded images for every listed task, drawn from `frames`.
pub fn stability_probes(
    tasks: &[(usize, Vec<String>)],
    frames: &[Vec<usize>],
    per_task: usize,
    seed: u64,
) -> Vec<StabilityProbe> {
    let mut probes = Vec::new();
    for (video, ids) in tasks {
        for id in ids {
            let mut rng = rng_for(seed, &format!("stability:{video}:{id}"));
            for &position in frames[*video].choose_multiple(&mut rng, per_task) {
                probes.push(StabilityProbe { video: *video, position, task_id: id.clone() });
            }
        }
    }
    probes
}

/// Average positional spread of predictions across a task's phrasings.
pub fn eval_stability(
    predictor: &dyn Predictor,
    videos: &[PreparedVideo],
    phrases: &PhraseBook,
    probes: &[StabilityProbe],
) -> Result<f64> {
    if probes.is_empty() {
        return Err(Error::EmptyEval("no stability probes".into()));
    }
    let spreads: Vec<f64> = probes
        .par_iter()
        .map(|probe| {
            let list = phrases.get(&probe.task_id)?;
            if list.len() < 2 {
                return Err(Error::Config(format!("task {:?} has fewer than two phrasings", probe.task_id)));
            }
            let means = list
                .iter()
                .map(|text| {
                    let q = Query { task_id: &probe.task_id, text };
                    Ok(predictor.predict(&videos[probe.video], probe.position, q)?.mean)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(positional_std(&means))
        })
        .collect::<Result<_>>()?;
    Ok(pairwise_sum(&spreads) / spreads.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
}

/// Welch's unequal-variance two-sample t-test.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::DegenerateSample("each sample needs at least two values".into()));
    }
    let (ma, sa) = mean_std(a);
    let (mb, sb) = mean_std(b);
    let va = sa * sa / a.len() as f64;
    let vb = sb * sb / b.len() as f64;
    let se2 = va + vb;
    if se2 == 0.0 {
        return Err(Error::DegenerateSample("both samples have zero variance".into()));
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (va * va / (a.len() as f64 - 1.0) + vb * vb / (b.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::DegenerateSample(e.to_string()))?;
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(WelchResult { t, df, p })
}
