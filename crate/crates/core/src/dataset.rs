//! Localized egocentric videos: ingestion, frame filtering, per-task region
//! fitting, train/test splits and (image, task) training pairs.
//!
//! On-disk layout, one directory per video:
//!
//! - `video.meta`: `key=value` lines with `scene_id`, `activity`, `frame_rate_hz`.
//! - `frames.jsonl`: `{"i": int, "t": s, "p": [x,y,z], "q": [w,x,y,z], "img": key}`
//! - `tasks.jsonl`: `{"id": str, "desc": str, "rephrasings": [str], "start": int, "end": int}`
//!
//! Positions are meters in a z-up world frame, times are seconds. The
//! quaternion rotates camera-body vectors (x forward, y left, z up) into the
//! world frame. Task spans refer to frame `i` values, inclusive.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::Path;

use nalgebra::Quaternion;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{fit_task_region, gravity_align, rectify, GravityAlignedPose, GroundGaussian, Pose, Vec3};
use crate::seed::rng_for;

/// Frames moving faster than this (m/s) are excluded from region fitting
/// and pairing.
pub const DEFAULT_MAX_SPEED: f64 = 0.1;
pub const DEFAULT_TASK_TRAIN_RATIO: f64 = 0.8;
pub const DEFAULT_FRAME_HOLDOUT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: i64,
    pub timestamp: f64,
    pub pose: Pose,
    pub image_key: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpan {
    #[serde(rename = "id")]
    pub task_id: String,
    #[serde(rename = "desc")]
    pub description: String,
    #[serde(default)]
    pub rephrasings: Vec<String>,
    #[serde(rename = "start")]
    pub start_frame: i64,
    #[serde(rename = "end")]
    pub end_frame: i64,
}

impl TaskSpan {
    /// Description followed by every rephrasing.
    pub fn phrasings(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.description.as_str()).chain(self.rephrasings.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EgoVideo {
    pub scene_id: String,
    pub activity: String,
    pub frame_rate_hz: f64,
    pub frames: Vec<Frame>,
    pub tasks: Vec<TaskSpan>,
}

impl EgoVideo {
    /// Positions in `frames` whose index lies inside the task span.
    pub fn span_positions(&self, task: &TaskSpan) -> Range<usize> {
        let lo = self.frames.partition_point(|f| f.index < task.start_frame);
        let hi = self.frames.partition_point(|f| f.index <= task.end_frame);
        lo..hi.max(lo)
    }

    pub fn task(&self, task_id: &str) -> Option<&TaskSpan> {
        self.tasks.iter().find(|t| t.task_id == task_id)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scene_id.trim().is_empty() {
            return Err(Error::ingestion("video.meta", "scene_id is empty"));
        }
        if self.frames.is_empty() {
            return Err(Error::ingestion("frames.jsonl", "no frames"));
        }
        for (pos, frame) in self.frames.iter().enumerate() {
            let loc = || format!("frames.jsonl:{}", pos + 1);
            if !frame.timestamp.is_finite() || frame.pose.position.iter().any(|v| !v.is_finite()) {
                return Err(Error::ingestion(loc(), "non-finite value"));
            }
            frame.pose.check().map_err(|e| Error::ingestion(loc(), e.to_string()))?;
            if pos > 0 {
                let prev = &self.frames[pos - 1];
                if frame.index <= prev.index {
                    return Err(Error::ingestion(
                        loc(),
                        format!("frame index {} does not increase (previous {})", frame.index, prev.index),
                    ));
                }
                if frame.timestamp < prev.timestamp {
                    return Err(Error::ingestion(loc(), "timestamp decreases"));
                }
            }
        }
        let (first, last) = (self.frames[0].index, self.frames[self.frames.len() - 1].index);
        let mut seen = HashMap::new();
        for (pos, task) in self.tasks.iter().enumerate() {
            let loc = || format!("tasks.jsonl:{}", pos + 1);
            if task.start_frame > task.end_frame {
                return Err(Error::ingestion(loc(), "start frame after end frame"));
            }
            if task.start_frame < first || task.end_frame > last {
                return Err(Error::ingestion(
                    loc(),
                    format!("span {}..={} outside frame range {first}..={last}", task.start_frame, task.end_frame),
                ));
            }
            if let Some(prev) = seen.insert(task.task_id.as_str(), pos) {
                return Err(Error::ingestion(loc(), format!("task id {:?} repeats line {}", task.task_id, prev + 1)));
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct FrameRecord {
    i: i64,
    t: f64,
    p: [f64; 3],
    q: [f64; 4],
    img: String,
}

fn parse_meta(text: &str) -> Result<(String, String, f64)> {
    let mut values = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::ingestion(format!("video.meta:{}", lineno + 1), "expected key=value"))?;
        values.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get =
        |k: &str| values.get(k).cloned().ok_or_else(|| Error::ingestion("video.meta", format!("missing key {k}")));
    let rate = get("frame_rate_hz")?
        .parse::<f64>()
        .map_err(|e| Error::ingestion("video.meta", format!("frame_rate_hz: {e}")))?;
    Ok((get("scene_id")?, get("activity")?, rate))
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Reads and validates one video directory.
pub fn load_video(dir: impl AsRef<Path>) -> Result<EgoVideo> {
    let dir = dir.as_ref();
    let (scene_id, activity, frame_rate_hz) = parse_meta(&read_to_string(&dir.join("video.meta"))?)?;

    let mut frames = Vec::new();
    for (lineno, line) in read_to_string(&dir.join("frames.jsonl"))?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: FrameRecord = serde_json::from_str(line)
            .map_err(|e| Error::ingestion(format!("frames.jsonl:{}", lineno + 1), e.to_string()))?;
        frames.push(Frame {
            index: rec.i,
            timestamp: rec.t,
            pose: Pose::new(Vec3::from(rec.p), Quaternion::new(rec.q[0], rec.q[1], rec.q[2], rec.q[3])),
            image_key: rec.img,
        });
    }

    let mut tasks = Vec::new();
    for (lineno, line) in read_to_string(&dir.join("tasks.jsonl"))?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let task: TaskSpan = serde_json::from_str(line)
            .map_err(|e| Error::ingestion(format!("tasks.jsonl:{}", lineno + 1), e.to_string()))?;
        tasks.push(task);
    }

    let video = EgoVideo { scene_id, activity, frame_rate_hz, frames, tasks };
    video.validate()?;
    Ok(video)
}

pub fn save_video(video: &EgoVideo, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, text: String| {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    };
    write(
        "video.meta",
        format!("scene_id={}\nactivity={}\nframe_rate_hz={}\n", video.scene_id, video.activity, video.frame_rate_hz),
    )?;
    let mut frames = String::new();
    for f in &video.frames {
        let rec = FrameRecord {
            i: f.index,
            t: f.timestamp,
            p: f.pose.position.into(),
            q: f.pose.quaternion_wxyz(),
            img: f.image_key.clone(),
        };
        frames.push_str(&serde_json::to_string(&rec).expect("frame record"));
        frames.push('\n');
    }
    write("frames.jsonl", frames)?;
    let mut tasks = String::new();
    for t in &video.tasks {
        tasks.push_str(&serde_json::to_string(t).expect("task record"));
        tasks.push('\n');
    }
    write("tasks.jsonl", tasks)
}

/// Loads every video directory (any subdirectory holding a `video.meta`)
/// under `root`, sorted by directory name.
pub fn load_videos(root: impl AsRef<Path>) -> Result<Vec<EgoVideo>> {
    let root = root.as_ref();
    if root.join("video.meta").exists() {
        return Ok(vec![load_video(root)?]);
    }
    let mut dirs: Vec<_> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("video.meta").exists())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::ingestion(root.display().to_string(), "no video directories found"));
    }
    dirs.iter().map(load_video).collect()
}

/// Per-frame speed test. Interior frames use central differences, the two
/// boundary frames one-sided differences. A single-frame video passes.
pub fn velocity_filter(video: &EgoVideo, v_max: f64) -> Result<Vec<bool>> {
    let frames = &video.frames;
    if frames.is_empty() {
        return Err(Error::EmptySamples("velocity filter needs at least one frame"));
    }
    if frames.len() == 1 {
        return Ok(vec![true]);
    }
    for (i, w) in frames.windows(2).enumerate() {
        if w[1].timestamp <= w[0].timestamp {
            return Err(Error::DegenerateTiming { first: i, second: i + 1, timestamp: w[0].timestamp });
        }
    }
    let n = frames.len();
    Ok((0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            let (fa, fb) = (&frames[a], &frames[b]);
            let speed = (fb.pose.position - fa.pose.position).norm() / (fb.timestamp - fa.timestamp);
            speed < v_max
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskRegion {
    pub region: GroundGaussian,
    /// Number of frames the region was fit on.
    pub frames: usize,
    /// Set when no frame in the span passed the velocity filter and the fit
    /// used every in-span frame instead.
    pub fallback: bool,
}

/// Fits a region per task over its velocity-passing in-span frames.
pub fn compute_task_regions(video: &EgoVideo) -> Result<BTreeMap<String, TaskRegion>> {
    let passing = velocity_filter(video, DEFAULT_MAX_SPEED)?;
    compute_task_regions_masked(video, &passing)
}

pub fn compute_task_regions_masked(video: &EgoVideo, passing: &[bool]) -> Result<BTreeMap<String, TaskRegion>> {
    let mut regions = BTreeMap::new();
    for task in &video.tasks {
        let span = video.span_positions(task);
        if span.is_empty() {
            return Err(Error::Annotation(format!(
                "task {:?} in scene {:?} spans no frames",
                task.task_id, video.scene_id
            )));
        }
        let kept: Vec<Vec3> = span.clone().filter(|&p| passing[p]).map(|p| video.frames[p].pose.position).collect();
        let fallback = kept.is_empty();
        let positions = if fallback { span.map(|p| video.frames[p].pose.position).collect() } else { kept };
        let region = fit_task_region(&positions)?;
        regions.insert(task.task_id.clone(), TaskRegion { region, frames: positions.len(), fallback });
    }
    Ok(regions)
}

/// A video with its filter mask, gravity-aligned frame poses and fitted
/// task regions.
#[derive(Debug, Clone)]
pub struct PreparedVideo {
    pub video: EgoVideo,
    pub passing: Vec<bool>,
    pub aligned: Vec<GravityAlignedPose>,
    pub regions: BTreeMap<String, TaskRegion>,
}

impl PreparedVideo {
    pub fn new(video: EgoVideo) -> Result<Self> {
        Self::with_max_speed(video, DEFAULT_MAX_SPEED)
    }

    pub fn with_max_speed(video: EgoVideo, v_max: f64) -> Result<Self> {
        let passing = velocity_filter(&video, v_max)?;
        let regions = compute_task_regions_masked(&video, &passing)?;
        let aligned = video.frames.iter().map(|f| gravity_align(&f.pose)).collect::<Result<_>>()?;
        Ok(Self { video, passing, aligned, regions })
    }

    pub fn region(&self, task_id: &str) -> Result<&GroundGaussian> {
        self.regions
            .get(task_id)
            .map(|r| &r.region)
            .ok_or_else(|| Error::Annotation(format!("unknown task {task_id:?}")))
    }

    /// Target region of `task_id` in the ego frame of the frame at `position`.
    pub fn target(&self, position: usize, task_id: &str) -> Result<GroundGaussian> {
        Ok(rectify(self.region(task_id)?, &self.aligned[position]))
    }

    pub fn passing_positions(&self) -> Vec<usize> {
        (0..self.passing.len()).filter(|&p| self.passing[p]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSplit {
    pub scene_id: String,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

fn check_fraction(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be in (0, 1), got {value}")))
    }
}

fn ceil_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Seeded per-video task split; the first `ceil(ratio * n)` shuffled tasks
/// train. Both sides come back sorted.
pub fn split_tasks(videos: &[EgoVideo], ratio: f64, seed: u64) -> Result<Vec<TaskSplit>> {
    check_fraction("task split ratio", ratio)?;
    Ok(videos
        .iter()
        .map(|video| {
            let mut ids: Vec<String> = video.tasks.iter().map(|t| t.task_id.clone()).collect();
            ids.sort();
            ids.shuffle(&mut rng_for(seed, &format!("split-tasks:{}", video.scene_id)));
            let n_train = ceil_count(ratio, ids.len()).min(ids.len());
            let mut test = ids.split_off(n_train);
            ids.sort();
            test.sort();
            TaskSplit { scene_id: video.scene_id.clone(), train: ids, test }
        })
        .collect())
}

/// Holds out a contiguous block of `ceil(holdout * n)` frame positions whose
/// start is drawn uniformly from the valid starts.
pub fn split_frames(video: &EgoVideo, holdout: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    check_fraction("frame holdout", holdout)?;
    let n = video.frames.len();
    let block = ceil_count(holdout, n).clamp(1, n.max(1));
    let start = rng_for(seed, &format!("split-frames:{}", video.scene_id)).gen_range(0..=n - block);
    let test: Vec<usize> = (start..start + block).collect();
    let train = (0..start).chain(start + block..n).collect();
    Ok((train, test))
}

/// One (image, task) training example. The target is the task's world
/// region rectified into the gravity-aligned frame of the image.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub scene_id: String,
    /// Position of the image frame in its video's `frames`.
    pub image_frame_index: usize,
    pub image_key: String,
    pub task_id: String,
    pub target_region_ego: GroundGaussian,
}

/// Cross product of the velocity-passing frames among `frame_positions`
/// with every task in `task_ids`.
pub fn make_pairs(
    prepared: &PreparedVideo,
    task_ids: &[String],
    frame_positions: &[usize],
) -> Result<Vec<TrainingPair>> {
    let regions: Vec<&GroundGaussian> = task_ids.iter().map(|id| prepared.region(id)).collect::<Result<_>>()?;
    let mut pairs = Vec::with_capacity(frame_positions.len() * task_ids.len());
    for &pos in frame_positions {
        if !prepared.passing[pos] {
            continue;
        }
        let frame = &prepared.video.frames[pos];
        for (task_id, region) in task_ids.iter().zip(&regions) {
            pairs.push(TrainingPair {
                scene_id: prepared.video.scene_id.clone(),
                image_frame_index: pos,
                image_key: frame.image_key.clone(),
                task_id: task_id.clone(),
                target_region_ego: rectify(region, &prepared.aligned[pos]),
            });
        }
    }
    Ok(pairs)
}

/// Phrasings per task id across a set of videos (description first).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhraseBook {
    phrases: BTreeMap<String, Vec<String>>,
}

impl PhraseBook {
    pub fn from_videos<'a>(videos: impl IntoIterator<Item = &'a EgoVideo>) -> Result<Self> {
        let mut book = PhraseBook::default();
        for video in videos {
            for task in &video.tasks {
                let phrasings: Vec<String> = task.phrasings().map(str::to_string).collect();
                match book.phrases.get(&task.task_id) {
                    Some(existing) if *existing != phrasings => {
                        return Err(Error::Annotation(format!(
                            "task id {:?} has conflicting descriptions across videos",
                            task.task_id
                        )))
                    }
                    _ => {
                        book.phrases.insert(task.task_id.clone(), phrasings);
                    }
                }
            }
        }
        Ok(book)
    }

    pub fn get(&self, task_id: &str) -> Result<&[String]> {
        self.phrases
            .get(task_id)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Annotation(format!("no phrasings for task {task_id:?}")))
    }

    pub fn description(&self, task_id: &str) -> Result<&str> {
        Ok(&self.get(task_id)?[0])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Vec<String>)> {
        self.phrases.iter()
    }
}

/// Tab-separated region table: `scene task mx my mz sigma frames fallback`.
pub fn regions_table(prepared: &[PreparedVideo]) -> String {
    let mut out = String::from("scene\ttask\tmean_x\tmean_y\tmean_z\tsigma\tframes\tfallback\n");
    for p in prepared {
        for (id, r) in &p.regions {
            let m = r.region.mean;
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                p.video.scene_id, id, m.x, m.y, m.z, r.region.sigma, r.frames, r.fallback
            );
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn frame(i: i64, t: f64, p: [f64; 3]) -> Frame {
        Frame {
            index: i,
            timestamp: t,
            pose: Pose::new(Vec3::from(p), Quaternion::identity()),
            image_key: format!("img-{i}"),
        }
    }

    pub(crate) fn task(id: &str, start: i64, end: i64) -> TaskSpan {
        TaskSpan {
            task_id: id.into(),
            description: format!("do {id}"),
            rephrasings: vec![format!("please do {id}")],
            start_frame: start,
            end_frame: end,
        }
    }

    pub(crate) fn video(frames: Vec<Frame>, tasks: Vec<TaskSpan>) -> EgoVideo {
        EgoVideo { scene_id: "kitchen".into(), activity: "noodles".into(), frame_rate_hz: 10.0, frames, tasks }
    }

    fn line_video(step: f64, n: usize) -> EgoVideo {
        let frames = (0..n).map(|i| frame(i as i64, i as f64 * 0.1, [i as f64 * step, 0.0, 1.5])).collect();
        video(frames, vec![])
    }

    #[test]
    fn minimal_fixture_roundtrip() {
        let v = video(vec![frame(0, 0.0, [0.0, 0.0, 1.5]), frame(1, 0.1, [0.001, 0.0, 1.5])], vec![task("t0", 0, 1)]);
        let dir = tempfile::tempdir().unwrap();
        save_video(&v, dir.path()).unwrap();
        let loaded = load_video(dir.path()).unwrap();
        assert_eq!(loaded.frames.len(), 2);
        assert_eq!(loaded, v);
    }

    #[test]
    fn span_past_last_frame_is_rejected() {
        let v = video(vec![frame(0, 0.0, [0.0; 3]), frame(1, 0.1, [0.0; 3])], vec![task("t0", 0, 5)]);
        let dir = tempfile::tempdir().unwrap();
        save_video(&v, dir.path()).unwrap();
        let err = load_video(dir.path()).unwrap_err();
        assert!(err.to_string().contains("tasks.jsonl:1"), "{err}");
    }

    #[test]
    fn malformed_record_reports_line() {
        let v = video(vec![frame(0, 0.0, [0.0; 3])], vec![]);
        let dir = tempfile::tempdir().unwrap();
        save_video(&v, dir.path()).unwrap();
        let path = dir.path().join("frames.jsonl");
        let mut text = fs::read_to_string(&path).unwrap();
        text.push_str("{\"i\": 1, \"t\": 0.1}\n");
        fs::write(&path, text).unwrap();
        let err = load_video(dir.path()).unwrap_err();
        assert!(err.to_string().contains("frames.jsonl:2"), "{err}");
    }

    #[test]
    fn decreasing_indices_are_rejected() {
        let v = video(vec![frame(1, 0.0, [0.0; 3]), frame(1, 0.1, [0.0; 3])], vec![]);
        assert!(v.validate().is_err());
    }

    #[test]
    fn slow_walk_passes_filter() {
        // 0.005 m per 0.1 s = 0.05 m/s everywhere
        let v = line_video(0.005, 12);
        assert!(velocity_filter(&v, 0.1).unwrap().iter().all(|&p| p));
    }

    #[test]
    fn fast_walk_fails_filter() {
        // 0.05 m per 0.1 s = 0.5 m/s
        let v = line_video(0.05, 12);
        let mask = velocity_filter(&v, 0.1).unwrap();
        assert!(mask[1..11].iter().all(|&p| !p));
    }

    #[test]
    fn single_frame_passes_filter() {
        assert_eq!(velocity_filter(&line_video(1.0, 1), 0.1).unwrap(), vec![true]);
    }

    #[test]
    fn duplicate_timestamps_are_degenerate() {
        let v = video(vec![frame(0, 0.0, [0.0; 3]), frame(1, 0.0, [0.0; 3])], vec![]);
        assert!(matches!(velocity_filter(&v, 0.1), Err(Error::DegenerateTiming { .. })));
    }

    #[test]
    fn regions_use_passing_frames_only() {
        // frames 0-4 lie in the span; only 1 and 3 are slow.
        let positions = [[0.0, 0.0, 1.5], [1.0, 0.0, 1.5], [1.0, 0.0, 1.5], [1.0, 0.2, 1.5], [1.0, 0.2, 1.5]];
        let frames = positions.iter().enumerate().map(|(i, p)| frame(i as i64, i as f64, *p)).collect();
        let v = video(frames, vec![task("t0", 0, 4)]);
        let mask = vec![false, true, false, true, false];
        let regions = compute_task_regions_masked(&v, &mask).unwrap();
        let r = regions["t0"];
        let expected = fit_task_region(&[Vec3::from(positions[1]), Vec3::from(positions[3])]).unwrap();
        assert_eq!(r.frames, 2);
        assert!(!r.fallback);
        assert_eq!(r.region, expected);
    }

    #[test]
    fn regions_fall_back_when_nothing_passes() {
        let v = video(vec![frame(0, 0.0, [0.0; 3]), frame(1, 1.0, [5.0, 0.0, 0.0])], vec![task("t0", 0, 1)]);
        let r = compute_task_regions(&v).unwrap()["t0"];
        assert!(r.fallback);
        assert_eq!(r.frames, 2);
    }

    #[test]
    fn stationary_task_clamps_sigma() {
        let frames = (0..5).map(|i| frame(i, i as f64 * 0.1, [1.0, 1.0, 0.0])).collect();
        let v = video(frames, vec![task("t0", 0, 4)]);
        let r = compute_task_regions(&v).unwrap()["t0"].region;
        assert_eq!(r.mean, Vec3::new(1.0, 1.0, 0.0));
        assert_eq!(r.sigma, crate::geometry::SIGMA_MIN);
    }

    #[test]
    fn empty_span_is_an_annotation_error() {
        let v = video(vec![frame(0, 0.0, [0.0; 3]), frame(4, 0.4, [0.0; 3])], vec![task("t0", 1, 3)]);
        assert!(matches!(compute_task_regions(&v), Err(Error::Annotation(_))));
    }

    fn many_tasks(n: usize) -> EgoVideo {
        let frames = (0..n as i64).map(|i| frame(i, i as f64 * 0.1, [0.0; 3])).collect();
        let tasks = (0..n).map(|i| task(&format!("t{i:02}"), i as i64, i as i64)).collect();
        video(frames, tasks)
    }

    #[test]
    fn task_split_counts_and_determinism() {
        let v = vec![many_tasks(10)];
        let a = split_tasks(&v, 0.8, 3).unwrap();
        assert_eq!((a[0].train.len(), a[0].test.len()), (8, 2));
        assert_eq!(a, split_tasks(&v, 0.8, 3).unwrap());
        let mut all: Vec<_> = a[0].train.iter().chain(&a[0].test).cloned().collect();
        all.sort();
        assert_eq!(all.len(), 10);
        all.dedup();
        assert_eq!(all.len(), 10);
        let v30 = vec![many_tasks(30)];
        assert_eq!(split_tasks(&v30, 0.8, 0).unwrap()[0].train.len(), 24);
        assert!(split_tasks(&v, 1.0, 0).is_err());
    }

    #[test]
    fn frame_split_is_contiguous_block() {
        let v = many_tasks(100);
        let (train, test) = split_frames(&v, 0.1, 9).unwrap();
        assert_eq!(test.len(), 10);
        assert_eq!(test[test.len() - 1] - test[0] + 1, test.len());
        assert_eq!(train.len(), 90);
        assert_eq!((train, test.clone()), split_frames(&v, 0.1, 9).unwrap());
        assert!(split_frames(&v, 0.0, 9).is_err());
    }

    #[test]
    fn pairs_are_cross_product_of_passing_frames() {
        let frames = (0..5).map(|i| frame(i, i as f64 * 0.1, [0.0, 0.0, 1.5])).collect();
        let tasks = vec![task("a", 0, 1), task("b", 2, 3), task("c", 4, 4)];
        let p = PreparedVideo::new(video(frames, tasks)).unwrap();
        let ids: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let pairs = make_pairs(&p, &ids, &[0, 1, 2, 3, 4]).unwrap();
        assert_eq!(pairs.len(), 15);
        for pair in &pairs {
            let expected = rectify(
                p.region(&pair.task_id).unwrap(),
                &gravity_align(&p.video.frames[pair.image_frame_index].pose).unwrap(),
            );
            assert_eq!(pair.target_region_ego, expected);
        }
    }

    #[test]
    fn in_span_target_is_near_camera() {
        // camera sits on the task mean while performing it
        let frames =
            vec![frame(0, 0.0, [2.0, 1.0, 1.5]), frame(1, 0.1, [2.0, 1.0, 1.5]), frame(2, 0.2, [2.0, 1.0, 1.5])];
        let p = PreparedVideo::new(video(frames, vec![task("t", 0, 2)])).unwrap();
        let pairs = make_pairs(&p, &["t".to_string()], &[1]).unwrap();
        let target = pairs[0].target_region_ego;
        assert!(target.mean.norm() < target.sigma);
    }

    #[test]
    fn phrasebook_rejects_conflicts() {
        let a = video(vec![frame(0, 0.0, [0.0; 3])], vec![task("t", 0, 0)]);
        let mut b = a.clone();
        b.tasks[0].description = "something else".into();
        assert!(PhraseBook::from_videos([&a, &b]).is_err());
        let book = PhraseBook::from_videos([&a, &a]).unwrap();
        assert_eq!(book.get("t").unwrap(), ["do t", "please do t"]);
    }

    proptest! {
        #[test]
        fn regions_ignore_frame_order(
            pts in proptest::collection::vec((-3.0..3.0f64, -3.0..3.0f64, 0.0..2.0f64), 1..30),
            seed in 0u64..1000,
        ) {
            let positions: Vec<Vec3> = pts.iter().map(|&(x, y, z)| Vec3::new(x, y, z)).collect();
            let mut shuffled = positions.clone();
            shuffled.shuffle(&mut rng_for(seed, "perm"));
            let a = fit_task_region(&positions).unwrap();
            let b = fit_task_region(&shuffled).unwrap();
            prop_assert!((a.mean - b.mean).norm() < 1e-12);
            prop_assert!((a.sigma - b.sigma).abs() < 1e-12);
        }

        #[test]
        fn task_splits_partition(n in 1usize..40, seed in 0u64..100, ratio in 0.05..0.95f64) {
            let v = vec![many_tasks(n)];
            let s = &split_tasks(&v, ratio, seed).unwrap()[0];
            prop_assert_eq!(s.train.len() + s.test.len(), n);
            prop_assert!(s.train.iter().all(|t| !s.test.contains(t)));
        }
    }
}
