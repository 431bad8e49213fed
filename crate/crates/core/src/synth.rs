//! Deterministic synthetic kitchens with known task regions.
//!
//! A scene is a rectangular room with a few work stations. Each station has
//! a standing spot and a counter anchor half a meter towards the nearest
//! wall. Tasks sit near a station; a simulated wearer walks between task
//! spots and lingers at each while facing the counter. Mock vision and text
//! embeddings are derived from the same ground truth.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{save_video, EgoVideo, Frame, TaskSpan};
use crate::encoders::{appearance_mixture, save_cache, Embedding, EmbeddingCache, MockTextEncoder, MockVisionEncoder};
use crate::error::{Error, Result};
use crate::geometry::{GroundGaussian, Pose, Vec2, Vec3};
use crate::seed::{derive_u64, rng_for};

const MAX_LAYOUT_ATTEMPTS: usize = 10_000;
const ANCHOR_OFFSET: f64 = 0.5;

const VERBS: [&str; 15] = [
    "heat", "rinse", "wipe", "open", "close", "fill", "empty", "stir", "chop", "season", "dry", "stack", "check",
    "clean", "sort",
];
const OBJECTS: [&str; 15] = [
    "the skillet",
    "the kettle",
    "the cutting board",
    "the pot",
    "the bowls",
    "the kettle lid",
    "the blender",
    "the sink",
    "the spice rack",
    "the toaster",
    "the fridge",
    "the oven",
    "the jars",
    "the mugs",
    "the tray",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_stations: usize,
    pub n_tasks: usize,
    /// Room extent along x and y, meters. The room spans `[0, w] x [0, h]`.
    pub room: (f64, f64),
    pub min_station_spacing: f64,
    /// Distance kept between standing spots and walls.
    pub wall_margin: f64,
    pub max_task_offset: f64,
    pub sigma_range: (f64, f64),
    pub frame_rate_hz: f64,
    pub transit_speed: f64,
    pub linger_speed: f64,
    pub linger_frames: (usize, usize),
    pub camera_height: f64,
    pub embedding_dim: usize,
    pub appearance_dim: usize,
    /// Norm of the mock image's viewpoint encoding relative to its content.
    pub vision_pose_weight: f64,
    /// Weight of the station appearance direction in a task's text vector.
    pub text_station_weight: f64,
    /// Weight of the task-specific random direction in a task's text vector.
    pub text_task_weight: f64,
    pub rephrase_noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_stations: 5,
            n_tasks: 30,
            room: (4.0, 5.0),
            min_station_spacing: 1.0,
            wall_margin: 0.7,
            max_task_offset: 0.3,
            sigma_range: (0.1, 0.4),
            frame_rate_hz: 10.0,
            transit_speed: 0.5,
            linger_speed: 0.05,
            linger_frames: (20, 40),
            camera_height: 1.55,
            embedding_dim: 64,
            appearance_dim: 16,
            vision_pose_weight: 1.5,
            text_station_weight: 1.0,
            text_task_weight: 0.4,
            rephrase_noise: MockTextEncoder::DEFAULT_NOISE,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.room.0,
            self.room.1,
            self.min_station_spacing,
            self.frame_rate_hz,
            self.transit_speed,
            self.linger_speed,
            self.camera_height,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite()))
            || self.n_stations == 0
            || self.n_tasks == 0
            || self.embedding_dim == 0
            || self.appearance_dim == 0
            || self.linger_frames.0 < 3
            || self.linger_frames.0 > self.linger_frames.1
            || !(0.0 < self.sigma_range.0 && self.sigma_range.0 <= self.sigma_range.1)
        {
            return Err(Error::InvalidParameter("synthetic scene parameters must be positive".into()));
        }
        if self.n_tasks > VERBS.len() * OBJECTS.len() {
            return Err(Error::InvalidParameter(format!("at most {} tasks per scene", VERBS.len() * OBJECTS.len())));
        }
        if 2.0 * self.wall_margin >= self.room.0.min(self.room.1) {
            return Err(Error::InvalidParameter("room too small for its wall margin".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Station {
    /// Where a person stands to work here.
    pub position: Vec2,
    /// Counter point the person faces.
    pub anchor: Vec2,
    pub appearance_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthTask {
    pub task_id: String,
    pub station: usize,
    pub region: GroundGaussian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthScene {
    pub scene_id: String,
    pub room: (f64, f64),
    pub stations: Vec<Station>,
    pub tasks: Vec<SynthTask>,
    pub frame_rate_hz: f64,
    pub transit_speed: f64,
    pub linger_speed: f64,
}

pub fn scene_id(index: usize) -> String {
    format!("kitchen{index:02}")
}

fn kitchen_name(index: usize) -> String {
    format!("kitchen {index}")
}

fn sample_stations(rng: &mut ChaCha8Rng, config: &SynthConfig, scene_seed: u64) -> Result<Vec<Station>> {
    let (w, h) = config.room;
    let m = config.wall_margin;
    for _ in 0..MAX_LAYOUT_ATTEMPTS {
        let mut positions: Vec<Vec2> = Vec::with_capacity(config.n_stations);
        for _ in 0..config.n_stations {
            let p = Vec2::new(rng.gen_range(m..w - m), rng.gen_range(m..h - m));
            if positions.iter().all(|q| (p - q).norm() >= config.min_station_spacing) {
                positions.push(p);
            } else {
                break;
            }
        }
        if positions.len() < config.n_stations {
            continue;
        }
        return Ok(positions
            .into_iter()
            .enumerate()
            .map(|(i, position)| {
                // face the nearest wall
                let walls = [
                    (position.x, Vec2::new(-1.0, 0.0)),
                    (w - position.x, Vec2::new(1.0, 0.0)),
                    (position.y, Vec2::new(0.0, -1.0)),
                    (h - position.y, Vec2::new(0.0, 1.0)),
                ];
                let facing = walls.iter().min_by(|a, b| a.0.total_cmp(&b.0)).map(|(_, d)| *d).expect("four walls");
                Station {
                    position,
                    anchor: position + facing * ANCHOR_OFFSET,
                    appearance_seed: derive_u64(scene_seed, &format!("appearance:{i}")),
                }
            })
            .collect());
    }
    Err(Error::Generation(format!(
        "could not place {} stations {} m apart in a {}x{} m room after {MAX_LAYOUT_ATTEMPTS} attempts",
        config.n_stations, config.min_station_spacing, w, h
    )))
}

fn uniform_disc(rng: &mut ChaCha8Rng, radius: f64) -> Vec2 {
    let r = radius * rng.gen::<f64>().sqrt();
    let a = rng.gen_range(-PI..PI);
    Vec2::new(r * a.cos(), r * a.sin())
}

fn heading(from: Vec2, to: Vec2) -> f64 {
    let d = to - from;
    d.y.atan2(d.x)
}

/// Generates scene number `index` of a suite from its own seed.
pub fn generate_scene(seed: u64, index: usize, config: &SynthConfig) -> Result<(SynthScene, EgoVideo)> {
    config.validate()?;
    let mut rng = rng_for(seed, "scene");
    let stations = sample_stations(&mut rng, config, seed)?;
    let id = scene_id(index);
    let kitchen = kitchen_name(index);

    let mut phrases: Vec<(usize, usize)> =
        (0..VERBS.len()).flat_map(|v| (0..OBJECTS.len()).map(move |o| (v, o))).collect();
    phrases.shuffle(&mut rng);

    let mut tasks = Vec::with_capacity(config.n_tasks);
    let mut spans = Vec::with_capacity(config.n_tasks);
    for (t, &(v, o)) in phrases.iter().enumerate().take(config.n_tasks) {
        // every station gets tasks before any gets a second round
        let station = if t < config.n_stations { t } else { rng.gen_range(0..config.n_stations) };
        let offset = uniform_disc(&mut rng, config.max_task_offset);
        let p = stations[station].position + offset;
        let sigma = rng.gen_range(config.sigma_range.0..=config.sigma_range.1);
        let task_id = format!("k{index:02}-t{t:02}");
        let action = format!("{} {}", VERBS[v], OBJECTS[o]);
        spans.push(TaskSpan {
            task_id: task_id.clone(),
            description: format!("{action} in {kitchen}"),
            rephrasings: vec![
                format!("please {action} in {kitchen}"),
                format!("in {kitchen}, {action}"),
                format!("{action} ({kitchen})"),
            ],
            start_frame: 0,
            end_frame: 0,
        });
        tasks.push(SynthTask {
            task_id,
            station,
            region: GroundGaussian::new(Vec3::new(p.x, p.y, config.camera_height), sigma),
        });
    }

    let mut order: Vec<usize> = (0..tasks.len()).collect();
    order.shuffle(&mut rng);

    let dt = 1.0 / config.frame_rate_hz;
    let transit_step = config.transit_speed * dt;
    let linger_step = config.linger_speed * dt;
    let pitch_noise = Normal::new(0.0, 0.03).expect("valid normal");
    let yaw_noise = Normal::new(0.0, 0.05).expect("valid normal");
    let mut frames: Vec<Frame> = Vec::new();
    let push = |frames: &mut Vec<Frame>, rng: &mut ChaCha8Rng, xy: Vec2, yaw: f64| {
        let i = frames.len() as i64;
        let pitch = 0.25 + pitch_noise.sample(rng);
        let roll = 0.5 * pitch_noise.sample(rng);
        frames.push(Frame {
            index: i,
            timestamp: i as f64 * dt,
            pose: Pose::from_euler(Vec3::new(xy.x, xy.y, config.camera_height), yaw, pitch, roll),
            image_key: format!("{id}/{i:05}"),
        });
    };

    let (w, h) = config.room;
    let mut current = Vec2::new(w / 2.0, h / 2.0);
    let mut yaw = 0.0;
    for &t in &order {
        let task = &tasks[t];
        let target = task.region.mean.xy();
        let distance = (target - current).norm();
        let steps = (distance / transit_step).ceil() as usize;
        if steps > 0 {
            yaw = heading(current, target);
        }
        for k in 1..steps {
            let p = current + (target - current) * (k as f64 / steps as f64);
            push(&mut frames, &mut rng, p, yaw);
        }
        let anchor = stations[task.station].anchor;
        let n_linger = rng.gen_range(config.linger_frames.0..=config.linger_frames.1);
        let start = frames.len() as i64;
        let mut p = target;
        for k in 0..n_linger {
            if k > 0 {
                // slow random walk that never leaves the 1-sigma disc
                loop {
                    let a = rng.gen_range(-PI..PI);
                    let step = Vec2::new(a.cos(), a.sin()) * rng.gen_range(0.0..linger_step);
                    if (p + step - target).norm() <= task.region.sigma {
                        p += step;
                        break;
                    }
                }
            }
            yaw = heading(p, anchor) + yaw_noise.sample(&mut rng);
            push(&mut frames, &mut rng, p, yaw);
        }
        spans[t].start_frame = start;
        spans[t].end_frame = frames.len() as i64 - 1;
        current = p;
    }

    let video = EgoVideo {
        scene_id: id.clone(),
        activity: "cooking".into(),
        frame_rate_hz: config.frame_rate_hz,
        frames,
        tasks: spans,
    };
    video.validate()?;
    let scene = SynthScene {
        scene_id: id,
        room: config.room,
        stations,
        tasks,
        frame_rate_hz: config.frame_rate_hz,
        transit_speed: config.transit_speed,
        linger_speed: config.linger_speed,
    };
    Ok((scene, video))
}

/// Scenes plus the mock embedding caches covering every frame and phrase.
#[derive(Debug, Clone)]
pub struct Suite {
    pub scenes: Vec<(SynthScene, EgoVideo)>,
    pub vision: EmbeddingCache,
    pub text: EmbeddingCache,
}

pub fn scene_seed(seed: u64, index: usize) -> u64 {
    derive_u64(seed, &format!("scene:{index}"))
}

/// Generates `n_scenes` scenes and their caches. Scene `i` depends only on
/// `(seed, i)`, so a longer suite extends a shorter one.
pub fn generate_suite(seed: u64, n_scenes: usize, config: &SynthConfig) -> Result<Suite> {
    if n_scenes == 0 {
        return Err(Error::InvalidParameter("a suite needs at least one scene".into()));
    }
    let scenes = (0..n_scenes).map(|i| generate_scene(scene_seed(seed, i), i, config)).collect::<Result<Vec<_>>>()?;
    let encoder_seed = derive_u64(seed, "encoders");
    let vision_encoder = MockVisionEncoder::new(encoder_seed, config.embedding_dim, config.appearance_dim)
        .with_pose_weight(config.vision_pose_weight);
    let text_encoder = MockTextEncoder { seed: encoder_seed, dim: config.embedding_dim, noise: config.rephrase_noise };
    let mut vision = EmbeddingCache::new(config.embedding_dim);
    let mut text = EmbeddingCache::new(config.embedding_dim);
    for (scene, video) in &scenes {
        let appearances: Vec<Vec<f64>> =
            scene.stations.iter().map(|s| vision_encoder.appearance(s.appearance_seed)).collect();
        let visible: Vec<(Vec2, &[f64])> =
            scene.stations.iter().zip(&appearances).map(|(s, a)| (s.anchor, a.as_slice())).collect();
        for frame in &video.frames {
            let p = frame.pose.position;
            let yaw = crate::geometry::gravity_align(&frame.pose)?.yaw;
            let mixture = appearance_mixture(p.xy(), yaw, &visible, config.appearance_dim);
            vision.insert(frame.image_key.clone(), vision_encoder.encode(&mixture, p.x, p.y, yaw))?;
        }
        for (task, span) in scene.tasks.iter().zip(&video.tasks) {
            let station = vision_encoder.appearance_direction(&appearances[task.station]);
            let own = text_encoder.canonical_f64(&span.description);
            let mixed: Vec<f64> = station
                .iter()
                .zip(&own)
                .map(|(s, o)| config.text_station_weight * s + config.text_task_weight * o)
                .collect();
            let norm = mixed.iter().map(|v| v * v).sum::<f64>().sqrt();
            let base: Vec<f64> = mixed.iter().map(|v| v / norm).collect();
            text.insert(span.description.clone(), Embedding::from_f64(&base))?;
            for phrase in &span.rephrasings {
                text.insert(phrase.clone(), Embedding::from_f64(&text_encoder.perturb(&base, phrase)))?;
            }
        }
    }
    Ok(Suite { scenes, vision, text })
}

pub const VISION_CACHE_FILE: &str = "vision.cache";
pub const TEXT_CACHE_FILE: &str = "text.cache";
pub const TRUTH_FILE: &str = "truth.tsv";

/// Directory of scene `index` under a data root.
pub fn scene_dir(root: &Path, index: usize) -> std::path::PathBuf {
    root.join(format!("scene_{index:02}"))
}

/// Tab-separated ground truth: one row per task.
pub fn truth_table(scenes: &[(SynthScene, EgoVideo)]) -> String {
    let mut out = String::from("scene\ttask\tstation\tmean_x\tmean_y\tmean_z\tsigma\n");
    for (scene, _) in scenes {
        for t in &scene.tasks {
            let m = t.region.mean;
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                scene.scene_id, t.task_id, t.station, m.x, m.y, m.z, t.region.sigma
            );
        }
    }
    out
}

/// Writes one directory per scene, both caches and the truth table.
pub fn write_suite(suite: &Suite, root: impl AsRef<Path>) -> Result<()> {
    let root = root.as_ref();
    std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    for (i, (_, video)) in suite.scenes.iter().enumerate() {
        save_video(video, scene_dir(root, i))?;
    }
    save_cache(&suite.vision, root.join(VISION_CACHE_FILE))?;
    save_cache(&suite.text, root.join(TEXT_CACHE_FILE))?;
    let truth = root.join(TRUTH_FILE);
    std::fs::write(&truth, truth_table(&suite.scenes)).map_err(|e| Error::io(&truth, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{compute_task_regions, velocity_filter};

    #[test]
    fn same_seed_same_scene() {
        let c = SynthConfig::default();
        assert_eq!(generate_scene(5, 0, &c).unwrap(), generate_scene(5, 0, &c).unwrap());
        assert_ne!(generate_scene(5, 0, &c).unwrap().1, generate_scene(6, 0, &c).unwrap().1);
    }

    #[test]
    fn layout_respects_spacing_and_room() {
        let c = SynthConfig::default();
        for seed in 0..10 {
            let (scene, video) = generate_scene(seed, 0, &c).unwrap();
            for (i, a) in scene.stations.iter().enumerate() {
                for b in &scene.stations[i + 1..] {
                    assert!((a.position - b.position).norm() >= c.min_station_spacing);
                }
            }
            for f in &video.frames {
                let p = f.pose.position;
                assert!(p.x > 0.0 && p.x < c.room.0 && p.y > 0.0 && p.y < c.room.1);
            }
            for t in &scene.tasks {
                let m = t.region.mean;
                assert!(m.x > 0.0 && m.x < c.room.0 && m.y > 0.0 && m.y < c.room.1);
            }
        }
    }

    #[test]
    fn impossible_spacing_is_a_generation_error() {
        let c = SynthConfig { n_stations: 40, ..SynthConfig::default() };
        assert!(matches!(generate_scene(0, 0, &c), Err(Error::Generation(_))));
    }

    #[test]
    fn fitted_regions_match_truth() {
        let c = SynthConfig::default();
        let mut total = 0.0;
        let mut n = 0;
        for seed in 0..10 {
            let (scene, video) = generate_scene(seed, 0, &c).unwrap();
            let fitted = compute_task_regions(&video).unwrap();
            for t in &scene.tasks {
                let f = &fitted[&t.task_id];
                assert!(!f.fallback);
                total += (f.region.mean - t.region.mean).norm();
                n += 1;
            }
        }
        assert!(total / n as f64 <= 0.1, "mean error {}", total / n as f64);
    }

    #[test]
    fn lingering_passes_and_transit_fails_the_filter() {
        let c = SynthConfig::default();
        let (_, video) = generate_scene(1, 0, &c).unwrap();
        let mask = velocity_filter(&video, 0.1).unwrap();
        let mut in_span = vec![false; video.frames.len()];
        for t in &video.tasks {
            for p in video.span_positions(t) {
                in_span[p] = true;
            }
        }
        for p in 1..video.frames.len() - 1 {
            let interior_linger = in_span[p - 1] && in_span[p] && in_span[p + 1];
            let interior_transit = !in_span[p - 1] && !in_span[p] && !in_span[p + 1];
            if interior_linger {
                // same span on both sides
                let same = video
                    .tasks
                    .iter()
                    .any(|t| video.span_positions(t).contains(&(p - 1)) && video.span_positions(t).contains(&(p + 1)));
                if same {
                    assert!(mask[p], "linger frame {p} failed");
                }
            }
            if interior_transit {
                assert!(!mask[p], "transit frame {p} passed");
            }
        }
    }

    #[test]
    fn suite_caches_cover_every_key() {
        let c = SynthConfig::default();
        let suite = generate_suite(3, 2, &c).unwrap();
        assert_eq!(suite.scenes.len(), 2);
        for (_, video) in &suite.scenes {
            for f in &video.frames {
                assert!(suite.vision.contains(&f.image_key));
            }
            for t in &video.tasks {
                for p in t.phrasings() {
                    assert!(suite.text.contains(p));
                }
            }
        }
        let longer = generate_suite(3, 3, &c).unwrap();
        assert_eq!(longer.scenes[..2], suite.scenes[..]);
    }
}
