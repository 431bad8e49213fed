//! One function per subcommand.

use std::fmt::Write as _;
use std::path::Path;

use affordance_core::dataset::regions_table;
use affordance_core::eval::{
    eval_grounding, eval_localization, eval_stability as stability_metric, histogram_table, localization_table,
    stability_probes, BaselineGrounder, BaselinePredictor, Grounder, ModelPredictor, NearestPrediction,
    OraclePredictor, Predictor, RandomGrounder, Regime, SceneSplit,
};
use affordance_core::model::{finetune as finetune_model, train as train_model, FinetuneMode};
use affordance_core::navigation::{plan_path, polygon_table, rasterize_obstacle, task_obstacle, NavGrid};
use affordance_core::synth::{generate_suite, write_suite, SynthConfig};
use affordance_core::{Checkpoint, EmbeddingCache, TrainConfig, TrainingPair};
use anyhow::{bail, Context, Result};

use crate::workspace::{self, Data, DATA_LINK_FILE, LOSS_FILE, MODEL_FILE};
use crate::Common;

/// Bins and range of the error histograms, meters.
const HISTOGRAM_BINS: usize = 30;
const HISTOGRAM_MAX: f64 = 3.0;

pub fn synth(common: &Common, scenes: usize) -> Result<()> {
    let kv = workspace::config(common)?;
    let seed = workspace::seed(common, &kv, 0)?;
    let d = SynthConfig::default();
    let config = SynthConfig {
        n_stations: kv.get_or("n_stations", d.n_stations)?,
        n_tasks: kv.get_or("n_tasks", d.n_tasks)?,
        embedding_dim: kv.get_or("embedding_dim", d.embedding_dim)?,
        appearance_dim: kv.get_or("appearance_dim", d.appearance_dim)?,
        vision_pose_weight: kv.get_or("vision_pose_weight", d.vision_pose_weight)?,
        text_station_weight: kv.get_or("text_station_weight", d.text_station_weight)?,
        text_task_weight: kv.get_or("text_task_weight", d.text_task_weight)?,
        rephrase_noise: kv.get_or("rephrase_noise", d.rephrase_noise)?,
        ..d
    };
    config.validate()?;
    let out = workspace::out_dir(common)?;
    let suite = generate_suite(seed, scenes, &config)?;
    write_suite(&suite, &out)?;
    let frames: usize = suite.scenes.iter().map(|(_, v)| v.frames.len()).sum();
    println!(
        "wrote {} scenes, {} frames, {} phrases to {}",
        suite.scenes.len(),
        frames,
        suite.text.len(),
        out.display()
    );
    Ok(())
}

pub fn ingest(common: &Common, data: &Path) -> Result<()> {
    let d = Data::load(data)?;
    let mut out = String::from("scene\tframes\ttasks\tphrasings\n");
    for v in &d.videos {
        for f in &v.frames {
            d.vision.get(&f.image_key)?;
        }
        let mut phrasings = 0;
        for t in &v.tasks {
            for p in t.phrasings() {
                d.text.get(p)?;
                phrasings += 1;
            }
        }
        let _ = writeln!(out, "{}\t{}\t{}\t{}", v.scene_id, v.frames.len(), v.tasks.len(), phrasings);
    }
    print!("{out}");
    if common.out.is_some() {
        workspace::write(&workspace::out_dir(common)?.join("ingest.tsv"), &out)?;
    }
    Ok(())
}

pub fn preprocess(common: &Common, data: &Path) -> Result<()> {
    let kv = workspace::config(common)?;
    let seed = workspace::seed(common, &kv, 0)?;
    let d = Data::load(data)?;
    let splits = d.splits(&kv, seed)?;
    let out = workspace::out_dir(common)?;
    workspace::write(&out.join("regions.tsv"), &regions_table(&workspace::prepared(&splits)))?;
    let mut tasks = String::from("scene\ttask\tsplit\n");
    let mut frames = String::from("scene\tframes\tpassing\ttest_start\ttest_end\n");
    for s in &splits {
        let scene = &s.prepared.video.scene_id;
        for t in &s.train_tasks {
            let _ = writeln!(tasks, "{scene}\t{t}\ttrain");
        }
        for t in &s.test_tasks {
            let _ = writeln!(tasks, "{scene}\t{t}\ttest");
        }
        let _ = writeln!(
            frames,
            "{scene}\t{}\t{}\t{}\t{}",
            s.prepared.video.frames.len(),
            s.prepared.passing_positions().len(),
            s.test_frames.first().copied().unwrap_or(0),
            s.test_frames.last().map_or(0, |l| l + 1)
        );
    }
    workspace::write(&out.join("task_splits.tsv"), &tasks)?;
    workspace::write(&out.join("frame_splits.tsv"), &frames)?;
    print!("{frames}");
    Ok(())
}

fn loss_table(history: &[f64]) -> String {
    let mut out = String::from("epoch\tloss\n");
    for (i, l) in history.iter().enumerate() {
        let _ = writeln!(out, "{i}\t{l}");
    }
    out
}

fn save_model(out: &Path, checkpoint: &Checkpoint, data_root: &Path) -> Result<()> {
    checkpoint.save(out.join(MODEL_FILE))?;
    workspace::write(&out.join(LOSS_FILE), &loss_table(&checkpoint.loss_history))?;
    let root = data_root.canonicalize().unwrap_or_else(|_| data_root.to_path_buf());
    workspace::write(&out.join(DATA_LINK_FILE), &format!("{}\n", root.display()))
}

fn training_pairs(splits: &[SceneSplit]) -> Result<Vec<TrainingPair>> {
    let mut pairs = Vec::new();
    for s in splits {
        pairs.extend(s.training_pairs()?);
    }
    Ok(pairs)
}

pub fn train(common: &Common, data: &Path, exclude: &[String]) -> Result<()> {
    let kv = workspace::config(common)?;
    let mut config = TrainConfig::default().apply(&kv)?;
    config.seed = workspace::seed(common, &kv, config.seed)?;
    let d = Data::load(data)?;
    let splits = d.splits(&kv, config.seed)?;
    for e in exclude {
        if !splits.iter().any(|s| &s.prepared.video.scene_id == e) {
            bail!("unknown scene {e:?}");
        }
    }
    let kept: Vec<SceneSplit> = splits.into_iter().filter(|s| !exclude.contains(&s.prepared.video.scene_id)).collect();
    let pairs = training_pairs(&kept)?;
    let checkpoint = train_model(
        &affordance_core::model::TrainingData { pairs: &pairs, phrases: &d.phrases, vision: &d.vision, text: &d.text },
        &config,
    )?;
    let out = workspace::out_dir(common)?;
    save_model(&out, &checkpoint, data)?;
    println!(
        "trained on {} pairs from {} scenes; final loss {:.6}",
        pairs.len(),
        kept.len(),
        checkpoint.loss_history.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

pub fn finetune(common: &Common, model: &Path, data: &Path, scene: &str, mode: &str) -> Result<()> {
    let kv = workspace::config(common)?;
    let mode: FinetuneMode = mode.parse()?;
    let base = workspace::load_checkpoint(model)?;
    let mut config = TrainConfig::finetune().apply(&kv)?;
    config.epochs = kv.get_or("finetune_epochs", TrainConfig::FINETUNE_EPOCHS)?;
    config.hidden = Some(base.hidden().to_vec());
    config.seed = workspace::seed(common, &kv, base.config.seed)?;
    let d = Data::load(data)?;
    let splits = workspace::select_scenes(d.splits(&kv, config.seed)?, &[scene.to_string()])?;
    let pairs = training_pairs(&splits)?;
    let tuned = finetune_model(
        &base,
        &affordance_core::model::TrainingData { pairs: &pairs, phrases: &d.phrases, vision: &d.vision, text: &d.text },
        mode,
        &config,
    )?;
    let out = workspace::out_dir(common)?;
    save_model(&out, &tuned, data)?;
    println!(
        "fine-tuned on {} pairs of {scene}; final loss {:.6}",
        pairs.len(),
        tuned.loss_history.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("string serializes")
}

pub fn predict(common: &Common, model: &Path, data: Option<&Path>, image: &str, task: &str) -> Result<()> {
    let checkpoint = workspace::load_checkpoint(model)?;
    let root = workspace::data_root(data, Some(model))?;
    let d = Data::load(&root)?;
    let text = d.task_text(task);
    let region = checkpoint.predict(image, text, &d.vision, &d.text)?;
    let m = region.mean;
    let line = format!("mu=({:.6},{:.6},{:.6}) sigma={:.6}", m.x, m.y, m.z, region.sigma);
    let record = format!(
        "{{\"image\":{},\"task\":{},\"mu\":[{},{},{}],\"sigma\":{}}}",
        json_string(image),
        json_string(text),
        m.x,
        m.y,
        m.z,
        region.sigma
    );
    println!("{line}");
    println!("{record}");
    if common.out.is_some() {
        workspace::write(&workspace::out_dir(common)?.join("prediction.json"), &format!("{record}\n"))?;
    }
    Ok(())
}

/// Loaded inputs shared by the evaluation commands.
struct EvalInputs {
    data: Data,
    checkpoint: Option<Checkpoint>,
    splits: Vec<SceneSplit>,
    seed: u64,
}

fn eval_inputs(
    common: &Common,
    model: Option<&Path>,
    data: &Path,
    scenes: &[String],
    needs_model: bool,
) -> Result<EvalInputs> {
    let kv = workspace::config(common)?;
    let checkpoint = match model {
        Some(m) => Some(workspace::load_checkpoint(m)?),
        None if needs_model => bail!("this predictor needs --model"),
        None => None,
    };
    let fallback = checkpoint.as_ref().map_or(0, |c| c.config.seed);
    let seed = workspace::seed(common, &kv, fallback)?;
    let data = Data::load(data)?;
    let splits = workspace::select_scenes(data.splits(&kv, seed)?, scenes)?;
    Ok(EvalInputs { data, checkpoint, splits, seed })
}

fn make_predictor<'a>(
    name: &str,
    checkpoint: Option<&'a Checkpoint>,
    vision: &'a EmbeddingCache,
    text: &'a EmbeddingCache,
    splits: &[SceneSplit],
) -> Result<Box<dyn Predictor + 'a>> {
    Ok(match name {
        "model" => Box::new(ModelPredictor {
            checkpoint: checkpoint.context("the model predictor needs --model")?,
            vision,
            text,
        }),
        "baseline" => Box::new(BaselinePredictor::build(&workspace::prepared(splits), vision, text)?),
        "oracle" => Box::new(OraclePredictor),
        other => bail!("unknown predictor {other:?}"),
    })
}

pub fn eval_loc(common: &Common, model: Option<&Path>, data: &Path, predictor: &str, scenes: &[String]) -> Result<()> {
    let inputs = eval_inputs(common, model, data, scenes, predictor == "model")?;
    let p =
        make_predictor(predictor, inputs.checkpoint.as_ref(), &inputs.data.vision, &inputs.data.text, &inputs.splits)?;
    let videos = workspace::prepared(&inputs.splits);
    let mut rows = Vec::new();
    let mut histograms = String::from("label\tlo\thi\tcount\n");
    for regime in Regime::ALL {
        let mut pairs = Vec::new();
        for s in &inputs.splits {
            pairs.extend(s.regime_pairs(regime)?);
        }
        let report = eval_localization(p.as_ref(), &videos, &inputs.data.phrases, &pairs, regime.name())?;
        histograms.push_str(&histogram_table(regime.name(), &report.errors, HISTOGRAM_BINS, HISTOGRAM_MAX));
        rows.extend(report.rows);
    }
    let table = localization_table(&rows);
    let out = workspace::out_dir(common)?;
    workspace::write(&out.join("localization.tsv"), &table)?;
    workspace::write(&out.join("histogram.tsv"), &histograms)?;
    print!("{table}");
    Ok(())
}

fn grounding_frames(splits: &[SceneSplit]) -> Vec<(usize, usize)> {
    splits.iter().enumerate().flat_map(|(i, s)| s.grounding_frames().into_iter().map(move |p| (i, p))).collect()
}

pub fn eval_ground(
    common: &Common,
    model: Option<&Path>,
    data: &Path,
    predictor: &str,
    trials: usize,
    choices: usize,
    scenes: &[String],
) -> Result<()> {
    let inputs = eval_inputs(common, model, data, scenes, predictor == "model")?;
    let (vision, text) = (&inputs.data.vision, &inputs.data.text);
    let videos = workspace::prepared(&inputs.splits);
    let nearest_of;
    let grounder: Box<dyn Grounder + '_> = match predictor {
        "model" | "oracle" => {
            nearest_of = make_predictor(predictor, inputs.checkpoint.as_ref(), vision, text, &inputs.splits)?;
            Box::new(NearestPrediction(nearest_of.as_ref()))
        }
        "baseline" => Box::new(BaselineGrounder { vision, text }),
        "random" => Box::new(RandomGrounder { seed: inputs.seed }),
        other => bail!("unknown predictor {other:?}"),
    };
    let frames = grounding_frames(&inputs.splits);
    let report =
        eval_grounding(grounder.as_ref(), &videos, &inputs.data.phrases, &frames, choices, trials, inputs.seed)?;
    let table = format!(
        "predictor\tchoices\ttrials\tcorrect\taccuracy\n{predictor}\t{choices}\t{}\t{}\t{:.6}\n",
        report.trials,
        report.correct,
        report.accuracy()
    );
    workspace::write(&workspace::out_dir(common)?.join("grounding.tsv"), &table)?;
    print!("{table}");
    Ok(())
}

pub fn eval_stability(
    common: &Common,
    model: Option<&Path>,
    data: &Path,
    predictor: &str,
    images: usize,
    scenes: &[String],
) -> Result<()> {
    let inputs = eval_inputs(common, model, data, scenes, predictor == "model")?;
    let p =
        make_predictor(predictor, inputs.checkpoint.as_ref(), &inputs.data.vision, &inputs.data.text, &inputs.splits)?;
    let videos = workspace::prepared(&inputs.splits);
    let tasks: Vec<(usize, Vec<String>)> =
        inputs.splits.iter().enumerate().map(|(i, s)| (i, s.test_tasks.clone())).collect();
    let frames: Vec<Vec<usize>> = inputs
        .splits
        .iter()
        .map(|s| s.test_frames.iter().copied().filter(|&f| s.prepared.passing[f]).collect())
        .collect();
    let probes = stability_probes(&tasks, &frames, images, inputs.seed);
    let value = stability_metric(p.as_ref(), &videos, &inputs.data.phrases, &probes)?;
    let table = format!("predictor\tprobes\tstability\n{predictor}\t{}\t{value:.6}\n", probes.len());
    workspace::write(&workspace::out_dir(common)?.join("stability.tsv"), &table)?;
    print!("{table}");
    Ok(())
}

pub fn obstacle(
    common: &Common,
    model: &Path,
    data: Option<&Path>,
    image: &str,
    tasks: &[String],
    sigma_bound: f64,
) -> Result<()> {
    let checkpoint = workspace::load_checkpoint(model)?;
    let d = Data::load(&workspace::data_root(data, Some(model))?)?;
    let texts: Vec<String> = tasks.iter().map(|t| d.task_text(t).to_string()).collect();
    let obstacle = task_obstacle(&checkpoint, image, &texts, sigma_bound, &d.vision, &d.text)?;
    let table = polygon_table(&obstacle.hull);
    workspace::write(&workspace::out_dir(common)?.join("obstacle.tsv"), &table)?;
    println!("hull of {} tasks: {} vertices, area {:.4} m^2", tasks.len(), obstacle.hull.len(), obstacle.hull.area());
    Ok(())
}

pub fn plan(
    common: &Common,
    obstacle: Option<&Path>,
    start: &str,
    goal: &str,
    bounds: &str,
    resolution: f64,
) -> Result<()> {
    let b = workspace::parse_floats(bounds, 4)?;
    let empty =
        NavGrid::covering(affordance_core::Vec2::new(b[0], b[1]), affordance_core::Vec2::new(b[2], b[3]), resolution)?;
    let grid = match obstacle {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let hull = affordance_core::geometry::convex_hull(&affordance_core::navigation::parse_points(&text)?)?;
            rasterize_obstacle(&hull, &empty)
        }
        None => empty,
    };
    let out = workspace::out_dir(common)?;
    match plan_path(&grid, workspace::parse_xy(start)?, workspace::parse_xy(goal)?)? {
        Some(path) => {
            workspace::write(&out.join("path.tsv"), &path.to_table())?;
            println!("path of {} cells, length {:.4} m", path.cells.len(), path.cost);
        }
        None => println!("goal unreachable"),
    }
    Ok(())
}
