//! `affordance`: command-line entry point for the affordance toolkit.

mod commands;
mod plot;
mod workspace;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "affordance", version, about = "Spatial task affordances from egocentric video")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Seed for every random choice (splits, initialization, trials).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// key=value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset with mock embedding caches.
    Synth {
        /// Number of scenes to generate.
        #[arg(long, default_value_t = 6)]
        scenes: usize,
    },
    /// Validate dataset directories and summarize them.
    Ingest {
        /// Data root.
        #[arg(long)]
        data: PathBuf,
    },
    /// Filter frames, fit task regions and write the splits.
    Preprocess {
        /// Data root.
        #[arg(long)]
        data: PathBuf,
    },
    /// Train a checkpoint on the training split of every scene.
    Train {
        /// Data root.
        #[arg(long)]
        data: PathBuf,
        /// Scene ids to leave out entirely.
        #[arg(long = "exclude")]
        exclude: Vec<String>,
    },
    /// Continue training a checkpoint on one scene.
    Finetune {
        /// Checkpoint file or the directory holding it.
        #[arg(long)]
        model: PathBuf,
        /// Data root.
        #[arg(long)]
        data: PathBuf,
        /// Scene id to fine-tune on.
        #[arg(long)]
        scene: String,
        /// head_only or all
        #[arg(long, default_value = "head_only")]
        mode: String,
    },
    /// Predict the ego-frame region of a task from one image.
    Predict {
        /// Checkpoint file or the directory holding it.
        #[arg(long)]
        model: PathBuf,
        /// Data root; defaults to the one recorded next to the model.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Image key, e.g. kitchen00/00010.
        #[arg(long)]
        image: String,
        /// Task id or free text.
        #[arg(long)]
        task: String,
    },
    /// Localization error per scene and regime.
    EvalLoc {
        /// Checkpoint file or directory (required for the model predictor).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Data root.
        #[arg(long)]
        data: PathBuf,
        /// model, baseline or oracle
        #[arg(long, default_value = "model")]
        predictor: String,
        /// Restrict to these scene ids; repeatable.
        #[arg(long = "scene")]
        scenes: Vec<String>,
    },
    /// Multiple-choice grounding accuracy.
    EvalGround {
        /// Checkpoint file or directory (required for the model predictor).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Data root.
        #[arg(long)]
        data: PathBuf,
        /// model, baseline, oracle or random
        #[arg(long, default_value = "model")]
        predictor: String,
        /// Number of trials.
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        /// Candidates per trial.
        #[arg(long, default_value_t = 3)]
        choices: usize,
        /// Restrict to these scene ids; repeatable.
        #[arg(long = "scene")]
        scenes: Vec<String>,
    },
    /// Spread of predictions across rephrasings of the held-out tasks.
    EvalStability {
        /// Checkpoint file or directory (required for the model predictor).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Data root.
        #[arg(long)]
        data: PathBuf,
        /// model, baseline or oracle
        #[arg(long, default_value = "model")]
        predictor: String,
        /// Images sampled per task.
        #[arg(long, default_value_t = 5)]
        images: usize,
        /// Restrict to these scene ids; repeatable.
        #[arg(long = "scene")]
        scenes: Vec<String>,
    },
    /// Task obstacle hull for a set of tasks seen from one image.
    Obstacle {
        /// Checkpoint file or the directory holding it.
        #[arg(long)]
        model: PathBuf,
        /// Data root; defaults to the one recorded next to the model.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Image key, e.g. kitchen00/00010.
        #[arg(long)]
        image: String,
        /// Task id or free text; repeat for several tasks.
        #[arg(long = "task", required = true)]
        tasks: Vec<String>,
        /// Circle radius in units of sigma.
        #[arg(long, default_value_t = affordance_core::navigation::DEFAULT_SIGMA_BOUND)]
        sigma_bound: f64,
    },
    /// Plan a path around an obstacle on an occupancy grid.
    Plan {
        /// Obstacle vertex file written by `obstacle`.
        #[arg(long)]
        obstacle: Option<PathBuf>,
        /// x,y
        #[arg(long)]
        start: String,
        /// x,y
        #[arg(long)]
        goal: String,
        /// xmin,ymin,xmax,ymax
        #[arg(long, default_value = "-3,-3,3,3")]
        bounds: String,
        /// Grid cell size in meters.
        #[arg(long, default_value_t = affordance_core::navigation::DEFAULT_RESOLUTION)]
        resolution: f64,
    },
    /// Render result files to SVG.
    Plot {
        /// Files written by eval-loc, eval-ground, obstacle or plan.
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
    },
}

fn init_threads() {
    if let Some(n) = std::env::var("AFFORDANCE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    let result = match cli.command {
        Command::Synth { scenes } => commands::synth(&cli.common, scenes),
        Command::Ingest { data } => commands::ingest(&cli.common, &data),
        Command::Preprocess { data } => commands::preprocess(&cli.common, &data),
        Command::Train { data, exclude } => commands::train(&cli.common, &data, &exclude),
        Command::Finetune { model, data, scene, mode } => commands::finetune(&cli.common, &model, &data, &scene, &mode),
        Command::Predict { model, data, image, task } => {
            commands::predict(&cli.common, &model, data.as_deref(), &image, &task)
        }
        Command::EvalLoc { model, data, predictor, scenes } => {
            commands::eval_loc(&cli.common, model.as_deref(), &data, &predictor, &scenes)
        }
        Command::EvalGround { model, data, predictor, trials, choices, scenes } => {
            commands::eval_ground(&cli.common, model.as_deref(), &data, &predictor, trials, choices, &scenes)
        }
        Command::EvalStability { model, data, predictor, images, scenes } => {
            commands::eval_stability(&cli.common, model.as_deref(), &data, &predictor, images, &scenes)
        }
        Command::Obstacle { model, data, image, tasks, sigma_bound } => {
            commands::obstacle(&cli.common, &model, data.as_deref(), &image, &tasks, sigma_bound)
        }
        Command::Plan { obstacle, start, goal, bounds, resolution } => {
            commands::plan(&cli.common, obstacle.as_deref(), &start, &goal, &bounds, resolution)
        }
        Command::Plot { inputs } => plot::plot(&cli.common, &inputs),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
