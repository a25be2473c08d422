use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cpnet::ablation::{run_ablation, AblationTable};
use cpnet::config::TrainConfig;
use cpnet::data::{crop_clip, make_toy_dataset, read_dataset, write_dataset, Image, PRIOR_FRAMES};
use cpnet::data::clip::{read_landmarks_csv, DEFAULT_FRAME_RATE};
use cpnet::inference::TrainedModel;
use cpnet::metrics::{evaluate_corpus, parse_metrics};
use cpnet::train::{prepare_clips, train};
use cpnet::Error;

#[derive(Parser)]
#[command(name = "cpnet", version, about = "Landmark-conditioned talking-face generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a procedural dataset of clip_#### directories.
    MakeToyData {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        clips: usize,
        #[arg(long, default_value_t = 30)]
        frames: usize,
        #[arg(long, default_value_t = 64)]
        res: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train from a TOML config, optionally continuing from a checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Render a video for a landmark track (a landmarks.csv file).
    Generate {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        track: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Directory with frame_00000.png .. frame_00002.png, for models trained with prior frames.
        #[arg(long)]
        bootstrap: Option<PathBuf>,
    },
    /// Score a checkpoint on a directory of clips.
    Evaluate {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "ssim,psnr")]
        metrics: String,
        /// Also write the per-clip report as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Train and score the rows of one ablation table (2, 3 or 4).
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        table: AblationTable,
    },
}

fn load_bootstrap(dir: &Path) -> cpnet::Result<Vec<Image>> {
    (0..PRIOR_FRAMES)
        .map(|i| Image::load_rgb(&dir.join(format!("frame_{i:05}.png"))))
        .collect()
}

fn run(cli: Cli) -> cpnet::Result<()> {
    match cli.command {
        Command::MakeToyData { seed, clips, frames, res, out } => {
            let dataset = make_toy_dataset(seed, clips, frames, res)?;
            let dirs = write_dataset(&out, &dataset)?;
            println!("wrote {} clips to {}", dirs.len(), out.display());
        }
        Command::Train { config, resume } => {
            let config = TrainConfig::load(&config)?;
            let (train_clips, _) = prepare_clips(&config)?;
            let outcome = train(&config, train_clips, resume.as_deref())?;
            if let Some(last) = outcome.rows.last() {
                println!("iteration {}: total loss {:.4}", last.iteration, last.total);
            }
            if let Some(ckpt) = outcome.checkpoints.last() {
                println!("checkpoint {}", ckpt.display());
            }
        }
        Command::Generate { ckpt, track, out, bootstrap } => {
            let model = TrainedModel::load(&ckpt)?;
            let landmarks = read_landmarks_csv(&track)?;
            let boot = bootstrap.as_deref().map(load_bootstrap).transpose()?;
            let name = out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let video = model.generate_video(&name, &landmarks, boot.as_deref(), DEFAULT_FRAME_RATE)?;
            video.write_dir(&out)?;
            println!("wrote {} frames to {}", video.len(), out.display());
        }
        Command::Evaluate { ckpt, data, metrics, csv } => {
            let metrics = parse_metrics(&metrics)?;
            let model = TrainedModel::load(&ckpt)?;
            let clips = read_dataset(&data)?
                .iter()
                .map(|c| crop_clip(c, model.net.resolution()))
                .collect::<cpnet::Result<Vec<_>>>()?;
            let report = evaluate_corpus(&model, &clips, &metrics)?;
            print!("{}", report.table());
            if let Some(path) = csv {
                report.write_csv(&path)?;
            }
        }
        Command::Ablate { config, table } => {
            let config = TrainConfig::load(&config)?;
            let (train_clips, test_clips) = prepare_clips(&config)?;
            let eval = if test_clips.is_empty() { &train_clips } else { &test_clips };
            let result = run_ablation(table, &config, &train_clips, eval);
            print!("{}", result.table());
            std::fs::create_dir_all(&config.output_dir).map_err(|e| Error::io(&config.output_dir, e))?;
            result.write_csv(&config.output_dir.join(format!("table{}.csv", table.number())))?;
            let failed = result.rows.len() - result.complete_rows();
            if failed > 0 {
                return Err(Error::InvalidArgument(format!("{failed} of {} rows failed", result.rows.len())));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 2,
                _ => 3,
            })
        }
    }
}
