//! Component, loss-term and λ_p ablations: each row trains a variant of a
//! base configuration and scores it on held-out clips.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::config::{ModuleFlags, TrainConfig};
use crate::data::FrameClip;
use crate::error::{Error, Result};
use crate::inference::TrainedModel;
use crate::losses::LossWeights;
use crate::metrics::{evaluate_corpus, Metric, MetricReport};
use crate::model::Cpnet;
use crate::train::train;

/// λ_p values of the hyperparameter sweep.
pub const LAMBDA_P_GRID: [f64; 4] = [1.0, 0.5, 0.1, 0.05];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum AblationTable {
    /// Dense fusion (I), condenser gating (II) and probability-map supervision (III) added in turn.
    Components,
    /// Loss terms accumulated one at a time on the full model.
    Losses,
    /// The probability-consistency weight λ_p on the full model.
    LambdaP,
}

impl AblationTable {
    pub const ALL: [AblationTable; 3] = [AblationTable::Components, AblationTable::Losses, AblationTable::LambdaP];

    /// The table's number in the write-up (2, 3 or 4).
    pub fn number(self) -> u8 {
        match self {
            AblationTable::Components => 2,
            AblationTable::Losses => 3,
            AblationTable::LambdaP => 4,
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            AblationTable::Components => "Ablation of individual components",
            AblationTable::Losses => "Impact of the loss terms",
            AblationTable::LambdaP => "Effect of the weight λ_p",
        }
    }

    /// Row labels and the configurations they train, derived from `base`.
    pub fn variants(self, base: &TrainConfig) -> Vec<(Vec<String>, TrainConfig)> {
        let mut rows = Vec::new();
        match self {
            AblationTable::Components => {
                for enabled in 0..=3 {
                    let mut c = base.clone();
                    c.modules.dense_fusion = enabled >= 1;
                    c.modules.condenser = enabled >= 2;
                    c.modules.prob_map = enabled >= 3;
                    let marks = (1..=3).map(|i| if enabled >= i { "x" } else { "" }.to_string()).collect();
                    rows.push((marks, c));
                }
            }
            AblationTable::Losses => {
                let terms = ["L_adv", "L_r", "L_t", "L_p"];
                let full = base.loss.weights;
                for used in 1..=4 {
                    let mut c = base.clone();
                    c.modules = ModuleFlags::default();
                    let w = &mut c.loss.weights;
                    w.lambda_adv = full.lambda_adv;
                    w.lambda_r = if used >= 2 { full.lambda_r } else { 0.0 };
                    w.lambda_t = if used >= 3 { full.lambda_t } else { 0.0 };
                    w.lambda_p = if used >= 4 { full.lambda_p } else { 0.0 };
                    rows.push((vec![terms[..used].join(" + ")], c));
                }
            }
            AblationTable::LambdaP => {
                for lambda in LAMBDA_P_GRID {
                    let mut c = base.clone();
                    c.modules = ModuleFlags::default();
                    c.loss.weights = LossWeights {
                        lambda_p: lambda,
                        ..base.loss.weights
                    };
                    rows.push((vec![lambda.to_string()], c));
                }
            }
        }
        rows
    }

    fn key_columns(self) -> Vec<&'static str> {
        match self {
            AblationTable::Components => vec!["I", "II", "III"],
            AblationTable::Losses => vec!["Loss functions"],
            AblationTable::LambdaP => vec!["lambda_p"],
        }
    }
}

impl FromStr for AblationTable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "2" => Ok(AblationTable::Components),
            "3" => Ok(AblationTable::Losses),
            "4" => Ok(AblationTable::LambdaP),
            other => Err(Error::invalid(format!("unknown ablation table `{other}` (expected 2, 3 or 4)"))),
        }
    }
}

/// One trained variant; `outcome` holds the failure message when training
/// or evaluation did not complete.
#[derive(Clone, Debug)]
pub struct AblationRow {
    pub keys: Vec<String>,
    pub config: TrainConfig,
    pub outcome: std::result::Result<MetricReport, String>,
}

#[derive(Clone, Debug)]
pub struct AblationResult {
    pub table: AblationTable,
    pub rows: Vec<AblationRow>,
}

impl AblationResult {
    fn header(&self) -> Vec<&'static str> {
        let mut h = self.table.key_columns();
        h.extend(Metric::ALL.iter().map(|m| m.label()));
        h
    }

    fn cells(row: &AblationRow) -> Vec<String> {
        let mut cells = row.keys.clone();
        match &row.outcome {
            Ok(r) => cells.extend(Metric::ALL.iter().map(|m| match m {
                Metric::Ssim => format!("{:.4}", r.ssim),
                Metric::Psnr => format!("{:.2}", r.psnr),
                _ => "n/a".into(),
            })),
            Err(e) => {
                cells.push(format!("failed: {e}"));
                cells.extend(std::iter::repeat_n(String::new(), Metric::ALL.len() - 1));
            }
        }
        cells
    }

    /// Rows whose training and evaluation completed with finite SSIM and PSNR.
    pub fn complete_rows(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.outcome.as_ref().is_ok_and(|m| m.ssim.is_finite() && m.psnr.is_finite()))
            .count()
    }

    pub fn table(&self) -> String {
        let header = self.header();
        let rows: Vec<Vec<String>> = self.rows.iter().map(Self::cells).collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|i| {
                rows.iter()
                    .filter_map(|r| r.get(i))
                    .filter(|c| !c.starts_with("failed"))
                    .map(|c| c.chars().count())
                    .chain([header[i].chars().count()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = format!("Table {}: {}\n", self.table.number(), self.table.title());
        let line = |cells: &[String], out: &mut String| {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, &w)| format!("{c:<w$}"))
                .collect();
            let _ = writeln!(out, "{}", parts.join(" | ").trim_end());
        };
        line(&header.iter().map(|h| h.to_string()).collect::<Vec<_>>(), &mut out);
        for row in &rows {
            line(row, &mut out);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.header())?;
        for row in &self.rows {
            w.write_record(Self::cells(row))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

fn run_row(config: &TrainConfig, train_clips: &[FrameClip], eval_clips: &[FrameClip]) -> Result<MetricReport> {
    let outcome = train(config, train_clips.to_vec(), None)?;
    let model = TrainedModel::new(Cpnet::from_config(config)?, outcome.final_checkpoint.params);
    evaluate_corpus(&model, eval_clips, &Metric::ALL)
}

/// Trains and evaluates every row of `table`. Each row writes its run into
/// `base.output_dir/table{n}/row{i}`; a failing row is recorded and the
/// remaining rows still run.
pub fn run_ablation(
    table: AblationTable,
    base: &TrainConfig,
    train_clips: &[FrameClip],
    eval_clips: &[FrameClip],
) -> AblationResult {
    let rows = table
        .variants(base)
        .into_iter()
        .enumerate()
        .map(|(i, (keys, mut config))| {
            config.output_dir = base.output_dir.join(format!("table{}", table.number())).join(format!("row{i}"));
            let outcome = run_row(&config, train_clips, eval_clips).map_err(|e| e.to_string());
            AblationRow { keys, config, outcome }
        })
        .collect();
    AblationResult { table, rows }
}

/// All three tables, twelve rows in total.
pub fn run_ablation_suite(base: &TrainConfig, train_clips: &[FrameClip], eval_clips: &[FrameClip]) -> Vec<AblationResult> {
    AblationTable::ALL
        .iter()
        .map(|&t| run_ablation(t, base, train_clips, eval_clips))
        .collect()
}
