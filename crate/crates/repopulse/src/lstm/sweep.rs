//! Loop-back length sweep: retrains the joint model once per candidate
//! window length and scores each on its validation span.

use crate::eval::EvaluationPanel;
use crate::lstm::TrainConfig;
use crate::pipeline::{run_lstm, LstmRunConfig};
use ndarray::Array2;
use rayon::prelude::*;

/// Sweep settings. Every candidate length reuses the same seed, ratio, and
/// training schedule, so rows differ only in the loop-back length.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub l_values: Vec<usize>,
    pub hidden_sizes: Vec<usize>,
    pub split_ratio: f64,
    pub seed: u64,
    pub train: TrainConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            l_values: vec![2, 4, 6, 8, 10, 12],
            hidden_sizes: vec![16, 16],
            split_ratio: 0.8,
            seed: 42,
            train: TrainConfig::default(),
        }
    }
}

/// Outcome for one candidate length. A failed run records its error message
/// and leaves the score empty instead of aborting the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub loopback: usize,
    pub rmse_total: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// The candidate with the smallest validation RMSE; ties keep the row
    /// that appears first (candidates are conventionally listed ascending).
    pub fn best_loopback(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for row in &self.rows {
            if let Some(v) = row.rmse_total {
                if best.map_or(true, |(_, b)| v < b) {
                    best = Some((row.loopback, v));
                }
            }
        }
        best.map(|(l, _)| l)
    }

    /// `loopback,rmse_total` rows in sweep order; failed rows leave the
    /// value column empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("loopback,rmse_total\n");
        for row in &self.rows {
            match row.rmse_total {
                Some(v) => out.push_str(&format!("{},{}\n", row.loopback, v)),
                None => out.push_str(&format!("{},\n", row.loopback)),
            }
        }
        out
    }
}

fn score_one(counts: &Array2<f64>, comp_shares: &Array2<f64>, cfg: &SweepConfig, loopback: usize) -> SweepRow {
    let run_cfg = LstmRunConfig {
        hidden_sizes: cfg.hidden_sizes.clone(),
        loopback,
        split_ratio: cfg.split_ratio,
        seed: cfg.seed,
        train: cfg.train.clone(),
    };
    let outcome = run_lstm(counts, comp_shares, &run_cfg).and_then(|run| {
        let repo_ids: Vec<String> = (0..counts.nrows()).map(|r| format!("r{r}")).collect();
        let labels: Vec<String> = run.val_windows.iter().map(|w| w.to_string()).collect();
        let panel = EvaluationPanel::new(run.actuals.clone(), run.predictions.clone(), repo_ids, labels)?;
        Ok(panel.rmse_total())
    });
    match outcome {
        Ok(v) => SweepRow { loopback, rmse_total: Some(v), error: None },
        Err(e) => SweepRow { loopback, rmse_total: None, error: Some(e.to_string()) },
    }
}

/// Runs every candidate length (in parallel; report keeps candidate order)
/// and returns one row per candidate.
pub fn sweep_loopback(counts: &Array2<f64>, comp_shares: &Array2<f64>, cfg: &SweepConfig) -> SweepReport {
    let rows: Vec<SweepRow> = cfg
        .l_values
        .par_iter()
        .map(|&l| score_one(counts, comp_shares, cfg, l))
        .collect();
    SweepReport { rows }
}
