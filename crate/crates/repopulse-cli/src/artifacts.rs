//! Artifact files shared between commands: canonical names, the grid
//! sidecar, and CSV readers strict enough to catch stale or hand-edited
//! outputs before they poison a downstream step.

use chrono::{DateTime, Utc};
use ndarray::Array2;
use repopulse::ingest::TimeGrid;
use repopulse::lstm::TrainingHistory;
use repopulse::arima::ArimaModel;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const PANEL: &str = "panel.csv";
pub const GRID: &str = "grid.toml";
pub const COMPONENTS: &str = "components.csv";
pub const PARSE_REPORT: &str = "parse_report.txt";
pub const EFFECTIVE_CONFIG: &str = "effective_config.toml";
pub const CHECKPOINT: &str = "checkpoint.json";
pub const HISTORY: &str = "training_history.csv";
pub const LSTM_FORECASTS: &str = "lstm_forecasts.csv";
pub const ARIMA_MODELS: &str = "arima_models.csv";
pub const ARIMA_FORECASTS: &str = "arima_forecasts.csv";
pub const COMPARISON: &str = "comparison.csv";
pub const SEGMENTS: &str = "segments.csv";
pub const COMMUNITIES: &str = "communities.csv";
pub const CLUSTERS: &str = "clusters.csv";
pub const SWEEP: &str = "sweep.csv";
pub const BENCH_SUMMARY: &str = "bench_summary.csv";

/// Failures split by exit code: missing or unreadable inputs exit 1,
/// everything the user can fix in their data or config exits 2.
#[derive(Debug, Error)]
pub enum CommandError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Validation(String),
}

impl CommandError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CommandError::Input(_) => 1,
            CommandError::Validation(_) => 2,
        }
    }
}

pub fn read_file(path: &Path) -> Result<String, CommandError> {
    std::fs::read_to_string(path)
        .map_err(|e| CommandError::Input(format!("cannot read `{}`: {e}", path.display())))
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CommandError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| CommandError::Input(format!("cannot create `{}`: {e}", dir.display())))?;
    }
    std::fs::write(path, text)
        .map_err(|e| CommandError::Input(format!("cannot write `{}`: {e}", path.display())))
}

pub fn artifact(out_dir: &Path, name: &str) -> PathBuf {
    out_dir.join(name)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSidecar {
    start: String,
    window_days: u32,
    num_windows: usize,
}

pub fn grid_to_toml(grid: &TimeGrid) -> String {
    let sidecar = GridSidecar {
        start: grid.start.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        window_days: grid.window_days,
        num_windows: grid.num_windows,
    };
    toml::to_string_pretty(&sidecar).expect("sidecar serializes")
}

pub fn grid_from_toml(text: &str) -> Result<TimeGrid, CommandError> {
    let sidecar: GridSidecar = toml::from_str(text)
        .map_err(|e| CommandError::Validation(format!("invalid grid sidecar: {e}")))?;
    let start = DateTime::parse_from_rfc3339(&sidecar.start)
        .map_err(|e| CommandError::Validation(format!("invalid grid start `{}`: {e}", sidecar.start)))?
        .with_timezone(&Utc);
    TimeGrid::new(start, sidecar.window_days, sidecar.num_windows)
        .map_err(|e| CommandError::Validation(format!("invalid grid sidecar: {e}")))
}

/// Rebuilds the R x T component size-share matrix from the per-window
/// component CSV, checking that it covers exactly the panel's repositories
/// in panel order for every window.
pub fn shares_from_components_csv(
    text: &str,
    repo_ids: &[String],
    num_windows: usize,
) -> Result<Array2<f64>, CommandError> {
    let bad = |line: usize, msg: String| {
        CommandError::Validation(format!("components CSV line {line}: {msg}"))
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "window,repo_id,component_label,component_size")) => {}
        _ => {
            return Err(CommandError::Validation(
                "components CSV must start with `window,repo_id,component_label,component_size`".into(),
            ))
        }
    }
    let num_repos = repo_ids.len();
    let mut shares = Array2::zeros((num_repos, num_windows));
    let mut row = 0usize;
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let line_no = i + 1;
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(bad(line_no, format!("expected 4 fields, found {}", parts.len())));
        }
        let (t, r) = (row / num_repos, row % num_repos);
        if t >= num_windows {
            return Err(bad(line_no, format!("more rows than {num_windows} windows x {num_repos} repos")));
        }
        let window: usize = parts[0]
            .parse()
            .map_err(|_| bad(line_no, format!("bad window `{}`", parts[0])))?;
        if window != t {
            return Err(bad(line_no, format!("expected window {t}, found {window}")));
        }
        if parts[1] != repo_ids[r] {
            return Err(bad(line_no, format!("expected repo `{}`, found `{}`", repo_ids[r], parts[1])));
        }
        let size: usize = parts[3]
            .parse()
            .map_err(|_| bad(line_no, format!("bad component size `{}`", parts[3])))?;
        if size == 0 || size > num_repos {
            return Err(bad(line_no, format!("component size {size} outside [1, {num_repos}]")));
        }
        shares[[r, t]] = size as f64 / num_repos as f64;
        row += 1;
    }
    if row != num_repos * num_windows {
        return Err(CommandError::Validation(format!(
            "components CSV has {row} data rows, expected {num_repos} repos x {num_windows} windows"
        )));
    }
    Ok(shares)
}

/// Rolling one-step forecasts with their observed targets.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastTable {
    pub repo_ids: Vec<String>,
    pub windows: Vec<usize>,
    /// R x V, aligned with `repo_ids` x `windows`.
    pub predictions: Array2<f64>,
    pub actuals: Array2<f64>,
}

pub fn forecasts_to_csv(
    repo_ids: &[String],
    windows: &[usize],
    predictions: &Array2<f64>,
    actuals: &Array2<f64>,
) -> String {
    let mut out = String::from("repo_id,window,prediction,actual\n");
    for (r, id) in repo_ids.iter().enumerate() {
        for (v, w) in windows.iter().enumerate() {
            out.push_str(&format!("{id},{w},{},{}\n", predictions[[r, v]], actuals[[r, v]]));
        }
    }
    out
}

pub fn forecasts_from_csv(text: &str) -> Result<ForecastTable, CommandError> {
    let bad = |line: usize, msg: String| {
        CommandError::Validation(format!("forecast CSV line {line}: {msg}"))
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "repo_id,window,prediction,actual")) => {}
        _ => {
            return Err(CommandError::Validation(
                "forecast CSV must start with `repo_id,window,prediction,actual`".into(),
            ))
        }
    }
    let mut rows: Vec<(String, usize, f64, f64)> = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let line_no = i + 1;
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(bad(line_no, format!("expected 4 fields, found {}", parts.len())));
        }
        let window: usize = parts[1]
            .parse()
            .map_err(|_| bad(line_no, format!("bad window `{}`", parts[1])))?;
        let pred: f64 = parts[2]
            .parse()
            .map_err(|_| bad(line_no, format!("bad prediction `{}`", parts[2])))?;
        let act: f64 = parts[3]
            .parse()
            .map_err(|_| bad(line_no, format!("bad actual `{}`", parts[3])))?;
        rows.push((parts[0].to_string(), window, pred, act));
    }
    if rows.is_empty() {
        return Err(CommandError::Validation("forecast CSV has no data rows".into()));
    }

    // rows are repo-major; every repo must list the same window sequence
    let windows: Vec<usize> = rows
        .iter()
        .take_while(|(id, ..)| *id == rows[0].0)
        .map(|&(_, w, ..)| w)
        .collect();
    let num_val = windows.len();
    if rows.len() % num_val != 0 {
        return Err(CommandError::Validation(format!(
            "forecast CSV is ragged: {} rows do not divide into spans of {num_val} windows",
            rows.len()
        )));
    }
    let num_repos = rows.len() / num_val;
    let mut repo_ids = Vec::with_capacity(num_repos);
    let mut predictions = Array2::zeros((num_repos, num_val));
    let mut actuals = Array2::zeros((num_repos, num_val));
    for r in 0..num_repos {
        let block = &rows[r * num_val..(r + 1) * num_val];
        let id = &block[0].0;
        if repo_ids.contains(id) {
            return Err(CommandError::Validation(format!("repo `{id}` appears in two row blocks")));
        }
        for (v, (row_id, w, p, a)) in block.iter().enumerate() {
            if row_id != id || *w != windows[v] {
                return Err(CommandError::Validation(format!(
                    "forecast CSV is not a rectangle: repo `{id}` breaks the shared window sequence"
                )));
            }
            predictions[[r, v]] = *p;
            actuals[[r, v]] = *a;
        }
        repo_ids.push(id.clone());
    }
    Ok(ForecastTable { repo_ids, windows, predictions, actuals })
}

pub fn history_to_csv(history: &TrainingHistory) -> String {
    let mut out = String::from("epoch,train_loss,val_loss\n");
    for (e, (tr, va)) in history.train_loss.iter().zip(&history.val_loss).enumerate() {
        out.push_str(&format!("{e},{tr},{va}\n"));
    }
    out
}

pub fn arima_models_to_csv(repo_ids: &[String], models: &[ArimaModel]) -> String {
    let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join("|");
    let mut out = String::from("repo_id,p,d,q,intercept,sigma2,aic,ar_coeffs,ma_coeffs\n");
    for (id, m) in repo_ids.iter().zip(models) {
        out.push_str(&format!(
            "{id},{},{},{},{},{},{},{},{}\n",
            m.p,
            m.d,
            m.q,
            m.intercept,
            m.sigma2,
            m.aic,
            join(&m.ar),
            join(&m.ma)
        ));
    }
    out
}
