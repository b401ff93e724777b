//! One module per subcommand, plus the artifact plumbing they share.
//!
//! Every command returns the process exit code on success (ingest uses 2 to
//! flag malformed input lines while still writing its outputs) or a
//! [`CommandError`] whose variant decides between exit 1 (unreadable or
//! missing files) and exit 2 (invalid data or configuration).

pub mod bench;
pub mod evaluate;
pub mod fit_arima;
pub mod ingest;
pub mod segment;
pub mod sweep;
pub mod train;

use crate::artifacts::{self, CommandError};
use crate::config::RunConfig;
use ndarray::Array2;
use repopulse::ingest::{CountPanel, ParseOutcome};
use std::path::Path;

pub fn validation(err: impl std::fmt::Display) -> CommandError {
    CommandError::Validation(err.to_string())
}

/// Records the settings the run actually used, so it can be replayed.
pub fn write_effective_config(cfg: &RunConfig) -> Result<(), CommandError> {
    artifacts::write_file(
        &artifacts::artifact(&cfg.out_dir, artifacts::EFFECTIVE_CONFIG),
        &cfg.to_toml(),
    )
}

/// Loads the ingested panel through its grid sidecar.
pub fn load_panel(cfg: &RunConfig) -> Result<CountPanel, CommandError> {
    let grid = artifacts::grid_from_toml(&artifacts::read_file(&artifacts::artifact(
        &cfg.out_dir,
        artifacts::GRID,
    ))?)?;
    let text = artifacts::read_file(&artifacts::artifact(&cfg.out_dir, artifacts::PANEL))?;
    CountPanel::from_csv(&text, grid).map_err(validation)
}

/// Loads the component size-share matrix aligned with the panel.
pub fn load_shares(cfg: &RunConfig, panel: &CountPanel) -> Result<Array2<f64>, CommandError> {
    let text = artifacts::read_file(&artifacts::artifact(&cfg.out_dir, artifacts::COMPONENTS))?;
    artifacts::shares_from_components_csv(&text, panel.repo_ids(), panel.num_windows())
}

/// Opens and parses the configured event stream.
pub fn read_events(cfg: &RunConfig) -> Result<ParseOutcome, CommandError> {
    let path: &Path = cfg.events.as_deref().ok_or_else(|| {
        CommandError::Validation("no event stream configured; pass --events or set the `events` key".into())
    })?;
    let file = std::fs::File::open(path)
        .map_err(|e| CommandError::Input(format!("cannot read `{}`: {e}", path.display())))?;
    repopulse::ingest::parse_events(std::io::BufReader::new(file))
        .map_err(|e| CommandError::Input(format!("failed reading `{}`: {e}", path.display())))
}
