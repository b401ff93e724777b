//! `train`: fit the joint sequence model on the ingested panel and write
//! the checkpoint, the loss history, and rolling validation forecasts.

use crate::artifacts::{self, CommandError};
use crate::commands::{load_panel, load_shares, validation, write_effective_config};
use crate::config::RunConfig;
use repopulse::pipeline::run_lstm;

pub fn run(cfg: &RunConfig) -> Result<u8, CommandError> {
    let panel = load_panel(cfg)?;
    let shares = load_shares(cfg, &panel)?;
    let counts = panel.counts_f64();

    let run = run_lstm(&counts, &shares, &cfg.lstm_run_config()).map_err(validation)?;
    let checkpoint = run.model.to_checkpoint_json().map_err(validation)?;

    write_effective_config(cfg)?;
    artifacts::write_file(&artifacts::artifact(&cfg.out_dir, artifacts::CHECKPOINT), &checkpoint)?;
    artifacts::write_file(
        &artifacts::artifact(&cfg.out_dir, artifacts::HISTORY),
        &artifacts::history_to_csv(&run.history),
    )?;
    artifacts::write_file(
        &artifacts::artifact(&cfg.out_dir, artifacts::LSTM_FORECASTS),
        &artifacts::forecasts_to_csv(panel.repo_ids(), &run.val_windows, &run.predictions, &run.actuals),
    )?;

    println!(
        "trained on {} repos: stopped after epoch {}, best validation loss {:.6} at epoch {}, {} validation windows",
        panel.num_repos(),
        run.history.stopped_epoch,
        run.history.val_loss[run.history.best_epoch],
        run.history.best_epoch,
        run.val_windows.len(),
    );
    if !run.degenerate_repos.is_empty() {
        let ids: Vec<&str> =
            run.degenerate_repos.iter().map(|&r| panel.repo_ids()[r].as_str()).collect();
        println!(
            "note: {} repos had constant training counts and carry no signal: {}",
            ids.len(),
            ids.join(", ")
        );
    }
    Ok(0)
}
