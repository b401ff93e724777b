//! `fit-arima`: per-repository order search on the panel's training span,
//! then rolling one-step forecasts over the same validation windows the
//! sequence model uses.

use crate::artifacts::{self, CommandError};
use crate::commands::{load_panel, validation, write_effective_config};
use crate::config::RunConfig;
use repopulse::pipeline::run_arima;

pub fn run(cfg: &RunConfig) -> Result<u8, CommandError> {
    let panel = load_panel(cfg)?;
    let run = run_arima(&panel.counts_f64(), &cfg.arima_run_config()).map_err(validation)?;

    write_effective_config(cfg)?;
    artifacts::write_file(
        &artifacts::artifact(&cfg.out_dir, artifacts::ARIMA_MODELS),
        &artifacts::arima_models_to_csv(panel.repo_ids(), &run.models),
    )?;
    artifacts::write_file(
        &artifacts::artifact(&cfg.out_dir, artifacts::ARIMA_FORECASTS),
        &artifacts::forecasts_to_csv(panel.repo_ids(), &run.val_windows, &run.predictions, &run.actuals),
    )?;

    println!(
        "fitted {} models over a ({},{},{}) order grid; {} validation windows",
        run.models.len(),
        cfg.p_max,
        cfg.d_max,
        cfg.q_max,
        run.val_windows.len(),
    );
    for (id, m) in panel.repo_ids().iter().zip(&run.models) {
        println!("  {id}: ({},{},{}) aic {:.3}", m.p, m.d, m.q, m.aic);
    }
    Ok(0)
}
