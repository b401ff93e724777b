//! `evaluate`: read both forecast artifacts, check they describe the same
//! validation span of the same panel, and write the side-by-side metrics.

use crate::artifacts::{self, CommandError};
use crate::commands::{validation, write_effective_config};
use crate::config::RunConfig;
use repopulse::eval::compare;

pub fn run(cfg: &RunConfig) -> Result<u8, CommandError> {
    let lstm = artifacts::forecasts_from_csv(&artifacts::read_file(&artifacts::artifact(
        &cfg.out_dir,
        artifacts::LSTM_FORECASTS,
    ))?)?;
    let arima = artifacts::forecasts_from_csv(&artifacts::read_file(&artifacts::artifact(
        &cfg.out_dir,
        artifacts::ARIMA_FORECASTS,
    ))?)?;

    if lstm.repo_ids != arima.repo_ids || lstm.windows != arima.windows {
        return Err(CommandError::Validation(
            "forecast artifacts cover different repos or windows; re-run train and fit-arima on the same panel".into(),
        ));
    }
    if lstm.actuals != arima.actuals {
        return Err(CommandError::Validation(
            "forecast artifacts disagree on observed counts; they come from different panels".into(),
        ));
    }

    let labels: Vec<String> = lstm.windows.iter().map(|w| w.to_string()).collect();
    let report = compare(
        &[
            ("lstm".to_string(), lstm.predictions.clone()),
            ("arima".to_string(), arima.predictions.clone()),
        ],
        &lstm.actuals,
        &lstm.repo_ids,
        &labels,
    )
    .map_err(validation)?;

    write_effective_config(cfg)?;
    artifacts::write_file(&artifacts::artifact(&cfg.out_dir, artifacts::COMPARISON), &report.to_csv())?;

    for m in &report.models {
        println!("{}: total average rmse {:.6}", m.name, m.total);
    }
    println!("winner: {}", report.winner.as_deref().unwrap_or("n/a"));
    Ok(0)
}
