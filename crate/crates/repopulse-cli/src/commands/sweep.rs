//! `sweep`: train one model per candidate loop-back length and report the
//! total average RMSE each achieves, plus the argmin.

use crate::artifacts::{self, CommandError};
use crate::commands::{load_panel, load_shares, write_effective_config};
use crate::config::RunConfig;
use repopulse::lstm::sweep_loopback;

pub fn run(cfg: &RunConfig) -> Result<u8, CommandError> {
    let panel = load_panel(cfg)?;
    let shares = load_shares(cfg, &panel)?;

    let report = sweep_loopback(&panel.counts_f64(), &shares, &cfg.sweep_config());

    write_effective_config(cfg)?;
    artifacts::write_file(&artifacts::artifact(&cfg.out_dir, artifacts::SWEEP), &report.to_csv())?;

    for row in &report.rows {
        match (&row.rmse_total, &row.error) {
            (Some(v), _) => println!("loop-back {}: rmse_total {v:.6}", row.loopback),
            (None, Some(e)) => println!("loop-back {}: failed ({e})", row.loopback),
            (None, None) => println!("loop-back {}: no result", row.loopback),
        }
    }
    match report.best_loopback() {
        Some(best) => {
            println!("best loop-back: {best}");
            Ok(0)
        }
        None => Err(CommandError::Validation(
            "no loop-back candidate completed; the panel may be too short for every candidate".into(),
        )),
    }
}
