//! `bench`: the self-contained synthetic comparison. For each seed the
//! generator emits a panel of group-coupled count series, both models run
//! the standard train/forecast protocol on it, and the side-by-side report
//! is written per seed plus a one-line-per-seed summary.

use crate::artifacts::{self, CommandError};
use crate::commands::{validation, write_effective_config};
use crate::config::RunConfig;
use crate::synth::coupled_panel;
use repopulse::pipeline::{compare_lstm_arima, run_arima, run_lstm};

pub fn run(cfg: &RunConfig) -> Result<u8, CommandError> {
    write_effective_config(cfg)?;
    let mut summary = String::from("seed,lstm_total,arima_total,winner\n");
    let mut lstm_wins = 0usize;
    let seeds: Vec<u64> = (0..cfg.bench_seeds).map(|i| cfg.seed + i).collect();

    for &seed in &seeds {
        let panel = coupled_panel(
            cfg.bench_repos,
            cfg.bench_windows,
            cfg.bench_groups,
            cfg.bench_coupling,
            seed,
        );
        // the seed drives both the generator and the model initialization
        let mut lstm_cfg = cfg.lstm_run_config();
        lstm_cfg.seed = seed;
        let lstm = run_lstm(&panel.counts, &panel.shares, &lstm_cfg).map_err(validation)?;
        let arima = run_arima(&panel.counts, &cfg.arima_run_config()).map_err(validation)?;
        let report = compare_lstm_arima(&lstm, &arima, &panel.repo_ids).map_err(validation)?;

        artifacts::write_file(
            &artifacts::artifact(&cfg.out_dir, &format!("comparison_seed{seed}.csv")),
            &report.to_csv(),
        )?;
        let totals: Vec<f64> = report.models.iter().map(|m| m.total).collect();
        let winner = report.winner.clone().unwrap_or_default();
        if winner == "lstm" {
            lstm_wins += 1;
        }
        summary.push_str(&format!("{seed},{},{},{winner}\n", totals[0], totals[1]));
        println!(
            "seed {seed}: lstm {:.4} vs arima {:.4} -> {winner}",
            totals[0], totals[1]
        );
    }

    artifacts::write_file(&artifacts::artifact(&cfg.out_dir, artifacts::BENCH_SUMMARY), &summary)?;
    println!(
        "lstm won {lstm_wins} of {} seeds at coupling {}",
        seeds.len(),
        cfg.bench_coupling
    );
    Ok(0)
}
