//! `ingest`: event stream in; count panel, grid sidecar, per-window
//! components, and parse report out.
//!
//! The time grid is derived from the data: it starts at the earliest kept
//! event and spans enough windows to cover the latest. The panel tracks the
//! `top_k` repositories by kept-event volume (ties broken by id); events
//! for all other repositories are tallied as discarded. A stream with
//! malformed lines still produces every artifact but exits with code 2 so
//! scripted pipelines notice the loss.

use crate::artifacts::{self, CommandError};
use crate::commands::{read_events, validation, write_effective_config};
use crate::config::RunConfig;
use repopulse::graph::{assignments_to_csv, cumulative_assignments};
use repopulse::ingest::{bin_events, filter_events, MalformedLine, TimeGrid};
use std::collections::HashMap;

pub fn run(cfg: &RunConfig) -> Result<u8, CommandError> {
    let outcome = read_events(cfg)?;
    let keep = cfg.event_type.keep_set();
    let kept = filter_events(&outcome.records, &keep);

    write_effective_config(cfg)?;
    if kept.is_empty() {
        // nothing to count: write an empty panel and the report, succeed
        artifacts::write_file(&artifacts::artifact(&cfg.out_dir, artifacts::PANEL), "repo_id\n")?;
        write_report(cfg, &outcome.malformed, outcome.records.len(), 0, 0)?;
        println!(
            "no {:?} events in {} records; wrote empty panel",
            cfg.event_type,
            outcome.records.len()
        );
        return Ok(exit_code(&outcome.malformed));
    }

    let first = kept.iter().map(|e| e.timestamp).min().expect("non-empty");
    let last = kept.iter().map(|e| e.timestamp).max().expect("non-empty");
    let window_secs = i64::from(cfg.window_days) * 86_400;
    let num_windows = ((last - first).num_seconds() / window_secs) as usize + 1;
    let grid = TimeGrid::new(first, cfg.window_days, num_windows).map_err(validation)?;

    let mut totals: HashMap<&str, u64> = HashMap::new();
    for ev in &kept {
        *totals.entry(ev.repo_id.as_str()).or_insert(0) += 1;
    }
    let mut ranked: Vec<(&str, u64)> = totals.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(cfg.top_k);
    let tracked: Vec<String> = ranked.into_iter().map(|(id, _)| id.to_string()).collect();

    let binned = bin_events(&kept, &grid, &tracked).map_err(validation)?;
    let assignments = cumulative_assignments(&kept, &grid, &tracked).map_err(validation)?;

    artifacts::write_file(&artifacts::artifact(&cfg.out_dir, artifacts::PANEL), &binned.panel.to_csv())?;
    artifacts::write_file(&artifacts::artifact(&cfg.out_dir, artifacts::GRID), &artifacts::grid_to_toml(&grid))?;
    artifacts::write_file(
        &artifacts::artifact(&cfg.out_dir, artifacts::COMPONENTS),
        &assignments_to_csv(&assignments, &tracked),
    )?;
    write_report(cfg, &outcome.malformed, outcome.records.len(), tracked.len(), binned.discarded)?;

    let final_components = assignments.last().expect("at least one window").num_components();
    println!(
        "tracked {} repos over {} windows of {} days; {} records kept, {} discarded as untracked, {} malformed lines; {} components at the last window",
        tracked.len(),
        num_windows,
        cfg.window_days,
        kept.len(),
        binned.discarded,
        outcome.malformed.len(),
        final_components,
    );
    Ok(exit_code(&outcome.malformed))
}

fn exit_code(malformed: &[MalformedLine]) -> u8 {
    if malformed.is_empty() {
        0
    } else {
        2
    }
}

fn write_report(
    cfg: &RunConfig,
    malformed: &[MalformedLine],
    records: usize,
    tracked: usize,
    discarded: u64,
) -> Result<(), CommandError> {
    let mut report = format!(
        "records: {records}\nmalformed: {}\ntracked_repos: {tracked}\ndiscarded_untracked_events: {discarded}\n",
        malformed.len()
    );
    for m in malformed {
        report.push_str(&format!("line {}: {}\n", m.line_no, m.reason));
    }
    artifacts::write_file(&artifacts::artifact(&cfg.out_dir, artifacts::PARSE_REPORT), &report)
}
