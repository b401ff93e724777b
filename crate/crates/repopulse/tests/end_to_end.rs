//! Full-pipeline exercise: wire-format events in, forecasts and segments out.
//!
//! Two groups of repositories with disjoint user pools are simulated, so the
//! interaction graph has two components and the panel has a known cell count
//! for every window. The stream then flows through parsing, filtering,
//! binning, component tracking, both forecasting runs, the comparison
//! report, and segmentation, with oracle checks at each stage.

use chrono::{Duration, TimeZone, Utc};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use repopulse::graph::{cumulative_assignments, share_matrix};
use repopulse::ingest::{
    bin_events, filter_events, parse_events_str, CountPanel, EventType, TimeGrid,
};
use repopulse::lstm::TrainConfig;
use repopulse::pipeline::{
    compare_lstm_arima, run_arima, run_lstm, ArimaRunConfig, LstmRunConfig,
};
use repopulse::segment::{
    build_user_features, community_file_csv, default_communities, ensemble_agglomerate,
    minibatch_kmeans, read_community_file, segment_report_csv, topic_vocabulary,
};
use std::collections::{BTreeMap, BTreeSet, HashSet};

const WINDOW_DAYS: u32 = 10;
const NUM_WINDOWS: usize = 36;

fn tracked_repos() -> Vec<String> {
    ["alpha/one", "alpha/two", "beta/one", "beta/two"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

/// Expected count for a (repo, window) cell: smooth seasonal shapes per
/// group so the series are forecastable, strictly positive so every window
/// has interactions.
fn planted_count(repo: usize, t: usize) -> u64 {
    let x = t as f64;
    let level = match repo {
        0 => 6.0 + 3.0 * (x * std::f64::consts::TAU / 12.0).sin(),
        1 => 7.0 + 3.0 * (x * std::f64::consts::TAU / 12.0).sin(),
        2 => 5.0 + 2.0 * (x * std::f64::consts::TAU / 9.0).cos(),
        _ => 6.0 + 2.0 * (x * std::f64::consts::TAU / 9.0).cos(),
    };
    level.round().max(1.0) as u64
}

/// Builds the wire-format stream: `planted_count` events per cell, users
/// drawn from the owning group's pool, three malformed lines at known
/// positions, plus two events for an untracked repository.
fn synthetic_stream() -> (String, Array2<u64>) {
    let start = Utc.with_ymd_and_hms(2015, 1, 3, 0, 0, 0).unwrap();
    let repos = tracked_repos();
    let mut rng = ChaCha8Rng::seed_from_u64(977);
    let mut lines: Vec<String> = Vec::new();
    let mut expected = Array2::<u64>::zeros((repos.len(), NUM_WINDOWS));

    for t in 0..NUM_WINDOWS {
        let window_start = start + Duration::days(i64::from(WINDOW_DAYS) * t as i64);
        for (r, repo) in repos.iter().enumerate() {
            let pool_prefix = if r < 2 { "ua" } else { "ub" };
            let count = planted_count(r, t);
            expected[[r, t]] = count;
            for _ in 0..count {
                let user = format!("{pool_prefix}{}", rng.random_range(0..6));
                let offset = rng.random_range(0..(i64::from(WINDOW_DAYS) * 86_400));
                let ts = (window_start + Duration::seconds(offset))
                    .format("%Y-%m-%dT%H:%M:%SZ");
                let kind = if rng.random_range(0..4) == 0 { "ForkEvent" } else { "WatchEvent" };
                lines.push(format!(
                    r#"{{"type":"{kind}","actor":"{user}","repo":"{repo}","created_at":"{ts}"}}"#
                ));
            }
        }
    }
    // untracked repo touched by a group-a user: must land in the discard tally
    lines.push(format!(
        r#"{{"type":"WatchEvent","actor":"ua0","repo":"stray/repo","created_at":"{}"}}"#,
        (start + Duration::days(3)).format("%Y-%m-%dT%H:%M:%SZ")
    ));
    lines.push(format!(
        r#"{{"type":"WatchEvent","actor":"ua1","repo":"stray/repo","created_at":"{}"}}"#,
        (start + Duration::days(14)).format("%Y-%m-%dT%H:%M:%SZ")
    ));
    // known corruption: bad json, unknown type, bad timestamp
    lines.insert(10, "{not json".to_string());
    lines.insert(100, r#"{"type":"DanceEvent","actor":"u","repo":"r","created_at":"2015-01-04T00:00:00Z"}"#.to_string());
    lines.push(r#"{"type":"WatchEvent","actor":"u","repo":"r","created_at":"yesterday"}"#.to_string());

    (lines.join("\n"), expected)
}

fn topic_map() -> BTreeMap<String, BTreeSet<String>> {
    let mut topics = BTreeMap::new();
    let set = |names: &[&str]| names.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    topics.insert("alpha/one".to_string(), set(&["ml", "rust"]));
    topics.insert("alpha/two".to_string(), set(&["ml", "rust"]));
    topics.insert("beta/one".to_string(), set(&["web"]));
    topics.insert("beta/two".to_string(), set(&["web", "db"]));
    topics
}

#[test]
fn events_to_forecasts_and_segments() {
    let (stream, expected_counts) = synthetic_stream();
    let repos = tracked_repos();
    let start = Utc.with_ymd_and_hms(2015, 1, 3, 0, 0, 0).unwrap();
    let grid = TimeGrid::new(start, WINDOW_DAYS, NUM_WINDOWS).unwrap();

    // parse: the three corrupted lines surface with their line numbers
    let outcome = parse_events_str(&stream);
    let total_lines = stream.lines().count();
    assert_eq!(outcome.malformed.len(), 3);
    assert_eq!(outcome.malformed[0].line_no, 11);
    assert_eq!(outcome.malformed[1].line_no, 101);
    assert_eq!(outcome.malformed[2].line_no, total_lines);
    assert_eq!(outcome.records.len(), total_lines - 3);

    // filter to fork + watch (all well-formed events already are)
    let keep: HashSet<EventType> = [EventType::Fork, EventType::Watch].into_iter().collect();
    let kept = filter_events(&outcome.records, &keep);
    assert_eq!(kept.len(), outcome.records.len());

    // bin: panel equals the planted counts, strays counted as discarded
    let binned = bin_events(&kept, &grid, &repos).unwrap();
    assert_eq!(binned.discarded, 2);
    assert_eq!(binned.panel.counts(), &expected_counts);
    let cell_sum: u64 = binned.panel.counts().iter().sum();
    assert_eq!(cell_sum + binned.discarded, kept.len() as u64);

    // panel CSV round-trips exactly
    let csv = binned.panel.to_csv();
    let reloaded = CountPanel::from_csv(&csv, grid).unwrap();
    assert_eq!(&reloaded, &binned.panel);

    // components: the two user pools never overlap, so the groups stay
    // separate components while each group fuses internally
    let assignments = cumulative_assignments(&kept, &grid, &repos).unwrap();
    assert_eq!(assignments.len(), NUM_WINDOWS);
    for pair in assignments.windows(2) {
        assert!(pair[0].refines(&pair[1]), "components must only merge over time");
    }
    let last = assignments.last().unwrap();
    assert_eq!(last.labels(), &[0, 0, 2, 2]);
    assert_eq!(last.sizes(), &[2, 2, 2, 2]);

    let shares = share_matrix(&assignments);
    assert_eq!(shares.dim(), (repos.len(), NUM_WINDOWS));
    assert!(shares.iter().all(|&s| (0.0..=1.0).contains(&s)));

    // forecast with both models over the identical validation span
    let counts = binned.panel.counts_f64();
    let lstm_cfg = LstmRunConfig {
        hidden_sizes: vec![8, 8],
        loopback: 4,
        seed: 7,
        train: TrainConfig { max_epochs: 80, patience: 15, ..TrainConfig::default() },
        ..LstmRunConfig::default()
    };
    let lstm = run_lstm(&counts, &shares, &lstm_cfg).unwrap();
    let arima_cfg = ArimaRunConfig { p_max: 2, d_max: 1, q_max: 2, loopback: 4, ..ArimaRunConfig::default() };
    let arima = run_arima(&counts, &arima_cfg).unwrap();

    assert_eq!(lstm.val_windows, arima.val_windows);
    assert!(!lstm.val_windows.is_empty());
    assert!(lstm.predictions.iter().all(|v| v.is_finite() && *v >= 0.0));
    assert!(arima.predictions.iter().all(|v| v.is_finite()));

    let report = compare_lstm_arima(&lstm, &arima, &repos).unwrap();
    assert_eq!(report.models.len(), 2);
    assert!(report.models.iter().all(|m| m.total.is_finite()));
    let winner = report.winner.clone().unwrap();
    assert!(winner == "lstm" || winner == "arima");
    assert!(report.to_csv().starts_with("metric,model,index,value\n"));

    // segmentation: profiles from the same stream, communities from the
    // final component assignment
    let topics = topic_map();
    let vocab = topic_vocabulary(&topics);
    assert_eq!(vocab, vec!["db", "ml", "rust", "web"]);
    let profiles = build_user_features(&kept, &topics, last, &repos);
    assert_eq!(profiles.len(), 12, "six users per pool");
    for p in &profiles {
        let expected_topics: Vec<u8> = if p.user_id.starts_with("ua") {
            vec![0, 1, 1, 0]
        } else {
            // every ub user hit both beta repos at least once over 36 windows
            vec![1, 0, 0, 1]
        };
        assert_eq!(p.topic_vector, expected_topics, "user {}", p.user_id);
    }

    let communities = default_communities(&profiles, vocab.len());
    assert_eq!(communities.len(), 2);
    let roster_csv = community_file_csv(&communities, &profiles);
    let roster = read_community_file(&roster_csv).unwrap();
    assert_eq!(roster.len(), profiles.len());

    // k = community count: no merges, segments mirror the communities
    let set = ensemble_agglomerate(&communities, 2).unwrap();
    assert!(set.merge_trace.is_empty());
    assert_eq!(set.segments.len(), 2);
    let by_id: BTreeMap<usize, &repopulse::segment::Community> =
        communities.iter().map(|c| (c.community_id, c)).collect();
    let mut seen: BTreeSet<usize> = BTreeSet::new();
    for seg in &set.segments {
        for ci in &seg.communities {
            for &m in &by_id[ci].members {
                assert!(seen.insert(m), "user listed in two segments");
            }
        }
    }
    assert_eq!(seen.len(), profiles.len(), "segments must cover every user");
    assert!(set.topic_coverage >= 2);
    assert!(segment_report_csv(&set, &vocab).starts_with("segment_id,size,shannon_H,label_topics\n"));

    // k = 1: everything merges into one segment holding all users
    let merged = ensemble_agglomerate(&communities, 1).unwrap();
    assert_eq!(merged.merge_trace.len(), 1);
    assert_eq!(merged.segments.len(), 1);
    assert_eq!(merged.segments[0].size, profiles.len());

    // clustering splits the pools: topic vectors alone separate them
    let km = minibatch_kmeans(&profiles, 2, 8, 60, 11).unwrap();
    let first_a = km.assignments[profiles.iter().position(|p| p.user_id.starts_with("ua")).unwrap()];
    for (p, &c) in profiles.iter().zip(&km.assignments) {
        if p.user_id.starts_with("ua") {
            assert_eq!(c, first_a, "group-a user {} strayed", p.user_id);
        } else {
            assert_ne!(c, first_a, "group-b user {} strayed", p.user_id);
        }
    }
    assert!(km.inertia <= km.initial_inertia + 1e-9);
}

#[test]
fn replayed_pipeline_is_deterministic() {
    let (stream, _) = synthetic_stream();
    let repos = tracked_repos();
    let start = Utc.with_ymd_and_hms(2015, 1, 3, 0, 0, 0).unwrap();
    let grid = TimeGrid::new(start, WINDOW_DAYS, NUM_WINDOWS).unwrap();

    let run_once = || {
        let outcome = parse_events_str(&stream);
        let keep: HashSet<EventType> = [EventType::Fork, EventType::Watch].into_iter().collect();
        let kept = filter_events(&outcome.records, &keep);
        let binned = bin_events(&kept, &grid, &repos).unwrap();
        let shares = share_matrix(&cumulative_assignments(&kept, &grid, &repos).unwrap());
        let cfg = LstmRunConfig {
            hidden_sizes: vec![6],
            loopback: 4,
            seed: 3,
            train: TrainConfig { max_epochs: 25, patience: 10, ..TrainConfig::default() },
            ..LstmRunConfig::default()
        };
        let run = run_lstm(&binned.panel.counts_f64(), &shares, &cfg).unwrap();
        run.model.to_checkpoint_json().unwrap()
    };
    assert_eq!(run_once(), run_once(), "same stream and seed must reproduce the checkpoint");
}
