//! Acceptance suite: one test per release criterion. Each test prints a
//! single PASS/FAIL line (visible with `cargo test --test acceptance --
//! --nocapture`) and then asserts, so a red run still reports every
//! criterion it reached.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use repopulse::arima;
use repopulse::dataset::SequenceSample;
use repopulse::eval::EvaluationPanel;
use repopulse::graph::BipartiteGraph;
use repopulse::lstm::{
    grad_check, init_model, sweep_loopback, EarlyStopTracker, StopDecision, SweepConfig,
};
use repopulse::pipeline::{compare_lstm_arima, run_arima, run_lstm};
use repopulse::segment::{
    ensemble_agglomerate, minibatch_kmeans, shannon_index, Community, UserProfile,
};
use repopulse::TrainConfig;
use repopulse_cli::config::RunConfig;
use repopulse_cli::synth::coupled_panel;
use std::time::Instant;

fn report(number: usize, name: &str, pass: bool) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE CRITERION {number} ({name}): {verdict}");
    assert!(pass, "acceptance criterion {number} ({name}) failed");
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

// --- 1: analytic gradients agree with finite differences -------------------

#[test]
fn criterion_1_gradients_match_finite_differences() {
    let started = Instant::now();
    let (num_repos, num_features, loopback) = (3, 5, 6);
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let model = init_model(num_repos, num_features, &[4, 4], loopback, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let inputs =
            Array2::from_shape_fn((loopback, num_features), |_| rng.random_range(-1.5..1.5));
        let target = Array1::from_shape_fn(num_repos, |_| rng.random_range(-1.5..1.5));
        let sample = SequenceSample { inputs, target, first_window: 0, target_window: loopback };
        worst = worst.max(grad_check(&model, &sample));
    }
    let elapsed = started.elapsed();
    let pass = worst < 1e-4 && elapsed.as_secs_f64() < 30.0;
    println!("  max relative error {worst:.3e} over 20 models in {elapsed:.2?}");
    report(1, "exact gradients", pass);
}

// --- 2: rmse implementations match a brute-force oracle --------------------

#[test]
fn criterion_2_rmse_matches_brute_force_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut pass = true;
    for _ in 0..100 {
        let r = rng.random_range(1..=10);
        let t = rng.random_range(1..=20);
        let actual = Array2::from_shape_fn((r, t), |_| rng.random_range(0.0..50.0));
        let predicted = Array2::from_shape_fn((r, t), |_| rng.random_range(0.0..50.0));
        let ids = (0..r).map(|i| format!("repo{i}")).collect();
        let labels = (0..t).map(|j| j.to_string()).collect();
        let panel = EvaluationPanel::new(actual.clone(), predicted.clone(), ids, labels).unwrap();

        // flat-loop recomputation of each metric
        for tt in 0..t {
            let mut sum = 0.0;
            for rr in 0..r {
                let e = predicted[[rr, tt]] - actual[[rr, tt]];
                sum += e * e;
            }
            pass &= (panel.rmse_t(tt) - (sum / r as f64).sqrt()).abs() < 1e-12;
        }
        for rr in 0..r {
            let mut sum = 0.0;
            for tt in 0..t {
                let e = predicted[[rr, tt]] - actual[[rr, tt]];
                sum += e * e;
            }
            pass &= (panel.rmse_r(rr) - (sum / t as f64).sqrt()).abs() < 1e-12;
        }
        let mut sum = 0.0;
        for rr in 0..r {
            for tt in 0..t {
                let e = predicted[[rr, tt]] - actual[[rr, tt]];
                sum += e * e;
            }
        }
        pass &= (panel.rmse_total() - (sum / (r * t) as f64).sqrt()).abs() < 1e-12;

        // the total is both the window-wise and the repo-wise quadratic mean
        let total_sq = panel.rmse_total().powi(2);
        let by_t: f64 = (0..t).map(|tt| panel.rmse_t(tt).powi(2)).sum::<f64>() / t as f64;
        let by_r: f64 = (0..r).map(|rr| panel.rmse_r(rr).powi(2)).sum::<f64>() / r as f64;
        pass &= (total_sq - by_t).abs() < 1e-10 && (total_sq - by_r).abs() < 1e-10;
    }
    report(2, "rmse oracle equivalence", pass);
}

// --- 3: joint model beats per-series baselines on coupled data -------------

#[test]
fn criterion_3_lstm_beats_arima_on_coupled_synthetic_panels() {
    let started = Instant::now();
    let base = RunConfig::default();
    let mut wins = 0;
    let seeds: Vec<u64> = (base.seed..base.seed + 5).collect();
    for &seed in &seeds {
        let panel = coupled_panel(
            base.bench_repos,
            base.bench_windows,
            base.bench_groups,
            base.bench_coupling,
            seed,
        );
        let mut lstm_cfg = base.lstm_run_config();
        lstm_cfg.seed = seed;
        let lstm = run_lstm(&panel.counts, &panel.shares, &lstm_cfg).unwrap();
        let arima = run_arima(&panel.counts, &base.arima_run_config()).unwrap();
        let cmp = compare_lstm_arima(&lstm, &arima, &panel.repo_ids).unwrap();
        let lstm_total = cmp.models[0].total;
        let arima_total = cmp.models[1].total;
        if lstm_total <= arima_total {
            wins += 1;
        }
        println!("  seed {seed}: lstm {lstm_total:.2} vs arima {arima_total:.2}");
    }
    let elapsed = started.elapsed();
    println!("  lstm won {wins} of {} seeds in {elapsed:.2?}", seeds.len());
    let pass = wins >= 4 && elapsed.as_secs_f64() < 300.0;
    report(3, "cross-repository advantage on coupled synthetic data", pass);
}

// --- 4: incremental components equal a breadth-first-search oracle ---------

/// Component labels and sizes recomputed from scratch by BFS over the
/// user-repo adjacency; labels use the smallest member repo index.
fn bfs_components(num_repos: usize, num_users: usize, edges: &[(usize, usize)]) -> (Vec<usize>, Vec<usize>) {
    let n = num_repos + num_users;
    let mut adj = vec![Vec::new(); n];
    for &(u, r) in edges {
        adj[r].push(num_repos + u);
        adj[num_repos + u].push(r);
    }
    let mut comp = vec![usize::MAX; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = members.len();
        let mut queue = std::collections::VecDeque::from([start]);
        comp[start] = id;
        let mut found = Vec::new();
        while let Some(x) = queue.pop_front() {
            if x < num_repos {
                found.push(x);
            }
            for &y in &adj[x] {
                if comp[y] == usize::MAX {
                    comp[y] = id;
                    queue.push_back(y);
                }
            }
        }
        members.push(found);
    }
    let mut labels = vec![0usize; num_repos];
    let mut sizes = vec![0usize; num_repos];
    for found in &members {
        if let Some(&min_repo) = found.iter().min() {
            for &r in found {
                labels[r] = min_repo;
                sizes[r] = found.len();
            }
        }
    }
    (labels, sizes)
}

#[test]
fn criterion_4_components_match_bfs_and_only_merge() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut pass = true;
    for case in 0..1000 {
        let num_repos = rng.random_range(1..=50);
        let num_users = rng.random_range(1..=50);
        let num_edges = rng.random_range(0..=150);
        let repo_ids: Vec<String> = (0..num_repos).map(|i| format!("repo{i:02}")).collect();
        let edges: Vec<(usize, usize)> = (0..num_edges)
            .map(|_| (rng.random_range(0..num_users), rng.random_range(0..num_repos)))
            .collect();

        let mut graph = BipartiteGraph::new(&repo_ids).unwrap();
        let mut snapshots = Vec::new();
        for (k, &(u, r)) in edges.iter().enumerate() {
            graph.add_edge(&format!("user{u}"), &repo_ids[r]);
            if (k + 1) % 25 == 0 {
                snapshots.push(graph.assignments());
            }
        }
        let last = graph.assignments();

        let (labels, sizes) = bfs_components(num_repos, num_users, &edges);
        pass &= last.labels() == labels.as_slice() && last.sizes() == sizes.as_slice();

        // growing the edge prefix may only merge components, never split
        snapshots.push(last);
        for pair in snapshots.windows(2) {
            pass &= pair[0].refines(&pair[1]);
        }
        if !pass {
            println!("  first divergence at case {case}");
            break;
        }
    }
    report(4, "connected-component correctness", pass);
}

// --- 5: arima recovers planted parameters and orders -----------------------

#[test]
fn criterion_5_arima_recovers_planted_structure() {
    // AR(1) coefficient recovery
    let mut phi_hits = 0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let mut x = 0.0;
        let mut series = Vec::with_capacity(500);
        for t in 0..600 {
            x = 0.7 * x + normal(&mut rng);
            if t >= 100 {
                series.push(x);
            }
        }
        let model = arima::fit_arma(&series, 1, 0).unwrap();
        if (0.6..=0.8).contains(&model.ar[0]) {
            phi_hits += 1;
        }
    }
    println!("  ar(1) coefficient in [0.6, 0.8] for {phi_hits}/50 seeds");

    // order selection: random walks need one difference
    let mut walk_hits = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(700 + seed);
        let mut level = 0.0;
        let series: Vec<f64> = (0..200)
            .map(|_| {
                level += normal(&mut rng);
                level
            })
            .collect();
        let model = arima::select_order(&series, 2, 2, 2).unwrap();
        if model.d == 1 {
            walk_hits += 1;
        }
    }
    println!("  d = 1 chosen on {walk_hits}/20 random walks");

    // order selection: white noise needs no structure at all
    let mut noise_hits = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
        let series: Vec<f64> = (0..400).map(|_| 10.0 + 1.5 * normal(&mut rng)).collect();
        let model = arima::select_order(&series, 1, 2, 1).unwrap();
        if (model.p, model.d, model.q) == (0, 0, 0) {
            noise_hits += 1;
        }
    }
    println!("  (0,0,0) chosen on {noise_hits}/20 white-noise series");

    let pass = phi_hits >= 45 && walk_hits >= 16 && noise_hits >= 16;
    report(5, "arima parameter and order recovery", pass);
}

// --- 6: early stopping never fires while improving, fires when flat --------

#[test]
fn criterion_6_early_stopping_contract() {
    let patience = 7;

    // strictly improving validation loss: must never stop
    let mut tracker = EarlyStopTracker::new(patience, 1e-6);
    let mut stopped_while_improving = false;
    for epoch in 0..500 {
        let loss = 0.99f64.powi(epoch);
        if tracker.observe(loss).1 == StopDecision::Stop {
            stopped_while_improving = true;
        }
    }

    // improves for 20 epochs, then flat: must stop within patience + 1 of
    // the best epoch
    let mut tracker = EarlyStopTracker::new(patience, 1e-6);
    let mut stopped_at = None;
    for epoch in 0..200usize {
        let loss = 0.9f64.powi(epoch.min(19) as i32);
        if tracker.observe(loss).1 == StopDecision::Stop {
            stopped_at = Some(epoch);
            break;
        }
    }
    let flat_ok = match stopped_at {
        Some(epoch) => {
            println!("  flat run: best epoch {}, stopped at {epoch}", tracker.best_epoch());
            epoch >= tracker.best_epoch() && epoch - tracker.best_epoch() <= patience + 1
        }
        None => false,
    };

    let pass = !stopped_while_improving && flat_ok;
    report(6, "early-stopping contract", pass);
}

// --- 7: diversity index edge cases and upper bound -------------------------

#[test]
fn criterion_7_shannon_index_bounds() {
    let single_exact = shannon_index(&[17]) == 0.0;
    let uniform = (shannon_index(&[5, 5, 5, 5]) - 4.0f64.ln()).abs() < 1e-9;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut bounded = true;
    for _ in 0..1000 {
        let s = rng.random_range(1..=12);
        let sizes: Vec<usize> = (0..s).map(|_| rng.random_range(1..=50)).collect();
        bounded &= shannon_index(&sizes) <= (s as f64).ln() + 1e-12;
    }
    report(7, "shannon diversity index", single_exact && uniform && bounded);
}

// --- 8: clustering is deterministic and always partitions ------------------

#[test]
fn criterion_8_segmentation_determinism_and_partition() {
    // six communities whose merge order was worked out by hand from the
    // pairwise Jaccard distances and the smallest-pair tie-break
    let labels: [&[u8]; 6] = [
        &[1, 1, 0, 0],
        &[1, 1, 0, 0],
        &[0, 0, 1, 1],
        &[0, 0, 1, 1],
        &[1, 0, 0, 0],
        &[0, 0, 0, 1],
    ];
    let member_counts = [2usize, 1, 3, 1, 1, 2];
    let mut next_user = 0;
    let communities: Vec<Community> = labels
        .iter()
        .zip(member_counts)
        .enumerate()
        .map(|(id, (label, count))| {
            let members: Vec<usize> = (0..count).map(|_| {
                next_user += 1;
                next_user - 1
            }).collect();
            Community { community_id: id, members, topic_label: label.to_vec() }
        })
        .collect();

    let set = ensemble_agglomerate(&communities, 2).unwrap();
    let trace_ok = set.merge_trace == [(0, 1), (1, 2), (0, 2), (1, 2)];
    let seg0 = &set.segments[0];
    let seg1 = &set.segments[1];
    let shape_ok = seg0.communities == [0, 1, 4]
        && seg1.communities == [2, 3, 5]
        && seg0.size == 4
        && seg1.size == 6;
    // hand-computed Shannon values for member-count splits [2,1,1] and [3,1,2]
    let h0 = 1.5 * 2.0f64.ln();
    let h1 = 0.5 * 2.0f64.ln() + 6.0f64.ln() / 6.0 + 3.0f64.ln() / 3.0;
    let shannon_ok = (seg0.shannon_h - h0).abs() < 1e-12 && (seg1.shannon_h - h1).abs() < 1e-12;

    // planted two-blob profile set: k-means must recover the blobs exactly
    let mut profiles = Vec::new();
    for i in 0..8 {
        profiles.push(UserProfile {
            user_id: format!("a{i}"),
            topic_vector: vec![1, 1, 0, 0],
            network_features: [0.9, 0.8, 1.0],
            component: Some(0),
        });
        profiles.push(UserProfile {
            user_id: format!("b{i}"),
            topic_vector: vec![0, 0, 1, 1],
            network_features: [0.1, 0.2, 0.0],
            component: Some(1),
        });
    }
    let outcome = minibatch_kmeans(&profiles, 2, 8, 100, 5).unwrap();
    let first_a = outcome.assignments[0];
    let first_b = outcome.assignments[1];
    let blobs_ok = first_a != first_b
        && outcome.assignments.iter().enumerate().all(|(i, &c)| {
            if i % 2 == 0 { c == first_a } else { c == first_b }
        });

    // arbitrary inputs must still come back as an exact partition
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut partition_ok = true;
    for _ in 0..50 {
        let n = rng.random_range(2..=12);
        let k = rng.random_range(1..=n);
        let mut next = 0;
        let cs: Vec<Community> = (0..n)
            .map(|id| {
                let count = rng.random_range(1..=5);
                let members: Vec<usize> = (0..count).map(|_| {
                    next += 1;
                    next - 1
                }).collect();
                let topic_label: Vec<u8> = (0..4).map(|_| rng.random_range(0..2) as u8).collect();
                Community { community_id: id, members, topic_label }
            })
            .collect();
        let set = ensemble_agglomerate(&cs, k).unwrap();
        let mut seen: Vec<usize> = set.segments.iter().flat_map(|s| s.communities.clone()).collect();
        seen.sort_unstable();
        let total: usize = set.segments.iter().map(|s| s.size).sum();
        partition_ok &= seen == (0..n).collect::<Vec<_>>() && total == next;
    }

    let pass = trace_ok && shape_ok && shannon_ok && blobs_ok && partition_ok;
    println!("  trace {trace_ok}, shape {shape_ok}, shannon {shannon_ok}, blobs {blobs_ok}, partition {partition_ok}");
    report(8, "segmentation determinism and partition", pass);
}

// --- 9: the command pipeline replays byte for byte -------------------------

/// Same twelve-event fixture as the CLI tests: three repos over four
/// ten-day windows, counted by hand.
const TWELVE_EVENTS: &str = r#"{"type":"WatchEvent","actor":"u1","repo":"r_a","created_at":"2015-01-03T00:00:00Z"}
{"type":"WatchEvent","actor":"u2","repo":"r_a","created_at":"2015-01-07T12:00:00Z"}
{"type":"WatchEvent","actor":"u1","repo":"r_a","created_at":"2015-01-14T08:30:00Z"}
{"type":"WatchEvent","actor":"u3","repo":"r_a","created_at":"2015-02-04T23:59:59Z"}
{"type":"WatchEvent","actor":"u1","repo":"r_b","created_at":"2015-01-05T06:00:00Z"}
{"type":"WatchEvent","actor":"u2","repo":"r_b","created_at":"2015-01-13T00:00:00Z"}
{"type":"WatchEvent","actor":"u2","repo":"r_b","created_at":"2015-01-20T19:45:00Z"}
{"type":"WatchEvent","actor":"u4","repo":"r_b","created_at":"2015-01-27T05:05:05Z"}
{"type":"WatchEvent","actor":"u2","repo":"r_b","created_at":"2015-02-05T10:00:00Z"}
{"type":"WatchEvent","actor":"u5","repo":"r_c","created_at":"2015-01-09T09:09:09Z"}
{"type":"WatchEvent","actor":"u5","repo":"r_c","created_at":"2015-01-25T14:00:00Z"}
{"type":"WatchEvent","actor":"u6","repo":"r_c","created_at":"2015-02-06T01:00:00Z"}
"#;

const TWELVE_EVENT_PANEL: &str = "repo_id,w0,w1,w2,w3\nr_b,1,2,1,1\nr_a,2,1,0,1\nr_c,1,0,1,1\n";

fn run_binary(args: &[&str]) -> std::process::Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_repopulse"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn criterion_9_pipeline_determinism() {
    let dir = tempfile::TempDir::new().unwrap();

    // hand-counted ingest
    let events = dir.path().join("events.ndjson");
    std::fs::write(&events, TWELVE_EVENTS).unwrap();
    let small_out = dir.path().join("small");
    let out = run_binary(&[
        "--events",
        events.to_str().unwrap(),
        "--out-dir",
        small_out.to_str().unwrap(),
        "ingest",
    ]);
    let panel = std::fs::read_to_string(small_out.join("panel.csv")).unwrap_or_default();
    let ingest_ok = out.status.code() == Some(0) && panel == TWELVE_EVENT_PANEL;

    // byte-identical checkpoint on replay with a fixed seed
    let panel_dir = dir.path().join("panel");
    let counts = coupled_panel(5, 60, 1, 0.8, 3);
    let mut csv = String::from("repo_id");
    for t in 0..60 {
        csv.push_str(&format!(",w{t}"));
    }
    csv.push('\n');
    for (r, id) in counts.repo_ids.iter().enumerate() {
        csv.push_str(id);
        for t in 0..60 {
            csv.push_str(&format!(",{}", counts.counts[[r, t]]));
        }
        csv.push('\n');
    }
    std::fs::create_dir_all(&panel_dir).unwrap();
    std::fs::write(panel_dir.join("panel.csv"), &csv).unwrap();
    std::fs::write(
        panel_dir.join("grid.toml"),
        "start = \"2015-01-03T00:00:00Z\"\nwindow_days = 10\nnum_windows = 60\n",
    )
    .unwrap();
    // constant single-member components for every window
    let mut full = String::from("window,repo_id,component_label,component_size\n");
    for t in 0..60 {
        for (r, id) in counts.repo_ids.iter().enumerate() {
            full.push_str(&format!("{t},{id},{r},1\n"));
        }
    }
    std::fs::write(panel_dir.join("components.csv"), &full).unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "out_dir = {:?}\nloopback = 4\nhidden_sizes = [6]\nmax_epochs = 40\npatience = 10\nseed = 3\n",
            panel_dir.to_str().unwrap()
        ),
    )
    .unwrap();
    let first_run = run_binary(&["--config", cfg.to_str().unwrap(), "train"]);
    let first = std::fs::read(panel_dir.join("checkpoint.json")).unwrap_or_default();
    std::fs::remove_file(panel_dir.join("checkpoint.json")).ok();
    let second_run = run_binary(&["--config", cfg.to_str().unwrap(), "train"]);
    let second = std::fs::read(panel_dir.join("checkpoint.json")).unwrap_or_default();
    let replay_ok = first_run.status.code() == Some(0)
        && second_run.status.code() == Some(0)
        && !first.is_empty()
        && first == second;

    println!("  ingest hand-count {ingest_ok}, checkpoint replay {replay_ok}");
    report(9, "pipeline determinism", ingest_ok && replay_ok);
}

// --- 10: the loop-back sweep completes and reports an argmin ---------------

#[test]
fn criterion_10_loopback_sweep() {
    let panel = coupled_panel(6, 80, 1, 0.8, 9);
    let cfg = SweepConfig {
        l_values: vec![2, 4, 6, 8, 10, 12],
        hidden_sizes: vec![8],
        split_ratio: 0.8,
        seed: 11,
        train: TrainConfig {
            learning_rate: 0.01,
            max_epochs: 80,
            patience: 15,
            improvement_epsilon: 1e-6,
            batch_size: Some(16),
        },
    };
    let sweep = sweep_loopback(&panel.counts, &panel.shares, &cfg);

    let six_finite_rows = sweep.rows.len() == 6
        && sweep.rows.iter().all(|r| r.rmse_total.is_some_and(f64::is_finite));
    let csv = sweep.to_csv();
    let csv_ok = csv.lines().count() == 7 && csv.starts_with("loopback,rmse_total\n");
    let manual_argmin = sweep
        .rows
        .iter()
        .filter_map(|r| r.rmse_total.map(|v| (r.loopback, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(l, _)| l);
    let argmin_ok = sweep.best_loopback().is_some() && sweep.best_loopback() == manual_argmin;

    for row in &sweep.rows {
        println!("  L = {:2}: rmse {:?}", row.loopback, row.rmse_total);
    }
    println!("  best loop-back: {:?}", sweep.best_loopback());
    report(10, "loop-back sweep", six_finite_rows && csv_ok && argmin_ok);
}
