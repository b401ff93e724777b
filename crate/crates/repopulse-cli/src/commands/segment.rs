//! `segment`: build user profiles from the event stream, group them into
//! communities (graph components by default, or a provided roster), cluster
//! them, and merge communities into topic-labeled segments.

use crate::artifacts::{self, CommandError};
use crate::commands::{load_panel, read_events, validation, write_effective_config};
use crate::config::RunConfig;
use repopulse::graph::cumulative_assignments;
use repopulse::ingest::filter_events;
use repopulse::segment::{
    build_user_features, communities_from_file, community_file_csv, default_communities,
    ensemble_agglomerate, minibatch_kmeans, read_community_file, read_topic_map,
    segment_report_csv, topic_vocabulary,
};

pub fn run(cfg: &RunConfig) -> Result<u8, CommandError> {
    let panel = load_panel(cfg)?;
    let grid = *panel.grid();
    let tracked = panel.repo_ids().to_vec();

    let topics_path = cfg.topics.as_deref().ok_or_else(|| {
        CommandError::Validation("no topic map configured; set the `topics` config key".into())
    })?;
    let topics = read_topic_map(&artifacts::read_file(topics_path)?).map_err(validation)?;
    let vocab = topic_vocabulary(&topics);

    let outcome = read_events(cfg)?;
    let kept = filter_events(&outcome.records, &cfg.event_type.keep_set());
    if kept.is_empty() {
        return Err(CommandError::Validation(format!(
            "no {:?} events to segment users from",
            cfg.event_type
        )));
    }
    let assignments = cumulative_assignments(&kept, &grid, &tracked).map_err(validation)?;
    let last = assignments.last().expect("grid has windows");

    let profiles = build_user_features(&kept, &topics, last, &tracked);
    let communities = match &cfg.communities {
        Some(path) => {
            let entries = read_community_file(&artifacts::read_file(path)?).map_err(validation)?;
            communities_from_file(&entries, &profiles, vocab.len()).map_err(validation)?
        }
        None => default_communities(&profiles, vocab.len()),
    };

    let km = minibatch_kmeans(&profiles, cfg.clusters, cfg.kmeans_batch, cfg.kmeans_iters, cfg.seed)
        .map_err(validation)?;
    let set = ensemble_agglomerate(&communities, cfg.segments).map_err(validation)?;

    write_effective_config(cfg)?;
    artifacts::write_file(
        &artifacts::artifact(&cfg.out_dir, artifacts::COMMUNITIES),
        &community_file_csv(&communities, &profiles),
    )?;
    let mut clusters_csv = String::from("user_id,cluster\n");
    for (p, c) in profiles.iter().zip(&km.assignments) {
        clusters_csv.push_str(&format!("{},{c}\n", p.user_id));
    }
    artifacts::write_file(&artifacts::artifact(&cfg.out_dir, artifacts::CLUSTERS), &clusters_csv)?;
    artifacts::write_file(
        &artifacts::artifact(&cfg.out_dir, artifacts::SEGMENTS),
        &segment_report_csv(&set, &vocab),
    )?;

    println!(
        "{} users in {} communities -> {} segments covering {} topics; k-means inertia {:.6} over {} clusters",
        profiles.len(),
        communities.len(),
        set.segments.len(),
        set.topic_coverage,
        km.inertia,
        cfg.clusters,
    );
    for (i, seg) in set.segments.iter().enumerate() {
        println!(
            "  segment {i}: {} users from {} communities, diversity {:.4}",
            seg.size,
            seg.communities.len(),
            seg.shannon_h
        );
    }
    Ok(0)
}
