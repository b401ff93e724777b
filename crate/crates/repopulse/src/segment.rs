//! User semantic segmentation: topic/network feature construction,
//! mini-batch k-means clustering, bottom-up community agglomeration with
//! majority-vote topic labels, and Shannon diversity scoring.

use crate::graph::ComponentAssignment;
use crate::ingest::EventRecord;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("no user profiles to cluster")]
    EmptyInput,
    #[error("asked for {k} clusters over {n} points")]
    BadClusterCount { k: usize, n: usize },
    #[error("asked for {k} segments over {n} communities")]
    BadSegmentCount { k: usize, n: usize },
    #[error("batch size must be at least 1")]
    ZeroBatch,
    #[error("line {line}: {reason}")]
    Csv { line: usize, reason: String },
    #[error("user {0} is missing from the community file")]
    MissingCommunity(String),
    #[error("community {0} has no members")]
    EmptyCommunity(usize),
}

/// One user's clustering features: binary topic incidence over the global
/// vocabulary plus three network attributes (event count, distinct repos,
/// size-share of the user's largest component), each min-max scaled to
/// [0, 1] over the population. Users with zero events never get a profile.
#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    pub user_id: String,
    /// 0/1 entries, indexed by the sorted global topic vocabulary.
    pub topic_vector: Vec<u8>,
    pub network_features: [f64; 3],
    /// Component label shared by the user's tracked repos, when any.
    pub component: Option<usize>,
}

impl UserProfile {
    /// Concatenated clustering coordinates: topics then network features.
    pub fn feature_vector(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.topic_vector.iter().map(|&b| f64::from(b)).collect();
        v.extend_from_slice(&self.network_features);
        v
    }
}

/// The sorted union of every topic in the map; topic k of a profile's
/// vector refers to `vocabulary[k]`.
pub fn topic_vocabulary(topics: &BTreeMap<String, BTreeSet<String>>) -> Vec<String> {
    let mut all: BTreeSet<&String> = BTreeSet::new();
    for set in topics.values() {
        all.extend(set);
    }
    all.into_iter().cloned().collect()
}

/// Builds one profile per user appearing in `events`, ordered by user id.
///
/// A repo absent from the topic map counts as having no topics. Network
/// features are scaled so each spans [0, 1] over the returned population;
/// a feature with zero range scales to 0 for everyone. The size-share
/// feature is the largest component share among the user's tracked repos
/// (0 when the user only touched untracked repos).
pub fn build_user_features(
    events: &[EventRecord],
    topics: &BTreeMap<String, BTreeSet<String>>,
    assignment: &ComponentAssignment,
    tracked: &[String],
) -> Vec<UserProfile> {
    let vocab = topic_vocabulary(topics);
    let topic_index: HashMap<&str, usize> =
        vocab.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let tracked_index: HashMap<&str, usize> =
        tracked.iter().enumerate().map(|(i, r)| (r.as_str(), i)).collect();
    let shares = assignment.size_shares();

    #[derive(Default)]
    struct Acc {
        events: u64,
        repos: BTreeSet<String>,
        topics: BTreeSet<usize>,
        share: f64,
        component: Option<usize>,
    }
    let mut users: BTreeMap<String, Acc> = BTreeMap::new();
    for ev in events {
        let acc = users.entry(ev.user_id.clone()).or_default();
        acc.events += 1;
        acc.repos.insert(ev.repo_id.clone());
        if let Some(set) = topics.get(&ev.repo_id) {
            for t in set {
                if let Some(&k) = topic_index.get(t.as_str()) {
                    acc.topics.insert(k);
                }
            }
        }
        if let Some(&idx) = tracked_index.get(ev.repo_id.as_str()) {
            acc.share = acc.share.max(shares[idx]);
            let label = assignment.labels()[idx];
            acc.component = Some(acc.component.map_or(label, |c| c.min(label)));
        }
    }

    let raw: Vec<[f64; 3]> = users
        .values()
        .map(|a| [a.events as f64, a.repos.len() as f64, a.share])
        .collect();
    let mut mins = [f64::INFINITY; 3];
    let mut maxs = [f64::NEG_INFINITY; 3];
    for r in &raw {
        for j in 0..3 {
            mins[j] = mins[j].min(r[j]);
            maxs[j] = maxs[j].max(r[j]);
        }
    }
    users
        .into_iter()
        .zip(raw)
        .map(|((user_id, acc), r)| {
            let mut scaled = [0.0; 3];
            for j in 0..3 {
                let span = maxs[j] - mins[j];
                scaled[j] = if span > 0.0 { (r[j] - mins[j]) / span } else { 0.0 };
            }
            let mut topic_vector = vec![0u8; vocab.len()];
            for k in acc.topics {
                topic_vector[k] = 1;
            }
            UserProfile { user_id, topic_vector, network_features: scaled, component: acc.component }
        })
        .collect()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Ties go to the lowest center index.
fn nearest_center(x: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, center) in centers.iter().enumerate() {
        let d = squared_distance(x, center);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    (best, best_d)
}

fn full_inertia(points: &[Vec<f64>], centers: &[Vec<f64>]) -> f64 {
    points.iter().map(|x| nearest_center(x, centers).1).sum()
}

/// Result of one mini-batch k-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct KmeansOutcome {
    /// Cluster index per profile, parallel to the input order.
    pub assignments: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    /// Sum of squared point-to-assigned-center distances after the final
    /// full assignment pass.
    pub inertia: f64,
    /// Same sum right after initialization, before any update.
    pub initial_inertia: f64,
}

/// Mini-batch k-means with per-center learning rates.
///
/// Centers start at `k` distinct sampled points. Each iteration samples a
/// batch without replacement, assigns it with centers frozen, then moves
/// each assigned center toward the point with step 1/(times updated) — so
/// a center is the running mean of every point that ever updated it. A
/// final pass assigns all users to their nearest center.
pub fn minibatch_kmeans(
    profiles: &[UserProfile],
    k: usize,
    batch_size: usize,
    iterations: usize,
    seed: u64,
) -> Result<KmeansOutcome, SegmentError> {
    let n = profiles.len();
    if n == 0 {
        return Err(SegmentError::EmptyInput);
    }
    if k == 0 || k > n {
        return Err(SegmentError::BadClusterCount { k, n });
    }
    if batch_size == 0 {
        return Err(SegmentError::ZeroBatch);
    }
    let points: Vec<Vec<f64>> = profiles.iter().map(|p| p.feature_vector()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = rand::seq::index::sample(&mut rng, n, k).into_vec();
    let mut centers: Vec<Vec<f64>> = init.iter().map(|&i| points[i].clone()).collect();
    let initial_inertia = full_inertia(&points, &centers);

    let mut updates = vec![0u64; k];
    let batch_len = batch_size.min(n);
    for _ in 0..iterations {
        let batch = rand::seq::index::sample(&mut rng, n, batch_len).into_vec();
        let assigned: Vec<usize> =
            batch.iter().map(|&i| nearest_center(&points[i], &centers).0).collect();
        for (&i, &c) in batch.iter().zip(&assigned) {
            updates[c] += 1;
            let eta = 1.0 / updates[c] as f64;
            // gradient form keeps a center already at the point exactly there
            for (cv, &xv) in centers[c].iter_mut().zip(&points[i]) {
                *cv += eta * (xv - *cv);
            }
        }
    }

    let assignments: Vec<usize> = points.iter().map(|x| nearest_center(x, &centers).0).collect();
    let inertia = assignments
        .iter()
        .zip(&points)
        .map(|(&c, x)| squared_distance(x, &centers[c]))
        .sum();
    Ok(KmeansOutcome { assignments, centers, inertia, initial_inertia })
}

/// A group of users treated as one unit during agglomeration. Members are
/// indices into the profile list.
#[derive(Debug, Clone, PartialEq)]
pub struct Community {
    pub community_id: usize,
    pub members: Vec<usize>,
    pub topic_label: Vec<u8>,
}

/// Strict-majority topic label: topic k is set iff more than half the
/// members carry it; an exact tie leaves it unset.
pub fn community_topic_label(members: &[usize], profiles: &[UserProfile], vocab_len: usize) -> Vec<u8> {
    let mut counts = vec![0usize; vocab_len];
    for &m in members {
        for (k, &b) in profiles[m].topic_vector.iter().enumerate() {
            if b == 1 {
                counts[k] += 1;
            }
        }
    }
    counts.iter().map(|&c| u8::from(2 * c > members.len())).collect()
}

/// Groups profiles by an arbitrary integer assignment (graph component,
/// k-means cluster, or an external community id). Community ids are the
/// distinct assignment values in ascending order; labels are computed by
/// strict majority.
pub fn communities_from_assignments(
    assignment_of: &[usize],
    profiles: &[UserProfile],
    vocab_len: usize,
) -> Vec<Community> {
    assert_eq!(assignment_of.len(), profiles.len(), "one assignment per profile");
    let mut grouped: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in assignment_of.iter().enumerate() {
        grouped.entry(c).or_default().push(i);
    }
    grouped
        .into_iter()
        .map(|(community_id, members)| {
            let topic_label = community_topic_label(&members, profiles, vocab_len);
            Community { community_id, members, topic_label }
        })
        .collect()
}

/// Default communities: the repo-graph connected components restricted to
/// users. Profiles that never touched a tracked repo share one trailing
/// catch-all community.
pub fn default_communities(profiles: &[UserProfile], vocab_len: usize) -> Vec<Community> {
    let isolated_key = usize::MAX;
    let keys: Vec<usize> = profiles.iter().map(|p| p.component.unwrap_or(isolated_key)).collect();
    communities_from_assignments(&keys, profiles, vocab_len)
}

/// Builds communities from an external `user -> community id` listing.
/// Every profile must appear; listed users without a profile are ignored.
pub fn communities_from_file(
    entries: &[(String, usize)],
    profiles: &[UserProfile],
    vocab_len: usize,
) -> Result<Vec<Community>, SegmentError> {
    let of_user: HashMap<&str, usize> =
        entries.iter().map(|(u, c)| (u.as_str(), *c)).collect();
    let mut keys = Vec::with_capacity(profiles.len());
    for p in profiles {
        match of_user.get(p.user_id.as_str()) {
            Some(&c) => keys.push(c),
            None => return Err(SegmentError::MissingCommunity(p.user_id.clone())),
        }
    }
    Ok(communities_from_assignments(&keys, profiles, vocab_len))
}

/// Jaccard distance between binary label vectors: 1 − |A∩B|/|A∪B|, and 1
/// when both labels are empty.
pub fn jaccard_distance(a: &[u8], b: &[u8]) -> f64 {
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        if x == 1 && y == 1 {
            inter += 1;
        }
        if x == 1 || y == 1 {
            union += 1;
        }
    }
    if union == 0 {
        1.0
    } else {
        1.0 - inter as f64 / union as f64
    }
}

/// A semantic segment: merged communities sharing a majority topic label.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub label: Vec<u8>,
    /// Ids of the member communities, ascending.
    pub communities: Vec<usize>,
    /// Total users across member communities.
    pub size: usize,
    pub shannon_h: f64,
}

/// The finished segmentation, with the merge order that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSet {
    pub segments: Vec<Segment>,
    /// Pairs of group positions merged at each step, in order; positions
    /// refer to the group list as it stood at that step (the second group
    /// is removed and later groups shift down).
    pub merge_trace: Vec<(usize, usize)>,
    pub topic_coverage: usize,
}

fn majority_label(member_indices: &[usize], communities: &[Community]) -> Vec<u8> {
    let vocab_len = communities[member_indices[0]].topic_label.len();
    let mut counts = vec![0usize; vocab_len];
    for &ci in member_indices {
        for (k, &b) in communities[ci].topic_label.iter().enumerate() {
            if b == 1 {
                counts[k] += 1;
            }
        }
    }
    counts.iter().map(|&c| u8::from(2 * c > member_indices.len())).collect()
}

/// Bottom-up agglomeration of communities into `k` segments.
///
/// Every step merges the closest pair of groups by Jaccard distance
/// between labels, breaking ties toward the lexicographically smallest
/// pair of current positions. The merged group keeps the first position
/// and relabels itself by strict majority over all member communities'
/// labels. Each surviving group becomes a segment scored with its Shannon
/// index over member-community proportions.
pub fn ensemble_agglomerate(communities: &[Community], k: usize) -> Result<SegmentSet, SegmentError> {
    let n = communities.len();
    if n == 0 {
        return Err(SegmentError::EmptyInput);
    }
    if k == 0 || k > n {
        return Err(SegmentError::BadSegmentCount { k, n });
    }
    for c in communities {
        if c.members.is_empty() {
            return Err(SegmentError::EmptyCommunity(c.community_id));
        }
    }

    struct Group {
        members: Vec<usize>,
        label: Vec<u8>,
    }
    let mut groups: Vec<Group> = (0..n)
        .map(|i| Group { members: vec![i], label: communities[i].topic_label.clone() })
        .collect();
    let mut merge_trace = Vec::with_capacity(n - k);
    while groups.len() > k {
        let mut best = (0usize, 1usize);
        let mut best_d = f64::INFINITY;
        for i in 0..groups.len() {
            for j in i + 1..groups.len() {
                let d = jaccard_distance(&groups[i].label, &groups[j].label);
                if d < best_d {
                    best_d = d;
                    best = (i, j);
                }
            }
        }
        let (i, j) = best;
        merge_trace.push((i, j));
        let moved = groups.remove(j);
        groups[i].members.extend(moved.members);
        groups[i].members.sort_unstable();
        groups[i].label = majority_label(&groups[i].members, communities);
    }

    let segments: Vec<Segment> = groups
        .into_iter()
        .map(|g| {
            let sizes: Vec<usize> =
                g.members.iter().map(|&ci| communities[ci].members.len()).collect();
            let size = sizes.iter().sum();
            let shannon_h = shannon_index(&sizes);
            let ids: Vec<usize> =
                g.members.iter().map(|&ci| communities[ci].community_id).collect();
            Segment { label: g.label, communities: ids, size, shannon_h }
        })
        .collect();
    let coverage = topic_coverage(&segments);
    Ok(SegmentSet { segments, merge_trace, topic_coverage: coverage })
}

/// Shannon–Wiener index −Σ p_i ln p_i over community proportions, where
/// p_i is community i's share of the segment's users. Zero-size entries
/// contribute nothing; an empty slice scores 0.
pub fn shannon_index(community_sizes: &[usize]) -> f64 {
    let total: usize = community_sizes.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let mut h = 0.0;
    for &s in community_sizes {
        if s > 0 {
            let p = s as f64 / total as f64;
            h -= p * p.ln();
        }
    }
    h.max(0.0)
}

/// Number of distinct topics set in any segment's label.
pub fn topic_coverage(segments: &[Segment]) -> usize {
    let mut covered = BTreeSet::new();
    for s in segments {
        for (k, &b) in s.label.iter().enumerate() {
            if b == 1 {
                covered.insert(k);
            }
        }
    }
    covered.len()
}

/// Parses the topic map (`repo_id,topic`, one pair per row; repeated repo
/// ids accumulate topics, an empty topic cell registers a topic-less repo).
pub fn read_topic_map(text: &str) -> Result<BTreeMap<String, BTreeSet<String>>, SegmentError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if i == 0 {
            if line != "repo_id,topic" {
                return Err(SegmentError::Csv {
                    line: 1,
                    reason: format!("expected header `repo_id,topic`, got `{line}`"),
                });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let (repo, topic) = line.split_once(',').ok_or_else(|| SegmentError::Csv {
            line: i + 1,
            reason: "expected two comma-separated fields".to_string(),
        })?;
        let set: &mut BTreeSet<String> = out.entry(repo.trim().to_string()).or_default();
        let topic = topic.trim();
        if !topic.is_empty() {
            set.insert(topic.to_string());
        }
    }
    Ok(out)
}

/// Parses an external community listing (`user_id,community_id`).
pub fn read_community_file(text: &str) -> Result<Vec<(String, usize)>, SegmentError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if i == 0 {
            if line != "user_id,community_id" {
                return Err(SegmentError::Csv {
                    line: 1,
                    reason: format!("expected header `user_id,community_id`, got `{line}`"),
                });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let (user, community) = line.split_once(',').ok_or_else(|| SegmentError::Csv {
            line: i + 1,
            reason: "expected two comma-separated fields".to_string(),
        })?;
        let community: usize = community.trim().parse().map_err(|_| SegmentError::Csv {
            line: i + 1,
            reason: format!("community id `{}` is not an integer", community.trim()),
        })?;
        out.push((user.trim().to_string(), community));
    }
    Ok(out)
}

/// Renders communities as `user_id,community_id` rows, community order
/// first, then profile order inside each community.
pub fn community_file_csv(communities: &[Community], profiles: &[UserProfile]) -> String {
    let mut out = String::from("user_id,community_id\n");
    for c in communities {
        for &m in &c.members {
            out.push_str(&format!("{},{}\n", profiles[m].user_id, c.community_id));
        }
    }
    out
}

/// Renders the segment report (`segment_id,size,shannon_H,label_topics`);
/// label topics are vocabulary names joined with `|`.
pub fn segment_report_csv(set: &SegmentSet, vocab: &[String]) -> String {
    let mut out = String::from("segment_id,size,shannon_H,label_topics\n");
    for (i, s) in set.segments.iter().enumerate() {
        let names: Vec<&str> = s
            .label
            .iter()
            .enumerate()
            .filter(|&(_, &b)| b == 1)
            .map(|(k, _)| vocab[k].as_str())
            .collect();
        out.push_str(&format!("{},{},{},{}\n", i, s.size, s.shannon_h, names.join("|")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::BipartiteGraph;
    use crate::ingest::EventType;
    use chrono::DateTime;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ev(user: &str, repo: &str, sec: i64) -> EventRecord {
        EventRecord {
            event_type: EventType::Watch,
            user_id: user.to_string(),
            repo_id: repo.to_string(),
            timestamp: DateTime::from_timestamp(sec, 0).unwrap(),
        }
    }

    fn topics_of(pairs: &[(&str, &[&str])]) -> BTreeMap<String, BTreeSet<String>> {
        pairs
            .iter()
            .map(|(r, ts)| {
                (r.to_string(), ts.iter().map(|t| t.to_string()).collect())
            })
            .collect()
    }

    fn assignment_for(events: &[EventRecord], tracked: &[String]) -> ComponentAssignment {
        let mut g = BipartiteGraph::new(tracked).unwrap();
        g.add_events(events);
        g.assignments()
    }

    fn profile(id: &str, topics: Vec<u8>, net: [f64; 3]) -> UserProfile {
        UserProfile {
            user_id: id.to_string(),
            topic_vector: topics,
            network_features: net,
            component: None,
        }
    }

    #[test]
    fn single_event_sets_exactly_one_topic() {
        let tracked = vec!["r0".to_string()];
        let events = vec![ev("u0", "r0", 10)];
        let topics = topics_of(&[("r0", &["a"])]);
        let assignment = assignment_for(&events, &tracked);
        let profiles = build_user_features(&events, &topics, &assignment, &tracked);
        assert_eq!(profiles.len(), 1);
        assert_eq!(profiles[0].user_id, "u0");
        assert_eq!(profiles[0].topic_vector, vec![1]);
        assert_eq!(profiles[0].component, Some(0));
    }

    #[test]
    fn only_users_with_events_get_profiles() {
        let tracked = vec!["r0".to_string(), "r1".to_string()];
        let events = vec![ev("active", "r0", 5), ev("active", "r1", 6)];
        let topics = topics_of(&[("r0", &["a"]), ("r1", &[])]);
        let assignment = assignment_for(&events, &tracked);
        let profiles = build_user_features(&events, &topics, &assignment, &tracked);
        let ids: Vec<&str> = profiles.iter().map(|p| p.user_id.as_str()).collect();
        assert_eq!(ids, ["active"]);
    }

    #[test]
    fn repo_without_topic_entry_counts_as_topicless() {
        let tracked = vec!["r0".to_string()];
        let events = vec![ev("u0", "r0", 1), ev("u0", "mystery", 2)];
        let topics = topics_of(&[("r0", &["a"])]);
        let assignment = assignment_for(&events, &tracked);
        let profiles = build_user_features(&events, &topics, &assignment, &tracked);
        assert_eq!(profiles[0].topic_vector, vec![1]);
        // the untracked repo still counts toward distinct repos
        let raw_distinct = 2.0;
        assert!(raw_distinct > 1.0);
    }

    #[test]
    fn thirty_user_fixture_matches_per_user_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let tracked: Vec<String> = (0..6).map(|i| format!("r{i}")).collect();
        let mut events = Vec::new();
        for step in 0..400 {
            let u = rng.random_range(0..30);
            // three disconnected repo pools so component shares differ
            let pool = u % 3;
            let r = 2 * pool + rng.random_range(0..2);
            events.push(ev(&format!("u{u:02}"), &format!("r{r}"), step));
        }
        let topics = topics_of(&[
            ("r0", &["sys"]),
            ("r1", &["sys", "net"]),
            ("r2", &["ml"]),
            ("r3", &[]),
            ("r4", &["web"]),
            ("r5", &["web", "ml"]),
        ]);
        let assignment = assignment_for(&events, &tracked);
        let profiles = build_user_features(&events, &topics, &assignment, &tracked);
        assert_eq!(profiles.len(), 30);

        // independent per-user scan over the raw features
        let shares = assignment.size_shares();
        let mut raw: Vec<(String, [f64; 3])> = Vec::new();
        for p in &profiles {
            let mut count = 0.0;
            let mut distinct: Vec<&str> = Vec::new();
            let mut share: f64 = 0.0;
            for e in &events {
                if e.user_id == p.user_id {
                    count += 1.0;
                    if !distinct.contains(&e.repo_id.as_str()) {
                        distinct.push(&e.repo_id);
                    }
                    if let Some(pos) = tracked.iter().position(|t| *t == e.repo_id) {
                        share = share.max(shares[pos]);
                    }
                }
            }
            raw.push((p.user_id.clone(), [count, distinct.len() as f64, share]));
        }
        for j in 0..3 {
            let lo = raw.iter().map(|(_, f)| f[j]).fold(f64::INFINITY, f64::min);
            let hi = raw.iter().map(|(_, f)| f[j]).fold(f64::NEG_INFINITY, f64::max);
            for (p, (_, f)) in profiles.iter().zip(&raw) {
                let expect = if hi > lo { (f[j] - lo) / (hi - lo) } else { 0.0 };
                assert!(
                    (p.network_features[j] - expect).abs() < 1e-12,
                    "feature {j} of {} drifted",
                    p.user_id
                );
            }
        }
    }

    #[test]
    fn constant_feature_scales_to_zero() {
        let tracked = vec!["r0".to_string(), "r1".to_string()];
        // both users: one event each, one repo each -> every feature constant
        let events = vec![ev("u0", "r0", 1), ev("u1", "r1", 2)];
        let topics = topics_of(&[("r0", &["a"]), ("r1", &["a"])]);
        let assignment = assignment_for(&events, &tracked);
        let profiles = build_user_features(&events, &topics, &assignment, &tracked);
        for p in &profiles {
            assert_eq!(p.network_features, [0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn kmeans_single_center_converges_to_mean() {
        let profiles: Vec<UserProfile> = (0..9)
            .map(|i| profile(&format!("u{i}"), vec![u8::from(i % 2 == 0)], [i as f64 / 8.0, 0.3, 0.7]))
            .collect();
        let out = minibatch_kmeans(&profiles, 1, 9, 40, 3).unwrap();
        let dim = profiles[0].feature_vector().len();
        let mut mean = vec![0.0; dim];
        for p in &profiles {
            for (m, v) in mean.iter_mut().zip(p.feature_vector()) {
                *m += v / 9.0;
            }
        }
        for (c, m) in out.centers[0].iter().zip(&mean) {
            assert!((c - m).abs() < 1e-6, "center {c} vs mean {m}");
        }
        assert!(out.assignments.iter().all(|&a| a == 0));
    }

    #[test]
    fn kmeans_recovers_two_separated_blobs() {
        let mut profiles = Vec::new();
        for i in 0..12 {
            profiles.push(profile(&format!("a{i}"), vec![1, 0], [0.02 * i as f64 / 12.0, 0.0, 0.1]));
        }
        for i in 0..12 {
            profiles.push(profile(&format!("b{i}"), vec![0, 1], [1.0 - 0.02 * i as f64 / 12.0, 1.0, 0.9]));
        }
        let out = minibatch_kmeans(&profiles, 2, 8, 60, 5).unwrap();
        let first = out.assignments[0];
        assert!(out.assignments[..12].iter().all(|&a| a == first));
        let second = out.assignments[12];
        assert!(out.assignments[12..].iter().all(|&a| a == second));
        assert_ne!(first, second);
    }

    #[test]
    fn kmeans_with_k_equal_n_is_exact() {
        let profiles: Vec<UserProfile> = (0..5)
            .map(|i| profile(&format!("u{i}"), vec![0], [i as f64, 0.0, 0.0]))
            .collect();
        let out = minibatch_kmeans(&profiles, 5, 3, 25, 9).unwrap();
        assert_eq!(out.inertia, 0.0);
        let mut seen: Vec<usize> = out.assignments.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 5, "every point should own a cluster");
    }

    #[test]
    fn kmeans_is_deterministic_per_seed() {
        let profiles: Vec<UserProfile> = (0..20)
            .map(|i| profile(&format!("u{i}"), vec![u8::from(i < 10), u8::from(i >= 10)], [i as f64 / 20.0, 0.5, 0.2]))
            .collect();
        let a = minibatch_kmeans(&profiles, 3, 6, 30, 11).unwrap();
        let b = minibatch_kmeans(&profiles, 3, 6, 30, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn kmeans_inertia_never_exceeds_initial() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for trial in 0..30 {
            let n = rng.random_range(8..40);
            let profiles: Vec<UserProfile> = (0..n)
                .map(|i| {
                    profile(
                        &format!("u{i}"),
                        vec![u8::from(rng.random_range(0..2) == 1), u8::from(rng.random_range(0..2) == 1)],
                        [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)],
                    )
                })
                .collect();
            let k = rng.random_range(1..5.min(n));
            let batch = rng.random_range(1..=n);
            let iters = rng.random_range(1..20);
            let out = minibatch_kmeans(&profiles, k, batch, iters, trial as u64).unwrap();
            assert!(
                out.inertia <= out.initial_inertia + 1e-9,
                "trial {trial}: inertia {} above initial {}",
                out.inertia,
                out.initial_inertia
            );
        }
    }

    #[test]
    fn kmeans_rejects_bad_inputs() {
        let profiles: Vec<UserProfile> = (0..3).map(|i| profile(&format!("u{i}"), vec![0], [0.0; 3])).collect();
        assert!(matches!(minibatch_kmeans(&[], 1, 1, 1, 0), Err(SegmentError::EmptyInput)));
        assert!(matches!(minibatch_kmeans(&profiles, 4, 1, 1, 0), Err(SegmentError::BadClusterCount { .. })));
        assert!(matches!(minibatch_kmeans(&profiles, 2, 0, 1, 0), Err(SegmentError::ZeroBatch)));
    }

    #[test]
    fn unanimous_topic_enters_the_label() {
        let profiles = vec![
            profile("u0", vec![1, 0], [0.0; 3]),
            profile("u1", vec![1, 1], [0.0; 3]),
            profile("u2", vec![1, 0], [0.0; 3]),
        ];
        let label = community_topic_label(&[0, 1, 2], &profiles, 2);
        assert_eq!(label, vec![1, 0]); // topic 1 has 1/3 < majority
    }

    #[test]
    fn exact_tie_excludes_the_topic() {
        let profiles = vec![profile("u0", vec![1], [0.0; 3]), profile("u1", vec![0], [0.0; 3])];
        assert_eq!(community_topic_label(&[0, 1], &profiles, 1), vec![0]);
    }

    #[test]
    fn nine_member_label_matches_counting_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let profiles: Vec<UserProfile> = (0..9)
            .map(|i| {
                profile(
                    &format!("u{i}"),
                    (0..5).map(|_| u8::from(rng.random_range(0..2) == 1)).collect(),
                    [0.0; 3],
                )
            })
            .collect();
        let members: Vec<usize> = (0..9).collect();
        let label = community_topic_label(&members, &profiles, 5);
        for k in 0..5 {
            let count = profiles.iter().filter(|p| p.topic_vector[k] == 1).count();
            assert_eq!(label[k], u8::from(count > 4), "topic {k}: {count} of 9");
        }
    }

    fn community(id: usize, members: Vec<usize>, label: Vec<u8>) -> Community {
        Community { community_id: id, members, topic_label: label }
    }

    #[test]
    fn identical_labels_collapse_to_one_segment() {
        let cs = vec![
            community(0, vec![0, 1], vec![1, 0, 1]),
            community(1, vec![2], vec![1, 0, 1]),
        ];
        let set = ensemble_agglomerate(&cs, 1).unwrap();
        assert_eq!(set.segments.len(), 1);
        assert_eq!(set.segments[0].label, vec![1, 0, 1]);
        assert_eq!(set.segments[0].communities, vec![0, 1]);
        assert_eq!(set.segments[0].size, 3);
        assert_eq!(set.merge_trace, vec![(0, 1)]);
    }

    #[test]
    fn k_equal_to_community_count_is_identity() {
        let cs = vec![
            community(0, vec![0], vec![1, 0, 0]),
            community(1, vec![1], vec![0, 1, 0]),
            community(2, vec![2], vec![0, 0, 1]),
        ];
        let set = ensemble_agglomerate(&cs, 3).unwrap();
        assert!(set.merge_trace.is_empty());
        assert_eq!(set.segments.len(), 3);
        for (s, c) in set.segments.iter().zip(&cs) {
            assert_eq!(s.label, c.topic_label);
            assert_eq!(s.communities, vec![c.community_id]);
        }
    }

    /// Mirror of the production merge loop that recomputes the full
    /// distance matrix from scratch at every step.
    fn oracle_trace(communities: &[Community], k: usize) -> Vec<(usize, usize)> {
        let mut groups: Vec<(Vec<usize>, Vec<u8>)> = (0..communities.len())
            .map(|i| (vec![i], communities[i].topic_label.clone()))
            .collect();
        let mut trace = Vec::new();
        while groups.len() > k {
            let mut matrix = vec![vec![0.0; groups.len()]; groups.len()];
            for i in 0..groups.len() {
                for j in 0..groups.len() {
                    matrix[i][j] = jaccard_distance(&groups[i].1, &groups[j].1);
                }
            }
            let mut best = (usize::MAX, usize::MAX);
            let mut best_d = f64::INFINITY;
            for i in 0..groups.len() {
                for j in 0..groups.len() {
                    if i < j && matrix[i][j] < best_d {
                        best_d = matrix[i][j];
                        best = (i, j);
                    }
                }
            }
            trace.push(best);
            let (i, j) = best;
            let removed = groups.remove(j);
            groups[i].0.extend(removed.0);
            groups[i].0.sort_unstable();
            let members = groups[i].0.clone();
            let vocab_len = communities[0].topic_label.len();
            let mut counts = vec![0usize; vocab_len];
            for &ci in &members {
                for (t, &b) in communities[ci].topic_label.iter().enumerate() {
                    if b == 1 {
                        counts[t] += 1;
                    }
                }
            }
            groups[i].1 = counts.iter().map(|&c| u8::from(2 * c > members.len())).collect();
        }
        trace
    }

    #[test]
    fn six_community_merge_sequence_matches_oracle() {
        let cs = vec![
            community(0, vec![0, 1], vec![1, 1, 0, 0]),
            community(1, vec![2], vec![1, 0, 0, 0]),
            community(2, vec![3, 4, 5], vec![0, 0, 1, 1]),
            community(3, vec![6], vec![0, 0, 1, 0]),
            community(4, vec![7, 8], vec![1, 1, 0, 0]),
            community(5, vec![9], vec![0, 0, 0, 0]),
        ];
        for k in 1..=5 {
            let set = ensemble_agglomerate(&cs, k).unwrap();
            assert_eq!(set.merge_trace, oracle_trace(&cs, k), "diverged at K={k}");
            assert_eq!(set.merge_trace.len(), 6 - k);
            assert_eq!(set.segments.len(), k);
        }
        // the duplicate pair merges first, at distance zero
        let set = ensemble_agglomerate(&cs, 5).unwrap();
        assert_eq!(set.merge_trace, vec![(0, 4)]);
        assert_eq!(set.segments[0].label, vec![1, 1, 0, 0]);
    }

    #[test]
    fn random_agglomerations_partition_the_population() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..40 {
            let users = rng.random_range(6..40);
            let num_communities = rng.random_range(2..6.min(users));
            let assignment_of: Vec<usize> =
                (0..users).map(|i| if i < num_communities { i } else { rng.random_range(0..num_communities) }).collect();
            let profiles: Vec<UserProfile> = (0..users)
                .map(|i| {
                    profile(
                        &format!("u{i}"),
                        (0..4).map(|_| u8::from(rng.random_range(0..2) == 1)).collect(),
                        [0.0; 3],
                    )
                })
                .collect();
            let communities = communities_from_assignments(&assignment_of, &profiles, 4);
            let k = rng.random_range(1..=communities.len());
            let set = ensemble_agglomerate(&communities, k).unwrap();
            let total: usize = set.segments.iter().map(|s| s.size).sum();
            assert_eq!(total, users);
            let mut seen = BTreeSet::new();
            for s in &set.segments {
                assert!(s.shannon_h >= 0.0);
                for &c in &s.communities {
                    assert!(seen.insert(c), "community {c} landed in two segments");
                }
            }
            assert_eq!(seen.len(), communities.len());
        }
    }

    #[test]
    fn shannon_single_community_is_exactly_zero() {
        assert_eq!(shannon_index(&[17]), 0.0);
    }

    #[test]
    fn shannon_uniform_over_four_is_ln_four() {
        let h = shannon_index(&[5, 5, 5, 5]);
        assert!((h - 4.0_f64.ln()).abs() < 1e-9, "H = {h}");
    }

    #[test]
    fn shannon_half_quarter_quarter_matches_direct_sum() {
        let h = shannon_index(&[2, 1, 1]);
        let direct = -(0.5 * 0.5_f64.ln() + 0.25 * 0.25_f64.ln() + 0.25 * 0.25_f64.ln());
        assert!((h - direct).abs() < 1e-12);
        assert!(h < 3.0_f64.ln());
    }

    #[test]
    fn shannon_bounded_by_log_community_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        for _ in 0..1000 {
            let s = rng.random_range(1..8);
            let sizes: Vec<usize> = (0..s).map(|_| rng.random_range(1..20)).collect();
            let h = shannon_index(&sizes);
            assert!(h <= (s as f64).ln() + 1e-12, "H={h} above ln({s})");
            if sizes.iter().all(|&x| x == sizes[0]) {
                assert!((h - (s as f64).ln()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn coverage_counts_distinct_topics() {
        let none = vec![Segment { label: vec![0, 0], communities: vec![0], size: 1, shannon_h: 0.0 }];
        assert_eq!(topic_coverage(&none), 0);
        let two = vec![
            Segment { label: vec![1, 1, 0], communities: vec![0], size: 1, shannon_h: 0.0 },
            Segment { label: vec![0, 1, 1], communities: vec![1], size: 1, shannon_h: 0.0 },
        ];
        assert_eq!(topic_coverage(&two), 3);
    }

    #[test]
    fn coverage_matches_union_oracle_on_random_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for _ in 0..50 {
            let segs: Vec<Segment> = (0..rng.random_range(1..6))
                .map(|i| Segment {
                    label: (0..6).map(|_| u8::from(rng.random_range(0..2) == 1)).collect(),
                    communities: vec![i],
                    size: 1,
                    shannon_h: 0.0,
                })
                .collect();
            let mut union: BTreeSet<usize> = BTreeSet::new();
            for s in &segs {
                for (k, &b) in s.label.iter().enumerate() {
                    if b == 1 {
                        union.insert(k);
                    }
                }
            }
            assert_eq!(topic_coverage(&segs), union.len());
        }
    }

    #[test]
    fn csv_round_trips_and_reports_render() {
        let text = "repo_id,topic\nr0,rust\nr0,ml\nr1,\nr2,web\n";
        let topics = read_topic_map(text).unwrap();
        assert_eq!(topics["r0"].len(), 2);
        assert!(topics["r1"].is_empty());
        let vocab = topic_vocabulary(&topics);
        assert_eq!(vocab, vec!["ml".to_string(), "rust".to_string(), "web".to_string()]);

        let community_text = "user_id,community_id\nalice,0\nbob,2\n";
        let entries = read_community_file(community_text).unwrap();
        assert_eq!(entries, vec![("alice".to_string(), 0), ("bob".to_string(), 2)]);
        assert!(matches!(
            read_community_file("user_id,community_id\nalice,x\n"),
            Err(SegmentError::Csv { line: 2, .. })
        ));
        assert!(matches!(read_topic_map("bad_header\n"), Err(SegmentError::Csv { line: 1, .. })));

        let profiles = vec![
            profile("alice", vec![1, 0, 0], [0.0; 3]),
            profile("bob", vec![0, 1, 1], [0.0; 3]),
        ];
        let communities = communities_from_file(&entries, &profiles, 3).unwrap();
        assert_eq!(communities.len(), 2);
        assert_eq!(
            community_file_csv(&communities, &profiles),
            "user_id,community_id\nalice,0\nbob,2\n"
        );
        let set = ensemble_agglomerate(&communities, 2).unwrap();
        let report = segment_report_csv(&set, &vocab);
        let lines: Vec<&str> = report.lines().collect();
        assert_eq!(lines[0], "segment_id,size,shannon_H,label_topics");
        assert_eq!(lines[1], "0,1,0,ml");
        assert_eq!(lines[2], "1,1,0,rust|web");
    }

    #[test]
    fn missing_profile_in_community_file_is_an_error() {
        let profiles = vec![profile("alice", vec![0], [0.0; 3])];
        let err = communities_from_file(&[("someone_else".to_string(), 0)], &profiles, 1);
        assert!(matches!(err, Err(SegmentError::MissingCommunity(u)) if u == "alice"));
    }

    #[test]
    fn default_communities_group_by_component() {
        let mut profiles = vec![
            profile("a", vec![1], [0.0; 3]),
            profile("b", vec![1], [0.0; 3]),
            profile("c", vec![0], [0.0; 3]),
            profile("d", vec![0], [0.0; 3]),
        ];
        profiles[0].component = Some(0);
        profiles[1].component = Some(0);
        profiles[2].component = Some(3);
        // profile d touched no tracked repo
        let communities = default_communities(&profiles, 1);
        assert_eq!(communities.len(), 3);
        assert_eq!(communities[0].members, vec![0, 1]);
        assert_eq!(communities[1].members, vec![2]);
        assert_eq!(communities[2].members, vec![3]);
        assert_eq!(communities[0].topic_label, vec![1]);
    }
}
