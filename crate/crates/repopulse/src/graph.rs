//! Bipartite user-repository interaction graph and its connected components.
//!
//! An edge connects a user to a repository they touched. Two repositories are
//! in the same component when a chain of shared users (possibly through other
//! repositories) links them. Components are tracked cumulatively across
//! windows: edges only accumulate, so components only ever merge.

use crate::ingest::EventRecord;
use ndarray::Array2;
use std::collections::{HashMap, HashSet};
use thiserror::Error;

/// Disjoint-set forest with path compression and union by size.
#[derive(Debug, Clone, Default)]
pub struct DisjointSet {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSet {
    pub fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Appends a fresh singleton and returns its index.
    pub fn push(&mut self) -> usize {
        let id = self.parent.len();
        self.parent.push(id);
        self.size.push(1);
        id
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            // halve the path: point x at its grandparent
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Joins the sets containing `a` and `b`; returns false if already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }

    pub fn connected(&mut self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }

    pub fn set_size(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.size[r]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Node {
    User(usize),
    Repo(usize),
}

/// Growable bipartite graph over interned user and repository ids.
///
/// Any repository seen in the event stream participates in connectivity, but
/// component read-outs are restricted to a fixed tracked list so panels and
/// assignments line up row for row.
#[derive(Debug, Clone)]
pub struct BipartiteGraph {
    tracked: Vec<String>,
    tracked_index: HashMap<String, usize>,
    user_index: HashMap<String, usize>,
    extra_repo_index: HashMap<String, usize>,
    // arena ids: tracked repos occupy [0, tracked.len()), everything else follows
    arena: HashMap<Node, usize>,
    sets: DisjointSet,
    edges: HashSet<(usize, usize)>,
}

impl BipartiteGraph {
    pub fn new(tracked_repos: &[String]) -> Result<Self, GraphError> {
        let mut tracked_index = HashMap::new();
        for (i, id) in tracked_repos.iter().enumerate() {
            if tracked_index.insert(id.clone(), i).is_some() {
                return Err(GraphError::DuplicateRepo(id.clone()));
            }
        }
        let mut g = BipartiteGraph {
            tracked: tracked_repos.to_vec(),
            tracked_index,
            user_index: HashMap::new(),
            extra_repo_index: HashMap::new(),
            arena: HashMap::new(),
            sets: DisjointSet::default(),
            edges: HashSet::new(),
        };
        // tracked repos always exist, even before any event touches them
        for i in 0..g.tracked.len() {
            let id = g.sets.push();
            g.arena.insert(Node::Repo(i), id);
            debug_assert_eq!(id, i);
        }
        Ok(g)
    }

    pub fn tracked_repos(&self) -> &[String] {
        &self.tracked
    }

    pub fn num_users(&self) -> usize {
        self.user_index.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    fn intern_user(&mut self, user: &str) -> usize {
        if let Some(&u) = self.user_index.get(user) {
            return u;
        }
        let u = self.user_index.len();
        self.user_index.insert(user.to_string(), u);
        u
    }

    fn intern_repo(&mut self, repo: &str) -> usize {
        if let Some(&r) = self.tracked_index.get(repo) {
            return r;
        }
        let next = self.tracked.len() + self.extra_repo_index.len();
        *self.extra_repo_index.entry(repo.to_string()).or_insert(next)
    }

    fn arena_id(&mut self, node: Node) -> usize {
        if let Some(&id) = self.arena.get(&node) {
            return id;
        }
        let id = self.sets.push();
        self.arena.insert(node, id);
        id
    }

    /// Adds one user-repository edge; returns true when it was new.
    pub fn add_edge(&mut self, user: &str, repo: &str) -> bool {
        let u = self.intern_user(user);
        let r = self.intern_repo(repo);
        let ua = self.arena_id(Node::User(u));
        let ra = self.arena_id(Node::Repo(r));
        if !self.edges.insert((ua, ra)) {
            return false;
        }
        self.sets.union(ua, ra);
        true
    }

    pub fn add_events(&mut self, events: &[EventRecord]) {
        for ev in events {
            self.add_edge(&ev.user_id, &ev.repo_id);
        }
    }

    /// Component label and size for every tracked repository.
    ///
    /// Labels are canonical: each component is named after the smallest
    /// tracked-repo index it contains, so identical structure always yields
    /// identical labels regardless of edge insertion order. Sizes count
    /// tracked repositories only.
    pub fn assignments(&mut self) -> ComponentAssignment {
        let n = self.tracked.len();
        let mut root_to_label: HashMap<usize, usize> = HashMap::new();
        let mut labels = vec![0usize; n];
        for i in 0..n {
            // tracked repo i lives at arena id i by construction
            let root = self.sets.find(i);
            let label = *root_to_label.entry(root).or_insert(i);
            labels[i] = label;
        }
        let mut size_of_label: HashMap<usize, usize> = HashMap::new();
        for &l in &labels {
            *size_of_label.entry(l).or_insert(0) += 1;
        }
        let sizes = labels.iter().map(|l| size_of_label[l]).collect();
        ComponentAssignment { labels, sizes }
    }
}

/// Per-repository component labels and component sizes, aligned with the
/// tracked repository list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentAssignment {
    labels: Vec<usize>,
    sizes: Vec<usize>,
}

impl ComponentAssignment {
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn num_repos(&self) -> usize {
        self.labels.len()
    }

    pub fn num_components(&self) -> usize {
        self.labels.iter().collect::<HashSet<_>>().len()
    }

    /// Size share of each repository's component: size / total tracked repos,
    /// in (0, 1]. This is the label-free connectivity feature models consume.
    pub fn size_shares(&self) -> Vec<f64> {
        let n = self.labels.len() as f64;
        self.sizes.iter().map(|&s| s as f64 / n).collect()
    }

    /// True when every component of `self` is contained in a single component
    /// of `later` — i.e. components only merged, never split.
    pub fn refines(&self, later: &ComponentAssignment) -> bool {
        if self.labels.len() != later.labels.len() {
            return false;
        }
        let mut image: HashMap<usize, usize> = HashMap::new();
        for (i, &l) in self.labels.iter().enumerate() {
            match image.get(&l) {
                Some(&m) if m != later.labels[i] => return false,
                Some(_) => {}
                None => {
                    image.insert(l, later.labels[i]);
                }
            }
        }
        true
    }
}

/// Component assignments for every window of a panel's grid, computed
/// cumulatively: the graph at window t contains all edges from windows 0..=t.
pub fn cumulative_assignments(
    events: &[EventRecord],
    grid: &crate::ingest::TimeGrid,
    tracked: &[String],
) -> Result<Vec<ComponentAssignment>, GraphError> {
    let mut per_window: Vec<Vec<&EventRecord>> = vec![Vec::new(); grid.num_windows];
    for ev in events {
        let t = grid
            .window_index(ev.timestamp)
            .ok_or(GraphError::EventOutOfRange { timestamp: ev.timestamp })?;
        per_window[t].push(ev);
    }
    let mut graph = BipartiteGraph::new(tracked)?;
    let mut out = Vec::with_capacity(grid.num_windows);
    for window in per_window {
        for ev in window {
            graph.add_edge(&ev.user_id, &ev.repo_id);
        }
        out.push(graph.assignments());
    }
    Ok(out)
}

/// Stacks per-window component size shares into an R x T matrix aligned
/// with a count panel: cell (r, t) is repo r's share at window t.
pub fn share_matrix(assignments: &[ComponentAssignment]) -> Array2<f64> {
    let num_repos = assignments.first().map_or(0, |a| a.num_repos());
    let mut out = Array2::zeros((num_repos, assignments.len()));
    for (t, a) in assignments.iter().enumerate() {
        for (r, s) in a.size_shares().into_iter().enumerate() {
            out[[r, t]] = s;
        }
    }
    out
}

/// Serializes per-window assignments as CSV with header
/// `window,repo_id,component_label,component_size`.
pub fn assignments_to_csv(assignments: &[ComponentAssignment], repo_ids: &[String]) -> String {
    let mut out = String::from("window,repo_id,component_label,component_size\n");
    for (t, a) in assignments.iter().enumerate() {
        for (r, id) in repo_ids.iter().enumerate() {
            out.push_str(&format!("{t},{id},{},{}\n", a.labels()[r], a.sizes()[r]));
        }
    }
    out
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("duplicate repo id `{0}`")]
    DuplicateRepo(String),
    #[error("event at {timestamp} falls outside the grid")]
    EventOutOfRange { timestamp: chrono::DateTime<chrono::Utc> },
}
