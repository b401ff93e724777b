//! Event stream parsing, filtering, and fixed-window count binning.
//!
//! Wire format: line-delimited records, one JSON object per line with fields
//! `type`, `actor`, `repo`, `created_at` (ISO-8601 UTC). Unknown extra fields
//! are ignored; unknown event type names are rejected per line.

use chrono::{DateTime, SecondsFormat, Utc};
use ndarray::Array2;
use serde::Deserialize;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::BufRead;
use thiserror::Error;

/// The 14 recognized activity event types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventType {
    CommitComment,
    Create,
    Delete,
    Fork,
    Gollum,
    IssueComment,
    Issue,
    Member,
    Public,
    Pullrequest,
    PullrequestReviewComment,
    Push,
    Release,
    Watch,
}

impl EventType {
    pub const ALL: [EventType; 14] = [
        EventType::CommitComment,
        EventType::Create,
        EventType::Delete,
        EventType::Fork,
        EventType::Gollum,
        EventType::IssueComment,
        EventType::Issue,
        EventType::Member,
        EventType::Public,
        EventType::Pullrequest,
        EventType::PullrequestReviewComment,
        EventType::Push,
        EventType::Release,
        EventType::Watch,
    ];

    /// Parses an event type name, accepting both the bare name (`Watch`)
    /// and the archive-style suffixed form (`WatchEvent`).
    pub fn parse(name: &str) -> Option<EventType> {
        let base = name.strip_suffix("Event").unwrap_or(name);
        match base {
            "CommitComment" => Some(EventType::CommitComment),
            "Create" => Some(EventType::Create),
            "Delete" => Some(EventType::Delete),
            "Fork" => Some(EventType::Fork),
            "Gollum" => Some(EventType::Gollum),
            "IssueComment" => Some(EventType::IssueComment),
            "Issue" => Some(EventType::Issue),
            "Member" => Some(EventType::Member),
            "Public" => Some(EventType::Public),
            "Pullrequest" => Some(EventType::Pullrequest),
            "PullrequestReviewComment" => Some(EventType::PullrequestReviewComment),
            "Push" => Some(EventType::Push),
            "Release" => Some(EventType::Release),
            "Watch" => Some(EventType::Watch),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EventType::CommitComment => "CommitComment",
            EventType::Create => "Create",
            EventType::Delete => "Delete",
            EventType::Fork => "Fork",
            EventType::Gollum => "Gollum",
            EventType::IssueComment => "IssueComment",
            EventType::Issue => "Issue",
            EventType::Member => "Member",
            EventType::Public => "Public",
            EventType::Pullrequest => "Pullrequest",
            EventType::PullrequestReviewComment => "PullrequestReviewComment",
            EventType::Push => "Push",
            EventType::Release => "Release",
            EventType::Watch => "Watch",
        }
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One timestamped user-repository interaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventRecord {
    pub event_type: EventType,
    pub user_id: String,
    pub repo_id: String,
    pub timestamp: DateTime<Utc>,
}

impl EventRecord {
    /// Renders the record back into its one-line wire form.
    pub fn to_wire_line(&self) -> String {
        format!(
            "{{\"type\":\"{}Event\",\"actor\":\"{}\",\"repo\":\"{}\",\"created_at\":\"{}\"}}",
            self.event_type.name(),
            self.user_id,
            self.repo_id,
            self.timestamp.to_rfc3339_opts(SecondsFormat::Secs, true),
        )
    }
}

/// Fixed-length windowing of a time range.
///
/// Windows are half-open intervals `[start_t, start_{t+1})`: an event falling
/// exactly on a boundary lands in the later window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeGrid {
    pub start: DateTime<Utc>,
    pub window_days: u32,
    pub num_windows: usize,
}

impl TimeGrid {
    pub fn new(start: DateTime<Utc>, window_days: u32, num_windows: usize) -> Result<Self, IngestError> {
        if window_days == 0 {
            return Err(IngestError::InvalidGrid("window_days must be positive"));
        }
        if num_windows == 0 {
            return Err(IngestError::InvalidGrid("num_windows must be positive"));
        }
        Ok(TimeGrid { start, window_days, num_windows })
    }

    fn window_seconds(&self) -> i64 {
        self.window_days as i64 * 86_400
    }

    /// Window index of an instant, or `None` if it falls outside the grid.
    pub fn window_index(&self, t: DateTime<Utc>) -> Option<usize> {
        let secs = (t - self.start).num_seconds();
        if secs < 0 {
            return None;
        }
        let idx = (secs / self.window_seconds()) as usize;
        (idx < self.num_windows).then_some(idx)
    }

    pub fn window_start(&self, idx: usize) -> DateTime<Utc> {
        self.start + chrono::Duration::seconds(self.window_seconds() * idx as i64)
    }

    pub fn end(&self) -> DateTime<Utc> {
        self.window_start(self.num_windows)
    }
}

/// Matrix of event counts, repositories by time windows.
#[derive(Debug, Clone, PartialEq)]
pub struct CountPanel {
    repo_ids: Vec<String>,
    grid: TimeGrid,
    counts: Array2<u64>,
}

impl CountPanel {
    pub fn new(repo_ids: Vec<String>, grid: TimeGrid, counts: Array2<u64>) -> Result<Self, IngestError> {
        let mut seen = HashSet::new();
        for id in &repo_ids {
            if !seen.insert(id.as_str()) {
                return Err(IngestError::DuplicateRepo(id.clone()));
            }
        }
        if counts.nrows() != repo_ids.len() || counts.ncols() != grid.num_windows {
            return Err(IngestError::PanelShape {
                rows: counts.nrows(),
                cols: counts.ncols(),
                repos: repo_ids.len(),
                windows: grid.num_windows,
            });
        }
        Ok(CountPanel { repo_ids, grid, counts })
    }

    pub fn zeros(repo_ids: Vec<String>, grid: TimeGrid) -> Result<Self, IngestError> {
        let counts = Array2::zeros((repo_ids.len(), grid.num_windows));
        CountPanel::new(repo_ids, grid, counts)
    }

    pub fn repo_ids(&self) -> &[String] {
        &self.repo_ids
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn counts(&self) -> &Array2<u64> {
        &self.counts
    }

    pub fn num_repos(&self) -> usize {
        self.repo_ids.len()
    }

    pub fn num_windows(&self) -> usize {
        self.grid.num_windows
    }

    pub fn repo_index(&self, repo: &str) -> Option<usize> {
        self.repo_ids.iter().position(|r| r == repo)
    }

    pub fn total_for_row(&self, r: usize) -> u64 {
        self.counts.row(r).sum()
    }

    /// Counts as `f64`, the form the dataset and models consume.
    pub fn counts_f64(&self) -> Array2<f64> {
        self.counts.mapv(|c| c as f64)
    }

    /// Cell-wise addition of a shard-local panel over the same repos and grid.
    pub fn merge(&mut self, other: &CountPanel) -> Result<(), IngestError> {
        if self.repo_ids != other.repo_ids || self.grid != other.grid {
            return Err(IngestError::MergeMismatch);
        }
        self.counts += &other.counts;
        Ok(())
    }

    /// Serializes as CSV: header `repo_id,w0,w1,...`, one row per repository.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("repo_id");
        for t in 0..self.num_windows() {
            out.push_str(&format!(",w{t}"));
        }
        out.push('\n');
        for (r, id) in self.repo_ids.iter().enumerate() {
            out.push_str(id);
            for t in 0..self.num_windows() {
                out.push_str(&format!(",{}", self.counts[[r, t]]));
            }
            out.push('\n');
        }
        out
    }

    /// Parses the CSV form produced by [`CountPanel::to_csv`]. The grid is not
    /// carried by the CSV and must be supplied; its window count has to match
    /// the header.
    pub fn from_csv(text: &str, grid: TimeGrid) -> Result<Self, IngestError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(IngestError::Csv("missing header".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.first() != Some(&"repo_id") {
            return Err(IngestError::Csv(format!("bad header `{header}`")));
        }
        let num_windows = cols.len() - 1;
        if num_windows != grid.num_windows {
            return Err(IngestError::Csv(format!(
                "header has {num_windows} windows, grid expects {}",
                grid.num_windows
            )));
        }
        let mut repo_ids = Vec::new();
        let mut rows: Vec<u64> = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols.len() {
                return Err(IngestError::Csv(format!("row {} has {} fields, expected {}", i + 2, fields.len(), cols.len())));
            }
            repo_ids.push(fields[0].to_string());
            for f in &fields[1..] {
                let v: u64 = f
                    .parse()
                    .map_err(|_| IngestError::Csv(format!("row {}: bad count `{f}`", i + 2)))?;
                rows.push(v);
            }
        }
        let counts = Array2::from_shape_vec((repo_ids.len(), num_windows), rows)
            .expect("row-major cell vector matches declared shape");
        CountPanel::new(repo_ids, grid, counts)
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),
    #[error("event at {timestamp} falls outside the grid")]
    EventOutOfRange { timestamp: DateTime<Utc> },
    #[error("repo list must not be empty")]
    EmptyRepoList,
    #[error("duplicate repo id `{0}`")]
    DuplicateRepo(String),
    #[error("counts are {rows}x{cols} but panel declares {repos} repos x {windows} windows")]
    PanelShape { rows: usize, cols: usize, repos: usize, windows: usize },
    #[error("panels to merge disagree on repos or grid")]
    MergeMismatch,
    #[error("malformed panel csv: {0}")]
    Csv(String),
}

/// A line that failed to parse, with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MalformedLine {
    pub line_no: usize,
    pub reason: String,
}

/// Result of parsing a stream: records in order plus a report of bad lines.
#[derive(Debug, Default)]
pub struct ParseOutcome {
    pub records: Vec<EventRecord>,
    pub malformed: Vec<MalformedLine>,
}

#[derive(Deserialize)]
struct RawEvent {
    #[serde(rename = "type")]
    kind: String,
    actor: String,
    repo: String,
    created_at: String,
}

fn parse_line(line: &str) -> Result<EventRecord, String> {
    let raw: RawEvent = serde_json::from_str(line).map_err(|e| format!("invalid record: {e}"))?;
    let event_type = EventType::parse(&raw.kind).ok_or_else(|| format!("unknown event type `{}`", raw.kind))?;
    let timestamp = DateTime::parse_from_rfc3339(&raw.created_at)
        .map_err(|e| format!("bad created_at `{}`: {e}", raw.created_at))?
        .with_timezone(&Utc);
    Ok(EventRecord {
        event_type,
        user_id: raw.actor,
        repo_id: raw.repo,
        timestamp,
    })
}

/// Parses a line-delimited event stream. Malformed lines are collected with
/// their line numbers rather than dropped; only stream-level I/O aborts.
pub fn parse_events<R: BufRead>(reader: R) -> Result<ParseOutcome, IngestError> {
    let mut out = ParseOutcome::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(&line) {
            Ok(rec) => out.records.push(rec),
            Err(reason) => out.malformed.push(MalformedLine { line_no, reason }),
        }
    }
    Ok(out)
}

/// In-memory convenience wrapper around [`parse_events`].
pub fn parse_events_str(text: &str) -> ParseOutcome {
    parse_events(text.as_bytes()).expect("in-memory reads cannot fail")
}

/// Keeps only events whose type is in `keep`, preserving order.
pub fn filter_events(events: &[EventRecord], keep: &HashSet<EventType>) -> Vec<EventRecord> {
    events.iter().filter(|e| keep.contains(&e.event_type)).cloned().collect()
}

/// Panel plus the tally of events that referenced untracked repos.
#[derive(Debug)]
pub struct BinOutcome {
    pub panel: CountPanel,
    pub discarded: u64,
}

/// Counts events into `repos` x windows cells. Every event must fall inside
/// the grid; events for repos outside `repos` go to the discard tally.
pub fn bin_events(events: &[EventRecord], grid: &TimeGrid, repos: &[String]) -> Result<BinOutcome, IngestError> {
    if repos.is_empty() {
        return Err(IngestError::EmptyRepoList);
    }
    let mut panel = CountPanel::zeros(repos.to_vec(), *grid)?;
    let index: HashMap<&str, usize> = repos.iter().enumerate().map(|(i, r)| (r.as_str(), i)).collect();
    let mut discarded = 0u64;
    for ev in events {
        let t = grid
            .window_index(ev.timestamp)
            .ok_or(IngestError::EventOutOfRange { timestamp: ev.timestamp })?;
        match index.get(ev.repo_id.as_str()) {
            Some(&r) => panel.counts[[r, t]] += 1,
            None => discarded += 1,
        }
    }
    Ok(BinOutcome { panel, discarded })
}
