//! Event-log and user-metadata ingestion.
//!
//! Input records are line-delimited JSON objects. Parsing is per line and
//! runs in parallel chunks; the sort by `(timestamp, event_id)` and the
//! duplicate check happen in a single serial merge afterwards.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sixty days, in seconds.
pub const DEFAULT_BUFFER_SECS: i64 = 60 * 86_400;

/// Default minimum number of shared URL instances for a target user.
pub const DEFAULT_TARGET_THRESHOLD: usize = 10;

const MAX_REPORTED_ERRORS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Original,
    Retweet,
    Quote,
    Reply,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Original => "original",
            EventKind::Retweet => "retweet",
            EventKind::Quote => "quote",
            EventKind::Reply => "reply",
        }
    }

    /// Retweets, quotes and replies are directed at another user.
    pub fn is_interaction(self) -> bool {
        !matches!(self, EventKind::Original)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(EventKind::Original),
            "retweet" => Ok(EventKind::Retweet),
            "quote" => Ok(EventKind::Quote),
            "reply" => Ok(EventKind::Reply),
            other => Err(Error::InvalidArgument(format!("unknown event kind {other:?}"))),
        }
    }
}

/// One timestamped post, reshare, quote or reply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub event_id: String,
    pub kind: EventKind,
    pub author: String,
    pub target_author: Option<String>,
    pub timestamp: i64,
    pub urls: Vec<String>,
}

impl InteractionEvent {
    /// Checks the record-level invariants.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.event_id.is_empty() {
            return Err("empty event_id".into());
        }
        if self.author.is_empty() {
            return Err("empty author".into());
        }
        if self.timestamp < 0 {
            return Err(format!("negative timestamp {}", self.timestamp));
        }
        match (self.kind, self.target_author.as_deref()) {
            (EventKind::Original, Some(_)) => {
                return Err("original post must not carry target_author".into())
            }
            (EventKind::Original, None) => {}
            (_, None) => return Err("missing target_author".into()),
            (_, Some(t)) if t == self.author => {
                return Err("self-interaction: target_author equals author".into())
            }
            (_, Some("")) => return Err("empty target_author".into()),
            _ => {}
        }
        let mut seen = HashSet::with_capacity(self.urls.len());
        for url in &self.urls {
            if !seen.insert(url.as_str()) {
                return Err(format!("duplicate url {url:?}"));
            }
        }
        Ok(())
    }

    pub fn url_count(&self) -> usize {
        self.urls.len()
    }
}

/// Lowercases scheme and host, strips the fragment and keeps the query.
pub fn canonicalize_url(raw: &str) -> String {
    let trimmed = raw.trim();
    let no_fragment = match trimmed.find('#') {
        Some(i) => &trimmed[..i],
        None => trimmed,
    };
    match no_fragment.find("://") {
        Some(scheme_end) => {
            let scheme = &no_fragment[..scheme_end];
            let rest = &no_fragment[scheme_end + 3..];
            let host_end = rest.find(['/', '?']).unwrap_or(rest.len());
            let (host, tail) = rest.split_at(host_end);
            format!(
                "{}://{}{}",
                scheme.to_ascii_lowercase(),
                host.to_ascii_lowercase(),
                tail
            )
        }
        None => no_fragment.to_string(),
    }
}

/// Canonicalizes every URL and removes duplicates, keeping first occurrences.
fn canonical_urls(urls: Vec<String>) -> Vec<String> {
    let mut seen = HashSet::with_capacity(urls.len());
    let mut out = Vec::with_capacity(urls.len());
    for url in urls {
        let c = canonicalize_url(&url);
        if seen.insert(c.clone()) {
            out.push(c);
        }
    }
    out
}

#[derive(Deserialize)]
struct RawEvent {
    event_id: String,
    kind: String,
    author: String,
    #[serde(default)]
    target_author: Option<String>,
    timestamp: serde_json::Number,
    urls: Vec<String>,
}

fn parse_event_line(line: &str) -> std::result::Result<InteractionEvent, String> {
    let raw: RawEvent = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let kind = EventKind::from_str(&raw.kind).map_err(|e| e.to_string())?;
    let timestamp = raw
        .timestamp
        .as_i64()
        .ok_or_else(|| format!("timestamp {} outside representable range", raw.timestamp))?;
    let event = InteractionEvent {
        event_id: raw.event_id,
        kind,
        author: raw.author,
        target_author: raw.target_author,
        timestamp,
        urls: canonical_urls(raw.urls),
    };
    event.validate()?;
    Ok(event)
}

/// Counts reported alongside a parsed log.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseSummary {
    pub lines: usize,
    pub events: usize,
    pub malformed: usize,
    /// First few error messages, prefixed by line number.
    pub errors: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ParsedLog {
    pub events: Vec<InteractionEvent>,
    pub summary: ParseSummary,
}

fn read_lines<R: BufRead>(reader: R) -> Result<Vec<(usize, String)>> {
    let mut lines = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        lines.push((i + 1, line));
    }
    Ok(lines)
}

/// Parses a line-delimited event log.
///
/// In strict mode the first malformed line aborts the parse; otherwise
/// malformed lines are skipped and counted. Duplicate event ids are always
/// an error. The output is sorted by `(timestamp, event_id)`.
pub fn parse_event_log<R: BufRead>(reader: R, strict: bool) -> Result<ParsedLog> {
    let lines = read_lines(reader)?;
    let parsed: Vec<(usize, std::result::Result<InteractionEvent, String>)> = lines
        .par_iter()
        .map(|(n, line)| (*n, parse_event_line(line)))
        .collect();

    let mut summary = ParseSummary {
        lines: lines.len(),
        ..ParseSummary::default()
    };
    let mut events = Vec::with_capacity(parsed.len());
    for (line, result) in parsed {
        match result {
            Ok(event) => events.push(event),
            Err(msg) => {
                if strict {
                    return Err(Error::Malformed { line, msg });
                }
                summary.malformed += 1;
                if summary.errors.len() < MAX_REPORTED_ERRORS {
                    summary.errors.push(format!("line {line}: {msg}"));
                }
            }
        }
    }

    events.sort_by(|a, b| {
        a.timestamp
            .cmp(&b.timestamp)
            .then_with(|| a.event_id.cmp(&b.event_id))
    });
    for pair in events.windows(2) {
        if pair[0].event_id == pair[1].event_id {
            return Err(Error::DuplicateEvent(pair[0].event_id.clone()));
        }
    }
    // Duplicates with different timestamps are not adjacent after the sort.
    let mut ids = HashSet::with_capacity(events.len());
    for e in &events {
        if !ids.insert(e.event_id.as_str()) {
            return Err(Error::DuplicateEvent(e.event_id.clone()));
        }
    }
    summary.events = events.len();
    Ok(ParsedLog { events, summary })
}

/// Writes events in the line-delimited interchange format.
pub fn write_event_log<W: Write>(events: &[InteractionEvent], mut writer: W) -> Result<()> {
    for event in events {
        serde_json::to_writer(&mut writer, event)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Result of [`filter_url_events`].
#[derive(Debug, Clone)]
pub struct UrlFilter {
    pub events: Vec<InteractionEvent>,
    pub removed: usize,
}

/// Keeps exactly the events that carry at least one URL, in order.
pub fn filter_url_events(events: Vec<InteractionEvent>) -> UrlFilter {
    let before = events.len();
    let events: Vec<_> = events.into_iter().filter(|e| !e.urls.is_empty()).collect();
    UrlFilter {
        removed: before - events.len(),
        events,
    }
}

/// Users whose authored events carry at least `threshold` URL instances.
pub fn select_target_users(
    events: &[InteractionEvent],
    threshold: usize,
) -> Result<BTreeSet<String>> {
    if threshold == 0 {
        return Err(Error::InvalidArgument(
            "target threshold must be positive".into(),
        ));
    }
    let counts = shared_url_counts(events);
    Ok(counts
        .into_iter()
        .filter(|(_, n)| *n >= threshold)
        .map(|(u, _)| u.to_string())
        .collect())
}

/// URL instances shared by each author, summed over all event kinds.
pub fn shared_url_counts(events: &[InteractionEvent]) -> BTreeMap<&str, usize> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for e in events {
        *counts.entry(e.author.as_str()).or_default() += e.urls.len();
    }
    counts
}

/// Account-level metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserMeta {
    pub user: String,
    pub followers_count: u64,
    pub friends_count: u64,
    pub statuses_count: u64,
    pub favorites_count: u64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MetaSummary {
    pub lines: usize,
    pub records: usize,
    pub malformed: usize,
    pub warnings: Vec<String>,
}

/// Parses user metadata records. Later records for the same user replace
/// earlier ones, with a warning.
pub fn parse_user_meta<R: BufRead>(
    reader: R,
    strict: bool,
) -> Result<(BTreeMap<String, UserMeta>, MetaSummary)> {
    let lines = read_lines(reader)?;
    let mut summary = MetaSummary {
        lines: lines.len(),
        ..MetaSummary::default()
    };
    let mut out = BTreeMap::new();
    for (line, text) in lines {
        match serde_json::from_str::<UserMeta>(&text) {
            Ok(meta) if !meta.user.is_empty() => {
                if out.contains_key(&meta.user) {
                    let msg = format!("line {line}: duplicate metadata for {:?}, last wins", meta.user);
                    log::warn!("{msg}");
                    summary.warnings.push(msg);
                }
                out.insert(meta.user.clone(), meta);
            }
            Ok(_) => {
                if strict {
                    return Err(Error::Malformed { line, msg: "empty user".into() });
                }
                summary.malformed += 1;
            }
            Err(e) => {
                if strict {
                    return Err(Error::Malformed { line, msg: e.to_string() });
                }
                summary.malformed += 1;
                if summary.warnings.len() < MAX_REPORTED_ERRORS {
                    summary.warnings.push(format!("line {line}: {e}"));
                }
            }
        }
    }
    summary.records = out.len();
    Ok((out, summary))
}

pub fn write_user_meta<'a, W, I>(records: I, mut writer: W) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a UserMeta>,
{
    for meta in records {
        serde_json::to_writer(&mut writer, meta)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Observation window with an initial buffer during which adoptions are
/// not counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusWindow {
    pub start: i64,
    pub end: i64,
    pub buffer_end: i64,
}

impl CorpusWindow {
    pub fn new(start: i64, end: i64, buffer_end: i64) -> Result<Self> {
        if !(start < buffer_end && buffer_end <= end) {
            return Err(Error::InvalidArgument(format!(
                "window requires start < buffer_end <= end (got {start}, {buffer_end}, {end})"
            )));
        }
        Ok(CorpusWindow { start, end, buffer_end })
    }

    pub fn with_buffer(start: i64, end: i64, buffer_secs: i64) -> Result<Self> {
        let buffer_end = start
            .checked_add(buffer_secs)
            .ok_or_else(|| Error::InvalidArgument("buffer overflows timestamp range".into()))?;
        Self::new(start, end, buffer_end)
    }

    /// Window spanning the observed timestamps of `events`.
    pub fn from_events(events: &[InteractionEvent], buffer_secs: i64) -> Result<Self> {
        let start = events.iter().map(|e| e.timestamp).min();
        let end = events.iter().map(|e| e.timestamp).max();
        match (start, end) {
            (Some(s), Some(e)) => Self::with_buffer(s, e, buffer_secs),
            _ => Err(Error::InsufficientData("no events to span a window".into())),
        }
    }

    pub fn contains(&self, t: i64) -> bool {
        self.start <= t && t <= self.end
    }
}
