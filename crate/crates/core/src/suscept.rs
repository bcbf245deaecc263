//! Exposure and adoption histories, and the IAR / SAR susceptibility metrics.
//!
//! A target user is exposed to every URL posted by a source *after* the
//! target's first retweet, quote or reply directed at that source. Any URL
//! the user shares is an adoption; only adoptions after the buffer period
//! enter the metrics.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{CorpusWindow, InteractionEvent, UserMeta};

/// Which susceptibility metric an analysis runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Iar,
    Sar,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Iar => "iar",
            Metric::Sar => "sar",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iar" => Ok(Metric::Iar),
            "sar" => Ok(Metric::Sar),
            other => Err(Error::InvalidArgument(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserHistory {
    pub user: String,
    /// Earliest outbound interaction from this user to each source.
    pub first_interaction: BTreeMap<String, i64>,
    /// URL -> earliest exposure time.
    pub exposures: BTreeMap<String, i64>,
    /// URL -> earliest adoption time after the buffer.
    pub adoptions: BTreeMap<String, i64>,
    /// URL -> earliest adoption time over the whole window.
    pub adoptions_all: BTreeMap<String, i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SusceptibilityScore {
    pub user: String,
    pub iar: Option<f64>,
    pub sar: Option<f64>,
    pub n_exposed: usize,
    pub n_adopted: usize,
    pub n_influence_driven: usize,
}

impl SusceptibilityScore {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Iar => self.iar,
            Metric::Sar => self.sar,
        }
    }
}

fn check_sorted(events: &[InteractionEvent]) -> Result<()> {
    if events.windows(2).any(|w| w[0].timestamp > w[1].timestamp) {
        return Err(Error::Unsorted);
    }
    Ok(())
}

/// Events in the window, grouped by author, preserving time order.
fn author_index<'a>(
    events: &'a [InteractionEvent],
    window: &CorpusWindow,
) -> HashMap<&'a str, Vec<&'a InteractionEvent>> {
    let mut index: HashMap<&str, Vec<&InteractionEvent>> = HashMap::new();
    for e in events.iter().filter(|e| window.contains(e.timestamp)) {
        index.entry(e.author.as_str()).or_default().push(e);
    }
    index
}

fn insert_min(map: &mut BTreeMap<String, i64>, key: &str, t: i64) {
    match map.get_mut(key) {
        Some(existing) => *existing = (*existing).min(t),
        None => {
            map.insert(key.to_string(), t);
        }
    }
}

fn exposures_for(
    user: &str,
    index: &HashMap<&str, Vec<&InteractionEvent>>,
    history: &mut UserHistory,
) {
    if let Some(own) = index.get(user) {
        for e in own {
            if let (true, Some(src)) = (e.kind.is_interaction(), e.target_author.as_deref()) {
                insert_min(&mut history.first_interaction, src, e.timestamp);
            }
        }
    }
    for (src, &t0) in &history.first_interaction {
        let Some(posts) = index.get(src.as_str()) else { continue };
        let from = posts.partition_point(|e| e.timestamp <= t0);
        for e in &posts[from..] {
            for url in &e.urls {
                insert_min(&mut history.exposures, url, e.timestamp);
            }
        }
    }
}

fn adoptions_for(
    user: &str,
    index: &HashMap<&str, Vec<&InteractionEvent>>,
    window: &CorpusWindow,
    history: &mut UserHistory,
) {
    let Some(own) = index.get(user) else { return };
    for e in own {
        for url in &e.urls {
            insert_min(&mut history.adoptions_all, url, e.timestamp);
            if e.timestamp > window.buffer_end {
                insert_min(&mut history.adoptions, url, e.timestamp);
            }
        }
    }
}

fn build_with<F>(targets: &BTreeSet<String>, fill: F) -> BTreeMap<String, UserHistory>
where
    F: Fn(&str, &mut UserHistory) + Sync,
{
    let users: Vec<&String> = targets.iter().collect();
    users
        .par_iter()
        .map(|u| {
            let mut h = UserHistory {
                user: (*u).clone(),
                ..UserHistory::default()
            };
            fill(u, &mut h);
            h
        })
        .collect::<Vec<_>>()
        .into_iter()
        .map(|h| (h.user.clone(), h))
        .collect()
}

/// Histories with `first_interaction` and `exposures` populated.
pub fn build_exposure_index(
    events: &[InteractionEvent],
    targets: &BTreeSet<String>,
    window: &CorpusWindow,
) -> Result<BTreeMap<String, UserHistory>> {
    check_sorted(events)?;
    let index = author_index(events, window);
    Ok(build_with(targets, |u, h| exposures_for(u, &index, h)))
}

/// Histories with `adoptions` and `adoptions_all` populated.
pub fn build_adoption_sets(
    events: &[InteractionEvent],
    targets: &BTreeSet<String>,
    window: &CorpusWindow,
) -> Result<BTreeMap<String, UserHistory>> {
    check_sorted(events)?;
    let index = author_index(events, window);
    Ok(build_with(targets, |u, h| adoptions_for(u, &index, window, h)))
}

/// Complete histories (exposures and adoptions).
pub fn build_histories(
    events: &[InteractionEvent],
    targets: &BTreeSet<String>,
    window: &CorpusWindow,
) -> Result<BTreeMap<String, UserHistory>> {
    check_sorted(events)?;
    let index = author_index(events, window);
    Ok(build_with(targets, |u, h| {
        exposures_for(u, &index, h);
        adoptions_for(u, &index, window, h);
    }))
}

/// IAR and SAR of one history. Empty denominators leave the metric undefined.
pub fn compute_scores(history: &UserHistory) -> SusceptibilityScore {
    // Ties between exposure and adoption count as spontaneous.
    let n_influence_driven = history
        .adoptions
        .iter()
        .filter(|(url, &adopted)| history.exposures.get(*url).is_some_and(|&exp| exp < adopted))
        .count();
    let n_exposed = history.exposures.len();
    let n_adopted = history.adoptions.len();
    SusceptibilityScore {
        user: history.user.clone(),
        iar: (n_exposed > 0).then(|| n_influence_driven as f64 / n_exposed as f64),
        sar: (n_adopted > 0).then(|| 1.0 - n_influence_driven as f64 / n_adopted as f64),
        n_exposed,
        n_adopted,
        n_influence_driven,
    }
}

pub fn compute_all_scores(histories: &BTreeMap<String, UserHistory>) -> Vec<SusceptibilityScore> {
    histories.values().map(compute_scores).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub score: SusceptibilityScore,
    pub meta: Option<UserMeta>,
}

/// Per-user scores joined with account metadata, sorted by user id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
}

pub const SCORE_TABLE_HEADER: [&str; 10] = [
    "user",
    "iar",
    "sar",
    "n_exposed",
    "n_adopted",
    "n_influence_driven",
    "followers_count",
    "friends_count",
    "statuses_count",
    "favorites_count",
];

/// Joins scores with metadata. Users without metadata keep empty columns.
pub fn score_table<I>(scores: I, meta: &BTreeMap<String, UserMeta>) -> ScoreTable
where
    I: IntoIterator<Item = SusceptibilityScore>,
{
    let mut rows: Vec<ScoreRow> = scores
        .into_iter()
        .map(|score| {
            let meta = meta.get(&score.user).cloned();
            ScoreRow { score, meta }
        })
        .collect();
    rows.sort_by(|a, b| a.score.user.cmp(&b.score.user));
    ScoreTable { rows }
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_u64(v: Option<u64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_opt<T: FromStr>(field: &str, name: &str, line: usize) -> Result<Option<T>> {
    if field.is_empty() {
        return Ok(None);
    }
    field.parse().map(Some).map_err(|_| Error::Malformed {
        line,
        msg: format!("bad {name} value {field:?}"),
    })
}

impl ScoreTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Users with a defined value of `metric`.
    pub fn metric(&self, metric: Metric) -> BTreeMap<String, f64> {
        self.rows
            .iter()
            .filter_map(|r| r.score.get(metric).map(|v| (r.score.user.clone(), v)))
            .collect()
    }

    pub fn get(&self, user: &str) -> Option<&ScoreRow> {
        self.rows
            .binary_search_by(|r| r.score.user.as_str().cmp(user))
            .ok()
            .map(|i| &self.rows[i])
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(SCORE_TABLE_HEADER)?;
        for row in &self.rows {
            let s = &row.score;
            let m = row.meta.as_ref();
            w.write_record([
                s.user.clone(),
                opt_f64(s.iar),
                opt_f64(s.sar),
                s.n_exposed.to_string(),
                s.n_adopted.to_string(),
                s.n_influence_driven.to_string(),
                opt_u64(m.map(|m| m.followers_count)),
                opt_u64(m.map(|m| m.friends_count)),
                opt_u64(m.map(|m| m.statuses_count)),
                opt_u64(m.map(|m| m.favorites_count)),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.iter().ne(SCORE_TABLE_HEADER.iter().copied()) {
            return Err(Error::Format(format!("unexpected score table header {:?}", header)));
        }
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let f = |k: usize| rec.get(k).unwrap_or("");
            let required = |k: usize, name: &str| -> Result<usize> {
                parse_opt::<usize>(f(k), name, line)?.ok_or_else(|| Error::Malformed {
                    line,
                    msg: format!("missing {name}"),
                })
            };
            let score = SusceptibilityScore {
                user: f(0).to_string(),
                iar: parse_opt(f(1), "iar", line)?,
                sar: parse_opt(f(2), "sar", line)?,
                n_exposed: required(3, "n_exposed")?,
                n_adopted: required(4, "n_adopted")?,
                n_influence_driven: required(5, "n_influence_driven")?,
            };
            let counts: Vec<Option<u64>> = (6..10)
                .map(|k| parse_opt(f(k), SCORE_TABLE_HEADER[k], line))
                .collect::<Result<_>>()?;
            let meta = match counts.as_slice() {
                [Some(a), Some(b), Some(c), Some(d)] => Some(UserMeta {
                    user: score.user.clone(),
                    followers_count: *a,
                    friends_count: *b,
                    statuses_count: *c,
                    favorites_count: *d,
                }),
                _ => None,
            };
            rows.push(ScoreRow { score, meta });
        }
        rows.sort_by(|a, b| a.score.user.cmp(&b.score.user));
        Ok(ScoreTable { rows })
    }
}
