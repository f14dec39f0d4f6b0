//! Scenario mining from tag tracks.
//!
//! A query is an ordered list of tag sets. Every tag in a set must hold on the
//! same object at the same time; consecutive sets must follow each other on
//! that object, separated by at most `slack` seconds.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use super::StoreError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagTrack {
    pub object_id: String,
    pub tag: String,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiningOptions {
    /// Largest gap in seconds tolerated between consecutive query phases.
    pub slack: f64,
    /// Spans shorter than this are dropped.
    pub min_duration: f64,
}

impl Default for MiningOptions {
    fn default() -> Self {
        MiningOptions {
            slack: 0.5,
            min_duration: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinedSpan {
    pub object_id: String,
    pub start: f64,
    pub end: f64,
}

type Interval = (f64, f64);

fn merge(mut v: Vec<Interval>) -> Vec<Interval> {
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<Interval> = Vec::with_capacity(v.len());
    for (s, e) in v {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

fn intersect(a: &[Interval], b: &[Interval]) -> Vec<Interval> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        let s = a[i].0.max(b[j].0);
        let e = a[i].1.min(b[j].1);
        if s < e {
            out.push((s, e));
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// Finds the maximal time spans on which some object satisfies `query`.
pub fn mine_scenarios(
    tracks: &[TagTrack],
    query: &[BTreeSet<String>],
    opts: &MiningOptions,
) -> Vec<MinedSpan> {
    if query.is_empty() || query.iter().any(BTreeSet::is_empty) {
        return Vec::new();
    }
    // object -> tag -> merged intervals
    let mut by_object: BTreeMap<&str, BTreeMap<&str, Vec<Interval>>> = BTreeMap::new();
    for t in tracks.iter().filter(|t| t.start < t.end) {
        by_object
            .entry(&t.object_id)
            .or_default()
            .entry(&t.tag)
            .or_default()
            .push((t.start, t.end));
    }

    let mut out = Vec::new();
    for (object, tags) in by_object {
        let tags: BTreeMap<&str, Vec<Interval>> =
            tags.into_iter().map(|(k, v)| (k, merge(v))).collect();
        let phases: Vec<Vec<Interval>> = query
            .iter()
            .map(|set| {
                let mut acc: Option<Vec<Interval>> = None;
                for tag in set {
                    let iv = tags.get(tag.as_str()).cloned().unwrap_or_default();
                    acc = Some(match acc {
                        None => iv,
                        Some(prev) => intersect(&prev, &iv),
                    });
                }
                acc.unwrap_or_default()
            })
            .collect();

        let mut spans = Vec::new();
        for first in &phases[0] {
            let mut cur = *first;
            let mut end = first.1;
            let mut complete = true;
            for phase in &phases[1..] {
                match phase
                    .iter()
                    .find(|j| j.0 >= cur.0 && j.0 <= cur.1 + opts.slack)
                {
                    Some(next) => {
                        cur = *next;
                        end = end.max(next.1);
                    }
                    None => {
                        complete = false;
                        break;
                    }
                }
            }
            if complete {
                spans.push((first.0, end));
            }
        }
        for (start, end) in merge(spans) {
            if end - start >= opts.min_duration {
                out.push(MinedSpan {
                    object_id: object.to_string(),
                    start,
                    end,
                });
            }
        }
    }
    out.sort_by(|a, b| {
        a.start
            .total_cmp(&b.start)
            .then_with(|| a.object_id.cmp(&b.object_id))
    });
    out
}

/// Reads tag tracks from CSV with columns `object_id,tag,start,end`.
pub fn read_tracks_from<R: Read>(reader: R) -> Result<Vec<TagTrack>, StoreError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != ["object_id", "tag", "start", "end"] {
        return Err(StoreError::HeaderMismatch {
            expected: vec![
                "object_id".into(),
                "tag".into(),
                "start".into(),
                "end".into(),
            ],
            found: header,
        });
    }
    let mut out = Vec::new();
    for (k, row) in rdr.deserialize::<TagTrack>().enumerate() {
        let t = row.map_err(|e| StoreError::Malformed(format!("row {}: {e}", k + 1)))?;
        if !(t.start.is_finite() && t.end.is_finite()) || t.start >= t.end {
            return Err(StoreError::Malformed(format!(
                "row {}: track needs start < end",
                k + 1
            )));
        }
        out.push(t);
    }
    Ok(out)
}

pub fn read_tracks(path: impl AsRef<Path>) -> Result<Vec<TagTrack>, StoreError> {
    read_tracks_from(std::fs::File::open(path)?)
}
