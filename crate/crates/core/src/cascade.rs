//! Cascade records: ingestion from line-delimited JSON, canonical dumping, and
//! user filtering.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Interner, NodeId};

/// Ground-truth veracity of a cascade. Carried for evaluation only; inference
/// never reads it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    True,
    Fake,
    Unknown,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::True => "true",
            Label::Fake => "fake",
            Label::Unknown => "unknown",
        }
    }

    /// Conventional label of mixture component `index` (0 = true, 1 = fake).
    pub fn of_component(index: usize) -> Self {
        match index {
            0 => Label::True,
            1 => Label::Fake,
            _ => Label::Unknown,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "true" => Ok(Label::True),
            "fake" => Ok(Label::Fake),
            "unknown" => Ok(Label::Unknown),
            other => Err(Error::domain(format!("unknown label `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub user: NodeId,
    /// Hours since an arbitrary origin.
    pub time: f64,
}

/// A time-ordered sequence of engagements with one content item.
///
/// Events are sorted by time with ties kept in ingestion order, and each user
/// appears once (at their first engagement).
#[derive(Clone, Debug, PartialEq)]
pub struct Cascade {
    id: String,
    label: Option<Label>,
    events: Vec<Event>,
}

impl Cascade {
    pub fn new(
        id: impl Into<String>,
        label: Option<Label>,
        mut events: Vec<Event>,
    ) -> Result<Self> {
        let id = id.into();
        if events.is_empty() {
            return Err(Error::domain(format!("cascade `{id}` has no events")));
        }
        if let Some(e) = events.iter().find(|e| !e.time.is_finite() || e.time < 0.0) {
            return Err(Error::domain(format!(
                "cascade `{id}` has invalid timestamp {}",
                e.time
            )));
        }
        events.sort_by(|a, b| a.time.total_cmp(&b.time));
        let mut seen = HashSet::with_capacity(events.len());
        events.retain(|e| seen.insert(e.user));
        Ok(Self { id, label, events })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn label(&self) -> Option<Label> {
        self.label
    }

    pub fn with_label(mut self, label: Option<Label>) -> Self {
        self.label = label;
        self
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn users(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.events.iter().map(|e| e.user)
    }

    pub fn contains(&self, user: NodeId) -> bool {
        self.events.iter().any(|e| e.user == user)
    }

    /// Users sharing the earliest timestamp.
    pub fn seeds(&self) -> impl Iterator<Item = NodeId> + '_ {
        let t0 = self.events[0].time;
        self.events
            .iter()
            .take_while(move |e| e.time == t0)
            .map(|e| e.user)
    }

    /// Mean gap between consecutive engagements, `None` for a single event.
    pub fn mean_delay(&self) -> Option<f64> {
        let n = self.events.len();
        (n >= 2).then(|| (self.events[n - 1].time - self.events[0].time) / (n - 1) as f64)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: String,
    #[serde(default)]
    label: Option<String>,
    events: Vec<RawEvent>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    u: String,
    t: f64,
}

#[derive(Serialize)]
struct OutRecord<'a> {
    id: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<&'static str>,
    events: Vec<OutEvent<'a>>,
}

#[derive(Serialize)]
struct OutEvent<'a> {
    u: &'a str,
    t: f64,
}

/// Parses one JSON object per line: `{"id": .., "label": .., "events": [{"u": .., "t": ..}]}`.
///
/// Timestamps are multiplied by `time_scale` (e.g. `1.0 / 3600.0` for seconds)
/// after validation. Blank lines are skipped; errors carry the 1-based line.
pub fn parse_cascades(source: &str, names: &mut Interner, time_scale: f64) -> Result<Vec<Cascade>> {
    if !(time_scale.is_finite() && time_scale > 0.0) {
        return Err(Error::domain(format!(
            "time scale {time_scale} must be positive"
        )));
    }
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| Error::parse(line_no, e))?;
        let label = raw
            .label
            .as_deref()
            .map(Label::from_str)
            .transpose()
            .map_err(|e| Error::parse(line_no, e))?;
        if let Some(bad) = raw.events.iter().find(|e| e.t < 0.0) {
            return Err(Error::domain(format!(
                "line {line_no}: negative timestamp {} for user `{}`",
                bad.t, bad.u
            )));
        }
        let events = raw
            .events
            .iter()
            .map(|e| Event {
                user: names.intern(&e.u),
                time: e.t * time_scale,
            })
            .collect();
        let cascade = Cascade::new(raw.id, label, events).map_err(|e| match e {
            Error::Domain(msg) => Error::Domain(format!("line {line_no}: {msg}")),
            other => other,
        })?;
        out.push(cascade);
    }
    Ok(out)
}

/// Canonical line-delimited JSON. `parse_cascades` followed by `dump_cascades`
/// reproduces a canonical file byte for byte.
pub fn dump_cascades(cascades: &[Cascade], names: &Interner) -> String {
    let mut out = String::new();
    for c in cascades {
        let rec = OutRecord {
            id: &c.id,
            label: c.label.map(Label::as_str),
            events: c
                .events
                .iter()
                .map(|e| OutEvent {
                    u: names.name(e.user),
                    t: e.time,
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("cascade records serialize"));
        out.push('\n');
    }
    out
}

/// Drops users that appear in fewer than `k_min` cascades, then drops cascades
/// left empty. Returns the filtered cascades and the retained users.
pub fn filter_min_engagements(
    cascades: &[Cascade],
    k_min: usize,
) -> (Vec<Cascade>, BTreeSet<NodeId>) {
    let mut counts: HashMap<NodeId, usize> = HashMap::new();
    for c in cascades {
        for u in c.users() {
            *counts.entry(u).or_default() += 1;
        }
    }
    let retained: BTreeSet<NodeId> = counts
        .into_iter()
        .filter(|&(_, n)| n >= k_min)
        .map(|(u, _)| u)
        .collect();
    let filtered = cascades
        .iter()
        .filter_map(|c| {
            let events: Vec<Event> = c
                .events
                .iter()
                .copied()
                .filter(|e| retained.contains(&e.user))
                .collect();
            (!events.is_empty()).then(|| Cascade {
                id: c.id.clone(),
                label: c.label,
                events,
            })
        })
        .collect();
    (filtered, retained)
}
