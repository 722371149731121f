//! Append-only JSON-lines persistence.
//!
//! Each entity kind has its own file. Every line carries a store-wide
//! sequence number; replay merges the files by sequence number and applies
//! the events in order, which rebuilds the exact in-memory state. A torn
//! final line (crash mid-append) is ignored.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::model::{Alert, Aoi, DeliveryRecord, FailedIngest, Observation};
use crate::error::{Error, Result};

pub const AOIS_FILE: &str = "aois.jsonl";
pub const OBSERVATIONS_FILE: &str = "observations.jsonl";
pub const ALERTS_FILE: &str = "alerts.jsonl";
pub const DELIVERIES_FILE: &str = "deliveries.jsonl";
pub const FAILURES_FILE: &str = "failures.jsonl";

const FILES: [&str; 5] = [
    AOIS_FILE,
    OBSERVATIONS_FILE,
    ALERTS_FILE,
    DELIVERIES_FILE,
    FAILURES_FILE,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Event {
    /// Register or update (last writer wins).
    AoiUpsert {
        aoi: Aoi,
    },
    AoiDelete {
        aoi_id: String,
    },
    Observation {
        observation: Observation,
    },
    AlertCreate {
        alert: Alert,
    },
    AlertAck {
        alert_id: String,
        at: DateTime<Utc>,
    },
    Delivery {
        delivery: DeliveryRecord,
    },
    IngestFailed {
        failure: FailedIngest,
    },
}

impl Event {
    fn file(&self) -> &'static str {
        match self {
            Event::AoiUpsert { .. } | Event::AoiDelete { .. } => AOIS_FILE,
            Event::Observation { .. } => OBSERVATIONS_FILE,
            Event::AlertCreate { .. } | Event::AlertAck { .. } => ALERTS_FILE,
            Event::Delivery { .. } => DELIVERIES_FILE,
            Event::IngestFailed { .. } => FAILURES_FILE,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Line {
    seq: u64,
    #[serde(flatten)]
    event: Event,
}

/// Everything the service knows, rebuilt from the log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct State {
    pub aois: BTreeMap<String, Aoi>,
    /// Per AOI, ordered by `(acquired_at, scene_id)`.
    pub observations: BTreeMap<String, Vec<Observation>>,
    /// Creation order.
    pub alerts: Vec<Alert>,
    pub deliveries: Vec<DeliveryRecord>,
    pub failures: Vec<FailedIngest>,
    pub last_seq: u64,
}

impl State {
    pub fn apply(&mut self, event: &Event) {
        match event {
            Event::AoiUpsert { aoi } => {
                self.aois.insert(aoi.aoi_id.clone(), aoi.clone());
            }
            Event::AoiDelete { aoi_id } => {
                self.aois.remove(aoi_id);
                self.observations.remove(aoi_id);
                self.alerts.retain(|a| &a.aoi_id != aoi_id);
            }
            Event::Observation { observation } => {
                let timeline = self
                    .observations
                    .entry(observation.aoi_id.clone())
                    .or_default();
                let key = |o: &Observation| (o.acquired_at, o.scene_id.clone());
                let pos = timeline.partition_point(|o| key(o) < key(observation));
                timeline.insert(pos, observation.clone());
            }
            Event::AlertCreate { alert } => self.alerts.push(alert.clone()),
            Event::AlertAck { alert_id, .. } => {
                if let Some(a) = self.alerts.iter_mut().find(|a| &a.alert_id == alert_id) {
                    a.acknowledged = true;
                }
            }
            Event::Delivery { delivery } => self.deliveries.push(delivery.clone()),
            Event::IngestFailed { failure } => self.failures.push(failure.clone()),
        }
    }

    pub fn timeline(&self, aoi_id: &str) -> &[Observation] {
        self.observations.get(aoi_id).map_or(&[], Vec::as_slice)
    }

    pub fn alert(&self, alert_id: &str) -> Option<&Alert> {
        self.alerts.iter().find(|a| a.alert_id == alert_id)
    }
}

/// Appends events to the per-entity files.
pub struct Store {
    dir: PathBuf,
    files: BTreeMap<&'static str, File>,
    next_seq: u64,
}

impl Store {
    /// Opens (creating if needed) the store in `dir` and replays it.
    pub fn open(dir: impl AsRef<Path>) -> Result<(Store, State)> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let state = replay(&dir)?;
        let mut files = BTreeMap::new();
        for name in FILES {
            let path = dir.join(name);
            drop_torn_tail(&path)?;
            let f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&path)
                .map_err(|e| Error::io(&path, e))?;
            files.insert(name, f);
        }
        let store = Store {
            dir,
            files,
            next_seq: state.last_seq + 1,
        };
        Ok((store, state))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Durably appends `event` and applies it to `state`.
    pub fn append(&mut self, state: &mut State, event: Event) -> Result<()> {
        let seq = self.next_seq;
        let name = event.file();
        let line = Line { seq, event };
        let mut text = serde_json::to_string(&line).expect("event serializes");
        text.push('\n');
        let path = self.dir.join(name);
        let f = self.files.get_mut(name).expect("file opened");
        f.write_all(text.as_bytes())
            .map_err(|e| Error::io(&path, e))?;
        f.sync_data().map_err(|e| Error::io(&path, e))?;
        self.next_seq += 1;
        state.apply(&line.event);
        state.last_seq = seq;
        Ok(())
    }
}

/// Cuts a partial final line so later appends start on a fresh line.
fn drop_torn_tail(path: &Path) -> Result<()> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(Error::io(path, e)),
    };
    if bytes.last().is_some_and(|&b| b != b'\n') {
        let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        let f = OpenOptions::new()
            .write(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        f.set_len(keep as u64).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Rebuilds the state from the files in `dir`.
pub fn replay(dir: &Path) -> Result<State> {
    let mut lines = Vec::new();
    for name in FILES {
        let path = dir.join(name);
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => continue,
            Err(e) => return Err(Error::io(&path, e)),
        };
        let raw: Vec<String> = BufReader::new(file)
            .lines()
            .collect::<std::io::Result<_>>()
            .map_err(|e| Error::io(&path, e))?;
        let ends_cleanly = fs::read(&path)
            .map_err(|e| Error::io(&path, e))?
            .last()
            .is_none_or(|&b| b == b'\n');
        let n = raw.len();
        for (i, text) in raw.into_iter().enumerate() {
            if text.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<Line>(&text) {
                Ok(line) => lines.push(line),
                Err(_) if i + 1 == n && !ends_cleanly => {
                    log::warn!("{}: ignoring torn final line", path.display());
                }
                Err(e) => return Err(Error::json(&path, e)),
            }
        }
    }
    lines.sort_by_key(|l| l.seq);
    let mut state = State::default();
    for line in lines {
        state.apply(&line.event);
        state.last_seq = line.seq;
    }
    Ok(state)
}
