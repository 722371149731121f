//! The monitor: AOI registry, ingestion, change alerts and delivery.
//!
//! All writes go through one mutex-guarded writer. After each committed
//! write the state is republished as an immutable snapshot, so readers
//! never wait on ingestion. Alert delivery runs on its own thread once the
//! alert is on disk.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};
use std::thread::JoinHandle;
use std::time::SystemTime;

use chrono::{DateTime, Utc};
use serde::Serialize;

use super::change::evaluate_change;
use super::dispatch::{dispatch_alert, RetryPolicy};
use super::model::{Alert, Aoi, AoiPatch, FailedIngest, Observation};
use super::provider::{IngestDirProvider, SceneCandidate, SceneProvider};
use super::store::{Event, State, Store};
use crate::error::{Error, Result};
use crate::forest::load_model;
use crate::morphology::Kernel;
use crate::pipeline::{self, DetectionReport, HEATMAP_FILE, OVERLAY_FILE, REPORT_FILE};
use crate::raster::{load_metadata, load_scene, METADATA_FILE, PAYLOAD_FILE};

#[derive(Debug, Clone)]
pub struct MonitorConfig {
    pub store_dir: PathBuf,
    pub outbox_dir: PathBuf,
    /// Pipeline outputs, one directory per `<aoi_id>/<scene_id>`.
    pub artifacts_dir: PathBuf,
    pub retry: RetryPolicy,
}

impl MonitorConfig {
    /// `store/`, `outbox/` and `artifacts/` under `root`.
    pub fn under(root: impl AsRef<Path>) -> Self {
        let root = root.as_ref();
        MonitorConfig {
            store_dir: root.join("store"),
            outbox_dir: root.join("outbox"),
            artifacts_dir: root.join("artifacts"),
            retry: RetryPolicy::default(),
        }
    }
}

/// One row of an AOI's waste-area time series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimelineEntry {
    pub scene_id: String,
    pub acquired_at: DateTime<Utc>,
    pub waste_area_m2: f64,
    pub waste_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Latest {
    pub observation: Observation,
    pub report: DetectionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestOutcome {
    pub observation: Observation,
    pub alert: Option<Alert>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestedScene {
    pub aoi_id: String,
    pub scene_id: String,
    pub waste_area_m2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alert_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailedScene {
    pub aoi_id: String,
    pub scene_dir: PathBuf,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PollSummary {
    pub ingested: Vec<IngestedScene>,
    pub failed: Vec<FailedScene>,
    /// Scenes already observed, or failed before and unchanged since.
    pub skipped: usize,
}

struct Writer {
    store: Store,
    state: State,
}

struct Inner {
    config: MonitorConfig,
    provider: Box<dyn SceneProvider>,
    writer: Mutex<Writer>,
    snapshot: RwLock<Arc<State>>,
    dispatches: Mutex<Vec<JoinHandle<()>>>,
}

#[derive(Clone)]
pub struct Monitor {
    inner: Arc<Inner>,
}

impl Monitor {
    /// Opens the store under `config.store_dir`, replaying its history.
    pub fn open(config: MonitorConfig) -> Result<Monitor> {
        Self::with_provider(config, Box::new(IngestDirProvider))
    }

    pub fn with_provider(
        config: MonitorConfig,
        provider: Box<dyn SceneProvider>,
    ) -> Result<Monitor> {
        let (store, state) = Store::open(&config.store_dir)?;
        let snapshot = RwLock::new(Arc::new(state.clone()));
        Ok(Monitor {
            inner: Arc::new(Inner {
                config,
                provider,
                writer: Mutex::new(Writer { store, state }),
                snapshot,
                dispatches: Mutex::new(Vec::new()),
            }),
        })
    }

    pub fn config(&self) -> &MonitorConfig {
        &self.inner.config
    }

    /// The state as of the last committed write.
    pub fn snapshot(&self) -> Arc<State> {
        self.inner.snapshot.read().expect("snapshot lock").clone()
    }

    fn writer(&self) -> MutexGuard<'_, Writer> {
        // A panic mid-write leaves the log itself consistent, so keep going.
        self.inner.writer.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn commit(&self, w: &mut Writer, event: Event) -> Result<()> {
        let Writer { store, state } = w;
        store.append(state, event)?;
        *self.inner.snapshot.write().expect("snapshot lock") = Arc::new(state.clone());
        Ok(())
    }

    pub fn register_aoi(&self, aoi: Aoi) -> Result<Aoi> {
        aoi.validate()?;
        let mut w = self.writer();
        if w.state.aois.contains_key(&aoi.aoi_id) {
            return Err(Error::DuplicateAoi(aoi.aoi_id));
        }
        self.commit(&mut w, Event::AoiUpsert { aoi: aoi.clone() })?;
        Ok(aoi)
    }

    pub fn list_aois(&self) -> Vec<Aoi> {
        self.snapshot().aois.values().cloned().collect()
    }

    pub fn get_aoi(&self, aoi_id: &str) -> Result<Aoi> {
        self.snapshot()
            .aois
            .get(aoi_id)
            .cloned()
            .ok_or_else(|| Error::UnknownAoi(aoi_id.into()))
    }

    pub fn update_aoi(&self, aoi_id: &str, patch: &AoiPatch) -> Result<Aoi> {
        let mut w = self.writer();
        let current = w
            .state
            .aois
            .get(aoi_id)
            .ok_or_else(|| Error::UnknownAoi(aoi_id.into()))?;
        let updated = patch.apply(current);
        updated.validate()?;
        self.commit(
            &mut w,
            Event::AoiUpsert {
                aoi: updated.clone(),
            },
        )?;
        Ok(updated)
    }

    /// Removes the AOI with its observations and alerts. Artifacts on disk stay.
    pub fn delete_aoi(&self, aoi_id: &str) -> Result<()> {
        let mut w = self.writer();
        if !w.state.aois.contains_key(aoi_id) {
            return Err(Error::UnknownAoi(aoi_id.into()));
        }
        self.commit(
            &mut w,
            Event::AoiDelete {
                aoi_id: aoi_id.into(),
            },
        )
    }

    pub fn timeline(&self, aoi_id: &str) -> Result<Vec<TimelineEntry>> {
        let snap = self.snapshot();
        if !snap.aois.contains_key(aoi_id) {
            return Err(Error::UnknownAoi(aoi_id.into()));
        }
        Ok(snap
            .timeline(aoi_id)
            .iter()
            .map(|o| TimelineEntry {
                scene_id: o.scene_id.clone(),
                acquired_at: o.acquired_at,
                waste_area_m2: o.waste_area_m2,
                waste_fraction: o.waste_fraction,
            })
            .collect())
    }

    fn latest_observation(&self, aoi_id: &str) -> Result<Observation> {
        let snap = self.snapshot();
        if !snap.aois.contains_key(aoi_id) {
            return Err(Error::UnknownAoi(aoi_id.into()));
        }
        snap.timeline(aoi_id)
            .last()
            .cloned()
            .ok_or_else(|| Error::NoObservations(aoi_id.into()))
    }

    pub fn latest(&self, aoi_id: &str) -> Result<Latest> {
        let observation = self.latest_observation(aoi_id)?;
        let text = fs::read_to_string(&observation.report_path)
            .map_err(|e| Error::io(&observation.report_path, e))?;
        let report =
            serde_json::from_str(&text).map_err(|e| Error::json(&observation.report_path, e))?;
        Ok(Latest {
            observation,
            report,
        })
    }

    fn latest_artifact(&self, aoi_id: &str, name: &str) -> Result<Vec<u8>> {
        let obs = self.latest_observation(aoi_id)?;
        let path = obs.report_path.with_file_name(name);
        fs::read(&path).map_err(|e| Error::io(&path, e))
    }

    pub fn latest_overlay_png(&self, aoi_id: &str) -> Result<Vec<u8>> {
        self.latest_artifact(aoi_id, OVERLAY_FILE)
    }

    pub fn latest_heatmap_png(&self, aoi_id: &str) -> Result<Vec<u8>> {
        self.latest_artifact(aoi_id, HEATMAP_FILE)
    }

    /// Alerts in creation order, optionally filtered by acknowledgement.
    pub fn list_alerts(&self, acknowledged: Option<bool>) -> Vec<Alert> {
        self.snapshot()
            .alerts
            .iter()
            .filter(|a| acknowledged.is_none_or(|ack| a.acknowledged == ack))
            .cloned()
            .collect()
    }

    /// Marks the alert acknowledged; acknowledging twice is a no-op.
    pub fn ack_alert(&self, alert_id: &str) -> Result<Alert> {
        let mut w = self.writer();
        let alert = w
            .state
            .alert(alert_id)
            .cloned()
            .ok_or_else(|| Error::UnknownAlert(alert_id.into()))?;
        if alert.acknowledged {
            return Ok(alert);
        }
        self.commit(
            &mut w,
            Event::AlertAck {
                alert_id: alert_id.into(),
                at: Utc::now(),
            },
        )?;
        Ok(w.state.alert(alert_id).cloned().expect("alert exists"))
    }

    /// Runs the AOI's pipeline on `scene_dir`, stores the observation and
    /// raises an alert if the change policy fires. Failures other than an
    /// unknown AOI are recorded as failed ingests.
    pub fn ingest_scene(&self, aoi_id: &str, scene_dir: &Path) -> Result<IngestOutcome> {
        let mut w = self.writer();
        let aoi = w
            .state
            .aois
            .get(aoi_id)
            .cloned()
            .ok_or_else(|| Error::UnknownAoi(aoi_id.into()))?;
        match self.ingest_locked(&mut w, &aoi, scene_dir) {
            Ok(outcome) => {
                drop(w);
                if let Some(alert) = &outcome.alert {
                    self.spawn_dispatch(alert.clone(), &aoi);
                }
                Ok(outcome)
            }
            Err(err) => {
                log::warn!(
                    "ingest of {} into {aoi_id} failed: {err}",
                    scene_dir.display()
                );
                let failure = FailedIngest {
                    aoi_id: aoi_id.into(),
                    scene_dir: scene_dir.to_path_buf(),
                    scene_id: load_metadata(scene_dir).ok().map(|m| m.scene_id),
                    error: err.to_string(),
                    at: Utc::now(),
                };
                self.commit(&mut w, Event::IngestFailed { failure })?;
                Err(err)
            }
        }
    }

    fn ingest_locked(&self, w: &mut Writer, aoi: &Aoi, scene_dir: &Path) -> Result<IngestOutcome> {
        let meta = load_metadata(scene_dir)?;
        let timeline = w.state.timeline(&aoi.aoi_id);
        if timeline.iter().any(|o| o.scene_id == meta.scene_id) {
            return Err(Error::DuplicateScene {
                aoi_id: aoi.aoi_id.clone(),
                scene_id: meta.scene_id,
            });
        }
        if let Some(last) = timeline.last() {
            if meta.acquired_at < last.acquired_at {
                return Err(Error::StaleScene {
                    aoi_id: aoi.aoi_id.clone(),
                    scene_id: meta.scene_id,
                    acquired_at: meta.acquired_at.to_rfc3339(),
                });
            }
        }

        let forest = load_model(&aoi.model_path)?;
        let scene = load_scene(scene_dir)?;
        let kernel = match aoi.kernel_size {
            Some(k) => Kernel::new(k)?,
            None => Kernel::default(),
        };
        let (classification, report) = pipeline::run(aoi.pipeline, &scene, &forest, kernel)?;
        let out_dir = self
            .inner
            .config
            .artifacts_dir
            .join(&aoi.aoi_id)
            .join(path_safe(&meta.scene_id));
        fs::create_dir_all(&self.inner.config.artifacts_dir)
            .map_err(|e| Error::io(&self.inner.config.artifacts_dir, e))?;
        pipeline::write_outputs(&out_dir, scene.metadata(), &classification, &report)?;

        let observation = Observation {
            aoi_id: aoi.aoi_id.clone(),
            scene_id: meta.scene_id.clone(),
            acquired_at: meta.acquired_at,
            waste_area_m2: report.waste_area_m2,
            waste_fraction: report.waste_fraction,
            report_path: out_dir.join(REPORT_FILE),
        };
        self.commit(
            w,
            Event::Observation {
                observation: observation.clone(),
            },
        )?;

        let alert =
            evaluate_change(w.state.timeline(&aoi.aoi_id), aoi.alert_threshold).map(|e| Alert {
                alert_id: format!("{}.{}", aoi.aoi_id, e.current.scene_id),
                aoi_id: aoi.aoi_id.clone(),
                triggered_at: Utc::now(),
                previous_scene_id: e.previous.scene_id.clone(),
                current_scene_id: e.current.scene_id.clone(),
                previous_area_m2: e.previous.waste_area_m2,
                current_area_m2: e.current.waste_area_m2,
                relative_change: e.relative_change,
                threshold: aoi.alert_threshold,
                acknowledged: false,
            });
        if let Some(a) = &alert {
            log::info!(
                "alert {}: waste change {}",
                a.alert_id,
                a.relative_change.percent_label()
            );
            self.commit(w, Event::AlertCreate { alert: a.clone() })?;
        }
        Ok(IngestOutcome { observation, alert })
    }

    fn spawn_dispatch(&self, alert: Alert, aoi: &Aoi) {
        let targets = aoi.targets();
        if targets.is_empty() {
            return;
        }
        let this = self.clone();
        let name = aoi.name.clone();
        let handle = std::thread::spawn(move || {
            let config = &this.inner.config;
            let records =
                dispatch_alert(&alert, &name, &targets, &config.outbox_dir, &config.retry);
            let mut w = this.writer();
            for delivery in records {
                if let Err(e) = this.commit(&mut w, Event::Delivery { delivery }) {
                    log::error!("recording delivery for {}: {e}", alert.alert_id);
                }
            }
        });
        let mut pending = self
            .inner
            .dispatches
            .lock()
            .unwrap_or_else(|p| p.into_inner());
        pending.retain(|h| !h.is_finished());
        pending.push(handle);
    }

    /// Blocks until every alert delivery started so far has finished.
    pub fn wait_for_dispatch(&self) {
        let handles: Vec<_> = std::mem::take(
            &mut *self
                .inner
                .dispatches
                .lock()
                .unwrap_or_else(|p| p.into_inner()),
        );
        for h in handles {
            let _ = h.join();
        }
    }

    /// Ingests every new scene of every AOI, oldest first within an AOI.
    /// A scene that failed before is retried only once its files change.
    pub fn poll_once(&self) -> Result<PollSummary> {
        let snap = self.snapshot();
        let mut summary = PollSummary::default();
        for aoi in snap.aois.values() {
            let (mut candidates, scan_errors) =
                self.inner.provider.list(&aoi.aoi_id, &aoi.ingest_dir)?;
            for bad in scan_errors {
                if failed_before(&snap, &aoi.aoi_id, &bad.dir) {
                    summary.skipped += 1;
                    continue;
                }
                let failure = FailedIngest {
                    aoi_id: aoi.aoi_id.clone(),
                    scene_dir: bad.dir.clone(),
                    scene_id: None,
                    error: bad.error.to_string(),
                    at: Utc::now(),
                };
                let mut w = self.writer();
                self.commit(&mut w, Event::IngestFailed { failure })?;
                summary.failed.push(FailedScene {
                    aoi_id: aoi.aoi_id.clone(),
                    scene_dir: bad.dir,
                    error: bad.error.to_string(),
                });
            }
            candidates
                .sort_by(|a, b| (a.acquired_at, &a.scene_id).cmp(&(b.acquired_at, &b.scene_id)));
            for SceneCandidate { dir, scene_id, .. } in candidates {
                let seen = snap
                    .timeline(&aoi.aoi_id)
                    .iter()
                    .any(|o| o.scene_id == scene_id);
                if seen || failed_before(&snap, &aoi.aoi_id, &dir) {
                    summary.skipped += 1;
                    continue;
                }
                match self.ingest_scene(&aoi.aoi_id, &dir) {
                    Ok(outcome) => summary.ingested.push(IngestedScene {
                        aoi_id: aoi.aoi_id.clone(),
                        scene_id,
                        waste_area_m2: outcome.observation.waste_area_m2,
                        alert_id: outcome.alert.map(|a| a.alert_id),
                    }),
                    // Deleted between the snapshot and now.
                    Err(Error::UnknownAoi(_)) => break,
                    Err(e) => summary.failed.push(FailedScene {
                        aoi_id: aoi.aoi_id.clone(),
                        scene_dir: dir,
                        error: e.to_string(),
                    }),
                }
            }
        }
        Ok(summary)
    }
}

/// True if `dir` has a recorded failure newer than its scene files.
fn failed_before(state: &State, aoi_id: &str, dir: &Path) -> bool {
    let Some(at) = state
        .failures
        .iter()
        .filter(|f| f.aoi_id == aoi_id && f.scene_dir == dir)
        .map(|f| f.at)
        .max()
    else {
        return false;
    };
    let modified = [METADATA_FILE, PAYLOAD_FILE]
        .iter()
        .filter_map(|f| fs::metadata(dir.join(f)).and_then(|m| m.modified()).ok())
        .max()
        .unwrap_or(SystemTime::UNIX_EPOCH);
    DateTime::<Utc>::from(modified) <= at
}

/// Scene ids become directory names; anything outside `[A-Za-z0-9._-]` is replaced.
fn path_safe(id: &str) -> String {
    let s: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() || s.starts_with('.') {
        format!("_{s}")
    } else {
        s
    }
}
