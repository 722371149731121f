//! Continuous monitoring of areas of interest.
//!
//! New scenes are picked up from each AOI's ingest directory, run through
//! its detection pipeline and appended to a waste-area time series. When
//! the area moves by at least the AOI's threshold relative to the previous
//! observation, an alert is stored and delivered to the configured targets.

pub mod change;
pub mod dispatch;
pub mod model;
pub mod provider;
pub mod server;
pub mod service;
pub mod store;

pub use change::{evaluate_change, relative_change, ChangeEvent};
pub use dispatch::{dispatch_alert, RetryPolicy};
pub use model::{
    Alert, Aoi, AoiPatch, DeliveryRecord, DeliveryStatus, FailedIngest, Observation,
    RelativeChange, Target,
};
pub use provider::{IngestDirProvider, SceneCandidate, SceneProvider};
pub use server::{router, serve, serve_listener};
pub use service::{IngestOutcome, Latest, Monitor, MonitorConfig, PollSummary, TimelineEntry};
pub use store::{replay, Event, State, Store};
