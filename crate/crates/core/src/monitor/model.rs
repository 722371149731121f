use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::pipeline::PipelineKind;

pub const DEFAULT_ALERT_THRESHOLD: f64 = 0.2;

fn default_threshold() -> f64 {
    DEFAULT_ALERT_THRESHOLD
}

/// A territory under continuous observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aoi {
    pub aoi_id: String,
    pub name: String,
    pub pipeline: PipelineKind,
    pub model_path: PathBuf,
    /// Relative change in waste area that raises an alert.
    #[serde(default = "default_threshold")]
    pub alert_threshold: f64,
    /// `mailto:<addr>` or `webhook:<url>` entries.
    #[serde(default)]
    pub notify: Vec<String>,
    pub ingest_dir: PathBuf,
    /// Morphology kernel for the blockage pipeline; 5 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_size: Option<usize>,
}

impl Aoi {
    pub fn validate(&self) -> Result<()> {
        if self.aoi_id.is_empty()
            || !self
                .aoi_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
            || self.aoi_id.starts_with('.')
        {
            return Err(Error::InvalidAoi(format!(
                "aoi_id `{}` must be non-empty [A-Za-z0-9._-] not starting with '.'",
                self.aoi_id
            )));
        }
        if !(self.alert_threshold > 0.0 && self.alert_threshold.is_finite()) {
            return Err(Error::InvalidAoi(format!(
                "alert_threshold must be positive, got {}",
                self.alert_threshold
            )));
        }
        for t in &self.notify {
            t.parse::<Target>()?;
        }
        if let Some(k) = self.kernel_size {
            crate::morphology::Kernel::new(k).map_err(|e| Error::InvalidAoi(e.to_string()))?;
        }
        Ok(())
    }

    pub fn targets(&self) -> Vec<Target> {
        self.notify.iter().filter_map(|t| t.parse().ok()).collect()
    }
}

/// Partial update; absent fields keep their value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AoiPatch {
    pub name: Option<String>,
    pub pipeline: Option<PipelineKind>,
    pub model_path: Option<PathBuf>,
    pub alert_threshold: Option<f64>,
    pub notify: Option<Vec<String>>,
    pub ingest_dir: Option<PathBuf>,
    pub kernel_size: Option<usize>,
}

impl AoiPatch {
    pub fn apply(&self, aoi: &Aoi) -> Aoi {
        let mut out = aoi.clone();
        if let Some(v) = &self.name {
            out.name = v.clone();
        }
        if let Some(v) = self.pipeline {
            out.pipeline = v;
        }
        if let Some(v) = &self.model_path {
            out.model_path = v.clone();
        }
        if let Some(v) = self.alert_threshold {
            out.alert_threshold = v;
        }
        if let Some(v) = &self.notify {
            out.notify = v.clone();
        }
        if let Some(v) = &self.ingest_dir {
            out.ingest_dir = v.clone();
        }
        if let Some(v) = self.kernel_size {
            out.kernel_size = Some(v);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Mailto(String),
    Webhook(String),
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(addr) = s.strip_prefix("mailto:") {
            if addr.contains('@') && !addr.contains(char::is_whitespace) {
                return Ok(Target::Mailto(addr.to_string()));
            }
        } else if let Some(url) = s.strip_prefix("webhook:") {
            if url.starts_with("http://") || url.starts_with("https://") {
                return Ok(Target::Webhook(url.to_string()));
            }
        }
        Err(Error::InvalidAoi(format!(
            "notify target `{s}` must be mailto:<addr> or webhook:<http(s) url>"
        )))
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Mailto(a) => write!(f, "mailto:{a}"),
            Target::Webhook(u) => write!(f, "webhook:{u}"),
        }
    }
}

/// One measured scene of an AOI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub aoi_id: String,
    pub scene_id: String,
    pub acquired_at: DateTime<Utc>,
    pub waste_area_m2: f64,
    pub waste_fraction: f64,
    pub report_path: PathBuf,
}

/// Relative change of waste area. Growth from zero is `+∞`, written as `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeChange(pub f64);

impl Serialize for RelativeChange {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else if self.0 == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for RelativeChange {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(RelativeChange(v)),
            Raw::Text(t) if t == "inf" => Ok(RelativeChange(f64::INFINITY)),
            Raw::Text(t) if t == "-inf" => Ok(RelativeChange(f64::NEG_INFINITY)),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "bad relative change `{t}`"
            ))),
        }
    }
}

impl RelativeChange {
    /// Signed percentage with one decimal, e.g. `+37.3%`.
    pub fn percent_label(&self) -> String {
        if self.0.is_infinite() {
            return if self.0 > 0.0 {
                "+inf%".into()
            } else {
                "-inf%".into()
            };
        }
        format!("{:+.1}%", self.0 * 100.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub alert_id: String,
    pub aoi_id: String,
    pub triggered_at: DateTime<Utc>,
    pub previous_scene_id: String,
    pub current_scene_id: String,
    pub previous_area_m2: f64,
    pub current_area_m2: f64,
    pub relative_change: RelativeChange,
    pub threshold: f64,
    pub acknowledged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeliveryStatus {
    Delivered,
    Dead,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryRecord {
    pub alert_id: String,
    pub target: String,
    pub status: DeliveryStatus,
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outbox_file: Option<PathBuf>,
    pub finished_at: DateTime<Utc>,
}

/// A scene that could not be turned into an observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedIngest {
    pub aoi_id: String,
    pub scene_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_id: Option<String>,
    pub error: String,
    pub at: DateTime<Utc>,
}
