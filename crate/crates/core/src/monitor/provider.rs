//! Where new scenes come from.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};

use crate::error::{Error, Result};
use crate::raster::{load_metadata, METADATA_FILE};

/// A scene directory waiting to be ingested.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneCandidate {
    pub dir: PathBuf,
    pub scene_id: String,
    pub acquired_at: DateTime<Utc>,
}

/// A scene directory whose metadata could not be read.
#[derive(Debug)]
pub struct ScanError {
    pub dir: PathBuf,
    pub error: Error,
}

pub trait SceneProvider: Send + Sync {
    /// Every scene currently available for `aoi_id`, in no particular order.
    fn list(
        &self,
        aoi_id: &str,
        ingest_dir: &Path,
    ) -> Result<(Vec<SceneCandidate>, Vec<ScanError>)>;
}

/// Scenes dropped into an AOI's ingest directory, one subdirectory each.
#[derive(Debug, Clone, Copy, Default)]
pub struct IngestDirProvider;

impl SceneProvider for IngestDirProvider {
    fn list(
        &self,
        _aoi_id: &str,
        ingest_dir: &Path,
    ) -> Result<(Vec<SceneCandidate>, Vec<ScanError>)> {
        let entries = match fs::read_dir(ingest_dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((vec![], vec![])),
            Err(e) => return Err(Error::io(ingest_dir, e)),
        };
        let mut found = Vec::new();
        let mut errors = Vec::new();
        for entry in entries {
            let dir = entry.map_err(|e| Error::io(ingest_dir, e))?.path();
            // Hidden entries are staging areas of writers still copying.
            let hidden = dir
                .file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with('.'));
            if hidden || !dir.join(METADATA_FILE).is_file() {
                continue;
            }
            match load_metadata(&dir) {
                Ok(meta) => found.push(SceneCandidate {
                    dir,
                    scene_id: meta.scene_id,
                    acquired_at: meta.acquired_at,
                }),
                Err(error) => errors.push(ScanError { dir, error }),
            }
        }
        Ok((found, errors))
    }
}
