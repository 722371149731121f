//! Waste detection in multispectral satellite scenes.
//!
//! Scenes are read from a portable on-disk format ([`raster`]), turned into
//! per-pixel spectral features ([`indices`]) and classified into five land
//! cover classes by a random forest ([`forest`]). Two pipelines build on the
//! classification: hot-spot detection for landfills and river-blockage
//! detection, which cleans the waste/water mask with binary morphology
//! ([`morphology`]). The [`monitor`] module keeps a waste-area time series
//! per area of interest and raises alerts when it moves.

pub mod classes;
pub mod cli;
pub mod error;
pub mod forest;
pub mod fsutil;
pub mod indices;
pub mod mask;
pub mod monitor;
pub mod morphology;
pub mod pipeline;
pub mod raster;
pub mod sensor;
pub mod synthetic;

pub use error::{Error, Result};

/// Runs `f` on a dedicated rayon pool of `threads` workers. Results never
/// depend on the thread count; only the wall time does.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
        .install(f)
}
