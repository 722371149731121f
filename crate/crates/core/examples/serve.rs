//! Serve the monitor API over a demo store.
//!
//! Run with `cargo run --release --example serve`, then for instance:
//!
//! ```text
//! curl -X POST localhost:8080/api/poll
//! curl localhost:8080/api/aois/kiskore/timeline
//! curl -o heatmap.png localhost:8080/api/aois/kiskore/latest/heatmap.png
//! curl 'localhost:8080/api/alerts?acknowledged=false'
//! ```

mod common;

use riverwatch::monitor::{serve, Monitor, MonitorConfig};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = tempfile::tempdir()?;
    let aoi = common::prepare(root.path(), &[20, 26])?;
    let monitor = Monitor::open(MonitorConfig::under(root.path()))?;
    monitor.register_aoi(aoi)?;
    println!("demo store in {}", root.path().display());
    serve(monitor, "127.0.0.1:8080".parse()?).await?;
    Ok(())
}
