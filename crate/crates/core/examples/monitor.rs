//! Monitor an AOI: poll new scenes, build the timeline, raise and
//! acknowledge an alert, then replay the store from disk.
//!
//! Run with `cargo run --release --example monitor`.

mod common;

use riverwatch::monitor::{Monitor, MonitorConfig};

fn main() -> riverwatch::Result<()> {
    let root = tempfile::tempdir().expect("temp dir");
    // Landfill side grows 20 -> 21 -> 26 px: +10% then +53% area.
    let aoi = common::prepare(root.path(), &[20, 21, 26])?;
    let config = MonitorConfig::under(root.path());
    let monitor = Monitor::open(config.clone())?;
    monitor.register_aoi(aoi)?;

    let summary = monitor.poll_once()?;
    monitor.wait_for_dispatch();
    println!(
        "poll: {} ingested, {} failed",
        summary.ingested.len(),
        summary.failed.len()
    );
    for entry in monitor.timeline("kiskore")? {
        println!(
            "  {} {} {:>8.0} m2",
            entry.acquired_at.date_naive(),
            entry.scene_id,
            entry.waste_area_m2
        );
    }
    let again = monitor.poll_once()?;
    println!(
        "second poll: {} ingested, {} skipped",
        again.ingested.len(),
        again.skipped
    );

    for alert in monitor.list_alerts(Some(false)) {
        println!(
            "alert {} change {}",
            alert.alert_id,
            alert.relative_change.percent_label()
        );
        let mail =
            std::fs::read_to_string(config.outbox_dir.join(format!("{}.txt", alert.alert_id)))
                .unwrap();
        println!("--- outbox\n{mail}---");
        monitor.ack_alert(&alert.alert_id)?;
    }
    println!(
        "unacknowledged after ack: {}",
        monitor.list_alerts(Some(false)).len()
    );

    drop(monitor);
    let reopened = Monitor::open(config)?;
    println!(
        "replayed {} observations",
        reopened.timeline("kiskore")?.len()
    );
    Ok(())
}
