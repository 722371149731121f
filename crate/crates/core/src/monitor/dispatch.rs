//! Alert delivery: outbox mail files and webhook POSTs.

use std::fs;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;

use chrono::Utc;

use super::model::{Alert, DeliveryRecord, DeliveryStatus, Target};
use crate::fsutil::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts per webhook, including the first.
    pub max_attempts: u32,
    /// Delay before the second attempt; doubles after each failure.
    pub base_delay: Duration,
    pub timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(500),
            timeout: Duration::from_secs(10),
        }
    }
}

pub fn outbox_path(outbox_dir: &Path, alert_id: &str) -> PathBuf {
    outbox_dir.join(format!("{alert_id}.txt"))
}

/// Plain-text mail for `alert` addressed to `recipients`.
pub fn format_mail(alert: &Alert, aoi_name: &str, recipients: &[&str]) -> String {
    let rc = &alert.relative_change;
    format!(
        "To: {to}\n\
         Subject: [riverwatch] {aoi_name} waste change {pct}\n\
         \n\
         AOI: {aoi_id} ({aoi_name})\n\
         Alert: {alert_id}\n\
         Triggered at: {at}\n\
         Previous scene: {prev_id}, waste area {prev:.1} m2\n\
         Current scene: {cur_id}, waste area {cur:.1} m2\n\
         Relative change: {pct} (threshold {thr})\n",
        to = recipients.join(", "),
        pct = rc.percent_label(),
        aoi_id = alert.aoi_id,
        alert_id = alert.alert_id,
        at = alert.triggered_at.to_rfc3339(),
        prev_id = alert.previous_scene_id,
        prev = alert.previous_area_m2,
        cur_id = alert.current_scene_id,
        cur = alert.current_area_m2,
        thr = alert.threshold,
    )
}

/// Delivers `alert` to every target. All mail recipients share one outbox
/// file; each webhook is retried with exponential backoff and marked dead
/// once the attempts run out. Returns one record per target.
pub fn dispatch_alert(
    alert: &Alert,
    aoi_name: &str,
    targets: &[Target],
    outbox_dir: &Path,
    policy: &RetryPolicy,
) -> Vec<DeliveryRecord> {
    let mut records = Vec::new();
    let recipients: Vec<&str> = targets
        .iter()
        .filter_map(|t| match t {
            Target::Mailto(a) => Some(a.as_str()),
            Target::Webhook(_) => None,
        })
        .collect();
    if !recipients.is_empty() {
        let path = outbox_path(outbox_dir, &alert.alert_id);
        let text = format_mail(alert, aoi_name, &recipients);
        let result = fs::create_dir_all(outbox_dir)
            .map_err(|e| e.to_string())
            .and_then(|_| write_atomic(&path, text.as_bytes()).map_err(|e| e.to_string()));
        for addr in &recipients {
            records.push(DeliveryRecord {
                alert_id: alert.alert_id.clone(),
                target: format!("mailto:{addr}"),
                status: if result.is_ok() {
                    DeliveryStatus::Delivered
                } else {
                    DeliveryStatus::Dead
                },
                attempts: 1,
                last_error: result.as_ref().err().cloned(),
                outbox_file: result.is_ok().then(|| path.clone()),
                finished_at: Utc::now(),
            });
        }
    }
    for t in targets {
        if let Target::Webhook(url) = t {
            records.push(post_with_retry(alert, url, policy));
        }
    }
    records
}

fn post_with_retry(alert: &Alert, url: &str, policy: &RetryPolicy) -> DeliveryRecord {
    let body = serde_json::to_string(alert).expect("alert serializes");
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(policy.timeout))
        .build()
        .into();
    let mut delay = policy.base_delay;
    let mut attempts = 0;
    let mut last_error = None;
    while attempts < policy.max_attempts.max(1) {
        if attempts > 0 {
            thread::sleep(delay);
            delay *= 2;
        }
        attempts += 1;
        match agent
            .post(url)
            .header("content-type", "application/json")
            .send(body.as_str())
        {
            Ok(_) => {
                last_error = None;
                break;
            }
            Err(e) => {
                log::warn!("webhook {url} attempt {attempts} failed: {e}");
                last_error = Some(e.to_string());
            }
        }
    }
    DeliveryRecord {
        alert_id: alert.alert_id.clone(),
        target: format!("webhook:{url}"),
        status: if last_error.is_none() {
            DeliveryStatus::Delivered
        } else {
            DeliveryStatus::Dead
        },
        attempts,
        last_error,
        outbox_file: None,
        finished_at: Utc::now(),
    }
}
