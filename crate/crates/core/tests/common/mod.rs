#![allow(dead_code)]

use std::io::{Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use chrono::{DateTime, Duration, TimeZone, Utc};
use riverwatch::classes::{FOREST_MEADOW, WASTE};
use riverwatch::forest::{save_model, train_forest, Forest, Hyperparams};
use riverwatch::mask::BinaryMask;
use riverwatch::monitor::{serve_listener, Aoi, Monitor};
use riverwatch::pipeline::PipelineKind;
use riverwatch::raster::save_scene;
use riverwatch::synthetic::{
    land_cover_layout, render_scene, sample_training_set, ClassMap, SceneSpec,
};

pub fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2021, 6, 1, 9, 30, 0).unwrap()
}

/// Forest trained on noise-free signatures; classifies noise-free scenes exactly.
pub fn clean_forest() -> Forest {
    let map = land_cover_layout(120, 120, 4);
    let mut spec = SceneSpec::new("train", t0());
    spec.noise = 0.0;
    let scene = render_scene(&map, &spec).unwrap();
    let data = sample_training_set(&scene, &map, 50, 1).unwrap();
    train_forest(
        &data,
        &Hyperparams {
            n_trees: 10,
            ..Hyperparams::default()
        },
    )
    .unwrap()
}

pub fn write_model(dir: &Path) -> PathBuf {
    let path = dir.join("model.json");
    save_model(&clean_forest(), &path).unwrap();
    path
}

/// Noise-free 1 m scene over meadow whose first `waste_px` pixels are waste,
/// so the detected waste area is exactly `waste_px` m².
pub fn write_waste_scene(dir: &Path, scene_id: &str, day: i64, waste_px: usize) {
    let (w, h) = (64, 64);
    let mut map = ClassMap::filled(w, h, FOREST_MEADOW);
    for i in 0..waste_px {
        map.classes[i] = WASTE;
    }
    let mut spec = SceneSpec::new(scene_id, t0() + Duration::days(day));
    spec.noise = 0.0;
    spec.pixel_size_m = 1.0;
    save_scene(&render_scene(&map, &spec).unwrap(), dir).unwrap();
}

pub fn aoi(id: &str, model_path: &Path, ingest_dir: &Path, notify: Vec<String>) -> Aoi {
    Aoi {
        aoi_id: id.into(),
        name: format!("{id} site"),
        pipeline: PipelineKind::Hotspot,
        model_path: model_path.to_path_buf(),
        alert_threshold: 0.2,
        notify,
        ingest_dir: ingest_dir.to_path_buf(),
        kernel_size: None,
    }
}

/// The monitor API on an ephemeral port; stops when dropped.
pub struct TestServer {
    pub base: String,
    _rt: tokio::runtime::Runtime,
}

pub fn spawn_server(monitor: Monitor) -> TestServer {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .unwrap();
    let listener = rt
        .block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))
        .unwrap();
    let addr = listener.local_addr().unwrap();
    rt.spawn(serve_listener(monitor, listener));
    TestServer {
        base: format!("http://{addr}"),
        _rt: rt,
    }
}

pub struct Reply {
    pub status: u16,
    pub content_type: String,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_slice(&self.body).unwrap()
    }
}

pub fn http(method: &str, url: &str, body: Option<&str>) -> Reply {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .build()
        .into();
    let result = match (method, body) {
        ("GET", _) => agent.get(url).call(),
        ("DELETE", _) => agent.delete(url).call(),
        ("POST", None) => agent.post(url).send_empty(),
        ("POST", Some(b)) => agent
            .post(url)
            .header("content-type", "application/json")
            .send(b),
        ("PATCH", Some(b)) => agent
            .patch(url)
            .header("content-type", "application/json")
            .send(b),
        _ => panic!("unsupported {method}"),
    };
    let mut resp = result.unwrap();
    let content_type = resp
        .headers()
        .get("content-type")
        .and_then(|v| v.to_str().ok())
        .unwrap_or("")
        .to_string();
    Reply {
        status: resp.status().as_u16(),
        content_type,
        body: resp.body_mut().read_to_vec().unwrap(),
    }
}

/// A webhook endpoint that answers every request with `status` and counts them.
pub fn fake_webhook(status: u16) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/hook", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut s) = stream else { continue };
            let mut buf = Vec::new();
            let mut chunk = [0u8; 4096];
            // Read headers, then the announced body.
            loop {
                let n = s.read(&mut chunk).unwrap_or(0);
                if n == 0 {
                    break;
                }
                buf.extend_from_slice(&chunk[..n]);
                let text = String::from_utf8_lossy(&buf);
                if let Some(end) = text.find("\r\n\r\n") {
                    let len = text[..end]
                        .lines()
                        .find_map(|l| {
                            let (k, v) = l.split_once(':')?;
                            k.eq_ignore_ascii_case("content-length")
                                .then(|| v.trim().parse().ok())?
                        })
                        .unwrap_or(0usize);
                    if buf.len() >= end + 4 + len {
                        break;
                    }
                }
            }
            counter.fetch_add(1, Ordering::SeqCst);
            let reply =
                format!("HTTP/1.1 {status} X\r\ncontent-length: 0\r\nconnection: close\r\n\r\n");
            let _ = s.write_all(reply.as_bytes());
        }
    });
    (url, hits)
}

/// Window-scan erosion (`all`) or dilation; outside the image is background.
pub fn naive_morph(m: &BinaryMask, k: usize, all: bool) -> BinaryMask {
    let r = (k / 2) as isize;
    BinaryMask::from_fn(m.width(), m.height(), |y, x| {
        let mut hits = 0;
        for dy in -r..=r {
            for dx in -r..=r {
                let (yy, xx) = (y as isize + dy, x as isize + dx);
                let inside =
                    yy >= 0 && xx >= 0 && (yy as usize) < m.height() && (xx as usize) < m.width();
                if inside && m.get(yy as usize, xx as usize) {
                    hits += 1;
                }
            }
        }
        if all {
            hits == k * k
        } else {
            hits > 0
        }
    })
}
