//! Acceptance suite. Every criterion prints one PASS or FAIL line to
//! stdout (bypassing the test harness capture) and the test fails if any
//! criterion does. Run it alone with `cargo test --test acceptance`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::fs;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riverwatch::classes::{default_class_names, ClassRaster, WASTE};
use riverwatch::forest::{cross_validate, serialize, train_forest, Hyperparams};
use riverwatch::indices::{compute_index, IndexKind};
use riverwatch::mask::BinaryMask;
use riverwatch::monitor::{Monitor, MonitorConfig};
use riverwatch::morphology::{dilate, erode, open, Kernel};
use riverwatch::pipeline::{render_heatmap, run_blockage, write_outputs, RgbaImage};
use riverwatch::raster::{load_scene, save_scene, BandLabel, Raster, SceneMetadata};
use riverwatch::synthetic::{
    blockage_layout, gaussian_blobs, render_scene, sample_training_set, SceneSpec,
};
use riverwatch::with_threads;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

// `check!` negates its condition on purpose: a NaN must fail the check.
macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within(elapsed: Duration, limit_s: f64, what: &str) -> Result<(), String> {
    check!(
        elapsed.as_secs_f64() <= limit_s,
        "{what} took {:.2} s, limit {limit_s} s",
        elapsed.as_secs_f64()
    );
    Ok(())
}

fn index_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 10_000;
    // (0, 1]: 1 − [0, 1).
    let bands: Vec<Vec<f32>> = (0..3)
        .map(|_| (0..n).map(|_| 1.0 - rng.random::<f32>()).collect())
        .collect();
    let meta = SceneMetadata::new(
        "idx",
        "planetscope",
        t0(),
        3.0,
        vec![BandLabel::Green, BandLabel::Red, BandLabel::Nir],
        100,
        100,
    );
    let start = Instant::now();
    let mut per_scale = Vec::new();
    for c in [1e-3f32, 1.0, 1e3] {
        let planes = bands
            .iter()
            .map(|b| b.iter().map(|v| v * c).collect())
            .collect();
        let raster = Raster::from_planes(meta.clone(), planes).map_err(|e| e.to_string())?;
        let get = |k| {
            compute_index(&raster, k)
                .map(|p| p.values)
                .map_err(|e| e.to_string())
        };
        per_scale.push([
            get(IndexKind::Pi)?,
            get(IndexKind::Ndwi)?,
            get(IndexKind::Ndvi)?,
            get(IndexKind::Rndvi)?,
            get(IndexKind::Sr)?,
        ]);
    }
    let elapsed = start.elapsed();
    let [pi, ndwi, ndvi, rndvi, sr] = &per_scale[1];
    for i in 0..n {
        let (g, r, nir) = (bands[0][i] as f64, bands[1][i] as f64, bands[2][i] as f64);
        check!(
            (pi[i] as f64 - nir / (nir + r)).abs() < 1e-6,
            "PI oracle at {i}"
        );
        check!(
            (ndwi[i] as f64 - (g - nir) / (g + nir)).abs() < 1e-6,
            "NDWI oracle at {i}"
        );
        check!(
            (ndvi[i] as f64 - (2.0 * pi[i] as f64 - 1.0)).abs() < 1e-6,
            "NDVI != 2PI-1 at {i}"
        );
        let srv = sr[i] as f64;
        check!(
            (ndvi[i] as f64 - (srv - 1.0) / (srv + 1.0)).abs() < 1e-6,
            "NDVI != (SR-1)/(SR+1) at {i}"
        );
        check!(rndvi[i] == -ndvi[i], "RNDVI != -NDVI at {i}");
    }
    for scaled in [&per_scale[0], &per_scale[2]] {
        for (k, (a, b)) in per_scale[1].iter().zip(scaled).enumerate() {
            for i in 0..n {
                let tol = if k == 4 {
                    1e-6 * (a[i].abs() as f64).max(1.0)
                } else {
                    1e-6
                };
                check!(
                    ((a[i] - b[i]).abs() as f64) <= tol,
                    "index {k} not scale invariant at {i}: {} vs {}",
                    a[i],
                    b[i]
                );
            }
        }
    }
    within(elapsed, 1.0, "index computation")?;
    Ok(format!(
        "10000 px x 3 scales in {:.3} s",
        elapsed.as_secs_f64()
    ))
}

fn cross_validation() -> Outcome {
    let start = Instant::now();
    let data = gaussian_blobs(10_000, 5, 9, 3.0, 42).map_err(|e| e.to_string())?;
    let report =
        cross_validate(&data, &Hyperparams::with_seed(42), 5).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check!(
        report.accuracy >= 0.95,
        "accuracy {:.4} < 0.95",
        report.accuracy
    );
    let total: u64 = report.confusion.iter().flatten().sum();
    check!(total == 10_000, "confusion matrix sums to {total}");
    within(elapsed, 60.0, "5-fold CV")?;
    Ok(format!(
        "accuracy {:.4} in {:.2} s",
        report.accuracy,
        elapsed.as_secs_f64()
    ))
}

fn forest_determinism() -> Outcome {
    // Overlapping classes give deep, irregular trees.
    let data = gaussian_blobs(3_000, 5, 9, 1.0, 7).map_err(|e| e.to_string())?;
    let hp = Hyperparams::with_seed(7);
    let one = with_threads(1, || train_forest(&data, &hp)).map_err(|e| e.to_string())?;
    let eight = with_threads(8, || train_forest(&data, &hp)).map_err(|e| e.to_string())?;
    let (a, b) = (serialize(&one), serialize(&eight));
    check!(a == b, "serialized models differ");
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    for _ in 0..1000 {
        let x: Vec<f32> = (0..9).map(|_| rng.random_range(-3.0f32..6.0)).collect();
        check!(
            one.predict(&x).unwrap() == eight.predict(&x).unwrap(),
            "prediction differs at {x:?}"
        );
    }
    Ok(format!(
        "{} byte model identical, 1000 predictions identical",
        a.len()
    ))
}

fn morphology_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let start = Instant::now();
    for case in 0..200 {
        let (w, h) = (rng.random_range(1..=64), rng.random_range(1..=64));
        let p: f64 = rng.random_range(0.05..0.95);
        let m = BinaryMask::from_fn(w, h, |_, _| rng.random_bool(p));
        for k in [3, 5] {
            let kernel = Kernel::new(k).unwrap();
            let (e, d, o) = (erode(&m, kernel), dilate(&m, kernel), open(&m, kernel));
            check!(
                e == naive_morph(&m, k, true),
                "erode differs, case {case} k {k}"
            );
            check!(
                d == naive_morph(&m, k, false),
                "dilate differs, case {case} k {k}"
            );
            check!(
                o == naive_morph(&naive_morph(&m, k, true), k, false),
                "open differs, case {case} k {k}"
            );
            check!(
                e.is_subset_of(&m) && o.is_subset_of(&m),
                "anti-extensivity, case {case} k {k}"
            );
            check!(m.is_subset_of(&d), "extensivity, case {case} k {k}");
            check!(open(&o, kernel) == o, "idempotence, case {case} k {k}");
        }
    }
    let elapsed = start.elapsed();
    within(elapsed, 10.0, "morphology oracle")?;
    Ok(format!(
        "200 masks x 2 kernels in {:.3} s",
        elapsed.as_secs_f64()
    ))
}

fn blockage_pipeline() -> Outcome {
    let layout = blockage_layout(256, 256);
    let scene =
        render_scene(&layout.map, &SceneSpec::new("tisza", t0())).map_err(|e| e.to_string())?;
    let data = sample_training_set(&scene, &layout.map, 200, 5).map_err(|e| e.to_string())?;
    let forest = train_forest(&data, &Hyperparams::default()).map_err(|e| e.to_string())?;
    let r = run_blockage(&scene, &forest, Kernel::default()).map_err(|e| e.to_string())?;
    check!(
        r.report.waste_pixels == 64,
        "waste pixels {} != 64",
        r.report.waste_pixels
    );
    let (y0, x0, side) = layout.island;
    for y in y0..y0 + side {
        for x in x0..x0 + side {
            check!(
                r.classification.class_at(y, x) == WASTE,
                "island pixel ({y},{x}) lost"
            );
        }
    }
    for &(y, x) in &layout.specks {
        check!(
            r.classification.class_at(y, x) != WASTE,
            "speck ({y},{x}) kept"
        );
    }
    let k = Kernel::default();
    check!(
        open(&r.binary, k).is_subset_of(&r.cleaned),
        "open(binary) not within cleaned"
    );
    check!(
        r.cleaned.is_subset_of(&dilate(&r.binary, k)),
        "cleaned not within dilate(binary)"
    );
    Ok(format!("island 64/64 px, 0/{} specks", layout.specks.len()))
}

fn throughput() -> Outcome {
    let layout = blockage_layout(1194, 801);
    let dir = tempfile::tempdir().unwrap();
    let scene_dir = dir.path().join("scene");
    let scene =
        render_scene(&layout.map, &SceneSpec::new("large", t0())).map_err(|e| e.to_string())?;
    save_scene(&scene, &scene_dir).map_err(|e| e.to_string())?;
    let data = sample_training_set(&scene, &layout.map, 500, 9).map_err(|e| e.to_string())?;
    let forest = train_forest(&data, &Hyperparams::default()).map_err(|e| e.to_string())?;
    check!(
        forest.n_trees() == 100 && forest.feature_names().len() == 9,
        "expected a 100-tree 9-feature forest"
    );

    let full_run = |out: &str| -> Result<Duration, String> {
        let start = Instant::now();
        let scene = load_scene(&scene_dir).map_err(|e| e.to_string())?;
        let r = run_blockage(&scene, &forest, Kernel::default()).map_err(|e| e.to_string())?;
        write_outputs(
            &dir.path().join(out),
            scene.metadata(),
            &r.classification,
            &r.report,
        )
        .map_err(|e| e.to_string())?;
        Ok(start.elapsed())
    };
    let serial = with_threads(1, || full_run("serial"))?;
    let parallel = full_run("parallel")?;
    within(serial, 42.0, "single-threaded blockage")?;
    within(parallel, 15.0, "parallel blockage")?;
    Ok(format!(
        "1194x801: {:.2} s single-threaded, {:.2} s on {} threads",
        serial.as_secs_f64(),
        parallel.as_secs_f64(),
        rayon::current_num_threads()
    ))
}

fn change_policy() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let model = write_model(root.path());
    let (grow, flat) = (root.path().join("grow"), root.path().join("flat"));
    for (i, px) in [1000, 1020, 1400].into_iter().enumerate() {
        write_waste_scene(&grow.join(format!("g{i}")), &format!("g{i}"), i as i64, px);
    }
    for (i, px) in [1000, 1050].into_iter().enumerate() {
        write_waste_scene(&flat.join(format!("f{i}")), &format!("f{i}"), i as i64, px);
    }
    let m = Monitor::open(MonitorConfig::under(root.path())).map_err(|e| e.to_string())?;
    m.register_aoi(aoi("grow", &model, &grow, vec![]))
        .map_err(|e| e.to_string())?;
    m.register_aoi(aoi("flat", &model, &flat, vec![]))
        .map_err(|e| e.to_string())?;
    let first = m.poll_once().map_err(|e| e.to_string())?;
    check!(
        first.ingested.len() == 5,
        "ingested {} scenes, expected 5",
        first.ingested.len()
    );
    let areas: Vec<f64> = m
        .timeline("grow")
        .unwrap()
        .iter()
        .map(|t| t.waste_area_m2)
        .collect();
    check!(
        areas == [1000.0, 1020.0, 1400.0],
        "measured areas {areas:?}"
    );

    let alerts = m.list_alerts(None);
    let grow_alerts: Vec<_> = alerts.iter().filter(|a| a.aoi_id == "grow").collect();
    check!(
        grow_alerts.len() == 1,
        "{} alerts for [1000, 1020, 1400]",
        grow_alerts.len()
    );
    check!(
        grow_alerts[0].current_scene_id == "g2",
        "alert at {}",
        grow_alerts[0].current_scene_id
    );
    let rc = grow_alerts[0].relative_change.0;
    check!((rc - 380.0 / 1020.0).abs() <= 1e-9, "relative change {rc}");
    check!(
        alerts.iter().all(|a| a.aoi_id != "flat"),
        "alert raised for [1000, 1050]"
    );

    let again = m.poll_once().map_err(|e| e.to_string())?;
    check!(
        again.ingested.is_empty(),
        "rerun ingested {}",
        again.ingested.len()
    );
    Ok(format!(
        "one alert, relative change {rc:.10}; rerun ingested 0"
    ))
}

fn renderer_contract() -> Outcome {
    let ids = vec![WASTE, WASTE, WASTE, WASTE, 1, 2, 3, 4];
    let conf = vec![0.95, 0.85, 0.75, 0.65, 0.95, 0.95, 0.95, 0.95];
    let cr = ClassRaster::new(8, 1, ids, conf, default_class_names()).map_err(|e| e.to_string())?;
    let png = render_heatmap(&cr).to_png().map_err(|e| e.to_string())?;
    let img = RgbaImage::from_png(&png).map_err(|e| e.to_string())?;
    let expect: [[u8; 4]; 4] = [
        [255, 0, 4, 255],
        [246, 221, 0, 255],
        [6, 205, 16, 255],
        [0, 0, 0, 0],
    ];
    for (x, e) in expect.iter().enumerate() {
        check!(
            img.pixel(0, x) == *e,
            "waste pixel {x}: {:?} != {e:?}",
            img.pixel(0, x)
        );
    }
    for x in 4..8 {
        check!(
            img.pixel(0, x)[3] == 0,
            "non-waste pixel {x} not transparent"
        );
    }
    Ok("0.95/0.85/0.75/0.65 and non-waste pixels match the palette".into())
}

fn service_contract() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let model = write_model(root.path());
    let ingest = root.path().join("ingest");
    write_waste_scene(&ingest.join("b"), "s2", 2, 900);
    write_waste_scene(&ingest.join("a"), "s1", 1, 600);
    let m = Monitor::open(MonitorConfig::under(root.path().join("monitor")))
        .map_err(|e| e.to_string())?;
    let srv = spawn_server(m);
    let api = |p: &str| format!("{}{p}", srv.base);

    let body = serde_json::to_string(&aoi("tisza", &model, &ingest, vec![])).unwrap();
    let r = http("POST", &api("/api/aois"), Some(&body));
    check!(r.status == 201, "register returned {}", r.status);
    let r = http("POST", &api("/api/poll"), None);
    check!(
        r.status == 200 && r.json()["ingested"].as_array().map(Vec::len) == Some(2),
        "poll: {}",
        r.status
    );

    let tl = http("GET", &api("/api/aois/tisza/timeline"), None).json();
    let ids: Vec<&str> = tl
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["scene_id"].as_str().unwrap())
        .collect();
    check!(ids == ["s1", "s2"], "timeline order {ids:?}");
    let times: Vec<&str> = tl
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["acquired_at"].as_str().unwrap())
        .collect();
    check!(times[0] < times[1], "timeline timestamps not ascending");

    let served = http("GET", &api("/api/aois/tisza/latest/heatmap.png"), None);
    check!(
        served.status == 200 && served.content_type == "image/png",
        "heatmap: {}",
        served.status
    );
    let out = root.path().join("cli");
    let status = Command::new(env!("CARGO_BIN_EXE_riverwatch"))
        .args(["hotspot", "--scene"])
        .arg(ingest.join("b"))
        .arg("--model")
        .arg(&model)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap()
        .status;
    check!(status.success(), "CLI hotspot failed");
    check!(
        fs::read(out.join("heatmap.png")).unwrap() == served.body,
        "served heatmap differs from CLI render"
    );

    let open_alerts = http("GET", &api("/api/alerts?acknowledged=false"), None).json();
    let list = open_alerts.as_array().unwrap();
    check!(
        list.len() == 1 && list[0]["alert_id"] == "tisza.s2",
        "alerts: {open_alerts}"
    );
    let r = http("POST", &api("/api/alerts/tisza.s2/ack"), None);
    check!(
        r.status == 200 && r.json()["acknowledged"] == true,
        "ack returned {}",
        r.status
    );
    let after = http("GET", &api("/api/alerts?acknowledged=false"), None).json();
    check!(
        after == serde_json::json!([]),
        "still unacknowledged: {after}"
    );
    Ok("register, poll 2, ordered timeline, heatmap byte-equal, alert acked".into())
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        ("index identities", index_identities),
        ("cross-validation accuracy", cross_validation),
        ("forest determinism", forest_determinism),
        ("morphology oracle", morphology_oracle),
        ("blockage pipeline", blockage_pipeline),
        ("throughput", throughput),
        ("change policy", change_policy),
        ("renderer contract", renderer_contract),
        ("service contract", service_contract),
    ];
    let mut failed = Vec::new();
    let mut out = std::io::stdout().lock();
    for (name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let line = match &outcome {
            Ok(detail) => format!("PASS  {name}: {detail}\n"),
            Err(why) => {
                failed.push(name);
                format!("FAIL  {name}: {why}\n")
            }
        };
        out.write_all(line.as_bytes()).unwrap();
        out.flush().unwrap();
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
