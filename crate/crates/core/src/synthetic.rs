//! Synthetic scenes and datasets with known ground truth.
//!
//! Used by the examples, the test suites and for smoke-testing a deployment
//! without real imagery. Every generator is seeded.

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::classes::{default_class_names, BARE_GROUND, BUILDINGS, FOREST_MEADOW, WASTE, WATER};
use crate::error::Result;
use crate::forest::TrainingSet;
use crate::raster::{BandLabel, Raster, SceneMetadata};

/// Mean Blue, Green, Red, NIR reflectance of each class, by class id.
pub const SIGNATURES: [[f32; 4]; 5] = [
    [0.30, 0.32, 0.33, 0.45], // waste: bright, flat, elevated NIR
    [0.08, 0.10, 0.06, 0.03], // water: NIR absorbed
    [0.04, 0.08, 0.05, 0.40], // forest/meadow: red edge
    [0.20, 0.20, 0.22, 0.25], // buildings
    [0.12, 0.15, 0.20, 0.26], // bare ground
];

/// Per-pixel class layout with known geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMap {
    pub width: usize,
    pub height: usize,
    pub classes: Vec<u8>,
}

impl ClassMap {
    pub fn filled(width: usize, height: usize, class: u8) -> Self {
        ClassMap {
            width,
            height,
            classes: vec![class; width * height],
        }
    }

    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.classes[y * self.width + x]
    }

    pub fn set(&mut self, y: usize, x: usize, class: u8) {
        self.classes[y * self.width + x] = class;
    }

    pub fn fill_rect(&mut self, y0: usize, x0: usize, h: usize, w: usize, class: u8) {
        for y in y0..(y0 + h).min(self.height) {
            for x in x0..(x0 + w).min(self.width) {
                self.set(y, x, class);
            }
        }
    }

    pub fn count(&self, class: u8) -> usize {
        self.classes.iter().filter(|&&c| c == class).count()
    }
}

/// Acquisition settings for [`render_scene`].
#[derive(Debug, Clone)]
pub struct SceneSpec {
    pub scene_id: String,
    pub sensor: String,
    pub acquired_at: DateTime<Utc>,
    pub pixel_size_m: f64,
    /// Standard deviation of additive Gaussian noise per band.
    pub noise: f32,
    pub seed: u64,
}

impl SceneSpec {
    pub fn new(scene_id: impl Into<String>, acquired_at: DateTime<Utc>) -> Self {
        SceneSpec {
            scene_id: scene_id.into(),
            sensor: "planetscope".into(),
            acquired_at,
            pixel_size_m: 3.0,
            noise: 0.01,
            seed: 0,
        }
    }
}

/// Four-band (Blue, Green, Red, NIR) scene drawn from the class signatures.
pub fn render_scene(map: &ClassMap, spec: &SceneSpec) -> Result<Raster> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0f32, spec.noise.max(0.0)).expect("valid sigma");
    let n = map.width * map.height;
    let mut planes: Vec<Vec<f32>> = (0..4).map(|_| Vec::with_capacity(n)).collect();
    for &class in &map.classes {
        let sig = SIGNATURES[class as usize];
        for (b, plane) in planes.iter_mut().enumerate() {
            let v = if spec.noise > 0.0 {
                sig[b] + noise.sample(&mut rng)
            } else {
                sig[b]
            };
            plane.push(v.max(0.001));
        }
    }
    let meta = SceneMetadata::new(
        spec.scene_id.clone(),
        spec.sensor.clone(),
        spec.acquired_at,
        spec.pixel_size_m,
        vec![
            BandLabel::Blue,
            BandLabel::Green,
            BandLabel::Red,
            BandLabel::Nir,
        ],
        map.width,
        map.height,
    );
    Raster::from_planes(meta, planes)
}

/// Label raster for `map`: every `stride`-th pixel labeled (value class + 1),
/// the rest 0. `stride = 1` labels everything.
pub fn label_raster(map: &ClassMap, template: &SceneMetadata, stride: usize) -> Result<Raster> {
    let mut meta = template.clone();
    meta.band_labels = vec![BandLabel::Other("label".into())];
    let values = map
        .classes
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            if i % stride.max(1) == 0 {
                c as f32 + 1.0
            } else {
                0.0
            }
        })
        .collect();
    Raster::new(meta, values)
}

/// Geometry of the river-blockage test scene.
#[derive(Debug, Clone)]
pub struct BlockageLayout {
    pub map: ClassMap,
    /// Top-left corner and side of the waste island.
    pub island: (usize, usize, usize),
    pub river_rows: std::ops::Range<usize>,
    pub specks: Vec<(usize, usize)>,
}

/// Vegetated scene crossed by a horizontal river carrying an 8×8 waste
/// island, with three single waste pixels scattered on land.
pub fn blockage_layout(width: usize, height: usize) -> BlockageLayout {
    let mut map = ClassMap::filled(width, height, FOREST_MEADOW);
    let river_h = (height / 8).max(12);
    let river_top = height / 2 - river_h / 2;
    map.fill_rect(river_top, 0, river_h, width, WATER);

    // Buildings and a bare field on the banks, away from the specks.
    map.fill_rect(height / 8, width / 8, height / 10, width / 6, BUILDINGS);
    map.fill_rect(
        height * 3 / 4,
        width / 2,
        height / 10,
        width / 5,
        BARE_GROUND,
    );

    let side = 8;
    let island = (
        river_top + river_h / 2 - side / 2,
        width / 2 - side / 2,
        side,
    );
    map.fill_rect(island.0, island.1, side, side, WASTE);

    let specks = vec![
        (height / 6, width * 3 / 4),
        (height * 5 / 6, width / 6),
        (height * 7 / 8, width * 7 / 8),
    ];
    for &(y, x) in &specks {
        map.set(y, x, WASTE);
    }
    BlockageLayout {
        map,
        island,
        river_rows: river_top..river_top + river_h,
        specks,
    }
}

/// Meadow with a square landfill of `side` pixels near the center.
pub fn landfill_layout(width: usize, height: usize, side: usize) -> ClassMap {
    let mut map = ClassMap::filled(width, height, FOREST_MEADOW);
    map.fill_rect(height / 8, width / 10, height / 6, width / 5, BARE_GROUND);
    map.fill_rect(
        height / 2 - side / 2,
        width / 2 - side / 2,
        side,
        side,
        WASTE,
    );
    map
}

/// Patchwork of all five classes in rectangles of random size; no class
/// occupies fewer than a few percent of the pixels.
pub fn land_cover_layout(width: usize, height: usize, seed: u64) -> ClassMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut map = ClassMap::filled(width, height, FOREST_MEADOW);
    let river_h = (height / 10).max(4);
    map.fill_rect(height / 3, 0, river_h, width, WATER);
    let patches = (width * height / 4000).max(10);
    for _ in 0..patches {
        let class = [WASTE, BUILDINGS, BARE_GROUND, FOREST_MEADOW][rng.random_range(0..4)];
        let ph = rng.random_range(3..(height / 8).max(4));
        let pw = rng.random_range(3..(width / 8).max(4));
        let y = rng.random_range(0..height);
        let x = rng.random_range(0..width);
        map.fill_rect(y, x, ph, pw, class);
    }
    map
}

/// Training samples drawn from `scene` under `map`, `per_class` per class
/// (fewer if a class is rarer), using the cross-sensor features.
pub fn sample_training_set(
    scene: &Raster,
    map: &ClassMap,
    per_class: usize,
    seed: u64,
) -> Result<TrainingSet> {
    let stack =
        crate::indices::compute_feature_stack(scene, crate::indices::FeatureMode::CrossSensor)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut buf = vec![0f32; stack.feature_count()];
    for class in 0..SIGNATURES.len() as u8 {
        let mut members: Vec<usize> = (0..map.classes.len())
            .filter(|&i| map.classes[i] == class && stack.valid().bits()[i])
            .collect();
        members.shuffle(&mut rng);
        for &i in members.iter().take(per_class) {
            stack.pixel_into(i, &mut buf);
            features.extend_from_slice(&buf);
            labels.push(class);
        }
    }
    TrainingSet::new(
        features,
        labels,
        default_class_names(),
        stack.feature_names().to_vec(),
    )
}

/// Isotropic Gaussian blobs with unit variance. In every feature the class
/// means are a seeded permutation of `{0, s, 2s, ...}` (`s = separation`
/// standard deviations), so any two class means differ by at least `s` in
/// every coordinate.
pub fn gaussian_blobs(
    n_samples: usize,
    n_classes: usize,
    n_features: usize,
    separation: f32,
    seed: u64,
) -> Result<TrainingSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![vec![0f32; n_features]; n_classes];
    for j in 0..n_features {
        let mut order: Vec<usize> = (0..n_classes).collect();
        order.shuffle(&mut rng);
        for (center, &rank) in centers.iter_mut().zip(&order) {
            center[j] = separation * rank as f32;
        }
    }
    let unit = Normal::new(0.0f32, 1.0).expect("unit normal");
    let mut features = Vec::with_capacity(n_samples * n_features);
    let mut labels = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let c = i % n_classes;
        for &mu in &centers[c] {
            features.push(mu + unit.sample(&mut rng));
        }
        labels.push(c as u8);
    }
    let class_names = if n_classes == 5 {
        default_class_names()
    } else {
        (0..n_classes).map(|c| format!("class{c}")).collect()
    };
    let feature_names = (0..n_features).map(|j| format!("f{j}")).collect();
    TrainingSet::new(features, labels, class_names, feature_names)
}
