use std::path::PathBuf;

use rqnn::baselines::{kmeans, map_clusters_to_labels, KMeansConfig};
use rqnn::dataio::{
    self, boundary_raster, gen_subspecies, BoundingBox, Dataset, LabelKind, LabeledPoint, SubspeciesParams,
};
use rqnn::modelfile;
use rqnn::network::{center_form, Activation, LayerKind, LayerSpec, Model, NetworkSpec};
use rqnn::training::{accuracy, train, BatchSize, TrainConfig};
use rqnn::Rng;

fn toy() -> Dataset<f64> {
    let pts = [([0.0, 0.0], 0), ([0.0, 1.0], 0), ([2.0, 0.0], 1), ([2.0, 1.0], 1)];
    Dataset::new(
        pts.iter().map(|(x, l)| LabeledPoint { x: x.to_vec(), label: *l }).collect(),
        LabelKind::Binary,
    )
    .unwrap()
}

/// Scans directions for a line that puts every label-1 point strictly on one
/// side of every label-0 point.
fn brute_force_separable(data: &Dataset<f64>) -> bool {
    (0..3600).any(|i| {
        let a = i as f64 * std::f64::consts::PI / 1800.0;
        let (s, c) = a.sin_cos();
        let proj = |p: &LabeledPoint<f64>| c * p.x[0] + s * p.x[1];
        let max0 = data.points().iter().filter(|p| p.label == 0).map(proj).fold(f64::MIN, f64::max);
        let min1 = data.points().iter().filter(|p| p.label == 1).map(proj).fold(f64::MAX, f64::min);
        max0 < min1
    })
}

fn toy_config() -> TrainConfig {
    TrainConfig {
        epochs: 200,
        batch_size: BatchSize::Full,
        seed: 3,
        ..TrainConfig::default()
    }
}

#[test]
fn toy_set_is_learned_exactly() {
    let data = toy();
    assert!(brute_force_separable(&data));
    let xor = Dataset::new(
        [([0.0, 0.0], 0), ([1.0, 1.0], 0), ([1.0, 0.0], 1), ([0.0, 1.0], 1)]
            .iter()
            .map(|(x, l)| LabeledPoint { x: x.to_vec(), label: *l })
            .collect(),
        LabelKind::Binary,
    )
    .unwrap();
    assert!(!brute_force_separable(&xor));

    let spec = NetworkSpec::classifier(LayerKind::Affine, 2, 1, 8).unwrap();
    let (model, _) = train(&spec, &data, &toy_config(), None).unwrap();
    assert_eq!(accuracy(&model, &data).unwrap(), 1.0);
}

#[test]
fn toy_loss_settles_after_warmup() {
    let spec = NetworkSpec::classifier(LayerKind::Affine, 2, 1, 8).unwrap();
    let (_, report) = train(&spec, &toy(), &toy_config(), None).unwrap();
    let tail = &report.epoch_loss[3..];
    let upticks = tail.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(upticks as f64 <= 0.05 * tail.len() as f64, "{upticks} upticks");
    assert!(tail.last().unwrap() < tail.first().unwrap());
}

#[test]
fn rqnn_learns_the_subspecies_disk() {
    let data = gen_subspecies::<f64>(42, &SubspeciesParams::default()).unwrap();
    let (train_set, test_set) = dataio::split(&data, 5.0 / 6.0, 42).unwrap();
    let spec = NetworkSpec::classifier(LayerKind::RadialQuadratic, 2, 1, 8).unwrap();
    let cfg = TrainConfig { seed: 42, ..TrainConfig::default() };
    let (_, report) = train(&spec, &train_set, &cfg, Some(&test_set)).unwrap();
    assert_eq!(report.epoch_loss.len(), 10);
    assert!(report.test_accuracy.unwrap() >= 0.99, "{:?}", report.test_accuracy);
}

#[test]
fn training_is_bitwise_deterministic() {
    let data = gen_subspecies::<f64>(5, &SubspeciesParams { n_total: 600, ..Default::default() }).unwrap();
    let spec = NetworkSpec::classifier(LayerKind::RadialQuadratic, 2, 2, 4).unwrap();
    let cfg = TrainConfig { epochs: 3, seed: 11, ..TrainConfig::default() };
    let (m1, r1) = train(&spec, &data, &cfg, None).unwrap();
    let (m2, r2) = train(&spec, &data, &cfg, None).unwrap();
    assert_eq!(m1, m2);
    assert_eq!(r1.epoch_loss, r2.epoch_loss);
    assert_eq!(
        modelfile::model_to_string(&m1).unwrap(),
        modelfile::model_to_string(&m2).unwrap()
    );
}

#[test]
fn level_set_of_a_circular_neuron_is_its_circle() {
    let spec = NetworkSpec::new(vec![LayerSpec::new(
        LayerKind::RadialQuadratic,
        2,
        1,
        Activation::Sigmoid,
    )])
    .unwrap();
    let mut model = Model::<f64>::zeros(spec);
    let p = &mut model.params_mut()[0];
    p.weights.set(0, 0, -0.6);
    p.weights.set(0, 1, 0.2);
    p.xi.as_mut().unwrap()[0] = 1.5;
    p.theta[0] = -1.0;

    let cf = center_form(model.params()[0].weights.row(0), 1.5, -1.0).unwrap();
    let radius = (-cf.kappa / 1.5).sqrt();
    let bbox = BoundingBox::new(-2.0, 2.5, -2.0, 2.0).unwrap();
    let grid = boundary_raster(&model, bbox, (181, 161)).unwrap();
    let cell = (bbox.xmax - bbox.xmin) / grid.nx as f64;

    let mut crossings = 0;
    for row in 0..grid.ny {
        for col in 0..grid.nx - 1 {
            let (a, b) = (grid.value(row, col), grid.value(row, col + 1));
            if (a - 0.5) * (b - 0.5) < 0.0 {
                let t = (0.5 - a) / (b - a);
                let (x0, y) = grid.cell_center(row, col);
                let x = x0 + t * cell;
                let r = ((x - cf.center[0]).powi(2) + (y - cf.center[1]).powi(2)).sqrt();
                assert!((r - radius).abs() < 2.0 * cell, "crossing at radius {r}, expected {radius}");
                crossings += 1;
            }
        }
    }
    assert!(crossings > 50);
}

#[test]
fn bundled_embedding_has_ten_digits() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/sample_embedding.csv");
    let data: Dataset<f64> = dataio::load_labeled_csv(&path).unwrap();
    assert_eq!(data.kind(), LabelKind::Digit);
    for d in 0..10 {
        assert_eq!(data.count_label(d), 1000);
    }
    let regenerated = dataio::gen_digit_embedding::<f64>(42, 1000).unwrap();
    assert_eq!(data, regenerated);

    let points: Vec<Vec<f64>> = data.points().iter().map(|p| p.x.clone()).collect();
    let r = kmeans(&points, KMeansConfig { k: 10, restarts: 3, max_iter: 100 }, &mut Rng::new(42)).unwrap();
    let (mapping, acc) = map_clusters_to_labels(&r, &data.labels()).unwrap();
    assert_eq!(mapping.len(), 10);
    assert!(acc > 0.8, "{acc}");
}

#[test]
fn csv_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let data = gen_subspecies::<f64>(1, &SubspeciesParams { n_total: 50, ..Default::default() }).unwrap();
    dataio::save_labeled_csv(&data, &path).unwrap();
    let back: Dataset<f64> = dataio::load_labeled_csv(&path).unwrap();
    assert_eq!(back, data);
    assert!(dataio::load_labeled_csv::<f64>(&dir.path().join("missing.csv")).is_err());
}
