use collinearity::detectors::{difference_map, DetectorConfig};
use collinearity::gabor::gabor_layer;
use collinearity::io::{read_image, write_image_png};
use collinearity::pooling::{pool, pool_image};
use collinearity::stimuli::experiments::{flanker_distance_sweep, triplet, ExperimentConfig};
use collinearity::{collinearity_layer, DynamicsConfig, FeatureStack, GrayImage, Model, ModelConfig, PoolingConfig};
use proptest::prelude::*;

fn model() -> Model {
    Model::new(ModelConfig::default()).unwrap()
}

fn image_strategy() -> impl Strategy<Value = GrayImage> {
    (12usize..28, 12usize..28).prop_flat_map(|(h, w)| {
        prop::collection::vec(0.0f64..=1.0, h * w).prop_map(move |d| GrayImage::new(h, w, d).unwrap())
    })
}

#[test]
fn pipeline_shapes_follow_stride() {
    let m = model();
    for (h, w) in [(30, 31), (32, 33), (47, 20)] {
        let out = m.run(&GrayImage::filled(h, w, 0.3).unwrap()).unwrap();
        assert_eq!(
            (out.gabor.height(), out.gabor.width(), out.gabor.orientations()),
            (h, w, 8)
        );
        assert_eq!((out.pooled.height(), out.pooled.width()), (h / 3, w / 3));
        assert!(out.col.same_shape(&out.pooled));
    }
}

#[test]
fn constant_image_is_silent_everywhere() {
    let m = model();
    let out = m.run(&GrayImage::filled(40, 40, 0.7).unwrap()).unwrap();
    assert!(out.gabor.data().iter().all(|v| *v == 0.0));
    assert!(out.col.data().iter().all(|v| *v == 0.0));
    assert_eq!(out.steps, 1);
}

#[test]
fn zero_gain_returns_pooled_stack() {
    let mut cfg = ModelConfig::default();
    cfg.dynamics.w_col = 0.0;
    let m = Model::new(cfg).unwrap();
    let exp = ExperimentConfig::default();
    let out = m.run(&triplet(&m, &exp, 8.0, 0.0).unwrap()).unwrap();
    assert_eq!(out.col, out.pooled);
    assert!(difference_map(&out.col, &out.pooled)
        .unwrap()
        .data()
        .iter()
        .all(|v| *v == 0.0));
}

#[test]
fn control_series_ignores_gain() {
    let exp = ExperimentConfig::default();
    let grid = [4.0, 8.0];
    let run = |w: f64| {
        let mut cfg = ModelConfig::default();
        cfg.dynamics.w_col = w;
        flanker_distance_sweep(&Model::new(cfg).unwrap(), &exp, &grid).unwrap()
    };
    let (a, b) = (run(1.0), run(3.0));
    assert_eq!(a.control, b.control);
    assert!(b.enhanced[1] > a.enhanced[1]);
}

#[test]
fn png_round_trip_preserves_stimulus_response() {
    let m = model();
    let exp = ExperimentConfig::default();
    let image = triplet(&m, &exp, 8.0, 0.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("triplet.png");
    write_image_png(&path, &image).unwrap();
    let back = read_image(&path).unwrap();
    let drift = image
        .data()
        .iter()
        .zip(back.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(drift <= 0.5 / 65535.0 + 1e-12, "{drift}");
    let (a, b) = (m.run(&image).unwrap(), m.run(&back).unwrap());
    let l = m.bank().nearest_orientation(0.0);
    let (ra, rb) = (a.col.central_readout(l).unwrap(), b.col.central_readout(l).unwrap());
    assert!((ra - rb).abs() <= ra * (1.0 / 255.0), "{ra} vs {rb}");
}

#[test]
fn detector_defaults_validate() {
    DetectorConfig::default().validate().unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gabor_output_is_rectified_and_offset_invariant(img in image_strategy(), shift in -0.3f64..0.3) {
        let m = model();
        let g = gabor_layer(&img, m.bank());
        prop_assert!(g.data().iter().all(|v| *v >= 0.0));
        let shifted = GrayImage::new(img.height(), img.width(), img.data().iter().map(|v| v + shift).collect());
        if let Ok(s) = shifted {
            let gs = gabor_layer(&s, m.bank());
            for (a, b) in g.data().iter().zip(gs.data()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pooling_is_bounded_by_input_range(img in image_strategy()) {
        let cfg = PoolingConfig::default();
        let p = pool_image(&img, &cfg).unwrap();
        prop_assert_eq!((p.height(), p.width()), (img.height() / 3, img.width() / 3));
        let stack = FeatureStack::new(img.height(), img.width(), 1, img.data().to_vec()).unwrap();
        let ps = pool(&stack, &cfg).unwrap();
        prop_assert!(ps.data().iter().all(|v| *v >= 0.0));
        // Lanczos overshoot is bounded by the sum of absolute taps.
        prop_assert!(p.data().iter().all(|v| v.abs() <= 1.3));
    }

    #[test]
    fn facilitation_never_suppresses(img in image_strategy(), w in 0.0f64..2.0) {
        let m = model();
        let (_, pooled) = m.feedforward(&img).unwrap();
        let dyn_cfg = DynamicsConfig { w_col: w, ..DynamicsConfig::default() };
        let conv = collinearity_layer(&pooled, m.kernels(), &dyn_cfg).unwrap();
        for (c, p) in conv.rates.data().iter().zip(pooled.data()) {
            prop_assert!(*c >= *p - 1e-4);
            if *p == 0.0 {
                prop_assert_eq!(*c, 0.0);
            }
        }
        prop_assert!(conv.residual < dyn_cfg.epsilon);
    }

    #[test]
    fn runs_are_reproducible(img in image_strategy()) {
        let m = model();
        prop_assert_eq!(m.run(&img).unwrap(), m.run(&img).unwrap());
    }
}
