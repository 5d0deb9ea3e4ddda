//! Synthetic images with known pixel labels for the detector heads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::field::{GrayImage, LabelMask};

/// Wafer-like image: one straight horizontal street and a curved fault cut.
#[derive(Debug, Clone)]
pub struct WaferFixture {
    pub image: GrayImage,
    pub street: LabelMask,
    pub fault: LabelMask,
}

/// Orientations used for the wafer case, −20° to 20° in 5° steps, wrapped
/// into `[0, 2π)`.
pub fn wafer_orientations() -> Vec<f64> {
    (-4..=4)
        .map(|k| (f64::from(k) * 5.0).to_radians().rem_euclid(2.0 * std::f64::consts::PI))
        .collect()
}

const LINE_HALF: f64 = 1.5;

fn on_segment(y: f64, x: f64, (y0, x0): (f64, f64), (y1, x1): (f64, f64), half: f64) -> bool {
    let (dy, dx) = (y1 - y0, x1 - x0);
    let len2 = dy * dy + dx * dx;
    let t = (((y - y0) * dy + (x - x0) * dx) / len2).clamp(0.0, 1.0);
    let (py, px) = (y0 + t * dy, x0 + t * dx);
    ((y - py).powi(2) + (x - px).powi(2)).sqrt() <= half
}

/// 229×1540 dark image (the wafer crop resolution, street along the long
/// axis) with a 3-px street at row 61 spanning the full width and four
/// half-circle fault cuts below it, bulging upwards.
pub fn wafer_fixture() -> WaferFixture {
    let (h, w) = (229, 1540);
    let street_row = 61.0;
    let arcs = [
        (170.0, 300.0, 36.0),
        (170.0, 650.0, 40.0),
        (170.0, 1000.0, 36.0),
        (160.0, 1300.0, 18.0),
    ];
    let street = LabelMask::from_fn(h, w, |y, _| (y as f64 - street_row).abs() <= 1.0);
    let fault = LabelMask::from_fn(h, w, |y, x| {
        arcs.iter().any(|(cy, cx, r)| {
            let (dy, dx) = (y as f64 - cy, x as f64 - cx);
            dy <= 0.0 && ((dy * dy + dx * dx).sqrt() - r).abs() <= LINE_HALF
        })
    });
    let image = GrayImage::from_fn(h, w, |y, x| if street.get(y, x) || fault.get(y, x) { 0.9 } else { 0.1 })
        .expect("fixture intensities lie in [0, 1]");
    WaferFixture { image, street, fault }
}

/// SEM-like image: long straight fibers plus textured clumps.
#[derive(Debug, Clone)]
pub struct SemFixture {
    pub image: GrayImage,
    pub fibers: LabelMask,
    /// `(row, col)` image coordinates of the clump centres.
    pub clump_centres: Vec<(f64, f64)>,
    pub clump_radius: f64,
}

/// Seed of the reference SEM fixture.
pub const SEM_SEED: u64 = 2024;

/// Intensities and texture grain of the SEM fixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemParams {
    pub background: f64,
    pub fiber: f64,
    pub texture_low: f64,
    pub texture_high: f64,
    /// Side of the square texture cells in pixels.
    pub grain: usize,
    pub clump_radius: f64,
}

impl Default for SemParams {
    fn default() -> Self {
        Self {
            background: 0.05,
            fiber: 0.9,
            texture_low: 0.0,
            texture_high: 1.0,
            grain: 3,
            clump_radius: 8.0,
        }
    }
}

/// 192×192 fiber image with three textured disks; deterministic for a seed.
pub fn sem_fixture(seed: u64) -> SemFixture {
    sem_fixture_with(&SemParams::default(), seed)
}

pub fn sem_fixture_with(params: &SemParams, seed: u64) -> SemFixture {
    let (h, w) = (192, 192);
    let fibers_at: [((f64, f64), (f64, f64)); 3] = [
        ((31.0, 0.0), (31.0, 191.0)),
        ((94.0, 0.0), (94.0, 191.0)),
        ((157.0, 0.0), (157.0, 191.0)),
    ];
    let clump_centres = vec![(62.0, 50.0), (125.0, 96.0), (62.0, 150.0)];
    let clump_radius = params.clump_radius;
    let fibers = LabelMask::from_fn(h, w, |y, x| {
        fibers_at
            .iter()
            .any(|(a, b)| on_segment(y as f64, x as f64, *a, *b, LINE_HALF))
    });
    let g = params.grain.max(1);
    let (th, tw) = (h.div_ceil(g), w.div_ceil(g));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let texture: Vec<f64> = (0..th * tw)
        .map(|_| {
            if rng.gen_bool(0.5) {
                params.texture_high
            } else {
                params.texture_low
            }
        })
        .collect();
    let image = GrayImage::from_fn(h, w, |y, x| {
        let in_clump = clump_centres
            .iter()
            .any(|(cy, cx)| ((y as f64 - cy).powi(2) + (x as f64 - cx).powi(2)).sqrt() <= clump_radius);
        if in_clump {
            texture[(y / g) * tw + x / g]
        } else if fibers.get(y, x) {
            params.fiber
        } else {
            params.background
        }
    })
    .expect("fixture intensities lie in [0, 1]");
    SemFixture {
        image,
        fibers,
        clump_centres,
        clump_radius,
    }
}

/// 96×96 crop with two crossing 3-px lines interrupted by occluding gaps,
/// plus short clutter strokes.
#[derive(Debug, Clone)]
pub struct CrossingFixture {
    pub image: GrayImage,
    pub lines: LabelMask,
}

pub fn crossing_lines_fixture() -> CrossingFixture {
    let n = 96;
    let a = ((10.0, 0.0), (86.0, 95.0));
    let b = ((48.0, 0.0), (48.0, 95.0));
    let gaps = [(30.0, 36.0), (62.0, 68.0)];
    let clutter: [((f64, f64), (f64, f64)); 3] = [
        ((75.0, 10.0), (83.0, 18.0)),
        ((15.0, 60.0), (25.0, 60.0)),
        ((80.0, 60.0), (86.0, 70.0)),
    ];
    let lines = LabelMask::from_fn(n, n, |y, x| {
        let (yf, xf) = (y as f64, x as f64);
        let occluded = gaps.iter().any(|(g0, g1)| xf >= *g0 && xf < *g1);
        !occluded && (on_segment(yf, xf, a.0, a.1, LINE_HALF) || on_segment(yf, xf, b.0, b.1, LINE_HALF))
    });
    let image = GrayImage::from_fn(n, n, |y, x| {
        let clutter_px = clutter
            .iter()
            .any(|(p, q)| on_segment(y as f64, x as f64, *p, *q, LINE_HALF));
        if lines.get(y, x) || clutter_px {
            0.9
        } else {
            0.1
        }
    })
    .expect("fixture intensities lie in [0, 1]");
    CrossingFixture { image, lines }
}
