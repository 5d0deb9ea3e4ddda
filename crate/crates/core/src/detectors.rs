//! Application heads built on the model output.
//!
//! Maps here live on the pooled grid unless stated otherwise. Pooled pixel
//! `j` samples image coordinate `j·p + (p−1)/2`; [`upsample_bilinear`] uses
//! the same registration to go back to image resolution.

use serde::{Deserialize, Serialize};

use crate::config::Model;
use crate::error::{Error, Result};
use crate::field::{FeatureStack, GrayImage, LabelMask, ScalarMap};
use crate::gabor::{gabor_layer, GaborBank, GaborConfig, SIGMA_PER_KERNEL};
use crate::pooling::{pool, pool_image, PoolingConfig};

/// Default long-Gabor kernel side: five times the standard kernel.
pub const DEFAULT_LONG_KERNEL: usize = 55;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Pooled image intensity at or above which a pixel counts as structure.
    pub activity_threshold: f64,
    /// Difference values below this leave the image untouched when blending.
    pub suppression_threshold: f64,
    /// Binarization level for the fault response map.
    pub fault_threshold: f64,
    /// Inhibition-of-return disk radius on the pooled grid.
    pub ior_radius: usize,
    /// Side of the ROI box in image pixels.
    pub roi_side: usize,
    pub max_rois: usize,
    /// Extraction halts once the remaining saliency peak is below this.
    pub saliency_stop: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            activity_threshold: 0.5,
            suppression_threshold: 0.2,
            fault_threshold: 0.5,
            ior_radius: 7,
            roi_side: 32,
            max_rois: 64,
            saliency_stop: 0.15,
        }
    }
}

impl DetectorConfig {
    pub fn collect_errors(&self, errs: &mut Vec<String>) {
        for (name, v) in [
            ("activity_threshold", self.activity_threshold),
            ("suppression_threshold", self.suppression_threshold),
            ("fault_threshold", self.fault_threshold),
            ("saliency_stop", self.saliency_stop),
        ] {
            if !(0.0..=1.0).contains(&v) {
                errs.push(format!("detector.{name} = {v} must lie in [0, 1]"));
            }
        }
        if self.ior_radius < 1 {
            errs.push("detector.ior_radius must be at least 1".into());
        }
        if self.max_rois < 1 {
            errs.push("detector.max_rois must be at least 1".into());
        }
        if self.roi_side < 1 {
            errs.push("detector.roi_side must be at least 1".into());
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        self.collect_errors(&mut errs);
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

/// Per-pixel maximum over orientations of `col − pooled`.
pub fn difference_map(col: &FeatureStack, pooled: &FeatureStack) -> Result<ScalarMap> {
    if !col.same_shape(pooled) {
        return Err(Error::config(format!(
            "difference map needs matching stacks, got {}x{}x{} and {}x{}x{}",
            col.height(),
            col.width(),
            col.orientations(),
            pooled.height(),
            pooled.width(),
            pooled.orientations()
        )));
    }
    let n = col.plane_len();
    let mut d = vec![0.0f64; n];
    for (c, p) in col.planes().zip(pooled.planes()) {
        for i in 0..n {
            d[i] = d[i].max(c[i] - p[i]);
        }
    }
    ScalarMap::new(col.height(), col.width(), d)
}

/// Binary structure mask: the image pooled onto the model grid and
/// thresholded at `threshold`.
pub fn activity_map(image: &GrayImage, pooling: &PoolingConfig, threshold: f64) -> Result<ScalarMap> {
    Ok(pool_image(image, pooling)?.map(|v| if v >= threshold { 1.0 } else { 0.0 }))
}

/// Fuzzy minimum of the inverted, range-normalized difference map and the
/// activity mask: high where structure exists but collinear enhancement is low.
pub fn fault_response_map(difference: &ScalarMap, activity: &ScalarMap, cfg: &DetectorConfig) -> Result<ScalarMap> {
    let a = activity.map(|v| if v >= cfg.activity_threshold { 1.0 } else { 0.0 });
    difference.normalize_unit().zip_with(&a, |d, a| (1.0 - d).min(a))
}

/// Marks pixels with a nonzero fault response at or above the threshold.
pub fn fault_detector(fault: &ScalarMap, cfg: &DetectorConfig) -> ScalarMap {
    fault.map(|f| if f > 0.0 && f >= cfg.fault_threshold { 1.0 } else { 0.0 })
}

/// Resizes a pooled-grid map to `height × width` image pixels by bilinear
/// interpolation, with coordinates clamped at the borders.
pub fn upsample_bilinear(map: &ScalarMap, height: usize, width: usize, stride: usize) -> Result<ScalarMap> {
    let offset = (stride as f64 - 1.0) / 2.0;
    let axis = |n_out: usize, n_in: usize| -> Vec<(usize, usize, f64)> {
        (0..n_out)
            .map(|i| {
                let u = ((i as f64 - offset) / stride as f64).clamp(0.0, (n_in - 1) as f64);
                let i0 = u.floor() as usize;
                let i1 = (i0 + 1).min(n_in - 1);
                (i0, i1, u - i0 as f64)
            })
            .collect()
    };
    let rows = axis(height, map.height());
    let cols = axis(width, map.width());
    let mut out = Vec::with_capacity(height * width);
    for &(r0, r1, fy) in &rows {
        for &(c0, c1, fx) in &cols {
            let top = map.get(r0, c0) * (1.0 - fx) + map.get(r0, c1) * fx;
            let bottom = map.get(r1, c0) * (1.0 - fx) + map.get(r1, c1) * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    ScalarMap::new(height, width, out)
}

/// Two-plane preprocessing output: the original image and a response map
/// resized to image resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPlaneImage {
    pub intensity: GrayImage,
    pub response: GrayImage,
}

pub fn channel_concat_export(image: &GrayImage, response: &ScalarMap, stride: usize) -> Result<TwoPlaneImage> {
    let up = upsample_bilinear(response, image.height(), image.width(), stride)?;
    Ok(TwoPlaneImage {
        intensity: image.clone(),
        response: up.to_image(),
    })
}

/// Blends strongly collinear pixels toward the mean gray value. `difference`
/// is the normalized difference map at image resolution.
pub fn suppression_blend(image: &GrayImage, difference: &ScalarMap, cfg: &DetectorConfig) -> Result<GrayImage> {
    if difference.height() != image.height() || difference.width() != image.width() {
        return Err(Error::config(format!(
            "suppression map {}x{} does not match image {}x{}",
            difference.height(),
            difference.width(),
            image.height(),
            image.width()
        )));
    }
    let mean = image.mean();
    GrayImage::from_fn(image.height(), image.width(), |y, x| {
        let d = difference.get(y, x);
        let d = if d >= cfg.suppression_threshold {
            d.clamp(0.0, 1.0)
        } else {
            0.0
        };
        mean * d + image.get(y, x) * (1.0 - d)
    })
}

fn saliency_from(
    stack: &FeatureStack,
    image: &GrayImage,
    pooling: &PoolingConfig,
    cfg: &DetectorConfig,
) -> Result<ScalarMap> {
    let s1 = stack.max_over_orientations().normalize_unit();
    let a = activity_map(image, pooling, cfg.activity_threshold)?;
    if !s1.same_shape(&a) {
        return Err(Error::config(format!(
            "stack grid {}x{} does not match pooled image {}x{}",
            s1.height(),
            s1.width(),
            a.height(),
            a.width()
        )));
    }
    s1.zip_with(&a, |s, a| (1.0 - s).min(a))
}

/// Saliency from the collinearity stack: structure that is not collinear.
pub fn saliency_map(
    col: &FeatureStack,
    image: &GrayImage,
    pooling: &PoolingConfig,
    cfg: &DetectorConfig,
) -> Result<ScalarMap> {
    saliency_from(col, image, pooling, cfg)
}

/// The same construction driven by the pooled Gabor stack.
pub fn baseline_saliency(
    pooled: &FeatureStack,
    image: &GrayImage,
    pooling: &PoolingConfig,
    cfg: &DetectorConfig,
) -> Result<ScalarMap> {
    saliency_from(pooled, image, pooling, cfg)
}

/// Region of interest. `center` is on the pooled grid, `bbox` is
/// `[top, left, height, width]` in image pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    pub rank: usize,
    pub center: [usize; 2],
    pub bbox: [usize; 4],
    pub score: f64,
}

/// Greedy peak picking with inhibition of return. Ties go to the smallest
/// row, then column. `image_size` is `(height, width)` of the source image.
pub fn extract_rois_with_ior(
    saliency: &ScalarMap,
    cfg: &DetectorConfig,
    stride: usize,
    image_size: (usize, usize),
) -> Vec<Roi> {
    let (h, w) = (saliency.height(), saliency.width());
    let mut work = saliency.data().to_vec();
    let r = cfg.ior_radius as isize;
    let mut rois = Vec::new();
    while rois.len() < cfg.max_rois {
        let (mut best, mut score) = (0usize, f64::NEG_INFINITY);
        for (i, &v) in work.iter().enumerate() {
            if v > score {
                best = i;
                score = v;
            }
        }
        if score <= 0.0 || score < cfg.saliency_stop {
            break;
        }
        let (cy, cx) = (best / w, best % w);
        rois.push(Roi {
            rank: rois.len() + 1,
            center: [cy, cx],
            bbox: roi_box(cy, cx, stride, cfg.roi_side, image_size),
            score: score.clamp(0.0, 1.0),
        });
        for dy in -r..=r {
            for dx in -r..=r {
                if dy * dy + dx * dx > r * r {
                    continue;
                }
                let (y, x) = (cy as isize + dy, cx as isize + dx);
                if y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w {
                    work[y as usize * w + x as usize] = 0.0;
                }
            }
        }
    }
    rois
}

fn roi_box(cy: usize, cx: usize, stride: usize, side: usize, (h, w): (usize, usize)) -> [usize; 4] {
    let place = |c: usize, n: usize| {
        let centre = c * stride + (stride - 1) / 2;
        let len = side.min(n);
        (centre.saturating_sub(side / 2).min(n - len), len)
    };
    let (top, bh) = place(cy, h);
    let (left, bw) = place(cx, w);
    [top, left, bh, bw]
}

/// Signal-to-noise comparison between the collinearity difference map and
/// a long Gabor filter.
#[derive(Debug, Clone, PartialEq)]
pub struct LongGaborComparison {
    /// Difference map on the pooled grid.
    pub col_map: ScalarMap,
    /// Rectified long-Gabor response, max over orientations, pooled.
    pub long_gabor_map: ScalarMap,
    /// `None` when the map has no on-line signal.
    pub col_snr: Option<f64>,
    pub long_gabor_snr: Option<f64>,
    /// `col_snr / long_gabor_snr`; `None` when either is undefined.
    pub snr_ratio: Option<f64>,
}

/// Gabor configuration stretched along the line to `long_kernel` pixels,
/// keeping the carrier and the across-line envelope of `base`.
pub fn long_gabor_config(base: &GaborConfig, long_kernel: usize) -> GaborConfig {
    GaborConfig {
        kernel_size: long_kernel,
        frequency: Some(base.frequency()),
        sigma1: Some(base.sigma1()),
        sigma2: Some(SIGMA_PER_KERNEL * long_kernel as f64),
        ..base.clone()
    }
}

/// Mean on-mask value over mean off-mask value.
pub fn snr(map: &ScalarMap, mask: &LabelMask) -> Option<f64> {
    let (mut on, mut n_on, mut off, mut n_off) = (0.0, 0usize, 0.0, 0usize);
    for y in 0..map.height() {
        for x in 0..map.width() {
            if mask.get(y, x) {
                on += map.get(y, x);
                n_on += 1;
            } else {
                off += map.get(y, x);
                n_off += 1;
            }
        }
    }
    if n_on == 0 || on <= 0.0 {
        return None;
    }
    let on = on / n_on as f64;
    let off = if n_off == 0 { 0.0 } else { off / n_off as f64 };
    Some(if off > 0.0 { on / off } else { f64::INFINITY })
}

/// Runs both line detectors on `image`; `lines` labels line pixels at
/// image resolution.
pub fn long_gabor_compare(
    model: &Model,
    image: &GrayImage,
    long_kernel: usize,
    lines: &LabelMask,
) -> Result<LongGaborComparison> {
    if long_kernel.is_multiple_of(2) {
        return Err(Error::config(format!("long kernel size {long_kernel} must be odd")));
    }
    if lines.height() != image.height() || lines.width() != image.width() {
        return Err(Error::config("line mask does not match the image".to_string()));
    }
    let pooling = &model.config().pooling;
    let out = model.run(image)?;
    let col_map = difference_map(&out.col, &out.pooled)?;
    let bank = GaborBank::new(&long_gabor_config(&model.config().gabor, long_kernel))?;
    let long = pool(&gabor_layer(image, &bank), pooling)?;
    let long_gabor_map = long.max_over_orientations();
    let mask = lines.pooled(pooling);
    let col_snr = snr(&col_map, &mask);
    let long_gabor_snr = snr(&long_gabor_map, &mask);
    let snr_ratio = match (col_snr, long_gabor_snr) {
        (Some(c), Some(l)) if (c / l).is_finite() => Some(c / l),
        _ => None,
    };
    Ok(LongGaborComparison {
        col_map,
        long_gabor_map,
        col_snr,
        long_gabor_snr,
        snr_ratio,
    })
}
