//! Oriented Gabor filter bank and the half-rectified Gabor layer.
//!
//! Kernel coordinates: `x1` is the row offset (downwards), `x2` the column
//! offset. With `X1 = x1 cos θ + x2 sin θ` the carrier varies along `X1`, so
//! plane `θ` responds to lines running along direction `(-sin θ, cos θ)` in
//! (row, col) terms. `θ = 0` is a horizontal line; positive angles turn
//! counter-clockwise on screen.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FeatureStack, GrayImage};

/// Ratio between kernel size and Gabor wavelength.
pub const KERNEL_PER_LAMBDA: f64 = 2.2;
/// Gaussian envelope width as a fraction of the kernel size.
pub const SIGMA_PER_KERNEL: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaborConfig {
    /// Odd kernel side `K` in pixels.
    pub kernel_size: usize,
    /// Orientations in radians, each in `[0, 2π)`.
    pub orientations: Vec<f64>,
    /// Carrier phase `ψ` in radians. `0` is an even bright-line detector,
    /// `π/2` an odd dark-bright edge detector.
    pub phase: f64,
    /// Carrier frequency in cycles/pixel; derived as `1/λ` when absent.
    pub frequency: Option<f64>,
    /// Envelope width across the line (along `X1`); `0.4·K` when absent.
    pub sigma1: Option<f64>,
    /// Envelope width along the line (along `X2`); `0.4·K` when absent.
    pub sigma2: Option<f64>,
    /// Fold angles into `[0, π)` and drop duplicates before building planes.
    pub dedupe_orientations: bool,
}

impl Default for GaborConfig {
    fn default() -> Self {
        Self {
            kernel_size: 11,
            orientations: default_orientations(8),
            phase: 0.0,
            frequency: None,
            sigma1: None,
            sigma2: None,
            dedupe_orientations: false,
        }
    }
}

/// `n` angles evenly spaced over `[0, 2π)`.
pub fn default_orientations(n: usize) -> Vec<f64> {
    (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect()
}

/// Degrees to radians wrapped into `[0, 2π)`.
pub fn orientations_from_degrees(deg: &[f64]) -> Vec<f64> {
    deg.iter().map(|d| d.to_radians().rem_euclid(2.0 * PI)).collect()
}

/// Gabor wavelength in whole pixels for a kernel of side `k`.
pub fn lambda_from_kernel(k: usize) -> Result<usize> {
    if k < 3 {
        return Err(Error::config(format!("kernel size {k} must be at least 3")));
    }
    Ok(((k as f64 / KERNEL_PER_LAMBDA).round() as usize).max(1))
}

impl GaborConfig {
    pub fn with_kernel_size(kernel_size: usize) -> Self {
        Self {
            kernel_size,
            ..Self::default()
        }
    }

    pub fn lambda_px(&self) -> Result<usize> {
        lambda_from_kernel(self.kernel_size)
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
            .unwrap_or_else(|| 1.0 / lambda_from_kernel(self.kernel_size).unwrap_or(1) as f64)
    }

    pub fn sigma1(&self) -> f64 {
        self.sigma1.unwrap_or(SIGMA_PER_KERNEL * self.kernel_size as f64)
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2.unwrap_or(SIGMA_PER_KERNEL * self.kernel_size as f64)
    }

    /// Angles actually turned into planes.
    pub fn effective_orientations(&self) -> Vec<f64> {
        if !self.dedupe_orientations {
            return self.orientations.clone();
        }
        let mut out: Vec<f64> = Vec::new();
        for &t in &self.orientations {
            let folded = t.rem_euclid(PI);
            if !out
                .iter()
                .any(|&o| (o - folded).abs() < 1e-9 || (PI - (o - folded).abs()) < 1e-9)
            {
                out.push(folded);
            }
        }
        out
    }

    pub fn collect_errors(&self, errs: &mut Vec<String>) {
        if self.kernel_size < 3 || self.kernel_size.is_multiple_of(2) {
            errs.push(format!("gabor.kernel_size {} must be odd and >= 3", self.kernel_size));
        }
        if self.orientations.is_empty() {
            errs.push("gabor.orientations must not be empty".into());
        }
        for &t in &self.orientations {
            if !(0.0..2.0 * PI).contains(&t) {
                errs.push(format!("gabor.orientations: angle {t} outside [0, 2pi)"));
            }
        }
        if !self.phase.is_finite() {
            errs.push("gabor.phase must be finite".into());
        }
        for (name, v) in [
            ("frequency", self.frequency),
            ("sigma1", self.sigma1),
            ("sigma2", self.sigma2),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    errs.push(format!("gabor.{name} {v} must be > 0"));
                }
            }
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

/// Square filter kernel, row-major, odd side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Kernel {
    size: usize,
    data: Vec<f64>,
}

impl Kernel {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radius(&self) -> usize {
        self.size / 2
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Weight at `(row, col)` index, not offset.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.size + col]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.size)
    }
}

/// Raw Gabor sample `exp(-(X1²/2σ1² + X2²/2σ2²)) · cos(2π f X1 + ψ)` at
/// integer offsets `(x1, x2)`.
pub fn gabor_value(x1: f64, x2: f64, theta: f64, frequency: f64, phase: f64, sigma1: f64, sigma2: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let u1 = x1 * c + x2 * s;
    let u2 = -x1 * s + x2 * c;
    (-(u1 * u1 / (2.0 * sigma1 * sigma1) + u2 * u2 / (2.0 * sigma2 * sigma2))).exp()
        * (2.0 * PI * frequency * u1 + phase).cos()
}

/// Samples the kernel for angle `theta`, removes its mean and scales it so
/// the positive entries sum to one.
pub fn build_gabor_kernel(config: &GaborConfig, theta: f64) -> Kernel {
    let k = config.kernel_size;
    let half = (k / 2) as isize;
    let (f, psi, s1, s2) = (config.frequency(), config.phase, config.sigma1(), config.sigma2());
    let mut data = Vec::with_capacity(k * k);
    for i in 0..k as isize {
        for j in 0..k as isize {
            data.push(gabor_value((i - half) as f64, (j - half) as f64, theta, f, psi, s1, s2));
        }
    }
    let mean = data.iter().sum::<f64>() / data.len() as f64;
    data.iter_mut().for_each(|v| *v -= mean);
    let positive: f64 = data.iter().filter(|v| **v > 0.0).sum();
    if positive > 0.0 {
        data.iter_mut().for_each(|v| *v /= positive);
    }
    Kernel { size: k, data }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaborBank {
    kernels: Vec<Kernel>,
    orientations: Vec<f64>,
    lambda_px: usize,
}

impl GaborBank {
    pub fn new(config: &GaborConfig) -> Result<Self> {
        config.validate()?;
        let orientations = config.effective_orientations();
        let kernels = orientations.iter().map(|&t| build_gabor_kernel(config, t)).collect();
        Ok(Self {
            kernels,
            orientations,
            lambda_px: config.lambda_px()?,
        })
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    pub fn orientations(&self) -> &[f64] {
        &self.orientations
    }

    pub fn lambda_px(&self) -> usize {
        self.lambda_px
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    /// Index of the plane whose orientation (mod π) is closest to `theta`.
    pub fn nearest_orientation(&self, theta: f64) -> usize {
        let dist = |a: f64| {
            let d = (a - theta).rem_euclid(PI);
            d.min(PI - d)
        };
        let mut best = 0;
        for (i, &t) in self.orientations.iter().enumerate() {
            if dist(t) < dist(self.orientations[best]) - 1e-12 {
                best = i;
            }
        }
        best
    }
}

/// Half-rectified "same"-size convolution of `image` with every kernel.
pub fn gabor_layer(image: &GrayImage, bank: &GaborBank) -> FeatureStack {
    let planes: Vec<Vec<f64>> = bank
        .kernels
        .par_iter()
        .map(|k| {
            let mut plane = convolve_replicate(image, k);
            plane.iter_mut().for_each(|v| *v = v.max(0.0));
            plane
        })
        .collect();
    FeatureStack::from_planes(image.height(), image.width(), planes)
}

/// Convolution with replicate-edge padding.
///
/// Every kernel here has zero DC, so the sum is taken over intensities
/// relative to the output pixel. Flat regions then give exactly zero instead
/// of round-off residue from the mean subtraction.
pub fn convolve_replicate(image: &GrayImage, kernel: &Kernel) -> Vec<f64> {
    let (h, w) = (image.height(), image.width());
    let r = kernel.radius();
    let k = kernel.size();
    let pw = w + 2 * r;
    let src = image.data();
    let mut padded = Vec::with_capacity((h + 2 * r) * pw);
    for py in 0..h + 2 * r {
        let y = py.saturating_sub(r).min(h - 1);
        for px in 0..pw {
            let x = px.saturating_sub(r).min(w - 1);
            padded.push(src[y * w + x]);
        }
    }
    // Correlating with the flipped kernel is convolution.
    let flipped: Vec<f64> = kernel.data().iter().rev().copied().collect();
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let centre = src[y * w + x];
            let mut acc = 0.0;
            for ki in 0..k {
                let row = &padded[(y + ki) * pw + x..(y + ki) * pw + x + k];
                let krow = &flipped[ki * k..(ki + 1) * k];
                for (kv, pv) in krow.iter().zip(row) {
                    acc += kv * (pv - centre);
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}
