//! Lateral collinearity connectivity and the recurrent enhancement layer.
//!
//! Each orientation plane owns a connectivity kernel: a band along the
//! plane's line direction that starts `inner_start` wavelengths away from
//! the receiving unit, stays flat up to `plateau_end`, ramps linearly to
//! zero at `outer_end`, and is `2 · half_width` wavelengths wide. Planes are
//! not coupled to each other, so the rate dynamics run plane by plane.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FeatureStack;

/// Slack for comparisons against band edges, so axis-aligned angles land
/// exactly on the sampling grid despite `sin(π)` round-off.
const EDGE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollinearityKernelConfig {
    /// Distance (in λ) where connections start.
    pub inner_start: f64,
    /// Distance (in λ) where the flat part ends and the ramp begins.
    pub plateau_end: f64,
    /// Distance (in λ) where the ramp reaches zero.
    pub outer_end: f64,
    /// Half the band width (in λ).
    pub half_width: f64,
}

impl Default for CollinearityKernelConfig {
    fn default() -> Self {
        Self {
            inner_start: 5.0,
            plateau_end: 10.0,
            outer_end: 14.0,
            half_width: 1.0,
        }
    }
}

impl CollinearityKernelConfig {
    pub fn collect_errors(&self, errs: &mut Vec<String>) {
        let ok = self.inner_start > 0.0
            && self.inner_start <= self.plateau_end
            && self.plateau_end <= self.outer_end
            && self.outer_end.is_finite();
        if !ok {
            errs.push(format!(
                "kernel: need 0 < inner_start ({}) <= plateau_end ({}) <= outer_end ({})",
                self.inner_start, self.plateau_end, self.outer_end
            ));
        }
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            errs.push(format!("kernel.half_width {} must be > 0", self.half_width));
        }
    }

    /// Weight profile along the line at distance `d` (pixels) for wavelength `lambda`.
    pub fn along_profile(&self, d: f64, lambda: f64) -> f64 {
        let d = d.abs();
        let start = self.inner_start * lambda;
        let plateau = self.plateau_end * lambda;
        let end = self.outer_end * lambda;
        if d < start - EDGE_EPS || d >= end - EDGE_EPS {
            0.0
        } else if d <= plateau + EDGE_EPS {
            1.0
        } else {
            (end - d) / (end - plateau)
        }
    }
}

/// Unnormalized connection weight from a unit at offset `(dr, dc)` (rows,
/// columns) for orientation `theta`.
pub fn connection_weight(dr: f64, dc: f64, theta: f64, cfg: &CollinearityKernelConfig, lambda: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let along = -dr * s + dc * c;
    let across = dr * c + dc * s;
    if across.abs() > cfg.half_width * lambda + EDGE_EPS {
        return 0.0;
    }
    cfg.along_profile(along, lambda)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollinearityKernel {
    theta: f64,
    radius: usize,
    dense: Vec<f64>,
    /// Nonzero entries as `(row offset, col offset, weight)`, row-major.
    #[serde(skip)]
    taps: Vec<(isize, isize, f64)>,
}

impl CollinearityKernel {
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Dense `side × side` weights, row-major.
    pub fn dense(&self) -> &[f64] {
        &self.dense
    }

    pub fn taps(&self) -> &[(isize, isize, f64)] {
        &self.taps
    }

    /// Weight at offset `(dr, dc)` from the centre.
    pub fn weight(&self, dr: isize, dc: isize) -> f64 {
        let r = self.radius as isize;
        if dr.abs() > r || dc.abs() > r {
            return 0.0;
        }
        self.dense[((dr + r) as usize) * self.side() + (dc + r) as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollinearityKernelSet {
    kernels: Vec<CollinearityKernel>,
    lambda_px: f64,
}

impl CollinearityKernelSet {
    pub fn kernels(&self) -> &[CollinearityKernel] {
        &self.kernels
    }

    pub fn lambda_px(&self) -> f64 {
        self.lambda_px
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }
}

/// Samples one kernel per orientation on a square grid of side
/// `2·⌈outer_end·λ⌉ + 1` and normalizes each to unit sum. `lambda_px` is
/// the wavelength measured on the grid the kernels will be applied to.
pub fn build_collinearity_kernels(
    cfg: &CollinearityKernelConfig,
    lambda_px: f64,
    orientations: &[f64],
) -> Result<CollinearityKernelSet> {
    let mut errs = Vec::new();
    cfg.collect_errors(&mut errs);
    if !(lambda_px > 0.0 && lambda_px.is_finite()) {
        errs.push(format!("kernel lambda {lambda_px} must be > 0"));
    }
    if orientations.is_empty() {
        errs.push("kernel: no orientations".into());
    }
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let radius = (cfg.outer_end * lambda_px - EDGE_EPS).ceil().max(1.0) as usize;
    let side = 2 * radius + 1;
    let r = radius as isize;
    let kernels = orientations
        .iter()
        .map(|&theta| {
            let mut dense = Vec::with_capacity(side * side);
            for dr in -r..=r {
                for dc in -r..=r {
                    dense.push(connection_weight(dr as f64, dc as f64, theta, cfg, lambda_px));
                }
            }
            let sum: f64 = dense.iter().sum();
            if sum <= 0.0 {
                return Err(Error::config(format!(
                    "collinearity kernel for angle {theta} is empty at lambda {lambda_px}"
                )));
            }
            dense.iter_mut().for_each(|v| *v /= sum);
            let taps = dense
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != 0.0)
                .map(|(i, &w)| ((i / side) as isize - r, (i % side) as isize - r, w))
                .collect();
            Ok(CollinearityKernel {
                theta,
                radius,
                dense,
                taps,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CollinearityKernelSet { kernels, lambda_px })
}

/// Zero-padded convolution of every plane with its kernel.
pub fn collinearity_influence(rates: &FeatureStack, kernels: &CollinearityKernelSet) -> Result<FeatureStack> {
    check_planes(rates, kernels)?;
    let (h, w) = (rates.height(), rates.width());
    let planes = (0..rates.orientations())
        .into_par_iter()
        .map(|l| {
            let plane = rates.plane(l);
            let taps = kernels.kernels[l].taps();
            (0..h * w).map(|i| influence_at(plane, h, w, taps, i)).collect()
        })
        .collect();
    Ok(FeatureStack::from_planes(h, w, planes))
}

#[inline]
fn influence_at(plane: &[f64], h: usize, w: usize, taps: &[(isize, isize, f64)], idx: usize) -> f64 {
    let (y, x) = ((idx / w) as isize, (idx % w) as isize);
    let mut acc = 0.0;
    for &(dr, dc, wt) in taps {
        let (sy, sx) = (y - dr, x - dc);
        if sy >= 0 && sx >= 0 && (sy as usize) < h && (sx as usize) < w {
            acc += wt * plane[sy as usize * w + sx as usize];
        }
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsConfig {
    /// Gain `w_col` on the lateral influence.
    pub w_col: f64,
    /// Time constant in milliseconds.
    pub tau_ms: f64,
    /// Euler step in milliseconds.
    pub dt_ms: f64,
    /// Convergence tolerance on the stationarity residual.
    pub epsilon: f64,
    pub max_steps: usize,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            w_col: 2.0,
            tau_ms: 15.0,
            dt_ms: 1.0,
            epsilon: 1e-4,
            max_steps: 1000,
        }
    }
}

impl DynamicsConfig {
    pub fn collect_errors(&self, errs: &mut Vec<String>) {
        if !(self.dt_ms > 0.0 && self.dt_ms <= self.tau_ms) {
            errs.push(format!(
                "dynamics: need 0 < dt_ms ({}) <= tau_ms ({})",
                self.dt_ms, self.tau_ms
            ));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            errs.push(format!("dynamics.epsilon {} must be > 0", self.epsilon));
        }
        if self.max_steps < 1 {
            errs.push("dynamics.max_steps must be >= 1".into());
        }
        if !(self.w_col >= 0.0 && self.w_col.is_finite()) {
            errs.push(format!("dynamics.w_col {} must be finite and >= 0", self.w_col));
        }
    }
}

/// Converged collinearity rates plus solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Convergence {
    pub rates: FeatureStack,
    /// Largest Euler step count over planes (including the final check).
    pub steps: usize,
    /// `‖r − r_pool ⊙ (1 + w_col · W⊛r)‖∞` of the returned rates.
    pub residual: f64,
}

/// Integrates `τ dr/dt = −r + r_pool ⊙ (1 + w_col · (W ⊛ r))` with forward
/// Euler from `r = r_pool` until the stationarity residual drops below
/// `epsilon`.
///
/// Units with `r_pool = 0` are pinned at zero by the multiplicative drive,
/// so only active units are integrated. Each plane is summed sequentially
/// in a fixed tap order; results do not depend on the thread count.
pub fn collinearity_layer(
    pooled: &FeatureStack,
    kernels: &CollinearityKernelSet,
    dynamics: &DynamicsConfig,
) -> Result<Convergence> {
    check_planes(pooled, kernels)?;
    let mut errs = Vec::new();
    dynamics.collect_errors(&mut errs);
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let (h, w) = (pooled.height(), pooled.width());
    let results: Vec<PlaneRun> = (0..pooled.orientations())
        .into_par_iter()
        .map(|l| integrate_plane(pooled.plane(l), h, w, kernels.kernels[l].taps(), dynamics))
        .collect();

    let steps = results.iter().map(|r| r.steps).max().unwrap_or(0);
    let residual = results.iter().map(|r| r.residual).fold(0.0, f64::max);
    if results.iter().any(|r| !r.converged) {
        return Err(Error::NotConverged { steps, residual });
    }
    Ok(Convergence {
        rates: FeatureStack::from_planes(h, w, results.into_iter().map(|r| r.rates).collect()),
        steps,
        residual,
    })
}

struct PlaneRun {
    rates: Vec<f64>,
    steps: usize,
    residual: f64,
    converged: bool,
}

fn integrate_plane(pooled: &[f64], h: usize, w: usize, taps: &[(isize, isize, f64)], dy: &DynamicsConfig) -> PlaneRun {
    let active: Vec<usize> = (0..pooled.len()).filter(|&i| pooled[i] > 0.0).collect();
    let mut rates = pooled.to_vec();
    let mut target = vec![0.0; active.len()];
    let rate = dy.dt_ms / dy.tau_ms;
    let mut residual = 0.0;
    for step in 1..=dy.max_steps {
        residual = 0.0f64;
        for (t, &i) in target.iter_mut().zip(&active) {
            *t = pooled[i] * (1.0 + dy.w_col * influence_at(&rates, h, w, taps, i));
            residual = residual.max((*t - rates[i]).abs());
        }
        if residual < dy.epsilon {
            return PlaneRun {
                rates,
                steps: step,
                residual,
                converged: true,
            };
        }
        for (t, &i) in target.iter().zip(&active) {
            rates[i] = (rates[i] + rate * (t - rates[i])).max(0.0);
        }
    }
    PlaneRun {
        rates,
        steps: dy.max_steps,
        residual,
        converged: false,
    }
}

/// `‖r − r_pool ⊙ (1 + w_col · W⊛r)‖∞`, evaluated densely.
pub fn stationarity_residual(
    rates: &FeatureStack,
    pooled: &FeatureStack,
    kernels: &CollinearityKernelSet,
    w_col: f64,
) -> Result<f64> {
    if !rates.same_shape(pooled) {
        return Err(Error::Shape("rates and pooled stacks differ".into()));
    }
    let a = collinearity_influence(rates, kernels)?;
    Ok(rates
        .data()
        .iter()
        .zip(pooled.data())
        .zip(a.data())
        .map(|((r, p), a)| (r - p * (1.0 + w_col * a)).abs())
        .fold(0.0, f64::max))
}

fn check_planes(stack: &FeatureStack, kernels: &CollinearityKernelSet) -> Result<()> {
    if stack.orientations() != kernels.len() {
        return Err(Error::config(format!(
            "stack has {} orientation planes but {} collinearity kernels",
            stack.orientations(),
            kernels.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn set(lambda: f64, thetas: &[f64]) -> CollinearityKernelSet {
        build_collinearity_kernels(&CollinearityKernelConfig::default(), lambda, thetas).unwrap()
    }

    #[test]
    fn horizontal_band_extent() {
        let ks = set(5.0, &[0.0]);
        let k = &ks.kernels()[0];
        assert_eq!(k.side(), 141);
        // Centre row: zero below 25 px, nonzero from 25 up to 69, zero at 70.
        for dc in 0..=70isize {
            let v = k.weight(0, dc);
            if (25..70).contains(&dc) {
                assert!(v > 0.0, "dc {dc}");
            } else {
                assert_eq!(v, 0.0, "dc {dc}");
            }
        }
        // Plateau is flat, ramp strictly decreasing.
        assert_eq!(k.weight(0, 25), k.weight(0, 50));
        assert!(k.weight(0, 51) < k.weight(0, 50));
        assert!(k.weight(0, 69) < k.weight(0, 60));
        // Width of 2 lambda: rows -5..=5 inclusive.
        assert!(k.weight(5, 30) > 0.0);
        assert_eq!(k.weight(6, 30), 0.0);
        assert_eq!(k.weight(0, 0), 0.0);
    }

    #[test]
    fn band_is_symmetric_in_both_directions() {
        for theta in [0.0, 0.4, 1.3, 2.9] {
            let ks = set(5.0, &[theta]);
            let k = &ks.kernels()[0];
            let r = k.radius() as isize;
            for dr in -r..=r {
                for dc in -r..=r {
                    assert_eq!(k.weight(dr, dc), k.weight(-dr, -dc));
                }
            }
        }
    }

    #[test]
    fn quarter_turn_transposes_kernel() {
        let ks = set(5.0, &[0.0, PI / 2.0]);
        let (k0, k90) = (&ks.kernels()[0], &ks.kernels()[1]);
        let r = k0.radius() as isize;
        for dr in -r..=r {
            for dc in -r..=r {
                assert!((k90.weight(dr, dc) - k0.weight(dc, dr)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn oblique_kernel_matches_rotated_coordinates() {
        // Oracle: rotate each offset back to the θ=0 frame and evaluate the
        // band profile there.
        let cfg = CollinearityKernelConfig::default();
        let theta = 0.61;
        let ks = set(2.0, &[theta]);
        let k = &ks.kernels()[0];
        let r = k.radius() as isize;
        let mut raw = Vec::new();
        for dr in -r..=r {
            for dc in -r..=r {
                let along = -(dr as f64) * theta.sin() + dc as f64 * theta.cos();
                let across = dr as f64 * theta.cos() + dc as f64 * theta.sin();
                let v = if across.abs() <= 2.0 {
                    cfg.along_profile(along, 2.0)
                } else {
                    0.0
                };
                raw.push(v);
            }
        }
        let sum: f64 = raw.iter().sum();
        for (a, b) in k.dense().iter().zip(&raw) {
            assert!((a - b / sum).abs() < 1e-15);
        }
    }

    #[test]
    fn kernels_sum_to_one_and_skip_centre() {
        let ks = set(5.0 / 3.0, &crate::gabor::default_orientations(8));
        for k in ks.kernels() {
            assert!((k.dense().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(k.dense().iter().all(|&v| v >= 0.0));
            assert_eq!(k.weight(0, 0), 0.0);
        }
    }

    #[test]
    fn influence_of_zero_is_zero() {
        let ks = set(1.0, &[0.0, 1.0]);
        let a = collinearity_influence(&FeatureStack::zeros(20, 30, 2), &ks).unwrap();
        assert!(a.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn impulse_response_is_kernel() {
        let ks = set(1.0, &[0.7]);
        let k = &ks.kernels()[0];
        let (h, w) = (41usize, 41usize);
        let mut data = vec![0.0; h * w];
        data[20 * w + 20] = 1.0;
        let a = collinearity_influence(&FeatureStack::new(h, w, 1, data).unwrap(), &ks).unwrap();
        for y in 0..h as isize {
            for x in 0..w as isize {
                // convolution: a(y,x) = k(y-20, x-20)
                assert_eq!(a.get(y as usize, x as usize, 0), k.weight(y - 20, x - 20));
            }
        }
    }

    #[test]
    fn plane_count_mismatch_is_config_error() {
        let ks = set(1.0, &[0.0]);
        assert!(matches!(
            collinearity_influence(&FeatureStack::zeros(5, 5, 2), &ks),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn zero_input_converges_in_one_step() {
        let ks = set(1.0, &[0.0, 1.0]);
        let out = collinearity_layer(&FeatureStack::zeros(10, 10, 2), &ks, &DynamicsConfig::default()).unwrap();
        assert_eq!(out.steps, 1);
        assert!(out.rates.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn isolated_element_relaxes_to_its_input() {
        // A single blob: nothing lies inside the 5..14 lambda band.
        let ks = set(2.0, &[0.0]);
        let (h, w) = (30usize, 30usize);
        let mut data = vec![0.0; h * w];
        for y in 14..17 {
            for x in 12..18 {
                data[y * w + x] = 0.6;
            }
        }
        let pooled = FeatureStack::new(h, w, 1, data).unwrap();
        let out = collinearity_layer(&pooled, &ks, &DynamicsConfig::default()).unwrap();
        assert_eq!(out.rates, pooled);
        let a = collinearity_influence(&pooled, &ks).unwrap();
        assert_eq!(a.get(15, 15, 0), 0.0);
    }

    #[test]
    fn non_convergence_reports_residual() {
        let ks = set(1.0, &[0.0]);
        let (h, w) = (5usize, 40usize);
        let pooled = FeatureStack::new(h, w, 1, vec![0.5; h * w]).unwrap();
        let dy = DynamicsConfig {
            max_steps: 3,
            ..DynamicsConfig::default()
        };
        match collinearity_layer(&pooled, &ks, &dy) {
            Err(Error::NotConverged { steps, residual }) => {
                assert_eq!(steps, 3);
                assert!(residual > dy.epsilon);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_dynamics_rejected() {
        let ks = set(1.0, &[0.0]);
        let dy = DynamicsConfig {
            dt_ms: 20.0,
            epsilon: 0.0,
            ..DynamicsConfig::default()
        };
        match collinearity_layer(&FeatureStack::zeros(4, 4, 1), &ks, &dy) {
            Err(Error::Config(e)) => assert_eq!(e.len(), 2),
            other => panic!("{other:?}"),
        }
    }
}
