//! Sweeps over synthetic stimuli, read out at the central unit.
//!
//! Every sweep point is an independent model run; points run in parallel
//! and are collected in grid order.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{line_stimulus, registered_centre, render, Element, ElementKind, Gap, StimulusSpec, GRAY_BACKGROUND};
use crate::config::Model;
use crate::error::{Error, Result};
use crate::field::GrayImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Side of the square canvas for Gabor-patch setups.
    pub patch_canvas: usize,
    pub line_height: usize,
    pub line_width: usize,
    pub line_thickness: usize,
    /// Patch side in pixels; the Gabor kernel size when absent.
    pub patch_size: Option<usize>,
    pub target_contrast: f64,
    pub flanker_contrast: f64,
    /// Target–flanker distance (in λ) for the basic and rotation setups.
    pub flanker_distance: f64,
    /// Length of the variable-contrast middle segment in the gap setup.
    pub gap_length: usize,
    /// Total line length for the gap and full-line setups.
    pub line_length: usize,
    /// Flanker intensity in the gap setup.
    pub gap_flanker_contrast: f64,
    /// Line contrast in the length sweep.
    pub length_contrast: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            patch_canvas: 256,
            line_height: 64,
            line_width: 320,
            line_thickness: 3,
            patch_size: None,
            target_contrast: 0.5,
            flanker_contrast: 0.5,
            flanker_distance: 8.0,
            gap_length: 30,
            line_length: 280,
            gap_flanker_contrast: 127.0 / 255.0,
            length_contrast: 0.5,
        }
    }
}

/// Left-to-right responses along the central row, with and without the
/// collinearity layer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceProfile {
    pub at: f64,
    pub enhanced: Vec<f64>,
    pub control: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    /// Name of the independent variable (CSV header).
    pub variable: String,
    pub values: Vec<f64>,
    /// Central collinearity-layer response.
    pub enhanced: Vec<f64>,
    /// Central pooled response: the same pipeline without collinearity.
    pub control: Vec<f64>,
    /// Additional named series aligned with `values`.
    pub extra: Vec<(String, Vec<f64>)>,
    pub profiles: Vec<SliceProfile>,
}

impl SweepResult {
    /// `enhanced / control` per point; `NaN` where the control is zero.
    pub fn ratio(&self) -> Vec<f64> {
        self.enhanced
            .iter()
            .zip(&self.control)
            .map(|(e, c)| if *c > 0.0 { e / c } else { f64::NAN })
            .collect()
    }

    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.extra.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    /// One row per grid point: variable, enhanced, control, ratio, extras.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let mut header = vec![
            self.variable.clone(),
            "enhanced".into(),
            "control".into(),
            "ratio".into(),
        ];
        header.extend(self.extra.iter().map(|(n, _)| n.clone()));
        w.write_record(&header)?;
        let ratio = self.ratio();
        for i in 0..self.values.len() {
            let mut row = vec![
                fmt(self.values[i]),
                fmt(self.enhanced[i]),
                fmt(self.control[i]),
                fmt(ratio[i]),
            ];
            row.extend(self.extra.iter().map(|(_, v)| fmt(v[i])));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

impl SliceProfile {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["x", "enhanced", "control"])?;
        for (i, (e, c)) in self.enhanced.iter().zip(&self.control).enumerate() {
            w.write_record([i.to_string(), fmt(*e), fmt(*c)])?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.10e}")
    }
}

/// Collinear and orthogonal flanker conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BasicComparison {
    pub collinear: f64,
    pub orthogonal: f64,
    pub collinear_control: f64,
    pub orthogonal_control: f64,
}

/// Central readout of one model run.
#[derive(Debug, Clone, PartialEq)]
pub struct Readout {
    pub enhanced: f64,
    pub control: f64,
    pub profile: SliceProfile,
}

/// Runs the model and reads the central unit of the plane nearest `theta`.
pub fn read_centre(model: &Model, image: &GrayImage, theta: f64, at: f64) -> Result<Readout> {
    let out = model.run(image)?;
    let l = model.bank().nearest_orientation(theta);
    let row = out.col.height() / 2;
    Ok(Readout {
        enhanced: out.col.central_readout(l)?,
        control: out.pooled.central_readout(l)?,
        profile: SliceProfile {
            at,
            enhanced: out.col.slice_profile(row, l)?,
            control: out.pooled.slice_profile(row, l)?,
        },
    })
}

fn patch(model: &Model, cfg: &ExperimentConfig, row: f64, col: f64, theta: f64, contrast: f64) -> Element {
    Element {
        kind: ElementKind::GaborPatch {
            size: cfg.patch_size.unwrap_or(model.config().gabor.kernel_size),
            lambda: model.bank().lambda_px() as f64,
        },
        center: (row, col),
        orientation: theta,
        contrast,
    }
}

/// Target patch at the registered centre with two horizontal flankers at
/// `±distance` wavelengths, rotated by `flanker_theta`.
pub fn triplet(model: &Model, cfg: &ExperimentConfig, distance: f64, flanker_theta: f64) -> Result<GrayImage> {
    let n = cfg.patch_canvas;
    let p = model.stride();
    let (cy, cx) = (registered_centre(n, p) as f64, registered_centre(n, p) as f64);
    let offset = (distance * model.bank().lambda_px() as f64).round();
    let spec = StimulusSpec::new(n, n, GRAY_BACKGROUND)
        .with(patch(model, cfg, cy, cx, 0.0, cfg.target_contrast))
        .with(patch(model, cfg, cy, cx - offset, flanker_theta, cfg.flanker_contrast))
        .with(patch(model, cfg, cy, cx + offset, flanker_theta, cfg.flanker_contrast));
    Ok(render(&spec)?.image)
}

pub fn run_basic_comparison(model: &Model, cfg: &ExperimentConfig) -> Result<BasicComparison> {
    let runs: Vec<Result<Readout>> = [0.0, std::f64::consts::FRAC_PI_2]
        .par_iter()
        .map(|&ft| read_centre(model, &triplet(model, cfg, cfg.flanker_distance, ft)?, 0.0, ft))
        .collect();
    let mut runs = runs.into_iter();
    let col = runs.next().unwrap()?;
    let orth = runs.next().unwrap()?;
    Ok(BasicComparison {
        collinear: col.enhanced,
        orthogonal: orth.enhanced,
        collinear_control: col.control,
        orthogonal_control: orth.control,
    })
}

fn sweep<F>(variable: &str, grid: &[f64], build: F, model: &Model) -> Result<SweepResult>
where
    F: Fn(f64) -> Result<GrayImage> + Sync,
{
    let runs: Vec<Readout> = grid
        .par_iter()
        .map(|&v| read_centre(model, &build(v)?, 0.0, v))
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        variable: variable.into(),
        values: grid.to_vec(),
        enhanced: runs.iter().map(|r| r.enhanced).collect(),
        control: runs.iter().map(|r| r.control).collect(),
        extra: Vec::new(),
        profiles: runs.into_iter().map(|r| r.profile).collect(),
    })
}

/// Middle segment of varying contrast between fixed-contrast flankers.
pub fn contrast_sweep_gap(model: &Model, cfg: &ExperimentConfig, contrasts: &[f64]) -> Result<SweepResult> {
    sweep(
        "contrast",
        contrasts,
        |c| {
            line_stimulus(
                cfg.line_height,
                cfg.line_width,
                model.stride(),
                cfg.line_length,
                cfg.gap_flanker_contrast,
                Some(Gap {
                    length: cfg.gap_length,
                    contrast: c,
                }),
                cfg.line_thickness,
            )
        },
        model,
    )
}

/// Uniform full line of varying contrast.
pub fn contrast_sweep_line(model: &Model, cfg: &ExperimentConfig, contrasts: &[f64]) -> Result<SweepResult> {
    sweep(
        "contrast",
        contrasts,
        |c| {
            line_stimulus(
                cfg.line_height,
                cfg.line_width,
                model.stride(),
                cfg.line_length,
                c,
                None,
                cfg.line_thickness,
            )
        },
        model,
    )
}

/// Line of varying length (pixels) at fixed contrast.
pub fn length_sweep(model: &Model, cfg: &ExperimentConfig, lengths: &[f64]) -> Result<SweepResult> {
    sweep(
        "length_px",
        lengths,
        |len| {
            line_stimulus(
                cfg.line_height,
                cfg.line_width,
                model.stride(),
                len.round() as usize,
                cfg.length_contrast,
                None,
                cfg.line_thickness,
            )
        },
        model,
    )
}

/// Collinear Gabor-patch triplet with the flanker distance (in λ) swept.
pub fn flanker_distance_sweep(model: &Model, cfg: &ExperimentConfig, distances: &[f64]) -> Result<SweepResult> {
    let mut r = sweep("distance_lambda", distances, |d| triplet(model, cfg, d, 0.0), model)?;
    let ratio = r.ratio();
    r.extra.push(("facilitation".into(), ratio));
    Ok(r)
}

/// Flanker orientation swept (degrees) around the fixed horizontal target.
///
/// Besides the raw responses, reports the response normalized to its peak
/// and the facilitation `enhanced / control − 1` normalized to its peak.
pub fn rotation_tuning(model: &Model, cfg: &ExperimentConfig, offsets_deg: &[f64]) -> Result<SweepResult> {
    let mut r = sweep(
        "flanker_offset_deg",
        offsets_deg,
        |deg| {
            triplet(
                model,
                cfg,
                cfg.flanker_distance,
                deg.to_radians().rem_euclid(2.0 * std::f64::consts::PI),
            )
        },
        model,
    )?;
    let peak = r.enhanced.iter().copied().fold(0.0, f64::max);
    let normalized: Vec<f64> = r
        .enhanced
        .iter()
        .map(|v| if peak > 0.0 { v / peak } else { 0.0 })
        .collect();
    let fac: Vec<f64> = r
        .ratio()
        .iter()
        .map(|q| if q.is_nan() { 0.0 } else { q - 1.0 })
        .collect();
    let fac_peak = fac.iter().copied().fold(0.0, f64::max);
    let fac_norm: Vec<f64> = fac
        .iter()
        .map(|v| if fac_peak > 0.0 { v / fac_peak } else { 0.0 })
        .collect();
    r.extra.push(("normalized_response".into(), normalized));
    r.extra.push(("facilitation".into(), fac));
    r.extra.push(("normalized_facilitation".into(), fac_norm));
    Ok(r)
}

/// Smallest |x| at which a curve peaked at `x = 0` falls below half its
/// peak, linearly interpolated between grid points on the positive side.
pub fn half_maximum_crossing(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let peak = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let half = peak / 2.0;
    let mut pts: Vec<(f64, f64)> = xs
        .iter()
        .copied()
        .zip(ys.iter().copied())
        .filter(|(x, _)| *x >= 0.0)
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.windows(2).find_map(|w| {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        (y0 >= half && y1 < half).then(|| x0 + (y0 - half) / (y0 - y1) * (x1 - x0))
    })
}
