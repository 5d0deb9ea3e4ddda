//! Synthetic stimuli: Gabor patches, line segments, and the fixtures used by
//! the detector tests.
//!
//! Coordinates are `(row, col)` in image pixels. Orientation follows the
//! Gabor bank: `θ = 0` is horizontal, positive angles turn counter-clockwise
//! on screen.

pub mod experiments;
pub mod fixtures;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::GrayImage;
use crate::gabor::{gabor_value, SIGMA_PER_KERNEL};

/// Mid-gray background (127 of 255).
pub const GRAY_BACKGROUND: f64 = 127.0 / 255.0;

/// Contrast of a stimulus against its background, on 8-bit intensities.
pub fn contrast_8bit(stimulus: u8, background: u8) -> f64 {
    (f64::from(stimulus) - f64::from(background)).abs() / 255.0
}

/// Image coordinate that lands on the centre unit of the pooled grid, so
/// stimuli placed there are read out by `central_readout`.
pub fn registered_centre(n: usize, stride: usize) -> usize {
    stride * ((n / stride) / 2) + (stride - 1) / 2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ElementKind {
    /// Gabor patch of side `size` with wavelength `lambda` (pixels).
    GaborPatch { size: usize, lambda: f64 },
    /// Bar of given length and thickness.
    LineSegment { length: f64, thickness: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub kind: ElementKind,
    /// `(row, col)` of the element centre.
    pub center: (f64, f64),
    pub orientation: f64,
    /// Contrast in `[0, 1]`; patches add `contrast · G / max|G|` to the background,
    /// segments set `background + contrast`.
    pub contrast: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusSpec {
    pub height: usize,
    pub width: usize,
    pub background: f64,
    pub elements: Vec<Element>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stimulus {
    pub image: GrayImage,
    /// Pixels whose summed intensity left `[0, 1]` and were clipped.
    pub clipped_pixels: usize,
}

impl StimulusSpec {
    pub fn new(height: usize, width: usize, background: f64) -> Self {
        Self {
            height,
            width,
            background,
            elements: Vec::new(),
        }
    }

    pub fn with(mut self, element: Element) -> Self {
        self.elements.push(element);
        self
    }

    fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.height == 0 || self.width == 0 {
            errs.push("stimulus canvas is empty".to_string());
        }
        if !(0.0..=1.0).contains(&self.background) {
            errs.push(format!("background {} outside [0, 1]", self.background));
        }
        for (i, e) in self.elements.iter().enumerate() {
            let (r, c) = e.center;
            if !(r >= 0.0 && c >= 0.0 && r < self.height as f64 && c < self.width as f64) {
                errs.push(format!("element {i} centre ({r}, {c}) outside canvas"));
            }
            if !(0.0..=1.0).contains(&e.contrast) {
                errs.push(format!("element {i} contrast {} outside [0, 1]", e.contrast));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

/// Rasterizes every element additively over the background.
pub fn render(spec: &StimulusSpec) -> Result<Stimulus> {
    spec.validate()?;
    let (h, w) = (spec.height, spec.width);
    let mut acc = vec![spec.background; h * w];
    for e in &spec.elements {
        match e.kind {
            ElementKind::GaborPatch { size, lambda } => stamp_patch(&mut acc, h, w, e, size, lambda),
            ElementKind::LineSegment { length, thickness } => stamp_segment(&mut acc, h, w, e, length, thickness),
        }
    }
    let clipped_pixels = acc.iter().filter(|v| **v < 0.0 || **v > 1.0).count();
    let data = acc.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Ok(Stimulus {
        image: GrayImage::new(h, w, data)?,
        clipped_pixels,
    })
}

fn stamp_patch(acc: &mut [f64], h: usize, w: usize, e: &Element, size: usize, lambda: f64) {
    let half = (size / 2) as isize;
    let sigma = SIGMA_PER_KERNEL * size as f64;
    let (cr, cc) = (e.center.0.round() as isize, e.center.1.round() as isize);
    for dr in -half..=half {
        for dc in -half..=half {
            let (y, x) = (cr + dr, cc + dc);
            if y < 0 || x < 0 || y >= h as isize || x >= w as isize {
                continue;
            }
            // Peak of the raw Gabor is 1 at the centre.
            let g = gabor_value(dr as f64, dc as f64, e.orientation, 1.0 / lambda, 0.0, sigma, sigma);
            acc[y as usize * w + x as usize] += e.contrast * g;
        }
    }
}

fn stamp_segment(acc: &mut [f64], h: usize, w: usize, e: &Element, length: f64, thickness: f64) {
    let (s, c) = e.orientation.sin_cos();
    let reach = (length.max(thickness) / 2.0).ceil() as isize + 1;
    let (cr, cc) = e.center;
    let (r0, c0) = (cr.round() as isize, cc.round() as isize);
    for y in (r0 - reach).max(0)..(r0 + reach + 1).min(h as isize) {
        for x in (c0 - reach).max(0)..(c0 + reach + 1).min(w as isize) {
            let (dy, dx) = (y as f64 - cr, x as f64 - cc);
            let along = -dy * s + dx * c;
            let across = dy * c + dx * s;
            if along.abs() <= (length - 1.0) / 2.0 + 1e-9 && across.abs() <= (thickness - 1.0) / 2.0 + 1e-9 {
                acc[y as usize * w + x as usize] = acc[y as usize * w + x as usize].max(0.0) + e.contrast;
            }
        }
    }
}

/// Central segment of a line drawn at a different contrast.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub length: usize,
    pub contrast: f64,
}

/// Horizontal line on black, centred on the pooled grid's centre unit.
///
/// The line covers `length` columns and `thickness` rows. With `gap`, the
/// middle `gap.length` columns use `gap.contrast` and the rest (the flankers)
/// keep `contrast`.
pub fn line_stimulus(
    height: usize,
    width: usize,
    stride: usize,
    length: usize,
    contrast: f64,
    gap: Option<Gap>,
    thickness: usize,
) -> Result<GrayImage> {
    let mut errs = Vec::new();
    if length > width {
        errs.push(format!("line length {length} exceeds canvas width {width}"));
    }
    if thickness == 0 || thickness > height {
        errs.push(format!("line thickness {thickness} invalid for canvas height {height}"));
    }
    for c in std::iter::once(contrast).chain(gap.map(|g| g.contrast)) {
        if !(0.0..=1.0).contains(&c) {
            errs.push(format!("contrast {c} outside [0, 1]"));
        }
    }
    if let Some(g) = gap {
        if g.length > length {
            errs.push(format!("gap {} longer than line {length}", g.length));
        }
    }
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let (cy, cx) = (registered_centre(height, stride), registered_centre(width, stride));
    let top = cy.saturating_sub(thickness / 2).min(height - thickness);
    let left = cx.saturating_sub(length / 2).min(width - length);
    let gap_range = gap.map(|g| {
        let gl = cx.saturating_sub(g.length / 2);
        (gl..gl + g.length, g.contrast)
    });
    GrayImage::from_fn(height, width, |y, x| {
        if y < top || y >= top + thickness || x < left || x >= left + length {
            return 0.0;
        }
        match &gap_range {
            Some((r, c)) if r.contains(&x) => *c,
            _ => contrast,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contrast_convention() {
        assert_eq!(contrast_8bit(127, 0), 127.0 / 255.0);
        assert!((contrast_8bit(127, 0) - 0.498).abs() < 1e-3);
        assert_eq!(contrast_8bit(0, 127), contrast_8bit(127, 0));
    }

    #[test]
    fn zero_contrast_patch_is_background() {
        let spec = StimulusSpec::new(64, 64, GRAY_BACKGROUND).with(Element {
            kind: ElementKind::GaborPatch { size: 11, lambda: 5.0 },
            center: (32.0, 32.0),
            orientation: 0.4,
            contrast: 0.0,
        });
        let s = render(&spec).unwrap();
        assert!(s.image.data().iter().all(|&v| v == GRAY_BACKGROUND));
        assert_eq!(s.clipped_pixels, 0);
    }

    #[test]
    fn patch_peak_and_clipping_metadata() {
        let mut spec = StimulusSpec::new(40, 40, GRAY_BACKGROUND);
        for _ in 0..2 {
            spec = spec.with(Element {
                kind: ElementKind::GaborPatch { size: 11, lambda: 5.0 },
                center: (20.0, 20.0),
                orientation: 0.0,
                contrast: 0.5,
            });
        }
        let s = render(&spec).unwrap();
        // Two overlapping patches at 0.5 push the centre to 1.498.
        assert!(s.clipped_pixels > 0);
        assert_eq!(s.image.get(20, 20), 1.0);
    }

    #[test]
    fn element_outside_canvas_rejected() {
        let spec = StimulusSpec::new(10, 10, 0.0).with(Element {
            kind: ElementKind::LineSegment {
                length: 3.0,
                thickness: 1.0,
            },
            center: (12.0, 2.0),
            orientation: 0.0,
            contrast: 0.5,
        });
        assert!(render(&spec).is_err());
    }

    #[test]
    fn degenerate_gap_is_plain_line() {
        let plain = line_stimulus(64, 320, 3, 200, 0.4, None, 3).unwrap();
        let gapped = line_stimulus(
            64,
            320,
            3,
            200,
            0.4,
            Some(Gap {
                length: 30,
                contrast: 0.4,
            }),
            3,
        )
        .unwrap();
        assert_eq!(plain, gapped);
    }

    #[test]
    fn line_geometry() {
        let img = line_stimulus(64, 320, 3, 20, 0.5, None, 3).unwrap();
        let lit: Vec<(usize, usize)> = (0..64)
            .flat_map(|y| (0..320).map(move |x| (y, x)))
            .filter(|&(y, x)| img.get(y, x) > 0.0)
            .collect();
        assert_eq!(lit.len(), 60);
        let cy = registered_centre(64, 3);
        let cx = registered_centre(320, 3);
        assert_eq!((cy, cx), (31, 160));
        assert!(lit.iter().all(|&(y, _)| (cy - 1..=cy + 1).contains(&y)));
        let xs: Vec<usize> = lit.iter().map(|p| p.1).collect();
        assert_eq!(*xs.iter().min().unwrap(), 150);
        assert_eq!(*xs.iter().max().unwrap(), 169);
        assert!(line_stimulus(64, 320, 3, 400, 0.5, None, 3).is_err());
    }

    #[test]
    fn gap_segment_contrast() {
        let img = line_stimulus(
            64,
            320,
            3,
            280,
            127.0 / 255.0,
            Some(Gap {
                length: 30,
                contrast: 0.2,
            }),
            3,
        )
        .unwrap();
        assert_eq!(img.get(31, 160), 0.2);
        assert_eq!(img.get(31, 30), 127.0 / 255.0);
    }

    #[test]
    fn segment_rendering_matches_line_pixels() {
        let spec = StimulusSpec::new(21, 41, 0.0).with(Element {
            kind: ElementKind::LineSegment {
                length: 11.0,
                thickness: 3.0,
            },
            center: (10.0, 20.0),
            orientation: 0.0,
            contrast: 0.7,
        });
        let img = render(&spec).unwrap().image;
        let lit = img.data().iter().filter(|v| **v > 0.0).count();
        assert_eq!(lit, 33);
        assert_eq!(img.get(9, 15), 0.7);
        assert_eq!(img.get(12, 20), 0.0);
    }
}
