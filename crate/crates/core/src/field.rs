//! Scalar fields shared by every layer.
//!
//! All three types store `f64` values row-major. A [`FeatureStack`] keeps one
//! contiguous plane per orientation, so per-orientation work can borrow a
//! plane slice directly.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::pooling::PoolingConfig;

/// Grayscale intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrayImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(height, width, data.len(), 1)?;
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::InvalidData(format!("image intensity {v} outside [0, 1]")));
        }
        Ok(Self { height, width, data })
    }

    /// Uniform image.
    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    /// Builds an image from a per-pixel closure; values are clamped to `[0, 1]`.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x).clamp(0.0, 1.0));
            }
        }
        Self::new(height, width, data)
    }

    /// Converts 8-bit samples (`v / 255`).
    pub fn from_u8(height: usize, width: usize, samples: &[u8]) -> Result<Self> {
        Self::new(height, width, samples.iter().map(|&v| f64::from(v) / 255.0).collect())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn to_map(&self) -> ScalarMap {
        ScalarMap {
            height: self.height,
            width: self.width,
            data: self.data.clone(),
        }
    }

    /// Copies out a rectangle; the rectangle must lie inside the image.
    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        if top + height > self.height || left + width > self.width || height == 0 || width == 0 {
            return Err(Error::Shape(format!(
                "crop {height}x{width}+{top}+{left} outside {}x{}",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(height * width);
        for y in top..top + height {
            data.extend_from_slice(&self.data[y * self.width + left..y * self.width + left + width]);
        }
        Ok(Self { height, width, data })
    }
}

/// Per-pixel scalars of arbitrary (finite) range.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalarMap {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ScalarMap {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(height, width, data.len(), 1)?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite map value".into()));
        }
        Ok(Self { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn same_shape(&self, other: &ScalarMap) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Elementwise transform; the closure must keep values finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarMap {
        ScalarMap {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination of two equally shaped maps.
    pub fn zip_with(&self, other: &ScalarMap, f: impl Fn(f64, f64) -> f64) -> Result<ScalarMap> {
        if !self.same_shape(other) {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        Ok(ScalarMap {
            height: self.height,
            width: self.width,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Affine rescale to `[0, 1]`. A constant map becomes all zeros.
    pub fn normalize_unit(&self) -> ScalarMap {
        let (lo, hi) = (self.min(), self.max());
        if hi.is_nan() || hi <= lo {
            return ScalarMap::zeros(self.height, self.width);
        }
        let span = hi - lo;
        self.map(|v| ((v - lo) / span).clamp(0.0, 1.0))
    }

    /// Interprets a `[0, 1]` map as an image, clamping stray values.
    pub fn to_image(&self) -> GrayImage {
        GrayImage {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        }
    }
}

/// Nonnegative firing rates, one plane per orientation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureStack {
    height: usize,
    width: usize,
    orientations: usize,
    data: Vec<f64>,
}

impl FeatureStack {
    /// Plane-major data: `data[l * height * width + y * width + x]`.
    pub fn new(height: usize, width: usize, orientations: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(height, width, data.len(), orientations)?;
        if orientations == 0 {
            return Err(Error::InvalidData("feature stack needs at least one plane".into()));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidData(format!(
                "firing rate {v} is not a finite nonnegative value"
            )));
        }
        Ok(Self {
            height,
            width,
            orientations,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, orientations: usize) -> Self {
        Self {
            height,
            width,
            orientations,
            data: vec![0.0; height * width * orientations],
        }
    }

    /// Assembles a stack from equally sized planes. Planes are trusted to be
    /// nonnegative; this is the layers' internal constructor.
    pub(crate) fn from_planes(height: usize, width: usize, planes: Vec<Vec<f64>>) -> Self {
        let orientations = planes.len();
        let mut data = Vec::with_capacity(height * width * orientations);
        for p in planes {
            debug_assert_eq!(p.len(), height * width);
            debug_assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0));
            data.extend(p);
        }
        Self {
            height,
            width,
            orientations,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn orientations(&self) -> usize {
        self.orientations
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn plane(&self, l: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[l * n..(l + 1) * n]
    }

    pub fn planes(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.plane_len())
    }

    pub fn get(&self, y: usize, x: usize, l: usize) -> f64 {
        self.data[l * self.plane_len() + y * self.width + x]
    }

    pub fn plane_map(&self, l: usize) -> Result<ScalarMap> {
        self.check_orientation(l)?;
        Ok(ScalarMap {
            height: self.height,
            width: self.width,
            data: self.plane(l).to_vec(),
        })
    }

    pub fn same_shape(&self, other: &FeatureStack) -> bool {
        self.height == other.height && self.width == other.width && self.orientations == other.orientations
    }

    /// Largest rate over all orientations at every pixel.
    pub fn max_over_orientations(&self) -> ScalarMap {
        let mut out = self.plane(0).to_vec();
        for plane in self.planes().skip(1) {
            for (o, &v) in out.iter_mut().zip(plane) {
                if v > *o {
                    *o = v;
                }
            }
        }
        ScalarMap {
            height: self.height,
            width: self.width,
            data: out,
        }
    }

    /// One row of one orientation plane, left to right.
    pub fn slice_profile(&self, row: usize, orientation: usize) -> Result<Vec<f64>> {
        self.check_orientation(orientation)?;
        if row >= self.height {
            return Err(Error::Range {
                what: "row",
                index: row,
                len: self.height,
            });
        }
        let start = row * self.width;
        Ok(self.plane(orientation)[start..start + self.width].to_vec())
    }

    /// Rate at `(floor(H/2), floor(W/2))` in the given plane.
    pub fn central_readout(&self, orientation: usize) -> Result<f64> {
        self.check_orientation(orientation)?;
        Ok(self.get(self.height / 2, self.width / 2, orientation))
    }

    fn check_orientation(&self, l: usize) -> Result<()> {
        if l >= self.orientations {
            return Err(Error::Range {
                what: "orientation",
                index: l,
                len: self.orientations,
            });
        }
        Ok(())
    }
}

/// Boolean pixel labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl LabelMask {
    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let data = (0..height * width).map(|i| f(i / width, i % width)).collect();
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, y: usize, x: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|v| **v).count()
    }

    /// Labels on the pooled grid: each pooled pixel takes the label of the
    /// image pixel at its sampling centre.
    pub fn pooled(&self, pooling: &PoolingConfig) -> LabelMask {
        let (h, w) = (pooling.output_len(self.height), pooling.output_len(self.width));
        let c = |j: usize| pooling.sample_centre(j);
        LabelMask::from_fn(h, w, |y, x| self.get(c(y), c(x)))
    }
}

pub fn max_over_orientations(stack: &FeatureStack) -> ScalarMap {
    stack.max_over_orientations()
}

pub fn normalize_unit(map: &ScalarMap) -> ScalarMap {
    map.normalize_unit()
}

pub fn slice_profile(stack: &FeatureStack, row: usize, orientation: usize) -> Result<Vec<f64>> {
    stack.slice_profile(row, orientation)
}

pub fn central_readout(stack: &FeatureStack, orientation: usize) -> Result<f64> {
    stack.central_readout(orientation)
}

fn check_dims(height: usize, width: usize, len: usize, planes: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidData(format!("empty field {height}x{width}")));
    }
    if len != height * width * planes {
        return Err(Error::InvalidData(format!(
            "expected {} values for {height}x{width}x{planes}, got {len}",
            height * width * planes
        )));
    }
    Ok(())
}
