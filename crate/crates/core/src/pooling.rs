//! Strided separable Lanczos3 pooling.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FeatureStack, GrayImage, ScalarMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolingConfig {
    /// Stride and pool size `p`.
    pub stride: usize,
    /// Lanczos lobe count `a`; only 3 is supported.
    pub lobes: usize,
}

impl Default for PoolingConfig {
    fn default() -> Self {
        Self { stride: 3, lobes: 3 }
    }
}

impl PoolingConfig {
    pub fn collect_errors(&self, errs: &mut Vec<String>) {
        if self.stride < 1 {
            errs.push("pooling.stride must be >= 1".into());
        }
        if self.lobes != 3 {
            errs.push(format!("pooling.lobes {} unsupported (must be 3)", self.lobes));
        }
    }

    /// Input coordinate that output index `j` is centred on.
    pub fn sample_centre(&self, j: usize) -> usize {
        j * self.stride + (self.stride - 1) / 2
    }

    pub fn output_len(&self, n: usize) -> usize {
        n / self.stride
    }
}

/// Lanczos window with `a = 3` evaluated at `x' = x / p`.
pub fn lanczos3(xp: f64) -> f64 {
    const A: f64 = 3.0;
    if xp == 0.0 {
        1.0
    } else if xp.abs() < A {
        A * (PI * xp).sin() * (PI * xp / A).sin() / (PI * PI * xp * xp)
    } else {
        0.0
    }
}

/// Taps for integer offsets `-(3p-1) ..= 3p-1`, normalized to sum 1.
pub fn lanczos3_kernel(stride: usize) -> Vec<f64> {
    let p = stride.max(1) as isize;
    let r = 3 * p - 1;
    let mut taps: Vec<f64> = (-r..=r).map(|x| lanczos3(x as f64 / p as f64)).collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Pools every plane and clamps Lanczos undershoot to zero.
pub fn pool(stack: &FeatureStack, cfg: &PoolingConfig) -> Result<FeatureStack> {
    check_size(stack.height(), stack.width(), cfg)?;
    let taps = lanczos3_kernel(cfg.stride);
    let (oh, ow) = (cfg.output_len(stack.height()), cfg.output_len(stack.width()));
    let planes: Vec<Vec<f64>> = (0..stack.orientations())
        .into_par_iter()
        .map(|l| {
            let mut out = pool_plane(stack.plane(l), stack.height(), stack.width(), cfg, &taps);
            out.iter_mut().for_each(|v| *v = v.max(0.0));
            out
        })
        .collect();
    Ok(FeatureStack::from_planes(oh, ow, planes))
}

/// Pools an image onto the same grid, without clamping.
pub fn pool_image(image: &GrayImage, cfg: &PoolingConfig) -> Result<ScalarMap> {
    check_size(image.height(), image.width(), cfg)?;
    let taps = lanczos3_kernel(cfg.stride);
    let out = pool_plane(image.data(), image.height(), image.width(), cfg, &taps);
    ScalarMap::new(cfg.output_len(image.height()), cfg.output_len(image.width()), out)
}

fn check_size(h: usize, w: usize, cfg: &PoolingConfig) -> Result<()> {
    if h < cfg.stride || w < cfg.stride {
        return Err(Error::Size {
            height: h,
            width: w,
            stride: cfg.stride,
        });
    }
    Ok(())
}

/// Horizontal pass at the sampled columns, then vertical pass at the sampled
/// rows, both with replicate-edge indexing.
fn pool_plane(src: &[f64], h: usize, w: usize, cfg: &PoolingConfig, taps: &[f64]) -> Vec<f64> {
    let (oh, ow) = (cfg.output_len(h), cfg.output_len(w));
    let r = (taps.len() / 2) as isize;
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;

    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        for j in 0..ow {
            let c = cfg.sample_centre(j) as isize;
            let mut acc = 0.0;
            for (t, tap) in taps.iter().enumerate() {
                acc += tap * line[clamp(c - (t as isize - r), w)];
            }
            rows[y * ow + j] = acc;
        }
    }
    let mut out = vec![0.0; oh * ow];
    for i in 0..oh {
        let c = cfg.sample_centre(i) as isize;
        for (t, tap) in taps.iter().enumerate() {
            let y = clamp(c - (t as isize - r), h);
            let src_row = &rows[y * ow..(y + 1) * ow];
            for (o, v) in out[i * ow..(i + 1) * ow].iter_mut().zip(src_row) {
                *o += tap * v;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_stride_support() {
        let k = lanczos3_kernel(1);
        assert_eq!(k.len(), 5);
        // x = ±3 sits on the support boundary and is an exact zero.
        assert_eq!(lanczos3(3.0), 0.0);
        assert_eq!(lanczos3(-3.0), 0.0);
        let centre = k[2];
        assert!(k.iter().all(|&v| v <= centre));
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unnormalized_centre_is_one() {
        assert_eq!(lanczos3(0.0), 1.0);
    }

    #[test]
    fn stride_three_taps() {
        // Oracle: evaluate the closed form at x = -8..=8 directly.
        let raw: Vec<f64> = (-8..=8)
            .map(|x: i32| {
                let xp = x as f64 / 3.0;
                if x == 0 {
                    1.0
                } else {
                    3.0 * (PI * xp).sin() * (PI * xp / 3.0).sin() / (PI * PI * xp * xp)
                }
            })
            .collect();
        let sum: f64 = raw.iter().sum();
        let k = lanczos3_kernel(3);
        assert_eq!(k.len(), 17);
        for (a, b) in k.iter().zip(&raw) {
            assert!((a - b / sum).abs() < 1e-15);
        }
        for i in 0..17 {
            assert!((k[i] - k[16 - i]).abs() < 1e-15);
        }
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn table_shapes() {
        let s = FeatureStack::zeros(1540, 229, 9);
        let p = pool(&s, &PoolingConfig::default()).unwrap();
        assert_eq!((p.height(), p.width(), p.orientations()), (513, 76, 9));
    }

    #[test]
    fn constant_field_is_preserved() {
        let s = FeatureStack::new(12, 15, 2, vec![0.37; 12 * 15 * 2]).unwrap();
        let p = pool(&s, &PoolingConfig::default()).unwrap();
        for v in p.data() {
            assert!((v - 0.37).abs() < 1e-14);
        }
    }

    #[test]
    fn too_small_input_is_rejected() {
        let s = FeatureStack::zeros(2, 10, 1);
        assert!(matches!(pool(&s, &PoolingConfig::default()), Err(Error::Size { .. })));
    }

    #[test]
    fn separable_matches_dense_oracle() {
        let (h, w, l) = (12usize, 12usize, 2usize);
        let mut s = 7u64;
        let vals: Vec<f64> = (0..h * w * l)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
                (s >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect();
        let stack = FeatureStack::new(h, w, l, vals).unwrap();
        let cfg = PoolingConfig::default();
        let fast = pool(&stack, &cfg).unwrap();
        let taps = lanczos3_kernel(3);
        let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
        for plane in 0..l {
            for i in 0..4 {
                for j in 0..4 {
                    let (ci, cj) = ((3 * i + 1) as isize, (3 * j + 1) as isize);
                    let mut acc = 0.0;
                    for a in -8isize..=8 {
                        for b in -8isize..=8 {
                            acc += taps[(a + 8) as usize]
                                * taps[(b + 8) as usize]
                                * stack.get(clamp(ci - a, h), clamp(cj - b, w), plane);
                        }
                    }
                    assert!((fast.get(i, j, plane) - acc.max(0.0)).abs() < 1e-10);
                }
            }
        }
    }
}
