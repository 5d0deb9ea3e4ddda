//! Run configuration: TOML file, `--set` overrides, aggregated validation.

use std::path::Path;

use anyhow::{bail, Context};
use collinearity::detectors::DetectorConfig;
use collinearity::gabor::orientations_from_degrees;
use collinearity::stimuli::experiments::ExperimentConfig;
use collinearity::{CollinearityKernelConfig, DynamicsConfig, GaborConfig, ModelConfig, PoolingConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Orientation list in degrees; replaces `gabor.orientations` when set.
    pub orientations_deg: Option<Vec<f64>>,
    pub gabor: GaborConfig,
    pub pooling: PoolingConfig,
    pub kernel: CollinearityKernelConfig,
    pub dynamics: DynamicsConfig,
    pub detector: DetectorConfig,
    pub experiment: ExperimentConfig,
    pub grids: SweepGrids,
    pub io: IoConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoConfig {
    pub output_dir: String,
    pub png: bool,
    pub csv: bool,
    /// Input size limit in pixels.
    pub max_pixels: u64,
}

impl Default for IoConfig {
    fn default() -> Self {
        Self {
            output_dir: "out".into(),
            png: true,
            csv: true,
            max_pixels: collinearity::io::DEFAULT_MAX_PIXELS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrids {
    pub contrasts: Vec<f64>,
    pub lengths_px: Vec<f64>,
    pub distances_lambda: Vec<f64>,
    pub rotation_deg: Vec<f64>,
    /// Sweep values whose slice profiles are written.
    pub profile_contrasts: Vec<f64>,
    pub profile_lengths_px: Vec<f64>,
    /// Long-Gabor kernel side for the occlusion comparison.
    pub long_kernel: usize,
}

impl Default for SweepGrids {
    fn default() -> Self {
        Self {
            contrasts: (0..=10).map(|i| f64::from(i) / 10.0).collect(),
            lengths_px: (1..=14).map(|i| f64::from(i) * 20.0).collect(),
            distances_lambda: (2..=16).map(f64::from).collect(),
            rotation_deg: (-18..=18).map(|i| f64::from(i) * 5.0).collect(),
            profile_contrasts: vec![0.2, 0.5, 0.8],
            profile_lengths_px: vec![60.0, 140.0, 280.0],
            long_kernel: collinearity::detectors::DEFAULT_LONG_KERNEL,
        }
    }
}

impl RunConfig {
    pub fn model(&self) -> ModelConfig {
        let mut gabor = self.gabor.clone();
        if let Some(deg) = &self.orientations_deg {
            gabor.orientations = orientations_from_degrees(deg);
        }
        ModelConfig {
            gabor,
            pooling: self.pooling,
            kernel: self.kernel,
            dynamics: self.dynamics,
        }
    }

    pub fn collect_errors(&self) -> Vec<String> {
        let mut errs = Vec::new();
        self.model().collect_errors(&mut errs);
        self.detector.collect_errors(&mut errs);
        let e = &self.experiment;
        for (name, v) in [
            ("target_contrast", e.target_contrast),
            ("flanker_contrast", e.flanker_contrast),
            ("gap_flanker_contrast", e.gap_flanker_contrast),
            ("length_contrast", e.length_contrast),
        ] {
            if !(0.0..=1.0).contains(&v) {
                errs.push(format!("experiment.{name} = {v} must lie in [0, 1]"));
            }
        }
        if e.line_length > e.line_width {
            errs.push(format!(
                "experiment.line_length {} exceeds line_width {}",
                e.line_length, e.line_width
            ));
        }
        if self.grids.contrasts.iter().any(|c| !(0.0..=1.0).contains(c)) {
            errs.push("grids.contrasts must lie in [0, 1]".into());
        }
        if self
            .grids
            .lengths_px
            .iter()
            .any(|l| *l < 1.0 || *l > e.line_width as f64)
        {
            errs.push(format!("grids.lengths_px must lie in [1, {}]", e.line_width));
        }
        if self.grids.long_kernel.is_multiple_of(2) {
            errs.push(format!("grids.long_kernel {} must be odd", self.grids.long_kernel));
        }
        if !self.io.png && !self.io.csv {
            errs.push("io: at least one of png, csv must be enabled".into());
        }
        errs
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let errs = self.collect_errors();
        if errs.is_empty() {
            return Ok(());
        }
        bail!("invalid configuration:\n  {}", errs.join("\n  "))
    }
}

/// Loaded configuration plus the raw bytes it came from.
pub struct Loaded {
    pub config: RunConfig,
    pub source_bytes: Vec<u8>,
    /// Whether the file or overrides set the orientation list explicitly.
    pub explicit_orientations: bool,
}

pub fn load(path: Option<&Path>, overrides: &[String]) -> anyhow::Result<Loaded> {
    let source_bytes = match path {
        Some(p) => std::fs::read(p).with_context(|| format!("reading config {}", p.display()))?,
        None => Vec::new(),
    };
    let text = std::str::from_utf8(&source_bytes).context("config is not UTF-8")?;
    let mut table: toml::Table = toml::from_str(text).context("parsing config")?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let explicit_orientations = table.contains_key("orientations_deg")
        || table
            .get("gabor")
            .and_then(|g| g.as_table())
            .is_some_and(|g| g.contains_key("orientations"));
    let config: RunConfig = toml::Value::Table(table).try_into().context("config schema")?;
    Ok(Loaded {
        config,
        source_bytes,
        explicit_orientations,
    })
}

/// Applies `a.b.c=value`; the value is parsed as a TOML literal, falling
/// back to a bare string.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> anyhow::Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .with_context(|| format!("override `{spec}` is not of the form key=value"))?;
    let value = parse_value(raw.trim());
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, path) = parts.split_last().expect("split yields at least one part");
    let mut cur = table;
    for p in path {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .with_context(|| format!("override `{spec}`: `{p}` is not a table"))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
