use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use collinearity::detectors::{
    activity_map, baseline_saliency, channel_concat_export, difference_map, extract_rois_with_ior, fault_detector,
    fault_response_map, long_gabor_compare, saliency_map, suppression_blend, upsample_bilinear, Roi,
};
use collinearity::io::{self as cio, read_image_limited};
use collinearity::stimuli::experiments::{self as exp, SweepResult};
use collinearity::stimuli::fixtures::{crossing_lines_fixture, wafer_orientations};
use collinearity::{GrayImage, Model, ModelConfig, ScalarMap};
use log::info;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::bands::{self, Check};
use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ChannelMode {
    Concat,
    Suppress,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ExperimentName {
    Basic,
    ContrastGap,
    ContrastLine,
    Length,
    FlankerDistance,
    Rotation,
    Occlusion,
}

impl ExperimentName {
    fn slug(self) -> &'static str {
        match self {
            Self::Basic => "basic",
            Self::ContrastGap => "contrast-gap",
            Self::ContrastLine => "contrast-line",
            Self::Length => "length",
            Self::FlankerDistance => "flanker-distance",
            Self::Rotation => "rotation",
            Self::Occlusion => "occlusion",
        }
    }
}

/// Everything a command needs besides its own arguments.
pub struct Ctx {
    pub config: RunConfig,
    pub config_sha256: String,
    pub explicit_orientations: bool,
    pub out: PathBuf,
}

#[derive(Serialize)]
struct InputRecord {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config_sha256: &'a str,
    config: &'a RunConfig,
    model: &'a ModelConfig,
    inputs: Vec<InputRecord>,
    outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<serde_json::Value>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Output directory that records every file written to it.
struct Artifacts<'a> {
    dir: PathBuf,
    files: BTreeSet<String>,
    ctx: &'a Ctx,
}

impl<'a> Artifacts<'a> {
    fn new(ctx: &'a Ctx, dir: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir,
            files: BTreeSet::new(),
            ctx,
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.insert(name.to_string());
        self.dir.join(name)
    }

    fn map(&mut self, name: &str, map: &ScalarMap) -> Result<()> {
        if self.ctx.config.io.png {
            let p = self.path(&format!("{name}.png"));
            cio::write_map_png(&p, map)?;
        }
        if self.ctx.config.io.csv {
            let p = self.path(&format!("{name}.csv"));
            cio::write_map_csv(&p, map)?;
        }
        Ok(())
    }

    fn image_png(&mut self, name: &str, image: &GrayImage) -> Result<()> {
        let p = self.path(name);
        Ok(cio::write_image_png(&p, image)?)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let p = self.path(name);
        Ok(cio::write_json(&p, value)?)
    }

    fn sweep(&mut self, name: &str, r: &SweepResult, profile_at: &[f64]) -> Result<()> {
        let p = self.path(&format!("{name}.csv"));
        r.write_csv(cio::create_file(&p)?)?;
        for prof in r
            .profiles
            .iter()
            .filter(|p| profile_at.iter().any(|v| (v - p.at).abs() < 1e-9))
        {
            let p = self.path(&format!("{name}_profile_{}.csv", prof.at));
            prof.write_csv(cio::create_file(&p)?)?;
        }
        Ok(())
    }

    fn finish(
        self,
        command: &str,
        model: &ModelConfig,
        inputs: Vec<InputRecord>,
        summary: Option<serde_json::Value>,
    ) -> Result<()> {
        self.finish_as("manifest.json", command, model, inputs, summary)
    }

    fn finish_as(
        mut self,
        manifest_name: &str,
        command: &str,
        model: &ModelConfig,
        inputs: Vec<InputRecord>,
        summary: Option<serde_json::Value>,
    ) -> Result<()> {
        self.files.insert(manifest_name.into());
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_sha256: &self.ctx.config_sha256,
            config: &self.ctx.config,
            model,
            inputs,
            outputs: self.files.iter().cloned().collect(),
            summary,
        };
        Ok(cio::write_json(self.dir.join(manifest_name), &manifest)?)
    }
}

struct Input {
    path: PathBuf,
    image: GrayImage,
    record: InputRecord,
    stem: String,
}

fn load_inputs(ctx: &Ctx, paths: &[PathBuf]) -> Result<Vec<Input>> {
    let mut stems = BTreeSet::new();
    for p in paths {
        let stem = stem_of(p);
        if !stems.insert(stem.clone()) {
            bail!("two inputs share the output name `{stem}`: rename one of them");
        }
    }
    paths
        .par_iter()
        .map(|p| {
            let bytes = std::fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            let image = read_image_limited(p, ctx.config.io.max_pixels)?;
            Ok(Input {
                path: p.clone(),
                image,
                record: InputRecord {
                    path: p.display().to_string(),
                    sha256: sha256_hex(&bytes),
                },
                stem: stem_of(p),
            })
        })
        .collect()
}

fn stem_of(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into())
}

/// Runs `f` on every input in parallel and prints the returned lines in
/// input order.
fn batch<F>(ctx: &Ctx, paths: &[PathBuf], f: F) -> Result<()>
where
    F: Fn(Input, Artifacts<'_>) -> Result<String> + Sync,
{
    let inputs = load_inputs(ctx, paths)?;
    let lines: Vec<String> = inputs
        .into_par_iter()
        .map(|input| {
            let dir = ctx.out.join(&input.stem);
            let label = input.path.display().to_string();
            let art = Artifacts::new(ctx, dir)?;
            f(input, art).with_context(|| format!("processing {label}"))
        })
        .collect::<Result<_>>()?;
    for l in lines {
        println!("{l}");
    }
    Ok(())
}

fn wafer_model(ctx: &Ctx) -> ModelConfig {
    let mut m = ctx.config.model();
    if !ctx.explicit_orientations {
        m.gabor.orientations = wafer_orientations();
    }
    m
}

pub fn run(ctx: &Ctx, inputs: &[PathBuf]) -> Result<()> {
    let cfg = ctx.config.model();
    let model = Model::new(cfg.clone())?;
    batch(ctx, inputs, |input, mut art| {
        let out = model.run(&input.image)?;
        info!(
            "{}: converged in {} steps, residual {:.2e}",
            input.record.path, out.steps, out.residual
        );
        art.map("gabor_max", &out.gabor.max_over_orientations())?;
        art.map("pooled_max", &out.pooled.max_over_orientations())?;
        art.map("collinearity_max", &out.col.max_over_orientations())?;
        art.map("difference", &difference_map(&out.col, &out.pooled)?)?;
        let summary = serde_json::json!({
            "image": [input.image.height(), input.image.width()],
            "pooled": [out.pooled.height(), out.pooled.width(), out.pooled.orientations()],
            "steps": out.steps,
        });
        let line = format!(
            "{}: {}x{} -> {}x{}x{}, {} steps",
            input.record.path,
            input.image.height(),
            input.image.width(),
            out.pooled.height(),
            out.pooled.width(),
            out.pooled.orientations(),
            out.steps
        );
        art.finish("run", &cfg, vec![input.record], Some(summary))?;
        Ok(line)
    })
}

pub fn wafer(ctx: &Ctx, inputs: &[PathBuf]) -> Result<()> {
    let cfg = wafer_model(ctx);
    let model = Model::new(cfg.clone())?;
    let det = &ctx.config.detector;
    batch(ctx, inputs, |input, mut art| {
        let out = model.run(&input.image)?;
        let d = difference_map(&out.col, &out.pooled)?;
        let a = activity_map(&input.image, &cfg.pooling, det.activity_threshold)?;
        let f = fault_response_map(&d, &a, det)?;
        let binary = fault_detector(&f, det);
        let count = binary.data().iter().filter(|v| **v > 0.0).count();
        art.map("difference", &d)?;
        art.map("fault_response", &f)?;
        art.map("fault_detector", &binary)?;
        art.finish(
            "wafer",
            &cfg,
            vec![input.record],
            Some(serde_json::json!({ "fault_pixels": count })),
        )?;
        Ok(format!("{}: fault pixels {count}", input.path.display()))
    })
}

pub fn sem(ctx: &Ctx, inputs: &[PathBuf], baseline: bool) -> Result<()> {
    let cfg = ctx.config.model();
    let model = Model::new(cfg.clone())?;
    let det = &ctx.config.detector;
    let kind = if baseline { "baseline" } else { "collinearity" };
    batch(ctx, inputs, |input, mut art| {
        let out = model.run(&input.image)?;
        let sal = if baseline {
            baseline_saliency(&out.pooled, &input.image, &cfg.pooling, det)?
        } else {
            saliency_map(&out.col, &input.image, &cfg.pooling, det)?
        };
        let size = (input.image.height(), input.image.width());
        let rois: Vec<Roi> = extract_rois_with_ior(&sal, det, cfg.pooling.stride, size);
        art.map("saliency", &sal)?;
        art.json("rois.json", &rois)?;
        for r in &rois {
            let [top, left, h, w] = r.bbox;
            art.image_png(&format!("roi_{:03}.png", r.rank), &input.image.crop(top, left, h, w)?)?;
        }
        art.finish(
            "sem",
            &cfg,
            vec![input.record],
            Some(serde_json::json!({ "saliency": kind, "rois": rois.len() })),
        )?;
        Ok(format!("{}: {} ROIs ({kind})", input.path.display(), rois.len()))
    })
}

pub fn export_channels(ctx: &Ctx, inputs: &[PathBuf], mode: ChannelMode) -> Result<()> {
    let cfg = wafer_model(ctx);
    let model = Model::new(cfg.clone())?;
    let det = &ctx.config.detector;
    batch(ctx, inputs, |input, mut art| {
        let out = model.run(&input.image)?;
        let d = difference_map(&out.col, &out.pooled)?;
        let stride = cfg.pooling.stride;
        let (mode_name, planes) = match mode {
            ChannelMode::Concat => {
                let a = activity_map(&input.image, &cfg.pooling, det.activity_threshold)?;
                let f = fault_response_map(&d, &a, det)?;
                let two = channel_concat_export(&input.image, &f, stride)?;
                art.image_png("channel_0.png", &two.intensity)?;
                art.image_png("channel_1.png", &two.response)?;
                ("concat", vec!["channel_0.png", "channel_1.png"])
            }
            ChannelMode::Suppress => {
                let up = upsample_bilinear(&d.normalize_unit(), input.image.height(), input.image.width(), stride)?;
                let blended = suppression_blend(&input.image, &up, det)?;
                art.image_png("suppressed.png", &blended)?;
                ("suppress", vec!["suppressed.png"])
            }
        };
        art.finish(
            "export-channels",
            &cfg,
            vec![input.record],
            Some(serde_json::json!({ "mode": mode_name, "planes": planes })),
        )?;
        Ok(format!(
            "{}: {mode_name} -> {}",
            input.path.display(),
            planes.join(", ")
        ))
    })
}

/// Returns whether every property band held.
pub fn experiment(ctx: &Ctx, name: ExperimentName) -> Result<bool> {
    let cfg = ctx.config.model();
    let model = Model::new(cfg.clone())?;
    let e = &ctx.config.experiment;
    let g = &ctx.config.grids;
    let mut art = Artifacts::new(ctx, ctx.out.clone())?;
    let slug = name.slug();
    let checks: Vec<Check> = match name {
        ExperimentName::Basic => {
            let b = exp::run_basic_comparison(&model, e)?;
            let p = art.path("basic.csv");
            let mut w = cio::create_file(&p)?;
            use std::io::Write;
            let rows = format!(
                "condition,enhanced,control,ratio\ncollinear,{:.10e},{:.10e},{:.10e}\northogonal,{:.10e},{:.10e},{:.10e}\n",
                b.collinear,
                b.collinear_control,
                b.collinear / b.collinear_control,
                b.orthogonal,
                b.orthogonal_control,
                b.orthogonal / b.orthogonal_control
            );
            w.write_all(rows.as_bytes())
                .and_then(|_| w.flush())
                .with_context(|| p.display().to_string())?;
            bands::basic(&b)
        }
        ExperimentName::ContrastGap => {
            let r = exp::contrast_sweep_gap(&model, e, &g.contrasts)?;
            art.sweep(slug, &r, &g.profile_contrasts)?;
            bands::contrast_gap(&r)
        }
        ExperimentName::ContrastLine => {
            let r = exp::contrast_sweep_line(&model, e, &g.contrasts)?;
            art.sweep(slug, &r, &g.profile_contrasts)?;
            bands::contrast_line(&r)
        }
        ExperimentName::Length => {
            let r = exp::length_sweep(&model, e, &g.lengths_px)?;
            art.sweep(slug, &r, &g.profile_lengths_px)?;
            bands::length(&r)
        }
        ExperimentName::FlankerDistance => {
            let r = exp::flanker_distance_sweep(&model, e, &g.distances_lambda)?;
            art.sweep(slug, &r, &[])?;
            bands::flanker_distance(&r)
        }
        ExperimentName::Rotation => {
            let r = exp::rotation_tuning(&model, e, &g.rotation_deg)?;
            art.sweep(slug, &r, &[])?;
            bands::rotation(&r)
        }
        ExperimentName::Occlusion => {
            let fx = crossing_lines_fixture();
            let c = long_gabor_compare(&model, &fx.image, g.long_kernel, &fx.lines)?;
            art.image_png("occlusion_input.png", &fx.image)?;
            art.map("occlusion_collinearity", &c.col_map)?;
            art.map("occlusion_long_gabor", &c.long_gabor_map)?;
            let p = art.path("occlusion.csv");
            let fmt = |v: Option<f64>| v.map(|x| format!("{x:.10e}")).unwrap_or_default();
            std::fs::write(
                &p,
                format!(
                    "method,snr\ncollinearity,{}\nlong_gabor,{}\nratio,{}\n",
                    fmt(c.col_snr),
                    fmt(c.long_gabor_snr),
                    fmt(c.snr_ratio)
                ),
            )
            .with_context(|| p.display().to_string())?;
            bands::occlusion(c.snr_ratio)
        }
    };
    let passed = checks.iter().filter(|c| c.pass).count();
    let ok = passed == checks.len();
    art.json(&format!("{slug}_checks.json"), &checks)?;
    art.finish_as(
        &format!("{slug}_manifest.json"),
        &format!("experiment {slug}"),
        &cfg,
        vec![],
        Some(serde_json::json!({ "pass": ok })),
    )?;
    println!(
        "experiment {slug}: {} ({passed}/{} checks)",
        if ok { "PASS" } else { "FAIL" },
        checks.len()
    );
    if !ok {
        eprint!("{}", bands::table(&checks));
    }
    Ok(ok)
}

pub fn kernels(ctx: &Ctx) -> Result<()> {
    let cfg = ctx.config.model();
    let model = Model::new(cfg.clone())?;
    let mut art = Artifacts::new(ctx, ctx.out.clone())?;
    for i in 0..model.bank().len() {
        art.path(&format!("gabor_{i}.csv"));
        art.path(&format!("collinearity_{i}.csv"));
    }
    cio::write_gabor_kernels(&ctx.out, "gabor", model.bank())?;
    cio::write_collinearity_kernels(&ctx.out, "collinearity", model.kernels())?;
    let summary = serde_json::json!({
        "orientations_rad": model.bank().orientations(),
        "lambda_px": model.bank().lambda_px(),
        "lambda_grid": model.kernels().lambda_px(),
    });
    art.finish("kernels", &cfg, vec![], Some(summary))?;
    println!("kernels: {} orientations -> {}", model.bank().len(), ctx.out.display());
    Ok(())
}
