//! Property bands checked after each experiment.

use collinearity::stimuli::experiments::{half_maximum_crossing, BasicComparison, SweepResult};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub band: String,
    pub pass: bool,
}

fn check(name: &str, value: f64, band: &str, pass: bool) -> Check {
    Check {
        name: name.into(),
        value,
        band: band.into(),
        pass,
    }
}

fn at(r: &SweepResult, series: &[f64], x: f64) -> Option<f64> {
    r.values.iter().position(|v| (v - x).abs() < 1e-9).map(|i| series[i])
}

pub fn basic(b: &BasicComparison) -> Vec<Check> {
    let col = b.collinear / b.collinear_control;
    let orth = b.orthogonal / b.orthogonal_control;
    vec![
        check(
            "collinear > orthogonal",
            b.collinear - b.orthogonal,
            "> 0",
            b.collinear > b.orthogonal,
        ),
        check("collinear ratio", col, "> 1.05", col > 1.05),
        check(
            "orthogonal ratio",
            orth,
            "[0.999, 1.001]",
            (0.999..=1.001).contains(&orth),
        ),
    ]
}

pub fn flanker_distance(r: &SweepResult) -> Vec<Check> {
    let ratio = r.ratio();
    let mut out = Vec::new();
    let peak = r.values.iter().zip(&ratio).fold(
        (f64::NAN, f64::NEG_INFINITY),
        |b, (x, q)| if *q > b.1 { (*x, *q) } else { b },
    );
    out.push(check(
        "peak distance (λ)",
        peak.0,
        "[5, 14]",
        (5.0..=14.0).contains(&peak.0),
    ));
    for d in [6.0, 8.0, 10.0] {
        if let Some(q) = at(r, &ratio, d) {
            out.push(check(&format!("ratio at {d}λ"), q, "> 1.05", q > 1.05));
        }
    }
    for d in [2.0, 4.0, 16.0] {
        if let Some(q) = at(r, &ratio, d) {
            out.push(check(&format!("ratio at {d}λ"), q, "< 1.01", q < 1.01));
        }
    }
    out
}

fn positive_ratios(r: &SweepResult) -> Vec<f64> {
    r.ratio().into_iter().filter(|q| q.is_finite()).collect()
}

pub fn contrast_gap(r: &SweepResult) -> Vec<Check> {
    let q = positive_ratios(r);
    let mean = q.iter().sum::<f64>() / q.len().max(1) as f64;
    let var = q.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / q.len().max(1) as f64;
    let cv = var.sqrt() / mean;
    let monotone = r.enhanced.windows(2).all(|w| w[1] >= w[0]);
    vec![
        check("ratio stdev/mean", cv, "< 0.05", cv < 0.05),
        check("monotone in contrast", f64::from(u8::from(monotone)), "= 1", monotone),
    ]
}

pub fn contrast_line(r: &SweepResult) -> Vec<Check> {
    let ratio = r.ratio();
    match (at(r, &ratio, 0.1), at(r, &ratio, 0.9)) {
        (Some(lo), Some(hi)) => {
            let rel = hi / lo - 1.0;
            vec![check("ratio(0.9)/ratio(0.1) − 1", rel, ">= 0.05", rel >= 0.05)]
        }
        _ => vec![check("grid holds 0.1 and 0.9", 0.0, "present", false)],
    }
}

pub fn length(r: &SweepResult) -> Vec<Check> {
    let e = &r.enhanced;
    let monotone = e.windows(2).all(|w| w[1] >= w[0]);
    let mut out = vec![check(
        "monotone in length",
        f64::from(u8::from(monotone)),
        "= 1",
        monotone,
    )];
    if let (Some(a), Some(b)) = (at(r, e, 200.0), at(r, e, 280.0)) {
        out.push(check("response(200)/response(280)", a / b, "> 0.95", a / b > 0.95));
    }
    let (mut best, mut at_len) = (f64::NEG_INFINITY, f64::NAN);
    for i in 1..e.len() {
        if e[i] - e[i - 1] > best {
            best = e[i] - e[i - 1];
            at_len = r.values[i];
        }
    }
    out.push(check(
        "largest increment ends at (px)",
        at_len,
        "<= 140",
        at_len <= 140.0,
    ));
    out
}

/// Ripple allowed against the monotone flanks, as a fraction of the peak.
pub const UNIMODAL_TOLERANCE: f64 = 0.01;

pub fn rotation(r: &SweepResult) -> Vec<Check> {
    let curve = r.series("normalized_facilitation").unwrap_or(&[]);
    let mut out = Vec::new();
    let peak_at = r
        .values
        .iter()
        .zip(curve)
        .fold(
            (f64::NAN, f64::NEG_INFINITY),
            |b, (x, y)| if *y > b.1 { (*x, *y) } else { b },
        )
        .0;
    out.push(check("peak offset (deg)", peak_at, "= 0", peak_at == 0.0));
    let mut asym: f64 = 0.0;
    for (i, x) in r.values.iter().enumerate() {
        if let Some(j) = r.values.iter().position(|v| (v + x).abs() < 1e-9) {
            asym = asym.max((curve[i] - curve[j]).abs());
        }
    }
    out.push(check("asymmetry", asym, "<= 0.02", asym <= 0.02));
    let unimodal = r.values.iter().zip(curve).collect::<Vec<_>>().windows(2).all(|w| {
        if *w[1].0 <= 0.0 {
            *w[1].1 >= w[0].1 - UNIMODAL_TOLERANCE
        } else {
            *w[1].1 <= w[0].1 + UNIMODAL_TOLERANCE
        }
    });
    out.push(check(
        "unimodal",
        f64::from(u8::from(unimodal)),
        "= 1 (tol 0.01)",
        unimodal,
    ));
    let half = half_maximum_crossing(&r.values, curve).unwrap_or(f64::NAN);
    out.push(check(
        "half-maximum crossing (deg)",
        half,
        "[5, 30]",
        (5.0..=30.0).contains(&half),
    ));
    out
}

pub fn occlusion(snr_ratio: Option<f64>) -> Vec<Check> {
    let v = snr_ratio.unwrap_or(f64::NAN);
    vec![check("collinearity SNR / long-Gabor SNR", v, "> 1", v > 1.0)]
}

/// Fixed-width table of checks.
pub fn table(checks: &[Check]) -> String {
    let mut s = String::new();
    for c in checks {
        s.push_str(&format!(
            "  {:<4} {:<36} {:>14.6} {}\n",
            if c.pass { "ok" } else { "FAIL" },
            c.name,
            c.value,
            c.band
        ));
    }
    s
}
