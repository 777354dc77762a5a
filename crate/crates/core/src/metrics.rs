//! Shape error metrics between a simulated and a measured needle.
//!
//! Both curves are resampled at `K` stations of equal arc-length fraction,
//! starting at the entry point. The tip error is the distance between the
//! last pair, the in-plane errors are all pair distances, and the
//! error-to-deflection percentage relates the tip error to the measured
//! lateral tip deflection `|y_K − y_1|`.

use std::fmt::Write as _;

use nalgebra::Point2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("curve needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("curve has zero length")]
    Degenerate,
    #[error("need K >= 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("no error reports to summarise")]
    Empty,
}

/// `k` points at equal arc-length fractions; the end points are copied
/// exactly.
pub fn resample(curve: &[Point2<f64>], k: usize) -> Result<Vec<Point2<f64>>, MetricsError> {
    if curve.len() < 2 {
        return Err(MetricsError::TooFewPoints(curve.len()));
    }
    if k < 2 {
        return Err(MetricsError::TooFewSamples(k));
    }
    let mut cumulative = Vec::with_capacity(curve.len());
    cumulative.push(0.0);
    for w in curve.windows(2) {
        cumulative.push(cumulative.last().unwrap() + (w[1] - w[0]).norm());
    }
    let total = *cumulative.last().unwrap();
    if !(total > 0.0) {
        return Err(MetricsError::Degenerate);
    }

    let mut out = Vec::with_capacity(k);
    out.push(curve[0]);
    let mut seg = 0;
    for j in 1..k - 1 {
        let target = total * j as f64 / (k - 1) as f64;
        while seg + 2 < cumulative.len() && cumulative[seg + 1] < target {
            seg += 1;
        }
        let len = cumulative[seg + 1] - cumulative[seg];
        let t = if len > 0.0 {
            ((target - cumulative[seg]) / len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(curve[seg] + (curve[seg + 1] - curve[seg]) * t);
    }
    out.push(*curve.last().unwrap());
    Ok(out)
}

/// Paired samples; `k` defaults to the number of measured points.
pub fn correspond(
    sim: &[Point2<f64>],
    truth: &[Point2<f64>],
    k: Option<usize>,
) -> Result<(Vec<Point2<f64>>, Vec<Point2<f64>>), MetricsError> {
    let k = k.unwrap_or(truth.len());
    Ok((resample(sim, k)?, resample(truth, k)?))
}

pub fn in_plane_errors(sim: &[Point2<f64>], truth: &[Point2<f64>]) -> Vec<f64> {
    sim.iter().zip(truth).map(|(a, b)| (a - b).norm()).collect()
}

/// Distance between the last corresponded points.
pub fn tip_error(sim: &[Point2<f64>], truth: &[Point2<f64>]) -> f64 {
    match (sim.last(), truth.last()) {
        (Some(a), Some(b)) => (a - b).norm(),
        _ => 0.0,
    }
}

/// `100 · TE / |y_K − y_1|` of the measured curve; `None` when the measured
/// deflection is zero.
pub fn edp(tip_error: f64, truth: &[Point2<f64>]) -> Option<f64> {
    let deflection = match (truth.first(), truth.last()) {
        (Some(a), Some(b)) => (b.y - a.y).abs(),
        _ => return None,
    };
    (deflection > 0.0).then(|| 100.0 * tip_error / deflection)
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Population standard deviation.
fn std_dev(values: &[f64]) -> f64 {
    let m = mean(values);
    if values.is_empty() {
        0.0
    } else {
        (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
    }
}

/// Errors of one insertion (m, EDP in percent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub label: String,
    pub tip_error: f64,
    pub ipe: Vec<f64>,
    pub max_ipe: f64,
    pub median_ipe: f64,
    pub mean_ipe: f64,
    pub std_ipe: f64,
    pub edp: Option<f64>,
}

impl ErrorReport {
    pub fn evaluate(
        label: impl Into<String>,
        sim: &[Point2<f64>],
        truth: &[Point2<f64>],
        k: Option<usize>,
    ) -> Result<Self, MetricsError> {
        let (a, b) = correspond(sim, truth, k)?;
        let ipe = in_plane_errors(&a, &b);
        let te = tip_error(&a, &b);
        Ok(Self {
            label: label.into(),
            tip_error: te,
            max_ipe: ipe.iter().copied().fold(0.0, f64::max),
            median_ipe: median(&ipe),
            mean_ipe: mean(&ipe),
            std_ipe: std_dev(&ipe),
            edp: edp(te, truth),
            ipe,
        })
    }
}

/// Statistics over several insertions.
///
/// `median_pooled`, `mean_ipe` and `std_ipe` use all IPE samples of all
/// insertions together; `median_of_medians` and `max_ipe` average the
/// per-insertion values; `edp` averages over insertions where it is defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub insertions: usize,
    pub median_pooled: f64,
    pub median_of_medians: f64,
    pub mean_ipe: f64,
    pub std_ipe: f64,
    pub max_ipe: f64,
    pub tip_error: f64,
    pub edp: Option<f64>,
    pub edp_undefined: usize,
}

pub fn summarize(reports: &[ErrorReport]) -> Result<Summary, MetricsError> {
    if reports.is_empty() {
        return Err(MetricsError::Empty);
    }
    let pooled: Vec<f64> = reports.iter().flat_map(|r| r.ipe.iter().copied()).collect();
    let medians: Vec<f64> = reports.iter().map(|r| r.median_ipe).collect();
    let maxima: Vec<f64> = reports.iter().map(|r| r.max_ipe).collect();
    let tips: Vec<f64> = reports.iter().map(|r| r.tip_error).collect();
    let edps: Vec<f64> = reports.iter().filter_map(|r| r.edp).collect();
    Ok(Summary {
        insertions: reports.len(),
        median_pooled: median(&pooled),
        median_of_medians: mean(&medians),
        mean_ipe: mean(&pooled),
        std_ipe: std_dev(&pooled),
        max_ipe: mean(&maxima),
        tip_error: mean(&tips),
        edp: (!edps.is_empty()).then(|| mean(&edps)),
        edp_undefined: reports.len() - edps.len(),
    })
}

pub const CSV_HEADER: &str =
    "label,insertions,median_pooled_mm,median_of_medians_mm,mean_ipe_mm,std_ipe_mm,max_ipe_mm,te_mm,edp_percent";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |v| v.to_string())
}

/// One row per insertion followed by an `all` summary row; lengths in mm.
pub fn report_csv(reports: &[ErrorReport]) -> Result<String, MetricsError> {
    let summary = summarize(reports)?;
    let mut out = format!("{CSV_HEADER}\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},1,{},{},{},{},{},{},{}",
            r.label,
            r.median_ipe * 1e3,
            r.median_ipe * 1e3,
            r.mean_ipe * 1e3,
            r.std_ipe * 1e3,
            r.max_ipe * 1e3,
            r.tip_error * 1e3,
            opt(r.edp)
        );
    }
    let s = &summary;
    let _ = writeln!(
        out,
        "all,{},{},{},{},{},{},{},{}",
        s.insertions,
        s.median_pooled * 1e3,
        s.median_of_medians * 1e3,
        s.mean_ipe * 1e3,
        s.std_ipe * 1e3,
        s.max_ipe * 1e3,
        s.tip_error * 1e3,
        opt(s.edp)
    );
    Ok(out)
}
