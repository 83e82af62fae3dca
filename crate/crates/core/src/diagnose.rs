//! Data behind the four diagnostic plots: probability, quantile, density and
//! return level. Plotting positions are `i/(n+1)` throughout.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gev::{GevParams, ReturnSpec};
use crate::stats;

pub const KDE_GRID: usize = 512;
const RETURN_GRID: usize = 200;
const RETURN_T_MIN: f64 = 1.1;
const RETURN_T_MAX: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    Pp,
    Qq,
    DensityEmpirical,
    DensityModel,
    ReturnPoints,
    ReturnCurve,
    ReturnGumbelLine,
}

impl PlotKind {
    pub fn name(&self) -> &'static str {
        match self {
            PlotKind::Pp => "pp",
            PlotKind::Qq => "qq",
            PlotKind::DensityEmpirical => "density_empirical",
            PlotKind::DensityModel => "density_model",
            PlotKind::ReturnPoints => "return_points",
            PlotKind::ReturnCurve => "return_curve",
            PlotKind::ReturnGumbelLine => "return_gumbel_line",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub kind: PlotKind,
    pub points: Vec<(f64, f64)>,
}

impl PlotSeries {
    /// Writes the points as CSV with an `x,y` header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y"])?;
        for (x, y) in &self.points {
            w.write_record([x.to_string(), y.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// JSON sidecar describing one plot-data file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotMeta {
    pub kind: PlotKind,
    pub station: String,
    pub params: GevParams,
}

fn check(data: &[f64], params: &GevParams) -> Result<()> {
    params.validate()?;
    if data.is_empty() {
        return Err(Error::Validation("diagnostics need at least one observation".into()));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::Validation("sample contains non-finite values".into()));
    }
    Ok(())
}

fn positions(n: usize) -> impl Iterator<Item = f64> {
    (1..=n).map(move |i| i as f64 / (n as f64 + 1.0))
}

pub fn pp_points(data: &[f64], params: &GevParams) -> Result<PlotSeries> {
    check(data, params)?;
    let s = stats::sorted(data);
    Ok(PlotSeries {
        kind: PlotKind::Pp,
        points: positions(s.len()).zip(&s).map(|(p, x)| (p, params.cdf(*x))).collect(),
    })
}

pub fn qq_points(data: &[f64], params: &GevParams) -> Result<PlotSeries> {
    check(data, params)?;
    let s = stats::sorted(data);
    Ok(PlotSeries {
        kind: PlotKind::Qq,
        points: positions(s.len())
            .zip(&s)
            .map(|(p, x)| (params.quantile_unchecked(p), *x))
            .collect(),
    })
}

/// Normal-reference bandwidth `0.9 · min(sd, IQR/1.34) · n^{-1/5}`.
pub fn default_bandwidth(data: &[f64]) -> f64 {
    let s = stats::sorted(data);
    let n = s.len() as f64;
    let sd = if s.len() > 1 { stats::sd(&s) } else { 0.0 };
    let iqr = stats::quantile_sorted(&s, 0.75) - stats::quantile_sorted(&s, 0.25);
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        (false, true) => iqr / 1.34,
        (false, false) => 1.0,
    };
    0.9 * spread * n.powf(-0.2)
}

/// Gaussian KDE and model density on a shared grid spanning the data range
/// widened by three bandwidths on each side.
pub fn density_series(data: &[f64], params: &GevParams, bandwidth: Option<f64>) -> Result<(PlotSeries, PlotSeries)> {
    check(data, params)?;
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(Error::Domain(format!("bandwidth must be positive, got {h}"))),
        None => default_bandwidth(data),
    };
    let (lo, hi) = data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
    let (lo, hi) = (lo - 3.0 * h, hi + 3.0 * h);
    let step = (hi - lo) / (KDE_GRID - 1) as f64;
    let norm = 1.0 / (data.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());

    let mut emp = Vec::with_capacity(KDE_GRID);
    let mut model = Vec::with_capacity(KDE_GRID);
    for k in 0..KDE_GRID {
        let x = lo + k as f64 * step;
        let d: f64 = data.iter().map(|xi| (-0.5 * ((x - xi) / h).powi(2)).exp()).sum();
        emp.push((x, d * norm));
        model.push((x, params.pdf(x)));
    }
    Ok((
        PlotSeries {
            kind: PlotKind::DensityEmpirical,
            points: emp,
        },
        PlotSeries {
            kind: PlotKind::DensityModel,
            points: model,
        },
    ))
}

/// Empirical return points, fitted return-level curve and the Gumbel
/// reference line (same location and scale, zero shape).
pub fn return_level_series(data: &[f64], params: &GevParams) -> Result<Vec<PlotSeries>> {
    check(data, params)?;
    let s = stats::sorted(data);
    let points = positions(s.len()).zip(&s).map(|(p, x)| (1.0 / (1.0 - p), *x)).collect();

    let grid: Vec<ReturnSpec> = (0..RETURN_GRID)
        .map(|k| {
            let f = k as f64 / (RETURN_GRID - 1) as f64;
            let t = RETURN_T_MIN * (RETURN_T_MAX / RETURN_T_MIN).powf(f);
            ReturnSpec::from_period(t).expect("grid periods exceed one year")
        })
        .collect();
    let gumbel = params.with_gumbel_shape();
    Ok(vec![
        PlotSeries {
            kind: PlotKind::ReturnPoints,
            points,
        },
        PlotSeries {
            kind: PlotKind::ReturnCurve,
            points: grid.iter().map(|r| (r.period_years, params.return_level(*r))).collect(),
        },
        PlotSeries {
            kind: PlotKind::ReturnGumbelLine,
            points: grid.iter().map(|r| (r.period_years, gumbel.return_level(*r))).collect(),
        },
    ])
}

/// All seven series for one station, in a fixed order.
pub fn all_series(data: &[f64], params: &GevParams) -> Result<Vec<PlotSeries>> {
    let mut out = vec![pp_points(data, params)?, qq_points(data, params)?];
    let (emp, model) = density_series(data, params, None)?;
    out.push(emp);
    out.push(model);
    out.extend(return_level_series(data, params)?);
    Ok(out)
}
