//! Daily precipitation records, annual block maxima and synthetic datasets.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};

use chrono::{Datelike, NaiveDate};
use rand::distr::Open01;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gev::GevParams;
use crate::seed;
use crate::stats;

pub const DEFAULT_MIN_COVERAGE: f64 = 0.8;
/// First calendar year of generated datasets.
pub const SYNTH_START_YEAR: i32 = 1981;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyRecord {
    pub station_id: String,
    pub date: NaiveDate,
    /// `None` marks a missing observation; zero is a dry day.
    pub precip_mm: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YearMax {
    pub year: i32,
    pub max_mm: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnualMaximaSeries {
    pub station_id: String,
    /// Sorted by strictly increasing year.
    pub observations: Vec<YearMax>,
}

impl AnnualMaximaSeries {
    pub fn values(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.max_mm).collect()
    }

    pub fn years(&self) -> Vec<i32> {
        self.observations.iter().map(|o| o.year).collect()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Paired values over the years both series cover, in year order.
    pub fn aligned_with(&self, other: &AnnualMaximaSeries) -> (Vec<f64>, Vec<f64>) {
        let theirs: std::collections::HashMap<i32, f64> =
            other.observations.iter().map(|o| (o.year, o.max_mm)).collect();
        self.observations
            .iter()
            .filter_map(|o| theirs.get(&o.year).map(|v| (o.max_mm, *v)))
            .unzip()
    }
}

/// A station-year dropped for insufficient coverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedYear {
    pub station: String,
    pub year: i32,
    pub coverage: f64,
}

#[derive(Debug, Deserialize)]
struct DailyRow {
    station: String,
    date: String,
    precip_mm: String,
}

pub fn parse_daily_csv<R: Read>(source: R) -> Result<Vec<DailyRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["station", "date", "precip_mm"] {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header station,date,precip_mm, got {}",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, row) in rdr.deserialize::<DailyRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let date = NaiveDate::parse_from_str(&row.date, "%Y-%m-%d").map_err(|e| Error::Parse {
            line,
            message: format!("bad date {:?}: {e}", row.date),
        })?;
        let precip_mm = if row.precip_mm.is_empty() {
            None
        } else {
            let v: f64 = row.precip_mm.parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad precipitation {:?}", row.precip_mm),
            })?;
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Validation(format!(
                    "line {line}: precipitation must be nonnegative, got {v}"
                )));
            }
            Some(v)
        };
        if !seen.insert((row.station.clone(), date)) {
            return Err(Error::Validation(format!(
                "line {line}: duplicate record for station {} on {date}",
                row.station
            )));
        }
        out.push(DailyRecord {
            station_id: row.station,
            date,
            precip_mm,
        });
    }
    Ok(out)
}

fn days_in_year(year: i32) -> u32 {
    if NaiveDate::from_ymd_opt(year, 2, 29).is_some() {
        366
    } else {
        365
    }
}

/// Calendar-year maxima per station. Years whose fraction of present days
/// falls below `min_coverage` are dropped and listed in the skip log.
pub fn block_maxima(records: &[DailyRecord], min_coverage: f64) -> Result<(Vec<AnnualMaximaSeries>, Vec<SkippedYear>)> {
    if !(min_coverage > 0.0 && min_coverage <= 1.0) {
        return Err(Error::Domain(format!(
            "min_coverage must lie in (0, 1], got {min_coverage}"
        )));
    }
    // station -> year -> (present days, max)
    let mut acc: BTreeMap<&str, BTreeMap<i32, (u32, f64)>> = BTreeMap::new();
    for r in records {
        let e = acc
            .entry(r.station_id.as_str())
            .or_default()
            .entry(r.date.year())
            .or_insert((0, f64::NEG_INFINITY));
        if let Some(v) = r.precip_mm {
            e.0 += 1;
            e.1 = e.1.max(v);
        }
    }

    let mut series = Vec::new();
    let mut skipped = Vec::new();
    for (station, years) in acc {
        let mut obs = Vec::new();
        for (year, (present, max)) in years {
            let coverage = f64::from(present) / f64::from(days_in_year(year));
            // an entirely dry year has no positive maximum to model
            if coverage >= min_coverage && max > 0.0 {
                obs.push(YearMax {
                    year,
                    max_mm: max,
                    coverage,
                });
            } else {
                skipped.push(SkippedYear {
                    station: station.to_string(),
                    year,
                    coverage,
                });
            }
        }
        if obs.is_empty() {
            return Err(Error::EmptyStation(station.to_string()));
        }
        series.push(AnnualMaximaSeries {
            station_id: station.to_string(),
            observations: obs,
        });
    }
    Ok((series, skipped))
}

/// Independent GEV draws per station, one value per year starting at
/// [`SYNTH_START_YEAR`]. Station `i` uses the stream derived from `(seed, i)`.
pub fn synth_dataset(spec: &[(String, GevParams)], years: usize, seed: u64) -> Result<Vec<AnnualMaximaSeries>> {
    if years == 0 {
        return Err(Error::Validation("years must be at least 1".into()));
    }
    spec.iter()
        .enumerate()
        .map(|(i, (id, params))| {
            params.validate()?;
            let mut rng = seed::rng(seed::derive(seed, "synth-station", i as u64));
            let mut observations = Vec::with_capacity(years);
            for k in 0..years {
                // maxima must be positive; redraw the rare nonpositive value
                let v = loop {
                    let v = params.quantile_unchecked(rng.sample::<f64, _>(Open01));
                    if v > 0.0 {
                        break v;
                    }
                };
                observations.push(YearMax {
                    year: SYNTH_START_YEAR + k as i32,
                    max_mm: v,
                    coverage: 1.0,
                });
            }
            Ok(AnnualMaximaSeries {
                station_id: id.clone(),
                observations,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

pub fn summary_stats(series: &AnnualMaximaSeries) -> Result<Summary> {
    if series.is_empty() {
        return Err(Error::Validation(format!(
            "station {} has an empty series",
            series.station_id
        )));
    }
    let v = series.values();
    let s = stats::sorted(&v);
    Ok(Summary {
        min: s[0],
        q1: stats::quantile_sorted(&s, 0.25),
        median: stats::quantile_sorted(&s, 0.5),
        q3: stats::quantile_sorted(&s, 0.75),
        max: s[s.len() - 1],
        mean: stats::mean(&v),
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct SeriesRow {
    station: String,
    year: i32,
    max_mm: f64,
}

/// Writes `station,year,max_mm`.
pub fn write_series_csv<W: Write>(series: &[AnnualMaximaSeries], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in series {
        for o in &s.observations {
            w.serialize(SeriesRow {
                station: s.station_id.clone(),
                year: o.year,
                max_mm: o.max_mm,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads `station,year,max_mm`; stations keep first-appearance order.
pub fn read_series_csv<R: Read>(source: R) -> Result<Vec<AnnualMaximaSeries>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let mut out: Vec<AnnualMaximaSeries> = Vec::new();
    for (i, row) in rdr.deserialize::<SeriesRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if !(row.max_mm > 0.0 && row.max_mm.is_finite()) {
            return Err(Error::Validation(format!(
                "line {line}: annual maximum must be positive"
            )));
        }
        let pos = match out.iter().position(|s| s.station_id == row.station) {
            Some(p) => p,
            None => {
                out.push(AnnualMaximaSeries {
                    station_id: row.station.clone(),
                    observations: Vec::new(),
                });
                out.len() - 1
            }
        };
        let s = &mut out[pos];
        if s.observations.last().is_some_and(|o| o.year >= row.year) {
            return Err(Error::Validation(format!(
                "line {line}: years for station {} must be strictly increasing",
                row.station
            )));
        }
        s.observations.push(YearMax {
            year: row.year,
            max_mm: row.max_mm,
            coverage: 1.0,
        });
    }
    Ok(out)
}

/// One JSON object per line: `{"station":..,"year":..,"coverage":..}`.
pub fn write_skip_log<W: Write>(skipped: &[SkippedYear], mut out: W) -> Result<()> {
    for s in skipped {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
