//! Subcommand implementations. Each writes only inside `cfg.out`.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use evclust::cluster::{
    self, euclidean_dm, extremal_coefficient, fmadogram_dm, param_features, select_k, ward_cluster, ClusterInput,
    KCriterion, KSelection,
};
use evclust::diagnose::{self, PlotMeta};
use evclust::estimate::{self, Constraint, FitResult, ProfileInterval};
use evclust::gof::{self, FamilyDecision, TestResult};
use evclust::ingest::{self, AnnualMaximaSeries, SkippedYear};
use evclust::recurrence::{self, PairReport};
use evclust::{seed, table1};

use crate::config::{ClusterMethod, RunConfig};
use crate::error::{CliError, CliResult};

/// Present in an output directory while a command is running; left behind
/// when it fails so partial outputs are recognizable.
pub const INCOMPLETE_MARKER: &str = "_INCOMPLETE";

const PROFILE_LEVEL: f64 = 0.95;

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(evclust::Error::from)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

fn finish(w: BufWriter<File>, path: &Path) -> CliResult<()> {
    w.into_inner().map_err(|e| CliError::io(path, e.into_error()))?;
    Ok(())
}

/// File-name-safe form of a station id.
fn slug(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Runs `body` with the incomplete marker in place.
pub fn guarded(cfg: &RunConfig, body: impl FnOnce(&RunConfig) -> CliResult<()>) -> CliResult<()> {
    let marker = cfg.out.join(INCOMPLETE_MARKER);
    fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
    fs::write(&marker, b"").map_err(|e| CliError::io(&marker, e))?;
    body(cfg)?;
    write_json(&cfg.out.join("run_config.json"), cfg)?;
    fs::remove_file(&marker).map_err(|e| CliError::io(&marker, e))
}

// ---- ingestion ----

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Daily,
    Series,
}

pub fn detect_format(path: &Path) -> CliResult<InputFormat> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut header = String::new();
    BufReader::new(file)
        .read_line(&mut header)
        .map_err(|e| CliError::io(path, e))?;
    let fields: Vec<String> = header.trim().split(',').map(|s| s.trim().to_string()).collect();
    match fields.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["station", "date", "precip_mm"] => Ok(InputFormat::Daily),
        ["station", "year", "max_mm"] => Ok(InputFormat::Series),
        _ => Err(CliError::Format {
            path: path.to_path_buf(),
            header: header.trim().to_string(),
        }),
    }
}

pub fn load_series(cfg: &RunConfig) -> CliResult<(Vec<AnnualMaximaSeries>, Vec<SkippedYear>)> {
    let path = cfg.input()?;
    let format = detect_format(path)?;
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    match format {
        InputFormat::Series => Ok((ingest::read_series_csv(BufReader::new(file))?, Vec::new())),
        InputFormat::Daily => {
            let records = ingest::parse_daily_csv(BufReader::new(file))?;
            Ok(ingest::block_maxima(&records, cfg.min_coverage)?)
        }
    }
}

fn write_series_outputs(dir: &Path, series: &[AnnualMaximaSeries], skipped: &[SkippedYear]) -> CliResult<()> {
    let path = dir.join("series.csv");
    let mut w = create(&path)?;
    ingest::write_series_csv(series, &mut w)?;
    finish(w, &path)?;

    let path = dir.join("skipped.jsonl");
    let mut w = create(&path)?;
    ingest::write_skip_log(skipped, &mut w)?;
    finish(w, &path)?;

    let path = dir.join("summary.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["station", "n", "min", "q1", "median", "q3", "max", "mean"])
        .map_err(evclust::Error::from)?;
    for s in series {
        let m = ingest::summary_stats(s)?;
        w.write_record([
            s.station_id.clone(),
            s.len().to_string(),
            m.min.to_string(),
            m.q1.to_string(),
            m.median.to_string(),
            m.q3.to_string(),
            m.max.to_string(),
            m.mean.to_string(),
        ])
        .map_err(evclust::Error::from)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))
}

pub fn cmd_ingest(cfg: &RunConfig) -> CliResult<()> {
    let (series, skipped) = load_series(cfg)?;
    write_series_outputs(&cfg.out, &series, &skipped)
}

/// Reference station parameters, seeded draws, `station,year,max_mm`.
pub fn cmd_synth(cfg: &RunConfig) -> CliResult<()> {
    let series = ingest::synth_dataset(&table1::station_params(), cfg.years, cfg.seed)?;
    let path = cfg.out.join("series.csv");
    let mut w = create(&path)?;
    ingest::write_series_csv(&series, &mut w)?;
    finish(w, &path)
}

// ---- fitting ----

#[derive(Debug, Clone, Serialize)]
pub struct StationFit {
    pub station: String,
    pub n: usize,
    pub mle: FitResult,
    pub gumbel: FitResult,
    pub pwm: Option<FitResult>,
    pub pwm_error: Option<String>,
    pub profile_ci: Option<ProfileInterval>,
    pub profile_error: Option<String>,
}

pub fn fit_station(series: &AnnualMaximaSeries) -> CliResult<StationFit> {
    let x = series.values();
    let mle = estimate::fit_mle(&x, Constraint::Free)?;
    let gumbel = estimate::fit_mle(&x, Constraint::Gumbel)?;
    let (pwm, pwm_error) = match estimate::fit_pwm(&x) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let (profile_ci, profile_error) = match estimate::profile_ci_from_fit(&x, &mle, PROFILE_LEVEL) {
        Ok(ci) => (Some(ci), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(StationFit {
        station: series.station_id.clone(),
        n: x.len(),
        mle,
        gumbel,
        pwm,
        pwm_error,
        profile_ci,
        profile_error,
    })
}

pub fn fit_all(series: &[AnnualMaximaSeries]) -> CliResult<Vec<StationFit>> {
    series.par_iter().map(fit_station).collect()
}

fn write_fit_outputs(dir: &Path, fits: &[StationFit]) -> CliResult<()> {
    let path = dir.join("table1.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["station", "mu", "sigma", "xi", "ci_lo", "ci_hi"])
        .map_err(evclust::Error::from)?;
    for f in fits {
        let p = f.mle.params;
        w.write_record([
            f.station.clone(),
            p.mu.to_string(),
            p.sigma.to_string(),
            p.xi.to_string(),
            opt(f.profile_ci.map(|c| c.lower)),
            opt(f.profile_ci.map(|c| c.upper)),
        ])
        .map_err(evclust::Error::from)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;

    let path = dir.join("fits.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record([
        "station",
        "n",
        "estimator",
        "mu",
        "sigma",
        "xi",
        "se_mu",
        "se_sigma",
        "se_xi",
        "loglik",
    ])
    .map_err(evclust::Error::from)?;
    for f in fits {
        for (name, fit) in [
            ("mle", Some(&f.mle)),
            ("mle_gumbel", Some(&f.gumbel)),
            ("pwm", f.pwm.as_ref()),
        ] {
            let Some(fit) = fit else { continue };
            let se = fit.std_errors;
            w.write_record([
                f.station.clone(),
                f.n.to_string(),
                name.to_string(),
                fit.params.mu.to_string(),
                fit.params.sigma.to_string(),
                fit.params.xi.to_string(),
                opt(se.map(|s| s[0])),
                opt(se.map(|s| s[1])),
                opt(se.map(|s| s[2])),
                fit.loglik.to_string(),
            ])
            .map_err(evclust::Error::from)?;
        }
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    write_json(&dir.join("fits.json"), &fits)
}

pub fn cmd_fit(cfg: &RunConfig) -> CliResult<()> {
    let (series, _) = load_series(cfg)?;
    write_fit_outputs(&cfg.out, &fit_all(&series)?)
}

// ---- goodness of fit ----

#[derive(Debug, Clone, Serialize)]
pub struct StationGof {
    pub station: String,
    pub decision: FamilyDecision,
    pub lrt: TestResult,
}

pub fn gof_all(cfg: &RunConfig, series: &[AnnualMaximaSeries], fits: &[StationFit]) -> CliResult<Vec<StationGof>> {
    series
        .par_iter()
        .zip(fits)
        .map(|(s, f)| {
            let station_seed = seed::derive(cfg.seed, &format!("gof/{}", s.station_id), 0);
            let decision = gof::select_family(&s.values(), cfg.alpha, cfg.delta, cfg.bootstrap, station_seed)?;
            Ok(StationGof {
                station: s.station_id.clone(),
                decision,
                lrt: gof::lrt_from_fits(&f.mle, &f.gumbel),
            })
        })
        .collect()
}

fn write_gof_outputs(dir: &Path, results: &[StationGof]) -> CliResult<()> {
    let path = dir.join("gof.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["station", "family", "p_gumbel", "p_second"])
        .map_err(evclust::Error::from)?;
    for r in results {
        w.write_record([
            r.station.clone(),
            r.decision.chosen.to_string(),
            r.decision.gumbel_p.to_string(),
            opt(r.decision.second_p),
        ])
        .map_err(evclust::Error::from)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    write_json(&dir.join("gof.json"), &results)
}

pub fn cmd_gof(cfg: &RunConfig) -> CliResult<()> {
    let (series, _) = load_series(cfg)?;
    let fits = fit_all(&series)?;
    write_gof_outputs(&cfg.out, &gof_all(cfg, &series, &fits)?)
}

// ---- diagnostics ----

fn write_diagnostics(dir: &Path, series: &[AnnualMaximaSeries], fits: &[StationFit]) -> CliResult<()> {
    for (s, f) in series.iter().zip(fits) {
        for plot in diagnose::all_series(&s.values(), &f.mle.params)? {
            let stem = format!("{}_{}", slug(&s.station_id), plot.kind.name());
            let path = dir.join(format!("{stem}.csv"));
            let mut w = create(&path)?;
            plot.write_csv(&mut w)?;
            finish(w, &path)?;
            let meta = PlotMeta {
                kind: plot.kind,
                station: s.station_id.clone(),
                params: f.mle.params,
            };
            write_json(&dir.join(format!("{stem}.json")), &meta)?;
        }
    }
    Ok(())
}

pub fn cmd_diagnose(cfg: &RunConfig) -> CliResult<()> {
    let (series, _) = load_series(cfg)?;
    let fits = fit_all(&series)?;
    write_diagnostics(&cfg.out, &series, &fits)
}

// ---- clustering ----

fn effective_kmax(cfg: &RunConfig, n: usize) -> CliResult<usize> {
    if n < 3 {
        return Err(evclust::Error::Validation(format!("clustering needs at least 3 stations, got {n}")).into());
    }
    Ok(cfg.kmax.min(n - 1))
}

fn write_selection(dir: &Path, name: &str, sel: &KSelection) -> CliResult<()> {
    let path = dir.join(format!("{name}.csv"));
    let mut w = create(&path)?;
    sel.write_scores_csv(&mut w)?;
    finish(w, &path)
}

fn write_partitions(dir: &Path, sel: &KSelection) -> CliResult<()> {
    for p in &sel.partitions {
        write_json(&dir.join(format!("partition_K{}.json", p.k)), &p.to_json())?;
    }
    Ok(())
}

fn write_dm(path: &Path, dm: &cluster::DistanceMatrix) -> CliResult<()> {
    let mut w = create(path)?;
    dm.write_tsv(&mut w)?;
    finish(w, path)
}

/// Ward on fitted parameters. Returns the silhouette selection, whose K = 2
/// partition drives the independence analysis.
pub fn cluster_params(cfg: &RunConfig, fits: &[StationFit], dir: &Path) -> CliResult<KSelection> {
    let pairs: Vec<(String, FitResult)> = fits.iter().map(|f| (f.station.clone(), f.mle.clone())).collect();
    let features = param_features(&pairs, cfg.standardize)?;
    let kmax = effective_kmax(cfg, features.len())?;
    write_dm(&dir.join("distances.tsv"), &euclidean_dm(&features))?;
    write_json(&dir.join("features.json"), &features)?;
    write_json(&dir.join("dendrogram.json"), &ward_cluster(&features)?)?;
    let by_silhouette = select_k(ClusterInput::Features(&features), KCriterion::Silhouette, kmax)?;
    let by_pseudo_f = select_k(ClusterInput::Features(&features), KCriterion::PseudoF, kmax)?;
    write_selection(dir, "silhouette", &by_silhouette)?;
    write_selection(dir, "pseudo_f", &by_pseudo_f)?;
    write_partitions(dir, &by_silhouette)?;
    write_json(
        &dir.join("selected.json"),
        &serde_json::json!({ "silhouette": by_silhouette.chosen, "pseudo_f": by_pseudo_f.chosen }),
    )?;
    Ok(by_silhouette)
}

/// PAM on the F-madogram distance.
pub fn cluster_fmadogram(cfg: &RunConfig, series: &[AnnualMaximaSeries], dir: &Path) -> CliResult<KSelection> {
    let dm = fmadogram_dm(series, cfg.min_overlap)?;
    let kmax = effective_kmax(cfg, dm.len())?;
    write_dm(&dir.join("distances.tsv"), &dm)?;

    let path = dir.join("extremal_coefficients.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["a", "b", "madogram", "theta_raw", "theta"])
        .map_err(evclust::Error::from)?;
    for i in 0..dm.len() {
        for j in i + 1..dm.len() {
            let nu = dm.get(i, j);
            let theta = extremal_coefficient(nu)?;
            w.write_record([
                dm.labels()[i].clone(),
                dm.labels()[j].clone(),
                nu.to_string(),
                theta.raw.to_string(),
                theta.clipped.to_string(),
            ])
            .map_err(evclust::Error::from)?;
        }
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;

    let sel = select_k(ClusterInput::Distances(&dm), KCriterion::Silhouette, kmax)?;
    write_selection(dir, "silhouette", &sel)?;
    write_partitions(dir, &sel)?;
    write_json(
        &dir.join("selected.json"),
        &serde_json::json!({ "silhouette": sel.chosen }),
    )?;
    Ok(sel)
}

pub fn cmd_cluster(cfg: &RunConfig) -> CliResult<()> {
    let (series, _) = load_series(cfg)?;
    match cfg.method {
        ClusterMethod::Params => cluster_params(cfg, &fit_all(&series)?, &cfg.out).map(drop),
        ClusterMethod::Fmadogram => cluster_fmadogram(cfg, &series, &cfg.out).map(drop),
    }
}

// ---- independence ----

fn write_independence(path_stem: &Path, rows: &[PairReport]) -> CliResult<()> {
    let csv_path = path_stem.with_extension("csv");
    let mut w = create(&csv_path)?;
    recurrence::write_report_csv(rows, &mut w)?;
    finish(w, &csv_path)?;
    write_json(&path_stem.with_extension("json"), &rows)
}

pub fn independence_for(cfg: &RunConfig, series: &[AnnualMaximaSeries], target: &str) -> CliResult<Vec<PairReport>> {
    let rc = cfg.recurrence(seed::derive(cfg.seed, "independence", 0));
    Ok(recurrence::pairwise_independence_report(series, target, &rc)?)
}

pub fn cmd_indep(cfg: &RunConfig) -> CliResult<()> {
    let target = cfg
        .target
        .as_deref()
        .ok_or_else(|| CliError::Config("--target is required".into()))?;
    let (series, _) = load_series(cfg)?;
    let rows = independence_for(cfg, &series, target)?;
    write_independence(&cfg.out.join("independence"), &rows)
}

// ---- full pipeline ----

pub fn cmd_report(cfg: &RunConfig) -> CliResult<()> {
    let out = &cfg.out;
    let (series, skipped) = load_series(cfg)?;
    write_series_outputs(out, &series, &skipped)?;

    let fits = fit_all(&series)?;
    write_fit_outputs(out, &fits)?;
    write_gof_outputs(out, &gof_all(cfg, &series, &fits)?)?;
    write_diagnostics(&out.join("diagnostics"), &series, &fits)?;

    let params = cluster_params(cfg, &fits, &out.join("cluster_params"))?;
    cluster_fmadogram(cfg, &series, &out.join("cluster_fmadogram"))?;

    // stations isolated by the two-group parameter clustering are tested
    // against every other station
    let two = params.partition(2).expect("K = 2 is always scored");
    let targets: Vec<String> = two.singletons().into_iter().map(|i| two.labels[i].clone()).collect();
    let dir: PathBuf = out.join("independence");
    for t in &targets {
        write_independence(&dir.join(slug(t)), &independence_for(cfg, &series, t)?)?;
    }
    write_json(&dir.join("targets.json"), &targets)
}
