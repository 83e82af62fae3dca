use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use evclust::{gof, ingest, recurrence, table1};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ClusterMethod {
    /// Ward on fitted GEV parameters.
    Params,
    /// PAM on the F-madogram distance between series.
    Fmadogram,
}

/// Every knob of a run. Loaded from an optional JSON file, then overridden
/// by command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub alpha: f64,
    pub delta: f64,
    pub bootstrap: usize,
    pub permutations: usize,
    pub min_coverage: f64,
    pub min_overlap: usize,
    pub standardize: bool,
    pub kmax: usize,
    pub method: ClusterMethod,
    /// Station tested against all others by `indep`.
    pub target: Option<String>,
    /// Length of the series written by `synth`.
    pub years: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            out: PathBuf::from("out"),
            seed: 7,
            alpha: gof::DEFAULT_ALPHA,
            delta: gof::DEFAULT_DELTA,
            bootstrap: gof::DEFAULT_BOOTSTRAP,
            permutations: recurrence::DEFAULT_PERMUTATIONS,
            min_coverage: ingest::DEFAULT_MIN_COVERAGE,
            min_overlap: evclust::cluster::DEFAULT_MIN_OVERLAP,
            standardize: true,
            kmax: 7,
            method: ClusterMethod::Params,
            target: None,
            years: table1::YEARS,
        }
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON file mirroring the run configuration; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Daily (`station,date,precip_mm`) or annual-maxima (`station,year,max_mm`) CSV.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Truncation fraction of the Cramér–von Mises statistic.
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    #[arg(long, global = true)]
    pub bootstrap: Option<usize>,
    #[arg(long, global = true)]
    pub permutations: Option<usize>,
    #[arg(long, global = true)]
    pub min_coverage: Option<f64>,
    #[arg(long, global = true)]
    pub min_overlap: Option<usize>,
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub standardize: Option<bool>,
    #[arg(long, global = true)]
    pub kmax: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub method: Option<ClusterMethod>,
    #[arg(long, global = true)]
    pub target: Option<String>,
    #[arg(long, global = true)]
    pub years: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn resolve(flags: &Overrides) -> CliResult<Self> {
        let mut cfg = match &flags.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = flags.$f.clone() { cfg.$f = v; } )* };
        }
        take!(
            out,
            seed,
            alpha,
            delta,
            bootstrap,
            permutations,
            min_coverage,
            min_overlap,
            standardize,
            kmax,
            method,
            years
        );
        if flags.input.is_some() {
            cfg.input = flags.input.clone();
        }
        if flags.target.is_some() {
            cfg.target = flags.target.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if !(0.0..0.5).contains(&self.delta) {
            return bad(format!("delta must lie in [0, 0.5), got {}", self.delta));
        }
        if self.bootstrap < gof::MIN_BOOTSTRAP {
            return bad(format!("bootstrap must be at least {}", gof::MIN_BOOTSTRAP));
        }
        if self.permutations < recurrence::MIN_PERMUTATIONS {
            return bad(format!(
                "permutations must be at least {}",
                recurrence::MIN_PERMUTATIONS
            ));
        }
        if !(self.min_coverage > 0.0 && self.min_coverage <= 1.0) {
            return bad(format!("min_coverage must lie in (0, 1], got {}", self.min_coverage));
        }
        if self.min_overlap < 2 {
            return bad("min_overlap must be at least 2".into());
        }
        if self.kmax < 2 {
            return bad("kmax must be at least 2".into());
        }
        if self.years == 0 {
            return bad("years must be positive".into());
        }
        Ok(())
    }

    pub fn input(&self) -> CliResult<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| CliError::Config("--input is required".into()))
    }

    pub fn recurrence(&self, seed: u64) -> recurrence::RecurrenceConfig {
        recurrence::RecurrenceConfig {
            permutations: self.permutations,
            seed,
            ..Default::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(
            &path,
            r#"{"seed": 11, "kmax": 5, "standardize": false, "method": "fmadogram"}"#,
        )
        .unwrap();
        let flags = Overrides {
            config: Some(path.clone()),
            kmax: Some(4),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(&flags).unwrap();
        assert_eq!(cfg.seed, 11);
        assert_eq!(cfg.kmax, 4);
        assert!(!cfg.standardize);
        assert_eq!(cfg.method, ClusterMethod::Fmadogram);
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = RunConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn rejects_out_of_domain_values() {
        for flags in [
            Overrides {
                alpha: Some(1.5),
                ..Default::default()
            },
            Overrides {
                bootstrap: Some(10),
                ..Default::default()
            },
            Overrides {
                kmax: Some(1),
                ..Default::default()
            },
            Overrides {
                delta: Some(0.5),
                ..Default::default()
            },
        ] {
            assert!(RunConfig::resolve(&flags).is_err());
        }
    }

    #[test]
    fn unknown_config_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"sed": 1}"#).unwrap();
        let flags = Overrides {
            config: Some(path),
            ..Default::default()
        };
        assert!(matches!(RunConfig::resolve(&flags), Err(CliError::Config(_))));
    }
}
