//! Declarative experiment runs: a TOML file names the data, the model kinds,
//! the grid and the protocol; a run writes one report per kind plus a
//! comparison table.
//!
//! ```toml
//! models = ["lr", "kr", "rdr", "kdr"]
//! out = "results"
//!
//! [data]
//! kind = "files"
//! instances = ["instances.csv"]   # one file per source
//! targets = "targets.csv"
//!
//! [protocol]
//! test_fraction = 0.33
//! trials = 10
//! folds = 5
//! seed = 7
//!
//! [grid]
//! lambdas = [1e-4, 1e-2, 1.0]
//! ```
//!
//! Relative paths resolve against the directory holding the config file.
//! Every output except `timings.json` is a pure function of config and data.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{ensure_parent, load_bags, load_multisource, Dataset};
use crate::error::{Error, Result};
use crate::eval::{comparison_csv, comparison_text, format_sig, run_protocol, EvalReport, Grid, ProtocolParams};
use crate::regress::ModelKind;
use crate::synth::{mean_task, multisource_task, variance_task, MultiSourceParams, TaskParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSource {
    Files {
        instances: Vec<PathBuf>,
        targets: PathBuf,
    },
    VarianceTask {
        #[serde(default)]
        params: TaskParams,
        #[serde(default)]
        seed: u64,
    },
    MeanTask {
        #[serde(default)]
        params: TaskParams,
        #[serde(default)]
        seed: u64,
    },
    MultisourceTask {
        #[serde(default)]
        params: MultiSourceParams,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub models: Vec<ModelKind>,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default)]
    pub protocol: ProtocolParams,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parses a config file and resolves its relative paths.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let DataSource::Files { instances, targets } = &mut self.data {
            instances.iter_mut().for_each(fix);
            fix(targets);
        }
        fix(&mut self.out);
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load_data(&self) -> Result<Dataset> {
        Ok(match &self.data {
            DataSource::Files { instances, targets } => match instances.as_slice() {
                [] => return Err(Error::Config("data.instances lists no files".into())),
                [single] => Dataset::Single(load_bags(single, targets)?),
                many => Dataset::Multi(load_multisource(many, targets)?),
            },
            DataSource::VarianceTask { params, seed } => Dataset::Single(variance_task(params, *seed)?),
            DataSource::MeanTask { params, seed } => Dataset::Single(mean_task(params, *seed)?),
            DataSource::MultisourceTask { params, seed } => Dataset::Multi(multisource_task(params, *seed)?),
        })
    }
}

/// Paths of everything a run writes.
#[derive(Clone, Debug)]
pub struct RunOutputs {
    pub table_csv: PathBuf,
    pub table_text: PathBuf,
    pub hyperparameters: PathBuf,
    pub reports: Vec<PathBuf>,
    pub timings: PathBuf,
}

fn write(path: &Path, contents: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn hyperparameter_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("model,trial,seed,lambda,sigma_scale,sigma,features,cv_rmse\n");
    for r in reports {
        for t in &r.trials {
            let p = &t.chosen;
            let sigma: Vec<String> = p.sigma.iter().map(|s| format!("{s:?}")).collect();
            out.push_str(&format!(
                "{},{},{},{:?},{},{},{},{}\n",
                r.kind.label(),
                t.trial,
                t.seed,
                p.lambda,
                p.sigma_scale.map(|s| format!("{s:?}")).unwrap_or_default(),
                sigma.join(";"),
                p.features.map(|d| d.to_string()).unwrap_or_default(),
                format_sig(t.cv_rmse, 6),
            ));
        }
    }
    out
}

/// Runs the protocol for every configured kind and writes the results.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(Vec<EvalReport>, RunOutputs)> {
    if config.models.is_empty() {
        return Err(Error::Config("no models configured".into()));
    }
    let data = config.load_data()?;
    let sources = data.as_ref().num_sources();
    for kind in &config.models {
        if !kind.is_multisource() && sources != 1 {
            return Err(Error::Config(format!(
                "{} needs single-source data but the config lists {sources} sources",
                kind.label()
            )));
        }
    }

    let mut reports = Vec::with_capacity(config.models.len());
    for &kind in &config.models {
        reports.push(run_protocol(data.as_ref(), kind, &config.grid, &config.protocol)?);
    }

    let out = &config.out;
    let outputs = RunOutputs {
        table_csv: out.join("results.csv"),
        table_text: out.join("results.txt"),
        hyperparameters: out.join("hyperparameters.csv"),
        reports: reports.iter().map(|r| out.join(format!("report_{}.json", r.kind.name()))).collect(),
        timings: out.join("timings.json"),
    };
    write(&outputs.table_csv, &comparison_csv(&reports))?;
    write(&outputs.table_text, &comparison_text(&reports))?;
    write(&outputs.hyperparameters, &hyperparameter_csv(&reports))?;
    for (report, path) in reports.iter().zip(&outputs.reports) {
        let json = serde_json::to_string_pretty(report).map_err(|e| Error::Model(e.to_string()))?;
        write(path, &(json + "\n"))?;
    }
    let timings: Vec<_> = reports.iter().map(|r| (r.kind.name(), &r.timings)).collect();
    let json = serde_json::to_string_pretty(&timings).map_err(|e| Error::Model(e.to_string()))?;
    write(&outputs.timings, &(json + "\n"))?;
    Ok((reports, outputs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            models = ["lr", "stacked-kdr"]
            [data]
            kind = "files"
            instances = ["a.csv", "b.csv"]
            targets = "y.csv"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.models, vec![ModelKind::Lr, ModelKind::StackedKdr]);
        assert_eq!(cfg.protocol, ProtocolParams::default());
        assert_eq!(cfg.grid, Grid::default());
        assert_eq!(cfg.out, PathBuf::from("results"));
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ExperimentConfig {
            data: DataSource::VarianceTask {
                params: TaskParams::default(),
                seed: 4,
            },
            models: vec![ModelKind::Kdr],
            grid: Grid::default(),
            protocol: ProtocolParams::default(),
            out: PathBuf::from("out"),
        };
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }

    #[test]
    fn rejects_unknown_keys() {
        let err = ExperimentConfig::from_toml("models = []\nbogus = 1\n[data]\nkind = \"mean-task\"\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn relative_paths_follow_config_dir() {
        let mut cfg = ExperimentConfig::from_toml(
            "models = [\"kdr\"]\n[data]\nkind = \"files\"\ninstances = [\"i.csv\"]\ntargets = \"/abs/y.csv\"\n",
        )
        .unwrap();
        cfg.resolve_paths(Path::new("/cfg"));
        let DataSource::Files { instances, targets } = &cfg.data else { unreachable!() };
        assert_eq!(instances[0], PathBuf::from("/cfg/i.csv"));
        assert_eq!(targets, &PathBuf::from("/abs/y.csv"));
        assert_eq!(cfg.out, PathBuf::from("/cfg/results"));
    }
}
