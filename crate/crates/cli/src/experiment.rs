use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use softqec::protocol::{run_ensemble, EnsembleResult, RunConfig};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub n_realizations: usize,
    /// Drop records inside trigger windows from the averages.
    #[serde(default = "default_exclusion")]
    pub exclusion: bool,
    /// Output subdirectory, relative to `--out`.
    pub output: String,
    pub run: RunConfig,
}

fn default_exclusion() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub experiments: BTreeMap<String, Experiment>,
}

impl ExperimentFile {
    pub fn parse(text: &str, path: &str) -> Result<Self, CliError> {
        let perr = |message: String| CliError::Parse { path: path.to_string(), message };
        let raw: toml::Table = toml::from_str(text).map_err(|e| perr(e.message().to_string()))?;
        let file: ExperimentFile = toml::from_str(text).map_err(|e| perr(e.message().to_string()))?;
        // seeds must be written out, never defaulted
        for (name, exp) in raw.get("experiments").and_then(|v| v.as_table()).into_iter().flatten() {
            let has_seed = exp.get("run").and_then(|r| r.get("seed")).is_some();
            if !has_seed {
                return Err(CliError::Unresolved(format!("experiment {name}: run.seed must be given explicitly")));
            }
        }
        file.validate()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("experiment files serialize")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.experiments.is_empty() {
            return Err(CliError::Unresolved("no experiments defined".into()));
        }
        for (name, e) in &self.experiments {
            if e.n_realizations == 0 {
                return Err(CliError::Unresolved(format!("experiment {name}: n_realizations must be positive")));
            }
            if e.output.is_empty() || Path::new(&e.output).is_absolute() {
                return Err(CliError::Unresolved(format!("experiment {name}: output must be a relative path")));
            }
            e.run.validate().map_err(|err| CliError::Unresolved(format!("experiment {name}: {err}")))?;
        }
        Ok(())
    }

    /// Experiments to run: all of them, or the named subset in file order.
    pub fn select(&self, names: &[String]) -> Result<Vec<(&str, &Experiment)>, CliError> {
        if names.is_empty() {
            return Ok(self.experiments.iter().map(|(k, v)| (k.as_str(), v)).collect());
        }
        let mut out = Vec::new();
        for (k, v) in &self.experiments {
            if names.contains(k) {
                out.push((k.as_str(), v));
            }
        }
        if let Some(missing) = names.iter().find(|n| !self.experiments.contains_key(*n)) {
            return Err(CliError::Unresolved(format!("no experiment named {missing:?}")));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub only: Vec<String>,
}

/// Scalar results of one experiment, also written as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub mode: String,
    pub seed: u64,
    pub n_realizations: usize,
    pub mean_infidelity: f64,
    pub mean_recovery_infidelity: f64,
    pub dd_mean_infidelity: Option<f64>,
    pub dd_mean_recovery_infidelity: Option<f64>,
    pub final_infidelity: f64,
    pub final_single_infidelity: f64,
    pub dd_final_infidelity: Option<f64>,
    pub dd_final_single_infidelity: Option<f64>,
    pub free_final_infidelity: Option<f64>,
    pub final_success_probability: f64,
    pub single_qubit_ratio: Option<f64>,
}

impl ExperimentReport {
    pub fn new(name: &str, n: usize, e: &EnsembleResult) -> Self {
        let dd = e.dd_only.as_ref();
        ExperimentReport {
            name: name.to_string(),
            mode: e.config.mode.name().to_string(),
            seed: e.config.seed,
            n_realizations: n,
            mean_infidelity: e.main.mean_infidelity(),
            mean_recovery_infidelity: e.main.mean_recovery_infidelity(),
            dd_mean_infidelity: dd.map(|d| d.mean_infidelity()),
            dd_mean_recovery_infidelity: dd.map(|d| d.mean_recovery_infidelity()),
            final_infidelity: 1.0 - e.main.f_full.mean,
            final_single_infidelity: 1.0 - e.main.f_single.mean,
            dd_final_infidelity: dd.map(|d| 1.0 - d.f_full.mean),
            dd_final_single_infidelity: dd.map(|d| 1.0 - d.f_single.mean),
            free_final_infidelity: e.free.as_ref().map(|d| 1.0 - d.f_full.mean),
            final_success_probability: e.main.final_sp.mean,
            single_qubit_ratio: e.single_qubit_ratio(),
        }
    }
}

fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> Result<(), CliError>) -> Result<(), CliError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    fs::write(path, buf).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Runs every selected experiment and writes `records.csv`, `summary.csv`
/// and `summary.json` into `<out>/<output>/`.
pub fn run_experiments(file: &ExperimentFile, ov: &Overrides) -> Result<Vec<ExperimentReport>, CliError> {
    let out_root = ov.out.clone().unwrap_or_else(|| PathBuf::from("results"));
    let mut reports = Vec::new();
    for (name, exp) in file.select(&ov.only)? {
        let mut cfg = exp.run.clone();
        if let Some(s) = ov.seed {
            cfg.seed = s;
        }
        let ens = run_ensemble(&cfg, exp.n_realizations, exp.exclusion)?;
        let dir = out_root.join(&exp.output);
        fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        write_file(&dir.join("records.csv"), |b| Ok(ens.write_records_csv(b)?))?;
        write_file(&dir.join("summary.csv"), |b| Ok(ens.write_summary_csv(b)?))?;
        let report = ExperimentReport::new(name, exp.n_realizations, &ens);
        write_file(&dir.join("summary.json"), |b| {
            serde_json::to_writer_pretty(&mut *b, &report).map_err(|e| CliError::Io(e.to_string()))?;
            b.push(b'\n');
            Ok(())
        })?;
        reports.push(report);
    }
    Ok(reports)
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.3e}"))
}

pub fn format_table(reports: &[ExperimentReport]) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "{:<20} {:<6} {:>4} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>8}",
        "experiment", "mode", "n", "<1-F>", "<1-F'>", "<1-F_D>", "1-F_end", "1-F1_end", "1-F1_D", "ratio"
    )
    .unwrap();
    for r in reports {
        writeln!(
            s,
            "{:<20} {:<6} {:>4} {:>10.3e} {:>10.3e} {:>10} {:>10.3e} {:>10.3e} {:>10} {:>8}",
            r.name,
            r.mode,
            r.n_realizations,
            r.mean_infidelity,
            r.mean_recovery_infidelity,
            opt(r.dd_mean_infidelity),
            r.final_infidelity,
            r.final_single_infidelity,
            opt(r.dd_final_single_infidelity),
            r.single_qubit_ratio.map_or_else(|| "-".to_string(), |v| format!("{v:.2}")),
        )
        .unwrap();
    }
    s
}
