use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, ExperimentSummary, OutputFormat, SimError, SweepParam, SweepPoint, SweepRow};

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "D2DCROWD_OUT_DIR";

/// Output directory: an explicit path wins, then [`OUT_DIR_ENV`], then the
/// config.
pub fn resolve_out_dir(explicit: Option<&Path>, configured: &Path) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => configured.to_path_buf(),
    }
}

/// Contents of `manifest.json`. No timestamps, so reruns produce the same
/// file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sweep: Option<SweepInfo>,
    pub files: Vec<String>,
    pub inputs_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepInfo {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
}

fn write_err(path: &Path, e: impl std::fmt::Display) -> SimError {
    SimError::Write { path: path.to_path_buf(), message: e.to_string() }
}

fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| write_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| write_err(path, e))
}

fn write_json<V: Serialize + ?Sized>(path: &Path, value: &V) -> Result<(), SimError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| write_err(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| write_err(path, e))
}

fn table<R: Serialize>(dir: &Path, stem: &str, rows: &[R], format: OutputFormat, files: &mut Vec<String>) -> Result<(), SimError> {
    let name = match format {
        OutputFormat::Csv => format!("{stem}.csv"),
        OutputFormat::Json => format!("{stem}.json"),
    };
    let path = dir.join(&name);
    match format {
        OutputFormat::Csv => write_csv(&path, rows)?,
        OutputFormat::Json => write_json(&path, rows)?,
    }
    files.push(name);
    Ok(())
}

/// Writes the summary, the raw round records, the final ledger (if any) and
/// the manifest into `dir`. Returns the written paths.
pub fn write_experiment(summary: &ExperimentSummary, dir: &Path) -> Result<Vec<PathBuf>, SimError> {
    std::fs::create_dir_all(dir).map_err(|e| write_err(dir, e))?;
    let format = summary.config.format;
    let mut files = Vec::new();
    table(dir, "summary", &summary.schemes, format, &mut files)?;
    table(dir, "rounds", &summary.records, format, &mut files)?;
    if let Some(ledger) = &summary.ledger {
        write_json(&dir.join("ledger.json"), ledger)?;
        files.push("ledger.json".into());
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: "run".into(),
        seed: summary.config.scenario.rng_seed,
        config: summary.config.clone(),
        sweep: None,
        files: files.clone(),
        inputs_sha256: summary.inputs_sha256(),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    files.push("manifest.json".into());
    Ok(files.into_iter().map(|f| dir.join(f)).collect())
}

/// Writes `sweep.csv` (or `.json`), one row per value and scheme, plus the
/// manifest.
pub fn write_sweep(
    base: &ExperimentConfig,
    param: SweepParam,
    points: &[SweepPoint],
    dir: &Path,
) -> Result<Vec<PathBuf>, SimError> {
    std::fs::create_dir_all(dir).map_err(|e| write_err(dir, e))?;
    let rows: Vec<SweepRow> = points.iter().flat_map(|p| SweepRow::from_point(param, p)).collect();
    let mut files = Vec::new();
    table(dir, "sweep", &rows, base.format, &mut files)?;
    let mut digest = String::new();
    for p in points {
        digest.push_str(&p.summary.inputs_sha256());
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: "sweep".into(),
        seed: base.scenario.rng_seed,
        config: base.clone(),
        sweep: Some(SweepInfo {
            param,
            values: points.iter().map(|p| p.value).collect(),
            seeds: points.iter().map(|p| p.seed).collect(),
        }),
        files: files.clone(),
        inputs_sha256: {
            use sha2::{Digest, Sha256};
            hex::encode(Sha256::digest(digest.as_bytes()))
        },
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    files.push("manifest.json".into());
    Ok(files.into_iter().map(|f| dir.join(f)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioConfig;
    use crate::simkit::{run_experiment, ROUND_COLUMNS};

    fn cfg() -> ExperimentConfig {
        ExperimentConfig {
            scenario: ScenarioConfig { device_count: 8, ..Default::default() },
            rounds: 3,
            ..Default::default()
        }
    }

    #[test]
    fn csv_files_have_the_documented_columns() {
        let dir = tempfile::tempdir().unwrap();
        let s = run_experiment(&cfg()).unwrap();
        let files = write_experiment(&s, dir.path()).unwrap();
        let names: Vec<String> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        assert_eq!(names, ["summary.csv", "rounds.csv", "manifest.json"]);
        let rounds = std::fs::read_to_string(dir.path().join("rounds.csv")).unwrap();
        assert_eq!(rounds.lines().next().unwrap(), ROUND_COLUMNS.join(","));
        assert_eq!(rounds.lines().count(), 1 + 3 * 4);
        let manifest: Manifest =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest.config, s.config);
        assert_eq!(manifest.seed, 1);
    }

    #[test]
    fn json_format_writes_json_tables() {
        let dir = tempfile::tempdir().unwrap();
        let s = run_experiment(&ExperimentConfig { format: OutputFormat::Json, ..cfg() }).unwrap();
        write_experiment(&s, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("rounds.json")).unwrap();
        let back: Vec<super::super::RoundRecord> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s.records);
        assert!(dir.path().join("summary.json").exists());
    }

    #[test]
    fn explicit_out_dir_wins() {
        assert_eq!(resolve_out_dir(Some(Path::new("a")), Path::new("b")), PathBuf::from("a"));
    }
}
