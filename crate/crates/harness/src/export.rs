use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use paritybench_core::ModelClass;
use serde::Serialize;

use crate::record::RunRecord;
use crate::store::Store;
use crate::summary::{band_grid, beta_curves, kl_by_size, recovery_curves, model_summary, win_table};

pub const MODEL_SUMMARY_HEADERS: [&str; 6] = ["model", "mean_kl", "ci95", "median_kl", "kl_wins", "mean_coverage_1000"];
pub const WIN_HEADERS: [&str; 9] = ["n", "beta", "seed", "sigma", "k", "winner", "winner_kl", "tied", "contenders"];
pub const BETA_HEADERS: [&str; 11] = [
    "model",
    "n",
    "sigma",
    "k",
    "beta",
    "count",
    "mean_kl",
    "ci95",
    "median_kl",
    "mean_coverage_1000",
    "mean_recovery_1000",
];
pub const BAND_HEADERS: [&str; 9] = ["model", "n", "beta", "sigma", "k", "count", "mean_kl", "ci95", "mean_recovery_1000"];
pub const RECOVERY_HEADERS: [&str; 10] =
    ["model", "n", "sigma", "k", "beta", "budget", "count", "mean_recovery", "sd_recovery", "mean_coverage"];
pub const SIZE_HEADERS: [&str; 5] = ["model", "n", "count", "median_kl", "mean_kl"];

/// Writes `headers` then one row per item, so empty inputs still give a
/// valid file.
pub fn write_csv<T: Serialize>(path: &Path, headers: &[&str], rows: &[T]) -> anyhow::Result<()> {
    let io = || format!("writing {}", path.display());
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).with_context(io)?;
    w.write_record(headers).with_context(io)?;
    for row in rows {
        w.serialize(row).with_context(io)?;
    }
    w.flush().with_context(io)?;
    Ok(())
}

/// Files written by [`export_store`].
#[derive(Debug, Clone)]
pub struct ExportedFiles {
    pub records: PathBuf,
    pub model_summary: PathBuf,
    pub wins: PathBuf,
    pub beta_curves: PathBuf,
    pub band_grid: PathBuf,
    pub recovery_curves: PathBuf,
    pub kl_by_size: PathBuf,
}

/// Writes the records as JSON lines plus every summary table as CSV into `dir`.
///
/// Wins are counted among `compared`, or among all trained classes present
/// when `compared` is empty.
pub fn export_store(store: &Store, dir: &Path, compared: &[ModelClass]) -> anyhow::Result<ExportedFiles> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let records: Vec<&RunRecord> = store.records().collect();
    let compared: Vec<ModelClass> = if compared.is_empty() {
        let mut present: Vec<ModelClass> = records.iter().map(|r| r.model).filter(|m| m.is_trained()).collect();
        present.sort();
        present.dedup();
        present
    } else {
        compared.to_vec()
    };

    let files = ExportedFiles {
        records: dir.join("records.jsonl"),
        model_summary: dir.join("model_summary.csv"),
        wins: dir.join("wins.csv"),
        beta_curves: dir.join("beta_curves.csv"),
        band_grid: dir.join("band_grid.csv"),
        recovery_curves: dir.join("recovery_curves.csv"),
        kl_by_size: dir.join("kl_by_size.csv"),
    };
    if files.records != store.path() {
        let io = || format!("writing {}", files.records.display());
        let mut w = BufWriter::new(File::create(&files.records).with_context(io)?);
        for r in &records {
            serde_json::to_writer(&mut w, r).with_context(io)?;
            w.write_all(b"\n").with_context(io)?;
        }
        w.flush().with_context(io)?;
    }
    write_csv(&files.model_summary, &MODEL_SUMMARY_HEADERS, &model_summary(&records, &compared))?;
    write_csv(&files.wins, &WIN_HEADERS, &win_table(&records, &compared))?;
    write_csv(&files.beta_curves, &BETA_HEADERS, &beta_curves(&records))?;
    write_csv(&files.band_grid, &BAND_HEADERS, &band_grid(&records))?;
    write_csv(&files.recovery_curves, &RECOVERY_HEADERS, &recovery_curves(&records))?;
    write_csv(&files.kl_by_size, &SIZE_HEADERS, &kl_by_size(&records))?;
    Ok(files)
}

/// Appends every record of a JSON-lines file to `store`; returns how many
/// were new.
pub fn import_records(path: &Path, store: &mut Store) -> anyhow::Result<usize> {
    let file = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    let mut added = 0;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RunRecord =
            serde_json::from_str(&line).with_context(|| format!("{}:{}: malformed record", path.display(), i + 1))?;
        added += usize::from(store.append(record)?);
    }
    Ok(added)
}
