use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use paritybench::export::export_store;
use paritybench::summary::{kl_by_size, model_summary};
use paritybench::{import_records, run_instance, run_sweep, InstanceRecord, RunRecord, Store, SweepSpec};
use paritybench_core::{make_instance, BenchmarkConfig, ModelClass};
use serde::Deserialize;

const OUT_ENV: &str = "PARITYBENCH_OUT";

#[derive(Parser)]
#[command(name = "paritybench", version, about = "Exact parity-supervision benchmark for IQP Born machines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build one instance and print its replayable record as JSON.
    Instance(InstanceArgs),
    /// Train and evaluate chosen models on one instance.
    Run(RunArgs),
    /// The reference sweep: 20 betas x seeds 111-120 at (sigma, K) = (1, 512).
    Sweep(SweepArgs),
    /// Band ablation at beta = 0.9 over sigma in {0.5,1,2,3} x K in {128,256,512}.
    AblateBand(SweepArgs),
    /// Size sweep at beta = 0.9 over n = 10..=20 with unchanged hyperparameters.
    Nsweep(SweepArgs),
    /// Print the per-model and KL-by-size summaries of a store.
    Summarize(SummarizeArgs),
    /// Write records as JSON lines and every summary as CSV.
    Export(ExportArgs),
    /// Append the records of a JSON-lines file to a store.
    Import(ImportArgs),
}

#[derive(Args, Clone)]
struct InstanceArgs {
    #[arg(long, default_value_t = 12)]
    n: u32,
    #[arg(long, default_value_t = 0.9)]
    beta: f64,
    #[arg(long, default_value_t = 111)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long = "K", visible_alias = "k", default_value_t = 512)]
    k: usize,
    /// Training-sample size.
    #[arg(long, default_value_t = 200)]
    m: usize,
    #[arg(long, default_value_t = 0.1)]
    tau: f64,
}

impl InstanceArgs {
    fn config(&self) -> BenchmarkConfig {
        BenchmarkConfig {
            n: self.n,
            beta: self.beta,
            seed: self.seed,
            m: self.m,
            sigma: self.sigma,
            k: self.k,
            tau: self.tau,
        }
    }
}

#[derive(Args, Clone, Default)]
struct TrainArgs {
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Standard deviation of the IQP angle initialization.
    #[arg(long)]
    iqp_init_std: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, value_delimiter = ',', default_value = "iqp-parity,iqp-mse,ising-sparse,ising-dense,maxent,spectral-proxy,uniform,uniform-support")]
    models: Vec<ModelClass>,
    #[arg(long, value_delimiter = ',', default_value = "1000,2000,5000")]
    budgets: Vec<u64>,
    #[command(flatten)]
    train: TrainArgs,
    /// Also append the records to this store directory.
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// TOML file with any of the flags below; flags win over the file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    betas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<u32>>,
    /// Band parameters; crossed with `--K`.
    #[arg(long, value_delimiter = ',')]
    sigma: Option<Vec<f64>>,
    #[arg(long = "K", visible_alias = "k", value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<ModelClass>>,
    #[arg(long, value_delimiter = ',')]
    budgets: Option<Vec<u64>>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long)]
    workers: Option<usize>,
    /// Store directory.
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
}

/// Mirror of the sweep flags for the config file.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    betas: Option<Vec<f64>>,
    seeds: Option<Vec<u64>>,
    n: Option<Vec<u32>>,
    sigma: Option<Vec<f64>>,
    #[serde(alias = "K")]
    k: Option<Vec<usize>>,
    models: Option<Vec<ModelClass>>,
    budgets: Option<Vec<u64>>,
    m: Option<usize>,
    tau: Option<f64>,
    lr: Option<f64>,
    steps: Option<usize>,
    iqp_init_std: Option<f64>,
    workers: Option<usize>,
    out: Option<PathBuf>,
}

impl SweepArgs {
    /// Protocol defaults, then the config file, then the flags.
    fn resolve(self, mut spec: SweepSpec) -> anyhow::Result<(SweepSpec, usize, PathBuf)> {
        let file = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                toml::from_str::<FileConfig>(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => FileConfig::default(),
        };
        if let Some(v) = self.betas.or(file.betas) {
            spec.betas = v;
        }
        if let Some(v) = self.seeds.or(file.seeds) {
            spec.seeds = v;
        }
        if let Some(v) = self.n.or(file.n) {
            spec.ns = v;
        }
        let sigmas = self.sigma.or(file.sigma);
        let ks = self.k.or(file.k);
        if sigmas.is_some() || ks.is_some() {
            let mut s: Vec<f64> = spec.bands.iter().map(|b| b.0).collect();
            let mut k: Vec<usize> = spec.bands.iter().map(|b| b.1).collect();
            s.dedup();
            k.sort_unstable();
            k.dedup();
            let s = sigmas.unwrap_or(s);
            let k = ks.unwrap_or(k);
            spec.bands = s.iter().flat_map(|&s| k.iter().map(move |&k| (s, k))).collect();
        }
        if let Some(v) = self.models.or(file.models) {
            spec.models = v;
        }
        if let Some(v) = self.budgets.or(file.budgets) {
            spec.budgets = v;
        }
        if let Some(v) = self.m.or(file.m) {
            spec.m = v;
        }
        if let Some(v) = self.tau.or(file.tau) {
            spec.tau = v;
        }
        if let Some(v) = self.train.lr.or(file.lr) {
            spec.train.optimizer.learning_rate = v;
        }
        if let Some(v) = self.train.steps.or(file.steps) {
            spec.train.optimizer.steps = v;
        }
        if let Some(v) = self.train.iqp_init_std.or(file.iqp_init_std) {
            spec.train.iqp_init_std = v;
        }
        let workers = self.workers.or(file.workers).unwrap_or_else(rayon::current_num_threads);
        let out = self.out.or(file.out).context("no output directory: pass --out or set PARITYBENCH_OUT")?;
        Ok((spec, workers, out))
    }
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(long, env = OUT_ENV)]
    out: PathBuf,
    /// Keep only records with these sizes.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',')]
    betas: Option<Vec<f64>>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long = "K", visible_alias = "k")]
    k: Option<usize>,
    /// Classes competing for KL wins; defaults to every trained class present.
    #[arg(long, value_delimiter = ',')]
    compare: Option<Vec<ModelClass>>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long, env = OUT_ENV)]
    out: PathBuf,
    /// Destination directory; defaults to `<out>/export`.
    #[arg(long)]
    dest: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    compare: Option<Vec<ModelClass>>,
}

#[derive(Args)]
struct ImportArgs {
    #[arg(long, env = OUT_ENV)]
    out: PathBuf,
    file: PathBuf,
}

fn train_settings(args: &TrainArgs) -> paritybench::TrainSettings {
    let mut s = paritybench::TrainSettings::default();
    if let Some(v) = args.lr {
        s.optimizer.learning_rate = v;
    }
    if let Some(v) = args.steps {
        s.optimizer.steps = v;
    }
    if let Some(v) = args.iqp_init_std {
        s.iqp_init_std = v;
    }
    s
}

fn print_record(r: &RunRecord) {
    let instance = &r.instance;
    let head = format!(
        "n={:<2} beta={:<4} seed={} sigma={} K={:<4} {:<15}",
        instance.n,
        instance.beta,
        instance.seed,
        instance.sigma,
        instance.k,
        r.model.name()
    );
    match (&r.metrics, &r.failure) {
        (Some(m), _) => println!(
            "{head} kl={:.4}{} C(1000)={} R(1000)={} ({:.1}s)",
            m.kl,
            if m.kl_clamped { " [clamped]" } else { "" },
            m.coverage.coverage_at(1000).map_or("-".into(), |v| format!("{v:.4}")),
            m.coverage.recovery_at(1000).map_or("-".into(), |v| format!("{v:.4}")),
            r.wall_clock_secs
        ),
        (None, Some(f)) => println!("{head} FAILED: {f}"),
        (None, None) => println!("{head} no metrics"),
    }
}

fn sweep(args: SweepArgs, base: SweepSpec) -> anyhow::Result<()> {
    let (spec, workers, out) = args.resolve(base)?;
    let mut store = Store::open(&out)?;
    let total = spec.task_count();
    let done = AtomicUsize::new(0);
    eprintln!("{total} tasks on {workers} workers, store {}", store.path().display());
    let report = run_sweep(&spec, workers, &mut store, &|r| {
        let k = done.fetch_add(1, Ordering::Relaxed) + 1;
        print!("[{k}] ");
        print_record(r);
    })?;
    eprintln!(
        "done: {} tasks, {} already stored, {} computed, {} failed",
        report.total, report.skipped, report.computed, report.failed
    );
    Ok(())
}

fn filtered<'a>(store: &'a Store, args: &SummarizeArgs) -> Vec<&'a RunRecord> {
    store
        .records()
        .filter(|r| args.n.as_ref().is_none_or(|v| v.contains(&r.instance.n)))
        .filter(|r| args.betas.as_ref().is_none_or(|v| v.contains(&r.instance.beta)))
        .filter(|r| args.sigma.is_none_or(|s| s == r.instance.sigma))
        .filter(|r| args.k.is_none_or(|k| k == r.instance.k))
        .collect()
}

fn summarize(args: SummarizeArgs) -> anyhow::Result<()> {
    let store = Store::open(&args.out)?;
    let records = filtered(&store, &args);
    let compared = args.compare.clone().unwrap_or_else(|| {
        let mut v: Vec<ModelClass> = records.iter().map(|r| r.model).filter(|m| m.is_trained()).collect();
        v.sort();
        v.dedup();
        v
    });
    println!("{} records; 95% CI by normal approximation; KL in nats", records.len());
    println!("{:<16} {:>5} {:>16} {:>9} {:>8} {:>11}", "model", "count", "mean KL", "median", "wins", "C(1000)");
    for row in model_summary(&records, &compared) {
        let wins = row.kl_wins.map_or("-".to_string(), |w| {
            if row.tied_wins > 0 {
                format!("{w} ({} tied)", row.tied_wins)
            } else {
                w.to_string()
            }
        });
        println!(
            "{:<16} {:>5} {:>8.3} +- {:<5.3} {:>9.3} {:>8} {:>11}",
            row.model.name(),
            row.instances,
            row.mean_kl,
            row.ci95,
            row.median_kl,
            wins,
            row.mean_coverage_1000.map_or("-".into(), |c| format!("{c:.4}"))
        );
    }
    let sizes = kl_by_size(&records);
    if sizes.iter().map(|r| r.n).collect::<std::collections::BTreeSet<_>>().len() > 1 {
        println!();
        println!("{:<16} {:>4} {:>5} {:>10}", "model", "n", "count", "median KL");
        for row in sizes {
            println!("{:<16} {:>4} {:>5} {:>10.3}", row.model.name(), row.n, row.count, row.median_kl);
        }
    }
    Ok(())
}

fn export(args: ExportArgs) -> anyhow::Result<()> {
    let store = Store::open(&args.out)?;
    let dest = args.dest.unwrap_or_else(|| args.out.join("export"));
    let files = export_store(&store, &dest, args.compare.as_deref().unwrap_or(&[]))?;
    for path in [
        &files.records,
        &files.model_summary,
        &files.wins,
        &files.beta_curves,
        &files.band_grid,
        &files.recovery_curves,
        &files.kl_by_size,
    ] {
        println!("{}", path.display());
    }
    Ok(())
}

fn import(out: &Path, file: &Path) -> anyhow::Result<()> {
    let mut store = Store::open(out)?;
    let added = import_records(file, &mut store)?;
    println!("{added} new records, {} total", store.len());
    Ok(())
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Instance(args) => {
            let instance = make_instance(&args.config())?;
            println!("{}", serde_json::to_string_pretty(&InstanceRecord::new(&instance))?);
        }
        Command::Run(args) => {
            let instance = make_instance(&args.instance.config())?;
            let settings = train_settings(&args.train);
            let records = run_instance(&instance, &args.models, &settings, &args.budgets);
            records.iter().for_each(print_record);
            if let Some(out) = args.out {
                let mut store = Store::open(&out)?;
                for r in records {
                    store.append(r)?;
                }
            }
        }
        Command::Sweep(args) => sweep(args, SweepSpec::default())?,
        Command::AblateBand(args) => sweep(args, SweepSpec::band_ablation())?,
        Command::Nsweep(args) => sweep(args, SweepSpec::n_sweep())?,
        Command::Summarize(args) => summarize(args)?,
        Command::Export(args) => export(args)?,
        Command::Import(args) => import(&args.out, &args.file)?,
    }
    Ok(())
}
