//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.
//!
//! Runs are kept in a result store under the cargo target directory, so a
//! second invocation only recomputes what is missing. Set
//! `PARITYBENCH_ACCEPTANCE_STORE` to use another directory, and
//! `PARITYBENCH_WORKERS` to cap the thread count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use paritybench::summary::{mean, median};
use paritybench::{run_sweep, RunRecord, Store, SweepSpec, TrainSettings};
use paritybench_core::models::BornModel;
use paritybench_core::{
    expected_discoveries, forward_kl, fwht, kl_decomposition, linear_reconstruction, make_instance, region_visibility,
    sample_band, spectral_proxy, spectrum_of, valid_support, BenchmarkConfig, IqpParams, IsingDenseParams,
    IsingSparseParams, Mask, MaxEntParams, ModelClass, OptimizerConfig, ParityBand, ProbabilityTable, StateSet,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BUDGET: u64 = 1000;

struct Verdicts {
    lines: Vec<(String, bool, String)>,
}

impl Verdicts {
    fn record(&mut self, name: &str, pass: bool, detail: String) {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.lines.push((name.to_string(), pass, detail));
    }
}

struct Runs {
    store: Store,
    workers: usize,
}

impl Runs {
    fn ensure(&mut self, spec: &SweepSpec) {
        let report = run_sweep(spec, self.workers, &mut self.store, &|_| {}).expect("sweep");
        if report.computed > 0 {
            println!("       ({} runs computed, {} reused)", report.computed, report.skipped);
        }
    }

    /// KL-bearing records of `spec`, indexed by (instance, model).
    fn collect(&self, spec: &SweepSpec) -> BTreeMap<(String, ModelClass), RunRecord> {
        let mut out = BTreeMap::new();
        for config in spec.instances() {
            for &model in &spec.models {
                let key = paritybench::record::record_key(&config, model, &spec.train, &spec.budgets);
                let rec = self.store.get(&key).unwrap_or_else(|| panic!("missing run {config:?} {model}"));
                assert!(rec.failure.is_none(), "{model} on {config:?} failed: {:?}", rec.failure);
                out.insert((instance_id(&config), model), rec.clone());
            }
        }
        out
    }
}

fn instance_id(c: &BenchmarkConfig) -> String {
    format!("n{}-b{}-s{}-sig{}-k{}", c.n, c.beta, c.seed, c.sigma, c.k)
}

fn kl_of(runs: &BTreeMap<(String, ModelClass), RunRecord>, spec: &SweepSpec, model: ModelClass) -> Vec<f64> {
    spec.instances().iter().map(|c| runs[&(instance_id(c), model)].kl().unwrap()).collect()
}

fn coverage_of(runs: &BTreeMap<(String, ModelClass), RunRecord>, spec: &SweepSpec, model: ModelClass) -> Vec<f64> {
    spec.instances().iter().map(|c| runs[&(instance_id(c), model)].coverage_at(BUDGET).unwrap()).collect()
}

fn recovery_of(runs: &BTreeMap<(String, ModelClass), RunRecord>, spec: &SweepSpec, model: ModelClass) -> Vec<f64> {
    spec.instances().iter().map(|c| runs[&(instance_id(c), model)].recovery_at(BUDGET).unwrap()).collect()
}

/// One-sided sign-test p-value for `wins` successes out of `trials`.
fn sign_test_p(wins: usize, trials: usize) -> f64 {
    let choose = |n: usize, k: usize| (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
    (wins..=trials).map(|k| choose(trials, k)).sum::<f64>() / 2f64.powi(trials as i32)
}

fn beta_point() -> SweepSpec {
    SweepSpec { betas: vec![0.9], models: vec![], ..SweepSpec::default() }
}

fn loss_swap(runs: &mut Runs, v: &mut Verdicts) {
    let spec = SweepSpec { models: vec![ModelClass::IqpParity, ModelClass::IqpMse], ..beta_point() };
    runs.ensure(&spec);
    let r = runs.collect(&spec);
    let parity = kl_of(&r, &spec, ModelClass::IqpParity);
    let mse = kl_of(&r, &spec, ModelClass::IqpMse);
    let wins = parity.iter().zip(&mse).filter(|(p, m)| p < m).count();
    let (mp, mm) = (mean(&parity), mean(&mse));
    let pass = mp < mm && wins >= 8 && (0.30..=0.50).contains(&mp) && (0.40..=0.65).contains(&mm);
    v.record(
        "1 loss swap at beta 0.9",
        pass,
        format!(
            "mean KL parity {mp:.3} (want [0.30, 0.50]), mse {mm:.3} (want [0.40, 0.65]); parity lower on {wins}/10 seeds (want >= 8, sign-test p = {:.3})",
            sign_test_p(wins, 10)
        ),
    );
}

fn cross_class(runs: &mut Runs, v: &mut Verdicts) {
    let contenders = [ModelClass::IqpParity, ModelClass::IsingSparse, ModelClass::IsingDense, ModelClass::Maxent];
    let spec = SweepSpec { models: contenders.to_vec(), ..SweepSpec::default() };
    runs.ensure(&spec);
    let r = runs.collect(&spec);
    let kls: Vec<Vec<f64>> = contenders.iter().map(|&m| kl_of(&r, &spec, m)).collect();
    let total = kls[0].len();
    let wins = (0..total).filter(|&i| kls[1..].iter().all(|other| kls[0][i] < other[i])).count();
    let (mp, mx) = (mean(&kls[0]), mean(&kls[3]));
    let pass = wins * 100 >= 85 * total && (0.25..=0.55).contains(&mp) && mx > 1.2;
    v.record(
        "2 cross-class ordering",
        pass,
        format!(
            "IQP-parity lowest on {wins}/{total} (want >= 85%); mean KL parity {mp:.3} (want [0.25, 0.55]), ising-sparse {:.3}, ising-dense {:.3}, maxent {mx:.3} (want > 1.2)",
            mean(&kls[1]),
            mean(&kls[2])
        ),
    );

    let cov: Vec<f64> = contenders.iter().map(|&m| mean(&coverage_of(&r, &spec, m))).collect();
    let pass = (0.035..=0.075).contains(&cov[0]) && cov[1..].iter().all(|&c| cov[0] > c);
    v.record(
        "3 coverage ordering",
        pass,
        format!(
            "mean C(1000) parity {:.4} (want [0.035, 0.075]) vs ising-sparse {:.4}, ising-dense {:.4}, maxent {:.4} (want all lower)",
            cov[0], cov[1], cov[2], cov[3]
        ),
    );
}

fn band_ablation(runs: &mut Runs, v: &mut Verdicts) {
    let spec = SweepSpec { models: vec![ModelClass::IqpParity], ..SweepSpec::band_ablation() };
    let control = SweepSpec { models: vec![ModelClass::IqpMse], ..beta_point() };
    runs.ensure(&spec);
    runs.ensure(&control);
    let r = runs.collect(&spec);
    let control_kl = mean(&kl_of(&runs.collect(&control), &control, ModelClass::IqpMse));
    let mut cells = String::new();
    let mut pass = true;
    for &(sigma, k) in spec.bands.iter().filter(|b| b.1 == 512) {
        let cell = SweepSpec { bands: vec![(sigma, k)], ..spec.clone() };
        let m = mean(&kl_of(&r, &cell, ModelClass::IqpParity));
        pass &= m < control_kl;
        let _ = write!(cells, "sigma {sigma}: {m:.3}; ");
    }
    v.record(
        "4 band ablation",
        pass,
        format!("K = 512 parity cells {cells}IQP-MSE control {control_kl:.3} (want every cell lower)"),
    );
}

fn spectral_mechanism(runs: &mut Runs, v: &mut Verdicts) {
    let spec = SweepSpec {
        models: vec![ModelClass::IqpParity, ModelClass::SpectralProxy, ModelClass::Uniform],
        ..beta_point()
    };
    runs.ensure(&spec);
    let r = runs.collect(&spec);
    let parity = recovery_of(&r, &spec, ModelClass::IqpParity);
    let proxy = recovery_of(&r, &spec, ModelClass::SpectralProxy);
    let uniform = recovery_of(&r, &spec, ModelClass::Uniform);
    let between = (0..parity.len()).filter(|&i| uniform[i] < proxy[i] && proxy[i] < parity[i]).count();
    let closed = (mean(&proxy) - mean(&uniform)) / (mean(&parity) - mean(&uniform));
    let pass = between >= 7 && closed >= 0.5;
    v.record(
        "5 spectral mechanism",
        pass,
        format!(
            "R(1000) uniform {:.3}, proxy {:.3}, parity {:.3}; proxy strictly between on {between}/10 (want >= 7); gap closed {:.0}% (want >= 50%)",
            mean(&uniform),
            mean(&proxy),
            mean(&parity),
            100.0 * closed
        ),
    );
}

fn size_sweep(runs: &mut Runs, v: &mut Verdicts) {
    let spec = SweepSpec { ns: vec![10, 15, 20], ..SweepSpec::n_sweep() };
    runs.ensure(&spec);
    let r = runs.collect(&spec);
    let mut pass = true;
    let mut parity_medians = Vec::new();
    let mut detail = String::new();
    for &n in &spec.ns {
        let at = SweepSpec { ns: vec![n], ..spec.clone() };
        let medians: Vec<(ModelClass, f64)> = spec.models.iter().map(|&m| (m, median(&kl_of(&r, &at, m)))).collect();
        let lowest = medians.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
        pass &= lowest == ModelClass::IqpParity && medians[1..].iter().all(|&(_, m)| medians[0].1 < m);
        parity_medians.push(medians[0].1);
        let row: Vec<String> = medians.iter().map(|(m, k)| format!("{m} {k:.3}")).collect();
        let _ = write!(detail, "n={n}: {}; ", row.join(", "));
    }
    pass &= (0.25..=0.45).contains(&parity_medians[0]);
    pass &= parity_medians.windows(2).all(|w| w[1] > w[0]);
    v.record(
        "6 size sweep",
        pass,
        format!("median KL {detail}(want parity lowest at every n, n=10 in [0.25, 0.45], increasing in n)"),
    );
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_table(n: u32, r: &mut ChaCha8Rng) -> ProbabilityTable {
    ProbabilityTable::from_weights(n, (0..1usize << n).map(|_| r.random::<f64>().powi(3)).collect()).unwrap()
}

fn random_band(n: u32, k: usize, r: &mut ChaCha8Rng) -> ParityBand {
    let masks = sample_band(1.0, k, n, r).unwrap();
    ParityBand::new(1.0, masks, (0..k).map(|_| r.random_range(-1.0..=1.0)).collect()).unwrap()
}

fn randomize<M: BornModel>(mut model: M, scale: f64, r: &mut ChaCha8Rng) -> M {
    model.params_mut().iter_mut().for_each(|p| *p = r.random_range(-scale..scale));
    model
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn worst_gradient_error<M: BornModel>(make: impl Fn(&mut ChaCha8Rng) -> M) -> f64 {
    let h = 1e-5;
    (0..20u64)
        .map(|seed| {
            let mut r = rng(1000 + seed);
            let model = make(&mut r);
            let cot: Vec<f64> = (0..1usize << model.n()).map(|_| r.random_range(-1.0..1.0)).collect();
            let objective = |m: &M| m.distribution().mass().iter().zip(&cot).map(|(q, c)| q * c).sum::<f64>();
            let numeric: Vec<f64> = (0..model.params().len())
                .map(|i| {
                    let (mut plus, mut minus) = (model.clone(), model.clone());
                    plus.params_mut()[i] += h;
                    minus.params_mut()[i] -= h;
                    (objective(&plus) - objective(&minus)) / (2.0 * h)
                })
                .collect();
            let scale = numeric.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-8);
            max_abs_diff(&model.gradient(&cot), &numeric) / scale
        })
        .fold(0.0, f64::max)
}

fn properties(runs: &mut Runs, v: &mut Verdicts) {
    let mut r = rng(7);

    let mut worst = (0.0f64, 0.0f64);
    for n in 1..=12 {
        let x: Vec<f64> = (0..1usize << n).map(|_| r.random_range(-1.0..1.0)).collect();
        let y = fwht(&x).unwrap();
        let back: Vec<f64> = fwht(&y).unwrap().iter().map(|v| v / x.len() as f64).collect();
        let energy: f64 = x.iter().map(|v| v * v).sum();
        let parseval = (y.iter().map(|v| v * v).sum::<f64>() / x.len() as f64 - energy).abs() / energy;
        worst = (worst.0.max(max_abs_diff(&back, &x)), worst.1.max(parseval));
    }
    v.record(
        "7a FWHT involution and Parseval",
        worst.0 < 1e-10 && worst.1 < 1e-10,
        format!("max involution error {:.1e}, max relative Parseval error {:.1e} (want < 1e-10)", worst.0, worst.1),
    );

    let mut err = 0.0f64;
    for n in 1..=6 {
        for _ in 0..10 {
            let t = random_table(n, &mut r);
            let spec = spectrum_of(&t);
            for a in 0..1u32 << n {
                let direct: f64 = (0..1u32 << n)
                    .map(|x| t.get(x) * if (a & x).count_ones() % 2 == 0 { 1.0 } else { -1.0 })
                    .sum();
                err = err.max((spec.at(Mask::new(a, n).unwrap()) - direct).abs());
            }
        }
    }
    v.record("7b spectrum vs brute force", err < 1e-12, format!("max error {err:.1e} at n <= 6 (want < 1e-12)"));

    let grads = [
        ("iqp", worst_gradient_error(|r| randomize(IqpParams::ring(6).unwrap(), 3.0, r))),
        ("ising-sparse", worst_gradient_error(|r| randomize(IsingSparseParams::zeros(6).unwrap(), 1.0, r))),
        ("ising-dense", worst_gradient_error(|r| randomize(IsingDenseParams::zeros(6).unwrap(), 1.0, r))),
        ("maxent", worst_gradient_error(|r| randomize(MaxEntParams::zeros(&random_band(6, 20, r)), 1.0, r))),
    ];
    let text: Vec<String> = grads.iter().map(|(m, e)| format!("{m} {e:.1e}")).collect();
    v.record(
        "7c gradients vs finite differences",
        grads.iter().all(|g| g.1 < 1e-6),
        format!("worst relative error over 20 configs: {} (want < 1e-6)", text.join(", ")),
    );

    let support = valid_support(6).unwrap();
    let mut err = 0.0f64;
    let mut negative = false;
    for _ in 0..100 {
        let w = (0..64u32).map(|x| if support.contains(x) { r.random::<f64>() + 0.01 } else { 0.0 }).collect();
        let target = ProbabilityTable::from_weights(6, w).unwrap();
        let model = random_table(6, &mut r);
        let observed = StateSet::new(6, support.states().iter().copied().filter(|_| r.random_bool(0.5)).collect()).unwrap();
        let b = kl_decomposition(&target, &model, &observed, &support).unwrap();
        let kl = forward_kl(&target, &model, &support).unwrap().value;
        err = err.max((b.term_sum() - kl).abs());
        negative |= [b.support_leakage, b.mass_split, b.unseen_shape, b.observed_shape].iter().any(|&t| t < -1e-15);
    }
    v.record(
        "7d KL decomposition identity",
        err < 1e-10 && !negative,
        format!("max |four-term sum - KL| {err:.1e} over 100 triples (want < 1e-10), all terms >= 0: {}", !negative),
    );

    // Occupancy on a trained model: IQP-parity at beta 0.9, seed 111.
    let spec = SweepSpec { seeds: vec![111], models: vec![ModelClass::IqpParity], ..beta_point() };
    runs.ensure(&spec);
    let config = spec.instances().remove(0);
    let rec = runs.collect(&spec).remove(&(instance_id(&config), ModelClass::IqpParity)).unwrap();
    let table = rec.params.as_ref().unwrap().distribution();
    let inst = make_instance(&config).unwrap();
    let expected = expected_discoveries(&table, &inst.unseen_elite, BUDGET).unwrap();
    let cumulative: Vec<f64> = table.mass().iter().scan(0.0, |acc, q| {
        *acc += q;
        Some(*acc)
    }).collect();
    let elite = inst.unseen_elite.indicator();
    let reps = 10_000;
    let mut seen = vec![usize::MAX; table.mass().len()];
    let counts: Vec<f64> = (0..reps)
        .map(|rep| {
            let mut found = 0usize;
            for _ in 0..BUDGET {
                let u: f64 = r.random();
                let x = cumulative.partition_point(|&c| c < u).min(seen.len() - 1);
                if elite[x] && seen[x] != rep {
                    seen[x] = rep;
                    found += 1;
                }
            }
            found as f64
        })
        .collect();
    let mc = mean(&counts);
    let se = paritybench::summary::sample_sd(&counts) / (reps as f64).sqrt();
    v.record(
        "7e occupancy vs Monte Carlo",
        (mc - expected).abs() <= 3.0 * se,
        format!("formula {expected:.3}, simulation {mc:.3} +- {se:.3} over {reps} x {BUDGET} draws (want within 3 SE)"),
    );

    let worst = (0..100)
        .map(|_| {
            let q = randomize(IqpParams::ring(10).unwrap(), 10.0, &mut r).distribution();
            (0..1u32 << 10).filter(|x| x.count_ones() % 2 == 1).map(|x| q.get(x)).sum::<f64>()
        })
        .fold(0.0, f64::max);
    v.record("7f IQP odd-parity mass", worst < 1e-12, format!("max over 100 random angle sets {worst:.1e} (want < 1e-12)"));

    let mut valid = true;
    let mut vis_err = 0.0f64;
    for _ in 0..50 {
        let n = r.random_range(4..=12);
        let band = random_band(n, r.random_range(1..600), &mut r);
        if let Ok(p) = spectral_proxy(&band, None) {
            valid &= p.projected.mass().iter().all(|&q| q >= 0.0)
                && (p.projected.mass().iter().sum::<f64>() - 1.0).abs() < 1e-12;
        }
        let region = StateSet::new(n, (0..1u32 << n).filter(|_| r.random_bool(0.2)).collect()).unwrap();
        let linear = linear_reconstruction(&band, n).unwrap();
        let direct: f64 = region.states().iter().map(|&x| linear[x as usize]).sum();
        let (base, vis) = region_visibility(&band, &region, n).unwrap();
        vis_err = vis_err.max((direct - base - vis).abs());
    }
    v.record("7g proxy validity", valid, "clipped reconstruction is nonnegative and sums to 1 on 50 random bands".into());
    v.record(
        "7h visibility identity",
        vis_err < 1e-12,
        format!("max |q_lin(A) - |A|/2^n - Vis| {vis_err:.1e} (want < 1e-12)"),
    );

    let (ok, detail) = determinism_and_resume();
    v.record("7i sweep determinism and resumability", ok, detail);
}

fn determinism_and_resume() -> (bool, String) {
    let spec = SweepSpec {
        ns: vec![8],
        betas: vec![0.5, 0.9],
        seeds: vec![111, 112],
        bands: vec![(1.0, 64)],
        models: vec![ModelClass::IqpParity, ModelClass::IsingDense, ModelClass::Maxent],
        train: TrainSettings { optimizer: OptimizerConfig { steps: 50, ..Default::default() }, ..Default::default() },
        ..SweepSpec::default()
    };
    let base = std::env::temp_dir().join(format!("paritybench-acceptance-{}", std::process::id()));
    let run = |dir: &Path, spec: &SweepSpec, workers: usize| {
        let mut store = Store::open(dir).unwrap();
        run_sweep(spec, workers, &mut store, &|_| {}).unwrap()
    };
    let read = |dir: &Path| -> Vec<RunRecord> { Store::open(dir).unwrap().records().cloned().collect() };

    run(&base.join("one"), &spec, 1);
    run(&base.join("two"), &spec, 2);
    let partial = SweepSpec { seeds: vec![111], ..spec.clone() };
    run(&base.join("resumed"), &partial, 1);
    let mut f = OpenOptions::new().append(true).open(base.join("resumed/records.jsonl")).unwrap();
    f.write_all(b"{\"key\":\"torn").unwrap();
    drop(f);
    run(&base.join("resumed"), &spec, 2);
    let rerun = run(&base.join("one"), &spec, 2);

    let one = read(&base.join("one"));
    let same_workers = one == read(&base.join("two"));
    let same_resume = one == read(&base.join("resumed"));
    let _ = std::fs::remove_dir_all(&base);
    (
        same_workers && same_resume && rerun.computed == 0 && one.len() == spec.task_count(),
        format!(
            "1 vs 2 workers identical: {same_workers}; interrupted + torn-line resume identical: {same_resume}; rerun computed {}",
            rerun.computed
        ),
    )
}

fn store_dir() -> PathBuf {
    std::env::var_os("PARITYBENCH_ACCEPTANCE_STORE")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance-store"))
}

fn main() {
    let workers = std::env::var("PARITYBENCH_WORKERS")
        .ok()
        .and_then(|w| w.parse().ok())
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let dir = store_dir();
    println!("acceptance store: {} ({workers} workers)", dir.display());
    let mut runs = Runs { store: Store::open(&dir).expect("open store"), workers };
    let mut v = Verdicts { lines: Vec::new() };

    properties(&mut runs, &mut v);
    loss_swap(&mut runs, &mut v);
    cross_class(&mut runs, &mut v);
    band_ablation(&mut runs, &mut v);
    spectral_mechanism(&mut runs, &mut v);
    size_sweep(&mut runs, &mut v);

    let failed: Vec<&str> = v.lines.iter().filter(|l| !l.1).map(|l| l.0.as_str()).collect();
    println!("\n{} of {} criteria passed", v.lines.len() - failed.len(), v.lines.len());
    if !failed.is_empty() {
        println!("failed: {}", failed.join("; "));
        std::process::exit(1);
    }
}
