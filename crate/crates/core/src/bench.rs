//! Timing harness: full re-inversion against the incremental rank-B update.
//!
//! Both paths see the same bank contents and inserted batches. Per round the
//! efficient path times [`GpState::insert`]; the classic path times building
//! the covariance from the bank and inverting it directly. Both include the
//! kernel evaluations they need.

use std::time::Instant;

use crate::bank::{BankMode, MemoryBank};
use crate::error::{Error, Result};
use crate::gp::{GpConfig, GpState};
use crate::kernel::{cross_kernel, KernelParams};
use crate::linalg::{spd_factor_into, DenseMatrix};
use crate::rng::SeededRng;

/// Rtol between the two inverses on every round.
pub const BENCH_RTOL: f64 = 1e-7;
pub const DEFAULT_FEATURE_DIM: usize = 16;
const BENCH_CLASSES: usize = 10;
const RESIDUAL_ROWS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThreadMode {
    Single,
    /// All available cores for the parallel kernels.
    Max,
}

impl ThreadMode {
    pub fn thread_count(self) -> usize {
        match self {
            ThreadMode::Single => 1,
            ThreadMode::Max => std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BenchConfig {
    pub bank_size: usize,
    pub batch_size: usize,
    pub rounds: usize,
    pub warmup_rounds: usize,
    pub feature_dim: usize,
    pub seed: u64,
    pub threads: ThreadMode,
}

impl BenchConfig {
    pub fn new(bank_size: usize, batch_size: usize) -> Self {
        Self {
            bank_size,
            batch_size,
            rounds: 3,
            warmup_rounds: 1,
            feature_dim: DEFAULT_FEATURE_DIM,
            seed: 0,
            threads: ThreadMode::Single,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.batch_size >= self.bank_size {
            return Err(Error::invalid(
                "b",
                format!("batch size must satisfy 1 <= B < N_Q, got B = {} and N_Q = {}", self.batch_size, self.bank_size),
            ));
        }
        if self.rounds == 0 {
            return Err(Error::invalid("rounds", "must be at least 1"));
        }
        if self.feature_dim == 0 {
            return Err(Error::invalid("feature_dim", "must be at least 1"));
        }
        Ok(())
    }

    /// Rough peak: the cached inverse plus two n×n work buffers, with slack.
    pub fn required_bytes(&self) -> u64 {
        let n = self.bank_size as u64;
        n * n * 8 * 7 / 2
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Environment {
    pub cpu: String,
    pub threads: usize,
}

impl Environment {
    pub fn detect(threads: usize) -> Self {
        let cpu = std::fs::read_to_string("/proc/cpuinfo")
            .ok()
            .and_then(|s| {
                s.lines()
                    .find(|l| l.starts_with("model name"))
                    .and_then(|l| l.split_once(':'))
                    .map(|(_, v)| v.trim().to_string())
            })
            .unwrap_or_else(|| std::env::consts::ARCH.to_string());
        Self { cpu, threads }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub classic_ns_per_update: f64,
    pub efficient_ns_per_update: f64,
    pub speedup: f64,
    /// Largest elementwise relative gap between the two inverses over all rounds.
    pub max_rel_diff: f64,
    /// `‖K·K⁻¹ − I‖_max` of the incremental inverse on sampled rows after the last round.
    pub max_residual: f64,
    pub environment: Environment,
}

impl BenchReport {
    /// `key=value` lines.
    pub fn to_text(&self) -> String {
        let c = &self.config;
        format!(
            "n_q={}\nbatch={}\nrounds={}\nwarmup_rounds={}\nfeature_dim={}\nseed={}\nthreads={}\n\
             classic_ns_per_update={:.0}\nefficient_ns_per_update={:.0}\nspeedup={:.3}\n\
             max_rel_diff={:e}\nmax_residual={:e}\ncpu={}\n",
            c.bank_size,
            c.batch_size,
            c.rounds,
            c.warmup_rounds,
            c.feature_dim,
            c.seed,
            self.environment.threads,
            self.classic_ns_per_update,
            self.efficient_ns_per_update,
            self.speedup,
            self.max_rel_diff,
            self.max_residual,
            self.environment.cpu
        )
    }
}

/// `MemAvailable` from `/proc/meminfo`, when readable.
pub fn available_memory() -> Option<u64> {
    let info = std::fs::read_to_string("/proc/meminfo").ok()?;
    let line = info.lines().find(|l| l.starts_with("MemAvailable:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

fn check_memory(cfg: &BenchConfig) -> Result<()> {
    let required = cfg.required_bytes();
    match available_memory() {
        Some(available) if available < required => Err(Error::OutOfMemory {
            required_bytes: required,
            available_bytes: available,
        }),
        _ => Ok(()),
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn in_pool<R: Send>(threads: ThreadMode, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.thread_count())
        .build()
        .map_err(|e| Error::invalid("threads", e.to_string()))?;
    Ok(pool.install(f))
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    check_memory(cfg)?;
    in_pool(cfg.threads, || bench_body(cfg))?
}

fn bench_body(cfg: &BenchConfig) -> Result<BenchReport> {
    let (n, b, d) = (cfg.bank_size, cfg.batch_size, cfg.feature_dim);
    let mut rng = SeededRng::new(cfg.seed);
    let kernel = KernelParams::new(1.0, (d as f64).sqrt(), None)?;
    let gp_cfg = GpConfig::new(kernel, 1.0, 1.0, usize::MAX)?;
    let mut bank = MemoryBank::new(n, d, BENCH_CLASSES, BankMode::Fifo)?;
    let classes = |rng: &mut SeededRng, m: usize| -> Vec<usize> { (0..m).map(|_| rng.below(BENCH_CLASSES)).collect() };
    let ids = classes(&mut rng, n);
    bank.insert_batch(&rng.normal_matrix(n, d), &ids)?;
    let mut state = GpState::warmup(gp_cfg, bank)?;

    let mut classic = Vec::with_capacity(cfg.rounds);
    let mut efficient = Vec::with_capacity(cfg.rounds);
    let mut max_rel_diff: f64 = 0.0;
    for round in 0..cfg.warmup_rounds + cfg.rounds {
        let feats: DenseMatrix<f64> = rng.normal_matrix(b, d);
        let ids = classes(&mut rng, b);

        let t = Instant::now();
        state.insert(&feats, &ids)?;
        let t_eff = t.elapsed().as_nanos() as f64;

        let t = Instant::now();
        let direct = spd_factor_into(state.covariance())?.into_inverse()?;
        let t_cls = t.elapsed().as_nanos() as f64;

        let err = state.covariance_inverse().max_rel_diff(&direct);
        drop(direct);
        if !(err <= BENCH_RTOL) {
            return Err(Error::BenchMismatch {
                error: err,
                tolerance: BENCH_RTOL,
            });
        }
        max_rel_diff = max_rel_diff.max(err);
        if round >= cfg.warmup_rounds {
            classic.push(t_cls);
            efficient.push(t_eff);
        }
    }

    let classic_ns = median(&mut classic);
    let efficient_ns = median(&mut efficient);
    Ok(BenchReport {
        config: *cfg,
        classic_ns_per_update: classic_ns,
        efficient_ns_per_update: efficient_ns,
        speedup: classic_ns / efficient_ns,
        max_rel_diff,
        max_residual: sampled_residual(&state),
        environment: Environment::detect(rayon::current_num_threads()),
    })
}

/// `‖K·K⁻¹ − I‖_max` restricted to evenly spaced rows of `K`.
fn sampled_residual(state: &GpState<f64>) -> f64 {
    let slots = state.slots();
    let n = slots.len();
    let s = n.min(RESIDUAL_ROWS);
    let picks: Vec<usize> = (0..s).map(|i| i * n / s).collect();
    let bank = state.bank();
    let all: Vec<&[f64]> = slots.iter().map(|&q| bank.feature(q)).collect();
    let rows: Vec<&[f64]> = picks.iter().map(|&i| all[i]).collect();
    let mut k = cross_kernel(state.config().kernel(), &rows, &all);
    for (r, &i) in picks.iter().enumerate() {
        k[(r, i)] += state.config().noise();
    }
    let prod = k.matmul(state.covariance_inverse()).expect("conforming shapes");
    let mut worst: f64 = 0.0;
    for (r, &i) in picks.iter().enumerate() {
        for (j, &v) in prod.row(r).iter().enumerate() {
            let target = if j == i { 1.0 } else { 0.0 };
            worst = worst.max((v - target).abs());
        }
    }
    worst
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub reports: Vec<BenchReport>,
    pub classic_slope: f64,
    pub efficient_slope: f64,
}

impl SweepReport {
    pub fn to_text(&self) -> String {
        let mut out = String::from("n_q,classic_ns,efficient_ns,speedup\n");
        for r in &self.reports {
            out.push_str(&format!(
                "{},{:.0},{:.0},{:.3}\n",
                r.config.bank_size, r.classic_ns_per_update, r.efficient_ns_per_update, r.speedup
            ));
        }
        out.push_str(&format!(
            "classic_slope={:.3}\nefficient_slope={:.3}\n",
            self.classic_slope, self.efficient_slope
        ));
        out
    }
}

/// Runs [`run_bench`] at each size with the other settings of `base`.
pub fn complexity_sweep(sizes: &[usize], base: &BenchConfig) -> Result<SweepReport> {
    if sizes.len() < 2 {
        return Err(Error::invalid("sweep", "need at least two sizes"));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("sweep", "sizes must be strictly ascending"));
    }
    // fail before any timing if the largest size cannot fit
    let largest = BenchConfig {
        bank_size: sizes[sizes.len() - 1],
        ..*base
    };
    largest.validate()?;
    check_memory(&largest)?;
    let mut reports = Vec::with_capacity(sizes.len());
    for &n in sizes {
        reports.push(run_bench(&BenchConfig { bank_size: n, ..*base })?);
    }
    let xs: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    let classic: Vec<f64> = reports.iter().map(|r| r.classic_ns_per_update).collect();
    let efficient: Vec<f64> = reports.iter().map(|r| r.efficient_ns_per_update).collect();
    Ok(SweepReport {
        classic_slope: loglog_slope(&xs, &classic),
        efficient_slope: loglog_slope(&xs, &efficient),
        reports,
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
