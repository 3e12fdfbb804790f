use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use gplabel::bench::{complexity_sweep, run_bench, BenchConfig, ThreadMode};
use gplabel::demo::{run_fig1, run_fig3, FIG1_SEED, FIG3_GRID, FIG3_SEED};
use gplabel::io::{self, GridSpec};
use gplabel::pipeline::{confidence_grid, refine_unlabeled, Classifier, ModelKind};
use gplabel::toydata::{fig1_preset, fig3_preset, longtail_preset, ImbalanceSpec, FIG3_N_MINORITY, FIG3_STD};
use gplabel::{ExperimentConfig, LabeledDataset};

const LONGTAIL_STD: f64 = 0.3;

#[derive(Parser, Debug)]
#[command(name = "gplabel", version, about = "GP label refinement toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset file.
    GenData {
        #[arg(long, value_enum)]
        preset: Preset,
        /// Number of classes (longtail).
        #[arg(long)]
        k: Option<usize>,
        /// Size of the largest class (longtail).
        #[arg(long)]
        n1: Option<usize>,
        /// Imbalance ratio N1/NK, at least 1 (longtail).
        #[arg(long)]
        gamma: Option<f64>,
        /// Cluster standard deviation (fig3, longtail).
        #[arg(long)]
        std: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a classifier's confidence on a 2-D grid.
    Confmap {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        model: Model,
        /// "xmin,xmax,ymin,ymax,nx,ny"
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Refine the unlabeled rows of a dataset and apply the confidence mask.
    Refine {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label propagation toy: dataset, refined labels and region checks.
    DemoFig1 {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = FIG1_SEED)]
        seed: u64,
    },
    /// Confidence-map toy: dataset, three grids and checks.
    DemoFig3 {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = FIG3_SEED)]
        seed: u64,
    },
    /// Time classic re-inversion against the incremental update.
    Bench {
        #[arg(long, default_value_t = 4096)]
        nq: usize,
        #[arg(long, default_value_t = 8)]
        b: usize,
        #[arg(long, default_value_t = 3)]
        rounds: usize,
        /// Comma-separated bank sizes; replaces --nq.
        #[arg(long, allow_hyphen_values = true)]
        sweep: Option<String>,
        #[arg(long, value_enum, default_value_t = Threads::Single)]
        threads: Threads,
        /// CSV file the results are appended to.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    Fig1,
    Fig3,
    Longtail,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Model {
    Gp,
    Similarity,
    Linear,
}

impl From<Model> for ModelKind {
    fn from(m: Model) -> Self {
        match m {
            Model::Gp => ModelKind::Gp,
            Model::Similarity => ModelKind::Similarity,
            Model::Linear => ModelKind::Linear,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Threads {
    Single,
    Max,
}

enum Failure {
    Usage(String),
    Run(gplabel::Error),
    Checks,
}

impl From<gplabel::Error> for Failure {
    fn from(e: gplabel::Error) -> Self {
        Failure::Run(e)
    }
}

type Outcome = Result<(), Failure>;

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Checks) => ExitCode::from(1),
    }
}

fn run(cmd: Command) -> Outcome {
    match cmd {
        Command::GenData {
            preset,
            k,
            n1,
            gamma,
            std,
            seed,
            out,
        } => gen_data(preset, k, n1, gamma, std, seed, &out),
        Command::Confmap {
            data,
            config,
            model,
            grid,
            out,
        } => confmap(&data, &config, model.into(), &grid, &out),
        Command::Refine { data, config, out } => refine(&data, &config, &out),
        Command::DemoFig1 { out_dir, seed } => {
            let report = run_fig1(seed)?;
            std::fs::create_dir_all(&out_dir).map_err(gplabel::Error::from)?;
            report.write(&out_dir)?;
            print!("{}", report.summary());
            report.passed().then_some(()).ok_or(Failure::Checks)
        }
        Command::DemoFig3 { out_dir, seed } => {
            let grid: GridSpec = FIG3_GRID.parse()?;
            let report = run_fig3(seed, grid)?;
            std::fs::create_dir_all(&out_dir).map_err(gplabel::Error::from)?;
            report.write(&out_dir)?;
            print!("{}", report.summary());
            report.passed().then_some(()).ok_or(Failure::Checks)
        }
        Command::Bench {
            nq,
            b,
            rounds,
            sweep,
            threads,
            out,
        } => bench(nq, b, rounds, sweep.as_deref(), threads, out.as_deref()),
    }
}

fn require<T>(value: Option<T>, flag: &str, preset: &str) -> Result<T, Failure> {
    value.ok_or_else(|| usage(format!("--{flag} is required for preset {preset}")))
}

fn reject<T>(value: &Option<T>, flag: &str, preset: &str) -> Outcome {
    match value {
        Some(_) => Err(usage(format!("--{flag} does not apply to preset {preset}"))),
        None => Ok(()),
    }
}

fn gen_data(
    preset: Preset,
    k: Option<usize>,
    n1: Option<usize>,
    gamma: Option<f64>,
    std: Option<f64>,
    seed: Option<u64>,
    out: &Path,
) -> Outcome {
    let ds: LabeledDataset = match preset {
        Preset::Fig1 => {
            reject(&k, "k", "fig1")?;
            reject(&n1, "n1", "fig1")?;
            reject(&gamma, "gamma", "fig1")?;
            reject(&std, "std", "fig1")?;
            fig1_preset(seed.unwrap_or(FIG1_SEED)).dataset
        }
        Preset::Fig3 => {
            reject(&k, "k", "fig3")?;
            reject(&n1, "n1", "fig3")?;
            reject(&gamma, "gamma", "fig3")?;
            let std = std.unwrap_or(FIG3_STD);
            if !(std > 0.0 && std.is_finite()) {
                return Err(usage("--std must be positive"));
            }
            fig3_preset(FIG3_N_MINORITY, std, seed.unwrap_or(FIG3_SEED)).map_err(usage)?
        }
        Preset::Longtail => {
            let spec = ImbalanceSpec::new(
                require(k, "k", "longtail")?,
                require(n1, "n1", "longtail")?,
                require(gamma, "gamma", "longtail")?,
            )
            .map_err(usage)?;
            let std = std.unwrap_or(LONGTAIL_STD);
            if !(std > 0.0 && std.is_finite()) {
                return Err(usage("--std must be positive"));
            }
            longtail_preset(&spec, std, seed.unwrap_or(0)).map_err(usage)?
        }
    };
    io::write_dataset(out, &ds)?;
    for (c, n) in ds.class_counts().iter().enumerate() {
        println!("class {c}: {n}");
    }
    println!("unlabeled: {}", ds.unlabeled.rows());
    Ok(())
}

fn confmap(data: &Path, config: &Path, model: ModelKind, grid: &str, out: &Path) -> Outcome {
    let spec: GridSpec = grid.parse().map_err(usage)?;
    let ds: LabeledDataset = io::read_dataset(data, None)?;
    let cfg: ExperimentConfig = io::read_config(config)?;
    if ds.dim() != 2 {
        return Err(gplabel::Error::DimensionMismatch(format!(
            "confidence maps need 2-D features, dataset has dimension {}",
            ds.dim()
        ))
        .into());
    }
    let clf = Classifier::fit(model, &ds, &cfg)?;
    let grid = confidence_grid(&clf, spec)?;
    io::write_grid(out, &grid)?;
    println!("{model}: wrote {} grid points to {}", grid.conf.len(), out.display());
    Ok(())
}

fn refine(data: &Path, config: &Path, out: &Path) -> Outcome {
    let cfg: ExperimentConfig = io::read_config(config)?;
    let ds: LabeledDataset = io::read_dataset(data, None)?;
    if ds.is_empty() || ds.unlabeled.rows() == 0 {
        return Err(gplabel::Error::DegenerateData(
            "refine needs at least one labeled and one unlabeled row".into(),
        )
        .into());
    }
    let rows = refine_unlabeled(&ds, &cfg)?;
    io::write_refined(out, &rows)?;
    let kept = rows.iter().filter(|r| r.mask).count();
    println!(
        "policy {}: {kept} of {} unlabeled rows above tau = {}",
        cfg.policy,
        rows.len(),
        cfg.tau
    );
    Ok(())
}

fn parse_sizes(text: &str) -> Result<Vec<usize>, Failure> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| usage(format!("--sweep entry `{s}`: {e}")))
        })
        .collect()
}

fn bench(nq: usize, b: usize, rounds: usize, sweep: Option<&str>, threads: Threads, out: Option<&Path>) -> Outcome {
    let threads = match threads {
        Threads::Single => ThreadMode::Single,
        Threads::Max => ThreadMode::Max,
    };
    let base = BenchConfig {
        rounds,
        threads,
        ..BenchConfig::new(nq, b)
    };
    let sizes = sweep.map(parse_sizes).transpose()?;
    let check_sizes: Vec<usize> = sizes.clone().unwrap_or_else(|| vec![nq]);
    for &n in &check_sizes {
        BenchConfig { bank_size: n, ..base }.validate().map_err(usage)?;
    }
    if let Some(sizes) = &sizes {
        if sizes.len() < 2 || sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(usage("--sweep needs at least two strictly ascending sizes"));
        }
    }

    let reports = match sizes {
        Some(sizes) => {
            let sweep = complexity_sweep(&sizes, &base)?;
            print!("{}", sweep.to_text());
            sweep.reports
        }
        None => {
            let report = run_bench(&base)?;
            print!("{}", report.to_text());
            vec![report]
        }
    };
    if let Some(path) = out {
        io::append_bench_results(path, "cli", &reports)?;
    }
    Ok(())
}
