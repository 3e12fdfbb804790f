//! Reproductions of the two toy figures as data files plus pass/fail checks.

use std::fmt;
use std::path::Path;

use crate::error::Result;
use crate::gp::GpConfig;
use crate::io::{self, ExperimentConfig, GridData, GridSpec, PolicyKind, RefinedRow};
use crate::kernel::KernelParams;
use crate::pipeline::{probabilities_at, refine_unlabeled, Classifier, ModelKind};
use crate::refine::{argmax, refine_label, AggregateSource, RefinementPolicy};
use crate::toydata::{
    fig1_preset, fig3_preset, Fig1Preset, LabeledDataset, FIG1_MAJORITY, FIG1_MINORITY, FIG3_CENTERS,
    FIG3_N_MINORITY, FIG3_OUTLIER, FIG3_STD,
};

pub const FIG3_SEED: u64 = 2;
pub const FIG1_SEED: u64 = 0;
/// Step 0.1 over `[−4, 4]²`, so the outlier lies on the grid.
pub const FIG3_GRID: &str = "-4,4,-4,4,81,81";
/// Smoothing weight for the similarity/GP comparison.
pub const HEAVY_ALPHA: f64 = 0.9;
/// Class of the cluster at `(−1, 1)`, the majority next to the minority.
pub const FIG3_ADJACENT_MAJORITY: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub detail: String,
    pub pass: bool,
}

impl Check {
    fn new(name: &str, detail: String, pass: bool) -> Self {
        Self {
            name: name.to_string(),
            detail,
            pass,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn summary(title: &str, checks: &[Check]) -> String {
    let mut out = format!("# {title}\n");
    for c in checks {
        out.push_str(&c.to_string());
        out.push('\n');
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    out.push_str(&format!("result: {} passed, {failed} failed\n", checks.len() - failed));
    out
}

fn fmt_probs(p: &[f64]) -> String {
    let parts: Vec<String> = p.iter().map(|v| format!("{v:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

/// η = 1, l = 0.5, σ = 0.5, λ = 10, τ = 0.8, α = 0.9.
pub fn fig3_config() -> ExperimentConfig<f64> {
    let kernel = KernelParams::new(1.0, 0.5, None).expect("valid kernel");
    ExperimentConfig {
        gp: GpConfig::new(kernel, 0.5, 10.0, 256).expect("valid gp config"),
        alpha: HEAVY_ALPHA,
        seed: FIG3_SEED,
        ..ExperimentConfig::default()
    }
}

#[derive(Clone, Debug)]
pub struct Fig3Report {
    pub config: ExperimentConfig<f64>,
    pub dataset: LabeledDataset<f64>,
    pub grids: Vec<(ModelKind, GridData<f64>)>,
    pub checks: Vec<Check>,
}

impl Fig3Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn summary(&self) -> String {
        summary("fig3 confidence maps", &self.checks)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        io::write_dataset(&dir.join("fig3_dataset.csv"), &self.dataset)?;
        io::write_config(&dir.join("fig3_config.txt"), &self.config)?;
        for (kind, grid) in &self.grids {
            io::write_grid(&dir.join(format!("fig3_{kind}.grid.csv")), grid)?;
        }
        std::fs::write(dir.join("fig3_summary.txt"), self.summary())?;
        Ok(())
    }
}

/// Smoothed label `(1−α)·softmax(linear) + α·normalize(aggregate)` at `p`.
fn smoothed(linear: &Classifier<f64>, aggregate: &Classifier<f64>, source: AggregateSource, p: [f64; 2]) -> Result<Vec<f64>> {
    let q = crate::Matrix::from_rows(&[p])?;
    let policy = RefinementPolicy::smooth(HEAVY_ALPHA, source)?;
    let model = linear.scores(&q)?;
    let agg = aggregate.scores(&q)?;
    Ok(refine_label(&policy, model.row(0), Some(agg.row(0)))?.into_vec())
}

/// First `x` (step 0.01, scanning from `start` toward the minority) where the
/// smoothed label picks the minority class.
fn minority_boundary(
    linear: &Classifier<f64>,
    aggregate: &Classifier<f64>,
    source: AggregateSource,
    start: f64,
    y: f64,
) -> Result<f64> {
    for i in 0..=200 {
        let x = start + 0.01 * i as f64;
        if argmax(&smoothed(linear, aggregate, source, [x, y])?) == 0 {
            return Ok(x);
        }
    }
    Ok(f64::INFINITY)
}

pub fn run_fig3(seed: u64, grid: GridSpec) -> Result<Fig3Report> {
    let config = ExperimentConfig {
        seed,
        ..fig3_config()
    };
    let dataset = fig3_preset(FIG3_N_MINORITY, FIG3_STD, seed)?;
    let linear = Classifier::fit(ModelKind::Linear, &dataset, &config)?;
    let sim = Classifier::fit(ModelKind::Similarity, &dataset, &config)?;
    let gp = Classifier::fit(ModelKind::Gp, &dataset, &config)?;
    let tau = config.tau;
    let conf = |clf: &Classifier<f64>, p| -> Result<f64> {
        Ok(probabilities_at(clf, p)?.into_iter().fold(0.0, f64::max))
    };

    let mut checks = Vec::new();
    let c = conf(&gp, FIG3_OUTLIER)?;
    checks.push(Check::new("gp ignores the outlier", format!("conf(-3,3) = {c:.4} < {tau}"), c < tau));
    let c = conf(&linear, FIG3_OUTLIER)?;
    checks.push(Check::new(
        "linear is confident on the outlier",
        format!("conf(-3,3) = {c:.4} > {tau}"),
        c > tau,
    ));
    for (k, center) in FIG3_CENTERS.iter().enumerate() {
        let p = probabilities_at(&gp, *center)?;
        let (c, a) = (p[argmax(&p)], argmax(&p));
        checks.push(Check::new(
            &format!("gp confident at center {k}"),
            format!("conf({}, {}) = {c:.4} > {tau}, argmax {a}", center[0], center[1]),
            c > tau && a == k,
        ));
    }

    let minority = FIG3_CENTERS[0];
    let p = smoothed(&linear, &sim, AggregateSource::Similarity, minority)?;
    checks.push(Check::new(
        "smoothed similarity keeps the minority center",
        format!("alpha {HEAVY_ALPHA}: {} argmax {}", fmt_probs(&p), argmax(&p)),
        argmax(&p) == 0,
    ));
    let mid = [
        0.5 * (minority[0] + FIG3_CENTERS[FIG3_ADJACENT_MAJORITY][0]),
        0.5 * (minority[1] + FIG3_CENTERS[FIG3_ADJACENT_MAJORITY][1]),
    ];
    let ps = smoothed(&linear, &sim, AggregateSource::Similarity, mid)?;
    let pg = smoothed(&linear, &gp, AggregateSource::Gp, mid)?;
    checks.push(Check::new(
        "midpoint flips to the majority under similarity",
        format!("({}, {}): {} argmax {}", mid[0], mid[1], fmt_probs(&ps), argmax(&ps)),
        argmax(&ps) == FIG3_ADJACENT_MAJORITY,
    ));
    checks.push(Check::new(
        "midpoint stays with the minority under gp",
        format!("({}, {}): {} argmax {}", mid[0], mid[1], fmt_probs(&pg), argmax(&pg)),
        argmax(&pg) == 0,
    ));

    let start = minority[0].min(FIG3_CENTERS[FIG3_ADJACENT_MAJORITY][0]);
    let gb = minority_boundary(&linear, &gp, AggregateSource::Gp, start, mid[1])?;
    let sb = minority_boundary(&linear, &sim, AggregateSource::Similarity, start, mid[1])?;
    checks.push(Check::new(
        "minority region reaches further toward the majority under gp",
        format!("first minority x on y = {}: gp {gb:.2}, similarity {sb:.2}", mid[1]),
        gb < sb,
    ));

    let mut grids = Vec::new();
    for clf in [&linear, &sim, &gp] {
        grids.push((clf.kind(), crate::pipeline::confidence_grid(clf, grid)?));
    }
    Ok(Fig3Report {
        config,
        dataset,
        grids,
        checks,
    })
}

/// η = 1, l = 1, σ = 0.3, λ = 10, τ = 0.8.
pub fn fig1_config() -> ExperimentConfig<f64> {
    let kernel = KernelParams::new(1.0, 1.0, None).expect("valid kernel");
    ExperimentConfig {
        gp: GpConfig::new(kernel, 0.3, 10.0, 256).expect("valid gp config"),
        seed: FIG1_SEED,
        ..ExperimentConfig::default()
    }
}

/// Region-level outcome of one refinement policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RegionStats {
    pub b_total: usize,
    /// Region-B rows labeled with the minority class (after the threshold).
    pub b_minority: usize,
    /// Region-B rows whose pseudo-label argmax is the neighbouring majority,
    /// counted before the threshold.
    pub b_majority_argmax: usize,
    pub c_total: usize,
    /// Region-C rows below the threshold.
    pub c_below_tau: usize,
}

impl RegionStats {
    pub fn from_rows(preset: &Fig1Preset<f64>, rows: &[RefinedRow<f64>]) -> Self {
        let b = preset.regions.b.clone();
        let c = preset.regions.c.clone();
        let count_b = |class| b.clone().filter(|&i| rows[i].pred_class == Some(class)).count();
        Self {
            b_total: b.len(),
            b_minority: count_b(FIG1_MINORITY),
            b_majority_argmax: b.clone().filter(|&i| rows[i].top_class == FIG1_MAJORITY).count(),
            c_total: c.len(),
            c_below_tau: c.filter(|&i| !rows[i].mask).count(),
        }
    }

    pub fn b_minority_share(&self) -> f64 {
        self.b_minority as f64 / self.b_total as f64
    }
}

#[derive(Clone, Debug)]
pub struct Fig1Report {
    pub config: ExperimentConfig<f64>,
    pub preset: Fig1Preset<f64>,
    pub gp_rows: Vec<RefinedRow<f64>>,
    pub similarity_rows: Vec<RefinedRow<f64>>,
    pub gp: RegionStats,
    pub similarity: RegionStats,
    pub checks: Vec<Check>,
}

/// Share of region B that must receive the minority class.
pub const FIG1_PROPAGATION_SHARE: f64 = 0.8;

impl Fig1Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn summary(&self) -> String {
        summary("fig1 label propagation", &self.checks)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        io::write_dataset(&dir.join("fig1_dataset.csv"), &self.preset.dataset)?;
        io::write_config(&dir.join("fig1_config.txt"), &self.config)?;
        io::write_refined(&dir.join("fig1_gp_refined.csv"), &self.gp_rows)?;
        io::write_refined(&dir.join("fig1_similarity_refined.csv"), &self.similarity_rows)?;
        std::fs::write(dir.join("fig1_summary.txt"), self.summary())?;
        Ok(())
    }
}

pub fn run_fig1(seed: u64) -> Result<Fig1Report> {
    let config = ExperimentConfig {
        seed,
        ..fig1_config()
    };
    let preset = fig1_preset(seed);
    let run = |policy| {
        let cfg = ExperimentConfig { policy, ..config };
        refine_unlabeled(&preset.dataset, &cfg)
    };
    let gp_rows = run(PolicyKind::Gp)?;
    let similarity_rows = run(PolicyKind::Similarity)?;
    let gp = RegionStats::from_rows(&preset, &gp_rows);
    let similarity = RegionStats::from_rows(&preset, &similarity_rows);
    let share = FIG1_PROPAGATION_SHARE;
    let describe = |s: &RegionStats| {
        format!(
            "{}/{} minority ({:.1}%), argmax majority on {}",
            s.b_minority,
            s.b_total,
            100.0 * s.b_minority_share(),
            s.b_majority_argmax
        )
    };
    let checks = vec![
        Check::new(
            "gp propagates the minority label in region B",
            format!("{} >= {:.0}%", describe(&gp), 100.0 * share),
            gp.b_minority_share() >= share,
        ),
        Check::new(
            "gp masks every outlier in region C",
            format!("{}/{} below tau {}", gp.c_below_tau, gp.c_total, config.tau),
            gp.c_below_tau == gp.c_total,
        ),
        Check::new(
            "similarity fails to propagate in region B",
            format!("{} < {:.0}%", describe(&similarity), 100.0 * share),
            similarity.b_minority_share() < share,
        ),
    ];
    Ok(Fig1Report {
        config,
        preset,
        gp_rows,
        similarity_rows,
        gp,
        similarity,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig3_default_seed_passes() {
        let grid: GridSpec = "-4,4,-4,4,9,9".parse().unwrap();
        let report = run_fig3(FIG3_SEED, grid).unwrap();
        assert!(report.passed(), "{}", report.summary());
        assert_eq!(report.grids.len(), 3);
    }

    #[test]
    fn fig1_default_seed_passes() {
        let report = run_fig1(FIG1_SEED).unwrap();
        assert!(report.passed(), "{}", report.summary());
    }
}
