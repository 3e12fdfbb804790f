use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::Path;

use crate::bench::BenchReport;
use crate::error::Result;

pub const BENCH_HEADER: &str = "label,n_q,batch,rounds,warmup_rounds,feature_dim,seed,threads,\
classic_ns_per_update,efficient_ns_per_update,speedup,max_rel_diff,max_residual,cpu";

/// One CSV row; commas in the CPU name become semicolons.
pub fn bench_row(label: &str, r: &BenchReport) -> String {
    let c = &r.config;
    format!(
        "{label},{},{},{},{},{},{},{},{:.0},{:.0},{:.6},{:e},{:e},{}",
        c.bank_size,
        c.batch_size,
        c.rounds,
        c.warmup_rounds,
        c.feature_dim,
        c.seed,
        r.environment.threads,
        r.classic_ns_per_update,
        r.efficient_ns_per_update,
        r.speedup,
        r.max_rel_diff,
        r.max_residual,
        r.environment.cpu.replace(',', ";")
    )
}

/// Appends rows, writing the header first when the file is new or empty.
pub fn append_bench_results(path: &Path, label: &str, reports: &[BenchReport]) -> Result<()> {
    let fresh = std::fs::metadata(path).map_or(true, |m| m.len() == 0);
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut text = String::new();
    if fresh {
        text.push_str(BENCH_HEADER);
        text.push('\n');
    }
    for r in reports {
        text.push_str(&bench_row(label, r));
        text.push('\n');
    }
    file.write_all(text.as_bytes())?;
    Ok(())
}
