//! Per-leaf timing across worker counts, plus a training-time scaling fit.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use gkmnc::dataset::DataTable;
use gkmnc::pipeline::{loglog_slope, train_gkmnc, ClusteringMode, GroupingMode, PipelineConfig};

use crate::{fail, load_table, sibling, usage, write_file, CliResult, DataArgs, Failure, Manifest};

#[derive(Args)]
pub struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Configuration files to compare, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    config_list: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    workers_list: Vec<usize>,
    /// Training-set sizes for the scaling fit.
    #[arg(long, value_delimiter = ',', default_value = "200,400,800")]
    sizes: Vec<usize>,
    #[arg(long, env = "GKMNC_SEED", default_value_t = 0)]
    seed: u64,
    /// Report file; the scaling table and manifest go next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Seconds to train one universal classifier per size.
fn scaling(table: &DataTable, base: &PipelineConfig, sizes: &[usize]) -> CliResult<Vec<(usize, f64)>> {
    let mut c = base.clone();
    c.grouping = GroupingMode::Off;
    c.clustering = ClusteringMode::Off;
    c.worker_count = 1;
    let mut points = Vec::new();
    for &n in sizes {
        if n > table.len() {
            continue;
        }
        let (_, report) = train_gkmnc(&table.sample(n, c.seed), None, &c)?;
        points.push((n, report.leaf_phase_seconds));
    }
    Ok(points)
}

pub fn cmd_bench(args: BenchArgs) -> CliResult<()> {
    if args.workers_list.contains(&0) {
        return Err(usage("--workers-list entries must be positive"));
    }
    let start = Instant::now();
    let table = load_table(&args.data)?;
    let mut report = String::from("model,config,partitions,workers,avg_leaf_seconds,total_seconds\n");
    let mut scaling_csv = String::from("classifier,n,seconds\n");
    let mut slopes = String::from("classifier,slope\n");
    let mut configs = Vec::new();
    for path in &args.config_list {
        let mut config = PipelineConfig::from_file(path)?;
        config.seed = args.seed;
        configs.push((path, config));
    }
    for (path, config) in &configs {
        for &workers in &args.workers_list {
            let mut c = config.clone();
            c.worker_count = workers;
            let (model, r) = train_gkmnc(&table, None, &c)?;
            writeln!(
                report,
                "{},{},{},{workers},{:.6},{:.6}",
                model.name(),
                path.display(),
                model.leaf_count(),
                r.mean_leaf_seconds(),
                r.leaf_phase_seconds
            )
            .map_err(|e| fail(Failure::Io)(e.into()))?;
        }
    }
    let mut seen = Vec::new();
    for (_, config) in &configs {
        if seen.contains(&config.classifier) {
            continue;
        }
        seen.push(config.classifier);
        let points = scaling(&table, config, &args.sizes)?;
        for (n, s) in &points {
            scaling_csv.push_str(&format!("{},{n},{s:.6}\n", config.classifier));
        }
        let xy: Vec<(f64, f64)> = points.iter().map(|&(n, s)| (n as f64, s)).collect();
        match loglog_slope(&xy) {
            Some(slope) => slopes.push_str(&format!("{},{slope:.4}\n", config.classifier)),
            None => slopes.push_str(&format!("{},\n", config.classifier)),
        }
    }
    print!("{report}");
    println!();
    print!("{scaling_csv}");
    println!();
    print!("{slopes}");
    if let Some(out) = &args.out {
        write_file(out, &report)?;
        let scaling_path = sibling(out, "scaling.csv");
        write_file(&scaling_path, &format!("{scaling_csv}\n{slopes}"))?;
        let (_, first) = &configs[0];
        let mut m = Manifest::new("bench", first, &table);
        m.push("timing.total_seconds", &format!("{:.6}", start.elapsed().as_secs_f64()));
        m.outputs(&[out.clone(), scaling_path]);
        write_file(&sibling(out, "manifest"), &m.render())?;
    }
    Ok(())
}
