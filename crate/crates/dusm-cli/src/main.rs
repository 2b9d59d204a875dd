//! `dusm` drives the simulator from the shell: write synthetic traces,
//! run single cells, sweep experiment grids, and rebuild summaries from
//! outputs already on disk.
//!
//! Experiments are defined by a TOML config file; every flag mirrors a
//! config key and overrides it, so a checked-in config plus a couple of
//! flags reproduces any cell exactly.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dusm::sim::REPORT_SCHEMA;
use dusm::{
    build_fat_tree, emit_report, generate_synthetic, parse_size, parse_trace, run_cell,
    run_matrix, simulate_events, validate_config, write_trace, CellConfig, CellOutput,
    ExperimentPlan, Mode, Placement, WorkloadSpec,
};

#[derive(Parser)]
#[command(name = "dusm", version, about = "Deterministic fat-tree multicast simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic trace file
    Gen(GenArgs),
    /// Run one experiment cell and write its reports
    Run(RunArgs),
    /// Run every cell of an experiment grid
    Matrix(MatrixArgs),
    /// Print saved cell totals and rebuild the combined summary
    Report(ReportArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    /// Threshold-split control plane
    Dusm,
    /// One shared tree per group
    Pim,
}

impl ModeArg {
    fn name(self) -> &'static str {
        match self {
            ModeArg::Dusm => "dusm",
            ModeArg::Pim => "pim",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PlacementArg {
    /// Members drawn uniformly over all hosts
    Random,
    /// Members packed onto consecutive hosts
    Nearby,
}

impl PlacementArg {
    fn name(self) -> &'static str {
        match self {
            PlacementArg::Random => "random",
            PlacementArg::Nearby => "nearby",
        }
    }
}

impl From<PlacementArg> for Placement {
    fn from(arg: PlacementArg) -> Placement {
        match arg {
            PlacementArg::Random => Placement::Random,
            PlacementArg::Nearby => Placement::Nearby,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RootSelectionArg {
    /// Distinct seeded-random roots per group
    Seeded,
    /// Roots hashed from the group address
    Address,
}

impl RootSelectionArg {
    fn name(self) -> &'static str {
        match self {
            RootSelectionArg::Seeded => "seeded",
            RootSelectionArg::Address => "address",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

impl FormatArg {
    fn name(self) -> &'static str {
        match self {
            FormatArg::Json => "json",
            FormatArg::Csv => "csv",
        }
    }
}

#[derive(Args)]
struct GenArgs {
    /// Fat-tree arity (even, at least 4)
    #[arg(long, default_value_t = 8)]
    k: u32,
    /// Number of multicast groups
    #[arg(long, default_value_t = 100)]
    groups: u32,
    /// Total payload volume, plain bytes or a KB/MB/GB suffix
    #[arg(long, default_value = "64MB")]
    total_bytes: String,
    /// Payload bytes per packet
    #[arg(long, default_value_t = 1500)]
    packet_bytes: u64,
    /// Group size bounds as MIN,MAX; defaults to 2 up to min(32, hosts)
    #[arg(long, value_delimiter = ',')]
    group_size: Option<Vec<u32>>,
    /// Member placement
    #[arg(long, value_enum, default_value_t = PlacementArg::Random)]
    placement: PlacementArg,
    /// Traffic skew; omitted picks the shape that keeps ~70% of groups small
    #[arg(long)]
    zipf_exponent: Option<f64>,
    /// Expected membership changes per group over the run
    #[arg(long, default_value_t = 0.0)]
    churn: f64,
    /// Workload seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trace file to write
    #[arg(long)]
    out: PathBuf,
}

fn gen(args: GenArgs) -> Result<()> {
    let topo = build_fat_tree(args.k)?;
    let group_size = match &args.group_size {
        Some(bounds) => two_bounds(bounds)?,
        None => (2, 32.min(topo.num_hosts() as u32)),
    };
    let spec = WorkloadSpec {
        num_groups: args.groups,
        total_bytes: parse_size(&args.total_bytes).map_err(|e| anyhow!("--total-bytes: {e}"))?,
        zipf_exponent: args.zipf_exponent,
        packet_bytes: args.packet_bytes,
        group_size,
        placement: args.placement.into(),
        churn_rate: args.churn,
        seed: args.seed,
    };
    let events = generate_synthetic(&spec, &topo)?;
    fs::write(&args.out, write_trace(&events))
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!("wrote {} events to {}", events.len(), args.out.display());
    Ok(())
}

fn two_bounds(bounds: &[u32]) -> Result<(u32, u32)> {
    match bounds {
        &[lo, hi] => Ok((lo, hi)),
        _ => bail!("--group-size takes exactly two values, MIN,MAX"),
    }
}

/// Grid definition shared by `run` and `matrix`. Flags override the
/// config file key of the same name; the singular `--mode`,
/// `--threshold`, and `--placement` replace their plural list forms.
#[derive(Args)]
struct PlanArgs {
    /// Experiment config file (TOML)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Fat-tree arity (even, at least 4)
    #[arg(long)]
    k: Option<u32>,
    /// Control mode
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Elephant threshold, plain bytes or a size suffix like 100KB
    #[arg(long)]
    threshold: Option<String>,
    /// Shared trees per elephant group
    #[arg(long)]
    trees: Option<u32>,
    /// How elephant tree roots are picked
    #[arg(long, value_enum)]
    root_selection: Option<RootSelectionArg>,
    /// Member placement
    #[arg(long, value_enum)]
    placement: Option<PlacementArg>,
    /// Number of multicast groups
    #[arg(long)]
    groups: Option<u32>,
    /// Total payload volume
    #[arg(long)]
    total_bytes: Option<String>,
    /// Payload bytes per packet
    #[arg(long)]
    packet_bytes: Option<u64>,
    /// Traffic skew exponent
    #[arg(long)]
    zipf_exponent: Option<f64>,
    /// Group size bounds as MIN,MAX
    #[arg(long, value_delimiter = ',')]
    group_size: Option<Vec<u32>>,
    /// Expected membership changes per group over the run
    #[arg(long)]
    churn: Option<f64>,
    /// Bytes added to each translated unicast copy
    #[arg(long)]
    encap_overhead: Option<String>,
    /// Workload and root-selection seed
    #[arg(long)]
    seed: Option<u64>,
    /// Report formats
    #[arg(long, value_delimiter = ',', value_enum)]
    format: Vec<FormatArg>,
}

impl PlanArgs {
    fn plan(&self) -> Result<ExperimentPlan> {
        let mut table: toml::Table = match &self.config {
            Some(path) => fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?
                .parse()
                .context("config file is not valid TOML")?,
            None => toml::Table::new(),
        };
        if let Some(k) = self.k {
            table.insert("k".into(), i64::from(k).into());
        }
        if let Some(mode) = self.mode {
            table.insert("mode".into(), mode.name().into());
            table.remove("modes");
        }
        if let Some(threshold) = &self.threshold {
            table.insert("threshold".into(), threshold.clone().into());
            table.remove("thresholds");
        }
        if let Some(trees) = self.trees {
            table.insert("trees".into(), i64::from(trees).into());
        }
        if let Some(selection) = self.root_selection {
            table.insert("root_selection".into(), selection.name().into());
        }
        if let Some(placement) = self.placement {
            table.insert("placement".into(), placement.name().into());
            table.remove("placements");
        }
        if let Some(groups) = self.groups {
            table.insert("groups".into(), i64::from(groups).into());
        }
        if let Some(total) = &self.total_bytes {
            table.insert("total_bytes".into(), total.clone().into());
        }
        if let Some(packet) = self.packet_bytes {
            let packet =
                i64::try_from(packet).context("--packet-bytes exceeds the config integer range")?;
            table.insert("packet_bytes".into(), packet.into());
        }
        if let Some(zipf) = self.zipf_exponent {
            table.insert("zipf_exponent".into(), zipf.into());
        }
        if let Some(bounds) = &self.group_size {
            let (lo, hi) = two_bounds(bounds)?;
            let list = vec![toml::Value::from(i64::from(lo)), toml::Value::from(i64::from(hi))];
            table.insert("group_size".into(), list.into());
        }
        if let Some(churn) = self.churn {
            table.insert("churn".into(), churn.into());
        }
        if let Some(encap) = &self.encap_overhead {
            table.insert("encap_overhead".into(), encap.clone().into());
        }
        if let Some(seed) = self.seed {
            let seed = i64::try_from(seed).context("--seed exceeds the config integer range")?;
            table.insert("seed".into(), seed.into());
        }
        if !self.format.is_empty() {
            let list: Vec<toml::Value> =
                self.format.iter().map(|f| toml::Value::from(f.name())).collect();
            table.insert("formats".into(), list.into());
        }
        let text = toml::to_string(&table).expect("override tables serialize");
        validate_config(&text).map_err(|err| anyhow!("{err}"))
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    plan: PlanArgs,
    /// Replay this trace file instead of synthesizing a workload
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn run(args: RunArgs) -> Result<()> {
    let plan = args.plan.plan()?;
    if plan.cells.len() != 1 {
        bail!(
            "this invocation expands to {} cells; use `dusm matrix` for grids",
            plan.cells.len()
        );
    }
    let cell = &plan.cells[0];
    let output = match &args.trace {
        None => run_cell(cell)?,
        Some(path) => replay_trace(cell, path)?,
    };
    let written = emit_report(&args.out, &output, &plan.formats)?;
    let totals = &output.report.totals;
    println!(
        "cell {}: {} events, {} groups ({} elephant), {} rules, {} updates",
        output.name,
        totals.events,
        totals.groups,
        totals.elephant_groups,
        totals.switch_rules,
        totals.switch_updates
    );
    for path in written {
        println!("  {}", path.display());
    }
    Ok(())
}

/// Replays a saved trace under the cell's control settings. The cell's
/// synthetic-workload fields do not apply, so the echoed config carries
/// the trace path instead.
fn replay_trace(cell: &CellConfig, path: &Path) -> Result<CellOutput> {
    let topo = build_fat_tree(cell.k)?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let events =
        parse_trace(&text, &topo).with_context(|| format!("parsing {}", path.display()))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trace".to_string());
    let name = match cell.mode_enum() {
        Mode::Dusm => format!("dusm_thr{}_t{}_{stem}", cell.threshold_bytes, cell.trees),
        Mode::Pim => format!("pim_{stem}"),
    };
    let config = serde_json::json!({
        "k": cell.k,
        "mode": cell.mode,
        "threshold_bytes": cell.threshold_bytes,
        "trees": cell.trees,
        "root_selection": cell.root_selection,
        "encap_overhead_bytes": cell.encap_overhead_bytes,
        "seed": cell.seed,
        "trace": path.display().to_string(),
    });
    Ok(simulate_events(name, topo, cell.sim_settings(), &events, config)?)
}

#[derive(Args)]
struct MatrixArgs {
    #[command(flatten)]
    plan: PlanArgs,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; 0 uses every core
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

fn matrix(args: MatrixArgs) -> Result<ExitCode> {
    let plan = args.plan.plan()?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let outcome = run_matrix(&plan, &args.out, args.jobs);
    let mut failed = 0usize;
    for (name, result) in &outcome.cells {
        match result {
            Ok(()) => println!("cell {name}: ok"),
            Err(err) => {
                failed += 1;
                eprintln!("cell {name}: failed: {err}");
            }
        }
    }
    if let Some(path) = &outcome.combined {
        println!("combined summary: {}", path.display());
    }
    if failed > 0 {
        eprintln!("{failed} of {} cells failed; completed cells are kept", outcome.cells.len());
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding per-cell outputs
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

/// Re-aggregates whatever cell outputs exist under the directory:
/// prints each cell's totals and rewrites the combined summary in the
/// same canonical order `matrix` uses.
fn report(args: ReportArgs) -> Result<()> {
    let mut summaries: Vec<(String, String)> = Vec::new();
    let mut totals: Vec<(String, serde_json::Value)> = Vec::new();
    for entry in
        fs::read_dir(&args.out).with_context(|| format!("reading {}", args.out.display()))?
    {
        let path = entry?.path();
        if !path.is_dir() {
            continue;
        }
        let name = match path.file_name() {
            Some(n) => n.to_string_lossy().into_owned(),
            None => continue,
        };
        let summary = path.join("summary.csv");
        if summary.is_file() {
            summaries.push((name.clone(), fs::read_to_string(&summary)?));
        }
        let report = path.join("report.json");
        if report.is_file() {
            let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report)?)
                .with_context(|| format!("parsing {}", report.display()))?;
            if value["schema"] == REPORT_SCHEMA {
                totals.push((name, value));
            } else {
                eprintln!("skipping {}: unrecognized schema {}", report.display(), value["schema"]);
            }
        }
    }
    if summaries.is_empty() && totals.is_empty() {
        bail!("no cell outputs under {}", args.out.display());
    }

    totals.sort_by(|a, b| a.0.cmp(&b.0));
    for (name, value) in &totals {
        let t = &value["totals"];
        println!(
            "cell {name}: {} events, {} groups ({} elephant), {} rules, {} updates",
            t["events"], t["groups"], t["elephant_groups"], t["switch_rules"], t["switch_updates"]
        );
    }

    if !summaries.is_empty() {
        summaries.sort_by(|a, b| a.0.cmp(&b.0));
        let mut text = String::from("cell,family,category,stat,value\n");
        for (name, summary) in &summaries {
            for line in summary.lines().skip(1) {
                text.push_str(name);
                text.push(',');
                text.push_str(line);
                text.push('\n');
            }
        }
        let path = args.out.join("matrix_summary.csv");
        fs::write(&path, text)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen(args) => gen(args).map(|()| ExitCode::SUCCESS),
        Command::Run(args) => run(args).map(|()| ExitCode::SUCCESS),
        Command::Matrix(args) => matrix(args),
        Command::Report(args) => report(args).map(|()| ExitCode::SUCCESS),
    };
    outcome.unwrap_or_else(|err| {
        eprintln!("error: {err:#}");
        ExitCode::from(2)
    })
}
