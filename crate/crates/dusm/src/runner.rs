//! Runs configured cells and writes their outputs.
//!
//! Each cell gets its own directory named by the cell key, holding
//! `report.json`, `summary.csv`, and `observations.csv` depending on the
//! requested formats. Matrix runs execute cells in parallel, write each
//! cell's files as it finishes so failures elsewhere lose nothing, and
//! finally combine the per-cell summaries into one `matrix_summary.csv`
//! keyed by cell name.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::config::{CellConfig, ExperimentPlan, OutputFormat};
use crate::metrics::{observations_csv, summary_csv};
use crate::sim::{Report, SimError, SimSettings, Simulation};
use crate::topology::{FatTreeTopology, TopologyError};
use crate::workload::{generate_synthetic, Event, WorkloadError};

#[derive(Error, Debug)]
pub enum RunError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

/// In-memory result of one cell.
pub struct CellOutput {
    pub name: String,
    pub report: Report,
    pub summary_csv: String,
    pub observations_csv: String,
}

/// Replays `events` under `settings` and renders every output form.
/// `config` is echoed into the report.
pub fn simulate_events(
    name: String,
    topo: FatTreeTopology,
    settings: SimSettings,
    events: &[Event],
    config: serde_json::Value,
) -> Result<CellOutput, RunError> {
    let mut sim = Simulation::new(topo, settings);
    sim.run(events)?;
    let report = sim.build_report(config);
    let summary = summary_csv(&report.families);
    let observations = observations_csv(&sim.observations());
    Ok(CellOutput { name, report, summary_csv: summary, observations_csv: observations })
}

/// Builds the cell's topology, generates its synthetic workload, and
/// replays it.
pub fn run_cell(cell: &CellConfig) -> Result<CellOutput, RunError> {
    let topo = FatTreeTopology::build(cell.k)?;
    let events = generate_synthetic(&cell.workload_spec(), &topo)?;
    let config = serde_json::to_value(cell).expect("cell configs serialize");
    simulate_events(cell.name(), topo, cell.sim_settings(), &events, config)
}

/// Writes one cell's outputs under `out_dir/<cell name>/`. Returns the
/// paths written.
pub fn emit_report(
    out_dir: &Path,
    output: &CellOutput,
    formats: &[OutputFormat],
) -> io::Result<Vec<PathBuf>> {
    let dir = out_dir.join(&output.name);
    fs::create_dir_all(&dir)?;
    let mut written = Vec::new();
    for format in formats {
        match format {
            OutputFormat::Json => {
                let path = dir.join("report.json");
                let mut text = serde_json::to_string_pretty(&output.report)
                    .expect("reports serialize");
                text.push('\n');
                fs::write(&path, text)?;
                written.push(path);
            }
            OutputFormat::Csv => {
                let summary = dir.join("summary.csv");
                fs::write(&summary, &output.summary_csv)?;
                written.push(summary);
                let observations = dir.join("observations.csv");
                fs::write(&observations, &output.observations_csv)?;
                written.push(observations);
            }
        }
    }
    Ok(written)
}

/// Per-cell outcome of a matrix run, in plan order.
pub struct MatrixOutcome {
    pub cells: Vec<(String, Result<(), RunError>)>,
    /// Path of the combined summary, when any cell succeeded and csv
    /// output was requested.
    pub combined: Option<PathBuf>,
}

impl MatrixOutcome {
    pub fn all_ok(&self) -> bool {
        self.cells.iter().all(|(_, r)| r.is_ok())
    }
}

/// Runs every cell of the plan in parallel on `jobs` threads (0 picks
/// the machine default), writing outputs as cells finish.
pub fn run_matrix(plan: &ExperimentPlan, out_dir: &Path, jobs: usize) -> MatrixOutcome {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool construction");
    let results: Vec<(String, Result<String, RunError>)> = pool.install(|| {
        plan.cells
            .par_iter()
            .map(|cell| {
                let name = cell.name();
                let outcome = run_cell(cell)
                    .and_then(|output| {
                        emit_report(out_dir, &output, &plan.formats)?;
                        Ok(output.summary_csv)
                    });
                (name, outcome)
            })
            .collect()
    });

    let mut combined = None;
    if plan.formats.contains(&OutputFormat::Csv) {
        // canonical cell order, so re-aggregating the per-cell files on
        // disk reproduces this file byte for byte
        let mut succeeded: Vec<(&str, &str)> = results
            .iter()
            .filter_map(|(name, result)| {
                result.as_ref().ok().map(|summary| (name.as_str(), summary.as_str()))
            })
            .collect();
        succeeded.sort_by_key(|&(name, _)| name);
        if !succeeded.is_empty() {
            let mut text = String::from("cell,family,category,stat,value\n");
            for (name, summary) in succeeded {
                for line in summary.lines().skip(1) {
                    text.push_str(name);
                    text.push(',');
                    text.push_str(line);
                    text.push('\n');
                }
            }
            let path = out_dir.join("matrix_summary.csv");
            if fs::write(&path, text).is_ok() {
                combined = Some(path);
            }
        }
    }

    MatrixOutcome {
        cells: results.into_iter().map(|(n, r)| (n, r.map(|_| ()))).collect(),
        combined,
    }
}
