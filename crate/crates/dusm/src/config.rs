//! TOML experiment configuration.
//!
//! A config describes one fat tree plus one or more simulation cells.
//! The scalar keys `mode`, `threshold`, and `placement` have plural
//! forms (`modes`, `thresholds`, `placements`); giving a list expands
//! the config into the cross product of cells. Baseline cells ignore
//! threshold and tree count, so the expansion collapses them: three
//! thresholds against both modes yield three `dusm` cells and one `pim`
//! cell, not six.
//!
//! Byte quantities accept plain integers or strings with binary
//! suffixes: `"10KB"` is 10240 bytes.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{ControlSettings, Mode, RootSelection};
use crate::sim::SimSettings;
use crate::workload::{Placement, WorkloadSpec, DEFAULT_PACKET_BYTES};

/// What a run writes to disk.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum OutputFormat {
    /// `report.json`: totals plus summary families.
    Json,
    /// `summary.csv` and `observations.csv`.
    Csv,
}

impl OutputFormat {
    pub fn name(self) -> &'static str {
        match self {
            OutputFormat::Json => "json",
            OutputFormat::Csv => "csv",
        }
    }
}

/// Parses `"64MB"`, `"10KB"`, `"1500B"`, or `"123"` into bytes. Suffixes
/// are binary: KB is 1024.
pub fn parse_size(text: &str) -> Result<u64, String> {
    let trimmed = text.trim();
    let (digits, scale) = match trimmed.char_indices().find(|(_, c)| !c.is_ascii_digit()) {
        None => (trimmed, 1u64),
        Some((split, _)) => {
            let unit = match &trimmed[split..] {
                "B" | "b" => 1u64,
                "KB" | "kb" | "KiB" => 1 << 10,
                "MB" | "mb" | "MiB" => 1 << 20,
                "GB" | "gb" | "GiB" => 1 << 30,
                other => return Err(format!("unknown size suffix {other:?} in {text:?}")),
            };
            (&trimmed[..split], unit)
        }
    };
    if digits.is_empty() {
        return Err(format!("no digits in size {text:?}"));
    }
    let value: u64 = digits.parse().map_err(|_| format!("bad size {text:?}"))?;
    value
        .checked_mul(scale)
        .ok_or_else(|| format!("size {text:?} overflows"))
}

/// A byte quantity in TOML: bare integer or suffixed string.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SizeSpec(pub u64);

impl<'de> Deserialize<'de> for SizeSpec {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Text(String),
        }
        match Raw::deserialize(de)? {
            Raw::Int(v) => Ok(SizeSpec(v)),
            Raw::Text(t) => parse_size(&t).map(SizeSpec).map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    k: Option<u32>,
    mode: Option<String>,
    modes: Option<Vec<String>>,
    threshold: Option<SizeSpec>,
    thresholds: Option<Vec<SizeSpec>>,
    trees: Option<u32>,
    root_selection: Option<String>,
    placement: Option<String>,
    placements: Option<Vec<String>>,
    groups: Option<u32>,
    total_bytes: Option<SizeSpec>,
    packet_bytes: Option<SizeSpec>,
    zipf_exponent: Option<f64>,
    group_size: Option<[u32; 2]>,
    churn: Option<f64>,
    encap_overhead: Option<SizeSpec>,
    seed: Option<u64>,
    formats: Option<Vec<String>>,
}

/// One fully resolved simulation cell.
#[derive(Clone, Debug, Serialize)]
pub struct CellConfig {
    pub k: u32,
    pub mode: &'static str,
    pub threshold_bytes: u64,
    pub trees: u32,
    pub root_selection: &'static str,
    pub placement: &'static str,
    pub groups: u32,
    pub total_bytes: u64,
    pub packet_bytes: u64,
    /// `None` means the exponent is solved from the group count.
    pub zipf_exponent: Option<f64>,
    pub group_size: [u32; 2],
    pub churn: f64,
    pub encap_overhead_bytes: u64,
    pub seed: u64,
}

impl CellConfig {
    pub fn mode_enum(&self) -> Mode {
        match self.mode {
            "pim" => Mode::Pim,
            _ => Mode::Dusm,
        }
    }

    pub fn placement_enum(&self) -> Placement {
        match self.placement {
            "nearby" => Placement::Nearby,
            _ => Placement::Random,
        }
    }

    pub fn root_selection_enum(&self) -> RootSelection {
        match self.root_selection {
            "address" => RootSelection::AddressHash,
            _ => RootSelection::SeededRandom,
        }
    }

    /// Cell identity used for output directories and matrix rows.
    /// Baseline cells drop the threshold and tree-count components.
    pub fn name(&self) -> String {
        match self.mode_enum() {
            Mode::Dusm => format!(
                "dusm_k{}_thr{}_t{}_{}_seed{}",
                self.k, self.threshold_bytes, self.trees, self.placement, self.seed
            ),
            Mode::Pim => format!("pim_k{}_{}_seed{}", self.k, self.placement, self.seed),
        }
    }

    pub fn workload_spec(&self) -> WorkloadSpec {
        WorkloadSpec {
            num_groups: self.groups,
            total_bytes: self.total_bytes,
            zipf_exponent: self.zipf_exponent,
            packet_bytes: self.packet_bytes,
            group_size: (self.group_size[0], self.group_size[1]),
            placement: self.placement_enum(),
            churn_rate: self.churn,
            seed: self.seed,
        }
    }

    pub fn sim_settings(&self) -> SimSettings {
        SimSettings {
            control: ControlSettings {
                mode: self.mode_enum(),
                threshold_bytes: self.threshold_bytes,
                num_trees: self.trees,
                root_selection: self.root_selection_enum(),
                seed: self.seed,
            },
            encap_overhead_bytes: self.encap_overhead_bytes,
        }
    }
}

/// A parsed config: shared tree size, cells, output formats.
#[derive(Clone, Debug)]
pub struct ExperimentPlan {
    pub k: u32,
    pub cells: Vec<CellConfig>,
    pub formats: Vec<OutputFormat>,
}

#[derive(Error, Debug)]
pub enum ConfigError {
    #[error("config is not valid TOML: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

fn hosts_for(k: u32) -> u32 {
    k * (k / 2) * (k / 2)
}

/// Parses and validates a TOML config into an expanded plan. All field
/// errors are collected and reported together.
pub fn validate_config(text: &str) -> Result<ExperimentPlan, ConfigError> {
    let raw: RawConfig = toml::from_str(text)?;
    let mut errors: Vec<String> = Vec::new();

    let k = raw.k.unwrap_or(8);
    if !k.is_multiple_of(2) || !(4..=64).contains(&k) {
        errors.push(format!("k: must be even and in 4..=64, got {k}"));
    }
    let num_cores = (k / 2) * (k / 2);

    let modes: Vec<&'static str> = {
        let listed = match (&raw.mode, &raw.modes) {
            (Some(_), Some(_)) => {
                errors.push("mode: give either `mode` or `modes`, not both".into());
                vec![]
            }
            (Some(one), None) => vec![one.clone()],
            (None, Some(many)) => many.clone(),
            (None, None) => vec!["dusm".to_string()],
        };
        listed
            .iter()
            .filter_map(|m| match m.as_str() {
                "dusm" => Some("dusm"),
                "pim" => Some("pim"),
                other => {
                    errors.push(format!("mode: expected \"dusm\" or \"pim\", got {other:?}"));
                    None
                }
            })
            .collect()
    };

    let thresholds: Vec<u64> = match (&raw.threshold, &raw.thresholds) {
        (Some(_), Some(_)) => {
            errors.push("threshold: give either `threshold` or `thresholds`, not both".into());
            vec![]
        }
        (Some(one), None) => vec![one.0],
        (None, Some(many)) => many.iter().map(|s| s.0).collect(),
        (None, None) => vec![100 << 10],
    };
    if thresholds.is_empty() && raw.thresholds.is_some() {
        errors.push("thresholds: list is empty".into());
    }

    let placements: Vec<&'static str> = {
        let listed = match (&raw.placement, &raw.placements) {
            (Some(_), Some(_)) => {
                errors.push("placement: give either `placement` or `placements`, not both".into());
                vec![]
            }
            (Some(one), None) => vec![one.clone()],
            (None, Some(many)) => many.clone(),
            (None, None) => vec!["random".to_string()],
        };
        listed
            .iter()
            .filter_map(|p| match p.as_str() {
                "random" => Some("random"),
                "nearby" => Some("nearby"),
                other => {
                    errors
                        .push(format!("placement: expected \"random\" or \"nearby\", got {other:?}"));
                    None
                }
            })
            .collect()
    };

    let trees = raw.trees.unwrap_or(4);
    if trees == 0 {
        errors.push("trees: need at least one tree".into());
    } else if trees > num_cores && k.is_multiple_of(2) && (4..=64).contains(&k) {
        errors.push(format!("trees: a k={k} tree has {num_cores} cores, got {trees}"));
    }

    let root_selection = match raw.root_selection.as_deref() {
        None | Some("seeded") => "seeded",
        Some("address") => "address",
        Some(other) => {
            errors.push(format!(
                "root_selection: expected \"seeded\" or \"address\", got {other:?}"
            ));
            "seeded"
        }
    };

    let groups = raw.groups.unwrap_or(100);
    if groups == 0 {
        errors.push("groups: need at least one group".into());
    }

    let total_bytes = raw.total_bytes.map_or(64 << 20, |s| s.0);
    if total_bytes == 0 {
        errors.push("total_bytes: must be positive".into());
    }

    let packet_bytes = raw.packet_bytes.map_or(DEFAULT_PACKET_BYTES, |s| s.0);
    if packet_bytes == 0 {
        errors.push("packet_bytes: must be positive".into());
    }

    let max_hosts = hosts_for(k);
    let group_size = raw.group_size.unwrap_or([2, 32.min(max_hosts)]);
    if group_size[0] < 2 {
        errors.push(format!("group_size: minimum is 2 members, got {}", group_size[0]));
    }
    if group_size[0] > group_size[1] {
        errors.push(format!(
            "group_size: range [{}, {}] is empty",
            group_size[0], group_size[1]
        ));
    }
    if group_size[1] > max_hosts {
        errors.push(format!(
            "group_size: maximum {} exceeds the {max_hosts} hosts of a k={k} tree",
            group_size[1]
        ));
    }

    let churn = raw.churn.unwrap_or(0.0);
    if !churn.is_finite() || churn < 0.0 {
        errors.push(format!("churn: must be finite and non-negative, got {churn}"));
    }

    if let Some(z) = raw.zipf_exponent {
        if !z.is_finite() || z <= 0.0 {
            errors.push(format!("zipf_exponent: must be finite and positive, got {z}"));
        }
    }

    let encap = raw.encap_overhead.map_or(0, |s| s.0);
    let seed = raw.seed.unwrap_or(0);

    let formats: Vec<OutputFormat> = {
        let listed = raw
            .formats
            .clone()
            .unwrap_or_else(|| vec!["json".to_string(), "csv".to_string()]);
        let mut parsed: Vec<OutputFormat> = listed
            .iter()
            .filter_map(|f| match f.as_str() {
                "json" => Some(OutputFormat::Json),
                "csv" => Some(OutputFormat::Csv),
                other => {
                    errors.push(format!("formats: expected \"json\" or \"csv\", got {other:?}"));
                    None
                }
            })
            .collect();
        parsed.sort();
        parsed.dedup();
        if parsed.is_empty() && errors.is_empty() {
            errors.push("formats: list is empty".into());
        }
        parsed
    };

    if !errors.is_empty() {
        return Err(ConfigError::Invalid(errors));
    }

    let mut cells = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for &mode in &modes {
        for &threshold_bytes in &thresholds {
            for &placement in &placements {
                let cell = CellConfig {
                    k,
                    mode,
                    threshold_bytes,
                    trees,
                    root_selection,
                    placement,
                    groups,
                    total_bytes,
                    packet_bytes,
                    zipf_exponent: raw.zipf_exponent,
                    group_size,
                    churn,
                    encap_overhead_bytes: encap,
                    seed,
                };
                if seen.insert(cell.name()) {
                    cells.push(cell);
                }
            }
        }
    }
    Ok(ExperimentPlan { k, cells, formats })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_parse_with_binary_suffixes() {
        assert_eq!(parse_size("10KB").unwrap(), 10_240);
        assert_eq!(parse_size("64MB").unwrap(), 64 << 20);
        assert_eq!(parse_size("1GB").unwrap(), 1 << 30);
        assert_eq!(parse_size("1500B").unwrap(), 1500);
        assert_eq!(parse_size("123").unwrap(), 123);
        assert_eq!(parse_size(" 2KiB ").unwrap(), 2048);
        for bad in ["12XB", "KB", "1.5MB", "-5", ""] {
            assert!(parse_size(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let plan = validate_config("k = 4\n").unwrap();
        assert_eq!(plan.k, 4);
        assert_eq!(plan.cells.len(), 1);
        let cell = &plan.cells[0];
        assert_eq!(cell.mode, "dusm");
        assert_eq!(cell.threshold_bytes, 100 << 10);
        assert_eq!(cell.trees, 4);
        assert_eq!(cell.placement, "random");
        assert_eq!(cell.packet_bytes, DEFAULT_PACKET_BYTES);
        assert_eq!(cell.group_size, [2, 16]);
        assert_eq!(cell.seed, 0);
        assert_eq!(plan.formats, vec![OutputFormat::Json, OutputFormat::Csv]);
        assert_eq!(cell.name(), "dusm_k4_thr102400_t4_random_seed0");
    }

    #[test]
    fn plural_keys_expand_and_baseline_collapses() {
        let plan = validate_config(
            r#"
k = 8
modes = ["dusm", "pim"]
thresholds = ["10KB", "100KB", "1MB"]
placement = "random"
"#,
        )
        .unwrap();
        // three dusm cells, one pim cell: the baseline has no threshold
        assert_eq!(plan.cells.len(), 4);
        let names: Vec<String> = plan.cells.iter().map(|c| c.name()).collect();
        assert_eq!(
            names,
            [
                "dusm_k8_thr10240_t4_random_seed0",
                "dusm_k8_thr102400_t4_random_seed0",
                "dusm_k8_thr1048576_t4_random_seed0",
                "pim_k8_random_seed0",
            ]
        );
    }

    #[test]
    fn errors_are_collected_with_field_paths() {
        let err = validate_config(
            r#"
k = 5
trees = 0
groups = 0
churn = -1.0
mode = "broadcast"
group_size = [1, 9999]
"#,
        )
        .unwrap_err();
        let text = err.to_string();
        for needle in [
            "k: must be even",
            "trees: need at least one",
            "groups: need at least one",
            "churn: must be finite and non-negative",
            "mode: expected",
            "group_size: minimum is 2",
        ] {
            assert!(text.contains(needle), "missing {needle:?} in {text}");
        }
    }

    #[test]
    fn tree_count_is_capped_by_cores() {
        let err = validate_config("k = 4\ntrees = 5\n").unwrap_err();
        assert!(err.to_string().contains("a k=4 tree has 4 cores"), "{err}");
        assert!(validate_config("k = 4\ntrees = 4\n").is_ok());
    }

    #[test]
    fn singular_and_plural_keys_conflict() {
        let err = validate_config("k = 4\nmode = \"dusm\"\nmodes = [\"pim\"]\n").unwrap_err();
        assert!(err.to_string().contains("not both"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = validate_config("k = 4\nbandwidth = 10\n").unwrap_err();
        assert!(matches!(err, ConfigError::Toml(_)), "{err}");
    }

    #[test]
    fn cell_converts_to_workload_and_sim_settings() {
        let plan = validate_config(
            r#"
k = 4
mode = "dusm"
threshold = "10KB"
trees = 2
root_selection = "address"
placement = "nearby"
groups = 7
total_bytes = "1MB"
zipf_exponent = 1.25
group_size = [2, 5]
churn = 2.5
encap_overhead = 24
seed = 42
"#,
        )
        .unwrap();
        let cell = &plan.cells[0];
        let spec = cell.workload_spec();
        assert_eq!(spec.num_groups, 7);
        assert_eq!(spec.total_bytes, 1 << 20);
        assert_eq!(spec.zipf_exponent, Some(1.25));
        assert_eq!(spec.group_size, (2, 5));
        assert_eq!(spec.placement, Placement::Nearby);
        assert_eq!(spec.churn_rate, 2.5);
        assert_eq!(spec.seed, 42);
        let sim = cell.sim_settings();
        assert_eq!(sim.control.mode, Mode::Dusm);
        assert_eq!(sim.control.threshold_bytes, 10_240);
        assert_eq!(sim.control.num_trees, 2);
        assert_eq!(sim.control.root_selection, RootSelection::AddressHash);
        assert_eq!(sim.encap_overhead_bytes, 24);
    }
}
