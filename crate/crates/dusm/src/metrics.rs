//! Distribution summaries of simulator state.
//!
//! Reports aggregate per-switch and per-link observations into box
//! statistics, grouped into five families:
//!
//! * `state`: multicast rules per switch, by switch layer
//! * `updates`: rule update messages per switch, by layer
//! * `promotion_updates`: the subset caused by promotions, by layer
//! * `traffic_bytes`: bytes per directed link, by link class
//! * `traffic_rate`: bytes per second per link, by link class
//!
//! All switches and links of a category are included, zeros and all, so
//! means are over the whole layer or class rather than the active subset.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::controller::Controller;
use crate::dataplane::LinkLedger;
use crate::topology::{FatTreeTopology, Layer, LinkClass};

/// Five-number summary plus mean.
///
/// Percentiles interpolate linearly at fractional rank `p/100 * (n - 1)`
/// over the sorted values, so `[1, 2, 3, 4]` has a first quartile of 1.75
/// and a median of 2.5.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
    pub mean: f64,
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (rank - lo as f64) * (sorted[hi] - sorted[lo])
}

impl BoxStats {
    pub fn from_values(values: &[f64]) -> Option<BoxStats> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(BoxStats {
            min: sorted[0],
            q25: percentile(&sorted, 25.0),
            median: percentile(&sorted, 50.0),
            q75: percentile(&sorted, 75.0),
            max: *sorted.last().expect("non-empty"),
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        })
    }

    pub fn from_counts(values: impl IntoIterator<Item = u64>) -> Option<BoxStats> {
        let as_f64: Vec<f64> = values.into_iter().map(|v| v as f64).collect();
        BoxStats::from_values(&as_f64)
    }

    /// Fields in report order.
    pub fn fields(&self) -> [(&'static str, f64); 6] {
        [
            ("min", self.min),
            ("q25", self.q25),
            ("median", self.median),
            ("q75", self.q75),
            ("max", self.max),
            ("mean", self.mean),
        ]
    }
}

/// Free-function form of [`BoxStats::from_values`]; `None` when empty.
pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    BoxStats::from_values(values)
}

/// `family -> category -> stats`, both levels sorted by name.
pub type FamilyTable = BTreeMap<String, BTreeMap<String, BoxStats>>;

/// One raw observation: (family, category, item, value).
pub type Observation = (String, String, String, f64);

fn per_layer_counts(
    topo: &FatTreeTopology,
    controller: &Controller,
    value: impl Fn(&crate::controller::SwitchState) -> u64,
) -> BTreeMap<String, BoxStats> {
    let mut by_layer: BTreeMap<Layer, Vec<u64>> =
        Layer::ALL.iter().map(|&l| (l, Vec::new())).collect();
    for (idx, state) in controller.switch_states().iter().enumerate() {
        let layer = topo.switch_layer(idx).expect("switch indices precede hosts");
        by_layer.get_mut(&layer).expect("all layers present").push(value(state));
    }
    by_layer
        .into_iter()
        .map(|(layer, values)| {
            let stats = BoxStats::from_counts(values).expect("layers are never empty");
            (layer.name().to_string(), stats)
        })
        .collect()
}

fn per_class_values(
    topo: &FatTreeTopology,
    ledger: &LinkLedger,
    scale: f64,
) -> BTreeMap<String, BoxStats> {
    LinkClass::ALL
        .iter()
        .map(|&class| {
            let values: Vec<f64> = ledger
                .class_bytes(topo, class)
                .into_iter()
                .map(|b| b as f64 * scale)
                .collect();
            let stats = BoxStats::from_values(&values).expect("classes are never empty");
            (class.name().to_string(), stats)
        })
        .collect()
}

/// Builds the five summary families. A zero `duration_secs` yields zero
/// rates rather than dividing by zero.
pub fn build_families(
    topo: &FatTreeTopology,
    controller: &Controller,
    ledger: &LinkLedger,
    duration_secs: f64,
) -> FamilyTable {
    let rate_scale = if duration_secs > 0.0 { 1.0 / duration_secs } else { 0.0 };
    let mut families = FamilyTable::new();
    families.insert(
        "state".into(),
        per_layer_counts(topo, controller, |s| s.rule_count() as u64),
    );
    families.insert("updates".into(), per_layer_counts(topo, controller, |s| s.updates));
    families.insert(
        "promotion_updates".into(),
        per_layer_counts(topo, controller, |s| s.promotion_updates),
    );
    families.insert("traffic_bytes".into(), per_class_values(topo, ledger, 1.0));
    families.insert("traffic_rate".into(), per_class_values(topo, ledger, rate_scale));
    families
}

/// Raw per-switch and per-link observations in the same five families,
/// one row per item, for external re-analysis.
pub fn build_observations(
    topo: &FatTreeTopology,
    controller: &Controller,
    ledger: &LinkLedger,
    duration_secs: f64,
) -> Vec<Observation> {
    let rate_scale = if duration_secs > 0.0 { 1.0 / duration_secs } else { 0.0 };
    let mut rows = Vec::new();
    let mut switch_rows = |family: &str, value: &dyn Fn(&crate::controller::SwitchState) -> u64| {
        for (idx, state) in controller.switch_states().iter().enumerate() {
            let layer = topo.switch_layer(idx).expect("switch indices precede hosts");
            rows.push((
                family.to_string(),
                layer.name().to_string(),
                topo.node_at(idx).to_string(),
                value(state) as f64,
            ));
        }
    };
    switch_rows("promotion_updates", &|s| s.promotion_updates);
    switch_rows("state", &|s| s.rule_count() as u64);
    switch_rows("updates", &|s| s.updates);
    for link in topo.links() {
        rows.push((
            "traffic_bytes".to_string(),
            link.class.name().to_string(),
            format!("{}->{}", link.src, link.dst),
            ledger.bytes(link.id) as f64,
        ));
    }
    for link in topo.links() {
        rows.push((
            "traffic_rate".to_string(),
            link.class.name().to_string(),
            format!("{}->{}", link.src, link.dst),
            ledger.bytes(link.id) as f64 * rate_scale,
        ));
    }
    rows.sort_by(|a, b| (&a.0, &a.1, &a.2).cmp(&(&b.0, &b.1, &b.2)));
    rows
}

/// Long-format CSV of the summary families:
/// `family,category,stat,value`, one row per statistic.
pub fn summary_csv(families: &FamilyTable) -> String {
    let mut out = String::from("family,category,stat,value\n");
    for (family, categories) in families {
        for (category, stats) in categories {
            for (stat, value) in stats.fields() {
                writeln!(out, "{family},{category},{stat},{value}").expect("write to string");
            }
        }
    }
    out
}

/// Long-format CSV of raw observations: `family,category,item,value`.
pub fn observations_csv(rows: &[Observation]) -> String {
    let mut out = String::from("family,category,item,value\n");
    for (family, category, item, value) in rows {
        writeln!(out, "{family},{category},{item},{value}").expect("write to string");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::{ControlSettings, Controller, Mode, RootSelection};
    use crate::hash::mix64;
    use crate::topology::HostId;
    use crate::workload::GroupAddress;

    #[test]
    fn quartiles_interpolate_linearly() {
        let stats = BoxStats::from_values(&[4.0, 2.0, 1.0, 3.0]).unwrap();
        assert_eq!(
            stats,
            BoxStats { min: 1.0, q25: 1.75, median: 2.5, q75: 3.25, max: 4.0, mean: 2.5 }
        );
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(BoxStats::from_values(&[]), None);
        let one = BoxStats::from_values(&[7.0]).unwrap();
        assert_eq!(
            one,
            BoxStats { min: 7.0, q25: 7.0, median: 7.0, q75: 7.0, max: 7.0, mean: 7.0 }
        );
        let two = BoxStats::from_values(&[10.0, 20.0]).unwrap();
        assert_eq!(two.q25, 12.5);
        assert_eq!(two.median, 15.0);
        assert_eq!(two.q75, 17.5);
    }

    #[test]
    fn percentiles_bracket_and_order_correctly() {
        for round in 0..50u64 {
            let n = 1 + (mix64(round) % 40) as usize;
            let values: Vec<f64> =
                (0..n).map(|i| (mix64(round ^ i as u64) % 1000) as f64).collect();
            let stats = BoxStats::from_values(&values).unwrap();
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            // quartiles sit between the bracketing order statistics
            for (p, v) in [(25.0, stats.q25), (50.0, stats.median), (75.0, stats.q75)] {
                let rank = p / 100.0 * (n - 1) as f64;
                assert!(sorted[rank.floor() as usize] <= v);
                assert!(v <= sorted[rank.ceil() as usize]);
                if rank.fract() == 0.0 {
                    assert_eq!(v, sorted[rank as usize], "integer rank is exact");
                }
            }
            assert!(stats.min <= stats.q25 && stats.q25 <= stats.median);
            assert!(stats.median <= stats.q75 && stats.q75 <= stats.max);
        }
    }

    fn small_world() -> (FatTreeTopology, Controller, LinkLedger) {
        let topo = FatTreeTopology::build(4).unwrap();
        let mut c = Controller::new(
            &topo,
            ControlSettings {
                mode: Mode::Dusm,
                threshold_bytes: 0,
                num_trees: 1,
                root_selection: RootSelection::AddressHash,
                seed: 0,
            },
        );
        let addr = GroupAddress::nth(0);
        for h in [0u32, 4] {
            c.handle_join(&topo, addr, HostId(h)).unwrap();
        }
        c.record_traffic(&topo, addr, 1500).unwrap();
        let mut ledger = LinkLedger::new(&topo);
        let tree = &c.group(addr).unwrap().trees[0];
        crate::dataplane::deliver_elephant(&topo, tree, HostId(0), 1500, &mut ledger).unwrap();
        (topo, c, ledger)
    }

    #[test]
    fn families_cover_every_layer_and_class() {
        let (topo, c, ledger) = small_world();
        let families = build_families(&topo, &c, &ledger, 10.0);
        let names: Vec<&String> = families.keys().collect();
        assert_eq!(
            names,
            ["promotion_updates", "state", "traffic_bytes", "traffic_rate", "updates"]
        );
        for layer_family in ["state", "updates", "promotion_updates"] {
            let cats: Vec<&String> = families[layer_family].keys().collect();
            assert_eq!(cats, ["aggregate", "core", "edge"], "{layer_family}");
        }
        for class_family in ["traffic_bytes", "traffic_rate"] {
            let cats: Vec<&String> = families[class_family].keys().collect();
            assert_eq!(cats, ["AC", "AE", "CA", "EA", "EH", "HE"], "{class_family}");
        }
        // the cross-pod pair rules one core, one aggregate per pod side,
        // one edge per pod side; zeros from idle switches dilute means
        assert_eq!(families["state"]["core"].max, 1.0);
        assert_eq!(families["state"]["core"].mean, 0.25);
        assert_eq!(families["state"]["edge"].mean, 2.0 / 8.0);
    }

    #[test]
    fn rates_divide_bytes_by_duration() {
        let (topo, c, ledger) = small_world();
        let families = build_families(&topo, &c, &ledger, 10.0);
        assert_eq!(
            families["traffic_rate"]["CA"].max,
            families["traffic_bytes"]["CA"].max / 10.0
        );
        let frozen = build_families(&topo, &c, &ledger, 0.0);
        assert_eq!(frozen["traffic_rate"]["CA"].max, 0.0, "zero duration gives zero rates");
    }

    #[test]
    fn summary_csv_is_one_line_per_statistic() {
        let (topo, c, ledger) = small_world();
        let families = build_families(&topo, &c, &ledger, 10.0);
        let csv = summary_csv(&families);
        let lines: Vec<&str> = csv.lines().collect();
        // header + 5 families * (3 layers or 6 classes) * 6 stats
        assert_eq!(lines.len(), 1 + (3 + 3 + 3 + 6 + 6) * 6);
        assert_eq!(lines[0], "family,category,stat,value");
        assert_eq!(lines[1], "promotion_updates,aggregate,min,0");
        assert!(lines.iter().any(|l| l.starts_with("traffic_bytes,CA,max,1500")));
    }

    #[test]
    fn observations_enumerate_switches_and_links() {
        let (topo, c, ledger) = small_world();
        let rows = build_observations(&topo, &c, &ledger, 10.0);
        let switches = topo.num_switches();
        let links = topo.links().len();
        assert_eq!(rows.len(), 3 * switches + 2 * links);
        let csv = observations_csv(&rows);
        assert!(csv.starts_with("family,category,item,value\n"));
        assert!(csv.contains("state,core,core"));
        assert!(csv.contains("->"));
        // rows are sorted and the ledger values survive
        let traffic: Vec<&Observation> =
            rows.iter().filter(|r| r.0 == "traffic_bytes" && r.3 > 0.0).collect();
        assert_eq!(traffic.len(), 6, "six charged links");
    }
}
