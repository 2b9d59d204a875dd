//! Event replay: feeds a workload stream through the controller and the
//! data plane and snapshots the result as a report.
//!
//! Ordering matters on the send path: the packet is delivered under the
//! group's current class first, then recorded. A packet that pushes a
//! group over the threshold therefore still travels as unicast copies,
//! and the trees it triggers carry only later packets.

use serde::Serialize;
use thiserror::Error;

use crate::controller::{
    ControlError, ControlSettings, Controller, GroupClass, UpdateDelta,
};
use crate::dataplane::{
    deliver_elephant, deliver_mice, match_tree, packet_key, HypervisorState, LinkLedger,
};
use crate::metrics::{build_families, build_observations, FamilyTable, Observation};
use crate::topology::{FatTreeTopology, TopologyError};
use crate::workload::{Event, EventKind};

/// Report format tag, bumped on breaking schema changes.
pub const REPORT_SCHEMA: &str = "multicast-sim-report/1";

#[derive(Clone, Copy, Debug)]
pub struct SimSettings {
    pub control: ControlSettings,
    /// Extra bytes each translated mice copy carries on the wire.
    pub encap_overhead_bytes: u64,
}

#[derive(Error, Debug)]
pub enum SimError {
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("event at {time}s precedes the clock at {clock}s")]
    TimeReversed { time: f64, clock: f64 },
}

/// Whole-run counters for the report header.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Totals {
    pub events: u64,
    pub joins: u64,
    pub leaves: u64,
    pub sends: u64,
    /// Payload bytes offered by senders.
    pub payload_bytes: u64,
    /// Bytes actually carried by links, replication and overhead included.
    pub wire_bytes: u64,
    pub groups: u64,
    pub mice_groups: u64,
    pub elephant_groups: u64,
    pub switch_rules: u64,
    pub switch_updates: u64,
    pub promotion_updates: u64,
    /// Receiver-list entries held by hypervisors (host-side state).
    pub hypervisor_entries: u64,
}

/// Serialized snapshot of one finished run.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub config: serde_json::Value,
    pub duration_secs: f64,
    pub totals: Totals,
    pub families: FamilyTable,
}

/// One run in progress: topology, control plane, hypervisors, link ledger.
#[derive(Debug)]
pub struct Simulation {
    topo: FatTreeTopology,
    settings: SimSettings,
    controller: Controller,
    hypervisors: HypervisorState,
    ledger: LinkLedger,
    clock: f64,
    joins: u64,
    leaves: u64,
    sends: u64,
    payload_bytes: u64,
}

impl Simulation {
    pub fn new(topo: FatTreeTopology, settings: SimSettings) -> Simulation {
        let controller = Controller::new(&topo, settings.control);
        let ledger = LinkLedger::new(&topo);
        Simulation {
            topo,
            settings,
            controller,
            hypervisors: HypervisorState::default(),
            ledger,
            clock: 0.0,
            joins: 0,
            leaves: 0,
            sends: 0,
            payload_bytes: 0,
        }
    }

    pub fn topology(&self) -> &FatTreeTopology {
        &self.topo
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn ledger(&self) -> &LinkLedger {
        &self.ledger
    }

    pub fn hypervisors(&self) -> &HypervisorState {
        &self.hypervisors
    }

    /// Time of the last applied event.
    pub fn clock(&self) -> f64 {
        self.clock
    }

    /// Applies one event. Returns the rule updates it caused: membership
    /// changes on installed trees, or the tree installation when a send
    /// promotes its group.
    pub fn apply(&mut self, event: &Event) -> Result<UpdateDelta, SimError> {
        if event.time < self.clock {
            return Err(SimError::TimeReversed { time: event.time, clock: self.clock });
        }
        self.clock = event.time;
        match event.kind {
            EventKind::Join { host } => {
                let delta = self.controller.handle_join(&self.topo, event.group, host)?;
                self.hypervisors.join(event.group, host);
                self.joins += 1;
                Ok(delta)
            }
            EventKind::Leave { host } => {
                let delta = self.controller.handle_leave(&self.topo, event.group, host)?;
                self.hypervisors.leave(event.group, host);
                self.leaves += 1;
                Ok(delta)
            }
            EventKind::Send { sender, bytes } => {
                let group = self
                    .controller
                    .group(event.group)
                    .ok_or(ControlError::UnknownGroup(event.group))?;
                if !group.members.contains(&sender) {
                    return Err(
                        ControlError::NotAMember { group: event.group, host: sender }.into()
                    );
                }
                match group.class {
                    GroupClass::Mice => {
                        let receivers = self
                            .hypervisors
                            .receivers(event.group)
                            .expect("joined groups have receiver lists");
                        deliver_mice(
                            &self.topo,
                            receivers,
                            sender,
                            bytes,
                            self.settings.encap_overhead_bytes,
                            self.settings.control.seed,
                            &mut self.ledger,
                        )?;
                    }
                    GroupClass::Elephant => {
                        let key = packet_key(event.group, sender, group.seq);
                        let tree = &group.trees[match_tree(key, group.trees.len())];
                        deliver_elephant(&self.topo, tree, sender, bytes, &mut self.ledger)?;
                    }
                }
                self.sends += 1;
                self.payload_bytes += bytes;
                let promoted =
                    self.controller.record_traffic(&self.topo, event.group, bytes)?;
                Ok(promoted.unwrap_or_default())
            }
        }
    }

    /// Applies a whole stream in order.
    pub fn run(&mut self, events: &[Event]) -> Result<(), SimError> {
        for event in events {
            self.apply(event)?;
        }
        Ok(())
    }

    pub fn totals(&self) -> Totals {
        let mut mice = 0u64;
        let mut elephants = 0u64;
        for (_, g) in self.controller.groups() {
            match g.class {
                GroupClass::Mice => mice += 1,
                GroupClass::Elephant => elephants += 1,
            }
        }
        let switch_updates = self.controller.switch_states().iter().map(|s| s.updates).sum();
        let promotion_updates =
            self.controller.switch_states().iter().map(|s| s.promotion_updates).sum();
        let hypervisor_entries = self
            .controller
            .groups()
            .filter_map(|(a, _)| self.hypervisors.receivers(a))
            .map(|r| r.len() as u64)
            .sum();
        Totals {
            events: self.joins + self.leaves + self.sends,
            joins: self.joins,
            leaves: self.leaves,
            sends: self.sends,
            payload_bytes: self.payload_bytes,
            wire_bytes: self.ledger.total(),
            groups: mice + elephants,
            mice_groups: mice,
            elephant_groups: elephants,
            switch_rules: self.controller.total_rules() as u64,
            switch_updates,
            promotion_updates,
            hypervisor_entries,
        }
    }

    pub fn families(&self) -> FamilyTable {
        build_families(&self.topo, &self.controller, &self.ledger, self.clock)
    }

    pub fn observations(&self) -> Vec<Observation> {
        build_observations(&self.topo, &self.controller, &self.ledger, self.clock)
    }

    /// Snapshots the run. `config` is echoed verbatim so a report is
    /// self-describing.
    pub fn build_report(&self, config: serde_json::Value) -> Report {
        Report {
            schema: REPORT_SCHEMA,
            config,
            duration_secs: self.clock,
            totals: self.totals(),
            families: self.families(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::{Mode, RootSelection};
    use crate::topology::{HostId, LinkClass, NodeId};
    use crate::workload::{
        generate_synthetic, GroupAddress, Placement, WorkloadSpec, DEFAULT_PACKET_BYTES,
    };

    fn settings(mode: Mode, threshold: u64, trees: u32) -> SimSettings {
        SimSettings {
            control: ControlSettings {
                mode,
                threshold_bytes: threshold,
                num_trees: trees,
                root_selection: RootSelection::SeededRandom,
                seed: 0,
            },
            encap_overhead_bytes: 0,
        }
    }

    fn event(time: f64, group: GroupAddress, kind: EventKind) -> Event {
        Event { time, group, kind }
    }

    fn join(time: f64, group: GroupAddress, host: u32) -> Event {
        event(time, group, EventKind::Join { host: HostId(host) })
    }

    fn send(time: f64, group: GroupAddress, host: u32, bytes: u64) -> Event {
        event(time, group, EventKind::Send { sender: HostId(host), bytes })
    }

    #[test]
    fn crossing_packet_still_travels_as_unicast() {
        let topo = FatTreeTopology::build(4).unwrap();
        let mut sim = Simulation::new(topo, settings(Mode::Dusm, 1000, 4));
        let g = GroupAddress::nth(0);
        sim.run(&[join(0.0, g, 0), join(0.0, g, 4)]).unwrap();
        assert_eq!(sim.ledger().total(), 0);

        // 1500 bytes cross the 1000-byte threshold: delivered as one
        // unicast copy over 6 links, then the trees go in
        let delta = sim.apply(&send(1.0, g, 0, 1500)).unwrap();
        assert!(delta.installs > 0, "promotion installed trees");
        assert_eq!(sim.ledger().total(), 6 * 1500);
        assert_eq!(sim.controller().group(g).unwrap().class, GroupClass::Elephant);

        // the next packet rides a tree: same 6-link shape for one
        // cross-pod receiver
        sim.apply(&send(2.0, g, 0, 1500)).unwrap();
        assert_eq!(sim.ledger().total(), 2 * 6 * 1500);
        let delta = sim.apply(&send(3.0, g, 0, 1500)).unwrap();
        assert_eq!(delta, UpdateDelta::default(), "promotion happens once");
    }

    #[test]
    fn elephant_sends_rotate_over_the_tree_set() {
        let topo = FatTreeTopology::build(4).unwrap();
        let mut sim = Simulation::new(topo, settings(Mode::Dusm, 0, 4));
        let g = GroupAddress::nth(0);
        sim.run(&[join(0.0, g, 0), join(0.0, g, 4), join(0.0, g, 9)]).unwrap();
        sim.apply(&send(0.5, g, 0, 1)).unwrap();
        assert_eq!(sim.controller().group(g).unwrap().trees.len(), 4);
        for i in 0..24 {
            sim.apply(&send(1.0 + i as f64, g, 0, 1500)).unwrap();
        }
        let cores_hit: usize = sim
            .topology()
            .links()
            .iter()
            .filter(|l| {
                l.class == LinkClass::CA
                    && sim.ledger().bytes(l.id) > 0
                    && matches!(l.src, NodeId::Core { .. })
            })
            .map(|l| match l.src {
                NodeId::Core { index } => index as usize,
                _ => unreachable!(),
            })
            .collect::<std::collections::BTreeSet<_>>()
            .len();
        assert!(cores_hit >= 2, "24 sends spread over {cores_hit} cores");
        assert_eq!(sim.controller().group(g).unwrap().seq, 25);
    }

    #[test]
    fn clock_never_runs_backwards() {
        let topo = FatTreeTopology::build(4).unwrap();
        let mut sim = Simulation::new(topo, settings(Mode::Dusm, 100, 1));
        let g = GroupAddress::nth(0);
        sim.apply(&join(5.0, g, 0)).unwrap();
        let err = sim.apply(&join(3.0, g, 1)).unwrap_err();
        assert!(matches!(err, SimError::TimeReversed { .. }), "{err}");
    }

    #[test]
    fn sends_from_non_members_are_rejected() {
        let topo = FatTreeTopology::build(4).unwrap();
        let mut sim = Simulation::new(topo, settings(Mode::Dusm, 100, 1));
        let g = GroupAddress::nth(0);
        sim.apply(&join(0.0, g, 0)).unwrap();
        let err = sim.apply(&send(1.0, g, 7, 100)).unwrap_err();
        assert!(matches!(err, SimError::Control(ControlError::NotAMember { .. })), "{err}");
        let err = sim.apply(&send(1.0, GroupAddress::nth(5), 0, 100)).unwrap_err();
        assert!(matches!(err, SimError::Control(ControlError::UnknownGroup(_))), "{err}");
    }

    #[test]
    fn totals_reflect_the_stream() {
        let topo = FatTreeTopology::build(4).unwrap();
        let mut sim = Simulation::new(topo, settings(Mode::Dusm, 2000, 2));
        let g0 = GroupAddress::nth(0);
        let g1 = GroupAddress::nth(1);
        sim.run(&[
            join(0.0, g0, 0),
            join(0.0, g0, 1),
            join(0.0, g1, 8),
            join(0.0, g1, 12),
            send(1.0, g0, 0, 500),
            send(2.0, g1, 8, 5000),
            event(3.0, g0, EventKind::Leave { host: HostId(1) }),
        ])
        .unwrap();
        let totals = sim.totals();
        assert_eq!(totals.events, 7);
        assert_eq!(totals.joins, 4);
        assert_eq!(totals.leaves, 1);
        assert_eq!(totals.sends, 2);
        assert_eq!(totals.payload_bytes, 5500);
        assert_eq!(totals.groups, 2);
        assert_eq!(totals.mice_groups, 1, "g0 stayed below threshold");
        assert_eq!(totals.elephant_groups, 1, "g1 crossed it");
        assert!(totals.wire_bytes > 0);
        assert_eq!(totals.promotion_updates, totals.switch_updates);
        assert_eq!(totals.hypervisor_entries, 3);
        assert_eq!(sim.clock(), 3.0);
    }

    #[test]
    fn hypervisor_lists_mirror_controller_membership() {
        let topo = FatTreeTopology::build(4).unwrap();
        let spec = WorkloadSpec {
            num_groups: 10,
            total_bytes: 500_000,
            zipf_exponent: None,
            packet_bytes: DEFAULT_PACKET_BYTES,
            group_size: (2, 8),
            placement: Placement::Random,
            churn_rate: 6.0,
            seed: 3,
        };
        let events = generate_synthetic(&spec, &topo).unwrap();
        let mut sim = Simulation::new(topo, settings(Mode::Dusm, 20_000, 4));
        sim.run(&events).unwrap();
        for (addr, group) in sim.controller().groups() {
            let mirrored = sim.hypervisors().receivers(addr).expect("list exists");
            assert_eq!(*mirrored, group.members, "{addr}");
        }
    }

    #[test]
    fn identical_runs_serialize_identically() {
        let topo = || FatTreeTopology::build(4).unwrap();
        let spec = WorkloadSpec {
            num_groups: 6,
            total_bytes: 300_000,
            zipf_exponent: None,
            packet_bytes: DEFAULT_PACKET_BYTES,
            group_size: (2, 6),
            placement: Placement::Nearby,
            churn_rate: 3.0,
            seed: 9,
        };
        let render = || {
            let t = topo();
            let events = generate_synthetic(&spec, &t).unwrap();
            let mut sim = Simulation::new(t, settings(Mode::Dusm, 10_240, 2));
            sim.run(&events).unwrap();
            let report = sim.build_report(serde_json::json!({"seed": 9}));
            serde_json::to_string_pretty(&report).unwrap()
        };
        let a = render();
        assert_eq!(a, render());
        assert!(a.contains(REPORT_SCHEMA));
    }

    #[test]
    fn baseline_mode_delivers_everything_on_trees() {
        let topo = FatTreeTopology::build(4).unwrap();
        let mut sim = Simulation::new(topo, settings(Mode::Pim, u64::MAX, 4));
        let g = GroupAddress::nth(0);
        sim.run(&[join(0.0, g, 0), join(0.0, g, 4), send(1.0, g, 0, 100)]).unwrap();
        let totals = sim.totals();
        assert_eq!(totals.elephant_groups, 1, "baseline has no mice");
        assert_eq!(totals.switch_rules, 5, "2 host paths from the rendezvous core");
        assert_eq!(totals.promotion_updates, 0);
        // one tree only, regardless of the configured tree count
        assert_eq!(sim.controller().group(g).unwrap().trees.len(), 1);
    }
}
