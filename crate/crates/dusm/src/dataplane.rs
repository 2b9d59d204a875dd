//! Packet delivery and per-link byte accounting.
//!
//! Elephant packets travel a shared tree bidirectionally: up the reverse
//! of the root-to-sender path, then down every tree branch except the one
//! leading back to the sender. Each packet picks its tree by hashing the
//! (group, sender, sequence) triple, so a group's flows spread over its
//! root set while any single flow stays on one tree.
//!
//! Mice packets never touch multicast rules: the sending hypervisor
//! translates them into one ECMP unicast copy per receiver, optionally
//! padded with an encapsulation header. Receiver lists live in
//! `HypervisorState` and mirror controller membership.

use std::collections::{BTreeMap, BTreeSet};

use crate::controller::SteinerTree;
use crate::hash::stable_hash;
use crate::topology::{FatTreeTopology, HostId, LinkClass, LinkId, TopologyError};
use crate::workload::GroupAddress;

/// Bytes carried per directed link.
#[derive(Clone, Debug)]
pub struct LinkLedger {
    bytes: Vec<u64>,
}

impl LinkLedger {
    pub fn new(topo: &FatTreeTopology) -> LinkLedger {
        LinkLedger { bytes: vec![0; topo.links().len()] }
    }

    pub fn charge(&mut self, link: LinkId, bytes: u64) {
        self.bytes[link as usize] += bytes;
    }

    pub fn bytes(&self, link: LinkId) -> u64 {
        self.bytes[link as usize]
    }

    pub fn total(&self) -> u64 {
        self.bytes.iter().sum()
    }

    /// Byte counts of every link in `class`, in link id order.
    pub fn class_bytes(&self, topo: &FatTreeTopology, class: LinkClass) -> Vec<u64> {
        topo.links()
            .iter()
            .filter(|l| l.class == class)
            .map(|l| self.bytes[l.id as usize])
            .collect()
    }
}

/// Per-group receiver lists kept by the sending hypervisors. Updated on
/// the same control events as the controller, so translation targets are
/// always current.
#[derive(Clone, Debug, Default)]
pub struct HypervisorState {
    receivers: BTreeMap<GroupAddress, BTreeSet<HostId>>,
}

impl HypervisorState {
    pub fn join(&mut self, group: GroupAddress, host: HostId) {
        self.receivers.entry(group).or_default().insert(host);
    }

    pub fn leave(&mut self, group: GroupAddress, host: HostId) {
        if let Some(set) = self.receivers.get_mut(&group) {
            set.remove(&host);
        }
    }

    pub fn receivers(&self, group: GroupAddress) -> Option<&BTreeSet<HostId>> {
        self.receivers.get(&group)
    }
}

/// Identity of one packet, used to pin it to a tree.
pub fn packet_key(group: GroupAddress, sender: HostId, seq: u64) -> u64 {
    stable_hash(&[group.0 as u64, sender.0 as u64, seq])
}

/// Which of the group's trees carries the packet with `key`.
pub fn match_tree(key: u64, num_trees: usize) -> usize {
    (stable_hash(&[key]) % num_trees as u64) as usize
}

/// Charges one elephant packet of `bytes` onto `tree`: the upward spine
/// from the sender to the root, plus every downward tree link off the
/// root-to-sender path. Each link is charged exactly once. Returns the
/// hosts the packet reached, which is every member except the sender.
pub fn deliver_elephant(
    topo: &FatTreeTopology,
    tree: &SteinerTree,
    sender: HostId,
    bytes: u64,
    ledger: &mut LinkLedger,
) -> Result<BTreeSet<HostId>, TopologyError> {
    let host = topo.host(sender).ok_or(TopologyError::UnknownHost(sender))?;
    let spine = topo.downward_path(tree.root, host)?;
    for link in &spine {
        let up = topo
            .link_between(link.dst, link.src)
            .expect("every wired link has a reverse");
        ledger.charge(up.id, bytes);
    }
    let on_spine: BTreeSet<LinkId> = spine.iter().map(|l| l.id).collect();
    let mut received = BTreeSet::new();
    for link in tree.link_ids() {
        if on_spine.contains(&link) {
            continue;
        }
        ledger.charge(link, bytes);
        let dst = topo.link(link).dst;
        if dst.is_host() {
            received.insert(topo.host_id(dst).expect("link ends at a host"));
        }
    }
    Ok(received)
}

/// Charges one mice packet: an ECMP unicast copy of `bytes` plus
/// `encap_overhead` to every receiver except the sender itself. Returns
/// the hosts that got a copy.
pub fn deliver_mice(
    topo: &FatTreeTopology,
    receivers: &BTreeSet<HostId>,
    sender: HostId,
    bytes: u64,
    encap_overhead: u64,
    ecmp_seed: u64,
    ledger: &mut LinkLedger,
) -> Result<BTreeSet<HostId>, TopologyError> {
    let src = topo.host(sender).ok_or(TopologyError::UnknownHost(sender))?;
    let wire = bytes + encap_overhead;
    let mut received = BTreeSet::new();
    for &r in receivers {
        if r == sender {
            continue;
        }
        let dst = topo.host(r).expect("receiver list is membership-validated");
        for link in topo.ecmp_unicast_path(src, dst, ecmp_seed)? {
            ledger.charge(link.id, wire);
        }
        received.insert(r);
    }
    Ok(received)
}
