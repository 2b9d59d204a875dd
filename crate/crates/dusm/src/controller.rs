//! The multicast control plane.
//!
//! Groups are classified by cumulative traffic against a byte threshold.
//! Small ("mice") groups get no switch state at all: their packets are
//! translated to unicast at the sending hypervisor, so joins and leaves
//! only touch host-side receiver lists. Groups whose cumulative volume
//! crosses the threshold are promoted to "elephants" and routed over
//! several shared trees with distinct roots; each packet picks one tree
//! by hash, spreading a group's load across the root set.
//!
//! Promotion is one way. Demoting an elephant would tear down installed
//! trees only to rebuild them on the next burst, so cumulative counters
//! never reset.
//!
//! Tree roots widen with the member set: one edge switch while all
//! members share it, an in-pod aggregate while they share a pod, and
//! `num_trees` distinct cores once the group spans pods. A join outside
//! the current roots' reach reselects roots; leaves never re-root.
//!
//! The single-tree baseline (`Mode::Pim`) routes every group over one
//! shared tree rooted at an address-hashed core, mirroring a PIM-SM
//! rendezvous point, and pays a switch update for every membership
//! change.
//!
//! Switch state is modeled per switch as one multicast rule per
//! (group, tree): the set of output links. Every install, port-set
//! change, or removal of a rule counts as one update message to that
//! switch, which is the churn the reports aggregate.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::hash::stable_hash;
use crate::topology::{FatTreeTopology, HostId, LinkId, NodeId};
use crate::workload::GroupAddress;

/// Routing mode of the controller.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Threshold classification; unicast translation for mice, multiple
    /// shared trees for elephants.
    Dusm,
    /// One shared tree per group rooted at an address-hashed core,
    /// regardless of traffic volume.
    Pim,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Dusm => "dusm",
            Mode::Pim => "pim",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How elephant tree roots are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RootSelection {
    /// Roots drawn uniformly (without replacement among cores) from a
    /// stream seeded by group address and run seed.
    SeededRandom,
    /// Roots derived arithmetically from the address hash: cross-pod
    /// roots are consecutive cores from `hash mod num_cores`, the in-pod
    /// aggregate is `hash mod (k/2)`. With one tree this picks the same
    /// core a single-tree baseline would, which makes the two modes
    /// directly comparable.
    AddressHash,
}

/// Traffic class of a group.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupClass {
    Mice,
    Elephant,
}

impl GroupClass {
    pub fn name(self) -> &'static str {
        match self {
            GroupClass::Mice => "mice",
            GroupClass::Elephant => "elephant",
        }
    }
}

/// A shared distribution tree: the union of the unique downward paths
/// from `root` to every member, stored as per-switch sets of child links.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SteinerTree {
    pub root: NodeId,
    /// Output links per switch. Only switches with children appear.
    pub rules: BTreeMap<NodeId, BTreeSet<LinkId>>,
}

impl SteinerTree {
    /// All downward links of the tree.
    pub fn link_ids(&self) -> BTreeSet<LinkId> {
        self.rules.values().flatten().copied().collect()
    }

    pub fn num_links(&self) -> usize {
        self.rules.values().map(|ports| ports.len()).sum()
    }

    pub fn num_ruled_switches(&self) -> usize {
        self.rules.len()
    }
}

/// One multicast group as the controller sees it.
#[derive(Clone, Debug)]
pub struct MulticastGroup {
    pub members: BTreeSet<HostId>,
    pub cumulative_bytes: u64,
    pub class: GroupClass,
    /// Installed trees; empty for mice. Packets index this by hash.
    pub trees: Vec<SteinerTree>,
    /// Sends observed so far; used as the per-group packet sequence.
    pub seq: u64,
}

/// Rule state and update counters of one switch.
#[derive(Clone, Debug, Default)]
pub struct SwitchState {
    /// Multicast rules keyed by (group, tree): the set of output links.
    pub rules: BTreeMap<(GroupAddress, u16), BTreeSet<LinkId>>,
    /// Rule messages this switch has received: installs, port-set
    /// changes, and removals all count one.
    pub updates: u64,
    /// The subset of `updates` caused by mice-to-elephant promotions.
    pub promotion_updates: u64,
}

impl SwitchState {
    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }
}

/// Rule messages one operation sent to switches.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UpdateDelta {
    pub installs: u64,
    pub modifies: u64,
    pub removals: u64,
}

impl UpdateDelta {
    pub fn total(&self) -> u64 {
        self.installs + self.modifies + self.removals
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ControlSettings {
    pub mode: Mode,
    /// Cumulative bytes strictly above which a group becomes an elephant.
    pub threshold_bytes: u64,
    /// Trees per cross-pod elephant group, capped at the core count.
    pub num_trees: u32,
    pub root_selection: RootSelection,
    pub seed: u64,
}

/// Current multicast rule count per switch, in the topology's dense
/// switch-index order. One rule is one (group, tree) table entry.
pub fn count_multicast_rules(switches: &[SwitchState]) -> Vec<usize> {
    switches.iter().map(|s| s.rule_count()).collect()
}

#[derive(Error, Debug, PartialEq, Eq)]
pub enum ControlError {
    #[error("{0} is not a host in this tree")]
    BadHost(HostId),
    #[error("{host} is already a member of {group}")]
    AlreadyMember { group: GroupAddress, host: HostId },
    #[error("{host} is not a member of {group}")]
    NotAMember { group: GroupAddress, host: HostId },
    #[error("group {0} has never been joined")]
    UnknownGroup(GroupAddress),
}

/// Builds the tree rooted at `root` covering `members`: the union of the
/// unique downward paths. `root` must reach every member (cores reach all
/// hosts, aggregates their pod, edges their own hosts).
pub fn compute_steiner_tree(
    topo: &FatTreeTopology,
    root: NodeId,
    members: &BTreeSet<HostId>,
) -> SteinerTree {
    let mut rules: BTreeMap<NodeId, BTreeSet<LinkId>> = BTreeMap::new();
    for &m in members {
        let host = topo.host(m).expect("member ordinal in range");
        let path = topo.downward_path(root, host).expect("root reaches member");
        for link in path {
            rules.entry(link.src).or_default().insert(link.id);
        }
    }
    SteinerTree { root, rules }
}

/// The single-tree baseline: one shared tree per group, rooted at the
/// core `stable_hash(addr) mod num_cores` acting as rendezvous point.
pub fn pim_baseline_tree(
    topo: &FatTreeTopology,
    addr: GroupAddress,
    members: &BTreeSet<HostId>,
) -> SteinerTree {
    let core = (stable_hash(&[addr.0 as u64]) % topo.num_cores() as u64) as u16;
    compute_steiner_tree(topo, NodeId::Core { index: core }, members)
}

/// Distinct pods and edge switches the members touch.
fn member_spread(
    topo: &FatTreeTopology,
    members: &BTreeSet<HostId>,
) -> (BTreeSet<u16>, BTreeSet<NodeId>) {
    let mut pods = BTreeSet::new();
    let mut edges = BTreeSet::new();
    for &m in members {
        let host = topo.host(m).expect("member ordinal in range");
        pods.insert(host.pod().expect("hosts live in pods"));
        edges.insert(topo.edge_of_host(host).expect("hosts hang off edges"));
    }
    (pods, edges)
}

/// Picks tree roots for an elephant group at the narrowest scope that
/// reaches all members: the shared edge switch, an in-pod aggregate, or
/// `num_trees` distinct cores once members span pods.
pub fn select_roots(
    topo: &FatTreeTopology,
    addr: GroupAddress,
    members: &BTreeSet<HostId>,
    num_trees: u32,
    selection: RootSelection,
    seed: u64,
) -> Vec<NodeId> {
    if members.is_empty() {
        return Vec::new();
    }
    let (pods, edges) = member_spread(topo, members);
    let half = topo.k() as u64 / 2;
    if edges.len() == 1 {
        return vec![*edges.first().expect("one edge")];
    }
    if pods.len() == 1 {
        let pod = *pods.first().expect("one pod");
        let index = match selection {
            RootSelection::SeededRandom => {
                let mut rng =
                    ChaCha12Rng::seed_from_u64(stable_hash(&[addr.0 as u64, seed]));
                rng.gen_range(0..half) as u16
            }
            RootSelection::AddressHash => (stable_hash(&[addr.0 as u64]) % half) as u16,
        };
        return vec![NodeId::Aggregate { pod, index }];
    }
    let num_cores = topo.num_cores() as u64;
    let t = (num_trees.max(1) as u64).min(num_cores) as usize;
    match selection {
        RootSelection::SeededRandom => {
            let mut rng = ChaCha12Rng::seed_from_u64(stable_hash(&[addr.0 as u64, seed]));
            let mut picks: Vec<u16> = rand::seq::index::sample(&mut rng, num_cores as usize, t)
                .into_iter()
                .map(|c| c as u16)
                .collect();
            picks.sort_unstable();
            picks.into_iter().map(|index| NodeId::Core { index }).collect()
        }
        RootSelection::AddressHash => {
            let base = stable_hash(&[addr.0 as u64]) % num_cores;
            (0..t as u64)
                .map(|i| NodeId::Core { index: ((base + i) % num_cores) as u16 })
                .collect()
        }
    }
}

/// True when every member is reachable downward from every root.
fn roots_cover(topo: &FatTreeTopology, roots: &[NodeId], members: &BTreeSet<HostId>) -> bool {
    if roots.is_empty() {
        return members.is_empty();
    }
    let (pods, edges) = member_spread(topo, members);
    roots.iter().all(|root| match *root {
        NodeId::Core { .. } => true,
        NodeId::Aggregate { pod, .. } => pods.iter().all(|&p| p == pod),
        NodeId::Edge { .. } => edges.iter().all(|e| *e == *root),
        NodeId::Host { .. } => false,
    })
}

/// The SDN multicast controller: group registry plus mirrored per-switch
/// rule state with update accounting.
#[derive(Clone, Debug)]
pub struct Controller {
    settings: ControlSettings,
    groups: BTreeMap<GroupAddress, MulticastGroup>,
    switches: Vec<SwitchState>,
}

impl Controller {
    pub fn new(topo: &FatTreeTopology, settings: ControlSettings) -> Controller {
        Controller {
            settings,
            groups: BTreeMap::new(),
            switches: vec![SwitchState::default(); topo.num_switches()],
        }
    }

    pub fn settings(&self) -> &ControlSettings {
        &self.settings
    }

    pub fn group(&self, addr: GroupAddress) -> Option<&MulticastGroup> {
        self.groups.get(&addr)
    }

    pub fn groups(&self) -> impl Iterator<Item = (GroupAddress, &MulticastGroup)> {
        self.groups.iter().map(|(&a, g)| (a, g))
    }

    /// Switch states indexed by the topology's dense switch index.
    pub fn switch_states(&self) -> &[SwitchState] {
        &self.switches
    }

    /// Total multicast rules installed across all switches.
    pub fn total_rules(&self) -> usize {
        self.switches.iter().map(|s| s.rule_count()).sum()
    }

    fn check_host(&self, topo: &FatTreeTopology, host: HostId) -> Result<(), ControlError> {
        if (host.0 as usize) < topo.num_hosts() {
            Ok(())
        } else {
            Err(ControlError::BadHost(host))
        }
    }

    /// Adds `host` to `group`, creating the group on first join. Mice
    /// groups change no switch state; elephant and baseline groups get
    /// their trees recomputed and diffed.
    pub fn handle_join(
        &mut self,
        topo: &FatTreeTopology,
        group: GroupAddress,
        host: HostId,
    ) -> Result<UpdateDelta, ControlError> {
        self.check_host(topo, host)?;
        let mode = self.settings.mode;
        let entry = self.groups.entry(group).or_insert_with(|| MulticastGroup {
            members: BTreeSet::new(),
            cumulative_bytes: 0,
            class: match mode {
                Mode::Dusm => GroupClass::Mice,
                Mode::Pim => GroupClass::Elephant,
            },
            trees: Vec::new(),
            seq: 0,
        });
        if !entry.members.insert(host) {
            return Err(ControlError::AlreadyMember { group, host });
        }
        if entry.class == GroupClass::Mice {
            return Ok(UpdateDelta::default());
        }
        self.reroute(topo, group, true, false)
    }

    /// Removes `host` from `group`. Tree roots are kept: shrinking a
    /// member set never invalidates downward reachability.
    pub fn handle_leave(
        &mut self,
        topo: &FatTreeTopology,
        group: GroupAddress,
        host: HostId,
    ) -> Result<UpdateDelta, ControlError> {
        self.check_host(topo, host)?;
        let entry = self
            .groups
            .get_mut(&group)
            .ok_or(ControlError::UnknownGroup(group))?;
        if !entry.members.remove(&host) {
            return Err(ControlError::NotAMember { group, host });
        }
        if entry.class == GroupClass::Mice {
            return Ok(UpdateDelta::default());
        }
        self.reroute(topo, group, false, false)
    }

    /// Accounts `bytes` of traffic to `group` and bumps its sequence.
    /// Returns the rule delta when this send promotes the group. Callers
    /// deliver the packet before recording it, so the packet that crosses
    /// the threshold still travels as mice traffic.
    pub fn record_traffic(
        &mut self,
        topo: &FatTreeTopology,
        group: GroupAddress,
        bytes: u64,
    ) -> Result<Option<UpdateDelta>, ControlError> {
        let entry = self
            .groups
            .get_mut(&group)
            .ok_or(ControlError::UnknownGroup(group))?;
        entry.seq += 1;
        entry.cumulative_bytes += bytes;
        let promote = self.settings.mode == Mode::Dusm
            && entry.class == GroupClass::Mice
            && entry.cumulative_bytes > self.settings.threshold_bytes;
        if !promote {
            return Ok(None);
        }
        Ok(Some(self.promote_group(topo, group)?))
    }

    /// Reclassifies `group` as an elephant and installs its shared trees,
    /// counting the installs as promotion updates. `record_traffic` calls
    /// this when cumulative bytes cross the threshold.
    pub fn promote_group(
        &mut self,
        topo: &FatTreeTopology,
        group: GroupAddress,
    ) -> Result<UpdateDelta, ControlError> {
        let entry = self
            .groups
            .get_mut(&group)
            .ok_or(ControlError::UnknownGroup(group))?;
        entry.class = GroupClass::Elephant;
        self.reroute(topo, group, true, true)
    }

    /// Recomputes the group's trees and applies the rule diff. `grow` is
    /// set for joins and promotions; only then may roots be reselected.
    fn reroute(
        &mut self,
        topo: &FatTreeTopology,
        group: GroupAddress,
        grow: bool,
        promotion: bool,
    ) -> Result<UpdateDelta, ControlError> {
        let entry = self.groups.get_mut(&group).expect("caller checked the group");
        let old_roots: Vec<NodeId> = entry.trees.iter().map(|t| t.root).collect();
        let roots = match self.settings.mode {
            Mode::Pim => {
                if old_roots.is_empty() {
                    let core =
                        (stable_hash(&[group.0 as u64]) % topo.num_cores() as u64) as u16;
                    vec![NodeId::Core { index: core }]
                } else {
                    old_roots
                }
            }
            Mode::Dusm => {
                if grow && !roots_cover(topo, &old_roots, &entry.members) {
                    select_roots(
                        topo,
                        group,
                        &entry.members,
                        self.settings.num_trees,
                        self.settings.root_selection,
                        self.settings.seed,
                    )
                } else {
                    old_roots
                }
            }
        };
        let new_trees: Vec<SteinerTree> = roots
            .iter()
            .map(|&root| compute_steiner_tree(topo, root, &entry.members))
            .collect();
        let old_trees = std::mem::replace(&mut entry.trees, new_trees);
        let new_trees = entry.trees.clone();
        Ok(self.apply_diff(topo, group, &old_trees, &new_trees, promotion))
    }

    /// Diffs per-switch rules between tree sets and mirrors the result
    /// into switch state. One update per (switch, tree) whose port set
    /// appears, changes, or disappears.
    fn apply_diff(
        &mut self,
        topo: &FatTreeTopology,
        group: GroupAddress,
        old: &[SteinerTree],
        new: &[SteinerTree],
        promotion: bool,
    ) -> UpdateDelta {
        let empty = BTreeMap::new();
        let mut delta = UpdateDelta::default();
        for tree_id in 0..old.len().max(new.len()) {
            let old_rules = old.get(tree_id).map_or(&empty, |t| &t.rules);
            let new_rules = new.get(tree_id).map_or(&empty, |t| &t.rules);
            let switches: BTreeSet<NodeId> =
                old_rules.keys().chain(new_rules.keys()).copied().collect();
            for switch in switches {
                let before = old_rules.get(&switch);
                let after = new_rules.get(&switch);
                if before == after {
                    continue;
                }
                let state = &mut self.switches[topo.node_index(switch)];
                let key = (group, tree_id as u16);
                match after {
                    Some(ports) => {
                        if before.is_none() {
                            delta.installs += 1;
                        } else {
                            delta.modifies += 1;
                        }
                        state.rules.insert(key, ports.clone());
                    }
                    None => {
                        delta.removals += 1;
                        state.rules.remove(&key);
                    }
                }
                state.updates += 1;
                if promotion {
                    state.promotion_updates += 1;
                }
            }
        }
        delta
    }
}
