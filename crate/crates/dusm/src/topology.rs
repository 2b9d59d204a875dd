//! The k-ary fat tree: three switch layers (edge, aggregate, core) plus
//! hosts, with every directed link classified by its endpoint layers.
//!
//! For even `k`, the tree has `k` pods, `(k/2)^2` core switches, `k*(k/2)`
//! edge switches, `k*(k/2)` aggregate switches, and `k*(k/2)^2` hosts. Each
//! edge switch connects `k/2` hosts and all `k/2` aggregates of its pod;
//! aggregate `a` of every pod connects the `k/2` cores whose index is
//! congruent to `a` modulo `k/2`. That wiring gives the property the rest
//! of the simulator leans on: from any core there is exactly one downward
//! path to every host.
//!
//! The topology is immutable after construction; node and link ids are
//! dense integers assigned in a fixed order (cores first, then edges,
//! aggregates, and hosts in pod-major order), so enumeration order and all
//! derived reports are stable across runs.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::hash::stable_hash;

/// Switch layer of a node (hosts are not a layer).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Layer {
    Edge,
    Aggregate,
    Core,
}

impl Layer {
    pub const ALL: [Layer; 3] = [Layer::Edge, Layer::Aggregate, Layer::Core];

    pub fn name(self) -> &'static str {
        match self {
            Layer::Edge => "edge",
            Layer::Aggregate => "aggregate",
            Layer::Core => "core",
        }
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A node in the tree. `pod` and `index` follow the conventions in the
/// module docs; cores carry only a grid index in `0..(k/2)^2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeId {
    Core { index: u16 },
    Edge { pod: u16, index: u16 },
    Aggregate { pod: u16, index: u16 },
    Host { pod: u16, index: u16 },
}

impl NodeId {
    pub fn is_host(self) -> bool {
        matches!(self, NodeId::Host { .. })
    }

    pub fn is_switch(self) -> bool {
        !self.is_host()
    }

    /// Switch layer, `None` for hosts.
    pub fn layer(self) -> Option<Layer> {
        match self {
            NodeId::Core { .. } => Some(Layer::Core),
            NodeId::Aggregate { .. } => Some(Layer::Aggregate),
            NodeId::Edge { .. } => Some(Layer::Edge),
            NodeId::Host { .. } => None,
        }
    }

    /// Pod index for pod-local nodes, `None` for cores.
    pub fn pod(self) -> Option<u16> {
        match self {
            NodeId::Core { .. } => None,
            NodeId::Edge { pod, .. }
            | NodeId::Aggregate { pod, .. }
            | NodeId::Host { pod, .. } => Some(pod),
        }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Core { index } => write!(f, "core{index}"),
            NodeId::Edge { pod, index } => write!(f, "edge{pod}_{index}"),
            NodeId::Aggregate { pod, index } => write!(f, "aggr{pod}_{index}"),
            NodeId::Host { pod, index } => write!(f, "host{pod}_{index}"),
        }
    }
}

/// A host named by its pod-major ordinal: host `h` of pod `p` is
/// `p * (k/2)^2 + h`. This is the id trace files use (`h12`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HostId(pub u32);

impl fmt::Display for HostId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "h{}", self.0)
    }
}

/// Directed link class by endpoint layers. Upward classes (HE, EA, AC)
/// carry one copy per multicast send; downward classes (CA, AE, EH) carry
/// the replicated copies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LinkClass {
    HE,
    EH,
    EA,
    AE,
    AC,
    CA,
}

impl LinkClass {
    pub const ALL: [LinkClass; 6] = [
        LinkClass::EA,
        LinkClass::AC,
        LinkClass::CA,
        LinkClass::AE,
        LinkClass::HE,
        LinkClass::EH,
    ];

    /// The class is a pure function of the endpoint kinds.
    pub fn of(src: NodeId, dst: NodeId) -> Option<LinkClass> {
        match (src, dst) {
            (NodeId::Host { .. }, NodeId::Edge { .. }) => Some(LinkClass::HE),
            (NodeId::Edge { .. }, NodeId::Host { .. }) => Some(LinkClass::EH),
            (NodeId::Edge { .. }, NodeId::Aggregate { .. }) => Some(LinkClass::EA),
            (NodeId::Aggregate { .. }, NodeId::Edge { .. }) => Some(LinkClass::AE),
            (NodeId::Aggregate { .. }, NodeId::Core { .. }) => Some(LinkClass::AC),
            (NodeId::Core { .. }, NodeId::Aggregate { .. }) => Some(LinkClass::CA),
            _ => None,
        }
    }

    pub fn is_downward(self) -> bool {
        matches!(self, LinkClass::CA | LinkClass::AE | LinkClass::EH)
    }

    pub fn name(self) -> &'static str {
        match self {
            LinkClass::HE => "HE",
            LinkClass::EH => "EH",
            LinkClass::EA => "EA",
            LinkClass::AE => "AE",
            LinkClass::AC => "AC",
            LinkClass::CA => "CA",
        }
    }
}

impl fmt::Display for LinkClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Dense id of a directed link.
pub type LinkId = u32;

/// One directed link. Every physical adjacency yields two of these.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Link {
    pub id: LinkId,
    pub src: NodeId,
    pub dst: NodeId,
    pub class: LinkClass,
}

#[derive(Error, Debug, PartialEq, Eq)]
pub enum TopologyError {
    #[error("k must be even and in 4..=64, got {0}")]
    InvalidK(u32),
    #[error("{0} is not a host")]
    NotAHost(NodeId),
    #[error("{0} is not a host ordinal in this tree")]
    UnknownHost(HostId),
    #[error("{0} cannot root a downward path")]
    NotADownwardRoot(NodeId),
    #[error("no downward route from {root} to {host}")]
    Unreachable { root: NodeId, host: NodeId },
    #[error("unicast endpoints must differ, both are {0}")]
    SameHost(NodeId),
}

/// Free-function form of [`FatTreeTopology::build`].
pub fn build_fat_tree(k: u32) -> Result<FatTreeTopology, TopologyError> {
    FatTreeTopology::build(k)
}

/// Immutable k-ary fat tree with dense node and link ids.
#[derive(Debug)]
pub struct FatTreeTopology {
    k: u32,
    nodes: Vec<NodeId>,
    links: Vec<Link>,
    /// Outgoing link ids per node, in the fixed neighbor order.
    adjacency: Vec<Vec<LinkId>>,
    link_index: HashMap<(u32, u32), LinkId>,
}

impl FatTreeTopology {
    /// Builds the `k`-ary tree. `k` must be even and within `4..=64`.
    pub fn build(k: u32) -> Result<Self, TopologyError> {
        if !k.is_multiple_of(2) || !(4..=64).contains(&k) {
            return Err(TopologyError::InvalidK(k));
        }
        let half = k / 2;

        let mut nodes = Vec::new();
        for index in 0..half * half {
            nodes.push(NodeId::Core { index: index as u16 });
        }
        for pod in 0..k {
            for index in 0..half {
                nodes.push(NodeId::Edge { pod: pod as u16, index: index as u16 });
            }
        }
        for pod in 0..k {
            for index in 0..half {
                nodes.push(NodeId::Aggregate { pod: pod as u16, index: index as u16 });
            }
        }
        for pod in 0..k {
            for index in 0..half * half {
                nodes.push(NodeId::Host { pod: pod as u16, index: index as u16 });
            }
        }

        let mut topo = FatTreeTopology {
            k,
            nodes,
            links: Vec::new(),
            adjacency: Vec::new(),
            link_index: HashMap::new(),
        };

        let neighbor_lists: Vec<Vec<NodeId>> =
            topo.nodes.iter().map(|&n| topo.wired_neighbors(n)).collect();
        for (src_idx, neighbors) in neighbor_lists.iter().enumerate() {
            let src = topo.nodes[src_idx];
            let mut out = Vec::with_capacity(neighbors.len());
            for &dst in neighbors {
                let id = topo.links.len() as LinkId;
                let class = LinkClass::of(src, dst).expect("wired pair spans adjacent layers");
                topo.links.push(Link { id, src, dst, class });
                topo.link_index
                    .insert((src_idx as u32, topo.node_index(dst) as u32), id);
                out.push(id);
            }
            topo.adjacency.push(out);
        }
        Ok(topo)
    }

    /// Fixed wiring convention; also the adjacency order.
    fn wired_neighbors(&self, node: NodeId) -> Vec<NodeId> {
        let half = (self.k / 2) as u16;
        match node {
            NodeId::Host { pod, index } => {
                vec![NodeId::Edge { pod, index: index / half }]
            }
            NodeId::Edge { pod, index } => {
                let mut v: Vec<NodeId> = (0..half)
                    .map(|h| NodeId::Host { pod, index: index * half + h })
                    .collect();
                v.extend((0..half).map(|a| NodeId::Aggregate { pod, index: a }));
                v
            }
            NodeId::Aggregate { pod, index } => {
                let mut v: Vec<NodeId> =
                    (0..half).map(|e| NodeId::Edge { pod, index: e }).collect();
                v.extend((0..half).map(|j| NodeId::Core { index: j * half + index }));
                v
            }
            NodeId::Core { index } => (0..self.k as u16)
                .map(|pod| NodeId::Aggregate { pod, index: index % half })
                .collect(),
        }
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    fn half(&self) -> u32 {
        self.k / 2
    }

    pub fn num_pods(&self) -> usize {
        self.k as usize
    }

    pub fn num_cores(&self) -> usize {
        (self.half() * self.half()) as usize
    }

    pub fn num_edges(&self) -> usize {
        (self.k * self.half()) as usize
    }

    pub fn num_aggregates(&self) -> usize {
        (self.k * self.half()) as usize
    }

    pub fn num_hosts(&self) -> usize {
        (self.k * self.half() * self.half()) as usize
    }

    pub fn num_switches(&self) -> usize {
        self.num_cores() + self.num_edges() + self.num_aggregates()
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, id: LinkId) -> Link {
        self.links[id as usize]
    }

    /// Dense index of a node. Cores come first, then edges, aggregates, and
    /// hosts in pod-major order; switches therefore occupy
    /// `0..num_switches()`.
    pub fn node_index(&self, node: NodeId) -> usize {
        let half = self.half() as usize;
        let k = self.k as usize;
        match node {
            NodeId::Core { index } => index as usize,
            NodeId::Edge { pod, index } => half * half + pod as usize * half + index as usize,
            NodeId::Aggregate { pod, index } => {
                half * half + k * half + pod as usize * half + index as usize
            }
            NodeId::Host { pod, index } => {
                self.num_switches() + pod as usize * half * half + index as usize
            }
        }
    }

    pub fn node_at(&self, index: usize) -> NodeId {
        self.nodes[index]
    }

    /// Layer of the switch at dense index `idx`, `None` for hosts.
    pub fn switch_layer(&self, idx: usize) -> Option<Layer> {
        self.nodes.get(idx).and_then(|n| n.layer())
    }

    /// Neighbors of `node` in the fixed adjacency order.
    pub fn neighbors(&self, node: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adjacency[self.node_index(node)]
            .iter()
            .map(move |&id| self.links[id as usize].dst)
    }

    pub fn link_between(&self, src: NodeId, dst: NodeId) -> Option<Link> {
        let key = (self.node_index(src) as u32, self.node_index(dst) as u32);
        self.link_index.get(&key).map(|&id| self.links[id as usize])
    }

    /// Pod-major host ordinal for `host`.
    pub fn host_id(&self, host: NodeId) -> Result<HostId, TopologyError> {
        match host {
            NodeId::Host { pod, index } => {
                Ok(HostId(pod as u32 * self.half() * self.half() + index as u32))
            }
            other => Err(TopologyError::NotAHost(other)),
        }
    }

    /// Host node for a pod-major ordinal, `None` when out of range.
    pub fn host(&self, id: HostId) -> Option<NodeId> {
        let per_pod = self.half() * self.half();
        if (id.0 as usize) < self.num_hosts() {
            Some(NodeId::Host { pod: (id.0 / per_pod) as u16, index: (id.0 % per_pod) as u16 })
        } else {
            None
        }
    }

    pub fn hosts(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes[self.num_switches()..].iter().copied()
    }

    /// The edge switch a host hangs off.
    pub fn edge_of_host(&self, host: NodeId) -> Result<NodeId, TopologyError> {
        match host {
            NodeId::Host { pod, index } => {
                Ok(NodeId::Edge { pod, index: index / self.half() as u16 })
            }
            other => Err(TopologyError::NotAHost(other)),
        }
    }

    /// The aggregate switch that connects `core` into `pod`.
    pub fn aggregate_for_core(&self, pod: u16, core: NodeId) -> Option<NodeId> {
        match core {
            NodeId::Core { index } => {
                Some(NodeId::Aggregate { pod, index: index % self.half() as u16 })
            }
            _ => None,
        }
    }

    /// The unique strictly-descending path from `root` to `host`: three
    /// links from a core, two from an aggregate, one from the host's own
    /// edge switch. Errors when the host is not in the root's subtree.
    pub fn downward_path(&self, root: NodeId, host: NodeId) -> Result<Vec<Link>, TopologyError> {
        let (pod, index) = match host {
            NodeId::Host { pod, index } => (pod, index),
            other => return Err(TopologyError::NotAHost(other)),
        };
        let edge = NodeId::Edge { pod, index: index / self.half() as u16 };
        let unreachable = || TopologyError::Unreachable { root, host };

        let hops: Vec<NodeId> = match root {
            NodeId::Core { .. } => {
                let aggr = self.aggregate_for_core(pod, root).expect("root is a core");
                vec![root, aggr, edge, host]
            }
            NodeId::Aggregate { pod: p, .. } => {
                if p != pod {
                    return Err(unreachable());
                }
                vec![root, edge, host]
            }
            NodeId::Edge { .. } => {
                if root != edge {
                    return Err(unreachable());
                }
                vec![root, host]
            }
            NodeId::Host { .. } => return Err(TopologyError::NotADownwardRoot(root)),
        };
        Ok(hops
            .windows(2)
            .map(|w| self.link_between(w[0], w[1]).expect("descending hop is wired"))
            .collect())
    }

    /// Deterministic ECMP unicast path between two distinct hosts: up from
    /// the source, down to the destination. Among the equal-cost choices
    /// (one of `k/2` aggregates in-pod, one of `(k/2)^2` cores cross-pod),
    /// the pick is `stable_hash(src, dst, seed)` reduced modulo the choice
    /// count, so every packet of a pair takes the same path.
    pub fn ecmp_unicast_path(
        &self,
        src: NodeId,
        dst: NodeId,
        seed: u64,
    ) -> Result<Vec<Link>, TopologyError> {
        let (sp, si) = match src {
            NodeId::Host { pod, index } => (pod, index),
            other => return Err(TopologyError::NotAHost(other)),
        };
        let (dp, di) = match dst {
            NodeId::Host { pod, index } => (pod, index),
            other => return Err(TopologyError::NotAHost(other)),
        };
        if src == dst {
            return Err(TopologyError::SameHost(src));
        }
        let half = self.half() as u16;
        let src_edge = NodeId::Edge { pod: sp, index: si / half };
        let dst_edge = NodeId::Edge { pod: dp, index: di / half };

        let choice = stable_hash(&[
            self.host_id(src)?.0 as u64,
            self.host_id(dst)?.0 as u64,
            seed,
        ]);

        let hops: Vec<NodeId> = if src_edge == dst_edge {
            vec![src, src_edge, dst]
        } else if sp == dp {
            let a = (choice % half as u64) as u16;
            vec![src, src_edge, NodeId::Aggregate { pod: sp, index: a }, dst_edge, dst]
        } else {
            let core = (choice % (half as u64 * half as u64)) as u16;
            let column = core % half;
            vec![
                src,
                src_edge,
                NodeId::Aggregate { pod: sp, index: column },
                NodeId::Core { index: core },
                NodeId::Aggregate { pod: dp, index: column },
                dst_edge,
                dst,
            ]
        };
        Ok(hops
            .windows(2)
            .map(|w| self.link_between(w[0], w[1]).expect("ecmp hop is wired"))
            .collect())
    }
}
