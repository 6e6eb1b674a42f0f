//! Per-destination sink-tree routing and link load computation.
//!
//! Routing is minimum-hop. Ties are broken by lexicographic comparison of
//! the link-ID sequence of the whole path. Because link IDs are unique, the
//! lexicographically smallest shortest path is found greedily: at every node
//! take the smallest-ID outgoing link that leads one hop closer to the
//! destination. That greedy choice is consistent across sources, so a single
//! sink tree per destination realises the tie-break for every node at once.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::ids::{HostId, LinkId, NodeId};
use crate::netmodel::topology::Topology;
use crate::traffic::Flow;

#[derive(Debug, thiserror::Error)]
pub enum RouteError {
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("unknown host `{0}`")]
    UnknownHost(HostId),
    #[error("no path from `{src}` to `{dst}` under the avoid set")]
    NoPath { src: NodeId, dst: NodeId },
    #[error("rerouting `{dst}` would disconnect nodes {lost:?}")]
    Disconnect { dst: HostId, lost: Vec<NodeId> },
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("flows with unreachable destinations: {0:?}")]
    Unreachable(Vec<(HostId, HostId)>),
}

/// Routing for one destination: every covered node's next-hop link plus its
/// hop distance to the destination's attach node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SinkTree {
    dest: NodeId,
    next: BTreeMap<NodeId, LinkId>,
    dist: BTreeMap<NodeId, usize>,
}

impl SinkTree {
    pub fn dest(&self) -> &NodeId {
        &self.dest
    }

    /// Next-hop link out of `node`, if the destination is reachable from it.
    pub fn next_link(&self, node: &NodeId) -> Option<&LinkId> {
        self.next.get(node)
    }

    pub fn covers(&self, node: &NodeId) -> bool {
        node == &self.dest || self.next.contains_key(node)
    }

    pub fn covered_nodes(&self) -> impl Iterator<Item = &NodeId> {
        self.next.keys()
    }

    /// Link sequence from `node` to the destination. `None` if uncovered.
    ///
    /// Panics if the walk exceeds the node count; trees are loop-free by
    /// construction, so that is a bug, not a scenario.
    pub fn path_from(&self, topo: &Topology, node: &NodeId) -> Option<Vec<LinkId>> {
        if node == &self.dest {
            return Some(Vec::new());
        }
        let mut path = Vec::new();
        let mut cur = node.clone();
        while cur != self.dest {
            let link_id = self.next.get(&cur)?;
            let link = topo
                .link(link_id)
                .expect("sink tree references link absent from topology");
            path.push(link_id.clone());
            cur = link.dst.clone();
            if path.len() > topo.nodes().len() {
                panic!("routing loop in sink tree for {}", self.dest);
            }
        }
        Some(path)
    }
}

/// The defender's control surface: one sink tree per destination host and a
/// version counter bumped once per committed change.
#[derive(Debug, Clone)]
pub struct RoutingState {
    trees: BTreeMap<HostId, SinkTree>,
    version: u64,
}

impl RoutingState {
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn tree(&self, dst: &HostId) -> Option<&SinkTree> {
        self.trees.get(dst)
    }

    pub fn destinations(&self) -> impl Iterator<Item = &HostId> {
        self.trees.keys()
    }

    /// Routed path for traffic from `src` host to `dst` host, or `None` when
    /// the destination is unreachable from the source's attach node.
    pub fn host_path(&self, topo: &Topology, src: &HostId, dst: &HostId) -> Option<Vec<LinkId>> {
        let src_node = &topo.host(src)?.attach;
        self.trees.get(dst)?.path_from(topo, src_node)
    }
}

/// Hop distances to `dest` over non-avoided links (reverse BFS).
fn distances_to(
    topo: &Topology,
    dest: &NodeId,
    avoid: &BTreeSet<LinkId>,
) -> BTreeMap<NodeId, usize> {
    let mut dist = BTreeMap::new();
    dist.insert(dest.clone(), 0usize);
    let mut queue = VecDeque::from([dest.clone()]);
    while let Some(node) = queue.pop_front() {
        let d = dist[&node];
        for link_id in topo.in_links(&node) {
            if avoid.contains(link_id) {
                continue;
            }
            let link = topo.link(link_id).expect("indexed link");
            if !dist.contains_key(&link.src) {
                dist.insert(link.src.clone(), d + 1);
                queue.push_back(link.src.clone());
            }
        }
    }
    dist
}

/// Smallest-ID outgoing link of `node` going one hop closer to the
/// destination, per the global tie-break.
fn greedy_step(
    topo: &Topology,
    node: &NodeId,
    dist: &BTreeMap<NodeId, usize>,
    avoid: &BTreeSet<LinkId>,
) -> Option<LinkId> {
    let d = *dist.get(node)?;
    for link_id in topo.out_links(node) {
        if avoid.contains(link_id) {
            continue;
        }
        let link = topo.link(link_id).expect("indexed link");
        if dist.get(&link.dst) == Some(&(d - 1)) {
            return Some(link_id.clone());
        }
    }
    None
}

/// Minimum-hop path from `src` to `dst`, skipping `avoid`, as an ordered
/// list of link IDs. Ties break on the lexicographically smallest link-ID
/// sequence.
pub fn shortest_path(
    topo: &Topology,
    src: &NodeId,
    dst: &NodeId,
    avoid: &BTreeSet<LinkId>,
) -> Result<Vec<LinkId>, RouteError> {
    for n in [src, dst] {
        if !topo.nodes().contains(n) {
            return Err(RouteError::UnknownNode(n.clone()));
        }
    }
    if src == dst {
        return Ok(Vec::new());
    }
    let dist = distances_to(topo, dst, avoid);
    if !dist.contains_key(src) {
        return Err(RouteError::NoPath {
            src: src.clone(),
            dst: dst.clone(),
        });
    }
    let mut path = Vec::new();
    let mut cur = src.clone();
    while &cur != dst {
        let link_id = greedy_step(topo, &cur, &dist, avoid)
            .expect("node with finite distance has an admissible link");
        cur = topo.link(&link_id).expect("indexed link").dst.clone();
        path.push(link_id);
    }
    Ok(path)
}

fn sink_tree(topo: &Topology, dest: &NodeId, avoid: &BTreeSet<LinkId>) -> SinkTree {
    let dist = distances_to(topo, dest, avoid);
    let mut next = BTreeMap::new();
    for node in dist.keys() {
        if node == dest {
            continue;
        }
        let link =
            greedy_step(topo, node, &dist, avoid).expect("covered node has an admissible link");
        next.insert(node.clone(), link);
    }
    SinkTree {
        dest: dest.clone(),
        next,
        dist,
    }
}

/// Shortest-path sink trees for every destination host; version 0. Nodes
/// from which a destination is unreachable simply lack entries in its tree.
pub fn build_initial_routing(topo: &Topology) -> RoutingState {
    let trees = topo
        .hosts()
        .map(|h| (h.id.clone(), sink_tree(topo, &h.attach, &BTreeSet::new())))
        .collect();
    RoutingState { trees, version: 0 }
}

/// Recompute the sink tree for `dst` on the topology minus `avoid`. All
/// other trees are untouched; the version increments by one even when the
/// recomputed tree is identical.
///
/// Fails with a disconnect error if any node covered by the current tree
/// would lose reachability, leaving the routing state unchanged.
pub fn reroute_destination(
    routing: &RoutingState,
    topo: &Topology,
    dst: &HostId,
    avoid: &BTreeSet<LinkId>,
) -> Result<RoutingState, RouteError> {
    debug_assert!(!avoid.is_empty(), "reroute with an empty avoid set");
    commit_reroutes(routing, topo, &[(dst.clone(), avoid.clone())])
}

/// Apply a batch of reroute actions atomically with a single version bump.
/// Either every action is applied or none is. An empty batch is a no-op and
/// does not bump the version.
pub fn commit_reroutes(
    routing: &RoutingState,
    topo: &Topology,
    actions: &[(HostId, BTreeSet<LinkId>)],
) -> Result<RoutingState, RouteError> {
    if actions.is_empty() {
        return Ok(routing.clone());
    }
    let mut new_trees: Vec<(HostId, SinkTree)> = Vec::with_capacity(actions.len());
    for (dst, avoid) in actions {
        let old = routing
            .trees
            .get(dst)
            .ok_or_else(|| RouteError::UnknownHost(dst.clone()))?;
        let tree = sink_tree(topo, &old.dest, avoid);
        let lost: Vec<NodeId> = old
            .covered_nodes()
            .filter(|n| !tree.covers(n))
            .cloned()
            .collect();
        if !lost.is_empty() {
            return Err(RouteError::Disconnect {
                dst: dst.clone(),
                lost,
            });
        }
        new_trees.push((dst.clone(), tree));
    }
    let mut next = routing.clone();
    for (dst, tree) in new_trees {
        next.trees.insert(dst, tree);
    }
    next.version += 1;
    Ok(next)
}

/// Demanded (uncapped) load per link for the given flows.
///
/// Flows follow the sink tree of their destination from their source's
/// attach node; a link's load is the sum of the rates of flows whose path
/// includes it. Inactive and zero-rate flows contribute nothing. Every link
/// of the topology appears in the result, loaded or not.
pub fn link_loads(
    routing: &RoutingState,
    topo: &Topology,
    flows: &[Flow],
) -> Result<BTreeMap<LinkId, f64>, LoadError> {
    let mut loads: BTreeMap<LinkId, f64> =
        topo.links().map(|l| (l.id.clone(), 0.0)).collect();

    // Group demand by destination and injection node, then push each
    // destination's demand down its sink tree in one deepest-first sweep.
    let mut by_dest: BTreeMap<HostId, BTreeMap<NodeId, f64>> = BTreeMap::new();
    let mut unreachable: Vec<(HostId, HostId)> = Vec::new();
    for flow in flows {
        if !flow.active || flow.rate <= 0.0 {
            continue;
        }
        let Some(src_host) = topo.host(&flow.src) else {
            unreachable.push((flow.src.clone(), flow.dst.clone()));
            continue;
        };
        let covered = routing
            .tree(&flow.dst)
            .is_some_and(|t| t.covers(&src_host.attach));
        if !covered {
            unreachable.push((flow.src.clone(), flow.dst.clone()));
            continue;
        }
        *by_dest
            .entry(flow.dst.clone())
            .or_default()
            .entry(src_host.attach.clone())
            .or_insert(0.0) += flow.rate;
    }
    if !unreachable.is_empty() {
        return Err(LoadError::Unreachable(unreachable));
    }

    for (dst, demands) in by_dest {
        let tree = routing.tree(&dst).expect("checked above");
        // Sweep from the deepest node toward the destination, merging demand
        // that enters at shallower nodes along the way.
        let mut pending: BTreeMap<(usize, NodeId), f64> = demands
            .into_iter()
            .map(|(node, rate)| ((tree.dist[&node], node), rate))
            .collect();
        while let Some(((d, node), rate)) = pending.pop_last() {
            if d == 0 {
                continue;
            }
            let link_id = tree.next_link(&node).expect("covered node");
            let link = topo.link(link_id).expect("indexed link");
            *loads.get_mut(link_id).expect("all links present") += rate;
            *pending.entry((d - 1, link.dst.clone())).or_insert(0.0) += rate;
        }
    }
    Ok(loads)
}
