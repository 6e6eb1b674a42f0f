//! Topology types, the external file schema and validation.
//!
//! The on-disk format is JSON with three top-level keys: `nodes` (list of
//! node IDs), `links` and `hosts`. Unknown keys are rejected. An undirected
//! input edge expands to two directed links with `_fwd`/`_rev` suffixed IDs;
//! everything downstream of loading works on directed links only.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ids::{HostId, LinkId, NodeId};

/// Role a host plays for the whole run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HostRole {
    Bot,
    Benign,
    Decoy,
    TargetArea,
}

/// A directed link with a strictly positive capacity (abstract rate units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: LinkId,
    pub src: NodeId,
    pub dst: NodeId,
    pub capacity: f64,
}

/// An end host attached to exactly one node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Host {
    pub id: HostId,
    pub attach: NodeId,
    pub role: HostRole,
}

/// Link entry of the topology file. `directed: false` expands into the two
/// directed links `<id>_fwd` (src→dst) and `<id>_rev` (dst→src).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub id: String,
    pub src: String,
    pub dst: String,
    pub capacity: f64,
    pub directed: bool,
}

/// Host entry of the topology file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HostSpec {
    pub id: String,
    pub attach: String,
    pub role: HostRole,
}

/// The topology section of a scenario file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub nodes: Vec<String>,
    pub links: Vec<LinkSpec>,
    pub hosts: Vec<HostSpec>,
}

#[derive(Debug, thiserror::Error)]
pub enum TopologyError {
    #[error("duplicate node id `{0}`")]
    DuplicateNode(NodeId),
    #[error("duplicate link id `{0}`")]
    DuplicateLink(LinkId),
    #[error("duplicate host id `{0}`")]
    DuplicateHost(HostId),
    #[error("link `{link}` references undeclared node `{node}`")]
    DanglingEndpoint { link: LinkId, node: NodeId },
    #[error("link `{link}` has non-positive capacity {capacity}")]
    NonPositiveCapacity { link: LinkId, capacity: f64 },
    #[error("link `{link}` is a self-loop on node `{node}`")]
    SelfLoop { link: LinkId, node: NodeId },
    #[error("host `{host}` attaches to undeclared node `{node}`")]
    HostOnUnknownNode { host: HostId, node: NodeId },
}

/// Validated network topology with derived adjacency.
#[derive(Debug, Clone)]
pub struct Topology {
    nodes: BTreeSet<NodeId>,
    links: BTreeMap<LinkId, Link>,
    hosts: BTreeMap<HostId, Host>,
    out: BTreeMap<NodeId, Vec<LinkId>>,
    inn: BTreeMap<NodeId, Vec<LinkId>>,
}

impl Topology {
    pub fn nodes(&self) -> &BTreeSet<NodeId> {
        &self.nodes
    }

    pub fn links(&self) -> impl Iterator<Item = &Link> {
        self.links.values()
    }

    pub fn link(&self, id: &LinkId) -> Option<&Link> {
        self.links.get(id)
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn hosts(&self) -> impl Iterator<Item = &Host> {
        self.hosts.values()
    }

    pub fn host(&self, id: &HostId) -> Option<&Host> {
        self.hosts.get(id)
    }

    /// Host IDs with the given role, in lexicographic order.
    pub fn hosts_with_role(&self, role: HostRole) -> Vec<HostId> {
        self.hosts
            .values()
            .filter(|h| h.role == role)
            .map(|h| h.id.clone())
            .collect()
    }

    /// Outgoing links of `node`, sorted by link ID.
    pub fn out_links(&self, node: &NodeId) -> &[LinkId] {
        self.out.get(node).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Incoming links of `node`, sorted by link ID.
    pub fn in_links(&self, node: &NodeId) -> &[LinkId] {
        self.inn.get(node).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Expand, validate and index a parsed topology description.
pub fn load_topology(spec: &TopologySpec) -> Result<Topology, TopologyError> {
    let mut nodes = BTreeSet::new();
    for n in &spec.nodes {
        let id = NodeId::from(n.as_str());
        if !nodes.insert(id.clone()) {
            return Err(TopologyError::DuplicateNode(id));
        }
    }

    // Undirected edges expand before any validation so duplicates between an
    // explicit `x_fwd` and an expanded one are caught like any other clash.
    let mut expanded: Vec<Link> = Vec::new();
    for l in &spec.links {
        let base = Link {
            id: LinkId::from(l.id.as_str()),
            src: NodeId::from(l.src.as_str()),
            dst: NodeId::from(l.dst.as_str()),
            capacity: l.capacity,
        };
        if l.directed {
            expanded.push(base);
        } else {
            expanded.push(Link {
                id: LinkId(format!("{}_fwd", l.id)),
                ..base.clone()
            });
            expanded.push(Link {
                id: LinkId(format!("{}_rev", l.id)),
                src: base.dst.clone(),
                dst: base.src.clone(),
                capacity: l.capacity,
            });
        }
    }

    let mut links = BTreeMap::new();
    for link in expanded {
        if link.capacity <= 0.0 || !link.capacity.is_finite() {
            return Err(TopologyError::NonPositiveCapacity {
                link: link.id,
                capacity: link.capacity,
            });
        }
        for endpoint in [&link.src, &link.dst] {
            if !nodes.contains(endpoint) {
                return Err(TopologyError::DanglingEndpoint {
                    link: link.id.clone(),
                    node: endpoint.clone(),
                });
            }
        }
        if link.src == link.dst {
            return Err(TopologyError::SelfLoop {
                node: link.src.clone(),
                link: link.id,
            });
        }
        if links.insert(link.id.clone(), link.clone()).is_some() {
            return Err(TopologyError::DuplicateLink(link.id));
        }
    }

    let mut hosts = BTreeMap::new();
    for h in &spec.hosts {
        let host = Host {
            id: HostId::from(h.id.as_str()),
            attach: NodeId::from(h.attach.as_str()),
            role: h.role,
        };
        if !nodes.contains(&host.attach) {
            return Err(TopologyError::HostOnUnknownNode {
                host: host.id,
                node: host.attach,
            });
        }
        if hosts.insert(host.id.clone(), host.clone()).is_some() {
            return Err(TopologyError::DuplicateHost(host.id));
        }
    }

    let mut out: BTreeMap<NodeId, Vec<LinkId>> = BTreeMap::new();
    let mut inn: BTreeMap<NodeId, Vec<LinkId>> = BTreeMap::new();
    for link in links.values() {
        out.entry(link.src.clone()).or_default().push(link.id.clone());
        inn.entry(link.dst.clone()).or_default().push(link.id.clone());
    }
    // BTreeMap iteration already yields links in ID order, so the adjacency
    // vectors are sorted by construction.

    Ok(Topology {
        nodes,
        links,
        hosts,
        out,
        inn,
    })
}
