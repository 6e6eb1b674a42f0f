//! Network model: topology representation, validation, per-destination
//! sink-tree routing and link load computation.

mod routing;
mod topology;

pub use routing::{
    build_initial_routing, commit_reroutes, link_loads, reroute_destination, shortest_path,
    LoadError, RouteError, RoutingState, SinkTree,
};
pub use topology::{
    load_topology, Host, HostRole, HostSpec, Link, LinkSpec, Topology, TopologyError, TopologySpec,
};
