//! Canned scenarios.
//!
//! The canonical scenario is a six-switch network: a diamond of four
//! switches carrying the contested traffic — `s1–s2` is the natural target
//! link, `s1–s3–s4–s2` the detour — plus a side branch `s6→s5` that only
//! benign flash-crowd traffic ever uses. The target-area host sits at `s2`,
//! decoys at `s4` and `s2`, and twelve bots at `s1`. Capacities are chosen
//! so that ten bot flows of rate 1 saturate the target link, and the detour
//! is just as floodable, which keeps the rerouting game alive.
//!
//! Attacker and defender reaction times are matched (4+1 against 4+1+0
//! ticks) so neither player holds a structural timing advantage.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::attacker::AttackerParams;
use crate::defender::{DefenderParams, Strategy};
use crate::engine::{ScenarioSpec, SimParams};
use crate::netmodel::{
    build_initial_routing, load_topology, HostRole, HostSpec, LinkSpec, RoutingState, Topology,
    TopologySpec,
};
use crate::traffic::TrafficProfile;

#[derive(Debug, thiserror::Error)]
pub enum GenerateError {
    #[error("random scenarios need at least 4 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("could not generate a connected topology in {0} attempts")]
    AttemptsExhausted(usize),
}

fn undirected(id: &str, src: &str, dst: &str, capacity: f64) -> LinkSpec {
    LinkSpec {
        id: id.into(),
        src: src.into(),
        dst: dst.into(),
        capacity,
        directed: false,
    }
}

fn host(id: &str, attach: &str, role: HostRole) -> HostSpec {
    HostSpec {
        id: id.into(),
        attach: attach.into(),
        role,
    }
}

/// The canonical six-switch scenario (no randomness involved).
pub fn figure1_spec() -> ScenarioSpec {
    let mut hosts = vec![
        host("T", "s2", HostRole::TargetArea),
        host("D1", "s4", HostRole::Decoy),
        host("D2", "s2", HostRole::Decoy),
    ];
    for i in 1..=12 {
        hosts.push(host(&format!("b{i:02}"), "s1", HostRole::Bot));
    }
    ScenarioSpec {
        topology: TopologySpec {
            nodes: (1..=6).map(|i| format!("s{i}")).collect(),
            links: vec![
                undirected("e12", "s1", "s2", 10.0),
                undirected("e13", "s1", "s3", 10.0),
                undirected("e34", "s3", "s4", 10.0),
                undirected("e42", "s4", "s2", 10.0),
                LinkSpec {
                    id: "e65".into(),
                    src: "s6".into(),
                    dst: "s5".into(),
                    capacity: 100.0,
                    directed: true,
                },
            ],
            hosts,
        },
        traffic: TrafficProfile::default(),
        attacker: AttackerParams {
            k: 1,
            bot_rate_cap: 1.0,
            attack_margin: 1.0,
            t_a: 4,
            probe_duration: 1,
        },
        defender: DefenderParams {
            theta_dos: 0.95,
            d: 2,
            t_d: 4,
            batch_delay: 1,
            control_delay: 0,
            strategy: Strategy::Homogeneous,
            beta: 2.0,
            s_threshold: None,
            rho: 0.0,
            per_link_handling: false,
        },
        sim: SimParams {
            total_ticks: 2000,
            rng_seed: 42,
        },
    }
}

/// Validated topology and initial routing of the canonical scenario; handy
/// for tests.
pub fn figure1_network() -> (Topology, RoutingState) {
    let topo = load_topology(&figure1_spec().topology).expect("canonical topology is valid");
    let routing = build_initial_routing(&topo);
    (topo, routing)
}

const GENERATE_ATTEMPTS: usize = 16;

/// A seeded random scenario on `nodes` switches with `bots` bots. The graph
/// is a random spanning tree plus extra chords, so it is connected; role
/// placement and capacities derive deterministically from the seed.
pub fn random_spec(nodes: usize, bots: usize, seed: u64) -> Result<ScenarioSpec, GenerateError> {
    if nodes < 4 {
        return Err(GenerateError::TooFewNodes(nodes));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    for _ in 0..GENERATE_ATTEMPTS {
        let spec = random_attempt(nodes, bots, seed, &mut rng);
        let topo = load_topology(&spec.topology).expect("generated topology is well-formed");
        if connected(&topo) {
            return Ok(spec);
        }
    }
    Err(GenerateError::AttemptsExhausted(GENERATE_ATTEMPTS))
}

fn connected(topo: &Topology) -> bool {
    let routing = build_initial_routing(topo);
    let nodes = topo.nodes().len();
    topo.hosts()
        .all(|h| routing.tree(&h.id).map(|t| t.covered_nodes().count() + 1) == Some(nodes))
}

fn random_attempt(nodes: usize, bots: usize, seed: u64, rng: &mut StdRng) -> ScenarioSpec {
    let node_name = |i: usize| format!("n{i:02}");
    let caps = [20.0, 40.0, 80.0];

    let mut links = Vec::new();
    for i in 2..=nodes {
        let parent = rng.random_range(1..i);
        let cap = caps[rng.random_range(0..caps.len())];
        links.push(undirected(
            &format!("e_{parent:02}_{i:02}"),
            &node_name(parent),
            &node_name(i),
            cap,
        ));
    }
    let extra = nodes / 2;
    for _ in 0..extra {
        let a = rng.random_range(1..=nodes);
        let b = rng.random_range(1..=nodes);
        if a == b {
            continue;
        }
        let (lo, hi) = (a.min(b), a.max(b));
        let id = format!("e_{lo:02}_{hi:02}");
        if links.iter().any(|l: &LinkSpec| l.id == id) {
            continue;
        }
        let cap = caps[rng.random_range(0..caps.len())];
        links.push(undirected(&id, &node_name(lo), &node_name(hi), cap));
    }

    let mut hosts = vec![
        host("T", &node_name(rng.random_range(1..=nodes)), HostRole::TargetArea),
        host("D1", &node_name(rng.random_range(1..=nodes)), HostRole::Decoy),
        host("D2", &node_name(rng.random_range(1..=nodes)), HostRole::Decoy),
        host("bg", &node_name(rng.random_range(1..=nodes)), HostRole::Benign),
    ];
    for i in 1..=bots {
        hosts.push(host(
            &format!("b{i:02}"),
            &node_name(rng.random_range(1..=nodes)),
            HostRole::Bot,
        ));
    }

    ScenarioSpec {
        topology: TopologySpec {
            nodes: (1..=nodes).map(node_name).collect(),
            links,
            hosts,
        },
        traffic: TrafficProfile {
            background: vec![crate::traffic::BackgroundFlow {
                src: "bg".into(),
                dst: "T".into(),
                rate: 1.0,
            }],
            flash_crowd: None,
        },
        attacker: AttackerParams {
            k: 1,
            bot_rate_cap: 2.0,
            attack_margin: 1.0,
            t_a: 4,
            probe_duration: 1,
        },
        defender: DefenderParams {
            theta_dos: 0.95,
            d: 2,
            t_d: 4,
            batch_delay: 1,
            control_delay: 0,
            strategy: Strategy::Homogeneous,
            beta: 2.0,
            s_threshold: Some(3.0),
            rho: 0.0,
            per_link_handling: false,
        },
        sim: SimParams {
            total_ticks: 300,
            rng_seed: seed,
        },
    }
}
