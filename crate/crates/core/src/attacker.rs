//! The flooding attacker: builds a link-map of routed paths by probing,
//! ranks links by flow density, picks target links that both degrade the
//! target area and are floodable via decoy-bound traffic, spreads bot
//! budgets evenly over the decoys behind each target, and re-plans when it
//! notices the routing changed under its feet.
//!
//! Timing model: route probing is the attacker's measurement loop, with
//! period `t_a` and a setup cost of `probe_duration` ticks during which the
//! bots emit no attack traffic. A routing change committed at tick `t` is
//! acted on at `t + t_a` (the in-flight measurement has to age out first),
//! so the gap from change to fresh plan is `t_a + probe_duration`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ids::{HostId, LinkId};
use crate::netmodel::{HostRole, RoutingState, Topology};
use crate::traffic::{Flow, FlowClass};

/// Attacker knobs from the scenario file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackerParams {
    /// Number of target links to flood simultaneously.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Rate budget of a single bot; no single flow may exceed it.
    pub bot_rate_cap: f64,
    /// Planned demanded load on every target link must reach
    /// `attack_margin * capacity`.
    #[serde(default = "default_margin")]
    pub attack_margin: f64,
    /// Route-monitoring period (ticks).
    pub t_a: u64,
    /// Ticks a probe/re-planning pass takes; the attack is silent meanwhile.
    pub probe_duration: u64,
}

fn default_k() -> usize {
    1
}

fn default_margin() -> f64 {
    1.0
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum AttackerError {
    #[error("no link lies on both a bot→target-area path and a bot→decoy path")]
    EmptyCandidates,
    #[error(
        "cannot reach {required} on `{link}`: all eligible bots achieve only {achievable}"
    )]
    InsufficientCapacity {
        link: LinkId,
        required: f64,
        achievable: f64,
    },
}

/// The attacker's observed map of routed paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkMapView {
    /// (bot, destination) → exact routed path at probe time.
    pub observed_paths: BTreeMap<(HostId, HostId), Vec<LinkId>>,
    pub probed_at: u64,
    pub routing_version_seen: u64,
}

/// Target links plus per-bot flow assignments to decoys.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackPlan {
    pub target_links: Vec<LinkId>,
    /// bot → (decoy, rate) assignments; a bot's rates sum to at most its cap.
    pub assignments: BTreeMap<HostId, Vec<(HostId, f64)>>,
    pub planned_at: u64,
}

impl AttackPlan {
    pub fn flows(&self) -> Vec<Flow> {
        let mut flows = Vec::new();
        for (bot, targets) in &self.assignments {
            for (decoy, rate) in targets {
                flows.push(Flow::new(
                    bot.clone(),
                    decoy.clone(),
                    *rate,
                    FlowClass::Attack,
                ));
            }
        }
        flows
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Phase {
    /// Probing/re-planning; `until` is the first tick that is no longer part
    /// of the probe. The probe completes during tick `until - 1`.
    Probing { until: u64 },
    Flooding,
    /// The last probe found no feasible attack; retry probing at `retry_at`.
    Dormant { retry_at: u64 },
}

/// What one attacker step produced, besides next-tick flows.
#[derive(Debug, Default)]
pub struct AttackerEvents {
    pub new_plan: bool,
    pub dormant: bool,
}

/// Attacker state machine, owned by one simulation instance.
#[derive(Debug, Clone)]
pub struct AttackerState {
    phase: Phase,
    linkmap: Option<LinkMapView>,
    plan: Option<AttackPlan>,
    /// Tick at which a routing-version change was first observed while
    /// flooding; acted upon `t_a` ticks later.
    pending_change: Option<u64>,
    bots: Vec<HostId>,
    destinations: Vec<HostId>,
}

impl AttackerState {
    /// Initial state plus the flows to emit at tick 0. With bots present the
    /// attacker starts its first probe immediately; without bots it stays
    /// dormant forever.
    pub fn new(topo: &Topology, params: &AttackerParams, routing: &RoutingState) -> (Self, Vec<Flow>) {
        let bots = topo.hosts_with_role(HostRole::Bot);
        let mut destinations = topo.hosts_with_role(HostRole::Decoy);
        destinations.extend(topo.hosts_with_role(HostRole::TargetArea));
        destinations.sort();
        let phase = if bots.is_empty() {
            Phase::Dormant { retry_at: u64::MAX }
        } else {
            Phase::Probing {
                until: params.probe_duration,
            }
        };
        let state = Self {
            phase,
            linkmap: None,
            plan: None,
            pending_change: None,
            bots,
            destinations,
        };
        let flows = match state.phase {
            Phase::Probing { .. } => state.probe_flows(routing, topo),
            _ => Vec::new(),
        };
        (state, flows)
    }

    pub fn plan(&self) -> Option<&AttackPlan> {
        self.plan.as_ref()
    }

    pub fn linkmap(&self) -> Option<&LinkMapView> {
        self.linkmap.as_ref()
    }

    pub fn is_flooding(&self) -> bool {
        self.phase == Phase::Flooding
    }

    pub fn is_dormant(&self) -> bool {
        matches!(self.phase, Phase::Dormant { .. })
    }

    /// Target links of the plan whose flows are currently on the wire, or
    /// none while probing/dormant.
    pub fn active_targets(&self) -> &[LinkId] {
        match (&self.phase, &self.plan) {
            (Phase::Flooding, Some(plan)) => &plan.target_links,
            _ => &[],
        }
    }

    /// Zero-rate probe flows for every reachable (bot, destination) pair.
    fn probe_flows(&self, routing: &RoutingState, topo: &Topology) -> Vec<Flow> {
        let mut flows = Vec::new();
        for bot in &self.bots {
            for dst in &self.destinations {
                if routing.host_path(topo, bot, dst).is_some() {
                    flows.push(Flow::new(bot.clone(), dst.clone(), 0.0, FlowClass::Probe));
                }
            }
        }
        flows
    }

    fn complete_probe(
        &mut self,
        routing: &RoutingState,
        topo: &Topology,
        tick: u64,
        params: &AttackerParams,
        events: &mut AttackerEvents,
    ) -> Vec<Flow> {
        let (linkmap, _unreachable) =
            probe_linkmap(routing, topo, &self.bots, &self.destinations, tick);
        self.pending_change = None;
        let outcome = plan_attack(&linkmap, topo, params, tick);
        self.linkmap = Some(linkmap);
        match outcome {
            Ok(plan) => {
                let flows = plan.flows();
                self.plan = Some(plan);
                self.phase = Phase::Flooding;
                events.new_plan = true;
                flows
            }
            Err(_) => {
                // Infeasible under current routing: pause and retry later
                // rather than giving up for good.
                self.phase = Phase::Dormant {
                    retry_at: tick + params.t_a,
                };
                events.dormant = true;
                Vec::new()
            }
        }
    }

    /// Advance the attacker by one tick (called after the defender may have
    /// committed reroutes) and return the flows to emit next tick.
    pub fn step(
        &mut self,
        routing: &RoutingState,
        topo: &Topology,
        tick: u64,
        params: &AttackerParams,
    ) -> (Vec<Flow>, AttackerEvents) {
        let mut events = AttackerEvents::default();
        let flows = match self.phase.clone() {
            Phase::Probing { until } => {
                if tick + 1 >= until {
                    self.complete_probe(routing, topo, tick, params, &mut events)
                } else {
                    self.probe_flows(routing, topo)
                }
            }
            Phase::Flooding => {
                let seen = self
                    .linkmap
                    .as_ref()
                    .map(|lm| lm.routing_version_seen)
                    .unwrap_or(0);
                if self.pending_change.is_none() && routing.version() != seen {
                    self.pending_change = Some(tick);
                }
                match self.pending_change {
                    Some(changed_at) if tick >= changed_at + params.t_a => {
                        self.phase = Phase::Probing {
                            until: tick + 1 + params.probe_duration,
                        };
                        self.probe_flows(routing, topo)
                    }
                    _ => self.plan.as_ref().map(AttackPlan::flows).unwrap_or_default(),
                }
            }
            Phase::Dormant { retry_at } => {
                if retry_at != u64::MAX && tick + 1 >= retry_at {
                    self.phase = Phase::Probing {
                        until: retry_at + params.probe_duration,
                    };
                    self.probe_flows(routing, topo)
                } else {
                    events.dormant = true;
                    Vec::new()
                }
            }
        };
        (flows, events)
    }
}

/// Record the exact current routed path for every (bot, destination) pair.
/// Unreachable pairs are omitted and returned as diagnostics.
pub fn probe_linkmap(
    routing: &RoutingState,
    topo: &Topology,
    bots: &[HostId],
    destinations: &[HostId],
    tick: u64,
) -> (LinkMapView, Vec<(HostId, HostId)>) {
    debug_assert!(destinations.iter().all(|d| {
        topo.host(d)
            .is_some_and(|h| matches!(h.role, HostRole::Decoy | HostRole::TargetArea))
    }));
    let mut observed_paths = BTreeMap::new();
    let mut unreachable = Vec::new();
    for bot in bots {
        for dst in destinations {
            match routing.host_path(topo, bot, dst) {
                Some(path) => {
                    observed_paths.insert((bot.clone(), dst.clone()), path);
                }
                None => unreachable.push((bot.clone(), dst.clone())),
            }
        }
    }
    (
        LinkMapView {
            observed_paths,
            probed_at: tick,
            routing_version_seen: routing.version(),
        },
        unreachable,
    )
}

/// Flow density: for each link, the number of (bot, destination) pairs whose
/// observed path contains it.
pub fn flow_density(linkmap: &LinkMapView) -> BTreeMap<LinkId, u64> {
    let mut density: BTreeMap<LinkId, u64> = BTreeMap::new();
    for path in linkmap.observed_paths.values() {
        for link in path {
            *density.entry(link.clone()).or_insert(0) += 1;
        }
    }
    density
}

/// The `k` highest-density links that lie on at least one bot→target-area
/// path and are floodable via decoy-bound traffic. Ties break on link ID;
/// fewer than `k` are returned when candidates run out.
pub fn select_target_links(
    density: &BTreeMap<LinkId, u64>,
    topo: &Topology,
    linkmap: &LinkMapView,
    k: usize,
) -> Result<Vec<LinkId>, AttackerError> {
    debug_assert!(k >= 1);
    let mut on_target_path: BTreeSet<&LinkId> = BTreeSet::new();
    let mut on_decoy_path: BTreeSet<&LinkId> = BTreeSet::new();
    for ((_bot, dst), path) in &linkmap.observed_paths {
        let role = topo.host(dst).map(|h| h.role);
        let set = match role {
            Some(HostRole::TargetArea) => &mut on_target_path,
            Some(HostRole::Decoy) => &mut on_decoy_path,
            _ => continue,
        };
        set.extend(path.iter());
    }
    let mut candidates: Vec<&LinkId> = on_target_path
        .intersection(&on_decoy_path)
        .copied()
        .collect();
    if candidates.is_empty() {
        return Err(AttackerError::EmptyCandidates);
    }
    candidates.sort_by(|a, b| {
        let da = density.get(*a).copied().unwrap_or(0);
        let db = density.get(*b).copied().unwrap_or(0);
        db.cmp(&da).then_with(|| a.cmp(b))
    });
    Ok(candidates.into_iter().take(k).cloned().collect())
}

const RATE_EPS: f64 = 1e-9;

/// Fill target links with bot flows: for each target, identify the decoys
/// whose bot paths cross it, then add bots in lexicographic order, each
/// splitting its remaining budget evenly over those decoys, until the
/// planned demanded load reaches `attack_margin * capacity`.
pub fn assign_bot_flows(
    targets: &[LinkId],
    linkmap: &LinkMapView,
    topo: &Topology,
    bot_rate_cap: f64,
    attack_margin: f64,
    tick: u64,
) -> Result<AttackPlan, AttackerError> {
    let bots: Vec<HostId> = linkmap
        .observed_paths
        .keys()
        .map(|(b, _)| b.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let path_crosses = |bot: &HostId, dst: &HostId, link: &LinkId| {
        linkmap
            .observed_paths
            .get(&(bot.clone(), dst.clone()))
            .is_some_and(|p| p.contains(link))
    };

    let mut remaining: BTreeMap<HostId, f64> =
        bots.iter().map(|b| (b.clone(), bot_rate_cap)).collect();
    let mut assignments: BTreeMap<HostId, Vec<(HostId, f64)>> = BTreeMap::new();
    let mut planned: BTreeMap<LinkId, f64> =
        targets.iter().map(|t| (t.clone(), 0.0)).collect();

    for target in targets {
        let capacity = topo.link(target).expect("selected link exists").capacity;
        let required = attack_margin * capacity;

        let decoys: Vec<HostId> = linkmap
            .observed_paths
            .iter()
            .filter(|((_, dst), path)| {
                topo.host(dst).is_some_and(|h| h.role == HostRole::Decoy)
                    && path.contains(target)
            })
            .map(|((_, dst), _)| dst.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if decoys.is_empty() {
            return Err(AttackerError::EmptyCandidates);
        }

        for bot in &bots {
            if planned[target] + RATE_EPS >= required {
                break;
            }
            let budget = remaining[bot];
            if budget <= 0.0 {
                continue;
            }
            if !decoys.iter().any(|d| path_crosses(bot, d, target)) {
                continue;
            }
            let per_decoy = budget / decoys.len() as f64;
            for decoy in &decoys {
                assignments
                    .entry(bot.clone())
                    .or_default()
                    .push((decoy.clone(), per_decoy));
                for t in targets {
                    if path_crosses(bot, decoy, t) {
                        *planned.get_mut(t).expect("planned target") += per_decoy;
                    }
                }
            }
            *remaining.get_mut(bot).expect("known bot") = 0.0;
        }

        if planned[target] + RATE_EPS < required {
            return Err(AttackerError::InsufficientCapacity {
                link: target.clone(),
                required,
                achievable: planned[target],
            });
        }
    }

    Ok(AttackPlan {
        target_links: targets.to_vec(),
        assignments,
        planned_at: tick,
    })
}

fn plan_attack(
    linkmap: &LinkMapView,
    topo: &Topology,
    params: &AttackerParams,
    tick: u64,
) -> Result<AttackPlan, AttackerError> {
    if linkmap.observed_paths.is_empty() {
        return Err(AttackerError::EmptyCandidates);
    }
    let density = flow_density(linkmap);
    let targets = select_target_links(&density, topo, linkmap, params.k)?;
    assign_bot_flows(
        &targets,
        linkmap,
        topo,
        params.bot_rate_cap,
        params.attack_margin,
        tick,
    )
}
