//! The controller-side defense: monitor link loads, detect DoS'ed links,
//! batch concurrently congested links into one joint reroute plan, record
//! the sources seen on DoS'ed links, score "returning" sources and issue
//! rate limits.
//!
//! The defender is class-blind by construction: it only ever sees
//! [`TrafficSample`]s (source, destination, rate), never flow class labels.
//!
//! Timing model per action loop: a flood is picked up by the periodic
//! monitor (period `t_d`, the dominant component), held for `batch_delay`
//! ticks while further DoS'ed links accumulate into the same batch, decided,
//! and committed `control_delay` ticks later.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::rngs::StdRng;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ids::{HostId, LinkId};
use crate::netmodel::{commit_reroutes, link_loads, reroute_destination, RoutingState, Topology};
use crate::traffic::{Flow, FlowClass};

/// Defender knobs from the scenario file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefenderParams {
    /// Utilization at or above which a link counts as DoS'ed.
    #[serde(default = "default_theta")]
    pub theta_dos: f64,
    /// Consecutive hot samples (ending at the newest) required for detection.
    #[serde(default = "default_d")]
    pub d: u64,
    /// Monitoring period in ticks.
    pub t_d: u64,
    /// Ticks to keep collecting DoS'ed links before deciding on a batch.
    pub batch_delay: u64,
    /// Ticks between the decision and the committed routing change.
    pub control_delay: u64,
    #[serde(default)]
    pub strategy: Strategy,
    /// Returning-source bonus added on top of the base increment.
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Suspiciousness threshold for rate-limiting; `null` disables limiting.
    #[serde(default = "default_s_threshold")]
    pub s_threshold: Option<f64>,
    /// Residual rate fraction left to limited sources (0 = full block).
    #[serde(default)]
    pub rho: f64,
    /// Test hook: handle each DoS'ed link separately instead of jointly.
    /// Not part of the scenario file format.
    #[serde(skip)]
    pub per_link_handling: bool,
}

fn default_theta() -> f64 {
    0.95
}

fn default_d() -> u64 {
    1
}

fn default_beta() -> f64 {
    2.0
}

fn default_s_threshold() -> Option<f64> {
    Some(3.0)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Divert uniformly chosen destinations off the congested links.
    Random,
    /// Prefer destinations whose per-source rates on the congested links are
    /// most homogeneous (ascending variance), approximating decoy groups.
    #[default]
    Homogeneous,
}

#[derive(Debug, thiserror::Error)]
pub enum DefenderError {
    #[error("no destination's traffic on the DoS'ed links can be diverted")]
    NoCandidates,
}

/// What the defender is allowed to see of a flow.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficSample {
    pub src: HostId,
    pub dst: HostId,
    pub rate: f64,
}

impl TrafficSample {
    fn as_flow(&self) -> Flow {
        Flow::new(
            self.src.clone(),
            self.dst.clone(),
            self.rate,
            FlowClass::Benign,
        )
    }
}

/// One tick's worth of monitoring input.
#[derive(Debug, Clone)]
pub struct LoadSample {
    pub tick: u64,
    pub loads: BTreeMap<LinkId, f64>,
    pub traffic: Vec<TrafficSample>,
}

/// Links found DoS'ed by one monitor pass.
#[derive(Debug, Clone, PartialEq)]
pub struct CongestionReport {
    pub tick: u64,
    /// (link, utilization at the window's last sample), sorted by link.
    pub dosed_links: Vec<(LinkId, f64)>,
    pub window: (u64, u64),
}

impl CongestionReport {
    pub fn is_empty(&self) -> bool {
        self.dosed_links.is_empty()
    }

    pub fn link_ids(&self) -> BTreeSet<LinkId> {
        self.dosed_links.iter().map(|(l, _)| l.clone()).collect()
    }
}

/// Per-source observation history and suspiciousness score.
#[derive(Debug, Clone, Default)]
pub struct SourceRecord {
    pub score: f64,
    /// (tick, DoS'ed link) the source was observed on.
    pub observations: Vec<(u64, LinkId)>,
    /// (destination, link) combinations this source was rerouted away from.
    pub diverted: BTreeSet<(HostId, LinkId)>,
    pub limited: bool,
}

#[derive(Debug, Clone, Default)]
pub struct SuspicionLedger {
    sources: BTreeMap<HostId, SourceRecord>,
}

impl SuspicionLedger {
    pub fn record(&self, src: &HostId) -> Option<&SourceRecord> {
        self.sources.get(src)
    }

    pub fn score(&self, src: &HostId) -> f64 {
        self.sources.get(src).map(|r| r.score).unwrap_or(0.0)
    }

    pub fn sources(&self) -> impl Iterator<Item = (&HostId, &SourceRecord)> {
        self.sources.iter()
    }

    fn entry(&mut self, src: &HostId) -> &mut SourceRecord {
        self.sources.entry(src.clone()).or_default()
    }
}

/// A batched joint reroute decision.
#[derive(Debug, Clone)]
pub struct ReroutePlan {
    pub batch_tick: u64,
    /// (destination, avoid set) actions, committed atomically.
    pub actions: Vec<(HostId, BTreeSet<LinkId>)>,
    /// Loads predicted for the observed traffic under the new routing.
    pub predicted_loads: BTreeMap<LinkId, f64>,
    /// Set when no divertible destination remained while some reported link
    /// was still predicted hot.
    pub best_effort: bool,
}

/// Detect links whose utilization stayed at or above `theta` for at least
/// `d` consecutive samples ending at the newest sample.
pub fn monitor(
    samples: &[&LoadSample],
    topo: &Topology,
    theta: f64,
    d: u64,
) -> CongestionReport {
    assert!(
        samples.len() >= d as usize && d >= 1,
        "monitor window shorter than d"
    );
    let last = samples.last().expect("non-empty window");
    let tail = &samples[samples.len() - d as usize..];
    let mut dosed = Vec::new();
    for link in topo.links() {
        let hot = tail.iter().all(|s| {
            s.loads.get(&link.id).copied().unwrap_or(0.0) / link.capacity >= theta
        });
        if hot {
            let util = last.loads.get(&link.id).copied().unwrap_or(0.0) / link.capacity;
            dosed.push((link.id.clone(), util));
        }
    }
    CongestionReport {
        tick: last.tick,
        dosed_links: dosed,
        window: (
            samples.first().expect("non-empty window").tick,
            last.tick,
        ),
    }
}

/// Score every source with at least one observed flow crossing a DoS'ed
/// link: +1 base, plus `beta` when a previously diverted source shows up in
/// a (destination, link) combination not explained by any diverted record.
pub fn record_sources(
    report: &CongestionReport,
    flows: &[TrafficSample],
    routing: &RoutingState,
    topo: &Topology,
    ledger: &mut SuspicionLedger,
    beta: f64,
    obs_tick: u64,
) {
    let dosed = report.link_ids();
    let mut per_source: BTreeMap<HostId, BTreeSet<(HostId, LinkId)>> = BTreeMap::new();
    for flow in flows {
        if flow.rate <= 0.0 {
            continue;
        }
        let Some(path) = routing.host_path(topo, &flow.src, &flow.dst) else {
            continue;
        };
        for link in path.iter().filter(|l| dosed.contains(l)) {
            per_source
                .entry(flow.src.clone())
                .or_default()
                .insert((flow.dst.clone(), link.clone()));
        }
    }
    for (src, seen) in per_source {
        let record = ledger.entry(&src);
        record.score += 1.0;
        let returning = !record.diverted.is_empty()
            && seen.iter().any(|pair| !record.diverted.contains(pair));
        if returning {
            record.score += beta;
        }
        let mut links: BTreeSet<LinkId> = seen.into_iter().map(|(_, l)| l).collect();
        for link in std::mem::take(&mut links) {
            record.observations.push((obs_tick, link));
        }
    }
}

/// Pick destinations to divert off the reported links until every reported
/// link's predicted utilization drops below `theta`, or no divertible
/// destination remains (best-effort). The avoid set of every action is the
/// full set of reported links, so one batch never pushes load from one
/// DoS'ed link onto another.
pub fn choose_reroutes(
    report: &CongestionReport,
    routing: &RoutingState,
    topo: &Topology,
    flows: &[TrafficSample],
    strategy: Strategy,
    rng: &mut StdRng,
    theta: f64,
) -> Result<ReroutePlan, DefenderError> {
    assert!(!report.is_empty(), "choose_reroutes on an empty report");
    let avoid = report.link_ids();
    let as_flows: Vec<Flow> = flows.iter().map(TrafficSample::as_flow).collect();

    let mut trial = routing.clone();
    let mut actions: Vec<(HostId, BTreeSet<LinkId>)> = Vec::new();
    let mut diverted: BTreeSet<HostId> = BTreeSet::new();

    loop {
        let predicted = link_loads(&trial, topo, &as_flows)
            .expect("observed traffic stays routable during trial reroutes");
        let hot: BTreeSet<LinkId> = avoid
            .iter()
            .filter(|l| {
                let cap = topo.link(l).expect("reported link exists").capacity;
                predicted.get(*l).copied().unwrap_or(0.0) / cap >= theta
            })
            .cloned()
            .collect();
        if hot.is_empty() {
            return Ok(ReroutePlan {
                batch_tick: report.tick,
                actions,
                predicted_loads: predicted,
                best_effort: false,
            });
        }

        // Destinations whose observed traffic crosses a still-hot link and
        // that can actually be diverted without disconnecting anyone.
        let mut per_dest: BTreeMap<HostId, BTreeMap<HostId, f64>> = BTreeMap::new();
        for flow in flows {
            if flow.rate <= 0.0 || diverted.contains(&flow.dst) {
                continue;
            }
            let Some(path) = trial.host_path(topo, &flow.src, &flow.dst) else {
                continue;
            };
            if path.iter().any(|l| hot.contains(l)) {
                *per_dest
                    .entry(flow.dst.clone())
                    .or_default()
                    .entry(flow.src.clone())
                    .or_insert(0.0) += flow.rate;
            }
        }
        let candidates: Vec<(HostId, BTreeMap<HostId, f64>)> = per_dest
            .into_iter()
            .filter(|(dst, _)| reroute_destination(&trial, topo, dst, &avoid).is_ok())
            .collect();

        if candidates.is_empty() {
            if actions.is_empty() {
                return Err(DefenderError::NoCandidates);
            }
            return Ok(ReroutePlan {
                batch_tick: report.tick,
                actions,
                predicted_loads: predicted,
                best_effort: true,
            });
        }

        let chosen = match strategy {
            Strategy::Random => {
                let idx = rng.random_range(0..candidates.len());
                candidates[idx].0.clone()
            }
            Strategy::Homogeneous => {
                let mut ranked: Vec<(f64, &HostId)> = candidates
                    .iter()
                    .map(|(dst, per_src)| (variance(per_src.values().copied()), dst))
                    .collect();
                ranked.sort_by(|a, b| {
                    a.0.partial_cmp(&b.0)
                        .expect("finite variances")
                        .then_with(|| a.1.cmp(b.1))
                });
                ranked[0].1.clone()
            }
        };
        trial = reroute_destination(&trial, topo, &chosen, &avoid)
            .expect("candidate divertibility was checked");
        diverted.insert(chosen.clone());
        actions.push((chosen, avoid.clone()));
    }
}

fn variance(values: impl Iterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.collect();
    if values.is_empty() {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64
}

/// Record a (destination, link) diverted entry for every source that had a
/// flow to a rerouted destination crossing one of the avoided links.
pub fn mark_diverted(
    plan: &ReroutePlan,
    flows: &[TrafficSample],
    routing_before: &RoutingState,
    topo: &Topology,
    ledger: &mut SuspicionLedger,
) {
    for (dst, avoid) in &plan.actions {
        for flow in flows.iter().filter(|f| &f.dst == dst && f.rate > 0.0) {
            let Some(path) = routing_before.host_path(topo, &flow.src, dst) else {
                continue;
            };
            for link in path.iter().filter(|l| avoid.contains(l)) {
                ledger
                    .entry(&flow.src)
                    .diverted
                    .insert((dst.clone(), link.clone()));
            }
        }
    }
}

/// Sources whose score crossed the threshold and are not yet limited; marks
/// them limited so they are never emitted twice.
pub fn select_rate_limits(ledger: &mut SuspicionLedger, s_threshold: f64) -> BTreeSet<HostId> {
    let mut out = BTreeSet::new();
    for (src, record) in ledger.sources.iter_mut() {
        if !record.limited && record.score >= s_threshold {
            record.limited = true;
            out.insert(src.clone());
        }
    }
    out
}

/// Accumulated state of one batch window: the DoS'ed links collected so far
/// and the traffic snapshot from the latest tick any of them was hot.
#[derive(Debug, Clone)]
struct BatchContext {
    dosed: BTreeMap<LinkId, f64>,
    window: (u64, u64),
    obs_tick: u64,
    obs_traffic: Vec<TrafficSample>,
}

#[derive(Debug, Clone)]
enum Phase {
    Idle,
    Batching { decide_at: u64, ctx: BatchContext },
    AwaitCommit {
        commit_at: u64,
        plans: Vec<ReroutePlan>,
    },
}

/// What one defender step asks the engine to actuate.
#[derive(Debug, Default)]
pub struct DefenderStepResult {
    /// Reroute plans to commit this tick (each is one atomic version bump).
    pub commits: Vec<ReroutePlan>,
    pub new_limits: BTreeSet<HostId>,
    pub best_effort: bool,
}

/// Defender state machine, owned by one simulation instance.
#[derive(Debug, Clone)]
pub struct DefenderState {
    samples: VecDeque<LoadSample>,
    phase: Phase,
    ledger: SuspicionLedger,
}

impl DefenderState {
    pub fn new() -> Self {
        Self {
            samples: VecDeque::new(),
            phase: Phase::Idle,
            ledger: SuspicionLedger::default(),
        }
    }

    pub fn ledger(&self) -> &SuspicionLedger {
        &self.ledger
    }

    fn window(&self, len: u64) -> Vec<&LoadSample> {
        let len = (len as usize).min(self.samples.len());
        self.samples.iter().skip(self.samples.len() - len).collect()
    }

    /// Fold the newest samples into the batch: union freshly detected links
    /// and move the observation snapshot to the latest hot tick.
    fn refresh_observation(&self, params: &DefenderParams, topo: &Topology, ctx: &mut BatchContext) {
        if self.samples.len() < params.d as usize {
            return;
        }
        let report = monitor(&self.window(params.d), topo, params.theta_dos, params.d);
        if report.is_empty() {
            return;
        }
        for (link, util) in &report.dosed_links {
            ctx.dosed.insert(link.clone(), *util);
        }
        let last = self.samples.back().expect("non-empty buffer");
        ctx.obs_tick = last.tick;
        ctx.obs_traffic = last.traffic.clone();
    }

    fn decide(
        &mut self,
        tick: u64,
        ctx: BatchContext,
        routing: &RoutingState,
        topo: &Topology,
        params: &DefenderParams,
        rng: &mut StdRng,
    ) -> Vec<ReroutePlan> {
        let report = CongestionReport {
            tick,
            dosed_links: ctx.dosed.iter().map(|(l, u)| (l.clone(), *u)).collect(),
            window: ctx.window,
        };
        record_sources(
            &report,
            &ctx.obs_traffic,
            routing,
            topo,
            &mut self.ledger,
            params.beta,
            ctx.obs_tick,
        );

        if params.per_link_handling {
            // Test hook: naive per-link mitigation with separate commits and
            // per-link avoid sets, the behaviour joint batching exists to
            // prevent.
            let mut trial = routing.clone();
            let mut plans = Vec::new();
            for (link, util) in &ctx.dosed {
                let sub = CongestionReport {
                    tick,
                    dosed_links: vec![(link.clone(), *util)],
                    window: ctx.window,
                };
                match choose_reroutes(
                    &sub,
                    &trial,
                    topo,
                    &ctx.obs_traffic,
                    params.strategy,
                    rng,
                    params.theta_dos,
                ) {
                    Ok(plan) if !plan.actions.is_empty() => {
                        mark_diverted(&plan, &ctx.obs_traffic, &trial, topo, &mut self.ledger);
                        trial = commit_reroutes(&trial, topo, &plan.actions)
                            .expect("divertibility checked per action");
                        plans.push(plan);
                    }
                    Ok(_) | Err(DefenderError::NoCandidates) => {}
                }
            }
            plans
        } else {
            match choose_reroutes(
                &report,
                routing,
                topo,
                &ctx.obs_traffic,
                params.strategy,
                rng,
                params.theta_dos,
            ) {
                Ok(plan) if !plan.actions.is_empty() => {
                    mark_diverted(&plan, &ctx.obs_traffic, routing, topo, &mut self.ledger);
                    vec![plan]
                }
                Ok(_) => Vec::new(),
                // Nothing can be diverted; log-and-continue semantics.
                Err(DefenderError::NoCandidates) => Vec::new(),
            }
        }
    }

    /// Advance the defender by one tick given this tick's loads and traffic.
    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &mut self,
        tick: u64,
        loads: &BTreeMap<LinkId, f64>,
        traffic: &[TrafficSample],
        routing: &RoutingState,
        topo: &Topology,
        params: &DefenderParams,
        rng: &mut StdRng,
    ) -> DefenderStepResult {
        let mut result = DefenderStepResult::default();

        loop {
            match std::mem::replace(&mut self.phase, Phase::Idle) {
                Phase::Idle => {
                    let due = tick > 0
                        && tick.is_multiple_of(params.t_d)
                        && self.samples.len() >= params.d as usize;
                    if due {
                        let report = monitor(
                            &self.window(params.t_d),
                            topo,
                            params.theta_dos,
                            params.d,
                        );
                        if !report.is_empty() {
                            let last = self.samples.back().expect("non-empty buffer");
                            self.phase = Phase::Batching {
                                decide_at: tick + params.batch_delay,
                                ctx: BatchContext {
                                    dosed: report.dosed_links.iter().cloned().collect(),
                                    window: report.window,
                                    obs_tick: last.tick,
                                    obs_traffic: last.traffic.clone(),
                                },
                            };
                            continue;
                        }
                    }
                    break;
                }
                Phase::Batching { decide_at, mut ctx } => {
                    if tick < decide_at {
                        self.refresh_observation(params, topo, &mut ctx);
                        self.phase = Phase::Batching { decide_at, ctx };
                        break;
                    }
                    let plans = self.decide(tick, ctx, routing, topo, params, rng);
                    self.phase = Phase::AwaitCommit {
                        commit_at: tick + params.control_delay,
                        plans,
                    };
                    continue;
                }
                Phase::AwaitCommit { commit_at, plans } => {
                    if tick >= commit_at {
                        result.best_effort = plans.iter().any(|p| p.best_effort);
                        result.commits = plans;
                        if let Some(threshold) = params.s_threshold {
                            result.new_limits = select_rate_limits(&mut self.ledger, threshold);
                        }
                        // Phase stays Idle; next grid monitor picks up from here.
                    } else {
                        self.phase = Phase::AwaitCommit { commit_at, plans };
                    }
                    break;
                }
            }
        }

        self.samples.push_back(LoadSample {
            tick,
            loads: loads.clone(),
            traffic: traffic.to_vec(),
        });
        let keep = params.t_d.max(params.d) as usize;
        while self.samples.len() > keep {
            self.samples.pop_front();
        }
        result
    }
}

impl Default for DefenderState {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{
        build_initial_routing, load_topology, HostRole, HostSpec, LinkSpec, TopologySpec,
    };
    use rand::SeedableRng;

    fn rng() -> StdRng {
        StdRng::seed_from_u64(7)
    }

    fn one_link_topo() -> Topology {
        load_topology(&TopologySpec {
            nodes: vec!["a".into(), "b".into()],
            links: vec![LinkSpec {
                id: "l1".into(),
                src: "a".into(),
                dst: "b".into(),
                capacity: 10.0,
                directed: true,
            }],
            hosts: vec![
                HostSpec {
                    id: "s".into(),
                    attach: "a".into(),
                    role: HostRole::Benign,
                },
                HostSpec {
                    id: "t".into(),
                    attach: "b".into(),
                    role: HostRole::Benign,
                },
            ],
        })
        .unwrap()
    }

    fn sample(tick: u64, load: f64) -> LoadSample {
        LoadSample {
            tick,
            loads: BTreeMap::from([(LinkId::from("l1"), load)]),
            traffic: vec![],
        }
    }

    #[test]
    fn monitor_flags_utilization_at_threshold() {
        let topo = one_link_topo();
        let s = sample(0, 9.6);
        let report = monitor(&[&s], &topo, 0.95, 1);
        assert_eq!(report.dosed_links.len(), 1);
        assert_eq!(report.dosed_links[0].0.as_str(), "l1");
        assert!((report.dosed_links[0].1 - 0.96).abs() < 1e-12);
    }

    #[test]
    fn monitor_requires_consecutive_samples_ending_at_last() {
        let topo = one_link_topo();
        let (s0, s1, s2) = (sample(0, 9.6), sample(1, 2.0), sample(2, 9.6));
        // No two consecutive hot samples ending at the newest one.
        let report = monitor(&[&s0, &s1, &s2], &topo, 0.95, 2);
        assert!(report.is_empty());
        // Hot run that does not reach the newest sample does not count either.
        let (s3, s4, s5) = (sample(0, 9.6), sample(1, 9.6), sample(2, 2.0));
        assert!(monitor(&[&s3, &s4, &s5], &topo, 0.95, 2).is_empty());
        // Two hot samples ending at the newest do.
        let (s6, s7) = (sample(1, 9.6), sample(2, 9.5));
        assert!(!monitor(&[&s0, &s6, &s7], &topo, 0.95, 2).is_empty());
    }

    #[test]
    fn figure1_full_attack_plan_doses_exactly_the_target_link() {
        use crate::attacker::{assign_bot_flows, flow_density, probe_linkmap, select_target_links};
        let (topo, routing) = crate::scenario::figure1_network();
        let bots = topo.hosts_with_role(HostRole::Bot);
        let mut dests = topo.hosts_with_role(HostRole::Decoy);
        dests.extend(topo.hosts_with_role(HostRole::TargetArea));
        let (lm, _) = probe_linkmap(&routing, &topo, &bots, &dests, 0);
        let density = flow_density(&lm);
        let targets = select_target_links(&density, &topo, &lm, 1).unwrap();
        let plan = assign_bot_flows(&targets, &lm, &topo, 1.0, 1.0, 0).unwrap();
        let loads = link_loads(&routing, &topo, &plan.flows()).unwrap();
        let s = LoadSample {
            tick: 0,
            loads,
            traffic: vec![],
        };
        let report = monitor(&[&s], &topo, 0.95, 1);
        let dosed: Vec<&str> = report.dosed_links.iter().map(|(l, _)| l.as_str()).collect();
        assert_eq!(dosed, vec!["e12_fwd"]);
    }

    fn report_for(links: &[&str], tick: u64) -> CongestionReport {
        CongestionReport {
            tick,
            dosed_links: links.iter().map(|l| (LinkId::from(*l), 1.0)).collect(),
            window: (tick, tick),
        }
    }

    fn ts(src: &str, dst: &str, rate: f64) -> TrafficSample {
        TrafficSample {
            src: src.into(),
            dst: dst.into(),
            rate,
        }
    }

    #[test]
    fn first_observation_scores_one() {
        let topo = one_link_topo();
        let routing = build_initial_routing(&topo);
        let mut ledger = SuspicionLedger::default();
        record_sources(
            &report_for(&["l1"], 5),
            &[ts("s", "t", 3.0)],
            &routing,
            &topo,
            &mut ledger,
            2.0,
            5,
        );
        assert_eq!(ledger.score(&"s".into()), 1.0);
        assert!(!ledger.record(&"s".into()).unwrap().limited);
    }

    #[test]
    fn returning_source_gets_the_bonus() {
        // Diverted (D2 away from L_T), then observed on L_T via D1:
        // 1 (earlier) + 1 + beta = 4 with beta = 2.
        let topo = crate::scenario::figure1_network().0;
        let routing = build_initial_routing(&topo);
        let mut ledger = SuspicionLedger::default();
        ledger.entry(&"b01".into()).score = 1.0;
        ledger
            .entry(&"b01".into())
            .diverted
            .insert(("D2".into(), "e12_fwd".into()));
        record_sources(
            &report_for(&["e12_fwd"], 9),
            &[ts("b01", "D1", 1.0)],
            &routing,
            &topo,
            &mut ledger,
            2.0,
            9,
        );
        assert_eq!(ledger.score(&"b01".into()), 4.0);
    }

    #[test]
    fn source_never_on_a_dosed_link_stays_at_zero() {
        let topo = one_link_topo();
        let routing = build_initial_routing(&topo);
        let mut ledger = SuspicionLedger::default();
        record_sources(
            &report_for(&["l1"], 5),
            &[],
            &routing,
            &topo,
            &mut ledger,
            2.0,
            5,
        );
        assert_eq!(ledger.score(&"s".into()), 0.0);
    }

    #[test]
    fn re_observation_of_a_recorded_divert_pair_is_not_returning() {
        let topo = one_link_topo();
        let routing = build_initial_routing(&topo);
        let mut ledger = SuspicionLedger::default();
        ledger
            .entry(&"s".into())
            .diverted
            .insert(("t".into(), "l1".into()));
        record_sources(
            &report_for(&["l1"], 5),
            &[ts("s", "t", 3.0)],
            &routing,
            &topo,
            &mut ledger,
            2.0,
            5,
        );
        // Base increment only; the (t, l1) combination was already recorded.
        assert_eq!(ledger.score(&"s".into()), 1.0);
    }

    fn diverted_diamond() -> (Topology, RoutingState) {
        let topo = load_topology(&TopologySpec {
            nodes: vec!["a".into(), "b".into(), "c".into()],
            links: vec![
                LinkSpec {
                    id: "l_ab".into(),
                    src: "a".into(),
                    dst: "b".into(),
                    capacity: 10.0,
                    directed: true,
                },
                LinkSpec {
                    id: "l_ac".into(),
                    src: "a".into(),
                    dst: "c".into(),
                    capacity: 100.0,
                    directed: true,
                },
                LinkSpec {
                    id: "l_cb".into(),
                    src: "c".into(),
                    dst: "b".into(),
                    capacity: 100.0,
                    directed: true,
                },
            ],
            hosts: vec![
                HostSpec {
                    id: "s1".into(),
                    attach: "a".into(),
                    role: HostRole::Benign,
                },
                HostSpec {
                    id: "d2".into(),
                    attach: "b".into(),
                    role: HostRole::Decoy,
                },
            ],
        })
        .unwrap();
        let routing = build_initial_routing(&topo);
        (topo, routing)
    }

    #[test]
    fn single_congested_link_with_alternate_path_yields_one_action() {
        let (topo, routing) = diverted_diamond();
        let flows = vec![ts("s1", "d2", 9.6)];
        let plan = choose_reroutes(
            &report_for(&["l_ab"], 4),
            &routing,
            &topo,
            &flows,
            Strategy::Homogeneous,
            &mut rng(),
            0.95,
        )
        .unwrap();
        assert_eq!(plan.actions.len(), 1);
        assert_eq!(plan.actions[0].0.as_str(), "d2");
        assert_eq!(
            plan.actions[0].1,
            BTreeSet::from([LinkId::from("l_ab")])
        );
        assert!(!plan.best_effort);
        let cap = topo.link(&"l_ab".into()).unwrap().capacity;
        assert!(plan.predicted_loads[&LinkId::from("l_ab")] / cap < 0.95);
    }

    #[test]
    fn homogeneous_strategy_prefers_low_variance_destinations() {
        // D_a fed by 10 bots at rate 1 each (variance 0) and D_b fed by one
        // source at rate 10 (variance 0 as well): the lexicographic tie-break
        // picks D_a first.
        let mut hosts = vec![
            HostSpec {
                id: "D_a".into(),
                attach: "b".into(),
                role: HostRole::Decoy,
            },
            HostSpec {
                id: "D_b".into(),
                attach: "b".into(),
                role: HostRole::Decoy,
            },
            HostSpec {
                id: "src".into(),
                attach: "a".into(),
                role: HostRole::Benign,
            },
        ];
        hosts.extend((0..10).map(|i| HostSpec {
            id: format!("bot{i}"),
            attach: "a".into(),
            role: HostRole::Benign,
        }));
        let topo = load_topology(&TopologySpec {
            nodes: vec!["a".into(), "b".into(), "c".into()],
            links: vec![
                LinkSpec {
                    id: "hot".into(),
                    src: "a".into(),
                    dst: "b".into(),
                    capacity: 20.0,
                    directed: true,
                },
                LinkSpec {
                    id: "z1".into(),
                    src: "a".into(),
                    dst: "c".into(),
                    capacity: 100.0,
                    directed: true,
                },
                LinkSpec {
                    id: "z2".into(),
                    src: "c".into(),
                    dst: "b".into(),
                    capacity: 100.0,
                    directed: true,
                },
            ],
            hosts,
        })
        .unwrap();
        let routing = build_initial_routing(&topo);
        let mut flows: Vec<TrafficSample> =
            (0..10).map(|i| ts(&format!("bot{i}"), "D_a", 1.0)).collect();
        flows.push(ts("src", "D_b", 10.0));
        let plan = choose_reroutes(
            &report_for(&["hot"], 4),
            &routing,
            &topo,
            &flows,
            Strategy::Homogeneous,
            &mut rng(),
            0.95,
        )
        .unwrap();
        assert_eq!(plan.actions[0].0.as_str(), "D_a");
        assert!(variance([1.0, 1.0, 1.0].into_iter()) == 0.0);
        assert!(variance([1.0, 9.0].into_iter()) > 0.0);
    }

    #[test]
    fn random_strategy_is_deterministic_under_a_fixed_seed() {
        let (topo, routing) = diverted_diamond();
        let flows = vec![ts("s1", "d2", 9.6)];
        let plan_a = choose_reroutes(
            &report_for(&["l_ab"], 4),
            &routing,
            &topo,
            &flows,
            Strategy::Random,
            &mut rng(),
            0.95,
        )
        .unwrap();
        let plan_b = choose_reroutes(
            &report_for(&["l_ab"], 4),
            &routing,
            &topo,
            &flows,
            Strategy::Random,
            &mut rng(),
            0.95,
        )
        .unwrap();
        assert_eq!(plan_a.actions, plan_b.actions);
    }

    #[test]
    fn no_candidates_when_every_reroute_disconnects() {
        let topo = one_link_topo();
        let routing = build_initial_routing(&topo);
        let flows = vec![ts("s", "t", 9.6)];
        let err = choose_reroutes(
            &report_for(&["l1"], 4),
            &routing,
            &topo,
            &flows,
            Strategy::Homogeneous,
            &mut rng(),
            0.95,
        )
        .unwrap_err();
        assert!(matches!(err, DefenderError::NoCandidates));
    }

    #[test]
    fn mark_diverted_records_only_crossing_sources() {
        let (topo, routing) = diverted_diamond();
        let plan = ReroutePlan {
            batch_tick: 4,
            actions: vec![("d2".into(), BTreeSet::from([LinkId::from("l_ab")]))],
            predicted_loads: BTreeMap::new(),
            best_effort: false,
        };
        let mut ledger = SuspicionLedger::default();
        mark_diverted(
            &plan,
            &[ts("s1", "d2", 9.6)],
            &routing,
            &topo,
            &mut ledger,
        );
        let record = ledger.record(&"s1".into()).unwrap();
        assert!(record
            .diverted
            .contains(&("d2".into(), "l_ab".into())));
        // Diverted alone is not suspicious.
        assert_eq!(record.score, 0.0);
    }

    #[test]
    fn mark_diverted_skips_sources_not_via_the_avoided_link() {
        let (topo, mut routing) = diverted_diamond();
        // Put d2 on the detour first so s1's path avoids l_ab already.
        routing = reroute_destination(
            &routing,
            &topo,
            &"d2".into(),
            &BTreeSet::from([LinkId::from("l_ab")]),
        )
        .unwrap();
        let plan = ReroutePlan {
            batch_tick: 4,
            actions: vec![("d2".into(), BTreeSet::from([LinkId::from("l_ab")]))],
            predicted_loads: BTreeMap::new(),
            best_effort: false,
        };
        let mut ledger = SuspicionLedger::default();
        mark_diverted(&plan, &[ts("s1", "d2", 9.6)], &routing, &topo, &mut ledger);
        assert!(ledger.record(&"s1".into()).is_none());
    }

    #[test]
    fn rate_limits_fire_once_at_the_threshold() {
        let mut ledger = SuspicionLedger::default();
        ledger.entry(&"b1".into()).score = 4.0;
        ledger.entry(&"b2".into()).score = 2.0;
        ledger.entry(&"h9".into()).score = 0.0;
        let limits = select_rate_limits(&mut ledger, 3.0);
        assert_eq!(limits, BTreeSet::from([HostId::from("b1")]));
        // Growing score does not re-emit an already limited source.
        ledger.entry(&"b1".into()).score = 10.0;
        assert!(select_rate_limits(&mut ledger, 3.0).is_empty());
    }

    #[test]
    fn empty_ledger_selects_nothing() {
        let mut ledger = SuspicionLedger::default();
        assert!(select_rate_limits(&mut ledger, 3.0).is_empty());
    }

    fn defender_params(t_d: u64, batch_delay: u64, control_delay: u64, d: u64) -> DefenderParams {
        DefenderParams {
            theta_dos: 0.95,
            d,
            t_d,
            batch_delay,
            control_delay,
            strategy: Strategy::Homogeneous,
            beta: 2.0,
            s_threshold: Some(3.0),
            rho: 0.0,
            per_link_handling: false,
        }
    }

    #[test]
    fn quiescent_steps_only_do_window_bookkeeping() {
        let (topo, routing) = diverted_diamond();
        let params = defender_params(4, 2, 1, 1);
        let mut state = DefenderState::new();
        let mut r = rng();
        for tick in 0..40 {
            let loads = BTreeMap::from([(LinkId::from("l_ab"), 1.0)]);
            let out = state.step(tick, &loads, &[], &routing, &topo, &params, &mut r);
            assert!(out.commits.is_empty());
            assert!(out.new_limits.is_empty());
        }
    }

    /// One DoS'ed link with T_d=4, batch_delay=2, control_delay=1: the
    /// reroute is committed 7 ticks after flooding starts (flood aligned to
    /// the monitoring grid).
    #[test]
    fn actuation_latency_decomposes_into_monitor_batch_control() {
        let (topo, routing) = diverted_diamond();
        let params = defender_params(4, 2, 1, 1);
        let mut state = DefenderState::new();
        let mut r = rng();
        let flood_start = 4u64;
        let mut commit_tick = None;
        for tick in 0..30 {
            let (load, traffic) = if tick >= flood_start {
                (9.6, vec![ts("s1", "d2", 9.6)])
            } else {
                (0.0, vec![])
            };
            let loads = BTreeMap::from([
                (LinkId::from("l_ab"), load),
                (LinkId::from("l_ac"), 0.0),
                (LinkId::from("l_cb"), 0.0),
            ]);
            let out = state.step(tick, &loads, &traffic, &routing, &topo, &params, &mut r);
            if !out.commits.is_empty() && commit_tick.is_none() {
                commit_tick = Some(tick);
            }
        }
        assert_eq!(commit_tick, Some(flood_start + 4 + 2 + 1));
    }

    /// Two links DoS'ed one tick apart with batch_delay=2 end up in a single
    /// joint plan covering both.
    #[test]
    fn nearby_dos_events_are_batched_into_one_plan() {
        let topo = load_topology(&TopologySpec {
            nodes: vec!["n1".into(), "na".into(), "nb".into(), "nc".into()],
            links: vec![
                LinkSpec {
                    id: "la".into(),
                    src: "n1".into(),
                    dst: "na".into(),
                    capacity: 10.0,
                    directed: true,
                },
                LinkSpec {
                    id: "lb".into(),
                    src: "n1".into(),
                    dst: "nb".into(),
                    capacity: 10.0,
                    directed: true,
                },
                LinkSpec {
                    id: "w1".into(),
                    src: "n1".into(),
                    dst: "nc".into(),
                    capacity: 100.0,
                    directed: true,
                },
                LinkSpec {
                    id: "wa".into(),
                    src: "nc".into(),
                    dst: "na".into(),
                    capacity: 100.0,
                    directed: true,
                },
                LinkSpec {
                    id: "wb".into(),
                    src: "nc".into(),
                    dst: "nb".into(),
                    capacity: 100.0,
                    directed: true,
                },
            ],
            hosts: vec![
                HostSpec {
                    id: "H_a".into(),
                    attach: "na".into(),
                    role: HostRole::Benign,
                },
                HostSpec {
                    id: "H_b".into(),
                    attach: "nb".into(),
                    role: HostRole::Benign,
                },
                HostSpec {
                    id: "src".into(),
                    attach: "n1".into(),
                    role: HostRole::Benign,
                },
            ],
        })
        .unwrap();
        let mut routing = build_initial_routing(&topo);
        let params = defender_params(4, 2, 0, 1);
        let mut state = DefenderState::new();
        let mut r = rng();
        let mut all_commits: Vec<(u64, Vec<ReroutePlan>)> = Vec::new();
        for tick in 0..20 {
            let mut traffic = vec![];
            if tick >= 3 {
                traffic.push(ts("src", "H_a", 9.6));
            }
            if tick >= 4 {
                traffic.push(ts("src", "H_b", 9.6));
            }
            let flows: Vec<Flow> = traffic.iter().map(TrafficSample::as_flow).collect();
            let loads = link_loads(&routing, &topo, &flows).unwrap();
            let out = state.step(tick, &loads, &traffic, &routing, &topo, &params, &mut r);
            for plan in &out.commits {
                routing = commit_reroutes(&routing, &topo, &plan.actions).unwrap();
            }
            if !out.commits.is_empty() {
                all_commits.push((tick, out.commits));
            }
        }
        assert_eq!(all_commits.len(), 1, "one batch, one commit");
        let (_, plans) = &all_commits[0];
        assert_eq!(plans.len(), 1, "a single joint plan");
        let dsts: BTreeSet<&str> = plans[0]
            .actions
            .iter()
            .map(|(d, _)| d.as_str())
            .collect();
        assert_eq!(dsts, BTreeSet::from(["H_a", "H_b"]));
        let avoid: BTreeSet<LinkId> =
            BTreeSet::from([LinkId::from("la"), LinkId::from("lb")]);
        for (_, a) in &plans[0].actions {
            assert_eq!(a, &avoid, "joint avoid set covers the whole batch");
        }
    }
}
