//! Flow generation for the three benign source classes and rate-limit
//! application. Attack flows are produced by the attacker module; probe
//! flows carry zero rate and never contribute to load.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ids::HostId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowClass {
    Attack,
    Benign,
    FlashCrowd,
    Probe,
}

/// One unidirectional flow for one tick. `active` drops to false once the
/// source is rate-limited with a zero residual; `limited` remembers that the
/// limit was already applied so re-application cannot compound.
#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub src: HostId,
    pub dst: HostId,
    pub rate: f64,
    pub class: FlowClass,
    pub active: bool,
    pub limited: bool,
}

impl Flow {
    pub fn new(src: HostId, dst: HostId, rate: f64, class: FlowClass) -> Self {
        Self {
            src,
            dst,
            rate,
            class,
            active: true,
            limited: false,
        }
    }
}

/// A constant background flow, fixed for the whole run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundFlow {
    pub src: String,
    pub dst: String,
    pub rate: f64,
}

/// A flash crowd: a burst of benign sources that all talk to the same fixed
/// popular destination set for the whole window and never re-adjust to
/// routing changes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlashCrowd {
    pub sources: Vec<String>,
    pub destinations: Vec<String>,
    pub per_source_rate: f64,
    pub start_tick: u64,
    pub end_tick: u64,
}

/// The traffic section of a scenario file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficProfile {
    #[serde(default)]
    pub background: Vec<BackgroundFlow>,
    #[serde(default)]
    pub flash_crowd: Option<FlashCrowd>,
}

/// Benign flows present at `tick`: all background flows, plus flash-crowd
/// flows when `start_tick <= tick < end_tick`. Flash sources pick their
/// destination round-robin by source index over the fixed destination set,
/// so the destination multiset is identical at every tick in the window.
pub fn flows_at(profile: &TrafficProfile, tick: u64) -> Vec<Flow> {
    let mut flows: Vec<Flow> = profile
        .background
        .iter()
        .map(|b| {
            Flow::new(
                HostId::from(b.src.as_str()),
                HostId::from(b.dst.as_str()),
                b.rate,
                FlowClass::Benign,
            )
        })
        .collect();
    if let Some(fc) = &profile.flash_crowd {
        if fc.start_tick <= tick && tick < fc.end_tick && !fc.destinations.is_empty() {
            for (i, src) in fc.sources.iter().enumerate() {
                let dst = &fc.destinations[i % fc.destinations.len()];
                flows.push(Flow::new(
                    HostId::from(src.as_str()),
                    HostId::from(dst.as_str()),
                    fc.per_source_rate,
                    FlowClass::FlashCrowd,
                ));
            }
        }
    }
    flows
}

/// Apply rate limits to flows from `limited` sources. With residual fraction
/// `rho == 0` (the default policy) limited flows go inactive at rate 0; with
/// `rho > 0` they stay active at `rho` times their rate. Idempotent: a flow
/// already marked limited is left alone, so rates never compound and never
/// increase.
pub fn apply_rate_limits(flows: Vec<Flow>, limited: &BTreeSet<HostId>, rho: f64) -> Vec<Flow> {
    flows
        .into_iter()
        .map(|mut flow| {
            if limited.contains(&flow.src) && !flow.limited {
                flow.limited = true;
                flow.rate *= rho;
                flow.active = flow.rate > 0.0;
            }
            flow
        })
        .collect()
}
