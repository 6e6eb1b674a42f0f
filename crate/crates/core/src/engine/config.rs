//! Scenario configuration: file schema, parsing and validation.
//!
//! A scenario file is one JSON document with sections `topology`, `traffic`,
//! `attacker`, `defender` and `sim`. Unknown keys are rejected everywhere.

use serde::{Deserialize, Serialize};

use crate::attacker::AttackerParams;
use crate::defender::DefenderParams;
use crate::netmodel::{
    build_initial_routing, load_topology, HostRole, Topology, TopologyError, TopologySpec,
};
use crate::traffic::TrafficProfile;

/// Run-control section.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimParams {
    pub total_ticks: u64,
    pub rng_seed: u64,
}

/// A complete scenario file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub topology: TopologySpec,
    #[serde(default)]
    pub traffic: TrafficProfile,
    pub attacker: AttackerParams,
    pub defender: DefenderParams,
    pub sim: SimParams,
}

impl ScenarioSpec {
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json_string(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("scenario serializes");
        out.push('\n');
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("failed to parse scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("invalid field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_owned(),
        reason: reason.into(),
    }
}

/// A validated, runnable configuration.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub topology: Topology,
    pub traffic: TrafficProfile,
    pub attacker: AttackerParams,
    pub defender: DefenderParams,
    pub total_ticks: u64,
    pub rng_seed: u64,
}

impl SimConfig {
    /// Validate a parsed scenario. Every violation names the offending
    /// config field.
    pub fn from_spec(spec: &ScenarioSpec) -> Result<Self, ConfigError> {
        let topology = load_topology(&spec.topology)?;

        let sim = &spec.sim;
        if sim.total_ticks < 1 {
            return Err(invalid("sim.total_ticks", "must be at least 1"));
        }

        let a = &spec.attacker;
        if a.k < 1 {
            return Err(invalid("attacker.k", "must be at least 1"));
        }
        if a.bot_rate_cap <= 0.0 || !a.bot_rate_cap.is_finite() {
            return Err(invalid("attacker.bot_rate_cap", "must be positive"));
        }
        if a.attack_margin <= 0.0 || !a.attack_margin.is_finite() {
            return Err(invalid("attacker.attack_margin", "must be positive"));
        }
        if a.t_a < 1 {
            return Err(invalid("attacker.t_a", "must be at least 1 tick"));
        }
        if a.probe_duration < 1 {
            return Err(invalid("attacker.probe_duration", "must be at least 1 tick"));
        }

        let d = &spec.defender;
        if d.theta_dos <= 0.0 || !d.theta_dos.is_finite() {
            return Err(invalid("defender.theta_dos", "must be positive"));
        }
        if d.d < 1 {
            return Err(invalid("defender.d", "must be at least 1 sample"));
        }
        if d.t_d < 1 {
            return Err(invalid("defender.t_d", "must be at least 1 tick"));
        }
        if d.d > d.t_d {
            return Err(invalid(
                "defender.d",
                "sustained-sample count cannot exceed the monitoring window t_d",
            ));
        }
        if d.beta < 0.0 || !d.beta.is_finite() {
            return Err(invalid("defender.beta", "must be non-negative"));
        }
        if let Some(s) = d.s_threshold {
            if s <= 0.0 {
                return Err(invalid(
                    "defender.s_threshold",
                    "must be positive (or null to disable rate-limiting)",
                ));
            }
        }
        if !(0.0..=1.0).contains(&d.rho) {
            return Err(invalid("defender.rho", "must lie in [0, 1]"));
        }

        let routing = build_initial_routing(&topology);
        for (i, bg) in spec.traffic.background.iter().enumerate() {
            let field = format!("traffic.background[{i}]");
            if bg.rate < 0.0 || !bg.rate.is_finite() {
                return Err(invalid(&field, "rate must be non-negative"));
            }
            for host in [&bg.src, &bg.dst] {
                if topology.host(&host.as_str().into()).is_none() {
                    return Err(invalid(&field, format!("unknown host `{host}`")));
                }
            }
            if routing
                .host_path(&topology, &bg.src.as_str().into(), &bg.dst.as_str().into())
                .is_none()
            {
                return Err(invalid(
                    &field,
                    format!("`{}` cannot reach `{}`", bg.src, bg.dst),
                ));
            }
        }
        if let Some(fc) = &spec.traffic.flash_crowd {
            if fc.per_source_rate < 0.0 || !fc.per_source_rate.is_finite() {
                return Err(invalid(
                    "traffic.flash_crowd.per_source_rate",
                    "must be non-negative",
                ));
            }
            if fc.start_tick > fc.end_tick {
                return Err(invalid(
                    "traffic.flash_crowd.start_tick",
                    "window start exceeds its end",
                ));
            }
            if !fc.sources.is_empty() && fc.destinations.is_empty() {
                return Err(invalid(
                    "traffic.flash_crowd.destinations",
                    "must be non-empty when sources are present",
                ));
            }
            for host in fc.sources.iter().chain(fc.destinations.iter()) {
                if topology.host(&host.as_str().into()).is_none() {
                    return Err(invalid(
                        "traffic.flash_crowd",
                        format!("unknown host `{host}`"),
                    ));
                }
            }
            for (i, src) in fc.sources.iter().enumerate() {
                let dst = &fc.destinations[i % fc.destinations.len()];
                if routing
                    .host_path(&topology, &src.as_str().into(), &dst.as_str().into())
                    .is_none()
                {
                    return Err(invalid(
                        "traffic.flash_crowd",
                        format!("`{src}` cannot reach `{dst}`"),
                    ));
                }
            }
        }

        // An attack scenario needs something to attack and somewhere to hide.
        let bots = topology.hosts_with_role(HostRole::Bot);
        if !bots.is_empty() {
            if topology.hosts_with_role(HostRole::Decoy).is_empty() {
                return Err(invalid(
                    "topology.hosts",
                    "bots present but no decoy-role host",
                ));
            }
            if topology.hosts_with_role(HostRole::TargetArea).is_empty() {
                return Err(invalid(
                    "topology.hosts",
                    "bots present but no target_area-role host",
                ));
            }
        }

        Ok(Self {
            topology,
            traffic: spec.traffic.clone(),
            attacker: spec.attacker.clone(),
            defender: spec.defender.clone(),
            total_ticks: sim.total_ticks,
            rng_seed: sim.rng_seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario;

    #[test]
    fn canonical_scenario_validates() {
        let spec = scenario::figure1_spec();
        let cfg = SimConfig::from_spec(&spec).unwrap();
        assert_eq!(cfg.total_ticks, 2000);
    }

    #[test]
    fn zero_total_ticks_is_invalid() {
        let mut spec = scenario::figure1_spec();
        spec.sim.total_ticks = 0;
        match SimConfig::from_spec(&spec) {
            Err(ConfigError::Invalid { field, .. }) => assert_eq!(field, "sim.total_ticks"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn missing_topology_section_names_the_field() {
        let err = ScenarioSpec::from_json_str(r#"{"traffic": {}}"#).unwrap_err();
        assert!(err.to_string().contains("topology"));
    }

    #[test]
    fn background_flow_to_unknown_host_is_invalid() {
        let mut spec = scenario::figure1_spec();
        spec.traffic.background.push(crate::traffic::BackgroundFlow {
            src: "b01".into(),
            dst: "ghost".into(),
            rate: 1.0,
        });
        assert!(matches!(
            SimConfig::from_spec(&spec),
            Err(ConfigError::Invalid { .. })
        ));
    }

    #[test]
    fn scenario_round_trips_through_json() {
        let spec = scenario::figure1_spec();
        let text = spec.to_json_string();
        let reparsed = ScenarioSpec::from_json_str(&text).unwrap();
        assert_eq!(text, reparsed.to_json_string());
    }
}
