//! Deterministic discrete-time simulator of link-flooding attacks against a
//! centrally routed network, together with the rerouting/rate-limiting
//! defense that tries to keep the network uncongested and to identify the
//! flooding sources.
//!
//! The crate is organised around the two players and the fabric they fight
//! over:
//!
//! - [`netmodel`] — topology, per-destination sink-tree routing and link
//!   load computation. Pure value types; everything is deterministic with
//!   lexicographic tie-breaks.
//! - [`traffic`] — benign background and flash-crowd flow generation plus
//!   rate-limit application.
//! - [`attacker`] — the flooding attacker state machine: probes routes,
//!   picks target links by flow density, assigns bot flows to decoys and
//!   re-plans when routing changes under it.
//! - [`defender`] — the controller state machine: monitors link loads,
//!   batches congested links, reroutes destinations, records suspicious
//!   sources and issues rate limits.
//! - [`engine`] — the fixed-tick simulation loop, configuration and metrics.
//! - [`scenario`] — canned and randomly generated scenario files.
//!
//! A whole simulation is a pure function of its [`engine::SimConfig`]: two
//! runs with the same config (seed included) produce byte-identical traces.

pub mod attacker;
pub mod defender;
pub mod engine;
pub mod ids;
pub mod netmodel;
pub mod scenario;
pub mod traffic;

pub use ids::{HostId, LinkId, NodeId};
