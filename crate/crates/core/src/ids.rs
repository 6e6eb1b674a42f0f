//! Newtype identifiers for the three kinds of named things in a scenario.
//!
//! All IDs are opaque strings. They order lexicographically, which is the
//! tie-break used everywhere determinism matters.

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(
            Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash,
            serde::Serialize, serde::Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

id_type!(
    /// A switch/router in the topology.
    NodeId
);
id_type!(
    /// A directed link between two nodes.
    LinkId
);
id_type!(
    /// An end host attached to a node (bot, benign source, decoy, ...).
    HostId
);
