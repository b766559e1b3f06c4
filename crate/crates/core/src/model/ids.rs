use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! opaque_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }
    };
}

opaque_id!(
    /// Observation identifier, unique within a corpus.
    EventId
);
opaque_id!(StatementId);
opaque_id!(GateId);
opaque_id!(NodeId);

/// Hands out tree-unique ids. Ids never encode content, so a statement keeps
/// its identity when it moves between nodes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdAllocator {
    next: u64,
}

impl IdAllocator {
    fn bump(&mut self) -> u64 {
        let n = self.next;
        self.next += 1;
        n
    }

    pub fn node(&mut self) -> NodeId {
        NodeId(format!("n{}", self.bump()))
    }

    pub fn statement(&mut self) -> StatementId {
        StatementId(format!("s{}", self.bump()))
    }

    pub fn gate(&mut self) -> GateId {
        GateId(format!("g{}", self.bump()))
    }
}
