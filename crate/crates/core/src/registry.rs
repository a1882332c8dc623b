//! Shipped problems and studies; their configs live in `configs/`.

use serde::Serialize;

use crate::config::Config;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryKind {
    Problem,
    Study,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Entry {
    pub id: &'static str,
    pub kind: EntryKind,
    /// The example the entry reproduces.
    pub example: &'static str,
    #[serde(skip)]
    pub source: &'static str,
}

impl Entry {
    pub fn config(&self) -> Result<Config> {
        Config::parse(self.source)
    }
}

macro_rules! entry {
    ($id:literal, $kind:ident, $example:literal) => {
        Entry {
            id: $id,
            kind: EntryKind::$kind,
            example: $example,
            source: include_str!(concat!("../configs/", $id, ".toml")),
        }
    };
}

/// Alphabetical by id.
pub static REGISTRY: &[Entry] = &[
    entry!("heat-cubic-frac", Study, "heat semigroup L^2 -> L^inf, cubic reaction, s = 2, W = X"),
    entry!("heat-cubic-s1", Study, "heat semigroup on L^2, cubic reaction, exponential Euler"),
    entry!("heat-cubic-s2", Study, "heat semigroup on L^2, cubic reaction, s = 2"),
    entry!("heat-linear", Study, "heat semigroup on L^2, g = 0"),
    entry!("heat-torus-1d", Problem, "Gaussian heat semigroup on the 1D torus"),
    entry!("heat-torus-2d", Problem, "Gaussian heat semigroup on the 2D torus"),
    entry!("ou-1d", Problem, "Ornstein-Uhlenbeck semigroup with b < 0"),
    entry!("ou-cubic-s1", Study, "Ornstein-Uhlenbeck semigroup, cubic reaction, exponential Euler"),
    entry!("wave-cubic-s2", Study, "wave equation in energy space, cubic term, s = 2"),
    entry!("wave-dirichlet-1d", Problem, "wave equation on (0, pi) in energy space"),
];

pub fn find(id: &str) -> Option<&'static Entry> {
    REGISTRY.iter().find(|e| e.id == id)
}
