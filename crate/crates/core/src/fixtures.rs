//! Bundled example graphs, traces and streams.
//!
//! The files live under `crates/core/fixtures/` and are embedded so tests and
//! the CLI can use them without touching the filesystem.

use crate::cfg::{parse_cfg, Cfg};

pub const DL1_CFG: &str = include_str!("../fixtures/dl1.cfg");
/// DL1 with `B -> D` declared before `B -> C` and dummy edges visited first.
pub const DL1_ORDERED_CFG: &str = include_str!("../fixtures/dl1_ordered.cfg");
/// The 44-block single-invocation trace of DL1.
pub const DL1_EXAMPLE_TRACE: &str = include_str!("../fixtures/dl1_example.trace");
/// Path-ID stream produced by replaying [`DL1_EXAMPLE_TRACE`] on [`DL1_ORDERED_CFG`].
pub const EXAMPLE_STREAM: &str = include_str!("../fixtures/dl1_example.stream");
pub const STRAIGHT_CFG: &str = include_str!("../fixtures/straight.cfg");
pub const NESTED_CFG: &str = include_str!("../fixtures/nested.cfg");

/// IDs of [`EXAMPLE_STREAM`], without the leading marker.
pub const EXAMPLE_IDS: [u64; 14] = [6, 2, 0, 0, 2, 2, 0, 0, 2, 2, 0, 0, 2, 3];

pub fn dl1() -> Cfg {
    parse_cfg(DL1_CFG).expect("bundled fixture parses")
}

pub fn dl1_ordered() -> Cfg {
    parse_cfg(DL1_ORDERED_CFG).expect("bundled fixture parses")
}

pub fn straight() -> Cfg {
    parse_cfg(STRAIGHT_CFG).expect("bundled fixture parses")
}

pub fn nested() -> Cfg {
    parse_cfg(NESTED_CFG).expect("bundled fixture parses")
}

/// All bundled graphs.
pub fn all_cfgs() -> Vec<Cfg> {
    vec![dl1(), dl1_ordered(), straight(), nested()]
}
