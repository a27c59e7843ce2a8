//! Multi-iteration Ball-Larus path profiling.
//!
//! The pipeline has two decoupled stages. [`tracer`] replays basic-block
//! traces through Ball-Larus probes ([`cfg`], [`numbering`]) and emits a
//! stream of routine markers and acyclic path IDs. [`ksf`] consumes that
//! stream online into a k-slab forest, which [`kipf`] converts into the
//! k-iterations path forest: exact counts for every run of up to `k`
//! consecutive paths. [`oracle`] holds brute-force reference counts and
//! [`metrics`] the size/cost statistics.
//!
//! Path IDs are generic over the register word ([`PathWord`]); the aliases
//! below fix it to `u64`.
//!
//! ```
//! use kpathprof::{fixtures, kipf, ksf, Stream};
//!
//! let stream = Stream::parse(fixtures::EXAMPLE_STREAM)?;
//! let forest = ksf::build(&stream, 4)?;
//! let profile = kipf::make_k_ipf(&forest)?;
//! assert_eq!(profile.query(&[2, 0, 0, 2])?, 3);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod cfg;
pub mod fixtures;
pub mod kipf;
pub mod ksf;
pub mod metrics;
pub mod numbering;
pub mod oracle;
pub mod pipeline;
pub mod synth;
pub mod tracer;
mod word;

pub use word::PathWord;

pub use cfg::{parse_cfg, to_dag, Cfg, DagCfg};
pub use tracer::{Routine, StreamItem};

/// Default path-ID word.
pub type PathId = u64;
pub type Numbering = numbering::EdgeValues<PathId>;
pub type Stream = tracer::PathStream<PathId>;
pub type Item = tracer::StreamItem<PathId>;
pub type SlabForest = ksf::KSlabForest<PathId>;
pub type PathForest = kipf::KIpf<PathId>;
pub type NGrams = oracle::NGramTable<PathId>;

/// 32-bit variants, matching a 32-bit probe register.
pub type PathId32 = u32;
pub type Stream32 = tracer::PathStream<PathId32>;
pub type PathForest32 = kipf::KIpf<PathId32>;
