//! Size and cost statistics for comparing plain Ball-Larus profiling with
//! k-iteration profiling on the same stream.
//!
//! Averages are exact rationals; [`to_float`] converts them for display.
//! Leaf depth counts roots as depth 1.

use std::collections::HashMap;

use num_rational::Ratio;
use num_traits::{Float, NumCast};
use serde::Serialize;

use crate::kipf::{make_k_ipf, KIpf, KipfError};
use crate::ksf::{self, KSlabForest};
use crate::tracer::{PathStream, Routine, StreamItem};
use crate::word::PathWord;

/// Hash-table path counter, `count[r]++` per emitted ID.
#[derive(Debug, Clone, Default)]
pub struct BlppProfiler<W> {
    counts: HashMap<(Routine, W), u64>,
    current: Routine,
    hash_ops: u64,
}

impl<W: PathWord> BlppProfiler<W> {
    pub fn new() -> Self {
        BlppProfiler {
            counts: HashMap::new(),
            current: Routine::anonymous(),
            hash_ops: 0,
        }
    }

    pub fn process(&mut self, item: &StreamItem<W>) {
        match item {
            StreamItem::Marker(r) => self.current = r.clone(),
            StreamItem::Path(id) => {
                self.hash_ops += 1;
                *self.counts.entry((self.current.clone(), *id)).or_insert(0) += 1;
            }
        }
    }

    pub fn table_entries(&self) -> usize {
        self.counts.len()
    }

    /// One lookup-and-update per ID.
    pub fn hash_ops(&self) -> u64 {
        self.hash_ops
    }

    /// Counters sorted by routine, then ID.
    pub fn into_counts(self) -> Vec<((Routine, W), u64)> {
        let mut v: Vec<_> = self.counts.into_iter().collect();
        v.sort();
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ProfileMetrics {
    pub k: usize,
    pub blpp_table_entries: u64,
    pub ksf_nodes: u64,
    pub ksf_roots: u64,
    pub kipf_nodes: u64,
    pub kipf_roots: u64,
    pub hash_finds: u64,
    pub hash_inserts: u64,
    /// δ: largest k-SF out-degree.
    pub max_degree: u64,
    /// Largest number of sibling visits spent on one stream item.
    pub max_item_visits: u64,
    #[serde(serialize_with = "ser_ratio")]
    pub avg_ksf_internal_degree: Option<Ratio<u64>>,
    #[serde(serialize_with = "ser_ratio")]
    pub avg_kipf_internal_degree: Option<Ratio<u64>>,
    #[serde(serialize_with = "ser_ratio")]
    pub avg_leaf_depth: Option<Ratio<u64>>,
    /// k-SF nodes over BLPP table entries.
    #[serde(serialize_with = "ser_ratio")]
    pub space_blowup: Option<Ratio<u64>>,
    /// k-IPF nodes over BLPP table entries.
    #[serde(serialize_with = "ser_ratio")]
    pub path_blowup: Option<Ratio<u64>>,
}

fn ser_ratio<S: serde::Serializer>(r: &Option<Ratio<u64>>, s: S) -> Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.serialize_f64(to_float(*r)),
        None => s.serialize_none(),
    }
}

/// Nearest float to an exact ratio.
pub fn to_float<F: Float>(r: Ratio<u64>) -> F {
    let n: F = NumCast::from(*r.numer()).expect("u64 converts to float");
    let d: F = NumCast::from(*r.denom()).expect("u64 converts to float");
    n / d
}

fn ratio(num: u64, den: u64) -> Option<Ratio<u64>> {
    (den > 0).then(|| Ratio::new(num, den))
}

pub fn compute_metrics<W: PathWord>(
    stream: &PathStream<W>,
    k: usize,
    forest: &KSlabForest<W>,
    kipf: &KIpf<W>,
) -> ProfileMetrics {
    let mut blpp = BlppProfiler::new();
    for item in stream {
        blpp.process(item);
    }
    let entries = blpp.table_entries() as u64;
    let stats = forest.hash_op_stats();

    let (mut sf_internal, mut sf_children) = (0u64, 0u64);
    for (_, n, _) in forest.walk() {
        let d = forest.children(n).count() as u64;
        if d > 0 {
            sf_internal += 1;
            sf_children += d;
        }
    }
    let (mut ipf_internal, mut ipf_children, mut leaves, mut leaf_depth) = (0u64, 0u64, 0u64, 0u64);
    for (_, n, depth) in kipf.walk() {
        let node = kipf.node(n);
        if node.is_leaf() {
            leaves += 1;
            leaf_depth += depth as u64;
        } else {
            ipf_internal += 1;
            ipf_children += node.degree() as u64;
        }
    }

    let ksf_nodes = forest.node_count() as u64;
    let kipf_nodes = kipf.node_count() as u64;
    ProfileMetrics {
        k,
        blpp_table_entries: entries,
        ksf_nodes,
        ksf_roots: stats.root_count,
        kipf_nodes,
        kipf_roots: kipf.root_count() as u64,
        hash_finds: stats.finds,
        hash_inserts: stats.inserts,
        max_degree: forest.max_degree() as u64,
        max_item_visits: stats.max_item_visits,
        avg_ksf_internal_degree: ratio(sf_children, sf_internal),
        avg_kipf_internal_degree: ratio(ipf_children, ipf_internal),
        avg_leaf_depth: ratio(leaf_depth, leaves),
        space_blowup: ratio(ksf_nodes, entries),
        path_blowup: ratio(kipf_nodes, entries),
    }
}

/// Plain Ball-Larus reference row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BlppBaseline {
    pub table_entries: u64,
    pub hash_ops: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunTable {
    pub baseline: BlppBaseline,
    pub rows: Vec<ProfileMetrics>,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no values of k given")]
    NoK,
    #[error("k must be at least 2 for a slab forest, got {0}")]
    InvalidK(usize),
    #[error(transparent)]
    Kipf(#[from] KipfError),
}

/// One metrics row per `k`, plus the BLPP baseline.
pub fn compare_runs<W: PathWord>(
    stream: &PathStream<W>,
    ks: &[usize],
) -> Result<RunTable, MetricsError> {
    if ks.is_empty() {
        return Err(MetricsError::NoK);
    }
    if let Some(&bad) = ks.iter().find(|&&k| k < 2) {
        return Err(MetricsError::InvalidK(bad));
    }
    let mut blpp = BlppProfiler::new();
    for item in stream {
        blpp.process(item);
    }
    let baseline = BlppBaseline {
        table_entries: blpp.table_entries() as u64,
        hash_ops: blpp.hash_ops(),
    };
    let rows = ks
        .iter()
        .map(|&k| {
            let forest = ksf::build(stream, k).map_err(KipfError::from)?;
            let ipf = make_k_ipf(&forest)?;
            Ok(compute_metrics(stream, k, &forest, &ipf))
        })
        .collect::<Result<Vec<_>, MetricsError>>()?;
    Ok(RunTable { baseline, rows })
}
