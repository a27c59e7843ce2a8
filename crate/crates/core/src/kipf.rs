//! The k-iterations path forest: a prefix forest holding the exact frequency
//! of every concatenation of up to `k` consecutive Ball-Larus paths.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::ksf::{self, KSlabForest, KsfError, SfNodeId};
use crate::tracer::{Routine, StreamItem};
use crate::word::PathWord;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KipfError {
    #[error("k must be at least 1, got {0}")]
    InvalidK(usize),
    #[error("label path of length {len} exceeds k = {k}")]
    PathTooLong { len: usize, k: usize },
    #[error("label path is empty")]
    EmptyPath,
    #[error("prune fraction {0} is outside [0, 1]")]
    BadFraction(f64),
    #[error("counter overflow at node labelled {label}")]
    CounterOverflow { label: String },
    #[error(transparent)]
    Ksf(#[from] KsfError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IpfNodeId(u32);

#[derive(Debug, Clone)]
pub struct IpfNode<W> {
    pub label: W,
    pub count: u64,
    children: BTreeMap<W, IpfNodeId>,
}

impl<W: PathWord> IpfNode<W> {
    /// Children in ascending label order.
    pub fn children(&self) -> impl Iterator<Item = IpfNodeId> + '_ {
        self.children.values().copied()
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.children.len()
    }
}

/// Where [`KIpf::join_subtree`] attaches: under the (implicit) dummy root of
/// a routine, or under an existing node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JoinTarget {
    Root(u32),
    Node(IpfNodeId),
}

#[derive(Debug, Clone)]
pub struct KIpf<W> {
    k: usize,
    nodes: Vec<IpfNode<W>>,
    routines: Vec<Routine>,
    /// Top-level trees per routine index.
    roots: Vec<BTreeMap<W, IpfNodeId>>,
}

/// One entry of a hot-path report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HotPath<W> {
    pub routine: Routine,
    pub labels: Vec<W>,
    pub count: u64,
}

impl<W: PathWord> KIpf<W> {
    /// Empty forest sharing `forest`'s routine table, ready for joins.
    pub fn empty_for(forest: &KSlabForest<W>) -> Self {
        KIpf {
            k: forest.k(),
            nodes: Vec::new(),
            routines: forest.routines().to_vec(),
            roots: vec![BTreeMap::new(); forest.routines().len()],
        }
    }

    /// One-level forest from plain Ball-Larus counters.
    pub fn from_counts(counts: impl IntoIterator<Item = ((Routine, W), u64)>) -> Self {
        let mut ipf = KIpf {
            k: 1,
            nodes: Vec::new(),
            routines: Vec::new(),
            roots: Vec::new(),
        };
        for ((routine, label), count) in counts {
            let ri = match ipf.routines.iter().position(|r| *r == routine) {
                Some(i) => i,
                None => {
                    ipf.routines.push(routine);
                    ipf.roots.push(BTreeMap::new());
                    ipf.routines.len() - 1
                }
            };
            let id = IpfNodeId(ipf.nodes.len() as u32);
            ipf.nodes.push(IpfNode {
                label,
                count,
                children: BTreeMap::new(),
            });
            let prev = ipf.roots[ri].insert(label, id);
            debug_assert!(prev.is_none(), "duplicate (routine, id) in counts");
        }
        ipf
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn node(&self, id: IpfNodeId) -> &IpfNode<W> {
        &self.nodes[id.0 as usize]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn routines(&self) -> &[Routine] {
        &self.routines
    }

    /// Top-level nodes of every routine, label-ascending within a routine.
    pub fn roots(&self) -> impl Iterator<Item = (&Routine, IpfNodeId)> + '_ {
        self.routines
            .iter()
            .zip(&self.roots)
            .flat_map(|(r, m)| m.values().map(move |&n| (r, n)))
    }

    /// Puts routines in name order so output does not depend on stream order.
    fn sort_routines(&mut self) {
        let mut pairs: Vec<(Routine, BTreeMap<W, IpfNodeId>)> = std::mem::take(&mut self.routines)
            .into_iter()
            .zip(std::mem::take(&mut self.roots))
            .collect();
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        (self.routines, self.roots) = pairs.into_iter().unzip();
    }

    pub fn root_count(&self) -> usize {
        self.roots.iter().map(BTreeMap::len).sum()
    }

    /// Merges the subtree of k-SF node `src` under `dst`, adding counters
    /// into matching nodes; descends at most `depth_budget` further levels.
    pub fn join_subtree(
        &mut self,
        forest: &KSlabForest<W>,
        src: SfNodeId,
        dst: JoinTarget,
        depth_budget: usize,
    ) -> Result<IpfNodeId, KipfError> {
        let s = forest.node(src);
        let map = match dst {
            JoinTarget::Root(r) => &self.roots[r as usize],
            JoinTarget::Node(n) => &self.nodes[n.0 as usize].children,
        };
        let here = match map.get(&s.label) {
            Some(&d) => {
                let node = &mut self.nodes[d.0 as usize];
                node.count =
                    node.count
                        .checked_add(s.count)
                        .ok_or_else(|| KipfError::CounterOverflow {
                            label: s.label.to_string(),
                        })?;
                d
            }
            None => {
                let d = IpfNodeId(self.nodes.len() as u32);
                self.nodes.push(IpfNode {
                    label: s.label,
                    count: s.count,
                    children: BTreeMap::new(),
                });
                match dst {
                    JoinTarget::Root(r) => self.roots[r as usize].insert(s.label, d),
                    JoinTarget::Node(n) => self.nodes[n.0 as usize].children.insert(s.label, d),
                };
                d
            }
        };
        if depth_budget > 0 {
            for child in forest.children(src) {
                self.join_subtree(forest, child, JoinTarget::Node(here), depth_budget - 1)?;
            }
        }
        Ok(here)
    }

    fn lookup(&self, routine: usize, path: &[W]) -> Option<IpfNodeId> {
        let (first, rest) = path.split_first()?;
        let mut at = *self.roots[routine].get(first)?;
        for l in rest {
            at = *self.node(at).children.get(l)?;
        }
        Some(at)
    }

    fn check_path(&self, path: &[W]) -> Result<(), KipfError> {
        if path.is_empty() {
            return Err(KipfError::EmptyPath);
        }
        if path.len() > self.k {
            return Err(KipfError::PathTooLong {
                len: path.len(),
                k: self.k,
            });
        }
        Ok(())
    }

    /// Frequency of `path` in routine `routine`, 0 if never executed.
    pub fn query_in(&self, routine: &str, path: &[W]) -> Result<u64, KipfError> {
        self.check_path(path)?;
        Ok(self
            .routines
            .iter()
            .position(|r| r.as_str() == routine)
            .and_then(|ri| self.lookup(ri, path))
            .map_or(0, |n| self.node(n).count))
    }

    /// Frequency of `path` summed over all routines.
    pub fn query(&self, path: &[W]) -> Result<u64, KipfError> {
        self.check_path(path)?;
        Ok((0..self.routines.len())
            .filter_map(|ri| self.lookup(ri, path))
            .map(|n| self.node(n).count)
            .sum())
    }

    /// Pre-order walk: `(routine, node, depth)` with roots at depth 1,
    /// children label-ascending.
    pub fn walk(&self) -> impl Iterator<Item = (&Routine, IpfNodeId, usize)> + '_ {
        let mut stack: Vec<(&Routine, IpfNodeId, usize)> =
            self.roots().map(|(r, n)| (r, n, 1)).collect();
        stack.reverse();
        std::iter::from_fn(move || {
            let (r, n, d) = stack.pop()?;
            stack.extend(self.node(n).children.values().rev().map(|&c| (r, c, d + 1)));
            Some((r, n, d))
        })
    }

    /// Every node as `(routine, label path, count)`, in pre-order.
    pub fn label_paths(&self) -> Vec<(Routine, Vec<W>, u64)> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut path: Vec<W> = Vec::new();
        for (r, n, d) in self.walk() {
            path.truncate(d - 1);
            path.push(self.node(n).label);
            out.push((r.clone(), path.clone(), self.node(n).count));
        }
        out
    }

    /// Drops, per tree, every node whose counter is below `fraction` times
    /// the counter of the tree's root, together with its subtree.
    pub fn prune(&self, fraction: f64) -> Result<KIpf<W>, KipfError> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(KipfError::BadFraction(fraction));
        }
        let mut out = KIpf {
            k: self.k,
            nodes: Vec::new(),
            routines: self.routines.clone(),
            roots: vec![BTreeMap::new(); self.routines.len()],
        };
        for (ri, trees) in self.roots.iter().enumerate() {
            for &root in trees.values() {
                let threshold = fraction * self.node(root).count as f64;
                if let Some(copy) = self.copy_pruned(root, threshold, &mut out) {
                    out.roots[ri].insert(self.node(root).label, copy);
                }
            }
        }
        Ok(out)
    }

    fn copy_pruned(&self, n: IpfNodeId, threshold: f64, out: &mut KIpf<W>) -> Option<IpfNodeId> {
        let node = self.node(n);
        if (node.count as f64) < threshold {
            return None;
        }
        let kids: BTreeMap<W, IpfNodeId> = node
            .children
            .iter()
            .filter_map(|(&l, &c)| self.copy_pruned(c, threshold, out).map(|id| (l, id)))
            .collect();
        let id = IpfNodeId(out.nodes.len() as u32);
        out.nodes.push(IpfNode {
            label: node.label,
            count: node.count,
            children: kids,
        });
        Some(id)
    }

    /// Most frequent label paths with at least `min_depth` labels, ordered by
    /// count (desc), then length (desc), then labels, then routine.
    pub fn top_paths(&self, limit: usize, min_depth: usize) -> Vec<HotPath<W>> {
        if limit == 0 {
            return Vec::new();
        }
        let mut all: Vec<HotPath<W>> = self
            .label_paths()
            .into_iter()
            .filter(|(_, p, _)| p.len() >= min_depth)
            .map(|(routine, labels, count)| HotPath {
                routine,
                labels,
                count,
            })
            .collect();
        all.sort_by(|a, b| {
            b.count
                .cmp(&a.count)
                .then(b.labels.len().cmp(&a.labels.len()))
                .then_with(|| a.labels.cmp(&b.labels))
                .then_with(|| a.routine.cmp(&b.routine))
        });
        all.truncate(limit);
        all
    }

    /// Depth-first `label:count` lines, two spaces per level, children
    /// label-ascending, one `*routine` header per routine with trees.
    /// `annotate` may append text to a node's line.
    pub fn dump_with(&self, mut annotate: impl FnMut(&Routine, W) -> Option<String>) -> String {
        let mut out = String::new();
        let mut last: Option<&Routine> = None;
        for (r, n, d) in self.walk() {
            if last != Some(r) {
                let _ = writeln!(out, "{r}");
                last = Some(r);
            }
            let node = self.node(n);
            let _ = write!(
                out,
                "{:indent$}{}:{}",
                "",
                node.label,
                node.count,
                indent = 2 * (d - 1)
            );
            if let Some(extra) = annotate(r, node.label) {
                let _ = write!(out, " {extra}");
            }
            out.push('\n');
        }
        out
    }

    pub fn dump(&self) -> String {
        self.dump_with(|_, _| None)
    }

    /// Serializable tree view (see `docs/profile-json.md`).
    pub fn to_json_view(&self) -> ProfileJson<W> {
        ProfileJson {
            k: self.k,
            routines: self
                .routines
                .iter()
                .zip(&self.roots)
                .filter(|(_, m)| !m.is_empty())
                .map(|(r, m)| RoutineJson {
                    routine: r.as_str().to_owned(),
                    trees: m.values().map(|&n| self.json_node(n)).collect(),
                })
                .collect(),
        }
    }

    fn json_node(&self, n: IpfNodeId) -> NodeJson<W> {
        let node = self.node(n);
        NodeJson {
            label: node.label,
            count: node.count,
            children: node.children.values().map(|&c| self.json_node(c)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProfileJson<W> {
    pub k: usize,
    pub routines: Vec<RoutineJson<W>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoutineJson<W> {
    pub routine: String,
    pub trees: Vec<NodeJson<W>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeJson<W> {
    pub label: W,
    pub count: u64,
    pub children: Vec<NodeJson<W>>,
}

/// Converts a k-slab forest into the k-IPF.
///
/// All k-SF nodes are grouped by (routine, label); for each group in
/// ascending order, the subtree of every member, cut to `k` levels, is
/// joined under the routine's dummy root.
pub fn make_k_ipf<W: PathWord>(forest: &KSlabForest<W>) -> Result<KIpf<W>, KipfError> {
    let mut index: BTreeMap<(u32, W), Vec<SfNodeId>> = BTreeMap::new();
    for (r, n, _) in forest.walk() {
        index.entry((r, forest.node(n).label)).or_default().push(n);
    }
    let mut ipf = KIpf::empty_for(forest);
    let budget = forest.k() - 1;
    for ((r, _), group) in &index {
        for &rho in group {
            ipf.join_subtree(forest, rho, JoinTarget::Root(*r), budget)?;
        }
    }
    ipf.sort_routines();
    Ok(ipf)
}

/// Profiles a stream end to end: plain counters for `k = 1`, otherwise
/// k-SF construction followed by conversion.
pub fn profile_stream<'a, W: PathWord>(
    stream: impl IntoIterator<Item = &'a StreamItem<W>>,
    k: usize,
) -> Result<KIpf<W>, KipfError> {
    match k {
        0 => Err(KipfError::InvalidK(0)),
        1 => {
            let mut counter = crate::metrics::BlppProfiler::new();
            for item in stream {
                counter.process(item);
            }
            Ok(KIpf::from_counts(counter.into_counts()))
        }
        _ => make_k_ipf(&ksf::build(stream, k)?),
    }
}
