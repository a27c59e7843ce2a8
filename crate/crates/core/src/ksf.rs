//! Streaming construction of the k-slab forest.
//!
//! Each marker-delimited segment is cut into slabs of `k - 1` IDs. The
//! forest keeps, for every pair of consecutive slabs, the concatenation as a
//! path from a hashed root: the first slab lives in the upper levels
//! (`0..=k-2`), the second in the lower ones (`k-1..=2k-3`). Nodes use a
//! first-child/next-sibling layout in a flat arena.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::tracer::{Routine, StreamItem};
use crate::word::PathWord;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KsfError {
    #[error("k must be at least 2 for a slab forest, got {0}")]
    InvalidK(usize),
    #[error("counter overflow at node labelled {label}")]
    CounterOverflow { label: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SfNodeId(u32);

impl SfNodeId {
    fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone)]
pub struct SfNode<W> {
    pub label: W,
    pub count: u64,
    first_child: Option<SfNodeId>,
    next_sibling: Option<SfNodeId>,
}

/// Work counters gathered while building.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct HashOpStats {
    /// Root-table lookups (one per slab start).
    pub finds: u64,
    /// Root-table insertions.
    pub inserts: u64,
    pub root_count: u64,
    /// Path IDs processed (markers excluded).
    pub items: u64,
    /// Sibling-list nodes inspected by child scans.
    pub sibling_visits: u64,
    /// Largest number of sibling visits made for a single item.
    pub max_item_visits: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KsfOptions {
    /// Move a found child to the head of its sibling list.
    pub move_to_front: bool,
}

#[derive(Debug, Clone)]
pub struct KSlabForest<W> {
    k: usize,
    nodes: Vec<SfNode<W>>,
    roots: HashMap<(u32, W), SfNodeId>,
    /// Roots in creation order, with their routine index.
    root_list: Vec<(u32, SfNodeId)>,
    routines: Vec<Routine>,
    routine_index: HashMap<Routine, u32>,
    stats: HashOpStats,
}

impl<W: PathWord> KSlabForest<W> {
    fn new(k: usize) -> Self {
        let mut f = KSlabForest {
            k,
            nodes: Vec::new(),
            roots: HashMap::new(),
            root_list: Vec::new(),
            routines: Vec::new(),
            routine_index: HashMap::new(),
            stats: HashOpStats::default(),
        };
        f.intern(&Routine::anonymous());
        f
    }

    fn intern(&mut self, r: &Routine) -> u32 {
        if let Some(&i) = self.routine_index.get(r) {
            return i;
        }
        let i = self.routines.len() as u32;
        self.routines.push(r.clone());
        self.routine_index.insert(r.clone(), i);
        i
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: SfNodeId) -> &SfNode<W> {
        &self.nodes[id.index()]
    }

    pub fn children(&self, id: SfNodeId) -> Children<'_, W> {
        Children {
            forest: self,
            next: self.nodes[id.index()].first_child,
        }
    }

    /// Routines in first-seen order; index 0 is the anonymous routine.
    pub fn routines(&self) -> &[Routine] {
        &self.routines
    }

    /// `(routine index, root)` in creation order.
    pub fn roots(&self) -> impl Iterator<Item = (u32, SfNodeId)> + '_ {
        self.root_list.iter().copied()
    }

    pub fn root(&self, routine: &str, label: W) -> Option<SfNodeId> {
        let r = *self.routine_index.get(&Routine(routine.to_owned()))?;
        self.roots.get(&(r, label)).copied()
    }

    /// Follows `labels` from the root with the first label.
    pub fn find_path(&self, routine: &str, labels: &[W]) -> Option<SfNodeId> {
        let (&first, rest) = labels.split_first()?;
        let mut at = self.root(routine, first)?;
        for &l in rest {
            at = self.children(at).find(|&c| self.node(c).label == l)?;
        }
        Some(at)
    }

    pub fn hash_op_stats(&self) -> HashOpStats {
        self.stats
    }

    /// Depth of the deepest node; roots have depth 0. `None` when empty.
    pub fn max_depth(&self) -> Option<usize> {
        self.walk().map(|(_, _, d)| d).max()
    }

    /// Largest out-degree (the per-item scan bound).
    pub fn max_degree(&self) -> usize {
        (0..self.nodes.len() as u32)
            .map(|i| self.children(SfNodeId(i)).count())
            .max()
            .unwrap_or(0)
    }

    /// Pre-order walk over all trees: `(routine index, node, depth)`.
    pub fn walk(&self) -> impl Iterator<Item = (u32, SfNodeId, usize)> + '_ {
        let mut stack: Vec<(u32, SfNodeId, usize)> = self
            .root_list
            .iter()
            .rev()
            .map(|&(r, n)| (r, n, 0))
            .collect();
        std::iter::from_fn(move || {
            let (r, n, d) = stack.pop()?;
            let mut kids: Vec<SfNodeId> = self.children(n).collect();
            kids.reverse();
            stack.extend(kids.into_iter().map(|c| (r, c, d + 1)));
            Some((r, n, d))
        })
    }

    /// Depth-first `label:count` lines, two spaces per level, children in
    /// sibling order, grouped under a `*routine` header.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (ri, routine) in self.routines.iter().enumerate() {
            let mut any = false;
            for (r, root) in self.roots() {
                if r as usize != ri {
                    continue;
                }
                if !any {
                    let _ = writeln!(out, "{routine}");
                    any = true;
                }
                let mut stack = vec![(root, 0usize)];
                while let Some((n, d)) = stack.pop() {
                    let node = self.node(n);
                    let _ = writeln!(
                        out,
                        "{:indent$}{}:{}",
                        "",
                        node.label,
                        node.count,
                        indent = 2 * d
                    );
                    let mut kids: Vec<SfNodeId> = self.children(n).collect();
                    kids.reverse();
                    stack.extend(kids.into_iter().map(|c| (c, d + 1)));
                }
            }
        }
        out
    }

    fn alloc(&mut self, label: W) -> SfNodeId {
        let id = SfNodeId(self.nodes.len() as u32);
        self.nodes.push(SfNode {
            label,
            count: 0,
            first_child: None,
            next_sibling: None,
        });
        id
    }

    /// Child of `parent` labelled `label`, appended at the tail if absent.
    fn child(&mut self, parent: SfNodeId, label: W, mtf: bool, visits: &mut u64) -> SfNodeId {
        let mut prev: Option<SfNodeId> = None;
        let mut cur = self.nodes[parent.index()].first_child;
        while let Some(c) = cur {
            *visits += 1;
            if self.nodes[c.index()].label == label {
                if let (true, Some(p)) = (mtf, prev) {
                    self.nodes[p.index()].next_sibling = self.nodes[c.index()].next_sibling;
                    self.nodes[c.index()].next_sibling = self.nodes[parent.index()].first_child;
                    self.nodes[parent.index()].first_child = Some(c);
                }
                return c;
            }
            prev = cur;
            cur = self.nodes[c.index()].next_sibling;
        }
        let id = self.alloc(label);
        match prev {
            Some(p) => self.nodes[p.index()].next_sibling = Some(id),
            None => self.nodes[parent.index()].first_child = Some(id),
        }
        id
    }

    fn bump(&mut self, id: SfNodeId) -> Result<(), KsfError> {
        let node = &mut self.nodes[id.index()];
        node.count = node
            .count
            .checked_add(1)
            .ok_or_else(|| KsfError::CounterOverflow {
                label: node.label.to_string(),
            })?;
        Ok(())
    }
}

pub struct Children<'a, W> {
    forest: &'a KSlabForest<W>,
    next: Option<SfNodeId>,
}

impl<W> Iterator for Children<'_, W> {
    type Item = SfNodeId;
    fn next(&mut self) -> Option<SfNodeId> {
        let cur = self.next?;
        self.next = self.forest.nodes[cur.index()].next_sibling;
        Some(cur)
    }
}

/// Online builder: feed items in stream order, then [`finish`](Self::finish).
#[derive(Debug, Clone)]
pub struct KsfBuilder<W> {
    forest: KSlabForest<W>,
    /// IDs since the last marker.
    n: u64,
    /// Current node in the upper levels.
    tau: Option<SfNodeId>,
    /// Current node in the lower levels.
    beta: Option<SfNodeId>,
    routine: u32,
    opts: KsfOptions,
}

impl<W: PathWord> KsfBuilder<W> {
    pub fn new(k: usize) -> Result<Self, KsfError> {
        Self::with_options(k, KsfOptions::default())
    }

    pub fn with_options(k: usize, opts: KsfOptions) -> Result<Self, KsfError> {
        if k < 2 {
            return Err(KsfError::InvalidK(k));
        }
        Ok(KsfBuilder {
            forest: KSlabForest::new(k),
            n: 0,
            tau: None,
            beta: None,
            routine: 0,
            opts,
        })
    }

    pub fn process(&mut self, item: &StreamItem<W>) -> Result<(), KsfError> {
        let r = match item {
            StreamItem::Marker(routine) => {
                self.routine = self.forest.intern(routine);
                self.n = 0;
                self.tau = None;
                return Ok(());
            }
            StreamItem::Path(r) => *r,
        };
        let f = &mut self.forest;
        let slab = (f.k - 1) as u64;
        let mut visits = 0u64;
        if self.n.is_multiple_of(slab) {
            self.beta = self.tau;
            f.stats.finds += 1;
            let key = (self.routine, r);
            let root = match f.roots.get(&key) {
                Some(&root) => root,
                None => {
                    let root = f.alloc(r);
                    f.roots.insert(key, root);
                    f.root_list.push((self.routine, root));
                    f.stats.inserts += 1;
                    f.stats.root_count += 1;
                    root
                }
            };
            self.tau = Some(root);
        } else {
            let tau = self.tau.expect("inside a slab the upper cursor is set");
            self.tau = Some(f.child(tau, r, self.opts.move_to_front, &mut visits));
        }
        match self.beta {
            Some(beta) => {
                let b = f.child(beta, r, self.opts.move_to_front, &mut visits);
                self.beta = Some(b);
                f.bump(b)?;
            }
            None => f.bump(self.tau.unwrap())?,
        }
        self.n += 1;
        f.stats.items += 1;
        f.stats.sibling_visits += visits;
        f.stats.max_item_visits = f.stats.max_item_visits.max(visits);
        Ok(())
    }

    pub fn forest(&self) -> &KSlabForest<W> {
        &self.forest
    }

    pub fn finish(self) -> KSlabForest<W> {
        self.forest
    }
}

/// Builds the k-slab forest of a whole stream.
pub fn build<'a, W: PathWord>(
    stream: impl IntoIterator<Item = &'a StreamItem<W>>,
    k: usize,
) -> Result<KSlabForest<W>, KsfError> {
    build_with(stream, k, KsfOptions::default())
}

pub fn build_with<'a, W: PathWord>(
    stream: impl IntoIterator<Item = &'a StreamItem<W>>,
    k: usize,
    opts: KsfOptions,
) -> Result<KSlabForest<W>, KsfError> {
    let mut b = KsfBuilder::with_options(k, opts)?;
    for item in stream {
        b.process(item)?;
    }
    Ok(b.finish())
}
