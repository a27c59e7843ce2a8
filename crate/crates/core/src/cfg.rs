//! Routine control-flow graphs and their acyclic (DAG) form.
//!
//! A [`Cfg`] is a multigraph of basic blocks with a distinguished entry and
//! exit. Back edges are the edges whose target dominates their source;
//! [`to_dag`] replaces each of them by a dummy edge from the entry to the
//! loop header and a dummy edge from the latch to the exit.
//!
//! Block and edge declaration order is preserved everywhere and is the only
//! tie-break used by path numbering.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// Index of a basic block inside its [`Cfg`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Block(pub u32);

impl Block {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Unique edge identifier. Real edges are numbered in declaration order;
/// dummy edges continue the sequence in creation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct EdgeId(pub u32);

impl EdgeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub id: EdgeId,
    pub src: Block,
    pub dst: Block,
}

/// Where the dummy edges go in the combined DAG edge list, and therefore in
/// the per-block visit order used by numbering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DummyPlacement {
    /// Real edges in file order, then dummy edges in creation order.
    #[default]
    Last,
    /// Dummy edges in creation order, then real edges in file order.
    First,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CfgError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}, column {column}: unknown block `{block}`")]
    UnknownBlock {
        line: usize,
        column: usize,
        block: String,
    },
    #[error("missing entry block")]
    MissingEntry,
    #[error("missing exit block")]
    MissingExit,
    #[error("block `{0}` is unreachable from the entry")]
    Unreachable(String),
    #[error("block `{0}` cannot reach the exit")]
    CannotReachExit(String),
    #[error("exit block `{block}` has an outgoing edge {edge}")]
    ExitHasSuccessor { block: String, edge: EdgeId },
    #[error("back edge {edge} ({src} -> {dst}) targets the entry block")]
    BackEdgeToEntry {
        edge: EdgeId,
        src: String,
        dst: String,
    },
    #[error("irreducible control flow: edge {edge} ({src} -> {dst}) lies on a cycle with no dominating header")]
    Irreducible {
        edge: EdgeId,
        src: String,
        dst: String,
    },
}

/// A validated routine control-flow graph. Immutable once built.
#[derive(Debug, Clone)]
pub struct Cfg {
    name: String,
    blocks: Vec<String>,
    index: HashMap<String, Block>,
    entry: Block,
    exit: Block,
    edges: Vec<Edge>,
    succs: Vec<Vec<usize>>,
    preds: Vec<Vec<usize>>,
    dummy_placement: DummyPlacement,
}

impl Cfg {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn entry(&self) -> Block {
        self.entry
    }

    pub fn exit(&self) -> Block {
        self.exit
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> impl ExactSizeIterator<Item = Block> + '_ {
        (0..self.blocks.len() as u32).map(Block)
    }

    pub fn block_name(&self, b: Block) -> &str {
        &self.blocks[b.index()]
    }

    pub fn block(&self, name: &str) -> Option<Block> {
        self.index.get(name).copied()
    }

    /// Real edges in declaration order; `edges()[i].id == EdgeId(i)`.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Edge> {
        self.edges.get(id.index())
    }

    pub fn successors(&self, b: Block) -> impl Iterator<Item = &Edge> + '_ {
        self.succs[b.index()].iter().map(move |&i| &self.edges[i])
    }

    pub fn predecessors(&self, b: Block) -> impl Iterator<Item = &Edge> + '_ {
        self.preds[b.index()].iter().map(move |&i| &self.edges[i])
    }

    /// First declared edge `src -> dst`, if any.
    pub fn find_edge(&self, src: Block, dst: Block) -> Option<&Edge> {
        self.successors(src).find(|e| e.dst == dst)
    }

    pub fn dummy_placement(&self) -> DummyPlacement {
        self.dummy_placement
    }

    pub fn describe_edge(&self, e: &Edge) -> String {
        format!("{} -> {}", self.block_name(e.src), self.block_name(e.dst))
    }
}

/// Incremental constructor for [`Cfg`]; `build` validates.
#[derive(Debug, Clone, Default)]
pub struct CfgBuilder {
    name: String,
    blocks: Vec<String>,
    index: HashMap<String, Block>,
    entry: Option<Block>,
    exit: Option<Block>,
    edges: Vec<(Block, Block)>,
    dummy_placement: DummyPlacement,
}

impl CfgBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        CfgBuilder {
            name: name.into(),
            ..Default::default()
        }
    }

    /// Declares a block (idempotent) and returns its index.
    pub fn block(&mut self, name: &str) -> Block {
        if let Some(&b) = self.index.get(name) {
            return b;
        }
        let b = Block(self.blocks.len() as u32);
        self.blocks.push(name.to_owned());
        self.index.insert(name.to_owned(), b);
        b
    }

    pub fn lookup(&self, name: &str) -> Option<Block> {
        self.index.get(name).copied()
    }

    pub fn entry(&mut self, b: Block) -> &mut Self {
        self.entry = Some(b);
        self
    }

    pub fn exit(&mut self, b: Block) -> &mut Self {
        self.exit = Some(b);
        self
    }

    pub fn edge(&mut self, src: Block, dst: Block) -> EdgeId {
        self.edges.push((src, dst));
        EdgeId(self.edges.len() as u32 - 1)
    }

    pub fn dummy_placement(&mut self, placement: DummyPlacement) -> &mut Self {
        self.dummy_placement = placement;
        self
    }

    pub fn build(self) -> Result<Cfg, CfgError> {
        let entry = self.entry.ok_or(CfgError::MissingEntry)?;
        let exit = self.exit.ok_or(CfgError::MissingExit)?;
        let n = self.blocks.len();
        let edges: Vec<Edge> = self
            .edges
            .iter()
            .enumerate()
            .map(|(i, &(src, dst))| Edge {
                id: EdgeId(i as u32),
                src,
                dst,
            })
            .collect();
        let mut succs = vec![Vec::new(); n];
        let mut preds = vec![Vec::new(); n];
        for (i, e) in edges.iter().enumerate() {
            succs[e.src.index()].push(i);
            preds[e.dst.index()].push(i);
        }
        let cfg = Cfg {
            name: self.name,
            blocks: self.blocks,
            index: self.index,
            entry,
            exit,
            edges,
            succs,
            preds,
            dummy_placement: self.dummy_placement,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl Cfg {
    fn validate(&self) -> Result<(), CfgError> {
        if let Some(e) = self.successors(self.exit).next() {
            return Err(CfgError::ExitHasSuccessor {
                block: self.block_name(self.exit).to_owned(),
                edge: e.id,
            });
        }
        let fwd = self.reach(self.entry, |b| self.successors(b).map(|e| e.dst).collect());
        if let Some(b) = fwd.iter().position(|r| !r) {
            return Err(CfgError::Unreachable(self.blocks[b].clone()));
        }
        let bwd = self.reach(self.exit, |b| self.predecessors(b).map(|e| e.src).collect());
        if let Some(b) = bwd.iter().position(|r| !r) {
            return Err(CfgError::CannotReachExit(self.blocks[b].clone()));
        }
        Ok(())
    }

    fn reach(&self, from: Block, next: impl Fn(Block) -> Vec<Block>) -> Vec<bool> {
        let mut seen = vec![false; self.num_blocks()];
        let mut stack = vec![from];
        seen[from.index()] = true;
        while let Some(b) = stack.pop() {
            for w in next(b) {
                if !seen[w.index()] {
                    seen[w.index()] = true;
                    stack.push(w);
                }
            }
        }
        seen
    }
}

/// Parses the line-oriented CFG text format.
///
/// ```text
/// cfg <name>
/// block <id>...        # optional pre-declaration
/// entry <block>
/// exit <block>
/// edge <src> <dst>
/// dummies first|last   # placement of dummy edges in visit order
/// ```
pub fn parse_cfg(text: &str) -> Result<Cfg, CfgError> {
    let mut b = CfgBuilder::default();
    let mut seen_entry = false;
    let mut seen_exit = false;
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("");
        let toks = tokens(content);
        let Some(&(dcol, directive)) = toks.first() else {
            continue;
        };
        let args = &toks[1..];
        let syntax = |column: usize, message: String| CfgError::Syntax {
            line,
            column,
            message,
        };
        let arity = |want: usize| {
            if args.len() == want {
                Ok(())
            } else {
                let column = args.get(want).map_or(dcol, |t| t.0);
                Err(syntax(
                    column,
                    format!(
                        "`{directive}` takes {want} argument(s), found {}",
                        args.len()
                    ),
                ))
            }
        };
        match directive {
            "cfg" => {
                arity(1)?;
                b.name = args[0].1.to_owned();
            }
            "block" => {
                if args.is_empty() {
                    return Err(syntax(dcol, "`block` needs at least one identifier".into()));
                }
                for &(_, id) in args {
                    b.block(id);
                }
            }
            "entry" | "exit" => {
                arity(1)?;
                let blk = b.block(args[0].1);
                let seen = if directive == "entry" {
                    &mut seen_entry
                } else {
                    &mut seen_exit
                };
                if *seen {
                    return Err(syntax(dcol, format!("duplicate `{directive}` directive")));
                }
                *seen = true;
                if directive == "entry" {
                    b.entry(blk);
                } else {
                    b.exit(blk);
                }
            }
            "edge" => {
                arity(2)?;
                let mut ends = [Block(0); 2];
                for (slot, &(column, id)) in ends.iter_mut().zip(args) {
                    *slot = b.lookup(id).ok_or_else(|| CfgError::UnknownBlock {
                        line,
                        column,
                        block: id.to_owned(),
                    })?;
                }
                b.edge(ends[0], ends[1]);
            }
            "dummies" => {
                arity(1)?;
                let placement = match args[0].1 {
                    "first" => DummyPlacement::First,
                    "last" => DummyPlacement::Last,
                    other => {
                        return Err(syntax(
                            args[0].0,
                            format!("expected `first` or `last`, found `{other}`"),
                        ))
                    }
                };
                b.dummy_placement(placement);
            }
            other => return Err(syntax(dcol, format!("unknown directive `{other}`"))),
        }
    }
    b.build()
}

/// Parses per-edge counts, one `<src> <dst> <count>` line each. The n-th
/// line naming a block pair refers to the n-th parallel edge between them.
pub fn parse_edge_counts(cfg: &Cfg, text: &str) -> Result<HashMap<EdgeId, u64>, CfgError> {
    let mut out = HashMap::new();
    let mut uses: HashMap<(Block, Block), usize> = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let toks = tokens(raw.split('#').next().unwrap_or(""));
        if toks.is_empty() {
            continue;
        }
        if toks.len() != 3 {
            return Err(CfgError::Syntax {
                line,
                column: toks.get(3).map_or(1, |t| t.0),
                message: format!(
                    "expected `<src> <dst> <count>`, found {} field(s)",
                    toks.len()
                ),
            });
        }
        let mut ends = [Block(0); 2];
        for (slot, &(column, id)) in ends.iter_mut().zip(&toks) {
            *slot = cfg.block(id).ok_or_else(|| CfgError::UnknownBlock {
                line,
                column,
                block: id.to_owned(),
            })?;
        }
        let (ccol, ctext) = toks[2];
        let count: u64 = ctext.parse().map_err(|_| CfgError::Syntax {
            line,
            column: ccol,
            message: format!("bad count `{ctext}`"),
        })?;
        let nth = uses.entry((ends[0], ends[1])).or_insert(0);
        let edge = cfg
            .successors(ends[0])
            .filter(|e| e.dst == ends[1])
            .nth(*nth)
            .ok_or_else(|| CfgError::Syntax {
                line,
                column: toks[0].0,
                message: match *nth {
                    0 => format!("no edge {} -> {}", toks[0].1, toks[1].1),
                    n => format!("only {n} edge(s) {} -> {}", toks[0].1, toks[1].1),
                },
            })?;
        *nth += 1;
        out.insert(edge.id, count);
    }
    Ok(out)
}

/// Whitespace tokens with their 1-based character column.
pub(crate) fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (col, (i, c)) in line.char_indices().enumerate() {
        match (c.is_whitespace(), start) {
            (false, None) => start = Some((col + 1, i)),
            (true, Some((scol, si))) => {
                out.push((scol, &line[si..i]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some((scol, si)) = start {
        out.push((scol, &line[si..]));
    }
    out
}

/// Immediate dominators, indexed by block. The entry maps to itself.
///
/// Iterative two-finger algorithm over reverse postorder.
pub fn immediate_dominators(cfg: &Cfg) -> Vec<Block> {
    let n = cfg.num_blocks();
    let rpo = reverse_postorder(cfg);
    let mut order = vec![usize::MAX; n];
    for (i, b) in rpo.iter().enumerate() {
        order[b.index()] = i;
    }
    let mut idom: Vec<Option<Block>> = vec![None; n];
    idom[cfg.entry.index()] = Some(cfg.entry);
    let mut changed = true;
    while changed {
        changed = false;
        for &b in rpo.iter().skip(1) {
            let mut new: Option<Block> = None;
            for p in cfg.predecessors(b).map(|e| e.src) {
                if idom[p.index()].is_none() {
                    continue;
                }
                new = Some(match new {
                    None => p,
                    Some(cur) => {
                        let (mut x, mut y) = (cur, p);
                        while x != y {
                            while order[x.index()] > order[y.index()] {
                                x = idom[x.index()].unwrap();
                            }
                            while order[y.index()] > order[x.index()] {
                                y = idom[y.index()].unwrap();
                            }
                        }
                        x
                    }
                });
            }
            if new.is_some() && idom[b.index()] != new {
                idom[b.index()] = new;
                changed = true;
            }
        }
    }
    idom.into_iter()
        .map(|d| d.expect("all blocks reachable"))
        .collect()
}

fn reverse_postorder(cfg: &Cfg) -> Vec<Block> {
    let n = cfg.num_blocks();
    let mut seen = vec![false; n];
    let mut post = Vec::with_capacity(n);
    let mut stack: Vec<(Block, usize)> = vec![(cfg.entry, 0)];
    seen[cfg.entry.index()] = true;
    while let Some(&mut (b, ref mut next)) = stack.last_mut() {
        let succ = &cfg.succs[b.index()];
        if *next < succ.len() {
            let w = cfg.edges[succ[*next]].dst;
            *next += 1;
            if !seen[w.index()] {
                seen[w.index()] = true;
                stack.push((w, 0));
            }
        } else {
            post.push(b);
            stack.pop();
        }
    }
    post.reverse();
    post
}

/// Returns `true` if `a` dominates `b`.
pub fn dominates(idom: &[Block], a: Block, mut b: Block) -> bool {
    loop {
        if a == b {
            return true;
        }
        let up = idom[b.index()];
        if up == b {
            return false;
        }
        b = up;
    }
}

/// Edges `(u, v)` where `v` dominates `u`, in declaration order.
///
/// Fails if the remaining graph still has a cycle (irreducible flow) or if a
/// back edge targets the entry block, which has no dummy-entry form.
pub fn find_back_edges(cfg: &Cfg) -> Result<Vec<EdgeId>, CfgError> {
    let idom = immediate_dominators(cfg);
    let back: Vec<EdgeId> = cfg
        .edges
        .iter()
        .filter(|e| dominates(&idom, e.dst, e.src))
        .map(|e| e.id)
        .collect();
    let mut is_back = vec![false; cfg.edges.len()];
    for id in &back {
        is_back[id.index()] = true;
    }
    if let Some(e) = back
        .iter()
        .map(|id| &cfg.edges[id.index()])
        .find(|e| e.dst == cfg.entry)
    {
        return Err(CfgError::BackEdgeToEntry {
            edge: e.id,
            src: cfg.block_name(e.src).to_owned(),
            dst: cfg.block_name(e.dst).to_owned(),
        });
    }
    if let Some(id) = find_cycle_edge(cfg, &is_back) {
        let e = &cfg.edges[id.index()];
        return Err(CfgError::Irreducible {
            edge: id,
            src: cfg.block_name(e.src).to_owned(),
            dst: cfg.block_name(e.dst).to_owned(),
        });
    }
    Ok(back)
}

/// DFS over non-back edges; returns an edge closing a cycle, if any.
fn find_cycle_edge(cfg: &Cfg, is_back: &[bool]) -> Option<EdgeId> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        White,
        Grey,
        Black,
    }
    let mut mark = vec![Mark::White; cfg.num_blocks()];
    for root in cfg.blocks() {
        if mark[root.index()] != Mark::White {
            continue;
        }
        let mut stack: Vec<(Block, usize)> = vec![(root, 0)];
        mark[root.index()] = Mark::Grey;
        while let Some(&mut (b, ref mut next)) = stack.last_mut() {
            let succ = &cfg.succs[b.index()];
            if *next < succ.len() {
                let e = &cfg.edges[succ[*next]];
                *next += 1;
                if is_back[e.id.index()] {
                    continue;
                }
                match mark[e.dst.index()] {
                    Mark::Grey => return Some(e.id),
                    Mark::White => {
                        mark[e.dst.index()] = Mark::Grey;
                        stack.push((e.dst, 0));
                    }
                    Mark::Black => {}
                }
            } else {
                mark[b.index()] = Mark::Black;
                stack.pop();
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EdgeKind {
    Real,
    /// `entry -> header` standing in for back edge `origin`.
    DummyEntry {
        origin: EdgeId,
    },
    /// `latch -> exit` standing in for back edge `origin`.
    DummyExit {
        origin: EdgeId,
    },
}

impl EdgeKind {
    pub fn is_dummy(self) -> bool {
        !matches!(self, EdgeKind::Real)
    }

    pub fn origin(self) -> Option<EdgeId> {
        match self {
            EdgeKind::Real => None,
            EdgeKind::DummyEntry { origin } | EdgeKind::DummyExit { origin } => Some(origin),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DagEdge {
    pub id: EdgeId,
    pub src: Block,
    pub dst: Block,
    pub kind: EdgeKind,
}

/// Acyclic form of a [`Cfg`]: back edges removed, dummy edge pairs added.
#[derive(Debug, Clone)]
pub struct DagCfg {
    cfg: Cfg,
    back_edges: Vec<EdgeId>,
    is_back: Vec<bool>,
    edges: Vec<DagEdge>,
    /// Position in `edges` by edge id; `None` for removed back edges.
    position: Vec<Option<usize>>,
    succs: Vec<Vec<usize>>,
    /// Dummy (entry, exit) positions per back edge, parallel to `back_edges`.
    dummies: Vec<(usize, usize)>,
    topo: Vec<Block>,
}

/// Builds the DAG form of `cfg`.
pub fn to_dag(cfg: &Cfg) -> Result<DagCfg, CfgError> {
    let back_edges = find_back_edges(cfg)?;
    let m = cfg.edges.len() as u32;
    let mut is_back = vec![false; cfg.edges.len()];
    for id in &back_edges {
        is_back[id.index()] = true;
    }

    let real = cfg
        .edges
        .iter()
        .filter(|e| !is_back[e.id.index()])
        .map(|e| DagEdge {
            id: e.id,
            src: e.src,
            dst: e.dst,
            kind: EdgeKind::Real,
        });
    let dummy: Vec<DagEdge> = back_edges
        .iter()
        .enumerate()
        .flat_map(|(i, &origin)| {
            let e = &cfg.edges[origin.index()];
            [
                DagEdge {
                    id: EdgeId(m + 2 * i as u32),
                    src: cfg.entry,
                    dst: e.dst,
                    kind: EdgeKind::DummyEntry { origin },
                },
                DagEdge {
                    id: EdgeId(m + 2 * i as u32 + 1),
                    src: e.src,
                    dst: cfg.exit,
                    kind: EdgeKind::DummyExit { origin },
                },
            ]
        })
        .collect();
    let edges: Vec<DagEdge> = match cfg.dummy_placement {
        DummyPlacement::Last => real.chain(dummy).collect(),
        DummyPlacement::First => dummy.into_iter().chain(real).collect(),
    };

    let mut position = vec![None; cfg.edges.len() + 2 * back_edges.len()];
    let mut succs = vec![Vec::new(); cfg.num_blocks()];
    for (i, e) in edges.iter().enumerate() {
        position[e.id.index()] = Some(i);
        succs[e.src.index()].push(i);
    }
    let dummies = (0..back_edges.len())
        .map(|i| {
            let base = m as usize + 2 * i;
            (position[base].unwrap(), position[base + 1].unwrap())
        })
        .collect();

    // Kahn; the graph is acyclic by construction once back edges are gone.
    let mut indeg = vec![0usize; cfg.num_blocks()];
    for e in &edges {
        indeg[e.dst.index()] += 1;
    }
    let mut ready: Vec<Block> = cfg.blocks().filter(|b| indeg[b.index()] == 0).collect();
    ready.reverse();
    let mut topo = Vec::with_capacity(cfg.num_blocks());
    while let Some(b) = ready.pop() {
        topo.push(b);
        for &i in succs[b.index()].iter().rev() {
            let d = edges[i].dst;
            indeg[d.index()] -= 1;
            if indeg[d.index()] == 0 {
                ready.push(d);
            }
        }
    }
    debug_assert_eq!(
        topo.len(),
        cfg.num_blocks(),
        "dummy edges introduced a cycle"
    );

    Ok(DagCfg {
        cfg: cfg.clone(),
        back_edges,
        is_back,
        edges,
        position,
        succs,
        dummies,
        topo,
    })
}

impl DagCfg {
    pub fn cfg(&self) -> &Cfg {
        &self.cfg
    }

    pub fn back_edges(&self) -> &[EdgeId] {
        &self.back_edges
    }

    pub fn is_back_edge(&self, id: EdgeId) -> bool {
        self.is_back.get(id.index()).copied().unwrap_or(false)
    }

    /// Combined edge list in visit order.
    pub fn edges(&self) -> &[DagEdge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> Option<&DagEdge> {
        self.position
            .get(id.index())
            .copied()
            .flatten()
            .map(|i| &self.edges[i])
    }

    /// One past the largest edge id in use (real or dummy).
    pub fn id_bound(&self) -> usize {
        self.position.len()
    }

    pub fn dummy_edges(&self) -> impl Iterator<Item = &DagEdge> + '_ {
        self.edges.iter().filter(|e| e.kind.is_dummy())
    }

    /// Outgoing DAG edges of `b` in visit order.
    pub fn successors(&self, b: Block) -> impl Iterator<Item = &DagEdge> + '_ {
        self.succs[b.index()].iter().map(move |&i| &self.edges[i])
    }

    /// The (dummy-entry, dummy-exit) pair replacing back edge `back`.
    pub fn dummy_pair(&self, back: EdgeId) -> Option<(&DagEdge, &DagEdge)> {
        let i = self.back_edges.iter().position(|&b| b == back)?;
        let (en, ex) = self.dummies[i];
        Some((&self.edges[en], &self.edges[ex]))
    }

    pub fn topological_order(&self) -> &[Block] {
        &self.topo
    }

    /// Undoes the transformation: drops dummy edges and reinstates the back
    /// edges they stand for. Returned in edge-id order.
    pub fn restore(&self) -> Vec<Edge> {
        let mut out: Vec<Edge> = self
            .edges
            .iter()
            .filter(|e| !e.kind.is_dummy())
            .map(|e| Edge {
                id: e.id,
                src: e.src,
                dst: e.dst,
            })
            .collect();
        for e in self.dummy_edges() {
            if let EdgeKind::DummyExit { origin } = e.kind {
                let (entry, _) = self.dummy_pair(origin).unwrap();
                out.push(Edge {
                    id: origin,
                    src: e.src,
                    dst: entry.dst,
                });
            }
        }
        out.sort_by_key(|e| e.id);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn names(cfg: &Cfg, ids: &[EdgeId]) -> Vec<String> {
        ids.iter()
            .map(|&id| cfg.describe_edge(cfg.edge(id).unwrap()))
            .collect()
    }

    #[test]
    fn minimal_two_block_graph() {
        let cfg = parse_cfg("entry A\nexit B\nedge A B\n").unwrap();
        assert_eq!(cfg.num_blocks(), 2);
        assert_eq!(cfg.edges().len(), 1);
        assert_eq!(cfg.name(), "");
    }

    #[test]
    fn dl1_shape() {
        let cfg = fixtures::dl1();
        assert_eq!(cfg.name(), "dl1");
        assert_eq!(cfg.num_blocks(), 6);
        assert_eq!(cfg.edges().len(), 7);
        let back = find_back_edges(&cfg).unwrap();
        assert_eq!(names(&cfg, &back), ["E -> B"]);
    }

    #[test]
    fn unknown_block_reports_position() {
        let err = parse_cfg("block A B\nentry A\nexit B\nedge A Z\n").unwrap_err();
        assert_eq!(
            err,
            CfgError::UnknownBlock {
                line: 4,
                column: 8,
                block: "Z".into()
            }
        );
        assert!(err.to_string().contains("unknown block"));
    }

    #[test]
    fn syntax_errors() {
        assert!(matches!(
            parse_cfg("entry A\nexit B\nfrobnicate A\n"),
            Err(CfgError::Syntax {
                line: 3,
                column: 1,
                ..
            })
        ));
        assert!(matches!(
            parse_cfg("entry A\nexit B\nedge A\n"),
            Err(CfgError::Syntax { line: 3, .. })
        ));
        assert!(matches!(
            parse_cfg("entry A\nentry B\n"),
            Err(CfgError::Syntax { line: 2, .. })
        ));
    }

    #[test]
    fn missing_entry_exit_and_reachability() {
        assert_eq!(
            parse_cfg("exit B\nblock A\n").unwrap_err(),
            CfgError::MissingEntry
        );
        assert_eq!(parse_cfg("entry A\n").unwrap_err(), CfgError::MissingExit);
        assert_eq!(
            parse_cfg("entry A\nexit B\nblock C\nedge A B\n").unwrap_err(),
            CfgError::Unreachable("C".into())
        );
        assert_eq!(
            parse_cfg("entry A\nexit B\nblock C\nedge A B\nedge A C\nedge C C\n").unwrap_err(),
            CfgError::CannotReachExit("C".into())
        );
        assert!(matches!(
            parse_cfg("entry A\nexit B\nedge A B\nedge B A\n"),
            Err(CfgError::ExitHasSuccessor { .. })
        ));
    }

    #[test]
    fn comments_and_blank_lines() {
        let cfg =
            parse_cfg("# header\ncfg f # name\n\nentry A\nexit B\nedge A B # only edge\n").unwrap();
        assert_eq!(cfg.name(), "f");
        assert_eq!(cfg.edges().len(), 1);
    }

    #[test]
    fn diamond_has_no_back_edges() {
        let cfg = parse_cfg("entry A\nexit D\nblock B C\nedge A B\nedge A C\nedge B D\nedge C D\n")
            .unwrap();
        assert!(find_back_edges(&cfg).unwrap().is_empty());
        let dag = to_dag(&cfg).unwrap();
        assert_eq!(dag.edges().len(), 4);
        assert!(dag.dummy_edges().next().is_none());
        assert!(dag
            .edges()
            .iter()
            .zip(cfg.edges())
            .all(|(d, e)| d.id == e.id && d.src == e.src && d.dst == e.dst));
    }

    #[test]
    fn irreducible_loop_is_rejected() {
        let cfg = parse_cfg(
            "entry P\nexit Q\nblock X Y\nedge P X\nedge P Y\nedge X Y\nedge Y X\nedge X Q\nedge Y Q\n",
        )
        .unwrap();
        match find_back_edges(&cfg) {
            Err(CfgError::Irreducible { src, dst, .. }) => {
                assert!((src == "X" && dst == "Y") || (src == "Y" && dst == "X"));
            }
            other => panic!("expected irreducibility error, got {other:?}"),
        }
        assert!(matches!(to_dag(&cfg), Err(CfgError::Irreducible { .. })));
    }

    #[test]
    fn loop_to_entry_is_rejected() {
        let cfg = parse_cfg("entry A\nexit B\nedge A A\nedge A B\n").unwrap();
        assert!(matches!(
            find_back_edges(&cfg),
            Err(CfgError::BackEdgeToEntry { .. })
        ));
    }

    #[test]
    fn dl1_dag_edges() {
        let cfg = fixtures::dl1();
        let dag = to_dag(&cfg).unwrap();
        let render: Vec<String> = dag
            .edges()
            .iter()
            .map(|e| {
                let arrow = if e.kind.is_dummy() { "~>" } else { "->" };
                format!(
                    "{}{}{}",
                    cfg.block_name(e.src),
                    arrow,
                    cfg.block_name(e.dst)
                )
            })
            .collect();
        assert_eq!(
            render,
            ["A->B", "B->C", "B->D", "C->E", "D->E", "E->F", "A~>B", "E~>F"]
        );
        let back = dag.back_edges()[0];
        let (en, ex) = dag.dummy_pair(back).unwrap();
        assert_eq!(en.kind, EdgeKind::DummyEntry { origin: back });
        assert_eq!(ex.kind, EdgeKind::DummyExit { origin: back });
        assert_eq!(dag.restore(), cfg.edges());
    }

    #[test]
    fn two_headers_get_two_dummy_pairs() {
        let text = "entry A\nexit F\nblock B C D E\n\
                    edge A B\nedge B C\nedge C B\nedge C D\nedge D E\nedge E D\nedge E F\n";
        let cfg = parse_cfg(text).unwrap();
        let dag = to_dag(&cfg).unwrap();
        assert_eq!(names(&cfg, dag.back_edges()), ["C -> B", "E -> D"]);
        let entries = dag
            .dummy_edges()
            .filter(|e| matches!(e.kind, EdgeKind::DummyEntry { .. }))
            .count();
        let exits = dag
            .dummy_edges()
            .filter(|e| matches!(e.kind, EdgeKind::DummyExit { .. }))
            .count();
        assert_eq!((entries, exits), (2, 2));
    }

    #[test]
    fn dummy_first_placement() {
        let dag = to_dag(&fixtures::dl1_ordered()).unwrap();
        assert!(dag.edges()[0].kind.is_dummy() && dag.edges()[1].kind.is_dummy());
    }

    #[test]
    fn self_loop_is_a_back_edge() {
        let cfg = parse_cfg("entry A\nexit C\nblock B\nedge A B\nedge B B\nedge B C\n").unwrap();
        let dag = to_dag(&cfg).unwrap();
        assert_eq!(names(&cfg, dag.back_edges()), ["B -> B"]);
        assert_eq!(dag.topological_order().len(), 3);
    }

    #[test]
    fn edge_counts_map_parallel_edges_in_order() {
        let cfg = parse_cfg("entry A\nexit B\nedge A B\nedge A B\n").unwrap();
        let c = parse_edge_counts(&cfg, "A B 5\n# c\nA B 7\n").unwrap();
        assert_eq!((c[&EdgeId(0)], c[&EdgeId(1)]), (5, 7));
        assert!(matches!(
            parse_edge_counts(&cfg, "A B 1\nA B 1\nA B 1\n"),
            Err(CfgError::Syntax { line: 3, .. })
        ));
        assert!(matches!(
            parse_edge_counts(&cfg, "B A 1"),
            Err(CfgError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            parse_edge_counts(&cfg, "A Q 1"),
            Err(CfgError::UnknownBlock { column: 3, .. })
        ));
        assert!(matches!(
            parse_edge_counts(&cfg, "A B x"),
            Err(CfgError::Syntax { column: 5, .. })
        ));
    }
}
