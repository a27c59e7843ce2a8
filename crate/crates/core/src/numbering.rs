//! Ball-Larus edge values over a [`DagCfg`].
//!
//! Blocks are processed in reverse topological order; each outgoing edge gets
//! the number of paths already accounted for at its source, so that the sum
//! of values along any entry-to-exit path is a unique ID in `[0, N)`.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::cfg::{Block, Cfg, DagCfg, DagEdge, EdgeId, EdgeKind};
use crate::word::PathWord;

/// Default bound on the number of paths [`enumerate_paths`] will list.
pub const DEFAULT_ENUMERATION_CAP: u64 = 100_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NumberingError {
    #[error("path count at block `{block}` exceeds the {bits}-bit path register")]
    Overflow { block: String, bits: u32 },
    #[error("{paths} paths exceed the enumeration cap of {cap}")]
    CapExceeded { paths: String, cap: u64 },
    #[error("path id {id} out of range [0, {total})")]
    IdOutOfRange { id: String, total: String },
}

/// Edge values and per-block path counts produced by numbering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeValues<W> {
    val: Vec<Option<W>>,
    num_paths: Vec<W>,
    total: W,
    /// Per-block outgoing visit order that produced `val`.
    order: Vec<Vec<EdgeId>>,
}

impl<W: PathWord> EdgeValues<W> {
    /// `val(e)`, or `None` for ids not in the DAG (removed back edges).
    pub fn val(&self, id: EdgeId) -> Option<W> {
        self.val.get(id.index()).copied().flatten()
    }

    pub fn num_paths(&self, b: Block) -> W {
        self.num_paths[b.index()]
    }

    /// N, the number of entry-to-exit paths.
    pub fn total_paths(&self) -> W {
        self.total
    }

    /// Outgoing edges of `b` in the order values were assigned.
    pub fn visit_order(&self, b: Block) -> &[EdgeId] {
        &self.order[b.index()]
    }

    /// Sum of values along `edges`; `None` if an edge is unknown or the sum overflows.
    pub fn encode(&self, edges: &[EdgeId]) -> Option<W> {
        edges
            .iter()
            .try_fold(W::zero(), |acc, &e| acc.checked_add(&self.val(e)?))
    }
}

/// Canonical numbering: outgoing edges visited in DAG edge-list order.
pub fn bl_number<W: PathWord>(dag: &DagCfg) -> Result<EdgeValues<W>, NumberingError> {
    number_in_order(dag, |b| dag.successors(b).map(|e| e.id).collect())
}

/// Frequency of each edge, for smart numbering. Dummy edges without an
/// explicit entry inherit the frequency of the back edge they replace.
pub type EdgeFrequencies = HashMap<EdgeId, u64>;

/// Smart numbering: the hottest outgoing edge of every block gets value 0.
/// Ties keep the canonical order.
pub fn smart_number<W: PathWord>(
    dag: &DagCfg,
    freq: &EdgeFrequencies,
) -> Result<EdgeValues<W>, NumberingError> {
    let weight = |e: &DagEdge| {
        freq.get(&e.id)
            .or_else(|| e.kind.origin().and_then(|o| freq.get(&o)))
            .copied()
            .unwrap_or(0)
    };
    number_in_order(dag, |b| {
        let mut out: Vec<&DagEdge> = dag.successors(b).collect();
        out.sort_by_key(|e| std::cmp::Reverse(weight(e)));
        out.into_iter().map(|e| e.id).collect()
    })
}

fn number_in_order<W: PathWord>(
    dag: &DagCfg,
    order_of: impl Fn(Block) -> Vec<EdgeId>,
) -> Result<EdgeValues<W>, NumberingError> {
    let cfg = dag.cfg();
    let mut val = vec![None; dag.id_bound()];
    let mut num_paths = vec![W::zero(); cfg.num_blocks()];
    let mut order = vec![Vec::new(); cfg.num_blocks()];
    for &v in dag.topological_order().iter().rev() {
        if v == cfg.exit() {
            num_paths[v.index()] = W::one();
            continue;
        }
        let mut acc = W::zero();
        let visit = order_of(v);
        for &id in &visit {
            let e = dag.edge(id).expect("visit order names DAG edges");
            val[id.index()] = Some(acc);
            acc = acc.checked_add(&num_paths[e.dst.index()]).ok_or_else(|| {
                NumberingError::Overflow {
                    block: cfg.block_name(v).to_owned(),
                    bits: W::BITS,
                }
            })?;
        }
        num_paths[v.index()] = acc;
        order[v.index()] = visit;
    }
    Ok(EdgeValues {
        val,
        total: num_paths[cfg.entry().index()],
        num_paths,
        order,
    })
}

/// One entry-to-exit DAG path, i.e. one Ball-Larus acyclic path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct DecodedPath {
    /// DAG edges taken, dummy edges included.
    pub edges: Vec<EdgeId>,
    /// Blocks actually executed: starts at the loop header when the path
    /// begins with a dummy-entry edge and omits the exit when it ends with a
    /// dummy-exit edge.
    pub blocks: Vec<Block>,
    /// Loop header the path starts at, if it begins via a dummy-entry edge.
    pub header: Option<Block>,
    /// Back edge the path ends on, if it ends via a dummy-exit edge.
    pub back_edge: Option<EdgeId>,
}

impl DecodedPath {
    fn from_edges(dag: &DagCfg, edges: Vec<EdgeId>) -> Self {
        let cfg = dag.cfg();
        let mut blocks = Vec::with_capacity(edges.len() + 1);
        let mut header = None;
        let mut back_edge = None;
        for (i, &id) in edges.iter().enumerate() {
            let e = dag.edge(id).expect("decoded edge belongs to the DAG");
            if i == 0 {
                match e.kind {
                    EdgeKind::DummyEntry { .. } => {
                        header = Some(e.dst);
                        blocks.push(e.dst);
                        continue;
                    }
                    _ => blocks.push(cfg.entry()),
                }
            }
            match e.kind {
                EdgeKind::DummyExit { origin } => back_edge = Some(origin),
                _ => blocks.push(e.dst),
            }
        }
        if edges.is_empty() {
            blocks.push(cfg.entry());
        }
        DecodedPath {
            edges,
            blocks,
            header,
            back_edge,
        }
    }

    /// Block names joined by spaces. A leading `~` marks a path starting at a
    /// loop header; a trailing `~>H` marks one ending on the back edge to `H`.
    pub fn render(&self, cfg: &Cfg) -> String {
        let mut s = String::new();
        if self.header.is_some() {
            s.push('~');
        }
        let names: Vec<&str> = self.blocks.iter().map(|&b| cfg.block_name(b)).collect();
        s.push_str(&names.join(" "));
        if let Some(be) = self.back_edge {
            let target = cfg.edge(be).expect("back edge is a real edge").dst;
            s.push_str(" ~>");
            s.push_str(cfg.block_name(target));
        }
        s
    }
}

/// Reconstructs the path with the given ID.
pub fn decode_path<W: PathWord>(
    id: W,
    dag: &DagCfg,
    ev: &EdgeValues<W>,
) -> Result<DecodedPath, NumberingError> {
    if id >= ev.total {
        return Err(NumberingError::IdOutOfRange {
            id: id.to_string(),
            total: ev.total.to_string(),
        });
    }
    let cfg = dag.cfg();
    let mut residue = id;
    let mut at = cfg.entry();
    let mut edges = Vec::new();
    while at != cfg.exit() {
        let (eid, v) = dag
            .successors(at)
            .filter_map(|e| ev.val(e.id).map(|v| (e.id, v)))
            .filter(|&(_, v)| v <= residue)
            .max_by_key(|&(_, v)| v)
            .expect("a zero-valued edge leaves every non-exit block");
        residue = residue - v;
        edges.push(eid);
        at = dag.edge(eid).unwrap().dst;
    }
    debug_assert!(residue.is_zero());
    Ok(DecodedPath::from_edges(dag, edges))
}

/// Every entry-to-exit path with its ID, sorted by ID. Fails when N exceeds `cap`.
pub fn enumerate_paths<W: PathWord>(
    dag: &DagCfg,
    ev: &EdgeValues<W>,
    cap: u64,
) -> Result<Vec<(W, DecodedPath)>, NumberingError> {
    if ev.total.to_u64().is_none_or(|n| n > cap) {
        return Err(NumberingError::CapExceeded {
            paths: ev.total.to_string(),
            cap,
        });
    }
    let cfg = dag.cfg();
    let mut out = Vec::new();
    let mut path: Vec<EdgeId> = Vec::new();
    // (block, index of next successor to try, id so far)
    let mut stack: Vec<(Block, usize, W)> = vec![(cfg.entry(), 0, W::zero())];
    while let Some(&mut (b, ref mut next, sum)) = stack.last_mut() {
        if b == cfg.exit() {
            out.push((sum, DecodedPath::from_edges(dag, path.clone())));
            stack.pop();
            path.pop();
            continue;
        }
        match dag.successors(b).nth(*next) {
            Some(e) => {
                *next += 1;
                let v = ev.val(e.id).expect("DAG edges are numbered");
                path.push(e.id);
                stack.push((e.dst, 0, sum + v));
            }
            None => {
                stack.pop();
                path.pop();
            }
        }
    }
    out.sort_by_key(|(id, _)| *id);
    Ok(out)
}

/// Probe placement implied by a numbering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InstrumentationPlan<W> {
    /// Real, non-back edges with a non-zero value: `r += val`.
    pub increments: Vec<(EdgeId, W)>,
    /// Back edges: emit `r + exit_val`, then `r = entry_val`.
    pub back_edges: Vec<BackEdgeProbe<W>>,
    /// Number of real CFG edges.
    pub real_edges: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BackEdgeProbe<W> {
    pub edge: EdgeId,
    pub exit_val: W,
    pub entry_val: W,
}

impl<W> InstrumentationPlan<W> {
    /// Real edges carrying any probe code.
    pub fn probed_edges(&self) -> Vec<EdgeId> {
        let mut ids: Vec<EdgeId> = self
            .increments
            .iter()
            .map(|&(e, _)| e)
            .chain(self.back_edges.iter().map(|p| p.edge))
            .collect();
        ids.sort();
        ids
    }

    pub fn len(&self) -> usize {
        self.increments.len() + self.back_edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn instrumentation_plan<W: PathWord>(
    dag: &DagCfg,
    ev: &EdgeValues<W>,
) -> InstrumentationPlan<W> {
    let increments = dag
        .edges()
        .iter()
        .filter(|e| e.kind == EdgeKind::Real)
        .filter_map(|e| ev.val(e.id).filter(|v| !v.is_zero()).map(|v| (e.id, v)))
        .collect();
    let back_edges = dag
        .back_edges()
        .iter()
        .map(|&edge| {
            let (en, ex) = dag.dummy_pair(edge).expect("every back edge has dummies");
            BackEdgeProbe {
                edge,
                exit_val: ev.val(ex.id).unwrap(),
                entry_val: ev.val(en.id).unwrap(),
            }
        })
        .collect();
    InstrumentationPlan {
        increments,
        back_edges,
        real_edges: dag.cfg().edges().len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfg::{parse_cfg, to_dag};
    use crate::fixtures;
    use std::collections::BTreeSet;

    fn dag_of(cfg: &Cfg) -> DagCfg {
        to_dag(cfg).unwrap()
    }

    fn edge_named(cfg: &Cfg, src: &str, dst: &str) -> EdgeId {
        cfg.find_edge(cfg.block(src).unwrap(), cfg.block(dst).unwrap())
            .unwrap()
            .id
    }

    /// Independent count: number of DAG paths by memoised DFS over successors.
    fn count_paths(dag: &DagCfg) -> u64 {
        fn go(dag: &DagCfg, b: Block, memo: &mut HashMap<Block, u64>) -> u64 {
            if b == dag.cfg().exit() {
                return 1;
            }
            if let Some(&c) = memo.get(&b) {
                return c;
            }
            let c = dag.successors(b).map(|e| go(dag, e.dst, memo)).sum();
            memo.insert(b, c);
            c
        }
        go(dag, dag.cfg().entry(), &mut HashMap::new())
    }

    #[test]
    fn straight_line() {
        let cfg = fixtures::straight();
        let dag = dag_of(&cfg);
        let ev = bl_number::<u64>(&dag).unwrap();
        assert_eq!(ev.total_paths(), 1);
        assert_eq!(ev.val(EdgeId(0)), Some(0));
        let p = decode_path(0, &dag, &ev).unwrap();
        assert_eq!(p.render(&cfg), "A B");
        assert!(instrumentation_plan(&dag, &ev).is_empty());
        let all = enumerate_paths(&dag, &ev, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].0, 0);
    }

    #[test]
    fn dl1_has_eight_paths() {
        let cfg = fixtures::dl1();
        let dag = dag_of(&cfg);
        assert_eq!(count_paths(&dag), 8);
        let ev = bl_number::<u64>(&dag).unwrap();
        assert_eq!(ev.total_paths(), 8);
        let ids: Vec<u64> = enumerate_paths(&dag, &ev, 100)
            .unwrap()
            .into_iter()
            .map(|p| p.0)
            .collect();
        assert_eq!(ids, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn dl1_ordered_ids() {
        let cfg = fixtures::dl1_ordered();
        let dag = dag_of(&cfg);
        let ev = bl_number::<u64>(&dag).unwrap();
        let render = |id| decode_path(id, &dag, &ev).unwrap().render(&cfg);
        assert_eq!(render(0), "~B D E ~>B");
        assert_eq!(render(2), "~B C E ~>B");
        assert_eq!(render(3), "~B C E F");
        assert_eq!(render(6), "A B C E ~>B");
        let p2 = decode_path(2u64, &dag, &ev).unwrap();
        assert_eq!(p2.header, cfg.block("B"));
        assert_eq!(p2.back_edge, Some(edge_named(&cfg, "E", "B")));
    }

    #[test]
    fn num_paths_recurrence() {
        for cfg in fixtures::all_cfgs() {
            let dag = dag_of(&cfg);
            let ev = bl_number::<u64>(&dag).unwrap();
            for b in cfg.blocks() {
                let expect = if b == cfg.exit() {
                    1
                } else {
                    dag.successors(b).map(|e| ev.num_paths(e.dst)).sum()
                };
                assert_eq!(ev.num_paths(b), expect);
            }
        }
    }

    #[test]
    fn decode_out_of_range() {
        let dag = dag_of(&fixtures::dl1());
        let ev = bl_number::<u64>(&dag).unwrap();
        assert!(matches!(
            decode_path(8, &dag, &ev),
            Err(NumberingError::IdOutOfRange { .. })
        ));
    }

    #[test]
    fn enumeration_cap() {
        let dag = dag_of(&fixtures::dl1());
        let ev = bl_number::<u64>(&dag).unwrap();
        assert!(matches!(
            enumerate_paths(&dag, &ev, 7),
            Err(NumberingError::CapExceeded { .. })
        ));
    }

    #[test]
    fn diamond_two_paths() {
        let cfg = parse_cfg("entry A\nexit D\nblock B C\nedge A B\nedge A C\nedge B D\nedge C D\n")
            .unwrap();
        let dag = dag_of(&cfg);
        let ev = bl_number::<u64>(&dag).unwrap();
        let ids: Vec<u64> = enumerate_paths(&dag, &ev, 10)
            .unwrap()
            .into_iter()
            .map(|p| p.0)
            .collect();
        assert_eq!(ids, [0, 1]);
    }

    #[test]
    fn narrow_register_overflows() {
        // 17 sequential diamonds: 2^17 paths, too many for u16.
        let mut text = String::from("entry B0\nexit B17\n");
        for i in 0..17 {
            text.push_str(&format!("block L{i} R{i} B{}\n", i + 1));
            text.push_str(&format!(
                "edge B{i} L{i}\nedge B{i} R{i}\nedge L{i} B{n}\nedge R{i} B{n}\n",
                n = i + 1
            ));
        }
        let cfg = parse_cfg(&text).unwrap();
        let dag = dag_of(&cfg);
        assert!(matches!(
            bl_number::<u16>(&dag),
            Err(NumberingError::Overflow { bits: 16, .. })
        ));
        assert_eq!(bl_number::<u32>(&dag).unwrap().total_paths(), 1 << 17);
    }

    #[test]
    fn smart_equal_frequencies_match_canonical() {
        for cfg in fixtures::all_cfgs() {
            let dag = dag_of(&cfg);
            let freq: EdgeFrequencies = cfg.edges().iter().map(|e| (e.id, 5)).collect();
            assert_eq!(
                bl_number::<u64>(&dag).unwrap(),
                smart_number::<u64>(&dag, &freq).unwrap()
            );
            assert_eq!(
                bl_number::<u64>(&dag).unwrap(),
                smart_number::<u64>(&dag, &EdgeFrequencies::new()).unwrap()
            );
        }
    }

    #[test]
    fn smart_zeroes_hot_edge() {
        let cfg = fixtures::dl1_ordered();
        let dag = dag_of(&cfg);
        let bc = edge_named(&cfg, "B", "C");
        let bd = edge_named(&cfg, "B", "D");
        let canonical = bl_number::<u64>(&dag).unwrap();
        assert_ne!(canonical.val(bc), Some(0));
        let freq: EdgeFrequencies = [(bc, 90), (bd, 10)].into_iter().collect();
        let smart = smart_number::<u64>(&dag, &freq).unwrap();
        assert_eq!(smart.val(bc), Some(0));
        assert_eq!(smart.total_paths(), canonical.total_paths());

        let plan = instrumentation_plan(&dag, &smart);
        assert!(!plan.probed_edges().contains(&bc));
        assert!(instrumentation_plan(&dag, &canonical)
            .probed_edges()
            .contains(&bc));

        // Same set of block sequences, same ID range.
        let seqs = |ev: &EdgeValues<u64>| -> (BTreeSet<u64>, BTreeSet<Vec<Block>>) {
            let all = enumerate_paths(&dag, ev, 100).unwrap();
            (
                all.iter().map(|p| p.0).collect(),
                all.into_iter().map(|p| p.1.blocks).collect(),
            )
        };
        assert_eq!(seqs(&canonical), seqs(&smart));
    }

    #[test]
    fn dummy_edges_inherit_back_edge_frequency() {
        let cfg = fixtures::dl1();
        let dag = dag_of(&cfg);
        let eb = edge_named(&cfg, "E", "B");
        let ef = edge_named(&cfg, "E", "F");
        let freq: EdgeFrequencies = [(eb, 100), (ef, 1)].into_iter().collect();
        let smart = smart_number::<u64>(&dag, &freq).unwrap();
        let (en, ex) = dag.dummy_pair(eb).unwrap();
        assert_eq!(smart.val(ex.id), Some(0));
        assert_eq!(smart.val(en.id), Some(0));
    }

    #[test]
    fn plan_is_smaller_than_edge_set() {
        for cfg in fixtures::all_cfgs()
            .into_iter()
            .filter(|c| c.dummy_placement() == Default::default())
        {
            let dag = dag_of(&cfg);
            let ev = bl_number::<u64>(&dag).unwrap();
            let plan = instrumentation_plan(&dag, &ev);
            assert!(plan.len() < plan.real_edges, "{}", cfg.name());
        }
    }

    #[test]
    fn encode_inverts_decode() {
        for cfg in fixtures::all_cfgs() {
            let dag = dag_of(&cfg);
            let ev = bl_number::<u64>(&dag).unwrap();
            for id in 0..ev.total_paths() {
                let p = decode_path(id, &dag, &ev).unwrap();
                assert_eq!(ev.encode(&p.edges), Some(id));
            }
        }
    }
}
