//! Path-ID streams: replaying block traces through the Ball-Larus probes,
//! reading and writing stream files, and generating synthetic traces.

use std::collections::VecDeque;
use std::fmt;
use std::io::BufRead;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::cfg::{Block, Cfg, DagCfg, EdgeId};
use crate::numbering::{decode_path, EdgeValues, NumberingError};
use crate::word::PathWord;

/// Routine identifier carried by stream markers. Empty for the anonymous
/// routine written as a bare `*`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize)]
#[serde(transparent)]
pub struct Routine(pub String);

impl Routine {
    pub fn anonymous() -> Self {
        Routine(String::new())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Routine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "*{}", self.0)
    }
}

impl From<&str> for Routine {
    fn from(s: &str) -> Self {
        Routine(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StreamItem<W> {
    /// Routine entry.
    Marker(Routine),
    /// A completed Ball-Larus path.
    Path(W),
}

impl<W: fmt::Display> fmt::Display for StreamItem<W> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StreamItem::Marker(r) => write!(f, "{r}"),
            StreamItem::Path(id) => write!(f, "{id}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("stream line {line}, token {token}: cannot parse `{text}` as a path id or marker")]
pub struct StreamParseError {
    pub line: usize,
    /// 1-based token index within the whole stream.
    pub token: u64,
    pub text: String,
}

/// An ordered sequence of markers and path IDs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PathStream<W> {
    items: Vec<StreamItem<W>>,
}

/// Marker-delimited run of path IDs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment<W> {
    pub routine: Routine,
    pub ids: Vec<W>,
}

impl<W: PathWord> PathStream<W> {
    pub fn new() -> Self {
        PathStream { items: Vec::new() }
    }

    pub fn push(&mut self, item: StreamItem<W>) {
        self.items.push(item);
    }

    pub fn items(&self) -> &[StreamItem<W>] {
        &self.items
    }

    pub fn iter(&self) -> std::slice::Iter<'_, StreamItem<W>> {
        self.items.iter()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn marker_count(&self) -> usize {
        self.items
            .iter()
            .filter(|i| matches!(i, StreamItem::Marker(_)))
            .count()
    }

    /// Splits at markers. IDs before the first marker form an anonymous
    /// segment; a marker followed directly by another yields an empty one.
    pub fn segments(&self) -> Vec<Segment<W>> {
        let mut out: Vec<Segment<W>> = Vec::new();
        for item in &self.items {
            match item {
                StreamItem::Marker(r) => out.push(Segment {
                    routine: r.clone(),
                    ids: Vec::new(),
                }),
                StreamItem::Path(id) => match out.last_mut() {
                    Some(seg) => seg.ids.push(*id),
                    None => out.push(Segment {
                        routine: Routine::anonymous(),
                        ids: vec![*id],
                    }),
                },
            }
        }
        out
    }

    /// One segment per marker, e.g. `* 0 1` `*f 2`.
    pub fn from_segments<I, S>(segments: I) -> Self
    where
        I: IntoIterator<Item = (Routine, S)>,
        S: IntoIterator<Item = W>,
    {
        let mut s = PathStream::new();
        for (r, ids) in segments {
            s.push(StreamItem::Marker(r));
            s.items.extend(ids.into_iter().map(StreamItem::Path));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, StreamParseError> {
        StreamReader::new(text.as_bytes())
            .collect::<Result<Vec<_>, _>>()
            .map(|items| PathStream { items })
    }
}

impl<W: PathWord> FromIterator<StreamItem<W>> for PathStream<W> {
    fn from_iter<I: IntoIterator<Item = StreamItem<W>>>(iter: I) -> Self {
        PathStream {
            items: iter.into_iter().collect(),
        }
    }
}

impl<'a, W> IntoIterator for &'a PathStream<W> {
    type Item = &'a StreamItem<W>;
    type IntoIter = std::slice::Iter<'a, StreamItem<W>>;
    fn into_iter(self) -> Self::IntoIter {
        self.items.iter()
    }
}

/// One line per marker; IDs separated by single spaces.
impl<W: fmt::Display> fmt::Display for PathStream<W> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first_on_line = true;
        for (i, item) in self.items.iter().enumerate() {
            if matches!(item, StreamItem::Marker(_)) && i > 0 {
                writeln!(f)?;
                first_on_line = true;
            }
            if !first_on_line {
                f.write_str(" ")?;
            }
            write!(f, "{item}")?;
            first_on_line = false;
        }
        if !self.items.is_empty() {
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Incremental stream-file reader; yields items strictly in input order.
pub struct StreamReader<R, W> {
    input: R,
    line: usize,
    token: u64,
    pending: VecDeque<String>,
    buf: String,
    _word: std::marker::PhantomData<W>,
}

impl<R: BufRead, W: PathWord> StreamReader<R, W> {
    pub fn new(input: R) -> Self {
        StreamReader {
            input,
            line: 0,
            token: 0,
            pending: VecDeque::new(),
            buf: String::new(),
            _word: std::marker::PhantomData,
        }
    }
}

impl<R: BufRead, W: PathWord> Iterator for StreamReader<R, W> {
    type Item = Result<StreamItem<W>, StreamParseError>;

    fn next(&mut self) -> Option<Self::Item> {
        while self.pending.is_empty() {
            self.buf.clear();
            match self.input.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {
                    self.line += 1;
                    self.pending
                        .extend(self.buf.split_whitespace().map(str::to_owned));
                }
                Err(e) => {
                    return Some(Err(StreamParseError {
                        line: self.line + 1,
                        token: self.token + 1,
                        text: e.to_string(),
                    }))
                }
            }
        }
        let tok = self.pending.pop_front()?;
        self.token += 1;
        let item = match tok.strip_prefix('*') {
            Some(name) => Ok(StreamItem::Marker(Routine(name.to_owned()))),
            None => tok
                .parse::<W>()
                .map(StreamItem::Path)
                .map_err(|_| StreamParseError {
                    line: self.line,
                    token: self.token,
                    text: tok.clone(),
                }),
        };
        Some(item)
    }
}

/// A single routine invocation as the sequence of executed blocks.
pub type Invocation = Vec<Block>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraceError {
    #[error("trace line {line}, column {column}: unknown block `{block}`")]
    UnknownBlock {
        line: usize,
        column: usize,
        block: String,
    },
    #[error("invocation {invocation}, step {step}: invalid transition {from} -> {to}")]
    InvalidTransition {
        invocation: usize,
        step: usize,
        from: String,
        to: String,
    },
    #[error("invocation {invocation} starts at `{block}`, not at the entry block")]
    BadStart { invocation: usize, block: String },
    #[error("invocation {invocation} ends at `{block}`, not at the exit block (use allow-partial to accept)")]
    Truncated { invocation: usize, block: String },
    #[error("invocation {invocation} is empty")]
    Empty { invocation: usize },
    #[error("block `{0}` has no outgoing edge with positive weight")]
    NoPositiveWeight(String),
    #[error(transparent)]
    Numbering(#[from] NumberingError),
}

/// Parses a trace file: one invocation per line, whitespace-separated block
/// names, `#` comments. Blank lines are skipped.
pub fn parse_trace(cfg: &Cfg, text: &str) -> Result<Vec<Invocation>, TraceError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("");
        let mut inv = Vec::new();
        for (column, name) in crate::cfg::tokens(content) {
            let b = cfg.block(name).ok_or_else(|| TraceError::UnknownBlock {
                line: i + 1,
                column,
                block: name.to_owned(),
            })?;
            inv.push(b);
        }
        if !inv.is_empty() {
            out.push(inv);
        }
    }
    Ok(out)
}

pub fn render_trace(cfg: &Cfg, trace: &[Invocation]) -> String {
    let mut s = String::new();
    for inv in trace {
        let names: Vec<&str> = inv.iter().map(|&b| cfg.block_name(b)).collect();
        s.push_str(&names.join(" "));
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReplayOptions {
    /// Accept invocations that stop before the exit block, emitting the
    /// current probe value as their last ID.
    pub allow_partial: bool,
}

/// Replays `trace` through the probes implied by `ev`, collecting the stream.
pub fn replay<W: PathWord>(
    dag: &DagCfg,
    ev: &EdgeValues<W>,
    trace: &[Invocation],
    opts: ReplayOptions,
) -> Result<PathStream<W>, TraceError> {
    let mut out = PathStream::new();
    replay_into(dag, ev, trace, opts, |item| out.push(item))?;
    Ok(out)
}

/// Like [`replay`], handing each item to `emit` as soon as it is produced.
pub fn replay_into<W: PathWord>(
    dag: &DagCfg,
    ev: &EdgeValues<W>,
    trace: &[Invocation],
    opts: ReplayOptions,
    mut emit: impl FnMut(StreamItem<W>),
) -> Result<(), TraceError> {
    let cfg = dag.cfg();
    let routine = Routine(cfg.name().to_owned());
    for (n, inv) in trace.iter().enumerate() {
        let invocation = n + 1;
        let Some(&first) = inv.first() else {
            return Err(TraceError::Empty { invocation });
        };
        if first != cfg.entry() {
            return Err(TraceError::BadStart {
                invocation,
                block: cfg.block_name(first).to_owned(),
            });
        }
        emit(StreamItem::Marker(routine.clone()));
        let mut r = W::zero();
        for (step, pair) in inv.windows(2).enumerate() {
            let (u, w) = (pair[0], pair[1]);
            let edge = cfg
                .find_edge(u, w)
                .ok_or_else(|| TraceError::InvalidTransition {
                    invocation,
                    step: step + 1,
                    from: cfg.block_name(u).to_owned(),
                    to: cfg.block_name(w).to_owned(),
                })?;
            if dag.is_back_edge(edge.id) {
                let (en, ex) = dag.dummy_pair(edge.id).expect("back edge has dummies");
                emit(StreamItem::Path(r + ev.val(ex.id).unwrap()));
                r = ev.val(en.id).unwrap();
            } else {
                r = r + ev.val(edge.id).unwrap();
            }
        }
        let last = *inv.last().unwrap();
        if last != cfg.exit() && !opts.allow_partial {
            return Err(TraceError::Truncated {
                invocation,
                block: cfg.block_name(last).to_owned(),
            });
        }
        emit(StreamItem::Path(r));
    }
    Ok(())
}

/// Inverse of [`replay`] for complete invocations: decodes every ID and
/// splices consecutive paths at their back edges.
pub fn reconstruct<W: PathWord>(
    dag: &DagCfg,
    ev: &EdgeValues<W>,
    stream: &PathStream<W>,
) -> Result<Vec<Invocation>, TraceError> {
    let mut out = Vec::new();
    for seg in stream.segments() {
        let mut inv = Vec::new();
        for &id in &seg.ids {
            inv.extend(decode_path(id, dag, ev)?.blocks);
        }
        out.push(inv);
    }
    Ok(out)
}

/// Per-edge weights for [`gen_trace`]; missing edges weigh 0.
pub type EdgeWeights = std::collections::HashMap<EdgeId, u64>;

/// Seeded weighted random walks from the entry. After `max_steps` edges the
/// walk follows a shortest path to the exit.
pub fn gen_trace(
    cfg: &Cfg,
    weights: &EdgeWeights,
    invocations: usize,
    max_steps: usize,
    seed: u64,
) -> Result<Vec<Invocation>, TraceError> {
    let mut choosers = Vec::with_capacity(cfg.num_blocks());
    for b in cfg.blocks() {
        if b == cfg.exit() {
            choosers.push(None);
            continue;
        }
        let succ: Vec<(Block, u64)> = cfg
            .successors(b)
            .map(|e| (e.dst, weights.get(&e.id).copied().unwrap_or(0)))
            .collect();
        let dist = WeightedIndex::new(succ.iter().map(|s| s.1))
            .map_err(|_| TraceError::NoPositiveWeight(cfg.block_name(b).to_owned()))?;
        choosers.push(Some((succ, dist)));
    }
    let to_exit = distances_to_exit(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace = Vec::with_capacity(invocations);
    for _ in 0..invocations {
        let mut at = cfg.entry();
        let mut inv = vec![at];
        let mut steps = 0;
        while at != cfg.exit() {
            at = if steps < max_steps {
                let (succ, dist) = choosers[at.index()].as_ref().unwrap();
                succ[dist.sample(&mut rng)].0
            } else {
                cfg.successors(at)
                    .map(|e| e.dst)
                    .min_by_key(|d| to_exit[d.index()])
                    .unwrap()
            };
            inv.push(at);
            steps += 1;
        }
        trace.push(inv);
    }
    Ok(trace)
}

fn distances_to_exit(cfg: &Cfg) -> Vec<usize> {
    let mut dist = vec![usize::MAX; cfg.num_blocks()];
    let mut queue = VecDeque::from([cfg.exit()]);
    dist[cfg.exit().index()] = 0;
    while let Some(b) = queue.pop_front() {
        for e in cfg.predecessors(b) {
            if dist[e.src.index()] == usize::MAX {
                dist[e.src.index()] = dist[b.index()] + 1;
                queue.push_back(e.src);
            }
        }
    }
    dist
}
