//! Seeded synthetic workloads: random reducible CFGs and path-ID streams.

use rand::Rng;

use crate::cfg::{Block, Cfg, CfgBuilder};
use crate::tracer::{PathStream, Routine};

/// Random structured (hence reducible) CFG with at most `max_blocks` blocks.
///
/// Built from sequences, if/else diamonds, while loops, do-while loops and
/// occasional early returns, between a fresh entry and a fresh exit.
pub fn random_reducible_cfg<R: Rng>(rng: &mut R, name: &str, max_blocks: usize) -> Cfg {
    assert!(max_blocks >= 3, "need room for entry, body and exit");
    let mut g = Gen {
        b: CfgBuilder::new(name),
        next: 0,
        budget: max_blocks - 2,
        returns: Vec::new(),
    };
    let entry = g.fresh();
    let (first, last) = g.region(rng, 0);
    let exit = g.b.block("exit");
    g.b.edge(entry, first);
    g.b.edge(last, exit);
    for src in std::mem::take(&mut g.returns) {
        g.b.edge(src, exit);
    }
    g.b.entry(entry).exit(exit);
    g.b.build().expect("structured graphs are well formed")
}

struct Gen {
    b: CfgBuilder,
    next: usize,
    budget: usize,
    returns: Vec<Block>,
}

impl Gen {
    fn fresh(&mut self) -> Block {
        let name = format!("b{}", self.next);
        self.next += 1;
        self.b.block(&name)
    }

    fn take(&mut self) -> Option<Block> {
        if self.budget == 0 {
            return None;
        }
        self.budget -= 1;
        Some(self.fresh())
    }

    /// Single-entry single-exit region; returns (first, last) block.
    fn region<R: Rng>(&mut self, rng: &mut R, depth: usize) -> (Block, Block) {
        let one = self.take().expect("caller reserved a block");
        if depth > 4 || self.budget == 0 {
            return (one, one);
        }
        match rng.gen_range(0..6) {
            // sequence
            0 => {
                let (f, l) = self.region(rng, depth + 1);
                self.b.edge(one, f);
                (one, l)
            }
            // diamond, possibly with an empty arm (parallel edges allowed)
            1 | 2 => {
                let (tf, tl) = self.region(rng, depth + 1);
                self.b.edge(one, tf);
                let Some(join) = self.take() else {
                    return (one, tl);
                };
                self.b.edge(tl, join);
                if self.budget > 0 && rng.gen_bool(0.6) {
                    let (ef, el) = self.region(rng, depth + 1);
                    self.b.edge(one, ef);
                    self.b.edge(el, join);
                } else {
                    self.b.edge(one, join);
                }
                (one, join)
            }
            // while loop: `one` is the header
            3 => {
                let (bf, bl) = self.region(rng, depth + 1);
                self.b.edge(one, bf);
                self.b.edge(bl, one);
                if rng.gen_bool(0.2) {
                    self.returns.push(bl);
                }
                (one, one)
            }
            // do-while loop, self loop when the body is one block
            4 => {
                if rng.gen_bool(0.3) {
                    self.b.edge(one, one);
                    return (one, one);
                }
                let (bf, bl) = self.region(rng, depth + 1);
                self.b.edge(one, bf);
                self.b.edge(bl, one);
                let after = self.take().unwrap_or(bl);
                if after != bl {
                    self.b.edge(bl, after);
                    return (one, after);
                }
                // no room left: exit the loop from its latch
                (one, bl)
            }
            _ => {
                if rng.gen_bool(0.5) {
                    self.returns.push(one);
                }
                let (f, l) = self.region(rng, depth + 1);
                self.b.edge(one, f);
                (one, l)
            }
        }
    }
}

/// Random stream of `segments` marker-delimited runs with lengths drawn from
/// `lens` and IDs below `alphabet`.
///
/// IDs follow a sparse random Markov chain so that repeated n-grams are
/// common, as they are in loop-heavy code.
pub fn random_stream<R: Rng>(
    rng: &mut R,
    segments: usize,
    lens: std::ops::RangeInclusive<usize>,
    alphabet: u64,
    routines: usize,
) -> PathStream<u64> {
    assert!(alphabet > 0);
    let fanout = 3.min(alphabet as usize);
    let succ: Vec<Vec<u64>> = (0..alphabet)
        .map(|_| (0..fanout).map(|_| rng.gen_range(0..alphabet)).collect())
        .collect();
    let names: Vec<Routine> = (0..routines.max(1))
        .map(|i| {
            if i == 0 {
                Routine::anonymous()
            } else {
                Routine(format!("r{i}"))
            }
        })
        .collect();
    PathStream::from_segments((0..segments).map(|_| {
        let len = rng.gen_range(lens.clone());
        let mut at = rng.gen_range(0..alphabet);
        let ids: Vec<u64> = (0..len)
            .map(|_| {
                let cur = at;
                at = if rng.gen_bool(0.1) {
                    rng.gen_range(0..alphabet)
                } else {
                    succ[cur as usize][rng.gen_range(0..fanout)]
                };
                cur
            })
            .collect();
        (names[rng.gen_range(0..names.len())].clone(), ids)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfg::to_dag;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_graphs_are_reducible_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut with_loops = 0;
        for i in 0..300 {
            let cfg = random_reducible_cfg(&mut rng, &format!("g{i}"), 12);
            assert!(cfg.num_blocks() <= 12);
            let dag = to_dag(&cfg).unwrap();
            with_loops += usize::from(!dag.back_edges().is_empty());
        }
        assert!(with_loops > 100, "{with_loops}");
    }

    #[test]
    fn stream_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = random_stream(&mut rng, 20, 1..=50, 16, 3);
        let segs = s.segments();
        assert_eq!(segs.len(), 20);
        assert!(segs
            .iter()
            .all(|g| (1..=50).contains(&g.ids.len()) && g.ids.iter().all(|&i| i < 16)));
    }
}
