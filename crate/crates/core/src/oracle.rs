//! Brute-force reference counts. Nothing here touches the forests; the
//! sliding-window counter is the ground truth the pipeline is checked against.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::kipf::{profile_stream, KIpf, KipfError};
use crate::tracer::{PathStream, Routine};
use crate::word::PathWord;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("k must be at least 1, got {0}")]
    InvalidK(usize),
    #[error(transparent)]
    Pipeline(#[from] KipfError),
}

/// Count of every marker-free n-gram, `1 <= n <= k`, keyed by routine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramTable<W> {
    k: usize,
    counts: BTreeMap<(Routine, Vec<W>), u64>,
}

impl<W: PathWord> NGramTable<W> {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn get_in(&self, routine: &str, seq: &[W]) -> u64 {
        self.counts
            .get(&(Routine(routine.to_owned()), seq.to_vec()))
            .copied()
            .unwrap_or(0)
    }

    /// Count summed over routines.
    pub fn get(&self, seq: &[W]) -> u64 {
        self.counts
            .iter()
            .filter(|((_, s), _)| s.as_slice() == seq)
            .map(|(_, &c)| c)
            .sum()
    }

    /// Entries sorted by routine, then sequence.
    pub fn iter(&self) -> impl Iterator<Item = (&Routine, &[W], u64)> + '_ {
        self.counts.iter().map(|((r, s), &c)| (r, s.as_slice(), c))
    }
}

pub fn ngram_count<W: PathWord>(
    stream: &PathStream<W>,
    k: usize,
) -> Result<NGramTable<W>, OracleError> {
    if k == 0 {
        return Err(OracleError::InvalidK(0));
    }
    let mut counts = BTreeMap::new();
    for seg in stream.segments() {
        for start in 0..seg.ids.len() {
            for n in 1..=k.min(seg.ids.len() - start) {
                let key = (seg.routine.clone(), seg.ids[start..start + n].to_vec());
                *counts.entry(key).or_insert(0) += 1;
            }
        }
    }
    Ok(NGramTable { k, counts })
}

/// Frequency of every path ID, per routine.
pub fn blpp_count<W: PathWord>(stream: &PathStream<W>) -> BTreeMap<(Routine, W), u64> {
    let mut out = BTreeMap::new();
    for seg in stream.segments() {
        for &id in &seg.ids {
            *out.entry((seg.routine.clone(), id)).or_insert(0) += 1;
        }
    }
    out
}

/// First disagreement between a profile and the oracle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Mismatch<W> {
    pub routine: Routine,
    pub labels: Vec<W>,
    pub expected: u64,
    pub actual: u64,
}

/// Checks both directions: every n-gram has the right counter in `ipf`, and
/// `ipf` has no node the oracle does not know about.
pub fn compare<W: PathWord>(ipf: &KIpf<W>, table: &NGramTable<W>) -> Option<Mismatch<W>> {
    for (r, seq, expected) in table.iter() {
        let actual = ipf.query_in(r.as_str(), seq).unwrap_or(0);
        if actual != expected {
            return Some(Mismatch {
                routine: r.clone(),
                labels: seq.to_vec(),
                expected,
                actual,
            });
        }
    }
    ipf.label_paths()
        .into_iter()
        .find_map(|(routine, labels, actual)| {
            let expected = table.get_in(routine.as_str(), &labels);
            (expected != actual).then_some(Mismatch {
                routine,
                labels,
                expected,
                actual,
            })
        })
}

/// Runs the forest pipeline and compares it with [`ngram_count`].
pub fn verify<W: PathWord>(
    stream: &PathStream<W>,
    k: usize,
) -> Result<Option<Mismatch<W>>, OracleError> {
    let table = ngram_count(stream, k)?;
    let ipf = profile_stream(stream, k)?;
    Ok(compare(&ipf, &table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use proptest::prelude::*;

    fn example() -> PathStream<u64> {
        PathStream::parse(fixtures::EXAMPLE_STREAM).unwrap()
    }

    #[test]
    fn single_item() {
        let t = ngram_count(&PathStream::<u64>::parse("* 9").unwrap(), 3).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.get(&[9]), 1);
    }

    #[test]
    fn example_unigrams() {
        let t = ngram_count(&example(), 1).unwrap();
        let got: Vec<(Vec<u64>, u64)> = t.iter().map(|(_, s, c)| (s.to_vec(), c)).collect();
        assert_eq!(
            got,
            [(vec![0], 6), (vec![2], 6), (vec![3], 1), (vec![6], 1)]
        );
        let b: Vec<(u64, u64)> = blpp_count(&example())
            .into_iter()
            .map(|((_, id), c)| (id, c))
            .collect();
        assert_eq!(b, [(0, 6), (2, 6), (3, 1), (6, 1)]);
    }

    #[test]
    fn example_four_gram() {
        let t = ngram_count(&example(), 4).unwrap();
        assert_eq!(t.get(&[2, 0, 0, 2]), 3);
        assert_eq!(t.get(&[2, 0, 0, 2, 3]), 0);
    }

    #[test]
    fn markers_split_windows() {
        let t = ngram_count(&PathStream::<u64>::parse("* 0 * 0").unwrap(), 2).unwrap();
        assert_eq!(t.get(&[0]), 2);
        assert_eq!(t.get(&[0, 0]), 0);
        assert_eq!(
            blpp_count(&PathStream::<u64>::parse("* 0 * 0").unwrap()).len(),
            1
        );
        assert!(blpp_count(&PathStream::<u64>::new()).is_empty());
        assert_eq!(
            ngram_count(&example(), 0).unwrap_err(),
            OracleError::InvalidK(0)
        );
    }

    #[test]
    fn verify_example() {
        for k in 1..=8 {
            assert_eq!(verify(&example(), k).unwrap(), None, "k = {k}");
        }
    }

    fn arb_stream() -> impl Strategy<Value = PathStream<u64>> {
        prop::collection::vec((0..3u8, prop::collection::vec(0..6u64, 0..30)), 0..6).prop_map(
            |segs| {
                PathStream::from_segments(
                    segs.into_iter()
                        .map(|(r, ids)| (Routine(format!("r{r}")), ids)),
                )
            },
        )
    }

    proptest! {
        #[test]
        fn unigrams_are_blpp(s in arb_stream()) {
            let t = ngram_count(&s, 1).unwrap();
            let b = blpp_count(&s);
            prop_assert_eq!(t.len(), b.len());
            for ((r, id), c) in b {
                prop_assert_eq!(t.get_in(r.as_str(), &[id]), c);
            }
        }

        #[test]
        fn window_totals(s in arb_stream(), k in 1usize..6) {
            let t = ngram_count(&s, k).unwrap();
            for j in 1..=k {
                let total: u64 = t.iter().filter(|(_, seq, _)| seq.len() == j).map(|e| e.2).sum();
                let expect: u64 = s.segments().iter().map(|g| (g.ids.len() + 1).saturating_sub(j) as u64).sum();
                prop_assert_eq!(total, expect);
            }
        }
    }
}
