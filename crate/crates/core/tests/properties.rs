use std::collections::{BTreeMap, HashMap, HashSet};

use kpathprof::cfg::{to_dag, Cfg, DagCfg};
use kpathprof::kipf::{make_k_ipf, KIpf};
use kpathprof::ksf::{self, KSlabForest};
use kpathprof::numbering::{
    bl_number, decode_path, enumerate_paths, instrumentation_plan, smart_number, EdgeFrequencies,
    EdgeValues,
};
use kpathprof::oracle::{blpp_count, ngram_count};
use kpathprof::synth::{random_reducible_cfg, random_stream};
use kpathprof::tracer::{
    gen_trace, reconstruct, replay, EdgeWeights, PathStream, ReplayOptions, Routine,
};
use kpathprof::{fixtures, metrics};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn graph(seed: u64) -> (Cfg, DagCfg) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = random_reducible_cfg(&mut rng, "g", 12);
    let dag = to_dag(&cfg).unwrap();
    (cfg, dag)
}

fn random_freq(cfg: &Cfg, seed: u64) -> EdgeFrequencies {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cfg.edges()
        .iter()
        .map(|e| (e.id, rng.gen_range(0..50)))
        .collect()
}

fn assert_bijection(dag: &DagCfg, ev: &EdgeValues<u64>) {
    let paths = enumerate_paths(dag, ev, 1 << 20).unwrap();
    let ids: Vec<u64> = paths.iter().map(|p| p.0).collect();
    assert_eq!(ids, (0..ev.total_paths()).collect::<Vec<_>>());
    let distinct: HashSet<_> = paths.iter().map(|p| &p.1.edges).collect();
    assert_eq!(distinct.len(), paths.len());
}

fn stream_strategy() -> impl Strategy<Value = PathStream<u64>> {
    prop::collection::vec((0..3u8, prop::collection::vec(0..5u64, 0..40)), 0..8).prop_map(|segs| {
        PathStream::from_segments(segs.into_iter().map(|(r, ids)| {
            let name = if r == 0 {
                Routine::anonymous()
            } else {
                Routine(format!("f{r}"))
            };
            (name, ids)
        }))
    })
}

fn counts_shrink_downward(ipf: &KIpf<u64>) -> bool {
    ipf.walk().all(|(_, n, _)| {
        let node = ipf.node(n);
        node.count >= node.children().map(|c| ipf.node(c).count).sum::<u64>()
    })
}

fn paths_of(ipf: &KIpf<u64>) -> BTreeMap<(Routine, Vec<u64>), u64> {
    ipf.label_paths()
        .into_iter()
        .map(|(r, l, c)| ((r, l), c))
        .collect()
}

fn expected_finds(s: &PathStream<u64>, k: usize) -> u64 {
    s.segments()
        .iter()
        .map(|g| g.ids.len().div_ceil(k - 1) as u64)
        .sum()
}

fn unique_sibling_labels(f: &KSlabForest<u64>) -> bool {
    f.walk().all(|(_, n, _)| {
        let labels: Vec<u64> = f.children(n).map(|c| f.node(c).label).collect();
        labels.iter().collect::<HashSet<_>>().len() == labels.len()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn numberings_are_bijections(seed in any::<u64>()) {
        let (cfg, dag) = graph(seed);
        let canon = bl_number::<u64>(&dag).unwrap();
        assert_bijection(&dag, &canon);
        let smart = smart_number::<u64>(&dag, &random_freq(&cfg, seed ^ 1)).unwrap();
        assert_bijection(&dag, &smart);
        prop_assert_eq!(canon.total_paths(), smart.total_paths());
        let blocks = |ev: &EdgeValues<u64>| -> Vec<Vec<_>> {
            let mut v: Vec<_> = enumerate_paths(&dag, ev, 1 << 20).unwrap().into_iter().map(|p| p.1.edges).collect();
            v.sort();
            v
        };
        prop_assert_eq!(blocks(&canon), blocks(&smart));
    }

    #[test]
    fn decode_then_encode(seed in any::<u64>()) {
        let (cfg, dag) = graph(seed);
        for ev in [bl_number::<u64>(&dag).unwrap(), smart_number(&dag, &random_freq(&cfg, seed)).unwrap()] {
            for id in 0..ev.total_paths().min(2000) {
                let p = decode_path(id, &dag, &ev).unwrap();
                prop_assert_eq!(ev.encode(&p.edges), Some(id));
            }
            prop_assert!(decode_path(ev.total_paths(), &dag, &ev).is_err());
        }
    }

    #[test]
    fn num_paths_recurrence(seed in any::<u64>()) {
        let (cfg, dag) = graph(seed);
        let ev = bl_number::<u64>(&dag).unwrap();
        for b in cfg.blocks() {
            let want = if b == cfg.exit() { 1 } else { dag.successors(b).map(|e| ev.num_paths(e.dst)).sum() };
            prop_assert_eq!(ev.num_paths(b), want);
        }
        prop_assert_eq!(ev.total_paths(), ev.num_paths(cfg.entry()));
    }

    #[test]
    fn dag_shape(seed in any::<u64>()) {
        let (cfg, dag) = graph(seed);
        let pos: HashMap<_, _> = dag.topological_order().iter().enumerate().map(|(i, &b)| (b, i)).collect();
        prop_assert_eq!(pos.len(), cfg.num_blocks());
        for e in dag.edges() {
            prop_assert!(pos[&e.src] < pos[&e.dst]);
        }
        prop_assert_eq!(dag.dummy_edges().count(), 2 * dag.back_edges().len());
        let mut restored: Vec<_> = dag.restore().into_iter().map(|e| (e.id, e.src, e.dst)).collect();
        restored.sort();
        let original: Vec<_> = cfg.edges().iter().map(|e| (e.id, e.src, e.dst)).collect();
        prop_assert_eq!(restored, original);
    }

    #[test]
    fn canonical_plan_skips_an_edge(seed in any::<u64>()) {
        let (cfg, dag) = graph(seed);
        let plan = instrumentation_plan(&dag, &bl_number::<u64>(&dag).unwrap());
        prop_assert!(plan.len() < cfg.edges().len());
    }

    #[test]
    fn replay_round_trip(seed in any::<u64>()) {
        let (cfg, dag) = graph(seed);
        let ev = bl_number::<u64>(&dag).unwrap();
        let trace = gen_trace(&cfg, &random_freq(&cfg, seed).into_iter().map(|(e, w)| (e, w + 1)).collect::<EdgeWeights>(), 5, 60, seed).unwrap();
        let stream = replay(&dag, &ev, &trace, ReplayOptions::default()).unwrap();
        let in_range = stream.iter().all(|i| match i {
            kpathprof::StreamItem::Path(id) => *id < ev.total_paths(),
            _ => true,
        });
        prop_assert!(in_range);
        prop_assert_eq!(reconstruct(&dag, &ev, &stream).unwrap(), trace);
    }

    #[test]
    fn ksf_structure(s in stream_strategy(), k in 2usize..7, mtf in any::<bool>()) {
        let f = ksf::build_with(&s, k, ksf::KsfOptions { move_to_front: mtf }).unwrap();
        if let Some(d) = f.max_depth() {
            prop_assert!(d <= 2 * k - 3, "depth {} for k = {}", d, k);
        }
        prop_assert!(unique_sibling_labels(&f));
        let stats = f.hash_op_stats();
        prop_assert!(stats.max_item_visits <= 2 * f.max_degree() as u64);
        prop_assert_eq!(stats.finds, expected_finds(&s, k));
    }

    #[test]
    fn kipf_matches_oracle_and_properties(s in stream_strategy(), k in 2usize..8) {
        let ipf = make_k_ipf(&ksf::build(&s, k).unwrap()).unwrap();
        let table = ngram_count(&s, k).unwrap();
        prop_assert_eq!(kpathprof::oracle::compare(&ipf, &table), None);
        prop_assert!(counts_shrink_downward(&ipf));
        for ((r, id), c) in blpp_count(&s) {
            prop_assert_eq!(ipf.query_in(r.as_str(), &[id]).unwrap(), c);
        }
        let next = make_k_ipf(&ksf::build(&s, k + 1).unwrap()).unwrap();
        let bigger = paths_of(&next);
        for (key, c) in paths_of(&ipf) {
            prop_assert_eq!(bigger.get(&key), Some(&c));
        }
    }

    #[test]
    fn kipf_nodes_grow_with_k(s in stream_strategy()) {
        let t = metrics::compare_runs(&s, &[2, 3, 4, 5, 6, 8]).unwrap();
        for w in t.rows.windows(2) {
            prop_assert!(w[0].kipf_nodes <= w[1].kipf_nodes);
            prop_assert!(w[0].hash_finds >= w[1].hash_finds);
        }
        for r in &t.rows {
            prop_assert!(r.kipf_nodes >= t.baseline.table_entries);
        }
    }
}

#[test]
fn fixtures_biject() {
    for cfg in fixtures::all_cfgs() {
        let dag = to_dag(&cfg).unwrap();
        assert_bijection(&dag, &bl_number(&dag).unwrap());
        let freq: EdgeFrequencies = cfg
            .edges()
            .iter()
            .map(|e| (e.id, e.id.0 as u64 % 3))
            .collect();
        assert_bijection(&dag, &smart_number(&dag, &freq).unwrap());
    }
}

#[test]
fn synthetic_streams_agree_with_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..10 {
        let s = random_stream(&mut rng, 30, 1..=60, 12, 2);
        for k in [2, 3, 5] {
            let ipf = make_k_ipf(&ksf::build(&s, k).unwrap()).unwrap();
            assert_eq!(
                kpathprof::oracle::compare(&ipf, &ngram_count(&s, k).unwrap()),
                None
            );
        }
    }
}
