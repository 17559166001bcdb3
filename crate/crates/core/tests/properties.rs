use std::sync::Arc;

use loopsched::data::{build_csr, component_labels, component_sizes, scale_up, symmetrize_dedup, EdgeList};
use loopsched::partitioner::{chunk_sequence, Partitioner, SharedPartitioner};
use loopsched::telemetry::{read_csv, write_csv, RunReport, Source};
use loopsched::{LayoutId, SchedConfig, SchemeId, SchemeParams, Topology, VictimStrategy};
use proptest::prelude::*;

fn scheme() -> impl Strategy<Value = SchemeId> {
    proptest::sample::select(SchemeId::ALL.to_vec())
}

fn batches(seq: &[usize], p: usize) -> Vec<&[usize]> {
    seq.chunks(p).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn chunk_sizes_cover_rows(s in scheme(), n in 1usize..5000, p in 1usize..64, min in 1usize..8) {
        let part = Partitioner::new(s, n, p, &SchemeParams::default()).unwrap().with_min_chunk(min);
        let sizes: Vec<usize> = part.map(|c| c.size).collect();
        prop_assert_eq!(sizes.iter().sum::<usize>(), n);
        let (last, body) = sizes.split_last().unwrap();
        prop_assert!(*last >= 1);
        prop_assert!(body.iter().all(|&c| c >= min));
    }

    #[test]
    fn decreasing_schemes(n in 1usize..20_000, p in 1usize..64) {
        let d = SchemeParams::default();
        for s in [SchemeId::Gss, SchemeId::Tss] {
            let seq = chunk_sequence(s, n, p, &d).unwrap();
            prop_assert!(seq.windows(2).all(|w| w[0] >= w[1]), "{} {:?}", s, seq);
        }
        let pss = chunk_sequence(SchemeId::Pss, n, p, &d).unwrap();
        prop_assert!(pss.windows(2).all(|w| w[0] >= w[1]));
        for s in [SchemeId::Fac2, SchemeId::Tfss] {
            let seq = chunk_sequence(s, n, p, &d).unwrap();
            let b = batches(&seq, p);
            // constant inside a batch (apart from the clipped tail), falling across batches
            for w in b.windows(2) {
                prop_assert!(w[0].iter().min() >= w[1].iter().max(), "{} {:?}", s, seq);
            }
        }
    }

    #[test]
    fn increasing_schemes_before_clip(n in 1usize..20_000, p in 1usize..64) {
        for s in [SchemeId::Fiss, SchemeId::Viss] {
            let seq = chunk_sequence(s, n, p, &SchemeParams::default()).unwrap();
            let body = &seq[..seq.len() - 1];
            prop_assert!(body.windows(2).all(|w| w[0] <= w[1]), "{} {:?}", s, seq);
        }
    }

    #[test]
    fn symmetrize_is_idempotent(n in 1usize..60, raw in proptest::collection::vec((0u32..60, 0u32..60), 0..200)) {
        let edges: Vec<_> = raw.into_iter().map(|(u, v)| (u % n as u32, v % n as u32)).collect();
        let once = symmetrize_dedup(&EdgeList::new(n, edges).unwrap());
        prop_assert_eq!(&symmetrize_dedup(&once), &once);
        prop_assert_eq!(once.edges.len() % 2, 0);
        prop_assert!(once.edges.iter().all(|(u, v)| u != v));
    }

    #[test]
    fn csr_round_trip(n in 1usize..60, raw in proptest::collection::vec((0u32..60, 0u32..60), 0..200)) {
        let edges: Vec<_> = raw.into_iter().map(|(u, v)| (u % n as u32, v % n as u32)).collect();
        let csr = build_csr(&EdgeList::new(n, edges).unwrap());
        prop_assert_eq!(&build_csr(&csr.to_edge_list()), &csr);
        prop_assert!(csr.row_ptr().windows(2).all(|w| w[0] <= w[1]));
        for r in 0..n {
            prop_assert!(csr.neighbors(r).windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn scale_up_replicates_components(n in 1usize..40, raw in proptest::collection::vec((0u32..40, 0u32..40), 0..60), k in 1usize..5) {
        let edges: Vec<_> = raw.into_iter().map(|(u, v)| (u % n as u32, v % n as u32)).collect();
        let g = symmetrize_dedup(&EdgeList::new(n, edges).unwrap());
        let s = scale_up(&g, k).unwrap();
        prop_assert_eq!(s.n, n * k);
        prop_assert_eq!(s.edges.len(), g.edges.len() * k);
        let base = component_labels(g.n, &g.edges);
        let scaled = component_labels(s.n, &s.edges);
        for j in 0..k {
            for i in 0..n {
                prop_assert_eq!(scaled[j * n + i] as usize, base[i] as usize + j * n);
            }
        }
        let mut expect: Vec<usize> = (0..k).flat_map(|_| component_sizes(&base)).collect();
        expect.sort_unstable();
        prop_assert_eq!(component_sizes(&scaled), expect);
    }
}

#[test]
fn requester_identity_does_not_change_sequence() {
    let params = SchemeParams::default();
    for &s in SchemeId::ALL {
        let expect = chunk_sequence(s, 10_000, 8, &params).unwrap();
        let shared = Arc::new(SharedPartitioner::new(Partitioner::new(s, 10_000, 8, &params).unwrap()));
        let grants = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..4)
                .map(|_| {
                    let shared = Arc::clone(&shared);
                    scope.spawn(move || {
                        let mut got = Vec::new();
                        while let Some(c) = shared.next_chunk() {
                            got.push(c);
                            std::thread::yield_now();
                        }
                        got
                    })
                })
                .collect();
            handles.into_iter().flat_map(|h| h.join().unwrap()).collect::<Vec<_>>()
        });
        let mut by_start = grants;
        by_start.sort_by_key(|c| c.start);
        let sizes: Vec<usize> = by_start.iter().map(|c| c.size).collect();
        assert_eq!(sizes, expect, "{s}");
    }
}

#[test]
fn summary_csv_round_trip_all_names() {
    let mut reports = Vec::new();
    for &layout in LayoutId::ALL {
        for &victim in VictimStrategy::ALL {
            let cfg = SchedConfig::new(SchemeId::Tfss, layout, victim, Topology::uniform(2, 2).unwrap());
            let mut r = RunReport::empty(Source::Real, "cc", &cfg);
            r.makespan_ns = 17;
            reports.push(r);
        }
    }
    let mut buf = Vec::new();
    assert_eq!(write_csv(&reports, &mut buf).unwrap(), 12);
    let rows = read_csv(buf.as_slice()).unwrap();
    assert_eq!(rows, reports.iter().map(RunReport::summary).collect::<Vec<_>>());
}
