use glocal::clusterindex::{kmeans, ClusterIndex, KMeansConfig};
use glocal::corpus::{split, InteractionMatrix, SplitProtocol, SplitSpec};
use glocal::metrics::{coverage_recall, evaluate_topn};
use glocal::recommend::{PairScorer, RecommendConfig, Recommender, ScoreKind, SingleSpace};
use glocal::tensornet::Matrix;
use glocal::towers::LossKind;
use proptest::prelude::*;

fn table(rows: usize, dim: usize) -> impl Strategy<Value = Matrix<f32>> {
    proptest::collection::vec(-1.0f32..1.0, rows * dim).prop_map(move |v| Matrix::from_vec(rows, dim, v))
}

fn setup() -> impl Strategy<Value = (Matrix<f32>, Matrix<f32>, Vec<(u32, u32)>, u64, bool)> {
    (2usize..8, 6usize..24).prop_flat_map(|(users, items)| {
        (
            table(users, 3),
            table(items, 3),
            proptest::collection::btree_set((0..users as u32, 0..items as u32), 1..users * items / 2 + 2),
            any::<u64>(),
            any::<bool>(),
        )
            .prop_map(|(u, i, p, s, product)| (u, i, p.into_iter().collect(), s, product))
    })
}

fn build(items: &Matrix<f32>, m: usize, seed: u64) -> ClusterIndex {
    let km = kmeans(items, m, seed, &KMeansConfig::default()).unwrap();
    ClusterIndex::from_assignments(km.centroids.map(|v| v as f32), km.assignments, "GD", seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    /// Searching every cluster is plain exhaustive ranking of the unobserved items.
    #[test]
    fn all_clusters_equals_exhaustive_ranking((users, items, pairs, seed, product) in setup(), n in 1usize..10) {
        let train = InteractionMatrix::from_pairs(users.rows(), items.rows(), &pairs).unwrap();
        let m = 4.min(items.rows());
        let idx = build(&items, m, seed);
        let kind = if product { LossKind::Product } else { LossKind::Distance };
        let space = SingleSpace { tag: "S".into(), loss_kind: kind, users: users.clone(), items: items.clone() };
        let rec = Recommender::new(&idx, &users, &space, Some(&train)).unwrap();
        let cfg = RecommendConfig::new(m, n, kind);
        for u in 0..users.rows() as u32 {
            let got = rec.recommend(u, &cfg).unwrap();
            let score = |i: u32| {
                let (a, b) = (users.row(u as usize), items.row(i as usize));
                if product {
                    a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum::<f64>()
                } else {
                    -a.iter().zip(b).map(|(x, y)| (*x as f64 - *y as f64).powi(2)).sum::<f64>().sqrt()
                }
            };
            let mut expect: Vec<(u32, f64)> = (0..items.rows() as u32).filter(|&i| !train.contains(u, i)).map(|i| (i, score(i))).collect();
            expect.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            expect.truncate(n);
            prop_assert_eq!(got.item_ids(), expect.iter().map(|e| e.0).collect::<Vec<_>>());
            for (a, b) in got.items.iter().zip(&expect) {
                prop_assert!((a.1 - b.1).abs() < 1e-9);
            }
            prop_assert!(got.items.iter().all(|&(i, _)| !train.contains(u, i)));
        }
        let kind_check = space.score(0, &[0], ScoreKind::for_loss(kind)).unwrap();
        prop_assert!(kind_check[0].is_finite());
    }

    #[test]
    fn coverage_recall_is_monotone_in_k((users, items, pairs, seed, _) in setup()) {
        let full = InteractionMatrix::from_pairs(users.rows(), items.rows(), &pairs).unwrap();
        let s = split(&full, &SplitSpec { protocol: SplitProtocol::RandomHalf, seed, min_interactions: 0 }).unwrap();
        prop_assume!(!s.test.is_empty());
        let m = 5.min(items.rows());
        let idx = build(&items, m, seed);
        let space = SingleSpace { tag: "GD".into(), loss_kind: LossKind::Distance, users: users.clone(), items: items.clone() };
        let ks: Vec<usize> = (1..=m).collect();
        let curve = coverage_recall(&idx, &users, &space, &s.train, &s.test, &ks, items.rows()).unwrap();
        for w in curve.windows(2) {
            prop_assert!(w[1].1 >= w[0].1 - 1e-12, "{curve:?}");
        }
        // With every cluster and N covering all items, every held-out item is retrieved.
        prop_assert!((curve.last().unwrap().1 - 1.0).abs() < 1e-12);

        let rec = Recommender::new(&idx, &users, &space, Some(&s.train)).unwrap();
        let r = evaluate_topn(&s.test, &rec, m, &[1, 3], "GD").unwrap();
        prop_assert_eq!(r.len(), 2);
        prop_assert!(r[1].recall >= r[0].recall - 1e-12);
    }
}
