use glocal::metrics::{arhr, hit_rate, ndcg_hits, precision, recall, UserMetrics};
use proptest::prelude::*;

/// Reference values for a ranked list over 8 items, written from the textbook definitions
/// with a position loop instead of the library's hit-rank iterator.
fn oracle(q: &[u32], g: &[u32]) -> (f64, f64, f64, f64, f64) {
    let mut rel = [false; 8];
    for &i in g {
        rel[i as usize] = true;
    }
    let mut hits = 0.0;
    let mut rr = 0.0;
    let mut dcg = 0.0;
    for (pos, &i) in q.iter().enumerate() {
        if rel[i as usize] {
            hits += 1.0;
            rr += 1.0 / (pos as f64 + 1.0);
            dcg += std::f64::consts::LN_2 / (pos as f64 + 2.0).ln();
        }
    }
    let rec = hits / g.len() as f64;
    let prec = if q.is_empty() { 0.0 } else { hits / q.len() as f64 };
    (rec, prec, if hits > 0.0 { 1.0 } else { 0.0 }, rr, dcg)
}

fn ranked_list() -> impl Strategy<Value = Vec<u32>> {
    (0usize..=5).prop_flat_map(|len| Just((0u32..8).collect::<Vec<_>>()).prop_shuffle().prop_map(move |v| v[..len].to_vec()))
}

proptest! {
    #[test]
    fn metrics_match_definitions(q in ranked_list(), g in proptest::collection::btree_set(0u32..8, 1..8)) {
        let g: Vec<u32> = g.into_iter().collect();
        let (rec, prec, hr, rr, dcg) = oracle(&q, &g);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
        prop_assert!(close(recall(&q, &g).unwrap(), rec));
        prop_assert!(close(precision(&q, &g), prec));
        prop_assert!(close(hit_rate(&q, &g), hr));
        prop_assert!(close(arhr(&q, &g), rr));
        prop_assert!(close(ndcg_hits(&q, &g), dcg));
        let u = UserMetrics::of(3, &q, &g).unwrap();
        prop_assert!(close(u.recall, rec) && close(u.ndcg, dcg));
        prop_assert!((0.0..=1.0).contains(&rec) && (0.0..=1.0).contains(&prec));
        prop_assert!(u.arhr <= u.ndcg + 1e-12, "reciprocal rank never exceeds the log discount");
    }
}

#[test]
fn empty_ground_truth_is_skipped() {
    assert!(UserMetrics::of(0, &[1, 2], &[]).is_none());
}
