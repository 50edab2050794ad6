mod common;

use std::collections::BTreeSet;

use parcelplan::environment::tally_votes;
use parcelplan::nn::{
    gat_forward, softmax_slice, Activation, GatLayer, Matrix, Neighborhoods, NetConfig, PolicyNet,
};
use parcelplan::rewards::{
    combined_reward, density_score, diversity_score, equity_from_tallies, shannon_index,
    RewardWeights,
};
use parcelplan::spatial_graph::{
    build_knn_graph, observation_subgraph, parse_parcels, write_parcels, LandUse, Parcel,
    SpatialGraph,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn land_use() -> impl Strategy<Value = LandUse> {
    (0usize..5).prop_map(|i| LandUse::ALL[i])
}

fn parcels_strategy(max: usize) -> impl Strategy<Value = Vec<Parcel>> {
    prop::collection::vec(
        (
            land_use(),
            1.0f64..5000.0,
            0.0f64..2000.0,
            0.0f64..2000.0,
            any::<bool>(),
        ),
        2..max,
    )
    .prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (lu, area, x, y, vacant))| {
                let mut p = Parcel::new(i as u64 + 1, lu, area, x, y);
                p.vacant = vacant;
                p
            })
            .collect()
    })
}

fn district(parts: &[(LandUse, f64)]) -> SpatialGraph {
    let ps = parts
        .iter()
        .enumerate()
        .map(|(i, &(lu, a))| Parcel::new(i as u64 + 1, lu, a, i as f64 * 10.0, 0.0))
        .collect();
    SpatialGraph::from_edges(ps, []).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn knn_is_symmetric_with_min_degree(ps in parcels_strategy(40), k in 1usize..6) {
        prop_assume!(ps.len() > k);
        let coords: Vec<(f64, f64)> = ps.iter().map(|p| (p.x, p.y)).collect();
        let g = build_knn_graph(ps, k).unwrap();
        prop_assert!(g.min_degree() >= k);
        for i in 0..g.len() {
            for e in g.neighbors(i) {
                prop_assert!(e.to != i);
                prop_assert!(e.distance > 0.0);
                let back = g.neighbors(e.to).iter().find(|b| b.to == i);
                prop_assert_eq!(back.map(|b| b.distance), Some(e.distance));
                let (dx, dy) = (coords[i].0 - coords[e.to].0, coords[i].1 - coords[e.to].1);
                let euclid = (dx * dx + dy * dy).sqrt().max(1e-6);
                prop_assert!((e.distance - euclid).abs() <= 1e-6 * euclid.max(1.0));
            }
        }
    }

    #[test]
    fn subgraph_matches_relaxation_oracle(ps in parcels_strategy(30), radius in 0.0f64..2500.0, pick in any::<prop::sample::Index>()) {
        let g = build_knn_graph(ps, 1).unwrap();
        let origin = pick.index(g.len());
        let id = g.parcel(origin).id;
        let sub = observation_subgraph(&g, id, radius).unwrap();
        let got: BTreeSet<u64> = sub.parcels().iter().map(|p| p.id).collect();
        prop_assert_eq!(got, common::brute_force_within(&g, origin, radius));
        // induced: every edge between kept parcels survives
        for p in sub.parcels() {
            let full = g.adjacency_of(p.id).unwrap();
            let kept = sub.adjacency_of(p.id).unwrap();
            let expected: Vec<_> = full.into_iter().filter(|(q, _)| sub.index_of(*q).is_some()).collect();
            prop_assert_eq!(kept, expected);
        }
    }

    #[test]
    fn subgraph_grows_with_radius(ps in parcels_strategy(30), r1 in 0.0f64..2000.0, extra in 0.0f64..2000.0) {
        let g = build_knn_graph(ps, 1).unwrap();
        let id = g.parcel(0).id;
        let small: BTreeSet<u64> = observation_subgraph(&g, id, r1).unwrap().parcels().iter().map(|p| p.id).collect();
        let big: BTreeSet<u64> = observation_subgraph(&g, id, r1 + extra).unwrap().parcels().iter().map(|p| p.id).collect();
        prop_assert!(small.is_subset(&big));
        prop_assert!(small.contains(&id));
    }

    #[test]
    fn parcel_csv_round_trip(ps in parcels_strategy(20)) {
        let mut buf = Vec::new();
        write_parcels(&mut buf, &ps).unwrap();
        let back = parse_parcels(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), ps.len());
        for (a, b) in ps.iter().zip(&back) {
            prop_assert_eq!(a.id, b.id);
            prop_assert_eq!(a.land_use, b.land_use);
            prop_assert_eq!(a.area, b.area);
            prop_assert_eq!((a.x, a.y), (b.x, b.y));
            prop_assert_eq!(a.vacant, b.vacant);
        }
    }

    #[test]
    fn density_bounded_and_additive(parts in prop::collection::vec((land_use(), 1.0f64..1000.0), 1..25)) {
        let g = district(&parts);
        let gc = density_score(&g, &[LandUse::Green, LandUse::Commercial]).unwrap();
        let g_only = density_score(&g, &[LandUse::Green]).unwrap();
        let c_only = density_score(&g, &[LandUse::Commercial]).unwrap();
        prop_assert!((0.0..=1.0).contains(&gc));
        prop_assert!((gc - (g_only + c_only)).abs() < 1e-12);
        let all = density_score(&g, &LandUse::ALL).unwrap();
        prop_assert!((all - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diversity_within_bounds(parts in prop::collection::vec((land_use(), 1.0f64..1000.0), 1..25)) {
        let d = diversity_score(&district(&parts)).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!(d <= 5f64.ln() + 1e-12);
    }

    #[test]
    fn diversity_hill_climb_never_beats_uniform(shares in prop::collection::vec(0.01f64..1.0, 5), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let total: f64 = shares.iter().sum();
        let mut s: Vec<f64> = shares.iter().map(|v| v / total).collect();
        let mut h = shannon_index(&s);
        for _ in 0..200 {
            use rand::Rng;
            let (i, j) = (rng.random_range(0..5), rng.random_range(0..5));
            let step = rng.random_range(0.0..0.05f64).min(s[i]);
            let mut t = s.clone();
            t[i] -= step;
            t[j] += step;
            let ht = shannon_index(&t);
            if ht >= h {
                s = t;
                h = ht;
            }
        }
        prop_assert!(h <= 5f64.ln() + 1e-12);
    }

    #[test]
    fn equity_never_positive(t in prop::array::uniform5(0.0f64..1e6)) {
        prop_assert!(equity_from_tallies(&t) <= 0.0);
    }

    #[test]
    fn combined_reward_is_linear(r in prop::array::uniform4(-5.0f64..5.0), w in prop::array::uniform4(0.0f64..3.0), c in 0.0f64..4.0) {
        let wt = RewardWeights::new(w[0], w[1], w[2], w[3]);
        let scaled = RewardWeights::new(c * w[0], c * w[1], c * w[2], c * w[3]);
        let base = combined_reward(r[0], r[1], r[2], r[3], &wt);
        prop_assert!((combined_reward(r[0], r[1], r[2], r[3], &scaled) - c * base).abs() < 1e-9);
        let expected = w[0] * r[0] + w[1] * r[1] + w[2] * r[2] + w[3] * r[3];
        prop_assert!((base - expected).abs() < 1e-12);
    }

    #[test]
    fn softmax_sums_to_one(row in prop::collection::vec(-50.0f64..50.0, 1..10)) {
        let mut out = vec![0.0; row.len()];
        softmax_slice(&row, &mut out);
        prop_assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(out.iter().all(|p| *p >= 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn tally_matches_brute_force(votes in prop::collection::vec(land_use(), 1..25)) {
        prop_assert_eq!(tally_votes(&votes).unwrap(), common::brute_plurality(&votes));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gat_is_permutation_equivariant(seed in any::<u64>(), n in 2usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let adj = common::random_adjacency(&mut rng, n, 0.4);
        let h = common::random_matrix(&mut rng, n, 4);
        let layer = GatLayer::new(&mut rng, 4, 3, 0.2, Activation::Elu);
        let out = gat_forward(&layer, &h, &common::nbh(&adj)).unwrap();
        let perm: Vec<usize> = (0..n).rev().collect();
        let permuted_adj: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| adj[perm[i]][perm[j]]).collect()).collect();
        let permuted_h = Matrix::from_rows(&(0..n).map(|i| h.row(perm[i]).to_vec()).collect::<Vec<_>>()).unwrap();
        let out_p = gat_forward(&layer, &permuted_h, &common::nbh(&permuted_adj)).unwrap();
        for i in 0..n {
            for c in 0..3 {
                prop_assert!((out_p[(i, c)] - out[(perm[i], c)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn attention_rows_sum_to_one(seed in any::<u64>(), n in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let adj = common::random_adjacency(&mut rng, n, 0.5);
        let nbh = common::nbh(&adj);
        let layer = GatLayer::new(&mut rng, 3, 4, 0.2, Activation::Elu);
        let h = common::random_matrix(&mut rng, n, 3);
        let alpha = layer.attention_coefficients(&h, &nbh).unwrap();
        for i in 0..n {
            let s: f64 = nbh.range(i).map(|k| alpha.data()[k]).sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn thousand_forward_passes_stay_finite() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cfg = NetConfig {
        hidden_dim: 8,
        ..Default::default()
    };
    let net = PolicyNet::new(&mut rng, 9, &cfg);
    for _ in 0..1000 {
        use rand::Rng;
        let n = rng.random_range(1..12);
        let adj = common::random_adjacency(&mut rng, n, 0.3);
        let mut x = common::random_matrix(&mut rng, n, 9);
        for v in x.data_mut() {
            *v *= 100.0;
        }
        let probs = net.node_policies(&x, &common::nbh(&adj)).unwrap();
        assert!(probs.is_finite());
        for i in 0..n {
            assert!((probs.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn neighborhoods_match_dense_adjacency() {
    let adj = vec![
        vec![false, true, false],
        vec![true, false, true],
        vec![false, true, false],
    ];
    let nbh = Neighborhoods::from_dense(&adj).unwrap();
    assert_eq!(nbh.node_count(), 3);
    assert_eq!(nbh.edge_count(), 3 + 4);
}
