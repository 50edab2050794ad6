#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use parcelplan::agents::{build_roster, default_roster_spec, Agent, WALKABLE_RADIUS_M};
use parcelplan::cli::{synth_parcels, SyntheticSpec};
use parcelplan::nn::{elu, leaky_relu, Activation, GatLayer, Matrix, Neighborhoods};
use parcelplan::spatial_graph::{
    build_knn_graph, select_readjustment_parcels, LandUse, Parcel, SpatialGraph,
};
use rand::Rng;

/// The 6x6 synthetic district (9 readjustable parcels) with one agent per role.
pub fn synthetic_instance(seed: u64) -> (SpatialGraph, Vec<Agent>) {
    let spec = SyntheticSpec {
        seed,
        ..Default::default()
    };
    let mut parcels = synth_parcels(&spec).unwrap();
    select_readjustment_parcels(&mut parcels);
    let graph = build_knn_graph(parcels, 4).unwrap();
    let agents = build_roster(&default_roster_spec(), &graph, WALKABLE_RADIUS_M).unwrap();
    (graph, agents)
}

pub fn random_parcels<R: Rng>(rng: &mut R, n: usize) -> Vec<Parcel> {
    (0..n)
        .map(|i| {
            let lu = LandUse::ALL[rng.random_range(0..5)];
            let mut p = Parcel::new(
                i as u64 + 1,
                lu,
                rng.random_range(50.0..5000.0),
                rng.random_range(0.0..3000.0),
                rng.random_range(0.0..3000.0),
            );
            p.vacant = rng.random_bool(0.3);
            p
        })
        .collect()
}

/// Parcel ids reachable within `radius` by repeated full-edge relaxation
/// (Bellman-Ford), independent of any priority queue.
pub fn brute_force_within(graph: &SpatialGraph, origin: usize, radius: f64) -> BTreeSet<u64> {
    let n = graph.len();
    let mut dist = vec![f64::INFINITY; n];
    dist[origin] = 0.0;
    let edges: Vec<(usize, usize, f64)> = (0..n)
        .flat_map(|i| {
            graph
                .neighbors(i)
                .iter()
                .map(move |e| (i, e.to, e.distance))
        })
        .collect();
    for _ in 0..n {
        let mut changed = false;
        for &(a, b, d) in &edges {
            if dist[a] + d < dist[b] {
                dist[b] = dist[a] + d;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (0..n)
        .filter(|&i| dist[i] <= radius)
        .map(|i| graph.parcel(i).id)
        .collect()
}

/// Most frequent land use; ties go to the lowest ordinal.
pub fn brute_plurality(votes: &[LandUse]) -> LandUse {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for v in votes {
        *counts.entry(v.ordinal()).or_default() += 1;
    }
    let best = counts.values().copied().max().unwrap();
    let ord = counts
        .iter()
        .find(|(_, &c)| c == best)
        .map(|(&o, _)| o)
        .unwrap();
    LandUse::ALL[ord]
}

/// Dense-loop GAT layer over an adjacency matrix, self-loops implied.
pub fn dense_gat(layer: &GatLayer, h: &Matrix, adj: &[Vec<bool>]) -> Matrix {
    let n = h.rows();
    let out = layer.out_dim();
    let fin = layer.in_dim();
    let w = &layer.weight;
    let a = &layer.attention;
    let mut z = vec![vec![0.0; out]; n];
    for i in 0..n {
        for o in 0..out {
            for f in 0..fin {
                z[i][o] += w[(o, f)] * h[(i, f)];
            }
        }
    }
    let mut result = Matrix::zeros(n, out);
    for i in 0..n {
        let mut neigh: Vec<usize> = (0..n).filter(|&j| j == i || adj[i][j]).collect();
        neigh.dedup();
        let scores: Vec<f64> = neigh
            .iter()
            .map(|&j| {
                let mut s = 0.0;
                for o in 0..out {
                    s += a[(o, 0)] * z[i][o] + a[(out + o, 0)] * z[j][o];
                }
                leaky_relu(s, layer.negative_slope)
            })
            .collect();
        let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
        let total: f64 = exps.iter().sum();
        for (k, &j) in neigh.iter().enumerate() {
            for o in 0..out {
                result[(i, o)] += exps[k] / total * z[j][o];
            }
        }
        if layer.activation == Activation::Elu {
            for o in 0..out {
                result[(i, o)] = elu(result[(i, o)]);
            }
        }
    }
    result
}

pub fn random_adjacency<R: Rng>(rng: &mut R, n: usize, p: f64) -> Vec<Vec<bool>> {
    let mut adj = vec![vec![false; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(p) {
                adj[i][j] = true;
                adj[j][i] = true;
            }
        }
    }
    adj
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
    )
    .unwrap()
}

pub fn nbh(adj: &[Vec<bool>]) -> Arc<Neighborhoods> {
    Arc::new(Neighborhoods::from_dense(adj).unwrap())
}

/// `|a - n| / max(|a|, |n|, floor)`; the floor keeps entries whose true
/// gradient is zero from dividing rounding noise by zero.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Largest relative error between tape gradients and central differences
/// for the actor objective `-Q(x, pi(x))` (over actor and critic
/// parameters) and the critic objective `(Q(x, p) - R)^2`, on a seeded
/// 6-node graph with two GAT layers of width 8.
pub fn composed_gradient_error(seed: u64, eps: f64) -> f64 {
    use parcelplan::nn::{NetConfig, Parameterized, PolicyNet, Tape, ValueNet};
    use rand::SeedableRng;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = 6;
    let mut adj = random_adjacency(&mut rng, n, 0.4);
    for i in 0..n - 1 {
        adj[i][i + 1] = true;
        adj[i + 1][i] = true;
    }
    let nbh = nbh(&adj);
    let cfg = NetConfig {
        hidden_dim: 8,
        gat_layers: 2,
        ..Default::default()
    };
    let actor = PolicyNet::new(&mut rng, 9, &cfg);
    let critic = ValueNet::new(&mut rng, 9, &cfg);
    let x = random_matrix(&mut rng, n, 9);
    let p_fixed = actor.node_policies(&x, &nbh).unwrap();
    let ret = 0.7;

    let actor_obj = |a: &PolicyNet, c: &ValueNet| -> f64 {
        let p = a.node_policies(&x, &nbh).unwrap();
        -c.value_forward(&x, &p, &nbh).unwrap()
    };
    let critic_obj =
        |c: &ValueNet| -> f64 { (c.value_forward(&x, &p_fixed, &nbh).unwrap() - ret).powi(2) };

    let (ga, gc_actor, gc_critic) = {
        let tape = Tape::new();
        let av = actor.bind(&tape);
        let cv = critic.bind(&tape);
        let xv = tape.leaf(x.clone());
        let p = actor.forward_bound(&av, xv, &nbh).unwrap();
        let loss = critic.forward_bound(&cv, xv, p, &nbh).unwrap().scale(-1.0);
        let g = tape.backward(loss).unwrap();
        let ga: Vec<Matrix> = av.iter().map(|v| g.get(*v)).collect();
        let gc: Vec<Matrix> = cv.iter().map(|v| g.get(*v)).collect();

        let tape2 = Tape::new();
        let cv2 = critic.bind(&tape2);
        let q = critic
            .forward_bound(
                &cv2,
                tape2.leaf(x.clone()),
                tape2.leaf(p_fixed.clone()),
                &nbh,
            )
            .unwrap();
        let loss2 = q.sub(tape2.leaf(Matrix::scalar(ret))).unwrap().square();
        let g2 = tape2.backward(loss2).unwrap();
        (ga, gc, cv2.iter().map(|v| g2.get(*v)).collect::<Vec<_>>())
    };

    let mut worst: f64 = 0.0;
    let floor = 1e-6;
    for (pi, grad) in ga.iter().enumerate() {
        for k in 0..grad.len() {
            let mut plus = actor.clone();
            plus.params_mut()[pi].data_mut()[k] += eps;
            let mut minus = actor.clone();
            minus.params_mut()[pi].data_mut()[k] -= eps;
            let num = (actor_obj(&plus, &critic) - actor_obj(&minus, &critic)) / (2.0 * eps);
            worst = worst.max(relative_error(grad.data()[k], num, floor));
        }
    }
    for (pi, (g_a, g_c)) in gc_actor.iter().zip(&gc_critic).enumerate() {
        for k in 0..g_a.len() {
            let mut plus = critic.clone();
            plus.params_mut()[pi].data_mut()[k] += eps;
            let mut minus = critic.clone();
            minus.params_mut()[pi].data_mut()[k] -= eps;
            let num_a = (actor_obj(&actor, &plus) - actor_obj(&actor, &minus)) / (2.0 * eps);
            let num_c = (critic_obj(&plus) - critic_obj(&minus)) / (2.0 * eps);
            worst = worst.max(relative_error(g_a.data()[k], num_a, floor));
            worst = worst.max(relative_error(g_c.data()[k], num_c, floor));
        }
    }
    worst
}
