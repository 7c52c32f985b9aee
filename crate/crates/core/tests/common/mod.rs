//! Brute-force reference implementations shared by the integration tests.
//! They deliberately avoid the library's own algorithms.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use vasonav::ddpg::{Mlp, OutputActivation};
use vasonav::vesselgraph::VesselGraph;
use vasonav::Point3;

/// Random connected graph: a random spanning tree plus a few chords, nodes
/// scattered in a 100 mm cube.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, chords: usize) -> VesselGraph {
    let nodes: Vec<(Point3, f64)> = (0..n)
        .map(|_| {
            let p = Point3::new(
                rng.random_range(0.0..100.0),
                rng.random_range(0.0..100.0),
                rng.random_range(0.0..100.0),
            );
            (p, 1.0)
        })
        .collect();
    let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (rng.random_range(0..i), i)).collect();
    let mut tries = 0;
    while edges.len() < n - 1 + chords && tries < 1000 {
        tries += 1;
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b && !edges.iter().any(|&(u, v)| (u, v) == (a, b) || (u, v) == (b, a)) {
            edges.push((a, b));
        }
    }
    VesselGraph::new(nodes, edges, BTreeMap::new()).expect("random graph is valid")
}

/// Curvature of the circle through three points via Heron's formula.
pub fn heron_curvature(a: Point3, b: Point3, c: Point3) -> f64 {
    let (x, y, z) = (a.distance(b), b.distance(c), c.distance(a));
    let s = 0.5 * (x + y + z);
    let area2 = (s * (s - x) * (s - y) * (s - z)).max(0.0);
    if x * y * z == 0.0 {
        0.0
    } else {
        4.0 * area2.sqrt() / (x * y * z)
    }
}

fn oracle_node_curvature(g: &VesselGraph, adj: &[Vec<(usize, usize)>], n: usize) -> f64 {
    if adj[n].len() != 2 {
        return 0.0;
    }
    heron_curvature(g.position(adj[n][0].0), g.position(n), g.position(adj[n][1].0))
}

/// Minimum path weight from every node to `goal` by exhaustive enumeration
/// of simple paths.
pub fn brute_force_geodesic(g: &VesselGraph, goal: usize, alpha: f64) -> Vec<f64> {
    let n = g.node_count();
    let mut adj = vec![Vec::new(); n];
    for e in g.edges() {
        let (u, v) = e.endpoints;
        adj[u].push((v, e.id));
        adj[v].push((u, e.id));
    }
    let kappa: Vec<f64> = (0..n).map(|i| oracle_node_curvature(g, &adj, i)).collect();
    let weight = |u: usize, v: usize| g.position(u).distance(g.position(v)) * (1.0 + alpha * 0.5 * (kappa[u] + kappa[v]));

    let mut best = vec![f64::INFINITY; n];
    let mut visited = vec![false; n];
    fn dfs(
        u: usize,
        acc: f64,
        adj: &[Vec<(usize, usize)>],
        weight: &dyn Fn(usize, usize) -> f64,
        visited: &mut [bool],
        best: &mut [f64],
    ) {
        best[u] = best[u].min(acc);
        visited[u] = true;
        for &(v, _) in &adj[u] {
            if !visited[v] {
                dfs(v, acc + weight(u, v), adj, weight, visited, best);
            }
        }
        visited[u] = false;
    }
    dfs(goal, 0.0, &adj, &weight, &mut visited, &mut best);
    best
}

/// Straight-line scalar forward pass, independent of the batched kernels.
pub fn scalar_forward(net: &Mlp, x: &[f64]) -> Vec<f64> {
    let layers = net.layers();
    let mut a = x.to_vec();
    for (l, d) in layers.iter().enumerate() {
        let mut z = vec![0.0; d.n_out];
        for (j, zj) in z.iter_mut().enumerate() {
            let mut s = d.b[j];
            for (i, ai) in a.iter().enumerate() {
                s += ai * d.w[i * d.n_out + j];
            }
            *zj = s;
        }
        if l + 1 < layers.len() {
            for v in &mut z {
                *v = v.max(0.0);
            }
        }
        a = z;
    }
    if net.output_activation() == OutputActivation::Tanh {
        for v in &mut a {
            *v = v.tanh();
        }
    }
    a.iter().zip(net.output_scale()).map(|(v, s)| v * s).collect()
}

/// Worst relative error between analytic gradients of `L = g . net(x)` and
/// central differences with step `h`, over every parameter.
pub fn max_fd_relative_error(net: &Mlp, x: &[f64], g: &[f64], h: f64) -> f64 {
    let analytic = net.gradients(g, x).expect("shapes match").flat();
    let params = net.flat_params();
    let loss = |p: &[f64]| -> f64 {
        let mut n = net.clone();
        n.set_flat_params(p).unwrap();
        n.forward(x).unwrap().iter().zip(g).map(|(y, g)| y * g).sum()
    };
    let mut worst = 0.0f64;
    let mut p = params.clone();
    for k in 0..params.len() {
        p[k] = params[k] + h;
        let up = loss(&p);
        p[k] = params[k] - h;
        let down = loss(&p);
        p[k] = params[k];
        let numeric = (up - down) / (2.0 * h);
        let denom = analytic[k].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[k] - numeric).abs() / denom);
    }
    worst
}

/// Pearson chi-square statistic of `counts` against a uniform expectation.
pub fn chi_square_uniform(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum()
}

/// Smallest |pre-activation| over the hidden ReLU units for input `x`.
/// Central differences are meaningless when a perturbation can push a unit
/// across the kink at zero, so gradient probes keep this well above `h`.
pub fn relu_kink_margin(net: &Mlp, x: &[f64]) -> f64 {
    let layers = net.layers();
    let mut a = x.to_vec();
    let mut margin = f64::INFINITY;
    for d in &layers[..layers.len() - 1] {
        let z: Vec<f64> = (0..d.n_out)
            .map(|j| d.b[j] + a.iter().enumerate().map(|(i, ai)| ai * d.w[i * d.n_out + j]).sum::<f64>())
            .collect();
        margin = z.iter().fold(margin, |m, v| m.min(v.abs()));
        a = z.into_iter().map(|v| v.max(0.0)).collect();
    }
    margin
}

/// Minimum kink margin for a valid finite-difference probe.
pub const KINK_MARGIN: f64 = 1e-3;

/// Worst finite-difference relative error over `probes` random
/// (parameters, input, output weighting) draws, redrawing any draw whose
/// kink margin is below [`KINK_MARGIN`]. Returns (worst error, redraws).
pub fn gradient_probes<R: Rng>(
    rng: &mut R,
    sizes: &[usize],
    act: OutputActivation,
    scale: &[f64],
    probes: usize,
) -> (f64, usize) {
    let mut worst = 0.0f64;
    let mut redraws = 0;
    let mut done = 0;
    while done < probes {
        let net = Mlp::init(sizes, act, 0.3, rng).with_output_scale(scale.to_vec());
        let x: Vec<f64> = (0..sizes[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..scale.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        if relu_kink_margin(&net, &x) < KINK_MARGIN {
            redraws += 1;
            continue;
        }
        worst = worst.max(max_fd_relative_error(&net, &x, &g, 1e-5));
        done += 1;
    }
    (worst, redraws)
}
