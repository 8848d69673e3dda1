//! Independent oracles and random instances shared by the integration tests.
#![allow(dead_code)]

use netclutter::network::{LinearNetwork, NetPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random multigraph network with at most `max_segments` segments (self-loops
/// and parallel edges included, possibly disconnected) and up to
/// `max_points` points, some of them sitting on vertices or on each other.
pub fn random_instance(seed: u64, max_segments: usize, max_points: usize) -> (LinearNetwork, Vec<NetPoint>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nv = rng.random_range(2..=8);
    let coords: Vec<(f64, f64)> = (0..nv).map(|_| (rng.random_range(0.0..10.0), rng.random_range(0.0..10.0))).collect();
    let ns = rng.random_range(1..=max_segments);
    let edges: Vec<(usize, usize, f64)> = (0..ns)
        .map(|_| {
            let a = rng.random_range(0..nv);
            let b = if rng.random_bool(0.1) { a } else { rng.random_range(0..nv) };
            (a, b, rng.random_range(0.1..2.0))
        })
        .collect();
    let net = LinearNetwork::from_parts(coords, edges).unwrap();
    let np = rng.random_range(2..=max_points);
    let mut pts: Vec<NetPoint> = Vec::with_capacity(np);
    for _ in 0..np {
        let s = rng.random_range(0..net.segments().len());
        let len = net.segments()[s].length;
        let offset = match rng.random_range(0..10) {
            0 => 0.0,
            1 => len,
            2 if !pts.is_empty() => {
                let p = pts[rng.random_range(0..pts.len())];
                pts.push(p);
                continue;
            }
            _ => rng.random_range(0.0..len),
        };
        pts.push(NetPoint::new(s, offset));
    }
    (net, pts)
}

/// Vertex-to-vertex shortest paths by Floyd–Warshall on the raw network.
pub fn floyd_warshall(net: &LinearNetwork) -> Vec<Vec<f64>> {
    let n = net.vertices().len();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for s in net.segments() {
        if s.length < d[s.a][s.b] {
            d[s.a][s.b] = s.length;
            d[s.b][s.a] = s.length;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// Shortest-path distance between two network locations, from the
/// vertex-to-vertex matrix and the along-segment offsets.
pub fn oracle_distance(net: &LinearNetwork, fw: &[Vec<f64>], u: NetPoint, v: NetPoint) -> f64 {
    let su = &net.segments()[u.segment];
    let sv = &net.segments()[v.segment];
    let mut best = f64::INFINITY;
    if u.segment == v.segment {
        best = (u.offset - v.offset).abs();
    }
    let ends_u = [(su.a, u.offset), (su.b, su.length - u.offset)];
    let ends_v = [(sv.a, v.offset), (sv.b, sv.length - v.offset)];
    for &(x, dx) in &ends_u {
        for &(y, dy) in &ends_v {
            best = best.min(dx + fw[x][y] + dy);
        }
    }
    best
}

/// Disc volume by stepping along every segment with step `h`, treating the
/// distance as linear inside each step.
pub fn oracle_disc_volume(net: &LinearNetwork, fw: &[Vec<f64>], u: NetPoint, r: f64, h: f64) -> f64 {
    let mut total = 0.0;
    for s in net.segments() {
        let steps = (s.length / h).ceil().max(1.0) as usize;
        let step = s.length / steps as f64;
        let mut d0 = oracle_distance(net, fw, u, NetPoint::new(s.id, 0.0));
        for i in 1..=steps {
            let t = if i == steps { s.length } else { i as f64 * step };
            let d1 = oracle_distance(net, fw, u, NetPoint::new(s.id, t));
            total += step * covered_fraction(d0, d1, r);
            d0 = d1;
        }
    }
    total
}

fn covered_fraction(d0: f64, d1: f64, r: f64) -> f64 {
    match (d0 <= r, d1 <= r) {
        (true, true) => 1.0,
        (false, false) => 0.0,
        _ if !d0.is_finite() || !d1.is_finite() => 0.0,
        (true, false) => (r - d0) / (d1 - d0),
        (false, true) => (r - d1) / (d0 - d1),
    }
}

/// Spearman rank correlation (no ties assumed).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        for (pos, &i) in idx.iter().enumerate() {
            r[i] = pos as f64 + 1.0;
        }
        r
    };
    let (rx, ry) = (rank(x), rank(y));
    let n = x.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b) * (a - b)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

/// One-sided exact p-value P(rho <= observed) over all permutations of `n` ranks.
pub fn spearman_lower_p(n: usize, observed: f64) -> f64 {
    fn permute(items: &mut Vec<f64>, k: usize, out: &mut Vec<Vec<f64>>) {
        if k == items.len() {
            out.push(items.clone());
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            permute(items, k + 1, out);
            items.swap(k, i);
        }
    }
    let base: Vec<f64> = (1..=n).map(|i| i as f64).collect();
    let mut perms = Vec::new();
    permute(&mut base.clone(), 0, &mut perms);
    let hits = perms.iter().filter(|p| spearman(&base, p) <= observed + 1e-12).count();
    hits as f64 / perms.len() as f64
}
