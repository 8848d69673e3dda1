mod common;

use common::{floyd_warshall, oracle_disc_volume, oracle_distance, random_instance};
use netclutter::geodesics::{circumradius, insert_points, knn_volumes};
use netclutter::mixture::{gamma_pdf, mle_rate};
use netclutter::network::{build_network, LinearNetwork, NetPoint};
use rand::SeedableRng;
use rand_distr::Distribution;
use statrs::distribution::Continuous;

#[test]
fn point_distances_match_floyd_warshall() {
    for seed in 1000..1300 {
        let (net, pts) = random_instance(seed, 12, 15);
        let fw = floyd_warshall(&net);
        let g = insert_points(&net, &pts).unwrap();
        for i in 0..pts.len() {
            let d = g.distances_from(g.point_node(i));
            for j in 0..pts.len() {
                let want = oracle_distance(&net, &fw, pts[i], pts[j]);
                let got = d[g.point_node(j)];
                if want.is_infinite() {
                    assert!(got.is_infinite(), "seed {seed} ({i},{j}): {got} vs inf");
                } else {
                    assert!((got - want).abs() <= 1e-9, "seed {seed} ({i},{j}): {got} vs {want}");
                }
            }
        }
    }
}

#[test]
fn disc_volumes_match_discretization() {
    for seed in 2000..2040 {
        let (net, pts) = random_instance(seed, 12, 15);
        let fw = floyd_warshall(&net);
        let g = insert_points(&net, &pts).unwrap();
        for (i, &p) in pts.iter().enumerate().take(5) {
            for r in [0.0, 0.3, 1.1, 2.5, 7.0] {
                let got = g.disc_volume(g.point_node(i), r).unwrap();
                let want = oracle_disc_volume(&net, &fw, p, r, 1e-3);
                assert!((got - want).abs() <= 2e-3, "seed {seed} point {i} r {r}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn single_segment_interval_formula() {
    let net = build_network(&[((0.0, 0.0), (10.0, 0.0))], 0.0).unwrap();
    for &o in &[0.0, 0.25, 3.0, 5.0, 9.5, 10.0] {
        let g = insert_points(&net, &[NetPoint::new(0, o)]).unwrap();
        for &r in &[0.0, 0.5, 1.0, 3.0, 6.0, 12.0] {
            let want = o.min(r) + (10.0 - o).min(r);
            assert_eq!(g.disc_volume(g.point_node(0), r).unwrap(), want, "o {o} r {r}");
        }
    }
}

#[test]
fn knn_disc_holds_k_neighbours() {
    for seed in 3000..3100 {
        let (net, pts) = random_instance(seed, 12, 15);
        let fw = floyd_warshall(&net);
        let g = insert_points(&net, &pts).unwrap();
        for k in 1..pts.len().min(5) {
            for i in 0..pts.len() {
                let dk = g.knn_distance(i, k).unwrap();
                if dk.is_infinite() {
                    continue;
                }
                let ds: Vec<f64> =
                    (0..pts.len()).filter(|&j| j != i).map(|j| oracle_distance(&net, &fw, pts[i], pts[j])).collect();
                let closed = ds.iter().filter(|&&d| d <= dk + 1e-9).count();
                let open = ds.iter().filter(|&&d| d < dk - 1e-9).count();
                assert!(closed >= k && open < k, "seed {seed} i {i} k {k}");
            }
        }
    }
}

#[test]
fn knn_volumes_on_line() {
    let net = build_network(&[((0.0, 0.0), (100.0, 0.0))], 0.0).unwrap();
    let pts: Vec<NetPoint> = (0..=20).map(|i| NetPoint::new(0, 5.0 * i as f64)).collect();
    let v = knn_volumes(&net, &pts, 2).unwrap();
    assert_eq!(v[10].d_k, 5.0);
    assert_eq!(v[10].s_k, 10.0);
    assert_eq!(v[0].d_k, 10.0);
    assert_eq!(v[0].s_k, 10.0);
}

fn connected(net: &LinearNetwork) -> bool {
    net.n_components() == 1
}

#[test]
fn circumradius_matches_brute_force() {
    let h = 0.02;
    let mut checked = 0;
    for seed in 4000..4100 {
        let (net, _) = random_instance(seed, 6, 2);
        if !connected(&net) {
            continue;
        }
        let fw = floyd_warshall(&net);
        let mut samples = Vec::new();
        for s in net.segments() {
            let steps = (s.length / h).ceil() as usize;
            for i in 0..=steps {
                samples.push(NetPoint::new(s.id, (i as f64 * s.length / steps as f64).min(s.length)));
            }
        }
        let brute = samples
            .iter()
            .map(|&c| samples.iter().map(|&v| oracle_distance(&net, &fw, c, v)).fold(0.0, f64::max))
            .fold(f64::INFINITY, f64::min);
        let got = circumradius(&net);
        // candidate centres are vertices and midpoints: an upper bound within
        // half the longest segment
        let slack = 0.5 * net.longest_segment();
        assert!(got >= brute - 2.0 * h && got <= brute + slack + 1e-9, "seed {seed}: {got} vs {brute}");
        checked += 1;
    }
    assert!(checked >= 20);
    // exact on a star, where the optimum is a vertex
    let h0 = (0.0, 0.0);
    let y = build_network(&[(h0, (5.0, 0.0)), (h0, (-3.0, 4.0)), (h0, (-3.0, -4.0))], 0.0).unwrap();
    assert_eq!(circumradius(&y), 5.0);
}

#[test]
fn gamma_pdf_matches_statrs() {
    for &k in &[1usize, 2, 5, 10, 35, 120] {
        for &lambda in &[0.013, 0.5, 1.0, 7.0] {
            let g = statrs::distribution::Gamma::new(k as f64, lambda).unwrap();
            for &m in &[0.05, 0.5, 1.0, 2.0, 4.0] {
                let x = m * k as f64 / lambda;
                let ours = gamma_pdf(x, k, lambda).unwrap();
                let theirs = g.pdf(x);
                assert!(
                    (ours - theirs).abs() <= 1e-10 * theirs.max(1e-300),
                    "K {k} l {lambda} x {x}: {ours} vs {theirs}"
                );
            }
        }
    }
    assert!((gamma_pdf(2.0, 2, 0.5).unwrap() - 0.183_939_720_585_721).abs() < 1e-12);
}

#[test]
fn gamma_pdf_integrates_to_one() {
    for &(k, lambda) in &[(1usize, 1.0), (5, 0.02), (30, 3.0)] {
        let mean = k as f64 / lambda;
        let upper = mean * 10.0 + 50.0 / lambda;
        let n = 200_000;
        let h = upper / n as f64;
        // composite Simpson
        let mut sum = 0.0;
        for i in 1..n {
            let x = i as f64 * h;
            sum += if i % 2 == 1 { 4.0 } else { 2.0 } * gamma_pdf(x, k, lambda).unwrap();
        }
        let f0 = if k == 1 { lambda } else { 0.0 };
        sum += f0 + gamma_pdf(upper, k, lambda).unwrap();
        let integral = sum * h / 3.0;
        assert!((integral - 1.0).abs() < 1e-6, "K {k}: {integral}");
    }
}

#[test]
fn mle_rate_monte_carlo() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
    let g = rand_distr::Gamma::new(5.0, 1.0 / 0.02).unwrap();
    let v: Vec<f64> = (0..10_000).map(|_| g.sample(&mut rng)).collect();
    let l = mle_rate(&v, 5).unwrap();
    assert!((l - 0.02).abs() / 0.02 < 0.03, "{l}");
}
