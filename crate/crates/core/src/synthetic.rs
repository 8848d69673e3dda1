//! Synthetic stand-in networks for simulation studies.
//!
//! The real street and neuron networks are not bundled, so each generator
//! produces a network of the same total length and comparable structure,
//! together with named sub-network regions (segment id lists).

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geodesics::insert_points;
use crate::network::{build_network, LinearNetwork, RawSegment};

pub const CHICAGO_LENGTH: f64 = 31150.0;
pub const CHICAGO_FEATURE_LENGTH: f64 = 2991.0;
pub const CHICAGO_NESTED_LENGTH: f64 = 11731.0;
pub const DENDRITE_LENGTH: f64 = 1934.0;
pub const DENDRITE_FEATURE_LENGTH: f64 = 778.0;
pub const ANTONIO_LENGTH: f64 = 128_690.0;
pub const ANTONIO_ROAD1_LENGTH: f64 = 8320.0;
pub const ANTONIO_ROAD2_LENGTH: f64 = 3680.0;

#[derive(Debug, Clone)]
pub struct SyntheticNetwork {
    pub network: LinearNetwork,
    pub regions: BTreeMap<String, Vec<usize>>,
}

fn scale_to(raw: &mut [RawSegment], target: f64) {
    let total: f64 = raw.iter().map(|&((x1, y1), (x2, y2))| (x2 - x1).hypot(y2 - y1)).sum();
    let c = target / total;
    for s in raw.iter_mut() {
        *s = ((s.0 .0 * c, s.0 .1 * c), (s.1 .0 * c, s.1 .1 * c));
    }
}

fn grid_raw(nx: usize, ny: usize, jitter: f64, rng: &mut impl Rng) -> Vec<RawSegment> {
    let mut pos = vec![(0.0, 0.0); nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let dx = if jitter > 0.0 { rng.random_range(-jitter..jitter) } else { 0.0 };
            let dy = if jitter > 0.0 { rng.random_range(-jitter..jitter) } else { 0.0 };
            pos[j * nx + i] = (i as f64 + dx, j as f64 + dy);
        }
    }
    let mut raw = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if i + 1 < nx {
                raw.push((pos[j * nx + i], pos[j * nx + i + 1]));
            }
            if j + 1 < ny {
                raw.push((pos[j * nx + i], pos[(j + 1) * nx + i]));
            }
        }
    }
    raw
}

/// Jittered rectangular grid with `nx * ny` vertices scaled to `total_length`.
pub fn loop_grid(nx: usize, ny: usize, total_length: f64, jitter: f64, seed: u64) -> Result<LinearNetwork> {
    if nx < 2 || ny < 2 {
        return Err(Error::Domain("grid needs at least 2x2 vertices".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = grid_raw(nx, ny, jitter, &mut rng);
    scale_to(&mut raw, total_length);
    build_network(&raw, 0.0)
}

/// Connected block grown around the vertex nearest to `(cx, cy)`: segments are
/// taken in order of the network distance of their nearer endpoint until the
/// accumulated length reaches `target`. Blocks grown from the same centre are
/// nested.
pub fn geodesic_block(net: &LinearNetwork, cx: f64, cy: f64, target: f64) -> Vec<usize> {
    let centre = net
        .vertices()
        .iter()
        .min_by(|a, b| (a.x - cx).hypot(a.y - cy).total_cmp(&(b.x - cx).hypot(b.y - cy)))
        .map(|v| v.id)
        .unwrap_or(0);
    let g = insert_points(net, &[]).expect("empty pattern");
    let dist = g.distances_from(centre);
    let mut order: Vec<(f64, usize)> = net.segments().iter().map(|s| (dist[s.a].min(dist[s.b]), s.id)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut acc = 0.0;
    let mut ids = Vec::new();
    for (d, id) in order {
        if acc >= target || !d.is_finite() {
            break;
        }
        acc += net.segments()[id].length;
        ids.push(id);
    }
    ids.sort_unstable();
    ids
}

fn centroid(net: &LinearNetwork) -> (f64, f64) {
    let n = net.vertices().len() as f64;
    let (sx, sy) = net.vertices().iter().fold((0.0, 0.0), |(a, b), v| (a + v.x, b + v.y));
    (sx / n, sy / n)
}

/// Loop-rich street-grid stand-in: 16x16 jittered grid of total length 31150
/// with a compact feature block (2991) nested inside a larger block (11731).
pub fn chicago_like(seed: u64) -> Result<SyntheticNetwork> {
    let network = loop_grid(16, 16, CHICAGO_LENGTH, 0.25, seed)?;
    let (cx, cy) = centroid(&network);
    let mut regions = BTreeMap::new();
    regions.insert("feature".to_string(), geodesic_block(&network, cx, cy, CHICAGO_FEATURE_LENGTH));
    regions.insert("nested".to_string(), geodesic_block(&network, cx, cy, CHICAGO_NESTED_LENGTH));
    Ok(SyntheticNetwork { network, regions })
}

/// Random branching tree (no cycles) with `n_segments` segments scaled to
/// `total_length`. Growth favours recent vertices so branches get long.
pub fn random_tree(n_segments: usize, total_length: f64, seed: u64) -> Result<LinearNetwork> {
    if n_segments == 0 {
        return Err(Error::Domain("tree needs at least one segment".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos = vec![(0.0f64, 0.0f64)];
    let mut heading = vec![rng.random_range(0.0..std::f64::consts::TAU)];
    let mut raw = Vec::with_capacity(n_segments);
    for _ in 0..n_segments {
        let n = pos.len();
        let parent = if rng.random_bool(0.6) { n - 1 - rng.random_range(0..n.min(8)) } else { rng.random_range(0..n) };
        let theta = heading[parent] + rng.random_range(-0.9..0.9);
        let len = rng.random_range(0.5..1.5);
        let (px, py) = pos[parent];
        let child = (px + len * theta.cos(), py + len * theta.sin());
        raw.push((pos[parent], child));
        pos.push(child);
        heading.push(theta);
    }
    scale_to(&mut raw, total_length);
    build_network(&raw, 0.0)
}

/// Cycle-free dendrite stand-in: 639-segment tree of length 1934 with a
/// connected feature subtree of length 778.
pub fn dendrite_like(seed: u64) -> Result<SyntheticNetwork> {
    let network = random_tree(639, DENDRITE_LENGTH, seed)?;
    let root = network.vertices()[0];
    let mut regions = BTreeMap::new();
    regions.insert("feature".to_string(), geodesic_block(&network, root.x, root.y, DENDRITE_FEATURE_LENGTH));
    Ok(SyntheticNetwork { network, regions })
}

/// Consecutive horizontal segments of grid row `row`, starting at column
/// `start`, until `target` length is reached.
fn grid_row_run(net: &LinearNetwork, nx: usize, ny: usize, row: usize, start: usize, target: f64) -> Vec<usize> {
    // segment ids follow the emission order of `grid_raw`
    let mut id = 0;
    let mut row_ids = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if i + 1 < nx {
                if j == row {
                    row_ids.push(id);
                }
                id += 1;
            }
            if j + 1 < ny {
                id += 1;
            }
        }
    }
    let mut acc = 0.0;
    let mut out = Vec::new();
    for &sid in row_ids.iter().skip(start) {
        if acc >= target {
            break;
        }
        acc += net.segments()[sid].length;
        out.push(sid);
    }
    out
}

/// Homogeneous city-grid stand-in of length 128690 with two long disjoint
/// avenues (8320 and 3680) as feature regions.
pub fn antonio_like(seed: u64) -> Result<SyntheticNetwork> {
    let (nx, ny) = (200, 7);
    let network = loop_grid(nx, ny, ANTONIO_LENGTH, 0.1, seed)?;
    let mut regions = BTreeMap::new();
    regions.insert("road1".to_string(), grid_row_run(&network, nx, ny, 1, 10, ANTONIO_ROAD1_LENGTH));
    regions.insert("road2".to_string(), grid_row_run(&network, nx, ny, 5, 60, ANTONIO_ROAD2_LENGTH));
    Ok(SyntheticNetwork { network, regions })
}

/// Zig-zag polyline of `n_segments` pieces, total length `total_length`.
pub fn near_line(n_segments: usize, total_length: f64, seed: u64) -> Result<LinearNetwork> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = Vec::with_capacity(n_segments);
    let mut p = (0.0, 0.0);
    for _ in 0..n_segments {
        let q = (p.0 + 1.0, rng.random_range(-0.2..0.2));
        raw.push((p, q));
        p = q;
    }
    scale_to(&mut raw, total_length);
    build_network(&raw, 0.0)
}

/// Look up a synthetic generator by name.
pub fn by_name(kind: &str, seed: u64) -> Result<SyntheticNetwork> {
    match kind {
        "chicago" | "chicago_like" => chicago_like(seed),
        "dendrite" | "dendrite_like" => dendrite_like(seed),
        "antonio" | "antonio_like" => antonio_like(seed),
        other => Err(Error::Validation(format!(
            "unknown synthetic network {other:?} (expected chicago, dendrite or antonio)"
        ))),
    }
}
