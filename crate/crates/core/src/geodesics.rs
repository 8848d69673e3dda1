//! Shortest-path distances, disc volumes and K-th nearest-neighbour volumes.
//!
//! Points of a pattern are inserted into the network as graph nodes that split
//! their host segments. All distance queries then reduce to single-source
//! Dijkstra over the augmented graph. The measure of a disc of radius `r`
//! centred at `u` is closed edge by edge: a sub-edge of length `l` whose ends
//! sit at distances `da`, `db` contributes `min(l, max(0, r - da) + max(0, r - db))`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::network::{LinearNetwork, NetPoint};

/// Absolute tolerance for distance comparisons, in network length units.
pub const DIST_EPS: f64 = 1e-9;

/// A piece of an original segment between two consecutive graph nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubEdge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
    pub segment: usize,
}

/// Network with pattern points inserted as nodes.
///
/// Nodes `0..V` are the network vertices, synthetic nodes follow. Points at
/// offset 0 or at the full segment length reuse the vertex node.
#[derive(Debug, Clone)]
pub struct AugmentedGraph<'a> {
    base: &'a LinearNetwork,
    n_nodes: usize,
    edges: Vec<SubEdge>,
    adj_start: Vec<usize>,
    adj: Vec<(usize, usize)>,
    chains: Vec<Vec<usize>>,
    point_node: Vec<usize>,
    node_points_start: Vec<usize>,
    node_points: Vec<usize>,
    points: Vec<NetPoint>,
}

/// Insert every point of a pattern into `net`. Identical locations share one
/// node but keep their own point index.
pub fn insert_points<'a>(net: &'a LinearNetwork, pts: &[NetPoint]) -> Result<AugmentedGraph<'a>> {
    for p in pts {
        p.validate(net)?;
    }
    let nv = net.vertices().len();
    let mut per_segment: Vec<Vec<usize>> = vec![Vec::new(); net.segments().len()];
    for (i, p) in pts.iter().enumerate() {
        per_segment[p.segment].push(i);
    }

    let mut point_node = vec![usize::MAX; pts.len()];
    let mut edges = Vec::new();
    let mut chains = Vec::with_capacity(net.segments().len());
    let mut n_nodes = nv;

    for (sid, seg) in net.segments().iter().enumerate() {
        let members = &mut per_segment[sid];
        members.sort_by(|&i, &j| pts[i].offset.total_cmp(&pts[j].offset).then(i.cmp(&j)));
        let mut chain = Vec::new();
        let mut prev_node = seg.a;
        let mut prev_offset = 0.0;
        let mut k = 0;
        while k < members.len() {
            let off = pts[members[k]].offset;
            let node = if off == 0.0 {
                seg.a
            } else if off == seg.length {
                seg.b
            } else {
                let id = n_nodes;
                n_nodes += 1;
                id
            };
            while k < members.len() && pts[members[k]].offset == off {
                point_node[members[k]] = node;
                k += 1;
            }
            if off > 0.0 && off < seg.length {
                chain.push(edges.len());
                edges.push(SubEdge { a: prev_node, b: node, length: off - prev_offset, segment: sid });
                prev_node = node;
                prev_offset = off;
            }
        }
        chain.push(edges.len());
        edges.push(SubEdge { a: prev_node, b: seg.b, length: seg.length - prev_offset, segment: sid });
        chains.push(chain);
    }

    let mut degree = vec![0usize; n_nodes + 1];
    for e in &edges {
        degree[e.a] += 1;
        if e.b != e.a {
            degree[e.b] += 1;
        }
    }
    let mut adj_start = vec![0usize; n_nodes + 1];
    for v in 0..n_nodes {
        adj_start[v + 1] = adj_start[v] + degree[v];
    }
    let mut fill = adj_start.clone();
    let mut adj = vec![(0, 0); adj_start[n_nodes]];
    for (eid, e) in edges.iter().enumerate() {
        adj[fill[e.a]] = (eid, e.b);
        fill[e.a] += 1;
        if e.b != e.a {
            adj[fill[e.b]] = (eid, e.a);
            fill[e.b] += 1;
        }
    }

    let mut counts = vec![0usize; n_nodes + 1];
    for &n in &point_node {
        counts[n + 1] += 1;
    }
    for v in 0..n_nodes {
        counts[v + 1] += counts[v];
    }
    let node_points_start = counts.clone();
    let mut node_points = vec![0; pts.len()];
    let mut fill = counts;
    for (i, &n) in point_node.iter().enumerate() {
        node_points[fill[n]] = i;
        fill[n] += 1;
    }

    Ok(AugmentedGraph {
        base: net,
        n_nodes,
        edges,
        adj_start,
        adj,
        chains,
        point_node,
        node_points_start,
        node_points,
        points: pts.to_vec(),
    })
}

#[derive(Copy, Clone, PartialEq)]
struct HeapItem {
    dist: f64,
    node: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Per-neighbour-scan output for one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointProfile {
    /// Sorted distances to the nearest `k_max` other points (fewer if the
    /// component runs out).
    pub knn: Vec<f64>,
    /// `volumes[k - 1]` is the disc volume at radius `knn[k - 1]`.
    pub volumes: Vec<f64>,
}

impl PointProfile {
    pub fn distance(&self, k: usize) -> f64 {
        self.knn.get(k - 1).copied().unwrap_or(f64::INFINITY)
    }

    pub fn volume(&self, k: usize) -> Option<f64> {
        self.volumes.get(k - 1).copied()
    }
}

/// Reusable Dijkstra buffers.
pub struct Scratch {
    dist: Vec<f64>,
    settled: Vec<bool>,
    touched: Vec<usize>,
    order: Vec<usize>,
    heap: BinaryHeap<HeapItem>,
}

impl Scratch {
    pub fn new(n_nodes: usize) -> Self {
        Scratch {
            dist: vec![f64::INFINITY; n_nodes],
            settled: vec![false; n_nodes],
            touched: Vec::new(),
            order: Vec::new(),
            heap: BinaryHeap::new(),
        }
    }

    fn reset(&mut self) {
        for &v in &self.touched {
            self.dist[v] = f64::INFINITY;
            self.settled[v] = false;
        }
        self.touched.clear();
        self.order.clear();
        self.heap.clear();
    }
}

/// One sample of the K-th nearest-neighbour volume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeSample {
    pub point_index: usize,
    pub k: usize,
    pub d_k: f64,
    pub s_k: f64,
}

impl<'a> AugmentedGraph<'a> {
    pub fn base(&self) -> &'a LinearNetwork {
        self.base
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_points(&self) -> usize {
        self.point_node.len()
    }

    pub fn points(&self) -> &[NetPoint] {
        &self.points
    }

    pub fn edges(&self) -> &[SubEdge] {
        &self.edges
    }

    /// Ordered sub-edge ids making up an original segment.
    pub fn chain(&self, segment: usize) -> &[usize] {
        &self.chains[segment]
    }

    pub fn point_node(&self, i: usize) -> usize {
        self.point_node[i]
    }

    /// Point indices located at a node.
    pub fn points_at(&self, node: usize) -> &[usize] {
        &self.node_points[self.node_points_start[node]..self.node_points_start[node + 1]]
    }

    fn neighbours(&self, node: usize) -> &[(usize, usize)] {
        &self.adj[self.adj_start[node]..self.adj_start[node + 1]]
    }

    /// Exact single-source shortest-path distances to every node; unreachable
    /// nodes get `+inf`.
    pub fn distances_from(&self, source: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.n_nodes];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(HeapItem { dist: 0.0, node: source });
        while let Some(HeapItem { dist: d, node }) = heap.pop() {
            if d > dist[node] {
                continue;
            }
            for &(eid, other) in self.neighbours(node) {
                let nd = d + self.edges[eid].length;
                if nd < dist[other] {
                    dist[other] = nd;
                    heap.push(HeapItem { dist: nd, node: other });
                }
            }
        }
        dist
    }

    /// Measure of the network disc of radius `r` around `node`.
    pub fn disc_volume(&self, node: usize, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(validation(format!("disc radius must be >= 0, got {r}")));
        }
        let dist = self.distances_from(node);
        Ok(self.edges.iter().map(|e| covered(e.length, dist[e.a], dist[e.b], r)).sum())
    }

    /// Distance from point `i` to its K-th nearest other point, `+inf` when
    /// fewer than `k` points are reachable.
    pub fn knn_distance(&self, i: usize, k: usize) -> Result<f64> {
        if k == 0 {
            return Err(Error::Domain("K must be at least 1".into()));
        }
        let mut scratch = Scratch::new(self.n_nodes);
        Ok(self.profile(i, k, &mut scratch).distance(k))
    }

    /// Neighbour distances and disc volumes for K = 1..=k_max from a single
    /// Dijkstra run, cut off once the `k_max`-th neighbour is settled.
    pub fn profile(&self, i: usize, k_max: usize, s: &mut Scratch) -> PointProfile {
        s.reset();
        let source = self.point_node[i];
        let mut knn = Vec::with_capacity(k_max);
        s.dist[source] = 0.0;
        s.touched.push(source);
        s.heap.push(HeapItem { dist: 0.0, node: source });
        while let Some(HeapItem { dist: d, node }) = s.heap.pop() {
            if s.settled[node] || d > s.dist[node] {
                continue;
            }
            if knn.len() >= k_max && d > knn[k_max - 1] {
                break;
            }
            s.settled[node] = true;
            s.order.push(node);
            for &j in self.points_at(node) {
                if j != i && knn.len() < k_max {
                    knn.push(d);
                }
            }
            for &(eid, other) in self.neighbours(node) {
                let nd = d + self.edges[eid].length;
                if nd < s.dist[other] {
                    if s.dist[other].is_infinite() {
                        s.touched.push(other);
                    }
                    s.dist[other] = nd;
                    s.heap.push(HeapItem { dist: nd, node: other });
                }
            }
        }
        let volumes = knn.iter().map(|&r| self.settled_volume(s, r)).collect();
        PointProfile { knn, volumes }
    }

    // Every node with true distance <= r is settled, and any node with a
    // finite tentative distance above r is really farther than r.
    fn settled_volume(&self, s: &Scratch, r: f64) -> f64 {
        let mut total = 0.0;
        for &u in &s.order {
            let du = s.dist[u];
            if du > r {
                break;
            }
            for &(eid, w) in self.neighbours(u) {
                let e = &self.edges[eid];
                if w == u {
                    total += e.length.min(2.0 * (r - du));
                } else if s.dist[w] <= r {
                    if e.a == u {
                        total += e.length.min((r - du) + (r - s.dist[w]));
                    }
                } else {
                    total += e.length.min(r - du);
                }
            }
        }
        total
    }

    /// Profiles for every point, computed in parallel and returned in point
    /// order. A deadline aborts the pass with [`Error::TimeBudget`].
    pub fn profiles(&self, k_max: usize, deadline: Option<(Instant, f64)>) -> Result<Vec<PointProfile>> {
        if k_max == 0 {
            return Err(Error::Domain("K must be at least 1".into()));
        }
        (0..self.n_points())
            .into_par_iter()
            .map_init(
                || Scratch::new(self.n_nodes),
                |s, i| {
                    if let Some((start, budget)) = deadline {
                        if start.elapsed().as_secs_f64() > budget {
                            return Err(Error::TimeBudget(budget));
                        }
                    }
                    Ok(self.profile(i, k_max, s))
                },
            )
            .collect()
    }
}

/// Covered length of a sub-edge for a disc of radius `r`.
pub fn covered(length: f64, da: f64, db: f64, r: f64) -> f64 {
    length.min((r - da).max(0.0) + (r - db).max(0.0))
}

/// Turn profiles into volume samples for a fixed K, failing on points with
/// fewer than `k` reachable neighbours.
pub fn samples_at(profiles: &[PointProfile], k: usize) -> Result<Vec<VolumeSample>> {
    profiles
        .iter()
        .enumerate()
        .map(|(i, p)| match p.volume(k) {
            Some(s_k) => Ok(VolumeSample { point_index: i, k, d_k: p.knn[k - 1], s_k }),
            None => Err(Error::InsufficientNeighbours { point: i, k, found: p.knn.len() }),
        })
        .collect()
}

/// K-th nearest-neighbour distances and disc volumes for every point.
pub fn knn_volumes(net: &LinearNetwork, pts: &[NetPoint], k: usize) -> Result<Vec<VolumeSample>> {
    if k == 0 {
        return Err(Error::Domain("K must be at least 1".into()));
    }
    if pts.len() < k + 1 {
        return Err(Error::InsufficientPoints { have: pts.len(), need: k + 1 });
    }
    let g = insert_points(net, pts)?;
    samples_at(&g.profiles(k, None)?, k)
}

/// Radius of the smallest network disc covering the whole network.
///
/// Candidate centres are the vertices and segment midpoints, so the result is
/// an upper bound on the exact value, off by at most half the longest segment.
/// Disconnected networks report the smallest per-component value.
pub fn circumradius(net: &LinearNetwork) -> f64 {
    let mids: Vec<NetPoint> = net.segments().iter().map(|s| NetPoint::new(s.id, 0.5 * s.length)).collect();
    let g = insert_points(net, &mids).expect("midpoints are valid");
    let nv = net.vertices().len();
    let mut candidates: Vec<(usize, usize)> = (0..nv).map(|v| (v, net.vertex_component(v))).collect();
    for (i, s) in net.segments().iter().enumerate() {
        candidates.push((g.point_node(i), net.segment_component(s.id)));
    }
    let ecc: Vec<(usize, f64)> = candidates
        .par_iter()
        .map(|&(node, comp)| {
            let dist = g.distances_from(node);
            let e = g
                .edges()
                .iter()
                .filter(|e| dist[e.a].is_finite())
                .map(|e| 0.5 * (dist[e.a] + dist[e.b] + e.length))
                .fold(0.0, f64::max);
            (comp, e)
        })
        .collect();
    let mut best = vec![f64::INFINITY; net.n_components()];
    for (comp, e) in ecc {
        best[comp] = best[comp].min(e);
    }
    best.into_iter().fold(f64::INFINITY, f64::min)
}
