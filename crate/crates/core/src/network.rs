//! Linear networks as measured graphs.
//!
//! A network is a finite union of straight segments. Raw geometry is turned
//! into a vertex/segment graph by snapping endpoints that lie within a merge
//! tolerance of each other. Networks are immutable once built.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};

/// A raw straight segment given by its two endpoint coordinates.
pub type RawSegment = ((f64, f64), (f64, f64));

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub id: usize,
    pub a: usize,
    pub b: usize,
    pub length: f64,
}

impl Segment {
    pub fn is_self_loop(&self) -> bool {
        self.a == self.b
    }
}

/// A location on a network: segment id plus arclength offset from vertex `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetPoint {
    pub segment: usize,
    pub offset: f64,
}

impl NetPoint {
    pub fn new(segment: usize, offset: f64) -> Self {
        NetPoint { segment, offset }
    }

    pub fn validate(&self, net: &LinearNetwork) -> Result<()> {
        let seg = net
            .segments
            .get(self.segment)
            .ok_or_else(|| validation(format!("point on unknown segment {}", self.segment)))?;
        if !self.offset.is_finite() || self.offset < 0.0 || self.offset > seg.length {
            return Err(validation(format!(
                "offset {} outside [0, {}] on segment {}",
                self.offset, seg.length, self.segment
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LinearNetwork {
    vertices: Vec<Vertex>,
    segments: Vec<Segment>,
    adjacency: Vec<Vec<usize>>,
    total_length: f64,
    component: Vec<usize>,
    n_components: usize,
    dropped_zero_length: usize,
}

/// Default snapping tolerance: `1e-6` times the bounding-box diagonal.
pub fn default_merge_tol(raw: &[RawSegment]) -> f64 {
    let mut lo = (f64::INFINITY, f64::INFINITY);
    let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &(p, q) in raw {
        for (x, y) in [p, q] {
            lo = (lo.0.min(x), lo.1.min(y));
            hi = (hi.0.max(x), hi.1.max(y));
        }
    }
    if !lo.0.is_finite() || !hi.0.is_finite() {
        return 0.0;
    }
    1e-6 * (hi.0 - lo.0).hypot(hi.1 - lo.1)
}

/// Greedy endpoint snapper. Every new vertex lies farther than `tol` from all
/// earlier ones, so no two vertices end up within tolerance of each other.
struct Snapper {
    tol: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
    exact: HashMap<(u64, u64), usize>,
    coords: Vec<(f64, f64)>,
}

impl Snapper {
    fn new(tol: f64) -> Self {
        Snapper { tol, cells: HashMap::new(), exact: HashMap::new(), coords: Vec::new() }
    }

    fn cell(&self, x: f64, y: f64) -> (i64, i64) {
        ((x / self.tol).floor() as i64, (y / self.tol).floor() as i64)
    }

    fn snap(&mut self, x: f64, y: f64) -> usize {
        // normalise -0.0
        let (x, y) = (x + 0.0, y + 0.0);
        if self.tol == 0.0 {
            let key = (x.to_bits(), y.to_bits());
            let next = self.coords.len();
            let id = *self.exact.entry(key).or_insert(next);
            if id == next {
                self.coords.push((x, y));
            }
            return id;
        }
        let (cx, cy) = self.cell(x, y);
        let mut best: Option<(f64, usize)> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.cells.get(&(cx + dx, cy + dy)) {
                    for &id in ids {
                        let (vx, vy) = self.coords[id];
                        let d = (vx - x).hypot(vy - y);
                        if d <= self.tol && best.is_none_or(|(bd, _)| d < bd) {
                            best = Some((d, id));
                        }
                    }
                }
            }
        }
        if let Some((_, id)) = best {
            return id;
        }
        let id = self.coords.len();
        self.coords.push((x, y));
        self.cells.entry((cx, cy)).or_default().push(id);
        id
    }
}

/// Build a network from raw straight segments, snapping endpoints closer than
/// `merge_tol`. Segments that collapse to zero length are dropped and counted.
pub fn build_network(raw: &[RawSegment], merge_tol: f64) -> Result<LinearNetwork> {
    if raw.is_empty() {
        return Err(Error::Domain("network needs at least one segment".into()));
    }
    if !(merge_tol >= 0.0) || !merge_tol.is_finite() {
        return Err(Error::Domain(format!("merge tolerance must be finite and >= 0, got {merge_tol}")));
    }
    for (i, &((x1, y1), (x2, y2))) in raw.iter().enumerate() {
        if ![x1, y1, x2, y2].iter().all(|v| v.is_finite()) {
            return Err(validation(format!("segment {i} has a non-finite coordinate")));
        }
    }

    let mut snapper = Snapper::new(merge_tol);
    let mut edges = Vec::with_capacity(raw.len());
    let mut dropped = 0;
    for &((x1, y1), (x2, y2)) in raw {
        let a = snapper.snap(x1, y1);
        let b = snapper.snap(x2, y2);
        let (ax, ay) = snapper.coords[a];
        let (bx, by) = snapper.coords[b];
        let length = (bx - ax).hypot(by - ay);
        if a == b || length <= 0.0 {
            dropped += 1;
            continue;
        }
        edges.push((a, b, length));
    }
    if edges.is_empty() {
        return Err(Error::Domain("all segments have zero length after snapping".into()));
    }

    // Vertices that only belonged to dropped segments are removed.
    let mut remap = vec![usize::MAX; snapper.coords.len()];
    let mut coords = Vec::new();
    for &(a, b, _) in &edges {
        for v in [a, b] {
            if remap[v] == usize::MAX {
                remap[v] = coords.len();
                coords.push(snapper.coords[v]);
            }
        }
    }
    let edges = edges.into_iter().map(|(a, b, l)| (remap[a], remap[b], l)).collect();
    let mut net = LinearNetwork::from_parts(coords, edges)?;
    net.dropped_zero_length = dropped;
    Ok(net)
}

impl LinearNetwork {
    /// Assemble a network from vertex coordinates and `(a, b, length)` edges.
    ///
    /// Lengths are taken as given, which allows self-loops and curved
    /// connections whose length differs from the chord.
    pub fn from_parts(coords: Vec<(f64, f64)>, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::Domain("network needs at least one segment".into()));
        }
        if coords.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(validation("vertex coordinates must be finite"));
        }
        let vertices: Vec<Vertex> = coords.into_iter().enumerate().map(|(id, (x, y))| Vertex { id, x, y }).collect();
        let mut segments = Vec::with_capacity(edges.len());
        let mut adjacency = vec![Vec::new(); vertices.len()];
        for (id, (a, b, length)) in edges.into_iter().enumerate() {
            if a >= vertices.len() || b >= vertices.len() {
                return Err(validation(format!("segment {id} references an unknown vertex")));
            }
            if !(length > 0.0) || !length.is_finite() {
                return Err(validation(format!("segment {id} has non-positive length {length}")));
            }
            adjacency[a].push(id);
            if b != a {
                adjacency[b].push(id);
            }
            segments.push(Segment { id, a, b, length });
        }
        let total_length = segments.iter().map(|s| s.length).sum();

        let mut uf = UnionFind::new(vertices.len());
        for s in &segments {
            uf.union(s.a, s.b);
        }
        let mut label = vec![usize::MAX; vertices.len()];
        let mut component = vec![0; vertices.len()];
        let mut n_components = 0;
        for (v, c) in component.iter_mut().enumerate() {
            let r = uf.find(v);
            if label[r] == usize::MAX {
                label[r] = n_components;
                n_components += 1;
            }
            *c = label[r];
        }

        Ok(LinearNetwork {
            vertices,
            segments,
            adjacency,
            total_length,
            component,
            n_components,
            dropped_zero_length: 0,
        })
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, id: usize) -> Option<&Segment> {
        self.segments.get(id)
    }

    /// Segment ids incident to a vertex (self-loops listed once).
    pub fn incident(&self, vertex: usize) -> &[usize] {
        &self.adjacency[vertex]
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn vertex_component(&self, vertex: usize) -> usize {
        self.component[vertex]
    }

    pub fn segment_component(&self, segment: usize) -> usize {
        self.component[self.segments[segment].a]
    }

    /// Total length of each connected component.
    pub fn component_lengths(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_components];
        for s in &self.segments {
            out[self.component[s.a]] += s.length;
        }
        out
    }

    /// Number of zero-length segments dropped while building.
    pub fn dropped_zero_length(&self) -> usize {
        self.dropped_zero_length
    }

    pub fn self_loops(&self) -> usize {
        self.segments.iter().filter(|s| s.is_self_loop()).count()
    }

    pub fn longest_segment(&self) -> f64 {
        self.segments.iter().map(|s| s.length).fold(0.0, f64::max)
    }

    /// Planar position of a network point (linear interpolation along the chord).
    pub fn position(&self, p: &NetPoint) -> (f64, f64) {
        let s = &self.segments[p.segment];
        let a = &self.vertices[s.a];
        let b = &self.vertices[s.b];
        let t = if s.length > 0.0 { p.offset / s.length } else { 0.0 };
        (a.x + t * (b.x - a.x), a.y + t * (b.y - a.y))
    }

    /// Raw segments as stored, suitable for rebuilding the network.
    pub fn raw_segments(&self) -> Vec<RawSegment> {
        self.segments
            .iter()
            .map(|s| {
                let a = &self.vertices[s.a];
                let b = &self.vertices[s.b];
                ((a.x, a.y), (b.x, b.y))
            })
            .collect()
    }

    /// The whole network viewed as a sub-network.
    pub fn full(&self) -> SubNetwork<'_> {
        SubNetwork { parent: self, segment_ids: (0..self.segments.len()).collect() }
    }
}

/// A subset of the segments of a parent network.
#[derive(Debug, Clone)]
pub struct SubNetwork<'a> {
    parent: &'a LinearNetwork,
    segment_ids: Vec<usize>,
}

/// Select a sub-network by segment ids. An empty selection is rejected unless
/// `allow_empty` is set.
pub fn extract_subnetwork<'a>(
    net: &'a LinearNetwork,
    segment_ids: &BTreeSet<usize>,
    allow_empty: bool,
) -> Result<SubNetwork<'a>> {
    if segment_ids.is_empty() && !allow_empty {
        return Err(validation("empty sub-network selection"));
    }
    if let Some(&bad) = segment_ids.iter().find(|&&id| id >= net.segments.len()) {
        return Err(validation(format!("unknown segment id {bad}")));
    }
    Ok(SubNetwork { parent: net, segment_ids: segment_ids.iter().copied().collect() })
}

impl<'a> SubNetwork<'a> {
    pub fn parent(&self) -> &'a LinearNetwork {
        self.parent
    }

    /// Member segment ids in ascending order.
    pub fn segment_ids(&self) -> &[usize] {
        &self.segment_ids
    }

    pub fn contains(&self, segment: usize) -> bool {
        self.segment_ids.binary_search(&segment).is_ok()
    }

    pub fn is_empty(&self) -> bool {
        self.segment_ids.is_empty()
    }

    pub fn total_length(&self) -> f64 {
        self.segment_ids.iter().map(|&i| self.parent.segments[i].length).sum()
    }

    /// Segments of the parent that are not in this sub-network.
    pub fn complement(&self) -> SubNetwork<'a> {
        let ids = (0..self.parent.segments.len()).filter(|&i| !self.contains(i)).collect();
        SubNetwork { parent: self.parent, segment_ids: ids }
    }

    /// Materialise the induced network. Returns it together with the map from
    /// local segment id to parent segment id. Vertices keep their parent order.
    pub fn to_network(&self) -> Result<(LinearNetwork, Vec<usize>)> {
        let mut used = vec![false; self.parent.vertices.len()];
        for &i in &self.segment_ids {
            let s = &self.parent.segments[i];
            used[s.a] = true;
            used[s.b] = true;
        }
        let mut remap = vec![usize::MAX; used.len()];
        let mut coords = Vec::new();
        for (v, &u) in used.iter().enumerate() {
            if u {
                remap[v] = coords.len();
                let vx = &self.parent.vertices[v];
                coords.push((vx.x, vx.y));
            }
        }
        let edges = self
            .segment_ids
            .iter()
            .map(|&i| {
                let s = &self.parent.segments[i];
                (remap[s.a], remap[s.b], s.length)
            })
            .collect();
        let net = LinearNetwork::from_parts(coords, edges)?;
        Ok((net, self.segment_ids.clone()))
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_endpoint_gives_three_vertices() {
        let net = build_network(&[((0.0, 0.0), (1.0, 0.0)), ((1.0, 0.0), (1.0, 2.0))], 0.0).unwrap();
        assert_eq!(net.vertices().len(), 3);
        assert_eq!(net.segments().len(), 2);
        assert_eq!(net.total_length(), 3.0);
    }

    #[test]
    fn near_endpoints_are_snapped() {
        let raw = [((0.0, 0.0), (1.0, 0.0)), ((1.0 + 1e-9, 0.0), (2.0, 0.0))];
        let net = build_network(&raw, 1e-6).unwrap();
        assert_eq!(net.vertices().len(), 3);
        assert_eq!(net.n_components(), 1);
        // without snapping they stay apart
        let net = build_network(&raw, 0.0).unwrap();
        assert_eq!(net.vertices().len(), 4);
        assert_eq!(net.n_components(), 2);
    }

    #[test]
    fn zero_length_segments_are_dropped() {
        let raw = [((0.0, 0.0), (5.0, 0.0)), ((5.0, 0.0), (5.0, 1e-9))];
        let net = build_network(&raw, 1e-6).unwrap();
        assert_eq!(net.segments().len(), 1);
        assert_eq!(net.dropped_zero_length(), 1);
        assert_eq!(net.vertices().len(), 2);
    }

    #[test]
    fn empty_and_nan_inputs_are_rejected() {
        assert!(matches!(build_network(&[], 0.0), Err(Error::Domain(_))));
        let raw = [((0.0, f64::NAN), (1.0, 0.0))];
        assert!(matches!(build_network(&raw, 0.0), Err(Error::Validation(_))));
    }

    #[test]
    fn single_segment_length() {
        let net = build_network(&[((0.0, 0.0), (6.0, 8.0))], 0.0).unwrap();
        assert_eq!(net.total_length(), 10.0);
    }

    #[test]
    fn subnetwork_lengths() {
        let raw = [((0.0, 0.0), (1.0, 0.0)), ((1.0, 0.0), (3.0, 0.0)), ((3.0, 0.0), (7.0, 0.0))];
        let net = build_network(&raw, 0.0).unwrap();
        let all: BTreeSet<usize> = (0..3).collect();
        let sub = extract_subnetwork(&net, &all, false).unwrap();
        assert_eq!(sub.total_length(), net.total_length());

        let empty = BTreeSet::new();
        assert!(extract_subnetwork(&net, &empty, false).is_err());
        let sub = extract_subnetwork(&net, &empty, true).unwrap();
        assert_eq!(sub.total_length(), 0.0);

        let bad: BTreeSet<usize> = [5].into();
        assert!(extract_subnetwork(&net, &bad, false).is_err());

        let some: BTreeSet<usize> = [0, 2].into();
        let sub = extract_subnetwork(&net, &some, false).unwrap();
        assert_eq!(sub.total_length() + sub.complement().total_length(), net.total_length());
        let (induced, map) = sub.to_network().unwrap();
        assert_eq!(map, vec![0, 2]);
        assert_eq!(induced.total_length(), 5.0);
        assert_eq!(induced.n_components(), 2);
    }

    #[test]
    fn netpoint_validation() {
        let net = build_network(&[((0.0, 0.0), (10.0, 0.0))], 0.0).unwrap();
        assert!(NetPoint::new(0, 10.0).validate(&net).is_ok());
        assert!(NetPoint::new(0, 10.5).validate(&net).is_err());
        assert!(NetPoint::new(1, 1.0).validate(&net).is_err());
        assert_eq!(net.position(&NetPoint::new(0, 4.0)), (4.0, 0.0));
    }

    #[test]
    fn from_parts_allows_self_loops_and_multi_edges() {
        let net = LinearNetwork::from_parts(vec![(0.0, 0.0), (1.0, 0.0)], vec![(0, 1, 1.0), (0, 1, 2.0), (1, 1, 3.0)])
            .unwrap();
        assert_eq!(net.self_loops(), 1);
        assert_eq!(net.incident(1).len(), 3);
        assert_eq!(net.total_length(), 6.0);
    }
}
