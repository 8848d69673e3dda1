//! File formats: network and point ingestion, table and report emission.
//!
//! Networks come as GeoJSON `LineString`/`MultiLineString` features or as CSV
//! with columns `x1,y1,x2,y2`. Point patterns come as CSV (`x,y` to snap, or
//! `segment_id,offset` for exact placement, optional `label`) or GeoJSON
//! `Point` features. CSV output may start with `#` provenance comment lines,
//! which every reader here skips.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use rstar::primitives::{GeomWithData, Line};
use rstar::RTree;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::geodesics::VolumeSample;
use crate::mixture::{Label, MixtureFit};
use crate::network::{LinearNetwork, NetPoint, RawSegment};

/// Version tag carried by every JSON document we emit.
pub const SCHEMA_VERSION: u32 = 1;

/// Default snapping distance for planar point coordinates.
pub const DEFAULT_SNAP_TOL: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkFormat {
    Csv,
    GeoJson,
}

impl NetworkFormat {
    /// Guess from the file extension; anything not `.csv` is read as GeoJSON.
    pub fn from_path(path: &Path) -> NetworkFormat {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("csv") => NetworkFormat::Csv,
            _ => NetworkFormat::GeoJson,
        }
    }
}

/// Raw network geometry plus the length unit when the source records one.
#[derive(Debug, Clone, PartialEq)]
pub struct RawNetwork {
    pub segments: Vec<RawSegment>,
    pub unit: Option<String>,
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).flexible(false).from_reader(r)
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.eq_ignore_ascii_case(name))
}

fn parse_f64(rec: &csv::StringRecord, idx: usize, row: usize) -> Result<f64> {
    let raw = rec.get(idx).unwrap_or("");
    raw.parse::<f64>().map_err(|_| validation(format!("row {row}: cannot parse {raw:?} as a number")))
}

pub fn read_segments_csv<R: Read>(r: R) -> Result<RawNetwork> {
    let mut rdr = csv_reader(r);
    let headers = rdr.headers()?.clone();
    let cols: Vec<usize> = ["x1", "y1", "x2", "y2"]
        .iter()
        .map(|c| column(&headers, c).ok_or_else(|| validation(format!("network CSV lacks column {c}"))))
        .collect::<Result<_>>()?;
    let mut segments = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let v: Vec<f64> = cols.iter().map(|&c| parse_f64(&rec, c, row)).collect::<Result<_>>()?;
        segments.push(((v[0], v[1]), (v[2], v[3])));
    }
    Ok(RawNetwork { segments, unit: None })
}

fn push_polyline(out: &mut Vec<RawSegment>, coords: &[Vec<f64>]) -> Result<()> {
    for w in coords.windows(2) {
        if w[0].len() < 2 || w[1].len() < 2 {
            return Err(Error::GeoJson("position with fewer than two coordinates".into()));
        }
        out.push(((w[0][0], w[0][1]), (w[1][0], w[1][1])));
    }
    Ok(())
}

fn collect_lines(geom: &geojson::Value, out: &mut Vec<RawSegment>) -> Result<()> {
    use geojson::Value;
    match geom {
        Value::LineString(line) => push_polyline(out, line),
        Value::MultiLineString(lines) => lines.iter().try_for_each(|l| push_polyline(out, l)),
        Value::GeometryCollection(gs) => gs.iter().try_for_each(|g| collect_lines(&g.value, out)),
        _ => Ok(()),
    }
}

/// Polylines in a GeoJSON document, split into straight segments. A `unit`
/// foreign member on the collection is reported back.
pub fn read_network_geojson(text: &str) -> Result<RawNetwork> {
    let gj: geojson::GeoJson = text.parse().map_err(|e: geojson::Error| Error::GeoJson(e.to_string()))?;
    let mut segments = Vec::new();
    let mut unit = None;
    match &gj {
        geojson::GeoJson::FeatureCollection(fc) => {
            unit = fc.foreign_members.as_ref().and_then(|m| m.get("unit")).and_then(|u| u.as_str()).map(str::to_string);
            for f in &fc.features {
                if let Some(g) = &f.geometry {
                    collect_lines(&g.value, &mut segments)?;
                }
            }
        }
        geojson::GeoJson::Feature(f) => {
            if let Some(g) = &f.geometry {
                collect_lines(&g.value, &mut segments)?;
            }
        }
        geojson::GeoJson::Geometry(g) => collect_lines(&g.value, &mut segments)?,
    }
    if segments.is_empty() {
        return Err(Error::GeoJson("no LineString geometry found".into()));
    }
    Ok(RawNetwork { segments, unit })
}

pub fn read_raw_network(path: &Path, format: Option<NetworkFormat>) -> Result<RawNetwork> {
    match format.unwrap_or_else(|| NetworkFormat::from_path(path)) {
        NetworkFormat::Csv => read_segments_csv(BufReader::new(File::open(path)?)),
        NetworkFormat::GeoJson => read_network_geojson(&std::fs::read_to_string(path)?),
    }
}

/// Straight segments with endpoints, in the ingestion format.
pub fn write_network_csv<W: Write>(net: &LinearNetwork, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["x1", "y1", "x2", "y2"])?;
    for ((x1, y1), (x2, y2)) in net.raw_segments() {
        wtr.write_record([x1, y1, x2, y2].map(|v| v.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Segment table `id,a,b,length`.
pub fn write_segments_csv<W: Write>(net: &LinearNetwork, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["id", "a", "b", "length"])?;
    for s in net.segments() {
        wtr.write_record([s.id.to_string(), s.a.to_string(), s.b.to_string(), s.length.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Nearest-segment lookup by perpendicular projection.
pub struct SegmentIndex<'a> {
    net: &'a LinearNetwork,
    tree: RTree<GeomWithData<Line<[f64; 2]>, usize>>,
}

impl<'a> SegmentIndex<'a> {
    pub fn new(net: &'a LinearNetwork) -> Self {
        let items = net
            .raw_segments()
            .into_iter()
            .enumerate()
            .map(|(i, ((x1, y1), (x2, y2)))| GeomWithData::new(Line::new([x1, y1], [x2, y2]), i))
            .collect();
        SegmentIndex { net, tree: RTree::bulk_load(items) }
    }

    /// Closest network location to a planar point and its distance.
    pub fn project(&self, x: f64, y: f64) -> Option<(NetPoint, f64)> {
        let hit = self.tree.nearest_neighbor(&[x, y])?;
        let seg = &self.net.segments()[hit.data];
        let (a, b) = (hit.geom().from, hit.geom().to);
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len2 = dx * dx + dy * dy;
        let t = if len2 > 0.0 { (((x - a[0]) * dx + (y - a[1]) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let (px, py) = (a[0] + t * dx, a[1] + t * dy);
        let offset = (t * seg.length).clamp(0.0, seg.length);
        Some((NetPoint::new(seg.id, offset), (px - x).hypot(py - y)))
    }
}

/// Point pattern read from file. `rows` maps each point back to its input
/// row; rows farther than the snap tolerance are listed in `rejected`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    pub points: Vec<NetPoint>,
    pub labels: Option<Vec<Label>>,
    pub rows: Vec<usize>,
    pub rejected: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointFormat {
    Csv,
    GeoJson,
}

impl PointFormat {
    pub fn from_path(path: &Path) -> PointFormat {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("geojson") | Some("json") => PointFormat::GeoJson,
            _ => PointFormat::Csv,
        }
    }
}

fn snap_all(net: &LinearNetwork, coords: Vec<(usize, f64, f64, Option<Label>)>, tol: f64) -> Result<PointSet> {
    let index = SegmentIndex::new(net);
    let mut out = PointSet { points: Vec::new(), labels: None, rows: Vec::new(), rejected: Vec::new() };
    let mut labels = Vec::new();
    let has_labels = coords.iter().any(|c| c.3.is_some());
    for (row, x, y, label) in coords {
        if !x.is_finite() || !y.is_finite() {
            return Err(validation(format!("row {row}: non-finite coordinate")));
        }
        let (p, d) = index.project(x, y).ok_or_else(|| validation("network has no segments"))?;
        if d > tol {
            out.rejected.push((row, d));
            continue;
        }
        out.points.push(p);
        out.rows.push(row);
        labels.push(label.unwrap_or(Label::Clutter));
    }
    if has_labels {
        out.labels = Some(labels);
    }
    Ok(out)
}

/// Read points from CSV. Exact `segment_id,offset` columns take precedence
/// over planar `x,y`, which are snapped within `snap_tol`.
pub fn read_points_csv<R: Read>(net: &LinearNetwork, r: R, snap_tol: f64) -> Result<PointSet> {
    let mut rdr = csv_reader(r);
    let headers = rdr.headers()?.clone();
    let label_col = column(&headers, "label").or_else(|| column(&headers, "truth"));
    let exact = (column(&headers, "segment_id"), column(&headers, "offset"));
    let planar = (column(&headers, "x"), column(&headers, "y"));

    let records: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;
    let label = |rec: &csv::StringRecord| -> Result<Option<Label>> {
        label_col.map(|c| rec.get(c).unwrap_or("").parse::<Label>()).transpose()
    };

    if let (Some(sc), Some(oc)) = exact {
        let mut out = PointSet { points: Vec::new(), labels: None, rows: Vec::new(), rejected: Vec::new() };
        let mut labels = Vec::new();
        for (row, rec) in records.iter().enumerate() {
            let sid: usize =
                rec.get(sc).unwrap_or("").parse().map_err(|_| validation(format!("row {row}: bad segment_id")))?;
            let p = NetPoint::new(sid, parse_f64(rec, oc, row)?);
            p.validate(net).map_err(|e| validation(format!("row {row}: {e}")))?;
            out.points.push(p);
            out.rows.push(row);
            labels.push(label(rec)?.unwrap_or(Label::Clutter));
        }
        if label_col.is_some() {
            out.labels = Some(labels);
        }
        return Ok(out);
    }
    if let (Some(xc), Some(yc)) = planar {
        let coords = records
            .iter()
            .enumerate()
            .map(|(row, rec)| Ok((row, parse_f64(rec, xc, row)?, parse_f64(rec, yc, row)?, label(rec)?)))
            .collect::<Result<_>>()?;
        return snap_all(net, coords, snap_tol);
    }
    Err(validation("point CSV needs columns segment_id,offset or x,y"))
}

/// GeoJSON `Point`/`MultiPoint` features, snapped to the network. A `label`
/// property, when present, is read as ground truth.
pub fn read_points_geojson(net: &LinearNetwork, text: &str, snap_tol: f64) -> Result<PointSet> {
    let gj: geojson::GeoJson = text.parse().map_err(|e: geojson::Error| Error::GeoJson(e.to_string()))?;
    let features = match gj {
        geojson::GeoJson::FeatureCollection(fc) => fc.features,
        geojson::GeoJson::Feature(f) => vec![f],
        geojson::GeoJson::Geometry(g) => vec![geojson::Feature { geometry: Some(g), ..Default::default() }],
    };
    let mut coords = Vec::new();
    for f in features {
        let label = f
            .properties
            .as_ref()
            .and_then(|p| p.get("label"))
            .and_then(|v| v.as_str().map(str::to_string).or_else(|| v.as_i64().map(|i| i.to_string())))
            .map(|s| s.parse::<Label>())
            .transpose()?;
        let Some(g) = f.geometry else { continue };
        let row = coords.len();
        match g.value {
            geojson::Value::Point(p) if p.len() >= 2 => coords.push((row, p[0], p[1], label)),
            geojson::Value::MultiPoint(ps) => {
                for p in ps.iter().filter(|p| p.len() >= 2) {
                    coords.push((coords.len(), p[0], p[1], label));
                }
            }
            _ => {}
        }
    }
    snap_all(net, coords, snap_tol)
}

pub fn read_points(net: &LinearNetwork, path: &Path, format: Option<PointFormat>, snap_tol: f64) -> Result<PointSet> {
    match format.unwrap_or_else(|| PointFormat::from_path(path)) {
        PointFormat::Csv => read_points_csv(net, BufReader::new(File::open(path)?), snap_tol),
        PointFormat::GeoJson => read_points_geojson(net, &std::fs::read_to_string(path)?, snap_tol),
    }
}

/// Exact-placement point table, optionally with labels.
pub fn write_points_csv<W: Write>(pts: &[NetPoint], labels: Option<&[Label]>, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["index", "segment_id", "offset"];
    if labels.is_some() {
        header.push("label");
    }
    wtr.write_record(&header)?;
    for (i, p) in pts.iter().enumerate() {
        let mut rec = vec![i.to_string(), p.segment.to_string(), p.offset.to_string()];
        if let Some(l) = labels {
            rec.push(l[i].as_str().to_string());
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Volume table `index,d_K,s_K`.
pub fn write_volumes_csv<W: Write>(samples: &[VolumeSample], mut w: W, provenance: Option<&Provenance>) -> Result<()> {
    if let Some(p) = provenance {
        p.write_comment(&mut w)?;
    }
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["index", "d_K", "s_K"])?;
    for s in samples {
        wtr.write_record([s.point_index.to_string(), s.d_k.to_string(), s.s_k.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Labelled pattern `index,segment_id,offset,x,y,s_K,delta,label`. Readable
/// again by [`read_points_csv`].
pub fn write_labelled_csv<W: Write>(
    net: &LinearNetwork,
    pts: &[NetPoint],
    volumes: &[f64],
    delta: &[f64],
    labels: &[Label],
    mut w: W,
    provenance: Option<&Provenance>,
) -> Result<()> {
    if let Some(p) = provenance {
        p.write_comment(&mut w)?;
    }
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["index", "segment_id", "offset", "x", "y", "s_K", "delta", "label"])?;
    for (i, p) in pts.iter().enumerate() {
        let (x, y) = net.position(p);
        wtr.write_record([
            i.to_string(),
            p.segment.to_string(),
            p.offset.to_string(),
            x.to_string(),
            y.to_string(),
            volumes[i].to_string(),
            delta[i].to_string(),
            labels[i].as_str().to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Config hash and seed stamped on every output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: Option<u64>,
}

impl Provenance {
    /// Hash any serialisable configuration (SHA-256 of its JSON form, first 16 hex digits).
    pub fn of<T: Serialize>(config: &T, seed: Option<u64>) -> Provenance {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_vec(config).unwrap_or_default();
        let digest = Sha256::digest(&json);
        Provenance { config_hash: hex::encode(&digest[..8]), seed }
    }

    pub fn write_comment<W: Write>(&self, w: &mut W) -> Result<()> {
        let seed = self.seed.map(|s| s.to_string()).unwrap_or_else(|| "none".into());
        writeln!(w, "# netclutter schema_version={SCHEMA_VERSION} config_hash={} seed={seed}", self.config_hash)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub schema_version: u32,
    #[serde(rename = "K")]
    pub k: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub p: f64,
    pub iterations: usize,
    pub converged: bool,
    pub degenerate: bool,
    pub loglik: f64,
    pub n: usize,
    pub n_feature: usize,
    #[serde(flatten)]
    pub provenance: Provenance,
}

impl FitReport {
    pub fn new(fit: &MixtureFit, n_feature: usize, provenance: Provenance) -> Self {
        FitReport {
            schema_version: SCHEMA_VERSION,
            k: fit.k,
            lambda1: fit.lambda1,
            lambda2: fit.lambda2,
            p: fit.p,
            iterations: fit.iterations,
            converged: fit.converged,
            degenerate: fit.degenerate,
            loglik: fit.loglik(),
            n: fit.delta.len(),
            n_feature,
            provenance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub schema_version: u32,
    pub error: String,
    pub message: String,
    pub exit_code: i32,
}

impl ErrorReport {
    pub fn new(e: &Error) -> Self {
        ErrorReport {
            schema_version: SCHEMA_VERSION,
            error: e.kind().into(),
            message: e.to_string(),
            exit_code: e.exit_code(),
        }
    }
}

/// Partition file `segment_id,zone`; zones must cover every segment once.
pub fn read_partition_csv<R: Read>(net: &LinearNetwork, r: R) -> Result<Vec<String>> {
    let mut rdr = csv_reader(r);
    let headers = rdr.headers()?.clone();
    let sc = column(&headers, "segment_id").ok_or_else(|| validation("partition CSV lacks segment_id"))?;
    let zc = column(&headers, "zone").ok_or_else(|| validation("partition CSV lacks zone"))?;
    let mut zones: Vec<Option<String>> = vec![None; net.segments().len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let sid: usize =
            rec.get(sc).unwrap_or("").parse().map_err(|_| validation(format!("row {row}: bad segment_id")))?;
        let zone = rec.get(zc).unwrap_or("").to_string();
        let slot = zones.get_mut(sid).ok_or_else(|| validation(format!("row {row}: unknown segment {sid}")))?;
        if slot.is_some() {
            return Err(validation(format!("segment {sid} assigned to more than one zone")));
        }
        *slot = Some(zone);
    }
    zones
        .into_iter()
        .enumerate()
        .map(|(i, z)| z.ok_or_else(|| validation(format!("partition does not cover segment {i}"))))
        .collect()
}

/// Equal-width histogram of values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub k: usize,
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(k: usize, values: &[f64], bins: usize) -> Histogram {
        let bins = bins.max(1);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min).min(0.0);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let hi = if hi > lo { hi } else { lo + 1.0 };
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|i| lo + i as f64 * width).collect();
        let mut counts = vec![0; bins];
        for &v in values {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Histogram { k, edges, counts }
    }
}

pub fn write_histograms_csv<W: Write>(hists: &[Histogram], mut w: W, provenance: Option<&Provenance>) -> Result<()> {
    if let Some(p) = provenance {
        p.write_comment(&mut w)?;
    }
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["K", "bin_lo", "bin_hi", "count"])?;
    for h in hists {
        for (i, c) in h.counts.iter().enumerate() {
            wtr.write_record([h.k.to_string(), h.edges[i].to_string(), h.edges[i + 1].to_string(), c.to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_entropy_csv<W: Write>(
    curve: &crate::kselect::EntropyCurve,
    mut w: W,
    provenance: Option<&Provenance>,
) -> Result<()> {
    if let Some(p) = provenance {
        p.write_comment(&mut w)?;
    }
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["K", "entropy"])?;
    for (k, e) in curve.ks.iter().zip(&curve.entropies) {
        wtr.write_record([k.to_string(), e.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Rate table mirroring the published layout: three rows (TPR, FPR, ACC) per
/// design with one column per K policy.
pub fn write_rates_csv<W: Write>(
    reports: &[crate::simulation::RatesReport],
    mut w: W,
    provenance: Option<&Provenance>,
) -> Result<()> {
    if let Some(p) = provenance {
        p.write_comment(&mut w)?;
    }
    let first = reports.first().ok_or_else(|| validation("no rate reports to write"))?;
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["design".to_string()];
    for l in &first.layers {
        header.push(format!("lambda_{}", l.name));
    }
    for l in &first.layers {
        header.push(format!("E_n_{}", l.name));
    }
    for l in &first.layers {
        header.push(format!("mean_n_{}", l.name));
    }
    header.extend(["k_bar", "k_sd", "rate"].map(String::from));
    for p in &first.policies {
        header.push(p.policy.to_string());
    }
    header.push("failed".into());
    wtr.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_default();
    for r in reports {
        if r.layers.len() != first.layers.len() || r.policies.len() != first.policies.len() {
            return Err(validation("rate reports in one table must share layers and policies"));
        }
        let auto = r.policies.iter().find(|p| p.k_bar.is_some());
        let failed: usize = r.policies.iter().map(|p| p.failed).sum();
        for (rate, pick) in [("TPR", 0), ("FPR", 1), ("ACC", 2)] {
            let mut rec = vec![r.design.clone()];
            rec.extend(r.layers.iter().map(|l| format!("{}", l.rate)));
            rec.extend(r.layers.iter().map(|l| format!("{:.0}", l.expected)));
            rec.extend(r.layers.iter().map(|l| format!("{:.2}", l.realized_mean)));
            rec.push(opt(auto.and_then(|p| p.k_bar)));
            rec.push(opt(auto.and_then(|p| p.k_sd)));
            rec.push(rate.into());
            for p in &r.policies {
                rec.push(opt([p.tpr, p.fpr, p.acc][pick]));
            }
            rec.push(failed.to_string());
            wtr.write_record(&rec)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Per-point output of a partitioned run. Points in skipped or failed zones
/// have empty `K`, `s_K`, `delta` and `label` fields.
pub fn write_partitioned_csv<W: Write>(
    net: &LinearNetwork,
    pts: &[NetPoint],
    zone_of_segment: &[String],
    result: &crate::pipeline::PartitionedResult,
    mut w: W,
    provenance: Option<&Provenance>,
) -> Result<()> {
    if let Some(p) = provenance {
        p.write_comment(&mut w)?;
    }
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["index", "segment_id", "offset", "x", "y", "zone", "K", "s_K", "delta", "label"])?;
    let show = |v: Option<String>| v.unwrap_or_default();
    for (i, p) in pts.iter().enumerate() {
        let (x, y) = net.position(p);
        wtr.write_record([
            i.to_string(),
            p.segment.to_string(),
            p.offset.to_string(),
            x.to_string(),
            y.to_string(),
            zone_of_segment[p.segment].clone(),
            show(result.k[i].map(|k| k.to_string())),
            show(result.volumes[i].map(|v| v.to_string())),
            show(result.delta[i].map(|v| v.to_string())),
            show(result.labels[i].map(|l| l.as_str().to_string())),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// One row per zone with its status and fitted parameters.
pub fn write_zones_csv<W: Write>(
    zones: &[crate::pipeline::ZoneReport],
    mut w: W,
    provenance: Option<&Provenance>,
) -> Result<()> {
    if let Some(p) = provenance {
        p.write_comment(&mut w)?;
    }
    let mut wtr = csv::Writer::from_writer(w);
    for z in zones {
        wtr.serialize(z)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Group point indices by zone name (in sorted zone order).
pub fn points_by_zone(pts: &[NetPoint], zone_of_segment: &[String]) -> BTreeMap<String, Vec<usize>> {
    let mut out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for zone in zone_of_segment {
        out.entry(zone.clone()).or_default();
    }
    for (i, p) in pts.iter().enumerate() {
        out.entry(zone_of_segment[p.segment].clone()).or_default().push(i);
    }
    out
}
