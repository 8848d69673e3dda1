//! The classification pipeline: choose K, compute volumes, fit the mixture,
//! label the points. Also the per-zone variant that runs the pipeline
//! independently on each zone of a segment partition.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::geodesics::{insert_points, PointProfile};
use crate::io::{points_by_zone, Histogram};
use crate::kselect::{select_k_from_profiles, volumes_at, KPolicy, KSelection};
use crate::mixture::{classify, em_fit, Classification, EmOptions, Label};
use crate::network::{extract_subnetwork, LinearNetwork, NetPoint};

pub const DEFAULT_HIST_BINS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineOptions {
    pub policy: KPolicy,
    pub em: EmOptions,
    /// Replace zero volumes (co-located points) by this value instead of failing.
    pub volume_floor: Option<f64>,
    /// Keep going when a mixture component collapses.
    pub allow_degenerate: bool,
    /// Wall-clock budget in seconds for a single pipeline run.
    pub time_budget: Option<f64>,
    /// K values for which volume histograms are produced.
    pub hist_ks: Vec<usize>,
    pub hist_bins: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            policy: KPolicy::Auto { k_max: crate::kselect::DEFAULT_K_MAX },
            em: EmOptions::default(),
            volume_floor: None,
            allow_degenerate: false,
            time_budget: None,
            hist_ks: Vec::new(),
            hist_bins: DEFAULT_HIST_BINS,
        }
    }
}

impl PipelineOptions {
    pub fn validate(&self) -> Result<()> {
        self.policy.validate()?;
        if let Some(f) = self.volume_floor {
            if !(f > 0.0 && f.is_finite()) {
                return Err(validation(format!("volume floor must be positive, got {f}")));
            }
        }
        if let Some(t) = self.time_budget {
            if !(t > 0.0) {
                return Err(validation(format!("time budget must be positive, got {t}")));
            }
        }
        if self.hist_ks.contains(&0) {
            return Err(validation("histogram K values start at 1"));
        }
        if !(self.em.tol > 0.0) || self.em.max_iter == 0 {
            return Err(validation("EM tolerance must be positive and max_iter at least 1"));
        }
        Ok(())
    }

    /// Smallest pattern size the pipeline accepts.
    pub fn min_points(&self) -> usize {
        self.policy.k_needed() + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    pub selection: KSelection,
    /// d_K for each point at the chosen K.
    pub distances: Vec<f64>,
    /// s_K for each point at the chosen K (after any floor).
    pub volumes: Vec<f64>,
    pub classification: Classification,
    pub histograms: Vec<Histogram>,
}

impl PipelineResult {
    pub fn k(&self) -> usize {
        self.selection.k
    }
}

/// Steps after the distance pass, shared with the simulation code.
pub(crate) fn classify_profiles(
    profiles: &[PointProfile],
    policy: KPolicy,
    em: EmOptions,
    volume_floor: Option<f64>,
    allow_degenerate: bool,
) -> Result<(KSelection, Vec<f64>, Classification)> {
    let selection = select_k_from_profiles(profiles, policy, em, volume_floor)?;
    let k = selection.k;
    let volumes = volumes_at(profiles, k, volume_floor)?;
    let fit = em_fit(&volumes, k, None, em)?;
    if fit.degenerate && !allow_degenerate {
        return Err(Error::Degenerate(format!("a mixture component collapsed at K = {k}")));
    }
    let classification = classify(&fit, &volumes)?;
    Ok((selection, volumes, classification))
}

/// Run the whole pipeline on a point pattern.
pub fn run_pipeline(net: &LinearNetwork, pts: &[NetPoint], opts: &PipelineOptions) -> Result<PipelineResult> {
    opts.validate()?;
    let start = Instant::now();
    if pts.len() < opts.min_points() {
        return Err(Error::InsufficientPoints { have: pts.len(), need: opts.min_points() });
    }
    let k_profile = opts.hist_ks.iter().copied().chain([opts.policy.k_needed()]).max().unwrap_or(1);
    if pts.len() <= k_profile {
        return Err(Error::InsufficientPoints { have: pts.len(), need: k_profile + 1 });
    }
    let graph = insert_points(net, pts)?;
    let deadline = opts.time_budget.map(|b| (start, b));
    let profiles = graph.profiles(k_profile, deadline)?;
    log::debug!("distance pass for {} points done in {:.2?}", pts.len(), start.elapsed());

    let (selection, volumes, classification) =
        classify_profiles(&profiles, opts.policy, opts.em, opts.volume_floor, opts.allow_degenerate)?;
    if let Some(b) = opts.time_budget {
        if start.elapsed().as_secs_f64() > b {
            return Err(Error::TimeBudget(b));
        }
    }
    let distances = profiles.iter().map(|p| p.distance(selection.k)).collect();
    let histograms = opts
        .hist_ks
        .iter()
        .map(|&k| Ok(Histogram::new(k, &volumes_at(&profiles, k, opts.volume_floor)?, opts.hist_bins)))
        .collect::<Result<_>>()?;
    Ok(PipelineResult { selection, distances, volumes, classification, histograms })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZoneStatus {
    Ok,
    Skipped,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneReport {
    pub zone: String,
    pub status: ZoneStatus,
    pub message: Option<String>,
    pub n_segments: usize,
    pub length: f64,
    pub n_points: usize,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub p: Option<f64>,
    pub n_feature: Option<usize>,
    /// Error exit code of a failed zone.
    #[serde(skip)]
    pub exit_code: Option<i32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoneOutcome {
    pub report: ZoneReport,
    /// Indices into the full pattern of the points in this zone.
    pub point_indices: Vec<usize>,
    pub result: Option<PipelineResult>,
}

/// Union of per-zone results. Points in skipped or failed zones carry `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedResult {
    pub zones: Vec<ZoneOutcome>,
    pub labels: Vec<Option<Label>>,
    pub delta: Vec<Option<f64>>,
    pub volumes: Vec<Option<f64>>,
    pub k: Vec<Option<usize>>,
}

impl PartitionedResult {
    pub fn failed(&self) -> impl Iterator<Item = &ZoneReport> {
        self.zones.iter().map(|z| &z.report).filter(|r| r.status == ZoneStatus::Failed)
    }

    pub fn skipped(&self) -> impl Iterator<Item = &ZoneReport> {
        self.zones.iter().map(|z| &z.report).filter(|r| r.status == ZoneStatus::Skipped)
    }
}

/// Classify each zone independently on its induced network. `zone_of_segment`
/// assigns every segment of `net` to exactly one zone, so a point belongs to
/// the zone of the segment it lies on. Zones with too few points are skipped;
/// zone errors are recorded in the zone report rather than returned.
pub fn classify_partitioned(
    net: &LinearNetwork,
    pts: &[NetPoint],
    zone_of_segment: &[String],
    opts: &PipelineOptions,
) -> Result<PartitionedResult> {
    opts.validate()?;
    if zone_of_segment.len() != net.segments().len() {
        return Err(validation(format!(
            "partition covers {} segments, network has {}",
            zone_of_segment.len(),
            net.segments().len()
        )));
    }
    for p in pts {
        p.validate(net)?;
    }
    let mut segments_by_zone: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
    for (s, z) in zone_of_segment.iter().enumerate() {
        segments_by_zone.entry(z.as_str()).or_default().insert(s);
    }
    let points = points_by_zone(pts, zone_of_segment);
    let jobs: Vec<(&str, &BTreeSet<usize>, &Vec<usize>)> =
        segments_by_zone.iter().map(|(z, segs)| (*z, segs, &points[*z])).collect();

    let zones: Vec<ZoneOutcome> =
        jobs.into_par_iter().map(|(zone, segs, idx)| run_zone(net, pts, zone, segs, idx, opts)).collect();

    let n = pts.len();
    let mut out = PartitionedResult {
        zones: Vec::new(),
        labels: vec![None; n],
        delta: vec![None; n],
        volumes: vec![None; n],
        k: vec![None; n],
    };
    for z in &zones {
        if let Some(r) = &z.result {
            for (local, &global) in z.point_indices.iter().enumerate() {
                out.labels[global] = Some(r.classification.labels[local]);
                out.delta[global] = Some(r.classification.fit.delta[local]);
                out.volumes[global] = Some(r.volumes[local]);
                out.k[global] = Some(r.k());
            }
        }
    }
    out.zones = zones;
    Ok(out)
}

fn run_zone(
    net: &LinearNetwork,
    pts: &[NetPoint],
    zone: &str,
    segs: &BTreeSet<usize>,
    idx: &[usize],
    opts: &PipelineOptions,
) -> ZoneOutcome {
    let sub = extract_subnetwork(net, segs, false);
    let mut report = ZoneReport {
        zone: zone.to_string(),
        status: ZoneStatus::Ok,
        message: None,
        n_segments: segs.len(),
        length: sub.as_ref().map(|s| s.total_length()).unwrap_or(0.0),
        n_points: idx.len(),
        k: None,
        lambda1: None,
        lambda2: None,
        p: None,
        n_feature: None,
        exit_code: None,
    };
    if idx.len() < opts.min_points() {
        report.status = ZoneStatus::Skipped;
        report.message = Some(format!("{} points, at least {} needed", idx.len(), opts.min_points()));
        return ZoneOutcome { report, point_indices: idx.to_vec(), result: None };
    }
    let attempt = sub.and_then(|s| s.to_network()).and_then(|(local, map)| {
        let mut to_local = vec![usize::MAX; net.segments().len()];
        for (l, &g) in map.iter().enumerate() {
            to_local[g] = l;
        }
        let local_pts: Vec<NetPoint> =
            idx.iter().map(|&i| NetPoint::new(to_local[pts[i].segment], pts[i].offset)).collect();
        run_pipeline(&local, &local_pts, opts)
    });
    match attempt {
        Ok(r) => {
            let fit = &r.classification.fit;
            report.k = Some(r.k());
            report.lambda1 = Some(fit.lambda1);
            report.lambda2 = Some(fit.lambda2);
            report.p = Some(fit.p);
            report.n_feature = Some(r.classification.n_features());
            ZoneOutcome { report, point_indices: idx.to_vec(), result: Some(r) }
        }
        Err(e) => {
            log::warn!("zone {zone} failed: {e}");
            report.status = ZoneStatus::Failed;
            report.message = Some(e.to_string());
            report.exit_code = Some(e.exit_code());
            ZoneOutcome { report, point_indices: idx.to_vec(), result: None }
        }
    }
}
