//! Poisson patterns on networks, superposition designs and classification
//! rates over replicates.

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::geodesics::insert_points;
use crate::kselect::KPolicy;
use crate::mixture::{EmOptions, Label};
use crate::network::{LinearNetwork, NetPoint, SubNetwork};
use crate::pipeline::classify_profiles;

/// Largest expected count `rpoislpp` agrees to simulate.
pub const MAX_EXPECTED_POINTS: f64 = 1e8;

/// Homogeneous Poisson pattern of rate `lambda` on a (sub-)network.
pub fn rpoislpp<R: Rng + ?Sized>(region: &SubNetwork<'_>, lambda: f64, rng: &mut R) -> Result<Vec<NetPoint>> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("intensity must be > 0, got {lambda}")));
    }
    let mean = lambda * region.total_length();
    if mean > MAX_EXPECTED_POINTS {
        return Err(Error::Domain(format!("expected count {mean:.3e} exceeds {MAX_EXPECTED_POINTS:.0e}")));
    }
    if mean <= 0.0 {
        return Ok(Vec::new());
    }
    let n = Poisson::new(mean).map_err(|e| Error::Domain(e.to_string()))?.sample(rng) as usize;
    if n == 0 {
        return Ok(Vec::new());
    }
    let net = region.parent();
    let ids = region.segment_ids();
    let pick =
        WeightedIndex::new(ids.iter().map(|&i| net.segments()[i].length)).map_err(|e| Error::Domain(e.to_string()))?;
    Ok((0..n)
        .map(|_| {
            let sid = ids[pick.sample(rng)];
            let len = net.segments()[sid].length;
            NetPoint::new(sid, rng.random::<f64>() * len)
        })
        .collect())
}

/// Points with their ground-truth labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelledPattern {
    pub points: Vec<NetPoint>,
    pub truth: Vec<Label>,
}

impl LabelledPattern {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Concatenate simulated layers, labelling each point by its layer's role.
pub fn superpose(layers: impl IntoIterator<Item = (Vec<NetPoint>, Label)>) -> LabelledPattern {
    let mut out = LabelledPattern { points: Vec::new(), truth: Vec::new() };
    for (pts, role) in layers {
        out.truth.extend(std::iter::repeat_n(role, pts.len()));
        out.points.extend(pts);
    }
    out
}

/// One homogeneous Poisson layer of a design.
#[derive(Debug, Clone)]
pub struct Layer<'a> {
    pub name: String,
    pub region: SubNetwork<'a>,
    pub rate: f64,
    pub role: Label,
}

pub fn simulate_layers<R: Rng + ?Sized>(layers: &[Layer<'_>], rng: &mut R) -> Result<LabelledPattern> {
    let mut parts = Vec::with_capacity(layers.len());
    for layer in layers {
        parts.push((rpoislpp(&layer.region, layer.rate, rng)?, layer.role));
    }
    Ok(superpose(parts))
}

/// Confusion counts and rates, with feature as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    /// `None` when there are no true features.
    pub tpr: Option<f64>,
    /// `None` when there is no true clutter.
    pub fpr: Option<f64>,
    pub acc: f64,
}

pub fn confusion(truth: &[Label], predicted: &[Label]) -> Result<Rates> {
    if truth.len() != predicted.len() {
        return Err(validation(format!("{} truth labels but {} predictions", truth.len(), predicted.len())));
    }
    if truth.is_empty() {
        return Err(validation("confusion needs at least one point"));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (t, p) in truth.iter().zip(predicted) {
        match (t.is_feature(), p.is_feature()) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
            (true, false) => fn_ += 1,
        }
    }
    let ratio = |a: usize, b: usize| (a + b > 0).then(|| a as f64 / (a + b) as f64);
    Ok(Rates { tp, fp, tn, fn_, tpr: ratio(tp, fn_), fpr: ratio(fp, tn), acc: (tp + tn) as f64 / truth.len() as f64 })
}

/// A fully resolved simulation design.
#[derive(Debug, Clone)]
pub struct Design<'a> {
    pub name: String,
    pub network: &'a LinearNetwork,
    pub layers: Vec<Layer<'a>>,
    pub reps: usize,
    pub policies: Vec<KPolicy>,
    pub seed: u64,
    pub em: EmOptions,
}

impl Design<'_> {
    pub fn validate(&self) -> Result<()> {
        if !self.layers.iter().any(|l| l.role == Label::Clutter)
            || !self.layers.iter().any(|l| l.role == Label::Feature)
        {
            return Err(validation("a design needs at least one clutter and one feature layer"));
        }
        for l in &self.layers {
            if !std::ptr::eq(l.region.parent(), self.network) {
                return Err(validation(format!("layer {} lives on another network", l.name)));
            }
            if !(l.rate > 0.0) || !(l.rate * l.region.total_length()).is_finite() {
                return Err(validation(format!("layer {} has invalid rate {}", l.name, l.rate)));
            }
        }
        if self.reps == 0 {
            return Err(validation("reps must be at least 1"));
        }
        if self.policies.is_empty() {
            return Err(validation("at least one K policy is required"));
        }
        for p in &self.policies {
            p.validate()?;
        }
        Ok(())
    }
}

/// Deterministic per-replicate generator: one ChaCha stream per rep.
pub fn rep_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyOutcome {
    pub k: usize,
    pub rates: Rates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepOutcome {
    pub rep: usize,
    pub n: usize,
    pub layer_counts: Vec<usize>,
    /// One entry per policy; `Err` carries the failure reason.
    pub outcomes: Vec<std::result::Result<PolicyOutcome, String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSummary {
    pub name: String,
    pub role: Label,
    pub rate: f64,
    pub region_length: f64,
    pub expected: f64,
    pub realized_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: KPolicy,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub acc: Option<f64>,
    pub succeeded: usize,
    pub failed: usize,
    pub k_bar: Option<f64>,
    pub k_sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatesReport {
    pub design: String,
    pub reps: usize,
    pub seed: u64,
    pub layers: Vec<LayerSummary>,
    pub policies: Vec<PolicySummary>,
    pub per_rep: Vec<RepOutcome>,
}

fn classify_rep(
    pattern: &LabelledPattern,
    network: &LinearNetwork,
    policies: &[KPolicy],
    em: EmOptions,
) -> Vec<std::result::Result<PolicyOutcome, String>> {
    let k_needed = policies.iter().map(KPolicy::k_needed).max().unwrap_or(1);
    if pattern.len() < k_needed + 1 {
        let e = Error::InsufficientPoints { have: pattern.len(), need: k_needed + 1 }.to_string();
        return policies.iter().map(|_| Err(e.clone())).collect();
    }
    let profiles = match insert_points(network, &pattern.points).and_then(|g| g.profiles(k_needed, None)) {
        Ok(p) => p,
        Err(e) => return policies.iter().map(|_| Err(e.to_string())).collect(),
    };
    policies
        .iter()
        .map(|&policy| {
            let (sel, _, cls) = classify_profiles(&profiles, policy, em, None, false).map_err(|e| e.to_string())?;
            let rates = confusion(&pattern.truth, &cls.labels).map_err(|e| e.to_string())?;
            Ok(PolicyOutcome { k: sel.k, rates })
        })
        .collect()
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn sample_sd(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    (xs.len() > 1).then(|| (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt())
}

/// Simulate `reps` replicates, classify each under every K policy and average
/// the rates. Failed replicates are counted and left out of the averages.
pub fn run_design(design: &Design<'_>) -> Result<RatesReport> {
    design.validate()?;
    let per_rep: Vec<RepOutcome> = (0..design.reps)
        .into_par_iter()
        .map(|rep| -> Result<RepOutcome> {
            let mut rng = rep_rng(design.seed, rep);
            let mut parts = Vec::with_capacity(design.layers.len());
            for layer in &design.layers {
                parts.push((rpoislpp(&layer.region, layer.rate, &mut rng)?, layer.role));
            }
            let layer_counts = parts.iter().map(|(p, _)| p.len()).collect();
            let pattern = superpose(parts);
            let outcomes = classify_rep(&pattern, design.network, &design.policies, design.em);
            Ok(RepOutcome { rep, n: pattern.len(), layer_counts, outcomes })
        })
        .collect::<Result<_>>()?;

    let layers = design
        .layers
        .iter()
        .enumerate()
        .map(|(li, l)| {
            let len = l.region.total_length();
            let counts: Vec<f64> = per_rep.iter().map(|r| r.layer_counts[li] as f64).collect();
            LayerSummary {
                name: l.name.clone(),
                role: l.role,
                rate: l.rate,
                region_length: len,
                expected: l.rate * len,
                realized_mean: mean(&counts).unwrap_or(0.0),
            }
        })
        .collect();

    let policies = design
        .policies
        .iter()
        .enumerate()
        .map(|(pi, &policy)| {
            let ok: Vec<&PolicyOutcome> = per_rep.iter().filter_map(|r| r.outcomes[pi].as_ref().ok()).collect();
            let tprs: Vec<f64> = ok.iter().filter_map(|o| o.rates.tpr).collect();
            let fprs: Vec<f64> = ok.iter().filter_map(|o| o.rates.fpr).collect();
            let accs: Vec<f64> = ok.iter().map(|o| o.rates.acc).collect();
            let ks: Vec<f64> = ok.iter().map(|o| o.k as f64).collect();
            let auto = matches!(policy, KPolicy::Auto { .. });
            let failed = per_rep.len() - ok.len();
            if failed > 0 {
                log::warn!("design {}: {failed} of {} reps failed under {policy}", design.name, per_rep.len());
            }
            PolicySummary {
                policy,
                tpr: mean(&tprs),
                fpr: mean(&fprs),
                acc: mean(&accs),
                succeeded: ok.len(),
                failed,
                k_bar: if auto { mean(&ks) } else { None },
                k_sd: if auto { sample_sd(&ks) } else { None },
            }
        })
        .collect();

    Ok(RatesReport { design: design.name.clone(), reps: design.reps, seed: design.seed, layers, policies, per_rep })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::build_network;

    #[test]
    fn confusion_examples() {
        use Label::{Clutter as C, Feature as F};
        let truth = [F, F, C, C];
        let r = confusion(&truth, &truth).unwrap();
        assert_eq!((r.tpr, r.fpr, r.acc), (Some(1.0), Some(0.0), 1.0));
        let r = confusion(&truth, &[C, C, F, F]).unwrap();
        assert_eq!((r.tpr, r.fpr, r.acc), (Some(0.0), Some(1.0), 0.0));

        let truth = [F, F, F, F, C, C, C, C, C, C];
        let pred = [F, F, F, C, F, F, C, C, C, C];
        let r = confusion(&truth, &pred).unwrap();
        assert_eq!((r.tp, r.fn_, r.fp, r.tn), (3, 1, 2, 4));
        assert_eq!(r.tpr, Some(0.75));
        assert!((r.fpr.unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.acc - 0.7).abs() < 1e-15);

        let r = confusion(&[C, C], &[C, F]).unwrap();
        assert_eq!(r.tpr, None);
        assert!(confusion(&[C], &[]).is_err());
        assert!(confusion(&[], &[]).is_err());
    }

    #[test]
    fn clutter_only_superposition() {
        let p = superpose([(vec![NetPoint::new(0, 1.0); 3], Label::Clutter)]);
        assert!(p.truth.iter().all(|&l| l == Label::Clutter));
        assert_eq!(p.points.len(), 3);
    }

    #[test]
    fn tiny_rate_is_usually_empty() {
        let net = build_network(&[((0.0, 0.0), (1.0, 0.0))], 0.0).unwrap();
        let mut rng = rep_rng(1, 0);
        let empties = (0..100).filter(|_| rpoislpp(&net.full(), 1e-6, &mut rng).unwrap().is_empty()).count();
        assert!(empties >= 99);
    }

    #[test]
    fn resource_guard_and_bad_rate() {
        let net = build_network(&[((0.0, 0.0), (1e6, 0.0))], 0.0).unwrap();
        let mut rng = rep_rng(1, 0);
        assert!(rpoislpp(&net.full(), 1000.0, &mut rng).is_err());
        assert!(rpoislpp(&net.full(), 0.0, &mut rng).is_err());
    }

    #[test]
    fn subnetwork_points_stay_inside() {
        let raw: Vec<_> = (0..10).map(|i| ((i as f64, 0.0), (i as f64 + 1.0, 0.0))).collect();
        let net = build_network(&raw, 0.0).unwrap();
        let ids = [2usize, 3, 7].into_iter().collect();
        let sub = crate::network::extract_subnetwork(&net, &ids, false).unwrap();
        let mut rng = rep_rng(7, 3);
        let pts = rpoislpp(&sub, 50.0, &mut rng).unwrap();
        assert!(!pts.is_empty());
        assert!(pts.iter().all(|p| sub.contains(p.segment) && p.validate(&net).is_ok()));
    }
}
