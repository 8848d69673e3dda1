//! Choosing K from the entropy curve.
//!
//! The separation entropy is computed for K = 1..=k_max and a one-changepoint
//! segmented regression `E[Y|x] = beta + gamma (x - psi) 1{x < psi}` is fitted
//! by exhaustive search over `psi` on a 0.1 grid, with OLS for `(beta, gamma)`
//! at each candidate. K is the rounded changepoint.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::geodesics::{insert_points, PointProfile};
use crate::mixture::{em_fit, entropy, EmOptions};
use crate::network::{LinearNetwork, NetPoint};

pub const DEFAULT_K_MAX: usize = 35;
const PSI_STEPS_PER_UNIT: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyCurve {
    pub ks: Vec<usize>,
    pub entropies: Vec<f64>,
    /// K values left out because the fit failed or degenerated, with the reason.
    pub skipped: Vec<(usize, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentedFit {
    pub beta: f64,
    pub gamma: f64,
    pub psi: f64,
    pub rss: f64,
    pub k_hat: usize,
    /// All entropies were equal.
    pub flat: bool,
    /// The pre-changepoint slope is positive, so the curve does not level off
    /// from above.
    pub suspicious: bool,
}

/// Volumes at one K with an optional floor for zero volumes.
pub(crate) fn volumes_at(profiles: &[PointProfile], k: usize, floor: Option<f64>) -> Result<Vec<f64>> {
    profiles
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let v = p.volume(k).ok_or(Error::InsufficientNeighbours { point: i, k, found: p.knn.len() })?;
            match floor {
                Some(f) => Ok(v.max(f)),
                None if v > 0.0 => Ok(v),
                None => Err(Error::ZeroVolume { point: i, k }),
            }
        })
        .collect()
}

/// Entropy curve from precomputed neighbour profiles (which must cover `k_max`).
pub fn entropy_curve_from_profiles(
    profiles: &[PointProfile],
    k_max: usize,
    opts: EmOptions,
    volume_floor: Option<f64>,
) -> Result<EntropyCurve> {
    let mut curve = EntropyCurve { ks: Vec::new(), entropies: Vec::new(), skipped: Vec::new() };
    for k in 1..=k_max {
        let volumes = volumes_at(profiles, k, volume_floor)?;
        match em_fit(&volumes, k, None, opts) {
            Ok(fit) if !fit.degenerate => {
                curve.ks.push(k);
                curve.entropies.push(entropy(&fit.delta)?);
            }
            Ok(_) => curve.skipped.push((k, "degenerate mixture".into())),
            Err(e) => curve.skipped.push((k, e.to_string())),
        }
    }
    Ok(curve)
}

/// Entropy of the fitted mixture for each K = 1..=k_max.
pub fn entropy_curve(net: &LinearNetwork, pts: &[NetPoint], k_max: usize, opts: EmOptions) -> Result<EntropyCurve> {
    if k_max < 2 {
        return Err(Error::Domain(format!("k_max must be at least 2, got {k_max}")));
    }
    if pts.len() < k_max + 1 {
        return Err(Error::InsufficientPoints { have: pts.len(), need: k_max + 1 });
    }
    let g = insert_points(net, pts)?;
    let profiles = g.profiles(k_max, None)?;
    entropy_curve_from_profiles(&profiles, k_max, opts, None)
}

fn ols_at(xs: &[f64], ys: &[f64], psi: f64) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let z: Vec<f64> = xs.iter().map(|&x| if x < psi { x - psi } else { 0.0 }).collect();
    let zbar = z.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let (mut szz, mut szy) = (0.0, 0.0);
    for (&zi, &yi) in z.iter().zip(ys) {
        szz += (zi - zbar) * (zi - zbar);
        szy += (zi - zbar) * (yi - ybar);
    }
    let gamma = if szz > 0.0 { szy / szz } else { 0.0 };
    let beta = ybar - gamma * zbar;
    let rss = z.iter().zip(ys).map(|(&zi, &yi)| (yi - beta - gamma * zi).powi(2)).sum();
    (beta, gamma, rss)
}

/// Fit the levelling-off model. Ties in RSS go to the smallest changepoint.
pub fn fit_segmented(curve: &EntropyCurve) -> Result<SegmentedFit> {
    if curve.ks.len() != curve.entropies.len() {
        return Err(validation("entropy curve columns differ in length"));
    }
    if curve.ks.len() < 4 {
        return Err(Error::InsufficientPoints { have: curve.ks.len(), need: 4 });
    }
    if curve.ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(validation("entropy curve K values must be strictly increasing"));
    }
    let xs: Vec<f64> = curve.ks.iter().map(|&k| k as f64).collect();
    let ys = &curve.entropies;
    let (k_lo, k_hi) = (curve.ks[0], *curve.ks.last().unwrap());

    let (lo, hi) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    if hi - lo <= 1e-12 * hi.abs().max(1.0) {
        let (beta, _, rss) = ols_at(&xs, ys, k_lo as f64);
        return Ok(SegmentedFit {
            beta,
            gamma: 0.0,
            psi: k_lo as f64,
            rss,
            k_hat: k_lo,
            flat: true,
            suspicious: false,
        });
    }

    let steps = (k_hi - k_lo) * PSI_STEPS_PER_UNIT;
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for j in 0..=steps {
        let psi = (k_lo * PSI_STEPS_PER_UNIT + j) as f64 / PSI_STEPS_PER_UNIT as f64;
        let (beta, gamma, rss) = ols_at(&xs, ys, psi);
        if best.is_none_or(|b| rss < b.3) {
            best = Some((psi, beta, gamma, rss));
        }
    }
    let (psi, beta, gamma, rss) = best.unwrap();
    let k_hat = (psi.round() as usize).clamp(k_lo, k_hi);
    Ok(SegmentedFit { beta, gamma, psi, rss, k_hat, flat: false, suspicious: gamma > 0.0 })
}

/// How K is chosen for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum KPolicy {
    Fixed(usize),
    Auto { k_max: usize },
}

impl KPolicy {
    /// Largest K whose neighbour profile the policy needs.
    pub fn k_needed(&self) -> usize {
        match *self {
            KPolicy::Fixed(k) => k,
            KPolicy::Auto { k_max } => k_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KPolicy::Fixed(0) => Err(Error::Domain("K must be at least 1".into())),
            KPolicy::Auto { k_max } if k_max < 2 => Err(Error::Domain("k_max must be at least 2".into())),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for KPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KPolicy::Fixed(k) => write!(f, "fixed:{k}"),
            KPolicy::Auto { k_max } => write!(f, "auto:{k_max}"),
        }
    }
}

impl FromStr for KPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || validation(format!("bad K policy {s:?}; expected fixed:<K>, auto or auto:<k_max>"));
        if s == "auto" {
            return Ok(KPolicy::Auto { k_max: DEFAULT_K_MAX });
        }
        let (kind, val) = s.split_once(':').ok_or_else(bad)?;
        let val: usize = val.parse().map_err(|_| bad())?;
        let policy = match kind {
            "fixed" => KPolicy::Fixed(val),
            "auto" => KPolicy::Auto { k_max: val },
            _ => return Err(bad()),
        };
        policy.validate()?;
        Ok(policy)
    }
}

impl TryFrom<String> for KPolicy {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<KPolicy> for String {
    fn from(p: KPolicy) -> String {
        p.to_string()
    }
}

/// Outcome of K selection; curve and fit are present in auto mode only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub k: usize,
    pub curve: Option<EntropyCurve>,
    pub fit: Option<SegmentedFit>,
}

pub fn select_k_from_profiles(
    profiles: &[PointProfile],
    policy: KPolicy,
    opts: EmOptions,
    volume_floor: Option<f64>,
) -> Result<KSelection> {
    policy.validate()?;
    match policy {
        KPolicy::Fixed(k) => Ok(KSelection { k, curve: None, fit: None }),
        KPolicy::Auto { k_max } => {
            let curve = entropy_curve_from_profiles(profiles, k_max, opts, volume_floor)?;
            let fit = fit_segmented(&curve)?;
            Ok(KSelection { k: fit.k_hat, curve: Some(curve), fit: Some(fit) })
        }
    }
}

/// Choose K either verbatim or from the entropy changepoint.
pub fn select_k(net: &LinearNetwork, pts: &[NetPoint], policy: KPolicy, opts: EmOptions) -> Result<KSelection> {
    policy.validate()?;
    match policy {
        KPolicy::Fixed(k) => Ok(KSelection { k, curve: None, fit: None }),
        KPolicy::Auto { k_max } => {
            let curve = entropy_curve(net, pts, k_max, opts)?;
            let fit = fit_segmented(&curve)?;
            Ok(KSelection { k: fit.k_hat, curve: Some(curve), fit: Some(fit) })
        }
    }
}
