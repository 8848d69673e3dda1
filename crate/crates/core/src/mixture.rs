//! Gamma law of nearest-neighbour volumes and the two-component mixture EM.
//!
//! Under a homogeneous Poisson process of rate `lambda` the K-th
//! nearest-neighbour volume is approximately `Gamma(K, lambda)` with known
//! integer shape, so only rates and the mixing weight are estimated.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};

/// `ln Γ(k)` for a positive integer shape, i.e. `ln (k-1)!`.
pub fn ln_gamma_int(k: usize) -> f64 {
    (2..k).map(|i| (i as f64).ln()).sum()
}

/// Log-density of `Gamma(k, lambda)` at `x > 0`, without argument checks.
#[inline]
pub fn ln_gamma_pdf_unchecked(x: f64, k: usize, lambda: f64, ln_gamma_k: f64) -> f64 {
    let kf = k as f64;
    kf * lambda.ln() + (kf - 1.0) * x.ln() - lambda * x - ln_gamma_k
}

/// Density of the K-th nearest-neighbour volume, evaluated in log space.
pub fn gamma_pdf(x: f64, k: usize, lambda: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("gamma_pdf needs x > 0, got {x}")));
    }
    if k == 0 {
        return Err(Error::Domain("gamma_pdf needs K >= 1".into()));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("gamma_pdf needs lambda > 0, got {lambda}")));
    }
    Ok(ln_gamma_pdf_unchecked(x, k, lambda, ln_gamma_int(k)).exp())
}

fn check_volumes(volumes: &[f64]) -> Result<()> {
    if volumes.is_empty() {
        return Err(validation("no volumes given"));
    }
    if let Some((i, v)) = volumes.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
        return Err(validation(format!("volume {i} must be positive and finite, got {v}")));
    }
    Ok(())
}

/// Maximum-likelihood rate for a single Gamma component: `nK / sum(s)`.
pub fn mle_rate(volumes: &[f64], k: usize) -> Result<f64> {
    check_volumes(volumes)?;
    if k == 0 {
        return Err(Error::Domain("K must be at least 1".into()));
    }
    let sum: f64 = volumes.iter().sum();
    Ok(volumes.len() as f64 * k as f64 / sum)
}

/// Starting values for EM: rates and weight of the first component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmInit {
    pub lambda1: f64,
    pub lambda2: f64,
    pub p: f64,
}

impl EmInit {
    /// Median split: the lower half seeds component 1, the upper half
    /// component 2, equal weights.
    pub fn median_split(volumes: &[f64], k: usize) -> EmInit {
        let mut sorted = volumes.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (lo, hi) = sorted.split_at((sorted.len() / 2).max(1));
        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
        let kf = k as f64;
        EmInit { lambda1: kf / mean(lo), lambda2: kf / mean(hi), p: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmOptions {
    /// Stop when the mean per-observation log-likelihood changes by less than this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions { tol: 1e-8, max_iter: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureFit {
    pub k: usize,
    /// Rate of the feature component (the larger one).
    pub lambda1: f64,
    /// Rate of the clutter component.
    pub lambda2: f64,
    /// Weight of the feature component.
    pub p: f64,
    /// Posterior feature probabilities under the final parameters.
    pub delta: Vec<f64>,
    /// Observed-data log-likelihood at the initial and every updated parameter set.
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// A component lost (almost) all of its responsibility.
    pub degenerate: bool,
}

impl MixtureFit {
    pub fn loglik(&self) -> f64 {
        *self.loglik_trace.last().unwrap_or(&f64::NEG_INFINITY)
    }
}

/// Per-fit constants of the E-step. The shape term `(K-1) ln s` is common to
/// both components, so it only enters the log-likelihood as a constant.
struct EStep<'a> {
    volumes: &'a [f64],
    k: f64,
    shape_term: f64,
    ln_gamma_k: f64,
}

impl<'a> EStep<'a> {
    fn new(volumes: &'a [f64], k: usize) -> Self {
        let kf = k as f64;
        let shape_term = (kf - 1.0) * volumes.iter().map(|s| s.ln()).sum::<f64>();
        EStep { volumes, k: kf, shape_term, ln_gamma_k: ln_gamma_int(k) }
    }

    /// Posterior feature probabilities into `delta`; returns the observed
    /// log-likelihood.
    fn run(&self, l1: f64, l2: f64, p: f64, delta: &mut [f64]) -> f64 {
        let c1 = p.ln() + self.k * l1.ln();
        let c2 = (1.0 - p).ln() + self.k * l2.ln();
        let mut ll = 0.0;
        for (d, &s) in delta.iter_mut().zip(self.volumes) {
            let a = c1 - l1 * s;
            let b = c2 - l2 * s;
            let m = a.max(b);
            if m == f64::NEG_INFINITY {
                // both weights zero: keep the prior
                *d = p;
                continue;
            }
            let (wa, wb) = if a >= b { (1.0, (b - a).exp()) } else { ((a - b).exp(), 1.0) };
            *d = wa / (wa + wb);
            ll += m + (wa + wb).ln();
        }
        ll + self.shape_term - self.volumes.len() as f64 * self.ln_gamma_k
    }
}

/// Raw M-step update. Rates of a component without responsibility mass come
/// out as NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MStep {
    pub lambda1: f64,
    pub lambda2: f64,
    pub p: f64,
}

pub fn m_step(volumes: &[f64], k: usize, delta: &[f64]) -> MStep {
    let (mut sd, mut ssd, mut sq, mut ssq) = (0.0, 0.0, 0.0, 0.0);
    for (&d, &s) in delta.iter().zip(volumes) {
        sd += d;
        ssd += s * d;
        sq += 1.0 - d;
        ssq += s * (1.0 - d);
    }
    let kf = k as f64;
    MStep { lambda1: kf * sd / ssd, lambda2: kf * sq / ssq, p: sd / volumes.len() as f64 }
}

/// Observed-data log-likelihood of the two-component mixture.
pub fn mixture_loglik(volumes: &[f64], k: usize, lambda1: f64, lambda2: f64, p: f64) -> f64 {
    let mut scratch = vec![0.0; volumes.len()];
    EStep::new(volumes, k).run(lambda1, lambda2, p, &mut scratch)
}

/// Fit `p Γ(K, λ1) + (1-p) Γ(K, λ2)` by EM. Labels are swapped at the end so
/// that `lambda1 >= lambda2`.
pub fn em_fit(volumes: &[f64], k: usize, init: Option<EmInit>, opts: EmOptions) -> Result<MixtureFit> {
    check_volumes(volumes)?;
    if volumes.len() < 2 {
        return Err(Error::InsufficientPoints { have: volumes.len(), need: 2 });
    }
    if k == 0 {
        return Err(Error::Domain("K must be at least 1".into()));
    }
    let init = init.unwrap_or_else(|| EmInit::median_split(volumes, k));
    if !(init.lambda1 > 0.0 && init.lambda2 > 0.0) || !(init.p > 0.0 && init.p < 1.0) {
        return Err(validation(format!("invalid EM start {init:?}")));
    }

    let n = volumes.len() as f64;
    let estep = EStep::new(volumes, k);
    let (mut l1, mut l2, mut p) = (init.lambda1, init.lambda2, init.p);
    let mut delta = vec![0.0; volumes.len()];
    let mut trace = vec![estep.run(l1, l2, p, &mut delta)];
    let mut converged = false;
    let mut degenerate = false;
    let mut iterations = 0;
    // responsibility mass below this counts as a dead component
    let death = 1e-6;

    while iterations < opts.max_iter {
        let sd: f64 = delta.iter().sum();
        if sd < death || n - sd < death {
            degenerate = true;
            break;
        }
        let m = m_step(volumes, k, &delta);
        let valid = |l: f64| l.is_finite() && l > 0.0;
        if !(valid(m.lambda1) && valid(m.lambda2) && m.p > 0.0 && m.p < 1.0) {
            degenerate = true;
            break;
        }
        (l1, l2, p) = (m.lambda1, m.lambda2, m.p);
        iterations += 1;
        let ll = estep.run(l1, l2, p, &mut delta);
        let prev = *trace.last().unwrap();
        trace.push(ll);
        if ((ll - prev) / n).abs() < opts.tol {
            converged = true;
            break;
        }
    }

    if l1 < l2 {
        std::mem::swap(&mut l1, &mut l2);
        p = 1.0 - p;
        for d in &mut delta {
            *d = 1.0 - *d;
        }
    }
    Ok(MixtureFit { k, lambda1: l1, lambda2: l2, p, delta, loglik_trace: trace, iterations, converged, degenerate })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Feature,
    Clutter,
}

impl Label {
    pub fn is_feature(self) -> bool {
        self == Label::Feature
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Feature => "feature",
            Label::Clutter => "clutter",
        }
    }
}

impl std::str::FromStr for Label {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "feature" | "1" => Ok(Label::Feature),
            "clutter" | "0" => Ok(Label::Clutter),
            other => Err(validation(format!("unknown label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub labels: Vec<Label>,
    pub fit: MixtureFit,
    pub k: usize,
    /// Equal component rates: every point got the tie label.
    pub degenerate: bool,
}

impl Classification {
    pub fn n_features(&self) -> usize {
        self.labels.iter().filter(|l| l.is_feature()).count()
    }
}

/// Volume below which the feature density dominates, for `lambda1 > lambda2`.
pub fn density_crossing(k: usize, lambda1: f64, lambda2: f64) -> Option<f64> {
    (lambda1 != lambda2).then(|| k as f64 * (lambda1.ln() - lambda2.ln()) / (lambda1 - lambda2))
}

/// Label each volume by the mixture component with the higher density
/// (ties go to the feature).
pub fn classify(fit: &MixtureFit, volumes: &[f64]) -> Result<Classification> {
    check_volumes(volumes)?;
    let ln_gk = ln_gamma_int(fit.k);
    let labels = volumes
        .iter()
        .map(|&s| {
            let f1 = ln_gamma_pdf_unchecked(s, fit.k, fit.lambda1, ln_gk);
            let f2 = ln_gamma_pdf_unchecked(s, fit.k, fit.lambda2, ln_gk);
            if f1 >= f2 {
                Label::Feature
            } else {
                Label::Clutter
            }
        })
        .collect();
    Ok(Classification { labels, fit: fit.clone(), k: fit.k, degenerate: fit.degenerate || fit.lambda1 == fit.lambda2 })
}

/// Separation entropy `-sum(delta log2 delta)` with `0 log 0 = 0`.
pub fn entropy(delta: &[f64]) -> Result<f64> {
    let mut e = 0.0;
    for (i, &d) in delta.iter().enumerate() {
        if !(0.0..=1.0).contains(&d) {
            return Err(validation(format!("delta[{i}] = {d} outside [0, 1]")));
        }
        if d > 0.0 {
            e -= d * d.log2();
        }
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pdf_values() {
        // K=1, λ=1 near the origin tends to 1
        assert!((gamma_pdf(1e-12, 1, 1.0).unwrap() - 1.0).abs() < 1e-11);
        let v = gamma_pdf(2.0, 2, 0.5).unwrap();
        assert!((v - 0.5 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.18394).abs() < 1e-5);
        // large K stays finite
        assert!(gamma_pdf(1000.0, 500, 0.5).unwrap().is_finite());
    }

    #[test]
    fn pdf_domain_errors() {
        assert!(gamma_pdf(0.0, 1, 1.0).is_err());
        assert!(gamma_pdf(1.0, 0, 1.0).is_err());
        assert!(gamma_pdf(1.0, 1, -1.0).is_err());
    }

    #[test]
    fn mle_examples() {
        assert_eq!(mle_rate(&[4.0, 4.0, 4.0, 4.0], 2).unwrap(), 0.5);
        assert_eq!(mle_rate(&[10.0], 5).unwrap(), 0.5);
        assert!(mle_rate(&[1.0, 0.0], 5).is_err());
        assert!(mle_rate(&[], 5).is_err());
    }

    #[test]
    fn identical_components_keep_prior() {
        let v = [1.0, 2.0, 3.0, 7.0, 11.0];
        let fit = em_fit(&v, 3, Some(EmInit { lambda1: 0.7, lambda2: 0.7, p: 0.5 }), EmOptions::default()).unwrap();
        assert!(fit.delta.iter().all(|&d| d == 0.5));
        assert!(fit.converged);
        let c = classify(&fit, &v).unwrap();
        assert!(c.degenerate);
        assert!(c.labels.iter().all(|l| l.is_feature()));
    }

    #[test]
    fn crossing_threshold() {
        let s = density_crossing(1, 2.0, 1.0).unwrap();
        assert!((s - 2f64.ln()).abs() < 1e-15);
        let fit = MixtureFit {
            k: 1,
            lambda1: 2.0,
            lambda2: 1.0,
            p: 0.5,
            delta: vec![],
            loglik_trace: vec![],
            iterations: 0,
            converged: true,
            degenerate: false,
        };
        let c = classify(&fit, &[0.5, 1.0]).unwrap();
        assert_eq!(c.labels, vec![Label::Feature, Label::Clutter]);
    }

    #[test]
    fn entropy_values() {
        assert_eq!(entropy(&[0.0, 1.0, 1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(entropy(&[0.5]).unwrap(), 0.5);
        let e = entropy(&[0.25, 0.75]).unwrap();
        assert!((e - (0.5 + 0.75 * (4.0f64 / 3.0).log2())).abs() < 1e-15);
        assert!((e - 0.8113).abs() < 1e-4);
        assert!(entropy(&[1.5]).is_err());
        assert!(entropy(&[-0.1]).is_err());
    }

    #[test]
    fn m_step_with_all_features_is_single_rate_mle() {
        let v = [3.0, 5.0, 8.0, 13.0, 0.7];
        let m = m_step(&v, 4, &[1.0; 5]);
        assert_eq!(m.lambda1, mle_rate(&v, 4).unwrap());
        assert_eq!(m.p, 1.0);
        assert!(m.lambda2.is_nan());
    }

    #[test]
    fn degenerate_component_is_flagged() {
        // component 2 starts with a rate so extreme that it receives no mass
        let v = [1.0, 1.1, 0.9, 1.05];
        let fit = em_fit(&v, 5, Some(EmInit { lambda1: 5.0, lambda2: 1e-300, p: 0.5 }), EmOptions::default()).unwrap();
        assert!(fit.degenerate);
        assert!(!fit.converged);
    }

    #[test]
    fn label_parse() {
        assert_eq!("feature".parse::<Label>().unwrap(), Label::Feature);
        assert_eq!("0".parse::<Label>().unwrap(), Label::Clutter);
        assert!("x".parse::<Label>().is_err());
    }
}
