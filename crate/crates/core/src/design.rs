//! Simulation design files (TOML or JSON).
//!
//! ```toml
//! name = "chicago_d1"
//! reps = 100
//! seed = 1
//! k_policies = ["fixed:5", "fixed:10", "auto:35"]
//!
//! [network]
//! synthetic = "chicago"      # or: path = "streets.geojson"
//!
//! [[layers]]
//! name = "clutter"
//! region = "full"            # "full", a named region, or { segments = [..] }
//! rate = 0.032
//! role = "clutter"
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::io::read_raw_network;
use crate::kselect::KPolicy;
use crate::mixture::{EmOptions, Label};
use crate::network::{build_network, default_merge_tol, extract_subnetwork, LinearNetwork};
use crate::simulation::{Design, Layer};
use crate::synthetic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSource {
    /// Name of a bundled synthetic generator.
    #[serde(default)]
    pub synthetic: Option<String>,
    /// Network file, relative to the design file.
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Seed of the synthetic generator.
    #[serde(default = "one")]
    pub seed: u64,
    #[serde(default)]
    pub merge_tol: Option<f64>,
    /// Extra named regions as segment id lists.
    #[serde(default)]
    pub regions: BTreeMap<String, Vec<usize>>,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RegionSpec {
    Named(String),
    Segments { segments: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub name: String,
    pub region: RegionSpec,
    pub rate: f64,
    pub role: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignFile {
    pub name: String,
    pub reps: usize,
    pub seed: u64,
    pub k_policies: Vec<KPolicy>,
    pub network: NetworkSource,
    pub layers: Vec<LayerSpec>,
    #[serde(default)]
    pub em: EmOptions,
}

/// A network together with its named regions.
#[derive(Debug, Clone)]
pub struct LoadedNetwork {
    pub network: LinearNetwork,
    pub regions: BTreeMap<String, Vec<usize>>,
}

impl DesignFile {
    /// Parse by extension: `.json` as JSON, anything else as TOML.
    pub fn parse(text: &str, path: &Path) -> Result<DesignFile> {
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Ok(serde_json::from_str(text)?)
        } else {
            Ok(toml::from_str(text)?)
        }
    }

    pub fn from_path(path: &Path) -> Result<DesignFile> {
        DesignFile::parse(&std::fs::read_to_string(path)?, path)
    }

    /// Build the network. Relative paths resolve against `base_dir`.
    pub fn load_network(&self, base_dir: &Path) -> Result<LoadedNetwork> {
        let src = &self.network;
        let mut loaded = match (&src.synthetic, &src.path) {
            (Some(name), None) => {
                let s = synthetic::by_name(name, src.seed)?;
                LoadedNetwork { network: s.network, regions: s.regions }
            }
            (None, Some(p)) => {
                let raw = read_raw_network(&base_dir.join(p), None)?;
                let tol = src.merge_tol.unwrap_or_else(|| default_merge_tol(&raw.segments));
                LoadedNetwork { network: build_network(&raw.segments, tol)?, regions: BTreeMap::new() }
            }
            _ => return Err(validation("network needs exactly one of `synthetic` or `path`")),
        };
        loaded.regions.extend(src.regions.clone());
        Ok(loaded)
    }

    /// Resolve layers against a loaded network.
    pub fn design<'a>(&self, loaded: &'a LoadedNetwork) -> Result<Design<'a>> {
        let net = &loaded.network;
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let region = match &l.region {
                    RegionSpec::Named(n) if n == "full" => net.full(),
                    RegionSpec::Named(n) => {
                        let ids = loaded.regions.get(n).ok_or_else(|| {
                            validation(format!(
                                "unknown region {n:?}; known: full, {}",
                                loaded.regions.keys().cloned().collect::<Vec<_>>().join(", ")
                            ))
                        })?;
                        extract_subnetwork(net, &ids.iter().copied().collect::<BTreeSet<_>>(), false)?
                    }
                    RegionSpec::Segments { segments } => {
                        extract_subnetwork(net, &segments.iter().copied().collect::<BTreeSet<_>>(), false)?
                    }
                };
                Ok(Layer { name: l.name.clone(), region, rate: l.rate, role: l.role })
            })
            .collect::<Result<_>>()?;
        let design = Design {
            name: self.name.clone(),
            network: net,
            layers,
            reps: self.reps,
            policies: self.k_policies.clone(),
            seed: self.seed,
            em: self.em,
        };
        design.validate()?;
        Ok(design)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DESIGN: &str = r#"
name = "t"
reps = 2
seed = 9
k_policies = ["fixed:5", "auto:20"]

[network]
synthetic = "chicago"

[[layers]]
name = "clutter"
region = "full"
rate = 0.013
role = "clutter"

[[layers]]
name = "feature"
region = "feature"
rate = 0.067
role = "feature"

[[layers]]
name = "extra"
region = { segments = [0, 1] }
rate = 0.01
role = "clutter"
"#;

    #[test]
    fn toml_design_resolves() {
        let d = DesignFile::parse(DESIGN, Path::new("x.toml")).unwrap();
        assert_eq!(d.k_policies, vec![KPolicy::Fixed(5), KPolicy::Auto { k_max: 20 }]);
        let net = d.load_network(Path::new(".")).unwrap();
        let design = d.design(&net).unwrap();
        assert_eq!(design.layers.len(), 3);
        assert_eq!(design.layers[2].region.segment_ids(), &[0, 1]);
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(DesignFile::parse(&json, Path::new("x.json")).unwrap(), d);
    }

    #[test]
    fn unknown_region_is_rejected() {
        let text = DESIGN.replace("region = \"feature\"", "region = \"nowhere\"");
        let d = DesignFile::parse(&text, Path::new("x.toml")).unwrap();
        let net = d.load_network(Path::new(".")).unwrap();
        assert!(d.design(&net).unwrap_err().to_string().contains("nowhere"));
    }
}
