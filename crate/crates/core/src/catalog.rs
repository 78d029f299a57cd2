//! Semantic compression model catalog.
//!
//! Each profile stands in for a trained encoder/decoder pair and records what
//! the allocator needs to know about it: compute power draw, inference time,
//! a distortion proxy (lower is better) and the compressed payload size.
//!
//! The on-disk format is TOML with top-level unit scales and one
//! `[[profile]]` table per model. Profile order is significant: the i-th
//! table is SCM index `i` in every action encoding.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A semantic compression model with its measured resource/quality profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ScmProfile {
    pub name: String,
    /// Compute power draw in milliwatts, unit scale applied.
    pub compute_power: f64,
    /// Seconds of compute charged per transmission, unit scale applied.
    pub inference_time_per_image: f64,
    /// Dimensionless quality score; lower is better.
    pub distortion_proxy: f64,
    /// Compressed payload size in bits.
    pub payload_bits: f64,
}

impl ScmProfile {
    /// Compute power in watts.
    pub fn compute_power_watts(&self) -> f64 {
        self.compute_power * 1e-3
    }

    fn validate(&self) -> Result<()> {
        let fields = [
            ("compute_power", self.compute_power),
            ("inference_time_per_image", self.inference_time_per_image),
            ("distortion_proxy", self.distortion_proxy),
            ("payload_bits", self.payload_bits),
        ];
        for (field, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidProfile {
                    profile: self.name.clone(),
                    message: format!("{field} must be finite and > 0 (got {value})"),
                });
            }
        }
        Ok(())
    }
}

/// An ordered, validated set of SCM profiles. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ScmCatalog {
    profiles: Vec<ScmProfile>,
    power_unit_scale: f64,
    time_unit_scale: f64,
}

impl ScmCatalog {
    /// Builds a catalog from already-scaled profiles.
    pub fn new(
        profiles: Vec<ScmProfile>,
        power_unit_scale: f64,
        time_unit_scale: f64,
    ) -> Result<Self> {
        if profiles.is_empty() {
            return Err(Error::InvalidCatalog("catalog has no profiles".into()));
        }
        for (name, scale) in [
            ("power_unit_scale", power_unit_scale),
            ("time_unit_scale", time_unit_scale),
        ] {
            if !(scale.is_finite() && scale > 0.0) {
                return Err(Error::InvalidCatalog(format!(
                    "{name} must be finite and > 0 (got {scale})"
                )));
            }
        }
        let mut seen = HashSet::new();
        for profile in &profiles {
            if profile.name.trim().is_empty() {
                return Err(Error::InvalidCatalog("profile with empty name".into()));
            }
            if !seen.insert(profile.name.as_str()) {
                return Err(Error::InvalidProfile {
                    profile: profile.name.clone(),
                    message: "duplicate profile name".into(),
                });
            }
            profile.validate()?;
        }
        Ok(Self {
            profiles,
            power_unit_scale,
            time_unit_scale,
        })
    }

    pub fn profiles(&self) -> &[ScmProfile] {
        &self.profiles
    }

    pub fn get(&self, index: usize) -> Option<&ScmProfile> {
        self.profiles.get(index)
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.profiles.iter().position(|p| p.name == name)
    }

    pub fn power_unit_scale(&self) -> f64 {
        self.power_unit_scale
    }

    pub fn time_unit_scale(&self) -> f64 {
        self.time_unit_scale
    }

    /// Parses catalog TOML text. `origin` is only used in error messages.
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let file: CatalogFile = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        file.into_catalog()
    }

    /// Serializes the catalog in normalized form: unit scales of 1 and a
    /// batch size of 1, so every stored value reloads unchanged.
    pub fn to_toml_string(&self) -> String {
        let file = CatalogFile {
            power_unit_scale: 1.0,
            time_unit_scale: 1.0,
            profile: self
                .profiles
                .iter()
                .map(|p| RawProfile {
                    name: p.name.clone(),
                    compute_power: p.compute_power,
                    inference_time_raw: p.inference_time_per_image,
                    inference_batch: 1.0,
                    distortion_proxy: p.distortion_proxy,
                    payload_bits: p.payload_bits,
                })
                .collect(),
        };
        toml::to_string(&file).expect("catalog serialization is infallible")
    }
}

/// Loads and validates a catalog file.
pub fn load_catalog(path: impl AsRef<Path>) -> Result<ScmCatalog> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ScmCatalog::from_toml_str(&text, path)
}

/// Per-image inference time from a time measured over a whole batch.
pub fn per_image_inference_time(raw_batch_time: f64, batch_size: f64) -> Result<f64> {
    if !(raw_batch_time.is_finite() && raw_batch_time > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "raw batch time must be > 0 (got {raw_batch_time})"
        )));
    }
    if !(batch_size.is_finite() && batch_size > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "batch size must be > 0 (got {batch_size})"
        )));
    }
    Ok(raw_batch_time / batch_size)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    #[serde(default = "one")]
    power_unit_scale: f64,
    #[serde(default = "one")]
    time_unit_scale: f64,
    profile: Vec<RawProfile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    name: String,
    compute_power: f64,
    inference_time_raw: f64,
    inference_batch: f64,
    distortion_proxy: f64,
    payload_bits: f64,
}

fn one() -> f64 {
    1.0
}

impl CatalogFile {
    fn into_catalog(self) -> Result<ScmCatalog> {
        let mut profiles = Vec::with_capacity(self.profile.len());
        for raw in self.profile {
            let per_image = per_image_inference_time(raw.inference_time_raw, raw.inference_batch)
                .map_err(|e| Error::InvalidProfile {
                    profile: raw.name.clone(),
                    message: e.to_string(),
                })?;
            profiles.push(ScmProfile {
                compute_power: raw.compute_power * self.power_unit_scale,
                inference_time_per_image: per_image * self.time_unit_scale,
                distortion_proxy: raw.distortion_proxy,
                payload_bits: raw.payload_bits,
                name: raw.name,
            });
        }
        ScmCatalog::new(profiles, self.power_unit_scale, self.time_unit_scale)
    }
}
