//! TOML ensemble configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bath::{SpectralModel, Statistics};
use crate::error::{Error, Result};
use crate::fock::MAX_FOCK_SITES;
use crate::hamiltonians::Boundary;
use crate::CONFIG_SCHEMA_VERSION;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Gue,
    Anderson3d,
    Chain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingMode {
    /// Exchange coupling with identical weights; Redfield and Davies agree.
    LinearUniform,
    /// Exchange coupling with explicit per-site weights.
    LinearPattern,
    /// `a_j† a_j` coupling, single-particle sector.
    Dephasing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub kind: FamilyKind,
    /// Hopping scale `J`.
    pub j: f64,
    /// Anderson on-site disorder `W`; required for `anderson3d` only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disorder: Option<f64>,
    #[serde(default)]
    pub boundary: Boundary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathConfig {
    pub statistics: Statistics,
    pub beta: f64,
    pub mu: f64,
    /// Ohmic cutoff `ω_c`.
    pub cutoff: f64,
    /// System-bath coupling `J_int`.
    pub coupling: f64,
    /// Keep the principal-value (Lamb-shift) part of the spectra.
    #[serde(default)]
    pub eta: bool,
}

impl BathConfig {
    pub fn model(&self) -> Result<SpectralModel> {
        Ok(
            SpectralModel::ohmic(self.statistics, self.beta, self.mu, self.cutoff, self.coupling)?
                .with_eta(self.eta),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub mode: CouplingMode,
    /// Site weights for `linear_pattern`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_max: f64,
    pub n_points: usize,
    /// RK4 step; defaults to the generator-derived step rounded down to
    /// divide the grid spacing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

impl TimeConfig {
    pub fn grid(&self) -> Vec<f64> {
        crate::dynamics::uniform_grid(self.t_max, self.n_points)
    }

    pub fn spacing(&self) -> f64 {
        self.t_max / (self.n_points - 1) as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    /// One particle on this site (1-based) above the vacuum.
    pub site: usize,
}

impl Default for InitialState {
    fn default() -> Self {
        Self { site: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub seed: u64,
    /// `N` for `gue`/`chain`, side length `L` for `anderson3d`.
    pub sizes: Vec<usize>,
    pub samples: usize,
    pub family: FamilyConfig,
    pub bath: BathConfig,
    pub coupling: CouplingConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub initial: InitialState,
}

impl EnsembleConfig {
    /// Parses and validates; every validation failure is reported.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(vec![e.to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msgs) => Error::Config(
                msgs.into_iter()
                    .map(|m| format!("{}: {m}", path.display()))
                    .collect(),
            ),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(vec![e.to_string()]))
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Number of lattice sites for a configured size.
    pub fn n_sites(&self, size: usize) -> usize {
        match self.family.kind {
            FamilyKind::Anderson3d => size.pow(3),
            FamilyKind::Gue | FamilyKind::Chain => size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            errs.push(format!(
                "schema_version {} is not supported (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.sizes.is_empty() {
            errs.push("sizes must not be empty".into());
        }
        if self.sizes.iter().any(|&s| s == 0) {
            errs.push("sizes must be positive".into());
        }
        let mut sorted = self.sizes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.sizes.len() {
            errs.push("sizes must be distinct".into());
        }
        if self.samples == 0 {
            errs.push("samples must be at least 1".into());
        }

        let f = &self.family;
        if !f.j.is_finite() {
            errs.push("family.j must be finite".into());
        }
        match (f.kind, f.disorder) {
            (FamilyKind::Anderson3d, None) => errs.push("family.disorder is required for anderson3d".into()),
            (FamilyKind::Anderson3d, Some(w)) if !(w.is_finite() && w >= 0.0) => {
                errs.push(format!("family.disorder must be finite and non-negative, got {w}"))
            }
            (FamilyKind::Gue | FamilyKind::Chain, Some(_)) => {
                errs.push("family.disorder only applies to anderson3d".into())
            }
            _ => {}
        }

        if let Err(e) = self.bath.model() {
            errs.push(format!("bath: {e}"));
        }

        let linear = self.coupling.mode != CouplingMode::Dephasing;
        match (self.coupling.mode, &self.coupling.weights) {
            (CouplingMode::LinearPattern, None) => {
                errs.push("coupling.weights is required for linear_pattern".into())
            }
            (CouplingMode::LinearPattern, Some(w)) => {
                if w.iter().any(|x| !x.is_finite()) {
                    errs.push("coupling.weights must be finite".into());
                }
                for &s in &self.sizes {
                    if self.n_sites(s) != w.len() {
                        errs.push(format!(
                            "coupling.weights has {} entries but size {s} has {} sites",
                            w.len(),
                            self.n_sites(s)
                        ));
                    }
                }
            }
            (_, Some(_)) => errs.push("coupling.weights only applies to linear_pattern".into()),
            _ => {}
        }
        if linear {
            for &s in &self.sizes {
                if self.n_sites(s) > MAX_FOCK_SITES {
                    errs.push(format!(
                        "size {s} has {} sites; exchange coupling is simulated on the Fock space, limited to {MAX_FOCK_SITES}",
                        self.n_sites(s)
                    ));
                }
            }
        } else if self.bath.mu != 0.0 {
            errs.push("dephasing coupling requires bath.mu = 0".into());
        }

        let t = &self.time;
        if !(t.t_max > 0.0 && t.t_max.is_finite()) {
            errs.push(format!("time.t_max must be positive, got {}", t.t_max));
        }
        if t.n_points < 2 {
            errs.push("time.n_points must be at least 2".into());
        }
        if let Some(h) = t.step {
            if !(h > 0.0 && h.is_finite()) {
                errs.push(format!("time.step must be positive, got {h}"));
            } else if t.n_points >= 2 && t.t_max > 0.0 {
                let dt = t.spacing();
                let k = (dt / h).round();
                if k < 1.0 || (k * h - dt).abs() > 1e-9 * dt.max(1.0) {
                    errs.push(format!("time.step {h} does not divide the grid spacing {dt}"));
                }
            }
        }

        if self.initial.site == 0 {
            errs.push("initial.site is 1-based".into());
        }
        for &s in &self.sizes {
            if self.initial.site > self.n_sites(s) {
                errs.push(format!(
                    "initial.site {} exceeds the {} sites of size {s}",
                    self.initial.site,
                    self.n_sites(s)
                ));
            }
        }

        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SAMPLE: &str = r#"
schema_version = 1
name = "test"
seed = 7
sizes = [4, 6]
samples = 3

[family]
kind = "gue"
j = 1.0

[bath]
statistics = "bosonic"
beta = 5.0
mu = 0.0
cutoff = 10.0
coupling = 0.2

[coupling]
mode = "dephasing"

[time]
t_max = 2.0
n_points = 5
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = EnsembleConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(cfg.initial.site, 1);
        assert_eq!(cfg.family.boundary, Boundary::Periodic);
        let again = EnsembleConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = SAMPLE.replace("samples = 3", "samples = 3\nsampels = 4");
        assert!(matches!(EnsembleConfig::from_toml_str(&bad), Err(Error::Config(_))));
        let bad = SAMPLE.replace("j = 1.0", "j = 1.0\nW = 3.0");
        assert!(EnsembleConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn validation_lists_every_failure() {
        let bad = SAMPLE
            .replace("sizes = [4, 6]", "sizes = []")
            .replace("samples = 3", "samples = 0")
            .replace("t_max = 2.0", "t_max = -1.0")
            .replace("mu = 0.0", "mu = 0.5");
        match EnsembleConfig::from_toml_str(&bad) {
            Err(Error::Config(errs)) => {
                assert!(errs.len() >= 4, "{errs:?}");
                assert!(errs.iter().any(|e| e.contains("sizes")));
                assert!(errs.iter().any(|e| e.contains("samples")));
                assert!(errs.iter().any(|e| e.contains("t_max")));
                assert!(errs.iter().any(|e| e.contains("mu")));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn family_specific_checks() {
        let bad = SAMPLE.replace("kind = \"gue\"", "kind = \"anderson3d\"");
        assert!(EnsembleConfig::from_toml_str(&bad).is_err());
        let ok = bad.replace("j = 1.0", "j = 1.0\ndisorder = 16.0").replace("[4, 6]", "[2, 3]");
        let cfg = EnsembleConfig::from_toml_str(&ok).unwrap();
        assert_eq!(cfg.n_sites(3), 27);
        let pattern = SAMPLE.replace("mode = \"dephasing\"", "mode = \"linear_pattern\"\nweights = [1.0, 1.0, 1.0, 1.0]");
        match EnsembleConfig::from_toml_str(&pattern) {
            Err(Error::Config(errs)) => assert!(errs.iter().any(|e| e.contains("size 6"))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn step_must_divide_spacing() {
        let bad = SAMPLE.replace("n_points = 5", "n_points = 5\nstep = 0.3");
        assert!(EnsembleConfig::from_toml_str(&bad).is_err());
        let ok = SAMPLE.replace("n_points = 5", "n_points = 5\nstep = 0.05");
        assert!(EnsembleConfig::from_toml_str(&ok).is_ok());
    }
}
