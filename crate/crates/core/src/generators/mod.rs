//! Master-equation generators in mode-pair coefficient form.
//!
//! Two sectors are supported:
//!
//! * **Mode occupation** (linear exchange coupling `a_j ⊗ b_j† + h.c.`):
//!   channel 1 carries jumps `c_m`, channel 2 jumps `c_m†`. The dissipator is
//!
//!   ```text
//!   Σ_mn K¹_mn (c_m ρ c_n† - c_n† c_m ρ) + K²_mn (c_m† ρ c_n - c_n c_m† ρ) + h.c.
//!   ```
//!
//!   and is expanded into the Hermitian "sandwich" matrices
//!   `R = K + K†` plus a one-body Lamb-shift matrix. Density matrices live on
//!   the fermionic Fock space in the site basis.
//!
//! * **Single particle** (dephasing coupling `a_j† a_j ⊗ B_j`): `N × N`
//!   density matrices on the span of `c_n†|0⟩`, propagated in the energy
//!   eigenbasis.

mod dephasing;
mod linear;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bath::SpectralModel;
use crate::error::{Error, Result};
use crate::hamiltonians::{self, CouplingPattern, DriveProtocol, QuadraticHamiltonian};
use crate::linalg::{self, CMatrix, C64};

pub use dephasing::{build_davies_dephasing, build_redfield_dephasing, MAX_KOSSAKOWSKI_SITES};
pub use linear::{build_davies_linear, build_redfield_linear, overlap_matrix};

pub(crate) use dephasing::DephasingTerms;
pub(crate) use linear::LinearTerms;

/// Largest working dimension for which [`GeneratorCoefficients::superoperator`]
/// materialises the full map.
pub const MAX_SUPEROPERATOR_DIM: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Redfield,
    Davies,
    SecularTruncation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    ModeOccupation,
    SingleParticle,
}

#[derive(Clone, Debug)]
pub(crate) enum Terms {
    Linear(LinearTerms),
    Dephasing(DephasingTerms),
}

#[derive(Clone, Debug)]
pub struct GeneratorCoefficients {
    kind: GeneratorKind,
    ham: QuadraticHamiltonian,
    model: SpectralModel,
    pattern: CouplingPattern,
    terms: Terms,
}

impl GeneratorCoefficients {
    pub(crate) fn assemble(
        kind: GeneratorKind,
        ham: &QuadraticHamiltonian,
        model: &SpectralModel,
        pattern: &CouplingPattern,
        terms: Terms,
    ) -> Self {
        Self {
            kind,
            ham: ham.clone(),
            model: model.clone(),
            pattern: pattern.clone(),
            terms,
        }
    }

    pub fn kind(&self) -> GeneratorKind {
        self.kind
    }

    pub fn sector(&self) -> Sector {
        match self.terms {
            Terms::Linear(_) => Sector::ModeOccupation,
            Terms::Dephasing(_) => Sector::SingleParticle,
        }
    }

    pub fn ham(&self) -> &QuadraticHamiltonian {
        &self.ham
    }

    pub fn model(&self) -> &SpectralModel {
        &self.model
    }

    pub fn pattern(&self) -> &CouplingPattern {
        &self.pattern
    }

    pub(crate) fn terms(&self) -> &Terms {
        &self.terms
    }

    pub fn n_sites(&self) -> usize {
        self.ham.n_sites()
    }

    /// `K¹` in the mode basis (mode-occupation sector only).
    pub fn channel1(&self) -> Option<&CMatrix> {
        match &self.terms {
            Terms::Linear(t) => Some(t.k1()),
            Terms::Dephasing(_) => None,
        }
    }

    /// `K²` in the mode basis (mode-occupation sector only).
    pub fn channel2(&self) -> Option<&CMatrix> {
        match &self.terms {
            Terms::Linear(t) => Some(t.k2()),
            Terms::Dephasing(_) => None,
        }
    }

    /// Hermitian sandwich matrices `R¹ = K¹ + K¹†`, `R² = K² + K²†`.
    pub fn sandwich_matrices(&self) -> Option<(CMatrix, CMatrix)> {
        match &self.terms {
            Terms::Linear(t) => Some((t.r1().clone(), t.r2().clone())),
            Terms::Dephasing(_) => None,
        }
    }

    /// Lamb-shift Hamiltonian as a matrix in the mode (eigen) basis.
    pub fn lamb_matrix(&self) -> CMatrix {
        match &self.terms {
            Terms::Linear(t) => t.lamb().clone(),
            Terms::Dephasing(t) => t.lamb_matrix(),
        }
    }

    /// Diagonal of the Lamb-shift matrix, one entry per mode.
    pub fn lamb_shift(&self) -> Vec<f64> {
        let m = self.lamb_matrix();
        (0..m.nrows()).map(|i| m[(i, i)].re).collect()
    }

    /// Largest coefficient modulus; the scale of tolerances.
    pub fn coefficient_scale(&self) -> f64 {
        match &self.terms {
            Terms::Linear(t) => linalg::max_abs(t.k1()).max(linalg::max_abs(t.k2())),
            Terms::Dephasing(t) => t.coefficient_scale(),
        }
    }

    /// Largest total decay rate out of a single mode or level.
    pub fn max_rate(&self) -> f64 {
        match &self.terms {
            Terms::Linear(t) => t.max_rate(),
            Terms::Dephasing(t) => t.max_rate(),
        }
    }

    /// Working-space dimension (`2^N` or `N`).
    pub fn dim(&self) -> Result<usize> {
        match &self.terms {
            Terms::Linear(_) => Ok(crate::fock::FockSpace::new(self.n_sites())?.dim()),
            Terms::Dephasing(_) => Ok(self.n_sites()),
        }
    }

    /// Site-basis state to the representation used internally.
    pub fn to_working(&self, rho: &CMatrix) -> CMatrix {
        match &self.terms {
            Terms::Linear(_) => rho.clone(),
            Terms::Dephasing(t) => t.to_eigen(rho),
        }
    }

    pub fn from_working(&self, x: &CMatrix) -> CMatrix {
        match &self.terms {
            Terms::Linear(_) => x.clone(),
            Terms::Dephasing(t) => t.from_eigen(x),
        }
    }

    /// Generator action in the working representation.
    pub fn apply_working(&self, x: &CMatrix) -> Result<CMatrix> {
        let dim = self.dim()?;
        if x.nrows() != dim || x.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: x.nrows(),
            });
        }
        match &self.terms {
            Terms::Linear(t) => t.apply_fock(x),
            Terms::Dephasing(t) => Ok(t.apply_eigen(x)),
        }
    }

    /// `L(ρ)` for a site-basis operator `ρ`.
    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        let w = self.to_working(rho);
        Ok(self.from_working(&self.apply_working(&w)?))
    }

    /// Full superoperator acting on column-stacked site-basis matrices,
    /// `vec(ρ)[a + dim·b] = ρ_ab`.
    pub fn superoperator(&self) -> Result<CMatrix> {
        let dim = self.dim()?;
        if dim > MAX_SUPEROPERATOR_DIM {
            return Err(Error::Unsupported(format!(
                "superoperator export limited to dimension {MAX_SUPEROPERATOR_DIM}, got {dim}"
            )));
        }
        let d2 = dim * dim;
        let mut out = CMatrix::zeros(d2, d2);
        for b in 0..dim {
            for a in 0..dim {
                let mut e = CMatrix::zeros(dim, dim);
                e[(a, b)] = C64::new(1.0, 0.0);
                let col = self.apply(&e)?;
                for q in 0..dim {
                    for p in 0..dim {
                        out[(p + dim * q, a + dim * b)] = col[(p, q)];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Copy with the channel-2 coefficients multiplied by `factor`
    /// (mode-occupation sector). Breaks the KMS ratio for `factor ≠ 1`.
    pub fn with_channel2_scaled(&self, factor: f64) -> Result<Self> {
        match &self.terms {
            Terms::Linear(t) => {
                let k2 = t.k2() * C64::new(factor, 0.0);
                let terms = LinearTerms::new(&self.ham, t.k1().clone(), k2)?;
                Ok(Self {
                    terms: Terms::Linear(terms),
                    ..self.clone()
                })
            }
            Terms::Dephasing(_) => Err(Error::Unsupported(
                "channel scaling applies to exchange coupling only".into(),
            )),
        }
    }

    /// Copy with `value` added to `K¹_mn` (mode-occupation sector).
    pub fn with_channel1_entry(&self, m: usize, n: usize, value: C64) -> Result<Self> {
        match &self.terms {
            Terms::Linear(t) => {
                let mut k1 = t.k1().clone();
                if m >= k1.nrows() || n >= k1.ncols() {
                    return Err(Error::InvalidParameter(format!("mode pair ({m}, {n}) out of range")));
                }
                k1[(m, n)] += value;
                let terms = LinearTerms::new(&self.ham, k1, t.k2().clone())?;
                Ok(Self {
                    terms: Terms::Linear(terms),
                    ..self.clone()
                })
            }
            Terms::Dephasing(_) => Err(Error::Unsupported(
                "coefficient injection applies to exchange coupling only".into(),
            )),
        }
    }

    /// SHA-256 of the hopping matrix and bath model.
    pub fn metadata_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.ham.hopping_hash().as_bytes());
        hasher.update(serde_json::to_vec(&self.model).unwrap_or_default());
        hasher.update(serde_json::to_vec(&self.pattern).unwrap_or_default());
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn to_json(&self) -> GeneratorJson {
        let (channel1, channel2, gamma) = match &self.terms {
            Terms::Linear(t) => (
                Some(MatrixJson::from(t.k1())),
                Some(MatrixJson::from(t.k2())),
                None,
            ),
            Terms::Dephasing(t) => (None, None, Some(MatrixJson::from(t.gamma()))),
        };
        GeneratorJson {
            schema_version: crate::CONFIG_SCHEMA_VERSION,
            code_version: crate::CODE_VERSION.to_string(),
            kind: self.kind,
            sector: self.sector(),
            model: self.model.clone(),
            pattern: self.pattern.weights().to_vec(),
            hopping: MatrixJson::from(self.ham.hopping()),
            frequencies: self.ham.frequencies().to_vec(),
            eigenvectors: MatrixJson::from(self.ham.eigenvectors()),
            channel1,
            channel2,
            lamb: MatrixJson::from(&self.lamb_matrix()),
            gamma,
            hash: self.metadata_hash(),
        }
    }

    pub fn from_json(json: &GeneratorJson) -> Result<Self> {
        let ham = hamiltonians::from_parts(
            json.hopping.to_matrix()?,
            json.frequencies.clone(),
            json.eigenvectors.to_matrix()?,
        )?;
        let pattern = CouplingPattern::new(json.pattern.clone())?;
        let terms = match json.sector {
            Sector::ModeOccupation => {
                let k1 = json
                    .channel1
                    .as_ref()
                    .ok_or_else(|| Error::Parse("missing channel1".into()))?
                    .to_matrix()?;
                let k2 = json
                    .channel2
                    .as_ref()
                    .ok_or_else(|| Error::Parse("missing channel2".into()))?
                    .to_matrix()?;
                Terms::Linear(LinearTerms::new(&ham, k1, k2)?)
            }
            Sector::SingleParticle => {
                let gamma = json
                    .gamma
                    .as_ref()
                    .ok_or_else(|| Error::Parse("missing gamma".into()))?
                    .to_matrix()?;
                let resonant = json.kind != GeneratorKind::Redfield;
                Terms::Dephasing(DephasingTerms::new(&ham, gamma, resonant)?)
            }
        };
        let g = Self {
            kind: json.kind,
            ham,
            model: json.model.clone(),
            pattern,
            terms,
        };
        if g.metadata_hash() != json.hash {
            return Err(Error::Parse("generator metadata hash mismatch".into()));
        }
        Ok(g)
    }
}

/// Serialized generator.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorJson {
    pub schema_version: u32,
    pub code_version: String,
    pub kind: GeneratorKind,
    pub sector: Sector,
    pub model: SpectralModel,
    pub pattern: Vec<f64>,
    pub hopping: MatrixJson,
    pub frequencies: Vec<f64>,
    pub eigenvectors: MatrixJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel1: Option<MatrixJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel2: Option<MatrixJson>,
    pub lamb: MatrixJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<MatrixJson>,
    pub hash: String,
}

/// Complex matrix as nested row arrays of real and imaginary parts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&CMatrix> for MatrixJson {
    fn from(m: &CMatrix) -> Self {
        let rows = |f: fn(&C64) -> f64| {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect())
                .collect()
        };
        Self {
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        }
    }
}

impl MatrixJson {
    pub fn to_matrix(&self) -> Result<CMatrix> {
        let n = self.re.len();
        let m = self.re.first().map_or(0, Vec::len);
        let shape_ok = self.im.len() == n
            && self.re.iter().all(|r| r.len() == m)
            && self.im.iter().all(|r| r.len() == m);
        if !shape_ok {
            return Err(Error::Parse("ragged matrix in JSON".into()));
        }
        Ok(CMatrix::from_fn(n, m, |i, j| C64::new(self.re[i][j], self.im[i][j])))
    }
}

/// Restriction of a generator to its secular (resonant) terms.
///
/// Mode pairs or level quadruples whose Bohr frequencies agree within
/// `1e-9 · scale` are retained, so degenerate clusters keep their internal
/// blocks.
pub fn secular_truncate(g: &GeneratorCoefficients) -> Result<GeneratorCoefficients> {
    if g.kind != GeneratorKind::Redfield {
        return Err(Error::InvalidParameter(
            "secular truncation expects a Redfield generator".into(),
        ));
    }
    let terms = match &g.terms {
        Terms::Linear(t) => Terms::Linear(t.secular(&g.ham)?),
        Terms::Dephasing(t) => Terms::Dephasing(DephasingTerms::new(&g.ham, t.gamma().clone(), true)?),
    };
    Ok(GeneratorCoefficients {
        kind: GeneratorKind::SecularTruncation,
        terms,
        ..g.clone()
    })
}

/// Kossakowski matrix over jump operators: `{c_m} ∪ {c_m†}` (block diagonal
/// `R¹ ⊕ R²`) for exchange coupling, dyads `|l⟩⟨k|` for dephasing.
pub fn kossakowski_matrix(g: &GeneratorCoefficients) -> Result<CMatrix> {
    match &g.terms {
        Terms::Linear(t) => {
            let n = g.n_sites();
            let mut k = CMatrix::zeros(2 * n, 2 * n);
            k.view_mut((0, 0), (n, n)).copy_from(t.r1());
            k.view_mut((n, n), (n, n)).copy_from(t.r2());
            Ok(k)
        }
        Terms::Dephasing(t) => t.kossakowski(),
    }
}

/// Davies generator of the instantaneous Hamiltonian `p(t)`.
pub fn instantaneous_davies(
    p: &DriveProtocol,
    model: &SpectralModel,
    pattern: &CouplingPattern,
    t: f64,
) -> Result<GeneratorCoefficients> {
    let ham = hamiltonians::sample_drive(p, t)?;
    build_davies_linear(&ham, model, pattern)
}

/// Frequencies of the modes grouped into degenerate clusters.
pub(crate) fn frequency_clusters(ham: &QuadraticHamiltonian) -> Vec<usize> {
    linalg::cluster_labels(ham.frequencies(), 1e-9 * ham.scale())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::Statistics;
    use crate::hamiltonians::build_gue;

    fn through_text(g: &GeneratorCoefficients) -> Result<GeneratorCoefficients> {
        let text = serde_json::to_string(&g.to_json()).unwrap();
        let json: GeneratorJson = serde_json::from_str(&text).unwrap();
        GeneratorCoefficients::from_json(&json)
    }

    #[test]
    fn json_text_reproduces_generator_bit_for_bit() {
        let ham = build_gue(4, 1.0, 11).unwrap();
        let fermi = SpectralModel::ohmic(Statistics::Fermionic, 5.0, 0.0, 10.0, 0.2).unwrap().with_eta(true);
        let pattern = CouplingPattern::random(4, 3).unwrap();
        let gens = [
            build_redfield_linear(&ham, &fermi, &pattern).unwrap(),
            build_davies_dephasing(&ham, &SpectralModel::figure_one()).unwrap(),
        ];
        for g in &gens {
            let back = through_text(g).unwrap();
            assert_eq!(back.metadata_hash(), g.metadata_hash());
            assert_eq!(back.lamb_matrix(), g.lamb_matrix());
            assert_eq!(back.superoperator().unwrap(), g.superoperator().unwrap());
        }
    }

    #[test]
    fn tampered_json_is_rejected() {
        let ham = build_gue(4, 1.0, 2).unwrap();
        let g = build_davies_dephasing(&ham, &SpectralModel::figure_one()).unwrap();
        let mut json = g.to_json();
        json.hopping.re[0][1] += 1e-3;
        json.hopping.re[1][0] += 1e-3;
        assert!(GeneratorCoefficients::from_json(&json).is_err());
    }
}
