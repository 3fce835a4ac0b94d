//! Thermal bath spectra.
//!
//! Every site couples to an identical bath. For exchange (linear) coupling a
//! particle can leave the system into the bath (emission) or enter from it
//! (absorption); the corresponding rates at a mode frequency `ω` are
//!
//! ```text
//! emission(ω)   = J² (1 ∓ f(ω)) D(ω)
//! absorption(ω) = J² f(ω) D(ω)
//! ```
//!
//! with `f` the Fermi (upper sign) or Bose (lower sign) function. They obey the
//! KMS relation `emission(ω) = e^{β(ω-μ)} absorption(ω)`. Cross spectra between
//! the two channels vanish identically and are never stored.
//!
//! The one-sided transforms entering the master equations are
//! `Γ(ω) = γ(ω)/2 + iη(ω)`, where `η` is the principal-value Hilbert transform
//! `η(ω) = (1/2π) P∫ dω' γ(ω') / (ω - ω')`.

use std::cell::Cell;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::quadrature;

/// Absolute accuracy targeted by the principal-value integrals.
pub const ETA_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistics {
    Fermionic,
    Bosonic,
}

/// Tabulated density of states, linearly interpolated and zero outside the
/// table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable")]
pub struct DosTable {
    omega: Vec<f64>,
    dos: Vec<f64>,
}

#[derive(Deserialize)]
struct RawTable {
    omega: Vec<f64>,
    dos: Vec<f64>,
}

impl TryFrom<RawTable> for DosTable {
    type Error = Error;
    fn try_from(raw: RawTable) -> Result<Self> {
        DosTable::new(raw.omega, raw.dos)
    }
}

impl DosTable {
    pub fn new(omega: Vec<f64>, dos: Vec<f64>) -> Result<Self> {
        if omega.len() != dos.len() {
            return Err(Error::DimensionMismatch {
                expected: omega.len(),
                got: dos.len(),
            });
        }
        if omega.len() < 2 {
            return Err(Error::InvalidParameter(
                "density-of-states table needs at least two rows".into(),
            ));
        }
        if omega.iter().chain(&dos).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite table entry".into()));
        }
        if omega.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "table frequencies must be strictly increasing".into(),
            ));
        }
        if let Some(d) = dos.iter().find(|&&d| d < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "density of states must be nonnegative, found {d}"
            )));
        }
        Ok(Self { omega, dos })
    }

    /// Reads a two-column `omega,dos` CSV file. A leading header row is
    /// skipped if it does not parse as numbers.
    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }

    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut omega = Vec::new();
        let mut dos = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != 2 {
                return Err(Error::Parse(format!(
                    "row {}: expected 2 columns, found {}",
                    row + 1,
                    record.len()
                )));
            }
            let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
            match parsed {
                (Ok(w), Ok(d)) => {
                    omega.push(w);
                    dos.push(d);
                }
                _ if row == 0 => continue,
                _ => {
                    return Err(Error::Parse(format!(
                        "row {}: cannot parse numbers",
                        row + 1
                    )))
                }
            }
        }
        Self::new(omega, dos)
    }

    pub fn eval(&self, w: f64) -> f64 {
        let n = self.omega.len();
        if w < self.omega[0] || w > self.omega[n - 1] {
            return 0.0;
        }
        let idx = self.omega.partition_point(|&x| x <= w);
        if idx == 0 {
            return self.dos[0];
        }
        if idx >= n {
            return self.dos[n - 1];
        }
        let (x0, x1) = (self.omega[idx - 1], self.omega[idx]);
        let t = (w - x0) / (x1 - x0);
        self.dos[idx - 1] * (1.0 - t) + self.dos[idx] * t
    }

    /// Derivative from the right at `w`.
    fn right_slope(&self, w: f64) -> f64 {
        let n = self.omega.len();
        if w < self.omega[0] || w >= self.omega[n - 1] {
            return 0.0;
        }
        let idx = self.omega.partition_point(|&x| x <= w);
        (self.dos[idx] - self.dos[idx - 1]) / (self.omega[idx] - self.omega[idx - 1])
    }

    pub fn rows(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.omega.iter().copied().zip(self.dos.iter().copied())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityOfStates {
    /// `D(ω) = |ω| exp(-|ω| / cutoff)`.
    Ohmic { cutoff: f64 },
    Custom { table: DosTable },
}

impl DensityOfStates {
    pub fn eval(&self, w: f64) -> f64 {
        match self {
            DensityOfStates::Ohmic { cutoff } => w.abs() * (-w.abs() / cutoff).exp(),
            DensityOfStates::Custom { table } => table.eval(w),
        }
    }

    fn right_slope(&self, w: f64) -> f64 {
        match self {
            DensityOfStates::Ohmic { cutoff } => {
                let s = if w >= 0.0 { 1.0 } else { -1.0 };
                s * (1.0 - w.abs() / cutoff) * (-w.abs() / cutoff).exp()
            }
            DensityOfStates::Custom { table } => table.right_slope(w),
        }
    }

    fn kinks(&self) -> Vec<f64> {
        match self {
            DensityOfStates::Ohmic { .. } => vec![0.0],
            DensityOfStates::Custom { table } => table.omega.clone(),
        }
    }
}

/// Rates and shifts of both exchange channels at one frequency.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralSample {
    pub omega: f64,
    /// Emission rate (jump `c`).
    pub gamma11: f64,
    /// Absorption rate (jump `c†`).
    pub gamma22: f64,
    pub eta11: f64,
    pub eta22: f64,
}

/// Bath description shared by every site.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct SpectralModel {
    statistics: Statistics,
    beta: f64,
    mu: f64,
    coupling: f64,
    dos: DensityOfStates,
    #[serde(default)]
    include_eta: bool,
}

#[derive(Deserialize)]
struct RawModel {
    statistics: Statistics,
    beta: f64,
    mu: f64,
    coupling: f64,
    dos: DensityOfStates,
    #[serde(default)]
    include_eta: bool,
}

impl TryFrom<RawModel> for SpectralModel {
    type Error = Error;
    fn try_from(r: RawModel) -> Result<Self> {
        SpectralModel::new(r.statistics, r.beta, r.mu, r.coupling, r.dos)
            .map(|m| m.with_eta(r.include_eta))
    }
}

impl SpectralModel {
    pub fn new(
        statistics: Statistics,
        beta: f64,
        mu: f64,
        coupling: f64,
        dos: DensityOfStates,
    ) -> Result<Self> {
        let model = Self {
            statistics,
            beta,
            mu,
            coupling,
            dos,
            include_eta: false,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn ohmic(
        statistics: Statistics,
        beta: f64,
        mu: f64,
        cutoff: f64,
        coupling: f64,
    ) -> Result<Self> {
        Self::new(
            statistics,
            beta,
            mu,
            coupling,
            DensityOfStates::Ohmic { cutoff },
        )
    }

    /// Bosonic Ohmic bath with `J_int = 0.2, ω_c = 10, β = 5, μ = 0`.
    pub fn figure_one() -> Self {
        Self::ohmic(Statistics::Bosonic, 5.0, 0.0, 10.0, 0.2).expect("valid parameters")
    }

    pub fn with_eta(mut self, include_eta: bool) -> Self {
        self.include_eta = include_eta;
        self
    }

    pub fn with_coupling(&self, coupling: f64) -> Result<Self> {
        let mut m = self.clone();
        m.coupling = coupling;
        m.validate()?;
        Ok(m)
    }

    pub fn with_statistics(&self, statistics: Statistics) -> Result<Self> {
        let mut m = self.clone();
        m.statistics = statistics;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "beta must be positive and finite, got {}",
                self.beta
            )));
        }
        if !(self.coupling >= 0.0 && self.coupling.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "coupling must be nonnegative, got {}",
                self.coupling
            )));
        }
        if !self.mu.is_finite() {
            return Err(Error::InvalidParameter("mu must be finite".into()));
        }
        if let DensityOfStates::Ohmic { cutoff } = self.dos {
            if !(cutoff > 0.0 && cutoff.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "Ohmic cutoff must be positive, got {cutoff}"
                )));
            }
        }
        if self.statistics == Statistics::Bosonic {
            let ok = match &self.dos {
                DensityOfStates::Ohmic { .. } => self.mu <= 0.0,
                DensityOfStates::Custom { table } => {
                    table.eval(self.mu) == 0.0
                        && table.rows().all(|(w, d)| w > self.mu || d == 0.0)
                }
            };
            if !ok {
                return Err(Error::InvalidParameter(format!(
                    "bosonic chemical potential {} must lie at or below the floor of the bath spectrum",
                    self.mu
                )));
            }
        }
        Ok(())
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn coupling(&self) -> f64 {
        self.coupling
    }
    pub fn dos(&self) -> &DensityOfStates {
        &self.dos
    }
    pub fn include_eta(&self) -> bool {
        self.include_eta
    }

    pub fn density_of_states(&self, w: f64) -> f64 {
        self.dos.eval(w)
    }

    /// `1 / (e^{β(ω-μ)} ± 1)`.
    pub fn distribution(&self, w: f64) -> Result<f64> {
        let x = self.beta * (w - self.mu);
        match self.statistics {
            Statistics::Fermionic => Ok(fermi(x)),
            Statistics::Bosonic => {
                if x <= 0.0 {
                    return Err(Error::Domain(format!(
                        "Bose occupation diverges for omega = {w} <= mu = {}",
                        self.mu
                    )));
                }
                Ok(1.0 / x.exp_m1())
            }
        }
    }

    /// `f(ω) D(ω)` without the coupling factor; finite at `ω = μ` for bosons
    /// when the density of states vanishes there.
    fn occupied_dos(&self, w: f64) -> Result<f64> {
        let d = self.dos.eval(w);
        match self.statistics {
            Statistics::Fermionic => Ok(fermi(self.beta * (w - self.mu)) * d),
            Statistics::Bosonic => {
                let x = self.beta * (w - self.mu);
                if x > 0.0 {
                    Ok(d / x.exp_m1())
                } else if x == 0.0 && d == 0.0 {
                    Ok(self.dos.right_slope(w) / self.beta)
                } else {
                    Err(Error::Domain(format!(
                        "Bose occupation diverges for omega = {w} <= mu = {}",
                        self.mu
                    )))
                }
            }
        }
    }

    /// Emission and absorption rates at `ω` with `J_int²` folded in.
    pub fn gamma_pair(&self, w: f64) -> Result<(f64, f64)> {
        let j2 = self.coupling * self.coupling;
        let d = self.dos.eval(w);
        let absorption = self.occupied_dos(w)?;
        let emission = match self.statistics {
            Statistics::Fermionic => fermi(-self.beta * (w - self.mu)) * d,
            Statistics::Bosonic => d + absorption,
        };
        Ok((j2 * emission, j2 * absorption))
    }

    /// Residual of `γ₁₁(ω) = e^{β(ω-μ)} γ₂₂(-ω)` at `ω`.
    pub fn kms_residual(&self, w: f64) -> Result<f64> {
        let (emit, absorb) = self.gamma_pair(w)?;
        let x = self.beta * (w - self.mu);
        let detailed = if absorb > 0.0 {
            (x + absorb.ln()).exp()
        } else {
            0.0
        };
        Ok((emit - detailed).abs())
    }

    /// Principal-value shifts of the emission and absorption channels at `ω`;
    /// `(0, 0)` unless the model includes η.
    pub fn eta_pair(&self, w: f64) -> Result<(f64, f64)> {
        if !self.include_eta {
            return Ok((0.0, 0.0));
        }
        let e = self.hilbert(w, |x| self.channel_or_zero(x, true))?;
        let a = self.hilbert(w, |x| self.channel_or_zero(x, false))?;
        Ok((e, a))
    }

    pub fn sample(&self, w: f64) -> Result<SpectralSample> {
        let (gamma11, gamma22) = self.gamma_pair(w)?;
        let (eta11, eta22) = self.eta_pair(w)?;
        Ok(SpectralSample {
            omega: w,
            gamma11,
            gamma22,
            eta11,
            eta22,
        })
    }

    /// `Γ` coefficient of the emission channel: `γ/2 + iη`.
    pub fn emission_coefficient(&self, w: f64) -> Result<C64> {
        let s = self.sample(w)?;
        Ok(C64::new(0.5 * s.gamma11, s.eta11))
    }

    /// `Γ` coefficient of the absorption channel. The absorption correlation
    /// is evaluated at `-ω` in the one-sided transform, so its shift enters
    /// with the opposite sign: `γ/2 - iη`.
    pub fn absorption_coefficient(&self, w: f64) -> Result<C64> {
        let s = self.sample(w)?;
        Ok(C64::new(0.5 * s.gamma22, -s.eta22))
    }

    /// Scalar spectrum of a Hermitian bath coupling `A ⊗ (B + B†)` at Bohr
    /// frequency `ν`: emission for `ν > 0`, absorption at `|ν|` for `ν < 0`.
    /// Satisfies `γ(ν) = e^{β(ν-μ)} γ(-ν)`-type KMS with `μ` entering through
    /// the occupation function.
    pub fn dephasing_rate(&self, nu: f64) -> Result<f64> {
        let (emit, absorb) = self.gamma_pair(nu.abs())?;
        Ok(if nu >= 0.0 { emit } else { absorb })
    }

    pub fn dephasing_eta(&self, nu: f64) -> Result<f64> {
        if !self.include_eta {
            return Ok(0.0);
        }
        self.hilbert(nu, |x| self.dephasing_rate(x))
    }

    /// `Γ(ν) = γ(ν)/2 + iη(ν)` of the dephasing spectrum.
    pub fn dephasing_coefficient(&self, nu: f64) -> Result<C64> {
        Ok(C64::new(0.5 * self.dephasing_rate(nu)?, self.dephasing_eta(nu)?))
    }

    fn channel_or_zero(&self, w: f64, emission: bool) -> Result<f64> {
        if self.statistics == Statistics::Bosonic && w < self.mu {
            return Ok(0.0);
        }
        let (e, a) = self.gamma_pair(w)?;
        Ok(if emission { e } else { a })
    }

    /// `(1/2π) P∫ g(ω') / (ω - ω') dω'`, rewritten as the regular integral
    /// `(1/2π) ∫₀^∞ [g(ω - t) - g(ω + t)] / t dt` and split at the distances
    /// from `ω` to the kinks of `g`.
    fn hilbert<G: Fn(f64) -> Result<f64>>(&self, w: f64, g: G) -> Result<f64> {
        let failure: Cell<Option<Error>> = Cell::new(None);
        let eval = |x: f64| -> f64 {
            match g(x) {
                Ok(v) => v,
                Err(e) => {
                    failure.set(Some(e));
                    0.0
                }
            }
        };
        let integrand = |t: f64| {
            if t == 0.0 {
                return 0.0;
            }
            (eval(w - t) - eval(w + t)) / t
        };
        let mut breaks: Vec<f64> = self
            .dos
            .kinks()
            .into_iter()
            .chain(std::iter::once(self.mu))
            .map(|k| (w - k).abs())
            .filter(|&t| t > 0.0)
            .collect();
        let scale = match &self.dos {
            DensityOfStates::Ohmic { cutoff } => *cutoff,
            DensityOfStates::Custom { table } => {
                let lo = table.omega[0];
                let hi = table.omega[table.omega.len() - 1];
                (hi - lo).max(1.0)
            }
        };
        breaks.extend([scale, 4.0 * scale, 16.0 * scale].map(|s| s + w.abs()));
        let target = ETA_TOLERANCE * 2.0 * std::f64::consts::PI;
        let result = quadrature::integrate_to_infinity(integrand, 0.0, &breaks, target);
        if let Some(e) = failure.take() {
            return Err(e);
        }
        Ok(result?.value / (2.0 * std::f64::consts::PI))
    }
}

/// Fermi function of `x = β(ω-μ)`, evaluated without overflow.
fn fermi(x: f64) -> f64 {
    if x >= 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fermionic() -> SpectralModel {
        SpectralModel::ohmic(Statistics::Fermionic, 5.0, 0.0, 10.0, 0.2).unwrap()
    }

    #[test]
    fn fermi_symmetry_point() {
        let m = SpectralModel::ohmic(Statistics::Fermionic, 3.0, 0.7, 10.0, 1.0).unwrap();
        assert_eq!(m.distribution(0.7).unwrap(), 0.5);
    }

    #[test]
    fn zero_temperature_limits() {
        let m = SpectralModel::ohmic(Statistics::Fermionic, 1e4, 0.0, 10.0, 1.0).unwrap();
        assert!(m.distribution(0.1).unwrap() < 1e-300);
        assert!((m.distribution(-0.1).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bose_value_at_figure_parameters() {
        // 1/(e^5 - 1), reference from a 50-digit evaluation.
        let m = SpectralModel::figure_one();
        let f = m.distribution(1.0).unwrap();
        assert!((f - 0.006_783_654_906_304_231).abs() < 1e-17, "{f:.18}");
    }

    #[test]
    fn bose_below_mu_is_domain_error() {
        let m = SpectralModel::figure_one();
        assert!(matches!(m.distribution(0.0), Err(Error::Domain(_))));
        assert!(matches!(m.distribution(-0.5), Err(Error::Domain(_))));
        assert!(matches!(m.gamma_pair(-0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn gamma_pair_at_figure_parameters() {
        // D(1) = e^{-0.1}; emission = 0.04 (1 + n) D, absorption = 0.04 n D,
        // n = 1/(e^5 - 1); values from 50-digit evaluation.
        let (e, a) = SpectralModel::figure_one().gamma_pair(1.0).unwrap();
        assert!((e - 3.643_902_091_304_907_4e-2).abs() < 1e-16, "{e:.18e}");
        assert!((a - 2.455_241_916_106_916e-4).abs() < 1e-18, "{a:.18e}");
    }

    #[test]
    fn ohmic_rates_vanish_at_zero_for_fermions() {
        let (e, a) = fermionic().gamma_pair(0.0).unwrap();
        assert_eq!((e, a), (0.0, 0.0));
        let (e, a) = fermionic().gamma_pair(1e-9).unwrap();
        assert!(e < 1e-10 && a < 1e-10);
    }

    #[test]
    fn bose_limit_at_mu_is_finite() {
        // |ω| n(ω) → 1/β as ω → 0.
        let m = SpectralModel::figure_one();
        let (_, a0) = m.gamma_pair(0.0).unwrap();
        let (_, a1) = m.gamma_pair(1e-7).unwrap();
        assert!((a0 - 0.04 / 5.0).abs() < 1e-15);
        assert!((a0 - a1).abs() < 1e-8);
    }

    #[test]
    fn vanishing_dos_gives_zero_rates() {
        let table = DosTable::new(vec![1.0, 2.0], vec![1.0, 1.0]).unwrap();
        let m = SpectralModel::new(
            Statistics::Fermionic,
            1.0,
            0.0,
            1.0,
            DensityOfStates::Custom { table },
        )
        .unwrap();
        assert_eq!(m.gamma_pair(5.0).unwrap(), (0.0, 0.0));
        assert_eq!(m.gamma_pair(-1.0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn kms_on_grid() {
        for model in [fermionic(), SpectralModel::figure_one()] {
            for k in 1..400 {
                let w = if model.statistics() == Statistics::Fermionic {
                    -8.0 + 0.04 * k as f64
                } else {
                    0.02 * k as f64
                };
                let (e, _) = model.gamma_pair(w).unwrap();
                let r = model.kms_residual(w).unwrap();
                assert!(r <= 1e-12 * e.max(1.0), "w={w} residual {r}");
            }
        }
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(SpectralModel::ohmic(Statistics::Fermionic, 0.0, 0.0, 1.0, 1.0).is_err());
        assert!(SpectralModel::ohmic(Statistics::Fermionic, 1.0, 0.0, -1.0, 1.0).is_err());
        assert!(SpectralModel::ohmic(Statistics::Fermionic, 1.0, 0.0, 1.0, -0.1).is_err());
        assert!(SpectralModel::ohmic(Statistics::Bosonic, 1.0, 0.5, 1.0, 0.1).is_err());
        assert!(DosTable::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(DosTable::new(vec![0.0, 1.0], vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn eta_off_is_zero() {
        assert_eq!(fermionic().eta_pair(1.0).unwrap(), (0.0, 0.0));
        assert_eq!(fermionic().dephasing_eta(1.0).unwrap(), 0.0);
    }

    fn flat_model(half_width: f64) -> SpectralModel {
        let table = DosTable::new(
            vec![-half_width, -half_width + 1e-12, half_width - 1e-12, half_width],
            vec![0.0, 1.0, 1.0, 0.0],
        )
        .unwrap();
        // Infinite temperature makes both channels flat: emission = absorption = 1/2.
        SpectralModel::new(
            Statistics::Fermionic,
            1e-12,
            0.0,
            1.0,
            DensityOfStates::Custom { table },
        )
        .unwrap()
        .with_eta(true)
    }

    #[test]
    fn eta_normalisation_flat_band() {
        // γ = 1/2 on [-B, B] gives η(ω) = (1/2π)(1/2) ln|(ω + B)/(ω - B)|.
        let b = 2.0;
        let m = flat_model(b);
        for w in [0.3, 1.1, -0.7, 3.5] {
            let (e, a) = m.eta_pair(w).unwrap();
            let exact = 0.5 * ((w + b) / (w - b)).abs().ln() / (2.0 * std::f64::consts::PI);
            assert!((e - exact).abs() < 1e-6, "w={w}: {e} vs {exact}");
            assert!((a - exact).abs() < 1e-6);
        }
    }

    #[test]
    fn eta_vanishes_at_symmetry_centre() {
        let m = flat_model(1.5);
        let (e, _) = m.eta_pair(0.0).unwrap();
        assert!(e.abs() < 1e-9);
    }

    #[test]
    fn eta_matches_trapezoid_oracle() {
        // Dense symmetric-grid principal value: pair points ω ± t so that the
        // 1/(ω - ω') singularity cancels, then trapezoid in t.
        let m = SpectralModel::figure_one().with_eta(true);
        let w = 1.0;
        let g = |x: f64| -> f64 {
            if x < 0.0 {
                0.0
            } else {
                m.gamma_pair(x).unwrap().0
            }
        };
        let h = 2e-4;
        let t_max = 400.0;
        let steps = (t_max / h) as usize;
        let mut acc = 0.0;
        for k in 1..=steps {
            let t = k as f64 * h;
            // γ jumps at ω' = 0; the grid hits it at t = ω, where the
            // trapezoid rule on the two pieces averages the one-sided limits.
            let below = if k == (w / h).round() as usize { 0.5 * g(1e-12) } else { g(w - t) };
            let v = (below - g(w + t)) / t;
            acc += if k == steps { 0.5 * v } else { v };
        }
        // t → 0 limit of the integrand is -2γ'(ω); half-weighted endpoint.
        let d = 1e-6;
        acc += 0.5 * (-(g(w + d) - g(w - d)) / d);
        let oracle = acc * h / (2.0 * std::f64::consts::PI);
        let (eta, _) = m.eta_pair(w).unwrap();
        assert!(
            ((eta - oracle) / oracle).abs() < 1e-6,
            "eta {eta} oracle {oracle}"
        );
    }

    #[test]
    fn csv_table_roundtrip() {
        let text = "omega,dos\n-1.0,0.0\n0.0,2.0\n1.0,0.0\n";
        let t = DosTable::from_csv_reader(text.as_bytes()).unwrap();
        assert_eq!(t.eval(0.5), 1.0);
        assert_eq!(t.eval(-2.0), 0.0);
        assert!(DosTable::from_csv_reader("0,1\n1,x\n".as_bytes()).is_err());
        assert!(DosTable::from_csv_reader("0,1\n0,1\n".as_bytes()).is_err());
    }

    #[test]
    fn dephasing_spectrum_satisfies_kms() {
        let m = SpectralModel::figure_one();
        for k in 1..200 {
            let nu = 0.05 * k as f64;
            let up = m.dephasing_rate(nu).unwrap();
            let down = m.dephasing_rate(-nu).unwrap();
            assert!((up - (5.0 * nu).exp() * down).abs() <= 1e-12 * up.max(1.0));
        }
        let zero = m.dephasing_rate(0.0).unwrap();
        assert!((zero - 0.04 / 5.0).abs() < 1e-15);
    }
}
