//! Numerical certificates: Redfield–Davies equivalence, KMS and detailed
//! balance, complete positivity, Gibbs stationarity and eigenstate-
//! thermalization scaling of the dephasing coefficients.

use serde::{Deserialize, Serialize};

use crate::bath::SpectralModel;
use crate::dynamics::{self, gibbs_state};
use crate::error::{Error, Result};
use crate::fock::MAX_FOCK_SITES;
use crate::generators::{
    build_davies_linear, build_redfield_linear, kossakowski_matrix, GeneratorCoefficients,
    GeneratorKind, Sector,
};
use crate::hamiltonians::{
    build_anderson3d_sample, build_gue_sample, Boundary, CouplingPattern, QuadraticHamiltonian,
};
use crate::linalg::{self, CMatrix, C64};

/// Relative tolerance of coefficient equality.
pub const EQUIVALENCE_TOL: f64 = 1e-12;
/// Relative tolerance of the detailed-balance residuals.
pub const DETAILED_BALANCE_TOL: f64 = 1e-10;
/// Absolute floor on the smallest Kossakowski eigenvalue.
pub const CP_TOL: f64 = 1e-12;
/// Relative tolerance of `‖L(ρ_G)‖` against the largest rate.
pub const STATIONARITY_TOL: f64 = 1e-10;
/// Absolute tolerance of the KMS rate identity.
pub const KMS_TOL: f64 = 1e-12;

/// Largest `N` for which stationarity is checked on the full Fock space;
/// larger systems use the mode correlation matrix.
const FOCK_STATIONARITY_SITES: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    /// `None` when the check only reports a residual.
    pub passed: Option<bool>,
    pub residual: f64,
    pub tolerance: f64,
}

impl CheckResult {
    fn verdict(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: Some(residual.is_finite() && residual <= tolerance),
            residual,
            tolerance,
        }
    }

    fn report_only(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: None,
            residual,
            tolerance,
        }
    }

    /// Pass check for lower bounds (`value ≥ -tolerance`); the residual is
    /// the value itself.
    fn lower_bound(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: Some(value.is_finite() && value >= -tolerance),
            residual: value,
            tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub generator_hash: String,
    pub kind: GeneratorKind,
    pub sector: Sector,
    pub n_sites: usize,
    pub model: SpectralModel,
    pub code_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub checks: Vec<CheckResult>,
    pub metadata: ReportMetadata,
}

impl CertificationReport {
    /// `false` iff any check with a verdict failed.
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed != Some(false))
    }

    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<34} {:>8} {:>14} {:>14}\n",
            "check", "verdict", "residual", "tolerance"
        );
        for c in &self.checks {
            let v = match c.passed {
                Some(true) => "PASS",
                Some(false) => "FAIL",
                None => "-",
            };
            s.push_str(&format!(
                "{:<34} {:>8} {:>14.3e} {:>14.3e}\n",
                c.name, v, c.residual, c.tolerance
            ));
        }
        s
    }
}

fn coefficient_deviation(a: &GeneratorCoefficients, b: &GeneratorCoefficients, scale_b: f64) -> Result<f64> {
    let (ka1, ka2) = (a.channel1(), a.channel2());
    let (kb1, kb2) = (b.channel1(), b.channel2());
    let (Some(ka1), Some(ka2), Some(kb1), Some(kb2)) = (ka1, ka2, kb1, kb2) else {
        return Err(Error::Unsupported("equivalence compares exchange generators".into()));
    };
    let d1 = linalg::max_abs(&(ka1 - kb1 * C64::new(scale_b, 0.0)));
    let d2 = linalg::max_abs(&(ka2 - kb2 * C64::new(scale_b, 0.0)));
    let d3 = linalg::max_abs(&(a.lamb_matrix() - b.lamb_matrix() * C64::new(scale_b, 0.0)));
    Ok(d1.max(d2).max(d3))
}

/// Largest deviation between Redfield and Davies coefficients (both
/// channels and the Lamb-shift matrix). Verdict only for uniform patterns.
pub fn check_equivalence(
    ham: &QuadraticHamiltonian,
    model: &SpectralModel,
    pattern: &CouplingPattern,
) -> Result<CheckResult> {
    let red = build_redfield_linear(ham, model, pattern)?;
    let dav = build_davies_linear(ham, model, pattern)?;
    let residual = coefficient_deviation(&red, &dav, 1.0)?;
    let tol = EQUIVALENCE_TOL * dav.coefficient_scale();
    Ok(if pattern.uniform_value().is_some() {
        CheckResult::verdict("redfield_davies_equivalence", residual, tol)
    } else {
        CheckResult::report_only("redfield_davies_equivalence", residual, tol)
    })
}

/// Redfield coefficients under the period-`p` sublattice pattern against
/// `1/p` times the uniform-coupling Davies coefficients.
pub fn check_sublattice_equivalence(
    ham: &QuadraticHamiltonian,
    model: &SpectralModel,
    p: usize,
) -> Result<CheckResult> {
    let n = ham.n_sites();
    let red = build_redfield_linear(ham, model, &CouplingPattern::sublattice(n, p)?)?;
    let dav = build_davies_linear(ham, model, &CouplingPattern::uniform(n, 1.0)?)?;
    let residual = coefficient_deviation(&red, &dav, 1.0 / p as f64)?;
    let tol = EQUIVALENCE_TOL * dav.coefficient_scale() / p as f64;
    Ok(CheckResult::verdict(format!("sublattice_p{p}_equivalence"), residual, tol))
}

/// Largest `|γ₁₁(ω) - e^{β(ω-μ)} γ₂₂(-ω)|` over the mode (or Bohr)
/// frequencies of `g`.
pub fn check_kms(g: &GeneratorCoefficients) -> Result<CheckResult> {
    let e = g.ham().frequencies();
    let model = g.model();
    let mut worst = 0.0_f64;
    match g.sector() {
        Sector::ModeOccupation => {
            for &w in e {
                worst = worst.max(model.kms_residual(w)?);
            }
        }
        Sector::SingleParticle => {
            for &a in e {
                for &b in e {
                    let nu = a - b;
                    if nu > 0.0 {
                        worst = worst.max(model.kms_residual(nu)?);
                    }
                }
            }
        }
    }
    Ok(CheckResult::verdict("kms", worst, KMS_TOL))
}

/// Conditions (i)–(iii) on the vacuum ⊕ single-particle space, with jump
/// operators from the eigenvectors of each degenerate block of `R¹`.
pub fn check_detailed_balance(g: &GeneratorCoefficients) -> Result<Vec<CheckResult>> {
    if g.kind() != GeneratorKind::Davies {
        return Err(Error::InvalidParameter(
            "detailed balance is certified for Davies generators".into(),
        ));
    }
    let (r1, r2) = g
        .sandwich_matrices()
        .ok_or_else(|| Error::Unsupported("detailed balance check needs exchange coupling".into()))?;
    let ham = g.ham();
    let n = ham.n_sites();
    let (beta, mu) = (g.model().beta(), g.model().mu());
    let e = ham.frequencies();
    let dim = n + 1;

    // Everything below lives on vacuum ⊕ single-particle modes, where ρ_G is
    // exactly diagonal; a site-basis ρ_G would carry rounding errors that
    // e^{β(ω-μ)} amplifies.
    let floor = e.iter().fold(0.0_f64, |a, &x| a.min(beta * (x - mu)));
    let vac = floor.exp();
    let weights: Vec<f64> = e.iter().map(|&x| (floor - beta * (x - mu)).exp()).collect();
    let z = vac + weights.iter().sum::<f64>();
    let mut diag = vec![vac / z];
    diag.extend(weights.iter().map(|x| x / z));
    let rho = linalg::diag_c(&diag);

    let mut h = CMatrix::zeros(dim, dim);
    h.view_mut((1, 1), (n, n)).copy_from(&(linalg::diag_c(e) + g.lamb_matrix()));
    let comm = linalg::max_abs(&(&rho * &h - &h * &rho));

    let scale = g.coefficient_scale();
    let labels = crate::linalg::cluster_labels(e, 1e-9 * ham.scale());
    let clusters = labels.iter().copied().max().map_or(0, |x| x + 1);
    let (mut res_ii, mut res_iii) = (0.0_f64, 0.0_f64);
    for c in 0..clusters {
        let members: Vec<usize> = (0..n).filter(|&m| labels[m] == c).collect();
        let k = members.len();
        let block1 = CMatrix::from_fn(k, k, |a, b| r1[(members[a], members[b])]);
        let block2 = CMatrix::from_fn(k, k, |a, b| r2[(members[a], members[b])]);
        let omega = members.iter().map(|&m| e[m]).sum::<f64>() / k as f64;
        let x = beta * (omega - mu);
        let (vals, vecs) = linalg::eigh(&block1)?;
        for (idx, &lambda) in vals.iter().enumerate() {
            // L¹ = √λ Σ_m u_m c_m and L² = √ν Σ_m conj(u_m) c_m†, with ν the
            // channel-2 rate along the same direction.
            let u = vecs.column(idx);
            let mut rate2 = C64::new(0.0, 0.0);
            for a in 0..k {
                for b in 0..k {
                    rate2 += u[a] * block2[(a, b)] * u[b].conj();
                }
            }
            let (l1_amp, l2_amp) = (lambda.max(0.0).sqrt(), rate2.re.max(0.0).sqrt());
            if l1_amp == 0.0 && l2_amp == 0.0 {
                continue;
            }
            let mut l1 = CMatrix::zeros(dim, dim);
            let mut l2 = CMatrix::zeros(dim, dim);
            for (a, &m) in members.iter().enumerate() {
                l1[(0, m + 1)] = u[a] * l1_amp;
                l2[(m + 1, 0)] = u[a].conj() * l2_amp;
            }
            let up = C64::new(x.exp(), 0.0);
            let down = C64::new((-x).exp(), 0.0);
            res_ii = res_ii
                .max(linalg::max_abs(&(&rho * &l1 - &l1 * &rho * up)))
                .max(linalg::max_abs(&(&rho * &l2 - &l2 * &rho * down)));
            let rev = l1.adjoint() * C64::new((-0.5 * x).exp(), 0.0) - &l2;
            res_iii = res_iii.max(linalg::max_abs(&rev));
        }
    }
    let tol_i = DETAILED_BALANCE_TOL * scale.max(ham.scale());
    let tol = DETAILED_BALANCE_TOL * scale;
    Ok(vec![
        CheckResult::verdict("detailed_balance_i_commutation", comm, tol_i),
        CheckResult::verdict("detailed_balance_ii_energy_jumps", res_ii, tol),
        CheckResult::verdict("detailed_balance_iii_reversibility", res_iii, tol),
    ])
}

/// Smallest eigenvalue of the Kossakowski matrix.
pub fn check_cp(g: &GeneratorCoefficients) -> Result<CheckResult> {
    let k = kossakowski_matrix(g)?;
    let min = linalg::eigvalsh(&k)?.first().copied().unwrap_or(0.0);
    Ok(CheckResult::lower_bound("complete_positivity", min, CP_TOL))
}

/// `‖L(ρ_G)‖_max` against `1e-10 · max rate`.
pub fn check_gibbs_stationarity(g: &GeneratorCoefficients) -> Result<CheckResult> {
    let ham = g.ham();
    let model = g.model();
    let residual = match g.sector() {
        Sector::SingleParticle => {
            let rho = gibbs_state(ham, model, Sector::SingleParticle)?;
            linalg::max_abs(&g.apply(rho.matrix())?)
        }
        Sector::ModeOccupation if ham.n_sites() <= FOCK_STATIONARITY_SITES.min(MAX_FOCK_SITES) => {
            let rho = gibbs_state(ham, model, Sector::ModeOccupation)?;
            linalg::max_abs(&g.apply(rho.matrix())?)
        }
        Sector::ModeOccupation => {
            let f: Vec<f64> = ham
                .frequencies()
                .iter()
                .map(|&w| {
                    let x = model.beta() * (w - model.mu());
                    if x >= 0.0 {
                        let t = (-x).exp();
                        t / (1.0 + t)
                    } else {
                        1.0 / (1.0 + x.exp())
                    }
                })
                .collect();
            linalg::max_abs(&g.correlation_derivative(&linalg::diag_c(&f))?)
        }
    };
    let rate = g.max_rate();
    let scale = if rate > 0.0 { rate } else { ham.scale() };
    Ok(CheckResult::verdict(
        "gibbs_stationarity",
        residual,
        STATIONARITY_TOL * scale,
    ))
}

/// Every check applicable to `g`.
pub fn certify(g: &GeneratorCoefficients) -> Result<CertificationReport> {
    let mut checks = vec![check_kms(g)?];
    if g.sector() == Sector::ModeOccupation {
        checks.push(check_equivalence(g.ham(), g.model(), g.pattern())?);
        if g.kind() == GeneratorKind::Davies {
            checks.extend(check_detailed_balance(g)?);
        }
    }
    let cp_supported = match g.sector() {
        Sector::ModeOccupation => true,
        Sector::SingleParticle => g.n_sites() <= crate::generators::MAX_KOSSAKOWSKI_SITES,
    };
    if cp_supported {
        checks.push(check_cp(g)?);
    }
    checks.push(check_gibbs_stationarity(g)?);
    Ok(CertificationReport {
        checks,
        metadata: ReportMetadata {
            generator_hash: g.metadata_hash(),
            kind: g.kind(),
            sector: g.sector(),
            n_sites: g.n_sites(),
            model: g.model().clone(),
            code_version: crate::CODE_VERSION.to_string(),
            timestamp: None,
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum EthFamily {
    Gue { j: f64 },
    /// `sizes` are side lengths `L`, `N = L³`.
    Anderson { disorder: f64, j: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EthRow {
    pub n_sites: usize,
    pub samples: usize,
    /// Sample mean of `Σ_j |A_kl|²` averaged over `k ≠ l`.
    pub secular_mean: f64,
    /// Root mean square of `Σ_j A_lk A_mn` over non-resonant quadruples.
    pub nonsecular_rms: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EthReport {
    pub family: EthFamily,
    /// Matrix elements are reported for `N · a_j† a_j`, so that individual
    /// elements between delocalised levels are of order one.
    pub element_scale: String,
    pub rows: Vec<EthRow>,
    pub secular_slope: Option<f64>,
    pub nonsecular_slope: Option<f64>,
}

/// Secular and non-secular sums for one Hamiltonian, unscaled:
/// `(mean_{k≠l} P_kl, mean-square over non-resonant quadruples)` with
/// `P_kl = Σ_j |U_kj|² |U_lj|²`.
pub fn eth_sums(ham: &QuadraticHamiltonian) -> (f64, f64) {
    let n = ham.n_sites();
    let nf = n as f64;
    let abs2 = ham.eigenvectors().map(|z| z.norm_sqr()); // site × level
    let p = abs2.transpose() * &abs2; // level × level
    let diag: f64 = (0..n).map(|k| p[(k, k)]).sum();
    let total: f64 = p.iter().sum();
    let secular = if n > 1 { (total - diag) / (nf * nf - nf) } else { f64::NAN };
    // Σ over all quadruples of |W|² is N; resonant families k=m,l=n and
    // k=l,m=n each contribute X, with overlap Y.
    let x: f64 = p.iter().map(|v| v * v).sum();
    let y: f64 = (0..n).map(|k| p[(k, k)] * p[(k, k)]).sum();
    let count = nf.powi(4) - 2.0 * nf * nf + nf;
    let nonsecular = if count > 0.0 {
        ((nf - 2.0 * x + y) / count).max(0.0)
    } else {
        f64::NAN
    };
    (secular, nonsecular)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn eth_scaling_report(
    family: EthFamily,
    sizes: &[usize],
    samples: usize,
    seed: u64,
) -> Result<EthReport> {
    if sizes.is_empty() || samples == 0 {
        return Err(Error::InvalidParameter("need at least one size and one sample".into()));
    }
    if sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("sizes must be strictly ascending".into()));
    }
    let mut rows = Vec::new();
    for &size in sizes {
        let mut sec = 0.0;
        let mut nonsec = 0.0;
        let mut n_sites = 0;
        for s in 0..samples as u64 {
            let ham = match family {
                EthFamily::Gue { j } => build_gue_sample(size, j, seed, s)?,
                EthFamily::Anderson { disorder, j } => {
                    build_anderson3d_sample(size, disorder, j, seed, s, Boundary::Periodic)?
                }
            };
            n_sites = ham.n_sites();
            let (a, b) = eth_sums(&ham);
            sec += a;
            nonsec += b;
        }
        let nf = n_sites as f64;
        let k = samples as f64;
        let secular_mean = nf * nf * sec / k;
        let nonsecular_rms = nf * nf * (nonsec / k).sqrt();
        rows.push(EthRow {
            n_sites,
            samples,
            secular_mean,
            nonsecular_rms,
            ratio: nonsecular_rms / secular_mean,
        });
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n_sites as f64).collect();
    let secular_slope = loglog_slope(&ns, &rows.iter().map(|r| r.secular_mean).collect::<Vec<_>>());
    let nonsecular_slope =
        loglog_slope(&ns, &rows.iter().map(|r| r.nonsecular_rms).collect::<Vec<_>>());
    Ok(EthReport {
        family,
        element_scale: "N".into(),
        rows,
        secular_slope,
        nonsecular_slope,
    })
}

/// Trace distance helper re-exported for report consumers.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    dynamics::trace_distance(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::Statistics;
    use crate::generators::{build_davies_dephasing, build_redfield_dephasing};
    use crate::hamiltonians::{build_chain, build_gue};
    use proptest::prelude::*;

    fn fermionic() -> SpectralModel {
        SpectralModel::ohmic(Statistics::Fermionic, 5.0, 0.0, 10.0, 0.2).unwrap()
    }

    #[test]
    fn uniform_equivalence_passes() {
        let ham = build_gue(16, 1.0, 3).unwrap();
        let c = check_equivalence(&ham, &fermionic(), &CouplingPattern::uniform(16, 1.0).unwrap()).unwrap();
        assert_eq!(c.passed, Some(true), "{c:?}");
    }

    #[test]
    fn random_pattern_reports_without_verdict() {
        let ham = build_gue(10, 1.0, 3).unwrap();
        let c = check_equivalence(&ham, &fermionic(), &CouplingPattern::random(10, 4).unwrap()).unwrap();
        assert_eq!(c.passed, None);
        assert!(c.residual > 1e-6);
    }

    /// Brute-force `Σ_j J_j² V_mj conj(V_nj)` for the sublattice pattern on
    /// a periodic chain. The diagonal is not `1/p` for mixed-momentum
    /// eigenvectors and modes `N/p` apart in momentum stay coupled, so the
    /// scaled-Davies comparison cannot hold entrywise.
    #[test]
    fn sublattice_overlap_by_direct_summation() {
        let n = 12;
        let ham = build_chain(n, 1.0, Boundary::Periodic).unwrap();
        for p in [2usize, 3, 4] {
            let v = ham.modes();
            let mut s = CMatrix::zeros(n, n);
            for m in 0..n {
                for q in 0..n {
                    for j in (1..=n).filter(|j| j % p == 0) {
                        s[(m, q)] += v[(m, j - 1)] * v[(q, j - 1)].conj();
                    }
                }
            }
            let via = crate::generators::overlap_matrix(&ham, &CouplingPattern::sublattice(n, p).unwrap()).unwrap();
            assert!(linalg::max_abs(&(&s - &via)) < 1e-13);
            // Trace is the number of coupled sites, N/p.
            assert!((s.trace().re - (n / p) as f64).abs() < 1e-12);
            // Plane waves e^{ikj}/√N with k, k' = k + 2π/p differ by a full
            // sublattice period: |S| = 1/p between them.
            let plane = |k: usize| -> Vec<C64> {
                (0..n)
                    .map(|j| C64::from_polar(1.0 / (n as f64).sqrt(), 2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64))
                    .collect()
            };
            let (a, b) = (plane(1), plane(1 + n / p));
            let elem: C64 = (1..=n)
                .filter(|j| j % p == 0)
                .map(|j| a[j - 1] * b[j - 1].conj())
                .sum();
            assert!((elem.norm() - 1.0 / p as f64).abs() < 1e-12);
            let c = check_sublattice_equivalence(&ham, &fermionic(), p).unwrap();
            assert_eq!(c.passed, Some(false));
        }
    }

    #[test]
    fn detailed_balance_passes_and_detects_broken_kms() {
        let ham = build_gue(6, 1.0, 11).unwrap();
        let g = build_davies_linear(&ham, &fermionic(), &CouplingPattern::uniform(6, 1.0).unwrap()).unwrap();
        let checks = check_detailed_balance(&g).unwrap();
        assert!(checks.iter().all(|c| c.passed == Some(true)), "{checks:?}");
        let broken = g.with_channel2_scaled(1.01).unwrap();
        let checks = check_detailed_balance(&broken).unwrap();
        assert_eq!(checks[2].passed, Some(false));
        assert_eq!(checks[0].passed, Some(true));
        assert_eq!(checks[1].passed, Some(true));
        let red = build_redfield_linear(&ham, &fermionic(), &CouplingPattern::uniform(6, 1.0).unwrap()).unwrap();
        assert!(check_detailed_balance(&red).is_err());
    }

    #[test]
    fn decoupled_detailed_balance_is_vacuous() {
        let ham = build_gue(4, 1.0, 2).unwrap();
        let model = fermionic().with_coupling(0.0).unwrap();
        let g = build_davies_linear(&ham, &model, &CouplingPattern::uniform(4, 1.0).unwrap()).unwrap();
        let checks = check_detailed_balance(&g).unwrap();
        assert!(checks.iter().all(|c| c.passed == Some(true)), "{checks:?}");
    }

    #[test]
    fn detailed_balance_with_degenerate_blocks() {
        let ham = build_chain(6, 1.0, Boundary::Periodic).unwrap();
        let g = build_davies_linear(&ham, &fermionic(), &CouplingPattern::random(6, 1).unwrap()).unwrap();
        let checks = check_detailed_balance(&g).unwrap();
        assert!(checks.iter().all(|c| c.passed == Some(true)), "{checks:?}");
    }

    #[test]
    fn complete_positivity_cases() {
        let ham = build_gue(8, 1.0, 5).unwrap();
        let uni = CouplingPattern::uniform(8, 1.0).unwrap();
        let red = build_redfield_linear(&ham, &fermionic(), &uni).unwrap();
        assert_eq!(check_cp(&red).unwrap().passed, Some(true));
        let dav = build_davies_linear(&ham, &fermionic(), &CouplingPattern::random(8, 2).unwrap()).unwrap();
        assert_eq!(check_cp(&dav).unwrap().passed, Some(true));
        let bad = red.with_channel1_entry(0, 1, C64::new(0.01, 0.0)).unwrap();
        let c = check_cp(&bad).unwrap();
        assert_eq!(c.passed, Some(false));
        assert!(c.residual < 0.0);
    }

    #[test]
    fn stationarity_cases() {
        let ham = build_gue(5, 1.0, 6).unwrap();
        let uni = CouplingPattern::uniform(5, 1.0).unwrap();
        for g in [
            build_davies_linear(&ham, &fermionic(), &uni).unwrap(),
            build_redfield_linear(&ham, &fermionic(), &uni).unwrap(),
            build_davies_dephasing(&ham, &SpectralModel::figure_one()).unwrap(),
        ] {
            let c = check_gibbs_stationarity(&g).unwrap();
            assert_eq!(c.passed, Some(true), "{c:?}");
        }
        // Without principal-value shifts KMS alone keeps ρ_G stationary for
        // any pattern; the Lamb terms are what break it.
        let non = build_redfield_linear(&ham, &fermionic().with_eta(true), &CouplingPattern::random(5, 7).unwrap()).unwrap();
        let c = check_gibbs_stationarity(&non).unwrap();
        assert_eq!(c.passed, Some(false), "{c:?}");
        let red = build_redfield_dephasing(&ham, &SpectralModel::figure_one().with_eta(true)).unwrap();
        let c = check_gibbs_stationarity(&red).unwrap();
        assert_eq!(c.passed, Some(false), "{c:?}");
    }

    #[test]
    fn large_system_stationarity_uses_correlations() {
        let ham = build_gue(40, 1.0, 6).unwrap();
        let g = build_davies_linear(&ham, &fermionic(), &CouplingPattern::uniform(40, 1.0).unwrap()).unwrap();
        assert_eq!(check_gibbs_stationarity(&g).unwrap().passed, Some(true));
    }

    #[test]
    fn report_is_deterministic() {
        let ham = build_gue(4, 1.0, 1).unwrap();
        let g = build_davies_linear(&ham, &fermionic(), &CouplingPattern::uniform(4, 1.0).unwrap()).unwrap();
        let a = certify(&g).unwrap();
        let b = certify(&g).unwrap();
        assert_eq!(a, b);
        assert!(a.all_passed(), "{}", a.table());
    }

    #[test]
    fn eth_sums_match_brute_force() {
        let ham = build_gue(5, 1.0, 2).unwrap();
        let u = ham.eigenvectors().adjoint();
        let n = 5;
        let w = |l: usize, k: usize, m: usize, q: usize| -> C64 {
            (0..n).map(|j| u[(l, j)] * u[(k, j)].conj() * u[(m, j)] * u[(q, j)].conj()).sum()
        };
        let (mut sec, mut cnt) = (0.0, 0.0);
        for k in 0..n {
            for l in (0..n).filter(|&l| l != k) {
                sec += w(l, k, k, l).re;
                cnt += 1.0;
            }
        }
        let (mut ms, mut c2) = (0.0, 0.0);
        for l in 0..n {
            for k in 0..n {
                for m in 0..n {
                    for q in 0..n {
                        if (k == m && l == q) || (k == l && m == q) {
                            continue;
                        }
                        ms += w(l, k, m, q).norm_sqr();
                        c2 += 1.0;
                    }
                }
            }
        }
        let (a, b) = eth_sums(&ham);
        assert!((a - sec / cnt).abs() < 1e-14);
        assert!((b - ms / c2).abs() < 1e-14);
    }

    #[test]
    fn single_size_has_no_slope() {
        let r = eth_scaling_report(EthFamily::Gue { j: 1.0 }, &[8], 2, 1).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert!(r.secular_slope.is_none());
    }

    #[test]
    fn slope_of_power_law() {
        let x = [2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        assert!((loglog_slope(&x, &y).unwrap() - 1.5).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn equivalence_implies_cp(n in 2usize..10, seed in 0u64..200) {
            let ham = build_gue(n, 1.0, seed).unwrap();
            let uni = CouplingPattern::uniform(n, 1.0).unwrap();
            let eq = check_equivalence(&ham, &fermionic().with_eta(false), &uni).unwrap();
            let red = build_redfield_linear(&ham, &fermionic(), &uni).unwrap();
            prop_assert_eq!(eq.passed, Some(true));
            prop_assert_eq!(check_cp(&red).unwrap().passed, Some(true));
        }
    }
}
