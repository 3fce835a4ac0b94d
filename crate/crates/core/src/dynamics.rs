//! Time evolution under a generator, Gibbs states and trace distances.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bath::{SpectralModel, Statistics};
use crate::error::{Error, Result};
use crate::fock::{self, FockSpace};
use crate::generators::{instantaneous_davies, GeneratorCoefficients, GeneratorKind, Sector};
use crate::hamiltonians::{CouplingPattern, DriveProtocol, QuadraticHamiltonian};
use crate::linalg::{self, CMatrix, C64};

/// Hermiticity and trace tolerance of a valid density matrix.
pub const DENSITY_TOL: f64 = 1e-10;
/// Smallest admissible eigenvalue of a valid density matrix.
pub const PSD_TOL: f64 = 1e-8;
/// Trace drift that aborts an integration.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-6;
/// Negative eigenvalue that aborts an integration.
pub const PSD_ABORT: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        linalg::is_square(&matrix)?;
        if matrix.nrows() == 0 {
            return Err(Error::InvalidParameter("empty density matrix".into()));
        }
        let herm = linalg::hermiticity_defect(&matrix);
        if herm > DENSITY_TOL {
            return Err(Error::NotHermitian { deviation: herm });
        }
        let tr = matrix.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > DENSITY_TOL {
            return Err(Error::InvalidParameter(format!("trace {tr} differs from 1")));
        }
        let min = linalg::eigvalsh(&matrix)?[0];
        if min < -PSD_TOL {
            return Err(Error::InvalidParameter(format!(
                "density matrix has negative eigenvalue {min:e}"
            )));
        }
        Ok(Self { matrix })
    }

    /// Pure state `|ψ⟩⟨ψ|` after normalising `ψ`.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidParameter("zero state vector".into()));
        }
        let n = psi.len();
        Self::new(CMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj() / (norm * norm)))
    }

    /// Single-particle state `a_j†|0⟩⟨0|a_j` on `n` sites.
    pub fn site_excitation(n: usize, j: usize) -> Result<Self> {
        if j >= n {
            return Err(Error::InvalidParameter(format!("site {j} out of range")));
        }
        let mut m = CMatrix::zeros(n, n);
        m[(j, j)] = C64::new(1.0, 0.0);
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }
}

/// States sampled on a time grid, stored in the site basis.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CMatrix>,
    pub generator_kind: GeneratorKind,
    pub sector: Sector,
    pub step: f64,
    pub generator_hash: String,
    /// Smallest eigenvalue over all snapshots; negative values can only
    /// occur for Redfield generators, which are not aborted on them.
    pub min_eigenvalue: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// Site occupations `⟨a_j† a_j⟩`.
    Occupations,
    /// Every matrix entry, real and imaginary parts.
    Full,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectorySidecar {
    pub generator_kind: GeneratorKind,
    pub sector: Sector,
    pub generator_hash: String,
    pub step: f64,
    pub trace_drift_limit: f64,
    pub psd_abort: f64,
    pub observable: Observable,
    pub min_eigenvalue: f64,
    pub code_version: String,
}

impl Trajectory {
    /// Site occupations of snapshot `i`.
    pub fn occupations(&self, i: usize) -> Result<Vec<f64>> {
        let rho = &self.states[i];
        match self.sector {
            Sector::SingleParticle => Ok((0..rho.nrows()).map(|j| rho[(j, j)].re).collect()),
            Sector::ModeOccupation => {
                let sites = rho.nrows().trailing_zeros() as usize;
                let g = FockSpace::new(sites)?.correlation_matrix(rho)?;
                Ok((0..sites).map(|j| g[(j, j)].re).collect())
            }
        }
    }

    pub fn write_csv<W: Write>(&self, out: W, observable: Observable) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let dim = self.states.first().map_or(0, |s| s.nrows());
        let mut header = vec!["t".to_string()];
        match observable {
            Observable::Occupations => {
                let sites = match self.sector {
                    Sector::SingleParticle => dim,
                    Sector::ModeOccupation => dim.trailing_zeros() as usize,
                };
                header.extend((0..sites).map(|j| format!("n{j}")));
            }
            Observable::Full => {
                for r in 0..dim {
                    for c in 0..dim {
                        header.push(format!("re_{r}_{c}"));
                        header.push(format!("im_{r}_{c}"));
                    }
                }
            }
        }
        wtr.write_record(&header)?;
        for (i, &t) in self.times.iter().enumerate() {
            let mut row = vec![format!("{t}")];
            match observable {
                Observable::Occupations => {
                    row.extend(self.occupations(i)?.iter().map(|x| format!("{x}")));
                }
                Observable::Full => {
                    let s = &self.states[i];
                    for r in 0..dim {
                        for c in 0..dim {
                            row.push(format!("{}", s[(r, c)].re));
                            row.push(format!("{}", s[(r, c)].im));
                        }
                    }
                }
            }
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn sidecar(&self, observable: Observable) -> TrajectorySidecar {
        TrajectorySidecar {
            generator_kind: self.generator_kind,
            sector: self.sector,
            generator_hash: self.generator_hash.clone(),
            step: self.step,
            trace_drift_limit: TRACE_DRIFT_LIMIT,
            psd_abort: PSD_ABORT,
            observable,
            min_eigenvalue: self.min_eigenvalue,
            code_version: crate::CODE_VERSION.to_string(),
        }
    }

    /// Writes `<stem>.csv` and `<stem>.json`.
    pub fn export(&self, stem: impl AsRef<Path>, observable: Observable) -> Result<()> {
        let stem = stem.as_ref();
        let file = std::fs::File::create(stem.with_extension("csv"))?;
        self.write_csv(std::io::BufWriter::new(file), observable)?;
        std::fs::write(
            stem.with_extension("json"),
            serde_json::to_string_pretty(&self.sidecar(observable))?,
        )?;
        Ok(())
    }
}

/// `min(0.05 / ‖h‖, 0.05 / max rate)`.
pub fn default_step(g: &GeneratorCoefficients) -> f64 {
    let h = 0.05 / g.ham().scale();
    let rate = g.max_rate();
    if rate > 0.0 {
        h.min(0.05 / rate)
    } else {
        h
    }
}

/// Uniform grid `0, t_max/(n-1), …, t_max`.
pub fn uniform_grid(t_max: f64, n_points: usize) -> Vec<f64> {
    if n_points <= 1 {
        return vec![0.0];
    }
    (0..n_points)
        .map(|i| t_max * i as f64 / (n_points - 1) as f64)
        .collect()
}

/// Number of RK4 steps in each grid interval.
fn steps_per_interval(grid: &[f64], step: f64) -> Result<Vec<usize>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {step}")));
    }
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty time grid".into()));
    }
    grid.windows(2)
        .map(|w| {
            let dt = w[1] - w[0];
            if !(dt > 0.0) {
                return Err(Error::InvalidParameter("time grid must be strictly ascending".into()));
            }
            let k = (dt / step).round();
            if k < 1.0 || (k * step - dt).abs() > 1e-9 * dt.max(1.0) {
                return Err(Error::InvalidParameter(format!(
                    "step {step} does not divide grid spacing {dt}"
                )));
            }
            Ok(k as usize)
        })
        .collect()
}

fn axpy(y: &CMatrix, a: f64, x: &CMatrix) -> CMatrix {
    y.zip_map(x, |p, q| p + q * a)
}

fn rk4_step<F: FnMut(f64, &CMatrix) -> Result<CMatrix>>(
    f: &mut F,
    t: f64,
    x: &CMatrix,
    h: f64,
) -> Result<CMatrix> {
    let k1 = f(t, x)?;
    let k2 = f(t + 0.5 * h, &axpy(x, 0.5 * h, &k1))?;
    let k3 = f(t + 0.5 * h, &axpy(x, 0.5 * h, &k2))?;
    let k4 = f(t + h, &axpy(x, h, &k3))?;
    let mut out = x.clone();
    out.zip_zip_apply(&k1, &k4, |o, a, d| *o += (a + d) * (h / 6.0));
    out.zip_zip_apply(&k2, &k3, |o, b, c| *o += (b + c) * (h / 3.0));
    Ok(out)
}

/// Validates a snapshot and returns its smallest eigenvalue. Generators of
/// GKLS form abort on negative eigenvalues below `-PSD_ABORT`; Redfield
/// generators are not completely positive in general, so for them the
/// eigenvalue is only reported.
fn check_snapshot(x: &CMatrix, t: f64, trace0: f64, enforce_psd: bool) -> Result<f64> {
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Integration {
            time: t,
            reason: "non-finite state".into(),
        });
    }
    let snap = linalg::hermitian_part(x);
    let tr = snap.trace().re;
    if (tr - trace0).abs() > TRACE_DRIFT_LIMIT {
        return Err(Error::Integration {
            time: t,
            reason: format!("trace drifted to {tr}"),
        });
    }
    let min = linalg::eigvalsh(&snap)?[0];
    if enforce_psd && min < -PSD_ABORT {
        return Err(Error::Integration {
            time: t,
            reason: format!("negative eigenvalue {min:e}"),
        });
    }
    Ok(min)
}

/// Classical fixed-step RK4 on `dρ/dt = L(ρ)`, sampled at `grid`.
pub fn evolve(
    g: &GeneratorCoefficients,
    rho0: &DensityMatrix,
    grid: &[f64],
    step: f64,
) -> Result<Trajectory> {
    let counts = steps_per_interval(grid, step)?;
    let dim = g.dim()?;
    if rho0.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: rho0.dim(),
        });
    }
    let mut x = linalg::hermitian_part(&g.to_working(rho0.matrix()));
    let trace0 = x.trace().re;
    let mut states = vec![linalg::hermitian_part(rho0.matrix())];
    let enforce_psd = g.kind() != GeneratorKind::Redfield;
    let mut min_eigenvalue = linalg::eigvalsh(&x)?[0];
    let mut f = |_t: f64, y: &CMatrix| g.apply_working(y);
    for (i, &k) in counts.iter().enumerate() {
        let t0 = grid[i];
        let h = (grid[i + 1] - t0) / k as f64;
        for s in 0..k {
            x = rk4_step(&mut f, t0 + s as f64 * h, &x, h)?;
        }
        let min = check_snapshot(&x, grid[i + 1], trace0, enforce_psd)?;
        min_eigenvalue = min_eigenvalue.min(min);
        states.push(linalg::hermitian_part(&g.from_working(&x)));
    }
    Ok(Trajectory {
        times: grid.to_vec(),
        states,
        generator_kind: g.kind(),
        sector: g.sector(),
        step,
        generator_hash: g.metadata_hash(),
        min_eigenvalue,
    })
}

/// RK4 for the mode correlation matrix `G_ab = ⟨c_a† c_b⟩` of an exchange
/// generator; works for any number of sites.
pub fn evolve_correlations(
    g: &GeneratorCoefficients,
    g0: &CMatrix,
    grid: &[f64],
    step: f64,
) -> Result<Vec<CMatrix>> {
    let counts = steps_per_interval(grid, step)?;
    let mut x = g0.clone();
    let mut out = vec![x.clone()];
    let mut f = |_t: f64, y: &CMatrix| g.correlation_derivative(y);
    for (i, &k) in counts.iter().enumerate() {
        let h = (grid[i + 1] - grid[i]) / k as f64;
        for s in 0..k {
            x = rk4_step(&mut f, grid[i] + s as f64 * h, &x, h)?;
        }
        out.push(linalg::hermitian_part(&x));
    }
    Ok(out)
}

/// Closed-form mode occupations of a Davies exchange generator,
/// `n_m(t) = n_m^∞ + (n_m(0) - n_m^∞) e^{-Γ_m t}`. Returns one row per time.
pub fn occupation_relaxation(
    g: &GeneratorCoefficients,
    n0: &[f64],
    times: &[f64],
) -> Result<Vec<Vec<f64>>> {
    if g.kind() != GeneratorKind::Davies || g.sector() != Sector::ModeOccupation {
        return Err(Error::InvalidParameter(
            "closed-form relaxation needs a Davies exchange generator".into(),
        ));
    }
    if g.model().statistics() != Statistics::Fermionic {
        return Err(Error::Unsupported("closed-form relaxation assumes fermionic baths".into()));
    }
    if n0.len() != g.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: g.n_sites(),
            got: n0.len(),
        });
    }
    let (r1, r2) = g.sandwich_matrices().expect("exchange generator");
    let n = n0.len();
    let rates: Vec<f64> = (0..n).map(|m| (r1[(m, m)] + r2[(m, m)]).re).collect();
    let steady = g.steady_occupations()?;
    Ok(times
        .iter()
        .map(|&t| {
            (0..n)
                .map(|m| steady[m] + (n0[m] - steady[m]) * (-rates[m] * t).exp())
                .collect()
        })
        .collect())
}

/// `‖a - b‖₁`: sum of absolute eigenvalues of the Hermitian difference.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: b.nrows(),
        });
    }
    let d = linalg::hermitian_part(&(a - b));
    Ok(linalg::eigvalsh(&d)?.iter().map(|x| x.abs()).sum())
}

/// Mode Gibbs state: on the Fock space for the mode-occupation sector, and
/// `diag(e^{-β(ω_m - μ)}) / Z` rotated to sites for the single-particle
/// sector.
pub fn gibbs_state(
    ham: &QuadraticHamiltonian,
    model: &SpectralModel,
    sector: Sector,
) -> Result<DensityMatrix> {
    let (beta, mu) = (model.beta(), model.mu());
    if model.statistics() == Statistics::Bosonic && sector == Sector::ModeOccupation {
        let lowest = ham.frequencies()[0];
        if mu >= lowest {
            return Err(Error::Domain(format!(
                "bosonic chemical potential {mu} must lie below the lowest mode {lowest}"
            )));
        }
    }
    let matrix = match sector {
        Sector::ModeOccupation => {
            let space = FockSpace::new(ham.n_sites())?;
            fock::gibbs(&space, ham.hopping(), beta, mu)?
        }
        Sector::SingleParticle => single_particle_gibbs(ham, beta, mu),
    };
    DensityMatrix::new(linalg::hermitian_part(&matrix))
}

pub(crate) fn single_particle_gibbs(ham: &QuadraticHamiltonian, beta: f64, mu: f64) -> CMatrix {
    let e = ham.frequencies();
    let floor = e[0];
    let w: Vec<f64> = e.iter().map(|x| (-beta * (x - floor)).exp()).collect();
    let z: f64 = w.iter().sum();
    let _ = mu; // cancels after normalisation within the sector
    let d = linalg::diag_c(&w.iter().map(|x| x / z).collect::<Vec<_>>());
    let wv = ham.eigenvectors();
    linalg::matmul(&linalg::matmul(wv, &d), &wv.adjoint())
}

/// RK4 where every stage uses the Davies generator of the instantaneous
/// Hamiltonian.
pub fn evolve_driven(
    p: &DriveProtocol,
    model: &SpectralModel,
    pattern: &CouplingPattern,
    rho0: &DensityMatrix,
    grid: &[f64],
    step: f64,
) -> Result<Trajectory> {
    let counts = steps_per_interval(grid, step)?;
    if grid[0] < p.start() || grid[grid.len() - 1] > p.duration() + 1e-12 {
        return Err(Error::InvalidParameter("drive protocol does not cover the time grid".into()));
    }
    let clamp = |t: f64| t.min(p.duration());
    let mut cache: Option<(f64, GeneratorCoefficients)> = None;
    let mut f = |t: f64, y: &CMatrix| -> Result<CMatrix> {
        let t = clamp(t);
        let fresh = !matches!(&cache, Some((tc, _)) if *tc == t);
        if fresh {
            cache = Some((t, instantaneous_davies(p, model, pattern, t)?));
        }
        cache.as_ref().expect("generator cached").1.apply(y)
    };
    let mut x = linalg::hermitian_part(rho0.matrix());
    let trace0 = x.trace().re;
    let mut states = vec![x.clone()];
    let mut min_eigenvalue = linalg::eigvalsh(&x)?[0];
    for (i, &k) in counts.iter().enumerate() {
        let h = (grid[i + 1] - grid[i]) / k as f64;
        for s in 0..k {
            x = rk4_step(&mut f, grid[i] + s as f64 * h, &x, h)?;
        }
        min_eigenvalue = min_eigenvalue.min(check_snapshot(&x, grid[i + 1], trace0, true)?);
        states.push(linalg::hermitian_part(&x));
    }
    let g_end = instantaneous_davies(p, model, pattern, clamp(grid[grid.len() - 1]))?;
    Ok(Trajectory {
        times: grid.to_vec(),
        states,
        generator_kind: GeneratorKind::Davies,
        sector: Sector::ModeOccupation,
        step,
        generator_hash: g_end.metadata_hash(),
        min_eigenvalue,
    })
}
