use std::sync::OnceLock;

use crate::bath::SpectralModel;
use crate::error::{Error, Result};
use crate::fock::{FockSpace, SparseOperator};
use crate::hamiltonians::{CouplingPattern, QuadraticHamiltonian};
use crate::linalg::{self, CMatrix, C64, I};

use super::{frequency_clusters, GeneratorCoefficients, GeneratorKind, Terms};

/// `S_mn = Σ_j J_j² V_mj conj(V_nj)`.
pub fn overlap_matrix(ham: &QuadraticHamiltonian, pattern: &CouplingPattern) -> Result<CMatrix> {
    let n = ham.n_sites();
    if pattern.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: pattern.len(),
        });
    }
    let v = ham.modes();
    let weighted = CMatrix::from_fn(n, n, |m, j| v[(m, j)] * pattern.weights()[j].powi(2));
    let s = linalg::matmul(&weighted, &v.adjoint());
    Ok(linalg::hermitian_part(&s))
}

/// `(Γ₁(ω), Γ₂(ω))` for every mode frequency.
fn channel_coefficients(ham: &QuadraticHamiltonian, model: &SpectralModel) -> Result<Vec<(C64, C64)>> {
    ham.frequencies()
        .iter()
        .map(|&w| {
            let s = model.sample(w)?;
            Ok((C64::new(0.5 * s.gamma11, s.eta11), C64::new(0.5 * s.gamma22, -s.eta22)))
        })
        .collect()
}

fn assemble(
    ham: &QuadraticHamiltonian,
    model: &SpectralModel,
    pattern: &CouplingPattern,
    keep: impl Fn(usize, usize) -> bool,
) -> Result<LinearTerms> {
    let n = ham.n_sites();
    let s = overlap_matrix(ham, pattern)?;
    let gammas = channel_coefficients(ham, model)?;
    let mut k1 = CMatrix::zeros(n, n);
    let mut k2 = CMatrix::zeros(n, n);
    for m in 0..n {
        for q in 0..n {
            if keep(m, q) {
                k1[(m, q)] = s[(m, q)] * gammas[m].0;
                k2[(m, q)] = s[(m, q)].conj() * gammas[m].1;
            }
        }
    }
    LinearTerms::new(ham, k1, k2)
}

/// Redfield generator for exchange coupling with per-site strengths.
pub fn build_redfield_linear(
    ham: &QuadraticHamiltonian,
    model: &SpectralModel,
    pattern: &CouplingPattern,
) -> Result<GeneratorCoefficients> {
    let terms = assemble(ham, model, pattern, |_, _| true)?;
    Ok(GeneratorCoefficients::assemble(
        GeneratorKind::Redfield,
        ham,
        model,
        pattern,
        Terms::Linear(terms),
    ))
}

/// Davies generator: only pairs of modes with equal frequency (within
/// `1e-9 · scale`) are coupled.
pub fn build_davies_linear(
    ham: &QuadraticHamiltonian,
    model: &SpectralModel,
    pattern: &CouplingPattern,
) -> Result<GeneratorCoefficients> {
    let labels = frequency_clusters(ham);
    let terms = assemble(ham, model, pattern, |m, q| labels[m] == labels[q])?;
    Ok(GeneratorCoefficients::assemble(
        GeneratorKind::Davies,
        ham,
        model,
        pattern,
        Terms::Linear(terms),
    ))
}

#[derive(Clone, Debug)]
pub(crate) struct LinearTerms {
    k1: CMatrix,
    k2: CMatrix,
    r1: CMatrix,
    r2: CMatrix,
    lamb: CMatrix,
    frequencies: Vec<f64>,
    r1_site: CMatrix,
    r2_site: CMatrix,
    /// One-body part of `P = iH + ½ Σ L†L` in the site basis.
    p_site: CMatrix,
    /// Scalar part of `P` (real).
    p_scalar: f64,
    p_fock: OnceLock<SparseOperator>,
}

impl LinearTerms {
    pub(crate) fn new(ham: &QuadraticHamiltonian, k1: CMatrix, k2: CMatrix) -> Result<Self> {
        let n = ham.n_sites();
        if k1.nrows() != n || k1.ncols() != n || k2.nrows() != n || k2.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: k1.nrows(),
            });
        }
        let r1 = &k1 + k1.adjoint();
        let r2 = &k2 + k2.adjoint();
        let two_i = C64::new(0.0, 2.0);
        let lamb = CMatrix::from_fn(n, n, |a, b| {
            (k1[(b, a)] - k1[(a, b)].conj()) / two_i - (k2[(a, b)] - k2[(b, a)].conj()) / two_i
        });
        let v = ham.modes();
        let v_adj = v.adjoint();
        let v_t = v.transpose();
        let v_bar = v.map(|z| z.conj());
        let r1_site = linalg::matmul(&linalg::matmul(&v_adj, &r1), &v);
        let r2_site = linalg::matmul(&linalg::matmul(&v_t, &r2), &v_bar);
        let lamb_site = linalg::matmul(&linalg::matmul(&v_t, &lamb), &v_bar);
        let p_site = (ham.hopping() + lamb_site) * I
            + (r1_site.transpose() - &r2_site) * C64::new(0.5, 0.0);
        let p_scalar = 0.5 * r2_site.trace().re;
        Ok(Self {
            k1,
            k2,
            r1,
            r2,
            lamb,
            frequencies: ham.frequencies().to_vec(),
            r1_site,
            r2_site,
            p_site,
            p_scalar,
            p_fock: OnceLock::new(),
        })
    }

    pub(crate) fn k1(&self) -> &CMatrix {
        &self.k1
    }
    pub(crate) fn k2(&self) -> &CMatrix {
        &self.k2
    }
    pub(crate) fn r1(&self) -> &CMatrix {
        &self.r1
    }
    pub(crate) fn r2(&self) -> &CMatrix {
        &self.r2
    }
    pub(crate) fn lamb(&self) -> &CMatrix {
        &self.lamb
    }

    pub(crate) fn max_rate(&self) -> f64 {
        (0..self.r1.nrows())
            .map(|m| (self.r1[(m, m)] + self.r2[(m, m)]).re)
            .fold(0.0, f64::max)
    }

    pub(crate) fn secular(&self, ham: &QuadraticHamiltonian) -> Result<Self> {
        let labels = frequency_clusters(ham);
        let mask = |k: &CMatrix| {
            CMatrix::from_fn(k.nrows(), k.ncols(), |m, q| {
                if labels[m] == labels[q] {
                    k[(m, q)]
                } else {
                    C64::new(0.0, 0.0)
                }
            })
        };
        Self::new(ham, mask(&self.k1), mask(&self.k2))
    }

    /// `L(ρ)` on the Fock space in the site basis.
    pub(crate) fn apply_fock(&self, x: &CMatrix) -> Result<CMatrix> {
        let space = FockSpace::new(self.frequencies.len())?;
        let p = self.p_fock.get_or_init(|| space.one_body(&self.p_site));
        let c = C64::new(self.p_scalar, 0.0);
        let px = p.mul_left(x) + x * c;
        let x_adj = x.adjoint();
        let px_adj = p.mul_left(&x_adj) + x_adj * c;
        let mut out = -px - px_adj.adjoint();
        out += space.loss_sandwich(&self.r1_site, x)?;
        out += space.gain_sandwich(&self.r2_site, x)?;
        Ok(out)
    }

    /// `dG/dt` for `G_ab = ⟨c_a† c_b⟩` in the mode basis.
    pub(crate) fn correlation_derivative(&self, g: &CMatrix) -> CMatrix {
        let h = linalg::diag_c(&self.frequencies) + &self.lamb;
        let ht = h.transpose();
        let r2t = self.r2.transpose();
        let damp = &self.r1 + &r2t;
        let half = C64::new(0.5, 0.0);
        (linalg::matmul(&ht, g) - linalg::matmul(g, &ht)) * I
            - (linalg::matmul(&damp, g) + linalg::matmul(g, &damp)) * half
            + r2t
    }
}

impl GeneratorCoefficients {
    /// `dG/dt` of the mode correlation matrix `G_ab = ⟨c_a† c_b⟩`
    /// (mode-occupation sector). Valid for any number of sites.
    pub fn correlation_derivative(&self, g: &CMatrix) -> Result<CMatrix> {
        match self.terms() {
            Terms::Linear(t) => {
                let n = self.n_sites();
                if g.nrows() != n || g.ncols() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: g.nrows(),
                    });
                }
                Ok(t.correlation_derivative(g))
            }
            Terms::Dephasing(_) => Err(Error::Unsupported(
                "correlation dynamics require exchange coupling".into(),
            )),
        }
    }

    /// Steady mode occupations `r₂ / (r₁ + r₂)` of a diagonal generator.
    pub fn steady_occupations(&self) -> Result<Vec<f64>> {
        let (r1, r2) = self
            .sandwich_matrices()
            .ok_or_else(|| Error::Unsupported("occupations require exchange coupling".into()))?;
        (0..r1.nrows())
            .map(|m| {
                let (a, b) = (r1[(m, m)].re, r2[(m, m)].re);
                if a + b > 0.0 {
                    Ok(b / (a + b))
                } else {
                    Err(Error::Domain(format!("mode {m} has no relaxation")))
                }
            })
            .collect()
    }
}
