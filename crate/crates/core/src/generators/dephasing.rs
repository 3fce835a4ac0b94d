//! Dephasing coupling `Σ_j a_j† a_j ⊗ B_j` restricted to the single-particle
//! sector, in the eigenbasis `|n⟩ = c_n†|0⟩`.
//!
//! With `U = W†` (level × site) the coupling matrices are rank one,
//! `A_j = u_j u_j†`, and `Ã_j = Γ̃ ∘ A_j` with `Γ̃_lk = Γ(E_k - E_l)`. The
//! Redfield dissipator
//!
//! ```text
//! Σ_j Ã_j ρ A_j + A_j ρ Ã_j† - A_j Ã_j ρ - ρ Ã_j† A_j
//! ```
//!
//! contains the Lamb shift of every quadruple and is applied in `O(N³)`
//! through Hadamard factorisations. Resonant (Davies) generators keep only
//! quadruples with `E_k - E_l ≈ E_m - E_n` and are stored sparsely.

use crate::bath::SpectralModel;
use crate::error::{Error, Result};
use crate::hamiltonians::{CouplingPattern, QuadraticHamiltonian};
use crate::linalg::{self, CMatrix, RMatrix, SplitMatrix, C64, I, ZERO};

use super::{GeneratorCoefficients, GeneratorKind, Terms};

/// Largest `N` for which the `N² × N²` Kossakowski matrix is formed.
pub const MAX_KOSSAKOWSKI_SITES: usize = 8;

fn dephasing_gamma(ham: &QuadraticHamiltonian, model: &SpectralModel) -> Result<CMatrix> {
    if model.mu() != 0.0 {
        return Err(Error::InvalidParameter(format!(
            "dephasing baths require mu = 0, got {}",
            model.mu()
        )));
    }
    let e = ham.frequencies();
    let n = e.len();
    let mut gamma = CMatrix::zeros(n, n);
    for l in 0..n {
        for k in 0..n {
            gamma[(l, k)] = model.dephasing_coefficient(e[k] - e[l])?;
        }
    }
    Ok(gamma)
}

/// Redfield dephasing generator with uniform coupling `J_int` (taken from
/// the model).
pub fn build_redfield_dephasing(
    ham: &QuadraticHamiltonian,
    model: &SpectralModel,
) -> Result<GeneratorCoefficients> {
    let gamma = dephasing_gamma(ham, model)?;
    let terms = DephasingTerms::new(ham, gamma, false)?;
    Ok(GeneratorCoefficients::assemble(
        GeneratorKind::Redfield,
        ham,
        model,
        &CouplingPattern::uniform(ham.n_sites(), 1.0)?,
        Terms::Dephasing(terms),
    ))
}

/// Davies dephasing generator: resonant quadruples only.
pub fn build_davies_dephasing(
    ham: &QuadraticHamiltonian,
    model: &SpectralModel,
) -> Result<GeneratorCoefficients> {
    let gamma = dephasing_gamma(ham, model)?;
    let terms = DephasingTerms::new(ham, gamma, true)?;
    Ok(GeneratorCoefficients::assemble(
        GeneratorKind::Davies,
        ham,
        model,
        &CouplingPattern::uniform(ham.n_sites(), 1.0)?,
        Terms::Dephasing(terms),
    ))
}

/// Real or complex factor of a product.
#[derive(Clone, Debug)]
enum Factor {
    Real(RMatrix),
    Complex(SplitMatrix),
}

impl Factor {
    fn new(m: &CMatrix) -> Self {
        if linalg::is_real(m) {
            Factor::Real(m.map(|z| z.re))
        } else {
            Factor::Complex(SplitMatrix::from_complex(m))
        }
    }

    /// `self · x`.
    fn left(&self, x: &SplitMatrix) -> SplitMatrix {
        match self {
            Factor::Real(r) => x.premul_real(r),
            Factor::Complex(c) => c.mul(x),
        }
    }

    /// `x · self`.
    fn right(&self, x: &SplitMatrix) -> SplitMatrix {
        match self {
            Factor::Real(r) => x.mul_real(r),
            Factor::Complex(c) => x.mul(c),
        }
    }
}

#[derive(Clone, Debug)]
struct Quad {
    l: usize,
    n: usize,
    k: usize,
    m: usize,
    coeff: C64,
}

#[derive(Clone, Debug)]
enum Form {
    Full {
        /// `Σ_j A_j Ã_j`.
        mm: CMatrix,
        u: Factor,
        u_adj: Factor,
        gamma: Factor,
        u_split: SplitMatrix,
        u_conj: SplitMatrix,
        mm_split: Factor,
    },
    Resonant {
        entries: Vec<Quad>,
        /// Sparse `Σ_l Γ(E_k - E_l) W_lkml` as `(m, k, value)`.
        left: Vec<(usize, usize, C64)>,
    },
}

#[derive(Clone, Debug)]
pub(crate) struct DephasingTerms {
    /// `U = W†`.
    u: CMatrix,
    energies: Vec<f64>,
    gamma: CMatrix,
    form: Form,
}

/// `W_lkmn = Σ_j U_lj conj(U_kj) U_mj conj(U_nj)`.
fn weight(u: &CMatrix, l: usize, k: usize, m: usize, n: usize) -> C64 {
    (0..u.ncols())
        .map(|j| u[(l, j)] * u[(k, j)].conj() * u[(m, j)] * u[(n, j)].conj())
        .sum()
}

impl DephasingTerms {
    pub(crate) fn new(ham: &QuadraticHamiltonian, gamma: CMatrix, resonant: bool) -> Result<Self> {
        let n = ham.n_sites();
        if gamma.nrows() != n || gamma.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: gamma.nrows(),
            });
        }
        let u = ham.eigenvectors().adjoint();
        let energies = ham.frequencies().to_vec();
        let form = if resonant {
            Self::resonant_form(&u, &energies, &gamma, ham.scale())
        } else {
            Self::full_form(&u, &gamma)
        };
        Ok(Self {
            u,
            energies,
            gamma,
            form,
        })
    }

    fn full_form(u: &CMatrix, gamma: &CMatrix) -> Form {
        let n = u.nrows();
        let abs2 = u.map(|z| C64::new(z.norm_sqr(), 0.0));
        // P_jk = Σ_l |U_lj|² Γ̃_lk
        let p = abs2.transpose() * gamma;
        let u_adj = u.adjoint();
        let masked = CMatrix::from_fn(n, n, |j, k| u_adj[(j, k)] * p[(j, k)]);
        let mm = u * masked;
        Form::Full {
            u: Factor::new(u),
            u_adj: Factor::new(&u_adj),
            gamma: Factor::new(gamma),
            u_split: SplitMatrix::from_complex(u),
            u_conj: SplitMatrix::from_complex(&u.map(|z| z.conj())),
            mm_split: Factor::new(&mm),
            mm,
        }
    }

    fn resonant_form(u: &CMatrix, energies: &[f64], gamma: &CMatrix, scale: f64) -> Form {
        let n = energies.len();
        let mut bohr = Vec::with_capacity(n * n);
        for k in 0..n {
            for l in 0..n {
                bohr.push(energies[k] - energies[l]);
            }
        }
        let labels = linalg::cluster_labels(&bohr, 1e-9 * scale);
        let count = labels.iter().copied().max().map_or(0, |x| x + 1);
        let mut groups: Vec<Vec<(usize, usize)>> = vec![Vec::new(); count];
        for (idx, &c) in labels.iter().enumerate() {
            groups[c].push((idx / n, idx % n));
        }
        let mut entries = Vec::new();
        let mut left = CMatrix::zeros(n, n);
        for group in &groups {
            for &(k, l) in group {
                for &(m, q) in group {
                    let w = weight(u, l, k, m, q);
                    let coeff = (gamma[(l, k)] + gamma[(q, m)].conj()) * w;
                    entries.push(Quad {
                        l,
                        n: q,
                        k,
                        m,
                        coeff,
                    });
                    if q == l {
                        left[(m, k)] += gamma[(l, k)] * w;
                    }
                }
            }
        }
        let left = (0..n)
            .flat_map(|m| (0..n).map(move |k| (m, k)))
            .filter(|&(m, k)| left[(m, k)] != ZERO)
            .map(|(m, k)| (m, k, left[(m, k)]))
            .collect();
        Form::Resonant { entries, left }
    }

    pub(crate) fn gamma(&self) -> &CMatrix {
        &self.gamma
    }

    pub(crate) fn to_eigen(&self, rho: &CMatrix) -> CMatrix {
        linalg::matmul(&linalg::matmul(&self.u, rho), &self.u.adjoint())
    }

    pub(crate) fn from_eigen(&self, x: &CMatrix) -> CMatrix {
        linalg::matmul(&linalg::matmul(&self.u.adjoint(), x), &self.u)
    }

    pub(crate) fn coefficient_scale(&self) -> f64 {
        2.0 * linalg::max_abs(&self.gamma)
    }

    /// Largest total transition rate out of one level, `Σ_l γ(E_k - E_l) W_lkkl`.
    pub(crate) fn max_rate(&self) -> f64 {
        let n = self.energies.len();
        let abs2 = self.u.map(|z| z.norm_sqr());
        let overlap = &abs2 * abs2.transpose();
        (0..n)
            .map(|k| {
                (0..n)
                    .map(|l| 2.0 * self.gamma[(l, k)].re * overlap[(l, k)])
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// `Σ_j Ã_j x A_j` through Hadamard factorisations.
    fn sandwich(&self, x: &SplitMatrix) -> SplitMatrix {
        match &self.form {
            Form::Full {
                u,
                u_adj,
                gamma,
                u_split,
                u_conj,
                ..
            } => {
                let b = u.right(x).hadamard(u_conj);
                let c = gamma.left(&b).hadamard(u_split);
                u_adj.right(&c)
            }
            Form::Resonant { .. } => unreachable!("resonant form applies entries directly"),
        }
    }

    pub(crate) fn apply_eigen(&self, x: &CMatrix) -> CMatrix {
        let n = self.energies.len();
        let e = &self.energies;
        match &self.form {
            Form::Full { mm_split, .. } => {
                let hermitian = linalg::hermiticity_defect(x) == 0.0;
                let xs = SplitMatrix::from_complex(x);
                let t = self.sandwich(&xs);
                let mx = mm_split.left(&xs);
                let mut y = SplitMatrix {
                    re: &t.re - &mx.re,
                    im: &t.im - &mx.im,
                };
                // -i E x
                for c in 0..n {
                    for r in 0..n {
                        y.re[(r, c)] += e[r] * xs.im[(r, c)];
                        y.im[(r, c)] -= e[r] * xs.re[(r, c)];
                    }
                }
                if hermitian {
                    let ya = y.adjoint();
                    return SplitMatrix {
                        re: &y.re + &ya.re,
                        im: &y.im + &ya.im,
                    }
                    .to_complex();
                }
                // General input: the conjugate half is the adjoint of the map
                // applied to x†.
                let xa = xs.adjoint();
                let t2 = self.sandwich(&xa);
                let mx2 = mm_split.left(&xa);
                let mut y2 = SplitMatrix {
                    re: &t2.re - &mx2.re,
                    im: &t2.im - &mx2.im,
                };
                for c in 0..n {
                    for r in 0..n {
                        y2.re[(r, c)] += e[r] * xa.im[(r, c)];
                        y2.im[(r, c)] -= e[r] * xa.re[(r, c)];
                    }
                }
                let y2a = y2.adjoint();
                SplitMatrix {
                    re: &y.re + &y2a.re,
                    im: &y.im + &y2a.im,
                }
                .to_complex()
            }
            Form::Resonant { entries, left } => {
                let mut out = CMatrix::from_fn(n, n, |r, c| -I * (e[r] - e[c]) * x[(r, c)]);
                for q in entries {
                    out[(q.l, q.n)] += q.coeff * x[(q.k, q.m)];
                }
                for &(m, k, v) in left {
                    // -Lft x - x Lft†
                    for c in 0..n {
                        out[(m, c)] -= v * x[(k, c)];
                    }
                    let vc = v.conj();
                    for r in 0..n {
                        out[(r, m)] -= x[(r, k)] * vc;
                    }
                }
                out
            }
        }
    }

    /// Lamb-shift matrix in the eigenbasis,
    /// `(H_LS)_mk = Σ_l (Γ(E_k - E_l) - conj Γ(E_m - E_l)) / 2i · W_lkml`,
    /// restricted to retained quadruples.
    pub(crate) fn lamb_matrix(&self) -> CMatrix {
        let n = self.energies.len();
        let two_i = C64::new(0.0, 2.0);
        match &self.form {
            Form::Full { mm, .. } => {
                // Σ_l Γ_lk W_lkml = (Σ_j A_j Ã_j)_mk; the conjugate part is its adjoint.
                (mm - mm.adjoint()) / two_i
            }
            Form::Resonant { left, .. } => {
                let mut l = CMatrix::zeros(n, n);
                for &(m, k, v) in left {
                    l[(m, k)] += v / two_i;
                    l[(k, m)] -= v.conj() / two_i;
                }
                l
            }
        }
    }

    pub(crate) fn kossakowski(&self) -> Result<CMatrix> {
        let n = self.energies.len();
        if n > MAX_KOSSAKOWSKI_SITES {
            return Err(Error::Unsupported(format!(
                "dephasing Kossakowski matrix limited to N <= {MAX_KOSSAKOWSKI_SITES}, got {n}"
            )));
        }
        let idx = |a: usize, b: usize| a * n + b;
        let mut kos = CMatrix::zeros(n * n, n * n);
        match &self.form {
            Form::Full { .. } => {
                for l in 0..n {
                    for k in 0..n {
                        for m in 0..n {
                            for q in 0..n {
                                let c = (self.gamma[(l, k)] + self.gamma[(q, m)].conj())
                                    * weight(&self.u, l, k, m, q);
                                kos[(idx(l, k), idx(q, m))] = c;
                            }
                        }
                    }
                }
            }
            Form::Resonant { entries, .. } => {
                for qd in entries {
                    kos[(idx(qd.l, qd.k), idx(qd.n, qd.m))] += qd.coeff;
                }
            }
        }
        Ok(kos)
    }
}
