//! Fermionic Fock space of `N` sites in the occupation-number basis.
//!
//! Basis state `s` has site `j` occupied iff bit `j` of `s` is set. Creation
//! and annihilation operators carry the Jordan–Wigner sign
//! `(-1)^{#occupied sites below j}`.

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64, ZERO};

/// Largest number of sites whose Fock space is represented densely.
pub const MAX_FOCK_SITES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FockSpace {
    sites: usize,
}

#[inline]
fn sign_below(state: usize, j: usize) -> f64 {
    if (state & ((1usize << j) - 1)).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl FockSpace {
    pub fn new(sites: usize) -> Result<Self> {
        if sites == 0 {
            return Err(Error::InvalidParameter("Fock space needs at least one site".into()));
        }
        if sites > MAX_FOCK_SITES {
            return Err(Error::Unsupported(format!(
                "dense Fock representation limited to {MAX_FOCK_SITES} sites, got {sites}"
            )));
        }
        Ok(Self { sites })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        1 << self.sites
    }

    fn check(&self, m: &CMatrix) -> Result<()> {
        if m.nrows() != self.dim() || m.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: m.nrows(),
            });
        }
        Ok(())
    }

    /// `a_j X`.
    pub fn annihilate_left(&self, j: usize, x: &CMatrix) -> CMatrix {
        let dim = self.dim();
        let bit = 1usize << j;
        let mut out = CMatrix::zeros(dim, dim);
        for r in (0..dim).filter(|r| r & bit == 0) {
            let s = sign_below(r, j);
            for c in 0..dim {
                out[(r, c)] = x[(r | bit, c)] * s;
            }
        }
        out
    }

    /// `a_j† X`.
    pub fn create_left(&self, j: usize, x: &CMatrix) -> CMatrix {
        let dim = self.dim();
        let bit = 1usize << j;
        let mut out = CMatrix::zeros(dim, dim);
        for r in (0..dim).filter(|r| r & bit != 0) {
            let s = sign_below(r, j);
            for c in 0..dim {
                out[(r, c)] = x[(r ^ bit, c)] * s;
            }
        }
        out
    }

    /// `Y a_k†`.
    fn create_right_acc(&self, k: usize, y: &CMatrix, out: &mut CMatrix) {
        let dim = self.dim();
        let bit = 1usize << k;
        for c in (0..dim).filter(|c| c & bit == 0) {
            let s = sign_below(c, k);
            let src = y.column(c | bit);
            let mut dst = out.column_mut(c);
            for r in 0..dim {
                dst[r] += src[r] * s;
            }
        }
    }

    /// `Y a_k`.
    fn annihilate_right_acc(&self, k: usize, y: &CMatrix, out: &mut CMatrix) {
        let dim = self.dim();
        let bit = 1usize << k;
        for c in (0..dim).filter(|c| c & bit != 0) {
            let s = sign_below(c, k);
            let src = y.column(c ^ bit);
            let mut dst = out.column_mut(c);
            for r in 0..dim {
                dst[r] += src[r] * s;
            }
        }
    }

    /// `Σ_jk R_jk a_j X a_k†`.
    pub fn loss_sandwich(&self, r: &CMatrix, x: &CMatrix) -> Result<CMatrix> {
        self.check(x)?;
        let n = self.sites;
        let left: Vec<CMatrix> = (0..n).map(|j| self.annihilate_left(j, x)).collect();
        let mut out = CMatrix::zeros(self.dim(), self.dim());
        for k in 0..n {
            let y = combine(r, k, &left);
            if let Some(y) = y {
                self.create_right_acc(k, &y, &mut out);
            }
        }
        Ok(out)
    }

    /// `Σ_jk R_jk a_j† X a_k`.
    pub fn gain_sandwich(&self, r: &CMatrix, x: &CMatrix) -> Result<CMatrix> {
        self.check(x)?;
        let n = self.sites;
        let left: Vec<CMatrix> = (0..n).map(|j| self.create_left(j, x)).collect();
        let mut out = CMatrix::zeros(self.dim(), self.dim());
        for k in 0..n {
            if let Some(y) = combine(r, k, &left) {
                self.annihilate_right_acc(k, &y, &mut out);
            }
        }
        Ok(out)
    }

    /// Sparse Fock representation of `Σ_jk M_jk a_j† a_k`.
    pub fn one_body(&self, m: &CMatrix) -> SparseOperator {
        let dim = self.dim();
        let n = self.sites;
        let mut entries = Vec::new();
        for s in 0..dim {
            for k in 0..n {
                let kb = 1usize << k;
                if s & kb == 0 {
                    continue;
                }
                let sk = sign_below(s, k);
                let t0 = s ^ kb;
                for j in 0..n {
                    let v = m[(j, k)];
                    if v == ZERO {
                        continue;
                    }
                    let jb = 1usize << j;
                    if t0 & jb != 0 {
                        continue;
                    }
                    let sj = sign_below(t0, j);
                    entries.push((t0 | jb, s, v * (sk * sj)));
                }
            }
        }
        SparseOperator { dim, entries }
    }

    /// Dense `Σ_jk M_jk a_j† a_k`.
    pub fn one_body_dense(&self, m: &CMatrix) -> CMatrix {
        self.one_body(m).to_dense()
    }

    /// Number operator `Σ_j a_j† a_j` as a diagonal.
    pub fn particle_numbers(&self) -> Vec<f64> {
        (0..self.dim()).map(|s| s.count_ones() as f64).collect()
    }

    /// `⟨a_j† a_k⟩ = tr(ρ a_j† a_k)` for all site pairs.
    pub fn correlation_matrix(&self, rho: &CMatrix) -> Result<CMatrix> {
        self.check(rho)?;
        let n = self.sites;
        let mut g = CMatrix::zeros(n, n);
        for j in 0..n {
            for k in 0..n {
                let mut e = CMatrix::zeros(n, n);
                e[(j, k)] = C64::new(1.0, 0.0);
                let op = self.one_body(&e);
                // tr(ρ O) = Σ_{t,s} O_ts ρ_st
                g[(j, k)] = op.entries.iter().map(|&(t, s, v)| v * rho[(s, t)]).sum();
            }
        }
        Ok(g)
    }

    /// Vacuum projector `|0⟩⟨0|`.
    pub fn vacuum(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim(), self.dim());
        m[(0, 0)] = C64::new(1.0, 0.0);
        m
    }

    /// `a_j† |0⟩⟨0| a_j`.
    pub fn single_site_excitation(&self, j: usize) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim(), self.dim());
        m[(1 << j, 1 << j)] = C64::new(1.0, 0.0);
        m
    }
}

fn combine(r: &CMatrix, k: usize, parts: &[CMatrix]) -> Option<CMatrix> {
    let mut acc: Option<CMatrix> = None;
    for (j, p) in parts.iter().enumerate() {
        let c = r[(j, k)];
        if c == ZERO {
            continue;
        }
        match acc.as_mut() {
            Some(a) => a.zip_apply(p, |x, y| *x += y * c),
            None => acc = Some(p * c),
        }
    }
    acc
}

/// Coordinate-list operator on Fock space, entries `(row, col, value)`.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    dim: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl SparseOperator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// `self · X`.
    pub fn mul_left(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, x.ncols());
        for &(t, s, v) in &self.entries {
            for c in 0..x.ncols() {
                out[(t, c)] += v * x[(s, c)];
            }
        }
        out
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for &(t, s, v) in &self.entries {
            out[(t, s)] += v;
        }
        out
    }

    pub fn add_identity(&mut self, c: C64) {
        for s in 0..self.dim {
            self.entries.push((s, s, c));
        }
    }
}

/// Gibbs state `exp(-β Σ (h - μ)_jk a_j† a_k) / Z` on Fock space.
pub fn gibbs(space: &FockSpace, h: &CMatrix, beta: f64, mu: f64) -> Result<CMatrix> {
    let n = space.sites();
    let shifted = h - CMatrix::identity(n, n).scale(mu);
    let k = space.one_body_dense(&shifted);
    let (vals, vecs) = linalg::eigh(&k)?;
    let floor = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = vals.iter().map(|v| (-beta * (v - floor)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let w = linalg::diag_c(&weights.iter().map(|x| x / z).collect::<Vec<_>>());
    Ok(linalg::matmul(&linalg::matmul(&vecs, &w), &vecs.adjoint()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op_annihilate(space: &FockSpace, j: usize) -> CMatrix {
        space.annihilate_left(j, &CMatrix::identity(space.dim(), space.dim()))
    }

    #[test]
    fn canonical_anticommutation() {
        let space = FockSpace::new(3).unwrap();
        let a: Vec<CMatrix> = (0..3).map(|j| op_annihilate(&space, j)).collect();
        let id = CMatrix::identity(8, 8);
        for j in 0..3 {
            for k in 0..3 {
                let ak_dag = a[k].adjoint();
                let anti = &a[j] * &ak_dag + &ak_dag * &a[j];
                let expect = if j == k { id.clone() } else { CMatrix::zeros(8, 8) };
                assert!(linalg::max_abs(&(anti - expect)) < 1e-15);
                let aa = &a[j] * &a[k] + &a[k] * &a[j];
                assert!(linalg::max_abs(&aa) < 1e-15);
            }
        }
    }

    #[test]
    fn sandwiches_match_dense_operators() {
        let space = FockSpace::new(3).unwrap();
        let a: Vec<CMatrix> = (0..3).map(|j| op_annihilate(&space, j)).collect();
        let x = CMatrix::from_fn(8, 8, |i, j| C64::new((i * 3 + j) as f64 * 0.1, (i as f64 - j as f64) * 0.07));
        let r = CMatrix::from_fn(3, 3, |i, j| C64::new(1.0 + i as f64, 0.3 * j as f64));
        let mut loss = CMatrix::zeros(8, 8);
        let mut gain = CMatrix::zeros(8, 8);
        for j in 0..3 {
            for k in 0..3 {
                loss += (&a[j] * &x * a[k].adjoint()) * r[(j, k)];
                gain += (a[j].adjoint() * &x * &a[k]) * r[(j, k)];
            }
        }
        assert!(linalg::max_abs(&(space.loss_sandwich(&r, &x).unwrap() - loss)) < 1e-13);
        assert!(linalg::max_abs(&(space.gain_sandwich(&r, &x).unwrap() - gain)) < 1e-13);
        let mut ob = CMatrix::zeros(8, 8);
        for j in 0..3 {
            for k in 0..3 {
                ob += (a[j].adjoint() * &a[k]) * r[(j, k)];
            }
        }
        assert!(linalg::max_abs(&(space.one_body_dense(&r) - &ob)) < 1e-14);
        assert!(linalg::max_abs(&(space.one_body(&r).mul_left(&x) - &ob * &x)) < 1e-13);
    }

    #[test]
    fn correlation_of_single_excitation() {
        let space = FockSpace::new(4).unwrap();
        let g = space.correlation_matrix(&space.single_site_excitation(2)).unwrap();
        for j in 0..4 {
            for k in 0..4 {
                let expect = if j == 2 && k == 2 { 1.0 } else { 0.0 };
                assert!((g[(j, k)] - C64::new(expect, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn gibbs_occupations_are_fermi() {
        let space = FockSpace::new(2).unwrap();
        let mut h = CMatrix::zeros(2, 2);
        h[(0, 0)] = C64::new(0.4, 0.0);
        h[(1, 1)] = C64::new(-0.3, 0.0);
        let rho = gibbs(&space, &h, 2.0, 0.1).unwrap();
        let g = space.correlation_matrix(&rho).unwrap();
        let f = |e: f64| 1.0 / ((2.0 * (e - 0.1)).exp() + 1.0);
        assert!((g[(0, 0)].re - f(0.4)).abs() < 1e-13);
        assert!((g[(1, 1)].re - f(-0.3)).abs() < 1e-13);
    }

    #[test]
    fn size_limits() {
        assert!(FockSpace::new(0).is_err());
        assert!(matches!(FockSpace::new(11), Err(Error::Unsupported(_))));
    }
}
