//! Dense complex linear algebra helpers on top of `nalgebra`.
//!
//! `nalgebra` multiplies complex matrices with a generic kernel that is far
//! slower than its `f64` path, so products of complex matrices are formed from
//! four real products here.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type RMatrix = DMatrix<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Complex matrix held as separate real and imaginary parts.
#[derive(Clone, Debug)]
pub struct SplitMatrix {
    pub re: RMatrix,
    pub im: RMatrix,
}

impl SplitMatrix {
    pub fn from_complex(m: &CMatrix) -> Self {
        Self {
            re: m.map(|z| z.re),
            im: m.map(|z| z.im),
        }
    }

    pub fn to_complex(&self) -> CMatrix {
        self.re.zip_map(&self.im, C64::new)
    }

    pub fn nrows(&self) -> usize {
        self.re.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.re.ncols()
    }

    /// `self * rhs`.
    pub fn mul(&self, rhs: &SplitMatrix) -> SplitMatrix {
        let mut re = &self.re * &rhs.re;
        re.gemm(-1.0, &self.im, &rhs.im, 1.0);
        let mut im = &self.re * &rhs.im;
        im.gemm(1.0, &self.im, &rhs.re, 1.0);
        SplitMatrix { re, im }
    }

    /// `self * rhs` where `rhs` is real.
    pub fn mul_real(&self, rhs: &RMatrix) -> SplitMatrix {
        SplitMatrix {
            re: &self.re * rhs,
            im: &self.im * rhs,
        }
    }

    /// `lhs * self` where `lhs` is real.
    pub fn premul_real(&self, lhs: &RMatrix) -> SplitMatrix {
        SplitMatrix {
            re: lhs * &self.re,
            im: lhs * &self.im,
        }
    }

    /// Elementwise (Hadamard) product.
    pub fn hadamard(&self, rhs: &SplitMatrix) -> SplitMatrix {
        let re = self.re.component_mul(&rhs.re) - self.im.component_mul(&rhs.im);
        let im = self.re.component_mul(&rhs.im) + self.im.component_mul(&rhs.re);
        SplitMatrix { re, im }
    }

    pub fn adjoint(&self) -> SplitMatrix {
        SplitMatrix {
            re: self.re.transpose(),
            im: -self.im.transpose(),
        }
    }

    pub fn conj(&self) -> SplitMatrix {
        SplitMatrix {
            re: self.re.clone(),
            im: -&self.im,
        }
    }
}

/// Complex matrix product through real kernels.
pub fn matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    SplitMatrix::from_complex(a)
        .mul(&SplitMatrix::from_complex(b))
        .to_complex()
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn is_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues in ascending
/// order. Ties keep the solver's original index order.
pub fn eigh(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = is_square(m)?;
    if n == 0 {
        return Ok((Vec::new(), CMatrix::zeros(0, 0)));
    }
    let sym = hermitian_part(m);
    let (raw_values, raw_vectors): (Vec<f64>, CMatrix) = if sym.iter().all(|z| z.im == 0.0) {
        // Real symmetric input keeps real eigenvectors.
        let eig = nalgebra::SymmetricEigen::try_new(sym.map(|z| z.re), f64::EPSILON, 0)
            .ok_or_else(|| Error::Eigensolver("symmetric QR iteration did not converge".into()))?;
        (
            eig.eigenvalues.iter().copied().collect(),
            eig.eigenvectors.map(|x| C64::new(x, 0.0)),
        )
    } else {
        let eig = nalgebra::SymmetricEigen::try_new(sym, f64::EPSILON, 0)
            .ok_or_else(|| Error::Eigensolver("symmetric QR iteration did not converge".into()))?;
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        raw_values[a]
            .partial_cmp(&raw_values[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values: Vec<f64> = order.iter().map(|&k| raw_values[k]).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigensolver("non-finite eigenvalue".into()));
    }
    let vectors = CMatrix::from_fn(n, n, |i, j| raw_vectors[(i, order[j])]);
    Ok((values, vectors))
}

/// `true` when every imaginary part is exactly zero.
pub fn is_real(m: &CMatrix) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigvalsh(m: &CMatrix) -> Result<Vec<f64>> {
    let n = is_square(m)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let vals = nalgebra::SymmetricEigen::try_new(hermitian_part(m), f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigensolver("symmetric QR iteration did not converge".into()))?
        .eigenvalues;
    let mut v: Vec<f64> = vals.iter().copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Ok(v)
}

pub fn diag_c(values: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&DVector::from_iterator(
        values.len(),
        values.iter().map(|&v| C64::new(v, 0.0)),
    ))
}

/// Groups sorted-or-unsorted values into clusters of near-equal values.
///
/// Values closer than `tol` to a neighbour in sorted order are chained into
/// one cluster. Returns the cluster label of each input value; labels follow
/// ascending value order.
pub fn cluster_labels(values: &[f64], tol: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .partial_cmp(&values[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut labels = vec![0; values.len()];
    let mut label = 0;
    for (pos, &idx) in order.iter().enumerate() {
        if pos > 0 && values[idx] - values[order[pos - 1]] > tol {
            label += 1;
        }
        labels[idx] = label;
    }
    labels
}
