//! Quadratic (single-particle) Hamiltonians `H = Σ h_jk a_j† a_k`.
//!
//! Mode operators follow `a_j = Σ_m V_mj c_m`: rows of `V` are modes, columns
//! are sites, and `V̄ h Vᵀ = diag(ω)`. Equivalently the columns of
//! `W = Vᵀ` are the normalised eigenvectors of `h`.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};
use crate::rng::{self, StreamTag};

/// Relative Hermiticity tolerance on input hopping matrices.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct QuadraticHamiltonian {
    hopping: CMatrix,
    frequencies: Vec<f64>,
    eigenvectors: CMatrix,
}

impl QuadraticHamiltonian {
    pub fn n_sites(&self) -> usize {
        self.frequencies.len()
    }

    pub fn hopping(&self) -> &CMatrix {
        &self.hopping
    }

    /// Mode frequencies `ω_m`, ascending.
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// Eigenvectors of `h` as columns (site × mode).
    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    /// `V` with `a_j = Σ_m V_mj c_m` (mode × site).
    pub fn modes(&self) -> CMatrix {
        self.eigenvectors.transpose()
    }

    /// Largest |ω|, or 1 for the zero Hamiltonian.
    pub fn scale(&self) -> f64 {
        let s = self.frequencies.iter().fold(0.0_f64, |a, w| a.max(w.abs()));
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }

    /// Half the width of the spectrum; the largest frequency that survives a
    /// constant energy shift.
    pub fn half_bandwidth(&self) -> f64 {
        match (self.frequencies.first(), self.frequencies.last()) {
            (Some(lo), Some(hi)) => 0.5 * (hi - lo),
            _ => 0.0,
        }
    }

    /// `max |V̄ V^T - I|` over entries.
    pub fn unitarity_defect(&self) -> f64 {
        let w = &self.eigenvectors;
        let n = self.n_sites();
        linalg::max_abs(&(w.adjoint() * w - CMatrix::identity(n, n)))
    }

    /// `max |W diag(ω) W† - h|`.
    pub fn reconstruction_defect(&self) -> f64 {
        let w = &self.eigenvectors;
        let rec = w * linalg::diag_c(&self.frequencies) * w.adjoint();
        linalg::max_abs(&(rec - &self.hopping))
    }

    /// Inverse participation ratio `Σ_j |W_jm|⁴` of every mode.
    pub fn inverse_participation(&self) -> Vec<f64> {
        let w = &self.eigenvectors;
        (0..self.n_sites())
            .map(|m| w.column(m).iter().map(|z| z.norm_sqr().powi(2)).sum())
            .collect()
    }

    /// SHA-256 over the row-major little-endian bytes of `h`.
    pub fn hopping_hash(&self) -> String {
        matrix_hash(&self.hopping)
    }

    /// Re-diagonalises after replacing the eigenvectors by `W U` for a
    /// block-unitary `U` acting within degenerate clusters. Used to probe
    /// gauge invariance.
    pub fn regauged(&self, mixing: &CMatrix) -> Result<Self> {
        let n = self.n_sites();
        if mixing.nrows() != n || mixing.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: mixing.nrows(),
            });
        }
        Ok(Self {
            hopping: self.hopping.clone(),
            frequencies: self.frequencies.clone(),
            eigenvectors: &self.eigenvectors * mixing,
        })
    }

    /// Groups of mode indices whose frequencies agree within
    /// `1e-9 · scale()`.
    pub fn degenerate_clusters(&self) -> Vec<Vec<usize>> {
        let labels = linalg::cluster_labels(&self.frequencies, 1e-9 * self.scale());
        let count = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut groups = vec![Vec::new(); count];
        for (m, &l) in labels.iter().enumerate() {
            groups[l].push(m);
        }
        groups
    }
}

pub fn matrix_hash(m: &CMatrix) -> String {
    let mut hasher = Sha256::new();
    hasher.update((m.nrows() as u64).to_le_bytes());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            hasher.update(m[(i, j)].re.to_le_bytes());
            hasher.update(m[(i, j)].im.to_le_bytes());
        }
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn check_hermitian(h: &CMatrix) -> Result<()> {
    linalg::is_square(h)?;
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidParameter("non-finite hopping entry".into()));
    }
    let dev = linalg::hermiticity_defect(h);
    if dev > HERMITIAN_TOL * linalg::max_abs(h).max(1.0) {
        return Err(Error::NotHermitian { deviation: dev });
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian hopping matrix.
pub fn diagonalize(h: CMatrix) -> Result<QuadraticHamiltonian> {
    check_hermitian(&h)?;
    if h.nrows() == 0 {
        return Err(Error::InvalidParameter("empty hopping matrix".into()));
    }
    let (frequencies, eigenvectors) = linalg::eigh(&h)?;
    Ok(QuadraticHamiltonian {
        hopping: h,
        frequencies,
        eigenvectors,
    })
}

/// Reassembles a decomposition produced elsewhere, checking that it
/// reconstructs `h`.
pub fn from_parts(
    hopping: CMatrix,
    frequencies: Vec<f64>,
    eigenvectors: CMatrix,
) -> Result<QuadraticHamiltonian> {
    check_hermitian(&hopping)?;
    let n = hopping.nrows();
    if frequencies.len() != n || eigenvectors.nrows() != n || eigenvectors.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: frequencies.len(),
        });
    }
    let ham = QuadraticHamiltonian {
        hopping,
        frequencies,
        eigenvectors,
    };
    let tol = 1e-9 * ham.scale();
    if ham.unitarity_defect() > 1e-9 || ham.reconstruction_defect() > tol {
        return Err(Error::InvalidParameter(
            "eigenvectors do not diagonalise the hopping matrix".into(),
        ));
    }
    Ok(ham)
}

/// Gaussian unitary ensemble with `E|h_ij|² = J²/N` for every entry.
pub fn build_gue(n: usize, j: f64, seed: u64) -> Result<QuadraticHamiltonian> {
    build_gue_sample(n, j, seed, 0)
}

/// GUE draw from the stream of sample `sample`.
pub fn build_gue_sample(n: usize, j: f64, seed: u64, sample: u64) -> Result<QuadraticHamiltonian> {
    if n == 0 {
        return Err(Error::InvalidParameter("GUE size must be positive".into()));
    }
    if !(j > 0.0 && j.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "GUE scale must be positive, got {j}"
        )));
    }
    let mut rng = rng::stream(seed, StreamTag::Gue, n as u64, sample);
    let sigma = j / (n as f64).sqrt();
    let half = sigma / std::f64::consts::SQRT_2;
    let mut h = CMatrix::zeros(n, n);
    for r in 0..n {
        let d: f64 = rng.sample(StandardNormal);
        h[(r, r)] = C64::new(sigma * d, 0.0);
        for c in (r + 1)..n {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let z = C64::new(half * re, half * im);
            h[(r, c)] = z;
            h[(c, r)] = z.conj();
        }
    }
    diagonalize(h)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Periodic,
    Open,
}

/// Nearest-neighbour hopping `J` on an `L×L×L` cubic lattice with on-site
/// energies uniform on `[-W, W]`. Site index is `x + L y + L² z`.
pub fn build_anderson3d(
    l: usize,
    disorder: f64,
    j: f64,
    seed: u64,
    boundary: Boundary,
) -> Result<QuadraticHamiltonian> {
    build_anderson3d_sample(l, disorder, j, seed, 0, boundary)
}

pub fn build_anderson3d_sample(
    l: usize,
    disorder: f64,
    j: f64,
    seed: u64,
    sample: u64,
    boundary: Boundary,
) -> Result<QuadraticHamiltonian> {
    if l < 2 {
        return Err(Error::InvalidParameter(format!(
            "Anderson side length must be at least 2, got {l}"
        )));
    }
    if !(disorder >= 0.0 && disorder.is_finite() && j.is_finite()) {
        return Err(Error::InvalidParameter(
            "disorder must be nonnegative and hopping finite".into(),
        ));
    }
    let n = l * l * l;
    let mut rng = rng::stream(seed, StreamTag::Anderson, n as u64, sample);
    let mut h = CMatrix::zeros(n, n);
    for i in 0..n {
        let w = if disorder > 0.0 {
            rng.random_range(-disorder..=disorder)
        } else {
            0.0
        };
        h[(i, i)] = C64::new(w, 0.0);
    }
    let index = |x: usize, y: usize, z: usize| x + l * (y + l * z);
    for z in 0..l {
        for y in 0..l {
            for x in 0..l {
                let i = index(x, y, z);
                let forward = [
                    (x + 1, y, z, x + 1 == l),
                    (x, y + 1, z, y + 1 == l),
                    (x, y, z + 1, z + 1 == l),
                ];
                for (xn, yn, zn, wraps) in forward {
                    if wraps && boundary == Boundary::Open {
                        continue;
                    }
                    let k = index(xn % l, yn % l, zn % l);
                    h[(i, k)] += C64::new(j, 0.0);
                    h[(k, i)] += C64::new(j, 0.0);
                }
            }
        }
    }
    diagonalize(h)
}

/// Nearest-neighbour chain with hopping `J`.
pub fn build_chain(n: usize, j: f64, boundary: Boundary) -> Result<QuadraticHamiltonian> {
    if n == 0 {
        return Err(Error::InvalidParameter("chain length must be positive".into()));
    }
    let mut h = CMatrix::zeros(n, n);
    for s in 0..n {
        let next = s + 1;
        if next == n && (boundary == Boundary::Open || n == 1) {
            continue;
        }
        let k = next % n;
        h[(s, k)] += C64::new(j, 0.0);
        h[(k, s)] += C64::new(j, 0.0);
    }
    diagonalize(h)
}

/// Per-site coupling strengths `J_j ≥ 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingPattern {
    weights: Vec<f64>,
}

impl CouplingPattern {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "coupling weights must be nonnegative, found {w}"
            )));
        }
        Ok(Self { weights })
    }

    pub fn uniform(n: usize, j: f64) -> Result<Self> {
        Self::new(vec![j; n])
    }

    /// `J_j = 1` on sites `j ≡ 0 (mod p)` (1-based site labels), else 0.
    pub fn sublattice(n: usize, p: usize) -> Result<Self> {
        if p == 0 || n % p != 0 {
            return Err(Error::InvalidParameter(format!(
                "sublattice period {p} must divide {n}"
            )));
        }
        Self::new((1..=n).map(|j| if j % p == 0 { 1.0 } else { 0.0 }).collect())
    }

    /// Weights uniform on `[0.5, 1.5]` drawn from the pattern stream.
    pub fn random(n: usize, seed: u64) -> Result<Self> {
        let mut rng = rng::stream(seed, StreamTag::Pattern, n as u64, 0);
        Self::new((0..n).map(|_| rng.random_range(0.5..1.5)).collect())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `Some(J)` when every weight equals `J`.
    pub fn uniform_value(&self) -> Option<f64> {
        let first = *self.weights.first()?;
        self.weights.iter().all(|&w| w == first).then_some(first)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    PiecewiseConstant,
    Linear,
}

/// Time-dependent hopping matrix given by knots.
#[derive(Clone, Debug)]
pub struct DriveProtocol {
    times: Vec<f64>,
    knots: Vec<CMatrix>,
    interpolation: Interpolation,
}

impl DriveProtocol {
    pub fn new(knots: Vec<(f64, CMatrix)>, interpolation: Interpolation) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidParameter("drive needs at least one knot".into()));
        }
        let n = knots[0].1.nrows();
        let mut times = Vec::with_capacity(knots.len());
        let mut mats = Vec::with_capacity(knots.len());
        for (t, h) in knots {
            if !t.is_finite() {
                return Err(Error::InvalidParameter("non-finite knot time".into()));
            }
            if let Some(&prev) = times.last() {
                if t <= prev {
                    return Err(Error::InvalidParameter(
                        "knot times must be strictly increasing".into(),
                    ));
                }
            }
            check_hermitian(&h)?;
            if h.nrows() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: h.nrows(),
                });
            }
            times.push(t);
            mats.push(h);
        }
        Ok(Self {
            times,
            knots: mats,
            interpolation,
        })
    }

    pub fn constant(h: CMatrix, duration: f64) -> Result<Self> {
        Self::new(vec![(0.0, h.clone()), (duration, h)], Interpolation::Linear)
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn duration(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn n_sites(&self) -> usize {
        self.knots[0].nrows()
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    /// Interpolated hopping matrix at `t`.
    pub fn hopping_at(&self, t: f64) -> Result<CMatrix> {
        let (lo, hi) = (self.start(), self.duration());
        if !(t >= lo && t <= hi) {
            return Err(Error::Domain(format!(
                "drive time {t} outside [{lo}, {hi}]"
            )));
        }
        let idx = self.times.partition_point(|&x| x <= t);
        let left = idx.saturating_sub(1);
        if self.times[left] == t || left + 1 >= self.times.len() {
            return Ok(self.knots[left].clone());
        }
        match self.interpolation {
            Interpolation::PiecewiseConstant => Ok(self.knots[left].clone()),
            Interpolation::Linear => {
                let (t0, t1) = (self.times[left], self.times[left + 1]);
                let s = (t - t0) / (t1 - t0);
                Ok(self.knots[left].scale(1.0 - s) + self.knots[left + 1].scale(s))
            }
        }
    }

    pub fn sample(&self, t: f64) -> Result<QuadraticHamiltonian> {
        diagonalize(self.hopping_at(t)?)
    }
}

/// `sample_drive(p, t)`.
pub fn sample_drive(p: &DriveProtocol, t: f64) -> Result<QuadraticHamiltonian> {
    p.sample(t)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct HoppingHeader {
    pub n: usize,
    pub sha256: String,
}

/// Writes `h` as `row,col,re,im` triplets (nonzero entries) and returns the
/// JSON header to store next to it.
pub fn write_hopping_csv<W: Write>(h: &CMatrix, out: W) -> Result<HoppingHeader> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["row", "col", "re", "im"])?;
    for i in 0..h.nrows() {
        for j in 0..h.ncols() {
            let z = h[(i, j)];
            if z != C64::new(0.0, 0.0) {
                wtr.write_record([
                    i.to_string(),
                    j.to_string(),
                    format!("{:?}", z.re),
                    format!("{:?}", z.im),
                ])?;
            }
        }
    }
    wtr.flush()?;
    Ok(HoppingHeader {
        n: h.nrows(),
        sha256: matrix_hash(h),
    })
}

pub fn read_hopping_csv<R: BufRead>(input: R, header: &HoppingHeader) -> Result<CMatrix> {
    let mut rdr = csv::Reader::from_reader(input);
    let n = header.n;
    let mut h = CMatrix::zeros(n, n);
    for rec in rdr.records() {
        let rec = rec?;
        let parse_usize = |k: usize| {
            rec.get(k)
                .and_then(|s| s.trim().parse::<usize>().ok())
                .ok_or_else(|| Error::Parse(format!("bad index in row {rec:?}")))
        };
        let parse_f = |k: usize| {
            rec.get(k)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::Parse(format!("bad value in row {rec:?}")))
        };
        let (i, j) = (parse_usize(0)?, parse_usize(1)?);
        if i >= n || j >= n {
            return Err(Error::Parse(format!("index ({i}, {j}) out of range for N = {n}")));
        }
        h[(i, j)] = C64::new(parse_f(2)?, parse_f(3)?);
    }
    if matrix_hash(&h) != header.sha256 {
        return Err(Error::Parse("hopping matrix hash mismatch".into()));
    }
    check_hermitian(&h)?;
    Ok(h)
}

/// Writes `<stem>.csv` and `<stem>.json`.
pub fn export_hopping(h: &CMatrix, stem: impl AsRef<Path>) -> Result<()> {
    let stem = stem.as_ref();
    let csv_file = std::fs::File::create(stem.with_extension("csv"))?;
    let header = write_hopping_csv(h, std::io::BufWriter::new(csv_file))?;
    std::fs::write(
        stem.with_extension("json"),
        serde_json::to_string_pretty(&header)?,
    )?;
    Ok(())
}

pub fn import_hopping(stem: impl AsRef<Path>) -> Result<CMatrix> {
    let stem = stem.as_ref();
    let header: HoppingHeader =
        serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json"))?)?;
    let file = std::fs::File::open(stem.with_extension("csv"))?;
    read_hopping_csv(std::io::BufReader::new(file), &header)
}
