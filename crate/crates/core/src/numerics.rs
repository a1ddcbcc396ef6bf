//! Small dense complex linear algebra shared by every other module.
//!
//! Everything here targets the tiny dimensions of this problem (beamformers
//! and channel matrices of dimension at most a couple dozen), so the
//! implementations favour robustness and determinism over asymptotics:
//! Hermitian eigendecomposition is a cyclic Jacobi sweep, factorizations are
//! dense Cholesky.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex column vector. Channel vectors and beamformers are plain `Vec`s;
/// the operations below validate dimensions where it matters.
pub type CVector = Vec<Complex64>;

/// Hermitian inner product `a^H b` (conjugates `a`, not `b`).
pub fn hdot(a: &[Complex64], b: &[Complex64]) -> Result<Complex64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "hdot: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x.conj() * y).sum())
}

/// Squared Euclidean norm.
pub fn norm_sq(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Euclidean norm.
pub fn norm(a: &[Complex64]) -> f64 {
    norm_sq(a).sqrt()
}

/// Returns `f / ||f||`.
pub fn unit_align(f: &[Complex64]) -> Result<CVector> {
    let n = norm(f);
    if n <= 0.0 || !n.is_finite() {
        return Err(Error::DegenerateInput(
            "unit_align: zero or non-finite vector".into(),
        ));
    }
    Ok(f.iter().map(|x| x / n).collect())
}

/// Dense Hermitian matrix in row-major full storage.
///
/// The constructor enforces conjugate symmetry; builders such as [`outer`]
/// and [`CHermitian::identity`] produce exactly Hermitian data.
#[derive(Debug, Clone, PartialEq)]
pub struct CHermitian {
    dim: usize,
    data: Vec<Complex64>,
}

/// Rank-one Gram matrix `w w^H`.
pub fn outer(w: &[Complex64]) -> CHermitian {
    let k = w.len();
    let mut data = vec![Complex64::ZERO; k * k];
    for i in 0..k {
        for j in 0..k {
            data[i * k + j] = w[i] * w[j].conj();
        }
    }
    CHermitian { dim: k, data }
}

impl CHermitian {
    pub const HERMITIAN_TOL: f64 = 1e-10;

    /// Validates conjugate symmetry (within `1e-10` relative to the largest
    /// entry) and finiteness.
    pub fn new(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "CHermitian: dim {} with {} entries",
                dim,
                data.len()
            )));
        }
        let maxabs = data.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
        if !maxabs.is_finite() {
            return Err(Error::DegenerateInput("CHermitian: non-finite entry".into()));
        }
        let tol = Self::HERMITIAN_TOL * maxabs.max(1.0);
        for i in 0..dim {
            for j in 0..=i {
                if (data[i * dim + j] - data[j * dim + i].conj()).norm() > tol {
                    return Err(Error::NotHermitian {
                        tol: Self::HERMITIAN_TOL,
                    });
                }
            }
        }
        Ok(Self { dim, data })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![Complex64::ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = Complex64::ONE;
        }
        m
    }

    pub fn scaled_identity(dim: usize, s: f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = Complex64::new(s, 0.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    /// Sets `(i, j)` and mirrors the conjugate onto `(j, i)`.
    pub fn set_sym(&mut self, i: usize, j: usize, v: Complex64) {
        if i == j {
            self.data[i * self.dim + j] = Complex64::new(v.re, 0.0);
        } else {
            self.data[i * self.dim + j] = v;
            self.data[j * self.dim + i] = v.conj();
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i).re).sum()
    }

    /// Real quadratic form `f^H M f`.
    pub fn quad_form(&self, f: &[Complex64]) -> f64 {
        debug_assert_eq!(f.len(), self.dim);
        let mut acc = Complex64::ZERO;
        for i in 0..self.dim {
            let mut row = Complex64::ZERO;
            for j in 0..self.dim {
                row += self.get(i, j) * f[j];
            }
            acc += f[i].conj() * row;
        }
        acc.re
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, x: &[Complex64]) -> CVector {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    pub fn add_scaled(&mut self, other: &CHermitian, s: f64) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    /// Largest absolute entry, used for scale-relative tolerances.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Full eigendecomposition via cyclic Jacobi sweeps; eigenvalues are
    /// returned in descending order with unit-norm eigenvectors as columns.
    pub fn eigen(&self) -> (Vec<f64>, Vec<CVector>) {
        let n = self.dim;
        let mut a = self.data.clone();
        // Eigenvector accumulator, starts as identity.
        let mut v = vec![Complex64::ZERO; n * n];
        for i in 0..n {
            v[i * n + i] = Complex64::ONE;
        }
        let scale = self.max_abs().max(1e-300);
        let tol = 1e-15 * scale;
        for _sweep in 0..100 {
            let mut off = 0.0_f64;
            for p in 0..n {
                for q in (p + 1)..n {
                    off = off.max(a[p * n + q].norm());
                }
            }
            if off <= tol {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let z = a[p * n + q];
                    let zmag = z.norm();
                    if zmag <= tol * 1e-2 {
                        continue;
                    }
                    // Phase that turns the (p,q) block real, then a standard
                    // real Jacobi rotation on [[app, |z|], [|z|, aqq]].
                    let phase = z / zmag;
                    let app = a[p * n + p].re;
                    let aqq = a[q * n + q].re;
                    let tau = (aqq - app) / (2.0 * zmag);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    // Unitary R: R[p][p]=c, R[p][q]=s*phase, R[q][p]=-s*conj(phase), R[q][q]=c.
                    for k in 0..n {
                        if k != p && k != q {
                            let akp = a[k * n + p];
                            let akq = a[k * n + q];
                            let new_kp = akp * c - akq * s * phase.conj();
                            let new_kq = akp * s * phase + akq * c;
                            a[k * n + p] = new_kp;
                            a[p * n + k] = new_kp.conj();
                            a[k * n + q] = new_kq;
                            a[q * n + k] = new_kq.conj();
                        }
                    }
                    let new_pp = app * c * c - 2.0 * s * c * zmag + aqq * s * s;
                    let new_qq = app * s * s + 2.0 * s * c * zmag + aqq * c * c;
                    a[p * n + p] = Complex64::new(new_pp, 0.0);
                    a[q * n + q] = Complex64::new(new_qq, 0.0);
                    a[p * n + q] = Complex64::ZERO;
                    a[q * n + p] = Complex64::ZERO;
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = vkp * c - vkq * s * phase.conj();
                        v[k * n + q] = vkp * s * phase + vkq * c;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            a[j * n + j]
                .re
                .partial_cmp(&a[i * n + i].re)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let vals: Vec<f64> = order.iter().map(|&i| a[i * n + i].re).collect();
        let vecs: Vec<CVector> = order
            .iter()
            .map(|&c| (0..n).map(|r| v[r * n + c]).collect())
            .collect();
        (vals, vecs)
    }

    /// True iff the smallest eigenvalue is at least `-tol`.
    pub fn is_psd(&self, tol: f64) -> bool {
        let (vals, _) = self.eigen();
        vals.last().map(|&l| l >= -tol).unwrap_or(true)
    }

    /// Largest eigenpair, with the eigenvector's global phase canonicalized
    /// so its largest-magnitude entry is real nonnegative.
    pub fn principal_eigvec(&self) -> (f64, CVector) {
        let (vals, vecs) = self.eigen();
        let mut v = vecs.into_iter().next().expect("dim > 0");
        canonicalize_phase(&mut v);
        (vals[0], v)
    }

    /// Lower-triangular Cholesky factor `L` with `L L^H = A`, or `None` if
    /// the matrix is not (numerically) positive definite.
    pub fn cholesky(&self) -> Option<Vec<Complex64>> {
        let n = self.dim;
        let mut l = vec![Complex64::ZERO; n * n];
        for j in 0..n {
            let mut d = self.get(j, j).re;
            for k in 0..j {
                d -= l[j * n + k].norm_sqr();
            }
            if d <= 0.0 || !d.is_finite() {
                return None;
            }
            let djj = d.sqrt();
            l[j * n + j] = Complex64::new(djj, 0.0);
            for i in (j + 1)..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / djj;
            }
        }
        Some(l)
    }

    /// Inverse via Cholesky; `None` when not positive definite.
    pub fn inverse_pd(&self) -> Option<CHermitian> {
        let n = self.dim;
        let l = self.cholesky()?;
        // Solve A x = e_i for each basis vector.
        let mut inv = vec![Complex64::ZERO; n * n];
        for col in 0..n {
            let mut y = vec![Complex64::ZERO; n];
            for i in 0..n {
                let mut s = if i == col { Complex64::ONE } else { Complex64::ZERO };
                for k in 0..i {
                    s -= l[i * n + k] * y[k];
                }
                y[i] = s / l[i * n + i];
            }
            let mut x = vec![Complex64::ZERO; n];
            for i in (0..n).rev() {
                let mut s = y[i];
                for k in (i + 1)..n {
                    s -= l[k * n + i].conj() * x[k];
                }
                x[i] = s / l[i * n + i];
            }
            for row in 0..n {
                inv[row * n + col] = x[row];
            }
        }
        // Symmetrize against roundoff so the result is exactly Hermitian.
        for i in 0..n {
            for j in 0..i {
                let m = (inv[i * n + j] + inv[j * n + i].conj()) * 0.5;
                inv[i * n + j] = m;
                inv[j * n + i] = m.conj();
            }
            inv[i * n + i] = Complex64::new(inv[i * n + i].re, 0.0);
        }
        Some(CHermitian { dim: n, data: inv })
    }
}

/// Rotates the vector's global phase so the largest-magnitude entry is real
/// nonnegative (ties broken by lowest index). Makes eigenvectors unique.
pub fn canonicalize_phase(v: &mut [Complex64]) {
    let mut best = 0;
    for (i, z) in v.iter().enumerate() {
        if z.norm() > v[best].norm() + 1e-300 {
            best = i;
        }
    }
    let m = v[best].norm();
    if m > 0.0 {
        let rot = v[best].conj() / m;
        for z in v.iter_mut() {
            *z *= rot;
        }
    }
}
