//! Small dense symmetric matrices (n ≤ 3), cyclic Jacobi eigenvalues and the
//! regularized projection `γ^ε`.

use crate::error::{Error, Result};

pub const DEFAULT_EIG_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMat {
    n: usize,
    a: [[f64; 3]; 3],
}

impl SymMat {
    pub fn zeros(n: usize) -> Self {
        assert!((1..=3).contains(&n), "matrix size must be 1..=3");
        Self { n, a: [[0.0; 3]; 3] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i][i] = 1.0;
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            m.a[i][i] = x;
        }
        m
    }

    /// Builds from rows without a symmetry check; see [`SymMat::asymmetry`].
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let mut m = Self::zeros(rows.len());
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), rows.len(), "matrix must be square");
            m.a[i][..r.len()].copy_from_slice(r);
        }
        m
    }

    pub(crate) fn from_array(n: usize, a: [[f64; 3]; 3]) -> Self {
        Self { n, a }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i][j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i][j] = v;
        self.a[j][i] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.a[i][i]).sum()
    }

    pub fn frobenius(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.a[i][j] * self.a[i][j];
            }
        }
        s.sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                m = m.max(self.a[i][j].abs());
            }
        }
        m
    }

    pub fn asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..i {
                m = m.max((self.a[i][j] - self.a[j][i]).abs());
            }
        }
        m
    }

    pub fn add(&self, other: &SymMat) -> SymMat {
        let mut out = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                out.a[i][j] += other.a[i][j];
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> SymMat {
        let mut out = *self;
        for row in out.a.iter_mut() {
            for x in row.iter_mut() {
                *x *= s;
            }
        }
        out
    }

    /// Plain matrix product (result not necessarily symmetric).
    pub fn matmul(&self, other: &SymMat) -> SymMat {
        let n = self.n;
        let mut out = SymMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += self.a[i][k] * other.a[k][j];
                }
                out.a[i][j] = s;
            }
        }
        out
    }

    /// `B A B` for symmetric `A` and `B`, symmetrized.
    #[inline]
    pub fn congruence(&self, b: &SymMat) -> SymMat {
        let n = self.n;
        let mut ab = [[0.0; 3]; 3];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += self.a[i][k] * b.a[k][j];
                }
                ab[i][j] = s;
            }
        }
        let mut out = SymMat::zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += b.a[i][k] * ab[k][j];
                }
                out.a[i][j] = s;
                out.a[j][i] = s;
            }
        }
        out
    }

    /// Elementary symmetric functions of the eigenvalues, `[1, tr, Σ 2×2 minors, det]`
    /// (entries past the size are zero).
    #[inline]
    pub fn principal_minor_sums(&self) -> [f64; 4] {
        let a = &self.a;
        match self.n {
            1 => [1.0, a[0][0], 0.0, 0.0],
            2 => [1.0, a[0][0] + a[1][1], a[0][0] * a[1][1] - a[0][1] * a[0][1], 0.0],
            _ => {
                let m01 = a[0][0] * a[1][1] - a[0][1] * a[0][1];
                let m02 = a[0][0] * a[2][2] - a[0][2] * a[0][2];
                let m12 = a[1][1] * a[2][2] - a[1][2] * a[1][2];
                let det = a[0][0] * m12 - a[0][1] * (a[0][1] * a[2][2] - a[1][2] * a[0][2])
                    + a[0][2] * (a[0][1] * a[1][2] - a[1][1] * a[0][2]);
                [1.0, a[0][0] + a[1][1] + a[2][2], m01 + m02 + m12, det]
            }
        }
    }

    pub fn max_abs_diff(&self, other: &SymMat) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                m = m.max((self.a[i][j] - other.a[i][j]).abs());
            }
        }
        m
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.a[i][..self.n].to_vec()).collect()
    }
}

/// Eigenvalues of a symmetric matrix in nondecreasing order.
pub fn eig_sym(m: &SymMat, tol: f64) -> Result<Vec<f64>> {
    let asym = m.asymmetry();
    if asym > 1e-12 * m.max_abs().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let (vals, _) = jacobi(m, tol, false);
    Ok(vals[..m.n].to_vec())
}

/// Eigenvalues (nondecreasing) and orthonormal eigenvectors as the columns of `Q`.
pub fn eig_sym_vectors(m: &SymMat, tol: f64) -> Result<(Vec<f64>, [[f64; 3]; 3])> {
    let asym = m.asymmetry();
    if asym > 1e-12 * m.max_abs().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let (vals, q) = jacobi(m, tol, true);
    Ok((vals[..m.n].to_vec(), q))
}

/// Eigenvalues without the symmetry check, for the grid kernels.
#[inline]
pub(crate) fn eigenvalues_sorted(m: &SymMat, tol: f64) -> [f64; 3] {
    jacobi(m, tol, false).0
}

/// Cyclic Jacobi; iterates until the off-diagonal Frobenius norm drops to
/// `tol · ‖A‖_F`. Returns sorted eigenvalues (padding past `n` is zero) and,
/// if requested, the matching eigenvector columns.
#[inline]
fn jacobi(m: &SymMat, tol: f64, want_vectors: bool) -> ([f64; 3], [[f64; 3]; 3]) {
    let n = m.n;
    let mut a = m.a;
    let mut v = [[0.0; 3]; 3];
    for (i, row) in v.iter_mut().enumerate().take(n) {
        row[i] = 1.0;
    }
    let norm = m.frobenius();
    let mut vals = [0.0; 3];
    if norm == 0.0 {
        return (vals, v);
    }
    let target = tol * norm;
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += 2.0 * a[p][q] * a[p][q];
            }
        }
        if off.sqrt() <= target {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // A <- J^T A J with J the (p, q) rotation.
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                a[p][q] = 0.0;
                a[q][p] = 0.0;
                if want_vectors {
                    for row in v.iter_mut().take(n) {
                        let vp = row[p];
                        let vq = row[q];
                        row[p] = c * vp - s * vq;
                        row[q] = s * vp + c * vq;
                    }
                }
            }
        }
    }
    for i in 0..n {
        vals[i] = a[i][i];
    }
    // Insertion sort, carrying eigenvector columns along.
    for i in 1..n {
        let mut j = i;
        while j > 0 && vals[j] < vals[j - 1] {
            vals.swap(j, j - 1);
            if want_vectors {
                for row in v.iter_mut().take(n) {
                    row.swap(j, j - 1);
                }
            }
            j -= 1;
        }
    }
    (vals, v)
}

/// `γ^ε_{ik} = δ_ik − p_i p_k / (ε√(ε² + |p|²) + ε² + |p|²)`.
#[inline]
pub fn gamma_eps(p: &[f64], eps: f64) -> SymMat {
    let n = p.len();
    let p2: f64 = p.iter().map(|x| x * x).sum();
    let denom = eps * (eps * eps + p2).sqrt() + eps * eps + p2;
    let mut g = SymMat::identity(n);
    if p2 == 0.0 {
        return g;
    }
    for i in 0..n {
        for k in 0..n {
            g.a[i][k] -= p[i] * p[k] / denom;
        }
    }
    g
}

/// Exact projection `I − p pᵀ / |p|²` onto the plane orthogonal to `p ≠ 0`.
pub fn gamma_exact(p: &[f64]) -> SymMat {
    let n = p.len();
    let p2: f64 = p.iter().map(|x| x * x).sum();
    let mut g = SymMat::identity(n);
    if p2 == 0.0 {
        return g;
    }
    for i in 0..n {
        for k in 0..n {
            g.a[i][k] -= p[i] * p[k] / p2;
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_and_diag() {
        assert_eq!(eig_sym(&SymMat::identity(3), DEFAULT_EIG_TOL).unwrap(), vec![1.0, 1.0, 1.0]);
        assert_eq!(eig_sym(&SymMat::diag(&[3.0, 1.0, 2.0]), DEFAULT_EIG_TOL).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn rejects_asymmetric() {
        let m = SymMat::from_rows(&[&[1.0, 2.0], &[2.5, 1.0]]);
        assert!(matches!(eig_sym(&m, DEFAULT_EIG_TOL), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn reconstruction_and_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 2..=3 {
            for _ in 0..200 {
                let mut m = SymMat::zeros(n);
                for i in 0..n {
                    for j in i..n {
                        m.set(i, j, rng.gen_range(-5.0..5.0));
                    }
                }
                let (vals, q) = eig_sym_vectors(&m, DEFAULT_EIG_TOL).unwrap();
                let mut err: f64 = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        let r: f64 = (0..n).map(|k| q[i][k] * vals[k] * q[j][k]).sum();
                        err = err.max((r - m.get(i, j)).abs());
                    }
                }
                assert!(err <= 1e-10, "reconstruction error {err}");
                assert!((vals.iter().sum::<f64>() - m.trace()).abs() <= 1e-10);
                assert!(vals.windows(2).all(|w| w[0] <= w[1]));
            }
        }
    }

    #[test]
    fn gamma_at_zero_is_identity() {
        assert_eq!(gamma_eps(&[0.0, 0.0, 0.0], 0.1), SymMat::identity(3));
    }

    #[test]
    fn gamma_unit_gradient_small_eps() {
        let p = [0.6, 0.8];
        let g = gamma_eps(&p, 1e-6);
        let proj = gamma_exact(&p);
        assert!(g.max_abs_diff(&proj) <= 2e-6);
    }

    /// As `ε → 0` the projected Hessian annihilates `p`.
    #[test]
    fn projected_hessian_has_null_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let p: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut h = SymMat::zeros(3);
            for i in 0..3 {
                for j in i..3 {
                    h.set(i, j, rng.gen_range(-3.0..3.0));
                }
            }
            let eig = eig_sym(&h.congruence(&gamma_eps(&p, 1e-8)), DEFAULT_EIG_TOL).unwrap();
            let smallest = eig.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
            assert!(smallest <= 1e-4, "{eig:?}");
        }
    }
}
