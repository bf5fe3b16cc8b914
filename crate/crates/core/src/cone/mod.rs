//! Symmetric curvature functions on Gårding cones.
//!
//! Two families are supported, both normalized so that `f(1, ..., 1) = 1`:
//!
//! * `Sigma { k }`: `f = (σ_k / C(n, k))^{1/k}` on the cone `Γ_k`;
//! * `Quotient { k, l }`: `f = ((σ_k / σ_l) · C(n, l) / C(n, k))^{1/(k-l)}`, also on `Γ_k`.
//!
//! Each is concave, degree-one homogeneous and strictly increasing in every
//! eigenvalue on its cone. The concave extension outside a truncated cone
//! lives in [`envelope`].

pub mod envelope;

use crate::error::{Error, Result};

pub use envelope::{envelope_fhat, envelope_grad, ConeCut, Envelope};

/// Largest supported eigenvalue-vector length.
pub const MAX_DIM: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Sigma { k: usize },
    Quotient { k: usize, l: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvatureSpec {
    family: Family,
    dim: usize,
    /// Value of the un-normalized ratio at `(1, ..., 1)`; dividing by it
    /// before taking the root pins `f(1, ..., 1) = 1` exactly.
    denom: f64,
}

/// `σ_0 ..= σ_n` of the first `n` entries of `x`.
#[inline]
pub fn elementary_symmetric(x: &[f64]) -> [f64; MAX_DIM + 1] {
    let mut e = [0.0; MAX_DIM + 1];
    e[0] = 1.0;
    for (m, &xi) in x.iter().enumerate() {
        for j in (1..=m + 1).rev() {
            e[j] += xi * e[j - 1];
        }
    }
    e
}

/// Elementary symmetric polynomials of `x` with entry `skip` removed.
#[inline]
pub fn elementary_symmetric_without(x: &[f64], skip: usize) -> [f64; MAX_DIM + 1] {
    let mut e = [0.0; MAX_DIM + 1];
    e[0] = 1.0;
    let mut m = 0;
    for (i, &xi) in x.iter().enumerate() {
        if i == skip {
            continue;
        }
        for j in (1..=m + 1).rev() {
            e[j] += xi * e[j - 1];
        }
        m += 1;
    }
    e
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c.round()
}

/// Odd extension of the `d`-th root.
#[inline]
fn signed_root(x: f64, d: usize) -> f64 {
    match d {
        1 => x,
        2 => x.signum() * x.abs().sqrt(),
        3 => x.cbrt(),
        _ => x.signum() * x.abs().powf(1.0 / d as f64),
    }
}

impl CurvatureSpec {
    /// Normalized `σ_k^{1/k}` in dimension `dim`.
    pub fn sigma(k: usize, dim: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidSpec(format!("dim must be in 1..={MAX_DIM}, got {dim}")));
        }
        if k == 0 || k > dim {
            return Err(Error::InvalidSpec(format!("need 1 <= k <= dim, got k={k}, dim={dim}")));
        }
        Ok(Self {
            family: Family::Sigma { k },
            dim,
            denom: binomial(dim, k),
        })
    }

    /// Normalized `(σ_k / σ_l)^{1/(k-l)}` in dimension `dim`, on the cone `Γ_k`.
    pub fn quotient(k: usize, l: usize, dim: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidSpec(format!("dim must be in 1..={MAX_DIM}, got {dim}")));
        }
        if l == 0 || l >= k || k > dim {
            return Err(Error::InvalidSpec(format!(
                "need 1 <= l < k <= dim, got k={k}, l={l}, dim={dim}"
            )));
        }
        Ok(Self {
            family: Family::Quotient { k, l },
            dim,
            denom: binomial(dim, k) / binomial(dim, l),
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Order `k` of the admissible cone `Γ_k`.
    pub fn cone_order(&self) -> usize {
        match self.family {
            Family::Sigma { k } | Family::Quotient { k, .. } => k,
        }
    }

    /// Degree of the root taken in the definition of `f`.
    pub fn root_degree(&self) -> usize {
        match self.family {
            Family::Sigma { k } => k,
            Family::Quotient { k, l } => k - l,
        }
    }

    /// Multiplicative normalization constant `c` with `f = c · ratio^{1/d}`.
    pub fn normalization(&self) -> f64 {
        self.denom.powf(-1.0 / self.root_degree() as f64)
    }

    /// Binomial denominator: `C(n,k)` or `C(n,k)/C(n,l)`.
    #[inline]
    pub(crate) fn denom(&self) -> f64 {
        self.denom
    }

    /// True when `f` is linear (the `σ_1` family), in which case every
    /// tangent plane coincides with `f` itself.
    pub fn is_linear(&self) -> bool {
        matches!(self.family, Family::Sigma { k: 1 })
    }

    fn check_len(&self, kappa: &[f64]) -> Result<()> {
        if kappa.len() != self.dim {
            return Err(Error::InvalidSpec(format!(
                "eigenvalue vector has length {}, expected {}",
                kappa.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Evaluates `f`. Outside `Γ_k` the formula is extended by the odd root;
    /// the value is only meaningful on the cone.
    pub fn eval(&self, kappa: &[f64]) -> Result<f64> {
        self.check_len(kappa)?;
        self.eval_unchecked(kappa)
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, kappa: &[f64]) -> Result<f64> {
        let e = elementary_symmetric(kappa);
        match self.family {
            Family::Sigma { k } => Ok(signed_root(e[k] / self.denom, k)),
            Family::Quotient { k, l } => {
                if e[l] == 0.0 {
                    return Err(Error::ConeViolation(format!("σ_{l} vanishes at {kappa:?}")));
                }
                Ok(signed_root(e[k] / e[l] / self.denom, k - l))
            }
        }
    }

    /// `σ_j(kappa) > 0` for every `j <= k`.
    pub fn in_cone(&self, kappa: &[f64]) -> bool {
        if kappa.len() != self.dim {
            return false;
        }
        let e = elementary_symmetric(kappa);
        (1..=self.cone_order()).all(|j| e[j] > 0.0)
    }

    /// Cone membership, optionally restricted to the truncated region
    /// `{f > 1/n_cut, max κ_i < n_cut}`.
    pub fn cone_membership(&self, kappa: &[f64], cut: Option<ConeCut>) -> bool {
        if !self.in_cone(kappa) {
            return false;
        }
        match cut {
            None => true,
            Some(cut) => {
                let n = cut.n_cut() as f64;
                let max = kappa.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                match self.eval_unchecked(kappa) {
                    Ok(f) => f > 1.0 / n && max < n,
                    Err(_) => false,
                }
            }
        }
    }

    /// Gradient of `f`; requires `kappa ∈ Γ_k`.
    pub fn grad(&self, kappa: &[f64]) -> Result<Vec<f64>> {
        self.check_len(kappa)?;
        if !self.in_cone(kappa) {
            return Err(Error::ConeViolation(format!("{kappa:?} is outside Γ_{}", self.cone_order())));
        }
        let mut out = [0.0; MAX_DIM];
        self.value_and_grad_unchecked(kappa, &mut out);
        Ok(out[..self.dim].to_vec())
    }

    /// Value and gradient without the cone check. Callers guarantee
    /// `kappa ∈ Γ_k` (so that the denominators below are positive).
    #[inline]
    pub(crate) fn value_and_grad_unchecked(&self, kappa: &[f64], out: &mut [f64; MAX_DIM]) -> f64 {
        let n = self.dim;
        let e = elementary_symmetric(kappa);
        match self.family {
            Family::Sigma { k } => {
                let f = signed_root(e[k] / self.denom, k);
                let scale = f / (k as f64 * e[k]);
                for (i, o) in out.iter_mut().enumerate().take(n) {
                    *o = scale * elementary_symmetric_without(kappa, i)[k - 1];
                }
                f
            }
            Family::Quotient { k, l } => {
                let f = signed_root(e[k] / e[l] / self.denom, k - l);
                let scale = f / (k - l) as f64;
                for (i, o) in out.iter_mut().enumerate().take(n) {
                    let ei = elementary_symmetric_without(kappa, i);
                    *o = scale * (ei[k - 1] / e[k] - ei[l - 1] / e[l]);
                }
                f
            }
        }
    }

    /// Residual whose zero set inside `Γ_k` is the level set `{f = level}`.
    /// It is affine in each eigenvalue separately.
    #[inline]
    pub(crate) fn level_residual(&self, kappa: &[f64], level: f64) -> f64 {
        let e = elementary_symmetric(kappa);
        match self.family {
            Family::Sigma { k } => e[k] - self.denom * level.powi(k as i32),
            Family::Quotient { k, l } => e[k] - self.denom * level.powi((k - l) as i32) * e[l],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_grad(spec: &CurvatureSpec, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += h;
                xm[i] -= h;
                (spec.eval(&xp).unwrap() - spec.eval(&xm).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn sigma_one_values() {
        let s = CurvatureSpec::sigma(1, 2).unwrap();
        assert_eq!(s.eval(&[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(s.eval(&[2.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn sigma_two_value_at_edge_point() {
        let s = CurvatureSpec::sigma(2, 3).unwrap();
        let v = s.eval(&[1.0, 1.0, 0.0]).unwrap();
        assert!((v - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((v - 0.577350).abs() < 1e-6);
    }

    #[test]
    fn normalized_at_ones() {
        for dim in 1..=3 {
            for k in 1..=dim {
                let s = CurvatureSpec::sigma(k, dim).unwrap();
                assert!((s.eval(&vec![1.0; dim]).unwrap() - 1.0).abs() <= 1e-12);
                for l in 1..k {
                    let q = CurvatureSpec::quotient(k, l, dim).unwrap();
                    assert!((q.eval(&vec![1.0; dim]).unwrap() - 1.0).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn quotient_zero_denominator_is_cone_violation() {
        let q = CurvatureSpec::quotient(2, 1, 2).unwrap();
        assert!(matches!(q.eval(&[1.0, -1.0]), Err(Error::ConeViolation(_))));
    }

    #[test]
    fn grad_linear_and_symmetric_points() {
        let s = CurvatureSpec::sigma(1, 3).unwrap();
        for g in s.grad(&[0.3, -0.1, 2.0]).unwrap() {
            assert!((g - 1.0 / 3.0).abs() < 1e-15);
        }
        let s2 = CurvatureSpec::sigma(2, 3).unwrap();
        for g in s2.grad(&[1.0, 1.0, 1.0]).unwrap() {
            assert!((g - 1.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn grad_matches_finite_differences() {
        let s2 = CurvatureSpec::sigma(2, 3).unwrap();
        let x = [2.0, 1.0, 1.0];
        let g = s2.grad(&x).unwrap();
        let fd = fd_grad(&s2, &x, 1e-5);
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        let q = CurvatureSpec::quotient(3, 1, 3).unwrap();
        let x = [0.7, 1.3, 2.1];
        let g = q.grad(&x).unwrap();
        let fd = fd_grad(&q, &x, 1e-5);
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn grad_outside_cone_errors() {
        let s = CurvatureSpec::sigma(2, 2).unwrap();
        assert!(matches!(s.grad(&[1.0, -0.5]), Err(Error::ConeViolation(_))));
    }

    #[test]
    fn membership_examples() {
        let s1 = CurvatureSpec::sigma(1, 2).unwrap();
        assert!(!s1.cone_membership(&[1.0, -5.0], None));
        assert!(s1.cone_membership(&[1.0, 1.0], None));
        let cut = ConeCut::new(10).unwrap();
        assert!(s1.cone_membership(&[0.3, 0.0], Some(cut)));
        assert!(!s1.cone_membership(&[0.1, 0.0], Some(cut)));
        assert!(!s1.cone_membership(&[10.5, 0.0], Some(cut)));
        let s3 = CurvatureSpec::sigma(3, 3).unwrap();
        assert!(s3.cone_membership(&[1.0, 1.0, 1.0], None));
        assert!(!s3.cone_membership(&[1.0, 1.0, -0.1], None));
    }

    #[test]
    fn euler_identity() {
        let q = CurvatureSpec::quotient(2, 1, 3).unwrap();
        let x = [0.2, 0.9, 1.7];
        let g = q.grad(&x).unwrap();
        let lhs: f64 = g.iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - q.eval(&x).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(CurvatureSpec::sigma(0, 2).is_err());
        assert!(CurvatureSpec::sigma(3, 2).is_err());
        assert!(CurvatureSpec::sigma(1, 4).is_err());
        assert!(CurvatureSpec::quotient(2, 2, 3).is_err());
    }
}
