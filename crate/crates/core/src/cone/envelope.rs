//! Concave, globally Lipschitz extension `f̂ⁿ` of a curvature function.
//!
//! `f̂ⁿ(τ) = inf { f(λ) + Df(λ)·(τ − λ) : λ ∈ K, f(λ) > 1/n, λ_max < n }`.
//!
//! Because `f` is homogeneous of degree one, `f(λ) = Df(λ)·λ` and `Df` is
//! constant along rays, so the objective collapses to `Df(λ)·τ` and only the
//! *directions* reachable inside the truncated region matter. A direction
//! `d ∈ K` is reachable iff `max(d) < n² f(d)`. Consequences used below:
//!
//! * `f̂ⁿ` is positively homogeneous of degree one and equals `f` on every
//!   reachable ray (not only inside the truncated region itself);
//! * for `τ` off the reachable cone the infimum sits on the corner set
//!   `{λ_max = n, f = 1/n}`; after normalizing `λ_max = 1` and sorting
//!   (the optimal `λ` is ordered like `τ`) this is a single point in 2D and
//!   a one-parameter arc in 3D.
//!
//! The arc is sampled once per [`Envelope`]; an evaluation scans the samples
//! and refines the best bracket by successive parabolic interpolation with a
//! golden-section fallback.

use super::{CurvatureSpec, MAX_DIM};
use crate::error::{Error, Result};

/// Truncation parameter of the envelope (`n` in `f̂ⁿ`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConeCut {
    n_cut: u32,
}

impl ConeCut {
    pub fn new(n_cut: u32) -> Result<Self> {
        if n_cut < 2 {
            return Err(Error::InvalidSpec(format!("n_cut must be > 1, got {n_cut}")));
        }
        Ok(Self { n_cut })
    }

    pub fn n_cut(&self) -> u32 {
        self.n_cut
    }

    /// Recommended truncation for a given regularization: `⌈ε^{-1/4}⌉`, at least 2.
    pub fn for_eps(eps: f64) -> Self {
        let n = eps.powf(-0.25).ceil().max(2.0);
        Self { n_cut: n as u32 }
    }
}

pub const DEFAULT_ARC_SAMPLES: usize = 64;
const LIPSCHITZ_GRID: usize = 64;
/// Upper bound on arc samples, so the scan can use a stack buffer.
const ARC_SCAN_MAX: usize = 1024;
/// Refinement stops when steps fall below this fraction of the arc range.
const ARC_TOL: f64 = 1e-10;
const ARC_MAX_ITER: usize = 60;
const GOLDEN: f64 = 0.381_966_011_250_105_1;

#[derive(Clone, Copy, Debug)]
struct ArcPoint {
    s: f64,
    grad: [f64; MAX_DIM],
}

/// Result of one envelope evaluation.
#[derive(Clone, Copy, Debug)]
pub struct EnvelopeEval {
    pub value: f64,
    /// Supergradient `Df(λ*)`, in the coordinate order of the input.
    pub grad: [f64; MAX_DIM],
    /// True when the input lies on a reachable ray and `f̂ⁿ = f` there.
    pub on_cone: bool,
}

#[derive(Clone, Debug)]
pub struct Envelope {
    spec: CurvatureSpec,
    cut: ConeCut,
    /// `1/n²`: value of `f` on the corner set after normalizing `λ_max = 1`.
    corner_level: f64,
    /// Constant term of the level residual at `corner_level`.
    level_const: f64,
    arc: Vec<ArcPoint>,
    lipschitz: f64,
}

impl Envelope {
    pub fn new(spec: CurvatureSpec, cut: ConeCut) -> Result<Self> {
        Self::with_arc_samples(spec, cut, DEFAULT_ARC_SAMPLES)
    }

    pub fn with_arc_samples(spec: CurvatureSpec, cut: ConeCut, samples: usize) -> Result<Self> {
        let n = cut.n_cut() as f64;
        let corner_level = 1.0 / (n * n);
        let level_const = match spec.family() {
            super::Family::Sigma { k } => spec.denom() * corner_level.powi(k as i32),
            super::Family::Quotient { k, l } => spec.denom() * corner_level.powi((k - l) as i32),
        };
        let mut env = Self {
            spec,
            cut,
            corner_level,
            level_const,
            arc: Vec::new(),
            lipschitz: 0.0,
        };
        if spec.is_linear() {
            let g = spec.grad(&vec![1.0; spec.dim()])?;
            env.lipschitz = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            return Ok(env);
        }
        match spec.dim() {
            2 => {
                let s = env.corner_2d();
                let lam = [s, 1.0, 0.0];
                if !spec.in_cone(&lam[..2]) {
                    return Err(Error::Envelope(format!("corner point {lam:?} lies outside the cone")));
                }
                let mut grad = [0.0; MAX_DIM];
                spec.value_and_grad_unchecked(&lam[..2], &mut grad);
                env.arc.push(ArcPoint { s, grad });
            }
            3 => {
                let (lo, hi) = env.arc_range_3d()?;
                let m = samples.clamp(3, ARC_SCAN_MAX);
                for j in 0..m {
                    let s = if j + 1 == m { hi } else { lo + (hi - lo) * j as f64 / (m - 1) as f64 };
                    let lam = env.arc_point_3d(s);
                    if !spec.in_cone(&lam) {
                        return Err(Error::Envelope(format!("arc point {lam:?} lies outside the cone")));
                    }
                    let mut grad = [0.0; MAX_DIM];
                    spec.value_and_grad_unchecked(&lam, &mut grad);
                    env.arc.push(ArcPoint { s, grad });
                }
            }
            d => return Err(Error::Envelope(format!("nonlinear envelope needs dim 2 or 3, got {d}"))),
        }
        env.lipschitz = env.sample_lipschitz();
        Ok(env)
    }

    pub fn spec(&self) -> &CurvatureSpec {
        &self.spec
    }

    pub fn cut(&self) -> ConeCut {
        self.cut
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Sampled `sup |Df|` over the truncated region, the Lipschitz constant of `f̂ⁿ`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `τ ∈ K` and its ray meets the truncated region, i.e. `f̂ⁿ(τ) = f(τ)`.
    pub fn ray_feasible(&self, tau: &[f64]) -> bool {
        if !self.spec.in_cone(tau) {
            return false;
        }
        let max = tau.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let n = self.cut.n_cut() as f64;
        match self.spec.eval_unchecked(tau) {
            Ok(f) => max < n * n * f,
            Err(_) => false,
        }
    }

    /// `f̂ⁿ(τ)`.
    pub fn fhat(&self, tau: &[f64]) -> Result<f64> {
        self.check_len(tau)?;
        Ok(self.evaluate(tau).value)
    }

    /// Supergradient of `f̂ⁿ` at `τ` (the gradient of `f` at the minimizer).
    pub fn fhat_grad(&self, tau: &[f64]) -> Result<Vec<f64>> {
        self.check_len(tau)?;
        Ok(self.evaluate(tau).grad[..self.dim()].to_vec())
    }

    fn check_len(&self, tau: &[f64]) -> Result<()> {
        if tau.len() != self.dim() {
            return Err(Error::InvalidSpec(format!(
                "eigenvalue vector has length {}, expected {}",
                tau.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Value only; the hot path of the grid operators. `tau` must have
    /// length `dim`.
    #[inline]
    pub fn value(&self, tau: &[f64]) -> f64 {
        let n = self.dim();
        if self.spec.is_linear() {
            return tau.iter().sum::<f64>() / n as f64;
        }
        if tau.iter().all(|&t| t == 0.0) {
            return 0.0;
        }
        if self.ray_feasible(tau) {
            if let Ok(f) = self.spec.eval_unchecked(tau) {
                return f;
            }
        }
        let mut sorted = [0.0; MAX_DIM];
        sorted[..n].copy_from_slice(tau);
        sort_small(&mut sorted[..n]);
        self.off_cone(&sorted).0
    }

    /// Full evaluation with supergradient.
    pub fn evaluate(&self, tau: &[f64]) -> EnvelopeEval {
        let n = self.dim();
        let mut grad = [0.0; MAX_DIM];
        if self.spec.is_linear() {
            grad[..n].iter_mut().for_each(|g| *g = 1.0 / n as f64);
            return EnvelopeEval {
                value: tau.iter().sum::<f64>() / n as f64,
                grad,
                on_cone: self.spec.in_cone(tau),
            };
        }
        if self.ray_feasible(tau) {
            let value = self.spec.value_and_grad_unchecked(tau, &mut grad);
            return EnvelopeEval { value, grad, on_cone: true };
        }
        // Sort ascending, remembering where each rank came from.
        let mut order = [0usize, 1, 2];
        order[..n].sort_by(|&a, &b| tau[a].total_cmp(&tau[b]));
        let mut sorted = [0.0; MAX_DIM];
        for r in 0..n {
            sorted[r] = tau[order[r]];
        }
        let (value, g_sorted) = self.off_cone(&sorted);
        for r in 0..n {
            grad[order[r]] = g_sorted[r];
        }
        EnvelopeEval { value, grad, on_cone: false }
    }

    /// Minimum of `Df(λ)·τ` over the corner set, for ascending `τ`.
    /// Returns the value and `Df(λ*)` in the same (ascending-τ) order.
    fn off_cone(&self, tau: &[f64; MAX_DIM]) -> (f64, [f64; MAX_DIM]) {
        let n = self.dim();
        let dot = |g: &[f64; MAX_DIM]| -> f64 { (0..n).map(|i| g[i] * tau[i]).sum() };
        if n == 2 {
            let g = self.arc[0].grad;
            return (dot(&g), g);
        }
        let m = self.arc.len();
        let mut best = 0;
        let mut best_val = f64::INFINITY;
        let mut vals = [0.0; ARC_SCAN_MAX];
        for (j, p) in self.arc.iter().enumerate() {
            let v = dot(&p.grad);
            vals[j] = v;
            if v < best_val {
                best_val = v;
                best = j;
            }
        }
        let pt = |j: usize| (self.arc[j].s, vals[j]);
        // Three table points bracketing the minimum. At an end of the arc the
        // minimum may sit on the endpoint itself.
        let (a, b, c) = if best == 0 {
            let (x0, x1, x2) = (pt(0), pt(1), pt(2));
            match parabola_vertex(x0, x1, x2) {
                Some(u) if u > x0.0 => (x0, (u, f64::NAN), x1),
                _ => return (best_val, self.arc[0].grad),
            }
        } else if best == m - 1 {
            let (x0, x1, x2) = (pt(m - 3), pt(m - 2), pt(m - 1));
            match parabola_vertex(x0, x1, x2) {
                Some(u) if u < x2.0 => (x1, (u, f64::NAN), x2),
                _ => return (best_val, self.arc[m - 1].grad),
            }
        } else {
            (pt(best - 1), pt(best), pt(best + 1))
        };
        let (v, g) = self.refine_arc(tau, a, b, c);
        if v < best_val {
            (v, g)
        } else {
            (best_val, self.arc[best].grad)
        }
    }

    /// Successive parabolic interpolation of `Df(λ(s))·τ` inside `(a.0, c.0)`.
    /// `b` is the current best point; a NaN value means "evaluate me first".
    fn refine_arc(
        &self,
        tau: &[f64; MAX_DIM],
        mut a: (f64, f64),
        mut b: (f64, f64),
        mut c: (f64, f64),
    ) -> (f64, [f64; MAX_DIM]) {
        let dot = |g: &[f64; MAX_DIM]| g[0] * tau[0] + g[1] * tau[1] + g[2] * tau[2];
        let mut gb = self.arc_grad_3d(b.0);
        if b.1.is_nan() {
            b.1 = dot(&gb);
            // An endpoint guess that is not below both neighbours: fall back to
            // the best of the three.
            if b.1 > a.1 || b.1 > c.1 {
                let (s, _) = if a.1 <= c.1 { a } else { c };
                gb = self.arc_grad_3d(s);
                return (dot(&gb), gb);
            }
        }
        let tol = ARC_TOL * (self.arc[self.arc.len() - 1].s - self.arc[0].s).abs().max(1e-300);
        for _ in 0..ARC_MAX_ITER {
            let mut u = match parabola_vertex(a, b, c) {
                Some(u) if u > a.0 && u < c.0 => u,
                _ => f64::NAN,
            };
            if u.is_nan() {
                // Golden step into the larger side.
                u = if c.0 - b.0 > b.0 - a.0 { b.0 + GOLDEN * (c.0 - b.0) } else { b.0 - GOLDEN * (b.0 - a.0) };
            }
            if (u - b.0).abs() < tol {
                break;
            }
            let gu = self.arc_grad_3d(u);
            let fu = dot(&gu);
            if fu < b.1 {
                if u < b.0 {
                    c = b;
                } else {
                    a = b;
                }
                b = (u, fu);
                gb = gu;
            } else if u < b.0 {
                a = (u, fu);
            } else {
                c = (u, fu);
            }
            if c.0 - a.0 < tol {
                break;
            }
        }
        (b.1, gb)
    }


    /// 2D corner point `(s, 1)` with `f(s, 1) = 1/n²`; the residual is affine in `s`.
    fn corner_2d(&self) -> f64 {
        let p0 = self.spec.level_residual(&[0.0, 1.0], self.corner_level);
        let p1 = self.spec.level_residual(&[1.0, 1.0], self.corner_level);
        -p0 / (p1 - p0)
    }

    /// Arc point `(s, t(s), 1)` with `f = 1/n²`; the residual is affine in `t`.
    #[inline]
    fn arc_point_3d(&self, s: f64) -> [f64; MAX_DIM] {
        let p0 = self.spec.level_residual(&[s, 0.0, 1.0], self.corner_level);
        let p1 = self.spec.level_residual(&[s, 1.0, 1.0], self.corner_level);
        [s, -p0 / (p1 - p0), 1.0]
    }

    /// `Df` at the arc point `(s, t(s), 1)`, using `f = 1/n²` there. Only
    /// polynomial arithmetic, no roots: this is the inner loop of `off_cone`.
    #[inline]
    fn arc_grad_3d(&self, s: f64) -> [f64; MAX_DIM] {
        // σ_j of (s, 0, 1) and (s, 1, 1); the residual is affine in t.
        let e0 = [1.0, s + 1.0, s, 0.0];
        let e1 = [1.0, s + 2.0, 2.0 * s + 1.0, s];
        let c = self.level_const;
        let (a, b) = match self.spec.family() {
            super::Family::Sigma { k } => (e0[k] - c, e1[k] - e0[k]),
            super::Family::Quotient { k, l } => (e0[k] - c * e0[l], (e1[k] - c * e1[l]) - (e0[k] - c * e0[l])),
        };
        let t = -a / b;
        let e = [1.0, s + t + 1.0, s * t + s + t, s * t];
        // σ_j with one entry removed: drop s, drop t, drop 1.
        let w = [[1.0, t + 1.0, t], [1.0, s + 1.0, s], [1.0, s + t, s * t]];
        let f = self.corner_level;
        let mut g = [0.0; MAX_DIM];
        match self.spec.family() {
            super::Family::Sigma { k } => {
                let sc = f / (k as f64 * e[k]);
                for i in 0..3 {
                    g[i] = sc * w[i][k - 1];
                }
            }
            super::Family::Quotient { k, l } => {
                let sc = f / (k - l) as f64;
                for i in 0..3 {
                    g[i] = sc * (w[i][k - 1] / e[k] - w[i][l - 1] / e[l]);
                }
            }
        }
        g
    }

    /// `f` from the elementary symmetric functions `e` of the eigenvalues when
    /// they lie in the cone and `λ_max ≤ lam_max_bound < n² f`, i.e. on a ray
    /// where `f̂ⁿ = f`. `None` means the caller must take the eigenvalue path.
    #[inline]
    pub(crate) fn value_from_invariants(&self, e: &[f64; MAX_DIM + 1], lam_max_bound: f64) -> Option<f64> {
        if (1..=self.spec.cone_order()).any(|j| e[j] <= 0.0) {
            return None;
        }
        let f = match self.spec.family() {
            super::Family::Sigma { k } => super::signed_root(e[k] / self.spec.denom(), k),
            super::Family::Quotient { k, l } => super::signed_root(e[k] / e[l] / self.spec.denom(), k - l),
        };
        let n = self.cut.n_cut() as f64;
        (lam_max_bound < n * n * f).then_some(f)
    }

    /// Parameter range of the sorted arc: from `t = 1` down to `t = s`.
    fn arc_range_3d(&self) -> Result<(f64, f64)> {
        let lvl = self.corner_level;
        let p0 = self.spec.level_residual(&[0.0, 1.0, 1.0], lvl);
        let p1 = self.spec.level_residual(&[1.0, 1.0, 1.0], lvl);
        let lo = -p0 / (p1 - p0);
        // The diagonal residual q(s) = P(s, s, 1) is quadratic in s.
        let q = |s: f64| self.spec.level_residual(&[s, s, 1.0], lvl);
        let (qm, q0, qp) = (q(-1.0), q(0.0), q(1.0));
        let a = 0.5 * (qp + qm) - q0;
        let b = 0.5 * (qp - qm);
        let c = q0;
        let mut roots = Vec::with_capacity(2);
        if a.abs() < 1e-14 * (b.abs() + c.abs()).max(1.0) {
            if b != 0.0 {
                roots.push(-c / b);
            }
        } else {
            let disc = b * b - 4.0 * a * c;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                roots.push((-b + sq) / (2.0 * a));
                roots.push((-b - sq) / (2.0 * a));
            }
        }
        let hi = roots
            .into_iter()
            .filter(|&r| r >= lo && r <= 1.0 && self.spec.in_cone(&[r + 1e-12, r + 1e-12, 1.0]))
            .fold(f64::NAN, |acc: f64, r| if acc.is_nan() { r } else { acc.min(r) });
        if !hi.is_finite() || !lo.is_finite() || hi < lo {
            return Err(Error::Envelope(format!(
                "no reachable corner arc for n_cut = {} (range {lo} .. {hi})",
                self.cut.n_cut()
            )));
        }
        Ok((lo, hi))
    }

    fn sample_lipschitz(&self) -> f64 {
        let n = self.dim();
        let mut best: f64 = 0.0;
        let norm = |g: &[f64; MAX_DIM]| (0..n).map(|i| g[i] * g[i]).sum::<f64>().sqrt();
        for p in &self.arc {
            best = best.max(norm(&p.grad));
        }
        // Interior of the reachable directions, normalized to λ_max = 1.
        let lo = match n {
            2 => self.corner_2d(),
            _ => self.arc_range_3d().map(|r| r.0).unwrap_or(-1.0),
        };
        let m = LIPSCHITZ_GRID;
        let mut g = [0.0; MAX_DIM];
        for a in 0..=m {
            let s = lo + (1.0 - lo) * a as f64 / m as f64;
            if n == 2 {
                let lam = [s, 1.0];
                if self.spec.in_cone(&lam) && self.spec.level_residual(&lam, self.corner_level) >= 0.0 {
                    self.spec.value_and_grad_unchecked(&lam, &mut g);
                    best = best.max(norm(&g));
                }
                continue;
            }
            for b in 0..=m {
                let t = s + (1.0 - s) * b as f64 / m as f64;
                let lam = [s, t, 1.0];
                if self.spec.in_cone(&lam) && self.spec.level_residual(&lam, self.corner_level) >= 0.0 {
                    self.spec.value_and_grad_unchecked(&lam, &mut g);
                    best = best.max(norm(&g));
                }
            }
        }
        best
    }
}

/// Abscissa of the vertex of the parabola through three points, if convex.
#[inline]
fn parabola_vertex(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> Option<f64> {
    let r = (b.0 - a.0) * (b.1 - c.1);
    let q = (b.0 - c.0) * (b.1 - a.1);
    let den = 2.0 * (r - q);
    // Convex parabola iff the second divided difference is positive.
    let second = ((c.1 - b.1) / (c.0 - b.0) - (b.1 - a.1) / (b.0 - a.0)) / (c.0 - a.0);
    if !(second > 0.0) || den == 0.0 {
        return None;
    }
    let u = b.0 - ((b.0 - a.0) * r - (b.0 - c.0) * q) / den;
    u.is_finite().then_some(u)
}

#[inline]
fn sort_small(x: &mut [f64]) {
    match x.len() {
        2 => {
            if x[1] < x[0] {
                x.swap(0, 1);
            }
        }
        3 => {
            if x[1] < x[0] {
                x.swap(0, 1);
            }
            if x[2] < x[1] {
                x.swap(1, 2);
            }
            if x[1] < x[0] {
                x.swap(0, 1);
            }
        }
        _ => x.sort_by(|a, b| a.total_cmp(b)),
    }
}

/// One-shot `f̂ⁿ(τ)`; builds the envelope tables on every call. Prefer
/// [`Envelope`] when evaluating repeatedly.
pub fn envelope_fhat(spec: &CurvatureSpec, tau: &[f64], cut: ConeCut) -> Result<f64> {
    Envelope::new(*spec, cut)?.fhat(tau)
}

/// One-shot supergradient of `f̂ⁿ` at `τ`.
pub fn envelope_grad(spec: &CurvatureSpec, tau: &[f64], cut: ConeCut) -> Result<Vec<f64>> {
    Envelope::new(*spec, cut)?.fhat_grad(tau)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s2_2d() -> CurvatureSpec {
        CurvatureSpec::sigma(2, 2).unwrap()
    }

    #[test]
    fn cut_rejects_small_n() {
        assert!(ConeCut::new(1).is_err());
        assert!(ConeCut::new(2).is_ok());
        assert_eq!(ConeCut::for_eps(1e-4).n_cut(), 10);
        assert_eq!(ConeCut::for_eps(0.5).n_cut(), 2);
    }

    #[test]
    fn equals_f_on_diagonal() {
        let v = envelope_fhat(&s2_2d(), &[1.0, 1.0], ConeCut::new(100).unwrap()).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_family_is_its_own_envelope() {
        let s1 = CurvatureSpec::sigma(1, 2).unwrap();
        let cut = ConeCut::new(3).unwrap();
        assert!((envelope_fhat(&s1, &[-3.0, 1.0], cut).unwrap() + 1.0).abs() < 1e-15);
        let g = envelope_grad(&s1, &[-3.0, 1.0], cut).unwrap();
        assert_eq!(g, vec![0.5, 0.5]);
    }

    #[test]
    fn negative_diagonal_closed_form() {
        // f = sqrt(λ1 λ2): Df = ½(√ρ, 1/√ρ) with ρ = λ2/λ1 ∈ (n⁻⁴, n⁴).
        let n = 10.0f64;
        let v = envelope_fhat(&s2_2d(), &[-1.0, -1.0], ConeCut::new(10).unwrap()).unwrap();
        let expect = -0.5 * (n * n + 1.0 / (n * n));
        assert!((v - expect).abs() < 1e-9, "{v} vs {expect}");
    }

    /// 400 log-spaced ratios `λ2/λ1 ∈ [n⁻⁴, n⁴]` times 400 radii over the
    /// closure of the cut region. The infimum sits on the boundary ratio,
    /// which a Cartesian grid in `λ` cannot resolve.
    #[test]
    fn negative_diagonal_dense_oracle() {
        let spec = s2_2d();
        let n = 10.0f64;
        let tau = [-1.0, -1.0];
        let (lo, hi) = (-4.0 * n.ln(), 4.0 * n.ln());
        let mut best = f64::INFINITY;
        for i in 0..400 {
            let rho = (lo + (hi - lo) * i as f64 / 399.0).exp();
            let dir = [1.0 / rho.max(1.0), rho / rho.max(1.0)];
            for j in 1..=400 {
                let lam = [n * dir[0] * j as f64 / 400.0, n * dir[1] * j as f64 / 400.0];
                let f = spec.eval(&lam).unwrap();
                if f < (1.0 - 1e-12) / n {
                    continue;
                }
                let g = spec.grad(&lam).unwrap();
                best = best.min(f + g[0] * (tau[0] - lam[0]) + g[1] * (tau[1] - lam[1]));
            }
        }
        let v = envelope_fhat(&spec, &tau, ConeCut::new(10).unwrap()).unwrap();
        assert!((v - best).abs() < 1e-4, "{v} vs {best}");
    }

    #[test]
    fn zero_maps_to_zero() {
        let env = Envelope::new(CurvatureSpec::sigma(2, 3).unwrap(), ConeCut::new(4).unwrap()).unwrap();
        assert_eq!(env.value(&[0.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn gradient_positive_and_bounded() {
        let env = Envelope::new(CurvatureSpec::sigma(2, 3).unwrap(), ConeCut::new(3).unwrap()).unwrap();
        for tau in [[-1.0, 0.5, 2.0], [-3.0, -2.0, -1.0], [0.1, 0.1, 0.1], [5.0, -4.0, 0.0]] {
            let e = env.evaluate(&tau);
            let norm = e.grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            assert!(e.grad.iter().all(|&g| g > 0.0), "{:?}", e.grad);
            assert!(norm <= env.lipschitz() * (1.0 + 1e-9));
        }
    }

    #[test]
    fn parabola_vertex_exact_on_quadratic() {
        let f = |x: f64| (x - 0.3).powi(2) + 1.0;
        let u = parabola_vertex((-1.0, f(-1.0)), (0.2, f(0.2)), (2.0, f(2.0))).unwrap();
        assert!((u - 0.3).abs() < 1e-14);
        assert!(parabola_vertex((0.0, 0.0), (1.0, 1.0), (2.0, 0.0)).is_none());
    }

    #[test]
    fn off_cone_matches_dense_arc_scan() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for spec in [CurvatureSpec::sigma(2, 3).unwrap(), CurvatureSpec::sigma(3, 3).unwrap(), CurvatureSpec::quotient(3, 1, 3).unwrap()] {
            for n in [2, 4] {
                let env = Envelope::new(spec, ConeCut::new(n).unwrap()).unwrap();
                let dense = Envelope::with_arc_samples(spec, ConeCut::new(n).unwrap(), 1024).unwrap();
                let (lo, hi) = env.arc_range_3d().unwrap();
                let grads: Vec<_> = (0..=100_000).map(|j| env.arc_grad_3d(lo + (hi - lo) * j as f64 / 100_000.0)).collect();
                for _ in 0..200 {
                    let mut tau = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
                    sort_small(&mut tau);
                    if env.ray_feasible(&tau) {
                        continue;
                    }
                    let brute = grads.iter().map(|g| g[0] * tau[0] + g[1] * tau[1] + g[2] * tau[2]).fold(f64::INFINITY, f64::min);
                    let v = env.value(&tau);
                    let scale = 1.0 + tau.iter().map(|x| x.abs()).sum::<f64>();
                    assert!(v <= brute + 1e-12 * scale, "{spec:?} n={n} {tau:?}: {v} > {brute}");
                    assert!(brute - v < 1e-8 * scale, "{spec:?} n={n} {tau:?}: {v} vs {brute}");
                    assert!((dense.value(&tau) - v).abs() < 1e-11 * scale);
                }
            }
        }
    }
}
