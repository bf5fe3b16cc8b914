//! Randomized property suites shared by `verify`, the experiments and the
//! acceptance tests. Each returns failure counts plus the worst residual.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{convexity_defect, inf_convolution, sup_convolution};
use crate::cone::{CurvatureSpec, Envelope};
use crate::error::Result;
use crate::front::FrontSample;
use crate::grid::{gamma_eps, GridSpec, ScalarField, SymMat};
use crate::noncollapse::z_value;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Outcome of one property suite.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteResult {
    pub name: String,
    pub checked: usize,
    pub failures: usize,
    /// Worst residual or slack seen, in the suite's own units.
    pub worst: f64,
}

impl SuiteResult {
    fn new(name: &str) -> Self {
        Self { name: name.to_string(), checked: 0, failures: 0, worst: 0.0 }
    }

    fn record(&mut self, residual: f64, ok: bool) {
        self.checked += 1;
        self.worst = self.worst.max(residual);
        if !ok {
            self.failures += 1;
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.checked > 0
    }
}

/// Random `τ`: half uniform over `[−3, 3]ⁿ`, half over `[0, n_cut)ⁿ` so the
/// equality region is hit often.
fn random_tau(rng: &mut ChaCha8Rng, n: usize, n_cut: f64) -> Vec<f64> {
    if rng.gen_bool(0.5) {
        (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect()
    } else {
        (0..n).map(|_| rng.gen_range(0.0..n_cut)).collect()
    }
}

/// Equality, concavity, monotonicity and Lipschitz checks of `f̂ⁿ` on
/// `draws` random points.
pub fn envelope_audit(env: &Envelope, draws: usize, seed: u64) -> Result<Vec<SuiteResult>> {
    let spec = env.spec();
    let n = env.dim();
    let cut = env.cut();
    let n_cut = cut.n_cut() as f64;
    let lip = env.lipschitz();
    let mut rng = rng(seed);
    let mut equality = SuiteResult::new("envelope_equality");
    let mut concavity = SuiteResult::new("envelope_concavity");
    let mut monotone = SuiteResult::new("envelope_monotonicity");
    let mut lipschitz = SuiteResult::new("envelope_lipschitz");
    for _ in 0..draws {
        let tau = random_tau(&mut rng, n, n_cut);
        let f_tau = env.fhat(&tau)?;
        if spec.cone_membership(&tau, Some(cut)) {
            let err = (f_tau - spec.eval(&tau)?).abs();
            equality.record(err, err <= 1e-6);
        }
        let other = random_tau(&mut rng, n, n_cut);
        let f_other = env.fhat(&other)?;
        let mid: Vec<f64> = tau.iter().zip(&other).map(|(a, b)| 0.5 * (a + b)).collect();
        let gap = 0.5 * (f_tau + f_other) - env.fhat(&mid)?;
        concavity.record(gap, gap <= 1e-7);
        let up: Vec<f64> = tau.iter().map(|t| t + rng.gen_range(0.0..1.0)).collect();
        let drop = f_tau - env.fhat(&up)?;
        monotone.record(drop, drop <= 1e-9);
        let dist = tau.iter().zip(&other).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let excess = (f_tau - f_other).abs() - lip * dist;
        lipschitz.record(excess, excess <= 1e-9 * (1.0 + dist));
    }
    Ok(vec![equality, concavity, monotone, lipschitz])
}

/// `|f(tκ) − t f(κ)| ≤ 1e-10 t` for random `κ` in the cone.
pub fn homogeneity_suite(spec: &CurvatureSpec, draws: usize, seed: u64) -> Result<SuiteResult> {
    let mut rng = rng(seed);
    let mut out = SuiteResult::new("homogeneity");
    let n = spec.dim();
    while out.checked < draws {
        let kappa: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..3.0)).collect();
        if !spec.in_cone(&kappa) {
            continue;
        }
        let t = rng.gen_range(0.1..10.0);
        let scaled: Vec<f64> = kappa.iter().map(|k| t * k).collect();
        let err = (spec.eval(&scaled)? - t * spec.eval(&kappa)?).abs();
        out.record(err, err <= 1e-10 * t);
    }
    Ok(out)
}

/// `γ^ε γ^ε = I − p pᵀ/(ε² + |p|²)` on random `(p, ε)`, entrywise.
pub fn gamma_identity_suite(draws: usize, seed: u64) -> SuiteResult {
    let mut rng = rng(seed);
    let mut out = SuiteResult::new("gamma_identity");
    for _ in 0..draws {
        let n = if rng.gen_bool(0.5) { 2 } else { 3 };
        let scale = 10f64.powf(rng.gen_range(-3.0..1.0));
        let p: Vec<f64> = (0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
        let eps = 10f64.powf(rng.gen_range(-4.0..0.0));
        let g = gamma_eps(&p, eps);
        let sq = g.matmul(&g);
        let p2: f64 = p.iter().map(|x| x * x).sum();
        let mut expect = SymMat::identity(n);
        for i in 0..n {
            for j in i..n {
                expect.set(i, j, f64::from(i == j) - p[i] * p[j] / (eps * eps + p2));
            }
        }
        let r = sq.max_abs_diff(&expect);
        out.record(r, r <= 1e-12);
    }
    out
}

/// `Z(x, y) = F/2 (|y − C_x|² − (δ/F)²)` with `C_x = x + (δ/F) ν` on random
/// configurations.
pub fn z_identity_suite(draws: usize, seed: u64) -> Result<SuiteResult> {
    let mut rng = rng(seed);
    let mut out = SuiteResult::new("z_ball_identity");
    for _ in 0..draws {
        let dims = if rng.gen_bool(0.5) { 2 } else { 3 };
        let mut x = [0.0; 3];
        let mut y = [0.0; 3];
        let mut nu = [0.0; 3];
        for k in 0..dims {
            x[k] = rng.gen_range(-2.0..2.0);
            y[k] = rng.gen_range(-2.0..2.0);
            nu[k] = rng.gen_range(-1.0..1.0);
        }
        let norm = nu.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
        nu.iter_mut().for_each(|v| *v /= norm);
        let speed = rng.gen_range(0.5..5.0);
        let delta = rng.gen_range(0.1..1.0);
        let sample = FrontSample { dims, position: x, inward_normal: nu, speed, weight: 1.0 };
        let z = z_value(&sample, &y[..dims], delta)?;
        let rho = delta / speed;
        let sq: f64 = (0..dims).map(|k| (y[k] - x[k] - rho * nu[k]).powi(2)).sum();
        let r = (z - 0.5 * speed * (sq - rho * rho)).abs();
        out.record(r, r <= 1e-12);
    }
    Ok(out)
}

/// Smooth Lipschitz field: random sinusoids with wavenumbers in `[10, 20]`,
/// tapered to zero before the far-field radius.
fn random_lipschitz_field(grid: &GridSpec, rng: &mut ChaCha8Rng) -> Result<ScalarField> {
    let waves: Vec<(f64, [f64; 2], f64)> = (0..3)
        .map(|_| {
            let k = rng.gen_range(10.0..20.0);
            let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            (rng.gen_range(-0.5..0.5), [k * th.cos(), k * th.sin()], rng.gen_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    let (r0, r1) = (0.5 * grid.radius(), 0.9 * grid.radius());
    ScalarField::from_fn(grid.clone(), 0.0, |x| {
        let r = x[0].hypot(x[1]);
        let s = ((r - r0) / (r1 - r0)).clamp(0.0, 1.0);
        let taper = 1.0 - s * s * (3.0 - 2.0 * s);
        taper * waves.iter().map(|(a, k, c)| a * (k[0] * x[0] + k[1] * x[1] + c).sin()).sum::<f64>()
    })
}

pub const CONVOLUTION_EPS: [f64; 3] = [1e-1, 1e-2, 1e-3];

/// Sandwich, convexity shift and convergence of sup/inf convolutions on
/// `fields` random Lipschitz fields over a 101² grid with `h = 0.01`.
pub fn convolution_suite(fields: usize, seed: u64) -> Result<Vec<SuiteResult>> {
    let grid = GridSpec::centered(2, 101, 0.01, 0.5)?;
    let mut rng = rng(seed);
    let mut sandwich = SuiteResult::new("convolution_sandwich");
    let mut convex = SuiteResult::new("convolution_convexity");
    let mut converge = SuiteResult::new("convolution_convergence");
    for _ in 0..fields {
        let w = random_lipschitz_field(&grid, &mut rng)?;
        let mut last = [f64::INFINITY; 2];
        let mut strictly = true;
        for eps in CONVOLUTION_EPS {
            let up = sup_convolution(&w, eps);
            let down = inf_convolution(&w, eps);
            let mut worst_order: f64 = 0.0;
            let mut err = [0.0f64; 2];
            for ((&a, &b), &c) in down.values().iter().zip(w.values()).zip(up.values()) {
                worst_order = worst_order.max(a - b).max(b - c);
                err[0] = err[0].max(c - b);
                err[1] = err[1].max(b - a);
            }
            sandwich.record(worst_order, worst_order <= 0.0);
            let slack = -convexity_defect(&up, eps, 1.0).min(convexity_defect(&down, eps, -1.0));
            convex.record(slack, slack <= 1e-10);
            strictly &= err[0] < last[0] && err[1] < last[1];
            last = err;
        }
        converge.record(last[0].max(last[1]), strictly);
    }
    Ok(vec![sandwich, convex, converge])
}

/// Families covered by `verify`: each σ_k and quotient in 2D and 3D.
pub fn audit_families() -> Vec<CurvatureSpec> {
    let mut out = Vec::new();
    for dim in [2, 3] {
        for k in 1..=dim {
            out.push(CurvatureSpec::sigma(k, dim).expect("valid family"));
        }
        for k in 2..=dim {
            for l in 1..k {
                out.push(CurvatureSpec::quotient(k, l, dim).expect("valid family"));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::ConeCut;

    #[test]
    fn suites_pass_small() {
        let env = Envelope::new(CurvatureSpec::sigma(2, 3).unwrap(), ConeCut::new(4).unwrap()).unwrap();
        for r in envelope_audit(&env, 500, 1).unwrap() {
            assert!(r.passed(), "{r:?}");
        }
        assert!(gamma_identity_suite(200, 2).passed());
        assert!(z_identity_suite(200, 3).unwrap().passed());
        assert!(homogeneity_suite(env.spec(), 100, 4).unwrap().passed());
        for r in convolution_suite(2, 5).unwrap() {
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn same_seed_same_draws() {
        assert_eq!(gamma_identity_suite(50, 9), gamma_identity_suite(50, 9));
    }
}
