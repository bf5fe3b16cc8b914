//! Sup/inf convolutions, a pointwise viscosity probe and relabelling.

use std::io::Write;
use std::path::Path;

use crate::cone::CurvatureSpec;
use crate::error::{Error, Result};
use crate::grid::linalg::{eigenvalues_sorted, gamma_exact, SymMat, DEFAULT_EIG_TOL};
use crate::grid::stencil::derivatives;
use crate::grid::{RegularizationParams, ScalarField};

/// `ω^ε(x) = max_y { ω(y) − |x − y|²/ε }` over grid nodes `y`.
///
/// The penalty splits over axes, so the maximum is taken one axis at a time.
/// Maximizers satisfy `|x − y|² ≤ ε osc(ω)`, which bounds the window. The
/// far-field value is carried over but not enforced on the result.
pub fn sup_convolution(field: &ScalarField, eps_c: f64) -> ScalarField {
    convolve(field, eps_c, 1.0)
}

/// `ω_ε(x) = min_y { ω(y) + |x − y|²/ε }`, the dual of [`sup_convolution`].
pub fn inf_convolution(field: &ScalarField, eps_c: f64) -> ScalarField {
    convolve(field, eps_c, -1.0)
}

fn convolve(field: &ScalarField, eps_c: f64, sign: f64) -> ScalarField {
    let g = field.grid();
    let h = g.h();
    let osc = field.max() - field.min();
    let radius = ((eps_c * osc).sqrt() / h).ceil() as usize;
    // Work on sign·ω so both cases are a max.
    let mut cur: Vec<f64> = field.values().iter().map(|v| sign * v).collect();
    let st = g.strides();
    let penalty: Vec<f64> = (0..=radius).map(|k| (k as f64 * h).powi(2) / eps_c).collect();
    for a in 0..g.dims() {
        let n = g.shape()[a];
        let mut next = cur.clone();
        for i in 0..g.len() {
            let c = g.coords(i)[a];
            let lo = c.saturating_sub(radius);
            let hi = (c + radius).min(n - 1);
            let base = i - c * st[a];
            let mut best = f64::NEG_INFINITY;
            for m in lo..=hi {
                best = best.max(cur[base + m * st[a]] - penalty[c.abs_diff(m)]);
            }
            next[i] = best;
        }
        cur = next;
    }
    let values = cur.into_iter().map(|v| sign * v).collect();
    ScalarField::from_parts_unchecked(g.clone(), values, field.far_value())
}

/// Most negative second difference of `w(x) + sign·|x|²/ε` along any grid
/// line, scaled by `1/h²` away; zero or positive means discretely convex.
pub fn convexity_defect(conv: &ScalarField, eps_c: f64, sign: f64) -> f64 {
    let g = conv.grid();
    let d = g.dims();
    let shifted: Vec<f64> = (0..g.len())
        .map(|i| {
            let x = g.position(i);
            sign * conv.values()[i] + x[..d].iter().map(|v| v * v).sum::<f64>() / eps_c
        })
        .collect();
    let st = g.strides();
    let mut worst: f64 = 0.0;
    for i in 0..g.len() {
        let c = g.coords(i);
        for a in 0..d {
            if c[a] > 0 && c[a] + 1 < g.shape()[a] {
                worst = worst.min(shifted[i + st[a]] - 2.0 * shifted[i] + shifted[i - st[a]]);
            }
        }
    }
    worst
}

/// `Ψ(u)` pointwise, including the far-field value. `psi` must be
/// nondecreasing; this is checked on the values present.
pub fn relabel<F: Fn(f64) -> f64>(field: &ScalarField, psi: F) -> Result<ScalarField> {
    let mut pairs: Vec<(f64, f64)> = field.values().iter().map(|&v| (v, psi(v))).collect();
    pairs.push((field.far_value(), psi(field.far_value())));
    if pairs.iter().any(|(_, w)| !w.is_finite()) {
        return Err(Error::InvalidSpec("relabelling produced a non-finite value".into()));
    }
    let mut sorted = pairs.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    if sorted.windows(2).any(|w| w[1].1 < w[0].1) {
        return Err(Error::InvalidSpec("relabelling map is not nondecreasing".into()));
    }
    let far = pairs.pop().map(|p| p.1).unwrap_or(0.0);
    Ok(ScalarField::from_parts_unchecked(field.grid().clone(), pairs.into_iter().map(|p| p.1).collect(), far))
}

/// Which inequality a probe violation breaks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// `q > F(γ R γ) + σ tr R` for the quadratic touching from above.
    Sub,
    /// `q < F(γ R γ) + σ tr R` for the quadratic touching from below.
    Super,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Sub => "sub",
            Side::Super => "super",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeViolation {
    pub cell: usize,
    pub p: [f64; 3],
    pub q: f64,
    pub r: SymMat,
    pub slack: f64,
    pub side: Side,
}

/// Outcome of [`viscosity_probe`].
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeReport {
    /// Sorted by slack, largest first.
    pub violations: Vec<ProbeViolation>,
    pub max_slack: f64,
    pub n_probed: usize,
    /// Cells with `|p| ≤ tol_p`: the test direction is free there and no
    /// finite sample of directions settles the inequality.
    pub n_indeterminate: usize,
    /// Cells whose projected Hessian left the cone; `F` is undefined there.
    pub n_outside_cone: usize,
    pub threshold: f64,
}

impl ProbeReport {
    pub fn count(&self, side: Side) -> usize {
        self.violations.iter().filter(|v| v.side == side).count()
    }
}

/// Probe settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeConfig {
    /// Gradients with `|p| ≤ tol_p` are indeterminate.
    pub tol_p: f64,
    /// Cone membership is tested on `κ + tol_cone`.
    pub tol_cone: f64,
    /// Hessian inflation `R ± margin·I` that makes the quadratic touch.
    pub margin: f64,
    /// Slack above which a cell counts as a violation; `None` means
    /// `5e-2 · max |u_t|`.
    pub threshold: Option<f64>,
    /// Viscosity `σ` of the equation being probed.
    pub sigma: f64,
}

impl ProbeConfig {
    pub fn for_spacing(h: f64) -> Self {
        Self { tol_p: 1e-3, tol_cone: 1e-9, margin: 10.0 * h * h, threshold: None, sigma: 0.0 }
    }

    /// Settings for snapshots of the approximate flow. Where `|p| ≲ ε` the
    /// regularized operator is not close to the limit one, so those cells
    /// are indeterminate.
    pub fn for_flow(h: f64, params: &RegularizationParams) -> Self {
        Self { tol_p: 10.0 * params.eps, sigma: params.sigma, ..Self::for_spacing(h) }
    }
}

/// Tests the inequalities of a viscosity solution of
/// `u_t = F(γ_p D²u γ_p) + σΔu` at every non-far interior cell, using the
/// local space-time quadratic with `p, R` from central differences of `cur`
/// and `q` from the centred time difference.
pub fn viscosity_probe(
    frames: [(&ScalarField, f64); 3],
    spec: &CurvatureSpec,
    cfg: &ProbeConfig,
) -> Result<ProbeReport> {
    let [(prev, t0), (cur, t1), (next, t2)] = frames;
    let g = cur.grid();
    if prev.grid() != g || next.grid() != g {
        return Err(Error::SnapshotMismatch("frames live on different grids".into()));
    }
    let (dt0, dt1) = (t1 - t0, t2 - t1);
    if !(dt0 > 0.0 && dt1 > 0.0) || (dt0 - dt1).abs() > 1e-9 * dt0.max(dt1) {
        return Err(Error::SnapshotMismatch(format!("unequal time steps {dt0} and {dt1}")));
    }
    if spec.dim() != g.dims() {
        return Err(Error::InvalidSpec("curvature spec and grid dimensions differ".into()));
    }
    let (st, dims, h) = (g.strides(), g.dims(), g.h());
    let cells: Vec<usize> = (0..g.len()).filter(|&i| g.is_interior(i) && !g.is_far(i)).collect();
    let q_of = |i: usize| (next.values()[i] - prev.values()[i]) / (dt0 + dt1);
    let threshold = cfg
        .threshold
        .unwrap_or_else(|| 5e-2 * cells.iter().map(|&i| q_of(i).abs()).fold(0.0, f64::max));
    let mut rep = ProbeReport {
        violations: Vec::new(),
        max_slack: f64::NEG_INFINITY,
        n_probed: 0,
        n_indeterminate: 0,
        n_outside_cone: 0,
        threshold,
    };
    let eval = |p: &[f64], r: &SymMat| -> Option<f64> {
        let m = r.congruence(&gamma_exact(p));
        let eig = eigenvalues_sorted(&m, DEFAULT_EIG_TOL);
        let shifted: Vec<f64> = eig[..dims].iter().map(|k| k + cfg.tol_cone).collect();
        if !spec.in_cone(&shifted) {
            return None;
        }
        spec.eval(&eig[..dims]).ok().map(|f| f + cfg.sigma * r.trace())
    };
    let id = SymMat::identity(dims);
    for &i in &cells {
        let (p, r) = derivatives(cur.values(), st, dims, h, i);
        let norm = p[..dims].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= cfg.tol_p {
            rep.n_indeterminate += 1;
            continue;
        }
        let q = q_of(i);
        let above = eval(&p[..dims], &r.add(&id.scale(cfg.margin)));
        let below = eval(&p[..dims], &r.add(&id.scale(-cfg.margin)));
        if above.is_none() && below.is_none() {
            rep.n_outside_cone += 1;
            continue;
        }
        rep.n_probed += 1;
        for (side, slack) in [(Side::Sub, above.map(|f| q - f)), (Side::Super, below.map(|f| f - q))] {
            let Some(slack) = slack else { continue };
            rep.max_slack = rep.max_slack.max(slack);
            if slack > threshold {
                rep.violations.push(ProbeViolation { cell: i, p, q, r: r.clone(), slack, side });
            }
        }
    }
    rep.violations.sort_by(|a, b| b.slack.total_cmp(&a.slack).then(a.cell.cmp(&b.cell)));
    Ok(rep)
}

/// `probe.csv`: `cell,px,py[,pz],q,slack,side` with the flat cell index.
pub fn write_probe_csv(path: &Path, dims: usize, rep: &ProbeReport) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let axes = ["px", "py", "pz"];
    writeln!(f, "cell,{},q,slack,side", axes[..dims].join(","))?;
    for v in &rep.violations {
        let p: Vec<String> = v.p[..dims].iter().map(|x| x.to_string()).collect();
        writeln!(f, "{},{},{},{},{}", v.cell, p.join(","), v.q, v.slack, v.side.as_str())?;
    }
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn grid(n: usize, h: f64) -> GridSpec {
        GridSpec::centered(2, n, h, 0.5 * (n as f64 - 1.0) * h).unwrap()
    }

    fn field<F: Fn(&[f64]) -> f64>(g: &GridSpec, f: F) -> ScalarField {
        let vals = (0..g.len()).map(|i| f(&g.position(i)[..2])).collect();
        ScalarField::from_parts_unchecked(g.clone(), vals, 0.0)
    }

    /// Brute force over every node.
    fn sup_brute(w: &ScalarField, eps: f64) -> Vec<f64> {
        let g = w.grid();
        (0..g.len())
            .map(|i| {
                let x = g.position(i);
                (0..g.len())
                    .map(|j| {
                        let y = g.position(j);
                        w.values()[j] - ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)) / eps
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    }

    #[test]
    fn constant_is_fixed() {
        let g = grid(11, 0.1);
        let c = field(&g, |_| 2.5);
        assert_eq!(sup_convolution(&c, 0.1).values(), c.values());
        assert_eq!(inf_convolution(&c, 0.1).values(), c.values());
    }

    #[test]
    fn separable_pass_matches_brute_force() {
        let g = grid(15, 0.1);
        let w = field(&g, |x| (3.0 * x[0]).sin() * (2.0 * x[1] + 0.3).cos() + x[0].abs());
        for eps in [0.01, 0.1, 1.0] {
            let fast = sup_convolution(&w, eps);
            let slow = sup_brute(&w, eps);
            for (a, b) in fast.values().iter().zip(&slow) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn paraboloid_closed_form() {
        let h = 0.02;
        let g = grid(101, h);
        let eps = 0.5;
        let down = field(&g, |x| -(x[0] * x[0] + x[1] * x[1]));
        let up = field(&g, |x| x[0] * x[0] + x[1] * x[1]);
        let s = sup_convolution(&down, eps);
        let i = inf_convolution(&up, eps);
        for k in 0..g.len() {
            let x = g.position(k);
            let r2 = x[0] * x[0] + x[1] * x[1];
            // Maximizer y = x/(1+ε) stays on the grid's convex hull.
            assert!((s.values()[k] + r2 / (1.0 + eps)).abs() <= 2.0 * h * r2.sqrt() + 1e-12);
            assert!((i.values()[k] - r2 / (1.0 + eps)).abs() <= 2.0 * h * r2.sqrt() + 1e-12);
        }
    }

    #[test]
    fn relabel_examples() {
        let g = grid(11, 0.1);
        let u = field(&g, |x| x[0] - 0.05);
        assert_eq!(relabel(&u, |s| s).unwrap(), u);
        let twice = relabel(&u, |s| 2.0 * s).unwrap();
        let a = crate::front::extract_front(&u, 0.0).vertices();
        let b = crate::front::extract_front(&twice, 0.0).vertices();
        assert_eq!(a.len(), b.len());
        for (p, q) in a.iter().zip(&b) {
            assert_eq!(p.position, q.position);
        }
        assert!(relabel(&u, |s| -s).is_err());
    }

    #[test]
    fn stationary_field_fails_supersolution() {
        let g = grid(31, 0.05);
        let u = field(&g, |x| x[0] * x[0] + x[1] * x[1] - 0.25);
        let spec = CurvatureSpec::sigma(1, 2).unwrap();
        let cfg = ProbeConfig { threshold: Some(1e-3), ..ProbeConfig::for_spacing(0.05) };
        let rep = viscosity_probe([(&u, 0.0), (&u, 0.1), (&u, 0.2)], &spec, &cfg).unwrap();
        assert!(rep.count(Side::Super) > 0);
        assert_eq!(rep.count(Side::Sub), 0);
        assert!(rep.n_indeterminate >= 1);
        assert!(rep.violations.windows(2).all(|w| w[0].slack >= w[1].slack));
        assert!(viscosity_probe([(&u, 0.0), (&u, 0.1), (&u, 0.3)], &spec, &cfg).is_err());
    }

    #[test]
    fn planar_heat_solution_passes() {
        // u = e^{−σ t} sin x solves u_t = σ u_xx, and γ_p R γ_p = 0.
        let h = 0.05;
        let g = grid(41, h);
        let sigma = 0.3;
        let dt = 1e-3;
        let frame = |t: f64| field(&g, |x| (-sigma * t).exp() * (x[0] + 0.4).sin());
        let (a, b, c) = (frame(0.0), frame(dt), frame(2.0 * dt));
        let spec = CurvatureSpec::sigma(1, 2).unwrap();
        let cfg = ProbeConfig { threshold: Some(10.0 * h * h), sigma, ..ProbeConfig::for_spacing(h) };
        let rep = viscosity_probe([(&a, 0.0), (&b, dt), (&c, 2.0 * dt)], &spec, &cfg).unwrap();
        assert!(rep.n_probed > 0);
        assert!(rep.violations.is_empty(), "{:?}", rep.violations.first());
    }
}
