use super::linalg::{eigenvalues_sorted, gamma_eps, SymMat, DEFAULT_EIG_TOL};
use super::{RegularizationParams, ScalarField};
use crate::cone::Envelope;
use crate::error::{Error, Result};

/// Central-difference gradient at an interior node.
pub fn gradient_at(field: &ScalarField, cell: &[usize]) -> Result<Vec<f64>> {
    let flat = interior_index(field, cell)?;
    let (p, _) = derivatives(field.values(), field.grid().strides(), field.grid().dims(), field.grid().h(), flat);
    Ok(p[..field.grid().dims()].to_vec())
}

/// Central second differences; mixed terms from the four-corner stencil.
pub fn hessian_at(field: &ScalarField, cell: &[usize]) -> Result<SymMat> {
    let flat = interior_index(field, cell)?;
    let (_, hess) = derivatives(field.values(), field.grid().strides(), field.grid().dims(), field.grid().h(), flat);
    Ok(hess)
}

fn interior_index(field: &ScalarField, cell: &[usize]) -> Result<usize> {
    let g = field.grid();
    let flat = g.check_index(cell)?;
    if !g.is_interior(flat) {
        return Err(Error::StencilOutOfRange(cell.to_vec()));
    }
    Ok(flat)
}

/// Gradient and Hessian at interior flat index `i`.
#[inline]
pub(crate) fn derivatives(u: &[f64], st: [usize; 3], dims: usize, h: f64, i: usize) -> ([f64; 3], SymMat) {
    let inv2h = 0.5 / h;
    let invh2 = 1.0 / (h * h);
    let inv4h2 = 0.25 * invh2;
    let c = u[i];
    let mut p = [0.0; 3];
    let mut a = [[0.0; 3]; 3];
    for ax in 0..dims {
        let s = st[ax];
        let up = u[i + s];
        let um = u[i - s];
        p[ax] = (up - um) * inv2h;
        a[ax][ax] = (up - 2.0 * c + um) * invh2;
        for bx in ax + 1..dims {
            let t = st[bx];
            let v = (u[i + s + t] - u[i + s - t] - u[i - s + t] + u[i - s - t]) * inv4h2;
            a[ax][bx] = v;
            a[bx][ax] = v;
        }
    }
    (p, SymMat::from_array(dims, a))
}

/// True when every node of the 3ⁿ stencil around `i` equals `u[i]`; the
/// operator then vanishes exactly.
#[inline]
pub(crate) fn stencil_is_flat(u: &[f64], st: [usize; 3], dims: usize, i: usize) -> bool {
    let c = u[i];
    if dims == 2 {
        let (sx, sy) = (st[0], st[1]);
        let base = i - sx - sy;
        for r in 0..3 {
            let row = base + r * sx;
            if u[row] != c || u[row + sy] != c || u[row + 2 * sy] != c {
                return false;
            }
        }
        true
    } else {
        let (sx, sy, sz) = (st[0], st[1], st[2]);
        let base = i - sx - sy - sz;
        for r in 0..3 {
            for q in 0..3 {
                let row = base + r * sx + q * sy;
                if u[row] != c || u[row + sz] != c || u[row + 2 * sz] != c {
                    return false;
                }
            }
        }
        true
    }
}

/// Intermediate quantities of one operator evaluation.
#[derive(Clone, Copy, Debug)]
pub struct OperatorParts {
    pub eigenvalues: [f64; 3],
    pub fhat: f64,
    pub laplacian: f64,
    pub value: f64,
}

/// `F̂ⁿ(γ^ε D²u γ^ε) + σ Δu` from a gradient and Hessian.
#[inline]
pub fn operator_value_from(p: &[f64], hess: &SymMat, env: &Envelope, params: &RegularizationParams) -> f64 {
    operator_parts(p, hess, env, params).value
}

#[inline]
pub(crate) fn operator_parts(
    p: &[f64],
    hess: &SymMat,
    env: &Envelope,
    params: &RegularizationParams,
) -> OperatorParts {
    let n = hess.size();
    let g = gamma_eps(&p[..n], params.eps);
    let m = hess.congruence(&g);
    let eigenvalues = eigenvalues_sorted(&m, DEFAULT_EIG_TOL);
    let fhat = env.value(&eigenvalues[..n]);
    let laplacian = hess.trace();
    OperatorParts { eigenvalues, fhat, laplacian, value: fhat + params.sigma * laplacian }
}

/// Hot-path value; skips the eigen-solve when `f` is linear, where
/// `f̂ⁿ = f` is a multiple of the trace.
#[inline]
pub(crate) fn kernel_value(p: &[f64], hess: &SymMat, env: &Envelope, params: &RegularizationParams) -> f64 {
    if env.spec().is_linear() {
        let n = hess.size();
        let g = gamma_eps(&p[..n], params.eps);
        let m = hess.congruence(&g);
        return m.trace() / n as f64 + params.sigma * hess.trace();
    }
    let n = hess.size();
    let g = gamma_eps(&p[..n], params.eps);
    let m = hess.congruence(&g);
    // Inside the reachable cone f̂ⁿ = f, which depends only on the principal
    // minor sums of m; the Frobenius norm bounds λ_max.
    let e = m.principal_minor_sums();
    if let Some(f) = env.value_from_invariants(&e, m.frobenius()) {
        return f + params.sigma * hess.trace();
    }
    let eigenvalues = eigenvalues_sorted(&m, DEFAULT_EIG_TOL);
    env.value(&eigenvalues[..n]) + params.sigma * hess.trace()
}

/// Operator value at an interior node.
pub fn operator_value(
    field: &ScalarField,
    cell: &[usize],
    env: &Envelope,
    params: &RegularizationParams,
) -> Result<f64> {
    let flat = interior_index(field, cell)?;
    let g = field.grid();
    let (p, hess) = derivatives(field.values(), g.strides(), g.dims(), g.h(), flat);
    Ok(operator_value_from(&p[..g.dims()], &hess, env, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::{ConeCut, CurvatureSpec};
    use crate::grid::GridSpec;

    fn grid2(n: usize, h: f64) -> GridSpec {
        GridSpec::centered(2, n, h, 0.5 * (n as f64 - 1.0) * h).unwrap()
    }

    fn field<F: Fn(&[f64]) -> f64>(g: GridSpec, f: F) -> ScalarField {
        let vals = (0..g.len()).map(|i| f(&g.position(i)[..g.dims()])).collect();
        ScalarField::from_parts_unchecked(g, vals, 0.0)
    }

    #[test]
    fn gradient_exact_on_linear() {
        let f = field(grid2(11, 0.1), |x| 3.0 * x[0] + 2.0 * x[1]);
        let p = gradient_at(&f, &[4, 7]).unwrap();
        assert!((p[0] - 3.0).abs() < 1e-12 && (p[1] - 2.0).abs() < 1e-12);
        let c = field(grid2(11, 0.1), |_| 4.0);
        assert_eq!(gradient_at(&c, &[5, 5]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn gradient_of_sine() {
        let f = field(grid2(11, 1e-2), |x| x[0].sin());
        let p = gradient_at(&f, &[5, 5]).unwrap();
        assert!((p[0] - 1.0).abs() < 2e-5);
    }

    #[test]
    fn boundary_cell_rejected() {
        let f = field(grid2(11, 0.1), |x| x[0]);
        assert!(matches!(gradient_at(&f, &[0, 3]), Err(Error::StencilOutOfRange(_))));
        assert!(matches!(hessian_at(&f, &[3, 10]), Err(Error::StencilOutOfRange(_))));
        assert!(gradient_at(&f, &[3, 11]).is_err());
    }

    #[test]
    fn hessian_exact_on_quadratic() {
        let f = field(grid2(11, 0.1), |x| x[0] * x[0] + x[0] * x[1]);
        let h = hessian_at(&f, &[3, 6]).unwrap();
        let want = SymMat::from_rows(&[&[2.0, 1.0], &[1.0, 0.0]]);
        assert!(h.max_abs_diff(&want) < 1e-10);
        let c = field(grid2(11, 0.1), |_| -1.5);
        assert_eq!(hessian_at(&c, &[5, 5]).unwrap(), SymMat::zeros(2));
    }

    #[test]
    fn hessian_of_exponential() {
        let f = field(grid2(11, 1e-2), |x| (x[0] + x[1]).exp());
        let h = hessian_at(&f, &[5, 5]).unwrap();
        assert!(h.max_abs_diff(&SymMat::from_rows(&[&[1.0, 1.0], &[1.0, 1.0]])) < 1e-3);
    }

    #[test]
    fn operator_examples() {
        let s1 = CurvatureSpec::sigma(1, 2).unwrap();
        let env = Envelope::new(s1, ConeCut::new(10).unwrap()).unwrap();
        let params = RegularizationParams::new(1e-4, 10, 0.0).unwrap();
        let lin = field(grid2(11, 0.1), |x| x[0] - 2.0 * x[1]);
        assert!(operator_value(&lin, &[5, 5], &env, &params).unwrap().abs() < 1e-12);
        let quad = field(grid2(11, 0.1), |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        assert!((operator_value(&quad, &[5, 5], &env, &params).unwrap() - 1.0).abs() < 1e-12);
        // |x| at (2, 0): D²|x| = (I − x̂x̂ᵀ)/|x|, eigenvalues (0, 1/2) → 0.25.
        let g = GridSpec::centered(2, 61, 0.1, 3.0).unwrap();
        let cone = field(g, |x| (x[0] * x[0] + x[1] * x[1]).sqrt());
        let v = operator_value(&cone, &[50, 30], &env, &params).unwrap();
        assert!((v - 0.25).abs() < 5e-3, "{v}");
    }

    #[test]
    fn flat_stencil_detection() {
        let f = field(grid2(7, 0.1), |x| if x[0] > 0.15 { 1.0 } else { 0.0 });
        let g = f.grid();
        assert!(stencil_is_flat(f.values(), g.strides(), 2, g.index(&[1, 3])));
        assert!(!stencil_is_flat(f.values(), g.strides(), 2, g.index(&[4, 3])));
    }
}
