//! Uniform Cartesian grids, scalar fields and the pointwise operator
//! `F̂ⁿ(γ^ε D²u γ^ε) + σ Δu`.

pub mod dump;
pub mod linalg;
pub(crate) mod stencil;

use crate::cone::ConeCut;
use crate::error::{Error, Result};

pub use linalg::{eig_sym, eig_sym_vectors, gamma_eps, gamma_exact, SymMat, DEFAULT_EIG_TOL};
pub use stencil::{gradient_at, hessian_at, operator_value, operator_value_from, OperatorParts};

/// Geometry of a uniform grid. Nodes sit at `origin + index · h`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    dims: usize,
    shape: [usize; 3],
    h: f64,
    origin: [f64; 3],
    radius: f64,
}

impl GridSpec {
    /// `radius` is the far-field radius `S`: nodes with `|x| ≥ S` are frozen.
    /// Every node on the array boundary must lie in the far field.
    pub fn new(dims: usize, shape: &[usize], h: f64, origin: &[f64], radius: f64) -> Result<Self> {
        if dims != 2 && dims != 3 {
            return Err(Error::InvalidGrid(format!("dims must be 2 or 3, got {dims}")));
        }
        if shape.len() != dims || origin.len() != dims {
            return Err(Error::InvalidGrid("shape/origin length must equal dims".into()));
        }
        if shape.iter().any(|&n| n < 3) {
            return Err(Error::InvalidGrid(format!("need at least 3 nodes per axis, got {shape:?}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {h}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidGrid(format!("far-field radius must be positive, got {radius}")));
        }
        let mut s = [1usize; 3];
        let mut o = [0.0; 3];
        s[..dims].copy_from_slice(shape);
        o[..dims].copy_from_slice(origin);
        let g = Self { dims, shape: s, h, origin: o, radius };
        // Closest boundary node to the origin.
        let mut closest = f64::INFINITY;
        for idx in 0..g.len() {
            let c = g.coords(idx);
            if (0..dims).any(|a| c[a] == 0 || c[a] + 1 == s[a]) {
                closest = closest.min(norm(&g.position(idx)[..dims]));
            }
        }
        if closest < radius {
            return Err(Error::InvalidGrid(format!(
                "boundary node at distance {closest} lies inside the far-field radius {radius}"
            )));
        }
        Ok(g)
    }

    /// Grid with `n` nodes per axis centred on the origin.
    pub fn centered(dims: usize, n: usize, h: f64, radius: f64) -> Result<Self> {
        let o = -0.5 * (n as f64 - 1.0) * h;
        Self::new(dims, &vec![n; dims], h, &vec![o; dims], radius)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape[..self.dims]
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin[..self.dims]
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major strides (last axis fastest).
    pub fn strides(&self) -> [usize; 3] {
        [self.shape[1] * self.shape[2], self.shape[2], 1]
    }

    #[inline]
    pub fn index(&self, c: &[usize]) -> usize {
        let st = self.strides();
        (0..self.dims).map(|a| c[a] * st[a]).sum()
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let st = self.strides();
        [idx / st[0], (idx / st[1]) % self.shape[1], idx % self.shape[2]]
    }

    #[inline]
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        let mut x = [0.0; 3];
        for a in 0..self.dims {
            x[a] = self.origin[a] + c[a] as f64 * self.h;
        }
        x
    }

    #[inline]
    pub fn is_far(&self, idx: usize) -> bool {
        norm(&self.position(idx)[..self.dims]) >= self.radius
    }

    /// Not on the array boundary, so the full stencil is available.
    #[inline]
    pub fn is_interior(&self, idx: usize) -> bool {
        let c = self.coords(idx);
        (0..self.dims).all(|a| c[a] > 0 && c[a] + 1 < self.shape[a])
    }

    pub fn check_index(&self, c: &[usize]) -> Result<usize> {
        if c.len() != self.dims || (0..self.dims).any(|a| c[a] >= self.shape[a]) {
            return Err(Error::StencilOutOfRange(c.to_vec()));
        }
        Ok(self.index(c))
    }
}

#[inline]
pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Sampled scalar field with a constant far-field value.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
    far_value: f64,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>, far_value: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if !far_value.is_finite() {
            return Err(Error::InvalidGrid("far-field value must be finite".into()));
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { cell: grid.coords(i)[..grid.dims()].to_vec() });
            }
            if grid.is_far(i) && v != far_value {
                return Err(Error::InvalidGrid(format!(
                    "far-field node {:?} holds {v}, expected {far_value}",
                    &grid.coords(i)[..grid.dims()]
                )));
            }
        }
        Ok(Self { grid, values, far_value })
    }

    /// Samples `f` at every node; far-field nodes get `far_value`.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: GridSpec, far_value: f64, f: F) -> Result<Self> {
        let d = grid.dims();
        let values = (0..grid.len())
            .map(|i| if grid.is_far(i) { far_value } else { f(&grid.position(i)[..d]) })
            .collect();
        Self::new(grid, values, far_value)
    }

    pub(crate) fn from_parts_unchecked(grid: GridSpec, values: Vec<f64>, far_value: f64) -> Self {
        Self { grid, values, far_value }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn far_value(&self) -> f64 {
        self.far_value
    }

    pub fn get(&self, c: &[usize]) -> f64 {
        self.values[self.grid.index(c)]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Discrete Lipschitz seminorm: max difference between axis neighbours over `h`.
    pub fn lipschitz_seminorm(&self) -> f64 {
        let g = &self.grid;
        let st = g.strides();
        let mut best: f64 = 0.0;
        for i in 0..g.len() {
            let c = g.coords(i);
            for a in 0..g.dims() {
                if c[a] + 1 < g.shape[a] {
                    best = best.max((self.values[i + st[a]] - self.values[i]).abs());
                }
            }
        }
        best / g.h()
    }

    /// True when every far-field node holds the far value exactly.
    pub fn far_field_intact(&self) -> bool {
        (0..self.grid.len()).all(|i| !self.grid.is_far(i) || self.values[i] == self.far_value)
    }

    /// `max |u − v|` for fields on the same grid.
    pub fn sup_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()))
    }
}

/// The triple `(ε, n_cut, σ)` of the approximate flow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegularizationParams {
    pub eps: f64,
    pub n_cut: u32,
    pub sigma: f64,
}

impl RegularizationParams {
    pub fn new(eps: f64, n_cut: u32, sigma: f64) -> Result<Self> {
        let p = Self { eps, n_cut, sigma };
        p.validate()?;
        Ok(p)
    }

    /// Refinement schedule `ε = h^{1/2}`, `n_cut = ⌈ε^{-1/4}⌉`, `σ = 0.1 h`.
    pub fn for_spacing(h: f64) -> Self {
        let eps = h.sqrt().min(0.999);
        Self { eps, n_cut: ConeCut::for_eps(eps).n_cut(), sigma: 0.1 * h }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidSpec(format!("eps must be in (0, 1), got {}", self.eps)));
        }
        if self.n_cut < 2 {
            return Err(Error::InvalidSpec(format!("n_cut must be >= 2, got {}", self.n_cut)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidSpec(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        Ok(())
    }

    pub fn cut(&self) -> ConeCut {
        ConeCut::new(self.n_cut).expect("validated n_cut")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_must_be_far() {
        assert!(GridSpec::centered(2, 11, 0.1, 0.5).is_ok());
        assert!(GridSpec::centered(2, 11, 0.1, 0.6).is_err());
        assert!(GridSpec::centered(4, 11, 0.1, 0.5).is_err());
    }

    #[test]
    fn index_roundtrip() {
        let g = GridSpec::new(3, &[4, 5, 6], 0.5, &[-1.0, -1.0, -1.5], 0.1).unwrap();
        for i in 0..g.len() {
            let c = g.coords(i);
            assert_eq!(g.index(&c), i);
        }
        assert_eq!(g.position(g.index(&[1, 2, 3])), [-0.5, 0.0, 0.0]);
    }

    #[test]
    fn far_field_enforced() {
        let g = GridSpec::centered(2, 11, 0.1, 0.45).unwrap();
        let f = ScalarField::from_fn(g.clone(), 2.0, |x| x[0]).unwrap();
        assert!(f.far_field_intact());
        let mut vals = f.values().to_vec();
        vals[0] = 1.0;
        assert!(ScalarField::new(g, vals, 2.0).is_err());
    }

    #[test]
    fn params_ranges() {
        assert!(RegularizationParams::new(1.5, 4, 0.0).is_err());
        assert!(RegularizationParams::new(0.1, 1, 0.0).is_err());
        assert!(RegularizationParams::new(0.1, 2, -1.0).is_err());
        let p = RegularizationParams::for_spacing(1e-4);
        assert_eq!(p.n_cut, 4);
        assert!((p.eps - 1e-2).abs() < 1e-15);
    }
}
