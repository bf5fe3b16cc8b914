//! Stationary arrival-time problem `F(γ D²v γ) = 1` in `U`, `v = 0` on `∂U`.
//!
//! The solution gives the flow of `∂U` through `u(x, t) = v(x) + t`, and its
//! sup norm is the extinction time.

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;

use crate::cone::Envelope;
use crate::error::{Error, Result};
use crate::evolve::{cfl_dt, front_radius_estimate};
use crate::front::{extract_front, Shape};
use crate::grid::stencil::{derivatives, kernel_value};
use crate::grid::{GridSpec, RegularizationParams, ScalarField};

/// Cells of a bounded open set `U` on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainMask {
    grid: GridSpec,
    inside: Vec<bool>,
    band: Vec<bool>,
    /// Signed distance to `∂U` when known; band cells then extrapolate to
    /// zero on `∂U` itself instead of being pinned to zero.
    level: Option<Vec<f64>>,
}

impl DomainMask {
    /// `U` must avoid the far field and its complement must be connected to
    /// the array boundary.
    pub fn new(grid: GridSpec, inside: Vec<bool>) -> Result<Self> {
        if inside.len() != grid.len() {
            return Err(Error::InvalidMask(format!("expected {} cells, got {}", grid.len(), inside.len())));
        }
        if let Some(i) = (0..grid.len()).find(|&i| inside[i] && grid.is_far(i)) {
            return Err(Error::InvalidMask(format!(
                "cell {:?} of U lies in the far field",
                &grid.coords(i)[..grid.dims()]
            )));
        }
        // Flood the complement from the array boundary.
        let st = grid.strides();
        let dims = grid.dims();
        let mut seen = vec![false; grid.len()];
        let mut queue = VecDeque::new();
        for i in 0..grid.len() {
            if !grid.is_interior(i) {
                seen[i] = true;
                queue.push_back(i);
            }
        }
        while let Some(i) = queue.pop_front() {
            let c = grid.coords(i);
            for a in 0..dims {
                for (ok, j) in [(c[a] > 0, i.wrapping_sub(st[a])), (c[a] + 1 < grid.shape()[a], i + st[a])] {
                    if ok && !inside[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        if let Some(i) = (0..grid.len()).find(|&i| !inside[i] && !seen[i]) {
            return Err(Error::InvalidMask(format!(
                "complement cell {:?} is enclosed by U",
                &grid.coords(i)[..dims]
            )));
        }
        // Band: cells of U with any complement cell in their 3ⁿ stencil.
        let offsets = stencil_offsets(st, dims);
        let band = (0..grid.len())
            .map(|i| inside[i] && offsets.iter().any(|&o| !inside[(i as isize + o) as usize]))
            .collect();
        Ok(Self { grid, inside, band, level: None })
    }

    /// `U = {d < 0}` for the shape's signed distance `d`.
    pub fn from_shape(shape: &Shape, grid: &GridSpec) -> Result<Self> {
        if shape.dims() != grid.dims() {
            return Err(Error::InvalidMask("shape and grid dimensions differ".into()));
        }
        let d = grid.dims();
        let level = (0..grid.len()).map(|i| shape.signed_distance(&grid.position(i)[..d])).collect();
        Self::from_level(grid.clone(), level)
    }

    /// `U = {φ < 0}` for a signed distance `φ`.
    pub fn from_level(grid: GridSpec, level: Vec<f64>) -> Result<Self> {
        if level.len() != grid.len() || level.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMask("level function must be finite on every cell".into()));
        }
        let inside = level.iter().map(|&x| x < 0.0).collect();
        let mut m = Self::new(grid, inside)?;
        m.level = Some(level);
        Ok(m)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn inside(&self) -> &[bool] {
        &self.inside
    }

    pub fn band(&self) -> &[bool] {
        &self.band
    }

    pub fn level(&self) -> Option<&[f64]> {
        self.level.as_deref()
    }

    /// For each band cell, the deepest non-band neighbour `n` and the ratio
    /// `φ_b / φ_n`, so `v_b = v_n φ_b / φ_n` vanishes linearly on `∂U`.
    /// Without a level function every band cell is pinned to zero.
    fn band_links(&self) -> Vec<(usize, usize, f64)> {
        let Some(level) = &self.level else {
            return Vec::new();
        };
        let offsets = stencil_offsets(self.grid.strides(), self.grid.dims());
        let mut out = Vec::new();
        for b in (0..self.grid.len()).filter(|&i| self.band[i]) {
            let deepest = offsets
                .iter()
                .map(|&o| (b as isize + o) as usize)
                .filter(|&j| self.inside[j] && !self.band[j])
                .min_by(|&x, &y| level[x].total_cmp(&level[y]));
            if let Some(n) = deepest {
                out.push((b, n, level[b] / level[n]));
            }
        }
        out
    }

    /// Cells of `U` off the band; their whole stencil lies in `U`.
    pub fn interior_cells(&self) -> Vec<usize> {
        (0..self.grid.len()).filter(|&i| self.inside[i] && !self.band[i]).collect()
    }
}

fn stencil_offsets(st: [usize; 3], dims: usize) -> Vec<isize> {
    let mut out = Vec::new();
    let range = |a: usize| if a < dims { -1..=1 } else { 0..=0 };
    for a in range(0) {
        for b in range(1) {
            for c in range(2) {
                if (a, b, c) != (0, 0, 0) {
                    out.push(a * st[0] as isize + b * st[1] as isize + c * st[2] as isize);
                }
            }
        }
    }
    out
}

/// Pseudo-time relaxation `w ← w + dτ (L[w] − 1)` on the interior of `U`,
/// stopped when `max |L[w] − 1| ≤ tol`. `w = 0` outside `U`; on the band
/// `w` is pinned to zero, or extrapolated to vanish on `∂U` when the mask
/// carries a level function.
pub fn solve_stationary(
    mask: &DomainMask,
    env: &Envelope,
    params: &RegularizationParams,
    tol: f64,
    max_iters: usize,
) -> Result<ScalarField> {
    params.validate()?;
    let g = mask.grid();
    if env.dim() != g.dims() {
        return Err(Error::InvalidSpec(format!("curvature spec has dim {}, grid has {}", env.dim(), g.dims())));
    }
    let (st, dims, h) = (g.strides(), g.dims(), g.h());
    let cells = mask.interior_cells();
    let links = mask.band_links();
    let dt = cfl_dt(params, h, env);
    let mut cur = vec![0.0; g.len()];
    let mut next = cur.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        residual = 0.0;
        for &i in &cells {
            let (p, hess) = derivatives(&cur, st, dims, h, i);
            let r = kernel_value(&p[..dims], &hess, env, params) - 1.0;
            residual = residual.max(r.abs());
            next[i] = cur[i] + dt * r;
        }
        if !residual.is_finite() {
            let i = cells.iter().copied().find(|&i| !next[i].is_finite()).unwrap_or(0);
            return Err(Error::NonFinite { cell: g.coords(i)[..dims].to_vec() });
        }
        for &(b, n, ratio) in &links {
            next[b] = next[n] * ratio;
        }
        if residual <= tol {
            return Ok(ScalarField::from_parts_unchecked(g.clone(), cur, 0.0));
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Err(Error::NotConverged { iters: max_iters, residual })
}

/// `t* = max_U |v|`.
pub fn extinction_time(v: &ScalarField, mask: &DomainMask) -> f64 {
    v.values().iter().zip(mask.inside()).filter(|(_, &m)| m).fold(0.0, |a, (x, _)| a.max(x.abs()))
}

/// `|Dv|` at a cell of `U` from differences that stay inside `U`:
/// central where both axis neighbours are in `U`, one-sided otherwise.
fn inner_gradient(v: &[f64], mask: &DomainMask, i: usize) -> f64 {
    let g = mask.grid();
    let (st, h) = (g.strides(), g.h());
    let mut sum = 0.0;
    for a in 0..g.dims() {
        let (lo, hi) = (i - st[a], i + st[a]);
        let d = match (mask.inside()[lo], mask.inside()[hi]) {
            (true, true) => 0.5 * (v[hi] - v[lo]),
            (true, false) => v[i] - v[lo],
            (false, true) => v[hi] - v[i],
            (false, false) => 0.0,
        };
        sum += d * d;
    }
    sum.sqrt() / h
}

/// The constant `A` of the linear barrier `v ≥ −A dist(x, ∂U)`: the largest
/// `|Dv|` over the band, and with a level function also the largest slope
/// `|v_b| / dist(x_b, ∂U)` from band cells to the boundary.
pub fn boundary_gradient_bound(v: &ScalarField, mask: &DomainMask) -> f64 {
    let u = v.values();
    let mut best: f64 = 0.0;
    for i in (0..mask.grid().len()).filter(|&i| mask.band()[i]) {
        best = best.max(inner_gradient(u, mask, i));
        if let Some(level) = mask.level() {
            best = best.max(u[i].abs() / level[i].abs());
        }
    }
    best
}

/// `dist(x, ∂U)` for cells of `U` (`NaN` outside). Exact from the level
/// function when present, otherwise brute force to band cell centres.
pub fn distance_to_boundary(mask: &DomainMask) -> Vec<f64> {
    let g = mask.grid();
    if let Some(level) = mask.level() {
        return level.iter().zip(mask.inside()).map(|(&d, &m)| if m { -d } else { f64::NAN }).collect();
    }
    let d = g.dims();
    let band: Vec<[f64; 3]> = (0..g.len()).filter(|&i| mask.band()[i]).map(|i| g.position(i)).collect();
    (0..g.len())
        .map(|i| {
            if !mask.inside()[i] {
                return f64::NAN;
            }
            let x = g.position(i);
            band.iter()
                .map(|b| (0..d).map(|a| (x[a] - b[a]).powi(2)).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect()
}

/// Lower barriers checked on a solved `v`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BarrierReport {
    /// Estimated `A`.
    pub a: f64,
    /// `max v` over `U`; should not exceed zero.
    pub max_v: f64,
    /// `max (−A d − v)` over `U`; the linear bound holds when this is ≤ 0.
    pub linear_excess: f64,
    /// Band width `δ₀` and weight `λ = 2 δ₀ A` of the log barrier.
    pub delta0: f64,
    pub lambda: f64,
    /// `max (λ log((2δ₀ − d)/(2δ₀)) − v)` over cells with `d < δ₀`.
    pub log_excess: f64,
}

impl BarrierReport {
    pub fn holds(&self, slack: f64) -> bool {
        self.max_v <= slack && self.linear_excess <= slack && self.log_excess <= slack
    }
}

/// Checks `v ≤ 0`, `v ≥ −A dist` and the log barrier near `∂U` with
/// `δ₀ = 10h`.
pub fn check_barriers(v: &ScalarField, mask: &DomainMask) -> BarrierReport {
    let a = boundary_gradient_bound(v, mask);
    let dist = distance_to_boundary(mask);
    let delta0 = 10.0 * mask.grid().h();
    let lambda = 2.0 * delta0 * a;
    let mut rep = BarrierReport {
        a,
        max_v: f64::NEG_INFINITY,
        linear_excess: f64::NEG_INFINITY,
        delta0,
        lambda,
        log_excess: f64::NEG_INFINITY,
    };
    for (i, &vi) in v.values().iter().enumerate() {
        if !mask.inside()[i] {
            continue;
        }
        let d = dist[i];
        rep.max_v = rep.max_v.max(vi);
        rep.linear_excess = rep.linear_excess.max(-a * d - vi);
        if d < delta0 {
            rep.log_excess = rep.log_excess.max(lambda * ((2.0 * delta0 - d) / (2.0 * delta0)).ln() - vi);
        }
    }
    rep
}

/// Distance in cells from `∂U` to where `|Dv|` peaks over `U`.
pub fn gradient_peak_depth(v: &ScalarField, mask: &DomainMask) -> f64 {
    let g = mask.grid();
    let dist = distance_to_boundary(mask);
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in (0..g.len()).filter(|&i| mask.inside()[i]) {
        let n = inner_gradient(v.values(), mask, i);
        if n > best.0 {
            best = (n, dist[i] / g.h());
        }
    }
    best.1
}

/// One row of `arrival.csv`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArrivalRow {
    pub t: f64,
    /// Length (2D) or area (3D) of `{v = −t}`.
    pub front_area: f64,
    pub front_radius_est: f64,
}

/// Fronts `{v = −t}` at `count` evenly spaced times in `[0, t*)`.
pub fn arrival_rows(v: &ScalarField, t_star: f64, count: usize) -> Vec<ArrivalRow> {
    (0..count)
        .map(|k| {
            let t = t_star * k as f64 / count as f64;
            let shifted = ScalarField::from_parts_unchecked(
                v.grid().clone(),
                v.values().iter().map(|x| x + t).collect(),
                v.far_value() + t,
            );
            ArrivalRow {
                t,
                front_area: extract_front(v, -t).measure(),
                front_radius_est: front_radius_estimate(&shifted),
            }
        })
        .collect()
}

pub fn write_arrival_csv(path: &Path, rows: &[ArrivalRow]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "t,front_area,front_radius_est")?;
    for r in rows {
        writeln!(f, "{},{},{}", r.t, r.front_area, r.front_radius_est)?;
    }
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::{ConeCut, CurvatureSpec};

    fn disk_mask(n: usize, h: f64, r: f64) -> DomainMask {
        let g = GridSpec::centered(2, n, h, 0.5 * (n as f64 - 1.0) * h).unwrap();
        DomainMask::from_shape(&Shape::Circle { center: [0.0; 2], radius: r }, &g).unwrap()
    }

    fn sigma1() -> (Envelope, RegularizationParams) {
        let env = Envelope::new(CurvatureSpec::sigma(1, 2).unwrap(), ConeCut::new(4).unwrap()).unwrap();
        (env, RegularizationParams::new(1e-3, 4, 0.0).unwrap())
    }

    #[test]
    fn enclosed_complement_rejected() {
        let g = GridSpec::centered(2, 21, 0.1, 1.0).unwrap();
        let inside: Vec<bool> = (0..g.len())
            .map(|i| {
                let r = crate::grid::norm(&g.position(i)[..2]);
                r > 0.3 && r < 0.7
            })
            .collect();
        assert!(matches!(DomainMask::new(g.clone(), inside), Err(Error::InvalidMask(_))));
        assert!(DomainMask::new(g.clone(), vec![true; g.len()]).is_err());
        assert!(DomainMask::new(g, vec![false; 3]).is_err());
    }

    #[test]
    fn empty_interior_has_zero_extinction() {
        let m = disk_mask(21, 0.1, 0.01);
        let (env, params) = sigma1();
        let v = solve_stationary(&m, &env, &params, 1e-6, 10).unwrap();
        assert_eq!(extinction_time(&v, &m), 0.0);
    }

    fn paraboloid_error(v: &ScalarField, m: &DomainMask, r: f64) -> f64 {
        let g = m.grid();
        (0..g.len())
            .filter(|&i| m.inside()[i])
            .map(|i| {
                let x = g.position(i);
                (v.values()[i] - (x[0] * x[0] + x[1] * x[1] - r * r)).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn disk_paraboloid() {
        let m = disk_mask(61, 0.04, 1.0);
        let (env, params) = sigma1();
        let v = solve_stationary(&m, &env, &params, 1e-5, 200_000).unwrap();
        let t_star = extinction_time(&v, &m);
        assert!((t_star - 1.0).abs() < 0.02, "{t_star}");
        assert!(paraboloid_error(&v, &m, 1.0) <= 0.02 * t_star);
        let rep = check_barriers(&v, &m);
        assert!(rep.holds(1e-10), "{rep:?}");
        assert!(gradient_peak_depth(&v, &m) <= 2.0);
    }

    #[test]
    fn radius_two_disk() {
        let m = disk_mask(121, 0.04, 2.0);
        let (env, params) = sigma1();
        let v = solve_stationary(&m, &env, &params, 1e-5, 400_000).unwrap();
        let t_star = extinction_time(&v, &m);
        assert!((t_star - 4.0).abs() < 0.08, "{t_star}");
    }

    #[test]
    fn pinned_band_without_level() {
        let g = GridSpec::centered(2, 41, 0.05, 1.0).unwrap();
        let inside = (0..g.len()).map(|i| crate::grid::norm(&g.position(i)[..2]) < 0.7).collect();
        let m = DomainMask::new(g.clone(), inside).unwrap();
        let (env, params) = sigma1();
        let v = solve_stationary(&m, &env, &params, 1e-5, 200_000).unwrap();
        assert!((0..g.len()).filter(|&i| m.band()[i]).all(|i| v.values()[i] == 0.0));
        assert!(v.values().iter().all(|&x| x <= 1e-10));
    }

    #[test]
    fn iteration_budget_reported() {
        let m = disk_mask(41, 0.05, 0.8);
        let (env, params) = sigma1();
        match solve_stationary(&m, &env, &params, 1e-8, 5) {
            Err(Error::NotConverged { iters: 5, residual }) => assert!(residual > 0.0),
            other => panic!("{other:?}"),
        }
    }

    /// `{v = −t}` and the zero level of the flow at time `t` are the same front.
    #[test]
    fn level_sets_match_the_flow() {
        use crate::evolve::{FlowState, Stepper};
        use crate::front::{extract_front, hausdorff, init_signed_distance};
        let h = 0.04;
        let g = GridSpec::centered(2, 71, h, 1.3).unwrap();
        let disk = Shape::Circle { center: [0.0; 2], radius: 1.0 };
        let m = DomainMask::from_shape(&disk, &g).unwrap();
        let (env, params) = sigma1();
        let v = solve_stationary(&m, &env, &params, 1e-5, 200_000).unwrap();
        let st = Stepper::new(&g, env, params).unwrap();
        let u0 = init_signed_distance(&disk, &g, 0.2).unwrap();
        for t in [0.25, 0.5, 0.75] {
            let u = st.run(&FlowState::initial(u0.clone()), t, t, |_| Ok(())).unwrap();
            let d = hausdorff(&extract_front(&v, -t), &extract_front(&u.field, 0.0));
            assert!(d <= 3.0 * h, "t={t}: {d}");
        }
    }
}
