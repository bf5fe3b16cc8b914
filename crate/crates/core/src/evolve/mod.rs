//! Forward-Euler integration of `u_t = F̂ⁿ(γ^ε D²u γ^ε) + σΔu`.

use std::io::Write;
use std::path::Path;

use crate::cone::Envelope;
use crate::error::{Error, Result};
use crate::grid::stencil::{derivatives, kernel_value, stencil_is_flat};
use crate::grid::{dump, GridSpec, RegularizationParams, ScalarField};

/// Snapshot of the flow.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub field: ScalarField,
    pub t: f64,
    pub step_count: usize,
    /// Size of the last step taken (0 before the first step).
    pub dt: f64,
}

impl FlowState {
    pub fn initial(field: ScalarField) -> Self {
        Self { field, t: 0.0, step_count: 0, dt: 0.0 }
    }
}

/// `h² / (2 · dims · (Λ + σ))`.
pub fn cfl_limit(dims: usize, h: f64, sigma: f64, lipschitz: f64) -> f64 {
    h * h / (2.0 * dims as f64 * (lipschitz + sigma))
}

/// CFL step for the envelope's Lipschitz constant.
pub fn cfl_dt(params: &RegularizationParams, h: f64, env: &Envelope) -> f64 {
    cfl_limit(env.dim(), h, params.sigma, env.lipschitz())
}

/// Precomputed stepping data for one grid: the list of cells that move.
#[derive(Clone, Debug)]
pub struct Stepper {
    env: Envelope,
    params: RegularizationParams,
    grid: GridSpec,
    active: Vec<usize>,
    dt_limit: f64,
}

impl Stepper {
    pub fn new(grid: &GridSpec, env: Envelope, params: RegularizationParams) -> Result<Self> {
        params.validate()?;
        if env.dim() != grid.dims() {
            return Err(Error::InvalidSpec(format!(
                "curvature spec has dim {}, grid has {}",
                env.dim(),
                grid.dims()
            )));
        }
        // Boundary nodes are far-field by construction of GridSpec, so every
        // active cell has a full stencil.
        let active = (0..grid.len()).filter(|&i| !grid.is_far(i)).collect();
        let dt_limit = cfl_dt(&params, grid.h(), &env);
        Ok(Self { env, params, grid: grid.clone(), active, dt_limit })
    }

    pub fn envelope(&self) -> &Envelope {
        &self.env
    }

    pub fn params(&self) -> &RegularizationParams {
        &self.params
    }

    pub fn dt_limit(&self) -> f64 {
        self.dt_limit
    }

    pub fn active_cells(&self) -> &[usize] {
        &self.active
    }

    /// Writes `src + dt · L[src]` into `dst` on active cells. Other cells of
    /// `dst` are left alone, so a double buffer only needs them set once.
    pub fn step_into(&self, src: &[f64], dst: &mut [f64], dt: f64) -> Result<()> {
        if dt > self.dt_limit * (1.0 + 1e-12) {
            return Err(Error::CflViolation { dt, limit: self.dt_limit });
        }
        let g = &self.grid;
        let (st, dims, h) = (g.strides(), g.dims(), g.h());
        for &i in &self.active {
            if stencil_is_flat(src, st, dims, i) {
                dst[i] = src[i];
                continue;
            }
            let (p, hess) = derivatives(src, st, dims, h, i);
            let v = src[i] + dt * kernel_value(&p[..dims], &hess, &self.env, &self.params);
            if !v.is_finite() {
                return Err(Error::NonFinite { cell: g.coords(i)[..dims].to_vec() });
            }
            dst[i] = v;
        }
        Ok(())
    }

    /// One explicit step; the input state is not modified.
    pub fn step(&self, state: &FlowState, dt: f64) -> Result<FlowState> {
        if state.field.grid() != &self.grid {
            return Err(Error::InvalidGrid("state grid differs from stepper grid".into()));
        }
        let mut next = state.field.values().to_vec();
        self.step_into(state.field.values(), &mut next, dt)?;
        Ok(FlowState {
            field: ScalarField::from_parts_unchecked(self.grid.clone(), next, state.field.far_value()),
            t: state.t + dt,
            step_count: state.step_count + 1,
            dt,
        })
    }

    /// Integrates to `t_max`, calling `observe` on the initial state, at every
    /// multiple of `snap_every` and at the final time. Steps are shortened so
    /// those times are hit exactly.
    pub fn run<F>(&self, initial: &FlowState, t_max: f64, snap_every: f64, mut observe: F) -> Result<FlowState>
    where
        F: FnMut(&FlowState) -> Result<()>,
    {
        if !(snap_every > 0.0) {
            return Err(Error::InvalidSpec(format!("snap_every must be positive, got {snap_every}")));
        }
        if !initial.field.far_field_intact() {
            return Err(Error::InvalidGrid("initial data violates the far-field invariant".into()));
        }
        observe(initial)?;
        let mut cur = initial.field.values().to_vec();
        let mut next = cur.clone();
        let mut t = initial.t;
        let mut steps = initial.step_count;
        let mut last_dt = initial.dt;
        let mut next_snap = t + snap_every;
        let tiny = 1e-12 * self.dt_limit;
        while t < t_max - tiny {
            let target = next_snap.min(t_max);
            let dt = self.dt_limit.min(target - t);
            self.step_into(&cur, &mut next, dt)?;
            std::mem::swap(&mut cur, &mut next);
            steps += 1;
            last_dt = dt;
            t = if dt == target - t { target } else { t + dt };
            let at_snap = t >= next_snap - tiny;
            let at_end = t >= t_max - tiny;
            if at_snap {
                next_snap += snap_every;
            }
            if at_snap || at_end {
                let state = FlowState {
                    field: ScalarField::from_parts_unchecked(self.grid.clone(), cur.clone(), initial.field.far_value()),
                    t,
                    step_count: steps,
                    dt: last_dt,
                };
                observe(&state)?;
            }
        }
        Ok(FlowState {
            field: ScalarField::from_parts_unchecked(self.grid.clone(), cur, initial.field.far_value()),
            t,
            step_count: steps,
            dt: last_dt,
        })
    }
}

/// One step at the CFL limit or below.
pub fn step(state: &FlowState, env: &Envelope, params: &RegularizationParams, dt: f64) -> Result<FlowState> {
    Stepper::new(state.field.grid(), env.clone(), *params)?.step(state, dt)
}

/// Runs the flow and returns deep-copied snapshots at `0, snap_every, 2·snap_every, …`
/// and at `t_max`.
pub fn run_flow(
    initial: &ScalarField,
    env: &Envelope,
    params: &RegularizationParams,
    t_max: f64,
    snap_every: f64,
) -> Result<Vec<FlowState>> {
    let stepper = Stepper::new(initial.grid(), env.clone(), *params)?;
    let mut snaps = Vec::new();
    stepper.run(&FlowState::initial(initial.clone()), t_max, snap_every, |s| {
        snaps.push(s.clone());
        Ok(())
    })?;
    Ok(snaps)
}

/// One row of `series.csv`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesRow {
    pub t: f64,
    pub sup_norm: f64,
    pub lipschitz: f64,
    pub front_radius_est: f64,
}

impl SeriesRow {
    pub fn from_state(state: &FlowState) -> Self {
        Self {
            t: state.t,
            sup_norm: state.field.sup_norm(),
            lipschitz: state.field.lipschitz_seminorm(),
            front_radius_est: front_radius_estimate(&state.field),
        }
    }
}

/// Radius of the disk (ball) with the same measure as `{u < 0}`, using a
/// linear ramp of width `h` across the zero level.
pub fn front_radius_estimate(field: &ScalarField) -> f64 {
    let g = field.grid();
    let h = g.h();
    let frac: f64 = field.values().iter().map(|&v| (0.5 - v / h).clamp(0.0, 1.0)).sum();
    let measure = frac * h.powi(g.dims() as i32);
    if g.dims() == 2 {
        (measure / std::f64::consts::PI).sqrt()
    } else {
        (3.0 * measure / (4.0 * std::f64::consts::PI)).cbrt()
    }
}

pub fn write_series_csv(path: &Path, rows: &[SeriesRow]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "t,sup_norm,lipschitz,front_radius_est")?;
    for r in rows {
        writeln!(f, "{},{},{},{}", r.t, r.sup_norm, r.lipschitz, r.front_radius_est)?;
    }
    f.flush()?;
    Ok(())
}

/// Grid dump file name for a snapshot, `u_t<time>.grid`.
pub fn snapshot_name(t: f64) -> String {
    format!("u_t{t:.6}.grid")
}

pub fn write_snapshot(dir: &Path, state: &FlowState) -> Result<()> {
    dump::write_grid(&dir.join(snapshot_name(state.t)), &state.field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::{ConeCut, CurvatureSpec};
    use crate::front::{extract_front, init_signed_distance, mean_radius, Shape};

    fn circle_setup(h: f64, eps: f64, sigma: f64) -> (Stepper, ScalarField) {
        let n = (2.6 / h).round() as usize + 1;
        let g = GridSpec::centered(2, n, h, 1.25).unwrap();
        let params = RegularizationParams::new(eps, ConeCut::for_eps(eps).n_cut(), sigma).unwrap();
        let env = Envelope::new(CurvatureSpec::sigma(1, 2).unwrap(), params.cut()).unwrap();
        let u0 = init_signed_distance(&Shape::Circle { center: [0.0; 2], radius: 1.0 }, &g, 0.2).unwrap();
        (Stepper::new(&g, env, params).unwrap(), u0)
    }

    #[test]
    fn cfl_examples() {
        assert!((cfl_limit(2, 0.01, 0.0, 1.0) - 2.5e-5).abs() < 1e-18);
        assert!((cfl_limit(2, 0.01, 1.0, 1.0) - 1.25e-5).abs() < 1e-18);
        assert!((cfl_limit(3, 0.02, 0.0, 2.0) - 4e-4 / 12.0).abs() < 1e-18);
    }

    #[test]
    fn oversized_step_rejected() {
        let (st, u0) = circle_setup(0.05, 0.1, 0.005);
        let err = st.step(&FlowState::initial(u0), 2.0 * st.dt_limit()).unwrap_err();
        assert!(matches!(err, Error::CflViolation { .. }));
    }

    #[test]
    fn constant_field_is_fixed() {
        let (st, u0) = circle_setup(0.05, 0.1, 0.005);
        let c = ScalarField::from_fn(u0.grid().clone(), 0.7, |_| 0.7).unwrap();
        let s = FlowState::initial(c.clone());
        let next = st.step(&s, st.dt_limit()).unwrap();
        assert_eq!(next.field, c);
        assert_eq!(s.field, c);
        assert_eq!((next.step_count, next.dt), (1, st.dt_limit()));
    }

    #[test]
    fn invariants_along_a_run() {
        let (st, u0) = circle_setup(0.04, 0.02, 0.004);
        let sup0 = u0.sup_norm();
        let mut lip = u0.lipschitz_seminorm();
        let snaps = run_flow(&u0, st.envelope(), st.params(), 0.3, 0.05).unwrap();
        assert_eq!(snaps.len(), 7);
        assert!((snaps.last().unwrap().t - 0.3).abs() < 1e-12);
        for s in &snaps {
            assert!(s.field.far_field_intact());
            assert!(s.field.sup_norm() <= sup0 + 1e-14);
            let l = s.field.lipschitz_seminorm();
            assert!(l <= lip + 1e-10, "Lipschitz grew from {lip} to {l} at t={}", s.t);
            lip = l;
        }
    }

    #[test]
    fn circle_radius_at_quarter_time() {
        let (st, u0) = circle_setup(0.01, 1e-3, 1e-3);
        let end = st.run(&FlowState::initial(u0), 0.25, 0.25, |_| Ok(())).unwrap();
        let r = mean_radius(&extract_front(&end.field, 0.0));
        let exact = 0.75f64.sqrt();
        assert!(((r - exact) / exact).abs() < 0.02, "{r} vs {exact}");
    }

    #[test]
    fn circle_extinction_time() {
        let (st, u0) = circle_setup(0.02, 0.1 * 0.02f64.sqrt(), 0.002);
        let mut t_ext = f64::NAN;
        st.run(&FlowState::initial(u0), 1.1, 0.005, |s| {
            if t_ext.is_nan() && extract_front(&s.field, 0.0).is_empty() {
                t_ext = s.t;
            }
            Ok(())
        })
        .unwrap();
        assert!((t_ext - 1.0).abs() < 0.04, "extinction at {t_ext}");
    }

    /// `ω = φ(|x|²/2 + c₀ t) − C t ε^{1/2}` with `φ(s) = (s − 2)³` on
    /// `[0, 2]` and 0 beyond stays below the solution started from `ω(·, 0)`.
    fn barrier_holds(spec: CurvatureSpec, n: usize, h: f64) {
        let dims = spec.dim();
        let eps = 1e-2;
        let params = RegularizationParams::new(eps, 4, 0.0).unwrap();
        let mut ones = vec![1.0; dims];
        ones[0] = 0.0;
        let c0 = spec.eval(&ones).unwrap();
        let env = Envelope::new(spec, params.cut()).unwrap();
        let g = GridSpec::centered(dims, n, h, 2.0).unwrap();
        let phi = |s: f64| if s < 2.0 { (s - 2.0).powi(3) } else { 0.0 };
        let omega = |x: &[f64], t: f64| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            phi(0.5 * r2 + c0 * t) - t * eps.sqrt()
        };
        let u0 = ScalarField::from_fn(g.clone(), 0.0, |x| omega(x, 0.0)).unwrap();
        let st = Stepper::new(&g, env, params).unwrap();
        st.run(&FlowState::initial(u0), 0.5, 0.05, |s| {
            for (i, &u) in s.field.values().iter().enumerate() {
                let x = g.position(i);
                let w = omega(&x[..dims], s.t);
                assert!(u >= w - h * h, "barrier crossed at t={} x={:?}: {u} < {w}", s.t, &x[..dims]);
            }
            Ok(())
        })
        .unwrap();
    }

    #[test]
    fn barrier_respected_sigma1_2d() {
        barrier_holds(CurvatureSpec::sigma(1, 2).unwrap(), 91, 0.05);
    }

    #[test]
    fn barrier_respected_sigma2_3d() {
        barrier_holds(CurvatureSpec::sigma(2, 3).unwrap(), 45, 0.1);
    }
}
