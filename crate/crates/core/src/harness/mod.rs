//! Experiment orchestration: each experiment runs one scenario, checks its
//! acceptance metrics and writes CSV outputs plus `summary.csv`.

mod config;
pub mod suites;

use std::io::Write;
use std::path::Path;

use rand::Rng;

pub use config::{parse_config, ExperimentConfig, ExperimentKind, Family, Psi, ShapeKind};

use crate::analysis::{relabel, viscosity_probe, write_probe_csv, ProbeConfig, ProbeReport};
use crate::arrival::{
    arrival_rows, check_barriers, extinction_time, solve_stationary, write_arrival_csv, DomainMask,
};
use crate::cone::{CurvatureSpec, Envelope};
use crate::error::Result;
use crate::evolve::{front_radius_estimate, write_series_csv, write_snapshot, FlowState, SeriesRow, Stepper};
use crate::front::{
    extract_front, front_samples, hausdorff, init_signed_distance, init_smooth_distance, mean_radius,
};
use crate::grid::{dump, GridSpec, ScalarField};
use crate::noncollapse::{andrews_alpha, write_andrews_csv, AndrewsRow};
use suites::SuiteResult;

/// How a metric is compared with its threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    AtMost,
    AtLeast,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        }
    }
}

/// One acceptance line.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub metric: String,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
}

impl Check {
    pub fn at_most(metric: &str, value: f64, threshold: f64) -> Self {
        Self { metric: metric.to_string(), value, relation: Relation::AtMost, threshold }
    }

    pub fn at_least(metric: &str, value: f64, threshold: f64) -> Self {
        Self { metric: metric.to_string(), value, relation: Relation::AtLeast, threshold }
    }

    /// NaN never passes.
    pub fn pass(&self) -> bool {
        match self.relation {
            Relation::AtMost => self.value <= self.threshold,
            Relation::AtLeast => self.value >= self.threshold,
        }
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} = {} {} {} {}",
            self.metric,
            self.value,
            self.relation.symbol(),
            self.threshold,
            if self.pass() { "PASS" } else { "FAIL" }
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub experiment: ExperimentKind,
    pub checks: Vec<Check>,
}

impl Summary {
    pub fn all_pass(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(Check::pass)
    }

    pub fn check(&self, metric: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.metric == metric)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "metric,value,relation,threshold,status")?;
        for c in &self.checks {
            let status = if c.pass() { "PASS" } else { "FAIL" };
            writeln!(f, "{},{},{},{},{}", c.metric, c.value, c.relation.symbol(), c.threshold, status)?;
        }
        f.flush()?;
        Ok(())
    }
}

/// Runs the configured experiment, writing its outputs and `summary.csv`
/// into `config.out_dir`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Summary> {
    std::fs::create_dir_all(&config.out_dir)?;
    use ExperimentKind::*;
    let checks = match config.experiment {
        ShrinkCircle | ShrinkBall => shrink_sphere(config)?,
        ShrinkEllipse => shrink_ellipse(config)?,
        ArrivalBall => arrival_ball(config)?,
        AndrewsTrack => andrews_track(config)?,
        ComparisonPair | ContractionPair => ordered_pairs(config)?,
        RelabelCheck => relabel_check(config)?,
        ProbeRun => probe_run(config)?,
        EnvelopeAudit => verify_suites(config)?,
    };
    let summary = Summary { experiment: config.experiment, checks };
    summary.write_csv(&config.out_dir.join("summary.csv"))?;
    Ok(summary)
}

/// `f(1, …, 1, 0)`: the speed of the unit sphere.
pub fn sphere_speed(spec: &CurvatureSpec) -> Result<f64> {
    let mut kappa = vec![1.0; spec.dim()];
    kappa[spec.dim() - 1] = 0.0;
    spec.eval(&kappa)
}

struct FlowSetup {
    spec: CurvatureSpec,
    grid: GridSpec,
    stepper: Stepper,
    initial: ScalarField,
}

fn flow_setup(c: &ExperimentConfig) -> Result<FlowSetup> {
    let spec = c.spec()?;
    let params = c.params()?;
    let grid = c.grid()?;
    let env = Envelope::new(spec.clone(), c.cut()?)?;
    let stepper = Stepper::new(&grid, env, params)?;
    let initial = if c.smooth {
        init_smooth_distance(&c.shape(), &grid, c.clamp)?
    } else {
        init_signed_distance(&c.shape(), &grid, c.clamp)?
    };
    Ok(FlowSetup { spec, grid, stepper, initial })
}

/// Radius of a circle or ball front against `R(t)² = R₀² − 2 f(1,…,1,0) t`.
fn shrink_sphere(c: &ExperimentConfig) -> Result<Vec<Check>> {
    let s = flow_setup(c)?;
    let speed = sphere_speed(&s.spec)?;
    let r0 = c.shape_radius;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    let mut far_ok = true;
    s.stepper.run(&FlowState::initial(s.initial.clone()), c.t_max, c.snap_every, |st| {
        rows.push(SeriesRow::from_state(st));
        far_ok &= st.field.far_field_intact();
        if c.write_snapshots {
            write_snapshot(&c.out_dir, st)?;
        }
        let exact = (r0 * r0 - 2.0 * speed * st.t).max(0.0).sqrt();
        let front = extract_front(&st.field, 0.0);
        let err = if front.is_empty() { f64::INFINITY } else { ((mean_radius(&front) - exact) / exact).abs() };
        worst = worst.max(err);
        Ok(())
    })?;
    write_series_csv(&c.out_dir.join("series.csv"), &rows)?;
    Ok(vec![
        Check::at_most("radius_rel_err", worst, c.tolerance),
        Check::at_most("far_field_violations", if far_ok { 0.0 } else { 1.0 }, 0.0),
    ])
}

/// Runs the flow and audits `α` at every snapshot whose front radius
/// estimate is at least `10h`.
fn andrews_series(c: &ExperimentConfig) -> Result<Vec<AndrewsRow>> {
    let s = flow_setup(c)?;
    let h = c.grid_h;
    let params = *s.stepper.params();
    let env = s.stepper.envelope().clone();
    let mut rows = Vec::new();
    let mut series = Vec::new();
    s.stepper.run(&FlowState::initial(s.initial.clone()), c.t_max, c.snap_every, |st| {
        series.push(SeriesRow::from_state(st));
        if front_radius_estimate(&st.field) < 10.0 * h {
            return Ok(());
        }
        let front = extract_front(&st.field, 0.0);
        let samples = front_samples(&st.field, &front, &env, &params)?;
        let rep = andrews_alpha(&samples.samples, c.min_separation * h)?;
        rows.push(AndrewsRow::new(st.t, &rep));
        Ok(())
    })?;
    write_series_csv(&c.out_dir.join("series.csv"), &series)?;
    write_andrews_csv(&c.out_dir.join("andrews.csv"), &rows)?;
    Ok(rows)
}

fn shrink_ellipse(c: &ExperimentConfig) -> Result<Vec<Check>> {
    let rows = andrews_series(c)?;
    let a0 = rows.first().map_or(f64::NAN, |r| r.alpha_int);
    let ratio = rows.iter().map(|r| r.alpha_int / a0).fold(f64::INFINITY, f64::min);
    Ok(vec![
        Check::at_least("alpha_int_ratio_min", ratio, c.tolerance),
        Check::at_least("audited_snapshots", rows.len() as f64, 2.0),
    ])
}

fn andrews_track(c: &ExperimentConfig) -> Result<Vec<Check>> {
    let rows = andrews_series(c)?;
    let target = sphere_speed(&c.spec()?)?;
    let err = rows.iter().map(|r| ((r.alpha_int - target) / target).abs()).fold(0.0, f64::max);
    let z = suites::z_identity_suite(1000, c.seed)?;
    Ok(vec![
        Check::at_most("alpha_int_rel_err", if rows.is_empty() { f64::NAN } else { err }, c.tolerance),
        Check::at_least("audited_snapshots", rows.len() as f64, 2.0),
        Check::at_most("z_identity_failures", z.failures as f64, 0.0),
    ])
}

fn arrival_ball(c: &ExperimentConfig) -> Result<Vec<Check>> {
    let spec = c.spec()?;
    let params = c.params()?;
    let env = Envelope::new(spec.clone(), c.cut()?)?;
    let mask = DomainMask::from_shape(&c.shape(), &c.grid()?)?;
    let v = solve_stationary(&mask, &env, &params, c.tol, c.max_iters)?;
    dump::write_grid(&c.out_dir.join("v.grid"), &v)?;
    let t_star = extinction_time(&v, &mask);
    write_arrival_csv(&c.out_dir.join("arrival.csv"), &arrival_rows(&v, t_star, 20))?;
    // Radial solution: v_r = r / f(1,…,1,0), so v = (r² − R²) / (2 f(1,…,1,0)).
    let speed = sphere_speed(&spec)?;
    let r = c.shape_radius;
    let g = mask.grid();
    let d = g.dims();
    let mut err: f64 = 0.0;
    for i in (0..g.len()).filter(|&i| mask.inside()[i]) {
        let x = g.position(i);
        let r2: f64 = x[..d].iter().map(|v| v * v).sum();
        err = err.max((v.values()[i] - (r2 - r * r) / (2.0 * speed)).abs());
    }
    let exact_t = r * r / (2.0 * speed);
    let bar = check_barriers(&v, &mask);
    Ok(vec![
        Check::at_most("v_rel_err", err / t_star, c.tolerance),
        Check::at_most("t_star_rel_err", (t_star - exact_t).abs() / exact_t, c.tolerance),
        Check::at_most("max_v", bar.max_v, 1e-10),
        Check::at_most("linear_barrier_excess", bar.linear_excess, 1e-10),
        Check::at_most("log_barrier_excess", bar.log_excess, 1e-10),
    ])
}

/// `(1 − |x − c|²/ρ²)³₊`.
fn bump(x: &[f64], c: &[f64; 3], rho: f64) -> f64 {
    let r2: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (rho * rho);
    if r2 < 1.0 {
        (1.0 - r2).powi(3)
    } else {
        0.0
    }
}

/// Random ordered pair `g₁ ≤ g₂` of smooth data that is constant near the
/// far field.
fn random_pair(grid: &GridSpec, rng: &mut rand_chacha::ChaCha8Rng) -> Result<(ScalarField, ScalarField)> {
    let d = grid.dims();
    let s = grid.radius();
    let mut draw = |amp: (f64, f64)| -> Vec<([f64; 3], f64, f64)> {
        (0..4)
            .map(|_| {
                let rho = rng.gen_range(0.2..0.4) * s;
                let mut c = [0.0; 3];
                for v in c.iter_mut().take(d) {
                    *v = rng.gen_range(-1.0..1.0) * (s - rho) / (d as f64).sqrt() * 0.9;
                }
                (c, rho, rng.gen_range(amp.0..amp.1))
            })
            .collect()
    };
    let base = draw((-0.3, 0.3));
    let extra = draw((0.0, 0.2));
    let offset = rng.gen_range(0.0..0.05);
    let eval = |bumps: &[([f64; 3], f64, f64)], x: &[f64]| bumps.iter().map(|(c, r, a)| a * bump(x, c, *r)).sum::<f64>();
    let g1 = ScalarField::from_fn(grid.clone(), 0.0, |x| eval(&base, x))?;
    let g2 = ScalarField::from_fn(grid.clone(), offset, |x| eval(&base, x) + offset + eval(&extra, x))?;
    Ok((g1, g2))
}

/// Comparison and contraction on random ordered pairs, stepping both at the
/// CFL limit.
fn ordered_pairs(c: &ExperimentConfig) -> Result<Vec<Check>> {
    let spec = c.spec()?;
    let grid = c.grid()?;
    let stepper = Stepper::new(&grid, Envelope::new(spec, c.cut()?)?, c.params()?)?;
    let dt = stepper.dt_limit();
    let mut rng = suites::rng(c.seed);
    let mut ordering_violations = 0usize;
    let mut worst_order: f64 = f64::NEG_INFINITY;
    let mut increases = 0usize;
    let mut worst_increase: f64 = f64::NEG_INFINITY;
    let mut out = std::io::BufWriter::new(std::fs::File::create(c.out_dir.join("series.csv"))?);
    writeln!(out, "pair,step,sup_diff,min_gap")?;
    for pair in 0..c.pairs {
        let (g1, g2) = random_pair(&grid, &mut rng)?;
        let (mut u, mut v) = (g1.values().to_vec(), g2.values().to_vec());
        let (mut u2, mut v2) = (u.clone(), v.clone());
        let mut diff = sup_diff(&u, &v);
        for step in 1..=c.steps {
            stepper.step_into(&u, &mut u2, dt)?;
            stepper.step_into(&v, &mut v2, dt)?;
            std::mem::swap(&mut u, &mut u2);
            std::mem::swap(&mut v, &mut v2);
            let gap = u.iter().zip(&v).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
            worst_order = worst_order.max(gap);
            if gap > 1e-12 {
                ordering_violations += 1;
            }
            let next = sup_diff(&u, &v);
            worst_increase = worst_increase.max(next - diff);
            if next > diff + 1e-10 {
                increases += 1;
            }
            diff = next;
            if step % 100 == 0 {
                writeln!(out, "{pair},{step},{next},{}", -gap)?;
            }
        }
    }
    out.flush()?;
    Ok(match c.experiment {
        ExperimentKind::ComparisonPair => vec![
            Check::at_most("ordering_violation", ordering_violations as f64, 0.0),
            Check::at_most("max_order_gap", worst_order, c.tolerance),
        ],
        _ => vec![
            Check::at_most("sup_diff_increases", increases as f64, 0.0),
            Check::at_most("max_sup_diff_increase", worst_increase, c.tolerance),
        ],
    })
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn relabel_check(c: &ExperimentConfig) -> Result<Vec<Check>> {
    let s = flow_setup(c)?;
    let psi = c.psi;
    let w0 = relabel(&s.initial, |x| psi.apply(x))?;
    let end_u = s.stepper.run(&FlowState::initial(s.initial.clone()), c.t_max, c.t_max, |_| Ok(()))?;
    let end_w = s.stepper.run(&FlowState::initial(w0), c.t_max, c.t_max, |_| Ok(()))?;
    let (fu, fw) = (extract_front(&end_u.field, 0.0), extract_front(&end_w.field, 0.0));
    let dist = if fu.is_empty() || fw.is_empty() { f64::INFINITY } else { hausdorff(&fu, &fw) };
    write_series_csv(
        &c.out_dir.join("series.csv"),
        &[SeriesRow::from_state(&end_u), SeriesRow::from_state(&end_w)],
    )?;
    Ok(vec![Check::at_most("front_hausdorff", dist, c.tolerance * c.grid_h)])
}

/// Adds a bump of height `10h²` and radius `3h` centred at `center`.
pub fn corrupt(field: &ScalarField, center: &[f64]) -> Result<ScalarField> {
    let g = field.grid();
    let h = g.h();
    let d = g.dims();
    let mut c = [0.0; 3];
    c[..d].copy_from_slice(&center[..d]);
    let vals = (0..g.len())
        .map(|i| {
            let x = g.position(i);
            let r2: f64 = (0..d).map(|a| (x[a] - c[a]).powi(2)).sum::<f64>() / (9.0 * h * h);
            let b = if g.is_far(i) || r2 >= 1.0 { 0.0 } else { 10.0 * h * h * (1.0 - r2).powi(2) };
            field.values()[i] + b
        })
        .collect();
    ScalarField::new(g.clone(), vals, field.far_value())
}

fn probe_run(c: &ExperimentConfig) -> Result<Vec<Check>> {
    let s = flow_setup(c)?;
    let params = *s.stepper.params();
    let cfg = ProbeConfig { threshold: None, ..ProbeConfig::for_flow(c.grid_h, &params) };
    let h = c.grid_h;
    let g = s.grid.clone();
    let cells = (0..g.len()).filter(|&i| g.is_interior(i) && !g.is_far(i)).count();
    let mut violations = 0usize;
    let mut unaccounted = 0usize;
    let mut indeterminate = 0usize;
    let mut audited = 0usize;
    let mut undetected = 0usize;
    let mut all = ProbeReport {
        violations: Vec::new(),
        max_slack: f64::NEG_INFINITY,
        n_probed: 0,
        n_indeterminate: 0,
        n_outside_cone: 0,
        threshold: 0.0,
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(c.out_dir.join("series.csv"))?);
    writeln!(out, "t,n_probed,n_indeterminate,n_outside_cone,violations,max_slack,threshold,corrupted_violations")?;
    s.stepper.run(&FlowState::initial(s.initial.clone()), c.t_max, c.snap_every, |st| {
        if st.t == 0.0 {
            return Ok(());
        }
        let dt = s.stepper.dt_limit();
        let s1 = s.stepper.step(st, dt)?;
        let s2 = s.stepper.step(&s1, dt)?;
        let frames = [(&st.field, st.t), (&s1.field, s1.t), (&s2.field, s2.t)];
        let rep = viscosity_probe(frames, &s.spec, &cfg)?;
        audited += 1;
        violations += rep.violations.len();
        indeterminate += rep.n_indeterminate;
        if rep.n_probed + rep.n_indeterminate + rep.n_outside_cone != cells {
            unaccounted += 1;
        }
        // Counterexample: a bump on the front, where the gradient is resolved.
        let r = front_radius_estimate(&s1.field);
        let mut center = [0.0; 3];
        center[0] = r;
        let bad = corrupt(&s1.field, &center)?;
        let bad_rep = viscosity_probe([frames[0], (&bad, s1.t), frames[2]], &s.spec, &cfg)?;
        let near = bad_rep
            .violations
            .iter()
            .filter(|v| {
                let x = g.position(v.cell);
                let d2: f64 = x.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum();
                d2.sqrt() <= 5.0 * h
            })
            .count();
        if near == 0 {
            undetected += 1;
        }
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            st.t,
            rep.n_probed,
            rep.n_indeterminate,
            rep.n_outside_cone,
            rep.violations.len(),
            rep.max_slack,
            rep.threshold,
            near
        )?;
        all.violations.extend(rep.violations);
        all.max_slack = all.max_slack.max(rep.max_slack);
        Ok(())
    })?;
    out.flush()?;
    write_probe_csv(&c.out_dir.join("probe.csv"), g.dims(), &all)?;
    Ok(vec![
        Check::at_most("probe_violations", violations as f64, 0.0),
        Check::at_most("corrupted_undetected", undetected as f64, 0.0),
        Check::at_most("unaccounted_snapshots", unaccounted as f64, 0.0),
        Check::at_least("indeterminate_cells", indeterminate as f64, 0.0),
        Check::at_least("audited_snapshots", audited as f64, 1.0),
    ])
}

/// Every property suite: the envelope audit on each family, homogeneity,
/// the `γ^ε` and `Z` identities and the convolution suite.
pub fn verify_suites(c: &ExperimentConfig) -> Result<Vec<Check>> {
    let mut results: Vec<SuiteResult> = Vec::new();
    let cut = c.cut()?;
    let mut families = vec![c.spec()?];
    for f in suites::audit_families() {
        if !families.contains(&f) {
            families.push(f);
        }
    }
    for (k, spec) in families.iter().enumerate() {
        let env = Envelope::new(spec.clone(), cut)?;
        for mut r in suites::envelope_audit(&env, c.draws, c.seed.wrapping_add(k as u64))? {
            r.name = format!("{}[{}]", r.name, family_label(spec));
            results.push(r);
        }
        let mut hom = suites::homogeneity_suite(spec, 100, c.seed.wrapping_add(100 + k as u64))?;
        hom.name = format!("{}[{}]", hom.name, family_label(spec));
        results.push(hom);
    }
    results.push(suites::gamma_identity_suite(1000, c.seed));
    results.push(suites::z_identity_suite(1000, c.seed)?);
    results.extend(suites::convolution_suite(c.fields, c.seed)?);
    let mut out = std::io::BufWriter::new(std::fs::File::create(c.out_dir.join("suites.csv"))?);
    writeln!(out, "suite,checked,failures,worst")?;
    for r in &results {
        writeln!(out, "{},{},{},{}", r.name, r.checked, r.failures, r.worst)?;
    }
    out.flush()?;
    Ok(results
        .iter()
        .map(|r| Check::at_most(&format!("{}_failures", r.name), r.failures as f64, 0.0))
        .collect())
}

fn family_label(spec: &CurvatureSpec) -> String {
    match spec.family() {
        crate::cone::Family::Sigma { k } => format!("sigma{k}_{}d", spec.dim()),
        crate::cone::Family::Quotient { k, l } => format!("quotient{k}{l}_{}d", spec.dim()),
    }
}
