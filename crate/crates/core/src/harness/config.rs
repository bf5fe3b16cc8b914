//! `key=value` experiment configuration.

use std::collections::HashMap;
use std::path::PathBuf;
use std::str::FromStr;

use crate::cone::{ConeCut, CurvatureSpec};
use crate::error::{Error, Result};
use crate::front::Shape;
use crate::grid::{GridSpec, RegularizationParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    ShrinkCircle,
    ShrinkBall,
    ShrinkEllipse,
    ArrivalBall,
    AndrewsTrack,
    ComparisonPair,
    ContractionPair,
    RelabelCheck,
    ProbeRun,
    EnvelopeAudit,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 10] = [
        ExperimentKind::ShrinkCircle,
        ExperimentKind::ShrinkBall,
        ExperimentKind::ShrinkEllipse,
        ExperimentKind::ArrivalBall,
        ExperimentKind::AndrewsTrack,
        ExperimentKind::ComparisonPair,
        ExperimentKind::ContractionPair,
        ExperimentKind::RelabelCheck,
        ExperimentKind::ProbeRun,
        ExperimentKind::EnvelopeAudit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::ShrinkCircle => "shrink_circle",
            ExperimentKind::ShrinkBall => "shrink_ball",
            ExperimentKind::ShrinkEllipse => "shrink_ellipse",
            ExperimentKind::ArrivalBall => "arrival_ball",
            ExperimentKind::AndrewsTrack => "andrews_track",
            ExperimentKind::ComparisonPair => "comparison_pair",
            ExperimentKind::ContractionPair => "contraction_pair",
            ExperimentKind::RelabelCheck => "relabel_check",
            ExperimentKind::ProbeRun => "probe_run",
            ExperimentKind::EnvelopeAudit => "envelope_audit",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Sigma,
    Quotient,
}

/// Monotone relabelling maps for `relabel_check`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Psi {
    Identity,
    Double,
    Cube,
}

impl Psi {
    pub fn apply(self, s: f64) -> f64 {
        match self {
            Psi::Identity => s,
            Psi::Double => 2.0 * s,
            Psi::Cube => s * s * s,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShapeKind {
    Circle,
    Ellipse,
    Ball,
}

/// A fully validated experiment description.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub family: Family,
    pub k: usize,
    pub l: usize,
    pub dim: usize,
    /// Nodes per axis of a grid centred on the origin.
    pub grid_n: usize,
    pub grid_h: f64,
    /// Far-field radius `S`.
    pub grid_radius: f64,
    pub eps: f64,
    pub n_cut: u32,
    pub sigma: f64,
    pub t_max: f64,
    pub snap_every: f64,
    pub shape: ShapeKind,
    pub shape_radius: f64,
    pub shape_a: f64,
    pub shape_b: f64,
    pub clamp: f64,
    /// Smooth saturation instead of a hard clamp of the signed distance.
    pub smooth: bool,
    /// Acceptance threshold of the experiment's headline metric.
    pub tolerance: f64,
    pub pairs: usize,
    pub steps: usize,
    pub draws: usize,
    pub fields: usize,
    /// Stationary-solver residual tolerance and iteration budget.
    pub tol: f64,
    pub max_iters: usize,
    /// Pair cutoff of the ball radii, in cells.
    pub min_separation: f64,
    pub psi: Psi,
    pub write_snapshots: bool,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    /// Documented defaults for an experiment.
    pub fn defaults(experiment: ExperimentKind) -> Self {
        use ExperimentKind::*;
        let h: f64 = match experiment {
            ShrinkBall => 3.0 / 95.0,
            ArrivalBall => 0.02,
            ComparisonPair | ContractionPair => 0.05,
            _ => 0.01,
        };
        let eps = 0.1 * h.sqrt();
        let mut c = Self {
            experiment,
            family: Family::Sigma,
            k: 1,
            l: 0,
            dim: 2,
            grid_n: 255,
            grid_h: h,
            grid_radius: 1.25,
            eps,
            n_cut: ConeCut::for_eps(eps).n_cut(),
            sigma: 0.1 * h,
            t_max: 0.7,
            snap_every: 0.05,
            shape: ShapeKind::Circle,
            shape_radius: 1.0,
            shape_a: 1.0,
            shape_b: 0.5,
            clamp: 0.2,
            smooth: false,
            tolerance: 0.02,
            pairs: 20,
            steps: 1000,
            draws: 10_000,
            fields: 50,
            tol: 1e-4,
            max_iters: 400_000,
            min_separation: 2.0,
            psi: Psi::Cube,
            write_snapshots: false,
            seed: 0,
            out_dir: PathBuf::from("out"),
        };
        match experiment {
            ShrinkCircle => {}
            ShrinkBall => {
                c.k = 2;
                c.dim = 3;
                c.grid_n = 96;
                c.n_cut = 2;
                c.shape = ShapeKind::Ball;
                c.clamp = 0.15;
                c.t_max = 0.5;
                c.tolerance = 0.04;
            }
            ShrinkEllipse => {
                c.shape = ShapeKind::Ellipse;
                c.t_max = 0.45;
                c.snap_every = 0.025;
                c.tolerance = 0.93;
            }
            ArrivalBall => {
                c.grid_n = 131;
                c.eps = 1e-3;
                c.sigma = 0.0;
            }
            AndrewsTrack => {
                c.t_max = 0.95;
                c.tolerance = 0.07;
            }
            ComparisonPair | ContractionPair => {
                c.grid_n = 41;
                c.grid_radius = 0.95;
                c.eps = h.sqrt();
                c.n_cut = ConeCut::for_eps(c.eps).n_cut();
                c.tolerance = if experiment == ComparisonPair { 1e-12 } else { 1e-10 };
            }
            RelabelCheck => {
                c.t_max = 0.25;
                c.snap_every = 0.25;
                c.tolerance = 3.0;
            }
            ProbeRun => {
                c.smooth = true;
                c.t_max = 0.5;
                c.snap_every = 0.1;
                c.tolerance = 5e-2;
            }
            EnvelopeAudit => {
                c.k = 2;
                c.dim = 3;
                c.n_cut = 4;
                c.tolerance = 1e-6;
            }
        }
        c
    }

    pub fn spec(&self) -> Result<CurvatureSpec> {
        match self.family {
            Family::Sigma => CurvatureSpec::sigma(self.k, self.dim),
            Family::Quotient => CurvatureSpec::quotient(self.k, self.l, self.dim),
        }
    }

    pub fn cut(&self) -> Result<ConeCut> {
        ConeCut::new(self.n_cut)
    }

    pub fn params(&self) -> Result<RegularizationParams> {
        RegularizationParams::new(self.eps, self.n_cut, self.sigma)
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::centered(self.dim, self.grid_n, self.grid_h, self.grid_radius)
    }

    pub fn shape(&self) -> Shape {
        match self.shape {
            ShapeKind::Circle => Shape::Circle { center: [0.0; 2], radius: self.shape_radius },
            ShapeKind::Ellipse => Shape::Ellipse { center: [0.0; 2], a: self.shape_a, b: self.shape_b },
            ShapeKind::Ball => Shape::Ball { center: [0.0; 3], radius: self.shape_radius },
        }
    }
}

const KEYS: &[&str] = &[
    "experiment",
    "f.family",
    "f.k",
    "f.l",
    "f.dim",
    "grid.n",
    "grid.h",
    "grid.radius",
    "eps",
    "n_cut",
    "sigma",
    "t_max",
    "snap_every",
    "shape",
    "shape.radius",
    "shape.a",
    "shape.b",
    "shape.clamp",
    "shape.smooth",
    "tolerance",
    "pairs",
    "steps",
    "draws",
    "fields",
    "tol",
    "max_iters",
    "min_separation",
    "psi",
    "write_snapshots",
    "seed",
    "out_dir",
];

/// Parses and validates a configuration. Every problem found is reported,
/// each naming its key or line.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut errors = Vec::new();
    let mut entries: HashMap<&str, (usize, &str)> = HashMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line_no = no + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(format!("line {line_no}: expected key=value, got `{line}`"));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            errors.push(format!("line {line_no}: unknown key `{key}`"));
            continue;
        }
        if let Some((first, _)) = entries.get(key) {
            errors.push(format!("line {line_no}: duplicate key `{key}` (first set on line {first})"));
            continue;
        }
        entries.insert(key, (line_no, value));
    }
    let experiment = match entries.get("experiment") {
        None => {
            errors.push("missing required key `experiment`".into());
            return Err(Error::Config(errors));
        }
        Some((line_no, v)) => match v.parse::<ExperimentKind>() {
            Ok(k) => k,
            Err(e) => {
                errors.push(format!("line {line_no}: {e}"));
                return Err(Error::Config(errors));
            }
        },
    };
    let mut c = ExperimentConfig::defaults(experiment);
    let mut p = Parser { entries: &entries, errors: &mut errors };
    // Spacing-dependent defaults follow an explicit grid.h.
    if let Some(h) = p.num::<f64>("grid.h", |h| h > 0.0, "must be positive") {
        c.grid_h = h;
        if !matches!(experiment, ExperimentKind::ArrivalBall) {
            c.eps = if matches!(experiment, ExperimentKind::ComparisonPair | ExperimentKind::ContractionPair) {
                h.sqrt().min(0.999)
            } else {
                0.1 * h.sqrt()
            };
            c.sigma = 0.1 * h;
        }
        if !matches!(experiment, ExperimentKind::ShrinkBall | ExperimentKind::EnvelopeAudit) {
            c.n_cut = ConeCut::for_eps(c.eps).n_cut();
        }
    }
    if let Some(v) = p.choice("f.family", &[("sigma", Family::Sigma), ("quotient", Family::Quotient)]) {
        c.family = v;
    }
    p.set(&mut c.k, "f.k", |k| (1..=3).contains(&k), "must be in 1..=3");
    p.set(&mut c.l, "f.l", |l| l <= 2, "must be in 0..=2");
    p.set(&mut c.dim, "f.dim", |d| d == 2 || d == 3, "must be 2 or 3");
    p.set(&mut c.grid_n, "grid.n", |n| (5..=1024).contains(&n), "must be in 5..=1024");
    p.set(&mut c.grid_radius, "grid.radius", |r| r > 0.0, "must be positive");
    if let Some(eps) = p.num::<f64>("eps", |e| e > 0.0 && e < 1.0, "must be in (0, 1)") {
        c.eps = eps;
        if !matches!(experiment, ExperimentKind::ShrinkBall | ExperimentKind::EnvelopeAudit) {
            c.n_cut = ConeCut::for_eps(eps).n_cut();
        }
    }
    p.set(&mut c.n_cut, "n_cut", |n| n >= 2, "must be at least 2");
    p.set(&mut c.sigma, "sigma", |s| s >= 0.0, "must be nonnegative");
    p.set(&mut c.t_max, "t_max", |t| t > 0.0, "must be positive");
    p.set(&mut c.snap_every, "snap_every", |t| t > 0.0, "must be positive");
    if let Some(v) = p.choice(
        "shape",
        &[("circle", ShapeKind::Circle), ("ellipse", ShapeKind::Ellipse), ("ball", ShapeKind::Ball)],
    ) {
        c.shape = v;
    }
    p.set(&mut c.shape_radius, "shape.radius", |r| r > 0.0, "must be positive");
    p.set(&mut c.shape_a, "shape.a", |r| r > 0.0, "must be positive");
    p.set(&mut c.shape_b, "shape.b", |r| r > 0.0, "must be positive");
    p.set(&mut c.clamp, "shape.clamp", |r| r > 0.0, "must be positive");
    if let Some(v) = p.choice("shape.smooth", &[("true", true), ("false", false)]) {
        c.smooth = v;
    }
    p.set(&mut c.tolerance, "tolerance", |t| t > 0.0, "must be positive");
    p.set(&mut c.pairs, "pairs", |n| n >= 1, "must be at least 1");
    p.set(&mut c.steps, "steps", |n| n >= 1, "must be at least 1");
    p.set(&mut c.draws, "draws", |n| n >= 1, "must be at least 1");
    p.set(&mut c.fields, "fields", |n| n >= 1, "must be at least 1");
    p.set(&mut c.tol, "tol", |t| t > 0.0, "must be positive");
    p.set(&mut c.max_iters, "max_iters", |n| n >= 1, "must be at least 1");
    p.set(&mut c.min_separation, "min_separation", |s| s >= 0.0, "must be nonnegative");
    if let Some(v) = p.choice("psi", &[("identity", Psi::Identity), ("double", Psi::Double), ("cube", Psi::Cube)]) {
        c.psi = v;
    }
    if let Some(v) = p.choice("write_snapshots", &[("true", true), ("false", false)]) {
        c.write_snapshots = v;
    }
    p.set(&mut c.seed, "seed", |_| true, "");
    if let Some((_, v)) = entries.get("out_dir") {
        c.out_dir = PathBuf::from(v);
    }
    // Cross-key checks.
    if let Err(e) = c.spec() {
        errors.push(format!("f.family/f.k/f.l/f.dim: {e}"));
    }
    let shape_dims = if c.shape == ShapeKind::Ball { 3 } else { 2 };
    if shape_dims != c.dim && !matches!(experiment, ExperimentKind::EnvelopeAudit) {
        errors.push(format!("shape: a {:?} needs f.dim = {shape_dims}", c.shape));
    }
    if errors.is_empty() {
        Ok(c)
    } else {
        Err(Error::Config(errors))
    }
}

struct Parser<'a, 'b> {
    entries: &'a HashMap<&'a str, (usize, &'a str)>,
    errors: &'b mut Vec<String>,
}

impl Parser<'_, '_> {
    fn num<T: FromStr>(&mut self, key: &str, ok: impl Fn(T) -> bool, why: &str) -> Option<T>
    where
        T: Copy,
    {
        let (line, raw) = self.entries.get(key)?;
        match raw.parse::<T>() {
            Ok(v) if ok(v) => Some(v),
            Ok(_) => {
                self.errors.push(format!("line {line}: `{key}` = {raw} out of range: {why}"));
                None
            }
            Err(_) => {
                self.errors.push(format!("line {line}: `{key}` = {raw} is not a valid value"));
                None
            }
        }
    }

    fn set<T: FromStr + Copy>(&mut self, slot: &mut T, key: &str, ok: impl Fn(T) -> bool, why: &str) {
        if let Some(v) = self.num(key, ok, why) {
            *slot = v;
        }
    }

    fn choice<T: Copy>(&mut self, key: &str, options: &[(&str, T)]) -> Option<T> {
        let (line, raw) = self.entries.get(key)?;
        match options.iter().find(|(name, _)| name == raw) {
            Some((_, v)) => Some(*v),
            None => {
                let names: Vec<&str> = options.iter().map(|o| o.0).collect();
                self.errors.push(format!("line {line}: `{key}` = {raw} must be one of {}", names.join(", ")));
                None
            }
        }
    }
}
