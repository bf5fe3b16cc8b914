//! Acceptance criteria, one test each. Tests are serialized so the runtime
//! budgets are measured without contention, and every test prints a single
//! PASS/FAIL line straight to stderr (bypassing output capture).

use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use gcflow::harness::{parse_config, run_experiment, ExperimentConfig, Summary};

static SERIAL: Mutex<()> = Mutex::new(());

fn config(text: &str) -> (ExperimentConfig, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let c = parse_config(&format!("{text}\nout_dir={}\n", dir.path().display())).unwrap();
    (c, dir)
}

fn run(text: &str) -> (Summary, Duration) {
    let (c, _dir) = config(text);
    let start = Instant::now();
    let s = run_experiment(&c).unwrap();
    (s, start.elapsed())
}

fn details(s: &Summary, prefix: Option<&str>) -> (bool, String) {
    let checks: Vec<_> = s.checks.iter().filter(|c| prefix.map_or(true, |p| c.metric.starts_with(p))).collect();
    let ok = !checks.is_empty() && checks.iter().all(|c| c.pass());
    let shown: Vec<String> = checks
        .iter()
        .filter(|c| !c.pass() || checks.len() <= 6)
        .map(|c| format!("{}={:.4e}", c.metric, c.value))
        .collect();
    let shown = if shown.is_empty() { "every check at its threshold".to_string() } else { shown.join(" ") };
    (ok, format!("{} checks; {shown}", checks.len()))
}

fn report(n: u32, name: &str, ok: bool, detail: &str) {
    let line = format!("criterion {n:>2} {name}: {} ({detail})\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(ok, "{line}");
}

#[test]
fn c01_shrinking_circle() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let (s, took) = run("experiment=shrink_circle");
    let (ok, d) = details(&s, None);
    let fast = took <= Duration::from_secs(120);
    report(1, "shrinking circle", ok && fast, &format!("{d} runtime={:.1}s", took.as_secs_f64()));
}

#[test]
fn c02_shrinking_ball() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let (s, took) = run("experiment=shrink_ball");
    let (ok, d) = details(&s, None);
    let fast = took <= Duration::from_secs(900);
    report(2, "shrinking ball 96^3", ok && fast, &format!("{d} runtime={:.1}s", took.as_secs_f64()));
}

#[test]
fn c03_arrival_time() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let (s, _) = run("experiment=arrival_ball");
    let (ok, d) = details(&s, None);
    report(3, "arrival time on the unit disk", ok, &d);
}

/// The property suites behind criteria 4, 5 and 9 share one run.
fn verify_summary() -> &'static Summary {
    static ONCE: std::sync::OnceLock<Summary> = std::sync::OnceLock::new();
    ONCE.get_or_init(|| run("experiment=envelope_audit\nseed=20240501").0)
}

#[test]
fn c04_envelope_audit() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let s = verify_summary();
    let (a, da) = details(s, Some("envelope_"));
    let (b, db) = details(s, Some("homogeneity"));
    report(4, "envelope audit, 10^4 draws per family", a && b, &format!("{da}; {db}"));
}

#[test]
fn c05_gamma_identity() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let (ok, d) = details(verify_summary(), Some("gamma_identity"));
    report(5, "gamma^eps product identity", ok, &d);
}

#[test]
fn c06_comparison_and_contraction() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let (a, _) = run("experiment=comparison_pair\nseed=11");
    let (b, _) = run("experiment=contraction_pair\nseed=12");
    let (oa, da) = details(&a, None);
    let (ob, db) = details(&b, None);
    report(6, "discrete comparison and contraction", oa && ob, &format!("{da}; {db}"));
}

#[test]
fn c07_relabel_invariance() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let (s, _) = run("experiment=relabel_check");
    let (ok, d) = details(&s, None);
    report(7, "relabel invariance psi(s)=s^3", ok, &d);
}

#[test]
fn c08_noncollapsing() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let (a, _) = run("experiment=andrews_track\nseed=13");
    let (b, _) = run("experiment=shrink_ellipse");
    let (oa, da) = details(&a, None);
    let (ob, db) = details(&b, None);
    report(8, "non-collapsing audit", oa && ob, &format!("circle {da}; ellipse {db}"));
}

#[test]
fn c09_convolution_suite() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let (ok, d) = details(verify_summary(), Some("convolution_"));
    report(9, "sup/inf convolution suite", ok, &d);
}

#[test]
fn c10_viscosity_probe() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let (s, _) = run("experiment=probe_run");
    let (ok, d) = details(&s, None);
    report(10, "viscosity probe", ok, &d);
}
