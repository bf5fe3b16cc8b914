//! Andrews non-collapsing audit: the `Z` function and inscribed/exscribed
//! ball radii along a sampled front.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::front::FrontSample;

/// `Z(x, y) = F_x/2 |x − y|² + δ ⟨x − y, ν_x⟩`.
///
/// With `C_x = x + (δ/F_x) ν_x` this is `F_x/2 (|y − C_x|² − (δ/F_x)²)`, so
/// `Z ≥ 0` says `y` lies outside the ball of radius `δ/F_x` about `C_x`.
pub fn z_value(x: &FrontSample, y: &[f64], delta: f64) -> Result<f64> {
    if !(x.speed > 0.0) {
        return Err(Error::NonPositiveSpeed(x.speed));
    }
    let d = x.dims;
    let mut sq = 0.0;
    let mut dot = 0.0;
    for k in 0..d {
        let diff = x.position[k] - y[k];
        sq += diff * diff;
        dot += diff * x.inward_normal[k];
    }
    Ok(0.5 * x.speed * sq + delta * dot)
}

/// Largest interior and exterior balls touching the front at `samples[i]`
/// that contain no other sample: `min |x − y|² / (2 ⟨y − x, ±ν_x⟩)` over `y`
/// on the matching side, `+∞` when that side is empty.
///
/// Pairs closer than `min_separation` are ignored; at grid scale the
/// quotient divides two quantities of the size of the extraction error.
pub fn ball_radii(samples: &[FrontSample], i: usize, min_separation: f64) -> (f64, f64) {
    let x = &samples[i];
    let d = x.dims;
    let min_sq = min_separation * min_separation;
    let mut r_int = f64::INFINITY;
    let mut r_ext = f64::INFINITY;
    for (j, y) in samples.iter().enumerate() {
        if j == i {
            continue;
        }
        let mut sq = 0.0;
        let mut dot = 0.0;
        for k in 0..d {
            let diff = y.position[k] - x.position[k];
            sq += diff * diff;
            dot += diff * x.inward_normal[k];
        }
        if sq == 0.0 || sq < min_sq {
            continue;
        }
        if dot > 0.0 {
            r_int = r_int.min(sq / (2.0 * dot));
        } else if dot < 0.0 {
            r_ext = r_ext.min(sq / (-2.0 * dot));
        }
    }
    (r_int, r_ext)
}

/// Per-sample radii and the aggregated ratios `α = inf F · r`.
#[derive(Clone, Debug, PartialEq)]
pub struct AndrewsReport {
    pub interior_radius: Vec<f64>,
    pub exterior_radius: Vec<f64>,
    pub speed: Vec<f64>,
    pub alpha_int: f64,
    pub alpha_ext: f64,
    /// Samples with `F ≤ 0`; a flat point imposes no ball condition, so
    /// these are excluded from the infima and listed here instead.
    pub flagged: Vec<usize>,
}

impl AndrewsReport {
    pub fn n_samples(&self) -> usize {
        self.speed.len()
    }

    /// Samples with `F · r_int < alpha`, worst first.
    pub fn interior_violations(&self, alpha: f64) -> Vec<usize> {
        let mut v: Vec<usize> = (0..self.speed.len())
            .filter(|&i| self.speed[i] > 0.0 && self.speed[i] * self.interior_radius[i] < alpha)
            .collect();
        v.sort_by(|&a, &b| {
            (self.speed[a] * self.interior_radius[a]).total_cmp(&(self.speed[b] * self.interior_radius[b]))
        });
        v
    }
}

/// Pairwise `O(M²)` audit of a front.
pub fn andrews_alpha(samples: &[FrontSample], min_separation: f64) -> Result<AndrewsReport> {
    if samples.is_empty() {
        return Err(Error::EmptyFront);
    }
    let mut rep = AndrewsReport {
        interior_radius: Vec::with_capacity(samples.len()),
        exterior_radius: Vec::with_capacity(samples.len()),
        speed: Vec::with_capacity(samples.len()),
        alpha_int: f64::INFINITY,
        alpha_ext: f64::INFINITY,
        flagged: Vec::new(),
    };
    for (i, s) in samples.iter().enumerate() {
        let (ri, re) = ball_radii(samples, i, min_separation);
        rep.interior_radius.push(ri);
        rep.exterior_radius.push(re);
        rep.speed.push(s.speed);
        if s.speed > 0.0 {
            rep.alpha_int = rep.alpha_int.min(s.speed * ri);
            rep.alpha_ext = rep.alpha_ext.min(s.speed * re);
        } else {
            rep.flagged.push(i);
        }
    }
    Ok(rep)
}

/// One row of `andrews.csv`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AndrewsRow {
    pub t: f64,
    pub alpha_int: f64,
    pub alpha_ext: f64,
    pub n_samples: usize,
    pub n_flagged: usize,
}

impl AndrewsRow {
    pub fn new(t: f64, rep: &AndrewsReport) -> Self {
        Self {
            t,
            alpha_int: rep.alpha_int,
            alpha_ext: rep.alpha_ext,
            n_samples: rep.n_samples(),
            n_flagged: rep.flagged.len(),
        }
    }
}

pub fn write_andrews_csv(path: &Path, rows: &[AndrewsRow]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "t,alpha_int,alpha_ext,n_samples,n_flagged")?;
    for r in rows {
        writeln!(f, "{},{},{},{},{}", r.t, r.alpha_int, r.alpha_ext, r.n_samples, r.n_flagged)?;
    }
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn sample(x: [f64; 2], nu: [f64; 2], speed: f64) -> FrontSample {
        FrontSample {
            dims: 2,
            position: [x[0], x[1], 0.0],
            inward_normal: [nu[0], nu[1], 0.0],
            speed,
            weight: 1.0,
        }
    }

    fn circle(c: [f64; 2], r: f64, m: usize) -> Vec<FrontSample> {
        (0..m)
            .map(|k| {
                let th = TAU * k as f64 / m as f64;
                let (s, co) = th.sin_cos();
                sample([c[0] + r * co, c[1] + r * s], [-co, -s], 0.5 / r)
            })
            .collect()
    }

    /// Exact samples of the ellipse `x²/a² + y²/b² = 1` with speed `κ/2`.
    fn ellipse(a: f64, b: f64, m: usize) -> Vec<FrontSample> {
        (0..m)
            .map(|k| {
                let th = TAU * k as f64 / m as f64;
                let (s, c) = th.sin_cos();
                let (nx, ny) = (b * c, a * s);
                let nn = nx.hypot(ny);
                let kappa = a * b / (a * a * s * s + b * b * c * c).powf(1.5);
                sample([a * c, b * s], [-nx / nn, -ny / nn], 0.5 * kappa)
            })
            .collect()
    }

    #[test]
    fn z_examples() {
        let x = sample([0.0, 0.0], [0.0, 1.0], 2.0);
        assert_eq!(z_value(&x, &[0.0, 0.0], 1.0).unwrap(), 0.0);
        assert!((z_value(&x, &[1.0, 1.0], 1.0).unwrap() - 1.0).abs() < 1e-15);
        // On the sphere of radius δ/F about C_x = (0, 1/2).
        let y = [0.5 * 0.3f64.cos(), 0.5 + 0.5 * 0.3f64.sin()];
        assert!(z_value(&x, &y, 1.0).unwrap().abs() < 1e-12);
        let flat = sample([0.0, 0.0], [0.0, 1.0], 0.0);
        assert!(matches!(z_value(&flat, &y, 1.0), Err(Error::NonPositiveSpeed(_))));
    }

    #[test]
    fn circle_radii() {
        let s = circle([0.0, 0.0], 1.0, 400);
        let (ri, re) = ball_radii(&s, 17, 0.0);
        assert!((ri - 1.0).abs() < 1e-9);
        assert!(re.is_infinite());
        let rep = andrews_alpha(&s, 0.0).unwrap();
        assert!((rep.alpha_int - 0.5).abs() < 1e-9);
        assert!(rep.alpha_ext.is_infinite());
        assert!(rep.interior_violations(0.49).is_empty());
        assert_eq!(rep.interior_violations(0.51).len(), 400);
    }

    #[test]
    fn exterior_radius_across_a_gap() {
        let mut s = circle([-2.0, 0.0], 1.0, 2000);
        s.extend(circle([2.0, 0.0], 1.0, 2000));
        // Sample at (-1, 0), facing the other circle whose nearest point is (1, 0).
        let (_, re) = ball_radii(&s, 0, 0.0);
        assert!((re - 1.0).abs() < 0.1, "{re}");
    }

    /// Largest `r` with `Z(x, y; δ = r F) ≥ 0` for every other sample, by bisection.
    fn radius_from_z(s: &[FrontSample], i: usize) -> f64 {
        let ok = |r: f64| s.iter().enumerate().all(|(j, y)| j == i || z_value(&s[i], &y.position, r * s[i].speed).unwrap() >= 0.0);
        let (mut lo, mut hi) = (0.0, 1.0);
        while ok(hi) {
            hi *= 2.0;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    #[test]
    fn ellipse_radii() {
        let s = ellipse(1.0, 0.5, 2000);
        // At (0, b) the opposite vertex bounds the ball: r = b, F = b/(2a²).
        let (ri, re) = ball_radii(&s, 500, 0.0);
        assert!((ri - 0.5).abs() < 1e-9 && re.is_infinite());
        let rep = andrews_alpha(&s, 0.0).unwrap();
        assert!(rep.alpha_int <= 0.125 + 1e-9);
        for i in (0..2000).step_by(97) {
            let r = rep.interior_radius[i];
            assert!((radius_from_z(&s, i) - r).abs() < 1e-9 * r.max(1.0), "sample {i}");
        }
        // Refinement can only lower the infimum.
        let fine = ellipse(1.0, 0.5, 4000);
        for i in (0..2000).step_by(37) {
            assert!(ball_radii(&fine, 2 * i, 0.0).0 <= rep.interior_radius[i] + 1e-9);
        }
    }

    #[test]
    fn flat_samples_flagged() {
        let mut s = circle([0.0, 0.0], 1.0, 50);
        s[3].speed = 0.0;
        let rep = andrews_alpha(&s, 0.0).unwrap();
        assert_eq!(rep.flagged, vec![3]);
        assert!(andrews_alpha(&[], 0.0).is_err());
    }
}
