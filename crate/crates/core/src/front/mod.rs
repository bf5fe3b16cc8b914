//! Initial data, level-set extraction and geometric sampling of fronts.

mod extract;
mod shapes;
mod tables;

use std::io::Write;
use std::path::Path;

pub use extract::{extract_front, hausdorff, Front, FrontVertex, Mesh, Polyline};
pub use shapes::{ellipse_closest_point, ellipse_signed_distance, init_signed_distance, init_smooth_distance, Shape};

use crate::cone::Envelope;
use crate::error::{Error, Result};
use crate::grid::linalg::{eigenvalues_sorted, gamma_exact, SymMat, DEFAULT_EIG_TOL};
use crate::grid::stencil::derivatives;
use crate::grid::{RegularizationParams, ScalarField};

/// A point of the front with its inward normal, normal speed and measure share.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrontSample {
    pub dims: usize,
    pub position: [f64; 3],
    /// `ν = −Du/|Du|`.
    pub inward_normal: [f64; 3],
    pub speed: f64,
    pub weight: f64,
}

/// Samples plus bookkeeping of what was left out.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrontSamples {
    pub samples: Vec<FrontSample>,
    /// Vertices skipped because `|Du| < 10 ε` or the stencil left the grid.
    pub skipped: usize,
    /// Start offsets of each 2D loop within `samples` (for CSV blank lines).
    pub loop_starts: Vec<usize>,
}

/// Gradient and Hessian at a front vertex, interpolated along its grid edge.
pub fn vertex_derivatives(field: &ScalarField, v: &FrontVertex) -> Option<([f64; 3], SymMat)> {
    let g = field.grid();
    if !g.is_interior(v.a) || !g.is_interior(v.b) {
        return None;
    }
    let (st, dims, h) = (g.strides(), g.dims(), g.h());
    let (pa, ha) = derivatives(field.values(), st, dims, h, v.a);
    let (pb, hb) = derivatives(field.values(), st, dims, h, v.b);
    let mut p = [0.0; 3];
    for k in 0..dims {
        p[k] = (1.0 - v.t) * pa[k] + v.t * pb[k];
    }
    Some((p, ha.scale(1.0 - v.t).add(&hb.scale(v.t))))
}

/// Normal speed of the level set through a point with gradient `p` and
/// Hessian `hess`: `f̂ⁿ` of the eigenvalues of `γ_p D²u γ_p / |p|`.
pub fn level_set_speed(p: &[f64], hess: &SymMat, env: &Envelope) -> f64 {
    let n = hess.size();
    let norm = p[..n].iter().map(|x| x * x).sum::<f64>().sqrt();
    let m = hess.congruence(&gamma_exact(&p[..n])).scale(1.0 / norm);
    let eig = eigenvalues_sorted(&m, DEFAULT_EIG_TOL);
    env.value(&eig[..n])
}

/// Per-vertex normal, speed and weight.
pub fn front_samples(
    field: &ScalarField,
    front: &Front,
    env: &Envelope,
    params: &RegularizationParams,
) -> Result<FrontSamples> {
    let dims = field.grid().dims();
    let min_grad = 10.0 * params.eps;
    let mut out = FrontSamples::default();
    let mut total = 0usize;
    let mut push = |v: &FrontVertex, weight: f64, out: &mut FrontSamples| {
        total += 1;
        let Some((p, hess)) = vertex_derivatives(field, v) else {
            out.skipped += 1;
            return;
        };
        let norm = p[..dims].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < min_grad {
            out.skipped += 1;
            return;
        }
        let mut nu = [0.0; 3];
        for k in 0..dims {
            nu[k] = -p[k] / norm;
        }
        out.samples.push(FrontSample {
            dims,
            position: v.position,
            inward_normal: nu,
            speed: level_set_speed(&p[..dims], &hess, env),
            weight,
        });
    };
    match front {
        Front::Curves(loops) => {
            for l in loops {
                out.loop_starts.push(out.samples.len());
                let vs = &l.vertices;
                let n = if l.closed { vs.len() - 1 } else { vs.len() };
                for i in 0..n {
                    let prev = if i > 0 {
                        extract::dist(&vs[i].position, &vs[i - 1].position)
                    } else if l.closed {
                        extract::dist(&vs[0].position, &vs[n - 1].position)
                    } else {
                        0.0
                    };
                    let next = if i + 1 < vs.len() { extract::dist(&vs[i].position, &vs[i + 1].position) } else { 0.0 };
                    push(&vs[i], 0.5 * (prev + next), &mut out);
                }
            }
        }
        Front::Surface(mesh) => {
            let mut w = vec![0.0; mesh.vertices.len()];
            for t in &mesh.triangles {
                let a = extract::triangle_area(mesh, t) / 3.0;
                for &k in t {
                    w[k] += a;
                }
            }
            for (v, &wk) in mesh.vertices.iter().zip(&w) {
                push(v, wk, &mut out);
            }
        }
    }
    if total == 0 {
        return Err(Error::EmptyFront);
    }
    if out.samples.is_empty() {
        return Err(Error::DegenerateFront(total));
    }
    Ok(out)
}

/// Front CSV: `x,y[,z],nx,ny[,nz],F,weight`, blank line between 2D loops.
pub fn write_front_csv(path: &Path, samples: &FrontSamples) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let dims = samples.samples.first().map_or(2, |s| s.dims);
    if dims == 2 {
        writeln!(f, "x,y,nx,ny,F,weight")?;
    } else {
        writeln!(f, "x,y,z,nx,ny,nz,F,weight")?;
    }
    for (i, s) in samples.samples.iter().enumerate() {
        if i > 0 && samples.loop_starts.contains(&i) {
            writeln!(f)?;
        }
        let d = s.dims;
        let cols: Vec<String> = s.position[..d]
            .iter()
            .chain(&s.inward_normal[..d])
            .chain([&s.speed, &s.weight])
            .map(|v| v.to_string())
            .collect();
        writeln!(f, "{}", cols.join(","))?;
    }
    f.flush()?;
    Ok(())
}

/// Mean distance of the front vertices from the origin.
pub fn mean_radius(front: &Front) -> f64 {
    let vs = front.vertices();
    if vs.is_empty() {
        return 0.0;
    }
    vs.iter().map(|v| extract::dist(&v.position, &[0.0; 3])).sum::<f64>() / vs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::{ConeCut, CurvatureSpec};
    use crate::grid::GridSpec;

    fn s1_env() -> Envelope {
        Envelope::new(CurvatureSpec::sigma(1, 2).unwrap(), ConeCut::new(10).unwrap()).unwrap()
    }

    fn circle_samples(r: f64, h: f64) -> FrontSamples {
        let half = r + 0.6;
        let n = (2.0 * half / h).round() as usize + 1;
        let g = GridSpec::centered(2, n, h, r + 0.45).unwrap();
        let f = init_signed_distance(&Shape::Circle { center: [0.0, 0.0], radius: r }, &g, 0.4).unwrap();
        let front = extract_front(&f, 0.0);
        let params = RegularizationParams::new(1e-3, 10, 0.0).unwrap();
        front_samples(&f, &front, &s1_env(), &params).unwrap()
    }

    #[test]
    fn circle_normals_and_speed() {
        let s = circle_samples(1.0, 0.02);
        assert_eq!(s.skipped, 0);
        for x in &s.samples {
            let r = x.position[0].hypot(x.position[1]);
            let dot = (x.inward_normal[0] * x.position[0] + x.inward_normal[1] * x.position[1]) / r;
            assert!((dot + 1.0).abs() < 5e-2);
            assert!((x.inward_normal[0].hypot(x.inward_normal[1]) - 1.0).abs() < 1e-10);
            assert!((x.speed - 0.5).abs() < 0.025, "{}", x.speed);
            assert!(x.weight > 0.0, "{:?} {}", x.position, x.weight);
        }
    }

    #[test]
    fn weights_sum_to_length() {
        let h = 0.02;
        let g = GridSpec::centered(2, 161, h, 1.55).unwrap();
        let f = init_signed_distance(&Shape::Circle { center: [0.0, 0.0], radius: 1.0 }, &g, 0.4).unwrap();
        let front = extract_front(&f, 0.0);
        let params = RegularizationParams::new(1e-3, 10, 0.0).unwrap();
        let s = front_samples(&f, &front, &s1_env(), &params).unwrap();
        let total: f64 = s.samples.iter().map(|x| x.weight).sum();
        assert!((total / front.measure() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn near_flat_front_is_slow() {
        // A patch of the R = 50 circle: u = |x − c| − 50 with c far to the left.
        let g = GridSpec::centered(2, 41, 0.05, 0.95).unwrap();
        let f = ScalarField::from_fn(g, 0.4, |x| (((x[0] + 50.0).powi(2) + x[1] * x[1]).sqrt() - 50.0).clamp(-0.4, 0.4)).unwrap();
        let front = extract_front(&f, 0.0);
        let params = RegularizationParams::new(1e-3, 10, 0.0).unwrap();
        let s = front_samples(&f, &front, &s1_env(), &params).unwrap();
        // Only the patch: the far-field ring closes the sublevel set far away.
        let patch: Vec<_> = s.samples.iter().filter(|x| x.position[0].abs() < 0.1 && x.position[1].abs() < 0.5).collect();
        assert!(patch.len() > 10);
        assert!(patch.iter().all(|x| x.speed <= 0.02 && x.speed > 0.0));
    }

    #[test]
    fn flat_field_is_degenerate() {
        let g = GridSpec::centered(2, 21, 0.1, 0.95).unwrap();
        let f = ScalarField::from_fn(g, 0.0, |x| 1e-6 * x[0]).unwrap();
        let front = extract_front(&f, 0.0);
        let params = RegularizationParams::new(0.5, 10, 0.0).unwrap();
        assert!(matches!(front_samples(&f, &front, &s1_env(), &params), Err(Error::DegenerateFront(_))));
    }
}
