use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};

/// Initial hypersurfaces with a closed-form (signed) distance.
#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    Circle { center: [f64; 2], radius: f64 },
    /// Axis-aligned ellipse with semi-axes `a` (along x) and `b` (along y).
    Ellipse { center: [f64; 2], a: f64, b: f64 },
    Ball { center: [f64; 3], radius: f64 },
    /// Union of balls in 2D or 3D; entries are `(center, radius)`.
    UnionOfBalls { dims: usize, balls: Vec<([f64; 3], f64)> },
}

impl Shape {
    pub fn dims(&self) -> usize {
        match self {
            Shape::Circle { .. } | Shape::Ellipse { .. } => 2,
            Shape::Ball { .. } => 3,
            Shape::UnionOfBalls { dims, .. } => *dims,
        }
    }

    /// Largest `|x|` over the shape.
    pub fn extent(&self) -> f64 {
        match self {
            Shape::Circle { center, radius } => norm(center) + radius,
            Shape::Ellipse { center, a, b } => norm(center) + a.max(*b),
            Shape::Ball { center, radius } => norm(center) + radius,
            Shape::UnionOfBalls { balls, .. } => {
                balls.iter().map(|(c, r)| norm(c) + r).fold(0.0, f64::max)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(m.to_string()));
        match self {
            Shape::Circle { radius, .. } | Shape::Ball { radius, .. } if !(*radius > 0.0) => {
                bad("radius must be positive")
            }
            Shape::Ellipse { a, b, .. } if !(*a > 0.0 && *b > 0.0) => bad("semi-axes must be positive"),
            Shape::UnionOfBalls { dims, balls } => {
                if *dims != 2 && *dims != 3 {
                    return bad("union of balls needs dims 2 or 3");
                }
                if balls.is_empty() || balls.iter().any(|(_, r)| !(*r > 0.0)) {
                    return bad("union needs at least one ball with positive radius");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Signed distance, negative inside. Exact for circles, balls and
    /// ellipses; for a union it is the minimum of the member distances,
    /// which is exact outside and a bound inside.
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        match self {
            Shape::Circle { center, radius } => dist(&x[..2], center) - radius,
            Shape::Ball { center, radius } => dist(&x[..3], center) - radius,
            Shape::Ellipse { center, a, b } => ellipse_signed_distance(x[0] - center[0], x[1] - center[1], *a, *b),
            Shape::UnionOfBalls { dims, balls } => balls
                .iter()
                .map(|(c, r)| dist(&x[..*dims], &c[..*dims]) - r)
                .fold(f64::INFINITY, f64::min),
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dist(x: &[f64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Clamped signed distance `max(−clamp, min(d, clamp))`, with far value `clamp`.
pub fn init_signed_distance(shape: &Shape, grid: &GridSpec, clamp: f64) -> Result<ScalarField> {
    init_with(shape, grid, clamp, |d| d.clamp(-clamp, clamp))
}

/// `clamp · s(d/clamp)` with the quintic `s(x) = (15x − 10x³ + 3x⁵)/8` on
/// `[−1, 1]`, `±1` beyond. Same zero set and far value as the clamped
/// distance but twice differentiable wherever `d` is, so snapshots carry no
/// kink at the clamp.
pub fn init_smooth_distance(shape: &Shape, grid: &GridSpec, clamp: f64) -> Result<ScalarField> {
    init_with(shape, grid, clamp, |d| {
        let x = (d / clamp).clamp(-1.0, 1.0);
        let x2 = x * x;
        clamp * x * (15.0 - 10.0 * x2 + 3.0 * x2 * x2) / 8.0
    })
}

fn init_with<F: Fn(f64) -> f64>(shape: &Shape, grid: &GridSpec, clamp: f64, profile: F) -> Result<ScalarField> {
    shape.validate()?;
    if shape.dims() != grid.dims() {
        return Err(Error::InvalidSpec(format!(
            "shape is {}-dimensional, grid is {}-dimensional",
            shape.dims(),
            grid.dims()
        )));
    }
    if !(clamp > 0.0) {
        return Err(Error::InvalidSpec(format!("clamp must be positive, got {clamp}")));
    }
    // The clamped distance reaches the far value only if the front plus the
    // clamp band stays inside S.
    let reach = shape.extent() + clamp;
    if reach > grid.radius() {
        return Err(Error::ShapeTooLarge {
            radius: grid.radius(),
            detail: format!("extent {} plus clamp {clamp} = {reach}", shape.extent()),
        });
    }
    ScalarField::from_fn(grid.clone(), clamp, |x| profile(shape.signed_distance(x)))
}

/// Closest point on the ellipse `(x/a)² + (y/b)² = 1`, by bisection on the
/// Lagrange parameter. Works in the first quadrant and reflects.
pub fn ellipse_closest_point(x: f64, y: f64, a: f64, b: f64) -> [f64; 2] {
    // Reduce to a ≥ b.
    if a < b {
        let [py, px] = ellipse_closest_point(y, x, b, a);
        return [px, py];
    }
    let (y0, y1) = (x.abs(), y.abs());
    let (x0, x1) = if y1 > 0.0 {
        if y0 > 0.0 {
            let g = |t: f64| {
                let r0 = a * y0 / (t + a * a);
                let r1 = b * y1 / (t + b * b);
                r0 * r0 + r1 * r1 - 1.0
            };
            let mut lo = -b * b + b * y1;
            let mut hi = -b * b + (a * a * y0 * y0 + b * b * y1 * y1).sqrt();
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid == lo || mid == hi {
                    break;
                }
                if g(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t = 0.5 * (lo + hi);
            (a * a * y0 / (t + a * a), b * b * y1 / (t + b * b))
        } else {
            (0.0, b)
        }
    } else {
        let num = a * y0;
        let den = a * a - b * b;
        if num < den {
            let x0 = a * a * y0 / den;
            (x0, b * (1.0 - (x0 / a) * (x0 / a)).max(0.0).sqrt())
        } else {
            (a, 0.0)
        }
    };
    [x0.copysign(x), x1.copysign(y)]
}

/// Signed distance to an origin-centred axis-aligned ellipse.
pub fn ellipse_signed_distance(x: f64, y: f64, a: f64, b: f64) -> f64 {
    let [cx, cy] = ellipse_closest_point(x, y, a, b);
    let d = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
    if (x / a).powi(2) + (y / b).powi(2) < 1.0 {
        -d
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_values() {
        let c = Shape::Circle { center: [0.0, 0.0], radius: 1.0 };
        assert_eq!(c.signed_distance(&[0.0, 0.0]), -1.0);
        assert_eq!(c.signed_distance(&[2.0, 0.0]), 1.0);
        let g = GridSpec::centered(2, 41, 0.1, 1.9).unwrap();
        let f = init_signed_distance(&c, &g, 0.5).unwrap();
        assert_eq!(f.get(&[20, 20]), -0.5);
        assert!(f.far_field_intact());
    }

    #[test]
    fn too_large_rejected() {
        let c = Shape::Circle { center: [0.0, 0.0], radius: 1.8 };
        let g = GridSpec::centered(2, 41, 0.1, 1.9).unwrap();
        assert!(matches!(init_signed_distance(&c, &g, 0.2), Err(Error::ShapeTooLarge { .. })));
    }

    #[test]
    fn ellipse_distance_against_dense_oracle() {
        let (a, b) = (1.0, 0.5);
        let pts: Vec<[f64; 2]> = (0..200_000)
            .map(|k| {
                let th = k as f64 * std::f64::consts::TAU / 200_000.0;
                [a * th.cos(), b * th.sin()]
            })
            .collect();
        for &(x, y) in &[(0.3, 0.1), (1.5, 0.7), (0.0, 0.2), (0.9, 0.0), (0.2, 0.0), (-1.2, -0.3)] {
            let brute = pts.iter().map(|p| ((x - p[0]).powi(2) + (y - p[1]).powi(2)).sqrt()).fold(f64::INFINITY, f64::min);
            let d = ellipse_signed_distance(x, y, a, b).abs();
            assert!((d - brute).abs() < 1e-4, "({x},{y}): {d} vs {brute}");
        }
    }

    /// Extraction of an off-centre circle from exact distance data: the
    /// radial error at least halves with every halving of `h`.
    #[test]
    fn extraction_converges_under_refinement() {
        let c = [0.013, 0.007];
        let errs: Vec<f64> = [0.04f64, 0.02, 0.01]
            .iter()
            .map(|&h| {
                let g = GridSpec::centered(2, (3.0 / h).round() as usize + 1, h, 1.2).unwrap();
                let u = init_signed_distance(&Shape::Circle { center: c, radius: 0.7 }, &g, 0.2).unwrap();
                let f = crate::front::extract_front(&u, 0.0);
                f.vertices().iter().map(|v| ((v.position[0] - c[0]).hypot(v.position[1] - c[1]) - 0.7).abs()).fold(0.0, f64::max)
            })
            .collect();
        for w in errs.windows(2) {
            let ratio = w[1] / w[0];
            assert!(ratio <= 0.7 && ratio > 0.15, "{errs:?}");
        }
    }
}
