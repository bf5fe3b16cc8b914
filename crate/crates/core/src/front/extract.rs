use std::collections::HashMap;

use super::tables::{EDGE_TABLE, TRI_TABLE};
use crate::grid::ScalarField;

/// A vertex of an extracted level set, lying on the grid edge from node `a`
/// to node `b` at fraction `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrontVertex {
    pub position: [f64; 3],
    pub a: usize,
    pub b: usize,
    pub t: f64,
}

/// A 2D polyline. Closed loops repeat their first vertex at the end.
#[derive(Clone, Debug, PartialEq)]
pub struct Polyline {
    pub vertices: Vec<FrontVertex>,
    pub closed: bool,
}

impl Polyline {
    pub fn length(&self) -> f64 {
        self.vertices.windows(2).map(|w| dist(&w[0].position, &w[1].position)).sum()
    }
}

/// Indexed triangle mesh; vertices are shared between triangles.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<FrontVertex>,
    pub triangles: Vec<[usize; 3]>,
}

impl Mesh {
    pub fn area(&self) -> f64 {
        self.triangles.iter().map(|t| triangle_area(self, t)).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Front {
    Curves(Vec<Polyline>),
    Surface(Mesh),
}

impl Front {
    pub fn is_empty(&self) -> bool {
        match self {
            Front::Curves(c) => c.is_empty(),
            Front::Surface(m) => m.triangles.is_empty(),
        }
    }

    /// All distinct vertices (the closing repeat of a loop is dropped).
    pub fn vertices(&self) -> Vec<FrontVertex> {
        match self {
            Front::Curves(c) => c
                .iter()
                .flat_map(|l| {
                    let n = if l.closed { l.vertices.len() - 1 } else { l.vertices.len() };
                    l.vertices[..n].iter().copied()
                })
                .collect(),
            Front::Surface(m) => m.vertices.clone(),
        }
    }

    /// Arc length (2D) or area (3D).
    pub fn measure(&self) -> f64 {
        match self {
            Front::Curves(c) => c.iter().map(Polyline::length).sum(),
            Front::Surface(m) => m.area(),
        }
    }
}

pub(crate) fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

pub(crate) fn triangle_area(m: &Mesh, t: &[usize; 3]) -> f64 {
    let p = m.vertices[t[0]].position;
    let q = m.vertices[t[1]].position;
    let r = m.vertices[t[2]].position;
    let u = [q[0] - p[0], q[1] - p[1], q[2] - p[2]];
    let v = [r[0] - p[0], r[1] - p[1], r[2] - p[2]];
    let c = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    0.5 * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
}

/// Level set `{u = level}`: marching squares in 2D, marching cubes in 3D.
/// Nodes with `u < level` count as inside.
pub fn extract_front(field: &ScalarField, level: f64) -> Front {
    let empty = !(field.min() < level && field.max() >= level);
    match field.grid().dims() {
        2 if empty => Front::Curves(Vec::new()),
        2 => Front::Curves(marching_squares(field, level)),
        _ if empty => Front::Surface(Mesh::default()),
        _ => Front::Surface(marching_cubes(field, level)),
    }
}

fn edge_vertex(field: &ScalarField, level: f64, a: usize, b: usize) -> FrontVertex {
    let u = field.values();
    let t = (level - u[a]) / (u[b] - u[a]);
    let g = field.grid();
    let pa = g.position(a);
    let pb = g.position(b);
    let mut position = [0.0; 3];
    for k in 0..3 {
        position[k] = if t == 1.0 { pb[k] } else { pa[k] + t * (pb[k] - pa[k]) };
    }
    FrontVertex { position, a, b, t }
}

fn marching_squares(field: &ScalarField, level: f64) -> Vec<Polyline> {
    let g = field.grid();
    let u = field.values();
    let st = g.strides();
    let (nx, ny) = (g.shape()[0], g.shape()[1]);
    let (sx, sy) = (st[0], st[1]);
    let inside = |i: usize| u[i] < level;
    // Edge key: 2·node + axis, where the edge runs from node along +axis.
    let key = |node: usize, axis: usize| 2 * node + axis;
    // start edge -> (end edge, start vertex)
    let mut next: HashMap<usize, (usize, FrontVertex)> = HashMap::new();
    let mut starts: Vec<usize> = Vec::new();
    for i in 0..nx - 1 {
        for j in 0..ny - 1 {
            let n00 = i * sx + j * sy;
            let c = [n00, n00 + sx, n00 + sx + sy, n00 + sy];
            let ins = [inside(c[0]), inside(c[1]), inside(c[2]), inside(c[3])];
            if ins.iter().all(|&x| x) || ins.iter().all(|&x| !x) {
                continue;
            }
            // Edges counterclockwise: bottom, right, top, left.
            let edges = [(c[0], c[1], key(n00, 0)), (c[1], c[2], key(n00 + sx, 1)), (c[3], c[2], key(n00 + sy, 0)), (c[0], c[3], key(n00, 1))];
            let crossed: Vec<usize> = (0..4).filter(|&e| ins[e] != ins[(e + 1) % 4]).collect();
            let pairs: Vec<(usize, usize)> = if crossed.len() == 2 {
                vec![(crossed[0], crossed[1])]
            } else {
                // Saddle: corner k sits between edges k-1 and k. Cut off the
                // corners whose state differs from the cell average.
                let avg = 0.25 * (u[c[0]] + u[c[1]] + u[c[2]] + u[c[3]]);
                let centre_inside = avg < level;
                (0..4)
                    .filter(|&k| ins[k] != centre_inside)
                    .map(|k| ((k + 3) % 4, k))
                    .collect()
            };
            for (e0, e1) in pairs {
                // Edge e runs from corner e to corner e+1. The inside lies on
                // the left when a segment goes from the edge that leaves the
                // inside to the edge that enters it.
                let exits = |e: usize| ins[e] && !ins[(e + 1) % 4];
                let (from, to) = if exits(e0) { (e0, e1) } else { (e1, e0) };
                let sv = edge_vertex(field, level, edges[from].0, edges[from].1);
                let (s, e) = (edges[from].2, edges[to].2);
                if next.insert(s, (e, sv)).is_none() {
                    starts.push(s);
                }
            }
        }
    }
    let mut loops = Vec::new();
    let mut used: HashMap<usize, bool> = HashMap::new();
    // Chain heads: start edges that are nobody's end (open curves) first.
    let ends: std::collections::HashSet<usize> = next.values().map(|(e, _)| *e).collect();
    let mut order: Vec<usize> = starts.iter().copied().filter(|s| !ends.contains(s)).collect();
    order.extend(starts.iter().copied());
    for s0 in order {
        if used.contains_key(&s0) {
            continue;
        }
        let mut vertices = Vec::new();
        let mut s = s0;
        let mut closed = false;
        loop {
            used.insert(s, true);
            let (e, v) = next[&s];
            push_distinct(&mut vertices, v);
            if e == s0 {
                closed = true;
                if vertices.len() > 1 && vertices.last().map(|l| l.position) == Some(vertices[0].position) {
                    vertices.pop();
                }
                vertices.push(vertices[0]);
                break;
            }
            match next.get(&e) {
                Some(_) if !used.contains_key(&e) => s = e,
                _ => {
                    // Open end: append the terminal vertex on edge e.
                    let (a, b) = edge_nodes(e, sx, sy);
                    push_distinct(&mut vertices, edge_vertex(field, level, a, b));
                    break;
                }
            }
        }
        loops.push(Polyline { vertices, closed });
    }
    loops
}

/// Skips a vertex that coincides with the previous one (the level passes
/// through a node shared by two crossed edges).
fn push_distinct(vertices: &mut Vec<FrontVertex>, v: FrontVertex) {
    if vertices.last().map(|l| l.position) != Some(v.position) {
        vertices.push(v);
    }
}

fn edge_nodes(key: usize, sx: usize, sy: usize) -> (usize, usize) {
    let node = key / 2;
    if key % 2 == 0 {
        (node, node + sx)
    } else {
        (node, node + sy)
    }
}

const CUBE_CORNERS: [[usize; 3]; 8] =
    [[0, 0, 0], [0, 1, 0], [1, 1, 0], [1, 0, 0], [0, 0, 1], [0, 1, 1], [1, 1, 1], [1, 0, 1]];
const CUBE_EDGES: [(usize, usize); 12] =
    [(0, 1), (1, 2), (2, 3), (3, 0), (4, 5), (5, 6), (6, 7), (7, 4), (0, 4), (1, 5), (2, 6), (3, 7)];

fn marching_cubes(field: &ScalarField, level: f64) -> Mesh {
    let g = field.grid();
    let u = field.values();
    let st = g.strides();
    let sh = g.shape();
    let mut mesh = Mesh::default();
    // Vertex dedup by the (ordered) node pair of the grid edge.
    let mut ids: HashMap<(usize, usize), usize> = HashMap::new();
    for i in 0..sh[0] - 1 {
        for j in 0..sh[1] - 1 {
            for k in 0..sh[2] - 1 {
                let base = i * st[0] + j * st[1] + k * st[2];
                let mut nodes = [0usize; 8];
                let mut index = 0usize;
                for (c, off) in CUBE_CORNERS.iter().enumerate() {
                    nodes[c] = base + off[0] * st[0] + off[1] * st[1] + off[2] * st[2];
                    if u[nodes[c]] >= level {
                        index |= 1 << c;
                    }
                }
                if EDGE_TABLE[index] == 0 {
                    continue;
                }
                let mut vert = [usize::MAX; 12];
                for (e, &(c0, c1)) in CUBE_EDGES.iter().enumerate() {
                    if EDGE_TABLE[index] & (1 << e) != 0 {
                        let (a, b) = if nodes[c0] < nodes[c1] { (nodes[c0], nodes[c1]) } else { (nodes[c1], nodes[c0]) };
                        // A vertex sitting exactly on a node is keyed by that node.
                        let key = if u[a] == level {
                            (a, a)
                        } else if u[b] == level {
                            (b, b)
                        } else {
                            (a, b)
                        };
                        vert[e] = *ids.entry(key).or_insert_with(|| {
                            mesh.vertices.push(edge_vertex(field, level, a, b));
                            mesh.vertices.len() - 1
                        });
                    }
                }
                let row = &TRI_TABLE[index];
                let mut n = 0;
                while n + 2 < 16 && row[n] != -1 {
                    let t = [vert[row[n] as usize], vert[row[n + 1] as usize], vert[row[n + 2] as usize]];
                    if t[0] != t[1] && t[1] != t[2] && t[0] != t[2] {
                        mesh.triangles.push(t);
                    }
                    n += 3;
                }
            }
        }
    }
    mesh
}

/// Symmetric Hausdorff distance between two fronts of the same dimension.
/// In 2D distances are taken to the polyline segments; in 3D between vertices.
pub fn hausdorff(a: &Front, b: &Front) -> f64 {
    fn one_sided(a: &Front, b: &Front) -> f64 {
        let pts = a.vertices();
        match b {
            Front::Curves(loops) => {
                let segs: Vec<([f64; 3], [f64; 3])> = loops
                    .iter()
                    .flat_map(|l| l.vertices.windows(2).map(|w| (w[0].position, w[1].position)))
                    .collect();
                pts.iter()
                    .map(|p| segs.iter().map(|(s, e)| point_segment(&p.position, s, e)).fold(f64::INFINITY, f64::min))
                    .fold(0.0, f64::max)
            }
            Front::Surface(m) => pts
                .iter()
                .map(|p| m.vertices.iter().map(|q| dist(&p.position, &q.position)).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max),
        }
    }
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    one_sided(a, b).max(one_sided(b, a))
}

fn point_segment(p: &[f64; 3], s: &[f64; 3], e: &[f64; 3]) -> f64 {
    let d = [e[0] - s[0], e[1] - s[1], e[2] - s[2]];
    let l2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    let t = if l2 > 0.0 {
        (((p[0] - s[0]) * d[0] + (p[1] - s[1]) * d[1] + (p[2] - s[2]) * d[2]) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist(p, &[s[0] + t * d[0], s[1] + t * d[1], s[2] + t * d[2]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::front::{init_signed_distance, Shape};
    use crate::grid::GridSpec;

    fn circle(h: f64) -> ScalarField {
        let n = (3.0 / h).round() as usize + 1;
        let g = GridSpec::centered(2, n, h, 1.45).unwrap();
        init_signed_distance(&Shape::Circle { center: [0.0, 0.0], radius: 1.0 }, &g, 0.4).unwrap()
    }

    fn signed_area(l: &Polyline) -> f64 {
        l.vertices.windows(2).map(|w| w[0].position[0] * w[1].position[1] - w[1].position[0] * w[0].position[1]).sum::<f64>() * 0.5
    }

    #[test]
    fn circle_loop_closed_ccw_and_accurate() {
        let h = 0.05;
        let f = circle(h);
        let Front::Curves(loops) = extract_front(&f, 0.0) else { panic!() };
        assert_eq!(loops.len(), 1);
        let l = &loops[0];
        assert!(l.closed);
        assert_eq!(l.vertices.first().unwrap().position, l.vertices.last().unwrap().position);
        assert!(signed_area(l) > 0.0);
        let err = l.vertices.iter().map(|v| (v.position[0].hypot(v.position[1]) - 1.0).abs()).fold(0.0, f64::max);
        assert!(err <= h, "{err}");
    }

    #[test]
    fn out_of_range_levels_are_empty() {
        let f = circle(0.1);
        assert!(extract_front(&f, 10.0).is_empty());
        assert!(extract_front(&f, -10.0).is_empty());
    }

    #[test]
    fn saddle_cell_average_rule() {
        // Checkerboard 2x2 block in the middle of a grid: the centre average
        // decides whether the two inside corners connect.
        let g = GridSpec::centered(2, 5, 1.0, 1.0).unwrap();
        let mut vals = vec![1.0; 25];
        let at = |i: usize, j: usize| i * 5 + j;
        vals[at(2, 2)] = -1.0;
        vals[at(3, 3)] = -0.5;
        let f = ScalarField::from_parts_unchecked(g.clone(), vals.clone(), 1.0);
        // Average of the saddle cell (2..3, 2..3) is 0.125 > 0: corners separate.
        let Front::Curves(loops) = extract_front(&f, 0.0) else { panic!() };
        assert_eq!(loops.len(), 2);
        vals[at(2, 3)] = 0.2;
        vals[at(3, 2)] = 0.2;
        vals[at(2, 2)] = -2.0;
        let f = ScalarField::from_parts_unchecked(g, vals, 1.0);
        let Front::Curves(loops) = extract_front(&f, 0.0) else { panic!() };
        assert_eq!(loops.len(), 1);
        assert!(loops.iter().all(|l| l.closed && signed_area(l) > 0.0));
    }

    #[test]
    fn sphere_mesh_area() {
        let h = 0.05;
        let g = GridSpec::centered(3, 61, h, 1.45).unwrap();
        let f = init_signed_distance(&Shape::Ball { center: [0.0; 3], radius: 1.0 }, &g, 0.3).unwrap();
        let Front::Surface(m) = extract_front(&f, 0.0) else { panic!() };
        let area = m.area();
        assert!((area / (4.0 * std::f64::consts::PI) - 1.0).abs() < 0.01, "{area}");
        for v in &m.vertices {
            let r = dist(&v.position, &[0.0; 3]);
            assert!((r - 1.0).abs() <= h);
        }
    }
}
