//! Axis-aligned bounding-volume hierarchy over mesh triangles.

use nalgebra::{Point3, Vector3};

use super::TriMesh;

const LEAF_SIZE: usize = 4;
/// Edge and determinant slack for the triangle test. Rays grazing a shared
/// edge hit at least one of its triangles.
const EDGE_EPS: f64 = 1e-9;
/// Hits this far behind the origin still count; normalized meshes may poke
/// out of the casting sphere by rounding.
pub(crate) const BEHIND_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Ray {
    pub origin: Point3<f64>,
    pub dir: Vector3<f64>,
}

/// Möller–Trumbore with inclusive barycentric bounds.
#[inline]
pub(crate) fn intersect(ray: &Ray, tri: &[Point3<f64>; 3]) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = ray.dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-15 {
        return None;
    }
    let inv = 1.0 / det;
    let s = ray.origin - tri[0];
    let u = s.dot(&p) * inv;
    if !(-EDGE_EPS..=1.0 + EDGE_EPS).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = ray.dir.dot(&q) * inv;
    if v < -EDGE_EPS || u + v > 1.0 + EDGE_EPS {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t >= -BEHIND_EPS).then_some(t.max(0.0))
}

#[derive(Debug, Clone)]
struct Node {
    lo: Point3<f64>,
    hi: Point3<f64>,
    /// Leaf: first triangle slot. Interior: index of the right child (the
    /// left child follows the node).
    start: usize,
    count: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Bvh {
    nodes: Vec<Node>,
    tris: Vec<[Point3<f64>; 3]>,
}

impl Bvh {
    pub fn build(mesh: &TriMesh) -> Self {
        let mut tris: Vec<[Point3<f64>; 3]> =
            (0..mesh.faces().len()).map(|f| mesh.triangle(f)).collect();
        let mut nodes = Vec::with_capacity(2 * tris.len() / LEAF_SIZE + 1);
        let len = tris.len();
        build_node(&mut tris, 0, len, &mut nodes);
        Self { nodes, tris }
    }

    /// Nearest hit distance along the ray.
    pub fn nearest(&self, ray: &Ray) -> Option<f64> {
        let inv = ray.dir.map(|d| 1.0 / d);
        let mut best: Option<f64> = None;
        let mut stack = Vec::with_capacity(64);
        stack.push(0usize);
        while let Some(idx) = stack.pop() {
            let node = &self.nodes[idx];
            let Some(entry) = slab(ray, &inv, &node.lo, &node.hi) else {
                continue;
            };
            if best.is_some_and(|b| entry > b) {
                continue;
            }
            if node.count > 0 {
                for tri in &self.tris[node.start..node.start + node.count] {
                    if let Some(t) = intersect(ray, tri) {
                        best = Some(best.map_or(t, |b| b.min(t)));
                    }
                }
            } else {
                stack.push(node.start);
                stack.push(idx + 1);
            }
        }
        best
    }
}

fn build_node(
    tris: &mut [[Point3<f64>; 3]],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let slice = &tris[start..end];
    let mut lo = Point3::from(Vector3::repeat(f64::INFINITY));
    let mut hi = Point3::from(Vector3::repeat(f64::NEG_INFINITY));
    for t in slice {
        for p in t {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
    }
    // Padding keeps the box test conservative against the triangle slack.
    let pad = Vector3::repeat(1e-7 * (1.0 + (hi - lo).amax()));
    let idx = nodes.len();
    nodes.push(Node {
        lo: lo - pad,
        hi: hi + pad,
        start,
        count: end - start,
    });
    if end - start <= LEAF_SIZE {
        return idx;
    }

    let centroid = |t: &[Point3<f64>; 3]| (t[0].coords + t[1].coords + t[2].coords) / 3.0;
    let mut clo = Vector3::repeat(f64::INFINITY);
    let mut chi = Vector3::repeat(f64::NEG_INFINITY);
    for t in slice {
        let c = centroid(t);
        clo = clo.inf(&c);
        chi = chi.sup(&c);
    }
    let axis = (chi - clo).iamax();
    let mid = (end - start) / 2;
    tris[start..end]
        .select_nth_unstable_by(mid, |a, b| centroid(a)[axis].total_cmp(&centroid(b)[axis]));

    build_node(tris, start, start + mid, nodes);
    let right = build_node(tris, start + mid, end, nodes);
    nodes[idx].start = right;
    nodes[idx].count = 0;
    idx
}

/// Entry distance of the ray into the box, if it meets it in front of the
/// origin (within the behind-origin slack).
#[inline]
fn slab(ray: &Ray, inv: &Vector3<f64>, lo: &Point3<f64>, hi: &Point3<f64>) -> Option<f64> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for a in 0..3 {
        let o = ray.origin[a];
        if ray.dir[a] == 0.0 {
            if o < lo[a] || o > hi[a] {
                return None;
            }
            continue;
        }
        let ta = (lo[a] - o) * inv[a];
        let tb = (hi[a] - o) * inv[a];
        t0 = t0.max(ta.min(tb));
        t1 = t1.min(ta.max(tb));
    }
    (t0 <= t1 && t1 >= -BEHIND_EPS).then_some(t0.max(0.0))
}
