//! Delaunay triangulation of points in the unit square (Bowyer-Watson).
//!
//! Incremental insertion against a super-triangle. No point location
//! structure: every insertion scans all triangles, which is plenty fast at
//! the sizes used here. Near-degenerate configurations (cocircular or
//! collinear within tolerance) return None so the caller can resample.

/// Relative slack around in-circumcircle tests; inside the guard band the
/// configuration counts as degenerate.
const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Clone, Copy)]
struct Triangle {
    v: [usize; 3],
    // Circumcircle center and squared radius.
    cx: f64,
    cy: f64,
    r2: f64,
}

/// Edges (u < v) of the Delaunay triangulation, ascending. None when the
/// input is degenerate; callers resample. Fewer than 3 points triangulate
/// to the obvious path/point.
pub fn delaunay_edges(points: &[(f64, f64)]) -> Option<Vec<(usize, usize)>> {
    let n = points.len();
    if n < 2 {
        return Some(Vec::new());
    }
    if n == 2 {
        return Some(vec![(0, 1)]);
    }

    // Super-triangle comfortably containing the unit square. Deliberately
    // asymmetric irrational-ish coordinates: symmetric corners (e.g. at
    // x = +-50) sit cocircular with mirror-image input pairs, tripping the
    // degeneracy guard on perfectly good inputs.
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.push((-41.739482, -37.190211));
    pts.push((52.611503, -40.873055));
    pts.push((6.354917, 88.414709));
    let s0 = n;
    let s1 = n + 1;
    let s2 = n + 2;

    let mut tris = vec![circumtriangle(&pts, [s0, s1, s2])?];

    for p in 0..n {
        let (px, py) = pts[p];
        let mut bad = Vec::new();
        for (i, t) in tris.iter().enumerate() {
            let d2 = (px - t.cx).powi(2) + (py - t.cy).powi(2);
            if (d2 - t.r2).abs() <= DEGENERACY_TOL * t.r2.max(1.0) {
                // Cocircular within tolerance.
                return None;
            }
            if d2 < t.r2 {
                bad.push(i);
            }
        }
        // Boundary of the cavity: edges belonging to exactly one bad triangle.
        let mut boundary: Vec<(usize, usize)> = Vec::new();
        for &i in &bad {
            for k in 0..3 {
                let a = tris[i].v[k];
                let b = tris[i].v[(k + 1) % 3];
                let e = (a.min(b), a.max(b));
                if let Some(pos) = boundary.iter().position(|&x| x == e) {
                    boundary.swap_remove(pos);
                } else {
                    boundary.push(e);
                }
            }
        }
        for &i in bad.iter().rev() {
            tris.swap_remove(i);
        }
        for (a, b) in boundary {
            tris.push(circumtriangle(&pts, [a, b, p])?);
        }
    }

    let mut edges = Vec::new();
    let mut real_triangles = 0;
    for t in &tris {
        if t.v.iter().any(|&v| v >= n) {
            continue;
        }
        real_triangles += 1;
        for k in 0..3 {
            let a = t.v[k];
            let b = t.v[(k + 1) % 3];
            let e = (a.min(b), a.max(b));
            if !edges.contains(&e) {
                edges.push(e);
            }
        }
    }
    if real_triangles == 0 {
        // All points collinear (e.g. exactly 3 points on a line): no usable
        // triangulation.
        return None;
    }
    edges.sort_unstable();
    Some(edges)
}

fn circumtriangle(pts: &[(f64, f64)], v: [usize; 3]) -> Option<Triangle> {
    let (ax, ay) = pts[v[0]];
    let (bx, by) = pts[v[1]];
    let (cx, cy) = pts[v[2]];
    let d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
    let span = (ax - bx).abs() + (ay - by).abs() + (ax - cx).abs() + (ay - cy).abs();
    if d.abs() <= DEGENERACY_TOL * span * span.max(1.0) {
        // Collinear within tolerance.
        return None;
    }
    let a2 = ax * ax + ay * ay;
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    let ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d;
    let uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d;
    let r2 = (ax - ux).powi(2) + (ay - uy).powi(2);
    Some(Triangle { v, cx: ux, cy: uy, r2 })
}
