//! Marching-cubes case table, generated from the cube's face structure.
//!
//! Corner `i` sits at `(i & 1, (i >> 1) & 1, (i >> 2) & 1)`. A corner is
//! inside when its value is negative. On every face the crossing edges are
//! paired so that each run of inside corners gets its own segment; this
//! separates diagonal inside corners on ambiguous faces, and since the rule
//! only looks at the face's four corners, neighboring cubes agree on shared
//! faces. Chaining the directed face segments yields closed loops that are
//! fan-triangulated, wound so normals point from inside to outside.

use std::sync::OnceLock;

pub const CORNERS: [[u8; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [1, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [0, 1, 1],
    [1, 1, 1],
];

/// Edge endpoints, lower corner first.
pub const EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [2, 3],
    [4, 5],
    [6, 7],
    [0, 2],
    [1, 3],
    [4, 6],
    [5, 7],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

/// Triangles per case as edge-index triples.
pub fn triangle_table() -> &'static [Vec<[u8; 3]>; 256] {
    static TABLE: OnceLock<[Vec<[u8; 3]>; 256]> = OnceLock::new();
    TABLE.get_or_init(|| std::array::from_fn(|case| triangulate_case(case as u8)))
}

fn edge_between(a: usize, b: usize) -> usize {
    EDGES
        .iter()
        .position(|e| (e[0] == a && e[1] == b) || (e[0] == b && e[1] == a))
        .expect("corners share an edge")
}

/// The six faces as corner cycles, counter-clockwise seen from outside.
fn faces() -> [[usize; 4]; 6] {
    let mut out = [[0usize; 4]; 6];
    let mut k = 0;
    for axis in 0..3 {
        for side in 0..2u8 {
            let (u, w) = ((axis + 1) % 3, (axis + 2) % 3);
            let corner = |cu: u8, cw: u8| {
                let mut c = [0u8; 3];
                c[axis] = side;
                c[u] = cu;
                c[w] = cw;
                CORNERS.iter().position(|x| *x == c).unwrap()
            };
            // (u, w, axis) is right-handed, so this cycle is CCW about +axis.
            let mut cyc = [corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)];
            if side == 0 {
                cyc.reverse();
            }
            out[k] = cyc;
            k += 1;
        }
    }
    out
}

fn triangulate_case(case: u8) -> Vec<[u8; 3]> {
    let inside = |c: usize| case >> c & 1 == 1;
    // next[e] = edge that follows crossing edge e in its loop.
    let mut next = [usize::MAX; 12];
    for face in faces() {
        for k in 0..4 {
            let (a, b) = (face[k], face[(k + 1) % 4]);
            // Walking CCW, the edge where we leave the inside run is joined to
            // the edge where that run was entered.
            if inside(a) && !inside(b) {
                let exit = edge_between(a, b);
                let mut j = k;
                loop {
                    let prev = face[(j + 3) % 4];
                    if !inside(prev) {
                        let entry = edge_between(prev, face[j]);
                        next[entry] = exit;
                        break;
                    }
                    j = (j + 3) % 4;
                }
            }
        }
    }

    let mut tris = Vec::new();
    let mut seen = [false; 12];
    for start in 0..12 {
        if next[start] == usize::MAX || seen[start] {
            continue;
        }
        let mut lp = vec![start];
        seen[start] = true;
        let mut e = next[start];
        while e != start {
            seen[e] = true;
            lp.push(e);
            e = next[e];
        }
        for i in 1..lp.len() - 1 {
            tris.push([lp[0] as u8, lp[i] as u8, lp[i + 1] as u8]);
        }
    }
    tris
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn midpoint(e: usize) -> Vector3<f64> {
        let [a, b] = EDGES[e];
        let p = |c: usize| Vector3::from(CORNERS[c].map(f64::from));
        (p(a) + p(b)) / 2.0
    }

    #[test]
    fn trivial_cases_are_empty() {
        assert!(triangle_table()[0].is_empty());
        assert!(triangle_table()[255].is_empty());
    }

    #[test]
    fn every_crossing_edge_is_used_and_no_other() {
        for case in 0..256usize {
            let inside = |c: usize| case >> c & 1 == 1;
            let crossing: Vec<bool> = EDGES.iter().map(|[a, b]| inside(*a) != inside(*b)).collect();
            let mut used = [false; 12];
            for t in &triangle_table()[case] {
                for &e in t {
                    used[e as usize] = true;
                }
            }
            for e in 0..12 {
                assert_eq!(used[e], crossing[e], "case {case} edge {e}");
            }
        }
    }

    #[test]
    fn single_corner_is_one_triangle() {
        for c in 0..8 {
            assert_eq!(triangle_table()[1 << c].len(), 1);
        }
    }

    #[test]
    fn surfaces_are_closed_within_the_cube() {
        // Every triangle edge interior to the cube is shared by exactly two
        // triangle sides with opposite orientation; boundary edges lie on faces.
        for case in 0..256usize {
            let mut directed = std::collections::HashMap::new();
            for t in &triangle_table()[case] {
                for k in 0..3 {
                    *directed.entry((t[k], t[(k + 1) % 3])).or_insert(0) += 1;
                }
            }
            for (&(a, b), &n) in &directed {
                assert_eq!(n, 1, "case {case} duplicated directed edge");
                let on_face = {
                    let (pa, pb) = (midpoint(a as usize), midpoint(b as usize));
                    (0..3).any(|k| {
                        (pa[k] == 0.0 && pb[k] == 0.0) || (pa[k] == 1.0 && pb[k] == 1.0)
                    })
                };
                if !on_face {
                    assert!(directed.contains_key(&(b, a)), "case {case} open edge {a}-{b}");
                }
            }
        }
    }

    #[test]
    fn normals_point_outward() {
        for case in 1..255usize {
            let inside = |c: usize| case >> c & 1 == 1;
            let cin: Vec<_> = (0..8).filter(|&c| inside(c)).collect();
            let cout: Vec<_> = (0..8).filter(|&c| !inside(c)).collect();
            let centroid = |cs: &[usize]| {
                cs.iter().map(|&c| Vector3::from(CORNERS[c].map(f64::from))).sum::<Vector3<f64>>()
                    / cs.len() as f64
            };
            let outward = centroid(&cout) - centroid(&cin);
            let mut total = Vector3::zeros();
            for t in &triangle_table()[case] {
                let [a, b, c] = t.map(|e| midpoint(e as usize));
                total += (b - a).cross(&(c - a));
            }
            // Area-weighted normal agrees with the inside→outside direction
            // whenever that direction is defined.
            if outward.norm() > 1e-9 && total.norm() > 1e-9 {
                assert!(total.dot(&outward) > 0.0, "case {case}");
            }
        }
    }
}
