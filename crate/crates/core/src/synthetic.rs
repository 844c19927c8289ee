//! Programmatic test geometries: structured boxes, concentric-sphere tet
//! meshes and sensor layouts. Used by the test suites, the benches and the
//! fixture example; not a general mesh generator.

use std::f64::consts::{FRAC_PI_4, PI};

use crate::element::{tet_signed_volume, ElementKind};
use crate::mesh::Mesh;
use crate::Vec3;

fn grid_index(dims: [usize; 3], i: usize, j: usize, k: usize) -> usize {
    (k * (dims[1] + 1) + j) * (dims[0] + 1) + i
}

fn box_vertices(dims: [usize; 3], lo: Vec3, hi: Vec3) -> Vec<Vec3> {
    let mut v = Vec::with_capacity((dims[0] + 1) * (dims[1] + 1) * (dims[2] + 1));
    let coord = |lo: f64, hi: f64, i: usize, n: usize| {
        if i == n {
            hi
        } else {
            lo + (hi - lo) * i as f64 / n as f64
        }
    };
    for k in 0..=dims[2] {
        for j in 0..=dims[1] {
            for i in 0..=dims[0] {
                v.push(Vec3::new(
                    coord(lo.x, hi.x, i, dims[0]),
                    coord(lo.y, hi.y, j, dims[1]),
                    coord(lo.z, hi.z, k, dims[2]),
                ));
            }
        }
    }
    v
}

/// Corner indices of grid cell `(i, j, k)` in Gmsh hexahedron order.
fn cell_corners(dims: [usize; 3], i: usize, j: usize, k: usize) -> [usize; 8] {
    let g = |di, dj, dk| grid_index(dims, i + di, j + dj, k + dk);
    [
        g(0, 0, 0),
        g(1, 0, 0),
        g(1, 1, 0),
        g(0, 1, 0),
        g(0, 0, 1),
        g(1, 0, 1),
        g(1, 1, 1),
        g(0, 1, 1),
    ]
}

/// Axis-aligned box split into `dims` trilinear hexahedra, label 1.
pub fn box_hex(dims: [usize; 3], lo: Vec3, hi: Vec3) -> Mesh {
    let vertices = box_vertices(dims, lo, hi);
    let mut cells = Vec::with_capacity(8 * dims.iter().product::<usize>());
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                cells.extend_from_slice(&cell_corners(dims, i, j, k));
            }
        }
    }
    let n = cells.len() / 8;
    Mesh::new(ElementKind::Hexahedron, vertices, cells, vec![1; n]).expect("valid box mesh")
}

/// Kuhn subdivision of a hexahedral cell (Gmsh corner order) into six
/// tetrahedra sharing the 0-6 diagonal.
fn kuhn_tets(c: &[usize; 8]) -> [[usize; 4]; 6] {
    // Corner by bit pattern (x | y << 1 | z << 2).
    let by_bits = [c[0], c[1], c[3], c[2], c[4], c[5], c[7], c[6]];
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    perms.map(|p| {
        let b1 = 1 << p[0];
        let b2 = b1 | (1 << p[1]);
        [by_bits[0], by_bits[b1], by_bits[b2], by_bits[7]]
    })
}

fn push_oriented(cells: &mut Vec<usize>, vertices: &[Vec3], mut t: [usize; 4]) {
    let v = [vertices[t[0]], vertices[t[1]], vertices[t[2]], vertices[t[3]]];
    if tet_signed_volume(&v) < 0.0 {
        t.swap(1, 2);
    }
    cells.extend_from_slice(&t);
}

/// Axis-aligned box split into `6 * dims` tetrahedra, label 1.
pub fn box_tet(dims: [usize; 3], lo: Vec3, hi: Vec3) -> Mesh {
    let vertices = box_vertices(dims, lo, hi);
    let mut cells = Vec::with_capacity(24 * dims.iter().product::<usize>());
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                for t in kuhn_tets(&cell_corners(dims, i, j, k)) {
                    push_oriented(&mut cells, &vertices, t);
                }
            }
        }
    }
    let n = cells.len() / 4;
    Mesh::new(ElementKind::Tetrahedron, vertices, cells, vec![1; n]).expect("valid box mesh")
}

/// Concentric-sphere tetrahedral mesh.
///
/// A `2n × 2n × 2n` Kuhn-triangulated cube is mapped onto the ball: every
/// cube shell `max(|i|, |j|, |k|) = l` lands on a sphere, with equiangular
/// spacing along the shell. Shell radii are distributed over the layers so
/// that each interface radius is hit exactly. Element labels are `1..=layers`
/// from the inside out. The mesh has `48 n³` elements.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereMeshSpec {
    pub center: Vec3,
    /// Outer radius of each layer, ascending.
    pub radii: Vec<f64>,
    /// Number of cube shells from the center to the outer surface.
    pub shells: usize,
}

impl SphereMeshSpec {
    pub fn new(radii: &[f64], shells: usize) -> Self {
        Self {
            center: Vec3::zeros(),
            radii: radii.to_vec(),
            shells,
        }
    }

    /// Number of shells per layer: proportional to thickness, at least one.
    pub fn shells_per_layer(&self) -> Vec<usize> {
        let nl = self.radii.len();
        assert!(self.shells >= nl, "need at least one shell per layer");
        let outer = *self.radii.last().expect("at least one layer");
        let thick: Vec<f64> = (0..nl)
            .map(|k| self.radii[k] - if k == 0 { 0.0 } else { self.radii[k - 1] })
            .collect();
        let raw: Vec<f64> = thick.iter().map(|t| self.shells as f64 * t / outer).collect();
        let mut count: Vec<usize> = raw.iter().map(|r| (r.floor() as usize).max(1)).collect();
        while count.iter().sum::<usize>() > self.shells {
            // take from the layer that is most over-served
            let k = (0..nl)
                .filter(|&k| count[k] > 1)
                .max_by(|&a, &b| (count[a] as f64 - raw[a]).total_cmp(&(count[b] as f64 - raw[b])))
                .expect("reducible layer");
            count[k] -= 1;
        }
        while count.iter().sum::<usize>() < self.shells {
            let k = (0..nl)
                .max_by(|&a, &b| (raw[a] - count[a] as f64).total_cmp(&(raw[b] - count[b] as f64)))
                .expect("non-empty");
            count[k] += 1;
        }
        count
    }

    /// Radius of every shell `0..=shells` and the layer label of the cells
    /// just inside it.
    fn shell_radii(&self) -> (Vec<f64>, Vec<i64>) {
        let counts = self.shells_per_layer();
        let mut radii = vec![0.0];
        let mut labels = vec![0];
        for (k, &m) in counts.iter().enumerate() {
            let r0 = if k == 0 { 0.0 } else { self.radii[k - 1] };
            let r1 = self.radii[k];
            for j in 1..=m {
                radii.push(if j == m { r1 } else { r0 + (r1 - r0) * j as f64 / m as f64 });
                labels.push(k as i64 + 1);
            }
        }
        (radii, labels)
    }

    pub fn build(&self) -> Mesh {
        let n = self.shells as i64;
        let side = 2 * self.shells;
        let dims = [side, side, side];
        let (shell_r, shell_label) = self.shell_radii();
        let mut vertices = Vec::with_capacity((side + 1).pow(3));
        for k in -n..=n {
            for j in -n..=n {
                for i in -n..=n {
                    let level = i.abs().max(j.abs()).max(k.abs());
                    if level == 0 {
                        vertices.push(self.center);
                        continue;
                    }
                    let l = level as f64;
                    let d = Vec3::new(
                        (FRAC_PI_4 * i as f64 / l).tan(),
                        (FRAC_PI_4 * j as f64 / l).tan(),
                        (FRAC_PI_4 * k as f64 / l).tan(),
                    );
                    vertices.push(self.center + d.normalize() * shell_r[level as usize]);
                }
            }
        }
        let mut cells = Vec::with_capacity(24 * side.pow(3));
        let mut labels = Vec::with_capacity(6 * side.pow(3));
        for k in 0..side {
            for j in 0..side {
                for i in 0..side {
                    let level = [i, j, k]
                        .iter()
                        .map(|&c| (c as i64 - n).abs().max((c as i64 + 1 - n).abs()))
                        .max()
                        .unwrap_or(0) as usize;
                    for t in kuhn_tets(&cell_corners(dims, i, j, k)) {
                        push_oriented(&mut cells, &vertices, t);
                        labels.push(shell_label[level]);
                    }
                }
            }
        }
        Mesh::new(ElementKind::Tetrahedron, vertices, cells, labels).expect("valid sphere mesh")
    }
}

/// Roughly uniform points on a sphere (Fibonacci lattice).
pub fn fibonacci_sphere(n: usize, radius: f64, center: Vec3) -> Vec<Vec3> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            center + Vec3::new(r * phi.cos(), r * phi.sin(), z) * radius
        })
        .collect()
}

/// Unit vector perpendicular to `v` (any of them, deterministic).
pub fn perpendicular(v: &Vec3) -> Vec3 {
    let a = if v.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    v.cross(&a).normalize()
}
