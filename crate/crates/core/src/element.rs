//! Reference elements: P1 tetrahedra and Q1 (trilinear) hexahedra.
//!
//! Local vertex numbering follows Gmsh. The reference tetrahedron is
//! `(0,0,0), (1,0,0), (0,1,0), (0,0,1)`; the reference hexahedron is the
//! unit cube with vertices
//! `(0,0,0), (1,0,0), (1,1,0), (0,1,0), (0,0,1), (1,0,1), (1,1,1), (0,1,1)`.

use nalgebra::Matrix3;

use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    Tetrahedron,
    Hexahedron,
}

/// Local vertex lists of the tetrahedron faces; face `i` is opposite vertex `i`.
pub const TET_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]];

/// Local vertex lists of the hexahedron faces, each in cyclic order.
pub const HEX_FACES: [[usize; 4]; 6] = [
    [0, 3, 2, 1],
    [4, 5, 6, 7],
    [0, 1, 5, 4],
    [1, 2, 6, 5],
    [2, 3, 7, 6],
    [3, 0, 4, 7],
];

/// Edges of the hexahedron as local vertex pairs.
pub const HEX_EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [2, 3],
    [3, 0],
    [4, 5],
    [5, 6],
    [6, 7],
    [7, 4],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

const HEX_CORNERS: [[f64; 3]; 8] = [
    [0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [1.0, 1.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [1.0, 0.0, 1.0],
    [1.0, 1.0, 1.0],
    [0.0, 1.0, 1.0],
];

impl ElementKind {
    pub fn vertex_count(self) -> usize {
        match self {
            ElementKind::Tetrahedron => 4,
            ElementKind::Hexahedron => 8,
        }
    }

    pub fn face_count(self) -> usize {
        match self {
            ElementKind::Tetrahedron => 4,
            ElementKind::Hexahedron => 6,
        }
    }

    /// Local vertices of face `f`.
    pub fn face(self, f: usize) -> &'static [usize] {
        match self {
            ElementKind::Tetrahedron => &TET_FACES[f],
            ElementKind::Hexahedron => &HEX_FACES[f],
        }
    }

    /// Gmsh element type code.
    pub fn gmsh_code(self) -> u32 {
        match self {
            ElementKind::Tetrahedron => 4,
            ElementKind::Hexahedron => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ElementKind::Tetrahedron => "tetrahedron",
            ElementKind::Hexahedron => "hexahedron",
        }
    }

    /// Reference-element barycenter.
    pub fn reference_center(self) -> Vec3 {
        match self {
            ElementKind::Tetrahedron => Vec3::new(0.25, 0.25, 0.25),
            ElementKind::Hexahedron => Vec3::new(0.5, 0.5, 0.5),
        }
    }
}

/// Barycentric coordinates of `p` in the tetrahedron `v`.
pub fn tet_barycentric(v: &[Vec3], p: &Vec3) -> Option<[f64; 4]> {
    let j = Matrix3::from_columns(&[v[1] - v[0], v[2] - v[0], v[3] - v[0]]);
    let inv = j.try_inverse()?;
    let l = inv * (p - v[0]);
    Some([1.0 - l.x - l.y - l.z, l.x, l.y, l.z])
}

/// Signed volume of a tetrahedron (positive for Gmsh orientation).
pub fn tet_signed_volume(v: &[Vec3]) -> f64 {
    (v[1] - v[0]).cross(&(v[2] - v[0])).dot(&(v[3] - v[0])) / 6.0
}

/// Gradients of the four P1 basis functions; constant on the element.
pub fn tet_gradients(v: &[Vec3]) -> Option<[Vec3; 4]> {
    let j = Matrix3::from_columns(&[v[1] - v[0], v[2] - v[0], v[3] - v[0]]);
    // Rows of J^-1 are the gradients of the barycentric coordinates 1..3.
    let inv = j.try_inverse()?;
    let g1 = inv.row(0).transpose();
    let g2 = inv.row(1).transpose();
    let g3 = inv.row(2).transpose();
    Some([-(g1 + g2 + g3), g1, g2, g3])
}

/// Q1 shape functions at reference point `xi`.
pub fn hex_shape(xi: &Vec3) -> [f64; 8] {
    let mut out = [0.0; 8];
    for (a, c) in HEX_CORNERS.iter().enumerate() {
        let fx = if c[0] == 1.0 { xi.x } else { 1.0 - xi.x };
        let fy = if c[1] == 1.0 { xi.y } else { 1.0 - xi.y };
        let fz = if c[2] == 1.0 { xi.z } else { 1.0 - xi.z };
        out[a] = fx * fy * fz;
    }
    out
}

/// Reference gradients of the Q1 shape functions.
pub fn hex_shape_gradients(xi: &Vec3) -> [Vec3; 8] {
    let mut out = [Vec3::zeros(); 8];
    for (a, c) in HEX_CORNERS.iter().enumerate() {
        let (fx, dx) = if c[0] == 1.0 { (xi.x, 1.0) } else { (1.0 - xi.x, -1.0) };
        let (fy, dy) = if c[1] == 1.0 { (xi.y, 1.0) } else { (1.0 - xi.y, -1.0) };
        let (fz, dz) = if c[2] == 1.0 { (xi.z, 1.0) } else { (1.0 - xi.z, -1.0) };
        out[a] = Vec3::new(dx * fy * fz, fx * dy * fz, fx * fy * dz);
    }
    out
}

/// Jacobian `d x / d xi` of the trilinear map; columns are the derivatives.
pub fn hex_jacobian(v: &[Vec3], xi: &Vec3) -> Matrix3<f64> {
    let dn = hex_shape_gradients(xi);
    let mut j = Matrix3::zeros();
    for a in 0..8 {
        j += v[a] * dn[a].transpose();
    }
    j
}

pub fn hex_map(v: &[Vec3], xi: &Vec3) -> Vec3 {
    let n = hex_shape(xi);
    (0..8).fold(Vec3::zeros(), |acc, a| acc + v[a] * n[a])
}

/// Physical gradients of the Q1 basis at reference point `xi` and the
/// Jacobian determinant there.
pub fn hex_gradients(v: &[Vec3], xi: &Vec3) -> Option<([Vec3; 8], f64)> {
    let j = hex_jacobian(v, xi);
    let det = j.determinant();
    let jinv_t = j.try_inverse()?.transpose();
    let dn = hex_shape_gradients(xi);
    let mut out = [Vec3::zeros(); 8];
    for a in 0..8 {
        out[a] = jinv_t * dn[a];
    }
    Some((out, det))
}

/// Jacobian determinants at the eight corners.
pub fn hex_corner_determinants(v: &[Vec3]) -> [f64; 8] {
    let mut out = [0.0; 8];
    for (a, c) in HEX_CORNERS.iter().enumerate() {
        out[a] = hex_jacobian(v, &Vec3::new(c[0], c[1], c[2])).determinant();
    }
    out
}

/// Invert the trilinear map by Newton iteration.
pub fn hex_local_coordinates(v: &[Vec3], p: &Vec3) -> Option<Vec3> {
    let mut xi = Vec3::new(0.5, 0.5, 0.5);
    let scale = (v[6] - v[0]).norm().max(f64::MIN_POSITIVE);
    for _ in 0..50 {
        let r = hex_map(v, &xi) - p;
        if r.norm() <= 1e-14 * scale {
            return Some(xi);
        }
        let j = hex_jacobian(v, &xi);
        let step = j.try_inverse()? * r;
        xi -= step;
        if step.norm() < 1e-15 {
            return Some(xi);
        }
    }
    let r = hex_map(v, &xi) - p;
    (r.norm() <= 1e-9 * scale).then_some(xi)
}

/// Physical point from reference coordinates for either element kind.
pub fn map_to_physical(kind: ElementKind, v: &[Vec3], xi: &Vec3) -> Vec3 {
    match kind {
        ElementKind::Tetrahedron => v[0] + (v[1] - v[0]) * xi.x + (v[2] - v[0]) * xi.y + (v[3] - v[0]) * xi.z,
        ElementKind::Hexahedron => hex_map(v, xi),
    }
}

/// Basis values at physical point `p` (assumed inside or near the element).
pub fn basis_values(kind: ElementKind, v: &[Vec3], p: &Vec3) -> Option<Vec<f64>> {
    match kind {
        ElementKind::Tetrahedron => tet_barycentric(v, p).map(|b| b.to_vec()),
        ElementKind::Hexahedron => hex_local_coordinates(v, p).map(|xi| hex_shape(&xi).to_vec()),
    }
}

/// Physical basis gradients at `p`.
pub fn basis_gradients(kind: ElementKind, v: &[Vec3], p: &Vec3) -> Option<Vec<Vec3>> {
    match kind {
        ElementKind::Tetrahedron => tet_gradients(v).map(|g| g.to_vec()),
        ElementKind::Hexahedron => {
            let xi = hex_local_coordinates(v, p)?;
            hex_gradients(v, &xi).map(|(g, _)| g.to_vec())
        }
    }
}

/// Physical basis gradients at reference point `xi`, with `|det J|` there.
pub fn basis_gradients_at_reference(
    kind: ElementKind,
    v: &[Vec3],
    xi: &Vec3,
) -> Option<(Vec<Vec3>, f64)> {
    match kind {
        ElementKind::Tetrahedron => {
            let g = tet_gradients(v)?;
            Some((g.to_vec(), 6.0 * tet_signed_volume(v)))
        }
        ElementKind::Hexahedron => hex_gradients(v, xi).map(|(g, d)| (g.to_vec(), d)),
    }
}

/// Basis values at reference point `xi`.
pub fn basis_values_at_reference(kind: ElementKind, xi: &Vec3) -> Vec<f64> {
    match kind {
        ElementKind::Tetrahedron => vec![1.0 - xi.x - xi.y - xi.z, xi.x, xi.y, xi.z],
        ElementKind::Hexahedron => hex_shape(xi).to_vec(),
    }
}
