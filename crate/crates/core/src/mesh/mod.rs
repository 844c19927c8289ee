//! Volume conductor meshes: geometry, face topology and conductivities.

mod conductivity;
mod gmsh;

use std::collections::HashMap;
use std::path::Path;

use sha2::{Digest, Sha256};

pub use conductivity::{load_conductivities, parse_conductivities, ConductivityTensor, VolumeConductor};
pub use gmsh::{parse_msh, read_msh, write_msh};

use crate::element::{self, ElementKind};
use crate::{Error, Result, Vec3};

/// Sentinel key component for triangle faces in the face map.
const NO_VERTEX: usize = usize::MAX;

/// An unstructured mesh of a single element kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    kind: ElementKind,
    vertices: Vec<Vec3>,
    /// Flat connectivity, `kind.vertex_count()` entries per element.
    cells: Vec<usize>,
    labels: Vec<i64>,
    /// Flat face neighbors, `kind.face_count()` entries per element.
    neighbors: Vec<Option<usize>>,
}

impl Mesh {
    /// Build a mesh from raw arrays, validating orientation and computing
    /// face neighbors.
    pub fn new(
        kind: ElementKind,
        vertices: Vec<Vec3>,
        cells: Vec<usize>,
        labels: Vec<i64>,
    ) -> Result<Self> {
        let nv = kind.vertex_count();
        if cells.len() % nv != 0 {
            return Err(Error::Invalid(format!(
                "connectivity length {} is not a multiple of {nv}",
                cells.len()
            )));
        }
        let ne = cells.len() / nv;
        if labels.len() != ne {
            return Err(Error::Dimension {
                expected: ne,
                got: labels.len(),
            });
        }
        if ne == 0 {
            return Err(Error::Invalid("mesh has no elements".into()));
        }
        for (e, conn) in cells.chunks_exact(nv).enumerate() {
            if let Some(&vertex) = conn.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::DanglingVertex {
                    element: e,
                    vertex,
                    count: vertices.len(),
                });
            }
        }
        let mut mesh = Mesh {
            kind,
            vertices,
            cells,
            labels,
            neighbors: Vec::new(),
        };
        for e in 0..ne {
            if !mesh.is_positively_oriented(e) {
                return Err(Error::InvertedElement(e));
            }
        }
        mesh.neighbors = mesh.build_neighbors()?;
        Ok(mesh)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_msh(path)
    }

    fn is_positively_oriented(&self, e: usize) -> bool {
        let v = self.element_vertices(e);
        match self.kind {
            ElementKind::Tetrahedron => element::tet_signed_volume(&v) > 0.0,
            ElementKind::Hexahedron => element::hex_corner_determinants(&v).iter().all(|&d| d > 0.0),
        }
    }

    fn face_key(&self, e: usize, f: usize) -> [usize; 4] {
        let conn = self.element(e);
        let local = self.kind.face(f);
        let mut key = [NO_VERTEX; 4];
        for (k, &l) in local.iter().enumerate() {
            key[k] = conn[l];
        }
        key.sort_unstable();
        key
    }

    fn build_neighbors(&self) -> Result<Vec<Option<usize>>> {
        let nf = self.kind.face_count();
        let ne = self.element_count();
        let mut neighbors = vec![None; ne * nf];
        let mut open: HashMap<[usize; 4], (usize, usize)> = HashMap::with_capacity(ne * nf / 2 + 1);
        for e in 0..ne {
            for f in 0..nf {
                let key = self.face_key(e, f);
                match open.remove(&key) {
                    Some((other, of)) => {
                        if neighbors[other * nf + of].is_some() {
                            return Err(Error::NonManifold(e));
                        }
                        neighbors[other * nf + of] = Some(e);
                        neighbors[e * nf + f] = Some(other);
                    }
                    None => {
                        open.insert(key, (e, f));
                    }
                }
            }
        }
        // A key that reappears after being matched would have been inserted
        // again as open; detect third occurrences.
        let mut seen: HashMap<[usize; 4], usize> = HashMap::with_capacity(ne * nf);
        for e in 0..ne {
            for f in 0..nf {
                let c = seen.entry(self.face_key(e, f)).or_insert(0);
                *c += 1;
                if *c > 2 {
                    return Err(Error::NonManifold(e));
                }
            }
        }
        Ok(neighbors)
    }

    pub fn kind(&self) -> ElementKind {
        self.kind
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> Vec3 {
        self.vertices[i]
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn element_count(&self) -> usize {
        self.labels.len()
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn label(&self, e: usize) -> i64 {
        self.labels[e]
    }

    /// Global vertex indices of element `e`.
    pub fn element(&self, e: usize) -> &[usize] {
        let nv = self.kind.vertex_count();
        &self.cells[e * nv..(e + 1) * nv]
    }

    pub fn element_vertices(&self, e: usize) -> Vec<Vec3> {
        self.element(e).iter().map(|&i| self.vertices[i]).collect()
    }

    /// Neighbor across local face `f` of `e`, `None` on the boundary.
    pub fn neighbor(&self, e: usize, f: usize) -> Option<usize> {
        self.neighbors[e * self.kind.face_count() + f]
    }

    pub fn neighbors(&self, e: usize) -> &[Option<usize>] {
        let nf = self.kind.face_count();
        &self.neighbors[e * nf..(e + 1) * nf]
    }

    /// Global vertex indices of local face `f` of element `e`.
    pub fn face_vertices(&self, e: usize, f: usize) -> Vec<usize> {
        let conn = self.element(e);
        self.kind.face(f).iter().map(|&l| conn[l]).collect()
    }

    /// Vertex average of element `e`.
    pub fn element_center(&self, e: usize) -> Vec3 {
        let conn = self.element(e);
        conn.iter().fold(Vec3::zeros(), |acc, &i| acc + self.vertices[i]) / conn.len() as f64
    }

    /// Largest vertex-to-vertex distance within element `e`.
    pub fn element_diameter(&self, e: usize) -> f64 {
        let v = self.element_vertices(e);
        let mut d: f64 = 0.0;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                d = d.max((v[i] - v[j]).norm());
            }
        }
        d
    }

    /// Volume of element `e` in mm³.
    ///
    /// Tetrahedra use the determinant formula; hexahedra integrate the
    /// Jacobian determinant of the trilinear map with the 2×2×2 Gauss rule,
    /// which is exact for trilinear geometry.
    pub fn element_measure(&self, e: usize) -> f64 {
        let v = self.element_vertices(e);
        match self.kind {
            ElementKind::Tetrahedron => element::tet_signed_volume(&v),
            ElementKind::Hexahedron => crate::quadrature::hexahedron(2)
                .iter()
                .map(|q| q.weight * element::hex_jacobian(&v, &q.point).determinant())
                .sum(),
        }
    }

    /// All boundary faces as `(element, local face)` pairs.
    pub fn boundary_faces(&self) -> Vec<(usize, usize)> {
        let nf = self.kind.face_count();
        (0..self.element_count())
            .flat_map(|e| (0..nf).map(move |f| (e, f)))
            .filter(|&(e, f)| self.neighbor(e, f).is_none())
            .collect()
    }

    pub fn interior_face_count(&self) -> usize {
        self.neighbors.iter().filter(|n| n.is_some()).count() / 2
    }

    /// Centroid and outward unit normal of face `f` of `e`.
    ///
    /// For quadrilaterals the normal is taken from the cross product of the
    /// diagonals, which is exact for planar faces.
    pub fn face_plane(&self, e: usize, f: usize) -> (Vec3, Vec3) {
        let fv: Vec<Vec3> = self.face_vertices(e, f).iter().map(|&i| self.vertices[i]).collect();
        let center = fv.iter().fold(Vec3::zeros(), |a, p| a + p) / fv.len() as f64;
        let mut n = if fv.len() == 3 {
            (fv[1] - fv[0]).cross(&(fv[2] - fv[0]))
        } else {
            (fv[2] - fv[0]).cross(&(fv[3] - fv[1]))
        };
        if n.dot(&(center - self.element_center(e))) < 0.0 {
            n = -n;
        }
        (center, n.normalize())
    }

    /// Vertex-to-vertex adjacency along element edges.
    pub fn vertex_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); self.vertex_count()];
        for e in 0..self.element_count() {
            let conn = self.element(e);
            match self.kind {
                ElementKind::Tetrahedron => {
                    for i in 0..4 {
                        for j in 0..4 {
                            if i != j {
                                adj[conn[i]].push(conn[j]);
                            }
                        }
                    }
                }
                ElementKind::Hexahedron => {
                    for [a, b] in element::HEX_EDGES {
                        adj[conn[a]].push(conn[b]);
                        adj[conn[b]].push(conn[a]);
                    }
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Diameter of the vertex bounding box.
    pub fn bounding_diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        (hi - lo).norm()
    }

    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// SHA-256 over geometry, connectivity and labels.
    pub fn checksum(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        self.hash_into(&mut h);
        h.finalize().into()
    }

    pub(crate) fn hash_into(&self, h: &mut Sha256) {
        h.update([self.kind.gmsh_code() as u8]);
        h.update((self.vertices.len() as u64).to_le_bytes());
        for v in &self.vertices {
            for c in v.iter() {
                h.update(c.to_le_bytes());
            }
        }
        h.update((self.cells.len() as u64).to_le_bytes());
        for &c in &self.cells {
            h.update((c as u64).to_le_bytes());
        }
        for &l in &self.labels {
            h.update(l.to_le_bytes());
        }
    }
}
