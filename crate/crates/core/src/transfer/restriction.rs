use std::collections::BTreeSet;

use crate::element;
use crate::locator::{KdTree, MeshIndex};
use crate::mesh::Mesh;
use crate::{Error, Result, Vec3};

/// Default largest electrode-to-surface distance in mm.
pub const DEFAULT_MAX_DISTANCE: f64 = 20.0;

/// Boundary faces grouped by vertex, with a k-d tree over boundary vertices.
#[derive(Debug, Clone)]
pub struct BoundaryIndex {
    vertices: Vec<usize>,
    tree: KdTree,
    /// Boundary faces `(element, local face)` incident to `vertices[k]`.
    faces: Vec<Vec<(usize, usize)>>,
}

impl BoundaryIndex {
    pub fn new(mesh: &Mesh) -> Self {
        let bfaces = mesh.boundary_faces();
        let set: BTreeSet<usize> = bfaces.iter().flat_map(|&(e, f)| mesh.face_vertices(e, f)).collect();
        let vertices: Vec<usize> = set.into_iter().collect();
        let mut faces = vec![Vec::new(); vertices.len()];
        for &(e, f) in &bfaces {
            for v in mesh.face_vertices(e, f) {
                let k = vertices.binary_search(&v).expect("boundary vertex");
                faces[k].push((e, f));
            }
        }
        let tree = KdTree::new(vertices.iter().map(|&v| mesh.vertex(v)).collect());
        Self { vertices, tree, faces }
    }

    /// Closest point to `p` on the boundary faces around the boundary vertex
    /// nearest to `p`, with the owning element.
    pub fn project(&self, mesh: &Mesh, p: &Vec3) -> Option<(Vec3, usize)> {
        let k = self.tree.nearest(p)?;
        let mut best: Option<(f64, Vec3, usize)> = None;
        for &(e, f) in &self.faces[k] {
            let fv: Vec<Vec3> = mesh.face_vertices(e, f).iter().map(|&i| mesh.vertex(i)).collect();
            let mut candidates = vec![closest_on_triangle(p, &fv[0], &fv[1], &fv[2])];
            if fv.len() == 4 {
                candidates.push(closest_on_triangle(p, &fv[0], &fv[2], &fv[3]));
            }
            for c in candidates {
                let d = (c - p).norm();
                if best.as_ref().map_or(true, |b| d < b.0) {
                    best = Some((d, c, e));
                }
            }
        }
        best.map(|(_, c, e)| (c, e)).or_else(|| Some((self.tree.point(k), self.vertex_element(mesh, k))))
    }

    fn vertex_element(&self, mesh: &Mesh, k: usize) -> usize {
        let v = self.vertices[k];
        (0..mesh.element_count())
            .find(|&e| mesh.element(e).contains(&v))
            .expect("referenced vertex")
    }
}

/// Closest point on triangle `abc` to `p`.
pub fn closest_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

/// Electrodes resolved to mesh elements with their evaluation rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectrodeArray {
    pub positions: Vec<Vec3>,
    /// Points where the potential is evaluated (projections for electrodes
    /// outside the mesh).
    pub projected: Vec<Vec3>,
    pub elements: Vec<usize>,
    /// Sparse restriction rows `(dof, basis value)`; entries sum to one.
    pub rows: Vec<Vec<(usize, f64)>>,
    pub dofs: usize,
}

impl ElectrodeArray {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// `R x` for a coefficient vector.
    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|&(i, w)| w * x[i]).sum()).collect()
    }

    /// Restriction row `k` as a dense vector.
    pub fn dense_row(&self, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.dofs];
        for &(i, w) in &self.rows[k] {
            v[i] += w;
        }
        v
    }
}

fn basis_at(mesh: &Mesh, e: usize, p: &Vec3) -> Option<Vec<f64>> {
    let v = mesh.element_vertices(e);
    element::basis_values(mesh.kind(), &v, p)
}

/// Resolve electrodes: points inside the mesh are evaluated where they are,
/// others are projected onto the boundary faces around the nearest boundary
/// vertex.
pub fn build_restriction(mesh: &Mesh, index: &MeshIndex, electrodes: &[Vec3], max_distance: f64) -> Result<ElectrodeArray> {
    let boundary = BoundaryIndex::new(mesh);
    let mut far = Vec::new();
    let mut out = ElectrodeArray {
        positions: electrodes.to_vec(),
        projected: Vec::with_capacity(electrodes.len()),
        elements: Vec::with_capacity(electrodes.len()),
        rows: Vec::with_capacity(electrodes.len()),
        dofs: mesh.vertex_count(),
    };
    for (k, p) in electrodes.iter().enumerate() {
        let (q, e) = match index.locator.find_element(p).element() {
            Some(e) => (*p, e),
            None => {
                let (q, e) = boundary.project(mesh, p).ok_or(Error::Invalid("mesh without boundary".into()))?;
                let d = (q - p).norm();
                if d > max_distance {
                    far.push((k, d));
                }
                (q, e)
            }
        };
        let values = basis_at(mesh, e, &q).unwrap_or_else(|| {
            // Newton failed on a distorted hex; evaluate at the nearest corner
            let conn = mesh.element(e);
            let nearest = (0..conn.len())
                .min_by(|&a, &b| (mesh.vertex(conn[a]) - q).norm().total_cmp(&(mesh.vertex(conn[b]) - q).norm()))
                .unwrap_or(0);
            (0..conn.len()).map(|i| if i == nearest { 1.0 } else { 0.0 }).collect()
        });
        let row = mesh
            .element(e)
            .iter()
            .zip(values)
            .filter(|(_, w)| *w != 0.0)
            .map(|(&i, w)| (i, w))
            .collect();
        out.projected.push(q);
        out.elements.push(e);
        out.rows.push(row);
    }
    if !far.is_empty() {
        return Err(Error::ElectrodesTooFar(far));
    }
    Ok(out)
}
