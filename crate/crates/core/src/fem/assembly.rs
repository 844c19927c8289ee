use nalgebra::DMatrix;

use super::{CsrMatrix, SolverConfig, StiffnessSystem};
use crate::element::{self, ElementKind};
use crate::mesh::VolumeConductor;
use crate::{par, quadrature, Error, Result};

/// Element stiffness matrix `K_ij = int_K (sigma grad phi_i) . grad phi_j`.
///
/// Only the upper triangle is computed; the lower one is mirrored so the
/// result is exactly symmetric. Hexahedra use an `order^3` Gauss rule.
pub fn element_stiffness(vc: &VolumeConductor, e: usize, hex_order: usize) -> Result<DMatrix<f64>> {
    let mesh = vc.mesh();
    let v = mesh.element_vertices(e);
    let sigma = vc.tensor(e).matrix();
    let nv = v.len();
    let mut k = DMatrix::zeros(nv, nv);
    match mesh.kind() {
        ElementKind::Tetrahedron => {
            let vol = element::tet_signed_volume(&v);
            if vol <= 0.0 {
                return Err(Error::InvertedElement(e));
            }
            let g = element::tet_gradients(&v).ok_or(Error::InvertedElement(e))?;
            for i in 0..4 {
                let sg = sigma * g[i];
                for j in i..4 {
                    k[(i, j)] = vol * sg.dot(&g[j]);
                }
            }
        }
        ElementKind::Hexahedron => {
            for q in quadrature::hexahedron(hex_order) {
                let (g, det) = element::hex_gradients(&v, &q.point).ok_or(Error::InvertedElement(e))?;
                if det <= 0.0 {
                    return Err(Error::InvertedElement(e));
                }
                let w = q.weight * det;
                for i in 0..8 {
                    let sg = sigma * g[i];
                    for j in i..8 {
                        k[(i, j)] += w * sg.dot(&g[j]);
                    }
                }
            }
        }
    }
    for i in 0..nv {
        for j in 0..i {
            k[(i, j)] = k[(j, i)];
        }
    }
    Ok(k)
}

/// Assemble the global stiffness matrix (homogeneous Neumann conditions:
/// the boundary term is absent).
///
/// Element matrices are computed in parallel and scattered in element
/// order, so the result is bitwise identical for any thread count.
pub fn assemble_stiffness(vc: &VolumeConductor, config: SolverConfig) -> Result<StiffnessSystem> {
    let mesh = vc.mesh();
    let mut pattern = mesh.vertex_adjacency();
    if mesh.kind() == ElementKind::Hexahedron {
        // Q1 couples all vertices of an element, not just edge neighbors.
        pattern = vec![Vec::new(); mesh.vertex_count()];
        for e in 0..mesh.element_count() {
            let conn = mesh.element(e);
            for &a in conn {
                pattern[a].extend_from_slice(conn);
            }
        }
    }
    for (i, row) in pattern.iter_mut().enumerate() {
        row.push(i);
        row.sort_unstable();
        row.dedup();
    }
    let mut a = CsrMatrix::from_pattern(pattern);
    let locals = par::map(mesh.element_count(), |e| element_stiffness(vc, e, 2));
    for (e, local) in locals.into_iter().enumerate() {
        let local = local?;
        let conn = mesh.element(e);
        let nv = conn.len();
        for i in 0..nv {
            a.add(conn[i], conn[i], local[(i, i)]);
            for j in i + 1..nv {
                let kij = local[(i, j)];
                a.add(conn[i], conn[j], kij);
                a.add(conn[j], conn[i], kij);
            }
        }
    }
    Ok(StiffnessSystem::new(a, config))
}
