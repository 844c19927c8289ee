use nalgebra::Matrix3;

use super::INV_4PI;
use crate::element::{self, ElementKind};
use crate::fem::Rhs;
use crate::mesh::{ConductivityTensor, VolumeConductor};
use crate::{par, quadrature, Dipole, Vec3};

/// Quadrature settings of the subtraction right-hand side. Simplex rules
/// are selected by polynomial degree, tensor rules by points per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SubtractionParams {
    pub volume_order: usize,
    pub surface_order: usize,
}

impl Default for SubtractionParams {
    fn default() -> Self {
        Self {
            volume_order: 2,
            surface_order: 2,
        }
    }
}

/// Potential of `dipole` in an unbounded medium of conductivity `sigma`.
pub fn singularity_potential(dipole: &Dipole, sigma: f64, x: &Vec3) -> f64 {
    let d = x - dipole.position;
    let r = d.norm();
    INV_4PI * dipole.moment.dot(&d) / (sigma * r * r * r)
}

/// Gradient of [`singularity_potential`] with respect to `x`.
pub fn singularity_gradient(dipole: &Dipole, sigma: f64, x: &Vec3) -> Vec3 {
    let d = x - dipole.position;
    let r2 = d.norm_squared();
    let r = r2.sqrt();
    let r3 = r2 * r;
    let r5 = r3 * r2;
    (dipole.moment / r3 - d * (3.0 * dipole.moment.dot(&d) / r5)) * (INV_4PI / sigma)
}

enum Piece {
    Volume(usize),
    Face(usize, usize),
}

/// `b_i = -int (sigma - sigma_inf I) grad u_inf . grad phi_i
///        - int_boundary sigma_inf (grad u_inf . n) phi_i`.
pub(super) fn assemble(vc: &VolumeConductor, dipole: &Dipole, sigma_inf: f64, params: &SubtractionParams) -> Rhs {
    let mesh = vc.mesh();
    let n = mesh.vertex_count();
    if dipole.moment == Vec3::zeros() {
        return Rhs::Dense(vec![0.0; n]);
    }
    let reference = ConductivityTensor::isotropic(sigma_inf);
    let mut pieces: Vec<Piece> = (0..mesh.element_count())
        .filter(|&e| *vc.tensor(e) != reference)
        .map(Piece::Volume)
        .collect();
    pieces.extend(mesh.boundary_faces().into_iter().map(|(e, f)| Piece::Face(e, f)));

    let volume_rule = match mesh.kind() {
        ElementKind::Tetrahedron => quadrature::tetrahedron(params.volume_order),
        ElementKind::Hexahedron => quadrature::hexahedron(params.volume_order),
    };
    let face_rule = match mesh.kind() {
        ElementKind::Tetrahedron => quadrature::triangle(params.surface_order),
        ElementKind::Hexahedron => quadrature::quadrilateral(params.surface_order),
    };

    let local = par::map_slice(&pieces, |piece| match *piece {
        Piece::Volume(e) => {
            let v = mesh.element_vertices(e);
            let delta = vc.tensor(e).matrix() - Matrix3::identity() * sigma_inf;
            let mut out = vec![0.0; v.len()];
            for q in &volume_rule {
                let x = element::map_to_physical(mesh.kind(), &v, &q.point);
                let (g, det) = element::basis_gradients_at_reference(mesh.kind(), &v, &q.point).expect("valid element");
                let flux = delta * singularity_gradient(dipole, sigma_inf, &x) * (q.weight * det);
                for (o, gi) in out.iter_mut().zip(&g) {
                    *o -= flux.dot(gi);
                }
            }
            (mesh.element(e).to_vec(), out)
        }
        Piece::Face(e, f) => {
            let idx = mesh.face_vertices(e, f);
            let p: Vec<Vec3> = idx.iter().map(|&i| mesh.vertex(i)).collect();
            let (_, outward) = mesh.face_plane(e, f);
            let mut out = vec![0.0; p.len()];
            for q in &face_rule {
                let (s, t) = (q.point.x, q.point.y);
                let (x, area_normal, phi) = if p.len() == 3 {
                    let a = (p[1] - p[0]).cross(&(p[2] - p[0]));
                    (p[0] + (p[1] - p[0]) * s + (p[2] - p[0]) * t, a, vec![1.0 - s - t, s, t])
                } else {
                    let ds = (p[1] - p[0]) * (1.0 - t) + (p[2] - p[3]) * t;
                    let dt = (p[3] - p[0]) * (1.0 - s) + (p[2] - p[1]) * s;
                    let x = p[0] * ((1.0 - s) * (1.0 - t)) + p[1] * (s * (1.0 - t)) + p[2] * (s * t) + p[3] * ((1.0 - s) * t);
                    let phi = vec![(1.0 - s) * (1.0 - t), s * (1.0 - t), s * t, (1.0 - s) * t];
                    (x, ds.cross(&dt), phi)
                };
                let area_normal = if area_normal.dot(&outward) < 0.0 { -area_normal } else { area_normal };
                let flux = sigma_inf * singularity_gradient(dipole, sigma_inf, &x).dot(&area_normal) * q.weight;
                for (o, ph) in out.iter_mut().zip(&phi) {
                    *o -= flux * ph;
                }
            }
            (idx, out)
        }
    });
    let mut b = vec![0.0; n];
    for (idx, vals) in local {
        for (i, v) in idx.into_iter().zip(vals) {
            b[i] += v;
        }
    }
    Rhs::Dense(b)
}
