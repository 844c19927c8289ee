use nalgebra::{DMatrix, DVector};

use crate::fem::Rhs;
use crate::locator::MeshIndex;
use crate::mesh::Mesh;
use crate::{Dipole, Error, Result, Vec3};

/// Parameters of the multipolar Venant loads.
#[derive(Debug, Clone, PartialEq)]
pub struct VenantParams {
    /// Length scale of the moment rows in mm.
    pub reference_length: f64,
    /// Tikhonov weight on the loads.
    pub regularization: f64,
}

impl Default for VenantParams {
    fn default() -> Self {
        Self {
            reference_length: 20.0,
            regularization: 1e-6,
        }
    }
}

/// Vertex nearest to `p` together with its edge neighbors, ascending.
pub(super) fn one_ring(index: &MeshIndex, p: &Vec3) -> Vec<usize> {
    let c = index.nearest_vertex(p);
    let mut ring = index.adjacency[c].clone();
    ring.push(c);
    ring.sort_unstable();
    ring.dedup();
    ring
}

/// Moment matrix: row `3 o + c` holds `(d_c / aref)^o` per vertex for moment
/// order `o` in 0..3 and axis `c`.
pub(crate) fn moment_matrix(points: &[Vec3], x0: &Vec3, aref: f64) -> DMatrix<f64> {
    DMatrix::from_fn(9, points.len(), |row, j| {
        let (o, c) = (row / 3, row % 3);
        ((points[j][c] - x0[c]) / aref).powi(o as i32)
    })
}

pub(crate) fn moment_target(moment: &Vec3, aref: f64) -> DVector<f64> {
    DVector::from_fn(9, |row, _| if row / 3 == 1 { moment[row % 3] / aref } else { 0.0 })
}

/// Loads on `ring` minimizing `|X q - t|^2 + lambda |q|^2`.
///
/// With 9 moment rows and typically more vertices, the problem is solved
/// through the 9x9 system `(X X^T + lambda I) y = t`, `q = X^T y`. The
/// loads are finally shifted to zero sum.
pub(super) fn assemble(mesh: &Mesh, ring: &[usize], dipole: &Dipole, params: &VenantParams) -> Result<Rhs> {
    if dipole.moment == Vec3::zeros() {
        return Ok(Rhs::Sparse(Vec::new()));
    }
    let points: Vec<Vec3> = ring.iter().map(|&i| mesh.vertex(i)).collect();
    let x = moment_matrix(&points, &dipole.position, params.reference_length);
    let t = moment_target(&dipole.moment, params.reference_length);
    let mut g = &x * x.transpose();
    for i in 0..9 {
        g[(i, i)] += params.regularization;
    }
    let y = g.cholesky().ok_or(Error::Singular)?.solve(&t);
    let mut q = x.transpose() * y;
    // The regularization leaks about lambda into the zeroth moment; remove
    // it so the loads are exactly compatible with the Neumann problem.
    let mean = q.mean();
    q.add_scalar_mut(-mean);
    Ok(Rhs::Sparse(ring.iter().copied().zip(q.iter().copied()).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{ConductivityTensor, VolumeConductor};
    use crate::sources::SourceModel;
    use crate::synthetic;

    /// Primal normal equations `(X^T X + lambda I) q = X^T t`.
    fn primal(points: &[Vec3], x0: &Vec3, m: &Vec3, p: &VenantParams) -> DVector<f64> {
        let x = moment_matrix(points, x0, p.reference_length);
        let t = moment_target(m, p.reference_length);
        let mut n = x.transpose() * &x;
        for i in 0..points.len() {
            n[(i, i)] += p.regularization;
        }
        n.lu().solve(&(x.transpose() * t)).unwrap()
    }

    #[test]
    fn mirrored_neighborhood_gives_antisymmetric_loads() {
        // hex one-ring of the origin is symmetric about x = 0
        let mesh = synthetic::box_hex([4, 4, 4], Vec3::repeat(-2.0), Vec3::repeat(2.0));
        let index = MeshIndex::new(&mesh);
        let vc = VolumeConductor::homogeneous(mesh, ConductivityTensor::isotropic(1.0)).unwrap();
        let p = VenantParams::default();
        let model = SourceModel::Venant(p.clone());
        let d = Dipole::new(Vec3::new(0.0, 0.2, 0.1), Vec3::new(2.0, 0.0, 0.0));
        let bound = model.bind(&vc, &index, d).unwrap();
        let ring = bound.support().unwrap().to_vec();
        assert_eq!(ring.len(), 7);
        let Rhs::Sparse(entries) = bound.assemble_right_hand_side().unwrap().rhs else { panic!("sparse expected") };
        let pts: Vec<Vec3> = ring.iter().map(|&i| vc.mesh().vertex(i)).collect();
        let q = primal(&pts, &d.position, &d.moment, &p);
        let qmax = q.amax();
        for (k, pk) in pts.iter().enumerate() {
            assert!((entries[k].1 - q[k]).abs() <= 1e-10 * qmax);
            let mirror = pts.iter().position(|o| (o - Vec3::new(-pk.x, pk.y, pk.z)).norm() < 1e-12).unwrap();
            assert!((q[k] + q[mirror]).abs() <= 1e-10 * qmax);
        }
        let first: Vec3 = pts.iter().zip(q.iter()).map(|(x, w)| (x - d.position) * *w).sum();
        assert!((first - d.moment).norm() < 1e-3 * d.moment.norm());
    }

    #[test]
    fn sphere_mesh_loads_match_primal_oracle() {
        let mesh = synthetic::SphereMeshSpec::new(&[80.0, 90.0], 4).build();
        let index = MeshIndex::new(&mesh);
        let vc = VolumeConductor::homogeneous(mesh, ConductivityTensor::isotropic(0.33)).unwrap();
        let p = VenantParams::default();
        let model = SourceModel::Venant(p.clone());
        let d = Dipole::new(Vec3::new(10.0, -23.0, 31.0), Vec3::new(1.0, 2.0, -0.5));
        let bound = model.bind(&vc, &index, d).unwrap();
        let ring = bound.support().unwrap().to_vec();
        let out = bound.assemble_right_hand_side().unwrap();
        let pts: Vec<Vec3> = ring.iter().map(|&i| vc.mesh().vertex(i)).collect();
        let q = primal(&pts, &d.position, &d.moment, &p);
        let Rhs::Sparse(entries) = &out.rhs else { panic!("sparse expected") };
        // the primal normal matrix has condition ~1e8, which bounds the
        // agreement of the two routes
        for ((i, v), (j, w)) in entries.iter().zip(ring.iter().zip(q.iter())) {
            assert_eq!(i, j);
            assert!((v - w).abs() <= 1e-6 * q.amax(), "{v} {w}");
        }
        assert!(out.rhs.sum().abs() <= 1e-8 * out.rhs.norm());
        let zero = model.bind(&vc, &index, Dipole::new(d.position, Vec3::zeros())).unwrap();
        assert_eq!(zero.assemble_right_hand_side().unwrap().rhs, Rhs::Sparse(vec![]));
    }
}
