//! Magnetic field of the volume currents by the law of Biot-Savart.
//!
//! The flux `sigma grad u_h` is piecewise constant on tetrahedra (and taken
//! at the element center on hexahedra), `beta_K = sigma_K grad u_h|_K`. A
//! magnetometer at `y` with axis `o` sees
//!
//! ```text
//! B_s(y) . o = -mu0/4pi sum_K beta_K . (G_K(y) x o),   G_K(y) = int_K (y - x)/|y - x|^3 dx
//! ```
//!
//! and the primary field `mu0/4pi M x (y - x0)/|y - x0|^3 . o`.
//!
//! With coordinates in mm, conductivities in S/m, potentials in µV and
//! moments in nA·mm, `mu0/4pi` equals 100 fT per (nA/mm), so all fields are
//! in fT.

use crate::element::{self, ElementKind};
use crate::fem::StiffnessSystem;
use crate::locator::ElementLocator;
use crate::mesh::VolumeConductor;
use crate::transfer::{self, Modality, TransferMatrix};
use crate::{par, quadrature, Dipole, Error, Result, Vec3};

/// `mu0 / 4pi` in fT mm² / (nA mm).
pub const MU0_OVER_4PI: f64 = 100.0;

/// Magnetometer: position outside the head and unit axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coil {
    pub position: Vec3,
    pub orientation: Vec3,
}

impl Coil {
    /// Coil with the axis normalized.
    pub fn new(position: Vec3, orientation: Vec3) -> Result<Self> {
        let n = orientation.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::ZeroNorm("coil orientation"));
        }
        Ok(Self {
            position,
            orientation: orientation / n,
        })
    }
}

/// Quadrature used for the sensor integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MegParams {
    /// Tet rules by polynomial degree, hex rules by points per axis.
    pub quadrature_order: usize,
    pub include_primary: bool,
}

impl Default for MegParams {
    fn default() -> Self {
        Self {
            quadrature_order: 2,
            include_primary: true,
        }
    }
}

/// Element-wise constant flux `beta_K = sigma_K grad u_h|_K`.
pub fn project_flux(vc: &VolumeConductor, alpha: &[f64]) -> Result<Vec<Vec3>> {
    let mesh = vc.mesh();
    if alpha.len() != mesh.vertex_count() {
        return Err(Error::Dimension {
            expected: mesh.vertex_count(),
            got: alpha.len(),
        });
    }
    Ok(par::map(mesh.element_count(), |e| {
        let g = center_gradients(vc, e);
        let grad: Vec3 = mesh.element(e).iter().zip(&g).map(|(&i, gi)| gi * alpha[i]).sum();
        vc.tensor(e).matrix() * grad
    }))
}

fn center_gradients(vc: &VolumeConductor, e: usize) -> Vec<Vec3> {
    let mesh = vc.mesh();
    let v = mesh.element_vertices(e);
    element::basis_gradients_at_reference(mesh.kind(), &v, &mesh.kind().reference_center())
        .expect("valid element")
        .0
}

/// Reject coils inside or on the mesh.
pub fn check_coils(locator: &ElementLocator, coils: &[Coil]) -> Result<()> {
    for (k, c) in coils.iter().enumerate() {
        if locator.find_element(&c.position).element().is_some() {
            return Err(Error::CoilInside(k));
        }
    }
    Ok(())
}

/// `G_K(y)` for every element, with the quadrature raised for elements
/// closer to `y` than twice their diameter.
fn kernel_integrals(vc: &VolumeConductor, y: &Vec3, order: usize) -> Vec<Vec3> {
    let mesh = vc.mesh();
    let (far, near) = match mesh.kind() {
        ElementKind::Tetrahedron => (quadrature::tetrahedron(order), quadrature::tetrahedron(order.max(8))),
        ElementKind::Hexahedron => (quadrature::hexahedron(order), quadrature::hexahedron(order.max(6))),
    };
    par::map(mesh.element_count(), |e| {
        let v = mesh.element_vertices(e);
        let rule = if (mesh.element_center(e) - y).norm() < 2.0 * mesh.element_diameter(e) {
            &near
        } else {
            &far
        };
        let mut g = Vec3::zeros();
        for q in rule {
            let x = element::map_to_physical(mesh.kind(), &v, &q.point);
            let det = match mesh.kind() {
                ElementKind::Tetrahedron => 6.0 * element::tet_signed_volume(&v),
                ElementKind::Hexahedron => element::hex_jacobian(&v, &q.point).determinant(),
            };
            let d = y - x;
            let r = d.norm();
            g += d * (q.weight * det / (r * r * r));
        }
        g
    })
}

/// Sensor functional over the flux space: `s_K` with `B_s . o = sum_K beta_K . s_K`.
pub fn sensor_functional(vc: &VolumeConductor, coil: &Coil, order: usize) -> Vec<Vec3> {
    kernel_integrals(vc, &coil.position, order)
        .into_iter()
        .map(|g| -MU0_OVER_4PI * g.cross(&coil.orientation))
        .collect()
}

/// Pull a flux-space functional back to the potential coefficients:
/// `(P^t s)_i = sum_K (sigma_K s_K) . grad phi_i|_K`.
pub fn pull_back(vc: &VolumeConductor, s: &[Vec3]) -> Vec<f64> {
    let mesh = vc.mesh();
    let local = par::map(mesh.element_count(), |e| {
        let w = vc.tensor(e).matrix() * s[e];
        center_gradients(vc, e).iter().map(|g| g.dot(&w)).collect::<Vec<f64>>()
    });
    let mut out = vec![0.0; mesh.vertex_count()];
    for (e, vals) in local.into_iter().enumerate() {
        for (&i, v) in mesh.element(e).iter().zip(vals) {
            out[i] += v;
        }
    }
    out
}

/// Secondary field at every coil for the potential coefficients `alpha`.
pub fn meg_secondary(vc: &VolumeConductor, alpha: &[f64], coils: &[Coil], order: usize) -> Result<Vec<f64>> {
    let beta = project_flux(vc, alpha)?;
    Ok(coils
        .iter()
        .map(|c| {
            let s = sensor_functional(vc, c, order);
            s.iter().zip(&beta).map(|(a, b)| a.dot(b)).sum()
        })
        .collect())
}

/// Primary field `mu0/4pi M x (y - x0)/|y - x0|^3` along each coil axis.
pub fn meg_primary(dipole: &Dipole, coils: &[Coil]) -> Result<Vec<f64>> {
    coils
        .iter()
        .map(|c| {
            let d = c.position - dipole.position;
            let r = d.norm();
            if r == 0.0 {
                return Err(Error::Invalid("coil coincides with the dipole".into()));
            }
            Ok(MU0_OVER_4PI * dipole.moment.cross(&d).dot(&c.orientation) / (r * r * r))
        })
        .collect()
}

/// Pulled-back sensor rows `P^t S(y_k)`, one per coil.
pub fn sensor_rows(vc: &VolumeConductor, coils: &[Coil], order: usize) -> Vec<Vec<f64>> {
    coils.iter().map(|c| pull_back(vc, &sensor_functional(vc, c, order))).collect()
}

/// MEG transfer matrix: row `k` solves `A z_k = P^t S(y_k)` (mean-centered),
/// so that `z_k . b` is the secondary field of the source `b`.
pub fn compute_meg_transfer(
    system: &StiffnessSystem,
    vc: &VolumeConductor,
    coils: &[Coil],
    order: usize,
    tolerance: f64,
) -> Result<TransferMatrix> {
    let rows = sensor_rows(vc, coils, order);
    let solved = transfer::solve_rows(system, &rows, tolerance)?;
    TransferMatrix::from_rows(Modality::Meg, solved, system.size(), vc.checksum(), tolerance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_stiffness, Rhs, SolverConfig};
    use crate::mesh::{ConductivityTensor, Mesh};
    use crate::synthetic;
    use rand::{Rng, SeedableRng};

    fn box_vc() -> VolumeConductor {
        let mesh = synthetic::box_tet([3, 3, 3], Vec3::zeros(), Vec3::repeat(30.0));
        VolumeConductor::homogeneous(mesh, ConductivityTensor::isotropic(0.33)).unwrap()
    }

    #[test]
    fn linear_field_gives_exact_flux() {
        let mesh = synthetic::box_tet([3, 2, 2], Vec3::zeros(), Vec3::new(3.0, 2.0, 2.0));
        let vc = VolumeConductor::homogeneous(mesh, ConductivityTensor::isotropic(1.0)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let a = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let alpha: Vec<f64> = vc.mesh().vertices().iter().map(|p| a.dot(p)).collect();
            for b in project_flux(&vc, &alpha).unwrap() {
                assert!((b - a).norm() < 1e-13);
            }
        }
        let constant = vec![3.0; vc.mesh().vertex_count()];
        assert!(project_flux(&vc, &constant).unwrap().iter().all(|b| b.norm() < 1e-13));
        let alpha: Vec<f64> = vc.mesh().vertices().iter().map(|p| p.x).collect();
        let doubled = project_flux(&vc.scaled(2.0), &alpha).unwrap();
        for (x, y) in project_flux(&vc, &alpha).unwrap().iter().zip(&doubled) {
            assert!((2.0 * x - y).norm() < 1e-13);
        }
    }

    #[test]
    fn adjoint_consistency() {
        let vc = box_vc();
        let coil = Coil::new(Vec3::new(15.0, 15.0, 60.0), Vec3::new(0.2, 0.1, 1.0)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let alpha: Vec<f64> = (0..vc.mesh().vertex_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let direct = meg_secondary(&vc, &alpha, &[coil], 2).unwrap()[0];
        let pulled = pull_back(&vc, &sensor_functional(&vc, &coil, 2));
        let via: f64 = pulled.iter().zip(&alpha).map(|(a, b)| a * b).sum();
        assert!((direct - via).abs() <= 1e-12 * direct.abs());
    }

    #[test]
    fn far_coil_decays_quadratically() {
        let vc = box_vc();
        let c = Vec3::repeat(15.0);
        let dir = Vec3::new(1.0, 0.3, 0.2).normalize();
        let axis = crate::synthetic::perpendicular(&dir);
        let norm_at = |r: f64| {
            let coil = Coil::new(c + dir * r, axis).unwrap();
            sensor_functional(&vc, &coil, 2).iter().map(|s| s.norm_squared()).sum::<f64>().sqrt()
        };
        let d = vc.mesh().bounding_diameter();
        let (n1, n2) = (norm_at(10.0 * d), norm_at(100.0 * d));
        let exponent = (n1 / n2).log10();
        assert!((exponent - 2.0).abs() < 0.1, "{exponent}");
        assert!(n2 <= 1e-3 * norm_at(2.0 * d));
    }

    #[test]
    fn single_element_against_monte_carlo() {
        let mesh = Mesh::new(
            ElementKind::Tetrahedron,
            vec![Vec3::zeros(), Vec3::new(10.0, 0.0, 0.0), Vec3::new(0.0, 10.0, 0.0), Vec3::new(0.0, 0.0, 10.0)],
            vec![0, 1, 2, 3],
            vec![1],
        )
        .unwrap();
        let vc = VolumeConductor::homogeneous(mesh, ConductivityTensor::isotropic(1.0)).unwrap();
        let y = Vec3::new(20.0, 25.0, 30.0);
        let g = kernel_integrals(&vc, &y, 2)[0];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let n = 100_000;
        let mut acc = Vec3::zeros();
        let mut count = 0;
        while count < n {
            let p = Vec3::new(rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>());
            if p.sum() > 1.0 {
                continue;
            }
            let d = y - p * 10.0;
            acc += d / d.norm().powi(3);
            count += 1;
        }
        let mc = acc * (1000.0 / 6.0) / n as f64;
        assert!((g - mc).norm() <= 1e-3 * mc.norm(), "{g:?} {mc:?}");
    }

    #[test]
    fn primary_field_closed_form() {
        let d = Dipole::new(Vec3::new(1.0, 2.0, 3.0), Vec3::new(0.0, 0.0, 10.0));
        let along = Coil::new(Vec3::new(1.0, 2.0, 50.0), Vec3::x()).unwrap();
        assert_eq!(meg_primary(&d, &[along]).unwrap()[0], 0.0);
        let r = 40.0;
        let c1 = Coil::new(d.position + Vec3::x() * r, Vec3::y()).unwrap();
        let c2 = Coil::new(d.position + Vec3::x() * 2.0 * r, Vec3::y()).unwrap();
        let b = meg_primary(&d, &[c1, c2]).unwrap();
        assert!((b[0] / b[1] - 4.0).abs() < 1e-12);
        // M x r = (0,0,10) x (40,0,0) = (0, 400, 0)
        assert!((b[0] - MU0_OVER_4PI * 400.0 / r.powi(3)).abs() < 1e-12);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let m = Vec3::new(rng.gen(), rng.gen(), rng.gen());
            let x0 = Vec3::new(rng.gen(), rng.gen(), rng.gen());
            let y = Vec3::new(rng.gen::<f64>() + 5.0, rng.gen(), rng.gen());
            let o = Vec3::new(rng.gen(), rng.gen(), rng.gen()).normalize();
            let coil = Coil { position: y, orientation: o };
            let (dx, dy, dz) = (y.x - x0.x, y.y - x0.y, y.z - x0.z);
            let r3 = (dx * dx + dy * dy + dz * dz).sqrt().powi(3);
            let cx = m.y * dz - m.z * dy;
            let cy = m.z * dx - m.x * dz;
            let cz = m.x * dy - m.y * dx;
            let expected = MU0_OVER_4PI * (cx * o.x + cy * o.y + cz * o.z) / r3;
            let got = meg_primary(&Dipole::new(x0, m), &[coil]).unwrap()[0];
            assert!((got - expected).abs() <= 1e-13 * expected.abs().max(1e-300));
        }
    }

    #[test]
    fn transfer_matches_direct_secondary() {
        let mesh = synthetic::SphereMeshSpec::new(&[80.0, 90.0], 3).build();
        let labels = [(1, 0.33), (2, 0.0042)]
            .into_iter()
            .map(|(l, s)| (l, ConductivityTensor::isotropic(s)))
            .collect();
        let vc = VolumeConductor::from_labels(mesh, &labels).unwrap();
        let sys = assemble_stiffness(&vc, SolverConfig::default()).unwrap();
        let coils: Vec<Coil> = synthetic::fibonacci_sphere(5, 110.0, Vec3::zeros())
            .into_iter()
            .map(|p| Coil::new(p, synthetic::perpendicular(&p)).unwrap())
            .collect();
        let tol = 1e-11;
        let t = compute_meg_transfer(&sys, &vc, &coils, 2, tol).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let mut b: Vec<f64> = (0..sys.size()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        transfer::center(&mut b);
        let b = Rhs::Dense(b);
        let alpha = sys.solve_with_tolerance(&b, tol).unwrap().coefficients;
        let direct = meg_secondary(&vc, &alpha, &coils, 2).unwrap();
        let via = t.apply(&b).unwrap();
        let scale = direct.iter().map(|x| x.abs()).fold(0.0, f64::max);
        for (a, v) in direct.iter().zip(&via) {
            assert!((a - v).abs() <= 1e-6 * scale, "{a} {v}");
        }
        assert_eq!(t.apply(&Rhs::Sparse(vec![])).unwrap(), vec![0.0; 5]);
    }
}
