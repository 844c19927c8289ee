//! Discretization of the dipolar source term `div j = M . grad delta(x - x0)`
//! into right-hand-side vectors.
//!
//! A [`SourceModel`] is bound to a dipole against a volume conductor; the
//! bound model assembles the right-hand side and carries a post-processing
//! step that is applied to potentials evaluated from the FEM solution.

mod partial_integration;
mod subtraction;
mod venant;

use std::f64::consts::PI;

pub use subtraction::{singularity_gradient, singularity_potential, SubtractionParams};
pub use venant::VenantParams;

use crate::fem::Rhs;
use crate::locator::MeshIndex;
use crate::mesh::VolumeConductor;
use crate::{par, Dipole, Error, Result, Vec3};

/// Interchangeable source models with their parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceModel {
    PartialIntegration,
    Venant(VenantParams),
    Subtraction(SubtractionParams),
}

impl Default for SourceModel {
    fn default() -> Self {
        SourceModel::PartialIntegration
    }
}

impl SourceModel {
    /// Model by configuration name with default parameters.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "partial_integration" => Ok(SourceModel::PartialIntegration),
            "venant" => Ok(SourceModel::Venant(VenantParams::default())),
            "subtraction" => Ok(SourceModel::Subtraction(SubtractionParams::default())),
            "whitney" | "projected_subtraction" | "localized_subtraction" => {
                Err(Error::Unsupported(format!("source model `{name}`")))
            }
            other => Err(Error::InvalidValue {
                key: "source_model.type".into(),
                msg: format!("unknown source model `{other}`"),
            }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SourceModel::PartialIntegration => "partial_integration",
            SourceModel::Venant(_) => "venant",
            SourceModel::Subtraction(_) => "subtraction",
        }
    }

    /// Locate the dipole and prepare model-specific data.
    pub fn bind<'a>(&'a self, vc: &'a VolumeConductor, index: &'a MeshIndex, dipole: Dipole) -> Result<BoundSource<'a>> {
        if !dipole.moment.iter().all(|m| m.is_finite()) || !dipole.position.iter().all(|m| m.is_finite()) {
            return Err(Error::Invalid("dipole with non-finite components".into()));
        }
        let element = index
            .locator
            .find_element(&dipole.position)
            .element()
            .ok_or(Error::OutsideDomain(dipole.position))?;
        let data = match self {
            SourceModel::PartialIntegration => Bound::PartialIntegration,
            SourceModel::Venant(p) => Bound::Venant {
                ring: venant::one_ring(index, &dipole.position),
                params: p,
            },
            SourceModel::Subtraction(p) => {
                let sigma_inf = vc.tensor(element).as_isotropic().ok_or(Error::AnisotropicSource(element))?;
                Bound::Subtraction { sigma_inf, params: p }
            }
        };
        Ok(BoundSource {
            vc,
            dipole,
            element,
            data,
        })
    }

    /// Bind and assemble many dipoles concurrently; results keep input order.
    pub fn assemble_batch(&self, vc: &VolumeConductor, index: &MeshIndex, dipoles: &[Dipole]) -> Vec<Result<SourceModelOutput>> {
        par::map_slice(dipoles, |d| self.bind(vc, index, *d).and_then(|b| b.assemble_right_hand_side()))
    }
}

#[derive(Debug, Clone)]
enum Bound<'a> {
    PartialIntegration,
    Venant { ring: Vec<usize>, params: &'a VenantParams },
    Subtraction { sigma_inf: f64, params: &'a SubtractionParams },
}

/// A source model bound to one dipole.
#[derive(Debug, Clone)]
pub struct BoundSource<'a> {
    vc: &'a VolumeConductor,
    dipole: Dipole,
    element: usize,
    data: Bound<'a>,
}

impl BoundSource<'_> {
    pub fn dipole(&self) -> &Dipole {
        &self.dipole
    }

    /// Element containing the dipole position.
    pub fn element(&self) -> usize {
        self.element
    }

    /// Vertices carrying monopole loads (Venant only).
    pub fn support(&self) -> Option<&[usize]> {
        match &self.data {
            Bound::Venant { ring, .. } => Some(ring),
            _ => None,
        }
    }

    pub fn assemble_right_hand_side(&self) -> Result<SourceModelOutput> {
        match &self.data {
            Bound::PartialIntegration => Ok(SourceModelOutput {
                rhs: partial_integration::assemble(self.vc, self.element, &self.dipole),
                post: PostProcess::None,
            }),
            Bound::Venant { ring, params } => Ok(SourceModelOutput {
                rhs: venant::assemble(self.vc.mesh(), ring, &self.dipole, params)?,
                post: PostProcess::None,
            }),
            Bound::Subtraction { sigma_inf, params } => Ok(SourceModelOutput {
                rhs: subtraction::assemble(self.vc, &self.dipole, *sigma_inf, params),
                post: PostProcess::AddSingularity {
                    dipole: self.dipole,
                    sigma_inf: *sigma_inf,
                },
            }),
        }
    }
}

/// Correction applied to potentials sampled from the FEM solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PostProcess {
    None,
    /// Add the analytic potential of the dipole in an unbounded medium of
    /// conductivity `sigma_inf`.
    AddSingularity { dipole: Dipole, sigma_inf: f64 },
}

impl PostProcess {
    pub fn apply(&self, values: &mut [f64], points: &[Vec3]) -> Result<()> {
        if values.len() != points.len() {
            return Err(Error::Dimension {
                expected: points.len(),
                got: values.len(),
            });
        }
        if let PostProcess::AddSingularity { dipole, sigma_inf } = self {
            for (v, p) in values.iter_mut().zip(points) {
                if p == &dipole.position {
                    return Err(Error::Invalid(format!("evaluation point {p:?} coincides with the dipole")));
                }
                *v += singularity_potential(dipole, *sigma_inf, p);
            }
        }
        Ok(())
    }
}

/// Right-hand side of one dipole plus its post-processing descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceModelOutput {
    pub rhs: Rhs,
    pub post: PostProcess,
}

impl SourceModelOutput {
    /// Right-hand side ready for the singular solver. Dense vectors are
    /// projected onto the zero-sum subspace, which removes the quadrature
    /// defect of the subtraction boundary term; sparse ones are returned
    /// as they are.
    pub fn compatible_rhs(&self) -> Rhs {
        match &self.rhs {
            Rhs::Dense(v) if !v.is_empty() => {
                let mean = par::sum(v.len(), |i| v[i]) / v.len() as f64;
                Rhs::Dense(v.iter().map(|x| x - mean).collect())
            }
            other => other.clone(),
        }
    }

    pub fn post_process(&self, values: &mut [f64], points: &[Vec3]) -> Result<()> {
        self.post.apply(values, points)
    }
}

/// `1 / (4 pi)`.
pub(crate) const INV_4PI: f64 = 0.25 / PI;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::ConductivityTensor;
    use crate::synthetic;

    #[test]
    fn names_round_trip() {
        for m in [
            SourceModel::PartialIntegration,
            SourceModel::Venant(VenantParams::default()),
            SourceModel::Subtraction(SubtractionParams::default()),
        ] {
            assert_eq!(SourceModel::from_name(m.name()).unwrap(), m);
        }
        assert!(matches!(SourceModel::from_name("whitney"), Err(Error::Unsupported(_))));
        assert!(SourceModel::from_name("bogus").is_err());
    }

    #[test]
    fn outside_dipole_is_rejected() {
        let mesh = synthetic::box_tet([2, 2, 2], Vec3::zeros(), Vec3::repeat(2.0));
        let index = MeshIndex::new(&mesh);
        let vc = VolumeConductor::homogeneous(mesh, ConductivityTensor::isotropic(1.0)).unwrap();
        let d = Dipole::new(Vec3::new(5.0, 1.0, 1.0), Vec3::x());
        let err = SourceModel::PartialIntegration.bind(&vc, &index, d).unwrap_err();
        assert!(err.to_string().contains("outside-domain"));
    }

    #[test]
    fn post_process_on_axis() {
        let d = Dipole::new(Vec3::new(1.0, 2.0, 3.0), Vec3::new(0.0, 0.0, 2.5));
        let post = PostProcess::AddSingularity { dipole: d, sigma_inf: 1.0 };
        let r = 7.0;
        let mut v = vec![0.5];
        post.apply(&mut v, &[d.position + Vec3::z() * r]).unwrap();
        assert!((v[0] - 0.5 - 2.5 / (4.0 * PI * r * r)).abs() < 1e-15);
        let mut none = vec![1.0, 2.0];
        PostProcess::None.apply(&mut none, &[Vec3::zeros(), Vec3::x()]).unwrap();
        assert_eq!(none, vec![1.0, 2.0]);
        assert!(post.apply(&mut [0.0], &[d.position]).is_err());
    }

    #[test]
    fn face_dipole_binds_deterministically() {
        let mesh = synthetic::box_tet([2, 2, 2], Vec3::zeros(), Vec3::repeat(2.0));
        let index = MeshIndex::new(&mesh);
        let vc = VolumeConductor::homogeneous(mesh, ConductivityTensor::isotropic(1.0)).unwrap();
        // (1, 1, 1) is a vertex shared by many elements
        let d = Dipole::new(Vec3::repeat(1.0), Vec3::new(0.3, -0.2, 1.0));
        let a = SourceModel::PartialIntegration.bind(&vc, &index, d).unwrap();
        let b = SourceModel::PartialIntegration.bind(&vc, &index, d).unwrap();
        assert_eq!(a.element(), b.element());
        assert_eq!(a.assemble_right_hand_side().unwrap(), b.assemble_right_hand_side().unwrap());
    }
}
