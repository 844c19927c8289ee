//! Finite element forward modeling for EEG and MEG.
//!
//! The crate solves the Poisson problem of bioelectromagnetism on fitted
//! tetrahedral or hexahedral volume conductors with a conforming P1/Q1
//! discretization, discretizes current dipoles with several interchangeable
//! source models, and accelerates repeated forward solutions with transfer
//! matrices. Analytic concentric-sphere solutions are included as
//! independent references.
//!
//! Units are fixed throughout: coordinates in mm, conductivities in S/m,
//! dipole moments in nA·mm. Potentials come out in µV and magnetic fields
//! in fT.

pub mod analytic;
pub mod driver;
pub mod element;
pub mod error;
pub mod fem;
pub mod io;
pub mod locator;
pub mod mesh;
pub mod meg;
pub mod par;
pub mod quadrature;
pub mod scan;
pub mod sources;
pub mod synthetic;
pub mod transfer;

pub use error::{Error, Result};

/// Cartesian 3-vector in millimetres (positions) or arbitrary units.
pub type Vec3 = nalgebra::Vector3<f64>;

/// Current dipole: a point source at `position` with moment `moment`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dipole {
    pub position: Vec3,
    pub moment: Vec3,
}

impl Dipole {
    pub fn new(position: Vec3, moment: Vec3) -> Self {
        Self { position, moment }
    }
}
