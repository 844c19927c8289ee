//! Closed-form references for concentric spheres.

mod metrics;
mod sarvas;
mod sphere;

pub use metrics::{mag, max_relative_difference, rdm};
pub use sarvas::{sarvas_field, sarvas_meg};
pub use sphere::{SphereModel, DEFAULT_ORDER};
