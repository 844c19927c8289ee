use std::f64::consts::PI;

use crate::{Dipole, Error, Result, Vec3};

/// Default series truncation.
pub const DEFAULT_ORDER: usize = 80;

/// Concentric shells with isotropic conductivities, innermost first.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereModel {
    pub center: Vec3,
    pub radii: Vec<f64>,
    pub conductivities: Vec<f64>,
    pub order: usize,
}

impl SphereModel {
    pub fn new(center: Vec3, radii: Vec<f64>, conductivities: Vec<f64>) -> Result<Self> {
        let m = Self {
            center,
            radii,
            conductivities,
            order: DEFAULT_ORDER,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.radii.is_empty() || self.radii.len() != self.conductivities.len() {
            return Err(Error::Invalid("sphere model needs one conductivity per radius".into()));
        }
        if self.radii[0] <= 0.0 || self.radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("sphere radii must be positive and strictly ascending".into()));
        }
        if self.conductivities.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Invalid("sphere conductivities must be positive".into()));
        }
        if self.order < 1 {
            return Err(Error::Invalid("series order must be at least 1".into()));
        }
        Ok(())
    }

    pub fn outer_radius(&self) -> f64 {
        *self.radii.last().expect("validated")
    }

    /// Surface gain per degree `g_n`, `n = 1..=order` (index 0 unused).
    ///
    /// In shell `j` the radial part is `A_j rho^n + B_j rho^(-n-1)` in radii
    /// normalized by the outer radius. Starting from the insulating outer
    /// surface, `n A_K = (n+1) B_K`, the single admissible solution is carried
    /// inward through the interfaces (continuity of potential and normal
    /// current) and scaled so that the innermost shell has `B_1 = 1`, the
    /// coefficient of the dipole's own expansion. Working with the values
    /// `a = A rho^n`, `b = B rho^(-n-1)` at each radius keeps the sweep free
    /// of cancellation.
    pub fn gains(&self) -> Vec<f64> {
        let r_out = self.outer_radius();
        let rho: Vec<f64> = self.radii.iter().map(|r| r / r_out).collect();
        let k = rho.len();
        let mut g = vec![0.0; self.order + 1];
        for (n, gn) in g.iter_mut().enumerate().skip(1) {
            let nf = n as f64;
            let (mut a, mut b) = (nf + 1.0, nf);
            for j in (0..k - 1).rev() {
                let t = rho[j] / rho[j + 1];
                a *= t.powi(n as i32);
                b *= t.powi(-(n as i32) - 1);
                let v = a + b;
                let jn = self.conductivities[j + 1] * (nf * a - (nf + 1.0) * b) / self.conductivities[j];
                a = ((nf + 1.0) * v + jn) / (2.0 * nf + 1.0);
                b = (nf * v - jn) / (2.0 * nf + 1.0);
            }
            let b1 = b * rho[0].powi(n as i32 + 1);
            *gn = (2.0 * nf + 1.0) / b1;
        }
        g
    }

    /// Potential (µV) at `electrode` on the outer surface.
    pub fn potential(&self, dipole: &Dipole, electrode: &Vec3) -> Result<f64> {
        Ok(self.potentials(dipole, std::slice::from_ref(electrode))?[0])
    }

    /// Potentials at several surface electrodes, sharing the gains.
    pub fn potentials(&self, dipole: &Dipole, electrodes: &[Vec3]) -> Result<Vec<f64>> {
        self.validate()?;
        let r_out = self.outer_radius();
        let r0 = dipole.position - self.center;
        if r0.norm() >= self.radii[0] {
            return Err(Error::Invalid("dipole must lie inside the innermost shell".into()));
        }
        let g = self.gains();
        let scale = 1.0 / (4.0 * PI * self.conductivities[0] * r_out * r_out);
        electrodes
            .iter()
            .map(|e| {
                let r = e - self.center;
                if (r.norm() - r_out).abs() > 1e-6 * r_out {
                    return Err(Error::Invalid(format!("electrode {e:?} is not on the outer sphere")));
                }
                series(&g, &r0, &r, r_out, &dipole.moment).map(|v| v * scale)
            })
            .collect()
    }
}

/// `sum_n g_n M . grad_rho0 (rho0^n P_n(cos gamma))`.
fn series(g: &[f64], r0: &Vec3, r: &Vec3, r_out: f64, m: &Vec3) -> Result<f64> {
    let order = g.len() - 1;
    let rhat = r.normalize();
    let rho0 = r0.norm() / r_out;
    if rho0 == 0.0 {
        return Ok(g[1] * m.dot(&rhat));
    }
    let r0hat = r0.normalize();
    let x = r0hat.dot(&rhat).clamp(-1.0, 1.0);
    let (mr0, mr) = (m.dot(&r0hat), m.dot(&rhat));
    // P_n and P_n' by the three-term and derivative recurrences
    let (mut p_prev, mut p) = (1.0, x);
    let (mut dp_prev, mut dp) = (0.0, 1.0);
    let mut pow = 1.0; // rho0^(n-1)
    let mut sum = 0.0;
    let mut abs_sum = 0.0;
    let mut last = 0.0;
    for n in 1..=order {
        let nf = n as f64;
        let term = g[n] * pow * ((nf * p - x * dp) * mr0 + dp * mr);
        sum += term;
        abs_sum += term.abs();
        last = term.abs();
        let p_next = ((2.0 * nf + 1.0) * x * p - nf * p_prev) / (nf + 1.0);
        let dp_next = dp_prev + (2.0 * nf + 1.0) * p;
        p_prev = p;
        p = p_next;
        dp_prev = dp;
        dp = dp_next;
        pow *= rho0;
    }
    if last > 1e-10 * abs_sum {
        return Err(Error::SeriesNotConverged { last, sum });
    }
    Ok(sum)
}
