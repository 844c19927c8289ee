use crate::meg::{Coil, MU0_OVER_4PI};
use crate::{Dipole, Error, Result, Vec3};

/// Full magnetic field (fT) of a dipole in any spherically symmetric
/// conductor centered at `center`, at an exterior point.
pub fn sarvas_field(center: &Vec3, dipole: &Dipole, point: &Vec3) -> Result<Vec3> {
    let r = point - center;
    let r0 = dipole.position - center;
    let a_vec = r - r0;
    let a = a_vec.norm();
    let rn = r.norm();
    if a == 0.0 || rn == 0.0 {
        return Err(Error::Singular);
    }
    let ar = a_vec.dot(&r);
    let f = a * (rn * a + rn * rn - r0.dot(&r));
    if f.abs() < f64::EPSILON * rn.powi(3) {
        return Err(Error::Singular);
    }
    let grad_f = r * (a * a / rn + ar / a + 2.0 * a + 2.0 * rn) - r0 * (a + 2.0 * rn + ar / a);
    let qr0 = dipole.moment.cross(&r0);
    Ok((qr0 * f - grad_f * qr0.dot(&r)) * (MU0_OVER_4PI / (f * f)))
}

/// Field components along each coil axis.
pub fn sarvas_meg(center: &Vec3, dipole: &Dipole, coils: &[Coil]) -> Result<Vec<f64>> {
    coils
        .iter()
        .map(|c| sarvas_field(center, dipole, &c.position).map(|b| b.dot(&c.orientation)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meg::meg_primary;

    fn dipole() -> Dipole {
        Dipole::new(Vec3::new(10.0, -20.0, 35.0), Vec3::new(0.3, 1.0, -0.4))
    }

    #[test]
    fn radial_dipole_is_silent() {
        let p = Vec3::new(10.0, -20.0, 35.0);
        let d = Dipole::new(p, p * 0.7);
        for q in [Vec3::new(0.0, 0.0, 110.0), Vec3::new(80.0, 60.0, 40.0)] {
            assert!(sarvas_field(&Vec3::zeros(), &d, &q).unwrap().norm() < 1e-14);
        }
    }

    #[test]
    fn radial_component_is_primary() {
        let d = dipole();
        for q in [Vec3::new(0.0, 0.0, 110.0), Vec3::new(-70.0, 60.0, 40.0), Vec3::new(5.0, 100.0, -30.0)] {
            let coil = Coil::new(q, q).unwrap();
            let s = sarvas_meg(&Vec3::zeros(), &d, &[coil]).unwrap()[0];
            let p = meg_primary(&d, &[coil]).unwrap()[0];
            assert!((s - p).abs() <= 1e-10 * p.abs(), "{s} {p}");
        }
    }

    #[test]
    fn divergence_and_curl_free_outside() {
        let d = dipole();
        let x = Vec3::new(40.0, 70.0, 60.0);
        let h = 1e-3;
        let mut jac = [[0.0; 3]; 3];
        for j in 0..3 {
            let mut e = Vec3::zeros();
            e[j] = h;
            let fp = sarvas_field(&Vec3::zeros(), &d, &(x + e)).unwrap();
            let fm = sarvas_field(&Vec3::zeros(), &d, &(x - e)).unwrap();
            for i in 0..3 {
                jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let scale = sarvas_field(&Vec3::zeros(), &d, &x).unwrap().norm() / x.norm();
        let div = jac[0][0] + jac[1][1] + jac[2][2];
        assert!(div.abs() < 1e-6 * scale);
        for (i, j) in [(0, 1), (1, 2), (0, 2)] {
            assert!((jac[i][j] - jac[j][i]).abs() < 1e-6 * scale);
        }
    }

    #[test]
    fn translation_and_linearity() {
        let d = dipole();
        let c = Vec3::new(3.0, -4.0, 8.0);
        let q = Vec3::new(20.0, 90.0, 50.0);
        let a = sarvas_field(&Vec3::zeros(), &d, &q).unwrap();
        let shifted = Dipole::new(d.position + c, d.moment);
        let b = sarvas_field(&c, &shifted, &(q + c)).unwrap();
        assert!((a - b).norm() < 1e-12 * a.norm());
        let twice = Dipole::new(d.position, d.moment * 2.0);
        assert!((sarvas_field(&Vec3::zeros(), &twice, &q).unwrap() - a * 2.0).norm() < 1e-12 * a.norm());
    }

    #[test]
    fn decays_like_a_dipole() {
        let d = dipole();
        let dir = Vec3::new(0.2, 0.9, 0.3).normalize();
        let b1 = sarvas_field(&Vec3::zeros(), &d, &(dir * 1e4)).unwrap().norm();
        let b2 = sarvas_field(&Vec3::zeros(), &d, &(dir * 2e4)).unwrap().norm();
        assert!((b1 / b2 - 8.0).abs() < 0.05);
    }
}
