//! Quadrature rules on the reference elements.
//!
//! Reference simplices are the unit simplices (`x, y, z >= 0`, `x + y + z <= 1`);
//! reference cubes are `[0, 1]^d`. Weights sum to the reference measure.

use crate::Vec3;

/// A quadrature point in reference coordinates with its weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub point: Vec3,
    pub weight: f64,
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one point");
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Tricomi's initial guess, refined by Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push(((1.0 - x) / 2.0, w / 2.0));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tensor Gauss rule on the unit cube with `n` points per direction.
pub fn hexahedron(n: usize) -> Vec<QuadPoint> {
    let g = gauss_legendre(n);
    let mut out = Vec::with_capacity(n * n * n);
    for &(z, wz) in &g {
        for &(y, wy) in &g {
            for &(x, wx) in &g {
                out.push(QuadPoint {
                    point: Vec3::new(x, y, z),
                    weight: wx * wy * wz,
                });
            }
        }
    }
    out
}

/// Tensor Gauss rule on the unit square (z = 0) with `n` points per direction.
pub fn quadrilateral(n: usize) -> Vec<QuadPoint> {
    let g = gauss_legendre(n);
    let mut out = Vec::with_capacity(n * n);
    for &(y, wy) in &g {
        for &(x, wx) in &g {
            out.push(QuadPoint {
                point: Vec3::new(x, y, 0.0),
                weight: wx * wy,
            });
        }
    }
    out
}

/// Rule on the unit tetrahedron exact for polynomials of degree `order`.
///
/// Orders 1 and 2 use the classical 1- and 4-point rules; higher orders use
/// a collapsed (Duffy) Gauss product rule.
pub fn tetrahedron(order: usize) -> Vec<QuadPoint> {
    match order {
        0 | 1 => vec![QuadPoint {
            point: Vec3::new(0.25, 0.25, 0.25),
            weight: 1.0 / 6.0,
        }],
        2 => {
            let a = 0.585_410_196_624_968_5;
            let b = 0.138_196_601_125_010_5;
            [
                Vec3::new(b, b, b),
                Vec3::new(a, b, b),
                Vec3::new(b, a, b),
                Vec3::new(b, b, a),
            ]
            .into_iter()
            .map(|point| QuadPoint {
                point,
                weight: 1.0 / 24.0,
            })
            .collect()
        }
        _ => collapsed_tetrahedron(order / 2 + 2),
    }
}

/// Rule on the unit triangle (z = 0) exact for polynomials of degree `order`.
pub fn triangle(order: usize) -> Vec<QuadPoint> {
    match order {
        0 | 1 => vec![QuadPoint {
            point: Vec3::new(1.0 / 3.0, 1.0 / 3.0, 0.0),
            weight: 0.5,
        }],
        2 => [
            Vec3::new(1.0 / 6.0, 1.0 / 6.0, 0.0),
            Vec3::new(2.0 / 3.0, 1.0 / 6.0, 0.0),
            Vec3::new(1.0 / 6.0, 2.0 / 3.0, 0.0),
        ]
        .into_iter()
        .map(|point| QuadPoint {
            point,
            weight: 1.0 / 6.0,
        })
        .collect(),
        _ => collapsed_triangle(order / 2 + 2),
    }
}

fn collapsed_tetrahedron(n: usize) -> Vec<QuadPoint> {
    let g = gauss_legendre(n);
    let mut out = Vec::with_capacity(n * n * n);
    for &(u, wu) in &g {
        for &(v, wv) in &g {
            for &(w, ww) in &g {
                let x = u;
                let y = v * (1.0 - u);
                let z = w * (1.0 - u) * (1.0 - v);
                let jac = (1.0 - u) * (1.0 - u) * (1.0 - v);
                out.push(QuadPoint {
                    point: Vec3::new(x, y, z),
                    weight: wu * wv * ww * jac,
                });
            }
        }
    }
    out
}

fn collapsed_triangle(n: usize) -> Vec<QuadPoint> {
    let g = gauss_legendre(n);
    let mut out = Vec::with_capacity(n * n);
    for &(u, wu) in &g {
        for &(v, wv) in &g {
            out.push(QuadPoint {
                point: Vec3::new(u, v * (1.0 - u), 0.0),
                weight: wu * wv * (1.0 - u),
            });
        }
    }
    out
}
