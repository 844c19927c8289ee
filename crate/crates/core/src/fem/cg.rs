use super::{CsrMatrix, Rhs, Solution};
use crate::{par, Error, Result};

/// Relative tolerance of the compatibility check `sum(b) = 0`.
pub const COMPATIBILITY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preconditioner {
    #[default]
    Jacobi,
    SymmetricGaussSeidel,
}

impl std::str::FromStr for Preconditioner {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "jacobi" | "diagonal" => Ok(Preconditioner::Jacobi),
            "sgs" | "symmetric_gauss_seidel" => Ok(Preconditioner::SymmetricGaussSeidel),
            other => Err(format!("unknown preconditioner `{other}` (jacobi, sgs)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Relative preconditioned residual at which iteration stops.
    pub tolerance: f64,
    /// Defaults to `10 n` when unset.
    pub max_iterations: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: None,
            preconditioner: Preconditioner::Jacobi,
        }
    }
}

fn remove_mean(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let mean = par::sum(v.len(), |i| v[i]) / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

struct Precond<'a> {
    a: &'a CsrMatrix,
    inv_diag: Vec<f64>,
    kind: Preconditioner,
}

impl Precond<'_> {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self.kind {
            Preconditioner::Jacobi => {
                par::for_each_mut(z, |i, zi| *zi = r[i] * self.inv_diag[i]);
            }
            Preconditioner::SymmetricGaussSeidel => {
                // (D + L) y = r
                let n = r.len();
                for i in 0..n {
                    let (c, v) = self.a.row(i);
                    let mut s = r[i];
                    for (&j, &a) in c.iter().zip(v) {
                        if j < i {
                            s -= a * z[j];
                        }
                    }
                    z[i] = s * self.inv_diag[i];
                }
                // (D + U) z = D y
                for i in (0..n).rev() {
                    let (c, v) = self.a.row(i);
                    let mut s = 0.0;
                    for (&j, &a) in c.iter().zip(v) {
                        if j > i {
                            s += a * z[j];
                        }
                    }
                    z[i] -= s * self.inv_diag[i];
                }
            }
        }
    }
}

/// Preconditioned conjugate gradients for the singular Neumann system.
///
/// The right-hand side must satisfy `|sum(b)| <= 1e-8 ||b||`. The iterate
/// is projected onto the zero-mean subspace after every update, so the
/// returned coefficients have zero mean.
pub fn solve(a: &CsrMatrix, b: &Rhs, config: &SolverConfig) -> Result<Solution> {
    let n = a.size();
    if let Rhs::Dense(v) = b {
        if v.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: v.len(),
            });
        }
    }
    if let Rhs::Sparse(e) = b {
        if let Some(&(i, _)) = e.iter().find(|e| e.0 >= n) {
            return Err(Error::Dimension { expected: n, got: i + 1 });
        }
    }
    let norm = b.norm();
    let sum = b.sum();
    if sum.abs() > COMPATIBILITY_TOLERANCE * norm {
        return Err(Error::IncompatibleRhs { sum, norm });
    }
    if norm == 0.0 {
        return Ok(Solution {
            coefficients: vec![0.0; n],
            residual: 0.0,
            iterations: 0,
            converged: true,
        });
    }
    let mut r = b.to_dense(n);
    remove_mean(&mut r);

    let pre = Precond {
        a,
        inv_diag: a.diagonal().iter().map(|&d| 1.0 / d).collect(),
        kind: config.preconditioner,
    };
    let max_iter = config.max_iterations.unwrap_or(10 * n);
    let mut x = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut q = vec![0.0; n];
    pre.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = par::dot(&r, &z);
    let rz0 = rz;
    let mut residual = 1.0;
    let mut iterations = 0;
    while iterations < max_iter {
        a.mul_into(&p, &mut q);
        let pq = par::dot(&p, &q);
        if pq <= 0.0 {
            break;
        }
        let alpha = rz / pq;
        par::for_each_mut(&mut x, |i, xi| *xi += alpha * p[i]);
        par::for_each_mut(&mut r, |i, ri| *ri -= alpha * q[i]);
        remove_mean(&mut x);
        iterations += 1;
        pre.apply(&r, &mut z);
        let rz_new = par::dot(&r, &z);
        residual = (rz_new.max(0.0) / rz0).sqrt();
        if residual <= config.tolerance {
            rz = rz_new;
            break;
        }
        let beta = rz_new / rz;
        rz = rz_new;
        par::for_each_mut(&mut p, |i, pi| *pi = z[i] + beta * *pi);
    }
    let _ = rz;
    let solution = Solution {
        coefficients: x,
        residual,
        iterations,
        converged: residual <= config.tolerance,
    };
    if solution.converged {
        Ok(solution)
    } else {
        Err(Error::NotConverged(Box::new(solution)))
    }
}
