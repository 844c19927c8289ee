//! Conforming finite element discretization of the Neumann Poisson problem
//! `div(sigma grad u) = f` and its iterative solution.

mod assembly;
mod cg;
mod csr;

pub use assembly::{assemble_stiffness, element_stiffness};
pub use cg::{solve, Preconditioner, SolverConfig};
pub use csr::CsrMatrix;

/// Right-hand side vector over the degrees of freedom.
#[derive(Debug, Clone, PartialEq)]
pub enum Rhs {
    /// Structurally nonzero `(dof, value)` pairs.
    Sparse(Vec<(usize, f64)>),
    Dense(Vec<f64>),
}

impl Rhs {
    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        match self {
            Rhs::Dense(v) => v.clone(),
            Rhs::Sparse(entries) => {
                let mut v = vec![0.0; n];
                for &(i, x) in entries {
                    v[i] += x;
                }
                v
            }
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, Rhs::Sparse(_))
    }

    /// Number of stored entries.
    pub fn stored_len(&self) -> usize {
        match self {
            Rhs::Sparse(e) => e.len(),
            Rhs::Dense(v) => v.len(),
        }
    }

    pub fn sum(&self) -> f64 {
        match self {
            Rhs::Sparse(e) => e.iter().map(|e| e.1).sum(),
            Rhs::Dense(v) => v.iter().sum(),
        }
    }

    pub fn norm(&self) -> f64 {
        match self {
            Rhs::Sparse(e) => e.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt(),
            Rhs::Dense(v) => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        }
    }

    /// `<self, x>` for a dense vector `x`.
    pub fn dot(&self, x: &[f64]) -> f64 {
        match self {
            Rhs::Sparse(e) => e.iter().map(|&(i, v)| v * x[i]).sum(),
            Rhs::Dense(v) => crate::par::dot(v, x),
        }
    }
}

/// Discrete potential `u_h = sum_i alpha_i phi_i` and solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub coefficients: Vec<f64>,
    /// Final relative preconditioned residual.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Assembled stiffness matrix with its solver configuration.
#[derive(Debug, Clone)]
pub struct StiffnessSystem {
    matrix: CsrMatrix,
    config: SolverConfig,
}

impl StiffnessSystem {
    pub fn new(matrix: CsrMatrix, config: SolverConfig) -> Self {
        Self { matrix, config }
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn size(&self) -> usize {
        self.matrix.size()
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn set_config(&mut self, config: SolverConfig) {
        self.config = config;
    }

    /// Solve `A alpha = b` with the stored configuration.
    pub fn solve(&self, b: &Rhs) -> crate::Result<Solution> {
        solve(&self.matrix, b, &self.config)
    }

    /// Solve with an explicit tolerance.
    pub fn solve_with_tolerance(&self, b: &Rhs, tolerance: f64) -> crate::Result<Solution> {
        let config = SolverConfig {
            tolerance,
            ..self.config.clone()
        };
        solve(&self.matrix, b, &config)
    }
}
