use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::Matrix3;
use sha2::{Digest, Sha256};

use super::Mesh;
use crate::{Error, Result};

/// Symmetric conductivity tensor in S/m, stored as its upper triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConductivityTensor {
    pub xx: f64,
    pub xy: f64,
    pub xz: f64,
    pub yy: f64,
    pub yz: f64,
    pub zz: f64,
}

impl ConductivityTensor {
    pub fn isotropic(sigma: f64) -> Self {
        Self::new([sigma, 0.0, 0.0, sigma, 0.0, sigma])
    }

    /// From `(xx, xy, xz, yy, yz, zz)`.
    pub fn new(c: [f64; 6]) -> Self {
        Self {
            xx: c[0],
            xy: c[1],
            xz: c[2],
            yy: c[3],
            yz: c[4],
            zz: c[5],
        }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.xx, self.xy, self.xz, //
            self.xy, self.yy, self.yz, //
            self.xz, self.yz, self.zz,
        )
    }

    /// `Some(sigma)` if the tensor is exactly `sigma * I`.
    pub fn as_isotropic(&self) -> Option<f64> {
        (self.xy == 0.0
            && self.xz == 0.0
            && self.yz == 0.0
            && self.xx == self.yy
            && self.yy == self.zz)
            .then_some(self.xx)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 3] {
        let eig = self.matrix().symmetric_eigenvalues();
        let mut e = [eig[0], eig[1], eig[2]];
        e.sort_by(f64::total_cmp);
        e
    }

    pub fn is_positive_definite(&self) -> bool {
        self.eigenvalues().iter().all(|&l| l > 0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new([
            self.xx * c,
            self.xy * c,
            self.xz * c,
            self.yy * c,
            self.yz * c,
            self.zz * c,
        ])
    }

    fn components(&self) -> [f64; 6] {
        [self.xx, self.xy, self.xz, self.yy, self.yz, self.zz]
    }
}

/// A mesh together with one conductivity tensor per element.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeConductor {
    mesh: Mesh,
    tensors: Vec<ConductivityTensor>,
}

impl VolumeConductor {
    /// Bind tensors by tissue label. Every label in the mesh must be bound.
    pub fn from_labels(mesh: Mesh, by_label: &BTreeMap<i64, ConductivityTensor>) -> Result<Self> {
        for (&label, t) in by_label {
            if !t.is_positive_definite() {
                return Err(Error::NotPositiveDefinite {
                    label,
                    eigenvalues: t.eigenvalues(),
                });
            }
        }
        let tensors = mesh
            .labels()
            .iter()
            .map(|l| by_label.get(l).copied().ok_or(Error::MissingLabel(*l)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { mesh, tensors })
    }

    /// One tensor per element, in element order.
    pub fn from_tensors(mesh: Mesh, tensors: Vec<ConductivityTensor>) -> Result<Self> {
        if tensors.len() != mesh.element_count() {
            return Err(Error::Dimension {
                expected: mesh.element_count(),
                got: tensors.len(),
            });
        }
        for (e, t) in tensors.iter().enumerate() {
            if !t.is_positive_definite() {
                return Err(Error::NotPositiveDefinite {
                    label: mesh.label(e),
                    eigenvalues: t.eigenvalues(),
                });
            }
        }
        Ok(Self { mesh, tensors })
    }

    /// Same tensor for every element.
    pub fn homogeneous(mesh: Mesh, tensor: ConductivityTensor) -> Result<Self> {
        let n = mesh.element_count();
        Self::from_tensors(mesh, vec![tensor; n])
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn tensor(&self, e: usize) -> &ConductivityTensor {
        &self.tensors[e]
    }

    pub fn tensors(&self) -> &[ConductivityTensor] {
        &self.tensors
    }

    /// Copy with every tensor multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            mesh: self.mesh.clone(),
            tensors: self.tensors.iter().map(|t| t.scaled(c)).collect(),
        }
    }

    /// SHA-256 over the mesh and all tensors; stored with transfer matrices.
    pub fn checksum(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        self.mesh.hash_into(&mut h);
        for t in &self.tensors {
            for c in t.components() {
                h.update(c.to_le_bytes());
            }
        }
        h.finalize().into()
    }
}

/// Parse a conductivity file: `label sigma` or `label xx xy xz yy yz zz`
/// per line, `#` starts a comment.
pub fn parse_conductivities(text: &str, path: &Path) -> Result<BTreeMap<i64, ConductivityTensor>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        let label: i64 = tok[0]
            .parse()
            .map_err(|_| Error::parse(path, i + 1, format!("invalid label `{}`", tok[0])))?;
        let vals = tok[1..]
            .iter()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::parse(path, i + 1, format!("invalid number `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let tensor = match vals.len() {
            1 => ConductivityTensor::isotropic(vals[0]),
            6 => ConductivityTensor::new([vals[0], vals[1], vals[2], vals[3], vals[4], vals[5]]),
            n => {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("expected 1 or 6 values after the label, found {n}"),
                ))
            }
        };
        if !tensor.is_positive_definite() {
            return Err(Error::NotPositiveDefinite {
                label,
                eigenvalues: tensor.eigenvalues(),
            });
        }
        if out.insert(label, tensor).is_some() {
            return Err(Error::parse(path, i + 1, format!("label {label} bound twice")));
        }
    }
    Ok(out)
}

/// Read a conductivity file and bind it to `mesh`.
pub fn load_conductivities(path: impl AsRef<Path>, mesh: Mesh) -> Result<VolumeConductor> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let by_label = parse_conductivities(&text, path)?;
    VolumeConductor::from_labels(mesh, &by_label)
}
