//! Normal-constrained single dipole scan.

use log::warn;

use crate::locator::MeshIndex;
use crate::mesh::VolumeConductor;
use crate::sources::SourceModel;
use crate::transfer::{self, TransferMatrix};
use crate::{par, Dipole, Error, Result, Vec3};

/// Candidate positions with unit normals.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpace {
    pub positions: Vec<Vec3>,
    pub orientations: Option<Vec<Vec3>>,
}

impl SourceSpace {
    /// Normals are normalized; zero normals are rejected.
    pub fn new(positions: Vec<Vec3>, orientations: Option<Vec<Vec3>>) -> Result<Self> {
        let orientations = match orientations {
            Some(o) => {
                if o.len() != positions.len() {
                    return Err(Error::Dimension {
                        expected: positions.len(),
                        got: o.len(),
                    });
                }
                let unit = o
                    .into_iter()
                    .map(|n| {
                        let l = n.norm();
                        if l > 0.0 && l.is_finite() {
                            Ok(n / l)
                        } else {
                            Err(Error::ZeroNorm("source space normal"))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                Some(unit)
            }
            None => None,
        };
        Ok(Self { positions, orientations })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Unit dipole at position `i` along its normal.
    pub fn dipole(&self, i: usize) -> Result<Dipole> {
        let normals = self
            .orientations
            .as_ref()
            .ok_or_else(|| Error::Invalid("a normal-constrained scan needs orientations in the source space".into()))?;
        Ok(Dipole::new(self.positions[i], normals[i]))
    }
}

/// `max(<l, m> / |l|^2, 0)`.
pub fn optimal_strength(l: &[f64], m: &[f64]) -> Result<f64> {
    if l.len() != m.len() {
        return Err(Error::Dimension {
            expected: m.len(),
            got: l.len(),
        });
    }
    let ll: f64 = l.iter().map(|x| x * x).sum();
    if ll == 0.0 {
        return Err(Error::ZeroNorm("leadfield"));
    }
    let lm: f64 = l.iter().zip(m).map(|(a, b)| a * b).sum();
    Ok((lm / ll).max(0.0))
}

/// `1 - |l s - m|^2 / |m|^2`.
pub fn gof(l: &[f64], s: f64, m: &[f64]) -> Result<f64> {
    if l.len() != m.len() {
        return Err(Error::Dimension {
            expected: m.len(),
            got: l.len(),
        });
    }
    let mm: f64 = m.iter().map(|x| x * x).sum();
    if mm == 0.0 {
        return Err(Error::ZeroNorm("measurement"));
    }
    let r: f64 = l.iter().zip(m).map(|(a, b)| (a * s - b).powi(2)).sum();
    Ok(1.0 - r / mm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanEntry {
    pub strength: f64,
    pub gof: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    /// `None` for positions outside the mesh.
    pub entries: Vec<Option<ScanEntry>>,
    pub skipped: Vec<usize>,
    pub best: usize,
}

impl ScanResult {
    pub fn best_entry(&self) -> ScanEntry {
        self.entries[self.best].expect("best position was scanned")
    }
}

/// Scan with an arbitrary leadfield; `leadfield(i)` returns the sensor
/// values of the unit dipole at position `i`. Positions whose leadfield
/// fails with `OutsideDomain` are skipped.
pub fn scan_with<F>(n: usize, m: &[f64], leadfield: F) -> Result<ScanResult>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync,
{
    if n == 0 {
        return Err(Error::Invalid("empty source space".into()));
    }
    let results = par::map(n, |i| {
        let l = match leadfield(i) {
            Ok(l) => l,
            Err(Error::OutsideDomain(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let s = optimal_strength(&l, m)?;
        Ok(Some(ScanEntry {
            strength: s,
            gof: gof(&l, s, m)?,
        }))
    });
    let entries = results.into_iter().collect::<Result<Vec<_>>>()?;
    let skipped: Vec<usize> = (0..n).filter(|&i| entries[i].is_none()).collect();
    if !skipped.is_empty() {
        warn!("{} source position(s) outside the mesh skipped: {:?}", skipped.len(), skipped);
    }
    let mut best: Option<usize> = None;
    for (i, e) in entries.iter().enumerate() {
        if let Some(e) = e {
            if best.is_none_or(|b| e.gof > entries[b].expect("scanned").gof) {
                best = Some(i);
            }
        }
    }
    let best = best.ok_or_else(|| Error::Invalid("every source position lies outside the mesh".into()))?;
    Ok(ScanResult { entries, skipped, best })
}

/// EEG scan through a transfer matrix. `points` are the electrode
/// evaluation points used by the post-processing; `m` is mean-centered
/// here as well.
pub fn dipole_scan(
    transfer: &TransferMatrix,
    vc: &VolumeConductor,
    index: &MeshIndex,
    space: &SourceSpace,
    model: &SourceModel,
    points: &[Vec3],
    m: &[f64],
) -> Result<ScanResult> {
    if m.len() != transfer.sensors() {
        return Err(Error::Dimension {
            expected: transfer.sensors(),
            got: m.len(),
        });
    }
    let mut m = m.to_vec();
    transfer::center(&mut m);
    scan_with(space.len(), &m, |i| {
        let out = model.bind(vc, index, space.dipole(i)?)?.assemble_right_hand_side()?;
        transfer::apply_eeg(transfer, &out, points)
    })
}
