//! Transfer matrices: `T = R A^-1`, computed row by row, so that sensor
//! values for any source right-hand side `b` follow from `T b`.

mod file;
mod restriction;

use log::debug;

pub use file::{read_header, TransferHeader, MAGIC};
pub use restriction::{build_restriction, closest_on_triangle, BoundaryIndex, ElectrodeArray, DEFAULT_MAX_DISTANCE};

use crate::fem::{Rhs, StiffnessSystem};
use crate::sources::SourceModelOutput;
use crate::{par, Error, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    Eeg,
    Meg,
}

impl Modality {
    pub fn name(self) -> &'static str {
        match self {
            Modality::Eeg => "eeg",
            Modality::Meg => "meg",
        }
    }
}

impl std::str::FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "eeg" => Ok(Modality::Eeg),
            "meg" => Ok(Modality::Meg),
            other => Err(Error::InvalidValue {
                key: "modality".into(),
                msg: format!("expected eeg or meg, got `{other}`"),
            }),
        }
    }
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Dense `sensors x dofs` transfer matrix, row major.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    pub modality: Modality,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    /// Checksum of the volume conductor the matrix was computed for.
    pub checksum: [u8; 32],
    pub tolerance: f64,
}

impl TransferMatrix {
    pub fn from_rows(modality: Modality, rows: Vec<Vec<f64>>, cols: usize, checksum: [u8; 32], tolerance: f64) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Dimension {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend(r);
        }
        Ok(Self {
            modality,
            rows: n,
            cols,
            data,
            checksum,
            tolerance,
        })
    }

    pub fn sensors(&self) -> usize {
        self.rows
    }

    pub fn dofs(&self) -> usize {
        self.cols
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.cols..(k + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// `T b`. Sparse right-hand sides only touch their stored entries.
    pub fn apply(&self, b: &Rhs) -> Result<Vec<f64>> {
        match b {
            Rhs::Sparse(entries) => {
                if let Some(&(i, _)) = entries.iter().find(|e| e.0 >= self.cols) {
                    return Err(Error::Dimension {
                        expected: self.cols,
                        got: i + 1,
                    });
                }
                Ok((0..self.rows)
                    .map(|k| {
                        let row = self.row(k);
                        entries.iter().map(|&(i, v)| row[i] * v).sum()
                    })
                    .collect())
            }
            Rhs::Dense(v) => {
                if v.len() != self.cols {
                    return Err(Error::Dimension {
                        expected: self.cols,
                        got: v.len(),
                    });
                }
                Ok(par::map(self.rows, |k| self.row(k).iter().zip(v).map(|(a, b)| a * b).sum()))
            }
        }
    }

    /// Refuse use with a different volume conductor.
    pub fn check(&self, checksum: &[u8; 32], modality: Modality) -> Result<()> {
        if &self.checksum != checksum {
            return Err(Error::ChecksumMismatch);
        }
        if self.modality != modality {
            return Err(Error::Modality {
                found: self.modality.name().into(),
                wanted: modality.name().into(),
            });
        }
        Ok(())
    }

    pub fn header(&self) -> TransferHeader {
        TransferHeader {
            version: file::VERSION,
            modality: self.modality,
            rows: self.rows,
            cols: self.cols,
            checksum: self.checksum,
            tolerance: self.tolerance,
        }
    }
}

/// Subtract the mean, in place.
pub fn center(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

/// Solve `A t_k = r_k - mean(r_k)` for every sensor row, in parallel.
///
/// Rows that fail to converge are reported together with their sensor
/// index; the computation fails as a whole.
pub fn solve_rows(system: &StiffnessSystem, rows: &[Vec<f64>], tolerance: f64) -> Result<Vec<Vec<f64>>> {
    let results = par::map(rows.len(), |k| {
        let mut r = rows[k].clone();
        center(&mut r);
        system.solve_with_tolerance(&Rhs::Dense(r), tolerance)
    });
    let mut out = Vec::with_capacity(rows.len());
    let mut failed = Vec::new();
    for (k, res) in results.into_iter().enumerate() {
        match res {
            Ok(s) => {
                debug!("transfer row {k}: {} iterations", s.iterations);
                out.push(s.coefficients);
            }
            Err(e) => failed.push((k, e)),
        }
    }
    match failed.len() {
        0 => Ok(out),
        1 => {
            let (sensor, e) = failed.pop().expect("one failure");
            Err(Error::SensorRow {
                sensor,
                source: Box::new(e),
            })
        }
        _ => Err(Error::Batch(
            failed
                .into_iter()
                .map(|(k, e)| {
                    (
                        k,
                        Error::SensorRow {
                            sensor: k,
                            source: Box::new(e),
                        },
                    )
                })
                .collect(),
        )),
    }
}

/// EEG transfer matrix for the electrode restriction `electrodes`.
pub fn compute_eeg_transfer(system: &StiffnessSystem, electrodes: &ElectrodeArray, checksum: [u8; 32], tolerance: f64) -> Result<TransferMatrix> {
    let rows: Vec<Vec<f64>> = (0..electrodes.len()).map(|k| electrodes.dense_row(k)).collect();
    let solved = solve_rows(system, &rows, tolerance)?;
    TransferMatrix::from_rows(Modality::Eeg, solved, system.size(), checksum, tolerance)
}

/// EEG potentials at the electrodes: `T b`, the source model's
/// post-processing at the evaluation points, then mean-centering.
pub fn apply_eeg(transfer: &TransferMatrix, output: &SourceModelOutput, points: &[Vec3]) -> Result<Vec<f64>> {
    if transfer.modality != Modality::Eeg {
        return Err(Error::Modality {
            found: transfer.modality.name().into(),
            wanted: "eeg".into(),
        });
    }
    let mut u = transfer.apply(&output.rhs)?;
    output.post_process(&mut u, points)?;
    center(&mut u);
    Ok(u)
}
