//! Configuration-driven facade: one object owns the volume conductor, the
//! element locator and the lazily assembled stiffness matrix, and runs
//! forward solves, transfer matrices and scans on top of them.

mod config;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;

use log::info;

pub use config::Config;

use crate::analytic::{self, SphereModel};
use crate::element::ElementKind;
use crate::fem::{assemble_stiffness, Preconditioner, SolverConfig, StiffnessSystem};
use crate::locator::MeshIndex;
use crate::meg::{self, Coil, MegParams};
use crate::mesh::{load_conductivities, Mesh, VolumeConductor};
use crate::scan::{self, ScanResult, SourceSpace};
use crate::sources::{SourceModel, SourceModelOutput, SubtractionParams, VenantParams};
use crate::transfer::{self, build_restriction, ElectrodeArray, Modality, TransferMatrix, DEFAULT_MAX_DISTANCE};
use crate::{Dipole, Error, Result, Vec3};

/// Sensor set of either modality.
#[derive(Debug, Clone, PartialEq)]
pub enum Sensors {
    Electrodes(Vec<Vec3>),
    Coils(Vec<Coil>),
}

impl Sensors {
    pub fn modality(&self) -> Modality {
        match self {
            Sensors::Electrodes(_) => Modality::Eeg,
            Sensors::Coils(_) => Modality::Meg,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Sensors::Electrodes(e) => e.len(),
            Sensors::Coils(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Agreement of one numerical forward solution with the sphere series.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereComparison {
    pub numerical: Vec<f64>,
    pub analytic: Vec<f64>,
    pub rdm: f64,
    pub mag: f64,
}

#[derive(Debug)]
pub struct Driver {
    config: Config,
    vc: VolumeConductor,
    index: MeshIndex,
    checksum: [u8; 32],
    source_model: SourceModel,
    solver: SolverConfig,
    meg: MegParams,
    transfer_tolerance: f64,
    max_distance: f64,
    stiffness: OnceLock<StiffnessSystem>,
    assemblies: AtomicUsize,
}

fn check_choice(config: &Config, key: &str, supported: &str, reserved: &[&str]) -> Result<()> {
    match config.get(key) {
        None => Ok(()),
        Some(v) if v == supported => Ok(()),
        Some(v) if reserved.contains(&v) => Err(Error::Unsupported(format!("{key} `{v}`"))),
        Some(v) => Err(Error::InvalidValue {
            key: key.into(),
            msg: format!("expected `{supported}`, got `{v}`"),
        }),
    }
}

/// Source model named by `source_model.type` with its sub-keys.
pub fn source_model_from_config(config: &Config) -> Result<SourceModel> {
    let name = config.get("source_model.type").unwrap_or("partial_integration");
    Ok(match SourceModel::from_name(name)? {
        SourceModel::Venant(d) => SourceModel::Venant(VenantParams {
            reference_length: config.parse_or("source_model.reference_length", d.reference_length)?,
            regularization: config.parse_or("source_model.regularization", d.regularization)?,
        }),
        SourceModel::Subtraction(d) => SourceModel::Subtraction(SubtractionParams {
            volume_order: config.parse_or("source_model.volume_order", d.volume_order)?,
            surface_order: config.parse_or("source_model.surface_order", d.surface_order)?,
        }),
        m => m,
    })
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidValue {
            key: key.into(),
            msg: format!("must be positive, got {v}"),
        })
    }
}

/// Sphere model from the `sphere.*` keys.
pub fn sphere_from_config(config: &Config) -> Result<SphereModel> {
    let radii = config.list("sphere.radii")?.ok_or_else(|| Error::MissingKey("sphere.radii".into()))?;
    let sigma = config
        .list("sphere.conductivities")?
        .ok_or_else(|| Error::MissingKey("sphere.conductivities".into()))?;
    let center = match config.list("sphere.center")? {
        None => Vec3::zeros(),
        Some(c) if c.len() == 3 => Vec3::new(c[0], c[1], c[2]),
        Some(_) => {
            return Err(Error::InvalidValue {
                key: "sphere.center".into(),
                msg: "expected three coordinates".into(),
            })
        }
    };
    let order = config.parse_or("sphere.order", analytic::DEFAULT_ORDER)?;
    let model = SphereModel {
        center,
        radii,
        conductivities: sigma,
        order,
    };
    model.validate().map_err(|e| Error::InvalidValue {
        key: "sphere".into(),
        msg: e.to_string(),
    })?;
    Ok(model)
}

impl Driver {
    /// Load mesh and tensors named in `config`. Nothing is solved yet.
    pub fn new(config: Config) -> Result<Self> {
        config.require("type")?;
        config.require("solver_type")?;
        let grid = config.path("volume_conductor.grid.filename")?;
        let tensors = config.path("volume_conductor.tensors.filename")?;
        check_choice(&config, "type", "fitted", &["unfitted", "cutfem", "udg"])?;
        check_choice(&config, "solver_type", "cg", &["dg", "udg", "cutfem"])?;
        let mesh = Mesh::load(&grid)?;
        let vc = load_conductivities(&tensors, mesh)?;
        info!("loaded {} elements, {} vertices", vc.mesh().element_count(), vc.mesh().vertex_count());
        Self::from_parts(vc, config)
    }

    /// Driver around an existing volume conductor; file keys are not needed.
    pub fn from_parts(vc: VolumeConductor, config: Config) -> Result<Self> {
        config.unknown_keys();
        check_choice(&config, "type", "fitted", &["unfitted", "cutfem", "udg"])?;
        check_choice(&config, "solver_type", "cg", &["dg", "udg", "cutfem"])?;
        if let Some(kind) = config.get("element_type") {
            let want = match kind {
                "tetrahedron" => ElementKind::Tetrahedron,
                "hexahedron" => ElementKind::Hexahedron,
                other => {
                    return Err(Error::InvalidValue {
                        key: "element_type".into(),
                        msg: format!("expected tetrahedron or hexahedron, got `{other}`"),
                    })
                }
            };
            if want != vc.mesh().kind() {
                return Err(Error::InvalidValue {
                    key: "element_type".into(),
                    msg: format!("`{kind}` does not match the mesh elements"),
                });
            }
        }
        let preconditioner = match config.get("solver.preconditioner") {
            None => Preconditioner::Jacobi,
            Some(p) => p.parse().map_err(|msg| Error::InvalidValue {
                key: "solver.preconditioner".into(),
                msg,
            })?,
        };
        let solver = SolverConfig {
            tolerance: positive("solver.tolerance", config.parse_or("solver.tolerance", SolverConfig::default().tolerance)?)?,
            max_iterations: config.parse_opt("solver.max_iterations")?,
            preconditioner,
        };
        let transfer_tolerance = positive("transfer.tolerance", config.parse_or("transfer.tolerance", solver.tolerance)?)?;
        let max_distance = positive("electrodes.max_distance", config.parse_or("electrodes.max_distance", DEFAULT_MAX_DISTANCE)?)?;
        let meg = MegParams {
            quadrature_order: config.parse_or("meg.quadrature_order", MegParams::default().quadrature_order)?,
            include_primary: config.bool_or("meg.include_primary", true)?,
        };
        let source_model = source_model_from_config(&config)?;
        let index = MeshIndex::new(vc.mesh());
        let checksum = vc.checksum();
        Ok(Self {
            config,
            vc,
            index,
            checksum,
            source_model,
            solver,
            meg,
            transfer_tolerance,
            max_distance,
            stiffness: OnceLock::new(),
            assemblies: AtomicUsize::new(0),
        })
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn volume_conductor(&self) -> &VolumeConductor {
        &self.vc
    }

    pub fn index(&self) -> &MeshIndex {
        &self.index
    }

    /// Checksum of the volume conductor (mesh and tensors).
    pub fn checksum(&self) -> [u8; 32] {
        self.checksum
    }

    pub fn source_model(&self) -> &SourceModel {
        &self.source_model
    }

    /// Switch the source model; the stiffness matrix and any transfer
    /// matrices stay valid.
    pub fn set_source_model(&mut self, model: SourceModel) {
        self.source_model = model;
    }

    pub fn solver_config(&self) -> &SolverConfig {
        &self.solver
    }

    pub fn transfer_tolerance(&self) -> f64 {
        self.transfer_tolerance
    }

    pub fn set_transfer_tolerance(&mut self, tolerance: f64) {
        self.transfer_tolerance = tolerance;
    }

    pub fn meg_params(&self) -> &MegParams {
        &self.meg
    }

    /// Number of stiffness assemblies performed so far (at most one).
    pub fn assembly_count(&self) -> usize {
        self.assemblies.load(Ordering::Relaxed)
    }

    pub fn stiffness(&self) -> Result<&StiffnessSystem> {
        if let Some(s) = self.stiffness.get() {
            return Ok(s);
        }
        let s = assemble_stiffness(&self.vc, self.solver.clone())?;
        self.assemblies.fetch_add(1, Ordering::Relaxed);
        info!("assembled stiffness matrix: {} dofs, {} nonzeros", s.size(), s.matrix().nnz());
        let _ = self.stiffness.set(s);
        Ok(self.stiffness.get().expect("just set"))
    }

    fn verify_unchanged(&self) {
        debug_assert_eq!(self.vc.checksum(), self.checksum, "volume conductor was mutated");
    }

    pub fn electrodes(&self, positions: &[Vec3]) -> Result<ElectrodeArray> {
        build_restriction(self.vc.mesh(), &self.index, positions, self.max_distance)
    }

    pub fn right_hand_side(&self, dipole: Dipole) -> Result<SourceModelOutput> {
        self.source_model.bind(&self.vc, &self.index, dipole)?.assemble_right_hand_side()
    }

    fn batch<T: Send>(&self, dipoles: &[Dipole], f: impl Fn(&Dipole) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
        let results = crate::par::map_slice(dipoles, f);
        let mut out = Vec::with_capacity(dipoles.len());
        let mut failed = Vec::new();
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Ok(v) => out.push(v),
                Err(e) => failed.push((i, e)),
            }
        }
        self.verify_unchanged();
        if failed.is_empty() {
            Ok(out)
        } else {
            Err(Error::Batch(failed))
        }
    }

    /// Coefficients of the FEM solution for one dipole.
    pub fn solve_potential(&self, dipole: Dipole) -> Result<(Vec<f64>, SourceModelOutput)> {
        let system = self.stiffness()?;
        let out = self.right_hand_side(dipole)?;
        let sol = system.solve(&out.compatible_rhs())?;
        Ok((sol.coefficients, out))
    }

    /// Direct EEG path: one solve per dipole, restricted to the electrodes,
    /// post-processed and mean-centered. Rows follow `dipoles`.
    pub fn solve_eeg(&self, dipoles: &[Dipole], electrodes: &ElectrodeArray) -> Result<Vec<Vec<f64>>> {
        self.stiffness()?;
        self.batch(dipoles, |d| {
            let (u, out) = self.solve_potential(*d)?;
            let mut v = electrodes.evaluate(&u);
            out.post_process(&mut v, &electrodes.projected)?;
            transfer::center(&mut v);
            Ok(v)
        })
    }

    fn check_meg_model(&self) -> Result<()> {
        if matches!(self.source_model, SourceModel::Subtraction(_)) {
            return Err(Error::Unsupported("MEG with the subtraction source model".into()));
        }
        Ok(())
    }

    fn meg_total(&self, d: &Dipole, coils: &[Coil], mut secondary: Vec<f64>) -> Result<Vec<f64>> {
        if self.meg.include_primary {
            for (s, p) in secondary.iter_mut().zip(meg::meg_primary(d, coils)?) {
                *s += p;
            }
        }
        Ok(secondary)
    }

    /// Direct MEG path: secondary field of the FEM solution plus, unless
    /// disabled, the primary field.
    pub fn solve_meg(&self, dipoles: &[Dipole], coils: &[Coil]) -> Result<Vec<Vec<f64>>> {
        self.check_meg_model()?;
        meg::check_coils(&self.index.locator, coils)?;
        self.stiffness()?;
        self.batch(dipoles, |d| {
            let (u, _) = self.solve_potential(*d)?;
            let b = meg::meg_secondary(&self.vc, &u, coils, self.meg.quadrature_order)?;
            self.meg_total(d, coils, b)
        })
    }

    pub fn compute_transfer(&self, sensors: &Sensors) -> Result<TransferMatrix> {
        let system = self.stiffness()?;
        let t = match sensors {
            Sensors::Electrodes(e) => {
                let array = self.electrodes(e)?;
                transfer::compute_eeg_transfer(system, &array, self.checksum, self.transfer_tolerance)?
            }
            Sensors::Coils(c) => {
                meg::check_coils(&self.index.locator, c)?;
                meg::compute_meg_transfer(system, &self.vc, c, self.meg.quadrature_order, self.transfer_tolerance)?
            }
        };
        self.verify_unchanged();
        Ok(t)
    }

    fn check_transfer(&self, t: &TransferMatrix, sensors: &Sensors) -> Result<()> {
        t.check(&self.checksum, sensors.modality())?;
        if t.sensors() != sensors.len() {
            return Err(Error::Dimension {
                expected: t.sensors(),
                got: sensors.len(),
            });
        }
        Ok(())
    }

    /// Transfer path: sensor values from `T b` without any solve.
    pub fn apply_transfer(&self, t: &TransferMatrix, dipoles: &[Dipole], sensors: &Sensors) -> Result<Vec<Vec<f64>>> {
        self.check_transfer(t, sensors)?;
        match sensors {
            Sensors::Electrodes(e) => {
                let array = self.electrodes(e)?;
                self.batch(dipoles, |d| transfer::apply_eeg(t, &self.right_hand_side(*d)?, &array.projected))
            }
            Sensors::Coils(c) => {
                self.check_meg_model()?;
                self.batch(dipoles, |d| self.meg_total(d, c, t.apply(&self.right_hand_side(*d)?.rhs)?))
            }
        }
    }

    /// Normal-constrained scan of `space` against the measurement `m`.
    pub fn scan(&self, t: &TransferMatrix, space: &SourceSpace, sensors: &Sensors, m: &[f64]) -> Result<ScanResult> {
        self.check_transfer(t, sensors)?;
        let r = match sensors {
            Sensors::Electrodes(e) => {
                let array = self.electrodes(e)?;
                scan::dipole_scan(t, &self.vc, &self.index, space, &self.source_model, &array.projected, m)?
            }
            Sensors::Coils(c) => {
                self.check_meg_model()?;
                if m.len() != c.len() {
                    return Err(Error::Dimension {
                        expected: c.len(),
                        got: m.len(),
                    });
                }
                scan::scan_with(space.len(), m, |i| {
                    let d = space.dipole(i)?;
                    self.meg_total(&d, c, t.apply(&self.right_hand_side(d)?.rhs)?)
                })?
            }
        };
        self.verify_unchanged();
        Ok(r)
    }

    /// Direct solves compared against the sphere series at the electrode
    /// positions, which must lie on the outer sphere.
    pub fn validate_sphere(&self, model: &SphereModel, dipoles: &[Dipole], electrodes: &[Vec3]) -> Result<Vec<SphereComparison>> {
        let array = self.electrodes(electrodes)?;
        let numerical = self.solve_eeg(dipoles, &array)?;
        dipoles
            .iter()
            .zip(numerical)
            .map(|(d, num)| {
                let mut ana = model.potentials(d, electrodes)?;
                transfer::center(&mut ana);
                Ok(SphereComparison {
                    rdm: analytic::rdm(&num, &ana)?,
                    mag: analytic::mag(&num, &ana)?,
                    numerical: num,
                    analytic: ana,
                })
            })
            .collect()
    }
}
