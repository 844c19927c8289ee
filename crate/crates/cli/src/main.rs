use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use neurofem::driver::{sphere_from_config, Config, Driver, Sensors};
use neurofem::par::Workers;
use neurofem::transfer::{read_header, Modality, TransferMatrix};
use neurofem::{io, Error, Result};

/// EEG/MEG forward modeling with finite elements.
#[derive(Parser, Debug)]
#[command(name = "neurofem", version)]
struct Cli {
    /// INI configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, `key=value`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads (defaults to the `threads` key, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Summary of the mesh and conductivities named in the config.
    MeshInfo,
    /// Electrode potentials by direct solves, one row per dipole.
    SolveEeg {
        #[arg(long)]
        dipoles: PathBuf,
        #[arg(long)]
        electrodes: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Magnetic fields by direct solves, one row per dipole.
    SolveMeg {
        #[arg(long)]
        dipoles: PathBuf,
        #[arg(long)]
        coils: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Compute and store a transfer matrix, or inspect one with `info`.
    Transfer(TransferArgs),
    /// Sensor values for dipoles from a stored transfer matrix.
    ApplyTransfer {
        #[arg(long)]
        transfer: PathBuf,
        #[arg(long)]
        dipoles: PathBuf,
        /// Electrode or coil file matching the matrix.
        #[arg(long)]
        sensors: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Normal-constrained single dipole scan.
    Scan {
        #[arg(long)]
        transfer: PathBuf,
        #[arg(long)]
        source_space: PathBuf,
        #[arg(long)]
        sensors: PathBuf,
        #[arg(long)]
        measurement: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Compare direct EEG solves with the concentric sphere series
    /// described by the `sphere.*` keys.
    ValidateSphere {
        #[arg(long)]
        dipoles: PathBuf,
        #[arg(long)]
        electrodes: PathBuf,
    },
}

#[derive(Args, Debug)]
#[command(args_conflicts_with_subcommands = true, subcommand_negates_reqs = true)]
struct TransferArgs {
    #[command(subcommand)]
    info: Option<TransferInfo>,
    #[arg(long, required = true)]
    modality: Option<Modality>,
    /// Electrodes (`x y z`) or coils (`x y z nx ny nz`).
    #[arg(long, required = true)]
    sensors: Option<PathBuf>,
    #[arg(long, short, required = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum TransferInfo {
    /// Print the header of a transfer matrix file.
    Info { file: PathBuf },
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut c = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::new(),
    };
    for o in &cli.overrides {
        c.set_override(o)?;
    }
    Ok(c)
}

fn driver(cli: &Cli) -> Result<Driver> {
    Driver::new(load_config(cli)?)
}

fn emit(output: &Option<PathBuf>, text: &str) -> Result<()> {
    match output {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io {
            path: p.clone(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_sensors(path: &Path, modality: Modality) -> Result<Sensors> {
    Ok(match modality {
        Modality::Eeg => Sensors::Electrodes(io::read_points(path)?),
        Modality::Meg => Sensors::Coils(io::read_coils(path)?),
    })
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::MeshInfo => {
            let d = driver(cli)?;
            let vc = d.volume_conductor();
            let mesh = vc.mesh();
            let (lo, hi) = mesh.bounding_box();
            let mut labels = std::collections::BTreeMap::new();
            for &l in mesh.labels() {
                *labels.entry(l).or_insert(0usize) += 1;
            }
            let mut s = String::new();
            let _ = writeln!(s, "elements        {} ({:?})", mesh.element_count(), mesh.kind());
            let _ = writeln!(s, "vertices        {}", mesh.vertex_count());
            let _ = writeln!(s, "boundary faces  {}", mesh.boundary_faces().len());
            let _ = writeln!(s, "bounding box    [{:.3}, {:.3}, {:.3}] .. [{:.3}, {:.3}, {:.3}]", lo.x, lo.y, lo.z, hi.x, hi.y, hi.z);
            for (l, n) in labels {
                let _ = writeln!(s, "label {l:<9} {n} elements");
            }
            let _ = writeln!(s, "checksum        {}", hex(&d.checksum()));
            emit(&None, &s)
        }
        Command::SolveEeg { dipoles, electrodes, output } => {
            let d = driver(cli)?;
            let dipoles = io::read_dipoles(dipoles)?;
            let array = d.electrodes(&io::read_points(electrodes)?)?;
            let rows = d.solve_eeg(&dipoles, &array)?;
            emit(output, &io::format_matrix(&rows))
        }
        Command::SolveMeg { dipoles, coils, output } => {
            let d = driver(cli)?;
            let rows = d.solve_meg(&io::read_dipoles(dipoles)?, &io::read_coils(coils)?)?;
            emit(output, &io::format_matrix(&rows))
        }
        Command::Transfer(args) => match &args.info {
            Some(TransferInfo::Info { file }) => emit(&None, &format!("{}\n", read_header(file)?)),
            None => {
                let (Some(modality), Some(sensors), Some(output)) = (args.modality, &args.sensors, &args.output) else {
                    unreachable!("clap enforces the arguments")
                };
                let d = driver(cli)?;
                let t = d.compute_transfer(&read_sensors(sensors, modality)?)?;
                t.save(output)?;
                info!("wrote {} x {} {} transfer matrix to {}", t.sensors(), t.dofs(), modality, output.display());
                Ok(())
            }
        },
        Command::ApplyTransfer { transfer, dipoles, sensors, output } => {
            let d = driver(cli)?;
            let t = TransferMatrix::load(transfer)?;
            let sensors = read_sensors(sensors, t.modality)?;
            let rows = d.apply_transfer(&t, &io::read_dipoles(dipoles)?, &sensors)?;
            emit(output, &io::format_matrix(&rows))
        }
        Command::Scan {
            transfer,
            source_space,
            sensors,
            measurement,
            output,
        } => {
            let d = driver(cli)?;
            let t = TransferMatrix::load(transfer)?;
            let sensors = read_sensors(sensors, t.modality)?;
            let space = io::read_source_space(source_space)?;
            let m = io::read_values(measurement)?;
            let r = d.scan(&t, &space, &sensors, &m)?;
            let mut s = String::from("# index x y z strength gof\n");
            for (i, (p, e)) in space.positions.iter().zip(&r.entries).enumerate() {
                match e {
                    Some(e) => {
                        let _ = writeln!(s, "{i} {} {} {} {:e} {:.12}", p.x, p.y, p.z, e.strength, e.gof);
                    }
                    None => {
                        let _ = writeln!(s, "{i} {} {} {} - -", p.x, p.y, p.z);
                    }
                }
            }
            let b = r.best_entry();
            let p = space.positions[r.best];
            let _ = writeln!(s, "# best {} {} {} {} {:e} {:.12}", r.best, p.x, p.y, p.z, b.strength, b.gof);
            if !r.skipped.is_empty() {
                let _ = writeln!(s, "# skipped (outside mesh) {:?}", r.skipped);
            }
            emit(output, &s)
        }
        Command::ValidateSphere { dipoles, electrodes } => {
            let d = driver(cli)?;
            let model = sphere_from_config(d.config())?;
            let dipoles = io::read_dipoles(dipoles)?;
            let results = d.validate_sphere(&model, &dipoles, &io::read_points(electrodes)?)?;
            let mut s = String::from("# dipole rdm mag\n");
            for (i, r) in results.iter().enumerate() {
                let _ = writeln!(s, "{i} {:.6} {:.6}", r.rdm, r.mag);
            }
            emit(&None, &s)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let threads = match cli.threads {
        Some(n) => Some(n),
        None => match load_config(&cli).and_then(|c| c.parse_opt::<usize>("threads")) {
            Ok(n) => n,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
    };
    let workers = threads.map_or(Workers::default(), Workers::fixed);
    match workers.install(|| run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
