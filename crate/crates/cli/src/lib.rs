//! Command-line front end: argument parsing, error classification and output.
//!
//! [`run`] never panics on bad input and never calls `process::exit`; the
//! binary forwards its return value as the exit status.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use starkpol::lattice::LatticeError;
use starkpol::magic::{MagicError, DEFAULT_NU_CM, DEFAULT_SCAN_POINTS};
use starkpol::polarizability::{PolarizabilityError, PolarizationVector, StateLabel};
use starkpol::stark::{StarkError, DEFAULT_J_MAX};
use starkpol::units::MoleculeError;

mod commands;
pub mod table;

use table::ResultTable;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_COMPUTATION: i32 = 2;

#[derive(Debug, Error, PartialEq)]
pub enum CliError {
    /// Bad flags, unreadable inputs, or parameters outside a valid domain.
    #[error("usage: {0}")]
    Usage(String),
    /// Valid inputs for which the requested result does not exist.
    #[error("computation: {0}")]
    Computation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Computation(_) => EXIT_COMPUTATION,
        }
    }
}

impl From<MoleculeError> for CliError {
    fn from(e: MoleculeError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<StarkError> for CliError {
    fn from(e: StarkError) -> Self {
        match e {
            StarkError::Eigensolver(_) => CliError::Computation(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<PolarizabilityError> for CliError {
    fn from(e: PolarizabilityError) -> Self {
        match e {
            PolarizabilityError::Stark(s) => s.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<MagicError> for CliError {
    fn from(e: MagicError) -> Self {
        match e {
            MagicError::Polarizability(p) => p.into(),
            MagicError::Molecule(m) => m.into(),
            MagicError::InvalidGrid(_) => CliError::Usage(e.to_string()),
            MagicError::NoSignChange { .. } | MagicError::Degenerate { .. } | MagicError::Isotropic => {
                CliError::Computation(e.to_string())
            }
        }
    }
}

impl From<LatticeError> for CliError {
    fn from(e: LatticeError) -> Self {
        CliError::Computation(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "starkpol", version, about = "Stark-dressed rotational states, dynamic polarizabilities and magic trapping conditions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dressed rotational energies and alignment.
    Eigen(EigenArgs),
    /// Polarizability tensor, effective polarizability and light shift per state.
    Polar(PolarArgs),
    /// Effective polarizability over a grid of field, angle or wavenumber.
    Sweep(SweepArgs),
    /// DC fields where two states have equal polarizability.
    FindMagicField(FindArgs),
    /// Polarizabilities at cos^2(theta) = 1/3 across fields.
    MagicAngle(AngleArgs),
    /// Three-beam magic-angle lattice plan.
    Lattice(LatticeArgs),
    /// Energy change when the rotational basis is enlarged by four levels.
    Convergence(ConvergenceArgs),
    /// Data behind the field, surface and angle figures.
    Figure(FigureArgs),
}

#[derive(Debug, Args)]
struct MoleculeArgs {
    /// Bundled molecule name (KRb, RbCs) or path to a molecule file.
    #[arg(long)]
    molecule: String,
    /// Rotational basis cutoff J_max.
    #[arg(long, default_value_t = DEFAULT_J_MAX)]
    jmax: u32,
}

#[derive(Debug, Args)]
struct LightArgs {
    /// Trapping-light wavenumber, cm^-1.
    #[arg(long, default_value_t = DEFAULT_NU_CM)]
    nu: f64,
}

#[derive(Debug, Args)]
struct PolArgs {
    /// Polarization: z, x, theta:<deg>, sigma+ or sigma-.
    #[arg(long, value_parser = parse_pol, conflicts_with = "theta")]
    pol: Option<Polarization>,
    /// Linear polarization angle from the field axis in the x-z plane, degrees.
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
}

impl PolArgs {
    fn choice(&self) -> Option<Polarization> {
        match (&self.pol, self.theta) {
            (Some(p), _) => Some(p.clone()),
            (None, Some(t)) => Some(Polarization::theta(t)),
            (None, None) => None,
        }
    }

    fn or_z(&self) -> Polarization {
        self.choice().unwrap_or_else(|| parse_pol("z").expect("z parses"))
    }
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file; `-` or absent writes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Omit run metadata so outputs can be diffed.
    #[arg(long)]
    no_meta: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct EigenArgs {
    #[command(flatten)]
    molecule: MoleculeArgs,
    /// DC field, kV/cm.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    field: f64,
    /// States as J,M[,+|-] separated by ':'.
    #[arg(long, value_parser = parse_states, default_value = "0,0:1,0")]
    states: States,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct PolarArgs {
    #[command(flatten)]
    molecule: MoleculeArgs,
    #[command(flatten)]
    light: LightArgs,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    field: f64,
    #[arg(long, value_parser = parse_states, default_value = "0,0:1,0")]
    states: States,
    #[command(flatten)]
    pol: PolArgs,
    /// Trap intensity for the light shift, W/cm^2.
    #[arg(long, default_value_t = 1.0)]
    intensity: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Var {
    Field,
    Theta,
    Nu,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    molecule: MoleculeArgs,
    #[command(flatten)]
    light: LightArgs,
    /// Swept quantity.
    #[arg(long, value_enum, default_value_t = Var::Field)]
    var: Var,
    /// lo:hi of the swept quantity. Defaults: field 0:15, theta 0:90, nu the tabulated range.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    range: Option<Range>,
    /// Number of grid points including both ends.
    #[arg(long, default_value_t = 61)]
    steps: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    field: f64,
    #[arg(long, value_parser = parse_states, default_value = "0,0:1,0")]
    states: States,
    #[command(flatten)]
    pol: PolArgs,
    #[arg(long, default_value_t = 1.0)]
    intensity: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct FindArgs {
    #[command(flatten)]
    molecule: MoleculeArgs,
    #[command(flatten)]
    light: LightArgs,
    /// Two states as A:B, each J,M[,+|-].
    #[arg(long, value_parser = parse_pair, default_value = "0,0:1,0")]
    pair: Pair,
    /// Searches z and x when no polarization is given.
    #[command(flatten)]
    pol: PolArgs,
    /// Field search interval lo:hi, kV/cm.
    #[arg(long, value_parser = parse_range, default_value = "0:15", allow_hyphen_values = true)]
    range: Range,
    /// Coarse scan points before refinement.
    #[arg(long, default_value_t = DEFAULT_SCAN_POINTS)]
    scan_points: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct AngleArgs {
    #[command(flatten)]
    molecule: MoleculeArgs,
    #[command(flatten)]
    light: LightArgs,
    #[arg(long, value_parser = parse_pair, default_value = "0,0:1,0")]
    pair: Pair,
    /// Field interval lo:hi, kV/cm.
    #[arg(long, value_parser = parse_range, default_value = "0:15", allow_hyphen_values = true)]
    range: Range,
    /// Number of fields including both ends.
    #[arg(long, default_value_t = 16)]
    steps: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct LatticeArgs {
    /// Wavenumber of beam a, cm^-1.
    #[arg(long, default_value_t = DEFAULT_NU_CM)]
    nu: f64,
    /// Detuning of beam b from beam a, MHz.
    #[arg(long, default_value_t = 80.0, allow_hyphen_values = true)]
    delta_b: f64,
    /// Detuning of beam c from beam a, MHz.
    #[arg(long, default_value_t = 170.0, allow_hyphen_values = true)]
    delta_c: f64,
    /// Motional frequency, kHz.
    #[arg(long, default_value_t = 50.0)]
    f_mot: f64,
    /// Required ratio for nu >> delta and delta >> f_mot.
    #[arg(long, default_value_t = starkpol::lattice::DEFAULT_SCALE_RATIO)]
    ratio: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    molecule: MoleculeArgs,
    /// Single DC field, kV/cm. Conflicts with --range.
    #[arg(long, conflicts_with = "range", allow_hyphen_values = true)]
    field: Option<f64>,
    /// Field interval lo:hi, kV/cm; default 0:15.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    range: Option<Range>,
    #[arg(long, default_value_t = 16)]
    steps: usize,
    #[arg(long, value_parser = parse_states, default_value = "0,0:1,0")]
    states: States,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FigureId {
    Fig2,
    Fig3,
    Fig4,
}

#[derive(Debug, Args)]
struct FigureArgs {
    #[arg(value_enum)]
    id: FigureId,
    #[command(flatten)]
    molecule: MoleculeArgs,
    #[command(flatten)]
    light: LightArgs,
    #[command(flatten)]
    output: OutputArgs,
}

/// A named polarization as given on the command line.
#[derive(Debug, Clone)]
struct Polarization {
    name: String,
    vector: PolarizationVector,
}

impl Polarization {
    fn theta(deg: f64) -> Self {
        Polarization {
            name: format!("theta:{deg}"),
            vector: PolarizationVector::linear_degrees(deg),
        }
    }
}

#[derive(Debug, Clone)]
struct States(Vec<StateLabel>);

#[derive(Debug, Clone, Copy)]
struct Pair(StateLabel, StateLabel);

#[derive(Debug, Clone, Copy)]
struct Range(f64, f64);

fn parse_pol(s: &str) -> Result<Polarization, String> {
    let vector = match s {
        "z" => PolarizationVector::z(),
        "x" => PolarizationVector::x(),
        "sigma+" => PolarizationVector::circular(true),
        "sigma-" => PolarizationVector::circular(false),
        _ => match s.strip_prefix("theta:") {
            Some(deg) => {
                let deg: f64 = deg.parse().map_err(|_| format!("bad angle in '{s}'"))?;
                if !deg.is_finite() {
                    return Err(format!("bad angle in '{s}'"));
                }
                return Ok(Polarization::theta(deg));
            }
            None => return Err(format!("expected z, x, theta:<deg>, sigma+ or sigma-, got '{s}'")),
        },
    };
    Ok(Polarization {
        name: s.to_string(),
        vector,
    })
}

fn parse_states(s: &str) -> Result<States, String> {
    let states = s
        .split(':')
        .map(|item| item.parse::<StateLabel>().map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(States(states))
}

fn parse_pair(s: &str) -> Result<Pair, String> {
    match parse_states(s)?.0.as_slice() {
        [a, b] => Ok(Pair(*a, *b)),
        _ => Err(format!("expected two states A:B, got '{s}'")),
    }
}

fn parse_range(s: &str) -> Result<Range, String> {
    let bad = || format!("expected lo:hi, got '{s}'");
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(format!("range '{s}' must satisfy lo < hi"));
    }
    Ok(Range(lo, hi))
}

/// Runs the CLI on `args` (including the program name). Tables go to
/// `stdout` or `--out`; errors go to `stderr` as one `error: ...` line.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{}", e.render());
                return EXIT_OK;
            }
            // Clap renders a multi-line message with usage hints; keep the first line.
            let rendered = e.render().to_string();
            let first = rendered.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            let message = first.trim().trim_start_matches("error:").trim();
            return report(stderr, &CliError::Usage(message.to_string()));
        }
    };
    let invocation = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join(" ");
    let (output, result) = dispatch(cli.command);
    let mut table = match result {
        Ok(t) => t,
        Err(e) => return report(stderr, &e),
    };
    let mut meta = vec![
        ("starkpol".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("args".to_string(), invocation),
    ];
    meta.append(&mut table.meta);
    table.meta = meta;
    let text = match output.format {
        Format::Csv => table.to_csv(!output.no_meta),
        Format::Json => table.to_json(!output.no_meta),
    };
    let written = match output.out.as_deref() {
        Some(p) if p.as_os_str() != "-" => {
            std::fs::write(p, text).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", p.display())))
        }
        _ => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Usage(format!("cannot write output: {e}"))),
    };
    match written {
        Ok(()) => EXIT_OK,
        Err(e) => report(stderr, &e),
    }
}

fn report(stderr: &mut dyn Write, e: &CliError) -> i32 {
    let line = e.to_string().replace(['\n', '\r'], " ");
    let _ = writeln!(stderr, "error: {line}");
    e.exit_code()
}

fn dispatch(command: Command) -> (OutputArgs, Result<ResultTable, CliError>) {
    match command {
        Command::Eigen(a) => {
            let r = commands::eigen(&a);
            (a.output, r)
        }
        Command::Polar(a) => {
            let r = commands::polar(&a);
            (a.output, r)
        }
        Command::Sweep(a) => {
            let r = commands::sweep(&a);
            (a.output, r)
        }
        Command::FindMagicField(a) => {
            let r = commands::find_magic_field(&a);
            (a.output, r)
        }
        Command::MagicAngle(a) => {
            let r = commands::magic_angle(&a);
            (a.output, r)
        }
        Command::Lattice(a) => {
            let r = commands::lattice(&a);
            (a.output, r)
        }
        Command::Convergence(a) => {
            let r = commands::convergence(&a);
            (a.output, r)
        }
        Command::Figure(a) => {
            let r = commands::figure(&a);
            (a.output, r)
        }
    }
}
