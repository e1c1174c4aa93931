//! Unit conversions and the molecule parameter registry.
//!
//! Internal unit system, used by every other module:
//!
//! | quantity        | unit   |
//! |-----------------|--------|
//! | energy          | MHz    |
//! | DC field        | kV/cm  |
//! | dipole moment   | Debye  |
//! | polarizability  | a.u.   |
//! | laser frequency | cm^-1  |
//!
//! All conversion factors are defined in this file and nowhere else.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Planck constant, J s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Bohr radius, m.
pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;
/// Vacuum permittivity, F/m.
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
/// One Debye in C m (1e-21 / c).
pub const DEBYE: f64 = 1e-21 / SPEED_OF_LIGHT;

pub const MHZ_PER_GHZ: f64 = 1e3;
/// 1 cm^-1 expressed as a frequency, MHz.
pub const MHZ_PER_WAVENUMBER: f64 = SPEED_OF_LIGHT * 1e2 / 1e6;
pub const V_PER_M_PER_KV_PER_CM: f64 = 1e5;
/// `d E / h` in MHz for d = 1 Debye and E = 1 kV/cm.
pub const MHZ_PER_DEBYE_KV_PER_CM: f64 = DEBYE * V_PER_M_PER_KV_PER_CM / PLANCK / 1e6;
/// Atomic unit of dipole moment (e a0), in Debye.
pub const DEBYE_PER_AU_DIPOLE: f64 = ELEMENTARY_CHARGE * BOHR_RADIUS / DEBYE;
/// Light shift per unit intensity for one atomic unit of polarizability,
/// `|dE|/h` in MHz per W/cm^2.
pub const MHZ_PER_W_CM2_PER_AU_POLARIZABILITY: f64 = 4.68645e-8;
/// Wavelength (nm) times wavenumber (cm^-1).
pub const NM_TIMES_WAVENUMBER: f64 = 1e7;

#[derive(Debug, Error, PartialEq)]
pub enum UnitsError {
    #[error("cannot convert {from} to {to}: incompatible dimensions")]
    Incompatible { from: Unit, to: Unit },
    #[error("cannot convert a non-positive value {0} between wavelength and wavenumber")]
    NonPositiveReciprocal(f64),
    #[error("unknown unit '{0}'")]
    UnknownUnit(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Unit {
    Wavenumber,
    GHz,
    MHz,
    KvPerCm,
    VPerM,
    Debye,
    AuDipole,
    AuPolarizability,
    MhzPerWCm2,
    Nanometer,
    WPerCm2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dimension {
    Energy,
    Field,
    Dipole,
    Polarizability,
    Intensity,
}

impl Unit {
    pub const ALL: [Unit; 11] = [
        Unit::Wavenumber,
        Unit::GHz,
        Unit::MHz,
        Unit::KvPerCm,
        Unit::VPerM,
        Unit::Debye,
        Unit::AuDipole,
        Unit::AuPolarizability,
        Unit::MhzPerWCm2,
        Unit::Nanometer,
        Unit::WPerCm2,
    ];

    fn dimension(self) -> Dimension {
        match self {
            Unit::Wavenumber | Unit::GHz | Unit::MHz | Unit::Nanometer => Dimension::Energy,
            Unit::KvPerCm | Unit::VPerM => Dimension::Field,
            Unit::Debye | Unit::AuDipole => Dimension::Dipole,
            Unit::AuPolarizability | Unit::MhzPerWCm2 => Dimension::Polarizability,
            Unit::WPerCm2 => Dimension::Intensity,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Unit::Wavenumber => "cm^-1",
            Unit::GHz => "GHz",
            Unit::MHz => "MHz",
            Unit::KvPerCm => "kV/cm",
            Unit::VPerM => "V/m",
            Unit::Debye => "D",
            Unit::AuDipole => "a.u.(dipole)",
            Unit::AuPolarizability => "a.u.",
            Unit::MhzPerWCm2 => "MHz/(W/cm^2)",
            Unit::Nanometer => "nm",
            Unit::WPerCm2 => "W/cm^2",
        }
    }

    // Scale to the dimension's base unit. Wavelength is handled separately.
    fn to_base(self) -> f64 {
        match self {
            Unit::MHz => 1.0,
            Unit::GHz => MHZ_PER_GHZ,
            Unit::Wavenumber => MHZ_PER_WAVENUMBER,
            Unit::KvPerCm => 1.0,
            Unit::VPerM => 1.0 / V_PER_M_PER_KV_PER_CM,
            Unit::Debye => 1.0,
            Unit::AuDipole => DEBYE_PER_AU_DIPOLE,
            Unit::AuPolarizability => 1.0,
            Unit::MhzPerWCm2 => 1.0 / MHZ_PER_W_CM2_PER_AU_POLARIZABILITY,
            Unit::WPerCm2 => 1.0,
            Unit::Nanometer => unreachable!("wavelength is not a linear unit"),
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Unit {
    type Err = UnitsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Unit::ALL
            .into_iter()
            .find(|u| u.symbol() == s)
            .ok_or_else(|| UnitsError::UnknownUnit(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub value: f64,
    pub unit: Unit,
}

impl Quantity {
    pub fn new(value: f64, unit: Unit) -> Self {
        Quantity { value, unit }
    }

    pub fn to(self, unit: Unit) -> Result<Quantity, UnitsError> {
        convert(self, unit)
    }
}

/// Rescales a quantity to another unit of the same dimension.
///
/// Wavelength in nm is accepted as a spectroscopic energy unit and is the one
/// reciprocal (non-linear) conversion.
pub fn convert(q: Quantity, to: Unit) -> Result<Quantity, UnitsError> {
    if q.unit.dimension() != to.dimension() {
        return Err(UnitsError::Incompatible { from: q.unit, to });
    }
    if q.unit == to {
        return Ok(q);
    }
    let base = if q.unit == Unit::Nanometer {
        if q.value <= 0.0 {
            return Err(UnitsError::NonPositiveReciprocal(q.value));
        }
        NM_TIMES_WAVENUMBER / q.value * MHZ_PER_WAVENUMBER
    } else {
        q.value * q.unit.to_base()
    };
    let value = if to == Unit::Nanometer {
        if base <= 0.0 {
            return Err(UnitsError::NonPositiveReciprocal(q.value));
        }
        NM_TIMES_WAVENUMBER / (base / MHZ_PER_WAVENUMBER)
    } else {
        base / to.to_base()
    };
    Ok(Quantity::new(value, to))
}

/// Stark coupling scale `d E / h` in MHz.
pub fn dipole_energy_mhz(d_debye: f64, field_kv_cm: f64) -> f64 {
    d_debye * field_kv_cm * MHZ_PER_DEBYE_KV_PER_CM
}

/// Intensity (W/cm^2) of a travelling wave with peak field amplitude in V/m.
pub fn intensity_from_peak_field(peak_v_per_m: f64) -> f64 {
    0.5 * SPEED_OF_LIGHT * VACUUM_PERMITTIVITY * peak_v_per_m * peak_v_per_m / 1e4
}

/// Molecule-frame polarizability pair at one laser frequency, atomic units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MolecularPolarizability {
    pub parallel: f64,
    pub perpendicular: f64,
}

impl MolecularPolarizability {
    pub fn new(parallel: f64, perpendicular: f64) -> Self {
        MolecularPolarizability { parallel, perpendicular }
    }

    /// `(alpha_par + 2 alpha_perp) / 3`
    pub fn isotropic(&self) -> f64 {
        (self.parallel + 2.0 * self.perpendicular) / 3.0
    }

    /// `alpha_par - alpha_perp`
    pub fn anisotropy(&self) -> f64 {
        self.parallel - self.perpendicular
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaRow {
    pub nu_cm: f64,
    pub parallel: f64,
    pub perpendicular: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum MoleculeError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid {field}: {message}")]
    Invariant { field: &'static str, message: String },
    #[error("missing key '{0}'")]
    MissingKey(&'static str),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("wavenumber {nu} cm^-1 outside tabulated range [{lo}, {hi}]")]
    OutOfRange { nu: f64, lo: f64, hi: f64 },
}

/// Per-molecule constants. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculeSpec {
    name: String,
    b_mhz: f64,
    d00_debye: f64,
    alpha_table: Vec<AlphaRow>,
}

impl MoleculeSpec {
    pub fn new(
        name: impl Into<String>,
        b_mhz: f64,
        d00_debye: f64,
        alpha_table: Vec<AlphaRow>,
    ) -> Result<Self, MoleculeError> {
        if !(b_mhz > 0.0 && b_mhz.is_finite()) {
            return Err(MoleculeError::Invariant {
                field: "B",
                message: format!("must be positive, got {b_mhz}"),
            });
        }
        if !(d00_debye >= 0.0 && d00_debye.is_finite()) {
            return Err(MoleculeError::Invariant {
                field: "d00",
                message: format!("must be non-negative, got {d00_debye}"),
            });
        }
        if alpha_table.is_empty() {
            return Err(MoleculeError::Invariant {
                field: "alpha",
                message: "table is empty".into(),
            });
        }
        for w in alpha_table.windows(2) {
            if !(w[1].nu_cm > w[0].nu_cm) {
                return Err(MoleculeError::Invariant {
                    field: "alpha",
                    message: format!(
                        "frequency grid not strictly increasing at {} -> {}",
                        w[0].nu_cm, w[1].nu_cm
                    ),
                });
            }
        }
        if alpha_table
            .iter()
            .any(|r| !(r.nu_cm.is_finite() && r.parallel.is_finite() && r.perpendicular.is_finite()))
        {
            return Err(MoleculeError::Invariant {
                field: "alpha",
                message: "non-finite entry".into(),
            });
        }
        Ok(MoleculeSpec {
            name: name.into(),
            b_mhz,
            d00_debye,
            alpha_table,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Rotational constant, MHz.
    pub fn b_mhz(&self) -> f64 {
        self.b_mhz
    }

    pub fn b_ghz(&self) -> f64 {
        self.b_mhz / MHZ_PER_GHZ
    }

    pub fn d00_debye(&self) -> f64 {
        self.d00_debye
    }

    pub fn alpha_table(&self) -> &[AlphaRow] {
        &self.alpha_table
    }

    /// Dimensionless Stark parameter `d E / B` at a DC field in kV/cm.
    pub fn beta(&self, field_kv_cm: f64) -> f64 {
        dipole_energy_mhz(self.d00_debye, field_kv_cm) / self.b_mhz
    }

    /// DC field in kV/cm giving Stark parameter `beta`.
    pub fn field_for_beta(&self, beta: f64) -> f64 {
        beta * self.b_mhz / (self.d00_debye * MHZ_PER_DEBYE_KV_PER_CM)
    }

    /// Same molecule with `B` and `d00` replaced.
    pub fn with_constants(&self, b_mhz: f64, d00_debye: f64) -> Result<Self, MoleculeError> {
        MoleculeSpec::new(self.name.clone(), b_mhz, d00_debye, self.alpha_table.clone())
    }

    pub fn parse(text: &str) -> Result<Self, MoleculeError> {
        let mut name = None;
        let mut b_ghz = None;
        let mut d00 = None;
        let mut rows = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| MoleculeError::Parse {
                line: line_no,
                message,
            };
            let (key, value) = line
                .split_once(':')
                .ok_or_else(|| parse_err(format!("expected 'key: value', got '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            let number = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| parse_err(format!("'{s}' is not a number")))
            };
            match key {
                "name" => {
                    if value.is_empty() {
                        return Err(parse_err("empty name".into()));
                    }
                    name = Some(value.to_string());
                }
                "B_GHz" => b_ghz = Some(number(value)?),
                "d00_debye" => d00 = Some(number(value)?),
                "alpha" => {
                    let fields: Vec<&str> = value.split_whitespace().collect();
                    if fields.len() != 3 {
                        return Err(parse_err(format!(
                            "alpha row needs 3 numbers, got {}",
                            fields.len()
                        )));
                    }
                    rows.push(AlphaRow {
                        nu_cm: number(fields[0])?,
                        parallel: number(fields[1])?,
                        perpendicular: number(fields[2])?,
                    });
                }
                other => return Err(parse_err(format!("unknown key '{other}'"))),
            }
        }

        let name = name.ok_or(MoleculeError::MissingKey("name"))?;
        let b_ghz = b_ghz.ok_or(MoleculeError::MissingKey("B_GHz"))?;
        let d00 = d00.ok_or(MoleculeError::MissingKey("d00_debye"))?;
        MoleculeSpec::new(name, b_ghz * MHZ_PER_GHZ, d00, rows)
    }

    /// Serializes to the text format accepted by [`MoleculeSpec::parse`].
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "name: {}\nB_GHz: {}\nd00_debye: {}\n",
            self.name,
            self.b_ghz(),
            self.d00_debye
        );
        for r in &self.alpha_table {
            out.push_str(&format!("alpha: {} {} {}\n", r.nu_cm, r.parallel, r.perpendicular));
        }
        out
    }
}

pub fn load_molecule(path: impl AsRef<Path>) -> Result<MoleculeSpec, MoleculeError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| MoleculeError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    MoleculeSpec::parse(&text)
}

const BUNDLED: [(&str, &str); 2] = [
    ("KRb", include_str!("../data/KRb.mol")),
    ("RbCs", include_str!("../data/RbCs.mol")),
];

pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

/// Bundled molecule by case-insensitive name.
pub fn bundled_molecule(name: &str) -> Option<MoleculeSpec> {
    BUNDLED
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .map(|(_, text)| MoleculeSpec::parse(text).expect("bundled molecule file is valid"))
}

/// Bundled name first, then a file path.
pub fn resolve_molecule(name_or_path: &str) -> Result<MoleculeSpec, MoleculeError> {
    match bundled_molecule(name_or_path) {
        Some(spec) => Ok(spec),
        None => load_molecule(name_or_path),
    }
}

/// Linearly interpolated `(alpha_par, alpha_perp)` at wavenumber `nu_cm`.
pub fn alpha_lambda_at(
    spec: &MoleculeSpec,
    nu_cm: f64,
) -> Result<MolecularPolarizability, MoleculeError> {
    let table = &spec.alpha_table;
    let (lo, hi) = (table[0].nu_cm, table[table.len() - 1].nu_cm);
    if !(nu_cm >= lo && nu_cm <= hi) {
        return Err(MoleculeError::OutOfRange { nu: nu_cm, lo, hi });
    }
    let idx = table.partition_point(|r| r.nu_cm < nu_cm);
    let upper = &table[idx];
    if upper.nu_cm == nu_cm {
        return Ok(MolecularPolarizability::new(upper.parallel, upper.perpendicular));
    }
    let lower = &table[idx - 1];
    let t = (nu_cm - lower.nu_cm) / (upper.nu_cm - lower.nu_cm);
    let lerp = |a: f64, b: f64| a + t * (b - a);
    Ok(MolecularPolarizability::new(
        lerp(lower.parallel, upper.parallel),
        lerp(lower.perpendicular, upper.perpendicular),
    ))
}
