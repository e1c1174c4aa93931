//! Sweeps over DC field, polarization angle and laser frequency, and root
//! finding for state-insensitive ("magic") trapping conditions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polarizability::{alpha_effective, PolarizabilityError, PolarizationVector, StateLabel};
use crate::stark::DressedManifold;
use crate::units::{alpha_lambda_at, MolecularPolarizability, MoleculeError, MoleculeSpec, MHZ_PER_W_CM2_PER_AU_POLARIZABILITY};

pub const DEFAULT_SCAN_POINTS: usize = 64;
pub const DEFAULT_NU_CM: f64 = 9174.0;

/// Relative tolerance on the refined root.
pub const ROOT_TOLERANCE: f64 = 1e-12;
/// `|alpha_A - alpha_B| / |alpha_bar|` below which a scan point counts as equal.
pub const DEGENERATE_THRESHOLD: f64 = 1e-10;
/// Scan points that are exact roots rather than sign-change brackets.
const EXACT_ROOT_THRESHOLD: f64 = 1e-13;

#[derive(Debug, Error, PartialEq)]
pub enum MagicError {
    #[error(transparent)]
    Polarizability(#[from] PolarizabilityError),
    #[error(transparent)]
    Molecule(#[from] MoleculeError),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("no sign change of the polarizability difference on [{from}, {to}] kV/cm (difference ranges from {min_diff} to {max_diff} a.u.)")]
    NoSignChange {
        from: f64,
        to: f64,
        min_diff: f64,
        max_diff: f64,
    },
    #[error("polarizabilities are identically equal on [{from}, {to}] kV/cm; every field is a crossing")]
    Degenerate { from: f64, to: f64 },
    #[error("molecular polarizability is isotropic; there is no state dependence to cancel")]
    Isotropic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVariable {
    /// DC field, kV/cm
    Field,
    /// Linear polarization angle from the DC field axis, degrees
    Theta,
    /// Laser wavenumber, cm^-1
    Nu,
}

impl SweepVariable {
    pub fn column(&self) -> (&'static str, &'static str) {
        match self {
            SweepVariable::Field => ("E", "kV/cm"),
            SweepVariable::Theta => ("theta", "deg"),
            SweepVariable::Nu => ("nu", "cm^-1"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub variable: SweepVariable,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

impl SweepGrid {
    pub fn new(variable: SweepVariable, from: f64, to: f64, steps: usize) -> Result<Self, MagicError> {
        if !(from < to) {
            return Err(MagicError::InvalidGrid(format!("from ({from}) must be below to ({to})")));
        }
        if steps < 2 {
            return Err(MagicError::InvalidGrid(format!("steps = {steps}, need at least 2")));
        }
        Ok(SweepGrid { variable, from, to, steps })
    }

    /// Evenly spaced points including both ends.
    pub fn points(&self) -> Vec<f64> {
        linspace(self.from, self.to, self.steps)
    }
}

fn linspace(from: f64, to: f64, n: usize) -> Vec<f64> {
    let h = (to - from) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { to } else { from + h * i as f64 })
        .collect()
}

/// Quantities held fixed during a sweep. The swept one is ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepContext {
    pub field_kv_cm: f64,
    pub nu_cm: f64,
    /// Used unless theta is swept, which forces `linear(theta)`.
    pub polarization: PolarizationVector,
    pub j_max: u32,
    pub intensity_w_cm2: f64,
}

impl Default for SweepContext {
    fn default() -> Self {
        SweepContext {
            field_kv_cm: 0.0,
            nu_cm: DEFAULT_NU_CM,
            polarization: PolarizationVector::z(),
            j_max: crate::stark::DEFAULT_J_MAX,
            intensity_w_cm2: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    /// Effective polarizability per state, atomic units.
    pub alpha: Vec<f64>,
    /// Light shift per state at the context intensity, MHz.
    pub delta_e_mhz: Vec<f64>,
}

fn m_abs_max(states: &[StateLabel]) -> u32 {
    states.iter().map(|s| s.m.unsigned_abs()).max().unwrap_or(0)
}

/// One row per grid point, in grid order.
pub fn sweep(
    spec: &MoleculeSpec,
    grid: &SweepGrid,
    context: &SweepContext,
    states: &[StateLabel],
) -> Result<Vec<SweepRow>, MagicError> {
    let m_max = m_abs_max(states);
    let shared = match grid.variable {
        SweepVariable::Field => None,
        _ => Some(DressedManifold::new(spec, context.field_kv_cm, context.j_max, m_max).map_err(PolarizabilityError::from)?),
    };
    let fixed_alpha = match grid.variable {
        SweepVariable::Nu => None,
        _ => Some(alpha_lambda_at(spec, context.nu_cm)?),
    };

    grid.points()
        .into_par_iter()
        .map(|value| {
            let owned;
            let manifold = match &shared {
                Some(m) => m,
                None => {
                    owned = DressedManifold::new(spec, value, context.j_max, m_max).map_err(PolarizabilityError::from)?;
                    &owned
                }
            };
            let alpha = match fixed_alpha {
                Some(a) => a,
                None => alpha_lambda_at(spec, value)?,
            };
            let pol = match grid.variable {
                SweepVariable::Theta => PolarizationVector::linear_degrees(value),
                _ => context.polarization,
            };
            let alpha_row = states
                .iter()
                .map(|s| alpha_effective(manifold, *s, alpha, &pol))
                .collect::<Result<Vec<_>, _>>()?;
            let delta_e_mhz = alpha_row
                .iter()
                .map(|a| -a * MHZ_PER_W_CM2_PER_AU_POLARIZABILITY * context.intensity_w_cm2)
                .collect();
            Ok(SweepRow {
                value,
                alpha: alpha_row,
                delta_e_mhz,
            })
        })
        .collect()
}

/// Derivative-free bracketing root finder (Brent's method).
///
/// `fa` and `fb` must have opposite signs. Stops when the bracket is below
/// `rel_tol * |x| + abs_tol` or `f` is exactly zero.
pub fn brent<F>(mut f: F, a: f64, b: f64, fa: f64, fb: f64, rel_tol: f64, abs_tol: f64) -> Result<(f64, f64), String>
where
    F: FnMut(f64) -> Result<f64, String>,
{
    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    if fa * fb > 0.0 {
        return Err("endpoints do not bracket a root".into());
    }
    if fa == 0.0 {
        return Ok((a, 0.0));
    }
    if fb == 0.0 {
        return Ok((b, 0.0));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * (rel_tol * b.abs() + abs_tol);
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok((b, (c - b).abs()));
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b)?;
    }
    Err("root refinement did not converge".into())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSearch {
    pub from_kv_cm: f64,
    pub to_kv_cm: f64,
    pub nu_cm: f64,
    pub j_max: u32,
    pub scan_points: usize,
}

impl Default for FieldSearch {
    fn default() -> Self {
        FieldSearch {
            from_kv_cm: 0.0,
            to_kv_cm: 15.0,
            nu_cm: DEFAULT_NU_CM,
            j_max: crate::stark::DEFAULT_J_MAX,
            scan_points: DEFAULT_SCAN_POINTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingReport {
    pub pair: (StateLabel, StateLabel),
    pub field_kv_cm: f64,
    /// `d E* / B`
    pub beta: f64,
    pub polarization: String,
    /// Scan bracket `[lo, hi]` in kV/cm; equal ends for an exact grid root.
    pub bracket: (f64, f64),
    /// Final bracket width, kV/cm.
    pub tolerance: f64,
    /// `alpha_A - alpha_B` at the root, atomic units.
    pub residual: f64,
}

/// `alpha_A(E) - alpha_B(E)` for a fixed polarization and laser frequency.
pub fn alpha_difference(
    spec: &MoleculeSpec,
    pair: (StateLabel, StateLabel),
    alpha: MolecularPolarizability,
    pol: &PolarizationVector,
    field_kv_cm: f64,
    j_max: u32,
) -> Result<f64, PolarizabilityError> {
    let m_max = pair.0.m.unsigned_abs().max(pair.1.m.unsigned_abs());
    let manifold = DressedManifold::new(spec, field_kv_cm, j_max, m_max)?;
    Ok(alpha_effective(&manifold, pair.0, alpha, pol)? - alpha_effective(&manifold, pair.1, alpha, pol)?)
}

/// Every field in the search range where the two states have equal
/// polarizability, found by a coarse scan and Brent refinement of each bracket.
pub fn find_magic_field(
    spec: &MoleculeSpec,
    pair: (StateLabel, StateLabel),
    pol: &PolarizationVector,
    pol_name: &str,
    search: &FieldSearch,
) -> Result<Vec<CrossingReport>, MagicError> {
    let alpha = alpha_lambda_at(spec, search.nu_cm)?;
    find_magic_field_with_alpha(spec, pair, pol, pol_name, search, alpha)
}

/// [`find_magic_field`] with explicit molecule-frame polarizabilities.
pub fn find_magic_field_with_alpha(
    spec: &MoleculeSpec,
    pair: (StateLabel, StateLabel),
    pol: &PolarizationVector,
    pol_name: &str,
    search: &FieldSearch,
    alpha: MolecularPolarizability,
) -> Result<Vec<CrossingReport>, MagicError> {
    let grid = SweepGrid::new(SweepVariable::Field, search.from_kv_cm, search.to_kv_cm, search.scan_points)?;
    if search.from_kv_cm < 0.0 {
        return Err(MagicError::InvalidGrid("negative DC field".into()));
    }
    if alpha.anisotropy() == 0.0 {
        return Err(MagicError::Isotropic);
    }
    let scale = alpha.isotropic().abs();
    let diff = |e: f64| alpha_difference(spec, pair, alpha, pol, e, search.j_max);

    let xs = grid.points();
    let ys = xs.par_iter().map(|&e| diff(e)).collect::<Result<Vec<_>, _>>()?;

    let equal = ys.iter().filter(|y| y.abs() < DEGENERATE_THRESHOLD * scale).count();
    if 2 * equal > ys.len() {
        return Err(MagicError::Degenerate {
            from: search.from_kv_cm,
            to: search.to_kv_cm,
        });
    }

    let exact = |y: f64| y.abs() <= EXACT_ROOT_THRESHOLD * scale;
    let report = |field: f64, bracket: (f64, f64), tolerance: f64, residual: f64| CrossingReport {
        pair,
        field_kv_cm: field,
        beta: spec.beta(field),
        polarization: pol_name.to_string(),
        bracket,
        tolerance,
        residual,
    };

    let mut out = Vec::new();
    for i in 0..xs.len() {
        if exact(ys[i]) {
            out.push(report(xs[i], (xs[i], xs[i]), 0.0, ys[i]));
            continue;
        }
        if i + 1 == xs.len() || exact(ys[i + 1]) || ys[i].signum() == ys[i + 1].signum() {
            continue;
        }
        let (lo, hi) = (xs[i], xs[i + 1]);
        let (root, width) = brent(
            |e| diff(e).map_err(|err| err.to_string()),
            lo,
            hi,
            ys[i],
            ys[i + 1],
            ROOT_TOLERANCE,
            1e-300,
        )
        .map_err(MagicError::InvalidGrid)?;
        out.push(report(root, (lo, hi), width, diff(root)?));
    }

    if out.is_empty() {
        let min_diff = ys.iter().copied().fold(f64::INFINITY, f64::min);
        let max_diff = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        return Err(MagicError::NoSignChange {
            from: search.from_kv_cm,
            to: search.to_kv_cm,
            min_diff,
            max_diff,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InvarianceOutcome {
    Crossings(Vec<f64>),
    Degenerate,
    NoCrossing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceEntry {
    pub polarization: String,
    pub outcome: InvarianceOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub entries: Vec<InvarianceEntry>,
    /// `(max - min) / mean` of the first crossing field across entries that have one.
    pub relative_spread: f64,
}

/// Magic fields of an `M = 0` pair for `z`, `x` and linear polarizations at
/// the given angles (degrees).
pub fn magic_field_polarization_invariance(
    spec: &MoleculeSpec,
    pair: (StateLabel, StateLabel),
    search: &FieldSearch,
    thetas_deg: &[f64],
) -> Result<InvarianceReport, MagicError> {
    if pair.0.m != 0 || pair.1.m != 0 {
        return Err(MagicError::InvalidGrid("polarization invariance applies to M = 0 pairs".into()));
    }
    let mut pols = vec![
        ("z".to_string(), PolarizationVector::z()),
        ("x".to_string(), PolarizationVector::x()),
    ];
    pols.extend(
        thetas_deg
            .iter()
            .map(|t| (format!("theta:{t}"), PolarizationVector::linear_degrees(*t))),
    );
    let mut entries = Vec::new();
    for (name, pol) in pols {
        let outcome = match find_magic_field(spec, pair, &pol, &name, search) {
            Ok(c) => InvarianceOutcome::Crossings(c.iter().map(|r| r.field_kv_cm).collect()),
            Err(MagicError::Degenerate { .. }) => InvarianceOutcome::Degenerate,
            Err(MagicError::NoSignChange { .. }) => InvarianceOutcome::NoCrossing,
            Err(e) => return Err(e),
        };
        entries.push(InvarianceEntry {
            polarization: name,
            outcome,
        });
    }
    let firsts: Vec<f64> = entries
        .iter()
        .filter_map(|e| match &e.outcome {
            InvarianceOutcome::Crossings(c) => c.first().copied(),
            _ => None,
        })
        .collect();
    let relative_spread = if firsts.is_empty() {
        0.0
    } else {
        let max = firsts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = firsts.iter().copied().fold(f64::INFINITY, f64::min);
        let mean = firsts.iter().sum::<f64>() / firsts.len() as f64;
        (max - min) / mean.abs()
    };
    Ok(InvarianceReport {
        entries,
        relative_spread,
    })
}

/// `arccos(1/sqrt(3))` in degrees.
pub fn magic_angle_degrees() -> f64 {
    (1.0 / 3f64.sqrt()).acos().to_degrees()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagicAngleReport {
    pub theta0_deg: f64,
    pub alpha_bar: f64,
    /// `alpha_eff(theta0)` per field (rows) and state (columns).
    pub alpha_at_theta0: Vec<Vec<f64>>,
    /// `max - min` over all entries of `alpha_at_theta0`.
    pub spread: f64,
    /// Angle where the pair crosses at each field, if any, degrees.
    pub crossing_angles_deg: Vec<Option<f64>>,
    /// True when every field has a crossing and they coincide to 1e-8 deg.
    pub common_angle: bool,
    /// True when the pair is equal at every angle (isotropic molecule).
    pub degenerate: bool,
}

/// Evaluates the pair at `cos^2 theta0 = 1/3` across fields, and locates the
/// crossing angle at each field to test whether it is common.
pub fn magic_angle(
    spec: &MoleculeSpec,
    pair: (StateLabel, StateLabel),
    fields_kv_cm: &[f64],
    nu_cm: f64,
    j_max: u32,
) -> Result<MagicAngleReport, MagicError> {
    let alpha = alpha_lambda_at(spec, nu_cm)?;
    magic_angle_with_alpha(spec, pair, fields_kv_cm, alpha, j_max)
}

pub fn magic_angle_with_alpha(
    spec: &MoleculeSpec,
    pair: (StateLabel, StateLabel),
    fields_kv_cm: &[f64],
    alpha: MolecularPolarizability,
    j_max: u32,
) -> Result<MagicAngleReport, MagicError> {
    let theta0_deg = magic_angle_degrees();
    let theta0 = PolarizationVector::linear((1.0f64 / 3.0).sqrt().acos());
    let m_max = pair.0.m.unsigned_abs().max(pair.1.m.unsigned_abs());
    let scale = alpha.isotropic().abs();

    let per_field = fields_kv_cm
        .par_iter()
        .map(|&field| -> Result<(Vec<f64>, Option<f64>, bool), MagicError> {
            let manifold = DressedManifold::new(spec, field, j_max, m_max).map_err(PolarizabilityError::from)?;
            let at = |pol: &PolarizationVector| -> Result<[f64; 2], PolarizabilityError> {
                Ok([
                    alpha_effective(&manifold, pair.0, alpha, pol)?,
                    alpha_effective(&manifold, pair.1, alpha, pol)?,
                ])
            };
            let values = at(&theta0)?.to_vec();
            let diff = |deg: f64| at(&PolarizationVector::linear_degrees(deg)).map(|v| v[0] - v[1]);

            let xs = linspace(0.0, 90.0, 91);
            let ys = xs.iter().map(|&t| diff(t)).collect::<Result<Vec<_>, _>>()?;
            let identical = ys.iter().all(|y| y.abs() < DEGENERATE_THRESHOLD * scale.max(f64::MIN_POSITIVE));
            if identical {
                return Ok((values, None, true));
            }
            let mut crossing = None;
            for i in 0..xs.len() - 1 {
                if ys[i] == 0.0 {
                    crossing = Some(xs[i]);
                    break;
                }
                if ys[i].signum() != ys[i + 1].signum() {
                    let (root, _) = brent(
                        |t| diff(t).map_err(|e| e.to_string()),
                        xs[i],
                        xs[i + 1],
                        ys[i],
                        ys[i + 1],
                        ROOT_TOLERANCE,
                        1e-300,
                    )
                    .map_err(MagicError::InvalidGrid)?;
                    crossing = Some(root);
                    break;
                }
            }
            Ok((values, crossing, false))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let degenerate = per_field.iter().all(|(_, _, d)| *d);
    let alpha_at_theta0: Vec<Vec<f64>> = per_field.iter().map(|(v, _, _)| v.clone()).collect();
    let crossing_angles_deg: Vec<Option<f64>> = per_field.iter().map(|(_, c, _)| *c).collect();
    let flat = alpha_at_theta0.iter().flatten().copied();
    let max = flat.clone().fold(f64::NEG_INFINITY, f64::max);
    let min = flat.fold(f64::INFINITY, f64::min);
    let common_angle = !degenerate
        && !crossing_angles_deg.is_empty()
        && crossing_angles_deg.iter().all(|c| c.is_some())
        && {
            let cs: Vec<f64> = crossing_angles_deg.iter().flatten().copied().collect();
            let hi = cs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = cs.iter().copied().fold(f64::INFINITY, f64::min);
            hi - lo < 1e-8
        };
    Ok(MagicAngleReport {
        theta0_deg,
        alpha_bar: alpha.isotropic(),
        alpha_at_theta0,
        spread: if max.is_finite() { max - min } else { 0.0 },
        crossing_angles_deg,
        common_angle,
        degenerate,
    })
}
