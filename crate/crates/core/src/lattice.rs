//! Three-beam optical lattice whose every beam is polarized at the magic
//! angle to the DC field (`z`), so each `M = 0` state sees the isotropic
//! polarizability from every beam.
//!
//! Beams carry distinct frequency offsets so that interference between them
//! averages out on the time scale of the trap motion.

use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default minimum ratios for `nu >> delta` and `delta >> f_mot`.
pub const DEFAULT_SCALE_RATIO: f64 = 100.0;

const TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamConfig {
    pub name: char,
    pub k_hat: [f64; 3],
    pub eps_hat: [f64; 3],
    /// Hz
    pub nu_hz: f64,
    /// Offset from beam `a`, Hz.
    pub delta_hz: f64,
}

impl BeamConfig {
    fn k(&self) -> Vector3<f64> {
        Vector3::from(self.k_hat)
    }

    fn eps(&self) -> Vector3<f64> {
        Vector3::from(self.eps_hat)
    }

    /// `|eps . z|`
    pub fn axial_projection(&self) -> f64 {
        self.eps_hat[2].abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleThresholds {
    /// Required `nu / delta`.
    pub nu_over_delta: f64,
    /// Required `delta / f_mot` for every beat note.
    pub delta_over_f_mot: f64,
}

impl Default for ScaleThresholds {
    fn default() -> Self {
        ScaleThresholds {
            nu_over_delta: DEFAULT_SCALE_RATIO,
            delta_over_f_mot: DEFAULT_SCALE_RATIO,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticePlan {
    pub beams: [BeamConfig; 3],
    /// Trap motional frequency, Hz.
    pub f_mot_hz: f64,
    pub thresholds: ScaleThresholds,
    /// Filled by [`validate_plan`]; empty when the plan is valid.
    pub violations: Vec<Violation>,
}

impl LatticePlan {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    /// Smallest beat frequency between any two beams, Hz.
    pub fn min_beat_hz(&self) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..3 {
            for j in i + 1..3 {
                m = m.min((self.beams[i].nu_hz - self.beams[j].nu_hz).abs());
            }
        }
        m
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NotUnit { beam: char, vector: String, norm: f64 },
    NotTransverse { beam: char, dot: f64 },
    NotOrthogonal { beams: (char, char), dot: f64 },
    NotMagicAngle { beam: char, projection: f64 },
    FrequencyMismatch { beam: char, expected_hz: f64, actual_hz: f64 },
    Scale { inequality: String, ratio: f64, required: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotUnit { beam, vector, norm } => write!(f, "beam {beam}: {vector} has norm {norm}"),
            Violation::NotTransverse { beam, dot } => write!(f, "beam {beam}: eps.k = {dot}"),
            Violation::NotOrthogonal { beams, dot } => write!(f, "beams {} and {}: k.k = {dot}", beams.0, beams.1),
            Violation::NotMagicAngle { beam, projection } => {
                write!(f, "beam {beam}: |eps.z| = {projection}, expected 1/sqrt(3)")
            }
            Violation::FrequencyMismatch {
                beam,
                expected_hz,
                actual_hz,
            } => write!(f, "beam {beam}: nu - delta = {actual_hz} Hz, expected {expected_hz} Hz"),
            Violation::Scale {
                inequality,
                ratio,
                required,
            } => write!(f, "{inequality} violated: ratio {ratio} < {required}"),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LatticeError {
    #[error("invalid lattice plan: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

/// Beams `a` along `y`, `b` along `(x+z)/sqrt(2)`, `c` along `(x-z)/sqrt(2)`,
/// with polarizations `sqrt(2/3) x + sqrt(1/3) z`, `sqrt(2/3) k_c + sqrt(1/3) y`
/// and `sqrt(2/3) k_b + sqrt(1/3) y`. Frequencies in Hz.
pub fn plan_three_beam_lattice(nu_a_hz: f64, delta_b_hz: f64, delta_c_hz: f64, f_mot_hz: f64) -> Result<LatticePlan, LatticeError> {
    plan_three_beam_lattice_with(nu_a_hz, delta_b_hz, delta_c_hz, f_mot_hz, ScaleThresholds::default())
}

pub fn plan_three_beam_lattice_with(
    nu_a_hz: f64,
    delta_b_hz: f64,
    delta_c_hz: f64,
    f_mot_hz: f64,
    thresholds: ScaleThresholds,
) -> Result<LatticePlan, LatticeError> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let (r23, r13) = ((2.0f64 / 3.0).sqrt(), (1.0f64 / 3.0).sqrt());
    let k_a = Vector3::new(0.0, 1.0, 0.0);
    let k_b = Vector3::new(s, 0.0, s);
    let k_c = Vector3::new(s, 0.0, -s);
    let y = Vector3::new(0.0, 1.0, 0.0);
    let eps_a = Vector3::new(r23, 0.0, r13);
    let eps_b = k_c * r23 + y * r13;
    let eps_c = k_b * r23 + y * r13;

    let beam = |name, k: Vector3<f64>, e: Vector3<f64>, delta: f64| BeamConfig {
        name,
        k_hat: k.into(),
        eps_hat: e.into(),
        nu_hz: nu_a_hz + delta,
        delta_hz: delta,
    };
    let mut plan = LatticePlan {
        beams: [
            beam('a', k_a, eps_a, 0.0),
            beam('b', k_b, eps_b, delta_b_hz),
            beam('c', k_c, eps_c, delta_c_hz),
        ],
        f_mot_hz,
        thresholds,
        violations: Vec::new(),
    };
    let violations = validate_plan(&plan);
    if !violations.is_empty() {
        return Err(LatticeError::Invalid(violations));
    }
    plan.violations = violations;
    Ok(plan)
}

/// Every violated invariant of the plan; empty when valid.
pub fn validate_plan(plan: &LatticePlan) -> Vec<Violation> {
    let mut out = Vec::new();
    let cos_theta0 = (1.0f64 / 3.0).sqrt();
    for b in &plan.beams {
        for (label, v) in [("k_hat", b.k()), ("eps_hat", b.eps())] {
            let norm = v.norm();
            if (norm - 1.0).abs() > TOL {
                out.push(Violation::NotUnit {
                    beam: b.name,
                    vector: label.into(),
                    norm,
                });
            }
        }
        let dot = b.eps().dot(&b.k());
        if dot.abs() > TOL {
            out.push(Violation::NotTransverse { beam: b.name, dot });
        }
        let projection = b.axial_projection();
        if (projection - cos_theta0).abs() > TOL {
            out.push(Violation::NotMagicAngle { beam: b.name, projection });
        }
    }
    for i in 0..3 {
        for j in i + 1..3 {
            let dot = plan.beams[i].k().dot(&plan.beams[j].k());
            if dot.abs() > TOL {
                out.push(Violation::NotOrthogonal {
                    beams: (plan.beams[i].name, plan.beams[j].name),
                    dot,
                });
            }
        }
    }

    let nu_a = plan.beams[0].nu_hz;
    for b in &plan.beams[1..] {
        let actual = b.nu_hz - b.delta_hz;
        if (actual - nu_a).abs() > TOL * nu_a.abs() {
            out.push(Violation::FrequencyMismatch {
                beam: b.name,
                expected_hz: nu_a,
                actual_hz: actual,
            });
        }
    }

    let t = plan.thresholds;
    let max_delta = plan.beams.iter().map(|b| b.delta_hz.abs()).fold(0.0, f64::max);
    let nu_ratio = plan.beams.iter().map(|b| b.nu_hz).fold(f64::INFINITY, f64::min) / max_delta;
    if !(nu_ratio >= t.nu_over_delta) {
        out.push(Violation::Scale {
            inequality: "nu >> delta".into(),
            ratio: nu_ratio,
            required: t.nu_over_delta,
        });
    }
    let beat_ratio = plan.min_beat_hz() / plan.f_mot_hz;
    if !(beat_ratio >= t.delta_over_f_mot) {
        out.push(Violation::Scale {
            inequality: "min(delta_b, delta_c, |delta_b - delta_c|) >> f_mot".into(),
            ratio: beat_ratio,
            required: t.delta_over_f_mot,
        });
    }
    out
}
