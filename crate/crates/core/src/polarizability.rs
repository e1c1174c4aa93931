//! Lab-frame dynamic polarizability of Stark-dressed rotational states.
//!
//! Far from resonance the frequency dependence sits entirely in the two
//! molecule-frame numbers `alpha_par` (Σ-Σ transitions, Λ = 0) and `alpha_perp`
//! (Σ-Π transitions, Λ = ±1). The state dependence is then pure geometry, and
//! the tensor is computed two independent ways:
//!
//! * [`alpha_tensor_sos`] sums products of rotational transition factors over
//!   every excited rotational level `(J_e, M_e, Λ)`;
//! * [`alpha_tensor_closed_form`] uses the closure identity
//!   `alpha = alpha_perp 1 + (alpha_par - alpha_perp) n n^T` with the molecular
//!   axis `n` expanded in rank-2 Racah harmonics.
//!
//! For `|M| > 0` the states `|J~ M>` and `|J~ -M>` are degenerate in the DC
//! field; [`resolve_degenerate`] diagonalizes the light-shift operator inside
//! that pair.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angular::{cart_to_spherical, f_factor, Branch, Cartesian};
use crate::stark::{dressed_c2, DressedManifold, StarkError, StarkEigensystem};
use crate::units::{intensity_from_peak_field, MolecularPolarizability, MHZ_PER_W_CM2_PER_AU_POLARIZABILITY};

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);
const I: C = C::new(0.0, 1.0);

#[derive(Debug, Error, PartialEq)]
pub enum PolarizabilityError {
    #[error(transparent)]
    Stark(#[from] StarkError),
    #[error("polarization vector has norm {0}, expected 1")]
    NotUnit(f64),
    #[error("state {label} does not belong to the M = {m} block")]
    WrongBlock { label: StateLabel, m: i32 },
    #[error("invalid state label '{0}'")]
    BadLabel(String),
    #[error("excited-state cutoff J_e = {je_max} must be at least J_max + 1 = {needed}")]
    ExcitedCutoff { je_max: u32, needed: u32 },
}

/// Complex unit polarization vector of the trapping light, Cartesian lab frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationVector(Vector3<C>);

impl PolarizationVector {
    pub fn new(v: Vector3<C>) -> Result<Self, PolarizabilityError> {
        let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(PolarizabilityError::NotUnit(norm));
        }
        Ok(PolarizationVector(v))
    }

    /// `cos(theta) z + sin(theta) x`, theta in radians.
    pub fn linear(theta: f64) -> Self {
        PolarizationVector(Vector3::new(C::new(theta.sin(), 0.0), ZERO, C::new(theta.cos(), 0.0)))
    }

    pub fn linear_degrees(theta_deg: f64) -> Self {
        Self::linear(theta_deg.to_radians())
    }

    pub fn z() -> Self {
        PolarizationVector(Vector3::new(ZERO, ZERO, ONE))
    }

    pub fn x() -> Self {
        PolarizationVector(Vector3::new(ONE, ZERO, ZERO))
    }

    /// Real unit vector.
    pub fn real(v: Vector3<f64>) -> Result<Self, PolarizabilityError> {
        Self::new(v.map(|x| C::new(x, 0.0)))
    }

    /// `sigma+ = -(x + i y)/sqrt(2)`, `sigma- = (x - i y)/sqrt(2)`.
    pub fn circular(plus: bool) -> Self {
        let s = FRAC_1_SQRT_2;
        if plus {
            PolarizationVector(Vector3::new(C::new(-s, 0.0), C::new(0.0, -s), ZERO))
        } else {
            PolarizationVector(Vector3::new(C::new(s, 0.0), C::new(0.0, -s), ZERO))
        }
    }

    pub fn components(&self) -> &Vector3<C> {
        &self.0
    }

    pub fn is_real(&self) -> bool {
        self.0.iter().all(|c| c.im == 0.0)
    }
}

/// Adiabatic label `(J~, M, branch)` of a dressed state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateLabel {
    pub j_tilde: u32,
    pub m: i32,
    pub branch: Branch,
}

impl StateLabel {
    /// Branch is forced to `None` for `M = 0`; a `+`/`-` branch stores `|M|`.
    pub fn new(j_tilde: u32, m: i32, branch: Branch) -> Result<Self, PolarizabilityError> {
        if m.unsigned_abs() > j_tilde {
            return Err(PolarizabilityError::BadLabel(format!("{j_tilde},{m}")));
        }
        let (m, branch) = match (m, branch) {
            (0, _) => (0, Branch::None),
            (m, Branch::None) => (m, Branch::None),
            (m, b) => (m.abs(), b),
        };
        Ok(StateLabel { j_tilde, m, branch })
    }

    pub fn m0(j_tilde: u32) -> Self {
        StateLabel {
            j_tilde,
            m: 0,
            branch: Branch::None,
        }
    }

    /// Coefficients on `(|J~,+|M|>, |J~,-|M|>)`.
    pub fn subspace_state(&self) -> SubspaceState {
        let s = FRAC_1_SQRT_2;
        match (self.m, self.branch) {
            (0, _) => SubspaceState::new(ONE, ZERO),
            (_, Branch::Plus) => SubspaceState::new(C::new(s, 0.0), C::new(s, 0.0)),
            (_, Branch::Minus) => SubspaceState::new(C::new(s, 0.0), C::new(-s, 0.0)),
            (m, Branch::None) if m > 0 => SubspaceState::new(ONE, ZERO),
            _ => SubspaceState::new(ZERO, ONE),
        }
    }
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.j_tilde, self.m)?;
        match self.branch {
            Branch::Plus => write!(f, ",+"),
            Branch::Minus => write!(f, ",-"),
            Branch::None => Ok(()),
        }
    }
}

impl FromStr for StateLabel {
    type Err = PolarizabilityError;

    /// `"J,M"` or `"J,M,+"` / `"J,M,-"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PolarizabilityError::BadLabel(s.to_string());
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() < 2 || parts.len() > 3 {
            return Err(bad());
        }
        let j: u32 = parts[0].parse().map_err(|_| bad())?;
        let m: i32 = parts[1].parse().map_err(|_| bad())?;
        let branch = match parts.get(2) {
            None => Branch::None,
            Some(&"+") => Branch::Plus,
            Some(&"-") | Some(&"−") => Branch::Minus,
            Some(_) => return Err(bad()),
        };
        if branch != Branch::None && m == 0 {
            return Err(bad());
        }
        StateLabel::new(j, m, branch).map_err(|_| bad())
    }
}

/// A state in the span of `|J~,+|M|>` and `|J~,-|M|>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubspaceState {
    pub up: C,
    pub down: C,
}

impl SubspaceState {
    pub fn new(up: C, down: C) -> Self {
        SubspaceState { up, down }
    }

    fn coeffs(&self) -> [C; 2] {
        [self.up, self.down]
    }
}

/// 3x3 lab-frame polarizability tensor of one state, atomic units.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizabilityTensor {
    pub components: Matrix3<C>,
    pub label: StateLabel,
    pub field_kv_cm: f64,
}

impl PolarizabilityTensor {
    /// `sum_{s,s'} alpha_{s s'} eps_s eps*_{s'}`; real for Hermitian tensors.
    pub fn effective(&self, pol: &PolarizationVector) -> f64 {
        contract(&self.components, pol).re
    }

    pub fn get(&self, a: Cartesian, b: Cartesian) -> C {
        self.components[(a.index(), b.index())]
    }

    pub fn diagonal(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.components[(i, i)].re)
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (self.components - self.components.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest off-diagonal or imaginary magnitude.
    pub fn non_real_diagonal_part(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..3 {
            for c in 0..3 {
                let v = self.components[(r, c)];
                let off = if r == c { v.im.abs() } else { v.norm() };
                worst = worst.max(off);
            }
        }
        worst
    }

    /// `max |a - b| / max |a|` over components.
    pub fn relative_difference(&self, other: &PolarizabilityTensor) -> f64 {
        let scale = self.components.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let diff = (self.components - other.components)
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        if scale == 0.0 {
            diff
        } else {
            diff / scale
        }
    }
}

fn contract(t: &Matrix3<C>, pol: &PolarizationVector) -> C {
    let e = pol.components();
    let mut acc = ZERO;
    for s in 0..3 {
        for sp in 0..3 {
            acc += t[(s, sp)] * e[s] * e[sp].conj();
        }
    }
    acc
}

fn check_block(sys: &StarkEigensystem, label: &StateLabel) -> Result<(), PolarizabilityError> {
    if sys.m.abs() != label.m.abs() {
        return Err(PolarizabilityError::WrongBlock { label: *label, m: sys.m });
    }
    Ok(())
}

/// `(+|M|, -|M|)` eigensystems built from either member of the pair.
fn pair_systems(sys: &StarkEigensystem) -> [StarkEigensystem; 2] {
    if sys.m >= 0 {
        [sys.clone(), sys.mirrored()]
    } else {
        [sys.mirrored(), sys.clone()]
    }
}

/// `<psi_i| n_s n_s' |psi_j>` with `n` the molecular axis, from `C_2q` elements.
fn axis_geometry(
    bra: &StarkEigensystem,
    ket: &StarkEigensystem,
    j_tilde: u32,
) -> Result<Matrix3<C>, StarkError> {
    let overlap = if bra.m == ket.m { 1.0 } else { 0.0 };
    let c = |q: i32| dressed_c2(bra, j_tilde, ket, j_tilde, q);
    let (c0, c1, cm1, c2, cm2) = (c(0)?, c(1)?, c(-1)?, c(2)?, c(-2)?);
    let r6 = 6f64.sqrt();

    let zz = C::new((overlap + 2.0 * c0) / 3.0, 0.0);
    let transverse = (overlap - c0) / 3.0;
    let xx = C::new(transverse + (c2 + cm2) / r6, 0.0);
    let yy = C::new(transverse - (c2 + cm2) / r6, 0.0);
    let xy = -I * ((c2 - cm2) / r6);
    let xz = C::new(-(c1 - cm1) / r6, 0.0);
    let yz = I * ((c1 + cm1) / r6);

    Ok(Matrix3::new(xx, xy, xz, xy, yy, yz, xz, yz, zz))
}

/// Closed-form tensor blocks `<psi_i|alpha|psi_j>` over the `(+|M|, -|M|)` pair.
/// For `M = 0` only the `[0][0]` block is meaningful.
pub fn closed_form_blocks(
    sys: &StarkEigensystem,
    j_tilde: u32,
    alpha: MolecularPolarizability,
) -> Result<[[Matrix3<C>; 2]; 2], PolarizabilityError> {
    let pair = pair_systems(sys);
    let perp = alpha.perpendicular;
    let aniso = alpha.anisotropy();
    let mut out = [[Matrix3::zeros(); 2]; 2];
    let n = if sys.m == 0 { 1 } else { 2 };
    for i in 0..n {
        for j in 0..n {
            let geom = axis_geometry(&pair[i], &pair[j], j_tilde)?;
            let iso = if i == j { Matrix3::identity() * C::new(perp, 0.0) } else { Matrix3::zeros() };
            out[i][j] = iso + geom * C::new(aniso, 0.0);
        }
    }
    Ok(out)
}

fn combine(blocks: &[[Matrix3<C>; 2]; 2], state: &SubspaceState, m: i32) -> Matrix3<C> {
    if m == 0 {
        return blocks[0][0];
    }
    let c = state.coeffs();
    let mut t = Matrix3::zeros();
    for i in 0..2 {
        for j in 0..2 {
            t += blocks[i][j] * (c[i].conj() * c[j]);
        }
    }
    t
}

/// Polarizability tensor of a labelled state via the rank-2 closure route.
pub fn alpha_tensor_closed_form(
    sys: &StarkEigensystem,
    label: StateLabel,
    alpha: MolecularPolarizability,
) -> Result<PolarizabilityTensor, PolarizabilityError> {
    check_block(sys, &label)?;
    let blocks = closed_form_blocks(sys, label.j_tilde, alpha)?;
    Ok(PolarizabilityTensor {
        components: combine(&blocks, &label.subspace_state(), label.m),
        label,
        field_kv_cm: sys.field_kv_cm,
    })
}

/// Closed-form tensor of an arbitrary state in the `(+|M|, -|M|)` pair.
pub fn alpha_tensor_for_state(
    sys: &StarkEigensystem,
    j_tilde: u32,
    state: SubspaceState,
    alpha: MolecularPolarizability,
) -> Result<Matrix3<C>, PolarizabilityError> {
    let blocks = closed_form_blocks(sys, j_tilde, alpha)?;
    Ok(combine(&blocks, &state, sys.m))
}

/// Polarizability tensor via the explicit sum over excited rotational levels
/// `J_e <= je_max`, `M_e`, and `Λ ∈ {-1, 0, +1}`.
pub fn alpha_tensor_sos(
    sys: &StarkEigensystem,
    label: StateLabel,
    alpha: MolecularPolarizability,
    je_max: u32,
) -> Result<PolarizabilityTensor, PolarizabilityError> {
    alpha_tensor_sos_with(sys, label, alpha, je_max, &[-1, 0, 1])
}

/// [`alpha_tensor_sos`] restricted to a subset of excited-state `Λ` values.
pub fn alpha_tensor_sos_with(
    sys: &StarkEigensystem,
    label: StateLabel,
    alpha: MolecularPolarizability,
    je_max: u32,
    lambdas: &[i32],
) -> Result<PolarizabilityTensor, PolarizabilityError> {
    check_block(sys, &label)?;
    if je_max < sys.j_max + 1 {
        return Err(PolarizabilityError::ExcitedCutoff {
            je_max,
            needed: sys.j_max + 1,
        });
    }
    let u = sys.coefficients(label.j_tilde)?;
    let basis: Vec<i32> = sys.basis().collect();
    let m = label.m;
    let m_abs = m.abs();

    let mut t: Matrix3<C> = Matrix3::zeros();
    for &lambda in lambdas {
        let weight = if lambda == 0 { alpha.parallel } else { alpha.perpendicular };
        for je in lambda.abs()..=je_max as i32 {
            for me in -je..=je {
                // d_q changes M by at most one
                if (me - m_abs).abs() > 1 && (me + m_abs).abs() > 1 {
                    continue;
                }
                let mut amp = Vector3::<C>::zeros();
                for (cj, &j) in u.iter().zip(&basis) {
                    if *cj == 0.0 || (j - je).abs() > 1 {
                        continue;
                    }
                    for sigma in Cartesian::ALL {
                        amp[sigma.index()] += f_factor(je, me, lambda, j, m, label.branch, sigma) * *cj;
                    }
                }
                if amp.iter().all(|a| a.norm_sqr() == 0.0) {
                    continue;
                }
                for s in 0..3 {
                    for sp in 0..3 {
                        t[(s, sp)] += amp[s] * amp[sp].conj() * weight;
                    }
                }
            }
        }
    }
    Ok(PolarizabilityTensor {
        components: t,
        label,
        field_kv_cm: sys.field_kv_cm,
    })
}

/// Light intensity specification for [`stark_shift`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LightAmplitude {
    /// W/cm^2
    Intensity(f64),
    /// Peak electric-field amplitude `|E_o(0)|`, V/m.
    PeakField(f64),
}

impl LightAmplitude {
    pub fn intensity_w_cm2(&self) -> f64 {
        match *self {
            LightAmplitude::Intensity(i) => i,
            LightAmplitude::PeakField(e) => intensity_from_peak_field(e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarkShift {
    /// Energy shift `dE / h`, MHz.
    pub delta_e_mhz: f64,
    /// `sum alpha_{s s'} eps_s eps*_{s'}`, atomic units.
    pub alpha_effective: f64,
    pub intensity_w_cm2: f64,
}

/// AC Stark shift `dE = -|E_o|^2/4 sum alpha_{s s'} eps_s eps*_{s'}`.
pub fn stark_shift(
    tensor: &PolarizabilityTensor,
    pol: &PolarizationVector,
    light: LightAmplitude,
) -> StarkShift {
    let alpha_effective = tensor.effective(pol);
    let intensity = light.intensity_w_cm2();
    StarkShift {
        delta_e_mhz: -alpha_effective * MHZ_PER_W_CM2_PER_AU_POLARIZABILITY * intensity,
        alpha_effective,
        intensity_w_cm2: intensity,
    }
}

/// Spherical irreducible components of a Cartesian rank-2 tensor.
///
/// Normalization is that of the coupled product `(u ⊗ v)^k_q` built with
/// Clebsch-Gordan coefficients: `scalar = -Tr/sqrt(3)`,
/// `vector_q = i sqrt(2) w_q` with `w = (T_yz - T_zy, T_zx - T_xz, T_xy - T_yx)/2`,
/// `tensor_0 = (2 S_zz - S_xx - S_yy)/sqrt(6)` for the symmetric part `S`.
/// Arrays run from `q = -k` to `q = +k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrreducibleParts {
    pub scalar: C,
    pub vector: [C; 3],
    pub tensor: [C; 5],
}

impl IrreducibleParts {
    /// `Tr/3`, the isotropic polarizability.
    pub fn isotropic(&self) -> C {
        -self.scalar / 3f64.sqrt()
    }

    pub fn rank_norms(&self) -> [f64; 3] {
        let n = |s: &[C]| s.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        [self.scalar.norm(), n(&self.vector), n(&self.tensor)]
    }

    pub fn recompose(&self) -> Matrix3<C> {
        let iso = self.isotropic();
        let w = crate::angular::spherical_to_cart(&self.vector) / (I * 2f64.sqrt());
        let [tm2, tm1, t0, t1, t2] = self.tensor;
        let szz = t0 * (2.0f64 / 3.0).sqrt();
        let diff = t2 + tm2;
        let sxx = (-szz + diff) * 0.5;
        let syy = (-szz - diff) * 0.5;
        let sxy = (t2 - tm2) / (I * 2.0);
        let sxz = (tm1 - t1) * 0.5;
        let syz = I * (t1 + tm1) * 0.5;
        Matrix3::new(
            iso + sxx,
            sxy + w.z,
            sxz - w.y,
            sxy - w.z,
            iso + syy,
            syz + w.x,
            sxz + w.y,
            syz - w.x,
            iso + szz,
        )
    }
}

pub fn irreducible_decompose(t: &Matrix3<C>) -> IrreducibleParts {
    let trace = t[(0, 0)] + t[(1, 1)] + t[(2, 2)];
    let w = Vector3::new(
        (t[(1, 2)] - t[(2, 1)]) * 0.5,
        (t[(2, 0)] - t[(0, 2)]) * 0.5,
        (t[(0, 1)] - t[(1, 0)]) * 0.5,
    );
    let vector = cart_to_spherical(&w).map(|c| c * I * 2f64.sqrt());

    let iso = trace / 3.0;
    let s = |a: usize, b: usize| (t[(a, b)] + t[(b, a)]) * 0.5 - if a == b { iso } else { ZERO };
    let (sxx, syy, szz) = (s(0, 0), s(1, 1), s(2, 2));
    let (sxy, sxz, syz) = (s(0, 1), s(0, 2), s(1, 2));
    let tensor = [
        (sxx - syy - I * sxy * 2.0) * 0.5,
        sxz - I * syz,
        (szz * 2.0 - sxx - syy) / 6f64.sqrt(),
        -(sxz + I * syz),
        (sxx - syy + I * sxy * 2.0) * 0.5,
    ];
    IrreducibleParts {
        scalar: -trace / 3f64.sqrt(),
        vector,
        tensor,
    }
}

/// Irreducible parts of `eps ⊗ eps*` with the rank-1 sign flipped, so that
/// [`contract_irreducible`] reproduces the Cartesian contraction.
pub fn polarization_parts(pol: &PolarizationVector) -> IrreducibleParts {
    let e = pol.components();
    let p = Matrix3::from_fn(|r, c| e[r] * e[c].conj());
    let mut parts = irreducible_decompose(&p);
    parts.vector = parts.vector.map(|c| -c);
    parts
}

/// `sum_k sum_q (-1)^q alpha^k_q (eps eps)^k_{-q}`.
pub fn contract_irreducible(alpha: &IrreducibleParts, pol: &IrreducibleParts) -> C {
    let sum = |a: &[C], b: &[C]| {
        let k = (a.len() as i32 - 1) / 2;
        (-k..=k)
            .map(|q| {
                let sign = if q.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                a[(q + k) as usize] * b[(k - q) as usize] * sign
            })
            .sum::<C>()
    };
    alpha.scalar * pol.scalar + sum(&alpha.vector, &pol.vector) + sum(&alpha.tensor, &pol.tensor)
}

/// One eigenstate of the light-shift operator inside a degenerate `±M` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchSolution {
    pub state: SubspaceState,
    /// `Plus`/`Minus` when the eigenvector is `(|M> ± |-M>)/sqrt(2)` up to a
    /// phase, `None` otherwise.
    pub branch: Branch,
    pub alpha_effective: f64,
    pub tensor: Matrix3<C>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegenerateSplit {
    /// Ascending in effective polarizability.
    pub branches: [BranchSolution; 2],
    /// True when the 2x2 light-shift operator is proportional to the identity;
    /// the branch vectors are then an arbitrary orthonormal pair.
    pub degenerate: bool,
}

impl DegenerateSplit {
    pub fn splitting(&self) -> f64 {
        self.branches[1].alpha_effective - self.branches[0].alpha_effective
    }

    pub fn branch(&self, branch: Branch) -> Option<&BranchSolution> {
        self.branches.iter().find(|b| b.branch == branch)
    }
}

fn classify(state: &SubspaceState) -> Branch {
    if state.up.norm() < 1e-12 {
        return Branch::None;
    }
    let ratio = state.down / state.up;
    if (ratio - ONE).norm() < 1e-8 {
        Branch::Plus
    } else if (ratio + ONE).norm() < 1e-8 {
        Branch::Minus
    } else {
        Branch::None
    }
}

/// Diagonalizes the light-shift operator `sum alpha_{s s'} eps_s eps*_{s'}`
/// within `{|J~,+|M|>, |J~,-|M|>}` (first-order degenerate perturbation theory).
pub fn resolve_degenerate(
    sys: &StarkEigensystem,
    j_tilde: u32,
    alpha: MolecularPolarizability,
    pol: &PolarizationVector,
) -> Result<DegenerateSplit, PolarizabilityError> {
    let blocks = closed_form_blocks(sys, j_tilde, alpha)?;
    let w = |i: usize, j: usize| contract(&blocks[i][j], pol);
    let a = w(0, 0).re;
    let d = w(1, 1).re;
    let b = w(0, 1);

    let mean = 0.5 * (a + d);
    let half_gap = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    let scale = a.abs().max(d.abs()).max(1e-300);
    let degenerate = half_gap <= 1e-13 * scale;

    let states: [SubspaceState; 2] = if degenerate || sys.m == 0 {
        [SubspaceState::new(ONE, ZERO), SubspaceState::new(ZERO, ONE)]
    } else if b.norm() == 0.0 {
        if a <= d {
            [SubspaceState::new(ONE, ZERO), SubspaceState::new(ZERO, ONE)]
        } else {
            [SubspaceState::new(ZERO, ONE), SubspaceState::new(ONE, ZERO)]
        }
    } else {
        [mean - half_gap, mean + half_gap].map(|lambda| {
            // (W - lambda) v = 0 with v = (b, lambda - a)
            let v = [b, C::new(lambda - a, 0.0)];
            let norm = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
            let phase = if v[0].norm() > 0.0 { v[0].conj() / v[0].norm() } else { ONE };
            SubspaceState::new(v[0] * phase / norm, v[1] * phase / norm)
        })
    };

    let branches = states.map(|state| {
        let tensor = combine(&blocks, &state, sys.m);
        BranchSolution {
            branch: if degenerate { Branch::None } else { classify(&state) },
            alpha_effective: contract(&tensor, pol).re,
            state,
            tensor,
        }
    });
    Ok(DegenerateSplit { branches, degenerate })
}

/// Effective polarizability of a labelled state for one polarization.
///
/// A `+`/`-` label selects the light-shift eigenvector with the larger overlap
/// on `(|M> ± |-M>)/sqrt(2)`; when the pair is exactly degenerate the fixed
/// combination is used. Labels without a branch are evaluated as written.
pub fn alpha_effective(
    manifold: &DressedManifold,
    label: StateLabel,
    alpha: MolecularPolarizability,
    pol: &PolarizationVector,
) -> Result<f64, PolarizabilityError> {
    let sys = manifold.system(label.m)?;
    if label.m == 0 || label.branch == Branch::None {
        let sys = if label.m < 0 { sys.mirrored() } else { sys.clone() };
        return Ok(alpha_tensor_closed_form(&sys, label, alpha)?.effective(pol));
    }
    let split = resolve_degenerate(sys, label.j_tilde, alpha, pol)?;
    if split.degenerate {
        return Ok(alpha_tensor_closed_form(sys, label, alpha)?.effective(pol));
    }
    let target = label.subspace_state();
    let overlap = |s: &SubspaceState| (target.up.conj() * s.up + target.down.conj() * s.down).norm();
    let best = if overlap(&split.branches[1].state) > overlap(&split.branches[0].state) + 1e-12 {
        &split.branches[1]
    } else {
        &split.branches[0]
    };
    Ok(best.alpha_effective)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleScanRow {
    pub theta_deg: f64,
    /// Effective polarizability per requested state, atomic units.
    pub alpha: Vec<f64>,
}

/// `alpha_eff(theta)` for linear polarization `cos(theta) z + sin(theta) x`.
pub fn alpha_angle_scan(
    manifold: &DressedManifold,
    labels: &[StateLabel],
    alpha: MolecularPolarizability,
    thetas_deg: &[f64],
) -> Result<Vec<AngleScanRow>, PolarizabilityError> {
    let tensors = labels
        .iter()
        .map(|l| alpha_tensor_closed_form(manifold.system(l.m)?, *l, alpha))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(thetas_deg
        .iter()
        .map(|&theta_deg| {
            let pol = PolarizationVector::linear_degrees(theta_deg);
            AngleScanRow {
                theta_deg,
                alpha: tensors.iter().map(|t| t.effective(&pol)).collect(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stark::solve;
    use crate::units::bundled_molecule;
    use approx::assert_abs_diff_eq;

    fn alpha() -> MolecularPolarizability {
        MolecularPolarizability::new(450.0, 170.0)
    }

    #[test]
    fn zero_field_ground_state_is_isotropic() {
        let spec = bundled_molecule("KRb").unwrap();
        let sys = solve(&spec, 0.0, 0, 10).unwrap();
        let t = alpha_tensor_closed_form(&sys, StateLabel::m0(0), alpha()).unwrap();
        let bar = alpha().isotropic();
        for r in 0..3 {
            for c in 0..3 {
                let expect = if r == c { bar } else { 0.0 };
                assert_abs_diff_eq!(t.components[(r, c)].re, expect, epsilon = 1e-12);
                assert_eq!(t.components[(r, c)].im, 0.0);
            }
        }
    }

    #[test]
    fn zero_field_j1_m0() {
        let spec = bundled_molecule("KRb").unwrap();
        let sys = solve(&spec, 0.0, 0, 10).unwrap();
        let a = alpha();
        let t = alpha_tensor_closed_form(&sys, StateLabel::m0(1), a).unwrap();
        let [xx, yy, zz] = t.diagonal();
        assert_abs_diff_eq!(zz, a.perpendicular + 0.6 * a.anisotropy(), epsilon = 1e-12);
        assert_abs_diff_eq!(xx, a.perpendicular + 0.2 * a.anisotropy(), epsilon = 1e-12);
        assert_abs_diff_eq!(yy, xx, epsilon = 1e-12);
    }

    #[test]
    fn isotropic_molecule_has_no_geometry() {
        let spec = bundled_molecule("RbCs").unwrap();
        let a = MolecularPolarizability::new(300.0, 300.0);
        for field in [0.0, 1.0, 4.0] {
            let sys = solve(&spec, field, 1, 10).unwrap();
            for branch in [Branch::Plus, Branch::Minus, Branch::None] {
                let label = StateLabel::new(2, 1, branch).unwrap();
                let t = alpha_tensor_closed_form(&sys, label, a).unwrap();
                let diff = (t.components - Matrix3::identity() * C::new(300.0, 0.0)).camax();
                assert!(diff < 1e-12);
            }
        }
    }

    #[test]
    fn shift_of_isotropic_tensor() {
        let spec = bundled_molecule("KRb").unwrap();
        let sys = solve(&spec, 0.0, 0, 10).unwrap();
        let t = alpha_tensor_closed_form(&sys, StateLabel::m0(0), alpha()).unwrap();
        for pol in [
            PolarizationVector::z(),
            PolarizationVector::x(),
            PolarizationVector::circular(true),
            PolarizationVector::linear(0.3),
        ] {
            let s = stark_shift(&t, &pol, LightAmplitude::Intensity(1000.0));
            assert_abs_diff_eq!(s.alpha_effective, alpha().isotropic(), epsilon = 1e-12);
            assert_abs_diff_eq!(
                s.delta_e_mhz,
                -alpha().isotropic() * 4.68645e-8 * 1000.0,
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn linear_z_picks_alpha_zz() {
        let spec = bundled_molecule("KRb").unwrap();
        let sys = solve(&spec, 7.0, 0, 10).unwrap();
        let t = alpha_tensor_closed_form(&sys, StateLabel::m0(1), alpha()).unwrap();
        assert_eq!(t.effective(&PolarizationVector::z()), t.diagonal()[2]);
        assert_abs_diff_eq!(t.effective(&PolarizationVector::linear_degrees(90.0)), t.diagonal()[0], epsilon = 1e-12);
    }

    #[test]
    fn peak_field_and_intensity_agree() {
        let spec = bundled_molecule("KRb").unwrap();
        let sys = solve(&spec, 2.0, 0, 10).unwrap();
        let t = alpha_tensor_closed_form(&sys, StateLabel::m0(0), alpha()).unwrap();
        let e0 = 1e5;
        let i = intensity_from_peak_field(e0);
        let a = stark_shift(&t, &PolarizationVector::z(), LightAmplitude::PeakField(e0));
        let b = stark_shift(&t, &PolarizationVector::z(), LightAmplitude::Intensity(i));
        assert_eq!(a.delta_e_mhz, b.delta_e_mhz);
    }

    #[test]
    fn polarization_constructors_are_unit() {
        for p in [
            PolarizationVector::circular(true),
            PolarizationVector::circular(false),
            PolarizationVector::linear(1.1),
        ] {
            assert!(PolarizationVector::new(*p.components()).is_ok());
        }
        assert!(PolarizationVector::linear(0.7).is_real());
        assert!(!PolarizationVector::circular(true).is_real());
        assert!(matches!(
            PolarizationVector::real(Vector3::new(1.0, 1.0, 0.0)),
            Err(PolarizabilityError::NotUnit(_))
        ));
    }

    #[test]
    fn label_parsing() {
        let l: StateLabel = "1,1,+".parse().unwrap();
        assert_eq!(l, StateLabel::new(1, 1, Branch::Plus).unwrap());
        assert_eq!(l.to_string(), "1,1,+");
        let l: StateLabel = "1,-1".parse().unwrap();
        assert_eq!(l.m, -1);
        assert_eq!("0,0".parse::<StateLabel>().unwrap(), StateLabel::m0(0));
        assert!("0,1".parse::<StateLabel>().is_err());
        assert!("1,0,+".parse::<StateLabel>().is_err());
        assert!("x".parse::<StateLabel>().is_err());
    }

    #[test]
    fn wrong_block_is_rejected() {
        let spec = bundled_molecule("KRb").unwrap();
        let sys = solve(&spec, 2.0, 0, 10).unwrap();
        let label = StateLabel::new(1, 1, Branch::Plus).unwrap();
        assert!(matches!(
            alpha_tensor_closed_form(&sys, label, alpha()),
            Err(PolarizabilityError::WrongBlock { .. })
        ));
        assert!(matches!(
            alpha_tensor_sos(&sys, StateLabel::m0(0), alpha(), 10),
            Err(PolarizabilityError::ExcitedCutoff { .. })
        ));
    }

    #[test]
    fn sos_single_term_at_zero_field() {
        // J=0 -> J_e=1, M_e=0 with Λ=0: contributes alpha_par/3 to alpha_zz.
        let spec = bundled_molecule("KRb").unwrap();
        let sys = solve(&spec, 0.0, 0, 10).unwrap();
        let a = alpha();
        let t = alpha_tensor_sos_with(&sys, StateLabel::m0(0), a, 11, &[0]).unwrap();
        assert_abs_diff_eq!(t.diagonal()[2], a.parallel / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn dropping_negative_lambda_halves_pi_contribution() {
        let spec = bundled_molecule("RbCs").unwrap();
        let sys = solve(&spec, 3.0, 0, 10).unwrap();
        let a = MolecularPolarizability::new(0.0, 200.0);
        let full = alpha_tensor_sos_with(&sys, StateLabel::m0(1), a, 11, &[-1, 0, 1]).unwrap();
        let half = alpha_tensor_sos_with(&sys, StateLabel::m0(1), a, 11, &[0, 1]).unwrap();
        for (f, h) in full.components.iter().zip(half.components.iter()) {
            assert_abs_diff_eq!(f.re, 2.0 * h.re, epsilon = 1e-10);
        }
    }

    #[test]
    fn decompose_identity_and_diag() {
        let parts = irreducible_decompose(&Matrix3::identity());
        assert_abs_diff_eq!(parts.isotropic().re, 1.0, epsilon = 1e-15);
        let [_, v, t] = parts.rank_norms();
        assert_eq!(v, 0.0);
        assert_abs_diff_eq!(t, 0.0, epsilon = 1e-15);

        let (a, b) = (2.0, 5.0);
        let m = Matrix3::from_diagonal(&Vector3::new(C::new(a, 0.0), C::new(a, 0.0), C::new(b, 0.0)));
        let parts = irreducible_decompose(&m);
        assert_abs_diff_eq!(parts.tensor[2].re, 2.0 * (b - a) / 6f64.sqrt(), epsilon = 1e-15);
        for q in [0, 1, 3, 4] {
            assert_eq!(parts.tensor[q].norm(), 0.0);
        }
    }

    #[test]
    fn decompose_recompose_general() {
        let m = Matrix3::new(
            C::new(1.0, 0.2),
            C::new(-0.5, 1.0),
            C::new(0.3, -0.7),
            C::new(2.0, 0.0),
            C::new(-1.5, 0.4),
            C::new(0.9, 0.1),
            C::new(-0.2, 0.6),
            C::new(1.2, -1.1),
            C::new(0.4, 0.0),
        );
        let back = irreducible_decompose(&m).recompose();
        assert!((back - m).camax() < 1e-14);
    }

    #[test]
    fn irreducible_contraction_matches_cartesian() {
        let m = Matrix3::new(
            C::new(3.0, 0.0),
            C::new(0.5, 0.25),
            C::new(-0.3, 0.0),
            C::new(0.5, -0.25),
            C::new(1.0, 0.0),
            C::new(0.2, 0.1),
            C::new(-0.3, 0.0),
            C::new(0.2, -0.1),
            C::new(-2.0, 0.0),
        );
        let parts = irreducible_decompose(&m);
        for pol in [
            PolarizationVector::linear(0.4),
            PolarizationVector::circular(true),
            PolarizationVector::circular(false),
        ] {
            let direct = contract(&m, &pol);
            let via = contract_irreducible(&parts, &polarization_parts(&pol));
            assert!((direct - via).norm() < 1e-13, "{direct} vs {via}");
        }
    }

    #[test]
    fn real_polarization_has_no_vector_part() {
        let p = polarization_parts(&PolarizationVector::linear(0.9));
        assert!(p.rank_norms()[1] < 1e-16);
        let c = polarization_parts(&PolarizationVector::circular(true));
        assert!(c.rank_norms()[1] > 0.1);
    }
}
