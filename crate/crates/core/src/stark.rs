//! Rigid-rotor Stark Hamiltonian, one `M` block at a time.
//!
//! The DC field is along lab `z`, so `M` is conserved and each block is a real
//! symmetric tridiagonal matrix in the field-free basis `J = |M|..=J_max`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angular::c_tensor_element;
use crate::units::{dipole_energy_mhz, MoleculeSpec};

/// Basis cutoff used when none is given.
pub const DEFAULT_J_MAX: u32 = 10;
/// Relative energy change accepted by [`check_convergence`].
pub const CONVERGENCE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum StarkError {
    #[error("J_max = {j_max} too small for |M| = {m_abs}; need at least |M| + 3")]
    BasisTooSmall { j_max: u32, m_abs: u32 },
    #[error("negative DC field {0} kV/cm")]
    NegativeField(f64),
    #[error("state J~ = {j_tilde} not in block M = {m} (J~ must lie in |M|..={j_max})")]
    NoSuchState { j_tilde: u32, m: i32, j_max: u32 },
    #[error("eigensolver produced a non-orthonormal basis (max deviation {0:e})")]
    Eigensolver(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StarkBlock {
    pub m: i32,
    pub j_max: u32,
    /// Hamiltonian in MHz over the basis `J = |M|..=J_max`.
    pub hamiltonian: DMatrix<f64>,
    pub b_mhz: f64,
    pub beta: f64,
    pub field_kv_cm: f64,
}

impl StarkBlock {
    pub fn j_min(&self) -> u32 {
        self.m.unsigned_abs()
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }
}

pub fn build_block(
    spec: &MoleculeSpec,
    field_kv_cm: f64,
    m: i32,
    j_max: u32,
) -> Result<StarkBlock, StarkError> {
    let m_abs = m.unsigned_abs();
    if j_max < m_abs + 3 {
        return Err(StarkError::BasisTooSmall { j_max, m_abs });
    }
    if field_kv_cm < 0.0 || field_kv_cm.is_nan() {
        return Err(StarkError::NegativeField(field_kv_cm));
    }
    let b = spec.b_mhz();
    let coupling = dipole_energy_mhz(spec.d00_debye(), field_kv_cm);
    let dim = (j_max - m_abs + 1) as usize;
    let j_of = |i: usize| (m_abs as usize + i) as i32;

    let mut h = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        let j = j_of(i);
        h[(i, i)] = b * (j * (j + 1)) as f64;
        if i + 1 < dim {
            let v = -coupling * c_tensor_element(1, 0, j, m, j + 1, m);
            h[(i, i + 1)] = v;
            h[(i + 1, i)] = v;
        }
    }
    Ok(StarkBlock {
        m,
        j_max,
        hamiltonian: h,
        b_mhz: b,
        beta: coupling / b,
        field_kv_cm,
    })
}

/// Dressed eigenstates of one `M` block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarkEigensystem {
    pub m: i32,
    pub j_max: u32,
    /// Ascending energies in MHz; entry `k` belongs to `J~ = |M| + k`.
    pub energies: Vec<f64>,
    /// Row `k` holds the expansion of `J~ = |M| + k` over `J = |M|..=J_max`.
    pub mixing: Vec<Vec<f64>>,
    pub beta: f64,
    pub b_mhz: f64,
    pub field_kv_cm: f64,
}

impl StarkEigensystem {
    pub fn j_min(&self) -> u32 {
        self.m.unsigned_abs()
    }

    fn row(&self, j_tilde: u32) -> Result<usize, StarkError> {
        if j_tilde < self.j_min() || j_tilde > self.j_max {
            return Err(StarkError::NoSuchState {
                j_tilde,
                m: self.m,
                j_max: self.j_max,
            });
        }
        Ok((j_tilde - self.j_min()) as usize)
    }

    pub fn energy(&self, j_tilde: u32) -> Result<f64, StarkError> {
        Ok(self.energies[self.row(j_tilde)?])
    }

    /// Coefficients `U_{J~, J}` for `J = |M|..=J_max`.
    pub fn coefficients(&self, j_tilde: u32) -> Result<&[f64], StarkError> {
        Ok(&self.mixing[self.row(j_tilde)?])
    }

    /// Basis labels `J` matching the columns of [`Self::coefficients`].
    pub fn basis(&self) -> impl Iterator<Item = i32> + '_ {
        (self.j_min()..=self.j_max).map(|j| j as i32)
    }
    /// The `-M` block. Its Hamiltonian equals the `+M` one element by element,
    /// so the eigensystem is copied rather than recomputed.
    pub fn mirrored(&self) -> StarkEigensystem {
        StarkEigensystem {
            m: -self.m,
            ..self.clone()
        }
    }
}

pub fn diagonalize(block: &StarkBlock) -> Result<StarkEigensystem, StarkError> {
    let dim = block.dim();
    let eig = SymmetricEigen::new(block.hamiltonian.clone());
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut energies = Vec::with_capacity(dim);
    let mut mixing = Vec::with_capacity(dim);
    for &k in &order {
        let mut v: DVector<f64> = eig.eigenvectors.column(k).into_owned();
        v /= v.norm();
        let (lead, _) = v
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |acc, (i, x)| if x.abs() > acc.1 { (i, x.abs()) } else { acc });
        if v[lead] < 0.0 {
            v = -v;
        }
        energies.push(eig.eigenvalues[k]);
        mixing.push(v.iter().copied().collect::<Vec<f64>>());
    }

    let u = DMatrix::from_fn(dim, dim, |r, c| mixing[r][c]);
    let deviation = (&u * u.transpose() - DMatrix::identity(dim, dim)).amax();
    if deviation > 1e-12 {
        return Err(StarkError::Eigensolver(deviation));
    }

    Ok(StarkEigensystem {
        m: block.m,
        j_max: block.j_max,
        energies,
        mixing,
        beta: block.beta,
        b_mhz: block.b_mhz,
        field_kv_cm: block.field_kv_cm,
    })
}

/// Builds and diagonalizes the block in one step.
pub fn solve(
    spec: &MoleculeSpec,
    field_kv_cm: f64,
    m: i32,
    j_max: u32,
) -> Result<StarkEigensystem, StarkError> {
    diagonalize(&build_block(spec, field_kv_cm, m, j_max)?)
}

/// Eigensystems for `|M| = 0..=m_abs_max` at one DC field.
#[derive(Debug, Clone)]
pub struct DressedManifold {
    pub field_kv_cm: f64,
    pub j_max: u32,
    systems: Vec<StarkEigensystem>,
}

impl DressedManifold {
    pub fn new(
        spec: &MoleculeSpec,
        field_kv_cm: f64,
        j_max: u32,
        m_abs_max: u32,
    ) -> Result<Self, StarkError> {
        let systems = (0..=m_abs_max)
            .map(|m| solve(spec, field_kv_cm, m as i32, j_max))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DressedManifold {
            field_kv_cm,
            j_max,
            systems,
        })
    }

    /// Eigensystem of the `+|M|` block.
    pub fn system(&self, m: i32) -> Result<&StarkEigensystem, StarkError> {
        self.systems
            .get(m.unsigned_abs() as usize)
            .ok_or(StarkError::NoSuchState {
                j_tilde: m.unsigned_abs(),
                m,
                j_max: self.j_max,
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub energy_mhz: f64,
    pub energy_extended_mhz: f64,
    /// `|E(J_max+4) - E(J_max)| / max(|E(J_max)|, B)`
    pub relative_change: f64,
    pub converged: bool,
}

/// Compares the energy of `J~` between cutoffs `J_max` and `J_max + 4`.
///
/// The change is normalized by `max(|E|, B)` so the zero-energy field-free
/// ground state does not produce a division by zero.
pub fn check_convergence(
    spec: &MoleculeSpec,
    field_kv_cm: f64,
    m: i32,
    j_tilde: u32,
    j_max: u32,
) -> Result<ConvergenceReport, StarkError> {
    let base = solve(spec, field_kv_cm, m, j_max)?.energy(j_tilde)?;
    let extended = solve(spec, field_kv_cm, m, j_max + 4)?.energy(j_tilde)?;
    let relative_change = (extended - base).abs() / base.abs().max(spec.b_mhz());
    Ok(ConvergenceReport {
        energy_mhz: base,
        energy_extended_mhz: extended,
        relative_change,
        converged: relative_change < CONVERGENCE_TOLERANCE,
    })
}

/// `<J~ M| C_{2,q} |J~' M'>` between dressed states of two blocks with the
/// same cutoff. Zero unless `M = M' + q`.
pub fn dressed_c2(
    bra: &StarkEigensystem,
    j_bra: u32,
    ket: &StarkEigensystem,
    j_ket: u32,
    q: i32,
) -> Result<f64, StarkError> {
    if bra.m != ket.m + q {
        return Ok(0.0);
    }
    let ub = bra.coefficients(j_bra)?;
    let uk = ket.coefficients(j_ket)?;
    let mut total = 0.0;
    for (cb, jb) in ub.iter().zip(bra.basis()) {
        if *cb == 0.0 {
            continue;
        }
        for (ck, jk) in uk.iter().zip(ket.basis()) {
            if (jb - jk).abs() > 2 {
                continue;
            }
            total += cb * ck * c_tensor_element(2, q, jb, bra.m, jk, ket.m);
        }
    }
    Ok(total)
}

/// Alignment `<cos^2 theta> = (1 + 2 <C_20>) / 3` of the dressed state `J~`.
pub fn alignment(sys: &StarkEigensystem, j_tilde: u32) -> Result<f64, StarkError> {
    let c20 = dressed_c2(sys, j_tilde, sys, j_tilde, 0)?;
    Ok((1.0 + 2.0 * c20) / 3.0)
}
