//! Angular-momentum kernels for integer angular momenta.
//!
//! Everything here is built on one exact 3-j routine (Racah's single-sum
//! formula in big-rational arithmetic, rounded to `f64` once at the end).
//! The spherical/Cartesian phase convention used by the whole crate also
//! lives here:
//!
//! ```text
//! v_{+1} = -(v_x + i v_y)/sqrt(2),   v_0 = v_z,   v_{-1} = (v_x - i v_y)/sqrt(2)
//! ```
//!
//! Spherical triples are always stored in the order `[q = -1, q = 0, q = +1]`.

use std::collections::HashMap;
use std::sync::{LazyLock, OnceLock, RwLock};

use nalgebra::Vector3;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

const FACTORIAL_TABLE_LEN: usize = 256;

fn factorial(n: i32) -> &'static BigInt {
    static TABLE: OnceLock<Vec<BigInt>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut out = Vec::with_capacity(FACTORIAL_TABLE_LEN);
        let mut acc = BigInt::one();
        out.push(acc.clone());
        for k in 1..FACTORIAL_TABLE_LEN {
            acc *= k;
            out.push(acc.clone());
        }
        out
    });
    assert!(
        n >= 0 && (n as usize) < FACTORIAL_TABLE_LEN,
        "factorial argument {n} outside supported range"
    );
    &table[n as usize]
}

type ThreeJKey = [i32; 6];

static THREE_J_CACHE: LazyLock<RwLock<HashMap<ThreeJKey, f64>>> =
    LazyLock::new(|| RwLock::new(HashMap::new()));

fn is_triangle(j1: i32, j2: i32, j3: i32) -> bool {
    j3 >= (j1 - j2).abs() && j3 <= j1 + j2
}

/// Wigner 3-j symbol for integer arguments.
///
/// Returns exactly zero when the projections do not sum to zero, the triangle
/// rule fails, or any `|m_i| > j_i`.
pub fn three_j(j1: i32, j2: i32, j3: i32, m1: i32, m2: i32, m3: i32) -> f64 {
    if j1 < 0 || j2 < 0 || j3 < 0 {
        return 0.0;
    }
    if m1.abs() > j1 || m2.abs() > j2 || m3.abs() > j3 {
        return 0.0;
    }
    if m1 + m2 + m3 != 0 || !is_triangle(j1, j2, j3) {
        return 0.0;
    }
    if m1 == 0 && m2 == 0 && m3 == 0 && (j1 + j2 + j3) % 2 == 1 {
        return 0.0;
    }

    let key = [j1, j2, j3, m1, m2, m3];
    if let Some(v) = THREE_J_CACHE.read().expect("3j cache poisoned").get(&key) {
        return *v;
    }
    let value = racah_three_j(j1, j2, j3, m1, m2, m3);
    THREE_J_CACHE
        .write()
        .expect("3j cache poisoned")
        .insert(key, value);
    value
}

fn racah_three_j(j1: i32, j2: i32, j3: i32, m1: i32, m2: i32, m3: i32) -> f64 {
    // Racah series sum_k (-1)^k / [k! (a-k)! (b-k)! (c-k)! (d+k)! (e+k)!].
    let a = j1 + j2 - j3;
    let b = j1 - m1;
    let c = j2 + m2;
    let d = j3 - j2 + m1;
    let e = j3 - j1 - m2;
    let k_min = 0.max(-d).max(-e);
    let k_max = a.min(b).min(c);

    // Scaling every term by a! b! c! (d+k_max)! (e+k_max)! turns the series
    // into an integer sum, so no rational reduction happens inside the loop.
    let falling = |top: i32, bottom: i32| -> BigInt {
        let mut acc = BigInt::one();
        for n in bottom + 1..=top {
            acc *= n;
        }
        acc
    };
    let mut series = BigInt::zero();
    for k in k_min..=k_max {
        let term = factorial(a) / (factorial(k) * factorial(a - k))
            * falling(b, b - k)
            * falling(c, c - k)
            * falling(d + k_max, d + k)
            * falling(e + k_max, e + k);
        if k % 2 == 0 {
            series += term;
        } else {
            series -= term;
        }
    }
    if series.is_zero() {
        return 0.0;
    }
    let scale = factorial(a) * factorial(b) * factorial(c) * factorial(d + k_max) * factorial(e + k_max);

    // Triangle coefficient times the six projection factorials; the symbol is
    // sign * sqrt(prefactor) * series / scale.
    let numerator = factorial(j1 + j2 - j3)
        * factorial(j1 - j2 + j3)
        * factorial(-j1 + j2 + j3)
        * factorial(j1 + m1)
        * factorial(j1 - m1)
        * factorial(j2 + m2)
        * factorial(j2 - m2)
        * factorial(j3 + m3)
        * factorial(j3 - m3);
    let denominator = factorial(j1 + j2 + j3 + 1) * &scale * &scale;

    let phase = if (j1 - j2 - m3).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let sign = if series.is_negative() { -phase } else { phase };
    let squared = BigRational::new(numerator * &series * &series, denominator);
    let magnitude = squared
        .to_f64()
        .expect("3j magnitude not representable as f64")
        .sqrt();
    sign * magnitude
}

/// Clears the process-wide 3-j memo table.
pub fn clear_three_j_cache() {
    THREE_J_CACHE.write().expect("3j cache poisoned").clear();
}

fn parity(n: i32) -> f64 {
    if n.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `<J M | C_{l q} | J' M'>` for Racah-normalized spherical harmonics
/// `C_{lq} = sqrt(4 pi / (2l+1)) Y_{lq}`.
///
/// Vanishes unless `M = M' + q` and `J + l + J'` is even.
pub fn c_tensor_element(l: i32, q: i32, j: i32, m: i32, jp: i32, mp: i32) -> f64 {
    if m.abs() > j || mp.abs() > jp || q.abs() > l {
        return 0.0;
    }
    let reduced = three_j(j, l, jp, 0, 0, 0);
    if reduced == 0.0 {
        return 0.0;
    }
    parity(m)
        * (((2 * j + 1) * (2 * jp + 1)) as f64).sqrt()
        * three_j(j, l, jp, -m, q, mp)
        * reduced
}

/// Lab-frame Cartesian axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cartesian {
    X,
    Y,
    Z,
}

impl Cartesian {
    pub const ALL: [Cartesian; 3] = [Cartesian::X, Cartesian::Y, Cartesian::Z];

    pub fn index(self) -> usize {
        match self {
            Cartesian::X => 0,
            Cartesian::Y => 1,
            Cartesian::Z => 2,
        }
    }
}

/// Which member of the `{|M>, |-M>}` pair a ground state is.
///
/// `Plus`/`Minus` are the combinations `(|+|M|> +- |-|M|>)/sqrt(2)`. `None`
/// means the pure projection state; for `M = 0` all three coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    Plus,
    Minus,
    None,
}

/// Cartesian components of a complex 3-vector to spherical `[q=-1, q=0, q=+1]`.
pub fn cart_to_spherical(v: &Vector3<Complex64>) -> [Complex64; 3] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let i = Complex64::i();
    [
        (v.x - i * v.y) * s,
        v.z,
        -(v.x + i * v.y) * s,
    ]
}

/// Inverse of [`cart_to_spherical`].
pub fn spherical_to_cart(s: &[Complex64; 3]) -> Vector3<Complex64> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let i = Complex64::i();
    let (minus, zero, plus) = (s[0], s[1], s[2]);
    Vector3::new((minus - plus) * r, i * (minus + plus) * r, zero)
}

/// Rotational transition amplitude for lab spherical component `q` between the
/// ground rotor state `|J M, Omega=0>` and the symmetric-top state
/// `|J_e M_e, Omega=Lambda>` of an excited electronic state.
///
/// This is the three-rotation-matrix integral reduced with the standard
/// Gaunt-type identity; the molecule-frame dipole component that drives a
/// `Omega = 0 -> Lambda` transition is `k = -Lambda`.
pub fn f_factor_spherical(je: i32, me: i32, lambda: i32, j: i32, m: i32, q: i32) -> f64 {
    if lambda.abs() > 1 || lambda.abs() > je || me.abs() > je || m.abs() > j || q.abs() > 1 {
        return 0.0;
    }
    let body = three_j(j, 1, je, 0, lambda, -lambda);
    if body == 0.0 {
        return 0.0;
    }
    parity(q + me)
        * (((2 * j + 1) * (2 * je + 1)) as f64).sqrt()
        * three_j(j, 1, je, m, -q, -me)
        * body
}

fn f_factor_pure(je: i32, me: i32, lambda: i32, j: i32, m: i32, sigma: Cartesian) -> Complex64 {
    let sph = [-1, 0, 1].map(|q| Complex64::new(f_factor_spherical(je, me, lambda, j, m, q), 0.0));
    spherical_to_cart(&sph)[sigma.index()]
}

/// `F^{J_e M_e Lambda}_{J M branch, sigma}`: dipole angular factor between a
/// ground state (optionally a `+-M` branch combination) and an excited
/// symmetric-top state, for a lab Cartesian component.
///
/// Complex because the `y` component of the Condon-Shortley basis is
/// imaginary; `x` and `z` values are real.
pub fn f_factor(
    je: i32,
    me: i32,
    lambda: i32,
    j: i32,
    m: i32,
    branch: Branch,
    sigma: Cartesian,
) -> Complex64 {
    let m_abs = m.abs();
    if m_abs == 0 || branch == Branch::None {
        return f_factor_pure(je, me, lambda, j, m, sigma);
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let up = f_factor_pure(je, me, lambda, j, m_abs, sigma);
    let down = f_factor_pure(je, me, lambda, j, -m_abs, sigma);
    match branch {
        Branch::Plus => (up + down) * s,
        Branch::Minus => (up - down) * s,
        Branch::None => unreachable!(),
    }
}
