//! Independent numerical references shared by the integration tests.
//!
//! Nothing here calls into the 3-j machinery of the library: spherical
//! harmonics come from the associated-Legendre recurrence and integrals are
//! done by Gauss-Legendre quadrature in `cos(theta)` and the trapezoid rule
//! in `phi` (exact for trigonometric polynomials of low enough order).

#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Associated Legendre `P_l^m(x)` for `m >= 0`, Condon-Shortley phase included.
pub fn assoc_legendre(l: u32, m: u32, x: f64) -> f64 {
    if m > l {
        return 0.0;
    }
    let s = (1.0 - x * x).sqrt();
    let mut pmm = 1.0;
    for k in 1..=m {
        pmm *= -((2 * k - 1) as f64) * s;
    }
    if l == m {
        return pmm;
    }
    let mut pm1 = x * (2 * m + 1) as f64 * pmm;
    if l == m + 1 {
        return pm1;
    }
    let mut pm2 = pmm;
    for ll in m + 2..=l {
        let p = ((2 * ll - 1) as f64 * x * pm1 - (ll + m - 1) as f64 * pm2) / (ll - m) as f64;
        pm2 = pm1;
        pm1 = p;
    }
    pm1
}

/// `Y_lm(theta, phi)` given `x = cos(theta)`.
pub fn ylm(l: u32, m: i32, x: f64, phi: f64) -> Complex64 {
    let ma = m.unsigned_abs();
    if ma > l {
        return Complex64::new(0.0, 0.0);
    }
    let norm = ((2 * l + 1) as f64 / (4.0 * PI) * factorial(l - ma) / factorial(l + ma)).sqrt();
    let y = Complex64::from_polar(norm * assoc_legendre(l, ma, x), ma as f64 * phi);
    if m >= 0 {
        y
    } else {
        let sign = if ma % 2 == 0 { 1.0 } else { -1.0 };
        y.conj() * sign
    }
}

/// Racah-normalized harmonic `C_lq = sqrt(4 pi / (2l+1)) Y_lq`.
pub fn clq(l: u32, q: i32, x: f64, phi: f64) -> Complex64 {
    ylm(l, q, x, phi) * (4.0 * PI / (2 * l + 1) as f64).sqrt()
}

/// Product quadrature rule over the unit sphere: `(x = cos theta, phi, weight)`.
pub struct SphereRule {
    pub points: Vec<(f64, f64, f64)>,
}

impl SphereRule {
    pub fn new(n_theta: usize, n_phi: usize) -> Self {
        let gl = gauss_legendre(n_theta);
        let dphi = 2.0 * PI / n_phi as f64;
        let mut points = Vec::with_capacity(n_theta * n_phi);
        for &(x, w) in &gl {
            for k in 0..n_phi {
                points.push((x, k as f64 * dphi, w * dphi));
            }
        }
        SphereRule { points }
    }

    pub fn integrate<F: Fn(f64, f64) -> Complex64>(&self, f: F) -> Complex64 {
        self.points.iter().map(|&(x, phi, w)| f(x, phi) * w).sum()
    }
}

/// `<J M| C_lq |J' M'>` by direct integration.
pub fn c_element_quadrature(rule: &SphereRule, l: u32, q: i32, j: u32, m: i32, jp: u32, mp: i32) -> f64 {
    let v = rule.integrate(|x, phi| ylm(j, m, x, phi).conj() * clq(l, q, x, phi) * ylm(jp, mp, x, phi));
    assert!(v.im.abs() < 1e-12, "matrix element has imaginary part {}", v.im);
    v.re
}

/// `Y_lm` tabulated on every point of a [`SphereRule`] for `l <= l_max`.
pub struct HarmonicTable {
    pub l_max: u32,
    values: Vec<Vec<Complex64>>,
}

impl HarmonicTable {
    pub fn new(rule: &SphereRule, l_max: u32) -> Self {
        let mut values = Vec::new();
        for l in 0..=l_max {
            for m in -(l as i32)..=l as i32 {
                values.push(rule.points.iter().map(|&(x, phi, _)| ylm(l, m, x, phi)).collect());
            }
        }
        HarmonicTable { l_max, values }
    }

    pub fn get(&self, l: u32, m: i32) -> &[Complex64] {
        &self.values[(l * l) as usize + (m + l as i32) as usize]
    }

    /// `<J M| C_lq |J' M'>` by quadrature using tabulated harmonics.
    pub fn c_element(&self, rule: &SphereRule, l: u32, q: i32, j: u32, m: i32, jp: u32, mp: i32) -> f64 {
        let norm = (4.0 * PI / (2 * l + 1) as f64).sqrt();
        let (a, c, b) = (self.get(j, m), self.get(l, q), self.get(jp, mp));
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, &(_, _, w)) in rule.points.iter().enumerate() {
            acc += a[i].conj() * c[i] * b[i] * w;
        }
        acc.re * norm
    }
}

/// Wavefunction `sum_J c_J Y_{J,M}` plus optionally `sign * sum_J c_J Y_{J,-M}`,
/// normalized by `1/sqrt(2)` when both terms are present.
pub struct Dressed<'a> {
    pub coefficients: &'a [f64],
    pub j_min: u32,
    pub m: i32,
    pub mirror_sign: Option<f64>,
}

impl Dressed<'_> {
    pub fn value(&self, x: f64, phi: f64) -> Complex64 {
        let mut up = Complex64::new(0.0, 0.0);
        let mut down = Complex64::new(0.0, 0.0);
        for (k, c) in self.coefficients.iter().enumerate() {
            let j = self.j_min + k as u32;
            up += ylm(j, self.m, x, phi) * *c;
            if self.mirror_sign.is_some() {
                down += ylm(j, -self.m, x, phi) * *c;
            }
        }
        match self.mirror_sign {
            None => up,
            Some(s) => (up + down * s) * std::f64::consts::FRAC_1_SQRT_2,
        }
    }
}

/// `<psi| n_a n_b |psi>` for the molecular axis `n = (sin t cos p, sin t sin p, cos t)`.
pub fn axis_moments(rule: &SphereRule, psi: &Dressed) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for &(x, phi, w) in &rule.points {
        let s = (1.0 - x * x).sqrt();
        let n = [s * phi.cos(), s * phi.sin(), x];
        let rho = psi.value(x, phi).norm_sqr() * w;
        for a in 0..3 {
            for b in 0..3 {
                out[a][b] += rho * n[a] * n[b];
            }
        }
    }
    out
}

/// Second-order Stark energy of the free rotor level `(J, M)` in units of
/// `B`, as a function of `beta = d E / B`.
pub fn second_order_energy(j: i32, m: i32, beta: f64) -> f64 {
    let jf = j as f64;
    let mf = m as f64;
    let rotor = jf * (jf + 1.0);
    if j == 0 {
        return -beta * beta / 6.0;
    }
    let up = ((jf + 1.0).powi(2) - mf * mf) / ((2.0 * jf + 1.0) * (2.0 * jf + 3.0));
    let down = (jf * jf - mf * mf) / ((2.0 * jf - 1.0) * (2.0 * jf + 1.0));
    let e_up = (jf + 1.0) * (jf + 2.0) - rotor;
    let e_down = (jf - 1.0) * jf - rotor;
    rotor + beta * beta * (up / -e_up + down / -e_down)
}

/// Wigner small-d `d^j_{m' m}(beta)` from Wigner's explicit sum.
pub fn wigner_small_d(j: i32, mp: i32, m: i32, beta: f64) -> f64 {
    if mp.abs() > j || m.abs() > j {
        return 0.0;
    }
    let f = |n: i32| factorial(n as u32);
    let pref = (f(j + mp) * f(j - mp) * f(j + m) * f(j - m)).sqrt();
    let (c, s) = ((beta / 2.0).cos(), (beta / 2.0).sin());
    let mut total = 0.0;
    for k in 0.max(m - mp)..=(j + m).min(j - mp) {
        let sign = if (mp - m + k) % 2 == 0 { 1.0 } else { -1.0 };
        let den = f(j + m - k) * f(k) * f(mp - m + k) * f(j - mp - k);
        total += sign * pref / den * c.powi(2 * j + m - mp - 2 * k) * s.powi(mp - m + 2 * k);
    }
    total
}

/// `D^j_{m' m}(alpha, beta, gamma) = exp(-i m' alpha) d^j_{m' m}(beta) exp(-i m gamma)`.
pub fn wigner_d(j: i32, mp: i32, m: i32, alpha: f64, beta: f64, gamma: f64) -> Complex64 {
    Complex64::from_polar(wigner_small_d(j, mp, m, beta), -(mp as f64) * alpha - m as f64 * gamma)
}

/// `<J M 0| d_q |J_e M_e Λ>` for a unit molecule-frame dipole, by quadrature
/// over Euler angles. Symmetric-top states are `sqrt((2J+1)/8pi^2) D^{J*}_{MK}`
/// and the lab component is `d_q = sum_p D^{1*}_{qp} d'_p`.
pub fn f_spherical_quadrature(je: i32, me: i32, lambda: i32, j: i32, m: i32, q: i32) -> Complex64 {
    let gl = gauss_legendre(24);
    let n = 12;
    let h = 2.0 * PI / n as f64;
    let norm = ((2 * j + 1) as f64 * (2 * je + 1) as f64).sqrt() / (8.0 * PI * PI);
    let mut acc = Complex64::new(0.0, 0.0);
    for &(x, w) in &gl {
        let beta = x.acos();
        for ia in 0..n {
            let alpha = ia as f64 * h;
            for ig in 0..n {
                let gamma = ig as f64 * h;
                let ground = wigner_d(j, m, 0, alpha, beta, gamma).conj();
                let dipole = wigner_d(1, q, -lambda, alpha, beta, gamma).conj();
                let excited = wigner_d(je, me, lambda, alpha, beta, gamma).conj();
                acc += ground.conj() * dipole * excited * (w * h * h);
            }
        }
    }
    acc * norm
}
