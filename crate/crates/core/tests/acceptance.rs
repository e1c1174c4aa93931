//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{second_order_energy, HarmonicTable, SphereRule};
use starkpol::angular::{c_tensor_element, three_j, Branch};
use starkpol::lattice::{plan_three_beam_lattice, validate_plan};
use starkpol::magic::{
    find_magic_field, find_magic_field_with_alpha, sweep, FieldSearch, SweepContext, SweepGrid,
    SweepVariable, DEFAULT_NU_CM,
};
use starkpol::polarizability::{
    alpha_effective, alpha_tensor_closed_form, alpha_tensor_sos, resolve_degenerate, PolarizationVector, StateLabel,
};
use starkpol::stark::{solve, DressedManifold};
use starkpol::units::{alpha_lambda_at, bundled_molecule, MolecularPolarizability, MoleculeSpec, SPEED_OF_LIGHT};

type Outcome = Result<String, String>;

fn molecules() -> [MoleculeSpec; 2] {
    [bundled_molecule("KRb").unwrap(), bundled_molecule("RbCs").unwrap()]
}

fn alpha_of(spec: &MoleculeSpec) -> MolecularPolarizability {
    alpha_lambda_at(spec, DEFAULT_NU_CM).unwrap()
}

fn label(s: &str) -> StateLabel {
    s.parse().unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn magic_angle_identity() -> Outcome {
    let theta0 = PolarizationVector::linear((1.0f64 / 3.0).sqrt().acos());
    let mut worst = 0.0f64;
    let mut spread = 0.0f64;
    for spec in molecules() {
        let alpha = alpha_of(&spec);
        let bar = alpha.isotropic();
        let fields = [0.0, 1.0, spec.field_for_beta(2.5), 6.0];
        let mut values = Vec::new();
        for field in fields {
            let manifold = DressedManifold::new(&spec, field, 10, 0).map_err(|e| e.to_string())?;
            for state in [StateLabel::m0(0), StateLabel::m0(1)] {
                let a = alpha_effective(&manifold, state, alpha, &theta0).map_err(|e| e.to_string())?;
                worst = worst.max((a - bar).abs() / bar.abs());
                values.push(a);
            }
        }
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        spread = spread.max((hi - lo) / bar.abs());
    }
    check(
        worst < 1e-12 && spread < 1e-12,
        format!("max |alpha_eff - alpha_bar|/|alpha_bar| = {worst:.2e}, spread = {spread:.2e} (tol 1e-12)"),
    )
}

fn route_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for spec in molecules() {
        let alpha = alpha_of(&spec);
        for beta in [0.0, 0.5, 1.0, 2.5, 6.0, 8.0] {
            let field = spec.field_for_beta(beta);
            for m in 0..=1i32 {
                let sys = solve(&spec, field, m, 10).map_err(|e| e.to_string())?;
                for j in m as u32..=3 {
                    let branches: &[Branch] = if m == 0 {
                        &[Branch::None]
                    } else {
                        &[Branch::Plus, Branch::Minus, Branch::None]
                    };
                    for &b in branches {
                        let l = StateLabel::new(j, m, b).unwrap();
                        let closed = alpha_tensor_closed_form(&sys, l, alpha).map_err(|e| e.to_string())?;
                        let sos = alpha_tensor_sos(&sys, l, alpha, 11).map_err(|e| e.to_string())?;
                        worst = worst.max(closed.relative_difference(&sos));
                        count += 1;
                    }
                }
            }
        }
    }
    check(worst < 1e-10, format!("{count} tensors, max relative difference {worst:.2e} (tol 1e-10)"))
}

fn magic_fields() -> Outcome {
    let [krb, rbcs] = molecules();
    let z = PolarizationVector::z();
    let search = FieldSearch::default();
    let first = |spec: &MoleculeSpec, a: &str, b: &str, pol: &PolarizationVector, name: &str| {
        find_magic_field(spec, (label(a), label(b)), pol, name, &search)
            .map(|c| c.iter().map(|r| r.field_kv_cm).collect::<Vec<_>>())
            .map_err(|e| e.to_string())
    };
    let krb00 = first(&krb, "0,0", "1,0", &z, "z")?;
    let rbcs00 = first(&rbcs, "0,0", "1,0", &z, "z")?;
    let rbcs_plus = first(&rbcs, "1,0", "1,1,+", &z, "z")?;
    let rbcs_minus = first(&rbcs, "1,0", "1,1,-", &z, "z")?;
    let x = PolarizationVector::x();
    let x_plus = first(&rbcs, "1,0", "1,1,+", &x, "x").unwrap_or_default();
    let x_minus = first(&rbcs, "1,0", "1,1,-", &x, "x").unwrap_or_default();

    let within = |v: &[f64], target: f64| v.len() == 1 && ((v[0] - target) / target).abs() <= 0.15;
    let ok = within(&krb00, 10.0) && within(&rbcs00, 2.0) && within(&rbcs_plus, 4.7) && within(&rbcs_minus, 4.7);
    check(
        ok,
        format!(
            "KRb (0,0)x(1,0) {krb00:.4?}; RbCs (0,0)x(1,0) {rbcs00:.4?}; RbCs (1,0)x(1,1,+/-) parallel {rbcs_plus:.4?}/{rbcs_minus:.4?}, perpendicular {x_plus:.4?}/{x_minus:.4?} kV/cm (targets 10, 2, 4.7 +/-15%)"
        ),
    )
}

fn polarization_invariance() -> Outcome {
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for spec in molecules() {
        let pair = (StateLabel::m0(0), StateLabel::m0(1));
        let get = |pol: PolarizationVector, name: &str| {
            find_magic_field(&spec, pair, &pol, name, &FieldSearch::default())
                .map(|c| c[0].field_kv_cm)
                .map_err(|e| e.to_string())
        };
        let ez = get(PolarizationVector::z(), "z")?;
        let ex = get(PolarizationVector::x(), "x")?;
        let rel = ((ez - ex) / ez).abs();
        worst = worst.max(rel);
        detail.push(format!("{} z {ez:.9} x {ex:.9}", spec.name()));
    }
    check(worst < 1e-8, format!("{}; max relative difference {worst:.2e} (tol 1e-8)", detail.join(", ")))
}

fn beta_universality() -> Outcome {
    let pair = (StateLabel::m0(0), StateLabel::m0(1));
    let z = PolarizationVector::z();
    let search = FieldSearch::default();
    let [krb, rbcs] = molecules();
    let beta_of = |spec: &MoleculeSpec, alpha: MolecularPolarizability| {
        find_magic_field_with_alpha(spec, pair, &z, "z", &search, alpha)
            .map(|c| c[0].beta)
            .map_err(|e| e.to_string())
    };
    let b_krb = beta_of(&krb, alpha_of(&krb))?;
    let b_rbcs = beta_of(&rbcs, alpha_of(&rbcs))?;
    let between = ((b_krb - b_rbcs) / b_krb).abs();

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let par: f64 = rng.gen_range(50.0..2000.0);
        let mut perp: f64 = rng.gen_range(50.0..2000.0);
        while (par - perp).abs() < 1.0 {
            perp = rng.gen_range(50.0..2000.0);
        }
        let spec = if rng.gen_bool(0.5) { &krb } else { &rbcs };
        let b = beta_of(spec, MolecularPolarizability::new(par, perp))?;
        worst = worst.max(((b - b_krb) / b_krb).abs());
    }
    check(
        between < 1e-6 && worst < 1e-6,
        format!("beta* KRb {b_krb:.10}, RbCs {b_rbcs:.10} (rel {between:.2e}); 20 random alpha draws max rel {worst:.2e} (tol 1e-6)"),
    )
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn perturbation_theory() -> Outcome {
    let spec = bundled_molecule("KRb").unwrap();
    let b = spec.b_mhz();
    let betas: Vec<f64> = (0..10).map(|k| 0.01 * 10f64.powf(k as f64 / 9.0)).collect();
    let mut out = Vec::new();
    let mut ok = true;
    for j in [0i32, 1] {
        let mut lx = Vec::new();
        let mut ly = Vec::new();
        for &beta in &betas {
            let sys = solve(&spec, spec.field_for_beta(beta), 0, 10).map_err(|e| e.to_string())?;
            let exact = sys.energy(j as u32).map_err(|e| e.to_string())? / b;
            let residual = (exact - second_order_energy(j, 0, beta)).abs();
            lx.push(beta.ln());
            ly.push(residual.ln());
        }
        let s = slope(&lx, &ly);
        ok &= (s - 4.0).abs() <= 0.2;
        out.push(format!("J~={j} slope {s:.4}"));
    }
    check(ok, format!("{} (target 4.0 +/- 0.2)", out.join(", ")))
}

fn convergence() -> Outcome {
    let spec = bundled_molecule("KRb").unwrap();
    let alpha = alpha_of(&spec);
    let beta_max = spec.beta(15.0);
    let mut worst_e = 0.0f64;
    let mut worst_t = 0.0f64;
    for k in 0..=8 {
        let field = spec.field_for_beta(beta_max * k as f64 / 8.0);
        for m in 0..=1i32 {
            let small = solve(&spec, field, m, 10).map_err(|e| e.to_string())?;
            let large = solve(&spec, field, m, 14).map_err(|e| e.to_string())?;
            for j in m as u32..=1 {
                let (e1, e2) = (small.energy(j).unwrap(), large.energy(j).unwrap());
                worst_e = worst_e.max((e1 - e2).abs() / e1.abs().max(spec.b_mhz()));
                let branches: &[Branch] = if m == 0 { &[Branch::None] } else { &[Branch::Plus, Branch::Minus] };
                for &br in branches {
                    let l = StateLabel::new(j, m, br).unwrap();
                    let t1 = alpha_tensor_closed_form(&small, l, alpha).unwrap();
                    let t2 = alpha_tensor_closed_form(&large, l, alpha).unwrap();
                    worst_t = worst_t.max(t1.relative_difference(&t2));
                }
            }
        }
    }
    check(
        worst_e < 1e-8 && worst_t < 1e-8,
        format!("beta <= {beta_max:.4}: energy change {worst_e:.2e} (relative to max(|E|, B)), tensor change {worst_t:.2e} (tol 1e-8)"),
    )
}

fn degeneracy() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for spec in molecules() {
        let alpha = alpha_of(&spec);
        let bar = alpha.isotropic().abs();
        let sys = solve(&spec, spec.field_for_beta(3.0), 1, 10).map_err(|e| e.to_string())?;
        for j in 1..=2u32 {
            let perp = resolve_degenerate(&sys, j, alpha, &PolarizationVector::x()).map_err(|e| e.to_string())?;
            let par = resolve_degenerate(&sys, j, alpha, &PolarizationVector::z()).map_err(|e| e.to_string())?;
            let split_x = perp.splitting() / bar;
            let split_z = par.splitting().abs() / bar;
            let labelled = perp.branch(Branch::Plus).is_some() && perp.branch(Branch::Minus).is_some();
            ok &= split_x > 1e-6 && split_z < 1e-12 && labelled && !perp.degenerate;
            detail.push(format!("{} J~={j}: x split {split_x:.3e}, z split {split_z:.1e}", spec.name()));
        }
    }
    check(ok, format!("{} (relative to alpha_bar)", detail.join("; ")))
}

fn no_magic_frequency() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for spec in molecules() {
        let window: Vec<_> = spec
            .alpha_table()
            .iter()
            .filter(|r| (9000.0..=10000.0).contains(&r.nu_cm))
            .collect();
        let monotone = window
            .windows(2)
            .all(|w| w[1].parallel > w[0].parallel && w[1].perpendicular > w[0].perpendicular);
        ok &= monotone;

        let grid = SweepGrid::new(SweepVariable::Nu, 9000.0, 10000.0, 401).map_err(|e| e.to_string())?;
        let states = [label("0,0"), label("1,0"), label("1,1,+"), label("1,1,-")];
        for (name, pol) in [("z", PolarizationVector::z()), ("x", PolarizationVector::x())] {
            let ctx = SweepContext {
                polarization: pol,
                ..SweepContext::default()
            };
            let rows = sweep(&spec, &grid, &ctx, &states).map_err(|e| e.to_string())?;
            for k in 1..states.len() {
                let signs: Vec<f64> = rows.iter().map(|r| (r.alpha[0] - r.alpha[k]).signum()).collect();
                let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
                let zero = rows.iter().any(|r| r.alpha[0] == r.alpha[k]);
                ok &= changes == 0 && !zero;
            }
            detail.push(format!("{} {name}", spec.name()));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let manifold = DressedManifold::new(&spec, 0.0, 10, 1).map_err(|e| e.to_string())?;
        for theta_deg in [0.0, 30.0, 75.0, 90.0] {
            let pol = PolarizationVector::linear_degrees(theta_deg);
            let mut sign = None;
            for _ in 0..50 {
                let nu: f64 = rng.gen_range(9000.0..=10000.0);
                let a = alpha_lambda_at(&spec, nu).map_err(|e| e.to_string())?;
                let d = alpha_effective(&manifold, label("0,0"), a, &pol).unwrap()
                    - alpha_effective(&manifold, label("1,0"), a, &pol).unwrap();
                ok &= d != 0.0 && *sign.get_or_insert(d.signum()) == d.signum();
            }
        }
    }
    check(
        ok,
        format!(
            "alpha tables monotone on 9000-10000 cm^-1; J=0 vs J=1 differences keep one sign ({}) plus 200 random nu draws at fixed theta",
            detail.join(", ")
        ),
    )
}

fn lattice() -> Outcome {
    let nu_a = SPEED_OF_LIGHT / 1090e-9;
    let plan = plan_three_beam_lattice(nu_a, 80e6, 170e6, 50e3).map_err(|e| e.to_string())?;
    let violations = validate_plan(&plan);
    let target = 1.0 / 3f64.sqrt();
    let proj = plan.beams.iter().map(|b| (b.axial_projection() - target).abs()).fold(0.0, f64::max);
    let mut ortho = 0.0f64;
    for i in 0..3 {
        for j in i + 1..3 {
            let (a, b) = (plan.beams[i].k_hat, plan.beams[j].k_hat);
            ortho = ortho.max((a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).abs());
        }
    }
    check(
        violations.is_empty() && proj <= 1e-15 && ortho <= 1e-15,
        format!(
            "{} violations, max ||eps.z| - 1/sqrt(3)| = {proj:.1e}, max |k_i.k_j| = {ortho:.1e}",
            violations.len()
        ),
    )
}

fn angular_kernels() -> Outcome {
    let mut worst_3j = 0.0f64;
    for j1 in 0..=12i32 {
        for j2 in 0..=12i32 {
            for j3 in (j1 - j2).abs()..=(j1 + j2).min(12) {
                for m3 in -j3..=j3 {
                    let mut sum = 0.0;
                    for m1 in -j1..=j1 {
                        let m2 = -m1 - m3;
                        if m2.abs() > j2 {
                            continue;
                        }
                        sum += three_j(j1, j2, j3, m1, m2, m3).powi(2);
                    }
                    worst_3j = worst_3j.max(((2 * j3 + 1) as f64 * sum - 1.0).abs());
                }
            }
        }
    }

    let rule = SphereRule::new(16, 32);
    let table = HarmonicTable::new(&rule, 6);
    let mut worst_c = 0.0f64;
    let mut n = 0;
    for l in 0..=4u32 {
        for j in 0..=6u32 {
            for jp in 0..=6u32 {
                for m in -(j as i32)..=j as i32 {
                    for mp in -(jp as i32)..=jp as i32 {
                        let q = m - mp;
                        if q.unsigned_abs() > l {
                            continue;
                        }
                        let exact = c_tensor_element(l as i32, q, j as i32, m, jp as i32, mp);
                        let quad = table.c_element(&rule, l, q, j, m, jp, mp);
                        worst_c = worst_c.max((exact - quad).abs());
                        n += 1;
                    }
                }
            }
        }
    }
    check(
        worst_3j < 1e-13 && worst_c < 1e-9,
        format!("3-j orthogonality (j <= 12) max error {worst_3j:.1e} (tol 1e-13); {n} C_lq elements vs quadrature max error {worst_c:.1e} (tol 1e-9)"),
    )
}

fn main() {
    let criteria: [(&str, f64, fn() -> Outcome); 11] = [
        ("magic angle identity", 1.0, magic_angle_identity),
        ("route equivalence", 10.0, route_equivalence),
        ("magic fields", 5.0, magic_fields),
        ("polarization invariance of M=0 magic field", 5.0, polarization_invariance),
        ("beta* universality", 10.0, beta_universality),
        ("perturbation-theory oracle", 1.0, perturbation_theory),
        ("convergence in J_max", 1.0, convergence),
        ("|M|=1 degeneracy behavior", 1.0, degeneracy),
        ("no magic frequency at zero field", 1.0, no_magic_frequency),
        ("lattice plan", 1.0, lattice),
        ("angular kernels", 5.0, angular_kernels),
    ];
    let mut failures = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let in_budget = elapsed <= Duration::from_secs_f64(*budget);
        let (status, detail) = match (&result, in_budget) {
            (Ok(d), true) => ("PASS", d.clone()),
            (Ok(d), false) => ("FAIL", format!("{d}; over runtime budget")),
            (Err(d), _) => ("FAIL", d.clone()),
        };
        if status == "FAIL" {
            failures += 1;
        }
        println!(
            "[{status}] criterion {:>2}: {name} ({:.3} s, budget {budget} s): {detail}",
            i + 1,
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
