use starkpol::angular::Branch;
use starkpol::lattice::{plan_three_beam_lattice_with, ScaleThresholds};
use starkpol::magic::{
    find_magic_field as find_fields, magic_angle as magic_angle_report, magic_angle_degrees, sweep as run_sweep,
    FieldSearch, SweepContext, SweepGrid, SweepVariable,
};
use starkpol::polarizability::{alpha_effective, alpha_tensor_closed_form, PolarizationVector, StateLabel};
use starkpol::stark::{alignment, check_convergence, solve, DressedManifold};
use starkpol::units::{
    alpha_lambda_at, bundled_molecule, resolve_molecule, MoleculeSpec, MHZ_PER_W_CM2_PER_AU_POLARIZABILITY,
    SPEED_OF_LIGHT,
};

use crate::table::{format_number, Cell, ResultTable};
use crate::{
    AngleArgs, CliError, ConvergenceArgs, EigenArgs, FigureArgs, FigureId, FindArgs, LatticeArgs, MoleculeArgs,
    PolarArgs, SweepArgs, Var,
};

const AU: &str = "a.u.";

fn load(args: &MoleculeArgs) -> Result<MoleculeSpec, CliError> {
    Ok(resolve_molecule(&args.molecule)?)
}

fn molecule_meta(t: &mut ResultTable, spec: &MoleculeSpec, j_max: u32) {
    t.meta("molecule", spec.name());
    t.meta("B_MHz", format_number(spec.b_mhz()));
    t.meta("d00_debye", format_number(spec.d00_debye()));
    t.meta("jmax", j_max);
}

fn light_meta(t: &mut ResultTable, spec: &MoleculeSpec, nu_cm: f64) -> Result<starkpol::units::MolecularPolarizability, CliError> {
    let alpha = alpha_lambda_at(spec, nu_cm)?;
    t.meta("nu_cm-1", format_number(nu_cm));
    t.meta("alpha_par_au", format_number(alpha.parallel));
    t.meta("alpha_perp_au", format_number(alpha.perpendicular));
    Ok(alpha)
}

/// Column-safe state tag: `J1M0`, `J1M1+`, `J2M-1`.
fn tag(s: &StateLabel) -> String {
    let suffix = match s.branch {
        Branch::Plus => "+",
        Branch::Minus => "-",
        Branch::None => "",
    };
    format!("J{}M{}{suffix}", s.j_tilde, s.m)
}

fn branch_sign(b: Branch) -> i32 {
    match b {
        Branch::Plus => 1,
        Branch::Minus => -1,
        Branch::None => 0,
    }
}

fn state_columns(t: &mut ResultTable) {
    t.column("J", "1");
    t.column("M", "1");
    t.column("branch", "1");
}

fn state_cells(s: &StateLabel) -> Vec<Cell> {
    vec![s.j_tilde.into(), s.m.into(), branch_sign(s.branch).into()]
}

fn m_abs_max(states: &[StateLabel]) -> u32 {
    states.iter().map(|s| s.m.unsigned_abs()).max().unwrap_or(0)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, CliError> {
    Ok(SweepGrid::new(SweepVariable::Field, lo, hi, n)?.points())
}

fn check_intensity(i: f64) -> Result<(), CliError> {
    if i.is_finite() && i >= 0.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("intensity must be finite and non-negative, got {i}")))
    }
}

fn shift_mhz(alpha: f64, intensity: f64) -> f64 {
    -alpha * MHZ_PER_W_CM2_PER_AU_POLARIZABILITY * intensity
}

pub(crate) fn eigen(a: &EigenArgs) -> Result<ResultTable, CliError> {
    let spec = load(&a.molecule)?;
    let j_max = a.molecule.jmax;
    let mut t = ResultTable::default();
    molecule_meta(&mut t, &spec, j_max);
    t.meta("field_kV_cm", format_number(a.field));
    t.summary("beta", format_number(spec.beta(a.field)));
    t.column("J", "1");
    t.column("M", "1");
    t.column("E", "MHz");
    t.column("E/B", "1");
    t.column("cos2theta", "1");
    for s in &a.states.0 {
        let sys = solve(&spec, a.field, s.m.abs(), j_max)?;
        let e = sys.energy(s.j_tilde)?;
        t.push(vec![
            s.j_tilde.into(),
            s.m.into(),
            e.into(),
            (e / spec.b_mhz()).into(),
            alignment(&sys, s.j_tilde)?.into(),
        ]);
    }
    Ok(t)
}

pub(crate) fn polar(a: &PolarArgs) -> Result<ResultTable, CliError> {
    check_intensity(a.intensity)?;
    let spec = load(&a.molecule)?;
    let j_max = a.molecule.jmax;
    let pol = a.pol.or_z();
    let mut t = ResultTable::default();
    molecule_meta(&mut t, &spec, j_max);
    let alpha = light_meta(&mut t, &spec, a.light.nu)?;
    t.meta("field_kV_cm", format_number(a.field));
    t.meta("pol", &pol.name);
    t.meta("intensity_W_cm2", format_number(a.intensity));
    state_columns(&mut t);
    for c in ["alpha_xx", "alpha_yy", "alpha_zz", "alpha_xy", "alpha_xz", "alpha_yz", "alpha_eff"] {
        t.column(c, AU);
    }
    t.column("dE", "MHz");
    let manifold = DressedManifold::new(&spec, a.field, j_max, m_abs_max(&a.states.0))?;
    for s in &a.states.0 {
        let sys = manifold.system(s.m)?;
        let sys = if s.m < 0 { sys.mirrored() } else { sys.clone() };
        let tensor = alpha_tensor_closed_form(&sys, *s, alpha)?;
        let eff = alpha_effective(&manifold, *s, alpha, &pol.vector)?;
        let c = &tensor.components;
        let mut row = state_cells(s);
        for (i, j) in [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)] {
            row.push(c[(i, j)].re.into());
        }
        row.push(eff.into());
        row.push(shift_mhz(eff, a.intensity).into());
        t.push(row);
    }
    Ok(t)
}

pub(crate) fn sweep(a: &SweepArgs) -> Result<ResultTable, CliError> {
    check_intensity(a.intensity)?;
    if a.var == Var::Theta && a.pol.choice().is_some() {
        return Err(CliError::Usage("--pol/--theta cannot be combined with --var theta".into()));
    }
    let spec = load(&a.molecule)?;
    let j_max = a.molecule.jmax;
    let (variable, default_range) = match a.var {
        Var::Field => (SweepVariable::Field, (0.0, 15.0)),
        Var::Theta => (SweepVariable::Theta, (0.0, 90.0)),
        Var::Nu => {
            let table = spec.alpha_table();
            (SweepVariable::Nu, (table[0].nu_cm, table[table.len() - 1].nu_cm))
        }
    };
    let (lo, hi) = a.range.map_or(default_range, |r| (r.0, r.1));
    let grid = SweepGrid::new(variable, lo, hi, a.steps)?;
    let pol = a.pol.or_z();
    let context = SweepContext {
        field_kv_cm: a.field,
        nu_cm: a.light.nu,
        polarization: pol.vector,
        j_max,
        intensity_w_cm2: a.intensity,
    };
    let mut t = ResultTable::default();
    molecule_meta(&mut t, &spec, j_max);
    t.meta("var", variable.column().0);
    t.meta("range", format!("{}:{}", format_number(lo), format_number(hi)));
    t.meta("steps", a.steps);
    if a.var != Var::Field {
        t.meta("field_kV_cm", format_number(a.field));
    }
    if a.var != Var::Nu {
        light_meta(&mut t, &spec, a.light.nu)?;
    }
    if a.var != Var::Theta {
        t.meta("pol", &pol.name);
    }
    t.meta("intensity_W_cm2", format_number(a.intensity));
    let (name, unit) = variable.column();
    t.column(name, unit);
    for s in &a.states.0 {
        t.column(format!("alpha_{}", tag(s)), AU);
    }
    for s in &a.states.0 {
        t.column(format!("dE_{}", tag(s)), "MHz");
    }
    for r in run_sweep(&spec, &grid, &context, &a.states.0)? {
        let mut row = vec![Cell::Num(r.value)];
        row.extend(r.alpha.iter().map(|&x| Cell::Num(x)));
        row.extend(r.delta_e_mhz.iter().map(|&x| Cell::Num(x)));
        t.push(row);
    }
    Ok(t)
}

pub(crate) fn find_magic_field(a: &FindArgs) -> Result<ResultTable, CliError> {
    let spec = load(&a.molecule)?;
    let j_max = a.molecule.jmax;
    let pols = match a.pol.choice() {
        Some(p) => vec![p],
        None => vec![crate::parse_pol("z").expect("z"), crate::parse_pol("x").expect("x")],
    };
    let search = FieldSearch {
        from_kv_cm: a.range.0,
        to_kv_cm: a.range.1,
        nu_cm: a.light.nu,
        j_max,
        scan_points: a.scan_points,
    };
    let mut t = ResultTable::default();
    molecule_meta(&mut t, &spec, j_max);
    light_meta(&mut t, &spec, a.light.nu)?;
    t.meta("pair", format!("{}:{}", a.pair.0, a.pair.1));
    t.meta("range_kV_cm", format!("{}:{}", format_number(a.range.0), format_number(a.range.1)));
    t.meta("scan_points", a.scan_points);
    t.column("pol", "label");
    t.column("E*", "kV/cm");
    t.column("beta*", "1");
    t.column("bracket_lo", "kV/cm");
    t.column("bracket_hi", "kV/cm");
    t.column("tolerance", "kV/cm");
    t.column("residual", AU);
    let mut failures = Vec::new();
    for p in &pols {
        match find_fields(&spec, (a.pair.0, a.pair.1), &p.vector, &p.name, &search) {
            Ok(reports) => {
                for r in reports {
                    t.push(vec![
                        Cell::Text(p.name.clone()),
                        r.field_kv_cm.into(),
                        r.beta.into(),
                        r.bracket.0.into(),
                        r.bracket.1.into(),
                        r.tolerance.into(),
                        r.residual.into(),
                    ]);
                }
            }
            Err(e) => match CliError::from(e) {
                CliError::Computation(msg) => failures.push((p.name.clone(), msg)),
                usage => return Err(usage),
            },
        }
    }
    if t.rows.is_empty() {
        let msg = failures.iter().map(|(p, m)| format!("pol {p}: {m}")).collect::<Vec<_>>().join("; ");
        return Err(CliError::Computation(msg));
    }
    for (p, msg) in failures {
        t.summary(&format!("no_crossing.{p}"), msg);
    }
    Ok(t)
}

pub(crate) fn magic_angle(a: &AngleArgs) -> Result<ResultTable, CliError> {
    let spec = load(&a.molecule)?;
    let j_max = a.molecule.jmax;
    let fields = linspace(a.range.0, a.range.1, a.steps)?;
    let mut t = ResultTable::default();
    molecule_meta(&mut t, &spec, j_max);
    light_meta(&mut t, &spec, a.light.nu)?;
    t.meta("pair", format!("{}:{}", a.pair.0, a.pair.1));
    t.meta("range_kV_cm", format!("{}:{}", format_number(a.range.0), format_number(a.range.1)));
    t.meta("steps", a.steps);
    let report = magic_angle_report(&spec, (a.pair.0, a.pair.1), &fields, a.light.nu, j_max)?;
    t.summary("theta0_deg", format_number(report.theta0_deg));
    t.summary("alpha_bar_au", format_number(report.alpha_bar));
    t.summary("spread_au", format_number(report.spread));
    t.summary("relative_spread", format_number(report.spread / report.alpha_bar.abs()));
    t.summary("common_angle", report.common_angle);
    t.summary("degenerate", report.degenerate);
    t.column("E", "kV/cm");
    t.column(format!("alpha_{}@theta0", tag(&a.pair.0)), AU);
    t.column(format!("alpha_{}@theta0", tag(&a.pair.1)), AU);
    t.column("crossing_angle", "deg");
    for ((field, alphas), crossing) in fields.iter().zip(&report.alpha_at_theta0).zip(&report.crossing_angles_deg) {
        t.push(vec![(*field).into(), alphas[0].into(), alphas[1].into(), (*crossing).into()]);
    }
    Ok(t)
}

pub(crate) fn lattice(a: &LatticeArgs) -> Result<ResultTable, CliError> {
    for (name, v) in [("nu", a.nu), ("f-mot", a.f_mot), ("ratio", a.ratio)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(CliError::Usage(format!("--{name} must be positive, got {v}")));
        }
    }
    let nu_hz = a.nu * SPEED_OF_LIGHT * 1e2;
    let thresholds = ScaleThresholds {
        nu_over_delta: a.ratio,
        delta_over_f_mot: a.ratio,
    };
    let plan = plan_three_beam_lattice_with(nu_hz, a.delta_b * 1e6, a.delta_c * 1e6, a.f_mot * 1e3, thresholds)?;
    let mut t = ResultTable::default();
    t.meta("nu_cm-1", format_number(a.nu));
    t.meta("delta_b_MHz", format_number(a.delta_b));
    t.meta("delta_c_MHz", format_number(a.delta_c));
    t.meta("f_mot_kHz", format_number(a.f_mot));
    t.meta("ratio", format_number(a.ratio));
    t.summary("valid", plan.is_valid());
    t.summary("min_beat_Hz", format_number(plan.min_beat_hz()));
    t.summary("magic_projection", format_number((1.0f64 / 3.0).sqrt()));
    t.column("beam", "label");
    for c in ["k_x", "k_y", "k_z", "eps_x", "eps_y", "eps_z"] {
        t.column(c, "1");
    }
    t.column("nu", "Hz");
    t.column("delta", "Hz");
    t.column("eps.z", "1");
    for b in &plan.beams {
        let mut row = vec![Cell::Text(b.name.to_string())];
        row.extend(b.k_hat.iter().chain(&b.eps_hat).map(|&x| Cell::Num(x)));
        row.push(b.nu_hz.into());
        row.push(b.delta_hz.into());
        row.push(b.axial_projection().into());
        t.push(row);
    }
    t.details = Some(serde_json::from_str(&plan.to_json()).expect("plan JSON is valid"));
    Ok(t)
}

pub(crate) fn convergence(a: &ConvergenceArgs) -> Result<ResultTable, CliError> {
    let spec = load(&a.molecule)?;
    let j_max = a.molecule.jmax;
    let fields = match (a.field, a.range) {
        (Some(f), _) => vec![f],
        (None, Some(r)) => linspace(r.0, r.1, a.steps)?,
        (None, None) => linspace(0.0, 15.0, a.steps)?,
    };
    let mut t = ResultTable::default();
    molecule_meta(&mut t, &spec, j_max);
    t.meta("fields", fields.len());
    t.column("E", "kV/cm");
    t.column("J", "1");
    t.column("M", "1");
    t.column(format!("E_jmax{j_max}"), "MHz");
    t.column(format!("E_jmax{}", j_max + 4), "MHz");
    t.column("relative_change", "1");
    t.column("converged", "bool");
    let mut all = true;
    for &field in &fields {
        for s in &a.states.0 {
            let r = check_convergence(&spec, field, s.m, s.j_tilde, j_max)?;
            all &= r.converged;
            t.push(vec![
                field.into(),
                s.j_tilde.into(),
                s.m.into(),
                r.energy_mhz.into(),
                r.energy_extended_mhz.into(),
                r.relative_change.into(),
                r.converged.into(),
            ]);
        }
    }
    t.summary("all_converged", all);
    Ok(t)
}

fn figure_states() -> Vec<StateLabel> {
    vec![
        StateLabel::m0(0),
        StateLabel::m0(1),
        StateLabel::new(1, 1, Branch::Plus).expect("valid label"),
        StateLabel::new(1, 1, Branch::Minus).expect("valid label"),
    ]
}

pub(crate) fn figure(a: &FigureArgs) -> Result<ResultTable, CliError> {
    let spec = bundled_molecule(&a.molecule.molecule).ok_or_else(|| {
        CliError::Usage(format!("figure data needs a bundled molecule (KRb or RbCs), got '{}'", a.molecule.molecule))
    })?;
    let j_max = a.molecule.jmax;
    let mut t = ResultTable::default();
    molecule_meta(&mut t, &spec, j_max);
    light_meta(&mut t, &spec, a.light.nu)?;
    let context = |field: f64, polarization: PolarizationVector| SweepContext {
        field_kv_cm: field,
        nu_cm: a.light.nu,
        polarization,
        j_max,
        intensity_w_cm2: 1.0,
    };
    let labels = figure_states();
    match a.id {
        FigureId::Fig2 => {
            t.meta("figure", "fig2");
            t.summary("label.J1M1+", "|+1>+|-1>");
            t.summary("label.J1M1-", "|+1>-|-1>");
            t.column("panel", "label");
            t.column("E", "kV/cm");
            for s in &labels {
                t.column(format!("alpha_{}", tag(s)), AU);
            }
            let grid = SweepGrid::new(SweepVariable::Field, 0.0, 15.0, 61)?;
            let panels = [("parallel", PolarizationVector::z()), ("perpendicular", PolarizationVector::x())];
            for (panel, pol) in panels {
                for r in run_sweep(&spec, &grid, &context(0.0, pol), &labels)? {
                    let mut row = vec![Cell::Text(panel.to_string()), r.value.into()];
                    row.extend(r.alpha.iter().map(|&x| Cell::Num(x)));
                    t.push(row);
                }
            }
        }
        FigureId::Fig3 => {
            t.meta("figure", "fig3");
            let state = StateLabel::m0(0);
            t.column("E", "kV/cm");
            t.column("theta", "deg");
            t.column(format!("alpha_{}", tag(&state)), AU);
            let thetas = SweepGrid::new(SweepVariable::Theta, 0.0, 90.0, 31)?;
            for field in linspace(0.0, 15.0, 31)? {
                for r in run_sweep(&spec, &thetas, &context(field, PolarizationVector::z()), &[state])? {
                    t.push(vec![field.into(), r.value.into(), r.alpha[0].into()]);
                }
            }
        }
        FigureId::Fig4 => {
            t.meta("figure", "fig4");
            let step = match spec.name() {
                "KRb" => 0.6,
                _ => 0.3,
            };
            t.summary("theta0_deg", format_number(magic_angle_degrees()));
            t.column("E", "kV/cm");
            t.column("theta", "deg");
            for s in &labels {
                t.column(format!("alpha_{}", tag(s)), AU);
            }
            let thetas = SweepGrid::new(SweepVariable::Theta, 0.0, 90.0, 91)?;
            for k in 1..=10 {
                let field = k as f64 * step;
                for r in run_sweep(&spec, &thetas, &context(field, PolarizationVector::z()), &labels)? {
                    let mut row = vec![field.into(), r.value.into()];
                    row.extend(r.alpha.iter().map(|&x| Cell::Num(x)));
                    t.push(row);
                }
            }
        }
    }
    Ok(t)
}
