//! Command dispatch: each command builds one or more tables.

use std::f64::consts::PI;
use std::fmt;

use chemotaxis_core::flow::{perturbed_density, run_flow, FlowState};
use chemotaxis_core::functionals::{bar_f, free_energy, h_theta_bar, h_theta_under, FunctionalReport};
use chemotaxis_core::liouville::{residual, solve_pair, Solution};
use chemotaxis_core::oracle::{asymptotic_ratio_with, LemwParams};
use chemotaxis_core::phase::{classify, sweep, PhaseVerdict};
use chemotaxis_core::radial::integrate_disk;
use chemotaxis_core::scaling::{slope_estimate, verify_identities, BlowdownFamily, ScaleMode};
use chemotaxis_core::{make_grid, Error, FieldKind, FlowCase, Params, RadialField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Command, ConfigError, InitialData, Mode, RunConfig};
use crate::output::{Cell, Table};

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Core(Error),
    Io(std::io::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Core(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Core(e)
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl RunError {
    /// 2 for numerical failure, 3 for anything the configuration could fix.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 3,
            RunError::Io(_) => 1,
            RunError::Core(e) => match e {
                Error::SolverDiverged { .. }
                | Error::Oscillation { .. }
                | Error::Stalled { .. }
                | Error::StepRejected(_)
                | Error::NoRoot
                | Error::MonotonicityLost { .. }
                | Error::NoRealRoot(_) => 2,
                _ => 3,
            },
        }
    }
}

pub fn run(cfg: &RunConfig, seed: u64) -> Result<Vec<Table>, RunError> {
    let p = cfg.params()?;
    match cfg.command {
        Command::Classify => Ok(vec![classify_table(&p)?]),
        Command::Sweep => sweep_tables(cfg, &p),
        Command::Steady => steady_table(cfg, &p),
        Command::Flow => flow_tables(cfg, &p, seed),
        Command::Blowdown => blowdown_tables(cfg, &p),
        Command::Oracle => oracle_table(cfg, &p),
        Command::Functional => functional_tables(cfg, &p, seed),
    }
}

fn rule_cell(v: &PhaseVerdict) -> Cell {
    v.rule.map_or(Cell::Empty, |r| Cell::Int(r.into()))
}

fn classify_table(p: &Params) -> Result<Table, RunError> {
    let v = classify(p)?;
    let mut cols = vec!["m1", "m2", "verdict", "rule_fired", "case", "lambda", "lambda1", "lambda2"];
    cols.extend(v.fired.iter().map(|i| i.name));
    let mut t = Table::new("classify", &cols);
    let mut row: Vec<Cell> = vec![
        v.point.0.into(),
        v.point.1.into(),
        v.verdict.name().into(),
        rule_cell(&v),
        v.case.map(|c| c.to_string()).into(),
        v.lambda.0.into(),
        v.lambda.1.into(),
        v.lambda.2.into(),
    ];
    row.extend(v.fired.iter().map(|i| Cell::Num(i.value)));
    t.push(row);
    Ok(t)
}

fn sweep_tables(cfg: &RunConfig, p: &Params) -> Result<Vec<Table>, RunError> {
    let s = &cfg.sweep;
    let res = sweep(p, (s.m1_range[0], s.m1_range[1]), (s.m2_range[0], s.m2_range[1]), s.resolution)?;
    let mut cells = Table::new("sweep", &["m1", "m2", "verdict", "lambda", "lambda1", "lambda2", "rule_fired"]);
    cells.notes.push(format!("conic: {:?}", res.conic));
    cells.notes.push(format!("rules 1 and 2 co-fire: {}", res.co_fire));
    for c in &res.cells {
        cells.push(vec![
            c.point.0.into(),
            c.point.1.into(),
            c.verdict.name().into(),
            c.lambda.0.into(),
            c.lambda.1.into(),
            c.lambda.2.into(),
            rule_cell(c),
        ]);
    }
    let mut curves = Table::new("curves", &["curve", "m1", "m2"]);
    for c in &res.curves {
        for &(x, y) in &c.points {
            curves.push(vec![c.name.into(), x.into(), y.into()]);
        }
    }
    Ok(vec![cells, curves])
}

fn solve(cfg: &RunConfig, p: &Params) -> Result<Solution, RunError> {
    let g = make_grid(cfg.grid.n, cfg.grid_kind())?;
    Ok(solve_pair(p, &g, &cfg.solve_options())?)
}

fn steady_table(cfg: &RunConfig, p: &Params) -> Result<Vec<Table>, RunError> {
    let sol = solve(cfg, p)?;
    let (rho1, rho2) = sol.densities(p);
    let (r1, r2) = residual(&sol, p);
    let mut t = Table::new("steady", &["r", "u1", "u2", "rho1", "rho2", "residual"]);
    t.notes.push(format!("iterations: {}", sol.iterations));
    let res = r1.max(r2);
    for (i, r) in sol.grid().nodes().iter().enumerate() {
        t.push(vec![
            (*r).into(),
            sol.u1.values()[i].into(),
            sol.u2.values()[i].into(),
            rho1.values()[i].into(),
            rho2.values()[i].into(),
            res.into(),
        ]);
    }
    Ok(vec![t])
}

fn flow_tables(cfg: &RunConfig, p: &Params, seed: u64) -> Result<Vec<Table>, RunError> {
    let fc = cfg.flow_config()?;
    let case = fc.case()?;
    let g = make_grid(cfg.grid.n, cfg.grid_kind())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut density = |m: f64| -> Result<RadialField, Error> {
        let coeffs: Vec<f64> = match cfg.flow.init {
            InitialData::Uniform => vec![],
            InitialData::Perturbed => (0..4).map(|_| rng.gen_range(-0.3..0.3)).collect(),
        };
        perturbed_density(&g, m, &coeffs)
    };
    let init = match case {
        FlowCase::SlavedSecond => FlowState::from_densities(case, density(p.m1)?, None, p)?,
        FlowCase::BothDensities => {
            let r1 = density(p.m1)?;
            FlowState::from_densities(case, r1, Some(density(p.m2)?), p)?
        }
        FlowCase::Exponential => {
            let z = RadialField::zeros(g.clone(), FieldKind::Potential);
            FlowState::from_potentials(z.clone(), z, p)?
        }
    };
    let s = run_flow(init, p, &fc)?;
    let mut trace = Table::new("flow_trace", &["t", "m1", "m2", "energy", "sup_rho1"]);
    trace.notes.push(format!("steady: {}", s.steady));
    if let Some(e) = &s.monitor_off {
        trace.notes.push(format!("energy monitor off: {e}"));
    }
    for row in s.trace_rows() {
        trace.push(row.iter().map(|x| Cell::Num(*x)).collect());
    }
    let mut fin = Table::new("flow_final", &["r", "rho1", "rho2", "u1", "u2"]);
    for (i, r) in g.nodes().iter().enumerate() {
        let rho2 = s.rho2.as_ref().map(|f| f.values()[i]);
        fin.push(vec![(*r).into(), s.rho1.values()[i].into(), rho2.into(), s.u1.values()[i].into(), s.u2.values()[i].into()]);
    }
    Ok(vec![trace, fin])
}

fn blowdown_tables(cfg: &RunConfig, p: &Params) -> Result<Vec<Table>, RunError> {
    let mode = match cfg.blowdown.mode {
        Mode::Full => ScaleMode::Full,
        Mode::Half => ScaleMode::Half,
    };
    let fam = BlowdownFamily::smooth(p, cfg.grid.n, cfg.blowdown.psis.clone(), mode)?;
    let mut ids = Table::new("identities", &["psi", "term", "predicted", "measured", "exact"]);
    for r in verify_identities(&fam, p)? {
        ids.push(vec![r.psi.into(), r.term.name().into(), r.predicted.into(), r.measured.into(), r.exact.to_string().into()]);
    }
    let s = slope_estimate(&fam, p)?;
    let mut slope = Table::new("slope", &["slope", "regime", "predicted"]);
    slope.push(vec![s.slope.into(), format!("{:?}", s.regime).into(), s.predicted.into()]);
    Ok(vec![ids, slope])
}

fn oracle_table(cfg: &RunConfig, p: &Params) -> Result<Vec<Table>, RunError> {
    let beta_m = cfg.oracle.beta_m.unwrap_or(p.beta * p.m1);
    let limit = (p.m2 / (2.0 * PI)).powi(2);
    let mut t = Table::new("oracle", &["psi", "ratio", "limit", "rel_err"]);
    for &psi in &cfg.oracle.psis {
        let lp = LemwParams::new(p.gamma, beta_m, p.m2, psi)?;
        let ratio = asymptotic_ratio_with(&lp, cfg.oracle.steps)?;
        t.push(vec![psi.into(), ratio.into(), limit.into(), ((ratio - limit).abs() / limit).into()]);
    }
    Ok(vec![t])
}

fn report_row(name: &str, r: &FunctionalReport) -> Vec<Cell> {
    vec![
        name.into(),
        r.entropy1.into(),
        r.entropy2.into(),
        r.interaction.into(),
        r.dirichlet.into(),
        r.cross.into(),
        r.log_terms.into(),
        r.total.into(),
    ]
}

fn functional_tables(cfg: &RunConfig, p: &Params, seed: u64) -> Result<Vec<Table>, RunError> {
    let sol = solve(cfg, p)?;
    let (rho1, rho2) = sol.densities(p);
    let mut parts = Table::new(
        "functional",
        &["functional", "entropy1", "entropy2", "interaction", "dirichlet", "cross", "log_terms", "total"],
    );
    parts.push(report_row("free_energy", &free_energy(&rho1, p)?));
    parts.push(report_row("h_theta_bar", &h_theta_bar(&sol.u1, &sol.u2, p)?));
    parts.push(report_row("h_theta_under", &h_theta_under(&rho1, &rho2, p)?));
    let (reduced, _) = bar_f(&rho1, p)?;
    parts.notes.push(format!("reduced energy: {}", crate::output::num(reduced)));

    // mass-preserving directions rho (phi - <phi>_rho) around the steady state
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = cfg.functional.step;
    let mut dirs = Table::new("directions", &["direction", "derivative"]);
    for k in 0..cfg.functional.directions {
        let coeffs: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let phi = |r: f64| coeffs.iter().enumerate().map(|(j, c)| c * ((j as f64 + 1.0) * PI * r).cos()).sum::<f64>() / 4.0;
        let weighted = RadialField::from_fn(rho1.grid().clone(), FieldKind::Plain, phi)?;
        let w: Vec<f64> = weighted.values().iter().zip(rho1.values()).map(|(f, r)| f * r).collect();
        let mean = integrate_disk(&RadialField::plain(rho1.grid().clone(), w)?) / p.m1;
        let shifted = |s: f64| -> Result<RadialField, Error> {
            let v = weighted.values().iter().zip(rho1.values()).map(|(f, r)| r * (1.0 + s * (f - mean))).collect();
            RadialField::density(rho1.grid().clone(), v)
        };
        let plus = bar_f(&shifted(eps)?, p)?.0;
        let minus = bar_f(&shifted(-eps)?, p)?.0;
        dirs.push(vec![Cell::Int(k as i64), ((plus - minus) / (2.0 * eps)).into()]);
    }
    Ok(vec![parts, dirs])
}
