//! Time integration of the three reduced parabolic systems.
//!
//! Densities move by the conservative Scharfetter-Gummel flux
//! `G = a [B(-dphi) rho_i - B(dphi) rho_{i+1}]`, `B(x) = x / (e^x - 1)`, taken
//! implicitly with the drift potential frozen at the start of the step. The
//! resulting matrix is an M-matrix whose column sums are the cell volumes over
//! `dt`, so each step conserves mass and keeps densities nonnegative. The
//! exponential system uses implicit diffusion with an explicit source.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::functionals::{f_m, h_theta_bar, h_theta_under};
use crate::liouville::{Gibbs, SolveOptions, Solution};
use crate::model::{FieldKind, FlowCase, FlowConfig, Params, RadialField, RadialGrid, Theta};
use crate::radial::{inv_laplacian_values, log_sum_exp, weighted_sum, Tridiagonal};

/// Relative energy increase tolerated on an accepted step.
pub const ENERGY_SLACK: f64 = 1e-10;
/// Relative change per unit time below which a run counts as stationary.
pub const STEADY_RATE: f64 = 1e-10;
/// Smallest time step before a run is abandoned.
pub const MIN_DT: f64 = 1e-14;
const DEGENERATE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub rho1: RadialField,
    pub rho2: Option<RadialField>,
    pub u1: RadialField,
    pub u2: RadialField,
    pub energy_trace: Vec<(f64, f64)>,
    pub mass_trace: Vec<(f64, f64, f64)>,
    pub sup_trace: Vec<f64>,
    /// Set when the energy monitor was switched off.
    pub monitor_off: Option<Error>,
    /// The run stopped on the stationarity test before `t_end`.
    pub steady: bool,
}

impl FlowState {
    /// Initial state for the density systems; potentials are derived from the densities.
    pub fn from_densities(case: FlowCase, rho1: RadialField, rho2: Option<RadialField>, p: &Params) -> Result<Self> {
        let g = rho1.grid().clone();
        if let Some(r2) = &rho2 {
            if !rho1.same_grid(r2) {
                return Err(Error::GridMismatch);
            }
        }
        let (u1, u2, rho2) = match case {
            FlowCase::SlavedSecond => {
                let u1 = inv_laplacian_values(&g, rho1.values());
                let u2 = slaved_potential(&g, &u1, p, None)?;
                (u1, u2, None)
            }
            FlowCase::BothDensities => {
                let r2 = rho2.ok_or(Error::MissingField("rho2"))?;
                (inv_laplacian_values(&g, rho1.values()), inv_laplacian_values(&g, r2.values()), Some(r2))
            }
            FlowCase::Exponential => return Err(Error::MissingField("u1")),
        };
        let mut s = FlowState {
            t: 0.0,
            rho1,
            rho2,
            u1: potential(&g, u1)?,
            u2: potential(&g, u2)?,
            energy_trace: vec![],
            mass_trace: vec![],
            sup_trace: vec![],
            monitor_off: None,
            steady: false,
        };
        s.record(case, p)?;
        Ok(s)
    }

    /// Initial state for the exponential system; densities are the Gibbs densities of the potentials.
    pub fn from_potentials(u1: RadialField, u2: RadialField, p: &Params) -> Result<Self> {
        if !u1.same_grid(&u2) {
            return Err(Error::GridMismatch);
        }
        let (rho1, rho2) = gibbs_densities(u1.grid(), u1.values(), u2.values(), p)?;
        let mut s = FlowState {
            t: 0.0,
            rho1,
            rho2: Some(rho2),
            u1,
            u2,
            energy_trace: vec![],
            mass_trace: vec![],
            sup_trace: vec![],
            monitor_off: None,
            steady: false,
        };
        s.record(FlowCase::Exponential, p)?;
        Ok(s)
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        self.rho1.grid()
    }

    pub fn masses(&self) -> (f64, f64) {
        let g = self.grid();
        let m2 = self.rho2.as_ref().map_or(0.0, |r| weighted_sum(g, r.values()));
        (weighted_sum(g, self.rho1.values()), m2)
    }

    /// The energy the given system is monitored with.
    pub fn energy(&self, case: FlowCase, p: &Params) -> Result<f64> {
        match case {
            FlowCase::SlavedSecond => Ok(f_m(&self.rho1, &self.u2, p)?.total),
            FlowCase::BothDensities => {
                let r2 = self.rho2.as_ref().ok_or(Error::MissingField("rho2"))?;
                Ok(h_theta_under(&self.rho1, r2, p)?.total)
            }
            FlowCase::Exponential => Ok(h_theta_bar(&self.u1, &self.u2, p)?.total),
        }
    }

    fn record(&mut self, case: FlowCase, p: &Params) -> Result<()> {
        let e = self.energy(case, p)?;
        let (m1, m2) = self.masses();
        self.energy_trace.push((self.t, e));
        self.mass_trace.push((self.t, m1, m2));
        self.sup_trace.push(self.rho1.max());
        Ok(())
    }

    fn last_energy(&self, case: FlowCase, p: &Params) -> Result<f64> {
        match self.energy_trace.last() {
            Some(&(t, e)) if t == self.t => Ok(e),
            _ => self.energy(case, p),
        }
    }

    /// Rows `(t, m1, m2, energy, sup rho_1)` of the recorded history.
    pub fn trace_rows(&self) -> Vec<[f64; 5]> {
        self.energy_trace
            .iter()
            .zip(&self.mass_trace)
            .zip(&self.sup_trace)
            .map(|((&(t, e), &(_, m1, m2)), &sup)| [t, m1, m2, e, sup])
            .collect()
    }
}

fn potential(g: &Arc<RadialGrid>, mut v: Vec<f64>) -> Result<RadialField> {
    if let Some(last) = v.last_mut() {
        *last = 0.0;
    }
    RadialField::potential(g.clone(), v)
}

fn gibbs_densities(g: &Arc<RadialGrid>, u1: &[f64], u2: &[f64], p: &Params) -> Result<(RadialField, RadialField)> {
    let tb = p.theta.value() * p.beta;
    let e1: Vec<f64> = u1.iter().zip(u2).map(|(a, b)| p.alpha * a - p.beta * b).collect();
    let e2: Vec<f64> = u1.iter().zip(u2).map(|(a, b)| -p.gamma * b - tb * a).collect();
    let rho = |m: f64, e: &[f64]| RadialField::density(g.clone(), log_sum_exp(g, e).1.iter().map(|x| m * x).collect());
    Ok((rho(p.m1, &e1)?, rho(p.m2, &e2)?))
}

/// `u_2` solving `-Delta u_2 = M_2 e^{-gamma u_2 - theta beta u_1} / Z`, warm-started from `warm`.
fn slaved_potential(g: &Arc<RadialGrid>, u1: &[f64], p: &Params, warm: Option<&[f64]>) -> Result<Vec<f64>> {
    let n = g.n();
    if p.m2 == 0.0 {
        return Ok(vec![0.0; n + 1]);
    }
    let tb = p.theta.value() * p.beta;
    let ext: Vec<f64> = u1.iter().map(|u| -tb * u).collect();
    if p.gamma == 0.0 {
        let rho: Vec<f64> = log_sum_exp(g, &ext).1.iter().map(|x| p.m2 * x).collect();
        return Ok(inv_laplacian_values(g, &rho));
    }
    let opts = SolveOptions::default();
    let init = warm.map_or_else(|| vec![0.0; n + 1], |w| w.to_vec());
    let s = Gibbs { grid: g, mass: p.m2, coef: -p.gamma, external: &ext }.newton(init, opts.tol, opts.max_iter)?;
    Ok(s.values)
}

fn bernoulli(x: f64) -> f64 {
    if x.abs() < 1e-10 {
        1.0 - 0.5 * x
    } else {
        x / x.exp_m1()
    }
}

/// Face coefficients `2 pi r_f / h_f`.
fn face_weights(g: &RadialGrid) -> Vec<f64> {
    g.faces().iter().zip(g.spacing()).map(|(r, h)| 2.0 * PI * r / h).collect()
}

/// One implicit drift-diffusion step `rho_t = div(grad rho - rho grad phi)` with no-flux boundaries.
fn drift_diffusion(g: &RadialGrid, rho: &[f64], phi: &[f64], dt: f64) -> Vec<f64> {
    let n = g.n();
    let a = face_weights(g);
    let vol = g.volumes();
    let mut m = Tridiagonal::zeros(n + 1);
    for i in 0..=n {
        m.diag[i] = vol[i] / dt;
    }
    for f in 0..n {
        let dphi = phi[f + 1] - phi[f];
        let out = a[f] * bernoulli(-dphi);
        let back = a[f] * bernoulli(dphi);
        m.diag[f] += out;
        m.upper[f] = -back;
        m.lower[f + 1] = -out;
        m.diag[f + 1] += back;
    }
    let rhs: Vec<f64> = rho.iter().zip(vol).map(|(r, v)| r * v / dt).collect();
    m.solve(&rhs)
}

/// One step `(V/dt + K) u' = V u / dt + V source` with `u = 0` at `r = 1`.
fn heat_step(g: &RadialGrid, u: &[f64], source: &[f64], dt: f64) -> Vec<f64> {
    let n = g.n();
    let a = face_weights(g);
    let vol = g.volumes();
    let mut m = Tridiagonal::zeros(n);
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        m.diag[i] = vol[i] / dt + a[i];
        if i > 0 {
            m.diag[i] += a[i - 1];
            m.lower[i] = -a[i - 1];
        }
        if i + 1 < n {
            m.upper[i] = -a[i];
        }
        rhs[i] = vol[i] * (u[i] / dt + source[i]);
    }
    let mut out = m.solve(&rhs);
    out.push(0.0);
    out
}

fn check_nonnegative(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| *x >= 0.0) {
        Ok(())
    } else {
        Err(Error::StepRejected("negative density"))
    }
}

fn accept_energy(before: f64, after: f64) -> Result<()> {
    if after.is_finite() && after <= before + ENERGY_SLACK * before.abs() {
        Ok(())
    } else {
        Err(Error::StepRejected("energy increase"))
    }
}

/// Species 1 evolves; `u_2` is re-solved from `rho_1` after every step.
pub fn step_pe2(s: &FlowState, p: &Params, dt: f64) -> Result<FlowState> {
    let g = s.grid().clone();
    let before = s.last_energy(FlowCase::SlavedSecond, p)?;
    let phi: Vec<f64> = s.u1.values().iter().zip(s.u2.values()).map(|(a, b)| p.alpha * a - p.beta * b).collect();
    let rho = drift_diffusion(&g, s.rho1.values(), &phi, dt);
    check_nonnegative(&rho)?;
    let u1 = inv_laplacian_values(&g, &rho);
    let u2 = slaved_potential(&g, &u1, p, Some(s.u2.values())).map_err(|_| Error::StepRejected("w solve failed"))?;
    let mut next = FlowState {
        t: s.t + dt,
        rho1: RadialField::density(g.clone(), rho)?,
        rho2: None,
        u1: potential(&g, u1)?,
        u2: potential(&g, u2)?,
        energy_trace: s.energy_trace.clone(),
        mass_trace: s.mass_trace.clone(),
        sup_trace: s.sup_trace.clone(),
        monitor_off: s.monitor_off.clone(),
        steady: false,
    };
    let after = next.energy(FlowCase::SlavedSecond, p)?;
    accept_energy(before, after)?;
    next.record(FlowCase::SlavedSecond, p)?;
    Ok(next)
}

/// Both species evolve with Newtonian potentials. The energy is enforced only
/// under mutual repulsion, where the system is a gradient flow.
pub fn step_pe_full(s: &FlowState, p: &Params, dt: f64) -> Result<FlowState> {
    let g = s.grid().clone();
    let r2 = s.rho2.as_ref().ok_or(Error::MissingField("rho2"))?;
    let (u1, u2) = (s.u1.values(), s.u2.values());
    let tb = p.theta.value() * p.beta;
    let phi1: Vec<f64> = u1.iter().zip(u2).map(|(a, b)| p.alpha * a - p.beta * b).collect();
    let phi2: Vec<f64> = u1.iter().zip(u2).map(|(a, b)| -p.gamma * b - tb * a).collect();
    let rho1 = drift_diffusion(&g, s.rho1.values(), &phi1, dt);
    let rho2 = drift_diffusion(&g, r2.values(), &phi2, dt);
    check_nonnegative(&rho1)?;
    check_nonnegative(&rho2)?;
    let mut next = FlowState {
        t: s.t + dt,
        u1: potential(&g, inv_laplacian_values(&g, &rho1))?,
        u2: potential(&g, inv_laplacian_values(&g, &rho2))?,
        rho1: RadialField::density(g.clone(), rho1)?,
        rho2: Some(RadialField::density(g.clone(), rho2)?),
        energy_trace: s.energy_trace.clone(),
        mass_trace: s.mass_trace.clone(),
        sup_trace: s.sup_trace.clone(),
        monitor_off: s.monitor_off.clone(),
        steady: false,
    };
    if p.theta == Theta::ConflictFree {
        let before = s.last_energy(FlowCase::BothDensities, p)?;
        accept_energy(before, next.energy(FlowCase::BothDensities, p)?)?;
    }
    next.record(FlowCase::BothDensities, p)?;
    Ok(next)
}

/// Whether the dual energy is a Lyapunov functional of the exponential system,
/// and why not when it is not monitored.
pub fn exp_monitor(p: &Params) -> std::result::Result<bool, Error> {
    let q = p.beta * p.beta + p.alpha * p.gamma * p.theta.value();
    if q.abs() < DEGENERATE {
        return Err(Error::DegenerateQuadraticForm(q.abs()));
    }
    Ok(p.theta == Theta::Conflict && p.alpha * p.gamma > p.beta * p.beta)
}

/// Potentials evolve by `u_t = Delta u + rho(u)` with the normalization taken at the old time.
pub fn step_exp(s: &FlowState, p: &Params, dt: f64) -> Result<FlowState> {
    let g = s.grid().clone();
    let (u1, u2) = (s.u1.values(), s.u2.values());
    let (rho1, rho2) = gibbs_densities(&g, u1, u2, p)?;
    let n1 = heat_step(&g, u1, rho1.values(), dt);
    let n2 = heat_step(&g, u2, rho2.values(), dt);
    let (d1, d2) = gibbs_densities(&g, &n1, &n2, p)?;
    let monitor = exp_monitor(p);
    let mut next = FlowState {
        t: s.t + dt,
        rho1: d1,
        rho2: Some(d2),
        u1: RadialField::potential(g.clone(), n1)?,
        u2: RadialField::potential(g.clone(), n2)?,
        energy_trace: s.energy_trace.clone(),
        mass_trace: s.mass_trace.clone(),
        sup_trace: s.sup_trace.clone(),
        monitor_off: monitor.clone().err(),
        steady: false,
    };
    if monitor == Ok(true) {
        let before = s.last_energy(FlowCase::Exponential, p)?;
        accept_energy(before, next.energy(FlowCase::Exponential, p)?)?;
    }
    next.record(FlowCase::Exponential, p)?;
    Ok(next)
}

fn state_vector(s: &FlowState, case: FlowCase) -> Vec<f64> {
    match case {
        FlowCase::Exponential => s.u1.values().iter().chain(s.u2.values()).copied().collect(),
        _ => {
            let r2 = s.rho2.as_ref().map_or(&[][..], |r| r.values());
            s.rho1.values().iter().chain(r2).copied().collect()
        }
    }
}

fn relative_change(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// Integrates to `t_end`, or until the state changes by less than [`STEADY_RATE`]
/// per unit time.
pub fn run_flow(initial: FlowState, p: &Params, cfg: &FlowConfig) -> Result<FlowState> {
    let case = cfg.case()?;
    let step = match case {
        FlowCase::SlavedSecond => step_pe2,
        FlowCase::BothDensities => step_pe_full,
        FlowCase::Exponential => step_exp,
    };
    let mut s = initial;
    let mut dt = cfg.dt;
    let end_tol = 1e-12 * cfg.t_end;
    while s.t < cfg.t_end - end_tol {
        let h = dt.min(cfg.t_end - s.t);
        match step(&s, p, h) {
            Ok(next) => {
                let change = relative_change(&state_vector(&s, case), &state_vector(&next, case)) / h;
                s = next;
                if change < STEADY_RATE {
                    s.steady = true;
                    break;
                }
                if cfg.adapt {
                    dt = (2.0 * dt).min(cfg.dt);
                }
            }
            Err(Error::StepRejected(why)) => {
                if !cfg.adapt {
                    return Err(Error::StepRejected(why));
                }
                dt *= 0.5;
                if dt < MIN_DT {
                    return Err(Error::Stalled { t: s.t, dt });
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(s)
}

/// Liouville residual of a stationary density state, with `u_1, u_2` as stored.
pub fn steady_residual(s: &FlowState, p: &Params) -> Result<f64> {
    Ok(Solution::from_potentials(s.u1.clone(), s.u2.clone(), p)?.residual)
}

/// A field helper for initial data: `c (1 + a cos(k pi r))`-type perturbations
/// projected to mass `m`.
pub fn perturbed_density(g: &Arc<RadialGrid>, m: f64, coeffs: &[f64]) -> Result<RadialField> {
    let f = RadialField::from_fn(g.clone(), FieldKind::Density, |r| {
        let bump: f64 = coeffs.iter().enumerate().map(|(k, c)| c * ((k as f64 + 1.0) * PI * r).cos()).sum();
        (1.0 + bump).max(0.05)
    })?;
    crate::model::project_density(&f, m)
}
