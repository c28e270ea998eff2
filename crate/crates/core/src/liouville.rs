//! Radial solvers for the nonlocal Liouville equation and the two-species system
//!
//! ```text
//! Delta u_1 + M_1 e^{alpha u_1 - beta u_2} / int e^{alpha u_1 - beta u_2} = 0
//! Delta u_2 + M_2 e^{-gamma u_2 - theta beta u_1} / int e^{-gamma u_2 - theta beta u_1} = 0
//! ```
//!
//! with `u_1 = u_2 = 0` on the unit circle.
//!
//! Potentials are returned together with their face increments `u_{i+1} - u_i`,
//! obtained from enclosed masses rather than by differencing nodal values. The
//! residuals are evaluated from those increments; a pointwise second difference
//! of rounded nodal values at `n = 4096` has a round-off floor near `1e-8`.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{FieldKind, Params, RadialField, RadialGrid};
use crate::radial::{
    green_increments, increments, laplacian_from_increments, log_sum_exp, values_from_increments,
    Tridiagonal,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub continuation_steps: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-10, max_iter: 500, damping: 0.5, continuation_steps: 1 }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::BadOptions("tol must be positive"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::BadOptions("damping must lie in (0, 1]"));
        }
        if self.max_iter == 0 || self.continuation_steps == 0 {
            return Err(Error::BadOptions("max_iter and continuation_steps must be at least 1"));
        }
        Ok(())
    }
}

/// A converged pair of potentials.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub u1: RadialField,
    pub u2: RadialField,
    /// Larger of the two sup-norm residuals.
    pub residual: f64,
    pub iterations: usize,
    /// `lambda_j = M_j / int e^{(exponent of species j)}`, so `rho_j = lambda_j e^{...}`.
    pub multipliers: (f64, f64),
    /// Face increments `u_{i+1} - u_i` of `u1` and `u2`.
    pub increments: [Vec<f64>; 2],
}

impl Solution {
    /// Wraps two potentials; increments are taken by differencing the nodal values.
    pub fn from_potentials(u1: RadialField, u2: RadialField, p: &Params) -> Result<Self> {
        if !u1.same_grid(&u2) {
            return Err(Error::GridMismatch);
        }
        let increments = [increments(u1.values()), increments(u2.values())];
        let mut sol = Solution {
            u1,
            u2,
            residual: f64::NAN,
            iterations: 0,
            multipliers: (f64::NAN, f64::NAN),
            increments,
        };
        sol.refresh(p);
        Ok(sol)
    }

    fn refresh(&mut self, p: &Params) {
        let (r1, r2) = residual(self, p);
        self.residual = r1.max(r2);
        let (e1, e2) = exponents(p, self.u1.values(), self.u2.values());
        let g = self.u1.grid();
        self.multipliers = (
            p.m1 * (-log_sum_exp(g, &e1).0).exp(),
            p.m2 * (-log_sum_exp(g, &e2).0).exp(),
        );
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        self.u1.grid()
    }

    /// Densities `rho_j = -Delta u_j` in Gibbs form.
    pub fn densities(&self, p: &Params) -> (RadialField, RadialField) {
        let (e1, e2) = exponents(p, self.u1.values(), self.u2.values());
        let g = self.grid();
        let rho = |m: f64, e: &[f64]| {
            let w = log_sum_exp(g, e).1;
            RadialField::density(g.clone(), w.iter().map(|x| m * x).collect()).expect("Gibbs weights are positive")
        };
        (rho(p.m1, &e1), rho(p.m2, &e2))
    }

    /// Conservative boundary slopes `u_{j,r}(1)`: flux through the last face minus
    /// the source carried by the boundary half-cell.
    pub fn boundary_slopes(&self, p: &Params) -> (f64, f64) {
        let g = self.grid();
        let n = g.n();
        let (rho1, rho2) = self.densities(p);
        let slope = |d: &[f64], rho: &RadialField| {
            let flux = 2.0 * PI * g.faces()[n - 1] * d[n - 1] / g.spacing()[n - 1];
            (flux - g.volumes()[n] * rho.values()[n]) / (2.0 * PI)
        };
        (slope(&self.increments[0], &rho1), slope(&self.increments[1], &rho2))
    }
}

fn exponents(p: &Params, u1: &[f64], u2: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let tb = p.theta.value() * p.beta;
    let e1 = u1.iter().zip(u2).map(|(a, b)| p.alpha * a - p.beta * b).collect();
    let e2 = u1.iter().zip(u2).map(|(a, b)| -p.gamma * b - tb * a).collect();
    (e1, e2)
}

/// `(res_1, res_2)`: sup-norms of `Delta u_j + rho_j(u)` over the nodes `r < 1`.
/// The origin uses the regular limit `2 u_rr(0)`.
pub fn residual(sol: &Solution, p: &Params) -> (f64, f64) {
    let g = sol.grid();
    let (rho1, rho2) = sol.densities(p);
    let res = |d: &[f64], rho: &RadialField| {
        laplacian_from_increments(g, d)
            .iter()
            .zip(rho.values())
            .fold(0.0_f64, |m, (l, r)| m.max((l + r).abs()))
    };
    (res(&sol.increments[0], &rho1), res(&sol.increments[1], &rho2))
}

/// Solution of one Gibbs-type equation `-Delta u = m e^{c u + g} / int e^{c u + g}`.
#[derive(Debug, Clone)]
pub(crate) struct GibbsSolution {
    pub values: Vec<f64>,
    pub increments: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// The equation `-Delta u = mass e^{coef u + external} / Z` on a fixed grid.
pub(crate) struct Gibbs<'a> {
    pub grid: &'a RadialGrid,
    pub mass: f64,
    pub coef: f64,
    pub external: &'a [f64],
}

impl Gibbs<'_> {
    fn density(&self, u: &[f64]) -> Vec<f64> {
        let e: Vec<f64> = u.iter().zip(self.external).map(|(u, g)| self.coef * u + g).collect();
        log_sum_exp(self.grid, &e).1.into_iter().map(|w| self.mass * w).collect()
    }

    /// Applies the Green operator to the density generated by `u`.
    pub fn picard(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = green_increments(self.grid, &self.density(u));
        (values_from_increments(&d), d)
    }

    /// Sup-norm residual of the potential with increments `d`.
    pub fn residual(&self, u: &[f64], d: &[f64]) -> f64 {
        let rho = self.density(u);
        laplacian_from_increments(self.grid, d)
            .iter()
            .zip(&rho)
            .fold(0.0_f64, |m, (l, r)| m.max((l + r).abs()))
    }

    fn merit(&self, u: &[f64]) -> f64 {
        let (v, _) = self.picard(u);
        u.iter().zip(&v).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Newton direction for `K u - V rho(u) = 0` on the unknowns `u_0..u_{n-1}`.
    ///
    /// The Jacobian is tridiagonal plus the rank-one normalization term
    /// `(c / m) a a^T` with `a = V rho`; it is inverted by Sherman-Morrison.
    fn newton_direction(&self, u: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let n = g.n();
        let rho = self.density(u);
        let cond: Vec<f64> =
            g.faces().iter().zip(g.spacing()).map(|(rf, h)| 2.0 * PI * rf / h).collect();
        let a: Vec<f64> = (0..n).map(|i| g.volumes()[i] * rho[i]).collect();
        let mut t = Tridiagonal::zeros(n);
        let mut res = vec![0.0; n];
        for i in 0..n {
            let left = if i > 0 { cond[i - 1] } else { 0.0 };
            t.diag[i] = cond[i] + left - self.coef * a[i];
            if i > 0 {
                t.lower[i] = -left;
            }
            if i + 1 < n {
                t.upper[i] = -cond[i];
            }
            let ku = cond[i] * (u[i] - u[i + 1]) + if i > 0 { left * (u[i] - u[i - 1]) } else { 0.0 };
            res[i] = -(ku - a[i]);
        }
        let y = t.solve(&res);
        if self.mass == 0.0 || self.coef == 0.0 {
            let mut y = y;
            y.push(0.0);
            return y;
        }
        let s = self.coef / self.mass;
        let z = t.solve(&a);
        let ay: f64 = a.iter().zip(&y).map(|(a, y)| a * y).sum();
        let az: f64 = a.iter().zip(&z).map(|(a, z)| a * z).sum();
        let f = s * ay / (1.0 + s * az);
        let mut step: Vec<f64> = y.iter().zip(&z).map(|(y, z)| y - f * z).collect();
        step.push(0.0);
        step
    }

    /// Damped Newton iteration from `init`; every accepted iterate is tested
    /// through its Picard image, which is returned on success.
    pub fn newton(&self, init: Vec<f64>, tol: f64, max_iter: usize) -> Result<GibbsSolution> {
        let mut u = init;
        let mut merit = self.merit(&u);
        let mut last = f64::INFINITY;
        for it in 0..=max_iter {
            let (v, d) = self.picard(&u);
            let res = self.residual(&v, &d);
            last = res;
            if res <= tol {
                return Ok(GibbsSolution { values: v, increments: d, residual: res, iterations: it });
            }
            if it == max_iter {
                break;
            }
            let step = self.newton_direction(&u);
            if step.iter().any(|s| !s.is_finite()) {
                break;
            }
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let trial: Vec<f64> = u.iter().zip(&step).map(|(a, s)| a + t * s).collect();
                let m = self.merit(&trial);
                if m.is_finite() && (m < merit || m <= 1e-14 * (1.0 + trial[0].abs())) {
                    u = trial;
                    merit = m;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                // stagnation at round-off: the Picard image is as good as it gets
                let (v, d) = self.picard(&u);
                let res = self.residual(&v, &d);
                if res <= tol {
                    return Ok(GibbsSolution { values: v, increments: d, residual: res, iterations: it + 1 });
                }
                return Err(Error::SolverDiverged { iterations: it + 1, residual: res });
            }
        }
        Err(Error::SolverDiverged { iterations: max_iter, residual: last })
    }
}

/// Mass of the bubble `(2 / alpha) ln((1 + delta) / (1 + delta r^2))`.
pub fn bubble_mass(alpha: f64, delta: f64) -> f64 {
    8.0 * PI * delta / (alpha * (1.0 + delta))
}

/// Bubble parameter `delta` with `bubble_mass(alpha, delta) = m`.
pub fn bubble_delta(alpha: f64, m: f64) -> f64 {
    alpha * m / (8.0 * PI - alpha * m)
}

/// The explicit solution `u = (2 / alpha) ln((1 + delta) / (1 + delta r^2))` sampled on a grid.
pub fn bubble(alpha: f64, delta: f64, grid: &Arc<RadialGrid>) -> RadialField {
    let d = bubble_increments(alpha, delta, grid);
    RadialField::potential(grid.clone(), values_from_increments(&d)).expect("zero at r = 1")
}

fn bubble_increments(alpha: f64, delta: f64, grid: &RadialGrid) -> Vec<f64> {
    grid.nodes()
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            -(2.0 / alpha) * (delta * (b - a) * (b + a) / (1.0 + delta * a * a)).ln_1p()
        })
        .collect()
}

/// The bubble as a single-species solution, with increments taken analytically.
pub fn bubble_solution(alpha: f64, delta: f64, grid: &Arc<RadialGrid>) -> Result<(Solution, Params)> {
    let p = Params::new(alpha, 0.0, 0.0, -1.0, bubble_mass(alpha, delta), 0.0)?;
    let u1 = bubble(alpha, delta, grid);
    let u2 = RadialField::zeros(grid.clone(), FieldKind::Potential);
    let mut sol = Solution::from_potentials(u1, u2, &p)?;
    sol.increments[0] = bubble_increments(alpha, delta, grid);
    sol.refresh(&p);
    Ok((sol, p))
}

fn single_solution(g: &Arc<RadialGrid>, s: GibbsSolution, p: &Params) -> Solution {
    let n = g.n();
    let mut sol = Solution {
        u1: RadialField::potential(g.clone(), s.values).expect("zero at r = 1"),
        u2: RadialField::zeros(g.clone(), FieldKind::Potential),
        residual: s.residual,
        iterations: s.iterations,
        multipliers: (f64::NAN, f64::NAN),
        increments: [s.increments, vec![0.0; n]],
    };
    sol.refresh(p);
    sol
}

/// Solves `Delta u + m e^{alpha u} / int e^{alpha u} = 0`, `u(1) = 0`, for `0 < m < 8 pi / alpha`.
///
/// Newton's method started from the continuum bubble of the same mass; if that
/// fails the mass is ramped up over `max(continuation_steps, 8)` stages.
pub fn solve_single(m: f64, alpha: f64, grid: &Arc<RadialGrid>, opts: &SolveOptions) -> Result<Solution> {
    opts.validate()?;
    let p = Params::new(alpha, 0.0, 0.0, -1.0, m, 0.0)?;
    let critical = p.critical_mass();
    if m >= critical {
        return Err(Error::Supercritical { mass: m, critical });
    }
    let zeros = vec![0.0; grid.n() + 1];
    let solve = |mass: f64, init: Vec<f64>| {
        Gibbs { grid, mass, coef: alpha, external: &zeros }.newton(init, opts.tol, opts.max_iter)
    };
    let init = if alpha > 0.0 {
        bubble(alpha, bubble_delta(alpha, m), grid).into_values()
    } else {
        zeros.clone()
    };
    let s = match solve(m, init) {
        Ok(s) => s,
        Err(_) => {
            let k = opts.continuation_steps.max(8);
            let mut u = zeros.clone();
            let mut total = 0;
            let mut last = None;
            for j in 1..=k {
                let s = solve(m * j as f64 / k as f64, u)?;
                total += s.iterations;
                u = s.values.clone();
                last = Some(s);
            }
            let mut s = last.expect("at least one stage");
            s.iterations = total;
            s
        }
    };
    Ok(single_solution(grid, s, &p))
}

/// Damped Picard iteration for the coupled system, with mass continuation when
/// the direct iteration stalls.
pub fn solve_pair(p: &Params, grid: &Arc<RadialGrid>, opts: &SolveOptions) -> Result<Solution> {
    opts.validate()?;
    let n = grid.n();
    let zero = vec![0.0; n + 1];
    match picard_pair(p, grid, opts, (zero.clone(), zero.clone())) {
        Ok(s) => Ok(s),
        Err(Error::SolverDiverged { .. }) => {
            let k = opts.continuation_steps.max(4);
            let mut start = (zero.clone(), zero);
            let mut total = 0;
            let mut sol = None;
            for j in 1..=k {
                let f = j as f64 / k as f64;
                let q = p.with_masses(p.m1 * f, p.m2 * f);
                let s = picard_pair(&q, grid, opts, start)?;
                total += s.iterations;
                start = (s.u1.values().to_vec(), s.u2.values().to_vec());
                sol = Some(s);
            }
            let mut s = sol.expect("at least one stage");
            s.iterations = total;
            Ok(s)
        }
        Err(e) => Err(e),
    }
}

const MIN_DAMPING: f64 = 1.0 / 64.0;

fn picard_pair(p: &Params, grid: &Arc<RadialGrid>, opts: &SolveOptions, start: (Vec<f64>, Vec<f64>)) -> Result<Solution> {
    let g: &RadialGrid = grid;
    let (mut u1, mut u2) = start;
    let mut omega = opts.damping;
    let mut prev = f64::INFINITY;
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    let tb = p.theta.value() * p.beta;
    for it in 0..opts.max_iter {
        let ext1: Vec<f64> = u2.iter().map(|b| -p.beta * b).collect();
        let ext2: Vec<f64> = u1.iter().map(|a| -tb * a).collect();
        let s1 = Gibbs { grid: g, mass: p.m1, coef: p.alpha, external: &ext1 };
        let s2 = Gibbs { grid: g, mass: p.m2, coef: -p.gamma, external: &ext2 };
        let (v1, d1) = s1.picard(&u1);
        let (v2, d2) = s2.picard(&u2);
        let sol = Solution {
            u1: RadialField::potential(grid.clone(), v1).expect("zero at r = 1"),
            u2: RadialField::potential(grid.clone(), v2).expect("zero at r = 1"),
            residual: f64::NAN,
            iterations: it + 1,
            multipliers: (f64::NAN, f64::NAN),
            increments: [d1, d2],
        };
        let (r1, r2) = residual(&sol, p);
        let res = r1.max(r2);
        if !res.is_finite() {
            return Err(Error::SolverDiverged { iterations: it + 1, residual: res });
        }
        if res <= opts.tol {
            let mut sol = sol;
            sol.refresh(p);
            return Ok(sol);
        }
        if res > prev {
            omega = (0.5 * omega).max(MIN_DAMPING);
        }
        if res < best {
            best = res;
            since_best = 0;
        } else {
            since_best += 1;
            if omega == MIN_DAMPING && since_best >= 50 {
                return Err(Error::Oscillation { damping: omega, residual: res });
            }
        }
        prev = res;
        for (u, v) in u1.iter_mut().zip(sol.u1.values()) {
            *u += omega * (v - *u);
        }
        for (u, v) in u2.iter_mut().zip(sol.u2.values()) {
            *u += omega * (v - *u);
        }
    }
    Err(Error::SolverDiverged { iterations: opts.max_iter, residual: prev })
}

/// Minimizer over `w` of `(gamma / 2) int |grad w|^2 + M_2 ln int e^{-gamma w - theta beta u}`,
/// `u = -Delta^{-1} rho`, i.e. the solution of
/// `Delta w + M_2 e^{-gamma w - theta beta u} / int e^{...} = 0`, `w(1) = 0`.
pub fn minimize_w(rho: &RadialField, p: &Params, grid: &Arc<RadialGrid>, opts: &SolveOptions) -> Result<RadialField> {
    minimize_w_full(rho, p, grid, opts).map(|s| s.0)
}

/// As [`minimize_w`], also returning the face increments of `w`.
pub fn minimize_w_full(
    rho: &RadialField,
    p: &Params,
    grid: &Arc<RadialGrid>,
    opts: &SolveOptions,
) -> Result<(RadialField, Vec<f64>)> {
    opts.validate()?;
    if p.gamma == 0.0 {
        return Err(Error::GammaZero);
    }
    if rho.grid().n() != grid.n() || **rho.grid() != **grid {
        return Err(Error::GridMismatch);
    }
    let n = grid.n();
    if p.m2 == 0.0 {
        return Ok((RadialField::zeros(grid.clone(), FieldKind::Potential), vec![0.0; n]));
    }
    let u = crate::radial::inv_laplacian_values(grid, rho.values());
    let tb = p.theta.value() * p.beta;
    let ext: Vec<f64> = u.iter().map(|u| -tb * u).collect();
    let s = Gibbs { grid, mass: p.m2, coef: -p.gamma, external: &ext }.newton(vec![0.0; n + 1], opts.tol, opts.max_iter)?;
    Ok((RadialField::potential(grid.clone(), s.values).expect("zero at r = 1"), s.increments))
}
