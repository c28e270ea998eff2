//! Free energies and their dual forms, each returned term by term.
//!
//! With `u = -Delta^{-1} rho`:
//!
//! ```text
//! F(rho)          = int rho ln rho + (alpha/2)(rho, Delta^{-1} rho)
//! H_gamma(rho, w) = (gamma/2) int |grad w|^2 + M ln int e^{-gamma w - theta beta u}
//! F^M(rho, w)     = F(rho) - theta H_gamma(rho, w)
//! ```

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::liouville::{minimize_w, SolveOptions};
use crate::model::{FieldKind, Params, RadialField, RadialGrid};
use crate::radial::{
    cross_values, dirichlet_energy, entropy, inv_laplacian_values, log_partition, weighted_product,
};

/// Itemized value of a functional; every entry already carries its coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FunctionalReport {
    pub entropy1: f64,
    pub entropy2: f64,
    pub interaction: f64,
    pub dirichlet: f64,
    pub cross: f64,
    pub log_terms: f64,
    pub total: f64,
}

impl FunctionalReport {
    pub fn parts_sum(&self) -> f64 {
        self.entropy1 + self.entropy2 + self.interaction + self.dirichlet + self.cross + self.log_terms
    }

    fn closed(mut self) -> Self {
        self.total = self.parts_sum();
        self
    }
}

fn check_grid(a: &RadialField, b: &RadialField) -> Result<()> {
    if a.same_grid(b) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

fn green(rho: &RadialField) -> RadialField {
    RadialField::potential(rho.grid().clone(), inv_laplacian_values(rho.grid(), rho.values()))
        .expect("zero at r = 1")
}

/// `(rho, Delta^{-1} rho) = -int rho u`.
fn self_pairing(rho: &RadialField, u: &RadialField) -> f64 {
    -weighted_product(rho.grid(), rho.values(), u.values())
}

pub fn free_energy(rho: &RadialField, p: &Params) -> Result<FunctionalReport> {
    let u = green(rho);
    Ok(FunctionalReport {
        entropy1: entropy(rho)?,
        interaction: 0.5 * p.alpha * self_pairing(rho, &u),
        ..Default::default()
    }
    .closed())
}

/// `(alpha/2) int |grad u|^2 - m ln int e^{alpha u}`.
pub fn mt_functional(u: &RadialField, m: f64, alpha: f64) -> f64 {
    let lp = log_partition(u.grid(), &[(alpha, u)]).expect("single field");
    0.5 * alpha * dirichlet_energy(u) - m * lp
}

/// `(gamma/2) int |grad w|^2 + m ln int e^{-gamma w - theta beta u}` with `u = -Delta^{-1} rho`.
/// For `theta = -1` the second exponent is `+beta u`.
pub fn h_gamma(rho: &RadialField, w: &RadialField, m: f64, p: &Params) -> Result<f64> {
    check_grid(rho, w)?;
    let u = green(rho);
    let lp = log_partition(rho.grid(), &[(-p.gamma, w), (-p.theta.value() * p.beta, &u)])?;
    Ok(0.5 * p.gamma * dirichlet_energy(w) + m * lp)
}

/// `F(rho) - theta H_gamma(rho, w)` with mass `M_2`.
pub fn f_m(rho: &RadialField, w: &RadialField, p: &Params) -> Result<FunctionalReport> {
    check_grid(rho, w)?;
    let theta = p.theta.value();
    let u = green(rho);
    let lp = log_partition(rho.grid(), &[(-p.gamma, w), (-theta * p.beta, &u)])?;
    Ok(FunctionalReport {
        entropy1: entropy(rho)?,
        interaction: 0.5 * p.alpha * self_pairing(rho, &u),
        dirichlet: -theta * 0.5 * p.gamma * dirichlet_energy(w),
        log_terms: -theta * p.m2 * lp,
        ..Default::default()
    }
    .closed())
}

/// `F^M` at the optimal `w`; returns the value and the optimizer (`w = 0` when `gamma = 0`).
pub fn bar_f(rho: &RadialField, p: &Params) -> Result<(f64, RadialField)> {
    bar_f_with(rho, p, &SolveOptions::default())
}

pub fn bar_f_with(rho: &RadialField, p: &Params, opts: &SolveOptions) -> Result<(f64, RadialField)> {
    let grid: &Arc<RadialGrid> = rho.grid();
    let w = if p.gamma == 0.0 || p.m2 == 0.0 {
        RadialField::zeros(grid.clone(), FieldKind::Potential)
    } else {
        minimize_w(rho, p, grid, opts)?
    };
    Ok((f_m(rho, &w, p)?.total, w))
}

/// Dual functional of the potentials:
/// `(alpha/2)|u_1|^2 - (theta gamma/2)|u_2|^2 - beta <u_1, u_2>
///  - M_1 ln int e^{alpha u_1 - beta u_2} - theta M_2 ln int e^{-gamma u_2 - theta beta u_1}`,
/// with `|.|` and `<.,.>` the Dirichlet form.
pub fn h_theta_bar(u1: &RadialField, u2: &RadialField, p: &Params) -> Result<FunctionalReport> {
    check_grid(u1, u2)?;
    let theta = p.theta.value();
    let g = u1.grid();
    let lp1 = log_partition(g, &[(p.alpha, u1), (-p.beta, u2)])?;
    let lp2 = log_partition(g, &[(-p.gamma, u2), (-theta * p.beta, u1)])?;
    Ok(FunctionalReport {
        dirichlet: 0.5 * p.alpha * dirichlet_energy(u1) - 0.5 * theta * p.gamma * dirichlet_energy(u2),
        cross: -p.beta * cross_values(g, u1.values(), u2.values()),
        log_terms: -p.m1 * lp1 - theta * p.m2 * lp2,
        ..Default::default()
    }
    .closed())
}

/// Density functional
/// `int rho_1 ln rho_1 + theta int rho_2 ln rho_2 + (alpha/2)(rho_1, Delta^{-1} rho_1)
///  - (theta gamma/2)(rho_2, Delta^{-1} rho_2) - beta (rho_2, Delta^{-1} rho_1)`.
pub fn h_theta_under(rho1: &RadialField, rho2: &RadialField, p: &Params) -> Result<FunctionalReport> {
    check_grid(rho1, rho2)?;
    let theta = p.theta.value();
    let u1 = green(rho1);
    let u2 = green(rho2);
    Ok(FunctionalReport {
        entropy1: entropy(rho1)?,
        entropy2: theta * entropy(rho2)?,
        interaction: 0.5 * p.alpha * self_pairing(rho1, &u1) - 0.5 * theta * p.gamma * self_pairing(rho2, &u2),
        cross: -p.beta * self_pairing(rho2, &u1),
        ..Default::default()
    }
    .closed())
}
