//! Disk quadrature and the radial Dirichlet Green operator.
//!
//! All operators share one finite-volume discretization. With faces
//! `r_{i+1/2}` and dual-cell areas `V_i`, the outward flux through a face is
//! `F_{i+1/2} = 2 pi r_{i+1/2} (u_{i+1} - u_i) / h_i` and the discrete Laplacian
//! is `(F_{i+1/2} - F_{i-1/2}) / V_i`. At the origin this reduces to
//! `4 (u_1 - u_0) / h^2`, the regular limit `2 u_rr(0)`.
//!
//! The inverse Laplacian is the exact inverse of that operator with `u_n = 0`,
//! so the discrete pairing `(rho, u)` equals the discrete Dirichlet energy of
//! `u` and the boundary flux equals the disk integral of `rho` to round-off.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{RadialField, RadialGrid};

/// Weights `w_i` with `sum_i w_i f(r_i) ~ 2 pi int_0^1 f(r) r dr`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn for_grid(grid: &RadialGrid) -> Self {
        QuadratureRule { weights: grid.volumes().to_vec() }
    }

    pub fn apply(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, f)| w * f).sum()
    }
}

pub fn integrate_disk(f: &RadialField) -> f64 {
    weighted_sum(f.grid(), f.values())
}

pub(crate) fn weighted_sum(grid: &RadialGrid, values: &[f64]) -> f64 {
    grid.volumes().iter().zip(values).map(|(w, f)| w * f).sum()
}

/// `int_D f g dx` with the disk quadrature.
pub fn pairing(f: &RadialField, g: &RadialField) -> Result<f64> {
    if !f.same_grid(g) {
        return Err(Error::GridMismatch);
    }
    Ok(f.grid()
        .volumes()
        .iter()
        .zip(f.values().iter().zip(g.values()))
        .map(|(w, (a, b))| w * a * b)
        .sum())
}

/// Inner masses `m_i = sum_{j <= i} V_j rho_j / (2 pi)`, i.e. the discrete
/// `int_0^{r_{i+1/2}} rho(t) t dt`.
fn inner_masses(grid: &RadialGrid, rho: &[f64]) -> Vec<f64> {
    let n = grid.n();
    let mut acc = 0.0;
    grid.volumes()[..n]
        .iter()
        .zip(rho)
        .map(|(v, r)| {
            acc += v * r;
            acc / (2.0 * PI)
        })
        .collect()
}

/// Face increments `u_{i+1} - u_i` of `u = -Delta^{-1} rho`, computed from the
/// enclosed masses without differencing nodal values.
pub(crate) fn green_increments(grid: &RadialGrid, rho: &[f64]) -> Vec<f64> {
    inner_masses(grid, rho)
        .iter()
        .zip(grid.spacing().iter().zip(grid.faces()))
        .map(|(m, (h, rf))| -m * h / rf)
        .collect()
}

/// Nodal values from face increments with `u_n = 0`.
pub(crate) fn values_from_increments(d: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut u = vec![0.0; n + 1];
    for i in (0..n).rev() {
        u[i] = u[i + 1] - d[i];
    }
    u
}

pub(crate) fn inv_laplacian_values(grid: &RadialGrid, rho: &[f64]) -> Vec<f64> {
    values_from_increments(&green_increments(grid, rho))
}

/// `u = -Delta^{-1} rho`: solves `Delta u = -rho` with `u(1) = 0`.
pub fn inv_laplacian(rho: &RadialField) -> RadialField {
    let u = inv_laplacian_values(rho.grid(), rho.values());
    RadialField::potential(rho.grid().clone(), u).expect("boundary value is exactly zero")
}

/// Face fluxes `F_{i+1/2} = 2 pi r_{i+1/2} (u_{i+1} - u_i) / h_i` from the increments.
pub(crate) fn fluxes_from_increments(grid: &RadialGrid, d: &[f64]) -> Vec<f64> {
    grid.faces()
        .iter()
        .zip(grid.spacing())
        .zip(d)
        .map(|((rf, h), d)| 2.0 * PI * rf * d / h)
        .collect()
}

pub(crate) fn increments(u: &[f64]) -> Vec<f64> {
    u.windows(2).map(|w| w[1] - w[0]).collect()
}

pub(crate) fn face_fluxes(grid: &RadialGrid, u: &[f64]) -> Vec<f64> {
    fluxes_from_increments(grid, &increments(u))
}

/// Discrete Laplacian at the nodes `0..n` (the boundary node is excluded).
pub(crate) fn laplacian_from_increments(grid: &RadialGrid, d: &[f64]) -> Vec<f64> {
    let flux = fluxes_from_increments(grid, d);
    (0..grid.n())
        .map(|i| {
            let inner = if i == 0 { 0.0 } else { flux[i - 1] };
            (flux[i] - inner) / grid.volumes()[i]
        })
        .collect()
}

pub(crate) fn laplacian_values(grid: &RadialGrid, u: &[f64]) -> Vec<f64> {
    laplacian_from_increments(grid, &increments(u))
}

pub fn laplacian(u: &RadialField) -> Vec<f64> {
    laplacian_values(u.grid(), u.values())
}

/// Conservative slope `u_r(1)` of a potential generated by `rho`: flux through
/// the last face minus the source in the boundary half-cell, over `2 pi`.
pub fn boundary_slope(u: &RadialField, rho: &RadialField) -> Result<f64> {
    if !u.same_grid(rho) {
        return Err(Error::GridMismatch);
    }
    let g = u.grid();
    let n = g.n();
    let flux = face_fluxes(g, u.values());
    Ok((flux[n - 1] - g.volumes()[n] * rho.values()[n]) / (2.0 * PI))
}

/// One-sided second-order difference for `u_r(1)` from the last three nodes.
pub fn outer_slope(u: &RadialField) -> f64 {
    let r = u.grid().nodes();
    let v = u.values();
    let n = r.len() - 1;
    let (x0, x1, x2) = (r[n - 2], r[n - 1], r[n]);
    let (h1, h2) = (x1 - x0, x2 - x1);
    // derivative of the interpolating quadratic at x2
    let c0 = h2 / (h1 * (h1 + h2));
    let c1 = -(h1 + h2) / (h1 * h2);
    let c2 = (h1 + 2.0 * h2) / (h2 * (h1 + h2));
    c0 * v[n - 2] + c1 * v[n - 1] + c2 * v[n]
}

/// Potential `(m / 2 pi) ln(1 / r)` outside a radially symmetric mass `m`.
pub fn exterior_potential(m_inner: f64, r: f64) -> Result<f64> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::BadRadius(r));
    }
    Ok(m_inner / (2.0 * PI) * (1.0 / r).ln())
}

/// `int_D rho ln rho`, with `0 ln 0 = 0`.
pub fn entropy(rho: &RadialField) -> Result<f64> {
    let g = rho.grid();
    let mut total = 0.0;
    for (i, (&v, w)) in rho.values().iter().zip(g.volumes()).enumerate() {
        if v < 0.0 || v.is_nan() {
            return Err(Error::NegativeDensity { index: i, value: v });
        }
        if v > 0.0 {
            total += w * v * v.ln();
        }
    }
    Ok(total)
}

/// `int_D |grad w|^2` as a sum of cell-wise difference quotients.
pub fn dirichlet_energy(w: &RadialField) -> f64 {
    dirichlet_values(w.grid(), w.values())
}

pub(crate) fn dirichlet_values(grid: &RadialGrid, w: &[f64]) -> f64 {
    cross_values(grid, w, w)
}

pub(crate) fn cross_values(grid: &RadialGrid, a: &[f64], b: &[f64]) -> f64 {
    grid.faces()
        .iter()
        .zip(grid.spacing())
        .zip(a.windows(2).zip(b.windows(2)))
        .map(|((rf, h), (x, y))| 2.0 * PI * rf * (x[1] - x[0]) * (y[1] - y[0]) / h)
        .sum()
}

/// `int_D grad a . grad b`.
pub fn cross_dirichlet(a: &RadialField, b: &RadialField) -> Result<f64> {
    if !a.same_grid(b) {
        return Err(Error::GridMismatch);
    }
    Ok(cross_values(a.grid(), a.values(), b.values()))
}

/// The raw pairing `(rho, Delta^{-1} rho) = -int_D rho u <= 0`, without any coupling factor.
pub fn interaction_energy(rho: &RadialField) -> f64 {
    let u = inv_laplacian_values(rho.grid(), rho.values());
    -weighted_product(rho.grid(), rho.values(), &u)
}

pub(crate) fn weighted_product(grid: &RadialGrid, a: &[f64], b: &[f64]) -> f64 {
    grid.volumes().iter().zip(a.iter().zip(b)).map(|(w, (x, y))| w * x * y).sum()
}

/// `ln int_D exp(sum_k c_k f_k)`, evaluated with the maximum exponent factored out.
pub fn log_partition(grid: &Arc<RadialGrid>, terms: &[(f64, &RadialField)]) -> Result<f64> {
    for (_, f) in terms {
        if !(Arc::ptr_eq(grid, f.grid()) || **grid == **f.grid()) {
            return Err(Error::GridMismatch);
        }
    }
    let exponent = combine(grid, terms);
    Ok(log_sum_exp(grid, &exponent).0)
}

pub(crate) fn combine(grid: &RadialGrid, terms: &[(f64, &RadialField)]) -> Vec<f64> {
    let mut e = vec![0.0; grid.n() + 1];
    for (c, f) in terms {
        if *c != 0.0 {
            for (x, v) in e.iter_mut().zip(f.values()) {
                *x += c * v;
            }
        }
    }
    e
}

/// Returns `ln sum_i V_i e^{x_i}` together with the normalized Gibbs weights
/// `e^{x_i} / sum_j V_j e^{x_j}` (which integrate to one).
pub(crate) fn log_sum_exp(grid: &RadialGrid, exponent: &[f64]) -> (f64, Vec<f64>) {
    let top = exponent.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = exponent.iter().map(|x| (x - top).exp()).collect();
    let z = weighted_sum(grid, &scaled);
    let gibbs = scaled.iter().map(|s| s / z).collect();
    (top + z.ln(), gibbs)
}

/// Tridiagonal system `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Tridiagonal { lower: vec![0.0; n], diag: vec![0.0; n], upper: vec![0.0; n] }
    }

    /// Thomas algorithm; requires a nonsingular, diagonally dominant matrix.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut denom = self.diag[0];
        c[0] = self.upper[0] / denom;
        d[0] = rhs[0] / denom;
        for i in 1..n {
            denom = self.diag[i] - self.lower[i] * c[i - 1];
            c[i] = self.upper[i] / denom;
            d[i] = (rhs[i] - self.lower[i] * d[i - 1]) / denom;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = d[i] - c[i] * x[i + 1];
        }
        x
    }
}
