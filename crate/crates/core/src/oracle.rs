//! Exact one-dimensional reduction of the `w`-equation outside a concentrated mass.
//!
//! On an annulus `psi <= r <= 1` where `-Delta^{-1} rho = (M / 2 pi) ln(1 / r)`, the
//! optimal `w` is, up to an additive constant, a solution of
//!
//! ```text
//! r^{-1} (r v_r)_r + r^{-beta M / 2 pi} e^{-gamma v} = 0,   v_r(1) = -M_2 / 2 pi.
//! ```
//!
//! In `t = -ln r` and with `vbar = v - (a / gamma) t`, `a = beta M / 2 pi - 2`, this
//! becomes the autonomous `vbar_tt + e^{-gamma vbar} = 0` with the conserved energy
//! `E = vbar_t^2 / 2 - e^{-gamma vbar} / gamma`, whose solution blowing down at
//! `t = ln(1 / psi)` is known in closed form.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemwParams {
    pub gamma: f64,
    /// The product `beta M`.
    pub beta_m: f64,
    pub m2: f64,
    pub psi: f64,
}

impl LemwParams {
    pub fn new(gamma: f64, beta_m: f64, m2: f64, psi: f64) -> Result<Self> {
        let lp = LemwParams { gamma, beta_m, m2, psi };
        lp.check()?;
        Ok(lp)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::HypothesisViolated(format!("gamma = {} must be positive", self.gamma)));
        }
        if !(self.m2 > 0.0) {
            return Err(Error::HypothesisViolated(format!("m2 = {} must be positive", self.m2)));
        }
        if !(self.psi > 0.0 && self.psi < 1.0) {
            return Err(Error::HypothesisViolated(format!("psi = {} outside (0, 1)", self.psi)));
        }
        let c = self.slope_limit();
        if !(c > 0.0) {
            return Err(Error::HypothesisViolated(format!(
                "(beta M - gamma M_2) / 2 pi - 2 = {} must be positive",
                c * self.gamma
            )));
        }
        Ok(())
    }

    /// `a = beta M / 2 pi - 2`.
    pub fn drift(&self) -> f64 {
        self.beta_m / (2.0 * PI) - 2.0
    }

    /// `c = gamma^{-1} [(beta M - gamma M_2) / 2 pi - 2]`, the limit of `sqrt(2E)`.
    pub fn slope_limit(&self) -> f64 {
        ((self.beta_m - self.gamma * self.m2) / (2.0 * PI) - 2.0) / self.gamma
    }

    /// Blow-down time `T = ln(1 / psi)`.
    pub fn t_blow(&self) -> f64 {
        (1.0 / self.psi).ln()
    }
}

/// `vbar(t) = -ln(4 E gamma) / gamma - k (t + ln psi) + (2 / gamma) ln(1 - e^{k gamma (t + ln psi)})`, `k = sqrt(2E)`.
pub fn exact_vbar(e: f64, gamma: f64, psi: f64, t: f64) -> Result<f64> {
    let t_blow = (1.0 / psi).ln();
    if t >= t_blow {
        return Err(Error::AtBlowdown { t, t_blow });
    }
    let k = (2.0 * e).sqrt();
    let s = t - t_blow;
    Ok(-(4.0 * e * gamma).ln() / gamma - k * s + 2.0 / gamma * (-(k * gamma * s).exp_m1()).ln())
}

/// `vbar_t(t) = -k coth(k gamma (T - t) / 2)`.
pub fn exact_vbar_t(e: f64, gamma: f64, psi: f64, t: f64) -> Result<f64> {
    let t_blow = (1.0 / psi).ln();
    if t >= t_blow {
        return Err(Error::AtBlowdown { t, t_blow });
    }
    let k = (2.0 * e).sqrt();
    Ok(-k / (k * gamma * (t_blow - t) / 2.0).tanh())
}

/// Conserved energy of the autonomous equation.
pub fn energy(vbar: f64, vbar_t: f64, gamma: f64) -> f64 {
    0.5 * vbar_t * vbar_t - (-gamma * vbar).exp() / gamma
}

/// Solves `sqrt(2E) coth(sqrt(E / 2) gamma ln(1 / psi)) = c` for `E` by bisection on `(0, 2 c^2]`.
pub fn match_energy(lp: &LemwParams) -> Result<f64> {
    lp.check()?;
    let c = lp.slope_limit();
    let t = lp.t_blow();
    let g = lp.gamma;
    let f = |e: f64| {
        let k = (2.0 * e).sqrt();
        k / (0.5 * k * g * t).tanh() - c
    };
    let (mut lo, mut hi) = (0.0_f64, 2.0 * c * c);
    // the left side decreases to 2 / (gamma T) as E -> 0
    if 2.0 / (g * t) >= c || f(hi) <= 0.0 {
        return Err(Error::NoRoot);
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let v = f(mid);
        if v.abs() <= 1e-12 * c.max(1.0) && hi - lo < 1e-15 * hi {
            return Ok(mid);
        }
        if v > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let e = 0.5 * (lo + hi);
    if f(e).abs() <= 1e-12 * c.max(1.0) {
        Ok(e)
    } else {
        Err(Error::NoRoot)
    }
}

/// Samples of a solution of the annulus equation, ordered from `r = 1` inwards.
#[derive(Debug, Clone, PartialEq)]
pub struct VeqProfile {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    /// `v_t = -r v_r`.
    pub v_t: Vec<f64>,
}

impl VeqProfile {
    pub fn radii(&self) -> Vec<f64> {
        self.t.iter().map(|t| (-t).exp()).collect()
    }

    /// `v_r` at every sample.
    pub fn v_r(&self) -> Vec<f64> {
        self.t.iter().zip(&self.v_t).map(|(t, d)| -d * t.exp()).collect()
    }

    /// Cubic Hermite interpolation in `t`.
    pub fn eval(&self, r: f64) -> f64 {
        let t = -r.ln();
        let n = self.t.len() - 1;
        let i = match self.t.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(n - 1),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 1),
        };
        let h = self.t[i + 1] - self.t[i];
        let s = (t - self.t[i]) / h;
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * s) * (1.0 - s).powi(2),
            s * (1.0 - s).powi(2),
            s * s * (3.0 - 2.0 * s),
            s * s * (s - 1.0),
        );
        h00 * self.v[i] + h10 * h * self.v_t[i] + h01 * self.v[i + 1] + h11 * h * self.v_t[i + 1]
    }
}

/// Classical RK4 for `v_tt = -e^{a t - gamma v}` from `t = 0` to `t_end` in `n` steps.
fn rk4(a: f64, gamma: f64, v0: f64, vt0: f64, t_end: f64, n: usize) -> VeqProfile {
    let h = t_end / n as f64;
    let f = |t: f64, v: f64| -(a * t - gamma * v).exp();
    let mut out = VeqProfile { t: Vec::with_capacity(n + 1), v: Vec::with_capacity(n + 1), v_t: Vec::with_capacity(n + 1) };
    let (mut t, mut v, mut d) = (0.0, v0, vt0);
    out.t.push(t);
    out.v.push(v);
    out.v_t.push(d);
    for i in 0..n {
        let k1 = (d, f(t, v));
        let k2 = (d + 0.5 * h * k1.1, f(t + 0.5 * h, v + 0.5 * h * k1.0));
        let k3 = (d + 0.5 * h * k2.1, f(t + 0.5 * h, v + 0.5 * h * k2.0));
        let k4 = (d + h * k3.1, f(t + h, v + h * k3.0));
        v += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        d += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        t = (i + 1) as f64 * h;
        out.t.push(t);
        out.v.push(v);
        out.v_t.push(d);
    }
    out
}

fn check_monotone(p: &VeqProfile) -> Result<()> {
    for (t, d) in p.t.iter().zip(&p.v_t) {
        if *d < 0.0 {
            return Err(Error::MonotonicityLost { r: (-t).exp(), v_r: -d * t.exp() });
        }
    }
    Ok(())
}

/// Integrates the annulus equation inwards from `r = 1` to `r = sqrt(psi)` with the
/// boundary data of the blow-down solution, and checks `v_r <= 0` along the way.
///
/// The exact solution itself turns increasing close to `r = psi`, where it blows
/// down, so the outer half `t <= T / 2` is the range on which the profile is produced.
pub fn integrate_veq(lp: &LemwParams, n: usize) -> Result<VeqProfile> {
    if n < 1000 {
        return Err(Error::BadOptions("integrate_veq needs n >= 1000"));
    }
    let e = match_energy(lp)?;
    let v0 = exact_vbar(e, lp.gamma, lp.psi, 0.0)?;
    let p = rk4(lp.drift(), lp.gamma, v0, lp.m2 / (2.0 * PI), 0.5 * lp.t_blow(), n);
    check_monotone(&p)?;
    Ok(p)
}

/// The same equation with `gamma = 0`, `v_tt = -e^{a t}`, from `v(1) = 0`, `v_r(1) = -M_2 / 2 pi`
/// down to `r = sqrt(psi)`.
pub fn integrate_veq_gamma_zero(beta_m: f64, m2: f64, psi: f64, n: usize) -> Result<VeqProfile> {
    if !(psi > 0.0 && psi < 1.0) || n == 0 {
        return Err(Error::BadOptions("psi must lie in (0, 1) and n >= 1"));
    }
    let a = beta_m / (2.0 * PI) - 2.0;
    let p = rk4(a, 0.0, 0.0, m2 / (2.0 * PI), 0.5 * (1.0 / psi).ln(), n);
    check_monotone(&p)?;
    Ok(p)
}

/// General shooting: `v(1) = v1`, `v_r(1) = -M_2 / 2 pi`, integrated down to `r_min`.
/// No monotonicity check; `psi` in `lp` is not used.
pub fn integrate_veq_from(lp: &LemwParams, v1: f64, r_min: f64, n: usize) -> Result<VeqProfile> {
    if !(r_min > 0.0 && r_min < 1.0) || n == 0 {
        return Err(Error::BadOptions("r_min must lie in (0, 1) and n >= 1"));
    }
    Ok(rk4(lp.drift(), lp.gamma, v1, lp.m2 / (2.0 * PI), -r_min.ln(), n))
}

/// `ln(1 / sqrt psi)^{-1} int_{sqrt psi}^1 r |v_r|^2 dr`, which tends to `(M_2 / 2 pi)^2`.
pub fn asymptotic_ratio(lp: &LemwParams) -> Result<f64> {
    asymptotic_ratio_with(lp, 20_000)
}

pub fn asymptotic_ratio_with(lp: &LemwParams, n: usize) -> Result<f64> {
    let p = integrate_veq(lp, n + n % 2)?;
    // r |v_r|^2 dr = v_t^2 dt; composite Simpson
    let h = p.t[1] - p.t[0];
    let sq: Vec<f64> = p.v_t.iter().map(|d| d * d).collect();
    let m = sq.len() - 1;
    let mut s = sq[0] + sq[m];
    for (i, v) in sq.iter().enumerate().take(m).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    Ok(s * h / 3.0 / (0.5 * lp.t_blow()))
}
