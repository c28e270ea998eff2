//! Closed-form existence and unboundedness conditions in the `(M_1, M_2)` plane,
//! and a parallel sweep that classifies a rectangle of masses.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::liouville::{solve_pair, SolveOptions};
use crate::model::{make_grid, GridKind, Params, Theta};
use crate::scaling::{default_ladder, slope_estimate, BlowdownFamily, ScaleMode};

/// Margin below which an inequality is treated as undecided.
pub const MARGIN: f64 = 1e-12;

/// `(Lambda, Lambda_1, Lambda_2)` with
/// `Lambda_1 = M_2 (-2 + (beta M_1 - gamma M_2) / 2 pi)`,
/// `Lambda_2 = 2 M_1 - alpha M_1^2 / 4 pi + gamma M_2^2 / 4 pi`.
pub fn lambda_val(m1: f64, m2: f64, p: &Params) -> (f64, f64, f64) {
    let l1 = m2 * (-2.0 + (p.beta * m1 - p.gamma * m2) / (2.0 * PI));
    let l2 = 2.0 * m1 - p.alpha * m1 * m1 / (4.0 * PI) + p.gamma * m2 * m2 / (4.0 * PI);
    (l1 + l2, l1, l2)
}

fn check_symmetric(a: &[Vec<f64>], n: usize) -> Result<()> {
    if a.len() != n || a.iter().any(|row| row.len() != n) {
        return Err(Error::AsymmetricMatrix);
    }
    for i in 0..n {
        for j in 0..i {
            if (a[i][j] - a[j][i]).abs() > 1e-14 * (a[i][j].abs() + a[j][i].abs()).max(1.0) {
                return Err(Error::AsymmetricMatrix);
            }
        }
    }
    Ok(())
}

/// `4 pi sum_{i in J} M_i - (1/2) sum_{i,j in J} a_ij M_i M_j`.
pub fn lambda_j(masses: &[f64], a: &[Vec<f64>], subset: &[usize]) -> Result<f64> {
    check_symmetric(a, masses.len())?;
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    Ok(lambda_j_unchecked(masses, a, subset))
}

fn lambda_j_unchecked(masses: &[f64], a: &[Vec<f64>], subset: &[usize]) -> f64 {
    let linear: f64 = subset.iter().map(|&i| masses[i]).sum();
    let quad: f64 = subset
        .iter()
        .flat_map(|&i| subset.iter().map(move |&j| (i, j)))
        .map(|(i, j)| a[i][j] * masses[i] * masses[j])
        .sum();
    4.0 * PI * linear - 0.5 * quad
}

/// `Lambda_J > 0` for every nonempty `J`.
pub fn all_subsets_positive(masses: &[f64], a: &[Vec<f64>]) -> Result<bool> {
    let n = masses.len();
    check_symmetric(a, n)?;
    if n == 0 {
        return Err(Error::EmptySubset);
    }
    Ok((1u64..(1u64 << n)).all(|bits| {
        let subset: Vec<usize> = (0..n).filter(|i| bits >> i & 1 == 1).collect();
        lambda_j_unchecked(masses, a, &subset) > 0.0
    }))
}

/// `Lambda_I(m) > 0` for every `0 < m_i <= M_i`, with `I` the full index set.
///
/// The quadratic is minimized over the box by enumerating its faces: each
/// coordinate sits at `0`, at `M_i`, or is free, and the free block is solved for
/// its stationary point. The origin, where `Lambda_I` vanishes, is excluded.
pub fn refined_condition(masses: &[f64], a: &[Vec<f64>]) -> Result<bool> {
    let n = masses.len();
    check_symmetric(a, n)?;
    if n == 0 {
        return Err(Error::EmptySubset);
    }
    let full: Vec<usize> = (0..n).collect();
    let value = |m: &[f64]| lambda_j_unchecked(m, a, &full);
    let mut patterns = vec![0u8; n];
    loop {
        if let Some(m) = face_candidate(masses, a, &patterns) {
            let origin = m.iter().all(|x| *x == 0.0);
            if !origin && value(&m) <= 0.0 {
                return Ok(false);
            }
        }
        // next pattern in base 3
        let mut k = 0;
        loop {
            if k == n {
                return Ok(true);
            }
            patterns[k] += 1;
            if patterns[k] < 3 {
                break;
            }
            patterns[k] = 0;
            k += 1;
        }
    }
}

/// Stationary point on the face described by `pattern` (0: lower, 1: upper, 2: free),
/// if it exists and lies in the box.
fn face_candidate(masses: &[f64], a: &[Vec<f64>], pattern: &[u8]) -> Option<Vec<f64>> {
    let n = masses.len();
    let mut m: Vec<f64> = (0..n).map(|i| if pattern[i] == 1 { masses[i] } else { 0.0 }).collect();
    let free: Vec<usize> = (0..n).filter(|&i| pattern[i] == 2).collect();
    if free.is_empty() {
        return Some(m);
    }
    // grad: 4 pi - (A m)_i = 0 for free i
    let k = free.len();
    let mut mat = vec![vec![0.0; k + 1]; k];
    for (r, &i) in free.iter().enumerate() {
        for (c, &j) in free.iter().enumerate() {
            mat[r][c] = a[i][j];
        }
        let fixed: f64 = (0..n).filter(|j| pattern[*j] != 2).map(|j| a[i][j] * m[j]).sum();
        mat[r][k] = 4.0 * PI - fixed;
    }
    let x = gauss(mat)?;
    for (&i, v) in free.iter().zip(&x) {
        if !(*v >= 0.0 && *v <= masses[i]) {
            return None;
        }
        m[i] = *v;
    }
    Some(m)
}

fn gauss(mut m: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let k = m.len();
    for c in 0..k {
        let piv = (c..k).max_by(|&i, &j| m[i][c].abs().partial_cmp(&m[j][c].abs()).unwrap())?;
        if m[piv][c].abs() < 1e-300 {
            return None;
        }
        m.swap(c, piv);
        for r in 0..k {
            if r != c {
                let f = m[r][c] / m[c][c];
                for col in c..=k {
                    m[r][col] -= f * m[c][col];
                }
            }
        }
    }
    Some((0..k).map(|i| m[i][k] / m[i][i]).collect())
}

/// Larger root `M` of `Lambda(M, M_2*) = 0` with `M_2* = (4 pi / gamma)(2 beta / alpha - 1)`;
/// infinite when `gamma = 0`.
pub fn underline_m(p: &Params) -> Result<f64> {
    if p.gamma == 0.0 || p.alpha == 0.0 {
        return Ok(f64::INFINITY);
    }
    let s = second_mass_threshold(p);
    // Lambda(M, s) = a M^2 + b M + c
    let a = -p.alpha / (4.0 * PI);
    let b = 2.0 + p.beta * s / (2.0 * PI);
    let c = -2.0 * s - p.gamma * s * s / (4.0 * PI);
    larger_root(a, b, c)
}

/// `M_2* = (4 pi / gamma)(2 beta / alpha - 1)`, where `2 beta / alpha = gamma M_2 / 4 pi + 1`.
pub fn second_mass_threshold(p: &Params) -> f64 {
    if p.gamma == 0.0 {
        return f64::INFINITY;
    }
    4.0 * PI / p.gamma * (2.0 * p.beta / p.alpha - 1.0)
}

fn larger_root(a: f64, b: f64, c: f64) -> Result<f64> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Err(Error::NoRealRoot(disc));
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let r1 = q / a;
    let r2 = if q != 0.0 { c / q } else { r1 };
    Ok(r1.max(r2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    BoundedBelow,
    RadiallyBounded,
    UnboundedBelow,
    /// A solution is guaranteed (mutual repulsion).
    Exists,
    /// Outside the sufficient condition for mutual repulsion.
    NotCovered,
    Unknown,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::BoundedBelow => "BoundedBelow",
            Verdict::RadiallyBounded => "RadiallyBounded",
            Verdict::UnboundedBelow => "UnboundedBelow",
            Verdict::Exists => "Exists",
            Verdict::NotCovered => "NotCovered",
            Verdict::Unknown => "Unknown",
        }
    }
}

/// One named inequality `value > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inequality {
    pub name: &'static str,
    pub value: f64,
}

impl Inequality {
    pub fn holds(&self) -> bool {
        self.value > MARGIN
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVerdict {
    pub point: (f64, f64),
    pub verdict: Verdict,
    /// Rule of the table that decided the verdict (`None` for Unknown).
    pub rule: Option<u8>,
    /// Case label `a`, `b` or `c` under mutual repulsion.
    pub case: Option<char>,
    pub lambda: (f64, f64, f64),
    pub fired: Vec<Inequality>,
    /// Rules whose conditions hold, regardless of order.
    pub rules_true: Vec<u8>,
}

pub fn classify(p: &Params) -> Result<PhaseVerdict> {
    match p.theta {
        Theta::Conflict => classify_conflict(p),
        Theta::ConflictFree => classify_conflict_free(p),
    }
}

/// Best `Lambda(M_1, m)` over `0 <= m <= min(M_2, M_2*)`; `Lambda` is concave in `m`.
fn best_lower_lambda(p: &Params) -> f64 {
    let hi = p.m2.min(second_mass_threshold(p));
    if !(hi >= 0.0) {
        return f64::NEG_INFINITY;
    }
    let vertex = if p.gamma > 0.0 { (p.beta * p.m1 - 4.0 * PI) / p.gamma } else if p.beta * p.m1 > 4.0 * PI { hi } else { 0.0 };
    let m = vertex.clamp(0.0, hi);
    // the gamma condition is strict, so the supremum at hi = M_2* is not attained
    let m = if m == hi && hi == second_mass_threshold(p) { hi * (1.0 - 1e-12) } else { m };
    lambda_val(p.m1, m, p).0
}

/// Rule table under conflict; the first rule that holds decides.
///
/// 1. `M_1 < 8 pi / alpha`: bounded below.
/// 2. `Lambda < 0` and `Lambda_2 < 0`: unbounded below.
/// 3. `beta > alpha / 2`, `Lambda > 0`, `2 beta / alpha > gamma M_2 / 4 pi + 1`, `M_1 < M`: radial solutions.
/// 4. `beta > alpha / 2` and some `M_2' <= M_2` satisfies rule 3.
pub fn classify_conflict(p: &Params) -> Result<PhaseVerdict> {
    if p.theta != Theta::Conflict {
        return Err(Error::BadTheta(p.theta.value()));
    }
    let (m1, m2) = (p.m1, p.m2);
    let lam = lambda_val(m1, m2, p);
    let (l, _, l2) = lam;
    let under = underline_m(p).unwrap_or(f64::NAN);
    let fired = vec![
        Inequality { name: "8pi/alpha - m1", value: p.critical_mass() - m1 },
        Inequality { name: "-lambda", value: -l },
        Inequality { name: "-lambda2", value: -l2 },
        Inequality { name: "beta - alpha/2", value: p.beta - 0.5 * p.alpha },
        Inequality { name: "lambda", value: l },
        Inequality {
            name: "2beta/alpha - gamma m2/4pi - 1",
            value: 2.0 * p.beta / p.alpha - p.gamma * m2 / (4.0 * PI) - 1.0,
        },
        Inequality { name: "underline_m - m1", value: under - m1 },
        Inequality { name: "max lambda below m2", value: best_lower_lambda(p) },
    ];
    let h = |i: usize| fired[i].holds();
    let rule1 = h(0);
    let rule2 = h(1) && h(2);
    let rule3 = h(3) && h(4) && h(5) && h(6);
    let rule4 = h(3) && h(6) && h(7);
    let truth = [rule1, rule2, rule3, rule4];
    let rules_true: Vec<u8> = (0..4).filter(|&i| truth[i]).map(|i| i as u8 + 1).collect();
    let (verdict, rule) = match rules_true.first() {
        Some(1) => (Verdict::BoundedBelow, Some(1)),
        Some(2) => (Verdict::UnboundedBelow, Some(2)),
        Some(&r) => (Verdict::RadiallyBounded, Some(r)),
        None => (Verdict::Unknown, None),
    };
    Ok(PhaseVerdict { point: (m1, m2), verdict, rule, case: None, lambda: lam, fired, rules_true })
}

/// `Q(m) = 4 pi (M_1 + m) - (alpha/2) M_1^2 + (gamma/2) m^2 - beta M_1 m`.
pub fn repulsion_form(p: &Params, m: f64) -> f64 {
    4.0 * PI * (p.m1 + m) - 0.5 * p.alpha * p.m1 * p.m1 + 0.5 * p.gamma * m * m - p.beta * p.m1 * m
}

/// Minimum of `Q` over `[0, M_2]`.
fn repulsion_min(p: &Params) -> f64 {
    let mut best = repulsion_form(p, 0.0).min(repulsion_form(p, p.m2));
    if p.gamma > 0.0 {
        let v = (p.beta * p.m1 - 4.0 * PI) / p.gamma;
        if v > 0.0 && v < p.m2 {
            best = best.min(repulsion_form(p, v));
        }
    }
    best
}

/// `M_1` past which `Q` dips below zero for some `m > 0` (case c), i.e. the larger
/// root of the discriminant of `Q` in `m`. Infinite when there is none.
pub fn repulsion_threshold(p: &Params) -> f64 {
    // (beta^2 + alpha gamma) M^2 - 8 pi (beta + gamma) M + 16 pi^2 = 0
    let a = p.beta * p.beta + p.alpha * p.gamma;
    if a == 0.0 || p.gamma == 0.0 {
        return f64::INFINITY;
    }
    larger_root(a, -8.0 * PI * (p.beta + p.gamma), 16.0 * PI * PI).unwrap_or(f64::INFINITY)
}

/// Mutual repulsion: a solution exists when `M_1 < 8 pi / alpha` and `Q(m) > 0` on `(0, M_2)`.
pub fn classify_conflict_free(p: &Params) -> Result<PhaseVerdict> {
    if p.theta != Theta::ConflictFree {
        return Err(Error::BadTheta(p.theta.value()));
    }
    let case = if 2.0 * p.beta < p.alpha {
        'a'
    } else if p.gamma == 0.0 {
        'b'
    } else {
        'c'
    };
    let fired = vec![
        Inequality { name: "8pi/alpha - m1", value: p.critical_mass() - p.m1 },
        Inequality { name: "min Q on [0, m2]", value: repulsion_min(p) },
        Inequality { name: "threshold - m1", value: repulsion_threshold(p) - p.m1 },
    ];
    let lam = lambda_val(p.m1, p.m2, p);
    let exists = fired[0].holds() && fired[1].holds();
    let undecided = fired[0].value.abs() <= MARGIN || fired[1].value.abs() <= MARGIN;
    let verdict = if exists {
        Verdict::Exists
    } else if undecided {
        Verdict::Unknown
    } else {
        Verdict::NotCovered
    };
    Ok(PhaseVerdict {
        point: (p.m1, p.m2),
        verdict,
        rule: None,
        case: Some(case),
        lambda: lam,
        fired,
        rules_true: vec![],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConicKind {
    Ellipse,
    Parabola,
    Hyperbola,
}

/// Shape of the `Lambda = 0` locus.
pub fn conic_kind(p: &Params) -> ConicKind {
    let d = p.beta * p.beta - p.alpha * p.gamma;
    if d.abs() <= 1e-12 * (p.beta * p.beta).max(p.alpha * p.gamma).max(1e-300) {
        ConicKind::Parabola
    } else if d < 0.0 {
        ConicKind::Ellipse
    } else {
        ConicKind::Hyperbola
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub name: &'static str,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub resolution: usize,
    pub m1_centers: Vec<f64>,
    pub m2_centers: Vec<f64>,
    /// Row-major in `M_2`: cell `(i, j)` is `cells[j * resolution + i]`.
    pub cells: Vec<PhaseVerdict>,
    pub curves: Vec<Curve>,
    pub conic: ConicKind,
    /// Some cell satisfied both rule 1 and rule 2.
    pub co_fire: bool,
}

impl SweepResult {
    pub fn cell(&self, i: usize, j: usize) -> &PhaseVerdict {
        &self.cells[j * self.resolution + i]
    }

    pub fn cell_size(&self) -> (f64, f64) {
        let d = |c: &[f64]| if c.len() > 1 { c[1] - c[0] } else { 0.0 };
        (d(&self.m1_centers), d(&self.m2_centers))
    }
}

fn centers(range: (f64, f64), n: usize) -> Vec<f64> {
    let h = (range.1 - range.0) / n as f64;
    (0..n).map(|i| range.0 + (i as f64 + 0.5) * h).collect()
}

/// Classifies the cell centers of a `resolution x resolution` grid and samples the
/// analytic boundary curves over the same window.
pub fn sweep(base: &Params, m1_range: (f64, f64), m2_range: (f64, f64), resolution: usize) -> Result<SweepResult> {
    let conic = conic_kind(base);
    let empty = !(m1_range.1 > m1_range.0) || !(m2_range.1 > m2_range.0) || resolution == 0;
    if empty {
        return Ok(SweepResult {
            resolution: 0,
            m1_centers: vec![],
            m2_centers: vec![],
            cells: vec![],
            curves: vec![],
            conic,
            co_fire: false,
        });
    }
    let m1c = centers(m1_range, resolution);
    let m2c = centers(m2_range, resolution);
    let cells: Vec<PhaseVerdict> = (0..resolution * resolution)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k % resolution, k / resolution);
            let q = base.with_masses(m1c[i], m2c[j]);
            classify(&q).expect("theta matches")
        })
        .collect();
    let co_fire = cells.iter().any(|c| c.rules_true.contains(&1) && c.rules_true.contains(&2));
    let curves = boundary_curves(base, m1_range, m2_range, 20 * resolution.max(200));
    Ok(SweepResult { resolution, m1_centers: m1c, m2_centers: m2c, cells, curves, conic, co_fire })
}

fn in_window(pt: (f64, f64), a: (f64, f64), b: (f64, f64)) -> bool {
    pt.0 >= a.0 && pt.0 <= a.1 && pt.1 >= b.0 && pt.1 <= b.1
}

/// Real roots of `a x^2 + b x + c` (or of the linear equation when `a = 0`).
fn roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return if b != 0.0 { vec![-c / b] } else { vec![] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let q = -0.5 * (b + if b >= 0.0 { 1.0 } else { -1.0 } * disc.sqrt());
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / a, c / q]
}

/// Polylines of every boundary used by the rule tables, densely sampled in both directions.
pub fn boundary_curves(p: &Params, m1_range: (f64, f64), m2_range: (f64, f64), samples: usize) -> Vec<Curve> {
    let s1: Vec<f64> = (0..=samples).map(|k| m1_range.0 + (m1_range.1 - m1_range.0) * k as f64 / samples as f64).collect();
    let s2: Vec<f64> = (0..=samples).map(|k| m2_range.0 + (m2_range.1 - m2_range.0) * k as f64 / samples as f64).collect();
    let keep = |pts: Vec<(f64, f64)>| pts.into_iter().filter(|pt| in_window(*pt, m1_range, m2_range)).collect::<Vec<_>>();
    let vertical = |x: f64| if x.is_finite() { keep(s2.iter().map(|&y| (x, y)).collect()) } else { vec![] };
    let horizontal = |y: f64| if y.is_finite() { keep(s1.iter().map(|&x| (x, y)).collect()) } else { vec![] };
    let four_pi = 4.0 * PI;

    // Lambda = 0 as a quadratic in M_2 for each M_1, and in M_1 for each M_2
    let mut lambda = Vec::new();
    for &x in &s1 {
        for y in roots(-p.gamma / four_pi, p.beta * x / (2.0 * PI) - 2.0, 2.0 * x - p.alpha * x * x / four_pi) {
            lambda.push((x, y));
        }
    }
    for &y in &s2 {
        for x in roots(-p.alpha / four_pi, 2.0 + p.beta * y / (2.0 * PI), -2.0 * y - p.gamma * y * y / four_pi) {
            lambda.push((x, y));
        }
    }
    // Lambda_2 = 0
    let mut lambda2 = Vec::new();
    for &x in &s1 {
        for y in roots(p.gamma / four_pi, 0.0, 2.0 * x - p.alpha * x * x / four_pi) {
            lambda2.push((x, y));
        }
    }
    for &y in &s2 {
        for x in roots(-p.alpha / four_pi, 2.0, p.gamma * y * y / four_pi) {
            lambda2.push((x, y));
        }
    }
    // beta M_1 - gamma M_2 = 4 pi
    let mut line = Vec::new();
    if p.beta > 0.0 {
        line.extend(s2.iter().map(|&y| ((four_pi + p.gamma * y) / p.beta, y)));
    }
    if p.gamma > 0.0 {
        line.extend(s1.iter().map(|&x| (x, (p.beta * x - four_pi) / p.gamma)));
    }
    let mut curves = vec![
        Curve { name: "critical_mass", points: vertical(p.critical_mass()) },
        Curve { name: "lambda_zero", points: keep(lambda) },
        Curve { name: "lambda2_zero", points: keep(lambda2) },
        Curve { name: "cross_line", points: keep(line) },
    ];
    match p.theta {
        Theta::Conflict => {
            if p.beta > 0.0 {
                curves.push(Curve { name: "half_critical", points: vertical(4.0 * PI / p.beta) });
            }
            if let Ok(m) = underline_m(p) {
                curves.push(Curve { name: "underline_m", points: vertical(m) });
            }
            curves.push(Curve { name: "second_mass_threshold", points: horizontal(second_mass_threshold(p)) });
        }
        Theta::ConflictFree => {
            // Q(M_1, M_2) = 0 in both directions, and the vertical tangent
            let mut q = Vec::new();
            for &x in &s1 {
                for y in roots(0.5 * p.gamma, four_pi - p.beta * x, four_pi * x - 0.5 * p.alpha * x * x) {
                    q.push((x, y));
                }
            }
            for &y in &s2 {
                for x in roots(-0.5 * p.alpha, four_pi - p.beta * y, four_pi * y + 0.5 * p.gamma * y * y) {
                    q.push((x, y));
                }
            }
            curves.push(Curve { name: "repulsion_form_zero", points: keep(q) });
            curves.push(Curve { name: "repulsion_threshold", points: vertical(repulsion_threshold(p)) });
            if p.gamma > 0.0 {
                // vertex line of Q in m
                curves.push(Curve {
                    name: "repulsion_vertex",
                    points: keep(s1.iter().map(|&x| (x, (p.beta * x - four_pi) / p.gamma)).collect()),
                });
            }
        }
    }
    curves.retain(|c| !c.points.is_empty());
    curves
}

/// Distance from `pt` to the nearest emitted curve point.
pub fn distance_to_curves(curves: &[Curve], pt: (f64, f64)) -> f64 {
    curves
        .iter()
        .flat_map(|c| c.points.iter())
        .map(|q| ((q.0 - pt.0).powi(2) + (q.1 - pt.1).powi(2)).sqrt())
        .fold(f64::INFINITY, f64::min)
}

/// Midpoints of horizontally or vertically adjacent cells with different verdicts.
pub fn verdict_changes(s: &SweepResult) -> Vec<(f64, f64)> {
    let n = s.resolution;
    let mut out = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let v = s.cell(i, j).verdict;
            if i + 1 < n && s.cell(i + 1, j).verdict != v {
                out.push((0.5 * (s.m1_centers[i] + s.m1_centers[i + 1]), s.m2_centers[j]));
            }
            if j + 1 < n && s.cell(i, j + 1).verdict != v {
                out.push((s.m1_centers[i], 0.5 * (s.m2_centers[j] + s.m2_centers[j + 1])));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossCheck {
    pub point: (f64, f64),
    pub verdict: Verdict,
    /// Blow-down slope for unbounded verdicts.
    pub slope: Option<f64>,
    /// Solver convergence for bounded verdicts.
    pub solved: Option<bool>,
    pub confirmed: bool,
}

/// Confirms unbounded verdicts by a negative blow-down slope and bounded verdicts
/// by convergence of the coupled solver, at the given points.
pub fn cross_validate(base: &Params, points: &[(f64, f64)], n: usize) -> Result<Vec<CrossCheck>> {
    let grid = make_grid(n, GridKind::Uniform)?;
    points
        .par_iter()
        .map(|&(m1, m2)| {
            let q = base.with_masses(m1, m2);
            let v = classify(&q)?;
            let mut check = CrossCheck { point: (m1, m2), verdict: v.verdict, slope: None, solved: None, confirmed: false };
            match v.verdict {
                Verdict::UnboundedBelow => {
                    let fam = BlowdownFamily::smooth(&q, n, default_ladder(), ScaleMode::Full)?;
                    let s = slope_estimate(&fam, &q)?.slope;
                    check.slope = Some(s);
                    check.confirmed = s < 0.0;
                }
                Verdict::BoundedBelow | Verdict::RadiallyBounded | Verdict::Exists => {
                    let opts = SolveOptions { max_iter: 2000, continuation_steps: 8, ..Default::default() };
                    let ok = solve_pair(&q, &grid, &opts).is_ok();
                    check.solved = Some(ok);
                    check.confirmed = ok;
                }
                _ => {}
            }
            Ok(check)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(alpha: f64, beta: f64, gamma: f64, theta: f64, m1: f64, m2: f64) -> Params {
        Params::new(alpha, beta, gamma, theta, m1, m2).unwrap()
    }

    #[test]
    fn lambda_examples() {
        let p = params(1.0, 1.0, 1.0, -1.0, 1.0, 1.0);
        let (l, l1, l2) = lambda_val(1.0, 1.0, &p);
        assert!(l.abs() < 1e-14);
        assert!((l - (l1 + l2)).abs() < 1e-15);
        let p = params(1.0, 2.0, 0.0, -1.0, 1.0, 0.0);
        let (l, _, l2) = lambda_val(8.0 * PI, 0.0, &p);
        assert_eq!(l, l2);
        assert!(l.abs() < 1e-12);
        let (l, _, _) = lambda_val(4.0 * PI, 2.0 * PI, &p);
        assert!((l - 8.0 * PI).abs() < 1e-12);
        assert!((l - 25.132_741).abs() < 1e-6);
    }

    #[test]
    fn lambda_j_examples() {
        let alpha = 1.5;
        let a = vec![vec![alpha]];
        for m in [1.0, 8.0 * PI / alpha - 0.1, 8.0 * PI / alpha + 0.1] {
            let v = lambda_j(&[m], &a, &[0]).unwrap();
            assert!((v - (4.0 * PI * m - alpha * m * m / 2.0)).abs() < 1e-12);
            assert_eq!(v > 0.0, m < 8.0 * PI / alpha);
        }
        let (beta, gamma) = (0.7, 2.0);
        let a = vec![vec![alpha, beta], vec![beta, -gamma]];
        let v = lambda_j(&[3.0, 5.0], &a, &[1]).unwrap();
        assert!((v - (4.0 * PI * 5.0 + gamma * 25.0 / 2.0)).abs() < 1e-12);
        assert_eq!(lambda_j(&[1.0], &[vec![1.0]], &[]).unwrap_err(), Error::EmptySubset);
        let bad = vec![vec![1.0, 2.0], vec![0.0, 1.0]];
        assert_eq!(lambda_j(&[1.0, 1.0], &bad, &[0]).unwrap_err(), Error::AsymmetricMatrix);
    }

    #[test]
    fn refined_condition_matches_repulsion_form() {
        // 2x2 repulsion matrix: Lambda_I(M_1, m) is the form Q
        let (alpha, beta, gamma) = (1.0, 1.0, 1.0);
        let a = vec![vec![alpha, beta], vec![beta, -gamma]];
        let p = params(alpha, beta, gamma, 1.0, 5.0, 3.0);
        assert!((lambda_j(&[5.0, 3.0], &a, &[0, 1]).unwrap() - repulsion_form(&p, 3.0)).abs() < 1e-12);
        assert!(refined_condition(&[5.0, 3.0], &a).unwrap());
        assert!(!refined_condition(&[30.0, 3.0], &a).unwrap());
        // a negative diagonal defeats the plain subset test on a single index only through m
        assert!(all_subsets_positive(&[5.0, 3.0], &a).unwrap());
    }

    #[test]
    fn underline_m_examples() {
        let p = params(1.0, 2.0, 0.0, -1.0, 1.0, 1.0);
        assert_eq!(underline_m(&p).unwrap(), f64::INFINITY);
        let p = params(1.0, 1.0, 1.0, -1.0, 1.0, 1.0);
        let m = underline_m(&p).unwrap();
        assert!((m - 12.0 * PI).abs() < 1e-9);
        // hand-expanded quadratic M^2 - 16 pi M + 48 pi^2
        let q = |x: f64| x * x - 16.0 * PI * x + 48.0 * PI * PI;
        assert!(q(12.0 * PI).abs() < 1e-9 && q(4.0 * PI).abs() < 1e-9);
        assert!(lambda_val(m, 4.0 * PI, &p).0.abs() < 1e-10);
        let eps = 1e-6 * m;
        assert!(lambda_val(m - eps, 4.0 * PI, &p).0 > 0.0);
        assert!(lambda_val(m + eps, 4.0 * PI, &p).0 < 0.0);
    }

    #[test]
    fn conflict_examples() {
        let v = classify_conflict(&params(1.0, 0.3, 0.5, -1.0, 10.0, 7.0)).unwrap();
        assert_eq!(v.verdict, Verdict::BoundedBelow);
        assert_eq!(v.rule, Some(1));

        let v = classify_conflict(&params(1.0, 2.0, 0.0, -1.0, 30.0, 1.0)).unwrap();
        let (l, l1, l2) = v.lambda;
        assert!((l2 - (60.0 - 900.0 / (4.0 * PI))).abs() < 1e-12);
        assert!((l2 + 11.62).abs() < 0.01 && (l1 - 7.549).abs() < 1e-3 && l < 0.0);
        assert_eq!(v.verdict, Verdict::UnboundedBelow);

        let v = classify_conflict(&params(1.0, 2.0, 0.0, -1.0, 30.0, 4.0)).unwrap();
        assert!((v.lambda.0 - 18.58).abs() < 0.01);
        assert_eq!(v.verdict, Verdict::RadiallyBounded);
        assert_eq!(v.rule, Some(3));

        assert!(classify_conflict(&params(1.0, 2.0, 0.0, 1.0, 30.0, 4.0)).is_err());
    }

    #[test]
    fn rule_four_above_rule_three() {
        // gamma > 0: above M_2* the gamma condition fails but rule 4 still holds
        let base = params(1.0, 2.0, 1.0, -1.0, 30.0, 1.0);
        let star = second_mass_threshold(&base);
        let below = classify_conflict(&base.with_masses(30.0, star - 1.0)).unwrap();
        assert_eq!(below.rule, Some(3));
        let above = classify_conflict(&base.with_masses(30.0, star + 1.0)).unwrap();
        assert_eq!(above.verdict, Verdict::RadiallyBounded);
        assert_eq!(above.rule, Some(4));
    }

    #[test]
    fn conflict_free_examples() {
        let v = classify_conflict_free(&params(1.0, 0.4, 1.0, 1.0, 10.0, 5.0)).unwrap();
        assert_eq!(v.verdict, Verdict::Exists);
        assert_eq!(v.case, Some('a'));
        // case b: Q(M_2) <= 0
        let p = params(1.0, 1.0, 0.0, 1.0, 20.0, 30.0);
        assert!(repulsion_form(&p, 30.0) < 0.0);
        let v = classify_conflict_free(&p).unwrap();
        assert_eq!((v.verdict, v.case), (Verdict::NotCovered, Some('b')));
        for m1 in [1.0, 10.0, 25.0, 26.0] {
            let v = classify_conflict_free(&params(1.0, 1.0, 1.0, 1.0, m1, 0.0)).unwrap();
            assert_eq!(v.verdict == Verdict::Exists, m1 < 8.0 * PI);
        }
        assert!(classify_conflict_free(&params(1.0, 1.0, 1.0, -1.0, 1.0, 1.0)).is_err());
    }

    #[test]
    fn conflict_free_case_c_threshold() {
        let p = params(1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        let t = repulsion_threshold(&p);
        assert!(t > 4.0 * PI && t < 8.0 * PI);
        // below the threshold any second mass is admissible
        let v = classify_conflict_free(&p.with_masses(t - 0.5, 1e4)).unwrap();
        assert_eq!(v.verdict, Verdict::Exists);
        // above it, large second masses are not
        let v = classify_conflict_free(&p.with_masses(t + 0.5, 1e4)).unwrap();
        assert_eq!(v.verdict, Verdict::NotCovered);
    }

    #[test]
    fn empty_sweep() {
        let p = params(1.0, 2.0, 0.0, -1.0, 1.0, 1.0);
        let s = sweep(&p, (1.0, 1.0), (0.0, 40.0), 50).unwrap();
        assert!(s.cells.is_empty() && s.curves.is_empty());
    }

    #[test]
    fn small_sweep_changes_near_curves() {
        let p = params(1.0, 2.0, 0.0, -1.0, 1.0, 1.0);
        let s = sweep(&p, (0.0, 40.0), (0.0, 40.0), 40).unwrap();
        assert!(!s.co_fire);
        assert_eq!(s.conic, ConicKind::Hyperbola);
        let (dx, dy) = s.cell_size();
        let diag = (dx * dx + dy * dy).sqrt();
        for pt in verdict_changes(&s) {
            assert!(distance_to_curves(&s.curves, pt) <= diag, "{pt:?}");
        }
        // Lambda changes sign across points of the zero locus
        let lam = s.curves.iter().find(|c| c.name == "lambda_zero").unwrap();
        for &(x, y) in lam.points.iter().step_by(97) {
            let a = lambda_val(x, y + 0.05, &p).0;
            let b = lambda_val(x, (y - 0.05).max(0.0), &p).0;
            assert!(a * b <= 0.0 || y < 0.05);
        }
    }

    #[test]
    fn conflict_free_rectangle() {
        let p = params(1.0, 0.4, 1.0, 1.0, 1.0, 1.0);
        let s = sweep(&p, (0.0, 40.0), (0.0, 40.0), 40).unwrap();
        for c in &s.cells {
            assert_eq!(c.verdict == Verdict::Exists, c.point.0 < 8.0 * PI);
        }
    }

    #[test]
    fn cross_validation_small() {
        let p = params(1.0, 2.0, 0.0, -1.0, 1.0, 1.0);
        let checks = cross_validate(&p, &[(30.0, 1.0), (10.0, 2.0)], 1024).unwrap();
        assert_eq!(checks[0].verdict, Verdict::UnboundedBelow);
        assert!(checks[0].confirmed, "{:?}", checks[0]);
        assert_eq!(checks[1].verdict, Verdict::BoundedBelow);
        assert!(checks[1].confirmed);
    }

    proptest! {
        #[test]
        fn lambda_is_sum_of_parts(m1 in 0.01f64..100.0, m2 in 0.0f64..100.0, a in 0.0f64..3.0, b in 0.0f64..3.0, g in 0.0f64..3.0) {
            let p = params(a, b, g, -1.0, m1, m2);
            let (l, l1, l2) = lambda_val(m1, m2, &p);
            prop_assert_eq!(l, l1 + l2);
        }

        #[test]
        fn rules_one_and_two_disjoint(m1 in 0.01f64..60.0, m2 in 0.0f64..60.0, b in 0.0f64..3.0, g in 0.0f64..3.0) {
            let v = classify_conflict(&params(1.0, b, g, -1.0, m1, m2)).unwrap();
            prop_assert!(!(v.rules_true.contains(&1) && v.rules_true.contains(&2)));
        }

        #[test]
        fn no_second_species_is_single_threshold(m1 in 0.01f64..60.0, b in 0.0f64..3.0, g in 0.0f64..3.0) {
            prop_assume!((m1 - 8.0 * PI).abs() > 1e-9);
            let v = classify_conflict(&params(1.0, b, g, -1.0, m1, 0.0)).unwrap();
            if m1 < 8.0 * PI {
                prop_assert_eq!(v.verdict, Verdict::BoundedBelow);
            } else {
                prop_assert_eq!(v.verdict, Verdict::UnboundedBelow);
            }
        }
    }
}
