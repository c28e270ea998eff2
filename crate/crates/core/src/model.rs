//! Parameters, radial grids and nodal fields on the unit disk.
//!
//! Every field is a set of nodal samples `f(r_i)` on a grid `0 = r_0 < ... < r_n = 1`.
//! The grid also carries its finite-volume geometry: faces `r_{i+1/2}` halfway
//! between nodes and the dual-cell areas `|{r_{i-1/2} < |x| < r_{i+1/2}}|`,
//! which are the quadrature weights used everywhere else in the crate.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Sign of the cross-coupling of species 2 to species 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Theta {
    /// theta = -1: species 1 is attracted to species 2, species 2 is repelled by species 1.
    Conflict,
    /// theta = +1: mutual repulsion.
    ConflictFree,
}

impl Theta {
    pub fn from_value(theta: f64) -> Result<Self> {
        if (theta + 1.0).abs() < 1e-12 {
            Ok(Theta::Conflict)
        } else if (theta - 1.0).abs() < 1e-12 {
            Ok(Theta::ConflictFree)
        } else {
            Err(Error::BadTheta(theta))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Theta::Conflict => -1.0,
            Theta::ConflictFree => 1.0,
        }
    }
}

/// Physical constants and masses of one model instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    /// Self-attraction of species 1.
    pub alpha: f64,
    /// Cross-coupling strength.
    pub beta: f64,
    /// Self-repulsion of species 2.
    pub gamma: f64,
    pub theta: Theta,
    pub m1: f64,
    pub m2: f64,
}

impl Params {
    /// Builds and validates a parameter set; `theta` is given numerically.
    pub fn new(alpha: f64, beta: f64, gamma: f64, theta: f64, m1: f64, m2: f64) -> Result<Self> {
        let theta = Theta::from_value(theta)?;
        validate_params(Params { alpha, beta, gamma, theta, m1, m2 })
    }

    pub fn with_masses(&self, m1: f64, m2: f64) -> Self {
        Params { m1, m2, ..*self }
    }

    /// Single-species critical mass `8 pi / alpha` (infinite for alpha = 0).
    pub fn critical_mass(&self) -> f64 {
        if self.alpha > 0.0 {
            8.0 * PI / self.alpha
        } else {
            f64::INFINITY
        }
    }
}

pub fn validate_params(p: Params) -> Result<Params> {
    for (name, value) in [("alpha", p.alpha), ("beta", p.beta), ("gamma", p.gamma)] {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::NegativeConstant { name, value });
        }
    }
    if !(p.m1 > 0.0) || !p.m1.is_finite() {
        return Err(Error::NonpositiveMass { name: "m1", value: p.m1 });
    }
    if !(p.m2 >= 0.0) || !p.m2.is_finite() {
        return Err(Error::NonpositiveMass { name: "m2", value: p.m2 });
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    /// `r_i = i / n`
    Uniform,
    /// `r_i = (i / n)^2`, clustered near the origin.
    Graded,
}

pub const MIN_CELLS: usize = 8;
pub const DEFAULT_CELLS: usize = 4096;

/// Nodes of a radial grid on `[0, 1]` together with its finite-volume geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    kind: GridKind,
    r: Vec<f64>,
    faces: Vec<f64>,
    spacing: Vec<f64>,
    volumes: Vec<f64>,
}

impl RadialGrid {
    pub fn n(&self) -> usize {
        self.r.len() - 1
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    /// Node radii, `n + 1` entries.
    pub fn nodes(&self) -> &[f64] {
        &self.r
    }

    /// Face radii `r_{i+1/2}`, `n` entries.
    pub fn faces(&self) -> &[f64] {
        &self.faces
    }

    /// Cell widths `r_{i+1} - r_i`, `n` entries.
    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    /// Dual-cell areas; they sum to `pi` exactly up to round-off.
    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// Builds a grid from arbitrary nodes (strictly increasing, `0` and `1` at the ends).
    pub fn from_nodes(kind: GridKind, r: Vec<f64>) -> Result<Self> {
        let n = r.len().saturating_sub(1);
        if n < MIN_CELLS {
            return Err(Error::TooCoarse(n));
        }
        assert!(r[0] == 0.0 && r[n] == 1.0, "grid endpoints must be exactly 0 and 1");
        assert!(r.windows(2).all(|w| w[1] > w[0]), "grid nodes must increase strictly");
        let faces: Vec<f64> = r.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let spacing: Vec<f64> = r.windows(2).map(|w| w[1] - w[0]).collect();
        let mut volumes = Vec::with_capacity(n + 1);
        let mut inner = 0.0;
        for i in 0..=n {
            let outer = if i < n { faces[i] } else { 1.0 };
            volumes.push(PI * (outer * outer - inner * inner));
            inner = outer;
        }
        Ok(RadialGrid { kind, r, faces, spacing, volumes })
    }

    /// Index of the cell `[r_i, r_{i+1}]` containing `r` (clamped to the grid).
    pub fn locate(&self, r: f64) -> usize {
        let n = self.n();
        if r <= 0.0 {
            return 0;
        }
        if r >= 1.0 {
            return n - 1;
        }
        match self.r.binary_search_by(|x| x.partial_cmp(&r).unwrap()) {
            Ok(i) => i.min(n - 1),
            Err(i) => i - 1,
        }
    }
}

pub fn make_grid(n: usize, kind: GridKind) -> Result<Arc<RadialGrid>> {
    if n < MIN_CELLS {
        return Err(Error::TooCoarse(n));
    }
    let nf = n as f64;
    let r = (0..=n)
        .map(|i| {
            if i == n {
                return 1.0;
            }
            let s = i as f64 / nf;
            match kind {
                GridKind::Uniform => s,
                GridKind::Graded => s * s,
            }
        })
        .collect();
    RadialGrid::from_nodes(kind, r).map(Arc::new)
}

/// What a field represents; determines which invariants are checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// Nonnegative everywhere.
    Density,
    /// Vanishes at `r = 1`.
    Potential,
    /// No constraint (intermediate quantities, test fields).
    Plain,
}

/// Nodal samples of a radial function, interpolated piecewise-linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
    kind: FieldKind,
}

impl RadialField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>, kind: FieldKind) -> Result<Self> {
        let expected = grid.n() + 1;
        if values.len() != expected {
            return Err(Error::LengthMismatch { expected, got: values.len() });
        }
        match kind {
            FieldKind::Density => {
                if let Some((index, &value)) =
                    values.iter().enumerate().find(|(_, v)| !(**v >= 0.0))
                {
                    return Err(Error::NegativeDensity { index, value });
                }
            }
            FieldKind::Potential => {
                let last = values[expected - 1];
                if last != 0.0 {
                    return Err(Error::BoundaryValue(last));
                }
            }
            FieldKind::Plain => {}
        }
        Ok(RadialField { grid, values, kind })
    }

    pub fn density(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, values, FieldKind::Density)
    }

    /// A potential; the boundary sample is forced to exactly zero when it is
    /// already zero up to round-off.
    pub fn potential(grid: Arc<RadialGrid>, mut values: Vec<f64>) -> Result<Self> {
        if let Some(last) = values.last_mut() {
            if last.abs() < 1e-13 {
                *last = 0.0;
            }
        }
        Self::new(grid, values, FieldKind::Potential)
    }

    pub fn plain(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, values, FieldKind::Plain)
    }

    pub fn zeros(grid: Arc<RadialGrid>, kind: FieldKind) -> Self {
        let n = grid.n();
        RadialField { grid, values: vec![0.0; n + 1], kind }
    }

    pub fn from_fn(grid: Arc<RadialGrid>, kind: FieldKind, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::new(grid, values, kind)
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Same grid and values, different tag (validated).
    pub fn retag(self, kind: FieldKind) -> Result<Self> {
        Self::new(self.grid, self.values, kind)
    }

    pub fn same_grid(&self, other: &RadialField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn map(&self, kind: FieldKind, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect(), kind)
    }

    pub fn scaled(&self, c: f64) -> RadialField {
        RadialField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
            kind: self.kind,
        }
    }

    /// Piecewise-linear interpolation; constant extension outside `[0, 1]`.
    pub fn eval(&self, r: f64) -> f64 {
        let nodes = self.grid.nodes();
        if r <= 0.0 {
            return self.values[0];
        }
        if r >= 1.0 {
            return self.values[self.values.len() - 1];
        }
        let i = self.grid.locate(r);
        let t = (r - nodes[i]) / (nodes[i + 1] - nodes[i]);
        (1.0 - t) * self.values[i] + t * self.values[i + 1]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Rescales a nonnegative field so that its disk integral equals `m`.
pub fn project_density(f: &RadialField, m: f64) -> Result<RadialField> {
    if !(m > 0.0) {
        return Err(Error::NonpositiveMass { name: "m", value: m });
    }
    if let Some((index, &value)) = f.values().iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::NegativeDensity { index, value });
    }
    let total = crate::radial::integrate_disk(f);
    if total <= 0.0 {
        return Err(Error::ZeroDensity);
    }
    let c = m / total;
    RadialField::density(f.grid().clone(), f.values().iter().map(|v| c * v).collect())
}

/// Which limit of the parabolic system a flow run integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowCase {
    /// (1, 1, 0): both densities evolve, potentials elliptic.
    BothDensities,
    /// (1, 0, 0): species 1 evolves, species 2 slaved to its nonlocal equation.
    SlavedSecond,
    /// (0, 0, 1): potentials evolve by the exponential heat flow.
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig {
    pub delta1: f64,
    pub delta2: f64,
    pub epsilon: f64,
    /// Initial time step.
    pub dt: f64,
    pub t_end: f64,
    /// Halve on rejection and regrow towards `dt` after accepted steps.
    pub adapt: bool,
}

impl FlowConfig {
    pub fn new(delta1: f64, delta2: f64, epsilon: f64, dt: f64, t_end: f64, adapt: bool) -> Result<Self> {
        let cfg = FlowConfig { delta1, delta2, epsilon, dt, t_end, adapt };
        cfg.case()?;
        if !(dt > 0.0) || !(t_end > 0.0) {
            return Err(Error::BadOptions("dt and t_end must be positive"));
        }
        Ok(cfg)
    }

    pub fn case(&self) -> Result<FlowCase> {
        match (self.delta1, self.delta2, self.epsilon) {
            (d1, d2, e) if d1 == 1.0 && d2 == 1.0 && e == 0.0 => Ok(FlowCase::BothDensities),
            (d1, d2, e) if d1 == 1.0 && d2 == 0.0 && e == 0.0 => Ok(FlowCase::SlavedSecond),
            (d1, d2, e) if d1 == 0.0 && d2 == 0.0 && e == 1.0 => Ok(FlowCase::Exponential),
            (d1, d2, e) => Err(Error::BadFlowConfig(d1, d2, e)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn params_accept_and_reject() {
        assert!(Params::new(1.0, 2.0, 0.0, -1.0, 4.0 * PI, 1.0).is_ok());
        assert!(Params::new(1.0, 0.5, 1.0, 1.0, 10.0, 5.0).is_ok());
        assert!(matches!(
            Params::new(-1.0, 2.0, 0.0, -1.0, 1.0, 1.0),
            Err(Error::NegativeConstant { name: "alpha", .. })
        ));
        assert!(matches!(
            Params::new(1.0, 2.0, 0.0, -1.0, 0.0, 1.0),
            Err(Error::NonpositiveMass { name: "m1", .. })
        ));
        assert!(matches!(
            Params::new(1.0, 2.0, 0.0, -1.0, 1.0, -0.1),
            Err(Error::NonpositiveMass { name: "m2", .. })
        ));
        assert!(matches!(Params::new(1.0, 2.0, 0.0, 0.0, 1.0, 1.0), Err(Error::BadTheta(_))));
        // m2 = 0 is allowed
        assert!(Params::new(1.0, 2.0, 0.0, -1.0, 1.0, 0.0).is_ok());
    }

    #[test]
    fn grid_construction() {
        assert_eq!(make_grid(4, GridKind::Uniform).unwrap_err(), Error::TooCoarse(4));
        let g = make_grid(8, GridKind::Uniform).unwrap();
        for (i, r) in g.nodes().iter().enumerate() {
            assert_eq!(*r, i as f64 / 8.0);
        }
        let g = make_grid(8, GridKind::Graded).unwrap();
        assert_eq!(g.nodes()[4], 0.25);
        let total: f64 = g.volumes().iter().sum();
        assert!((total - PI).abs() < 1e-14);
    }

    #[test]
    fn project_density_examples() {
        let g = make_grid(256, GridKind::Uniform).unwrap();
        let one = RadialField::from_fn(g.clone(), FieldKind::Density, |_| 1.0).unwrap();
        let p = project_density(&one, 1.0).unwrap();
        assert!(p.values().iter().all(|v| (v - 1.0 / PI).abs() < 1e-14));
        let q = project_density(&p, 1.0).unwrap();
        assert!(q.values().iter().zip(p.values()).all(|(a, b)| (a - b).abs() < 1e-15));

        let zero = RadialField::zeros(g.clone(), FieldKind::Density);
        assert_eq!(project_density(&zero, 1.0).unwrap_err(), Error::ZeroDensity);
    }

    #[test]
    fn project_parabola_constant() {
        // oracle: int_D (1 - r^2) dx = 2 pi (1/2 - 1/4) = pi / 2, so c = m / (pi/2) = 4 / pi for m = 2
        let g = make_grid(4096, GridKind::Uniform).unwrap();
        let f = RadialField::from_fn(g, FieldKind::Density, |r| 1.0 - r * r).unwrap();
        let p = project_density(&f, 2.0).unwrap();
        let c = p.values()[0] / f.values()[0];
        assert!((c - 4.0 / PI).abs() < 1e-6, "c = {c}");
    }

    #[test]
    fn flow_config_cases() {
        assert_eq!(FlowConfig::new(1.0, 1.0, 0.0, 1e-3, 1.0, true).unwrap().case().unwrap(), FlowCase::BothDensities);
        assert_eq!(FlowConfig::new(1.0, 0.0, 0.0, 1e-3, 1.0, true).unwrap().case().unwrap(), FlowCase::SlavedSecond);
        assert_eq!(FlowConfig::new(0.0, 0.0, 1.0, 1e-3, 1.0, true).unwrap().case().unwrap(), FlowCase::Exponential);
        assert!(FlowConfig::new(1.0, 1.0, 1.0, 1e-3, 1.0, true).is_err());
    }

    proptest! {
        #[test]
        fn grid_nodes_strictly_increasing(n in 8usize..2000, graded in any::<bool>()) {
            let kind = if graded { GridKind::Graded } else { GridKind::Uniform };
            let g = make_grid(n, kind).unwrap();
            let r = g.nodes();
            prop_assert_eq!(r[0], 0.0);
            prop_assert_eq!(r[n], 1.0);
            prop_assert!(r.windows(2).all(|w| w[1] > w[0]));
        }

        #[test]
        fn projection_is_idempotent(seed in 0u64..1000, m in 0.1f64..50.0) {
            let g = make_grid(64, GridKind::Uniform).unwrap();
            let f = RadialField::from_fn(g, FieldKind::Density, |r| {
                1.0 + ((seed as f64) * 0.37 + 5.0 * r).sin().abs()
            }).unwrap();
            let p = project_density(&f, m).unwrap();
            let q = project_density(&p, m).unwrap();
            for (a, b) in p.values().iter().zip(q.values()) {
                prop_assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
            }
        }

        #[test]
        fn validation_matches_invariants(
            a in -1.0f64..3.0, b in -1.0f64..3.0, c in -1.0f64..3.0,
            m1 in -1.0f64..10.0, m2 in -1.0f64..10.0,
        ) {
            let ok = a >= 0.0 && b >= 0.0 && c >= 0.0 && m1 > 0.0 && m2 >= 0.0;
            prop_assert_eq!(Params::new(a, b, c, -1.0, m1, m2).is_ok(), ok);
        }
    }
}
