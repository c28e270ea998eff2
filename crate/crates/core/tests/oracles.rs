use std::f64::consts::PI;

use chemotaxis_core::liouville::{minimize_w, solve_pair, SolveOptions};
use chemotaxis_core::oracle::{integrate_veq_from, LemwParams};
use chemotaxis_core::phase::{classify, cross_validate, Verdict};
use chemotaxis_core::radial::{inv_laplacian, log_partition};
use chemotaxis_core::{make_grid, project_density, FieldKind, GridKind, Params, RadialField};

// Outside the support of rho the w-equation reduces to the annulus ODE.
#[test]
fn minimize_w_matches_shooting_outside_support() {
    let g = make_grid(4096, GridKind::Uniform).unwrap();
    let (beta, mass, m2, gamma) = (1.0, 10.0 * PI, 2.0 * PI, 1.0);
    let p = Params::new(1.0, beta, gamma, -1.0, mass, m2).unwrap();
    let bump = RadialField::from_fn(g.clone(), FieldKind::Density, |r| if r < 0.05 { 1.0 } else { 0.0 }).unwrap();
    let rho = project_density(&bump, mass).unwrap();
    let w = minimize_w(&rho, &p, &g, &SolveOptions::default()).unwrap();
    let u = inv_laplacian(&rho);
    let ln_z = log_partition(&g, &[(-gamma, &w), (beta, &u)]).unwrap();
    let lambda_ln = m2.ln() - ln_z;
    let lp = LemwParams::new(gamma, beta * mass, m2, 1e-6).unwrap();
    let prof = integrate_veq_from(&lp, -lambda_ln / gamma, 0.1, 20_000).unwrap();
    let mut worst = 0.0f64;
    for (r, wv) in g.nodes().iter().zip(w.values()) {
        if *r >= 0.1 {
            worst = worst.max((wv - lambda_ln / gamma - prof.eval(*r)).abs());
        }
    }
    assert!(worst < 1e-4, "{worst}");
}

#[test]
fn bounded_verdicts_have_solutions() {
    let base = Params::new(1.0, 2.0, 0.0, -1.0, 1.0, 1.0).unwrap();
    let pts = [(5.0, 1.0), (15.0, 3.0), (30.0, 1.0)];
    for c in cross_validate(&base, &pts, 1024).unwrap() {
        assert!(c.confirmed, "{c:?}");
    }
}

#[test]
fn conflict_free_existence_has_solution() {
    let p = Params::new(1.0, 0.4, 1.0, 1.0, 10.0, 5.0).unwrap();
    assert_eq!(classify(&p).unwrap().verdict, Verdict::Exists);
    let g = make_grid(1024, GridKind::Uniform).unwrap();
    let s = solve_pair(&p, &g, &SolveOptions { max_iter: 2000, ..Default::default() }).unwrap();
    assert!(s.residual <= 1e-10);
}
