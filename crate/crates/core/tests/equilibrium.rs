use std::f64::consts::PI;

use bfdk_core::diagnostics::entropy;
use bfdk_core::equilibrium::{fd_equilibrium, macro_moments, saturated_state, solve_fd_params};
use bfdk_core::grid::{norm2, sub};
use bfdk_core::{DistributionField, Error, VelocityGrid};

#[test]
fn unit_ball_moments() {
    let grid = VelocityGrid::new(61, 1.5).unwrap();
    let ball = |u: [f64; 3]| DistributionField::from_fn(grid, move |v| if norm2(sub(v, u)) <= 1.0 { 1.0 } else { 0.0 }).unwrap();
    let m = macro_moments(&ball([0.0; 3])).unwrap();
    assert!((m.rho - 4.0 * PI / 3.0).abs() < 0.01 * m.rho, "{}", m.rho);
    assert!(m.u.iter().all(|x| x.abs() < 1e-3), "{:?}", m.u);
    assert!((m.temperature - 0.2).abs() < 0.01, "{}", m.temperature);

    let u0 = [0.2, -0.1, 0.15];
    let s = macro_moments(&ball(u0)).unwrap();
    for k in 0..3 {
        assert!((s.u[k] - u0[k]).abs() < 0.01, "{:?}", s.u);
    }
    assert!((s.temperature - m.temperature).abs() < 0.01);

    assert!(matches!(macro_moments(&DistributionField::zeros(grid)), Err(Error::VacuumState(_))));
}

#[test]
fn classical_limit_is_maxwellian() {
    let (rho, t) = (1e-5, 1.0);
    let p = solve_fd_params(rho, t, [0.0; 3]).unwrap();
    assert!(p.c >= 10.0, "{}", p.c);
    let rho_m = (-p.c).exp() * (PI / p.a).powf(1.5);
    assert!((rho_m - rho).abs() < 0.01 * rho);
    assert!((1.0 / (2.0 * p.a) - t).abs() < 0.01 * t);
}

#[test]
fn grid_round_trip_on_32_cubed() {
    let grid = VelocityGrid::new(32, 7.0).unwrap();
    for (rho, t, u) in [(1.0, 1.0, [0.0; 3]), (2.0, 0.9, [0.3, 0.0, -0.2])] {
        let p = solve_fd_params(rho, t, u).unwrap();
        let m = macro_moments(&fd_equilibrium(&grid, &p).unwrap()).unwrap();
        assert!((m.rho - rho).abs() < 1e-4 * rho, "{} vs {rho}", m.rho);
        assert!((m.temperature - t).abs() < 1e-4 * t, "{} vs {t}", m.temperature);
        for k in 0..3 {
            assert!((m.u[k] - u[k]).abs() < 1e-4);
        }
    }
}

#[test]
fn equilibrium_decreases_radially() {
    let grid = VelocityGrid::new(15, 3.0).unwrap();
    let p = solve_fd_params(1.0, 0.8, [0.0; 3]).unwrap();
    let f = fd_equilibrium(&grid, &p).unwrap();
    let mut pairs: Vec<(f64, f64)> = grid.nodes().map(|(i, v)| (norm2(v), f.values()[i])).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    assert!(pairs.windows(2).all(|w| w[1].1 <= w[0].1));
    assert!(f.min_value() > 0.0 && f.max_value() < 1.0);
}

#[test]
fn saturated_entropy_vanishes_under_refinement() {
    let rho = 4.0 * PI / 3.0;
    let s: Vec<f64> = [17, 33, 65]
        .iter()
        .map(|&n| entropy(&saturated_state(&VelocityGrid::new(n, 1.5).unwrap(), rho, [0.0; 3]).unwrap().field))
        .collect();
    assert!(s[1] < s[0] && s[2] < s[1], "{s:?}");
    assert!(s[2] < 0.6 * s[0], "{s:?}");
}
