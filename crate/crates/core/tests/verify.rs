use bfdk_core::config::SimulationConfig;
use bfdk_core::integrator::run_simulation;
use bfdk_core::verify::{check_conservation, check_h_theorem, run_suite};

fn tiny() -> SimulationConfig {
    let mut c = SimulationConfig::new(7, 2.5);
    c.kernel.n_theta = 2;
    c.kernel.n_phi = 4;
    c.time.t_end = 0.2;
    c.output.snapshot_every = 0.1;
    c
}

#[test]
fn reports_are_reproducible() {
    let c = tiny();
    for suite in ["conservation", "moment_ode_bound", "upper_envelopes"] {
        let a = run_suite(suite, &c).unwrap();
        let b = run_suite(suite, &c).unwrap();
        assert_eq!(a.csv_rows(), b.csv_rows(), "{suite}");
        assert_eq!(a.fingerprint, c.fingerprint());
    }
}

#[test]
fn disabled_projection_only_informs() {
    let mut c = tiny();
    c.time.projection = false;
    let rep = check_conservation(&run_simulation(&c).unwrap());
    let check = rep.check("invariant_drift").unwrap();
    assert!(check.informative);
    assert!(rep.passed());
}

#[test]
fn equilibrium_run_keeps_entropy() {
    let mut c = tiny();
    c.grid.n = 9;
    c.grid.radius = 4.0;
    c.init.kind = bfdk_core::config::InitKind::Equilibrium;
    c.init.a = Some(1.0);
    c.init.c = Some(0.0);
    c.time.dt = Some(1e-4);
    c.time.t_end = 1e-3;
    let traj = run_simulation(&c).unwrap();
    let s0 = traj.records[0].entropy;
    let worst = traj.records.iter().map(|r| (r.entropy - s0).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-3 * s0, "{worst}");
    assert!(check_h_theorem(&traj).check("entropy_monotone").is_some());
}
