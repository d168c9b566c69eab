mod common;

use bfdk_core::equilibrium::{fd_equilibrium, saturated_state, FermiDiracParams};
use bfdk_core::grid::{norm2, DistributionField, VelocityGrid};
use bfdk_core::kernel::{AngularLaw, CollisionKernel, SphereQuadrature};
use bfdk_core::operator::{conservative_projection, invariant_defects};
use bfdk_core::{CollisionOperator, Exec};
use common::{max_abs_diff, naive_gain, naive_qfd, random_field, symmetrized_weak_form};

fn op(n: usize, radius: f64, kernel: CollisionKernel, t: usize, p: usize) -> CollisionOperator {
    CollisionOperator::new(
        VelocityGrid::new(n, radius).unwrap(),
        kernel,
        SphereQuadrature::new(t, p).unwrap(),
    )
}

#[test]
fn matches_naive_oracle_hard_sphere() {
    let o = op(6, 2.0, CollisionKernel::hard_sphere(), 4, 8);
    let f = random_field(*o.grid(), 7);
    let fast = o.rates(&f).unwrap();
    let slow = naive_qfd(&f, o.kernel(), o.quadrature());
    assert!(max_abs_diff(&fast.q_fd, &slow) < 1e-12);
    let gain = naive_gain(&f, o.kernel(), o.quadrature());
    assert!(max_abs_diff(&fast.gain, &gain) < 1e-12);
}

#[test]
fn matches_naive_oracle_anisotropic_capped_gamma_zero() {
    let law = AngularLaw::table(vec![-1.0, -0.3, 0.3, 1.0], vec![0.3, 0.1, 0.1, 0.3]).unwrap();
    let k = CollisionKernel::new(0.0, law).unwrap();
    let o = op(5, 1.5, k, 3, 6);
    let f = random_field(*o.grid(), 11);
    let fast = o.qfd(&f).unwrap();
    let slow = naive_qfd(&f, o.kernel(), o.quadrature());
    assert!(max_abs_diff(&fast, &slow) < 1e-12);

    let k = CollisionKernel::new(1.5, AngularLaw::Constant(0.2))
        .unwrap()
        .with_speed_cap(Some(1.0))
        .unwrap();
    let o = op(5, 1.5, k, 2, 4);
    let fast = o.qfd(&f).unwrap();
    let slow = naive_qfd(&f, o.kernel(), o.quadrature());
    assert!(max_abs_diff(&fast, &slow) < 1e-12);
}

#[test]
fn sequential_and_parallel_agree_bitwise() {
    let o = op(7, 2.0, CollisionKernel::hard_sphere(), 4, 8);
    let f = random_field(*o.grid(), 3);
    let a = o.clone().with_exec(Exec::Sequential).rates(&f).unwrap();
    let b = o.with_exec(Exec::Parallel).rates(&f).unwrap();
    assert_eq!(a, b);
}

#[test]
fn zero_field_gives_zero() {
    let o = op(6, 2.0, CollisionKernel::hard_sphere(), 4, 8);
    let f = DistributionField::zeros(*o.grid());
    let r = o.rates(&f).unwrap();
    assert!(r.q_fd.iter().chain(&r.gain).chain(&r.total_freq).all(|x| *x == 0.0));
    let (g, l) = o.gain_loss_split(&f).unwrap();
    assert!(g.iter().chain(&l).all(|x| *x == 0.0));
}

#[test]
fn saturated_box_blocks_everything() {
    let o = op(6, 2.0, CollisionKernel::hard_sphere(), 4, 8);
    let one = DistributionField::constant(*o.grid(), 1.0);
    let zero = DistributionField::zeros(*o.grid());
    let a = o.q1(&one, &one, &zero).unwrap();
    let b = o.q1(&zero, &zero, &one).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| x + y == 0.0));
}

#[test]
fn decomposition_identities() {
    let o = op(6, 2.0, CollisionKernel::hard_sphere(), 4, 8);
    let f = random_field(*o.grid(), 5);
    let r = o.rates(&f).unwrap();
    let one_minus = f.complement();
    let g1 = o.q1(&f, &f, &one_minus).unwrap();
    let g2 = o.q1(&one_minus, &one_minus, &f).unwrap();
    assert!(max_abs_diff(&g1, &r.gain) < 1e-12);
    let qbar: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a + b).collect();
    assert!(max_abs_diff(&qbar, &r.total_freq) < 1e-12);
    let (plus, loss) = o.gain_loss_split(&f).unwrap();
    let rebuilt: Vec<f64> = plus
        .iter()
        .zip(&loss)
        .zip(f.values())
        .map(|((p, l), fv)| p - fv * l)
        .collect();
    assert!(max_abs_diff(&rebuilt, &r.q_fd) < 1e-12);
    for (g, t) in r.gain.iter().zip(&r.total_freq) {
        assert!(*g >= 0.0 && t >= g);
    }
    // Q_FD⁺ ≤ Q_c⁺
    let qc = o.qc_gain(&f, &f).unwrap();
    assert!(plus.iter().zip(&qc).all(|(p, c)| *p <= c + 1e-15));
}

#[test]
fn sign_symmetry_under_complement() {
    let o = op(6, 2.0, CollisionKernel::hard_sphere(), 4, 8);
    let f = random_field(*o.grid(), 9);
    let a = o.qfd(&f).unwrap();
    let b = o.qfd(&f.complement()).unwrap();
    let neg: Vec<f64> = a.iter().map(|x| -x).collect();
    assert!(max_abs_diff(&neg, &b) < 1e-12);
}

#[test]
fn classical_weak_form_defect_shrinks_with_resolution() {
    let defect = |n: usize| {
        let o = op(n, 4.0, CollisionKernel::hard_sphere(), 6, 12);
        let f = DistributionField::from_fn(*o.grid(), |v| 0.5 * (-norm2(v)).exp()).unwrap();
        let plus = o.qc_gain(&f, &f).unwrap();
        let minus = o.qc_loss(&f, &f).unwrap();
        let q: Vec<f64> = plus.iter().zip(&minus).map(|(a, b)| a - b).collect();
        let scale: f64 = minus.iter().sum::<f64>() * o.grid().cell_volume();
        invariant_defects(&q, o.grid())[0].abs() / scale
    };
    let (a, b) = (defect(8), defect(16));
    assert!(b < 0.5 * a, "{a} -> {b}");
}

#[test]
fn equilibrium_residual_shrinks_with_resolution() {
    let p = FermiDiracParams { a: 1.0, c: 0.0, u: [0.0; 3] };
    let res = |n: usize| {
        let o = op(n, 4.0, CollisionKernel::hard_sphere(), 4, 8);
        let f = fd_equilibrium(o.grid(), &p).unwrap();
        let q = o.qfd(&f).unwrap();
        o.grid()
            .nodes()
            .filter(|(_, v)| norm2(*v) < 4.0)
            .map(|(i, _)| q[i].abs())
            .fold(0.0, f64::max)
    };
    let (a, b, c) = (res(8), res(12), res(16));
    assert!(b < a && c < b, "{a} -> {b} -> {c}");
}

#[test]
fn equilibrium_production_vanishes_under_refinement() {
    let p = FermiDiracParams { a: 1.0, c: -0.5, u: [0.0; 3] };
    let d = |n: usize| {
        let o = op(n, 4.0, CollisionKernel::hard_sphere(), 2, 8);
        let f = fd_equilibrium(o.grid(), &p).unwrap();
        let rates = o.rates(&f).unwrap();
        let scale: f64 = rates.total_freq.iter().zip(f.values()).map(|(l, v)| l * v).sum::<f64>() * o.grid().cell_volume();
        o.entropy_production(&f).unwrap().total / scale
    };
    let (a, b, c) = (d(8), d(12), d(16));
    assert!(a >= 0.0 && b < a && c < b, "{a} -> {b} -> {c}");
}

#[test]
fn saturated_ball_is_nearly_stationary_inside() {
    let o = op(13, 2.0, CollisionKernel::hard_sphere(), 4, 8);
    let s = saturated_state(o.grid(), 4.0 * std::f64::consts::PI / 3.0, [0.0; 3]).unwrap();
    let q = o.qfd(&s.field).unwrap();
    let r = o.rates(&s.field).unwrap();
    for (i, v) in o.grid().nodes() {
        if norm2(v) < 0.25 {
            let rel = q[i].abs() / r.total_freq[i];
            assert!(rel < 0.05, "{} vs {}", q[i], r.total_freq[i]);
        }
    }
}

#[test]
fn projection_random_field() {
    let grid = VelocityGrid::new(8, 3.0).unwrap();
    let f = random_field(grid, 21);
    let q: Vec<f64> = f.values().iter().map(|x| x - 0.5).collect();
    let p = conservative_projection(&q, &grid).unwrap();
    for d in invariant_defects(&p, &grid) {
        assert!(d.abs() < 1e-12);
    }
}

#[test]
fn weak_form_matches_symmetrized_sum() {
    let phi = |v: [f64; 3]| (0.7 * v[0]).cos() + 0.3 * (0.5 * v[1] * v[2]).sin();
    let gap = |n: usize| {
        let o = op(n, 3.0, CollisionKernel::hard_sphere(), 2, 8);
        let f = DistributionField::from_fn(*o.grid(), |v| {
            0.6 * (-norm2([v[0] - 0.5, v[1], v[2]])).exp() + 0.3 * (-2.0 * norm2([v[0] + 0.7, v[1] - 0.2, v[2]])).exp()
        })
        .unwrap();
        let q = o.qfd(&f).unwrap();
        let direct = o.grid().integrate_values(&q, phi);
        let (sym, scale) = symmetrized_weak_form(&f, o.kernel(), o.quadrature(), phi);
        (direct - sym).abs() / scale
    };
    let (a, b) = (gap(8), gap(12));
    assert!(a < 0.2 && b < 0.5 * a, "{a} -> {b}");
}
