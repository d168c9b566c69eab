#![allow(dead_code)]

use bfdk_core::grid::{norm, sub, DistributionField};
use bfdk_core::kernel::{kinetic_factor, post_collision_sigma, CollisionKernel, SphereQuadrature};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Brute-force `Q_FD`: every node `v`, every node `v*`, every sphere node,
/// physical coordinates throughout.
pub fn naive_qfd(f: &DistributionField, kernel: &CollisionKernel, quad: &SphereQuadrature) -> Vec<f64> {
    naive(f, kernel, quad, |fp, fps, fv, fs| {
        fp * fps * (1.0 - fv) * (1.0 - fs) - fv * fs * (1.0 - fp) * (1.0 - fps)
    })
}

/// Brute-force `Q₁(f, f, 1-f)`.
pub fn naive_gain(f: &DistributionField, kernel: &CollisionKernel, quad: &SphereQuadrature) -> Vec<f64> {
    naive(f, kernel, quad, |fp, fps, _, fs| fp * fps * (1.0 - fs))
}

fn naive<F: Fn(f64, f64, f64, f64) -> f64>(
    f: &DistributionField,
    kernel: &CollisionKernel,
    quad: &SphereQuadrature,
    integrand: F,
) -> Vec<f64> {
    let grid = *f.grid();
    let vals = f.values();
    let mut out = vec![0.0; grid.len()];
    for (i, v) in grid.nodes() {
        let mut acc = 0.0;
        for (j, vs) in grid.nodes() {
            let g = sub(v, vs);
            let gn = norm(g);
            let ghat = if gn == 0.0 { [0.0, 0.0, 1.0] } else { g.map(|x| x / gn) };
            let kin = kinetic_factor(kernel, v, vs);
            for (s, w) in quad.nodes().iter().zip(quad.weights()) {
                let (a, b) = post_collision_sigma(v, vs, *s);
                let cos = ghat[0] * s[0] + ghat[1] * s[1] + ghat[2] * s[2];
                acc += kin * kernel.b(cos) * w * integrand(f.sample(a), f.sample(b), vals[i], vals[j]);
            }
        }
        out[i] = acc * grid.cell_volume();
    }
    out
}

pub fn random_field(grid: bfdk_core::VelocityGrid, seed: u64) -> DistributionField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals = (0..grid.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
    DistributionField::from_values(grid, vals).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `¼ Σ B Δ (φ + φ* - φ' - φ'*)` with `Δ` the Fermi–Dirac collision
/// integrand, by brute force over node pairs, and the matching sum of
/// `¼ B |Δ| (|φ| + |φ*| + |φ'| + |φ'*|)`.
pub fn symmetrized_weak_form<P: Fn(bfdk_core::Vec3) -> f64>(
    f: &DistributionField,
    kernel: &CollisionKernel,
    quad: &SphereQuadrature,
    phi: P,
) -> (f64, f64) {
    let grid = *f.grid();
    let vals = f.values();
    let (mut total, mut scale) = (0.0, 0.0);
    for (i, v) in grid.nodes() {
        for (j, vs) in grid.nodes() {
            let g = sub(v, vs);
            let gn = norm(g);
            let ghat = if gn == 0.0 { [0.0, 0.0, 1.0] } else { g.map(|x| x / gn) };
            let kin = kinetic_factor(kernel, v, vs);
            for (s, w) in quad.nodes().iter().zip(quad.weights()) {
                let (a, b) = post_collision_sigma(v, vs, *s);
                let cos = ghat[0] * s[0] + ghat[1] * s[1] + ghat[2] * s[2];
                let (fa, fb) = (f.sample(a), f.sample(b));
                let delta = fa * fb * (1.0 - vals[i]) * (1.0 - vals[j]) - vals[i] * vals[j] * (1.0 - fa) * (1.0 - fb);
                let weight = kin * kernel.b(cos) * w;
                let dphi = phi(v) + phi(vs) - phi(a) - phi(b);
                total += 0.25 * weight * delta * dphi;
                let size = phi(v).abs() + phi(vs).abs() + phi(a).abs() + phi(b).abs();
                scale += 0.25 * weight * delta.abs() * size;
            }
        }
    }
    let dv2 = grid.cell_volume() * grid.cell_volume();
    (total * dv2, scale * dv2)
}
