//! Functionals of a distribution: norms, moments, entropy and its production,
//! envelope fits, distances and Povzner constants.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{norm2, DistributionField, Vec3, VelocityGrid};
use crate::kernel::{post_collision_sigma, CollisionKernel, SphereQuadrature};
use crate::operator::CollisionOperator;

/// Discrete `‖f‖_{p,s}`; `p = ∞` is passed as `f64::INFINITY`.
pub fn weighted_norm(f: &DistributionField, p: f64, s: f64) -> Result<f64> {
    weighted_norm_values(f.grid(), f.values(), p, s)
}

pub(crate) fn weighted_norm_values(grid: &VelocityGrid, vals: &[f64], p: f64, s: f64) -> Result<f64> {
    let w = |v: Vec3| (1.0 + norm2(v)).powf(0.5 * s);
    if p == 1.0 {
        let sum: f64 = grid.nodes().map(|(i, v)| vals[i].abs() * w(v)).sum();
        Ok(sum * grid.cell_volume())
    } else if p == 2.0 {
        let sq: f64 = grid.nodes().map(|(i, v)| (vals[i].abs() * w(v)).powi(2)).sum();
        Ok((sq * grid.cell_volume()).sqrt())
    } else if p == f64::INFINITY {
        Ok(grid
            .nodes()
            .map(|(i, v)| vals[i].abs() * w(v))
            .fold(0.0, f64::max))
    } else {
        Err(Error::UnsupportedNorm(p))
    }
}

/// `m_s = ∫ f |v|^s`.
pub fn moment(f: &DistributionField, s: f64) -> f64 {
    if s == 0.0 {
        f.integrate(|_| 1.0)
    } else {
        f.integrate(|v| norm2(v).powf(0.5 * s))
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `S_{s,p} = Σ_{k=1}^{⌊(p+1)/2⌋} C(p,k) (m_{sk+γ} m_{s(p-k)} + m_{sk} m_{s(p-k)+γ})`
/// for a moment map `m`.
pub fn ssp_from_moments<M: Fn(f64) -> f64>(m: M, s: f64, p: u32, gamma: f64) -> f64 {
    let kp = (p + 1) / 2;
    (1..=kp)
        .map(|k| {
            let (a, b) = (s * k as f64, s * (p - k) as f64);
            binomial(p, k) * (m(a + gamma) * m(b) + m(a) * m(b + gamma))
        })
        .sum()
}

pub fn moment_combination_ssp(f: &DistributionField, s: f64, p: u32, gamma: f64) -> Result<f64> {
    if p < 2 {
        return Err(Error::InvalidParameter(format!("S_(s,p) needs p >= 2, got {p}")));
    }
    if !(s >= 0.0) {
        return Err(Error::InvalidParameter(format!("s must be nonnegative, got {s}")));
    }
    Ok(ssp_from_moments(|q| moment(f, q), s, p, gamma))
}

/// `∫ f e^{a|v|^s}`; summed in shifted form when the exponent can exceed 500.
pub fn exp_moment(f: &DistributionField, a: f64, s: f64) -> Result<f64> {
    if !(a >= 0.0) || !(s > 0.0 && s <= 2.0) {
        return Err(Error::InvalidParameter(format!(
            "exp_moment needs a >= 0 and s in (0, 2], got a = {a}, s = {s}"
        )));
    }
    let grid = f.grid();
    let expo: Vec<f64> = grid.nodes().map(|(_, v)| a * norm2(v).powf(0.5 * s)).collect();
    let top = expo.iter().copied().fold(0.0, f64::max);
    let vals = f.values();
    if top <= 500.0 {
        let sum: f64 = vals.iter().zip(&expo).map(|(f, e)| f * e.exp()).sum();
        Ok(sum * grid.cell_volume())
    } else {
        let sum: f64 = vals.iter().zip(&expo).map(|(f, e)| f * (e - top).exp()).sum();
        Ok(top.exp() * sum * grid.cell_volume())
    }
}

#[inline]
fn entropy_density(x: f64) -> f64 {
    let a = if x > 0.0 { x * x.ln() } else { 0.0 };
    let b = if x < 1.0 { (1.0 - x) * (1.0 - x).ln() } else { 0.0 };
    -(a + b)
}

/// `S(f) = -∫ [f ln f + (1-f) ln(1-f)]`.
pub fn entropy(f: &DistributionField) -> f64 {
    f.values().iter().map(|&x| entropy_density(x)).sum::<f64>() * f.grid().cell_volume()
}

pub fn entropy_production(
    f: &DistributionField,
    kernel: &CollisionKernel,
    quad: &SphereQuadrature,
) -> Result<crate::operator::Production> {
    CollisionOperator::new(*f.grid(), kernel.clone(), quad.clone()).entropy_production(f)
}

/// `f ≥ C₁ e^{-C₂|v|²}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerEnvelope {
    pub c1: f64,
    pub c2: f64,
    pub certified: bool,
}

/// `f ≤ e^{-a|v|² + c}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperEnvelope {
    pub a: f64,
    pub c: f64,
    pub certified: bool,
}

/// `1 - f ≥ C₁ e^{-C₂|v|^p}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StretchedEnvelope {
    pub c1: f64,
    pub c2: f64,
    pub p: f64,
    pub certified: bool,
}

pub fn stretched_exponent() -> f64 {
    2.0 * 3f64.ln() / 2f64.ln()
}

const FIT_FLOOR: f64 = 1e-30;
const SAFETY: f64 = 1e-12;

#[derive(Clone, Copy, PartialEq)]
enum Extreme {
    Min,
    Max,
}

/// Least-squares line `ln y = α - β x` through per-shell extremes, with
/// `x = |v|^power`.
fn shell_fit(
    grid: &VelocityGrid,
    vals: &[f64],
    power: f64,
    which: Extreme,
    r_max: Option<f64>,
) -> Result<(f64, f64)> {
    let dv = grid.spacing();
    let shells = (grid.radius() * 3f64.sqrt() / dv).ceil() as usize + 1;
    let mut best: Vec<Option<(f64, f64)>> = vec![None; shells];
    for (idx, v) in grid.nodes() {
        let r = norm2(v).sqrt();
        if r_max.is_some_and(|m| r > m) {
            continue;
        }
        let y = vals[idx];
        if !(y > 0.0) {
            continue;
        }
        let slot = &mut best[(r / dv) as usize];
        let replace = match slot {
            None => true,
            Some((_, b)) => match which {
                Extreme::Min => y < *b,
                Extreme::Max => y > *b,
            },
        };
        if replace {
            *slot = Some((r, y));
        }
    }
    let pts: Vec<(f64, f64)> = best
        .into_iter()
        .flatten()
        .filter(|(_, y)| *y > FIT_FLOOR)
        .map(|(r, y)| (r.powf(power), y.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientSupport { usable: pts.len() });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    Ok((my - slope * mx, -slope))
}

fn lower_fit(
    grid: &VelocityGrid,
    vals: &[f64],
    power: f64,
    r_max: Option<f64>,
) -> Result<(f64, f64, bool)> {
    let (_, beta) = shell_fit(grid, vals, power, Extreme::Min, r_max)?;
    let beta = beta.max(0.0);
    let mut log_c1 = f64::INFINITY;
    let mut region_filled = true;
    for (idx, v) in grid.nodes() {
        let r = norm2(v).sqrt();
        if r_max.is_some_and(|m| r > m) {
            continue;
        }
        let y = vals[idx];
        if y > 0.0 {
            log_c1 = log_c1.min(y.ln() + beta * r.powf(power));
        } else if r_max.is_some() {
            region_filled = false;
        }
    }
    let c1 = log_c1.exp() * (1.0 - SAFETY);
    let mut certified = region_filled && c1 > 0.0;
    for (idx, v) in grid.nodes() {
        let r = norm2(v).sqrt();
        if r_max.is_some_and(|m| r > m) || !(vals[idx] > 0.0) {
            continue;
        }
        if vals[idx] < c1 * (-beta * r.powf(power)).exp() {
            certified = false;
        }
    }
    Ok((c1, beta, certified))
}

/// Gaussian lower envelope over the nodes where `f > 0`.
pub fn fit_lower_gaussian(f: &DistributionField) -> Result<LowerEnvelope> {
    let (c1, c2, certified) = lower_fit(f.grid(), f.values(), 2.0, None)?;
    Ok(LowerEnvelope { c1, c2, certified })
}

/// Gaussian lower envelope over the ball `|v| ≤ r_max`; certified only if `f`
/// is positive at every node of the ball.
pub fn fit_lower_gaussian_within(f: &DistributionField, r_max: f64) -> Result<LowerEnvelope> {
    let (c1, c2, certified) = lower_fit(f.grid(), f.values(), 2.0, Some(r_max))?;
    Ok(LowerEnvelope { c1, c2, certified })
}

/// Gaussian upper envelope. With `max_rate = Some(a₀)` the rate is capped at
/// `a₀` before the offset is raised to cover every node.
pub fn fit_upper_gaussian(f: &DistributionField, max_rate: Option<f64>) -> Result<UpperEnvelope> {
    let grid = f.grid();
    let vals = f.values();
    let (_, mut a) = shell_fit(grid, vals, 2.0, Extreme::Max, None)?;
    if let Some(a0) = max_rate {
        a = a.min(a0);
    }
    let mut c = f64::NEG_INFINITY;
    for (idx, v) in grid.nodes() {
        if vals[idx] > 0.0 {
            c = c.max(vals[idx].ln() + a * norm2(v));
        }
    }
    let c = c + SAFETY * c.abs().max(1.0);
    let certified = grid
        .nodes()
        .all(|(idx, v)| vals[idx] <= (-a * norm2(v) + c).exp());
    Ok(UpperEnvelope { a, c, certified })
}

/// Stretched-exponential lower envelope of `1 - f` with exponent `2 ln3/ln2`.
pub fn fit_upper_stretched(one_minus_f: &DistributionField) -> Result<StretchedEnvelope> {
    let p = stretched_exponent();
    let (c1, c2, certified) = lower_fit(one_minus_f.grid(), one_minus_f.values(), p, None)?;
    Ok(StretchedEnvelope {
        c1,
        c2,
        p,
        certified,
    })
}

/// Discrete `‖f - g‖_{1,2}`.
pub fn l12_distance(f: &DistributionField, g: &DistributionField) -> Result<f64> {
    if !f.grid().same_lattice(g.grid()) {
        return Err(Error::GridMismatch("distance between fields on different grids".into()));
    }
    let diff: Vec<f64> = f.values().iter().zip(g.values()).map(|(a, b)| a - b).collect();
    weighted_norm_values(f.grid(), &diff, 1.0, 2.0)
}

/// `Φ(r) = r + r^{1/3} + r|ln r| + ‖f₀ 1_{|v| ≥ r^{-1/3}}‖_{1,2}`, `Φ(0) = 0`.
pub fn phi_stability(r: f64, f0: &DistributionField) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::InvalidParameter(format!("r must be nonnegative, got {r}")));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let cut = r.powf(-1.0 / 3.0);
    let tail: Vec<f64> = f0
        .grid()
        .nodes()
        .map(|(i, v)| if norm2(v).sqrt() >= cut { f0.values()[i] } else { 0.0 })
        .collect();
    let tail = weighted_norm_values(f0.grid(), &tail, 1.0, 2.0)?;
    Ok(r + r.cbrt() + r * r.ln().abs() + tail)
}

/// Ratio `∫(|v'|^{2p} + |v'*|^{2p}) b dσ / (C_b (|v|² + |v*|²)^p)` for one pair.
pub fn povzner_ratio(
    kernel: &CollisionKernel,
    quad: &SphereQuadrature,
    v: Vec3,
    vs: Vec3,
    p: f64,
) -> f64 {
    let g = crate::kernel::direction(crate::grid::sub(v, vs));
    let mut num = 0.0;
    for (s, w) in quad.nodes().iter().zip(quad.weights()) {
        let (a, b) = post_collision_sigma(v, vs, *s);
        let cos = g[0] * s[0] + g[1] * s[1] + g[2] * s[2];
        num += w * kernel.b(cos) * (norm2(a).powf(p) + norm2(b).powf(p));
    }
    num / (kernel.c_b() * (norm2(v) + norm2(vs)).powf(p))
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut x = 0.0;
    while i > 0 {
        x += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    x
}

fn halton_direction(i: u64, b1: u64, b2: u64) -> Vec3 {
    let z = 2.0 * radical_inverse(i, b1) - 1.0;
    let phi = 2.0 * PI * radical_inverse(i, b2);
    let s = (1.0 - z * z).max(0.0).sqrt();
    [s * phi.cos(), s * phi.sin(), z]
}

/// Sampled estimate of `ϖ_p`: the largest pair ratio over a Halton set of
/// pairs `v = cos α u₁`, `v* = sin α u₂`. The ratio is scale invariant, so
/// directions and the magnitude split `α` cover all pairs.
pub fn povzner_constant(kernel: &CollisionKernel, p: f64, sample_count: usize) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("p must be at least 1, got {p}")));
    }
    let quad = SphereQuadrature::new(16, 32)?;
    let mut best: f64 = 0.0;
    for i in 0..sample_count as u64 {
        let alpha = 0.5 * PI * radical_inverse(i, 2);
        let u1 = halton_direction(i + 1, 3, 5);
        let u2 = halton_direction(i + 1, 7, 11);
        let v = u1.map(|x| x * alpha.cos());
        let vs = u2.map(|x| x * alpha.sin());
        best = best.max(povzner_ratio(kernel, &quad, v, vs, p));
    }
    Ok(best)
}

/// One row of the diagnostics time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub rho: f64,
    pub u: Vec3,
    pub temperature: f64,
    pub momentum: Vec3,
    pub energy: f64,
    /// `(s, m_s)` pairs.
    pub moments: Vec<(f64, f64)>,
    pub entropy: f64,
    pub production: Option<f64>,
    pub min_f: f64,
    pub max_f: f64,
    pub lower: Option<(f64, f64)>,
    pub upper: Option<(f64, f64)>,
    pub boundary_mass: f64,
    pub flags: Vec<String>,
}

pub const FLAG_GAMMA_CAP: &str = "gamma_cap";
pub const FLAG_REPAIR_FAILED: &str = "repair_failed";

impl DiagnosticsRecord {
    pub fn compute(
        f: &DistributionField,
        time: f64,
        moment_orders: &[f64],
        production: Option<&crate::operator::Production>,
    ) -> Self {
        let rho = f.integrate(|_| 1.0);
        let momentum = [
            f.integrate(|v| v[0]),
            f.integrate(|v| v[1]),
            f.integrate(|v| v[2]),
        ];
        let energy = f.integrate(norm2);
        let (u, temperature) = if rho > 0.0 {
            let u = momentum.map(|m| m / rho);
            let t = (energy / rho - norm2(u)) / 3.0;
            (u, t)
        } else {
            ([0.0; 3], 0.0)
        };
        let mut flags = Vec::new();
        if production.is_some_and(|p| p.saturated()) {
            flags.push(FLAG_GAMMA_CAP.to_string());
        }
        let lower = fit_lower_gaussian(f).ok().map(|e| (e.c1, e.c2));
        let upper = fit_upper_gaussian(f, None).ok().map(|e| (e.a, e.c));
        Self {
            time,
            rho,
            u,
            temperature,
            momentum,
            energy,
            moments: moment_orders.iter().map(|&s| (s, moment(f, s))).collect(),
            entropy: entropy(f),
            production: production.map(|p| p.total),
            min_f: f.min_value(),
            max_f: f.max_value(),
            lower,
            upper,
            boundary_mass: f.boundary_mass(),
            flags,
        }
    }

    pub fn moment(&self, s: f64) -> Option<f64> {
        self.moments.iter().find(|(q, _)| *q == s).map(|(_, m)| *m)
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }
}

pub const CSV_HEADER: &str =
    "t,rho,ux,uy,uz,T,m2,m4,m6,S,D,min_f,max_f,C1_lo,C2_lo,a_up,c_up,boundary_mass,flags";

/// Writes the records as CSV; missing values are left empty.
pub fn write_csv<W: Write>(mut out: W, records: &[DiagnosticsRecord]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    let opt = |x: Option<f64>| x.map(|v| format!("{v:.12e}")).unwrap_or_default();
    for r in records {
        writeln!(
            out,
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},{},{},{:.12e},{},{:.12e},{:.12e},{},{},{},{},{:.12e},{}",
            r.time,
            r.rho,
            r.u[0],
            r.u[1],
            r.u[2],
            r.temperature,
            opt(r.moment(2.0)),
            opt(r.moment(4.0)),
            opt(r.moment(6.0)),
            r.entropy,
            opt(r.production),
            r.min_f,
            r.max_f,
            opt(r.lower.map(|x| x.0)),
            opt(r.lower.map(|x| x.1)),
            opt(r.upper.map(|x| x.0)),
            opt(r.upper.map(|x| x.1)),
            r.boundary_mass,
            r.flags.join(";"),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6.0);
        assert_eq!(binomial(5, 1), 5.0);
        assert_eq!(binomial(3, 0), 1.0);
    }

    #[test]
    fn ssp_p2_is_single_term() {
        let m = |q: f64| 1.0 + q * q;
        let (s, g) = (1.5, 1.0);
        let expected = 2.0 * (m(s + g) * m(s) + m(s) * m(s + g));
        assert_relative_eq!(ssp_from_moments(m, s, 2, g), expected);
    }

    #[test]
    fn entropy_density_limits() {
        assert_eq!(entropy_density(0.0), 0.0);
        assert_eq!(entropy_density(1.0), 0.0);
        assert_relative_eq!(entropy_density(0.5), std::f64::consts::LN_2);
    }

    #[test]
    fn radical_inverse_base2() {
        assert_eq!(radical_inverse(0, 2), 0.0);
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
    }
}
