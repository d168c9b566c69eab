//! Macroscopic moments, Fermi–Dirac equilibria and saturated states.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{norm2, sub, DistributionField, Vec3, VelocityGrid};
use crate::kernel::gauss_legendre;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroscopicState {
    pub rho: f64,
    pub u: Vec3,
    pub temperature: f64,
}

/// Parameters of `1/(e^{a|v-u|² + c} + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FermiDiracParams {
    pub a: f64,
    pub c: f64,
    pub u: Vec3,
}

pub const SATURATION_MARGIN: f64 = 1.02;

pub fn macro_moments(f: &DistributionField) -> Result<MacroscopicState> {
    let rho = f.integrate(|_| 1.0);
    if !(rho > 0.0) {
        return Err(Error::VacuumState(rho));
    }
    let u = [
        f.integrate(|v| v[0]) / rho,
        f.integrate(|v| v[1]) / rho,
        f.integrate(|v| v[2]) / rho,
    ];
    let temperature = f.integrate(|v| norm2(sub(v, u))) / (3.0 * rho);
    Ok(MacroscopicState { rho, u, temperature })
}

/// `1/(e^x + 1)` without overflow.
#[inline]
pub fn fermi(x: f64) -> f64 {
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (x.exp() + 1.0)
    }
}

pub fn fd_equilibrium(grid: &VelocityGrid, params: &FermiDiracParams) -> Result<DistributionField> {
    if !(params.a > 0.0 && params.a.is_finite() && params.c.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "equilibrium needs a > 0 and finite c, got a = {}, c = {}",
            params.a, params.c
        )));
    }
    DistributionField::from_fn(*grid, |v| fermi(params.a * norm2(sub(v, params.u)) + params.c))
}

/// Fermi radius `r_F = (3ρ/4π)^{1/3}`.
pub fn fermi_radius(rho: f64) -> f64 {
    (3.0 * rho / (4.0 * PI)).cbrt()
}

/// Fermi temperature `T_F = r_F²/2`.
pub fn fermi_temperature(rho: f64) -> f64 {
    0.5 * fermi_radius(rho).powi(2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaturatedState {
    pub field: DistributionField,
    pub t_f: f64,
    pub r_f: f64,
}

/// Indicator of the Fermi ball, `1/2` on nodes within `Δv/2` of its shell.
pub fn saturated_state(grid: &VelocityGrid, rho: f64, u: Vec3) -> Result<SaturatedState> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
    }
    let r_f = fermi_radius(rho);
    let half = 0.5 * grid.spacing();
    let field = DistributionField::from_fn(*grid, |v| {
        let r = norm2(sub(v, u)).sqrt();
        if (r - r_f).abs() <= half {
            0.5
        } else if r < r_f {
            1.0
        } else {
            0.0
        }
    })?;
    Ok(SaturatedState {
        field,
        t_f: fermi_temperature(rho),
        r_f,
    })
}

/// `ln J_k(c)` with `I_k(c) = 4π∫ r^{k+2}/(e^{r²+c}+1) dr = e^{-max(c,0)} J_k(c)`.
fn log_radial(c: f64, k: i32) -> f64 {
    let shift = c.max(0.0);
    let edge = (-c).max(0.0).sqrt();
    let r_max = (edge + 8.0).max(10.0);
    let (xs, ws) = gauss_legendre(8);
    let width = 0.05;
    let panels = (r_max / width).ceil() as usize;
    let h = r_max / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for (x, w) in xs.iter().zip(&ws) {
            let r = mid + 0.5 * h * x;
            let occ = if shift > 0.0 {
                // e^{c}·fermi(r² + c) = 1/(e^{r²} + e^{-c})
                1.0 / ((r * r).exp() + (-c).exp())
            } else {
                fermi(r * r + c)
            };
            sum += 0.5 * h * w * r.powi(k + 2) * occ;
        }
    }
    (4.0 * PI * sum).ln()
}

/// `ln(I₀/I₂^{3/5})`, strictly decreasing in `c`.
fn log_ratio(c: f64) -> f64 {
    log_radial(c, 0) - 0.6 * log_radial(c, 2) - 0.4 * c.max(0.0)
}

/// Finds `(a, c)` such that the equilibrium has mass `rho` and temperature
/// `temperature`.
pub fn solve_fd_params(rho: f64, temperature: f64, u: Vec3) -> Result<FermiDiracParams> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
    }
    let threshold = SATURATION_MARGIN * fermi_temperature(rho);
    if !(temperature > threshold) || !temperature.is_finite() {
        return Err(Error::SaturationRegime {
            temperature,
            threshold,
        });
    }
    let target = rho.ln() - 0.6 * (3.0 * rho * temperature).ln();
    let (mut lo, mut hi) = (-1.0, 1.0);
    let mut guard = 0;
    while log_ratio(lo) < target {
        lo *= 2.0;
        guard += 1;
        if guard > 40 {
            return Err(Error::NoConvergence("could not bracket c from below".into()));
        }
    }
    while log_ratio(hi) > target {
        hi *= 2.0;
        guard += 1;
        if guard > 80 {
            return Err(Error::NoConvergence("could not bracket c from above".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if log_ratio(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * (1.0 + mid.abs()) {
            break;
        }
    }
    let c = 0.5 * (lo + hi);
    if !c.is_finite() {
        return Err(Error::NoConvergence("bisection produced a non-finite offset".into()));
    }
    // ρ = a^{-3/2} I₀(c)
    let log_i0 = log_radial(c, 0) - c.max(0.0);
    let a = ((2.0 / 3.0) * (log_i0 - rho.ln())).exp();
    Ok(FermiDiracParams { a, c, u })
}

/// `ρ` and `T` of the continuum equilibrium with the given parameters.
pub fn fd_moments(params: &FermiDiracParams) -> (f64, f64) {
    let i0 = (log_radial(params.c, 0) - params.c.max(0.0)).exp();
    let i2 = (log_radial(params.c, 2) - params.c.max(0.0)).exp();
    let rho = params.a.powf(-1.5) * i0;
    let e = params.a.powf(-2.5) * i2;
    (rho, e / (3.0 * rho))
}
