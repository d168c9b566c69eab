//! Collision kernel `B = |v - v*|^γ b(cos θ)`, its angular constants, the
//! sphere quadrature and the pre/post-collision maps.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{add, dot, norm, norm2, scale, sub, Vec3};

/// Angular part `b(cos θ)` of the kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AngularLaw {
    Constant(f64),
    /// Piecewise-linear table over strictly increasing `cos θ` covering `[-1, 1]`.
    Table { cos: Vec<f64>, values: Vec<f64> },
}

impl AngularLaw {
    pub fn table(cos: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if cos.len() != values.len() || cos.len() < 2 {
            return Err(Error::InvalidParameter(
                "angular table needs at least two (cos, value) rows".into(),
            ));
        }
        if cos.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "angular table cos column must be strictly increasing".into(),
            ));
        }
        if (cos[0] + 1.0).abs() > 1e-12 || (cos[cos.len() - 1] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(
                "angular table must cover [-1, 1]".into(),
            ));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonIntegrableAngular(format!("table value {v}")));
        }
        if values.iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidParameter(
                "angular table values must be nonnegative".into(),
            ));
        }
        Ok(Self::Table { cos, values })
    }

    /// Reads lines `cosθ value`; blank lines and `#` comments are skipped.
    pub fn from_table_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cos = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|s| s.parse().ok()).ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "{}:{}: expected `cos value`",
                        path.display(),
                        lineno + 1
                    ))
                })
            };
            cos.push(parse(parts.next())?);
            values.push(parse(parts.next())?);
        }
        Self::table(cos, values)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            AngularLaw::Constant(b) => *b,
            AngularLaw::Table { cos, values } => {
                let x = x.clamp(-1.0, 1.0);
                let k = match cos.partition_point(|c| *c <= x) {
                    0 => 0,
                    k if k >= cos.len() => cos.len() - 2,
                    k => k - 1,
                };
                let t = (x - cos[k]) / (cos[k + 1] - cos[k]);
                values[k] + (values[k + 1] - values[k]) * t
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, AngularLaw::Constant(_))
    }

    /// `∫_lo^hi b(x) w(x) dx` by composite Gauss–Legendre, split at table nodes.
    fn integrate<W: Fn(f64) -> f64>(&self, lo: f64, hi: f64, w: W) -> f64 {
        let mut cuts = vec![lo];
        if let AngularLaw::Table { cos, .. } = self {
            cuts.extend(cos.iter().copied().filter(|c| *c > lo && *c < hi));
        }
        cuts.push(hi);
        let (xs, ws) = gauss_legendre(6);
        let mut total = 0.0;
        for seg in cuts.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (x, wt) in xs.iter().zip(&ws) {
                let y = mid + half * x;
                total += wt * half * self.eval(y) * w(y);
            }
        }
        total
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = x;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            x = 0.0;
            dp = 1.0;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[i] = -x;
        xs[n - 1 - i] = x;
        ws[i] = w;
        ws[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        xs[n / 2] = 0.0;
    }
    (xs, ws)
}

/// Tensor product of Gauss–Legendre nodes in `cos θ` and uniform azimuths.
///
/// The azimuth count is even, so the node set is closed under `σ ↦ -σ`
/// with equal weights. [`SphereQuadrature::hemisphere`] lists one node of
/// each antipodal pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereQuadrature {
    n_theta: usize,
    n_phi: usize,
    polar_nodes: Vec<f64>,
    polar_weights: Vec<f64>,
    nodes: Vec<Vec3>,
    weights: Vec<f64>,
    hemisphere: Vec<usize>,
}

impl SphereQuadrature {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta < 1 || n_phi < 2 || n_phi % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "sphere quadrature needs n_theta >= 1 and even n_phi >= 2, got {n_theta} x {n_phi}"
            )));
        }
        let (polar_nodes, polar_weights) = gauss_legendre(n_theta);
        let dphi = 2.0 * PI / n_phi as f64;
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        let mut hemisphere = Vec::new();
        for (it, (&x, &w)) in polar_nodes.iter().zip(&polar_weights).enumerate() {
            let s = (1.0 - x * x).max(0.0).sqrt();
            for j in 0..n_phi {
                let phi = (j as f64 + 0.5) * dphi;
                let idx = nodes.len();
                nodes.push([s * phi.cos(), s * phi.sin(), x]);
                weights.push(w * dphi);
                let upper = it >= n_theta / 2 && !(n_theta % 2 == 1 && it == n_theta / 2);
                let equator_half = n_theta % 2 == 1 && it == n_theta / 2 && j < n_phi / 2;
                if upper || equator_half {
                    hemisphere.push(idx);
                }
            }
        }
        Ok(Self {
            n_theta,
            n_phi,
            polar_nodes,
            polar_weights,
            nodes,
            weights,
            hemisphere,
        })
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn polar_nodes(&self) -> &[f64] {
        &self.polar_nodes
    }

    pub fn polar_weights(&self) -> &[f64] {
        &self.polar_weights
    }

    /// Total node count `S`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Indices of one representative of each antipodal pair.
    pub fn hemisphere(&self) -> &[usize] {
        &self.hemisphere
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// `B(v - v*, σ) = min(|v - v*|^γ, n) b(cos θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionKernel {
    gamma: f64,
    angular: AngularLaw,
    speed_cap: Option<f64>,
    c_b_lower: Option<f64>,
    alpha: Option<f64>,
    c_b: f64,
}

pub const DEFAULT_B0: f64 = 1.0 / (4.0 * PI);

impl CollisionKernel {
    pub fn new(gamma: f64, angular: AngularLaw) -> Result<Self> {
        if !(0.0..=2.0).contains(&gamma) {
            return Err(Error::InvalidParameter(format!(
                "gamma must lie in [0, 2], got {gamma}"
            )));
        }
        if let AngularLaw::Constant(b) = angular {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "constant angular law must be positive, got {b}"
                )));
            }
        }
        if let AngularLaw::Table { cos, .. } = &angular {
            for &x in cos {
                let (l, r) = (angular.eval(x), angular.eval(-x));
                if (l - r).abs() > 1e-12 * l.abs().max(r.abs()).max(1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "angular table is not symmetric: b({x}) = {l}, b({}) = {r}",
                        -x
                    )));
                }
            }
        }
        let c_b = 2.0 * PI * angular.integrate(-1.0, 1.0, |_| 1.0);
        if !c_b.is_finite() {
            return Err(Error::NonIntegrableAngular(format!("C_b = {c_b}")));
        }
        if c_b <= 0.0 {
            return Err(Error::InvalidParameter("C_b must be positive".into()));
        }
        Ok(Self {
            gamma,
            angular,
            speed_cap: None,
            c_b_lower: None,
            alpha: None,
            c_b,
        })
    }

    /// Hard spheres: `γ = 1`, `b ≡ 1/(4π)`, so `C_b = 1`.
    pub fn hard_sphere() -> Self {
        Self::new(1.0, AngularLaw::Constant(DEFAULT_B0)).expect("valid hard-sphere kernel")
    }

    pub fn with_speed_cap(mut self, cap: Option<f64>) -> Result<Self> {
        if let Some(n) = cap {
            if !(n > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "speed cap must be positive, got {n}"
                )));
            }
        }
        self.speed_cap = cap;
        Ok(self)
    }

    /// Records a lower bound `b ≥ c_b` on `θ ∈ [π/4, 3π/4]`, checked against the law.
    pub fn with_lower_bound(mut self, c_b_lower: Option<f64>) -> Result<Self> {
        if let Some(c) = c_b_lower {
            let lim = std::f64::consts::FRAC_1_SQRT_2;
            let mut probe: Vec<f64> = (0..=64).map(|k| -lim + 2.0 * lim * k as f64 / 64.0).collect();
            if let AngularLaw::Table { cos, .. } = &self.angular {
                probe.extend(cos.iter().copied().filter(|x| x.abs() <= lim));
            }
            let min = probe
                .into_iter()
                .map(|x| self.angular.eval(x))
                .fold(f64::INFINITY, f64::min);
            if !(c > 0.0) || min < c {
                return Err(Error::InvalidParameter(format!(
                    "c_b_lower = {c} is not a lower bound of b on [π/4, 3π/4] (min {min})"
                )));
            }
        }
        self.c_b_lower = c_b_lower;
        Ok(self)
    }

    pub fn with_alpha(mut self, alpha: Option<f64>) -> Result<Self> {
        if let Some(a) = alpha {
            if !(a < 2.0) {
                return Err(Error::InvalidParameter(format!(
                    "singularity exponent alpha must be < 2, got {a}"
                )));
            }
        }
        self.alpha = alpha;
        Ok(self)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn angular(&self) -> &AngularLaw {
        &self.angular
    }

    pub fn speed_cap(&self) -> Option<f64> {
        self.speed_cap
    }

    pub fn c_b_lower(&self) -> Option<f64> {
        self.c_b_lower
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn is_isotropic(&self) -> bool {
        self.angular.is_constant()
    }

    /// `min(|g|^γ, n)` for a relative speed `|g|`.
    #[inline]
    pub fn speed_factor(&self, g: f64) -> f64 {
        let s = g.powf(self.gamma);
        match self.speed_cap {
            Some(n) => s.min(n),
            None => s,
        }
    }

    #[inline]
    pub fn b(&self, cos_theta: f64) -> f64 {
        self.angular.eval(cos_theta)
    }

    pub fn c_b(&self) -> f64 {
        self.c_b
    }
}

pub fn kinetic_factor(kernel: &CollisionKernel, v: Vec3, v_star: Vec3) -> f64 {
    kernel.speed_factor(norm(sub(v, v_star)))
}

pub fn post_collision_sigma(v: Vec3, v_star: Vec3, sigma: Vec3) -> (Vec3, Vec3) {
    let m = scale(add(v, v_star), 0.5);
    let r = 0.5 * norm(sub(v, v_star));
    (add(m, scale(sigma, r)), sub(m, scale(sigma, r)))
}

pub fn post_collision_omega(v: Vec3, v_star: Vec3, omega: Vec3) -> (Vec3, Vec3) {
    let p = dot(sub(v_star, v), omega);
    (add(v, scale(omega, p)), sub(v_star, scale(omega, p)))
}

/// `h(cos θ_ω) = 2|cos θ_ω| b(1 - 2cos²θ_ω)`.
pub fn angular_h(kernel: &CollisionKernel, cos_theta_omega: f64) -> f64 {
    let c = cos_theta_omega;
    2.0 * c.abs() * kernel.b(1.0 - 2.0 * c * c)
}

/// `C_b = 2π ∫_0^π b(cos θ) sin θ dθ`.
pub fn compute_cb(kernel: &CollisionKernel) -> f64 {
    kernel.c_b
}

/// `C_{b,2} = 2π ∫_0^π b(cos θ) sin³θ dθ`.
pub fn compute_cb2(kernel: &CollisionKernel) -> f64 {
    2.0 * PI * kernel.angular.integrate(-1.0, 1.0, |x| 1.0 - x * x)
}

/// Mass of `b` on the polar caps `θ < ε` and `θ > π - ε`.
pub fn varphi(kernel: &CollisionKernel, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1), got {eps}"
        )));
    }
    let c = eps.cos();
    let caps = kernel.angular.integrate(c, 1.0, |_| 1.0) + kernel.angular.integrate(-1.0, -c, |_| 1.0);
    Ok(2.0 * PI * caps)
}

/// Unit vector along `a`, or `e_z` when `a` vanishes.
pub(crate) fn direction(a: Vec3) -> Vec3 {
    let n2 = norm2(a);
    if n2 == 0.0 {
        [0.0, 0.0, 1.0]
    } else {
        scale(a, 1.0 / n2.sqrt())
    }
}
