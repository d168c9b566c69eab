//! Quantum collision operator `Q_FD`, its `Q₁` decomposition, the classical
//! gain/loss pair and a conservative projection.
//!
//! All σ-quadrature evaluations share one discretization: `v*` runs over the
//! grid nodes, `σ` over a [`SphereQuadrature`], and `f(v')`, `f(v'*)` are
//! trilinear samples. Points leaving the cube take the field's exterior value.

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::{cross, norm, norm2, scale, sub, DistributionField, Stencil, Vec3, VelocityGrid};
use crate::kernel::{angular_h, CollisionKernel, SphereQuadrature};
use crate::sweep::{PairVisitor, SweepPlan};
use std::sync::Arc;

pub const GAMMA_CAP: f64 = 1e6;

/// Per-node rates of the `Q₁` splitting.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionRates {
    /// `Q₁(f, f, 1-f)`.
    pub gain: Vec<f64>,
    /// `Q̄₁ = Q₁(f, f, 1-f) + Q₁(1-f, 1-f, f)`.
    pub total_freq: Vec<f64>,
    /// `Q_FD(f, f) = gain - f·total_freq`.
    pub q_fd: Vec<f64>,
}

/// Entropy production `D(f)` together with its per-node density.
#[derive(Debug, Clone, PartialEq)]
pub struct Production {
    pub total: f64,
    pub per_node: Vec<f64>,
    /// Number of quadrature terms where `Γ` hit [`GAMMA_CAP`].
    pub capped_terms: usize,
}

impl Production {
    pub fn saturated(&self) -> bool {
        self.capped_terms > 0
    }
}

/// Collision evaluator bound to one grid, kernel and sphere quadrature.
#[derive(Debug, Clone)]
pub struct CollisionOperator {
    grid: VelocityGrid,
    kernel: CollisionKernel,
    quad: SphereQuadrature,
    exec: Exec,
    plan: Arc<SweepPlan>,
}

impl CollisionOperator {
    pub fn new(grid: VelocityGrid, kernel: CollisionKernel, quad: SphereQuadrature) -> Self {
        let plan = Arc::new(SweepPlan::new(&grid, &kernel, &quad));
        Self {
            grid,
            kernel,
            quad,
            exec: Exec::default(),
            plan,
        }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    pub fn kernel(&self) -> &CollisionKernel {
        &self.kernel
    }

    pub fn quadrature(&self) -> &SphereQuadrature {
        &self.quad
    }

    pub fn exec(&self) -> Exec {
        self.exec
    }

    fn sweep<V: PairVisitor>(&self, visitor: &V) -> Vec<f64> {
        self.plan.run(&self.grid, &self.kernel, visitor, self.exec)
    }

    fn check(&self, f: &DistributionField) -> Result<()> {
        if f.grid().same_lattice(&self.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "field lives on {}³ nodes of radius {}, operator on {}³ of radius {}",
                f.grid().n_per_axis(),
                f.grid().radius(),
                self.grid.n_per_axis(),
                self.grid.radius()
            )))
        }
    }

    pub fn rates(&self, f: &DistributionField) -> Result<CollisionRates> {
        self.check(f)?;
        let visitor = RatesVisitor::new(f, false);
        let out = self.sweep(&visitor);
        Ok(rates_from(f, &out))
    }

    /// Rates and entropy production from a single sweep.
    pub fn rates_with_production(
        &self,
        f: &DistributionField,
    ) -> Result<(CollisionRates, Production)> {
        self.check(f)?;
        let visitor = RatesVisitor::new(f, true);
        let out = self.sweep(&visitor);
        let len = self.grid.len();
        let per_node = out[2 * len..3 * len].to_vec();
        let total = per_node.iter().sum::<f64>() * self.grid.cell_volume();
        let capped_terms = out[3 * len..4 * len].iter().sum::<f64>().round() as usize;
        Ok((
            rates_from(f, &out),
            Production {
                total,
                per_node,
                capped_terms,
            },
        ))
    }

    pub fn qfd(&self, f: &DistributionField) -> Result<Vec<f64>> {
        Ok(self.rates(f)?.q_fd)
    }

    pub fn entropy_production(&self, f: &DistributionField) -> Result<Production> {
        Ok(self.rates_with_production(f)?.1)
    }

    /// `Q₁(f1, f2, f3)(v) = Σ B f1(v') f2(v'*) f3(v*)`.
    pub fn q1(
        &self,
        f1: &DistributionField,
        f2: &DistributionField,
        f3: &DistributionField,
    ) -> Result<Vec<f64>> {
        self.check(f1)?;
        self.check(f2)?;
        self.check(f3)?;
        let visitor = Q1Visitor {
            f1,
            f2,
            f3: f3.values(),
        };
        Ok(self.sweep(&visitor))
    }

    pub fn qbar1(&self, f: &DistributionField) -> Result<Vec<f64>> {
        Ok(self.rates(f)?.total_freq)
    }

    /// `(Q_FD⁺, L_FD)` with `Q_FD = Q_FD⁺ - f·L_FD`.
    pub fn gain_loss_split(&self, f: &DistributionField) -> Result<(Vec<f64>, Vec<f64>)> {
        let r = self.rates(f)?;
        let gain = r
            .gain
            .iter()
            .zip(f.values())
            .map(|(g, fv)| (1.0 - fv) * g)
            .collect();
        let loss = r.total_freq.iter().zip(&r.gain).map(|(t, g)| t - g).collect();
        Ok((gain, loss))
    }

    /// Classical gain `Q_c⁺(f, g)` by σ-quadrature.
    pub fn qc_gain(&self, f: &DistributionField, g: &DistributionField) -> Result<Vec<f64>> {
        let one = DistributionField::constant(self.grid, 1.0);
        self.q1(f, g, &one)
    }

    /// Classical loss `Q_c⁻(f, g)(v) = f(v) Σ B g(v*)`.
    pub fn qc_loss(&self, f: &DistributionField, g: &DistributionField) -> Result<Vec<f64>> {
        self.check(f)?;
        self.check(g)?;
        let visitor = LossVisitor { g: g.values() };
        let mut out = self.sweep(&visitor);
        for (o, fv) in out.iter_mut().zip(f.values()) {
            *o *= fv;
        }
        Ok(out)
    }
}

fn rates_from(f: &DistributionField, out: &[f64]) -> CollisionRates {
    let len = f.values().len();
    let gain = out[..len].to_vec();
    let total_freq = out[len..2 * len].to_vec();
    let q_fd = gain
        .iter()
        .zip(&total_freq)
        .zip(f.values())
        .map(|((g, t), fv)| g - fv * t)
        .collect();
    CollisionRates {
        gain,
        total_freq,
        q_fd,
    }
}

#[inline]
fn logit(x: f64) -> f64 {
    (x / (1.0 - x)).ln()
}

/// `Γ(a, b) = (a - b) ln(a/b)`, `0` on the diagonal and capped when exactly
/// one argument vanishes. The flag reports the cap.
pub fn gamma_fn(a: f64, b: f64) -> (f64, bool) {
    if a == b {
        (0.0, false)
    } else if a == 0.0 || b == 0.0 {
        (GAMMA_CAP, true)
    } else {
        ((a - b) * (a / b).ln(), false)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct RateClass {
    a: f64,
    c: f64,
    pl: f64,
    ml: f64,
    p: f64,
    m: f64,
    /// Every in-domain sample lies strictly inside `(0, 1)`.
    clean: bool,
    start: usize,
    end: usize,
}

struct RatesVisitor<'a> {
    f: &'a DistributionField,
    len: usize,
    production: bool,
    logits: Vec<f64>,
}

impl<'a> RatesVisitor<'a> {
    fn new(f: &'a DistributionField, production: bool) -> Self {
        let logits = if production {
            f.values().iter().map(|&x| logit(x)).collect()
        } else {
            Vec::new()
        };
        Self {
            f,
            len: f.values().len(),
            production,
            logits,
        }
    }
}

impl PairVisitor for RatesVisitor<'_> {
    type Class = RateClass;

    fn channels(&self) -> usize {
        if self.production {
            4
        } else {
            2
        }
    }

    fn class(&self, st: &[[Option<Stencil>; 2]], wts: &[f64], arena: &mut Vec<f64>) -> RateClass {
        let vals = self.f.values();
        let ext = self.f.exterior();
        let mut k = RateClass {
            clean: true,
            start: arena.len(),
            ..RateClass::default()
        };
        for (&[s0, s1], &w) in st.iter().zip(wts) {
            let f0 = s0.map_or(ext, |s| s.apply(vals).clamp(0.0, 1.0));
            let f1 = s1.map_or(ext, |s| s.apply(vals).clamp(0.0, 1.0));
            let pp = f0 * f1;
            let mm = (1.0 - f0) * (1.0 - f1);
            let w2 = 2.0 * w;
            k.a += w2 * pp;
            k.c += w2 * mm;
            if self.production && s0.is_some() && s1.is_some() {
                if k.clean && f0 > 0.0 && f0 < 1.0 && f1 > 0.0 && f1 < 1.0 {
                    let l = logit(f0) + logit(f1);
                    k.pl += w2 * pp * l;
                    k.ml += w2 * mm * l;
                    k.p += w2 * pp;
                    k.m += w2 * mm;
                } else {
                    k.clean = false;
                }
                arena.extend_from_slice(&[w2, pp, mm]);
            }
        }
        k.end = arena.len();
        k
    }

    fn scatter(
        &self,
        k: &RateClass,
        arena: &[f64],
        kin: f64,
        v: usize,
        vs: usize,
        out: &mut [f64],
    ) {
        let vals = self.f.values();
        let fs = vals[vs];
        let g = kin * (1.0 - fs) * k.a;
        out[v] += g;
        out[self.len + v] += g + kin * fs * k.c;
        if self.production {
            let fv = vals[v];
            let x = (1.0 - fv) * (1.0 - fs);
            let y = fv * fs;
            let lam = self.logits[v] + self.logits[vs];
            let (d, capped) = if k.clean && lam.is_finite() {
                (x * k.pl - y * k.ml - lam * (x * k.p - y * k.m), 0usize)
            } else {
                let mut d = 0.0;
                let mut capped = 0usize;
                for t in arena[k.start..k.end].chunks_exact(3) {
                    let (gam, cap) = gamma_fn(t[1] * x, y * t[2]);
                    d += t[0] * gam;
                    capped += cap as usize;
                }
                (d, capped)
            };
            out[2 * self.len + v] += 0.25 * kin * d;
            out[3 * self.len + v] += capped as f64;
        }
    }
}

struct Q1Visitor<'a> {
    f1: &'a DistributionField,
    f2: &'a DistributionField,
    f3: &'a [f64],
}

impl PairVisitor for Q1Visitor<'_> {
    type Class = f64;

    fn channels(&self) -> usize {
        1
    }

    fn class(&self, st: &[[Option<Stencil>; 2]], wts: &[f64], _arena: &mut Vec<f64>) -> f64 {
        let (v1, e1) = (self.f1.values(), self.f1.exterior());
        let (v2, e2) = (self.f2.values(), self.f2.exterior());
        let mut acc = 0.0;
        for (&[s0, s1], &w) in st.iter().zip(wts) {
            let a0 = s0.map_or(e1, |s| s.apply(v1).clamp(0.0, 1.0));
            let b0 = s0.map_or(e2, |s| s.apply(v2).clamp(0.0, 1.0));
            let a1 = s1.map_or(e1, |s| s.apply(v1).clamp(0.0, 1.0));
            let b1 = s1.map_or(e2, |s| s.apply(v2).clamp(0.0, 1.0));
            acc += w * (a0 * b1 + a1 * b0);
        }
        acc
    }

    fn scatter(&self, c: &f64, _: &[f64], kin: f64, v: usize, vs: usize, out: &mut [f64]) {
        out[v] += kin * self.f3[vs] * c;
    }
}

struct LossVisitor<'a> {
    g: &'a [f64],
}

impl PairVisitor for LossVisitor<'_> {
    type Class = f64;

    fn channels(&self) -> usize {
        1
    }

    fn samples(&self) -> bool {
        false
    }

    fn class(&self, _: &[[Option<Stencil>; 2]], wts: &[f64], _: &mut Vec<f64>) -> f64 {
        2.0 * wts.iter().sum::<f64>()
    }

    fn scatter(&self, c: &f64, _: &[f64], kin: f64, v: usize, vs: usize, out: &mut [f64]) {
        out[v] += kin * self.g[vs] * c;
    }
}

pub fn eval_qfd(
    f: &DistributionField,
    kernel: &CollisionKernel,
    quad: &SphereQuadrature,
) -> Result<Vec<f64>> {
    CollisionOperator::new(*f.grid(), kernel.clone(), quad.clone()).qfd(f)
}

pub fn eval_q1(
    f1: &DistributionField,
    f2: &DistributionField,
    f3: &DistributionField,
    kernel: &CollisionKernel,
    quad: &SphereQuadrature,
) -> Result<Vec<f64>> {
    CollisionOperator::new(*f1.grid(), kernel.clone(), quad.clone()).q1(f1, f2, f3)
}

pub fn eval_qbar1(
    f: &DistributionField,
    kernel: &CollisionKernel,
    quad: &SphereQuadrature,
) -> Result<Vec<f64>> {
    CollisionOperator::new(*f.grid(), kernel.clone(), quad.clone()).qbar1(f)
}

pub fn eval_gain_loss_split(
    f: &DistributionField,
    kernel: &CollisionKernel,
    quad: &SphereQuadrature,
) -> Result<(Vec<f64>, Vec<f64>)> {
    CollisionOperator::new(*f.grid(), kernel.clone(), quad.clone()).gain_loss_split(f)
}

pub fn eval_qc_gain_direct(
    f: &DistributionField,
    g: &DistributionField,
    kernel: &CollisionKernel,
    quad: &SphereQuadrature,
) -> Result<Vec<f64>> {
    CollisionOperator::new(*f.grid(), kernel.clone(), quad.clone()).qc_gain(f, g)
}

/// Classical gain through the Carleman form: `v'` runs over the nodes and
/// `v'*` over the plane through `v` orthogonal to `v' - v`, sampled on a
/// midpoint lattice of spacing `Δv` and half-width `R`. The node `v' = v` is
/// skipped.
pub fn eval_qc_gain_carleman(
    f: &DistributionField,
    g: &DistributionField,
    kernel: &CollisionKernel,
) -> Result<Vec<f64>> {
    let nodes: Vec<usize> = (0..f.grid().len()).collect();
    eval_qc_gain_carleman_at(f, g, kernel, &nodes, Exec::default())
}

/// [`eval_qc_gain_carleman`] restricted to the listed output nodes.
pub fn eval_qc_gain_carleman_at(
    f: &DistributionField,
    g: &DistributionField,
    kernel: &CollisionKernel,
    nodes: &[usize],
    exec: Exec,
) -> Result<Vec<f64>> {
    let grid = *f.grid();
    if !grid.same_lattice(g.grid()) {
        return Err(Error::GridMismatch("Carleman inputs differ in grid".into()));
    }
    if let Some(&bad) = nodes.iter().find(|&&k| k >= grid.len()) {
        return Err(Error::InvalidParameter(format!("node index {bad} out of range")));
    }
    Ok(exec.map_collect(nodes.len(), |k| carleman_node(f, g, kernel, nodes[k])))
}

fn carleman_node(
    f: &DistributionField,
    g: &DistributionField,
    kernel: &CollisionKernel,
    node: usize,
) -> f64 {
    let grid = f.grid();
    let dv = grid.spacing();
    let top = (grid.n_per_axis() - 1) as f64;
    let vi = grid.unravel(node).map(|x| x as f64);
    let half = (grid.radius() / dv - 0.5).floor() as i64 + 1;
    let gv = g.values();
    let mut total = 0.0;
    for (j, &fp) in f.values().iter().enumerate() {
        if j == node || fp == 0.0 {
            continue;
        }
        let wi = sub(grid.unravel(j).map(|x| x as f64), vi);
        let w2 = norm2(wi);
        let (e1, e2) = plane_basis(scale(wi, 1.0 / w2.sqrt()));
        let mut plane = 0.0;
        for kb in -half..half {
            let b = kb as f64 + 0.5;
            let (mut lo, mut hi) = (-(half as f64), half as f64);
            for a in 0..3 {
                let base = vi[a] + b * e2[a];
                let slope = e1[a];
                if slope.abs() < 1e-14 {
                    if base < 0.0 || base > top {
                        lo = 1.0;
                        hi = 0.0;
                    }
                } else {
                    let (t0, t1) = ((0.0 - base) / slope, (top - base) / slope);
                    lo = lo.max(t0.min(t1));
                    hi = hi.min(t0.max(t1));
                }
            }
            if lo > hi {
                continue;
            }
            let ka0 = (lo - 0.5).ceil() as i64;
            let ka1 = (hi - 0.5).floor() as i64;
            for ka in ka0.max(-half)..=ka1.min(half - 1) {
                let a = ka as f64 + 0.5;
                let p = [
                    vi[0] + a * e1[0] + b * e2[0],
                    vi[1] + a * e1[1] + b * e2[1],
                    vi[2] + a * e1[2] + b * e2[2],
                ];
                let Some(st) = grid.stencil(p) else { continue };
                let gp = st.apply(gv).clamp(0.0, 1.0);
                if gp == 0.0 {
                    continue;
                }
                let rho2 = a * a + b * b;
                let vs2 = w2 + rho2;
                let cos_w = (w2 / vs2).sqrt();
                plane += gp * angular_h(kernel, cos_w) * kernel.speed_factor(vs2.sqrt() * dv);
            }
        }
        total += fp * plane / (w2 * dv * dv);
    }
    2.0 * total * dv * dv * grid.cell_volume()
}

/// Orthonormal basis of the plane orthogonal to the unit vector `w`; the axis
/// along which `w` is smallest seeds the cross product.
pub(crate) fn plane_basis(w: Vec3) -> (Vec3, Vec3) {
    let mut axis = 0;
    for a in 1..3 {
        if w[a].abs() < w[axis].abs() {
            axis = a;
        }
    }
    let mut e = [0.0; 3];
    e[axis] = 1.0;
    let e1 = cross(w, e);
    let e1 = scale(e1, 1.0 / norm(e1));
    (e1, cross(w, e1))
}

fn invariants(v: Vec3) -> [f64; 5] {
    [1.0, v[0], v[1], v[2], norm2(v)]
}

/// Discrete `∫ q ψ_k` for the five collision invariants.
pub fn invariant_defects(q: &[f64], grid: &VelocityGrid) -> [f64; 5] {
    let mut d = [0.0; 5];
    for (idx, v) in grid.nodes() {
        let psi = invariants(v);
        for k in 0..5 {
            d[k] += q[idx] * psi[k];
        }
    }
    d.map(|x| x * grid.cell_volume())
}

/// Minimal discrete-L² correction making all five invariants of `q` vanish.
pub fn conservative_projection(q: &[f64], grid: &VelocityGrid) -> Result<Vec<f64>> {
    let ones = vec![1.0; grid.len()];
    weighted_projection(q, &ones, grid)
}

/// Correction `ω Σ λ_k ψ_k` minimizing `Σ δ²/ω`, so nodes with `ω = 0` stay
/// untouched.
pub(crate) fn weighted_projection(
    q: &[f64],
    omega: &[f64],
    grid: &VelocityGrid,
) -> Result<Vec<f64>> {
    if q.len() != grid.len() || omega.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "expected {} node values",
            grid.len()
        )));
    }
    let vol = grid.cell_volume();
    let mut gram = [[0.0; 5]; 5];
    for (idx, v) in grid.nodes() {
        let psi = invariants(v);
        for k in 0..5 {
            for l in 0..5 {
                gram[k][l] += omega[idx] * psi[k] * psi[l] * vol;
            }
        }
    }
    let mut out = q.to_vec();
    for _ in 0..2 {
        let d = invariant_defects(&out, grid);
        let lambda = solve5(gram, d.map(|x| -x)).ok_or(Error::SingularGram)?;
        for (idx, v) in grid.nodes() {
            let psi = invariants(v);
            let c: f64 = (0..5).map(|k| lambda[k] * psi[k]).sum();
            out[idx] += omega[idx] * c;
        }
    }
    Ok(out)
}

/// Values `logistic(logit(f_k) + λ·ψ(v_k))` whose five discrete invariants
/// equal `target`, found by damped Newton iteration on `λ`. Nodes at exactly
/// 0 or 1 do not move and all others stay inside `(0, 1)`. The first Newton
/// step is the projection weighted by `f(1-f)`. Returns the values, the
/// number of iterations and the remaining relative defect.
pub fn entropic_projection(
    values: &[f64],
    target: [f64; 5],
    grid: &VelocityGrid,
    tol: f64,
) -> Result<(Vec<f64>, usize, f64)> {
    if values.len() != grid.len() {
        return Err(Error::GridMismatch(format!("expected {} node values", grid.len())));
    }
    let vol = grid.cell_volume();
    let psis: Vec<[f64; 5]> = grid.nodes().map(|(_, v)| invariants(v)).collect();
    let logits: Vec<Option<f64>> = values
        .iter()
        .map(|&x| (x > 0.0 && x < 1.0).then(|| x.ln() - (1.0 - x).ln()))
        .collect();
    let mass = target[0].abs().max(f64::MIN_POSITIVE);
    let energy = target[4].abs().max(f64::MIN_POSITIVE);
    let mom = (mass * energy).sqrt();
    let scales = [mass, mom, mom, mom, energy];
    let eval = |lambda: &[f64; 5]| -> Vec<f64> {
        values
            .iter()
            .zip(&logits)
            .zip(&psis)
            .map(|((&x, l), psi)| match l {
                Some(l) => {
                    let y = l + (0..5).map(|k| lambda[k] * psi[k]).sum::<f64>();
                    crate::equilibrium::fermi(-y)
                }
                None => x,
            })
            .collect()
    };
    let residual = |f: &[f64]| -> ([f64; 5], f64) {
        let m = invariant_defects(f, grid);
        let r: [f64; 5] = std::array::from_fn(|k| m[k] - target[k]);
        let size = (0..5).map(|k| r[k].abs() / scales[k]).fold(0.0, f64::max);
        (r, size)
    };
    let mut lambda = [0.0; 5];
    let mut cur = eval(&lambda);
    let (mut r, mut size) = residual(&cur);
    let mut iters = 0;
    while size > tol && iters < 50 {
        iters += 1;
        let mut gram = [[0.0; 5]; 5];
        for (x, psi) in cur.iter().zip(&psis) {
            let w = x * (1.0 - x) * vol;
            if w == 0.0 {
                continue;
            }
            for k in 0..5 {
                for l in 0..5 {
                    gram[k][l] += w * psi[k] * psi[l];
                }
            }
        }
        let step = solve5(gram, r.map(|x| -x)).ok_or(Error::SingularGram)?;
        let mut t = 1.0;
        loop {
            let trial: [f64; 5] = std::array::from_fn(|k| lambda[k] + t * step[k]);
            let f = eval(&trial);
            let (rt, st) = residual(&f);
            if st < size {
                lambda = trial;
                cur = f;
                r = rt;
                size = st;
                break;
            }
            if t < 1e-6 {
                return Ok((cur, iters, size));
            }
            t *= 0.5;
        }
    }
    Ok((cur, iters, size))
}

fn solve5(mut a: [[f64; 5]; 5], mut b: [f64; 5]) -> Option<[f64; 5]> {
    let scale_ref = (0..5).map(|k| a[k][k].abs()).fold(0.0, f64::max);
    if !(scale_ref > 0.0) {
        return None;
    }
    for col in 0..5 {
        let piv = (col..5).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-13 * scale_ref {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..5 {
            let m = a[row][col] / a[col][col];
            for k in col..5 {
                a[row][k] -= m * a[col][k];
            }
            b[row] -= m * b[col];
        }
    }
    let mut x = [0.0; 5];
    for row in (0..5).rev() {
        let s: f64 = (row + 1..5).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}
