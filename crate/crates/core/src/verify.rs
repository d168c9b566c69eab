//! Scenario checks of conservation, entropy, moment, envelope, stability and
//! truncation properties on simulated trajectories.
//!
//! Each check yields a [`CheckResult`] holding the measured value, its
//! threshold and whether it is informative only. A report passes when every
//! non-informative check passes.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{InitKind, SimulationConfig};
use crate::diagnostics::{
    exp_moment, fit_lower_gaussian_within, fit_upper_gaussian, fit_upper_stretched,
    l12_distance, moment, povzner_constant, ssp_from_moments, weighted_norm, FLAG_GAMMA_CAP,
};
use crate::error::Result;
use crate::grid::{norm2, DistributionField, VelocityGrid};
use crate::integrator::{run_from, run_simulation, Trajectory};
use crate::operator::CollisionOperator;

/// Seed of the random-field battery.
pub const BATTERY_SEED: u64 = 0x5eed_f00d;
/// Sample pairs used for Povzner constants.
pub const POVZNER_SAMPLES: usize = 512;

pub const CONSERVATION_TOL: f64 = 1e-8;
pub const ENTROPY_STEP_TOL: f64 = 1e-8;
pub const ENTROPY_IDENTITY_TOL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub pass: bool,
    /// Reported but not counted towards the verdict.
    pub informative: bool,
    pub note: String,
}

impl CheckResult {
    /// Passes when `measured ≤ threshold`.
    pub fn at_most(name: &str, measured: f64, threshold: f64) -> Self {
        Self::new(name, measured, threshold, measured <= threshold)
    }

    /// Passes when `measured ≥ threshold`.
    pub fn at_least(name: &str, measured: f64, threshold: f64) -> Self {
        Self::new(name, measured, threshold, measured >= threshold)
    }

    pub fn new(name: &str, measured: f64, threshold: f64, pass: bool) -> Self {
        Self {
            name: name.to_string(),
            measured,
            threshold,
            pass,
            informative: false,
            note: String::new(),
        }
    }

    pub fn informative(mut self) -> Self {
        self.informative = true;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub suite: String,
    pub checks: Vec<CheckResult>,
    pub runtime_secs: f64,
    pub fingerprint: u64,
}

impl VerificationReport {
    pub fn new(suite: &str, fingerprint: u64) -> Self {
        Self {
            suite: suite.to_string(),
            checks: Vec::new(),
            runtime_secs: 0.0,
            fingerprint,
        }
    }

    pub fn push(&mut self, c: CheckResult) {
        self.checks.push(c);
    }

    pub fn extend(&mut self, other: VerificationReport) {
        self.checks.extend(other.checks);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass || c.informative)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// `key = value` lines, one block per check.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "suite = {}", self.suite);
        let _ = writeln!(s, "fingerprint = {:016x}", self.fingerprint);
        let _ = writeln!(s, "runtime_secs = {:.3}", self.runtime_secs);
        let _ = writeln!(s, "passed = {}", self.passed());
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{}.measured = {:.6e}\n{}.threshold = {:.6e}\n{}.pass = {}\n{}.informative = {}",
                c.name, c.measured, c.name, c.threshold, c.name, c.pass, c.name, c.informative
            );
            if !c.note.is_empty() {
                let _ = writeln!(s, "{}.note = {}", c.name, c.note);
            }
        }
        s
    }

    /// `suite,check,measured,threshold,pass,informative` rows without header.
    pub fn csv_rows(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{},{},{:.12e},{:.12e},{},{}",
                self.suite, c.name, c.measured, c.threshold, c.pass, c.informative
            );
        }
        s
    }
}

pub const REPORT_CSV_HEADER: &str = "suite,check,measured,threshold,pass,informative";

fn sqrt_scale(rho: f64, energy: f64) -> f64 {
    (rho.abs() * energy.abs()).sqrt().max(f64::MIN_POSITIVE)
}

/// Largest relative drift of mass, momentum (against `√(ρE)`) and energy over
/// the recorded series.
pub fn conservation_drift(traj: &Trajectory) -> f64 {
    let Some(first) = traj.records.first() else {
        return 0.0;
    };
    let rho0 = first.rho.abs().max(f64::MIN_POSITIVE);
    let e0 = first.energy.abs().max(f64::MIN_POSITIVE);
    let p0 = sqrt_scale(first.rho, first.energy);
    traj.records
        .iter()
        .map(|r| {
            let dp = (0..3)
                .map(|k| (r.momentum[k] - first.momentum[k]).abs())
                .fold(0.0, f64::max);
            ((r.rho - first.rho).abs() / rho0)
                .max(dp / p0)
                .max((r.energy - first.energy).abs() / e0)
        })
        .fold(0.0, f64::max)
}

pub fn check_conservation(traj: &Trajectory) -> VerificationReport {
    let mut rep = VerificationReport::new("conservation", 0);
    let drift = conservation_drift(traj);
    let mut c = CheckResult::at_most("invariant_drift", drift, CONSERVATION_TOL);
    if !traj.projection {
        c = c.informative().with_note("conservation repair disabled");
    }
    rep.push(c);
    rep
}

/// Index of the first record that carries a production value and no
/// saturation flag.
pub fn first_unsaturated(traj: &Trajectory) -> Option<usize> {
    traj.records
        .iter()
        .position(|r| r.production.is_some() && !r.has_flag(FLAG_GAMMA_CAP))
}

/// `(largest per-step entropy decrease relative to max(1, S), residual of
/// the entropy identity from the first unsaturated record)`.
pub fn entropy_identity(traj: &Trajectory) -> Option<(f64, f64, f64)> {
    let start = first_unsaturated(traj)?;
    let recs = &traj.records[start..];
    let worst_drop = recs
        .windows(2)
        .map(|w| (w[0].entropy - w[1].entropy) / w[0].entropy.abs().max(1.0))
        .fold(f64::NEG_INFINITY, f64::max);
    let with_d: Vec<(f64, f64)> = recs
        .iter()
        .filter_map(|r| r.production.map(|d| (r.time, d)))
        .collect();
    let last_d = with_d.last()?;
    let integral: f64 = with_d
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum();
    let s_end = recs.iter().find(|r| r.time == last_d.0)?.entropy;
    let gain = s_end - recs[0].entropy;
    let scale = gain.abs().max(integral.abs()).max(f64::MIN_POSITIVE);
    Some((worst_drop, (gain - integral).abs() / scale, recs[0].time))
}

pub fn check_h_theorem(traj: &Trajectory) -> VerificationReport {
    let mut rep = VerificationReport::new("h_theorem", 0);
    if traj.records.len() < 2 {
        rep.push(CheckResult::new("entropy_monotone", 0.0, ENTROPY_STEP_TOL, true).with_note("single record"));
        return rep;
    }
    match entropy_identity(traj) {
        None => rep.push(
            CheckResult::new("entropy_identity", f64::NAN, ENTROPY_IDENTITY_TOL, false)
                .informative()
                .with_note("every record is saturated or lacks production; checks skipped"),
        ),
        Some((drop, resid, t_s)) => {
            let note = format!("from t = {t_s:.4e}");
            rep.push(CheckResult::at_most("entropy_monotone", drop, ENTROPY_STEP_TOL).with_note(note.clone()));
            rep.push(CheckResult::at_most("entropy_identity", resid, ENTROPY_IDENTITY_TOL).with_note(note));
        }
    }
    rep
}

/// `sup_{t ∈ [t_min, 1]} m_s(t)·min(t^{(s-2)/γ}, 1)` over stored records.
pub fn windowed_moment(traj: &Trajectory, s: f64, gamma: f64, t_min: f64) -> f64 {
    traj.records
        .iter()
        .filter(|r| r.time >= t_min && r.time <= 1.0 + 1e-12)
        .filter_map(|r| {
            let m = r.moment(s)?;
            let w = if gamma > 0.0 {
                r.time.powf((s - 2.0) / gamma).min(1.0)
            } else {
                1.0
            };
            Some(m * w)
        })
        .fold(0.0, f64::max)
}

/// Windowed moment products across refinement levels: finite, and within a
/// factor 2 between successive levels.
pub fn check_moment_creation(levels: &[&Trajectory], s: f64, t_min: f64) -> VerificationReport {
    let mut rep = VerificationReport::new("moment_creation", 0);
    let vals: Vec<f64> = levels
        .iter()
        .map(|t| windowed_moment(t, s, t.gamma, t_min))
        .collect();
    let finite = vals.iter().all(|v| v.is_finite());
    rep.push(CheckResult::new("windowed_moment_finite", vals.iter().copied().fold(0.0, f64::max), f64::INFINITY, finite));
    let worst = vals
        .windows(2)
        .map(|w| (w[1] / w[0]).max(w[0] / w[1]))
        .fold(1.0, f64::max);
    rep.push(
        CheckResult::at_most("refinement_ratio", worst, 2.0)
            .with_note(format!("s = {s}, levels = {vals:?}")),
    );
    rep
}

/// Both sides of the moment inequality for one field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentOdeSides {
    pub lhs: f64,
    pub rhs: f64,
    /// `|∫ Q_c(f,f)|v|²|`, the discrete energy defect of the classical
    /// operator, scaled by `R^{sp-2}`.
    pub floor: f64,
}

/// `∫ Q_c(f,f)|v|^{sp}` against `C_b(2ϖ S_{s,p} - K₁ m_{sp+γ} + K₂ m_{sp})`
/// with `ϖ = ϖ_{sp/2}`, `K₁ = 2^{2-γ}(1-ϖ)m₀` and `K₂ = 2m_γ`.
pub fn moment_ode_sides(f: &DistributionField, op: &CollisionOperator, s: f64, p: u32, varpi: f64) -> Result<MomentOdeSides> {
    let gamma = op.kernel().gamma();
    let sp = s * p as f64;
    let plus = op.qc_gain(f, f)?;
    let minus = op.qc_loss(f, f)?;
    let grid = f.grid();
    let mut lhs = 0.0;
    let mut energy = 0.0;
    for (i, v) in grid.nodes() {
        let q = plus[i] - minus[i];
        lhs += q * norm2(v).powf(0.5 * sp);
        energy += q * norm2(v);
    }
    lhs *= grid.cell_volume();
    energy *= grid.cell_volume();
    let m = |q: f64| moment(f, q);
    let ssp = ssp_from_moments(m, s, p, gamma);
    let k1 = 2f64.powf(2.0 - gamma) * (1.0 - varpi) * m(0.0);
    let k2 = 2.0 * m(gamma);
    let rhs = op.kernel().c_b() * (2.0 * varpi * ssp - k1 * m(sp + gamma) + k2 * m(sp));
    let floor = energy.abs() * grid.radius().powf(sp - 2.0);
    Ok(MomentOdeSides { lhs, rhs, floor })
}

/// Smooth random admissible field: a clamped sum of up to three Gaussian
/// bumps centred within `|v| ≤ R/4`.
pub fn random_bump_field(grid: VelocityGrid, rng: &mut ChaCha8Rng) -> Result<DistributionField> {
    let k = rng.gen_range(1..=3);
    let r = grid.radius();
    let bumps: Vec<(f64, f64, [f64; 3])> = (0..k)
        .map(|_| {
            let amp = rng.gen_range(0.2..1.0);
            let width = rng.gen_range(0.5..1.5);
            let c = [0, 1, 2].map(|_| rng.gen_range(-0.15 * r..0.15 * r));
            (amp, width, c)
        })
        .collect();
    DistributionField::from_fn(grid, |v| {
        bumps
            .iter()
            .map(|(a, w, c)| a * (-norm2([v[0] - c[0], v[1] - c[1], v[2] - c[2]]) / (w * w)).exp())
            .sum::<f64>()
            .min(1.0)
    })
}

/// Moment inequality on `count` seeded random fields; each passes when
/// `lhs ≤ rhs + ε_quad`, with `ε_quad` the field's own quadrature floor.
pub fn check_moment_ode_bound(op: &CollisionOperator, count: usize, s: f64, p: u32, seed: u64) -> Result<VerificationReport> {
    let mut rep = VerificationReport::new("moment_ode_bound", seed);
    let sp = s * p as f64;
    if !(sp > 2.0) {
        rep.push(CheckResult::new("sp_above_two", sp, 2.0, false));
        return Ok(rep);
    }
    let varpi = povzner_constant(op.kernel(), 0.5 * sp, POVZNER_SAMPLES)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut fails = 0usize;
    for _ in 0..count {
        let f = random_bump_field(*op.grid(), &mut rng)?;
        let sides = moment_ode_sides(&f, op, s, p, varpi)?;
        let excess = sides.lhs - sides.rhs - sides.floor;
        let scale = sides.rhs.abs().max(sides.lhs.abs()).max(f64::MIN_POSITIVE);
        worst = worst.max(excess / scale);
        if excess > 0.0 {
            fails += 1;
        }
    }
    rep.push(CheckResult::at_most("relative_excess", worst, 0.0).with_note(format!(
        "{count} fields, sp = {sp}, varpi = {varpi:.6}"
    )));
    rep.push(CheckResult::at_most("failing_fields", fails as f64, 0.0));
    Ok(rep)
}

/// `max/min` of `∫ f e^{a min(t,1)|v|^γ}` over the stored snapshots.
pub fn check_exponential_moment(traj: &Trajectory, a: f64) -> Result<VerificationReport> {
    let mut rep = VerificationReport::new("exponential_moment", 0);
    let gamma = traj.gamma.max(1e-12);
    let mut vals = Vec::new();
    for (t, f) in &traj.snapshots {
        vals.push(exp_moment(f, a * t.min(1.0), gamma.min(2.0))?);
    }
    let hi = vals.iter().copied().fold(0.0, f64::max);
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    rep.push(CheckResult::at_most("max_min_ratio", hi / lo, 10.0).with_note(format!("a = {a}")));
    Ok(rep)
}

/// Gaussian lower bound on `|v| ≤ 0.8R` at the final time, and positivity of
/// `Q₁(f₀, f₀, 1-f₀)` on the annulus `δ < |v| ≤ √2 δ (1-η)`.
pub fn check_lower_bound_creation(traj: &Trajectory, op: &CollisionOperator, delta: f64, eta: f64) -> Result<VerificationReport> {
    let mut rep = VerificationReport::new("lower_bound_creation", 0);
    let r_max = 0.8 * op.grid().radius();
    let f_end = traj.last();
    let cert = fit_lower_gaussian_within(f_end, r_max);
    let (c1, ok) = match &cert {
        Ok(e) => (e.c1, e.certified && e.c1 > 0.0),
        Err(_) => (0.0, false),
    };
    rep.push(CheckResult::new("final_certificate_c1", c1, 0.0, ok).with_note(format!(
        "t = {:.4}, |v| <= {r_max:.3}",
        traj.snapshots.last().map_or(0.0, |s| s.0)
    )));
    let f0 = traj.initial();
    let initial_ok = fit_lower_gaussian_within(f0, r_max).is_ok_and(|e| e.certified);
    rep.push(
        CheckResult::new("initial_certificate", if initial_ok { 1.0 } else { 0.0 }, 1.0, initial_ok)
            .informative()
            .with_note("expected to fail outside the initial support"),
    );
    let q1 = op.q1(f0, f0, &f0.complement())?;
    let hi = 2f64.sqrt() * delta * (1.0 - eta);
    let annulus: Vec<f64> = op
        .grid()
        .nodes()
        .filter(|(_, v)| {
            let r = norm2(*v).sqrt();
            r > delta && r <= hi
        })
        .map(|(i, _)| q1[i])
        .collect();
    let min_q1 = annulus.iter().copied().fold(f64::INFINITY, f64::min);
    rep.push(
        CheckResult::new("spreading_min_q1", min_q1, 0.0, !annulus.is_empty() && min_q1 > 0.0)
            .with_note(format!("{} annulus nodes", annulus.len())),
    );
    Ok(rep)
}

/// Gaussian upper envelope with rate in `(0, a₀]`, stretched lower envelope
/// of `1-f`, and boundedness of `sup (1+|v|)^{s'} f` at every snapshot.
pub fn check_upper_envelopes(traj: &Trajectory, a0: f64, s_prime: f64, hard_sphere: bool) -> VerificationReport {
    let mut rep = VerificationReport::new("upper_envelopes", 0);
    for (t, f) in &traj.snapshots {
        if f.max_value() == 0.0 {
            rep.push(CheckResult::new(&format!("gaussian_t{t:.3}"), 0.0, a0, true).with_note("zero field"));
            continue;
        }
        let (a, ok) = match fit_upper_gaussian(f, Some(a0)) {
            Ok(e) => (e.a, e.certified && e.a > 0.0 && e.a <= a0),
            Err(_) => (f64::NAN, false),
        };
        rep.push(CheckResult::new(&format!("gaussian_t{t:.3}"), a, a0, ok));
        let one_minus = f.complement();
        let (c1, ok) = match fit_upper_stretched(&one_minus) {
            Ok(e) => (e.c1, e.certified && e.c1 > 0.0),
            Err(_) => (f64::NAN, false),
        };
        rep.push(CheckResult::new(&format!("stretched_t{t:.3}"), c1, 0.0, ok));
    }
    let sup: Vec<f64> = traj
        .snapshots
        .iter()
        .map(|(_, f)| weighted_norm(f, f64::INFINITY, s_prime).unwrap_or(f64::NAN))
        .collect();
    let s0 = sup.first().copied().unwrap_or(0.0);
    let worst = sup.iter().copied().fold(0.0, f64::max);
    let ratio = if s0 > 0.0 { worst / s0 } else { 1.0 };
    let mut c = CheckResult::at_most("weighted_sup_growth", ratio, 10.0).with_note(format!("s' = {s_prime}"));
    if !hard_sphere {
        c = c.informative().with_note("hypothesis not met: angular law is not constant");
    }
    rep.push(c);
    rep
}

/// `‖f(t) - g(t)‖_{1,2}` at each stored time of two runs.
pub fn distance_series(a: &Trajectory, b: &Trajectory) -> Result<Vec<(f64, f64)>> {
    a.snapshots
        .iter()
        .zip(&b.snapshots)
        .map(|((t, f), (_, g))| Ok((*t, l12_distance(f, g)?)))
        .collect()
}

/// `g₀ = clamp(f₀ + r h)` with `h` a unit-norm Gaussian bump.
pub fn perturbed(f0: &DistributionField, r: f64) -> Result<DistributionField> {
    let grid = *f0.grid();
    let bump = DistributionField::from_fn(grid, |v| (-norm2(v)).exp())?;
    let n = weighted_norm(&bump, 1.0, 2.0)?;
    let vals = f0
        .values()
        .iter()
        .zip(bump.values())
        .map(|(f, h)| (f + r * h / n).clamp(0.0, 1.0))
        .collect();
    DistributionField::from_values(grid, vals)
}

/// Least-squares `ln(d/r) = ln K + K′ t` over positive distances.
pub fn envelope_fit(series: &[(f64, f64)], r: f64) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(_, d)| *d > 0.0)
        .map(|(t, d)| (*t, (d / r).ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let k_rate = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    // raise K so the envelope covers every sample
    let log_k = pts.iter().map(|p| p.1 - k_rate * p.0).fold(f64::NEG_INFINITY, f64::max);
    Some((log_k.exp(), k_rate))
}

fn within_factor(a: f64, b: f64, factor: f64) -> bool {
    a.is_finite() && b.is_finite() && a * b > 0.0 && (a / b).max(b / a) <= factor
}

/// Perturbation ladder from the configured initial data.
pub fn check_stability(config: &SimulationConfig, r_values: &[f64]) -> Result<VerificationReport> {
    let mut rep = VerificationReport::new("stability", config.fingerprint());
    let f0 = config.initial_field()?;
    let base = run_from(config, f0.clone())?;
    let mut rs: Vec<f64> = r_values.to_vec();
    rs.sort_by(|a, b| b.total_cmp(a));
    let mut finals = Vec::new();
    let mut fits = Vec::new();
    for &r in &rs {
        let g0 = perturbed(&f0, r)?;
        let other = run_from(config, g0)?;
        let series = distance_series(&base, &other)?;
        let finite = series.iter().all(|(_, d)| d.is_finite());
        let d_end = series.last().map_or(0.0, |s| s.1);
        rep.push(CheckResult::new(&format!("distance_r{r:.0e}"), d_end, f64::INFINITY, finite));
        finals.push(d_end);
        if r > 0.0 {
            fits.push((r, envelope_fit(&series, r)));
        }
    }
    let monotone = finals.windows(2).all(|w| w[1] < w[0]);
    let worst = finals
        .windows(2)
        .map(|w| w[1] / w[0])
        .fold(0.0, f64::max);
    rep.push(CheckResult::new("ladder_ratio", worst, 1.0, monotone).with_note("distance at t_end, r decreasing"));
    if config.kernel.gamma == 0.0 && fits.len() >= 2 {
        let n = fits.len();
        let (a, b) = (fits[n - 2].1, fits[n - 1].1);
        let (pass, measured, note) = match (a, b) {
            (Some((k1, q1)), Some((k2, q2))) => {
                let ok_k = within_factor(k1, k2, 2.0);
                let ok_q = within_factor(q1, q2, 2.0) || (q1 - q2).abs() <= 0.1;
                (
                    ok_k && ok_q,
                    (k1 / k2).max(k2 / k1),
                    format!("K = {k1:.4e}, {k2:.4e}; K' = {q1:.4e}, {q2:.4e}"),
                )
            }
            _ => (false, f64::NAN, "envelope fit failed".to_string()),
        };
        rep.push(CheckResult::new("envelope_consistency", measured, 2.0, pass).with_note(note));
    }
    Ok(rep)
}

/// Capped-kernel runs against the uncapped one. `caps` may contain values
/// beyond the grid's relative-speed range, where the gap must vanish.
pub fn check_kernel_truncation(config: &SimulationConfig, caps: &[f64]) -> Result<VerificationReport> {
    let mut rep = VerificationReport::new("kernel_truncation", config.fingerprint());
    let mut full_cfg = config.clone();
    full_cfg.kernel.speed_cap = None;
    let full = run_simulation(&full_cfg)?;
    let mut sorted = caps.to_vec();
    sorted.sort_by(f64::total_cmp);
    let max_speed = config.velocity_grid()?.max_relative_speed();
    let inactive = max_speed.powf(config.kernel.gamma);
    let mut gaps = Vec::new();
    for &cap in &sorted {
        let mut cfg = config.clone();
        cfg.kernel.speed_cap = Some(cap);
        let run = run_simulation(&cfg)?;
        let gap = distance_series(&run, &full)?
            .iter()
            .map(|x| x.1)
            .fold(0.0, f64::max);
        if cap >= inactive {
            rep.push(CheckResult::at_most(&format!("gap_cap{cap}"), gap, 0.0).with_note("cap above grid speeds"));
        } else {
            rep.push(CheckResult::new(&format!("gap_cap{cap}"), gap, f64::INFINITY, gap.is_finite()));
        }
        gaps.push(gap);
    }
    let monotone = gaps.windows(2).all(|w| w[1] < w[0] || (w[1] == 0.0 && w[0] == 0.0));
    let worst = gaps
        .windows(2)
        .filter(|w| w[0] > 0.0)
        .map(|w| w[1] / w[0])
        .fold(0.0, f64::max);
    rep.push(CheckResult::new("gap_monotone", worst, 1.0, monotone).with_note(format!("caps {sorted:?}")));
    Ok(rep)
}

/// Names accepted by [`run_suite`].
pub const SUITES: [&str; 9] = [
    "conservation",
    "h_theorem",
    "moment_creation",
    "moment_ode_bound",
    "exponential_moment",
    "lower_bound_creation",
    "upper_envelopes",
    "stability",
    "kernel_truncation",
];

fn with_init(config: &SimulationConfig, kind: InitKind) -> SimulationConfig {
    let mut c = config.clone();
    c.init.kind = kind;
    c.output.dir = None;
    if c.output.snapshot_every == 0.0 {
        c.output.snapshot_every = 0.25 * c.time.t_end;
    }
    c
}

fn indicator(config: &SimulationConfig) -> SimulationConfig {
    let mut c = with_init(config, InitKind::Indicator);
    c.init.radius = 1.0;
    c.init.amplitude = 0.9;
    c
}

fn gaussian(config: &SimulationConfig) -> SimulationConfig {
    let mut c = with_init(config, InitKind::Gaussian);
    c.init.amplitude = 0.5;
    c.init.rate = 1.0;
    c
}

/// Runs one named suite with scenario data derived from `config`: indicator
/// data `0.9·1_{|v| ≤ 1}` for the dynamics checks and `½e^{-|v|²}` for the
/// upper envelopes.
pub fn run_suite(name: &str, config: &SimulationConfig) -> Result<VerificationReport> {
    let clock = Instant::now();
    let mut rep = match name {
        "conservation" => check_conservation(&run_simulation(&indicator(config))?),
        "h_theorem" => check_h_theorem(&run_simulation(&indicator(config))?),
        "moment_creation" => {
            let coarse = indicator(config);
            let mut fine = coarse.clone();
            fine.grid.n = coarse.grid.n + coarse.grid.n / 2;
            let a = run_simulation(&coarse)?;
            let b = run_simulation(&fine)?;
            check_moment_creation(&[&a, &b], 4.0, 0.1)
        }
        "moment_ode_bound" => check_moment_ode_bound(&config.operator()?, 20, 2.0, 2, BATTERY_SEED)?,
        "exponential_moment" => check_exponential_moment(&run_simulation(&indicator(config))?, 0.5)?,
        "lower_bound_creation" => {
            let c = indicator(config);
            check_lower_bound_creation(&run_simulation(&c)?, &c.operator()?, 1.0, 0.1)?
        }
        "upper_envelopes" => {
            let c = gaussian(config);
            let hs = c.kernel.angular_table.is_none();
            check_upper_envelopes(&run_simulation(&c)?, 1.0, 4.0, hs)
        }
        "stability" => check_stability(&indicator(config), &[1e-1, 1e-2, 1e-3])?,
        "kernel_truncation" => {
            let c = indicator(config);
            let top = 2.0 * c.velocity_grid()?.max_relative_speed().powf(c.kernel.gamma);
            check_kernel_truncation(&c, &[1.0, 2.0, 4.0, top])?
        }
        other => {
            return Err(crate::Error::InvalidParameter(format!(
                "unknown suite `{other}`; expected one of {SUITES:?} or all"
            )))
        }
    };
    rep.suite = name.to_string();
    rep.fingerprint = config.fingerprint();
    rep.runtime_secs = clock.elapsed().as_secs_f64();
    Ok(rep)
}

/// Every suite, each run independently.
pub fn run_all(config: &SimulationConfig) -> Result<Vec<VerificationReport>> {
    SUITES.iter().map(|s| run_suite(s, config)).collect()
}
