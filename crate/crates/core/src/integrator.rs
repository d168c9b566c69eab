//! Exponential time stepping with conservation repair.
//!
//! With `g = Q₁(f, f, 1-f)` and `L = Q̄₁` frozen over a step,
//!
//! ```text
//! f⁺ = f·e^{-L dt} + (1 - e^{-L dt})·g/L
//! ```
//!
//! Since `0 ≤ g ≤ L`, `f⁺` is a convex combination of `f` and `g/L`, both in
//! `[0, 1]`. The result is then shifted in logit space along the collision
//! invariants so that mass, momentum and energy match the previous state.

use std::path::Path;

pub use crate::config::SimulationConfig;
use crate::config::DEFAULT_DT_MAX;
use crate::diagnostics::{DiagnosticsRecord, FLAG_REPAIR_FAILED};
use crate::error::Result;
use crate::exec::configure_threads;
use crate::grid::{DistributionField, VelocityGrid};
use crate::operator::{
    conservative_projection, entropic_projection, invariant_defects, CollisionOperator, CollisionRates,
    Production,
};
use crate::snapshot::write_snapshot;

const SERIES_THRESHOLD: f64 = 1e-8;
const REPAIR_TOL: f64 = 1e-10;
const REPAIR_ROUNDS: usize = 5;
const NEWTON_TOL: f64 = 1e-14;
/// Rounding slack tolerated on the bound check before clamping.
const BOUND_SLACK: f64 = 8.0 * f64::EPSILON;

/// Result of one time step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub field: DistributionField,
    /// Extremes of the exponential update before conservation repair.
    pub raw_min: f64,
    pub raw_max: f64,
    pub repair_rounds: usize,
    pub repair_failed: bool,
}

/// `f·e^{-L dt} + (1 - e^{-L dt})·g/L` per node, without repair.
pub fn exponential_update(values: &[f64], rates: &CollisionRates, dt: f64) -> Vec<f64> {
    values
        .iter()
        .zip(rates.gain.iter().zip(&rates.total_freq))
        .map(|(&f, (&g, &l))| {
            let l = l.max(0.0);
            let g = g.clamp(0.0, l);
            let x = l * dt;
            if x < SERIES_THRESHOLD {
                // (1 - e^{-x})/L ≈ dt(1 - x/2)
                f * (-x).exp() + g * dt * (1.0 - 0.5 * x)
            } else {
                let decay = (-x).exp();
                let r = g / l;
                r + (f - r) * decay
            }
        })
        .collect()
}

/// Relative size of the invariant defects of `q`, scaled by mass, `√(ρE)` and
/// energy of `reference`.
pub fn relative_defect(q: &[f64], reference: &[f64], grid: &VelocityGrid) -> f64 {
    let d = invariant_defects(q, grid);
    let r = invariant_defects(reference, grid);
    let mass = r[0].abs().max(f64::MIN_POSITIVE);
    let energy = r[4].abs().max(f64::MIN_POSITIVE);
    let mom = (mass * energy).sqrt();
    (d[0].abs() / mass)
        .max(d[1].abs() / mom)
        .max(d[2].abs() / mom)
        .max(d[3].abs() / mom)
        .max(d[4].abs() / energy)
}

/// Projection of the increment followed by clamping, repeated while the
/// clamp breaks conservation.
fn linear_repair(mut cur: Vec<f64>, old: &[f64], grid: &VelocityGrid) -> Result<(Vec<f64>, usize, bool)> {
    let mut rounds = 0;
    loop {
        let inc: Vec<f64> = cur.iter().zip(old).map(|(a, b)| a - b).collect();
        if relative_defect(&inc, old, grid) <= REPAIR_TOL {
            return Ok((cur, rounds, false));
        }
        if rounds == REPAIR_ROUNDS {
            return Ok((cur, rounds, true));
        }
        rounds += 1;
        let fixed = conservative_projection(&inc, grid)?;
        cur = fixed.iter().zip(old).map(|(d, b)| (b + d).clamp(0.0, 1.0)).collect();
    }
}

/// Advances `f` by `dt` using precomputed rates of `f`.
pub fn advance(
    f: &DistributionField,
    rates: &CollisionRates,
    dt: f64,
    projection: bool,
) -> Result<StepOutcome> {
    let grid = *f.grid();
    let raw = exponential_update(f.values(), rates, dt);
    let raw_min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let raw_max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(
        raw_min >= -BOUND_SLACK && raw_max <= 1.0 + BOUND_SLACK,
        "exponential update left [0, 1]: [{raw_min}, {raw_max}]"
    );
    if !projection {
        return Ok(StepOutcome {
            field: DistributionField::from_clamped(grid, raw, f.exterior()),
            raw_min,
            raw_max,
            repair_rounds: 0,
            repair_failed: false,
        });
    }
    let old = f.values();
    let target = invariant_defects(old, &grid);
    let clamped: Vec<f64> = raw.iter().map(|x| x.clamp(0.0, 1.0)).collect();
    let (cur, rounds, failed) = match entropic_projection(&clamped, target, &grid, NEWTON_TOL) {
        Ok((v, it, defect)) if defect <= REPAIR_TOL => (v, it, false),
        _ => linear_repair(clamped, old, &grid)?,
    };
    Ok(StepOutcome {
        field: DistributionField::from_clamped(grid, cur, f.exterior()),
        raw_min,
        raw_max,
        repair_rounds: rounds,
        repair_failed: failed,
    })
}

/// One exponential step of size `dt` from `f`.
pub fn step_exponential(
    f: &DistributionField,
    dt: f64,
    op: &CollisionOperator,
    projection: bool,
) -> Result<StepOutcome> {
    if dt == 0.0 {
        return Ok(StepOutcome {
            field: f.clone(),
            raw_min: f.min_value(),
            raw_max: f.max_value(),
            repair_rounds: 0,
            repair_failed: false,
        });
    }
    let rates = op.rates(f)?;
    advance(f, &rates, dt, projection)
}

/// Time-step rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtPolicy {
    Fixed(f64),
    /// `cfl / max Q̄₁`, capped by `dt_max`.
    Cfl { cfl: f64, dt_max: f64 },
}

impl DtPolicy {
    pub fn from_config(config: &SimulationConfig) -> Self {
        match config.time.dt {
            Some(dt) => Self::Fixed(dt),
            None => Self::Cfl {
                cfl: config.time.cfl,
                dt_max: config.time.dt_max,
            },
        }
    }
}

impl Default for DtPolicy {
    fn default() -> Self {
        Self::Cfl {
            cfl: 0.5,
            dt_max: DEFAULT_DT_MAX,
        }
    }
}

/// Step size for the collision frequency `total_freq`.
pub fn choose_dt(total_freq: &[f64], policy: DtPolicy) -> f64 {
    match policy {
        DtPolicy::Fixed(dt) => dt,
        DtPolicy::Cfl { cfl, dt_max } => {
            let lmax = total_freq.iter().copied().fold(0.0, f64::max);
            if lmax > 0.0 {
                (cfl / lmax).min(dt_max)
            } else {
                dt_max
            }
        }
    }
}

/// Stored states and diagnostics of one run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<(f64, DistributionField)>,
    pub records: Vec<DiagnosticsRecord>,
    /// Extremes of the pre-repair update over all steps.
    pub raw_min: f64,
    pub raw_max: f64,
    pub steps: usize,
    pub gamma: f64,
    pub projection: bool,
}

impl Trajectory {
    pub fn initial(&self) -> &DistributionField {
        &self.snapshots[0].1
    }

    pub fn last(&self) -> &DistributionField {
        &self.snapshots[self.snapshots.len() - 1].1
    }

    /// Snapshot stored closest to `t`.
    pub fn at(&self, t: f64) -> &DistributionField {
        &self
            .snapshots
            .iter()
            .min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs()))
            .expect("trajectory holds at least one snapshot")
            .1
    }
}

/// Integrates the configured initial data to `t_end`.
pub fn run_simulation(config: &SimulationConfig) -> Result<Trajectory> {
    let f0 = config.initial_field()?;
    run_from(config, f0)
}

/// Integrates `f0` with the kernel, grid and cadence of `config`.
pub fn run_from(config: &SimulationConfig, f0: DistributionField) -> Result<Trajectory> {
    config.validate()?;
    configure_threads(config.threads());
    let op = config.operator()?;
    let policy = DtPolicy::from_config(config);
    let out = &config.output;
    let t_end = config.time.t_end;
    let orders = &out.moments;
    let mut f = f0;
    let mut t = 0.0;
    let mut step = 0usize;
    let mut traj = Trajectory {
        snapshots: vec![(0.0, f.clone())],
        records: Vec::new(),
        raw_min: f.min_value(),
        raw_max: f.max_value(),
        steps: 0,
        gamma: config.kernel.gamma,
        projection: config.time.projection,
    };
    let mut next_snap = if out.snapshot_every > 0.0 { out.snapshot_every } else { f64::INFINITY };
    let eps = 1e-12 * t_end.max(1.0);

    if t_end <= 0.0 {
        let prod = if out.production_every > 0 {
            Some(op.entropy_production(&f)?)
        } else {
            None
        };
        traj.records.push(DiagnosticsRecord::compute(&f, 0.0, orders, prod.as_ref()));
        return finish(config, traj);
    }

    let mut pending_flag = false;
    loop {
        let record = step % out.diagnostics_every == 0;
        let with_prod = record && out.production_every > 0 && step % out.production_every == 0;
        let (rates, prod): (CollisionRates, Option<Production>) = if with_prod {
            let (r, p) = op.rates_with_production(&f)?;
            (r, Some(p))
        } else {
            (op.rates(&f)?, None)
        };
        if record {
            let mut rec = DiagnosticsRecord::compute(&f, t, orders, prod.as_ref());
            if pending_flag {
                rec.flags.push(FLAG_REPAIR_FAILED.to_string());
                pending_flag = false;
            }
            traj.records.push(rec);
        }
        if t >= t_end - eps {
            break;
        }
        let mut dt = choose_dt(&rates.total_freq, policy);
        let target = next_snap.min(t_end);
        let mut landed = false;
        if t + dt >= target - eps {
            dt = target - t;
            landed = true;
        }
        let st = advance(&f, &rates, dt, config.time.projection)?;
        traj.raw_min = traj.raw_min.min(st.raw_min);
        traj.raw_max = traj.raw_max.max(st.raw_max);
        pending_flag |= st.repair_failed;
        f = st.field;
        t = if landed { target } else { t + dt };
        step += 1;
        if landed && target < t_end {
            traj.snapshots.push((t, f.clone()));
            next_snap += out.snapshot_every;
        }
        if t >= t_end - eps && step % out.diagnostics_every != 0 {
            // always close the series at t_end
            let prod = if out.production_every > 0 {
                Some(op.entropy_production(&f)?)
            } else {
                None
            };
            let mut rec = DiagnosticsRecord::compute(&f, t, orders, prod.as_ref());
            if pending_flag {
                rec.flags.push(FLAG_REPAIR_FAILED.to_string());
            }
            traj.records.push(rec);
            break;
        }
    }
    traj.steps = step;
    if step > 0 {
        traj.snapshots.push((t, f));
    }
    finish(config, traj)
}

fn finish(config: &SimulationConfig, traj: Trajectory) -> Result<Trajectory> {
    if let Some(dir) = &config.output.dir {
        write_outputs(dir, config, &traj)?;
    }
    Ok(traj)
}

/// Writes `config.toml`, `diagnostics.csv` and one `snap_NNNN.bin` per
/// stored state into `dir`.
pub fn write_outputs(dir: &Path, config: &SimulationConfig, traj: &Trajectory) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), config.echo())?;
    let csv = std::fs::File::create(dir.join("diagnostics.csv"))?;
    crate::diagnostics::write_csv(std::io::BufWriter::new(csv), &traj.records)?;
    for (k, (t, f)) in traj.snapshots.iter().enumerate() {
        write_snapshot(&dir.join(format!("snap_{k:04}.bin")), f, traj.gamma, *t)?;
    }
    Ok(())
}
