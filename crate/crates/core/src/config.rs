//! Sectioned simulation configuration.
//!
//! ```toml
//! [grid]
//! n = 16
//! radius = 6.0
//!
//! [kernel]
//! gamma = 1.0
//!
//! [time]
//! t_end = 1.0
//! cfl = 0.5
//!
//! [init]
//! kind = "indicator"
//! radius = 1.0
//! amplitude = 0.9
//! ```
//!
//! Overrides of the form `section.key=value` are applied to the parsed table
//! before validation, so they take precedence over the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::equilibrium::{fd_equilibrium, saturated_state, solve_fd_params, FermiDiracParams};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::{norm2, DistributionField, Vec3, VelocityGrid};
use crate::kernel::{AngularLaw, CollisionKernel, SphereQuadrature, DEFAULT_B0};
use crate::operator::CollisionOperator;
use crate::snapshot::read_snapshot;

/// Upper bound on adaptive time steps, also the step used for a field with
/// zero collision frequency.
pub const DEFAULT_DT_MAX: f64 = 0.05;

/// Environment variable consulted when `time.threads` is 0.
pub const THREADS_ENV: &str = "BFD_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub grid: GridConfig,
    pub kernel: KernelConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_b0")]
    pub b0: f64,
    /// Two-column `cos value` file replacing the constant angular law.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angular_table: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_b_lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default = "default_n_theta")]
    pub n_theta: usize,
    #[serde(default = "default_n_phi")]
    pub n_phi: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    /// Fixed step; when absent the step follows `cfl / max Q̄₁`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    #[serde(default = "default_true")]
    pub projection: bool,
    #[serde(default)]
    pub threads: usize,
    #[serde(default)]
    pub exec: Exec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    /// `amplitude` on `|v| ≤ radius`.
    Indicator,
    /// `amplitude·exp(-rate|v - u|²)`.
    Gaussian,
    /// Fermi–Dirac state from `(a, c)` or from `(rho, temperature)`.
    Equilibrium,
    /// Saturated ball of density `rho`.
    Saturated,
    Snapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    #[serde(default = "default_kind")]
    pub kind: InitKind,
    #[serde(default = "default_one")]
    pub radius: f64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_one")]
    pub rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default)]
    pub u: Vec3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Time between stored snapshots; 0 keeps only the first and last.
    #[serde(default)]
    pub snapshot_every: f64,
    /// Steps between diagnostics rows.
    #[serde(default = "default_one_usize")]
    pub diagnostics_every: usize,
    /// Steps between entropy production evaluations; 0 disables them.
    #[serde(default = "default_one_usize")]
    pub production_every: usize,
    #[serde(default = "default_moments")]
    pub moments: Vec<f64>,
}

fn default_gamma() -> f64 {
    1.0
}
fn default_b0() -> f64 {
    DEFAULT_B0
}
fn default_n_theta() -> usize {
    8
}
fn default_n_phi() -> usize {
    16
}
fn default_t_end() -> f64 {
    1.0
}
fn default_cfl() -> f64 {
    0.5
}
fn default_dt_max() -> f64 {
    DEFAULT_DT_MAX
}
fn default_true() -> bool {
    true
}
fn default_kind() -> InitKind {
    InitKind::Indicator
}
fn default_one() -> f64 {
    1.0
}
fn default_one_usize() -> usize {
    1
}
fn default_amplitude() -> f64 {
    0.9
}
fn default_moments() -> Vec<f64> {
    vec![2.0, 4.0, 6.0]
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            t_end: default_t_end(),
            dt: None,
            cfl: default_cfl(),
            dt_max: DEFAULT_DT_MAX,
            projection: true,
            threads: 0,
            exec: Exec::default(),
        }
    }
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            kind: InitKind::Indicator,
            radius: 1.0,
            amplitude: default_amplitude(),
            rate: 1.0,
            rho: None,
            temperature: None,
            a: None,
            c: None,
            u: [0.0; 3],
            path: None,
        }
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            snapshot_every: 0.0,
            diagnostics_every: 1,
            production_every: 1,
            moments: default_moments(),
        }
    }
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            b0: DEFAULT_B0,
            angular_table: None,
            speed_cap: None,
            c_b_lower: None,
            alpha: None,
            n_theta: default_n_theta(),
            n_phi: default_n_phi(),
        }
    }
}

fn invalid(key: &str, message: impl Into<String>) -> Error {
    Error::ConfigValidation {
        key: key.to_string(),
        message: message.into(),
    }
}

impl SimulationConfig {
    /// Config with defaults everywhere except the grid.
    pub fn new(n: usize, radius: f64) -> Self {
        Self {
            grid: GridConfig { n, radius },
            kernel: KernelConfig::default(),
            time: TimeConfig::default(),
            init: InitConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::ConfigParse(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.n < 4 {
            return Err(invalid("grid.n", "need at least 4 nodes per axis"));
        }
        if !(g.radius > 0.0 && g.radius.is_finite()) {
            return Err(invalid("grid.radius", "must be positive"));
        }
        let k = &self.kernel;
        if !(0.0..=2.0).contains(&k.gamma) {
            return Err(invalid("kernel.gamma", format!("{} is outside [0, 2]", k.gamma)));
        }
        if !(k.b0 > 0.0 && k.b0.is_finite()) {
            return Err(invalid("kernel.b0", "must be positive"));
        }
        if let Some(c) = k.speed_cap {
            if !(c > 0.0) {
                return Err(invalid("kernel.speed_cap", "must be positive"));
            }
        }
        if k.n_theta == 0 {
            return Err(invalid("kernel.n_theta", "must be positive"));
        }
        if k.n_phi < 2 || k.n_phi % 2 != 0 {
            return Err(invalid("kernel.n_phi", "must be even and at least 2"));
        }
        let t = &self.time;
        if !(t.t_end >= 0.0 && t.t_end.is_finite()) {
            return Err(invalid("time.t_end", "must be nonnegative"));
        }
        if let Some(dt) = t.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(invalid("time.dt", "must be positive"));
            }
        }
        if !(t.cfl > 0.0 && t.cfl <= 1.0) {
            return Err(invalid("time.cfl", "must lie in (0, 1]"));
        }
        if !(t.dt_max > 0.0) {
            return Err(invalid("time.dt_max", "must be positive"));
        }
        let i = &self.init;
        match i.kind {
            InitKind::Indicator => {
                if !(i.radius > 0.0) {
                    return Err(invalid("init.radius", "must be positive"));
                }
                if !(0.0..=1.0).contains(&i.amplitude) {
                    return Err(invalid("init.amplitude", "must lie in [0, 1]"));
                }
            }
            InitKind::Gaussian => {
                if !(0.0..=1.0).contains(&i.amplitude) {
                    return Err(invalid("init.amplitude", "must lie in [0, 1]"));
                }
                if !(i.rate > 0.0) {
                    return Err(invalid("init.rate", "must be positive"));
                }
            }
            InitKind::Equilibrium => {
                let by_ac = i.a.is_some() && i.c.is_some();
                let by_moments = i.rho.is_some() && i.temperature.is_some();
                if !by_ac && !by_moments {
                    return Err(invalid("init.a", "equilibrium needs (a, c) or (rho, temperature)"));
                }
                if by_ac && !(i.a.unwrap_or(0.0) > 0.0) {
                    return Err(invalid("init.a", "must be positive"));
                }
            }
            InitKind::Saturated => {
                if !(i.rho.unwrap_or(1.0) > 0.0) {
                    return Err(invalid("init.rho", "must be positive"));
                }
            }
            InitKind::Snapshot => {
                if i.path.is_none() {
                    return Err(invalid("init.path", "snapshot initial data needs a path"));
                }
            }
        }
        let o = &self.output;
        if !(o.snapshot_every >= 0.0) {
            return Err(invalid("output.snapshot_every", "must be nonnegative"));
        }
        if o.diagnostics_every == 0 {
            return Err(invalid("output.diagnostics_every", "must be positive"));
        }
        Ok(())
    }

    pub fn velocity_grid(&self) -> Result<VelocityGrid> {
        VelocityGrid::new(self.grid.n, self.grid.radius)
    }

    pub fn collision_kernel(&self) -> Result<CollisionKernel> {
        let k = &self.kernel;
        let law = match &k.angular_table {
            Some(p) => AngularLaw::from_table_file(p)?,
            None => AngularLaw::Constant(k.b0),
        };
        CollisionKernel::new(k.gamma, law)?
            .with_speed_cap(k.speed_cap)?
            .with_lower_bound(k.c_b_lower)?
            .with_alpha(k.alpha)
    }

    pub fn quadrature(&self) -> Result<SphereQuadrature> {
        SphereQuadrature::new(self.kernel.n_theta, self.kernel.n_phi)
    }

    pub fn operator(&self) -> Result<CollisionOperator> {
        Ok(CollisionOperator::new(self.velocity_grid()?, self.collision_kernel()?, self.quadrature()?)
            .with_exec(self.time.exec))
    }

    /// Worker count from `time.threads`, falling back to `BFD_THREADS`; 0
    /// means automatic.
    pub fn threads(&self) -> usize {
        if self.time.threads > 0 {
            return self.time.threads;
        }
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|s| s.trim().parse().ok())
            .unwrap_or(0)
    }

    pub fn initial_field(&self) -> Result<DistributionField> {
        let grid = self.velocity_grid()?;
        let i = &self.init;
        match i.kind {
            InitKind::Indicator => {
                let (r2, amp) = (i.radius * i.radius, i.amplitude);
                let u = i.u;
                DistributionField::from_fn(grid, |v| {
                    let w = [v[0] - u[0], v[1] - u[1], v[2] - u[2]];
                    if norm2(w) <= r2 * (1.0 + 1e-12) {
                        amp
                    } else {
                        0.0
                    }
                })
            }
            InitKind::Gaussian => {
                let u = i.u;
                DistributionField::from_fn(grid, |v| {
                    i.amplitude * (-i.rate * norm2([v[0] - u[0], v[1] - u[1], v[2] - u[2]])).exp()
                })
            }
            InitKind::Equilibrium => {
                let params = match (i.a, i.c) {
                    (Some(a), Some(c)) => FermiDiracParams { a, c, u: i.u },
                    _ => solve_fd_params(
                        i.rho.unwrap_or_default(),
                        i.temperature.unwrap_or_default(),
                        i.u,
                    )?,
                };
                fd_equilibrium(&grid, &params)
            }
            InitKind::Saturated => {
                let rho = i.rho.unwrap_or(4.0 * std::f64::consts::PI / 3.0);
                Ok(saturated_state(&grid, rho, i.u)?.field)
            }
            InitKind::Snapshot => {
                let path = i.path.as_deref().unwrap_or(Path::new(""));
                let snap = read_snapshot(path)?;
                if !snap.field.grid().same_lattice(&grid) {
                    return Err(Error::GridMismatch(format!(
                        "snapshot {} does not match the configured grid",
                        path.display()
                    )));
                }
                Ok(snap.field)
            }
        }
    }

    /// Effective configuration as TOML, defaults included.
    pub fn echo(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    /// FNV-1a hash of [`echo`](Self::echo).
    pub fn fingerprint(&self) -> u64 {
        self.echo().bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
            (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
        })
    }
}

/// Reads and validates a config file, then applies `section.key=value`
/// overrides.
pub fn parse_config(path: &Path, overrides: &[String]) -> Result<SimulationConfig> {
    let text = std::fs::read_to_string(path)?;
    SimulationConfig::from_toml_str(&text, overrides)
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::ConfigParse(format!("override `{spec}` is not key=value")))?;
    let key = key.trim();
    let (section, field) = key
        .split_once('.')
        .ok_or_else(|| Error::ConfigParse(format!("override key `{key}` is not section.key")))?;
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match entry {
        toml::Value::Table(t) => {
            t.insert(field.to_string(), value);
            Ok(())
        }
        _ => Err(Error::ConfigParse(format!("`{section}` is not a section"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[grid]\nn = 16\nradius = 6\n[kernel]\ngamma = 1\n";

    #[test]
    fn defaults_fill_in() {
        let c = SimulationConfig::from_toml_str(MINIMAL, &[]).unwrap();
        assert_eq!(c.kernel.b0, DEFAULT_B0);
        assert_eq!(c.time.cfl, 0.5);
        assert_eq!(c.time.t_end, 1.0);
        assert!(c.time.projection);
        assert_eq!(c.grid.radius, 6.0);
    }

    #[test]
    fn gamma_out_of_range_names_key() {
        let err = SimulationConfig::from_toml_str(MINIMAL, &["kernel.gamma=3".into()]).unwrap_err();
        assert!(err.to_string().contains("kernel.gamma"), "{err}");
    }

    #[test]
    fn overrides_win() {
        let text = format!("{MINIMAL}[time]\nt_end = 0.5\n");
        let c = SimulationConfig::from_toml_str(&text, &["time.t_end=2".into(), "init.kind=gaussian".into()])
            .unwrap();
        assert_eq!(c.time.t_end, 2.0);
        assert_eq!(c.init.kind, InitKind::Gaussian);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{MINIMAL}[time]\nbogus = 1\n");
        assert!(matches!(
            SimulationConfig::from_toml_str(&text, &[]),
            Err(Error::ConfigParse(_))
        ));
    }

    #[test]
    fn parse_errors_carry_line() {
        let err = SimulationConfig::from_toml_str("[grid]\nn = = 3\n", &[]).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn echo_round_trips() {
        let c = SimulationConfig::from_toml_str(MINIMAL, &["kernel.speed_cap=2.5".into()]).unwrap();
        let back = SimulationConfig::from_toml_str(&c.echo(), &[]).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.fingerprint(), back.fingerprint());
    }
}
