//! TOML run configuration.
//!
//! ```toml
//! format_version = 1
//!
//! [plant]
//! n_p = 4                 # number of plant variables, even
//! r_p = [ ... ]           # n_p × n_p, row-major
//! m = 1                   # number of outputs
//! c_p = [ ... ]           # m × n_p, row-major
//! # or, instead of c_p:
//! # c_p2_tilde = [ ... ]  # m × n_p2, output in transformed coordinates
//!
//! [observer]              # optional
//! omega = 1.0
//! r_o = [ ... ]           # n_o × n_o
//! c_o = [ ... ]           # m × n_o
//! beta = [ ... ]          # n_o × m
//! decoupled = false       # drop the plant coupling
//!
//! [simulation]
//! t_end = 100.0
//! dt = 0.01
//!
//! [analysis]
//! tol = 1e-9
//! ```
//!
//! `n_o` is `m` for even `m` and `m + 1` otherwise.

use std::fmt;
use std::path::Path;

use qobserver_core::simulate::{DEFAULT_DT, DEFAULT_T_END};
use qobserver_core::{
    decompose_plant, decompose_transformed, estimable_basis, observer_order, CommutationMatrix,
    DecomposedPlant, Mat, ObserverOptions, QuantumLinearSystem, TOL_COND,
};
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub format_version: u32,
    pub plant: PlantConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observer: Option<ObserverConfig>,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub n_p: usize,
    pub r_p: Vec<f64>,
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_p: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_p2_tilde: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_o: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_o: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    #[serde(default)]
    pub decoupled: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

/// Command-line overrides; they take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq, clap::Args)]
pub struct Overrides {
    /// Simulation horizon
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Time step
    #[arg(long)]
    pub dt: Option<f64>,
    /// Scale of the default observer Hamiltonian `R_o = ωI`
    #[arg(long)]
    pub omega: Option<f64>,
    /// Tolerance for the plant conditions
    #[arg(long)]
    pub tol: Option<f64>,
}

/// Effective settings after applying defaults, config and overrides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub t_end: f64,
    pub dt: f64,
    pub omega: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// Dotted field path, or the flag name for overrides.
    pub field: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: Some(field.into()),
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, &self.field) {
            (Some(line), Some(field)) => write!(f, "line {line}, `{field}`: {}", self.message),
            (None, Some(field)) => write!(f, "`{field}`: {}", self.message),
            (Some(line), None) => write!(f, "line {line}: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

impl Config {
    /// Parses and validates; errors carry the offending line where known.
    pub fn from_toml_str(source: &str) -> Result<Self> {
        let config: Config = toml::from_str(source).map_err(|e| ConfigError {
            field: None,
            line: e.span().map(|s| line_of(source, s.start)),
            message: e.message().trim().to_string(),
        })?;
        config.validate().map_err(|mut e| {
            if let Some(field) = &e.field {
                e.line = locate(source, field);
            }
            e
        })?;
        Ok(config)
    }

    pub fn load(path: &Path) -> std::io::Result<std::result::Result<Self, ConfigError>> {
        let source = std::fs::read_to_string(path)?;
        Ok(Self::from_toml_str(&source))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable in TOML")
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(ConfigError::field(
                "format_version",
                format!(
                    "unsupported version {}, expected {FORMAT_VERSION}",
                    self.format_version
                ),
            ));
        }
        let p = &self.plant;
        if p.n_p == 0 || p.n_p % 2 == 1 {
            return Err(ConfigError::field(
                "plant.n_p",
                format!("must be a positive even number, got {}", p.n_p),
            ));
        }
        if p.m == 0 {
            return Err(ConfigError::field("plant.m", "must be at least 1"));
        }
        expect_len("plant.r_p", &p.r_p, p.n_p * p.n_p, "n_p × n_p")?;
        match (&p.c_p, &p.c_p2_tilde) {
            (Some(c), None) => expect_len("plant.c_p", c, p.m * p.n_p, "m × n_p")?,
            (None, Some(c)) => expect_finite("plant.c_p2_tilde", c)?,
            (Some(_), Some(_)) => {
                return Err(ConfigError::field(
                    "plant.c_p2_tilde",
                    "give either c_p or c_p2_tilde, not both",
                ))
            }
            (None, None) => {
                return Err(ConfigError::field(
                    "plant",
                    "missing output matrix c_p or c_p2_tilde",
                ))
            }
        }
        self.decompose()?;

        if let Some(o) = &self.observer {
            let n_o = observer_order(p.m);
            if let Some(omega) = o.omega {
                positive("observer.omega", omega)?;
            }
            if let Some(v) = &o.r_o {
                expect_len("observer.r_o", v, n_o * n_o, "n_o × n_o")?;
            }
            if let Some(v) = &o.c_o {
                expect_len("observer.c_o", v, p.m * n_o, "m × n_o")?;
            }
            if let Some(v) = &o.beta {
                expect_len("observer.beta", v, n_o * p.m, "n_o × m")?;
            }
        }
        if let Some(t) = self.simulation.t_end {
            positive("simulation.t_end", t)?;
        }
        if let Some(dt) = self.simulation.dt {
            positive("simulation.dt", dt)?;
        }
        if let Some(tol) = self.analysis.tol {
            positive("analysis.tol", tol)?;
        }
        Ok(())
    }

    pub fn settings(&self, o: &Overrides) -> Result<Settings> {
        let pick = |flag: &str, cli: Option<f64>, file: Option<f64>, default: f64| match cli {
            Some(v) => positive(flag, v),
            None => Ok(file.unwrap_or(default)),
        };
        let omega_file = self.observer.as_ref().and_then(|o| o.omega);
        let s = Settings {
            t_end: pick("--t-end", o.t_end, self.simulation.t_end, DEFAULT_T_END)?,
            dt: pick("--dt", o.dt, self.simulation.dt, DEFAULT_DT)?,
            omega: pick("--omega", o.omega, omega_file, 1.0)?,
            tol: pick("--tol", o.tol, self.analysis.tol, TOL_COND)?,
        };
        if s.dt > s.t_end {
            return Err(ConfigError::field(
                "simulation.dt",
                format!("step {} exceeds horizon {}", s.dt, s.t_end),
            ));
        }
        Ok(s)
    }

    /// The plant and its decomposition. With `c_p2_tilde` the transformed
    /// output is kept exactly as written.
    pub fn decompose(&self) -> Result<DecomposedPlant> {
        let p = &self.plant;
        let r = Mat::from_row_slice(p.n_p, p.n_p, &p.r_p);
        fn core(field: &'static str) -> impl Fn(qobserver_core::Error) -> ConfigError {
            move |e| ConfigError::field(field, e.to_string())
        }
        match (&p.c_p, &p.c_p2_tilde) {
            (Some(c), _) => {
                let c = Mat::from_row_slice(p.m, p.n_p, c);
                let plant = QuantumLinearSystem::new(r, c).map_err(core("plant.r_p"))?;
                decompose_plant(&plant).map_err(core("plant"))
            }
            (None, Some(c)) => {
                let theta = CommutationMatrix::for_dimension(p.n_p).map_err(core("plant.n_p"))?;
                QuantumLinearSystem::with_theta(theta.clone(), r.clone(), Mat::zeros(1, p.n_p))
                    .map_err(core("plant.r_p"))?;
                let n_p2 = estimable_basis(&theta, &r)
                    .map_err(core("plant.r_p"))?
                    .n_p2();
                if n_p2 == 0 || c.len() != p.m * n_p2 {
                    return Err(ConfigError::field(
                        "plant.c_p2_tilde",
                        format!(
                            "expected m × n_p2 = {} × {n_p2} = {} values (n_p2 follows from r_p), got {}",
                            p.m,
                            p.m * n_p2,
                            c.len()
                        ),
                    ));
                }
                let c = Mat::from_row_slice(p.m, n_p2, c);
                decompose_transformed(&theta, &r, &c).map_err(core("plant"))
            }
            (None, None) => Err(ConfigError::field("plant", "missing output matrix")),
        }
    }

    pub fn observer_options(&self, settings: &Settings) -> ObserverOptions {
        let n_o = observer_order(self.plant.m);
        let m = self.plant.m;
        let o = self.observer.clone().unwrap_or_default();
        ObserverOptions {
            omega: settings.omega,
            r_o: o.r_o.map(|v| Mat::from_row_slice(n_o, n_o, &v)),
            c_o: o.c_o.map(|v| Mat::from_row_slice(m, n_o, &v)),
            beta: o.beta.map(|v| Mat::from_row_slice(n_o, m, &v)),
            tol_cond: settings.tol,
        }
    }

    pub fn decoupled(&self) -> bool {
        self.observer.as_ref().is_some_and(|o| o.decoupled)
    }
}

fn expect_finite(field: &str, v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(ConfigError::field(
            field,
            format!("entry {i} is not finite"),
        )),
        None => Ok(()),
    }
}

fn expect_len(field: &str, v: &[f64], len: usize, shape: &str) -> Result<()> {
    if v.len() != len {
        return Err(ConfigError::field(
            field,
            format!("expected {shape} = {len} values, got {}", v.len()),
        ));
    }
    expect_finite(field, v)
}

fn positive(field: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::field(
            field,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

fn line_of(source: &str, offset: usize) -> usize {
    source[..offset.min(source.len())].matches('\n').count() + 1
}

/// Line of `key` inside `[section]` for a dotted `section.key` path.
fn locate(source: &str, field: &str) -> Option<usize> {
    let (section, key) = match field.split_once('.') {
        Some((s, k)) => (Some(s), k),
        None => (None, field),
    };
    let mut current: Option<&str> = None;
    for (i, line) in source.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = Some(name.trim());
            if section == Some(name.trim()) && key.is_empty() {
                return Some(i + 1);
            }
            continue;
        }
        let Some((lhs, _)) = t.split_once('=') else {
            continue;
        };
        if current == section && lhs.trim() == key {
            return Some(i + 1);
        }
    }
    section
        .or(Some(key))
        .and_then(|s| source.lines().position(|l| l.trim() == format!("[{s}]")))
        .map(|i| i + 1)
}
