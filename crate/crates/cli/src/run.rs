//! The analyze → synthesize → simulate pipeline behind each subcommand.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use qobserver_core::linalg::{eigenvalues, symmetric_eigenvalues};
use qobserver_core::reference::expected_transformed_coupling;
use qobserver_core::synthesis::TOL_OUTPUT_IDENTITY;
use qobserver_core::{
    assemble_augmented, check_plant_conditions_with_tol, max_shared_deviation, ode_oracle,
    propagate, synthesize_observer, time_average_error, uniform_grid, AugmentedSystem,
    ConditionReport, ConvergenceCriteria, ConvergenceReport, DecomposedPlant, Mat, ObserverDesign,
    TrajectoryRecord,
};
use serde::{Deserialize, Serialize};

use crate::config::{Config, ConfigError, Overrides, Settings};
use crate::output::{self, CsvError};

pub const SIX_MODE_CONFIG: &str = include_str!("../configs/six_mode.toml");

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Config { path: PathBuf, source: ConfigError },
    #[error("{0}")]
    Settings(ConfigError),
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: CsvError },
    #[error(transparent)]
    Core(#[from] qobserver_core::Error),
}

impl RunError {
    /// 1 when the plant fails the observer conditions, 2 for bad input.
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Core(
                qobserver_core::Error::ConditionsFailed(_)
                | qobserver_core::Error::NothingEstimable,
            ) => 1,
            _ => 2,
        }
    }
}

type Result<T> = std::result::Result<T, RunError>;

/// Row-major matrix as stored in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixData {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&Mat> for MatrixData {
    fn from(m: &Mat) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: qobserver_core::linalg::to_row_major(m),
        }
    }
}

impl MatrixData {
    pub fn to_matrix(&self) -> Mat {
        Mat::from_row_slice(self.rows, self.cols, &self.data)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionSummary {
    pub n_p1: usize,
    pub n_p2: usize,
    pub controllable: bool,
    pub r_p11_eigenvalues: Vec<f64>,
    /// `[re, im]` pairs; absent if the eigenvalue iteration did not converge.
    pub theta11_spectrum: Option<Vec<[f64; 2]>>,
    pub theta22_spectrum: Option<Vec<[f64; 2]>>,
    pub c_p: MatrixData,
    pub c_p2_tilde: MatrixData,
    pub orthogonality_residual: f64,
    pub theta_coupling_residual: f64,
    pub hamiltonian_residual: f64,
    pub output_residual: f64,
}

impl From<&DecomposedPlant> for DecompositionSummary {
    fn from(dec: &DecomposedPlant) -> Self {
        let spectrum =
            |m: &Mat| eigenvalues(m).map(|ev| ev.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>());
        Self {
            n_p1: dec.n_p1,
            n_p2: dec.n_p2,
            controllable: dec.controllable,
            r_p11_eigenvalues: symmetric_eigenvalues(&dec.r_p11),
            theta11_spectrum: spectrum(&dec.theta11),
            theta22_spectrum: spectrum(&dec.theta22),
            c_p: dec.source.c().into(),
            c_p2_tilde: (&dec.c_p2_tilde).into(),
            orthogonality_residual: dec.residuals.orthogonality,
            theta_coupling_residual: dec.residuals.theta_coupling,
            hamiltonian_residual: dec.residuals.hamiltonian_structure,
            output_residual: dec.residuals.output_structure,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverSummary {
    pub n_o: usize,
    pub decoupled: bool,
    pub r_o: MatrixData,
    pub r_c: MatrixData,
    pub r_c_tilde: MatrixData,
    pub c_o: MatrixData,
    pub beta: MatrixData,
    pub theta_o: MatrixData,
    pub output_identity_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub config: Option<PathBuf>,
    pub settings: Settings,
    pub conditions: ConditionReport,
    pub failures: Vec<String>,
    pub decomposition: DecompositionSummary,
    pub observer: Option<ObserverSummary>,
    pub convergence: Option<ConvergenceReport>,
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
    pub passed: bool,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports hold only finite numbers")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|source| RunError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Plain-text summary for the terminal.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let c = &self.conditions;
        let flag = |ok: bool| if ok { "ok" } else { "FAILED" };
        let _ = writeln!(s, "conditions:");
        let _ = writeln!(
            s,
            "  transfer function  {:<6} residual {:.3e}",
            flag(c.tf_cond_ok),
            c.residuals.transfer_function
        );
        let _ = writeln!(
            s,
            "  isotropy           {:<6} residual {:.3e}",
            flag(c.cjc_ok),
            c.residuals.isotropy
        );
        let _ = writeln!(
            s,
            "  output rank        {:<6} rank {} of m = {}",
            flag(c.rank_ok),
            c.rank_c,
            c.m
        );
        let _ = writeln!(
            s,
            "  estimability       {:<6} m = {}, n_p2 = {}",
            flag(c.bound_ok),
            c.m,
            c.n_p2
        );
        let d = &self.decomposition;
        let _ = writeln!(
            s,
            "decomposition: rank C_r = {}, n_p1 = {}, n_p2 = {}, R_p11 eigenvalues {:?}",
            c.rank_cr, d.n_p1, d.n_p2, d.r_p11_eigenvalues
        );
        if let Some(o) = &self.observer {
            let _ = writeln!(
                s,
                "observer: n_o = {}{}, output identity residual {:.3e}",
                o.n_o,
                if o.decoupled { " (decoupled)" } else { "" },
                o.output_identity_residual
            );
        }
        if let Some(v) = &self.convergence {
            let slope = v
                .decay_slope
                .map_or("n/a".to_string(), |x| format!("{x:.3}"));
            let _ = writeln!(
                s,
                "convergence: {} (z_p drift {:.3e}, final error {:.3e}, slope {slope})",
                flag(v.passed),
                v.zp_drift,
                v.final_error
            );
        }
        for ch in &self.checks {
            let _ = writeln!(
                s,
                "  [{}] {}: {}",
                if ch.passed { "PASS" } else { "FAIL" },
                ch.name,
                ch.detail
            );
        }
        for f in &self.files {
            let _ = writeln!(s, "wrote {}", f.display());
        }
        let _ = write!(s, "{}", if self.passed { "PASSED" } else { "FAILED" });
        s
    }
}

/// A parsed config with its effective settings.
#[derive(Debug, Clone)]
pub struct Run {
    pub config: Config,
    pub settings: Settings,
    pub path: Option<PathBuf>,
}

impl Run {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let io = |source| RunError::Io {
            path: path.to_path_buf(),
            source,
        };
        let config = Config::load(path)
            .map_err(io)?
            .map_err(|source| RunError::Config {
                path: path.to_path_buf(),
                source,
            })?;
        let settings = config.settings(overrides).map_err(RunError::Settings)?;
        Ok(Self {
            config,
            settings,
            path: Some(path.to_path_buf()),
        })
    }

    pub fn from_config(config: Config, overrides: &Overrides) -> Result<Self> {
        config.validate().map_err(RunError::Settings)?;
        let settings = config.settings(overrides).map_err(RunError::Settings)?;
        Ok(Self {
            config,
            settings,
            path: None,
        })
    }

    pub fn six_mode(overrides: &Overrides) -> Result<Self> {
        let config = Config::from_toml_str(SIX_MODE_CONFIG).map_err(RunError::Settings)?;
        Self::from_config(config, overrides)
    }

    fn analysed(&self, command: &str) -> Result<(DecomposedPlant, RunReport)> {
        let dec = self.config.decompose().map_err(|source| match &self.path {
            Some(path) => RunError::Config {
                path: path.clone(),
                source,
            },
            None => RunError::Settings(source),
        })?;
        let conditions = check_plant_conditions_with_tol(&dec.source, self.settings.tol);
        let report = RunReport {
            command: command.to_string(),
            config: self.path.clone(),
            settings: self.settings,
            failures: conditions.failures(),
            passed: conditions.all_ok(),
            conditions,
            decomposition: (&dec).into(),
            observer: None,
            convergence: None,
            checks: Vec::new(),
            files: Vec::new(),
        };
        Ok((dec, report))
    }

    /// Observer design, or `None` when the plant fails the conditions.
    fn designed(
        &self,
        command: &str,
    ) -> Result<(DecomposedPlant, Option<ObserverDesign>, RunReport)> {
        let (dec, mut report) = self.analysed(command)?;
        if !report.passed {
            return Ok((dec, None, report));
        }
        let mut obs = synthesize_observer(&dec, &self.config.observer_options(&self.settings))?;
        let decoupled = self.config.decoupled();
        if decoupled {
            obs = obs.without_coupling();
        }
        let residual = obs.output_identity_residual();
        report.passed = residual <= TOL_OUTPUT_IDENTITY;
        report.observer = Some(ObserverSummary {
            n_o: obs.n_o,
            decoupled,
            r_o: (&obs.r_o).into(),
            r_c: (&obs.r_c).into(),
            r_c_tilde: (&obs.r_c_tilde).into(),
            c_o: (&obs.c_o).into(),
            beta: (&obs.beta).into(),
            theta_o: obs.theta_o.as_matrix().into(),
            output_identity_residual: residual,
        });
        Ok((dec, Some(obs), report))
    }

    pub fn analyze(&self) -> Result<RunReport> {
        Ok(self.analysed("analyze")?.1)
    }

    pub fn synthesize(&self, out: &Path) -> Result<RunReport> {
        let (_, obs, mut report) = self.designed("synthesize")?;
        if let Some(obs) = obs {
            write_observer(out, &obs)?;
            report.files.push(out.to_path_buf());
        }
        Ok(report)
    }

    pub fn simulate(&self, out_dir: &Path) -> Result<RunReport> {
        match self.simulated("simulate")? {
            Simulated::Rejected(report) => Ok(*report),
            Simulated::Done(mut sim) => {
                sim.write(out_dir)?;
                Ok(sim.report)
            }
        }
    }

    fn simulated(&self, command: &str) -> Result<Simulated> {
        let criteria = ConvergenceCriteria::default();
        if self.settings.t_end < criteria.min_horizon {
            return Err(RunError::Settings(ConfigError {
                field: Some("simulation.t_end".into()),
                line: None,
                message: format!(
                    "horizon {} is too short to fit a decay rate, need at least {}",
                    self.settings.t_end, criteria.min_horizon
                ),
            }));
        }
        let (dec, obs, mut report) = self.designed(command)?;
        let Some(obs) = obs else {
            return Ok(Simulated::Rejected(Box::new(report)));
        };
        let aug = assemble_augmented(&dec.source, &obs)?;
        let grid = uniform_grid(self.settings.t_end, self.settings.dt)?;
        let record = propagate(&aug, &grid)?;
        let convergence = time_average_error(&record, &aug, &criteria)?;
        report.passed &= convergence.passed;
        report.convergence = Some(convergence);
        Ok(Simulated::Done(Box::new(Simulation {
            obs,
            aug,
            record,
            report,
        })))
    }

    /// The bundled six-mode example through the full pipeline, with checks
    /// against the known values of that example.
    pub fn demo(out_dir: Option<&Path>) -> Result<RunReport> {
        let run = Self::six_mode(&Overrides::default())?;
        let mut sim = match run.simulated("demo")? {
            Simulated::Done(sim) => sim,
            Simulated::Rejected(report) => return Ok(*report),
        };
        let mut checks = Vec::new();
        let mut check = |name: &str, passed: bool, detail: String| {
            checks.push(Check {
                name: name.to_string(),
                passed,
                detail,
            })
        };

        let rank = sim.report.conditions.rank_cr;
        check(
            "controllability rank",
            rank == 2,
            format!("rank C_r = {rank}, expected 2"),
        );
        let ev = &sim.report.decomposition.r_p11_eigenvalues;
        let ok = ev.len() == 2 && ev[0].abs() <= 1e-9 && (ev[1] - 6.0).abs() <= 1e-9;
        check("R_p11 eigenvalues", ok, format!("{ev:?}, expected [0, 6]"));
        let ok = sim.obs.r_c_tilde == expected_transformed_coupling();
        check(
            "transformed coupling",
            ok,
            format!(
                "R̃_c rows {:?}",
                qobserver_core::linalg::to_rows(&sim.obs.r_c_tilde)
            ),
        );
        let conv = sim.report.convergence.clone().expect("simulated");
        check(
            "z_p constancy",
            conv.zp_drift <= 1e-6,
            format!(
                "max drift {:.3e} over [0, {}]",
                conv.zp_drift, run.settings.t_end
            ),
        );
        let slope_ok = conv.decay_slope.is_some_and(|s| (-1.3..=-0.7).contains(&s));
        check(
            "decay slope",
            slope_ok,
            format!("{:?}, expected within [-1.3, -0.7]", conv.decay_slope),
        );
        let oracle = ode_oracle(&sim.aug, 50.0, 1e-3)?;
        let reference = propagate(&sim.aug, &uniform_grid(50.0, run.settings.dt)?)?;
        let dev = max_shared_deviation(&reference, &oracle).unwrap_or(f64::INFINITY);
        check(
            "RK4 cross-check",
            dev <= 1e-6,
            format!("max deviation {dev:.3e} on [0, 50]"),
        );

        sim.report.passed &= checks.iter().all(|c| c.passed);
        sim.report.checks = checks;
        if let Some(dir) = out_dir {
            sim.write(dir)?;
        }
        Ok(sim.report)
    }
}

enum Simulated {
    /// The plant failed the observer conditions.
    Rejected(Box<RunReport>),
    Done(Box<Simulation>),
}

struct Simulation {
    obs: ObserverDesign,
    aug: AugmentedSystem,
    record: TrajectoryRecord,
    report: RunReport,
}

impl Simulation {
    fn write(&mut self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|source| RunError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let rec = &self.record;
        let files = [
            ("zp.csv", "p", &rec.times[..], &rec.zp_coeffs),
            ("zo.csv", "o", &rec.times[..], &rec.zo_coeffs),
            ("zo_avg.csv", "o", rec.average_times(), &rec.zo_avg),
        ];
        for (name, stream, times, coeffs) in files {
            let path = dir.join(name);
            output::write_trajectory(&path, stream, times, coeffs).map_err(|source| {
                RunError::Csv {
                    path: path.clone(),
                    source,
                }
            })?;
            self.report.files.push(path);
        }
        let path = dir.join("observer.csv");
        write_observer(&path, &self.obs)?;
        self.report.files.push(path);
        let path = dir.join("report.json");
        self.report.files.push(path.clone());
        self.report.write(&path)
    }
}

fn write_observer(path: &Path, obs: &ObserverDesign) -> Result<()> {
    let matrices = [
        ("R_o", &obs.r_o),
        ("R_c", &obs.r_c),
        ("R_c_tilde", &obs.r_c_tilde),
        ("C_o", &obs.c_o),
        ("beta", &obs.beta),
        ("Theta_o", obs.theta_o.as_matrix()),
    ];
    output::write_matrices(path, &matrices).map_err(|source| RunError::Csv {
        path: path.to_path_buf(),
        source,
    })
}
