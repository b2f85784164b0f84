use std::path::{Path, PathBuf};

use nuelab::dynamics::MapSpec;
use nuelab::measures::DensityMethod;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Noise level for a single run, or a descending list for sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default)]
    pub eps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_list: Option<Vec<f64>>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig { eps: 0.0, eps_list: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitParams {
    /// Initial point; Lebesgue-uniform from the seed when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    pub n: usize,
}

impl Default for OrbitParams {
    fn default() -> Self {
        OrbitParams { x0: None, n: 1000 }
    }
}

/// Shared by `pliss` and `hyp`: sampled orbits and the constant resolution budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimesParams {
    pub orbits: usize,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a0: Option<f64>,
    pub resolve_orbits: usize,
    pub resolve_horizon: usize,
}

impl Default for TimesParams {
    fn default() -> Self {
        TimesParams { orbits: 100, n: 500, a0: None, resolve_orbits: 200, resolve_horizon: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TailsParams {
    pub x_samples: usize,
    pub omega_samples: usize,
    pub n_max: usize,
    pub n_step: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a0: Option<f64>,
    pub resolve_orbits: usize,
    pub resolve_horizon: usize,
}

impl Default for TailsParams {
    fn default() -> Self {
        TailsParams {
            x_samples: 10_000,
            omega_samples: 8,
            n_max: 200,
            n_step: 1,
            a0: None,
            resolve_orbits: 200,
            resolve_horizon: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InduceParams {
    /// `n_max − R₀`.
    pub extra_steps: u32,
    pub queries: usize,
    /// Cells of the induced Ulam matrix on `Δ₀`; 0 skips the induced density.
    pub induced_cells: usize,
    /// Cells of the tower projection; 0 skips it.
    pub tower_cells: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    pub resolve_orbits: usize,
    pub resolve_horizon: usize,
}

impl Default for InduceParams {
    fn default() -> Self {
        InduceParams {
            extra_steps: 40,
            queries: 4096,
            induced_cells: 0,
            tower_cells: 0,
            p: None,
            resolve_orbits: 64,
            resolve_horizon: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensityParams {
    pub method: DensityMethod,
    /// Cells per axis.
    pub cells: usize,
    pub noise_samples: usize,
    pub points_per_cell: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub x0_samples: usize,
    pub orbit_len: usize,
    pub burn_in: usize,
}

impl Default for DensityParams {
    fn default() -> Self {
        DensityParams {
            method: DensityMethod::Ulam,
            cells: 1024,
            noise_samples: 16,
            points_per_cell: 16,
            tol: 1e-10,
            max_iters: 100_000,
            x0_samples: 1000,
            orbit_len: 1000,
            burn_in: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityParams {
    #[serde(flatten)]
    pub density: DensityParams,
    /// Without `kernel.eps_list`, the sweep uses `margin·10^{−k}` for `k = 1..=decades`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    pub decades: u32,
    pub floor: bool,
    pub resolve_orbits: usize,
    pub resolve_horizon: usize,
}

impl Default for StabilityParams {
    fn default() -> Self {
        StabilityParams {
            density: DensityParams::default(),
            margin: None,
            decades: 4,
            floor: true,
            resolve_orbits: 200,
            resolve_horizon: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LyapunovParams {
    pub points: usize,
    pub n: usize,
}

impl Default for LyapunovParams {
    fn default() -> Self {
        LyapunovParams { points: 1000, n: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyMapParams {
    /// Cells per axis of the Ulam matrix whose row sums are checked.
    pub cells: usize,
    pub lyapunov_points: usize,
    pub lyapunov_n: usize,
    pub probe_samples: usize,
}

impl Default for VerifyMapParams {
    fn default() -> Self {
        VerifyMapParams { cells: 64, lyapunov_points: 16, lyapunov_n: 2000, probe_samples: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    Orbit(OrbitParams),
    Pliss(TimesParams),
    Hyp(TimesParams),
    Tails(TailsParams),
    Induce(InduceParams),
    Density(DensityParams),
    Stability(StabilityParams),
    Lyapunov(LyapunovParams),
    VerifyMap(VerifyMapParams),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Orbit(_) => "orbit",
            Experiment::Pliss(_) => "pliss",
            Experiment::Hyp(_) => "hyp",
            Experiment::Tails(_) => "tails",
            Experiment::Induce(_) => "induce",
            Experiment::Density(_) => "density",
            Experiment::Stability(_) => "stability",
            Experiment::Lyapunov(_) => "lyapunov",
            Experiment::VerifyMap(_) => "verify-map",
        }
    }

    /// The experiment `kind` with default parameters.
    pub fn default_for(kind: &str) -> Option<Experiment> {
        Some(match kind {
            "orbit" => Experiment::Orbit(Default::default()),
            "pliss" => Experiment::Pliss(Default::default()),
            "hyp" => Experiment::Hyp(Default::default()),
            "tails" => Experiment::Tails(Default::default()),
            "induce" => Experiment::Induce(Default::default()),
            "density" => Experiment::Density(Default::default()),
            "stability" => Experiment::Stability(Default::default()),
            "lyapunov" => Experiment::Lyapunov(Default::default()),
            "verify-map" => Experiment::VerifyMap(Default::default()),
            _ => return None,
        })
    }
}

fn default_map() -> MapSpec {
    MapSpec::Doubling { k: 2 }
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_workers() -> usize {
    1
}

/// One experiment, fully specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_map")]
    pub map: MapSpec,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Thread count; 0 uses every core. Never affects results.
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            map: default_map(),
            kernel: KernelConfig::default(),
            experiment: None,
            seed: 0,
            out: default_out(),
            workers: default_workers(),
        }
    }
}

fn config_error(path: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Config { path: path.into(), message: message.into() }
}

impl ExperimentConfig {
    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
        if text.trim_start().starts_with('{') {
            let de = &mut serde_json::Deserializer::from_str(text);
            serde_path_to_error::deserialize(de).map_err(|e| config_error(e.path().to_string(), e.inner().to_string()))
        } else {
            let de = toml::Deserializer::parse(text).map_err(|e| config_error(".", e.to_string()))?;
            serde_path_to_error::deserialize(de).map_err(|e| config_error(e.path().to_string(), e.inner().to_string()))
        }
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error(".", format!("{}: {e}", path.display())))?;
        ExperimentConfig::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs are TOML-representable")
    }

    /// Fixes the experiment to `kind`: fills in defaults when the config names none, rejects a
    /// config written for another experiment.
    pub fn select(&mut self, kind: &str) -> Result<(), CliError> {
        match &self.experiment {
            Some(e) if e.kind() != kind => Err(config_error(
                "experiment.kind",
                format!("config describes `{}` but `{kind}` was requested", e.kind()),
            )),
            Some(_) => Ok(()),
            None => {
                self.experiment =
                    Some(Experiment::default_for(kind).ok_or_else(|| config_error("experiment.kind", format!("unknown experiment `{kind}`")))?);
                Ok(())
            }
        }
    }

    /// Range checks the deserializer cannot express.
    pub fn validate(&self) -> Result<(), CliError> {
        let positive = |path: &str, v: usize| {
            if v == 0 {
                Err(config_error(path, "must be positive"))
            } else {
                Ok(())
            }
        };
        if !(self.kernel.eps >= 0.0 && self.kernel.eps.is_finite()) {
            return Err(config_error("kernel.eps", "must be a finite non-negative number"));
        }
        if let Some(list) = &self.kernel.eps_list {
            if let Some(i) = list.iter().position(|e| !(*e >= 0.0 && e.is_finite())) {
                return Err(config_error(format!("kernel.eps_list[{i}]"), "must be a finite non-negative number"));
            }
            if list.windows(2).any(|w| w[0] < w[1]) {
                return Err(config_error("kernel.eps_list", "must be sorted in descending order"));
            }
        }
        if let Some(m) = self.map.noise_margin() {
            let largest = self.kernel.eps_list.iter().flatten().copied().fold(self.kernel.eps, f64::max);
            if largest > m {
                return Err(config_error("kernel", format!("ε = {largest} exceeds the map's noise margin {m}")));
            }
        }
        let Some(exp) = &self.experiment else {
            return Err(config_error("experiment", "no experiment selected"));
        };
        match exp {
            Experiment::Orbit(p) => {
                positive("experiment.n", p.n)?;
                if let Some(x0) = &p.x0 {
                    let dim = self.map.build().map_err(|e| config_error("map", e.to_string()))?.dim();
                    if x0.len() != dim {
                        return Err(config_error("experiment.x0", format!("expected {dim} coordinates")));
                    }
                }
            }
            Experiment::Pliss(p) | Experiment::Hyp(p) => {
                positive("experiment.orbits", p.orbits)?;
                positive("experiment.n", p.n)?;
                positive("experiment.resolve_orbits", p.resolve_orbits)?;
                positive("experiment.resolve_horizon", p.resolve_horizon)?;
            }
            Experiment::Tails(p) => {
                positive("experiment.x_samples", p.x_samples)?;
                positive("experiment.omega_samples", p.omega_samples)?;
                positive("experiment.n_max", p.n_max)?;
                positive("experiment.n_step", p.n_step)?;
                positive("experiment.resolve_orbits", p.resolve_orbits)?;
                positive("experiment.resolve_horizon", p.resolve_horizon)?;
            }
            Experiment::Induce(p) => {
                positive("experiment.extra_steps", p.extra_steps as usize)?;
                positive("experiment.queries", p.queries)?;
                positive("experiment.resolve_orbits", p.resolve_orbits)?;
                positive("experiment.resolve_horizon", p.resolve_horizon)?;
            }
            Experiment::Density(p) => validate_density("experiment", p)?,
            Experiment::Stability(p) => {
                validate_density("experiment", &p.density)?;
                if self.kernel.eps_list.is_none() {
                    positive("experiment.decades", p.decades as usize)?;
                    if let Some(m) = p.margin {
                        if !(m > 0.0 && m.is_finite()) {
                            return Err(config_error("experiment.margin", "must be positive"));
                        }
                    }
                }
            }
            Experiment::Lyapunov(p) => {
                positive("experiment.points", p.points)?;
                positive("experiment.n", p.n)?;
            }
            Experiment::VerifyMap(p) => {
                positive("experiment.cells", p.cells)?;
                positive("experiment.lyapunov_points", p.lyapunov_points)?;
                positive("experiment.lyapunov_n", p.lyapunov_n)?;
            }
        }
        Ok(())
    }
}

fn validate_density(prefix: &str, p: &DensityParams) -> Result<(), CliError> {
    let check = |field: &str, ok: bool, msg: &str| {
        if ok {
            Ok(())
        } else {
            Err(config_error(format!("{prefix}.{field}"), msg))
        }
    };
    check("cells", p.cells > 0, "must be positive")?;
    check("noise_samples", p.noise_samples > 0, "must be positive")?;
    check("points_per_cell", p.points_per_cell > 0, "must be positive")?;
    check("tol", p.tol > 0.0, "must be positive")?;
    check("max_iters", p.max_iters > 0, "must be positive")?;
    if p.method != DensityMethod::Ulam {
        check("x0_samples", p.x0_samples > 0, "must be positive")?;
        check("orbit_len", p.orbit_len > p.burn_in, "must exceed burn_in")?;
    }
    Ok(())
}
