//! Flat `key = value` run configuration.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use monopole_core::{GridSpec, NormParams};

use crate::CliError;

/// The batch jobs the driver can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Residuals,
    VerifyNull,
    VerifyCone,
    VerifyNorms,
    Scaling,
    ProbeBilinear,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Simulate,
        Command::Residuals,
        Command::VerifyNull,
        Command::VerifyCone,
        Command::VerifyNorms,
        Command::Scaling,
        Command::ProbeBilinear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Residuals => "residuals",
            Command::VerifyNull => "verify-null",
            Command::VerifyCone => "verify-cone",
            Command::VerifyNorms => "verify-norms",
            Command::Scaling => "scaling",
            Command::ProbeBilinear => "probe-bilinear",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Command::ALL.iter().map(|c| c.name()).collect();
                CliError::Usage(format!(
                    "unknown command `{s}`; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

/// Every recognized key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("command", "job to run"),
    ("n", "grid points per dimension (power of two, >= 8)"),
    ("length", "period of the torus"),
    ("dt", "time step"),
    ("t_final", "integration time"),
    ("dim", "matrix size of su(dim)"),
    ("band", "Fourier band of random initial data"),
    (
        "amplitude",
        "amplitude of random initial data (0 gives zero data)",
    ),
    ("nonlinear", "keep the quadratic terms (true/false)"),
    ("save_every", "steps between recorded states"),
    ("snapshots", "also write binary snapshots (true/false)"),
    (
        "samples",
        "random initial data or parameter samples per sweep",
    ),
    ("p", "Lebesgue exponent in (1, 2]"),
    ("s", "Sobolev exponent"),
    ("b", "modulation exponent"),
    ("lambda", "dyadic rescaling factor"),
    ("seed", "seed of every random draw"),
    ("output_dir", "directory receiving the artifacts"),
    ("null_samples", "frequency pairs in the null-form sweep"),
    ("collinear_paths", "collinear-limit paths"),
    ("probe_samples", "random sparse spectra per probe sign"),
    (
        "probe_baseline",
        "upper bound for the probe ratio, or `none`",
    ),
    ("quad_start_points", "initial angular quadrature points"),
    ("quad_max_points", "angular quadrature point cap"),
    ("quad_rel_tol", "angular quadrature relative tolerance"),
    ("residual_tol", "bound on the Lorenz residual"),
    ("norm_tol", "relative bound on the factorization mismatch"),
    ("scaling_tol", "bound on the scaling-exponent deviation"),
    ("split_tol", "relative bound on J - J1 - J2"),
];

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub grid: GridSpec,
    pub params: NormParams,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub t_final: f64,
    pub dim: usize,
    pub band: usize,
    pub amplitude: f64,
    pub nonlinear: bool,
    pub save_every: usize,
    pub snapshots: bool,
    pub samples: usize,
    pub lambda: f64,
    pub null_samples: usize,
    pub collinear_paths: usize,
    pub probe_samples: usize,
    pub probe_baseline: Option<f64>,
    pub quad_start_points: usize,
    pub quad_max_points: usize,
    pub quad_rel_tol: f64,
    pub residual_tol: f64,
    pub norm_tol: f64,
    pub scaling_tol: f64,
    pub split_tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::Simulate,
            grid: GridSpec {
                n: 32,
                length: 2.0 * std::f64::consts::PI,
                dt: 1e-3,
            },
            params: NormParams::estimate(0.1).expect("valid default exponents"),
            seed: 2024,
            output_dir: PathBuf::from("monopole-lab-out"),
            t_final: 0.1,
            dim: 2,
            band: 3,
            amplitude: 0.1,
            nonlinear: true,
            save_every: 10,
            snapshots: false,
            samples: 4,
            lambda: 2.0,
            null_samples: 10_000,
            collinear_paths: 10,
            probe_samples: 50,
            probe_baseline: None,
            quad_start_points: 2048,
            quad_max_points: 1 << 18,
            quad_rel_tol: 1e-6,
            residual_tol: 1e-8,
            norm_tol: 1e-6,
            scaling_tol: 1e-3,
            split_tol: 1e-4,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("invalid value `{value}` for key `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Usage(format!(
            "invalid value `{value}` for key `{key}`; expected true or false"
        ))),
    }
}

fn unknown_key(key: &str) -> CliError {
    let names: Vec<&str> = KEYS.iter().map(|(k, _)| *k).collect();
    CliError::Usage(format!(
        "unknown key `{key}`; valid keys: {}",
        names.join(", ")
    ))
}

impl RunConfig {
    /// Sets one key without validating the combination.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "command" => self.command = value.parse()?,
            "n" => self.grid.n = parse(key, value)?,
            "length" => self.grid.length = parse(key, value)?,
            "dt" => self.grid.dt = parse(key, value)?,
            "t_final" => self.t_final = parse(key, value)?,
            "dim" => self.dim = parse(key, value)?,
            "band" => self.band = parse(key, value)?,
            "amplitude" => self.amplitude = parse(key, value)?,
            "nonlinear" => self.nonlinear = parse_bool(key, value)?,
            "save_every" => self.save_every = parse(key, value)?,
            "snapshots" => self.snapshots = parse_bool(key, value)?,
            "samples" => self.samples = parse(key, value)?,
            "p" => self.params.p = parse(key, value)?,
            "s" => self.params.s = parse(key, value)?,
            "b" => self.params.b = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "null_samples" => self.null_samples = parse(key, value)?,
            "collinear_paths" => self.collinear_paths = parse(key, value)?,
            "probe_samples" => self.probe_samples = parse(key, value)?,
            "probe_baseline" => {
                self.probe_baseline = match value {
                    "none" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "quad_start_points" => self.quad_start_points = parse(key, value)?,
            "quad_max_points" => self.quad_max_points = parse(key, value)?,
            "quad_rel_tol" => self.quad_rel_tol = parse(key, value)?,
            "residual_tol" => self.residual_tol = parse(key, value)?,
            "norm_tol" => self.norm_tol = parse(key, value)?,
            "scaling_tol" => self.scaling_tol = parse(key, value)?,
            "split_tol" => self.split_tol = parse(key, value)?,
            _ => return Err(unknown_key(key)),
        }
        Ok(())
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, items: &[S]) -> Result<(), CliError> {
        for item in items {
            let item = item.as_ref();
            let (k, v) = item.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("override `{item}` is not of the form key=value"))
            })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    /// Checks every field and recomputes the derived exponents.
    pub fn validate(mut self) -> Result<Self, CliError> {
        let usage = |e: monopole_core::Error| CliError::Usage(e.to_string());
        self.grid = GridSpec::new(self.grid.n, self.grid.length, self.grid.dt).map_err(usage)?;
        self.params =
            NormParams::new(self.params.p, self.params.s, self.params.b).map_err(usage)?;
        let positive = [
            ("dim", self.dim),
            ("save_every", self.save_every),
            ("samples", self.samples),
            ("quad_start_points", self.quad_start_points),
        ];
        for (k, v) in positive {
            if v == 0 {
                return Err(CliError::Usage(format!("key `{k}` must be positive")));
            }
        }
        if self.quad_max_points < self.quad_start_points {
            return Err(CliError::Usage(
                "quad_max_points must be at least quad_start_points".into(),
            ));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(CliError::Usage(format!(
                "t_final = {} must be finite and non-negative",
                self.t_final
            )));
        }
        if !self.amplitude.is_finite() || !self.lambda.is_finite() {
            return Err(CliError::Usage(
                "amplitude and lambda must be finite".into(),
            ));
        }
        let tols = [
            ("quad_rel_tol", self.quad_rel_tol),
            ("residual_tol", self.residual_tol),
            ("norm_tol", self.norm_tol),
            ("scaling_tol", self.scaling_tol),
            ("split_tol", self.split_tol),
        ];
        for (k, v) in tols {
            if !(v > 0.0) {
                return Err(CliError::Usage(format!("key `{k}` must be positive")));
            }
        }
        Ok(self)
    }

    /// `(key, value)` pairs reproducing this configuration.
    pub fn echo(&self) -> Vec<(&'static str, String)> {
        let baseline = match self.probe_baseline {
            Some(b) => b.to_string(),
            None => "none".into(),
        };
        vec![
            ("command", self.command.to_string()),
            ("n", self.grid.n.to_string()),
            ("length", self.grid.length.to_string()),
            ("dt", self.grid.dt.to_string()),
            ("t_final", self.t_final.to_string()),
            ("dim", self.dim.to_string()),
            ("band", self.band.to_string()),
            ("amplitude", self.amplitude.to_string()),
            ("nonlinear", self.nonlinear.to_string()),
            ("save_every", self.save_every.to_string()),
            ("snapshots", self.snapshots.to_string()),
            ("samples", self.samples.to_string()),
            ("p", self.params.p.to_string()),
            ("s", self.params.s.to_string()),
            ("b", self.params.b.to_string()),
            ("lambda", self.lambda.to_string()),
            ("seed", self.seed.to_string()),
            ("output_dir", self.output_dir.display().to_string()),
            ("null_samples", self.null_samples.to_string()),
            ("collinear_paths", self.collinear_paths.to_string()),
            ("probe_samples", self.probe_samples.to_string()),
            ("probe_baseline", baseline),
            ("quad_start_points", self.quad_start_points.to_string()),
            ("quad_max_points", self.quad_max_points.to_string()),
            ("quad_rel_tol", self.quad_rel_tol.to_string()),
            ("residual_tol", self.residual_tol.to_string()),
            ("norm_tol", self.norm_tol.to_string()),
            ("scaling_tol", self.scaling_tol.to_string()),
            ("split_tol", self.split_tol.to_string()),
        ]
    }
}

/// Parses and validates configuration text on top of the defaults. Blank
/// lines and anything after `#` are ignored.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    parse_unvalidated(text)?.validate()
}

pub(crate) fn parse_unvalidated(text: &str) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!(
                "line {}: expected `key = value`, found `{line}`",
                i + 1
            ))
        })?;
        let (k, v) = (k.trim(), v.trim());
        if v.is_empty() {
            return Err(CliError::Usage(format!(
                "line {}: key `{k}` has no value",
                i + 1
            )));
        }
        cfg.set(k, v)
            .map_err(|e| CliError::Usage(format!("line {}: {e}", i + 1)))?;
    }
    Ok(cfg)
}

pub(crate) fn read_config(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    parse_config(&read_config(path)?)
}
