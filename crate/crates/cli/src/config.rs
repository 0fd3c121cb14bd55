//! Flat run configuration: a JSON object read from `--config`, with
//! `--key=value` flags of the same names layered on top.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use superrad::dynamics::{ChirpGrid, IntegratorConfig};
use superrad::oracle::OracleOptions;
use superrad::scan::default_t_end;
use superrad::spectral::sinh_grid;
use superrad::types::{
    reconstruct, DeltaMode, Parameters, ReducedState, SizeMode, POPULATION_SLACK,
};

/// Spectral profile written by the `spectrum` subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// Self-consistent `Gamma(delta')` of the medium at `(a0, x0)`.
    Rates,
    /// `lorentz_amplitude * w^2 / (delta'^2 + w^2)`, whose chirp is known in
    /// closed form; used to check the principal-value quadrature.
    Lorentzian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub gamma: f64,
    pub coop: f64,
    pub rho_size: f64,
    pub delta_mode: DeltaMode,
    pub size_mode: SizeMode,
    pub series_epsilon: f64,
    pub fixed_point_tol: f64,

    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: Option<f64>,
    /// Defaults to a span that contains the burst for the chosen `coop`.
    pub t_end: Option<f64>,
    pub a0: f64,
    pub d0: f64,
    pub n0: f64,
    pub x0: f64,
    pub sample_interval: Option<f64>,

    pub output_dir: PathBuf,

    pub c_values: Vec<f64>,

    pub grid_half_width: f64,
    pub grid_points: usize,
    pub grid_scale: f64,
    pub profile: Profile,
    pub lorentz_amplitude: f64,
    pub lorentz_width: f64,

    pub oracle_threshold: f64,
    /// Relative change applied to the induced rates inside the oracle.
    pub rate_perturbation: f64,
    pub cross_vacuum: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let params = Parameters::default();
        let integ = IntegratorConfig::default();
        let grid = ChirpGrid::default();
        Self {
            gamma: params.gamma,
            coop: params.coop,
            rho_size: params.rho_size,
            delta_mode: params.delta_mode,
            size_mode: params.size_mode,
            series_epsilon: params.series_epsilon,
            fixed_point_tol: params.fixed_point_tol,
            rel_tol: integ.rel_tol,
            abs_tol: integ.abs_tol,
            max_step: None,
            t_end: None,
            a0: 1.0,
            d0: 0.0,
            n0: 1.0,
            x0: 0.0,
            sample_interval: None,
            output_dir: PathBuf::from("out"),
            c_values: vec![10.0, 20.0, 30.0],
            grid_half_width: grid.half_width,
            grid_points: grid.points,
            grid_scale: grid.scale,
            profile: Profile::Rates,
            lorentz_amplitude: 1.0,
            lorentz_width: 1.0,
            oracle_threshold: 1e-6,
            rate_perturbation: 0.0,
            cross_vacuum: 0.0,
        }
    }
}

/// Splits `--key=value` (or `--key value`) arguments into a JSON object.
///
/// Values are read as JSON when they parse as such (numbers, `null`,
/// arrays) and as plain strings otherwise. A bare comma-separated list of
/// numbers is accepted for array keys, e.g. `--c_values=10,20,30`.
pub fn parse_overrides(args: &[String]) -> Result<Map<String, Value>, String> {
    let mut out = Map::new();
    let mut iter = args.iter();
    while let Some(arg) = iter.next() {
        let body = arg
            .strip_prefix("--")
            .ok_or_else(|| format!("unexpected argument `{arg}` (expected --key=value)"))?;
        let (key, raw) = match body.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = iter
                    .next()
                    .ok_or_else(|| format!("flag `--{body}` is missing a value"))?;
                (body.to_string(), v.clone())
            }
        };
        if key.is_empty() {
            return Err(format!("empty flag name in `{arg}`"));
        }
        if out.insert(key.clone(), parse_value(&raw)).is_some() {
            return Err(format!("flag `--{key}` given more than once"));
        }
    }
    Ok(out)
}

fn parse_value(raw: &str) -> Value {
    if let Ok(v) = serde_json::from_str::<Value>(raw) {
        return v;
    }
    if raw.contains(',') {
        let parts: Option<Vec<Value>> = raw
            .split(',')
            .map(|p| {
                serde_json::from_str::<Value>(p.trim())
                    .ok()
                    .filter(Value::is_number)
            })
            .collect();
        if let Some(parts) = parts {
            return Value::Array(parts);
        }
    }
    Value::String(raw.to_string())
}

/// Reads the optional file, applies the overrides and validates the result.
pub fn load(file: Option<&Path>, overrides: Map<String, Value>) -> Result<RunConfig, String> {
    let mut merged = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            match serde_json::from_str::<Value>(&text)
                .map_err(|e| format!("{}: {e}", path.display()))?
            {
                Value::Object(map) => map,
                _ => {
                    return Err(format!(
                        "{}: configuration must be a JSON object",
                        path.display()
                    ))
                }
            }
        }
        None => Map::new(),
    };
    merged.extend(overrides);
    let config: RunConfig =
        serde_json::from_value(Value::Object(merged)).map_err(|e| e.to_string())?;
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    pub fn parameters(&self) -> Parameters {
        Parameters {
            gamma: self.gamma,
            coop: self.coop,
            rho_size: self.rho_size,
            delta_mode: self.delta_mode,
            size_mode: self.size_mode,
            series_epsilon: self.series_epsilon,
            fixed_point_tol: self.fixed_point_tol,
        }
    }

    pub fn initial(&self) -> ReducedState {
        ReducedState::new(self.a0, self.d0, self.n0, self.x0)
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
            .unwrap_or_else(|| default_t_end(self.coop, self.gamma))
    }

    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step,
            t_end: self.t_end(),
            initial: self.initial(),
            sample_interval: self.sample_interval,
            chirp_grid: ChirpGrid {
                half_width: self.grid_half_width,
                points: self.grid_points,
                scale: self.grid_scale,
            },
            ..IntegratorConfig::default()
        }
    }

    pub fn oracle_options(&self) -> OracleOptions {
        OracleOptions {
            cross_vacuum: self.cross_vacuum,
            rate_scale: 1.0 + self.rate_perturbation,
        }
    }

    /// Every check that can fail without running the model.
    pub fn validate(&self) -> Result<(), String> {
        let params = self.parameters();
        params.validate().map_err(|e| e.to_string())?;
        self.integrator().validate().map_err(|e| e.to_string())?;
        let rho0 = reconstruct(&self.initial()).map_err(|e| format!("initial state: {e}"))?;
        if rho0.min_eigenvalue() < -POPULATION_SLACK {
            return Err(format!(
                "initial state: x0 = {} exceeds the positivity bound sqrt(P_ab P_ba)",
                self.x0
            ));
        }
        sinh_grid(self.grid_half_width, self.grid_points, self.grid_scale)
            .map_err(|e| format!("grid: {e}"))?;
        if self.output_dir.as_os_str().is_empty() {
            return Err("output_dir must not be empty".into());
        }
        if self.c_values.is_empty() {
            return Err("c_values must not be empty".into());
        }
        if let Some(c) = self
            .c_values
            .iter()
            .find(|c| !(c.is_finite() && **c >= 0.0))
        {
            return Err(format!(
                "c_values entry {c} must be finite and non-negative"
            ));
        }
        let positive = [
            ("oracle_threshold", self.oracle_threshold),
            ("lorentz_width", self.lorentz_width),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} = {v} must be positive"));
            }
        }
        if !self.lorentz_amplitude.is_finite() {
            return Err("lorentz_amplitude must be finite".into());
        }
        if !(self.rate_perturbation.is_finite() && self.rate_perturbation > -1.0) {
            return Err(format!(
                "rate_perturbation = {} must exceed -1",
                self.rate_perturbation
            ));
        }
        if !(self.cross_vacuum.is_finite() && self.cross_vacuum.abs() <= self.gamma) {
            return Err(format!(
                "cross_vacuum = {} must satisfy |cross_vacuum| <= gamma",
                self.cross_vacuum
            ));
        }
        Ok(())
    }
}
