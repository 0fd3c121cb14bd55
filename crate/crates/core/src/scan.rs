//! Cooperativity sweeps and power-law fits of the burst.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{find_peak, integrate, IntegratorConfig};
use crate::error::{Error, Result};
use crate::types::Parameters;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub coop: f64,
    pub rho_size: f64,
    pub tau_max: f64,
    pub peak_intensity: f64,
    pub max_gamma: f64,
    pub max_x: f64,
    pub max_rho_mm: f64,
    pub boundary_peak: bool,
}

/// Time span long enough to contain the burst and most of the tail.
pub fn default_t_end(coop: f64, gamma: f64) -> f64 {
    if coop > 0.0 {
        50.0 / (coop * gamma) + 5.0
    } else {
        10.0
    }
}

/// Simulates one trajectory per cooperativity, in parallel.
///
/// `params` and `config` act as templates: `coop` and `rho_size` are
/// overwritten for each row and `t_end` is replaced by [`default_t_end`].
/// Results come back in the order of `c_values`.
pub fn sweep(
    c_values: &[f64],
    rho_size: f64,
    params: &Parameters,
    config: &IntegratorConfig,
) -> Vec<Result<ScanRow>> {
    c_values
        .par_iter()
        .map(|&coop| {
            let p = Parameters {
                coop,
                rho_size,
                ..*params
            };
            let cfg = IntegratorConfig {
                t_end: default_t_end(coop, p.gamma),
                ..*config
            };
            let traj = integrate(&cfg, &p)?;
            let peak = find_peak(&traj)?;
            Ok(ScanRow {
                coop,
                rho_size,
                tau_max: peak.t_max,
                peak_intensity: peak.peak_intensity,
                max_gamma: traj.max_by(|s| s.rates.gamma_plus),
                max_x: traj.max_by(|s| s.state.x),
                max_rho_mm: traj.max_by(|s| s.rho_mm),
                boundary_peak: peak.boundary,
            })
        })
        .collect()
}

/// Fewer rows leave no residual to judge the fit by.
pub const MIN_FIT_ROWS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    /// Least-squares slope of peak intensity against `C`.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Slope of `ln tau_max` against `ln C`.
    pub tau_exponent: f64,
}

/// Ordinary least squares `y = slope x + intercept`, with `r^2`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::TooFewSamples(x.len().min(y.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(u, v)| (u - mx) * (v - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateFit("all abscissae are equal".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok((slope, my - slope * mx, r2))
}

/// Fits the scaling of peak intensity and peak time with cooperativity.
///
/// Rows with `C <= 0` or a boundary peak carry no information about the
/// burst and are rejected.
pub fn fit_scaling(rows: &[ScanRow]) -> Result<ScalingFit> {
    if rows.len() < MIN_FIT_ROWS {
        return Err(Error::TooFewSamples(rows.len()));
    }
    if let Some(r) = rows.iter().find(|r| !(r.coop > 0.0) || !(r.tau_max > 0.0)) {
        return Err(Error::DegenerateFit(format!(
            "row C = {} has no burst (tau_max = {})",
            r.coop, r.tau_max
        )));
    }
    if let Some(r) = rows.iter().find(|r| r.boundary_peak) {
        return Err(Error::DegenerateFit(format!("row C = {} peaks on the boundary", r.coop)));
    }
    let c: Vec<f64> = rows.iter().map(|r| r.coop).collect();
    let peak: Vec<f64> = rows.iter().map(|r| r.peak_intensity).collect();
    let (slope, intercept, r_squared) = linear_fit(&c, &peak)?;
    let ln_c: Vec<f64> = c.iter().map(|v| v.ln()).collect();
    let ln_tau: Vec<f64> = rows.iter().map(|r| r.tau_max.ln()).collect();
    let (tau_exponent, _, _) = linear_fit(&ln_c, &ln_tau)?;
    Ok(ScalingFit {
        slope,
        intercept,
        r_squared,
        tau_exponent,
    })
}
