//! Reduced two-atom equations of motion with self-consistent rates.

use std::cell::Cell;
use std::ops::ControlFlow;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{checkpoint_grid, Dopri5, OdeFailure, OdeStats};
use crate::rates::solve_self_consistent;
use crate::spectral::{gamma_spectrum, sinh_grid, solve_chirp};
use crate::types::{
    entanglement_witness, reconstruct, super_sub_populations, DeltaMode, Parameters, RateSet,
    ReducedState,
};

/// Grid used to evaluate the chirp in Kramers-Kronig mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChirpGrid {
    pub half_width: f64,
    pub points: usize,
    pub scale: f64,
}

impl Default for ChirpGrid {
    fn default() -> Self {
        Self {
            half_width: 1e5,
            points: 401,
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Defaults to `1 / (50 C gamma)` (with `C` floored at 1).
    pub max_step: Option<f64>,
    pub t_end: f64,
    pub initial: ReducedState,
    /// Cadence of exact-time samples in addition to every accepted step.
    pub sample_interval: Option<f64>,
    /// Integration stops once `a` drops below this value.
    pub min_population: f64,
    pub chirp_grid: ChirpGrid,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: None,
            t_end: 10.0,
            initial: ReducedState::fully_inverted(),
            sample_interval: None,
            min_population: 1e-12,
            chirp_grid: ChirpGrid::default(),
        }
    }
}

impl IntegratorConfig {
    pub fn new(t_end: f64) -> Self {
        Self {
            t_end,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "must be positive and finite",
                })
            }
        };
        positive("rel_tol", self.rel_tol)?;
        positive("abs_tol", self.abs_tol)?;
        positive("t_end", self.t_end)?;
        if let Some(h) = self.max_step {
            positive("max_step", h)?;
        }
        if let Some(dt) = self.sample_interval {
            positive("sample_interval", dt)?;
        }
        if !self.initial.is_finite() {
            return Err(Error::InvalidParameter {
                name: "initial",
                value: f64::NAN,
                reason: "initial state must be finite",
            });
        }
        Ok(())
    }

    pub fn effective_max_step(&self, params: &Parameters) -> f64 {
        self.max_step
            .unwrap_or_else(|| 1.0 / (50.0 * params.coop.max(1.0) * params.gamma))
    }

    pub fn solver(&self, params: &Parameters) -> Dopri5 {
        Dopri5 {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.effective_max_step(params),
            ..Dopri5::default()
        }
    }

    pub fn checkpoints(&self) -> Vec<f64> {
        match self.sample_interval {
            Some(dt) => checkpoint_grid(dt, self.t_end),
            None => Vec::new(),
        }
    }
}

/// Small-sample equations: both atoms see the same rates.
///
/// `d` is carried along with zero derivative.
pub fn rhs_small_sample(s: &ReducedState, rates: &RateSet) -> ReducedState {
    let gamma = rates.gamma_plus;
    let gammabar = rates.gammabar_plus;
    let vac = rates.gamma_vac;
    let total = 2.0 * gamma + vac;
    ReducedState {
        a: -total * s.a + gamma,
        d: 0.0,
        n: -2.0 * total * s.n - 2.0 * vac * (2.0 * s.a - 1.0) + 8.0 * gammabar * s.x,
        x: -total * s.x + gammabar * s.n,
    }
}

/// Reduced variables with a complex correlation `x = rho_{ab,ba}`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GeneralState {
    pub a: f64,
    pub d: f64,
    pub n: f64,
    pub x: Complex64,
}

impl From<ReducedState> for GeneralState {
    fn from(s: ReducedState) -> Self {
        Self {
            a: s.a,
            d: s.d,
            n: s.n,
            x: Complex64::new(s.x, 0.0),
        }
    }
}

/// Equations of motion for unequal atoms.
///
/// `rho_{ba,ab}` is the conjugate of `x`; `n` stays real, so the imaginary
/// part of the correlation source term in `dn/dt` is dropped.
pub fn rhs_general(s: &GeneralState, rates: &RateSet) -> GeneralState {
    let gp = rates.gamma_plus;
    let gm = rates.gamma_minus;
    let sum = rates.gammabar_plus + rates.gammabar_minus;
    let diff = rates.gammabar_plus - rates.gammabar_minus;
    let vac = rates.gamma_vac;
    let total = 2.0 * gp + vac;
    let source = 4.0 * sum * s.x + 4.0 * diff * s.x.conj();
    GeneralState {
        a: -total * s.a + gp - gm * s.d,
        d: -total * s.d - 2.0 * gm * (2.0 * s.a - 1.0),
        n: -2.0 * total * s.n - 2.0 * vac * (2.0 * s.a - 1.0) + source.re,
        x: -Complex64::new(vac + 2.0 * gp, rates.delta12) * s.x + sum * s.n,
    }
}

/// Emitted intensity per atom, `-da/dt`.
pub fn intensity(s: &ReducedState, rates: &RateSet) -> f64 {
    (2.0 * rates.gamma_plus + rates.gamma_vac) * s.a - rates.gamma_plus + rates.gamma_minus * s.d
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub state: ReducedState,
    pub rates: RateSet,
    pub intensity: f64,
    pub rho_pp: f64,
    pub rho_mm: f64,
    pub witness: f64,
    /// Sample lies on the `sample_interval` grid.
    pub checkpoint: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<Sample>,
    pub stats: OdeStats,
}

impl Trajectory {
    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> Option<&Sample> {
        self.samples.first()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    pub fn checkpoints(&self) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(|s| s.checkpoint)
    }

    /// Sample closest in time to `t`.
    pub fn nearest(&self, t: f64) -> Option<&Sample> {
        self.samples
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }

    pub fn max_by(&self, f: impl Fn(&Sample) -> f64) -> f64 {
        self.samples.iter().map(f).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Trapezoid-rule integral of the intensity up to time `t`.
    pub fn emitted_energy(&self, t: f64) -> f64 {
        self.samples
            .windows(2)
            .take_while(|w| w[1].t <= t)
            .map(|w| 0.5 * (w[1].t - w[0].t) * (w[0].intensity + w[1].intensity))
            .sum()
    }
}

fn sample_at(t: f64, state: ReducedState, rates: RateSet, checkpoint: bool) -> Result<Sample> {
    let rho = reconstruct(&state)?;
    let (rho_pp, rho_mm) = super_sub_populations(&state);
    Ok(Sample {
        t,
        state,
        rates,
        intensity: intensity(&state, &rates),
        rho_pp,
        rho_mm,
        witness: entanglement_witness(&rho),
        checkpoint,
    })
}

/// Integrates the small-sample equations from `config.initial`.
///
/// The rates are re-solved at every right-hand-side evaluation, warm-started
/// from the previous solution. In Kramers-Kronig mode the chirp is updated
/// once per accepted step as the self-consistent root of the Kramers-Kronig
/// relation for the current rate spectrum.
pub fn integrate(config: &IntegratorConfig, params: &Parameters) -> Result<Trajectory> {
    params.validate()?;
    config.validate()?;
    reconstruct(&config.initial)?;

    let solver = config.solver(params);
    let checkpoints = config.checkpoints();
    let warm: Cell<Option<f64>> = Cell::new(None);
    let delta = Cell::new(0.0);
    let chirp_grid = match params.delta_mode {
        DeltaMode::KramersKronig => Some(sinh_grid(
            config.chirp_grid.half_width,
            config.chirp_grid.points,
            config.chirp_grid.scale,
        )?),
        DeltaMode::Zero => None,
    };

    let rates_at = |s: &ReducedState| -> Result<RateSet> {
        let r = solve_self_consistent(s.a, s.x, delta.get(), params, warm.get())?;
        warm.set(Some(r.gamma));
        Ok(RateSet::symmetric(r.gamma, r.gammabar, params.gamma).with_delta(delta.get()))
    };

    let mut samples: Vec<Sample> = Vec::new();
    let outcome = solver.integrate(
        0.0,
        config.initial.to_array(),
        config.t_end,
        &checkpoints,
        |_, y| {
            let s = ReducedState::from_array(*y);
            let rates = rates_at(&s)?;
            Ok(rhs_small_sample(&s, &rates).to_array())
        },
        |step| {
            let s = ReducedState::from_array(*step.y);
            let rates = rates_at(&s)?;
            samples.push(sample_at(step.t, s, rates, step.checkpoint)?);
            if let Some(grid) = &chirp_grid {
                let profile = gamma_spectrum(s.a, s.x, params, grid)?;
                delta.set(solve_chirp(&profile, delta.get())?);
            }
            Ok(if s.a < config.min_population {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            })
        },
    );

    match outcome {
        Ok(stats) => Ok(Trajectory { samples, stats }),
        Err(OdeFailure::Rhs { t, y, error }) => Err(Error::SolverFailure {
            t,
            state: ReducedState::from_array([y[0], y[1], y[2], y[3]]),
            source: Box::new(error),
        }),
        Err(OdeFailure::Observer { error, .. }) => Err(error),
        Err(OdeFailure::StepUnderflow { t, h }) => Err(Error::StepUnderflow { t, h }),
        Err(OdeFailure::StepBudget { t, max_steps }) => Err(Error::StepBudget { t, max_steps }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub t_max: f64,
    pub peak_intensity: f64,
    /// The maximum sits on the first or last sample; `t_end` may be too short
    /// or the emission is monotone.
    pub boundary: bool,
}

/// Global intensity maximum, refined by the parabola through the sample and
/// its two neighbours.
pub fn find_peak(traj: &Trajectory) -> Result<Peak> {
    let s = traj.samples();
    if s.len() < 3 {
        return Err(Error::TooFewSamples(s.len()));
    }
    let k = s
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if v.intensity > s[best].intensity { i } else { best });
    if k == 0 || k == s.len() - 1 {
        return Ok(Peak {
            t_max: s[k].t,
            peak_intensity: s[k].intensity,
            boundary: true,
        });
    }
    let (t0, t1, t2) = (s[k - 1].t, s[k].t, s[k + 1].t);
    let (y0, y1, y2) = (s[k - 1].intensity, s[k].intensity, s[k + 1].intensity);
    let d01 = (y1 - y0) / (t1 - t0);
    let d12 = (y2 - y1) / (t2 - t1);
    let curvature = (d12 - d01) / (t2 - t0);
    if !(curvature < 0.0) {
        return Ok(Peak {
            t_max: t1,
            peak_intensity: y1,
            boundary: false,
        });
    }
    let t_star = (0.5 * (t0 + t1) - d01 / (2.0 * curvature)).clamp(t0, t2);
    let value = y0 + d01 * (t_star - t0) + curvature * (t_star - t0) * (t_star - t1);
    Ok(Peak {
        t_max: t_star,
        peak_intensity: value,
        boundary: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn free_decay_derivative() {
        let d = rhs_small_sample(&ReducedState::fully_inverted(), &RateSet::vacuum(1.0));
        assert_eq!(d, ReducedState::new(-1.0, 0.0, -4.0, 0.0));
        let d = rhs_small_sample(&ReducedState::ground(), &RateSet::vacuum(1.0));
        assert_eq!(d, ReducedState::new(0.0, 0.0, 0.0, 0.0));
        // product states stay product states: n = (2a-1)^2
        for a in [0.1, 0.4, 0.75] {
            let s = ReducedState::new(a, 0.0, (2.0 * a - 1.0f64).powi(2), 0.0);
            let d = rhs_small_sample(&s, &RateSet::vacuum(1.0));
            assert!(close(d.n, -4.0 * a * (2.0 * a - 1.0), 1e-15));
        }
    }

    #[test]
    fn general_reduces_to_small_sample() {
        let mut seed = 0x9e37_79b9_7f4a_7c15_u64;
        let mut next = || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let s = ReducedState::new(next(), 0.0, 2.0 * next() - 1.0, next() - 0.5);
            let rates = RateSet::symmetric(50.0 * next(), 50.0 * next(), 1.0);
            let small = rhs_small_sample(&s, &rates);
            let general = rhs_general(&s.into(), &rates);
            assert_eq!(general.a, small.a);
            assert_eq!(general.n, small.n);
            assert_eq!(general.x, Complex64::new(small.x, 0.0));
            assert_eq!(general.d, 0.0);
        }
    }

    #[test]
    fn difference_decays_with_vacuum_rate() {
        let s = GeneralState {
            a: 0.3,
            d: 0.2,
            n: 0.1,
            x: Complex64::new(0.05, 0.0),
        };
        let d = rhs_general(&s, &RateSet::vacuum(1.0));
        assert!(close(d.d, -0.2, 1e-15));
    }

    #[test]
    fn intensity_examples() {
        assert_eq!(intensity(&ReducedState::ground(), &RateSet::vacuum(0.0)), 0.0);
        assert_eq!(intensity(&ReducedState::fully_inverted(), &RateSet::vacuum(1.0)), 1.0);
        let r = RateSet::symmetric(28.9, 3.0, 1.0);
        assert!(close(intensity(&ReducedState::fully_inverted(), &r), 29.9, 1e-12));
    }

    fn synthetic(points: &[(f64, f64)]) -> Trajectory {
        Trajectory {
            samples: points
                .iter()
                .map(|&(t, i)| Sample {
                    t,
                    state: ReducedState::ground(),
                    rates: RateSet::vacuum(1.0),
                    intensity: i,
                    rho_pp: 0.0,
                    rho_mm: 0.0,
                    witness: 0.0,
                    checkpoint: false,
                })
                .collect(),
            stats: OdeStats::default(),
        }
    }

    #[test]
    fn peak_quadratic_refinement() {
        // parabola 5 - 2 (t - 0.37)^2 on an uneven grid
        let f = |t: f64| 5.0 - 2.0 * (t - 0.37).powi(2);
        let pts: Vec<(f64, f64)> = [0.0, 0.1, 0.25, 0.33, 0.5, 0.8].iter().map(|&t| (t, f(t))).collect();
        let p = find_peak(&synthetic(&pts)).unwrap();
        assert!(!p.boundary);
        assert!(close(p.t_max, 0.37, 1e-12) && close(p.peak_intensity, 5.0, 1e-12));
    }

    #[test]
    fn peak_on_boundary_is_flagged() {
        let pts: Vec<(f64, f64)> = (0..10).map(|k| (k as f64, (-(k as f64)).exp())).collect();
        let p = find_peak(&synthetic(&pts)).unwrap();
        assert!(p.boundary);
        assert_eq!((p.t_max, p.peak_intensity), (0.0, 1.0));
        assert!(matches!(
            find_peak(&synthetic(&pts[..2])),
            Err(Error::TooFewSamples(2))
        ));
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::new(0.0).validate().is_err());
        let c = IntegratorConfig {
            rel_tol: -1.0,
            ..IntegratorConfig::default()
        };
        assert!(c.validate().is_err());
        let c = IntegratorConfig {
            initial: ReducedState::new(0.1, 0.0, -1.0, 0.0),
            ..IntegratorConfig::default()
        };
        assert!(matches!(
            integrate(&c, &Parameters::default()),
            Err(Error::UnphysicalState { .. })
        ));
    }
}
