//! Dormand-Prince 5(4) integrator with PI step-size control.
//!
//! The right-hand side is fallible: if a trial stage cannot be evaluated the
//! step is rejected and retried with a smaller step, which is how excursions
//! of a trial state outside the region where the rates exist are handled.
//! Checkpoint times are hit exactly by shortening the step that would cross
//! them.

use std::ops::ControlFlow;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// fifth-order weights minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - BETA * 0.75;
const MAX_GROWTH: f64 = 10.0;
const MAX_SHRINK: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5 {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub initial_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
            initial_step: None,
            max_steps: 5_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub failed_stages: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OdeFailure<E> {
    /// The right-hand side failed at an accepted point or kept failing until
    /// the step underflowed.
    Rhs { t: f64, y: Vec<f64>, error: E },
    StepUnderflow { t: f64, h: f64 },
    StepBudget { t: f64, max_steps: usize },
    Observer { t: f64, error: E },
}

/// Accepted point passed to the observer.
#[derive(Debug, Clone, Copy)]
pub struct StepInfo<'a, const N: usize> {
    pub t: f64,
    pub y: &'a [f64; N],
    pub dydt: &'a [f64; N],
    /// `t` coincides with a requested checkpoint.
    pub checkpoint: bool,
}

impl Dopri5 {
    /// Integrates from `t0` to `t_end`, calling `observer` at `t0` and after
    /// every accepted step. The observer may stop the integration early.
    pub fn integrate<const N: usize, E, F, O>(
        &self,
        t0: f64,
        y0: [f64; N],
        t_end: f64,
        checkpoints: &[f64],
        mut rhs: F,
        mut observer: O,
    ) -> Result<OdeStats, OdeFailure<E>>
    where
        F: FnMut(f64, &[f64; N]) -> Result<[f64; N], E>,
        O: FnMut(StepInfo<'_, N>) -> Result<ControlFlow<()>, E>,
    {
        let mut stats = OdeStats::default();
        let mut t = t0;
        let mut y = y0;
        let mut k1 = rhs(t, &y).map_err(|error| OdeFailure::Rhs {
            t,
            y: y.to_vec(),
            error,
        })?;
        stats.evaluations += 1;

        let mut pending = checkpoints.iter().copied().filter(|&c| c > t0 && c <= t_end).peekable();
        let first_is_checkpoint = checkpoints.contains(&t0);
        let info = StepInfo {
            t,
            y: &y,
            dydt: &k1,
            checkpoint: first_is_checkpoint,
        };
        if observer(info).map_err(|error| OdeFailure::Observer { t, error })?.is_break() {
            return Ok(stats);
        }

        let span = t_end - t0;
        let mut h = self
            .initial_step
            .unwrap_or_else(|| self.initial_step_guess(&y, &k1, span))
            .min(self.max_step)
            .min(span);
        let mut err_prev: f64 = 1e-4;
        let mut rejected_last = false;

        while t < t_end {
            if stats.accepted >= self.max_steps {
                return Err(OdeFailure::StepBudget {
                    t,
                    max_steps: self.max_steps,
                });
            }
            let min_step = 16.0 * f64::EPSILON * t.abs().max(span.abs()).max(f64::MIN_POSITIVE);
            let next_target = pending.peek().copied().unwrap_or(t_end);
            let h_free = h;
            let clipped = t + h >= next_target || next_target - (t + h) < min_step;
            if clipped {
                h = next_target - t;
            }
            let hit_checkpoint = clipped && pending.peek().is_some();
            if h < min_step {
                return Err(OdeFailure::StepUnderflow { t, h });
            }

            let attempt = self.step(t, &y, &k1, h, &mut rhs, &mut stats);
            let (y_new, k7, err) = match attempt {
                Ok(v) => v,
                Err(error) => {
                    stats.failed_stages += 1;
                    let shrunk = 0.25 * h;
                    if shrunk < min_step {
                        return Err(OdeFailure::Rhs {
                            t,
                            y: y.to_vec(),
                            error,
                        });
                    }
                    h = shrunk;
                    rejected_last = true;
                    continue;
                }
            };

            if err <= 1.0 {
                let t_new = if clipped { next_target } else { t + h };
                t = t_new;
                y = y_new;
                k1 = k7;
                stats.accepted += 1;
                if hit_checkpoint {
                    pending.next();
                }
                let info = StepInfo {
                    t,
                    y: &y,
                    dydt: &k1,
                    checkpoint: hit_checkpoint,
                };
                if observer(info).map_err(|error| OdeFailure::Observer { t, error })?.is_break() {
                    break;
                }
                let mut factor = SAFETY * err.max(1e-16).powf(-EXPO) * err_prev.powf(BETA);
                factor = factor.clamp(MAX_SHRINK, MAX_GROWTH);
                if rejected_last {
                    factor = factor.min(1.0);
                }
                err_prev = err.max(1e-4);
                h = (h * factor).min(self.max_step);
                if clipped {
                    h = h.max(h_free.min(self.max_step));
                }
                rejected_last = false;
            } else {
                stats.rejected += 1;
                let factor = (SAFETY * err.powf(-0.2)).max(MAX_SHRINK);
                h *= factor;
                rejected_last = true;
            }
        }
        Ok(stats)
    }

    #[allow(clippy::type_complexity)]
    fn step<const N: usize, E, F>(
        &self,
        t: f64,
        y: &[f64; N],
        k1: &[f64; N],
        h: f64,
        rhs: &mut F,
        stats: &mut OdeStats,
    ) -> Result<([f64; N], [f64; N], f64), E>
    where
        F: FnMut(f64, &[f64; N]) -> Result<[f64; N], E>,
    {
        let combine = |coeffs: &[(f64, &[f64; N])]| {
            let mut out = *y;
            for (c, k) in coeffs {
                for i in 0..N {
                    out[i] += h * c * k[i];
                }
            }
            out
        };
        let mut eval = |tt: f64, yy: &[f64; N]| {
            stats.evaluations += 1;
            rhs(tt, yy)
        };
        let k2 = eval(t + C2 * h, &combine(&[(A21, k1)]))?;
        let k3 = eval(t + C3 * h, &combine(&[(A31, k1), (A32, &k2)]))?;
        let k4 = eval(t + C4 * h, &combine(&[(A41, k1), (A42, &k2), (A43, &k3)]))?;
        let k5 = eval(t + C5 * h, &combine(&[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
        let k6 = eval(
            t + h,
            &combine(&[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        )?;
        let y_new = combine(&[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = eval(t + h, &y_new)?;

        let mut sum = 0.0;
        for i in 0..N {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = self.abs_tol + self.rel_tol * y[i].abs().max(y_new[i].abs());
            sum += (e / scale).powi(2);
        }
        let err = (sum / N as f64).sqrt();
        Ok((y_new, k7, if err.is_finite() { err } else { f64::INFINITY }))
    }

    fn initial_step_guess<const N: usize>(&self, y: &[f64; N], f: &[f64; N], span: f64) -> f64 {
        let scale = |i: usize| self.abs_tol + self.rel_tol * y[i].abs();
        let norm = |v: &[f64; N]| {
            ((0..N).map(|i| (v[i] / scale(i)).powi(2)).sum::<f64>() / N as f64).sqrt()
        };
        let (d0, d1) = (norm(y), norm(f));
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h.min(span).max(1e-12 * span.abs())
    }
}

/// Uniform checkpoint grid `k * interval` for `k = 0, 1, ...` up to `t_end`.
pub fn checkpoint_grid(interval: f64, t_end: f64) -> Vec<f64> {
    if !(interval > 0.0) {
        return vec![0.0];
    }
    let count = (t_end / interval + 1e-9).floor() as usize;
    (0..=count).map(|k| k as f64 * interval).filter(|&t| t <= t_end).collect()
}
