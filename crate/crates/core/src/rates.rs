//! Closed-form cooperative decay rates and their self-consistent solution.
//!
//! The single-atom rate `Gamma` and the cross rate `Gammabar` depend on the
//! atomic variables `a` and `x` and on `Gamma` itself through the dressed
//! linewidth `Gamma_f = gamma/2 + Gamma`. [`rate_rhs`] evaluates the right
//! hand side of `Gamma = F(Gamma)`, [`solve_self_consistent`] finds the fixed
//! point.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Parameters, SizeMode};

/// Largest exponent accepted before the rate is declared saturated.
pub const SATURATION_EXPONENT: f64 = 700.0;

/// Upper end of the root bracket, in units of `gamma`.
pub const GAMMA_CEILING: f64 = 1e12;

const SCAN_POINTS: usize = 96;
const MAX_ITERATIONS: usize = 300;

/// `(e^z - 1)/z`, with `phi(0) = 1`; the series is used for `|z| < eps`.
pub fn phi(z: f64, eps: f64) -> f64 {
    if z.abs() < eps {
        1.0 + z / 2.0 + z * z / 6.0
    } else {
        z.exp_m1() / z
    }
}

/// Geometric factor
/// `I(zeta, rho) = [((zeta-1) e^zeta + cos rho)^2 + (rho e^zeta - sin rho)^2] / (zeta^2 + rho^2)^2`.
///
/// With `w = zeta + i rho` the numerator is `|(w - 1) e^w + 1|^2`, whose
/// Taylor series `sum_{k>=2} (k-1)/k! w^k` gives the finite limit `1/4` at
/// the origin. The series is used for `|w| < 0.5`.
pub fn geometric_factor(zeta: f64, rho: f64) -> f64 {
    let w = Complex64::new(zeta, rho);
    let r = w.norm();
    if r < 0.5 {
        // sum_{k>=2} (k-1)/k! w^(k-2), Horner from the top
        let mut s = Complex64::new(0.0, 0.0);
        for k in (2..=24u32).rev() {
            let coeff = (k - 1) as f64 / factorial(k);
            s = s * w + coeff;
        }
        s.norm_sqr()
    } else {
        let num = (w - 1.0) * w.exp() + 1.0;
        num.norm_sqr() / (r * r).powi(2)
    }
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// Where the rates are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateInputs {
    pub a: f64,
    pub x: f64,
    /// Detuning at which the rates are evaluated, units of `gamma`.
    pub delta_probe: f64,
    pub params: Parameters,
}

impl RateInputs {
    pub fn new(a: f64, x: f64, delta_probe: f64, params: Parameters) -> Self {
        Self {
            a,
            x,
            delta_probe,
            params,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateIntermediates {
    /// Dressed linewidth `gamma/2 + Gamma`.
    pub gamma_f: f64,
    pub zeta0: f64,
    pub zeta: f64,
    pub rho_tilde: f64,
    pub geom: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEvaluation {
    pub gamma_next: f64,
    pub gammabar: f64,
    pub intermediates: RateIntermediates,
}

/// One evaluation of the closed-form rates at trial value `gamma_current`.
///
/// The inversion-singular factor `a/(2a-1) (e^{2 zeta} - 1)` is evaluated as
/// `a (C rho gamma / Gamma_f) L(Delta) phi(2 zeta)`, which is finite at
/// `a = 1/2`.
pub fn rate_rhs(inputs: &RateInputs, gamma_current: f64) -> Result<RateEvaluation> {
    let p = &inputs.params;
    let g = p.gamma;
    let (a, x, delta) = (inputs.a, inputs.x, inputs.delta_probe);
    if !(gamma_current >= 0.0) {
        return Err(Error::Domain {
            what: "trial Gamma",
            value: gamma_current,
        });
    }

    let gamma_f = g / 2.0 + gamma_current;
    let denom = gamma_f * gamma_f + delta * delta;
    let lorentz = gamma_f * gamma_f / denom;
    let weight = g * gamma_f / denom;
    let coop_size = p.coop * p.rho_size;

    let zeta0 = 0.5 * coop_size * (g / gamma_f) * (2.0 * a - 1.0);
    let zeta = zeta0 * lorentz;
    if 2.0 * zeta > SATURATION_EXPONENT {
        return Err(Error::Saturation { zeta });
    }
    let rho_tilde = match p.size_mode {
        SizeMode::Dispersive => p.rho_size - delta / gamma_f * zeta,
        SizeMode::Static => p.rho_size,
    };
    let geom = geometric_factor(zeta, rho_tilde);

    let incoherent = g * a * (coop_size * g / gamma_f) * lorentz * phi(2.0 * zeta, p.series_epsilon);
    let correlated = 2.0 * g * p.coop.powi(2) * p.rho_size.powi(4) * weight * x * geom;
    let gamma_next = incoherent + correlated;
    let gammabar = 3.0 * g * coop_size * weight * a * geom + correlated;
    if !gamma_next.is_finite() || !gammabar.is_finite() {
        return Err(Error::Saturation { zeta });
    }

    Ok(RateEvaluation {
        gamma_next,
        gammabar,
        intermediates: RateIntermediates {
            gamma_f,
            zeta0,
            zeta,
            rho_tilde,
            geom,
        },
    })
}

/// Converged fixed point of [`rate_rhs`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfConsistentRates {
    pub gamma: f64,
    pub gammabar: f64,
    /// Root-refinement iterations spent after the bracket was found.
    pub iterations: usize,
    pub intermediates: RateIntermediates,
}

struct FixedPoint<'a> {
    inputs: &'a RateInputs,
    tol: f64,
    scale: f64,
}

impl FixedPoint<'_> {
    /// `rhs(G) - G`; saturation counts as `+inf` (rhs decreases with `G`).
    fn residual(&self, gamma: f64) -> Result<f64> {
        match rate_rhs(self.inputs, gamma) {
            Ok(e) => Ok(e.gamma_next - gamma),
            Err(Error::Saturation { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    }

    fn converged(&self, gamma: f64, residual: f64) -> bool {
        residual.abs() <= self.tol * gamma.max(self.scale)
    }

    fn no_root(&self, upper: f64) -> Error {
        Error::NoRoot {
            a: self.inputs.a,
            x: self.inputs.x,
            delta: self.inputs.delta_probe,
            upper,
        }
    }

    /// Safeguarded Newton on a bracket with `residual(lo) > 0 > residual(hi)`.
    fn refine(&self, mut lo: f64, mut hi: f64, start: f64, start_res: f64) -> Result<(f64, usize)> {
        let (mut x, mut fx) = (start, start_res);
        for it in 1..=MAX_ITERATIONS {
            if fx > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let h = 1e-7 * x.max(self.scale);
            let slope = (self.residual(x + h)? - fx) / h;
            let newton = x - fx / slope;
            x = if slope.is_finite() && slope < 0.0 && newton > lo && newton < hi {
                newton
            } else if lo > 0.0 && hi / lo > 4.0 {
                (lo * hi).sqrt()
            } else {
                0.5 * (lo + hi)
            };
            fx = self.residual(x)?;
            if self.converged(x, fx) || hi - lo <= 4.0 * f64::EPSILON * hi.max(self.scale) {
                return Ok((x, it));
            }
        }
        Ok((x, MAX_ITERATIONS))
    }

    /// All sign changes of the residual on a geometric grid over `[0, upper]`.
    fn scan(&self, upper: f64, res0: f64) -> Result<Vec<(f64, f64, f64)>> {
        let bottom = (upper * 1e-14).max(self.scale * 1e-12).min(upper);
        let ratio = (upper / bottom).powf(1.0 / (SCAN_POINTS - 1) as f64);
        let mut brackets = Vec::new();
        let (mut prev_x, mut prev_f) = (0.0, res0);
        for k in 0..SCAN_POINTS {
            let xk = if k + 1 == SCAN_POINTS {
                upper
            } else {
                bottom * ratio.powi(k as i32)
            };
            let fk = self.residual(xk)?;
            if prev_f > 0.0 && fk <= 0.0 {
                brackets.push((prev_x, xk, fk));
            } else if prev_f <= 0.0 && fk > 0.0 {
                // an upward crossing implies another downward one or none
                brackets.push((prev_x, xk, fk));
            }
            prev_x = xk;
            prev_f = fk;
        }
        Ok(brackets)
    }
}

/// Solves `Gamma = rate_rhs(Gamma)` for `Gamma >= 0` by bracketing followed by
/// safeguarded Newton refinement.
///
/// Without a warm start the whole range `[0, upper]` is
/// scanned and more than one crossing is reported as
/// [`Error::AmbiguousRoot`]. A warm start only searches outward from the
/// given value.
pub fn solve_self_consistent(
    a: f64,
    x: f64,
    delta: f64,
    params: &Parameters,
    warm_start: Option<f64>,
) -> Result<SelfConsistentRates> {
    if !(-1e-12..=1.0 + 1e-12).contains(&a) {
        return Err(Error::Domain {
            what: "population a",
            value: a,
        });
    }
    let inputs = RateInputs::new(a, x, delta, *params);
    let fp = FixedPoint {
        inputs: &inputs,
        tol: params.fixed_point_tol,
        scale: params.gamma,
    };
    let finish = |gamma: f64, iterations: usize| -> Result<SelfConsistentRates> {
        let e = rate_rhs(&inputs, gamma)?;
        Ok(SelfConsistentRates {
            gamma,
            gammabar: e.gammabar,
            iterations,
            intermediates: e.intermediates,
        })
    };

    let res0 = fp.residual(0.0)?;
    if res0 <= 0.0 {
        return if fp.converged(0.0, res0) {
            finish(0.0, 0)
        } else {
            Err(fp.no_root(0.0))
        };
    }
    // F is not monotone in general (below half inversion, or off resonance
    // where the Lorentzian weight grows with the linewidth), so F(0) need not
    // bound the root: widen until the residual turns non-positive.
    let ceiling = GAMMA_CEILING * params.gamma;
    let mut upper = res0.min(ceiling);
    while fp.residual(upper)? > 0.0 {
        if upper >= ceiling {
            return Err(fp.no_root(upper));
        }
        upper = (4.0 * upper).min(ceiling);
    }

    if let Some(w) = warm_start.filter(|w| w.is_finite() && *w >= 0.0) {
        let w = w.min(upper);
        let fw = fp.residual(w)?;
        if fp.converged(w, fw) {
            return finish(w, 0);
        }
        let mut step = 1e-3 * w.max(params.gamma);
        let (lo, hi) = if fw > 0.0 {
            let mut lo = w;
            loop {
                let hi = (w + step).min(upper);
                let fh = fp.residual(hi)?;
                if fh <= 0.0 {
                    break (lo, hi);
                }
                if hi >= upper {
                    return Err(fp.no_root(upper));
                }
                lo = hi;
                step *= 4.0;
            }
        } else {
            let mut hi = w;
            loop {
                let lo = (w - step).max(0.0);
                let fl = if lo == 0.0 { res0 } else { fp.residual(lo)? };
                if fl > 0.0 {
                    break (lo, hi);
                }
                hi = lo;
                step *= 4.0;
            }
        };
        let (root, its) = fp.refine(lo, hi, w, fw)?;
        return finish(root, its);
    }

    let brackets = fp.scan(upper, res0)?;
    match brackets.as_slice() {
        [] => Err(fp.no_root(upper)),
        [(lo, hi, fhi)] if *fhi <= 0.0 => {
            let (lo, hi) = (*lo, *hi);
            if fp.converged(hi, *fhi) {
                return finish(hi, 0);
            }
            let start = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * hi };
            let fs = fp.residual(start)?;
            let (root, its) = fp.refine(lo, hi, start, fs)?;
            finish(root, its)
        }
        many => Err(Error::AmbiguousRoot {
            brackets: many.iter().map(|(l, h, _)| (*l, *h)).collect(),
        }),
    }
}

/// Fourier-space source functions in units where `wp^2 N / hbar^2 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceFunctions {
    /// Single-atom symmetrised source `P^(1)s`.
    pub p1s: f64,
    /// Two-atom source `P^(2)s` (carries the factor `x`).
    pub p2s: f64,
    /// Single-atom retarded response `P^(1)ret`.
    pub p1ret: Complex64,
}

pub fn source_functions(
    a: f64,
    x: f64,
    gamma_rate: f64,
    delta_prime: f64,
    delta: f64,
    gamma_vac: f64,
) -> SourceFunctions {
    let width = gamma_vac / 2.0 + gamma_rate;
    let detuning = delta_prime - delta;
    let lorentz = width / (width * width + detuning * detuning);
    SourceFunctions {
        p1s: 2.0 * a * lorentz,
        p2s: 2.0 * x * lorentz,
        p1ret: Complex64::new(1.0 - 2.0 * a, 0.0) / Complex64::new(width, detuning),
    }
}

/// Complex propagation constant of the medium in units of `omega/c`:
/// `q0 = 1 + i (C gamma / 2) P^(1)ret`.
pub fn wave_vector(p1ret: Complex64, params: &Parameters) -> Complex64 {
    Complex64::new(1.0, 0.0) + Complex64::i() * (0.5 * params.coop * params.gamma) * p1ret
}

/// Retarded field propagator `-i scale e^{i q0 r} / r`, `r` in units of
/// `c/omega`.
///
/// The outgoing-wave sign is chosen so that an inverted medium (`a > 1/2`)
/// amplifies. At `r = rho_size` and zero detuning the amplitude gain
/// `|D| r / scale` equals `e^{zeta0}`, the same exponent that enters the
/// geometric factor.
pub fn retarded_kernel(r: f64, p1ret: Complex64, scale: f64, params: &Parameters) -> Result<Complex64> {
    if !(r > 0.0) {
        return Err(Error::Domain {
            what: "kernel radius",
            value: r,
        });
    }
    let q0 = wave_vector(p1ret, params);
    Ok(-Complex64::i() * scale * (Complex64::i() * q0 * r).exp() / r)
}

/// Cooperativity `C = N lambda^3 / (4 pi^2)` from number density and
/// wavelength (any consistent length unit).
pub fn cooperativity_from_density(number_density: f64, wavelength: f64) -> Result<f64> {
    if !(number_density >= 0.0) || !number_density.is_finite() {
        return Err(Error::Domain {
            what: "number density",
            value: number_density,
        });
    }
    if !(wavelength > 0.0) || !wavelength.is_finite() {
        return Err(Error::Domain {
            what: "wavelength",
            value: wavelength,
        });
    }
    Ok(number_density * wavelength.powi(3) / (4.0 * std::f64::consts::PI.powi(2)))
}
