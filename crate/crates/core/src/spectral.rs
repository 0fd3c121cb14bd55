//! Detuning dependence of the self-consistent rate and the chirp obtained
//! from it by a principal-value (Hilbert) integral.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rates::solve_self_consistent;
use crate::types::Parameters;

/// Samples of `Gamma(delta')` on a grid symmetric about zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralProfile {
    grid: Vec<f64>,
    gamma: Vec<f64>,
}

impl SpectralProfile {
    pub fn new(grid: Vec<f64>, gamma: Vec<f64>) -> Result<Self> {
        validate_grid(&grid)?;
        if grid.len() != gamma.len() {
            return Err(Error::Grid(format!(
                "{} grid points but {} samples",
                grid.len(),
                gamma.len()
            )));
        }
        Ok(Self { grid, gamma })
    }

    /// Profile of an arbitrary function on `grid`, mainly for synthetic
    /// checks of [`chirp_kk`].
    pub fn from_fn(grid: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let gamma = grid.iter().map(|&d| f(d)).collect();
        Self::new(grid, gamma)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.iter().copied().zip(self.gamma.iter().copied())
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 3 {
        return Err(Error::Grid(format!("need at least 3 points, got {}", grid.len())));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::Grid("non-finite grid point".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Grid("grid is not strictly increasing".into()));
    }
    let span = grid[grid.len() - 1] - grid[0];
    let asym = grid
        .iter()
        .zip(grid.iter().rev())
        .map(|(l, r)| (l + r).abs())
        .fold(0.0, f64::max);
    if asym > 1e-12 * span {
        return Err(Error::Grid(format!("grid is not symmetric about 0 (defect {asym:e})")));
    }
    Ok(())
}

/// Grid `scale * sinh(u)` with `u` uniform, `points` odd, extending to
/// `+-half_width`. Fine near zero, geometric in the tails.
pub fn sinh_grid(half_width: f64, points: usize, scale: f64) -> Result<Vec<f64>> {
    if points < 3 || points.is_multiple_of(2) {
        return Err(Error::Grid(format!("point count must be odd and >= 3, got {points}")));
    }
    if !(half_width > 0.0) || !(scale > 0.0) {
        return Err(Error::Grid("half width and scale must be positive".into()));
    }
    let half = points / 2;
    let u_max = (half_width / scale).asinh();
    let positive: Vec<f64> = (1..=half)
        .map(|k| {
            if k == half {
                half_width
            } else {
                scale * (u_max * k as f64 / half as f64).sinh()
            }
        })
        .collect();
    let mut grid: Vec<f64> = positive.iter().rev().map(|v| -v).collect();
    grid.push(0.0);
    grid.extend(positive);
    Ok(grid)
}

/// Self-consistent `Gamma(delta')` at each grid detuning for fixed `(a, x)`.
///
/// Every point is solved independently, warm-started from the on-resonance
/// solution, so the result does not depend on evaluation order.
pub fn gamma_spectrum(a: f64, x: f64, params: &Parameters, grid: &[f64]) -> Result<SpectralProfile> {
    validate_grid(grid)?;
    let center = solve_self_consistent(a, x, 0.0, params, None)
        .map_err(|e| Error::SpectrumPoint {
            delta_prime: 0.0,
            source: Box::new(e),
        })?
        .gamma;
    let gamma = grid
        .par_iter()
        .map(|&dp| {
            if dp == 0.0 {
                return Ok(center);
            }
            solve_self_consistent(a, x, dp, params, Some(center))
                .map(|s| s.gamma)
                .map_err(|e| Error::SpectrumPoint {
                    delta_prime: dp,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    SpectralProfile::new(grid.to_vec(), gamma)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChirpEstimate {
    /// `(1/pi) PV int Gamma(d') / (delta - d') dd'` over the grid.
    pub chirp: f64,
    /// Estimated magnitude of the truncated tails assuming `1/d'^2` decay.
    pub tail_bound: f64,
}

/// Principal-value integral of the profile by singularity subtraction.
///
/// Computes `int (G(d') - G(delta))/(delta - d') dd'` with the trapezoid rule
/// and adds `G(delta) ln|(delta - lo)/(hi - delta)|` for the subtracted part.
/// When `delta` falls between grid points it is inserted as an extra node
/// with cubic-interpolated value and slope.
pub fn chirp_kk(profile: &SpectralProfile, delta_eval: f64) -> Result<ChirpEstimate> {
    let (xs, ys) = (profile.grid(), profile.gamma());
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    if !(delta_eval > lo && delta_eval < hi) {
        return Err(Error::Domain {
            what: "chirp evaluation detuning",
            value: delta_eval,
        });
    }

    let (g_at, slope_at) = local_cubic(xs, ys, delta_eval);
    let integrand = |x: f64, y: f64| {
        if x == delta_eval {
            -slope_at
        } else {
            (y - g_at) / (delta_eval - x)
        }
    };

    let mut nodes: Vec<(f64, f64)> = Vec::with_capacity(xs.len() + 1);
    for (&x, &y) in xs.iter().zip(ys) {
        if nodes.last().is_some_and(|&(px, _)| px < delta_eval && x > delta_eval) {
            nodes.push((delta_eval, -slope_at));
        }
        nodes.push((x, integrand(x, y)));
    }
    let smooth: f64 = nodes
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum();
    let log_term = g_at * ((delta_eval - lo) / (hi - delta_eval)).ln();

    let tail = |edge: f64, value: f64| value.abs() * edge.abs() / (edge - delta_eval).abs();
    let tail_bound = (tail(lo, ys[0]) + tail(hi, ys[ys.len() - 1])) / PI;

    Ok(ChirpEstimate {
        chirp: (smooth + log_term) / PI,
        tail_bound,
    })
}

/// Self-consistent chirp: the root of `chirp_kk(profile, delta) = delta`
/// nearest to `previous`.
///
/// The Hilbert transform of the profile is bounded, so roots exist, but an
/// asymmetric profile can have several; following the one continuously
/// connected to `previous` keeps the chirp on the small branch that starts
/// at zero for the even profile of a fully inverted, uncorrelated medium.
/// Simply re-evaluating the integral at the previous value is a fixed-point
/// iteration that diverges whenever the transform is steeper than one.
pub fn solve_chirp(profile: &SpectralProfile, previous: f64) -> Result<f64> {
    let xs = profile.grid();
    let edge = 0.999 * xs[xs.len() - 1].min(-xs[0]);
    if !(previous.abs() < edge) {
        return Err(Error::Domain {
            what: "previous chirp",
            value: previous,
        });
    }
    let g = |d: f64| chirp_kk(profile, d).map(|c| c.chirp - d);
    let tol = 1e-12 * previous.abs().max(1.0);
    let g0 = g(previous)?;
    if g0 == 0.0 {
        return Ok(previous);
    }

    let mut step = 1e-3 * previous.abs().max(1.0);
    let (mut lo, mut hi, mut g_lo) = loop {
        let left = (previous - step).max(-edge);
        let right = (previous + step).min(edge);
        let (gl, gr) = (g(left)?, g(right)?);
        let left_cross = gl.signum() != g0.signum();
        let right_cross = gr.signum() != g0.signum();
        match (left_cross, right_cross) {
            // both sides cross: take the one the secant places closer
            (true, true) if gl.abs() * (previous - left) > gr.abs() * (right - previous) => {
                break (left, previous, gl)
            }
            (true, _) if !right_cross || gl.abs() * (previous - left) <= gr.abs() * (right - previous) => {
                break (left, previous, gl)
            }
            (_, true) => break (previous, right, g0),
            _ => {}
        }
        if left <= -edge && right >= edge {
            return Err(Error::Domain {
                what: "self-consistent chirp (no root inside the grid)",
                value: previous,
            });
        }
        step *= 2.0;
    };
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let gm = g(mid)?;
        if gm == 0.0 {
            return Ok(mid);
        }
        if gm.signum() == g_lo.signum() {
            lo = mid;
            g_lo = gm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Value and slope of the profile at `x`.
///
/// On a grid node the sample itself is used with the slope of the quartic
/// through the node and its two neighbours on each side, so that mirrored
/// profiles on a symmetric grid give exactly mirrored slopes. Between nodes
/// the cubic through the four nearest points is used.
fn local_cubic(xs: &[f64], ys: &[f64], x: f64) -> (f64, f64) {
    let n = xs.len();
    if let Ok(k) = xs.binary_search_by(|v| v.total_cmp(&x)) {
        let half = 2.min(k).min(n - 1 - k);
        let idx: Vec<usize> = (k - half..=k + half).collect();
        return (ys[k], lagrange(xs, ys, &idx, x).1);
    }
    let right = xs.partition_point(|&v| v <= x).clamp(1, n - 1);
    let start = right.saturating_sub(2).min(n.saturating_sub(4));
    let idx: Vec<usize> = (start..(start + 4).min(n)).collect();
    lagrange(xs, ys, &idx, x)
}

/// Value and derivative at `x` of the interpolating polynomial through the
/// nodes `idx`.
fn lagrange(xs: &[f64], ys: &[f64], idx: &[usize], x: f64) -> (f64, f64) {
    let mut value = 0.0;
    let mut slope = 0.0;
    for &i in idx {
        let mut basis = 1.0;
        let mut dbasis = 0.0;
        for &j in idx.iter().filter(|&&j| j != i) {
            let denom = xs[i] - xs[j];
            dbasis = dbasis * (x - xs[j]) / denom + basis / denom;
            basis *= (x - xs[j]) / denom;
        }
        value += ys[i] * basis;
        slope += ys[i] * dbasis;
    }
    (value, slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::SizeMode;

    fn lorentz_grid() -> Vec<f64> {
        sinh_grid(1e5, 40_001, 0.05).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(sinh_grid(10.0, 4, 1.0).is_err());
        let g = sinh_grid(10.0, 11, 1.0).unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!((g[0], g[5], g[10]), (-10.0, 0.0, 10.0));
        assert!(SpectralProfile::new(vec![-1.0, 0.5, 1.0], vec![0.0; 3]).is_err());
        assert!(SpectralProfile::new(vec![-1.0, 1.0, 0.0], vec![0.0; 3]).is_err());
        assert!(SpectralProfile::new(vec![-1.0, 0.0, 1.0], vec![0.0; 2]).is_err());
        assert!(SpectralProfile::new(vec![], vec![]).is_err());
    }

    #[test]
    fn zero_profile_has_no_chirp() {
        let p = SpectralProfile::from_fn(sinh_grid(100.0, 101, 1.0).unwrap(), |_| 0.0).unwrap();
        for d in [-3.0, 0.0, 0.7] {
            assert_eq!(chirp_kk(&p, d).unwrap().chirp, 0.0);
        }
    }

    #[test]
    fn even_profile_vanishes_at_center() {
        let grid = sinh_grid(1e3, 2001, 0.3).unwrap();
        for f in [
            (|d: f64| 1.0 / (1.0 + d * d)) as fn(f64) -> f64,
            |d: f64| (-d * d).exp(),
            |d: f64| 3.0 / (4.0 + d.powi(4)),
            // cusp at the origin
            |d: f64| (d.abs() + 1.0).recip().powi(3),
        ] {
            let p = SpectralProfile::from_fn(grid.clone(), f).unwrap();
            assert!(chirp_kk(&p, 0.0).unwrap().chirp.abs() < 1e-10);
        }
    }

    #[test]
    fn outside_grid_is_domain_error() {
        let p = SpectralProfile::from_fn(sinh_grid(10.0, 21, 1.0).unwrap(), |_| 1.0).unwrap();
        assert!(chirp_kk(&p, 10.0).is_err());
        assert!(chirp_kk(&p, -11.0).is_err());
        assert!(chirp_kk(&p, f64::NAN).is_err());
    }

    /// Residue calculus: for G(d) = A w^2/(w^2 + d^2) the closed-contour
    /// evaluation of (1/pi) PV int G(d')/(delta - d') gives A w delta/(w^2 + delta^2).
    #[test]
    fn lorentzian_hilbert_pair() {
        let (amp, w) = (2.5, 1.7);
        let p = SpectralProfile::from_fn(lorentz_grid(), |d| amp * w * w / (w * w + d * d)).unwrap();
        for delta in [w / 2.0, w, 2.0 * w, -w] {
            let est = chirp_kk(&p, delta).unwrap();
            let want = amp * w * delta / (w * w + delta * delta);
            assert!((est.chirp - want).abs() < 1e-4, "delta={delta}: {} vs {want}", est.chirp);
            assert!(est.tail_bound < 1e-4);
        }
    }

    #[test]
    fn self_consistent_chirp() {
        let grid = sinh_grid(1e5, 4001, 0.05).unwrap();
        // even profile: zero is a root
        let even = SpectralProfile::from_fn(grid.clone(), |d| 30.0 / (1.0 + (d / 15.0).powi(2))).unwrap();
        let r0 = solve_chirp(&even, 0.0).unwrap();
        // off-node evaluation interpolates, so the discrete root sits within
        // the interpolation error of zero
        assert!(r0.abs() < 1e-9, "{r0}");
        // dispersive pair A w d/(w^2 + d^2) has slope A/w < 1 at the origin
        // for A = 1, w = 3: for a shifted profile the root solves a cubic
        let shifted = SpectralProfile::from_fn(grid.clone(), |d| 3.0 / (9.0 + (d - 2.0).powi(2))).unwrap();
        let root = solve_chirp(&shifted, 0.0).unwrap();
        let residual = chirp_kk(&shifted, root).unwrap().chirp - root;
        assert!(residual.abs() < 1e-10, "{root}: {residual}");
        // H[G](d) = (d - 2)/(9 + (d - 2)^2) for this profile
        assert!((root - (root - 2.0) / (9.0 + (root - 2.0).powi(2))).abs() < 1e-4);
        // steep profile: the lagged update would run away, the root stays put
        let steep = SpectralProfile::from_fn(grid, |d| 300.0 / (1.0 + d * d) * (1.0 + 0.01 * d / (1.0 + d * d))).unwrap();
        let root = solve_chirp(&steep, 0.0).unwrap();
        assert!(root.abs() < 0.1, "{root}");
        assert!((chirp_kk(&steep, root).unwrap().chirp - root).abs() < 1e-9);
    }

    #[test]
    fn spectrum_center_and_falloff() {
        let params = Parameters::new(10.0, 10.0).unwrap();
        let grid = vec![-1e6, -10.0, 0.0, 10.0, 1e6];
        let prof = gamma_spectrum(1.0, 0.0, &params, &grid).unwrap();
        let center = solve_self_consistent(1.0, 0.0, 0.0, &params, None).unwrap().gamma;
        assert_eq!(prof.gamma()[2], center);
        assert!(prof.gamma()[0] < 1e-6 * center);
        assert!(prof.gamma()[4] < 1e-6 * center);
        assert!(prof.gamma()[1] < center);
    }

    #[test]
    fn static_size_profile_is_even() {
        let params = Parameters {
            size_mode: SizeMode::Static,
            ..Parameters::new(10.0, 10.0).unwrap()
        };
        let grid = sinh_grid(1e4, 201, 1.0).unwrap();
        let prof = gamma_spectrum(0.8, 0.1, &params, &grid).unwrap();
        let g = prof.gamma();
        for i in 0..g.len() {
            let j = g.len() - 1 - i;
            assert!((g[i] - g[j]).abs() <= 1e-12 * g[i].abs().max(1.0), "{i}");
        }
        assert!(chirp_kk(&prof, 0.0).unwrap().chirp.abs() < 1e-10);
    }
}
