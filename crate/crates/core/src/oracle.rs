//! Full two-atom master equation on 4x4 density matrices.
//!
//! This is an independent route to the reduced dynamics: the Liouvillian is
//! assembled from jump operators, the density matrix is propagated in full,
//! and only afterwards reduced. The rates are closed over the same `(a, x)`
//! as in [`crate::dynamics`], so both descriptions must agree.
//!
//! Vectorization is row-major: `vec(rho)[4 i + j] = rho[(i, j)]`, so that
//! `vec(A rho B) = (A kron B^T) vec(rho)`.

use std::cell::Cell;
use std::ops::ControlFlow;

use nalgebra::{Matrix4, SMatrix, SVector};
use num_complex::Complex64;

use crate::dynamics::IntegratorConfig;
use crate::error::{Error, Result};
use crate::ode::OdeFailure;
use crate::rates::solve_self_consistent;
use crate::spectral::{gamma_spectrum, sinh_grid, solve_chirp};
use crate::types::{reduce_unchecked, DeltaMode, Parameters, RateSet, TwoAtomDensityMatrix, AA, AB, BA, BB};

pub type SuperMatrix = SMatrix<Complex64, 16, 16>;
pub type SuperVector = SVector<Complex64, 16>;

/// Smallest eigenvalue tolerated along an oracle trajectory.
pub const POSITIVITY_FLOOR: f64 = -1e-6;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Lowering operator `|b><a|` of atom 1 (`atom = 0`) or atom 2 (`atom = 1`).
pub fn lowering(atom: usize) -> Matrix4<Complex64> {
    let mut m = Matrix4::zeros();
    match atom {
        0 => {
            m[(BA, AA)] = ONE;
            m[(BB, AB)] = ONE;
        }
        1 => {
            m[(AB, AA)] = ONE;
            m[(BB, BA)] = ONE;
        }
        _ => panic!("two atoms only, got index {atom}"),
    }
    m
}

fn kron(a: &Matrix4<Complex64>, b: &Matrix4<Complex64>) -> SuperMatrix {
    let mut out = SuperMatrix::zeros();
    for i in 0..4 {
        for k in 0..4 {
            let aik = a[(i, k)];
            if aik == ZERO {
                continue;
            }
            for j in 0..4 {
                for l in 0..4 {
                    out[(4 * i + j, 4 * k + l)] = aik * b[(j, l)];
                }
            }
        }
    }
    out
}

/// `rho -> A rho B` as a superoperator.
fn sandwich(a: &Matrix4<Complex64>, b: &Matrix4<Complex64>) -> SuperMatrix {
    kron(a, &b.transpose())
}

fn left(a: &Matrix4<Complex64>) -> SuperMatrix {
    sandwich(a, &Matrix4::identity())
}

fn right(b: &Matrix4<Complex64>) -> SuperMatrix {
    sandwich(&Matrix4::identity(), b)
}

pub fn vectorize(m: &Matrix4<Complex64>) -> SuperVector {
    SuperVector::from_fn(|k, _| m[(k / 4, k % 4)])
}

pub fn unvectorize(v: &SuperVector) -> Matrix4<Complex64> {
    Matrix4::from_fn(|i, j| v[4 * i + j])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Liouvillian(SuperMatrix);

impl Liouvillian {
    pub fn matrix(&self) -> &SuperMatrix {
        &self.0
    }

    pub fn apply(&self, rho: &Matrix4<Complex64>) -> Matrix4<Complex64> {
        unvectorize(&(self.0 * vectorize(rho)))
    }

    /// `max_j |tr L(E_j)|` over the 16 matrix units; zero for a
    /// trace-preserving generator.
    pub fn trace_defect(&self) -> f64 {
        (0..16)
            .map(|col| (0..4).map(|i| self.0[(5 * i, col)]).sum::<Complex64>().norm())
            .fold(0.0, f64::max)
    }
}

/// Settings for the full propagation that have no reduced counterpart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Off-diagonal vacuum decay `gamma_12 = gamma_21`; the reduced
    /// small-sample equations correspond to zero.
    pub cross_vacuum: f64,
    /// Multiplies `Gamma` and `Gammabar` before assembling the generator.
    /// Values other than 1 deliberately break equivalence.
    pub rate_scale: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            cross_vacuum: 0.0,
            rate_scale: 1.0,
        }
    }
}

pub fn build_liouvillian(rates: &RateSet) -> Liouvillian {
    build_liouvillian_with(rates, 0.0)
}

/// Generator of
/// `i sum_j H_jj [[s_j, s_j^+], rho]`
/// `- 1/2 sum_ij G_ij ([rho s_i, s_j^+] + [s_i, s_j^+ rho])`
/// `- 1/2 sum_ij (G_ij + g_ij) ([rho s_j^+, s_i] + [s_j^+, s_i rho])`
/// with `s_j = |b><a|` on atom `j` and frequencies in units of `gamma`.
pub fn build_liouvillian_with(rates: &RateSet, cross_vacuum: f64) -> Liouvillian {
    let s = [lowering(0), lowering(1)];
    let induced = [
        [rates.gamma_plus + rates.gamma_minus, rates.gammabar_plus + rates.gammabar_minus],
        [rates.gammabar_plus - rates.gammabar_minus, rates.gamma_plus - rates.gamma_minus],
    ];
    let vacuum = [[rates.gamma_vac, cross_vacuum], [cross_vacuum, rates.gamma_vac]];
    let shift = [
        rates.delta / 2.0 + rates.delta12 / 4.0,
        rates.delta / 2.0 - rates.delta12 / 4.0,
    ];
    let half = Complex64::new(0.5, 0.0);

    let mut l = SuperMatrix::zeros();
    for j in 0..2 {
        if shift[j] != 0.0 {
            let z = s[j] * s[j].adjoint() - s[j].adjoint() * s[j];
            l += (left(&z) - right(&z)) * Complex64::new(0.0, shift[j]);
        }
    }
    for i in 0..2 {
        for j in 0..2 {
            let (si, sj_dag) = (&s[i], s[j].adjoint());
            let pump = Complex64::new(induced[i][j], 0.0);
            if pump != ZERO {
                let anti = si * sj_dag;
                l += (sandwich(&sj_dag, si) - (left(&anti) + right(&anti)) * half) * pump;
            }
            let decay = Complex64::new(induced[i][j] + vacuum[i][j], 0.0);
            if decay != ZERO {
                let anti = sj_dag * si;
                l += (sandwich(si, &sj_dag) - (left(&anti) + right(&anti)) * half) * decay;
            }
        }
    }
    Liouvillian(l)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSample {
    pub t: f64,
    pub rho: TwoAtomDensityMatrix,
    pub checkpoint: bool,
}

fn to_state(m: &Matrix4<Complex64>) -> [f64; 32] {
    let mut y = [0.0; 32];
    for k in 0..16 {
        let z = m[(k / 4, k % 4)];
        y[2 * k] = z.re;
        y[2 * k + 1] = z.im;
    }
    y
}

fn from_state(y: &[f64; 32]) -> Matrix4<Complex64> {
    Matrix4::from_fn(|i, j| {
        let k = 4 * i + j;
        Complex64::new(y[2 * k], y[2 * k + 1])
    })
}

/// Propagates the full master equation with rates re-solved from the
/// reduced variables of the current density matrix at every evaluation.
///
/// The time derivative is projected onto its Hermitian part so the state
/// stays Hermitian. Every accepted step is returned; steps on the
/// `sample_interval` grid are flagged as checkpoints.
pub fn propagate(
    rho0: &TwoAtomDensityMatrix,
    params: &Parameters,
    config: &IntegratorConfig,
    options: &OracleOptions,
) -> Result<Vec<OracleSample>> {
    params.validate()?;
    config.validate()?;
    TwoAtomDensityMatrix::new(*rho0.matrix())?;
    if rho0.min_eigenvalue() < -1e-10 {
        return Err(Error::InvalidState("initial density matrix is not positive".into()));
    }

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

    let generator = |m: &Matrix4<Complex64>| -> Result<Liouvillian> {
        let s = reduce_unchecked(&TwoAtomDensityMatrix::from_matrix_unchecked(*m));
        let r = solve_self_consistent(s.a, s.x, delta.get(), params, warm.get())?;
        warm.set(Some(r.gamma));
        let rates = RateSet::symmetric(
            options.rate_scale * r.gamma,
            options.rate_scale * r.gammabar,
            params.gamma,
        )
        .with_delta(delta.get());
        Ok(build_liouvillian_with(&rates, options.cross_vacuum))
    };

    let mut out = Vec::new();
    let outcome = solver.integrate(
        0.0,
        to_state(rho0.matrix()),
        config.t_end,
        &checkpoints,
        |_, y| {
            let m = from_state(y);
            let dm = generator(&m)?.apply(&m);
            let dm = (dm + dm.adjoint()) * Complex64::new(0.5, 0.0);
            Ok(to_state(&dm))
        },
        |step| {
            let rho = TwoAtomDensityMatrix::from_matrix_unchecked(from_state(step.y));
            let min_eig = rho.min_eigenvalue();
            if min_eig < POSITIVITY_FLOOR {
                return Err(Error::OracleIntegrity {
                    t: step.t,
                    detail: format!("smallest eigenvalue {min_eig:e}"),
                });
            }
            out.push(OracleSample {
                t: step.t,
                rho,
                checkpoint: step.checkpoint,
            });
            if let Some(grid) = &chirp_grid {
                let s = reduce_unchecked(&rho);
                let profile = gamma_spectrum(s.a, s.x, params, grid)?;
                delta.set(solve_chirp(&profile, delta.get())?);
            }
            Ok(ControlFlow::Continue(()))
        },
    );

    match outcome {
        Ok(_) => Ok(out),
        Err(OdeFailure::Rhs { t, y, error }) => {
            let mut arr = [0.0; 32];
            arr.copy_from_slice(&y);
            let state = reduce_unchecked(&TwoAtomDensityMatrix::from_matrix_unchecked(from_state(&arr)));
            Err(Error::SolverFailure {
                t,
                state,
                source: Box::new(error),
            })
        }
        Err(OdeFailure::Observer { error, .. }) => Err(error),
        Err(OdeFailure::StepUnderflow { t, h }) => Err(Error::StepUnderflow { t, h }),
        Err(OdeFailure::StepBudget { t, max_steps }) => Err(Error::StepBudget { t, max_steps }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    pub eigenvalues: Vec<Complex64>,
    /// Largest real part among the eigenvalues.
    pub spectral_abscissa: f64,
    /// Number of (numerically) zero singular values.
    pub null_dimension: usize,
    /// Unique stationary state, when the null space is one-dimensional.
    pub stationary: Option<TwoAtomDensityMatrix>,
}

/// Eigenvalues from the diagonal of the complex Schur form.
///
/// Generators assembled from jump operators are extremely sparse with many
/// exactly repeated eigenvalues, on which the unshifted QR sweep can stall.
/// A fixed unitary similarity transform removes the structure first.
fn eigenvalues(m: &SuperMatrix) -> Result<Vec<Complex64>> {
    let mut state = 0x2545_f491_4f6c_dd1d_u64;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let q = SuperMatrix::from_fn(|_, _| Complex64::new(next(), next())).qr().q();
    let rotated = q.adjoint() * m * q;
    let (_, t) = nalgebra::linalg::Schur::try_new(rotated, f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Eigensolver("complex Schur iteration on the Liouvillian".into()))?
        .unpack();
    Ok(t.diagonal().iter().copied().collect())
}

pub fn spectral_check(l: &Liouvillian) -> Result<SpectralReport> {
    let m = *l.matrix();
    let eigenvalues = eigenvalues(&m)?;
    let spectral_abscissa = eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);

    let svd = m.svd(false, true);
    let sigma_max = svd.singular_values.max();
    let threshold = 1e-10 * sigma_max.max(1.0);
    let null: Vec<usize> = (0..16).filter(|&k| svd.singular_values[k] <= threshold).collect();
    let stationary = match (null.as_slice(), &svd.v_t) {
        ([k], Some(v_t)) => {
            let v = SuperVector::from_fn(|i, _| v_t[(*k, i)].conj());
            let mat = unvectorize(&v);
            let tr = mat.trace();
            (tr.norm() > 1e-12).then(|| {
                TwoAtomDensityMatrix::from_matrix_unchecked(mat / tr).hermitian_part()
            })
        }
        _ => None,
    };

    Ok(SpectralReport {
        eigenvalues,
        spectral_abscissa,
        null_dimension: null.len(),
        stationary,
    })
}
