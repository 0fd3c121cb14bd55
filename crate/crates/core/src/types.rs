//! Domain types and exact conversions between the reduced variables and the
//! two-atom density matrix.
//!
//! Units: the vacuum decay rate `gamma` sets the time unit. Rates are in
//! units of `gamma`, times in units of `1/gamma`. Dipole moment, density and
//! frequency only enter through the cooperativity `coop` and the effective
//! size `rho_size`.
//!
//! Basis ordering for every 4x4 matrix in this crate is
//! `(|aa>, |ab>, |ba>, |bb>)`, where `|ab>` means atom 1 excited and atom 2
//! in the ground state. Entries follow `rho_{ab,cd} = <a_1 c_2| rho |b_1 d_2>`,
//! so for example the correlation `rho_{ab,ba}` is the `(|ab>, |ba>)` entry.

use nalgebra::{Matrix4, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of `|aa>` (both excited).
pub const AA: usize = 0;
/// Index of `|ab>` (atom 1 excited).
pub const AB: usize = 1;
/// Index of `|ba>` (atom 2 excited).
pub const BA: usize = 2;
/// Index of `|bb>` (both in the ground state).
pub const BB: usize = 3;

/// Allowed deviation of a reconstructed population outside `[0, 1]`.
pub const POPULATION_SLACK: f64 = 1e-12;

/// Trace tolerance accepted by [`reduce`].
pub const TRACE_TOL: f64 = 1e-10;

/// How the common frequency shift (chirp) is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaMode {
    #[default]
    Zero,
    KramersKronig,
}

/// Whether the effective size seen by the geometric factor is shifted by the
/// detuning (`rho - (delta / gamma_f) * zeta`) or held at `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SizeMode {
    #[default]
    Dispersive,
    Static,
}

/// Physical configuration of the dense gas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub gamma: f64,
    /// Cooperativity (effective density), atoms per cubic reduced wavelength.
    pub coop: f64,
    /// Effective radial size, sample diameter over reduced wavelength.
    pub rho_size: f64,
    pub delta_mode: DeltaMode,
    pub size_mode: SizeMode,
    /// Below this magnitude `(e^z - 1)/z` is evaluated by its series.
    pub series_epsilon: f64,
    pub fixed_point_tol: f64,
}

impl Default for Parameters {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            coop: 10.0,
            rho_size: 10.0,
            delta_mode: DeltaMode::Zero,
            size_mode: SizeMode::Dispersive,
            series_epsilon: 1e-8,
            fixed_point_tol: 1e-12,
        }
    }
}

impl Parameters {
    pub fn new(coop: f64, rho_size: f64) -> Result<Self> {
        let p = Self {
            coop,
            rho_size,
            ..Self::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_coop(self, coop: f64) -> Self {
        Self { coop, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name, value: f64, ok: bool, reason| {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    value,
                    reason,
                })
            }
        };
        check("gamma", self.gamma, self.gamma > 0.0, "must be positive")?;
        check("coop", self.coop, self.coop >= 0.0, "must be non-negative")?;
        check("rho_size", self.rho_size, self.rho_size > 0.0, "must be positive")?;
        check(
            "series_epsilon",
            self.series_epsilon,
            self.series_epsilon > 0.0,
            "must be positive",
        )?;
        check(
            "fixed_point_tol",
            self.fixed_point_tol,
            self.fixed_point_tol > 0.0,
            "must be positive",
        )
    }
}

/// The four real dynamical variables of the two probe atoms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReducedState {
    /// Mean excited-state population per atom.
    pub a: f64,
    /// Excited-population difference between the two atoms.
    pub d: f64,
    /// Product of the two atomic inversions.
    pub n: f64,
    /// Correlation `rho_{ab,ba}`.
    pub x: f64,
}

impl ReducedState {
    pub const fn new(a: f64, d: f64, n: f64, x: f64) -> Self {
        Self { a, d, n, x }
    }

    /// Both atoms excited.
    pub const fn fully_inverted() -> Self {
        Self::new(1.0, 0.0, 1.0, 0.0)
    }

    pub const fn ground() -> Self {
        Self::new(0.0, 0.0, 1.0, 0.0)
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.a, self.d, self.n, self.x]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    /// Diagonal of the reconstructed density matrix in basis order.
    pub fn populations(&self) -> [f64; 4] {
        let single = (1.0 - self.n) / 2.0;
        [
            self.a - (1.0 - self.n) / 4.0,
            (single + self.d) / 2.0,
            (single - self.d) / 2.0,
            1.0 - self.a - (1.0 - self.n) / 4.0,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Instantaneous dissipative rates and shifts feeding the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RateSet {
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub gammabar_plus: f64,
    pub gammabar_minus: f64,
    pub gamma_vac: f64,
    pub delta12: f64,
    pub delta: f64,
}

impl RateSet {
    /// Symmetric small-sample configuration: no antisymmetric parts and no
    /// relative shift.
    pub fn symmetric(gamma: f64, gammabar: f64, gamma_vac: f64) -> Self {
        Self {
            gamma_plus: gamma,
            gammabar_plus: gammabar,
            gamma_vac,
            ..Self::default()
        }
    }

    pub fn vacuum(gamma_vac: f64) -> Self {
        Self::symmetric(0.0, 0.0, gamma_vac)
    }

    pub fn is_symmetric(&self) -> bool {
        self.gamma_minus == 0.0 && self.gammabar_minus == 0.0 && self.delta12 == 0.0
    }

    pub fn with_delta(self, delta: f64) -> Self {
        Self { delta, ..self }
    }
}

/// Full two-atom density matrix over `(|aa>, |ab>, |ba>, |bb>)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoAtomDensityMatrix(Matrix4<Complex64>);

impl TwoAtomDensityMatrix {
    /// Validates Hermiticity and unit trace.
    pub fn new(m: Matrix4<Complex64>) -> Result<Self> {
        let herm = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > 1e-10 {
            return Err(Error::InvalidState(format!(
                "not Hermitian (max |rho - rho^dagger| = {herm:e})"
            )));
        }
        let rho = Self(m);
        let tr = rho.trace();
        if (tr - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        Ok(rho)
    }

    pub fn from_matrix_unchecked(m: Matrix4<Complex64>) -> Self {
        Self(m)
    }

    /// Projector onto a (not necessarily normalised) pure state.
    pub fn pure(amplitudes: [Complex64; 4]) -> Self {
        let norm: f64 = amplitudes.iter().map(|c| c.norm_sqr()).sum();
        let psi = nalgebra::Vector4::from(amplitudes) / Complex64::new(norm.sqrt(), 0.0);
        Self(psi * psi.adjoint())
    }

    pub fn basis(index: usize) -> Self {
        let mut amps = [Complex64::new(0.0, 0.0); 4];
        amps[index] = Complex64::new(1.0, 0.0);
        Self::pure(amps)
    }

    /// Symmetric one-excitation Dicke state `(|ab> + |ba>)/sqrt(2)`.
    pub fn dicke_plus() -> Self {
        let c = Complex64::new(1.0, 0.0);
        let z = Complex64::new(0.0, 0.0);
        Self::pure([z, c, c, z])
    }

    /// Antisymmetric one-excitation Dicke state `(|ab> - |ba>)/sqrt(2)`.
    pub fn dicke_minus() -> Self {
        let c = Complex64::new(1.0, 0.0);
        let z = Complex64::new(0.0, 0.0);
        Self::pure([z, c, -c, z])
    }

    pub fn matrix(&self) -> &Matrix4<Complex64> {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix4<Complex64> {
        self.0
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.0[(row, col)]
    }

    pub fn population(&self, index: usize) -> f64 {
        self.0[(index, index)].re
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// Complex correlation `rho_{ab,ba}`.
    pub fn correlation(&self) -> Complex64 {
        self.0[(AB, BA)]
    }

    pub fn eigenvalues(&self) -> [f64; 4] {
        let herm = (self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(herm);
        let mut ev = [0.0; 4];
        for (slot, v) in ev.iter_mut().zip(eig.eigenvalues.iter()) {
            *slot = *v;
        }
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Largest modulus among entries outside the diagonal and the
    /// `|ab>/|ba>` block. Zero for X-structured states of this model.
    pub fn off_x_magnitude(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let in_x = i == j || (i == AB && j == BA) || (i == BA && j == AB);
                if !in_x {
                    worst = worst.max(self.0[(i, j)].norm());
                }
            }
        }
        worst
    }

    /// `(rho + rho^dagger)/2`.
    pub fn hermitian_part(&self) -> Self {
        Self((self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0))
    }
}

/// Reduced variables `(a, d, n, Re rho_{ab,ba})` of a density matrix.
pub fn reduce(rho: &TwoAtomDensityMatrix) -> Result<ReducedState> {
    let tr = rho.trace();
    if !((tr - 1.0).abs() <= TRACE_TOL) {
        return Err(Error::InvalidState(format!("trace {tr} != 1")));
    }
    Ok(reduce_unchecked(rho))
}

pub(crate) fn reduce_unchecked(rho: &TwoAtomDensityMatrix) -> ReducedState {
    let p = |i| rho.population(i);
    ReducedState {
        a: p(AA) + (p(AB) + p(BA)) / 2.0,
        d: p(AB) - p(BA),
        n: p(AA) - p(AB) - p(BA) + p(BB),
        x: rho.correlation().re,
    }
}

/// X-structured density matrix with the given reduced variables.
pub fn reconstruct(s: &ReducedState) -> Result<TwoAtomDensityMatrix> {
    const NAMES: [&str; 4] = ["|aa>", "|ab>", "|ba>", "|bb>"];
    let pops = s.populations();
    for (p, name) in pops.iter().zip(NAMES) {
        if !(*p >= -POPULATION_SLACK && *p <= 1.0 + POPULATION_SLACK) {
            return Err(Error::UnphysicalState {
                basis: name,
                value: *p,
            });
        }
    }
    let mut m = Matrix4::<Complex64>::zeros();
    for (i, p) in pops.iter().enumerate() {
        m[(i, i)] = Complex64::new(*p, 0.0);
    }
    m[(AB, BA)] = Complex64::new(s.x, 0.0);
    m[(BA, AB)] = Complex64::new(s.x, 0.0);
    Ok(TwoAtomDensityMatrix(m))
}

/// Populations of the superradiant `|+>` and subradiant `|->` Dicke states.
pub fn super_sub_populations(s: &ReducedState) -> (f64, f64) {
    let single = (1.0 - s.n) / 4.0;
    (single + s.x, single - s.x)
}

/// `|rho_{ab,ba}| - sqrt(pop(|aa>) pop(|bb>))`.
///
/// Non-positive values mean zero concurrence. For X-structured states a
/// positive value is half the Wootters concurrence.
pub fn entanglement_witness(rho: &TwoAtomDensityMatrix) -> f64 {
    let product = (rho.population(AA) * rho.population(BB)).max(0.0);
    rho.correlation().norm() - product.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn reduce_basis_states() {
        let s = reduce(&TwoAtomDensityMatrix::basis(AA)).unwrap();
        assert_eq!(s, ReducedState::new(1.0, 0.0, 1.0, 0.0));
        let s = reduce(&TwoAtomDensityMatrix::basis(BB)).unwrap();
        assert_eq!(s, ReducedState::new(0.0, 0.0, 1.0, 0.0));
        let s = reduce(&TwoAtomDensityMatrix::dicke_plus()).unwrap();
        for (got, want) in s.to_array().iter().zip([0.5, 0.0, -1.0, 0.5]) {
            assert!((got - want).abs() < 1e-15, "{s:?}");
        }
    }

    #[test]
    fn reduce_rejects_bad_trace() {
        let m = Matrix4::from_diagonal_element(c(0.3));
        let rho = TwoAtomDensityMatrix::from_matrix_unchecked(m);
        assert!(matches!(reduce(&rho), Err(Error::InvalidState(_))));
    }

    #[test]
    fn new_rejects_non_hermitian() {
        let mut m = Matrix4::from_diagonal_element(c(0.25));
        m[(AB, BA)] = Complex64::new(0.1, 0.1);
        m[(BA, AB)] = Complex64::new(0.1, 0.1);
        assert!(TwoAtomDensityMatrix::new(m).is_err());
    }

    #[test]
    fn reconstruct_examples() {
        let rho = reconstruct(&ReducedState::fully_inverted()).unwrap();
        assert_eq!(rho, TwoAtomDensityMatrix::basis(AA));
        let rho = reconstruct(&ReducedState::new(0.5, 0.0, -1.0, 0.5)).unwrap();
        let diff = rho.matrix() - TwoAtomDensityMatrix::dicke_plus().matrix();
        assert!(diff.iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn reconstruct_rejects_negative_population() {
        // a = 0.1 with n = -1 would need pop(|aa>) = -0.4
        let err = reconstruct(&ReducedState::new(0.1, 0.0, -1.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::UnphysicalState { basis: "|aa>", .. }));
        let err = reconstruct(&ReducedState::new(0.5, 0.9, 0.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::UnphysicalState { basis: "|ba>", .. }));
    }

    #[test]
    fn dicke_populations() {
        let f = super_sub_populations;
        assert_eq!(f(&ReducedState::fully_inverted()), (0.0, 0.0));
        assert_eq!(f(&ReducedState::new(0.5, 0.0, -1.0, 0.5)), (1.0, 0.0));
        assert_eq!(f(&ReducedState::new(0.5, 0.0, -1.0, -0.5)), (0.0, 1.0));
        let s = reduce(&TwoAtomDensityMatrix::dicke_minus()).unwrap();
        let (pp, mm) = f(&s);
        assert!(pp.abs() < 1e-15 && (mm - 1.0).abs() < 1e-15);
    }

    #[test]
    fn witness_examples() {
        let w = entanglement_witness(&TwoAtomDensityMatrix::dicke_plus());
        assert!((w - 0.5).abs() < 1e-15);
        for p in [0.0, 0.1, 0.25, 0.5, 0.8, 1.0] {
            let (s, q) = (f64::sqrt(p), f64::sqrt(1.0 - p));
            let single = [s, q];
            let amps = [0, 1, 2, 3].map(|k| c(single[k / 2] * single[k % 2]));
            let rho = TwoAtomDensityMatrix::pure(amps);
            assert!(entanglement_witness(&rho).abs() < 1e-15, "p = {p}");
            let r = reduce(&rho).unwrap();
            assert!((r.x - p * (1.0 - p)).abs() < 1e-15);
        }
    }

    #[test]
    fn parameters_validation() {
        assert!(Parameters::new(10.0, 10.0).is_ok());
        assert!(Parameters::new(-1.0, 10.0).is_err());
        assert!(Parameters::new(1.0, 0.0).is_err());
        let p = Parameters {
            fixed_point_tol: 0.0,
            ..Parameters::default()
        };
        assert!(p.validate().is_err());
        let p = Parameters {
            gamma: f64::NAN,
            ..Parameters::default()
        };
        assert!(p.validate().is_err());
    }
}
