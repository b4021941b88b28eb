//! Exact 2×2 complex algebra: Pauli decomposition, density matrices, and the
//! Bloch/Stokes picture of a polarization qubit.
//!
//! Everything here is written in the circular polarization basis,
//! `|L⟩ = (1, 0)ᵀ` and `|R⟩ = (0, 1)ᵀ`; the named states `|H⟩` and `|D⟩` are
//! derived from it. Matrices are decomposed in the convention
//!
//! ```text
//! M = c0 σ0 − i (c1 σ1 + c2 σ2 + c3 σ3),
//! ```
//!
//! so an SU(2) matrix corresponds to a *real* unit-norm coefficient quadruple.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default tolerance for algebraic identities (hermiticity, unit trace,
/// unitarity, round trips). Single knob shared by the validation predicates.
pub const TOL: f64 = 1e-12;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Errors raised when a matrix or vector fails to be a physical state.
#[derive(Debug, Clone, Error)]
pub enum StateError {
    #[error("matrix is not Hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),
    #[error("trace deviates from 1 by {0:.3e}")]
    TraceNotOne(f64),
    #[error("matrix has negative eigenvalue {0:.3e}")]
    NotPositive(f64),
    #[error("Bloch vector has norm {0} > 1")]
    BlochTooLong(f64),
}

/// A dense 2×2 complex matrix. `e[row][col]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub e: [[C64; 2]; 2],
}

impl Mat2 {
    pub const fn new(e: [[C64; 2]; 2]) -> Self {
        Self { e }
    }

    pub fn zero() -> Self {
        Self::new([[c(0.0, 0.0); 2]; 2])
    }

    pub fn identity() -> Self {
        Self::new([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]])
    }

    /// Outer product `|ket⟩⟨ket|` of a (not necessarily normalized) ket.
    pub fn projector(ket: [C64; 2]) -> Self {
        let mut m = Self::zero();
        for (r, kr) in ket.iter().enumerate() {
            for (s, ks) in ket.iter().enumerate() {
                m.e[r][s] = kr * ks.conj();
            }
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zero();
        for r in 0..2 {
            for s in 0..2 {
                m.e[r][s] = self.e[s][r].conj();
            }
        }
        m
    }

    pub fn trace(&self) -> C64 {
        self.e[0][0] + self.e[1][1]
    }

    pub fn det(&self) -> C64 {
        self.e[0][0] * self.e[1][1] - self.e[0][1] * self.e[1][0]
    }

    pub fn scaled(&self, z: C64) -> Self {
        let mut m = *self;
        for row in m.e.iter_mut() {
            for v in row.iter_mut() {
                *v *= z;
            }
        }
        m
    }

    pub fn norm_fro(&self) -> f64 {
        self.e
            .iter()
            .flatten()
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `⟨bra| M |ket⟩` with `bra` given as a ket (conjugated internally).
    pub fn expectation(&self, bra: [C64; 2], ket: [C64; 2]) -> C64 {
        let mut acc = c(0.0, 0.0);
        for r in 0..2 {
            for s in 0..2 {
                acc += bra[r].conj() * self.e[r][s] * ket[s];
            }
        }
        acc
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        (*self * self.adjoint() - Self::identity()).norm_fro() <= tol
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (*self - self.adjoint()).norm_fro() <= tol
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.is_hermitian(tol) && self.herm_eigenvalues()[1] >= -tol
    }

    /// Eigenvalues of a Hermitian matrix, descending. Closed form.
    pub fn herm_eigenvalues(&self) -> [f64; 2] {
        let a = self.e[0][0].re;
        let d = self.e[1][1].re;
        let b = self.e[0][1];
        let mean = 0.5 * (a + d);
        let r = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        [mean + r, mean - r]
    }

    /// Eigendecomposition of a Hermitian matrix: eigenvalues descending and
    /// the corresponding orthonormal eigenvectors as columns.
    pub fn herm_eigen(&self) -> ([f64; 2], [[C64; 2]; 2]) {
        let vals = self.herm_eigenvalues();
        let a = self.e[0][0].re;
        let b = self.e[0][1];
        if b.norm() < 1e-300 {
            let d = self.e[1][1].re;
            let (v0, v1) = if a >= d {
                ([c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)])
            } else {
                ([c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)])
            };
            return (vals, [v0, v1]);
        }
        // (b, λ − a) solves the first row for eigenvalue λ.
        let mut v0 = [b, c(vals[0] - a, 0.0)];
        let n0 = (v0[0].norm_sqr() + v0[1].norm_sqr()).sqrt();
        v0[0] /= n0;
        v0[1] /= n0;
        // Orthogonal complement of (x, y) is (−y*, x*).
        let v1 = [-v0[1].conj(), v0[0].conj()];
        (vals, [v0, v1])
    }

    /// Square root of a positive semidefinite Hermitian matrix via the
    /// closed-form eigendecomposition. Eigenvalues are clamped at zero so
    /// tolerated negative round-off does not produce NaNs.
    pub fn sqrt_psd(&self) -> Self {
        let (vals, [v0, v1]) = self.herm_eigen();
        let s0 = vals[0].max(0.0).sqrt();
        let s1 = vals[1].max(0.0).sqrt();
        let p0 = Self::projector(v0);
        let p1 = Self::projector(v1);
        p0.scaled(c(s0, 0.0)) + p1.scaled(c(s1, 0.0))
    }
}

impl std::ops::Add for Mat2 {
    type Output = Mat2;
    fn add(self, rhs: Mat2) -> Mat2 {
        let mut m = self;
        for r in 0..2 {
            for s in 0..2 {
                m.e[r][s] += rhs.e[r][s];
            }
        }
        m
    }
}

impl std::ops::Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: Mat2) -> Mat2 {
        let mut m = self;
        for r in 0..2 {
            for s in 0..2 {
                m.e[r][s] -= rhs.e[r][s];
            }
        }
        m
    }
}

impl std::ops::Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.scaled(c(-1.0, 0.0))
    }
}

impl std::ops::Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        let mut m = Mat2::zero();
        for r in 0..2 {
            for s in 0..2 {
                m.e[r][s] = self.e[r][0] * rhs.e[0][s] + self.e[r][1] * rhs.e[1][s];
            }
        }
        m
    }
}

/// Pauli matrix `σ_a` for `a = 0..=3` (`σ0` is the identity).
pub fn sigma(a: usize) -> Mat2 {
    match a {
        0 => Mat2::identity(),
        1 => Mat2::new([[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]]),
        2 => Mat2::new([[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]]),
        3 => Mat2::new([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]]),
        _ => panic!("Pauli index out of range: {a}"),
    }
}

/// Coefficients of the expansion `M = c0 σ0 − i (c1 σ1 + c2 σ2 + c3 σ3)`.
///
/// SU(2) matrices have real coefficients with unit Euclidean norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliVector {
    pub c: [C64; 4],
}

impl PauliVector {
    pub fn new(c: [C64; 4]) -> Self {
        Self { c }
    }

    pub fn from_real(u: [f64; 4]) -> Self {
        Self::new([c(u[0], 0.0), c(u[1], 0.0), c(u[2], 0.0), c(u[3], 0.0)])
    }

    /// Real parts of the four coefficients.
    pub fn re(&self) -> [f64; 4] {
        [self.c[0].re, self.c[1].re, self.c[2].re, self.c[3].re]
    }

    /// Largest imaginary part in absolute value.
    pub fn max_imag(&self) -> f64 {
        self.c.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    pub fn norm(&self) -> f64 {
        self.c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Decompose `m = c0 σ0 − i (c1 σ1 + c2 σ2 + c3 σ3)`:
/// `c0 = Tr(m)/2`, `c_a = i Tr(m σ_a)/2`.
pub fn pauli_decompose(m: &Mat2) -> PauliVector {
    let half = c(0.5, 0.0);
    let i = c(0.0, 1.0);
    let c0 = m.trace() * half;
    let mut coeffs = [c0, c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
    for (a, slot) in coeffs.iter_mut().enumerate().skip(1) {
        *slot = i * (*m * sigma(a)).trace() * half;
    }
    PauliVector::new(coeffs)
}

/// Inverse of [`pauli_decompose`].
pub fn pauli_compose(v: &PauliVector) -> Mat2 {
    let i = c(0.0, 1.0);
    let mut m = sigma(0).scaled(v.c[0]);
    for a in 1..4 {
        m = m - sigma(a).scaled(i * v.c[a]);
    }
    m
}

/// Stokes parameters `(s1, s2, s3)` of a qubit state; each in `[−1, 1]` with
/// `s1² + s2² + s3² ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl BlochVector {
    pub fn new(s1: f64, s2: f64, s3: f64) -> Result<Self, StateError> {
        let v = Self { s1, s2, s3 };
        if v.norm_sqr() > 1.0 + TOL {
            return Err(StateError::BlochTooLong(v.norm()));
        }
        Ok(v)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.s1 * self.s1 + self.s2 * self.s2 + self.s3 * self.s3
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.s1, self.s2, self.s3]
    }
}

/// A validated qubit density matrix: Hermitian, unit trace, PSD.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix {
    m: Mat2,
}

impl DensityMatrix {
    pub fn new(m: Mat2) -> Result<Self, StateError> {
        let asym = (m - m.adjoint()).norm_fro();
        if asym > TOL {
            return Err(StateError::NotHermitian(asym));
        }
        let tr_dev = (m.trace() - c(1.0, 0.0)).norm();
        if tr_dev > TOL {
            return Err(StateError::TraceNotOne(tr_dev));
        }
        let lambda_min = m.herm_eigenvalues()[1];
        if lambda_min < -TOL {
            return Err(StateError::NotPositive(lambda_min));
        }
        Ok(Self { m })
    }

    /// Pure state `|ψ⟩⟨ψ|` from a ket (normalized internally).
    pub fn pure(ket: [C64; 2]) -> Self {
        let n = (ket[0].norm_sqr() + ket[1].norm_sqr()).sqrt();
        let ket = [ket[0] / n, ket[1] / n];
        Self {
            m: Mat2::projector(ket),
        }
    }

    pub fn maximally_mixed() -> Self {
        Self {
            m: Mat2::identity().scaled(c(0.5, 0.0)),
        }
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.m
    }

    /// `s_a = Tr(ρ σ_a)`.
    pub fn bloch(&self) -> BlochVector {
        let s = |a: usize| (self.m * sigma(a)).trace().re;
        BlochVector {
            s1: s(1),
            s2: s(2),
            s3: s(3),
        }
    }

    /// `ρ = (σ0 + Σ s_a σ_a) / 2`.
    pub fn from_bloch(s: BlochVector) -> Result<Self, StateError> {
        if s.norm_sqr() > 1.0 + TOL {
            return Err(StateError::BlochTooLong(s.norm()));
        }
        let half = c(0.5, 0.0);
        let m = (sigma(0)
            + sigma(1).scaled(c(s.s1, 0.0))
            + sigma(2).scaled(c(s.s2, 0.0))
            + sigma(3).scaled(c(s.s3, 0.0)))
        .scaled(half);
        Ok(Self { m })
    }

    pub fn purity(&self) -> f64 {
        (self.m * self.m).trace().re
    }
}

/// State fidelity `ℱ = [Tr √(√ρ_th ρ_exp √ρ_th)]²`, clamped to `[0, 1]`.
pub fn fidelity(rho_th: &DensityMatrix, rho_exp: &DensityMatrix) -> f64 {
    let s = rho_th.matrix().sqrt_psd();
    let inner = s * *rho_exp.matrix() * s;
    let vals = inner.herm_eigenvalues();
    let tr_sqrt = vals[0].max(0.0).sqrt() + vals[1].max(0.0).sqrt();
    (tr_sqrt * tr_sqrt).clamp(0.0, 1.0)
}

/// Left circular `|L⟩ = (1, 0)ᵀ`.
pub fn ket_l() -> [C64; 2] {
    [c(1.0, 0.0), c(0.0, 0.0)]
}

/// Right circular `|R⟩ = (0, 1)ᵀ`.
pub fn ket_r() -> [C64; 2] {
    [c(0.0, 0.0), c(1.0, 0.0)]
}

/// Horizontal `|H⟩ = (|L⟩ + |R⟩)/√2`; Bloch vector `(1, 0, 0)`.
pub fn ket_h() -> [C64; 2] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [c(s, 0.0), c(s, 0.0)]
}

/// Vertical `|V⟩ = (|L⟩ − |R⟩)/√2`; Bloch vector `(−1, 0, 0)`.
pub fn ket_v() -> [C64; 2] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [c(s, 0.0), c(-s, 0.0)]
}

/// Diagonal `|D⟩ = (|L⟩ + i|R⟩)/√2`; Bloch vector `(0, 1, 0)`.
pub fn ket_d() -> [C64; 2] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [c(s, 0.0), c(0.0, s)]
}

/// Antidiagonal `|A⟩ = (|L⟩ − i|R⟩)/√2`; Bloch vector `(0, −1, 0)`.
pub fn ket_a() -> [C64; 2] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [c(s, 0.0), c(0.0, -s)]
}
