//! Inverse design of the quasi-momentum-dependent SU(2) field.
//!
//! The four coefficient functions `u_0..u_3(q)` are expanded in a truncated
//! Fourier basis. Their exact second moments over one period,
//!
//! ```text
//! (1/2π) ∫ u_i u_j dq = u_i⁽⁰⁾u_j⁽⁰⁾ + (1/2) Σ_n (u_ic⁽ⁿ⁾u_jc⁽ⁿ⁾ + u_is⁽ⁿ⁾u_js⁽ⁿ⁾),
//! ```
//!
//! must reproduce the real part of the target Gram matrix (cost `f1`), while
//! the quadruple must have unit norm at every grid point (cost `f2`). The two
//! costs are minimized in alternation: the minimizer of one feeds the other
//! as its initial guess until the coefficient vectors agree.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channels::{feasibility, Feasibility, GramMatrix, InfeasibilityReason, FEASIBILITY_TOL};
use crate::gauss_newton::{self, GnOpts, Jacobian};
use crate::pauli::{pauli_compose, Mat2, PauliVector};

/// Both costs must fall below this for a design to count as converged.
pub const SUCCESS_COST: f64 = 1e-10;

#[derive(Debug, Clone, Error)]
pub enum SolverError {
    #[error("target channel is not realizable: {0}")]
    InfeasibleTarget(InfeasibilityReason),
    #[error(
        "solver did not converge: best f1 = {best_f1:.3e}, f2 = {best_f2:.3e} \
         after {restarts} restart(s)"
    )]
    NonConvergence {
        best_f1: f64,
        best_f2: f64,
        restarts: usize,
    },
    #[error("field norm collapsed to {norm:.3} at sample {index}")]
    NormCollapse { index: usize, norm: f64 },
    #[error("invalid solver input: {0}")]
    BadInput(String),
}

/// Real Fourier coefficients of the four field components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierSolution {
    pub n_max: usize,
    /// Constant terms `u_i⁽⁰⁾`.
    pub dc: [f64; 4],
    /// Cosine coefficients `u_ic⁽ⁿ⁾`, indexed `[i][n−1]`.
    pub cos_coeffs: [Vec<f64>; 4],
    /// Sine coefficients `u_is⁽ⁿ⁾`, indexed `[i][n−1]`.
    pub sin_coeffs: [Vec<f64>; 4],
}

impl FourierSolution {
    pub fn zeros(n_max: usize) -> Self {
        Self {
            n_max,
            dc: [0.0; 4],
            cos_coeffs: std::array::from_fn(|_| vec![0.0; n_max]),
            sin_coeffs: std::array::from_fn(|_| vec![0.0; n_max]),
        }
    }

    /// Number of free coefficients, `4 (2 n_max + 1)`.
    pub fn dof(n_max: usize) -> usize {
        4 * (2 * n_max + 1)
    }

    /// Flatten to the optimizer layout: `dc`, then all cosine coefficients
    /// (component-major), then all sine coefficients.
    pub fn pack(&self) -> Vec<f64> {
        let n = self.n_max;
        let mut x = Vec::with_capacity(Self::dof(n));
        x.extend_from_slice(&self.dc);
        for i in 0..4 {
            x.extend_from_slice(&self.cos_coeffs[i]);
        }
        for i in 0..4 {
            x.extend_from_slice(&self.sin_coeffs[i]);
        }
        x
    }

    pub fn unpack(n_max: usize, x: &[f64]) -> Self {
        assert_eq!(x.len(), Self::dof(n_max));
        let mut s = Self::zeros(n_max);
        s.dc.copy_from_slice(&x[..4]);
        for i in 0..4 {
            let base = 4 + i * n_max;
            s.cos_coeffs[i].copy_from_slice(&x[base..base + n_max]);
            let base = 4 + 4 * n_max + i * n_max;
            s.sin_coeffs[i].copy_from_slice(&x[base..base + n_max]);
        }
        s
    }

    /// Evaluate the raw (unnormalized) quadruple at quasi-momentum `q`.
    pub fn evaluate(&self, q: f64) -> [f64; 4] {
        let mut u = self.dc;
        for n in 1..=self.n_max {
            let (s, c) = (n as f64 * q).sin_cos();
            for i in 0..4 {
                u[i] += self.cos_coeffs[i][n - 1] * c + self.sin_coeffs[i][n - 1] * s;
            }
        }
        u
    }

    /// Raw samples on the uniform grid `q_j = 2πj/Q`, `j = 0..Q−1`.
    pub fn sample_grid(&self, grid_q: usize) -> Vec<[f64; 4]> {
        grid_points(grid_q)
            .map(|q| self.evaluate(q))
            .collect()
    }
}

/// Uniform quasi-momentum grid over one period, endpoint excluded.
pub fn grid_points(grid_q: usize) -> impl Iterator<Item = f64> {
    (0..grid_q).map(move |j| std::f64::consts::TAU * j as f64 / grid_q as f64)
}

/// Solver settings. The defaults reproduce the reference setup:
/// `N = 20`, `Q = 125`, `T = 200`, tolerance `1e−12`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub n_max: usize,
    pub grid_q: usize,
    pub max_outer_iters: usize,
    /// Stop when the L1 distance between the outputs of the two minimization
    /// stages falls below this.
    pub convergence_tol: f64,
    pub seed: u64,
    /// Number of initialization attempts before giving up.
    pub restarts: usize,
    /// Gradient tolerance of the inner quasi-Newton minimizer.
    pub grad_tol: f64,
    /// Iteration cap of each inner minimization.
    pub max_inner_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n_max: 20,
            grid_q: 125,
            max_outer_iters: 200,
            convergence_tol: 1e-12,
            seed: 1,
            restarts: 8,
            grad_tol: 1e-12,
            max_inner_iters: 60,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.n_max == 0 {
            return Err(SolverError::BadInput("n_max must be positive".into()));
        }
        if self.grid_q < 2 * self.n_max + 1 {
            return Err(SolverError::BadInput(format!(
                "grid_q = {} aliases n_max = {} (need grid_q ≥ 2 n_max + 1)",
                self.grid_q, self.n_max
            )));
        }
        if self.max_outer_iters == 0 || self.restarts == 0 || self.max_inner_iters == 0 {
            return Err(SolverError::BadInput(
                "iteration and restart counts must be positive".into(),
            ));
        }
        if !(self.convergence_tol > 0.0) || !(self.grad_tol > 0.0) {
            return Err(SolverError::BadInput("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome summary of a [`solve`] call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    #[serde(rename = "f1")]
    pub f1_final: f64,
    #[serde(rename = "f2")]
    pub f2_final: f64,
    #[serde(rename = "iters")]
    pub outer_iters: usize,
    pub converged: bool,
    pub restarts_used: usize,
}

/// The designed field sampled on the grid, renormalized to exact unit norm
/// per sample so every matrix is SU(2).
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryField {
    /// Quasi-momentum samples `q_j ∈ [0, 2π)`.
    pub grid: Vec<f64>,
    /// Unit-norm quadruples `(u0..u3)(q_j)`.
    pub values: Vec<[f64; 4]>,
}

impl UnitaryField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// SU(2) matrix at sample `j`.
    pub fn matrix(&self, j: usize) -> Mat2 {
        pauli_compose(&PauliVector::from_real(self.values[j]))
    }

    /// Realized second moments `(1/Q) Σ_j u_i u_j` of the normalized field;
    /// the chi matrix of the sampled-average channel.
    pub fn chi_matrix(&self) -> [[f64; 4]; 4] {
        let mut m = [[0.0; 4]; 4];
        for u in &self.values {
            for i in 0..4 {
                for j in 0..4 {
                    m[i][j] += u[i] * u[j];
                }
            }
        }
        let q = self.values.len() as f64;
        for row in m.iter_mut() {
            for v in row.iter_mut() {
                *v /= q;
            }
        }
        m
    }
}

// ---------------------------------------------------------------------------
// Costs and analytic gradients
// ---------------------------------------------------------------------------

struct TrigTable {
    n_max: usize,
    grid_q: usize,
    /// `cos(n q_j)` at `[(n−1) * grid_q + j]`.
    cos: Vec<f64>,
    /// `sin(n q_j)` at `[(n−1) * grid_q + j]`.
    sin: Vec<f64>,
}

impl TrigTable {
    fn new(n_max: usize, grid_q: usize) -> Self {
        let mut cos = Vec::with_capacity(n_max * grid_q);
        let mut sin = Vec::with_capacity(n_max * grid_q);
        for n in 1..=n_max {
            for q in grid_points(grid_q) {
                let (s, c) = (n as f64 * q).sin_cos();
                cos.push(c);
                sin.push(s);
            }
        }
        Self {
            n_max,
            grid_q,
            cos,
            sin,
        }
    }
}

/// Layout offsets into the packed coefficient vector.
#[inline]
fn idx_cos(n_max: usize, i: usize, n: usize) -> usize {
    4 + i * n_max + n
}

#[inline]
fn idx_sin(n_max: usize, i: usize, n: usize) -> usize {
    4 + 4 * n_max + i * n_max + n
}

/// Moment sums `m_ij = 2 d_i d_j + Σ_n (c_in c_jn + s_in s_jn)` on the packed
/// vector; this equals `2 × (1/2π) ∫ u_i u_j dq` exactly.
fn moment_sums(n_max: usize, x: &[f64]) -> [[f64; 4]; 4] {
    let mut m = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in i..4 {
            let mut acc = 2.0 * x[i] * x[j];
            for n in 0..n_max {
                acc += x[idx_cos(n_max, i, n)] * x[idx_cos(n_max, j, n)]
                    + x[idx_sin(n_max, i, n)] * x[idx_sin(n_max, j, n)];
            }
            m[i][j] = acc;
            m[j][i] = acc;
        }
    }
    m
}

fn f1_flat(n_max: usize, x: &[f64], target: &[[f64; 4]; 4]) -> f64 {
    let m = moment_sums(n_max, x);
    let mut f = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let e = m[i][j] - 2.0 * target[i][j];
            f += e * e;
        }
    }
    f
}

fn f1_flat_grad(n_max: usize, x: &[f64], target: &[[f64; 4]; 4], grad: &mut [f64]) -> f64 {
    let m = moment_sums(n_max, x);
    let mut e = [[0.0; 4]; 4];
    let mut f = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            e[i][j] = m[i][j] - 2.0 * target[i][j];
            f += e[i][j] * e[i][j];
        }
    }
    grad.fill(0.0);
    for a in 0..4 {
        let mut acc = 0.0;
        for j in 0..4 {
            acc += e[a][j] * x[j];
        }
        grad[a] = 8.0 * acc;
        for n in 0..n_max {
            let mut acc_c = 0.0;
            let mut acc_s = 0.0;
            for j in 0..4 {
                acc_c += e[a][j] * x[idx_cos(n_max, j, n)];
                acc_s += e[a][j] * x[idx_sin(n_max, j, n)];
            }
            grad[idx_cos(n_max, a, n)] = 4.0 * acc_c;
            grad[idx_sin(n_max, a, n)] = 4.0 * acc_s;
        }
    }
    f
}

fn eval_samples_flat(table: &TrigTable, x: &[f64]) -> Vec<[f64; 4]> {
    let (n_max, q) = (table.n_max, table.grid_q);
    let mut samples = vec![[x[0], x[1], x[2], x[3]]; q];
    for n in 0..n_max {
        let base = n * q;
        for (j, u) in samples.iter_mut().enumerate() {
            let c = table.cos[base + j];
            let s = table.sin[base + j];
            for i in 0..4 {
                u[i] += x[idx_cos(n_max, i, n)] * c + x[idx_sin(n_max, i, n)] * s;
            }
        }
    }
    samples
}

fn f2_flat_grad(table: &TrigTable, x: &[f64], grad: &mut [f64]) -> f64 {
    let (n_max, q) = (table.n_max, table.grid_q);
    let samples = eval_samples_flat(table, x);
    grad.fill(0.0);
    let mut f = 0.0;
    for (j, u) in samples.iter().enumerate() {
        let r = u[0] * u[0] + u[1] * u[1] + u[2] * u[2] + u[3] * u[3] - 1.0;
        f += r * r;
        let w = 4.0 * r;
        for i in 0..4 {
            let wu = w * u[i];
            grad[i] += wu;
            for n in 0..n_max {
                grad[idx_cos(n_max, i, n)] += wu * table.cos[n * q + j];
                grad[idx_sin(n_max, i, n)] += wu * table.sin[n * q + j];
            }
        }
    }
    f
}

/// The 10 unique index pairs of a symmetric 4×4 system, with the √2 weight
/// that makes Σ ρ² equal the full 16-term `f1` sum.
const MOMENT_PAIRS: [(usize, usize); 10] = [
    (0, 0),
    (0, 1),
    (0, 2),
    (0, 3),
    (1, 1),
    (1, 2),
    (1, 3),
    (2, 2),
    (2, 3),
    (3, 3),
];

/// Residuals and Jacobian of the moment system for the Gauss–Newton stage.
fn f1_residuals(n_max: usize, x: &[f64], target: &[[f64; 4]; 4], r: &mut [f64], jac: &mut Jacobian) {
    let m = moment_sums(n_max, x);
    for (k, &(i, j)) in MOMENT_PAIRS.iter().enumerate() {
        let w = if i == j { 1.0 } else { std::f64::consts::SQRT_2 };
        r[k] = w * (m[i][j] - 2.0 * target[i][j]);
        let row = jac.row_mut(k);
        row.fill(0.0);
        // ∂m_ij/∂d_a = 2(δ_ia d_j + δ_ja d_i), and the harmonic analogues.
        row[i] += 2.0 * w * x[j];
        row[j] += 2.0 * w * x[i];
        for n in 0..n_max {
            row[idx_cos(n_max, i, n)] += w * x[idx_cos(n_max, j, n)];
            row[idx_cos(n_max, j, n)] += w * x[idx_cos(n_max, i, n)];
            row[idx_sin(n_max, i, n)] += w * x[idx_sin(n_max, j, n)];
            row[idx_sin(n_max, j, n)] += w * x[idx_sin(n_max, i, n)];
        }
    }
}

/// The unitarity defect `|u(q)|² − 1` is a trigonometric polynomial of
/// degree ≤ 2N. On the aliasing-free grid, `f2` equals the Parseval-weighted
/// sum of its Fourier coefficients, giving the Gauss–Newton stage a
/// full-rank residual system of `4N + 1` equations: one per harmonic of the
/// defect instead of one per grid point.
///
/// Components are handled as complex exponential coefficients
/// `U_i[k], k ∈ [−N, N]` with `U[0] = dc`, `U[±n] = (c_n ∓ i s_n)/2`.
struct UnitaritySystem {
    n_max: usize,
    grid_q: usize,
}

impl UnitaritySystem {
    fn residual_count(&self) -> usize {
        4 * self.n_max + 1
    }

    fn spectra(&self, x: &[f64]) -> [Vec<num_complex::Complex64>; 4] {
        use num_complex::Complex64 as C64;
        let n_max = self.n_max;
        std::array::from_fn(|i| {
            let mut spec = vec![C64::new(0.0, 0.0); 2 * n_max + 1];
            spec[n_max] = C64::new(x[i], 0.0);
            for n in 1..=n_max {
                let c = x[idx_cos(n_max, i, n - 1)];
                let s = x[idx_sin(n_max, i, n - 1)];
                spec[n_max + n] = C64::new(0.5 * c, -0.5 * s);
                spec[n_max - n] = C64::new(0.5 * c, 0.5 * s);
            }
            spec
        })
    }

    /// Fill `r` (length `4N+1`) and the Jacobian rows for the weighted
    /// Fourier residuals of the unitarity defect.
    fn fill(&self, x: &[f64], r: &mut [f64], jac: &mut Jacobian) {
        use num_complex::Complex64 as C64;
        let n_max = self.n_max;
        let spectra = self.spectra(x);
        let at = |spec: &[C64], k: isize| -> C64 {
            let idx = k + n_max as isize;
            if idx < 0 || idx as usize >= spec.len() {
                C64::new(0.0, 0.0)
            } else {
                spec[idx as usize]
            }
        };

        // T[m] = Σ_i (U_i ∗ U_i)[m] for m = 0..2N.
        let mut t = vec![C64::new(0.0, 0.0); 2 * n_max + 1];
        for spec in &spectra {
            for (m, tm) in t.iter_mut().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for k in -(n_max as isize)..=(n_max as isize) {
                    let other = m as isize - k;
                    if other.unsigned_abs() <= n_max {
                        acc += at(spec, k) * at(spec, other);
                    }
                }
                *tm += acc;
            }
        }

        let w0 = (self.grid_q as f64).sqrt();
        let wm = (2.0 * self.grid_q as f64).sqrt();
        r[0] = w0 * (t[0].re - 1.0);
        for m in 1..=2 * n_max {
            r[2 * m - 1] = wm * t[m].re;
            r[2 * m] = -wm * t[m].im;
        }

        // ∂T[m]/∂d_i = 2U_i[m]; ∂/∂c_in = U_i[m−n] + U_i[m+n];
        // ∂/∂s_in = i(U_i[m+n] − U_i[m−n]).
        jac.data.fill(0.0);
        for m in 0..=2 * n_max {
            let (row_re, row_im, w) = if m == 0 {
                (0, usize::MAX, w0)
            } else {
                (2 * m - 1, 2 * m, wm)
            };
            for (i, spec) in spectra.iter().enumerate() {
                let mi = m as isize;
                let write = |jac: &mut Jacobian, col: usize, d: C64| {
                    jac.data[row_re * jac.cols + col] += w * d.re;
                    if row_im != usize::MAX {
                        jac.data[row_im * jac.cols + col] += -w * d.im;
                    }
                };
                write(jac, i, 2.0 * at(spec, mi));
                for n in 1..=n_max {
                    let ni = n as isize;
                    let minus = at(spec, mi - ni);
                    let plus = at(spec, mi + ni);
                    write(jac, idx_cos(n_max, i, n - 1), minus + plus);
                    write(jac, idx_sin(n_max, i, n - 1), C64::new(0.0, 1.0) * (plus - minus));
                }
            }
        }
    }
}

/// Both residual systems stacked; their common zero set is the target of the
/// whole solve, so a few damped Gauss–Newton steps here refine the
/// alternation's output onto the intersection.
fn stacked_residuals(
    n_max: usize,
    unitarity: &UnitaritySystem,
    x: &[f64],
    target: &[[f64; 4]; 4],
    r: &mut [f64],
    jac: &mut Jacobian,
) {
    let n = jac.cols;
    let split = MOMENT_PAIRS.len();
    let mut jac1 = Jacobian::new(split, n);
    f1_residuals(n_max, x, target, &mut r[..split], &mut jac1);
    jac.data[..split * n].copy_from_slice(&jac1.data);
    let mut jac2 = Jacobian::new(unitarity.residual_count(), n);
    unitarity.fill(x, &mut r[split..], &mut jac2);
    jac.data[split * n..].copy_from_slice(&jac2.data);
}

/// Exact second moments `(1/2π) ∫ u_i u_j dq` from the Fourier coefficients.
pub fn second_moments(s: &FourierSolution) -> [[f64; 4]; 4] {
    let x = s.pack();
    let mut m = moment_sums(s.n_max, &x);
    for row in m.iter_mut() {
        for v in row.iter_mut() {
            *v *= 0.5;
        }
    }
    m
}

/// Moment-matching cost:
/// `f1 = Σ_ij [2u_i⁽⁰⁾u_j⁽⁰⁾ + Σ_n (u_ic u_jc + u_is u_js) − 2 Re M_ij]²`.
pub fn cost_f1(s: &FourierSolution, g: &GramMatrix) -> f64 {
    f1_flat(s.n_max, &s.pack(), &g.re())
}

/// `f1` together with its analytic gradient in the packed layout.
pub fn cost_f1_with_grad(s: &FourierSolution, g: &GramMatrix) -> (f64, Vec<f64>) {
    let x = s.pack();
    let mut grad = vec![0.0; x.len()];
    let f = f1_flat_grad(s.n_max, &x, &g.re(), &mut grad);
    (f, grad)
}

/// Pointwise unitarity cost on the uniform grid:
/// `f2 = Σ_j (u0² + u1² + u2² + u3² − 1)²`.
pub fn cost_f2(s: &FourierSolution, grid_q: usize) -> f64 {
    cost_f2_from_samples(&s.sample_grid(grid_q))
}

/// The unitarity residual evaluated directly on raw field samples.
pub fn cost_f2_from_samples(samples: &[[f64; 4]]) -> f64 {
    samples
        .iter()
        .map(|u| {
            let r = u[0] * u[0] + u[1] * u[1] + u[2] * u[2] + u[3] * u[3] - 1.0;
            r * r
        })
        .sum()
}

/// `f2` together with its analytic gradient in the packed layout.
pub fn cost_f2_with_grad(s: &FourierSolution, grid_q: usize) -> (f64, Vec<f64>) {
    let table = TrigTable::new(s.n_max, grid_q);
    let x = s.pack();
    let mut grad = vec![0.0; x.len()];
    let f = f2_flat_grad(&table, &x, &mut grad);
    (f, grad)
}

/// Evaluate the Fourier series on the grid and renormalize each quadruple to
/// exact unit norm. Fails if any raw norm drops below 0.5.
pub fn evaluate_field(s: &FourierSolution, grid_q: usize) -> Result<UnitaryField, SolverError> {
    let mut values = s.sample_grid(grid_q);
    for (index, u) in values.iter_mut().enumerate() {
        let norm = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2] + u[3] * u[3]).sqrt();
        if norm < 0.5 {
            return Err(SolverError::NormCollapse { index, norm });
        }
        for v in u.iter_mut() {
            *v /= norm;
        }
    }
    Ok(UnitaryField {
        grid: grid_points(grid_q).collect(),
        values,
    })
}

// ---------------------------------------------------------------------------
// The alternating solve
// ---------------------------------------------------------------------------

fn initial_point(
    target: &[[f64; 4]; 4],
    cfg: &SolverConfig,
    restart: usize,
) -> Vec<f64> {
    let (vals, vecs) = crate::sym4::eigen_sym4(target);
    let mut dc = [0.0; 4];
    let scale = vals[0].max(0.0).sqrt();
    for (i, d) in dc.iter_mut().enumerate() {
        *d = vecs[i][0] * scale;
    }
    // Deterministic sign: largest-magnitude component positive.
    let lead = (0..4).max_by(|&a, &b| dc[a].abs().partial_cmp(&dc[b].abs()).unwrap()).unwrap();
    if dc[lead] < 0.0 {
        for d in dc.iter_mut() {
            *d = -*d;
        }
    }

    let mut x = vec![0.0; FourierSolution::dof(cfg.n_max)];
    x[..4].copy_from_slice(&dc);

    // A rank-1 target is already solved by the constant field; otherwise the
    // harmonics start from a small random draw on a per-restart stream. Draws
    // are made along the Gram eigendirections, scaled by √λ_r and decaying
    // with the harmonic index, so the refinement stays near smooth solutions
    // confined to the subspace the target actually occupies.
    if f1_flat(cfg.n_max, &x, target) > 1e-20 || restart > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(restart as u64);
        let n_max = cfg.n_max;
        // Components along zero eigendirections stay exactly zero (they are
        // invariant under both refinement stages and only blur the extracted
        // axis angles); late restarts add a small full-space draw in case a
        // target resists the in-subspace search.
        let floor = if restart >= 4 { 0.01 } else { 0.0 };
        for n in 1..=n_max {
            let decay = 0.3 / (1.0 + (n * n) as f64);
            for r in 0..4 {
                let scale = decay * (vals[r].max(0.0).sqrt() + floor);
                let a = rng.random_range(-1.0..1.0) * scale;
                let b = rng.random_range(-1.0..1.0) * scale;
                for i in 0..4 {
                    x[idx_cos(n_max, i, n - 1)] += a * vecs[i][r];
                    x[idx_sin(n_max, i, n - 1)] += b * vecs[i][r];
                }
            }
        }
    }
    x
}

struct Attempt {
    x: Vec<f64>,
    f1: f64,
    f2: f64,
    outer_iters: usize,
}

fn run_attempt(
    target: &[[f64; 4]; 4],
    table: &TrigTable,
    cfg: &SolverConfig,
    restart: usize,
) -> Attempt {
    let n_max = cfg.n_max;
    let opts = GnOpts {
        cost_tol: 1e-26,
        grad_tol: cfg.grad_tol,
        max_iters: cfg.max_inner_iters,
    };
    let unitarity = UnitaritySystem {
        n_max,
        grid_q: cfg.grid_q,
    };
    let mut x = initial_point(target, cfg, restart);
    let mut outer_iters = 0;
    for outer in 1..=cfg.max_outer_iters {
        outer_iters = outer;
        let (x1, _) = gauss_newton::minimize(
            MOMENT_PAIRS.len(),
            |x, r, j| f1_residuals(n_max, x, target, r, j),
            x,
            &opts,
        );
        let (x2, _) = gauss_newton::minimize(
            unitarity.residual_count(),
            |x, r, j| unitarity.fill(x, r, j),
            x1.clone(),
            &opts,
        );
        let diff: f64 = x1.iter().zip(&x2).map(|(a, b)| (a - b).abs()).sum();
        x = x2;
        if std::env::var_os("NOISEPLATE_TRACE").is_some() {
            eprintln!(
                "outer {outer}: f1(x2)={:.3e} f2(x2)={:.3e} diff={diff:.3e}",
                f1_flat(n_max, &x, target),
                cost_f2_from_samples(&eval_samples_flat(table, &x)),
            );
        }
        if diff < cfg.convergence_tol {
            break;
        }
    }
    let mut f1 = f1_flat(n_max, &x, target);
    let mut f2 = cost_f2_from_samples(&eval_samples_flat(table, &x));

    // The alternation converges linearly; when it runs out of iterations
    // above the numerical floor, refine both systems jointly.
    if f1.max(f2) > 1e-26 {
        let total = MOMENT_PAIRS.len() + unitarity.residual_count();
        let (x_polished, _) = gauss_newton::minimize(
            total,
            |x, r, j| stacked_residuals(n_max, &unitarity, x, target, r, j),
            x.clone(),
            &opts,
        );
        let f1_p = f1_flat(n_max, &x_polished, target);
        let f2_p = cost_f2_from_samples(&eval_samples_flat(table, &x_polished));
        if f1_p.max(f2_p) < f1.max(f2) {
            x = x_polished;
            f1 = f1_p;
            f2 = f2_p;
        }
    }

    Attempt {
        x,
        f1,
        f2,
        outer_iters,
    }
}

/// Find Fourier coefficients whose second moments match the target Gram
/// matrix under the pointwise unitarity constraint.
///
/// Deterministic for a given `(g, cfg)`: restarts draw their harmonics from
/// independent seeded streams and are accepted lowest-cost-first with the
/// smallest restart index breaking ties.
pub fn solve(
    g: &GramMatrix,
    cfg: &SolverConfig,
) -> Result<(FourierSolution, SolverReport), SolverError> {
    cfg.validate()?;
    if let Feasibility::Infeasible(reason) = feasibility(g, FEASIBILITY_TOL) {
        return Err(SolverError::InfeasibleTarget(reason));
    }
    let target = g.re();
    let table = TrigTable::new(cfg.n_max, cfg.grid_q);

    let mut best: Option<Attempt> = None;
    for restart in 0..cfg.restarts {
        let attempt = run_attempt(&target, &table, cfg, restart);
        let converged = attempt.f1 <= SUCCESS_COST && attempt.f2 <= SUCCESS_COST;
        let better = match &best {
            None => true,
            Some(b) => attempt.f1 + attempt.f2 < b.f1 + b.f2,
        };
        if better {
            best = Some(attempt);
        }
        if converged {
            let b = best.unwrap();
            let report = SolverReport {
                f1_final: b.f1,
                f2_final: b.f2,
                outer_iters: b.outer_iters,
                converged: true,
                restarts_used: restart + 1,
            };
            return Ok((FourierSolution::unpack(cfg.n_max, &b.x), report));
        }
    }
    let b = best.expect("restarts >= 1");
    Err(SolverError::NonConvergence {
        best_f1: b.f1,
        best_f2: b.f2,
        restarts: cfg.restarts,
    })
}

// ---------------------------------------------------------------------------
// Design file
// ---------------------------------------------------------------------------

use crate::channels::ChannelSpec;

/// On-disk record of one completed design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignFile {
    pub channel: ChannelSpec,
    pub config: SolverConfig,
    pub dc: [f64; 4],
    pub cos: [Vec<f64>; 4],
    pub sin: [Vec<f64>; 4],
    pub report: SolverReport,
}

impl DesignFile {
    pub fn new(
        channel: ChannelSpec,
        config: SolverConfig,
        solution: &FourierSolution,
        report: SolverReport,
    ) -> Self {
        Self {
            channel,
            config,
            dc: solution.dc,
            cos: solution.cos_coeffs.clone(),
            sin: solution.sin_coeffs.clone(),
            report,
        }
    }

    pub fn solution(&self) -> Result<FourierSolution, SolverError> {
        let n = self.config.n_max;
        for i in 0..4 {
            if self.cos[i].len() != n || self.sin[i].len() != n {
                return Err(SolverError::BadInput(format!(
                    "coefficient rows must have length n_max = {n}"
                )));
            }
        }
        Ok(FourierSolution {
            n_max: n,
            dc: self.dc,
            cos_coeffs: self.cos.clone(),
            sin_coeffs: self.sin.clone(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("design serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
