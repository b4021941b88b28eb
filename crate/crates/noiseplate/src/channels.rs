//! Single-qubit noise channels as Kraus sets, their 4×4 Pauli-coefficient
//! Gram matrices, and the structural feasibility check for realizing a
//! channel as an average over an SU(2) field.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pauli::{pauli_decompose, sigma, DensityMatrix, Mat2, StateError};
use crate::sym4::eigen_sym4;

/// Tolerance used when validating trace preservation of a Kraus set.
pub const TP_TOL: f64 = 1e-10;

/// Default tolerance for the feasibility verdict.
pub const FEASIBILITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Error)]
pub enum ChannelError {
    #[error("coupling strength p = {0} outside [0, 1]")]
    CouplingOutOfRange(f64),
    #[error("Kraus set is not trace preserving: ‖Σ A†A − σ0‖ = {0:.3e}")]
    NotTracePreserving(f64),
    #[error("Kraus set is empty")]
    Empty,
    #[error("invalid output state: {0}")]
    BadState(#[from] StateError),
}

/// The four named channels of the toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    BitFlip,
    BitPhaseFlip,
    PhaseFlip,
    Depolarizing,
}

impl ChannelKind {
    pub const ALL: [ChannelKind; 4] = [
        ChannelKind::BitFlip,
        ChannelKind::BitPhaseFlip,
        ChannelKind::PhaseFlip,
        ChannelKind::Depolarizing,
    ];

    /// Pauli index of the flip operator for the three flip channels.
    fn flip_index(&self) -> Option<usize> {
        match self {
            ChannelKind::BitFlip => Some(1),
            ChannelKind::BitPhaseFlip => Some(2),
            ChannelKind::PhaseFlip => Some(3),
            ChannelKind::Depolarizing => None,
        }
    }
}

impl std::fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ChannelKind::BitFlip => "bit_flip",
            ChannelKind::BitPhaseFlip => "bit_phase_flip",
            ChannelKind::PhaseFlip => "phase_flip",
            ChannelKind::Depolarizing => "depolarizing",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for ChannelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "bit_flip" => Ok(ChannelKind::BitFlip),
            "bit_phase_flip" => Ok(ChannelKind::BitPhaseFlip),
            "phase_flip" => Ok(ChannelKind::PhaseFlip),
            "depolarizing" | "depolarization" => Ok(ChannelKind::Depolarizing),
            other => Err(format!(
                "unknown channel kind `{other}` (expected bit-flip, bit-phase-flip, \
                 phase-flip, or depolarizing)"
            )),
        }
    }
}

/// A set of Kraus operators `{A_k}` with a human-readable label.
///
/// Construction does not enforce trace preservation so that diagnostic
/// routines can inspect defective sets; [`apply_channel`] validates it.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet {
    pub operators: Vec<Mat2>,
    pub label: String,
}

impl KrausSet {
    pub fn new(operators: Vec<Mat2>, label: impl Into<String>) -> Self {
        Self {
            operators,
            label: label.into(),
        }
    }
}

/// Kraus operators of the named channels:
/// `{√(1−p) σ0, √p σ_i}` for the flips and
/// `{√(1−p) σ0, √(p/3) σ1, √(p/3) σ2, √(p/3) σ3}` for depolarization.
pub fn standard_channel(kind: ChannelKind, p: f64) -> Result<KrausSet, ChannelError> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(ChannelError::CouplingOutOfRange(p));
    }
    let real = |x: f64| C64::new(x, 0.0);
    let mut ops = vec![sigma(0).scaled(real((1.0 - p).sqrt()))];
    match kind.flip_index() {
        Some(a) => {
            if p > 0.0 {
                ops.push(sigma(a).scaled(real(p.sqrt())));
            }
        }
        None => {
            if p > 0.0 {
                let w = (p / 3.0).sqrt();
                for a in 1..4 {
                    ops.push(sigma(a).scaled(real(w)));
                }
            }
        }
    }
    Ok(KrausSet::new(ops, format!("{kind} p={p}")))
}

/// Residuals of the trace-preservation and unitality sums.
#[derive(Debug, Clone, Copy)]
pub struct TracePreservationReport {
    pub tp: bool,
    pub unital: bool,
    /// ‖Σ A†A − σ0‖_F
    pub tp_residual: f64,
    /// ‖Σ A A† − σ0‖_F
    pub unital_residual: f64,
}

/// Test `Σ A†A = σ0` (trace preservation) and `Σ A A† = σ0` (unitality)
/// separately, each against [`TP_TOL`].
pub fn check_trace_preserving(k: &KrausSet) -> TracePreservationReport {
    let mut tp_sum = Mat2::zero();
    let mut unital_sum = Mat2::zero();
    for a in &k.operators {
        tp_sum = tp_sum + a.adjoint() * *a;
        unital_sum = unital_sum + *a * a.adjoint();
    }
    let tp_residual = (tp_sum - Mat2::identity()).norm_fro();
    let unital_residual = (unital_sum - Mat2::identity()).norm_fro();
    TracePreservationReport {
        tp: tp_residual <= TP_TOL,
        unital: unital_residual <= TP_TOL,
        tp_residual,
        unital_residual,
    }
}

/// `ρ → Σ_k A_k ρ A_k†`. Rejects Kraus sets violating trace preservation.
pub fn apply_channel(k: &KrausSet, rho: &DensityMatrix) -> Result<DensityMatrix, ChannelError> {
    if k.operators.is_empty() {
        return Err(ChannelError::Empty);
    }
    let report = check_trace_preserving(k);
    if !report.tp {
        return Err(ChannelError::NotTracePreserving(report.tp_residual));
    }
    let mut out = Mat2::zero();
    for a in &k.operators {
        out = out + *a * *rho.matrix() * a.adjoint();
    }
    // Symmetrize away round-off so the output passes validation.
    let out = (out + out.adjoint()).scaled(C64::new(0.5, 0.0));
    Ok(DensityMatrix::new(out)?)
}

/// Hermitian 4×4 matrix of summed Pauli-coefficient products,
/// `M_ij = Σ_k c_i⁽ᵏ⁾ c_j*⁽ᵏ⁾`. These are the target second moments the
/// designed field has to reproduce.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramMatrix {
    m: [[C64; 4]; 4],
}

impl GramMatrix {
    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.m[i][j]
    }

    pub fn trace(&self) -> f64 {
        (0..4).map(|i| self.m[i][i].re).sum()
    }

    /// Real part, the target of the moment-matching solver.
    pub fn re(&self) -> [[f64; 4]; 4] {
        let mut r = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                r[i][j] = self.m[i][j].re;
            }
        }
        r
    }

    pub fn max_imag(&self) -> f64 {
        self.m
            .iter()
            .flatten()
            .map(|z| z.im.abs())
            .fold(0.0, f64::max)
    }
}

/// Build the Gram matrix of a Kraus set via Pauli decomposition. Sets of any
/// length collapse to the same 4×4 object.
pub fn gram_matrix(k: &KrausSet) -> GramMatrix {
    let coeffs: Vec<_> = k.operators.iter().map(pauli_decompose).collect();
    let mut m = [[C64::new(0.0, 0.0); 4]; 4];
    for c in &coeffs {
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] += c.c[i] * c.c[j].conj();
            }
        }
    }
    GramMatrix { m }
}

/// Why a Gram matrix cannot be realized by a real SU(2) coefficient field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InfeasibilityReason {
    /// `Im M_ij` exceeds the tolerance; a real field can only produce real
    /// symmetric moments.
    NonRealEntry { row: usize, col: usize, magnitude: f64 },
    /// The (real part of the) Gram matrix has a negative eigenvalue.
    NotPositive { min_eigenvalue: f64 },
    /// `Tr M` deviates from 1, i.e. the set is not trace preserving.
    TraceDeviation { deviation: f64 },
}

impl std::fmt::Display for InfeasibilityReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InfeasibilityReason::NonRealEntry { row, col, magnitude } => write!(
                f,
                "Gram entry M[{row}][{col}] has imaginary part {magnitude:.3e}; \
                 only mixtures of unitaries (real moments) are realizable"
            ),
            InfeasibilityReason::NotPositive { min_eigenvalue } => write!(
                f,
                "Gram matrix has negative eigenvalue {min_eigenvalue:.3e}"
            ),
            InfeasibilityReason::TraceDeviation { deviation } => {
                write!(f, "Tr(Gram) deviates from 1 by {deviation:.3e}")
            }
        }
    }
}

/// Verdict of the structural dilation-feasibility analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Feasibility {
    Feasible,
    Infeasible(InfeasibilityReason),
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible)
    }
}

/// A target is feasible iff its Gram matrix is real (within `tol`), PSD, and
/// has unit trace. The first failing condition is reported with its
/// magnitude.
pub fn feasibility(g: &GramMatrix, tol: f64) -> Feasibility {
    // Report the first offending entry in row-major order; deterministic
    // when several entries tie.
    for i in 0..4 {
        for j in 0..4 {
            let im = g.entry(i, j).im.abs();
            if im > tol {
                return Feasibility::Infeasible(InfeasibilityReason::NonRealEntry {
                    row: i,
                    col: j,
                    magnitude: im,
                });
            }
        }
    }
    let (vals, _) = eigen_sym4(&g.re());
    if vals[3] < -tol {
        return Feasibility::Infeasible(InfeasibilityReason::NotPositive {
            min_eigenvalue: vals[3],
        });
    }
    let dev = (g.trace() - 1.0).abs();
    if dev > tol {
        return Feasibility::Infeasible(InfeasibilityReason::TraceDeviation { deviation: dev });
    }
    Feasibility::Feasible
}

/// One complex entry as a `[re, im]` pair; a Kraus operator is four pairs in
/// row-major order.
pub type KrausOperatorEntries = [[f64; 2]; 4];

/// Serializable channel description, the on-disk companion of [`KrausSet`].
///
/// ```json
/// {"kind": "phase_flip", "p": 0.25}
/// {"kind": "custom", "kraus": [[[0.866,0],[0,0],[0,0],[0.866,0]], ...]}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelSpec {
    BitFlip { p: f64 },
    BitPhaseFlip { p: f64 },
    PhaseFlip { p: f64 },
    Depolarizing { p: f64 },
    Custom { kraus: Vec<KrausOperatorEntries> },
}

impl ChannelSpec {
    pub fn named(kind: ChannelKind, p: f64) -> Self {
        match kind {
            ChannelKind::BitFlip => ChannelSpec::BitFlip { p },
            ChannelKind::BitPhaseFlip => ChannelSpec::BitPhaseFlip { p },
            ChannelKind::PhaseFlip => ChannelSpec::PhaseFlip { p },
            ChannelKind::Depolarizing => ChannelSpec::Depolarizing { p },
        }
    }

    pub fn kind(&self) -> Option<ChannelKind> {
        match self {
            ChannelSpec::BitFlip { .. } => Some(ChannelKind::BitFlip),
            ChannelSpec::BitPhaseFlip { .. } => Some(ChannelKind::BitPhaseFlip),
            ChannelSpec::PhaseFlip { .. } => Some(ChannelKind::PhaseFlip),
            ChannelSpec::Depolarizing { .. } => Some(ChannelKind::Depolarizing),
            ChannelSpec::Custom { .. } => None,
        }
    }

    pub fn p(&self) -> Option<f64> {
        match self {
            ChannelSpec::BitFlip { p }
            | ChannelSpec::BitPhaseFlip { p }
            | ChannelSpec::PhaseFlip { p }
            | ChannelSpec::Depolarizing { p } => Some(*p),
            ChannelSpec::Custom { .. } => None,
        }
    }

    pub fn label(&self) -> String {
        match self.kind() {
            Some(kind) => kind.to_string(),
            None => "custom".to_string(),
        }
    }

    /// Materialize the Kraus operators.
    pub fn kraus_set(&self) -> Result<KrausSet, ChannelError> {
        match self {
            ChannelSpec::Custom { kraus } => {
                if kraus.is_empty() {
                    return Err(ChannelError::Empty);
                }
                let ops = kraus
                    .iter()
                    .map(|entries| {
                        Mat2::new([
                            [
                                C64::new(entries[0][0], entries[0][1]),
                                C64::new(entries[1][0], entries[1][1]),
                            ],
                            [
                                C64::new(entries[2][0], entries[2][1]),
                                C64::new(entries[3][0], entries[3][1]),
                            ],
                        ])
                    })
                    .collect();
                Ok(KrausSet::new(ops, "custom"))
            }
            _ => standard_channel(self.kind().unwrap(), self.p().unwrap()),
        }
    }
}

/// Amplitude damping, the stock example of a non-unital (infeasible) target.
pub fn amplitude_damping(gamma: f64) -> KrausSet {
    let z = |re: f64| C64::new(re, 0.0);
    let a0 = Mat2::new([[z(1.0), z(0.0)], [z(0.0), z((1.0 - gamma).sqrt())]]);
    let a1 = Mat2::new([[z(0.0), z(gamma.sqrt())], [z(0.0), z(0.0)]]);
    KrausSet::new(vec![a0, a1], format!("amplitude_damping gamma={gamma}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{fidelity, ket_h, BlochVector};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_density(rng: &mut impl Rng) -> DensityMatrix {
        let z: f64 = rng.random_range(-1.0..1.0);
        let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let r: f64 = rng.random_range(0.0..1.0);
        let xy = (1.0 - z * z).sqrt();
        DensityMatrix::from_bloch(BlochVector {
            s1: r * xy * phi.cos(),
            s2: r * xy * phi.sin(),
            s3: r * z,
        })
        .unwrap()
    }

    #[test]
    fn phase_flip_quarter_kraus() {
        let k = standard_channel(ChannelKind::PhaseFlip, 0.25).unwrap();
        assert_eq!(k.operators.len(), 2);
        assert!((k.operators[0] - sigma(0).scaled(C64::new(0.75f64.sqrt(), 0.0))).norm_fro() < 1e-15);
        assert!((k.operators[1] - sigma(3).scaled(C64::new(0.5, 0.0))).norm_fro() < 1e-15);
    }

    #[test]
    fn depolarizing_zero_is_identity() {
        let k = standard_channel(ChannelKind::Depolarizing, 0.0).unwrap();
        assert_eq!(k.operators.len(), 1);
        assert!((k.operators[0] - sigma(0)).norm_fro() < 1e-15);
    }

    #[test]
    fn bit_flip_half_trace_preserving() {
        let k = standard_channel(ChannelKind::BitFlip, 0.5).unwrap();
        let report = check_trace_preserving(&k);
        assert!(report.tp);
        assert!(report.tp_residual < 1e-15);
    }

    #[test]
    fn p_out_of_range_rejected() {
        assert!(standard_channel(ChannelKind::BitFlip, -0.1).is_err());
        assert!(standard_channel(ChannelKind::BitFlip, 1.1).is_err());
    }

    #[test]
    fn phase_flip_scales_transverse_components() {
        let p = 0.25;
        let k = standard_channel(ChannelKind::PhaseFlip, p).unwrap();
        let rho = DensityMatrix::pure(ket_h());
        let out = apply_channel(&k, &rho).unwrap().bloch();
        assert_abs_diff_eq!(out.s1, 1.0 - 2.0 * p, epsilon = 1e-14);
        assert_abs_diff_eq!(out.s2, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(out.s3, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn depolarizing_shrinks_bloch_vector() {
        let p = 0.5;
        let k = standard_channel(ChannelKind::Depolarizing, p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let z: f64 = rng.random_range(-1.0..1.0);
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let xy = (1.0 - z * z).sqrt();
            let s = BlochVector {
                s1: xy * phi.cos(),
                s2: xy * phi.sin(),
                s3: z,
            };
            let rho = DensityMatrix::from_bloch(s).unwrap();
            let out = apply_channel(&k, &rho).unwrap().bloch();
            let factor = 1.0 - 4.0 * p / 3.0;
            assert_abs_diff_eq!(out.s1, factor * s.s1, epsilon = 1e-13);
            assert_abs_diff_eq!(out.s2, factor * s.s2, epsilon = 1e-13);
            assert_abs_diff_eq!(out.s3, factor * s.s3, epsilon = 1e-13);
        }
    }

    #[test]
    fn named_channels_fix_maximally_mixed() {
        for kind in ChannelKind::ALL {
            let k = standard_channel(kind, 0.3).unwrap();
            let out = apply_channel(&k, &DensityMatrix::maximally_mixed()).unwrap();
            assert!(out.bloch().norm() < 1e-14, "{kind}");
        }
    }

    #[test]
    fn named_channels_preserve_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for kind in ChannelKind::ALL {
            for p in [0.0, 0.125, 0.25, 0.5, 1.0] {
                let k = standard_channel(kind, p).unwrap();
                for _ in 0..100 {
                    let rho = random_density(&mut rng);
                    let out = apply_channel(&k, &rho).unwrap();
                    assert!((out.matrix().trace().re - 1.0).abs() < 1e-12);
                    assert!(out.matrix().herm_eigenvalues()[1] >= -1e-12);
                }
            }
        }
    }

    #[test]
    fn subnormalized_set_flagged() {
        let k = KrausSet::new(vec![sigma(0).scaled(C64::new(0.5, 0.0))], "half");
        let report = check_trace_preserving(&k);
        assert!(!report.tp);
        assert!(apply_channel(&k, &DensityMatrix::maximally_mixed()).is_err());
    }

    #[test]
    fn amplitude_damping_tp_but_not_unital() {
        let k = amplitude_damping(0.5);
        let report = check_trace_preserving(&k);
        assert!(report.tp);
        assert!(!report.unital);
    }

    #[test]
    fn gram_of_bit_flip() {
        let g = gram_matrix(&standard_channel(ChannelKind::BitFlip, 0.25).unwrap());
        let r = g.re();
        let expect = [0.75, 0.25, 0.0, 0.0];
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { expect[i] } else { 0.0 };
                assert_abs_diff_eq!(r[i][j], want, epsilon = 1e-14);
            }
        }
        assert!(g.max_imag() < 1e-15);
    }

    #[test]
    fn gram_of_depolarizing_half() {
        let g = gram_matrix(&standard_channel(ChannelKind::Depolarizing, 0.5).unwrap());
        let r = g.re();
        let expect = [0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0];
        for (i, want) in expect.iter().enumerate() {
            assert_abs_diff_eq!(r[i][i], *want, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(g.trace(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn gram_of_single_unitary_is_rank_one() {
        // exp(−i φ σ1) has real Pauli vector (cos φ, sin φ, 0, 0).
        let phi = 0.7_f64;
        let u = crate::pauli::pauli_compose(&crate::pauli::PauliVector::from_real([
            phi.cos(),
            phi.sin(),
            0.0,
            0.0,
        ]));
        let g = gram_matrix(&KrausSet::new(vec![u], "unitary"));
        assert_abs_diff_eq!(g.trace(), 1.0, epsilon = 1e-13);
        let (vals, _) = eigen_sym4(&g.re());
        assert_abs_diff_eq!(vals[0], 1.0, epsilon = 1e-12);
        assert!(vals[1].abs() < 1e-12);
    }

    #[test]
    fn gram_trace_one_for_trace_preserving_sets() {
        for kind in ChannelKind::ALL {
            for p in [0.0, 0.125, 0.25, 0.5, 1.0] {
                let g = gram_matrix(&standard_channel(kind, p).unwrap());
                assert_abs_diff_eq!(g.trace(), 1.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn gram_invariant_under_isometric_remixing() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let k = standard_channel(ChannelKind::Depolarizing, 0.25).unwrap();
        let g0 = gram_matrix(&k);
        let n = k.operators.len();
        for _ in 0..10 {
            // Random unitary on the Kraus index from Gram-Schmidt over a
            // complex Gaussian matrix.
            let mut v: Vec<Vec<C64>> = (0..n)
                .map(|_| {
                    (0..n)
                        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                        .collect()
                })
                .collect();
            for row in 0..n {
                for prev in 0..row {
                    let dot: C64 = (0..n).map(|c| v[row][c] * v[prev][c].conj()).sum();
                    for c in 0..n {
                        let sub = dot * v[prev][c];
                        v[row][c] -= sub;
                    }
                }
                let norm: f64 = (0..n).map(|c| v[row][c].norm_sqr()).sum::<f64>().sqrt();
                for c in 0..n {
                    v[row][c] /= norm;
                }
            }
            let remixed: Vec<Mat2> = (0..n)
                .map(|l| {
                    let mut acc = Mat2::zero();
                    for (kk, op) in k.operators.iter().enumerate() {
                        acc = acc + op.scaled(v[l][kk]);
                    }
                    acc
                })
                .collect();
            let g1 = gram_matrix(&KrausSet::new(remixed, "remixed"));
            for i in 0..4 {
                for j in 0..4 {
                    assert!((g1.entry(i, j) - g0.entry(i, j)).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn feasibility_verdicts() {
        let feasible = gram_matrix(&standard_channel(ChannelKind::BitFlip, 0.25).unwrap());
        assert!(feasibility(&feasible, FEASIBILITY_TOL).is_feasible());

        let identity = gram_matrix(&KrausSet::new(vec![sigma(0)], "identity"));
        assert!(feasibility(&identity, FEASIBILITY_TOL).is_feasible());

        let damping = gram_matrix(&amplitude_damping(0.5));
        match feasibility(&damping, FEASIBILITY_TOL) {
            Feasibility::Infeasible(InfeasibilityReason::NonRealEntry { row, col, magnitude }) => {
                assert!(magnitude > FEASIBILITY_TOL);
                assert!((row, col) == (0, 3) || (row, col) == (3, 0));
            }
            other => panic!("expected non-real diagnosis, got {other:?}"),
        }
    }

    #[test]
    fn feasibility_for_random_unitary_mixtures() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..50 {
            let terms = rng.random_range(1..=4);
            let mut weights: Vec<f64> = (0..terms).map(|_| rng.random_range(0.01..1.0)).collect();
            let total: f64 = weights.iter().sum();
            for w in weights.iter_mut() {
                *w /= total;
            }
            let ops: Vec<Mat2> = weights
                .iter()
                .map(|w| {
                    let mut u = [0.0; 4];
                    for v in u.iter_mut() {
                        *v = rng.random_range(-1.0..1.0);
                    }
                    let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
                    for v in u.iter_mut() {
                        *v /= n;
                    }
                    crate::pauli::pauli_compose(&crate::pauli::PauliVector::from_real(u))
                        .scaled(C64::new(w.sqrt(), 0.0))
                })
                .collect();
            let g = gram_matrix(&KrausSet::new(ops, "mixture"));
            assert!(feasibility(&g, FEASIBILITY_TOL).is_feasible());
        }
    }

    #[test]
    fn channel_spec_round_trip() {
        let spec = ChannelSpec::named(ChannelKind::PhaseFlip, 0.25);
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("phase_flip"));
        let back: ChannelSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);

        let custom: ChannelSpec = serde_json::from_str(
            r#"{"kind":"custom","kraus":[[[1.0,0.0],[0.0,0.0],[0.0,0.0],[1.0,0.0]]]}"#,
        )
        .unwrap();
        let k = custom.kraus_set().unwrap();
        assert!((k.operators[0] - sigma(0)).norm_fro() < 1e-15);
    }

    #[test]
    fn custom_spec_applies_like_named() {
        // Phase flip p = 1/4 spelled out as explicit matrices.
        let w0 = 0.75f64.sqrt();
        let custom = ChannelSpec::Custom {
            kraus: vec![
                [[w0, 0.0], [0.0, 0.0], [0.0, 0.0], [w0, 0.0]],
                [[0.5, 0.0], [0.0, 0.0], [0.0, 0.0], [-0.5, 0.0]],
            ],
        };
        let named = standard_channel(ChannelKind::PhaseFlip, 0.25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let rho = random_density(&mut rng);
        let a = apply_channel(&custom.kraus_set().unwrap(), &rho).unwrap();
        let b = apply_channel(&named, &rho).unwrap();
        assert!(fidelity(&a, &b) > 1.0 - 1e-12);
    }
}
