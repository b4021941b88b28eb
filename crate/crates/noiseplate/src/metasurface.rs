//! Compilation of the designed SU(2) field into three patterned-waveplate
//! optic-axis profiles.
//!
//! Each field sample is a polarization rotation by angle `χ` about a unit
//! axis `n`. The QWP–HWP–QWP stack `W3(θ3) W2(θ2) W1(θ1)` reproduces it
//! exactly through the auxiliary angles `α = θ1−θ3`, `β = θ1−2θ2+θ3`,
//! `γ = θ1+θ3`; two exact solution branches exist per sample and a stitching
//! pass keeps the resulting profiles continuous.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};
use std::path::Path;

use thiserror::Error;

use crate::pauli::{pauli_compose, Mat2, PauliVector};
use crate::solver::UnitaryField;

/// Axis degeneracy threshold on `sin(χ/2)`.
pub const DEGENERACY_EPS: f64 = 1e-9;

/// Largest tolerated per-sample angle jump after stitching.
pub const JUMP_THRESHOLD: f64 = FRAC_PI_4;

#[derive(Debug, Clone, Error)]
pub enum MetasurfaceError {
    #[error(
        "both solution branches jump more than π/4 at sample {index} \
         (best jump {jump:.3} rad)"
    )]
    UnresolvableJump { index: usize, jump: f64 },
    #[error("pattern reconstruction error {error:.3e} at sample {index} exceeds {limit:.1e}")]
    Reconstruction { index: usize, error: f64, limit: f64 },
    #[error("pattern CSV parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

/// An optical retarder with retardation `δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateSpec {
    pub delta: f64,
}

impl PlateSpec {
    pub const fn quarter_wave() -> Self {
        Self { delta: FRAC_PI_2 }
    }

    pub const fn half_wave() -> Self {
        Self { delta: PI }
    }
}

/// The canonical QWP–HWP–QWP stack: `δ1 = δ3 = π/2`, `δ2 = π`.
pub fn canonical_stack() -> [PlateSpec; 3] {
    [
        PlateSpec::quarter_wave(),
        PlateSpec::half_wave(),
        PlateSpec::quarter_wave(),
    ]
}

/// Waveplate matrix in the circular basis:
/// `cos(δ/2) σ0 + i sin(δ/2)(cos 2θ σ1 + sin 2θ σ2)`. Always SU(2).
pub fn waveplate_matrix(plate: &PlateSpec, theta: f64) -> Mat2 {
    let (s, c) = (0.5 * plate.delta).sin_cos();
    let (s2t, c2t) = (2.0 * theta).sin_cos();
    // w = c σ0 − i(−s·cos2θ σ1 − s·sin2θ σ2)
    pauli_compose(&PauliVector::from_real([c, -s * c2t, -s * s2t, 0.0]))
}

/// Pauli coefficients of `W3(θ3) W2(θ2) W1(θ1)` for the canonical stack in
/// closed form: `ℓ0 = −cos α cos β`, `ℓ1 = −sin β sin γ`,
/// `ℓ2 = sin β cos γ`, `ℓ3 = sin α cos β`.
pub fn triple_product_coefficients(theta1: f64, theta2: f64, theta3: f64) -> PauliVector {
    let alpha = theta1 - theta3;
    let beta = theta1 - 2.0 * theta2 + theta3;
    let gamma = theta1 + theta3;
    PauliVector::from_real([
        -alpha.cos() * beta.cos(),
        -beta.sin() * gamma.sin(),
        beta.sin() * gamma.cos(),
        alpha.sin() * beta.cos(),
    ])
}

/// Rotation angle and axis per grid sample: `χ = 2 arccos u0`,
/// `n = (u1, u2, u3)/sin(χ/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisAngleField {
    /// Quasi-momentum samples `q_j ∈ [0, 2π)`.
    pub grid: Vec<f64>,
    /// Rotation angles in `[0, 2π]`.
    pub chi: Vec<f64>,
    /// Unit rotation axes; degenerate samples are filled from the nearest
    /// non-degenerate neighbor, or `(1, 0, 0)` if the whole field is
    /// degenerate.
    pub axis: Vec<[f64; 3]>,
}

impl AxisAngleField {
    pub fn len(&self) -> usize {
        self.chi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chi.is_empty()
    }

    /// Rebuild the SU(2) sample `cos(χ/2) σ0 − i sin(χ/2) n·σ`.
    pub fn matrix(&self, j: usize) -> Mat2 {
        let half = 0.5 * self.chi[j];
        let (s, c) = half.sin_cos();
        let n = self.axis[j];
        pauli_compose(&PauliVector::from_real([c, s * n[0], s * n[1], s * n[2]]))
    }
}

/// Convert unit-norm field samples to axis–angle form, handling `χ ≈ 0`
/// degeneracies by neighbor fill.
pub fn axis_angle(field: &UnitaryField) -> AxisAngleField {
    let q = field.len();
    let mut chi = Vec::with_capacity(q);
    let mut axis: Vec<Option<[f64; 3]>> = Vec::with_capacity(q);
    for u in &field.values {
        let c = u[0].clamp(-1.0, 1.0);
        let half = c.acos();
        chi.push(2.0 * half);
        let s = half.sin();
        if s > DEGENERACY_EPS {
            axis.push(Some([u[1] / s, u[2] / s, u[3] / s]));
        } else {
            axis.push(None);
        }
    }
    // Nearest non-degenerate neighbor by ring distance.
    let filled: Vec<[f64; 3]> = (0..q)
        .map(|j| {
            if let Some(n) = axis[j] {
                return n;
            }
            for step in 1..=q / 2 + 1 {
                let fwd = (j + step) % q;
                let bwd = (j + q - step % q) % q;
                if let Some(n) = axis[bwd] {
                    return n;
                }
                if let Some(n) = axis[fwd] {
                    return n;
                }
            }
            [1.0, 0.0, 0.0]
        })
        .collect();
    AxisAngleField {
        grid: field.grid.clone(),
        chi,
        axis: filled,
    }
}

/// One exact stack solution in the auxiliary angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchAngles {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl BranchAngles {
    /// Invert `α = θ1−θ3`, `β = θ1−2θ2+θ3`, `γ = θ1+θ3`.
    pub fn thetas(&self) -> [f64; 3] {
        let theta1 = 0.5 * (self.alpha + self.gamma);
        let theta3 = 0.5 * (self.gamma - self.alpha);
        let theta2 = 0.5 * (self.gamma - self.beta);
        [theta1, theta2, theta3]
    }
}

/// The two exact solution branches for a rotation `(χ, n)`:
///
/// ```text
/// α1 = atan2(−sin(χ/2) cos ϑ, cos(χ/2))
/// β1 = atan2(sin(χ/2) sin ϑ, −√(1 − sin²(χ/2) sin²ϑ))
/// γ1 = φ − π/2,            (α2, β2, γ2) = (π + α1, π − β1, γ1)
/// ```
///
/// with `ϑ = arccos n3`, `φ = atan2(n2, n1)`.
pub fn branch_pair(chi: f64, axis: [f64; 3]) -> [BranchAngles; 2] {
    let half = 0.5 * chi;
    let (sh, ch) = half.sin_cos();
    // cos ϑ and sin ϑ taken from the axis components directly; going through
    // arccos would lose half the precision where n3 ≈ ±1.
    let cv = axis[2].clamp(-1.0, 1.0);
    let sv = axis[0].hypot(axis[1]);
    let phi = axis[1].atan2(axis[0]);
    let ssv = sh * sv;
    let alpha1 = (-sh * cv).atan2(ch);
    let beta1 = ssv.atan2(-(1.0 - ssv * ssv).max(0.0).sqrt());
    let gamma1 = phi - FRAC_PI_2;
    let b1 = BranchAngles {
        alpha: alpha1,
        beta: beta1,
        gamma: gamma1,
    };
    let b2 = BranchAngles {
        alpha: reduce_angle(PI + alpha1),
        beta: reduce_angle(PI - beta1),
        gamma: gamma1,
    };
    [b1, b2]
}

/// Reduce an angle to `(−π, π]`.
pub fn reduce_angle(x: f64) -> f64 {
    let t = x.rem_euclid(TAU);
    if t > PI {
        t - TAU
    } else {
        t
    }
}

/// Shift `x` by the multiple of 2π closest to `anchor`.
fn lift_to(x: f64, anchor: f64) -> f64 {
    x + TAU * ((anchor - x) / TAU).round()
}

/// The three optic-axis profiles over one transverse period.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternProfile {
    /// Spatial period Λ in millimeters.
    pub period_mm: f64,
    /// Positions `x_j = Λ j / Q`.
    pub x_mm: Vec<f64>,
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
    pub theta3: Vec<f64>,
}

impl PatternProfile {
    pub fn len(&self) -> usize {
        self.x_mm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_mm.is_empty()
    }

    /// `W3(θ3) W2(θ2) W1(θ1)` at sample `j`.
    pub fn reconstruct(&self, j: usize) -> Mat2 {
        let [w1, w2, w3] = canonical_stack();
        waveplate_matrix(&w3, self.theta3[j])
            * waveplate_matrix(&w2, self.theta2[j])
            * waveplate_matrix(&w1, self.theta1[j])
    }

    /// Max Frobenius distance between the reconstructed stack and the target
    /// field over all samples.
    pub fn max_reconstruction_error(&self, field: &UnitaryField) -> f64 {
        (0..self.len())
            .map(|j| (self.reconstruct(j) - field.matrix(j)).norm_fro())
            .fold(0.0, f64::max)
    }

    /// Largest angle change between adjacent samples (any plate).
    pub fn max_adjacent_jump(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 1..self.len() {
            for t in [&self.theta1, &self.theta2, &self.theta3] {
                worst = worst.max((t[j] - t[j - 1]).abs());
            }
        }
        worst
    }

    /// Copy with every angle reduced to `(−π, π]` (the export convention).
    pub fn reduced(&self) -> Self {
        Self {
            period_mm: self.period_mm,
            x_mm: self.x_mm.clone(),
            theta1: self.theta1.iter().copied().map(reduce_angle).collect(),
            theta2: self.theta2.iter().copied().map(reduce_angle).collect(),
            theta3: self.theta3.iter().copied().map(reduce_angle).collect(),
        }
    }

    /// CSV rendering: header `x_mm,theta1_rad,theta2_rad,theta3_rad`, one row
    /// per sample, angles reduced to `(−π, π]`, shortest round-trip decimal
    /// formatting, LF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x_mm,theta1_rad,theta2_rad,theta3_rad\n");
        for j in 0..self.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.x_mm[j],
                reduce_angle(self.theta1[j]),
                reduce_angle(self.theta2[j]),
                reduce_angle(self.theta3[j]),
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, MetasurfaceError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(MetasurfaceError::Parse {
            line: 1,
            message: "empty file".into(),
        })?;
        if header.trim() != "x_mm,theta1_rad,theta2_rad,theta3_rad" {
            return Err(MetasurfaceError::Parse {
                line: 1,
                message: format!("unexpected header `{header}`"),
            });
        }
        let mut x_mm = Vec::new();
        let mut theta1 = Vec::new();
        let mut theta2 = Vec::new();
        let mut theta3 = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(MetasurfaceError::Parse {
                    line: idx + 1,
                    message: format!("expected 4 fields, found {}", fields.len()),
                });
            }
            let mut parsed = [0.0; 4];
            for (slot, raw) in parsed.iter_mut().zip(&fields) {
                *slot = raw.trim().parse().map_err(|e| MetasurfaceError::Parse {
                    line: idx + 1,
                    message: format!("bad number `{raw}`: {e}"),
                })?;
            }
            x_mm.push(parsed[0]);
            theta1.push(parsed[1]);
            theta2.push(parsed[2]);
            theta3.push(parsed[3]);
        }
        if x_mm.is_empty() {
            return Err(MetasurfaceError::Parse {
                line: 2,
                message: "no data rows".into(),
            });
        }
        // Λ is recovered from the uniform sampling x_j = Λ j / Q.
        let period_mm = if x_mm.len() > 1 {
            x_mm[1] * x_mm.len() as f64
        } else {
            x_mm[0].max(1.0)
        };
        Ok(Self {
            period_mm,
            x_mm,
            theta1,
            theta2,
            theta3,
        })
    }
}

/// Per-sample branch candidates for a whole field.
pub fn branch_candidates(field: &AxisAngleField) -> Vec<[BranchAngles; 2]> {
    (0..field.len())
        .map(|j| branch_pair(field.chi[j], field.axis[j]))
        .collect()
}

/// Scan the samples in order, choosing per sample the branch (with auxiliary
/// angles lifted by 2π multiples toward the previous sample) that keeps the
/// plate angles continuous. The first sample uses branch 1.
pub fn stitch_branches(
    candidates: &[[BranchAngles; 2]],
    period_mm: f64,
) -> Result<PatternProfile, MetasurfaceError> {
    let q = candidates.len();
    let mut theta = [
        Vec::with_capacity(q),
        Vec::with_capacity(q),
        Vec::with_capacity(q),
    ];
    let mut prev_aux: Option<BranchAngles> = None;
    let mut prev_theta = [0.0; 3];
    for (index, pair) in candidates.iter().enumerate() {
        let chosen = match prev_aux {
            None => pair[0],
            Some(prev) => {
                // Besides the two branches, the stack equations admit the
                // all-odd shift (α+π, β+π, γ+π); fields whose rotation axis
                // flips through a degeneracy need it to stay continuous.
                let shifted = |b: &BranchAngles| BranchAngles {
                    alpha: b.alpha + PI,
                    beta: b.beta + PI,
                    gamma: b.gamma + PI,
                };
                let variants = [pair[0], pair[1], shifted(&pair[0]), shifted(&pair[1])];
                let mut best: Option<(f64, f64, BranchAngles)> = None;
                for cand in variants {
                    let lifted = BranchAngles {
                        alpha: lift_to(cand.alpha, prev.alpha),
                        beta: lift_to(cand.beta, prev.beta),
                        gamma: lift_to(cand.gamma, prev.gamma),
                    };
                    let t = lifted.thetas();
                    let jump = (0..3).map(|i| (t[i] - prev_theta[i]).abs()).fold(0.0, f64::max);
                    let score: f64 = (0..3).map(|i| (t[i] - prev_theta[i]).abs()).sum();
                    let better = match &best {
                        None => true,
                        Some((best_jump, best_score, _)) => {
                            if (jump <= JUMP_THRESHOLD) != (*best_jump <= JUMP_THRESHOLD) {
                                jump <= JUMP_THRESHOLD
                            } else {
                                score < *best_score
                            }
                        }
                    };
                    if better {
                        best = Some((jump, score, lifted));
                    }
                }
                let (jump, _, lifted) = best.unwrap();
                if jump > JUMP_THRESHOLD {
                    return Err(MetasurfaceError::UnresolvableJump { index, jump });
                }
                lifted
            }
        };
        let t = chosen.thetas();
        for i in 0..3 {
            theta[i].push(t[i]);
        }
        prev_aux = Some(chosen);
        prev_theta = t;
    }
    let x_mm = (0..q).map(|j| period_mm * j as f64 / q as f64).collect();
    let [theta1, theta2, theta3] = theta;
    Ok(PatternProfile {
        period_mm,
        x_mm,
        theta1,
        theta2,
        theta3,
    })
}

/// Full per-sample angle extraction: branch solutions plus stitching.
pub fn solve_angles(
    field: &AxisAngleField,
    period_mm: f64,
) -> Result<PatternProfile, MetasurfaceError> {
    stitch_branches(&branch_candidates(field), period_mm)
}

/// Highest-level conversion: designed field → stitched pattern, with the
/// reconstruction invariant checked against `limit`.
pub fn pattern_from_field(
    field: &UnitaryField,
    period_mm: f64,
    recon_limit: f64,
) -> Result<PatternProfile, MetasurfaceError> {
    let aa = axis_angle(field);
    let profile = solve_angles(&aa, period_mm)?;
    let mut worst = (0, 0.0f64);
    for j in 0..profile.len() {
        let err = (profile.reconstruct(j) - field.matrix(j)).norm_fro();
        if err > worst.1 {
            worst = (j, err);
        }
    }
    if worst.1 > recon_limit {
        return Err(MetasurfaceError::Reconstruction {
            index: worst.0,
            error: worst.1,
            limit: recon_limit,
        });
    }
    Ok(profile)
}

/// Write the pattern CSV to disk.
pub fn export_pattern(profile: &PatternProfile, path: &Path) -> Result<(), MetasurfaceError> {
    std::fs::write(path, profile.to_csv()).map_err(|e| MetasurfaceError::Io(e.to_string()))
}

/// Read a pattern CSV from disk.
pub fn import_pattern(path: &Path) -> Result<PatternProfile, MetasurfaceError> {
    let text = std::fs::read_to_string(path).map_err(|e| MetasurfaceError::Io(e.to_string()))?;
    PatternProfile::from_csv(&text)
}
