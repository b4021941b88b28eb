//! Inverse design of single-qubit noise channels as patterned-waveplate
//! stacks.
//!
//! A target channel, given by Kraus operators, is reduced to its 4×4 Pauli
//! second-moment (Gram) matrix. A Fourier-parameterized SU(2) field over one
//! transverse period is then optimized so that averaging the field's
//! conjugation action reproduces the channel exactly; the field is compiled
//! into three liquid-crystal optic-axis profiles (QWP–HWP–QWP), and a virtual
//! experiment propagates polarization states through the stack, tomographs
//! the output, and quantifies robustness to plate imperfections with Monte
//! Carlo sampling.
//!
//! Pipeline: [`channels`] → [`solver`] → [`metasurface`] → [`experiment`].

pub mod channels;
pub mod experiment;
mod gauss_newton;
pub mod metasurface;
pub mod pauli;
pub mod solver;
mod sym4;

pub use channels::{
    apply_channel, check_trace_preserving, feasibility, gram_matrix, standard_channel,
    ChannelKind, ChannelSpec, Feasibility, GramMatrix, KrausSet,
};
pub use experiment::{
    apply_stack, monte_carlo, tomography, trajectory, InputState, MonteCarloConfig,
};
pub use metasurface::{
    axis_angle, pattern_from_field, solve_angles, waveplate_matrix, PatternProfile,
};
pub use pauli::{fidelity, pauli_compose, pauli_decompose, BlochVector, DensityMatrix, Mat2};
pub use solver::{
    cost_f1, cost_f2, evaluate_field, second_moments, solve, DesignFile, FourierSolution,
    SolverConfig, SolverReport, UnitaryField,
};
