//! Compilation and defect mitigation for programmable photonic interferometer meshes.
//!
//! A rectangular (Clements-style) mesh of Mach-Zehnder interferometers (MZIs) can
//! realize any unitary transfer matrix on its optical modes — but only if its
//! directional couplers hit the ideal 50:50 splitting ratio. This crate models such
//! meshes with per-coupler splitting defects and provides the tools to work around
//! them:
//!
//! - [`linalg`] — dense complex matrices, Haar-random unitaries, permutations, and
//!   the fidelity distance used throughout.
//! - [`mesh`] — beam splitters, phase shifters, MZI transfer matrices, mesh layout,
//!   and synthetic chip descriptions with phase-voltage calibrations.
//! - [`compiler`] — exact rectangular-mesh decomposition, both for ideal couplers
//!   and tailored to a chip's measured splitting ratios.
//! - [`power`] — electrical drive power implied by a phase program.
//! - [`ports`] — input/output port allocation searches that exploit relabeling
//!   freedom to cut power or compilation error.
//! - [`sim`] — a noiseless (optionally noisy) chip simulator.
//! - [`calib`] — splitting-ratio calibration against a chip-as-black-box.
//! - [`recipes`] — deterministic experiment recipes behind the CLI's `bench` command.

#![forbid(unsafe_code)]

pub mod brent;
pub mod calib;
pub mod compiler;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod ports;
pub mod power;
pub mod recipes;
pub mod sim;

pub use calib::{
    calibrate_global, calibrate_per_mzi, CalibOptions, CalibrationResult, ReflectivityBranch,
};
pub use compiler::{decompose, decompose_balanced, reconstruct, Decomposition};
pub use error::{Error, Result};
pub use linalg::{
    fidelity_distance, haar_random_unitary, permutation_matrix, ComplexMatrix, Permutation,
    UnitaryMatrix, C64,
};
pub use mesh::{
    beam_splitter, embed_two_mode, mzi_matrix, mzi_reflectivity, phase_shifter, sample_chip,
    ChipParams, ChipSpec, MeshTopology, MziSetting, MziSpec, PhaseProgram, ShifterCal,
};
pub use ports::{
    apply_allocation, classify_transpositions, randomized_search, relabel_experiment,
    sweep_search, sweep_search_with_mode, unrestricted_search, Allocation, Objective,
    SearchBudget, SearchResult, SweepMode, DEFAULT_UNRESTRICTED_CAP,
};
pub use power::{program_power, PowerReport};
pub use sim::{execute, execute_with_phase_noise, intensity_response, Chip, NoisyChip};
