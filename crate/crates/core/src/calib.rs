//! Splitting-ratio calibration against a chip treated as a black box that
//! only accepts phase programs and reports output intensities.
//!
//! Two procedures are provided: a per-coupler measurement that isolates each
//! MZI with bar-state routing (exact on noiseless chips), and a global
//! single-ratio fit that matches measured intensities against a uniform
//! model chip via one-dimensional minimization (robust to measurement
//! noise because it aggregates every port of every input).

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::brent::minimize_scalar;
use crate::error::{Error, Result};
use crate::linalg::UnitaryMatrix;
use crate::mesh::{ChipSpec, MeshTopology, PhaseProgram};
use crate::sim::{execute, Chip};

/// Which side of the balanced point a chip's couplers are believed to sit
/// on. Intensity measurements only determine `cos²2θ`, which cannot tell a
/// coupler of reflectivity `r` from one of `1−r`; this hint resolves that
/// ambiguity for the per-coupler method.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ReflectivityBranch {
    /// Couplers have reflectivity below 1/2 (angle above π/4).
    #[default]
    BelowHalf,
    /// Couplers have reflectivity above 1/2 (angle below π/4).
    AboveHalf,
}

/// One probe of the global fit's misfit curve.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ProbePoint {
    pub r: f64,
    pub misfit: f64,
}

/// Outcome of a calibration run. At least one of `per_mzi_theta` /
/// `global_theta` is present, and every angle lies in (0, π/2).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CalibrationResult {
    /// Per-coupler angles in canonical MZI order (per-coupler method).
    pub per_mzi_theta: Option<Vec<f64>>,
    /// Single fitted angle for the whole mesh (global method).
    pub global_theta: Option<f64>,
    /// Chip measurements or misfit evaluations performed.
    pub evaluations: usize,
    /// Final misfit; zero for the exact per-coupler method.
    pub residual: f64,
    /// Set when the fit could not bracket a minimum and fell back to the
    /// best point of a coarse scan, or ran out of its evaluation budget.
    pub warning: bool,
    /// Every `(r, misfit)` pair probed by the global fit, in evaluation
    /// order; empty for the per-coupler method.
    pub trace: Vec<ProbePoint>,
}

impl CalibrationResult {
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Measures every coupler individually: the target MZI is driven to its
/// crossed state (`φᵢ = 0`) while every other MZI is fully bar (`φᵢ = π`),
/// which holds exactly whatever its own defect is. Light injected on the
/// target's top wire then reaches it unmixed, and its two output intensities
/// `(cos²2θ, sin²2θ)` travel unmixed to the detectors, so
/// `θ = ½·atan2(√I_cross, ±√I_bar)` recovers the angle exactly on a
/// noiseless chip. The sign is chosen by `branch`.
pub fn calibrate_per_mzi(
    chip: &mut dyn Chip,
    branch: ReflectivityBranch,
) -> Result<CalibrationResult> {
    let n = chip.n_modes();
    let topo = MeshTopology::new(n);
    let sign = match branch {
        ReflectivityBranch::BelowHalf => -1.0,
        ReflectivityBranch::AboveHalf => 1.0,
    };

    let mut thetas = Vec::with_capacity(topo.mzi_count());
    let mut evaluations = 0usize;
    for k in 0..topo.mzi_count() {
        let (_, top) = topo.position(k);
        let mut program = PhaseProgram::zeros(n);
        for (i, setting) in program.settings.iter_mut().enumerate() {
            setting.phi_i = if i == k { 0.0 } else { PI };
        }
        let v = chip.measure(&program, top)?;
        evaluations += 1;
        let i_bar = v[top].max(0.0);
        let i_cross = v[top + 1].max(0.0);
        let theta = 0.5 * i_cross.sqrt().atan2(sign * i_bar.sqrt());
        if !(theta > 0.0 && theta < FRAC_PI_2) {
            return Err(Error::OutOfRange(format!(
                "coupler {} measured fully transmissive or fully reflective (angle {theta})",
                k + 1
            )));
        }
        thetas.push(theta);
    }

    Ok(CalibrationResult {
        per_mzi_theta: Some(thetas),
        global_theta: None,
        evaluations,
        residual: 0.0,
        warning: false,
        trace: Vec::new(),
    })
}

/// Bar-transmission target the global fit drives every MZI toward; mostly
/// crossed settings make the misfit curve steepest around the true ratio.
pub const DEFAULT_PROBE_TARGET: f64 = 0.2;

/// Knobs for [`calibrate_global`].
#[derive(Clone, Copy, Debug)]
pub struct CalibOptions {
    /// Absolute convergence tolerance in the fitted reflectivity.
    pub tol: f64,
    /// Cap on misfit evaluations (bracketing probes included).
    pub max_evals: usize,
    /// Bar-transmission each MZI is driven toward while probing.
    pub probe_target: f64,
}

impl Default for CalibOptions {
    fn default() -> Self {
        Self { tol: 1e-4, max_evals: 60, probe_target: DEFAULT_PROBE_TARGET }
    }
}

/// The drive program the global fit probes with: every MZI's internal phase
/// is set so that a coupler of reflectivity `r_guess` would pass
/// `target_bar` of the light straight through (clamped to the fully crossed
/// setting when the guess can't reach that low); external and output phases
/// are zero.
pub fn probe_program(n: usize, r_guess: f64, target_bar: f64) -> Result<PhaseProgram> {
    if !(r_guess > 0.0 && r_guess < 1.0) {
        return Err(Error::OutOfRange(format!("reflectivity guess {r_guess} outside (0, 1)")));
    }
    if !(0.0..1.0).contains(&target_bar) {
        return Err(Error::OutOfRange(format!("bar-transmission target {target_bar} outside [0, 1)")));
    }
    // bar transmission of one MZI: 1 − sin²2θ·cos²(φᵢ/2)
    let sin_2theta_sq = 4.0 * r_guess * (1.0 - r_guess);
    let needed = ((1.0 - target_bar) / sin_2theta_sq).sqrt().min(1.0);
    let phi_i = 2.0 * needed.acos();
    let mut program = PhaseProgram::zeros(n);
    for setting in &mut program.settings {
        setting.phi_i = phi_i;
    }
    Ok(program)
}

/// The matrix a uniform chip of reflectivity `r_guess` would realize under
/// [`probe_program`]; deterministic in its arguments.
pub fn probe_unitary(n: usize, r_guess: f64, target_bar: f64) -> Result<UnitaryMatrix> {
    let program = probe_program(n, r_guess, target_bar)?;
    execute(&program, &ChipSpec::uniform(n, r_guess))
}

/// Runs `program` once per input port and collects the intensity table
/// `measured[port][detector]`.
pub fn measure_all_ports(chip: &mut dyn Chip, program: &PhaseProgram) -> Result<Vec<Vec<f64>>> {
    let n = chip.n_modes();
    (0..n).map(|port| chip.measure(program, port)).collect()
}

/// Euclidean misfit between a measured intensity table and the response of a
/// uniform chip of reflectivity `r` to the same program, concatenated over
/// every input port.
pub fn probe_misfit(measured: &[Vec<f64>], program: &PhaseProgram, r: f64) -> Result<f64> {
    let n = program.n;
    if measured.len() != n || measured.iter().any(|row| row.len() != n) {
        return Err(Error::ShapeMismatch(format!(
            "intensity table must be {n}×{n} to match the program"
        )));
    }
    let model = execute(program, &ChipSpec::uniform(n, r))?;
    let mut sum = 0.0;
    for port in 0..n {
        for det in 0..n {
            let expected = model.get(det, port).norm_sqr();
            let diff = measured[port][det] - expected;
            sum += diff * diff;
        }
    }
    Ok(sum.sqrt())
}

/// Fits one reflectivity to the whole chip by minimizing [`probe_misfit`]
/// over r ∈ (0.01, 0.99).
///
/// The chip is measured exactly once per input port; every subsequent
/// evaluation compares that cached table against a simulated uniform chip.
/// The minimizer starts from the bracket
/// `(max(0.01, guess−0.3), guess, min(0.99, guess+0.3))`; if the guess is not
/// the lowest of the three, no descent direction is known, so the fit falls
/// back to a coarse scan of the whole range and returns the best sampled
/// point with `warning` set.
pub fn calibrate_global(
    chip: &mut dyn Chip,
    r_guess: f64,
    opts: &CalibOptions,
) -> Result<CalibrationResult> {
    if !(r_guess > 0.0 && r_guess < 1.0) {
        return Err(Error::OutOfRange(format!("reflectivity guess {r_guess} outside (0, 1)")));
    }
    if opts.max_evals < 3 {
        return Err(Error::OutOfRange("global fit needs a budget of at least 3 evaluations".into()));
    }

    let n = chip.n_modes();
    let program = probe_program(n, r_guess, opts.probe_target)?;
    let measured = measure_all_ports(chip, &program)?;

    let mut trace: Vec<ProbePoint> = Vec::new();
    let mut f = |r: f64| -> Result<f64> {
        let misfit = probe_misfit(&measured, &program, r)?;
        trace.push(ProbePoint { r, misfit });
        Ok(misfit)
    };

    let mid = r_guess.clamp(0.02, 0.98);
    let lo = (mid - 0.3).max(0.01);
    let hi = (mid + 0.3).min(0.99);
    let f_lo = f(lo)?;
    let f_mid = f(mid)?;
    let f_hi = f(hi)?;

    let mut warning;
    let mut best_r = mid;
    let mut best_f = f_mid;
    if f_mid <= 1e-12 {
        // the guess already reproduces the measurements to round-off
        warning = false;
    } else if f_mid <= f_lo && f_mid <= f_hi {
        let inner = minimize_scalar(&mut f, lo, hi, mid, f_mid, opts.tol, opts.max_evals - 3)?;
        warning = !inner.converged;
        best_r = inner.x;
        best_f = inner.fx;
    } else {
        // no descent bracket: coarse scan of the admissible range
        let grid_points = 21;
        for k in 0..grid_points {
            let r = 0.01 + (0.98 * k as f64) / (grid_points - 1) as f64;
            f(r)?;
        }
        warning = true;
    }
    drop(f);
    for p in &trace {
        if p.misfit < best_f {
            (best_r, best_f) = (p.r, p.misfit);
        }
    }
    if trace.len() > opts.max_evals {
        warning = true;
    }

    Ok(CalibrationResult {
        per_mzi_theta: None,
        global_theta: Some(best_r.sqrt().acos()),
        evaluations: trace.len(),
        residual: best_f,
        warning,
        trace,
    })
}

/// Reflectivity corresponding to a coupler angle: `r = cos²θ`.
pub fn reflectivity_of(theta: f64) -> f64 {
    theta.cos() * theta.cos()
}
