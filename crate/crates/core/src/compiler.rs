//! Compilation of an `n x n` unitary onto the rectangular MZI mesh.
//!
//! The decomposition progressively nulls matrix entries with two-mode
//! operations — multiplying by an MZI inverse on the right or by an MZI on
//! the left along alternating anti-diagonals — until only a diagonal remains.
//! Left-side factors are then migrated through that diagonal so the result is
//! a physical circuit: a phase program for the mesh plus a final column of
//! output phase shifters.
//!
//! Every step takes the coupler angle of the physical MZI it will land on, so
//! the same routine serves both balanced compilation (`θ = π/4` everywhere)
//! and compilation tailored to a characterized chip. When a coupler cannot
//! steer enough power to null its target the internal phase is clamped to the
//! closest achievable setting and the step is counted; the resulting program
//! is then the best this mesh position can do for that entry.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use crate::error::{Error, Result};
use crate::linalg::{C64, ComplexMatrix, UnitaryMatrix};
use crate::mesh::{mzi_count, mzi_matrix, MeshTopology, MziSetting, PhaseProgram};

/// Wraps into `[0, 2π)`.
pub(crate) fn wrap_two_pi(x: f64) -> f64 {
    let w = x.rem_euclid(2.0 * PI);
    if w >= 2.0 * PI {
        0.0
    } else {
        w
    }
}

/// Row-major adjoint of a 2x2 block.
fn adjoint2(z: &[C64; 4]) -> [C64; 4] {
    [z[0].conj(), z[2].conj(), z[1].conj(), z[3].conj()]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum StepKind {
    /// Right-multiply the working matrix by an MZI inverse acting on columns
    /// `(col, col+1)`; nulls `W[row][col]` against `W[row][col+1]`.
    RightInv,
    /// Left-multiply by an MZI acting on rows `(row−1, row)`; nulls
    /// `W[row][col]` against `W[row−1][col]`.
    Left,
}

#[derive(Clone, Copy, Debug)]
struct PlanStep {
    kind: StepKind,
    /// Top mode of the pair the operation couples.
    top: usize,
    /// Entry to null (0-based).
    row: usize,
    col: usize,
    /// Canonical mesh index of the MZI this step programs.
    mzi: usize,
}

/// The element-nulling schedule for a given size, with every step mapped to
/// its physical mesh position.
///
/// Anti-diagonal `i` (1-based, from the bottom-left corner) is cleared with
/// column operations when `i` is odd and row operations when `i` is even.
/// Positions are assigned greedily in circuit order — each operation goes to
/// the earliest mesh layer still free on both of its modes — which tiles the
/// rectangle exactly: every mesh MZI is used once.
pub(crate) struct NullingPlan {
    steps: Vec<PlanStep>,
}

impl NullingPlan {
    pub(crate) fn for_size(n: usize) -> Self {
        assert!(n >= 1);
        let topo = MeshTopology::new(n);
        let mut steps: Vec<PlanStep> = Vec::with_capacity(mzi_count(n));
        for i in 1..n {
            if i % 2 == 1 {
                for j in 0..i {
                    let col1 = i - j;
                    let row1 = n - j;
                    steps.push(PlanStep {
                        kind: StepKind::RightInv,
                        top: col1 - 1,
                        row: row1 - 1,
                        col: col1 - 1,
                        mzi: usize::MAX,
                    });
                }
            } else {
                for j in 1..=i {
                    let row1 = n + j - i;
                    let col1 = j;
                    steps.push(PlanStep {
                        kind: StepKind::Left,
                        top: row1 - 2,
                        row: row1 - 1,
                        col: col1 - 1,
                        mzi: usize::MAX,
                    });
                }
            }
        }

        // Circuit order: right-side factors in the order they were produced,
        // then the migrated left-side factors in reverse production order.
        let rights = steps.iter().enumerate().filter(|(_, s)| s.kind == StepKind::RightInv);
        let lefts = steps.iter().enumerate().filter(|(_, s)| s.kind == StepKind::Left);
        let circuit: Vec<usize> =
            rights.map(|(k, _)| k).chain(lefts.map(|(k, _)| k).rev()).collect();

        let mut next_free = vec![0usize; n];
        let mut assignment = vec![usize::MAX; circuit.len()];
        let mut used = vec![false; topo.mzi_count()];
        for (&k, slot) in circuit.iter().zip(assignment.iter_mut()) {
            let a = steps[k].top;
            let mut layer = next_free[a].max(next_free[a + 1]);
            if layer % 2 != a % 2 {
                layer += 1;
            }
            let mzi = topo
                .index_of(layer, a)
                .unwrap_or_else(|| panic!("no mesh slot at layer {layer}, top mode {a} (n={n})"));
            assert!(!used[mzi], "mesh slot {mzi} assigned twice (n={n})");
            used[mzi] = true;
            next_free[a] = layer + 1;
            next_free[a + 1] = layer + 1;
            *slot = mzi;
        }
        assert!(used.iter().all(|&u| u), "layer assignment left mesh slots unused (n={n})");
        for (&k, &mzi) in circuit.iter().zip(assignment.iter()) {
            steps[k].mzi = mzi;
        }
        Self { steps }
    }
}

/// Phases solving one nulling step, with a flag for targets the coupler could
/// not fully extinguish.
#[derive(Clone, Copy, Debug)]
pub(crate) struct NullResult {
    pub phi_i: f64,
    pub phi_e: f64,
    pub clamped: bool,
}

/// Entries at or below this magnitude on both arms are treated as already
/// null; the step gets a fixed marker setting instead of phases fit to noise.
const DEGENERATE_MAG: f64 = 1e-12;

/// Solves an MZI's phases so the combination of `target` and `partner`
/// amplitudes lands at zero.
///
/// The achievable cross-coupling of a coupler pair at angle `θ` caps the
/// target/partner magnitude ratio; `cos(φ_i/2) = cos(t)/sin(2θ)` with
/// `t = atan2(|partner|, |target|)` hits it exactly when possible. When the
/// required value exceeds 1 the internal phase clamps to the fully coupled
/// setting `φ_i = 0` and the external phase still anti-aligns the two arms,
/// which minimizes the surviving magnitude.
pub(crate) fn null_step(kind: StepKind, target: C64, partner: C64, theta: f64) -> NullResult {
    let tb = target.norm();
    let pb = partner.norm();
    if tb < DEGENERATE_MAG && pb < DEGENERATE_MAG {
        return NullResult { phi_i: 2.0 * PI, phi_e: 0.0, clamped: false };
    }
    let t = pb.atan2(tb);
    let s = t.cos() / (2.0 * theta).sin();
    let (phi_i, clamped) = if s > 1.0 {
        (0.0, true)
    } else if s < -1.0 {
        (2.0 * PI, true)
    } else {
        (2.0 * s.acos(), false)
    };

    let alpha = (partner * target.conj()).arg();
    let c2 = theta.cos().powi(2);
    let s2 = theta.sin().powi(2);
    let phi_e = match kind {
        StepKind::Left => {
            -alpha + FRAC_PI_2 - phi_i / 2.0
                + (-s2 * phi_i.sin()).atan2(c2 - s2 * phi_i.cos())
        }
        StepKind::RightInv => {
            -alpha - FRAC_PI_2 + phi_i / 2.0
                + (-c2 * phi_i.sin()).atan2(c2 * phi_i.cos() - s2)
        }
    };
    NullResult { phi_i, phi_e: wrap_two_pi(phi_e), clamped }
}

/// A compiled phase program together with how many nulling steps had to be
/// clamped because a coupler could not reach the required ratio.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub program: PhaseProgram,
    pub clamped_steps: usize,
}

/// Coupler angles of a defect-free mesh.
pub fn balanced_thetas(n: usize) -> Vec<f64> {
    vec![FRAC_PI_4; mzi_count(n)]
}

/// Compiles `u` assuming perfectly balanced couplers everywhere.
pub fn decompose_balanced(u: &UnitaryMatrix) -> Result<Decomposition> {
    decompose(u, &balanced_thetas(u.dim()))
}

/// Compiles `u` for a mesh whose MZI `i` (canonical order) has coupler angle
/// `thetas[i]`.
///
/// The returned program reproduces `u` exactly (up to numerical error) when
/// no step clamps; with clamps it is the per-step best approximation and
/// `clamped_steps` reports how many entries could not be fully nulled.
/// Internal phases land in `[0, 2π]` — the endpoint is a distinct marker for
/// steps whose target was already negligible — and external phases in
/// `[0, 2π)`.
pub fn decompose(u: &UnitaryMatrix, thetas: &[f64]) -> Result<Decomposition> {
    let n = u.dim();
    let need = mzi_count(n);
    if thetas.len() != need {
        return Err(Error::DimensionMismatch { expected: need, got: thetas.len() });
    }
    for (i, &t) in thetas.iter().enumerate() {
        if !(t > 0.0 && t < FRAC_PI_2) {
            return Err(Error::OutOfRange(format!(
                "coupler angle {t} of MZI {i} outside (0, π/2)"
            )));
        }
    }

    let plan = NullingPlan::for_size(n);
    let mut w = u.as_matrix().clone();
    let mut phases: Vec<(f64, f64)> = Vec::with_capacity(plan.steps.len());
    let mut clamped_steps = 0usize;
    for step in &plan.steps {
        let theta = thetas[step.mzi];
        let target = w.get(step.row, step.col);
        let partner = match step.kind {
            StepKind::Left => w.get(step.row - 1, step.col),
            StepKind::RightInv => w.get(step.row, step.col + 1),
        };
        let r = null_step(step.kind, target, partner, theta);
        if r.clamped {
            clamped_steps += 1;
        }
        let z = mzi_matrix(theta, r.phi_i, r.phi_e);
        match step.kind {
            StepKind::Left => w.apply_left_pair(step.top, &z),
            StepKind::RightInv => w.apply_right_pair(step.top, &adjoint2(&z)),
        }
        phases.push((r.phi_i, r.phi_e));
    }

    // What remains satisfies  u = L_1⁻¹ … L_k⁻¹ · D · R_l … R_1.  Each
    // inverted left factor is migrated through the diagonal, innermost first:
    //   Z⁻¹(φ_i, φ_e) · diag(d1, d2) = diag(−d2 e^{−iφ_e}, d2) · Z(φ'_i, φ'_e)
    // with φ'_i = 2π − φ_i and φ'_e = arg(−d1 · conj(d2)), independent of the
    // coupler angle. The factor stays on the same modes, so it keeps its mesh
    // slot, and the diagonal ends up on the output side as a phase screen.
    let mut d: Vec<C64> = (0..n).map(|k| w.get(k, k)).collect();
    for (k, step) in plan.steps.iter().enumerate().rev() {
        if step.kind != StepKind::Left {
            continue;
        }
        let (phi_i, phi_e) = phases[k];
        let a = step.top;
        let (d1, d2) = (d[a], d[a + 1]);
        phases[k] = (2.0 * PI - phi_i, wrap_two_pi((-d1 * d2.conj()).arg()));
        d[a] = -d2 * C64::from_polar(1.0, -phi_e);
        d[a + 1] = d2;
    }

    let mut settings: Vec<Option<MziSetting>> = vec![None; need];
    for (k, step) in plan.steps.iter().enumerate() {
        let (phi_i, phi_e) = phases[k];
        debug_assert!(settings[step.mzi].is_none());
        settings[step.mzi] = Some(MziSetting { mzi: step.mzi, phi_i, phi_e });
    }
    let settings = settings.into_iter().map(|s| s.expect("plan covers every MZI")).collect();
    let output_phases = d.iter().map(|z| wrap_two_pi(z.arg())).collect();
    let program = PhaseProgram { n, settings, output_phases };
    program.validate()?;
    Ok(Decomposition { program, clamped_steps })
}

/// The unitary a mesh with coupler angles `thetas` realizes when driven with
/// `program`: MZIs applied layer by layer, then the output phase screen.
pub fn reconstruct(program: &PhaseProgram, thetas: &[f64]) -> Result<UnitaryMatrix> {
    program.validate()?;
    let n = program.n;
    if thetas.len() != mzi_count(n) {
        return Err(Error::DimensionMismatch { expected: mzi_count(n), got: thetas.len() });
    }
    let topo = MeshTopology::new(n);
    let mut m = ComplexMatrix::identity(n);
    for (i, s) in program.settings.iter().enumerate() {
        let (_, top) = topo.position(i);
        let z = mzi_matrix(thetas[i], s.phi_i, s.phi_e);
        m.apply_left_pair(top, &z);
    }
    for (k, &phi) in program.output_phases.iter().enumerate() {
        m.scale_row(k, C64::from_polar(1.0, phi));
    }
    UnitaryMatrix::try_new(m)
}
