//! Mach-Zehnder interferometer building blocks, the rectangular mesh layout,
//! and the chip description with per-shifter electrical calibrations.
//!
//! Conventions used throughout the crate:
//!
//! * Modes, layers, and component indices are 0-based in memory. File formats
//!   and CLI output use 1-based labels; conversion happens only at the
//!   serialization boundary.
//! * A Mach-Zehnder interferometer (MZI) on adjacent modes `(a, a+1)` is the
//!   cascade `B(θ) · R(φ_i) · B(θ) · R(φ_e)`, where `B(θ)` is a directional
//!   coupler and `R(φ) = diag(e^{iφ}, 1)` a phase shifter on the top arm.
//!   `θ = π/4` gives perfectly balanced couplers.
//! * A coupler's user-facing splitting ratio is `r = cos²θ`, so `r = 0.5`
//!   is the balanced case.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_4, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{C64, ComplexMatrix};

/// Directional coupler `B(θ) = [[cosθ, i sinθ], [i sinθ, cosθ]]`, row-major.
pub fn beam_splitter(theta: f64) -> [C64; 4] {
    let c = C64::new(theta.cos(), 0.0);
    let is = C64::new(0.0, theta.sin());
    [c, is, is, c]
}

/// Phase shifter `R(φ) = diag(e^{iφ}, 1)`, row-major.
pub fn phase_shifter(phi: f64) -> [C64; 4] {
    [C64::from_polar(1.0, phi), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)]
}

/// 2x2 transfer matrix of an MZI with coupler angle `θ` and phases
/// `(φ_i, φ_e)`: the closed form of `B(θ) R(φ_i) B(θ) R(φ_e)`.
///
/// Row-major `[z00, z01, z10, z11]` with
///
/// ```text
/// z00 = e^{iφ_e} (e^{iφ_i} cos²θ − sin²θ)
/// z01 = i e^{iφ_i/2} sin2θ cos(φ_i/2)
/// z10 = i e^{i(φ_e + φ_i/2)} sin2θ cos(φ_i/2)
/// z11 = cos²θ − e^{iφ_i} sin²θ
/// ```
pub fn mzi_matrix(theta: f64, phi_i: f64, phi_e: f64) -> [C64; 4] {
    let c2 = theta.cos().powi(2);
    let s2 = theta.sin().powi(2);
    let eii = C64::from_polar(1.0, phi_i);
    let eie = C64::from_polar(1.0, phi_e);
    let k = C64::new(0.0, (2.0 * theta).sin() * (phi_i / 2.0).cos());
    let half = C64::from_polar(1.0, phi_i / 2.0);
    let z00 = eie * (eii * c2 - s2);
    let z01 = k * half;
    let z10 = eie * k * half;
    let z11 = C64::new(c2, 0.0) - eii * s2;
    [z00, z01, z10, z11]
}

/// Fraction of power an MZI keeps on the input mode (the "bar" transmission):
/// `1 − sin²(2θ) cos²(φ_i/2)`, ranging over `[cos²2θ, 1]`.
pub fn mzi_reflectivity(theta: f64, phi_i: f64) -> f64 {
    1.0 - ((2.0 * theta).sin() * (phi_i / 2.0).cos()).powi(2)
}

/// Embeds a 2x2 block acting on modes `(a, a+1)` into an `n x n` identity.
pub fn embed_two_mode(n: usize, a: usize, z: &[C64; 4]) -> ComplexMatrix {
    assert!(a + 1 < n, "two-mode block at ({a}, {}) does not fit {n} modes", a + 1);
    let mut m = ComplexMatrix::identity(n);
    m.set(a, a, z[0]);
    m.set(a, a + 1, z[1]);
    m.set(a + 1, a, z[2]);
    m.set(a + 1, a + 1, z[3]);
    m
}

/// The rectangular mesh layout for `n` modes: layer `ℓ` couples modes
/// `(0,1), (2,3), …` when `ℓ` is even and `(1,2), (3,4), …` when odd.
///
/// MZIs are numbered in canonical order: layer-major, ascending top mode
/// within a layer. `n` modes need `n` layers and carry `n(n−1)/2` MZIs.
#[derive(Clone, Debug)]
pub struct MeshTopology {
    n: usize,
    positions: Vec<(usize, usize)>,
    index: HashMap<(usize, usize), usize>,
}

impl MeshTopology {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "mesh needs at least one mode");
        let mut positions = Vec::with_capacity(n * (n - 1) / 2);
        for layer in 0..n {
            let start = layer % 2;
            let mut top = start;
            while top + 1 < n {
                positions.push((layer, top));
                top += 2;
            }
        }
        debug_assert_eq!(positions.len(), n * (n - 1) / 2);
        let index = positions.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        Self { n, positions, index }
    }

    pub fn n_modes(&self) -> usize {
        self.n
    }

    pub fn n_layers(&self) -> usize {
        self.n
    }

    pub fn mzi_count(&self) -> usize {
        self.positions.len()
    }

    /// `(layer, top_mode)` of the MZI with canonical index `i`.
    pub fn position(&self, i: usize) -> (usize, usize) {
        self.positions[i]
    }

    pub fn positions(&self) -> &[(usize, usize)] {
        &self.positions
    }

    /// Canonical index of the MZI at `(layer, top_mode)`, if one exists there.
    pub fn index_of(&self, layer: usize, top_mode: usize) -> Option<usize> {
        self.index.get(&(layer, top_mode)).copied()
    }
}

/// Number of MZIs in the rectangular mesh on `n` modes.
pub fn mzi_count(n: usize) -> usize {
    n * (n - 1) / 2
}

/// Electrical calibration of one thermo-optic shifter: the phase produced by
/// drive voltage `v` is `φ = α + β v²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShifterCal {
    pub alpha: f64,
    pub beta: f64,
}

impl ShifterCal {
    pub const IDEAL: ShifterCal = ShifterCal { alpha: 0.0, beta: 1.0 };
}

/// One physical MZI: its place in the mesh, its (common) coupler splitting
/// ratio, and the calibrations of its two shifters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MziSpec {
    pub layer: usize,
    pub top_mode: usize,
    /// Splitting ratio `r = cos²θ` of both couplers; `0.5` is balanced.
    pub reflectivity: f64,
    pub internal: ShifterCal,
    pub external: ShifterCal,
}

impl MziSpec {
    /// Coupler angle `θ = acos(√r)`.
    pub fn theta(&self) -> f64 {
        self.reflectivity.sqrt().acos()
    }
}

/// A full chip: mesh size, every MZI with its imperfections, and the row of
/// output phase shifters.
#[derive(Clone, Debug, PartialEq)]
pub struct ChipSpec {
    pub n: usize,
    /// In canonical mesh order (layer-major, ascending top mode).
    pub mzis: Vec<MziSpec>,
    pub output_shifters: Vec<ShifterCal>,
}

impl ChipSpec {
    /// A defect-free chip: balanced couplers, `α = 0`, `β = 1` everywhere.
    pub fn ideal(n: usize) -> Self {
        Self::uniform(n, 0.5)
    }

    /// Ideal calibrations but every coupler at splitting ratio `r`.
    pub fn uniform(n: usize, r: f64) -> Self {
        let topo = MeshTopology::new(n);
        let mzis = topo
            .positions()
            .iter()
            .map(|&(layer, top_mode)| MziSpec {
                layer,
                top_mode,
                reflectivity: r,
                internal: ShifterCal::IDEAL,
                external: ShifterCal::IDEAL,
            })
            .collect();
        Self { n, mzis, output_shifters: vec![ShifterCal::IDEAL; n] }
    }

    /// Per-MZI coupler angles in canonical order, as consumed by the compiler.
    pub fn thetas(&self) -> Vec<f64> {
        self.mzis.iter().map(MziSpec::theta).collect()
    }

    /// A copy with identical layout and calibrations but all couplers balanced.
    pub fn with_balanced_couplers(&self) -> Self {
        let mut c = self.clone();
        for m in &mut c.mzis {
            m.reflectivity = 0.5;
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::OutOfRange("chip must have at least one mode".into()));
        }
        let topo = MeshTopology::new(self.n);
        if self.mzis.len() != topo.mzi_count() {
            return Err(Error::ShapeMismatch(format!(
                "chip with {} modes needs {} MZIs, found {}",
                self.n,
                topo.mzi_count(),
                self.mzis.len()
            )));
        }
        for (i, m) in self.mzis.iter().enumerate() {
            let expected = topo.position(i);
            if (m.layer, m.top_mode) != expected {
                return Err(Error::ShapeMismatch(format!(
                    "MZI {i} sits at (layer {}, top mode {}) but canonical order puts \
                     (layer {}, top mode {}) there",
                    m.layer, m.top_mode, expected.0, expected.1
                )));
            }
            if !(m.reflectivity > 0.0 && m.reflectivity < 1.0) {
                return Err(Error::OutOfRange(format!(
                    "MZI {i} splitting ratio {} outside (0, 1)",
                    m.reflectivity
                )));
            }
            for (name, cal) in [("internal", m.internal), ("external", m.external)] {
                if !cal.alpha.is_finite() || !cal.beta.is_finite() || cal.beta <= 0.0 {
                    return Err(Error::OutOfRange(format!(
                        "MZI {i} {name} shifter has invalid calibration (α={}, β={})",
                        cal.alpha, cal.beta
                    )));
                }
            }
        }
        if self.output_shifters.len() != self.n {
            return Err(Error::ShapeMismatch(format!(
                "chip with {} modes needs {} output shifters, found {}",
                self.n,
                self.n,
                self.output_shifters.len()
            )));
        }
        Ok(())
    }

    pub fn to_json_string(&self) -> Result<String> {
        self.validate()?;
        let file = ChipFile {
            n: self.n,
            mzis: self
                .mzis
                .iter()
                .map(|m| MziFile {
                    layer: m.layer + 1,
                    top_mode: m.top_mode + 1,
                    reflectivity: m.reflectivity,
                    internal: m.internal,
                    external: m.external,
                })
                .collect(),
            output_shifters: self.output_shifters.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: ChipFile = serde_json::from_str(s)?;
        let mut mzis = Vec::with_capacity(file.mzis.len());
        for (i, m) in file.mzis.iter().enumerate() {
            if m.layer == 0 || m.top_mode == 0 {
                return Err(Error::OutOfRange(format!(
                    "MZI {i}: layers and modes are 1-based in chip files; found 0"
                )));
            }
            mzis.push(MziSpec {
                layer: m.layer - 1,
                top_mode: m.top_mode - 1,
                reflectivity: m.reflectivity,
                internal: m.internal,
                external: m.external,
            });
        }
        let chip = ChipSpec { n: file.n, mzis, output_shifters: file.output_shifters };
        chip.validate()?;
        Ok(chip)
    }
}

#[derive(Serialize, Deserialize)]
struct ChipFile {
    n: usize,
    mzis: Vec<MziFile>,
    output_shifters: Vec<ShifterCal>,
}

#[derive(Serialize, Deserialize)]
struct MziFile {
    layer: usize,
    top_mode: usize,
    reflectivity: f64,
    internal: ShifterCal,
    external: ShifterCal,
}

/// Fabrication statistics used to draw random chips.
#[derive(Clone, Copy, Debug)]
pub struct ChipParams {
    pub n: usize,
    /// Mean coupler splitting ratio.
    pub r_mean: f64,
    /// Standard deviation of the splitting ratio; samples are redrawn until
    /// they land strictly inside (0, 1).
    pub r_std: f64,
    /// Phase offsets α are drawn uniformly from `[0, alpha_max)`.
    pub alpha_max: f64,
    /// Voltage-to-phase coefficients β are drawn log-uniformly from this range.
    pub beta_range: (f64, f64),
    pub seed: u64,
}

impl ChipParams {
    pub fn new(n: usize) -> Self {
        Self { n, r_mean: 0.5, r_std: 0.0, alpha_max: 2.0 * PI, beta_range: (0.5, 2.0), seed: 0 }
    }
}

/// Draws a chip from the given fabrication statistics, deterministically in
/// the seed.
pub fn sample_chip(params: &ChipParams) -> Result<ChipSpec> {
    if params.n == 0 {
        return Err(Error::OutOfRange("chip must have at least one mode".into()));
    }
    if !(params.r_mean > 0.0 && params.r_mean < 1.0) || params.r_std < 0.0 {
        return Err(Error::OutOfRange(format!(
            "splitting-ratio statistics (mean {}, std {}) invalid",
            params.r_mean, params.r_std
        )));
    }
    let (b_lo, b_hi) = params.beta_range;
    if !(b_lo > 0.0 && b_hi >= b_lo) {
        return Err(Error::OutOfRange(format!("β range ({b_lo}, {b_hi}) invalid")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let draw_r = {
        let normal = if params.r_std > 0.0 {
            Some(Normal::new(params.r_mean, params.r_std).expect("validated above"))
        } else {
            None
        };
        let mean = params.r_mean;
        move |rng: &mut ChaCha8Rng| -> f64 {
            match normal {
                None => mean,
                Some(dist) => loop {
                    let r = dist.sample(rng);
                    if r > 0.0 && r < 1.0 {
                        return r;
                    }
                },
            }
        }
    };
    let draw_cal = |rng: &mut ChaCha8Rng| -> ShifterCal {
        let alpha = if params.alpha_max > 0.0 { rng.gen_range(0.0..params.alpha_max) } else { 0.0 };
        let beta = if b_hi > b_lo {
            (rng.gen_range(b_lo.ln()..b_hi.ln())).exp()
        } else {
            b_lo
        };
        ShifterCal { alpha, beta }
    };

    let topo = MeshTopology::new(params.n);
    let mzis = topo
        .positions()
        .iter()
        .map(|&(layer, top_mode)| {
            let reflectivity = draw_r(&mut rng);
            let internal = draw_cal(&mut rng);
            let external = draw_cal(&mut rng);
            MziSpec { layer, top_mode, reflectivity, internal, external }
        })
        .collect();
    let output_shifters = (0..params.n).map(|_| draw_cal(&mut rng)).collect();
    let chip = ChipSpec { n: params.n, mzis, output_shifters };
    chip.validate()?;
    Ok(chip)
}

/// Phases for one MZI, addressed by canonical index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MziSetting {
    pub mzi: usize,
    /// Internal phase, reported in `[0, 2π]` (the endpoint marks a clamped
    /// fully-bar setting distinct from 0).
    pub phi_i: f64,
    /// External phase, reported in `[0, 2π)`.
    pub phi_e: f64,
}

/// A complete drive program: one `(φ_i, φ_e)` pair per MZI plus the output
/// phase screen. Settings are kept sorted so `settings[i].mzi == i`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseProgram {
    pub n: usize,
    pub settings: Vec<MziSetting>,
    pub output_phases: Vec<f64>,
}

impl PhaseProgram {
    /// All phases zero: every MZI sits at its `φ_i = 0` cross-like state.
    pub fn zeros(n: usize) -> Self {
        let settings =
            (0..mzi_count(n)).map(|i| MziSetting { mzi: i, phi_i: 0.0, phi_e: 0.0 }).collect();
        Self { n, settings, output_phases: vec![0.0; n] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.settings.len() != mzi_count(self.n) {
            return Err(Error::ShapeMismatch(format!(
                "program for {} modes needs {} MZI settings, found {}",
                self.n,
                mzi_count(self.n),
                self.settings.len()
            )));
        }
        for (i, s) in self.settings.iter().enumerate() {
            if s.mzi != i {
                return Err(Error::ShapeMismatch(format!(
                    "settings must be sorted by MZI index; position {i} holds MZI {}",
                    s.mzi
                )));
            }
            if !s.phi_i.is_finite() || !s.phi_e.is_finite() {
                return Err(Error::OutOfRange(format!("MZI {i} has a non-finite phase")));
            }
        }
        if self.output_phases.len() != self.n {
            return Err(Error::ShapeMismatch(format!(
                "program for {} modes needs {} output phases, found {}",
                self.n,
                self.n,
                self.output_phases.len()
            )));
        }
        if self.output_phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::OutOfRange("non-finite output phase".into()));
        }
        Ok(())
    }

    pub fn to_json_string(&self) -> Result<String> {
        self.validate()?;
        let file = ProgramFile {
            n: self.n,
            settings: self
                .settings
                .iter()
                .map(|s| SettingFile { mzi: s.mzi + 1, phi_i: s.phi_i, phi_e: s.phi_e })
                .collect(),
            output_phases: self.output_phases.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: ProgramFile = serde_json::from_str(s)?;
        let mut settings = Vec::with_capacity(file.settings.len());
        for raw in &file.settings {
            if raw.mzi == 0 {
                return Err(Error::OutOfRange(
                    "MZI indices are 1-based in program files; found 0".into(),
                ));
            }
            settings.push(MziSetting { mzi: raw.mzi - 1, phi_i: raw.phi_i, phi_e: raw.phi_e });
        }
        settings.sort_by_key(|s| s.mzi);
        let program = PhaseProgram { n: file.n, settings, output_phases: file.output_phases };
        program.validate()?;
        Ok(program)
    }
}

#[derive(Serialize, Deserialize)]
struct ProgramFile {
    n: usize,
    settings: Vec<SettingFile>,
    output_phases: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SettingFile {
    mzi: usize,
    phi_i: f64,
    phi_e: f64,
}

/// Balanced-coupler angle: `θ` for `r = 0.5`.
pub const BALANCED_THETA: f64 = FRAC_PI_4;
