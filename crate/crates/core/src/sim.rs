//! Chip execution model: the unitary a physical mesh realizes for a given
//! phase program, and the classical intensity measurements calibration works
//! from.
//!
//! Light is treated classically and losslessly: unit intensity enters one
//! port and `|U_r[j, port]|²` exits port `j`. A noiseless chip is the
//! ground-truth oracle; [`NoisyChip`] adds Gaussian read-out noise to stress
//! calibration.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::compiler::reconstruct;
use crate::error::{Error, Result};
use crate::linalg::UnitaryMatrix;
use crate::mesh::{ChipSpec, PhaseProgram};

/// The unitary the chip actually implements when driven with `program`: the
/// programmed phases pass through the chip's true coupler angles.
pub fn execute(program: &PhaseProgram, chip: &ChipSpec) -> Result<UnitaryMatrix> {
    chip.validate()?;
    if program.n != chip.n {
        return Err(Error::ShapeMismatch(format!(
            "program drives {} modes but the chip has {}",
            program.n, chip.n
        )));
    }
    reconstruct(program, &chip.thetas())
}

/// Same as [`execute`] but every programmed phase is perturbed by Gaussian
/// noise of standard deviation `sigma` first — a stress knob for drive
/// electronics error, off by default everywhere.
pub fn execute_with_phase_noise(
    program: &PhaseProgram,
    chip: &ChipSpec,
    sigma: f64,
    seed: u64,
) -> Result<UnitaryMatrix> {
    if sigma < 0.0 {
        return Err(Error::OutOfRange(format!("phase noise σ = {sigma} must be ≥ 0")));
    }
    if sigma == 0.0 {
        return execute(program, chip);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    let mut noisy = program.clone();
    for s in &mut noisy.settings {
        s.phi_i += normal.sample(&mut rng);
        s.phi_e += normal.sample(&mut rng);
    }
    for p in &mut noisy.output_phases {
        *p += normal.sample(&mut rng);
    }
    execute(&noisy, chip)
}

/// Output intensities for unit light into `input_port`: `|U_r[j, port]|²`
/// for every output `j`. Lossless, so the entries sum to 1.
pub fn intensity_response(
    program: &PhaseProgram,
    chip: &ChipSpec,
    input_port: usize,
) -> Result<Vec<f64>> {
    if input_port >= chip.n {
        return Err(Error::OutOfRange(format!(
            "input port {input_port} out of range for {} modes",
            chip.n
        )));
    }
    let u = execute(program, chip)?;
    Ok((0..chip.n).map(|j| u.get(j, input_port).norm_sqr()).collect())
}

/// A chip that can be driven and measured — the black-box interface
/// calibration routines see. Implementations may be stateful (noise RNGs).
pub trait Chip {
    fn n_modes(&self) -> usize;

    /// Drives the chip with `program`, injects unit light at `input_port`,
    /// and returns the measured output intensities.
    fn measure(&mut self, program: &PhaseProgram, input_port: usize) -> Result<Vec<f64>>;
}

impl Chip for ChipSpec {
    fn n_modes(&self) -> usize {
        self.n
    }

    fn measure(&mut self, program: &PhaseProgram, input_port: usize) -> Result<Vec<f64>> {
        intensity_response(program, self, input_port)
    }
}

/// A [`ChipSpec`] whose intensity read-out carries additive Gaussian noise,
/// clamped to stay nonnegative. Deterministic in its seed across the sequence
/// of measurements performed on it.
pub struct NoisyChip {
    pub spec: ChipSpec,
    sigma: f64,
    rng: ChaCha8Rng,
}

impl NoisyChip {
    pub fn new(spec: ChipSpec, sigma: f64, seed: u64) -> Result<Self> {
        if sigma < 0.0 {
            return Err(Error::OutOfRange(format!("intensity noise σ = {sigma} must be ≥ 0")));
        }
        spec.validate()?;
        Ok(Self { spec, sigma, rng: ChaCha8Rng::seed_from_u64(seed) })
    }
}

impl Chip for NoisyChip {
    fn n_modes(&self) -> usize {
        self.spec.n
    }

    fn measure(&mut self, program: &PhaseProgram, input_port: usize) -> Result<Vec<f64>> {
        let mut v = intensity_response(program, &self.spec, input_port)?;
        if self.sigma > 0.0 {
            let normal = Normal::new(0.0, self.sigma).expect("sigma validated");
            for x in &mut v {
                *x = (*x + normal.sample(&mut self.rng)).max(0.0);
            }
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::{decompose, decompose_balanced};
    use crate::linalg::{haar_random_unitary, ComplexMatrix};
    use crate::mesh::{sample_chip, ChipParams, MeshTopology};
    use std::f64::consts::PI;

    #[test]
    fn identity_program_routes_light_straight_through() {
        let chip = ChipSpec::ideal(4);
        let id = UnitaryMatrix::try_new(ComplexMatrix::identity(4)).unwrap();
        let program = decompose_balanced(&id).unwrap().program;
        for port in 0..4 {
            let v = intensity_response(&program, &chip, port).unwrap();
            for (j, x) in v.iter().enumerate() {
                let want = if j == port { 1.0 } else { 0.0 };
                assert!((x - want).abs() < 1e-12, "port {port} -> {j}: {x}");
            }
        }
    }

    #[test]
    fn intensities_sum_to_one_on_defective_chips() {
        let mut params = ChipParams::new(5);
        params.r_mean = 0.44;
        params.r_std = 0.03;
        params.seed = 7;
        let chip = sample_chip(&params).unwrap();
        let u = haar_random_unitary(5, 3).unwrap();
        let program = decompose_balanced(&u).unwrap().program;
        for port in 0..5 {
            let v = intensity_response(&program, &chip, port).unwrap();
            let sum: f64 = v.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "port {port}: intensity sum {sum}");
            assert!(v.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn all_bar_program_is_a_perfect_phase_diagonal_on_any_chip() {
        let mut params = ChipParams::new(6);
        params.r_mean = 0.4;
        params.r_std = 0.05;
        params.seed = 21;
        let chip = sample_chip(&params).unwrap();
        let mut program = PhaseProgram::zeros(6);
        for s in &mut program.settings {
            s.phi_i = PI;
        }
        let u = execute(&program, &chip).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let mag = u.get(i, j).norm();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((mag - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn crossed_mzi_splits_at_the_coupler_ratio() {
        // one MZI at φᵢ=0, everything else transparent: its two outputs carry
        // cos²2θ and sin²2θ of the light injected at its top port
        let n = 4;
        let chip = ChipSpec::uniform(n, 0.47);
        let theta = chip.mzis[0].theta();
        let topo = MeshTopology::new(n);
        for target in 0..topo.mzi_count() {
            let (_, top) = topo.position(target);
            let mut program = PhaseProgram::zeros(n);
            for s in &mut program.settings {
                s.phi_i = PI;
            }
            program.settings[target].phi_i = 0.0;
            let v = intensity_response(&program, &chip, top).unwrap();
            let bar = (2.0 * theta).cos().powi(2);
            let cross = (2.0 * theta).sin().powi(2);
            assert!((v[top] - bar).abs() < 1e-12);
            assert!((v[top + 1] - cross).abs() < 1e-12);
            let ratio = v[top] / v[top + 1];
            let cot2 = ((2.0 * theta).cos() / (2.0 * theta).sin()).powi(2);
            assert!((ratio - cot2).abs() < 1e-9);
        }
    }

    #[test]
    fn tailored_execution_reproduces_the_target() {
        let chip = ChipSpec::uniform(5, 0.52);
        let u = haar_random_unitary(5, 11).unwrap();
        let dec = decompose(&u, &chip.thetas()).unwrap();
        assert_eq!(dec.clamped_steps, 0);
        let realized = execute(&dec.program, &chip).unwrap();
        assert!(realized.as_matrix().max_abs_diff(u.as_matrix()) < 1e-11);
    }

    #[test]
    fn noisy_chip_is_seed_deterministic_and_nonnegative() {
        let chip = ChipSpec::uniform(4, 0.47);
        let u = haar_random_unitary(4, 5).unwrap();
        let program = decompose_balanced(&u).unwrap().program;
        let mut a = NoisyChip::new(chip.clone(), 1e-2, 42).unwrap();
        let mut b = NoisyChip::new(chip.clone(), 1e-2, 42).unwrap();
        let va = a.measure(&program, 1).unwrap();
        let vb = b.measure(&program, 1).unwrap();
        assert_eq!(va, vb);
        assert!(va.iter().all(|&x| x >= 0.0));
        // and it differs from the clean measurement
        let clean = intensity_response(&program, &chip, 1).unwrap();
        let dev: f64 = va.iter().zip(&clean).map(|(x, y)| (x - y).abs()).sum();
        assert!(dev > 1e-4);
    }

    #[test]
    fn phase_noise_scales_down_to_the_exact_result() {
        let chip = ChipSpec::uniform(4, 0.5);
        let u = haar_random_unitary(4, 9).unwrap();
        let program = decompose_balanced(&u).unwrap().program;
        let exact = execute(&program, &chip).unwrap();
        let none = execute_with_phase_noise(&program, &chip, 0.0, 1).unwrap();
        assert_eq!(exact.as_matrix().max_abs_diff(none.as_matrix()), 0.0);
        let small = execute_with_phase_noise(&program, &chip, 1e-6, 1).unwrap();
        let big = execute_with_phase_noise(&program, &chip, 1e-2, 1).unwrap();
        let d_small = exact.as_matrix().max_abs_diff(small.as_matrix());
        let d_big = exact.as_matrix().max_abs_diff(big.as_matrix());
        assert!(d_small < 1e-4);
        assert!(d_big > d_small);
    }
}
