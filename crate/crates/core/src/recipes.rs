//! Reproducible experiment recipes: each function runs one of the library's
//! headline studies end to end (deterministically in a seed) and returns a
//! report that can be asserted against or written out as CSV.

use rayon::prelude::*;

use crate::calib::{calibrate_global, probe_misfit, probe_program, measure_all_ports, CalibOptions, CalibrationResult, ProbePoint};
use crate::compiler::{decompose, decompose_balanced, reconstruct};
use crate::error::{Error, Result};
use crate::linalg::{fidelity_distance, haar_random_unitary};
use crate::mesh::{sample_chip, ChipParams, ChipSpec};
use crate::ports::{unrestricted_search, sweep_search, Objective, DEFAULT_UNRESTRICTED_CAP};
use crate::power::program_power;

/// Mixes a per-sample index into a base seed; cheap splitmix-style spread so
/// neighbouring experiments don't share Haar draws.
fn sample_seed(base: u64, index: usize) -> u64 {
    let mut z = base ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in values {
        sum += v;
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values.iter().copied());
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64;
    var.sqrt()
}

/// A chip drawn from the default fabrication statistics: balanced couplers,
/// phase offsets anywhere in [0, 2π), drive coefficients spread (0.5, 2.0).
pub fn experiment_chip(n: usize, seed: u64) -> Result<ChipSpec> {
    let mut params = ChipParams::new(n);
    params.seed = seed;
    sample_chip(&params)
}

/// A chip whose drive coefficients are drawn from (1.0, 1.5), which places
/// the mean total power of compiled Haar programs near the canonical
/// 165-unit target for 8 modes.
pub fn target_power_chip(n: usize, seed: u64) -> Result<ChipSpec> {
    let mut params = ChipParams::new(n);
    params.beta_range = (1.0, 1.5);
    params.seed = seed;
    sample_chip(&params)
}

/// A defect-only chip: couplers drawn normal around `r_mean`, ideal phase
/// shifters (the distance experiments care only about coupler angles).
pub fn defective_chip(n: usize, r_mean: f64, r_std: f64, seed: u64) -> Result<ChipSpec> {
    let mut params = ChipParams::new(n);
    params.r_mean = r_mean;
    params.r_std = r_std;
    params.alpha_max = 0.0;
    params.beta_range = (1.0, 1.0 + f64::EPSILON);
    params.seed = seed;
    sample_chip(&params)
}

// ---------------------------------------------------------------------------
// power reduction by allocation search
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct PowerReductionRow {
    pub sample: usize,
    pub naive: f64,
    pub unrestricted: f64,
    pub sweep: f64,
}

/// Mean drive power with and without allocation search on one random chip.
#[derive(Clone, Debug)]
pub struct PowerReductionReport {
    pub rows: Vec<PowerReductionRow>,
    pub mean_naive: f64,
    pub mean_unrestricted: f64,
    pub mean_sweep: f64,
    /// Fractional mean-power reduction achieved by the exact search.
    pub unrestricted_reduction: f64,
    /// Fractional mean-power reduction achieved by sweep search (k = 2).
    pub sweep_reduction: f64,
}

impl PowerReductionReport {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("sample,naive_power,unrestricted_power,sweep_power\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.sample, r.naive, r.unrestricted, r.sweep));
        }
        out
    }
}

/// Compares default-allocation drive power against the exact permutation
/// search and sweep search (k = 2) over Haar-random targets.
pub fn power_reduction_experiment(
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<PowerReductionReport> {
    let chip = experiment_chip(n, seed)?;
    let objective = Objective::MinPower { chip: &chip };

    let rows: Vec<PowerReductionRow> = (0..samples)
        .into_par_iter()
        .map(|i| -> Result<PowerReductionRow> {
            let u = haar_random_unitary(n, sample_seed(seed, i))?;
            let naive = objective.evaluate(&u)?;
            let full = unrestricted_search(&u, |c| objective.evaluate(c), DEFAULT_UNRESTRICTED_CAP)?;
            let swept = sweep_search(&u, |c| objective.evaluate(c), 2, None)?;
            Ok(PowerReductionRow {
                sample: i,
                naive,
                unrestricted: full.allocation.objective_value,
                sweep: swept.allocation.objective_value,
            })
        })
        .collect::<Result<_>>()?;

    let mean_naive = mean(rows.iter().map(|r| r.naive));
    let mean_unrestricted = mean(rows.iter().map(|r| r.unrestricted));
    let mean_sweep = mean(rows.iter().map(|r| r.sweep));
    Ok(PowerReductionReport {
        rows,
        mean_naive,
        mean_unrestricted,
        mean_sweep,
        unrestricted_reduction: 1.0 - mean_unrestricted / mean_naive,
        sweep_reduction: 1.0 - mean_sweep / mean_naive,
    })
}

// ---------------------------------------------------------------------------
// hitting a target power
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct TargetPowerRow {
    pub sample: usize,
    pub naive_power: f64,
    pub achieved_power: f64,
}

/// Spread of program powers before and after steering them toward a target.
#[derive(Clone, Debug)]
pub struct TargetPowerReport {
    pub rows: Vec<TargetPowerRow>,
    pub target: f64,
    pub naive_mean: f64,
    pub achieved_mean: f64,
    pub naive_std: f64,
    pub achieved_std: f64,
    /// naive_std / achieved_std — how much tighter the power spread gets.
    pub std_ratio: f64,
}

impl TargetPowerReport {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("sample,naive_power,achieved_power\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.sample, r.naive_power, r.achieved_power));
        }
        out
    }
}

/// Uses sweep search to steer every program's total power toward `target`
/// and reports how much the power spread narrows.
pub fn target_power_experiment(
    n: usize,
    samples: usize,
    target: f64,
    k: usize,
    seed: u64,
) -> Result<TargetPowerReport> {
    let chip = target_power_chip(n, seed)?;
    let objective = Objective::TargetPower { chip: &chip, target };

    let rows: Vec<TargetPowerRow> = (0..samples)
        .into_par_iter()
        .map(|i| -> Result<TargetPowerRow> {
            let u = haar_random_unitary(n, sample_seed(seed ^ 0xA5A5, i))?;
            let naive_power =
                program_power(&decompose_balanced(&u)?.program, &chip)?.total;
            let best = sweep_search(&u, |c| objective.evaluate(c), k, None)?;
            let achieved = decompose_balanced(&best.allocation.permuted_unitary)?;
            let achieved_power = program_power(&achieved.program, &chip)?.total;
            Ok(TargetPowerRow { sample: i, naive_power, achieved_power })
        })
        .collect::<Result<_>>()?;

    let naive: Vec<f64> = rows.iter().map(|r| r.naive_power).collect();
    let achieved: Vec<f64> = rows.iter().map(|r| r.achieved_power).collect();
    let naive_std = std_dev(&naive);
    let achieved_std = std_dev(&achieved);
    Ok(TargetPowerReport {
        rows,
        target,
        naive_mean: mean(naive.iter().copied()),
        achieved_mean: mean(achieved.iter().copied()),
        naive_std,
        achieved_std,
        std_ratio: if achieved_std > 0.0 { naive_std / achieved_std } else { f64::INFINITY },
    })
}

// ---------------------------------------------------------------------------
// compilation distance vs coupler defect / mesh size
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct DistanceByDefectRow {
    pub reflectivity: f64,
    pub mean_naive: f64,
    pub mean_tailored: f64,
    /// mean_naive / mean_tailored; infinite when tailoring is exact.
    pub ratio: f64,
}

/// Naive-vs-tailored compilation distance on uniform-defect chips, one row
/// per reflectivity.
pub fn distance_by_defect_experiment(
    n: usize,
    samples: usize,
    reflectivities: &[f64],
    seed: u64,
) -> Result<Vec<DistanceByDefectRow>> {
    reflectivities
        .iter()
        .map(|&r| {
            let chip = ChipSpec::uniform(n, r);
            let thetas = chip.thetas();
            let pairs: Vec<(f64, f64)> = (0..samples)
                .into_par_iter()
                .map(|i| -> Result<(f64, f64)> {
                    let u = haar_random_unitary(n, sample_seed(seed ^ 0x3C3C, i))?;
                    let naive_prog = decompose_balanced(&u)?.program;
                    let naive =
                        fidelity_distance(&u, &reconstruct(&naive_prog, &thetas)?)?;
                    let tailored_prog = decompose(&u, &thetas)?.program;
                    let tailored =
                        fidelity_distance(&u, &reconstruct(&tailored_prog, &thetas)?)?;
                    Ok((naive, tailored))
                })
                .collect::<Result<_>>()?;
            let mean_naive = mean(pairs.iter().map(|p| p.0));
            let mean_tailored = mean(pairs.iter().map(|p| p.1));
            Ok(DistanceByDefectRow {
                reflectivity: r,
                mean_naive,
                mean_tailored,
                ratio: if mean_tailored > 0.0 { mean_naive / mean_tailored } else { f64::INFINITY },
            })
        })
        .collect()
}

pub fn distance_by_defect_csv(rows: &[DistanceByDefectRow]) -> String {
    let mut out = String::from("reflectivity,mean_naive_distance,mean_tailored_distance,ratio\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.reflectivity, r.mean_naive, r.mean_tailored, r.ratio
        ));
    }
    out
}

#[derive(Clone, Copy, Debug)]
pub struct DistanceBySizeRow {
    pub n: usize,
    pub mean_naive: f64,
}

/// Mean naive compilation distance as the mesh grows, at a fixed uniform
/// coupler defect.
pub fn distance_by_size_experiment(
    sizes: &[usize],
    samples: usize,
    reflectivity: f64,
    seed: u64,
) -> Result<Vec<DistanceBySizeRow>> {
    sizes
        .iter()
        .map(|&n| {
            let chip = ChipSpec::uniform(n, reflectivity);
            let thetas = chip.thetas();
            let naive: Vec<f64> = (0..samples)
                .into_par_iter()
                .map(|i| -> Result<f64> {
                    let u = haar_random_unitary(n, sample_seed(seed ^ 0x77AA, i))?;
                    let prog = decompose_balanced(&u)?.program;
                    fidelity_distance(&u, &reconstruct(&prog, &thetas)?)
                })
                .collect::<Result<_>>()?;
            Ok(DistanceBySizeRow { n, mean_naive: mean(naive.iter().copied()) })
        })
        .collect()
}

pub fn distance_by_size_csv(rows: &[DistanceBySizeRow]) -> String {
    let mut out = String::from("n,mean_naive_distance\n");
    for r in rows {
        out.push_str(&format!("{},{}\n", r.n, r.mean_naive));
    }
    out
}

// ---------------------------------------------------------------------------
// full mitigation pipeline: calibrate, tailor, allocate
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct PipelineRow {
    pub sample: usize,
    pub naive: f64,
    pub mitigated: f64,
}

/// Outcome of the calibrate → tailor → allocate pipeline on one chip.
#[derive(Clone, Debug)]
pub struct PipelineReport {
    pub rows: Vec<PipelineRow>,
    /// Reflectivity recovered by the global fit.
    pub calibrated_r: f64,
    pub calibration_evaluations: usize,
    pub mean_naive: f64,
    pub mean_mitigated: f64,
    /// mean_naive / mean_mitigated.
    pub improvement: f64,
}

impl PipelineReport {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("sample,naive_distance,mitigated_distance\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.sample, r.naive, r.mitigated));
        }
        out
    }
}

/// Runs the full mitigation pipeline against `chip` (treated as a black box
/// for calibration): fit a single reflectivity, compile tailored to the
/// fitted angle, and pick the port allocation minimizing the model distance;
/// then scores the chosen program on the chip's true angles. The naive
/// baseline compiles for balanced couplers with no relabeling.
pub fn calibration_pipeline_experiment(
    chip: &ChipSpec,
    samples: usize,
    seed: u64,
) -> Result<PipelineReport> {
    let n = chip.n;
    if n > DEFAULT_UNRESTRICTED_CAP {
        return Err(Error::SearchSpaceTooLarge { n, cap: DEFAULT_UNRESTRICTED_CAP });
    }
    let mut black_box = chip.clone();
    let opts = CalibOptions { tol: 1e-6, max_evals: 80, ..CalibOptions::default() };
    let cal = calibrate_global(&mut black_box, 0.5, &opts)?;
    let theta_star = cal.global_theta.expect("global fit always returns an angle");
    let fitted_thetas = vec![theta_star; chip.mzis.len()];
    let true_thetas = chip.thetas();

    let rows: Vec<PipelineRow> = (0..samples)
        .into_par_iter()
        .map(|i| -> Result<PipelineRow> {
            let u = haar_random_unitary(n, sample_seed(seed ^ 0x51DE, i))?;
            let naive_prog = decompose_balanced(&u)?.program;
            let naive = fidelity_distance(&u, &reconstruct(&naive_prog, &true_thetas)?)?;

            let objective = Objective::MinDistance {
                compile_thetas: &fitted_thetas,
                execute_thetas: &fitted_thetas,
            };
            let best = unrestricted_search(&u, |c| objective.evaluate(c), DEFAULT_UNRESTRICTED_CAP)?;
            let permuted = &best.allocation.permuted_unitary;
            let program = decompose(permuted, &fitted_thetas)?.program;
            let realized = reconstruct(&program, &true_thetas)?;
            let mitigated = fidelity_distance(permuted, &realized)?;
            Ok(PipelineRow { sample: i, naive, mitigated })
        })
        .collect::<Result<_>>()?;

    let mean_naive = mean(rows.iter().map(|r| r.naive));
    let mean_mitigated = mean(rows.iter().map(|r| r.mitigated));
    Ok(PipelineReport {
        rows,
        calibrated_r: {
            let c = theta_star.cos();
            c * c
        },
        calibration_evaluations: cal.evaluations,
        mean_naive,
        mean_mitigated,
        improvement: if mean_mitigated > 0.0 { mean_naive / mean_mitigated } else { f64::INFINITY },
    })
}

// ---------------------------------------------------------------------------
// reflectivity-fit curve
// ---------------------------------------------------------------------------

/// A global fit together with a uniform sweep of the misfit curve, for
/// plotting the landscape the minimizer walked.
#[derive(Clone, Debug)]
pub struct RatioFitReport {
    pub result: CalibrationResult,
    pub grid: Vec<ProbePoint>,
}

impl RatioFitReport {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("kind,r,misfit\n");
        for p in &self.result.trace {
            out.push_str(&format!("probe,{},{}\n", p.r, p.misfit));
        }
        for p in &self.grid {
            out.push_str(&format!("grid,{},{}\n", p.r, p.misfit));
        }
        out
    }
}

/// Fits a single reflectivity to `chip` and also samples the misfit on a
/// uniform grid over (0.01, 0.99).
pub fn ratio_fit_experiment(
    chip: &ChipSpec,
    r_guess: f64,
    grid_points: usize,
) -> Result<RatioFitReport> {
    if grid_points < 2 {
        return Err(Error::OutOfRange("misfit grid needs at least 2 points".into()));
    }
    let mut black_box = chip.clone();
    let result = calibrate_global(&mut black_box, r_guess, &CalibOptions::default())?;

    let program = probe_program(chip.n, r_guess, CalibOptions::default().probe_target)?;
    let mut black_box = chip.clone();
    let measured = measure_all_ports(&mut black_box, &program)?;
    let grid = (0..grid_points)
        .map(|k| {
            let r = 0.01 + (0.98 * k as f64) / (grid_points - 1) as f64;
            Ok(ProbePoint { r, misfit: probe_misfit(&measured, &program, r)? })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RatioFitReport { result, grid })
}
