//! Command-line harness around the mesh compiler: compile unitaries into
//! phase programs, search port allocations, calibrate splitting ratios, and
//! run the deterministic experiment presets behind the library's headline
//! numbers.
//!
//! Exit codes: 0 success, 1 objective/threshold not met, 2 usage or I/O error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use photomesh::recipes::{
    calibration_pipeline_experiment, defective_chip, distance_by_defect_csv,
    distance_by_defect_experiment, distance_by_size_csv, distance_by_size_experiment,
    power_reduction_experiment, ratio_fit_experiment, target_power_experiment,
};
use photomesh::{
    calibrate_global, calibrate_per_mzi, decompose, decompose_balanced, execute,
    fidelity_distance, haar_random_unitary, randomized_search, sample_chip, sweep_search_with_mode,
    unrestricted_search, CalibOptions, ChipParams, ChipSpec, ComplexMatrix, Objective,
    ReflectivityBranch, SearchBudget, SearchResult, SweepMode, UnitaryMatrix,
    DEFAULT_UNRESTRICTED_CAP,
};

#[derive(Parser)]
#[command(
    name = "photomesh",
    version,
    about = "Compile, relabel, calibrate, and benchmark programmable interferometer meshes"
)]
struct Cli {
    /// Cap the worker-thread count (overrides the MESH_THREADS variable)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a unitary into a phase program for a chip
    Compile(CompileArgs),
    /// Search input/output port relabelings that optimize an objective
    Allocate(AllocateArgs),
    /// Fit coupler splitting ratios by driving a chip as a black box
    Calibrate(CalibrateArgs),
    /// Run a named experiment preset and write per-sample CSV files
    Bench(BenchArgs),
    /// Generate a synthetic chip description file
    Chip(ChipArgs),
    /// Sample a Haar-random unitary into a matrix file
    Haar(HaarArgs),
}

#[derive(Args)]
struct CompileArgs {
    /// Target unitary (matrix JSON: {"n", "re", "im"})
    #[arg(short, long)]
    unitary: PathBuf,
    /// Chip description JSON
    #[arg(short, long)]
    chip: PathBuf,
    /// Compile for the chip's measured splitting ratios (default)
    #[arg(long, conflicts_with = "ideal")]
    tailored: bool,
    /// Compile assuming perfectly balanced couplers
    #[arg(long)]
    ideal: bool,
    /// Where to write the phase-program JSON
    #[arg(short, long, default_value = "program.json")]
    out: PathBuf,
}

#[derive(Args)]
struct AllocateArgs {
    /// Target unitary (matrix JSON)
    #[arg(short, long)]
    unitary: PathBuf,
    /// Chip description JSON
    #[arg(short, long)]
    chip: PathBuf,
    /// What to optimize: "power", "target:<value>", or "distance"
    #[arg(long)]
    objective: String,
    /// How to search: "full", "random[:candidates]", or "sweep:<k>"
    #[arg(long)]
    strategy: String,
    /// Enumerate sweep swaps per side instead of jointly (cheaper, weaker)
    #[arg(long)]
    per_side: bool,
    /// Accept the first allocation at or below this objective value;
    /// exit code 1 if the search ends above it
    #[arg(long)]
    threshold: Option<f64>,
    /// Seed for the randomized strategy
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the allocation JSON
    #[arg(short, long, default_value = "allocation.json")]
    out: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Chip description JSON (driven as a black box)
    #[arg(short, long)]
    chip: PathBuf,
    /// Calibration method
    #[arg(long, value_enum)]
    method: Method,
    /// Starting splitting-ratio guess for the global fit
    #[arg(long, default_value_t = 0.5)]
    guess: f64,
    /// Termination tolerance on the fitted ratio (global fit)
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    /// Measurement budget for the global fit
    #[arg(long, default_value_t = 60)]
    max_evals: usize,
    /// Which side of 50:50 the couplers sit on (per-mzi method)
    #[arg(long, value_enum, default_value_t = Branch::Below)]
    branch: Branch,
    /// Where to write the calibration JSON
    #[arg(short, long, default_value = "calibration.json")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    /// Bar-state interference fringes, one coupler at a time; exact on
    /// noiseless chips
    PerMzi,
    /// One-dimensional misfit minimization for a single shared ratio
    Global,
}

#[derive(Clone, Copy, ValueEnum)]
enum Branch {
    Below,
    Above,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment preset to run
    #[arg(value_enum)]
    figure: Figure,
    /// Haar-sample count (preset-specific default when omitted)
    #[arg(long)]
    samples: Option<usize>,
    /// Base seed; all outputs are byte-identical for a fixed seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Directory for the CSV files
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Figure {
    /// Drive-power reduction via allocation search (4 modes) and
    /// target-power steering (8 modes)
    Fig2,
    /// Compilation distance vs coupler defect and vs mesh size
    Fig3,
    /// Full calibrate → tailor → allocate pipeline on a uniform defect
    Fig4,
    /// Splitting-ratio fit trace and misfit landscape on a 12-mode chip
    Fig7,
    /// Pipeline robustness when every coupler differs
    Fig8,
}

#[derive(Args)]
struct ChipArgs {
    /// Mode count
    #[arg(short = 'n', long)]
    modes: usize,
    /// Mean coupler reflectivity
    #[arg(long, default_value_t = 0.5)]
    r_mean: f64,
    /// Reflectivity standard deviation
    #[arg(long, default_value_t = 0.0)]
    r_std: f64,
    /// Phase-shifter offsets drawn uniformly from [0, alpha_max)
    #[arg(long, default_value_t = std::f64::consts::TAU)]
    alpha_max: f64,
    /// Lower edge of the drive-coefficient range
    #[arg(long, default_value_t = 0.5)]
    beta_min: f64,
    /// Upper edge of the drive-coefficient range
    #[arg(long, default_value_t = 2.0)]
    beta_max: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Emit the defect-free reference chip instead of sampling
    #[arg(long)]
    ideal: bool,
    #[arg(short, long, default_value = "chip.json")]
    out: PathBuf,
}

#[derive(Args)]
struct HaarArgs {
    /// Mode count
    #[arg(short = 'n', long)]
    modes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long, default_value = "unitary.json")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads(cli.threads);
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn init_threads(flag: Option<usize>) {
    let count = flag.or_else(|| {
        std::env::var("MESH_THREADS").ok().and_then(|s| s.parse::<usize>().ok())
    });
    if let Some(count) = count.filter(|&c| c > 0) {
        // a second init in one process is harmless; keep the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(count).build_global();
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Compile(args) => cmd_compile(args),
        Command::Allocate(args) => cmd_allocate(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Chip(args) => cmd_chip(args),
        Command::Haar(args) => cmd_haar(args),
    }
}

fn read_unitary(path: &Path) -> Result<UnitaryMatrix> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading unitary file {}", path.display()))?;
    let m = ComplexMatrix::from_json_str(&text)
        .with_context(|| format!("parsing unitary file {}", path.display()))?;
    UnitaryMatrix::try_new(m).context("the matrix in the file is not unitary")
}

fn read_chip(path: &Path) -> Result<ChipSpec> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading chip file {}", path.display()))?;
    ChipSpec::from_json_str(&text)
        .with_context(|| format!("parsing chip file {}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating directory {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_compile(args: CompileArgs) -> Result<ExitCode> {
    let u = read_unitary(&args.unitary)?;
    let chip = read_chip(&args.chip)?;
    if u.dim() != chip.n {
        bail!("unitary has {} modes but the chip has {}", u.dim(), chip.n);
    }
    let (mode, decomp) = if args.ideal {
        ("ideal", decompose_balanced(&u)?)
    } else {
        ("tailored", decompose(&u, &chip.thetas())?)
    };
    let realized = execute(&decomp.program, &chip)?;
    let distance = fidelity_distance(&u, &realized)?;
    println!("compiled {}-mode program ({mode})", chip.n);
    println!("clamped steps: {}", decomp.clamped_steps);
    println!("fidelity distance on this chip: {distance:.6e}");
    write_file(&args.out, &decomp.program.to_json_string()?)?;
    Ok(ExitCode::SUCCESS)
}

enum Strategy {
    Full,
    Random(usize),
    Sweep(usize),
}

fn parse_strategy(s: &str) -> Result<Strategy> {
    match s.split_once(':') {
        None => match s {
            "full" => Ok(Strategy::Full),
            "random" => Ok(Strategy::Random(1000)),
            "sweep" => bail!("strategy sweep needs a round count, e.g. sweep:2"),
            other => bail!("unknown strategy {other:?} (expected full, random[:N], or sweep:K)"),
        },
        Some(("random", n)) => {
            let n: usize = n.parse().context("candidate count in random:<N>")?;
            if n == 0 {
                bail!("random strategy needs at least 1 candidate");
            }
            Ok(Strategy::Random(n))
        }
        Some(("sweep", k)) => {
            let k: usize = k.parse().context("round count in sweep:<K>")?;
            if k == 0 {
                bail!("sweep rounds k must be at least 1");
            }
            Ok(Strategy::Sweep(k))
        }
        Some((other, _)) => bail!("unknown strategy {other:?}"),
    }
}

enum ObjectiveSpec {
    Power,
    Target(f64),
    Distance,
}

fn parse_objective(s: &str) -> Result<ObjectiveSpec> {
    match s.split_once(':') {
        None => match s {
            "power" => Ok(ObjectiveSpec::Power),
            "distance" => Ok(ObjectiveSpec::Distance),
            "target" => bail!("objective target needs a value, e.g. target:165"),
            other => {
                bail!("unknown objective {other:?} (expected power, target:<value>, or distance)")
            }
        },
        Some(("target", v)) => {
            Ok(ObjectiveSpec::Target(v.parse().context("value in target:<value>")?))
        }
        Some((other, _)) => bail!("unknown objective {other:?}"),
    }
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

fn cmd_allocate(args: AllocateArgs) -> Result<ExitCode> {
    let u = read_unitary(&args.unitary)?;
    let chip = read_chip(&args.chip)?;
    if u.dim() != chip.n {
        bail!("unitary has {} modes but the chip has {}", u.dim(), chip.n);
    }
    let strategy = parse_strategy(&args.strategy)?;
    let spec = parse_objective(&args.objective)?;
    let thetas = chip.thetas();
    let objective = match spec {
        ObjectiveSpec::Power => Objective::MinPower { chip: &chip },
        ObjectiveSpec::Target(target) => Objective::TargetPower { chip: &chip, target },
        ObjectiveSpec::Distance => {
            Objective::MinDistance { compile_thetas: &thetas, execute_thetas: &thetas }
        }
    };

    let before = objective.evaluate(&u)?;
    let n = chip.n;
    let result: SearchResult = match strategy {
        Strategy::Full => {
            if n >= 5 {
                let count = factorial(n) * factorial(n);
                eprintln!(
                    "warning: full search evaluates ({n}!)\u{b2} = {count} allocations; \
                     this may take a while"
                );
            }
            unrestricted_search(&u, |c| objective.evaluate(c), DEFAULT_UNRESTRICTED_CAP)?
        }
        Strategy::Random(candidates) => {
            let budget = SearchBudget { max_candidates: candidates, threshold: args.threshold };
            randomized_search(&u, |c| objective.evaluate(c), &budget, args.seed)?
        }
        Strategy::Sweep(k) => {
            let mode = if args.per_side { SweepMode::PerSide } else { SweepMode::Joint };
            sweep_search_with_mode(&u, |c| objective.evaluate(c), k, args.threshold, mode)?
        }
    };

    let after = result.allocation.objective_value;
    println!("objective before: {before:.6}");
    println!("objective after:  {after:.6}  ({} evaluations)", result.evaluations);
    println!("input map p (1-based):  {:?}", result.allocation.p_in.to_one_based());
    println!("output map q (1-based): {:?}", result.allocation.q_out.to_one_based());
    write_file(&args.out, &result.allocation.to_json_string()?)?;

    if let Some(t) = args.threshold {
        if after > t {
            eprintln!("threshold {t} not met (best objective {after:.6})");
            return Ok(ExitCode::from(1));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<ExitCode> {
    let mut chip = read_chip(&args.chip)?;
    let result = match args.method {
        Method::PerMzi => {
            let branch = match args.branch {
                Branch::Below => ReflectivityBranch::BelowHalf,
                Branch::Above => ReflectivityBranch::AboveHalf,
            };
            let res = calibrate_per_mzi(&mut chip, branch)?;
            let thetas = res.per_mzi_theta.as_deref().unwrap_or(&[]);
            let (lo, hi) = thetas.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &t| {
                (a.0.min(t), a.1.max(t))
            });
            println!(
                "fitted {} coupler angles in [{lo:.6}, {hi:.6}] rad ({} measurements)",
                thetas.len(),
                res.evaluations
            );
            res
        }
        Method::Global => {
            let opts = CalibOptions {
                tol: args.tol,
                max_evals: args.max_evals,
                ..CalibOptions::default()
            };
            let res = calibrate_global(&mut chip, args.guess, &opts)?;
            let theta = res.global_theta.expect("global fit returns an angle");
            println!(
                "fitted ratio r = {:.6} (θ = {theta:.6} rad) — residual {:.3e} after {} probes",
                theta.cos() * theta.cos(),
                res.residual,
                res.evaluations
            );
            if res.warning {
                eprintln!(
                    "warning: the fit fell back to a coarse scan or exhausted its budget; \
                     treat the ratio as approximate"
                );
            }
            res
        }
    };
    write_file(&args.out, &result.to_json_string()?)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(args: BenchArgs) -> Result<ExitCode> {
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating output directory {}", args.out.display()))?;
    let seed = args.seed;
    match args.figure {
        Figure::Fig2 => {
            let samples = args.samples.unwrap_or(1000);
            let power = power_reduction_experiment(4, samples, seed)?;
            println!(
                "4-mode power: naive {:.2}, full search {:.2} (−{:.1}%), sweep k=2 {:.2} (−{:.1}%)",
                power.mean_naive,
                power.mean_unrestricted,
                100.0 * power.unrestricted_reduction,
                power.mean_sweep,
                100.0 * power.sweep_reduction
            );
            write_file(&args.out.join("fig2_power_reduction.csv"), &power.to_csv_string())?;
            let target = target_power_experiment(8, samples, 165.0, 2, seed)?;
            println!(
                "8-mode target 165: power std {:.3} → {:.3} ({:.1}× tighter)",
                target.naive_std, target.achieved_std, target.std_ratio
            );
            write_file(&args.out.join("fig2_target_power.csv"), &target.to_csv_string())?;
        }
        Figure::Fig3 => {
            let samples = args.samples.unwrap_or(200);
            let by_defect = distance_by_defect_experiment(
                6,
                samples,
                &[0.40, 0.42, 0.44, 0.46, 0.48, 0.49, 0.50],
                seed,
            )?;
            for row in &by_defect {
                println!(
                    "r = {:.2}: naive {:.3e}, tailored {:.3e}",
                    row.reflectivity, row.mean_naive, row.mean_tailored
                );
            }
            write_file(&args.out.join("fig3_by_defect.csv"), &distance_by_defect_csv(&by_defect))?;
            let by_size =
                distance_by_size_experiment(&[4, 6, 8, 10, 12, 14, 16], samples, 0.48, seed)?;
            for row in &by_size {
                println!("n = {:2}: naive {:.3e}", row.n, row.mean_naive);
            }
            write_file(&args.out.join("fig3_by_size.csv"), &distance_by_size_csv(&by_size))?;
        }
        Figure::Fig4 => {
            let samples = args.samples.unwrap_or(500);
            let chip = ChipSpec::uniform(4, 0.47);
            let rep = calibration_pipeline_experiment(&chip, samples, seed)?;
            println!(
                "uniform-defect pipeline: fitted r = {:.5}, mean distance {:.3e} → {:.3e} ({:.1e}×)",
                rep.calibrated_r, rep.mean_naive, rep.mean_mitigated, rep.improvement
            );
            write_file(&args.out.join("fig4_pipeline.csv"), &rep.to_csv_string())?;
        }
        Figure::Fig7 => {
            let mut params = ChipParams::new(12);
            params.r_mean = 0.47;
            params.r_std = 0.005;
            params.seed = seed;
            let chip = sample_chip(&params)?;
            let rep = ratio_fit_experiment(&chip, 0.5, 50)?;
            let theta = rep.result.global_theta.expect("global fit returns an angle");
            println!(
                "12-mode fit: r = {:.6} in {} probes (residual {:.3e})",
                theta.cos() * theta.cos(),
                rep.result.evaluations,
                rep.result.residual
            );
            write_file(&args.out.join("fig7_ratio_fit.csv"), &rep.to_csv_string())?;
        }
        Figure::Fig8 => {
            let samples = args.samples.unwrap_or(500);
            let chip = defective_chip(4, 0.47, 0.005, seed)?;
            let rep = calibration_pipeline_experiment(&chip, samples, seed.wrapping_add(1))?;
            println!(
                "spread-defect pipeline: fitted r = {:.5}, mean distance {:.3e} → {:.3e} ({:.1}×)",
                rep.calibrated_r, rep.mean_naive, rep.mean_mitigated, rep.improvement
            );
            write_file(&args.out.join("fig8_robustness.csv"), &rep.to_csv_string())?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_chip(args: ChipArgs) -> Result<ExitCode> {
    let chip = if args.ideal {
        ChipSpec::ideal(args.modes)
    } else {
        let mut params = ChipParams::new(args.modes);
        params.r_mean = args.r_mean;
        params.r_std = args.r_std;
        params.alpha_max = args.alpha_max;
        params.beta_range = if args.beta_min < args.beta_max {
            (args.beta_min, args.beta_max)
        } else if args.beta_min == args.beta_max {
            (args.beta_min, args.beta_min + f64::EPSILON)
        } else {
            bail!("beta-min {} exceeds beta-max {}", args.beta_min, args.beta_max);
        };
        params.seed = args.seed;
        sample_chip(&params)?
    };
    println!("generated {}-mode chip with {} interferometers", chip.n, chip.mzis.len());
    write_file(&args.out, &chip.to_json_string()?)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_haar(args: HaarArgs) -> Result<ExitCode> {
    let u = haar_random_unitary(args.modes, args.seed)?;
    println!("sampled {}-mode Haar unitary (seed {})", args.modes, args.seed);
    write_file(&args.out, &u.as_matrix().to_json_string()?)?;
    Ok(ExitCode::SUCCESS)
}
