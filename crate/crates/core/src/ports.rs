//! Input/output port allocation: relabeling the ports of an interferometer
//! before compiling changes every programmed phase while leaving the
//! experiment's physics untouched, so searching over permutations can buy
//! lower drive power or higher compilation accuracy for free.
//!
//! The programmed matrix for an allocation `(p_in, q_out)` is
//! `Ũ = Q · U · P` with `P e_j = e_{p_in(j)}` and `Q e_j = e_{q_out(j)}`;
//! squeezing values and detected outcomes are relabeled to match, so the
//! permuted device realizes the same experiment.

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compiler::{decompose, decompose_balanced, reconstruct};
use crate::error::{Error, Result};
use crate::linalg::{fidelity_distance, ComplexMatrix, Permutation, UnitaryMatrix};
use crate::mesh::ChipSpec;
use crate::power::program_power;

/// Nearest-neighbor port swaps, split by how invasive they are to a compiled
/// program. Each entry is the lower mode index `a` of the swap `(a, a+1)`,
/// 0-based.
///
/// An input swap with `a` even folds into the first mesh layer: the MZI
/// sitting exactly on `(a, a+1)` absorbs the swap into its own phases and the
/// leftover wire phase is absorbed one layer later, so only a couple of MZIs
/// change — the swap is *trivial*. With `a` odd no first-layer MZI sits
/// there and the swap reshuffles a large part of the program. Output swaps
/// fold into the last layer instead, whose parity is that of `n−1`, so the
/// trivial side flips with the mode count's parity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranspositionClasses {
    pub trivial_in: Vec<usize>,
    pub nontrivial_in: Vec<usize>,
    pub trivial_out: Vec<usize>,
    pub nontrivial_out: Vec<usize>,
}

/// Partitions the `n−1` nearest-neighbor swaps on each side into trivial and
/// non-trivial sets. Swaps within one set act on disjoint mode pairs, so they
/// commute and compose freely.
pub fn classify_transpositions(n: usize) -> Result<TranspositionClasses> {
    if n < 2 {
        return Err(Error::OutOfRange(format!("need at least 2 modes to swap, got {n}")));
    }
    let mut classes = TranspositionClasses {
        trivial_in: Vec::new(),
        nontrivial_in: Vec::new(),
        trivial_out: Vec::new(),
        nontrivial_out: Vec::new(),
    };
    for a in 0..n - 1 {
        if a % 2 == 0 {
            classes.trivial_in.push(a);
        } else {
            classes.nontrivial_in.push(a);
        }
        if a % 2 == (n - 1) % 2 {
            classes.trivial_out.push(a);
        } else {
            classes.nontrivial_out.push(a);
        }
    }
    Ok(classes)
}

/// The relabeled interferometer `Q · U · P` for input permutation `p_in` and
/// output permutation `q_out`: entry `(i, j)` is `U[q_out⁻¹(i)][p_in(j)]`.
pub fn apply_allocation(
    u: &UnitaryMatrix,
    p_in: &Permutation,
    q_out: &Permutation,
) -> Result<UnitaryMatrix> {
    let n = u.dim();
    if p_in.len() != n || q_out.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if p_in.len() != n { p_in.len() } else { q_out.len() },
        });
    }
    let q_inv = q_out.inverse();
    let mut m = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        let src_row = q_inv.apply(i);
        for j in 0..n {
            m.set(i, j, u.get(src_row, p_in.apply(j)));
        }
    }
    UnitaryMatrix::try_new(m)
}

/// A chosen port relabeling with its compiled figure of merit.
#[derive(Clone, Debug)]
pub struct Allocation {
    pub p_in: Permutation,
    pub q_out: Permutation,
    pub permuted_unitary: UnitaryMatrix,
    pub objective_value: f64,
}

impl Allocation {
    pub fn to_json_string(&self) -> Result<String> {
        let file = AllocationFile {
            p_in: self.p_in.to_one_based(),
            q_out: self.q_out.to_one_based(),
            objective: self.objective_value,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }
}

/// On-disk form of an allocation; port labels are 1-based.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AllocationFile {
    pub p_in: Vec<usize>,
    pub q_out: Vec<usize>,
    pub objective: f64,
}

impl AllocationFile {
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Standard figures of merit for allocation search; all are "lower is
/// better" and deterministic in the candidate.
#[derive(Clone, Copy, Debug)]
pub enum Objective<'a> {
    /// Total drive power of the candidate compiled for balanced couplers.
    MinPower { chip: &'a ChipSpec },
    /// Absolute deviation of that power from a target value.
    TargetPower { chip: &'a ChipSpec, target: f64 },
    /// Distance between the candidate and what the mesh realizes when the
    /// candidate is compiled against `compile_thetas` but executed through
    /// `execute_thetas`. With both set to the calibrated angles this scores
    /// the clamping penalty of each relabeling.
    MinDistance { compile_thetas: &'a [f64], execute_thetas: &'a [f64] },
}

impl Objective<'_> {
    pub fn evaluate(&self, candidate: &UnitaryMatrix) -> Result<f64> {
        match self {
            Objective::MinPower { chip } => {
                let dec = decompose_balanced(candidate)?;
                Ok(program_power(&dec.program, chip)?.total)
            }
            Objective::TargetPower { chip, target } => {
                let dec = decompose_balanced(candidate)?;
                Ok((program_power(&dec.program, chip)?.total - target).abs())
            }
            Objective::MinDistance { compile_thetas, execute_thetas } => {
                let dec = decompose(candidate, compile_thetas)?;
                let realized = reconstruct(&dec.program, execute_thetas)?;
                fidelity_distance(candidate, &realized)
            }
        }
    }
}

/// Outcome of a search: the chosen allocation, how many candidates were
/// scored, and whether the threshold (when one was set) was reached.
/// `met_threshold` is `true` for searches run without a threshold.
#[derive(Clone, Debug)]
pub struct SearchResult {
    pub allocation: Allocation,
    pub evaluations: usize,
    pub met_threshold: bool,
}

/// Sampling budget for [`randomized_search`]. A candidate meets the
/// threshold when its objective value is ≤ `threshold`.
#[derive(Clone, Copy, Debug)]
pub struct SearchBudget {
    pub max_candidates: usize,
    pub threshold: Option<f64>,
}

/// Default mode-count cap for [`unrestricted_search`]; beyond it the
/// `(n!)²` candidate space stops being tractable.
pub const DEFAULT_UNRESTRICTED_CAP: usize = 6;

fn build_allocation<E>(
    u: &UnitaryMatrix,
    p_in: Permutation,
    q_out: Permutation,
    value: f64,
    _evaluator: &E,
) -> Result<Allocation> {
    Ok(Allocation { permuted_unitary: apply_allocation(u, &p_in, &q_out)?, p_in, q_out, objective_value: value })
}

/// Exact minimizer over every pair of input and output permutations.
///
/// Candidates are scored in parallel; ties are broken toward the
/// lexicographically smallest `(p_in, q_out)` pair, so the result is fully
/// deterministic. Refuses `n > cap` — the space has `(n!)²` elements.
pub fn unrestricted_search<E>(u: &UnitaryMatrix, evaluator: E, cap: usize) -> Result<SearchResult>
where
    E: Fn(&UnitaryMatrix) -> Result<f64> + Sync,
{
    let n = u.dim();
    if n > cap {
        return Err(Error::SearchSpaceTooLarge { n, cap });
    }
    let perms: Vec<Permutation> = (0..n)
        .permutations(n)
        .map(|v| Permutation::try_new(v).expect("generated permutations are valid"))
        .collect();
    let fact = perms.len();
    let total = fact * fact;

    let best = (0..total)
        .into_par_iter()
        .map(|idx| -> Result<(f64, usize)> {
            let candidate = apply_allocation(u, &perms[idx / fact], &perms[idx % fact])?;
            Ok((evaluator(&candidate)?, idx))
        })
        .try_reduce(
            || (f64::INFINITY, usize::MAX),
            |a, b| Ok(if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a }),
        )?;

    let p_in = perms[best.1 / fact].clone();
    let q_out = perms[best.1 % fact].clone();
    let allocation = build_allocation(u, p_in, q_out, best.0, &evaluator)?;
    Ok(SearchResult { allocation, evaluations: total, met_threshold: true })
}

/// Uniform random sampling of permutation pairs (unbiased element-swap
/// shuffles), deterministic under `seed`. The identity pair is always
/// candidate 0, so the result can never be worse than no relabeling. Stops at
/// the first candidate meeting the threshold, otherwise returns the best of
/// the budget; equal values keep the earlier candidate.
pub fn randomized_search<E>(
    u: &UnitaryMatrix,
    evaluator: E,
    budget: &SearchBudget,
    seed: u64,
) -> Result<SearchResult>
where
    E: Fn(&UnitaryMatrix) -> Result<f64>,
{
    if budget.max_candidates == 0 {
        return Err(Error::OutOfRange("sampling budget must be at least 1 candidate".into()));
    }
    let n = u.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Permutation, Permutation)> = None;
    let mut evaluations = 0usize;

    let mut scratch: Vec<usize> = (0..n).collect();
    let draw = |rng: &mut ChaCha8Rng, scratch: &mut Vec<usize>| -> Permutation {
        scratch.shuffle(rng);
        Permutation::try_new(scratch.clone()).expect("shuffle keeps a valid permutation")
    };

    for k in 0..budget.max_candidates {
        let (p, q) = if k == 0 {
            (Permutation::identity(n), Permutation::identity(n))
        } else {
            (draw(&mut rng, &mut scratch), draw(&mut rng, &mut scratch))
        };
        let candidate = apply_allocation(u, &p, &q)?;
        let value = evaluator(&candidate)?;
        evaluations += 1;
        if best.as_ref().is_none_or(|(b, _, _)| value < *b) {
            best = Some((value, p, q));
        }
        if let Some(t) = budget.threshold {
            if value <= t {
                let (value, p, q) = best.expect("just set");
                let allocation = build_allocation(u, p, q, value, &evaluator)?;
                return Ok(SearchResult { allocation, evaluations, met_threshold: true });
            }
        }
    }
    let (value, p, q) = best.expect("budget ≥ 1");
    let met_threshold = budget.threshold.is_none_or(|t| value <= t);
    let allocation = build_allocation(u, p, q, value, &evaluator)?;
    Ok(SearchResult { allocation, evaluations, met_threshold })
}

/// Builds the permutation composing the swaps `(a, a+1)` selected by `mask`
/// over `set` (the swaps in one class are disjoint, so order is irrelevant).
fn subset_permutation(n: usize, set: &[usize], mask: usize) -> Permutation {
    let mut map: Vec<usize> = (0..n).collect();
    for (bit, &a) in set.iter().enumerate() {
        if mask & (1 << bit) != 0 {
            map.swap(a, a + 1);
        }
    }
    Permutation::try_new(map).expect("disjoint swaps keep a valid permutation")
}

/// How one sweep phase enumerates swap combinations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SweepMode {
    /// Input × output combinations jointly: `2^|in| · 2^|out|` candidates
    /// per phase. Thorough, but exponential in the full swap count.
    #[default]
    Joint,
    /// Inputs and outputs enumerated separately: `2^|in| + 2^|out|`
    /// candidates per phase — the cheaper fallback for wide meshes.
    PerSide,
}

/// Alternating exhaustive search over compositions of commuting swaps.
///
/// Each of the `k` rounds runs two phases: first the non-trivial input and
/// output swaps applied on top of the current allocation, then the trivial
/// ones, with combinations enumerated per [`SweepMode`]. The better of
/// current-vs-candidates wins each phase (ties keep the current allocation).
/// Stops early when the threshold is met or a full round brings no strict
/// improvement. Evaluates at most
/// `k·(2^|nt_in|·2^|nt_out| + 2^|t_in|·2^|t_out|) + 1` candidates jointly,
/// or `k·(2^|nt_in| + 2^|nt_out| + 2^|t_in| + 2^|t_out|) + 1` per side.
pub fn sweep_search_with_mode<E>(
    u: &UnitaryMatrix,
    evaluator: E,
    k: usize,
    threshold: Option<f64>,
    mode: SweepMode,
) -> Result<SearchResult>
where
    E: Fn(&UnitaryMatrix) -> Result<f64> + Sync,
{
    if k == 0 {
        return Err(Error::OutOfRange("sweep count k must be at least 1".into()));
    }
    let n = u.dim();
    let classes = classify_transpositions(n)?;
    let empty: &[usize] = &[];
    let phase_blocks: Vec<(&[usize], &[usize])> = match mode {
        SweepMode::Joint => vec![
            (&classes.nontrivial_in[..], &classes.nontrivial_out[..]),
            (&classes.trivial_in[..], &classes.trivial_out[..]),
        ],
        SweepMode::PerSide => vec![
            (&classes.nontrivial_in[..], empty),
            (empty, &classes.nontrivial_out[..]),
            (&classes.trivial_in[..], empty),
            (empty, &classes.trivial_out[..]),
        ],
    };

    let mut p = Permutation::identity(n);
    let mut q = Permutation::identity(n);
    let mut current = evaluator(&apply_allocation(u, &p, &q)?)?;
    let mut evaluations = 1usize;
    let met = |v: f64| threshold.is_some_and(|t| v <= t);

    'rounds: for _round in 0..k {
        if met(current) {
            break;
        }
        let mut improved = false;
        for &(in_set, out_set) in &phase_blocks {
            let in_count = 1usize << in_set.len();
            let out_count = 1usize << out_set.len();
            let total = in_count * out_count;
            let (p0, q0) = (p.clone(), q.clone());
            let best = (0..total)
                .into_par_iter()
                .map(|idx| -> Result<(f64, usize)> {
                    let tau_in = subset_permutation(n, in_set, idx / out_count);
                    let tau_out = subset_permutation(n, out_set, idx % out_count);
                    let pc = p0.compose(&tau_in)?;
                    let qc = tau_out.compose(&q0)?;
                    let candidate = apply_allocation(u, &pc, &qc)?;
                    Ok((evaluator(&candidate)?, idx))
                })
                .try_reduce(
                    || (f64::INFINITY, usize::MAX),
                    |a, b| Ok(if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a }),
                )?;
            evaluations += total;
            if best.0 < current {
                let tau_in = subset_permutation(n, in_set, best.1 / out_count);
                let tau_out = subset_permutation(n, out_set, best.1 % out_count);
                p = p.compose(&tau_in)?;
                q = tau_out.compose(&q)?;
                current = best.0;
                improved = true;
            }
            if met(current) {
                break 'rounds;
            }
        }
        if !improved {
            break;
        }
    }

    let met_threshold = threshold.is_none_or(|t| current <= t);
    let allocation = build_allocation(u, p, q, current, &evaluator)?;
    Ok(SearchResult { allocation, evaluations, met_threshold })
}

/// [`sweep_search_with_mode`] with the default joint enumeration.
pub fn sweep_search<E>(
    u: &UnitaryMatrix,
    evaluator: E,
    k: usize,
    threshold: Option<f64>,
) -> Result<SearchResult>
where
    E: Fn(&UnitaryMatrix) -> Result<f64> + Sync,
{
    sweep_search_with_mode(u, evaluator, k, threshold, SweepMode::Joint)
}

/// Squeezing assignments for the inputs and detected counts at the outputs —
/// the experiment bookkeeping that must be relabeled alongside the ports.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub squeezing: Vec<f64>,
    pub outcomes: Vec<u64>,
}

/// Relabels experiment metadata for an allocation: the squeezer feeding
/// permuted input `j` takes the value `squeezing[p_in⁻¹(j)]`, and the
/// outcome reported at logical output `j` is the raw count at detector
/// `q_out(j)`.
pub fn relabel_experiment(
    cfg: &ExperimentConfig,
    p_in: &Permutation,
    q_out: &Permutation,
) -> Result<ExperimentConfig> {
    let n = p_in.len();
    if cfg.squeezing.len() != n || cfg.outcomes.len() != n || q_out.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "experiment has {} squeezers and {} outcomes; permutations cover {} and {} ports",
            cfg.squeezing.len(),
            cfg.outcomes.len(),
            n,
            q_out.len()
        )));
    }
    let p_inv = p_in.inverse();
    let squeezing = (0..n).map(|j| cfg.squeezing[p_inv.apply(j)]).collect();
    let outcomes = (0..n).map(|j| cfg.outcomes[q_out.apply(j)]).collect();
    Ok(ExperimentConfig { squeezing, outcomes })
}
