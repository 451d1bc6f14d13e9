//! Seeded generators for states and block-structured acts.
//!
//! Every act produced here is a glue of block acts with fresh outputs per
//! input macrostate, so availability holds by construction.

use crate::construct::{glue, make_block_act, ActFunction, Allocator, Branch, Completion};
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexVector};
use crate::model::{branch_state, Act, DecisionProblem, Event, MacrostateId};
use crate::rules::{sparse_state, Amplitude};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// `n` random positive weights summing to 1, each raw draw in [0.05, 1).
pub fn random_weights<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    raw.iter().map(|w| w / sum).collect()
}

/// `n` branches with random weights, rewards and phases.
pub fn random_branches<R: Rng + ?Sized>(p: &DecisionProblem, rng: &mut R, n: usize) -> Vec<Branch> {
    random_weights(rng, n)
        .into_iter()
        .map(|weight| Branch {
            reward: rng.random_range(0..p.reward_count()),
            weight,
            phase: rng.random_range(0.0..std::f64::consts::TAU),
        })
        .collect()
}

/// Up to `max_cells` distinct random macrostates of `stage`, sorted.
pub fn random_cells<R: Rng + ?Sized>(p: &DecisionProblem, rng: &mut R, stage: usize, max_cells: usize) -> Vec<MacrostateId> {
    let pool: Vec<MacrostateId> = p.stage_event(stage).ids().collect();
    let count = rng.random_range(1..=max_cells.min(pool.len()).max(1));
    let mut cells: Vec<MacrostateId> = Vec::with_capacity(count);
    while cells.len() < count {
        let m = pool[rng.random_range(0..pool.len())];
        if !cells.contains(&m) {
            cells.push(m);
        }
    }
    cells.sort_unstable();
    cells
}

/// A normalized state with random amplitudes on every microstate of `cells`.
pub fn random_state_on<R: Rng + ?Sized>(p: &DecisionProblem, rng: &mut R, cells: &[MacrostateId]) -> ComplexVector {
    let mut psi = ComplexVector::zeros(p.dim());
    for &m in cells {
        for b in p.macrostates()[m].basis() {
            psi.entries_mut()[b] = linalg::random_complex(rng);
        }
    }
    psi.normalized().expect("gaussian amplitudes are nonzero")
}

/// A random state over 1–3 first-stage macrostates.
pub fn random_state<R: Rng + ?Sized>(p: &DecisionProblem, rng: &mut R) -> ComplexVector {
    let cells = random_cells(p, rng, 0, 3);
    random_state_on(p, rng, &cells)
}

/// The macrostates `psi` has weight on, which must all lie in one stage.
fn state_cells(p: &DecisionProblem, psi: &ComplexVector) -> Result<(Event, Vec<MacrostateId>)> {
    let support = p.support(psi);
    if support.is_empty() {
        return Err(Error::Validation("state has no support".into()));
    }
    p.stage_of(&support)?;
    let cells = support.ids().collect();
    Ok((support, cells))
}

/// Glues one block act per support macrostate of `psi`, with branches and
/// completions supplied per macrostate.
pub fn block_family(
    p: &DecisionProblem,
    psi: &ComplexVector,
    pieces: &[(MacrostateId, Vec<Branch>, Completion)],
    target_stage: usize,
) -> Result<Act> {
    let domain: Event = pieces.iter().map(|(m, _, _)| *m).collect();
    let mut alloc = Allocator::avoiding(p, &domain)?;
    let mut acts = Vec::with_capacity(pieces.len());
    for (m, branches, completion) in pieces {
        let chi = branch_state(p, psi, &Event::singleton(*m))
            .ok_or_else(|| Error::Validation(format!("state has no weight on macrostate {m}")))?;
        acts.push(make_block_act(p, &mut alloc, &chi, *m, branches, *completion, target_stage)?);
    }
    glue(p, &mut alloc, &ActFunction::new(acts))
}

/// A random glued block act on the support of `psi`, 1–3 branches per
/// macrostate, randomly rotated completions.
pub fn random_block_act<R: Rng + ?Sized>(p: &DecisionProblem, rng: &mut R, psi: &ComplexVector, target_stage: usize) -> Result<Act> {
    let (_, cells) = state_cells(p, psi)?;
    let pieces: Vec<_> = cells
        .iter()
        .map(|&m| {
            let n = rng.random_range(1..=3);
            (m, random_branches(p, rng, n), Completion::Rotated(rng.random()))
        })
        .collect();
    block_family(p, psi, &pieces, target_stage)
}

/// A random state over 1–3 first-stage macrostates and two random acts on it.
pub fn random_act_pair<R: Rng + ?Sized>(p: &DecisionProblem, rng: &mut R) -> Result<(ComplexVector, Act, Act)> {
    let psi = random_state(p, rng);
    let a = random_block_act(p, rng, &psi, 1)?;
    let b = random_block_act(p, rng, &psi, 1)?;
    Ok((psi, a, b))
}

/// What a generated act pair must satisfy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "constraint", rename_all = "snake_case")]
pub enum PairConstraint {
    Unconstrained,
    /// `Aψ = Bψ` with the acts differing outside the span of ψ.
    EqualImage,
    /// Both acts have the given reward function (indexed by reward id).
    EqualRewardFunction { lottery: Vec<f64> },
    /// Equal images, and the acts send `probe` to different vectors.
    ProbeDiffering { probe: Vec<Amplitude> },
    /// Same branch weights per macrostate, with each of A's rewards at least
    /// as good as B's under `utility`.
    PerBranchOrdered { utility: Vec<f64> },
}

const PROBE_ATTEMPTS: usize = 64;

/// Two acts on the support of `psi` satisfying `constraint`, targeting the
/// next stage.
pub fn generate_act_pair(
    p: &DecisionProblem,
    psi: &ComplexVector,
    constraint: &PairConstraint,
    seed: u64,
) -> Result<(Act, Act)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (support, cells) = state_cells(p, psi)?;
    let target = p.stage_of(&support)? + 1;
    let equal_image = |rng: &mut ChaCha8Rng| -> Result<(Act, Act)> {
        let shared: Vec<(MacrostateId, Vec<Branch>)> = cells
            .iter()
            .map(|&m| {
                let n = rng.random_range(1..=3);
                (m, random_branches(p, rng, n))
            })
            .collect();
        let make = |rng: &mut ChaCha8Rng| {
            let pieces: Vec<_> = shared
                .iter()
                .map(|(m, b)| (*m, b.clone(), Completion::Rotated(rng.random())))
                .collect();
            block_family(p, psi, &pieces, target)
        };
        let a = make(rng)?;
        let b = make(rng)?;
        Ok((a, b))
    };
    match constraint {
        PairConstraint::Unconstrained => {
            let a = random_block_act(p, &mut rng, psi, target)?;
            let b = random_block_act(p, &mut rng, psi, target)?;
            Ok((a, b))
        }
        PairConstraint::EqualImage => equal_image(&mut rng),
        PairConstraint::ProbeDiffering { probe } => {
            let probe = sparse_state(p, probe)?;
            for _ in 0..PROBE_ATTEMPTS {
                let (a, b) = equal_image(&mut rng)?;
                let (pa, pb) = (a.apply(&probe)?, b.apply(&probe)?);
                if pa.distance(&pb)? > p.tolerance().eq_eps {
                    return Ok((a, b));
                }
            }
            Err(Error::Capacity("no probe-differing pair found; the probe may lie outside the domain".into()))
        }
        PairConstraint::EqualRewardFunction { lottery } => {
            if lottery.len() != p.reward_count() {
                return Err(Error::Dimension(format!(
                    "lottery has {} entries for {} rewards",
                    lottery.len(),
                    p.reward_count()
                )));
            }
            let total: f64 = lottery.iter().sum();
            if lottery.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > p.tolerance().eq_eps {
                return Err(Error::Validation(format!("lottery weights must be non-negative and sum to 1, got {total}")));
            }
            // every macrostate carries the lottery, split into 1–2 sub-branches per reward
            let make = |rng: &mut ChaCha8Rng| {
                let pieces: Vec<_> = cells
                    .iter()
                    .map(|&m| {
                        let mut branches = Vec::new();
                        for (r, &w) in lottery.iter().enumerate().filter(|(_, w)| **w > 0.0) {
                            let k = rng.random_range(1..=2);
                            let parts = random_weights(rng, k);
                            for q in parts {
                                branches.push(Branch {
                                    reward: r,
                                    weight: w * q,
                                    phase: rng.random_range(0.0..std::f64::consts::TAU),
                                });
                            }
                        }
                        (m, branches, Completion::Rotated(rng.random()))
                    })
                    .collect::<Vec<_>>();
                block_family(p, psi, &pieces, target)
            };
            let a = make(&mut rng)?;
            let b = make(&mut rng)?;
            Ok((a, b))
        }
        PairConstraint::PerBranchOrdered { utility } => {
            if utility.len() != p.reward_count() {
                return Err(Error::Dimension(format!(
                    "utility has {} entries for {} rewards",
                    utility.len(),
                    p.reward_count()
                )));
            }
            let mut pieces_a = Vec::new();
            let mut pieces_b = Vec::new();
            for &m in &cells {
                let n = rng.random_range(1..=3);
                let b = random_branches(p, &mut rng, n);
                let a: Vec<Branch> = b
                    .iter()
                    .map(|br| {
                        let better: Vec<usize> = (0..p.reward_count()).filter(|&r| utility[r] >= utility[br.reward]).collect();
                        Branch {
                            reward: better[rng.random_range(0..better.len())],
                            ..*br
                        }
                    })
                    .collect();
                pieces_a.push((m, a, Completion::Rotated(rng.random())));
                pieces_b.push((m, b, Completion::Rotated(rng.random())));
            }
            Ok((block_family(p, psi, &pieces_a, target)?, block_family(p, psi, &pieces_b, target)?))
        }
    }
}
