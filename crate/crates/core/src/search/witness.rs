//! Seeded random witnesses for each axiom checker.

use super::recipe::{Continuation, DiachronicBranch, DiachronicRecipe, ImagePlan, Recipe, SupervenienceRecipe};
use crate::axioms::{
    check_branching_indifference, check_macrostate_indifference, check_ordering, check_solution_continuity, Axiom,
    AxiomCheckResult, Quadruple,
};
use crate::construct::{BranchSpec, Completion};
use crate::error::Result;
use crate::generate::{random_act_pair, random_block_act, random_branches, random_cells, random_state, random_state_on, random_weights};
use crate::linalg::{self, ComplexMatrix};
use crate::model::{Act, DecisionProblem, Event, MacrostateId};
use crate::rules::Preference;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A search cell: the axiom family a stream of witnesses is aimed at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Ordering,
    Diachronic,
    MacrostateIndiff,
    BranchingIndiff,
    StateSupervenience,
    SolutionContinuity,
}

impl Target {
    pub const ALL: [Target; 6] = [
        Target::Ordering,
        Target::Diachronic,
        Target::MacrostateIndiff,
        Target::BranchingIndiff,
        Target::StateSupervenience,
        Target::SolutionContinuity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Target::Ordering => "ordering",
            Target::Diachronic => "diachronic",
            Target::MacrostateIndiff => "macrostate_indiff",
            Target::BranchingIndiff => "branching_indiff",
            Target::StateSupervenience => "state_supervenience",
            Target::SolutionContinuity => "solution_continuity",
        }
    }

    pub fn covers(self, axiom: Axiom) -> bool {
        match self {
            Target::Diachronic => matches!(axiom, Axiom::DiachronicI | Axiom::DiachronicIi),
            Target::Ordering => axiom == Axiom::Ordering,
            Target::MacrostateIndiff => axiom == Axiom::MacrostateIndiff,
            Target::BranchingIndiff => axiom == Axiom::BranchingIndiff,
            Target::StateSupervenience => axiom == Axiom::StateSupervenience,
            Target::SolutionContinuity => axiom == Axiom::SolutionContinuity,
        }
    }

    /// The cell a recipe belongs to.
    pub fn of_recipe(r: &Recipe) -> Target {
        match r {
            Recipe::Diachronic(_) => Target::Diachronic,
            Recipe::Supervenience(_) => Target::StateSupervenience,
        }
    }
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Knobs for the witness generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchOptions {
    /// Most first-act branches in diachronic and supervenience witnesses.
    pub max_branches: usize,
    /// Start recipes in macrostate (reward 0, ordinal 0) of the first stage.
    pub pin_start: bool,
    /// Supervenience states put all weight on the first microstate.
    pub probe_orthogonal: bool,
    pub continuity_samples: usize,
    pub ordering_acts: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            max_branches: 3,
            pin_start: false,
            probe_orthogonal: false,
            continuity_samples: 2,
            ordering_acts: 4,
        }
    }
}

/// One checked witness.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub result: AxiomCheckResult,
    pub recipe: Option<Recipe>,
}

fn random_continuation<R: Rng + ?Sized>(p: &DecisionProblem, rng: &mut R) -> Continuation {
    match rng.random_range(0..4) {
        0 => Continuation::Identity,
        1 if p.stage_count() > 3 => Continuation::Advance { skip: 1 },
        1 => Continuation::Identity,
        2 => Continuation::Branch {
            weights: random_weights(rng, 2),
        },
        _ => Continuation::Reward {
            reward: rng.random_range(0..p.reward_count()),
        },
    }
}

pub fn random_diachronic<R: Rng + ?Sized>(p: &DecisionProblem, rng: &mut R, opts: &SearchOptions) -> DiachronicRecipe {
    let n = rng.random_range(2..=opts.max_branches.max(2));
    let weights = random_weights(rng, n);
    let start_reward = if opts.pin_start { 0 } else { rng.random_range(0..p.reward_count()) };
    let branches = weights
        .into_iter()
        .map(|weight| DiachronicBranch {
            reward: rng.random_range(0..p.reward_count()),
            weight,
            v1: random_continuation(p, rng),
            v2: random_continuation(p, rng),
        })
        .collect();
    DiachronicRecipe { start_reward, branches }
}

fn random_plan<R: Rng + ?Sized>(p: &DecisionProblem, rng: &mut R, max_branches: usize) -> ImagePlan {
    let n = rng.random_range(1..=max_branches.max(1));
    ImagePlan {
        branches: random_branches(p, rng, n),
        completion: Completion::Rotated(rng.random()),
        completion2: Completion::Rotated(rng.random()),
    }
}

pub fn random_supervenience<R: Rng + ?Sized>(p: &DecisionProblem, rng: &mut R, opts: &SearchOptions) -> SupervenienceRecipe {
    let d = p.macrostate_dim(0);
    let amplitudes: Vec<[f64; 2]> = if opts.probe_orthogonal {
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let mut a = vec![[0.0, 0.0]; d];
        a[0] = [theta.cos(), theta.sin()];
        a
    } else {
        (0..d)
            .map(|_| {
                let z = linalg::random_complex(rng);
                [z.re, z.im]
            })
            .collect()
    };
    let per_reward = p.macrostates_per_reward(0);
    let pick = |rng: &mut R| [rng.random_range(0..p.reward_count()), rng.random_range(0..per_reward)];
    let start = if opts.pin_start { [0, 0] } else { pick(rng) };
    let start2 = if rng.random_bool(0.5) { start } else { pick(rng) };
    SupervenienceRecipe {
        start,
        start2,
        amplitudes,
        u: random_plan(p, rng, opts.max_branches),
        v: random_plan(p, rng, opts.max_branches),
    }
}

/// Random isometry from macrostate `from` onto the whole of macrostate `to`.
fn random_into(p: &DecisionProblem, rng: &mut impl Rng, from: MacrostateId, to: MacrostateId) -> Result<Act> {
    let (src, dst) = (&p.macrostates()[from], &p.macrostates()[to]);
    let d = src.dim;
    let q = linalg::random_unitary(rng, dst.dim);
    let mut m = ComplexMatrix::zeros(p.dim(), d);
    for (i, row) in dst.basis().enumerate() {
        for j in 0..d {
            m.set(row, j, q.get(i, j));
        }
    }
    Act::new(p, Event::singleton(from), dst.stage, m)
}

fn random_macrostate_quadruple(p: &DecisionProblem, rng: &mut ChaCha8Rng) -> Result<Quadruple> {
    let m = random_cells(p, rng, 0, 1)[0];
    let m2 = random_cells(p, rng, 0, 1)[0];
    let psi = random_state_on(p, rng, &[m]);
    let psi2 = random_state_on(p, rng, &[m2]);
    let target1 = random_cells(p, rng, 1, 1)[0];
    let target2 = random_cells(p, rng, 1, 1)[0];
    Ok(Quadruple {
        u: random_into(p, rng, m, target1)?,
        v: random_into(p, rng, m, target2)?,
        u2: random_into(p, rng, m2, target1)?,
        v2: random_into(p, rng, m2, target2)?,
        psi,
        psi2,
    })
}

/// Generates and checks the witness with the given seed.
pub fn run_trial(
    target: Target,
    rule: &dyn Preference,
    p: &DecisionProblem,
    opts: &SearchOptions,
    seed: u64,
) -> Result<Trial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plain = |result: AxiomCheckResult| Trial {
        result: result.with_seed(seed),
        recipe: None,
    };
    match target {
        Target::Ordering => {
            let psi = random_state(p, &mut rng);
            let acts: Vec<Act> = (0..opts.ordering_acts.max(1))
                .map(|_| random_block_act(p, &mut rng, &psi, 1))
                .collect::<Result<_>>()?;
            Ok(plain(check_ordering(rule, p, &acts, &psi)?))
        }
        Target::Diachronic => {
            let recipe = Recipe::Diachronic(random_diachronic(p, &mut rng, opts));
            let result = recipe.check(rule, p)?.with_seed(seed);
            Ok(Trial {
                result,
                recipe: Some(recipe),
            })
        }
        Target::MacrostateIndiff => {
            let q = random_macrostate_quadruple(p, &mut rng)?;
            Ok(plain(check_macrostate_indifference(rule, p, &q)?))
        }
        Target::BranchingIndiff => {
            let m = random_cells(p, &mut rng, 0, 1)[0];
            let psi = random_state_on(p, &mut rng, &[m]);
            let specs: Vec<BranchSpec> = (0..rng.random_range(1..=3))
                .map(|_| {
                    let n = rng.random_range(1..=4);
                    BranchSpec::new(random_weights(&mut rng, n))
                })
                .collect();
            let stage = rng.random_range(1..p.stage_count());
            Ok(plain(check_branching_indifference(rule, p, &psi, m, &specs, stage)?))
        }
        Target::StateSupervenience => {
            let recipe = Recipe::Supervenience(random_supervenience(p, &mut rng, opts));
            let result = recipe.check(rule, p)?.with_seed(seed);
            Ok(Trial {
                result,
                recipe: Some(recipe),
            })
        }
        Target::SolutionContinuity => {
            let (psi, a, b) = random_act_pair(p, &mut rng)?;
            let cont_seed = rng.random();
            Ok(plain(check_solution_continuity(rule, p, &psi, &a, &b, opts.continuity_samples, cont_seed)?))
        }
    }
}
