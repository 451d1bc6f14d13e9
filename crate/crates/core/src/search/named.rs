//! Built-in scenarios for the rival rules and the Born rule.

use super::recipe::{Continuation, DiachronicBranch, DiachronicRecipe, Recipe};
use super::{Expectation, Scenario, SearchOptions, Target, DEFAULT_BUDGET};
use crate::model::{DecisionProblem, ProblemConfig};
use crate::rules::{Amplitude, MassMap, RuleConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

pub const NAMES: [&str; 5] = [
    "branch-counting-A1A2",
    "born-full-suite",
    "descriptive-supervenience",
    "fake-state-supervenience",
    "fatness-diet",
];

const DEFAULT_SEED: u64 = 1;

fn utility(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// A mass in [50, 100] kg for every macrostate of the problem.
pub fn fatness_masses(p: &DecisionProblem, seed: u64) -> MassMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    MassMap {
        default: None,
        by_macrostate: p.macrostates().iter().map(|m| (m.id, rng.random_range(50.0..=100.0))).collect(),
    }
}

fn a1a2() -> DiachronicRecipe {
    DiachronicRecipe {
        start_reward: 1,
        branches: vec![
            DiachronicBranch {
                reward: 0,
                weight: 0.5,
                v1: Continuation::Identity,
                v2: Continuation::Branch { weights: vec![0.5, 0.5] },
            },
            DiachronicBranch {
                reward: 1,
                weight: 0.5,
                v1: Continuation::Identity,
                v2: Continuation::Identity,
            },
        ],
    }
}

/// First global basis index of macrostate (reward 0, stage 0, ordinal 0).
fn pinned_basis(p: &DecisionProblem) -> usize {
    p.macrostate_at(0, 0, 0).expect("nonempty problem").basis().start
}

/// The named scenario, with optional seed and budget overrides.
pub fn named(name: &str, seed: Option<u64>, budget: Option<usize>) -> Option<Scenario> {
    let seed = seed.unwrap_or(DEFAULT_SEED);
    let budget = budget.unwrap_or(DEFAULT_BUDGET);
    let two = utility(&[("reward", 1.0), ("none", 0.0)]);
    let s = match name {
        "branch-counting-A1A2" => Scenario {
            name: name.into(),
            description: "measurement then reward, with and without a second measurement on the rewarded branch".into(),
            problem: ProblemConfig::new(&["reward", "none"], &[4, 8, 8, 8]),
            rule: RuleConfig::BranchCount { utility: two },
            targets: vec![Target::Diachronic],
            expect: Expectation::Violation,
            fixed: vec![Recipe::Diachronic(a1a2())],
            options: SearchOptions::default(),
            seed,
            budget: 1,
            shrink: true,
        },
        "born-full-suite" => Scenario {
            name: name.into(),
            description: "randomized witnesses for every axiom against the Born rule".into(),
            problem: ProblemConfig::new(&["reward", "partial", "none"], &[16, 32, 32, 32]).with_macrostate_dim(2),
            rule: RuleConfig::Born {
                utility: utility(&[("reward", 1.0), ("partial", 0.4), ("none", 0.0)]),
            },
            targets: Target::ALL.to_vec(),
            expect: Expectation::Pass,
            fixed: vec![],
            options: SearchOptions::default(),
            seed,
            budget,
            shrink: true,
        },
        "fatness-diet" => {
            let problem = ProblemConfig::new(&["reward", "none"], &[4, 16, 16, 16]);
            let p = DecisionProblem::new(problem.clone()).expect("valid problem");
            Scenario {
                name: name.into(),
                description: "branch weights scaled by a seeded agent mass per macrostate".into(),
                problem,
                rule: RuleConfig::Fatness {
                    utility: two,
                    mass: fatness_masses(&p, seed),
                },
                targets: vec![Target::Diachronic],
                expect: Expectation::Violation,
                fixed: vec![],
                options: SearchOptions {
                    max_branches: 6,
                    ..SearchOptions::default()
                },
                seed,
                budget,
                shrink: true,
            }
        }
        "fake-state-supervenience" => {
            let problem = ProblemConfig::new(&["reward", "none"], &[8, 16, 16]).with_macrostate_dim(2);
            let b0 = pinned_basis(&DecisionProblem::new(problem.clone()).expect("valid problem"));
            Scenario {
                name: name.into(),
                description: "expected utility computed on a state with two microstates swapped".into(),
                problem,
                rule: RuleConfig::FakeState {
                    utility: two,
                    substitute: vec![[b0, b0 + 1]],
                },
                targets: vec![Target::StateSupervenience],
                expect: Expectation::Violation,
                fixed: vec![],
                options: SearchOptions {
                    pin_start: true,
                    ..SearchOptions::default()
                },
                seed,
                budget,
                shrink: true,
            }
        }
        "descriptive-supervenience" => {
            let problem = ProblemConfig::new(&["reward", "none"], &[8, 16, 16]).with_macrostate_dim(2);
            let b0 = pinned_basis(&DecisionProblem::new(problem.clone()).expect("valid problem"));
            Scenario {
                name: name.into(),
                description: "expected utility plus a penalty on what the act does to a fixed probe vector".into(),
                problem,
                rule: RuleConfig::Descriptive {
                    utility: two,
                    probe: vec![Amplitude {
                        index: b0 + 1,
                        re: 1.0,
                        im: 0.0,
                    }],
                    penalty: 1.0,
                },
                targets: vec![Target::StateSupervenience],
                expect: Expectation::Violation,
                fixed: vec![],
                options: SearchOptions {
                    pin_start: true,
                    probe_orthogonal: true,
                    ..SearchOptions::default()
                },
                seed,
                budget,
                shrink: true,
            }
        }
        _ => return None,
    };
    Some(s)
}
