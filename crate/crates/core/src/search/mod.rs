//! Counterexample search: seeded witness streams per (rule, axiom) cell,
//! greedy shrinking of failures, replayable reports, and the named
//! rival-rule scenarios.

mod named;
mod recipe;
mod witness;

pub use named::{fatness_masses, named, NAMES};
pub use recipe::{
    round_rational, shrink_recipe, Continuation, DiachronicBranch, DiachronicInstance, DiachronicRecipe, ImagePlan,
    Recipe, Shrunk, SupervenienceRecipe,
};
pub use witness::{random_diachronic, random_supervenience, run_trial, SearchOptions, Target, Trial};

use crate::axioms::{replay_witness, Axiom, CheckOutcome, Witness};
use crate::error::{Error, Result};
use crate::model::{DecisionProblem, ProblemConfig};
use crate::rules::{PreferenceRule, RuleConfig};
use crate::theorem::sub_seed;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const DEFAULT_BUDGET: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    Violation,
    Pass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Violation,
    Pass,
    UnexpectedPass,
    UnexpectedViolation,
}

fn yes() -> bool {
    true
}

/// A self-contained search: problem, rule, target cells and expectation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub problem: ProblemConfig,
    pub rule: RuleConfig,
    pub targets: Vec<Target>,
    pub expect: Expectation,
    /// Fixed witnesses, checked instead of generated ones.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fixed: Vec<Recipe>,
    #[serde(default)]
    pub options: SearchOptions,
    pub seed: u64,
    pub budget: usize,
    #[serde(default = "yes")]
    pub shrink: bool,
}

/// Counts for one (rule, target) cell. Witness `i` uses seed
/// `sub_seed(seed, i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub target: Target,
    pub seed: u64,
    pub witnesses: usize,
    pub violations: usize,
    pub inconclusive: usize,
    pub errors: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_error: Option<String>,
}

/// A witnessed axiom violation, replayable from its own contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub scenario: String,
    pub problem: ProblemConfig,
    pub rule: RuleConfig,
    pub target: Target,
    pub axiom: Axiom,
    pub margin: f64,
    pub witness: Witness,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recipe: Option<Recipe>,
    pub shrink_steps: usize,
    /// Seed of the witness as generated, before shrinking.
    pub seed: u64,
    pub witness_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub rule: String,
    pub expected: Expectation,
    pub status: Status,
    pub seed: u64,
    pub budget: usize,
    pub cells: Vec<CellSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violation: Option<ViolationReport>,
}

impl ScenarioReport {
    pub fn expectation_met(&self) -> bool {
        matches!(self.status, Status::Violation | Status::Pass)
    }

    pub fn witnesses(&self) -> usize {
        self.cells.iter().map(|c| c.witnesses).sum()
    }
}

struct Found {
    index: usize,
    seed: u64,
    trial: Trial,
}

fn target_seed(seed: u64, t: Target) -> u64 {
    sub_seed(seed, 1 + t as u64)
}

fn run_cell(s: &Scenario, p: &DecisionProblem, rule: &PreferenceRule, target: Target) -> (CellSummary, Option<Found>) {
    let seed = target_seed(s.seed, target);
    let mut summary = CellSummary {
        target,
        seed,
        witnesses: 0,
        violations: 0,
        inconclusive: 0,
        errors: 0,
        first_error: None,
    };
    let fixed: Vec<&Recipe> = s.fixed.iter().filter(|r| Target::of_recipe(r) == target).collect();
    let count = if s.fixed.is_empty() { s.budget } else { fixed.len() };
    let mut first = None;
    for i in 0..count {
        let wseed = sub_seed(seed, i as u64);
        let trial = if s.fixed.is_empty() {
            run_trial(target, rule, p, &s.options, wseed)
        } else {
            fixed[i].check(rule, p).map(|result| Trial {
                result,
                recipe: Some(fixed[i].clone()),
            })
        };
        let trial = match trial {
            Ok(t) => t,
            Err(e) => {
                summary.errors += 1;
                summary.first_error.get_or_insert_with(|| e.to_string());
                continue;
            }
        };
        summary.witnesses += 1;
        match trial.result.outcome {
            CheckOutcome::Inconclusive => summary.inconclusive += 1,
            CheckOutcome::Pass => {}
            CheckOutcome::Fail => {
                summary.violations += 1;
                if first.is_none() {
                    first = Some(Found {
                        index: i,
                        seed: wseed,
                        trial,
                    });
                }
                if s.expect == Expectation::Violation {
                    break;
                }
            }
        }
    }
    (summary, first)
}

/// Runs every target cell of the scenario (cells in parallel, each cell
/// sequential over its seeded stream) and reports the first violation
/// found, shrunk if requested.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioReport> {
    let p = DecisionProblem::new(s.problem.clone())?;
    let rule = PreferenceRule::from_config(&p, &s.rule)?;
    if s.targets.is_empty() {
        return Err(Error::Config(format!("scenario {} has no targets", s.name)));
    }
    let results: Vec<(CellSummary, Option<Found>)> =
        s.targets.par_iter().map(|&t| run_cell(s, &p, &rule, t)).collect();
    let mut cells = Vec::with_capacity(results.len());
    let mut violation = None;
    for (summary, found) in results {
        if violation.is_none() {
            if let Some(f) = found {
                let witness = f.trial.result.witness.clone().expect("failures carry witnesses");
                let report = ViolationReport {
                    scenario: s.name.clone(),
                    problem: s.problem.clone(),
                    rule: s.rule.clone(),
                    target: summary.target,
                    axiom: f.trial.result.axiom,
                    margin: f.trial.result.margin,
                    witness,
                    recipe: f.trial.recipe,
                    shrink_steps: 0,
                    seed: f.seed,
                    witness_index: f.index,
                };
                violation = Some(if s.shrink { shrink(&report)? } else { report });
            }
        }
        cells.push(summary);
    }
    let status = match (s.expect, violation.is_some()) {
        (Expectation::Violation, true) => Status::Violation,
        (Expectation::Violation, false) => Status::UnexpectedPass,
        (Expectation::Pass, false) => Status::Pass,
        (Expectation::Pass, true) => Status::UnexpectedViolation,
    };
    Ok(ScenarioReport {
        scenario: s.name.clone(),
        rule: s.rule.kind().to_string(),
        expected: s.expect,
        status,
        seed: s.seed,
        budget: s.budget,
        cells,
        violation,
    })
}

/// Simplifies a report's recipe while the violation persists with margin
/// at least 10·tie_eps. Reports without a recipe are returned unchanged.
pub fn shrink(report: &ViolationReport) -> Result<ViolationReport> {
    let Some(recipe) = &report.recipe else {
        return Ok(report.clone());
    };
    let p = DecisionProblem::new(report.problem.clone())?;
    let rule = PreferenceRule::from_config(&p, &report.rule)?;
    let start = recipe.check(&rule, &p)?;
    if start.outcome != CheckOutcome::Fail {
        return Err(Error::Witness("the recipe does not reproduce a violation".into()));
    }
    let shrunk = shrink_recipe(&rule, &p, recipe, &start);
    Ok(ViolationReport {
        axiom: shrunk.result.axiom,
        margin: shrunk.result.margin,
        witness: shrunk.result.witness.clone().expect("failures carry witnesses"),
        recipe: Some(shrunk.recipe),
        shrink_steps: report.shrink_steps + shrunk.steps,
        ..report.clone()
    })
}

/// Result of re-executing a recorded witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayOutcome {
    pub reproduced: bool,
    pub recorded_axiom: Axiom,
    pub replayed_axiom: Axiom,
    pub recorded_margin: f64,
    pub replayed_margin: f64,
    pub replayed_failure: bool,
}

/// Re-runs the witness; reproduced iff it fails again on the same axiom
/// with a bit-identical margin.
pub fn replay(report: &ViolationReport) -> Result<ReplayOutcome> {
    let p = DecisionProblem::new(report.problem.clone())?;
    let rule = PreferenceRule::from_config(&p, &report.rule)?;
    let r = replay_witness(&rule, &p, &report.witness)?;
    let failed = r.outcome == CheckOutcome::Fail;
    Ok(ReplayOutcome {
        reproduced: failed && r.axiom == report.axiom && r.margin.to_bits() == report.margin.to_bits(),
        recorded_axiom: report.axiom,
        replayed_axiom: r.axiom,
        recorded_margin: report.margin,
        replayed_margin: r.margin,
        replayed_failure: failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch_counting_scenario() {
        let s = named("branch-counting-A1A2", None, None).unwrap();
        let r = run_scenario(&s).unwrap();
        assert_eq!(r.status, Status::Violation);
        let v = r.violation.as_ref().unwrap();
        assert_eq!(v.axiom, Axiom::DiachronicI);
        assert_eq!(v.shrink_steps, 0);
        assert!((v.margin - 1.0 / 6.0).abs() < 1e-12);
        assert!(replay(v).unwrap().reproduced);
    }

    #[test]
    fn tampered_margin_does_not_reproduce() {
        let s = named("branch-counting-A1A2", None, None).unwrap();
        let mut v = run_scenario(&s).unwrap().violation.unwrap();
        v.margin += 1e-3;
        let out = replay(&v).unwrap();
        assert!(!out.reproduced && out.replayed_failure);
    }

    #[test]
    fn fatness_scenario_finds_and_shrinks() {
        let s = named("fatness-diet", None, Some(200)).unwrap();
        let r = run_scenario(&s).unwrap();
        assert_eq!(r.status, Status::Violation, "{r:?}");
        let v = r.violation.unwrap();
        assert!(v.recipe.as_ref().unwrap().branch_count() <= 3);
        assert!(v.margin >= 10.0 * s.problem.tolerances.tie_eps);
        assert!(replay(&v).unwrap().reproduced);
    }

    #[test]
    fn supervenience_scenarios_find_violations() {
        for name in ["fake-state-supervenience", "descriptive-supervenience"] {
            let s = named(name, None, Some(500)).unwrap();
            let r = run_scenario(&s).unwrap();
            assert_eq!(r.status, Status::Violation, "{name}: {r:?}");
            let v = r.violation.unwrap();
            assert_eq!(v.axiom, Axiom::StateSupervenience);
            assert!(replay(&v).unwrap().reproduced);
            let json = serde_json::to_string(&v).unwrap();
            let back: ViolationReport = serde_json::from_str(&json).unwrap();
            assert!(replay(&back).unwrap().reproduced);
        }
    }

    #[test]
    fn born_suite_small_budget_passes() {
        let s = named("born-full-suite", Some(7), Some(20)).unwrap();
        let r = run_scenario(&s).unwrap();
        assert_eq!(r.status, Status::Pass, "{r:?}");
        for c in &r.cells {
            assert_eq!(c.errors, 0, "{c:?}");
            assert_eq!(c.witnesses, 20);
        }
    }

    #[test]
    fn unexpected_pass_is_flagged() {
        let mut s = named("born-full-suite", Some(1), Some(5)).unwrap();
        s.expect = Expectation::Violation;
        s.targets = vec![Target::Diachronic];
        assert_eq!(run_scenario(&s).unwrap().status, Status::UnexpectedPass);
    }

    #[test]
    fn scenario_runs_are_deterministic() {
        let s = named("fake-state-supervenience", Some(3), Some(100)).unwrap();
        let a = serde_json::to_string(&run_scenario(&s).unwrap()).unwrap();
        let b = serde_json::to_string(&run_scenario(&s).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
