//! Small serializable descriptions of diachronic and supervenience
//! witnesses, and the greedy shrinker that simplifies them.

use crate::axioms::{check_diachronic, check_state_supervenience, AxiomCheckResult, CheckOutcome, Quadruple};
use crate::construct::{
    glue_over, make_block_act, make_branching, make_identity_embedding, make_reward_act, Allocator, Branch,
    BranchSpec, Completion,
};
use crate::error::{Error, Result};
use crate::linalg::ComplexVector;
use crate::model::{branch_state, Act, DecisionProblem, Event, MacrostateId, RewardId};
use crate::rules::Preference;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// What happens on one branch after the first act.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Continuation {
    /// Advance to the next stage unchanged.
    Identity,
    /// Advance unchanged, `skip` stages further than the identity would.
    Advance { skip: usize },
    /// A P-branching within the branch's reward.
    Branch { weights: Vec<f64> },
    /// Move the branch into a fresh macrostate of another reward.
    Reward { reward: RewardId },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiachronicBranch {
    pub reward: RewardId,
    pub weight: f64,
    pub v1: Continuation,
    pub v2: Continuation,
}

/// `U` splits a basis state into the listed branches; `V1` and `V2` apply
/// each branch's continuations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiachronicRecipe {
    pub start_reward: RewardId,
    pub branches: Vec<DiachronicBranch>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiachronicInstance {
    pub psi: ComplexVector,
    pub u: Act,
    pub v1: Act,
    pub v2: Act,
}

const CONTINUATION_STAGE: usize = 2;

fn build_continuation(
    p: &DecisionProblem,
    alloc: &mut Allocator,
    chi: &ComplexVector,
    cell: MacrostateId,
    c: &Continuation,
) -> Result<Act> {
    match c {
        Continuation::Identity => make_identity_embedding(p, alloc, &Event::singleton(cell), CONTINUATION_STAGE),
        Continuation::Advance { skip } => {
            make_identity_embedding(p, alloc, &Event::singleton(cell), CONTINUATION_STAGE + skip)
        }
        Continuation::Branch { weights } => {
            make_branching(p, alloc, chi, cell, &BranchSpec::new(weights.clone()), CONTINUATION_STAGE)
        }
        Continuation::Reward { reward } => make_reward_act(p, alloc, cell, *reward, CONTINUATION_STAGE),
    }
}

impl DiachronicRecipe {
    pub fn build(&self, p: &DecisionProblem) -> Result<DiachronicInstance> {
        let m0 = p.macrostate_at(self.start_reward, 0, 0)?.id;
        let mut local = vec![Complex64::new(0.0, 0.0); p.macrostate_dim(0)];
        local[0] = Complex64::new(1.0, 0.0);
        let psi = p.state_in(m0, &local)?;
        let mut alloc = Allocator::avoiding(p, &Event::singleton(m0))?;
        // block acts allocate their targets in branch order
        let mut preview = alloc.clone();
        let cells: Vec<MacrostateId> = self
            .branches
            .iter()
            .map(|b| preview.allocate(p, b.reward, 1))
            .collect::<Result<_>>()?;
        let branches: Vec<Branch> = self.branches.iter().map(|b| Branch::new(b.reward, b.weight)).collect();
        let u = make_block_act(p, &mut alloc, &psi, m0, &branches, Completion::Canonical, 1)?;
        let img = u.image(p, &psi)?;
        let outcome = u.outcome_event(p);
        let continuation = |pick: fn(&DiachronicBranch) -> &Continuation| -> Result<Act> {
            let mut alloc = alloc.clone();
            glue_over(p, &mut alloc, &outcome, |alloc, m| match cells.iter().position(|&c| c == m) {
                Some(i) => {
                    let chi = branch_state(p, &img, &Event::singleton(m))
                        .ok_or_else(|| Error::Validation(format!("branch {i} has zero weight")))?;
                    build_continuation(p, alloc, &chi, m, pick(&self.branches[i]))
                }
                None => make_identity_embedding(p, alloc, &Event::singleton(m), CONTINUATION_STAGE),
            })
        };
        let v1 = continuation(|b| &b.v1)?;
        let v2 = continuation(|b| &b.v2)?;
        Ok(DiachronicInstance { psi, u, v1, v2 })
    }

    pub fn check(&self, rule: &dyn Preference, p: &DecisionProblem) -> Result<AxiomCheckResult> {
        let w = self.build(p)?;
        check_diachronic(rule, p, &w.psi, &w.u, &w.v1, &w.v2)
    }

    fn candidates(&self) -> Vec<DiachronicRecipe> {
        let mut out = Vec::new();
        let weights: Vec<f64> = self.branches.iter().map(|b| b.weight).collect();
        if self.branches.len() > 1 {
            for i in 0..self.branches.len() {
                let mut r = self.clone();
                r.branches.remove(i);
                let kept = 1.0 - weights[i];
                for b in &mut r.branches {
                    b.weight /= kept;
                }
                out.push(r);
            }
        }
        for i in 0..self.branches.len() {
            for which in 0..2 {
                let c = if which == 0 { &self.branches[i].v1 } else { &self.branches[i].v2 };
                for simpler in simpler_continuations(c) {
                    let mut r = self.clone();
                    *(if which == 0 { &mut r.branches[i].v1 } else { &mut r.branches[i].v2 }) = simpler;
                    out.push(r);
                }
            }
        }
        if let Some(rounded) = round_weights(&weights) {
            for w in rounded {
                let mut r = self.clone();
                for (b, x) in r.branches.iter_mut().zip(w) {
                    b.weight = x;
                }
                out.push(r);
            }
        }
        out
    }
}

fn simpler_continuations(c: &Continuation) -> Vec<Continuation> {
    match c {
        Continuation::Identity => vec![],
        Continuation::Advance { .. } => vec![Continuation::Identity],
        Continuation::Reward { .. } => vec![Continuation::Identity],
        Continuation::Branch { weights } => {
            let mut out = vec![Continuation::Identity];
            if weights.len() > 1 {
                for i in 0..weights.len() {
                    let kept = 1.0 - weights[i];
                    let w: Vec<f64> = weights
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, x)| x / kept)
                        .collect();
                    out.push(Continuation::Branch { weights: w });
                }
            }
            if let Some(rounded) = round_weights(weights) {
                out.extend(rounded.into_iter().map(|weights| Continuation::Branch { weights }));
            }
            out
        }
    }
}

/// The closest fraction a/q with q ≤ `max_q`, preferring small q.
pub fn round_rational(x: f64, max_q: u32) -> f64 {
    let mut best = x.round();
    let mut err = (x - best).abs();
    for q in 2..=max_q {
        let qf = q as f64;
        let cand = (x * qf).round() / qf;
        let e = (x - cand).abs();
        if e < err {
            best = cand;
            err = e;
        }
    }
    best
}

const MAX_DENOMINATOR: u32 = 12;

/// One candidate per weight (except the last, which absorbs the
/// difference): that weight rounded to a small rational. None if nothing
/// would change.
fn round_weights(weights: &[f64]) -> Option<Vec<Vec<f64>>> {
    let n = weights.len();
    if n < 2 {
        return None;
    }
    let mut out = Vec::new();
    for i in 0..n - 1 {
        let r = round_rational(weights[i], MAX_DENOMINATOR);
        if r == weights[i] || r <= 0.0 {
            continue;
        }
        let mut w = weights.to_vec();
        w[i] = r;
        let rest: f64 = w[..n - 1].iter().sum();
        if rest >= 1.0 {
            continue;
        }
        w[n - 1] = 1.0 - rest;
        out.push(w);
    }
    (!out.is_empty()).then_some(out)
}

/// Branches and completions for one of the two acts of a supervenience
/// quadruple; `completion2` is used for the primed act.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImagePlan {
    pub branches: Vec<Branch>,
    pub completion: Completion,
    pub completion2: Completion,
}

/// ψ in macrostate `start` and ψ′ in `start2` share local amplitudes; `U`,
/// `U′` (and `V`, `V′`) send them to the same image through block acts
/// that differ only in their completions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervenienceRecipe {
    /// (reward, ordinal) of the first-stage macrostate holding ψ.
    pub start: [usize; 2],
    pub start2: [usize; 2],
    /// Local amplitudes as [re, im]; normalized on build.
    pub amplitudes: Vec<[f64; 2]>,
    pub u: ImagePlan,
    pub v: ImagePlan,
}

impl SupervenienceRecipe {
    pub fn build(&self, p: &DecisionProblem) -> Result<Quadruple> {
        let m = p.macrostate_at(self.start[0], 0, self.start[1])?.id;
        let m2 = p.macrostate_at(self.start2[0], 0, self.start2[1])?.id;
        let local: Vec<Complex64> = self.amplitudes.iter().map(|[re, im]| Complex64::new(*re, *im)).collect();
        let norm = local.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::Validation("amplitudes are all zero".into()));
        }
        let local: Vec<Complex64> = local.iter().map(|z| z / norm).collect();
        let psi = p.state_in(m, &local)?;
        let psi2 = p.state_in(m2, &local)?;
        let act = |state: &ComplexVector, at: MacrostateId, plan: &ImagePlan, completion: Completion| {
            let mut alloc = Allocator::avoiding(p, &Event::singleton(at))?;
            make_block_act(p, &mut alloc, state, at, &plan.branches, completion, 1)
        };
        Ok(Quadruple {
            u: act(&psi, m, &self.u, self.u.completion)?,
            v: act(&psi, m, &self.v, self.v.completion)?,
            u2: act(&psi2, m2, &self.u, self.u.completion2)?,
            v2: act(&psi2, m2, &self.v, self.v.completion2)?,
            psi,
            psi2,
        })
    }

    pub fn check(&self, rule: &dyn Preference, p: &DecisionProblem) -> Result<AxiomCheckResult> {
        check_state_supervenience(rule, p, &self.build(p)?)
    }

    fn candidates(&self) -> Vec<SupervenienceRecipe> {
        let mut out = Vec::new();
        for which in 0..2 {
            let plan = if which == 0 { &self.u } else { &self.v };
            let replace = |plan: ImagePlan| {
                let mut r = self.clone();
                *(if which == 0 { &mut r.u } else { &mut r.v }) = plan;
                r
            };
            let n = plan.branches.len();
            if n > 1 {
                for i in 0..n {
                    let mut q = plan.clone();
                    let kept = 1.0 - q.branches.remove(i).weight;
                    for b in &mut q.branches {
                        b.weight /= kept;
                    }
                    out.push(replace(q));
                }
            }
            for i in 0..n {
                if plan.branches[i].phase != 0.0 {
                    let mut q = plan.clone();
                    q.branches[i].phase = 0.0;
                    out.push(replace(q));
                }
            }
            let weights: Vec<f64> = plan.branches.iter().map(|b| b.weight).collect();
            for w in round_weights(&weights).unwrap_or_default() {
                let mut q = plan.clone();
                for (b, x) in q.branches.iter_mut().zip(w) {
                    b.weight = x;
                }
                out.push(replace(q));
            }
            for second in [false, true] {
                let c = if second { plan.completion2 } else { plan.completion };
                if c != Completion::Canonical {
                    let mut q = plan.clone();
                    *(if second { &mut q.completion2 } else { &mut q.completion }) = Completion::Canonical;
                    out.push(replace(q));
                }
            }
        }
        if self.start2 != self.start {
            let mut r = self.clone();
            r.start2 = r.start;
            out.push(r);
        }
        let nonzero = self.amplitudes.iter().filter(|[re, im]| *re != 0.0 || *im != 0.0).count();
        for i in 0..self.amplitudes.len() {
            for part in 0..2 {
                let x = self.amplitudes[i][part];
                if x == 0.0 {
                    continue;
                }
                let whole_entry = self.amplitudes[i][1 - part] == 0.0;
                if !whole_entry || nonzero > 1 {
                    let mut r = self.clone();
                    r.amplitudes[i][part] = 0.0;
                    out.push(r);
                }
                let rounded = round_rational(x, MAX_DENOMINATOR);
                if rounded != x && rounded != 0.0 {
                    let mut r = self.clone();
                    r.amplitudes[i][part] = rounded;
                    out.push(r);
                }
            }
        }
        out
    }
}

/// A witness recipe of either kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "recipe", rename_all = "snake_case")]
pub enum Recipe {
    Diachronic(DiachronicRecipe),
    Supervenience(SupervenienceRecipe),
}

impl Recipe {
    pub fn check(&self, rule: &dyn Preference, p: &DecisionProblem) -> Result<AxiomCheckResult> {
        match self {
            Recipe::Diachronic(r) => r.check(rule, p),
            Recipe::Supervenience(r) => r.check(rule, p),
        }
    }

    pub fn candidates(&self) -> Vec<Recipe> {
        match self {
            Recipe::Diachronic(r) => r.candidates().into_iter().map(Recipe::Diachronic).collect(),
            Recipe::Supervenience(r) => r.candidates().into_iter().map(Recipe::Supervenience).collect(),
        }
    }

    /// Total number of first-act branches.
    pub fn branch_count(&self) -> usize {
        match self {
            Recipe::Diachronic(r) => r.branches.len(),
            Recipe::Supervenience(r) => r.u.branches.len() + r.v.branches.len(),
        }
    }
}

/// A shrunk witness and the number of accepted simplification steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Shrunk {
    pub recipe: Recipe,
    pub result: AxiomCheckResult,
    pub steps: usize,
}

const MAX_SHRINK_STEPS: usize = 200;

/// Greedily applies the first simplification that keeps a failure with
/// margin at least 10·tie_eps, until none does.
pub fn shrink_recipe(rule: &dyn Preference, p: &DecisionProblem, recipe: &Recipe, result: &AxiomCheckResult) -> Shrunk {
    let floor = 10.0 * p.tolerance().tie_eps;
    let mut current = Shrunk {
        recipe: recipe.clone(),
        result: result.clone(),
        steps: 0,
    };
    'outer: while current.steps < MAX_SHRINK_STEPS {
        for cand in current.recipe.candidates() {
            if let Ok(r) = cand.check(rule, p) {
                if r.outcome == CheckOutcome::Fail && r.margin >= floor {
                    current = Shrunk {
                        recipe: cand,
                        result: r,
                        steps: current.steps + 1,
                    };
                    continue 'outer;
                }
            }
        }
        break;
    }
    current
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axioms::Axiom;
    use crate::model::ProblemConfig;
    use crate::rules::{MassMap, PreferenceRule, UtilityFunction};

    fn problem(dim: usize) -> DecisionProblem {
        DecisionProblem::new(ProblemConfig::new(&["reward", "none"], &[4, 16, 16, 16]).with_macrostate_dim(dim)).unwrap()
    }

    pub(crate) fn a1a2() -> DiachronicRecipe {
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

    #[test]
    fn rational_rounding() {
        assert_eq!(round_rational(0.4999999, 12), 0.5);
        assert_eq!(round_rational(0.3333, 12), 1.0 / 3.0);
        assert_eq!(round_rational(0.0, 12), 0.0);
        assert_eq!(round_weights(&[0.5, 0.5]), None);
        assert_eq!(round_weights(&[0.4999999, 0.5000001]), Some(vec![vec![0.5, 0.5]]));
    }

    #[test]
    fn a1a2_recipe_violates_for_branch_count() {
        let p = problem(1);
        let rule = PreferenceRule::branch_count(UtilityFunction::new(vec![1.0, 0.0]));
        let r = a1a2().check(&rule, &p).unwrap();
        assert_eq!(r.axiom, Axiom::DiachronicI);
        assert!(!r.passed);
        assert!((r.margin - 1.0 / 6.0).abs() < 1e-12);
        let born = PreferenceRule::born(UtilityFunction::new(vec![1.0, 0.0]));
        assert!(a1a2().check(&born, &p).unwrap().passed);
    }

    #[test]
    fn a1a2_is_a_shrink_fixed_point() {
        let p = problem(1);
        let rule = PreferenceRule::branch_count(UtilityFunction::new(vec![1.0, 0.0]));
        let recipe = Recipe::Diachronic(a1a2());
        let r = recipe.check(&rule, &p).unwrap();
        let s = shrink_recipe(&rule, &p, &recipe, &r);
        assert_eq!(s.steps, 0);
        assert_eq!(s.recipe, recipe);
    }

    #[test]
    fn near_half_weight_rounds_when_violation_persists() {
        let p = problem(1);
        let rule = PreferenceRule::branch_count(UtilityFunction::new(vec![1.0, 0.0]));
        let mut recipe = a1a2();
        recipe.branches[0].weight = 0.4999999;
        recipe.branches[1].weight = 0.5000001;
        let recipe = Recipe::Diachronic(recipe);
        let r = recipe.check(&rule, &p).unwrap();
        let s = shrink_recipe(&rule, &p, &recipe, &r);
        let Recipe::Diachronic(d) = &s.recipe else { panic!() };
        assert_eq!(d.branches[0].weight, 0.5);
        assert_eq!(d.branches[1].weight, 0.5);
        assert!(s.steps >= 1);
    }

    #[test]
    fn fatness_shrinks_to_two_branches() {
        let p = problem(1);
        let mut mass = MassMap::default();
        for m in p.macrostates() {
            mass.by_macrostate.insert(m.id, 50.0 + (m.id * 37 % 51) as f64);
        }
        let rule = PreferenceRule::fatness(UtilityFunction::new(vec![1.0, 0.0]), mass);
        let branch = |reward, v2| DiachronicBranch {
            reward,
            weight: 1.0 / 6.0,
            v1: Continuation::Identity,
            v2,
        };
        let recipe = Recipe::Diachronic(DiachronicRecipe {
            start_reward: 0,
            branches: vec![
                branch(0, Continuation::Branch { weights: vec![0.3, 0.7] }),
                branch(1, Continuation::Identity),
                branch(0, Continuation::Advance { skip: 1 }),
                branch(1, Continuation::Branch { weights: vec![0.5, 0.5] }),
                branch(0, Continuation::Identity),
                branch(1, Continuation::Identity),
            ],
        });
        let r = recipe.check(&rule, &p).unwrap();
        assert!(!r.passed);
        let s = shrink_recipe(&rule, &p, &recipe, &r);
        assert_eq!(s.recipe.branch_count(), 2);
        assert!(s.result.margin >= 10.0 * p.tolerance().tie_eps);
        assert!(!s.recipe.check(&rule, &p).unwrap().passed);
    }

    #[test]
    fn supervenience_recipe_has_equal_images() {
        let p = problem(2);
        let recipe = SupervenienceRecipe {
            start: [0, 0],
            start2: [1, 1],
            amplitudes: vec![[0.6, 0.1], [0.3, -0.7]],
            u: ImagePlan {
                branches: vec![Branch::new(0, 0.25), Branch::new(1, 0.75)],
                completion: Completion::Rotated(1),
                completion2: Completion::Rotated(2),
            },
            v: ImagePlan {
                branches: vec![Branch::new(1, 1.0)],
                completion: Completion::Canonical,
                completion2: Completion::Rotated(3),
            },
        };
        let q = recipe.build(&p).unwrap();
        let gap = q.u.image(&p, &q.psi).unwrap().distance(&q.u2.image(&p, &q.psi2).unwrap()).unwrap();
        assert!(gap < 1e-12);
        let born = PreferenceRule::born(UtilityFunction::new(vec![1.0, 0.0]));
        assert!(recipe.check(&born, &p).unwrap().passed);
    }

    #[test]
    fn recipes_round_trip_through_json() {
        let r = Recipe::Diachronic(a1a2());
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"kind\":\"diachronic\""));
        assert_eq!(serde_json::from_str::<Recipe>(&s).unwrap(), r);
    }
}
