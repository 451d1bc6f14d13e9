//! The built-in worked examples.

use crate::config::{builtin, Overrides};
use crate::table::{tag, Table};
use anyhow::{anyhow, Result};
use branchwise_core::axioms::{check_diachronic, replay_witness, CheckOutcome};
use branchwise_core::construct::{glue, make_erasure_pair, make_reward_act, ActFunction, Allocator};
use branchwise_core::model::{branch_state, macrostate_weights, Act, DecisionProblem, Event, ProblemConfig};
use branchwise_core::rules::{Preference, PreferenceRule, UtilityFunction, Verdict};
use branchwise_core::search::{self, run_scenario, Continuation, DiachronicBranch, DiachronicRecipe, ScenarioReport};
use branchwise_core::theorem::build_equivalence_chain;
use clap::ValueEnum;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Demo {
    #[value(name = "games-AB")]
    GamesAb,
    #[value(name = "games-CD")]
    GamesCd,
    #[value(name = "branch-count-A1A2")]
    BranchCountA1a2,
    #[value(name = "fatness-diet")]
    FatnessDiet,
    #[value(name = "fake-state")]
    FakeState,
}

impl Demo {
    pub fn name(self) -> &'static str {
        match self {
            Demo::GamesAb => "games-AB",
            Demo::GamesCd => "games-CD",
            Demo::BranchCountA1a2 => "branch-count-A1A2",
            Demo::FatnessDiet => "fatness-diet",
            Demo::FakeState => "fake-state",
        }
    }
}

pub struct DemoOutput {
    pub results: Value,
    pub table: Table,
    pub passed: bool,
}

const REWARD: usize = 0;
const NONE: usize = 1;
const GAP: f64 = 1e-9;

fn two_rewards(o: &Overrides) -> Result<DecisionProblem> {
    let mut cfg = ProblemConfig::new(&["reward", "none"], &[4, 8, 8, 8]);
    o.apply(&mut cfg);
    Ok(DecisionProblem::new(cfg)?)
}

fn born() -> PreferenceRule {
    PreferenceRule::born(UtilityFunction::new(vec![1.0, 0.0]))
}

fn cell(p: &DecisionProblem, ordinal: usize) -> Result<usize> {
    Ok(p.macrostate_at(NONE, 0, ordinal)?.id)
}

/// A game paying on one of two measurement outcomes.
fn game(p: &DecisionProblem, pays: &[(usize, usize)]) -> Result<Act> {
    let mut alloc = Allocator::new(p);
    let parts = pays
        .iter()
        .map(|&(m, r)| make_reward_act(p, &mut alloc, m, r, 1))
        .collect::<branchwise_core::Result<Vec<_>>>()?;
    Ok(glue(p, &mut alloc, &ActFunction::new(parts))?)
}

#[derive(Serialize)]
struct AbCase {
    alpha: [f64; 2],
    beta: [f64; 2],
    erased_gap: f64,
    chain_gap: f64,
    born: Verdict,
}

fn games_ab_case(p: &DecisionProblem, alpha: Complex64, beta: Complex64) -> Result<AbCase> {
    let (plus, minus) = (cell(p, 0)?, cell(p, 1)?);
    let psi = p.state_from_parts(&[(plus, vec![alpha]), (minus, vec![beta])])?;
    let a = game(p, &[(plus, REWARD), (minus, NONE)])?;
    let b = game(p, &[(plus, NONE), (minus, REWARD)])?;
    let (img_a, img_b) = (a.image(p, &psi)?, b.image(p, &psi)?);
    let used = a.outcome_event(p).union(&b.outcome_event(p));
    let mut alloc = Allocator::avoiding(p, &used)?;
    let (mut xa, mut xb) = (Vec::new(), Vec::new());
    for r in [REWARD, NONE] {
        let of = |act: &Act| {
            act.outcome_event(p)
                .ids()
                .find(|&m| p.macrostates()[m].reward == r)
                .ok_or_else(|| anyhow!("no outcome of reward {r}"))
        };
        let (ma, mb) = (of(&a)?, of(&b)?);
        let chi_a = branch_state(p, &img_a, &Event::singleton(ma)).ok_or_else(|| anyhow!("null branch"))?;
        let chi_b = branch_state(p, &img_b, &Event::singleton(mb)).ok_or_else(|| anyhow!("null branch"))?;
        let (ea, eb) = make_erasure_pair(p, &mut alloc, &chi_a, ma, &chi_b, mb, 2)?;
        xa.push(ea);
        xb.push(eb);
    }
    let erase_a = glue(p, &mut alloc.clone(), &ActFunction::new(xa))?;
    let erase_b = glue(p, &mut alloc, &ActFunction::new(xb))?;
    let fin_a = a.then(p, &erase_a)?.image(p, &psi)?;
    let fin_b = b.then(p, &erase_b)?.image(p, &psi)?;
    let chain = build_equivalence_chain(p, &psi, &a, &psi, &b)?;
    Ok(AbCase {
        alpha: [alpha.re, alpha.im],
        beta: [beta.re, beta.im],
        erased_gap: fin_a.distance(&fin_b)?,
        chain_gap: chain.max_state_gap,
        born: born().compare(p, &psi, &a, &b)?.verdict,
    })
}

fn games_ab(o: &Overrides) -> Result<DemoOutput> {
    let p = two_rewards(o)?;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let cases = [
        games_ab_case(&p, Complex64::new(h, 0.0), Complex64::new(h, 0.0))?,
        games_ab_case(&p, Complex64::from_polar(h, std::f64::consts::PI / 3.0), Complex64::new(h, 0.0))?,
    ];
    let mut table = Table::new(&["alpha", "beta", "post-erasure gap", "chain gap", "Born"]);
    for c in &cases {
        table.row(vec![
            format!("{:.4}{:+.4}i", c.alpha[0], c.alpha[1]),
            format!("{:.4}{:+.4}i", c.beta[0], c.beta[1]),
            format!("{:.2e}", c.erased_gap),
            format!("{:.2e}", c.chain_gap),
            tag(&c.born),
        ]);
    }
    let passed = cases
        .iter()
        .all(|c| c.erased_gap < GAP && c.chain_gap < GAP && c.born == Verdict::Indifferent);
    Ok(DemoOutput {
        results: json!({ "cases": cases }),
        table,
        passed,
    })
}

fn labelled(p: &DecisionProblem, weights: &[f64]) -> BTreeMap<String, f64> {
    weights.iter().enumerate().map(|(r, &w)| (p.reward_label(r).to_string(), w)).collect()
}

fn games_cd(o: &Overrides) -> Result<DemoOutput> {
    let p = two_rewards(o)?;
    let (plus, minus, zero) = (cell(&p, 0)?, cell(&p, 1)?, cell(&p, 2)?);
    let c = |x: f64| Complex64::new(x, 0.0);
    let third = (1.0f64 / 3.0).sqrt();
    let psi_c = p.state_from_parts(&[(plus, vec![c((2.0f64 / 3.0).sqrt())]), (minus, vec![c(third)])])?;
    let psi_d = p.state_from_parts(&[(plus, vec![c(third)]), (zero, vec![c(third)]), (minus, vec![c(third)])])?;
    let game_c = game(&p, &[(plus, REWARD), (minus, NONE)])?;
    let game_d = game(&p, &[(plus, REWARD), (minus, NONE), (zero, REWARD)])?;
    let rf_c = game_c.reward_function(&p, &psi_c)?;
    let rf_d = game_d.reward_function(&p, &psi_d)?;
    let chain = build_equivalence_chain(&p, &psi_c, &game_c, &psi_d, &game_d)?;
    let refined = game_c.then(&p, &chain.w)?.image(&p, &psi_c)?;
    let branching: Vec<f64> = macrostate_weights(&p, &refined).into_iter().map(|(_, w)| w).collect();
    let rule = born();
    let (eu_c, eu_d) = (rule.score(&p, &psi_c, &game_c)?, rule.score(&p, &psi_d, &game_d)?);
    let verdict = Verdict::from_difference(eu_c - eu_d, p.tolerance().tie_eps);
    let rf: Vec<[f64; 2]> = [&rf_c, &rf_d].iter().map(|f| [f.get(REWARD), f.get(NONE)]).collect();
    let exact = [2.0 / 3.0, 1.0 / 3.0];
    let passed = rf.iter().all(|w| (w[0] - exact[0]).abs() < 1e-12 && (w[1] - exact[1]).abs() < 1e-12)
        && chain.max_state_gap < GAP
        && branching.len() == 3
        && branching.iter().all(|w| (w - 1.0 / 3.0).abs() < 1e-12)
        && verdict == Verdict::Indifferent;
    let mut table = Table::new(&["quantity", "value"]);
    table.row(vec!["reward function C".into(), format!("reward {:.6}, none {:.6}", rf[0][0], rf[0][1])]);
    table.row(vec!["reward function D".into(), format!("reward {:.6}, none {:.6}", rf[1][0], rf[1][1])]);
    table.row(vec!["chain gap".into(), format!("{:.2e}", chain.max_state_gap)]);
    let shown: Vec<String> = branching.iter().map(|w| format!("{w:.6}")).collect();
    table.row(vec!["C-plus-branching weights".into(), shown.join(", ")]);
    table.row(vec!["Born EU (C, D)".into(), format!("{eu_c:.6}, {eu_d:.6}")]);
    table.row(vec!["Born".into(), tag(&verdict)]);
    Ok(DemoOutput {
        results: json!({
            "reward_functions": { "C": labelled(&p, &rf[0]), "D": labelled(&p, &rf[1]) },
            "chain_gap": chain.max_state_gap,
            "c_plus_branching": branching,
            "expected_utility": { "C": eu_c, "D": eu_d },
            "born": verdict,
        }),
        table,
        passed,
    })
}

fn branch_count(o: &Overrides) -> Result<DemoOutput> {
    let p = two_rewards(o)?;
    let rule = PreferenceRule::branch_count(UtilityFunction::new(vec![1.0, 0.0]));
    let branch = |reward, v2| DiachronicBranch {
        reward,
        weight: 0.5,
        v1: Continuation::Identity,
        v2,
    };
    let recipe = DiachronicRecipe {
        start_reward: NONE,
        branches: vec![
            branch(REWARD, Continuation::Branch { weights: vec![0.5, 0.5] }),
            branch(NONE, Continuation::Identity),
        ],
    };
    let w = recipe.build(&p)?;
    let a1 = w.u.then(&p, &w.v1)?;
    let a2 = w.u.then(&p, &w.v2)?;
    let (s1, s2) = (rule.score(&p, &w.psi, &a1)?, rule.score(&p, &w.psi, &a2)?);
    let r = check_diachronic(&rule, &p, &w.psi, &w.u, &w.v1, &w.v2)?;
    let born_passes = match &r.witness {
        Some(witness) => replay_witness(&born(), &p, witness)?.passed,
        None => true,
    };
    let violated = r.outcome == CheckOutcome::Fail;
    let passed = (s1 - 0.5).abs() < 1e-12 && (s2 - 2.0 / 3.0).abs() < 1e-12 && violated && born_passes;
    let mut table = Table::new(&["quantity", "value"]);
    table.row(vec!["branch-count score A1".into(), format!("{s1:.4}")]);
    table.row(vec!["branch-count score A2".into(), format!("{s2:.4}")]);
    table.row(vec![
        "diachronic consistency".into(),
        if violated { format!("violated ({}, margin {:.4})", r.axiom, r.margin) } else { "holds".into() },
    ]);
    table.row(vec!["Born on the same witness".into(), if born_passes { "passes" } else { "fails" }.into()]);
    Ok(DemoOutput {
        results: json!({
            "scores": { "A1": s1, "A2": s2 },
            "axiom": r.axiom,
            "violated": violated,
            "margin": r.margin,
            "born_passes": born_passes,
        }),
        table,
        passed,
    })
}

fn scenario_demo(name: &str, seed: Option<u64>, budget: Option<usize>, o: &Overrides) -> Result<DemoOutput> {
    let s = builtin(name, seed, budget, o)?;
    let report: ScenarioReport = run_scenario(&s)?;
    let reproduced = match &report.violation {
        Some(v) => search::replay(v)?.reproduced,
        None => false,
    };
    let mut table = Table::new(&["quantity", "value"]);
    table.row(vec!["scenario".into(), name.into()]);
    table.row(vec!["status".into(), tag(&report.status)]);
    if let Some(v) = &report.violation {
        table.row(vec!["axiom".into(), v.axiom.to_string()]);
        table.row(vec!["found at witness".into(), v.witness_index.to_string()]);
        table.row(vec!["margin".into(), format!("{:.4e}", v.margin)]);
        let branches = v.recipe.as_ref().map_or(0, |r| r.branch_count());
        table.row(vec!["shrunk branches".into(), format!("{branches} after {} steps", v.shrink_steps)]);
        table.row(vec!["replay".into(), if reproduced { "reproduced" } else { "mismatch" }.into()]);
    }
    let passed = report.expectation_met() && reproduced;
    Ok(DemoOutput {
        results: json!({ "report": report, "replay_reproduced": reproduced }),
        table,
        passed,
    })
}

pub fn run(demo: Demo, o: &Overrides) -> Result<DemoOutput> {
    match demo {
        Demo::GamesAb => games_ab(o),
        Demo::GamesCd => games_cd(o),
        Demo::BranchCountA1a2 => branch_count(o),
        Demo::FatnessDiet => scenario_demo("fatness-diet", o.seed, o.budget, o),
        Demo::FakeState => scenario_demo("fake-state-supervenience", o.seed, o.budget, o),
    }
}
