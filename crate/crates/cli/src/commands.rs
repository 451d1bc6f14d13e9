use crate::config::{builtin, ChainInput, Overrides, RunConfig, DEFAULT_SEED};
use crate::demos::{self, Demo};
use crate::table::{tag, Table};
use anyhow::{anyhow, bail, Context, Result};
use branchwise_core::generate::{generate_act_pair, random_state, random_weights, PairConstraint};
use branchwise_core::model::{DecisionProblem, ProblemConfig};
use branchwise_core::rules::{sparse_state, to_sparse, PreferenceRule};
use branchwise_core::search::{self, run_scenario, Scenario, ScenarioReport, ViolationReport};
use branchwise_core::theorem::{build_equivalence_chain, elicit_utility, extreme_rewards, sub_seed, verify_representation, ElicitOptions};
use branchwise_core::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

/// What a command prints, writes and exits with.
pub struct Outcome {
    pub json: Value,
    pub text: String,
    pub code: u8,
}

pub const EXPECTED: u8 = 0;
pub const UNEXPECTED: u8 = 1;

fn run_all(command: &str, mut scenarios: Vec<Scenario>) -> Result<Outcome> {
    scenarios.sort_by(|a, b| a.name.cmp(&b.name));
    if let Some(w) = scenarios.windows(2).find(|w| w[0].name == w[1].name) {
        bail!("scenario name {} is used twice", w[0].name);
    }
    let reports: Vec<ScenarioReport> = scenarios
        .iter()
        .map(|s| run_scenario(s).with_context(|| format!("scenario {}", s.name)))
        .collect::<Result<_>>()?;
    let mut table = Table::new(&["scenario", "rule", "cell", "witnesses", "violations", "inconclusive", "errors", "result"]);
    let mut notes = String::new();
    for r in &reports {
        writeln!(notes, "{}: {} (expected {})", r.scenario, tag(&r.status), tag(&r.expected))?;
        for c in &r.cells {
            let result = if c.violations > 0 {
                "violated"
            } else if c.errors > 0 {
                "errors"
            } else {
                "clean"
            };
            table.row(vec![
                r.scenario.clone(),
                r.rule.clone(),
                c.target.to_string(),
                c.witnesses.to_string(),
                c.violations.to_string(),
                c.inconclusive.to_string(),
                c.errors.to_string(),
                result.into(),
            ]);
            if let Some(e) = &c.first_error {
                writeln!(notes, "{} / {}: first error: {e}", r.scenario, c.target)?;
            }
        }
        if let Some(v) = &r.violation {
            let branches = v.recipe.as_ref().map(|x| format!(", {} branches after shrinking", x.branch_count()));
            writeln!(
                notes,
                "{}: {} violated with margin {:.6e} at witness {} (seed {}){}",
                r.scenario,
                v.axiom,
                v.margin,
                v.witness_index,
                v.seed,
                branches.unwrap_or_default()
            )?;
        }
    }
    let met = reports.iter().all(ScenarioReport::expectation_met);
    Ok(Outcome {
        json: json!({ "command": command, "reports": reports }),
        text: format!("{table}\n{notes}"),
        code: if met { EXPECTED } else { UNEXPECTED },
    })
}

fn need_config(path: Option<&Path>, o: &Overrides) -> Result<RunConfig> {
    RunConfig::load(path.ok_or_else(|| anyhow!("this command needs --config"))?, o)
}

pub fn check_axioms(config: Option<&Path>, o: &Overrides) -> Result<Outcome> {
    let cfg = need_config(config, o)?;
    run_all("check-axioms", cfg.axiom_suites(o)?)
}

pub fn find_counterexample(config: Option<&Path>, names: &[String], o: &Overrides) -> Result<Outcome> {
    let mut scenarios = match config {
        Some(path) => RunConfig::load(path, o)?.scenarios(o)?,
        None => Vec::new(),
    };
    let wanted: Vec<&str> = if names.is_empty() && config.is_none() {
        search::NAMES.to_vec()
    } else {
        names.iter().map(String::as_str).collect()
    };
    for name in wanted {
        scenarios.push(builtin(name, o.seed, o.budget, o)?);
    }
    if scenarios.is_empty() {
        bail!("no scenarios to run");
    }
    run_all("find-counterexample", scenarios)
}

/// Elicitation failures that say something about the rule, not the input.
fn rule_failure(e: &Error) -> bool {
    matches!(e, Error::Monotonicity(_) | Error::Degenerate(_) | Error::Precondition(_))
}

fn rule_from(cfg: &RunConfig, name: Option<&str>) -> Result<(DecisionProblem, PreferenceRule, String)> {
    let entry = cfg.rule(name)?;
    let p = DecisionProblem::new(cfg.problem.clone())?;
    let rule = PreferenceRule::from_config(&p, &entry.config).with_context(|| format!("rule {}", entry.name))?;
    Ok((p, rule, entry.name.clone()))
}

pub fn elicit(config: Option<&Path>, rule: Option<&str>, anchors: (f64, f64), o: &Overrides) -> Result<Outcome> {
    let cfg = need_config(config, o)?;
    let (p, rule, name) = rule_from(&cfg, rule)?;
    let opts = ElicitOptions {
        anchors,
        ..ElicitOptions::default()
    };
    let elicited = extreme_rewards(&rule, &p).and_then(|(s, t)| {
        let u = (0..p.reward_count())
            .map(|r| elicit_utility(&rule, &p, r, s, t, &opts))
            .collect::<branchwise_core::Result<Vec<f64>>>()?;
        Ok((s, t, u))
    });
    match elicited {
        Ok((s, t, u)) => {
            let mut table = Table::new(&["reward", "utility"]);
            let mut utilities = BTreeMap::new();
            for (r, x) in u.iter().enumerate() {
                table.row(vec![p.reward_label(r).to_string(), format!("{x:.9}")]);
                utilities.insert(p.reward_label(r).to_string(), *x);
            }
            Ok(Outcome {
                json: json!({
                    "command": "elicit-utility",
                    "rule": name,
                    "best": p.reward_label(s),
                    "worst": p.reward_label(t),
                    "anchors": [anchors.0, anchors.1],
                    "utilities": utilities,
                }),
                text: table.to_string(),
                code: EXPECTED,
            })
        }
        Err(e) if rule_failure(&e) => Ok(Outcome {
            json: json!({
                "command": "elicit-utility",
                "rule": name,
                "anchors": [anchors.0, anchors.1],
                "error": e.to_string(),
            }),
            text: format!("rule {name}: no utility can be elicited: {e}\n"),
            code: UNEXPECTED,
        }),
        Err(e) => Err(e.into()),
    }
}

pub fn verify(config: Option<&Path>, rule: Option<&str>, trials: usize, anchors: (f64, f64), o: &Overrides) -> Result<Outcome> {
    let cfg = need_config(config, o)?;
    let (p, rule, name) = rule_from(&cfg, rule)?;
    let opts = ElicitOptions {
        anchors,
        ..ElicitOptions::default()
    };
    let seed = o.seed.unwrap_or(DEFAULT_SEED);
    let report = match verify_representation(&rule, &p, trials, seed, &opts) {
        Ok(r) => r,
        Err(e) if rule_failure(&e) => {
            return Ok(Outcome {
                json: json!({ "command": "verify-representation", "rule": name, "error": e.to_string() }),
                text: format!("rule {name}: representation check could not start: {e}\n"),
                code: UNEXPECTED,
            })
        }
        Err(e) => return Err(e.into()),
    };
    let mut table = Table::new(&["reward", "utility"]);
    for (label, u) in &report.utilities {
        table.row(vec![label.clone(), format!("{u:.9}")]);
    }
    let mut text = table.to_string();
    writeln!(text, "\nbest {}, worst {}, anchors ({}, {})", report.best, report.worst, anchors.0, anchors.1)?;
    if let Some(e) = &report.elicitation_error {
        writeln!(text, "elicitation failed, declared utility used: {e}")?;
    }
    writeln!(text, "dominance: {}", if report.dominance_ok { "ok" } else { "violated" })?;
    writeln!(text, "{} random pairs, {} mismatches (seed {seed})", report.trials, report.mismatches)?;
    let ok = report.mismatches == 0 && report.dominance_ok && report.elicitation_error.is_none();
    Ok(Outcome {
        json: json!({ "command": "verify-representation", "rule": name, "report": report }),
        text,
        code: if ok { EXPECTED } else { UNEXPECTED },
    })
}

fn default_problem(o: &Overrides) -> ProblemConfig {
    let mut cfg = ProblemConfig::new(&["reward", "partial", "none"], &[16, 32, 64, 64]);
    o.apply(&mut cfg);
    cfg
}

pub fn equivalence_chain(config: Option<&Path>, o: &Overrides) -> Result<Outcome> {
    let (problem, input) = match config {
        Some(path) => {
            let cfg = RunConfig::load(path, o)?;
            (cfg.problem, cfg.chain)
        }
        None => (default_problem(o), None),
    };
    let p = DecisionProblem::new(problem)?;
    let seed = o.seed.unwrap_or(DEFAULT_SEED);
    let generated = input.is_none();
    let (psi, u, psi2, u2) = match input {
        Some(ChainInput { psi, u, psi2, u2 }) => (
            sparse_state(&p, &psi)?,
            u.into_act(&p)?,
            sparse_state(&p, &psi2)?,
            u2.into_act(&p)?,
        ),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let psi = random_state(&p, &mut rng);
            let lottery = random_weights(&mut rng, p.reward_count());
            let (a, b) = generate_act_pair(&p, &psi, &PairConstraint::EqualRewardFunction { lottery }, sub_seed(seed, 1))?;
            (psi.clone(), a, psi, b)
        }
    };
    let chain = build_equivalence_chain(&p, &psi, &u, &psi2, &u2)?;
    let rf: BTreeMap<String, f64> = (0..p.reward_count())
        .map(|r| (p.reward_label(r).to_string(), chain.reward_function.get(r)))
        .collect();
    let mut table = Table::new(&["quantity", "value"]);
    let shown: Vec<String> = rf.iter().map(|(k, w)| format!("{k} {w:.6}")).collect();
    table.row(vec!["reward function".into(), shown.join(", ")]);
    table.row(vec!["input".into(), if generated { format!("generated (seed {seed})") } else { "config".into() }]);
    table.row(vec!["final stage".into(), chain.y.target_stage().to_string()]);
    table.row(vec!["final-state gap".into(), format!("{:.3e}", chain.max_state_gap)]);
    let ok = chain.max_state_gap < p.tolerance().eq_eps;
    Ok(Outcome {
        json: json!({
            "command": "equivalence-chain",
            "seed": generated.then_some(seed),
            "reward_function": rf,
            "max_state_gap": chain.max_state_gap,
            "final_stage": chain.y.target_stage(),
            "y": chain.y.to_data(),
            "y2": chain.y2.to_data(),
            "final_state": to_sparse(&chain.final_state),
            "final_state2": to_sparse(&chain.final_state2),
        }),
        text: table.to_string(),
        code: if ok { EXPECTED } else { UNEXPECTED },
    })
}

pub fn demo(which: Demo, o: &Overrides) -> Result<Outcome> {
    let d = demos::run(which, o)?;
    Ok(Outcome {
        json: json!({ "command": "demo", "demo": which.name(), "passed": d.passed, "results": d.results }),
        text: d.table.to_string(),
        code: if d.passed { EXPECTED } else { UNEXPECTED },
    })
}

/// The violation reports in a file written by this tool: a bare violation,
/// a scenario report, or a command envelope with `reports`.
fn violations_in(v: Value) -> Result<Vec<(String, Option<ViolationReport>)>> {
    let scenario_entry = |v: Value| -> Result<(String, Option<ViolationReport>)> {
        let r: ScenarioReport = serde_json::from_value(v).context("not a scenario report")?;
        Ok((r.scenario, r.violation))
    };
    let Value::Object(map) = &v else {
        bail!("expected a JSON object");
    };
    if map.contains_key("witness") {
        let r: ViolationReport = serde_json::from_value(v).context("not a violation report")?;
        return Ok(vec![(r.scenario.clone(), Some(r))]);
    }
    if map.contains_key("cells") {
        return Ok(vec![scenario_entry(v)?]);
    }
    if let Some(Value::Array(reports)) = map.get("reports") {
        return reports.iter().cloned().map(scenario_entry).collect();
    }
    bail!("no violation or scenario report found")
}

pub fn replay(path: &Path) -> Result<Outcome> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let entries = violations_in(v).with_context(|| format!("reading {}", path.display()))?;
    let mut table = Table::new(&["scenario", "axiom", "recorded margin", "replayed margin", "result"]);
    let mut results = Vec::new();
    let mut code = EXPECTED;
    for (scenario, violation) in entries {
        let Some(report) = violation else {
            table.row(vec![scenario.clone(), "-".into(), "-".into(), "-".into(), "pass, nothing to replay".into()]);
            results.push(json!({ "scenario": scenario, "outcome": null }));
            continue;
        };
        let out = search::replay(&report).with_context(|| format!("replaying {scenario}"))?;
        if !out.reproduced {
            code = UNEXPECTED;
            eprintln!(
                "warning: {scenario}: recorded {} with margin {:e}, replay gives {} with margin {:e}{}",
                out.recorded_axiom,
                out.recorded_margin,
                out.replayed_axiom,
                out.replayed_margin,
                if out.replayed_failure { "" } else { " (no violation)" }
            );
        }
        table.row(vec![
            scenario.clone(),
            report.axiom.to_string(),
            format!("{:e}", out.recorded_margin),
            format!("{:e}", out.replayed_margin),
            if out.reproduced { "reproduced" } else { "MISMATCH" }.into(),
        ]);
        results.push(json!({ "scenario": scenario, "outcome": out }));
    }
    Ok(Outcome {
        json: json!({ "command": "replay", "results": results }),
        text: table.to_string(),
        code,
    })
}
