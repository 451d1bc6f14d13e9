//! The run configuration: a problem file plus `rules` and `scenarios`.

use anyhow::{anyhow, bail, Context, Result};
use branchwise_core::model::{ActData, ProblemConfig};
use branchwise_core::rules::{Amplitude, RuleConfig};
use branchwise_core::search::{self, Expectation, Recipe, Scenario, SearchOptions, Target, DEFAULT_BUDGET};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::Path;

pub const DEFAULT_SEED: u64 = 1;

/// A rule block plus `name` and an optional `expect`.
#[derive(Debug, Clone)]
pub struct RuleEntry {
    pub name: String,
    /// What `check-axioms` expects of this rule. Defaults to a clean pass.
    pub expect: Option<Expectation>,
    pub config: RuleConfig,
}

/// Either a built-in scenario (`named`) or one over the file's problem and
/// one of its rules.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioEntry {
    pub named: Option<String>,
    pub name: Option<String>,
    pub description: Option<String>,
    pub rule: Option<String>,
    pub targets: Option<Vec<Target>>,
    pub expect: Option<Expectation>,
    #[serde(default)]
    pub fixed: Vec<Recipe>,
    pub options: Option<SearchOptions>,
    pub seed: Option<u64>,
    pub budget: Option<usize>,
    pub shrink: Option<bool>,
}

/// Two states and acts to chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainInput {
    pub psi: Vec<Amplitude>,
    pub u: ActData,
    pub psi2: Vec<Amplitude>,
    pub u2: ActData,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub rules: Vec<RuleEntry>,
    pub scenarios: Vec<ScenarioEntry>,
    pub chain: Option<ChainInput>,
}

type Object = serde_json::Map<String, Value>;

fn take<T: DeserializeOwned>(map: &mut Object, key: &str) -> Result<Option<T>> {
    map.remove(key)
        .map(|v| serde_json::from_value(v).with_context(|| format!("in `{key}`")))
        .transpose()
}

// serde's flatten would buffer the rule and problem maps, which loses
// integer map keys such as `by_macrostate`, so the extra keys are split
// off by hand.
fn rule_entry(v: Value) -> Result<RuleEntry> {
    let Value::Object(mut map) = v else {
        bail!("a rule must be an object");
    };
    let name: String = take(&mut map, "name")?.ok_or_else(|| anyhow!("a rule needs a `name`"))?;
    let expect = take(&mut map, "expect").with_context(|| format!("rule {name}"))?;
    let config = serde_json::from_value(Value::Object(map)).with_context(|| format!("rule {name}"))?;
    Ok(RuleEntry { name, expect, config })
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let Value::Object(mut map) = serde_json::from_str(text)? else {
            bail!("the config must be a JSON object");
        };
        let rules: Vec<Value> = take(&mut map, "rules")?.unwrap_or_default();
        let rules = rules
            .into_iter()
            .enumerate()
            .map(|(i, r)| rule_entry(r).with_context(|| format!("in `rules[{i}]`")))
            .collect::<Result<_>>()?;
        let scenarios = take(&mut map, "scenarios")?.unwrap_or_default();
        let chain = take(&mut map, "chain")?;
        const PROBLEM_KEYS: [&str; 4] = ["rewards", "stage_capacities", "macrostate_dims", "tolerances"];
        if let Some(k) = map.keys().find(|k| !PROBLEM_KEYS.contains(&k.as_str())) {
            bail!("unknown key `{k}`");
        }
        Ok(RunConfig {
            rules,
            scenarios,
            chain,
            problem: serde_json::from_value(Value::Object(map)).context("in the problem definition")?,
        })
    }
}

/// Flag values that override the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub budget: Option<usize>,
    pub tolerance_eq: Option<f64>,
    pub tolerance_tie: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, problem: &mut ProblemConfig) {
        if let Some(eq) = self.tolerance_eq {
            problem.tolerances.eq_eps = eq;
        }
        if let Some(tie) = self.tolerance_tie {
            problem.tolerances.tie_eps = tie;
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path, o: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = RunConfig::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
        o.apply(&mut cfg.problem);
        let mut names: Vec<&str> = cfg.rules.iter().map(|r| r.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            bail!("rule name {} is used twice", w[0]);
        }
        Ok(cfg)
    }

    pub fn rule(&self, name: Option<&str>) -> Result<&RuleEntry> {
        match name {
            Some(n) => self
                .rules
                .iter()
                .find(|r| r.name == n)
                .ok_or_else(|| anyhow!("no rule named {n} in the config")),
            None => self.rules.first().ok_or_else(|| anyhow!("the config has no rules")),
        }
    }

    pub fn scenarios(&self, o: &Overrides) -> Result<Vec<Scenario>> {
        self.scenarios.iter().map(|e| self.scenario(e, o)).collect()
    }

    fn scenario(&self, e: &ScenarioEntry, o: &Overrides) -> Result<Scenario> {
        let seed = o.seed.or(e.seed);
        let budget = o.budget.or(e.budget);
        if let Some(named) = &e.named {
            let custom = [e.name.is_some(), e.rule.is_some(), e.targets.is_some(), e.expect.is_some()];
            if custom.iter().any(|&x| x) || !e.fixed.is_empty() || e.options.is_some() {
                bail!("scenario {named}: a built-in scenario takes only seed, budget and shrink");
            }
            let mut s = builtin(named, seed, budget, o)?;
            if let Some(shrink) = e.shrink {
                s.shrink = shrink;
            }
            return Ok(s);
        }
        let name = e.name.clone().ok_or_else(|| anyhow!("a scenario needs `name` or `named`"))?;
        let rule_name = e.rule.as_deref().ok_or_else(|| anyhow!("scenario {name} has no rule"))?;
        let rule = self.rule(Some(rule_name)).with_context(|| format!("scenario {name}"))?;
        Ok(Scenario {
            description: e.description.clone().unwrap_or_default(),
            problem: self.problem.clone(),
            rule: rule.config.clone(),
            targets: e.targets.clone().unwrap_or_else(|| Target::ALL.to_vec()),
            expect: e.expect.ok_or_else(|| anyhow!("scenario {name} has no expect"))?,
            fixed: e.fixed.clone(),
            options: e.options.clone().unwrap_or_default(),
            seed: seed.unwrap_or(DEFAULT_SEED),
            budget: budget.unwrap_or(DEFAULT_BUDGET),
            shrink: e.shrink.unwrap_or(true),
            name,
        })
    }

    /// One all-axiom scenario per rule, for `check-axioms`.
    pub fn axiom_suites(&self, o: &Overrides) -> Result<Vec<Scenario>> {
        if self.rules.is_empty() {
            bail!("the config has no rules");
        }
        Ok(self
            .rules
            .iter()
            .map(|r| Scenario {
                name: r.name.clone(),
                description: String::new(),
                problem: self.problem.clone(),
                rule: r.config.clone(),
                targets: Target::ALL.to_vec(),
                expect: r.expect.unwrap_or(Expectation::Pass),
                fixed: vec![],
                options: SearchOptions::default(),
                seed: o.seed.unwrap_or(DEFAULT_SEED),
                budget: o.budget.unwrap_or(DEFAULT_BUDGET),
                shrink: true,
            })
            .collect())
    }
}

/// A built-in scenario with flag overrides applied.
pub fn builtin(name: &str, seed: Option<u64>, budget: Option<usize>, o: &Overrides) -> Result<Scenario> {
    let mut s = search::named(name, seed, budget)
        .ok_or_else(|| anyhow!("unknown scenario {name}; built-in scenarios: {}", search::NAMES.join(", ")))?;
    o.apply(&mut s.problem);
    Ok(s)
}
