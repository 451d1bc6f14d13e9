//! Preference rules over available acts.
//!
//! Every built-in rule scores each act and compares scores, treating
//! differences below `tie_eps` as indifference.

use crate::error::{Error, Result};
use crate::linalg::ComplexVector;
use crate::model::{macrostate_weights, reward_weights, Act, DecisionProblem, MacrostateId, RewardId};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    PreferA,
    PreferB,
    Indifferent,
}

impl Verdict {
    pub fn reversed(self) -> Verdict {
        match self {
            Verdict::PreferA => Verdict::PreferB,
            Verdict::PreferB => Verdict::PreferA,
            Verdict::Indifferent => Verdict::Indifferent,
        }
    }

    /// a ⪰ b.
    pub fn weakly_prefers_a(self) -> bool {
        self != Verdict::PreferB
    }

    pub fn from_difference(diff: f64, tie_eps: f64) -> Verdict {
        if diff.abs() < tie_eps {
            Verdict::Indifferent
        } else if diff > 0.0 {
            Verdict::PreferA
        } else {
            Verdict::PreferB
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub verdict: Verdict,
    pub score_a: f64,
    pub score_b: f64,
    /// score_a − score_b.
    pub margin: f64,
}

impl ComparisonResult {
    pub fn from_scores(score_a: f64, score_b: f64, tie_eps: f64) -> Self {
        let margin = score_a - score_b;
        ComparisonResult {
            verdict: Verdict::from_difference(margin, tie_eps),
            score_a,
            score_b,
            margin,
        }
    }
}

/// A state-dependent preference relation over acts.
pub trait Preference: Send + Sync {
    fn name(&self) -> String;

    /// Compares two acts available at the event containing `psi`.
    fn compare(&self, p: &DecisionProblem, psi: &ComplexVector, a: &Act, b: &Act) -> Result<ComparisonResult>;

    /// The utility the rule was configured with, if it has one.
    fn utility(&self) -> Option<&UtilityFunction> {
        None
    }
}

/// Utility per reward id; `None` marks a reward with no assigned value.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityFunction {
    values: Vec<Option<f64>>,
}

impl UtilityFunction {
    pub fn new(values: Vec<f64>) -> Self {
        UtilityFunction {
            values: values.into_iter().map(Some).collect(),
        }
    }

    pub fn partial(values: Vec<Option<f64>>) -> Self {
        UtilityFunction { values }
    }

    /// Resolves a label → value map against a problem's rewards.
    pub fn from_labels(p: &DecisionProblem, labels: &BTreeMap<String, f64>) -> Result<Self> {
        let mut values = vec![None; p.reward_count()];
        for (label, &v) in labels {
            if !v.is_finite() {
                return Err(Error::Config(format!("utility of {label:?} is not finite")));
            }
            values[p.reward_id(label)?] = Some(v);
        }
        Ok(UtilityFunction { values })
    }

    pub fn to_labels(&self, p: &DecisionProblem) -> BTreeMap<String, f64> {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(r, v)| v.map(|v| (p.reward_label(r).to_string(), v)))
            .collect()
    }

    pub fn get(&self, r: RewardId) -> Option<f64> {
        self.values.get(r).copied().flatten()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    /// The value for `r`, or a configuration error naming it.
    pub fn require(&self, p: &DecisionProblem, r: RewardId) -> Result<f64> {
        self.get(r)
            .ok_or_else(|| Error::Config(format!("no utility for reward {:?}", p.reward_label(r))))
    }

    /// Reward with the highest value (lowest id on ties).
    pub fn best(&self) -> Option<RewardId> {
        self.extreme(|a, b| a > b)
    }

    /// Reward with the lowest value (lowest id on ties).
    pub fn worst(&self) -> Option<RewardId> {
        self.extreme(|a, b| a < b)
    }

    fn extreme(&self, better: impl Fn(f64, f64) -> bool) -> Option<RewardId> {
        let mut best: Option<(RewardId, f64)> = None;
        for (r, v) in self.values.iter().enumerate() {
            if let Some(v) = *v {
                if best.is_none_or(|(_, b)| better(v, b)) {
                    best = Some((r, v));
                }
            }
        }
        best.map(|(r, _)| r)
    }

    pub fn affine(&self, scale: f64, shift: f64) -> UtilityFunction {
        UtilityFunction {
            values: self.values.iter().map(|v| v.map(|v| scale * v + shift)).collect(),
        }
    }
}

/// EU_ψ(U) = Σ_r W_ψ(r|U) u(r). Rewards with null weight may lack a value.
pub fn expected_utility(p: &DecisionProblem, psi: &ComplexVector, a: &Act, u: &UtilityFunction) -> Result<f64> {
    let img = a.image(p, psi)?;
    eu_of_image(p, &img, u)
}

fn eu_of_image(p: &DecisionProblem, img: &ComplexVector, u: &UtilityFunction) -> Result<f64> {
    let eps = p.tolerance().eq_eps;
    let mut total = 0.0;
    for (r, w) in reward_weights(p, img).0.into_iter().enumerate() {
        match u.get(r) {
            Some(v) => total += w * v,
            None if w >= eps => return Err(Error::Config(format!(
                "no utility for reward {:?}, which has weight {w}",
                p.reward_label(r)
            ))),
            None => {}
        }
    }
    Ok(total)
}

/// Agent mass per macrostate, in kilograms.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MassMap {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<f64>,
    #[serde(default, deserialize_with = "id_keyed")]
    pub by_macrostate: BTreeMap<MacrostateId, f64>,
}

/// Macrostate-keyed map whose keys arrive as strings. Plain
/// `BTreeMap<usize, _>` fails inside tagged enums, where serde buffers
/// JSON object keys as strings.
fn id_keyed<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<BTreeMap<MacrostateId, f64>, D::Error> {
    let raw = BTreeMap::<String, f64>::deserialize(d)?;
    raw.into_iter()
        .map(|(k, v)| {
            k.parse()
                .map(|id| (id, v))
                .map_err(|_| serde::de::Error::custom(format!("macrostate id expected, found {k:?}")))
        })
        .collect()
}

impl MassMap {
    pub fn constant(kg: f64) -> Self {
        MassMap {
            default: Some(kg),
            by_macrostate: BTreeMap::new(),
        }
    }

    pub fn get(&self, m: MacrostateId) -> Option<f64> {
        self.by_macrostate.get(&m).copied().or(self.default)
    }
}

/// One entry of a sparse state: global basis index and amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Amplitude {
    pub index: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

pub fn sparse_state(p: &DecisionProblem, entries: &[Amplitude]) -> Result<ComplexVector> {
    let mut v = ComplexVector::zeros(p.dim());
    for e in entries {
        if e.index >= p.dim() {
            return Err(Error::Config(format!("basis index {} out of range", e.index)));
        }
        v.entries_mut()[e.index] += Complex64::new(e.re, e.im);
    }
    Ok(v)
}

pub fn to_sparse(v: &ComplexVector) -> Vec<Amplitude> {
    v.entries()
        .iter()
        .enumerate()
        .filter(|(_, z)| z.re != 0.0 || z.im != 0.0)
        .map(|(index, z)| Amplitude { index, re: z.re, im: z.im })
        .collect()
}

/// A rule block of the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum RuleConfig {
    Born {
        utility: BTreeMap<String, f64>,
    },
    BranchCount {
        utility: BTreeMap<String, f64>,
    },
    Fatness {
        utility: BTreeMap<String, f64>,
        mass: MassMap,
    },
    FakeState {
        utility: BTreeMap<String, f64>,
        /// The substitute state map, as transpositions of global basis indices.
        substitute: Vec<[usize; 2]>,
    },
    Descriptive {
        utility: BTreeMap<String, f64>,
        probe: Vec<Amplitude>,
        penalty: f64,
    },
}

impl RuleConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            RuleConfig::Born { .. } => "born",
            RuleConfig::BranchCount { .. } => "branch_count",
            RuleConfig::Fatness { .. } => "fatness",
            RuleConfig::FakeState { .. } => "fake_state",
            RuleConfig::Descriptive { .. } => "descriptive",
        }
    }

    pub fn utility(&self) -> &BTreeMap<String, f64> {
        match self {
            RuleConfig::Born { utility }
            | RuleConfig::BranchCount { utility }
            | RuleConfig::Fatness { utility, .. }
            | RuleConfig::FakeState { utility, .. }
            | RuleConfig::Descriptive { utility, .. } => utility,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Born,
    BranchCount,
    Fatness(MassMap),
    FakeState(Vec<[usize; 2]>),
    Descriptive { probe: ComplexVector, penalty: f64 },
}

/// A configured built-in rule.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceRule {
    kind: Kind,
    utility: UtilityFunction,
}

impl PreferenceRule {
    pub fn born(u: UtilityFunction) -> Self {
        PreferenceRule { kind: Kind::Born, utility: u }
    }

    pub fn branch_count(u: UtilityFunction) -> Self {
        PreferenceRule {
            kind: Kind::BranchCount,
            utility: u,
        }
    }

    pub fn fatness(u: UtilityFunction, mass: MassMap) -> Self {
        PreferenceRule {
            kind: Kind::Fatness(mass),
            utility: u,
        }
    }

    pub fn fake_state(u: UtilityFunction, swaps: Vec<[usize; 2]>) -> Self {
        PreferenceRule {
            kind: Kind::FakeState(swaps),
            utility: u,
        }
    }

    pub fn descriptive(u: UtilityFunction, probe: ComplexVector, penalty: f64) -> Self {
        PreferenceRule {
            kind: Kind::Descriptive { probe, penalty },
            utility: u,
        }
    }

    pub fn from_config(p: &DecisionProblem, cfg: &RuleConfig) -> Result<Self> {
        let u = UtilityFunction::from_labels(p, cfg.utility())?;
        let rule = match cfg {
            RuleConfig::Born { .. } => Self::born(u),
            RuleConfig::BranchCount { .. } => Self::branch_count(u),
            RuleConfig::Fatness { mass, .. } => {
                if let Some(bad) = mass.default.iter().chain(mass.by_macrostate.values()).find(|m| !(**m > 0.0)) {
                    return Err(Error::Config(format!("mass {bad} is not positive")));
                }
                Self::fatness(u, mass.clone())
            }
            RuleConfig::FakeState { substitute, .. } => {
                if let Some(s) = substitute.iter().find(|[i, j]| *i >= p.dim() || *j >= p.dim()) {
                    return Err(Error::Config(format!("substitute swap {s:?} out of range")));
                }
                Self::fake_state(u, substitute.clone())
            }
            RuleConfig::Descriptive { probe, penalty, .. } => {
                if !penalty.is_finite() {
                    return Err(Error::Config("penalty must be finite".into()));
                }
                Self::descriptive(u, sparse_state(p, probe)?, *penalty)
            }
        };
        Ok(rule)
    }

    pub fn to_config(&self, p: &DecisionProblem) -> RuleConfig {
        let utility = self.utility.to_labels(p);
        match &self.kind {
            Kind::Born => RuleConfig::Born { utility },
            Kind::BranchCount => RuleConfig::BranchCount { utility },
            Kind::Fatness(mass) => RuleConfig::Fatness {
                utility,
                mass: mass.clone(),
            },
            Kind::FakeState(s) => RuleConfig::FakeState {
                utility,
                substitute: s.clone(),
            },
            Kind::Descriptive { probe, penalty } => RuleConfig::Descriptive {
                utility,
                probe: to_sparse(probe),
                penalty: *penalty,
            },
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            Kind::Born => "born",
            Kind::BranchCount => "branch_count",
            Kind::Fatness(_) => "fatness",
            Kind::FakeState(_) => "fake_state",
            Kind::Descriptive { .. } => "descriptive",
        }
    }

    pub fn utility_function(&self) -> &UtilityFunction {
        &self.utility
    }

    /// The substitute state used by the fake-state rule.
    pub fn substitute(&self, psi: &ComplexVector) -> ComplexVector {
        let mut v = psi.clone();
        if let Kind::FakeState(swaps) = &self.kind {
            for &[i, j] in swaps {
                v.entries_mut().swap(i, j);
            }
        }
        v
    }

    /// The act's score under this rule.
    pub fn score(&self, p: &DecisionProblem, psi: &ComplexVector, a: &Act) -> Result<f64> {
        let u = &self.utility;
        match &self.kind {
            Kind::Born => expected_utility(p, psi, a, u),
            Kind::BranchCount => {
                let img = a.image(p, psi)?;
                let branches = macrostate_weights(p, &img);
                if branches.is_empty() {
                    return Err(Error::Degenerate("act has no non-null outcome macrostate".into()));
                }
                let mut total = 0.0;
                for (m, _) in &branches {
                    total += u.require(p, p.macrostates()[*m].reward)?;
                }
                Ok(total / branches.len() as f64)
            }
            Kind::Fatness(mass) => {
                let img = a.image(p, psi)?;
                let (mut num, mut den) = (0.0, 0.0);
                for (m, w) in macrostate_weights(p, &img) {
                    let kg = mass
                        .get(m)
                        .ok_or_else(|| Error::Config(format!("no mass for macrostate {m}")))?;
                    num += w * kg * u.require(p, p.macrostates()[m].reward)?;
                    den += w * kg;
                }
                if den <= 0.0 {
                    return Err(Error::Degenerate("act has no non-null outcome macrostate".into()));
                }
                Ok(num / den)
            }
            Kind::FakeState(_) => {
                let fake = self.substitute(psi);
                p.check_state_in(&fake, a.domain())
                    .map_err(|e| Error::Config(format!("substitute state is unusable: {e}")))?;
                expected_utility(p, &fake, a, u)
            }
            Kind::Descriptive { probe, penalty } => {
                let overlap = probe.inner(psi)?.norm();
                if overlap > p.tolerance().eq_eps {
                    return Err(Error::Config(format!("probe overlaps the state (|⟨probe|ψ⟩| = {overlap})")));
                }
                let base = expected_utility(p, psi, a, u)?;
                if *penalty == 0.0 {
                    return Ok(base);
                }
                let probed = a.apply(probe)?;
                Ok(base + penalty * eu_of_image(p, &probed, u)?)
            }
        }
    }
}

impl Preference for PreferenceRule {
    fn name(&self) -> String {
        self.kind_name().to_string()
    }

    fn compare(&self, p: &DecisionProblem, psi: &ComplexVector, a: &Act, b: &Act) -> Result<ComparisonResult> {
        let sa = self.score(p, psi, a)?;
        let sb = self.score(p, psi, b)?;
        Ok(ComparisonResult::from_scores(sa, sb, p.tolerance().tie_eps))
    }

    fn utility(&self) -> Option<&UtilityFunction> {
        Some(&self.utility)
    }
}

/// Deliberately irrational rules used to exercise the axiom checkers.
pub mod fixtures {
    use super::*;

    /// Prefers acts cyclically by the lowest outcome macrostate id mod 3.
    #[derive(Debug, Clone, Copy, Default)]
    pub struct CyclicRule;

    impl Preference for CyclicRule {
        fn name(&self) -> String {
            "cyclic".into()
        }

        fn compare(&self, p: &DecisionProblem, _: &ComplexVector, a: &Act, b: &Act) -> Result<ComparisonResult> {
            let key = |x: &Act| x.outcome_event(p).ids().next().unwrap_or(0) % 3;
            let (ka, kb) = (key(a), key(b));
            let (sa, sb) = match (kb + 3 - ka) % 3 {
                0 => (0.0, 0.0),
                1 => (1.0, 0.0),
                _ => (0.0, 1.0),
            };
            Ok(ComparisonResult::from_scores(sa, sb, p.tolerance().tie_eps))
        }
    }

    /// Scores an act by the weight its image puts on microstates other than
    /// the first of each macrostate.
    #[derive(Debug, Clone, Copy, Default)]
    pub struct MicrostateIndexRule;

    impl Preference for MicrostateIndexRule {
        fn name(&self) -> String {
            "microstate_index".into()
        }

        fn compare(&self, p: &DecisionProblem, psi: &ComplexVector, a: &Act, b: &Act) -> Result<ComparisonResult> {
            let score = |x: &Act| -> Result<f64> {
                let img = x.image(p, psi)?;
                Ok(p.macrostates().iter().map(|m| img.mass_on(m.basis().skip(1))).sum())
            };
            Ok(ComparisonResult::from_scores(score(a)?, score(b)?, p.tolerance().tie_eps))
        }
    }

    /// Scores 1 when expected utility reaches `threshold`, else 0.
    #[derive(Debug, Clone)]
    pub struct ThresholdRule {
        pub utility: UtilityFunction,
        pub threshold: f64,
    }

    impl Preference for ThresholdRule {
        fn name(&self) -> String {
            "threshold".into()
        }

        fn compare(&self, p: &DecisionProblem, psi: &ComplexVector, a: &Act, b: &Act) -> Result<ComparisonResult> {
            let score = |x: &Act| -> Result<f64> {
                let eu = expected_utility(p, psi, x, &self.utility)?;
                Ok(if eu >= self.threshold { 1.0 } else { 0.0 })
            };
            Ok(ComparisonResult::from_scores(score(a)?, score(b)?, p.tolerance().tie_eps))
        }

        fn utility(&self) -> Option<&UtilityFunction> {
            Some(&self.utility)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::{make_block_act, make_branching, make_reward_act, Allocator, Branch, BranchSpec, Completion};
    use crate::model::ProblemConfig;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn problem() -> DecisionProblem {
        DecisionProblem::new(ProblemConfig::new(&["reward", "none"], &[4, 8, 8])).unwrap()
    }

    fn u10() -> UtilityFunction {
        UtilityFunction::new(vec![1.0, 0.0])
    }

    /// Game C on |+⟩, |−⟩ in the no-reward block.
    fn game_c(p: &DecisionProblem) -> (ComplexVector, Act) {
        let plus = p.macrostate_at(1, 0, 0).unwrap().id;
        let minus = p.macrostate_at(1, 0, 1).unwrap().id;
        let psi = p
            .state_from_parts(&[(plus, vec![c((2.0f64 / 3.0).sqrt())]), (minus, vec![c((1.0f64 / 3.0).sqrt())])])
            .unwrap();
        let mut alloc = Allocator::new(p);
        let parts = vec![
            make_reward_act(p, &mut alloc, plus, 0, 1).unwrap(),
            make_reward_act(p, &mut alloc, minus, 1, 1).unwrap(),
        ];
        let a = crate::construct::glue(p, &mut alloc, &crate::construct::ActFunction::new(parts)).unwrap();
        (psi, a)
    }

    /// Two branches of weight 1/2, reward on the first only.
    fn half_reward(p: &DecisionProblem) -> (ComplexVector, Act) {
        let m = p.macrostate_at(1, 0, 0).unwrap().id;
        let psi = p.state_in(m, &[c(1.0)]).unwrap();
        let a = make_block_act(
            p,
            &mut Allocator::new(p),
            &psi,
            m,
            &[Branch::new(0, 0.5), Branch::new(1, 0.5)],
            Completion::Canonical,
            1,
        )
        .unwrap();
        (psi, a)
    }

    #[test]
    fn game_c_expected_utility() {
        let p = problem();
        let (psi, a) = game_c(&p);
        assert!((expected_utility(&p, &psi, &a, &u10()).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn missing_utility_is_config_error() {
        let p = problem();
        let (psi, a) = game_c(&p);
        let u = UtilityFunction::partial(vec![Some(1.0), None]);
        assert!(matches!(expected_utility(&p, &psi, &a, &u), Err(Error::Config(_))));
        let mut labels = BTreeMap::new();
        labels.insert("nope".to_string(), 1.0);
        assert!(UtilityFunction::from_labels(&p, &labels).is_err());
    }

    #[test]
    fn born_prefers_higher_eu() {
        let p = problem();
        let m = p.macrostate_at(1, 0, 0).unwrap().id;
        let psi = p.state_in(m, &[c(1.0)]).unwrap();
        let mut alloc = Allocator::new(&p);
        let s = make_reward_act(&p, &mut alloc, m, 0, 1).unwrap();
        let t = make_reward_act(&p, &mut alloc, m, 1, 1).unwrap();
        let born = PreferenceRule::born(u10());
        let r = born.compare(&p, &psi, &s, &t).unwrap();
        assert_eq!(r.verdict, Verdict::PreferA);
        assert_eq!(r.margin, 1.0);
        assert_eq!(born.compare(&p, &psi, &s, &s).unwrap().verdict, Verdict::Indifferent);
    }

    #[test]
    fn branch_count_scores() {
        let p = problem();
        let (psi, a) = half_reward(&p);
        let bc = PreferenceRule::branch_count(u10());
        assert_eq!(bc.score(&p, &psi, &a).unwrap(), 0.5);
        // unequal weights: branch count ignores them
        let m = p.macrostate_at(1, 0, 0).unwrap().id;
        let b = make_block_act(
            &p,
            &mut Allocator::new(&p),
            &psi,
            m,
            &[Branch::new(0, 0.9), Branch::new(1, 0.1)],
            Completion::Canonical,
            1,
        )
        .unwrap();
        assert_eq!(bc.score(&p, &psi, &b).unwrap(), 0.5);
        assert!((PreferenceRule::born(u10()).score(&p, &psi, &b).unwrap() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn fatness_formula() {
        let p = problem();
        let (psi, a) = half_reward(&p);
        let out: Vec<_> = a.outcome_event(&p).ids().collect();
        let mut mass = MassMap::default();
        let rewarded = *out.iter().find(|&&m| p.macrostates()[m].reward == 0).unwrap();
        let other = *out.iter().find(|&&m| p.macrostates()[m].reward == 1).unwrap();
        mass.by_macrostate.insert(rewarded, 100.0);
        mass.by_macrostate.insert(other, 50.0);
        let fat = PreferenceRule::fatness(u10(), mass.clone());
        let expected = 0.5 * 100.0 / (0.5 * 100.0 + 0.5 * 50.0);
        assert!((fat.score(&p, &psi, &a).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 2.0 / 3.0).abs() < 1e-15);
        mass.by_macrostate.remove(&other);
        assert!(matches!(
            PreferenceRule::fatness(u10(), mass).score(&p, &psi, &a),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn fake_state_swaps_amplitudes() {
        let p = problem();
        let (psi, a) = game_c(&p);
        let plus = p.macrostate_at(1, 0, 0).unwrap().basis().start;
        let minus = p.macrostate_at(1, 0, 1).unwrap().basis().start;
        let fake = PreferenceRule::fake_state(u10(), vec![[plus, minus]]);
        assert!((fake.score(&p, &psi, &a).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let identity = PreferenceRule::fake_state(u10(), vec![]);
        assert!((identity.score(&p, &psi, &a).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let outside = p.macrostate_at(0, 0, 3).unwrap().basis().start;
        let bad = PreferenceRule::fake_state(u10(), vec![[plus, outside]]);
        assert!(matches!(bad.score(&p, &psi, &a), Err(Error::Config(_))));
    }

    #[test]
    fn descriptive_penalty() {
        let p = DecisionProblem::new(ProblemConfig::new(&["reward", "none"], &[4, 8]).with_macrostate_dim(2)).unwrap();
        let m = p.macrostate_at(1, 0, 0).unwrap().id;
        let psi = p.state_in(m, &[c(1.0), c(0.0)]).unwrap();
        let probe = p.state_in(m, &[c(0.0), c(1.0)]).unwrap();
        let branches = [Branch::new(0, 0.5), Branch::new(1, 0.5)];
        let a = make_block_act(&p, &mut Allocator::new(&p), &psi, m, &branches, Completion::Canonical, 1).unwrap();
        let b = make_block_act(&p, &mut Allocator::new(&p), &psi, m, &branches, Completion::Rotated(3), 1).unwrap();
        let zero = PreferenceRule::descriptive(u10(), probe.clone(), 0.0);
        assert_eq!(zero.compare(&p, &psi, &a, &b).unwrap().verdict, Verdict::Indifferent);
        let plus = PreferenceRule::descriptive(u10(), probe.clone(), 1.0);
        let minus = PreferenceRule::descriptive(u10(), probe.clone(), -1.0);
        let rp = plus.compare(&p, &psi, &a, &b).unwrap();
        let rm = minus.compare(&p, &psi, &a, &b).unwrap();
        assert_ne!(rp.verdict, Verdict::Indifferent);
        assert_eq!(rm.verdict, rp.verdict.reversed());
        let overlapping = PreferenceRule::descriptive(u10(), psi.clone(), 1.0);
        assert!(matches!(overlapping.score(&p, &psi, &a), Err(Error::Config(_))));
    }

    #[test]
    fn rule_config_round_trip() {
        let p = problem();
        let json = r#"[
            {"rule": "born", "utility": {"reward": 1, "none": 0}},
            {"rule": "fatness", "utility": {"reward": 1, "none": 0}, "mass": {"default": 70}},
            {"rule": "fake_state", "utility": {"reward": 1}, "substitute": [[0, 1]]},
            {"rule": "descriptive", "utility": {"reward": 1, "none": 0}, "probe": [{"index": 3, "re": 1}], "penalty": 0.5}
        ]"#;
        let cfgs: Vec<RuleConfig> = serde_json::from_str(json).unwrap();
        for cfg in &cfgs {
            let rule = PreferenceRule::from_config(&p, cfg).unwrap();
            assert_eq!(&rule.to_config(&p), cfg);
        }
        let bad: RuleConfig = serde_json::from_str(r#"{"rule": "fatness", "utility": {}, "mass": {"default": -1}}"#).unwrap();
        assert!(PreferenceRule::from_config(&p, &bad).is_err());
    }

    #[test]
    fn constant_mass_agrees_with_born() {
        let p = problem();
        let m = p.macrostate_at(1, 0, 0).unwrap().id;
        let psi = p.state_in(m, &[c(1.0)]).unwrap();
        let born = PreferenceRule::born(u10());
        let fat = PreferenceRule::fatness(u10(), MassMap::constant(80.0));
        let mut acts = Vec::new();
        for w in [0.1, 0.5, 0.7] {
            let spec = [Branch::new(0, w), Branch::new(1, 1.0 - w)];
            acts.push(make_block_act(&p, &mut Allocator::new(&p), &psi, m, &spec, Completion::Canonical, 1).unwrap());
        }
        acts.push(make_branching(&p, &mut Allocator::new(&p), &psi, m, &BranchSpec::new(vec![0.5, 0.5]), 1).unwrap());
        for a in &acts {
            for b in &acts {
                assert_eq!(
                    born.compare(&p, &psi, a, b).unwrap().verdict,
                    fat.compare(&p, &psi, a, b).unwrap().verdict
                );
            }
        }
    }

    #[test]
    fn best_and_worst() {
        let u = UtilityFunction::new(vec![0.4, 1.0, 0.0, 0.75]);
        assert_eq!(u.best(), Some(1));
        assert_eq!(u.worst(), Some(2));
        assert_eq!(u.affine(10.0, -5.0).get(0), Some(-1.0));
    }

    #[test]
    fn fatness_config_round_trips_through_json() {
        let cfg = RuleConfig::Fatness {
            utility: [("reward".to_string(), 1.0)].into_iter().collect(),
            mass: MassMap {
                default: Some(70.0),
                by_macrostate: [(3, 55.0), (12, 90.0)].into_iter().collect(),
            },
        };
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RuleConfig>(&json).unwrap(), cfg);
        let bad = json.replace("\"12\"", "\"x\"");
        assert!(serde_json::from_str::<RuleConfig>(&bad).is_err());
    }
}
