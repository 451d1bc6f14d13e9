//! Executable constructions behind the representation theorem: the
//! equivalence chain, nullity and dominance checks, utility elicitation by
//! bisection, and a randomized check of the expected-utility representation.

use crate::construct::{
    glue, glue_over, make_branching, make_erasure, make_identity_embedding, make_reward_act,
    ActFunction, Allocator, BranchSpec,
};
use crate::error::{Error, Result};
use crate::generate::random_act_pair;
use crate::linalg::{self, ComplexVector};
use crate::model::{branch_state, macrostate_weights, Act, ActData, DecisionProblem, Event, MacrostateId, RewardFunction, RewardId};
use crate::rules::{expected_utility, to_sparse, Amplitude, ComparisonResult, Preference, UtilityFunction, Verdict};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// The acts and states produced by the equivalence construction.
#[derive(Debug, Clone)]
pub struct EquivalenceChain {
    pub reward_function: RewardFunction,
    pub w: Act,
    pub w2: Act,
    pub x: Act,
    pub x2: Act,
    pub y: Act,
    pub y2: Act,
    pub final_state: ComplexVector,
    pub final_state2: ComplexVector,
    pub max_state_gap: f64,
}

/// Non-null macrostates of an image, grouped by reward.
fn partition_by_reward(p: &DecisionProblem, img: &ComplexVector) -> BTreeMap<RewardId, Vec<(MacrostateId, f64)>> {
    let mut cells: BTreeMap<RewardId, Vec<(MacrostateId, f64)>> = BTreeMap::new();
    for (m, w) in macrostate_weights(p, img) {
        cells.entry(p.macrostates()[m].reward).or_default().push((m, w));
    }
    cells
}

/// Builds `Y = XWU` and `Y′ = X′W′U′` for two acts with equal reward
/// functions: `W`, `W′` refine every branch into cells of weight
/// W(M|U)·W(N|U′)/W(r), and `X`, `X′` erase each pair of matching cells
/// into one shared macrostate.
pub fn build_equivalence_chain(
    p: &DecisionProblem,
    psi: &ComplexVector,
    u: &Act,
    psi2: &ComplexVector,
    u2: &Act,
) -> Result<EquivalenceChain> {
    let rf = u.reward_function(p, psi)?;
    let rf2 = u2.reward_function(p, psi2)?;
    let diff = rf.max_abs_diff(&rf2);
    if diff > p.tolerance().eq_eps {
        return Err(Error::Precondition(format!("reward functions differ by {diff}")));
    }
    let (s1, s2) = (u.target_stage(), u2.target_stage());
    let last = s1.max(s2) + 2;
    if last >= p.stage_count() {
        return Err(Error::Capacity(format!(
            "the chain needs stage {last}, the problem has {}",
            p.stage_count()
        )));
    }
    let used = u.domain().union(u2.domain()).union(&u.outcome_event(p)).union(&u2.outcome_event(p));
    let mut alloc = Allocator::avoiding(p, &used)?;
    let img = u.apply(psi)?;
    let img2 = u2.apply(psi2)?;
    let cells = partition_by_reward(p, &img);
    let cells2 = partition_by_reward(p, &img2);

    // one erasure target per (M, N) pair of each reward
    let mut targets: BTreeMap<(MacrostateId, MacrostateId), MacrostateId> = BTreeMap::new();
    for (r, ms) in &cells {
        for (m, _) in ms {
            for (n, _) in cells2.get(r).map(Vec::as_slice).unwrap_or(&[]) {
                targets.insert((*m, *n), alloc.allocate(p, *r, last)?);
            }
        }
    }

    let (w, x) = refine_and_erase(p, &mut alloc, u, &img, &cells, &cells2, s1 + 1, last, |m, n| targets[&(m, n)])?;
    let (w2, x2) = refine_and_erase(p, &mut alloc, u2, &img2, &cells2, &cells, s2 + 1, last, |n, m| {
        targets[&(m, n)]
    })?;
    let y = u.then(p, &w)?.then(p, &x)?;
    let y2 = u2.then(p, &w2)?.then(p, &x2)?;
    let final_state = y.image(p, psi)?;
    let final_state2 = y2.image(p, psi2)?;
    let max_state_gap = final_state.distance(&final_state2)?;
    Ok(EquivalenceChain {
        reward_function: rf,
        w,
        w2,
        x,
        x2,
        y,
        y2,
        final_state,
        final_state2,
        max_state_gap,
    })
}

/// One side of the chain. `ours` partitions this act's image, `theirs` the
/// other's; `target(m, n)` names the shared erasure macrostate.
#[allow(clippy::too_many_arguments)]
fn refine_and_erase(
    p: &DecisionProblem,
    alloc: &mut Allocator,
    u: &Act,
    img: &ComplexVector,
    ours: &BTreeMap<RewardId, Vec<(MacrostateId, f64)>>,
    theirs: &BTreeMap<RewardId, Vec<(MacrostateId, f64)>>,
    mid: usize,
    last: usize,
    target: impl Fn(MacrostateId, MacrostateId) -> MacrostateId,
) -> Result<(Act, Act)> {
    let outcome = u.outcome_event(p);
    let mut pieces = Vec::new();
    // cell of W's image → erasure target
    let mut erase_to: BTreeMap<MacrostateId, MacrostateId> = BTreeMap::new();
    let non_null: BTreeMap<MacrostateId, RewardId> = ours
        .iter()
        .flat_map(|(r, ms)| ms.iter().map(move |(m, _)| (*m, *r)))
        .collect();
    for m in outcome.ids() {
        match non_null.get(&m) {
            Some(r) => {
                let others = theirs.get(r).ok_or_else(|| {
                    Error::Precondition(format!("reward {r} is null for one act and not the other"))
                })?;
                let total: f64 = others.iter().map(|(_, w)| w).sum();
                let spec = BranchSpec::new(others.iter().map(|(_, w)| w / total).collect());
                let chi = branch_state(p, img, &Event::singleton(m)).expect("non-null cell");
                let before = alloc.clone();
                let branching = make_branching(p, alloc, &chi, m, &spec, mid)?;
                // the branching's first targets are its branch cells, in order
                let mut probe = before;
                for (n, _) in others {
                    let cell = probe.allocate(p, *r, mid)?;
                    erase_to.insert(cell, target(m, *n));
                }
                pieces.push(branching);
            }
            None => pieces.push(make_identity_embedding(p, alloc, &Event::singleton(m), mid)?),
        }
    }
    let w = glue(p, alloc, &ActFunction::new(pieces))?;
    let w_img = w.apply(img)?;
    let x = glue_over(p, alloc, &w.outcome_event(p), |alloc, k| match erase_to.get(&k) {
        Some(&t) => {
            let chi = branch_state(p, &w_img, &Event::singleton(k)).expect("non-null cell");
            make_erasure(p, alloc, &chi, k, t)
        }
        None => make_identity_embedding(p, alloc, &Event::singleton(k), last),
    })?;
    Ok((w, x))
}

/// A finitely supported reward function realized as a branching followed
/// by reward acts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardLottery {
    pub support: Vec<(RewardId, f64)>,
}

impl RewardLottery {
    /// f[α]: weight α on `s`, 1 − α on `t`.
    pub fn f(alpha: f64, s: RewardId, t: RewardId) -> Self {
        RewardLottery {
            support: vec![(s, alpha), (t, 1.0 - alpha)],
        }
    }

    /// g[r]: all weight on `r`.
    pub fn g(r: RewardId) -> Self {
        RewardLottery { support: vec![(r, 1.0)] }
    }

    pub fn expected_utility(&self, u: &UtilityFunction) -> Option<f64> {
        self.support
            .iter()
            .filter(|(_, w)| *w > 0.0)
            .map(|(r, w)| u.get(*r).map(|v| v * w))
            .sum()
    }
}

/// A fixed starting state and macrostate from which lottery acts are built.
#[derive(Debug, Clone)]
pub struct LotteryContext {
    pub start: MacrostateId,
    pub psi: ComplexVector,
}

impl LotteryContext {
    pub fn new(p: &DecisionProblem) -> Result<Self> {
        if p.stage_count() < 3 {
            return Err(Error::Capacity("lottery acts need at least three stages".into()));
        }
        let start = p.macrostate_at(0, 0, 0)?.id;
        let mut local = vec![linalg::ZERO; p.macrostates()[start].dim];
        local[0] = linalg::ONE;
        let psi = p.state_in(start, &local)?;
        Ok(LotteryContext { start, psi })
    }

    /// g[r] as a direct reward act.
    pub fn g(&self, p: &DecisionProblem, r: RewardId) -> Result<Act> {
        make_reward_act(p, &mut Allocator::new(p), self.start, r, 1)
    }

    /// A branching with the lottery's weights, then a reward act per branch.
    pub fn act(&self, p: &DecisionProblem, lottery: &RewardLottery) -> Result<Act> {
        let support: Vec<(RewardId, f64)> = lottery.support.iter().copied().filter(|(_, w)| *w > 0.0).collect();
        let total: f64 = support.iter().map(|(_, w)| w).sum();
        let spec = BranchSpec::new(support.iter().map(|(_, w)| w / total).collect());
        let mut alloc = Allocator::new(p);
        let split = make_branching(p, &mut alloc, &self.psi, self.start, &spec, 1)?;
        let home = p.macrostates()[self.start].reward;
        let cells: Vec<MacrostateId> = (0..support.len())
            .map(|i| p.macrostate_at(home, 1, i).map(|m| m.id))
            .collect::<Result<_>>()?;
        let cont = glue_over(p, &mut alloc, &split.outcome_event(p), |alloc, m| {
            match cells.iter().position(|&c| c == m) {
                Some(i) => make_reward_act(p, alloc, m, support[i].0, 2),
                None => make_identity_embedding(p, alloc, &Event::singleton(m), 2),
            }
        })?;
        split.then(p, &cont)
    }

    pub fn f(&self, p: &DecisionProblem, alpha: f64, s: RewardId, t: RewardId) -> Result<Act> {
        self.act(p, &RewardLottery::f(alpha, s, t))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceCheck {
    pub alpha: f64,
    pub beta: f64,
    pub expected: Verdict,
    pub observed: ComparisonResult,
    pub agrees: bool,
}

/// Compares f[α] with f[β]; the verdict should follow sign(α − β).
pub fn verify_dominance(
    rule: &dyn Preference,
    p: &DecisionProblem,
    alpha: f64,
    beta: f64,
    s: RewardId,
    t: RewardId,
) -> Result<DominanceCheck> {
    for x in [alpha, beta] {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("lottery weight {x} outside [0, 1]")));
        }
    }
    let ctx = LotteryContext::new(p)?;
    let st = rule.compare(p, &ctx.psi, &ctx.g(p, s)?, &ctx.g(p, t)?)?;
    if st.verdict != Verdict::PreferA {
        return Err(Error::Degenerate(format!(
            "the rule does not strictly prefer {} to {}",
            p.reward_label(s),
            p.reward_label(t)
        )));
    }
    let observed = rule.compare(p, &ctx.psi, &ctx.f(p, alpha, s, t)?, &ctx.f(p, beta, s, t)?)?;
    let expected = if alpha > beta {
        Verdict::PreferA
    } else if alpha < beta {
        Verdict::PreferB
    } else {
        Verdict::Indifferent
    };
    Ok(DominanceCheck {
        alpha,
        beta,
        expected,
        observed,
        agrees: observed.verdict == expected,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElicitOptions {
    /// Final bisection width.
    pub tol: f64,
    /// Number of calibration intervals on [0, 1].
    pub grid: usize,
    /// Utilities assigned to the best and worst rewards.
    pub anchors: (f64, f64),
}

impl Default for ElicitOptions {
    fn default() -> Self {
        ElicitOptions {
            tol: 1e-12,
            grid: 10,
            anchors: (1.0, 0.0),
        }
    }
}

const MAX_BISECTIONS: usize = 64;

/// u(r) = lub{α : g[r] ≻ f[α]}, rescaled so that u(s), u(t) are the anchors.
pub fn elicit_utility(
    rule: &dyn Preference,
    p: &DecisionProblem,
    r: RewardId,
    s: RewardId,
    t: RewardId,
    opts: &ElicitOptions,
) -> Result<f64> {
    let (hi, lo) = opts.anchors;
    if r == s {
        return Ok(hi);
    }
    if r == t {
        return Ok(lo);
    }
    let ctx = LotteryContext::new(p)?;
    let g = ctx.g(p, r)?;
    let prefers_g = |alpha: f64| -> Result<bool> {
        Ok(rule.compare(p, &ctx.psi, &g, &ctx.f(p, alpha, s, t)?)?.verdict == Verdict::PreferA)
    };
    if rule.compare(p, &ctx.psi, &ctx.g(p, s)?, &ctx.g(p, t)?)?.verdict != Verdict::PreferA {
        return Err(Error::Degenerate("the anchor rewards are not strictly ordered".into()));
    }
    let n = opts.grid.max(1);
    let grid: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let acts: Vec<Act> = grid.iter().map(|&a| ctx.f(p, a, s, t)).collect::<Result<_>>()?;
    for (i, pair) in acts.windows(2).enumerate() {
        if rule.compare(p, &ctx.psi, &pair[1], &pair[0])?.verdict != Verdict::PreferA {
            return Err(Error::Monotonicity(format!(
                "f[{}] is not preferred to f[{}]; the rule violates dominance",
                grid[i + 1],
                grid[i]
            )));
        }
    }
    let verdicts: Vec<bool> = acts
        .iter()
        .map(|f| Ok(rule.compare(p, &ctx.psi, &g, f)?.verdict == Verdict::PreferA))
        .collect::<Result<_>>()?;
    if verdicts.windows(2).any(|w| !w[0] && w[1]) {
        return Err(Error::Monotonicity("g[r] ≻ f[α] is not monotone in α".into()));
    }
    if *verdicts.last().expect("grid") {
        return Err(Error::Precondition(format!(
            "{} is preferred to the best reward {}",
            p.reward_label(r),
            p.reward_label(s)
        )));
    }
    let (mut a, mut b) = match verdicts.iter().position(|v| !v) {
        Some(0) => return Ok(lo),
        Some(i) => (grid[i - 1], grid[i]),
        None => unreachable!("last verdict is false"),
    };
    for _ in 0..MAX_BISECTIONS {
        if b - a <= opts.tol {
            break;
        }
        let mid = 0.5 * (a + b);
        if prefers_g(mid)? {
            a = mid;
        } else {
            b = mid;
        }
    }
    let alpha = 0.5 * (a + b);
    Ok(lo + alpha * (hi - lo))
}

/// The best and worst rewards under the rule, judged on g[r] acts.
pub fn extreme_rewards(rule: &dyn Preference, p: &DecisionProblem) -> Result<(RewardId, RewardId)> {
    let ctx = LotteryContext::new(p)?;
    let acts: Vec<Act> = (0..p.reward_count()).map(|r| ctx.g(p, r)).collect::<Result<_>>()?;
    let (mut best, mut worst) = (0, 0);
    for r in 1..acts.len() {
        if rule.compare(p, &ctx.psi, &acts[r], &acts[best])?.verdict == Verdict::PreferA {
            best = r;
        }
        if rule.compare(p, &ctx.psi, &acts[r], &acts[worst])?.verdict == Verdict::PreferB {
            worst = r;
        }
    }
    if best == worst || rule.compare(p, &ctx.psi, &acts[best], &acts[worst])?.verdict != Verdict::PreferA {
        return Err(Error::Degenerate("the rule is indifferent between all rewards".into()));
    }
    Ok((best, worst))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchWitness {
    pub trial: usize,
    pub seed: u64,
    pub state: Vec<Amplitude>,
    pub a: ActData,
    pub b: ActData,
    pub verdict: Verdict,
    pub eu_a: f64,
    pub eu_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentationReport {
    pub rule: String,
    pub best: String,
    pub worst: String,
    pub anchors: (f64, f64),
    pub utilities: BTreeMap<String, f64>,
    pub dominance_ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elicitation_error: Option<String>,
    pub trials: usize,
    pub mismatches: usize,
    pub witnesses: Vec<MismatchWitness>,
    pub seed: u64,
}

const MAX_WITNESSES: usize = 5;

/// Sub-seed for the `i`-th item of a seeded stream.
pub fn sub_seed(seed: u64, i: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ i.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Elicits a utility from the rule and checks that its verdicts on random
/// act pairs follow expected utility.
pub fn verify_representation(
    rule: &dyn Preference,
    p: &DecisionProblem,
    trials: usize,
    seed: u64,
    opts: &ElicitOptions,
) -> Result<RepresentationReport> {
    let (s, t) = extreme_rewards(rule, p)?;
    let mut dominance_ok = true;
    let n = opts.grid.max(1);
    for i in 0..n {
        let check = verify_dominance(rule, p, (i + 1) as f64 / n as f64, i as f64 / n as f64, s, t)?;
        dominance_ok &= check.agrees;
    }
    let mut elicitation_error = None;
    let elicited: Result<Vec<f64>> = (0..p.reward_count()).map(|r| elicit_utility(rule, p, r, s, t, opts)).collect();
    let utility = match elicited {
        Ok(v) => UtilityFunction::new(v),
        Err(e @ (Error::Monotonicity(_) | Error::Precondition(_))) => {
            let declared = rule.utility().cloned().ok_or_else(|| e.clone())?;
            elicitation_error = Some(e.to_string());
            declared
        }
        Err(e) => return Err(e),
    };
    let tie = p.tolerance().tie_eps;
    let outcomes: Vec<Option<MismatchWitness>> = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<Option<MismatchWitness>> {
            let trial_seed = sub_seed(seed, i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
            let (psi, a, b) = random_act_pair(p, &mut rng)?;
            let c = rule.compare(p, &psi, &a, &b)?;
            let eu_a = expected_utility(p, &psi, &a, &utility)?;
            let eu_b = expected_utility(p, &psi, &b, &utility)?;
            let expected = Verdict::from_difference(eu_a - eu_b, tie);
            Ok((c.verdict != expected).then(|| MismatchWitness {
                trial: i,
                seed: trial_seed,
                state: to_sparse(&psi),
                a: a.to_data(),
                b: b.to_data(),
                verdict: c.verdict,
                eu_a,
                eu_b,
            }))
        })
        .collect::<Result<_>>()?;
    let mismatched: Vec<MismatchWitness> = outcomes.into_iter().flatten().collect();
    Ok(RepresentationReport {
        rule: rule.name(),
        best: p.reward_label(s).to_string(),
        worst: p.reward_label(t).to_string(),
        anchors: opts.anchors,
        utilities: utility.to_labels(p),
        dominance_ok,
        elicitation_error,
        trials,
        mismatches: mismatched.len(),
        witnesses: mismatched.into_iter().take(MAX_WITNESSES).collect(),
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullityBranch {
    pub macrostate: MacrostateId,
    pub weight: f64,
    /// weight < eq_eps.
    pub null_by_weight: bool,
    /// The rule ignores every substitution on this macrostate.
    pub null_by_substitution: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullityReport {
    pub branches: Vec<NullityBranch>,
    pub agrees: bool,
}

/// Checks, for every outcome macrostate of `a`, that the rule ignores
/// substitutions there exactly when its weight is below `eq_eps`.
pub fn verify_nullity(rule: &dyn Preference, p: &DecisionProblem, psi: &ComplexVector, a: &Act) -> Result<NullityReport> {
    let (s, t) = extreme_rewards(rule, p)?;
    let next = a.target_stage() + 1;
    if next >= p.stage_count() {
        return Err(Error::Capacity("no stage left for substitutions".into()));
    }
    let outcome = a.outcome_event(p);
    let img = a.image(p, psi)?;
    let used = a.domain().union(&outcome);
    let continuation = |cell: MacrostateId, sub: Option<RewardId>| -> Result<Act> {
        let mut alloc = Allocator::avoiding(p, &used)?;
        glue_over(p, &mut alloc, &outcome, |alloc, m| match sub {
            Some(r) if m == cell => make_reward_act(p, alloc, m, r, next),
            _ => make_identity_embedding(p, alloc, &Event::singleton(m), next),
        })
    };
    let mut branches = Vec::new();
    for m in outcome.ids() {
        let weight = img.mass_on(p.macrostates()[m].basis());
        let to_s = a.then(p, &continuation(m, Some(s))?)?;
        let to_t = a.then(p, &continuation(m, Some(t))?)?;
        let keep = a.then(p, &continuation(m, None)?)?;
        let mut ignored = true;
        for (x, y) in [(&to_s, &to_t), (&to_s, &keep), (&keep, &to_t)] {
            ignored &= rule.compare(p, psi, x, y)?.verdict == Verdict::Indifferent;
        }
        branches.push(NullityBranch {
            macrostate: m,
            weight,
            null_by_weight: weight < p.tolerance().eq_eps,
            null_by_substitution: ignored,
        });
    }
    let agrees = branches.iter().all(|b| b.null_by_weight == b.null_by_substitution);
    Ok(NullityReport { branches, agrees })
}
