//! Falsifiers for the rationality axioms and constructive checks of the
//! richness axioms.
//!
//! A passing check means no violation was found on the given witnesses.

use crate::construct::{
    glue, make_branching, make_erasure_pair, make_identity_embedding, make_reward_act, ActFunction, Allocator,
    BranchSpec,
};
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, ComplexVector};
use crate::model::{branch_state, Act, ActData, DecisionProblem, Event, MacrostateId};
use crate::rules::{sparse_state, to_sparse, Amplitude, ComparisonResult, Preference, Verdict};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    Ordering,
    DiachronicI,
    DiachronicIi,
    MacrostateIndiff,
    BranchingIndiff,
    StateSupervenience,
    SolutionContinuity,
}

impl Axiom {
    pub const ALL: [Axiom; 7] = [
        Axiom::Ordering,
        Axiom::DiachronicI,
        Axiom::DiachronicIi,
        Axiom::MacrostateIndiff,
        Axiom::BranchingIndiff,
        Axiom::StateSupervenience,
        Axiom::SolutionContinuity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Axiom::Ordering => "ordering",
            Axiom::DiachronicI => "diachronic_i",
            Axiom::DiachronicIi => "diachronic_ii",
            Axiom::MacrostateIndiff => "macrostate_indiff",
            Axiom::BranchingIndiff => "branching_indiff",
            Axiom::StateSupervenience => "state_supervenience",
            Axiom::SolutionContinuity => "solution_continuity",
        }
    }
}

impl std::fmt::Display for Axiom {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckOutcome {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomCheckResult {
    pub axiom: Axiom,
    pub passed: bool,
    pub outcome: CheckOutcome,
    pub margin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl AxiomCheckResult {
    fn pass(axiom: Axiom, margin: f64) -> Self {
        AxiomCheckResult {
            axiom,
            passed: true,
            outcome: CheckOutcome::Pass,
            margin,
            witness: None,
            seed: None,
        }
    }

    fn fail(axiom: Axiom, margin: f64, witness: Witness) -> Self {
        AxiomCheckResult {
            axiom,
            passed: false,
            outcome: CheckOutcome::Fail,
            margin,
            witness: Some(witness),
            seed: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn is_inconclusive(&self) -> bool {
        self.outcome == CheckOutcome::Inconclusive
    }
}

/// Two comparisons `(ψ; U vs V)` and `(ψ′; U′ vs V′)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadruple {
    pub psi: ComplexVector,
    pub u: Act,
    pub v: Act,
    pub psi2: ComplexVector,
    pub u2: Act,
    pub v2: Act,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadrupleData {
    pub psi: Vec<Amplitude>,
    pub u: ActData,
    pub v: ActData,
    pub psi2: Vec<Amplitude>,
    pub u2: ActData,
    pub v2: ActData,
}

impl From<&Quadruple> for QuadrupleData {
    fn from(q: &Quadruple) -> Self {
        QuadrupleData {
            psi: to_sparse(&q.psi),
            u: q.u.to_data(),
            v: q.v.to_data(),
            psi2: to_sparse(&q.psi2),
            u2: q.u2.to_data(),
            v2: q.v2.to_data(),
        }
    }
}

impl QuadrupleData {
    pub fn into_quadruple(self, p: &DecisionProblem) -> Result<Quadruple> {
        Ok(Quadruple {
            psi: sparse_state(p, &self.psi)?,
            u: self.u.into_act(p)?,
            v: self.v.into_act(p)?,
            psi2: sparse_state(p, &self.psi2)?,
            u2: self.u2.into_act(p)?,
            v2: self.v2.into_act(p)?,
        })
    }
}

/// The per-branch comparison behind a diachronic check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchVerdict {
    pub macrostate: MacrostateId,
    pub weight: f64,
    pub comparison: ComparisonResult,
}

/// Replayable data behind a check result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Ordering {
        state: Vec<Amplitude>,
        acts: Vec<ActData>,
        /// Indices into `acts` exhibiting the violation.
        offending: Vec<usize>,
    },
    Diachronic {
        state: Vec<Amplitude>,
        u: ActData,
        v1: ActData,
        v2: ActData,
        branches: Vec<BranchVerdict>,
        composite: ComparisonResult,
    },
    MacrostateIndifference(QuadrupleData),
    BranchingIndifference {
        state: Vec<Amplitude>,
        macrostate: MacrostateId,
        target_stage: usize,
        spec: BranchSpec,
        comparison: ComparisonResult,
    },
    StateSupervenience(QuadrupleData),
    SolutionContinuity {
        state: Vec<Amplitude>,
        a: ActData,
        b: ActData,
        samples: usize,
        seed: u64,
        a_perturbed: ActData,
        b_perturbed: ActData,
    },
}

/// Asymmetry, irreflexivity, and transitivity of ≻ and ∼ over `acts`.
pub fn check_ordering(rule: &dyn Preference, p: &DecisionProblem, acts: &[Act], psi: &ComplexVector) -> Result<AxiomCheckResult> {
    let n = acts.len();
    let mut table = vec![vec![None; n]; n];
    for i in 0..n {
        for j in 0..n {
            table[i][j] = Some(rule.compare(p, psi, &acts[i], &acts[j])?);
        }
    }
    let cmp = |i: usize, j: usize| table[i][j].expect("filled");
    let fail = |offending: Vec<usize>, margin: f64| {
        let witness = Witness::Ordering {
            state: to_sparse(psi),
            acts: acts.iter().map(Act::to_data).collect(),
            offending,
        };
        Ok(AxiomCheckResult::fail(Axiom::Ordering, margin, witness))
    };
    for i in 0..n {
        let own = cmp(i, i);
        if own.verdict != Verdict::Indifferent {
            return fail(vec![i], own.margin.abs());
        }
        for j in i + 1..n {
            let (ij, ji) = (cmp(i, j), cmp(j, i));
            if ij.verdict != ji.verdict.reversed() {
                return fail(vec![i, j], (ij.margin + ji.margin).abs());
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let (ij, jk, ik) = (cmp(i, j), cmp(j, k), cmp(i, k));
                if ij.verdict == Verdict::PreferA && jk.verdict == Verdict::PreferA && ik.verdict != Verdict::PreferA {
                    let margin = ij.margin.abs().min(jk.margin.abs());
                    return fail(vec![i, j, k], margin);
                }
                if ij.verdict == Verdict::Indifferent
                    && jk.verdict == Verdict::Indifferent
                    && ik.verdict != Verdict::Indifferent
                {
                    return fail(vec![i, j, k], ik.margin.abs());
                }
            }
        }
    }
    Ok(AxiomCheckResult::pass(Axiom::Ordering, 0.0))
}

/// Diachronic consistency for `V1∘U` versus `V2∘U`, judged against the
/// per-branch preferences on the atomic partition of `O_U`.
pub fn check_diachronic(
    rule: &dyn Preference,
    p: &DecisionProblem,
    psi: &ComplexVector,
    u: &Act,
    v1: &Act,
    v2: &Act,
) -> Result<AxiomCheckResult> {
    let outcome = u.outcome_event(p);
    for v in [v1, v2] {
        if !outcome.is_subset(v.domain()) {
            return Err(Error::Precondition(format!(
                "continuation on {} is not available at the outcome event {outcome}",
                v.domain()
            )));
        }
    }
    let img = u.image(p, psi)?;
    let eps = p.tolerance().eq_eps;
    let mut branches = Vec::new();
    for m in outcome.ids() {
        let cell = Event::singleton(m);
        let weight = img.mass_on(p.macrostates()[m].basis());
        if weight < eps {
            continue;
        }
        let chi = branch_state(p, &img, &cell).expect("non-null branch");
        let comparison = rule.compare(p, &chi, &v1.restrict(p, &cell)?, &v2.restrict(p, &cell)?)?;
        branches.push(BranchVerdict {
            macrostate: m,
            weight,
            comparison,
        });
    }
    let composite = rule.compare(p, psi, &u.then(p, v1)?, &u.then(p, v2)?)?;
    let witness = || Witness::Diachronic {
        state: to_sparse(psi),
        u: u.to_data(),
        v1: v1.to_data(),
        v2: v2.to_data(),
        branches: branches.clone(),
        composite,
    };

    let mut exercised = Axiom::DiachronicI;
    // direction +1 checks V1 against V2, direction −1 the reverse
    for (prefer, dispreferred) in [(Verdict::PreferA, Verdict::PreferB), (Verdict::PreferB, Verdict::PreferA)] {
        if branches.iter().any(|b| b.comparison.verdict == dispreferred) {
            continue;
        }
        let strict: Vec<f64> = branches
            .iter()
            .filter(|b| b.comparison.verdict == prefer)
            .map(|b| b.comparison.margin.abs())
            .collect();
        if composite.verdict == dispreferred {
            return Ok(AxiomCheckResult::fail(Axiom::DiachronicI, composite.margin.abs(), witness()));
        }
        if !strict.is_empty() {
            exercised = Axiom::DiachronicIi;
            if composite.verdict != prefer {
                let margin = strict.iter().copied().fold(0.0, f64::max);
                return Ok(AxiomCheckResult::fail(Axiom::DiachronicIi, margin, witness()));
            }
        }
    }
    Ok(AxiomCheckResult::pass(exercised, composite.margin.abs()))
}

/// The single macrostate containing an act's outcome, if there is one.
fn single_outcome(p: &DecisionProblem, a: &Act) -> Option<MacrostateId> {
    let o = a.outcome_event(p);
    (o.len() == 1).then(|| o.ids().next().expect("one element"))
}

/// Macrostate indifference: when U, U′ land in one macrostate M1 and V, V′
/// in one macrostate M2, `U ⪰^ψ V` iff `U′ ⪰^ψ′ V′`.
pub fn check_macrostate_indifference(rule: &dyn Preference, p: &DecisionProblem, w: &Quadruple) -> Result<AxiomCheckResult> {
    let (mu, mu2) = (single_outcome(p, &w.u), single_outcome(p, &w.u2));
    let (mv, mv2) = (single_outcome(p, &w.v), single_outcome(p, &w.v2));
    match (mu, mu2, mv, mv2) {
        (Some(a), Some(b), Some(c), Some(d)) if a == b && c == d => {}
        _ => {
            return Err(Error::Witness(
                "U, U′ must land in one macrostate and V, V′ in one macrostate".into(),
            ))
        }
    }
    compare_pairs(rule, p, w, Axiom::MacrostateIndiff, Witness::MacrostateIndifference)
}

fn compare_pairs(
    rule: &dyn Preference,
    p: &DecisionProblem,
    w: &Quadruple,
    axiom: Axiom,
    wrap: fn(QuadrupleData) -> Witness,
) -> Result<AxiomCheckResult> {
    let c1 = rule.compare(p, &w.psi, &w.u, &w.v)?;
    let c2 = rule.compare(p, &w.psi2, &w.u2, &w.v2)?;
    let margin = (c1.margin - c2.margin).abs();
    if c1.verdict == c2.verdict {
        Ok(AxiomCheckResult::pass(axiom, margin))
    } else {
        Ok(AxiomCheckResult::fail(axiom, margin, wrap(QuadrupleData::from(w))))
    }
}

/// Branching indifference: each P-branching of `psi` in `m` must be
/// indifferent to the identity embedding.
pub fn check_branching_indifference(
    rule: &dyn Preference,
    p: &DecisionProblem,
    psi: &ComplexVector,
    m: MacrostateId,
    specs: &[BranchSpec],
    target_stage: usize,
) -> Result<AxiomCheckResult> {
    let mut worst: Option<(f64, BranchSpec, ComparisonResult)> = None;
    let mut largest = 0.0f64;
    for spec in specs {
        let mut alloc = Allocator::avoiding(p, &Event::singleton(m))?;
        let branching = make_branching(p, &mut alloc, psi, m, spec, target_stage)?;
        let mut alloc = Allocator::avoiding(p, &Event::singleton(m))?;
        let identity = make_identity_embedding(p, &mut alloc, &Event::singleton(m), target_stage)?;
        let c = rule.compare(p, psi, &branching, &identity)?;
        largest = largest.max(c.margin.abs());
        if c.verdict != Verdict::Indifferent && worst.as_ref().is_none_or(|(w, _, _)| c.margin.abs() > *w) {
            worst = Some((c.margin.abs(), spec.clone(), c));
        }
    }
    Ok(match worst {
        None => AxiomCheckResult::pass(Axiom::BranchingIndiff, largest),
        Some((margin, spec, comparison)) => AxiomCheckResult::fail(
            Axiom::BranchingIndiff,
            margin,
            Witness::BranchingIndifference {
                state: to_sparse(psi),
                macrostate: m,
                target_stage,
                spec,
                comparison,
            },
        ),
    })
}

/// State supervenience: if `Uψ = U′ψ′` and `Vψ = V′ψ′` then the two
/// comparisons agree.
pub fn check_state_supervenience(rule: &dyn Preference, p: &DecisionProblem, w: &Quadruple) -> Result<AxiomCheckResult> {
    let eps = p.tolerance().eq_eps;
    let gap_u = w.u.image(p, &w.psi)?.distance(&w.u2.image(p, &w.psi2)?)?;
    let gap_v = w.v.image(p, &w.psi)?.distance(&w.v2.image(p, &w.psi2)?)?;
    if gap_u > eps || gap_v > eps {
        return Err(Error::Witness(format!(
            "image states differ (‖Uψ − U′ψ′‖ = {gap_u}, ‖Vψ − V′ψ′‖ = {gap_v})"
        )));
    }
    compare_pairs(rule, p, w, Axiom::StateSupervenience, Witness::StateSupervenience)
}

/// Random available act within Frobenius distance `radius` of `a`, with the
/// same per-macrostate outcome structure.
pub fn perturb_act<R: Rng + ?Sized>(p: &DecisionProblem, a: &Act, radius: f64, rng: &mut R) -> Result<Act> {
    if radius <= 0.0 {
        return Ok(a.clone());
    }
    let mut noise = ComplexMatrix::zeros(p.dim(), a.matrix().cols());
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for m in a.domain().ids() {
        let cell = Event::singleton(m);
        let piece = a.restrict(p, &cell)?;
        let rows = p.event_basis(&piece.outcome_event(p));
        let cols: Vec<usize> = p
            .macrostates()[m]
            .basis()
            .map(|b| a.domain_basis().binary_search(&b).expect("in domain"))
            .collect();
        for &c in &cols {
            for &r in &rows {
                noise.set(r, c, linalg::random_complex(rng));
            }
        }
        blocks.push(cols);
    }
    let norm = noise.frobenius_norm();
    if norm == 0.0 {
        return Ok(a.clone());
    }
    let mut t = radius / norm;
    for _ in 0..60 {
        let mut m = a.matrix().clone();
        for (i, z) in m.data_mut().iter_mut().enumerate() {
            *z += noise.data()[i] * Complex64::new(t, 0.0);
        }
        // re-orthonormalize each domain macrostate's columns separately so
        // supports stay disjoint
        for cols in &blocks {
            let q = linalg::orthonormalize_columns(&m.select_columns(cols))?;
            for (j, &c) in cols.iter().enumerate() {
                m.set_column(c, &q.column(j))?;
            }
        }
        if m.sub(a.matrix())?.frobenius_norm() <= radius {
            return Act::new(p, a.domain().clone(), a.target_stage(), m);
        }
        t /= 2.0;
    }
    Ok(a.clone())
}

/// Solution continuity: a strict preference survives perturbations of both
/// acts within Frobenius (hence operator-norm) distance `cont_eps·margin`.
pub fn check_solution_continuity(
    rule: &dyn Preference,
    p: &DecisionProblem,
    psi: &ComplexVector,
    a: &Act,
    b: &Act,
    samples: usize,
    seed: u64,
) -> Result<AxiomCheckResult> {
    let tol = p.tolerance();
    let base = rule.compare(p, psi, a, b)?;
    if base.verdict == Verdict::Indifferent || base.margin.abs() <= 10.0 * tol.tie_eps {
        return Ok(AxiomCheckResult {
            axiom: Axiom::SolutionContinuity,
            passed: true,
            outcome: CheckOutcome::Inconclusive,
            margin: base.margin.abs(),
            witness: None,
            seed: Some(seed),
        });
    }
    let radius = tol.cont_eps * base.margin.abs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let a2 = perturb_act(p, a, radius, &mut rng)?;
        let b2 = perturb_act(p, b, radius, &mut rng)?;
        let c = rule.compare(p, psi, &a2, &b2)?;
        if c.verdict != base.verdict {
            let witness = Witness::SolutionContinuity {
                state: to_sparse(psi),
                a: a.to_data(),
                b: b.to_data(),
                samples,
                seed,
                a_perturbed: a2.to_data(),
                b_perturbed: b2.to_data(),
            };
            return Ok(AxiomCheckResult::fail(Axiom::SolutionContinuity, (base.margin - c.margin).abs(), witness)
                .with_seed(seed));
        }
    }
    Ok(AxiomCheckResult::pass(Axiom::SolutionContinuity, base.margin.abs()).with_seed(seed))
}

/// Re-runs the check recorded in a witness.
pub fn replay_witness(rule: &dyn Preference, p: &DecisionProblem, w: &Witness) -> Result<AxiomCheckResult> {
    match w.clone() {
        Witness::Ordering { state, acts, .. } => {
            let acts = acts.into_iter().map(|a| a.into_act(p)).collect::<Result<Vec<_>>>()?;
            check_ordering(rule, p, &acts, &sparse_state(p, &state)?)
        }
        Witness::Diachronic { state, u, v1, v2, .. } => check_diachronic(
            rule,
            p,
            &sparse_state(p, &state)?,
            &u.into_act(p)?,
            &v1.into_act(p)?,
            &v2.into_act(p)?,
        ),
        Witness::MacrostateIndifference(q) => check_macrostate_indifference(rule, p, &q.into_quadruple(p)?),
        Witness::BranchingIndifference {
            state,
            macrostate,
            target_stage,
            spec,
            ..
        } => check_branching_indifference(rule, p, &sparse_state(p, &state)?, macrostate, &[spec], target_stage),
        Witness::StateSupervenience(q) => check_state_supervenience(rule, p, &q.into_quadruple(p)?),
        Witness::SolutionContinuity {
            state,
            a,
            b,
            samples,
            seed,
            ..
        } => check_solution_continuity(rule, p, &sparse_state(p, &state)?, &a.into_act(p)?, &b.into_act(p)?, samples, seed),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub passed: bool,
    pub macrostates: Vec<MacrostateId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl Demonstration {
    fn from_result(macrostates: Vec<MacrostateId>, r: Result<()>) -> Self {
        Demonstration {
            passed: r.is_ok(),
            macrostates,
            failure: r.err().map(|e| e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RichnessReport {
    pub passed: bool,
    pub reward_availability: Demonstration,
    pub branching_availability: Demonstration,
    pub erasure: Demonstration,
    /// Certified from the availability policy rather than sampled.
    pub problem_continuity: String,
}

/// Builds reward acts, branchings and erasures for a sample of first-stage
/// macrostates.
pub fn validate_richness(p: &DecisionProblem) -> RichnessReport {
    let k = p.reward_count();
    let sample: Vec<MacrostateId> = (0..k).filter_map(|r| p.macrostate_at(r, 0, 0).ok().map(|m| m.id)).collect();
    let sample_event: Event = sample.iter().copied().collect();
    let eps = p.tolerance().eq_eps;

    let reward = (|| -> Result<()> {
        let mut alloc = Allocator::avoiding(p, &sample_event)?;
        let mut acts = Vec::new();
        for &m in &sample {
            let target = (p.macrostates()[m].reward + 1) % k;
            let a = make_reward_act(p, &mut alloc, m, target, 1)?;
            if p.reward_of(&a.outcome_event(p)) != Some(target) {
                return Err(Error::Validation(format!("reward act on {m} misses reward {target}")));
            }
            acts.push(a);
        }
        glue(p, &mut alloc, &ActFunction::new(acts)).map(|_| ())
    })();

    let branching = (|| -> Result<()> {
        let mut alloc = Allocator::avoiding(p, &sample_event)?;
        let spec = BranchSpec::new(vec![0.5, 0.5]);
        let mut acts = Vec::new();
        for &m in &sample {
            let psi = p.state_in(m, &vec![Complex64::new(1.0, 0.0); p.macrostates()[m].dim])?
                .normalized()
                .expect("nonzero");
            let a = make_branching(p, &mut alloc, &psi, m, &spec, 1)?;
            let img = a.image(p, &psi)?;
            for (t, w) in crate::model::macrostate_weights(p, &img) {
                if (w - 0.5).abs() > eps || p.macrostates()[t].reward != p.macrostates()[m].reward {
                    return Err(Error::Validation(format!("branching of {m} has weight {w} on {t}")));
                }
            }
            acts.push(a);
        }
        glue(p, &mut alloc, &ActFunction::new(acts)).map(|_| ())
    })();

    let mut erasure_cells = Vec::new();
    let erasure = (|| -> Result<()> {
        let (m1, m2) = (0..k)
            .find_map(|r| Some((p.macrostate_at(r, 0, 0).ok()?.id, p.macrostate_at(r, 0, 1).ok()?.id)))
            .ok_or_else(|| Error::Capacity("no reward has two macrostates at the first stage".into()))?;
        erasure_cells.extend([m1, m2]);
        let d = p.macrostates()[m1].dim;
        let psi = p.state_in(m1, &vec![Complex64::new(1.0, 0.0); d])?.normalized().expect("nonzero");
        let mut phi_local = vec![linalg::ZERO; d];
        phi_local[d - 1] = Complex64::new(0.0, 1.0);
        let phi = p.state_in(m2, &phi_local)?;
        let mut alloc = Allocator::avoiding(p, &[m1, m2].into_iter().collect())?;
        let (a1, a2) = make_erasure_pair(p, &mut alloc, &psi, m1, &phi, m2, 1)?;
        let gap = a1.image(p, &psi)?.distance(&a2.image(p, &phi)?)?;
        if gap > eps {
            return Err(Error::Validation(format!("erased states differ by {gap}")));
        }
        Ok(())
    })();

    let reward_availability = Demonstration::from_result(sample.clone(), reward);
    let branching_availability = Demonstration::from_result(sample, branching);
    let erasure = Demonstration::from_result(erasure_cells, erasure);
    RichnessReport {
        passed: reward_availability.passed && branching_availability.passed && erasure.passed,
        reward_availability,
        branching_availability,
        erasure,
        problem_continuity: "certified: every isometry into a later stage whose per-macrostate outcomes are \
                             disjoint is available, and that condition is open in the norm topology"
            .into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::{make_block_act, Branch, Completion};
    use crate::model::ProblemConfig;
    use crate::rules::fixtures::{CyclicRule, MicrostateIndexRule, ThresholdRule};
    use crate::rules::{PreferenceRule, UtilityFunction};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn u10() -> UtilityFunction {
        UtilityFunction::new(vec![1.0, 0.0])
    }

    fn problem() -> DecisionProblem {
        DecisionProblem::new(ProblemConfig::new(&["reward", "none"], &[4, 8, 8, 8])).unwrap()
    }

    /// u: {1/2, 1/2} branching then reward on the first branch; v1 does
    /// nothing; v2 splits the rewarded branch in two.
    fn a1_a2(p: &DecisionProblem) -> (ComplexVector, Act, Act, Act) {
        let m = p.macrostate_at(1, 0, 0).unwrap().id;
        let psi = p.state_in(m, &[c(1.0)]).unwrap();
        let mut alloc = Allocator::new(p);
        let split = make_branching(p, &mut alloc, &psi, m, &BranchSpec::new(vec![0.5, 0.5]), 1).unwrap();
        let outs: Vec<_> = split.outcome_event(p).ids().collect();
        let pay = make_reward_act(p, &mut alloc, outs[0], 0, 2).unwrap();
        let stay = make_identity_embedding(p, &mut alloc, &Event::singleton(outs[1]), 2).unwrap();
        let cont = glue(p, &mut alloc, &ActFunction::new(vec![pay, stay])).unwrap();
        let u = split.then(p, &cont).unwrap();
        let o: Vec<_> = u.outcome_event(p).ids().collect();
        let (up, down) = if p.macrostates()[o[0]].reward == 0 { (o[0], o[1]) } else { (o[1], o[0]) };
        let v1 = make_identity_embedding(p, &mut alloc, &u.outcome_event(p), 3).unwrap();
        let img = u.image(p, &psi).unwrap();
        let chi = branch_state(p, &img, &Event::singleton(up)).unwrap();
        let b = make_branching(p, &mut alloc, &chi, up, &BranchSpec::new(vec![0.5, 0.5]), 3).unwrap();
        let id = make_identity_embedding(p, &mut alloc, &Event::singleton(down), 3).unwrap();
        let v2 = glue(p, &mut alloc, &ActFunction::new(vec![b, id])).unwrap();
        (psi, u, v1, v2)
    }

    #[test]
    fn cyclic_rule_fails_ordering() {
        let p = problem();
        let m = p.macrostate_at(1, 0, 0).unwrap().id;
        let psi = p.state_in(m, &[c(1.0)]).unwrap();
        let mut alloc = Allocator::new(&p);
        let acts: Vec<Act> = (0..3).map(|_| make_reward_act(&p, &mut alloc, m, 1, 1).unwrap()).collect();
        let r = check_ordering(&CyclicRule, &p, &acts, &psi).unwrap();
        assert!(!r.passed);
        match r.witness {
            Some(Witness::Ordering { offending, .. }) => assert_eq!(offending.len(), 3),
            other => panic!("unexpected witness {other:?}"),
        }
        let born = PreferenceRule::born(u10());
        assert!(check_ordering(&born, &p, &acts, &psi).unwrap().passed);
        assert!(check_ordering(&CyclicRule, &p, &acts[..1], &psi).unwrap().passed);
    }

    #[test]
    fn branch_count_a1_a2() {
        let p = problem();
        let (psi, u, v1, v2) = a1_a2(&p);
        let bc = PreferenceRule::branch_count(u10());
        assert_eq!(bc.score(&p, &psi, &u.then(&p, &v1).unwrap()).unwrap(), 0.5);
        assert!((bc.score(&p, &psi, &u.then(&p, &v2).unwrap()).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        let r = check_diachronic(&bc, &p, &psi, &u, &v1, &v2).unwrap();
        assert!(!r.passed);
        assert_eq!(r.axiom, Axiom::DiachronicI);
        assert!(r.margin >= 1.0 / 6.0 - 1e-9);
        let born = PreferenceRule::born(u10());
        assert!(check_diachronic(&born, &p, &psi, &u, &v1, &v2).unwrap().passed);
        // reflexivity baseline
        assert!(check_diachronic(&bc, &p, &psi, &u, &v1, &v1).unwrap().passed);
        // the replayed witness fails with the same margin
        let again = replay_witness(&bc, &p, r.witness.as_ref().unwrap()).unwrap();
        assert_eq!(again, r);
    }

    #[test]
    fn diachronic_clause_ii() {
        let p = problem();
        let m = p.macrostate_at(1, 0, 0).unwrap().id;
        let psi = p.state_in(m, &[c(1.0)]).unwrap();
        let mut alloc = Allocator::new(&p);
        let u = make_branching(&p, &mut alloc, &psi, m, &BranchSpec::new(vec![0.5, 0.5]), 1).unwrap();
        let o: Vec<_> = u.outcome_event(&p).ids().collect();
        let pay = make_reward_act(&p, &mut alloc, o[0], 0, 2).unwrap();
        let stay = make_identity_embedding(&p, &mut alloc, &Event::singleton(o[1]), 2).unwrap();
        let v1 = glue(&p, &mut alloc, &ActFunction::new(vec![pay, stay])).unwrap();
        let v2 = make_identity_embedding(&p, &mut alloc, &u.outcome_event(&p), 2).unwrap();
        let born = PreferenceRule::born(u10());
        let r = check_diachronic(&born, &p, &psi, &u, &v1, &v2).unwrap();
        assert!(r.passed);
        assert_eq!(r.axiom, Axiom::DiachronicIi);
        assert!((r.margin - 0.5).abs() < 1e-12);
    }

    fn dim2() -> DecisionProblem {
        DecisionProblem::new(ProblemConfig::new(&["reward", "none"], &[4, 8, 8]).with_macrostate_dim(2)).unwrap()
    }

    /// Acts from `m` into the fixed macrostate `t`, sending ψ's direction to microstate `slot`.
    fn into_slot(p: &DecisionProblem, m: MacrostateId, t: MacrostateId, slot: usize) -> Act {
        let tb = p.macrostates()[t].basis().start;
        let mut a = ComplexMatrix::zeros(p.dim(), 2);
        a.set(tb + slot, 0, c(1.0));
        a.set(tb + 1 - slot, 1, c(1.0));
        Act::new(p, Event::singleton(m), 1, a).unwrap()
    }

    #[test]
    fn macrostate_indifference() {
        let p = dim2();
        let m = p.macrostate_at(1, 0, 0).unwrap().id;
        let t1 = p.macrostate_at(0, 1, 0).unwrap().id;
        let t2 = p.macrostate_at(1, 1, 0).unwrap().id;
        let psi = p.state_in(m, &[c(1.0), c(0.0)]).unwrap();
        let w = Quadruple {
            psi: psi.clone(),
            u: into_slot(&p, m, t1, 0),
            v: into_slot(&p, m, t2, 0),
            psi2: psi.clone(),
            u2: into_slot(&p, m, t1, 1),
            v2: into_slot(&p, m, t2, 0),
        };
        let born = PreferenceRule::born(u10());
        assert!(check_macrostate_indifference(&born, &p, &w).unwrap().passed);
        let r = check_macrostate_indifference(&MicrostateIndexRule, &p, &w).unwrap();
        assert!(!r.passed);
        let same = Quadruple {
            u2: w.u.clone(),
            ..w.clone()
        };
        assert!(check_macrostate_indifference(&MicrostateIndexRule, &p, &same).unwrap().passed);
        let bad = Quadruple {
            u2: into_slot(&p, m, p.macrostate_at(0, 1, 1).unwrap().id, 0),
            ..w
        };
        assert!(matches!(check_macrostate_indifference(&born, &p, &bad), Err(Error::Witness(_))));
    }

    #[test]
    fn branching_indifference() {
        let p = problem();
        let m = p.macrostate_at(0, 0, 0).unwrap().id;
        let psi = p.state_in(m, &[c(1.0)]).unwrap();
        let specs = [BranchSpec::new(vec![0.5, 0.5]), BranchSpec::new(vec![1.0]), BranchSpec::new(vec![0.2, 0.3, 0.5])];
        for rule in [PreferenceRule::born(u10()), PreferenceRule::branch_count(u10())] {
            assert!(check_branching_indifference(&rule, &p, &psi, m, &specs, 1).unwrap().passed);
        }
    }

    #[test]
    fn supervenience() {
        let p = dim2();
        let m = p.macrostate_at(1, 0, 0).unwrap().id;
        let psi = p.state_in(m, &[c(0.8), c(0.6)]).unwrap();
        let branches = [Branch::new(0, 0.5), Branch::new(1, 0.5)];
        let u = make_block_act(&p, &mut Allocator::new(&p), &psi, m, &branches, Completion::Canonical, 1).unwrap();
        let u2 = make_block_act(&p, &mut Allocator::new(&p), &psi, m, &branches, Completion::Rotated(11), 1).unwrap();
        let b = p.macrostates()[m].basis().start;
        let fake = PreferenceRule::fake_state(u10(), vec![[b, b + 1]]);
        let born = PreferenceRule::born(u10());
        // pick a V whose fake-state score separates U from U′
        let (s1, s2) = (fake.score(&p, &psi, &u).unwrap(), fake.score(&p, &psi, &u2).unwrap());
        assert!((s1 - s2).abs() > 1e-3);
        let mut found = None;
        for i in 1..100 {
            let x = i as f64 / 100.0;
            let v = make_block_act(
                &p,
                &mut Allocator::new(&p),
                &psi,
                m,
                &[Branch::new(0, x), Branch::new(1, 1.0 - x)],
                Completion::Canonical,
                1,
            )
            .unwrap();
            let w = Quadruple {
                psi: psi.clone(),
                u: u.clone(),
                v: v.clone(),
                psi2: psi.clone(),
                u2: u2.clone(),
                v2: v,
            };
            assert!(check_state_supervenience(&born, &p, &w).unwrap().passed);
            let r = check_state_supervenience(&fake, &p, &w).unwrap();
            if !r.passed {
                found = Some((w, r));
                break;
            }
        }
        let (w, r) = found.expect("a separating V exists");
        assert_eq!(replay_witness(&fake, &p, r.witness.as_ref().unwrap()).unwrap(), r);
        let mismatched = Quadruple {
            psi2: p.state_in(m, &[c(0.6), c(0.8)]).unwrap(),
            ..w
        };
        assert!(matches!(check_state_supervenience(&born, &p, &mismatched), Err(Error::Witness(_))));
    }

    #[test]
    fn continuity() {
        let p = problem();
        let m = p.macrostate_at(1, 0, 0).unwrap().id;
        let psi = p.state_in(m, &[c(1.0)]).unwrap();
        let mk = |w: f64| {
            make_block_act(
                &p,
                &mut Allocator::new(&p),
                &psi,
                m,
                &[Branch::new(0, w), Branch::new(1, 1.0 - w)],
                Completion::Canonical,
                1,
            )
            .unwrap()
        };
        let (a, b) = (mk(0.6), mk(0.3));
        let born = PreferenceRule::born(u10());
        let r = check_solution_continuity(&born, &p, &psi, &a, &b, 50, 1).unwrap();
        assert!(r.passed && r.outcome == CheckOutcome::Pass);
        let r = check_solution_continuity(&born, &p, &psi, &a, &a, 5, 1).unwrap();
        assert!(r.is_inconclusive());
        let threshold = ThresholdRule {
            utility: u10(),
            threshold: 0.6 - 1e-6,
        };
        let r = check_solution_continuity(&threshold, &p, &psi, &a, &b, 200, 2).unwrap();
        assert!(!r.passed);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(perturb_act(&p, &a, 0.0, &mut rng).unwrap(), a);
        let moved = perturb_act(&p, &a, 1e-3, &mut rng).unwrap();
        assert!(moved.is_available(&p));
        assert!(moved.matrix().sub(a.matrix()).unwrap().frobenius_norm() <= 1e-3);
    }

    #[test]
    fn richness() {
        let p = DecisionProblem::new(ProblemConfig::new(&["a", "b", "c"], &[16, 16, 16, 16])).unwrap();
        assert!(validate_richness(&p).passed);
        let tiny = DecisionProblem::new(ProblemConfig::new(&["a", "b", "c"], &[1, 1, 1])).unwrap();
        let r = validate_richness(&tiny);
        assert!(!r.erasure.passed);
        assert!(r.reward_availability.passed);
        let single = DecisionProblem::new(ProblemConfig::new(&["a"], &[4, 4])).unwrap();
        assert!(validate_richness(&single).reward_availability.passed);
    }

    #[test]
    fn result_json_shape() {
        let r = AxiomCheckResult::pass(Axiom::DiachronicIi, 0.25).with_seed(9);
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["axiom"], "diachronic_ii");
        assert_eq!(v["passed"], true);
        assert_eq!(v["seed"], 9);
    }
}
