//! Constructors for the acts the richness axioms promise: branchings,
//! erasures, reward acts, stage-advancing embeddings, and glued act
//! functions.
//!
//! Fresh output macrostates come from an explicit [`Allocator`], which hands
//! out ordinals left to right in each (reward, stage) block.

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, ComplexVector};
use crate::model::{Act, AvailabilityViolation, DecisionProblem, Event, MacrostateId, RewardId};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Cursor over unused macrostates, one counter per (stage, reward) block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocator {
    rewards: usize,
    next: Vec<usize>,
}

impl Allocator {
    pub fn new(p: &DecisionProblem) -> Self {
        Allocator {
            rewards: p.reward_count(),
            next: vec![0; p.reward_count() * p.stage_count()],
        }
    }

    /// An allocator that will never hand out macrostates in `used`.
    pub fn avoiding(p: &DecisionProblem, used: &Event) -> Result<Self> {
        let mut a = Allocator::new(p);
        a.reserve_event(p, used)?;
        Ok(a)
    }

    pub fn allocate(&mut self, p: &DecisionProblem, reward: RewardId, stage: usize) -> Result<MacrostateId> {
        if stage >= p.stage_count() {
            return Err(Error::Capacity(format!("no stage {stage} to allocate in")));
        }
        let slot = &mut self.next[stage * self.rewards + reward];
        let id = p.macrostate_at(reward, stage, *slot)?.id;
        *slot += 1;
        Ok(id)
    }

    pub fn remaining(&self, p: &DecisionProblem, reward: RewardId, stage: usize) -> usize {
        p.macrostates_per_reward(stage)
            .saturating_sub(self.next[stage * self.rewards + reward])
    }

    pub fn reserve(&mut self, p: &DecisionProblem, m: MacrostateId) -> Result<()> {
        let ms = p.macrostate(m)?;
        let slot = &mut self.next[ms.stage * self.rewards + ms.reward];
        *slot = (*slot).max(ms.ordinal + 1);
        Ok(())
    }

    pub fn reserve_event(&mut self, p: &DecisionProblem, e: &Event) -> Result<()> {
        e.ids().try_for_each(|m| self.reserve(p, m))
    }
}

/// The weights of a P-branching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSpec {
    pub weights: Vec<f64>,
}

impl BranchSpec {
    pub fn new(weights: Vec<f64>) -> Self {
        BranchSpec { weights }
    }

    pub fn validate(&self, eq_eps: f64) -> Result<()> {
        if self.weights.is_empty() {
            return Err(Error::Validation("a branching needs at least one weight".into()));
        }
        if let Some(w) = self.weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::Validation(format!("branch weight {w} is not positive")));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > eq_eps {
            return Err(Error::Validation(format!("branch weights sum to {total}")));
        }
        Ok(())
    }
}

/// One output branch of a block act.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub reward: RewardId,
    pub weight: f64,
    #[serde(default)]
    pub phase: f64,
}

impl Branch {
    pub fn new(reward: RewardId, weight: f64) -> Self {
        Branch { reward, weight, phase: 0.0 }
    }
}

/// How a block act maps the part of its domain orthogonal to the state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "seed", rename_all = "snake_case")]
pub enum Completion {
    /// Gram–Schmidt over the unused target basis vectors, in order.
    #[default]
    Canonical,
    /// A seeded random rotation of the canonical completion.
    Rotated(u64),
}

/// A family of acts on mutually disjoint events, to be glued together.
#[derive(Debug, Clone, Default)]
pub struct ActFunction {
    pub assignments: Vec<Act>,
}

impl ActFunction {
    pub fn new(assignments: Vec<Act>) -> Self {
        ActFunction { assignments }
    }
}

/// Local amplitudes of `psi` on macrostate `m`, normalized; the first basis
/// vector when `psi` has no weight there.
fn local_direction(p: &DecisionProblem, psi: &ComplexVector, m: MacrostateId) -> Result<ComplexVector> {
    let ms = p.macrostate(m)?;
    let basis: Vec<usize> = ms.basis().collect();
    let local = psi.gather(&basis);
    if local.norm_sqr() < p.tolerance().eq_eps {
        return Ok(ComplexVector::basis(ms.dim, 0));
    }
    local
        .normalized()
        .ok_or_else(|| Error::Validation("state has no direction in macrostate".into()))
}

fn check_state_in_macrostate(p: &DecisionProblem, psi: &ComplexVector, m: MacrostateId) -> Result<()> {
    p.check_state_in(psi, &Event::singleton(m))
}

fn fresh_targets(
    p: &DecisionProblem,
    alloc: &mut Allocator,
    rewards: impl IntoIterator<Item = RewardId>,
    stage: usize,
) -> Result<Vec<MacrostateId>> {
    rewards.into_iter().map(|r| alloc.allocate(p, r, stage)).collect()
}

/// Isometry on macrostate `m` sending the local unit vector `chi` to the
/// unit vector `image`, with the orthogonal complement of `chi` sent into
/// span(targets) ⊖ image. Extra macrostates of `overflow_reward` are
/// allocated if the targets are too small to hold the complement.
#[allow(clippy::too_many_arguments)]
fn block_isometry(
    p: &DecisionProblem,
    alloc: &mut Allocator,
    m: MacrostateId,
    chi: &ComplexVector,
    image: &ComplexVector,
    targets: &[MacrostateId],
    overflow_reward: RewardId,
    target_stage: usize,
    completion: Completion,
) -> Result<Act> {
    let d = p.macrostate(m)?.dim;
    let mut support: Vec<usize> = targets
        .iter()
        .flat_map(|&t| p.macrostates()[t].basis())
        .collect();
    while support.len() < d {
        let extra = alloc.allocate(p, overflow_reward, target_stage)?;
        support.extend(p.macrostates()[extra].basis());
    }
    let local_rest = linalg::orthonormal_completion(d, std::slice::from_ref(chi), &(0..d).collect::<Vec<_>>(), d - 1)?;
    let available = support.len() - 1;
    let mut images = linalg::orthonormal_completion(p.dim(), std::slice::from_ref(image), &support, available)?;
    if let Completion::Rotated(seed) = completion {
        if d > 1 && available > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rot = linalg::random_unitary(&mut rng, available);
            images = (0..available)
                .map(|j| {
                    let mut v = ComplexVector::zeros(p.dim());
                    for (i, img) in images.iter().enumerate() {
                        v = v.add(&img.scale(rot.get(i, j))).expect("same dim");
                    }
                    v
                })
                .collect();
        }
    }
    // A = image·χ† + Σ_j w_j q_j†
    let mut a = ComplexMatrix::zeros(p.dim(), d);
    let mut add_outer = |w: &ComplexVector, q: &ComplexVector| {
        for (r, wr) in w.entries().iter().enumerate() {
            if *wr == linalg::ZERO {
                continue;
            }
            for (c, qc) in q.entries().iter().enumerate() {
                let z = a.get(r, c) + wr * qc.conj();
                a.set(r, c, z);
            }
        }
    };
    add_outer(image, chi);
    for (w, q) in images.iter().zip(&local_rest) {
        add_outer(w, q);
    }
    Act::new(p, Event::singleton(m), target_stage, a)
}

/// Block act on macrostate `m` sending the direction of `psi` in `m` to
/// Σ_i √w_i e^{iθ_i} f_i, with each f_i the first basis vector of a fresh
/// macrostate of reward `branches[i].reward` at `target_stage`.
pub fn make_block_act(
    p: &DecisionProblem,
    alloc: &mut Allocator,
    psi: &ComplexVector,
    m: MacrostateId,
    branches: &[Branch],
    completion: Completion,
    target_stage: usize,
) -> Result<Act> {
    check_state_in_macrostate(p, psi, m)?;
    check_target_stage(p, m, target_stage)?;
    if branches.is_empty() {
        return Err(Error::Validation("a block act needs at least one branch".into()));
    }
    let total: f64 = branches.iter().map(|b| b.weight).sum();
    if branches.iter().any(|b| !(b.weight >= 0.0)) || (total - 1.0).abs() > p.tolerance().eq_eps {
        return Err(Error::Validation(format!("branch weights must be non-negative and sum to 1, got {total}")));
    }
    if let Some(b) = branches.iter().find(|b| b.reward >= p.reward_count()) {
        return Err(Error::Domain(format!("unknown reward {}", b.reward)));
    }
    let targets = fresh_targets(p, alloc, branches.iter().map(|b| b.reward), target_stage)?;
    let mut image = ComplexVector::zeros(p.dim());
    for (b, &t) in branches.iter().zip(&targets) {
        let row = p.macrostates()[t].basis().start;
        image.entries_mut()[row] = Complex64::from_polar(b.weight.sqrt(), b.phase);
    }
    let chi = local_direction(p, psi, m)?;
    let overflow = p.macrostates()[m].reward;
    block_isometry(p, alloc, m, &chi, &image, &targets, overflow, target_stage, completion)
}

/// A P-branching of `psi` in `m`: real amplitudes √p_i into fresh
/// macrostates of m's own reward.
pub fn make_branching(
    p: &DecisionProblem,
    alloc: &mut Allocator,
    psi: &ComplexVector,
    m: MacrostateId,
    spec: &BranchSpec,
    target_stage: usize,
) -> Result<Act> {
    spec.validate(p.tolerance().eq_eps)?;
    let reward = p.macrostate(m)?.reward;
    let branches: Vec<Branch> = spec.weights.iter().map(|&w| Branch::new(reward, w)).collect();
    make_block_act(p, alloc, psi, m, &branches, Completion::Canonical, target_stage)
}

/// Act on `m` sending the direction of `psi` to the first basis vector of
/// the given erasure macrostate `t`, with phase +1.
pub fn make_erasure(
    p: &DecisionProblem,
    alloc: &mut Allocator,
    psi: &ComplexVector,
    m: MacrostateId,
    t: MacrostateId,
) -> Result<Act> {
    check_state_in_macrostate(p, psi, m)?;
    let (mr, tm) = (p.macrostate(m)?.reward, *p.macrostate(t)?);
    if mr != tm.reward {
        return Err(Error::Domain(format!(
            "erasure from reward {mr} into a macrostate of reward {}",
            tm.reward
        )));
    }
    check_target_stage(p, m, tm.stage)?;
    let image = ComplexVector::basis(p.dim(), tm.basis().start);
    let chi = local_direction(p, psi, m)?;
    block_isometry(p, alloc, m, &chi, &image, &[t], mr, tm.stage, Completion::Canonical)
}

/// An erasure of `psi` (in `m1`) and `phi` (in `m2`): two acts sending both
/// states to the same basis vector of one shared fresh macrostate.
pub fn make_erasure_pair(
    p: &DecisionProblem,
    alloc: &mut Allocator,
    psi: &ComplexVector,
    m1: MacrostateId,
    phi: &ComplexVector,
    m2: MacrostateId,
    target_stage: usize,
) -> Result<(Act, Act)> {
    let (r1, r2) = (p.macrostate(m1)?.reward, p.macrostate(m2)?.reward);
    if r1 != r2 {
        return Err(Error::Domain(format!("cannot erase across rewards {r1} and {r2}")));
    }
    check_state_in_macrostate(p, psi, m1)?;
    check_state_in_macrostate(p, phi, m2)?;
    let t = alloc.allocate(p, r1, target_stage)?;
    let a1 = make_erasure(p, alloc, psi, m1, t)?;
    if m1 == m2 && psi.distance(phi)? <= p.tolerance().eq_eps {
        return Ok((a1.clone(), a1));
    }
    let a2 = make_erasure(p, alloc, phi, m2, t)?;
    Ok((a1, a2))
}

fn check_target_stage(p: &DecisionProblem, m: MacrostateId, target_stage: usize) -> Result<()> {
    let stage = p.macrostate(m)?.stage;
    if target_stage <= stage || target_stage >= p.stage_count() {
        return Err(Error::Capacity(format!(
            "no later stage {target_stage} available for a macrostate at stage {stage}"
        )));
    }
    Ok(())
}

/// Coordinate-preserving embedding of `m` into fresh macrostates of reward
/// `reward` at `target_stage`, as (row, column) pairs.
fn embedding_entries(
    p: &DecisionProblem,
    alloc: &mut Allocator,
    m: MacrostateId,
    reward: RewardId,
    target_stage: usize,
) -> Result<Vec<usize>> {
    check_target_stage(p, m, target_stage)?;
    if reward >= p.reward_count() {
        return Err(Error::Domain(format!("unknown reward {reward}")));
    }
    let d = p.macrostate(m)?.dim;
    let mut rows = Vec::with_capacity(d);
    while rows.len() < d {
        let t = alloc.allocate(p, reward, target_stage)?;
        rows.extend(p.macrostates()[t].basis().take(d - rows.len()));
    }
    Ok(rows)
}

/// Maps `m` isometrically into a fresh macrostate of reward `r`.
pub fn make_reward_act(
    p: &DecisionProblem,
    alloc: &mut Allocator,
    m: MacrostateId,
    r: RewardId,
    target_stage: usize,
) -> Result<Act> {
    let rows = embedding_entries(p, alloc, m, r, target_stage)?;
    let mut a = ComplexMatrix::zeros(p.dim(), rows.len());
    for (j, row) in rows.into_iter().enumerate() {
        a.set(row, j, linalg::ONE);
    }
    Act::new(p, Event::singleton(m), target_stage, a)
}

/// The "do nothing" act on `e`: each macrostate moves to a fresh macrostate
/// of its own reward at `target_stage`, microstate coordinates preserved.
pub fn make_identity_embedding(
    p: &DecisionProblem,
    alloc: &mut Allocator,
    e: &Event,
    target_stage: usize,
) -> Result<Act> {
    p.stage_of(e)?;
    let domain_basis = p.event_basis(e);
    let mut a = ComplexMatrix::zeros(p.dim(), domain_basis.len());
    let mut col = 0;
    for m in e.ids() {
        let reward = p.macrostates()[m].reward;
        for row in embedding_entries(p, alloc, m, reward, target_stage)? {
            a.set(row, col, linalg::ONE);
            col += 1;
        }
    }
    Act::new(p, e.clone(), target_stage, a)
}

/// Σ_F U(F)Π_F over a compatible act function. Acts ending at earlier
/// stages are padded with identity embeddings up to the latest one.
pub fn glue(p: &DecisionProblem, alloc: &mut Allocator, af: &ActFunction) -> Result<Act> {
    let acts = &af.assignments;
    let first = acts
        .first()
        .ok_or_else(|| Error::Precondition("cannot glue an empty act function".into()))?;
    if acts.len() == 1 {
        return Ok(first.clone());
    }
    let mut domain = Event::empty();
    for a in acts {
        if !domain.is_disjoint(a.domain()) {
            return Err(Error::Precondition(format!(
                "act function events overlap at {}",
                domain.intersection(a.domain())
            )));
        }
        if a.domain_stage() != first.domain_stage() {
            return Err(Error::Domain("act function events lie in different stages".into()));
        }
        domain = domain.union(a.domain());
    }
    let stage = acts.iter().map(Act::target_stage).max().unwrap_or(0);
    let mut padded = Vec::with_capacity(acts.len());
    for a in acts {
        if a.target_stage() < stage {
            let pad = make_identity_embedding(p, alloc, &a.outcome_event(p), stage)?;
            padded.push(a.then(p, &pad)?);
        } else {
            padded.push(a.clone());
        }
    }
    let basis = p.event_basis(&domain);
    let mut m = ComplexMatrix::zeros(p.dim(), basis.len());
    for a in &padded {
        for (j, b) in a.domain_basis().iter().enumerate() {
            let col = basis.binary_search(b).expect("domain basis is a subset");
            m.set_column(col, &a.matrix().column(j))?;
        }
    }
    let glued = Act::new(p, domain, stage, m)?;
    let report = glued.validate_availability(p);
    let irreversible = report
        .violations
        .iter()
        .find(|v| matches!(v, AvailabilityViolation::Irreversibility { .. }));
    if let Some(v) = irreversible.or(report.violations.first()) {
        return Err(match v {
            AvailabilityViolation::Irreversibility { first, second, shared } => Error::Irreversibility(format!(
                "outcomes of macrostates {first} and {second} share {shared:?}"
            )),
            other => Error::Validation(format!("glued act is unavailable: {other:?}")),
        });
    }
    Ok(glued)
}

/// Glues a per-macrostate construction over every macrostate of `e`.
pub fn glue_over(
    p: &DecisionProblem,
    alloc: &mut Allocator,
    e: &Event,
    mut build: impl FnMut(&mut Allocator, MacrostateId) -> Result<Act>,
) -> Result<Act> {
    let mut acts = Vec::with_capacity(e.len());
    for m in e.ids() {
        acts.push(build(alloc, m)?);
    }
    glue(p, alloc, &ActFunction::new(acts))
}
