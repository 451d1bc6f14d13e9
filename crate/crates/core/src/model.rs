//! Quantum decision problems in the staged register model.
//!
//! The Hilbert space is a direct sum of stage blocks. Stage `s` holds, for
//! each of the `k` rewards, `stage_capacities[s]` basis vectors, grouped into
//! macrostates of `macrostate_dims[s]` microstates each. Events are sets of
//! macrostates. An act available at an event inside stage `s` is an isometry
//! from that event into a single later stage whose restrictions to distinct
//! macrostates have disjoint outcome events.

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, ComplexVector, Tolerance};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

pub type MacrostateId = usize;
pub type RewardId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MacrostateDims {
    Uniform(usize),
    PerStage(Vec<usize>),
}

impl Default for MacrostateDims {
    fn default() -> Self {
        MacrostateDims::Uniform(1)
    }
}

/// The problem definition file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub rewards: Vec<String>,
    pub stage_capacities: Vec<usize>,
    #[serde(default)]
    pub macrostate_dims: MacrostateDims,
    #[serde(default)]
    pub tolerances: Tolerance,
}

impl ProblemConfig {
    pub fn new(rewards: &[&str], stage_capacities: &[usize]) -> Self {
        ProblemConfig {
            rewards: rewards.iter().map(|s| s.to_string()).collect(),
            stage_capacities: stage_capacities.to_vec(),
            macrostate_dims: MacrostateDims::default(),
            tolerances: Tolerance::default(),
        }
    }

    pub fn with_macrostate_dim(mut self, dim: usize) -> Self {
        self.macrostate_dims = MacrostateDims::Uniform(dim);
        self
    }

    pub fn with_tolerances(mut self, tol: Tolerance) -> Self {
        self.tolerances = tol;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BasisIndex {
    pub reward: RewardId,
    pub stage: usize,
    pub slot: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Macrostate {
    pub id: MacrostateId,
    pub reward: RewardId,
    pub stage: usize,
    /// Position among the macrostates of the same (reward, stage) block.
    pub ordinal: usize,
    pub dim: usize,
    first: usize,
}

impl Macrostate {
    /// Global basis indices spanning this macrostate.
    pub fn basis(&self) -> std::ops::Range<usize> {
        self.first..self.first + self.dim
    }
}

/// A disjunction of macrostates.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Event(BTreeSet<MacrostateId>);

impl Event {
    pub fn empty() -> Self {
        Event(BTreeSet::new())
    }

    pub fn singleton(id: MacrostateId) -> Self {
        Event(BTreeSet::from([id]))
    }

    pub fn ids(&self) -> impl Iterator<Item = MacrostateId> + '_ {
        self.0.iter().copied()
    }

    pub fn as_set(&self) -> &BTreeSet<MacrostateId> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: MacrostateId) -> bool {
        self.0.contains(&id)
    }

    pub fn is_subset(&self, other: &Event) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn is_disjoint(&self, other: &Event) -> bool {
        self.0.is_disjoint(&other.0)
    }

    pub fn union(&self, other: &Event) -> Event {
        Event(self.0.union(&other.0).copied().collect())
    }

    pub fn intersection(&self, other: &Event) -> Event {
        Event(self.0.intersection(&other.0).copied().collect())
    }

    pub fn difference(&self, other: &Event) -> Event {
        Event(self.0.difference(&other.0).copied().collect())
    }
}

impl FromIterator<MacrostateId> for Event {
    fn from_iter<I: IntoIterator<Item = MacrostateId>>(iter: I) -> Self {
        Event(iter.into_iter().collect())
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, id) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{id}")?;
        }
        write!(f, "}}")
    }
}

/// Probability-like weights indexed by reward id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RewardFunction(pub Vec<f64>);

impl RewardFunction {
    pub fn get(&self, r: RewardId) -> f64 {
        self.0[r]
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn max_abs_diff(&self, other: &RewardFunction) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct DecisionProblem {
    config: ProblemConfig,
    dims: Vec<usize>,
    stage_offsets: Vec<usize>,
    stage_macro_offsets: Vec<usize>,
    macrostates: Vec<Macrostate>,
    basis_owner: Vec<MacrostateId>,
    dim: usize,
}

impl DecisionProblem {
    pub fn new(config: ProblemConfig) -> Result<Self> {
        let k = config.rewards.len();
        if k == 0 {
            return Err(Error::Config("at least one reward is required".into()));
        }
        let labels: BTreeSet<&str> = config.rewards.iter().map(String::as_str).collect();
        if labels.len() != k {
            return Err(Error::Config("reward labels must be unique".into()));
        }
        let stages = config.stage_capacities.len();
        if stages == 0 {
            return Err(Error::Config("at least one stage is required".into()));
        }
        let dims = match &config.macrostate_dims {
            MacrostateDims::Uniform(d) => vec![*d; stages],
            MacrostateDims::PerStage(v) => {
                if v.len() != stages {
                    return Err(Error::Config(format!(
                        "macrostate_dims has {} entries for {stages} stages",
                        v.len()
                    )));
                }
                v.clone()
            }
        };
        for (s, (&cap, &d)) in config.stage_capacities.iter().zip(&dims).enumerate() {
            if cap == 0 || d == 0 {
                return Err(Error::Config(format!("stage {s}: capacity and dims must be positive")));
            }
            if cap % d != 0 {
                return Err(Error::Config(format!(
                    "stage {s}: capacity {cap} is not a multiple of macrostate dim {d}"
                )));
            }
        }
        config.tolerances.validate()?;

        let mut stage_offsets = Vec::with_capacity(stages);
        let mut stage_macro_offsets = Vec::with_capacity(stages);
        let mut macrostates = Vec::new();
        let mut basis_owner = Vec::new();
        let mut offset = 0;
        for (stage, (&cap, &d)) in config.stage_capacities.iter().zip(&dims).enumerate() {
            stage_offsets.push(offset);
            stage_macro_offsets.push(macrostates.len());
            for reward in 0..k {
                for ordinal in 0..cap / d {
                    let id = macrostates.len();
                    let first = offset + reward * cap + ordinal * d;
                    macrostates.push(Macrostate {
                        id,
                        reward,
                        stage,
                        ordinal,
                        dim: d,
                        first,
                    });
                    basis_owner.extend(std::iter::repeat_n(id, d));
                }
            }
            offset += k * cap;
        }
        Ok(DecisionProblem {
            config,
            dims,
            stage_offsets,
            stage_macro_offsets,
            macrostates,
            basis_owner,
            dim: offset,
        })
    }

    pub fn config(&self) -> &ProblemConfig {
        &self.config
    }

    pub fn tolerance(&self) -> &Tolerance {
        &self.config.tolerances
    }

    /// Dimension of the whole Hilbert space.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn reward_count(&self) -> usize {
        self.config.rewards.len()
    }

    pub fn reward_label(&self, r: RewardId) -> &str {
        &self.config.rewards[r]
    }

    pub fn reward_id(&self, label: &str) -> Result<RewardId> {
        self.config
            .rewards
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::Config(format!("unknown reward label {label:?}")))
    }

    pub fn stage_count(&self) -> usize {
        self.config.stage_capacities.len()
    }

    pub fn stage_capacity(&self, stage: usize) -> usize {
        self.config.stage_capacities[stage]
    }

    pub fn macrostate_dim(&self, stage: usize) -> usize {
        self.dims[stage]
    }

    /// Number of macrostates of each reward at `stage`.
    pub fn macrostates_per_reward(&self, stage: usize) -> usize {
        self.config.stage_capacities[stage] / self.dims[stage]
    }

    pub fn macrostates(&self) -> &[Macrostate] {
        &self.macrostates
    }

    pub fn macrostate(&self, id: MacrostateId) -> Result<&Macrostate> {
        self.macrostates
            .get(id)
            .ok_or_else(|| Error::Domain(format!("no macrostate {id}")))
    }

    pub fn macrostate_at(&self, reward: RewardId, stage: usize, ordinal: usize) -> Result<&Macrostate> {
        if stage >= self.stage_count()
            || reward >= self.reward_count()
            || ordinal >= self.macrostates_per_reward(stage)
        {
            return Err(Error::Capacity(format!(
                "no macrostate #{ordinal} for reward {reward} at stage {stage}"
            )));
        }
        let id = self.stage_macro_offsets[stage] + reward * self.macrostates_per_reward(stage) + ordinal;
        Ok(&self.macrostates[id])
    }

    pub fn global_index(&self, b: BasisIndex) -> Result<usize> {
        if b.stage >= self.stage_count() || b.reward >= self.reward_count() {
            return Err(Error::Domain(format!("basis index {b:?} out of range")));
        }
        let cap = self.stage_capacity(b.stage);
        if b.slot >= cap {
            return Err(Error::Domain(format!("slot {} >= capacity {cap}", b.slot)));
        }
        Ok(self.stage_offsets[b.stage] + b.reward * cap + b.slot)
    }

    pub fn basis_index(&self, global: usize) -> Result<BasisIndex> {
        let owner = *self
            .basis_owner
            .get(global)
            .ok_or_else(|| Error::Domain(format!("basis index {global} out of range")))?;
        let m = &self.macrostates[owner];
        let cap = self.stage_capacity(m.stage);
        Ok(BasisIndex {
            reward: m.reward,
            stage: m.stage,
            slot: global - self.stage_offsets[m.stage] - m.reward * cap,
        })
    }

    pub fn macrostate_of_basis(&self, global: usize) -> MacrostateId {
        self.basis_owner[global]
    }

    /// Sorted global basis indices of an event.
    pub fn event_basis(&self, e: &Event) -> Vec<usize> {
        e.ids().flat_map(|id| self.macrostates[id].basis()).collect()
    }

    pub fn event_dim(&self, e: &Event) -> usize {
        e.ids().map(|id| self.macrostates[id].dim).sum()
    }

    pub fn reward_event(&self, r: RewardId) -> Event {
        self.macrostates.iter().filter(|m| m.reward == r).map(|m| m.id).collect()
    }

    pub fn stage_event(&self, stage: usize) -> Event {
        self.macrostates.iter().filter(|m| m.stage == stage).map(|m| m.id).collect()
    }

    pub fn full_event(&self) -> Event {
        (0..self.macrostates.len()).collect()
    }

    pub fn check_event(&self, e: &Event) -> Result<()> {
        match e.ids().last() {
            Some(id) if id >= self.macrostates.len() => {
                Err(Error::Domain(format!("event {e} names unknown macrostate {id}")))
            }
            _ => Ok(()),
        }
    }

    /// The single stage containing `e`.
    pub fn stage_of(&self, e: &Event) -> Result<usize> {
        self.check_event(e)?;
        let mut stages = e.ids().map(|id| self.macrostates[id].stage);
        let first = stages
            .next()
            .ok_or_else(|| Error::Domain("empty event has no stage".into()))?;
        if stages.any(|s| s != first) {
            return Err(Error::Domain(format!("event {e} spans several stages")));
        }
        Ok(first)
    }

    /// The reward containing every macrostate of `e`, if there is one.
    pub fn reward_of(&self, e: &Event) -> Option<RewardId> {
        let mut rewards = e.ids().map(|id| self.macrostates[id].reward);
        let first = rewards.next()?;
        rewards.all(|r| r == first).then_some(first)
    }

    /// Macrostates on which `v` has mass above `eq_eps`.
    pub fn support(&self, v: &ComplexVector) -> Event {
        let eps = self.tolerance().eq_eps;
        self.macrostates
            .iter()
            .filter(|m| v.mass_on(m.basis()) > eps)
            .map(|m| m.id)
            .collect()
    }

    /// A state vector supported on a single macrostate, from local amplitudes.
    pub fn state_in(&self, m: MacrostateId, local: &[Complex64]) -> Result<ComplexVector> {
        let ms = self.macrostate(m)?;
        if local.len() != ms.dim {
            return Err(Error::Dimension(format!(
                "macrostate {m} has dim {}, got {} amplitudes",
                ms.dim,
                local.len()
            )));
        }
        let mut v = ComplexVector::zeros(self.dim);
        for (i, z) in ms.basis().zip(local) {
            v.entries_mut()[i] = *z;
        }
        Ok(v)
    }

    /// A state from (macrostate, local amplitudes) pieces.
    pub fn state_from_parts(&self, parts: &[(MacrostateId, Vec<Complex64>)]) -> Result<ComplexVector> {
        let mut v = ComplexVector::zeros(self.dim);
        for (m, local) in parts {
            v = v.add(&self.state_in(*m, local)?)?;
        }
        Ok(v)
    }

    pub fn check_state_dim(&self, psi: &ComplexVector) -> Result<()> {
        if psi.dim() != self.dim {
            return Err(Error::Dimension(format!(
                "state of dim {} in a problem of dim {}",
                psi.dim(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Checks that `psi` is normalized and supported in `e`.
    pub fn check_state_in(&self, psi: &ComplexVector, e: &Event) -> Result<()> {
        self.check_state_dim(psi)?;
        let eps = self.tolerance().eq_eps;
        let n = psi.norm_sqr();
        if (n - 1.0).abs() > eps {
            return Err(Error::Validation(format!("state is not normalized (‖ψ‖² = {n})")));
        }
        let inside = psi.mass_on(self.event_basis(e));
        if n - inside > eps {
            return Err(Error::Validation(format!(
                "state has mass {} outside event {e}",
                n - inside
            )));
        }
        Ok(())
    }
}

/// A norm-preserving map from an event's subspace into the whole space.
///
/// Column `j` of `matrix` is the image of the `j`-th basis vector of the
/// domain, in ascending global index order.
#[derive(Debug, Clone, PartialEq)]
pub struct Act {
    domain: Event,
    domain_stage: usize,
    target_stage: usize,
    matrix: ComplexMatrix,
    domain_basis: Vec<usize>,
}

/// Serialized act: `{domain, target_stage, matrix}` with a row-major matrix
/// of `[re, im]` pairs over the whole space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActData {
    pub domain: Vec<MacrostateId>,
    pub target_stage: usize,
    pub matrix: Vec<[f64; 2]>,
}

impl ActData {
    pub fn into_act(self, p: &DecisionProblem) -> Result<Act> {
        let domain: Event = self.domain.into_iter().collect();
        let cols = p.event_dim(&domain);
        let data = self
            .matrix
            .into_iter()
            .map(|[re, im]| Complex64::new(re, im))
            .collect();
        let m = ComplexMatrix::from_row_major(p.dim(), cols.max(1), data)?;
        Act::new(p, domain, self.target_stage, m)
    }
}

impl From<&Act> for ActData {
    fn from(a: &Act) -> Self {
        ActData {
            domain: a.domain.ids().collect(),
            target_stage: a.target_stage,
            matrix: a.matrix.data().iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum AvailabilityViolation {
    /// The act is not norm-preserving.
    NotIsometry { defect: f64 },
    /// The act does not move to a strictly later stage.
    StageNotAdvanced { domain_stage: usize, target_stage: usize },
    /// Part of the range lies outside the target stage block.
    RangeOutsideTarget { leaked_norm: f64 },
    /// Restrictions to two domain macrostates share outcome macrostates.
    Irreversibility {
        first: MacrostateId,
        second: MacrostateId,
        shared: Vec<MacrostateId>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvailabilityReport {
    pub valid: bool,
    pub violations: Vec<AvailabilityViolation>,
}

impl Act {
    /// Builds an act after structural checks only; availability is checked
    /// separately by [`Act::validate_availability`].
    pub fn new(p: &DecisionProblem, domain: Event, target_stage: usize, matrix: ComplexMatrix) -> Result<Act> {
        let domain_stage = p.stage_of(&domain)?;
        if target_stage >= p.stage_count() {
            return Err(Error::Domain(format!(
                "target stage {target_stage} beyond the last stage {}",
                p.stage_count() - 1
            )));
        }
        let domain_basis = p.event_basis(&domain);
        if matrix.rows() != p.dim() || matrix.cols() != domain_basis.len() {
            return Err(Error::Dimension(format!(
                "act on an event of dim {} needs a {}x{} matrix, got {}x{}",
                domain_basis.len(),
                p.dim(),
                domain_basis.len(),
                matrix.rows(),
                matrix.cols()
            )));
        }
        Ok(Act {
            domain,
            domain_stage,
            target_stage,
            matrix,
            domain_basis,
        })
    }

    pub fn domain(&self) -> &Event {
        &self.domain
    }

    pub fn domain_stage(&self) -> usize {
        self.domain_stage
    }

    pub fn target_stage(&self) -> usize {
        self.target_stage
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn domain_basis(&self) -> &[usize] {
        &self.domain_basis
    }

    pub fn to_data(&self) -> ActData {
        ActData::from(self)
    }

    /// Image of a state supported in the domain. No normalization check.
    pub fn apply(&self, psi: &ComplexVector) -> Result<ComplexVector> {
        if psi.dim() != self.matrix.rows() {
            return Err(Error::Dimension(format!(
                "state of dim {} for an act on a space of dim {}",
                psi.dim(),
                self.matrix.rows()
            )));
        }
        linalg::apply(&self.matrix, &psi.gather(&self.domain_basis))
    }

    /// The smallest event containing the range: macrostates M with
    /// ‖Π_M U‖ > eq_eps.
    pub fn outcome_event(&self, p: &DecisionProblem) -> Event {
        let eps = p.tolerance().eq_eps;
        p.macrostates()
            .iter()
            .filter(|m| self.matrix.rows_norm(m.basis()) > eps)
            .map(|m| m.id)
            .collect()
    }

    /// Outcome event of the restriction to a single domain macrostate.
    fn outcome_of_columns(&self, p: &DecisionProblem, cols: &[usize]) -> Event {
        let eps = p.tolerance().eq_eps;
        let sub = self.matrix.select_columns(cols);
        p.macrostates()
            .iter()
            .filter(|m| sub.rows_norm(m.basis()) > eps)
            .map(|m| m.id)
            .collect()
    }

    fn columns_of(&self, p: &DecisionProblem, e: &Event) -> Vec<usize> {
        let wanted: BTreeSet<usize> = p.event_basis(e).into_iter().collect();
        self.domain_basis
            .iter()
            .enumerate()
            .filter(|(_, b)| wanted.contains(b))
            .map(|(j, _)| j)
            .collect()
    }

    /// The image state Uψ, after checking that ψ is a normalized state in the domain.
    pub fn image(&self, p: &DecisionProblem, psi: &ComplexVector) -> Result<ComplexVector> {
        p.check_state_in(psi, &self.domain)?;
        self.apply(psi)
    }

    /// W_ψ(E|U) = ‖Π_E U ψ‖².
    pub fn weight(&self, p: &DecisionProblem, psi: &ComplexVector, e: &Event) -> Result<f64> {
        p.check_event(e)?;
        let img = self.image(p, psi)?;
        Ok(img.mass_on(p.event_basis(e)))
    }

    /// R_{ψ,U}(r) = W_ψ(r|U) for every reward.
    pub fn reward_function(&self, p: &DecisionProblem, psi: &ComplexVector) -> Result<RewardFunction> {
        let img = self.image(p, psi)?;
        Ok(reward_weights(p, &img))
    }

    pub fn is_null(&self, p: &DecisionProblem, psi: &ComplexVector, e: &Event) -> Result<bool> {
        Ok(self.weight(p, psi, e)? < p.tolerance().eq_eps)
    }

    pub fn validate_availability(&self, p: &DecisionProblem) -> AvailabilityReport {
        let mut violations = Vec::new();
        let defect = linalg::isometry_defect(&self.matrix).unwrap_or(f64::INFINITY);
        if defect > p.tolerance().eq_eps {
            violations.push(AvailabilityViolation::NotIsometry { defect });
        }
        if self.target_stage <= self.domain_stage {
            violations.push(AvailabilityViolation::StageNotAdvanced {
                domain_stage: self.domain_stage,
                target_stage: self.target_stage,
            });
        }
        let outside: Vec<usize> = p
            .macrostates()
            .iter()
            .filter(|m| m.stage != self.target_stage)
            .flat_map(|m| m.basis())
            .collect();
        let leaked = self.matrix.rows_norm(outside);
        if leaked > p.tolerance().eq_eps {
            violations.push(AvailabilityViolation::RangeOutsideTarget { leaked_norm: leaked });
        }
        let per_macrostate: Vec<(MacrostateId, Event)> = self
            .domain
            .ids()
            .map(|id| {
                let cols = self.columns_of(p, &Event::singleton(id));
                (id, self.outcome_of_columns(p, &cols))
            })
            .collect();
        for (i, (m1, o1)) in per_macrostate.iter().enumerate() {
            for (m2, o2) in &per_macrostate[i + 1..] {
                let shared = o1.intersection(o2);
                if !shared.is_empty() {
                    violations.push(AvailabilityViolation::Irreversibility {
                        first: *m1,
                        second: *m2,
                        shared: shared.ids().collect(),
                    });
                }
            }
        }
        AvailabilityReport {
            valid: violations.is_empty(),
            violations,
        }
    }

    pub fn is_available(&self, p: &DecisionProblem) -> bool {
        self.validate_availability(p).valid
    }

    /// U|_F: the column sub-matrix over `f ⊆ domain`.
    pub fn restrict(&self, p: &DecisionProblem, f: &Event) -> Result<Act> {
        if f.is_empty() || !f.is_subset(&self.domain) {
            return Err(Error::Precondition(format!(
                "cannot restrict an act on {} to {f}",
                self.domain
            )));
        }
        let cols = self.columns_of(p, f);
        Act::new(p, f.clone(), self.target_stage, self.matrix.select_columns(&cols))
    }

    /// `next ∘ self`: perform `self`, then `next`. Requires
    /// `next.domain ⊇ O_self`.
    pub fn then(&self, p: &DecisionProblem, next: &Act) -> Result<Act> {
        let outcome = self.outcome_event(p);
        if !outcome.is_subset(&next.domain) {
            return Err(Error::Precondition(format!(
                "continuation domain {} does not contain the outcome event {outcome}",
                next.domain
            )));
        }
        let inner = self.matrix.select_rows(&next.domain_basis);
        let matrix = next.matrix.mul(&inner)?;
        Act::new(p, self.domain.clone(), next.target_stage, matrix)
    }
}

/// compose(a, b) = b ∘ a.
pub fn compose(p: &DecisionProblem, a: &Act, b: &Act) -> Result<Act> {
    a.then(p, b)
}

/// Weight of every reward in a (normalized) image state.
pub fn reward_weights(p: &DecisionProblem, img: &ComplexVector) -> RewardFunction {
    let mut w = vec![0.0; p.reward_count()];
    for m in p.macrostates() {
        w[m.reward] += img.mass_on(m.basis());
    }
    RewardFunction(w)
}

/// Weight of every macrostate carrying mass above `eq_eps` in an image state.
pub fn macrostate_weights(p: &DecisionProblem, img: &ComplexVector) -> Vec<(MacrostateId, f64)> {
    let eps = p.tolerance().eq_eps;
    p.macrostates()
        .iter()
        .map(|m| (m.id, img.mass_on(m.basis())))
        .filter(|(_, w)| *w >= eps)
        .collect()
}

/// Π_E ψ, renormalized; `None` when the projection is null.
pub fn branch_state(p: &DecisionProblem, img: &ComplexVector, e: &Event) -> Option<ComplexVector> {
    let mut v = ComplexVector::zeros(img.dim());
    for i in p.event_basis(e) {
        v.entries_mut()[i] = img.entries()[i];
    }
    if v.norm_sqr() < p.tolerance().eq_eps {
        return None;
    }
    v.normalized()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn two_reward() -> DecisionProblem {
        DecisionProblem::new(ProblemConfig::new(&["reward", "none"], &[2, 4, 4])).unwrap()
    }

    /// Act mapping macrostate `from` onto macrostate `to` (dim 1 each).
    fn move_act(p: &DecisionProblem, from: &[MacrostateId], to: &[MacrostateId], stage: usize) -> Act {
        let domain: Event = from.iter().copied().collect();
        let mut m = ComplexMatrix::zeros(p.dim(), from.len());
        for (j, &t) in to.iter().enumerate() {
            let row = p.macrostate(t).unwrap().basis().start;
            m.set(row, j, c(1.0));
        }
        Act::new(p, domain, stage, m).unwrap()
    }

    #[test]
    fn layout_and_indexing() {
        let p = two_reward();
        assert_eq!(p.dim(), 2 * (2 + 4 + 4));
        assert_eq!(p.macrostates().len(), 20);
        let m = p.macrostate_at(1, 1, 3).unwrap();
        assert_eq!((m.reward, m.stage, m.ordinal), (1, 1, 3));
        let g = m.basis().start;
        assert_eq!(p.basis_index(g).unwrap(), BasisIndex { reward: 1, stage: 1, slot: 3 });
        assert_eq!(p.global_index(BasisIndex { reward: 1, stage: 1, slot: 3 }).unwrap(), g);
        assert!(p.macrostate_at(0, 0, 2).is_err());
        // macrostates cover the basis exactly once
        let covered: usize = p.macrostates().iter().map(|m| m.dim).sum();
        assert_eq!(covered, p.dim());
    }

    #[test]
    fn bad_configs_rejected() {
        assert!(DecisionProblem::new(ProblemConfig::new(&[], &[2])).is_err());
        assert!(DecisionProblem::new(ProblemConfig::new(&["a", "a"], &[2])).is_err());
        assert!(DecisionProblem::new(ProblemConfig::new(&["a"], &[3]).with_macrostate_dim(2)).is_err());
        let json = r#"{"rewards":["a","b"],"stage_capacities":[4,4],"macrostate_dims":[2,1]}"#;
        let cfg: ProblemConfig = serde_json::from_str(json).unwrap();
        let p = DecisionProblem::new(cfg).unwrap();
        assert_eq!(p.macrostate_dim(0), 2);
        assert_eq!(p.macrostates_per_reward(0), 2);
        assert_eq!(p.macrostates_per_reward(1), 4);
    }

    #[test]
    fn singleton_embedding_outcome() {
        let p = two_reward();
        let from = p.macrostate_at(1, 0, 0).unwrap().id;
        let to = p.macrostate_at(1, 1, 0).unwrap().id;
        let a = move_act(&p, &[from], &[to], 1);
        assert_eq!(a.outcome_event(&p), Event::singleton(to));
        assert!(a.validate_availability(&p).valid);
    }

    #[test]
    fn game_c_weights() {
        let p = two_reward();
        let plus = p.macrostate_at(1, 0, 0).unwrap().id;
        let minus = p.macrostate_at(1, 0, 1).unwrap().id;
        let rew = p.macrostate_at(0, 1, 0).unwrap().id;
        let none = p.macrostate_at(1, 1, 0).unwrap().id;
        let a = move_act(&p, &[plus, minus], &[rew, none], 1);
        let psi = p
            .state_from_parts(&[(plus, vec![c((2.0f64 / 3.0).sqrt())]), (minus, vec![c((1.0f64 / 3.0).sqrt())])])
            .unwrap();
        assert_eq!(a.outcome_event(&p), [rew, none].into_iter().collect());
        let rf = a.reward_function(&p, &psi).unwrap();
        assert!((rf.get(0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((rf.get(1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((a.weight(&p, &psi, &p.full_event()).unwrap() - 1.0).abs() < 1e-15);
        assert!(!a.is_null(&p, &psi, &Event::singleton(none)).unwrap());
        let elsewhere = p.macrostate_at(0, 2, 0).unwrap().id;
        assert!(a.is_null(&p, &psi, &Event::singleton(elsewhere)).unwrap());
    }

    #[test]
    fn zero_amplitude_branch_is_null() {
        let p = two_reward();
        let m0 = p.macrostate_at(1, 0, 0).unwrap().id;
        let m1 = p.macrostate_at(1, 0, 1).unwrap().id;
        let t0 = p.macrostate_at(0, 1, 0).unwrap().id;
        let t1 = p.macrostate_at(1, 1, 0).unwrap().id;
        let a = move_act(&p, &[m0, m1], &[t0, t1], 1);
        let psi = p.state_in(m0, &[c(1.0)]).unwrap();
        // t1 is in the outcome event but receives no amplitude from ψ
        assert!(a.outcome_event(&p).contains(t1));
        assert!(a.is_null(&p, &psi, &Event::singleton(t1)).unwrap());
    }

    #[test]
    fn unnormalized_state_rejected() {
        let p = two_reward();
        let m = p.macrostate_at(1, 0, 0).unwrap().id;
        let t = p.macrostate_at(1, 1, 0).unwrap().id;
        let a = move_act(&p, &[m], &[t], 1);
        let psi = p.state_in(m, &[c(0.5)]).unwrap();
        assert!(matches!(a.weight(&p, &psi, &p.full_event()), Err(Error::Validation(_))));
    }

    #[test]
    fn availability_diagnostics() {
        let p = two_reward();
        let m0 = p.macrostate_at(1, 0, 0).unwrap().id;
        let m1 = p.macrostate_at(1, 0, 1).unwrap().id;
        let t = p.macrostate_at(1, 1, 0).unwrap();
        let t2 = p.macrostate_at(1, 1, 1).unwrap();

        // two orthogonal inputs into one output macrostate: irreversible collision
        let mut m = ComplexMatrix::zeros(p.dim(), 2);
        m.set(t.basis().start, 0, c(FRAC_1_SQRT_2));
        m.set(t2.basis().start, 0, c(FRAC_1_SQRT_2));
        m.set(t.basis().start, 1, c(FRAC_1_SQRT_2));
        m.set(t2.basis().start, 1, c(-FRAC_1_SQRT_2));
        let a = Act::new(&p, [m0, m1].into_iter().collect(), 1, m).unwrap();
        let report = a.validate_availability(&p);
        assert!(!report.valid);
        assert!(matches!(
            report.violations[..],
            [AvailabilityViolation::Irreversibility { .. }]
        ));

        // staying in the same stage
        let same = p.macrostate_at(1, 0, 1).unwrap().id;
        let a = move_act(&p, &[m0], &[same], 0);
        let report = a.validate_availability(&p);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, AvailabilityViolation::StageNotAdvanced { .. })));
    }

    #[test]
    fn restrict_and_compose() {
        let p = two_reward();
        let m0 = p.macrostate_at(1, 0, 0).unwrap().id;
        let m1 = p.macrostate_at(1, 0, 1).unwrap().id;
        let t0 = p.macrostate_at(0, 1, 0).unwrap().id;
        let t1 = p.macrostate_at(1, 1, 0).unwrap().id;
        let a = move_act(&p, &[m0, m1], &[t0, t1], 1);
        assert_eq!(a.restrict(&p, a.domain()).unwrap(), a);
        let r = a.restrict(&p, &Event::singleton(m1)).unwrap();
        assert_eq!(r.outcome_event(&p), Event::singleton(t1));
        assert!(a.restrict(&p, &Event::singleton(t0)).is_err());

        let u0 = p.macrostate_at(0, 2, 0).unwrap().id;
        let u1 = p.macrostate_at(1, 2, 0).unwrap().id;
        let b = move_act(&p, &[t0, t1], &[u0, u1], 2);
        let ba = compose(&p, &a, &b).unwrap();
        assert_eq!(ba.target_stage(), 2);
        assert_eq!(ba.outcome_event(&p), [u0, u1].into_iter().collect());
        assert!(ba.is_available(&p));
        // b's domain must cover a's outcome
        let short = move_act(&p, &[t0], &[u0], 2);
        assert!(matches!(compose(&p, &a, &short), Err(Error::Precondition(_))));
    }

    #[test]
    fn act_data_round_trip() {
        let p = two_reward();
        let m0 = p.macrostate_at(1, 0, 0).unwrap().id;
        let t0 = p.macrostate_at(0, 1, 1).unwrap().id;
        let a = move_act(&p, &[m0], &[t0], 1);
        let json = serde_json::to_string(&a.to_data()).unwrap();
        let back: ActData = serde_json::from_str(&json).unwrap();
        assert_eq!(back.into_act(&p).unwrap(), a);
    }
}
