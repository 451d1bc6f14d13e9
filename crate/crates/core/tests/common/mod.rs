//! Property checks shared by the proptest suite and the acceptance run.
//! Each takes a seed and returns a description of the first failure.

#![allow(dead_code)]

use branchwise_core::construct::{glue, ActFunction, Allocator};
use branchwise_core::generate::{random_block_act, random_state};
use branchwise_core::linalg::{self, ComplexMatrix, ComplexVector};
use branchwise_core::model::{Act, DecisionProblem, Event, ProblemConfig};
use branchwise_core::rules::{MassMap, Preference, PreferenceRule, UtilityFunction, Verdict};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

pub fn canonical(dim: usize) -> DecisionProblem {
    DecisionProblem::new(ProblemConfig::new(&["reward", "partial", "none"], &[16, 16, 16, 16]).with_macrostate_dim(dim))
        .unwrap()
}

/// ‖Π_E v‖² by direct summation over the event's basis.
pub fn weight_oracle(p: &DecisionProblem, v: &ComplexVector, e: &Event) -> f64 {
    e.ids()
        .flat_map(|m| p.macrostates()[m].basis())
        .map(|i| v.entries()[i].norm_sqr())
        .sum()
}

/// Dense product U·ψ restricted to the act's domain columns, written out
/// by hand.
pub fn image_oracle(a: &Act, psi: &ComplexVector) -> ComplexVector {
    let m = a.matrix();
    let mut out = vec![Complex64::new(0.0, 0.0); m.rows()];
    for (j, &b) in a.domain_basis().iter().enumerate() {
        let x = psi.entries()[b];
        for (r, slot) in out.iter_mut().enumerate() {
            *slot += m.get(r, j) * x;
        }
    }
    ComplexVector::new(out)
}

/// Weights of a random partition of O_U add up to the weight of O_U, which
/// is 1 for a normalized state.
pub fn partition_additivity(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = canonical(1 + (seed % 2) as usize);
    let psi = random_state(&p, &mut rng);
    let a = random_block_act(&p, &mut rng, &psi, 1).map_err(|e| e.to_string())?;
    let img = image_oracle(&a, &psi);
    let outcome = a.outcome_event(&p);
    let k = rng.random_range(1..=4);
    let mut parts = vec![Vec::new(); k];
    for m in outcome.ids() {
        parts[rng.random_range(0..k)].push(m);
    }
    let eps = p.tolerance().eq_eps;
    let mut total = 0.0;
    for part in parts {
        let e: Event = part.into_iter().collect();
        let w = a.weight(&p, &psi, &e).map_err(|e| e.to_string())?;
        let oracle = weight_oracle(&p, &img, &e);
        if (w - oracle).abs() > eps {
            return Err(format!("weight {w} vs oracle {oracle} on {e}"));
        }
        total += w;
    }
    let whole = a.weight(&p, &psi, &outcome).map_err(|e| e.to_string())?;
    if (total - whole).abs() > eps || (whole - 1.0).abs() > eps {
        return Err(format!("parts sum to {total}, O_U has weight {whole}"));
    }
    let rf = a.reward_function(&p, &psi).map_err(|e| e.to_string())?;
    if (rf.total() - 1.0).abs() > eps {
        return Err(format!("reward function sums to {}", rf.total()));
    }
    Ok(())
}

/// ‖Uv‖ = ‖v‖ for random isometries (columns of a random unitary) and for
/// random block acts applied to arbitrary vectors in their domain.
pub fn norm_preservation(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=8);
    let k = rng.random_range(1..=n);
    let u = linalg::random_unitary(&mut rng, n);
    let cols: Vec<usize> = (0..k).collect();
    let iso: ComplexMatrix = u.select_columns(&cols);
    let v = ComplexVector::new((0..k).map(|_| linalg::random_complex(&mut rng)).collect());
    let uv = linalg::apply(&iso, &v).map_err(|e| e.to_string())?;
    let eps = 1e-9;
    if (uv.norm_sqr() - v.norm_sqr()).abs() > eps * v.norm_sqr().max(1.0) {
        return Err(format!("‖Uv‖² = {} but ‖v‖² = {}", uv.norm_sqr(), v.norm_sqr()));
    }
    let p = canonical(2);
    let psi = random_state(&p, &mut rng);
    let a = random_block_act(&p, &mut rng, &psi, 1).map_err(|e| e.to_string())?;
    let mut w = ComplexVector::zeros(p.dim());
    for &b in a.domain_basis() {
        w.entries_mut()[b] = linalg::random_complex(&mut rng);
    }
    let aw = image_oracle(&a, &w);
    if (aw.norm_sqr() - w.norm_sqr()).abs() > eps * w.norm_sqr().max(1.0) {
        return Err(format!("act changes the norm: {} vs {}", aw.norm_sqr(), w.norm_sqr()));
    }
    Ok(())
}

/// Restricting to a sub-event agrees with the full act there, and gluing
/// the per-macrostate restrictions gives the act back.
pub fn restriction_coherence(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = canonical(1 + (seed % 2) as usize);
    let psi = random_state(&p, &mut rng);
    let a = random_block_act(&p, &mut rng, &psi, 1).map_err(|e| e.to_string())?;
    let cells: Vec<_> = a.domain().ids().collect();
    let pick: Event = cells.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
    let f = if pick.is_empty() { Event::singleton(cells[0]) } else { pick };
    let r = a.restrict(&p, &f).map_err(|e| e.to_string())?;
    if !r.is_available(&p) {
        return Err(format!("restriction to {f} is unavailable"));
    }
    let mut psi_f = ComplexVector::zeros(p.dim());
    for i in p.event_basis(&f) {
        psi_f.entries_mut()[i] = psi.entries()[i];
    }
    let gap = image_oracle(&r, &psi_f).distance(&image_oracle(&a, &psi_f)).map_err(|e| e.to_string())?;
    if gap > p.tolerance().eq_eps {
        return Err(format!("restriction to {f} differs by {gap}"));
    }
    let pieces: Vec<Act> = cells
        .iter()
        .map(|&m| a.restrict(&p, &Event::singleton(m)))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let glued = glue(&p, &mut Allocator::avoiding(&p, a.domain()).unwrap(), &ActFunction::new(pieces))
        .map_err(|e| e.to_string())?;
    if glued.matrix() != a.matrix() {
        return Err("gluing the restrictions does not give the act back".into());
    }
    Ok(())
}

fn rule_for(seed: u64, rng: &mut ChaCha8Rng) -> PreferenceRule {
    let u = UtilityFunction::new((0..3).map(|_| rng.random_range(-1.0..1.0)).collect());
    match seed % 3 {
        0 => PreferenceRule::born(u),
        1 => PreferenceRule::fatness(u, MassMap::constant(rng.random_range(50.0..100.0))),
        _ => PreferenceRule::branch_count(u),
    }
}

/// ≻ is asymmetric and transitive, ∼ is reflexive and symmetric, over
/// random act triples, for score-based rules.
pub fn ordering_transitivity(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rule = rule_for(seed, &mut rng);
    let p = canonical(1);
    let psi = random_state(&p, &mut rng);
    let acts: Vec<Act> = (0..3)
        .map(|_| random_block_act(&p, &mut rng, &psi, 1))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let v = |i: usize, j: usize| rule.compare(&p, &psi, &acts[i], &acts[j]).map(|c| c.verdict);
    let mut table = [[Verdict::Indifferent; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            table[i][j] = v(i, j).map_err(|e| e.to_string())?;
        }
    }
    for i in 0..3 {
        if table[i][i] != Verdict::Indifferent {
            return Err(format!("{} is not indifferent to itself", rule.name()));
        }
        for j in 0..3 {
            if table[i][j] != table[j][i].reversed() {
                return Err(format!("{}: {i} vs {j} is not antisymmetric", rule.name()));
            }
            for k in 0..3 {
                let weak = |x: Verdict| x != Verdict::PreferB;
                if weak(table[i][j]) && weak(table[j][k]) && !weak(table[i][k]) {
                    return Err(format!("{}: ⪰ fails transitivity on {i}, {j}, {k}", rule.name()));
                }
                if table[i][j] == Verdict::PreferA && table[j][k] == Verdict::PreferA && table[i][k] != Verdict::PreferA {
                    return Err(format!("{}: ≻ fails transitivity on {i}, {j}, {k}", rule.name()));
                }
            }
        }
    }
    Ok(())
}

pub const PROPERTIES: [(&str, fn(u64) -> Check); 4] = [
    ("partition additivity", partition_additivity),
    ("isometry norm preservation", norm_preservation),
    ("restriction coherence", restriction_coherence),
    ("ordering transitivity", ordering_transitivity),
];
