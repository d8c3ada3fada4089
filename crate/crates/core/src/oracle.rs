//! Brute-force ground truth by enumerating all `2^n` assignments.
//!
//! Nothing here relies on the counting or sampling engine: models come from
//! evaluating the circuit on every assignment, and probabilities from
//! normalizing the enumerated weights.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::circuit::{block_columns, block_count, Assignment, Circuit};
use crate::exec::{self, Execution};
use crate::rational::Rational;
use crate::weights::WeightFn;

/// Largest `n` enumerated unless the caller raises the limit explicitly.
pub const ENUMERATION_LIMIT: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("enumeration needs n <= {limit}, got {n}")]
    TooManyVars { n: usize, limit: usize },
    #[error("circuit is unsatisfiable")]
    Unsatisfiable,
    #[error("variable counts differ: {0} vs {1}")]
    VarMismatch(usize, usize),
    #[error("empty sample set")]
    NoSamples,
}

/// Exact `P(φ, w)` over the models of `φ`, in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactPmf {
    n_vars: usize,
    probs: BTreeMap<Assignment, Rational>,
}

impl ExactPmf {
    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn get(&self, sigma: &Assignment) -> Rational {
        self.probs.get(sigma).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Assignment, &Rational)> {
        self.probs.iter()
    }

    pub fn support_size(&self) -> usize {
        self.probs.len()
    }

    pub fn total(&self) -> Rational {
        self.probs.values().sum()
    }
}

fn guard(n: usize, limit: usize) -> Result<(), OracleError> {
    if n > limit {
        Err(OracleError::TooManyVars { n, limit })
    } else {
        Ok(())
    }
}

/// All satisfying assignments in lexicographic order (`x1` most significant).
pub fn enumerate_models(circuit: &Circuit) -> Result<Vec<Assignment>, OracleError> {
    enumerate_models_with_limit(circuit, ENUMERATION_LIMIT)
}

pub fn enumerate_models_with_limit(circuit: &Circuit, limit: usize) -> Result<Vec<Assignment>, OracleError> {
    let n = circuit.n_vars();
    guard(n, limit)?;
    let blocks = block_count(n);
    let root = circuit.root().index();
    let per_block = exec::map(Execution::default_for(blocks), blocks, |block| {
        let (columns, valid) = block_columns(n, block);
        let mut hits = circuit.evaluate_lanes(&columns)[root] & valid;
        let mut models = Vec::new();
        while hits != 0 {
            let lane = hits.trailing_zeros() as u64;
            models.push(Assignment::from_index(n, block * 64 + lane));
            hits &= hits - 1;
        }
        models
    });
    Ok(per_block.into_iter().flatten().collect())
}

/// Normalized exact pmf by enumeration.
pub fn exact_pmf(circuit: &Circuit, w: &WeightFn) -> Result<ExactPmf, OracleError> {
    if circuit.n_vars() != w.n_vars() {
        return Err(OracleError::VarMismatch(circuit.n_vars(), w.n_vars()));
    }
    let models = enumerate_models(circuit)?;
    if models.is_empty() {
        return Err(OracleError::Unsatisfiable);
    }
    let weighted: Vec<(Assignment, Rational)> = models
        .into_iter()
        .map(|s| {
            let weight = w.weight_of(&s).expect("lengths checked");
            (s, weight)
        })
        .collect();
    let total: Rational = weighted.iter().map(|(_, x)| x).sum();
    let probs = weighted.into_iter().map(|(s, x)| (s, x / &total)).collect();
    Ok(ExactPmf { n_vars: circuit.n_vars(), probs })
}

/// `Σ_{σ ⊨ φ} w(σ)` by enumeration.
pub fn brute_force_wmc(circuit: &Circuit, w: &WeightFn) -> Result<Rational, OracleError> {
    Ok(enumerate_models(circuit)?.iter().map(|s| w.weight_of(s).expect("lengths match")).sum())
}

/// `½ Σ |P(σ) - Q(σ)|` between two pmfs over the same variables.
pub fn tv_between(p: &ExactPmf, q: &ExactPmf) -> Result<Rational, OracleError> {
    if p.n_vars != q.n_vars {
        return Err(OracleError::VarMismatch(p.n_vars, q.n_vars));
    }
    let mut sum = Rational::zero();
    for (s, a) in &p.probs {
        sum += (a - q.get(s)).abs();
    }
    for (s, b) in &q.probs {
        if !p.probs.contains_key(s) {
            sum += b;
        }
    }
    Ok(sum / Rational::from_integer(2.into()))
}

/// Exact total variation distance between `P(φ1, w1)` and `P(φ2, w2)`.
pub fn tv_exact(c1: &Circuit, w1: &WeightFn, c2: &Circuit, w2: &WeightFn) -> Result<Rational, OracleError> {
    if c1.n_vars() != c2.n_vars() {
        return Err(OracleError::VarMismatch(c1.n_vars(), c2.n_vars()));
    }
    tv_between(&exact_pmf(c1, w1)?, &exact_pmf(c2, w2)?)
}

/// L1 distance between the empirical distribution of `samples` and `pmf`.
pub fn empirical_l1(samples: &[Assignment], pmf: &ExactPmf) -> Result<Rational, OracleError> {
    if samples.is_empty() {
        return Err(OracleError::NoSamples);
    }
    let mut counts: BTreeMap<&Assignment, u64> = BTreeMap::new();
    for s in samples {
        *counts.entry(s).or_default() += 1;
    }
    let total = Rational::from_integer((samples.len() as u64).into());
    let mut l1 = Rational::zero();
    for (s, &k) in &counts {
        l1 += (Rational::from_integer(k.into()) / &total - pmf.get(s)).abs();
    }
    for (s, p) in pmf.iter() {
        if !counts.contains_key(s) {
            l1 += p;
        }
    }
    Ok(l1)
}

/// Sanity check that a pmf sums to one.
pub fn is_normalized(pmf: &ExactPmf) -> bool {
    pmf.total().is_one() && pmf.iter().all(|(_, p)| p.is_positive())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{CircuitBuilder, VarId};
    use crate::rational::ratio;

    fn v(i: u32) -> VarId {
        VarId::new(i).unwrap()
    }

    fn tautology() -> Circuit {
        let mut b = CircuitBuilder::new(1);
        let p = b.literal(v(1), true).unwrap();
        let n = b.literal(v(1), false).unwrap();
        let o = b.or(vec![p, n], Some(v(1))).unwrap();
        b.build(o).unwrap()
    }

    fn literal(positive: bool) -> Circuit {
        let mut b = CircuitBuilder::new(1);
        let p = b.literal(v(1), positive).unwrap();
        b.build(p).unwrap()
    }

    #[test]
    fn models_of_small_circuits() {
        let all = enumerate_models(&tautology()).unwrap();
        assert_eq!(all, vec![Assignment::new(vec![false]), Assignment::new(vec![true])]);
        let mut b = CircuitBuilder::new(1);
        let p = b.literal(v(1), true).unwrap();
        let n = b.literal(v(1), false).unwrap();
        let a = b.and(vec![p, n]).unwrap();
        assert!(enumerate_models(&b.build(a).unwrap()).unwrap().is_empty());
    }

    #[test]
    fn enumeration_guard() {
        let mut b = CircuitBuilder::new(30);
        let p = b.literal(v(1), true).unwrap();
        let c = b.build(p).unwrap();
        assert_eq!(enumerate_models(&c), Err(OracleError::TooManyVars { n: 30, limit: ENUMERATION_LIMIT }));
    }

    #[test]
    fn pmfs_of_the_valid_circuit() {
        let pmf = exact_pmf(&tautology(), &WeightFn::uniform(1)).unwrap();
        assert_eq!(pmf.get(&Assignment::new(vec![false])), ratio(1, 2));
        assert_eq!(pmf.get(&Assignment::new(vec![true])), ratio(1, 2));
        let pmf = exact_pmf(&tautology(), &WeightFn::new(vec![ratio(1, 4)]).unwrap()).unwrap();
        assert_eq!(pmf.get(&Assignment::new(vec![true])), ratio(1, 4));
        assert_eq!(pmf.get(&Assignment::new(vec![false])), ratio(3, 4));
        assert!(is_normalized(&pmf));
    }

    #[test]
    fn tv_of_identical_and_disjoint() {
        let u = WeightFn::uniform(1);
        assert_eq!(tv_exact(&tautology(), &u, &tautology(), &u).unwrap(), Rational::zero());
        assert_eq!(tv_exact(&literal(true), &u, &literal(false), &u).unwrap(), Rational::one());
    }

    #[test]
    fn tv_errors() {
        let mut b = CircuitBuilder::new(1);
        let f = b.constant(false);
        let unsat = b.build(f).unwrap();
        let u = WeightFn::uniform(1);
        assert_eq!(tv_exact(&unsat, &u, &tautology(), &u), Err(OracleError::Unsatisfiable));
        let mut b = CircuitBuilder::new(2);
        let p = b.literal(v(1), true).unwrap();
        let two = b.build(p).unwrap();
        assert!(matches!(tv_exact(&two, &WeightFn::uniform(2), &tautology(), &u), Err(OracleError::VarMismatch(2, 1))));
    }

    #[test]
    fn empirical_l1_cases() {
        let pmf = exact_pmf(&tautology(), &WeightFn::uniform(1)).unwrap();
        let zero = Assignment::new(vec![false]);
        let one = Assignment::new(vec![true]);
        assert_eq!(empirical_l1(&[zero.clone(), one.clone()], &pmf).unwrap(), Rational::zero());
        // 2 of 3 on `0`: |2/3 - 1/2| + |1/3 - 1/2| = 1/3
        assert_eq!(empirical_l1(&[zero.clone(), zero.clone(), one], &pmf).unwrap(), ratio(1, 3));
        assert_eq!(empirical_l1(&[zero.clone(), zero], &pmf).unwrap(), Rational::one());
        assert_eq!(empirical_l1(&[], &pmf), Err(OracleError::NoSamples));
    }
}
