//! Benchmark generation: random 3-CNFs, an exhaustive decision-DNNF
//! compiler, random dyadic weights and one-variable perturbation pairs.
//!
//! Every generator is a pure function of its arguments and the RNG state.

use std::collections::{BTreeSet, HashMap};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, CircuitBuilder, CircuitError, NodeId, VarId};
use crate::cnf::Cnf;
use crate::engine::{EngineError, WeightedCircuit};
use crate::rational::{int, Rational};
use crate::weights::{WeightError, WeightFn, MAX_DYADIC_PRECISION};

/// Largest formula the exhaustive compiler accepts.
pub const COMPILE_LIMIT: usize = 24;

/// Default clause/variable ratio for random instances.
pub const DEFAULT_CLAUSE_RATIO: f64 = 4.1;

/// Bisection steps used by [`make_pair_with_target`].
const BISECTION_STEPS: u32 = 40;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BenchError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("compiler accepts at most {limit} variables, got {n}")]
    TooManyVars { n: usize, limit: usize },
    #[error("literal {lit} out of range for {n_vars} variables")]
    LiteralOutOfRange { lit: i32, n_vars: usize },
    #[error("circuit is unsatisfiable")]
    Unsatisfiable,
    #[error("no satisfiable instance after {0} attempts")]
    NoSatisfiableInstance(u32),
    #[error("target is infeasible: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Random 3-CNF with `m` distinct clauses, each over 3 distinct variables
/// chosen uniformly with uniform signs.
pub fn random_3cnf<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<Cnf, BenchError> {
    if n < 3 {
        return Err(BenchError::InvalidArgument(format!("random 3-CNF needs n >= 3, got {n}")));
    }
    let distinct = (n * (n - 1) * (n - 2) / 6) as u128 * 8;
    if m as u128 > distinct {
        return Err(BenchError::InvalidArgument(format!("only {distinct} distinct clauses over {n} variables")));
    }
    let vars: Vec<i32> = (1..=n as i32).collect();
    let mut seen = BTreeSet::new();
    let mut clauses = Vec::with_capacity(m);
    while clauses.len() < m {
        let mut clause: Vec<i32> = vars
            .choose_multiple(rng, 3)
            .map(|&v| if rng.random::<bool>() { v } else { -v })
            .collect();
        clause.sort_by_key(|l| l.abs());
        if seen.insert(clause.clone()) {
            clauses.push(clause);
        }
    }
    Ok(Cnf::new(n, clauses))
}

type Clauses = Vec<Vec<i32>>;

struct Compiler {
    builder: CircuitBuilder,
    cache: HashMap<Clauses, NodeId>,
}

fn condition(clauses: &[Vec<i32>], lit: i32) -> Clauses {
    let mut out: Clauses = clauses
        .iter()
        .filter(|c| !c.contains(&lit))
        .map(|c| c.iter().copied().filter(|&l| l != -lit).collect())
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Splits clauses into groups with pairwise disjoint variables.
fn components(clauses: &[Vec<i32>]) -> Vec<Clauses> {
    let mut parent: HashMap<u32, u32> = HashMap::new();
    fn find(parent: &mut HashMap<u32, u32>, x: u32) -> u32 {
        let p = *parent.entry(x).or_insert(x);
        if p == x {
            return x;
        }
        let r = find(parent, p);
        parent.insert(x, r);
        r
    }
    for c in clauses {
        let first = c[0].unsigned_abs();
        for l in &c[1..] {
            let a = find(&mut parent, first);
            let b = find(&mut parent, l.unsigned_abs());
            if a != b {
                parent.insert(a, b);
            }
        }
        find(&mut parent, first);
    }
    let mut groups: Vec<(u32, Clauses)> = Vec::new();
    for c in clauses {
        let r = find(&mut parent, c[0].unsigned_abs());
        match groups.iter_mut().find(|(k, _)| *k == r) {
            Some((_, g)) => g.push(c.clone()),
            None => groups.push((r, vec![c.clone()])),
        }
    }
    groups.into_iter().map(|(_, g)| g).collect()
}

fn branch_var(clauses: &[Vec<i32>]) -> u32 {
    let mut counts: HashMap<u32, usize> = HashMap::new();
    for l in clauses.iter().flatten() {
        *counts.entry(l.unsigned_abs()).or_default() += 1;
    }
    counts.into_iter().max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0))).map(|(v, _)| v).expect("nonempty")
}

impl Compiler {
    fn var(v: u32) -> VarId {
        VarId::new(v).expect("positive variable")
    }

    fn compile(&mut self, clauses: Clauses) -> Result<NodeId, BenchError> {
        if clauses.is_empty() {
            return Ok(self.builder.constant(true));
        }
        if clauses.iter().any(|c| c.is_empty()) {
            return Ok(self.builder.constant(false));
        }
        if let Some(&id) = self.cache.get(&clauses) {
            return Ok(id);
        }
        let node = if let Some(unit) = clauses.iter().find(|c| c.len() == 1).map(|c| c[0]) {
            let rest = self.compile(condition(&clauses, unit))?;
            let f = self.builder.constant(false);
            let (hi, lo) = if unit > 0 { (rest, f) } else { (f, rest) };
            self.builder.decision(Self::var(unit.unsigned_abs()), hi, lo)?
        } else {
            let groups = components(&clauses);
            if groups.len() > 1 {
                let mut children = Vec::with_capacity(groups.len());
                for g in groups {
                    children.push(self.compile(g)?);
                }
                self.builder.and(children)?
            } else {
                let v = branch_var(&clauses);
                let hi = self.compile(condition(&clauses, v as i32))?;
                let lo = self.compile(condition(&clauses, -(v as i32)))?;
                self.builder.decision(Self::var(v), hi, lo)?
            }
        };
        self.cache.insert(clauses, node);
        Ok(node)
    }
}

/// Compiles a CNF into a decision-DNNF by exhaustive DPLL search with unit
/// propagation, component splitting and a cache keyed on the residual
/// clause set. Every Or node is a decision node, so the output is
/// decomposable and deterministic by construction.
pub fn compile_decision_dnnf(cnf: &Cnf) -> Result<Circuit, BenchError> {
    let n = cnf.n_vars;
    if n > COMPILE_LIMIT {
        return Err(BenchError::TooManyVars { n, limit: COMPILE_LIMIT });
    }
    let mut clauses: Clauses = Vec::with_capacity(cnf.clauses.len());
    for c in &cnf.clauses {
        if let Some(&lit) = c.iter().find(|l| **l == 0 || l.unsigned_abs() as usize > n) {
            return Err(BenchError::LiteralOutOfRange { lit, n_vars: n });
        }
        let mut c = c.clone();
        c.sort();
        c.dedup();
        if c.iter().any(|l| c.contains(&-l)) {
            continue; // tautological clause
        }
        clauses.push(c);
    }
    clauses.sort();
    clauses.dedup();
    let mut compiler = Compiler { builder: CircuitBuilder::new(n), cache: HashMap::new() };
    let root = compiler.compile(clauses)?;
    Ok(compiler.builder.build(root)?)
}

/// Draws a random 3-CNF with `m` clauses until its compilation is
/// satisfiable, giving up after `attempts` tries.
pub fn satisfiable_instance<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    attempts: u32,
    rng: &mut R,
) -> Result<(Cnf, Circuit), BenchError> {
    for _ in 0..attempts {
        let cnf = random_3cnf(n, m, rng)?;
        let circuit = compile_decision_dnnf(&cnf)?;
        if !circuit.is_false() {
            return Ok((cnf, circuit));
        }
    }
    Err(BenchError::NoSatisfiableInstance(attempts))
}

/// Clause count for `n` variables at the default ratio.
pub fn default_clause_count(n: usize) -> usize {
    (n as f64 * DEFAULT_CLAUSE_RATIO).round() as usize
}

/// Independent weights, each uniform on `{1, …, 2^p - 1} / 2^p`.
pub fn random_weights<R: Rng + ?Sized>(n: usize, rng: &mut R, precision: u32) -> Result<WeightFn, BenchError> {
    if precision == 0 || precision > MAX_DYADIC_PRECISION {
        return Err(WeightError::Precision(precision).into());
    }
    let top = 1u64 << precision;
    let den = BigInt::from(top);
    let weights = (0..n).map(|_| Rational::new(BigInt::from(rng.random_range(1..top)), den.clone())).collect();
    Ok(WeightFn::new(weights)?)
}

/// Two weight functions over one circuit that differ only at `var`.
#[derive(Debug, Clone)]
pub struct PerturbedPair {
    pub circuit: Circuit,
    pub w1: WeightFn,
    pub w2: WeightFn,
    pub var: VarId,
    pub dtv_closed_form: Rational,
}

/// Closed-form distance parts for perturbing `var` under `w1`.
struct Perturbation {
    /// Weighted count with `var` fixed true (its literal weighted 1).
    conditioned: Rational,
    w1_total: Rational,
    base: Rational,
}

impl Perturbation {
    fn new(pc: &WeightedCircuit, var: VarId) -> Self {
        let w1 = pc.weights();
        let conditioned = pc.wmc_with(|x, pos| {
            if x == var {
                if pos { Rational::one() } else { Rational::zero() }
            } else {
                w1.literal(x, pos)
            }
        });
        Perturbation { conditioned, w1_total: pc.wmc().clone(), base: w1.get(var).clone() }
    }

    /// Weighted count when `var` gets weight `b`: linear in `b`.
    fn total_with(&self, b: &Rational) -> Rational {
        // w(φ) = a·U1 + (1-a)·U0 with U1 = conditioned
        let one = Rational::one();
        let u0 = (&self.w1_total - &self.base * &self.conditioned) / (&one - &self.base);
        b * &self.conditioned + (&one - b) * u0
    }

    /// `w'(φ)·|w1(v)/w1(φ) - w2(v)/w2(φ)|`.
    fn dtv(&self, b: &Rational) -> Rational {
        let diff = &self.base / &self.w1_total - b / self.total_with(b);
        &self.conditioned * diff.abs()
    }

    /// Supremum of the distance as `b` tends to 0 (`toward_zero`) or 1.
    fn limit(&self, toward_zero: bool) -> Rational {
        let p1 = &self.conditioned * &self.base / &self.w1_total;
        if toward_zero { p1 } else { Rational::one() - p1 }
    }
}

fn satisfiable(circuit: &Circuit, w1: &WeightFn) -> Result<WeightedCircuit, BenchError> {
    let pc = WeightedCircuit::new(circuit, w1)?;
    if !pc.is_satisfiable() {
        return Err(BenchError::Unsatisfiable);
    }
    Ok(pc)
}

/// Pair `(w1, w2)` with `w2 = w1[var := new_weight]` and its exact distance
/// from three weighted counts.
pub fn perturb_one_var(
    circuit: &Circuit,
    w1: &WeightFn,
    var: VarId,
    new_weight: Rational,
) -> Result<PerturbedPair, BenchError> {
    let pc = satisfiable(circuit, w1)?;
    if var.index() >= w1.n_vars() {
        return Err(BenchError::InvalidArgument(format!("variable {} out of range", var.get())));
    }
    if &new_weight == w1.get(var) {
        return Err(BenchError::InvalidArgument("new weight equals the current weight".into()));
    }
    let w2 = w1.with_weight(var, new_weight)?;
    let dtv_closed_form = Perturbation::new(&pc, var).dtv(w2.get(var));
    Ok(PerturbedPair { circuit: circuit.clone(), w1: w1.clone(), w2, var, dtv_closed_form })
}

/// Requested distance of a generated pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    /// `d_TV <= ε`.
    Close(Rational),
    /// `d_TV >= η`.
    Far(Rational),
}

impl Target {
    pub fn is_met(&self, dtv: &Rational) -> bool {
        match self {
            Target::Close(eps) => dtv <= eps,
            Target::Far(eta) => dtv >= eta,
        }
    }
}

/// Dyadic point strictly inside (0, 1), `k` halvings away from the endpoint.
fn near_endpoint(toward_zero: bool, k: u32) -> Rational {
    let step = Rational::new(BigInt::one(), BigInt::one() << k);
    if toward_zero { step } else { Rational::one() - step }
}

/// Bisection on `b` between `w1(v)` and an endpoint. The objective grows
/// monotonically as `b` moves away from `w1(v)`, so the returned weight is
/// the one closest to the target boundary found in [`BISECTION_STEPS`]
/// steps that still meets the target.
fn search(p: &Perturbation, target: &Target, toward_zero: bool) -> Option<Rational> {
    let a = p.base.clone();
    let two = int(2);
    match target {
        Target::Far(eta) => {
            if p.limit(toward_zero) <= *eta {
                return None;
            }
            let mut far = (1..=MAX_DYADIC_PRECISION)
                .map(|k| near_endpoint(toward_zero, k))
                .find(|b| (toward_zero && *b < a || !toward_zero && *b > a) && p.dtv(b) >= *eta)?;
            let mut near = a;
            for _ in 0..BISECTION_STEPS {
                let mid = (&near + &far) / &two;
                if p.dtv(&mid) >= *eta { far = mid } else { near = mid }
            }
            Some(far)
        }
        Target::Close(eps) => {
            if !eps.is_positive() {
                return None;
            }
            let end = if toward_zero { Rational::zero() } else { Rational::one() };
            let mut near = a.clone();
            let mut far = end;
            for _ in 0..BISECTION_STEPS {
                let mid = (&near + &far) / &two;
                if p.dtv(&mid) <= *eps { near = mid } else { far = mid }
            }
            (near != a).then_some(near)
        }
    }
}

/// Perturbs one variable so that the pair meets `target`, trying variables
/// and directions in random order. Fails with [`BenchError::Infeasible`]
/// when no single-variable perturbation can reach the target.
pub fn make_pair_with_target<R: Rng + ?Sized>(
    circuit: &Circuit,
    w1: &WeightFn,
    target: &Target,
    rng: &mut R,
) -> Result<PerturbedPair, BenchError> {
    let pc = satisfiable(circuit, w1)?;
    let mut order: Vec<usize> = (0..w1.n_vars()).collect();
    order.shuffle(rng);
    for i in order {
        let var = VarId::from_index(i);
        let p = Perturbation::new(&pc, var);
        if p.limit(true).is_zero() || p.limit(false).is_zero() {
            continue; // `var` is fixed by the circuit; perturbing it changes nothing
        }
        let first = rng.random::<bool>();
        for toward_zero in [first, !first] {
            if let Some(b) = search(&p, target, toward_zero) {
                let pair = perturb_one_var(circuit, w1, var, b)?;
                debug_assert!(target.is_met(&pair.dtv_closed_form));
                return Ok(pair);
            }
        }
    }
    Err(BenchError::Infeasible(format!("no single-variable perturbation reaches {target:?}")))
}

/// One generated pair as listed in a manifest. Paths are relative to the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub cnf: String,
    pub nnf: String,
    pub w1: String,
    pub w2: String,
    pub n_vars: usize,
    pub clauses: usize,
    pub var: u32,
    /// `"close"` or `"far"`.
    pub target: String,
    pub target_value: String,
    /// Exact closed-form distance as `a/b`.
    pub dtv: String,
    pub dtv_approx: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub precision: u32,
    pub clause_ratio: String,
    pub pairs: Vec<ManifestEntry>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Assignment;
    use crate::oracle::{enumerate_models, tv_exact};
    use crate::rational::ratio;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn cnf_models(cnf: &Cnf) -> Vec<Assignment> {
        (0..1u64 << cnf.n_vars).map(|k| Assignment::from_index(cnf.n_vars, k)).filter(|s| cnf.evaluate(s)).collect()
    }

    fn valid(n: usize) -> Circuit {
        compile_decision_dnnf(&Cnf::new(n, vec![])).unwrap()
    }

    #[test]
    fn random_3cnf_shape() {
        let cnf = random_3cnf(3, 1, &mut rng(0)).unwrap();
        assert_eq!(cnf.clauses.len(), 1);
        let vars: Vec<u32> = cnf.clauses[0].iter().map(|l| l.unsigned_abs()).collect();
        assert_eq!(vars, vec![1, 2, 3]);
        let a = random_3cnf(10, 40, &mut rng(5)).unwrap();
        assert_eq!(a, random_3cnf(10, 40, &mut rng(5)).unwrap());
        let distinct: BTreeSet<_> = a.clauses.iter().collect();
        assert_eq!(distinct.len(), 40);
        assert!(random_3cnf(2, 1, &mut rng(0)).is_err());
        assert!(random_3cnf(3, 9, &mut rng(0)).is_err());
    }

    #[test]
    fn compile_trivial_cases() {
        let c = valid(2);
        assert_eq!(enumerate_models(&c).unwrap().len(), 4);
        let c = compile_decision_dnnf(&Cnf::new(1, vec![vec![1], vec![-1]])).unwrap();
        assert!(c.is_false());
        assert!(compile_decision_dnnf(&Cnf::new(25, vec![])).is_err());
        assert!(compile_decision_dnnf(&Cnf::new(2, vec![vec![3]])).is_err());
    }

    #[test]
    fn compile_matches_cnf_models() {
        let mut r = rng(11);
        for n in [4usize, 6, 9, 12] {
            let cnf = random_3cnf(n, default_clause_count(n), &mut r).unwrap();
            let c = compile_decision_dnnf(&cnf).unwrap();
            assert!(c.is_decomposable());
            assert!(c.is_decision_form());
            assert_eq!(enumerate_models(&c).unwrap(), cnf_models(&cnf));
        }
    }

    #[test]
    fn random_weights_range() {
        let w = random_weights(5, &mut rng(1), 1).unwrap();
        assert!(w.weights().iter().all(|x| *x == ratio(1, 2)));
        let w = random_weights(50, &mut rng(1), 4).unwrap();
        assert!(w.weights().iter().all(|x| x.is_positive() && *x < Rational::one()));
        assert_eq!(w, random_weights(50, &mut rng(1), 4).unwrap());
        assert!(random_weights(3, &mut rng(1), 0).is_err());
    }

    #[test]
    fn perturbation_on_valid_circuit() {
        let c = valid(2);
        let w1 = WeightFn::uniform(2);
        let pair = perturb_one_var(&c, &w1, VarId::from_index(0), ratio(1, 4)).unwrap();
        assert_eq!(pair.dtv_closed_form, ratio(1, 4));
        assert_eq!(tv_exact(&c, &pair.w1, &c, &pair.w2).unwrap(), ratio(1, 4));
        assert!(perturb_one_var(&c, &w1, VarId::from_index(0), ratio(1, 2)).is_err());
        assert!(perturb_one_var(&c, &w1, VarId::from_index(0), int(1)).is_err());
    }

    #[test]
    fn closed_form_matches_oracle() {
        let mut r = rng(3);
        for n in [4usize, 7, 10] {
            let (_, c) = satisfiable_instance(n, default_clause_count(n), 100, &mut r).unwrap();
            let w1 = random_weights(n, &mut r, 6).unwrap();
            let var = VarId::from_index(r.random_range(0..n));
            let b = loop {
                let b = Rational::new(BigInt::from(r.random_range(1..64u64)), BigInt::from(64));
                if &b != w1.get(var) {
                    break b;
                }
            };
            let pair = perturb_one_var(&c, &w1, var, b).unwrap();
            assert_eq!(pair.dtv_closed_form, tv_exact(&c, &pair.w1, &c, &pair.w2).unwrap());
        }
    }

    #[test]
    fn targets_are_met() {
        let mut r = rng(9);
        let c = valid(3);
        let w1 = WeightFn::uniform(3);
        let close = make_pair_with_target(&c, &w1, &Target::Close(ratio(1, 100)), &mut r).unwrap();
        assert!(close.dtv_closed_form <= ratio(1, 100) && close.dtv_closed_form.is_positive());
        let far = make_pair_with_target(&c, &w1, &Target::Far(ratio(1, 5)), &mut r).unwrap();
        assert!(far.dtv_closed_form >= ratio(1, 5));
        assert_eq!(far.dtv_closed_form, tv_exact(&c, &far.w1, &c, &far.w2).unwrap());
        // With uniform weights a single variable moves at most 1/2 of the mass.
        let err = make_pair_with_target(&c, &w1, &Target::Far(ratio(1, 2)), &mut r).unwrap_err();
        assert!(matches!(err, BenchError::Infeasible(_)));
        assert!(make_pair_with_target(&c, &w1, &Target::Close(Rational::zero()), &mut r).is_err());
    }
}
