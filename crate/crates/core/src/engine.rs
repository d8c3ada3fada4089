//! Exact weighted model counting, exact weighted sampling and
//! network-polynomial evaluation over smooth d-DNNF circuits, plus the
//! approximate counting/sampling oracle contracts used by the testers.
//!
//! All three queries are single bottom-up (or top-down) passes over a
//! [`WeightedCircuit`], which holds the smoothed circuit together with one
//! weighted model count per node. The annotation is computed once per
//! (circuit, weights) pair and reused by every query.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use thiserror::Error;

use crate::circuit::{Assignment, Circuit, CircuitError, Determinism, Node, NodeId, VarId, SEMANTIC_LIMIT};
use crate::rational::{int, Rational};
use crate::weights::WeightFn;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("circuit has {circuit} variables but the weight function has {weights}")]
    VarMismatch { circuit: usize, weights: usize },
    #[error("circuit is not decomposable")]
    NotDecomposable,
    #[error("circuit determinism could not be established ({0:?})")]
    NotDeterministic(Determinism),
    #[error("circuit is unsatisfiable")]
    Unsatisfiable,
    #[error("expected a point with {expected} coordinates, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid oracle parameters: {0}")]
    InvalidParams(String),
    #[error("coordinate {value} outside 1..={m}")]
    OutOfRange { value: u64, m: u64 },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Child selection thresholds of one Or node: child `j` is chosen for the
/// first `j` with `k < threshold[j]`, `k` uniform in `0..2^128`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Threshold {
    Below(u128),
    Always,
}

/// A smooth, decomposable, deterministic circuit paired with a weight
/// function and its per-node weighted model counts.
#[derive(Debug, Clone)]
pub struct WeightedCircuit {
    circuit: Circuit,
    weights: WeightFn,
    node_wmc: Vec<Rational>,
    thresholds: Vec<Vec<Threshold>>,
    determinism: Determinism,
}

impl WeightedCircuit {
    /// Validates decomposability and determinism (decision form, or
    /// enumeration when `n <= SEMANTIC_LIMIT`), smooths if needed, and
    /// annotates every node.
    pub fn new(circuit: &Circuit, weights: &WeightFn) -> Result<Self, EngineError> {
        Self::with_semantic_limit(circuit, weights, SEMANTIC_LIMIT)
    }

    pub fn with_semantic_limit(
        circuit: &Circuit,
        weights: &WeightFn,
        semantic_limit: usize,
    ) -> Result<Self, EngineError> {
        if circuit.n_vars() != weights.n_vars() {
            return Err(EngineError::VarMismatch { circuit: circuit.n_vars(), weights: weights.n_vars() });
        }
        if !circuit.is_decomposable() {
            return Err(EngineError::NotDecomposable);
        }
        let determinism = circuit.determinism(semantic_limit);
        if !determinism.holds() {
            return Err(EngineError::NotDeterministic(determinism));
        }
        let circuit = if circuit.is_smooth() { circuit.clone() } else { circuit.smooth()? };
        let node_wmc = node_values(&circuit, |v, pos| weights.literal(v, pos));
        let thresholds = circuit
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, node)| match node {
                Node::Or { children, .. } => or_thresholds(children, &node_wmc, &node_wmc[i]),
                _ => Vec::new(),
            })
            .collect();
        Ok(WeightedCircuit { circuit, weights: weights.clone(), node_wmc, thresholds, determinism })
    }

    /// The smoothed circuit the annotations refer to.
    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn weights(&self) -> &WeightFn {
        &self.weights
    }

    pub fn n_vars(&self) -> usize {
        self.circuit.n_vars()
    }

    pub fn determinism(&self) -> Determinism {
        self.determinism
    }

    /// `w(φ)`.
    pub fn wmc(&self) -> &Rational {
        &self.node_wmc[self.circuit.root().index()]
    }

    pub fn node_wmc(&self, id: NodeId) -> &Rational {
        &self.node_wmc[id.index()]
    }

    pub fn is_satisfiable(&self) -> bool {
        self.wmc().is_positive()
    }

    /// Weighted count with arbitrary literal values, e.g. a weight of 1 on
    /// one literal and 0 on its negation to condition on it.
    pub fn wmc_with(&self, leaf: impl Fn(VarId, bool) -> Rational) -> Rational {
        node_values(&self.circuit, leaf).swap_remove(self.circuit.root().index())
    }

    /// `P(φ, w)(σ) = w(σ) / w(φ)` when `φ(σ) = 1`, else 0.
    pub fn probability(&self, sigma: &Assignment) -> Result<Rational, EngineError> {
        if !self.is_satisfiable() {
            return Err(EngineError::Unsatisfiable);
        }
        if !self.circuit.evaluate(sigma)? {
            return Ok(Rational::zero());
        }
        let w = self.weights.weight_of(sigma).map_err(|_| EngineError::LengthMismatch {
            expected: self.n_vars(),
            got: sigma.len(),
        })?;
        Ok(w / self.wmc())
    }

    /// Draws `σ` with probability `w(σ) / w(φ)`.
    ///
    /// Or nodes pick child `c` with probability `wmc(c) / wmc(node)` by
    /// comparing a uniform 128-bit integer against precomputed exact
    /// cumulative thresholds; And nodes descend into every child.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Assignment, EngineError> {
        if !self.is_satisfiable() {
            return Err(EngineError::Unsatisfiable);
        }
        let mut bits = vec![false; self.n_vars()];
        let mut stack = vec![self.circuit.root()];
        while let Some(id) = stack.pop() {
            match self.circuit.node(id) {
                Node::PosLit(v) => bits[v.index()] = true,
                Node::NegLit(v) => bits[v.index()] = false,
                Node::And(cs) => stack.extend_from_slice(cs),
                Node::Or { children, .. } => {
                    let k: u128 = rng.random();
                    let pick = self.thresholds[id.index()]
                        .iter()
                        .position(|t| match *t {
                            Threshold::Below(limit) => k < limit,
                            Threshold::Always => true,
                        })
                        .expect("last threshold always accepts");
                    stack.push(children[pick]);
                }
                Node::True | Node::False => {}
            }
        }
        Ok(Assignment::new(bits))
    }

    /// Probability that the top-down pass emits `σ`, computed with exact
    /// branch ratios along `σ`'s unique path through the circuit.
    pub fn path_probability(&self, sigma: &Assignment) -> Result<Rational, EngineError> {
        if !self.is_satisfiable() {
            return Err(EngineError::Unsatisfiable);
        }
        if sigma.len() != self.n_vars() {
            return Err(EngineError::LengthMismatch { expected: self.n_vars(), got: sigma.len() });
        }
        let mut truth = Vec::with_capacity(self.circuit.node_count());
        for node in self.circuit.nodes() {
            truth.push(match node {
                Node::True => true,
                Node::False => false,
                Node::PosLit(v) => sigma.value(*v),
                Node::NegLit(v) => !sigma.value(*v),
                Node::And(cs) => cs.iter().all(|c| truth[c.index()]),
                Node::Or { children, .. } => children.iter().any(|c| truth[c.index()]),
            });
        }
        if !truth[self.circuit.root().index()] {
            return Ok(Rational::zero());
        }
        let mut p = Rational::one();
        let mut stack = vec![self.circuit.root()];
        while let Some(id) = stack.pop() {
            match self.circuit.node(id) {
                Node::And(cs) => stack.extend_from_slice(cs),
                Node::Or { children, .. } => {
                    let c = *children.iter().find(|c| truth[c.index()]).expect("node is true");
                    p *= &self.node_wmc[c.index()] / &self.node_wmc[id.index()];
                    stack.push(c);
                }
                _ => {}
            }
        }
        Ok(p)
    }

    /// `π(φ, w)(θ)` at an arbitrary rational point: the bottom-up recursion
    /// with leaf values `w(x)θ(x)` and `(1 - w(x))(1 - θ(x))`, divided by
    /// `w(φ)`. At 0/1 points this is the probability of that assignment.
    pub fn netpoly_at(&self, point: &[Rational]) -> Result<Rational, EngineError> {
        if point.len() != self.n_vars() {
            return Err(EngineError::LengthMismatch { expected: self.n_vars(), got: point.len() });
        }
        if !self.is_satisfiable() {
            return Err(EngineError::Unsatisfiable);
        }
        let one = Rational::one();
        let s = self.wmc_with(|v, positive| {
            let theta = &point[v.index()];
            if positive {
                self.weights.get(v) * theta
            } else {
                (&one - self.weights.get(v)) * (&one - theta)
            }
        });
        Ok(s / self.wmc())
    }

    pub fn netpoly_eval(&self, theta: &IntAssignment) -> Result<Rational, EngineError> {
        let point: Vec<Rational> = theta.values().iter().map(|&t| Rational::from_integer(t.into())).collect();
        self.netpoly_at(&point)
    }
}

fn or_thresholds(children: &[NodeId], wmc: &[Rational], total: &Rational) -> Vec<Threshold> {
    if total.is_zero() {
        return vec![Threshold::Always; children.len()];
    }
    let scale = Rational::from_integer(BigInt::one() << 128);
    let full = BigInt::one() << 128;
    let mut cumulative = Rational::zero();
    children
        .iter()
        .map(|c| {
            cumulative += &wmc[c.index()];
            // k / 2^128 < cum / total  <=>  k < ceil(cum * 2^128 / total)
            let t = (&cumulative * &scale / total).ceil().to_integer();
            if t >= full {
                Threshold::Always
            } else {
                Threshold::Below(u128::try_from(t).expect("below 2^128"))
            }
        })
        .collect()
}

/// Bottom-up sum/product pass with the given literal values.
fn node_values(circuit: &Circuit, leaf: impl Fn(VarId, bool) -> Rational) -> Vec<Rational> {
    let n = circuit.n_vars();
    let mut pos: Vec<Option<Rational>> = vec![None; n];
    let mut neg: Vec<Option<Rational>> = vec![None; n];
    let mut val: Vec<Rational> = Vec::with_capacity(circuit.node_count());
    for node in circuit.nodes() {
        let v = match node {
            Node::True => Rational::one(),
            Node::False => Rational::zero(),
            Node::PosLit(x) => pos[x.index()].get_or_insert_with(|| leaf(*x, true)).clone(),
            Node::NegLit(x) => neg[x.index()].get_or_insert_with(|| leaf(*x, false)).clone(),
            Node::And(cs) => {
                let mut acc = Rational::one();
                for c in cs {
                    acc *= &val[c.index()];
                }
                acc
            }
            Node::Or { children, .. } => {
                let mut acc = Rational::zero();
                for c in children {
                    acc += &val[c.index()];
                }
                acc
            }
        };
        val.push(v);
    }
    val
}

/// `w(φ) = Σ_{σ ⊨ φ} w(σ)` for a decomposable, deterministic circuit
/// (smoothed internally when needed).
pub fn wmc_exact(circuit: &Circuit, weights: &WeightFn) -> Result<Rational, EngineError> {
    Ok(WeightedCircuit::new(circuit, weights)?.wmc().clone())
}

/// A point `θ ∈ [m]^n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntAssignment {
    values: Vec<u64>,
    m: u64,
}

impl IntAssignment {
    pub fn new(values: Vec<u64>, m: u64) -> Result<Self, EngineError> {
        if let Some(&value) = values.iter().find(|&&v| v == 0 || v > m) {
            return Err(EngineError::OutOfRange { value, m });
        }
        Ok(IntAssignment { values, m })
    }

    /// Uniform draw from `[m]^n`.
    pub fn random<R: Rng + ?Sized>(n: usize, m: u64, rng: &mut R) -> Self {
        assert!(m >= 1);
        IntAssignment { values: (0..n).map(|_| rng.random_range(1..=m)).collect(), m }
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn m(&self) -> u64 {
        self.m
    }
}

/// Tolerance `α` and failure probability `β` of an approximate oracle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleParams {
    pub alpha: Rational,
    pub beta: Rational,
}

impl OracleParams {
    /// `α >= 0` and `0 <= β < 1`. The zero cases describe an exact oracle.
    pub fn new(alpha: Rational, beta: Rational) -> Result<Self, EngineError> {
        if alpha.is_negative() {
            return Err(EngineError::InvalidParams(format!("alpha = {alpha} < 0")));
        }
        if beta.is_negative() || beta >= Rational::one() {
            return Err(EngineError::InvalidParams(format!("beta = {beta} outside [0, 1)")));
        }
        Ok(OracleParams { alpha, beta })
    }
}

/// How the approximate oracles behave.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OracleMode {
    /// Exact answers; conforms to every `(α, β)`.
    #[default]
    Exact,
    /// Answers distorted up to the contract's tolerance, failing with
    /// probability exactly `β`. `key` fixes the sampler's perturbed pmf.
    Noisy { key: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SampleOutcome {
    Sample(Assignment),
    Bottom,
}

/// Uniform rational `k / 2^64`.
fn unit<R: Rng + ?Sized>(rng: &mut R) -> Rational {
    Rational::new(BigInt::from(rng.random::<u64>()), BigInt::one() << 64)
}

fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: &Rational) -> bool {
    p.is_positive() && unit(rng) < *p
}

/// Approximate weighted count: with probability at least `1 - β` the result
/// lies in `[w(φ)/(1+α), (1+α)w(φ)]`.
///
/// In noisy mode the count is scaled by a uniform factor from that interval,
/// and with probability `β` by `(1+α)^±2` (or `2^±1` when `α = 0`) instead.
pub fn awct<R: Rng + ?Sized>(
    pc: &WeightedCircuit,
    params: &OracleParams,
    mode: OracleMode,
    rng: &mut R,
) -> Rational {
    let exact = pc.wmc().clone();
    let OracleMode::Noisy { .. } = mode else {
        return exact;
    };
    let one = Rational::one();
    let hi = &one + &params.alpha;
    if bernoulli(rng, &params.beta) {
        let out = if params.alpha.is_zero() { int(2) } else { &hi * &hi };
        return if rng.random::<bool>() { exact * out } else { exact / out };
    }
    if params.alpha.is_zero() {
        return exact;
    }
    let lo = &one / &hi;
    let factor = &lo + unit(rng) * (&hi - &lo);
    exact * factor
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn keyed_bit(key: u64, sigma: &Assignment) -> bool {
    let mut h = splitmix(key);
    for chunk in sigma.bits().chunks(64) {
        let word = chunk.iter().enumerate().fold(0u64, |acc, (i, &b)| acc | (b as u64) << i);
        h = splitmix(h ^ word);
    }
    h & 1 == 1
}

/// Approximate weighted sampler: returns `⊥` with probability at most `β`,
/// otherwise a model drawn from a distribution whose pointwise ratio to
/// `P(φ, w)` lies in `[1/(1+α), 1+α]`.
///
/// The noisy mode draws from `P(φ, w)` and keeps the draw outright when a
/// keyed hash bit of `σ` is set, otherwise with probability `1/(1+α)`
/// (resampling on rejection). The resulting pmf is `P(σ)a(σ)/Z` with
/// `a(σ) ∈ {1/(1+α), 1}`, which stays within the contract's ratio bound.
pub fn samp<R: Rng + ?Sized>(
    pc: &WeightedCircuit,
    params: &OracleParams,
    mode: OracleMode,
    rng: &mut R,
) -> Result<SampleOutcome, EngineError> {
    let OracleMode::Noisy { key } = mode else {
        return Ok(SampleOutcome::Sample(pc.sample(rng)?));
    };
    if bernoulli(rng, &params.beta) {
        return Ok(SampleOutcome::Bottom);
    }
    if params.alpha.is_zero() {
        return Ok(SampleOutcome::Sample(pc.sample(rng)?));
    }
    let keep = Rational::one() / (Rational::one() + &params.alpha);
    loop {
        let sigma = pc.sample(rng)?;
        if keyed_bit(key, &sigma) || bernoulli(rng, &keep) {
            return Ok(SampleOutcome::Sample(sigma));
        }
    }
}

/// Acceptance factor `a(σ)` of the noisy sampler, exposed for tests.
pub fn noisy_keep_factor(key: u64, alpha: &Rational, sigma: &Assignment) -> Rational {
    if keyed_bit(key, sigma) {
        Rational::one()
    } else {
        Rational::one() / (Rational::one() + alpha)
    }
}
