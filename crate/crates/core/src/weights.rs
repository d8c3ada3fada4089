//! Literal-weighted functions and the weighted-to-unweighted reduction.
//!
//! A [`WeightFn`] assigns each variable `x` a weight `w(x)` in the open
//! interval (0, 1); the negative literal gets `1 - w(x)` and an assignment's
//! weight is the product over its literals.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::circuit::{Assignment, Circuit, CircuitBuilder, CircuitError, Node, NodeId, VarId};
use crate::rational::{pow2_inv, Rational};

/// Default bit precision for [`dyadic_approx`].
pub const DEFAULT_DYADIC_PRECISION: u32 = 16;

/// Largest supported dyadic precision.
pub const MAX_DYADIC_PRECISION: u32 = 62;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WeightError {
    #[error("weight of x{var} is {value}, outside the open interval (0, 1)")]
    OutOfRange { var: u32, value: Rational },
    #[error("expected {expected} variables, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("dyadic numerator {d} outside 1..2^{precision}")]
    DyadicRange { d: u64, precision: u32 },
    #[error("dyadic precision {0} outside 1..=62")]
    Precision(u32),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Positive-literal weights `w(x_i)`, one per variable, each in (0, 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightFn {
    weights: Vec<Rational>,
}

impl WeightFn {
    pub fn new(weights: Vec<Rational>) -> Result<Self, WeightError> {
        for (i, w) in weights.iter().enumerate() {
            check_open_unit(i, w)?;
        }
        Ok(WeightFn { weights })
    }

    /// Every weight 1/2: the uniform distribution over models.
    pub fn uniform(n: usize) -> Self {
        WeightFn { weights: vec![Rational::new(BigInt::one(), BigInt::from(2)); n] }
    }

    pub fn n_vars(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    pub fn get(&self, var: VarId) -> &Rational {
        &self.weights[var.index()]
    }

    /// Weight of the literal `var` (positive) or `¬var`.
    pub fn literal(&self, var: VarId, positive: bool) -> Rational {
        let w = self.get(var);
        if positive {
            w.clone()
        } else {
            Rational::one() - w
        }
    }

    /// Copy with one weight replaced.
    pub fn with_weight(&self, var: VarId, weight: Rational) -> Result<Self, WeightError> {
        check_open_unit(var.index(), &weight)?;
        let mut weights = self.weights.clone();
        weights[var.index()] = weight;
        Ok(WeightFn { weights })
    }

    /// `w(σ) = ∏ w(x)^σ(x) (1 - w(x))^(1 - σ(x))`, exactly.
    pub fn weight_of(&self, sigma: &Assignment) -> Result<Rational, WeightError> {
        if sigma.len() != self.weights.len() {
            return Err(WeightError::LengthMismatch { expected: self.weights.len(), got: sigma.len() });
        }
        // Multiply numerators and denominators separately and reduce once.
        let mut num = BigInt::one();
        let mut den = BigInt::one();
        for (w, &bit) in self.weights.iter().zip(sigma.bits()) {
            if bit {
                num *= w.numer();
            } else {
                num *= w.denom() - w.numer();
            }
            den *= w.denom();
        }
        Ok(Rational::new(num, den))
    }
}

fn check_open_unit(index: usize, w: &Rational) -> Result<(), WeightError> {
    if w.is_positive() && w < &Rational::one() {
        Ok(())
    } else {
        Err(WeightError::OutOfRange { var: index as u32 + 1, value: w.clone() })
    }
}

/// Weights of the form `d_i / 2^p` with a shared precision `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DyadicWeightFn {
    numerators: Vec<u64>,
    precision: u32,
}

impl DyadicWeightFn {
    pub fn new(numerators: Vec<u64>, precision: u32) -> Result<Self, WeightError> {
        if precision == 0 || precision > MAX_DYADIC_PRECISION {
            return Err(WeightError::Precision(precision));
        }
        let full = 1u64 << precision;
        if let Some(&d) = numerators.iter().find(|&&d| d == 0 || d >= full) {
            return Err(WeightError::DyadicRange { d, precision });
        }
        Ok(DyadicWeightFn { numerators, precision })
    }

    pub fn numerators(&self) -> &[u64] {
        &self.numerators
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn n_vars(&self) -> usize {
        self.numerators.len()
    }

    pub fn to_weight_fn(&self) -> WeightFn {
        let scale = pow2_inv(self.precision);
        WeightFn {
            weights: self.numerators.iter().map(|&d| Rational::from_integer(d.into()) * &scale).collect(),
        }
    }
}

/// Result of rounding a [`WeightFn`] to a dyadic grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DyadicApprox {
    pub weights: DyadicWeightFn,
    /// Largest `|w - w'| / w` over both literal weights of every variable.
    pub max_relative_error: Rational,
}

/// Rounds each weight to the nearest `d / 2^p` (ties up), clamped to
/// `[1/2^p, 1 - 1/2^p]`.
pub fn dyadic_approx(w: &WeightFn, precision: u32) -> Result<DyadicApprox, WeightError> {
    if precision == 0 || precision > MAX_DYADIC_PRECISION {
        return Err(WeightError::Precision(precision));
    }
    let full = 1u64 << precision;
    let scale = Rational::from_integer(BigInt::from(full));
    let half = Rational::new(BigInt::one(), BigInt::from(2));
    let mut numerators = Vec::with_capacity(w.n_vars());
    let mut max_err = Rational::zero();
    for weight in w.weights() {
        let nearest = (weight * &scale + &half).floor().to_integer();
        let d: u64 = nearest.try_into().unwrap_or(full - 1).clamp(1, full - 1);
        let approx = Rational::new(BigInt::from(d), BigInt::from(full));
        let pos_err = (weight - &approx).abs() / weight;
        let neg_err = (weight - &approx).abs() / (Rational::one() - weight);
        max_err = max_err.max(pos_err).max(neg_err);
        numerators.push(d);
    }
    Ok(DyadicApprox { weights: DyadicWeightFn::new(numerators, precision)?, max_relative_error: max_err })
}

/// Adds to `b` a formula over variables `first..first+p` with exactly `d`
/// models (among the `2^p` assignments to those variables). Variables
/// below the lowest set bit of `d` are left unconstrained.
///
/// A 1-bit `y` contributes `y ∨ rest`, written as the decision node
/// `y ∨ (¬y ∧ rest)` so the formula stays deterministic; a 0-bit
/// contributes `y ∧ rest`.
///
/// Reading the variables as a binary number with `first` as the most
/// significant bit, the models are exactly those whose bitwise complement
/// is less than `d`.
pub fn chain_into(
    b: &mut CircuitBuilder,
    d: u64,
    p: u32,
    first: VarId,
) -> Result<NodeId, WeightError> {
    if p == 0 || p > MAX_DYADIC_PRECISION {
        return Err(WeightError::Precision(p));
    }
    if d == 0 || d >= 1u64 << p {
        return Err(WeightError::DyadicRange { d, precision: p });
    }
    let bit = |i: u32| (d >> (p - 1 - i)) & 1 == 1; // i = 0 is the MSB
    let var = |i: u32| VarId::from_index(first.index() + i as usize);
    let last = (0..p).rev().find(|&i| bit(i)).expect("d > 0");
    let mut node = b.literal(var(last), true)?;
    for i in (0..last).rev() {
        node = if bit(i) {
            let t = b.constant(true);
            b.decision(var(i), t, node)?
        } else {
            let y = b.literal(var(i), true)?;
            b.and(vec![y, node])?
        };
    }
    Ok(node)
}

/// Standalone chain formula over `p` variables with exactly `d` models.
pub fn chain_formula(d: u64, p: u32) -> Result<Circuit, WeightError> {
    let mut b = CircuitBuilder::new(p as usize);
    let root = chain_into(&mut b, d, p, VarId::from_index(0))?;
    Ok(b.build(root)?)
}

/// Reduces weighted sampling/counting over `circuit` to the unweighted case.
///
/// The output is over `n + n·p` variables; variable `x_i` owns the block
/// `n + (i-1)p + 1 ..= n + ip`. Every positive leaf `x_i` of the smoothed
/// input is replaced by `x_i ∧ C¹_i` and every negative leaf by
/// `¬x_i ∧ C⁰_i`, where `C¹_i` has `d_i` models and `C⁰_i` has `2^p - d_i`
/// models over the same block. Each model `σ` of the input therefore
/// extends to exactly `2^(np) · w(σ)` models, so the uniform distribution on
/// the output projects to `P(φ, w)`. Decomposability is preserved.
pub fn weighted_to_unweighted(circuit: &Circuit, w: &DyadicWeightFn) -> Result<Circuit, WeightError> {
    let n = circuit.n_vars();
    if w.n_vars() != n {
        return Err(WeightError::LengthMismatch { expected: n, got: w.n_vars() });
    }
    let p = w.precision();
    let smooth = circuit.smooth()?;
    let mut b = CircuitBuilder::new(n + n * p as usize);
    let block = |i: usize| VarId::from_index(n + i * p as usize);
    let mut pos_chain: Vec<Option<NodeId>> = vec![None; n];
    let mut neg_chain: Vec<Option<NodeId>> = vec![None; n];
    let mut map: Vec<NodeId> = Vec::with_capacity(smooth.node_count());
    for node in smooth.nodes() {
        let id = match node {
            Node::True => b.constant(true),
            Node::False => b.constant(false),
            Node::PosLit(x) | Node::NegLit(x) => {
                let positive = matches!(node, Node::PosLit(_));
                let i = x.index();
                let d = w.numerators()[i];
                let slot = if positive { &mut pos_chain[i] } else { &mut neg_chain[i] };
                let chain = match *slot {
                    Some(c) => c,
                    None => {
                        let count = if positive { d } else { (1u64 << p) - d };
                        let c = chain_into(&mut b, count, p, block(i))?;
                        *slot = Some(c);
                        c
                    }
                };
                let lit = b.literal(*x, positive)?;
                b.and(vec![lit, chain])?
            }
            Node::And(cs) => b.and(cs.iter().map(|c| map[c.index()]).collect())?,
            Node::Or { children, decision } => {
                b.or(children.iter().map(|c| map[c.index()]).collect(), *decision)?
            }
        };
        map.push(id);
    }
    let root = map[smooth.root().index()];
    Ok(b.build(root)?)
}
