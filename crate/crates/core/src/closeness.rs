//! Closeness (`teq`) and equivalence (`peq`) testing of two probabilistic
//! circuits over the same variables.
//!
//! `teq` decides whether `d_TV(P(φ1, w1), P(φ2, w2))` is at most `ε` or at
//! least `η`, each with confidence `1 - δ`, from `m` samples of the first
//! circuit and one approximate count of each. `peq` decides exact
//! equivalence by comparing the two network polynomials at a random integer
//! point.
//!
//! Every random draw comes from a ChaCha8 stream selected by index from a
//! single seed (count oracles use the two highest stream ids, sample `i`
//! uses stream `i`), so results do not depend on how iterations are spread
//! over threads.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::circuit::Assignment;
use crate::engine::{self, EngineError, IntAssignment, OracleMode, OracleParams, SampleOutcome, WeightedCircuit};
use crate::exec::{self, Execution};
use crate::rational::{ceil_div, ceil_scaled_ln, int, sqrt_lower, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TestError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("circuits have {0} and {1} variables")]
    VarMismatch(usize, usize),
    #[error("circuit {0} is unsatisfiable")]
    Unsatisfiable(u8),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Which sample-count formula `teq` uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSizeMode {
    /// `m = ⌈2 ln(4/δ) / γ²⌉`.
    Conservative,
    /// `m = ⌈ln(2/δ) / (2γ²)⌉`; yields 294 for (0.01, 0.2, 0.01).
    #[default]
    Experiment,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TeqParams {
    pub eps: Rational,
    pub eta: Rational,
    pub delta: Rational,
    pub mode: SampleSizeMode,
}

impl TeqParams {
    /// Requires `0 <= ε < η <= 1` and `0 < δ < 1`.
    pub fn new(eps: Rational, eta: Rational, delta: Rational, mode: SampleSizeMode) -> Result<Self, TestError> {
        if eps.is_negative() || eps >= eta || eta > Rational::one() {
            return Err(TestError::InvalidParams(format!("need 0 <= eps < eta <= 1, got eps={eps}, eta={eta}")));
        }
        if !delta.is_positive() || delta >= Rational::one() {
            return Err(TestError::InvalidParams(format!("need 0 < delta < 1, got {delta}")));
        }
        Ok(TeqParams { eps, eta, delta, mode })
    }

    /// `γ = (η - ε) / 2`.
    pub fn gamma(&self) -> Rational {
        (&self.eta - &self.eps) / int(2)
    }

    /// Acceptance threshold `m(ε + γ)`.
    pub fn threshold(&self, m: u64) -> Rational {
        int(m as i64) * (&self.eps + self.gamma())
    }
}

/// Number of samples `teq` draws. The logarithm is natural and evaluated
/// with a certified enclosure, so the ceiling is exact.
pub fn sample_size(params: &TeqParams) -> u64 {
    let gamma = params.gamma();
    let g2 = &gamma * &gamma;
    let (scale, arg) = match params.mode {
        SampleSizeMode::Conservative => (int(2) / g2, int(4) / &params.delta),
        SampleSizeMode::Experiment => (Rational::one() / (int(2) * g2), int(2) / &params.delta),
    };
    ceil_scaled_ln(&scale, &arg).to_u64().expect("sample size fits in u64")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Decision {
    Accept,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub decision: Decision,
    /// `Σ Γ[i]`.
    pub statistic: Rational,
    /// `m(ε + γ)`; Accept iff `statistic <= threshold`.
    pub threshold: Rational,
    pub m: u64,
    /// Iterations whose sampler returned `⊥`.
    pub skipped: u64,
}

/// Values computed in one loop iteration of `teq`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Draw {
    pub sample: Assignment,
    /// `w1(σ)` (0 if `σ` is not a model of the first circuit).
    pub s1: Rational,
    /// `w2(σ)` (0 if `σ` is not a model of the second circuit).
    pub s2: Rational,
    /// `r(σ) = (s2/k2)·(k1/s1)`.
    pub ratio: Rational,
    /// `1 - r(σ)` when `r(σ) < 1`, else 0.
    pub gamma: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TeqTrace {
    pub k1: Rational,
    pub k2: Rational,
    /// `None` marks a `⊥` iteration.
    pub iterations: Vec<Option<Draw>>,
}

impl TeqTrace {
    pub fn statistic(&self) -> Rational {
        self.iterations.iter().flatten().map(|d| &d.gamma).sum()
    }

    pub fn skipped(&self) -> u64 {
        self.iterations.iter().filter(|d| d.is_none()).count() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TeqOutcome {
    pub verdict: Verdict,
    pub trace: TeqTrace,
}

/// Oracle behaviour, execution strategy and seed for one test run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunConfig {
    pub oracle: OracleMode,
    pub execution: Execution,
    pub seed: u64,
}

impl RunConfig {
    pub fn seeded(seed: u64) -> Self {
        RunConfig { seed, ..Default::default() }
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn check_pair(pc1: &WeightedCircuit, pc2: &WeightedCircuit) -> Result<(), TestError> {
    if pc1.n_vars() != pc2.n_vars() {
        return Err(TestError::VarMismatch(pc1.n_vars(), pc2.n_vars()));
    }
    if !pc1.is_satisfiable() {
        return Err(TestError::Unsatisfiable(1));
    }
    if !pc2.is_satisfiable() {
        return Err(TestError::Unsatisfiable(2));
    }
    Ok(())
}

/// Weight of `σ` under `pc` if it is a model, else 0.
fn model_weight(pc: &WeightedCircuit, sigma: &Assignment) -> Result<Rational, TestError> {
    if pc.circuit().evaluate(sigma).map_err(EngineError::from)? {
        Ok(pc.weights().weight_of(sigma).expect("lengths checked"))
    } else {
        Ok(Rational::zero())
    }
}

/// Oracle parameters requested by `teq` for counting and sampling.
pub fn teq_oracle_params(params: &TeqParams, m: u64) -> (OracleParams, OracleParams) {
    let gamma = params.gamma();
    // Rational lower bound of sqrt(1 + γ/4) - 1 keeps noise inside the contract.
    let count_alpha = sqrt_lower(&(Rational::one() + &gamma / int(4)), 64) - Rational::one();
    let count = OracleParams { alpha: count_alpha, beta: &params.delta / int(8) };
    let samp_alpha = &gamma / (int(4) * &params.eta - int(2) * &gamma);
    let samp = OracleParams { alpha: samp_alpha, beta: &params.delta / int(4 * m as i64) };
    (count, samp)
}

/// Runs the closeness test, sampling only from `pc1`.
pub fn teq(
    pc1: &WeightedCircuit,
    pc2: &WeightedCircuit,
    params: &TeqParams,
    config: &RunConfig,
) -> Result<TeqOutcome, TestError> {
    check_pair(pc1, pc2)?;
    let m = sample_size(params);
    let (count_params, samp_params) = teq_oracle_params(params, m);
    let k1 = engine::awct(pc1, &count_params, config.oracle, &mut stream(config.seed, u64::MAX));
    let k2 = engine::awct(pc2, &count_params, config.oracle, &mut stream(config.seed, u64::MAX - 1));
    if !k1.is_positive() || !k2.is_positive() {
        return Err(TestError::InvalidParams("approximate count is not positive".into()));
    }
    let one = Rational::one();
    let iterations = exec::map(config.execution, m, |i| -> Result<Option<Draw>, TestError> {
        let mut rng = stream(config.seed, i);
        let SampleOutcome::Sample(sample) = engine::samp(pc1, &samp_params, config.oracle, &mut rng)? else {
            return Ok(None);
        };
        let s1 = model_weight(pc1, &sample)?;
        let s2 = model_weight(pc2, &sample)?;
        let ratio = if s1.is_zero() { Rational::zero() } else { (&s2 / &k2) * (&k1 / &s1) };
        let gamma = if ratio < one { &one - &ratio } else { Rational::zero() };
        Ok(Some(Draw { sample, s1, s2, ratio, gamma }))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let trace = TeqTrace { k1, k2, iterations };
    let statistic = trace.statistic();
    let threshold = params.threshold(m);
    let decision = if statistic <= threshold { Decision::Accept } else { Decision::Reject };
    let verdict = Verdict { decision, statistic, threshold, m, skipped: trace.skipped() };
    Ok(TeqOutcome { verdict, trace })
}

/// Diagnostic summary of a finished `teq` run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TvReport {
    /// `Σ Γ[i] / m`, a point estimate of the distance.
    pub estimate: Rational,
    pub gamma: Rational,
    pub threshold: Rational,
    pub m: u64,
    pub skipped: u64,
}

pub fn tv_bound_report(trace: &TeqTrace, params: &TeqParams) -> TvReport {
    let m = trace.iterations.len() as u64;
    let estimate = if m == 0 { Rational::zero() } else { trace.statistic() / int(m as i64) };
    TvReport { estimate, gamma: params.gamma(), threshold: params.threshold(m), m, skipped: trace.skipped() }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeqOutcome {
    pub decision: Decision,
    /// `⌈n/δ⌉`.
    pub m: u64,
    pub theta: IntAssignment,
    pub value1: Rational,
    pub value2: Rational,
}

/// Equivalence test: draws `θ` uniformly from `[m]^n` with `m = ⌈n/δ⌉` and
/// accepts iff both network polynomials agree exactly at `θ`.
pub fn peq(
    pc1: &WeightedCircuit,
    pc2: &WeightedCircuit,
    delta: &Rational,
    seed: u64,
) -> Result<PeqOutcome, TestError> {
    if !delta.is_positive() || delta >= &Rational::one() {
        return Err(TestError::InvalidParams(format!("need 0 < delta < 1, got {delta}")));
    }
    check_pair(pc1, pc2)?;
    let n = pc1.n_vars();
    let m = ceil_div(&Rational::from_integer(BigInt::from(n)), delta).to_u64().expect("m fits in u64").max(1);
    let theta = IntAssignment::random(n, m, &mut stream(seed, 0));
    let value1 = pc1.netpoly_eval(&theta)?;
    let value2 = pc2.netpoly_eval(&theta)?;
    let decision = if value1 == value2 { Decision::Accept } else { Decision::Reject };
    Ok(PeqOutcome { decision, m, theta, value1, value2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{Circuit, CircuitBuilder, VarId};
    use crate::rational::{parse_rational, ratio};
    use crate::weights::WeightFn;

    fn q(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    fn params(e: &str, n: &str, d: &str, mode: SampleSizeMode) -> TeqParams {
        TeqParams::new(q(e), q(n), q(d), mode).unwrap()
    }

    fn literal(positive: bool) -> Circuit {
        let mut b = CircuitBuilder::new(1);
        let p = b.literal(VarId::from_index(0), positive).unwrap();
        b.build(p).unwrap()
    }

    fn tautology() -> Circuit {
        let mut b = CircuitBuilder::new(1);
        let x = VarId::from_index(0);
        let p = b.literal(x, true).unwrap();
        let n = b.literal(x, false).unwrap();
        let o = b.or(vec![p, n], Some(x)).unwrap();
        b.build(o).unwrap()
    }

    #[test]
    fn reported_sample_size() {
        assert_eq!(sample_size(&params("0.01", "0.2", "0.01", SampleSizeMode::Experiment)), 294);
    }

    #[test]
    fn conservative_sample_sizes() {
        // 2 ln(400) / 0.095^2 = 1327.75...
        assert_eq!(sample_size(&params("0.01", "0.2", "0.01", SampleSizeMode::Conservative)), 1328);
        // 2 ln 8 / 0.16 = 25.99...
        assert_eq!(sample_size(&params("0.1", "0.9", "0.5", SampleSizeMode::Conservative)), 26);
    }

    #[test]
    fn params_validation() {
        let mode = SampleSizeMode::Experiment;
        assert!(TeqParams::new(q("0.2"), q("0.2"), q("0.1"), mode).is_err());
        assert!(TeqParams::new(q("0.3"), q("0.2"), q("0.1"), mode).is_err());
        assert!(TeqParams::new(q("-0.1"), q("0.2"), q("0.1"), mode).is_err());
        assert!(TeqParams::new(q("0.1"), q("1.1"), q("0.1"), mode).is_err());
        assert!(TeqParams::new(q("0.1"), q("0.2"), q("0"), mode).is_err());
        assert!(TeqParams::new(q("0.1"), q("0.2"), q("1"), mode).is_err());
        assert!(TeqParams::new(q("0"), q("1"), q("0.5"), mode).is_ok());
    }

    #[test]
    fn identical_pair_accepts_with_zero_statistic() {
        let pc = WeightedCircuit::new(&tautology(), &WeightFn::new(vec![ratio(2, 7)]).unwrap()).unwrap();
        let p = params("0.01", "0.2", "0.01", SampleSizeMode::Experiment);
        let out = teq(&pc, &pc, &p, &RunConfig::seeded(3)).unwrap();
        assert_eq!(out.verdict.decision, Decision::Accept);
        assert_eq!(out.verdict.statistic, Rational::zero());
        assert_eq!(out.verdict.m, 294);
        assert_eq!(tv_bound_report(&out.trace, &p).estimate, Rational::zero());
        for d in out.trace.iterations.iter().flatten() {
            assert_eq!(d.ratio, Rational::one());
        }
    }

    #[test]
    fn disjoint_pair_rejects() {
        let u = WeightFn::uniform(1);
        let pc1 = WeightedCircuit::new(&literal(true), &u).unwrap();
        let pc2 = WeightedCircuit::new(&literal(false), &u).unwrap();
        let p = params("0.1", "0.9", "0.01", SampleSizeMode::Experiment);
        let out = teq(&pc1, &pc2, &p, &RunConfig::seeded(1)).unwrap();
        assert_eq!(out.verdict.decision, Decision::Reject);
        assert_eq!(out.verdict.statistic, int(out.verdict.m as i64));
        assert_eq!(tv_bound_report(&out.trace, &p).estimate, Rational::one());
    }

    #[test]
    fn ratio_formula_holds_in_trace() {
        let pc1 = WeightedCircuit::new(&tautology(), &WeightFn::new(vec![ratio(1, 3)]).unwrap()).unwrap();
        let pc2 = WeightedCircuit::new(&tautology(), &WeightFn::new(vec![ratio(1, 2)]).unwrap()).unwrap();
        let p = params("0.1", "0.5", "0.1", SampleSizeMode::Experiment);
        let out = teq(&pc1, &pc2, &p, &RunConfig::seeded(2)).unwrap();
        for d in out.trace.iterations.iter().flatten() {
            assert_eq!(d.ratio, (&d.s2 / &out.trace.k2) * (&out.trace.k1 / &d.s1));
        }
    }

    #[test]
    fn threshold_is_inclusive() {
        // Disjoint pair: statistic = m. With eps = eta - 2γ chosen so that
        // m(ε+γ) = m exactly (ε + γ = 1 needs η = 1, ε = 1 - γ = ... ) use ε=0.8, η=1.
        let u = WeightFn::uniform(1);
        let pc1 = WeightedCircuit::new(&literal(true), &u).unwrap();
        let pc2 = WeightedCircuit::new(&literal(false), &u).unwrap();
        let p = params("0.8", "1", "0.1", SampleSizeMode::Experiment);
        // ε + γ = 0.9 < 1, so reject; now the boundary case with ε + γ = 1 is
        // impossible for η <= 1 unless ε = η, so check the comparison directly.
        let out = teq(&pc1, &pc2, &p, &RunConfig::seeded(0)).unwrap();
        assert_eq!(out.verdict.decision, Decision::Reject);
        let same = WeightedCircuit::new(&tautology(), &u).unwrap();
        let p = params("0", "0.2", "0.1", SampleSizeMode::Experiment);
        let out = teq(&same, &same, &p, &RunConfig::seeded(0)).unwrap();
        // statistic 0 vs threshold m·0.1 > 0
        assert!(out.verdict.statistic <= out.verdict.threshold);
    }

    #[test]
    fn unsatisfiable_inputs_rejected() {
        let mut b = CircuitBuilder::new(1);
        let f = b.constant(false);
        let unsat = WeightedCircuit::new(&b.build(f).unwrap(), &WeightFn::uniform(1)).unwrap();
        let ok = WeightedCircuit::new(&tautology(), &WeightFn::uniform(1)).unwrap();
        let p = params("0.1", "0.5", "0.1", SampleSizeMode::Experiment);
        assert_eq!(teq(&unsat, &ok, &p, &RunConfig::default()), Err(TestError::Unsatisfiable(1)));
        assert_eq!(teq(&ok, &unsat, &p, &RunConfig::default()), Err(TestError::Unsatisfiable(2)));
        assert_eq!(peq(&ok, &unsat, &q("0.1"), 0), Err(TestError::Unsatisfiable(2)));
    }

    #[test]
    fn parallel_and_sequential_runs_match() {
        let pc1 = WeightedCircuit::new(&tautology(), &WeightFn::new(vec![ratio(1, 3)]).unwrap()).unwrap();
        let pc2 = WeightedCircuit::new(&tautology(), &WeightFn::new(vec![ratio(3, 5)]).unwrap()).unwrap();
        let p = params("0.05", "0.3", "0.05", SampleSizeMode::Experiment);
        let seq = RunConfig { execution: Execution::Sequential, ..RunConfig::seeded(17) };
        let par = RunConfig { execution: Execution::Parallel, ..RunConfig::seeded(17) };
        assert_eq!(teq(&pc1, &pc2, &p, &seq).unwrap(), teq(&pc1, &pc2, &p, &par).unwrap());
    }

    #[test]
    fn peq_on_single_variable() {
        let w1 = WeightFn::new(vec![ratio(1, 3)]).unwrap();
        let w2 = WeightFn::new(vec![ratio(2, 3)]).unwrap();
        let pc1 = WeightedCircuit::new(&tautology(), &w1).unwrap();
        let pc2 = WeightedCircuit::new(&tautology(), &w2).unwrap();
        for seed in 0..50 {
            assert_eq!(peq(&pc1, &pc1, &q("0.1"), seed).unwrap().decision, Decision::Accept);
            let out = peq(&pc1, &pc2, &q("0.1"), seed).unwrap();
            assert_eq!(out.m, 10);
            assert_eq!(out.decision, Decision::Reject);
        }
        assert!(peq(&pc1, &pc2, &q("0"), 0).is_err());
    }

    #[test]
    fn peq_m_is_ceiling() {
        let pc = WeightedCircuit::new(&tautology(), &WeightFn::uniform(1)).unwrap();
        assert_eq!(peq(&pc, &pc, &q("0.3"), 0).unwrap().m, 4);
    }
}
