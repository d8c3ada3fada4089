//! Statistical behaviour of `teq` and `peq` on generated pairs.

mod common;

use common::{compiled, permuted, rng};
use num_traits::Zero;
use pcteq::benchgen::{make_pair_with_target, random_weights, PerturbedPair, Target};
use pcteq::circuit::Circuit;
use pcteq::closeness::{peq, sample_size, teq, Decision, RunConfig, SampleSizeMode, TeqParams};
use pcteq::engine::{OracleMode, WeightedCircuit};
use pcteq::exec::Execution;
use pcteq::formats::{parse_nnf, write_nnf};
use pcteq::oracle::tv_exact;
use pcteq::rational::{ratio, Rational};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn params() -> TeqParams {
    TeqParams::new(ratio(1, 20), ratio(3, 10), ratio(1, 20), SampleSizeMode::Experiment).unwrap()
}

/// Regenerates the instance until the target is reachable; formulas with a
/// single model admit no perturbation at all.
fn feasible_pair(target: &Target, r: &mut ChaCha8Rng) -> (Circuit, PerturbedPair) {
    loop {
        let n = r.random_range(6..=10);
        let (_, c) = compiled(n, r);
        let w1 = random_weights(n, r, 8).unwrap();
        if let Ok(pair) = make_pair_with_target(&c, &w1, target, r) {
            return (c, pair);
        }
    }
}

fn run_pairs(target: Target, want: Decision, oracle: OracleMode, seed: u64) -> usize {
    let mut r = rng(seed);
    let p = params();
    let mut correct = 0;
    for i in 0..20 {
        let (c, pair) = feasible_pair(&target, &mut r);
        let d = tv_exact(&c, &pair.w1, &c, &pair.w2).unwrap();
        assert_eq!(d, pair.dtv_closed_form);
        let pc1 = WeightedCircuit::new(&c, &pair.w1).unwrap();
        let pc2 = WeightedCircuit::new(&c, &pair.w2).unwrap();
        let config = RunConfig { oracle, execution: Execution::Sequential, seed: seed * 1000 + i };
        let out = teq(&pc1, &pc2, &p, &config).unwrap();
        assert_eq!(out.verdict.m, sample_size(&p));
        if out.verdict.decision == want {
            correct += 1;
        }
    }
    correct
}

#[test]
fn teq_accepts_close_pairs() {
    let correct = run_pairs(Target::Close(ratio(1, 20)), Decision::Accept, OracleMode::Exact, 1);
    assert!(correct >= 18, "{correct}/20");
}

#[test]
fn teq_rejects_far_pairs() {
    let correct = run_pairs(Target::Far(ratio(3, 10)), Decision::Reject, OracleMode::Exact, 2);
    assert!(correct >= 18, "{correct}/20");
}

#[test]
fn teq_with_noisy_oracles() {
    let close = run_pairs(Target::Close(ratio(1, 20)), Decision::Accept, OracleMode::Noisy { key: 5 }, 3);
    let far = run_pairs(Target::Far(ratio(3, 10)), Decision::Reject, OracleMode::Noisy { key: 6 }, 4);
    assert!(close >= 18 && far >= 18, "close {close}/20, far {far}/20");
}

#[test]
fn teq_parallel_matches_sequential() {
    let mut r = rng(9);
    let (_, c) = compiled(12, &mut r);
    let w1 = random_weights(12, &mut r, 8).unwrap();
    let w2 = random_weights(12, &mut r, 8).unwrap();
    let pc1 = WeightedCircuit::new(&c, &w1).unwrap();
    let pc2 = WeightedCircuit::new(&c, &w2).unwrap();
    for oracle in [OracleMode::Exact, OracleMode::Noisy { key: 3 }] {
        let seq = RunConfig { oracle, execution: Execution::Sequential, seed: 77 };
        let par = RunConfig { execution: Execution::Parallel, ..seq };
        assert_eq!(teq(&pc1, &pc2, &params(), &seq).unwrap(), teq(&pc1, &pc2, &params(), &par).unwrap());
    }
}

#[test]
fn peq_accepts_equivalent_forms() {
    let mut r = rng(21);
    for seed in 0..30 {
        let n = r.random_range(4..=12);
        let (_, c) = compiled(n, &mut r);
        let w = random_weights(n, &mut r, 8).unwrap();
        let other = if seed % 2 == 0 { c.smooth().unwrap() } else { parse_nnf(&write_nnf(&permuted(&c, &mut r))).unwrap() };
        let pc1 = WeightedCircuit::new(&c, &w).unwrap();
        let pc2 = WeightedCircuit::new(&other, &w).unwrap();
        let out = peq(&pc1, &pc2, &ratio(1, 10), seed).unwrap();
        assert_eq!(out.decision, Decision::Accept);
        assert_eq!(out.value1, out.value2);
    }
}

#[test]
fn peq_rejects_perturbed_pairs() {
    let mut r = rng(22);
    let mut rejected = 0;
    let total = 40;
    for seed in 0..total {
        let (c, pair) = feasible_pair(&Target::Close(ratio(1, 5)), &mut r);
        assert!(pair.dtv_closed_form > Rational::zero());
        let pc1 = WeightedCircuit::new(&c, &pair.w1).unwrap();
        let pc2 = WeightedCircuit::new(&c, &pair.w2).unwrap();
        if peq(&pc1, &pc2, &ratio(1, 10), seed).unwrap().decision == Decision::Reject {
            rejected += 1;
        }
    }
    assert!(rejected >= 34, "{rejected}/{total}");
}
