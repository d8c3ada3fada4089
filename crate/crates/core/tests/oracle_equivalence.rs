//! Engine and compiler results against brute-force enumeration.

mod common;

use common::{cnf_models, compiled, permuted, rng, small_cnf};
use num_bigint::BigInt;
use num_traits::One;
use pcteq::benchgen::{compile_decision_dnnf, perturb_one_var, random_3cnf, random_weights};
use pcteq::circuit::{Assignment, VarId};
use pcteq::engine::{wmc_exact, WeightedCircuit};
use pcteq::formats::{parse_nnf, write_nnf};
use pcteq::oracle::{brute_force_wmc, enumerate_models, exact_pmf, tv_exact};
use pcteq::rational::Rational;
use pcteq::weights::{dyadic_approx, weighted_to_unweighted, DyadicWeightFn};
use rand::Rng;

#[test]
fn compiled_models_match_cnf() {
    let mut r = rng(101);
    for i in 0..30 {
        let n = 4 + i % 13;
        let cnf = random_3cnf(n, r.random_range(n..=5 * n), &mut r).unwrap();
        let c = compile_decision_dnnf(&cnf).unwrap();
        assert!(c.is_decomposable(), "instance {i}");
        assert!(c.is_decision_form(), "instance {i}");
        assert_eq!(enumerate_models(&c).unwrap(), cnf_models(&cnf), "instance {i}");
    }
}

#[test]
fn circuit_evaluation_matches_cnf() {
    let mut r = rng(7);
    for _ in 0..20 {
        let n = r.random_range(5..=14);
        let cnf = random_3cnf(n, 3 * n, &mut r).unwrap();
        let c = compile_decision_dnnf(&cnf).unwrap();
        for _ in 0..50 {
            let s = Assignment::from_index(n, r.random_range(0..1u64 << n));
            assert_eq!(c.evaluate(&s).unwrap(), cnf.evaluate(&s));
        }
    }
}

#[test]
fn wmc_matches_brute_force() {
    let mut r = rng(202);
    for i in 0..30 {
        let n = 8 + i % 9;
        let (_, c) = compiled(n, &mut r);
        let w = random_weights(n, &mut r, 10).unwrap();
        assert_eq!(wmc_exact(&c, &w).unwrap(), brute_force_wmc(&c, &w).unwrap(), "instance {i}");
    }
}

#[test]
fn smoothing_preserves_wmc() {
    let mut r = rng(303);
    for _ in 0..20 {
        let n = r.random_range(6..=14);
        let (_, c) = compiled(n, &mut r);
        let s = c.smooth().unwrap();
        assert!(s.is_smooth());
        assert!(s.is_decomposable());
        assert!(s.is_decision_form());
        assert_eq!(enumerate_models(&s).unwrap(), enumerate_models(&c).unwrap());
        let w = random_weights(n, &mut r, 8).unwrap();
        assert_eq!(brute_force_wmc(&s, &w).unwrap(), brute_force_wmc(&c, &w).unwrap());
        assert_eq!(wmc_exact(&s, &w).unwrap(), wmc_exact(&c, &w).unwrap());
    }
}

#[test]
fn nnf_round_trip() {
    let mut r = rng(404);
    for _ in 0..50 {
        let n = r.random_range(3..=16);
        let cnf = random_3cnf(n, r.random_range(1..=4 * n), &mut r).unwrap();
        let c = compile_decision_dnnf(&cnf).unwrap();
        assert_eq!(parse_nnf(&write_nnf(&c)).unwrap(), c);
        let p = permuted(&c, &mut r);
        assert_eq!(enumerate_models(&p).unwrap(), enumerate_models(&c).unwrap());
    }
}

#[test]
fn closed_form_distance_matches_enumeration() {
    let mut r = rng(505);
    for i in 0..30 {
        let n = 4 + i % 11;
        let (_, c) = compiled(n, &mut r);
        let w1 = random_weights(n, &mut r, 8).unwrap();
        let var = VarId::from_index(r.random_range(0..n));
        let b = loop {
            let b = Rational::new(BigInt::from(r.random_range(1..256u64)), BigInt::from(256));
            if &b != w1.get(var) {
                break b;
            }
        };
        let pair = perturb_one_var(&c, &w1, var, b).unwrap();
        assert_eq!(pair.dtv_closed_form, tv_exact(&c, &pair.w1, &c, &pair.w2).unwrap(), "instance {i}");
    }
}

#[test]
fn chain_reduction_counts_and_projection() {
    let mut r = rng(606);
    for i in 0..20 {
        let n = 1 + i % 3;
        let p = 1 + (i / 3) as u32 % 3;
        let c = loop {
            let cnf = small_cnf(n, r.random_range(0..=2), &mut r);
            let c = compile_decision_dnnf(&cnf).unwrap();
            if !c.is_false() {
                break c;
            }
        };
        let d: Vec<u64> = (0..n).map(|_| r.random_range(1..1u64 << p)).collect();
        let dy = DyadicWeightFn::new(d, p).unwrap();
        let w = dy.to_weight_fn();
        assert_eq!(dyadic_approx(&w, p).unwrap().weights, dy);
        let reduced = weighted_to_unweighted(&c, &dy).unwrap();
        assert_eq!(reduced.n_vars(), n + n * p as usize);
        let models = enumerate_models(&reduced).unwrap();
        let scale = Rational::from_integer(BigInt::one() << (n * p as usize));
        let expected = brute_force_wmc(&c, &w).unwrap() * &scale;
        assert_eq!(Rational::from_integer(models.len().into()), expected, "instance {i}");
        // Uniform on the reduced models, projected onto the first n variables.
        let pmf = exact_pmf(&c, &w).unwrap();
        let total = Rational::from_integer(models.len().into());
        let mut projected = std::collections::BTreeMap::<Assignment, Rational>::new();
        for m in &models {
            let key = Assignment::new(m.bits()[..n].to_vec());
            *projected.entry(key).or_default() += Rational::one() / &total;
        }
        assert_eq!(projected.len(), pmf.support_size());
        for (s, q) in &projected {
            assert_eq!(*q, pmf.get(s));
        }
    }
}

#[test]
fn weighted_circuit_rejects_refuted_determinism() {
    use pcteq::circuit::CircuitBuilder;
    let mut b = CircuitBuilder::new(2);
    let x = b.literal(VarId::from_index(0), true).unwrap();
    let y = b.literal(VarId::from_index(1), true).unwrap();
    let o = b.or(vec![x, y], None).unwrap();
    let c = b.build(o).unwrap();
    assert!(WeightedCircuit::new(&c, &pcteq::WeightFn::uniform(2)).is_err());
}
