#![allow(dead_code)]

use std::collections::BTreeMap;

use pcteq::benchgen::{default_clause_count, satisfiable_instance};
use pcteq::circuit::{Assignment, Circuit, CircuitBuilder, Node, NodeId};
use pcteq::cnf::Cnf;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Satisfiable compiled random 3-CNF at the default clause ratio.
pub fn compiled(n: usize, r: &mut ChaCha8Rng) -> (Cnf, Circuit) {
    let distinct = n * (n - 1) * (n - 2) / 6 * 8;
    satisfiable_instance(n, default_clause_count(n).min(distinct / 2), 1000, r).expect("satisfiable instance")
}

pub fn cnf_models(cnf: &Cnf) -> Vec<Assignment> {
    (0..1u64 << cnf.n_vars)
        .map(|k| Assignment::from_index(cnf.n_vars, k))
        .filter(|s| cnf.evaluate(s))
        .collect()
}

/// Random CNF with clauses of width 1..=min(3, n).
pub fn small_cnf(n: usize, clauses: usize, r: &mut ChaCha8Rng) -> Cnf {
    let vars: Vec<i32> = (1..=n as i32).collect();
    let cs = (0..clauses)
        .map(|_| {
            let width = r.random_range(1..=n.min(3));
            let mut picked = vars.clone();
            picked.shuffle(r);
            picked.truncate(width);
            picked.into_iter().map(|v| if r.random::<bool>() { v } else { -v }).collect()
        })
        .collect();
    Cnf::new(n, cs)
}

/// The same circuit with nodes emitted in a random topological order and
/// children shuffled.
pub fn permuted(c: &Circuit, r: &mut ChaCha8Rng) -> Circuit {
    let nodes = c.nodes();
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    let mut pending: Vec<usize> = nodes.iter().map(|n| n.children().len()).collect();
    for (i, n) in nodes.iter().enumerate() {
        for ch in n.children() {
            parents[ch.index()].push(i);
        }
    }
    let mut ready: Vec<usize> = (0..nodes.len()).filter(|&i| pending[i] == 0).collect();
    let mut b = CircuitBuilder::new(c.n_vars());
    let mut map: BTreeMap<usize, NodeId> = BTreeMap::new();
    while !ready.is_empty() {
        let i = ready.swap_remove(r.random_range(0..ready.len()));
        let mut kids: Vec<NodeId> = nodes[i].children().iter().map(|ch| map[&ch.index()]).collect();
        kids.shuffle(r);
        let id = match &nodes[i] {
            Node::True => b.constant(true),
            Node::False => b.constant(false),
            Node::PosLit(v) => b.literal(*v, true).unwrap(),
            Node::NegLit(v) => b.literal(*v, false).unwrap(),
            Node::And(_) => b.and(kids).unwrap(),
            Node::Or { decision, .. } => b.or(kids, *decision).unwrap(),
        };
        map.insert(i, id);
        for &p in &parents[i] {
            pending[p] -= 1;
            if pending[p] == 0 {
                ready.push(p);
            }
        }
    }
    b.build(map[&c.root().index()]).unwrap()
}
