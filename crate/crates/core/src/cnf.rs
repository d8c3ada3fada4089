//! CNF formulas as clause lists of signed DIMACS literals.

use crate::circuit::Assignment;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cnf {
    pub n_vars: usize,
    /// Each clause is a list of non-zero signed variable indices.
    pub clauses: Vec<Vec<i32>>,
}

impl Cnf {
    pub fn new(n_vars: usize, clauses: Vec<Vec<i32>>) -> Self {
        Cnf { n_vars, clauses }
    }

    /// Clause-by-clause evaluation.
    pub fn evaluate(&self, sigma: &Assignment) -> bool {
        self.clauses.iter().all(|clause| {
            clause.iter().any(|&lit| {
                let value = sigma.bits()[lit.unsigned_abs() as usize - 1];
                if lit > 0 {
                    value
                } else {
                    !value
                }
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_clauses() {
        let f = Cnf::new(2, vec![vec![1, -2], vec![-1, 2]]);
        assert!(f.evaluate(&Assignment::new(vec![true, true])));
        assert!(f.evaluate(&Assignment::new(vec![false, false])));
        assert!(!f.evaluate(&Assignment::new(vec![true, false])));
        assert!(Cnf::new(1, vec![]).evaluate(&Assignment::new(vec![false])));
        assert!(!Cnf::new(1, vec![vec![]]).evaluate(&Assignment::new(vec![true])));
    }
}
