//! Probabilistic circuits over d-DNNF: exact weighted counting and sampling,
//! network polynomials, and testers for closeness and equivalence of the
//! distributions two weighted circuits define.
//!
//! A probabilistic circuit is a satisfiable circuit `φ` together with a
//! literal-weighted function `w`; it defines `P(φ, w)(σ) = w(σ) / w(φ)` on
//! the models of `φ`.
//!
//! ```
//! use pcteq::{circuit::{CircuitBuilder, VarId}, engine::WeightedCircuit, weights::WeightFn};
//! use pcteq::rational::ratio;
//!
//! let mut b = CircuitBuilder::new(1);
//! let x = VarId::new(1).unwrap();
//! let (t, f) = (b.constant(true), b.constant(true));
//! let root = b.decision(x, t, f).unwrap();
//! let pc = WeightedCircuit::new(&b.build(root).unwrap(), &WeightFn::new(vec![ratio(1, 3)]).unwrap()).unwrap();
//! assert_eq!(*pc.wmc(), ratio(1, 1));
//! ```

pub mod benchgen;
pub mod circuit;
pub mod closeness;
pub mod cnf;
pub mod engine;
pub mod exec;
pub mod formats;
pub mod oracle;
pub mod rational;
pub mod weights;

pub use circuit::{Assignment, Circuit, CircuitBuilder, VarId};
pub use closeness::{peq, sample_size, teq, Decision, RunConfig, SampleSizeMode, TeqParams};
pub use engine::{wmc_exact, WeightedCircuit};
pub use rational::Rational;
pub use weights::WeightFn;
