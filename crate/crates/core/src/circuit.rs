//! Immutable NNF circuits over `n` Boolean variables.
//!
//! Circuits are built bottom-up through [`CircuitBuilder`]; every child
//! reference points at an earlier node, so node order is a topological order
//! and acyclicity holds by construction. Nodes not reachable from the root are
//! dropped when the circuit is built.

use std::collections::HashMap;
use std::fmt;

use fixedbitset::FixedBitSet;
use serde::Serialize;
use thiserror::Error;

use crate::exec::{self, Execution};

/// Default largest `n` for which semantic (enumerative) checks are run.
pub const SEMANTIC_LIMIT: usize = 20;

/// A Boolean variable, numbered from 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(u32);

impl VarId {
    /// `index` is 1-based; zero is not a variable.
    pub fn new(index: u32) -> Option<Self> {
        (index > 0).then_some(VarId(index))
    }

    /// Variable for a 0-based position.
    pub fn from_index(index: usize) -> Self {
        VarId(index as u32 + 1)
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// 0-based position.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn from_index(index: usize) -> Self {
        NodeId(index as u32)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    True,
    False,
    PosLit(VarId),
    NegLit(VarId),
    And(Vec<NodeId>),
    /// `decision` names the variable an Or node branches on, when known.
    Or {
        children: Vec<NodeId>,
        decision: Option<VarId>,
    },
}

impl Node {
    pub fn children(&self) -> &[NodeId] {
        match self {
            Node::And(c) | Node::Or { children: c, .. } => c,
            _ => &[],
        }
    }
}

/// A total 0/1 assignment; position `i` holds the value of variable `i + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment(Vec<bool>);

impl Assignment {
    pub fn new(bits: Vec<bool>) -> Self {
        Assignment(bits)
    }

    /// The `index`-th assignment in lexicographic order, `x1` most significant.
    pub fn from_index(n: usize, index: u64) -> Self {
        Assignment((0..n).map(|j| (index >> (n - 1 - j)) & 1 == 1).collect())
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn value(&self, var: VarId) -> bool {
        self.0[var.index()]
    }

    pub fn into_bits(self) -> Vec<bool> {
        self.0
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CircuitError {
    #[error("assignment has {got} bits but the circuit has {expected} variables")]
    LengthMismatch { expected: usize, got: usize },
    #[error("node {0} referenced before it was defined")]
    NodeOutOfRange(usize),
    #[error("variable {var} outside 1..={n_vars}")]
    VarOutOfRange { var: u32, n_vars: usize },
    #[error("circuit is not decomposable")]
    NotDecomposable,
    #[error("semantic check needs n <= {limit}, circuit has {n} variables")]
    SemanticLimit { n: usize, limit: usize },
}

/// Incremental, bottom-up circuit construction with constant folding.
///
/// Constant children are folded away (`And` drops `True` and collapses on
/// `False`, `Or` the dual) and single-child gates collapse to the child.
#[derive(Debug, Clone)]
pub struct CircuitBuilder {
    n_vars: usize,
    nodes: Vec<Node>,
    true_id: Option<NodeId>,
    false_id: Option<NodeId>,
}

impl CircuitBuilder {
    pub fn new(n_vars: usize) -> Self {
        CircuitBuilder { n_vars, nodes: Vec::new(), true_id: None, false_id: None }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    fn push(&mut self, node: Node) -> NodeId {
        let id = NodeId::from_index(self.nodes.len());
        self.nodes.push(node);
        id
    }

    pub fn constant(&mut self, value: bool) -> NodeId {
        let slot = if value { self.true_id } else { self.false_id };
        if let Some(id) = slot {
            return id;
        }
        let id = self.push(if value { Node::True } else { Node::False });
        if value {
            self.true_id = Some(id);
        } else {
            self.false_id = Some(id);
        }
        id
    }

    fn check_var(&self, var: VarId) -> Result<(), CircuitError> {
        if var.index() < self.n_vars {
            Ok(())
        } else {
            Err(CircuitError::VarOutOfRange { var: var.get(), n_vars: self.n_vars })
        }
    }

    fn check_children(&self, children: &[NodeId]) -> Result<(), CircuitError> {
        match children.iter().find(|c| c.index() >= self.nodes.len()) {
            Some(c) => Err(CircuitError::NodeOutOfRange(c.index())),
            None => Ok(()),
        }
    }

    pub fn literal(&mut self, var: VarId, positive: bool) -> Result<NodeId, CircuitError> {
        self.check_var(var)?;
        Ok(self.push(if positive { Node::PosLit(var) } else { Node::NegLit(var) }))
    }

    pub fn and(&mut self, children: Vec<NodeId>) -> Result<NodeId, CircuitError> {
        self.check_children(&children)?;
        let mut kept = Vec::with_capacity(children.len());
        for c in children {
            match self.nodes[c.index()] {
                Node::True => {}
                Node::False => return Ok(self.constant(false)),
                _ => kept.push(c),
            }
        }
        Ok(match kept.len() {
            0 => self.constant(true),
            1 => kept[0],
            _ => self.push(Node::And(kept)),
        })
    }

    pub fn or(
        &mut self,
        children: Vec<NodeId>,
        decision: Option<VarId>,
    ) -> Result<NodeId, CircuitError> {
        self.check_children(&children)?;
        if let Some(v) = decision {
            self.check_var(v)?;
        }
        let mut kept = Vec::with_capacity(children.len());
        for c in children {
            match self.nodes[c.index()] {
                Node::False => {}
                Node::True => return Ok(self.constant(true)),
                _ => kept.push(c),
            }
        }
        Ok(match kept.len() {
            0 => self.constant(false),
            1 => kept[0],
            _ => self.push(Node::Or { children: kept, decision }),
        })
    }

    /// `(x ∧ hi) ∨ (¬x ∧ lo)` as a decision node on `var`.
    pub fn decision(&mut self, var: VarId, hi: NodeId, lo: NodeId) -> Result<NodeId, CircuitError> {
        let pos = self.literal(var, true)?;
        let neg = self.literal(var, false)?;
        let hi = self.and(vec![pos, hi])?;
        let lo = self.and(vec![neg, lo])?;
        self.or(vec![hi, lo], Some(var))
    }

    /// Finishes the circuit at `root`, pruning unreachable nodes while keeping
    /// the relative order of the survivors.
    pub fn build(self, root: NodeId) -> Result<Circuit, CircuitError> {
        if root.index() >= self.nodes.len() {
            return Err(CircuitError::NodeOutOfRange(root.index()));
        }
        let mut reachable = vec![false; self.nodes.len()];
        reachable[root.index()] = true;
        for i in (0..=root.index()).rev() {
            if reachable[i] {
                for c in self.nodes[i].children() {
                    reachable[c.index()] = true;
                }
            }
        }
        let mut remap = vec![u32::MAX; self.nodes.len()];
        let mut nodes = Vec::new();
        for (i, node) in self.nodes.into_iter().enumerate() {
            if !reachable[i] {
                continue;
            }
            remap[i] = nodes.len() as u32;
            let fix = |cs: Vec<NodeId>| cs.into_iter().map(|c| NodeId(remap[c.index()])).collect();
            nodes.push(match node {
                Node::And(cs) => Node::And(fix(cs)),
                Node::Or { children, decision } => Node::Or { children: fix(children), decision },
                other => other,
            });
        }
        let root = NodeId(remap[root.index()]);
        Ok(Circuit::from_parts(self.n_vars, nodes, root))
    }
}

/// How determinism of Or nodes is established.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DeterminismMode {
    /// Every Or node is a decision node.
    Syntactic,
    /// No assignment satisfies two children of an Or node (enumeration).
    Semantic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Determinism {
    SyntacticDecision,
    SemanticVerified,
    /// Enumeration found an assignment satisfying two children of an Or node.
    Refuted,
    /// Not decision-form and too many variables to enumerate.
    Unknown,
}

impl Determinism {
    pub fn holds(self) -> bool {
        matches!(self, Determinism::SyntacticDecision | Determinism::SemanticVerified)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StructuralReport {
    pub decomposable: bool,
    pub deterministic: Determinism,
    pub smooth: bool,
}

/// A rooted NNF DAG. Node order is topological (children first) and the
/// root is the last node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    n_vars: usize,
    nodes: Vec<Node>,
    root: NodeId,
    vars: Vec<FixedBitSet>,
}

impl Circuit {
    fn from_parts(n_vars: usize, nodes: Vec<Node>, root: NodeId) -> Self {
        let mut vars: Vec<FixedBitSet> = Vec::with_capacity(nodes.len());
        for node in &nodes {
            let mut set = FixedBitSet::with_capacity(n_vars);
            match node {
                Node::PosLit(v) | Node::NegLit(v) => set.insert(v.index()),
                Node::And(cs) | Node::Or { children: cs, .. } => {
                    for c in cs {
                        set.union_with(&vars[c.index()]);
                    }
                }
                Node::True | Node::False => {}
            }
            vars.push(set);
        }
        Circuit { n_vars, nodes, root, vars }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.iter().map(|n| n.children().len()).sum()
    }

    /// `|φ|`: vertices plus edges.
    pub fn size(&self) -> usize {
        self.node_count() + self.edge_count()
    }

    /// Variables mentioned below `id`.
    pub fn var_set(&self, id: NodeId) -> &FixedBitSet {
        &self.vars[id.index()]
    }

    pub fn is_false(&self) -> bool {
        matches!(self.node(self.root), Node::False)
    }

    /// Rebuilds this circuit in a fresh builder, returning the builder and the
    /// root id inside it. Used to extend an existing circuit.
    pub fn to_builder(&self, n_vars: usize) -> (CircuitBuilder, NodeId) {
        assert!(n_vars >= self.n_vars);
        let mut b = CircuitBuilder::new(n_vars);
        let mut map = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let id = match node {
                Node::True => b.constant(true),
                Node::False => b.constant(false),
                Node::PosLit(v) => b.literal(*v, true).expect("var in range"),
                Node::NegLit(v) => b.literal(*v, false).expect("var in range"),
                Node::And(cs) => b.and(cs.iter().map(|c| map[c.index()]).collect()).expect("dag"),
                Node::Or { children, decision } => b
                    .or(children.iter().map(|c| map[c.index()]).collect(), *decision)
                    .expect("dag"),
            };
            map.push(id);
        }
        let root = map[self.root.index()];
        (b, root)
    }

    /// `φ(σ)` by one bottom-up pass.
    pub fn evaluate(&self, sigma: &Assignment) -> Result<bool, CircuitError> {
        if sigma.len() != self.n_vars {
            return Err(CircuitError::LengthMismatch { expected: self.n_vars, got: sigma.len() });
        }
        let mut val = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match node {
                Node::True => true,
                Node::False => false,
                Node::PosLit(x) => sigma.value(*x),
                Node::NegLit(x) => !sigma.value(*x),
                Node::And(cs) => cs.iter().all(|c| val[c.index()]),
                Node::Or { children, .. } => children.iter().any(|c| val[c.index()]),
            };
            val.push(v);
        }
        Ok(val[self.root.index()])
    }

    /// Evaluates every node on 64 assignments at once. `columns[j]` holds the
    /// value of variable `j + 1` in each of the 64 lanes.
    pub fn evaluate_lanes(&self, columns: &[u64]) -> Vec<u64> {
        debug_assert_eq!(columns.len(), self.n_vars);
        let mut val: Vec<u64> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match node {
                Node::True => !0,
                Node::False => 0,
                Node::PosLit(x) => columns[x.index()],
                Node::NegLit(x) => !columns[x.index()],
                Node::And(cs) => cs.iter().fold(!0, |acc, c| acc & val[c.index()]),
                Node::Or { children, .. } => children.iter().fold(0, |acc, c| acc | val[c.index()]),
            };
            val.push(v);
        }
        val
    }

    /// True iff the children of every And node mention pairwise-disjoint
    /// variable sets.
    pub fn is_decomposable(&self) -> bool {
        self.nodes.iter().all(|node| match node {
            Node::And(cs) => {
                let mut seen = FixedBitSet::with_capacity(self.n_vars);
                cs.iter().all(|c| {
                    let s = &self.vars[c.index()];
                    let disjoint = seen.is_disjoint(s);
                    seen.union_with(s);
                    disjoint
                })
            }
            _ => true,
        })
    }

    /// Every Or node's children mention the same variables, and the root
    /// mentions all `n` variables (or the circuit is the constant False).
    pub fn is_smooth(&self) -> bool {
        let or_ok = self.nodes.iter().enumerate().all(|(i, node)| match node {
            Node::Or { children, .. } => children.iter().all(|c| self.vars[c.index()] == self.vars[i]),
            _ => true,
        });
        or_ok && (self.is_false() || self.vars[self.root.index()].count_ones(..) == self.n_vars)
    }

    fn implies_literal(&self, id: NodeId, var: VarId, positive: bool) -> bool {
        match self.node(id) {
            Node::PosLit(x) => positive && *x == var,
            Node::NegLit(x) => !positive && *x == var,
            Node::And(cs) => cs.iter().any(|c| self.implies_literal(*c, var, positive)),
            Node::False => true,
            _ => false,
        }
    }

    /// Every Or node is `(x ∧ α) ∨ (¬x ∧ β)` on its decision variable.
    pub fn is_decision_form(&self) -> bool {
        self.nodes.iter().all(|node| match node {
            Node::Or { children, decision } => match (children.as_slice(), decision) {
                ([_], _) | ([], _) => true,
                ([a, b], Some(x)) => {
                    (self.implies_literal(*a, *x, true) && self.implies_literal(*b, *x, false))
                        || (self.implies_literal(*a, *x, false) && self.implies_literal(*b, *x, true))
                }
                _ => false,
            },
            _ => true,
        })
    }

    /// Exhaustively checks that no assignment satisfies two children of any
    /// Or node. Requires `n <= limit`.
    pub fn is_semantically_deterministic(&self, limit: usize) -> Result<bool, CircuitError> {
        if self.n_vars > limit {
            return Err(CircuitError::SemanticLimit { n: self.n_vars, limit });
        }
        let ors: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| matches!(self.nodes[i], Node::Or { .. }))
            .collect();
        if ors.is_empty() {
            return Ok(true);
        }
        let blocks = block_count(self.n_vars);
        let overlap = exec::any(Execution::default_for(blocks), blocks, |block| {
            let (columns, valid) = block_columns(self.n_vars, block);
            let val = self.evaluate_lanes(&columns);
            ors.iter().any(|&i| {
                let mut seen = 0u64;
                self.nodes[i].children().iter().any(|c| {
                    let v = val[c.index()] & valid;
                    let clash = seen & v != 0;
                    seen |= v;
                    clash
                })
            })
        });
        Ok(!overlap)
    }

    pub fn check_deterministic(
        &self,
        mode: DeterminismMode,
        limit: usize,
    ) -> Result<bool, CircuitError> {
        match mode {
            DeterminismMode::Syntactic => Ok(self.is_decision_form()),
            DeterminismMode::Semantic => self.is_semantically_deterministic(limit),
        }
    }

    /// Syntactic check first, falling back to enumeration when `n <= limit`.
    pub fn determinism(&self, limit: usize) -> Determinism {
        if self.is_decision_form() {
            return Determinism::SyntacticDecision;
        }
        match self.is_semantically_deterministic(limit) {
            Ok(true) => Determinism::SemanticVerified,
            Ok(false) => Determinism::Refuted,
            Err(_) => Determinism::Unknown,
        }
    }

    pub fn report(&self, semantic_limit: usize) -> StructuralReport {
        StructuralReport {
            decomposable: self.is_decomposable(),
            deterministic: self.determinism(semantic_limit),
            smooth: self.is_smooth(),
        }
    }

    /// Smooths a decomposable circuit: every Or child missing some of its
    /// parent's variables is conjoined with `(x ∨ ¬x)` for each missing `x`,
    /// and the root is completed the same way. The model set is unchanged.
    pub fn smooth(&self) -> Result<Circuit, CircuitError> {
        if !self.is_decomposable() {
            return Err(CircuitError::NotDecomposable);
        }
        let mut b = CircuitBuilder::new(self.n_vars);
        let mut gadgets: HashMap<usize, NodeId> = HashMap::new();
        let mut gadget = |b: &mut CircuitBuilder, x: usize| -> NodeId {
            *gadgets.entry(x).or_insert_with(|| {
                let v = VarId::from_index(x);
                let pos = b.literal(v, true).expect("var in range");
                let neg = b.literal(v, false).expect("var in range");
                b.or(vec![pos, neg], Some(v)).expect("dag")
            })
        };
        let mut map: Vec<NodeId> = Vec::with_capacity(self.nodes.len());
        for (i, node) in self.nodes.iter().enumerate() {
            let id = match node {
                Node::True => b.constant(true),
                Node::False => b.constant(false),
                Node::PosLit(v) => b.literal(*v, true).expect("var in range"),
                Node::NegLit(v) => b.literal(*v, false).expect("var in range"),
                Node::And(cs) => b.and(cs.iter().map(|c| map[c.index()]).collect()).expect("dag"),
                Node::Or { children, decision } => {
                    let mut kids = Vec::with_capacity(children.len());
                    for c in children {
                        let missing: Vec<usize> =
                            self.vars[i].difference(&self.vars[c.index()]).collect();
                        if missing.is_empty() {
                            kids.push(map[c.index()]);
                        } else {
                            let mut parts = vec![map[c.index()]];
                            parts.extend(missing.into_iter().map(|x| gadget(&mut b, x)));
                            kids.push(b.and(parts).expect("dag"));
                        }
                    }
                    b.or(kids, *decision).expect("dag")
                }
            };
            map.push(id);
        }
        let mut root = map[self.root.index()];
        if !self.is_false() {
            let mut all = FixedBitSet::with_capacity(self.n_vars);
            all.insert_range(..);
            let missing: Vec<usize> = all.difference(&self.vars[self.root.index()]).collect();
            if !missing.is_empty() {
                let mut parts = vec![root];
                parts.extend(missing.into_iter().map(|x| gadget(&mut b, x)));
                root = b.and(parts).expect("dag");
            }
        }
        b.build(root)
    }
}

/// Number of 64-lane blocks needed to cover `2^n` assignments.
pub fn block_count(n: usize) -> u64 {
    if n <= 6 {
        1
    } else {
        1u64 << (n - 6)
    }
}

/// Variable columns for the `block`-th group of 64 assignments in
/// lexicographic order (`x1` most significant), plus the mask of lanes that
/// correspond to real assignments.
pub fn block_columns(n: usize, block: u64) -> (Vec<u64>, u64) {
    const LOW: [u64; 6] = [
        0xAAAA_AAAA_AAAA_AAAA,
        0xCCCC_CCCC_CCCC_CCCC,
        0xF0F0_F0F0_F0F0_F0F0,
        0xFF00_FF00_FF00_FF00,
        0xFFFF_0000_FFFF_0000,
        0xFFFF_FFFF_0000_0000,
    ];
    let columns = (0..n)
        .map(|j| {
            let bit = n - 1 - j;
            if bit < 6 {
                LOW[bit]
            } else if (block >> (bit - 6)) & 1 == 1 {
                !0
            } else {
                0
            }
        })
        .collect();
    let valid = if n >= 6 { !0 } else { (1u64 << (1u64 << n)) - 1 };
    (columns, valid)
}
