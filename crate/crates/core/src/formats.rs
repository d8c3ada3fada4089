//! Text formats: c2d `.nnf` circuits, DIMACS CNF, and weight files.
//!
//! `.nnf` files start with `nnf v e n` and list one node per line:
//! `L l` (signed literal), `A c i1 .. ic` and `O j c i1 .. ic` where `j` is
//! the decision variable (0 if none) and the `i`s are 0-based indices of
//! earlier lines. The last node is the root. `A 0` is True and `O 0 0` is
//! False.
//!
//! Weight files hold one `w <var> <weight>` line per variable, the weight
//! written as `a/b` or as a decimal. Missing variables default to 1/2.
//!
//! Lines starting with `c` are comments in all three formats; LF and CRLF
//! line endings are accepted.

use std::fmt::Write as _;

use thiserror::Error;

use crate::circuit::{Circuit, CircuitBuilder, Node, NodeId, VarId};
use crate::cnf::Cnf;
use crate::rational::{parse_rational, to_text, Rational};
use crate::weights::{WeightError, WeightFn};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    /// 1-based line number (0 when the problem is at end of input).
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("missing header")]
    MissingHeader,
    #[error("malformed header `{0}`")]
    MalformedHeader(String),
    #[error("malformed line `{0}`")]
    MalformedLine(String),
    #[error("node {node} refers to node {child}, which is not defined yet")]
    ForwardReference { node: usize, child: usize },
    #[error("node index {index} out of range (header declares {count} nodes)")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("literal {lit} out of range for {n_vars} variables")]
    LiteralOutOfRange { lit: i64, n_vars: usize },
    #[error("header declares {declared} {what} but the body has {found}")]
    CountMismatch { what: &'static str, declared: usize, found: usize },
    #[error("clause not terminated by 0")]
    UnterminatedClause,
    #[error("weight {0} is outside the open interval (0, 1)")]
    WeightDomain(String),
    #[error("invalid number: {0}")]
    Number(String),
}

fn err(line: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, kind }
}

/// Non-empty, non-comment lines with their 1-based numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r').trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('c'))
}

fn parse_usize(line: usize, tok: &str, raw: &str) -> Result<usize, ParseError> {
    tok.parse().map_err(|_| err(line, ParseErrorKind::MalformedLine(raw.to_string())))
}

pub fn parse_nnf(text: &str) -> Result<Circuit, ParseError> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or(err(0, ParseErrorKind::MissingHeader))?;
    let bad_header = || err(hline, ParseErrorKind::MalformedHeader(header.to_string()));
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 4 || toks[0] != "nnf" {
        return Err(bad_header());
    }
    let nums: Vec<usize> =
        toks[1..].iter().map(|t| t.parse()).collect::<Result<_, _>>().map_err(|_| bad_header())?;
    let (v, e, n) = (nums[0], nums[1], nums[2]);
    if v == 0 {
        return Err(bad_header());
    }

    let mut b = CircuitBuilder::new(n);
    let mut ids: Vec<NodeId> = Vec::with_capacity(v);
    let mut edges = 0usize;
    for (ln, raw) in lines {
        let node = ids.len();
        if node >= v {
            return Err(err(ln, ParseErrorKind::CountMismatch { what: "nodes", declared: v, found: node + 1 }));
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        let malformed = || err(ln, ParseErrorKind::MalformedLine(raw.to_string()));
        let children = |toks: &[&str]| -> Result<Vec<NodeId>, ParseError> {
            let count = parse_usize(ln, toks[0], raw)?;
            if toks.len() != count + 1 {
                return Err(malformed());
            }
            toks[1..]
                .iter()
                .map(|t| {
                    let index = parse_usize(ln, t, raw)?;
                    if index >= v {
                        Err(err(ln, ParseErrorKind::IndexOutOfRange { index, count: v }))
                    } else if index >= node {
                        Err(err(ln, ParseErrorKind::ForwardReference { node, child: index }))
                    } else {
                        Ok(ids[index])
                    }
                })
                .collect()
        };
        let id = match toks.first().copied() {
            Some("L") if toks.len() == 2 => {
                let lit: i64 = toks[1].parse().map_err(|_| malformed())?;
                if lit == 0 || lit.unsigned_abs() as usize > n {
                    return Err(err(ln, ParseErrorKind::LiteralOutOfRange { lit, n_vars: n }));
                }
                let var = VarId::new(lit.unsigned_abs() as u32).expect("non-zero");
                b.literal(var, lit > 0).expect("checked range")
            }
            Some("A") if toks.len() >= 2 => {
                let cs = children(&toks[1..])?;
                edges += cs.len();
                b.and(cs).expect("children checked")
            }
            Some("O") if toks.len() >= 3 => {
                let j = parse_usize(ln, toks[1], raw)?;
                if j > n {
                    return Err(err(ln, ParseErrorKind::LiteralOutOfRange { lit: j as i64, n_vars: n }));
                }
                let cs = children(&toks[2..])?;
                edges += cs.len();
                b.or(cs, VarId::new(j as u32)).expect("children checked")
            }
            _ => return Err(malformed()),
        };
        ids.push(id);
    }
    if ids.len() != v {
        return Err(err(0, ParseErrorKind::CountMismatch { what: "nodes", declared: v, found: ids.len() }));
    }
    if edges != e {
        return Err(err(0, ParseErrorKind::CountMismatch { what: "edges", declared: e, found: edges }));
    }
    Ok(b.build(*ids.last().expect("v > 0")).expect("root exists"))
}

pub fn write_nnf(circuit: &Circuit) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "nnf {} {} {}", circuit.node_count(), circuit.edge_count(), circuit.n_vars());
    let ids = |cs: &[NodeId]| cs.iter().map(|c| format!(" {}", c.index())).collect::<String>();
    for node in circuit.nodes() {
        let _ = match node {
            Node::True => writeln!(out, "A 0"),
            Node::False => writeln!(out, "O 0 0"),
            Node::PosLit(v) => writeln!(out, "L {}", v.get()),
            Node::NegLit(v) => writeln!(out, "L -{}", v.get()),
            Node::And(cs) => writeln!(out, "A {}{}", cs.len(), ids(cs)),
            Node::Or { children, decision } => writeln!(
                out,
                "O {} {}{}",
                decision.map_or(0, VarId::get),
                children.len(),
                ids(children)
            ),
        };
    }
    out
}

pub fn parse_dimacs_cnf(text: &str) -> Result<Cnf, ParseError> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut current = Vec::new();
    let mut last_line = 0;
    for (ln, raw) in content_lines(text) {
        last_line = ln;
        if raw.starts_with('%') {
            break;
        }
        if raw.starts_with('p') {
            let toks: Vec<&str> = raw.split_whitespace().collect();
            let parsed = match toks.as_slice() {
                ["p", "cnf", n, m] => n.parse().ok().zip(m.parse().ok()),
                _ => None,
            };
            match (header, parsed) {
                (None, Some(h)) => header = Some(h),
                _ => return Err(err(ln, ParseErrorKind::MalformedHeader(raw.to_string()))),
            }
            continue;
        }
        let Some((n, _)) = header else {
            return Err(err(ln, ParseErrorKind::MissingHeader));
        };
        for tok in raw.split_whitespace() {
            let lit: i64 = tok.parse().map_err(|_| err(ln, ParseErrorKind::MalformedLine(raw.to_string())))?;
            if lit == 0 {
                clauses.push(std::mem::take(&mut current));
            } else if lit.unsigned_abs() as usize > n {
                return Err(err(ln, ParseErrorKind::LiteralOutOfRange { lit, n_vars: n }));
            } else {
                current.push(lit as i32);
            }
        }
    }
    let (n, m) = header.ok_or(err(0, ParseErrorKind::MissingHeader))?;
    if !current.is_empty() {
        return Err(err(last_line, ParseErrorKind::UnterminatedClause));
    }
    if clauses.len() != m {
        log::warn!("header declares {m} clauses, found {}", clauses.len());
    }
    Ok(Cnf::new(n, clauses))
}

pub fn write_dimacs_cnf(cnf: &Cnf) -> String {
    let mut out = format!("p cnf {} {}\n", cnf.n_vars, cnf.clauses.len());
    for clause in &cnf.clauses {
        for lit in clause {
            let _ = write!(out, "{lit} ");
        }
        out.push_str("0\n");
    }
    out
}

/// Parses `w <var> <weight>` lines for `n` variables. Unlisted variables get
/// weight 1/2; a repeated variable keeps its last weight.
pub fn parse_weights(text: &str, n: usize) -> Result<WeightFn, ParseError> {
    let half = Rational::new(1.into(), 2.into());
    let mut weights = vec![half; n];
    let mut seen = vec![false; n];
    for (ln, raw) in content_lines(text) {
        let toks: Vec<&str> = raw.split_whitespace().collect();
        let ["w", var, value] = toks.as_slice() else {
            return Err(err(ln, ParseErrorKind::MalformedLine(raw.to_string())));
        };
        let var: i64 = var.parse().map_err(|_| err(ln, ParseErrorKind::MalformedLine(raw.to_string())))?;
        if var < 1 || var as usize > n {
            return Err(err(ln, ParseErrorKind::LiteralOutOfRange { lit: var, n_vars: n }));
        }
        let value = parse_rational(value).map_err(|e| err(ln, ParseErrorKind::Number(e.to_string())))?;
        let i = var as usize - 1;
        if seen[i] {
            log::warn!("line {ln}: duplicate weight for x{var}, keeping the last one");
        }
        seen[i] = true;
        weights[i] = value;
    }
    WeightFn::new(weights).map_err(|e| match e {
        WeightError::OutOfRange { value, .. } => err(0, ParseErrorKind::WeightDomain(to_text(&value))),
        other => err(0, ParseErrorKind::Number(other.to_string())),
    })
}

pub fn write_weights(w: &WeightFn) -> String {
    let mut out = String::new();
    for (i, weight) in w.weights().iter().enumerate() {
        let _ = writeln!(out, "w {} {}", i + 1, to_text(weight));
    }
    out
}
