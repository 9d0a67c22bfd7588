//! Positional operations, α-equivalence and the tree metric.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use crate::position::Position;
use crate::term::{Builder, Head, Name, Node, Term};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TermError {
    #[error("position {0} is not a position of the term")]
    PositionOutOfRange(Position),
    #[error("root of the term is not a cycle entry")]
    NotACycleRoot,
}

/// Node at position `p`, if `p` is a position of `t`.
pub fn node_at(t: &Term, p: &Position) -> Option<usize> {
    t.walk(Term::ROOT, p.steps())
}

pub fn is_position(t: &Term, p: &Position) -> bool {
    node_at(t, p).is_some()
}

pub fn head_at(t: &Term, p: &Position) -> Option<Head> {
    node_at(t, p).map(|n| t.node(n).head())
}

/// All positions of length ≤ `d` with the root symbol found there.
pub fn positions_to_depth(t: &Term, d: usize) -> Vec<(Position, Head)> {
    let mut out = Vec::new();
    let mut stack = vec![(Position::root(), Term::ROOT)];
    while let Some((p, n)) = stack.pop() {
        out.push((p.clone(), t.node(n).head()));
        if p.len() < d {
            for (i, c) in t.node(n).steps() {
                stack.push((p.child(i), c));
            }
        }
    }
    out.sort();
    out
}

pub fn subterm_at(t: &Term, p: &Position) -> Result<Term, TermError> {
    let n = node_at(t, p).ok_or_else(|| TermError::PositionOutOfRange(p.clone()))?;
    Ok(t.at_node(n))
}

/// Replace the subterm at `p` by `s` without renaming: free variables of `s`
/// become bound by binders of `t` above `p`.
pub fn graft(t: &Term, p: &Position, s: &Term) -> Result<Term, TermError> {
    let mut path = vec![Term::ROOT];
    for &i in p.steps() {
        let n = t
            .node(*path.last().unwrap())
            .step(i)
            .ok_or_else(|| TermError::PositionOutOfRange(p.clone()))?;
        path.push(n);
    }
    let mut b = Builder::new();
    let mut map = HashMap::new();
    let mut cur = b.import(s);
    for k in (0..p.len()).rev() {
        let orig = path[k];
        let mut n = t.node(orig).clone();
        let which = p.steps()[k];
        let kids: Vec<usize> = t.node(orig).children().iter().map(|&c| b.import_with(t, c, &mut map)).collect();
        match &mut n {
            Node::Abs(_, body) => *body = cur,
            Node::App(_, cs) | Node::Meta(_, cs) => {
                for (j, c) in cs.iter_mut().enumerate() {
                    *c = if j + 1 == which { cur } else { kids[j] };
                }
            }
            _ => unreachable!(),
        }
        cur = b.add(n);
    }
    Ok(b.finish(cur))
}

/// Finite term equal to `t` above depth `d`, with `_|_` at every depth-`d` position.
pub fn truncate(t: &Term, d: usize) -> Term {
    let mut b = Builder::new();
    let mut memo: HashMap<(usize, usize), usize> = HashMap::new();
    let r = trunc_rec(t, Term::ROOT, d, &mut b, &mut memo);
    b.finish(r)
}

fn trunc_rec(t: &Term, n: usize, d: usize, b: &mut Builder, memo: &mut HashMap<(usize, usize), usize>) -> usize {
    if let Some(&r) = memo.get(&(n, d)) {
        return r;
    }
    let r = if d == 0 {
        b.add(Node::Hole)
    } else {
        let mut nd = t.node(n).clone();
        let kids: Vec<usize> = t.node(n).children().iter().map(|&c| trunc_rec(t, c, d - 1, b, memo)).collect();
        match &mut nd {
            Node::Abs(_, body) => *body = kids[0],
            Node::App(_, cs) | Node::Meta(_, cs) => cs.copy_from_slice(&kids),
            _ => {}
        }
        b.add(nd)
    };
    memo.insert((n, d), r);
    r
}

/// One explicit unrolling of the root cycle. The check is made on the minimal
/// graph, so an already unrolled term such as `g(rec G. g(G))` still qualifies.
pub fn unfold(t: &Term) -> Result<Term, TermError> {
    let mut b = Builder::new();
    let r = b.import(t);
    let m = b.finish(r);
    if !m.cycle_nodes()[Term::ROOT] {
        return Err(TermError::NotACycleRoot);
    }
    let mut b = Builder::new();
    let base = b.import(&m);
    let n = b.get(base).unwrap().clone();
    let copy = b.add(n);
    Ok(b.finish_raw(copy))
}

/// A finite, prefix-closed set of positions of some term.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct PrefixSet {
    positions: BTreeSet<Position>,
}

impl PrefixSet {
    pub fn empty() -> Self {
        PrefixSet::default()
    }

    /// Checks prefix-closure and membership in `t`.
    pub fn new(positions: impl IntoIterator<Item = Position>, t: &Term) -> Option<Self> {
        let positions: BTreeSet<Position> = positions.into_iter().collect();
        if is_prefix_set(&positions, t) {
            Some(PrefixSet { positions })
        } else {
            None
        }
    }

    /// Positions of `t` strictly above depth `d`.
    pub fn above_depth(t: &Term, d: usize) -> Self {
        if d == 0 {
            return PrefixSet::empty();
        }
        let positions = positions_to_depth(t, d - 1).into_iter().map(|(p, _)| p).collect();
        PrefixSet { positions }
    }

    pub fn contains(&self, p: &Position) -> bool {
        self.positions.contains(p)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Position> {
        self.positions.iter()
    }

    pub fn positions(&self) -> &BTreeSet<Position> {
        &self.positions
    }

    pub fn is_subset(&self, other: &PrefixSet) -> bool {
        self.positions.is_subset(&other.positions)
    }

    pub fn max_len(&self) -> usize {
        self.positions.iter().map(|p| p.len()).max().unwrap_or(0)
    }
}

impl std::fmt::Display for PrefixSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let v: Vec<String> = self.positions.iter().map(|p| p.to_string()).collect();
        write!(f, "{{{}}}", v.join(", "))
    }
}

pub fn is_prefix_set(ps: &BTreeSet<Position>, t: &Term) -> bool {
    ps.iter().all(|p| {
        is_position(t, p) && p.parent().is_none_or(|q| ps.contains(&q))
    })
}

type Env = Vec<(Name, Name)>;

fn restrict(env: &Env, keep: &[Name]) -> Env {
    env.iter().filter(|(a, _)| keep.binary_search(a).is_ok()).cloned().collect()
}

/// Explore pairs of nodes under a binder correspondence. Returns the least
/// depth at which the two unfoldings disagree, or `None` if they are α-equal.
fn first_difference(t: &Term, u: &Term) -> Option<usize> {
    let fv_t = t.free_vars().to_vec();
    let mut env0: Env = fv_t.iter().map(|x| (x.clone(), x.clone())).collect();
    env0.sort();
    let mut seen: HashSet<(usize, usize, Env)> = HashSet::new();
    let mut queue = VecDeque::new();
    queue.push_back((Term::ROOT, Term::ROOT, env0, 0usize));
    while let Some((a, b, env, d)) = queue.pop_front() {
        if !seen.insert((a, b, env.clone())) {
            continue;
        }
        match (t.node(a), u.node(b)) {
            (Node::Var(x), Node::Var(y)) => {
                if !env.iter().any(|(p, q)| p == x && q == y) {
                    return Some(d);
                }
            }
            (Node::Hole, Node::Hole) => {}
            (Node::Abs(x, ba), Node::Abs(y, bb)) => {
                let mut e: Env = env.iter().filter(|(p, q)| p != x && q != y).cloned().collect();
                e.push((x.clone(), y.clone()));
                e.sort();
                let e = restrict(&e, t.free_vars_at(*ba));
                queue.push_back((*ba, *bb, e, d + 1));
            }
            (Node::App(f, cs), Node::App(g, ds)) | (Node::Meta(f, cs), Node::Meta(g, ds))
                if f == g && cs.len() == ds.len() =>
            {
                for (c, e) in cs.iter().zip(ds) {
                    queue.push_back((*c, *e, restrict(&env, t.free_vars_at(*c)), d + 1));
                }
            }
            _ => return Some(d),
        }
    }
    None
}

/// α-equivalence of the denoted (possibly infinite) trees.
pub fn alpha_eq(t: &Term, u: &Term) -> bool {
    first_difference(t, u).is_none()
}

/// `2^-k` with `k` the least depth at which the terms differ; zero iff α-equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distance {
    Zero,
    Pow(usize),
}

impl Distance {
    pub fn value(self) -> f64 {
        match self {
            Distance::Zero => 0.0,
            Distance::Pow(k) => 0.5f64.powi(k as i32),
        }
    }
}

impl PartialOrd for Distance {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.value().partial_cmp(&other.value())
    }
}

pub fn distance(t: &Term, u: &Term) -> Distance {
    match first_difference(t, u) {
        None => Distance::Zero,
        Some(k) => Distance::Pow(k),
    }
}

/// Variable-aware head at `p`: bound variables report the position of their binder.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CanonHead {
    Sym(Name, usize),
    Meta(Name, usize),
    Abs,
    BoundVar(Position),
    FreeVar(Name),
    Hole,
}

pub fn canon_head_at(t: &Term, p: &Position) -> Option<CanonHead> {
    let mut n = Term::ROOT;
    let mut binders: Vec<(Name, Position)> = Vec::new();
    for k in 0..p.len() {
        if let Node::Abs(x, _) = t.node(n) {
            binders.push((x.clone(), Position::from_steps(&p.steps()[..k])));
        }
        n = t.node(n).step(p.steps()[k])?;
    }
    Some(match t.node(n) {
        Node::Var(x) => match binders.iter().rev().find(|(y, _)| y == x) {
            Some((_, q)) => CanonHead::BoundVar(q.clone()),
            None => CanonHead::FreeVar(x.clone()),
        },
        Node::Abs(..) => CanonHead::Abs,
        Node::App(f, cs) => CanonHead::Sym(f.clone(), cs.len()),
        Node::Meta(z, cs) => CanonHead::Meta(z.clone(), cs.len()),
        Node::Hole => CanonHead::Hole,
    })
}

/// Maximum pattern height contribution: longest position in a finite term.
pub fn finite_height(t: &Term) -> Option<usize> {
    if t.is_cyclic() {
        return None;
    }
    fn h(t: &Term, n: usize, memo: &mut HashMap<usize, usize>) -> usize {
        if let Some(&v) = memo.get(&n) {
            return v;
        }
        let v = t.node(n).children().iter().map(|&c| 1 + h(t, c, memo)).max().unwrap_or(0);
        memo.insert(n, v);
        v
    }
    Some(h(t, Term::ROOT, &mut HashMap::new()))
}

/// All positions of a finite term.
pub fn all_positions(t: &Term) -> Option<Vec<Position>> {
    if t.is_cyclic() {
        return None;
    }
    let d = finite_height(t)?;
    Some(positions_to_depth(t, d).into_iter().map(|(p, _)| p).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_term, parse_term_with_free};

    fn p(s: &str) -> Term {
        parse_term(s).unwrap()
    }

    fn pos(s: &str) -> Position {
        s.parse().unwrap()
    }

    #[test]
    fn positions_examples() {
        let got: Vec<String> = positions_to_depth(&p("f([x]g(x), a)"), 2)
            .into_iter()
            .map(|(q, h)| format!("{}:{}", q, h))
            .collect();
        assert_eq!(got, vec!["@:f", "1:[x]", "1.0:g", "2:a"]);
        assert_eq!(positions_to_depth(&p("f(a)"), 0).len(), 1);
        let got: Vec<String> = positions_to_depth(&p("rec L. cons(a, L)"), 2)
            .into_iter()
            .filter(|(q, _)| q.len() <= 1)
            .map(|(q, h)| format!("{}:{}", q, h))
            .collect();
        assert_eq!(got, vec!["@:cons", "1:a", "2:cons"]);
    }

    #[test]
    fn subterm_examples() {
        let s = p("f([x]g(x), a)");
        let sub = subterm_at(&s, &pos("1.0")).unwrap();
        assert_eq!(sub.to_string(), "g(x)");
        assert_eq!(subterm_at(&s, &Position::root()).unwrap(), s);
        let l = p("rec L. cons(a, L)");
        assert!(alpha_eq(&subterm_at(&l, &pos("2")).unwrap(), &l));
        assert!(subterm_at(&s, &pos("3")).is_err());
    }

    #[test]
    fn graft_captures() {
        let t = p("[x]a");
        let x = Term::var("x");
        let g = graft(&t, &pos("0"), &x).unwrap();
        assert_eq!(g.to_string(), "[x]x");
        assert!(g.is_closed());
        assert_eq!(graft(&p("f(a, b)"), &pos("2"), &p("c")).unwrap().to_string(), "f(a, c)");
        assert_eq!(graft(&p("f(a, b)"), &Position::root(), &p("c")).unwrap().to_string(), "c");
    }

    #[test]
    fn alpha_and_distance() {
        assert!(alpha_eq(&p("[x]f(x)"), &p("[y]f(y)")));
        assert!(alpha_eq(&p("rec L. cons(a, L)"), &p("cons(a, rec L. cons(a, L))")));
        assert!(!alpha_eq(&p("[x][y]f(x)"), &p("[x][y]f(y)")));
        assert!(!alpha_eq(&p("[x][y]f(x)"), &p("[z][z]f(z)")));
        let a = parse_term_with_free("[x]Z(x, f(x))", &[]).unwrap();
        let b = parse_term_with_free("[y]Z(y, f(z))", &["z"]).unwrap();
        assert_eq!(distance(&a, &b), Distance::Pow(3));
        assert_eq!(distance(&p("f(a, b)"), &p("f(a, c)")).value(), 0.5);
        assert_eq!(distance(&p("f(a)"), &p("f(a)")), Distance::Zero);
    }

    #[test]
    fn truncate_examples() {
        assert_eq!(truncate(&p("rec G. g(G)"), 3).to_string(), "g(g(g(_|_)))");
        assert_eq!(truncate(&p("f(a)"), 0).to_string(), "_|_");
        assert_eq!(truncate(&p("f(a, b)"), 5).to_string(), "f(a, b)");
    }

    #[test]
    fn prefix_sets() {
        let t = p("g(g(g(a)))");
        let ps: BTreeSet<Position> = ["@", "1", "1.1"].iter().map(|s| pos(s)).collect();
        assert!(is_prefix_set(&ps, &t));
        assert!(is_prefix_set(&BTreeSet::new(), &t));
        let bad: BTreeSet<Position> = [pos("1")].into_iter().collect();
        assert!(!is_prefix_set(&bad, &p("f(a)")));
    }

    #[test]
    fn unfold_examples() {
        let g = p("rec G. g(G)");
        let u = unfold(&g).unwrap();
        assert_eq!(u.to_string(), "g(rec G. g(G))");
        assert!(alpha_eq(&u, &g));
        assert!(alpha_eq(&unfold(&u).unwrap(), &g));
        assert!(alpha_eq(&unfold(&p("rec L. cons(a, L)")).unwrap(), &p("cons(a, rec L. cons(a, L))")));
        assert_eq!(unfold(&p("f(a)")), Err(TermError::NotACycleRoot));
    }
}
