//! Substitution, valuations, matching and single rewrite steps.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use crate::ops::{alpha_eq, graft, node_at, positions_to_depth, TermError};
use crate::position::Position;
use crate::system::{RewriteSystem, Rule};
use crate::term::{fresh_token, name, Builder, Name, Node, Term};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RewriteError {
    #[error("expected {expected} arguments, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("meta-variable {0} is not assigned")]
    UnassignedMeta(Name),
    #[error("infinite chain of meta-variables through {0}")]
    FiniteChainsViolated(Name),
    #[error("no {rule}-redex at {position}")]
    StaleRedex { rule: Name, position: Position },
    #[error(transparent)]
    Term(#[from] TermError),
}

/// `λ̱x⃗.body`: a term abstracted over parameters, filled positionally.
#[derive(Debug, Clone)]
pub struct Substitute {
    pub params: Vec<Name>,
    pub body: Term,
}

impl Substitute {
    pub fn new(params: &[&str], body: Term) -> Self {
        Substitute { params: params.iter().map(|p| name(p)).collect(), body }
    }

    pub fn arity(&self) -> usize {
        self.params.len()
    }

    /// The closed-over form `[x1]...[xn]body`, for comparison up to renaming.
    pub fn as_abstraction(&self) -> Term {
        let mut t = self.body.clone();
        for p in self.params.iter().rev() {
            t = Term::abs(p, &t);
        }
        t
    }
}

impl PartialEq for Substitute {
    fn eq(&self, other: &Self) -> bool {
        self.arity() == other.arity() && alpha_eq(&self.as_abstraction(), &other.as_abstraction())
    }
}

impl fmt::Display for Substitute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "λ̱{}.{}", self.params.join(","), self.body)
    }
}

pub type Valuation = BTreeMap<Name, Substitute>;

pub fn format_valuation(v: &Valuation) -> String {
    let parts: Vec<String> = v.iter().map(|(z, s)| format!("{z} := {s}")).collect();
    format!("{{{}}}", parts.join("; "))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) enum Slot {
    Param(usize),
    Bound,
}

pub(crate) type Env = Vec<(Name, Slot)>;

fn env_bind(env: &Env, x: &Name, s: Slot) -> Env {
    let mut e: Env = env.iter().filter(|(y, _)| y != x).cloned().collect();
    e.push((x.clone(), s));
    e.sort();
    e
}

fn env_restrict(env: &Env, fv: &[Name]) -> Env {
    env.iter().filter(|(y, _)| fv.binary_search(y).is_ok()).cloned().collect()
}

fn env_get(env: &Env, x: &Name) -> Option<Slot> {
    env.iter().find(|(y, _)| y == x).map(|(_, s)| *s)
}

/// Per-source-name binder tokens; a consistent renaming keeps literal scoping intact.
#[derive(Default)]
struct Tokens(HashMap<Name, Name>);

impl Tokens {
    fn of(&mut self, x: &Name) -> Name {
        self.0.entry(x.clone()).or_insert_with(|| fresh_token(x)).clone()
    }
}

/// Simultaneous capture-avoiding substitution of `ts` for the free `xs` in `s`.
pub fn substitute(s: &Term, xs: &[Name], ts: &[Term]) -> Result<Term, RewriteError> {
    if xs.len() != ts.len() {
        return Err(RewriteError::ArityMismatch { expected: xs.len(), got: ts.len() });
    }
    let mut b = Builder::new();
    let mut imported: Vec<Option<usize>> = vec![None; ts.len()];
    let mut memo: HashMap<(usize, Env), usize> = HashMap::new();
    let mut tokens = Tokens::default();
    let mut queue: Vec<(usize, usize, Env)> = Vec::new();
    let mut env0: Env = Vec::new();
    for (i, x) in xs.iter().enumerate() {
        env0 = env_bind(&env0, x, Slot::Param(i));
    }

    let mut resolve = |n: usize, env: Env, b: &mut Builder, queue: &mut Vec<(usize, usize, Env)>| -> usize {
        let env = env_restrict(&env, s.free_vars_at(n));
        if let Node::Var(x) = s.node(n) {
            if let Some(Slot::Param(i)) = env_get(&env, x) {
                return *imported[i].get_or_insert_with(|| b.import(&ts[i]));
            }
        }
        if let Some(&id) = memo.get(&(n, env.clone())) {
            return id;
        }
        let id = b.reserve();
        memo.insert((n, env.clone()), id);
        queue.push((id, n, env));
        id
    };
    let root = resolve(Term::ROOT, env0, &mut b, &mut queue);
    while let Some((id, n, env)) = queue.pop() {
        let node = match s.node(n) {
            Node::Var(x) => match env_get(&env, x) {
                Some(Slot::Bound) => Node::Var(tokens.of(x)),
                _ => Node::Var(x.clone()),
            },
            Node::Abs(x, c) => {
                let e = env_bind(&env, x, Slot::Bound);
                Node::Abs(tokens.of(x), resolve(*c, e, &mut b, &mut queue))
            }
            Node::App(f, cs) => {
                Node::App(f.clone(), cs.iter().map(|&c| resolve(c, env.clone(), &mut b, &mut queue)).collect())
            }
            Node::Meta(z, cs) => {
                Node::Meta(z.clone(), cs.iter().map(|&c| resolve(c, env.clone(), &mut b, &mut queue)).collect())
            }
            Node::Hole => Node::Hole,
        };
        b.set(id, node);
    }
    Ok(b.finish(root))
}

pub fn apply_substitute(sub: &Substitute, args: &[Term]) -> Result<Term, RewriteError> {
    substitute(&sub.body, &sub.params, args)
}

/// State of the instantiation transducer: a node of the meta-term, or a node of
/// the body assigned to the meta-variable occurrence `meta`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) enum InstState {
    Meta(usize),
    Body { meta: usize, node: usize, env: Env },
}

pub(crate) enum Expansion {
    Alias(InstState),
    Out(Node, Vec<InstState>),
}

/// The valuation-application transducer for one meta-term.
pub(crate) struct Instantiator<'a> {
    pub m: &'a Term,
    v: &'a Valuation,
    meta_tokens: Tokens,
    body_tokens: Tokens,
}

impl<'a> Instantiator<'a> {
    pub fn new(v: &'a Valuation, m: &'a Term) -> Result<Self, RewriteError> {
        for (z, k) in m.metas() {
            let s = v.get(&z).ok_or_else(|| RewriteError::UnassignedMeta(z.clone()))?;
            if s.arity() != k {
                return Err(RewriteError::ArityMismatch { expected: s.arity(), got: k });
            }
        }
        Ok(Instantiator { m, v, meta_tokens: Tokens::default(), body_tokens: Tokens::default() })
    }

    fn sub_of(&self, meta: usize) -> &'a Substitute {
        match self.m.node(meta) {
            Node::Meta(z, _) => &self.v[z],
            _ => unreachable!("not a meta node"),
        }
    }

    pub fn start() -> InstState {
        InstState::Meta(Term::ROOT)
    }

    pub fn expand(&mut self, st: &InstState) -> Expansion {
        match st {
            InstState::Meta(n) => match self.m.node(*n) {
                Node::Meta(_, _) => {
                    let sub = self.sub_of(*n);
                    let mut env = Vec::new();
                    for (i, p) in sub.params.iter().enumerate() {
                        env = env_bind(&env, p, Slot::Param(i));
                    }
                    Expansion::Alias(self.body_state(*n, Term::ROOT, env))
                }
                Node::Var(x) => Expansion::Out(Node::Var(self.meta_tokens.of(x)), vec![]),
                Node::Abs(x, c) => Expansion::Out(Node::Abs(self.meta_tokens.of(x), 0), vec![InstState::Meta(*c)]),
                Node::App(f, cs) => {
                    Expansion::Out(Node::App(f.clone(), vec![]), cs.iter().map(|&c| InstState::Meta(c)).collect())
                }
                Node::Hole => Expansion::Out(Node::Hole, vec![]),
            },
            InstState::Body { meta, node, env } => {
                let sub = self.sub_of(*meta);
                match sub.body.node(*node) {
                    Node::Var(x) => match env_get(env, x) {
                        Some(Slot::Param(i)) => Expansion::Alias(InstState::Meta(self.m.node(*meta).children()[i])),
                        Some(Slot::Bound) => Expansion::Out(Node::Var(self.body_tokens.of(x)), vec![]),
                        None => Expansion::Out(Node::Var(x.clone()), vec![]),
                    },
                    Node::Abs(x, c) => {
                        let e = env_bind(env, x, Slot::Bound);
                        let child = self.body_state(*meta, *c, e);
                        Expansion::Out(Node::Abs(self.body_tokens.of(x), 0), vec![child])
                    }
                    Node::App(f, cs) => Expansion::Out(
                        Node::App(f.clone(), vec![]),
                        cs.iter().map(|&c| self.body_state(*meta, c, env.clone())).collect(),
                    ),
                    Node::Meta(z, cs) => Expansion::Out(
                        Node::Meta(z.clone(), vec![]),
                        cs.iter().map(|&c| self.body_state(*meta, c, env.clone())).collect(),
                    ),
                    Node::Hole => Expansion::Out(Node::Hole, vec![]),
                }
            }
        }
    }

    fn body_state(&self, meta: usize, node: usize, env: Env) -> InstState {
        let body = &self.sub_of(meta).body;
        InstState::Body { meta, node, env: env_restrict(&env, body.free_vars_at(node)) }
    }

    /// Follow aliases to a state that emits a node.
    pub fn settle(&mut self, st: InstState) -> Result<(InstState, Node, Vec<InstState>), RewriteError> {
        let mut seen: HashSet<InstState> = HashSet::new();
        let mut cur = st;
        loop {
            if !seen.insert(cur.clone()) {
                let z = match &cur {
                    InstState::Meta(n) | InstState::Body { meta: n, .. } => match self.m.node(*n) {
                        Node::Meta(z, _) => z.clone(),
                        _ => name("?"),
                    },
                };
                return Err(RewriteError::FiniteChainsViolated(z));
            }
            match self.expand(&cur) {
                Expansion::Alias(next) => cur = next,
                Expansion::Out(n, cs) => return Ok((cur, n, cs)),
            }
        }
    }

    pub fn build(mut self) -> Result<Term, RewriteError> {
        let mut b = Builder::new();
        let mut memo: HashMap<InstState, usize> = HashMap::new();
        let mut queue: Vec<(usize, Node, Vec<InstState>)> = Vec::new();
        let root = self.emit(Self::start(), &mut b, &mut memo, &mut queue)?;
        while let Some((id, mut node, cs)) = queue.pop() {
            let mut ids = Vec::with_capacity(cs.len());
            for c in cs {
                ids.push(self.emit(c, &mut b, &mut memo, &mut queue)?);
            }
            match &mut node {
                Node::Abs(_, c) => *c = ids[0],
                Node::App(_, v) | Node::Meta(_, v) => *v = ids,
                _ => {}
            }
            b.set(id, node);
        }
        Ok(b.finish(root))
    }

    fn emit(
        &mut self,
        st: InstState,
        b: &mut Builder,
        memo: &mut HashMap<InstState, usize>,
        queue: &mut Vec<(usize, Node, Vec<InstState>)>,
    ) -> Result<usize, RewriteError> {
        if let Some(&id) = memo.get(&st) {
            return Ok(id);
        }
        let (settled, node, cs) = self.settle(st.clone())?;
        if let Some(&id) = memo.get(&settled) {
            memo.insert(st, id);
            return Ok(id);
        }
        let id = b.reserve();
        memo.insert(settled, id);
        memo.insert(st, id);
        queue.push((id, node, cs));
        Ok(id)
    }
}

/// `σ̄(m)`: replace every meta-variable occurrence by its substitute applied to the
/// instantiated arguments. The transducer has finitely many states, so the result is
/// again a rational term.
pub fn apply_valuation(v: &Valuation, m: &Term) -> Result<Term, RewriteError> {
    Instantiator::new(v, m)?.build()
}

/// A redex: rule `rule` of the system matches at `position`.
#[derive(Debug, Clone)]
pub struct Redex {
    pub position: Position,
    pub rule: usize,
    pub valuation: Valuation,
}

impl Redex {
    pub fn key(&self) -> (Position, usize) {
        (self.position.clone(), self.rule)
    }
}

impl PartialEq for Redex {
    fn eq(&self, o: &Self) -> bool {
        self.position == o.position && self.rule == o.rule
    }
}

impl Eq for Redex {}

impl PartialOrd for Redex {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Redex {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.key().cmp(&o.key())
    }
}

impl std::hash::Hash for Redex {
    fn hash<H: std::hash::Hasher>(&self, h: &mut H) {
        self.key().hash(h)
    }
}

struct Matcher<'a> {
    lhs: &'a Term,
    t: &'a Term,
    val: Valuation,
}

impl Matcher<'_> {
    fn go(&mut self, a: usize, n: usize, binders: &mut Vec<(Name, Name)>) -> bool {
        match (self.lhs.node(a), self.t.node(n)) {
            (Node::Meta(z, xs), _) => {
                let mut params = Vec::new();
                for &x in xs {
                    let Node::Var(x) = self.lhs.node(x) else { return false };
                    let Some(i) = binders.iter().rposition(|(l, _)| l == x) else { return false };
                    let y = &binders[i].1;
                    let visible = binders.iter().rposition(|(_, r)| r == y) == Some(i);
                    params.push(if visible { y.clone() } else { fresh_token(y) });
                }
                // a variable bound by the pattern must not escape through the body
                for y in self.t.free_vars_at(n) {
                    if binders.iter().any(|(_, r)| r == y) && !params.contains(y) {
                        return false;
                    }
                }
                let sub = Substitute { params, body: self.t.at_node(n) };
                match self.val.get(z) {
                    Some(old) => *old == sub,
                    None => {
                        self.val.insert(z.clone(), sub);
                        true
                    }
                }
            }
            (Node::App(f, cs), Node::App(g, ds)) => {
                f == g && cs.len() == ds.len() && cs.iter().zip(ds).all(|(&c, &d)| self.go(c, d, binders))
            }
            (Node::Abs(x, c), Node::Abs(y, d)) => {
                binders.push((x.clone(), y.clone()));
                let ok = self.go(*c, *d, binders);
                binders.pop();
                ok
            }
            (Node::Var(x), Node::Var(y)) => {
                let i = binders.iter().rposition(|(l, _)| l == x);
                let j = binders.iter().rposition(|(_, r)| r == y);
                i.is_some() && i == j
            }
            _ => false,
        }
    }
}

/// Match `rule`'s lhs against the subterm of `t` at node `n`.
pub fn match_node(rule: &Rule, t: &Term, n: usize) -> Option<Valuation> {
    let mut m = Matcher { lhs: &rule.lhs, t, val: Valuation::new() };
    if m.go(Term::ROOT, n, &mut Vec::new()) {
        Some(m.val)
    } else {
        None
    }
}

/// Match `rule` at position `p` of `t`.
pub fn match_at(rule: &Rule, t: &Term, p: &Position) -> Option<Valuation> {
    match_node(rule, t, node_at(t, p)?)
}

/// All redexes at depth `< depth_bound`, ordered leftmost-outermost.
pub fn find_redexes(t: &Term, sys: &RewriteSystem, depth_bound: usize) -> Vec<Redex> {
    if depth_bound == 0 {
        return Vec::new();
    }
    let mut per_node: HashMap<usize, Vec<(usize, Valuation)>> = HashMap::new();
    let mut out = Vec::new();
    for (p, _) in positions_to_depth(t, depth_bound - 1) {
        let n = node_at(t, &p).unwrap();
        let hits = per_node.entry(n).or_insert_with(|| {
            sys.rules.iter().enumerate().filter_map(|(i, r)| match_node(r, t, n).map(|v| (i, v))).collect()
        });
        for (i, v) in hits.iter() {
            out.push(Redex { position: p.clone(), rule: *i, valuation: v.clone() });
        }
    }
    out.sort();
    out
}

/// Whether `t` has a redex at a depth `< depth_bound`.
pub fn has_redex_above(t: &Term, sys: &RewriteSystem, depth_bound: usize) -> bool {
    if depth_bound == 0 {
        return false;
    }
    let mut checked: HashSet<usize> = HashSet::new();
    positions_to_depth(t, depth_bound - 1).into_iter().any(|(p, _)| {
        let n = node_at(t, &p).unwrap();
        checked.insert(n) && sys.rules.iter().any(|r| match_node(r, t, n).is_some())
    })
}

/// The redex of `rule` at `p`, if there is one.
pub fn redex_at(t: &Term, sys: &RewriteSystem, rule: usize, p: &Position) -> Option<Redex> {
    match_at(&sys.rules[rule], t, p).map(|valuation| Redex { position: p.clone(), rule, valuation })
}

/// All redexes at position `p`, one per matching rule.
pub fn redexes_at(t: &Term, sys: &RewriteSystem, p: &Position) -> Vec<Redex> {
    (0..sys.rules.len()).filter_map(|i| redex_at(t, sys, i, p)).collect()
}

/// One contraction `s → t` together with what is needed to trace positions across it.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub source: Term,
    pub target: Term,
    pub redex: Redex,
    pub rule: Rule,
}

pub fn contract(t: &Term, sys: &RewriteSystem, u: &Redex) -> Result<StepRecord, RewriteError> {
    let rule = &sys.rules[u.rule];
    let valuation = match_at(rule, t, &u.position)
        .ok_or_else(|| RewriteError::StaleRedex { rule: rule.name.clone(), position: u.position.clone() })?;
    let inst = apply_valuation(&valuation, &rule.rhs)?;
    let target = graft(t, &u.position, &inst)?;
    Ok(StepRecord {
        source: t.clone(),
        target,
        redex: Redex { position: u.position.clone(), rule: u.rule, valuation },
        rule: rule.clone(),
    })
}

/// Contract the redex of the named rule at `p`.
pub fn contract_at(t: &Term, sys: &RewriteSystem, rule: &str, p: &Position) -> Result<StepRecord, RewriteError> {
    let i = sys.rule(rule).ok_or_else(|| RewriteError::StaleRedex { rule: name(rule), position: p.clone() })?;
    contract(t, sys, &Redex { position: p.clone(), rule: i, valuation: Valuation::new() })
}

impl StepRecord {
    /// Where the argument position `w` inside the instance of the meta-variable at
    /// lhs site `site` lands, as positions relative to the redex root.
    fn instance_positions(&self, z: &Name, w: &Position, max_len: usize) -> BTreeSet<Position> {
        let mut out = BTreeSet::new();
        if w.len() > max_len {
            return out;
        }
        let budget = max_len - w.len();
        let Ok(mut inst) = Instantiator::new(&self.redex.valuation, &self.rule.rhs) else { return out };
        let rhs = &self.rule.rhs;
        let reaches = meta_reach(rhs, z);
        // depth-first over the unfolding, visiting only states that can reach an instance of z
        let mut stack: Vec<(InstState, Position)> = vec![(Instantiator::start(), Position::root())];
        while let Some((st, p)) = stack.pop() {
            let mut cur = st;
            let mut hops = 0;
            loop {
                match &cur {
                    InstState::Meta(n) => {
                        if !reaches[*n] {
                            break;
                        }
                        if matches!(rhs.node(*n), Node::Meta(y, _) if y == z) {
                            out.insert(p.concat(w));
                        }
                    }
                    InstState::Body { meta, node, env } => {
                        let body = &self.redex.valuation[meta_name(rhs, *meta)].body;
                        let live = body.free_vars_at(*node).iter().any(|x| {
                            matches!(env_get(env, x), Some(Slot::Param(i)) if reaches[rhs.node(*meta).children()[i]])
                        });
                        if !live {
                            break;
                        }
                    }
                }
                hops += 1;
                if hops > rhs.size() * 4 + 16 {
                    break;
                }
                match inst.expand(&cur) {
                    Expansion::Alias(next) => cur = next,
                    Expansion::Out(node, cs) => {
                        if p.len() < budget {
                            let steps = node_steps(&node, cs.len());
                            for (s, c) in steps.into_iter().zip(cs).rev() {
                                stack.push((c, p.child(s)));
                            }
                        }
                        break;
                    }
                }
            }
        }
        out
    }

    /// Descendants of one source position, restricted to positions of length `<= max_len`.
    pub fn descendants_of(&self, p: &Position, max_len: usize) -> BTreeSet<Position> {
        let base = &self.redex.position;
        let Some(q) = p.strip_prefix(base) else {
            return if p.len() <= max_len { BTreeSet::from([p.clone()]) } else { BTreeSet::new() };
        };
        let Some(site) = self.rule.meta_sites().iter().find(|s| s.position.is_prefix_of(&q)) else {
            return BTreeSet::new();
        };
        let w = q.strip_prefix(&site.position).unwrap();
        let body = &self.redex.valuation[&site.meta].body;
        if is_param_occurrence(body, &self.redex.valuation[&site.meta].params, &w) {
            return BTreeSet::new();
        }
        if max_len < base.len() {
            return BTreeSet::new();
        }
        self.instance_positions(&site.meta, &w, max_len - base.len())
            .into_iter()
            .map(|r| base.concat(&r))
            .collect()
    }

    pub fn descendants(&self, ps: &BTreeSet<Position>, max_len: usize) -> BTreeSet<Position> {
        ps.iter().flat_map(|p| self.descendants_of(p, max_len)).collect()
    }

    /// Residuals of the redexes `us` of the source, up to positions of length `<= max_len`.
    pub fn residuals(&self, sys: &RewriteSystem, us: &[Redex], max_len: usize) -> Vec<Redex> {
        let mut out = BTreeSet::new();
        for u in us {
            if u.key() == self.redex.key() {
                continue;
            }
            for q in self.descendants_of(&u.position, max_len) {
                if let Some(r) = redex_at(&self.target, sys, u.rule, &q) {
                    out.insert(r);
                }
            }
        }
        out.into_iter().collect()
    }
}

fn meta_name(t: &Term, n: usize) -> &Name {
    match t.node(n) {
        Node::Meta(z, _) => z,
        _ => unreachable!(),
    }
}

fn node_steps(n: &Node, k: usize) -> Vec<usize> {
    match n {
        Node::Abs(..) => vec![0],
        _ => (1..=k).collect(),
    }
}

/// For each meta-term node: can an occurrence of `z` be reached from it?
fn meta_reach(m: &Term, z: &Name) -> Vec<bool> {
    let mut r: Vec<bool> = m.nodes().iter().map(|n| matches!(n, Node::Meta(y, _) if y == z)).collect();
    loop {
        let mut changed = false;
        for i in 0..m.size() {
            if !r[i] && m.node(i).children().iter().any(|&c| r[c]) {
                r[i] = true;
                changed = true;
            }
        }
        if !changed {
            return r;
        }
    }
}

/// Does `w` address an occurrence of one of the parameters in `body`?
fn is_param_occurrence(body: &Term, params: &[Name], w: &Position) -> bool {
    let mut shadow: Vec<Name> = Vec::new();
    let mut n = Term::ROOT;
    for &s in w.steps() {
        if let Node::Abs(x, _) = body.node(n) {
            shadow.push(x.clone());
        }
        match body.node(n).step(s) {
            Some(c) => n = c,
            None => return false,
        }
    }
    matches!(body.node(n), Node::Var(x) if params.contains(x) && !shadow.contains(x))
}

/// Replay a list of `(rule, position)` steps.
pub fn reduce_along(t: &Term, sys: &RewriteSystem, steps: &[(usize, Position)]) -> Result<Vec<StepRecord>, RewriteError> {
    let mut cur = t.clone();
    let mut out = Vec::new();
    for (r, p) in steps {
        let st = contract(&cur, sys, &Redex { position: p.clone(), rule: *r, valuation: Valuation::new() })?;
        cur = st.target.clone();
        out.push(st);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse_term;

    fn t(s: &str) -> Term {
        parse_term(s).unwrap()
    }

    fn pos(s: &str) -> Position {
        s.parse().unwrap()
    }

    #[test]
    fn substitution_basics() {
        let x = name("x");
        let gx = crate::parse_term_with_free("g(x)", &["x"]).unwrap();
        assert!(alpha_eq(&substitute(&gx, std::slice::from_ref(&x), &[t("a")]).unwrap(), &t("g(a)")));
        let r = substitute(&crate::parse_term_with_free("[y]x", &["x"]).unwrap(), std::slice::from_ref(&x), &[Term::var("y")]).unwrap();
        assert_eq!(r.to_string(), "[y']y");
        let g = t("rec G. g(G)");
        assert!(alpha_eq(&substitute(&Term::var("x"), &[x], std::slice::from_ref(&g)).unwrap(), &g));
        assert!(substitute(&t("a"), &[name("x")], &[]).is_err());
    }

    #[test]
    fn substitutes() {
        let s = Substitute::new(&["x"], crate::parse_term_with_free("h(x)", &["x"]).unwrap());
        assert!(alpha_eq(&apply_substitute(&s, &[t("a")]).unwrap(), &t("h(a)")));
        let c = Substitute::new(&[], t("c"));
        assert!(alpha_eq(&apply_substitute(&c, &[]).unwrap(), &t("c")));
        let sw = Substitute::new(&["x", "y"], crate::parse_term_with_free("f(y, x)", &["x", "y"]).unwrap());
        assert!(alpha_eq(&apply_substitute(&sw, &[t("a"), t("b")]).unwrap(), &t("f(b, a)")));
    }

    fn val(pairs: &[(&str, &[&str], &str)]) -> Valuation {
        pairs
            .iter()
            .map(|(z, ps, b)| (name(z), Substitute::new(ps, crate::parse_term_with_free(b, ps).unwrap())))
            .collect()
    }

    #[test]
    fn valuations() {
        let v = val(&[("Z", &["x"], "h(x)"), ("Z'", &[], "a")]);
        let r = apply_valuation(&v, &t("Z(g(Z(Z')))")).unwrap();
        assert!(alpha_eq(&r, &t("h(g(h(a)))")));
        let v = val(&[("Z", &["x"], "x")]);
        assert!(alpha_eq(&apply_valuation(&v, &t("Z(a)")).unwrap(), &t("a")));
        let v = val(&[("F", &["z"], "f(z)"), ("X", &[], "a"), ("XS", &[], "rec L. cons(a, L)")]);
        let r = apply_valuation(&v, &t("cons(F(X), map([z]F(z), XS))")).unwrap();
        assert!(alpha_eq(&r, &t("cons(f(a), map([z]f(z), rec L. cons(a, L)))")));
        assert!(matches!(apply_valuation(&Valuation::new(), &t("Z")), Err(RewriteError::UnassignedMeta(_))));
        let v = val(&[("Z", &["x"], "x")]);
        assert!(matches!(apply_valuation(&v, &t("rec W. Z(W)")), Err(RewriteError::FiniteChainsViolated(_))));
    }

    #[test]
    fn valuation_avoids_capture() {
        // body mentions a context variable y; the rhs binder y must not capture it
        let v: Valuation = [(name("Z"), Substitute { params: vec![], body: Term::var("y") })].into();
        let r = apply_valuation(&v, &t("[y]g(y, Z)")).unwrap();
        let expect = crate::parse_term_with_free("[y']g(y', y)", &["y"]).unwrap();
        assert!(alpha_eq(&r, &expect), "{r}");
    }

    #[test]
    fn matching() {
        let r = Rule::parse("r", "f([x]Z(x), Z')", "Z(Z')").unwrap();
        let v = match_at(&r, &t("f([x]h(x), a)"), &Position::root()).unwrap();
        assert_eq!(v[&name("Z")], Substitute::new(&["x"], crate::parse_term_with_free("h(x)", &["x"]).unwrap()));
        assert!(alpha_eq(&v[&name("Z'")].body, &t("a")));
        let a = Rule::parse("a", "a", "b").unwrap();
        assert!(match_at(&a, &t("f(a)"), &Position::root()).is_none());
        // the pattern binder may not escape into a meta-variable that does not take it
        let k = Rule::parse("k", "f([x]Z)", "Z").unwrap();
        assert!(match_at(&k, &t("f([x]x)"), &Position::root()).is_none());
        assert!(match_at(&k, &t("f([x]a)"), &Position::root()).is_some());
    }

    #[test]
    fn match_round_trip_on_instance() {
        let r = Rule::parse("m", "map([z]F(z), cons(X, XS))", "a").unwrap();
        let v = val(&[("F", &["z"], "g(z, z)"), ("X", &[], "b"), ("XS", &[], "rec L. cons(b, L)")]);
        let inst = apply_valuation(&v, &r.lhs).unwrap();
        let w = match_at(&r, &inst, &Position::root()).unwrap();
        assert!(alpha_eq(&apply_valuation(&w, &r.lhs).unwrap(), &inst));
    }

    #[test]
    fn redex_enumeration() {
        let sys = RewriteSystem::parse("rule f: f(X, Y) -> g(X, f(X, Y)); rule a: a -> b; rule c: c -> c;").unwrap();
        let rs = find_redexes(&t("f(a, c)"), &sys, 2);
        let ps: Vec<String> = rs.iter().map(|r| r.position.to_string()).collect();
        assert_eq!(ps, ["@", "1", "2"]);
        assert!(find_redexes(&t("g(b, b)"), &sys, 1).is_empty());
        let sys = RewriteSystem::parse("rule f: f(Z) -> Z;").unwrap();
        let rs = find_redexes(&t("rec F. f(F)"), &sys, 3);
        assert_eq!(rs.iter().map(|r| r.position.compact()).collect::<Vec<_>>(), ["@", "1", "11"]);
    }

    #[test]
    fn contraction_and_residuals() {
        let sys = RewriteSystem::parse("rule beta: f([x]Z(x), Z') -> Z(Z');").unwrap();
        let st = contract_at(&t("f([x]h(x), a)"), &sys, "beta", &Position::root()).unwrap();
        assert!(alpha_eq(&st.target, &t("h(a)")));

        let sys = RewriteSystem::parse("rule f: f(X, Y) -> g(X, f(X, Y)); rule a: a -> b; rule c: c -> c;").unwrap();
        let s = t("f(a, c)");
        let st = contract_at(&s, &sys, "a", &pos("1")).unwrap();
        assert!(alpha_eq(&st.target, &t("f(b, c)")));
        assert_eq!(st.descendants_of(&pos("2"), 10), BTreeSet::from([pos("2")]));
        let us = find_redexes(&s, &sys, 5);
        let res = st.residuals(&sys, &us, 10);
        assert_eq!(res.iter().map(|r| r.key()).collect::<Vec<_>>(), [(Position::root(), 0), (pos("2"), 2)]);
        let st2 = contract_at(&s, &sys, "c", &pos("2")).unwrap();
        assert!(st2.residuals(&sys, std::slice::from_ref(&st2.redex), 10).is_empty());
    }

    #[test]
    fn duplicating_step() {
        let sys = RewriteSystem::parse("rule f: f([x]Z(x)) -> Z(Z(a)); rule g: g(h(X)) -> X;").unwrap();
        let s = t("g(f([x]g(g(x))))");
        let st = contract_at(&s, &sys, "f", &pos("1")).unwrap();
        assert!(alpha_eq(&st.target, &t("g(g(g(g(g(a)))))")));
        // the inner g(x) at 1.1.0.1 has two instances
        let d = st.descendants_of(&pos("1.1.0.1"), 20);
        assert_eq!(d, BTreeSet::from([pos("1.1"), pos("1.1.1.1")]));
        // the pattern of the contracted redex and the bound occurrence have none
        assert!(st.descendants_of(&pos("1"), 20).is_empty());
        assert!(st.descendants_of(&pos("1.1"), 20).is_empty());
        assert!(st.descendants_of(&pos("1.1.0.1.1"), 20).is_empty());
        assert_eq!(st.descendants_of(&Position::root(), 20), BTreeSet::from([Position::root()]));
    }

    #[test]
    fn redex_inside_duplicated_argument() {
        let sys = RewriteSystem::parse("rule f: f([x]Z(x)) -> Z(Z(a)); rule k: k(Y) -> Y;").unwrap();
        let s = t("f([x]g(k(x)))");
        let us = find_redexes(&s, &sys, 10);
        assert_eq!(us.len(), 2);
        let st = contract_at(&s, &sys, "f", &Position::root()).unwrap();
        let res = st.residuals(&sys, &us, 10);
        assert_eq!(res.len(), 2, "{res:?}");
    }

    #[test]
    fn stale_redex_is_reported() {
        let sys = RewriteSystem::parse("rule a: a -> b;").unwrap();
        assert!(matches!(contract_at(&t("f(c)"), &sys, "a", &pos("1")), Err(RewriteError::StaleRedex { .. })));
    }

    #[test]
    fn cyclic_descendants_are_bounded() {
        let sys = RewriteSystem::parse("rule r: f(Z) -> rec W. g(Z, W);").unwrap();
        let st = contract_at(&t("f(a)"), &sys, "r", &Position::root()).unwrap();
        let d = st.descendants_of(&pos("1"), 3);
        assert_eq!(d, BTreeSet::from([pos("1"), pos("2.1"), pos("2.2.1")]));
    }
}
