//! Rules, systems and their static checks.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::ops::{all_positions, node_at};
use crate::position::Position;
use crate::syntax::{parse_file, Item, ParseError};
use crate::term::{name, Name, Node, Term};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SystemError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("symbol `{symbol}` used with arities {first} and {second}")]
    ArityConflict { symbol: Name, first: usize, second: usize },
    #[error("rule `{0}` defined twice")]
    DuplicateRule(Name),
    #[error("left-hand side of rule `{0}` is infinite")]
    InfiniteLhs(Name),
    #[error("the system is not left-linear; orthogonality is undefined")]
    NotLeftLinear,
}

/// Where a meta-variable sits in a left-hand side and which binders it receives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaSite {
    pub meta: Name,
    pub position: Position,
    pub params: Vec<Name>,
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub name: Name,
    pub lhs: Term,
    pub rhs: Term,
    sites: Vec<MetaSite>,
    pattern: Vec<Position>,
}

impl Rule {
    pub fn new(name_: &str, lhs: Term, rhs: Term) -> Result<Rule, SystemError> {
        let n = name(name_);
        let positions = all_positions(&lhs).ok_or_else(|| SystemError::InfiniteLhs(n.clone()))?;
        let mut sites = Vec::new();
        for p in &positions {
            if let Node::Meta(z, cs) = lhs.node(node_at(&lhs, p).unwrap()) {
                let params = cs
                    .iter()
                    .map(|&c| match lhs.node(c) {
                        Node::Var(x) => x.clone(),
                        _ => name("?"),
                    })
                    .collect();
                sites.push(MetaSite { meta: z.clone(), position: p.clone(), params });
            }
        }
        let pattern = positions
            .iter()
            .filter(|p| !sites.iter().any(|s| s.position.is_prefix_of(p)))
            .cloned()
            .collect();
        Ok(Rule { name: n, lhs, rhs, sites, pattern })
    }

    pub fn parse(name_: &str, lhs: &str, rhs: &str) -> Result<Rule, SystemError> {
        Rule::new(name_, crate::parse_term(lhs)?, crate::parse_term(rhs)?)
    }

    /// Meta-variable occurrences of the lhs, in position order.
    pub fn meta_sites(&self) -> &[MetaSite] {
        &self.sites
    }

    pub fn site(&self, z: &str) -> Option<&MetaSite> {
        self.sites.iter().find(|s| &*s.meta == z)
    }

    /// Positions of the lhs not at or below a meta-variable, relative to the redex root.
    pub fn pattern_positions(&self) -> &[Position] {
        &self.pattern
    }

    /// Length of the longest pattern position.
    pub fn pattern_height(&self) -> usize {
        self.pattern.iter().map(|p| p.len()).max().unwrap_or(0)
    }

    pub fn root_symbol(&self) -> Option<(Name, usize)> {
        match self.lhs.root_node() {
            Node::App(f, cs) => Some((f.clone(), cs.len())),
            _ => None,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} -> {}", self.name, self.lhs, self.rhs)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RewriteSystem {
    pub signature: BTreeMap<Name, usize>,
    pub rules: Vec<Rule>,
}

impl RewriteSystem {
    pub fn new(rules: Vec<Rule>) -> Result<Self, SystemError> {
        let mut sys = RewriteSystem { signature: BTreeMap::new(), rules: Vec::new() };
        for r in rules {
            sys.add_rule(r)?;
        }
        Ok(sys)
    }

    pub fn add_rule(&mut self, r: Rule) -> Result<(), SystemError> {
        if self.rules.iter().any(|q| q.name == r.name) {
            return Err(SystemError::DuplicateRule(r.name));
        }
        for t in [&r.lhs, &r.rhs] {
            for (f, k) in t.symbols() {
                self.declare(&f, k)?;
            }
        }
        self.rules.push(r);
        Ok(())
    }

    pub fn declare(&mut self, f: &Name, k: usize) -> Result<(), SystemError> {
        match self.signature.get(f) {
            Some(&j) if j != k => {
                Err(SystemError::ArityConflict { symbol: f.clone(), first: j, second: k })
            }
            _ => {
                self.signature.insert(f.clone(), k);
                Ok(())
            }
        }
    }

    /// Check that `t` uses symbols consistently with the signature.
    pub fn check_term_signature(&self, t: &Term) -> Result<(), SystemError> {
        for (f, k) in t.symbols() {
            if let Some(&j) = self.signature.get(&f) {
                if j != k {
                    return Err(SystemError::ArityConflict { symbol: f, first: j, second: k });
                }
            }
        }
        Ok(())
    }

    pub fn parse(src: &str) -> Result<Self, SystemError> {
        Ok(Self::from_items(&parse_file(src)?)?.0)
    }

    /// Build a system from file items; named terms are returned alongside.
    pub fn from_items(items: &[Item]) -> Result<(Self, Vec<(Name, Term)>), SystemError> {
        let mut sys = RewriteSystem::default();
        let mut terms = Vec::new();
        for it in items {
            match it {
                Item::Sym { name, arity, .. } => sys.declare(name, *arity)?,
                Item::Rule { name, lhs, rhs, .. } => {
                    sys.add_rule(Rule::new(name, lhs.clone(), rhs.clone())?)?
                }
                Item::Term { name, term, .. } => terms.push((name.clone(), term.clone())),
            }
        }
        for (_, t) in &terms {
            for (f, k) in t.symbols() {
                sys.declare(&f, k)?;
            }
        }
        Ok((sys, terms))
    }

    pub fn rule(&self, name_: &str) -> Option<usize> {
        self.rules.iter().position(|r| &*r.name == name_)
    }

    /// Longest pattern position over all rules.
    pub fn max_pattern_height(&self) -> usize {
        self.rules.iter().map(|r| r.pattern_height()).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    Rules,
    LeftLinear,
    FullyExtended,
    Orthogonal,
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CheckKind::Rules => "rules",
            CheckKind::LeftLinear => "left-linear",
            CheckKind::FullyExtended => "fully-extended",
            CheckKind::Orthogonal => "orthogonal",
        };
        write!(f, "{s}")
    }
}

/// A reproducible reason for a failed check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub rule: Name,
    pub position: Position,
    pub reason: String,
    /// For overlaps: the other rule and the unifying assignment, printed.
    pub other_rule: Option<Name>,
    pub unifier: Vec<(Name, String)>,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rule {} at {}: {}", self.rule, self.position, self.reason)?;
        if let Some(o) = &self.other_rule {
            write!(f, " (with rule {o}")?;
            for (z, s) in &self.unifier {
                write!(f, ", {z} := {s}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub witnesses: Vec<Witness>,
}

impl Verdict {
    pub fn pass() -> Self {
        Verdict { witnesses: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        self.witnesses.is_empty()
    }

    fn fail(&mut self, rule: &Name, position: Position, reason: impl Into<String>) {
        self.witnesses.push(Witness {
            rule: rule.clone(),
            position,
            reason: reason.into(),
            other_rule: None,
            unifier: Vec::new(),
        });
    }
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub verdicts: Vec<(CheckKind, Verdict)>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|(_, v)| v.passed())
    }

    pub fn verdict(&self, k: CheckKind) -> &Verdict {
        &self.verdicts.iter().find(|(c, _)| *c == k).unwrap().1
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.verdicts {
            writeln!(f, "{k}: {}", if v.passed() { "pass" } else { "FAIL" })?;
            for w in &v.witnesses {
                writeln!(f, "  {w}")?;
            }
        }
        Ok(())
    }
}

/// Walk a finite term with the stack of enclosing binder names.
fn walk_scoped(t: &Term, mut visit: impl FnMut(&Position, usize, &[Name])) {
    fn go(t: &Term, n: usize, p: &Position, scope: &mut Vec<Name>, visit: &mut dyn FnMut(&Position, usize, &[Name])) {
        visit(p, n, scope);
        match t.node(n) {
            Node::Abs(x, b) => {
                scope.push(x.clone());
                go(t, *b, &p.child(0), scope, visit);
                scope.pop();
            }
            nd => {
                for (i, c) in nd.steps() {
                    go(t, c, &p.child(i), scope, visit);
                }
            }
        }
    }
    go(t, Term::ROOT, &Position::root(), &mut Vec::new(), &mut visit);
}

fn pattern_verdict(rule: &Name, l: &Term) -> Verdict {
    let mut v = Verdict::pass();
    if l.is_cyclic() {
        v.fail(rule, Position::root(), "left-hand side is infinite");
        return v;
    }
    walk_scoped(l, |p, n, scope| {
        if let Node::Meta(z, cs) = l.node(n) {
            let mut seen: Vec<&Name> = Vec::new();
            for &c in cs {
                match l.node(c) {
                    Node::Var(x) if scope.contains(x) => {
                        if seen.contains(&x) {
                            v.fail(rule, p.clone(), format!("{z} receives {x} twice"));
                        }
                        seen.push(x);
                    }
                    _ => v.fail(rule, p.clone(), format!("argument of {z} is not a bound variable")),
                }
            }
        }
    });
    v
}

/// Every meta-variable occurrence applies to pairwise distinct bound variables.
pub fn check_pattern(l: &Term) -> Verdict {
    pattern_verdict(&name("lhs"), l)
}

fn meta_only_cycle(t: &Term) -> Option<usize> {
    let n = t.size();
    let is_meta: Vec<bool> = t.nodes().iter().map(|x| matches!(x, Node::Meta(..))).collect();
    // colour DFS restricted to meta nodes
    let mut colour = vec![0u8; n];
    fn dfs(t: &Term, x: usize, is_meta: &[bool], colour: &mut [u8]) -> Option<usize> {
        colour[x] = 1;
        for &c in t.node(x).children() {
            if !is_meta[c] {
                continue;
            }
            if colour[c] == 1 {
                return Some(c);
            }
            if colour[c] == 0 {
                if let Some(w) = dfs(t, c, is_meta, colour) {
                    return Some(w);
                }
            }
        }
        colour[x] = 2;
        None
    }
    (0..n).filter(|&x| is_meta[x]).find_map(|x| if colour[x] == 0 { dfs(t, x, &is_meta, &mut colour) } else { None })
}

pub fn check_rule(r: &Rule) -> Verdict {
    let mut v = pattern_verdict(&r.name, &r.lhs);
    if !matches!(r.lhs.root_node(), Node::App(..)) {
        v.fail(&r.name, Position::root(), "left-hand side is not rooted by a function symbol");
    }
    for t in [&r.lhs, &r.rhs] {
        if t.has_hole() {
            v.fail(&r.name, Position::root(), "the hole symbol is reserved");
        }
    }
    if !r.lhs.is_closed() {
        v.fail(&r.name, Position::root(), format!("left-hand side has free variables {:?}", r.lhs.free_vars()));
    }
    if !r.rhs.is_closed() {
        v.fail(&r.name, Position::root(), format!("right-hand side has free variables {:?}", r.rhs.free_vars()));
    }
    let lm = r.lhs.metas();
    for (z, k) in r.rhs.metas() {
        match lm.iter().find(|(m, _)| *m == z) {
            None => v.fail(&r.name, Position::root(), format!("meta-variable {z} does not occur on the left")),
            Some((_, j)) if *j != k => {
                v.fail(&r.name, Position::root(), format!("meta-variable {z} used with arities {j} and {k}"))
            }
            _ => {}
        }
    }
    if let Some(node) = meta_only_cycle(&r.rhs) {
        let z = match r.rhs.node(node) {
            Node::Meta(z, _) => z.to_string(),
            _ => String::new(),
        };
        v.fail(&r.name, Position::root(), format!("right-hand side has an infinite chain of meta-variables through {z}"));
    }
    v
}

pub fn check_left_linear(sys: &RewriteSystem) -> Verdict {
    let mut v = Verdict::pass();
    for r in &sys.rules {
        let mut seen: HashMap<&Name, &Position> = HashMap::new();
        for s in r.meta_sites() {
            if let Some(p) = seen.get(&s.meta) {
                v.fail(&r.name, s.position.clone(), format!("{} occurs at {} and {}", s.meta, p, s.position));
            } else {
                seen.insert(&s.meta, &s.position);
            }
        }
    }
    v
}

pub fn check_fully_extended(sys: &RewriteSystem) -> Verdict {
    let mut v = Verdict::pass();
    for r in &sys.rules {
        walk_scoped(&r.lhs, |p, n, scope| {
            if let Node::Meta(z, cs) = r.lhs.node(n) {
                let args: Vec<&Name> = cs
                    .iter()
                    .filter_map(|&c| match r.lhs.node(c) {
                        Node::Var(x) => Some(x),
                        _ => None,
                    })
                    .collect();
                for x in scope {
                    if !args.contains(&x) {
                        v.fail(&r.name, p.clone(), format!("{z} is in the scope of [{x}] but does not receive {x}"));
                        break;
                    }
                }
            }
        });
    }
    v
}

/// Pairwise overlap search by pattern unification. Requires left-linearity.
pub fn check_orthogonal(sys: &RewriteSystem) -> Result<Verdict, SystemError> {
    if !check_left_linear(sys).passed() {
        return Err(SystemError::NotLeftLinear);
    }
    let mut v = Verdict::pass();
    for (i, ri) in sys.rules.iter().enumerate() {
        for (j, rj) in sys.rules.iter().enumerate() {
            for p in ri.pattern_positions() {
                if i == j && p.is_root() {
                    continue;
                }
                let a = node_at(&ri.lhs, p).unwrap();
                if matches!(ri.lhs.node(a), Node::Var(_)) {
                    continue;
                }
                let mut u = Unifier::default();
                if u.unify(&ri.lhs, a, &rj.lhs, Term::ROOT, &mut Vec::new()) {
                    v.witnesses.push(Witness {
                        rule: ri.name.clone(),
                        position: p.clone(),
                        reason: "left-hand sides overlap".to_string(),
                        other_rule: Some(rj.name.clone()),
                        unifier: u.assignment,
                    });
                }
            }
        }
    }
    Ok(v)
}

/// Unification of two linear patterns with disjoint meta-variables: each
/// meta-variable absorbs the opposite subterm subject to a scope check.
#[derive(Default)]
struct Unifier {
    assignment: Vec<(Name, String)>,
}

impl Unifier {
    fn unify(&mut self, l: &Term, a: usize, r: &Term, b: usize, binders: &mut Vec<(Name, Name)>) -> bool {
        match (l.node(a), r.node(b)) {
            (Node::Meta(z, xs), _) => {
                let params: Vec<Name> = xs.iter().filter_map(|&c| var_name(l, c)).collect();
                let ok = r.free_vars_at(b).iter().all(|y| match binders.iter().rev().find(|(_, q)| q == y) {
                    Some((p, _)) => params.contains(p),
                    None => true,
                });
                if ok {
                    self.assignment.push((z.clone(), format!("[{}]{}", params.join(","), r.at_node(b))));
                }
                ok
            }
            (_, Node::Meta(w, ys)) => {
                let params: Vec<Name> = ys.iter().filter_map(|&c| var_name(r, c)).collect();
                let ok = l.free_vars_at(a).iter().all(|x| match binders.iter().rev().find(|(p, _)| p == x) {
                    Some((_, q)) => params.contains(q),
                    None => true,
                });
                if ok {
                    self.assignment.push((w.clone(), format!("[{}]{}", params.join(","), l.at_node(a))));
                }
                ok
            }
            (Node::App(f, cs), Node::App(g, ds)) => {
                f == g && cs.len() == ds.len() && cs.iter().zip(ds).all(|(&c, &d)| self.unify(l, c, r, d, binders))
            }
            (Node::Abs(x, c), Node::Abs(y, d)) => {
                binders.push((x.clone(), y.clone()));
                let ok = self.unify(l, *c, r, *d, binders);
                binders.pop();
                ok
            }
            (Node::Var(x), Node::Var(y)) => {
                binders.iter().rev().find(|(p, _)| p == x).is_some_and(|(_, q)| q == y)
                    && binders.iter().rev().find(|(_, q)| q == y).is_some_and(|(p, _)| p == x)
            }
            _ => false,
        }
    }
}

fn var_name(t: &Term, n: usize) -> Option<Name> {
    match t.node(n) {
        Node::Var(x) => Some(x.clone()),
        _ => None,
    }
}

pub fn check_system(sys: &RewriteSystem) -> CheckReport {
    let mut rules = Verdict::pass();
    for r in &sys.rules {
        rules.witnesses.extend(check_rule(r).witnesses);
    }
    let ll = check_left_linear(sys);
    let fe = check_fully_extended(sys);
    let orth = match check_orthogonal(sys) {
        Ok(v) => v,
        Err(_) => {
            let mut v = Verdict::pass();
            v.fail(&name("*"), Position::root(), "not left-linear");
            v
        }
    };
    CheckReport {
        verdicts: vec![
            (CheckKind::Rules, rules),
            (CheckKind::LeftLinear, ll),
            (CheckKind::FullyExtended, fe),
            (CheckKind::Orthogonal, orth),
        ],
    }
}
