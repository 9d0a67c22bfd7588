//! Brute-force oracles on explicit finite trees with de Bruijn indices.
//!
//! Rational inputs are unfolded to a fixed depth; holes created by the cut carry
//! [`CUT`] so that results can be trusted only above the shallowest cut.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::rc::Rc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::devel::complete_development;
use crate::ops::is_prefix_set;
use crate::paths::{enumerate_paths, has_finite_jumps, project_path, RedexKey, RedexSet};
use crate::position::Position;
use crate::rewrite::find_redexes;
use crate::system::{check_system, RewriteSystem};
use crate::term::{base_name, fresh_token, Builder, Head, Name, Node, Term};

pub mod suites;

/// Mark carried by holes introduced by unfolding.
pub const CUT: u32 = 1 << 30;
/// Mark used for tracked positions.
pub const TRACK: u32 = 1 << 31;
const V_SHIFT: u32 = 8;
const MAX_TREE: usize = 20_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Shape {
    Bound(usize),
    Free(Name),
    Param(usize),
    Abs(Name, Tree),
    App(Name, Vec<Tree>),
    Meta(Name, Vec<Tree>),
    Hole,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub mark: u32,
    pub shape: Shape,
}

pub type Tree = Rc<Cell>;

fn mk(mark: u32, shape: Shape) -> Tree {
    Rc::new(Cell { mark, shape })
}

fn kids(t: &Tree) -> Vec<(usize, &Tree)> {
    match &t.shape {
        Shape::Abs(_, b) => vec![(0, b)],
        Shape::App(_, cs) | Shape::Meta(_, cs) => cs.iter().enumerate().map(|(i, c)| (i + 1, c)).collect(),
        _ => vec![],
    }
}

fn with_kids(t: &Tree, new: Vec<Tree>) -> Shape {
    match &t.shape {
        Shape::Abs(x, _) => Shape::Abs(x.clone(), new.into_iter().next().unwrap()),
        Shape::App(f, _) => Shape::App(f.clone(), new),
        Shape::Meta(z, _) => Shape::Meta(z.clone(), new),
        s => s.clone(),
    }
}

/// Unfold `t` into a tree, cutting at depth `depth`.
pub fn tree_of(t: &Term, depth: usize) -> Tree {
    fn go(t: &Term, n: usize, env: &mut Vec<Name>, left: usize) -> Tree {
        if left == 0 {
            return mk(CUT, Shape::Hole);
        }
        match t.node(n) {
            Node::Var(x) => match env.iter().rev().position(|y| y == x) {
                Some(i) => mk(0, Shape::Bound(i)),
                None => mk(0, Shape::Free(x.clone())),
            },
            Node::Abs(x, b) => {
                env.push(x.clone());
                let c = go(t, *b, env, left - 1);
                env.pop();
                mk(0, Shape::Abs(x.clone(), c))
            }
            Node::App(f, cs) => mk(0, Shape::App(f.clone(), cs.iter().map(|&c| go(t, c, env, left - 1)).collect())),
            Node::Meta(z, cs) => mk(0, Shape::Meta(z.clone(), cs.iter().map(|&c| go(t, c, env, left - 1)).collect())),
            Node::Hole => mk(0, Shape::Hole),
        }
    }
    go(t, Term::ROOT, &mut Vec::new(), depth)
}

/// Back to a term; marks are dropped.
pub fn term_of(t: &Tree) -> Term {
    fn go(t: &Tree, env: &mut Vec<Name>, b: &mut Builder) -> usize {
        let n = match &t.shape {
            Shape::Bound(i) => Node::Var(env[env.len() - 1 - i].clone()),
            Shape::Free(x) => Node::Var(x.clone()),
            Shape::Param(i) => Node::Var(crate::term::name(&format!("param{i}"))),
            Shape::Abs(x, c) => {
                let y = fresh_token(base_name(x));
                env.push(y.clone());
                let k = go(c, env, b);
                env.pop();
                Node::Abs(y, k)
            }
            Shape::App(f, cs) => Node::App(f.clone(), cs.iter().map(|c| go(c, env, b)).collect()),
            Shape::Meta(z, cs) => Node::Meta(z.clone(), cs.iter().map(|c| go(c, env, b)).collect()),
            Shape::Hole => Node::Hole,
        };
        b.add(n)
    }
    let mut b = Builder::new();
    let r = go(t, &mut Vec::new(), &mut b);
    b.finish(r)
}

pub fn subtree<'a>(t: &'a Tree, p: &Position) -> Option<&'a Tree> {
    let mut cur = t;
    for &i in p.steps() {
        cur = kids(cur).into_iter().find(|(j, _)| *j == i)?.1;
    }
    Some(cur)
}

fn replace(t: &Tree, steps: &[usize], new: Tree) -> Tree {
    match steps.split_first() {
        None => new,
        Some((&i, rest)) => {
            let ks: Vec<Tree> = kids(t).into_iter().map(|(j, c)| if j == i { replace(c, rest, new.clone()) } else { c.clone() }).collect();
            mk(t.mark, with_kids(t, ks))
        }
    }
}

fn add_mark(t: &Tree, p: &Position, bit: u32) -> Tree {
    match subtree(t, p) {
        Some(s) => replace(t, p.steps(), mk(s.mark | bit, s.shape.clone())),
        None => t.clone(),
    }
}

/// Drop all marks except [`CUT`].
pub fn strip(t: &Tree) -> Tree {
    let ks: Vec<Tree> = kids(t).into_iter().map(|(_, c)| strip(c)).collect();
    mk(t.mark & CUT, with_kids(t, ks))
}

/// Replace everything at depth `d` by a hole, dropping marks and binder names.
pub fn cut(t: &Tree, d: usize) -> Tree {
    if d == 0 {
        return mk(0, Shape::Hole);
    }
    let ks: Vec<Tree> = kids(t).into_iter().map(|(_, c)| cut(c, d - 1)).collect();
    match with_kids(t, ks) {
        Shape::Abs(_, b) => mk(0, Shape::Abs(crate::term::name("_"), b)),
        s => mk(0, s),
    }
}

fn visit(t: &Tree, p: &mut Vec<usize>, f: &mut impl FnMut(&Tree, &[usize])) {
    f(t, p);
    for (i, c) in kids(t) {
        p.push(i);
        visit(c, p, f);
        p.pop();
    }
}

/// Positions whose node carries any bit of `mask`, of length `<= max_len`.
pub fn marked(t: &Tree, mask: u32, max_len: usize) -> BTreeSet<Position> {
    let mut out = BTreeSet::new();
    visit(t, &mut Vec::new(), &mut |n, p| {
        if n.mark & mask != 0 && p.len() <= max_len {
            out.insert(Position::from_steps(p));
        }
    });
    out
}

/// Depth of the shallowest unfolding cut, `usize::MAX` if none.
pub fn first_cut(t: &Tree) -> usize {
    let mut best = usize::MAX;
    visit(t, &mut Vec::new(), &mut |n, p| {
        if n.mark & CUT != 0 {
            best = best.min(p.len());
        }
    });
    best
}

enum Match {
    Yes(BTreeMap<Name, Tree>),
    No,
    /// The pattern reaches an unfolding cut.
    Cut,
}

struct TreeRule {
    lhs: Tree,
    rhs: Tree,
}

/// Abstract the pattern-bound indices listed in `params` out of `t`.
fn abstract_params(t: &Tree, e: usize, d: usize, params: &HashMap<usize, usize>) -> Option<Tree> {
    let shape = match &t.shape {
        Shape::Bound(k) if *k < e => Shape::Bound(*k),
        Shape::Bound(k) => {
            let k2 = k - e;
            if k2 < d {
                Shape::Param(*params.get(&k2)?)
            } else {
                Shape::Bound(k - d)
            }
        }
        Shape::Abs(x, b) => Shape::Abs(x.clone(), abstract_params(b, e + 1, d, params)?),
        Shape::App(f, cs) => Shape::App(f.clone(), cs.iter().map(|c| abstract_params(c, e, d, params)).collect::<Option<_>>()?),
        Shape::Meta(z, cs) => Shape::Meta(z.clone(), cs.iter().map(|c| abstract_params(c, e, d, params)).collect::<Option<_>>()?),
        s => s.clone(),
    };
    Some(mk(t.mark, shape))
}

fn match_tree(p: &Tree, t: &Tree, d: usize, out: &mut BTreeMap<Name, Tree>) -> Match {
    if let Shape::Meta(z, args) = &p.shape {
        let mut params = HashMap::new();
        for (i, a) in args.iter().enumerate() {
            if let Shape::Bound(j) = a.shape {
                params.insert(j, i);
            }
        }
        return match abstract_params(t, 0, d, &params) {
            Some(body) => {
                out.insert(z.clone(), body);
                Match::Yes(BTreeMap::new())
            }
            None => Match::No,
        };
    }
    if matches!(t.shape, Shape::Hole) && t.mark & CUT != 0 {
        return Match::Cut;
    }
    let pairs: Vec<(&Tree, &Tree, usize)> = match (&p.shape, &t.shape) {
        (Shape::App(f, ps), Shape::App(g, ts)) if f == g && ps.len() == ts.len() => ps.iter().zip(ts).map(|(a, b)| (a, b, d)).collect(),
        (Shape::Abs(_, pb), Shape::Abs(_, tb)) => vec![(pb, tb, d + 1)],
        (Shape::Bound(j), Shape::Bound(k)) if j == k => vec![],
        (Shape::Free(x), Shape::Free(y)) if x == y => vec![],
        (Shape::Hole, Shape::Hole) => vec![],
        _ => return Match::No,
    };
    let mut cut = false;
    for (a, b, d2) in pairs {
        match match_tree(a, b, d2, out) {
            Match::No => return Match::No,
            Match::Cut => cut = true,
            Match::Yes(_) => {}
        }
    }
    if cut {
        Match::Cut
    } else {
        Match::Yes(BTreeMap::new())
    }
}

fn shift(t: &Tree, by: usize, c: usize) -> Tree {
    if by == 0 {
        return t.clone();
    }
    let shape = match &t.shape {
        Shape::Bound(k) if *k >= c => Shape::Bound(k + by),
        Shape::Abs(x, b) => Shape::Abs(x.clone(), shift(b, by, c + 1)),
        Shape::App(f, cs) => Shape::App(f.clone(), cs.iter().map(|x| shift(x, by, c)).collect()),
        Shape::Meta(z, cs) => Shape::Meta(z.clone(), cs.iter().map(|x| shift(x, by, c)).collect()),
        s => s.clone(),
    };
    mk(t.mark, shape)
}

fn plug(body: &Tree, args: &[Tree], r: usize, e: usize) -> Tree {
    let shape = match &body.shape {
        Shape::Bound(k) if *k < e => Shape::Bound(*k),
        Shape::Bound(k) => Shape::Bound(k + r),
        Shape::Param(i) => return shift(&args[*i], e, 0),
        Shape::Abs(x, b) => Shape::Abs(x.clone(), plug(b, args, r, e + 1)),
        Shape::App(f, cs) => Shape::App(f.clone(), cs.iter().map(|c| plug(c, args, r, e)).collect()),
        Shape::Meta(z, cs) => Shape::Meta(z.clone(), cs.iter().map(|c| plug(c, args, r, e)).collect()),
        s => s.clone(),
    };
    mk(body.mark, shape)
}

fn instantiate(rhs: &Tree, r: usize, val: &BTreeMap<Name, Tree>) -> Tree {
    match &rhs.shape {
        Shape::Meta(z, args) => {
            let a: Vec<Tree> = args.iter().map(|x| instantiate(x, r, val)).collect();
            plug(&val[z], &a, r, 0)
        }
        Shape::Abs(x, b) => mk(rhs.mark & CUT, Shape::Abs(x.clone(), instantiate(b, r + 1, val))),
        Shape::App(f, cs) => mk(rhs.mark & CUT, Shape::App(f.clone(), cs.iter().map(|c| instantiate(c, r, val)).collect())),
        s => mk(rhs.mark & CUT, s.clone()),
    }
}

/// A rewrite engine on marked trees.
pub struct Engine {
    rules: Vec<TreeRule>,
    pub depth: usize,
    pub height: usize,
}

impl Engine {
    pub fn new(sys: &RewriteSystem, depth: usize) -> Self {
        let rules = sys.rules.iter().map(|r| TreeRule { lhs: tree_of(&r.lhs, usize::MAX), rhs: tree_of(&r.rhs, depth) }).collect();
        Engine { rules, depth, height: sys.max_pattern_height() }
    }

    fn try_match(&self, rule: usize, t: &Tree, p: &Position) -> Match {
        let Some(s) = subtree(t, p) else { return Match::No };
        let mut val = BTreeMap::new();
        match match_tree(&self.rules[rule].lhs, s, 0, &mut val) {
            Match::Yes(_) => Match::Yes(val),
            m => m,
        }
    }

    pub fn matches(&self, rule: usize, t: &Tree, p: &Position) -> Option<bool> {
        match self.try_match(rule, t, p) {
            Match::Yes(_) => Some(true),
            Match::No => Some(false),
            Match::Cut => None,
        }
    }

    /// Contract; `None` if the rule does not (certainly) match.
    pub fn contract(&self, rule: usize, t: &Tree, p: &Position) -> Option<Tree> {
        match self.try_match(rule, t, p) {
            Match::Yes(val) => Some(replace(t, p.steps(), instantiate(&self.rules[rule].rhs, 0, &val))),
            _ => None,
        }
    }

    /// Redexes at depth `< window`, and whether a cut made some match undecidable.
    pub fn redexes(&self, t: &Tree, window: usize) -> (Vec<RedexKey>, bool) {
        let mut out = Vec::new();
        let mut unsure = false;
        visit(t, &mut Vec::new(), &mut |n, p| {
            if p.len() >= window {
                return;
            }
            if n.mark & CUT != 0 {
                unsure = true;
            }
            let pos = Position::from_steps(p);
            for r in 0..self.rules.len() {
                match self.matches(r, t, &pos) {
                    Some(true) => out.push((pos.clone(), r)),
                    Some(false) => {}
                    None => unsure = true,
                }
            }
        });
        (out, unsure)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("state space exceeded the cap of {0}")]
    Explosion(usize),
    #[error("step {index} ({rule} at {position}) does not apply")]
    StaleStep { index: usize, rule: usize, position: Position },
    #[error("more than 8 redexes or labels requested")]
    TooManyMarks,
}

/// One complete development order's end state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DevOutcome {
    pub tree: Tree,
    pub descendants: BTreeSet<Position>,
    pub residuals: BTreeSet<RedexKey>,
    /// Results are exact at positions shorter than this.
    pub reliable: usize,
}

#[derive(Debug, Clone)]
pub struct DevOrders {
    /// Distinct outcomes, compared above their reliable depth.
    pub outcomes: Vec<DevOutcome>,
    pub states: usize,
}

impl DevOrders {
    pub fn reliable(&self) -> usize {
        self.outcomes.iter().map(|o| o.reliable).min().unwrap_or(0)
    }

    pub fn terms(&self) -> Vec<Term> {
        self.outcomes.iter().map(|o| term_of(&o.tree)).collect()
    }
}

/// Explore every order of contracting residuals of `u` in `s`, tracking the
/// positions `track` and the redexes `other` along the way.
pub fn all_development_orders(
    s: &Term,
    sys: &RewriteSystem,
    u: &BTreeSet<RedexKey>,
    track: &BTreeSet<Position>,
    other: &BTreeSet<RedexKey>,
    cap: usize,
    depth: usize,
) -> Result<DevOrders, OracleError> {
    if u.len() > 8 || other.len() > 8 {
        return Err(OracleError::TooManyMarks);
    }
    let eng = Engine::new(sys, depth);
    let mut t = tree_of(s, depth);
    let urules: Vec<usize> = u.iter().map(|k| k.1).collect();
    let vrules: Vec<usize> = other.iter().map(|k| k.1).collect();
    for (i, (p, _)) in u.iter().enumerate() {
        t = add_mark(&t, p, 1 << i);
    }
    for (i, (p, _)) in other.iter().enumerate() {
        t = add_mark(&t, p, 1 << (V_SHIFT + i as u32));
    }
    for p in track {
        t = add_mark(&t, p, TRACK);
    }
    let mut seen: HashSet<Tree> = HashSet::new();
    let mut stack = vec![t];
    let mut finals: Vec<DevOutcome> = Vec::new();
    while let Some(t) = stack.pop() {
        if !seen.insert(t.clone()) {
            continue;
        }
        if seen.len() > cap {
            return Err(OracleError::Explosion(cap));
        }
        let mut next = Vec::new();
        let mut reliable = first_cut(&t);
        visit(&t, &mut Vec::new(), &mut |n, p| {
            for (i, &r) in urules.iter().enumerate() {
                if n.mark & (1 << i) != 0 {
                    let pos = Position::from_steps(p);
                    match eng.matches(r, &t, &pos) {
                        Some(true) => next.push((r, pos)),
                        Some(false) => {}
                        None => reliable = reliable.min(p.len()),
                    }
                }
            }
        });
        next.sort();
        next.dedup();
        if next.is_empty() {
            let mut residuals = BTreeSet::new();
            visit(&t, &mut Vec::new(), &mut |n, p| {
                for (i, &r) in vrules.iter().enumerate() {
                    if n.mark & (1 << (V_SHIFT + i as u32)) != 0 {
                        let pos = Position::from_steps(p);
                        match eng.matches(r, &t, &pos) {
                            Some(true) => {
                                residuals.insert((pos, r));
                            }
                            Some(false) => {}
                            None => reliable = reliable.min(p.len()),
                        }
                    }
                }
            });
            let residuals = residuals.into_iter().filter(|(p, _)| p.len() < reliable).collect();
            let descendants = marked(&t, TRACK, reliable.saturating_sub(1));
            let out = DevOutcome { tree: strip(&t), descendants, residuals, reliable };
            if !finals.iter().any(|o| same_outcome(o, &out)) {
                finals.push(out);
            }
            continue;
        }
        for (r, p) in next {
            if let Some(n) = eng.contract(r, &t, &p) {
                stack.push(n);
            }
        }
    }
    Ok(DevOrders { outcomes: finals, states: seen.len() })
}

/// Develop every redex above `depth` in the unfolded tree, one shared mark for
/// all of them; returns the depth above which the result is determined,
/// `None` past the fuel or the tree size cap.
pub fn develop_all_reliable(s: &Term, sys: &RewriteSystem, depth: usize, fuel: usize) -> Option<usize> {
    let eng = Engine::new(sys, depth);
    let mut t = tree_of(s, depth);
    for r in crate::rewrite::find_redexes(s, sys, depth) {
        t = add_mark(&t, &r.position, 1);
    }
    for _ in 0..fuel {
        let mut next = None;
        let mut reliable = first_cut(&t);
        let mut size = 0;
        visit(&t, &mut Vec::new(), &mut |n, p| {
            size += 1;
            if n.mark & 1 == 0 || next.is_some() {
                return;
            }
            for r in 0..sys.rules.len() {
                match eng.matches(r, &t, &Position::from_steps(p)) {
                    Some(true) => {
                        next = Some((r, Position::from_steps(p)));
                        break;
                    }
                    Some(false) => {}
                    None => reliable = reliable.min(p.len()),
                }
            }
        });
        if size > MAX_TREE {
            return None;
        }
        match next {
            Some((r, p)) => t = eng.contract(r, &t, &p)?,
            None => return Some(reliable),
        }
    }
    None
}

/// One complete development, contracting the first residual in position order.
pub fn labelled_development(s: &Term, sys: &RewriteSystem, u: &BTreeSet<RedexKey>, track: &BTreeSet<Position>, depth: usize, fuel: usize) -> Option<DevOutcome> {
    let eng = Engine::new(sys, depth);
    let mut t = tree_of(s, depth);
    let urules: Vec<usize> = u.iter().map(|k| k.1).collect();
    if urules.len() > 8 {
        return None;
    }
    for (i, (p, _)) in u.iter().enumerate() {
        t = add_mark(&t, p, 1 << i);
    }
    for p in track {
        t = add_mark(&t, p, TRACK);
    }
    for _ in 0..fuel {
        let mut next = None;
        let mut reliable = first_cut(&t);
        visit(&t, &mut Vec::new(), &mut |n, p| {
            for (i, &r) in urules.iter().enumerate() {
                if n.mark & (1 << i) != 0 {
                    let pos = Position::from_steps(p);
                    match eng.matches(r, &t, &pos) {
                        Some(true) => {
                            if next.is_none() {
                                next = Some((r, pos));
                            }
                        }
                        Some(false) => {}
                        None => reliable = reliable.min(p.len()),
                    }
                }
            }
        });
        match next {
            Some((r, p)) => t = eng.contract(r, &t, &p)?,
            None => {
                let descendants = marked(&t, TRACK, reliable.saturating_sub(1));
                return Some(DevOutcome { tree: strip(&t), descendants, residuals: BTreeSet::new(), reliable });
            }
        }
    }
    None
}

fn same_outcome(a: &DevOutcome, b: &DevOutcome) -> bool {
    let d = a.reliable.min(b.reliable);
    let lim = |s: &BTreeSet<Position>| s.iter().filter(|p| p.len() < d).cloned().collect::<BTreeSet<_>>();
    let limr = |s: &BTreeSet<RedexKey>| s.iter().filter(|p| p.0.len() < d).cloned().collect::<BTreeSet<_>>();
    cut(&a.tree, d) == cut(&b.tree, d) && lim(&a.descendants) == lim(&b.descendants) && limr(&a.residuals) == limr(&b.residuals)
}

/// Whether `t` agrees with the tree `o` above depth `d` (up to α).
pub fn agrees_above(t: &Term, o: &Tree, d: usize) -> bool {
    let depth = d.saturating_add(1).min(64);
    cut(&tree_of(t, depth), d) == cut(o, d)
}

/// Label `ps`, replay the steps, and read off the labelled positions of length `<= max_len`.
pub fn brute_descendants(
    s: &Term,
    sys: &RewriteSystem,
    ps: &BTreeSet<Position>,
    steps: &[(usize, Position)],
    depth: usize,
    max_len: usize,
) -> Result<(BTreeSet<Position>, usize), OracleError> {
    let eng = Engine::new(sys, depth);
    let mut t = tree_of(s, depth);
    for p in ps {
        t = add_mark(&t, p, TRACK);
    }
    for (i, (r, p)) in steps.iter().enumerate() {
        t = eng.contract(*r, &t, p).ok_or(OracleError::StaleStep { index: i, rule: *r, position: p.clone() })?;
    }
    let reliable = first_cut(&t);
    Ok((marked(&t, TRACK, max_len.min(reliable.saturating_sub(1))), reliable))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Neededness {
    Needed,
    /// A reduction to a depth-bounded normal form avoiding every residual.
    NotNeeded(Vec<(usize, Position)>),
    Unknown,
}

impl fmt::Display for Neededness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Neededness::Needed => write!(f, "needed"),
            Neededness::NotNeeded(w) => {
                let ws: Vec<String> = w.iter().map(|(r, p)| format!("{r}@{p}")).collect();
                write!(f, "not needed, witness [{}]", ws.join(", "))
            }
            Neededness::Unknown => write!(f, "unknown"),
        }
    }
}

/// Search for a reduction from `t` to a term without redexes at depth
/// `< depth + H` that never contracts a residual of `u`.
pub fn brute_needed(u: &RedexKey, t: &Term, sys: &RewriteSystem, depth: usize, max_states: usize) -> Neededness {
    let window = depth + sys.max_pattern_height();
    let eng = Engine::new(sys, window + 2 * eng_height(sys) + 6);
    let start = add_mark(&tree_of(t, eng.depth), &u.0, 1);
    let mut parent: HashMap<Tree, Option<(Tree, (usize, Position))>> = HashMap::new();
    parent.insert(start.clone(), None);
    let mut queue = VecDeque::from([start]);
    let mut unsure = false;
    while let Some(s) = queue.pop_front() {
        if parent.len() > max_states {
            return Neededness::Unknown;
        }
        let (rs, cutoff) = eng.redexes(&s, window);
        if cutoff {
            unsure = true;
        }
        if rs.is_empty() && !cutoff {
            let mut w = Vec::new();
            let mut cur = s;
            while let Some(Some((prev, step))) = parent.get(&cur).cloned() {
                w.push(step);
                cur = prev;
            }
            w.reverse();
            return Neededness::NotNeeded(w);
        }
        for (p, r) in rs {
            let is_res = r == u.1 && subtree(&s, &p).is_some_and(|n| n.mark & 1 != 0);
            if is_res {
                continue;
            }
            if let Some(n) = eng.contract(r, &s, &p) {
                if !parent.contains_key(&n) {
                    parent.insert(n.clone(), Some((s.clone(), (r, p))));
                    queue.push_back(n);
                }
            }
        }
    }
    if unsure {
        Neededness::Unknown
    } else {
        Neededness::Needed
    }
}

fn eng_height(sys: &RewriteSystem) -> usize {
    sys.max_pattern_height() + 1
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhiVerdict {
    pub paths: usize,
    pub maximal: usize,
    /// Pairs of distinct paths with equal projections.
    pub collisions: usize,
    /// Maximal-path projections that disagree with the brute-force target.
    pub mismatches: usize,
}

impl PhiVerdict {
    pub fn passed(&self) -> bool {
        self.collisions == 0 && self.mismatches == 0
    }
}

fn head_agrees(h: &Head, t: &Tree) -> bool {
    match (h, &t.shape) {
        (Head::Sym(f), Shape::App(g, _)) => f == g,
        (Head::Abs(_), Shape::Abs(..)) => true,
        (Head::Var(_), Shape::Bound(_)) => true,
        (Head::Var(x), Shape::Free(y)) => x == y,
        (Head::Hole, Shape::Hole) => true,
        _ => false,
    }
}

/// Injectivity of path projection, and agreement of maximal projections with
/// the target computed by stepwise development.
pub fn phi_injectivity_check(s: &Term, sys: &RewriteSystem, u: &RedexSet, budget: usize) -> PhiVerdict {
    let paths = enumerate_paths(s, sys, u, budget);
    let mut seen: HashMap<_, usize> = HashMap::new();
    let mut collisions = 0;
    for p in &paths {
        let c = seen.entry(project_path(p)).or_insert(0);
        if *c > 0 {
            collisions += 1;
        }
        *c += 1;
    }
    let mut mismatches = 0;
    let maximal: Vec<_> = paths.iter().filter(|p| !p.cut).collect();
    if let RedexSet::Finite(keys) = u {
        let depth = budget.clamp(8, 12);
        if let Ok(orders) = all_development_orders(s, sys, keys, &BTreeSet::new(), &BTreeSet::new(), 2_000, depth) {
            if let Some(o) = orders.outcomes.first() {
                for p in &maximal {
                    let mut w: Vec<usize> = Vec::new();
                    for (i, l) in p.labels.iter().enumerate() {
                        if i > 0 {
                            if let Some(k) = p.edges[i - 1] {
                                w.push(k);
                            }
                        }
                        let Some(h) = l else { continue };
                        if w.len() >= o.reliable {
                            break;
                        }
                        if !subtree(&o.tree, &Position(w.clone())).is_some_and(|n| head_agrees(h, n)) {
                            mismatches += 1;
                            break;
                        }
                    }
                }
            }
        }
    }
    PhiVerdict { paths: paths.len(), maximal: maximal.len(), collisions, mismatches }
}

/// Outcome of an oracle run over many instances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleReport {
    pub claim: String,
    pub instances: usize,
    pub agreements: usize,
    pub skipped: usize,
    pub disagreement: Option<String>,
}

impl OracleReport {
    pub fn new(claim: &str) -> Self {
        OracleReport { claim: claim.into(), instances: 0, agreements: 0, skipped: 0, disagreement: None }
    }

    pub fn record(&mut self, ok: bool, witness: impl FnOnce() -> String) {
        self.instances += 1;
        if ok {
            self.agreements += 1;
        } else if self.disagreement.is_none() {
            self.disagreement = Some(witness());
        }
    }

    pub fn skip(&mut self) {
        self.skipped += 1;
    }

    pub fn passed(&self) -> bool {
        self.disagreement.is_none()
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}/{} agree, {} skipped", self.claim, self.agreements, self.instances, self.skipped)?;
        if let Some(w) = &self.disagreement {
            write!(f, "; first disagreement: {w}")?;
        }
        Ok(())
    }
}

/// A random orthogonal, fully extended system with a term and a finite redex set.
#[derive(Debug, Clone)]
pub struct Instance {
    pub seed: u64,
    pub source: String,
    pub sys: RewriteSystem,
    pub term: Term,
    pub set: BTreeSet<RedexKey>,
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let set: Vec<String> = self.set.iter().map(|(p, r)| format!("{}@{p}", self.sys.rules[*r].name)).collect();
        write!(f, "seed {}: {} | {} | {{{}}}", self.seed, self.source.replace('\n', " "), self.term, set.join(", "))
    }
}

#[derive(Clone, Debug)]
enum ArgPat {
    Plain,
    Binder,
    Cons(&'static str, usize),
}

struct Gen {
    rng: ChaCha8Rng,
    /// defined symbol -> argument patterns
    defs: Vec<(String, Vec<ArgPat>)>,
    rational: bool,
}

const CONSTRUCTORS: [(&str, usize); 4] = [("a", 0), ("b", 0), ("k", 1), ("p", 2)];

impl Gen {
    fn rhs(&mut self, metas: &[(String, usize)], scope: &mut Vec<String>, depth: usize) -> String {
        let r = self.rng.gen_range(0..10);
        if depth == 0 || r < 3 {
            if !scope.is_empty() && self.rng.gen_bool(0.3) {
                return scope.choose(&mut self.rng).unwrap().clone();
            }
            if !metas.is_empty() && self.rng.gen_bool(0.7) {
                let (z, n) = metas.choose(&mut self.rng).unwrap().clone();
                return self.meta_app(&z, n, metas, scope, depth.saturating_sub(1));
            }
            return ["a", "b"].choose(&mut self.rng).unwrap().to_string();
        }
        match r {
            3..=4 if !metas.is_empty() => {
                let (z, n) = metas.choose(&mut self.rng).unwrap().clone();
                self.meta_app(&z, n, metas, scope, depth - 1)
            }
            5 => {
                let x = format!("y{}", scope.len());
                scope.push(x.clone());
                let body = self.rhs(metas, scope, depth - 1);
                scope.pop();
                format!("lam([{x}]{body})")
            }
            6 => {
                let i = self.rng.gen_range(0..self.defs.len());
                let (f, pats) = self.defs[i].clone();
                let args: Vec<String> = pats.iter().map(|pt| self.rhs_arg(pt, metas, scope, depth - 1)).collect();
                format!("{f}({})", args.join(", "))
            }
            _ => {
                let (c, n) = CONSTRUCTORS[self.rng.gen_range(2..4)];
                let args: Vec<String> = (0..n).map(|_| self.rhs(metas, scope, depth - 1)).collect();
                format!("{c}({})", args.join(", "))
            }
        }
    }

    fn rhs_arg(&mut self, pt: &ArgPat, metas: &[(String, usize)], scope: &mut Vec<String>, depth: usize) -> String {
        match pt {
            ArgPat::Binder => {
                let x = format!("y{}", scope.len());
                scope.push(x.clone());
                let body = self.rhs(metas, scope, depth);
                scope.pop();
                format!("[{x}]{body}")
            }
            _ => self.rhs(metas, scope, depth),
        }
    }

    fn meta_app(&mut self, z: &str, n: usize, metas: &[(String, usize)], scope: &mut Vec<String>, depth: usize) -> String {
        if n == 0 {
            return z.to_string();
        }
        let args: Vec<String> = (0..n).map(|_| self.rhs(metas, scope, depth.min(1))).collect();
        format!("{z}({})", args.join(", "))
    }

    fn system(&mut self) -> String {
        let nd = self.rng.gen_range(1..=3);
        self.defs.clear();
        for i in 0..nd {
            let arity = self.rng.gen_range(1..=2);
            let pats = (0..arity)
                .map(|_| match self.rng.gen_range(0..6) {
                    0..=2 => ArgPat::Plain,
                    3 => ArgPat::Binder,
                    4 => ArgPat::Cons("k", 1),
                    _ => ArgPat::Cons("p", 2),
                })
                .collect();
            self.defs.push(([ "f", "g", "h" ][i].to_string(), pats));
        }
        let mut out = String::new();
        for (f, pats) in self.defs.clone() {
            let mut metas: Vec<(String, usize)> = Vec::new();
            let mut args = Vec::new();
            for pt in &pats {
                let z = format!("Z{}", metas.len());
                match pt {
                    ArgPat::Plain => {
                        args.push(z.clone());
                        metas.push((z, 0));
                    }
                    ArgPat::Binder => {
                        args.push(format!("[x]{z}(x)"));
                        metas.push((z, 1));
                    }
                    ArgPat::Cons(c, n) => {
                        let zs: Vec<String> = (0..*n).map(|j| format!("{z}_{j}")).collect();
                        for q in &zs {
                            metas.push((q.clone(), 0));
                        }
                        args.push(format!("{c}({})", zs.join(", ")));
                    }
                }
            }
            let rhs = if self.rational && self.rng.gen_bool(0.15) {
                let inner = self.rhs(&metas, &mut Vec::new(), 1);
                format!("rec W. p({inner}, W)")
            } else {
                let d = self.rng.gen_range(0..=3);
                self.rhs(&metas, &mut Vec::new(), d)
            };
            out.push_str(&format!("rule {f}: {f}({}) -> {rhs};\n", args.join(", ")));
        }
        out
    }

    fn term(&mut self, scope: &mut Vec<String>, depth: usize, rec: &Option<String>) -> String {
        let r = self.rng.gen_range(0..10);
        if depth == 0 || r < 2 {
            if let Some(v) = rec {
                if self.rng.gen_bool(0.5) {
                    return v.clone();
                }
            }
            if !scope.is_empty() && self.rng.gen_bool(0.5) {
                return scope.choose(&mut self.rng).unwrap().clone();
            }
            return ["a", "b"].choose(&mut self.rng).unwrap().to_string();
        }
        if r < 6 {
            let i = self.rng.gen_range(0..self.defs.len());
            let (f, pats) = self.defs[i].clone();
            let args: Vec<String> = pats
                .iter()
                .map(|pt| match pt {
                    ArgPat::Binder => {
                        let x = format!("x{}", scope.len());
                        scope.push(x.clone());
                        let b = self.term(scope, depth - 1, rec);
                        scope.pop();
                        format!("[{x}]{b}")
                    }
                    ArgPat::Cons(c, n) if self.rng.gen_bool(0.8) => {
                        let a: Vec<String> = (0..*n).map(|_| self.term(scope, depth.saturating_sub(2), rec)).collect();
                        format!("{c}({})", a.join(", "))
                    }
                    _ => self.term(scope, depth - 1, rec),
                })
                .collect();
            return format!("{f}({})", args.join(", "));
        }
        if r == 6 {
            let x = format!("x{}", scope.len());
            scope.push(x.clone());
            let b = self.term(scope, depth - 1, rec);
            scope.pop();
            return format!("lam([{x}]{b})");
        }
        let (c, n) = CONSTRUCTORS[self.rng.gen_range(2..4)];
        let args: Vec<String> = (0..n).map(|_| self.term(scope, depth - 1, rec)).collect();
        format!("{c}({})", args.join(", "))
    }
}

/// Random instance for `seed`; deterministic. One in four terms is cyclic.
pub fn random_instance(seed: u64, max_set: usize) -> Instance {
    let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(seed), defs: Vec::new(), rational: seed.is_multiple_of(3) };
    loop {
        let source = g.system();
        let Ok(sys) = RewriteSystem::parse(&source) else { continue };
        if !check_system(&sys).passed() {
            continue;
        }
        for _ in 0..20 {
            let cyclic = g.rng.gen_bool(0.25);
            let rec = cyclic.then(|| "T".to_string());
            let body = g.term(&mut Vec::new(), 4, &rec);
            let src = if cyclic { format!("rec T. p(a, {body})") } else { body };
            let Ok(term) = crate::parse_term(&src) else { continue };
            if sys.check_term_signature(&term).is_err() {
                continue;
            }
            let rs: Vec<RedexKey> = find_redexes(&term, &sys, 5).into_iter().map(|r| r.key()).collect();
            if rs.is_empty() {
                continue;
            }
            let k = g.rng.gen_range(1..=max_set.min(rs.len()));
            let set: BTreeSet<RedexKey> = rs.choose_multiple(&mut g.rng, k).cloned().collect();
            return Instance { seed, source, sys, term, set };
        }
    }
}

/// A random prefix set of `t` of positions above depth `max_depth`.
pub fn random_prefix_set(rng: &mut impl Rng, t: &Term, max_depth: usize) -> BTreeSet<Position> {
    let mut out = BTreeSet::new();
    if rng.gen_bool(0.1) {
        return out;
    }
    out.insert(Position::root());
    let mut frontier = vec![Position::root()];
    while let Some(p) = frontier.pop() {
        if p.len() + 1 >= max_depth.max(1) {
            continue;
        }
        let Some(n) = crate::ops::node_at(t, &p) else { continue };
        for (i, _) in t.node(n).steps() {
            if rng.gen_bool(0.6) {
                let q = p.child(i);
                out.insert(q.clone());
                frontier.push(q);
            }
        }
    }
    debug_assert!(is_prefix_set(&out, t));
    out
}

/// `has_finite_jumps` against complete development success.
/// A jump cycle leaves some position undetermined however deep the unfolding;
/// `None` when the oracle runs out of fuel.
fn jump_stall(s: &Term, sys: &RewriteSystem) -> Option<bool> {
    let lo = develop_all_reliable(s, sys, 8, 2000)?;
    let hi = develop_all_reliable(s, sys, 12, 2000)?;
    Some(hi != usize::MAX && hi <= lo)
}

pub fn fjp_witness_suite(seed: u64, instances: usize) -> OracleReport {
    let mut rep = OracleReport::new("finite jumps iff complete development exists");
    let curated = [
        ("rule f: f(Z) -> Z;", "rec F. f(F)", false),
        ("rule f: f(Z) -> Z; rule g: g(Z) -> Z;", "rec F. f(g(F))", false),
        ("rule f: f(Z, W) -> Z;", "rec F. f(F, a)", false),
        ("rule beta: app(abs([x]Z(x)), W) -> Z(W);", "rec F. app(abs([x]x), F)", false),
        ("rule f: f(Z) -> Z;", "rec F. h(f(F))", true),
        ("rule f: f(Z) -> g(Z);", "rec F. f(F)", true),
        ("rule f: f(Z, W) -> W;", "rec F. f(F, a)", true),
    ];
    for (rules, term, expect) in curated {
        let sys = RewriteSystem::parse(rules).unwrap();
        let s = crate::parse_term(term).unwrap();
        let fjp = has_finite_jumps(&s, &sys, &RedexSet::All);
        let dev = complete_development(&s, &sys, &RedexSet::All).is_ok();
        let stalled = jump_stall(&s, &sys);
        rep.record(fjp == expect && dev == expect && stalled == Some(!expect), || {
            format!("{term} with all redexes: finite jumps {fjp}, development {dev}, oracle stall {stalled:?}, expected {expect}")
        });
        rep.record(has_finite_jumps(&s, &sys, &RedexSet::empty()), || format!("{term} with no redexes lacks finite jumps"));
    }
    for i in 0..instances as u64 {
        let inst = random_instance(seed.wrapping_add(i), 4);
        let set = RedexSet::Finite(inst.set.clone());
        let fjp = has_finite_jumps(&inst.term, &inst.sys, &set);
        let dev = complete_development(&inst.term, &inst.sys, &set).is_ok();
        rep.record(fjp && dev, || format!("{inst}: finite jumps {fjp}, development {dev}"));
        let fjp = has_finite_jumps(&inst.term, &inst.sys, &RedexSet::All);
        let dev = complete_development(&inst.term, &inst.sys, &RedexSet::All).is_ok();
        match jump_stall(&inst.term, &inst.sys) {
            Some(st) => rep.record(fjp == dev && fjp != st, || format!("{inst} with all redexes: finite jumps {fjp}, development {dev}, oracle stall {st}")),
            None => rep.record(fjp == dev, || format!("{inst} with all redexes: finite jumps {fjp}, development {dev}")),
        }
    }
    rep
}

/// Deterministic generator for callers that need extra randomness per instance.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{alpha_eq, parse_term};

    fn t(s: &str) -> Term {
        parse_term(s).unwrap()
    }

    fn pos(s: &str) -> Position {
        s.parse().unwrap()
    }

    #[test]
    fn tree_round_trip() {
        for s in ["f([x]g(x), a)", "lam([x]lam([y]p(x, y)))", "rec F. f(F)"] {
            let tr = tree_of(&t(s), 6);
            let back = term_of(&tr);
            assert!(alpha_eq(&truncate_like(&t(s), 6), &back), "{s} {back}");
        }
    }

    fn truncate_like(t: &Term, d: usize) -> Term {
        crate::ops::truncate(t, d)
    }

    #[test]
    fn development_orders() {
        let sys = RewriteSystem::parse("rule p: p(Z) -> q(Z); rule a: a -> b;").unwrap();
        let s = t("p(a)");
        let u = BTreeSet::from([(Position::root(), 0), (pos("1"), 1)]);
        let o = all_development_orders(&s, &sys, &u, &BTreeSet::new(), &BTreeSet::new(), 100, 10).unwrap();
        assert_eq!(o.outcomes.len(), 1);
        assert!(alpha_eq(&o.terms()[0], &t("q(b)")));
        let o = all_development_orders(&s, &sys, &BTreeSet::new(), &BTreeSet::new(), &BTreeSet::new(), 100, 10).unwrap();
        assert!(alpha_eq(&o.terms()[0], &s));

        let sys = RewriteSystem::parse("rule r: f([x]Z(x), Z') -> Z(g(Z(Z')));").unwrap();
        let o = all_development_orders(&t("f([x]g(x), a)"), &sys, &BTreeSet::from([(Position::root(), 0)]), &BTreeSet::new(), &BTreeSet::new(), 100, 10).unwrap();
        assert!(alpha_eq(&o.terms()[0], &t("g(g(g(a)))")));
    }

    #[test]
    fn descendants_by_labels() {
        let sys = RewriteSystem::parse("rule f: f([x]Z(x)) -> Z(Z(a)); rule g: g(Z) -> h(Z);").unwrap();
        let s = t("g(f([x]g(g(x))))");
        let (d, _) = brute_descendants(&s, &sys, &BTreeSet::from([pos("1101")]), &[(0, pos("1"))], 12, 8).unwrap();
        assert_eq!(d.len(), 2);
        let (d, _) = brute_descendants(&s, &sys, &BTreeSet::from([pos("1")]), &[(0, pos("1"))], 12, 8).unwrap();
        assert!(d.is_empty());
        let (d, _) = brute_descendants(&s, &sys, &BTreeSet::from([Position::root()]), &[(1, Position::root())], 12, 8).unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn neededness() {
        let sys = RewriteSystem::parse("rule f: f(X, Y) -> g(X, f(X, Y)); rule a: a -> b; rule c: c -> c;").unwrap();
        let s = t("f(a, c)");
        assert_eq!(brute_needed(&(Position::root(), 0), &s, &sys, 2, 5000), Neededness::Needed);
        assert_eq!(brute_needed(&(pos("1"), 1), &s, &sys, 2, 5000), Neededness::Needed);
        assert!(matches!(brute_needed(&(pos("2"), 2), &s, &sys, 2, 5000), Neededness::NotNeeded(_)));
    }

    #[test]
    fn phi_examples() {
        let sys = RewriteSystem::parse("rule r: f([x]Z(x), Z') -> Z(g(Z(Z')));").unwrap();
        let s = t("f([x]g(x), a)");
        let v = phi_injectivity_check(&s, &sys, &RedexSet::of([(Position::root(), 0)]), 20);
        assert!(v.passed(), "{v:?}");
        assert!(phi_injectivity_check(&s, &sys, &RedexSet::empty(), 20).passed());
    }

    #[test]
    fn fjp_suite() {
        let t0 = std::time::Instant::now();
        let r = fjp_witness_suite(7, 220);
        eprintln!("{r} in {:?}", t0.elapsed());
        assert!(r.passed(), "{r}");
    }

    #[test]
    fn instances_are_deterministic() {
        let a = random_instance(42, 4);
        let b = random_instance(42, 4);
        assert_eq!(a.source, b.source);
        assert_eq!(a.term, b.term);
        assert_eq!(a.set, b.set);
        assert!(!a.set.is_empty());
    }
}
