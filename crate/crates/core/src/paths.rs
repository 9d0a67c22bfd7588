//! Paths through a term and the right-hand sides of a set of redexes.
//!
//! A path state either sits at a node of the source term or at a node of the
//! right-hand side of a redex being developed. A state is unlabelled when it is a
//! redex of the set, a variable bound by such a redex, or a meta-variable of a
//! right-hand side; unlabelled states have exactly one successor, reached by an
//! unlabelled edge. The state graph is finite for rational terms when positions
//! are abstracted away, which makes the finite jumps property and the target term
//! decidable.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use crate::ops::node_at;
use crate::position::Position;
use crate::rewrite::match_node;
use crate::system::RewriteSystem;
use crate::term::{fresh_token, Builder, Head, Name, Node, Term};

/// A redex identified by position and rule index.
pub type RedexKey = (Position, usize);

/// The redexes being developed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RedexSet {
    Finite(BTreeSet<RedexKey>),
    /// Every redex of the term.
    All,
}

impl RedexSet {
    pub fn empty() -> Self {
        RedexSet::Finite(BTreeSet::new())
    }

    pub fn of(keys: impl IntoIterator<Item = RedexKey>) -> Self {
        RedexSet::Finite(keys.into_iter().collect())
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, RedexSet::Finite(_))
    }

    pub fn finite(&self) -> Option<&BTreeSet<RedexKey>> {
        match self {
            RedexSet::Finite(s) => Some(s),
            RedexSet::All => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, RedexSet::Finite(s) if s.is_empty())
    }
}

impl fmt::Display for RedexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RedexSet::All => write!(f, "all"),
            RedexSet::Finite(s) => {
                let v: Vec<String> = s.iter().map(|(p, _)| p.to_string()).collect();
                write!(f, "{{{}}}", v.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PathError {
    #[error("the redex set does not have the finite jumps property")]
    FiniteJumpsViolated,
    #[error("no redex at {0}")]
    NotARedex(Position),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) enum Bind {
    /// Bound by an abstraction of the source term that is not part of a developed pattern.
    Bound,
    /// Bound by a developed redex: jump into its right-hand side.
    Param(RuleRef),
}

pub(crate) type PEnv = Vec<(Name, Bind)>;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) struct RuleRef {
    pub frame: usize,
    pub rhs_node: usize,
    pub rhs_pos: Option<Position>,
}

/// One visit of a developed redex.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) struct Frame {
    pub rule: usize,
    pub node: usize,
    pub pos: Option<Position>,
    pub env: PEnv,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) enum PState {
    Term { node: usize, pos: Option<Position>, env: PEnv },
    Rule(RuleRef),
}

/// A path node as printed: `(s,p)` or `(r,p,pos(u))`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PathNode {
    Term(Position),
    Rule { rule: usize, rhs_pos: Position, redex_pos: Position },
}

/// A finite path: `nodes.len() == edges.len() + 1`; `None` edges are unlabelled.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path {
    pub nodes: Vec<PathNode>,
    pub edges: Vec<Option<usize>>,
    /// Node labels of the projection; `None` for unlabelled nodes.
    pub labels: Vec<Option<Head>>,
    /// True when the listing stopped at the budget rather than at a leaf.
    pub cut: bool,
}

/// The image of a path under the projection: labels and edge labels only.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathProjection {
    pub labels: Vec<Option<Head>>,
    pub edges: Vec<Option<usize>>,
}

impl PathProjection {
    /// Concatenated edge labels.
    pub fn word(&self) -> Position {
        Position(self.edges.iter().flatten().copied().collect())
    }
}

impl fmt::Display for PathProjection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.labels.iter().enumerate() {
            if i > 0 {
                match self.edges[i - 1] {
                    Some(k) => write!(f, " -{k}-> ")?,
                    None => write!(f, " -e-> ")?,
                }
            }
            match l {
                Some(h) => write!(f, "{h}")?,
                None => write!(f, ".")?,
            }
        }
        Ok(())
    }
}

pub fn project_path(p: &Path) -> PathProjection {
    PathProjection { labels: p.labels.clone(), edges: p.edges.clone() }
}

impl Path {
    pub fn word(&self) -> Position {
        Position(self.edges.iter().flatten().copied().collect())
    }

    /// `(s,10) -1-> (s,101) -e-> (r,1,@)`, with `term` naming the source.
    pub fn render(&self, term: &str, sys: &RewriteSystem) -> String {
        let mut out = String::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if i > 0 {
                match self.edges[i - 1] {
                    Some(k) => out.push_str(&format!(" -{k}-> ")),
                    None => out.push_str(" -e-> "),
                }
            }
            match n {
                PathNode::Term(p) => out.push_str(&format!("({term},{})", p.compact())),
                PathNode::Rule { rule, rhs_pos, redex_pos } => out.push_str(&format!(
                    "({},{},{})",
                    sys.rules[*rule].name,
                    rhs_pos.compact(),
                    redex_pos.compact()
                )),
            }
        }
        if self.cut {
            out.push_str(" ...");
        }
        out
    }
}

/// Successor structure of the path graph of `s` with respect to a redex set.
pub(crate) struct PathSpace<'a> {
    pub s: &'a Term,
    pub sys: &'a RewriteSystem,
    set: &'a RedexSet,
    /// Keep every position (for listing) or only those that can still reach a member of the set.
    concrete: bool,
    frames: Vec<Frame>,
    frame_ids: HashMap<Frame, usize>,
    node_rule: HashMap<usize, Option<usize>>,
    prefixes: HashSet<Position>,
}

impl<'a> PathSpace<'a> {
    pub fn new(s: &'a Term, sys: &'a RewriteSystem, set: &'a RedexSet, concrete: bool) -> Self {
        let mut prefixes = HashSet::new();
        if let RedexSet::Finite(ks) = set {
            for (p, _) in ks {
                prefixes.extend(p.prefixes());
            }
        }
        PathSpace { s, sys, set, concrete, frames: Vec::new(), frame_ids: HashMap::new(), node_rule: HashMap::new(), prefixes }
    }

    pub fn frame(&self, id: usize) -> &Frame {
        &self.frames[id]
    }

    fn intern(&mut self, f: Frame) -> usize {
        if let Some(&i) = self.frame_ids.get(&f) {
            return i;
        }
        let i = self.frames.len();
        self.frames.push(f.clone());
        self.frame_ids.insert(f, i);
        i
    }

    fn keep(&self, p: Option<Position>) -> Option<Position> {
        if self.concrete {
            return p;
        }
        match (self.set, p) {
            (RedexSet::Finite(_), Some(p)) if self.prefixes.contains(&p) => Some(p),
            _ => None,
        }
    }

    pub fn initial(&mut self) -> PState {
        let pos = self.keep(Some(Position::root()));
        PState::Term { node: Term::ROOT, pos, env: Vec::new() }
    }

    /// The rule of the developed redex at this term state, if any.
    pub fn redex_rule(&mut self, node: usize, pos: &Option<Position>) -> Option<usize> {
        match self.set {
            RedexSet::Finite(ks) => {
                let p = pos.as_ref()?;
                ks.range((p.clone(), 0)..=(p.clone(), usize::MAX)).next().map(|(_, r)| *r)
            }
            RedexSet::All => {
                let (s, sys) = (self.s, self.sys);
                *self.node_rule.entry(node).or_insert_with(|| {
                    sys.rules.iter().position(|r| match_node(r, s, node).is_some())
                })
            }
        }
    }

    /// `None` for unlabelled states.
    pub fn label(&mut self, st: &PState) -> Option<Head> {
        match st {
            PState::Term { node, pos, env } => {
                if self.redex_rule(*node, pos).is_some() {
                    return None;
                }
                match self.s.node(*node) {
                    Node::Var(x) if matches!(lookup(env, x), Some(Bind::Param(_))) => None,
                    n => Some(n.head()),
                }
            }
            PState::Rule(r) => {
                let rhs = &self.sys.rules[self.frames[r.frame].rule].rhs;
                match rhs.node(r.rhs_node) {
                    Node::Meta(..) => None,
                    n => Some(n.head()),
                }
            }
        }
    }

    /// Outgoing edges; a single unlabelled edge for unlabelled states.
    pub fn successors(&mut self, st: &PState) -> Vec<(Option<usize>, PState)> {
        match st {
            PState::Term { node, pos, env } => {
                if let Some(rule) = self.redex_rule(*node, pos) {
                    let env = restrict(env, self.s.free_vars_at(*node));
                    let frame = self.intern(Frame { rule, node: *node, pos: pos.clone(), env });
                    let rhs_pos = self.concrete.then(Position::root);
                    return vec![(None, PState::Rule(RuleRef { frame, rhs_node: Term::ROOT, rhs_pos }))];
                }
                let s = self.s;
                match s.node(*node) {
                    Node::Var(x) => match lookup(env, x) {
                        Some(Bind::Param(r)) => vec![(None, PState::Rule(r.clone()))],
                        _ => Vec::new(),
                    },
                    Node::Abs(x, c) => {
                        let e = restrict(&bind(env, x, Bind::Bound), s.free_vars_at(*c));
                        let p = self.keep(pos.as_ref().map(|p| p.child(0)));
                        vec![(Some(0), PState::Term { node: *c, pos: p, env: e })]
                    }
                    n => n
                        .steps()
                        .into_iter()
                        .map(|(i, c)| {
                            let p = self.keep(pos.as_ref().map(|p| p.child(i)));
                            (Some(i), PState::Term { node: c, pos: p, env: restrict(env, s.free_vars_at(c)) })
                        })
                        .collect(),
                }
            }
            PState::Rule(r) => {
                let frame = self.frames[r.frame].clone();
                let rule = &self.sys.rules[frame.rule];
                match rule.rhs.node(r.rhs_node) {
                    Node::Meta(z, args) => {
                        let site = rule.site(z).expect("meta-variable of the lhs");
                        let (node, env) = self.enter_body(&frame, site.position.steps(), &site.params, args, r);
                        let p = self.keep(frame.pos.as_ref().map(|p| p.concat(&site.position)));
                        vec![(None, PState::Term { node, pos: p, env })]
                    }
                    n => n
                        .steps()
                        .into_iter()
                        .map(|(i, c)| {
                            let rhs_pos = r.rhs_pos.as_ref().map(|p| p.child(i));
                            (Some(i), PState::Rule(RuleRef { frame: r.frame, rhs_node: c, rhs_pos }))
                        })
                        .collect(),
                }
            }
        }
    }

    /// Walk from the redex root to the instance of a meta-variable, building the
    /// environment in which the instance is read.
    fn enter_body(&self, frame: &Frame, q: &[usize], params: &[Name], args: &[usize], from: &RuleRef) -> (usize, PEnv) {
        let rule = &self.sys.rules[frame.rule];
        let (mut a, mut n) = (Term::ROOT, frame.node);
        let mut env = frame.env.clone();
        let mut pairs: Vec<(Name, Name)> = Vec::new();
        for &step in q {
            if let (Node::Abs(x, _), Node::Abs(y, _)) = (rule.lhs.node(a), self.s.node(n)) {
                pairs.push((x.clone(), y.clone()));
                env = bind(&env, y, Bind::Bound);
            }
            a = rule.lhs.node(a).step(step).unwrap();
            n = self.s.node(n).step(step).unwrap();
        }
        for (i, x) in params.iter().enumerate() {
            let Some(k) = pairs.iter().rposition(|(l, _)| l == x) else { continue };
            let y = &pairs[k].1;
            if pairs.iter().rposition(|(_, r)| r == y) != Some(k) {
                continue;
            }
            let rhs_pos = from.rhs_pos.as_ref().map(|p| p.child(i + 1));
            env = bind(&env, y, Bind::Param(RuleRef { frame: from.frame, rhs_node: args[i], rhs_pos }));
        }
        (n, restrict(&env, self.s.free_vars_at(n)))
    }

    pub fn path_node(&self, st: &PState) -> PathNode {
        match st {
            PState::Term { pos, .. } => PathNode::Term(pos.clone().unwrap_or_default()),
            PState::Rule(r) => {
                let f = &self.frames[r.frame];
                PathNode::Rule {
                    rule: f.rule,
                    rhs_pos: r.rhs_pos.clone().unwrap_or_default(),
                    redex_pos: f.pos.clone().unwrap_or_default(),
                }
            }
        }
    }

    /// Follow unlabelled edges to a labelled state; `None` on an unlabelled cycle.
    pub fn settle(&mut self, st: PState) -> Option<PState> {
        let mut seen: HashSet<PState> = HashSet::new();
        let mut cur = st;
        while self.label(&cur).is_none() {
            if !seen.insert(cur.clone()) {
                return None;
            }
            cur = self.successors(&cur).pop()?.1;
        }
        Some(cur)
    }
}

fn lookup<'e>(env: &'e PEnv, x: &Name) -> Option<&'e Bind> {
    env.iter().find(|(y, _)| y == x).map(|(_, b)| b)
}

fn bind(env: &PEnv, x: &Name, b: Bind) -> PEnv {
    let mut e: PEnv = env.iter().filter(|(y, _)| y != x).cloned().collect();
    e.push((x.clone(), b));
    e.sort_by(|a, b| a.0.cmp(&b.0));
    e
}

fn restrict(env: &PEnv, fv: &[Name]) -> PEnv {
    env.iter().filter(|(y, _)| fv.binary_search(y).is_ok()).cloned().collect()
}

/// The redex set must consist of redexes of `s`.
pub fn validate(s: &Term, sys: &RewriteSystem, set: &RedexSet) -> Result<(), PathError> {
    if let RedexSet::Finite(ks) = set {
        for (p, r) in ks {
            let ok = node_at(s, p).is_some_and(|n| sys.rules.get(*r).is_some_and(|rule| match_node(rule, s, n).is_some()));
            if !ok {
                return Err(PathError::NotARedex(p.clone()));
            }
        }
    }
    Ok(())
}

/// Paths from `(s,ε)`, depth-first, left to right. `budget` bounds the number of
/// nodes per listed path; paths reaching it are returned with `cut = true`.
pub fn enumerate_paths(s: &Term, sys: &RewriteSystem, set: &RedexSet, budget: usize) -> Vec<Path> {
    let mut space = PathSpace::new(s, sys, set, true);
    let mut out = Vec::new();
    let init = space.initial();
    let mut stack: Vec<(PState, Path)> = Vec::new();
    let l0 = space.label(&init);
    stack.push((init.clone(), Path { nodes: vec![space.path_node(&init)], edges: vec![], labels: vec![l0], cut: false }));
    while let Some((st, path)) = stack.pop() {
        let succ = space.successors(&st);
        if succ.is_empty() {
            out.push(path);
            continue;
        }
        if path.nodes.len() >= budget {
            out.push(Path { cut: true, ..path });
            continue;
        }
        for (e, n) in succ.into_iter().rev() {
            let mut p = path.clone();
            p.nodes.push(space.path_node(&n));
            p.edges.push(e);
            p.labels.push(space.label(&n));
            stack.push((n, p));
        }
    }
    out
}

/// Projections of the maximal paths whose edge word has length at most `max_len`,
/// each cut at its first labelled node beyond that.
pub fn path_projections(s: &Term, sys: &RewriteSystem, set: &RedexSet, max_len: usize) -> Result<BTreeSet<PathProjection>, PathError> {
    if !has_finite_jumps(s, sys, set) {
        return Err(PathError::FiniteJumpsViolated);
    }
    let mut space = PathSpace::new(s, sys, set, true);
    let init = space.initial();
    let mut out = BTreeSet::new();
    let l0 = space.label(&init);
    let mut stack = vec![(init, PathProjection { labels: vec![l0], edges: vec![] }, 0usize)];
    while let Some((st, proj, depth)) = stack.pop() {
        let succ = space.successors(&st);
        if succ.is_empty() || (depth >= max_len && space.label(&st).is_some()) {
            out.insert(proj);
            continue;
        }
        for (e, n) in succ {
            let mut p = proj.clone();
            p.labels.push(space.label(&n));
            p.edges.push(e);
            stack.push((n, p, depth + e.is_some() as usize));
        }
    }
    Ok(out)
}

/// No reachable cycle of unlabelled states, checked on the finite abstract graph.
pub fn has_finite_jumps(s: &Term, sys: &RewriteSystem, set: &RedexSet) -> bool {
    finite_jumps_witness(s, sys, set).is_none()
}

/// A reachable cycle of unlabelled nodes and unlabelled edges, if there is one.
/// The first node is repeated at the end.
pub fn finite_jumps_witness(s: &Term, sys: &RewriteSystem, set: &RedexSet) -> Option<Vec<PathNode>> {
    if set.is_empty() {
        return None;
    }
    let mut space = PathSpace::new(s, sys, set, false);
    let init = space.initial();
    let mut seen: HashSet<PState> = HashSet::new();
    let mut good: HashSet<PState> = HashSet::new();
    let mut stack = vec![init];
    while let Some(st) = stack.pop() {
        if !seen.insert(st.clone()) {
            continue;
        }
        if space.label(&st).is_none() && !good.contains(&st) {
            let mut chain: Vec<PState> = Vec::new();
            let mut on: HashSet<PState> = HashSet::new();
            let mut cur = st.clone();
            while space.label(&cur).is_none() && !good.contains(&cur) {
                if !on.insert(cur.clone()) {
                    let from = chain.iter().position(|c| *c == cur).unwrap();
                    let mut cycle: Vec<PathNode> = chain[from..].iter().map(|c| witness_node(&space, c)).collect();
                    cycle.push(witness_node(&space, &cur));
                    return Some(cycle);
                }
                chain.push(cur.clone());
                cur = space.successors(&cur).pop().expect("unlabelled states have a successor").1;
            }
            good.extend(chain);
        }
        for (_, n) in space.successors(&st) {
            if !seen.contains(&n) {
                stack.push(n);
            }
        }
    }
    None
}

/// The finite path graph: states reachable from `(s,ε)`, with edges as
/// `(from, label, to)` indices into the state list, in discovery order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathGraph {
    pub nodes: Vec<PathNode>,
    pub labels: Vec<Option<Head>>,
    pub edges: Vec<(usize, Option<usize>, usize)>,
}

impl PathGraph {
    /// One line per edge; edges to an already listed state are marked `(back)`.
    pub fn render(&self, term: &str, sys: &RewriteSystem) -> Vec<String> {
        let show = |i: usize| Path { nodes: vec![self.nodes[i].clone()], edges: vec![], labels: vec![], cut: false }.render(term, sys);
        if self.edges.is_empty() {
            return vec![show(0)];
        }
        self.edges
            .iter()
            .map(|&(a, l, b)| {
                let arrow = l.map_or("-e->".to_string(), |k| format!("-{k}->"));
                let back = if b <= a { " (back)" } else { "" };
                format!("{} {arrow} {}{back}", show(a), show(b))
            })
            .collect()
    }
}

pub fn path_graph(s: &Term, sys: &RewriteSystem, set: &RedexSet) -> PathGraph {
    let mut space = PathSpace::new(s, sys, set, false);
    let init = space.initial();
    let mut ids: HashMap<PState, usize> = HashMap::from([(init.clone(), 0)]);
    let mut states = vec![init];
    let mut edges = Vec::new();
    let mut i = 0;
    while i < states.len() {
        let st = states[i].clone();
        for (e, n) in space.successors(&st) {
            let j = *ids.entry(n.clone()).or_insert_with(|| {
                states.push(n);
                states.len() - 1
            });
            edges.push((i, e, j));
        }
        i += 1;
    }
    let nodes = states.iter().map(|st| witness_node(&space, st)).collect();
    let labels = states.iter().map(|st| space.label(st)).collect();
    PathGraph { nodes, labels, edges }
}

/// Shortest position of each graph node.
fn first_positions(t: &Term) -> HashMap<usize, Position> {
    let mut out = HashMap::new();
    let mut queue = std::collections::VecDeque::from([(Term::ROOT, Position::root())]);
    while let Some((n, p)) = queue.pop_front() {
        if out.contains_key(&n) {
            continue;
        }
        for (i, c) in t.node(n).steps() {
            queue.push_back((c, p.child(i)));
        }
        out.insert(n, p);
    }
    out
}

/// A path node for states of the abstract graph, which need not carry positions.
fn witness_node(space: &PathSpace, st: &PState) -> PathNode {
    let at = |t: &Term, n: usize| first_positions(t).remove(&n).unwrap_or_default();
    match st {
        PState::Term { node, pos, .. } => PathNode::Term(pos.clone().unwrap_or_else(|| at(space.s, *node))),
        PState::Rule(r) => {
            let f = space.frame(r.frame);
            PathNode::Rule {
                rule: f.rule,
                rhs_pos: r.rhs_pos.clone().unwrap_or_else(|| at(&space.sys.rules[f.rule].rhs, r.rhs_node)),
                redex_pos: f.pos.clone().unwrap_or_else(|| at(space.s, f.node)),
            }
        }
    }
}

/// The unique term matching the projections of the maximal paths.
pub fn target_term(s: &Term, sys: &RewriteSystem, set: &RedexSet) -> Result<Term, PathError> {
    validate(s, sys, set)?;
    if set.is_empty() {
        return Ok(s.clone());
    }
    let mut space = PathSpace::new(s, sys, set, false);
    let init = space.initial();
    let root_state = space.settle(init).ok_or(PathError::FiniteJumpsViolated)?;
    let mut b = Builder::new();
    let mut ids: HashMap<PState, usize> = HashMap::new();
    let mut tokens: HashMap<(Option<usize>, Name), Name> = HashMap::new();
    let root = b.reserve();
    ids.insert(root_state.clone(), root);
    let mut queue = vec![root_state];
    while let Some(st) = queue.pop() {
        let id = ids[&st];
        let mut children = Vec::new();
        for (_, n) in space.successors(&st) {
            let n = space.settle(n).ok_or(PathError::FiniteJumpsViolated)?;
            let c = match ids.get(&n) {
                Some(&c) => c,
                None => {
                    let c = b.reserve();
                    ids.insert(n.clone(), c);
                    queue.push(n);
                    c
                }
            };
            children.push(c);
        }
        let node = output_node(&space, &st, children, &mut tokens);
        b.set(id, node);
    }
    Ok(b.finish(root))
}

/// Binders are renamed per source (the term, or each rule) so that a right-hand
/// side binder never captures a variable of the term.
fn output_node(space: &PathSpace, st: &PState, children: Vec<usize>, tokens: &mut HashMap<(Option<usize>, Name), Name>) -> Node {
    let mut tok = |src: Option<usize>, x: &Name| tokens.entry((src, x.clone())).or_insert_with(|| fresh_token(x)).clone();
    match st {
        PState::Term { node, env, .. } => match space.s.node(*node) {
            Node::Var(x) => match lookup(env, x) {
                Some(Bind::Bound) => Node::Var(tok(None, x)),
                _ => Node::Var(x.clone()),
            },
            Node::Abs(x, _) => Node::Abs(tok(None, x), children[0]),
            Node::App(f, _) => Node::App(f.clone(), children),
            Node::Meta(z, _) => Node::Meta(z.clone(), children),
            Node::Hole => Node::Hole,
        },
        PState::Rule(r) => {
            let rule = space.frame(r.frame).rule;
            match space.sys.rules[rule].rhs.node(r.rhs_node) {
                Node::Var(x) => Node::Var(tok(Some(rule), x)),
                Node::Abs(x, _) => Node::Abs(tok(Some(rule), x), children[0]),
                Node::App(f, _) => Node::App(f.clone(), children),
                Node::Meta(..) => unreachable!("meta-variable nodes are unlabelled"),
                Node::Hole => Node::Hole,
            }
        }
    }
}

/// Where source positions end up in the target: for each labelled term state at a
/// concrete position reached by a path with word `w`, `w` is a descendant of that
/// position. Only words of length `<= max_len` are explored.
pub fn path_descendants(s: &Term, sys: &RewriteSystem, set: &RedexSet, ps: &BTreeSet<Position>, max_len: usize) -> Result<BTreeSet<Position>, PathError> {
    if !has_finite_jumps(s, sys, set) {
        return Err(PathError::FiniteJumpsViolated);
    }
    let mut space = PathSpace::new(s, sys, set, true);
    let init = space.initial();
    let mut out = BTreeSet::new();
    let mut stack = vec![(init, Position::root())];
    while let Some((st, w)) = stack.pop() {
        let labelled = space.label(&st).is_some();
        if let PState::Term { node, pos: Some(p), env } = &st {
            if labelled && ps.contains(p) {
                out.insert(w.clone());
            }
            // below p the walk stays below p unless a variable jumps back into a rule
            let escapes = s.free_vars_at(*node).iter().any(|x| matches!(lookup(env, x), Some(Bind::Param(_))));
            if !escapes && !ps.iter().any(|q| p.is_prefix_of(q)) {
                continue;
            }
        }
        for (e, n) in space.successors(&st) {
            match e {
                Some(i) if w.len() < max_len => stack.push((n, w.child(i))),
                Some(_) => {}
                None => stack.push((n, w.clone())),
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{alpha_eq, parse_term};

    fn t(s: &str) -> Term {
        parse_term(s).unwrap()
    }

    fn root_set() -> RedexSet {
        RedexSet::of([(Position::root(), 0)])
    }

    #[test]
    fn example_paths() {
        let sys = RewriteSystem::parse("rule r: f([x]Z(x), Z') -> Z(g(Z(Z')));").unwrap();
        let s = t("f([x]g(x), a)");
        let ps = enumerate_paths(&s, &sys, &root_set(), 100);
        assert_eq!(ps.len(), 1);
        assert_eq!(
            ps[0].render("s", &sys),
            "(s,@) -e-> (r,@,@) -e-> (s,10) -1-> (s,101) -e-> (r,1,@) -1-> (r,11,@) -e-> (s,10) -1-> (s,101) -e-> (r,111,@) -e-> (s,2)"
        );
        assert_eq!(
            project_path(&ps[0]).to_string(),
            ". -e-> . -e-> g -1-> . -e-> g -1-> . -e-> g -1-> . -e-> . -e-> a"
        );
        let g3 = t("g(g(g(a)))");
        let ps = enumerate_paths(&g3, &sys, &RedexSet::empty(), 100);
        assert_eq!(ps[0].render("t", &sys), "(t,@) -1-> (t,1) -1-> (t,11) -1-> (t,111)");
        assert_eq!(project_path(&ps[0]).to_string(), "g -1-> g -1-> g -1-> a");
        let ps = enumerate_paths(&t("a"), &sys, &RedexSet::empty(), 100);
        assert_eq!(project_path(&ps[0]).to_string(), "a");
        assert!(alpha_eq(&target_term(&s, &sys, &root_set()).unwrap(), &g3));
    }

    #[test]
    fn finite_jumps() {
        let sys = RewriteSystem::parse("rule f: f(Z) -> Z;").unwrap();
        let fw = t("rec F. f(F)");
        assert!(!has_finite_jumps(&fw, &sys, &RedexSet::All));
        assert!(target_term(&fw, &sys, &RedexSet::All).is_err());
        assert!(has_finite_jumps(&fw, &sys, &root_set()));
        assert!(has_finite_jumps(&fw, &sys, &RedexSet::empty()));
        let cycle = finite_jumps_witness(&fw, &sys, &RedexSet::All).unwrap();
        let shown = Path { edges: vec![None; cycle.len() - 1], labels: vec![None; cycle.len()], nodes: cycle, cut: false };
        assert_eq!(shown.render("s", &sys), "(s,@) -e-> (f,@,@) -e-> (s,@)");
        let g = path_graph(&t("rec G. g(G)"), &sys, &RedexSet::empty());
        assert_eq!(g.render("s", &sys), vec!["(s,@) -1-> (s,@) (back)"]);
        assert_eq!(path_graph(&t("a"), &sys, &RedexSet::empty()).render("s", &sys), vec!["(s,@)"]);
        // T for a single step of the collapsing rule on f^ω is f^ω again
        assert!(alpha_eq(&target_term(&fw, &sys, &root_set()).unwrap(), &fw));
    }

    #[test]
    fn infinite_development_of_all() {
        let sys = RewriteSystem::parse("rule a: a(X) -> b(X);").unwrap();
        let s = t("rec A. a(A)");
        assert!(alpha_eq(&target_term(&s, &sys, &RedexSet::All).unwrap(), &t("rec B. b(B)")));
    }

    #[test]
    fn duplicating_target() {
        let sys = RewriteSystem::parse("rule f: f([x]Z(x)) -> Z(Z(a));").unwrap();
        let s = t("g(f([x]g(g(x))))");
        let set = RedexSet::of([(Position::from_steps(&[1]), 0)]);
        assert!(alpha_eq(&target_term(&s, &sys, &set).unwrap(), &t("g(g(g(g(g(a)))))")));
    }

    #[test]
    fn no_capture_of_term_variables() {
        let sys = RewriteSystem::parse("rule k: k(Z) -> [y]g(y, Z);").unwrap();
        let s = t("[y]k(y)");
        let set = RedexSet::of([(Position::from_steps(&[0]), 0)]);
        assert!(alpha_eq(&target_term(&s, &sys, &set).unwrap(), &t("[y][z]g(z, y)")));
    }

    #[test]
    fn descendants_via_paths() {
        let sys = RewriteSystem::parse("rule f: f([x]Z(x)) -> Z(Z(a));").unwrap();
        let s = t("g(f([x]g(g(x))))");
        let set = RedexSet::of([(Position::from_steps(&[1]), 0)]);
        let d = path_descendants(&s, &sys, &set, &BTreeSet::from(["1.1.0.1".parse().unwrap()]), 10).unwrap();
        assert_eq!(d, BTreeSet::from(["11".parse().unwrap(), "1111".parse().unwrap()]));
    }
}
