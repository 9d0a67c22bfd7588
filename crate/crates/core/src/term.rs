//! Rational terms and meta-terms as finite graphs with named binders.
//!
//! A graph denotes its tree unfolding. Variable names are resolved literally in
//! that unfolding: an occurrence of `x` refers to the nearest enclosing `[x]`.
//! Cycles are written with `rec X. t` in the concrete syntax.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock};

pub type Name = Arc<str>;

pub fn name(s: &str) -> Name {
    Arc::from(s)
}

pub const HOLE: &str = "_|_";

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Var(Name),
    Abs(Name, usize),
    App(Name, Vec<usize>),
    Meta(Name, Vec<usize>),
    Hole,
}

impl Node {
    pub fn children(&self) -> &[usize] {
        match self {
            Node::Var(_) | Node::Hole => &[],
            Node::Abs(_, b) => std::slice::from_ref(b),
            Node::App(_, cs) | Node::Meta(_, cs) => cs,
        }
    }

    fn children_mut(&mut self) -> &mut [usize] {
        match self {
            Node::Var(_) | Node::Hole => &mut [],
            Node::Abs(_, b) => std::slice::from_mut(b),
            Node::App(_, cs) | Node::Meta(_, cs) => cs,
        }
    }

    /// Child reached by one position step (0 = body, 1..n = argument).
    pub fn step(&self, i: usize) -> Option<usize> {
        match self {
            Node::Abs(_, b) if i == 0 => Some(*b),
            Node::App(_, cs) | Node::Meta(_, cs) if i >= 1 && i <= cs.len() => Some(cs[i - 1]),
            _ => None,
        }
    }

    /// Position steps of the children, in order.
    pub fn steps(&self) -> Vec<(usize, usize)> {
        match self {
            Node::Abs(_, b) => vec![(0, *b)],
            Node::App(_, cs) | Node::Meta(_, cs) => {
                cs.iter().enumerate().map(|(i, &c)| (i + 1, c)).collect()
            }
            _ => Vec::new(),
        }
    }

    pub fn head(&self) -> Head {
        match self {
            Node::Var(x) => Head::Var(x.clone()),
            Node::Abs(x, _) => Head::Abs(x.clone()),
            Node::App(f, _) => Head::Sym(f.clone()),
            Node::Meta(z, _) => Head::Meta(z.clone()),
            Node::Hole => Head::Hole,
        }
    }

    fn shape(&self) -> (u8, Option<Name>, usize) {
        match self {
            Node::Var(x) => (0, Some(x.clone()), 0),
            Node::Abs(x, _) => (1, Some(x.clone()), 1),
            Node::App(f, cs) => (2, Some(f.clone()), cs.len()),
            Node::Meta(z, cs) => (3, Some(z.clone()), cs.len()),
            Node::Hole => (4, None, 0),
        }
    }
}

/// Root symbol of a subterm.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Head {
    Var(Name),
    Abs(Name),
    Sym(Name),
    Meta(Name),
    Hole,
}

impl fmt::Display for Head {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Head::Var(x) => write!(f, "{x}"),
            Head::Abs(x) => write!(f, "[{x}]"),
            Head::Sym(s) => write!(f, "{s}"),
            Head::Meta(z) => write!(f, "{z}"),
            Head::Hole => write!(f, "{HOLE}"),
        }
    }
}

struct Graph {
    nodes: Vec<Node>,
    fv: OnceLock<Vec<Vec<Name>>>,
}

/// A finite or rational term (or meta-term); the root is node 0.
///
/// Equality and hashing compare graphs syntactically; use [`crate::alpha_eq`]
/// for equality of the denoted infinite trees modulo renaming.
#[derive(Clone)]
pub struct Term {
    g: Arc<Graph>,
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.g, &other.g) || self.g.nodes == other.g.nodes
    }
}

impl Eq for Term {}

impl std::hash::Hash for Term {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.g.nodes.hash(state)
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Term({self})")
    }
}

/// Meta-terms share the representation; they may contain [`Node::Meta`].
pub type MetaTerm = Term;

impl Term {
    pub const ROOT: usize = 0;

    pub fn nodes(&self) -> &[Node] {
        &self.g.nodes
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.g.nodes[id]
    }

    pub fn root_node(&self) -> &Node {
        &self.g.nodes[0]
    }

    pub fn size(&self) -> usize {
        self.g.nodes.len()
    }

    pub fn var(x: &str) -> Term {
        Builder::single(Node::Var(name(x)))
    }

    pub fn constant(f: &str) -> Term {
        Builder::single(Node::App(name(f), Vec::new()))
    }

    pub fn hole() -> Term {
        Builder::single(Node::Hole)
    }

    pub fn app(f: &str, args: &[Term]) -> Term {
        let mut b = Builder::new();
        let ids: Vec<usize> = args.iter().map(|a| b.import(a)).collect();
        let r = b.add(Node::App(name(f), ids));
        b.finish(r)
    }

    pub fn abs(x: &str, body: &Term) -> Term {
        let mut b = Builder::new();
        let c = b.import(body);
        let r = b.add(Node::Abs(name(x), c));
        b.finish(r)
    }

    pub fn meta(z: &str, args: &[Term]) -> Term {
        let mut b = Builder::new();
        let ids: Vec<usize> = args.iter().map(|a| b.import(a)).collect();
        let r = b.add(Node::Meta(name(z), ids));
        b.finish(r)
    }

    /// The subterm rooted at node `id`, sharing nothing but the denotation.
    pub fn at_node(&self, id: usize) -> Term {
        if id == 0 {
            return self.clone();
        }
        let mut b = Builder::new();
        let r = b.import_at(self, id);
        b.finish(r)
    }

    /// Node reached by following `steps` from node `from`.
    pub fn walk(&self, from: usize, steps: &[usize]) -> Option<usize> {
        let mut n = from;
        for &s in steps {
            n = self.node(n).step(s)?;
        }
        Some(n)
    }

    pub fn head(&self) -> Head {
        self.root_node().head()
    }

    /// Free variables of the subterm at each node, sorted.
    pub fn free_vars_at(&self, id: usize) -> &[Name] {
        &self.fv_table()[id]
    }

    pub fn free_vars(&self) -> &[Name] {
        self.free_vars_at(0)
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    fn fv_table(&self) -> &Vec<Vec<Name>> {
        self.g.fv.get_or_init(|| free_var_table(&self.g.nodes))
    }

    pub fn has_meta(&self) -> bool {
        self.g.nodes.iter().any(|n| matches!(n, Node::Meta(..)))
    }

    pub fn has_hole(&self) -> bool {
        self.g.nodes.iter().any(|n| matches!(n, Node::Hole))
    }

    /// True iff the graph has a cycle (the term is infinite).
    pub fn is_cyclic(&self) -> bool {
        on_cycle(&self.g.nodes).iter().any(|&c| c)
    }

    /// Nodes lying on some cycle.
    pub fn cycle_nodes(&self) -> Vec<bool> {
        on_cycle(&self.g.nodes)
    }

    /// Meta-variables with their arities, in order of first appearance.
    pub fn metas(&self) -> Vec<(Name, usize)> {
        let mut out: Vec<(Name, usize)> = Vec::new();
        for n in self.nodes() {
            if let Node::Meta(z, cs) = n {
                if !out.iter().any(|(m, k)| m == z && *k == cs.len()) {
                    out.push((z.clone(), cs.len()));
                }
            }
        }
        out
    }

    /// Function symbols with their arities.
    pub fn symbols(&self) -> Vec<(Name, usize)> {
        let mut out: Vec<(Name, usize)> = Vec::new();
        for n in self.nodes() {
            if let Node::App(f, cs) = n {
                if !out.iter().any(|(m, k)| m == f && *k == cs.len()) {
                    out.push((f.clone(), cs.len()));
                }
            }
        }
        out
    }

    /// Every variable and binder name occurring in the graph.
    pub fn all_names(&self) -> BTreeSet<Name> {
        let mut s = BTreeSet::new();
        for n in self.nodes() {
            if let Node::Var(x) | Node::Abs(x, _) = n {
                s.insert(x.clone());
            }
        }
        s
    }
}

fn free_var_table(nodes: &[Node]) -> Vec<Vec<Name>> {
    let mut fv: Vec<BTreeSet<Name>> = vec![BTreeSet::new(); nodes.len()];
    for (i, n) in nodes.iter().enumerate() {
        if let Node::Var(x) = n {
            fv[i].insert(x.clone());
        }
    }
    loop {
        let mut changed = false;
        for i in (0..nodes.len()).rev() {
            let add: Vec<Name> = match &nodes[i] {
                Node::Abs(x, b) => fv[*b].iter().filter(|y| *y != x).cloned().collect(),
                Node::App(_, cs) | Node::Meta(_, cs) => {
                    cs.iter().flat_map(|c| fv[*c].iter().cloned()).collect()
                }
                _ => Vec::new(),
            };
            for y in add {
                changed |= fv[i].insert(y);
            }
        }
        if !changed {
            break;
        }
    }
    fv.into_iter().map(|s| s.into_iter().collect()).collect()
}

fn on_cycle(nodes: &[Node]) -> Vec<bool> {
    // Tarjan-free approach: a node is on a cycle iff it reaches itself.
    let n = nodes.len();
    let mut res = vec![false; n];
    for start in 0..n {
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = nodes[start].children().to_vec();
        while let Some(x) = stack.pop() {
            if x == start {
                res[start] = true;
                break;
            }
            if !seen[x] {
                seen[x] = true;
                stack.extend_from_slice(nodes[x].children());
            }
        }
    }
    res
}

static FRESH: AtomicUsize = AtomicUsize::new(0);

/// A binder name guaranteed not to clash with any parsed or previously produced name.
/// Such tokens are renamed back to readable names by [`Builder::finish`].
pub fn fresh_token(base: &str) -> Name {
    let k = FRESH.fetch_add(1, Ordering::Relaxed);
    name(&format!("{}~{}", base_name(base), k))
}

fn is_token(x: &str) -> bool {
    x.contains('~')
}

/// Name with token suffix and trailing primes removed.
pub fn base_name(x: &str) -> &str {
    let x = match x.find('~') {
        Some(i) => &x[..i],
        None => x,
    };
    x.trim_end_matches('\'')
}

/// Graph under construction; nodes may be reserved and filled later to close cycles.
#[derive(Default)]
pub struct Builder {
    nodes: Vec<Option<Node>>,
}

impl Builder {
    pub fn new() -> Self {
        Builder { nodes: Vec::new() }
    }

    fn single(n: Node) -> Term {
        let mut b = Builder::new();
        let r = b.add(n);
        b.finish(r)
    }

    pub fn reserve(&mut self) -> usize {
        self.nodes.push(None);
        self.nodes.len() - 1
    }

    pub fn set(&mut self, id: usize, n: Node) {
        self.nodes[id] = Some(n);
    }

    pub fn add(&mut self, n: Node) -> usize {
        self.nodes.push(Some(n));
        self.nodes.len() - 1
    }

    pub fn get(&self, id: usize) -> Option<&Node> {
        self.nodes[id].as_ref()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Copy the whole graph of `t`; returns the id of its root.
    pub fn import(&mut self, t: &Term) -> usize {
        self.import_at(t, 0)
    }

    /// Copy the part of `t` reachable from node `id`.
    pub fn import_at(&mut self, t: &Term, id: usize) -> usize {
        let mut map: HashMap<usize, usize> = HashMap::new();
        self.import_with(t, id, &mut map)
    }

    /// Copy reusing a caller-held map so repeated imports of one graph share nodes.
    pub fn import_with(&mut self, t: &Term, id: usize, map: &mut HashMap<usize, usize>) -> usize {
        if let Some(&m) = map.get(&id) {
            return m;
        }
        let mut order = Vec::new();
        let mut stack = vec![id];
        while let Some(x) = stack.pop() {
            if map.contains_key(&x) {
                continue;
            }
            let nid = self.reserve();
            map.insert(x, nid);
            order.push(x);
            for &c in t.node(x).children() {
                if !map.contains_key(&c) {
                    stack.push(c);
                }
            }
        }
        for x in order {
            let mut n = t.node(x).clone();
            for c in n.children_mut() {
                *c = map[c];
            }
            let nid = map[&x];
            self.set(nid, n);
        }
        map[&id]
    }

    /// Garbage-collect, rename binder tokens, merge bisimilar nodes, renumber.
    pub fn finish(self, root: usize) -> Term {
        let (nodes, root) = self.collect(root);
        let nodes = tidy_names(nodes, root);
        let (nodes, root) = minimize(&nodes, root);
        canonical(&nodes, root)
    }

    /// Garbage-collect and renumber only; keeps explicit unrollings intact.
    pub fn finish_raw(self, root: usize) -> Term {
        let (nodes, root) = self.collect(root);
        let nodes = tidy_names(nodes, root);
        canonical(&nodes, root)
    }

    fn collect(self, root: usize) -> (Vec<Node>, usize) {
        let nodes: Vec<Node> = self
            .nodes
            .into_iter()
            .map(|n| n.expect("builder node left unfilled"))
            .collect();
        (nodes, root)
    }
}

fn canonical(nodes: &[Node], root: usize) -> Term {
    let mut map: HashMap<usize, usize> = HashMap::new();
    let mut order = Vec::new();
    fn visit(nodes: &[Node], x: usize, map: &mut HashMap<usize, usize>, order: &mut Vec<usize>) {
        // explicit stack preorder
        let mut stack = vec![x];
        while let Some(y) = stack.pop() {
            if map.contains_key(&y) {
                continue;
            }
            map.insert(y, order.len());
            order.push(y);
            for &c in nodes[y].children().iter().rev() {
                if !map.contains_key(&c) {
                    stack.push(c);
                }
            }
        }
    }
    visit(nodes, root, &mut map, &mut order);
    let out: Vec<Node> = order
        .iter()
        .map(|&x| {
            let mut n = nodes[x].clone();
            for c in n.children_mut() {
                *c = map[c];
            }
            n
        })
        .collect();
    Term { g: Arc::new(Graph { nodes: out, fv: OnceLock::new() }) }
}

/// Quotient by bisimulation (partition refinement). Literal name semantics makes
/// bisimilar nodes interchangeable in every context.
fn minimize(nodes: &[Node], root: usize) -> (Vec<Node>, usize) {
    let n = nodes.len();
    let mut shapes: HashMap<(u8, Option<Name>, usize), usize> = HashMap::new();
    let mut class: Vec<usize> = nodes
        .iter()
        .map(|nd| {
            let k = shapes.len();
            *shapes.entry(nd.shape()).or_insert(k)
        })
        .collect();
    let mut count = shapes.len();
    loop {
        let mut sigs: HashMap<(usize, Vec<usize>), usize> = HashMap::new();
        let next: Vec<usize> = (0..n)
            .map(|i| {
                let sig = (class[i], nodes[i].children().iter().map(|&c| class[c]).collect());
                let k = sigs.len();
                *sigs.entry(sig).or_insert(k)
            })
            .collect();
        let c2 = sigs.len();
        class = next;
        if c2 == count {
            break;
        }
        count = c2;
    }
    let mut rep: Vec<Option<usize>> = vec![None; count];
    for i in 0..n {
        if rep[class[i]].is_none() {
            rep[class[i]] = Some(i);
        }
    }
    let out: Vec<Node> = (0..count)
        .map(|k| {
            let mut nd = nodes[rep[k].unwrap()].clone();
            for c in nd.children_mut() {
                *c = class[*c];
            }
            nd
        })
        .collect();
    (out, class[root])
}

/// Rename binder tokens to readable names where doing so captures nothing.
fn tidy_names(mut nodes: Vec<Node>, root: usize) -> Vec<Node> {
    if !nodes.iter().any(|n| matches!(n, Node::Abs(x, _) if is_token(x))) {
        return nodes;
    }
    let order = preorder(&nodes, root);
    let mut fv: Vec<BTreeSet<Name>> = free_var_table(&nodes)
        .into_iter()
        .map(|v| v.into_iter().collect())
        .collect();
    for &b in &order {
        let (tok, body) = match &nodes[b] {
            Node::Abs(x, body) if is_token(x) => (x.clone(), *body),
            _ => continue,
        };
        let reach = reachable(&nodes, body);
        let inner: BTreeSet<Name> = reach
            .iter()
            .filter(|&&c| c != b)
            .filter_map(|&c| match &nodes[c] {
                Node::Abs(x, _) => Some(x.clone()),
                _ => None,
            })
            .collect();
        let base = base_name(&tok).to_string();
        let chosen = candidates(&base)
            .find(|c| !fv[body].contains(c) && !inner.contains(c))
            .expect("candidate stream is infinite");
        for nd in nodes.iter_mut() {
            match nd {
                Node::Var(x) | Node::Abs(x, _) if *x == tok => *x = chosen.clone(),
                _ => {}
            }
        }
        for set in fv.iter_mut() {
            if set.remove(&tok) {
                set.insert(chosen.clone());
            }
        }
    }
    nodes
}

fn candidates(base: &str) -> impl Iterator<Item = Name> + '_ {
    (0usize..).map(move |k| match k {
        0..=3 => name(&format!("{base}{}", "'".repeat(k))),
        _ => name(&format!("{base}{k}")),
    })
}

fn preorder(nodes: &[Node], root: usize) -> Vec<usize> {
    let mut seen = vec![false; nodes.len()];
    let mut out = Vec::new();
    let mut stack = vec![root];
    while let Some(x) = stack.pop() {
        if seen[x] {
            continue;
        }
        seen[x] = true;
        out.push(x);
        for &c in nodes[x].children().iter().rev() {
            stack.push(c);
        }
    }
    out
}

fn reachable(nodes: &[Node], from: usize) -> Vec<usize> {
    let mut seen = vec![false; nodes.len()];
    let mut out = Vec::new();
    let mut stack = vec![from];
    while let Some(x) = stack.pop() {
        if seen[x] {
            continue;
        }
        seen[x] = true;
        out.push(x);
        stack.extend_from_slice(nodes[x].children());
    }
    out
}
