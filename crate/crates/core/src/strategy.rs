//! Fair, outermost-fair and needed-fair normalisation with a fairness ledger,
//! rational normal form detection and trace auditing.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::devel::DevSequence;
use crate::essential::{epsilon_seq, EssentialError};
use crate::ops::{truncate, PrefixSet};
use crate::paths::{RedexKey, RedexSet};
use crate::position::Position;
use crate::rewrite::{contract, find_redexes, match_node, Redex, RewriteError, StepRecord, Valuation};
use crate::system::{check_fully_extended, check_orthogonal, RewriteSystem};
use crate::term::{Builder, Node, Term};

#[derive(Debug, Clone, thiserror::Error)]
pub enum StrategyError {
    #[error("system check failed: {0}")]
    SystemCheckFailed(String),
    #[error("no redex satisfies the strategy predicate")]
    NoEligibleRedex,
    #[error("fuel exhausted after {} steps{}", .trace.len(), if *.divergence_suspected { " (divergence suspected)" } else { "" })]
    FuelExhausted { trace: Box<Trace>, divergence_suspected: bool },
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error(transparent)]
    Essential(#[from] EssentialError),
}

/// Budget for the outermost-fair pilot used to approximate neededness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PilotConfig {
    pub fuel: usize,
}

impl Default for PilotConfig {
    fn default() -> Self {
        PilotConfig { fuel: 400 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    Fair,
    OutermostFair,
    NeededFair(PilotConfig),
}

impl StrategyKind {
    pub fn needed() -> Self {
        StrategyKind::NeededFair(PilotConfig::default())
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fair" => Some(StrategyKind::Fair),
            "outermost-fair" => Some(StrategyKind::OutermostFair),
            "needed-fair" => Some(StrategyKind::needed()),
            _ => None,
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StrategyKind::Fair => "fair",
            StrategyKind::OutermostFair => "outermost-fair",
            StrategyKind::NeededFair(_) => "needed-fair",
        })
    }
}

/// Redexes of `t` at depth `< depth_bound` with no redex strictly above them.
pub fn outermost_redexes(t: &Term, sys: &RewriteSystem, depth_bound: usize) -> Vec<Redex> {
    let all = find_redexes(t, sys, depth_bound);
    let at: BTreeSet<Position> = all.iter().map(|r| r.position.clone()).collect();
    all.into_iter()
        .filter(|r| !r.position.prefixes().iter().any(|q| q.len() < r.position.len() && at.contains(q)))
        .collect()
}

/// Events recorded per tracked family (a redex together with its residuals).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LedgerEvent {
    /// The family has a member satisfying the predicate from this step on.
    Eligible { step: usize, family: usize, members: Vec<RedexKey> },
    Contracted { step: usize, family: usize, redex: RedexKey },
    /// No member satisfies the predicate any more.
    Ineligible { step: usize, family: usize },
    /// No residual survives.
    Vanished { step: usize, family: usize },
}

impl fmt::Display for LedgerEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let keys = |ks: &[RedexKey]| ks.iter().map(|(p, r)| format!("{p}#{r}")).collect::<Vec<_>>().join(", ");
        match self {
            LedgerEvent::Eligible { step, family, members } => write!(f, "[{step}] family {family} eligible: {}", keys(members)),
            LedgerEvent::Contracted { step, family, redex } => write!(f, "[{step}] family {family} contracted at {}", redex.0),
            LedgerEvent::Ineligible { step, family } => write!(f, "[{step}] family {family} no longer eligible"),
            LedgerEvent::Vanished { step, family } => write!(f, "[{step}] family {family} erased"),
        }
    }
}

/// A finite reduction with its bookkeeping.
#[derive(Debug, Clone)]
pub struct Trace {
    pub start: Term,
    pub steps: Vec<StepRecord>,
    pub ledger: Vec<LedgerEvent>,
    /// Redexes at depth `>= bound` are not tracked.
    pub bound: usize,
    pub goal: usize,
}

impl Trace {
    pub fn new(start: &Term, bound: usize, goal: usize) -> Self {
        Trace { start: start.clone(), steps: Vec::new(), ledger: Vec::new(), bound, goal }
    }

    /// Replay `(rule, position)` steps, without a ledger.
    pub fn replay(start: &Term, sys: &RewriteSystem, steps: &[(usize, Position)], bound: usize) -> Result<Trace, StrategyError> {
        let mut tr = Trace::new(start, bound, bound);
        let mut cur = start.clone();
        for (r, p) in steps {
            let st = contract(&cur, sys, &Redex { position: p.clone(), rule: *r, valuation: Valuation::new() })?;
            cur = st.target.clone();
            tr.steps.push(st);
        }
        Ok(tr)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn term(&self, i: usize) -> &Term {
        if i == 0 {
            &self.start
        } else {
            &self.steps[i - 1].target
        }
    }

    pub fn last(&self) -> &Term {
        self.term(self.len())
    }

    /// `floor[i]`: least depth contracted at step `i` or later; `usize::MAX` past the end.
    pub fn depth_floor(&self) -> Vec<usize> {
        let mut out = vec![usize::MAX; self.len() + 1];
        for i in (0..self.len()).rev() {
            out[i] = out[i + 1].min(self.steps[i].redex.position.len());
        }
        out
    }

    /// Number of steps contracting at depth `< d`.
    pub fn steps_above(&self, d: usize) -> usize {
        self.steps.iter().filter(|s| s.redex.position.len() < d).count()
    }

    /// First index from which every step is at depth `>= d`.
    pub fn settled_from(&self, d: usize) -> usize {
        self.steps.iter().rposition(|s| s.redex.position.len() < d).map_or(0, |i| i + 1)
    }

    pub fn positions(&self) -> Vec<(usize, Position)> {
        self.steps.iter().map(|s| (s.redex.rule, s.redex.position.clone())).collect()
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "0: {}", self.start)?;
        for (i, s) in self.steps.iter().enumerate() {
            writeln!(f, "{}: --{}@{}--> {}", i + 1, s.rule.name, s.redex.position, s.target)?;
        }
        Ok(())
    }
}

/// The depth-`stable_depth` prefix of the last term of a normalising run.
#[derive(Debug, Clone)]
pub struct Approximant {
    pub term: Term,
    pub stable_depth: usize,
    /// Step index after which every contraction was at depth `>= stable_depth`.
    pub certificate: usize,
}

/// An outermost-fair run cut into depth strata.
#[derive(Debug, Clone)]
pub struct Pilot {
    pub trace: Trace,
    /// `strata[d]`: index of `s_d`, after which every step is at depth `>= d`.
    pub strata: Vec<usize>,
}

impl Pilot {
    pub fn goal(&self) -> usize {
        self.strata.len() - 1
    }

    pub fn term(&self, d: usize) -> &Term {
        self.trace.term(self.strata[d])
    }

    /// `P_d`: positions of `s_d` above depth `d`.
    pub fn prefix(&self, d: usize) -> PrefixSet {
        PrefixSet::above_depth(self.term(d), d)
    }

    /// `s_0 →* s_d` as one single-step development per step.
    pub fn sequence(&self, sys: &RewriteSystem, d: usize) -> Result<DevSequence, StrategyError> {
        let sets: Vec<RedexSet> = self.trace.steps[..self.strata[d]].iter().map(|s| RedexSet::of([s.redex.key()])).collect();
        Ok(DevSequence::build(&self.trace.start, sys, &sets).map_err(EssentialError::from)?)
    }

    /// Positions of `s_0` essential for some `P_d` with `d <= goal`.
    pub fn essential_positions(&self, sys: &RewriteSystem) -> Result<BTreeSet<Position>, StrategyError> {
        let mut out = BTreeSet::new();
        for d in 1..=self.goal() {
            let ps = epsilon_seq(sys, &self.prefix(d), &self.sequence(sys, d)?)?;
            out.extend(ps[0].iter().cloned());
        }
        Ok(out)
    }
}

pub fn needed_pilot(t: &Term, sys: &RewriteSystem, depth_goal: usize, fuel: usize) -> Result<Pilot, StrategyError> {
    let (_, trace) = normalize(t, sys, StrategyKind::OutermostFair, depth_goal, fuel)?;
    let strata = (0..=depth_goal).map(|d| trace.settled_from(d)).collect();
    Ok(Pilot { trace, strata })
}

/// Evaluates a strategy predicate on the redexes of one term.
struct Predicate<'a> {
    sys: &'a RewriteSystem,
    kind: StrategyKind,
    bound: usize,
    needed: HashMap<Term, BTreeSet<Position>>,
}

impl<'a> Predicate<'a> {
    fn new(sys: &'a RewriteSystem, kind: StrategyKind, bound: usize) -> Self {
        Predicate { sys, kind, bound, needed: HashMap::new() }
    }

    fn eval(&mut self, t: &Term, redexes: &[Redex]) -> Result<Vec<bool>, StrategyError> {
        Ok(match self.kind {
            StrategyKind::Fair => vec![true; redexes.len()],
            StrategyKind::OutermostFair => {
                let at: BTreeSet<&Position> = redexes.iter().map(|r| &r.position).collect();
                redexes.iter().map(|r| !r.position.prefixes().iter().any(|q| q.len() < r.position.len() && at.contains(q))).collect()
            }
            StrategyKind::NeededFair(cfg) => {
                if !self.needed.contains_key(t) {
                    let e = if redexes.is_empty() {
                        BTreeSet::new()
                    } else {
                        needed_pilot(t, self.sys, self.bound, cfg.fuel)?.essential_positions(self.sys)?
                    };
                    self.needed.insert(t.clone(), e);
                }
                let e = &self.needed[t];
                redexes.iter().map(|r| e.contains(&r.position)).collect()
            }
        })
    }
}

#[derive(Debug, Clone)]
struct Family {
    members: Vec<Redex>,
    since: Option<usize>,
}

/// Age-priority scheduler over redex families.
pub struct Scheduler<'a> {
    sys: &'a RewriteSystem,
    predicate: Predicate<'a>,
    families: BTreeMap<usize, Family>,
    next_id: usize,
    bound: usize,
    pub ledger: Vec<LedgerEvent>,
}

impl<'a> Scheduler<'a> {
    /// Tracks redexes at depth `< bound`; needed-fair pilots run to `pilot_goal`.
    pub fn new(sys: &'a RewriteSystem, kind: StrategyKind, bound: usize, pilot_goal: usize, start: &Term) -> Self {
        let mut s = Scheduler { sys, predicate: Predicate::new(sys, kind, pilot_goal), families: BTreeMap::new(), next_id: 0, bound, ledger: Vec::new() };
        for r in find_redexes(start, sys, bound) {
            s.spawn(vec![r]);
        }
        s
    }

    fn spawn(&mut self, members: Vec<Redex>) {
        self.families.insert(self.next_id, Family { members, since: None });
        self.next_id += 1;
    }

    /// The oldest eligible family's leftmost-outermost eligible member.
    pub fn select(&mut self, step: usize, t: &Term) -> Result<Redex, StrategyError> {
        let mut best: Option<(usize, Redex, usize)> = None;
        for (&id, fam) in self.families.iter_mut() {
            let ok = self.predicate.eval(t, &fam.members)?;
            let eligible: Vec<&Redex> = fam.members.iter().zip(&ok).filter(|(_, &b)| b).map(|(r, _)| r).collect();
            match (fam.since, eligible.is_empty()) {
                (None, false) => {
                    fam.since = Some(step);
                    let members = eligible.iter().map(|r| r.key()).collect();
                    self.ledger.push(LedgerEvent::Eligible { step, family: id, members });
                }
                (Some(_), true) => {
                    fam.since = None;
                    self.ledger.push(LedgerEvent::Ineligible { step, family: id });
                }
                _ => {}
            }
            if let (Some(age), Some(r)) = (fam.since, eligible.first()) {
                let better = match &best {
                    None => true,
                    Some((a, b, _)) => (age, r.key()) < (*a, b.key()),
                };
                if better {
                    best = Some((age, (*r).clone(), id));
                }
            }
        }
        best.map(|(_, r, _)| r).ok_or(StrategyError::NoEligibleRedex)
    }

    /// Move every family across the step.
    pub fn observe(&mut self, step: usize, st: &StepRecord) {
        let known = find_redexes(&st.target, self.sys, self.bound);
        let mut covered: BTreeSet<RedexKey> = BTreeSet::new();
        let max_len = self.bound.saturating_sub(1);
        let mut reborn = Vec::new();
        let ids: Vec<usize> = self.families.keys().cloned().collect();
        for id in ids {
            let fam = self.families.get_mut(&id).unwrap();
            let hit = fam.members.iter().any(|r| r.key() == st.redex.key());
            let next = st.residuals(self.sys, &fam.members, max_len);
            covered.extend(next.iter().map(|r| r.key()));
            if hit {
                self.ledger.push(LedgerEvent::Contracted { step, family: id, redex: st.redex.key() });
                self.families.remove(&id);
                if !next.is_empty() {
                    reborn.push(next);
                }
            } else if next.is_empty() {
                self.ledger.push(LedgerEvent::Vanished { step, family: id });
                self.families.remove(&id);
            } else {
                fam.members = next;
            }
        }
        for fam in reborn {
            self.spawn(fam);
        }
        for r in known {
            if !covered.contains(&r.key()) {
                self.spawn(vec![r]);
            }
        }
    }
}

/// Pick the next redex for `kind` given the run so far.
pub fn select(sys: &RewriteSystem, kind: StrategyKind, trace: &Trace, t: &Term) -> Result<Redex, StrategyError> {
    let mut s = Scheduler::new(sys, kind, trace.bound, pilot_goal(trace, sys), &trace.start);
    for (i, st) in trace.steps.iter().enumerate() {
        // ages are assigned when families are first inspected
        let _ = s.select(i, &st.source);
        s.observe(i, st);
    }
    s.select(trace.len(), t)
}

/// Depth to which needed-fair pilots run for the terms of `trace`.
fn pilot_goal(trace: &Trace, sys: &RewriteSystem) -> usize {
    trace.bound.min(trace.goal + sys.max_pattern_height())
}

fn require_orthogonal(sys: &RewriteSystem) -> Result<(), StrategyError> {
    let ortho = check_orthogonal(sys).map_err(|e| StrategyError::SystemCheckFailed(e.to_string()))?;
    if !ortho.passed() {
        return Err(StrategyError::SystemCheckFailed("rules overlap".into()));
    }
    if !check_fully_extended(sys).passed() {
        return Err(StrategyError::SystemCheckFailed("not fully extended".into()));
    }
    Ok(())
}

/// Reduce until no redex remains at depth `< depth_goal + H`, with `H` the
/// largest pattern height, or until `fuel` steps have been taken.
pub fn normalize(t: &Term, sys: &RewriteSystem, kind: StrategyKind, depth_goal: usize, fuel: usize) -> Result<(Approximant, Trace), StrategyError> {
    require_orthogonal(sys)?;
    let bound = depth_goal + sys.max_pattern_height();
    // redexes just below the bound may be what pushes a looping redex out of it
    let window = 2 * bound;
    let mut trace = Trace::new(t, window, depth_goal);
    let mut sched = Scheduler::new(sys, kind, window, bound, t);
    let mut cur = t.clone();
    loop {
        if find_redexes(&cur, sys, bound).is_empty() {
            break;
        }
        if trace.len() >= fuel {
            trace.ledger = std::mem::take(&mut sched.ledger);
            let divergence_suspected = floor_stuck(&trace);
            return Err(StrategyError::FuelExhausted { trace: Box::new(trace), divergence_suspected });
        }
        let u = sched.select(trace.len(), &cur)?;
        let st = contract(&cur, sys, &u)?;
        sched.observe(trace.len(), &st);
        cur = st.target.clone();
        trace.steps.push(st);
    }
    trace.ledger = sched.ledger;
    let approx = Approximant { term: truncate(&cur, depth_goal), stable_depth: depth_goal, certificate: trace.settled_from(depth_goal) };
    Ok((approx, trace))
}

/// The depth floor did not rise between the two halves of the run.
fn floor_stuck(trace: &Trace) -> bool {
    let n = trace.len();
    if n < 2 {
        return true;
    }
    let depth = |s: &StepRecord| s.redex.position.len();
    let first = trace.steps[..n / 2].iter().map(depth).min().unwrap();
    let second = trace.steps[n / 2..].iter().map(depth).min().unwrap();
    second <= first
}

fn has_any_redex(t: &Term, sys: &RewriteSystem) -> bool {
    (0..t.size()).any(|n| sys.rules.iter().any(|r| match_node(r, t, n).is_some()))
}

/// Literal agreement of the subterms at nodes `a` and `b` on positions of length `< k`.
fn agree(t: &Term, a: usize, b: usize, k: usize) -> bool {
    if k == 0 || a == b {
        return true;
    }
    let (x, y) = (t.node(a), t.node(b));
    if x.head() != y.head() || x.children().len() != y.children().len() {
        return false;
    }
    x.children().iter().zip(y.children()).all(|(&c, &d)| agree(t, c, d, k - 1))
}

/// Fold the stable prefix of the last term of `trace` into a rational normal form.
/// A run of [`normalize`] leaves no redex above `goal + H`, so that prefix is exact.
pub fn detect_rational_nf(trace: &Trace, sys: &RewriteSystem) -> Option<Term> {
    let t = trace.last();
    if !has_any_redex(t, sys) {
        return Some(t.clone());
    }
    let depth = trace.goal + sys.max_pattern_height();
    if depth == 0 {
        return None;
    }
    let mut b = Builder::new();
    let root = b.reserve();
    // (source node, output id, position, ancestors as (node, output id, depth))
    let mut stack: Vec<(usize, usize, Position, Vec<(usize, usize)>)> = vec![(Term::ROOT, root, Position::root(), vec![])];
    while let Some((n, id, p, anc)) = stack.pop() {
        if p.len() >= depth {
            return None;
        }
        let mut node = t.node(n).clone();
        let mut path = anc.clone();
        path.push((n, id));
        let steps = node.steps();
        let mut kids = Vec::with_capacity(steps.len());
        for (i, c) in steps {
            let q = p.child(i);
            let k = depth - q.len();
            let fold = path.iter().enumerate().find(|(j, (a, _))| {
                let period = q.len() - j;
                k >= period && 2 * k >= depth && agree(t, *a, c, k)
            });
            match fold {
                Some((_, &(_, target))) => kids.push(target),
                None => {
                    let cid = b.reserve();
                    kids.push(cid);
                    stack.push((c, cid, q, path.clone()));
                }
            }
        }
        match &mut node {
            Node::Abs(_, body) => *body = kids[0],
            Node::App(_, cs) | Node::Meta(_, cs) => cs.copy_from_slice(&kids),
            _ => {}
        }
        b.set(id, node);
    }
    let out = b.finish(root);
    if has_any_redex(&out, sys) || !crate::ops::alpha_eq(&truncate(&out, depth), &truncate(t, depth)) {
        return None;
    }
    Some(out)
}

/// A redex whose obligation was not met within the window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub origin: usize,
    pub redex: RedexKey,
    pub window_end: usize,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "redex at {} (rule {}) of term {} unresolved through step {}", self.redex.0, self.redex.1, self.origin, self.window_end)
    }
}

#[derive(Debug, Clone)]
pub struct AuditVerdict {
    pub kind: StrategyKind,
    pub window: usize,
    pub obligations: usize,
    pub resolved: usize,
    /// Obligations whose window runs past the end of the trace.
    pub pending: usize,
    pub violation: Option<Violation>,
}

impl AuditVerdict {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

impl fmt::Display for AuditVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.violation {
            None => write!(
                f,
                "{}: pass ({} obligations, {} resolved, {} pending, window {})",
                self.kind, self.obligations, self.resolved, self.pending, self.window
            ),
            Some(v) => write!(f, "{}: fail, {v} (window {})", self.kind, self.window),
        }
    }
}

/// Window used when none is given: twice the largest count of tracked redexes, plus two.
pub fn default_window(trace: &Trace, sys: &RewriteSystem) -> usize {
    (0..=trace.len()).map(|i| find_redexes(trace.term(i), sys, trace.bound).len()).max().unwrap_or(0) * 2 + 2
}

/// Check that every redex satisfying the predicate of `kind` in some term of the
/// trace has a residual contracted, or loses the predicate, within `window` steps.
pub fn fairness_audit(trace: &Trace, sys: &RewriteSystem, kind: StrategyKind, window: usize) -> Result<AuditVerdict, StrategyError> {
    let mut pred = Predicate::new(sys, kind, pilot_goal(trace, sys));
    // current residual set (as keys) -> (origin step, original redex)
    let mut open: BTreeMap<Vec<RedexKey>, (usize, RedexKey, Vec<Redex>)> = BTreeMap::new();
    let mut verdict = AuditVerdict { kind, window, obligations: 0, resolved: 0, pending: 0, violation: None };
    let max_len = trace.bound.saturating_sub(1);
    for g in 0..=trace.len() {
        let t = trace.term(g);
        let redexes = find_redexes(t, sys, trace.bound);
        let ok = pred.eval(t, &redexes)?;
        let sat: BTreeSet<RedexKey> = redexes.iter().zip(&ok).filter(|(_, &b)| b).map(|(r, _)| r.key()).collect();
        for (r, &b) in redexes.iter().zip(&ok) {
            if b {
                let key = vec![r.key()];
                if let std::collections::btree_map::Entry::Vacant(e) = open.entry(key) {
                    verdict.obligations += 1;
                    e.insert((g, r.key(), vec![r.clone()]));
                }
            }
        }
        // an obligation is met once none of its residuals satisfies the predicate
        let before = open.len();
        open.retain(|ks, _| ks.iter().any(|k| sat.contains(k)));
        verdict.resolved += before - open.len();
        if g == trace.len() {
            break;
        }
        let st = &trace.steps[g];
        let u = st.redex.key();
        // or once one of them is contracted
        let before = open.len();
        open.retain(|ks, _| !(ks.contains(&u) && sat.contains(&u)));
        verdict.resolved += before - open.len();
        let mut next = BTreeMap::new();
        for (_, (origin, r, members)) in std::mem::take(&mut open) {
            if g + 1 - origin >= window {
                verdict.violation = Some(Violation { origin, redex: r, window_end: g });
                return Ok(verdict);
            }
            let res = st.residuals(sys, &members, max_len);
            let keys: Vec<RedexKey> = res.iter().map(|x| x.key()).collect();
            if keys.is_empty() {
                verdict.resolved += 1;
                continue;
            }
            match next.get(&keys) {
                Some((o, _, _)) if *o <= origin => verdict.obligations -= 1,
                _ => {
                    next.insert(keys, (origin, r, res));
                }
            }
        }
        open = next;
    }
    verdict.pending = open.len();
    Ok(verdict)
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

    const DELAYED_ROOT: &str = "rule f: f(Z) -> g(Z); rule a: a -> g(a);";
    const LOOPING_ARG: &str = "rule f: f(X, Y) -> g(X, f(X, Y)); rule a: a -> b; rule c: c -> c;";
    const MAP: &str = "rule map_cons: map([z]F(z), cons(X, XS)) -> cons(F(X), map([z]F(z), XS));
        rule map_nil: map([z]F(z), nil) -> nil;";

    fn sys(src: &str) -> RewriteSystem {
        RewriteSystem::parse(src).unwrap()
    }

    const ALL: [StrategyKind; 3] = [StrategyKind::Fair, StrategyKind::OutermostFair, StrategyKind::NeededFair(PilotConfig { fuel: 400 })];

    #[test]
    fn outermost_examples() {
        let s = sys(DELAYED_ROOT);
        let o = outermost_redexes(&t("f(a)"), &s, 5);
        assert_eq!(o.iter().map(|r| r.key()).collect::<Vec<_>>(), [(Position::root(), 0)]);
        let s = sys(LOOPING_ARG);
        let o = outermost_redexes(&t("f(a, c)"), &s, 5);
        assert_eq!(o.len(), 1);
        assert!(outermost_redexes(&t("g(b, b)"), &s, 5).is_empty());
    }

    #[test]
    fn delayed_root_all_strategies() {
        let s = sys(DELAYED_ROOT);
        for d in 1..=6 {
            for k in ALL {
                let (a, tr) = normalize(&t("f(a)"), &s, k, d, 200).unwrap();
                let mut want = "_|_".to_string();
                for _ in 0..d {
                    want = format!("g({want})");
                }
                assert!(alpha_eq(&a.term, &t(&want)), "{k} d={d}: {}", a.term);
                assert_eq!(tr.steps_above(d), tr.steps.iter().filter(|s| s.redex.position.len() < d).count());
                assert!(tr.depth_floor()[a.certificate] >= d);
            }
        }
    }

    #[test]
    fn looping_arg_rational() {
        let s = sys(LOOPING_ARG);
        for d in 1..=6 {
            let mut approx = Vec::new();
            for k in ALL {
                let (a, tr) = normalize(&t("f(a, c)"), &s, k, d, 400).unwrap();
                if d >= 2 {
                    let nf = detect_rational_nf(&tr, &s).unwrap();
                    assert!(alpha_eq(&nf, &t("rec S. g(b, S)")), "{k} {nf}");
                }
                approx.push(a.term);
            }
            assert!(approx.windows(2).all(|w| alpha_eq(&w[0], &w[1])));
        }
    }

    #[test]
    fn needed_fair_skips_c() {
        let s = sys(LOOPING_ARG);
        let (_, tr) = normalize(&t("f(a, c)"), &s, StrategyKind::needed(), 4, 400).unwrap();
        assert!(tr.steps.iter().all(|st| st.rule.name.as_ref() != "c"));
        let (_, tr) = normalize(&t("f(a, c)"), &s, StrategyKind::Fair, 4, 400).unwrap();
        assert!(tr.steps.iter().any(|st| st.rule.name.as_ref() == "c"));
    }

    #[test]
    fn map_over_rec_list() {
        let s = sys(MAP);
        let start = t("map([z]s(z), rec L. cons(0, L))");
        for k in ALL {
            let (a, tr) = normalize(&start, &s, k, 3, 200).unwrap();
            assert!(alpha_eq(&a.term, &t("cons(s(0), cons(s(_|_), cons(_|_, _|_)))")), "{k}: {}", a.term);
            assert!(alpha_eq(&truncate(tr.last(), 3), &a.term));
            assert_eq!(detect_rational_nf(&tr, &s).map(|n| n.to_string()), Some("rec C. cons(s(0), C)".to_string()));
        }
    }

    #[test]
    fn already_normal() {
        let s = sys(LOOPING_ARG);
        let (a, tr) = normalize(&t("g(b, b)"), &s, StrategyKind::Fair, 3, 10).unwrap();
        assert!(tr.is_empty());
        assert!(alpha_eq(&a.term, &t("g(b, b)")));
        assert!(alpha_eq(&detect_rational_nf(&tr, &s).unwrap(), &t("g(b, b)")));
    }

    #[test]
    fn aperiodic_has_no_rational_form() {
        let s = sys("rule nat: nat(X) -> cons(X, nat(s(X)));");
        let (_, tr) = normalize(&t("nat(0)"), &s, StrategyKind::Fair, 5, 200).unwrap();
        assert!(detect_rational_nf(&tr, &s).is_none());
    }

    #[test]
    fn divergence_is_reported() {
        let s = sys("rule c: c -> c;");
        match normalize(&t("c"), &s, StrategyKind::Fair, 2, 20) {
            Err(StrategyError::FuelExhausted { divergence_suspected, trace }) => {
                assert!(divergence_suspected);
                assert_eq!(trace.len(), 20);
            }
            other => panic!("{other:?}"),
        }
        let s = sys("rule e: eq(X, X) -> t;");
        assert!(matches!(normalize(&t("a"), &s, StrategyKind::Fair, 2, 20), Err(StrategyError::SystemCheckFailed(_))));
    }

    #[test]
    fn audits_delayed_root() {
        let s = sys(DELAYED_ROOT);
        let start = t("f(a)");
        let mut first = vec![(1, pos("1")), (1, pos("11")), (0, Position::root())];
        for k in 3..12 {
            first.push((1, Position::from_steps(&vec![1; k])));
        }
        let tr = Trace::replay(&start, &s, &first, 20).unwrap();
        let v = fairness_audit(&tr, &s, StrategyKind::OutermostFair, 6).unwrap();
        assert!(v.passed(), "{v}");
        let second: Vec<_> = (1..14).map(|k| (1, Position::from_steps(&vec![1; k]))).collect();
        let tr = Trace::replay(&start, &s, &second, 20).unwrap();
        let v = fairness_audit(&tr, &s, StrategyKind::OutermostFair, 6).unwrap();
        assert_eq!(v.violation.as_ref().unwrap().redex, (Position::root(), 0));
    }

    fn looping_arg_fair_prefix() -> Vec<(usize, Position)> {
        // f at 2^k then a at 2^k 1
        let mut out = Vec::new();
        for k in 0..8 {
            out.push((0, Position::from_steps(&vec![2; k])));
            let mut p = vec![2; k];
            p.push(1);
            out.push((1, Position::from_steps(&p)));
        }
        out
    }

    #[test]
    fn audits_looping_arg() {
        let s = sys(LOOPING_ARG);
        let tr = Trace::replay(&t("f(a, c)"), &s, &looping_arg_fair_prefix(), 6).unwrap();
        let fair = fairness_audit(&tr, &s, StrategyKind::Fair, 8).unwrap();
        assert!(!fair.passed());
        assert_eq!(fair.violation.unwrap().redex.1, 2);
        assert!(fairness_audit(&tr, &s, StrategyKind::OutermostFair, 8).unwrap().passed());
        assert!(fairness_audit(&tr, &s, StrategyKind::needed(), 8).unwrap().passed());
    }

    #[test]
    fn produced_traces_pass_their_audit() {
        for (src, start) in [(DELAYED_ROOT, "f(a)"), (LOOPING_ARG, "f(a, c)"), (MAP, "map([z]s(z), rec L. cons(0, L))")] {
            let s = sys(src);
            for k in ALL {
                let (_, tr) = normalize(&t(start), &s, k, 4, 400).unwrap();
                let w = default_window(&tr, &s);
                let v = fairness_audit(&tr, &s, k, w).unwrap();
                assert!(v.passed(), "{start} {k}: {v}");
                if k == StrategyKind::Fair {
                    assert!(fairness_audit(&tr, &s, StrategyKind::OutermostFair, w).unwrap().passed());
                }
            }
        }
    }

    #[test]
    fn pilot_strata() {
        let s = sys(DELAYED_ROOT);
        let p = needed_pilot(&t("f(a)"), &s, 3, 100).unwrap();
        assert_eq!(p.goal(), 3);
        for d in 0..=3 {
            assert!(p.trace.steps[p.strata[d]..].iter().all(|st| st.redex.position.len() >= d));
            assert_eq!(p.prefix(d).len(), d);
        }
        let p = needed_pilot(&t("b"), &sys(LOOPING_ARG), 3, 100).unwrap();
        assert!(p.strata.iter().all(|&i| i == 0));
        let e = needed_pilot(&t("f(a, c)"), &sys(LOOPING_ARG), 4, 100).unwrap().essential_positions(&sys(LOOPING_ARG)).unwrap();
        assert!(e.contains(&Position::root()) && e.contains(&pos("1")) && !e.contains(&pos("2")));
    }

    #[test]
    fn select_matches_run() {
        let s = sys(LOOPING_ARG);
        let (_, tr) = normalize(&t("f(a, c)"), &s, StrategyKind::Fair, 3, 100).unwrap();
        let mut part = Trace::new(&tr.start, tr.bound, tr.goal);
        for st in &tr.steps {
            let r = select(&s, StrategyKind::Fair, &part, &st.source).unwrap();
            assert_eq!(r.key(), st.redex.key());
            part.steps.push(st.clone());
        }
    }
}
