//! Essential positions and redexes, the measure on sequences of developments,
//! mirroring, and the emaciated projection.

use std::collections::BTreeSet;
use std::fmt;

use crate::devel::{complete_development, project_sequence, DevRecord, DevSequence, DevelError};
use crate::ops::{canon_head_at, is_position, is_prefix_set, node_at, truncate, PrefixSet};
use crate::paths::{has_finite_jumps, PState, Path, PathError, PathNode, PathSpace, RedexKey, RedexSet};
use crate::position::Position;
use crate::rewrite::{contract, match_at, match_node, Redex, RewriteError, Valuation};
use crate::system::RewriteSystem;
use crate::term::Term;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EssentialError {
    #[error(transparent)]
    Devel(#[from] DevelError),
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error("the given set is not a prefix set of {0}")]
    NotAPrefixSet(String),
    #[error("no redex of rule {rule} at {position} in the initial term")]
    NotARedex { position: Position, rule: usize },
    #[error("a residual of the projected redex lies in the prefix set at {0}")]
    ResidualHitsPrefix(Position),
    #[error("mirror broken at stage {stage}: no redex at {position}")]
    MirrorBroken { stage: usize, position: Position },
    #[error("the reduction does not converge: {0}")]
    NonConvergence(String),
}

impl From<PathError> for EssentialError {
    fn from(e: PathError) -> Self {
        EssentialError::Devel(DevelError::Path(e))
    }
}

/// The paths of a development whose projected edge word lies in `anchor`.
#[derive(Debug, Clone)]
pub struct PathPrefixSet {
    pub paths: Vec<Path>,
    pub anchor: PrefixSet,
    zetas: Vec<BTreeSet<Position>>,
}

impl PathPrefixSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Paths as node and edge sequences, for comparison across terms.
    pub fn shapes(&self) -> BTreeSet<(Vec<PathNode>, Vec<Option<usize>>)> {
        self.paths.iter().map(|p| (p.nodes.clone(), p.edges.clone())).collect()
    }

    /// `ζ(Ψ)`.
    pub fn zeta_union(&self) -> BTreeSet<Position> {
        self.zetas.iter().flatten().cloned().collect()
    }
}

fn zeta_of_state(space: &mut PathSpace, st: &PState) -> BTreeSet<Position> {
    match st {
        PState::Term { node, pos, .. } => {
            let p = pos.clone().expect("concrete path space");
            match space.redex_rule(*node, pos) {
                Some(r) => space.sys.rules[r].pattern_positions().iter().map(|q| p.concat(q)).collect(),
                None => BTreeSet::from([p]),
            }
        }
        PState::Rule(_) => BTreeSet::new(),
    }
}

/// `ζ` of a path of `s` with respect to `set`.
pub fn zeta(s: &Term, sys: &RewriteSystem, set: &RedexSet, path: &Path) -> BTreeSet<Position> {
    match path.nodes.last() {
        Some(PathNode::Term(p)) => {
            let rule = match set {
                RedexSet::Finite(ks) => ks.iter().find(|(q, _)| q == p).map(|(_, r)| *r),
                RedexSet::All => node_at(s, p).and_then(|n| sys.rules.iter().position(|r| match_node(r, s, n).is_some())),
            };
            match rule {
                Some(r) => sys.rules[r].pattern_positions().iter().map(|q| p.concat(q)).collect(),
                None => BTreeSet::from([p.clone()]),
            }
        }
        _ => BTreeSet::new(),
    }
}

fn check_prefix_set(p: &PrefixSet, t: &Term) -> Result<(), EssentialError> {
    if is_prefix_set(p.positions(), t) {
        Ok(())
    } else {
        Err(EssentialError::NotAPrefixSet(t.to_string()))
    }
}

pub fn path_prefix_set(sys: &RewriteSystem, p: &PrefixSet, stage: &DevRecord) -> Result<PathPrefixSet, EssentialError> {
    check_prefix_set(p, &stage.target)?;
    let (s, set) = (&stage.source, &stage.set);
    if !has_finite_jumps(s, sys, set) {
        return Err(PathError::FiniteJumpsViolated.into());
    }
    let mut out = PathPrefixSet { paths: Vec::new(), anchor: p.clone(), zetas: Vec::new() };
    if !p.contains(&Position::root()) {
        return Ok(out);
    }
    let mut space = PathSpace::new(s, sys, set, true);
    let init = space.initial();
    let l0 = space.label(&init);
    let mut stack = vec![(init.clone(), Path { nodes: vec![space.path_node(&init)], edges: vec![], labels: vec![l0], cut: false }, Position::root())];
    while let Some((st, path, w)) = stack.pop() {
        out.zetas.push(zeta_of_state(&mut space, &st));
        for (e, n) in space.successors(&st).into_iter().rev() {
            let w2 = match e {
                Some(i) => w.child(i),
                None => w.clone(),
            };
            if !p.contains(&w2) {
                continue;
            }
            let mut q = path.clone();
            q.nodes.push(space.path_node(&n));
            q.edges.push(e);
            q.labels.push(space.label(&n));
            stack.push((n, q, w2));
        }
        out.paths.push(path);
    }
    Ok(out)
}

/// `ε(P, s ⇒^U t)`: the positions of `s` essential for `P`.
pub fn epsilon_step(sys: &RewriteSystem, p: &PrefixSet, stage: &DevRecord) -> Result<PrefixSet, EssentialError> {
    let psi = path_prefix_set(sys, p, stage)?;
    PrefixSet::new(psi.zeta_union(), &stage.source).ok_or_else(|| EssentialError::NotAPrefixSet(stage.source.to_string()))
}

/// `(P_0, ..., P_n)` with `P_n = P`.
pub fn epsilon_seq(sys: &RewriteSystem, p: &PrefixSet, d: &DevSequence) -> Result<Vec<PrefixSet>, EssentialError> {
    check_prefix_set(p, d.last())?;
    let mut out = vec![p.clone()];
    for stage in d.stages.iter().rev() {
        let next = epsilon_step(sys, out.last().unwrap(), stage)?;
        out.push(next);
    }
    out.reverse();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Essentiality {
    Essential,
    Inessential,
}

impl fmt::Display for Essentiality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Essentiality::Essential => write!(f, "essential"),
            Essentiality::Inessential => write!(f, "inessential"),
        }
    }
}

pub fn classify_redex(sys: &RewriteSystem, u: &RedexKey, d: &DevSequence, p: &PrefixSet) -> Result<Essentiality, EssentialError> {
    if sys.rules.get(u.1).and_then(|r| match_at(r, &d.start, &u.0)).is_none() {
        return Err(EssentialError::NotARedex { position: u.0.clone(), rule: u.1 });
    }
    let ps = epsilon_seq(sys, p, d)?;
    Ok(if ps[0].contains(&u.0) { Essentiality::Essential } else { Essentiality::Inessential })
}

/// `(l_n, ..., l_1)`: sizes of the stage path prefix sets, last stage first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Measure(pub Vec<usize>);

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v: Vec<String> = self.0.iter().map(|x| x.to_string()).collect();
        write!(f, "({})", v.join(","))
    }
}

/// Length first, then lexicographic.
pub fn measure_less(a: &Measure, b: &Measure) -> bool {
    (a.0.len(), &a.0) < (b.0.len(), &b.0)
}

pub fn measure(sys: &RewriteSystem, d: &DevSequence, p: &PrefixSet) -> Result<Measure, EssentialError> {
    let ps = epsilon_seq(sys, p, d)?;
    let mut out = Vec::with_capacity(d.len());
    for i in (1..=d.len()).rev() {
        out.push(path_prefix_set(sys, &ps[i], &d.stages[i - 1])?.len());
    }
    Ok(Measure(out))
}

/// Why a mirror check failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MirrorFailure {
    pub stage: Option<usize>,
    pub position: Option<Position>,
    pub reason: String,
}

impl fmt::Display for MirrorFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(i) = self.stage {
            write!(f, "stage {i}: ")?;
        }
        if let Some(p) = &self.position {
            write!(f, "at {p}: ")?;
        }
        write!(f, "{}", self.reason)
    }
}

fn fail(stage: Option<usize>, position: Option<Position>, reason: impl Into<String>) -> MirrorFailure {
    MirrorFailure { stage, position, reason: reason.into() }
}

/// `t` mirrors `s` in `P`: `P` is a set of positions of `t` and the heads agree on it.
pub fn mirrors(t: &Term, s: &Term, p: &PrefixSet) -> Result<(), MirrorFailure> {
    for q in p.iter() {
        if !is_position(t, q) {
            return Err(fail(None, Some(q.clone()), "not a position of the mirroring term"));
        }
        let (a, b) = (canon_head_at(t, q), canon_head_at(s, q));
        if a != b {
            return Err(fail(None, Some(q.clone()), format!("{a:?} differs from {b:?}")));
        }
    }
    Ok(())
}

fn sub_mirror_check(
    sys: &RewriteSystem,
    e: &DevSequence,
    q: &PrefixSet,
    d: &DevSequence,
    p: &PrefixSet,
    sub: bool,
) -> Result<Option<MirrorFailure>, EssentialError> {
    if e.len() != d.len() {
        return Ok(Some(fail(None, None, "sequences differ in length")));
    }
    if !q.is_subset(p) {
        return Ok(Some(fail(None, None, "prefix sets are not included")));
    }
    if !is_prefix_set(q.positions(), e.last()) {
        return Ok(Some(fail(Some(e.len()), None, "not a prefix set of the final term")));
    }
    let ps = epsilon_seq(sys, p, d)?;
    let qs = epsilon_seq(sys, q, e)?;
    for i in 0..=d.len() {
        let ok = if sub { qs[i].is_subset(&ps[i]) } else { qs[i] == ps[i] };
        if !ok {
            return Ok(Some(fail(Some(i), None, format!("essential sets {} and {} differ", qs[i], ps[i]))));
        }
        if let Err(mut f) = mirrors(e.term(i), d.term(i), &qs[i]) {
            f.stage = Some(i);
            return Ok(Some(f));
        }
        if i > 0 {
            let a = path_prefix_set(sys, &qs[i], &e.stages[i - 1])?.shapes();
            let b = path_prefix_set(sys, &ps[i], &d.stages[i - 1])?.shapes();
            let ok = if sub { a.is_subset(&b) } else { a == b };
            if !ok {
                return Ok(Some(fail(Some(i), None, "path prefix sets differ")));
            }
        }
    }
    Ok(None)
}

/// Which notion of mirroring to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MirrorMode {
    Sequence,
    Sub,
}

/// `E` mirrors (or sub-mirrors, in `Q ⊆ P`) `D`. `Ok(None)` means the check passed.
pub fn check_mirror(
    sys: &RewriteSystem,
    e: &DevSequence,
    q: &PrefixSet,
    d: &DevSequence,
    p: &PrefixSet,
    mode: MirrorMode,
) -> Result<Option<MirrorFailure>, EssentialError> {
    sub_mirror_check(sys, e, q, d, p, mode == MirrorMode::Sub)
}

/// The essential redexes of one stage, found at positions of `essential`.
fn essential_redexes(sys: &RewriteSystem, stage: &DevRecord, essential: &PrefixSet) -> BTreeSet<RedexKey> {
    match &stage.set {
        RedexSet::Finite(ks) => ks.iter().filter(|(q, _)| essential.contains(q)).cloned().collect(),
        RedexSet::All => essential
            .iter()
            .flat_map(|q| {
                (0..sys.rules.len()).filter(move |&r| match_at(&sys.rules[r], &stage.source, q).is_some()).map(move |r| (q.clone(), r))
            })
            .collect(),
    }
}

/// Rebuild `D` from `start` keeping only essential redexes; every stage is finite.
pub fn essential_skeleton(sys: &RewriteSystem, d: &DevSequence, p: &PrefixSet, start: &Term) -> Result<DevSequence, EssentialError> {
    let ps = epsilon_seq(sys, p, d)?;
    if let Err(f) = mirrors(start, &d.start, &ps[0]) {
        return Err(EssentialError::NotAPrefixSet(format!("start term does not mirror: {f}")));
    }
    let mut cur = start.clone();
    let mut stages = Vec::with_capacity(d.len());
    for (i, stage) in d.stages.iter().enumerate() {
        let keep = essential_redexes(sys, stage, &ps[i]);
        for (q, r) in &keep {
            if match_at(&sys.rules[*r], &cur, q).is_none() {
                return Err(EssentialError::MirrorBroken { stage: i + 1, position: q.clone() });
            }
        }
        let dev = complete_development(&cur, sys, &RedexSet::Finite(keep))?;
        cur = dev.target.clone();
        stages.push(dev);
    }
    Ok(DevSequence::from_stages(start, stages)?)
}

/// A projected sequence with its essential sets and measure.
#[derive(Debug, Clone)]
pub struct ProjectionResult {
    pub sequence: DevSequence,
    pub essential: Vec<PrefixSet>,
    pub measure: Measure,
}

impl ProjectionResult {
    fn of(sys: &RewriteSystem, sequence: DevSequence, p: &PrefixSet) -> Result<Self, EssentialError> {
        let essential = epsilon_seq(sys, p, &sequence)?;
        let measure = measure(sys, &sequence, p)?;
        Ok(ProjectionResult { sequence, essential, measure })
    }
}

/// `D ∖∖ u`: the projection of the essential skeleton of `D` over the step contracting `u`.
pub fn emaciate_step(sys: &RewriteSystem, d: &DevSequence, u: &RedexKey, p: &PrefixSet) -> Result<ProjectionResult, EssentialError> {
    if sys.rules.get(u.1).and_then(|r| match_at(r, &d.start, &u.0)).is_none() {
        return Err(EssentialError::NotARedex { position: u.0.clone(), rule: u.1 });
    }
    let e = essential_skeleton(sys, d, p, &d.start)?;
    let proj = project_sequence(sys, &e, u)?;
    if let Some((q, _)) = proj.tail.set.finite().unwrap().iter().find(|(q, _)| p.contains(q)) {
        return Err(EssentialError::ResidualHitsPrefix(q.clone()));
    }
    ProjectionResult::of(sys, proj.sequence, p)
}

/// A reduction to project over: finitely many steps, or an eventually periodic
/// infinite reduction whose iterations move down by `shift`.
#[derive(Debug, Clone)]
pub enum Reduction {
    Finite(Vec<RedexKey>),
    Periodic {
        prefix: Vec<RedexKey>,
        /// Steps of iteration `k` are the period steps below `shift` repeated `k` times.
        period: Vec<RedexKey>,
        shift: Position,
        /// The claimed limit; checked against truncations of the approximants.
        limit: Term,
    },
}

/// Outcome of projecting over a whole reduction.
#[derive(Debug, Clone)]
pub struct ReductionProjection {
    pub result: ProjectionResult,
    /// Measures after each step (index 0 is the input).
    pub measures: Vec<Measure>,
    /// For periodic reductions: the index from which the measure is constant.
    pub stable_from: Option<usize>,
}

/// Upper bound on steps simulated before a periodic reduction must have stabilised.
pub const MAX_PROJECTED_STEPS: usize = 2000;

pub fn emaciate_reduction(sys: &RewriteSystem, d: &DevSequence, r: &Reduction, p: &PrefixSet) -> Result<ReductionProjection, EssentialError> {
    let mut cur = ProjectionResult::of(sys, d.clone(), p)?;
    let mut measures = vec![cur.measure.clone()];
    let mut term = d.start.clone();
    let step = |cur: &ProjectionResult, term: &Term, u: &RedexKey| -> Result<(ProjectionResult, Term), EssentialError> {
        let next = emaciate_step(sys, &cur.sequence, u, p)?;
        let t = contract(term, sys, &Redex { position: u.0.clone(), rule: u.1, valuation: Valuation::new() })?.target;
        Ok((next, t))
    };
    match r {
        Reduction::Finite(steps) => {
            for u in steps {
                let (n, t) = step(&cur, &term, u)?;
                cur = n;
                term = t;
                measures.push(cur.measure.clone());
            }
            Ok(ReductionProjection { result: cur, measures, stable_from: None })
        }
        Reduction::Periodic { prefix, period, shift, limit } => {
            if shift.is_root() || period.is_empty() {
                return Err(EssentialError::NonConvergence("the period does not move down".into()));
            }
            for u in prefix {
                let (n, t) = step(&cur, &term, u)?;
                cur = n;
                term = t;
                measures.push(cur.measure.clone());
            }
            let min_depth = period.iter().map(|(q, _)| q.len()).min().unwrap();
            let mut offset = Position::root();
            // history of (measure, sequence) to pick the least stable index
            let mut history: Vec<ProjectionResult> = vec![cur.clone()];
            loop {
                let depth_now = offset.len() + min_depth;
                if depth_now > cur.essential[0].max_len() && depth_now > p.max_len() {
                    break;
                }
                if measures.len() > MAX_PROJECTED_STEPS {
                    return Err(EssentialError::NonConvergence("measure did not stabilise".into()));
                }
                for (q, rule) in period {
                    let u = (offset.concat(q), *rule);
                    let (n, t) = step(&cur, &term, &u)?;
                    cur = n;
                    term = t;
                    measures.push(cur.measure.clone());
                    history.push(cur.clone());
                }
                offset = offset.concat(shift);
            }
            let floor = offset.len() + min_depth;
            if truncate(&term, floor) != truncate(limit, floor) && !crate::ops::alpha_eq(&truncate(&term, floor), &truncate(limit, floor)) {
                return Err(EssentialError::NonConvergence(format!("approximant disagrees with the limit above depth {floor}")));
            }
            let last = measures.last().unwrap().clone();
            let beta = measures.iter().rposition(|m| *m != last).map_or(0, |i| i + 1);
            let base = &history[beta.saturating_sub(measures.len() - history.len())];
            let seq = essential_skeleton(sys, &base.sequence, p, limit)?;
            let result = ProjectionResult::of(sys, seq, p)?;
            Ok(ReductionProjection { result, measures, stable_from: Some(beta) })
        }
    }
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

    fn pset(ps: &[&str], on: &Term) -> PrefixSet {
        PrefixSet::new(ps.iter().map(|p| pos(p)), on).unwrap()
    }

    fn positions(ps: &PrefixSet) -> Vec<String> {
        ps.iter().map(|p| p.compact()).collect()
    }

    const PROJECTION: &str = "rule f: f([x]Z(x)) -> Z(Z(a)); rule g: g(Z) -> h(Z);";

    fn projection_fixture() -> (RewriteSystem, DevSequence) {
        let sys = RewriteSystem::parse(PROJECTION).unwrap();
        let s0 = t("g(f([x]g(g(x))))");
        let d = DevSequence::build(
            &s0,
            &sys,
            &[RedexSet::of([(pos("1101"), 1)]), RedexSet::of([(pos("110"), 1)]), RedexSet::of([(pos("1"), 0)])],
        )
        .unwrap();
        (sys, d)
    }

    #[test]
    fn example_path_prefix_set() {
        let sys = RewriteSystem::parse("rule r: f([x]Z(x), Z') -> Z(g(Z(Z')));").unwrap();
        let s = t("f([x]g(x), a)");
        let dev = complete_development(&s, &sys, &RedexSet::of([(Position::root(), 0)])).unwrap();
        let p = pset(&["@", "1", "11"], &dev.target);
        let psi = path_prefix_set(&sys, &p, &dev).unwrap();
        assert_eq!(psi.len(), 7);
        let longest = psi.paths.iter().max_by_key(|p| p.nodes.len()).unwrap();
        assert_eq!(
            longest.render("s", &sys),
            "(s,@) -e-> (r,@,@) -e-> (s,10) -1-> (s,101) -e-> (r,1,@) -1-> (r,11,@) -e-> (s,10)"
        );
        let e = epsilon_step(&sys, &p, &dev).unwrap();
        assert_eq!(positions(&e), ["@", "1", "10", "101"]);
        assert!(path_prefix_set(&sys, &PrefixSet::empty(), &dev).unwrap().is_empty());
        let root_only = path_prefix_set(&sys, &pset(&["@"], &dev.target), &dev).unwrap();
        assert!(root_only.paths.iter().all(|p| p.word().is_root()));
        assert_eq!(root_only.len(), 3);
    }

    #[test]
    fn zeta_clauses() {
        let sys = RewriteSystem::parse("rule r: f([x]Z(x), Z') -> Z(g(Z(Z')));").unwrap();
        let s = t("f([x]g(x), a)");
        let set = RedexSet::of([(Position::root(), 0)]);
        let mk = |n: PathNode| Path { nodes: vec![n], edges: vec![], labels: vec![None], cut: false };
        assert_eq!(zeta(&s, &sys, &set, &mk(PathNode::Term(pos("2")))), BTreeSet::from([pos("2")]));
        assert_eq!(zeta(&s, &sys, &set, &mk(PathNode::Term(Position::root()))), BTreeSet::from([Position::root(), pos("1")]));
        let rn = PathNode::Rule { rule: 0, rhs_pos: Position::root(), redex_pos: Position::root() };
        assert!(zeta(&s, &sys, &set, &mk(rn)).is_empty());
    }

    #[test]
    fn projection_epsilon_and_measure() {
        let (sys, d) = projection_fixture();
        assert!(alpha_eq(d.last(), &t("g(h(h(h(h(a)))))")));
        let p = pset(&["@", "1"], d.last());
        let ps = epsilon_seq(&sys, &p, &d).unwrap();
        assert_eq!(positions(&ps[0]), ["@", "1", "11", "110"]);
        assert_eq!(positions(&ps[2]), ["@", "1", "11", "110"]);
        assert_eq!(measure(&sys, &d, &p).unwrap(), Measure(vec![4, 5, 4]));
        assert_eq!(classify_redex(&sys, &(pos("1"), 0), &d, &p).unwrap(), Essentiality::Essential);
        assert_eq!(classify_redex(&sys, &(pos("1"), 0), &d, &PrefixSet::empty()).unwrap(), Essentiality::Inessential);
    }

    #[test]
    fn projection_steps() {
        let (sys, d) = projection_fixture();
        let p = pset(&["@", "1"], d.last());
        let r1 = emaciate_step(&sys, &d, &(pos("1"), 0), &p).unwrap();
        let seq = &r1.sequence;
        assert!(alpha_eq(seq.term(0), &t("g(g(g(g(g(a)))))")));
        assert!(alpha_eq(seq.term(1), &t("g(g(g(g(g(a)))))")));
        assert!(alpha_eq(seq.term(2), &t("g(h(g(h(g(a)))))")));
        assert!(alpha_eq(seq.term(3), &t("g(h(g(h(g(a)))))")));
        assert_eq!(seq.stages[1].set, RedexSet::of([(pos("1"), 1), (pos("111"), 1)]));
        assert_eq!(r1.measure, Measure(vec![2, 3, 2]));
        assert!(measure_less(&r1.measure, &measure(&sys, &d, &p).unwrap()));

        assert_eq!(classify_redex(&sys, &(pos("1111"), 1), seq, &p).unwrap(), Essentiality::Inessential);
        let r2 = emaciate_step(&sys, seq, &(pos("1111"), 1), &p).unwrap();
        assert!(alpha_eq(r2.sequence.term(0), &t("g(g(g(g(h(a)))))")));
        assert!(alpha_eq(r2.sequence.term(3), &t("g(h(g(g(h(a)))))")));
        assert_eq!(r2.sequence.stages[1].set, RedexSet::of([(pos("1"), 1)]));
        assert_eq!(r2.measure, r1.measure);
        assert_eq!(r2.essential[0], r1.essential[0]);

        let r3 = emaciate_step(&sys, &r2.sequence, &(pos("1"), 1), &p).unwrap();
        for i in 0..=3 {
            assert!(alpha_eq(r3.sequence.term(i), &t("g(h(g(g(h(a)))))")));
        }
        assert!(measure_less(&r3.measure, &r2.measure));
        assert_eq!(r3.measure, Measure(vec![2, 2, 2]));

        // the root redex always has a residual in P
        assert!(matches!(emaciate_step(&sys, &r3.sequence, &(Position::root(), 1), &p), Err(EssentialError::ResidualHitsPrefix(_))));
    }

    #[test]
    fn composite_reduction_matches_steps() {
        let (sys, d) = projection_fixture();
        let p = pset(&["@", "1"], d.last());
        let r = Reduction::Finite(vec![(pos("1"), 0), (pos("1111"), 1), (pos("1"), 1)]);
        let out = emaciate_reduction(&sys, &d, &r, &p).unwrap();
        assert_eq!(out.measures.iter().map(|m| m.to_string()).collect::<Vec<_>>(), ["(4,5,4)", "(2,3,2)", "(2,3,2)", "(2,2,2)"]);
        assert!(alpha_eq(out.result.sequence.last(), &t("g(h(g(g(h(a)))))")));
        let empty = emaciate_reduction(&sys, &d, &Reduction::Finite(vec![]), &p).unwrap();
        assert!(alpha_eq(empty.result.sequence.last(), d.last()));
    }

    #[test]
    fn measure_order() {
        assert!(measure_less(&Measure(vec![9]), &Measure(vec![0, 0])));
        assert!(measure_less(&Measure(vec![2, 0]), &Measure(vec![2, 1])));
        assert!(!measure_less(&Measure(vec![2, 1]), &Measure(vec![2, 1])));
    }

    #[test]
    fn term_mirrors() {
        let a = t("g(h(g(h(g(a)))))");
        let b = t("g(h(h(h(h(a)))))");
        let p = pset(&["@", "1"], &b);
        assert!(mirrors(&a, &b, &p).is_ok());
        assert!(mirrors(&b, &b, &p).is_ok());
        let c = t("g(g(g(g(g(a)))))");
        assert_eq!(mirrors(&c, &b, &p).unwrap_err().position, Some(pos("1")));
    }

    #[test]
    fn skeleton_mirrors_original() {
        let (sys, d) = projection_fixture();
        let p = pset(&["@", "1"], d.last());
        let e = essential_skeleton(&sys, &d, &p, &d.start).unwrap();
        assert!(e.stages.iter().all(|s| s.set.is_finite()));
        assert!(check_mirror(&sys, &e, &p, &d, &p, MirrorMode::Sequence).unwrap().is_none());
        assert_eq!(measure(&sys, &e, &p).unwrap(), measure(&sys, &d, &p).unwrap());
        let empty = essential_skeleton(&sys, &d, &PrefixSet::empty(), &d.start).unwrap();
        assert!(empty.stages.iter().all(|s| s.set.is_empty()));
        let q = pset(&["@"], d.last());
        assert!(check_mirror(&sys, &e, &q, &d, &p, MirrorMode::Sub).unwrap().is_none());
    }

    #[test]
    fn periodic_inessential_steps_stabilise() {
        let sys = RewriteSystem::parse("rule a: a(X) -> b(X); rule c: c(X) -> d(X);").unwrap();
        let s0 = t("c(rec A. a(A))");
        let d = DevSequence::build(&s0, &sys, &[RedexSet::of([(Position::root(), 1)])]).unwrap();
        let p = pset(&["@"], d.last());
        let r = Reduction::Periodic {
            prefix: vec![],
            period: vec![(pos("1"), 0)],
            shift: pos("1"),
            limit: t("c(rec B. b(B))"),
        };
        let out = emaciate_reduction(&sys, &d, &r, &p).unwrap();
        assert_eq!(out.stable_from, Some(0));
        let sk = essential_skeleton(&sys, &d, &p, &t("c(rec B. b(B))")).unwrap();
        assert!(alpha_eq(out.result.sequence.last(), sk.last()));
        assert!(alpha_eq(out.result.sequence.last(), &t("d(rec B. b(B))")));
    }
}
