//! Complete developments, sequences of them, and projection over finite redex sets.

use std::collections::BTreeSet;
use std::fmt;

use crate::ops::alpha_eq;
use crate::paths::{path_descendants, target_term, validate, PathError, RedexKey, RedexSet};
use crate::position::Position;
use crate::rewrite::{contract, match_at, Redex, RewriteError, StepRecord, Valuation};
use crate::system::RewriteSystem;
use crate::term::Term;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DevelError {
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("stage {0} develops an infinite redex set")]
    InfiniteStageSet(usize),
    #[error("stage {0} does not start where the previous one ends")]
    Disconnected(usize),
}

/// Longest residual position considered when a residual set must be listed exactly.
pub const RESIDUAL_CAP: usize = 48;

/// `source ⇒^set target`.
#[derive(Debug, Clone)]
pub struct DevRecord {
    pub source: Term,
    pub target: Term,
    pub set: RedexSet,
    /// The innermost-first step sequence when `set` is finite.
    pub steps: Option<Vec<StepRecord>>,
}

impl DevRecord {
    pub fn identity(s: &Term) -> Self {
        DevRecord { source: s.clone(), target: s.clone(), set: RedexSet::empty(), steps: Some(Vec::new()) }
    }

    pub fn descendants(&self, sys: &RewriteSystem, ps: &BTreeSet<Position>, max_len: usize) -> Result<BTreeSet<Position>, DevelError> {
        Ok(path_descendants(&self.source, sys, &self.set, ps, max_len)?)
    }

    /// Residuals of the redexes `us` of the source, listing positions of length `<= max_len`.
    pub fn residuals(&self, sys: &RewriteSystem, us: &BTreeSet<RedexKey>, max_len: usize) -> Result<BTreeSet<RedexKey>, DevelError> {
        let mut out = BTreeSet::new();
        for (p, r) in us {
            if self.set.finite().is_some_and(|s| s.contains(&(p.clone(), *r))) {
                continue;
            }
            for q in self.descendants(sys, &BTreeSet::from([p.clone()]), max_len)? {
                if match_at(&sys.rules[*r], &self.target, &q).is_some() {
                    out.insert((q, *r));
                }
            }
        }
        Ok(out)
    }

    /// Residuals that must be finite; an error if they grow with the cap.
    pub fn finite_residuals(&self, sys: &RewriteSystem, us: &BTreeSet<RedexKey>) -> Result<BTreeSet<RedexKey>, DevelError> {
        let a = self.residuals(sys, us, RESIDUAL_CAP)?;
        let b = self.residuals(sys, us, RESIDUAL_CAP + 8)?;
        if a != b {
            return Err(DevelError::PreconditionViolated("infinite residual set".into()));
        }
        Ok(a)
    }
}

fn innermost_first(keys: &BTreeSet<RedexKey>) -> Vec<RedexKey> {
    let mut v: Vec<RedexKey> = keys.iter().cloned().collect();
    v.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.cmp(b)));
    v
}

/// Develop `set` completely. Finite sets are contracted innermost-first, which
/// never duplicates or moves a pending redex; `All` is developed in one jump via
/// the target term of the path graph.
pub fn complete_development(s: &Term, sys: &RewriteSystem, set: &RedexSet) -> Result<DevRecord, DevelError> {
    validate(s, sys, set)?;
    match set {
        RedexSet::Finite(keys) => {
            let mut cur = s.clone();
            let mut steps = Vec::new();
            for (p, r) in innermost_first(keys) {
                let st = contract(&cur, sys, &Redex { position: p, rule: r, valuation: Valuation::new() })?;
                cur = st.target.clone();
                steps.push(st);
            }
            Ok(DevRecord { source: s.clone(), target: cur, set: set.clone(), steps: Some(steps) })
        }
        RedexSet::All => {
            let target = target_term(s, sys, set)?;
            Ok(DevRecord { source: s.clone(), target, set: set.clone(), steps: None })
        }
    }
}

/// The commuting square of a complete development of U and one of a finite V.
#[derive(Debug, Clone)]
pub struct Square {
    /// `s ⇒^V t'`
    pub v_dev: DevRecord,
    /// `t' ⇒^{U/V} w`
    pub u_over_v: DevRecord,
    /// `t ⇒^{V/U} w'`, with `w'` α-equal to `w`
    pub v_over_u: DevRecord,
}

pub fn project_dev_over_finite(sys: &RewriteSystem, dev_u: &DevRecord, v: &BTreeSet<RedexKey>) -> Result<Square, DevelError> {
    let Some(u) = dev_u.set.finite() else {
        return Err(DevelError::PreconditionViolated("projection of an infinite development".into()));
    };
    let v_dev = complete_development(&dev_u.source, sys, &RedexSet::Finite(v.clone()))?;
    let u_res = v_dev.finite_residuals(sys, u)?;
    let v_res = dev_u.finite_residuals(sys, v)?;
    let u_over_v = complete_development(&v_dev.target, sys, &RedexSet::Finite(u_res))?;
    let v_over_u = complete_development(&dev_u.target, sys, &RedexSet::Finite(v_res))?;
    Ok(Square { v_dev, u_over_v, v_over_u })
}

/// A finite sequence of complete developments `s0 ⇒^{U1} s1 ⇒ ... ⇒^{Un} sn`.
#[derive(Debug, Clone)]
pub struct DevSequence {
    pub start: Term,
    pub stages: Vec<DevRecord>,
}

impl DevSequence {
    pub fn empty(s: &Term) -> Self {
        DevSequence { start: s.clone(), stages: Vec::new() }
    }

    /// Develop the given sets one after another.
    pub fn build(s: &Term, sys: &RewriteSystem, sets: &[RedexSet]) -> Result<Self, DevelError> {
        let mut cur = s.clone();
        let mut stages = Vec::new();
        for set in sets {
            let d = complete_development(&cur, sys, set)?;
            cur = d.target.clone();
            stages.push(d);
        }
        Ok(DevSequence { start: s.clone(), stages })
    }

    pub fn from_stages(start: &Term, stages: Vec<DevRecord>) -> Result<Self, DevelError> {
        let mut cur = start.clone();
        for (i, d) in stages.iter().enumerate() {
            if !alpha_eq(&cur, &d.source) {
                return Err(DevelError::Disconnected(i));
            }
            cur = d.target.clone();
        }
        Ok(DevSequence { start: start.clone(), stages })
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn last(&self) -> &Term {
        self.stages.last().map(|d| &d.target).unwrap_or(&self.start)
    }

    /// Term `s_i`; `s_0` is the start.
    pub fn term(&self, i: usize) -> &Term {
        if i == 0 {
            &self.start
        } else {
            &self.stages[i - 1].target
        }
    }

    pub fn sets(&self) -> Vec<RedexSet> {
        self.stages.iter().map(|d| d.set.clone()).collect()
    }
}

impl fmt::Display for DevSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.start)?;
        for d in &self.stages {
            write!(f, " =>{} {}", d.set, d.target)?;
        }
        Ok(())
    }
}

/// `D/u` together with the developments of `u` and of `u/D` closing it.
#[derive(Debug, Clone)]
pub struct ProjectedSequence {
    /// `s0 ⇒^{u} t0`
    pub head: DevRecord,
    /// `t0 ⇒^{V1} t1 ... ⇒^{Vn} tn`
    pub sequence: DevSequence,
    /// `sn ⇒^{u/D} tn`
    pub tail: DevRecord,
}

pub fn project_sequence(sys: &RewriteSystem, d: &DevSequence, u: &RedexKey) -> Result<ProjectedSequence, DevelError> {
    let mut cur_u: BTreeSet<RedexKey> = BTreeSet::from([u.clone()]);
    let head = complete_development(&d.start, sys, &RedexSet::Finite(cur_u.clone()))?;
    let mut stages = Vec::new();
    let mut last = head.clone();
    for (i, stage) in d.stages.iter().enumerate() {
        if !stage.set.is_finite() {
            return Err(DevelError::InfiniteStageSet(i + 1));
        }
        let sq = project_dev_over_finite(sys, stage, &cur_u)?;
        cur_u = sq.v_over_u.set.finite().unwrap().clone();
        stages.push(sq.u_over_v);
        last = sq.v_over_u;
    }
    let sequence = DevSequence::from_stages(&head.target, stages)?;
    Ok(ProjectedSequence { head, sequence, tail: last })
}
