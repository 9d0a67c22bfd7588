//! Randomised property suites comparing the engine against the oracles.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{
    agrees_above, all_development_orders, brute_needed, labelled_development, phi_injectivity_check, random_instance, random_prefix_set, rng,
    Neededness, OracleError, OracleReport,
};
use crate::devel::{complete_development, DevSequence};
use crate::essential::{check_mirror, classify_redex, emaciate_step, epsilon_step, measure, measure_less, EssentialError, Essentiality, MirrorMode};
use crate::ops::{positions_to_depth, PrefixSet};
use crate::paths::{RedexKey, RedexSet};
use crate::position::Position;
use crate::rewrite::find_redexes;
use crate::strategy::{needed_pilot, normalize, StrategyKind};
use crate::system::RewriteSystem;
use crate::term::{Node, Term};

const TREE_DEPTH: usize = 12;
const READ_LEN: usize = 7;

/// All development orders agree on target, descendants and residuals, and agree with the engine.
pub fn fjdt_suite(seed: u64, instances: usize) -> OracleReport {
    let mut rep = OracleReport::new("complete developments: unique target, descendants and residuals");
    for i in 0..instances as u64 {
        let inst = random_instance(seed.wrapping_add(i), 4);
        let mut r = rng(inst.seed ^ 0x5eed);
        let track = random_prefix_set(&mut r, &inst.term, 3);
        let others: Vec<RedexKey> = find_redexes(&inst.term, &inst.sys, 5).into_iter().map(|x| x.key()).filter(|k| !inst.set.contains(k)).collect();
        let other: BTreeSet<RedexKey> = others.choose_multiple(&mut r, 3).cloned().collect();
        let orders = match all_development_orders(&inst.term, &inst.sys, &inst.set, &track, &other, 2_000, TREE_DEPTH) {
            Ok(o) => o,
            Err(OracleError::Explosion(_)) => {
                rep.skip();
                continue;
            }
            Err(e) => {
                rep.record(false, || format!("{inst}: {e}"));
                continue;
            }
        };
        let dev = match complete_development(&inst.term, &inst.sys, &RedexSet::Finite(inst.set.clone())) {
            Ok(d) => d,
            Err(e) => {
                rep.record(false, || format!("{inst}: engine failed: {e}"));
                continue;
            }
        };
        let l = orders.reliable().min(READ_LEN);
        if l == 0 {
            rep.skip();
            continue;
        }
        let o = &orders.outcomes[0];
        let lim = |s: &BTreeSet<Position>| s.iter().filter(|p| p.len() < l).cloned().collect::<BTreeSet<_>>();
        let limr = |s: &BTreeSet<RedexKey>| s.iter().filter(|p| p.0.len() < l).cloned().collect::<BTreeSet<_>>();
        let desc = dev.descendants(&inst.sys, &track, l - 1);
        let res = dev.residuals(&inst.sys, &other, l - 1);
        let ok = orders.outcomes.len() == 1
            && agrees_above(&dev.target, &o.tree, l)
            && desc.as_ref().is_ok_and(|d| *d == lim(&o.descendants))
            && res.as_ref().is_ok_and(|d| *d == limr(&o.residuals));
        rep.record(ok, || {
            format!(
                "{inst}: {} outcomes; engine target {}, oracle {}; descendants {:?} vs {:?}; residuals {:?} vs {:?}",
                orders.outcomes.len(),
                dev.target,
                super::term_of(&o.tree),
                desc,
                lim(&o.descendants),
                res,
                limr(&o.residuals)
            )
        });
    }
    rep
}

/// A non-pattern position is essential exactly when one of its descendants lies in `P`.
pub fn essential_descendant_suite(seed: u64, instances: usize) -> OracleReport {
    let mut rep = OracleReport::new("essential non-pattern positions are those with a descendant in P");
    for i in 0..instances as u64 {
        let inst = random_instance(seed.wrapping_add(i), 4);
        let mut r = rng(inst.seed ^ 0x48);
        let set = RedexSet::Finite(inst.set.clone());
        let Ok(dev) = complete_development(&inst.term, &inst.sys, &set) else {
            rep.skip();
            continue;
        };
        let p = PrefixSet::new(random_prefix_set(&mut r, &dev.target, 3), &dev.target).unwrap();
        let ess = match epsilon_step(&inst.sys, &p, &dev) {
            Ok(e) => e,
            Err(e) => {
                rep.record(false, || format!("{inst}: {e}"));
                continue;
            }
        };
        let pattern: BTreeSet<Position> = inst
            .set
            .iter()
            .flat_map(|(q, rule)| inst.sys.rules[*rule].pattern_positions().iter().map(|w| q.concat(w)).collect::<Vec<_>>())
            .collect();
        let mut bad = None;
        let mut checked = 0;
        for (q, _) in positions_to_depth(&inst.term, 4) {
            if pattern.contains(&q) || binder_of(&inst.term, &q).is_some_and(|b| pattern.contains(&b)) {
                continue;
            }
            let Some(o) = labelled_development(&inst.term, &inst.sys, &inst.set, &BTreeSet::from([q.clone()]), TREE_DEPTH, 400) else {
                continue;
            };
            if o.reliable <= p.max_len() + 1 {
                continue;
            }
            checked += 1;
            let hit = o.descendants.iter().any(|d| p.contains(d));
            if hit != ess.contains(&q) {
                bad = Some(format!("{inst}: P = {p}, position {q}: essential {}, descendant in P {hit}", ess.contains(&q)));
                break;
            }
        }
        if checked == 0 {
            rep.skip();
            continue;
        }
        rep.record(bad.is_none(), || bad.unwrap());
    }
    rep
}

/// Position of the abstraction binding the variable at `q`, if `q` holds a bound variable.
fn binder_of(t: &Term, q: &Position) -> Option<Position> {
    let mut n = Term::ROOT;
    let mut binders: Vec<(crate::term::Name, usize)> = Vec::new();
    for (k, &i) in q.steps().iter().enumerate() {
        if let Node::Abs(x, _) = t.node(n) {
            binders.push((x.clone(), k));
        }
        n = t.node(n).step(i)?;
    }
    let Node::Var(x) = t.node(n) else { return None };
    let (_, k) = binders.iter().rev().find(|(y, _)| y == x)?;
    Some(Position::from_steps(&q.steps()[..*k]))
}

/// A random sequence of up to three finite developments from `s`.
pub fn random_sequence(r: &mut impl Rng, s: &Term, sys: &RewriteSystem) -> Option<DevSequence> {
    let stages = r.gen_range(1..=3);
    let mut sets = Vec::new();
    let mut cur = s.clone();
    for _ in 0..stages {
        let rs: Vec<RedexKey> = find_redexes(&cur, sys, 4).into_iter().map(|x| x.key()).collect();
        let k = r.gen_range(0..=rs.len().min(3));
        let set = RedexSet::Finite(rs.choose_multiple(r, k).cloned().collect());
        cur = complete_development(&cur, sys, &set).ok()?.target;
        sets.push(set);
    }
    DevSequence::build(s, sys, &sets).ok()
}

/// Essential steps decrease the measure; inessential ones keep measure, `ε_0` and mirroring.
pub fn measure_suite(seed: u64, instances: usize) -> OracleReport {
    let mut rep = OracleReport::new("emaciated projection: measure laws");
    for i in 0..instances as u64 {
        let inst = random_instance(seed.wrapping_add(i), 4);
        let mut r = rng(inst.seed ^ 0x413);
        let Some(d) = random_sequence(&mut r, &inst.term, &inst.sys) else {
            rep.skip();
            continue;
        };
        let p = PrefixSet::new(random_prefix_set(&mut r, d.last(), 3), d.last()).unwrap();
        let rs: Vec<RedexKey> = find_redexes(&d.start, &inst.sys, 5).into_iter().map(|x| x.key()).collect();
        let u = rs.choose(&mut r).unwrap().clone();
        let sys = &inst.sys;
        let outcome = (|| -> Result<Option<String>, EssentialError> {
            let kind = classify_redex(sys, &u, &d, &p)?;
            let before = measure(sys, &d, &p)?;
            let eps0 = crate::essential::epsilon_seq(sys, &p, &d)?.remove(0);
            let proj = emaciate_step(sys, &d, &u, &p)?;
            Ok(match kind {
                Essentiality::Essential if !measure_less(&proj.measure, &before) => Some(format!("essential step did not decrease {before} to {}", proj.measure)),
                Essentiality::Inessential if proj.measure != before => Some(format!("inessential step changed {before} to {}", proj.measure)),
                Essentiality::Inessential if proj.essential[0] != eps0 => Some(format!("inessential step changed ε0 {eps0} to {}", proj.essential[0])),
                Essentiality::Inessential => check_mirror(sys, &proj.sequence, &p, &d, &p, MirrorMode::Sequence)?.map(|f| format!("mirror: {f}")),
                _ => None,
            })
        })();
        match outcome {
            Ok(v) => rep.record(v.is_none(), || format!("{inst}: D = {d}, P = {p}, u = {}: {}", u.0, v.unwrap())),
            Err(EssentialError::ResidualHitsPrefix(_)) => rep.skip(),
            Err(EssentialError::Devel(_)) => rep.skip(),
            Err(e) => rep.record(false, || format!("{inst}: D = {d}, P = {p}, u = {}: {e}", u.0)),
        }
    }
    rep
}

/// No two paths share a projection; maximal projections spell the target.
pub fn phi_suite(seed: u64, instances: usize) -> OracleReport {
    let mut rep = OracleReport::new("path projection is injective");
    for i in 0..instances as u64 {
        let inst = random_instance(seed.wrapping_add(i), 4);
        for set in [RedexSet::Finite(inst.set.clone()), RedexSet::empty()] {
            let v = phi_injectivity_check(&inst.term, &inst.sys, &set, 24);
            rep.record(v.passed(), || format!("{inst} with {set}: {v:?}"));
        }
    }
    rep
}

/// Brute-force neededness against essentiality for the pilot strata, on one term.
/// Both sides look at depth `depth + H`; only redexes above `depth` are compared.
pub fn needed_agreement(s: &Term, sys: &RewriteSystem, depth: usize, max_states: usize, rep: &mut OracleReport, tag: &str) {
    let window = depth + sys.max_pattern_height();
    let Ok(pilot) = needed_pilot(s, sys, window, 300) else {
        rep.skip();
        return;
    };
    let Ok(ess) = pilot.essential_positions(sys) else {
        rep.skip();
        return;
    };
    for u in find_redexes(s, sys, depth) {
        let brute = brute_needed(&u.key(), s, sys, depth, max_states);
        let claimed = ess.contains(&u.position);
        match brute {
            Neededness::Unknown => rep.skip(),
            b => {
                let needed = b == Neededness::Needed;
                rep.record(needed == claimed, || format!("{tag} {s}: redex at {} brute {b}, essential {claimed}", u.position));
            }
        }
    }
}

/// Random instances whose outermost-fair run normalises are checked redex by redex.
pub fn needed_suite(seed: u64, instances: usize, depth: usize) -> OracleReport {
    let mut rep = OracleReport::new("needed iff essential for some pilot stratum");
    for i in 0..instances as u64 {
        let inst = random_instance(seed.wrapping_add(i), 1);
        if normalize(&inst.term, &inst.sys, StrategyKind::OutermostFair, depth, 200).is_err() {
            rep.skip();
            continue;
        }
        needed_agreement(&inst.term, &inst.sys, depth, 4000, &mut rep, &format!("seed {} {}", inst.seed, inst.source.replace('\n', " ")));
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_smoke() {
        let runs: [(&str, fn() -> OracleReport); 5] = [
            ("fjdt", || fjdt_suite(1, 25)),
            ("prop", || essential_descendant_suite(1, 25)),
            ("measure", || measure_suite(1, 25)),
            ("phi", || phi_suite(1, 10)),
            ("needed", || needed_suite(1, 15, 2)),
        ];
        for (n, f) in runs {
            let t0 = std::time::Instant::now();
            let rep = f();
            eprintln!("{n}: {rep} in {:?}", t0.elapsed());
            assert!(rep.passed(), "{rep}");
        }
    }
}
