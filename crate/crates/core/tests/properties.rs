use std::collections::BTreeSet;

use proptest::prelude::*;

use icrs::oracle::random_instance;
use icrs::{alpha_eq, complete_development, measure_less, parse_term, truncate, Measure, Position, RedexSet, Term};

/// Concrete syntax for a random term; `rec` binders and abstractions are scoped.
fn term_source() -> impl Strategy<Value = String> {
    fn go(depth: u32, vars: Vec<String>, recs: Vec<String>) -> BoxedStrategy<String> {
        let mut leaves: Vec<String> = vec!["a".into(), "b".into()];
        leaves.extend(vars.iter().cloned());
        let leaf = proptest::sample::select(leaves).boxed();
        if depth == 0 {
            return leaf;
        }
        let (v2, r2) = (vars.clone(), recs.clone());
        let unary = go(depth - 1, vars.clone(), recs.clone()).prop_map(|t| format!("g({t})"));
        let guarded = match recs.last() {
            Some(r) => {
                let r = r.clone();
                go(depth - 1, vars.clone(), recs.clone()).prop_map(move |t| format!("h({t}, {r})")).boxed()
            }
            None => unary.clone().boxed(),
        };
        let binary = (go(depth - 1, vars.clone(), recs.clone()), go(depth - 1, vars.clone(), recs.clone())).prop_map(|(a, b)| format!("f({a}, {b})"));
        let x = format!("x{}", vars.len());
        let mut inner = v2;
        inner.push(x.clone());
        let abs = go(depth - 1, inner, r2.clone()).prop_map(move |t| format!("lam([{x}]{t})"));
        let r = format!("R{}", recs.len());
        let mut rs = r2;
        rs.push(r.clone());
        let rec = go(depth - 1, vars, rs).prop_map(move |t| format!("rec {r}. h({t}, {r})"));
        prop_oneof![2 => leaf, 2 => unary, 1 => guarded, 2 => binary, 1 => abs, 1 => rec].boxed()
    }
    go(4, Vec::new(), Vec::new())
}

fn position() -> impl Strategy<Value = Position> {
    proptest::collection::vec(0usize..4, 0..6).prop_map(|s| Position::from_steps(&s))
}

fn t(s: &str) -> Term {
    parse_term(s).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn printing_reparses(src in term_source()) {
        let a = t(&src);
        let printed = a.to_string();
        let b = parse_term(&printed).unwrap();
        prop_assert!(alpha_eq(&a, &b), "{} printed as {}", src, printed);
        prop_assert!(alpha_eq(&a, &a));
    }

    #[test]
    fn positions_round_trip(p in position()) {
        let shown = p.to_string();
        prop_assert_eq!(shown.parse::<Position>().unwrap(), p.clone());
        prop_assert_eq!(p.compact().parse::<Position>().unwrap(), p.clone());
        let q = p.child(2);
        prop_assert!(p.is_prefix_of(&q));
        prop_assert!(!q.is_prefix_of(&p));
        prop_assert_eq!(p.prefixes().len(), p.len() + 1);
    }

    #[test]
    fn truncation_composes(src in term_source(), d in 0usize..6, e in 0usize..6) {
        let a = t(&src);
        let twice = truncate(&truncate(&a, d), e);
        prop_assert!(alpha_eq(&twice, &truncate(&a, d.min(e))));
    }

    #[test]
    fn measure_order_is_strict(a in proptest::collection::vec(0usize..4, 0..4), b in proptest::collection::vec(0usize..4, 0..4), c in proptest::collection::vec(0usize..4, 0..4)) {
        let (a, b, c) = (Measure(a), Measure(b), Measure(c));
        prop_assert!(!measure_less(&a, &a));
        prop_assert!(!(measure_less(&a, &b) && measure_less(&b, &a)));
        if measure_less(&a, &b) && measure_less(&b, &c) {
            prop_assert!(measure_less(&a, &c));
        }
    }

    #[test]
    fn empty_development_is_identity(seed in 0u64..10_000) {
        let inst = random_instance(seed, 3);
        let dev = complete_development(&inst.term, &inst.sys, &RedexSet::empty()).unwrap();
        prop_assert!(alpha_eq(&dev.target, &inst.term));
    }

    #[test]
    fn developing_one_redex_first_reaches_the_same_target(seed in 0u64..10_000) {
        let inst = random_instance(seed, 4);
        let whole = complete_development(&inst.term, &inst.sys, &RedexSet::Finite(inst.set.clone())).unwrap();
        let first = inst.set.iter().next().unwrap().clone();
        let step = complete_development(&inst.term, &inst.sys, &RedexSet::of([first.clone()])).unwrap();
        let rest: BTreeSet<_> = inst.set.iter().filter(|k| **k != first).cloned().collect();
        let res = step.finite_residuals(&inst.sys, &rest);
        prop_assume!(res.is_ok());
        let then = complete_development(&step.target, &inst.sys, &RedexSet::Finite(res.unwrap())).unwrap();
        prop_assert!(alpha_eq(&then.target, &whole.target), "{}: {} vs {}", inst, then.target, whole.target);
    }
}
