use std::path::PathBuf;
use std::process::{Command, Output};

use icrs::{alpha_eq, parse_file, parse_term, Item};
use icrs_cli::{run_session, same_term, Command as Cmd, Emit, Report, Selection, Session};

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name)
}

fn icrs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icrs")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path(name: &str) -> String {
    corpus(name).to_string_lossy().into_owned()
}

fn tmp(name: &str, body: &str) -> String {
    let p = std::env::temp_dir().join(format!("icrs-cli-{}-{name}", std::process::id()));
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn check_exit_codes() {
    for f in ["map.icrs", "nested_meta.icrs", "projection.icrs", "delayed_root.icrs", "looping_arg.icrs", "ilc.icrs", "collapse.icrs"] {
        let o = icrs(&["check", &path(f)]);
        assert_eq!(code(&o), 0, "{f}: {}", stdout(&o));
    }
    let o = icrs(&["check", &path("nonlinear.icrs")]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("Z occurs at 1 and 2"), "{}", stdout(&o));
    assert_eq!(code(&icrs(&["check", &path("overlap.icrs")])), 1);
    assert_eq!(code(&icrs(&["check", &tmp("bad.icrs", "rule f: f(Z -> ;")])), 2);
    assert_eq!(code(&icrs(&["check", "/nonexistent/file.icrs"])), 2);
}

#[test]
fn paths_and_develop_on_the_example() {
    let o = icrs(&["paths", &path("nested_meta.icrs"), "--at", "@"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("(s,@) -e-> (r,@,@) -e-> (s,10) -1-> (s,101) -e-> (r,1,@) -1-> (r,11,@) -e-> (s,10) -1-> (s,101) -e-> (r,111,@) -e-> (s,2)"), "{out}");
    assert!(out.contains("(t,@) -1-> (t,1) -1-> (t,11) -1-> (t,111)"), "{out}");
    let o = icrs(&["develop", &path("nested_meta.icrs"), "--at", "@"]);
    assert!(stdout(&o).contains("target: g(g(g(a)))"));
    let o = icrs(&["develop", &path("nested_meta.icrs"), "--at", "2"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn collapsing_all_redexes_violates_finite_jumps() {
    let o = icrs(&["develop", &path("collapse.icrs"), "--all-redexes"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("(s,@) -e-> (f,@,@) -e-> (s,@)"), "{}", stdout(&o));
}

#[test]
fn essential_on_the_section_example() {
    let o = icrs(&["essential", &path("projection.icrs"), "--script", &path("projection.stages"), "--prefix", "@,1"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("(4,5,4)"), "{}", stdout(&o));
    let o = icrs(&["essential", &path("projection.icrs"), "--script", &path("projection.stages"), "--prefix", "1"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn normalize_exit_codes() {
    let o = icrs(&["normalize", &path("looping_arg.icrs"), "--strategy", "fair", "--depth", "4", "--emit", "approximant,rational"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let rational = out.lines().find_map(|l| l.strip_prefix("rational: ")).unwrap();
    assert!(same_term(rational, "rec S. g(b, S)"), "{out}");
    let approx = out.lines().find_map(|l| l.strip_prefix("approximant: ")).unwrap();
    assert!(same_term(approx, "g(b, g(b, g(b, g(_|_, _|_))))"), "{out}");

    let o = icrs(&["normalize", &path("looping_arg.icrs"), "--term", "c", "--fuel", "30"]);
    assert_eq!(code(&o), 3);
    let nat = tmp("nat.icrs", "rule nat: nat(X) -> cons(X, nat(s(X)));\nterm n = nat(0);\n");
    assert_eq!(code(&icrs(&["normalize", &nat, "--depth", "6", "--fuel", "3"])), 4);
    assert_eq!(code(&icrs(&["normalize", &path("nonlinear.icrs"), "--term", "eq(a, a)"])), 1);
    assert_eq!(code(&icrs(&["normalize", &path("looping_arg.icrs"), "--strategy", "lazy"])), 2);
    assert_eq!(code(&icrs(&["normalize", &path("looping_arg.icrs"), "--term", "f(a,"])), 2);
}

#[test]
fn iterated_lambda_encoding_normalises_under_every_strategy() {
    for s in ["fair", "outermost-fair", "needed-fair"] {
        let o = icrs(&["normalize", &path("ilc.icrs"), "--term", "fac", "--strategy", s, "--depth", "4", "--emit", "rational"]);
        assert_eq!(code(&o), 0, "{s}");
        let r = stdout(&o).lines().find_map(|l| l.strip_prefix("rational: ").map(String::from)).unwrap();
        assert!(same_term(&r, "rec A. app(app(g, b), A)"), "{s}: {r}");
    }
}

#[test]
fn audit_verdicts() {
    let mut steps: Vec<String> = vec!["a@1".into(), "a@11".into(), "f@".into()];
    steps.extend((3..12).map(|k| format!("a@{}", "1".repeat(k))));
    let o = icrs(&["audit", &path("delayed_root.icrs"), "--steps", &steps.join(",")]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let steps: Vec<String> = (1..14).map(|k| format!("a@{}", "1".repeat(k))).collect();
    let o = icrs(&["audit", &path("delayed_root.icrs"), "--steps", &steps.join(",")]);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
}

#[test]
fn json_reports_round_trip() {
    let cases: Vec<Vec<String>> = vec![
        vec!["check".into(), path("map.icrs")],
        vec!["normalize".into(), path("map.icrs"), "--depth".into(), "3".into(), "--emit".into(), "approximant,rational,trace".into()],
        vec!["develop".into(), path("nested_meta.icrs"), "--at".into(), "@".into()],
        vec!["paths".into(), path("nested_meta.icrs"), "--at".into(), "@".into()],
        vec!["essential".into(), path("projection.icrs"), "--script".into(), path("projection.stages"), "--prefix".into(), "@,1".into()],
        vec!["audit".into(), path("delayed_root.icrs"), "--steps".into(), "f@,a@1".into()],
    ];
    for args in cases {
        let mut a: Vec<&str> = args.iter().map(String::as_str).collect();
        a.push("--format");
        a.push("json");
        let o = icrs(&a);
        assert_eq!(code(&o), 0, "{args:?}");
        let text = stdout(&o);
        let report = Report::from_json(&text).unwrap_or_else(|e| panic!("{args:?}: {e}\n{text}"));
        assert_eq!(Report::from_json(&report.to_json()).unwrap(), report);
        assert_eq!(report.to_json().trim(), text.trim());
    }
}

#[test]
fn library_sessions_match_the_binary() {
    let s = Session::load(&corpus("looping_arg.icrs")).unwrap();
    let cmd = Cmd::Normalize { strategy: icrs::StrategyKind::Fair, depth: 3, fuel: 400, emit: vec![Emit::Approximant] };
    let Report::Normalize(n) = run_session(s, None, &cmd).unwrap() else { panic!() };
    assert!(same_term(n.approximant.as_deref().unwrap(), "g(b, g(b, g(_|_, _|_)))"));
    let s = Session::load(&corpus("nested_meta.icrs")).unwrap();
    let r = run_session(s, None, &Cmd::Develop { redexes: Selection::All, table_depth: 2, max_len: 4 }).unwrap();
    let Report::Develop(d) = r else { panic!() };
    assert_eq!(d.target.as_deref(), Some("g(g(g(a)))"));
}

#[test]
fn corpus_terms_print_and_reparse() {
    for f in ["map.icrs", "nested_meta.icrs", "projection.icrs", "delayed_root.icrs", "looping_arg.icrs", "ilc.icrs", "collapse.icrs"] {
        let src = std::fs::read_to_string(corpus(f)).unwrap();
        let items = parse_file(&src).unwrap();
        for it in items {
            if let Item::Term { name, term, .. } = it {
                let printed = term.to_string();
                let back = parse_term(&printed).unwrap_or_else(|e| panic!("{f} {name}: {printed}: {e}"));
                assert!(alpha_eq(&term, &back), "{f} {name}: {printed}");
            }
        }
    }
}
