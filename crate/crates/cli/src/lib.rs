//! Command implementations behind the `icrs` binary.
//!
//! Every command returns a serialisable report; the binary prints it as text
//! or JSON and exits with [`Report::exit_code`] or [`CliError::exit_code`].

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use icrs::devel::{complete_development, DevSequence, DevelError};
use icrs::essential::{classify_redex, epsilon_seq, measure, EssentialError};
use icrs::ops::{alpha_eq, positions_to_depth, PrefixSet};
use icrs::paths::{enumerate_paths, finite_jumps_witness, path_graph, project_path, Path, PathError, RedexKey, RedexSet};
use icrs::rewrite::{find_redexes, redexes_at};
use icrs::strategy::{default_window, detect_rational_nf, fairness_audit, normalize, StrategyError, StrategyKind, Trace};
use icrs::syntax::{parse_file, parse_stage_script, parse_term, ParseError, StageSpec};
use icrs::system::{check_system, RewriteSystem, SystemError};
use icrs::{Position, Term};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_DIVERGENT: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{context}: {source}")]
    Parse { context: String, source: ParseError },
    #[error("{0}")]
    System(#[from] SystemError),
    #[error("invalid flag: {0}")]
    Flag(String),
    #[error("{0}")]
    Validation(String),
    #[error("fuel exhausted after {steps} steps (divergence suspected)")]
    Divergent { steps: usize, trace: Option<String> },
    #[error("fuel exhausted after {steps} steps")]
    Budget { steps: usize, trace: Option<String> },
}

impl CliError {
    /// The partial trace of a run that ran out of fuel, when one was requested.
    pub fn partial_trace(&self) -> Option<&str> {
        match self {
            CliError::Divergent { trace, .. } | CliError::Budget { trace, .. } => trace.as_deref(),
            _ => None,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Parse { .. } => EXIT_PARSE,
            CliError::System(SystemError::Parse(_)) => EXIT_PARSE,
            CliError::Flag(_) | CliError::System(_) | CliError::Validation(_) => EXIT_FAILED,
            CliError::Divergent { .. } => EXIT_DIVERGENT,
            CliError::Budget { .. } => EXIT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, clap::ValueEnum)]
pub enum Emit {
    Approximant,
    Rational,
    Trace,
}

/// Which redexes a development or path listing uses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selection {
    Positions(Vec<Position>),
    All,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Check,
    Normalize { strategy: StrategyKind, depth: usize, fuel: usize, emit: Vec<Emit> },
    Develop { redexes: Selection, table_depth: usize, max_len: usize },
    Essential { script: String, prefix: Vec<Position>, redex_depth: usize },
    Paths { redexes: Selection, budget: usize },
    Audit { steps: Vec<(String, Position)>, strategy: StrategyKind, window: Option<usize> },
}

/// One invocation: the rule file, the term to work on, and the command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionConfig {
    pub file: PathBuf,
    pub term: Option<String>,
    pub command: Command,
    pub format: Format,
}

impl SessionConfig {
    /// Reject flag combinations before anything is parsed or run.
    pub fn validate(&self) -> Result<(), CliError> {
        match &self.command {
            Command::Normalize { depth: 0, .. } => Err(CliError::Flag("--depth must be at least 1".into())),
            Command::Normalize { fuel: 0, .. } => Err(CliError::Flag("--fuel must be at least 1".into())),
            Command::Paths { budget: 0, .. } => Err(CliError::Flag("--budget must be at least 1".into())),
            Command::Audit { window: Some(0), .. } => Err(CliError::Flag("--window must be at least 1".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub check: String,
    pub passed: bool,
    pub witnesses: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckOutput {
    pub passed: bool,
    pub checks: Vec<CheckEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub index: usize,
    pub rule: String,
    pub position: String,
    pub term: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizeOutput {
    pub term: String,
    pub strategy: String,
    pub depth: usize,
    pub steps: usize,
    pub approximant: Option<String>,
    /// Index of the last step above the depth; none follow it.
    pub certificate: usize,
    /// Number of steps above each depth `0..=depth`.
    pub steps_above: Vec<usize>,
    pub rational: Option<String>,
    pub trace: Option<Vec<TraceStep>>,
    pub ledger: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRow {
    pub from: String,
    pub to: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DevelopOutput {
    pub source: String,
    pub redexes: String,
    pub target: Option<String>,
    pub descendants: Vec<TableRow>,
    pub residuals: Vec<TableRow>,
    /// Set when the redexes lack the finite jumps property.
    pub jump_cycle: Option<String>,
    pub max_len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageEntry {
    pub index: usize,
    pub source: String,
    pub redexes: String,
    pub essential: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub position: String,
    pub rule: String,
    pub essential: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EssentialOutput {
    pub start: String,
    pub last: String,
    pub prefix: String,
    pub stages: Vec<StageEntry>,
    pub measure: Vec<usize>,
    pub redexes: Vec<Classification>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathListing {
    pub term: String,
    pub name: String,
    pub redexes: String,
    pub paths: Vec<String>,
    pub projections: Vec<String>,
    /// Paths stopped by the budget.
    pub cut: usize,
    /// Finite rendering of the path graph, for cyclic terms.
    pub graph: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathsOutput {
    pub listings: Vec<PathListing>,
    pub jump_cycle: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditOutput {
    pub strategy: String,
    pub steps: usize,
    pub window: usize,
    pub obligations: usize,
    pub resolved: usize,
    pub pending: usize,
    pub passed: bool,
    pub violation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Report {
    Check(CheckOutput),
    Normalize(NormalizeOutput),
    Develop(DevelopOutput),
    Essential(EssentialOutput),
    Paths(PathsOutput),
    Audit(AuditOutput),
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        let ok = match self {
            Report::Check(c) => c.passed,
            Report::Develop(d) => d.jump_cycle.is_none(),
            Report::Paths(p) => p.jump_cycle.is_none(),
            Report::Audit(a) => a.passed,
            Report::Normalize(_) | Report::Essential(_) => true,
        };
        if ok {
            EXIT_OK
        } else {
            EXIT_FAILED
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialise")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Report> {
        serde_json::from_str(s)
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Text => self.to_string(),
            Format::Json => self.to_json() + "\n",
        }
    }
}

fn set_text<I: IntoIterator<Item = S>, S: fmt::Display>(xs: I) -> String {
    let v: Vec<String> = xs.into_iter().map(|x| x.to_string()).collect();
    format!("{{{}}}", v.join(", "))
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Report::Check(c) => {
                for e in &c.checks {
                    writeln!(f, "{}: {}", e.check, if e.passed { "pass" } else { "FAIL" })?;
                    for w in &e.witnesses {
                        writeln!(f, "  {w}")?;
                    }
                }
                Ok(())
            }
            Report::Normalize(n) => {
                writeln!(f, "strategy: {}, depth {}, {} steps", n.strategy, n.depth, n.steps)?;
                if let Some(t) = &n.trace {
                    writeln!(f, "trace:")?;
                    writeln!(f, "  0: {}", n.term)?;
                    for s in t {
                        writeln!(f, "  {}: --{}@{}--> {}", s.index, s.rule, s.position, s.term)?;
                    }
                }
                if let Some(l) = &n.ledger {
                    writeln!(f, "ledger:")?;
                    for e in l {
                        writeln!(f, "  {e}")?;
                    }
                }
                writeln!(f, "certificate: no step above depth {} after step {}; steps above each depth {:?}", n.depth, n.certificate, n.steps_above)?;
                if let Some(a) = &n.approximant {
                    writeln!(f, "approximant: {a}")?;
                }
                match &n.rational {
                    Some(r) => writeln!(f, "rational: {r}"),
                    None if n.trace.is_none() && n.approximant.is_none() => writeln!(f, "rational: not detected"),
                    None => Ok(()),
                }
            }
            Report::Develop(d) => {
                writeln!(f, "source: {}", d.source)?;
                writeln!(f, "redexes: {}", d.redexes)?;
                if let Some(c) = &d.jump_cycle {
                    writeln!(f, "finite jumps property violated; unlabelled cycle:")?;
                    return writeln!(f, "  {c}");
                }
                if let Some(t) = &d.target {
                    writeln!(f, "target: {t}")?;
                }
                writeln!(f, "descendants (length <= {}):", d.max_len)?;
                for r in &d.descendants {
                    writeln!(f, "  {} -> {}", r.from, set_text(&r.to))?;
                }
                writeln!(f, "residuals (length <= {}):", d.max_len)?;
                for r in &d.residuals {
                    writeln!(f, "  {} -> {}", r.from, set_text(&r.to))?;
                }
                Ok(())
            }
            Report::Essential(e) => {
                writeln!(f, "P = {} in {}", e.prefix, e.last)?;
                for s in e.stages.iter().rev() {
                    writeln!(f, "P{} = {} in {} (stage {} develops {})", s.index, s.essential, s.source, s.index + 1, s.redexes)?;
                }
                let m: Vec<String> = e.measure.iter().map(|x| x.to_string()).collect();
                writeln!(f, "measure: ({})", m.join(","))?;
                writeln!(f, "redexes of {}:", e.start)?;
                for c in &e.redexes {
                    writeln!(f, "  {} {}: {}", c.rule, c.position, if c.essential { "essential" } else { "inessential" })?;
                }
                Ok(())
            }
            Report::Paths(p) => {
                for l in &p.listings {
                    writeln!(f, "maximal paths of {} = {} with respect to {}:", l.name, l.term, l.redexes)?;
                    for x in &l.paths {
                        writeln!(f, "  {x}")?;
                    }
                    writeln!(f, "path projections:")?;
                    for x in &l.projections {
                        writeln!(f, "  {x}")?;
                    }
                    if l.cut > 0 {
                        writeln!(f, "  ({} paths cut at the budget, marked ...)", l.cut)?;
                    }
                    if let Some(g) = &l.graph {
                        writeln!(f, "path graph:")?;
                        for e in g {
                            writeln!(f, "  {e}")?;
                        }
                    }
                }
                if let Some(c) = &p.jump_cycle {
                    writeln!(f, "finite jumps property violated; unlabelled cycle:")?;
                    writeln!(f, "  {c}")?;
                }
                Ok(())
            }
            Report::Audit(a) => {
                writeln!(
                    f,
                    "{} audit over {} steps, window {}: {} ({} obligations, {} resolved, {} pending)",
                    a.strategy,
                    a.steps,
                    a.window,
                    if a.passed { "pass" } else { "FAIL" },
                    a.obligations,
                    a.resolved,
                    a.pending
                )?;
                if let Some(v) = &a.violation {
                    writeln!(f, "  {v}")?;
                }
                Ok(())
            }
        }
    }
}

/// A loaded rule file with its named terms.
pub struct Session {
    pub sys: RewriteSystem,
    pub terms: Vec<(String, Term)>,
}

impl Session {
    pub fn load(file: &std::path::Path) -> Result<Self, CliError> {
        let src = std::fs::read_to_string(file).map_err(|source| CliError::Io { path: file.to_path_buf(), source })?;
        Self::from_source(&src, &file.display().to_string())
    }

    pub fn from_source(src: &str, context: &str) -> Result<Self, CliError> {
        let items = parse_file(src).map_err(|source| CliError::Parse { context: context.to_string(), source })?;
        let (sys, terms) = RewriteSystem::from_items(&items)?;
        Ok(Session { sys, terms: terms.into_iter().map(|(n, t)| (n.to_string(), t)).collect() })
    }

    /// A named term of the file, or else the argument parsed as a term; the
    /// first named term when no argument is given.
    pub fn term(&mut self, arg: Option<&str>) -> Result<Term, CliError> {
        let t = match arg {
            None => self.terms.first().map(|(_, t)| t.clone()).ok_or_else(|| CliError::Flag("the file names no term; pass --term".into()))?,
            Some(a) => match self.terms.iter().find(|(n, _)| n == a) {
                Some((_, t)) => t.clone(),
                None => parse_term(a).map_err(|source| CliError::Parse { context: format!("term `{a}`"), source })?,
            },
        };
        for (f, k) in t.symbols() {
            self.sys.declare(&f, k)?;
        }
        Ok(t)
    }
}

pub fn run(cfg: &SessionConfig) -> Result<Report, CliError> {
    cfg.validate()?;
    let session = Session::load(&cfg.file)?;
    run_session(session, cfg.term.as_deref(), &cfg.command)
}

pub fn run_session(mut session: Session, term: Option<&str>, command: &Command) -> Result<Report, CliError> {
    if let Command::Check = command {
        return Ok(Report::Check(cmd_check(&session.sys)));
    }
    let t = session.term(term)?;
    let sys = &session.sys;
    match command {
        Command::Check => unreachable!(),
        Command::Normalize { strategy, depth, fuel, emit } => cmd_normalize(sys, &t, *strategy, *depth, *fuel, emit).map(Report::Normalize),
        Command::Develop { redexes, table_depth, max_len } => cmd_develop(sys, &t, redexes, *table_depth, *max_len).map(Report::Develop),
        Command::Essential { script, prefix, redex_depth } => cmd_essential(sys, &t, script, prefix, *redex_depth).map(Report::Essential),
        Command::Paths { redexes, budget } => cmd_paths(sys, &t, redexes, *budget).map(Report::Paths),
        Command::Audit { steps, strategy, window } => cmd_audit(sys, &t, steps, *strategy, *window).map(Report::Audit),
    }
}

pub fn cmd_check(sys: &RewriteSystem) -> CheckOutput {
    let report = check_system(sys);
    let checks = report
        .verdicts
        .iter()
        .map(|(k, v)| CheckEntry { check: k.to_string(), passed: v.passed(), witnesses: v.witnesses.iter().map(|w| w.to_string()).collect() })
        .collect();
    CheckOutput { passed: report.passed(), checks }
}

pub fn cmd_normalize(sys: &RewriteSystem, t: &Term, kind: StrategyKind, depth: usize, fuel: usize, emit: &[Emit]) -> Result<NormalizeOutput, CliError> {
    let shown = |t: &Trace| emit.contains(&Emit::Trace).then(|| format!("{t}\n{}", t.ledger.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n")));
    let (approx, trace) = match normalize(t, sys, kind, depth, fuel) {
        Ok(r) => r,
        Err(StrategyError::FuelExhausted { trace, divergence_suspected: true }) => {
            return Err(CliError::Divergent { steps: trace.len(), trace: shown(&trace) })
        }
        Err(StrategyError::FuelExhausted { trace, .. }) => return Err(CliError::Budget { steps: trace.len(), trace: shown(&trace) }),
        Err(e) => return Err(CliError::Validation(e.to_string())),
    };
    let emit: BTreeSet<_> = if emit.is_empty() { [Emit::Approximant].into() } else { emit.iter().copied().collect() };
    let rational = emit.contains(&Emit::Rational).then(|| detect_rational_nf(&trace, sys).map(|r| r.to_string())).flatten();
    let show_trace = emit.contains(&Emit::Trace);
    Ok(NormalizeOutput {
        term: t.to_string(),
        strategy: kind.to_string(),
        depth,
        steps: trace.len(),
        approximant: emit.contains(&Emit::Approximant).then(|| approx.term.to_string()),
        certificate: approx.certificate,
        steps_above: (0..=depth).map(|d| trace.steps_above(d)).collect(),
        rational,
        trace: show_trace.then(|| trace_steps(&trace)),
        ledger: show_trace.then(|| trace.ledger.iter().map(|e| e.to_string()).collect()),
    })
}

fn trace_steps(trace: &Trace) -> Vec<TraceStep> {
    trace
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| TraceStep { index: i + 1, rule: s.rule.name.to_string(), position: s.redex.position.to_string(), term: s.target.to_string() })
        .collect()
}

/// Resolve listed positions to redex keys in `t`.
pub fn redex_keys(sys: &RewriteSystem, t: &Term, ps: &[Position]) -> Result<BTreeSet<RedexKey>, CliError> {
    let mut out = BTreeSet::new();
    for p in ps {
        let rs = redexes_at(t, sys, p);
        if rs.is_empty() {
            return Err(CliError::Validation(format!("no redex at {p} in {t}")));
        }
        out.extend(rs.into_iter().map(|r| r.key()));
    }
    Ok(out)
}

fn redex_set(sys: &RewriteSystem, t: &Term, sel: &Selection) -> Result<RedexSet, CliError> {
    match sel {
        Selection::All => Ok(RedexSet::All),
        Selection::Positions(ps) => Ok(RedexSet::Finite(redex_keys(sys, t, ps)?)),
    }
}

fn cycle_text(sys: &RewriteSystem, t: &Term, set: &RedexSet) -> Option<String> {
    let cycle = finite_jumps_witness(t, sys, set)?;
    let n = cycle.len();
    Some(Path { nodes: cycle, edges: vec![None; n - 1], labels: vec![None; n], cut: false }.render("s", sys))
}

fn key_text(sys: &RewriteSystem, k: &RedexKey) -> String {
    format!("{}@{}", sys.rules[k.1].name, k.0)
}

pub fn cmd_develop(sys: &RewriteSystem, t: &Term, sel: &Selection, table_depth: usize, max_len: usize) -> Result<DevelopOutput, CliError> {
    let set = redex_set(sys, t, sel)?;
    let mut out = DevelopOutput {
        source: t.to_string(),
        redexes: match &set {
            RedexSet::All => "all".into(),
            RedexSet::Finite(ks) => set_text(ks.iter().map(|k| key_text(sys, k))),
        },
        target: None,
        descendants: Vec::new(),
        residuals: Vec::new(),
        jump_cycle: None,
        max_len,
    };
    let dev = match complete_development(t, sys, &set) {
        Ok(d) => d,
        Err(DevelError::Path(PathError::FiniteJumpsViolated)) => {
            out.jump_cycle = cycle_text(sys, t, &set);
            return Ok(out);
        }
        Err(e) => return Err(CliError::Validation(e.to_string())),
    };
    out.target = Some(dev.target.to_string());
    let fail = |e: DevelError| CliError::Validation(e.to_string());
    for (p, _) in positions_to_depth(t, table_depth) {
        let ds = dev.descendants(sys, &BTreeSet::from([p.clone()]), max_len).map_err(fail)?;
        out.descendants.push(TableRow { from: p.to_string(), to: ds.iter().map(|q| q.to_string()).collect() });
    }
    for r in find_redexes(t, sys, table_depth + 1) {
        let k = r.key();
        if set.finite().is_some_and(|s| s.contains(&k)) || matches!(set, RedexSet::All) {
            continue;
        }
        let rs = dev.residuals(sys, &BTreeSet::from([k.clone()]), max_len).map_err(fail)?;
        out.residuals.push(TableRow { from: key_text(sys, &k), to: rs.iter().map(|q| key_text(sys, q)).collect() });
    }
    Ok(out)
}

/// Build a development sequence from a stage script, checking each stage against its source.
pub fn build_sequence(sys: &RewriteSystem, s: &Term, script: &str) -> Result<DevSequence, CliError> {
    let specs = parse_stage_script(script).map_err(|source| CliError::Parse { context: "stage script".into(), source })?;
    let mut stages = Vec::new();
    let mut cur = s.clone();
    for (i, spec) in specs.iter().enumerate() {
        let set = match spec {
            StageSpec::All => RedexSet::All,
            StageSpec::Positions(ps) => RedexSet::Finite(
                redex_keys(sys, &cur, ps).map_err(|e| CliError::Validation(format!("stage {}: {e}", i + 1)))?,
            ),
        };
        let d = complete_development(&cur, sys, &set).map_err(|e| CliError::Validation(format!("stage {}: {e}", i + 1)))?;
        cur = d.target.clone();
        stages.push(d);
    }
    DevSequence::from_stages(s, stages).map_err(|e| CliError::Validation(e.to_string()))
}

pub fn cmd_essential(sys: &RewriteSystem, s: &Term, script: &str, prefix: &[Position], redex_depth: usize) -> Result<EssentialOutput, CliError> {
    let d = build_sequence(sys, s, script)?;
    let p = PrefixSet::new(prefix.iter().cloned(), d.last())
        .ok_or_else(|| CliError::Validation(format!("{} is not a prefix set of {}", set_text(prefix), d.last())))?;
    let fail = |e: EssentialError| CliError::Validation(e.to_string());
    let ps = epsilon_seq(sys, &p, &d).map_err(fail)?;
    let mu = measure(sys, &d, &p).map_err(fail)?;
    let stages = (0..d.len())
        .map(|i| StageEntry {
            index: i,
            source: d.term(i).to_string(),
            redexes: match &d.stages[i].set {
                RedexSet::All => "all".into(),
                RedexSet::Finite(ks) => set_text(ks.iter().map(|k| key_text(sys, k))),
            },
            essential: ps[i].to_string(),
        })
        .collect();
    let mut redexes = Vec::new();
    for r in find_redexes(s, sys, redex_depth) {
        let k = r.key();
        let kind = classify_redex(sys, &k, &d, &p).map_err(fail)?;
        redexes.push(Classification { position: k.0.to_string(), rule: sys.rules[k.1].name.to_string(), essential: kind == icrs::Essentiality::Essential });
    }
    Ok(EssentialOutput { start: s.to_string(), last: d.last().to_string(), prefix: p.to_string(), stages, measure: mu.0, redexes })
}

fn listing(sys: &RewriteSystem, t: &Term, name: &str, set: &RedexSet, budget: usize) -> PathListing {
    let paths = enumerate_paths(t, sys, set, budget);
    let mut projections: Vec<String> = Vec::new();
    for p in &paths {
        let s = project_path(p).to_string() + if p.cut { " ..." } else { "" };
        if !projections.contains(&s) {
            projections.push(s);
        }
    }
    PathListing {
        term: t.to_string(),
        name: name.to_string(),
        redexes: match set {
            RedexSet::All => "all".into(),
            RedexSet::Finite(ks) => set_text(ks.iter().map(|k| key_text(sys, k))),
        },
        paths: paths.iter().map(|p| p.render(name, sys)).collect(),
        projections,
        cut: paths.iter().filter(|p| p.cut).count(),
        graph: t.is_cyclic().then(|| path_graph(t, sys, set).render(name, sys)),
    }
}

/// Maximal paths of the source with respect to the redexes, and of the target with respect to none.
pub fn cmd_paths(sys: &RewriteSystem, t: &Term, sel: &Selection, budget: usize) -> Result<PathsOutput, CliError> {
    let set = redex_set(sys, t, sel)?;
    if let Some(c) = cycle_text(sys, t, &set) {
        return Ok(PathsOutput { listings: vec![listing(sys, t, "s", &set, budget)], jump_cycle: Some(c) });
    }
    let mut listings = vec![listing(sys, t, "s", &set, budget)];
    if !set.is_empty() {
        let dev = complete_development(t, sys, &set).map_err(|e| CliError::Validation(e.to_string()))?;
        listings.push(listing(sys, &dev.target, "t", &RedexSet::empty(), budget));
    }
    Ok(PathsOutput { listings, jump_cycle: None })
}

pub fn cmd_audit(sys: &RewriteSystem, t: &Term, steps: &[(String, Position)], kind: StrategyKind, window: Option<usize>) -> Result<AuditOutput, CliError> {
    let mut resolved = Vec::new();
    for (r, p) in steps {
        let i = sys.rule(r).ok_or_else(|| CliError::Validation(format!("no rule `{r}`")))?;
        resolved.push((i, p.clone()));
    }
    let bound = resolved.iter().map(|(_, p)| p.len() + 1).max().unwrap_or(1) + sys.max_pattern_height();
    let trace = Trace::replay(t, sys, &resolved, bound).map_err(|e| CliError::Validation(e.to_string()))?;
    let window = window.unwrap_or_else(|| default_window(&trace, sys));
    let v = fairness_audit(&trace, sys, kind, window).map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(AuditOutput {
        strategy: kind.to_string(),
        steps: trace.len(),
        window,
        obligations: v.obligations,
        resolved: v.resolved,
        pending: v.pending,
        passed: v.passed(),
        violation: v.violation.as_ref().map(|x| x.to_string()),
    })
}

/// Parse `rule@position` as used by `audit --steps`.
pub fn parse_step(s: &str) -> Result<(String, Position), String> {
    let (r, p) = s.split_once('@').ok_or_else(|| format!("`{s}` is not of the form rule@position"))?;
    let p: Position = format!("@{p}").parse().map_err(|e| format!("{e}"))?;
    Ok((r.to_string(), p))
}

/// True when two printed terms denote the same rational term up to renaming.
pub fn same_term(a: &str, b: &str) -> bool {
    matches!((parse_term(a), parse_term(b)), (Ok(x), Ok(y)) if alpha_eq(&x, &y))
}
