//! Infinitary combinatory reduction systems on rational terms.

pub mod devel;
pub mod essential;
pub mod ops;
pub mod oracle;
pub mod paths;
pub mod position;
pub mod rewrite;
pub mod syntax;
pub mod system;
pub mod strategy;
pub mod term;

pub use devel::{complete_development, project_dev_over_finite, project_sequence, DevRecord, DevSequence, DevelError};
pub use essential::{classify_redex, emaciate_reduction, emaciate_step, epsilon_seq, epsilon_step, essential_skeleton, measure, measure_less, check_mirror, mirrors, path_prefix_set, Essentiality, Measure, MirrorFailure, MirrorMode, Reduction};
pub use ops::*;
pub use paths::{enumerate_paths, finite_jumps_witness, has_finite_jumps, path_graph, PathGraph, project_path, target_term, Path, PathNode, PathProjection, RedexKey, RedexSet};
pub use position::Position;
pub use rewrite::{apply_substitute, apply_valuation, contract, find_redexes, match_at, substitute, Redex, RewriteError, StepRecord, Substitute, Valuation};
pub use syntax::{parse_file, parse_term, parse_term_with_free, Item, ParseError, StageSpec};
pub use system::{Rule, RewriteSystem};
pub use term::{name, Builder, Head, MetaTerm, Name, Node, Term};
pub use strategy::{detect_rational_nf, fairness_audit, needed_pilot, normalize, outermost_redexes, Approximant, AuditVerdict, StrategyError, StrategyKind, Trace};
