use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use icrs::strategy::StrategyKind;
use icrs::Position;
use icrs_cli::{parse_step, run, Command, Emit, Format, Selection, SessionConfig};

#[derive(Parser)]
#[command(name = "icrs", version, about = "Infinitary combinatory reduction systems on rational terms")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Input {
    /// Rule file.
    file: PathBuf,
    /// A term named in the file, or a term in concrete syntax.
    #[arg(long)]
    term: Option<String>,
}

#[derive(Args)]
struct Redexes {
    /// Redex positions, e.g. `@`, `1.0.1`.
    #[arg(long = "at", value_parser = parse_position)]
    at: Vec<Position>,
    /// Develop every redex of the term.
    #[arg(long, conflicts_with = "at")]
    all_redexes: bool,
}

impl Redexes {
    fn selection(self) -> Selection {
        if self.all_redexes {
            Selection::All
        } else {
            Selection::Positions(self.at)
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Check rules, left-linearity, full extendedness and orthogonality.
    Check {
        file: PathBuf,
    },
    /// Reduce to a depth-d approximant of the normal form.
    Normalize {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value = "outermost-fair", value_parser = parse_strategy)]
        strategy: StrategyKind,
        #[arg(long, default_value_t = 4)]
        depth: usize,
        #[arg(long, default_value_t = 1000)]
        fuel: usize,
        /// What to print; repeatable.
        #[arg(long, value_enum, value_delimiter = ',')]
        emit: Vec<Emit>,
    },
    /// Completely develop a set of redexes.
    Develop {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        redexes: Redexes,
        /// Source positions listed in the descendant table have length at most this.
        #[arg(long, default_value_t = 3)]
        table_depth: usize,
        /// Descendant and residual positions are listed up to this length.
        #[arg(long, default_value_t = 6)]
        max_len: usize,
    },
    /// Essential positions and measure of a development sequence.
    Essential {
        #[command(flatten)]
        input: Input,
        /// Stage script file.
        #[arg(long, conflicts_with = "stages")]
        script: Option<PathBuf>,
        /// Stage script given inline.
        #[arg(long)]
        stages: Option<String>,
        /// Prefix set of the final term, comma separated; empty for none.
        #[arg(long, default_value = "", value_parser = parse_positions)]
        prefix: std::vec::Vec<Position>,
        /// Classify the initial redexes above this depth.
        #[arg(long, default_value_t = 6)]
        redex_depth: usize,
    },
    /// Maximal paths and path projections.
    Paths {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        redexes: Redexes,
        /// Nodes per listed path.
        #[arg(long, default_value_t = 32)]
        budget: usize,
    },
    /// Audit a given reduction for fairness.
    Audit {
        #[command(flatten)]
        input: Input,
        /// Steps as `rule@position`, comma separated.
        #[arg(long, value_delimiter = ',', value_parser = parse_step)]
        steps: Vec<(String, Position)>,
        #[arg(long, default_value = "outermost-fair", value_parser = parse_strategy)]
        strategy: StrategyKind,
        #[arg(long)]
        window: Option<usize>,
    },
}

fn parse_position(s: &str) -> Result<Position, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_positions(s: &str) -> Result<Vec<Position>, String> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(parse_position).collect()
}

fn parse_strategy(s: &str) -> Result<StrategyKind, String> {
    StrategyKind::parse(s).ok_or_else(|| format!("unknown strategy `{s}` (fair, outermost-fair, needed-fair)"))
}

fn config(cli: Cli) -> Result<SessionConfig, icrs_cli::CliError> {
    let format = cli.format;
    let (file, term, command) = match cli.cmd {
        Cmd::Check { file } => (file, None, Command::Check),
        Cmd::Normalize { input, strategy, depth, fuel, emit } => (input.file, input.term, Command::Normalize { strategy, depth, fuel, emit }),
        Cmd::Develop { input, redexes, table_depth, max_len } => {
            (input.file, input.term, Command::Develop { redexes: redexes.selection(), table_depth, max_len })
        }
        Cmd::Essential { input, script, stages, prefix, redex_depth } => {
            let script = match (script, stages) {
                (Some(p), _) => std::fs::read_to_string(&p).map_err(|source| icrs_cli::CliError::Io { path: p, source })?,
                (None, Some(s)) => s,
                (None, None) => return Err(icrs_cli::CliError::Flag("pass --script or --stages".into())),
            };
            (input.file, input.term, Command::Essential { script, prefix, redex_depth })
        }
        Cmd::Paths { input, redexes, budget } => (input.file, input.term, Command::Paths { redexes: redexes.selection(), budget }),
        Cmd::Audit { input, steps, strategy, window } => (input.file, input.term, Command::Audit { steps, strategy, window }),
    };
    Ok(SessionConfig { file, term, command, format })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let format = cli.format;
    let result = config(cli).and_then(|cfg| run(&cfg));
    match result {
        Ok(report) => {
            print!("{}", report.render(format));
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            if let Some(t) = e.partial_trace() {
                print!("{t}");
            }
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
