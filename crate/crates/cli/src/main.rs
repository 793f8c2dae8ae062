//! `bcg`: analyze bottleneck congestion games from the command line.
//!
//! Exit status is 0 when every requested check passes, 1 when a check
//! fails and 2 for usage, input or parse errors.

use std::fs;
use std::io::{self, Read};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use bottleneck_core::expansion::{upper_bound_arbitrary, ResourceGraph};
use bottleneck_core::lower_bound::{self, sweep_tsv};
use bottleneck_core::suite::{run_suite, SuiteConfig, SuiteReport};
use bottleneck_core::transform::{domination_report, TransformOptions, TwoStrategyGame};
use bottleneck_core::{price_of_anarchy, transform_to_type_a, Error, Game, PoaReport, Profile};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(
    name = "bcg",
    version,
    about = "Bottleneck congestion games: equilibria, price of anarchy, transformation"
)]
struct Cli {
    /// Largest number of profiles any enumeration may visit.
    #[arg(long, global = true, env = "BCG_STATE_CAP", default_value_t = bottleneck_core::DEFAULT_STATE_CAP)]
    cap: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Enumerate equilibria and report the exact price of anarchy.
    Analyze {
        /// Game file (JSON), or `-` for standard input.
        file: PathBuf,
    },
    /// Run the randomized verification suite.
    Suite(SuiteArgs),
    /// Transform a game so that congested resources carry single-resource players only.
    Transform {
        file: PathBuf,
        #[command(flatten)]
        profiles: ProfileArgs,
        /// Print one JSON line per operation to standard error.
        #[arg(long)]
        trace: bool,
    },
    /// Check the expansion inequalities on the resource graph.
    Expansion {
        file: PathBuf,
        #[command(flatten)]
        profiles: ProfileArgs,
        /// Transform the game first.
        #[arg(long)]
        transform: bool,
    },
    /// Emit and verify a member of the tight lower-bound family.
    LowerBound {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        degree: u32,
    },
    /// Tabulate the lower-bound family over a range of sizes.
    Sweep {
        #[arg(long)]
        degree: u32,
        /// Inclusive range, e.g. `2..6`.
        #[arg(long, value_parser = parse_range)]
        n_range: RangeInclusive<usize>,
        #[arg(long, value_enum, default_value_t = Format::Tsv)]
        format: Format,
    },
}

#[derive(Args, Debug)]
struct SuiteArgs {
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    max_players: usize,
    #[arg(long, default_value_t = 6)]
    max_resources: usize,
    #[arg(long, default_value_t = 3)]
    max_strategies: usize,
    /// Inclusive range of delay degrees, cycled over the games.
    #[arg(long, value_parser = parse_degrees, default_value = "1..3")]
    degrees: RangeInclusive<u32>,
    #[arg(long, default_value_t = 5)]
    brd_starts: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

/// Equilibrium and optimal profiles; both are found by enumeration when omitted.
#[derive(Args, Debug)]
struct ProfileArgs {
    /// Strategy index per player of a Nash equilibrium, comma separated.
    #[arg(long, value_delimiter = ',')]
    nash: Option<Vec<usize>>,
    /// Strategy index per player of the reference optimum.
    #[arg(long, value_delimiter = ',')]
    optimal: Option<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Tsv,
}

fn parse_range(s: &str) -> Result<RangeInclusive<usize>, String> {
    let (a, b) = s
        .split_once("..=")
        .or_else(|| s.split_once(".."))
        .ok_or_else(|| format!("expected a range like 2..6, got {s:?}"))?;
    let lo: usize = a.trim().parse().map_err(|e| format!("range start {a:?}: {e}"))?;
    let hi: usize = b.trim().parse().map_err(|e| format!("range end {b:?}: {e}"))?;
    if lo > hi {
        return Err(format!("empty range {s:?}"));
    }
    Ok(lo..=hi)
}

fn parse_degrees(s: &str) -> Result<RangeInclusive<u32>, String> {
    let r = match s.parse::<u32>() {
        Ok(m) => m as usize..=m as usize,
        Err(_) => parse_range(s)?,
    };
    if *r.start() < 1 {
        return Err("degrees start at 1".into());
    }
    Ok(*r.start() as u32..=*r.end() as u32)
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidGame(_)
            | Error::InvalidProfile(_)
            | Error::InvalidPlayer { .. }
            | Error::Json(_)
            | Error::StateSpaceTooLarge { .. }
            | Error::TooManyResources { .. }
            | Error::NotNash { .. } => 2,
            _ => 1,
        };
        Failure {
            code,
            error: e.into(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure { code: 2, error }
    }
}

type CmdResult = Result<bool, Failure>;

fn read_game(path: &Path) -> Result<Game, Failure> {
    let text = if path == Path::new("-") {
        let mut buf = String::new();
        io::stdin()
            .read_to_string(&mut buf)
            .context("reading standard input")?;
        buf
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
    };
    Game::from_json(&text).map_err(|e| Failure {
        code: 2,
        error: anyhow!(e).context(format!("parsing {}", path.display())),
    })
}

fn emit<T: Serialize>(value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    println!("{text}");
    Ok(())
}

/// Supplied profiles, or the worst equilibrium and an optimum by enumeration.
fn profiles(game: &Game, args: &ProfileArgs, cap: u64) -> Result<(Profile, Profile), Failure> {
    match (&args.nash, &args.optimal) {
        (Some(n), Some(o)) => {
            let (n, o) = (Profile::new(n.clone()), Profile::new(o.clone()));
            game.validate_profile(&n)?;
            game.validate_profile(&o)?;
            Ok((n, o))
        }
        (n, o) => {
            let poa = price_of_anarchy(game, cap)?;
            let nash = n.clone().map(Profile::new).unwrap_or(poa.worst_nash);
            let optimal = o.clone().map(Profile::new).unwrap_or(poa.optimal);
            game.validate_profile(&nash)?;
            game.validate_profile(&optimal)?;
            Ok((nash, optimal))
        }
    }
}

#[derive(Serialize)]
struct AnalyzeReport {
    num_players: usize,
    num_resources: usize,
    degree: u32,
    #[serde(flatten)]
    poa: PoaReport,
    poa_value: f64,
    upper_bound_arbitrary: f64,
    within_bound: bool,
}

fn cmd_analyze(file: &Path, cap: u64) -> CmdResult {
    let game = read_game(file)?;
    let poa = price_of_anarchy(&game, cap)?;
    let within_bound =
        bottleneck_core::poa_within_upper_bound(poa.c, poa.c_star, game.num_resources(), game.degree())?;
    emit(&AnalyzeReport {
        num_players: game.num_players(),
        num_resources: game.num_resources(),
        degree: game.degree(),
        poa_value: poa.poa(),
        poa,
        upper_bound_arbitrary: upper_bound_arbitrary(game.num_resources(), game.degree()),
        within_bound,
    })?;
    Ok(within_bound)
}

fn suite_tsv(report: &SuiteReport) -> String {
    let mut out = String::from("index\tdegree\tplayers\tresources\tC\tC_star\tpoa\tbound\tbeta\tpass\n");
    for g in &report.games {
        let beta = g
            .transform
            .as_ref()
            .map_or(String::from("-"), |t| format!("{:.3}", t.beta_observed));
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}/{}\t{:.3}\t{}\t{}\n",
            g.index,
            g.degree,
            g.num_players,
            g.num_resources,
            g.c,
            g.c_star,
            g.poa_num,
            g.poa_den,
            g.bound,
            beta,
            g.passed()
        ));
    }
    out
}

fn cmd_suite(args: &SuiteArgs, cap: u64) -> CmdResult {
    if args.max_players < 2 || args.max_resources < 2 || args.max_strategies < 2 {
        return Err(anyhow!("--max-players, --max-resources and --max-strategies must be at least 2").into());
    }
    let config = SuiteConfig {
        count: args.count,
        max_players: args.max_players,
        max_resources: args.max_resources,
        max_strategies: args.max_strategies,
        degrees: args.degrees.clone().collect(),
        seed: args.seed,
        cap,
        brd_starts: args.brd_starts,
    };
    let report = run_suite(&config);
    match args.format {
        Format::Json => emit(&report)?,
        Format::Tsv => print!("{}", suite_tsv(&report)),
    }
    for g in report.games.iter().filter(|g| !g.passed()) {
        eprintln!("game {}: {}", g.index, g.failures.join("; "));
    }
    Ok(report.pass)
}

fn cmd_transform(file: &Path, args: &ProfileArgs, trace: bool, cap: u64) -> CmdResult {
    let game = read_game(file)?;
    let (nash, optimal) = profiles(&game, args, cap)?;
    let outcome = transform_to_type_a(
        &game,
        &nash,
        &optimal,
        TransformOptions {
            trace,
            check_each_step: true,
        },
    )?;
    for event in &outcome.trace {
        eprintln!("{}", serde_json::to_string(event).map_err(Error::from)?);
    }
    let domination = domination_report(&game, &nash, &optimal, &outcome.game)?;
    let pass = domination.passed();
    emit(&serde_json::json!({
        "noop": outcome.noop,
        "preprocessed": outcome.preprocessed,
        "phases": outcome.phases,
        "domination": domination,
        "transformed": outcome.game.to_file(),
        "pass": pass,
    }))?;
    Ok(pass)
}

fn cmd_expansion(file: &Path, args: &ProfileArgs, transform: bool, cap: u64) -> CmdResult {
    let game = read_game(file)?;
    let (nash, optimal) = profiles(&game, args, cap)?;
    let tsg = if transform {
        transform_to_type_a(&game, &nash, &optimal, TransformOptions::default())?.game
    } else {
        let mut tsg = TwoStrategyGame::from_profiles(&game, &nash, &optimal)?;
        tsg.clean()?;
        tsg
    };
    let report = ResourceGraph::build(&tsg, tsg.psi(), tsg.c_star())?.report()?;
    let pass = report.pass;
    emit(&serde_json::json!({ "transformed": transform, "report": report }))?;
    Ok(pass)
}

fn cmd_lower_bound(n: usize, degree: u32, cap: u64) -> CmdResult {
    let instance = lower_bound::generate(n, degree)?;
    let report = lower_bound::verify(&instance, cap)?;
    emit(&serde_json::json!({ "game": instance.game, "report": report }))?;
    Ok(true)
}

fn cmd_sweep(degree: u32, ns: RangeInclusive<usize>, format: Format, cap: u64) -> CmdResult {
    let rows = lower_bound::sweep(degree, ns, cap)?;
    match format {
        Format::Tsv => print!("{}", sweep_tsv(&rows)),
        Format::Json => emit(&rows)?,
    }
    Ok(true)
}

fn run(cli: Cli) -> CmdResult {
    let cap = cli.cap;
    match cli.command {
        Command::Analyze { file } => cmd_analyze(&file, cap),
        Command::Suite(args) => cmd_suite(&args, cap),
        Command::Transform {
            file,
            profiles,
            trace,
        } => cmd_transform(&file, &profiles, trace, cap),
        Command::Expansion {
            file,
            profiles,
            transform,
        } => cmd_expansion(&file, &profiles, transform, cap),
        Command::LowerBound { n, degree } => cmd_lower_bound(n, degree, cap),
        Command::Sweep {
            degree,
            n_range,
            format,
        } => cmd_sweep(degree, n_range, format, cap),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_are_inclusive() {
        assert_eq!(parse_range("2..6").unwrap(), 2..=6);
        assert_eq!(parse_range("2..=6").unwrap(), 2..=6);
        assert!(parse_range("6..2").is_err());
        assert!(parse_range("six").is_err());
    }

    #[test]
    fn a_single_degree_is_a_range() {
        assert_eq!(parse_degrees("2").unwrap(), 2..=2);
        assert_eq!(parse_degrees("1..3").unwrap(), 1..=3);
        assert!(parse_degrees("0..2").is_err());
    }

    #[test]
    fn input_errors_map_to_usage_status() {
        assert_eq!(Failure::from(Error::InvalidGame("x".into())).code, 2);
        assert_eq!(Failure::from(Error::DominationViolation("x".into())).code, 1);
    }

    #[test]
    fn command_line_is_well_formed() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
