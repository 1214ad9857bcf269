//! `ocf`: command-line front end for ocf-core.
//!
//! Exit codes: 0 stable or success, 1 unstable or empty (a witness is
//! printed), 2 usage or validation error. Agents are numbered from 1.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ocf_core::convexity::{self, Falsification};
use ocf_core::deviations::{self, DeviationKind, DeviationSearch};
use ocf_core::generate::{self, GameBounds};
use ocf_core::model::{self, payoff_vector_n, structure_value};
use ocf_core::rational::{self, format_list};
use ocf_core::stability::{self, CoreVerdict, Witness};
use ocf_core::welfare::{self, Vstar};
use ocf_core::{corpus, fuzzy, io, reductions, subsets};
use ocf_core::{Game, Outcome, PayoffPolicy, Resolution, Ttg, Violation};

#[derive(Parser)]
#[command(name = "ocf", version, about = "Stability analysis for overlapping coalition formation games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Search resolution for rule-based games and optimistic deviations.
#[derive(Args, Clone, Copy)]
struct ResolutionArgs {
    /// Most coalitions a deviating group may form anew (U).
    #[arg(long, default_value_t = 3)]
    cap: usize,
    /// Contributions are searched in multiples of 1/D weight units.
    #[arg(long, default_value_t = 1)]
    grid: u64,
}

impl ResolutionArgs {
    fn get(self) -> Result<Resolution> {
        Ok(Resolution::new(self.cap, self.grid)?)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CoreKind {
    C,
    R,
    O,
    /// Covering-constraint check p(S) >= v*(S) with per-coalition efficiency.
    Covering,
    /// Core of the crisp game on the outcome's partition.
    Nonoverlapping,
    /// Aubin core of the induced fuzzy game.
    Aubin,
    /// Support-based fuzzy core.
    F,
}

#[derive(Clone, Copy, ValueEnum)]
enum DevKind {
    C,
    R,
    O,
}

impl From<DevKind> for DeviationKind {
    fn from(k: DevKind) -> Self {
        match k {
            DevKind::C => DeviationKind::Conservative,
            DevKind::R => DeviationKind::Refined,
            DevKind::O => DeviationKind::Optimistic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Reduction {
    /// Unbounded knapsack to one-agent c-stability.
    Thm6,
    /// Maximum edge biclique to r-stability.
    Thm8,
}

#[derive(Subcommand)]
enum Command {
    /// Maximum social welfare with and without overlapping coalitions.
    Welfare {
        game: PathBuf,
        #[command(flatten)]
        res: ResolutionArgs,
    },
    /// Checks whether an outcome (or payoff vector) is in a core.
    CheckCore {
        game: PathBuf,
        outcome: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "c")]
        kind: CoreKind,
        /// Payoff vector for the fuzzy checks, e.g. "10,10".
        #[arg(long)]
        payoffs: Option<String>,
        /// Accept negative per-coalition payoffs.
        #[arg(long)]
        allow_negative: bool,
        #[command(flatten)]
        res: ResolutionArgs,
    },
    /// Searches for a c-stable outcome: of the game, on a fixed structure,
    /// or on a partition of crisp coalitions.
    Stabilize {
        game: PathBuf,
        /// Outcome file whose structure is kept fixed (payoffs ignored).
        #[arg(long, conflicts_with = "partition")]
        structure: Option<PathBuf>,
        /// Blocks separated by '|', e.g. "1|2,3".
        #[arg(long)]
        partition: Option<String>,
        #[arg(long)]
        allow_negative: bool,
        /// Where to write the stable outcome.
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[command(flatten)]
        res: ResolutionArgs,
    },
    /// Decides whether a structure can be stabilized and prints the
    /// balanced-collection certificate when it cannot.
    Balanced {
        game: PathBuf,
        /// Outcome file holding the structure (payoffs ignored).
        #[arg(long)]
        structure: PathBuf,
        #[arg(long)]
        allow_negative: bool,
        #[command(flatten)]
        res: ResolutionArgs,
    },
    /// Finds a profitable deviation from an outcome.
    Deviate {
        game: PathBuf,
        outcome: PathBuf,
        #[arg(long, value_enum, default_value = "r")]
        kind: DevKind,
        /// Deviating agents, e.g. "2,3"; all groups are tried when omitted.
        #[arg(long)]
        agents: Option<String>,
        /// Where to write the deviators' coalitions and payoffs.
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[command(flatten)]
        res: ResolutionArgs,
    },
    /// Builds a core element by marginal rounds, or searches for a
    /// convexity violation.
    Convexity {
        game: PathBuf,
        #[arg(long, required_unless_present = "falsify")]
        construct: bool,
        /// Agent ordering for the construction, e.g. "3,1,2"; defaults to 1..n.
        #[arg(long)]
        order: Option<String>,
        #[arg(long, conflicts_with = "construct")]
        falsify: bool,
        /// Payoff directions tried per candidate in rule-based games.
        #[arg(long, default_value_t = 16)]
        budget: usize,
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[command(flatten)]
        res: ResolutionArgs,
    },
    /// Runs the built-in regression corpus.
    Examples,
    /// Writes a seeded random game, or a game and outcome built from a
    /// knapsack or biclique problem file.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        agents: usize,
        #[arg(long, default_value_t = 6)]
        max_weight: u64,
        #[arg(long)]
        max_total_weight: Option<u64>,
        /// Number of task types (or rules).
        #[arg(long, default_value_t = 2)]
        tasks: usize,
        #[arg(long, default_value_t = 10)]
        max_utility: u64,
        /// Generate a rule-based game instead of a threshold task game.
        #[arg(long)]
        rules: bool,
        /// Also write a random valid outcome of the generated game.
        #[arg(long)]
        outcome_output: Option<PathBuf>,
        #[arg(long, value_enum, requires = "input")]
        reduction: Option<Reduction>,
        /// Problem file for --reduction.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[command(flatten)]
        res: ResolutionArgs,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_game(path: &Path) -> Result<Game> {
    io::parse_game(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_outcome(path: &Path, n: usize) -> Result<Outcome> {
    io::parse_outcome(&read(path)?, n).with_context(|| format!("parsing {}", path.display()))
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, format!("{text}\n")).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn policy(allow_negative: bool) -> PayoffPolicy {
    if allow_negative {
        PayoffPolicy::AllowNegative
    } else {
        PayoffPolicy::Nonnegative
    }
}

/// Validates an outcome before a stability check. Shortfalls against
/// stand-alone values are instabilities, not input errors, so they are left
/// for the check to report.
fn validate_for_check(game: &Game, o: &Outcome, policy: PayoffPolicy, res: Resolution) -> Result<()> {
    match model::validate_outcome(game, o, policy, res) {
        Err(ocf_core::Error::Validation(v)) if v.iter().all(|x| matches!(x, Violation::IndividualRationality { .. })) => {
            Ok(())
        }
        other => Ok(other?),
    }
}

fn agents_arg(s: &str, n: usize) -> Result<Vec<usize>> {
    subsets::parse_one_based(s, n).map_err(anyhow::Error::msg)
}

fn partition_arg(s: &str, n: usize) -> Result<Vec<Vec<usize>>> {
    s.split('|').map(|b| agents_arg(b, n)).collect()
}

fn print_structure(game: &Game, outcome: &Outcome) -> Result<()> {
    for (i, c) in outcome.structure.coalitions.iter().enumerate() {
        let pay = outcome.payoffs.get(i).map(|r| format!(" paying ({})", format_list(r))).unwrap_or_default();
        println!("  coalition {}: ({}) worth {}{pay}", i + 1, format_list(c.contributions()), game.value(c)?);
    }
    Ok(())
}

fn status(stable: bool) -> u8 {
    u8::from(!stable)
}

fn report_verdict(v: &CoreVerdict) -> u8 {
    match (&v.witness, v.stable) {
        (Some(Witness::Deviation(d)), false) => print!("unstable\n{}", d.narrate()),
        (Some(w), false) => println!("unstable: {w}"),
        (_, true) => println!("stable"),
        (None, false) => println!("unstable"),
    }
    if let Some(res) = v.resolution {
        println!("resolution: U={}, D={}", res.cap, res.grid);
    }
    status(v.stable)
}

fn welfare_cmd(game: &Game, res: Resolution) -> Result<u8> {
    match game {
        Game::Ttg(t) => {
            let opt = welfare::max_welfare_overlapping(t)?;
            println!("overlapping welfare: {}", opt.value);
            let o = Outcome::new(opt.structure, Vec::new());
            print_structure(game, &o)?;
            let (value, partition) = welfare::max_welfare_nonoverlapping(t)?;
            let blocks: String = partition.iter().map(|b| subsets::format_one_based(b)).collect();
            println!("nonoverlapping welfare: {value}");
            println!("  partition {blocks}");
        }
        Game::Rules(_) => {
            let oracle = Vstar::new(game, res)?;
            let all: Vec<usize> = (0..game.n()).collect();
            let (value, cs) = oracle.witness(&all);
            println!("overlapping welfare: {value} (U={}, D={})", res.cap, res.grid);
            print_structure(game, &Outcome::new(cs, Vec::new()))?;
        }
    }
    Ok(0)
}

fn fuzzy_payoffs(game: &Game, outcome: Option<&Path>, payoffs: Option<&str>) -> Result<Vec<rational::Rational>> {
    match (payoffs, outcome) {
        (Some(p), _) => Ok(io::parse_payoffs(p)?),
        (None, Some(path)) => Ok(payoff_vector_n(&load_outcome(path, game.n())?, game.n())?),
        (None, None) => bail!("the fuzzy checks need --payoffs or an outcome file"),
    }
}

fn check_core_cmd(
    game: &Game,
    outcome: Option<&Path>,
    kind: CoreKind,
    payoffs: Option<&str>,
    allow_negative: bool,
    res: Resolution,
) -> Result<u8> {
    if let CoreKind::Aubin | CoreKind::F = kind {
        let ttg = game.as_ttg().context("fuzzy checks need a threshold task game")?;
        let p = fuzzy_payoffs(game, outcome, payoffs)?;
        let rep = if let CoreKind::Aubin = kind { fuzzy::aubin_core_check(ttg, &p)? } else { fuzzy::f_core_check(ttg, &p)? };
        if rep.holds {
            println!("holds");
        } else {
            let w = rep.witness.as_deref().map(format_list).unwrap_or_default();
            let value = rep.value.map(|v| v.to_string()).unwrap_or_default();
            let granted = rep.granted.map(|v| v.to_string()).unwrap_or_default();
            println!("fails: participation ({w}) earns {value} but is granted {granted}");
        }
        return Ok(status(rep.holds));
    }
    let path = outcome.context("this check needs an outcome file")?;
    let o = load_outcome(path, game.n())?;
    validate_for_check(game, &o, policy(allow_negative), res)?;
    let verdict = match (kind, game) {
        (CoreKind::C, Game::Ttg(t)) => stability::ttg_membership(t, &o)?,
        (CoreKind::C, _) => deviations::core_membership(game, &o, DeviationKind::Conservative, res)?,
        (CoreKind::R, _) => deviations::core_membership(game, &o, DeviationKind::Refined, res)?,
        (CoreKind::O, _) => deviations::core_membership(game, &o, DeviationKind::Optimistic, res)?,
        (CoreKind::Covering, _) => stability::check_theorem1(game, &o, res)?,
        (CoreKind::Nonoverlapping, _) => {
            let ttg = game.as_ttg().context("the nonoverlapping check needs a threshold task game")?;
            let partition = crisp_partition(ttg, &o)?;
            stability::nonoverlapping_core_check(ttg, &partition, &payoff_vector_n(&o, game.n())?)?
        }
        (CoreKind::Aubin | CoreKind::F, _) => unreachable!("handled above"),
    };
    Ok(report_verdict(&verdict))
}

/// Reads an outcome as a partition: every coalition is crisp and disjoint
/// from the others. Agents in no coalition form singleton blocks.
fn crisp_partition(ttg: &Ttg, o: &Outcome) -> Result<Vec<Vec<usize>>> {
    let n = ttg.n();
    let mut seen = vec![false; n];
    let mut blocks = Vec::new();
    for (k, c) in o.structure.coalitions.iter().enumerate() {
        let support = c.support();
        if support.is_empty() {
            continue;
        }
        for &j in &support {
            if seen[j] || c.get(j) != &ttg.weights()[j] {
                bail!("coalition {} is not a crisp block of a partition", k + 1);
            }
            seen[j] = true;
        }
        blocks.push(support);
    }
    blocks.extend((0..n).filter(|&j| !seen[j]).map(|j| vec![j]));
    Ok(blocks)
}

fn stabilize_cmd(
    game: &Game,
    structure: Option<&Path>,
    partition: Option<&str>,
    allow_negative: bool,
    output: Option<&Path>,
    res: Resolution,
) -> Result<u8> {
    let verdict = match (structure, partition) {
        (Some(path), _) => {
            let cs = load_outcome(path, game.n())?.structure;
            stability::stabilize_structure(game, &cs, policy(allow_negative), res)?
        }
        (None, Some(p)) => {
            let ttg = game.as_ttg().context("partition stabilization needs a threshold task game")?;
            stability::stabilize_partition(ttg, &partition_arg(p, game.n())?)?
        }
        (None, None) => stability::stabilize(game.as_ttg().context("use --structure for rule-based games")?)?,
    };
    match verdict.stabilizer() {
        Some(o) => {
            println!("stable outcome found");
            print_structure(game, o)?;
            println!("payoff vector: ({})", format_list(&payoff_vector_n(o, game.n())?));
            if let Some(path) = output {
                emit(Some(path), &io::outcome_to_json(o))?;
            }
            Ok(0)
        }
        None => {
            match &verdict.witness {
                Some(Witness::Empty(cert)) => {
                    println!("c-core is empty");
                    for ((s, v), y) in cert.sets.iter().zip(&cert.values).zip(&cert.multipliers) {
                        println!("  set {} worth {v}: multiplier {y}", subsets::format_one_based(s));
                    }
                }
                Some(w) => println!("no stable payoffs: {w}"),
                None => println!("no stable payoffs"),
            }
            Ok(1)
        }
    }
}

fn balanced_cmd(game: &Game, structure: &Path, allow_negative: bool, res: Resolution) -> Result<u8> {
    let cs = load_outcome(structure, game.n())?.structure;
    let verdict = stability::stabilize_structure(game, &cs, policy(allow_negative), res)?;
    match &verdict.witness {
        Some(Witness::Certificate(b)) if !verdict.stable => {
            let oracle = Vstar::new(game, res)?;
            println!("structure cannot be stabilized; balanced collection:");
            for (s, l) in &b.lambda {
                println!("  lambda {} = {l} (v* = {})", subsets::format_one_based(s), oracle.value(s));
            }
            for (i, m) in b.mu.iter().enumerate() {
                println!("  mu coalition {} = {m}", i + 1);
            }
            for (i, j, v) in &b.nu {
                println!("  nu coalition {} agent {} = {v}", i + 1, j + 1);
            }
            let all: Vec<usize> = (0..game.n()).collect();
            println!(
                "weighted value {} > v*(N) = {}: {}",
                b.weighted_value(&oracle, &cs)?,
                oracle.value(&all),
                b.violates_balancedness(&oracle, &cs)?
            );
            println!("equalities hold: {}", b.satisfies_equalities(&cs));
            Ok(1)
        }
        _ => {
            println!("structure can be stabilized");
            if let Some(o) = verdict.stabilizer() {
                print_structure(game, o)?;
            }
            Ok(0)
        }
    }
}

fn deviate_cmd(
    game: &Game,
    outcome: &Path,
    kind: DeviationKind,
    agents: Option<&str>,
    output: Option<&Path>,
    res: Resolution,
) -> Result<u8> {
    let o = load_outcome(outcome, game.n())?;
    validate_for_check(game, &o, PayoffPolicy::Nonnegative, res)?;
    let found = match agents {
        Some(a) => DeviationSearch::new(game, &o, res)?.find(kind, &agents_arg(a, game.n())?)?,
        None => match deviations::core_membership(game, &o, kind, res)?.witness {
            Some(Witness::Deviation(d)) => Some(*d),
            _ => None,
        },
    };
    match found {
        Some(d) => {
            print!("{}", d.narrate());
            if let Some(path) = output {
                emit(Some(path), &io::outcome_to_json(&d.outcome()))?;
            }
            Ok(1)
        }
        None => {
            println!("no {}-deviation found (U={}, D={})", kind.letter(), res.cap, res.grid);
            Ok(0)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn convexity_cmd(
    game: &Game,
    falsify: bool,
    order: Option<&str>,
    budget: usize,
    output: Option<&Path>,
    res: Resolution,
) -> Result<u8> {
    if falsify {
        let f = convexity::falsify_convexity(game, res, budget)?;
        println!("{f}");
        return Ok(status(!matches!(f, Falsification::Violation(_))));
    }
    let n = game.n();
    let ordering = match order {
        Some(s) => {
            let list: Vec<usize> = s
                .split(',')
                .map(|t| t.trim().parse::<usize>().with_context(|| format!("bad agent {t:?}")))
                .collect::<Result<_>>()?;
            if list.iter().any(|&a| a == 0 || a > n) {
                bail!("agents in --order must lie in 1..={n}");
            }
            list.into_iter().map(|a| a - 1).collect()
        }
        None => (0..n).collect::<Vec<_>>(),
    };
    let rounds = convexity::construct_rounds(game, &ordering, res)?;
    for r in &rounds {
        println!(
            "round {}: agents {} worth {}, payoffs ({})",
            r.round,
            subsets::format_one_based(&r.agents),
            structure_value(game, &r.outcome.structure)?,
            format_list(&r.payoffs)
        );
    }
    let last = rounds.last().context("the game has no agents")?;
    print_structure(game, &last.outcome)?;
    if let Some(path) = output {
        emit(Some(path), &io::outcome_to_json(&last.outcome))?;
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn gen_cmd(
    seed: u64,
    bounds: GameBounds,
    rules: bool,
    outcome_output: Option<&Path>,
    reduction: Option<Reduction>,
    input: Option<&Path>,
    output: Option<&Path>,
    res: Resolution,
) -> Result<u8> {
    if let Some(red) = reduction {
        let text = read(input.context("--reduction needs --input")?)?;
        let (ttg, outcome) = match red {
            Reduction::Thm6 => reductions::build_theorem6(&io::parse_knapsack(&text)?)?,
            Reduction::Thm8 => reductions::build_theorem8(&io::parse_biclique(&text)?)?,
        };
        emit(output, &io::game_to_json(&ttg.into()))?;
        if let Some(path) = outcome_output {
            emit(Some(path), &io::outcome_to_json(&outcome))?;
        }
        return Ok(0);
    }
    let game = generate::generate_game(seed, &bounds, rules)?;
    emit(output, &io::game_to_json(&game))?;
    if let Some(path) = outcome_output {
        let o = generate::generate_outcome(seed, &game, res)?;
        emit(Some(path), &io::outcome_to_json(&o))?;
    }
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Welfare { game, res } => welfare_cmd(&load_game(&game)?, res.get()?),
        Command::CheckCore { game, outcome, kind, payoffs, allow_negative, res } => {
            check_core_cmd(&load_game(&game)?, outcome.as_deref(), kind, payoffs.as_deref(), allow_negative, res.get()?)
        }
        Command::Stabilize { game, structure, partition, allow_negative, output, res } => stabilize_cmd(
            &load_game(&game)?,
            structure.as_deref(),
            partition.as_deref(),
            allow_negative,
            output.as_deref(),
            res.get()?,
        ),
        Command::Balanced { game, structure, allow_negative, res } => {
            balanced_cmd(&load_game(&game)?, &structure, allow_negative, res.get()?)
        }
        Command::Deviate { game, outcome, kind, agents, output, res } => {
            deviate_cmd(&load_game(&game)?, &outcome, kind.into(), agents.as_deref(), output.as_deref(), res.get()?)
        }
        Command::Convexity { game, construct: _, order, falsify, budget, output, res } => {
            convexity_cmd(&load_game(&game)?, falsify, order.as_deref(), budget, output.as_deref(), res.get()?)
        }
        Command::Examples => {
            let report = corpus::run_examples();
            print!("{report}");
            Ok(status(report.all_passed()))
        }
        Command::Gen {
            seed,
            agents,
            max_weight,
            max_total_weight,
            tasks,
            max_utility,
            rules,
            outcome_output,
            reduction,
            input,
            output,
            res,
        } => {
            let bounds = GameBounds { agents, max_weight, max_total_weight, tasks, max_utility };
            gen_cmd(seed, bounds, rules, outcome_output.as_deref(), reduction, input.as_deref(), output.as_deref(), res.get()?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
