use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pic_core::amplification::{amplify_closed_form, delta_default, effective_population, invert_amplify, PopulationPolicy};
use pic_core::harness::{self, parse_config_text, ExperimentConfig, MetricRow, Scenario};
use pic_core::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

/// Private Individual Computation simulator.
#[derive(Parser)]
#[command(name = "pic", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single-report error sweeps.
    Randomize(Flags),
    /// Central/local budget calculator.
    Amplify(AmplifyArgs),
    /// Spatial crowdsourcing matchings.
    Crowdsourcing(Flags),
    /// Radius neighbour search in a social network.
    Social(Flags),
    /// Shapley incentives over sanitized gradients.
    Incentive(Flags),
    /// A full PIC round with transcript.
    ProtocolDemo(Flags),
    /// Reference rate curves.
    Rates(Flags),
}

/// Flags mirroring the config-file keys.
#[derive(Args)]
struct Flags {
    /// Comma list of mechanisms, or `all`.
    #[arg(long)]
    mechanism: Option<String>,
    /// Local budgets (LDP mode), comma separated; `inf` disables noise.
    #[arg(long)]
    eps: Option<String>,
    /// Central budgets (PIC mode), comma separated.
    #[arg(long)]
    eps_central: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    /// Population sizes, comma separated.
    #[arg(long)]
    n: Option<String>,
    /// Group sizes, comma separated.
    #[arg(long)]
    groups: Option<String>,
    #[arg(long)]
    dim: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    /// Coordinate bound of synthetic gradients.
    #[arg(long)]
    clip: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Location CSV(s) with header `id,x,y`, comma separated.
    #[arg(long)]
    dataset: Option<String>,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<String>,
    /// `full`, `minus-one` or `fraction=F`.
    #[arg(long)]
    policy: Option<String>,
    /// Task for `protocol-demo`.
    #[arg(long)]
    task: Option<String>,
    /// File of `key=value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Flags {
    fn pairs(&self) -> Vec<(String, String)> {
        [
            ("mechanism", &self.mechanism),
            ("eps", &self.eps),
            ("eps-central", &self.eps_central),
            ("delta", &self.delta),
            ("n", &self.n),
            ("groups", &self.groups),
            ("dim", &self.dim),
            ("tau", &self.tau),
            ("clip", &self.clip),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("dataset", &self.dataset),
            ("out", &self.out),
            ("policy", &self.policy),
            ("task", &self.task),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
        .collect()
    }

    fn config(&self, scenario: Scenario) -> pic_core::Result<ExperimentConfig> {
        let mut pairs = match &self.config {
            Some(path) => parse_config_text(&std::fs::read_to_string(path)?)?,
            None => Vec::new(),
        };
        pairs.extend(self.pairs());
        ExperimentConfig::from_pairs(scenario, &pairs)
    }
}

#[derive(Args)]
struct AmplifyArgs {
    /// Local budget to amplify.
    #[arg(long, conflicts_with = "eps_central", required_unless_present = "eps_central")]
    eps: Option<f64>,
    /// Central target to invert.
    #[arg(long)]
    eps_central: Option<f64>,
    /// Group size.
    #[arg(long)]
    n: u64,
    /// Defaults to `0.01 / n`.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value = "full")]
    policy: String,
}

fn amplify(args: &AmplifyArgs) -> pic_core::Result<()> {
    let policy: PopulationPolicy = args.policy.parse()?;
    let population = effective_population(args.n, policy)?;
    let delta = args.delta.unwrap_or_else(|| delta_default(args.n));
    let mut out = io::stdout().lock();
    writeln!(out, "population={population}")?;
    writeln!(out, "delta={delta}")?;
    match (args.eps, args.eps_central) {
        (Some(eps), _) => writeln!(out, "eps_central={}", amplify_closed_form(eps, delta, population)?)?,
        (None, Some(target)) => {
            let inv = invert_amplify(target, delta, population)?;
            writeln!(out, "eps_local={}", inv.epsilon)?;
            writeln!(out, "status={}", inv.status.as_str())?;
        }
        (None, None) => return Err(Error::Config("give --eps or --eps-central".into())),
    }
    Ok(())
}

fn emit(cfg: &ExperimentConfig, rows: &[MetricRow]) -> pic_core::Result<()> {
    match &cfg.out {
        Some(path) => harness::write_rows(BufWriter::new(File::create(path)?), rows),
        None => harness::write_rows(io::stdout().lock(), rows),
    }
}

fn experiment(flags: &Flags, scenario: Scenario) -> pic_core::Result<bool> {
    let cfg = flags.config(scenario)?;
    let rows = if scenario == Scenario::ProtocolDemo {
        let demo = harness::run_protocol_demo(&cfg)?;
        eprint!("{}", demo.transcript);
        demo.rows
    } else {
        harness::run(&cfg)?
    };
    emit(&cfg, &rows)?;
    Ok(harness::has_infeasible(&rows))
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::AmplificationInfeasible { .. } => EXIT_INFEASIBLE,
        Error::Config(_) | Error::Parse { .. } | Error::InvalidInput(_) | Error::Unsupported(_) => EXIT_CONFIG,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Amplify(args) => amplify(args).map(|()| false),
        Command::Randomize(f) => experiment(f, Scenario::SingleReport),
        Command::Crowdsourcing(f) => experiment(f, Scenario::Crowdsourcing),
        Command::Social(f) => experiment(f, Scenario::Social),
        Command::Incentive(f) => experiment(f, Scenario::Incentive),
        Command::ProtocolDemo(f) => experiment(f, Scenario::ProtocolDemo),
        Command::Rates(f) => experiment(f, Scenario::Rates),
    };
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("pic: amplification infeasible for at least one sweep point");
            ExitCode::from(EXIT_INFEASIBLE)
        }
        Err(e) => {
            eprintln!("pic: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
