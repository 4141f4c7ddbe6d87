use std::path::PathBuf;
use std::process::ExitCode;

use clap::{value_parser, Arg, ArgAction, ArgMatches, Command};
use dirac_lab::config::{parse_config, ExperimentConfig};
use dirac_lab::experiments::{run_experiment, EXPERIMENTS};
use dirac_lab::LabError;

fn run_args() -> [Arg; 4] {
    [
        Arg::new("config").long("config").value_name("PATH").value_parser(value_parser!(PathBuf))
            .help("Configuration file (key = value with dotted sections)"),
        Arg::new("out").long("out").value_name("DIR").value_parser(value_parser!(PathBuf))
            .help("Output directory for CSV tables and verdict.json"),
        Arg::new("seed").long("seed").value_name("U64").value_parser(value_parser!(u64))
            .help("Random seed; overrides the configuration"),
        Arg::new("strict").long("strict").action(ArgAction::SetTrue)
            .help("Reject unknown configuration keys instead of warning"),
    ]
}

fn cli() -> Command {
    let mut cmd = Command::new("dirac-lab")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Numerical experiments for fractional Dirac operators on flat tori")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for e in EXPERIMENTS {
        cmd = cmd.subcommand(Command::new(e.name).about(e.summary).args(run_args()));
    }
    cmd
}

fn load(m: &ArgMatches) -> Result<ExperimentConfig, LabError> {
    let mut cfg = match m.get_one::<PathBuf>("config") {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let parsed = parse_config(&text, m.get_flag("strict"))?;
            for w in &parsed.warnings {
                eprintln!("warning: {w}");
            }
            parsed.config
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = m.get_one::<u64>("seed") {
        cfg.seed = *seed;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    // Unknown subcommands are usage errors: clap exits with status 2.
    let matches = cli().get_matches();
    let (name, m) = matches.subcommand().expect("subcommand required");
    let cfg = match load(m) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(configured) = &cfg.experiment {
        if configured != name {
            eprintln!("warning: configuration names experiment '{configured}', running '{name}'");
        }
    }
    let out = m
        .get_one::<PathBuf>("out")
        .cloned()
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(name));
    let outcome = match run_experiment(name, &cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    if let Err(e) = outcome.write(&out) {
        eprintln!("error: writing {}: {e}", out.display());
        return ExitCode::FAILURE;
    }
    for v in &outcome.verdicts {
        let mark = if v.pass { "PASS" } else { "FAIL" };
        println!("{mark} {}/{}: measured {:e}, tolerance {:e}", v.experiment, v.check, v.measured, v.tolerance);
    }
    if outcome.passed() {
        ExitCode::SUCCESS
    } else {
        let names: Vec<_> = outcome.failures().iter().map(|v| v.check.clone()).collect();
        eprintln!("failed: {}", names.join(", "));
        ExitCode::FAILURE
    }
}
