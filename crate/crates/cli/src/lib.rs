//! Command-line front end for the `hdp-mean` library.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use hdp_mean::sim::DEFAULT_SEED;
use hdp_mean::{MechanismKind, PrivacyInput, TwoGroupProfile};

use args::{Cli, Command, PrivacyArgs};
use error::{CliError, CliResult};

/// Environment variable that replaces the built-in default seed.
pub const SEED_ENV: &str = "HDP_MEAN_SEED";

/// Seed sources in increasing priority: built-in default, environment,
/// config file, `--seed`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SeedSources {
    pub flag: Option<u64>,
    pub env: Option<u64>,
}

impl SeedSources {
    pub fn from_env(flag: Option<u64>) -> CliResult<Self> {
        let env = match std::env::var(SEED_ENV) {
            Ok(s) => Some(
                s.trim()
                    .parse::<u64>()
                    .map_err(|e| CliError::usage(format!("{SEED_ENV}={s:?}: {e}")))?,
            ),
            Err(std::env::VarError::NotPresent) => None,
            Err(e) => return Err(CliError::usage(format!("{SEED_ENV}: {e}"))),
        };
        Ok(SeedSources { flag, env })
    }

    pub fn resolve(&self, config: Option<u64>) -> u64 {
        self.flag.or(config).or(self.env).unwrap_or(DEFAULT_SEED)
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let seeds = SeedSources::from_env(cli.seed)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| CliError::usage(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Weights(a) => commands::weights::run(&a),
        Command::Bounds(a) => commands::bounds::run(&a),
        Command::Simulate(a) => commands::simulate::run(&a, &seeds),
        Command::Audit(a) => commands::audit::run(&a, &seeds),
        Command::Reproduce(a) => commands::reproduce::run(&a, &seeds),
    })
}

pub(crate) fn privacy_input(a: &PrivacyArgs) -> CliResult<PrivacyInput> {
    match (a.eps1, a.eps2, a.n, a.f, &a.eps_file) {
        (Some(eps1), Some(eps2), Some(n), Some(f), None) => {
            Ok(PrivacyInput::TwoGroup(TwoGroupProfile::new(eps1, eps2, n, f)?))
        }
        (None, None, None, None, Some(path)) => Ok(PrivacyInput::Vector(config::read_levels(path)?)),
        _ => Err(CliError::usage(
            "give either --eps1, --eps2, --n and --f, or --eps-file",
        )),
    }
}

/// Expands `all` and removes duplicates, keeping the order given.
pub(crate) fn parse_mechanisms(names: &[String]) -> CliResult<Vec<MechanismKind>> {
    let mut kinds = Vec::new();
    for name in names {
        let expanded = if name.trim().eq_ignore_ascii_case("all") {
            MechanismKind::ALL.to_vec()
        } else {
            vec![name
                .trim()
                .parse::<MechanismKind>()
                .map_err(|e| CliError::usage(e.to_string()))?]
        };
        for k in expanded {
            if !kinds.contains(&k) {
                kinds.push(k);
            }
        }
    }
    if kinds.is_empty() {
        return Err(CliError::usage("no mechanism selected"));
    }
    Ok(kinds)
}
