use hdp_mean::bounds::upper_bound;
use hdp_mean::sim::estimate_mse_batch;
use hdp_mean::{DistributionSpec, MechanismSpec, PrivacyInput, SimResult};

use crate::args::SimulateArgs;
use crate::config::{ExperimentConfig, PrivacyConfig};
use crate::error::{CliError, CliResult};
use crate::output::{emit, Cell, OutputFormat, Table, SCHEMA_VERSION};
use crate::SeedSources;

pub const COLUMNS: [&str; 16] = [
    "mechanism",
    "n",
    "f",
    "realized_f",
    "eps1",
    "eps2",
    "dist",
    "trials",
    "seed",
    "mse",
    "stderr",
    "analytic_mse",
    "analytic_exact",
    "upper_bound",
    "clamp",
    "reason",
];

pub fn resolve_config(args: &SimulateArgs, seeds: &SeedSources) -> CliResult<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => {
            let input = crate::privacy_input(&args.privacy)?;
            ExperimentConfig {
                schema_version: SCHEMA_VERSION,
                mechanisms: crate::parse_mechanisms(&args.mechanisms)?,
                privacy: PrivacyConfig::from_input(&input),
                distribution: args
                    .dist
                    .parse::<DistributionSpec>()
                    .map_err(|e| CliError::usage(e.to_string()))?,
                trials: args.trials,
                seed: seeds.resolve(None),
                clamp: args.clamp,
                output: None,
                format: OutputFormat::Csv,
            }
        }
    };
    if args.config.is_some() {
        config.seed = seeds.resolve(Some(config.seed));
    }
    if let Some(o) = &args.out.output {
        config.output = Some(o.clone());
    }
    if let Some(f) = args.out.format {
        config.format = f;
    }
    Ok(config)
}

pub fn table(config: &ExperimentConfig) -> CliResult<Table> {
    let input = config.privacy.to_input()?;
    let specs: Vec<MechanismSpec> = config
        .mechanisms
        .iter()
        .map(|k| MechanismSpec {
            kind: *k,
            privacy: input.clone(),
            clamp: config.clamp,
        })
        .collect();
    let results = estimate_mse_batch(&specs, &config.distribution, config.trials, config.seed)?;
    let mut t = Table::new(&COLUMNS);
    for r in &results {
        t.push(row(r, &input, config));
    }
    Ok(t)
}

fn row(r: &SimResult, input: &PrivacyInput, config: &ExperimentConfig) -> Vec<Cell> {
    let (f, eps1, eps2, upper) = match input {
        PrivacyInput::TwoGroup(p) => (
            Cell::from(p.f),
            Cell::from(p.eps1),
            Cell::from(p.eps2),
            Cell::from(upper_bound(p)),
        ),
        PrivacyInput::Vector(_) => (Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty),
    };
    vec![
        r.mechanism.id().into(),
        input.to_vector().len().into(),
        f,
        r.realized_f.into(),
        eps1,
        eps2,
        config.distribution.to_string().into(),
        r.trials.into(),
        r.seed.into(),
        r.mse.into(),
        r.stderr.into(),
        r.analytic_ref.total.into(),
        r.analytic_ref.exact.into(),
        upper,
        config.clamp.into(),
        r.infeasible.clone().into(),
    ]
}

pub fn run(args: &SimulateArgs, seeds: &SeedSources) -> CliResult<()> {
    let config = resolve_config(args, seeds)?;
    if let Some(path) = &args.save_config {
        let mut text = config.to_json();
        text.push('\n');
        std::fs::write(path, text).map_err(|e| CliError::io(path.display(), e))?;
    }
    let t = table(&config)?;
    emit(&t.render(config.format)?, config.output.as_deref())
}
