//! Data behind the comparison figures, the weight-ratio plot and the
//! heterogeneous-level table, each written as CSV plus `manifest.json`.

use std::fs;
use std::path::Path;

use hdp_mean::sim::{sweep_eps2, sweep_n, table2_experiment, weight_ratio_sweep, Table2};
use hdp_mean::{DistributionSpec, MechanismKind, TwoGroupProfile};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{ReproduceArgs, Target};
use crate::error::{CliError, CliResult};
use crate::output::{json_bytes, json_float, Cell, Table, SCHEMA_VERSION};
use crate::SeedSources;

pub const FIG1A_N: [u64; 6] = [100, 250, 500, 1000, 2000, 4000];
pub const TABLE2_N: usize = 1000;
pub const TABLE2_LOW: (f64, f64) = (-3.0, -2.0);
pub const TABLE2_HIGH: (f64, f64) = (-4.0, 2.0);

/// `eps2 = 0.1, 0.12, ..., hi`.
fn eps2_grid(hi_hundredths: u32) -> Vec<f64> {
    (10..=hi_hundredths).step_by(2).map(|k| f64::from(k) / 100.0).collect()
}

fn fig1a_template() -> TwoGroupProfile {
    TwoGroupProfile::new(0.1, 0.15, 1000, 0.5).expect("valid profile")
}

fn fig1b_template() -> TwoGroupProfile {
    TwoGroupProfile::new(0.1, 0.1, 1000, 0.7).expect("valid profile")
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub target: &'static str,
    pub seed: u64,
    pub trials: u64,
    pub config: Value,
    pub files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub saturation_eps2: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

pub struct Bundle {
    pub files: Vec<(String, Table)>,
    pub manifest: Manifest,
}

fn manifest(target: Target, seed: u64, trials: u64, config: Value) -> Manifest {
    Manifest {
        schema_version: SCHEMA_VERSION,
        tool: "hdp-mean",
        version: env!("HDP_MEAN_VERSION"),
        target: target.name(),
        seed,
        trials,
        config,
        files: Vec::new(),
        saturation_eps2: None,
        notes: Vec::new(),
    }
}

fn profile_json(p: &TwoGroupProfile) -> Value {
    json!({ "eps1": json_float(p.eps1), "eps2": json_float(p.eps2), "n": p.n, "f": p.f })
}

fn reason(r: &hdp_mean::SimResult) -> Cell {
    r.infeasible.clone().into()
}

fn fig1a(seed: u64, trials: u64) -> CliResult<Bundle> {
    let template = fig1a_template();
    let dist = DistributionSpec::Uniform;
    let rows = sweep_n(&template, &MechanismKind::ALL, &dist, &FIG1A_N, trials, seed)?;
    let mut t = Table::new(&[
        "n",
        "mechanism",
        "mse",
        "stderr",
        "transform",
        "transform_stderr",
        "analytic_transform",
        "reason",
    ]);
    for r in &rows {
        t.push(vec![
            r.n.into(),
            r.result.mechanism.id().into(),
            r.result.mse.into(),
            r.result.stderr.into(),
            r.transform.into(),
            r.transform_stderr.into(),
            r.analytic_transform.into(),
            reason(&r.result),
        ]);
    }
    let config = json!({
        "profile": profile_json(&template),
        "n_values": FIG1A_N,
        "distribution": dist,
        "mechanisms": MechanismKind::ALL,
        "transform": "(mse - 1/(12 n)) * n^2",
    });
    Ok(Bundle {
        files: vec![("fig1a.csv".into(), t)],
        manifest: manifest(Target::Fig1a, seed, trials, config),
    })
}

fn fig1b(seed: u64, trials: u64) -> CliResult<Bundle> {
    let template = fig1b_template();
    let dist = DistributionSpec::Uniform;
    let grid = eps2_grid(50);
    let rows = sweep_eps2(&template, &MechanismKind::ALL, &dist, &grid, trials, seed)?;
    let mut t = Table::new(&[
        "eps2",
        "mechanism",
        "mse_e4",
        "stderr_e4",
        "analytic_e4",
        "saturation_eps2",
        "regime",
        "weight_ratio",
        "upper_bound_e4",
        "reason",
    ]);
    for r in &rows {
        t.push(vec![
            r.eps2.into(),
            r.result.mechanism.id().into(),
            r.mse_e4.into(),
            r.stderr_e4.into(),
            (r.result.analytic_ref.total * 1e4).into(),
            r.saturation_eps2.into(),
            r.regime.to_string().into(),
            r.weight_ratio.into(),
            (r.upper_bound * 1e4).into(),
            reason(&r.result),
        ]);
    }
    let config = json!({
        "profile": profile_json(&template),
        "eps2_values": grid,
        "distribution": dist,
        "mechanisms": MechanismKind::ALL,
    });
    let mut m = manifest(Target::Fig1b, seed, trials, config);
    m.saturation_eps2 = Some(template.saturation_eps2());
    Ok(Bundle {
        files: vec![("fig1b.csv".into(), t)],
        manifest: m,
    })
}

fn weight_ratio(seed: u64, trials: u64) -> CliResult<Bundle> {
    let template = fig1b_template();
    let grid = eps2_grid(100);
    let mut t = Table::new(&[
        "eps2",
        "privacy_ratio",
        "saturation_ratio",
        "w1",
        "w2",
        "weight_ratio",
        "min_r_R",
        "regime",
    ]);
    for r in weight_ratio_sweep(&template, &grid)? {
        t.push(vec![
            r.eps2.into(),
            r.privacy_ratio.into(),
            r.saturation_ratio.into(),
            r.w1.into(),
            r.w2.into(),
            r.weight_ratio.into(),
            r.privacy_ratio.min(r.saturation_ratio).into(),
            r.regime.to_string().into(),
        ]);
    }
    let config = json!({ "profile": profile_json(&template), "eps2_values": grid });
    let mut m = manifest(Target::WeightRatio, seed, trials, config);
    m.saturation_eps2 = Some(template.saturation_eps2());
    m.notes
        .push("closed-form weights; no Monte Carlo trials are run".into());
    Ok(Bundle {
        files: vec![("weight_ratio.csv".into(), t)],
        manifest: m,
    })
}

fn table2_tables(result: &Table2) -> (Table, Table) {
    let mut t = Table::new(&[
        "spread",
        "mechanism",
        "mse",
        "stderr",
        "ln_mse",
        "analytic_mse",
        "reason",
    ]);
    for r in &result.rows {
        t.push(vec![
            r.spread.to_string().into(),
            r.result.mechanism.id().into(),
            r.result.mse.into(),
            r.result.stderr.into(),
            r.ln_mse.into(),
            r.result.analytic_ref.total.into(),
            reason(&r.result),
        ]);
    }
    let mut levels = Table::new(&["spread", "user", "eps"]);
    for (spread, eps) in [("high", &result.eps_high), ("low", &result.eps_low)] {
        for (i, e) in eps.levels().iter().enumerate() {
            levels.push(vec![spread.into(), i.into(), (*e).into()]);
        }
    }
    (t, levels)
}

fn table2(seed: u64, trials: u64) -> CliResult<Bundle> {
    let result = table2_experiment(TABLE2_N, TABLE2_LOW, TABLE2_HIGH, trials, seed)?;
    let (t, levels) = table2_tables(&result);
    let config = json!({
        "n": TABLE2_N,
        "ln_eps_range_low": [TABLE2_LOW.0, TABLE2_LOW.1],
        "ln_eps_range_high": [TABLE2_HIGH.0, TABLE2_HIGH.1],
        "distribution": DistributionSpec::Beta23Shifted,
        "mechanisms": MechanismKind::ALL,
        "log_base": "e",
    });
    let mut m = manifest(Target::Table2, seed, trials, config);
    m.notes.push("FME is out of scope and has no row in this table".into());
    m.notes
        .push("privacy levels are fresh log-uniform draws; see table2_levels.csv".into());
    Ok(Bundle {
        files: vec![("table2.csv".into(), t), ("table2_levels.csv".into(), levels)],
        manifest: m,
    })
}

pub fn build(target: Target, seed: u64, trials: u64) -> CliResult<Bundle> {
    match target {
        Target::Fig1a => fig1a(seed, trials),
        Target::Fig1b => fig1b(seed, trials),
        Target::WeightRatio => weight_ratio(seed, trials),
        Target::Table2 => table2(seed, trials),
    }
}

pub fn write(bundle: &mut Bundle, dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display(), e))?;
    for (name, table) in &bundle.files {
        let path = dir.join(name);
        fs::write(&path, table.to_csv()?).map_err(|e| CliError::io(path.display(), e))?;
        bundle.manifest.files.push(name.clone());
    }
    let path = dir.join("manifest.json");
    fs::write(&path, json_bytes(&bundle.manifest)).map_err(|e| CliError::io(path.display(), e))
}

pub fn run(args: &ReproduceArgs, seeds: &SeedSources) -> CliResult<()> {
    let mut bundle = build(args.target, seeds.resolve(None), args.trials)?;
    write(&mut bundle, &args.out_dir)
}
