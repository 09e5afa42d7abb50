use hdp_mean::bounds::{bound_report, lower_bound_from_first_principles};
use hdp_mean::TwoGroupProfile;

use crate::args::BoundsArgs;
use crate::error::{CliError, CliResult};
use crate::output::{emit, OutputFormat, Table};

/// Parses `eps2:LO:HI:STEPS` into evenly spaced values, both ends included.
pub fn parse_sweep(spec: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    let [param, lo, hi, steps] = parts[..] else {
        return Err(CliError::usage(format!(
            "sweep {spec:?} is not of the form eps2:LO:HI:STEPS"
        )));
    };
    if param != "eps2" {
        return Err(CliError::usage(format!("only eps2 can be swept, got {param:?}")));
    }
    let num = |s: &str| {
        s.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| CliError::usage(format!("bad sweep bound {s:?}")))
    };
    let (lo, hi) = (num(lo)?, num(hi)?);
    let steps: usize = steps
        .parse()
        .map_err(|_| CliError::usage(format!("bad sweep step count {steps:?}")))?;
    if steps == 0 || hi < lo || (steps == 1 && hi != lo) {
        return Err(CliError::usage(format!("empty or inconsistent sweep {spec:?}")));
    }
    if steps == 1 {
        return Ok(vec![lo]);
    }
    let last = (steps - 1) as f64;
    Ok((0..steps)
        .map(|i| {
            if i + 1 == steps {
                hi
            } else {
                lo + (hi - lo) * i as f64 / last
            }
        })
        .collect())
}

pub fn table(template: &TwoGroupProfile, eps2_values: &[f64]) -> CliResult<Table> {
    let mut t = Table::new(&[
        "eps1",
        "n",
        "f",
        "eps2",
        "upper",
        "lower",
        "regime",
        "saturation_eps2",
        "lower_first_principles",
    ]);
    for &eps2 in eps2_values {
        let p = template.with_eps2(eps2)?;
        let r = bound_report(&p);
        t.push(vec![
            p.eps1.into(),
            p.n.into(),
            p.f.into(),
            p.eps2.into(),
            r.upper.into(),
            r.lower.into(),
            r.regime.to_string().into(),
            r.saturation_eps2.into(),
            lower_bound_from_first_principles(&p).into(),
        ]);
    }
    Ok(t)
}

pub fn run(args: &BoundsArgs) -> CliResult<()> {
    let template = TwoGroupProfile::new(args.eps1, args.eps2, args.n, args.f)?;
    let values = match &args.sweep {
        Some(spec) => {
            let values = parse_sweep(spec)?;
            if let Some(bad) = values.iter().find(|e| **e < template.eps1) {
                return Err(CliError::usage(format!(
                    "sweep value eps2 = {bad} is below eps1 = {}",
                    template.eps1
                )));
            }
            values
        }
        None => vec![template.eps2],
    };
    let t = table(&template, &values)?;
    emit(
        &t.render(args.out.format.unwrap_or(OutputFormat::Csv))?,
        args.out.output.as_deref(),
    )
}
