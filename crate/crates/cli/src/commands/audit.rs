use hdp_mean::audit::{audit_mechanism, AuditConfig, AuditReport};
use hdp_mean::{BoundedDataset, Mechanism, MechanismKind, MechanismSpec, PrivacyInput};
use rayon::prelude::*;

use crate::args::AuditArgs;
use crate::error::{CliError, CliResult, ErrorKind};
use crate::output::{emit, Cell, OutputFormat, Table};
use crate::SeedSources;

pub struct AuditRow {
    pub kind: MechanismKind,
    pub user: usize,
    pub declared: f64,
    /// The reason when the mechanism cannot run at these levels.
    pub outcome: Result<(f64, bool, AuditReport), String>,
}

impl AuditRow {
    pub fn passed(&self) -> bool {
        match &self.outcome {
            Ok((_, cert_ok, report)) => *cert_ok && report.passed(),
            Err(_) => true,
        }
    }
}

pub fn audit_all(
    input: &PrivacyInput,
    kinds: &[MechanismKind],
    users: &[usize],
    base: &BoundedDataset,
    cfg: &AuditConfig,
) -> CliResult<Vec<AuditRow>> {
    let declared = input.to_vector();
    let mechanisms: Vec<(MechanismKind, Result<Mechanism, String>)> = kinds
        .iter()
        .map(|k| {
            let spec = MechanismSpec {
                kind: *k,
                privacy: input.clone(),
                clamp: false,
            };
            (*k, Mechanism::prepare(&spec).map_err(|e| e.to_string()))
        })
        .collect();
    let jobs: Vec<(usize, usize)> = (0..mechanisms.len())
        .flat_map(|m| users.iter().map(move |u| (m, *u)))
        .collect();
    jobs.par_iter()
        .map(|&(m, user)| {
            let (kind, mechanism) = &mechanisms[m];
            let outcome = match mechanism {
                Ok(mech) => {
                    let cert = mech.certificate();
                    let report = audit_mechanism(mech, base, user, cfg)?;
                    Ok((cert.effective_levels[user], cert.satisfied[user], report))
                }
                Err(reason) => Err(reason.clone()),
            };
            Ok(AuditRow {
                kind: *kind,
                user,
                declared: declared.levels()[user],
                outcome,
            })
        })
        .collect()
}

pub fn table(rows: &[AuditRow]) -> Table {
    let mut t = Table::new(&[
        "mechanism",
        "user",
        "declared_eps",
        "effective_eps",
        "certificate_ok",
        "draws",
        "bins",
        "violations",
        "worst_excess_sigmas",
        "max_log_ratio",
        "passed",
        "reason",
    ]);
    for r in rows {
        let mut row: Vec<Cell> = vec![r.kind.id().into(), r.user.into(), r.declared.into()];
        match &r.outcome {
            Ok((effective, cert_ok, a)) => row.extend([
                (*effective).into(),
                (*cert_ok).into(),
                a.draws.into(),
                a.bins.into(),
                a.violations.into(),
                a.worst_excess_sigmas.into(),
                a.max_log_ratio.into(),
                r.passed().into(),
                Cell::Empty,
            ]),
            Err(reason) => {
                row.extend(std::iter::repeat_n(Cell::Empty, 8));
                row.push(reason.clone().into());
            }
        }
        t.push(row);
    }
    t
}

pub fn run(args: &AuditArgs, seeds: &SeedSources) -> CliResult<()> {
    let input = crate::privacy_input(&args.privacy)?;
    let n = input.to_vector().len();
    let kinds = crate::parse_mechanisms(&args.mechanisms)?;
    let users = if args.users.is_empty() {
        let mut u = vec![0, n - 1];
        u.dedup();
        u
    } else {
        args.users.clone()
    };
    if let Some(bad) = users.iter().find(|u| **u >= n) {
        return Err(CliError::usage(format!("user {bad} out of range for {n} users")));
    }
    if args.draws == 0 || args.bin_width.is_nan() || args.bin_width <= 0.0 || args.sigmas.is_nan() || args.sigmas <= 0.0
    {
        return Err(CliError::usage("--draws, --bin-width and --sigmas must be positive"));
    }
    let base = BoundedDataset::new(vec![args.base; n])?;
    let cfg = AuditConfig {
        draws: args.draws,
        bin_width: args.bin_width,
        sigmas: args.sigmas,
        seed: seeds.resolve(None),
    };
    let rows = audit_all(&input, &kinds, &users, &base, &cfg)?;
    let t = table(&rows);
    emit(
        &t.render(args.out.format.unwrap_or(OutputFormat::Csv))?,
        args.out.output.as_deref(),
    )?;
    let failed = rows.iter().filter(|r| !r.passed()).count();
    if failed > 0 {
        return Err(CliError {
            kind: ErrorKind::Audit,
            message: format!("{failed} of {} audits failed", rows.len()),
        });
    }
    Ok(())
}
