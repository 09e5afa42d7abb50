use hdp_mean::solver::{solve_general, solve_two_group};
use hdp_mean::{Mechanism, MechanismKind, MechanismSpec, PrivacyInput, WeightSolution};
use serde_json::{json, Value};

use crate::args::WeightsArgs;
use crate::error::CliResult;
use crate::output::{emit, json_bytes, json_float, Cell, OutputFormat, Table, SCHEMA_VERSION};

pub struct WeightsReport {
    pub input: PrivacyInput,
    pub solution: WeightSolution,
    pub effective_levels: Vec<f64>,
    pub satisfied: Vec<bool>,
}

pub fn compute(input: PrivacyInput) -> CliResult<WeightsReport> {
    let solution = match &input {
        PrivacyInput::TwoGroup(p) => solve_two_group(&p.realized()).expand(p),
        PrivacyInput::Vector(v) => solve_general(v),
    };
    let mechanism = Mechanism::prepare(&MechanismSpec {
        kind: MechanismKind::Adpm,
        privacy: input.clone(),
        clamp: false,
    })?;
    let cert = mechanism.certificate();
    Ok(WeightsReport {
        input,
        solution,
        effective_levels: cert.effective_levels,
        satisfied: cert.satisfied,
    })
}

fn floats(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|x| json_float(*x)).collect())
}

impl WeightsReport {
    pub fn to_json(&self) -> Value {
        let s = &self.solution;
        let declared = self.input.to_vector();
        let mut doc = json!({
            "schema_version": SCHEMA_VERSION,
            "n": declared.len(),
            "eps": floats(declared.levels()),
            "weights": floats(&s.weights),
            "eta": json_float(s.eta),
            "objective": json_float(s.objective),
            "degenerate": s.degenerate,
            "effective_levels": floats(&self.effective_levels),
            "certificate_satisfied": self.satisfied.iter().all(|b| *b),
        });
        if let PrivacyInput::TwoGroup(p) = &self.input {
            let two = solve_two_group(&p.realized());
            let extra = json!({
                "eps1": json_float(p.eps1),
                "eps2": json_float(p.eps2),
                "f": p.f,
                "realized_f": p.realized_f(),
                "saturation_ratio": json_float(p.saturation_ratio()),
                "saturation_eps2": json_float(p.saturation_eps2()),
                "regime": p.regime().to_string(),
                "w1": json_float(two.w1),
                "w2": json_float(two.w2),
            });
            if let (Value::Object(d), Value::Object(e)) = (&mut doc, extra) {
                d.extend(e);
            }
        }
        doc
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&[
            "user",
            "eps",
            "weight",
            "effective_eps",
            "satisfied",
            "eta",
            "objective",
            "degenerate",
        ]);
        let declared = self.input.to_vector();
        for (i, eps) in declared.levels().iter().enumerate() {
            t.push(vec![
                i.into(),
                (*eps).into(),
                self.solution.weights[i].into(),
                self.effective_levels[i].into(),
                self.satisfied[i].into(),
                self.solution.eta.into(),
                self.solution.objective.into(),
                Cell::Bool(self.solution.degenerate),
            ]);
        }
        t
    }
}

pub fn run(args: &WeightsArgs) -> CliResult<()> {
    let report = compute(crate::privacy_input(&args.privacy)?)?;
    let bytes = match args.out.format.unwrap_or(OutputFormat::Json) {
        OutputFormat::Json => json_bytes(&report.to_json()),
        OutputFormat::Csv => report.to_table().to_csv()?,
    };
    emit(&bytes, args.out.output.as_deref())
}
