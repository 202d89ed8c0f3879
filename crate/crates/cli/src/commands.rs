use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use bellspace_core::feasibility::{fine_feasible_any, min_negativity_any, FeasibilityCertificate, SignedJoint};
use bellspace_core::inequality::{
    self, evaluate_table, frequency_inequality, inequality1, inequality2, inequality3, read_counterfactual_csv,
    Hypothesis, InequalityId, InequalityReport,
};
use bellspace_core::models::{scan_quantum_angles, Model, ModelSpec, SettingDistribution};
use bellspace_core::rational;
use bellspace_core::sim::{self, DetectionMode, RunConfig};
use bellspace_core::spaces::{table1_demo, Angle, BellMeasure, SpaceId};
use bellspace_core::table::{read_table_csv, write_table_csv, AnyTable, CorrelationTable, Scalar};
use bellspace_core::{Error, HypothesisFlags, Result};

use crate::{Detection, Format, LogFormat};

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct EvalInput {
    /// Correlation table CSV.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Model JSON.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Bell measure JSON on space 1, 2 or 3.
    #[arg(long)]
    pub measure: Option<PathBuf>,
    /// Per-run values CSV `A_alpha,A_alpha',B_beta,B_beta'`.
    #[arg(long)]
    pub rows: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn load_model(path: &Path) -> Result<Model> {
    ModelSpec::from_json(&read(path)?)?.build()
}

fn print_report(r: &InequalityReport) {
    let exact = r.exact.as_ref().map(|e| format!("{e} ")).unwrap_or_default();
    let se = r.stderr.map(|s| format!(" ± {s:.6}")).unwrap_or_default();
    println!(
        "inequality {}: value {exact}({:.12}{se}) bounds [{}, {}]: {}",
        r.id,
        r.value,
        r.lo,
        r.hi,
        if r.violated { "VIOLATED" } else { "satisfied" }
    );
    if !r.hypotheses.is_empty() {
        let h: Vec<String> = r.hypotheses.iter().map(Hypothesis::to_string).collect();
        println!("  hypotheses: {}", h.join("; "));
    }
    for t in &r.terms {
        match &t.exact {
            Some(e) => println!("  {:<28} {e}", t.name),
            None => println!("  {:<28} {:.12}", t.name, t.value),
        }
    }
}

fn print_table<T: Scalar>(t: &CorrelationTable<T>) -> Result<()> {
    let mut out = io::stdout().lock();
    write_table_csv(&mut out, t)
}

pub struct SimulateArgs {
    pub model: PathBuf,
    pub runs: u64,
    pub seed: u64,
    pub eta: f64,
    pub policy: Vec<f64>,
    pub detection: Detection,
    pub out: Option<PathBuf>,
    pub format: LogFormat,
    pub summary: Format,
}

#[derive(Serialize)]
struct SimulationSummary {
    runs: u64,
    coincidences: usize,
    counts: [[usize; 2]; 2],
    table: CorrelationTable<f64>,
    reports: Vec<InequalityReport>,
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let policy: [f64; 4] =
        args.policy.try_into().map_err(|_| Error::InvalidInput("policy needs four weights".into()))?;
    let cfg = RunConfig {
        runs: args.runs,
        seed: args.seed,
        policy,
        eta: args.eta,
        mode: match args.detection {
            Detection::Independent => DetectionMode::Independent,
            Detection::Conspiratorial => DetectionMode::Conspiratorial,
        },
    };
    let log = sim::run_experiment(&model, &cfg)?;
    if let Some(path) = &args.out {
        let file = File::create(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        match args.format {
            LogFormat::Csv => log.write_csv(&mut w)?,
            LogFormat::Json => serde_json::to_writer(&mut w, &log)?,
        }
        w.flush().map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    let kept = sim::coincidence_filter(&log)?;
    let table = sim::estimate_table(&kept)?;
    let reports = vec![
        evaluate_table(&table, InequalityId::Chsh01)?,
        inequality::chsh_pm1_table(&table)?,
        evaluate_table(&table, InequalityId::Two)?,
    ];
    let summary =
        SimulationSummary { runs: args.runs, coincidences: kept.rows.len(), counts: kept.counts(), table, reports };
    match args.summary {
        Format::Json => print_json(&summary),
        Format::Text => {
            println!("model {} seed {} runs {} coincidences {}", log.model, log.seed, summary.runs, summary.coincidences);
            print_table(&summary.table)?;
            summary.reports.iter().for_each(print_report);
            Ok(())
        }
    }
}

fn parse_selection(s: &str) -> Result<Vec<InequalityId>> {
    if s == "all" {
        return Ok(vec![InequalityId::One, InequalityId::Two, InequalityId::Three, InequalityId::Freq]);
    }
    let id: InequalityId = s.parse()?;
    match id {
        InequalityId::One | InequalityId::Two | InequalityId::Three | InequalityId::Freq => Ok(vec![id]),
        other => Err(Error::UnknownInequality(format!("{other} (choose 1, 2, 3, freq or all)"))),
    }
}

fn mismatch(id: InequalityId, why: &str) -> Error {
    Error::HypothesisViolation(format!("inequality {id} {why}"))
}

fn eval_any_table(t: &AnyTable, id: InequalityId) -> Result<InequalityReport> {
    match t {
        AnyTable::Exact(t) => evaluate_table(t, id),
        AnyTable::Float(t) => evaluate_table(t, id),
    }
}

fn evaluate_one(input: &EvalInput, id: InequalityId, flags: HypothesisFlags) -> Result<InequalityReport> {
    if let Some(path) = &input.table {
        let t = read_table_csv(open(path)?)?;
        return match id {
            InequalityId::Two => eval_any_table(&t, id),
            InequalityId::Freq => Err(mismatch(id, "needs per-run values for all four outputs (--rows)")),
            _ => Err(mismatch(id, "needs an LHV model with locality and λ-independence; a table records neither")),
        };
    }
    if let Some(path) = &input.model {
        let model = load_model(path)?;
        return match (&model, id) {
            (Model::Lhv(m), InequalityId::One) => inequality1(m),
            (Model::Lhv(m), InequalityId::Two) => inequality2(&m.to_space2()?),
            (Model::Lhv(m), InequalityId::Three) => {
                require_flags(m.flags, id)?;
                let s = m.settings;
                inequality3(&m.to_space3(&SettingDistribution::uniform())?, m.flags, s.alice[0], s.alice[1], s.bob[0], s.bob[1])
            }
            (Model::Mixture(m), InequalityId::Two) => inequality2(&m.to_space2()?),
            (_, InequalityId::Two) => {
                let t = model.exact_table().map(AnyTable::Exact).unwrap_or_else(|| AnyTable::Float(model.table_f64()));
                eval_any_table(&t, id)
            }
            (_, InequalityId::Freq) => Err(mismatch(id, "needs per-run values for all four outputs (--rows)")),
            (other, _) => Err(mismatch(id, &format!("needs an LHV model; got a {} model", other.kind()))),
        };
    }
    if let Some(path) = &input.measure {
        let m = BellMeasure::from_json(&read(path)?)?;
        let space = m.space().id();
        return match (space, id) {
            (SpaceId::Two, InequalityId::Two) => inequality2(&m),
            (SpaceId::Three, InequalityId::Two) => inequality2(&m.project(SpaceId::Two)?),
            (SpaceId::Three, InequalityId::Three) => {
                require_flags(flags, id)?;
                let s = *m.space().settings();
                inequality3(&m, flags, s.alice[0], s.alice[1], s.bob[0], s.bob[1])
            }
            (_, InequalityId::Freq) => Err(mismatch(id, "needs per-run values for all four outputs (--rows)")),
            (space, _) => Err(mismatch(id, &format!("is not defined on a measure over sample space {space}"))),
        };
    }
    if let Some(path) = &input.rows {
        let rows = read_counterfactual_csv(open(path)?)?;
        return match id {
            InequalityId::Freq => frequency_inequality(&rows),
            _ => Err(mismatch(id, "needs a table, model or measure; per-run values support only the frequency form")),
        };
    }
    Err(Error::InvalidInput("no input given".into()))
}

fn require_flags(flags: HypothesisFlags, id: InequalityId) -> Result<()> {
    if flags.locality && flags.lambda_independence {
        Ok(())
    } else {
        Err(mismatch(id, "requires both locality and λ-independence to be declared"))
    }
}

pub fn evaluate(input: &EvalInput, which: &str, locality: bool, lambda_independence: bool, format: Format) -> Result<()> {
    let ids = parse_selection(which)?;
    let flags = HypothesisFlags { locality, lambda_independence };
    let mut reports = Vec::new();
    for id in &ids {
        match evaluate_one(input, *id, flags) {
            Ok(r) => reports.push(r),
            // With `all`, inequalities whose hypotheses the input cannot
            // support are skipped rather than fatal.
            Err(Error::HypothesisViolation(why)) if ids.len() > 1 => eprintln!("skipped: {why}"),
            Err(e) => return Err(e),
        }
    }
    if reports.is_empty() {
        return Err(Error::HypothesisViolation("no inequality applies to this input".into()));
    }
    match format {
        Format::Json => print_json(&reports),
        Format::Text => {
            reports.iter().for_each(print_report);
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct FeasibilityOutput {
    certificate: FeasibilityCertificate,
    #[serde(skip_serializing_if = "Option::is_none")]
    negativity: Option<SignedJoint>,
}

pub fn feasibility(path: &Path, negativity: bool, format: Format) -> Result<()> {
    let table = read_table_csv(open(path)?)?;
    let certificate = fine_feasible_any(&table)?;
    let negativity = if negativity { Some(min_negativity_any(&table)?) } else { None };
    let out = FeasibilityOutput { certificate, negativity };
    match format {
        Format::Json => print_json(&out),
        Format::Text => {
            let c = &out.certificate;
            if let Some(p) = c.precision {
                println!("float table rounded at precision {p:e}");
            }
            println!("feasible: {}", c.feasible);
            for o in &c.orientations {
                println!(
                    "  minus on ({},{}): {} lower {} upper {}",
                    o.minus.0,
                    o.minus.1,
                    o.exact.clone().unwrap_or_else(|| o.value.to_string()),
                    if o.lower_ok { "ok" } else { "VIOLATED" },
                    if o.upper_ok { "ok" } else { "VIOLATED" }
                );
            }
            if let Some(w) = &c.witness {
                let w: Vec<String> = w.iter().map(rational::format).collect();
                println!("witness: {}", w.join(" "));
            }
            if let Some(v) = &c.violated {
                println!("violated orientation ({},{}): {}", v.minus.0, v.minus.1, v.exact.clone().unwrap_or_default());
            }
            if let Some(j) = &out.negativity {
                let w: Vec<String> = j.weights.iter().map(rational::format).collect();
                println!("negativity: {} ({:.12})", rational::format(&j.negativity), rational::to_f64(&j.negativity));
                println!("signed weights: {}", w.join(" "));
            }
            Ok(())
        }
    }
}

pub fn table1(format: Format) -> Result<()> {
    let demo = table1_demo()?;
    if !demo.bridge_holds {
        return Err(Error::Solver("P(A_0=1) differs from P(A=1|α=0°)".into()));
    }
    match format {
        Format::Json => print_json(&demo),
        Format::Text => {
            println!("run  A  alpha  A_0  A_45");
            for r in &demo.runs {
                println!("{:<4} {}  {:<5}  {}    {}", r.run, r.a, r.alpha, r.a_0, r.a_45);
            }
            println!("P(A=1, alpha=0) = {}", rational::format(&demo.joint));
            println!("P(A=1 | alpha=0) = {}", rational::format(&demo.conditional));
            println!("P(A_0=1) = {}", rational::format(&demo.counterfactual));
            println!("P(A_0=1) = P(A=1 | alpha=0): {}", demo.bridge_holds);
            Ok(())
        }
    }
}

pub fn scan_angles(step: &str, format: Format) -> Result<()> {
    let step: Angle = step.parse()?;
    let scan = scan_quantum_angles(step)?;
    match format {
        Format::Json => print_json(&scan),
        Format::Text => {
            let s = scan.argmax;
            println!("step {}° over {} grid points", scan.step, scan.points);
            println!("max chsh_01 = {:.12}", scan.max);
            println!("at alpha={} alpha'={} beta={} beta'={}", s.alice[0], s.alice[1], s.bob[0], s.bob[1]);
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct LedgerEntry {
    inequality: InequalityId,
    hypotheses: Vec<Hypothesis>,
}

pub fn ledger(which: &str, format: Format) -> Result<()> {
    let entries: Vec<LedgerEntry> = parse_selection(which)?
        .into_iter()
        .map(|id| Ok(LedgerEntry { inequality: id, hypotheses: inequality::ledger(id)? }))
        .collect::<Result<_>>()?;
    match format {
        Format::Json => print_json(&entries),
        Format::Text => {
            for e in &entries {
                let h: Vec<String> = e.hypotheses.iter().map(Hypothesis::to_string).collect();
                println!("{}: {}", e.inequality, h.join("; "));
            }
            Ok(())
        }
    }
}
