//! Command-line front end: `painleve test|regularize|hamiltonian FILE`.
//!
//! Exit codes: 0 when a principal balance is found (and, for the other two
//! commands, regularized), 1 when none is, 2 for usage and input errors.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use crate::algebra::rational::format_rational;
use crate::algebra::{MultiPoly, RatMatrix};
use crate::hamiltonian::{analyse_hamiltonian, HamiltonianAnalysis};
use crate::model::{parse_expr, parse_file, report, ModelFile, OdeSystem};
use crate::painleve::{run_test, Balance, Candidate, TestOptions, TestReport};
use crate::regularizer::{
    regularize, round_trip, transform_balance, transform_system, transformed_residual,
    verify_regularity, ChangeOfVariable, ChangePlan, TransformedBalance, TransformedSystem,
};
use crate::series::TruncatedSeries;

#[derive(Parser, Debug)]
#[command(name = "painleve", version, about = "Painleve test and regularizing changes of variable")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the Painleve test on every candidate balance.
    Test(TestArgs),
    /// Build the triangular change of variable for a principal balance.
    Regularize(RunArgs),
    /// Build the canonical change of variable for a Hamiltonian system.
    Hamiltonian(RunArgs),
}

#[derive(Args, Debug, Clone)]
pub struct BalanceArgs {
    /// Largest exponent tried in the Fuchsian search.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(i64).range(1..))]
    pub bound: i64,
    /// Truncation order of the balance (default: largest resonance + 5).
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub order: Option<u64>,
    /// Leading exponents, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub exponents: Option<Vec<i64>>,
    /// Leading coefficients, comma separated expressions (needs --exponents).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "exponents")]
    pub leading: Option<Vec<String>>,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug, Clone)]
pub struct TestArgs {
    pub file: PathBuf,
    #[command(flatten)]
    pub balance: BalanceArgs,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    pub file: PathBuf,
    /// Which principal balance to use, in enumeration order.
    #[arg(long, default_value_t = 0)]
    pub balance_index: usize,
    #[command(flatten)]
    pub balance: BalanceArgs,
}

/// What a run prints and how it exits.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn usage(msg: impl Into<String>) -> Self {
        Outcome {
            code: 2,
            stdout: String::new(),
            stderr: msg.into(),
        }
    }
}

/// Parses the arguments and runs the command.
pub fn run_args<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                Outcome {
                    code,
                    stdout: text,
                    stderr: String::new(),
                }
            } else {
                Outcome::usage(text)
            }
        }
    }
}

pub fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Test(a) => cmd_test(&a.file, &a.balance),
        Command::Regularize(a) => cmd_regularize(a),
        Command::Hamiltonian(a) => cmd_hamiltonian(a),
    }
}

fn load(path: &PathBuf) -> Result<ModelFile, Outcome> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Outcome::usage(format!("{}: {e}\n", path.display())))?;
    parse_file(&text).map_err(|e| Outcome::usage(format!("{}:{e}\n", path.display())))
}

fn options(sys: &OdeSystem, a: &BalanceArgs) -> Result<TestOptions, Outcome> {
    let mut opts = TestOptions {
        bound: a.bound,
        order: a.order.map(|o| o as usize),
        exponents: a.exponents.clone(),
        leading: None,
        parameter_names: sys.params.clone(),
    };
    if let Some(k) = &a.exponents {
        if k.len() != sys.dim() {
            return Err(Outcome::usage(format!(
                "--exponents has {} entries for {} variables\n",
                k.len(),
                sys.dim()
            )));
        }
    }
    if let Some(c) = &a.leading {
        if c.len() != sys.dim() {
            return Err(Outcome::usage(format!(
                "--leading has {} entries for {} variables\n",
                c.len(),
                sys.dim()
            )));
        }
        let mut polys = Vec::new();
        for s in c {
            polys.push(
                parse_expr(s).map_err(|e| Outcome::usage(format!("--leading `{s}`: {e}\n")))?,
            );
        }
        opts.leading = Some(polys);
    }
    Ok(opts)
}

fn rows_text(m: &RatMatrix) -> String {
    let rows: Vec<String> = m
        .to_rows()
        .iter()
        .map(|r| {
            let cells: Vec<String> = r.iter().map(format_rational).collect();
            format!("[{}]", cells.join(", "))
        })
        .collect();
    format!("[{}]", rows.join(", "))
}

fn poly_list(v: &[MultiPoly]) -> String {
    let cells: Vec<String> = v.iter().map(|p| p.to_string()).collect();
    format!("[{}]", cells.join(", "))
}

fn series_terms(s: &TruncatedSeries) -> Value {
    Value::Array(s.terms().map(|(e, c)| json!([e, c.to_string()])).collect())
}

fn balance_json(b: &Balance) -> Value {
    Value::Array(
        b.vars
            .iter()
            .enumerate()
            .map(|(i, v)| json!({ "var": v.name(), "series": report::series(&b.series(i)) }))
            .collect(),
    )
}

fn candidate_fields(c: &Candidate) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("verdict".into(), json!(c.verdict()));
    m.insert("exponents".into(), json!(c.exponents));
    m.insert("leading".into(), c.leading.as_ref().map_or(Value::Null, |l| report::polys(l)));
    m.insert("kowalevskian".into(), c.kowalevskian.as_ref().map_or(Value::Null, report::matrix));
    m.insert(
        "resonances".into(),
        c.resonances.as_ref().map_or(Value::Null, |r| json!(r.resonances_with_multiplicity())),
    );
    m.insert(
        "resonance_matrix".into(),
        c.resonances.as_ref().map_or(Value::Null, |r| report::matrix(&r.matrix())),
    );
    m.insert(
        "balance_coefficients".into(),
        c.balance.as_ref().map_or(Value::Null, balance_json),
    );
    m.insert(
        "parameters".into(),
        c.balance.as_ref().map_or(Value::Null, |b| {
            Value::Array(
                b.params
                    .iter()
                    .map(|p| json!({ "name": p.name.name(), "resonance": p.lambda, "vector": report::rationals(&p.vector) }))
                    .collect(),
            )
        }),
    );
    m.insert(
        "principal".into(),
        c.principal.as_ref().map_or(Value::Null, |p| {
            json!({ "principal": p.principal, "n": p.n, "n_s": p.n_s, "det_r": report::rational(&p.det_r), "reason": p.reason })
        }),
    );
    m.insert("residual_order".into(), json!(c.residual_order));
    m.insert(
        "failure".into(),
        c.failure
            .as_ref()
            .map_or(Value::Null, |(s, d)| json!({ "stage": s, "detail": d })),
    );
    m
}

/// Index into `report.candidates` of the balance the top-level fields describe.
fn selected(report: &TestReport, principal_index: usize) -> Option<usize> {
    let principal: Vec<usize> = (0..report.candidates.len())
        .filter(|&i| report.candidates[i].is_principal())
        .collect();
    if principal.is_empty() {
        (!report.candidates.is_empty()).then_some(0)
    } else {
        principal.get(principal_index).copied()
    }
}

fn test_json(report: &TestReport, sel: Option<usize>) -> Map<String, Value> {
    let mut top = Map::new();
    top.insert("verdict".into(), json!(report.verdict()));
    if let Some(i) = sel {
        top.extend(candidate_fields(&report.candidates[i]));
        top.insert("verdict".into(), json!(report.verdict()));
    }
    top.insert("selected".into(), json!(sel));
    top.insert(
        "global_failure".into(),
        report
            .global_failure
            .as_ref()
            .map_or(Value::Null, |(s, d)| json!({ "stage": s, "detail": d })),
    );
    top.insert(
        "balances".into(),
        Value::Array(
            report
                .candidates
                .iter()
                .map(|c| Value::Object(candidate_fields(c)))
                .collect(),
        ),
    );
    top
}

fn candidate_text(out: &mut String, idx: usize, c: &Candidate) {
    let _ = writeln!(out, "balance {idx}: {}", c.verdict());
    let _ = writeln!(out, "  exponents: {:?}", c.exponents);
    if let Some(l) = &c.leading {
        let _ = writeln!(out, "  leading: {}", poly_list(l));
    }
    if let Some(k) = &c.kowalevskian {
        let _ = writeln!(out, "  kowalevskian: {}", rows_text(k));
    }
    if let Some(r) = &c.resonances {
        let _ = writeln!(out, "  resonances: {:?}", r.resonances_with_multiplicity());
        let _ = writeln!(out, "  resonance matrix: {}", rows_text(&r.matrix()));
    }
    if let Some(p) = &c.principal {
        let _ = writeln!(out, "  n = {}, n_s = {}, det R = {}", p.n, p.n_s, format_rational(&p.det_r));
        if let Some(reason) = &p.reason {
            let _ = writeln!(out, "  not principal: {reason}");
        }
    }
    if let Some(b) = &c.balance {
        for p in &b.params {
            let _ = writeln!(out, "  {} enters at resonance {}", p.name, p.lambda);
        }
        for (i, v) in b.vars.iter().enumerate() {
            let _ = writeln!(out, "  {v} = {}", b.series(i));
        }
    }
    if let Some((stage, detail)) = &c.failure {
        let _ = writeln!(out, "  failed at {stage}: {detail}");
    }
}

fn test_text(report: &TestReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "verdict: {}", report.verdict());
    if let Some((stage, detail)) = &report.global_failure {
        let _ = writeln!(out, "failed at {stage}: {detail}");
    }
    for (i, c) in report.candidates.iter().enumerate() {
        candidate_text(&mut out, i, c);
    }
    out
}

fn emit(json_mode: bool, value: Map<String, Value>, text: String, code: i32, stderr: String) -> Outcome {
    let stdout = if json_mode {
        report::to_text(&Value::Object(value))
    } else {
        text
    };
    Outcome { code, stdout, stderr }
}

pub fn cmd_test(path: &PathBuf, a: &BalanceArgs) -> Outcome {
    let model = match load(path) {
        Ok(m) => m,
        Err(o) => return o,
    };
    let sys = model.system();
    let opts = match options(&sys, a) {
        Ok(o) => o,
        Err(o) => return o,
    };
    let report = run_test(&sys, &opts);
    let mut top = test_json(&report, selected(&report, 0));
    top.insert("command".into(), json!("test"));
    let code = if report.any_principal() { 0 } else { 1 };
    emit(a.json, top, test_text(&report), code, String::new())
}

fn change_json(cov: &ChangeOfVariable) -> Value {
    let name = |i: usize| cov.original[i].name().to_string();
    json!({
        "tau": cov.tau.name(),
        "new_variables": cov.new_vars.iter().map(|s| s.name()).collect::<Vec<_>>(),
        "pivot_order": cov.pivot_order.iter().map(|&i| name(i)).collect::<Vec<_>>(),
        "k1": cov.k1,
        "root_beta": report::rational(&cov.root_beta),
        "exponents": cov.exponents,
        "scales": report::rationals(&cov.scales),
        "maps": (0..cov.dim()).map(|i| json!({ "var": name(i), "terms": series_terms(&cov.maps[i]) })).collect::<Vec<_>>(),
        "stages": cov.stages.iter().map(|s| json!({
            "resonance": s.lambda,
            "rows": s.rows.iter().map(|&i| name(i)).collect::<Vec<_>>(),
            "new_variables": s.new_vars.iter().map(|v| v.name()).collect::<Vec<_>>(),
            "parameters": s.params.iter().map(|v| v.name()).collect::<Vec<_>>(),
            "block": report::matrix(&s.block),
            "remaining": report::matrix(&s.remaining),
        })).collect::<Vec<_>>(),
    })
}

fn transformed_json(ts: &TransformedSystem) -> Value {
    let witness = verify_regularity(ts).err();
    json!({
        "vars": ts.vars.iter().map(|s| s.name()).collect::<Vec<_>>(),
        "rhs": ts.vars.iter().zip(&ts.rhs).map(|(v, g)| json!({ "var": v.name(), "terms": series_terms(g) })).collect::<Vec<_>>(),
        "singular_orders": ts.singular_orders,
        "regular": witness.is_none(),
        "witness": witness.map(|w| json!({
            "var": ts.vars[w.position].name(),
            "order": w.order,
            "coefficient": w.coefficient.to_string(),
        })),
    })
}

fn transformed_balance_json(tb: &TransformedBalance, round: bool, residual: bool) -> Value {
    json!({
        "series": tb.vars.iter().zip(&tb.series).map(|(v, s)| json!({ "var": v.name(), "series": report::series(s) })).collect::<Vec<_>>(),
        "initial_values": tb.initial_values().iter().map(|p| p.to_string()).collect::<Vec<_>>(),
        "tau_derivative": tb.tau_derivative().to_string(),
        "round_trip": round,
        "residual": residual,
    })
}

fn change_text(out: &mut String, cov: &ChangeOfVariable, ts: &TransformedSystem) {
    let _ = writeln!(
        out,
        "change of variable (pivot {}, k1 = {}, beta = {}):",
        cov.original[cov.pivot_order[0]],
        cov.k1,
        format_rational(&cov.root_beta)
    );
    for &i in &cov.pivot_order {
        let _ = writeln!(out, "  {} = {}", cov.original[i], cov.maps[i]);
    }
    let _ = writeln!(out, "transformed system:");
    for (v, g) in ts.vars.iter().zip(&ts.rhs) {
        let _ = writeln!(out, "  {v}' = {g}");
    }
    match verify_regularity(ts) {
        Ok(()) => {
            let _ = writeln!(out, "regular: yes");
        }
        Err(w) => {
            let _ = writeln!(
                out,
                "regular: no ({}' has {} at {}^{})",
                ts.vars[w.position], w.coefficient, cov.tau, w.order
            );
        }
    }
}

/// Runs the test and picks the requested principal balance.
fn principal_balance(
    a: &RunArgs,
    sys: &OdeSystem,
) -> Result<(TestReport, usize, Balance), Outcome> {
    let opts = options(sys, &a.balance)?;
    let report = run_test(sys, &opts);
    let principal = report.principal_candidates();
    if principal.is_empty() {
        let mut top = test_json(&report, selected(&report, 0));
        top.insert("command".into(), json!("test"));
        let msg = format!("no principal balance (verdict {})\n", report.verdict());
        return Err(emit(a.balance.json, top, test_text(&report), 1, msg));
    }
    let Some(idx) = selected(&report, a.balance_index) else {
        return Err(Outcome::usage(format!(
            "--balance-index {} but only {} principal balance(s)\n",
            a.balance_index,
            principal.len()
        )));
    };
    let b = report.candidates[idx].balance.clone().expect("principal candidates carry a balance");
    Ok((report, idx, b))
}

pub fn cmd_regularize(a: &RunArgs) -> Outcome {
    let model = match load(&a.file) {
        Ok(m) => m,
        Err(o) => return o,
    };
    let sys = model.system();
    let (report, idx, balance) = match principal_balance(a, &sys) {
        Ok(x) => x,
        Err(o) => return o,
    };
    let mut top = test_json(&report, Some(idx));
    top.insert("command".into(), json!("regularize"));
    let mut text = test_text(&report);
    let _ = writeln!(text, "regularizing balance {idx}");
    let cov = match regularize(&balance, &ChangePlan::default()) {
        Ok((_, cov)) => cov,
        Err(e) => {
            top.insert("regularization_error".into(), json!(e.to_string()));
            let _ = writeln!(text, "regularization failed: {e}");
            return emit(a.balance.json, top, text, 1, format!("regularization failed: {e}\n"));
        }
    };
    let ts = transform_system(&sys, &cov);
    let tb = transform_balance(&balance, &cov);
    let regular = verify_regularity(&ts).is_ok();
    top.insert("change_of_variable".into(), change_json(&cov));
    top.insert("transformed_system".into(), transformed_json(&ts));
    change_text(&mut text, &cov, &ts);
    let mut ok = regular;
    match tb {
        Ok(tb) => {
            let round = round_trip(&balance, &cov, &tb).is_ok();
            let residual = transformed_residual(&ts, &cov, &tb).is_ok();
            ok &= round && residual;
            top.insert("transformed_balance".into(), transformed_balance_json(&tb, round, residual));
            let _ = writeln!(text, "new variables along the balance:");
            for (v, s) in tb.vars.iter().zip(&tb.series) {
                let _ = writeln!(text, "  {v} = {s}");
            }
            let _ = writeln!(text, "round trip: {}, residual: {}", yes(round), yes(residual));
        }
        Err(e) => {
            ok = false;
            top.insert("transformed_balance".into(), json!({ "error": e.to_string() }));
        }
    }
    let stderr = if ok {
        String::new()
    } else {
        "internal check failed: the change of variable does not regularize the balance\n".into()
    };
    emit(a.balance.json, top, text, if ok { 0 } else { 1 }, stderr)
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn hamiltonian_json(h: &HamiltonianAnalysis) -> Value {
    let sd = &h.symplectic;
    let ex = &h.change.exchange;
    json!({
        "d": sd.d,
        "pairing": sd.pairing,
        "s": report::matrix(&sd.s),
        "column_resonances": sd.column_resonances,
        "symplectic": sd.is_symplectic(),
        "exchange_set": ex.exchange_set.iter().map(|&i| i + 1).collect::<Vec<_>>(),
        "q_order": ex.q_order.iter().map(|&i| i + 1).collect::<Vec<_>>(),
        "exchanged_hamiltonian": h.change.system.h.to_string(),
        "canonical": h.canonical.is_ok(),
        "canonical_witness": h.canonical.as_ref().err().map(|w| json!({
            "first": w.first.name(), "second": w.second.name(), "difference": w.difference.to_string()
        })),
        "new_hamiltonian": h.new_hamiltonian.hamiltonian.to_string(),
        "dropped": h.new_hamiltonian.dropped.iter().map(|(e, c)| json!([e, c.to_string()])).collect::<Vec<_>>(),
        "equations_match": h.equations_match.is_ok(),
    })
}

pub fn cmd_hamiltonian(a: &RunArgs) -> Outcome {
    let model = match load(&a.file) {
        Ok(m) => m,
        Err(o) => return o,
    };
    let ModelFile::Hamiltonian(hs) = &model else {
        return Outcome::usage(format!("{}: not a Hamiltonian file\n", a.file.display()));
    };
    let sys = hs.to_system();
    let (report, idx, balance) = match principal_balance(a, &sys) {
        Ok(x) => x,
        Err(o) => return o,
    };
    let mut top = test_json(&report, Some(idx));
    top.insert("command".into(), json!("hamiltonian"));
    let mut text = test_text(&report);
    let _ = writeln!(text, "hamiltonian analysis of balance {idx}");
    let h = match analyse_hamiltonian(hs, &balance) {
        Ok(h) => h,
        Err(e) => {
            top.insert("hamiltonian_error".into(), json!(e.to_string()));
            let _ = writeln!(text, "rejected: {e}");
            return emit(a.balance.json, top, text, 1, format!("rejected: {e}\n"));
        }
    };
    top.insert("hamiltonian".into(), hamiltonian_json(&h));
    top.insert("change_of_variable".into(), change_json(&h.change.cov));
    top.insert("transformed_system".into(), transformed_json(&h.transformed));
    let sd = &h.symplectic;
    let _ = writeln!(text, "d = {}, pairing {:?}", sd.d, sd.pairing);
    let _ = writeln!(text, "S = {}", rows_text(&sd.s));
    if !h.change.exchange.exchange_set.is_empty() {
        let set: Vec<usize> = h.change.exchange.exchange_set.iter().map(|&i| i + 1).collect();
        let _ = writeln!(text, "exchanged pairs {set:?}; H = {}", h.change.system.h);
    }
    change_text(&mut text, &h.change.cov, &h.transformed);
    let _ = writeln!(text, "canonical: {}", yes(h.canonical.is_ok()));
    let _ = writeln!(text, "new H = {}", h.new_hamiltonian.hamiltonian);
    for (e, c) in &h.new_hamiltonian.dropped {
        let _ = writeln!(text, "  dropped: ({c})*{}^{e}", h.change.cov.tau);
    }
    let _ = writeln!(text, "Hamilton's equations match: {}", yes(h.equations_match.is_ok()));
    let ok = h.canonical.is_ok() && h.regularity.is_ok() && h.equations_match.is_ok();
    let stderr = if ok {
        String::new()
    } else {
        "internal check failed: the canonical change is not verified\n".into()
    };
    emit(a.balance.json, top, text, if ok { 0 } else { 1 }, stderr)
}
