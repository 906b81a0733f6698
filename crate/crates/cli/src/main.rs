//! Command-line front end: runs the verification suites over (N, m, d)
//! grids, emits machine-readable reports (JSON or CSV), and evaluates the
//! Bell functional on externally supplied probability tables.
//!
//! Exit codes: 0 success / all checks pass, 1 verification failure,
//! 2 input error, 3 resource cap exceeded.

use std::collections::BTreeMap;
use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ghz_selftest_core::bell::{
    bell_operator, bell_value_from_correlators, correlators_from_probabilities, ghz_state,
    ideal_realization, quantum_value, ProbabilityTable, Realization,
};
use ghz_selftest_core::bounds::{local_bound, spectral_bound, visibility_sweep};
use ghz_selftest_core::error::Error as CoreError;
use ghz_selftest_core::linalg::CMatrix;
use ghz_selftest_core::observables::{
    bell_coefficients, canonical_pair, extraction_unitary, ideal_observable_resolved, omega_int,
    t_eigenvector, BellCoefficients, PartyClass, QuditObservable,
};
use ghz_selftest_core::sampling::random_realization;
use ghz_selftest_core::scenario::BellScenario;
use ghz_selftest_core::sos::{selftest_relation_suite, verify_ghz_structure, verify_sos_identity};

const SCHEMA: &str = "ghz-selftest/1";
/// Seeded random SOS draws run by `verify` per scenario.
const VERIFY_RANDOM_DRAWS: u64 = 5;

#[derive(Parser)]
#[command(name = "ghz-selftest", version)]
#[command(about = "Numerical verification of the GHZ self-testing Bell functional")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Number of parties
    #[arg(long = "N")]
    parties: Option<usize>,

    /// Inputs per party
    #[arg(long = "m")]
    inputs: Option<usize>,

    /// Outcomes per input
    #[arg(long = "d")]
    outcomes: Option<usize>,

    /// Residual tolerance for pass/fail decisions
    #[arg(long = "tol", default_value_t = 1e-9)]
    tol: f64,

    /// Scenario grid as "N,m,d;N,m,d;..." (overrides --N/--m/--d)
    #[arg(long = "grid")]
    grid: Option<String>,

    /// Report format
    #[arg(long = "format", value_enum, default_value = "json")]
    format: Format,

    /// Also write the report to this path
    #[arg(long = "out")]
    out: Option<std::path::PathBuf>,

    /// Seed for random-observable sampling
    #[arg(long = "seed", default_value_t = 0)]
    seed: u64,

    /// Worker threads (0 = all cores)
    #[arg(long = "shards", default_value_t = 0)]
    shards: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Quantum value of the ideal realization against the closed form
    QuantumValue {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Exhaustive classical bound over all deterministic strategies
    LocalBound {
        #[command(flatten)]
        common: CommonArgs,

        /// Replace the functional coefficients with zeros (test hook)
        #[arg(long, hide = true)]
        zero_coeffs: bool,
    },
    /// Full verification: SOS identities, relation suite, extraction
    /// unitaries, eigenvectors, and GHZ structure
    Verify {
        #[command(flatten)]
        common: CommonArgs,

        /// Corrupt one observable before verifying (test hook)
        #[arg(long, hide = true)]
        corrupt: bool,
    },
    /// Evaluate the Bell functional on an external probability table
    EvalTable {
        #[command(flatten)]
        common: CommonArgs,

        /// JSON file with {"N", "m", "d", "p": {"x1,..": {"a1,..": prob}}}
        path: std::path::PathBuf,
    },
    /// White-noise robustness sweep over the visibility range
    Robustness {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn exit_code_for(err: &CoreError) -> u8 {
    match err {
        CoreError::ResourceLimit { .. } => 3,
        CoreError::InvalidArgument(_)
        | CoreError::Validation(_)
        | CoreError::DimensionMismatch(_)
        | CoreError::EmptyRange(_) => 2,
        _ => 1,
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<CoreError> for Failure {
    fn from(err: CoreError) -> Self {
        Failure::new(exit_code_for(&err), err.to_string())
    }
}

fn parse_grid(common: &CommonArgs) -> Result<Vec<BellScenario>, Failure> {
    if let Some(spec) = &common.grid {
        let mut points = Vec::new();
        for (i, triple) in spec.split(';').enumerate() {
            let parts: Vec<&str> = triple.split(',').collect();
            if parts.len() != 3 {
                return Err(Failure::new(
                    2,
                    format!("grid entry {i} ({triple:?}) is not of the form N,m,d"),
                ));
            }
            let nums: Result<Vec<usize>, _> =
                parts.iter().map(|p| p.trim().parse::<usize>()).collect();
            let nums =
                nums.map_err(|e| Failure::new(2, format!("grid entry {i} ({triple:?}): {e}")))?;
            points.push(BellScenario::new(nums[0], nums[1], nums[2]).map_err(Failure::from)?);
        }
        if points.is_empty() {
            return Err(Failure::new(2, "empty grid"));
        }
        Ok(points)
    } else {
        match (common.parties, common.inputs, common.outcomes) {
            (Some(n), Some(m), Some(d)) => {
                Ok(vec![BellScenario::new(n, m, d).map_err(Failure::from)?])
            }
            _ => Err(Failure::new(2, "provide --N, --m and --d, or --grid")),
        }
    }
}

fn emit(common: &CommonArgs, json: &serde_json::Value, csv: String) -> Result<(), Failure> {
    let payload = match common.format {
        Format::Json => serde_json::to_string_pretty(json).expect("serializable report") + "\n",
        Format::Csv => csv,
    };
    print!("{payload}");
    if let Some(path) = &common.out {
        let mut file = std::fs::File::create(path)
            .map_err(|e| Failure::new(2, format!("cannot write {}: {e}", path.display())))?;
        file.write_all(payload.as_bytes())
            .map_err(|e| Failure::new(2, format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct QuantumValueReport {
    #[serde(rename = "N")]
    parties: usize,
    m: usize,
    d: usize,
    quantum_value: f64,
    beta_q_formula: f64,
    formula_matches: bool,
    max_eigenvalue: f64,
}

fn cmd_quantum_value(common: &CommonArgs) -> Result<u8, Failure> {
    let points = parse_grid(common)?;
    let mut reports = Vec::new();
    for s in &points {
        eprintln!(
            "quantum-value ({}, {}, {})",
            s.parties(),
            s.inputs(),
            s.outcomes()
        );
        let r = ideal_realization(s)?;
        let op = bell_operator(&r)?;
        let qv = quantum_value(r.state(), &op)?;
        let max_eig = spectral_bound(&op)?;
        reports.push(QuantumValueReport {
            parties: s.parties(),
            m: s.inputs(),
            d: s.outcomes(),
            quantum_value: qv,
            beta_q_formula: op.beta_q_formula(),
            formula_matches: (qv - op.beta_q_formula()).abs() <= common.tol.max(1e-9),
            max_eigenvalue: max_eig,
        });
    }
    let all_match = reports.iter().all(|r| r.formula_matches);
    let mut csv =
        String::from("N,m,d,quantum_value,beta_q_formula,formula_matches,max_eigenvalue\n");
    for r in &reports {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.parties,
            r.m,
            r.d,
            r.quantum_value,
            r.beta_q_formula,
            r.formula_matches,
            r.max_eigenvalue
        ));
    }
    emit(common, &wrap_report("quantum-value", reports), csv)?;
    Ok(if all_match { 0 } else { 1 })
}

#[derive(Serialize)]
struct LocalBoundReport {
    #[serde(rename = "N")]
    parties: usize,
    m: usize,
    d: usize,
    beta_local: f64,
    argmax_strategy: Vec<u8>,
    beta_q: f64,
    ratio: f64,
    strategies_evaluated: u128,
    wall_time_ms: u128,
}

fn cmd_local_bound(common: &CommonArgs, zero_coeffs: bool) -> Result<u8, Failure> {
    let points = parse_grid(common)?;
    let mut reports = Vec::new();
    for s in &points {
        eprintln!(
            "local-bound ({}, {}, {})",
            s.parties(),
            s.inputs(),
            s.outcomes()
        );
        let coeffs = if zero_coeffs {
            BellCoefficients::zero(s.inputs(), s.outcomes())
        } else {
            bell_coefficients(s.inputs(), s.outcomes())?
        };
        let start = Instant::now();
        let bounds = local_bound(s, &coeffs)?;
        reports.push(LocalBoundReport {
            parties: s.parties(),
            m: s.inputs(),
            d: s.outcomes(),
            beta_local: bounds.beta_local,
            argmax_strategy: bounds.argmax_strategy.outputs().to_vec(),
            beta_q: bounds.beta_q_formula,
            ratio: bounds.beta_local / bounds.beta_q_formula,
            strategies_evaluated: bounds.strategy_count_evaluated,
            wall_time_ms: start.elapsed().as_millis(),
        });
    }
    let mut csv =
        String::from("N,m,d,beta_local,beta_q,ratio,strategies_evaluated,wall_time_ms,argmax\n");
    for r in &reports {
        let argmax: Vec<String> = r.argmax_strategy.iter().map(|a| a.to_string()).collect();
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.parties,
            r.m,
            r.d,
            r.beta_local,
            r.beta_q,
            r.ratio,
            r.strategies_evaluated,
            r.wall_time_ms,
            argmax.join("|")
        ));
    }
    emit(common, &wrap_report("local-bound", reports), csv)?;
    Ok(0)
}

#[derive(Serialize)]
struct CheckResult {
    check: String,
    max_residual: f64,
    pass: bool,
}

#[derive(Serialize)]
struct VerifyReport {
    #[serde(rename = "N")]
    parties: usize,
    m: usize,
    d: usize,
    tol: f64,
    seed: u64,
    checks: Vec<CheckResult>,
    all_pass: bool,
}

fn corrupted_realization(s: &BellScenario) -> Result<Realization, CoreError> {
    let ideal = ideal_realization(s)?;
    let mut obs: Vec<Vec<QuditObservable>> = ideal.observables().to_vec();
    obs[0][1] = QuditObservable::new(
        CMatrix::identity(s.outcomes()),
        s.outcomes(),
        "corrupted test hook",
    )?;
    Realization::new(*s, ideal.state().clone(), obs)
}

fn verify_point(
    s: &BellScenario,
    tol: f64,
    seed: u64,
    corrupt: bool,
) -> Result<VerifyReport, CoreError> {
    let (m, d) = (s.inputs(), s.outcomes());
    let realization = if corrupt {
        corrupted_realization(s)?
    } else {
        ideal_realization(s)?
    };
    let mut checks = Vec::new();
    fn push(checks: &mut Vec<CheckResult>, tol: f64, name: &str, residual: f64) {
        checks.push(CheckResult {
            check: name.to_string(),
            max_residual: residual,
            pass: residual <= tol,
        });
    }

    let suite = selftest_relation_suite(&realization, tol)?;
    push(&mut checks, tol, "sos_identity", suite.identity_residual);
    push(&mut checks, tol, "P_residual", suite.max_p_norm());
    push(&mut checks, tol, "R_norm", suite.max_r_norm());
    push(&mut checks, tol, "trace_table", suite.max_trace());
    push(
        &mut checks,
        tol,
        "combined_unitarity",
        suite
            .combined_unitarity
            .values()
            .cloned()
            .fold(0.0, f64::max),
    );
    push(
        &mut checks,
        tol,
        "pair_relation_sym",
        suite
            .pair_sym_residuals
            .values()
            .cloned()
            .fold(0.0, f64::max),
    );
    push(
        &mut checks,
        tol,
        "pair_relation_sq",
        suite
            .pair_sq_residuals
            .values()
            .cloned()
            .fold(0.0, f64::max),
    );
    push(
        &mut checks,
        tol,
        "power_trace_chain",
        suite
            .power_trace_residuals
            .values()
            .cloned()
            .fold(0.0, f64::max),
    );

    let mut random_worst = 0.0f64;
    for draw in 0..VERIFY_RANDOM_DRAWS {
        let rr = random_realization(s, seed.wrapping_add(draw))?;
        for variant in 1..=s.parties() {
            let rep = verify_sos_identity(variant, &rr, tol.max(1e-8))?;
            random_worst = random_worst.max(rep.identity_residual);
        }
    }
    // random draws certify the operator identity itself; allow the usual
    // accumulation headroom over the ideal-case tolerance
    checks.push(CheckResult {
        check: "sos_identity_random".into(),
        max_residual: random_worst,
        pass: random_worst <= tol.max(1e-8),
    });

    let mut extraction_worst = 0.0f64;
    let (z, t) = canonical_pair(d, m)?;
    for class in [
        PartyClass::First,
        PartyClass::Second,
        PartyClass::Odd,
        PartyClass::Even,
    ] {
        let w = extraction_unitary(class, m, d)?;
        let o2 = ideal_observable_resolved(class, 2, m, d)?;
        let o3 = ideal_observable_resolved(class, 3, m, d)?;
        let r2 = w
            .matmul(z.matrix())
            .matmul(&w.adjoint())
            .sub(&o2)
            .frobenius_norm();
        let r3 = w
            .matmul(t.matrix())
            .matmul(&w.adjoint())
            .sub(&o3)
            .frobenius_norm();
        extraction_worst = extraction_worst.max(r2).max(r3);
    }
    push(&mut checks, tol, "extraction_unitaries", extraction_worst);

    let mut eig_worst = 0.0f64;
    for r in 0..d {
        let v = t_eigenvector(r, d, m)?;
        let residual = t
            .matrix()
            .apply(&v)
            .sub(&v.scaled(omega_int(d, r as i64)))
            .norm();
        eig_worst = eig_worst.max(residual);
    }
    push(&mut checks, tol, "t_eigenvectors", eig_worst);

    let ghz = ghz_state(s.parties(), d)?;
    let structure = verify_ghz_structure(&ghz, s, 1, tol)?;
    push(
        &mut checks,
        tol,
        "ghz_structure",
        structure.off_pattern_mass.max(structure.diagonal_spread),
    );

    let all_pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport {
        parties: s.parties(),
        m,
        d,
        tol,
        seed,
        checks,
        all_pass,
    })
}

fn cmd_verify(common: &CommonArgs, corrupt: bool) -> Result<u8, Failure> {
    let points = parse_grid(common)?;
    let mut reports = Vec::new();
    for s in &points {
        eprintln!("verify ({}, {}, {})", s.parties(), s.inputs(), s.outcomes());
        reports.push(verify_point(s, common.tol, common.seed, corrupt)?);
    }
    let mut all_pass = true;
    for r in &reports {
        for c in &r.checks {
            if !c.pass {
                all_pass = false;
                eprintln!(
                    "FAILED {} at ({}, {}, {}): residual {:.3e} > tol {:.3e}",
                    c.check, r.parties, r.m, r.d, c.max_residual, r.tol
                );
            }
        }
    }
    let mut csv = String::from("N,m,d,check,max_residual,pass\n");
    for r in &reports {
        for c in &r.checks {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.parties, r.m, r.d, c.check, c.max_residual, c.pass
            ));
        }
    }
    emit(common, &wrap_report("verify", reports), csv)?;
    Ok(if all_pass { 0 } else { 1 })
}

#[derive(serde::Deserialize)]
struct TableFile {
    #[serde(rename = "N")]
    parties: usize,
    m: usize,
    d: usize,
    p: BTreeMap<String, BTreeMap<String, f64>>,
}

fn parse_tuple(key: &str, len: usize, lo: usize, hi: usize) -> Result<Vec<usize>, String> {
    let parts: Vec<&str> = key.split(',').collect();
    if parts.len() != len {
        return Err(format!(
            "key {key:?} has {} components, expected {len}",
            parts.len()
        ));
    }
    let mut out = Vec::with_capacity(len);
    for p in parts {
        let v: usize = p.trim().parse().map_err(|e| format!("key {key:?}: {e}"))?;
        if v < lo || v > hi {
            return Err(format!("key {key:?}: component {v} outside {lo}..={hi}"));
        }
        out.push(v);
    }
    Ok(out)
}

fn load_probability_table(path: &std::path::Path) -> Result<ProbabilityTable, Failure> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| Failure::new(2, format!("cannot read {}: {e}", path.display())))?;
    let file: TableFile = serde_json::from_str(&raw).map_err(|e| {
        Failure::new(
            2,
            format!(
                "malformed table {} (line {}, column {}): {e}",
                path.display(),
                e.line(),
                e.column()
            ),
        )
    })?;
    let scenario = BellScenario::new(file.parties, file.m, file.d).map_err(Failure::from)?;
    let (n, m, d) = (file.parties, file.m, file.d);
    let dn = scenario.total_dim().map_err(Failure::from)?;
    let combos = m.pow(n as u32);
    let mut values = vec![0.0f64; combos * dn];
    let mut seen = vec![false; combos];
    for (xkey, slice) in &file.p {
        let xs =
            parse_tuple(xkey, n, 1, m).map_err(|e| Failure::new(2, format!("input record {e}")))?;
        let fx = xs.iter().fold(0, |acc, &x| acc * m + (x - 1));
        seen[fx] = true;
        for (akey, &prob) in slice {
            let aa = parse_tuple(akey, n, 0, d - 1)
                .map_err(|e| Failure::new(2, format!("outcome record under {xkey:?}: {e}")))?;
            if !prob.is_finite() {
                return Err(Failure::new(
                    2,
                    format!("probability for ({xkey} | {akey}) is not finite"),
                ));
            }
            let fa = aa.iter().fold(0, |acc, &a| acc * d + a);
            values[fx * dn + fa] = prob;
        }
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        let mut xs = vec![0usize; n];
        let mut rest = missing;
        for i in (0..n).rev() {
            xs[i] = rest % m + 1;
            rest /= m;
        }
        return Err(Failure::new(
            2,
            format!("missing input record for x = {xs:?}"),
        ));
    }
    ProbabilityTable::new(scenario, values).map_err(Failure::from)
}

#[derive(Serialize)]
struct EvalTableReport {
    #[serde(rename = "N")]
    parties: usize,
    m: usize,
    d: usize,
    bell_value: f64,
    beta_local: f64,
    beta_q: f64,
    margin_over_local: f64,
    certifies_nonlocality: bool,
}

fn cmd_eval_table(common: &CommonArgs, path: &std::path::Path) -> Result<u8, Failure> {
    let table = load_probability_table(path)?;
    let scenario = *table.scenario();
    let correlators = correlators_from_probabilities(&table).map_err(|e| match e {
        // normalization and negativity problems are input errors here
        CoreError::Validation(msg) => Failure::new(2, format!("invalid table: {msg}")),
        other => Failure::from(other),
    })?;
    let coeffs =
        bell_coefficients(scenario.inputs(), scenario.outcomes()).map_err(Failure::from)?;
    let value =
        bell_value_from_correlators(&correlators, &coeffs, &scenario).map_err(Failure::from)?;
    let bounds = local_bound(&scenario, &coeffs).map_err(Failure::from)?;
    let report = EvalTableReport {
        parties: scenario.parties(),
        m: scenario.inputs(),
        d: scenario.outcomes(),
        bell_value: value,
        beta_local: bounds.beta_local,
        beta_q: bounds.beta_q_formula,
        margin_over_local: value - bounds.beta_local,
        certifies_nonlocality: value > bounds.beta_local + 1e-9,
    };
    let csv = format!(
        "N,m,d,bell_value,beta_local,beta_q,margin_over_local,certifies_nonlocality\n{},{},{},{},{},{},{},{}\n",
        report.parties,
        report.m,
        report.d,
        report.bell_value,
        report.beta_local,
        report.beta_q,
        report.margin_over_local,
        report.certifies_nonlocality
    );
    emit(common, &wrap_report("eval-table", vec![report]), csv)?;
    Ok(0)
}

#[derive(Serialize)]
struct RobustnessPoint {
    v: f64,
    value: f64,
    violates: bool,
}

#[derive(Serialize)]
struct RobustnessReport {
    #[serde(rename = "N")]
    parties: usize,
    m: usize,
    d: usize,
    beta_local: f64,
    beta_q: f64,
    critical_visibility: f64,
    sweep: Vec<RobustnessPoint>,
}

fn cmd_robustness(common: &CommonArgs) -> Result<u8, Failure> {
    let points = parse_grid(common)?;
    let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let mut reports = Vec::new();
    for s in &points {
        eprintln!(
            "robustness ({}, {}, {})",
            s.parties(),
            s.inputs(),
            s.outcomes()
        );
        let sweep = visibility_sweep(s, &grid)?;
        reports.push(RobustnessReport {
            parties: s.parties(),
            m: s.inputs(),
            d: s.outcomes(),
            beta_local: sweep.beta_local,
            beta_q: sweep.beta_quantum,
            critical_visibility: sweep.critical_visibility,
            sweep: sweep
                .points
                .iter()
                .map(|p| RobustnessPoint {
                    v: p.v,
                    value: p.value,
                    violates: p.violates,
                })
                .collect(),
        });
    }
    let mut csv = String::from("N,m,d,v,value,violates,beta_local,beta_q,critical_visibility\n");
    for r in &reports {
        for p in &r.sweep {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.parties,
                r.m,
                r.d,
                p.v,
                p.value,
                p.violates,
                r.beta_local,
                r.beta_q,
                r.critical_visibility
            ));
        }
    }
    emit(common, &wrap_report("robustness", reports), csv)?;
    Ok(0)
}

fn wrap_report<T: Serialize>(command: &str, points: Vec<T>) -> serde_json::Value {
    serde_json::json!({
        "schema": SCHEMA,
        "command": command,
        "points": points,
    })
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    let common = match &cli.command {
        Command::QuantumValue { common } => common,
        Command::LocalBound { common, .. } => common,
        Command::Verify { common, .. } => common,
        Command::EvalTable { common, .. } => common,
        Command::Robustness { common } => common,
    };
    if common.tol <= 0.0 {
        return Err(Failure::new(2, "--tol must be positive"));
    }
    let dispatch = || match &cli.command {
        Command::QuantumValue { common } => cmd_quantum_value(common),
        Command::LocalBound {
            common,
            zero_coeffs,
        } => cmd_local_bound(common, *zero_coeffs),
        Command::Verify { common, corrupt } => cmd_verify(common, *corrupt),
        Command::EvalTable { common, path } => cmd_eval_table(common, path),
        Command::Robustness { common } => cmd_robustness(common),
    };
    if common.shards > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(common.shards)
            .build()
            .map_err(|e| Failure::new(2, format!("cannot build worker pool: {e}")))?;
        pool.install(dispatch)
    } else {
        dispatch()
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
