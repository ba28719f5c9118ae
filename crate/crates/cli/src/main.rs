//! Command-line front end: builds designs and evasive witnesses, encodes and
//! decodes words, and runs seeded decoding experiments with stable output.
//!
//! Exit codes: 0 on success, 1 when a mathematical contract fails (budget
//! exhausted, verification over budget, strict experiment below a success
//! rate of one), 2 on usage errors. Everything written to stdout is
//! byte-deterministic for a fixed seed; timing goes to stderr or behind
//! `--timings`.

use std::fmt;
use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use btt_codes::capcode::RestrictedCode;
use btt_codes::evasive::{
    compose, design_to_periodic_evasive, gk_design, search_btt_evasive, two_level_construct,
    verify_subspace_design, Attestation, EvasiveKind, EvasiveWitness, SearchConfig,
    TwoLevelConfig,
};
use btt_codes::gf::{FieldTower, Fq, FqField, Fqm};
use btt_codes::linalg::GfSubspace;
use btt_codes::par::Exec;
use btt_codes::rs::{
    interpolate, structured_from_q, structured_list_from_system, DecodeParams, RsSubfieldCode,
    DEFAULT_PRUNE_CAP,
};
use btt_codes::serial::{
    DesignFile, FieldSpec, ListFile, TrialRecord, WitnessFile, TRIAL_CSV_HEADER,
};
use btt_codes::sim::{corrupt_exactly, random_fq_vec, random_message, trial_rng};

/// Marker for errors that should exit with the usage code.
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(anyhow::Error::new(Usage(msg.into())))
}

#[derive(Parser)]
#[command(
    name = "btt-codes",
    about = "List decoding with structured lists, subspace designs, and evasive subspaces"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a subspace design from polynomial vanishing conditions.
    Design(DesignArgs),
    /// Search, compose, or construct evasive subspace witnesses.
    Evasive(EvasiveArgs),
    /// Encode a message with a Reed-Solomon subfield code.
    Encode(EncodeArgs),
    /// List decode a word and print the structured list.
    Decode(DecodeArgs),
    /// Run seeded decoding trials and emit one record per trial.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct DesignArgs {
    /// Base field, written p or p^e.
    #[arg(long)]
    q: String,
    /// Ambient dimension of the design members.
    #[arg(long)]
    m: usize,
    /// Extension degree for the point orbits.
    #[arg(long, default_value_t = 1)]
    dd: usize,
    /// Vanishing multiplicity per member.
    #[arg(long)]
    t: usize,
    /// Intersection strength the design certifies against.
    #[arg(long)]
    r: usize,
    /// Exhaustively check the certified bound before printing.
    #[arg(long)]
    verify: bool,
    /// Candidate cap for --verify.
    #[arg(long, default_value_t = 1 << 22)]
    verify_cap: u128,
    /// Emit the k-fold member product as a periodic witness instead.
    #[arg(long)]
    periodic: Option<usize>,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum EvasiveMode {
    Search,
    Compose,
    TwoLevel,
}

#[derive(Args)]
struct EvasiveArgs {
    #[arg(long, value_enum)]
    mode: EvasiveMode,
    /// Base field, written p or p^e (search and two-level).
    #[arg(long)]
    q: Option<String>,
    /// Number of blocks.
    #[arg(long)]
    k: Option<usize>,
    /// Block length.
    #[arg(long)]
    m: Option<usize>,
    /// Width of the structured family to evade.
    #[arg(long)]
    r: Option<usize>,
    /// Codimension fraction in (0, 1).
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    budget: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1 << 22)]
    exhaustive_cap: u64,
    #[arg(long, default_value_t = 2_000)]
    sample_trials: u64,
    /// Inner witness file (compose).
    #[arg(long)]
    inner: Option<PathBuf>,
    /// Outer witness file (compose).
    #[arg(long)]
    outer: Option<PathBuf>,
    /// Inner block count (two-level).
    #[arg(long, default_value_t = 2)]
    k1: usize,
    /// First outer block count (two-level).
    #[arg(long, default_value_t = 2)]
    k2: usize,
    #[arg(long, default_value_t = 1)]
    dd: usize,
    /// Vanishing multiplicity of the first design level (two-level).
    #[arg(long)]
    t2: Option<usize>,
    /// Vanishing multiplicity of the second design level (two-level).
    #[arg(long)]
    t3: Option<usize>,
    #[arg(long, default_value_t = 2)]
    min_q: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct EncodeArgs {
    /// Field tower, written p^e:m.
    #[arg(long)]
    field: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    /// Evaluation points as a JSON array; defaults to 0..n.
    #[arg(long)]
    points: Option<String>,
    /// Message as a JSON array of k symbols, each m digits; - reads stdin.
    #[arg(long)]
    message: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    field: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    points: Option<String>,
    /// Pick s, d, t from this decoding-fraction target.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    t: Option<usize>,
    /// Received word as a JSON array of n symbols; - reads stdin.
    #[arg(long)]
    word: String,
    #[arg(long, default_value_t = DEFAULT_PRUNE_CAP)]
    prune_cap: u128,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum RecordFormat {
    Jsonl,
    Csv,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum WitnessSource {
    Search,
    Design,
    File,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    field: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    points: Option<String>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    t: Option<usize>,
    /// Error weight per trial: a single number or an inclusive range a..b
    /// cycled across trials.
    #[arg(long)]
    errors: String,
    #[arg(long)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = RecordFormat::Jsonl)]
    format: RecordFormat,
    /// Restrict messages to an evasive witness from this source.
    #[arg(long, value_enum)]
    witness: Option<WitnessSource>,
    #[arg(long)]
    witness_file: Option<PathBuf>,
    /// Codimension fraction for a searched witness.
    #[arg(long, default_value_t = 0.5)]
    witness_eps: f64,
    #[arg(long, default_value_t = 100_000)]
    witness_budget: u64,
    /// Vanishing multiplicity for a design-derived witness.
    #[arg(long, default_value_t = 1)]
    design_t: usize,
    #[arg(long, default_value_t = 1)]
    design_dd: usize,
    #[arg(long, default_value_t = DEFAULT_PRUNE_CAP)]
    prune_cap: u128,
    /// Exit with a failure code if any within-radius trial misses.
    #[arg(long)]
    strict: bool,
    /// Add per-phase wall times to the records (not byte-reproducible).
    #[arg(long)]
    timings: bool,
    #[arg(long)]
    sequential: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<Usage>().is_some() {
                return ExitCode::from(2);
            }
            match err.downcast_ref::<btt_codes::Error>() {
                Some(btt_codes::Error::Parse(_))
                | Some(btt_codes::Error::InvalidParameter(_)) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.cmd {
        Cmd::Design(args) => cmd_design(args),
        Cmd::Evasive(args) => cmd_evasive(args),
        Cmd::Encode(args) => cmd_encode(args),
        Cmd::Decode(args) => cmd_decode(args),
        Cmd::Experiment(args) => cmd_experiment(args),
    }
}

fn parse_base_field(s: &str) -> anyhow::Result<Arc<FqField>> {
    let spec = FieldSpec::parse(s)?;
    if spec.m != 1 {
        return usage(format!("base field {s:?} must not carry a tower part"));
    }
    Ok(FqField::new(spec.p, spec.e)?)
}

fn exec_of(sequential: bool) -> Exec {
    if sequential {
        Exec::Sequential
    } else {
        Exec::Auto
    }
}

fn emit(out: &Option<PathBuf>, content: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, content)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{content}"),
    }
    Ok(())
}

fn cmd_design(args: DesignArgs) -> anyhow::Result<ExitCode> {
    let field = parse_base_field(&args.q)?;
    let design = gk_design(&field, args.m, args.dd, args.t, args.r)?;
    if args.verify {
        let report =
            verify_subspace_design(&design, args.r, args.verify_cap, exec_of(args.sequential))?;
        eprintln!(
            "verify: max_total_intersection={} candidates={} certified={}",
            report.max_sum,
            report.candidates,
            design.s()
        );
        if report.max_sum > design.s() {
            return Err(anyhow!(btt_codes::Error::Infeasible {
                stage: "design verification",
                detail: format!(
                    "measured {} exceeds certified {}",
                    report.max_sum,
                    design.s()
                ),
            }));
        }
    }
    let text = match args.periodic {
        Some(k) => {
            let w = design_to_periodic_evasive(&design, k)?;
            WitnessFile::from_witness(&w).to_json()
        }
        None => DesignFile::from_design(&design).to_json(),
    };
    emit(&args.out, &format!("{text}\n"))?;
    Ok(ExitCode::SUCCESS)
}

fn read_witness(path: &PathBuf) -> anyhow::Result<EvasiveWitness> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    Ok(WitnessFile::from_json(&text)?.to_witness()?)
}

fn cmd_evasive(args: EvasiveArgs) -> anyhow::Result<ExitCode> {
    let exec = exec_of(args.sequential);
    let witness = match args.mode {
        EvasiveMode::Search => {
            let (Some(q), Some(k), Some(m), Some(r), Some(eps)) =
                (&args.q, args.k, args.m, args.r, args.eps)
            else {
                return usage("search needs --q, --k, --m, --r, and --eps");
            };
            let field = parse_base_field(q)?;
            let cfg = SearchConfig {
                budget: args.budget,
                seed: args.seed,
                exhaustive_cap: args.exhaustive_cap,
                sample_trials: args.sample_trials,
            };
            let out = search_btt_evasive(&field, k, m, r, eps, &cfg, exec)?;
            eprintln!(
                "search: attempts={} work={} measured={}",
                out.attempts, out.work, out.measured
            );
            out.witness
        }
        EvasiveMode::Compose => {
            let (Some(inner), Some(outer)) = (&args.inner, &args.outer) else {
                return usage("compose needs --inner and --outer witness files");
            };
            compose(&read_witness(inner)?, &read_witness(outer)?)?
        }
        EvasiveMode::TwoLevel => {
            let (Some(q), Some(k), Some(m), Some(r), Some(eps), Some(t2), Some(t3)) =
                (&args.q, args.k, args.m, args.r, args.eps, args.t2, args.t3)
            else {
                return usage("two-level needs --q, --k, --m, --r, --eps, --t2, and --t3");
            };
            let field = parse_base_field(q)?;
            let cfg = TwoLevelConfig {
                k1: args.k1,
                k2: args.k2,
                dd: args.dd,
                t2,
                t3,
                min_q: args.min_q,
                search: SearchConfig {
                    budget: args.budget,
                    seed: args.seed,
                    exhaustive_cap: args.exhaustive_cap,
                    sample_trials: args.sample_trials,
                },
            };
            two_level_construct(&field, k, m, r, eps, &cfg, exec)?
        }
    };
    let text = WitnessFile::from_witness(&witness).to_json();
    emit(&args.out, &format!("{text}\n"))?;
    Ok(ExitCode::SUCCESS)
}

fn parse_symbols(tower: &Arc<FieldTower>, raw: &str, expect: usize) -> anyhow::Result<Vec<Fqm>> {
    let text = if raw == "-" {
        let mut buf = String::new();
        std::io::stdin().read_to_string(&mut buf).context("reading stdin")?;
        buf
    } else {
        raw.to_string()
    };
    let value: Vec<Vec<Fq>> = serde_json::from_str(&text)
        .map_err(|e| btt_codes::Error::Parse(format!("symbol array: {e}")))?;
    if value.len() != expect {
        return usage(format!("expected {expect} symbols, got {}", value.len()));
    }
    let q = tower.fq().q() as Fq;
    for sym in &value {
        if sym.len() != tower.m() {
            return usage(format!(
                "each symbol needs {} digits, got {}",
                tower.m(),
                sym.len()
            ));
        }
        if sym.iter().any(|&d| d >= q) {
            return usage(format!("symbol digit out of range for F_{q}"));
        }
    }
    Ok(value)
}

fn parse_points(raw: &Option<String>) -> anyhow::Result<Option<Vec<Fq>>> {
    match raw {
        None => Ok(None),
        Some(text) => Ok(Some(serde_json::from_str(text).map_err(|e| {
            btt_codes::Error::Parse(format!("evaluation points: {e}"))
        })?)),
    }
}

fn build_code(
    field: &str,
    n: usize,
    k: usize,
    points: &Option<String>,
) -> anyhow::Result<(Arc<FieldTower>, RsSubfieldCode)> {
    let tower = FieldSpec::parse(field)?.tower()?;
    let code = RsSubfieldCode::new(tower.clone(), n, k, parse_points(points)?)?;
    Ok((tower, code))
}

fn cmd_encode(args: EncodeArgs) -> anyhow::Result<ExitCode> {
    let (tower, code) = build_code(&args.field, args.n, args.k, &args.points)?;
    let msg = parse_symbols(&tower, &args.message, args.k)?;
    let cw = code.encode(&msg)?;
    let text = serde_json::to_string(&cw).expect("plain data serializes");
    emit(&args.out, &format!("{text}\n"))?;
    Ok(ExitCode::SUCCESS)
}

fn choose_params(
    code: &RsSubfieldCode,
    eps: Option<f64>,
    s: Option<usize>,
    d: Option<usize>,
    t: Option<usize>,
) -> anyhow::Result<DecodeParams> {
    match (eps, s, d, t) {
        (Some(eps), None, None, None) => Ok(DecodeParams::choose(code, eps)?),
        (None, Some(s), Some(d), Some(t)) => Ok(DecodeParams::new(code, s, d, t)?),
        _ => usage("give either --eps or all of --s, --d, --t"),
    }
}

fn cmd_decode(args: DecodeArgs) -> anyhow::Result<ExitCode> {
    let (tower, code) = build_code(&args.field, args.n, args.k, &args.points)?;
    let params = choose_params(&code, args.eps, args.s, args.d, args.t)?;
    let word = parse_symbols(&tower, &args.word, args.n)?;
    let t0 = Instant::now();
    let qpoly = interpolate(&code, &params, &word)?;
    let t1 = Instant::now();
    let sys = structured_from_q(&code, &params, &qpoly)?;
    let list = structured_list_from_system(&code, sys)?;
    let t2 = Instant::now();
    let messages = list.prune_with_cap(&code, &word, params.t(), args.prune_cap)?;
    let t3 = Instant::now();
    eprintln!(
        "timings: interpolate={:.3}ms system={:.3}ms prune={:.3}ms",
        (t1 - t0).as_secs_f64() * 1e3,
        (t2 - t1).as_secs_f64() * 1e3,
        (t3 - t2).as_secs_f64() * 1e3
    );
    let file = ListFile {
        empty: list.is_empty(),
        shift: list.shift().map(|s| s.to_vec()),
        dim: list.dim(),
        basis: (0..list.subspace().dim())
            .map(|r| list.subspace().basis().row(r).to_vec())
            .collect(),
        messages,
    };
    let text = serde_json::to_string_pretty(&file).expect("plain data serializes");
    emit(&args.out, &format!("{text}\n"))?;
    Ok(ExitCode::SUCCESS)
}

fn parse_error_spec(s: &str, n: usize) -> anyhow::Result<(usize, usize)> {
    let parse_one = |x: &str| -> anyhow::Result<usize> {
        x.trim()
            .parse::<usize>()
            .map_err(|_| anyhow::Error::new(Usage(format!("bad error count {x:?}"))))
    };
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (parse_one(a)?, parse_one(b)?),
        None => {
            let e = parse_one(s)?;
            (e, e)
        }
    };
    if lo > hi || hi > n {
        return usage(format!("error range {lo}..{hi} does not fit a length-{n} code"));
    }
    Ok((lo, hi))
}

fn trivial_inner(field: &Arc<FqField>, m: usize, r: usize) -> anyhow::Result<EvasiveWitness> {
    Ok(EvasiveWitness::attested(
        GfSubspace::full(field.clone(), m),
        EvasiveKind::Btt,
        1,
        m,
        r,
        r,
        0,
        Attestation::Constructed,
    )?)
}

fn experiment_witness(
    args: &ExperimentArgs,
    code: &RsSubfieldCode,
    params: &DecodeParams,
    exec: Exec,
) -> anyhow::Result<Option<EvasiveWitness>> {
    let Some(source) = args.witness else { return Ok(None) };
    let tower = code.tower();
    let (k, m) = (code.k(), tower.m());
    let r = params.s().saturating_sub(1).max(1);
    let w = match source {
        WitnessSource::Search => {
            let cfg = SearchConfig {
                budget: args.witness_budget,
                seed: args.seed,
                ..SearchConfig::default()
            };
            search_btt_evasive(tower.fq(), k, m, r, args.witness_eps, &cfg, exec)?.witness
        }
        WitnessSource::Design => {
            let design = gk_design(tower.fq(), m, args.design_dd, args.design_t, r)?;
            let outer = design_to_periodic_evasive(&design, k)?;
            compose(&trivial_inner(tower.fq(), m, r)?, &outer)?
        }
        WitnessSource::File => {
            let Some(path) = &args.witness_file else {
                return usage("--witness file needs --witness-file");
            };
            read_witness(path)?
        }
    };
    Ok(Some(w))
}

fn cmd_experiment(args: ExperimentArgs) -> anyhow::Result<ExitCode> {
    let (tower, code) = build_code(&args.field, args.n, args.k, &args.points)?;
    let params = choose_params(&code, args.eps, args.s, args.d, args.t)?;
    let (lo, hi) = parse_error_spec(&args.errors, args.n)?;
    let exec = exec_of(args.sequential);
    let restricted = experiment_witness(&args, &code, &params, exec)?
        .map(|w| RestrictedCode::new(code.clone(), params, w))
        .transpose()?;

    if args.format == RecordFormat::Csv {
        println!("{TRIAL_CSV_HEADER}");
    }
    let max_e = params.max_errors(&code);
    let mut within = 0u64;
    let mut within_hits = 0u64;
    let mut hits = 0u64;
    let mut max_list_size = 0usize;
    let mut max_list_dim = 0usize;
    for trial in 0..args.trials {
        let mut rng = trial_rng(args.seed, trial);
        let e = lo + (trial as usize) % (hi - lo + 1);
        let mut rec = match &restricted {
            None => {
                let msg = random_message(&tower, code.k(), &mut rng);
                let cw = code.encode(&msg)?;
                let word = corrupt_exactly(&code, &cw, e, &mut rng)?;
                let t0 = Instant::now();
                let qpoly = interpolate(&code, &params, &word)?;
                let t1 = Instant::now();
                let sys = structured_from_q(&code, &params, &qpoly)?;
                let list = structured_list_from_system(&code, sys)?;
                let t2 = Instant::now();
                let pruned = list.prune_with_cap(&code, &word, params.t(), args.prune_cap)?;
                let t3 = Instant::now();
                let mut rec = TrialRecord {
                    trial,
                    errors: e,
                    list_size: pruned.len(),
                    list_dim: list.dim(),
                    success: pruned.contains(&msg),
                    interpolate_ms: None,
                    system_ms: None,
                    prune_ms: None,
                };
                if args.timings {
                    rec.interpolate_ms = Some((t1 - t0).as_secs_f64() * 1e3);
                    rec.system_ms = Some((t2 - t1).as_secs_f64() * 1e3);
                    rec.prune_ms = Some((t3 - t2).as_secs_f64() * 1e3);
                }
                rec
            }
            Some(rc) => {
                let coords =
                    random_fq_vec(tower.fq().q(), rc.message_dim(), &mut rng);
                let cw = rc.encode(&coords)?;
                let word = corrupt_exactly(&code, &cw, e, &mut rng)?;
                let t0 = Instant::now();
                let (list, dim) = rc.list_decode_with_cap(&word, args.prune_cap)?;
                let t1 = Instant::now();
                let mut rec = TrialRecord {
                    trial,
                    errors: e,
                    list_size: list.len(),
                    list_dim: dim,
                    success: list.contains(&coords),
                    interpolate_ms: None,
                    system_ms: None,
                    prune_ms: None,
                };
                if args.timings {
                    rec.system_ms = Some((t1 - t0).as_secs_f64() * 1e3);
                }
                rec
            }
        };
        if !args.timings {
            rec.interpolate_ms = None;
            rec.system_ms = None;
            rec.prune_ms = None;
        }
        match args.format {
            RecordFormat::Jsonl => println!("{}", rec.jsonl()),
            RecordFormat::Csv => println!("{}", rec.csv_row()),
        }
        hits += u64::from(rec.success);
        if e <= max_e {
            within += 1;
            within_hits += u64::from(rec.success);
        }
        max_list_size = max_list_size.max(rec.list_size);
        max_list_dim = max_list_dim.max(rec.list_dim);
    }
    let rate = if args.trials > 0 { hits as f64 / args.trials as f64 } else { 1.0 };
    let within_rate = if within > 0 { within_hits as f64 / within as f64 } else { 1.0 };
    eprintln!(
        "summary: trials={} success_rate={rate:.3} within_radius_rate={within_rate:.3} \
         max_list_size={max_list_size} max_list_dim={max_list_dim}",
        args.trials
    );
    if args.strict && within_hits < within {
        eprintln!(
            "strict: {} of {within} within-radius trials missed the planted message",
            within - within_hits
        );
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}
