//! `dsc`: command-line front end for the dsc-core experiments.
//!
//! Every command writes JSON (or CSV where noted) to stdout or `--out`.
//! JSON documents carry a `schema` field. Exit codes: 0 success, 2 usage,
//! 3 precondition or saturation, 4 internal invariant failure.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dsc_core::approx_sets::{self as ds, DeltaSequence};
use dsc_core::contfrac::{self, RealValue};
use dsc_core::gcd_graph::{self as gg, ConstantsProfile, GcdGraph, Violation};
use dsc_core::numtheory;
use dsc_core::serde_util::{parse_rat, rat_string};
use dsc_core::Error;
use num_rational::BigRational;
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "dsc", version, about = "Exact experiments on Diophantine approximation sets and GCD graphs")]
struct Cli {
    /// Report failures as a JSON document on stdout.
    #[arg(long, global = true)]
    json_errors: bool,
    /// Cap on worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Continued fraction expansion and convergent table.
    Cf(CfArgs),
    /// Approximation sets and radius sequences.
    #[command(subcommand)]
    Ds(DsCommand),
    /// GCD graphs and compression.
    #[command(subcommand)]
    Gcd(GcdCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Output {
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CfArgs {
    /// `p/q`, `n`, `sqrt:d`, `surd:p,d,r`, `golden`, `e[@bits]` or `pi[@bits]`.
    #[arg(long)]
    value: String,
    #[arg(long, default_value_t = 10)]
    terms: usize,
    /// Bits used for the error enclosures.
    #[arg(long, default_value_t = 256)]
    prec: u32,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct DeltaArgs {
    /// `khinchin:c`, `uniform:lo..hi:N`, `counterexample:J` or `file:path`.
    #[arg(long)]
    delta: String,
    /// Truncation point for `khinchin:c`.
    #[arg(long, default_value_t = 1000)]
    qmax: u64,
}

#[derive(Subcommand)]
enum DsCommand {
    /// Print the radius sequence as JSON (loadable again with `file:`).
    Delta {
        #[command(flatten)]
        delta: DeltaArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Table of `(q, Delta_q, meas(A_q))`, or `meas(A_q*)` with `--reduced`.
    Measure {
        #[command(flatten)]
        delta: DeltaArgs,
        #[arg(long)]
        reduced: bool,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[command(flatten)]
        output: Output,
    },
    /// Pair correlation data for support pairs `from <= q < r <= to`.
    Pairs {
        #[command(flatten)]
        delta: DeltaArgs,
        #[arg(long)]
        from: u64,
        #[arg(long)]
        to: u64,
        #[arg(long, default_value_t = 128)]
        prec: u32,
        #[command(flatten)]
        output: Output,
    },
    /// Second-moment report on `[from, to]`; without `--to` the window is searched.
    Window {
        #[command(flatten)]
        delta: DeltaArgs,
        #[arg(long)]
        from: u64,
        #[arg(long)]
        to: Option<u64>,
        #[command(flatten)]
        output: Output,
    },
    /// Level table of the counterexample sequence.
    Counterexample {
        #[arg(long)]
        levels: usize,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[command(flatten)]
        output: Output,
    },
    /// Monte Carlo count of the sets containing a random point.
    Montecarlo {
        #[command(flatten)]
        delta: DeltaArgs,
        #[arg(long, default_value_t = 1000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        reduced: bool,
        /// Restrict the support to `q >= from`.
        #[arg(long)]
        from: Option<u64>,
        /// Restrict the support to `q <= to`.
        #[arg(long)]
        to: Option<u64>,
        #[command(flatten)]
        output: Output,
    },
    /// Divisor-supremum transform of the sequence, truncated at qmax.
    Catlin {
        #[command(flatten)]
        delta: DeltaArgs,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Args)]
struct GraphArgs {
    /// Graph JSON (`{"V","W","E","P","a","b"}`), or a compress result.
    #[arg(long)]
    graph: PathBuf,
}

#[derive(Args)]
struct ConstantsArgs {
    /// `paper`, `toy` or a profile file of `key = value` lines.
    #[arg(long, default_value = "paper")]
    constants: String,
}

#[derive(Subcommand)]
enum GcdCommand {
    /// Check the GCD graph conditions; exits 3 listing violations.
    Validate {
        #[command(flatten)]
        graph: GraphArgs,
    },
    /// Certified quality `q(G)`.
    Quality {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        constants: ConstantsArgs,
        #[command(flatten)]
        output: Output,
    },
    /// One quality increment step at a remaining prime (smallest by default).
    Step {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        constants: ConstantsArgs,
        #[arg(long)]
        prime: Option<u64>,
        #[command(flatten)]
        output: Output,
    },
    /// Full compression trace.
    Compress {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        constants: ConstantsArgs,
        #[arg(long, default_value = "2")]
        t: String,
        /// Also write the step table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Square-free special case report on `[Q, 2Q]`.
    SpecialCase {
        #[arg(long = "Q")]
        q: u64,
        #[arg(long = "N")]
        n: String,
        /// Comma separated values of `t` for the `B_t` ladder.
        #[arg(long, default_value = "2,5,10")]
        ladder: String,
        /// Support file with one integer per line; default: greedy square-free support.
        #[arg(long)]
        support: Option<PathBuf>,
        #[arg(long)]
        delta_link: bool,
        #[command(flatten)]
        constants: ConstantsArgs,
        #[command(flatten)]
        output: Output,
    },
}

/// A failure with its exit code and optional structured detail.
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
    detail: Value,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: 2, kind: "usage", message: message.into(), detail: Value::Null }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind, detail) = match &e {
            Error::InvalidArgument(_) => (2, "invalid_argument", Value::Null),
            Error::Parse(_) => (2, "parse", Value::Null),
            Error::Saturation { q, delta } => (3, "saturation", json!({ "q": q, "delta": delta })),
            Error::Precondition(_) => (3, "precondition", Value::Null),
            Error::Precision(_) => (3, "precision", Value::Null),
            Error::ResourceLimit(_) => (3, "resource_limit", Value::Null),
            Error::Invariant(_) => (4, "invariant", Value::Null),
        };
        Failure { code, kind, message: e.to_string(), detail }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let json_errors = std::env::args().any(|a| a == "--json-errors");
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            return report(Failure::usage(e.to_string().trim_end()), json_errors);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return report(Failure::usage("--threads must be positive"), cli.json_errors);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return report(Failure { code: 4, kind: "invariant", message: e.to_string(), detail: Value::Null }, cli.json_errors);
        }
    }
    let result = match cli.command {
        Command::Cf(args) => run_cf(args),
        Command::Ds(cmd) => run_ds(cmd),
        Command::Gcd(cmd) => run_gcd(cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(f, cli.json_errors),
    }
}

fn report(f: Failure, json_errors: bool) -> ExitCode {
    if json_errors {
        let doc = json!({
            "schema": "dsc.error/1",
            "kind": f.kind,
            "exit_code": f.code,
            "message": f.message,
            "detail": f.detail,
        });
        println!("{}", serde_json::to_string_pretty(&doc).expect("error document serializes"));
    } else {
        eprintln!("dsc: {}", f.message);
        if let Some(list) = f.detail.get("violations").and_then(Value::as_array) {
            for v in list {
                eprintln!("  {}", v["message"].as_str().unwrap_or_default());
            }
        }
    }
    ExitCode::from(f.code)
}

/// Serializes `value` as an object with an added `schema` field.
fn document(schema: &str, value: &impl Serialize) -> Result<String, Failure> {
    let body = serde_json::to_value(value).map_err(|e| Failure::usage(e.to_string()))?;
    let mut doc = serde_json::Map::new();
    doc.insert("schema".into(), Value::String(schema.into()));
    match body {
        Value::Object(map) => doc.extend(map),
        other => {
            doc.insert("result".into(), other);
        }
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(doc)).expect("JSON values serialize");
    text.push('\n');
    Ok(text)
}

fn emit(output: &Output, text: &[u8]) -> Outcome {
    match &output.out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::usage(format!("{}: {e}", path.display()))),
        None => match io::stdout().write_all(text) {
            // A closed pipe (e.g. `| head`) is not an error.
            Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
            _ => Ok(()),
        },
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn rational(flag: &str, text: &str) -> Result<BigRational, Failure> {
    parse_rat(text).map_err(|e| Failure::usage(format!("{flag}: {e}")))
}

fn run_cf(args: CfArgs) -> Outcome {
    let x: RealValue = args.value.parse()?;
    let table = contfrac::convergent_table(&x, args.terms, args.prec)?;
    let text = match args.format {
        Format::Json => document("dsc.cf/1", &table)?,
        Format::Csv => {
            let mut s = String::from("j,n_j,a_j,q_j,error_lo,error_hi,bounds_ok\n");
            for r in &table.rows {
                let (lo, hi) = match &r.error {
                    Some(e) => (format!("{:e}", e.lo_f64()), format!("{:e}", e.hi_f64())),
                    None => (String::new(), String::new()),
                };
                let ok = r.bounds_ok.map(|b| b.to_string()).unwrap_or_default();
                s.push_str(&format!("{},{},{},{},{lo},{hi},{ok}\n", r.j, r.n_j, r.a_j, r.q_j));
            }
            s
        }
    };
    emit(&args.output, text.as_bytes())
}

/// Parses the compact radius-sequence grammar.
fn load_delta(args: &DeltaArgs) -> Result<DeltaSequence, Failure> {
    let spec = args.delta.trim();
    let bad = || Failure::usage(format!("cannot parse --delta '{spec}'"));
    let (kind, rest) = spec.split_once(':').ok_or_else(bad)?;
    match kind {
        "khinchin" => Ok(ds::delta_khinchin(&rational("--delta", rest)?, args.qmax)?),
        "uniform" => {
            let (range, n) = rest.rsplit_once(':').ok_or_else(bad)?;
            let (lo, hi) = range.split_once("..").ok_or_else(bad)?;
            let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
            let hi: u64 = hi.trim().parse().map_err(|_| bad())?;
            if lo == 0 || lo > hi {
                return Err(Failure::usage(format!("empty or invalid range {lo}..{hi}")));
            }
            let support: Vec<u64> = (lo..=hi).collect();
            Ok(ds::delta_uniform_support(&support, &rational("--delta", n)?)?)
        }
        "counterexample" => {
            let levels: usize = rest.trim().parse().map_err(|_| bad())?;
            Ok(counterexample(levels)?.delta)
        }
        "file" => {
            let text = read(Path::new(rest))?;
            serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{rest}: {e}")))
        }
        _ => Err(bad()),
    }
}

fn counterexample(levels: usize) -> dsc_core::Result<ds::Counterexample> {
    // The first `levels` primes lie below 100 for every admissible level count.
    let table = numtheory::sieve(100)?;
    ds::delta_counterexample(levels, &table)
}

#[derive(Serialize)]
struct PairsReport {
    from: u64,
    to: u64,
    pairs: Vec<ds::PairData>,
    /// Largest `exact_meas / pv_term` (midpoint) and its pair.
    max_ratio: Option<(u64, u64, f64)>,
}

fn run_ds(cmd: DsCommand) -> Outcome {
    match cmd {
        DsCommand::Delta { delta, output } => {
            let d = load_delta(&delta)?;
            emit(&output, document("dsc.delta/1", &d)?.as_bytes())
        }
        DsCommand::Measure { delta, reduced, format, output } => {
            let d = load_delta(&delta)?;
            let rows = ds::measure_table(&d, reduced)?;
            let text = match format {
                Format::Csv => {
                    let mut buf = Vec::new();
                    ds::write_measure_csv(&rows, &mut buf)?;
                    buf
                }
                Format::Json => {
                    let list: Vec<Value> = rows
                        .iter()
                        .map(|r| json!({ "q": r.q, "delta": rat_string(&r.delta), "meas": rat_string(&r.meas) }))
                        .collect();
                    document("dsc.measure/1", &json!({ "label": d.label(), "reduced": reduced, "rows": list }))?
                        .into_bytes()
                }
            };
            emit(&output, &text)
        }
        DsCommand::Pairs { delta, from, to, prec, output } => {
            let d = load_delta(&delta)?;
            if from > to {
                return Err(Failure::usage(format!("--from {from} exceeds --to {to}")));
            }
            d.check_unsaturated(from, to)?;
            let table = numtheory::sieve(to.max(2))?;
            let support: Vec<u64> = d.support().filter(|&q| q >= from && q <= to).collect();
            let mut pairs = Vec::new();
            for (i, &q) in support.iter().enumerate() {
                for &r in &support[i + 1..] {
                    pairs.push(ds::pair_data(q, r, &d, &table, prec)?);
                }
            }
            let max_ratio = pairs
                .iter()
                .filter_map(|p| p.ratio().map(|e| (p.q, p.r, e.mid_f64())))
                .fold(None, |best: Option<(u64, u64, f64)>, c| match best {
                    Some(b) if b.2 >= c.2 => Some(b),
                    _ => Some(c),
                });
            emit(&output, document("dsc.pairs/1", &PairsReport { from, to, pairs, max_ratio })?.as_bytes())
        }
        DsCommand::Window { delta, from, to, output } => {
            let d = load_delta(&delta)?;
            let hi = match to {
                Some(t) => t,
                None => match ds::find_window(&d, from)? {
                    Some((_, r)) => r,
                    None => {
                        return Err(Failure::from(Error::Precondition(format!(
                            "the truncated sum of meas(A_q*) from q = {from} never reaches 1"
                        ))))
                    }
                },
            };
            let report = ds::window_report(&d, from, hi)?;
            emit(&output, document("dsc.window/1", &report)?.as_bytes())
        }
        DsCommand::Counterexample { levels, format, output } => {
            let c = counterexample(levels)?;
            let text = match format {
                Format::Json => document("dsc.counterexample/1", &c.levels)?.into_bytes(),
                Format::Csv => {
                    let mut buf = Vec::new();
                    ds::write_counterexample_csv(&c.levels, &mut buf)?;
                    buf
                }
            };
            emit(&output, &text)
        }
        DsCommand::Montecarlo { delta, samples, seed, reduced, from, to, output } => {
            let mut d = load_delta(&delta)?;
            if from.is_some() || to.is_some() {
                d = d.restrict(from.unwrap_or(1), to.unwrap_or(d.qmax()));
            }
            let report = ds::monte_carlo_counts(&d, reduced, samples, seed)?;
            emit(&output, document("dsc.montecarlo/1", &report)?.as_bytes())
        }
        DsCommand::Catlin { delta, output } => {
            let d = load_delta(&delta)?;
            let c = ds::catlin_transform(&d)?;
            emit(&output, document("dsc.delta/1", &c)?.as_bytes())
        }
    }
}

fn load_graph(args: &GraphArgs) -> Result<GcdGraph, Failure> {
    let text = read(&args.graph)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", args.graph.display())))?;
    let body = value.get("terminal").cloned().unwrap_or(value);
    serde_json::from_value(body).map_err(|e| {
        let message = format!("{}: {e}", args.graph.display());
        Failure { code: 3, kind: "invalid_graph", message, detail: Value::Null }
    })
}

fn load_constants(args: &ConstantsArgs) -> Result<ConstantsProfile, Failure> {
    match args.constants.as_str() {
        "paper" => Ok(ConstantsProfile::paper()),
        "toy" => Ok(ConstantsProfile::toy()),
        path => Ok(ConstantsProfile::load(Path::new(path))?),
    }
}

fn violations_failure(list: &[Violation]) -> Failure {
    Failure {
        code: 3,
        kind: "invalid_graph",
        message: format!("graph violates {} condition(s)", list.len()),
        detail: json!({ "violations": list }),
    }
}

/// Loading only parses; the GCD graph conditions are checked here.
fn checked(g: GcdGraph) -> Result<GcdGraph, Failure> {
    let v = g.validate();
    if v.is_empty() {
        Ok(g)
    } else {
        Err(violations_failure(&v))
    }
}

fn run_gcd(cmd: GcdCommand) -> Outcome {
    match cmd {
        GcdCommand::Validate { graph } => {
            let g = checked(load_graph(&graph)?)?;
            let summary = json!({
                "valid": true,
                "V": g.v().len(),
                "W": g.w().len(),
                "E": g.e().len(),
                "mu_E": rat_string(&g.mu_e()),
                "delta": rat_string(&gg::edge_density(&g)),
            });
            print!("{}", document("dsc.validate/1", &summary)?);
            Ok(())
        }
        GcdCommand::Quality { graph, constants, output } => {
            let g = checked(load_graph(&graph)?)?;
            let consts = load_constants(&constants)?;
            let q = gg::quality(&g, &consts);
            let body = json!({ "profile": consts.label, "quality": q, "delta": rat_string(&gg::edge_density(&g)) });
            emit(&output, document("dsc.quality/1", &body)?.as_bytes())
        }
        GcdCommand::Step { graph, constants, prime, output } => {
            let g = checked(load_graph(&graph)?)?;
            let consts = load_constants(&constants)?;
            let remaining = gg::remaining_primes(&g, &consts);
            let p = match prime.or_else(|| remaining.iter().next().copied()) {
                Some(p) => p,
                None => {
                    return Err(Failure::from(Error::Precondition(
                        "no remaining prime: the graph is already terminal for this profile".into(),
                    )))
                }
            };
            let step = gg::quality_increment_step(&g, p, &consts)?;
            let body = json!({ "step": step, "graph": step.graph });
            emit(&output, document("dsc.step/1", &body)?.as_bytes())
        }
        GcdCommand::Compress { graph, constants, t, csv, output } => {
            let g = checked(load_graph(&graph)?)?;
            let consts = load_constants(&constants)?;
            let t = rational("--t", &t)?;
            let c = gg::compress(&g, &t, &consts)?;
            if let Some(path) = csv {
                let mut buf = Vec::new();
                gg::write_trace_csv(&c.trace, &mut buf)?;
                fs::write(&path, buf).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
            }
            emit(&output, document("dsc.compress/1", &c)?.as_bytes())?;
            let failed = c.trace.failed_steps();
            if failed.is_empty() {
                Ok(())
            } else if consts.label != "paper" {
                // Scaled-down profiles carry no guarantee; the trace records the failure.
                eprintln!("dsc: note: quality certification failed at step(s) {failed:?} under profile {}", consts.label);
                Ok(())
            } else {
                Err(Failure {
                    code: 3,
                    kind: "quality_check",
                    message: format!("quality certification failed at step(s) {failed:?} under profile {}", consts.label),
                    detail: json!({ "failed_steps": failed }),
                })
            }
        }
        GcdCommand::SpecialCase { q, n, ladder, support, delta_link, constants, output } => {
            let n = rational("--N", &n)?;
            let consts = load_constants(&constants)?;
            let ladder: Vec<BigRational> =
                ladder.split(',').filter(|s| !s.trim().is_empty()).map(|s| rational("--ladder", s)).collect::<Result<_, _>>()?;
            let s: Vec<u64> = match support {
                Some(path) => read(&path)?
                    .split_whitespace()
                    .map(|w| w.parse::<u64>().map_err(|_| Failure::usage(format!("{}: bad integer '{w}'", path.display()))))
                    .collect::<Result<_, _>>()?,
                None => gg::squarefree_support(q, &n)?,
            };
            let report = gg::special_case_harness(q, &n, &s, &ladder, &consts, delta_link)?;
            emit(&output, document("dsc.special_case/1", &report)?.as_bytes())
        }
    }
}
