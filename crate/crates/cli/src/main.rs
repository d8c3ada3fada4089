use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use pcteq::benchgen::{self, Manifest, ManifestEntry, Target};
use pcteq::circuit::{Circuit, SEMANTIC_LIMIT};
use pcteq::closeness::{self, Decision, RunConfig, SampleSizeMode, TeqParams};
use pcteq::engine::{IntAssignment, OracleMode, WeightedCircuit};
use pcteq::exec::{self, Execution};
use pcteq::formats;
use pcteq::oracle;
use pcteq::rational::{parse_rational, to_f64, to_text, Rational};
use pcteq::weights::{self, WeightFn};

mod record;

use record::{Output, Params, RunRecord};

/// Exit status for malformed command lines.
const EXIT_USAGE: u8 = 64;
const EXIT_REJECT: u8 = 1;
const EXIT_ERROR: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "pcteq", version, about = "Counting, sampling and closeness testing for weighted d-DNNF circuits")]
struct Cli {
    /// Seed for every random choice; chosen and reported when omitted.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Output::Text)]
    format: Output,
    /// Sample-size formula for `teq`.
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Experiment)]
    mode: ModeArg,
    /// Exchange the two circuits of a pair (`teq` samples the first).
    #[arg(long, global = true)]
    swap: bool,
    /// Worker threads; 1 runs sequentially.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Conservative,
    Experiment,
}

impl From<ModeArg> for SampleSizeMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Conservative => SampleSizeMode::Conservative,
            ModeArg::Experiment => SampleSizeMode::Experiment,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct Pc {
    /// Circuit in `.nnf` format.
    nnf: PathBuf,
    /// Weight file; all weights 1/2 when omitted.
    weights: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct Pair {
    nnf1: PathBuf,
    w1: PathBuf,
    nnf2: PathBuf,
    w2: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact weighted model count.
    Count(Pc),
    /// Exact weighted samples.
    Sample {
        #[command(flatten)]
        pc: Pc,
        #[arg(short = 'N', long, default_value_t = 10)]
        count: u64,
    },
    /// Exact total variation distance by enumeration.
    TvExact(Pair),
    /// Closeness test: accept if d_TV <= eps, reject if d_TV >= eta.
    Teq {
        #[command(flatten)]
        pair: Pair,
        #[arg(short = 'e', long)]
        eps: String,
        #[arg(short = 'n', long)]
        eta: String,
        #[arg(short = 'd', long)]
        delta: String,
        /// Use the noisy approximate oracles at the requested tolerances.
        #[arg(long)]
        noisy: bool,
        /// Also compute the exact distance (enumeration) for the report.
        #[arg(long)]
        with_dtv: bool,
    },
    /// Equivalence test by network polynomial evaluation.
    Peq {
        #[command(flatten)]
        pair: Pair,
        #[arg(short = 'd', long)]
        delta: String,
    },
    /// Generate benchmark pairs and a manifest.
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        pairs: usize,
        #[arg(long, default_value_t = 14)]
        vars: usize,
        /// Defaults to round(4.1 * vars).
        #[arg(long)]
        clauses: Option<usize>,
        #[arg(long, default_value_t = 8)]
        precision: u32,
        /// `close=<eps>` or `far=<eta>`.
        #[arg(long)]
        target: String,
    },
    /// Compile a DIMACS CNF into a decision-DNNF.
    Compile {
        cnf: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Structural properties of a circuit.
    Check {
        nnf: PathBuf,
        /// Largest n for the enumeration-based determinism check.
        #[arg(long, default_value_t = SEMANTIC_LIMIT)]
        semantic_limit: usize,
    },
    /// Weighted to unweighted reduction with dyadic weights.
    Reduce {
        #[command(flatten)]
        pc: Pc,
        #[arg(short, long, default_value_t = 8)]
        precision: u32,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Evaluate the network polynomial at an integer point.
    Netpoly {
        #[command(flatten)]
        pc: Pc,
        /// Comma-separated rational coordinates; drawn from [m]^n when omitted.
        #[arg(long, value_delimiter = ',')]
        theta: Option<Vec<String>>,
        #[arg(long, default_value_t = 100)]
        m: u64,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_circuit(path: &Path) -> Result<Circuit> {
    formats::parse_nnf(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_weights(path: Option<&Path>, n: usize) -> Result<WeightFn> {
    match path {
        Some(p) => formats::parse_weights(&read(p)?, n).with_context(|| format!("parsing {}", p.display())),
        None => Ok(WeightFn::uniform(n)),
    }
}

fn load_pc(nnf: &Path, w: Option<&Path>) -> Result<(Circuit, WeightFn)> {
    let c = load_circuit(nnf)?;
    let w = load_weights(w, c.n_vars())?;
    Ok((c, w))
}

fn rational(name: &str, text: &str) -> Result<Rational> {
    parse_rational(text).map_err(|e| anyhow!("--{name}: {e}"))
}

fn path_text(p: &Path) -> String {
    p.display().to_string()
}

fn benchmark_name(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

struct Ctx {
    seed: u64,
    mode: SampleSizeMode,
    swap: bool,
    execution: Execution,
}

fn decision_text(d: Decision) -> &'static str {
    match d {
        Decision::Accept => "accept",
        Decision::Reject => "reject",
    }
}

fn ordered_pair(pair: &Pair, swap: bool) -> Result<[(Circuit, WeightFn, PathBuf, PathBuf); 2]> {
    let (c1, w1) = load_pc(&pair.nnf1, Some(&pair.w1))?;
    let (c2, w2) = load_pc(&pair.nnf2, Some(&pair.w2))?;
    let a = (c1, w1, pair.nnf1.clone(), pair.w1.clone());
    let b = (c2, w2, pair.nnf2.clone(), pair.w2.clone());
    Ok(if swap { [b, a] } else { [a, b] })
}

fn inputs_of(pair: &[(Circuit, WeightFn, PathBuf, PathBuf); 2]) -> Vec<String> {
    pair.iter().flat_map(|(_, _, n, w)| [path_text(n), path_text(w)]).collect()
}

fn run(cmd: &Command, ctx: &Ctx, rec: &mut RunRecord) -> Result<Option<Decision>> {
    match cmd {
        Command::Count(pc) => {
            let (c, w) = load_pc(&pc.nnf, pc.weights.as_deref())?;
            rec.inputs = vec![path_text(&pc.nnf)];
            rec.inputs.extend(pc.weights.as_deref().map(path_text));
            let pc = WeightedCircuit::new(&c, &w)?;
            rec.result = json!({ "wmc": to_text(pc.wmc()), "wmc_approx": to_f64(pc.wmc()) });
            rec.value = Some(to_text(pc.wmc()));
        }
        Command::Sample { pc, count } => {
            let (c, w) = load_pc(&pc.nnf, pc.weights.as_deref())?;
            rec.inputs = vec![path_text(&pc.nnf)];
            rec.inputs.extend(pc.weights.as_deref().map(path_text));
            rec.params.seed = Some(ctx.seed);
            let wc = WeightedCircuit::new(&c, &w)?;
            let draws: Vec<String> = exec::map(ctx.execution, *count, |i| {
                let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
                rng.set_stream(i);
                wc.sample(&mut rng).map(|s| s.to_string())
            })
            .into_iter()
            .collect::<Result<_, _>>()?;
            rec.value = Some(format!("{} samples", draws.len()));
            rec.result = json!({ "samples": draws });
        }
        Command::TvExact(pair) => {
            let p = ordered_pair(pair, ctx.swap)?;
            rec.inputs = inputs_of(&p);
            let d = oracle::tv_exact(&p[0].0, &p[0].1, &p[1].0, &p[1].1)?;
            rec.result = json!({ "dtv": to_text(&d), "dtv_approx": to_f64(&d) });
            rec.dtv = Some(d.clone());
            rec.value = Some(to_text(&d));
        }
        Command::Teq { pair, eps, eta, delta, noisy, with_dtv } => {
            let p = ordered_pair(pair, ctx.swap)?;
            rec.inputs = inputs_of(&p);
            rec.benchmark = benchmark_name(&p[0].2);
            let params = TeqParams::new(rational("eps", eps)?, rational("eta", eta)?, rational("delta", delta)?, ctx.mode)?;
            rec.params = Params::teq(&params, ctx.seed);
            let pc1 = WeightedCircuit::new(&p[0].0, &p[0].1)?;
            let pc2 = WeightedCircuit::new(&p[1].0, &p[1].1)?;
            let oracle = if *noisy { OracleMode::Noisy { key: ctx.seed } } else { OracleMode::Exact };
            let config = RunConfig { oracle, execution: ctx.execution, seed: ctx.seed };
            let out = closeness::teq(&pc1, &pc2, &params, &config)?;
            let report = closeness::tv_bound_report(&out.trace, &params);
            let v = &out.verdict;
            rec.m = Some(v.m);
            rec.skipped = Some(v.skipped);
            rec.verdict = Some(decision_text(v.decision).into());
            rec.result = json!({
                "statistic": to_text(&v.statistic),
                "threshold": to_text(&v.threshold),
                "estimate": to_text(&report.estimate),
                "estimate_approx": to_f64(&report.estimate),
                "k1": to_text(&out.trace.k1),
                "k2": to_text(&out.trace.k2),
                "noisy": noisy,
            });
            if *with_dtv {
                let d = oracle::tv_exact(&p[0].0, &p[0].1, &p[1].0, &p[1].1)?;
                rec.result["dtv"] = json!(to_text(&d));
                rec.dtv = Some(d);
            }
            return Ok(Some(v.decision));
        }
        Command::Peq { pair, delta } => {
            let p = ordered_pair(pair, ctx.swap)?;
            rec.inputs = inputs_of(&p);
            rec.benchmark = benchmark_name(&p[0].2);
            let delta = rational("delta", delta)?;
            rec.params.delta = Some(to_text(&delta));
            rec.params.seed = Some(ctx.seed);
            let pc1 = WeightedCircuit::new(&p[0].0, &p[0].1)?;
            let pc2 = WeightedCircuit::new(&p[1].0, &p[1].1)?;
            let out = closeness::peq(&pc1, &pc2, &delta, ctx.seed)?;
            rec.m = Some(out.m);
            rec.verdict = Some(decision_text(out.decision).into());
            rec.result = json!({
                "theta": out.theta.values(),
                "value1": to_text(&out.value1),
                "value2": to_text(&out.value2),
            });
            return Ok(Some(out.decision));
        }
        Command::Gen { out, pairs, vars, clauses, precision, target } => {
            rec.params.seed = Some(ctx.seed);
            let manifest = generate(out, *pairs, *vars, *clauses, *precision, target, ctx.seed)?;
            rec.inputs = vec![path_text(out)];
            rec.value = Some(format!("{} pairs", manifest.pairs.len()));
            rec.result = serde_json::to_value(&manifest)?;
        }
        Command::Compile { cnf, output } => {
            rec.inputs = vec![path_text(cnf)];
            let parsed = formats::parse_dimacs_cnf(&read(cnf)?).with_context(|| format!("parsing {}", cnf.display()))?;
            let c = benchgen::compile_decision_dnnf(&parsed)?;
            let text = formats::write_nnf(&c);
            match output {
                Some(o) => std::fs::write(o, &text).with_context(|| format!("writing {}", o.display()))?,
                None if matches!(rec.format, Output::Text) => print!("{text}"),
                None => {}
            }
            rec.result = json!({ "nodes": c.node_count(), "edges": c.edge_count(), "satisfiable": !c.is_false() });
            if output.is_none() && !matches!(rec.format, Output::Text) {
                rec.result["nnf"] = json!(text);
            }
            rec.value = Some(format!("{} nodes", c.node_count()));
        }
        Command::Check { nnf, semantic_limit } => {
            rec.inputs = vec![path_text(nnf)];
            let c = load_circuit(nnf)?;
            let report = c.report(*semantic_limit);
            rec.result = serde_json::to_value(report)?;
            rec.result["n_vars"] = json!(c.n_vars());
            rec.result["nodes"] = json!(c.node_count());
            rec.result["edges"] = json!(c.edge_count());
            rec.value = Some(format!(
                "decomposable={} deterministic={:?} smooth={}",
                report.decomposable, report.deterministic, report.smooth
            ));
        }
        Command::Reduce { pc, precision, output } => {
            let (c, w) = load_pc(&pc.nnf, pc.weights.as_deref())?;
            rec.inputs = vec![path_text(&pc.nnf)];
            rec.inputs.extend(pc.weights.as_deref().map(path_text));
            let approx = weights::dyadic_approx(&w, *precision)?;
            let reduced = weights::weighted_to_unweighted(&c, &approx.weights)?;
            let text = formats::write_nnf(&reduced);
            match output {
                Some(o) => std::fs::write(o, &text).with_context(|| format!("writing {}", o.display()))?,
                None if matches!(rec.format, Output::Text) => print!("{text}"),
                None => {}
            }
            rec.result = json!({
                "n_vars": reduced.n_vars(),
                "nodes": reduced.node_count(),
                "precision": precision,
                "max_relative_error": to_text(&approx.max_relative_error),
            });
            rec.value = Some(format!("{} vars, {} nodes", reduced.n_vars(), reduced.node_count()));
        }
        Command::Netpoly { pc, theta, m } => {
            let (c, w) = load_pc(&pc.nnf, pc.weights.as_deref())?;
            rec.inputs = vec![path_text(&pc.nnf)];
            rec.inputs.extend(pc.weights.as_deref().map(path_text));
            let wc = WeightedCircuit::new(&c, &w)?;
            let point: Vec<Rational> = match theta {
                Some(values) => values.iter().map(|t| rational("theta", t)).collect::<Result<_>>()?,
                None => {
                    rec.params.seed = Some(ctx.seed);
                    let theta = IntAssignment::random(c.n_vars(), *m, &mut ChaCha8Rng::seed_from_u64(ctx.seed));
                    theta.values().iter().map(|&t| Rational::from_integer(t.into())).collect()
                }
            };
            let value = wc.netpoly_at(&point)?;
            rec.result = json!({ "theta": point.iter().map(to_text).collect::<Vec<_>>(), "value": to_text(&value) });
            rec.value = Some(to_text(&value));
        }
    }
    Ok(None)
}

fn parse_target(text: &str) -> Result<Target> {
    let (kind, value) = text.split_once('=').ok_or_else(|| anyhow!("--target expects close=<eps> or far=<eta>"))?;
    let value = rational("target", value)?;
    match kind {
        "close" => Ok(Target::Close(value)),
        "far" => Ok(Target::Far(value)),
        _ => bail!("--target kind must be `close` or `far`, got `{kind}`"),
    }
}

/// Instances tried per pair before a target is declared unreachable.
const GEN_ATTEMPTS: u32 = 20;

fn generate(
    out: &Path,
    pairs: usize,
    vars: usize,
    clauses: Option<usize>,
    precision: u32,
    target: &str,
    seed: u64,
) -> Result<Manifest> {
    let target = parse_target(target)?;
    let (kind, value) = match &target {
        Target::Close(e) => ("close", e),
        Target::Far(e) => ("far", e),
    };
    let clauses = clauses.unwrap_or_else(|| benchgen::default_clause_count(vars));
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(pairs);
    for i in 0..pairs {
        let mut last_err = None;
        let mut made = None;
        for _ in 0..GEN_ATTEMPTS {
            let (cnf, circuit) = benchgen::satisfiable_instance(vars, clauses, 1000, &mut rng)?;
            let w1 = benchgen::random_weights(vars, &mut rng, precision)?;
            match benchgen::make_pair_with_target(&circuit, &w1, &target, &mut rng) {
                Ok(pair) => {
                    made = Some((cnf, pair));
                    break;
                }
                Err(e @ benchgen::BenchError::Infeasible(_)) => last_err = Some(e),
                Err(e) => return Err(e.into()),
            }
        }
        let Some((cnf, pair)) = made else {
            return Err(last_err.map(anyhow::Error::from).unwrap_or_else(|| anyhow!("generation failed")));
        };
        let name = format!("pair_{i:03}");
        let file = |ext: &str| format!("{name}.{ext}");
        let write = |ext: &str, text: String| -> Result<()> {
            let p = out.join(file(ext));
            std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
        };
        write("cnf", formats::write_dimacs_cnf(&cnf))?;
        write("nnf", formats::write_nnf(&pair.circuit))?;
        write("w1", formats::write_weights(&pair.w1))?;
        write("w2", formats::write_weights(&pair.w2))?;
        entries.push(ManifestEntry {
            name: name.clone(),
            cnf: file("cnf"),
            nnf: file("nnf"),
            w1: file("w1"),
            w2: file("w2"),
            n_vars: vars,
            clauses,
            var: pair.var.get(),
            target: kind.into(),
            target_value: to_text(value),
            dtv: to_text(&pair.dtv_closed_form),
            dtv_approx: to_f64(&pair.dtv_closed_form),
        });
    }
    let manifest = Manifest {
        seed,
        precision,
        clause_ratio: format!("{clauses}/{vars}"),
        pairs: entries,
    };
    let path = out.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(manifest)
}

fn subcommand_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Count(_) => "count",
        Command::Sample { .. } => "sample",
        Command::TvExact(_) => "tv-exact",
        Command::Teq { .. } => "teq",
        Command::Peq { .. } => "peq",
        Command::Gen { .. } => "gen",
        Command::Compile { .. } => "compile",
        Command::Check { .. } => "check",
        Command::Reduce { .. } => "reduce",
        Command::Netpoly { .. } => "netpoly",
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(EXIT_USAGE);
    }
    // Randomized subcommands report the seed in their output.
    let seed = cli.seed.unwrap_or_else(rand::random);
    exec::configure_threads(cli.threads);
    let ctx = Ctx {
        seed,
        mode: cli.mode.into(),
        swap: cli.swap,
        execution: if cli.threads > 1 { Execution::Parallel } else { Execution::Sequential },
    };
    let mut rec = RunRecord::new(subcommand_name(&cli.command), cli.format);
    let start = Instant::now();
    let outcome = run(&cli.command, &ctx, &mut rec);
    rec.seconds = start.elapsed().as_secs_f64();
    match outcome {
        Ok(decision) => {
            rec.print();
            match decision {
                Some(Decision::Reject) => ExitCode::from(EXIT_REJECT),
                _ => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
