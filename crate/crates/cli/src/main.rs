//! `qfactor`: factor integers by compiling them to binary minimization.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qfactor::energy::{build_energy, export_qubo, quadratize, EnergyModel};
use qfactor::pipeline::{run_pipeline, run_sweep, strip_twos, PipelineOptions, SolverChoice, SweepOptions};
use qfactor::simplify::{reduce, ReduceOptions, ReductionReport};
use qfactor::solver::{spectrum_with_cap, AnnealParams, DEFAULT_CAP};
use qfactor::tablegen::{build_system, plan_layouts, EquationSystem, FactorLayout};
use qfactor::{parse_poly, Error, Var};

/// Environment variable holding the default worker-thread count.
const THREADS_ENV: &str = "QFACTOR_THREADS";

#[derive(Parser)]
#[command(name = "qfactor", version, about = "Factor integers via pseudo-Boolean minimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Emit JSON where the command supports it.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Args, Clone)]
struct Instance {
    /// The number to factor.
    n: u64,
    /// Factor bit lengths, e.g. 4x4 or 3x3x3.
    #[arg(long)]
    bits: Option<FactorLayout>,
    /// Number of factors when --bits is not given.
    #[arg(long, default_value_t = 2)]
    factors: usize,
    /// Deepest probing level.
    #[arg(long, default_value_t = 2)]
    depth: u32,
    /// Substitute y = 1 - x for every surviving x + y - 1.
    #[arg(long)]
    complement: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Print the column equations of the multiplication table.
    Compile {
        #[command(flatten)]
        inst: Instance,
        /// Print the equations (the default when no other output is asked for).
        #[arg(long)]
        emit_equations: bool,
        /// Also reduce and print every deduction with its provenance.
        #[arg(long)]
        emit_trace: bool,
    },
    /// Reduce the equations and print the remaining system.
    Reduce {
        #[command(flatten)]
        inst: Instance,
    },
    /// Factor: reduce, build the energy, find its ground states, decode.
    Solve {
        #[command(flatten)]
        inst: Instance,
        /// Use simulated annealing instead of exhaustive enumeration.
        #[arg(long)]
        anneal: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        restarts: u32,
        #[arg(long, default_value_t = 500)]
        sweeps: u32,
        /// Widest model to enumerate.
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
        /// Include per-stage timings (reports then differ between runs).
        #[arg(long)]
        timings: bool,
    },
    /// Print the energy of every basis state of the reduced model.
    Spectrum {
        #[command(flatten)]
        inst: Instance,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
    },
    /// Quadratize the reduced model and write it as a QUBO file.
    ExportQubo {
        #[command(flatten)]
        inst: Instance,
    },
    /// Check that the given factors multiply to n.
    Verify { n: u64, factors: Vec<u64> },
    /// Reduce every product of equal-length primes differing in d bits.
    Sweep {
        /// Bit length of both primes.
        #[arg(long)]
        bits: u32,
        /// Number of differing bit positions.
        #[arg(long, default_value_t = 2)]
        diff: u32,
        /// Initial probing depth.
        #[arg(long, default_value_t = 2)]
        depth: u32,
        /// Deepest probing level tried for instances above 2d free variables.
        #[arg(long, default_value_t = 5)]
        max_depth: u32,
        /// Reduce only a seeded random sample of this many pairs.
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the spectrum of a polynomial given as text.
    ReplayPoly {
        poly: String,
        /// Basis order, e.g. p1,p2,q1,q2 (default: variable order).
        #[arg(long, value_delimiter = ',')]
        order: Option<Vec<String>>,
    },
}

/// Failure with its exit status.
struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Infeasible { .. } => 2,
            Error::Inconsistent(_) | Error::MissingVar(_) => 4,
            _ => 3,
        };
        Failure { code, msg: e.to_string() }
    }
}

type Outcome = Result<(String, u8), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    if let Some(k) = std::env::var(THREADS_ENV).ok().and_then(|s| s.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    match run(&cli) {
        Ok((text, code)) => {
            if let Some(path) = &cli.out {
                if let Err(e) = fs::write(path, &text) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return ExitCode::from(3);
                }
            } else {
                print!("{text}");
            }
            ExitCode::from(code)
        }
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn odd_part(n: u64) -> u64 {
    let (odd, twos) = strip_twos(n);
    if twos > 0 {
        eprintln!("notice: {n} is even; dividing out 2^{twos} and factoring {odd}");
    }
    odd
}

fn reduce_opts(inst: &Instance) -> ReduceOptions {
    ReduceOptions { max_depth: inst.depth.max(1), complement: inst.complement }
}

fn layouts(n: u64, inst: &Instance) -> Result<Vec<FactorLayout>, Failure> {
    Ok(match &inst.bits {
        Some(l) => vec![l.clone()],
        None => plan_layouts(n, inst.factors)?,
    })
}

/// The first layout whose equations survive reduction.
fn reduced(inst: &Instance) -> Result<(EquationSystem, ReductionReport), Failure> {
    let n = odd_part(inst.n);
    let mut last = None;
    for layout in layouts(n, inst)? {
        let sys = build_system(n, &layout)?;
        match reduce(&sys, &reduce_opts(inst)) {
            Ok(r) => return Ok((sys, r)),
            Err(e @ Error::Infeasible { .. }) => last = Some(e),
            Err(e) => return Err(e.into()),
        }
    }
    Err(last.unwrap_or(Error::Infeasible { n, layout: "-".into(), reason: "no layout".into() }).into())
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Compile { inst, emit_equations, emit_trace } => {
            let n = odd_part(inst.n);
            let layout = layouts(n, inst)?.remove(0);
            let sys = build_system(n, &layout)?;
            let mut out = String::new();
            if *emit_equations || !*emit_trace {
                out.push_str(&sys.to_text());
            }
            if *emit_trace {
                let r = reduce(&sys, &reduce_opts(inst))?;
                out.push_str("# trace\n");
                out.push_str(&r.trace());
                out.push_str(&r.to_text());
            }
            Ok((out, 0))
        }
        Command::Reduce { inst } => {
            let (sys, r) = reduced(inst)?;
            if cli.json {
                return Ok((json(&r), 0));
            }
            Ok((format!("# n = {}, layout {}\n{}", sys.n, sys.layout, r.to_text()), 0))
        }
        Command::Solve { inst, anneal, seed, restarts, sweeps, cap, timings } => {
            let solver = if *anneal {
                SolverChoice::Anneal(AnnealParams { seed: *seed, restarts: *restarts, sweeps: *sweeps, ..Default::default() })
            } else {
                SolverChoice::Exhaustive { cap: *cap }
            };
            let opts = PipelineOptions {
                factor_count: inst.bits.as_ref().map_or(inst.factors, FactorLayout::factor_count),
                layout: inst.bits.clone(),
                reduce: reduce_opts(inst),
                solver,
                timings: *timings,
            };
            odd_part(inst.n);
            let a = run_pipeline(inst.n, &opts)?;
            let code = if a.report.verified { 0 } else { 2 };
            let text = if cli.json { a.report.to_json() + "\n" } else { a.report.to_string() };
            Ok((text, code))
        }
        Command::Spectrum { inst, cap } => {
            let (_, r) = reduced(inst)?;
            let s = spectrum_with_cap(&build_energy(&r), *cap)?;
            if cli.json {
                let v = serde_json::json!({
                    "variables": s.var_order.iter().map(Var::to_string).collect::<Vec<_>>(),
                    "energies": s.energies,
                    "groundEnergy": s.ground_energy,
                    "groundIndices": s.ground_indices,
                });
                return Ok((json(&v), 0));
            }
            Ok((s.to_string(), 0))
        }
        Command::ExportQubo { inst } => {
            let (_, r) = reduced(inst)?;
            Ok((export_qubo(&quadratize(&build_energy(&r)))?, 0))
        }
        Command::Verify { n, factors } => {
            let ok = qfactor::decode::verify(*n, factors);
            let shown: Vec<String> = factors.iter().map(u64::to_string).collect();
            let verdict = if ok { "verified" } else { "does not verify" };
            Ok((format!("{} = {n}: {verdict}\n", shown.join(" x ")), if ok { 0 } else { 2 }))
        }
        Command::Sweep { bits, diff, depth, max_depth, sample, seed } => {
            let opts = SweepOptions {
                bits: *bits,
                differing: *diff,
                depth: *depth,
                max_depth: (*max_depth).max(*depth),
                sample: *sample,
                seed: *seed,
            };
            let rows = run_sweep(&opts)?;
            let within = rows.iter().all(|r| r.free_vars <= 2 * *diff as usize && r.verified);
            if cli.json {
                return Ok((json(&rows), if within { 0 } else { 2 }));
            }
            let mut out = format!("# {} pairs of {bits}-bit primes differing in {diff} bits\n", rows.len());
            out.push_str("# n = p x q: free variables (probing depth) [x y z]\n");
            let mut patterns = std::collections::BTreeMap::new();
            for r in &rows {
                let pat = r.pattern.map_or(String::new(), |p| format!(" [{} {} {}]", p.x, p.y, p.z));
                if let Some(p) = r.pattern {
                    *patterns.entry((p.x, p.y, p.z)).or_insert(0) += 1;
                }
                let flag = if r.verified { "" } else { " UNVERIFIED" };
                out.push_str(&format!("{} = {} x {}: {} ({}){pat}{flag}\n", r.n, r.p, r.q, r.free_vars, r.depth));
            }
            let worst = rows.iter().map(|r| r.free_vars).max().unwrap_or(0);
            out.push_str(&format!("# worst: {worst} free variables (claim: at most {})\n", 2 * diff));
            for ((x, y, z), k) in patterns {
                out.push_str(&format!("# pattern x={x} y={y} z={z}: {k}\n"));
            }
            Ok((out, if within { 0 } else { 2 }))
        }
        Command::ReplayPoly { poly, order } => {
            let p = parse_poly(poly)?;
            let vars: Vec<Var> = match order {
                Some(names) => names
                    .iter()
                    .map(|s| {
                        let v = parse_poly(s.trim())?.vars();
                        match v.len() {
                            1 => Ok(v.into_iter().next().unwrap()),
                            _ => Err(Error::Parse { pos: 0, msg: format!("{s:?} is not a variable") }),
                        }
                    })
                    .collect::<Result<_, Error>>()?,
                None => p.vars().into_iter().collect(),
            };
            let s = spectrum_with_cap(&EnergyModel::from_objective(p, vars), DEFAULT_CAP)?;
            if cli.json {
                let v = serde_json::json!({ "energies": s.energies, "groundIndices": s.ground_indices });
                return Ok((json(&v), 0));
            }
            let ground: Vec<String> = s.ground_indices.iter().map(u64::to_string).collect();
            let diag: Vec<String> = s.energies.iter().map(i64::to_string).collect();
            Ok((format!("{s}diagonal: {}\nground: {} (energy {})\n", diag.join(" "), ground.join(" "), s.ground_energy), 0))
        }
    }
}
