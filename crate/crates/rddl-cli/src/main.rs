//! `rddl`: check proof scripts, simulate models, falsify RDD formulas and print
//! Lie derivatives or synchronized dynamics.
//!
//! Exit codes: 0 success, 1 conditional certificate, 2 proof rejected,
//! 3 usage, parse or numeric error, 4 counterexample found.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rddl::algebra::{lie_derivative_n, normalize, sync_vector_field, VectorField};
use rddl::corpus::{load_model, load_script, Model, ModelBody};
use rddl::kernel::{check_proof, KernelConfig, Status};
use rddl::semantics::{
    falsify_rdd, integrate_flow, Expr, simulate_synchronized, Flow, Numerics, SampleBox, State, Termination, Trajectory,
};
use rddl::syntax::{parse_term, CmpOp, Dynamics, Formula, RddFormula, Term};

#[derive(Parser)]
#[command(name = "rddl", version, about = "Proof checker and numeric oracle for relational differential dynamic logic")]
struct Cli {
    #[command(flatten)]
    run: RunConfig,
    #[command(subcommand)]
    command: Command,
}

/// Flags override `RDDL_*` variables, which override the defaults.
#[derive(Args, Clone, Debug)]
struct RunConfig {
    /// RK4 step size.
    #[arg(long, global = true, env = "RDDL_STEP", default_value_t = 1e-4)]
    step: f64,
    /// Integration horizon.
    #[arg(long, global = true, env = "RDDL_HORIZON", default_value_t = 10.0)]
    horizon: f64,
    /// Initial states tried by the falsifier.
    #[arg(long, global = true, env = "RDDL_SAMPLES", default_value_t = 500)]
    samples: usize,
    #[arg(long, global = true, env = "RDDL_SEED", default_value_t = 42)]
    seed: u64,
    /// Robustness slack for numeric checks.
    #[arg(long, global = true, env = "RDDL_TOLERANCE", default_value_t = 1e-6)]
    tolerance: f64,
}

impl RunConfig {
    fn validate(&self) -> Result<(), Failure> {
        let positive = [("step", self.step), ("tolerance", self.tolerance)];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Failure::usage(format!("--{name} must be positive, got {v}")));
            }
        }
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(Failure::usage(format!("--horizon must be nonnegative, got {}", self.horizon)));
        }
        if self.samples == 0 {
            return Err(Failure::usage("--samples must be positive"));
        }
        Ok(())
    }

    fn numerics(&self) -> Numerics {
        Numerics { step: self.step, horizon: self.horizon, tolerance: self.tolerance, ..Numerics::default() }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a proof script and print its certificate.
    Check {
        script: PathBuf,
        /// Also fail (exit 1) on experimental rule variants.
        #[arg(long)]
        strict: bool,
    },
    /// Integrate a model and print its trajectory as CSV.
    Simulate {
        model: PathBuf,
        /// Initial values, overriding those fixed by the assumptions.
        #[arg(long, value_delimiter = ',', value_parser = parse_binding)]
        init: Vec<(String, f64)>,
        /// Stop where the exit term reaches this level instead of the model's value.
        #[arg(long, allow_negative_numbers = true)]
        exit_level: Option<f64>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Run the synchronized dynamics of an RDD model, with a residual column.
        #[arg(long)]
        sync: bool,
        /// Which side of an RDD model to integrate.
        #[arg(long, value_enum, default_value_t = SideArg::Left)]
        side: SideArg,
    },
    /// Search for initial states that violate an RDD model's postcondition.
    Falsify {
        model: PathBuf,
        /// Sampling box: `lo:hi` for every variable, or `var=lo:hi` for one.
        #[arg(long = "box", value_delimiter = ',', allow_hyphen_values = true)]
        sample_box: Vec<String>,
    },
    /// Print the n-th Lie derivative of a term along a model's dynamics.
    Lie {
        model: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        term: String,
        #[arg(long, default_value_t = 1)]
        order: u32,
        #[arg(long, value_enum, default_value_t = SideArg::Left)]
        side: SideArg,
    },
    /// Print the synchronized dynamics of an RDD model.
    Sync { model: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SideArg {
    Left,
    Right,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl fmt::Display) -> Failure {
        Failure { code: 3, message: message.to_string() }
    }
}

fn parse_binding(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got {s}"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("{v} is not a number"))?;
    Ok((k.trim().to_string(), v))
}

fn parse_range(s: &str) -> Result<(f64, f64), Failure> {
    let bad = || Failure::usage(format!("expected lo:hi, got {s}"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo <= hi) {
        return Err(Failure::usage(format!("empty range {s}")));
    }
    Ok((lo, hi))
}

fn sample_box(items: &[String]) -> Result<SampleBox, Failure> {
    let mut sbox = SampleBox::default();
    for item in items {
        match item.split_once('=') {
            Some((var, range)) => {
                let (lo, hi) = parse_range(range)?;
                sbox = sbox.with(var.trim(), lo, hi);
            }
            None => sbox.default = parse_range(item)?,
        }
    }
    Ok(sbox)
}

fn model(path: &PathBuf) -> Result<Model, Failure> {
    load_model(path).map_err(Failure::usage)
}

fn rdd(model: &Model, command: &str) -> Result<RddFormula, Failure> {
    match &model.body {
        ModelBody::Pair(a) => Ok(a.clone()),
        ModelBody::Single { .. } => Err(Failure::usage(format!("{command} needs an rdd model"))),
    }
}

fn side_dynamics(model: &Model, side: SideArg) -> Dynamics {
    match (&model.body, side) {
        (ModelBody::Single { dynamics, .. }, _) => dynamics.clone(),
        (ModelBody::Pair(a), SideArg::Left) => a.left().clone(),
        (ModelBody::Pair(a), SideArg::Right) => a.right().clone(),
    }
}

/// The exit equation that belongs to one side: `lhs = rhs` where only `lhs` evolves.
fn side_exit(model: &Model, side: SideArg) -> Option<(Term, Term)> {
    let (exit, own, other) = match &model.body {
        ModelBody::Single { dynamics, exit } => (exit.clone()?, dynamics.bound_variables(), Default::default()),
        ModelBody::Pair(a) => {
            let (own, other) = match side {
                SideArg::Left => (a.left(), a.right()),
                SideArg::Right => (a.right(), a.left()),
            };
            (a.exit().clone(), own.bound_variables(), other.bound_variables())
        }
    };
    exit.conjuncts().into_iter().find_map(|c| {
        let vars = c.free_variables();
        let Formula::Cmp(l, CmpOp::Eq, r) = c else { return None };
        if !vars.is_disjoint(&other) || vars.is_disjoint(&own) {
            return None;
        }
        if r.free_variables().is_disjoint(&own) {
            Some((l, r))
        } else {
            Some((r, l))
        }
    })
}

fn initial_state(model: &Model, init: &[(String, f64)]) -> State {
    let mut s = model.initial_state();
    s.extend(init.iter().cloned());
    s
}

fn emit_csv(csv: String, path: Option<&PathBuf>) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, csv).map_err(|e| Failure::usage(format!("cannot write {}: {e}", p.display()))),
        // A closed pipe (e.g. `| head`) is not an error.
        None => {
            let _ = std::io::stdout().lock().write_all(csv.as_bytes());
            Ok(())
        }
    }
}

fn header_only(t: &Trajectory, extra: &[(String, Vec<f64>)]) -> String {
    let names = t.vars.iter().chain(extra.iter().map(|(n, _)| n));
    format!("t,{}\n", names.cloned().collect::<Vec<_>>().join(","))
}

fn cmd_check(path: &PathBuf, strict: bool, run: &RunConfig) -> Result<u8, Failure> {
    let script = load_script(path).map_err(Failure::usage)?;
    let cfg = KernelConfig { numerics: run.numerics(), ..KernelConfig::default() };
    match check_proof(&script.sequent, &script.proof, &cfg) {
        Ok(c) => {
            println!("{}", c.render());
            Ok(match c.status {
                Status::Conditional => 1,
                Status::Unconditional if strict && !c.experimental.is_empty() => 1,
                Status::Unconditional => 0,
            })
        }
        Err(e) => {
            println!("status: rejected\nerror: {e}");
            Ok(2)
        }
    }
}

fn cmd_simulate(
    path: &PathBuf,
    init: &[(String, f64)],
    exit_level: Option<f64>,
    csv: Option<&PathBuf>,
    sync: bool,
    side: SideArg,
    run: &RunConfig,
) -> Result<u8, Failure> {
    let m = model(path)?;
    let x0 = initial_state(&m, init);
    if sync {
        let a = rdd(&m, "--sync")?;
        let out = simulate_synchronized(&a, &x0, &State::new(), run.step, run.horizon).map_err(Failure::usage)?;
        let extra = vec![("residual".to_string(), out.residual.clone())];
        let text = if run.horizon == 0.0 { header_only(&out.trajectory, &extra) } else { out.trajectory.to_csv(&extra) };
        eprintln!("max_residual: {:e}", out.max_residual);
        return emit_csv(text, csv).map(|_| 0);
    }
    let d = side_dynamics(&m, side);
    let flow = Flow::new(&d).map_err(Failure::usage)?;
    let start = flow.initial(&x0).map_err(Failure::usage)?;
    let compile = |t: &Term| flow.compile(t, &x0).map_err(Failure::usage);
    let event = match (side_exit(&m, side), exit_level) {
        (Some((g, _)), Some(level)) => Some(Expr::Sub(Box::new(compile(&g)?), Box::new(Expr::Const(level)))),
        (Some((g, level)), None) => Some(Expr::Sub(Box::new(compile(&g)?), Box::new(compile(&level)?))),
        (None, Some(_)) => return Err(Failure::usage("--exit-level given but the model has no exit for this side")),
        (None, None) => None,
    };
    let t = integrate_flow(&flow, start, run.step, run.horizon, event.as_ref()).map_err(Failure::usage)?;
    let mut flag = vec![0.0; t.len()];
    if let (Termination::ExitEvent(at), Some(last)) = (t.terminated_by, flag.last_mut()) {
        *last = 1.0;
        eprintln!("exit at t = {at}");
    }
    let extra = vec![("exit".to_string(), flag)];
    let text = if run.horizon == 0.0 { header_only(&t, &extra) } else { t.to_csv(&extra) };
    emit_csv(text, csv).map(|_| 0)
}

fn cmd_falsify(path: &PathBuf, sbox: &[String], run: &RunConfig) -> Result<u8, Failure> {
    let m = model(path)?;
    let a = rdd(&m, "falsify")?;
    let sbox = sample_box(sbox)?;
    let out = falsify_rdd(&a, &m.assumptions, run.samples, &sbox, &run.numerics(), run.seed).map_err(Failure::usage)?;
    println!("seed: {}", run.seed);
    println!("checked: {}", out.checked);
    println!("skipped: {}", out.skipped);
    match out.counterexample {
        Some(c) => {
            println!("{c}");
            Ok(4)
        }
        None => {
            println!("counterexample: none");
            Ok(0)
        }
    }
}

fn cmd_lie(path: &PathBuf, term: &str, order: u32, side: SideArg) -> Result<u8, Failure> {
    let m = model(path)?;
    let g = parse_term(term).map_err(Failure::usage)?;
    let f = VectorField::of(&side_dynamics(&m, side)).map_err(Failure::usage)?;
    let g = normalize(&g).map_err(Failure::usage)?;
    println!("{}", lie_derivative_n(&f, &g.value, order).to_term());
    Ok(0)
}

fn cmd_sync(path: &PathBuf) -> Result<u8, Failure> {
    let m = model(path)?;
    let a = rdd(&m, "sync")?;
    let s = sync_vector_field(&a).map_err(Failure::usage)?;
    println!("{}", s.dynamics);
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    cli.run.validate()?;
    let run = &cli.run;
    match &cli.command {
        Command::Check { script, strict } => cmd_check(script, *strict, run),
        Command::Simulate { model, init, exit_level, csv, sync, side } => {
            cmd_simulate(model, init, *exit_level, csv.as_ref(), *sync, *side, run)
        }
        Command::Falsify { model, sample_box } => cmd_falsify(model, sample_box, run),
        Command::Lie { model, term, order, side } => cmd_lie(model, term, *order, *side),
        Command::Sync { model } => cmd_sync(model),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
