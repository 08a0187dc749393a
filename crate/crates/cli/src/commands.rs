use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use ocs_core::formulation::{build, build_sdp, export_sdpa, Formulation, SelectionInstance};
use ocs_core::kinship::KinshipModel;
use ocs_core::pedigree::{parse_pedigree, Pedigree};
use ocs_core::solver::{solve, SolverConfig, Status};
use ocs_core::verify::{cross_check, generate_pedigree, GeneratorConfig};
use serde::Serialize;

use crate::args::{BoundSpec, CheckArgs, ExportArgs, GenerateArgs, InstanceArgs, SolveArgs, SolverArgs};

pub enum Failure {
    Core(ocs_core::Error),
    File { path: PathBuf, source: io::Error },
    Bounds(String),
    Solver(Status),
    CheckFailed(f64),
}

impl Failure {
    pub fn kind(&self) -> &'static str {
        match self {
            Failure::Core(e) => e.kind(),
            Failure::File { .. } => "io",
            Failure::Bounds(_) => "bounds",
            Failure::Solver(_) => "solver",
            Failure::CheckFailed(_) => "check_failed",
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::File { path, source } => write!(f, "{}: {source}", path.display()),
            Failure::Bounds(msg) => f.write_str(msg),
            Failure::Solver(status) => write!(f, "solver stopped with status {status}"),
            Failure::CheckFailed(delta) => write!(f, "formulations disagree (max objective delta {delta:e})"),
        }
    }
}

impl From<ocs_core::Error> for Failure {
    fn from(e: ocs_core::Error) -> Self {
        Failure::Core(e)
    }
}

/// What a successful command reports back to `main`.
pub enum Outcome {
    Done,
    Infeasible,
}

type CmdResult = Result<Outcome, Failure>;

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(|source| Failure::File {
        path: path.to_path_buf(),
        source,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|source| Failure::File {
        path: path.to_path_buf(),
        source,
    })
}

fn write_failure(path: Option<&Path>) -> impl Fn(io::Error) -> Failure + '_ {
    move |source| match path {
        Some(p) => Failure::File {
            path: p.to_path_buf(),
            source,
        },
        None => Failure::Core(source.into()),
    }
}

/// Writes `body` to `path`, or to standard output when `path` is `None`.
fn emit(path: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), Failure> {
    let fail = write_failure(path);
    match path {
        Some(p) => {
            let mut w = create(p)?;
            body(&mut w).and_then(|_| w.flush()).map_err(fail)
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            body(&mut w).and_then(|_| w.flush()).map_err(fail)
        }
    }
}

fn read_bounds(spec: &BoundSpec, ped: &Pedigree, name: &str) -> Result<Vec<f64>, Failure> {
    let path = match spec {
        BoundSpec::Scalar(v) => return Ok(vec![*v; ped.len()]),
        BoundSpec::File(path) => path,
    };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let bad = |msg: String| Failure::Bounds(format!("{} ({name} bounds): {msg}", path.display()));
    let mut values: HashMap<String, f64> = HashMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        if row.len() != 2 {
            return Err(bad(format!("expected `id,bound`, found {} fields", row.len())));
        }
        let v: f64 = row[1].parse().map_err(|_| bad(format!("malformed bound `{}`", &row[1])))?;
        if !v.is_finite() {
            return Err(bad(format!("non-finite bound for `{}`", &row[0])));
        }
        if values.insert(row[0].to_string(), v).is_some() {
            return Err(bad(format!("member `{}` listed twice", &row[0])));
        }
    }
    let out = ped
        .labels()
        .iter()
        .map(|id| values.remove(id).ok_or_else(|| bad(format!("no bound for member `{id}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(extra) = values.keys().next() {
        return Err(bad(format!("unknown member `{extra}`")));
    }
    Ok(out)
}

fn load_instance(args: &InstanceArgs) -> Result<SelectionInstance, Failure> {
    let ped = parse_pedigree(open(&args.pedigree)?)?;
    let lower = read_bounds(&args.lower, &ped, "lower")?;
    let upper = read_bounds(&args.upper, &ped, "upper")?;
    Ok(SelectionInstance::new(ped, lower, upper, args.theta)?)
}

fn solver_config(args: &SolverArgs) -> SolverConfig {
    let mut cfg = SolverConfig {
        verbose: args.verbose,
        ..SolverConfig::default()
    };
    if let Some(tol) = args.tol {
        cfg.tol_gap = tol;
        cfg.tol_feas = tol;
    }
    if let Some(n) = args.max_iter {
        cfg.max_iter = n;
    }
    cfg
}

/// Wall-clock seconds per stage.
#[derive(Debug, Serialize)]
pub struct Timings {
    pub parse: f64,
    pub build: f64,
    pub solve: f64,
}

/// The `solve` summary. Solution fields are `null` unless the status is
/// `Optimal`.
#[derive(Debug, Serialize)]
pub struct Summary {
    pub objective: Option<f64>,
    pub group_coancestry: Option<f64>,
    pub status: Status,
    pub iterations: usize,
    pub gap: Option<f64>,
    pub formulation: Formulation,
    pub timings: Timings,
}

pub fn cmd_solve(args: &SolveArgs) -> CmdResult {
    let cfg = solver_config(&args.solver);
    cfg.validate()?;
    let t = Instant::now();
    let inst = load_instance(&args.instance)?;
    let parse = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let built = build(&inst, args.formulation)?;
    let build_time = t.elapsed().as_secs_f64();
    if let Some(path) = &args.dump {
        emit(Some(path), |w| {
            built.problem.write_text(&mut *w).map_err(core_to_io)
        })?;
    }

    let t = Instant::now();
    let sol = solve(&built.problem, &cfg)?;
    let solve_time = t.elapsed().as_secs_f64();

    let optimal = sol.status == Status::Optimal;
    let mut summary = Summary {
        objective: None,
        group_coancestry: None,
        status: sol.status,
        iterations: sol.iterations,
        gap: None,
        formulation: args.formulation,
        timings: Timings {
            parse,
            build: build_time,
            solve: solve_time,
        },
    };
    if optimal {
        let x = built.recover(&sol.z)?;
        summary.objective = Some(sol.objective);
        summary.group_coancestry = Some(built.group_coancestry(&sol.z)?);
        summary.gap = Some(sol.gap);
        emit(args.out.as_deref(), |w| {
            writeln!(w, "id,contribution")?;
            for (id, v) in inst.pedigree().labels().iter().zip(&x) {
                writeln!(w, "{id},{v}")?;
            }
            Ok(())
        })?;
    }
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    match &args.summary {
        Some(path) => emit(Some(path), |w| writeln!(w, "{json}"))?,
        None => eprintln!("{json}"),
    }
    match sol.status {
        Status::Optimal => Ok(Outcome::Done),
        s if s.is_infeasible() => Ok(Outcome::Infeasible),
        s => Err(Failure::Solver(s)),
    }
}

pub fn cmd_export_sdpa(args: &ExportArgs) -> CmdResult {
    let inst = load_instance(&args.instance)?;
    let kin = KinshipModel::new(inst.pedigree())?;
    let sdp = build_sdp(&inst, &kin.inverse)?;
    emit(Some(&args.out), |w| {
        export_sdpa(&sdp, &mut *w).map_err(core_to_io)
    })?;
    let sizes: Vec<String> = sdp.block_sizes.iter().map(i64::to_string).collect();
    println!(
        "mDIM {} nBLOCK {} blocks {} entries {}",
        sdp.n_vars(),
        sdp.block_sizes.len(),
        sizes.join(" "),
        sdp.entries.len()
    );
    Ok(Outcome::Done)
}

fn core_to_io(e: ocs_core::Error) -> io::Error {
    match e {
        ocs_core::Error::Io(io) => io,
        other => io::Error::other(other.to_string()),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.10e}"))
}

pub fn cmd_check(args: &CheckArgs) -> CmdResult {
    let cfg = solver_config(&args.solver);
    let inst = load_instance(&args.instance)?;
    let report = cross_check(&inst, &cfg)?;
    println!("formulation status objective iterations feasibility certificate");
    for o in &report.outcomes {
        let status = match (&o.status, &o.error) {
            (Some(s), _) => s.to_string(),
            (None, Some(e)) => format!("error({e})"),
            (None, None) => "-".into(),
        };
        println!(
            "{} {status} {} {} {} {}",
            o.formulation,
            fmt_opt(o.objective),
            o.iterations,
            fmt_opt(o.feasibility.map(|f| f.max())),
            fmt_opt(o.certificate)
        );
    }
    for (a, b, d) in &report.deltas {
        println!("delta {a}/{b} {d:.3e}");
    }
    if report.passes(args.agreement) {
        println!("result PASS");
        Ok(Outcome::Done)
    } else {
        println!("result FAIL");
        Err(Failure::CheckFailed(report.max_delta()))
    }
}

pub fn cmd_generate(args: &GenerateArgs) -> CmdResult {
    let ped = generate_pedigree(&GeneratorConfig {
        seed: args.seed,
        n_founders: args.founders,
        n_cycles: args.cycles,
        offspring_per_cycle: args.offspring,
        selection_fraction: args.selection_fraction,
    })?;
    emit(args.out.as_deref(), |w| {
        ped.write_csv(&mut *w).map_err(core_to_io)
    })?;
    Ok(Outcome::Done)
}
