//! The `weld` command line: capacity estimates, partition trees,
//! decompositions and their verification.
//!
//! Exit codes: 0 success, 1 usage or malformed input, 2 a failed
//! certificate or verification (including orientation-reversing input and
//! corrupted result files), 3 numeric failure.

pub mod random;

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use welding::addresses::PartitionTree;
use welding::capacity::estimate_capacity;
use welding::decompose::{
    decompose, verify, BudgetSchedule, DecomposeOptions, DecompositionResult, LedgerRow,
};
use welding::geometry::IntervalUnion;
use welding::homeo::Homeo;
use welding::logsingular::uniform_grid;
use welding::Error;

#[derive(Debug, Parser)]
#[command(
    name = "weld",
    version,
    about = "Capacity certificates and log-singular factorizations of circle homeomorphisms"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the logarithmic capacity of a union of segments or arcs.
    Capacity {
        /// JSON union (`[[a,b], {"start":t,"len":l}, ...]`), a file, or `-`.
        set: String,
        #[arg(long, default_value_t = 256)]
        panels: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inspect partition trees.
    #[command(subcommand)]
    Tree(TreeCommand),
    /// Factor φ = ψ ∘ h and write result.json, ledger.csv and plot.csv.
    Decompose(DecomposeArgs),
    /// Re-check a result file.
    Verify {
        result: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        grid: usize,
        /// Also write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Randomized property checks of trees, PL maps and decompositions.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        cases: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum TreeCommand {
    /// Print the intervals of every level as a table.
    Dump {
        /// Tree JSON or result JSON (file or inline); a dyadic tree on
        /// [0, 1] when absent.
        input: Option<String>,
        /// Levels to print (all materialized levels by default).
        #[arg(long)]
        depth: Option<usize>,
        /// Dump the range tree of a result instead of the domain tree.
        #[arg(long)]
        range: bool,
    },
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// Map JSON, or `{"phi": map, "depth": n, "budget": ...}`; file,
    /// inline JSON or `-`.
    pub phi: String,
    /// Number of levels; defaults to the input's `depth`, else 6.
    #[arg(long)]
    pub depth: Option<usize>,
    /// `pow2`, a JSON array of budgets, or a file holding one.
    #[arg(long)]
    pub budget: Option<String>,
    /// Grid size for composition residuals.
    #[arg(long, default_value_t = 10_000)]
    pub grid: usize,
    /// Grid size for the verification pass.
    #[arg(long, default_value_t = 10_000)]
    pub verify_grid: usize,
    /// Number of intervals in plot.csv.
    #[arg(long, default_value_t = 1000)]
    pub plot_points: usize,
    /// Output directory.
    #[arg(long, default_value = "weld-out")]
    pub out: PathBuf,
    /// Also keep φ⁻¹ of the small domain children within budget.
    #[arg(long)]
    pub inverse_family: bool,
}

/// An error with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: io::Error) -> Self {
        CliError::usage(format!("{}: {e}", path.display()))
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Orientation(_) | Error::BudgetUnreachable { .. } => 2,
            Error::Degenerate(_) | Error::SingularSystem(_) => 3,
            _ => 1,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Runs one command, writing human-readable output to `out`; returns the
/// exit code.
pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult<i32> {
    if let Ok(n) = std::env::var("WELD_NUM_THREADS") {
        let n: usize = n
            .parse()
            .map_err(|_| CliError::usage(format!("WELD_NUM_THREADS must be a count, got {n:?}")))?;
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match cli.command {
        Command::Capacity {
            set,
            panels,
            out: path,
        } => cmd_capacity(&set, panels, path.as_deref(), out),
        Command::Tree(TreeCommand::Dump {
            input,
            depth,
            range,
        }) => cmd_tree_dump(input.as_deref(), depth, range, out),
        Command::Decompose(args) => cmd_decompose(&args, out),
        Command::Verify {
            result,
            grid,
            out: path,
        } => cmd_verify(&result, grid, path.as_deref(), out),
        Command::Check { seed, cases } => cmd_check(seed, cases, out),
    }
}

/// Inline JSON, `-` for stdin, or a file path.
fn read_input(arg: &str) -> CliResult<String> {
    let trimmed = arg.trim_start();
    if trimmed.starts_with(['{', '[']) {
        return Ok(arg.to_string());
    }
    if arg == "-" {
        let mut s = String::new();
        io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| CliError::usage(format!("stdin: {e}")))?;
        return Ok(s);
    }
    fs::read_to_string(arg).map_err(|e| CliError::io(Path::new(arg), e))
}

/// Syntax errors are usage errors; well-formed JSON of the wrong shape or
/// with violated invariants counts as corrupted content (exit 2).
fn json_error(what: &str, e: serde_json::Error) -> CliError {
    use serde_json::error::Category;
    let code = match e.classify() {
        Category::Data => 2,
        _ => 1,
    };
    CliError {
        code,
        message: format!("{what}: {e}"),
    }
}

/// Parses JSON text; any failure here is a syntax error.
fn parse_value(what: &str, text: &str) -> CliResult<Value> {
    serde_json::from_str(text).map_err(|e| CliError::usage(format!("{what}: {e}")))
}

fn write_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<fs::File>) -> io::Result<()>,
) -> CliResult<()> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}

fn emit(out: &mut dyn Write, text: &str) -> CliResult<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::usage(format!("stdout: {e}")))
}

pub fn cmd_capacity(
    set: &str,
    panels: usize,
    path: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult<i32> {
    if panels < 8 {
        return Err(CliError::usage("--panels must be at least 8"));
    }
    let value = parse_value("set", &read_input(set)?)?;
    let union: IntervalUnion =
        serde_json::from_value(value).map_err(|e| CliError::usage(format!("set: {e}")))?;
    let est = estimate_capacity(&union, panels)?;
    let mut text = serde_json::to_string_pretty(&est).expect("plain data");
    text.push('\n');
    match path {
        Some(p) => write_file(p, |w| w.write_all(text.as_bytes()))?,
        None => emit(out, &text)?,
    }
    Ok(0)
}

fn load_tree(input: &str, range: bool) -> CliResult<PartitionTree> {
    let value = parse_value("tree", &read_input(input)?)?;
    let key = if range { "range_tree" } else { "domain_tree" };
    let tree_value = match value.get(key) {
        Some(v) => v.clone(),
        None if range => return Err(CliError::usage("--range needs a result file")),
        None => value,
    };
    serde_json::from_value(tree_value).map_err(|e| json_error("tree", e))
}

pub fn cmd_tree_dump(
    input: Option<&str>,
    depth: Option<usize>,
    range: bool,
    out: &mut dyn Write,
) -> CliResult<i32> {
    let tree = match input {
        Some(input) => load_tree(input, range)?,
        None => PartitionTree::dyadic(0.0, 1.0, depth.unwrap_or(3))?,
    };
    let depth = depth.unwrap_or(tree.depth());
    if depth > tree.depth() {
        return Err(Error::Depth {
            requested: depth,
            available: tree.depth(),
        }
        .into());
    }
    let mut text = String::from("level\tword\tlo\thi\tlength\n");
    for n in 0..=depth {
        for (i, &[lo, hi]) in tree.level(n).iter().enumerate() {
            let _ = writeln!(
                text,
                "{n}\t{}\t{lo:.16e}\t{hi:.16e}\t{:.16e}",
                tree.word_at(n, i),
                hi - lo
            );
        }
    }
    emit(out, &text)?;
    Ok(0)
}

/// Inputs of a decomposition run, after merging the file and the flags.
struct DecomposeInput {
    phi: Homeo,
    opts: DecomposeOptions,
}

fn parse_budget(arg: &str) -> CliResult<BudgetSchedule> {
    if arg == "pow2" {
        return Ok(BudgetSchedule::Pow2);
    }
    let value = parse_value("budget", &read_input(arg)?)?;
    budget_from_value(value)
}

fn budget_from_value(value: Value) -> CliResult<BudgetSchedule> {
    serde_json::from_value(value).map_err(|e| CliError::usage(format!("budget: {e}")))
}

fn decompose_input(args: &DecomposeArgs) -> CliResult<DecomposeInput> {
    let value = parse_value("phi", &read_input(&args.phi)?)?;
    let (phi_value, file_depth, file_budget, file_inverse) = match value {
        Value::Object(mut map) if map.contains_key("phi") => {
            let depth = match map.remove("depth") {
                Some(d) => Some(
                    d.as_u64()
                        .ok_or_else(|| CliError::usage("depth must be a nonnegative integer"))?
                        as usize,
                ),
                None => None,
            };
            let budget = map.remove("budget").map(budget_from_value).transpose()?;
            let inverse = map.remove("inverse_family").and_then(|v| v.as_bool());
            (map.remove("phi").unwrap(), depth, budget, inverse)
        }
        other => (other, None, None, None),
    };
    let phi = Homeo::from_json(phi_value)?;
    let depth = args.depth.or(file_depth).unwrap_or(6);
    if depth < 1 {
        return Err(CliError::usage("depth must be at least 1"));
    }
    let budget = match &args.budget {
        Some(b) => parse_budget(b)?,
        None => file_budget.unwrap_or(BudgetSchedule::Pow2),
    };
    budget.budget(depth)?;
    Ok(DecomposeInput {
        phi,
        opts: DecomposeOptions {
            depth,
            budget,
            inverse_family: args.inverse_family || file_inverse.unwrap_or(false),
            grid: args.grid,
        },
    })
}

/// Ledger columns; the first six are the fixed public format.
pub const LEDGER_HEADER: &str =
    "n,capE_bound,cap_phiE_bound,capF_bound,cauchy,residual,budget,residual_breakpoints,\
capE_union_bound,cap_phiE_union_bound,capF_union_bound,cap_phiinvE_bound,fanout,pass";

pub fn ledger_csv(rows: &[LedgerRow]) -> String {
    let mut s = String::from(LEDGER_HEADER);
    s.push('\n');
    for r in rows {
        let inv = r
            .cap_phi_inv_e_bound
            .map(|v| format!("{v:.16e}"))
            .unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{inv},{},{}",
            r.n,
            r.cap_e_bound,
            r.cap_phi_e_bound,
            r.cap_f_bound,
            r.cauchy,
            r.residual,
            r.budget,
            r.residual_breakpoints,
            r.cap_e_union_bound,
            r.cap_phi_e_union_bound,
            r.cap_f_union_bound,
            r.fanout,
            r.pass
        );
    }
    s
}

/// `x, h_1(x), …, h_depth(x)` on `points + 1` uniform points of the root.
pub fn plot_csv(result: &DecompositionResult, points: usize) -> CliResult<String> {
    let mut s = String::from("x");
    for n in 1..=result.depth {
        let _ = write!(s, ",h{n}");
    }
    s.push('\n');
    let maps = result.stages[1..]
        .iter()
        .map(|st| st.h_pl())
        .collect::<welding::Result<Vec<_>>>()?;
    let [a, b] = result.trees.domain().root();
    for x in uniform_grid(a, b, points) {
        let _ = write!(s, "{x:.16e}");
        for h in &maps {
            let _ = write!(s, ",{:.16e}", h.eval(x)?);
        }
        s.push('\n');
    }
    Ok(s)
}

fn ledger_table(rows: &[LedgerRow]) -> String {
    let mut s = String::from(
        " n     budget       capE     cap_φE       capF     cauchy   residual  pass\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:>2} {:>10.3e} {:>10.3e} {:>10.3e} {:>10.3e} {:>10.3e} {:>10.3e}  {}",
            r.n,
            r.budget,
            r.cap_e_bound,
            r.cap_phi_e_bound,
            r.cap_f_bound,
            r.cauchy,
            r.residual,
            r.pass
        );
    }
    s
}

pub fn cmd_decompose(args: &DecomposeArgs, out: &mut dyn Write) -> CliResult<i32> {
    let input = decompose_input(args)?;
    let mut result = decompose(&input.phi, &input.opts)?;
    let report = verify(&result, args.verify_grid);
    result.verify = Some(report);
    fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    write_file(&args.out.join("result.json"), |w| {
        serde_json::to_writer(&mut *w, &result).map_err(io::Error::other)?;
        w.write_all(b"\n")
    })?;
    let ledger = ledger_csv(&result.ledger);
    write_file(&args.out.join("ledger.csv"), |w| {
        w.write_all(ledger.as_bytes())
    })?;
    let plot = plot_csv(&result, args.plot_points)?;
    write_file(&args.out.join("plot.csv"), |w| w.write_all(plot.as_bytes()))?;

    let report = result.verify.as_ref().expect("attached above");
    let mut text = ledger_table(&result.ledger);
    for c in report.failures() {
        let _ = writeln!(
            text,
            "verify: {} (level {:?}) failed: {}",
            c.name, c.n, c.detail
        );
    }
    let ok = result.passed && report.passed;
    let _ = writeln!(
        text,
        "{}: certificates {}, verification {}; wrote {}",
        if ok { "PASS" } else { "FAIL" },
        if result.passed { "hold" } else { "fail" },
        if report.passed { "passed" } else { "failed" },
        args.out.display()
    );
    emit(out, &text)?;
    Ok(if ok { 0 } else { 2 })
}

pub fn cmd_verify(
    path: &Path,
    grid: usize,
    report_path: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult<i32> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let result: DecompositionResult =
        serde_json::from_str(&text).map_err(|e| json_error("result", e))?;
    let start = Instant::now();
    let report = verify(&result, grid);
    let mut s = String::new();
    for c in &report.checks {
        if !c.pass {
            let _ = writeln!(s, "FAIL {} (level {:?}): {}", c.name, c.n, c.detail);
        }
    }
    let _ = writeln!(
        s,
        "{}: {} checks, {} failed, grid {grid}, {:.2} s",
        if report.passed { "PASS" } else { "FAIL" },
        report.checks.len(),
        report.failures().count(),
        start.elapsed().as_secs_f64()
    );
    if let Some(p) = report_path {
        write_file(p, |w| {
            serde_json::to_writer_pretty(&mut *w, &report).map_err(io::Error::other)?;
            w.write_all(b"\n")
        })?;
    }
    emit(out, &s)?;
    Ok(if report.passed { 0 } else { 2 })
}

/// Tally of the randomized checks.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct CheckSummary {
    pub trees: usize,
    pub maps: usize,
    pub decompositions: usize,
    pub failures: Vec<String>,
}

/// `stage_E(n)` and `stage_F(n)` are interior-disjoint and cover the root.
pub fn stages_tile_root(tree: &PartitionTree, n: usize) -> welding::Result<bool> {
    let e = tree.stage_e(n)?;
    let f = tree.stage_f(n)?;
    let [lo, hi] = tree.root();
    let both = IntervalUnion::normalize(e.parts().iter().chain(f.parts()).copied());
    let covered = e.total_length() + f.total_length();
    Ok(both.is_ok() && (covered - (hi - lo)).abs() <= 1e-12 * (hi - lo))
}

/// Random trees, PL maps and small decompositions from one seed.
pub fn run_checks(seed: u64, cases: usize) -> CheckSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summary = CheckSummary::default();
    for case in 0..cases {
        let tree = random::random_tree(&mut rng);
        let violations = tree.validate();
        if !violations.is_empty() {
            summary
                .failures
                .push(format!("tree {case}: {:?}", violations[0]));
        }
        // stage unions are defined for even fan-outs only
        for n in (0..tree.depth()).filter(|&n| tree.schedule().as_slice()[n + 1] % 2 == 0) {
            if !stages_tile_root(&tree, n).unwrap_or(false) {
                summary.failures.push(format!(
                    "tree {case}: stages of level {n} do not tile the root"
                ));
            }
        }
        summary.trees += 1;

        let f = random::random_pl(&mut rng, 12);
        let g = random::random_pl(&mut rng, 12);
        let map_ok = f.compose(&g).is_ok_and(|fg| {
            g.xs()
                .iter()
                .all(|&x| fg.eval(x).ok() == g.eval(x).ok().and_then(|y| f.eval(y).ok()))
                && f.compose(&f.invert())
                    .is_ok_and(|id| id.xs().iter().all(|&y| id.eval(y).ok() == Some(y)))
        });
        if !map_ok {
            summary.failures.push(format!(
                "map pair {case}: composition is not exact at breakpoints"
            ));
        }
        summary.maps += 1;
    }
    // a few full pipelines on random PL maps
    for case in 0..cases.div_ceil(100) {
        let phi = Homeo::Pl(random::random_pl(&mut rng, 20));
        let opts = DecomposeOptions {
            depth: 3,
            grid: 2000,
            ..DecomposeOptions::default()
        };
        match decompose(&phi, &opts) {
            Ok(res) => {
                let report = verify(&res, 2000);
                if !(res.passed && report.passed) {
                    summary
                        .failures
                        .push(format!("decomposition {case} failed verification"));
                }
            }
            Err(e) => summary.failures.push(format!("decomposition {case}: {e}")),
        }
        summary.decompositions += 1;
    }
    summary
}

pub fn cmd_check(seed: u64, cases: usize, out: &mut dyn Write) -> CliResult<i32> {
    let summary = run_checks(seed, cases);
    let mut s = String::new();
    for f in &summary.failures {
        let _ = writeln!(s, "FAIL {f}");
    }
    let _ = writeln!(
        s,
        "{}: seed {seed}, {} trees, {} PL map pairs, {} decompositions, {} failures",
        if summary.failures.is_empty() {
            "PASS"
        } else {
            "FAIL"
        },
        summary.trees,
        summary.maps,
        summary.decompositions,
        summary.failures.len()
    );
    emit(out, &s)?;
    Ok(if summary.failures.is_empty() { 0 } else { 2 })
}
