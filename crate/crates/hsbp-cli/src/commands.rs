use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use hsbp::export::{save_matrix_market, write_sparsity};
use hsbp::global::{assemble_global, assemble_problem, block_geometry, block_problem, Discretization};
use hsbp::local::FaceKind;
use hsbp::mesh::{builtin, load_mesh, Mesh, TraceNumbering};
use hsbp::sbp1d::borrowing_min_intervals;
use hsbp::sbp2d::Operators2D;
use hsbp::solve::{
    dense_systems, extreme_eigenvalues, solve, trace_schur_matrix, volume_schur_matrix, Solution, SolverPath,
};
use hsbp::sparse::Csr;
use hsbp::verify::{
    loglog_slope, measure_errors, measure_errors_streaming, null_vector_alignment, plateau_variation,
    random_spd_coefficients, reference_local, tau_sweep, DiskMms, ExactSolution, LinearSolution,
};

use crate::{
    Command, ConvergeArgs, CountsArgs, Discretize, ExportArgs, PathArg, Problem, SolveArgs, SpdArgs, SpdConfig,
    SweepArgs,
};

/// Relative size of the smallest eigenvalue below which a matrix counts as
/// singular.
const SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, mesh files or grid sizes.
    Config(String),
    /// Assembly, factorization, output or a check that did not hold.
    Failure(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Failure(m) => f.write_str(m),
        }
    }
}

impl From<hsbp::Error> for CliError {
    fn from(e: hsbp::Error) -> Self {
        use hsbp::Error::*;
        match e {
            UnsupportedOrder(_) | TooFewIntervals { .. } | Parse { .. } | Mesh(_) => CliError::Config(e.to_string()),
            e => CliError::Failure(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failure(format!("output: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Failure(format!("output: {e}"))
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Solve(a) => solve_cmd(a),
        Command::Converge(a) => converge(a),
        Command::SpdCheck(a) => spd_check(a),
        Command::TauSweep(a) => sweep(a),
        Command::Counts(a) => counts(a),
        Command::Export(a) => export(a),
    }
}

fn sci(v: f64) -> String {
    format!("{v:.6e}")
}

type Sink = csv::Writer<Box<dyn Write>>;

fn sink(out: Option<&Path>, name: &str) -> Result<Sink> {
    let w: Box<dyn Write> = match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            Box::new(BufWriter::new(File::create(dir.join(name))?))
        }
        None => Box::new(std::io::stdout().lock()),
    };
    Ok(csv::Writer::from_writer(w))
}

/// `builtin:NAME`, a bare builtin name with no file of that name, or a path.
fn load(arg: &str) -> Result<(Mesh, bool)> {
    let name = arg
        .strip_prefix("builtin:")
        .or_else(|| (builtin::NAMES.contains(&arg) && !Path::new(arg).exists()).then_some(arg));
    match name {
        Some(n) => Ok((builtin::by_name(n)?, n == "disk56")),
        None => load_mesh(arg)
            .map(|m| (m, false))
            .map_err(|e| CliError::Config(e.to_string())),
    }
}

fn check_n(p: usize, n: usize) -> Result<()> {
    let min = borrowing_min_intervals(p)?;
    if n < min {
        return Err(CliError::Config(format!(
            "--n {n} is below the smallest grid ({min}) for order {}",
            2 * p
        )));
    }
    Ok(())
}

struct Setup {
    mesh: Mesh,
    disc: Discretization,
    exact: Box<dyn ExactSolution>,
}

impl Setup {
    fn new(a: &Discretize, default_mesh: &str) -> Result<Self> {
        if !(a.tau_scale >= 1.0 && a.tau_scale.is_finite()) {
            return Err(CliError::Config(format!("--tau-scale must be at least 1, got {}", a.tau_scale)));
        }
        check_n(a.order, a.n)?;
        let (mesh, is_disk) = load(a.mesh.as_deref().unwrap_or(default_mesh))?;
        let exact: Box<dyn ExactSolution> = match (a.problem, is_disk) {
            (Problem::Disk, _) | (Problem::Auto, true) => Box::new(DiskMms::new(builtin::DISK_BLOCKS)),
            _ => Box::new(LinearSolution::new(1.0, 2.0, -1.0)),
        };
        let mut disc = Discretization::new(a.order, a.n);
        disc.tau_scale = a.tau_scale;
        Ok(Setup { mesh, disc, exact })
    }
}

fn solve_cmd(a: SolveArgs) -> Result<()> {
    let s = Setup::new(&a.disc, "builtin:two-block")?;
    let sys = assemble_problem(&s.mesh, &s.disc, s.exact.as_ref())?;
    let paths: Vec<SolverPath> = match a.path {
        PathArg::All => SolverPath::ALL.to_vec(),
        PathArg::Monolithic => vec![SolverPath::Monolithic],
        PathArg::Trace => vec![SolverPath::Trace],
        PathArg::Volume => vec![SolverPath::Volume],
    };
    let mut w = sink(a.out.as_deref(), "solve.csv")?;
    w.write_record(["path", "order", "n", "volume_error", "interface_error", "max_error", "max_difference"])?;
    let mut first: Option<Solution> = None;
    let mut worst = 0.0f64;
    for path in &paths {
        let t = Instant::now();
        let sol = solve(&sys, *path)?;
        eprintln!("{}: {:.2}s", path.name(), t.elapsed().as_secs_f64());
        let acc = measure_errors(&s.mesh, &sys, &sol, s.exact.as_ref());
        let diff = first.as_ref().map_or(0.0, |f| f.max_difference(&sol));
        worst = worst.max(diff);
        w.write_record([
            path.name().to_string(),
            (2 * s.disc.p).to_string(),
            s.disc.n.to_string(),
            sci(acc.volume()),
            sci(acc.interface()),
            sci(acc.max_abs),
            if paths.len() > 1 { sci(diff) } else { String::new() },
        ])?;
        first.get_or_insert(sol);
    }
    w.flush()?;
    if paths.len() > 1 {
        eprintln!("path agreement: max difference {worst:.3e}");
    }
    Ok(())
}

fn converge(a: ConvergeArgs) -> Result<()> {
    if a.levels == 0 {
        return Err(CliError::Config("--levels must be positive".into()));
    }
    let mut s = Setup::new(&a.disc, "builtin:disk56")?;
    let mut w = sink(a.out.as_deref(), "converge.csv")?;
    w.write_record(["order", "n", "volume_error", "volume_rate", "interface_error", "interface_rate"])?;
    let mut prev: Option<(f64, f64)> = None;
    for k in 0..a.levels {
        let n = a.disc.n << k;
        s.disc.n = n;
        let t = Instant::now();
        let acc = measure_errors_streaming(&s.mesh, &s.disc, s.exact.as_ref())?;
        eprintln!("N={n}: {:.1}s", t.elapsed().as_secs_f64());
        let (ev, ei) = (acc.volume(), acc.interface());
        let rate = |old: f64, new: f64| sci((old / new).log2());
        w.write_record([
            (2 * s.disc.p).to_string(),
            n.to_string(),
            sci(ev),
            prev.map(|(v, _)| rate(v, ev)).unwrap_or_default(),
            sci(ei),
            prev.map(|(_, i)| rate(i, ei)).unwrap_or_default(),
        ])?;
        w.flush()?;
        prev = Some((ev, ei));
    }
    Ok(())
}

fn orders(order: Option<usize>) -> Vec<usize> {
    order.map_or(vec![1, 2, 3], |p| vec![p])
}

fn spd_check(a: SpdArgs) -> Result<()> {
    use FaceKind::{Dirichlet as D, Neumann as N};
    if a.samples == 0 {
        return Err(CliError::Config("--samples must be positive".into()));
    }
    let mut w = sink(a.out.as_deref(), "spd_check.csv")?;
    w.write_record([
        "config",
        "system",
        "order",
        "n",
        "seed",
        "lambda_min",
        "lambda_max",
        "result",
        "null_alignment",
    ])?;
    let config = match a.config {
        SpdConfig::Dirichlet => "dirichlet",
        SpdConfig::Neumann3 => "neumann3",
        SpdConfig::AllNeumann => "all-neumann",
        SpdConfig::TwoBlock => "two-block",
    };
    let (mut total, mut expected) = (0usize, 0usize);
    for p in orders(a.order) {
        let min = borrowing_min_intervals(p)?;
        let n = match (a.n, a.config) {
            (Some(n), _) => n,
            (None, SpdConfig::TwoBlock) => (3 * p - 1).max(min),
            (None, _) => 3 * p + 2,
        };
        check_n(p, n)?;
        let ops = Operators2D::new(p, n)?;
        let mut row = |system: &str, seed: u64, lo: f64, hi: f64, result: &str, align: String| {
            w.write_record([
                config.to_string(),
                system.to_string(),
                (2 * p).to_string(),
                n.to_string(),
                seed.to_string(),
                sci(lo),
                sci(hi),
                result.to_string(),
                align,
            ])
        };
        for seed in a.seed..a.seed + a.samples {
            if a.config == SpdConfig::TwoBlock {
                let mesh = builtin::two_block()?;
                let disc = Discretization::new(p, n);
                let blocks = (0..mesh.num_blocks())
                    .map(|b| {
                        let mut g = block_geometry(&mesh, b, &ops, &disc)?;
                        g.coeffs = random_spd_coefficients(seed * 7 + b as u64, n, n)?;
                        block_problem(&mesh, b, &ops, g, 1.0)
                    })
                    .collect::<hsbp::Result<Vec<_>>>()?;
                let sys = assemble_global(&mesh, &TraceNumbering::new(&mesh, n), blocks, &LinearSolution::constant(0.0))?;
                let d = dense_systems(&sys)?;
                for (name, m) in [("monolithic", &d.monolithic), ("trace", &d.trace_schur), ("volume", &d.volume_schur)] {
                    let (lo, hi) = extreme_eigenvalues(m)?;
                    total += 1;
                    expected += (lo > 0.0) as usize;
                    row(name, seed, lo, hi, if lo > 0.0 { "positive" } else { "not-positive" }, String::new())?;
                }
                continue;
            }
            let c = random_spd_coefficients(seed, n, n)?;
            let kinds = match a.config {
                SpdConfig::Neumann3 => {
                    let mut k = [N; 4];
                    k[(seed % 4) as usize] = D;
                    k
                }
                SpdConfig::AllNeumann => [N; 4],
                _ => [D; 4],
            };
            let m = reference_local(&ops, &c, 1.0, kinds)?.m.to_dense();
            let (lo, hi) = extreme_eigenvalues(&m)?;
            total += 1;
            if a.config == SpdConfig::AllNeumann {
                let singular = lo.abs() < SINGULAR_TOL * hi;
                expected += singular as usize;
                let align = null_vector_alignment(&m);
                row("local", seed, lo, hi, if singular { "singular" } else { "nonsingular" }, format!("{align:.12}"))?;
            } else {
                expected += (lo > 0.0) as usize;
                row("local", seed, lo, hi, if lo > 0.0 { "positive" } else { "not-positive" }, String::new())?;
            }
        }
    }
    w.flush()?;
    let want = if a.config == SpdConfig::AllNeumann { "singular" } else { "positive definite" };
    eprintln!("{config}: {expected}/{total} {want} as expected");
    if expected != total {
        return Err(CliError::Failure(format!(
            "{} of {total} systems are not {want}",
            total - expected
        )));
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let scales: Vec<f64> = (0..=a.max_exp).map(|k| 2f64.powi(k as i32)).collect();
    let mut w = sink(a.out.as_deref(), "tau_sweep.csv")?;
    w.write_record(["order", "n", "tau_scale", "lambda_min", "lambda_max"])?;
    for p in orders(a.order) {
        let n = a.n.unwrap_or(3 * p + 2);
        check_n(p, n)?;
        let ops = Operators2D::new(p, n)?;
        let c = random_spd_coefficients(a.seed, n, n)?;
        let rows = tau_sweep(&ops, &c, &scales)?;
        for r in &rows {
            w.write_record([
                (2 * p).to_string(),
                n.to_string(),
                sci(r.tau_scale),
                sci(r.lambda_min),
                sci(r.lambda_max),
            ])?;
        }
        let top = *scales.last().unwrap();
        let slope = loglog_slope(&rows, (top / 16.0).max(1.0), top).ok();
        eprintln!(
            "order {}: lambda_min variation {:.2}% beyond tau_scale 4, lambda_max log-log slope {}",
            2 * p,
            100.0 * plateau_variation(&rows, 4.0),
            slope.map_or("n/a".into(), |s| format!("{s:.4}"))
        );
    }
    w.flush()?;
    Ok(())
}

fn counts(a: CountsArgs) -> Result<()> {
    let (mesh, _) = load(a.mesh.as_deref().unwrap_or("builtin:disk56"))?;
    let mut w = sink(a.out.as_deref(), "counts.csv")?;
    w.write_record(["n", "blocks", "interfaces", "volume_points", "trace_points", "ratio"])?;
    for k in 0..a.levels {
        let t = TraceNumbering::new(&mesh, a.n << k);
        let ratio = if t.trace_size > 0 {
            format!("{:.1}", t.volume_size as f64 / t.trace_size as f64)
        } else {
            String::new()
        };
        w.write_record([
            t.n.to_string(),
            mesh.num_blocks().to_string(),
            mesh.num_interfaces().to_string(),
            t.volume_size.to_string(),
            t.trace_size.to_string(),
            ratio,
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn export(a: ExportArgs) -> Result<()> {
    let s = Setup::new(&a.disc, "builtin:two-block")?;
    let sys = assemble_problem(&s.mesh, &s.disc, s.exact.as_ref())?;
    fs::create_dir_all(&a.out)?;
    let mut mats: Vec<(&str, Csr)> = vec![("monolithic", sys.monolithic())];
    mats.push(("volume_schur", volume_schur_matrix(&sys)));
    if sys.trace_size() > 0 {
        mats.push(("trace_schur", trace_schur_matrix(&sys)?.0));
    }
    for (name, m) in &mats {
        save_matrix_market(m, a.out.join(format!("{name}.mtx")))?;
        let mut f = BufWriter::new(File::create(a.out.join(format!("{name}_sparsity.csv")))?);
        write_sparsity(m, &mut f)?;
        f.flush()?;
        eprintln!("{name}: {}x{}, {} nonzeros", m.nrows, m.ncols, m.nnz());
    }
    Ok(())
}
