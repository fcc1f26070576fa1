//! Command-line front end. [`run`] is the whole program minus process
//! plumbing so that tests can drive it in-process.
//!
//! Exit codes: 0 success (or tolerance met), 1 tolerance not met,
//! 2 usage or input error, 3 numeric failure.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;

use crate::dnet::{DigitalNet, DnetConfig, DnetOrder, DnetRandomization, GeneratingMatrixSet, LmsFamily};
use crate::error::QmcError;
use crate::fastgram::SpectralGram;
use crate::halton::{Halton, HaltonConfig, HaltonRandomization};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::lattice::{Lattice, LatticeGeneratingVector, LatticeOrder};
use crate::lddata::{self, BatchFormat, Sidecar};
use crate::points::{PointBatch, PointGenerator};
use crate::rqmc::{self, AdaptiveOptions, Integrand, IidSampler, SamplerSpec};
use crate::transforms;

pub const EXIT_OK: i32 = 0;
pub const EXIT_TOLERANCE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "qmckit", version, about = "Randomized low-discrepancy points, fast kernel algebra and RQMC integration")]
struct Cli {
    /// Worker threads (0 = one per core). Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Master seed; defaults to $QMC_SEED, then 0.
    #[arg(long, global = true, env = "QMC_SEED", default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate randomized points and write a batch file.
    Gen(GenArgs),
    /// Apply fftbr, ifftbr or fwht to the columns of a vector file.
    Transform(TransformArgs),
    /// Evaluate a kernel at a pair of points.
    Kernel(KernelArgs),
    /// Per-replication discrepancy of a generated batch via the fast Gram algebra.
    Discrepancy(DiscrepancyArgs),
    /// RQMC estimate of an integral with a Student's-t interval.
    Integrate(IntegrateArgs),
    /// RMSE convergence study over a grid of sample sizes.
    Study(StudyArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    /// lattice, dnet, halton or iid.
    #[arg(long = "type")]
    kind: String,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    n: usize,
    /// Number of independent replications.
    #[arg(long = "R", visible_alias = "reps", default_value_t = 1)]
    reps: usize,
    /// linear | radical-inverse (lattice); radical-inverse | gray (dnet).
    #[arg(long)]
    order: Option<String>,
    /// Randomization; the default depends on the type.
    #[arg(long)]
    rand: Option<String>,
    /// Digital interlacing order (digital nets only).
    #[arg(long, default_value_t = 1)]
    alpha: usize,
    #[arg(long = "lms-family", default_value = "matousek")]
    lms_family: String,
    /// Randomization digit precision for nets.
    #[arg(long = "t-max")]
    t_max: Option<u32>,
    /// Generating vector or matrix file; built-in tables otherwise.
    #[arg(long)]
    source: Option<PathBuf>,
    /// Output path; CSV to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv | binary (default from the extension).
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args, Debug)]
struct TransformArgs {
    /// fftbr | ifftbr | fwht.
    #[arg(long)]
    op: String,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Input columns come in (re, im) pairs.
    #[arg(long)]
    complex: bool,
}

#[derive(Args, Debug)]
struct KernelOpts {
    /// si | dsi.
    #[arg(long)]
    family: Option<String>,
    #[arg(long, default_value_t = 1)]
    alpha: u32,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
}

#[derive(Args, Debug)]
struct KernelArgs {
    #[command(flatten)]
    kernel: KernelOpts,
    /// Comma-separated coordinates.
    #[arg(long, allow_hyphen_values = true)]
    x: String,
    #[arg(long, allow_hyphen_values = true)]
    y: String,
}

#[derive(Args, Debug)]
struct DiscrepancyArgs {
    #[command(flatten)]
    kernel: KernelOpts,
    /// Batch written by `gen` (its sidecar supplies the structure).
    #[arg(long)]
    points: PathBuf,
}

#[derive(Args, Debug)]
struct IntegrateArgs {
    /// Catalog integrand name.
    #[arg(long = "f", conflicts_with = "expr")]
    integrand: Option<String>,
    /// User expression in x1..xd.
    #[arg(long, allow_hyphen_values = true)]
    expr: Option<String>,
    /// Exact mean of the expression, if known.
    #[arg(long, requires = "expr", allow_hyphen_values = true)]
    exact: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, default_value = "dnet-lms")]
    sampler: String,
    /// Fixed sample size; adaptive doubling when absent.
    #[arg(long, conflicts_with = "tol")]
    n: Option<usize>,
    #[arg(long = "R", visible_alias = "reps", default_value_t = 16)]
    reps: usize,
    /// Absolute tolerance on the interval half-width (adaptive mode).
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    /// Miss probability; the interval has level 1 - tau.
    #[arg(long, default_value_t = 0.05)]
    tau: f64,
    #[arg(long, default_value_t = 256)]
    n0: usize,
    #[arg(long = "n-max", default_value_t = 1 << 20)]
    n_max: usize,
    /// text | csv.
    #[arg(long, default_value = "text")]
    format: String,
}

#[derive(Args, Debug)]
struct StudyArgs {
    /// Comma-separated catalog names, each optionally `name:d`.
    #[arg(long, default_value = "simple-d1,simple-d2,oakley,g-function,oscillatory,corner-peak")]
    integrands: String,
    #[arg(long, default_value = "iid,lattice,dnet-lms,dnet-lms-alpha2")]
    samplers: String,
    #[arg(long = "m-min", default_value_t = 4)]
    m_min: u32,
    #[arg(long = "m-max", default_value_t = 12)]
    m_max: u32,
    #[arg(long, default_value_t = 100)]
    randomizations: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    msg: String,
}

impl From<QmcError> for Failure {
    fn from(e: QmcError) -> Self {
        let code = match e {
            QmcError::SingularGram { .. } | QmcError::Structure(_) => EXIT_NUMERIC,
            _ => EXIT_USAGE,
        };
        Failure { code, msg: e.to_string() }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        msg: msg.into(),
    }
}

fn numeric(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_NUMERIC,
        msg: msg.into(),
    }
}

fn io_fail(e: std::io::Error) -> Failure {
    usage(format!("output error: {e}"))
}

type CmdResult = std::result::Result<i32, Failure>;

/// Runs the program with `args` (including `argv[0]`) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = out.write_all(text.as_bytes());
            } else {
                let _ = err.write_all(text.as_bytes());
            }
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: cannot start thread pool: {e}");
            return EXIT_USAGE;
        }
    };
    let threads = pool.current_num_threads();
    // pool.install needs Send, so commands write into buffers
    let mut obuf = Vec::new();
    let mut ebuf = Vec::new();
    let res = pool.install(|| dispatch(&cli, threads, &mut obuf, &mut ebuf));
    let _ = err.write_all(&ebuf);
    let _ = out.write_all(&obuf);
    match res {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.msg);
            f.code
        }
    }
}

fn dispatch(cli: &Cli, threads: usize, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let echo_prefix = format!("# qmckit --threads {threads} --seed {}", cli.seed);
    match &cli.cmd {
        Command::Gen(a) => cmd_gen(a, cli.seed, &echo_prefix, out, err),
        Command::Transform(a) => cmd_transform(a, &echo_prefix, out, err),
        Command::Kernel(a) => cmd_kernel(a, &echo_prefix, out, err),
        Command::Discrepancy(a) => cmd_discrepancy(a, &echo_prefix, out, err),
        Command::Integrate(a) => cmd_integrate(a, cli.seed, &echo_prefix, out, err),
        Command::Study(a) => cmd_study(a, cli.seed, &echo_prefix, out, err),
    }
}

/// Fully resolved `gen` settings; echoed and stored in the sidecar.
#[derive(Debug, Clone, Serialize)]
pub struct GenConfig {
    pub kind: String,
    pub d: usize,
    pub n: usize,
    pub reps: usize,
    pub order: String,
    pub rand: String,
    pub alpha: usize,
    pub lms_family: String,
    pub t_max: Option<u32>,
    pub source: Option<PathBuf>,
    pub seed: u64,
}

impl GenConfig {
    fn echo(&self) -> String {
        let mut s = format!(
            "gen --type {} --d {} --n {} --R {} --order {} --rand {} --alpha {} --lms-family {}",
            self.kind, self.d, self.n, self.reps, self.order, self.rand, self.alpha, self.lms_family
        );
        if let Some(t) = self.t_max {
            let _ = write!(s, " --t-max {t}");
        }
        if let Some(p) = &self.source {
            let _ = write!(s, " --source {}", p.display());
        }
        s
    }
}

fn resolve_gen(a: &GenArgs, seed: u64) -> std::result::Result<(GenConfig, Box<dyn PointGenerator + Send>), Failure> {
    if a.d == 0 || a.n == 0 || a.reps == 0 {
        return Err(usage("--d, --n and --R must be positive"));
    }
    if a.alpha != 1 && matches!(a.kind.as_str(), "lattice" | "iid") {
        return Err(usage(format!("--alpha applies to digital nets only, not {}", a.kind)));
    }
    let family = LmsFamily::parse(&a.lms_family)?;
    let mut cfg = GenConfig {
        kind: a.kind.clone(),
        d: a.d,
        n: a.n,
        reps: a.reps,
        order: String::new(),
        rand: String::new(),
        alpha: a.alpha,
        lms_family: family.name().to_string(),
        t_max: a.t_max,
        source: a.source.clone(),
        seed,
    };
    let generator: Box<dyn PointGenerator + Send> = match a.kind.as_str() {
        "lattice" => {
            let order = match a.order.as_deref().unwrap_or("radical-inverse") {
                "linear" => LatticeOrder::Linear,
                "radical-inverse" => LatticeOrder::RadicalInverse,
                o => return Err(usage(format!("unknown lattice order '{o}'"))),
            };
            let g = match &a.source {
                Some(p) => lddata::read_lattice_vector(p)?.truncated(a.d)?,
                None => LatticeGeneratingVector::default_for(a.d)?,
            };
            let rand = a.rand.as_deref().unwrap_or("shift");
            let lat = match rand {
                "shift" => Lattice::shifted(g, order, a.reps, seed)?,
                "none" if a.reps == 1 => Lattice::new(g, 2, order, None)?,
                "none" => return Err(usage("an unrandomized lattice has a single replication; use --R 1")),
                r => return Err(usage(format!("unknown lattice randomization '{r}'"))),
            };
            cfg.order = order.name().into();
            cfg.rand = rand.into();
            Box::new(lat.with_size(a.n as u64)?)
        }
        "dnet" => {
            let order = match a.order.as_deref().unwrap_or("radical-inverse") {
                "radical-inverse" => DnetOrder::RadicalInverse,
                "gray" | "gray-code" => DnetOrder::GrayCode,
                o => return Err(usage(format!("unknown digital net order '{o}'"))),
            };
            let randomization = DnetRandomization::parse(a.rand.as_deref().unwrap_or("lms-shift"))?;
            let dims = a.alpha * a.d;
            let c = match &a.source {
                Some(p) => {
                    let c = lddata::read_dnet_matrices(p)?;
                    if c.dim() < dims {
                        return Err(usage(format!("{} holds {} matrices, need alpha * d = {dims}", p.display(), c.dim())));
                    }
                    c.with_dims(dims)?
                }
                None => GeneratingMatrixSet::sobol(dims)?,
            };
            let net = DigitalNet::new(
                &c,
                DnetConfig {
                    alpha: a.alpha,
                    order,
                    randomization,
                    lms_family: family,
                    reps: a.reps,
                    seed,
                    t_max: a.t_max,
                },
            )?;
            cfg.order = order.name().into();
            cfg.rand = randomization.name().into();
            Box::new(net)
        }
        "halton" => {
            if a.order.as_deref().is_some_and(|o| o != "natural") {
                return Err(usage("Halton points only come in natural order"));
            }
            let randomization = HaltonRandomization::parse(a.rand.as_deref().unwrap_or("lms-shift"))?;
            let h = Halton::new(HaltonConfig {
                alpha: a.alpha,
                ..HaltonConfig::new(a.d, randomization, a.reps, seed)
            })?;
            cfg.order = "natural".into();
            cfg.rand = randomization.name().into();
            Box::new(h)
        }
        "iid" => {
            cfg.order = "natural".into();
            cfg.rand = "iid".into();
            Box::new(IidSampler::new(a.d, a.reps, seed))
        }
        k => return Err(usage(format!("unknown point type '{k}' (expected lattice, dnet, halton or iid)"))),
    };
    Ok((cfg, generator))
}

fn cmd_gen(a: &GenArgs, seed: u64, prefix: &str, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let (cfg, generator) = resolve_gen(a, seed)?;
    let mut echo = format!("{prefix} {}", cfg.echo());
    let format = match (&a.format, &a.out) {
        (Some(f), _) => BatchFormat::parse(f)?,
        (None, Some(p)) => BatchFormat::from_path(p),
        (None, None) => BatchFormat::Csv,
    };
    if let Some(p) = &a.out {
        let _ = write!(echo, " --out {} --format {}", p.display(), format_name(format));
    }
    writeln!(err, "{echo}").map_err(io_fail)?;
    let batch = generator.batch(cfg.n)?;
    if batch.data().iter().any(|x| !(0.0..1.0).contains(x)) {
        return Err(numeric("generated coordinate outside [0, 1)"));
    }
    match &a.out {
        Some(p) => {
            lddata::write_point_batch(&batch, p, format)?;
            let spec = serde_json::to_value(&cfg).expect("config serializes");
            lddata::write_sidecar(p, &Sidecar::new(batch.meta.clone(), spec))?;
        }
        None => {
            if format == BatchFormat::Binary {
                out.write_all(&lddata::encode_batch_binary(&batch)).map_err(io_fail)?;
            } else {
                out.write_all(lddata::format_batch_csv(&batch).as_bytes()).map_err(io_fail)?;
            }
        }
    }
    Ok(EXIT_OK)
}

fn format_name(f: BatchFormat) -> &'static str {
    match f {
        BatchFormat::Csv => "csv",
        BatchFormat::Binary => "binary",
    }
}

/// Columns of a vector file: comma or whitespace separated, `#` comments.
fn read_columns(path: &Path, complex: bool) -> std::result::Result<Vec<Vec<Complex64>>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::from(QmcError::Io { path: path.into(), source: e }))?;
    let mut cols: Vec<Vec<Complex64>> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let vals = body
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| usage(format!("{}:{}: '{t}' is not a number", path.display(), k + 1)))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let row: Vec<Complex64> = if complex {
            if vals.len() % 2 != 0 {
                return Err(usage(format!("{}:{}: complex rows need (re, im) pairs", path.display(), k + 1)));
            }
            vals.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect()
        } else {
            vals.into_iter().map(|v| Complex64::new(v, 0.0)).collect()
        };
        if cols.is_empty() {
            cols = vec![Vec::new(); row.len()];
        }
        if row.len() != cols.len() {
            return Err(usage(format!("{}:{}: expected {} columns, found {}", path.display(), k + 1, cols.len(), row.len())));
        }
        for (c, v) in cols.iter_mut().zip(row) {
            c.push(v);
        }
    }
    if cols.is_empty() {
        return Err(usage(format!("{}: no data", path.display())));
    }
    Ok(cols)
}

fn cmd_transform(a: &TransformArgs, prefix: &str, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let mut echo = format!("{prefix} transform --op {} --input {}", a.op, a.input.display());
    if a.complex {
        echo.push_str(" --complex");
    }
    if let Some(p) = &a.out {
        let _ = write!(echo, " --out {}", p.display());
    }
    writeln!(err, "{echo}").map_err(io_fail)?;
    let cols = read_columns(&a.input, a.complex)?;
    let n = cols[0].len();
    if transforms::log2_exact(n).is_err() {
        return Err(usage(format!("vector length {n} is not a power of two")));
    }
    let mut stacked: Vec<Complex64> = cols.concat();
    let complex_out = match a.op.as_str() {
        "fftbr" => {
            transforms::fftbr_many(&mut stacked, n)?;
            true
        }
        "ifftbr" => {
            transforms::ifftbr_many(&mut stacked, n)?;
            true
        }
        "fwht" => {
            if a.complex {
                for col in stacked.chunks_mut(n) {
                    transforms::fwht_complex_inplace(col)?;
                }
            } else {
                let mut re: Vec<f64> = stacked.iter().map(|z| z.re).collect();
                transforms::fwht_many(&mut re, n)?;
                stacked = re.into_iter().map(|v| Complex64::new(v, 0.0)).collect();
            }
            a.complex
        }
        op => return Err(usage(format!("unknown transform '{op}' (expected fftbr, ifftbr or fwht)"))),
    };
    let ncols = cols.len();
    let mut text = String::with_capacity(stacked.len() * 24);
    for i in 0..n {
        for c in 0..ncols {
            if c > 0 {
                text.push(',');
            }
            let z = stacked[c * n + i];
            if complex_out {
                let _ = write!(text, "{:?},{:?}", z.re, z.im);
            } else {
                let _ = write!(text, "{:?}", z.re);
            }
        }
        text.push('\n');
    }
    match &a.out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::from(QmcError::Io { path: p.clone(), source: e }))?,
        None => out.write_all(text.as_bytes()).map_err(io_fail)?,
    }
    Ok(EXIT_OK)
}

fn parse_coords(s: &str) -> std::result::Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| usage(format!("'{t}' is not a number"))))
        .collect()
}

fn kernel_spec(k: &KernelOpts, family: KernelFamily, d: usize) -> std::result::Result<KernelSpec, Failure> {
    Ok(KernelSpec::uniform(family, d, k.alpha, k.gamma, k.eta)?)
}

fn kernel_echo(k: &KernelOpts, family: KernelFamily) -> String {
    format!(
        "--family {} --alpha {} --gamma {:?} --eta {:?}",
        family.name(),
        k.alpha,
        k.gamma,
        k.eta
    )
}

fn cmd_kernel(a: &KernelArgs, prefix: &str, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let family = KernelFamily::parse(a.kernel.family.as_deref().unwrap_or("si"))?;
    let x = parse_coords(&a.x)?;
    let y = parse_coords(&a.y)?;
    if x.len() != y.len() {
        return Err(usage(format!("--x has {} coordinates, --y has {}", x.len(), y.len())));
    }
    writeln!(err, "{prefix} kernel {} --x {} --y {}", kernel_echo(&a.kernel, family), a.x, a.y).map_err(io_fail)?;
    let spec = kernel_spec(&a.kernel, family, x.len())?;
    let v = spec.eval(&x, &y)?;
    if !v.is_finite() {
        return Err(numeric(format!("kernel value is {v}")));
    }
    writeln!(out, "{v:?}").map_err(io_fail)?;
    Ok(EXIT_OK)
}

fn cmd_discrepancy(a: &DiscrepancyArgs, prefix: &str, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let sidecar = lddata::read_sidecar(&a.points)?;
    let format = BatchFormat::from_path(&a.points);
    let raw = lddata::read_point_batch(&a.points, format)?;
    let family = match a.kernel.family.as_deref() {
        Some(f) => KernelFamily::parse(f)?,
        None if sidecar.meta.generator == "lattice" => KernelFamily::SiBernoulli,
        None => KernelFamily::DsiWalsh,
    };
    writeln!(err, "{prefix} discrepancy {} --points {}", kernel_echo(&a.kernel, family), a.points.display())
        .map_err(io_fail)?;
    let spec = kernel_spec(&a.kernel, family, raw.dim())?;
    let (reps, n, d) = (raw.reps(), raw.n(), raw.dim());
    let batch = PointBatch::new(reps, n, d, raw.into_data(), sidecar.meta)?;
    let w = vec![1.0 / n as f64; n];
    let mut text = String::from("r,n,discrepancy\n");
    for r in 0..reps {
        let one = PointBatch::new(1, n, d, batch.replication(r).to_vec(), batch.meta.clone())?;
        let gram = SpectralGram::from_batch(&spec, &one)?;
        let disc = gram.discrepancy(&w)?;
        if !disc.is_finite() {
            return Err(numeric(format!("discrepancy of replication {r} is {disc}")));
        }
        let _ = writeln!(text, "{r},{n},{disc:?}");
    }
    out.write_all(text.as_bytes()).map_err(io_fail)?;
    Ok(EXIT_OK)
}

fn cmd_integrate(a: &IntegrateArgs, seed: u64, prefix: &str, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let f: Integrand = match (&a.integrand, &a.expr) {
        (Some(name), None) => {
            let d = match a.d {
                Some(d) => d,
                None => rqmc::default_dim(name)?,
            };
            rqmc::integrand_library(name, d)?
        }
        (None, Some(src)) => {
            let d = a.d.ok_or_else(|| usage("--expr needs --d"))?;
            Integrand::expression(src, d, a.exact)?
        }
        _ => return Err(usage("give exactly one of --f or --expr")),
    };
    let sampler = SamplerSpec::parse(&a.sampler)?;
    let mut echo = format!("{prefix} integrate");
    match &a.expr {
        Some(src) => {
            let _ = write!(echo, " --expr '{src}'");
            if let Some(e) = a.exact {
                let _ = write!(echo, " --exact {e:?}");
            }
        }
        None => {
            let _ = write!(echo, " --f {}", f.name());
        }
    }
    let _ = write!(echo, " --d {} --sampler {} --R {} --tau {:?}", f.dim(), sampler.name(), a.reps, a.tau);
    match a.n {
        Some(n) => {
            let _ = write!(echo, " --n {n}");
        }
        None => {
            let _ = write!(echo, " --tol {:?} --n0 {} --n-max {}", a.tol, a.n0, a.n_max);
        }
    }
    let _ = write!(echo, " --format {}", a.format);
    writeln!(err, "{echo}").map_err(io_fail)?;
    if a.format != "text" && a.format != "csv" {
        return Err(usage(format!("unknown output format '{}'", a.format)));
    }
    let res = match a.n {
        Some(n) => rqmc::rqmc_fixed(&f, &sampler, n, a.reps, a.tau, seed)?,
        None => rqmc::rqmc_adaptive(
            &f,
            &sampler,
            a.reps,
            AdaptiveOptions {
                tau: a.tau,
                abs_tol: a.tol,
                n0: a.n0,
                n_max: a.n_max,
            },
            seed,
        )?,
    };
    if !res.mean.is_finite() || !res.sigma.is_finite() {
        return Err(numeric(format!("estimate is not finite (mean {}, sigma {})", res.mean, res.sigma)));
    }
    let mut text = String::new();
    if a.format == "csv" {
        text.push_str("integrand,sampler,d,n,R,seed,mean,ci_lo,ci_hi,sigma,level,tolerance_met\n");
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{:?},{:?},{:?},{:?},{:?},{}",
            csv_field(f.name()),
            sampler.name(),
            f.dim(),
            res.n,
            res.reps,
            seed,
            res.mean,
            res.ci_lo,
            res.ci_hi,
            res.sigma,
            res.level,
            res.tolerance_met
        );
    } else {
        let _ = writeln!(text, "integrand      {} (d = {})", f.name(), f.dim());
        let _ = writeln!(text, "sampler        {}", sampler.name());
        let _ = writeln!(text, "mean           {:.12e}", res.mean);
        let _ = writeln!(text, "ci             [{:.12e}, {:.12e}] at level {}", res.ci_lo, res.ci_hi, res.level);
        let _ = writeln!(text, "half-width     {:.3e}", res.half_width());
        let _ = writeln!(text, "sigma          {:.3e}", res.sigma);
        let _ = writeln!(text, "n              {}", res.n);
        let _ = writeln!(text, "R              {}", res.reps);
        let _ = writeln!(text, "seed           {seed}");
        if let Some(mu) = f.exact_mean() {
            let _ = writeln!(text, "exact          {mu:.12e} (error {:.3e})", (res.mean - mu).abs());
        }
        if a.n.is_none() {
            let _ = writeln!(text, "tolerance met  {}", res.tolerance_met);
        }
    }
    out.write_all(text.as_bytes()).map_err(io_fail)?;
    Ok(if res.tolerance_met { EXIT_OK } else { EXIT_TOLERANCE })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn cmd_study(a: &StudyArgs, seed: u64, prefix: &str, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    if a.m_min > a.m_max || a.m_max > 24 {
        return Err(usage("need m-min <= m-max <= 24"));
    }
    let mut integrands = Vec::new();
    for item in a.integrands.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, d) = match item.split_once(':') {
            Some((n, d)) => (n, d.parse::<usize>().map_err(|_| usage(format!("bad dimension in '{item}'")))?),
            None => (item, rqmc::default_dim(item)?),
        };
        integrands.push(rqmc::integrand_library(name, d)?);
    }
    let samplers = a
        .samplers
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(SamplerSpec::parse)
        .collect::<crate::Result<Vec<_>>>()?;
    if integrands.is_empty() || samplers.is_empty() {
        return Err(usage("need at least one integrand and one sampler"));
    }
    let names: Vec<String> = integrands.iter().map(|f| format!("{}:{}", f.name(), f.dim())).collect();
    let snames: Vec<String> = samplers.iter().map(SamplerSpec::name).collect();
    let mut echo = format!(
        "{prefix} study --integrands {} --samplers {} --m-min {} --m-max {} --randomizations {}",
        names.join(","),
        snames.join(","),
        a.m_min,
        a.m_max,
        a.randomizations
    );
    if let Some(p) = &a.out {
        let _ = write!(echo, " --out {}", p.display());
    }
    writeln!(err, "{echo}").map_err(io_fail)?;
    let grid: Vec<usize> = (a.m_min..=a.m_max).map(|m| 1usize << m).collect();
    let rows = rqmc::convergence_study(&integrands, &samplers, &grid, a.randomizations, seed)?;
    let mut text = String::from("integrand,sampler,n,rmse\n");
    for r in &rows {
        let _ = writeln!(text, "{},{},{},{:?}", r.integrand, r.sampler, r.n, r.rmse);
    }
    for chunk in rows.chunks(grid.len()) {
        let rm: Vec<f64> = chunk.iter().map(|r| r.rmse).collect();
        if rm.iter().all(|&v| v > 0.0) {
            let slope = rqmc::fit_slope(&grid, &rm);
            writeln!(err, "# slope {} {} {slope:.3}", chunk[0].integrand, chunk[0].sampler).map_err(io_fail)?;
        }
    }
    match &a.out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::from(QmcError::Io { path: p.clone(), source: e }))?,
        None => out.write_all(text.as_bytes()).map_err(io_fail)?,
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut full = vec!["qmckit"];
        full.extend_from_slice(args);
        let code = run(full, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn gen_to_stdout_is_deterministic() {
        let args = ["--seed", "7", "gen", "--type", "lattice", "--d", "2", "--n", "8", "--R", "1"];
        let (c1, o1, e1) = run_capture(&args);
        let (c2, o2, _) = run_capture(&args);
        assert_eq!((c1, c2), (0, 0));
        assert_eq!(o1, o2);
        assert_eq!(o1.lines().count(), 8);
        assert!(e1.starts_with("# qmckit --threads"));
    }

    #[test]
    fn halton_interlacing_is_usage_error() {
        let (code, _, err) = run_capture(&["gen", "--type", "halton", "--d", "2", "--n", "8", "--alpha", "2"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("interlacing"));
    }

    #[test]
    fn kernel_value() {
        let (code, out, _) = run_capture(&["kernel", "--family", "si", "--alpha", "1", "--x", "0.25", "--y", "0.75"]);
        assert_eq!(code, 0);
        // 1 + 2 pi^2 B_2(1/2) = 1 - pi^2 / 6
        let v: f64 = out.trim().parse().unwrap();
        assert!((v - (1.0 - std::f64::consts::PI.powi(2) / 6.0)).abs() < 1e-14);
    }

    #[test]
    fn integrate_modes() {
        let (code, out, _) = run_capture(&["integrate", "--f", "simple-d1", "--tol", "inf", "--n0", "64"]);
        assert_eq!(code, 0);
        assert!(out.contains("n              64"));
        let (code, _, err) = run_capture(&["integrate", "--f", "simple-d1", "--n", "64", "--R", "1"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("degrees of freedom"));
        let (code, _, _) =
            run_capture(&["integrate", "--f", "simple-d1", "--tol", "0", "--n0", "16", "--n-max", "64"]);
        assert_eq!(code, EXIT_TOLERANCE);
        let (code, _, err) = run_capture(&["integrate", "--expr", "x1 * * 2", "--d", "1"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("column 6"), "{err}");
        let (code, _, _) = run_capture(&["integrate", "--f", "nope"]);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        let (code, _, _) = run_capture(&["gen", "--bogus"]);
        assert_eq!(code, EXIT_USAGE);
    }
}
