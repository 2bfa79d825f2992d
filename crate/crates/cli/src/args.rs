use std::f64::consts::TAU;
use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};
use kdv_core::{EpsilonChoice, InitialDatum, Mode, SimConfig};

#[derive(Parser, Debug, Clone)]
#[command(
    name = "kdv-backstep",
    version,
    about = "Observer-based backstepping stabilization of linearized KdV",
    allow_negative_numbers = true
)]
pub struct Args {
    /// Domain length L.
    #[arg(long, default_value_t = TAU)]
    pub length: f64,
    /// Kernel parameter of the controller.
    #[arg(long, default_value_t = 0.01)]
    pub lambda: f64,
    /// Kernel parameter of the observer [default: same as --lambda].
    #[arg(long)]
    pub lambda_tilde: Option<f64>,
    /// Young's-inequality weight in kappa and mu: "auto" or a positive number.
    #[arg(long, default_value = "auto", value_parser = parse_epsilon)]
    pub epsilon: EpsilonChoice,
    /// Number of grid intervals J.
    #[arg(long, default_value_t = 200)]
    pub grid_points: usize,
    #[arg(long, default_value_t = 0.001)]
    pub dt: f64,
    #[arg(long, default_value_t = 30.0)]
    pub t_final: f64,
    /// Picard iterations for the kernel.
    #[arg(long, default_value_t = 10)]
    pub n_iter: usize,
    /// Succession iterations used for the reported inverse residual.
    #[arg(long, default_value_t = 10)]
    pub m_iter: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::TwoController)]
    pub mode: ModeArg,
    /// Plant initial datum: one-minus-cos, zero or file:<path>.
    #[arg(long, default_value = "one-minus-cos", value_parser = parse_datum)]
    pub u0: DatumSpec,
    /// Observer initial datum: one-minus-cos, zero or file:<path>.
    #[arg(long, default_value = "zero", value_parser = parse_datum)]
    pub uhat0: DatumSpec,
    /// Record norms every this many steps.
    #[arg(long, default_value_t = 10)]
    pub record_every: usize,
    /// Prefix for every output path; end it with '/' to write into a directory.
    #[arg(long, default_value = "results/")]
    pub out: String,
    /// Write the kernel and gain coefficient tables.
    #[arg(long)]
    pub dump_kernels: bool,
    /// Write full nodal states at every recorded step.
    #[arg(long)]
    pub dump_states: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeArg {
    Uncontrolled,
    TwoController,
    SingleController,
}

impl ModeArg {
    pub fn name(self) -> &'static str {
        match self {
            ModeArg::Uncontrolled => "uncontrolled",
            ModeArg::TwoController => "two-controller",
            ModeArg::SingleController => "single-controller",
        }
    }
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Uncontrolled => Mode::Uncontrolled,
            ModeArg::TwoController => Mode::TwoController,
            ModeArg::SingleController => Mode::SingleController,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatumSpec {
    OneMinusCos,
    Zero,
    File(PathBuf),
}

impl DatumSpec {
    pub fn label(&self) -> String {
        match self {
            DatumSpec::OneMinusCos => "one-minus-cos".into(),
            DatumSpec::Zero => "zero".into(),
            DatumSpec::File(p) => format!("file:{}", p.display()),
        }
    }

    pub fn load(&self) -> Result<InitialDatum> {
        Ok(match self {
            DatumSpec::OneMinusCos => InitialDatum::OneMinusCos,
            DatumSpec::Zero => InitialDatum::Zero,
            DatumSpec::File(path) => read_table(path)?,
        })
    }
}

fn parse_epsilon(s: &str) -> Result<EpsilonChoice, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(EpsilonChoice::Auto);
    }
    let v: f64 = s.parse().map_err(|_| format!("expected \"auto\" or a number, got {s:?}"))?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(format!("epsilon must be positive, got {v}"));
    }
    Ok(EpsilonChoice::Fixed(v))
}

fn parse_datum(s: &str) -> Result<DatumSpec, String> {
    match s {
        "one-minus-cos" => Ok(DatumSpec::OneMinusCos),
        "zero" => Ok(DatumSpec::Zero),
        _ => match s.strip_prefix("file:") {
            Some(p) if !p.is_empty() => Ok(DatumSpec::File(PathBuf::from(p))),
            _ => Err(format!("expected one-minus-cos, zero or file:<path>, got {s:?}")),
        },
    }
}

/// Two numeric columns `x,value`; an optional header row and `#` comments are skipped.
fn read_table(path: &Path) -> Result<InitialDatum> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let (mut x, mut values) = (Vec::new(), Vec::new());
    for (line, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("reading {}", path.display()))?;
        if record.len() != 2 {
            bail!("{}: row {} has {} columns, expected 2", path.display(), line + 1, record.len());
        }
        match (record[0].parse::<f64>(), record[1].parse::<f64>()) {
            (Ok(a), Ok(b)) => {
                x.push(a);
                values.push(b);
            }
            _ if line == 0 => continue,
            _ => bail!("{}: row {} is not numeric", path.display(), line + 1),
        }
    }
    if x.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok(InitialDatum::Tabulated { x, values })
}

/// Output locations derived from the `--out` prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutputs {
    pub norms_path: PathBuf,
    pub states_path: Option<PathBuf>,
    pub kernel_dir: Option<PathBuf>,
    pub report_path: PathBuf,
}

impl RunOutputs {
    pub fn from_prefix(prefix: &str, states: bool, kernels: bool) -> Self {
        let path = |name: &str| PathBuf::from(format!("{prefix}{name}"));
        RunOutputs {
            norms_path: path("norms.csv"),
            states_path: states.then(|| path("states.csv")),
            kernel_dir: kernels.then(|| path("kernels")),
            report_path: path("report.json"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Invocation {
    pub args: Args,
    pub config: SimConfig,
    pub outputs: RunOutputs,
}

impl Invocation {
    pub fn from_args(args: Args) -> Result<Self> {
        let config = SimConfig {
            length: args.length,
            lambda: args.lambda,
            lambda_tilde: args.lambda_tilde.unwrap_or(args.lambda),
            epsilon: args.epsilon,
            intervals: args.grid_points,
            dt: args.dt,
            t_final: args.t_final,
            n_iter: args.n_iter,
            m_iter: args.m_iter,
            mode: args.mode.into(),
            u0: args.u0.load()?,
            uhat0: args.uhat0.load()?,
            record_every: args.record_every,
            record_states: args.dump_states,
        };
        config.validate()?;
        let outputs = RunOutputs::from_prefix(&args.out, args.dump_states, args.dump_kernels);
        Ok(Invocation { args, config, outputs })
    }
}

/// Parses a full argument vector (program name first).
pub fn parse_args<I, T>(argv: I) -> Result<Invocation>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = Args::try_parse_from(argv)?;
    Invocation::from_args(args)
}
