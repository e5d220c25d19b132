//! Command-line front end: single-point evaluations, trajectory dumps,
//! figure sweeps and the oracle suite.
//!
//! Exit codes: 0 success, 1 validation failure, 2 bad input, 3 numerical
//! failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bath::{EffectiveOhmicSpectrum, LorentzianSpectrum, SpectralModel};
use crate::channel::{DeltaConvention, InitialState};
use crate::dressed::DEFAULT_STEPS;
use crate::error::{Error, Result};
use crate::experiments::{
    run_sweep, Axis, Figure, ModelPoint, OutputFormat, Parameter, SweepSpec, OUTPUT_DIR_ENV,
    PROVENANCE_PREFIX,
};
use crate::qsl::{qsl_population, qsl_time, qsl_two_qubit_closed, QslReport};
use crate::validation::{run_validation, ValidationOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_BAD_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "thermal-qsl",
    version,
    about = "Thermal quantum speed limits of driven open qubits"
)]
#[command(allow_negative_numbers = true)]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dump the decay rates γ₊(t), γ₋(t), γ_z(t) on the time grid.
    Rates(PointArgs),
    /// Dump the single-qubit map parameters a, b, c and cumulants.
    Evolve(PointArgs),
    /// Evaluate the speed-limit ratio at one parameter point.
    Qsl(QslArgs),
    /// Run a figure preset or a JSON sweep specification.
    Sweep(SweepArgs),
    /// Ratio against the GHZ qubit number at one (T, Omega) point.
    Scaling(ScalingArgs),
    /// Run the oracle suite; exit 1 if any check fails.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpectrumKind {
    Lorentzian,
    EffectiveOhmic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    Integrated,
    Literal,
}

impl From<ConventionArg> for DeltaConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Integrated => DeltaConvention::Integrated,
            ConventionArg::Literal => DeltaConvention::Literal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        }
    }
}

/// Reservoir, drive and time-grid parameters.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "lorentzian")]
    pub spectrum: SpectrumKind,
    /// Lorentzian coupling strength.
    #[arg(long, default_value_t = 0.1)]
    pub gamma0: f64,
    /// Lorentzian width.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Atomic transition frequency (also the cavity mode of the Ohmic model).
    #[arg(long, default_value_t = 1.1)]
    pub omega0: f64,
    /// Effective-Ohmic cavity leakage rate.
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    /// Effective-Ohmic atom-cavity coupling.
    #[arg(long, default_value_t = 0.01)]
    pub g: f64,
    /// Laser frequency.
    #[arg(long = "omegaL", default_value_t = 1.0)]
    pub omega_l: f64,
    /// Rabi drive strength.
    #[arg(long = "Omega", default_value_t = 0.0)]
    pub rabi: f64,
    /// Reservoir temperature.
    #[arg(long = "T", default_value_t = 0.0, allow_hyphen_values = true)]
    pub temperature: f64,
    /// Driving time τ_D.
    #[arg(long, default_value_t = 2.0)]
    pub tau: f64,
    /// Time-grid intervals on [0, τ_D].
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    pub steps: usize,
    /// Lower frequency cutoff of the bath integrals; spectrum default when absent.
    #[arg(long)]
    pub ir_cutoff: Option<f64>,
    /// Upper frequency cutoff of the bath integrals; spectrum default when absent.
    #[arg(long)]
    pub uv_cutoff: Option<f64>,
    /// How the δ(t) cumulant weights the rate difference γ₊ − γ₋.
    #[arg(long, value_enum, default_value = "integrated")]
    pub delta_convention: ConventionArg,
}

impl ModelArgs {
    pub fn spectrum(&self) -> Result<SpectralModel> {
        Ok(match self.spectrum {
            SpectrumKind::Lorentzian => SpectralModel::Lorentzian(LorentzianSpectrum::new(
                self.gamma0,
                self.lambda,
                self.omega0,
            )?),
            SpectrumKind::EffectiveOhmic => SpectralModel::EffectiveOhmic(
                EffectiveOhmicSpectrum::new(self.gamma, self.g, self.omega0)?,
            ),
        })
    }

    pub fn model(&self) -> Result<ModelPoint> {
        let spectrum = self.spectrum()?;
        let model = ModelPoint {
            spectrum,
            temperature: self.temperature,
            omega_l: self.omega_l,
            rabi: self.rabi,
            tau_d: self.tau,
            steps: self.steps,
            ir_cutoff: self
                .ir_cutoff
                .unwrap_or_else(|| spectrum.default_ir_cutoff()),
            uv_cutoff: self
                .uv_cutoff
                .unwrap_or_else(|| spectrum.default_uv_cutoff()),
            convention: self.delta_convention.into(),
        };
        // Validate everything before any computation starts; the bath is
        // checked at T = 0 so its low-temperature warning is logged once.
        if !(model.temperature >= 0.0) || !model.temperature.is_finite() {
            return Err(Error::invalid(
                "T",
                format!("must be finite and >= 0, got {}", model.temperature),
            ));
        }
        ModelPoint {
            temperature: 0.0,
            ..model
        }
        .bath()?;
        model.drive()?;
        crate::dressed::TimeGrid::new(model.tau_d, model.steps)?;
        Ok(model)
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output file (rates, evolve, qsl) or directory (sweep, scaling).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
}

#[derive(Debug, Clone, Args)]
pub struct PointArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Singular-value spectra for any initial state.
    Generic,
    /// Closed form for the two-qubit GHZ state.
    Closed,
    /// Population form for the single excited qubit.
    Population,
}

#[derive(Debug, Clone, Args)]
pub struct QslArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Number of qubits.
    #[arg(long = "N", default_value_t = 1)]
    pub n_qubits: usize,
    /// Initial state; defaults to `excited` for N = 1 and `ghz` otherwise.
    #[arg(long)]
    pub state: Option<String>,
    #[arg(long, value_enum, default_value = "generic")]
    pub method: Method,
    /// Output file; JSON is printed to stdout when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Figure preset: fig1..fig5.
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    pub figure: Option<String>,
    /// JSON sweep specification, JSON result, or CSV table with provenance.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Override the time-grid resolution.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Override the δ(t) cumulant convention.
    #[arg(long, value_enum)]
    pub delta_convention: Option<ConventionArg>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ScalingArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Largest qubit number.
    #[arg(long = "N-max", default_value_t = 12)]
    pub n_max: usize,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Restrict to the N ≤ 4 subset and fewer model points.
    #[arg(long)]
    pub quick: bool,
    /// How the δ(t) cumulant weights the rate difference γ₊ − γ₋.
    #[arg(long, value_enum, default_value = "integrated")]
    pub delta_convention: ConventionArg,
    /// Seed for the randomly drawn channel points.
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

/// Maps a library error onto the exit-code contract.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_BAD_INPUT
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_BAD_INPUT
            } else {
                EXIT_OK
            };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .try_init();
    match run(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs one command; `Ok` carries the exit code of a completed run.
pub fn run(command: &Command) -> Result<i32> {
    match command {
        Command::Rates(a) => cmd_rates(a),
        Command::Evolve(a) => cmd_evolve(a),
        Command::Qsl(a) => cmd_qsl(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Scaling(a) => cmd_scaling(a),
        Command::Validate(a) => cmd_validate(a),
    }
}

#[derive(Serialize)]
struct PointProvenance<'a> {
    program: &'static str,
    version: &'static str,
    model: &'a ModelPoint,
}

impl<'a> PointProvenance<'a> {
    fn new(model: &'a ModelPoint) -> Self {
        Self {
            program: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            model,
        }
    }
}

#[derive(Serialize)]
struct PointTable<'a, R: Serialize> {
    provenance: PointProvenance<'a>,
    rows: Vec<R>,
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            let written = out.write_all(text.as_bytes()).and_then(|_| out.flush());
            // A closed downstream pipe (e.g. `| head`) is not a failure.
            match written {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
                _ => {}
            }
        }
    }
    Ok(())
}

/// CSV with a provenance comment line, or JSON `{provenance, rows}`.
fn render_table<R: Serialize>(
    model: &ModelPoint,
    header: &[&str],
    rows: Vec<R>,
    record: impl Fn(&R) -> Vec<String>,
    format: FormatArg,
) -> Result<String> {
    let provenance = PointProvenance::new(model);
    match format {
        FormatArg::Json => {
            Ok(serde_json::to_string_pretty(&PointTable { provenance, rows })? + "\n")
        }
        FormatArg::Csv => {
            let mut buf = format!(
                "{PROVENANCE_PREFIX}{}\n",
                serde_json::to_string(&provenance)?
            )
            .into_bytes();
            {
                let mut w = csv::Writer::from_writer(&mut buf);
                w.write_record(header)?;
                for r in &rows {
                    w.write_record(record(r))?;
                }
                w.flush()?;
            }
            Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
        }
    }
}

#[derive(Serialize)]
struct RateRow {
    t: f64,
    gamma_plus: f64,
    gamma_minus: f64,
    gamma_z: f64,
}

pub fn cmd_rates(args: &PointArgs) -> Result<i32> {
    let model = args.model.model()?;
    let rates = model.rates()?;
    let rows: Vec<RateRow> = rates
        .grid
        .times()
        .zip(&rates.samples)
        .map(|(t, r)| RateRow {
            t,
            gamma_plus: r.gamma_plus,
            gamma_minus: r.gamma_minus,
            gamma_z: r.gamma_z,
        })
        .collect();
    let text = render_table(
        &model,
        &["t", "gamma_plus", "gamma_minus", "gamma_z"],
        rows,
        |r| {
            vec![
                r.t.to_string(),
                r.gamma_plus.to_string(),
                r.gamma_minus.to_string(),
                r.gamma_z.to_string(),
            ]
        },
        args.output.format,
    )?;
    emit(args.output.output.as_deref(), &text)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct EvolveRow {
    t: f64,
    a: f64,
    b_re: f64,
    b_im: f64,
    c: f64,
    da: f64,
    dc: f64,
    p: f64,
    r: f64,
    delta: f64,
}

pub fn cmd_evolve(args: &PointArgs) -> Result<i32> {
    let model = args.model.model()?;
    let (_, traj) = model.evolve()?;
    let rows: Vec<EvolveRow> = traj
        .points
        .iter()
        .map(|p| EvolveRow {
            t: p.t,
            a: p.a,
            b_re: p.b.re,
            b_im: p.b.im,
            c: p.c,
            da: p.da,
            dc: p.dc,
            p: p.p,
            r: p.r,
            delta: p.delta,
        })
        .collect();
    let text = render_table(
        &model,
        &["t", "a", "b_re", "b_im", "c", "da", "dc", "p", "r", "delta"],
        rows,
        |r| {
            [r.t, r.a, r.b_re, r.b_im, r.c, r.da, r.dc, r.p, r.r, r.delta]
                .iter()
                .map(f64::to_string)
                .collect()
        },
        args.output.format,
    )?;
    emit(args.output.output.as_deref(), &text)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct QslOutput {
    method: &'static str,
    /// `ratio` and `tau_qsl` come from `method`; the Λ integrals always
    /// come from the generic path.
    #[serde(flatten)]
    report: QslReport,
}

pub fn cmd_qsl(args: &QslArgs) -> Result<i32> {
    let state = match &args.state {
        Some(s) => s.parse()?,
        None if args.n_qubits == 1 => InitialState::Excited,
        None => InitialState::Ghz,
    };
    crate::channel::check_qubits(state, args.n_qubits)?;
    let method_ok = match args.method {
        Method::Generic => true,
        Method::Closed => state == InitialState::Ghz && args.n_qubits == 2,
        Method::Population => state == InitialState::Excited,
    };
    if !method_ok {
        return Err(Error::invalid(
            "method",
            format!(
                "{:?} does not apply to {state} with N = {}",
                args.method, args.n_qubits
            ),
        ));
    }
    let model = args.model.model()?;
    let (_, traj) = model.evolve()?;
    let mut report = qsl_time(&traj, state, args.n_qubits, model.tau_d)?;
    let method = match args.method {
        Method::Generic => "generic",
        Method::Closed => {
            report.ratio = qsl_two_qubit_closed(&traj, model.tau_d)?;
            "closed"
        }
        Method::Population => {
            report.ratio = qsl_population(&traj, model.tau_d)?;
            "population"
        }
    };
    report.tau_qsl = report.ratio * model.tau_d;
    let text = serde_json::to_string_pretty(&QslOutput { method, report })? + "\n";
    emit(args.output.as_deref(), &text)?;
    Ok(EXIT_OK)
}

fn output_dir(arg: Option<&Path>) -> PathBuf {
    arg.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn run_and_write(spec: &SweepSpec, jobs: usize, output: &OutputArgs) -> Result<i32> {
    let result = run_sweep(spec, jobs)?;
    let path = result.write_to_dir(&output_dir(output.output.as_deref()), output.format.into())?;
    println!("{}", path.display());
    Ok(EXIT_OK)
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<i32> {
    let mut spec = match (&args.figure, &args.spec) {
        (Some(f), _) => SweepSpec::preset(f.parse()?)?,
        (None, Some(path)) => SweepSpec::load(path)?,
        (None, None) => {
            return Err(Error::invalid(
                "figure",
                "either --figure or --spec is required",
            ))
        }
    };
    if let Some(steps) = args.steps {
        spec.steps = steps;
    }
    if let Some(c) = args.delta_convention {
        spec.delta_convention = c.into();
    }
    spec.validate()?;
    run_and_write(&spec, args.jobs, &args.output)
}

pub fn cmd_scaling(args: &ScalingArgs) -> Result<i32> {
    if args.n_max < 2 {
        return Err(Error::invalid(
            "N-max",
            format!("must be at least 2, got {}", args.n_max),
        ));
    }
    let model = args.model.model()?;
    let spec = SweepSpec {
        figure: Figure::Custom,
        spectrum: model.spectrum,
        omega_l: model.omega_l,
        tau_d: model.tau_d,
        steps: model.steps,
        ir_cutoff: Some(model.ir_cutoff),
        uv_cutoff: Some(model.uv_cutoff),
        initial_state: InitialState::Ghz,
        n_qubits: 1,
        temperature: model.temperature,
        omega: model.rabi,
        axes: vec![Axis::new(
            Parameter::Qubits,
            1.0,
            args.n_max as f64,
            args.n_max,
        )],
        delta_convention: model.convention,
        table: Default::default(),
        series_stride: 1,
    };
    spec.validate()?;
    run_and_write(&spec, args.jobs, &args.output)
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<i32> {
    let report = run_validation(&ValidationOptions {
        quick: args.quick,
        convention: args.delta_convention.into(),
        seed: args.seed,
    })?;
    for c in report.checks.iter().filter(|c| !c.passed) {
        eprintln!(
            "FAIL {}: value {:e} vs tolerance {:e} ({})",
            c.name, c.value, c.tolerance, c.detail
        );
    }
    emit(
        args.output.as_deref(),
        &(serde_json::to_string_pretty(&report)? + "\n"),
    )?;
    Ok(if report.passed {
        EXIT_OK
    } else {
        EXIT_VALIDATION
    })
}
