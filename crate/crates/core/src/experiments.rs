//! Parameter sweeps over temperature, drive strength and qubit number.
//!
//! A [`SweepSpec`] describes fixed model parameters plus one or more axes;
//! [`run_sweep`] evaluates the cartesian grid on a bounded worker pool and
//! returns a [`SweepResult`] whose CSV and JSON renderings carry a
//! provenance block sufficient to reproduce the table.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bath::{EffectiveOhmicSpectrum, LorentzianSpectrum, SpectralModel, ThermalBath};
use crate::channel::{channel_trajectory_with, ChannelTrajectory, DeltaConvention, InitialState};
use crate::dressed::{
    dressed_frame, rates_trajectory, DriveConfig, RatesTrajectory, DEFAULT_STEPS, MIN_STEPS,
};
use crate::error::{Error, Result};
use crate::qsl::qsl_time;

/// Environment variable naming the default directory for sweep output.
pub const OUTPUT_DIR_ENV: &str = "THERMAL_QSL_OUTPUT_DIR";

/// Largest ratio change tolerated when the IR cutoff is lowered tenfold.
pub const IR_SENTINEL_TOLERANCE: f64 = 1e-3;

/// Prefix of the provenance comment line heading every CSV table.
pub const PROVENANCE_PREFIX: &str = "# provenance: ";

const DEFAULT_SERIES_STRIDE: usize = 16;

/// Which published figure a sweep reproduces, or `custom`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Figure {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Custom,
}

impl Figure {
    pub const PRESETS: [Figure; 5] = [
        Figure::Fig1,
        Figure::Fig2,
        Figure::Fig3,
        Figure::Fig4,
        Figure::Fig5,
    ];
}

impl FromStr for Figure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" | "1" => Ok(Self::Fig1),
            "fig2" | "2" => Ok(Self::Fig2),
            "fig3" | "3" => Ok(Self::Fig3),
            "fig4" | "4" => Ok(Self::Fig4),
            "fig5" | "5" => Ok(Self::Fig5),
            "custom" => Ok(Self::Custom),
            other => Err(Error::invalid(
                "figure",
                format!("expected fig1..fig5 or custom, got `{other}`"),
            )),
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Fig1 => "fig1",
            Self::Fig2 => "fig2",
            Self::Fig3 => "fig3",
            Self::Fig4 => "fig4",
            Self::Fig5 => "fig5",
            Self::Custom => "custom",
        })
    }
}

/// A swept parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    /// Reservoir temperature `T`.
    Temperature,
    /// Rabi drive strength `Ω`.
    Omega,
    /// Number of qubits `N` in the GHZ state.
    Qubits,
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Temperature => "temperature",
            Self::Omega => "omega",
            Self::Qubits => "qubits",
        })
    }
}

/// `points` evenly spaced values from `min` to `max` inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub parameter: Parameter,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(parameter: Parameter, min: f64, max: f64, points: usize) -> Self {
        Self {
            parameter,
            min,
            max,
            points,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        let last = self.points.saturating_sub(1).max(1) as f64;
        (0..self.points)
            .map(|k| {
                if k + 1 == self.points {
                    self.max
                } else {
                    self.min + (self.max - self.min) * k as f64 / last
                }
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return Err(Error::invalid(
                "axes",
                format!(
                    "axis `{}` needs at least 2 points, got {}",
                    self.parameter, self.points
                ),
            ));
        }
        if !self.min.is_finite() || !self.max.is_finite() || !(self.max > self.min) {
            return Err(Error::invalid(
                "axes",
                format!(
                    "axis `{}` needs finite min < max, got [{}, {}]",
                    self.parameter, self.min, self.max
                ),
            ));
        }
        match self.parameter {
            Parameter::Temperature if self.min < 0.0 => Err(Error::invalid(
                "axes",
                format!("temperature axis must be >= 0, got min {}", self.min),
            )),
            Parameter::Omega if self.min < 0.0 => Err(Error::invalid(
                "axes",
                format!("omega axis must be >= 0, got min {}", self.min),
            )),
            Parameter::Qubits => {
                let values = self.values();
                if values.iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
                    return Err(Error::invalid(
                        "axes",
                        format!(
                            "qubit axis [{}, {}] with {} points must land on integers >= 1",
                            self.min, self.max, self.points
                        ),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// What each grid point contributes to the output table.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    /// One row per grid point with `τ_QSL/τ_D` and the Λ integrals.
    #[default]
    Ratio,
    /// Excited-state population time series per `(T, Ω)` pair.
    Population,
}

/// Complete, serializable description of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub figure: Figure,
    pub spectrum: SpectralModel,
    pub omega_l: f64,
    pub tau_d: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Defaults to the spectrum's own cutoff when absent.
    #[serde(default)]
    pub ir_cutoff: Option<f64>,
    #[serde(default)]
    pub uv_cutoff: Option<f64>,
    pub initial_state: InitialState,
    /// Qubit number when no qubit axis is present.
    #[serde(default = "default_qubits")]
    pub n_qubits: usize,
    /// Temperature when no temperature axis is present.
    #[serde(default)]
    pub temperature: f64,
    /// Drive strength when no omega axis is present.
    #[serde(default)]
    pub omega: f64,
    pub axes: Vec<Axis>,
    #[serde(default)]
    pub delta_convention: DeltaConvention,
    #[serde(default)]
    pub table: TableKind,
    /// Keep every `series_stride`-th time sample in population tables.
    #[serde(default = "default_series_stride")]
    pub series_stride: usize,
}

fn default_steps() -> usize {
    DEFAULT_STEPS
}

fn default_qubits() -> usize {
    1
}

fn default_series_stride() -> usize {
    DEFAULT_SERIES_STRIDE
}

fn reference_lorentzian() -> SpectralModel {
    SpectralModel::Lorentzian(LorentzianSpectrum {
        gamma0: 0.1,
        lambda: 1.0,
        omega0: 1.1,
    })
}

impl SweepSpec {
    /// Default specification of a published figure.
    pub fn preset(figure: Figure) -> Result<Self> {
        let base = SweepSpec {
            figure,
            spectrum: reference_lorentzian(),
            omega_l: 1.0,
            tau_d: 2.0,
            steps: DEFAULT_STEPS,
            ir_cutoff: None,
            uv_cutoff: None,
            initial_state: InitialState::Excited,
            n_qubits: 1,
            temperature: 0.0,
            omega: 0.0,
            axes: Vec::new(),
            delta_convention: DeltaConvention::Integrated,
            table: TableKind::Ratio,
            series_stride: DEFAULT_SERIES_STRIDE,
        };
        Ok(match figure {
            Figure::Fig1 => SweepSpec {
                axes: vec![
                    Axis::new(Parameter::Temperature, 0.0, 1.0, 41),
                    Axis::new(Parameter::Omega, 0.0, 15.0, 41),
                ],
                ..base
            },
            Figure::Fig2 => SweepSpec {
                axes: vec![
                    Axis::new(Parameter::Temperature, 0.0, 0.8, 2),
                    Axis::new(Parameter::Omega, 0.0, 10.0, 2),
                ],
                table: TableKind::Population,
                ..base
            },
            Figure::Fig3 => SweepSpec {
                initial_state: InitialState::Ghz,
                n_qubits: 2,
                axes: vec![
                    Axis::new(Parameter::Omega, 0.1, 0.3, 3),
                    Axis::new(Parameter::Temperature, 0.0, 0.8, 81),
                ],
                ..base
            },
            Figure::Fig4 => SweepSpec {
                initial_state: InitialState::Ghz,
                temperature: 0.1,
                omega: 0.4,
                axes: vec![Axis::new(Parameter::Qubits, 1.0, 12.0, 12)],
                ..base
            },
            Figure::Fig5 => SweepSpec {
                spectrum: SpectralModel::EffectiveOhmic(EffectiveOhmicSpectrum::new(
                    0.1, 0.01, 1.1,
                )?),
                axes: vec![
                    Axis::new(Parameter::Temperature, 0.1, 0.5, 2),
                    Axis::new(Parameter::Omega, 0.0, 10.0, 101),
                ],
                ..base
            },
            Figure::Custom => {
                return Err(Error::invalid(
                    "figure",
                    "`custom` has no preset; supply a spec file",
                ))
            }
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SweepSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Reads a spec from a JSON spec file, a JSON sweep result, or a CSV
    /// table headed by a provenance line.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_any(&text)
    }

    /// As [`SweepSpec::load`] for in-memory text.
    pub fn from_any(text: &str) -> Result<Self> {
        let trimmed = text.trim_start();
        let spec = if let Some(rest) = trimmed.strip_prefix(PROVENANCE_PREFIX) {
            let line = rest.lines().next().unwrap_or_default();
            serde_json::from_str::<Provenance>(line)?.spec
        } else {
            let value: serde_json::Value = serde_json::from_str(trimmed)?;
            match value.get("provenance") {
                Some(p) => serde_json::from_value::<Provenance>(p.clone())?.spec,
                None => serde_json::from_value::<SweepSpec>(value)?,
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_l > 0.0) || !self.omega_l.is_finite() {
            return Err(Error::invalid(
                "omega_l",
                format!("must be finite and > 0, got {}", self.omega_l),
            ));
        }
        if !(self.tau_d > 0.0) || !self.tau_d.is_finite() {
            return Err(Error::invalid(
                "tau_d",
                format!("must be finite and > 0, got {}", self.tau_d),
            ));
        }
        if self.steps < MIN_STEPS {
            return Err(Error::invalid(
                "steps",
                format!("must be at least {MIN_STEPS}, got {}", self.steps),
            ));
        }
        if self.series_stride == 0 {
            return Err(Error::invalid("series_stride", "must be at least 1"));
        }
        if !(self.temperature >= 0.0) || !self.temperature.is_finite() {
            return Err(Error::invalid(
                "temperature",
                format!("must be finite and >= 0, got {}", self.temperature),
            ));
        }
        if !(self.omega >= 0.0) || !self.omega.is_finite() {
            return Err(Error::invalid(
                "omega",
                format!("must be finite and >= 0, got {}", self.omega),
            ));
        }
        if self.axes.is_empty() {
            return Err(Error::invalid("axes", "at least one axis is required"));
        }
        for (i, axis) in self.axes.iter().enumerate() {
            axis.validate()?;
            if self.axes[..i].iter().any(|a| a.parameter == axis.parameter) {
                return Err(Error::invalid(
                    "axes",
                    format!("parameter `{}` appears on two axes", axis.parameter),
                ));
            }
        }
        let has_qubit_axis = self.axes.iter().any(|a| a.parameter == Parameter::Qubits);
        if has_qubit_axis && self.table == TableKind::Population {
            return Err(Error::invalid(
                "axes",
                "population tables cannot sweep the qubit number",
            ));
        }
        for n in self.qubit_values() {
            crate::channel::check_qubits(self.initial_state, n)?;
        }
        // Constructing the bath checks the cutoffs against the spectrum.
        let (ir, uv) = self.cutoffs();
        ThermalBath::with_cutoffs(self.spectrum, 0.0, ir, uv)?;
        Ok(())
    }

    /// `(ir_cutoff, uv_cutoff)` with spectrum defaults filled in.
    pub fn cutoffs(&self) -> (f64, f64) {
        (
            self.ir_cutoff
                .unwrap_or_else(|| self.spectrum.default_ir_cutoff()),
            self.uv_cutoff
                .unwrap_or_else(|| self.spectrum.default_uv_cutoff()),
        )
    }

    /// Copy with every defaulted field made explicit.
    pub fn resolved(&self) -> Self {
        let (ir, uv) = self.cutoffs();
        SweepSpec {
            ir_cutoff: Some(ir),
            uv_cutoff: Some(uv),
            ..self.clone()
        }
    }

    /// First 16 hex digits of the SHA-256 of the resolved spec's JSON.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(&self.resolved()).expect("spec serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `<figure>_<hash>.<extension>`.
    pub fn file_name(&self, extension: &str) -> String {
        format!("{}_{}.{extension}", self.figure, self.hash())
    }

    fn axis_values(&self, parameter: Parameter) -> Option<Vec<f64>> {
        self.axes
            .iter()
            .find(|a| a.parameter == parameter)
            .map(Axis::values)
    }

    fn qubit_values(&self) -> Vec<usize> {
        match self.axis_values(Parameter::Qubits) {
            Some(v) => v.into_iter().map(|x| x as usize).collect(),
            None => vec![self.n_qubits],
        }
    }

    /// Grid points in output order: the first axis varies slowest.
    pub fn grid(&self) -> Vec<GridPoint> {
        let mut points = vec![GridPoint {
            temperature: self.temperature,
            omega: self.omega,
            n_qubits: self.n_qubits,
        }];
        for axis in &self.axes {
            let values = axis.values();
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |&v| {
                        let mut q = p;
                        match axis.parameter {
                            Parameter::Temperature => q.temperature = v,
                            Parameter::Omega => q.omega = v,
                            Parameter::Qubits => q.n_qubits = v as usize,
                        }
                        q
                    })
                })
                .collect();
        }
        points
    }

    /// Model at one `(T, Ω)` pair of this sweep.
    pub fn model(&self, temperature: f64, omega: f64) -> ModelPoint {
        let (ir_cutoff, uv_cutoff) = self.cutoffs();
        ModelPoint {
            spectrum: self.spectrum,
            temperature,
            omega_l: self.omega_l,
            rabi: omega,
            tau_d: self.tau_d,
            steps: self.steps,
            ir_cutoff,
            uv_cutoff,
            convention: self.delta_convention,
        }
    }
}

/// Parameters of one sweep point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub temperature: f64,
    pub omega: f64,
    pub n_qubits: usize,
}

/// Everything needed to evolve one driven qubit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelPoint {
    pub spectrum: SpectralModel,
    pub temperature: f64,
    pub omega_l: f64,
    pub rabi: f64,
    pub tau_d: f64,
    pub steps: usize,
    pub ir_cutoff: f64,
    pub uv_cutoff: f64,
    pub convention: DeltaConvention,
}

impl ModelPoint {
    /// Reference parameters: Lorentzian `γ0 = 0.1, λ = 1, ω0 = 1.1`, `ω_L = 1`,
    /// `τ_D = 2`, at the given temperature and drive.
    pub fn reference(temperature: f64, rabi: f64) -> Self {
        let spectrum = reference_lorentzian();
        ModelPoint {
            spectrum,
            temperature,
            omega_l: 1.0,
            rabi,
            tau_d: 2.0,
            steps: DEFAULT_STEPS,
            ir_cutoff: spectrum.default_ir_cutoff(),
            uv_cutoff: spectrum.default_uv_cutoff(),
            convention: DeltaConvention::Integrated,
        }
    }

    pub fn bath(&self) -> Result<ThermalBath> {
        ThermalBath::with_cutoffs(
            self.spectrum,
            self.temperature,
            self.ir_cutoff,
            self.uv_cutoff,
        )
    }

    pub fn drive(&self) -> Result<DriveConfig> {
        DriveConfig::new(self.spectrum.peak(), self.omega_l, self.rabi)
    }

    pub fn rates(&self) -> Result<RatesTrajectory> {
        let bath = self.bath()?;
        let drive = self.drive()?;
        let frame = dressed_frame(&drive)?;
        rates_trajectory(&bath, &frame, &drive, self.tau_d, self.steps)
    }

    /// Rates and the channel trajectory built from them.
    pub fn evolve(&self) -> Result<(RatesTrajectory, ChannelTrajectory)> {
        let rates = self.rates()?;
        let channel = channel_trajectory_with(&rates, self.convention)?;
        Ok((rates, channel))
    }
}

/// One row of a ratio table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QslRow {
    pub temperature: f64,
    pub omega: f64,
    pub n_qubits: usize,
    pub ratio: f64,
    pub tau_qsl: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda_inf: f64,
    pub distance_term: f64,
    /// Largest single-qubit `dP/dt` on `[0, τ_D]`; positive means the
    /// excited population rises somewhere.
    pub max_population_rate: f64,
    pub min_choi_eigenvalue: f64,
    pub degenerate: bool,
    pub ir_sensitive: bool,
}

/// One sample of a population time series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationRow {
    pub temperature: f64,
    pub omega: f64,
    pub t: f64,
    pub population: f64,
    pub population_rate: f64,
    pub ir_sensitive: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "rows", rename_all = "snake_case")]
pub enum Table {
    Ratio(Vec<QslRow>),
    Population(Vec<PopulationRow>),
}

impl Table {
    pub fn len(&self) -> usize {
        match self {
            Table::Ratio(r) => r.len(),
            Table::Population(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Ratio at a sentinel point, recomputed with the IR cutoff lowered tenfold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrCheck {
    pub temperature: f64,
    pub omega: f64,
    pub n_qubits: usize,
    pub ir_cutoff: f64,
    pub ratio: f64,
    pub ratio_refined: f64,
    pub change: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Everything needed to reproduce a table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub program: String,
    pub version: String,
    pub spec_hash: String,
    /// Resolved sweep specification.
    pub spec: SweepSpec,
    /// Derived coupling `α` of the effective-Ohmic model, if used.
    pub alpha: Option<f64>,
    pub ir_check: IrCheck,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub provenance: Provenance,
    pub table: Table,
}

/// Output encodings of a [`SweepResult`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::invalid(
                "format",
                format!("expected csv or json, got `{other}`"),
            )),
        }
    }
}

impl OutputFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

impl SweepResult {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "{PROVENANCE_PREFIX}{}",
            serde_json::to_string(&self.provenance)?
        )?;
        let mut w = csv::Writer::from_writer(out);
        match &self.table {
            Table::Ratio(rows) => {
                w.write_record([
                    "temperature",
                    "omega",
                    "n_qubits",
                    "ratio",
                    "tau_qsl",
                    "lambda1",
                    "lambda2",
                    "lambda_inf",
                    "distance_term",
                    "max_population_rate",
                    "min_choi_eigenvalue",
                    "degenerate",
                    "ir_sensitive",
                ])?;
                for r in rows {
                    w.write_record([
                        r.temperature.to_string(),
                        r.omega.to_string(),
                        r.n_qubits.to_string(),
                        r.ratio.to_string(),
                        r.tau_qsl.to_string(),
                        r.lambda1.to_string(),
                        r.lambda2.to_string(),
                        r.lambda_inf.to_string(),
                        r.distance_term.to_string(),
                        r.max_population_rate.to_string(),
                        r.min_choi_eigenvalue.to_string(),
                        r.degenerate.to_string(),
                        r.ir_sensitive.to_string(),
                    ])?;
                }
            }
            Table::Population(rows) => {
                w.write_record([
                    "temperature",
                    "omega",
                    "t",
                    "population",
                    "population_rate",
                    "ir_sensitive",
                ])?;
                for r in rows {
                    w.write_record([
                        r.temperature.to_string(),
                        r.omega.to_string(),
                        r.t.to_string(),
                        r.population.to_string(),
                        r.population_rate.to_string(),
                        r.ir_sensitive.to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `<figure>_<hash>.<ext>` into `dir` and returns its path.
    pub fn write_to_dir(&self, dir: &Path, format: OutputFormat) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(self.provenance.spec.file_name(format.extension()));
        let text = match format {
            OutputFormat::Csv => self.to_csv_string()?,
            OutputFormat::Json => self.to_json_string()? + "\n",
        };
        std::fs::write(&path, text)?;
        Ok(path)
    }
}

/// Runs the sweep on a pool of `jobs` workers (0 = one per core). Results
/// are assembled in grid order, so output does not depend on `jobs`.
pub fn run_sweep(spec: &SweepSpec, jobs: usize) -> Result<SweepResult> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Resource(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_in_pool(spec))
}

fn run_in_pool(spec: &SweepSpec) -> Result<SweepResult> {
    let grid = spec.grid();

    // Trajectories depend on (T, Ω) only; share them across qubit numbers.
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    let mut pair_index: HashMap<(u64, u64), usize> = HashMap::new();
    let grid_pairs: Vec<usize> = grid
        .iter()
        .map(|g| {
            *pair_index
                .entry((g.temperature.to_bits(), g.omega.to_bits()))
                .or_insert_with(|| {
                    pairs.push((g.temperature, g.omega));
                    pairs.len() - 1
                })
        })
        .collect();
    log::info!(
        "{}: {} grid points over {} trajectories of {} steps",
        spec.figure,
        grid.len(),
        pairs.len(),
        spec.steps
    );

    let trajectories: Vec<ChannelTrajectory> = pairs
        .par_iter()
        .map(|&(t, om)| spec.model(t, om).evolve().map(|(_, c)| c))
        .collect::<Result<_>>()?;

    let ir_check = sentinel_check(spec, &grid, &grid_pairs, &trajectories)?;
    if !ir_check.passed {
        log::warn!(
            "IR sentinel at T = {}, Omega = {}: ratio moved by {:.3e} when ir_cutoff was lowered to {:e}",
            ir_check.temperature,
            ir_check.omega,
            ir_check.change,
            ir_check.ir_cutoff / 10.0
        );
    } else {
        log::info!("IR sentinel change {:.3e}", ir_check.change);
    }
    let ir_flag =
        |temperature: f64| !ir_check.passed && spec.spectrum.ir_exposed() && temperature > 0.0;

    let table = match spec.table {
        TableKind::Ratio => {
            let rows = grid
                .par_iter()
                .zip(grid_pairs.par_iter())
                .map(|(g, &pair)| {
                    let traj = &trajectories[pair];
                    let report = qsl_time(traj, spec.initial_state, g.n_qubits, spec.tau_d)?;
                    let max_rate = traj
                        .points
                        .iter()
                        .map(|p| p.da)
                        .fold(f64::NEG_INFINITY, f64::max);
                    Ok(QslRow {
                        temperature: g.temperature,
                        omega: g.omega,
                        n_qubits: g.n_qubits,
                        ratio: report.ratio,
                        tau_qsl: report.tau_qsl,
                        lambda1: report.lambda1,
                        lambda2: report.lambda2,
                        lambda_inf: report.lambda_inf,
                        distance_term: report.distance_term,
                        max_population_rate: max_rate,
                        min_choi_eigenvalue: report.flags.min_choi_eigenvalue,
                        degenerate: report.flags.degenerate_endpoint,
                        ir_sensitive: ir_flag(g.temperature),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Table::Ratio(rows)
        }
        TableKind::Population => {
            let mut rows = Vec::new();
            for (&(temperature, omega), traj) in pairs.iter().zip(&trajectories) {
                let last = traj.points.len() - 1;
                for (k, p) in traj.points.iter().enumerate() {
                    if k % spec.series_stride == 0 || k == last {
                        rows.push(PopulationRow {
                            temperature,
                            omega,
                            t: p.t,
                            population: p.a,
                            population_rate: p.da,
                            ir_sensitive: ir_flag(temperature),
                        });
                    }
                }
            }
            Table::Population(rows)
        }
    };

    let alpha = match spec.spectrum {
        SpectralModel::EffectiveOhmic(o) => Some(o.alpha()),
        SpectralModel::Lorentzian(_) => None,
    };
    Ok(SweepResult {
        provenance: Provenance {
            program: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            spec_hash: spec.hash(),
            spec: spec.resolved(),
            alpha,
            ir_check,
        },
        table,
    })
}

/// The grid point with the highest temperature (ties: strongest drive,
/// most qubits), where the infrared sensitivity is largest.
fn sentinel_check(
    spec: &SweepSpec,
    grid: &[GridPoint],
    grid_pairs: &[usize],
    trajectories: &[ChannelTrajectory],
) -> Result<IrCheck> {
    let (idx, g) = grid
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| {
            a.temperature
                .total_cmp(&b.temperature)
                .then(a.omega.total_cmp(&b.omega))
                .then(a.n_qubits.cmp(&b.n_qubits))
        })
        .expect("grid is non-empty");
    let base = qsl_time(
        &trajectories[grid_pairs[idx]],
        spec.initial_state,
        g.n_qubits,
        spec.tau_d,
    )?;
    let mut model = spec.model(g.temperature, g.omega);
    let ir_cutoff = model.ir_cutoff;
    model.ir_cutoff /= 10.0;
    let (_, refined_traj) = model.evolve()?;
    let refined = qsl_time(&refined_traj, spec.initial_state, g.n_qubits, spec.tau_d)?;
    let change = (refined.ratio - base.ratio).abs();
    Ok(IrCheck {
        temperature: g.temperature,
        omega: g.omega,
        n_qubits: g.n_qubits,
        ir_cutoff,
        ratio: base.ratio,
        ratio_refined: refined.ratio,
        change,
        tolerance: IR_SENTINEL_TOLERANCE,
        passed: change < IR_SENTINEL_TOLERANCE,
    })
}

/// Runs the default specification of a published figure.
pub fn run_figure(figure: Figure, jobs: usize) -> Result<SweepResult> {
    run_sweep(&SweepSpec::preset(figure)?, jobs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(figure: Figure) -> SweepSpec {
        let mut spec = SweepSpec::preset(figure).unwrap();
        spec.steps = 128;
        for axis in &mut spec.axes {
            if axis.parameter != Parameter::Qubits {
                axis.points = 2;
            }
        }
        spec
    }

    #[test]
    fn axis_values_hit_endpoints() {
        let a = Axis::new(Parameter::Omega, 0.0, 15.0, 41);
        let v = a.values();
        assert_eq!(v.len(), 41);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[40], 15.0);
        assert!((v[1] - 0.375).abs() < 1e-15);
    }

    #[test]
    fn presets_validate() {
        for f in Figure::PRESETS {
            SweepSpec::preset(f).unwrap().validate().unwrap();
        }
        assert!(SweepSpec::preset(Figure::Custom).is_err());
    }

    #[test]
    fn grid_order_has_first_axis_slowest() {
        let spec = SweepSpec::preset(Figure::Fig3).unwrap();
        let g = spec.grid();
        assert_eq!(g.len(), 3 * 81);
        assert_eq!((g[0].omega, g[0].temperature), (0.1, 0.0));
        assert_eq!((g[1].omega, g[1].temperature), (0.1, 0.01));
        assert_eq!(g[81].omega, 0.2);
        assert!(g.iter().all(|p| p.n_qubits == 2));
    }

    #[test]
    fn validation_rejects_bad_specs() {
        let good = SweepSpec::preset(Figure::Fig1).unwrap();
        let mut s = good.clone();
        s.axes.clear();
        assert!(s.validate().is_err());
        let mut s = good.clone();
        s.axes[0].points = 1;
        assert!(s.validate().is_err());
        let mut s = good.clone();
        s.axes[1].parameter = Parameter::Temperature;
        assert!(s.validate().is_err());
        let mut s = good.clone();
        s.axes.push(Axis::new(Parameter::Qubits, 1.0, 3.0, 3));
        assert!(s.validate().is_err(), "excited state with N > 1");
        let mut s = SweepSpec::preset(Figure::Fig4).unwrap();
        s.axes[0] = Axis::new(Parameter::Qubits, 1.0, 2.0, 3);
        assert!(s.validate().is_err(), "fractional qubit numbers");
        let mut s = good;
        s.steps = 8;
        assert!(matches!(
            s.validate(),
            Err(Error::InvalidParameter { field: "steps", .. })
        ));
    }

    #[test]
    fn spec_json_round_trip_and_defaults() {
        let spec = SweepSpec::preset(Figure::Fig5).unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(SweepSpec::from_json(&text).unwrap(), spec);

        let minimal = r#"{
            "figure": "custom",
            "spectrum": {"kind": "lorentzian", "gamma0": 0.1, "lambda": 1.0, "omega0": 1.1},
            "omega_l": 1.0, "tau_d": 2.0, "initial_state": "excited",
            "axes": [{"parameter": "omega", "min": 0.0, "max": 1.0, "points": 2}]
        }"#;
        let s = SweepSpec::from_json(minimal).unwrap();
        assert_eq!(s.steps, DEFAULT_STEPS);
        assert_eq!(s.n_qubits, 1);
        assert_eq!(s.delta_convention, DeltaConvention::Integrated);
        assert!(SweepSpec::from_json(&minimal.replace("\"axes\"", "\"axis\"")).is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = SweepSpec::preset(Figure::Fig1).unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
        b.steps += 1;
        assert_ne!(a.hash(), b.hash());
        // Explicit default cutoffs hash like omitted ones.
        assert_eq!(a.hash(), a.resolved().hash());
        assert!(a.file_name("csv").starts_with("fig1_"));
    }

    #[test]
    fn ratio_sweep_runs_and_round_trips_provenance() {
        let spec = small(Figure::Fig1);
        let result = run_sweep(&spec, 1).unwrap();
        assert_eq!(result.table.len(), 4);
        let Table::Ratio(rows) = &result.table else {
            panic!("ratio table expected")
        };
        for r in rows {
            assert!(r.ratio > 0.0 && r.ratio <= 1.0 + 1e-12);
            assert!(!r.degenerate);
        }
        assert!(result.provenance.alpha.is_none());

        let csv = result.to_csv_string().unwrap();
        assert!(csv.starts_with(PROVENANCE_PREFIX));
        let again = SweepSpec::from_any(&csv).unwrap();
        assert_eq!(again, spec.resolved());
        let json = result.to_json_string().unwrap();
        assert_eq!(SweepSpec::from_any(&json).unwrap(), spec.resolved());
        assert_eq!(run_sweep(&again, 1).unwrap().to_csv_string().unwrap(), csv);
    }

    #[test]
    fn population_series_keeps_endpoints() {
        let spec = small(Figure::Fig2);
        let result = run_sweep(&spec, 1).unwrap();
        let Table::Population(rows) = &result.table else {
            panic!("population table expected")
        };
        // 128 steps with stride 16 → 9 samples per trace, four traces.
        assert_eq!(rows.len(), 4 * 9);
        assert_eq!(rows[0].t, 0.0);
        assert_eq!(rows[0].population, 1.0);
        assert_eq!(rows[8].t, 2.0);
    }

    #[test]
    fn qubit_axis_shares_one_trajectory() {
        let mut spec = SweepSpec::preset(Figure::Fig4).unwrap();
        spec.steps = 128;
        spec.axes[0] = Axis::new(Parameter::Qubits, 1.0, 4.0, 4);
        let result = run_sweep(&spec, 1).unwrap();
        let Table::Ratio(rows) = &result.table else {
            panic!("ratio table expected")
        };
        assert_eq!(
            rows.iter().map(|r| r.n_qubits).collect::<Vec<_>>(),
            vec![1, 2, 3, 4]
        );
        assert_eq!(result.provenance.ir_check.n_qubits, 4);
    }

    #[test]
    fn ohmic_provenance_records_alpha() {
        let mut spec = small(Figure::Fig5);
        spec.axes[1].min = 5.0;
        let result = run_sweep(&spec, 1).unwrap();
        let alpha = result.provenance.alpha.unwrap();
        assert!((alpha - 8.0 * 0.1 * 0.01f64.powi(2) / 1.1).abs() < 1e-18);
    }
}
