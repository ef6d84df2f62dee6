//! Scenario files: schema types, loading, and density-matrix CSV ingestion.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::couplings::CouplingKind;
use crate::dynamics::{DriveKind, DriveSet, TimeConvention};
use crate::error::{Error, Result};
use crate::fock::{self, MotionalState, Sign};
use crate::linalg::{CMatrix, C64};
use crate::protocols::{MeasurementPlan, Shots, TwoEtaModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub plan: PlanSpec,
    pub task: TaskSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Fock { n: usize },
    Coherent { re: f64, im: f64 },
    Thermal { nbar: f64 },
    /// CSV with a `dim,<d>` header line, then `d` rows of interleaved
    /// `re,im` pairs. Relative paths resolve against the scenario file.
    MatrixFile { path: PathBuf },
}

impl StateSpec {
    pub fn is_factory(&self) -> bool {
        !matches!(self, StateSpec::MatrixFile { .. })
    }

    pub fn build(&self, dim: Option<usize>, base: &Path) -> Result<MotionalState> {
        let need_dim = || dim.ok_or_else(|| Error::Parse("field `dim` is required for factory states".into()));
        match self {
            StateSpec::Fock { n } => fock::fock_state(*n, need_dim()?),
            StateSpec::Coherent { re, im } => fock::coherent_state(C64::new(*re, *im), need_dim()?),
            StateSpec::Thermal { nbar } => fock::thermal_state(*nbar, need_dim()?),
            StateSpec::MatrixFile { path } => {
                let full = if path.is_absolute() { path.clone() } else { base.join(path) };
                let m = read_density_csv(&full)?;
                if let Some(d) = dim {
                    if d != m.nrows() {
                        return Err(Error::domain(format!("`dim` is {d} but {} holds a {}-dimensional matrix", full.display(), m.nrows())));
                    }
                }
                MotionalState::from_matrix(m)
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<Shots>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_order: Option<usize>,
}

impl PlanSpec {
    pub fn resolve(&self, seed: u64) -> MeasurementPlan {
        let base = MeasurementPlan::default();
        MeasurementPlan {
            tau_grid: self.tau_grid.clone().unwrap_or(base.tau_grid),
            shots: self.shots.unwrap_or(base.shots),
            seed,
            fit_order: self.fit_order.unwrap_or(base.fit_order),
        }
    }
}

fn default_drive() -> DriveKind {
    DriveKind::Carrier
}

fn default_sign() -> Sign {
    Sign::Plus
}

fn default_ld_etas() -> Vec<f64> {
    vec![0.05]
}

fn default_flatness() -> f64 {
    1e-3
}

fn default_fd_step() -> f64 {
    1e-4
}

fn default_check_levels() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskSpec {
    Slope(SlopeTask),
    MomentsTwoEta(TwoEtaTask),
    FanoMandel(TwoEtaTask),
    MomentEngineered(EngineeredTask),
    Quadrature(QuadratureTask),
    Engineer(EngineerTask),
    NionCollective(NionTask),
    Reconstruct(ReconstructTask),
}

impl TaskSpec {
    pub fn label(&self) -> &'static str {
        match self {
            TaskSpec::Slope(_) => "slope",
            TaskSpec::MomentsTwoEta(_) => "moments_two_eta",
            TaskSpec::FanoMandel(_) => "fano_mandel",
            TaskSpec::MomentEngineered(_) => "moment_engineered",
            TaskSpec::Quadrature(_) => "quadrature",
            TaskSpec::Engineer(_) => "engineer",
            TaskSpec::NionCollective(_) => "nion_collective",
            TaskSpec::Reconstruct(_) => "reconstruct",
        }
    }

    pub fn needs_state(&self) -> bool {
        !matches!(self, TaskSpec::Engineer(_) | TaskSpec::NionCollective(_) | TaskSpec::Reconstruct(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeTask {
    #[serde(default = "default_drive")]
    pub drive: DriveKind,
    pub etas: Vec<f64>,
    /// Defaults to a single unit-weight laser.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    /// Defaults to `rabi_half`, except `eta_rabi_half` for a single sideband laser.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_convention: Option<TimeConvention>,
    #[serde(default = "default_sign")]
    pub sign: Sign,
    pub phi: f64,
}

impl SlopeTask {
    pub fn drives(&self) -> Result<DriveSet> {
        let weights = self.weights.clone().unwrap_or_else(|| vec![1.0; self.etas.len()]);
        let convention = self.time_convention.unwrap_or(if self.drive != DriveKind::Carrier && weights.len() == 1 {
            TimeConvention::EtaRabiHalf
        } else {
            TimeConvention::RabiHalf
        });
        DriveSet::new(self.drive, weights, self.etas.clone(), convention)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoEtaTask {
    pub etas: [f64; 2],
    #[serde(default)]
    pub model: TwoEtaModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineeredTask {
    pub etas: Vec<f64>,
    pub p: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engineering_tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureTask {
    pub phi: f64,
    /// One η: a single Lamb-Dicke laser. Several: drives engineered to `F₁ ≈ 1`.
    #[serde(default = "default_ld_etas")]
    pub etas: Vec<f64>,
    #[serde(default = "default_flatness")]
    pub flatness_tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support_cap: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineerTask {
    pub etas: Vec<f64>,
    #[serde(default = "default_coupling")]
    pub coupling: CouplingKind,
    /// Either the full coefficient target or a monomial power `p`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default = "default_check_levels")]
    pub check_levels: usize,
}

fn default_coupling() -> CouplingKind {
    CouplingKind::F0
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OtherIons {
    #[default]
    Ground,
    Excited,
    MaximallyMixed,
}

impl OtherIons {
    pub fn matrix(self, n_others: usize) -> CMatrix {
        let d = 1usize << n_others;
        let mut m = CMatrix::zeros(d, d);
        match self {
            OtherIons::Ground => m[(0, 0)] = C64::new(1.0, 0.0),
            OtherIons::Excited => m[(d - 1, d - 1)] = C64::new(1.0, 0.0),
            OtherIons::MaximallyMixed => {
                for k in 0..d {
                    m[(k, k)] = C64::new(1.0 / d as f64, 0.0);
                }
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NionTask {
    pub mode_dims: Vec<usize>,
    pub mode_etas: Vec<f64>,
    /// One state per mode; each takes its dimension from `mode_dims`.
    pub mode_states: Vec<StateSpec>,
    #[serde(default)]
    pub ion: usize,
    #[serde(default = "default_sign")]
    pub sign: Sign,
    pub phi: f64,
    #[serde(default)]
    pub other_ions: OtherIons,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructTask {
    /// Number of levels `K + 1`.
    pub support: usize,
    /// `⟨n̂ᵖ⟩` for `p = 0 … K`; taken from the state when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moments: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Phi,
    Eta,
    Shots,
    TauMax,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Phi => "phi",
            SweepAxis::Eta => "eta",
            SweepAxis::Shots => "shots",
            SweepAxis::TauMax => "tau_max",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

/// Parses scenario JSON, reporting the failing field path and position.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::Parse(format!("at `{path}` (line {}, column {}): {inner}", inner.line(), inner.column()))
    })
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_scenario(&text)
}

/// Reads a density matrix in the interleaved CSV layout and validates it.
pub fn read_density_csv(path: &Path) -> Result<CMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut records = reader.records();
    let bad = |line: usize, msg: &str| Error::Parse(format!("{} line {line}: {msg}", path.display()));
    let header = records.next().ok_or_else(|| bad(1, "empty file"))?.map_err(|e| bad(1, &e.to_string()))?;
    if header.len() != 2 || &header[0] != "dim" {
        return Err(bad(1, "expected header `dim,<d>`"));
    }
    let d: usize = header[1].parse().map_err(|_| bad(1, "dimension is not an integer"))?;
    let mut m = CMatrix::zeros(d, d);
    let mut rows = 0;
    for (r, rec) in records.enumerate() {
        let line = r + 2;
        let rec = rec.map_err(|e| bad(line, &e.to_string()))?;
        if r >= d {
            return Err(bad(line, "more rows than the declared dimension"));
        }
        if rec.len() != 2 * d {
            return Err(bad(line, &format!("expected {} values, found {}", 2 * d, rec.len())));
        }
        for c in 0..d {
            let re: f64 = rec[2 * c].parse().map_err(|_| bad(line, "non-numeric entry"))?;
            let im: f64 = rec[2 * c + 1].parse().map_err(|_| bad(line, "non-numeric entry"))?;
            m[(r, c)] = C64::new(re, im);
        }
        rows += 1;
    }
    if rows != d {
        return Err(bad(rows + 1, &format!("expected {d} rows, found {rows}")));
    }
    fock::validate_density(&m)?;
    Ok(m)
}

/// Writes a density matrix in the layout read by [`read_density_csv`].
pub fn write_density_csv(path: &Path, m: &CMatrix) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["dim".to_string(), m.nrows().to_string()]).map_err(io)?;
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).flat_map(|c| [m[(r, c)].re.to_string(), m[(r, c)].im.to_string()]).collect();
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
