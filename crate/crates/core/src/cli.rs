//! Scenario-driven front end: config parsing, apparatus presets, experiment
//! commands, and machine-readable reports.
//!
//! Configs are JSON with complex numbers as `[re, im]` pairs and matrices as
//! row-major nested lists. Gate numbers in every serialized artifact are
//! 1-based; the Rust API underneath is 0-based.
//!
//! All randomness flows from the single config seed: purpose-specific seeds
//! are derived with one SplitMix64 step and feed ChaCha8 generators. Test
//! vectors pin outcome sequences, not raw random streams.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::{
    build_subspace_apparatus, iid_reference, measure_entangled, perturb_energies,
    run_with_closeness, EntangledApparatus, StepRecord, SubspaceApparatus,
};
use crate::error::Error as ModelError;
use crate::gates::{
    build_apparatus, independence_residual, normalize_closeness, Apparatus, EnergyLedger,
    INDEPENDENCE_TOL,
};
use crate::qla::{random_hermitian, ComplexMatrix, StateVector, C64};

/// Significant digits for CSV output (JSON uses exact shortest round-trip).
const CSV_SIG_DIGITS: usize = 12;

/// Purpose tags for seed derivation.
pub mod seed_purpose {
    /// Random-mode Hamiltonian generation.
    pub const HAMILTONIAN: u64 = 1;
    /// The i.i.d. comparison baseline.
    pub const IID: u64 = 2;
    /// Periodic energy perturbation; combined with the application index.
    pub const PERTURB: u64 = 3;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed for one purpose from the config seed.
pub fn derived_seed(base: u64, purpose: u64) -> u64 {
    splitmix64(base ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn perturb_seed(base: u64, application: u64) -> u64 {
    splitmix64(derived_seed(base, seed_purpose::PERTURB).wrapping_add(application))
}

/// Front-end errors, mapped onto process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 0 ok, 2 config error, 3 all gates closed, 4 bound violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Model(ModelError::AllGatesClosed { .. }) => 3,
            CliError::Model(ModelError::BoundViolation { .. }) => 4,
            CliError::Model(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Apparatus construction mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Trivial,
    Ideal,
    Product,
    Random,
    Custom,
}

/// One experiment description. See the crate README for the JSON schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mode: Mode,
    /// dim V (number of gates in the unentangled, non-subspace case).
    pub n: usize,
    /// dim W; defaults to n.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default = "default_hbar")]
    pub hbar: f64,
    #[serde(default)]
    pub seed: u64,
    /// System state as [re, im] pairs, length n. Omitted when `entangled`
    /// carries the pair state instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<Vec<[f64; 2]>>,
    /// Initial gate energies; defaults to zeros. Length must equal the gate
    /// count (n, or the number of subspace groups).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_energies: Option<Vec<f64>>,
    /// Measurements to perform (trials for `entangle`).
    pub steps: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entangled: Option<EntangledConfig>,
    /// 1-based gate index groups partitioning 1..=n.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subspaces: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturb: Option<PerturbConfig>,
    /// Row-major (n·m)×(n·m) matrix of [re, im] pairs; required iff
    /// mode = custom.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom_hamiltonian: Option<Vec<Vec<[f64; 2]>>>,
    /// Diagonal of H_S for ideal/product modes; defaults to 1..=n.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_levels: Option<Vec<f64>>,
    /// Diagonal of H_M for product mode; defaults to 1..=m.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub apparatus_levels: Option<Vec<f64>>,
    /// System Hamiltonian for the independence check: a diagonal or a full
    /// matrix. Defaults per mode; required for random/custom.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_system: Option<HSystemConfig>,
    /// Attach an i.i.d. baseline with the derived seed to born-check reports.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub iid_baseline: bool,
}

fn default_hbar() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntangledConfig {
    /// dim V₂ of the partner system.
    pub dim2: usize,
    /// Pair state over V₁⊗V₂ as [re, im] pairs, length n·dim2.
    pub state: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbConfig {
    /// Gaussian noise magnitude added to the energies (zero-sum).
    pub magnitude: f64,
    /// Perturb after every this many measurements.
    pub period: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HSystemConfig {
    Diagonal(Vec<f64>),
    Matrix(Vec<Vec<[f64; 2]>>),
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let config: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// dim W with the default applied.
    pub fn m_dim(&self) -> usize {
        self.m.unwrap_or(self.n)
    }

    /// Number of gates the ledger tracks: subspace groups if present, n
    /// otherwise (entangled gates share the base ledger).
    pub fn gate_count(&self) -> usize {
        match &self.subspaces {
            Some(groups) => groups.len(),
            None => self.n,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.n == 0 {
            return Err(config_err("n: must be at least 1"));
        }
        if self.m_dim() == 0 {
            return Err(config_err("m: must be at least 1"));
        }
        if !(self.hbar.is_finite() && self.hbar > 0.0) {
            return Err(config_err("hbar: must be positive and finite"));
        }
        match (self.mode, &self.custom_hamiltonian) {
            (Mode::Custom, None) => {
                return Err(config_err(
                    "custom_hamiltonian: required when mode = custom",
                ))
            }
            (Mode::Custom, Some(rows)) => {
                let d = self.n * self.m_dim();
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(config_err(format!(
                        "custom_hamiltonian: must be a {d}x{d} row-major matrix"
                    )));
                }
                if !pairs_finite(rows.iter().flatten()) {
                    return Err(config_err("custom_hamiltonian: entries must be finite"));
                }
            }
            (_, Some(_)) => {
                return Err(config_err(
                    "custom_hamiltonian: only allowed when mode = custom",
                ))
            }
            _ => {}
        }
        if let Some(levels) = &self.system_levels {
            if !matches!(self.mode, Mode::Ideal | Mode::Product) {
                return Err(config_err(
                    "system_levels: only applies to ideal/product modes",
                ));
            }
            if levels.len() != self.n {
                return Err(config_err(format!(
                    "system_levels: expected {} entries, got {}",
                    self.n,
                    levels.len()
                )));
            }
        }
        if let Some(levels) = &self.apparatus_levels {
            if self.mode != Mode::Product {
                return Err(config_err("apparatus_levels: only applies to product mode"));
            }
            if levels.len() != self.m_dim() {
                return Err(config_err(format!(
                    "apparatus_levels: expected {} entries, got {}",
                    self.m_dim(),
                    levels.len()
                )));
            }
        }
        match (&self.entangled, &self.state) {
            (Some(ent), _) => {
                if ent.dim2 == 0 {
                    return Err(config_err("entangled.dim2: must be at least 1"));
                }
                if ent.state.len() != self.n * ent.dim2 {
                    return Err(config_err(format!(
                        "entangled.state: expected {} entries (n·dim2), got {}",
                        self.n * ent.dim2,
                        ent.state.len()
                    )));
                }
                if !pairs_finite(ent.state.iter()) {
                    return Err(config_err("entangled.state: entries must be finite"));
                }
            }
            (None, Some(state)) => {
                if state.len() != self.n {
                    return Err(config_err(format!(
                        "state: expected {} entries, got {}",
                        self.n,
                        state.len()
                    )));
                }
                if !pairs_finite(state.iter()) {
                    return Err(config_err("state: entries must be finite"));
                }
            }
            (None, None) => {
                return Err(config_err("state: required unless `entangled` is set"));
            }
        }
        if self.entangled.is_some() && self.subspaces.is_some() {
            return Err(config_err(
                "subspaces: cannot be combined with an entangled scenario",
            ));
        }
        if let Some(groups) = &self.subspaces {
            let mut seen = vec![false; self.n];
            if groups.is_empty() {
                return Err(config_err("subspaces: must contain at least one group"));
            }
            for (g, group) in groups.iter().enumerate() {
                if group.is_empty() {
                    return Err(config_err(format!("subspaces[{g}]: group is empty")));
                }
                for &idx in group {
                    if idx == 0 || idx > self.n {
                        return Err(config_err(format!(
                            "subspaces[{g}]: index {idx} outside 1..={}",
                            self.n
                        )));
                    }
                    if seen[idx - 1] {
                        return Err(config_err(format!(
                            "subspaces[{g}]: index {idx} appears twice"
                        )));
                    }
                    seen[idx - 1] = true;
                }
            }
            if seen.iter().any(|&s| !s) {
                return Err(config_err("subspaces: groups must cover every index 1..=n"));
            }
        }
        if let Some(init) = &self.initial_energies {
            let gates = self.gate_count();
            if init.len() != gates {
                return Err(config_err(format!(
                    "initial_energies: expected {} entries (gate count), got {}",
                    gates,
                    init.len()
                )));
            }
            if init.iter().any(|x| !x.is_finite()) {
                return Err(config_err("initial_energies: entries must be finite"));
            }
        }
        if let Some(p) = &self.perturb {
            if !(p.magnitude.is_finite() && p.magnitude >= 0.0) {
                return Err(config_err("perturb.magnitude: must be nonnegative"));
            }
            if p.period == 0 {
                return Err(config_err("perturb.period: must be at least 1"));
            }
        }
        if let Some(h) = &self.h_system {
            match h {
                HSystemConfig::Diagonal(d) => {
                    if d.len() != self.n {
                        return Err(config_err(format!(
                            "h_system: expected {} diagonal entries, got {}",
                            self.n,
                            d.len()
                        )));
                    }
                    if d.iter().any(|x| !x.is_finite()) {
                        return Err(config_err("h_system: entries must be finite"));
                    }
                }
                HSystemConfig::Matrix(rows) => {
                    if rows.len() != self.n || rows.iter().any(|r| r.len() != self.n) {
                        return Err(config_err(format!(
                            "h_system: expected an {n}x{n} matrix",
                            n = self.n
                        )));
                    }
                    if !pairs_finite(rows.iter().flatten()) {
                        return Err(config_err("h_system: entries must be finite"));
                    }
                }
            }
        }
        if let Some(levels) = &self.system_levels {
            if levels.iter().any(|x| !x.is_finite()) {
                return Err(config_err("system_levels: entries must be finite"));
            }
        }
        if let Some(levels) = &self.apparatus_levels {
            if levels.iter().any(|x| !x.is_finite()) {
                return Err(config_err("apparatus_levels: entries must be finite"));
            }
        }
        Ok(())
    }

    /// Default system levels for ideal/product modes: 1, 2, …, n.
    fn system_levels_or_default(&self) -> Vec<f64> {
        self.system_levels
            .clone()
            .unwrap_or_else(|| (1..=self.n).map(|k| k as f64).collect())
    }

    fn apparatus_levels_or_default(&self) -> Vec<f64> {
        self.apparatus_levels
            .clone()
            .unwrap_or_else(|| (1..=self.m_dim()).map(|k| k as f64).collect())
    }

    /// The combined Hamiltonian for this config's mode.
    pub fn hamiltonian(&self) -> CliResult<ComplexMatrix> {
        let d = self.n * self.m_dim();
        Ok(match self.mode {
            Mode::Trivial => ComplexMatrix::zeros(d, d),
            Mode::Ideal => {
                Apparatus::ideal(&self.system_levels_or_default(), self.m_dim(), self.hbar)
                    .hamiltonian()
                    .clone()
            }
            Mode::Product => Apparatus::product(
                &self.system_levels_or_default(),
                &self.apparatus_levels_or_default(),
                self.hbar,
            )
            .hamiltonian()
            .clone(),
            Mode::Random => random_hermitian(d, derived_seed(self.seed, seed_purpose::HAMILTONIAN)),
            Mode::Custom => {
                let rows = self
                    .custom_hamiltonian
                    .as_ref()
                    .expect("validated: custom_hamiltonian present");
                parse_matrix(rows)
            }
        })
    }

    pub fn build_apparatus(&self) -> CliResult<Apparatus> {
        Ok(build_apparatus(
            self.hamiltonian()?,
            self.n,
            self.m_dim(),
            self.hbar,
        )?)
    }

    pub fn build_subspace_apparatus(&self) -> CliResult<SubspaceApparatus> {
        let groups = self
            .subspaces
            .as_ref()
            .expect("caller checks subspaces presence");
        let projectors = groups
            .iter()
            .map(|group| {
                let mut p = ComplexMatrix::zeros(self.n, self.n);
                for &idx in group {
                    p[(idx - 1, idx - 1)] = C64::new(1.0, 0.0);
                }
                p
            })
            .collect();
        Ok(build_subspace_apparatus(
            projectors,
            self.hamiltonian()?,
            self.m_dim(),
            self.hbar,
        )?)
    }

    pub fn state_vector(&self) -> CliResult<StateVector> {
        let pairs = self
            .state
            .as_ref()
            .ok_or_else(|| config_err("state: required for this command"))?;
        Ok(parse_state(pairs))
    }

    pub fn initial_ledger(&self) -> EnergyLedger {
        match &self.initial_energies {
            Some(init) => EnergyLedger::new(init.clone()),
            None => EnergyLedger::zeros(self.gate_count()),
        }
    }

    /// The system Hamiltonian used by the independence check.
    pub fn h_system_matrix(&self) -> CliResult<ComplexMatrix> {
        if let Some(h) = &self.h_system {
            return Ok(match h {
                HSystemConfig::Diagonal(d) => ComplexMatrix::from_real_diagonal(d),
                HSystemConfig::Matrix(rows) => parse_matrix(rows),
            });
        }
        match self.mode {
            Mode::Trivial => Ok(ComplexMatrix::zeros(self.n, self.n)),
            Mode::Ideal | Mode::Product => Ok(ComplexMatrix::from_real_diagonal(
                &self.system_levels_or_default(),
            )),
            Mode::Random | Mode::Custom => Err(config_err(
                "h_system: required for random/custom modes (no natural default)",
            )),
        }
    }
}

fn pairs_finite<'a>(mut pairs: impl Iterator<Item = &'a [f64; 2]>) -> bool {
    pairs.all(|&[re, im]| re.is_finite() && im.is_finite())
}

fn parse_state(pairs: &[[f64; 2]]) -> StateVector {
    StateVector::new(pairs.iter().map(|&[re, im]| C64::new(re, im)).collect())
}

fn parse_matrix(rows: &[Vec<[f64; 2]>]) -> ComplexMatrix {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    ComplexMatrix::from_fn(r, c, |i, j| {
        let [re, im] = rows[i][j];
        C64::new(re, im)
    })
}

fn matrix_to_pairs(m: &ComplexMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.rows())
        .map(|r| {
            (0..m.cols())
                .map(|c| [m[(r, c)].re, m[(r, c)].im])
                .collect()
        })
        .collect()
}

/// Residual rows reported by `trace-ops` for one probe time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceOpsRow {
    pub t: f64,
    /// ‖Σ_j Û_j(t) − Û(t)‖_max.
    pub sum_residual: f64,
    /// Per-gate ‖iħ·ΔÛ_j/Δt − Ĥ·Û_j(t)‖_max at h = 1e-4.
    pub schrodinger_residuals: Vec<f64>,
}

/// Machine-readable result of one command invocation. The echoed config
/// re-runs to a bit-identical outcome sequence under the same build.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub config: ScenarioConfig,
    /// Normalized closeness of the repeated state (empty when not applicable).
    pub closeness: Vec<f64>,
    /// Chosen gate per step, 1-based.
    pub outcomes: Vec<u32>,
    /// Times each gate was chosen.
    pub counts: Vec<u64>,
    pub final_energies: Vec<f64>,
    /// Largest |n′·c_j − n_j| over all prefixes (count units).
    pub max_deviation: f64,
    pub bound_b: f64,
    pub bound_upper: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freq_deviation: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iid_counts: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iid_max_deviation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub independence_residuals: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub independence_compatible: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_ops: Option<Vec<TraceOpsRow>>,
    pub wall_time_s: f64,
}

impl RunReport {
    fn new(command: &str, config: &ScenarioConfig) -> Self {
        RunReport {
            command: command.to_string(),
            config: config.clone(),
            closeness: Vec::new(),
            outcomes: Vec::new(),
            counts: Vec::new(),
            final_energies: Vec::new(),
            max_deviation: 0.0,
            bound_b: 0.0,
            bound_upper: 0.0,
            freq_deviation: None,
            iid_counts: None,
            iid_max_deviation: None,
            independence_residuals: None,
            independence_compatible: None,
            trace_ops: None,
            wall_time_s: 0.0,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Formats one float with [`CSV_SIG_DIGITS`] significant digits.
fn csv_num(x: f64) -> String {
    format!("{:.*e}", CSV_SIG_DIGITS - 1, x)
}

/// Writes the per-step CSV header for a run with the given gate count:
/// `step,chosen,c_1..c_N,rho_1..rho_N,deviation`.
pub fn write_csv_header(w: &mut dyn Write, gates: usize) -> std::io::Result<()> {
    let mut cols = vec!["step".to_string(), "chosen".to_string()];
    cols.extend((1..=gates).map(|j| format!("c_{j}")));
    cols.extend((1..=gates).map(|j| format!("rho_{j}")));
    cols.push("deviation".to_string());
    writeln!(w, "{}", cols.join(","))
}

/// Writes one per-step CSV row; the chosen column is 1-based.
pub fn write_csv_row(w: &mut dyn Write, rec: &StepRecord) -> std::io::Result<()> {
    let mut cols = vec![rec.step.to_string(), (rec.chosen + 1).to_string()];
    cols.extend(rec.closeness.iter().map(|&c| csv_num(c)));
    cols.extend(rec.energies.iter().map(|&r| csv_num(r)));
    cols.push(csv_num(rec.deviation));
    writeln!(w, "{}", cols.join(","))
}

/// The repeated-run engine shared by `simulate` and `born-check`: fixed
/// normalized closeness, one ledger, optional periodic perturbation between
/// chunks, per-step records with run-global step numbers and deviations.
fn run_chunked(
    closeness: &[f64],
    ledger: &mut EnergyLedger,
    steps: u64,
    perturb: Option<&PerturbConfig>,
    seed: u64,
    mut on_step: impl FnMut(&StepRecord),
) -> CliResult<ChunkedRun> {
    let gates = closeness.len();
    let mut outcomes = Vec::with_capacity(steps.min(1 << 24) as usize);
    let mut counts = vec![0u64; gates];
    let mut global_step = 0u64;
    let mut max_deviation = 0.0f64;
    let mut bound_b = -(ledger.total().abs() + 4.0);
    let mut bound_upper = ledger.total() - (gates as f64 - 1.0) * bound_b;
    let mut applications = 0u64;
    let mut remaining = steps;
    while remaining > 0 {
        let chunk = match perturb {
            Some(p) => remaining.min(p.period),
            None => remaining,
        };
        let stats = run_with_closeness(closeness, ledger, chunk, |rec| {
            global_step += 1;
            counts[rec.chosen] += 1;
            outcomes.push(rec.chosen as u32 + 1);
            let mut dev = 0.0f64;
            for (j, &c_j) in closeness.iter().enumerate() {
                dev = dev.max((global_step as f64 * c_j - counts[j] as f64).abs());
            }
            max_deviation = max_deviation.max(dev);
            on_step(&StepRecord {
                step: global_step,
                chosen: rec.chosen,
                closeness,
                energies: rec.energies,
                deviation: dev,
            });
        })?;
        bound_b = stats.bound_b;
        bound_upper = stats.bound_upper;
        remaining -= chunk;
        if remaining > 0 {
            if let Some(p) = perturb {
                *ledger = perturb_energies(ledger, p.magnitude, perturb_seed(seed, applications));
                applications += 1;
            }
        }
    }
    Ok(ChunkedRun {
        outcomes,
        counts,
        max_deviation,
        bound_b,
        bound_upper,
    })
}

struct ChunkedRun {
    outcomes: Vec<u32>,
    counts: Vec<u64>,
    max_deviation: f64,
    bound_b: f64,
    bound_upper: f64,
}

/// The normalized closeness of the configured scenario, dispatching over
/// plain, entangled, and subspace variants.
fn scenario_closeness(config: &ScenarioConfig) -> CliResult<Vec<f64>> {
    if let Some(ent) = &config.entangled {
        let eapp = EntangledApparatus::new(config.build_apparatus()?, ent.dim2);
        let xi = parse_state(&ent.state);
        let raw = eapp.closeness(&xi)?;
        let (_, c) = normalize_closeness(&xi, raw)?;
        Ok(c)
    } else if config.subspaces.is_some() {
        let sapp = config.build_subspace_apparatus()?;
        let xi = config.state_vector()?;
        let raw = sapp.closeness(&xi)?;
        let (_, c) = normalize_closeness(&xi, raw)?;
        Ok(c)
    } else {
        let app = config.build_apparatus()?;
        let xi = config.state_vector()?;
        let (_, c) = crate::gates::normalize_for_measurement(&app, &xi)?;
        Ok(c)
    }
}

/// Executes the configured scenario: `steps` measurements of the same state
/// on one ledger (entangled and subspace variants included), honoring
/// periodic perturbation. The observer sees every step for CSV streaming.
pub fn cmd_simulate_with(
    config: &ScenarioConfig,
    on_step: impl FnMut(&StepRecord),
) -> CliResult<RunReport> {
    config.validate()?;
    let started = Instant::now();
    let closeness = scenario_closeness(config)?;
    let mut ledger = config.initial_ledger();
    let run = run_chunked(
        &closeness,
        &mut ledger,
        config.steps,
        config.perturb.as_ref(),
        config.seed,
        on_step,
    )?;
    let mut report = RunReport::new("simulate", config);
    report.closeness = closeness;
    report.outcomes = run.outcomes;
    report.counts = run.counts;
    report.final_energies = ledger.energies().to_vec();
    report.max_deviation = run.max_deviation;
    report.bound_b = run.bound_b;
    report.bound_upper = run.bound_upper;
    report.wall_time_s = started.elapsed().as_secs_f64();
    Ok(report)
}

/// [`cmd_simulate_with`] without per-step streaming.
pub fn cmd_simulate(config: &ScenarioConfig) -> CliResult<RunReport> {
    cmd_simulate_with(config, |_| {})
}

/// Runs the repeated-measurement experiment and reports per-gate frequency
/// deviations against the deterministic envelope. A prefix bound violation
/// surfaces as [`ModelError::BoundViolation`] (exit code 4).
pub fn cmd_born_check_with(
    config: &ScenarioConfig,
    on_step: impl FnMut(&StepRecord),
) -> CliResult<RunReport> {
    let mut report = cmd_simulate_with(config, on_step)?;
    report.command = "born-check".to_string();
    let n = config.steps;
    let freq_dev = report
        .counts
        .iter()
        .zip(&report.closeness)
        .map(|(&n_j, &c_j)| {
            if n == 0 {
                0.0
            } else {
                (n_j as f64 / n as f64 - c_j).abs()
            }
        })
        .collect();
    report.freq_deviation = Some(freq_dev);
    if config.iid_baseline {
        let iid = iid_reference(
            &report.closeness,
            n,
            derived_seed(config.seed, seed_purpose::IID),
        );
        report.iid_counts = Some(iid.counts);
        report.iid_max_deviation = Some(iid.max_deviation);
    }
    Ok(report)
}

pub fn cmd_born_check(config: &ScenarioConfig) -> CliResult<RunReport> {
    cmd_born_check_with(config, |_| {})
}

/// Evaluates the decoupling residuals r_j = ‖Tr_W(Ĥ·P_j·Û(1)) − H·M_j‖_max
/// and the pass/fail verdict at 1e-10.
pub fn cmd_independence(config: &ScenarioConfig) -> CliResult<RunReport> {
    config.validate()?;
    let started = Instant::now();
    let app = config.build_apparatus()?;
    let h_sys = config.h_system_matrix()?;
    let residuals = independence_residual(&app, &h_sys)?;
    let compatible = residuals.iter().all(|&r| r < INDEPENDENCE_TOL);
    let mut report = RunReport::new("independence", config);
    report.final_energies = config.initial_ledger().energies().to_vec();
    report.independence_residuals = Some(residuals);
    report.independence_compatible = Some(compatible);
    report.wall_time_s = started.elapsed().as_secs_f64();
    Ok(report)
}

/// Reports ‖Σ_j Û_j(t) − Û(t)‖_max and the central-difference Schrödinger
/// residual of every branch operator at each requested time.
pub fn cmd_trace_ops(config: &ScenarioConfig, times: &[f64]) -> CliResult<RunReport> {
    config.validate()?;
    if times.is_empty() {
        return Err(config_err("times: at least one probe time is required"));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(config_err("times: entries must be finite"));
    }
    let started = Instant::now();
    let app = config.build_apparatus()?;
    let n = app.system_dim();
    let hbar = app.hbar();
    let h = 1e-4;
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        let mut sum = ComplexMatrix::zeros(n * app.apparatus_dim(), n * app.apparatus_dim());
        let mut schrodinger = Vec::with_capacity(n);
        for j in 0..n {
            let u_j = crate::gates::u_hat_j(&app, j, t)?;
            sum = sum.add(&u_j);
            let plus = crate::gates::u_hat_j(&app, j, t + h)?;
            let minus = crate::gates::u_hat_j(&app, j, t - h)?;
            let derivative = plus.sub(&minus).scale(C64::new(0.0, hbar / (2.0 * h)));
            let rhs = app.hamiltonian().matmul(&u_j);
            schrodinger.push(derivative.max_abs_diff(&rhs));
        }
        rows.push(TraceOpsRow {
            t,
            sum_residual: sum.max_abs_diff(&app.propagator(t)),
            schrodinger_residuals: schrodinger,
        });
    }
    let mut report = RunReport::new("trace-ops", config);
    report.trace_ops = Some(rows);
    report.wall_time_s = started.elapsed().as_secs_f64();
    Ok(report)
}

/// Measures the configured entangled pair once per trial, each trial on a
/// fresh ledger built from `initial_energies`. With identical pairs and
/// identical fresh ledgers every trial picks the same gate, which is the
/// model's predictability on display; contrast with `simulate` on a shared
/// ledger.
pub fn cmd_entangle_with(
    config: &ScenarioConfig,
    mut on_trial: impl FnMut(&StepRecord),
) -> CliResult<RunReport> {
    config.validate()?;
    let ent = config
        .entangled
        .as_ref()
        .ok_or_else(|| config_err("entangled: required for the entangle command"))?;
    let started = Instant::now();
    let eapp = EntangledApparatus::new(config.build_apparatus()?, ent.dim2);
    let xi = parse_state(&ent.state);
    let gates = config.gate_count();
    let mut outcomes = Vec::new();
    let mut counts = vec![0u64; gates];
    let mut closeness = Vec::new();
    let mut max_deviation = 0.0f64;
    let mut final_energies = config.initial_ledger().energies().to_vec();
    for trial in 1..=config.steps {
        let mut ledger = config.initial_ledger();
        let (out, _partner) = measure_entangled(&eapp, &mut ledger, &xi)?;
        counts[out.chosen] += 1;
        outcomes.push(out.chosen as u32 + 1);
        closeness = out.closeness.clone();
        let mut dev = 0.0f64;
        for (j, &c_j) in closeness.iter().enumerate() {
            dev = dev.max((trial as f64 * c_j - counts[j] as f64).abs());
        }
        max_deviation = max_deviation.max(dev);
        final_energies = ledger.energies().to_vec();
        on_trial(&StepRecord {
            step: trial,
            chosen: out.chosen,
            closeness: &out.closeness,
            energies: &final_energies,
            deviation: dev,
        });
    }
    if config.steps == 0 {
        closeness = scenario_closeness(config)?;
    }
    let mut report = RunReport::new("entangle", config);
    report.closeness = closeness;
    report.outcomes = outcomes;
    report.counts = counts;
    report.final_energies = final_energies;
    report.max_deviation = max_deviation;
    report.wall_time_s = started.elapsed().as_secs_f64();
    Ok(report)
}

pub fn cmd_entangle(config: &ScenarioConfig) -> CliResult<RunReport> {
    cmd_entangle_with(config, |_| {})
}

/// CSV table for an `independence` report: `gate,residual`.
pub fn write_independence_csv(w: &mut dyn Write, report: &RunReport) -> std::io::Result<()> {
    writeln!(w, "gate,residual")?;
    if let Some(residuals) = &report.independence_residuals {
        for (j, r) in residuals.iter().enumerate() {
            writeln!(w, "{},{}", j + 1, csv_num(*r))?;
        }
    }
    Ok(())
}

/// CSV table for a `trace-ops` report: `t,sum_residual,schrodinger_1..N`.
pub fn write_trace_ops_csv(w: &mut dyn Write, report: &RunReport) -> std::io::Result<()> {
    let rows = report.trace_ops.as_deref().unwrap_or(&[]);
    let gates = rows.first().map_or(0, |r| r.schrodinger_residuals.len());
    let mut cols = vec!["t".to_string(), "sum_residual".to_string()];
    cols.extend((1..=gates).map(|j| format!("schrodinger_{j}")));
    writeln!(w, "{}", cols.join(","))?;
    for row in rows {
        let mut cols = vec![csv_num(row.t), csv_num(row.sum_residual)];
        cols.extend(row.schrodinger_residuals.iter().map(|&r| csv_num(r)));
        writeln!(w, "{}", cols.join(","))?;
    }
    Ok(())
}

/// Round-trips a custom Hamiltonian through the config pair encoding.
pub fn hamiltonian_to_config_rows(m: &ComplexMatrix) -> Vec<Vec<[f64; 2]>> {
    matrix_to_pairs(m)
}
