//! Scenario configs, assumption gating, end-to-end runs, and parameter sweeps.
//!
//! A scenario is described by a JSON config (see the preset files for the
//! schema). `run_scenario` validates the game and communication assumptions
//! first and persists their outcomes, so every published run carries its own
//! certificate; only then does it derive the gain bound, integrate, and write
//! `trajectory.csv` plus `report.json`.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    delta_star, estimate_p, verify_convergence, ConvergenceReport, LyapunovEstimate, Tolerances,
};
use crate::dynamics::{block_sum, integrate, AlgorithmParams, SystemState, NU_SUM_TOLERANCE};
use crate::error::{Error, Result};
use crate::game::{estimate_constants, solve_ne, GameConstants, GameSpec, LqGame, SampleBox};
use crate::graph::{generate_partition_schedule, ScheduleJson, SwitchingSchedule};

/// Environment variable naming the root directory for run artifacts.
pub const OUTPUT_ROOT_ENV: &str = "NEGSIM_OUT";

pub const PRESET_NAMES: &[&str] = &[
    "lq-n5-partition2",
    "lq-n5-static-complete",
    "lq-n2-static-pair",
];

/// Built-in scenario configs addressable by name.
pub fn preset(name: &str) -> Option<ScenarioConfig> {
    let text = match name {
        "lq-n5-partition2" => include_str!("../presets/lq-n5-partition2.json"),
        "lq-n5-static-complete" => include_str!("../presets/lq-n5-static-complete.json"),
        "lq-n2-static-pair" => include_str!("../presets/lq-n2-static-pair.json"),
        _ => return None,
    };
    Some(serde_json::from_str(text).expect("bundled presets are valid"))
}

/// Loads a config from a file path, or from the preset library when the
/// argument names a preset.
pub fn load_config(path_or_preset: &str) -> Result<ScenarioConfig> {
    if let Some(cfg) = preset(path_or_preset) {
        return Ok(cfg);
    }
    let path = Path::new(path_or_preset);
    if !path.exists() {
        return Err(Error::Schema(format!(
            "'{path_or_preset}' is neither a config file nor a preset (presets: {})",
            PRESET_NAMES.join(", ")
        )));
    }
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Schema(format!("{path_or_preset}: {e}")))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub game: GameConfig,
    pub schedule: ScheduleConfig,
    pub params: ParamsConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    pub integration: IntegrationConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,
    /// CSV decimation stride; switching instants and endpoints are always kept.
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
}

fn default_sample_every() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameConfig {
    /// Game library id; currently "lq-game".
    pub preset: String,
    pub n_players: usize,
    pub action_dim: usize,
    pub targets: Vec<f64>,
    #[serde(default)]
    pub coupling: f64,
    /// Optional per-player aggregate weight matrices, row-major n x n.
    #[serde(default)]
    pub weights: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    Inline(ScheduleJson),
    RingPartition {
        n_nodes: usize,
        n_parts: usize,
        segment_len: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub delta: DeltaConfig,
    pub alpha: f64,
    pub beta: f64,
    /// Safety factor applied to the computed bound when `delta` is "auto".
    #[serde(default = "default_auto_margin")]
    pub auto_margin: f64,
}

fn default_auto_margin() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeltaConfig {
    Value(f64),
    Keyword(DeltaKeyword),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeltaKeyword {
    Auto,
}

impl DeltaConfig {
    pub fn is_auto(&self) -> bool {
        matches!(self, DeltaConfig::Keyword(DeltaKeyword::Auto))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialConfig {
    Keyword(InitialKeyword),
    Explicit {
        x: Vec<f64>,
        #[serde(default)]
        s: Option<Vec<f64>>,
        #[serde(default)]
        nu: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialKeyword {
    Default,
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig::Keyword(InitialKeyword::Default)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationConfig {
    pub h: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub tolerances: Tolerances,
    /// Probe times for the Lyapunov bound; defaults to segment boundaries and
    /// midpoints over one period.
    pub probe_times: Option<Vec<f64>>,
    pub horizon: f64,
    pub quadrature_h: f64,
    /// Hypercube bounds for constants estimation.
    pub constants_box: (f64, f64),
    pub constants_samples: usize,
    pub fit_discard_fraction: f64,
    pub balance_tol: f64,
    /// Window for the joint-connectivity check; defaults to one period.
    pub connectivity_window: Option<f64>,
    pub oracle_tol: f64,
    pub oracle_max_iters: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            probe_times: None,
            horizon: 20.0,
            quadrature_h: 1e-2,
            constants_box: (-5.0, 5.0),
            constants_samples: 10_000,
            fit_discard_fraction: 0.2,
            balance_tol: 1e-9,
            connectivity_window: None,
            oracle_tol: 1e-10,
            oracle_max_iters: 1_000_000,
        }
    }
}

/// Canonical content hash of a config (over its parsed form, so formatting
/// does not matter).
pub fn scenario_hash(config: &ScenarioConfig) -> String {
    let canonical = serde_json::to_string(config).expect("config serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn schedule_id(config: &ScheduleConfig) -> String {
    match config {
        ScheduleConfig::Inline(json) => format!(
            "inline(nodes={},graphs={},segments={})",
            json.nodes,
            json.graphs.len(),
            json.segments.len()
        ),
        ScheduleConfig::RingPartition {
            n_nodes,
            n_parts,
            segment_len,
            seed,
        } => format!("ring-partition(n={n_nodes},parts={n_parts},len={segment_len},seed={seed})"),
    }
}

/// Config materialized into domain objects.
pub struct Prepared {
    pub config: ScenarioConfig,
    pub game: GameSpec,
    pub schedule: SwitchingSchedule,
    pub hash: String,
}

pub fn prepare(config: ScenarioConfig) -> Result<Prepared> {
    let game = build_game(&config.game)?;
    let schedule = build_schedule(&config.schedule).map_err(schema_wrap)?;
    if schedule.n_nodes() != game.n_players() {
        return Err(Error::Schema(format!(
            "schedule has {} nodes but the game has {} players",
            schedule.n_nodes(),
            game.n_players()
        )));
    }
    if !(config.integration.h > 0.0) || !(config.integration.t_end > 0.0) {
        return Err(Error::Schema(format!(
            "integration requires positive h and t_end, got h = {}, t_end = {}",
            config.integration.h, config.integration.t_end
        )));
    }
    if config.sample_every == 0 {
        return Err(Error::Schema("sample_every must be at least 1".into()));
    }
    let hash = scenario_hash(&config);
    Ok(Prepared {
        config,
        game,
        schedule,
        hash,
    })
}

fn schema_wrap(e: Error) -> Error {
    match e {
        Error::InvalidParameter { what, detail } => {
            Error::Schema(format!("invalid {what}: {detail}"))
        }
        Error::Schema(s) => Error::Schema(s),
        other => other,
    }
}

fn build_game(config: &GameConfig) -> Result<GameSpec> {
    if config.preset != "lq-game" {
        return Err(Error::Schema(format!(
            "unknown game preset '{}' (available: lq-game)",
            config.preset
        )));
    }
    let n = config.action_dim;
    let weights = match &config.weights {
        None => None,
        Some(rows) => {
            let mut mats = Vec::with_capacity(rows.len());
            for (i, flat) in rows.iter().enumerate() {
                if flat.len() != n * n {
                    return Err(Error::Schema(format!(
                        "weight matrix {i}: expected {} entries, got {}",
                        n * n,
                        flat.len()
                    )));
                }
                mats.push(DMatrix::from_row_slice(n, n, flat));
            }
            Some(mats)
        }
    };
    LqGame {
        n_players: config.n_players,
        action_dim: config.action_dim,
        targets: config.targets.clone(),
        coupling: config.coupling,
        weights,
    }
    .build()
    .map_err(schema_wrap)
}

fn build_schedule(config: &ScheduleConfig) -> Result<SwitchingSchedule> {
    match config {
        ScheduleConfig::Inline(json) => SwitchingSchedule::from_json(json),
        ScheduleConfig::RingPartition {
            n_nodes,
            n_parts,
            segment_len,
            seed,
        } => generate_partition_schedule(*n_nodes, *n_parts, *segment_len, *seed),
    }
}

fn build_initial(prepared: &Prepared) -> Result<SystemState> {
    let game = &prepared.game;
    match &prepared.config.initial {
        InitialConfig::Keyword(InitialKeyword::Default) => {
            SystemState::default_for(game, DVector::zeros(game.strategy_dim()))
        }
        InitialConfig::Explicit { x, s, nu } => {
            let nn = game.strategy_dim();
            if x.len() != nn {
                return Err(Error::Schema(format!(
                    "initial x has {} entries, expected {nn}",
                    x.len()
                )));
            }
            let x = DVector::from_column_slice(x);
            let s = match s {
                Some(v) if v.len() == nn => DVector::from_column_slice(v),
                Some(v) => {
                    return Err(Error::Schema(format!(
                        "initial s has {} entries, expected {nn}",
                        v.len()
                    )))
                }
                None => game.phi_stacked(x.as_slice())?,
            };
            let nu = match nu {
                Some(v) if v.len() == nn => DVector::from_column_slice(v),
                Some(v) => {
                    return Err(Error::Schema(format!(
                        "initial nu has {} entries, expected {nn}",
                        v.len()
                    )))
                }
                None => DVector::zeros(nn),
            };
            SystemState::new(x, s, nu, 0.0)
        }
    }
}

fn default_probe_times(schedule: &SwitchingSchedule) -> Vec<f64> {
    let mut probes = Vec::new();
    let mut start = 0.0;
    for &(_, duration) in schedule.segments() {
        probes.push(start);
        probes.push(start + 0.5 * duration);
        start += duration;
    }
    probes
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionEntry {
    pub pass: bool,
    pub value: f64,
    pub detail: String,
}

/// Persisted outcome of the assumption gate; written before any integration
/// so every run directory is self-certifying.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionsReport {
    pub scenario_hash: String,
    pub schedule_id: String,
    pub constants: Option<GameConstants>,
    pub constants_box: (f64, f64),
    pub constants_samples: usize,
    pub seed: u64,
    pub strong_monotonicity: AssumptionEntry,
    pub weight_balance: AssumptionEntry,
    pub joint_connectivity: AssumptionEntry,
    pub connectivity_window: f64,
    pub partial_coverage: bool,
    pub zero_sum_initial_offsets: AssumptionEntry,
    pub pass: bool,
}

impl AssumptionsReport {
    pub fn first_violation(&self) -> Option<(&'static str, String)> {
        if !self.strong_monotonicity.pass {
            return Some(("strong monotonicity", self.strong_monotonicity.detail.clone()));
        }
        if !self.weight_balance.pass {
            return Some(("weight balance", self.weight_balance.detail.clone()));
        }
        if !self.joint_connectivity.pass {
            return Some(("joint connectivity", self.joint_connectivity.detail.clone()));
        }
        if !self.zero_sum_initial_offsets.pass {
            return Some((
                "zero-sum initial offsets",
                self.zero_sum_initial_offsets.detail.clone(),
            ));
        }
        None
    }
}

/// Runs every assumption check without failing on violations; violations are
/// entries in the returned report.
pub fn evaluate_assumptions(prepared: &Prepared) -> Result<AssumptionsReport> {
    let cfg = &prepared.config;
    let (lo, hi) = cfg.analysis.constants_box;
    let sample_box = SampleBox::cube(prepared.game.strategy_dim(), lo, hi).map_err(schema_wrap)?;

    let (constants, monotonicity) = match estimate_constants(
        &prepared.game,
        &sample_box,
        cfg.analysis.constants_samples,
        cfg.seed,
    ) {
        Ok(c) => (
            Some(c),
            AssumptionEntry {
                pass: true,
                value: c.mu,
                detail: format!(
                    "sampled mu = {:.6}, theta = {:.6}, theta_hat = {:.6}, ell = {:.6}",
                    c.mu, c.theta, c.theta_hat, c.ell
                ),
            },
        ),
        Err(Error::AssumptionViolation { detail, .. }) => (
            None,
            AssumptionEntry {
                pass: false,
                value: f64::NAN,
                detail,
            },
        ),
        Err(other) => return Err(other),
    };

    let unbalanced: Vec<usize> = prepared
        .schedule
        .graphs()
        .iter()
        .enumerate()
        .filter(|(_, g)| !g.is_weight_balanced(cfg.analysis.balance_tol))
        .map(|(k, _)| k)
        .collect();
    let weight_balance = AssumptionEntry {
        pass: unbalanced.is_empty(),
        value: unbalanced.len() as f64,
        detail: if unbalanced.is_empty() {
            format!(
                "all {} graphs balanced within {:.1e}",
                prepared.schedule.graphs().len(),
                cfg.analysis.balance_tol
            )
        } else {
            format!("unbalanced graphs: {unbalanced:?}")
        },
    };

    let window = cfg
        .analysis
        .connectivity_window
        .unwrap_or_else(|| prepared.schedule.period());
    let probe_step = prepared.schedule.dwell_tau();
    let connectivity = prepared.schedule.joint_connectivity(window, probe_step)?;
    let joint_connectivity = AssumptionEntry {
        pass: connectivity.connected,
        value: window,
        detail: format!(
            "window {window}: union {} over {} probes",
            if connectivity.connected {
                "connected"
            } else {
                "disconnected"
            },
            connectivity.probes_checked
        ),
    };

    let initial = build_initial(prepared)?;
    let nu_sum = block_sum(initial.nu.as_slice(), prepared.game.action_dim()).amax();
    let zero_sum = AssumptionEntry {
        pass: nu_sum <= NU_SUM_TOLERANCE,
        value: nu_sum,
        detail: format!(
            "max component of sum of nu(0) is {nu_sum:.3e} (tolerance {NU_SUM_TOLERANCE:.0e})"
        ),
    };

    let pass = monotonicity.pass && weight_balance.pass && joint_connectivity.pass && zero_sum.pass;
    Ok(AssumptionsReport {
        scenario_hash: prepared.hash.clone(),
        schedule_id: schedule_id(&cfg.schedule),
        constants,
        constants_box: cfg.analysis.constants_box,
        constants_samples: cfg.analysis.constants_samples,
        seed: cfg.seed,
        strong_monotonicity: monotonicity,
        weight_balance,
        joint_connectivity,
        connectivity_window: window,
        partial_coverage: connectivity.partial_coverage,
        zero_sum_initial_offsets: zero_sum,
        pass,
    })
}

/// Gain-bound derivation: the Lyapunov estimate plus the closed-form bound.
#[derive(Debug, Clone, Serialize)]
pub struct GainBound {
    pub constants: GameConstants,
    pub lyapunov: LyapunovEstimate,
    pub alpha: f64,
    pub delta_star: f64,
    pub auto_margin: f64,
    pub delta_auto: f64,
}

pub fn derive_gain_bound(
    prepared: &Prepared,
    constants: &GameConstants,
) -> Result<GainBound> {
    let cfg = &prepared.config;
    let dim = (2 * prepared.game.n_players() - 1) * prepared.game.action_dim();
    let q = DMatrix::<f64>::identity(dim, dim);
    let probes = cfg
        .analysis
        .probe_times
        .clone()
        .unwrap_or_else(|| default_probe_times(&prepared.schedule));
    let params = AlgorithmParams::new(1.0, cfg.params.alpha, cfg.params.beta)?;
    let lyapunov = estimate_p(
        &prepared.schedule,
        &params,
        prepared.game.action_dim(),
        &q,
        &probes,
        cfg.analysis.horizon,
        cfg.analysis.quadrature_h,
    )?;
    let ds = delta_star(
        constants,
        lyapunov.p_hat,
        lyapunov.lambda_min_q,
        cfg.params.alpha,
    )?;
    Ok(GainBound {
        constants: *constants,
        lyapunov,
        alpha: cfg.params.alpha,
        delta_star: ds,
        auto_margin: cfg.params.auto_margin,
        delta_auto: cfg.params.auto_margin * ds,
    })
}

/// Full report persisted as `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario_hash: String,
    pub schedule_id: String,
    pub seed: u64,
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub delta_was_auto: bool,
    pub auto_margin: f64,
    pub delta_star: f64,
    pub delta_below_bound: bool,
    pub p_hat: f64,
    pub lambda_hat: f64,
    pub gamma_hat: f64,
    pub quadrature_horizon: f64,
    pub probe_times: Vec<f64>,
    pub constants: GameConstants,
    pub equilibrium: Vec<f64>,
    pub oracle_residual: f64,
    pub integration: IntegrationConfig,
    pub sample_every: usize,
    pub convergence: ConvergenceReport,
    pub pass: bool,
}

pub struct ScenarioOutcome {
    pub out_dir: PathBuf,
    pub assumptions: AssumptionsReport,
    pub report: RunReport,
    pub pass: bool,
}

/// Output directory: explicit override, else `$NEGSIM_OUT` (or `.`) joined
/// with the config's `output_dir` (or `negsim-out`).
pub fn resolve_output_dir(config: &ScenarioConfig, explicit: Option<&Path>) -> PathBuf {
    if let Some(dir) = explicit {
        return dir.to_path_buf();
    }
    let root = std::env::var(OUTPUT_ROOT_ENV).unwrap_or_else(|_| ".".into());
    let leaf = config.output_dir.clone().unwrap_or_else(|| "negsim-out".into());
    Path::new(&root).join(leaf)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes)?;
    Ok(())
}

/// Validates assumptions only; writes `assumptions.json` and fails with an
/// assumption-violation error when the gate does not pass.
pub fn check_scenario(config: ScenarioConfig, out_dir: Option<&Path>) -> Result<AssumptionsReport> {
    let prepared = prepare(config)?;
    let dir = resolve_output_dir(&prepared.config, out_dir);
    fs::create_dir_all(&dir)?;
    let assumptions = evaluate_assumptions(&prepared)?;
    write_json(&dir.join("assumptions.json"), &assumptions)?;
    if let Some((name, detail)) = assumptions.first_violation() {
        return Err(Error::AssumptionViolation { name, detail });
    }
    Ok(assumptions)
}

/// Computes the gain bound for a config without integrating.
pub fn delta_star_for(config: ScenarioConfig) -> Result<GainBound> {
    let prepared = prepare(config)?;
    let assumptions = evaluate_assumptions(&prepared)?;
    if let Some((name, detail)) = assumptions.first_violation() {
        return Err(Error::AssumptionViolation { name, detail });
    }
    let constants = assumptions.constants.expect("pass implies constants");
    derive_gain_bound(&prepared, &constants)
}

/// End-to-end run: assumption gate, gain bound, integration, verification,
/// artifacts. Exit-code mapping happens at the CLI boundary.
pub fn run_scenario(config: ScenarioConfig, out_dir: Option<&Path>) -> Result<ScenarioOutcome> {
    let prepared = prepare(config)?;
    let dir = resolve_output_dir(&prepared.config, out_dir);
    fs::create_dir_all(&dir)?;

    let assumptions = evaluate_assumptions(&prepared)?;
    write_json(&dir.join("assumptions.json"), &assumptions)?;
    if let Some((name, detail)) = assumptions.first_violation() {
        return Err(Error::AssumptionViolation { name, detail });
    }
    let constants = assumptions.constants.expect("pass implies constants");

    let bound = derive_gain_bound(&prepared, &constants)?;
    let cfg = &prepared.config;
    let delta = match cfg.params.delta {
        DeltaConfig::Value(v) => v,
        DeltaConfig::Keyword(DeltaKeyword::Auto) => bound.delta_auto,
    };
    let mut params = AlgorithmParams::new(delta, cfg.params.alpha, cfg.params.beta)
        .map_err(schema_wrap)?;
    if delta < bound.delta_star {
        params = params.with_certified_bound(bound.delta_star)?;
    }

    let x_star = solve_ne(
        &prepared.game,
        &constants,
        cfg.analysis.oracle_tol,
        cfg.analysis.oracle_max_iters,
    )?;
    let oracle_residual = prepared
        .game
        .pseudo_gradient(x_star.as_slice())?
        .norm();

    let initial = build_initial(&prepared)?;
    let trajectory = integrate(
        &initial,
        &prepared.game,
        &prepared.schedule,
        &params,
        cfg.integration.t_end,
        cfg.integration.h,
    )?;

    let convergence = verify_convergence(
        &trajectory,
        &prepared.game,
        &x_star,
        &params,
        &cfg.analysis.tolerances,
    )?;

    let pass = convergence.pass;
    let report = RunReport {
        scenario_hash: prepared.hash.clone(),
        schedule_id: schedule_id(&cfg.schedule),
        seed: cfg.seed,
        delta,
        alpha: cfg.params.alpha,
        beta: cfg.params.beta,
        delta_was_auto: cfg.params.delta.is_auto(),
        auto_margin: cfg.params.auto_margin,
        delta_star: bound.delta_star,
        delta_below_bound: delta < bound.delta_star,
        p_hat: bound.lyapunov.p_hat,
        lambda_hat: bound.lyapunov.lambda_hat,
        gamma_hat: bound.lyapunov.gamma_hat,
        quadrature_horizon: bound.lyapunov.truncation_horizon,
        probe_times: bound.lyapunov.probe_times.clone(),
        constants,
        equilibrium: x_star.as_slice().to_vec(),
        oracle_residual,
        integration: cfg.integration,
        sample_every: cfg.sample_every,
        convergence,
        pass,
    };
    write_json(&dir.join("report.json"), &report)?;

    let decimated = trajectory.decimated(cfg.sample_every);
    let mut csv = Vec::new();
    decimated.write_csv(
        &mut csv,
        prepared.game.n_players(),
        prepared.game.action_dim(),
    )?;
    fs::write(dir.join("trajectory.csv"), csv)?;

    Ok(ScenarioOutcome {
        out_dir: dir,
        assumptions,
        pass: report.pass,
        report,
    })
}

/// Grid axes for `sweep`; absent axes keep the base config's value.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub delta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub segment_len: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct GridPoint {
    delta: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
    segment_len: Option<f64>,
}

fn grid_points(grid: &SweepGrid) -> Vec<GridPoint> {
    if grid.delta.is_empty()
        && grid.alpha.is_empty()
        && grid.beta.is_empty()
        && grid.segment_len.is_empty()
    {
        return Vec::new();
    }
    let opt = |axis: &[f64]| -> Vec<Option<f64>> {
        if axis.is_empty() {
            vec![None]
        } else {
            axis.iter().copied().map(Some).collect()
        }
    };
    let mut points = Vec::new();
    for &delta in &opt(&grid.delta) {
        for &alpha in &opt(&grid.alpha) {
            for &beta in &opt(&grid.beta) {
                for &segment_len in &opt(&grid.segment_len) {
                    points.push(GridPoint {
                        delta,
                        alpha,
                        beta,
                        segment_len,
                    });
                }
            }
        }
    }
    points
}

fn apply_point(base: &ScenarioConfig, point: &GridPoint) -> Result<ScenarioConfig> {
    let mut cfg = base.clone();
    if let Some(d) = point.delta {
        cfg.params.delta = DeltaConfig::Value(d);
    }
    if let Some(a) = point.alpha {
        cfg.params.alpha = a;
    }
    if let Some(b) = point.beta {
        cfg.params.beta = b;
    }
    if let Some(len) = point.segment_len {
        match &mut cfg.schedule {
            ScheduleConfig::RingPartition { segment_len, .. } => *segment_len = len,
            ScheduleConfig::Inline(_) => {
                return Err(Error::Schema(
                    "segment_len sweeps require a ring_partition schedule".into(),
                ))
            }
        }
    }
    Ok(cfg)
}

pub struct SweepOutcome {
    pub summary_path: PathBuf,
    pub runs: usize,
}

const SUMMARY_HEADER: &str = "run,delta,alpha,beta,segment_len,status,pass,delta_used,delta_star,terminal_x,terminal_s,terminal_nu,lambda_hat,r_squared";

/// One independent run per grid point (isolated output subdirectories, any
/// per-run failure becomes a summary row instead of aborting the sweep).
pub fn sweep(
    base: ScenarioConfig,
    grid: &SweepGrid,
    out_dir: Option<&Path>,
) -> Result<SweepOutcome> {
    prepare(base.clone())?; // surface schema errors before any run
    let root = resolve_output_dir(&base, out_dir);
    fs::create_dir_all(&root)?;
    let points = grid_points(grid);

    let opt_str = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let rows: Vec<String> = points
        .par_iter()
        .enumerate()
        .map(|(k, point)| {
            let run_dir = root.join(format!("run_{k:03}"));
            let row_prefix = format!(
                "{k},{},{},{},{}",
                opt_str(point.delta),
                opt_str(point.alpha),
                opt_str(point.beta),
                opt_str(point.segment_len)
            );
            let cfg = match apply_point(&base, point) {
                Ok(cfg) => cfg,
                Err(e) => {
                    return format!("{row_prefix},{},false,,,,,,,", status_of(&e));
                }
            };
            match run_scenario(cfg, Some(&run_dir)) {
                Ok(outcome) => {
                    let r = &outcome.report;
                    let fit = r.convergence.decay;
                    format!(
                        "{row_prefix},ok,{},{},{},{},{},{},{},{}",
                        r.pass,
                        r.delta,
                        r.delta_star,
                        r.convergence.terminal_error_x,
                        r.convergence.terminal_error_s,
                        r.convergence.terminal_error_nu,
                        fit.map(|f| f.lambda_hat.to_string()).unwrap_or_default(),
                        fit.map(|f| f.r_squared.to_string()).unwrap_or_default(),
                    )
                }
                Err(e) => format!("{row_prefix},{},false,,,,,,,", status_of(&e)),
            }
        })
        .collect();

    let mut text = String::from(SUMMARY_HEADER);
    text.push('\n');
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    let summary_path = root.join("summary.csv");
    fs::write(&summary_path, text)?;
    Ok(SweepOutcome {
        summary_path,
        runs: points.len(),
    })
}

fn status_of(e: &Error) -> &'static str {
    match e.exit_code() {
        2 => "schema-error",
        3 => "assumption-violation",
        4 => "divergence",
        _ => "error",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_prepare() {
        for name in PRESET_NAMES {
            let cfg = preset(name).unwrap();
            let prepared = prepare(cfg).unwrap();
            assert!(prepared.game.n_players() >= 2);
        }
        assert!(preset("nope").is_none());
    }

    #[test]
    fn hash_ignores_formatting_but_not_content() {
        let a = preset("lq-n2-static-pair").unwrap();
        let mut b = a.clone();
        assert_eq!(scenario_hash(&a), scenario_hash(&b));
        b.seed = 43;
        assert_ne!(scenario_hash(&a), scenario_hash(&b));
    }

    #[test]
    fn unknown_fields_are_schema_errors() {
        let text = r#"{ "game": {}, "unknown_top_level": 1 }"#;
        let parsed: std::result::Result<ScenarioConfig, _> = serde_json::from_str(text);
        assert!(parsed.is_err());
    }

    #[test]
    fn delta_parses_as_auto_or_number() {
        let auto: DeltaConfig = serde_json::from_str("\"auto\"").unwrap();
        assert!(auto.is_auto());
        let v: DeltaConfig = serde_json::from_str("0.25").unwrap();
        assert!(!v.is_auto());
        let bad: std::result::Result<DeltaConfig, _> = serde_json::from_str("\"fast\"");
        assert!(bad.is_err());
    }

    #[test]
    fn grid_point_expansion() {
        let grid = SweepGrid {
            delta: vec![0.1, 0.2],
            alpha: vec![1.0],
            beta: vec![],
            segment_len: vec![0.5, 1.0, 2.0],
        };
        assert_eq!(grid_points(&grid).len(), 6);
        assert!(grid_points(&SweepGrid::default()).is_empty());
    }

    #[test]
    fn assumptions_fail_for_unbalanced_graph() {
        let mut cfg = preset("lq-n2-static-pair").unwrap();
        // single directed edge: node 0 hears node 1, nothing back
        cfg.schedule = ScheduleConfig::Inline(ScheduleJson {
            nodes: 2,
            graphs: vec![vec![0.0, 1.0, 0.0, 0.0]],
            segments: vec![(0, 1.0)],
            repeat: true,
        });
        let prepared = prepare(cfg).unwrap();
        let report = evaluate_assumptions(&prepared).unwrap();
        assert!(!report.weight_balance.pass);
        assert_eq!(report.first_violation().unwrap().0, "weight balance");
    }

    #[test]
    fn assumptions_fail_for_nonzero_nu_sum() {
        let mut cfg = preset("lq-n2-static-pair").unwrap();
        cfg.initial = InitialConfig::Explicit {
            x: vec![0.0, 0.0],
            s: None,
            nu: Some(vec![0.25, 0.0]),
        };
        let prepared = prepare(cfg).unwrap();
        let report = evaluate_assumptions(&prepared).unwrap();
        assert!(!report.zero_sum_initial_offsets.pass);
        assert_eq!(
            report.first_violation().unwrap().0,
            "zero-sum initial offsets"
        );
    }
}
