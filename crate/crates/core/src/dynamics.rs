//! The closed-loop seeking dynamics, switch-aligned fixed-step integration,
//! the error/orthogonal coordinate transforms, and the ancillary switched
//! linear system extracted from the estimator error dynamics.
//!
//! Per player the dynamics are
//!
//! ```text
//! x_i' = -delta * J_i(x_i, s_i)
//! s_i' = -alpha (s_i - phi_i(x_i)) - beta * sum_{j in N_i(t)} a_ij (s_i - s_j) - nu_i
//! nu_i' = alpha * beta * sum_{j in N_i(t)} a_ij (s_i - s_j)
//! ```
//!
//! so each player touches only its own state and its current in-neighbors.
//! The integrator is classical fourth-order Runge-Kutta with a fixed step
//! that is shortened to land exactly on every switching instant; the
//! right-hand side is smooth inside each segment, so fourth-order accuracy
//! holds piecewise and trajectories are fully deterministic.

use std::io::Write;

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::graph::{Laplacian, SwitchingSchedule};

/// States whose norm passes this limit abort integration as divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e9;

/// Tolerance on the zero-sum initial condition for the `nu` offsets.
pub const NU_SUM_TOLERANCE: f64 = 1e-12;

/// Gains of the seeking dynamics. `delta` scales the action update, `alpha`
/// and `beta` the estimator. A certified upper bound for `delta` can be
/// attached once computed; the constructor then enforces `delta` below it.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AlgorithmParams {
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    certified_delta_star: Option<f64>,
}

impl AlgorithmParams {
    pub fn new(delta: f64, alpha: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("delta", delta), ("alpha", alpha), ("beta", beta)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    what: "algorithm parameter",
                    detail: format!("{name} must be positive and finite, got {v}"),
                });
            }
        }
        Ok(Self {
            delta,
            alpha,
            beta,
            certified_delta_star: None,
        })
    }

    pub fn with_certified_bound(mut self, delta_star: f64) -> Result<Self> {
        if !(delta_star > 0.0) {
            return Err(Error::InvalidParameter {
                what: "certified bound",
                detail: format!("must be positive, got {delta_star}"),
            });
        }
        if self.delta >= delta_star {
            return Err(Error::InvalidParameter {
                what: "algorithm parameter",
                detail: format!(
                    "delta = {} is not below the certified bound {delta_star}",
                    self.delta
                ),
            });
        }
        self.certified_delta_star = Some(delta_star);
        Ok(self)
    }

    pub fn certified_bound(&self) -> Option<f64> {
        self.certified_delta_star
    }
}

/// Concatenated solver state `(x, s, nu)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub x: DVector<f64>,
    pub s: DVector<f64>,
    pub nu: DVector<f64>,
    pub t: f64,
}

impl SystemState {
    pub fn new(x: DVector<f64>, s: DVector<f64>, nu: DVector<f64>, t: f64) -> Result<Self> {
        if s.len() != x.len() || nu.len() != x.len() {
            return Err(Error::DimensionMismatch {
                context: "system state blocks",
                expected: x.len(),
                actual: s.len().max(nu.len()),
            });
        }
        Ok(Self { x, s, nu, t })
    }

    /// Default initialization `s(0) = phi(x(0))`, `nu(0) = 0`, which satisfies
    /// the zero-sum condition on the `nu` offsets for any `x(0)`.
    pub fn default_for(game: &GameSpec, x0: DVector<f64>) -> Result<Self> {
        let s = game.phi_stacked(x0.as_slice())?;
        let nu = DVector::zeros(x0.len());
        Self::new(x0, s, nu, 0.0)
    }

    pub fn block_dim(&self) -> usize {
        self.x.len()
    }

    fn flatten(&self) -> DVector<f64> {
        let nn = self.block_dim();
        let mut y = DVector::zeros(3 * nn);
        y.rows_mut(0, nn).copy_from(&self.x);
        y.rows_mut(nn, nn).copy_from(&self.s);
        y.rows_mut(2 * nn, nn).copy_from(&self.nu);
        y
    }
}

/// Sum of the per-player blocks of a stacked vector (an `n`-dimensional total).
pub fn block_sum(v: &[f64], action_dim: usize) -> DVector<f64> {
    let mut acc = DVector::zeros(action_dim);
    for chunk in v.chunks_exact(action_dim) {
        for (a, &c) in acc.iter_mut().zip(chunk) {
            *a += c;
        }
    }
    acc
}

/// Consensus and disagreement projectors `(1 1^T / N) (x) I_n` and its
/// complement, as explicit matrices.
pub fn projection_matrices(n_agents: usize, action_dim: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let ones = DMatrix::from_element(n_agents, n_agents, 1.0 / n_agents as f64);
    let eye = DMatrix::identity(action_dim, action_dim);
    let consensus = ones.kronecker(&eye);
    let dim = n_agents * action_dim;
    let disagreement = DMatrix::identity(dim, dim) - &consensus;
    (consensus, disagreement)
}

/// Orthonormal splitting of agent space into the consensus direction
/// `r = 1/sqrt(N)` and a deterministically chosen complement `R` with
/// `R^T R = I` and `R^T r = 0`, plus their Kronecker lifts by `I_n`.
#[derive(Debug, Clone)]
pub struct OrthoBasis {
    n_agents: usize,
    action_dim: usize,
    r: DVector<f64>,
    big_r: DMatrix<f64>,
    r_kron: DMatrix<f64>,
    big_r_kron: DMatrix<f64>,
    q_kron: DMatrix<f64>,
}

/// The complement is pinned by a QR factorization of `[r | I]` with each
/// column's first significant entry made positive, so repeated runs and
/// golden files agree bit for bit.
pub fn orthogonal_basis(n_agents: usize, action_dim: usize) -> Result<OrthoBasis> {
    if n_agents < 2 || action_dim == 0 {
        return Err(Error::InvalidParameter {
            what: "basis dimensions",
            detail: format!("need n_agents >= 2 and action_dim >= 1, got {n_agents}, {action_dim}"),
        });
    }
    let n = n_agents;
    let r = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut seed = DMatrix::zeros(n, n + 1);
    seed.column_mut(0).copy_from(&r);
    for i in 0..n {
        seed[(i, i + 1)] = 1.0;
    }
    let q = seed.qr().q();
    let mut big_r = DMatrix::zeros(n, n - 1);
    for c in 0..n - 1 {
        let mut col = q.column(c + 1).clone_owned();
        if let Some(lead) = col.iter().find(|v| v.abs() > 1e-12) {
            if *lead < 0.0 {
                col = -col;
            }
        }
        big_r.set_column(c, &col);
    }
    let eye = DMatrix::identity(action_dim, action_dim);
    let r_kron = DMatrix::from_column_slice(n, 1, r.as_slice()).kronecker(&eye);
    let big_r_kron = big_r.kronecker(&eye);
    let mut q_full = DMatrix::zeros(n, n);
    q_full.set_column(0, &r);
    for c in 0..n - 1 {
        q_full.set_column(c + 1, &big_r.column(c));
    }
    let q_kron = q_full.kronecker(&eye);
    Ok(OrthoBasis {
        n_agents,
        action_dim,
        r,
        big_r,
        r_kron,
        big_r_kron,
        q_kron,
    })
}

impl OrthoBasis {
    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn consensus_direction(&self) -> &DVector<f64> {
        &self.r
    }

    pub fn complement(&self) -> &DMatrix<f64> {
        &self.big_r
    }

    /// `r (x) I_n`, size `Nn x n`.
    pub fn r_kron(&self) -> &DMatrix<f64> {
        &self.r_kron
    }

    /// `R (x) I_n`, size `Nn x (N-1)n`.
    pub fn big_r_kron(&self) -> &DMatrix<f64> {
        &self.big_r_kron
    }

    /// `[r R] (x) I_n`, orthogonal, size `Nn x Nn`.
    pub fn q_kron(&self) -> &DMatrix<f64> {
        &self.q_kron
    }

    /// `(R^T L R) (x) I_n`, the Laplacian seen by the disagreement coordinates.
    pub fn reduced_laplacian(&self, lap: &Laplacian) -> DMatrix<f64> {
        let reduced = self.big_r.transpose() * lap.matrix() * &self.big_r;
        reduced.kronecker(&DMatrix::identity(self.action_dim, self.action_dim))
    }
}

/// Right-hand side of the closed loop for one active graph. Returns
/// `(x', s', nu')`. Player blocks are computed from neighbor sums, so the
/// evaluation is local by construction.
pub fn closed_loop_field(
    state: &SystemState,
    game: &GameSpec,
    lap_active: &Laplacian,
    params: &AlgorithmParams,
) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let nn = game.strategy_dim();
    if state.block_dim() != nn {
        return Err(Error::DimensionMismatch {
            context: "closed-loop state",
            expected: nn,
            actual: state.block_dim(),
        });
    }
    if lap_active.n_nodes() != game.n_players() {
        return Err(Error::DimensionMismatch {
            context: "closed-loop graph",
            expected: game.n_players(),
            actual: lap_active.n_nodes(),
        });
    }
    let x_dot = -params.delta
        * game.extended_pseudo_gradient(state.x.as_slice(), state.s.as_slice())?;

    let n = game.action_dim();
    let l = lap_active.matrix();
    let mut s_dot = DVector::zeros(nn);
    let mut nu_dot = DVector::zeros(nn);
    for i in 0..game.n_players() {
        let s_i = state.s.rows(i * n, n);
        let phi_i = game.phi_block(i, &state.x.as_slice()[i * n..(i + 1) * n]);
        let mut coupling = DVector::zeros(n);
        for j in 0..game.n_players() {
            if j == i {
                continue;
            }
            let weight = -l[(i, j)]; // a_ij
            if weight != 0.0 {
                let s_j = state.s.rows(j * n, n);
                coupling += weight * (s_i - s_j);
            }
        }
        let nu_i = state.nu.rows(i * n, n);
        let ds = -params.alpha * (s_i - phi_i) - params.beta * &coupling - nu_i;
        s_dot.rows_mut(i * n, n).copy_from(&ds);
        nu_dot
            .rows_mut(i * n, n)
            .copy_from(&(params.alpha * params.beta * coupling));
    }
    Ok((x_dot, s_dot, nu_dot))
}

/// Time-stamped state sequence with the active graph per sample. Sample times
/// are strictly increasing and include every switching instant exactly; the
/// graph label is right-continuous (a switching-instant sample carries the
/// incoming graph).
#[derive(Debug, Clone)]
pub struct Trajectory {
    dim: usize,
    times: Vec<f64>,
    graph_idx: Vec<usize>,
    data: Vec<f64>,
}

impl Trajectory {
    fn with_capacity(dim: usize, capacity: usize) -> Self {
        Self {
            dim,
            times: Vec::with_capacity(capacity),
            graph_idx: Vec::with_capacity(capacity),
            data: Vec::with_capacity(capacity.saturating_mul(dim)),
        }
    }

    fn push(&mut self, t: f64, graph_idx: usize, y: &DVector<f64>) {
        debug_assert_eq!(y.len(), self.dim);
        self.times.push(t);
        self.graph_idx.push(graph_idx);
        self.data.extend_from_slice(y.as_slice());
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.dim
    }

    pub fn time(&self, k: usize) -> f64 {
        self.times[k]
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn graph_index(&self, k: usize) -> usize {
        self.graph_idx[k]
    }

    pub fn state(&self, k: usize) -> DVectorView<'_, f64> {
        DVectorView::from_slice(&self.data[k * self.dim..(k + 1) * self.dim], self.dim)
    }

    pub fn last_state(&self) -> DVectorView<'_, f64> {
        self.state(self.len() - 1)
    }

    /// Keeps every `stride`-th sample plus the first, the last, and all
    /// switching-instant samples.
    pub fn decimated(&self, stride: usize) -> Trajectory {
        let stride = stride.max(1);
        let mut out = Trajectory::with_capacity(self.dim, self.len() / stride + 2);
        for k in 0..self.len() {
            let keep = k == 0
                || k + 1 == self.len()
                || k % stride == 0
                || self.graph_idx[k] != self.graph_idx[k - 1];
            if keep {
                out.times.push(self.times[k]);
                out.graph_idx.push(self.graph_idx[k]);
                out.data
                    .extend_from_slice(&self.data[k * self.dim..(k + 1) * self.dim]);
            }
        }
        out
    }

    /// CSV export for closed-loop trajectories:
    /// `t,graph_idx,x_0..x_{Nn-1},s_0..s_{Nn-1},nu_0..nu_{Nn-1}`, one row per
    /// sample, shortest round-trip decimal formatting.
    pub fn write_csv<W: Write>(
        &self,
        w: &mut W,
        n_players: usize,
        action_dim: usize,
    ) -> Result<()> {
        let nn = n_players * action_dim;
        if self.dim != 3 * nn {
            return Err(Error::DimensionMismatch {
                context: "trajectory csv",
                expected: 3 * nn,
                actual: self.dim,
            });
        }
        let mut header = String::from("t,graph_idx");
        for prefix in ["x", "s", "nu"] {
            for k in 0..nn {
                header.push_str(&format!(",{prefix}_{k}"));
            }
        }
        writeln!(w, "{header}")?;
        let mut line = String::new();
        for k in 0..self.len() {
            line.clear();
            line.push_str(&format!("{},{}", self.times[k], self.graph_idx[k]));
            for v in &self.data[k * self.dim..(k + 1) * self.dim] {
                line.push(',');
                line.push_str(&format!("{v}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

fn rk4_step<F>(y: &mut DVector<f64>, t: f64, h: f64, graph_idx: usize, field: &mut F)
where
    F: FnMut(usize, f64, &DVector<f64>) -> DVector<f64>,
{
    let k1 = field(graph_idx, t, y);
    let k2 = field(graph_idx, t + 0.5 * h, &(&*y + 0.5 * h * &k1));
    let k3 = field(graph_idx, t + 0.5 * h, &(&*y + 0.5 * h * &k2));
    let k4 = field(graph_idx, t + h, &(&*y + h * &k3));
    *y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Fixed-step RK4 over a switching schedule. Steps never straddle a switching
/// instant: within each segment the last step is shortened to land exactly on
/// the boundary, then stepping resumes with `h`. `on_sample` sees the initial
/// state and every accepted step with the right-continuous graph label.
pub(crate) fn integrate_switched<F, S>(
    schedule: &SwitchingSchedule,
    t0: f64,
    t_end: f64,
    h: f64,
    y0: DVector<f64>,
    mut field: F,
    mut on_sample: S,
) -> Result<DVector<f64>>
where
    F: FnMut(usize, f64, &DVector<f64>) -> DVector<f64>,
    S: FnMut(f64, usize, &DVector<f64>),
{
    if !(h > 0.0) {
        return Err(Error::InvalidParameter {
            what: "step size",
            detail: format!("must be positive, got {h}"),
        });
    }
    if !(t_end > t0) {
        return Err(Error::InvalidParameter {
            what: "time span",
            detail: format!("t_end = {t_end} must exceed t0 = {t0}"),
        });
    }
    let mut y = y0;
    let mut span = schedule.segment_at(t0)?;
    on_sample(t0, span.graph_idx, &y);
    let mut t = t0;
    let eps = 1e-9 * h;
    while t < t_end - eps {
        let seg_end = span.end.min(t_end);
        let seg_len = seg_end - t;
        let n_steps = ((seg_len / h) - 1e-9).ceil().max(1.0) as usize;
        for k in 0..n_steps {
            let step_start = t + k as f64 * h;
            let target = if k + 1 == n_steps {
                seg_end
            } else {
                t + (k + 1) as f64 * h
            };
            rk4_step(&mut y, step_start, target - step_start, span.graph_idx, &mut field);
            let norm = y.norm();
            if !norm.is_finite() || norm > DIVERGENCE_LIMIT {
                return Err(Error::Divergence {
                    t: target,
                    norm,
                    limit: DIVERGENCE_LIMIT,
                });
            }
            if k + 1 < n_steps {
                on_sample(target, span.graph_idx, &y);
            }
        }
        t = seg_end;
        if t >= t_end - eps {
            let label = schedule
                .segment_at(t)
                .map(|s| s.graph_idx)
                .unwrap_or(span.graph_idx);
            on_sample(t, label, &y);
            break;
        }
        span = schedule.segment_at(t)?;
        on_sample(t, span.graph_idx, &y);
    }
    Ok(y)
}

/// Integrates the closed loop from `initial` to `t_end`. Requires the
/// zero-sum condition on the initial `nu` offsets; without it the estimator
/// cannot track the aggregate and the limits shift.
pub fn integrate(
    initial: &SystemState,
    game: &GameSpec,
    schedule: &SwitchingSchedule,
    params: &AlgorithmParams,
    t_end: f64,
    h: f64,
) -> Result<Trajectory> {
    let nn = game.strategy_dim();
    if initial.block_dim() != nn {
        return Err(Error::DimensionMismatch {
            context: "initial state",
            expected: nn,
            actual: initial.block_dim(),
        });
    }
    if schedule.n_nodes() != game.n_players() {
        return Err(Error::DimensionMismatch {
            context: "schedule node count",
            expected: game.n_players(),
            actual: schedule.n_nodes(),
        });
    }
    let nu_sum = block_sum(initial.nu.as_slice(), game.action_dim());
    if nu_sum.amax() > NU_SUM_TOLERANCE {
        return Err(Error::AssumptionViolation {
            name: "zero-sum initial offsets",
            detail: format!(
                "sum of nu(0) over players must vanish (within {NU_SUM_TOLERANCE:.0e}); got max component {:.3e}",
                nu_sum.amax()
            ),
        });
    }

    let laps: Vec<Laplacian> = schedule.graphs().iter().map(|g| g.laplacian()).collect();
    let n = game.action_dim();
    let alpha = params.alpha;
    let beta = params.beta;
    let delta = params.delta;

    let field = |graph_idx: usize, _t: f64, y: &DVector<f64>| -> DVector<f64> {
        let x = &y.as_slice()[0..nn];
        let s = &y.as_slice()[nn..2 * nn];
        let nu = &y.as_slice()[2 * nn..3 * nn];
        let l = laps[graph_idx].matrix();
        let mut dy = DVector::zeros(3 * nn);

        let f_ext = game
            .extended_pseudo_gradient(x, s)
            .expect("dimensions validated before integration");
        for k in 0..nn {
            dy[k] = -delta * f_ext[k];
        }
        for i in 0..game.n_players() {
            let phi_i = game.phi_block(i, &x[i * n..(i + 1) * n]);
            for c in 0..n {
                let s_ic = s[i * n + c];
                let mut coupling = 0.0;
                for j in 0..game.n_players() {
                    if j != i {
                        let weight = -l[(i, j)];
                        if weight != 0.0 {
                            coupling += weight * (s_ic - s[j * n + c]);
                        }
                    }
                }
                dy[nn + i * n + c] = -alpha * (s_ic - phi_i[c]) - beta * coupling - nu[i * n + c];
                dy[2 * nn + i * n + c] = alpha * beta * coupling;
            }
        }
        dy
    };

    let capacity = ((t_end - initial.t) / h).ceil() as usize + schedule.segments().len() + 2;
    let mut trajectory = Trajectory::with_capacity(3 * nn, capacity);
    integrate_switched(
        schedule,
        initial.t,
        t_end,
        h,
        initial.flatten(),
        field,
        |t, idx, y| trajectory.push(t, idx, y),
    )?;
    Ok(trajectory)
}

/// Error coordinates of a state: offsets of `s` and `nu` from their
/// equilibrium manifolds and the orthogonal split into consensus (`y1`, `z1`)
/// and disagreement (`y2`, `z2`) parts.
#[derive(Debug, Clone)]
pub struct TransformedState {
    pub x_bar: DVector<f64>,
    pub s_bar: DVector<f64>,
    pub nu_bar: DVector<f64>,
    pub y1: DVector<f64>,
    pub y2: DVector<f64>,
    pub z1: DVector<f64>,
    pub z2: DVector<f64>,
}

pub fn to_error_coordinates(
    state: &SystemState,
    game: &GameSpec,
    x_star: &DVector<f64>,
    basis: &OrthoBasis,
    alpha: f64,
) -> Result<TransformedState> {
    let nn = game.strategy_dim();
    if state.block_dim() != nn || x_star.len() != nn {
        return Err(Error::DimensionMismatch {
            context: "error coordinates",
            expected: nn,
            actual: state.block_dim().min(x_star.len()),
        });
    }
    let n = game.action_dim();
    let phi = game.phi_stacked(state.x.as_slice())?;
    let mean = block_sum(phi.as_slice(), n) / game.n_players() as f64;
    let mut consensus_phi = DVector::zeros(nn);
    for i in 0..game.n_players() {
        consensus_phi.rows_mut(i * n, n).copy_from(&mean);
    }
    let disagreement_phi = &phi - &consensus_phi;

    let s_bar = &state.s - consensus_phi;
    let nu_bar = &state.nu - alpha * disagreement_phi;
    let y1 = basis.r_kron().transpose() * &s_bar;
    let y2 = basis.big_r_kron().transpose() * &s_bar;
    let z1 = basis.r_kron().transpose() * &nu_bar;
    let z2 = basis.big_r_kron().transpose() * &nu_bar;
    Ok(TransformedState {
        x_bar: &state.x - x_star,
        s_bar,
        nu_bar,
        y1,
        y2,
        z1,
        z2,
    })
}

/// System matrix of the ancillary switched linear system for one active
/// graph, in the block coordinates `(zeta_1, zeta_2, zeta_3)` of sizes
/// `n, Nn-n, Nn-n`:
///
/// ```text
/// [ -alpha I        0                                0   ]
/// [  0        -alpha I - beta (R'LR)(x)I_n          -I   ]
/// [  0         alpha beta (R'LR)(x)I_n               0   ]
/// ```
pub fn ancillary_matrix(
    lap_active: &Laplacian,
    params: &AlgorithmParams,
    basis: &OrthoBasis,
    action_dim: usize,
) -> DMatrix<f64> {
    let n = action_dim;
    let m = (basis.n_agents() - 1) * n;
    let dim = n + 2 * m;
    let reduced = basis.reduced_laplacian(lap_active);
    let mut a = DMatrix::zeros(dim, dim);
    for k in 0..n {
        a[(k, k)] = -params.alpha;
    }
    for r in 0..m {
        for c in 0..m {
            a[(n + r, n + c)] = -params.beta * reduced[(r, c)];
            a[(n + m + r, n + c)] = params.alpha * params.beta * reduced[(r, c)];
        }
        a[(n + r, n + r)] += -params.alpha;
        a[(n + r, n + m + r)] = -1.0;
    }
    a
}

/// Integrates the ancillary system `zeta' = A(t) zeta` with the same
/// switch-aligned stepper. The state dimension must be `(2N - 1) * n` for the
/// schedule's `N` nodes.
pub fn simulate_ancillary(
    schedule: &SwitchingSchedule,
    params: &AlgorithmParams,
    zeta0: DVector<f64>,
    t_end: f64,
    h: f64,
) -> Result<Trajectory> {
    let agents = schedule.n_nodes();
    let blocks = 2 * agents - 1;
    if zeta0.len() % blocks != 0 || zeta0.is_empty() {
        return Err(Error::DimensionMismatch {
            context: "ancillary state",
            expected: blocks,
            actual: zeta0.len(),
        });
    }
    let action_dim = zeta0.len() / blocks;
    let basis = orthogonal_basis(agents, action_dim)?;
    let mats: Vec<DMatrix<f64>> = schedule
        .graphs()
        .iter()
        .map(|g| ancillary_matrix(&g.laplacian(), params, &basis, action_dim))
        .collect();

    let capacity = (t_end / h).ceil() as usize + schedule.segments().len() + 2;
    let mut trajectory = Trajectory::with_capacity(zeta0.len(), capacity);
    integrate_switched(
        schedule,
        0.0,
        t_end,
        h,
        zeta0,
        |idx, _t, y| &mats[idx] * y,
        |t, idx, y| trajectory.push(t, idx, y),
    )?;
    Ok(trajectory)
}
