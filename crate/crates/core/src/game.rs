//! Aggregative games: cost gradients, the aggregate map, the extended
//! pseudo-gradient, empirical certification of the regularity constants, and a
//! centralized equilibrium solver used as ground truth by every convergence
//! test.
//!
//! A game is supplied through gradient callables rather than symbolic costs:
//! the seeking dynamics only ever consume the per-player gradients
//! `J_i(x_i, s_i)`. An optional scalar cost enables finite-difference
//! cross-checks of the supplied gradients.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// `(i, x_i, s_i) -> (grad of cost in own action, grad of cost in the aggregate slot)`.
pub type CostGradFn =
    dyn Fn(usize, &[f64], &[f64]) -> (DVector<f64>, DVector<f64>) + Send + Sync;
/// `(i, x_i) -> phi_i(x_i)`, player i's contribution to the aggregate.
pub type PhiFn = dyn Fn(usize, &[f64]) -> DVector<f64> + Send + Sync;
/// `(i, x_i) -> transposed Jacobian of phi_i at x_i`.
pub type PhiJacFn = dyn Fn(usize, &[f64]) -> DMatrix<f64> + Send + Sync;
/// `(i, x_i, s_i) -> scalar cost`, optional, for finite-difference checks.
pub type CostFn = dyn Fn(usize, &[f64], &[f64]) -> f64 + Send + Sync;

/// Immutable description of an aggregative game. All operations are pure.
pub struct GameSpec {
    n_players: usize,
    action_dim: usize,
    cost_grad: Box<CostGradFn>,
    phi: Box<PhiFn>,
    phi_jac: Box<PhiJacFn>,
    cost: Option<Box<CostFn>>,
}

impl std::fmt::Debug for GameSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GameSpec")
            .field("n_players", &self.n_players)
            .field("action_dim", &self.action_dim)
            .field("has_cost", &self.cost.is_some())
            .finish()
    }
}

impl GameSpec {
    pub fn new(
        n_players: usize,
        action_dim: usize,
        cost_grad: Box<CostGradFn>,
        phi: Box<PhiFn>,
        phi_jac: Box<PhiJacFn>,
    ) -> Result<Self> {
        if n_players == 0 || action_dim == 0 {
            return Err(Error::InvalidParameter {
                what: "game dimensions",
                detail: format!("n_players = {n_players}, action_dim = {action_dim} must be positive"),
            });
        }
        Ok(Self {
            n_players,
            action_dim,
            cost_grad,
            phi,
            phi_jac,
            cost: None,
        })
    }

    pub fn with_cost(mut self, cost: Box<CostFn>) -> Self {
        self.cost = Some(cost);
        self
    }

    pub fn n_players(&self) -> usize {
        self.n_players
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    /// Total dimension of a strategy vector.
    pub fn strategy_dim(&self) -> usize {
        self.n_players * self.action_dim
    }

    pub fn has_cost(&self) -> bool {
        self.cost.is_some()
    }

    fn check_len(&self, context: &'static str, v: &[f64]) -> Result<()> {
        if v.len() != self.strategy_dim() {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.strategy_dim(),
                actual: v.len(),
            });
        }
        Ok(())
    }

    fn block<'a>(&self, v: &'a [f64], i: usize) -> &'a [f64] {
        let n = self.action_dim;
        &v[i * n..(i + 1) * n]
    }

    pub fn phi_block(&self, i: usize, x_i: &[f64]) -> DVector<f64> {
        (self.phi)(i, x_i)
    }

    pub fn phi_jacobian_block(&self, i: usize, x_i: &[f64]) -> DMatrix<f64> {
        (self.phi_jac)(i, x_i)
    }

    /// Stacked contributions `col(phi_1(x_1), ..., phi_N(x_N))`.
    pub fn phi_stacked(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_len("phi argument", x)?;
        let n = self.action_dim;
        let mut out = DVector::zeros(self.strategy_dim());
        for i in 0..self.n_players {
            let p = (self.phi)(i, self.block(x, i));
            out.rows_mut(i * n, n).copy_from(&p);
        }
        Ok(out)
    }

    /// The aggregate `(1/N) sum_i phi_i(x_i)`.
    pub fn aggregate(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_len("aggregate argument", x)?;
        let mut acc = DVector::zeros(self.action_dim);
        for i in 0..self.n_players {
            acc += (self.phi)(i, self.block(x, i));
        }
        Ok(acc / self.n_players as f64)
    }

    /// Extended pseudo-gradient `col(J_1(x_1, s_1), ..., J_N(x_N, s_N))` with
    /// `J_i = grad_own + (1/N) * phi_jac_i * grad_agg`.
    pub fn extended_pseudo_gradient(&self, x: &[f64], s: &[f64]) -> Result<DVector<f64>> {
        self.check_len("extended pseudo-gradient x", x)?;
        self.check_len("extended pseudo-gradient s", s)?;
        let n = self.action_dim;
        let inv_n = 1.0 / self.n_players as f64;
        let mut out = DVector::zeros(self.strategy_dim());
        for i in 0..self.n_players {
            let x_i = self.block(x, i);
            let (grad_own, grad_agg) = (self.cost_grad)(i, x_i, self.block(s, i));
            let j_i = grad_own + inv_n * ((self.phi_jac)(i, x_i) * grad_agg);
            out.rows_mut(i * n, n).copy_from(&j_i);
        }
        Ok(out)
    }

    /// Pseudo-gradient of the game, evaluated via the identity
    /// `F(x) = extended(x, 1_N (x) aggregate(x))`.
    pub fn pseudo_gradient(&self, x: &[f64]) -> Result<DVector<f64>> {
        let sigma = self.aggregate(x)?;
        let mut s = DVector::zeros(self.strategy_dim());
        for i in 0..self.n_players {
            s.rows_mut(i * self.action_dim, self.action_dim)
                .copy_from(&sigma);
        }
        self.extended_pseudo_gradient(x, s.as_slice())
    }

    /// Cross-checks `cost_grad` against central finite differences of the
    /// scalar cost at the given `(x, s)` points. Requires a cost callable.
    pub fn check_gradients(&self, points: &[(DVector<f64>, DVector<f64>)], rel_tol: f64) -> Result<()> {
        let cost = self.cost.as_ref().ok_or_else(|| Error::InvalidParameter {
            what: "gradient check",
            detail: "no scalar cost supplied".into(),
        })?;
        let n = self.action_dim;
        let h = 1e-5;
        for (x, s) in points {
            self.check_len("gradient check x", x.as_slice())?;
            self.check_len("gradient check s", s.as_slice())?;
            for i in 0..self.n_players {
                let x_i = self.block(x.as_slice(), i).to_vec();
                let s_i = self.block(s.as_slice(), i).to_vec();
                let (grad_own, grad_agg) = (self.cost_grad)(i, &x_i, &s_i);
                for k in 0..n {
                    let mut plus = x_i.clone();
                    let mut minus = x_i.clone();
                    plus[k] += h;
                    minus[k] -= h;
                    let fd = (cost(i, &plus, &s_i) - cost(i, &minus, &s_i)) / (2.0 * h);
                    if (fd - grad_own[k]).abs() > rel_tol * grad_own[k].abs().max(1.0) {
                        return Err(Error::InvalidParameter {
                            what: "cost gradient",
                            detail: format!(
                                "player {i} own-gradient component {k}: finite difference {fd} vs supplied {}",
                                grad_own[k]
                            ),
                        });
                    }
                    let mut plus = s_i.clone();
                    let mut minus = s_i.clone();
                    plus[k] += h;
                    minus[k] -= h;
                    let fd = (cost(i, &x_i, &plus) - cost(i, &x_i, &minus)) / (2.0 * h);
                    if (fd - grad_agg[k]).abs() > rel_tol * grad_agg[k].abs().max(1.0) {
                        return Err(Error::InvalidParameter {
                            what: "cost gradient",
                            detail: format!(
                                "player {i} aggregate-gradient component {k}: finite difference {fd} vs supplied {}",
                                grad_agg[k]
                            ),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Cross-checks `phi_jac` against a central finite-difference Jacobian of
    /// `phi` at the given strategy points.
    pub fn check_phi_jacobian(&self, points: &[DVector<f64>], rel_tol: f64) -> Result<()> {
        let n = self.action_dim;
        let h = 1e-6;
        for x in points {
            self.check_len("phi jacobian check", x.as_slice())?;
            for i in 0..self.n_players {
                let x_i = self.block(x.as_slice(), i).to_vec();
                // supplied matrix is the transposed Jacobian
                let jac_t = (self.phi_jac)(i, &x_i);
                for k in 0..n {
                    let mut plus = x_i.clone();
                    let mut minus = x_i.clone();
                    plus[k] += h;
                    minus[k] -= h;
                    let col = ((self.phi)(i, &plus) - (self.phi)(i, &minus)) / (2.0 * h);
                    for r in 0..n {
                        let supplied = jac_t[(k, r)];
                        if (col[r] - supplied).abs() > rel_tol * supplied.abs().max(1.0) {
                            return Err(Error::InvalidParameter {
                                what: "phi jacobian",
                                detail: format!(
                                    "player {i} entry ({r}, {k}): finite difference {} vs supplied {supplied}",
                                    col[r]
                                ),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Regularity constants of a game, certified empirically over a sampling box:
/// `mu` strong monotonicity of the pseudo-gradient, `theta` its Lipschitz
/// modulus, `theta_hat` the Lipschitz modulus of the extended pseudo-gradient
/// in its second argument, `ell` the bound on the stacked phi Jacobian.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GameConstants {
    pub mu: f64,
    pub theta: f64,
    pub theta_hat: f64,
    pub ell: f64,
}

impl GameConstants {
    pub fn new(mu: f64, theta: f64, theta_hat: f64, ell: f64) -> Result<Self> {
        for (name, v) in [
            ("mu", mu),
            ("theta", theta),
            ("theta_hat", theta_hat),
            ("ell", ell),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    what: "game constant",
                    detail: format!("{name} must be positive and finite, got {v}"),
                });
            }
        }
        if mu > theta {
            return Err(Error::InvalidParameter {
                what: "game constant",
                detail: format!("mu = {mu} exceeds theta = {theta}"),
            });
        }
        Ok(Self {
            mu,
            theta,
            theta_hat,
            ell,
        })
    }
}

/// Axis-aligned sampling box in strategy space.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBox {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl SampleBox {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                context: "sample box",
                expected: lower.len(),
                actual: upper.len(),
            });
        }
        if lower.iter().zip(upper.iter()).any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::InvalidParameter {
                what: "sample box",
                detail: "every lower bound must be strictly below its upper bound".into(),
            });
        }
        Ok(Self { lower, upper })
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(
            DVector::from_element(dim, lo),
            DVector::from_element(dim, hi),
        )
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.lower
                .iter()
                .zip(self.upper.iter())
                .map(|(&lo, &hi)| rng.random_range(lo..hi)),
        )
    }
}

/// Certifies the regularity constants by randomized sampling over `sample_box`:
/// an empirical lower bound for `mu` and upper bounds for `theta`, `theta_hat`
/// and `ell`. Deterministic for a fixed seed. Fails when the sampled
/// monotonicity bound is not strictly positive.
pub fn estimate_constants(
    game: &GameSpec,
    sample_box: &SampleBox,
    n_samples: usize,
    seed: u64,
) -> Result<GameConstants> {
    if sample_box.dim() != game.strategy_dim() {
        return Err(Error::DimensionMismatch {
            context: "constants box",
            expected: game.strategy_dim(),
            actual: sample_box.dim(),
        });
    }
    if n_samples < 2 {
        return Err(Error::InvalidParameter {
            what: "sample count",
            detail: format!("need at least 2, got {n_samples}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mu = f64::INFINITY;
    let mut theta = 0.0f64;
    let mut theta_hat = 0.0f64;
    let mut ell = 0.0f64;
    for _ in 0..n_samples {
        let x = sample_box.sample(&mut rng);
        let x2 = sample_box.sample(&mut rng);
        let diff = &x - &x2;
        let dist2 = diff.norm_squared();
        if dist2 > 1e-24 {
            let fdiff = game.pseudo_gradient(x.as_slice())? - game.pseudo_gradient(x2.as_slice())?;
            mu = mu.min(diff.dot(&fdiff) / dist2);
            theta = theta.max(fdiff.norm() / dist2.sqrt());
        }

        let s = sample_box.sample(&mut rng);
        let s2 = sample_box.sample(&mut rng);
        let sdist = (&s - &s2).norm();
        if sdist > 1e-12 {
            let gdiff = game.extended_pseudo_gradient(x.as_slice(), s.as_slice())?
                - game.extended_pseudo_gradient(x.as_slice(), s2.as_slice())?;
            theta_hat = theta_hat.max(gdiff.norm() / sdist);
        }

        for i in 0..game.n_players() {
            let jac = game.phi_jacobian_block(i, &x.as_slice()[i * game.action_dim()..(i + 1) * game.action_dim()]);
            let spectral = jac.svd(false, false).singular_values[0];
            ell = ell.max(spectral);
        }
    }
    if !(mu > 0.0) {
        return Err(Error::AssumptionViolation {
            name: "strong monotonicity",
            detail: format!("sampled monotonicity bound {mu:.6e} is not strictly positive"),
        });
    }
    GameConstants::new(mu, theta, theta_hat, ell)
}

/// Centralized equilibrium oracle: the contraction iteration
/// `x <- x - (mu / theta^2) F(x)` from the origin, stopped when the residual
/// `||F(x)||` drops below `tol`. Serves as ground truth for all convergence
/// tests; under strong monotonicity and Lipschitz continuity the step is a
/// contraction with factor `sqrt(1 - mu^2 / theta^2)`.
pub fn solve_ne(
    game: &GameSpec,
    constants: &GameConstants,
    tol: f64,
    max_iters: usize,
) -> Result<DVector<f64>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter {
            what: "tolerance",
            detail: format!("must be positive, got {tol}"),
        });
    }
    let eta = constants.mu / (constants.theta * constants.theta);
    let mut x = DVector::zeros(game.strategy_dim());
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        let f = game.pseudo_gradient(x.as_slice())?;
        residual = f.norm();
        if residual <= tol {
            return Ok(x);
        }
        x -= eta * f;
    }
    Err(Error::OracleFailure {
        iterations: max_iters,
        residual,
        tol,
    })
}

/// Linear-quadratic aggregative game: player i minimizes
/// `0.5 ||x_i - c_i||^2 + d * x_i' sigma` against the aggregate
/// `sigma = (1/N) sum_j A_j x_j` (identity weights when `weights` is `None`).
/// Ships with closed-form gradients and the scalar cost.
#[derive(Debug, Clone)]
pub struct LqGame {
    pub n_players: usize,
    pub action_dim: usize,
    /// Stacked targets `col(c_1, ..., c_N)`.
    pub targets: Vec<f64>,
    pub coupling: f64,
    /// Per-player aggregate weights `A_i`; identity when absent.
    pub weights: Option<Vec<DMatrix<f64>>>,
}

impl LqGame {
    /// The two-player scalar example used throughout the tests:
    /// `c = (1, 2)`, coupling 0.1, identity contributions.
    pub fn two_player_example() -> Self {
        Self {
            n_players: 2,
            action_dim: 1,
            targets: vec![1.0, 2.0],
            coupling: 0.1,
            weights: None,
        }
    }

    pub fn build(&self) -> Result<GameSpec> {
        let n_players = self.n_players;
        let n = self.action_dim;
        if self.targets.len() != n_players * n {
            return Err(Error::DimensionMismatch {
                context: "lq targets",
                expected: n_players * n,
                actual: self.targets.len(),
            });
        }
        if let Some(w) = &self.weights {
            if w.len() != n_players {
                return Err(Error::DimensionMismatch {
                    context: "lq weights",
                    expected: n_players,
                    actual: w.len(),
                });
            }
            if w.iter().any(|m| m.nrows() != n || m.ncols() != n) {
                return Err(Error::InvalidParameter {
                    what: "lq weights",
                    detail: format!("every weight matrix must be {n}x{n}"),
                });
            }
        }
        let targets: Vec<DVector<f64>> = (0..n_players)
            .map(|i| DVector::from_column_slice(&self.targets[i * n..(i + 1) * n]))
            .collect();
        let d = self.coupling;

        let grad_targets = targets.clone();
        let cost_grad = Box::new(move |i: usize, x_i: &[f64], s_i: &[f64]| {
            let x_i = DVector::from_column_slice(x_i);
            let s_i = DVector::from_column_slice(s_i);
            let own = &x_i - &grad_targets[i] + d * s_i;
            let agg = d * x_i;
            (own, agg)
        });

        let phi_weights = self.weights.clone();
        let phi = Box::new(move |i: usize, x_i: &[f64]| {
            let x_i = DVector::from_column_slice(x_i);
            match &phi_weights {
                Some(w) => &w[i] * x_i,
                None => x_i,
            }
        });

        let jac_weights = self.weights.clone();
        let phi_jac = Box::new(move |i: usize, _x_i: &[f64]| match &jac_weights {
            Some(w) => w[i].transpose(),
            None => DMatrix::identity(n, n),
        });

        let cost_targets = targets;
        let cost = Box::new(move |i: usize, x_i: &[f64], s_i: &[f64]| {
            let x_i = DVector::from_column_slice(x_i);
            let s_i = DVector::from_column_slice(s_i);
            0.5 * (&x_i - &cost_targets[i]).norm_squared() + d * x_i.dot(&s_i)
        });

        Ok(GameSpec::new(n_players, n, cost_grad, phi, phi_jac)?.with_cost(cost))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn gq() -> GameSpec {
        LqGame::two_player_example().build().unwrap()
    }

    #[test]
    fn aggregate_identity_contributions() {
        let g = gq();
        let sigma = g.aggregate(&[1.0, 3.0]).unwrap();
        assert_eq!(sigma.as_slice(), &[2.0]);
    }

    #[test]
    fn aggregate_zero_map() {
        let g = GameSpec::new(
            3,
            1,
            Box::new(|_, _, _| (DVector::zeros(1), DVector::zeros(1))),
            Box::new(|_, _| DVector::zeros(1)),
            Box::new(|_, _| DMatrix::zeros(1, 1)),
        )
        .unwrap();
        let sigma = g.aggregate(&[4.0, -7.0, 0.3]).unwrap();
        assert_eq!(sigma.as_slice(), &[0.0]);
    }

    #[test]
    fn aggregate_weighted_contributions() {
        // phi_1(x) = 2x, phi_2(x) = x
        let game = LqGame {
            n_players: 2,
            action_dim: 1,
            targets: vec![1.0, 2.0],
            coupling: 0.1,
            weights: Some(vec![
                DMatrix::from_element(1, 1, 2.0),
                DMatrix::identity(1, 1),
            ]),
        }
        .build()
        .unwrap();
        let sigma = game.aggregate(&[1.0, 3.0]).unwrap();
        assert_relative_eq!(sigma[0], 2.5, max_relative = 1e-15);
    }

    #[test]
    fn pseudo_gradient_examples() {
        let g = gq();
        let f = g.pseudo_gradient(&[0.0, 0.0]).unwrap();
        assert_relative_eq!(f[0], -1.0, epsilon = 1e-14);
        assert_relative_eq!(f[1], -2.0, epsilon = 1e-14);

        let f = g.pseudo_gradient(&[1.0, 1.0]).unwrap();
        assert_relative_eq!(f[0], 0.15, epsilon = 1e-14);
        assert_relative_eq!(f[1], -0.85, epsilon = 1e-14);

        let decoupled = LqGame {
            coupling: 0.0,
            ..LqGame::two_player_example()
        }
        .build()
        .unwrap();
        let f = decoupled.pseudo_gradient(&[1.0, 2.0]).unwrap();
        assert_eq!(f.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn extended_pseudo_gradient_examples() {
        let g = gq();
        let f = g.extended_pseudo_gradient(&[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_relative_eq!(f[0], -1.0, epsilon = 1e-14);
        assert_relative_eq!(f[1], -2.0, epsilon = 1e-14);

        // J_1 = 1.05*1 - 1 + 0.1*2 = 0.25, J_2 = 1.05*1 - 2 + 0 = -0.95
        let f = g.extended_pseudo_gradient(&[1.0, 1.0], &[2.0, 0.0]).unwrap();
        assert_relative_eq!(f[0], 0.25, epsilon = 1e-14);
        assert_relative_eq!(f[1], -0.95, epsilon = 1e-14);
    }

    #[test]
    fn extended_equals_pseudo_gradient_on_consensus_aggregate() {
        use rand::Rng;
        let g = gq();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            let sigma = g.aggregate(&x).unwrap();
            let s = [sigma[0], sigma[0]];
            let lhs = g.extended_pseudo_gradient(&x, &s).unwrap();
            let rhs = g.pseudo_gradient(&x).unwrap();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let g = gq();
        assert!(matches!(
            g.aggregate(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            g.extended_pseudo_gradient(&[1.0, 2.0], &[0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn estimated_constants_match_quadratic_spectrum() {
        // closed form: symmetric part of [[1.1, 0.05], [0.05, 1.1]] has
        // eigenvalues 1.05 and 1.15
        let g = gq();
        let sample_box = SampleBox::cube(2, -5.0, 5.0).unwrap();
        let consts = estimate_constants(&g, &sample_box, 10_000, 0).unwrap();
        assert!(consts.mu >= 1.049 && consts.mu <= 1.051, "mu = {}", consts.mu);
        assert!(
            consts.theta >= 1.149 && consts.theta <= 1.151,
            "theta = {}",
            consts.theta
        );
        assert_relative_eq!(consts.theta_hat, 0.1, max_relative = 1e-12);
        assert_relative_eq!(consts.ell, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn estimated_constants_deterministic_for_seed() {
        let g = gq();
        let sample_box = SampleBox::cube(2, -5.0, 5.0).unwrap();
        let a = estimate_constants(&g, &sample_box, 500, 9).unwrap();
        let b = estimate_constants(&g, &sample_box, 500, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn monotonicity_certificate_holds_on_fresh_samples() {
        use rand::Rng;
        let g = gq();
        let sample_box = SampleBox::cube(2, -5.0, 5.0).unwrap();
        let consts = estimate_constants(&g, &sample_box, 10_000, 0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12345);
        for _ in 0..10_000 {
            let x = DVector::from_fn(2, |_, _| rng.random_range(-5.0..5.0));
            let x2 = DVector::from_fn(2, |_, _| rng.random_range(-5.0..5.0));
            let diff = &x - &x2;
            if diff.norm_squared() < 1e-20 {
                continue;
            }
            let fdiff =
                g.pseudo_gradient(x.as_slice()).unwrap() - g.pseudo_gradient(x2.as_slice()).unwrap();
            assert!(diff.dot(&fdiff) >= 0.99 * consts.mu * diff.norm_squared());
        }
    }

    #[test]
    fn non_monotone_game_is_rejected() {
        let g = GameSpec::new(
            2,
            1,
            Box::new(|_, x_i, _| (DVector::from_element(1, -x_i[0]), DVector::zeros(1))),
            Box::new(|_, x_i| DVector::from_column_slice(x_i)),
            Box::new(|_, _| DMatrix::identity(1, 1)),
        )
        .unwrap();
        let sample_box = SampleBox::cube(2, -1.0, 1.0).unwrap();
        let err = estimate_constants(&g, &sample_box, 100, 0).unwrap_err();
        match err {
            Error::AssumptionViolation { name, .. } => assert_eq!(name, "strong monotonicity"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn solve_ne_two_player() {
        let g = gq();
        let consts = GameConstants::new(1.05, 1.15, 0.1, 1.0).unwrap();
        let x = solve_ne(&g, &consts, 1e-12, 10_000).unwrap();
        // exact solve of [[1.1, 0.05], [0.05, 1.1]] x = (1, 2)
        assert_relative_eq!(x[0], 1.0 / 1.2075, epsilon = 1e-10);
        assert_relative_eq!(x[1], 2.15 / 1.2075, epsilon = 1e-10);
        assert!(g.pseudo_gradient(x.as_slice()).unwrap().norm() <= 1e-12);
    }

    #[test]
    fn solve_ne_decoupled() {
        let g = LqGame {
            coupling: 0.0,
            ..LqGame::two_player_example()
        }
        .build()
        .unwrap();
        let consts = GameConstants::new(1.0, 1.0, 1e-9, 1.0).unwrap();
        let x = solve_ne(&g, &consts, 1e-13, 10_000).unwrap();
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(x[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn solve_ne_five_players_matches_dense_solve() {
        let lq = LqGame {
            n_players: 5,
            action_dim: 1,
            targets: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            coupling: 0.1,
            weights: None,
        };
        let g = lq.build().unwrap();
        let sample_box = SampleBox::cube(5, -5.0, 5.0).unwrap();
        let consts = estimate_constants(&g, &sample_box, 10_000, 1).unwrap();
        let x = solve_ne(&g, &consts, 1e-12, 100_000).unwrap();

        // independent oracle: assemble the linear equilibrium system directly
        let n = 5;
        let d = 0.1;
        let mut m = DMatrix::identity(n, n) * (1.0 + d / n as f64);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += d / n as f64;
            }
        }
        let c = DVector::from_column_slice(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let direct = m.lu().solve(&c).unwrap();
        assert!((x - direct).norm() <= 1e-8);
    }

    #[test]
    fn solve_ne_reports_failure() {
        let g = gq();
        let consts = GameConstants::new(1.05, 1.15, 0.1, 1.0).unwrap();
        let err = solve_ne(&g, &consts, 1e-12, 3).unwrap_err();
        match err {
            Error::OracleFailure { residual, .. } => assert!(residual > 1e-12),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn lq_gradients_match_finite_differences() {
        let lq = LqGame {
            n_players: 3,
            action_dim: 2,
            targets: vec![1.0, -0.5, 2.0, 0.0, -1.0, 0.7],
            coupling: 0.2,
            weights: Some(vec![
                DMatrix::from_row_slice(2, 2, &[1.0, 0.3, -0.2, 0.8]),
                DMatrix::identity(2, 2),
                DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.1, 1.2]),
            ]),
        };
        let g = lq.build().unwrap();
        let points = vec![
            (
                DVector::from_column_slice(&[0.3, -1.0, 0.5, 2.0, -0.7, 0.1]),
                DVector::from_column_slice(&[1.0, 0.2, -0.4, 0.9, 0.0, -1.3]),
            ),
            (
                DVector::zeros(6),
                DVector::from_element(6, 0.5),
            ),
        ];
        g.check_gradients(&points, 1e-5).unwrap();
        let xs: Vec<DVector<f64>> = points.into_iter().map(|(x, _)| x).collect();
        g.check_phi_jacobian(&xs, 1e-6).unwrap();
    }

    #[test]
    fn constants_validation() {
        assert!(GameConstants::new(1.2, 1.0, 0.1, 1.0).is_err());
        assert!(GameConstants::new(0.0, 1.0, 0.1, 1.0).is_err());
        assert!(GameConstants::new(0.5, 1.0, 0.1, 1.0).is_ok());
    }
}
