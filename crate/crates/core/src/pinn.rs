//! Full physics-informed networks at a single parameter value.
//!
//! The loss is the sum of the mean squared interior residual, boundary
//! deviation, initial deviation and (for second order in time) initial
//! velocity deviation. Training is full-batch Adam; the self-adaptive variant
//! additionally keeps one trainable weight `1 + s²` per interior and initial
//! point and moves `s` uphill on the same loss.

use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adam::AdamState;
use crate::collocation::CollocationSet;
use crate::loss::{loss_grad_params, loss_value, weighted_mean, LossTerm, PointResidual};
use crate::mlp::{Activation, ExtendedState, Field, MlpParams, Point};
use crate::pde::{ParameterPoint, PdeFamily, TimeOrder};
use crate::{Error, Result};

/// Anything that can report value and derivatives of a candidate solution.
pub trait SolutionProvider: Sync {
    fn extended(&self, point: Point) -> ExtendedState;
}

impl SolutionProvider for MlpParams {
    fn extended(&self, point: Point) -> ExtendedState {
        MlpParams::extended(self, point)
    }
}

/// A closed-form solution given as a function of the point.
pub struct Analytic<F>(pub F);

impl<F> SolutionProvider for Analytic<F>
where
    F: Fn(Point) -> ExtendedState + Sync,
{
    fn extended(&self, point: Point) -> ExtendedState {
        (self.0)(point)
    }
}

pub struct InteriorResidual<'a> {
    pub pde: &'a dyn PdeFamily,
    pub mu: &'a [f64],
}

impl PointResidual for InteriorResidual<'_> {
    fn fields(&self) -> &[Field] {
        self.pde.interior_fields()
    }

    fn eval(&self, ext: &ExtendedState, p: Point) -> (f64, ExtendedState) {
        self.pde.residual_partials(ext, p[0], p[1], self.mu)
    }

    fn value(&self, ext: &ExtendedState, p: Point) -> f64 {
        self.pde.residual(ext, p[0], p[1], self.mu)
    }
}

pub struct BoundaryResidual<'a>(pub &'a dyn PdeFamily);

impl PointResidual for BoundaryResidual<'_> {
    fn fields(&self) -> &[Field] {
        &[Field::U]
    }

    fn eval(&self, ext: &ExtendedState, p: Point) -> (f64, ExtendedState) {
        let d = ExtendedState {
            u: 1.0,
            ..Default::default()
        };
        (self.value(ext, p), d)
    }

    fn value(&self, ext: &ExtendedState, p: Point) -> f64 {
        ext.u - self.0.boundary_value(p[0], p[1])
    }
}

pub struct InitialResidual<'a>(pub &'a dyn PdeFamily);

impl PointResidual for InitialResidual<'_> {
    fn fields(&self) -> &[Field] {
        &[Field::U]
    }

    fn eval(&self, ext: &ExtendedState, p: Point) -> (f64, ExtendedState) {
        let d = ExtendedState {
            u: 1.0,
            ..Default::default()
        };
        (self.value(ext, p), d)
    }

    fn value(&self, ext: &ExtendedState, p: Point) -> f64 {
        ext.u - self.0.initial_value(p[0])
    }
}

pub struct VelocityResidual<'a>(pub &'a dyn PdeFamily);

impl PointResidual for VelocityResidual<'_> {
    fn fields(&self) -> &[Field] {
        &[Field::Ut]
    }

    fn eval(&self, ext: &ExtendedState, p: Point) -> (f64, ExtendedState) {
        let d = ExtendedState {
            ut: 1.0,
            ..Default::default()
        };
        (self.value(ext, p), d)
    }

    fn value(&self, ext: &ExtendedState, p: Point) -> f64 {
        ext.ut - self.0.initial_velocity(p[0]).unwrap_or(0.0)
    }
}

/// The residual blocks of one PDE at one parameter value.
pub struct PinnResiduals<'a> {
    pub interior: InteriorResidual<'a>,
    pub boundary: BoundaryResidual<'a>,
    pub initial: InitialResidual<'a>,
    pub velocity: Option<VelocityResidual<'a>>,
}

impl<'a> PinnResiduals<'a> {
    pub fn new(pde: &'a dyn PdeFamily, mu: &'a [f64]) -> Self {
        Self {
            interior: InteriorResidual { pde, mu },
            boundary: BoundaryResidual(pde),
            initial: InitialResidual(pde),
            velocity: (pde.time_order() == TimeOrder::Second).then_some(VelocityResidual(pde)),
        }
    }

    /// Loss terms in the fixed order interior, boundary, initial, velocity.
    pub fn terms<'b>(&'b self, colloc: &'b CollocationSet) -> Vec<LossTerm<'b>> {
        let mut terms = vec![
            LossTerm::new(&colloc.interior, &self.interior),
            LossTerm::new(&colloc.boundary, &self.boundary),
            LossTerm::new(&colloc.initial, &self.initial),
        ];
        if let Some(v) = &self.velocity {
            terms.push(LossTerm::new(&colloc.initial, v));
        }
        terms
    }
}

fn check_mu(pde: &dyn PdeFamily, mu: &ParameterPoint) -> Result<()> {
    if mu.dim() != pde.param_names().len() {
        return Err(Error::ShapeMismatch {
            expected: pde.param_names().len(),
            actual: mu.dim(),
        });
    }
    Ok(())
}

fn sq_block(
    provider: &dyn SolutionProvider,
    points: &[Point],
    residual: &dyn PointResidual,
) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyCollocation);
    }
    let sq: Vec<f64> = points
        .iter()
        .map(|&p| {
            let r = residual.value(&provider.extended(p), p);
            r * r
        })
        .collect();
    Ok(weighted_mean(&sq, None))
}

/// Collocation approximation of the PINN loss for any solution provider.
pub fn pinn_loss(
    provider: &dyn SolutionProvider,
    pde: &dyn PdeFamily,
    mu: &ParameterPoint,
    colloc: &CollocationSet,
) -> Result<f64> {
    check_mu(pde, mu)?;
    let res = PinnResiduals::new(pde, mu.as_slice());
    let mut loss = 0.0;
    loss += sq_block(provider, &colloc.interior, &res.interior)?;
    loss += sq_block(provider, &colloc.boundary, &res.boundary)?;
    loss += sq_block(provider, &colloc.initial, &res.initial)?;
    if let Some(v) = &res.velocity {
        loss += sq_block(provider, &colloc.initial, v)?;
    }
    Ok(loss)
}

/// Step decay of the learning rate: multiply by `factor` from epoch `after`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrDecay {
    pub after: usize,
    pub factor: f64,
}

/// Hyperparameters of one full-PINN training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dims: Vec<usize>,
    pub activation: Activation,
    pub lr: f64,
    pub epochs: usize,
    pub stop_loss: Option<f64>,
    pub lr_decay: Option<LrDecay>,
    pub sa_enabled: bool,
    /// Adam rate for the ascent on the self-adaptive weights.
    pub sa_lr: f64,
    /// Initial raw value `s` of every self-adaptive weight `1 + s²`.
    pub sa_init: f64,
    /// Record the loss every this many epochs.
    pub history_every: usize,
}

impl TrainConfig {
    pub fn new(dims: Vec<usize>, activation: Activation, lr: f64, epochs: usize) -> Self {
        Self {
            dims,
            activation,
            lr,
            epochs,
            stop_loss: None,
            lr_decay: None,
            sa_enabled: false,
            sa_lr: 5e-3,
            sa_init: 1.0,
            history_every: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0) {
            return Err(Error::InvalidLearningRate(self.lr));
        }
        if self.sa_enabled && !(self.sa_lr >= 0.0) {
            return Err(Error::InvalidLearningRate(self.sa_lr));
        }
        if let Some(d) = self.lr_decay {
            if !(d.factor >= 0.0) {
                return Err(Error::Config("lr decay factor must be non-negative".into()));
            }
        }
        if self.history_every == 0 {
            return Err(Error::Config("history_every must be positive".into()));
        }
        crate::mlp::MlpParams::zeros(&self.dims, self.activation).map(|_| ())
    }

    fn lr_at(&self, epoch: usize) -> f64 {
        match self.lr_decay {
            Some(d) if epoch >= d.after => self.lr * d.factor,
            _ => self.lr,
        }
    }
}

/// A trained network at one parameter value.
#[derive(Debug, Clone)]
pub struct FullPinn {
    pub mu: ParameterPoint,
    pub params: MlpParams,
    pub colloc: Arc<CollocationSet>,
    /// Unweighted loss of `params` on `colloc`.
    pub terminal_loss: f64,
    pub epochs_run: usize,
    pub wall_time: f64,
    pub seed: u64,
    /// `(epoch, loss)` samples; the loss is the one the optimizer saw.
    pub loss_history: Vec<(usize, f64)>,
}

impl FullPinn {
    /// Loss of this network on another collocation set.
    pub fn loss_on(&self, pde: &dyn PdeFamily, colloc: &CollocationSet) -> Result<f64> {
        pinn_loss(&self.params, pde, &self.mu, colloc)
    }

    /// Equality of everything but the measured wall time.
    pub fn same_result(&self, other: &FullPinn) -> bool {
        self.mu.same_bits(&other.mu)
            && self.params == other.params
            && self.terminal_loss.to_bits() == other.terminal_loss.to_bits()
            && self.epochs_run == other.epochs_run
            && self.seed == other.seed
            && self.loss_history == other.loss_history
    }
}

struct SaState {
    raw_interior: Vec<f64>,
    raw_initial: Vec<f64>,
    opt_interior: AdamState,
    opt_initial: AdamState,
}

impl SaState {
    fn new(colloc: &CollocationSet, init: f64) -> Self {
        Self {
            raw_interior: vec![init; colloc.interior.len()],
            raw_initial: vec![init; colloc.initial.len()],
            opt_interior: AdamState::new(colloc.interior.len()),
            opt_initial: AdamState::new(colloc.initial.len()),
        }
    }

    fn weights(raw: &[f64]) -> Vec<f64> {
        raw.iter().map(|s| 1.0 + s * s).collect()
    }

    /// Gradient ascent on `s` for `(1/n) Σ (1 + s_p²) r_p²`.
    fn ascend(raw: &mut [f64], opt: &mut AdamState, sq: &[f64], lr: f64) -> Result<()> {
        let n = sq.len() as f64;
        // negated so the descent step of Adam climbs
        let g: Vec<f64> = raw
            .iter()
            .zip(sq)
            .map(|(s, r2)| -2.0 * s * r2 / n)
            .collect();
        opt.step(raw, &g, lr)
    }
}

fn train_loop(
    pde: &dyn PdeFamily,
    mu: &ParameterPoint,
    colloc: Arc<CollocationSet>,
    config: &TrainConfig,
    seed: u64,
    self_adaptive: bool,
) -> Result<FullPinn> {
    config.validate()?;
    check_mu(pde, mu)?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = MlpParams::glorot(&config.dims, config.activation, &mut rng)?;
    let mut adam = AdamState::new(params.len());
    let residuals = PinnResiduals::new(pde, mu.as_slice());
    let mut sa = self_adaptive.then(|| SaState::new(&colloc, config.sa_init));
    let mut history = Vec::new();
    let mut epochs_run = config.epochs;

    for epoch in 0..config.epochs {
        let eval = match &sa {
            None => loss_grad_params(&params, &residuals.terms(&colloc))?,
            Some(state) => {
                let w_int = SaState::weights(&state.raw_interior);
                let w_ini = SaState::weights(&state.raw_initial);
                let mut terms = residuals.terms(&colloc);
                terms[0] = terms[0].weighted(&w_int);
                terms[2] = terms[2].weighted(&w_ini);
                loss_grad_params(&params, &terms)?
            }
        };
        if !eval.loss.is_finite() || eval.grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::TrainingDiverged { epoch });
        }
        if epoch % config.history_every == 0 {
            history.push((epoch, eval.loss));
        }
        if let Some(threshold) = config.stop_loss {
            if eval.loss < threshold {
                epochs_run = epoch;
                break;
            }
        }
        adam.step(params.as_mut_slice(), &eval.grad, config.lr_at(epoch))?;
        if let Some(state) = &mut sa {
            SaState::ascend(
                &mut state.raw_interior,
                &mut state.opt_interior,
                &eval.sq_residuals[0],
                config.sa_lr,
            )?;
            SaState::ascend(
                &mut state.raw_initial,
                &mut state.opt_initial,
                &eval.sq_residuals[2],
                config.sa_lr,
            )?;
        }
    }

    let terminal_loss = loss_value(&params, &residuals.terms(&colloc))?;
    if !terminal_loss.is_finite() {
        return Err(Error::TrainingDiverged { epoch: epochs_run });
    }
    if history.last().map(|&(e, _)| e) != Some(epochs_run) && !sa.is_some() {
        history.push((epochs_run, terminal_loss));
    }
    Ok(FullPinn {
        mu: mu.clone(),
        params,
        colloc,
        terminal_loss,
        epochs_run,
        wall_time: start.elapsed().as_secs_f64(),
        seed,
        loss_history: history,
    })
}

/// Plain full-batch Adam training of a PINN at `mu`.
pub fn train_full_pinn(
    pde: &dyn PdeFamily,
    mu: &ParameterPoint,
    colloc: Arc<CollocationSet>,
    config: &TrainConfig,
    seed: u64,
) -> Result<FullPinn> {
    train_loop(pde, mu, colloc, config, seed, false)
}

/// Self-adaptive training; identical to [`train_full_pinn`] when
/// `config.sa_enabled` is false.
pub fn train_sa_pinn(
    pde: &dyn PdeFamily,
    mu: &ParameterPoint,
    colloc: Arc<CollocationSet>,
    config: &TrainConfig,
    seed: u64,
) -> Result<FullPinn> {
    train_loop(pde, mu, colloc, config, seed, config.sa_enabled)
}

/// Dispatch on `config.sa_enabled`.
pub fn train_pinn(
    pde: &dyn PdeFamily,
    mu: &ParameterPoint,
    colloc: Arc<CollocationSet>,
    config: &TrainConfig,
    seed: u64,
) -> Result<FullPinn> {
    if config.sa_enabled {
        train_sa_pinn(pde, mu, colloc, config, seed)
    } else {
        train_full_pinn(pde, mu, colloc, config, seed)
    }
}
