//! Mean-squared residual losses over collocation points and their gradient
//! with respect to the network parameters.
//!
//! Each [`LossTerm`] contributes `(1/|C|) Σ_p w_p r_p²`, where `r_p` is a
//! function of the extended state at point `p`. The gradient is obtained by a
//! reverse sweep through the extended forward pass, seeded with
//! `2 w_p r_p / |C| · ∂r/∂(u, u_x, u_t, u_xx, u_tt)`.

use rayon::prelude::*;

use crate::mlp::{ExtendedState, Field, MlpParams, Point, Workspace};
use crate::{Error, Result};

/// Points per parallel work unit. Fixed so that the reduction order does not
/// depend on the thread count.
const CHUNK: usize = 64;

/// A pointwise residual reading a few fields of the extended state.
pub trait PointResidual: Sync {
    /// Fields the residual depends on.
    fn fields(&self) -> &[Field];

    /// Residual value and its partial derivatives with respect to each field
    /// (unused fields must have a zero partial).
    fn eval(&self, ext: &ExtendedState, point: Point) -> (f64, ExtendedState);

    fn value(&self, ext: &ExtendedState, point: Point) -> f64 {
        self.eval(ext, point).0
    }
}

/// One mean-normalized block of the loss.
#[derive(Clone, Copy)]
pub struct LossTerm<'a> {
    pub points: &'a [Point],
    pub residual: &'a dyn PointResidual,
    /// Optional per-point multipliers (self-adaptive weighting).
    pub weights: Option<&'a [f64]>,
}

impl<'a> LossTerm<'a> {
    pub fn new(points: &'a [Point], residual: &'a dyn PointResidual) -> Self {
        Self {
            points,
            residual,
            weights: None,
        }
    }

    pub fn weighted(mut self, weights: &'a [f64]) -> Self {
        self.weights = Some(weights);
        self
    }

    fn order(&self) -> Result<usize> {
        let mut order = 0;
        for f in self.residual.fields() {
            match f.order() {
                Some(o) => order = order.max(o),
                None => return Err(Error::UnsupportedDerivative(f.name().to_owned())),
            }
        }
        Ok(order)
    }

    fn check(&self) -> Result<usize> {
        if self.points.is_empty() {
            return Err(Error::EmptyCollocation);
        }
        if let Some(w) = self.weights {
            if w.len() != self.points.len() {
                return Err(Error::ShapeMismatch {
                    expected: self.points.len(),
                    actual: w.len(),
                });
            }
        }
        self.order()
    }
}

/// `(1/n) Σ w_p s_p` for squared residuals `s`.
pub fn weighted_mean(sq: &[f64], weights: Option<&[f64]>) -> f64 {
    let n = sq.len() as f64;
    let sum: f64 = match weights {
        Some(w) => sq.iter().zip(w).map(|(s, w)| w * s).sum(),
        None => sq.iter().sum(),
    };
    sum / n
}

/// Loss value, parameter gradient and the per-point squared residuals of each
/// term (in term order).
#[derive(Debug, Clone)]
pub struct LossEval {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub sq_residuals: Vec<Vec<f64>>,
}

/// Loss value only. Shares the residual path with [`loss_grad_params`].
pub fn loss_value(params: &MlpParams, terms: &[LossTerm<'_>]) -> Result<f64> {
    let mut loss = 0.0;
    for term in terms {
        let order = term.check()?;
        let sq: Vec<f64> = term
            .points
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut ws = Workspace::new(params);
                chunk
                    .iter()
                    .map(|&p| {
                        ws.forward(params, p, order);
                        let r = term.residual.value(&ws.output, p);
                        r * r
                    })
                    .collect::<Vec<_>>()
            })
            .flatten_iter()
            .collect();
        loss += weighted_mean(&sq, term.weights);
    }
    Ok(loss)
}

/// Loss and its gradient with respect to every weight and bias.
pub fn loss_grad_params(params: &MlpParams, terms: &[LossTerm<'_>]) -> Result<LossEval> {
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    let mut all_sq = Vec::with_capacity(terms.len());
    for term in terms {
        let order = term.check()?;
        let scale = 2.0 / term.points.len() as f64;
        let parts: Vec<(Vec<f64>, Vec<f64>)> = term
            .points
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(ci, chunk)| {
                let mut ws = Workspace::new(params);
                let mut g = vec![0.0; params.len()];
                let mut sq = Vec::with_capacity(chunk.len());
                for (j, &p) in chunk.iter().enumerate() {
                    ws.forward(params, p, order);
                    let (r, partial) = term.residual.eval(&ws.output, p);
                    sq.push(r * r);
                    let w = term.weights.map_or(1.0, |w| w[ci * CHUNK + j]);
                    let c = scale * w * r;
                    let seed = ExtendedState {
                        u: c * partial.u,
                        ux: c * partial.ux,
                        ut: c * partial.ut,
                        uxx: c * partial.uxx,
                        utt: c * partial.utt,
                    };
                    ws.backward(params, &seed, &mut g);
                }
                (g, sq)
            })
            .collect();
        let mut sq_all = Vec::with_capacity(term.points.len());
        for (g, sq) in parts {
            for (acc, v) in grad.iter_mut().zip(&g) {
                *acc += v;
            }
            sq_all.extend(sq);
        }
        loss += weighted_mean(&sq_all, term.weights);
        all_sq.push(sq_all);
    }
    Ok(LossEval {
        loss,
        grad,
        sq_residuals: all_sq,
    })
}
