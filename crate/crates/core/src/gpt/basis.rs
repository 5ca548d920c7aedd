//! Snapshots of the frozen basis networks on the reduced collocation sets and
//! the reduced loss built from them.
//!
//! A candidate `u = Σ c_i Ψ_i` is never evaluated through the networks during
//! online training: every quantity the residual needs is a linear combination
//! of stored columns, so one epoch costs `O(n · |C^r|)` regardless of the
//! size of the basis networks.

use std::sync::Arc;

use crate::collocation::CollocationSet;
use crate::mlp::{ExtendedState, Field, MlpParams};
use crate::pde::{PdeFamily, TimeOrder};
use crate::{Error, Result};

pub(crate) const SLOTS: [Field; 5] = [Field::U, Field::Ux, Field::Ut, Field::Uxx, Field::Utt];

fn slot(field: Field) -> Result<usize> {
    SLOTS
        .iter()
        .position(|&f| f == field)
        .ok_or_else(|| Error::UnsupportedDerivative(field.name().to_owned()))
}

fn put(e: &mut ExtendedState, s: usize, v: f64) {
    match s {
        0 => e.u = v,
        1 => e.ux = v,
        2 => e.ut = v,
        3 => e.uxx = v,
        _ => e.utt = v,
    }
}

fn take(e: &ExtendedState, s: usize) -> f64 {
    match s {
        0 => e.u,
        1 => e.ux,
        2 => e.ut,
        3 => e.uxx,
        _ => e.utt,
    }
}

/// Stored columns of one basis network.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisBlock {
    /// Interior columns indexed like `(u, u_x, u_t, u_xx, u_tt)`; only the
    /// fields the family's residual reads are present.
    pub interior: [Option<Vec<f64>>; 5],
    pub boundary: Vec<f64>,
    pub initial: Vec<f64>,
    /// `u_t` on the initial points, for second order in time.
    pub initial_velocity: Option<Vec<f64>>,
}

impl BasisBlock {
    pub fn column(&self, field: Field) -> Option<&[f64]> {
        slot(field).ok().and_then(|s| self.interior[s].as_deref())
    }
}

/// Evaluate one basis network on a reduced collocation set.
pub fn precompute_basis(
    params: &MlpParams,
    colloc_r: &CollocationSet,
    pde: &dyn PdeFamily,
) -> Result<BasisBlock> {
    if colloc_r.interior.is_empty() || colloc_r.boundary.is_empty() || colloc_r.initial.is_empty() {
        return Err(Error::EmptyCollocation);
    }
    let mut interior: [Option<Vec<f64>>; 5] = Default::default();
    let ext = params.extended_many(&colloc_r.interior);
    for &f in pde.interior_fields() {
        let s = slot(f)?;
        interior[s] = Some(ext.iter().map(|e| take(e, s)).collect());
    }
    let boundary = params
        .extended_many(&colloc_r.boundary)
        .iter()
        .map(|e| e.u)
        .collect();
    let ext0 = params.extended_many(&colloc_r.initial);
    let initial = ext0.iter().map(|e| e.u).collect();
    let initial_velocity =
        (pde.time_order() == TimeOrder::Second).then(|| ext0.iter().map(|e| e.ut).collect());
    Ok(BasisBlock {
        interior,
        boundary,
        initial,
        initial_velocity,
    })
}

/// All basis blocks on one shared reduced collocation set.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecomputedBasis {
    pub colloc: Arc<CollocationSet>,
    pub blocks: Vec<BasisBlock>,
}

/// `acc = Σ_i c_i col_i`, accumulated from zero in basis order.
fn combine<'a>(acc: &mut Vec<f64>, c: &[f64], cols: impl Iterator<Item = &'a [f64]>, len: usize) {
    acc.clear();
    acc.resize(len, 0.0);
    for (ci, col) in c.iter().zip(cols) {
        for (a, v) in acc.iter_mut().zip(col) {
            *a += ci * v;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl PrecomputedBasis {
    pub fn new(colloc: Arc<CollocationSet>) -> Self {
        Self {
            colloc,
            blocks: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    fn check(&self, c: &[f64], pde: &dyn PdeFamily, mu: &[f64]) -> Result<()> {
        if c.len() != self.blocks.len() {
            return Err(Error::CoeffLength {
                expected: self.blocks.len(),
                actual: c.len(),
            });
        }
        if mu.len() != pde.param_names().len() {
            return Err(Error::ShapeMismatch {
                expected: pde.param_names().len(),
                actual: mu.len(),
            });
        }
        Ok(())
    }

    /// Reduced loss and, if `grad` is given, its gradient in `c`.
    fn evaluate(
        &self,
        pde: &dyn PdeFamily,
        c: &[f64],
        mu: &[f64],
        mut grad: Option<&mut [f64]>,
    ) -> Result<f64> {
        self.check(c, pde, mu)?;
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        let colloc = &*self.colloc;
        let mut loss = 0.0;

        // interior
        let n_int = colloc.interior.len();
        let slots: Vec<usize> = pde
            .interior_fields()
            .iter()
            .map(|&f| slot(f))
            .collect::<Result<_>>()?;
        let mut combined: Vec<Vec<f64>> = Vec::with_capacity(slots.len());
        for &s in &slots {
            let mut acc = Vec::new();
            let cols = self
                .blocks
                .iter()
                .map(|b| b.interior[s].as_deref().unwrap_or(&[]));
            combine(&mut acc, c, cols, n_int);
            combined.push(acc);
        }
        let scale = 2.0 / n_int as f64;
        let mut sens: Vec<Vec<f64>> =
            vec![vec![0.0; n_int]; if grad.is_some() { slots.len() } else { 0 }];
        let mut sum = 0.0;
        for (p, pt) in colloc.interior.iter().enumerate() {
            let mut e = ExtendedState::default();
            for (k, &s) in slots.iter().enumerate() {
                put(&mut e, s, combined[k][p]);
            }
            if grad.is_some() {
                let (r, d) = pde.residual_partials(&e, pt[0], pt[1], mu);
                sum += r * r;
                for (k, &s) in slots.iter().enumerate() {
                    sens[k][p] = scale * r * take(&d, s);
                }
            } else {
                let r = pde.residual(&e, pt[0], pt[1], mu);
                sum += r * r;
            }
        }
        loss += sum / n_int as f64;
        if let Some(g) = grad.as_deref_mut() {
            for (i, b) in self.blocks.iter().enumerate() {
                for (k, &s) in slots.iter().enumerate() {
                    if let Some(col) = &b.interior[s] {
                        g[i] += dot(&sens[k], col);
                    }
                }
            }
        }

        // boundary, initial and initial velocity data terms
        let mut data_term = |points: &[crate::mlp::Point],
                             cols: &[&[f64]],
                             target: &dyn Fn(f64, f64) -> f64,
                             grad: Option<&mut [f64]>| {
            let n = points.len();
            let mut acc = Vec::new();
            combine(&mut acc, c, cols.iter().copied(), n);
            let mut sum = 0.0;
            for (a, pt) in acc.iter_mut().zip(points) {
                let r = *a - target(pt[0], pt[1]);
                sum += r * r;
                *a = 2.0 * r / n as f64;
            }
            if let Some(g) = grad {
                for (i, gi) in g.iter_mut().enumerate() {
                    *gi += dot(&acc, cols[i]);
                }
            }
            loss += sum / n as f64;
        };
        data_term(
            &colloc.boundary,
            &self
                .blocks
                .iter()
                .map(|b| b.boundary.as_slice())
                .collect::<Vec<_>>(),
            &|x, t| pde.boundary_value(x, t),
            grad.as_deref_mut(),
        );
        data_term(
            &colloc.initial,
            &self
                .blocks
                .iter()
                .map(|b| b.initial.as_slice())
                .collect::<Vec<_>>(),
            &|x, _| pde.initial_value(x),
            grad.as_deref_mut(),
        );
        if pde.time_order() == TimeOrder::Second {
            data_term(
                &colloc.initial,
                &self
                    .blocks
                    .iter()
                    .map(|b| b.initial_velocity.as_deref().unwrap_or(&[]))
                    .collect::<Vec<_>>(),
                &|x, _| pde.initial_velocity(x).unwrap_or(0.0),
                grad,
            );
        }
        Ok(loss)
    }

    /// The reduced loss at coefficients `c`.
    pub fn loss(&self, pde: &dyn PdeFamily, c: &[f64], mu: &[f64]) -> Result<f64> {
        self.evaluate(pde, c, mu, None)
    }

    /// The reduced loss and its gradient in `c`.
    pub fn loss_grad(&self, pde: &dyn PdeFamily, c: &[f64], mu: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut g = vec![0.0; c.len()];
        let l = self.evaluate(pde, c, mu, Some(&mut g))?;
        Ok((l, g))
    }

    /// `|Ψ_xx|` of a network on every point of `colloc`.
    pub(crate) fn curvature(
        params: &MlpParams,
        colloc: &CollocationSet,
    ) -> crate::filter::BasisCurvature {
        let abs_xx = |pts: &[crate::mlp::Point]| -> Vec<f64> {
            params
                .extended_many(pts)
                .iter()
                .map(|e| e.uxx.abs())
                .collect()
        };
        crate::filter::BasisCurvature {
            interior: abs_xx(&colloc.interior),
            boundary: abs_xx(&colloc.boundary),
            initial: abs_xx(&colloc.initial),
        }
    }
}
