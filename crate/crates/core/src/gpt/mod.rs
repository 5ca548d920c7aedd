//! The meta-network `u(x, t; μ) ≈ Σ c_i(μ) Ψ_i(x, t)` whose hidden neurons
//! are frozen full PINNs.

use std::sync::Arc;

use crate::collocation::{CollocationSet, KeptIndices};
use crate::filter::{stiff_keep_indices, FilterRef};
use crate::greedy::GreedyHistory;
use crate::mlp::Point;
use crate::pde::{ParameterPoint, PdeRef};
use crate::pinn::FullPinn;
use crate::{Error, Result};

mod basis;
mod online;

pub use basis::{precompute_basis, BasisBlock, PrecomputedBasis};
pub use online::{
    init_coeffs, online_optimizer, online_train, online_train_traced, optimizer_names, OnlineAdam,
    OnlineConfig, OnlineOptimizer, OnlineResult, PlainGd,
};

/// Sampled parameters, their networks, the shared snapshots and the greedy
/// record that produced them.
#[derive(Debug, Clone)]
pub struct GptModel {
    pde: PdeRef,
    neurons: Vec<FullPinn>,
    basis: PrecomputedBasis,
    base_colloc: Arc<CollocationSet>,
    filter: Option<FilterRef>,
    pub history: GreedyHistory,
}

impl GptModel {
    /// An empty model whose reduced sets are `base_colloc`, optionally thinned
    /// by a stiff-point filter as neurons are added.
    pub fn new(pde: PdeRef, base_colloc: Arc<CollocationSet>, filter: Option<FilterRef>) -> Self {
        Self {
            pde,
            neurons: Vec::new(),
            basis: PrecomputedBasis::new(base_colloc.clone()),
            base_colloc,
            filter,
            history: GreedyHistory::default(),
        }
    }

    /// Reassemble a model from stored parts without recomputation.
    pub fn from_parts(
        pde: PdeRef,
        neurons: Vec<FullPinn>,
        basis: PrecomputedBasis,
        base_colloc: Arc<CollocationSet>,
        filter: Option<FilterRef>,
        history: GreedyHistory,
    ) -> Result<Self> {
        if basis.len() != neurons.len() {
            return Err(Error::ShapeMismatch {
                expected: neurons.len(),
                actual: basis.len(),
            });
        }
        Ok(Self {
            pde,
            neurons,
            basis,
            base_colloc,
            filter,
            history,
        })
    }

    /// Append a neuron and refresh the snapshots.
    ///
    /// With a filter, the reduced interior set is recomputed from the base set
    /// against all bases and every block is rebuilt on it. Boundary and
    /// initial sets are kept whole: on those lines the curvature varies
    /// slowly and the union over bases can remove every point.
    pub fn add_neuron(&mut self, pinn: FullPinn) -> Result<()> {
        if self.neurons.iter().any(|n| n.mu.same_bits(&pinn.mu)) {
            return Err(Error::Config(format!(
                "parameter {} already sampled",
                pinn.mu
            )));
        }
        self.neurons.push(pinn);
        match &self.filter {
            None => {
                let block = precompute_basis(
                    &self.neurons.last().unwrap().params,
                    &self.basis.colloc,
                    self.pde.as_ref(),
                )?;
                self.basis.blocks.push(block);
            }
            Some(filter) => {
                let curvature: Vec<_> = self
                    .neurons
                    .iter()
                    .map(|n| PrecomputedBasis::curvature(&n.params, &self.base_colloc))
                    .collect();
                let mut keep = stiff_keep_indices(&curvature, &self.base_colloc, filter.as_ref())?;
                let all = KeptIndices::all(&self.base_colloc);
                keep.boundary = all.boundary;
                keep.initial = all.initial;
                let reduced = Arc::new(self.base_colloc.subset(&keep));
                let blocks = self
                    .neurons
                    .iter()
                    .map(|n| precompute_basis(&n.params, &reduced, self.pde.as_ref()))
                    .collect::<Result<Vec<_>>>()?;
                self.basis = PrecomputedBasis {
                    colloc: reduced,
                    blocks,
                };
            }
        }
        Ok(())
    }

    pub fn pde(&self) -> &PdeRef {
        &self.pde
    }

    pub fn neurons(&self) -> &[FullPinn] {
        &self.neurons
    }

    pub fn len(&self) -> usize {
        self.neurons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neurons.is_empty()
    }

    pub fn mus(&self) -> Vec<ParameterPoint> {
        self.neurons.iter().map(|n| n.mu.clone()).collect()
    }

    pub fn basis(&self) -> &PrecomputedBasis {
        &self.basis
    }

    pub fn reduced_colloc(&self) -> &Arc<CollocationSet> {
        &self.basis.colloc
    }

    pub fn base_colloc(&self) -> &Arc<CollocationSet> {
        &self.base_colloc
    }

    pub fn filter(&self) -> Option<&FilterRef> {
        self.filter.as_ref()
    }

    pub fn gpt_loss(&self, c: &[f64], mu: &ParameterPoint) -> Result<f64> {
        self.basis.loss(self.pde.as_ref(), c, mu.as_slice())
    }

    pub fn gpt_loss_grad(&self, c: &[f64], mu: &ParameterPoint) -> Result<(f64, Vec<f64>)> {
        self.basis.loss_grad(self.pde.as_ref(), c, mu.as_slice())
    }

    pub fn init_coeffs(&self, mu: &ParameterPoint) -> Vec<f64> {
        init_coeffs(mu, &self.mus())
    }

    /// `Σ_i c_i Ψ_i` at each point, evaluated through the networks.
    pub fn predict(&self, c: &[f64], points: &[Point]) -> Result<Vec<f64>> {
        if c.len() != self.neurons.len() {
            return Err(Error::CoeffLength {
                expected: self.neurons.len(),
                actual: c.len(),
            });
        }
        if points
            .iter()
            .any(|p| !p[0].is_finite() || !p[1].is_finite())
        {
            return Err(Error::NonFiniteInput);
        }
        let mut out = vec![0.0; points.len()];
        for (ci, n) in c.iter().zip(&self.neurons) {
            for (o, v) in out.iter_mut().zip(n.params.forward_many(points)) {
                *o += ci * v;
            }
        }
        Ok(out)
    }
}

/// Reduced loss of the meta-network at `mu`.
pub fn gpt_loss(c: &[f64], model: &GptModel, mu: &ParameterPoint) -> Result<f64> {
    model.gpt_loss(c, mu)
}

/// Gradient of [`gpt_loss`] in the coefficients.
pub fn gpt_grad(c: &[f64], model: &GptModel, mu: &ParameterPoint) -> Result<Vec<f64>> {
    model.gpt_loss_grad(c, mu).map(|(_, g)| g)
}

pub fn gpt_predict(c: &[f64], model: &GptModel, points: &[Point]) -> Result<Vec<f64>> {
    model.predict(c, points)
}

/// `Σ c_i Ψ_i` evaluated through the networks at every call.
pub struct Combination<'a> {
    pub model: &'a GptModel,
    pub c: &'a [f64],
}

impl crate::pinn::SolutionProvider for Combination<'_> {
    fn extended(&self, point: Point) -> crate::mlp::ExtendedState {
        let mut acc = crate::mlp::ExtendedState::default();
        for (ci, n) in self.c.iter().zip(&self.model.neurons) {
            let e = n.params.extended(point);
            acc.u += ci * e.u;
            acc.ux += ci * e.ux;
            acc.ut += ci * e.ut;
            acc.uxx += ci * e.uxx;
            acc.utt += ci * e.utt;
        }
        acc
    }
}
