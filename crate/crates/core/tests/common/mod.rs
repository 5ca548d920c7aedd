#![allow(dead_code)]

pub mod oracles;

use std::sync::Arc;

use gpt_pinn::collocation::{sample_collocation, CollocationCounts, CollocationSet};
use gpt_pinn::gpt::GptModel;
use gpt_pinn::mlp::{Activation, MlpParams};
use gpt_pinn::pde::{lookup, ParameterPoint, PdeRef};
use gpt_pinn::pinn::{pinn_loss, FullPinn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn colloc_for(pde: &PdeRef, interior: usize, edge: usize, seed: u64) -> Arc<CollocationSet> {
    Arc::new(
        sample_collocation(
            pde.space_interval(),
            pde.default_horizon(),
            CollocationCounts {
                interior,
                boundary: edge,
                initial: edge,
            },
            "uniform-random",
            seed,
        )
        .unwrap(),
    )
}

pub fn random_mu(pde: &PdeRef, rng: &mut ChaCha8Rng) -> ParameterPoint {
    let d = pde.default_domain();
    ParameterPoint::new(
        d.bounds()
            .iter()
            .map(|b| rng.gen_range(b[0]..=b[1]))
            .collect(),
    )
}

/// An untrained network wrapped as a neuron.
pub fn fake_pinn(
    pde: &PdeRef,
    mu: ParameterPoint,
    colloc: &Arc<CollocationSet>,
    dims: &[usize],
    rng: &mut ChaCha8Rng,
) -> FullPinn {
    let params = MlpParams::glorot(dims, Activation::Tanh, rng).unwrap();
    let terminal_loss = pinn_loss(&params, pde.as_ref(), &mu, colloc).unwrap();
    FullPinn {
        mu,
        params,
        colloc: colloc.clone(),
        terminal_loss,
        epochs_run: 0,
        wall_time: 0.0,
        seed: 0,
        loss_history: vec![],
    }
}

/// A model of `n` random neurons at random parameters.
pub fn random_model(family: &str, n: usize, seed: u64) -> GptModel {
    let pde = lookup(family).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let colloc = colloc_for(&pde, 120, 30, seed);
    let mut model = GptModel::new(pde.clone(), colloc.clone(), None);
    for _ in 0..n {
        let mu = random_mu(&pde, &mut rng);
        model
            .add_neuron(fake_pinn(&pde, mu, &colloc, &[2, 6, 6, 1], &mut rng))
            .unwrap();
    }
    model
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(1e-300)
}
