//! The offline stage: scan the training set with the online indicator, train
//! a full PINN at the worst parameter and add it as a neuron.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::collocation::CollocationSet;
use crate::filter::FilterRef;
use crate::gpt::{online_train, GptModel, OnlineConfig};
use crate::pde::{ParameterPoint, PdeRef};
use crate::pinn::{train_pinn, TrainConfig};
use crate::{Error, Result};

/// One greedy round. Round 1 has no scan and a NaN indicator.
#[derive(Debug, Clone)]
pub struct RoundRecord {
    pub mu: ParameterPoint,
    /// Position of `mu` in the training set.
    pub xi_index: usize,
    pub max_indicator: f64,
    /// Indicator of every training parameter with the previous model.
    pub scan: Vec<f64>,
    pub t_full_train: f64,
    pub t_scan: f64,
}

impl RoundRecord {
    fn same_result(&self, other: &RoundRecord) -> bool {
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        self.mu.same_bits(&other.mu)
            && self.xi_index == other.xi_index
            && self.max_indicator.to_bits() == other.max_indicator.to_bits()
            && bits(&self.scan) == bits(&other.scan)
    }
}

#[derive(Debug, Clone, Default)]
pub struct GreedyHistory {
    pub xi: Vec<ParameterPoint>,
    pub rounds: Vec<RoundRecord>,
    /// Indicators of the final model over the training set.
    pub final_scan: Option<Vec<f64>>,
}

impl GreedyHistory {
    pub fn chosen(&self) -> Vec<ParameterPoint> {
        self.rounds.iter().map(|r| r.mu.clone()).collect()
    }

    /// Max indicator per round, starting from round 2, followed by the
    /// worst case of the final model when it was recorded.
    pub fn indicator_sequence(&self) -> Vec<f64> {
        let mut seq: Vec<f64> = self
            .rounds
            .iter()
            .skip(1)
            .map(|r| r.max_indicator)
            .collect();
        if let Some(f) = &self.final_scan {
            seq.push(max_of(f));
        }
        seq
    }

    /// Bitwise equality of everything except wall times.
    pub fn same_result(&self, other: &GreedyHistory) -> bool {
        let bits = |v: &Option<Vec<f64>>| {
            v.as_ref()
                .map(|v| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>())
        };
        self.xi.len() == other.xi.len()
            && self.xi.iter().zip(&other.xi).all(|(a, b)| a.same_bits(b))
            && self.rounds.len() == other.rounds.len()
            && self
                .rounds
                .iter()
                .zip(&other.rounds)
                .all(|(a, b)| a.same_result(b))
            && bits(&self.final_scan) == bits(&other.final_scan)
    }

    /// Checks that each round's parameter attains the maximum of its scan
    /// over the parameters not chosen before, and that choices are distinct.
    pub fn verify_certificates(&self) -> Result<()> {
        let fail = |round: usize, msg: String| {
            Err(Error::Greedy {
                round,
                source: Box::new(Error::Config(msg)),
            })
        };
        for (k, r) in self.rounds.iter().enumerate() {
            let round = k + 1;
            if r.xi_index >= self.xi.len() || !self.xi[r.xi_index].same_bits(&r.mu) {
                return fail(
                    round,
                    "chosen parameter is not at its recorded index".into(),
                );
            }
            let earlier: Vec<usize> = self.rounds[..k].iter().map(|e| e.xi_index).collect();
            if earlier.contains(&r.xi_index) {
                return fail(round, format!("parameter {} chosen twice", r.mu));
            }
            if k == 0 {
                continue;
            }
            if r.scan.len() != self.xi.len() {
                return fail(round, "incomplete scan".into());
            }
            let best = r
                .scan
                .iter()
                .enumerate()
                .filter(|(j, _)| !earlier.contains(j))
                .map(|(_, v)| *v)
                .fold(f64::NEG_INFINITY, f64::max);
            if best.to_bits() != r.max_indicator.to_bits()
                || r.scan[r.xi_index].to_bits() != r.max_indicator.to_bits()
            {
                return fail(
                    round,
                    format!(
                        "indicator {} is not the scan maximum {best}",
                        r.max_indicator
                    ),
                );
            }
        }
        Ok(())
    }
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone)]
pub struct GreedyConfig {
    pub xi: Vec<ParameterPoint>,
    /// Initial parameter; a seeded random element of the training set if
    /// absent.
    pub mu1: Option<ParameterPoint>,
    pub n_max: usize,
    pub tol: Option<f64>,
    pub train: TrainConfig,
    pub online: OnlineConfig,
    pub seed: u64,
    /// Collocation set shared by all full PINNs.
    pub colloc: Arc<CollocationSet>,
    /// Reduced sets before filtering; the full sets if absent.
    pub reduced: Option<Arc<CollocationSet>>,
    pub filter: Option<FilterRef>,
    /// Scan once more after the last neuron to record the final worst case.
    pub final_scan: bool,
}

impl GreedyConfig {
    pub fn validate(&self, pde: &PdeRef) -> Result<()> {
        if self.xi.is_empty() {
            return Err(Error::Config("training set is empty".into()));
        }
        if self.n_max == 0 {
            return Err(Error::Config("n_max must be at least 1".into()));
        }
        let dim = pde.param_names().len();
        if let Some(bad) = self.xi.iter().find(|m| m.dim() != dim) {
            return Err(Error::Config(format!(
                "training parameter {bad} has the wrong dimension"
            )));
        }
        if let Some(mu1) = &self.mu1 {
            if !self.xi.iter().any(|m| m.same_bits(mu1)) {
                return Err(Error::Config(format!(
                    "initial parameter {mu1} is not in the training set"
                )));
            }
        }
        self.train.validate()?;
        self.online.validate()
    }

    fn first_index(&self) -> usize {
        match &self.mu1 {
            Some(mu1) => self.xi.iter().position(|m| m.same_bits(mu1)).unwrap(),
            None => ChaCha8Rng::seed_from_u64(self.seed).gen_range(0..self.xi.len()),
        }
    }

    /// Seed of the full PINN trained in `round` (1-based).
    pub fn round_seed(&self, round: usize) -> u64 {
        self.seed.wrapping_add(round as u64)
    }
}

/// The offline stage stopped early; `partial` holds every completed round.
#[derive(Debug)]
pub struct OfflineFailure {
    pub round: usize,
    pub error: Error,
    pub partial: Box<GptModel>,
}

impl fmt::Display for OfflineFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "offline stage failed in round {}: {}",
            self.round, self.error
        )
    }
}

impl std::error::Error for OfflineFailure {}

impl From<OfflineFailure> for Error {
    fn from(f: OfflineFailure) -> Self {
        Error::Greedy {
            round: f.round,
            source: Box::new(f.error),
        }
    }
}

/// Indicator of every parameter of `xi` with the current model. Diverged
/// online solves count as `+∞`.
pub fn scan_indicators(
    model: &GptModel,
    xi: &[ParameterPoint],
    online: &OnlineConfig,
) -> Result<Vec<f64>> {
    if model.is_empty() {
        return Err(Error::Config("cannot scan with an empty model".into()));
    }
    online.validate()?;
    let table = xi
        .par_iter()
        .map(|mu| {
            let c0 = model.init_coeffs(mu);
            match online_train(model, mu, &c0, online) {
                Ok(r) => r.delta,
                Err(e) => {
                    warn!("online solve at {mu} failed ({e}); indicator set to infinity");
                    f64::INFINITY
                }
            }
        })
        .collect();
    Ok(table)
}

fn argmax_excluding(table: &[f64], excluded: &[usize]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (j, &v) in table.iter().enumerate() {
        if excluded.contains(&j) {
            continue;
        }
        match best {
            Some(b) if !(v > table[b]) => {}
            _ => best = Some(j),
        }
    }
    best
}

fn base_model(pde: &PdeRef, config: &GreedyConfig) -> GptModel {
    let reduced = config
        .reduced
        .clone()
        .unwrap_or_else(|| config.colloc.clone());
    let mut model = GptModel::new(pde.clone(), reduced, config.filter.clone());
    model.history.xi = config.xi.clone();
    model
}

fn train_round(
    pde: &PdeRef,
    config: &GreedyConfig,
    model: &mut GptModel,
    round: usize,
    index: usize,
) -> Result<f64> {
    let mu = &config.xi[index];
    let start = Instant::now();
    let pinn = train_pinn(
        pde.as_ref(),
        mu,
        config.colloc.clone(),
        &config.train,
        config.round_seed(round),
    )?;
    let elapsed = start.elapsed().as_secs_f64();
    info!(
        "round {round}: trained full PINN at {mu} (loss {:.3e}, {elapsed:.1}s)",
        pinn.terminal_loss
    );
    model.add_neuron(pinn)?;
    Ok(elapsed)
}

/// Greedy construction of the meta-network.
pub fn run_offline(
    pde: &PdeRef,
    config: &GreedyConfig,
) -> std::result::Result<GptModel, OfflineFailure> {
    let mut model = base_model(pde, config);
    let fail = |round, error, model: GptModel| OfflineFailure {
        round,
        error,
        partial: Box::new(model),
    };
    if let Err(e) = config.validate(pde) {
        return Err(fail(0, e, model));
    }

    let first = config.first_index();
    let t_full = match train_round(pde, config, &mut model, 1, first) {
        Ok(t) => t,
        Err(e) => return Err(fail(1, e, model)),
    };
    model.history.rounds.push(RoundRecord {
        mu: config.xi[first].clone(),
        xi_index: first,
        max_indicator: f64::NAN,
        scan: Vec::new(),
        t_full_train: t_full,
        t_scan: 0.0,
    });

    let mut last_scan: Option<Vec<f64>> = None;
    for round in 2..=config.n_max {
        let start = Instant::now();
        let scan = match scan_indicators(&model, &config.xi, &config.online) {
            Ok(s) => s,
            Err(e) => return Err(fail(round, e, model)),
        };
        let t_scan = start.elapsed().as_secs_f64();
        let chosen: Vec<usize> = model.history.rounds.iter().map(|r| r.xi_index).collect();
        let Some(j) = argmax_excluding(&scan, &chosen) else {
            info!("training set exhausted after {} neurons", model.len());
            last_scan = Some(scan);
            break;
        };
        let max = scan[j];
        info!(
            "round {round}: max indicator {max:.3e} at {} ({t_scan:.1}s scan)",
            config.xi[j]
        );
        if config.tol.is_some_and(|tol| max < tol) {
            info!("indicator below tolerance; stopping");
            last_scan = Some(scan);
            break;
        }
        let t_full = match train_round(pde, config, &mut model, round, j) {
            Ok(t) => t,
            Err(e) => return Err(fail(round, e, model)),
        };
        model.history.rounds.push(RoundRecord {
            mu: config.xi[j].clone(),
            xi_index: j,
            max_indicator: max,
            scan,
            t_full_train: t_full,
            t_scan,
        });
    }

    if config.final_scan {
        let scan = match last_scan {
            Some(s) => s,
            None => match scan_indicators(&model, &config.xi, &config.online) {
                Ok(s) => s,
                Err(e) => return Err(fail(model.len() + 1, e, model)),
            },
        };
        model.history.final_scan = Some(scan);
    }
    Ok(model)
}

/// Flattened training-set positions `round(i (|Ξ| - 1) / (N - 1))`.
pub fn uniform_indices(len: usize, n: usize) -> Result<Vec<usize>> {
    if n == 0 || n > len {
        return Err(Error::Config(format!(
            "cannot pick {n} of {len} training parameters"
        )));
    }
    if n == 1 {
        return Ok(vec![(len - 1) / 2]);
    }
    Ok((0..n)
        .map(|i| ((i * (len - 1)) as f64 / (n - 1) as f64).round() as usize)
        .collect())
}

/// A model with `n` neurons at evenly strided training parameters.
pub fn uniform_baseline(
    pde: &PdeRef,
    config: &GreedyConfig,
    n: usize,
) -> std::result::Result<GptModel, OfflineFailure> {
    let mut model = base_model(pde, config);
    let fail = |round, error, model: GptModel| OfflineFailure {
        round,
        error,
        partial: Box::new(model),
    };
    let indices = match config
        .validate(pde)
        .and_then(|_| uniform_indices(config.xi.len(), n))
    {
        Ok(i) => i,
        Err(e) => return Err(fail(0, e, model)),
    };
    for (k, &j) in indices.iter().enumerate() {
        let round = k + 1;
        let t_full = match train_round(pde, config, &mut model, round, j) {
            Ok(t) => t,
            Err(e) => return Err(fail(round, e, model)),
        };
        model.history.rounds.push(RoundRecord {
            mu: config.xi[j].clone(),
            xi_index: j,
            max_indicator: f64::NAN,
            scan: Vec::new(),
            t_full_train: t_full,
            t_scan: 0.0,
        });
    }
    if config.final_scan {
        match scan_indicators(&model, &config.xi, &config.online) {
            Ok(s) => model.history.final_scan = Some(s),
            Err(e) => return Err(fail(n + 1, e, model)),
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stride_selection() {
        assert_eq!(uniform_indices(5, 3).unwrap(), vec![0, 2, 4]);
        assert_eq!(uniform_indices(4, 4).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(uniform_indices(125, 5).unwrap(), vec![0, 31, 62, 93, 124]);
        assert_eq!(uniform_indices(7, 1).unwrap(), vec![3]);
        assert!(uniform_indices(3, 4).is_err());
    }

    #[test]
    fn argmax_skips_excluded_and_keeps_first_tie() {
        let t = [3.0, 1.0, 3.0, 2.0];
        assert_eq!(argmax_excluding(&t, &[]), Some(0));
        assert_eq!(argmax_excluding(&t, &[0]), Some(2));
        assert_eq!(argmax_excluding(&t, &[0, 2]), Some(3));
        assert_eq!(argmax_excluding(&t, &[0, 1, 2, 3]), None);
        assert_eq!(argmax_excluding(&[1.0, f64::INFINITY], &[]), Some(1));
    }
}
