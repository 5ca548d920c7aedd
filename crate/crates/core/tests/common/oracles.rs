//! Checks shared by the regular tests and the acceptance runner. Each returns
//! the worst observed error or a description of the first violation.

use gpt_pinn::archive::{load_model, save_model};
use gpt_pinn::collocation::CollocationSet;
use gpt_pinn::eval::svd_decay_report;
use gpt_pinn::filter::{filter_stiff_points, BasisCurvature, MaxRatio};
use gpt_pinn::gpt::{gpt_grad, gpt_loss, GptModel};
use gpt_pinn::greedy::{GreedyHistory, RoundRecord};
use gpt_pinn::loss::{loss_grad_params, loss_value};
use gpt_pinn::mlp::{Activation, MlpParams};
use gpt_pinn::pde::{lookup, ParameterPoint};
use gpt_pinn::pinn::PinnResiduals;
use gpt_pinn::Error;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{colloc_for, random_model, random_mu, rel_err};

/// Fourth-order central differences. The reduced loss is a polynomial of low
/// degree in `c`, so the stencil is exact up to rounding for the quadratic
/// families and a larger step keeps rounding small.
fn fd_grad(model: &GptModel, c: &[f64], mu: &ParameterPoint) -> Vec<f64> {
    let h = 1e-3;
    let at = |i: usize, k: f64| {
        let mut p = c.to_vec();
        p[i] += k * h;
        gpt_loss(&p, model, mu).unwrap()
    };
    (0..c.len())
        .map(|i| (at(i, -2.0) - 8.0 * at(i, -1.0) + 8.0 * at(i, 1.0) - at(i, 2.0)) / (12.0 * h))
        .collect()
}

/// Worst relative error of the reduced-loss gradient against central
/// differences over all families, `n ∈ {1, 3, 5}` and 20 random draws each.
pub fn gpt_gradient_error() -> f64 {
    let mut worst = 0.0f64;
    for family in ["kg", "burgers", "ac"] {
        for n in [1, 3, 5] {
            let model = random_model(family, n, 100 + n as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            for _ in 0..20 {
                let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let mu = random_mu(model.pde(), &mut rng);
                let g = gpt_grad(&c, &model, &mu).unwrap();
                worst = worst.max(rel_err(&g, &fd_grad(&model, &c, &mu)));
            }
        }
    }
    worst
}

#[derive(Debug, Default, Clone, Copy)]
pub struct DerivativeErrors {
    pub first: f64,
    pub second: f64,
    pub params: f64,
}

/// Network derivatives and the parameter gradient of a PINN loss against
/// finite differences, on 20 random `[2, 5, 5, 1]` nets per activation.
pub fn derivative_errors() -> DerivativeErrors {
    let pde = lookup("kg").unwrap();
    let colloc = colloc_for(&pde, 40, 10, 3);
    let mu = [-1.0, 0.5, 0.5];
    let res = PinnResiduals::new(pde.as_ref(), &mu);
    let terms = res.terms(&colloc);
    let mut out = DerivativeErrors::default();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for act in [Activation::Tanh, Activation::Cos] {
        for _ in 0..20 {
            let net = MlpParams::glorot(&[2, 5, 5, 1], act, &mut rng).unwrap();
            let pts: Vec<[f64; 2]> = (0..10)
                .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(0.0..1.0)])
                .collect();
            let u = |p: [f64; 2]| net.forward(p).unwrap();
            let (h1, h2) = (1e-5, 1e-4);
            let (mut a1, mut f1, mut a2, mut f2) = (vec![], vec![], vec![], vec![]);
            for &[x, t] in &pts {
                let e = net.extended([x, t]);
                a1.extend([e.ux, e.ut]);
                f1.push((u([x + h1, t]) - u([x - h1, t])) / (2.0 * h1));
                f1.push((u([x, t + h1]) - u([x, t - h1])) / (2.0 * h1));
                a2.extend([e.uxx, e.utt]);
                let c = u([x, t]);
                f2.push((u([x + h2, t]) - 2.0 * c + u([x - h2, t])) / (h2 * h2));
                f2.push((u([x, t + h2]) - 2.0 * c + u([x, t - h2])) / (h2 * h2));
            }
            out.first = out.first.max(rel_err(&a1, &f1));
            out.second = out.second.max(rel_err(&a2, &f2));

            let g = loss_grad_params(&net, &terms).unwrap().grad;
            let h = 1e-6;
            let fd: Vec<f64> = (0..net.len())
                .map(|k| {
                    let mut p = net.clone();
                    p.as_mut_slice()[k] += h;
                    let lp = loss_value(&p, &terms).unwrap();
                    p.as_mut_slice()[k] -= 2.0 * h;
                    let lm = loss_value(&p, &terms).unwrap();
                    (lp - lm) / (2.0 * h)
                })
                .collect();
            out.params = out.params.max(rel_err(&g, &fd));
        }
    }
    out
}

/// Worst gap between the reduced loss at `e_i` and neuron `i`'s own loss on
/// the reduced sets, relative to `max(1, loss)`.
pub fn consistency_gap(model: &GptModel) -> f64 {
    let n = model.len();
    let mut worst = 0.0f64;
    for (i, neuron) in model.neurons().iter().enumerate() {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        let reduced = gpt_loss(&e, model, &neuron.mu).unwrap();
        let direct = neuron
            .loss_on(model.pde().as_ref(), model.reduced_colloc())
            .unwrap();
        worst = worst.max((reduced - direct).abs() / direct.max(1.0));
    }
    worst
}

fn indexed_set(ni: usize, nb: usize, n0: usize) -> CollocationSet {
    let line = |n: usize, t: f64| (0..n).map(|i| [i as f64, t]).collect();
    CollocationSet {
        interior: line(ni, 0.5),
        boundary: line(nb, 0.25),
        initial: line(n0, 0.0),
        space: [-1.0, 1.0],
        horizon: 1.0,
        strategy: "table".into(),
        seed: 0,
    }
}

fn expected_kept(values: &[Vec<f64>], len: usize) -> Vec<usize> {
    (0..len)
        .filter(|&p| {
            !values.iter().any(|v| {
                let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                v[p].abs() > 0.8 * max
            })
        })
        .collect()
}

fn value_table(bases: usize, len: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    let cell = prop_oneof![
        3 => -10.0..10.0f64,
        1 => Just(0.0),
        1 => Just(1.0),
        1 => Just(-4.0),
    ];
    prop::collection::vec(prop::collection::vec(cell, len), bases)
}

/// The stiff filter against a brute-force reading of the `0.8·max` rule on
/// random value tables. Returns the first failing case.
pub fn filter_property(cases: u32) -> Result<(), String> {
    let shapes = (1usize..6, 0usize..40, 0usize..12, 0usize..12);
    let tables = shapes.prop_flat_map(|(b, ni, nb, n0)| {
        (value_table(b, ni), value_table(b, nb), value_table(b, n0))
    });
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&tables, |(vi, vb, v0)| {
            let (ni, nb, n0) = (vi[0].len(), vb[0].len(), v0[0].len());
            let set = indexed_set(ni, nb, n0);
            let curvature: Vec<BasisCurvature> = (0..vi.len())
                .map(|k| BasisCurvature {
                    interior: vi[k].clone(),
                    boundary: vb[k].clone(),
                    initial: v0[k].clone(),
                })
                .collect();
            let out = filter_stiff_points(&curvature, &set, &MaxRatio::default()).unwrap();
            let idx = |pts: &[[f64; 2]]| pts.iter().map(|p| p[0] as usize).collect::<Vec<_>>();
            prop_assert_eq!(idx(&out.interior), expected_kept(&vi, ni));
            prop_assert_eq!(idx(&out.boundary), expected_kept(&vb, nb));
            prop_assert_eq!(idx(&out.initial), expected_kept(&v0, n0));
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn with_history(mut model: GptModel) -> GptModel {
    let mus = model.mus();
    let mut xi = mus.clone();
    xi.push(ParameterPoint::new(vec![-1.5, 0.75, 0.25]));
    let rounds = mus
        .iter()
        .enumerate()
        .map(|(k, mu)| RoundRecord {
            mu: mu.clone(),
            xi_index: k,
            max_indicator: if k == 0 { f64::NAN } else { 0.5 / k as f64 },
            scan: if k == 0 {
                vec![]
            } else {
                (0..xi.len())
                    .map(|j| if j == k { 0.5 / k as f64 } else { 0.1 })
                    .collect()
            },
            t_full_train: 1.25 * k as f64,
            t_scan: 0.5,
        })
        .collect();
    model.history = GreedyHistory {
        xi,
        rounds,
        final_scan: Some(vec![0.01, f64::INFINITY, -0.0, 1e-300]),
    };
    model
}

/// Bitwise roundtrip of a 3-neuron model and rejection of damaged files.
pub fn archive_checks() -> Result<(), String> {
    let model = with_history(random_model("kg", 3, 5));
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("model.gptpinn");
    save_model(&model, &path).map_err(|e| e.to_string())?;
    let back = load_model(&path).map_err(|e| e.to_string())?;
    if back.basis() != model.basis() {
        return Err("precomputed basis differs".into());
    }
    if !back.history.same_result(&model.history) {
        return Err("greedy history differs".into());
    }
    for (a, b) in back.neurons().iter().zip(model.neurons()) {
        if !a.same_result(b) || *a.colloc != *b.colloc {
            return Err(format!("neuron at {} differs", a.mu));
        }
    }
    if back.len() != 3 || **back.base_colloc() != **model.base_colloc() {
        return Err("model shape differs".into());
    }

    let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
    let damaged = |name: &str, data: &[u8]| {
        let p = dir.path().join(name);
        std::fs::write(&p, data).unwrap();
        load_model(&p)
    };
    let mut magic = bytes.clone();
    magic[0] = b'X';
    match damaged("magic", &magic) {
        Err(Error::NotAnArchive) => {}
        other => return Err(format!("wrong magic gave {other:?}")),
    }
    match damaged("short", &bytes[..5]) {
        Err(Error::NotAnArchive) => {}
        other => return Err(format!("5-byte file gave {other:?}")),
    }
    match damaged("cut", &bytes[..bytes.len() - 12]) {
        Err(Error::CorruptArchive(_)) => {}
        other => return Err(format!("truncated file gave {other:?}")),
    }
    let mut trailing = bytes.clone();
    trailing.extend([0u8; 8]);
    match damaged("trailing", &trailing) {
        Err(Error::CorruptArchive(_)) => {}
        other => return Err(format!("trailing bytes gave {other:?}")),
    }
    let text = String::from_utf8_lossy(&bytes).into_owned();
    let at = text.find("\"version\":1").ok_or("no version field")?;
    let mut future = bytes.clone();
    future[at + "\"version\":".len()] = b'7';
    match damaged("future", &future) {
        Err(Error::UnsupportedVersion(7)) => {}
        other => return Err(format!("version 7 gave {other:?}")),
    }
    let mut garbled = bytes.clone();
    garbled[17] = b'@';
    match damaged("garbled", &garbled) {
        Err(Error::CorruptArchive(_)) => {}
        other => return Err(format!("garbled metadata gave {other:?}")),
    }
    Ok(())
}

/// Rank-1 and orthonormal-column cases of the singular value report.
pub fn svd_properties() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for trial in 0..20 {
        let rows = rng.gen_range(5..40);
        let cols = rng.gen_range(2..rows.min(12));
        let a: Vec<f64> = (0..rows).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let rank1: Vec<Vec<f64>> = (0..cols)
            .map(|_| {
                let s = rng.gen_range(0.5..2.0);
                a.iter().map(|v| s * v).collect()
            })
            .collect();
        let r = svd_decay_report(&rank1, "rank1").map_err(|e| e.to_string())?;
        if r.ratios[0] != 1.0 || r.ratios[1..].iter().any(|v| *v > 1e-14) {
            return Err(format!("trial {trial}: rank-1 ratios {:?}", r.ratios));
        }

        // Columns of a Householder reflector are orthonormal.
        let v: Vec<f64> = (0..rows).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let vv: f64 = v.iter().map(|x| x * x).sum();
        let q: Vec<Vec<f64>> = (0..cols)
            .map(|j| {
                (0..rows)
                    .map(|i| f64::from(u8::from(i == j)) - 2.0 * v[i] * v[j] / vv)
                    .collect()
            })
            .collect();
        let r = svd_decay_report(&q, "orthonormal").map_err(|e| e.to_string())?;
        if r.ratios.len() != cols || r.ratios.iter().any(|s| (s - 1.0).abs() > 1e-14) {
            return Err(format!("trial {trial}: orthonormal ratios {:?}", r.ratios));
        }
    }
    if !matches!(
        svd_decay_report(&vec![vec![0.0; 4]; 3], "zero"),
        Err(Error::ZeroMatrix)
    ) {
        return Err("zero matrix accepted".into());
    }
    Ok(())
}
