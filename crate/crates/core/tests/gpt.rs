mod common;

use common::{colloc_for, fake_pinn, random_model, random_mu, rel_err};
use gpt_pinn::gpt::{
    gpt_grad, gpt_loss, gpt_predict, init_coeffs, online_train, online_train_traced, Combination,
    GptModel, OnlineConfig,
};
use gpt_pinn::mlp::Field;
use gpt_pinn::pde::{lookup, ParameterPoint};
use gpt_pinn::pinn::pinn_loss;
use gpt_pinn::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn gradient_matches_finite_differences() {
    let err = common::oracles::gpt_gradient_error();
    assert!(err < 1e-8, "{err:e}");
}

#[test]
fn unit_coefficients_reproduce_each_neuron() {
    for family in ["kg", "burgers", "ac"] {
        let model = random_model(family, 3, 11);
        for (i, neuron) in model.neurons().iter().enumerate() {
            let mut e = vec![0.0; 3];
            e[i] = 1.0;
            let l = gpt_loss(&e, &model, &neuron.mu).unwrap();
            assert!((l - neuron.terminal_loss).abs() <= 1e-12 * neuron.terminal_loss.max(1.0));
        }
    }
}

#[test]
fn reduced_loss_matches_direct_evaluation() {
    for family in ["kg", "burgers", "ac"] {
        let model = random_model(family, 4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mu = random_mu(model.pde(), &mut rng);
        let direct = pinn_loss(
            &Combination {
                model: &model,
                c: &c,
            },
            model.pde().as_ref(),
            &mu,
            model.reduced_colloc(),
        )
        .unwrap();
        let reduced = gpt_loss(&c, &model, &mu).unwrap();
        assert!(
            (direct - reduced).abs() <= 1e-12 * direct.max(1.0),
            "{family}"
        );
    }
}

#[test]
fn zero_coefficients_give_data_only_loss() {
    let model = random_model("kg", 2, 5);
    let mu = ParameterPoint::new(vec![-1.3, 0.2, 0.7]);
    let colloc = model.reduced_colloc();
    let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    let interior = mean(
        colloc
            .interior
            .iter()
            .map(|p| {
                let c = p[1].cos();
                (p[0] * c - p[0] * p[0] * c * c).powi(2)
            })
            .collect(),
    );
    let boundary = mean(
        colloc
            .boundary
            .iter()
            .map(|p| (p[0] * p[1].cos()).powi(2))
            .collect(),
    );
    let initial = mean(colloc.initial.iter().map(|p| p[0] * p[0]).collect());
    let expected = interior + boundary + initial;
    let l = gpt_loss(&[0.0, 0.0], &model, &mu).unwrap();
    assert!((l - expected).abs() < 1e-13 * expected);
}

#[test]
fn quadratic_case_has_affine_gradient() {
    let model = random_model("kg", 3, 8);
    let mu = ParameterPoint::new(vec![-1.7, 0.4, 0.0]);
    let c = [0.3, -0.8, 1.1];
    let c2: Vec<f64> = c.iter().map(|v| 2.0 * v).collect();
    let g0 = gpt_grad(&[0.0; 3], &model, &mu).unwrap();
    let g1 = gpt_grad(&c, &model, &mu).unwrap();
    let g2 = gpt_grad(&c2, &model, &mu).unwrap();
    for i in 0..3 {
        let lhs = g2[i] - g0[i];
        let rhs = 2.0 * (g1[i] - g0[i]);
        assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0));
    }
}

#[test]
fn zero_snapshots_give_zero_gradient() {
    let mut model = random_model("kg", 2, 9);
    let mut basis = model.basis().clone();
    for b in &mut basis.blocks {
        for col in b.interior.iter_mut().flatten() {
            col.iter_mut().for_each(|v| *v = 0.0);
        }
        b.boundary.iter_mut().for_each(|v| *v = 0.0);
        b.initial.iter_mut().for_each(|v| *v = 0.0);
        b.initial_velocity
            .iter_mut()
            .flatten()
            .for_each(|v| *v = 0.0);
    }
    model = GptModel::from_parts(
        model.pde().clone(),
        model.neurons().to_vec(),
        basis,
        model.base_colloc().clone(),
        None,
        model.history.clone(),
    )
    .unwrap();
    let g = gpt_grad(
        &[0.4, -2.0],
        &model,
        &ParameterPoint::new(vec![-1.0, 0.5, 0.5]),
    )
    .unwrap();
    assert_eq!(g, vec![0.0, 0.0]);
}

#[test]
fn stored_columns_match_direct_evaluation() {
    let kg = random_model("kg", 2, 21);
    let colloc = kg.reduced_colloc();
    for (block, neuron) in kg.basis().blocks.iter().zip(kg.neurons()) {
        assert!(block.column(Field::Ux).is_none());
        assert!(block.column(Field::Ut).is_none());
        assert_eq!(
            block.column(Field::Utt).unwrap().len(),
            colloc.interior.len()
        );
        for (k, p) in colloc.interior.iter().enumerate() {
            let e = neuron.params.extended(*p);
            assert_eq!(block.column(Field::U).unwrap()[k].to_bits(), e.u.to_bits());
            assert_eq!(
                block.column(Field::Uxx).unwrap()[k].to_bits(),
                e.uxx.to_bits()
            );
            assert_eq!(
                block.column(Field::Utt).unwrap()[k].to_bits(),
                e.utt.to_bits()
            );
        }
        for (k, p) in colloc.initial.iter().enumerate() {
            let e = neuron.params.extended(*p);
            assert_eq!(
                block.initial_velocity.as_ref().unwrap()[k].to_bits(),
                e.ut.to_bits()
            );
        }
    }
    let burgers = random_model("burgers", 1, 22);
    let b = &burgers.basis().blocks[0];
    assert!(b.column(Field::Ux).is_some() && b.column(Field::Ut).is_some());
    assert!(b.column(Field::Utt).is_none() && b.initial_velocity.is_none());
}

#[test]
fn coefficient_length_is_checked() {
    let model = random_model("ac", 2, 4);
    let mu = ParameterPoint::new(vec![5e-4, 2.0]);
    assert!(matches!(
        gpt_loss(&[1.0], &model, &mu),
        Err(Error::CoeffLength { .. })
    ));
}

#[test]
fn zero_rate_keeps_start_and_indicator_is_final_loss() {
    let model = random_model("burgers", 3, 6);
    let mu = ParameterPoint::new(vec![0.3]);
    let c0 = [0.2, 0.5, -0.1];
    let r = online_train(&model, &mu, &c0, &OnlineConfig::new(0.0, 25)).unwrap();
    assert_eq!(r.c, c0.to_vec());
    assert_eq!(
        r.delta.to_bits(),
        gpt_loss(&c0, &model, &mu).unwrap().to_bits()
    );

    let r = online_train(&model, &mu, &c0, &OnlineConfig::new(1e-3, 25)).unwrap();
    assert_eq!(
        r.delta.to_bits(),
        gpt_loss(&r.c, &model, &mu).unwrap().to_bits()
    );
}

#[test]
fn no_epochs_at_a_sample_gives_its_loss() {
    let model = random_model("kg", 3, 12);
    let n = &model.neurons()[1];
    let c0 = init_coeffs(&n.mu, &model.mus());
    assert_eq!(c0, vec![0.0, 1.0, 0.0]);
    let r = online_train(&model, &n.mu, &c0, &OnlineConfig::new(0.025, 0)).unwrap();
    assert!((r.delta - n.terminal_loss).abs() <= 1e-12 * n.terminal_loss);
}

#[test]
fn descent_is_monotone_on_the_quadratic_case() {
    let model = random_model("kg", 4, 13);
    let mu = ParameterPoint::new(vec![-1.2, 0.6, 0.0]);
    let g0 = gpt_grad(&[0.0; 4], &model, &mu).unwrap();
    let hess = |v: &[f64]| -> Vec<f64> {
        let g = gpt_grad(v, &model, &mu).unwrap();
        g.iter().zip(&g0).map(|(a, b)| a - b).collect()
    };
    let mut v = vec![1.0; 4];
    let mut lambda = 0.0;
    for _ in 0..200 {
        let w = hess(&v);
        lambda = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = w.iter().map(|x| x / lambda).collect();
    }
    let cfg = OnlineConfig::new(0.9 / lambda, 200);
    let mut trace = Vec::new();
    online_train_traced(&model, &mu, &[0.1, 0.2, -0.3, 0.4], &cfg, Some(&mut trace)).unwrap();
    for w in trace.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} > {}", w[1], w[0]);
    }
}

#[test]
fn divergence_reports_epoch_and_last_loss() {
    let model = random_model("ac", 2, 14);
    let mu = ParameterPoint::new(vec![5e-4, 5.0]);
    match online_train(&model, &mu, &[3.0, 3.0], &OnlineConfig::new(1e6, 100)) {
        Err(Error::OnlineDivergence { epoch, last_delta }) => {
            assert!(epoch >= 1);
            assert!(last_delta.is_finite());
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn adam_option_is_available() {
    let model = random_model("kg", 2, 15);
    let mu = ParameterPoint::new(vec![-1.5, 0.5, 0.5]);
    let mut cfg = OnlineConfig::new(1e-2, 50);
    cfg.optimizer = "adam".into();
    let r = online_train(&model, &mu, &[0.5, 0.5], &cfg).unwrap();
    assert!(r.delta < gpt_loss(&[0.5, 0.5], &model, &mu).unwrap());
    cfg.optimizer = "lbfgs".into();
    assert!(online_train(&model, &mu, &[0.5, 0.5], &cfg).is_err());
}

#[test]
fn interpolation_weights() {
    let s = |v: f64| ParameterPoint::new(vec![v]);
    let sampled = [s(0.0), s(1.0), s(0.4)];
    assert_eq!(init_coeffs(&s(1.0), &sampled), vec![0.0, 1.0, 0.0]);
    let c = init_coeffs(&s(0.7), &sampled);
    assert!(rel_err(&c, &[0.0, 0.5, 0.5]) < 1e-15);
    assert_eq!(init_coeffs(&s(0.3), &[s(0.9)]), vec![1.0]);
    // equidistant neighbours: the earlier index wins the last slot
    let c = init_coeffs(&s(0.5), &[s(0.0), s(1.0), s(0.25), s(0.75)]);
    assert_eq!(c, vec![0.0, 0.0, 0.5, 0.5]);
    let c = init_coeffs(&s(0.2), &sampled);
    assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-15);
}

#[test]
fn prediction_is_linear_in_coefficients() {
    let model = random_model("ac", 3, 16);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pts: Vec<[f64; 2]> = (0..50)
        .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(0.0..1.0)])
        .collect();
    let c1 = [0.3, -1.0, 2.0];
    let c2 = [1.5, 0.25, -0.5];
    let (a, b) = (0.7, -1.3);
    let mix: Vec<f64> = c1.iter().zip(&c2).map(|(x, y)| a * x + b * y).collect();
    let p1 = gpt_predict(&c1, &model, &pts).unwrap();
    let p2 = gpt_predict(&c2, &model, &pts).unwrap();
    let pm = gpt_predict(&mix, &model, &pts).unwrap();
    for k in 0..pts.len() {
        assert!((pm[k] - (a * p1[k] + b * p2[k])).abs() < 1e-13);
    }
    assert!(gpt_predict(&[0.0; 3], &model, &pts)
        .unwrap()
        .iter()
        .all(|v| *v == 0.0));
    let e1 = gpt_predict(&[0.0, 1.0, 0.0], &model, &pts).unwrap();
    for (k, p) in pts.iter().enumerate() {
        assert_eq!(
            e1[k].to_bits(),
            model.neurons()[1].params.forward(*p).unwrap().to_bits()
        );
    }
}

#[test]
fn stiff_filter_shrinks_reduced_sets() {
    let pde = lookup("burgers").unwrap();
    let colloc = colloc_for(&pde, 200, 40, 3);
    let filter = gpt_pinn::filter::stiff_filter("formula").unwrap();
    let mut model = GptModel::new(pde.clone(), colloc.clone(), Some(filter));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut sizes = vec![];
    for v in [0.1, 0.5] {
        let p = fake_pinn(
            &pde,
            ParameterPoint::new(vec![v]),
            &colloc,
            &[2, 6, 1],
            &mut rng,
        );
        model.add_neuron(p).unwrap();
        sizes.push(model.reduced_colloc().interior.len());
        for b in &model.basis().blocks {
            assert_eq!(
                b.column(Field::U).unwrap().len(),
                model.reduced_colloc().interior.len()
            );
        }
    }
    assert!(sizes[0] < 200 && sizes[1] <= sizes[0]);
    let dup = fake_pinn(
        &pde,
        ParameterPoint::new(vec![0.5]),
        &colloc,
        &[2, 6, 1],
        &mut rng,
    );
    assert!(model.add_neuron(dup).is_err());
}
