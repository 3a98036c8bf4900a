use super::*;
use crate::numerics::grad_check;

const LN4: f64 = std::f64::consts::LN_2 * 2.0;

fn uniform() -> [f64; 4] {
    [0.25; 4]
}

#[test]
fn perfect_predictions_cost_nothing() {
    let model = ModelParams::zeros(NetworkConfig::new(2, 3, 1));
    let real = [([0.0, 0.0, 1.0, 0.0], Polarity::Positive), ([1.0, 0.0, 0.0, 0.0], Polarity::Negative)];
    let l = loss_discriminator(&real, &[FAKE_LABEL], &model, 0.5).unwrap();
    assert!(l.total() <= 1e-11);
    assert_eq!(l.penalty, 0.0);
}

#[test]
fn uniform_predictions() {
    let model = ModelParams::zeros(NetworkConfig::new(2, 3, 1));
    let l = loss_discriminator(&[(uniform(), Polarity::Neutral)], &[uniform()], &model, 0.0).unwrap();
    assert!((l.total() - 2.0 * LN4).abs() < 1e-12);
    assert!((l.total() - 2.7726).abs() < 1e-4);
    let g = loss_generator(&[uniform()], &model, 0.0).unwrap();
    assert!((g.objective - LN4).abs() < 1e-12);
}

#[test]
fn generator_objective_boundaries() {
    let model = ModelParams::zeros(NetworkConfig::new(2, 3, 1));
    assert_eq!(loss_generator(&[FAKE_LABEL], &model, 0.0).unwrap().objective, 0.0);
    let real = loss_generator(&[[0.5, 0.5, 0.0, 0.0]], &model, 0.0).unwrap().objective;
    assert!((real - (-PROB_FLOOR.ln())).abs() < 1e-12);
    assert!(loss_generator(&[], &model, 0.0).is_err());
}

#[test]
fn penalty_uses_the_right_group() {
    let mut model = ModelParams::zeros(NetworkConfig::new(2, 3, 1));
    let head = model.layout().head.w;
    let gen = model.layout().generator.b[0];
    model.set(head, Tensor::matrix(4, 16, vec![0.5; 64]).unwrap()).unwrap();
    model.set(gen, Tensor::vector(vec![2.0; 4])).unwrap();
    let d = loss_discriminator(&[(uniform(), Polarity::Neutral)], &[], &model, 0.1).unwrap();
    assert!((d.penalty - 0.1 * 16.0).abs() < 1e-12);
    assert_eq!(d.fake, 0.0);
    let g = loss_generator(&[uniform()], &model, 0.1).unwrap();
    assert!((g.penalty - 0.1 * 16.0).abs() < 1e-12);
    assert!((g.net() - (LN4 - 1.6)).abs() < 1e-12);
}

fn clusters(n: usize, d: usize, seed: u64) -> Vec<FeatureExample> {
    let mut g = rng::stream(seed, &[5]);
    (0..n)
        .map(|i| {
            let label = Polarity::ALL[i % 3];
            let features = (0..8 * d)
                .map(|j| {
                    let centre = if j % 3 == label.index() { 1.0 } else { -0.5 };
                    centre + 0.3 * (g.random::<f64>() - 0.5)
                })
                .collect();
            FeatureExample { features, label }
        })
        .collect()
}

fn small_hp(seed: u64) -> Hyperparams {
    Hyperparams { d: 2, r: 3, hops: 1, batch_m: 4, iterations: 6, seed, ..Hyperparams::default() }
}

#[test]
fn generator_schedule() {
    for k in [1, 2, 3, 4, 5] {
        let hp = Hyperparams { k, ..small_hp(1) };
        let (_, trace, status) = train(&clusters(9, 2, 0), &hp).unwrap();
        assert_eq!(status, Status::Completed);
        assert_eq!(trace.len(), 6);
        let updated: Vec<usize> = trace.records.iter().filter(|r| r.g_updated).map(|r| r.iteration).collect();
        assert_eq!(updated, (1..=6).filter(|t| t % k == 0).collect::<Vec<_>>());
    }
}

#[test]
fn plain_mode_never_touches_the_generator() {
    let hp = Hyperparams { adversarial: false, k: 1, ..small_hp(2) };
    let (params, trace, _) = train(&clusters(9, 2, 0), &hp).unwrap();
    let init = ModelParams::init(hp.network_config(), hp.seed);
    for id in params.group_ids(Group::Generator) {
        assert_eq!(params.get(id), init.get(id));
    }
    assert!(trace.records.iter().all(|r| !r.g_updated && r.d_loss_fake == 0.0));
}

#[test]
fn zero_learning_rates_freeze_everything() {
    let hp = Hyperparams { lr_dis: 0.0, k: 1, ..small_hp(3) };
    assert_eq!(hp.lr_gen(), 0.0);
    let (params, _, _) = train(&clusters(9, 2, 0), &hp).unwrap();
    assert_eq!(params, ModelParams::init(hp.network_config(), hp.seed));
}

#[test]
fn derived_generator_settings() {
    let hp = Hyperparams { lr_dis: 0.03, mom_dis: 0.7, mu_lr: 0.15, mu_mom: 0.6, ..Hyperparams::default() };
    assert!((hp.lr_gen() - 0.0045).abs() < 1e-15);
    assert!((hp.mom_gen() - 0.42).abs() < 1e-15);
}

#[test]
fn rejects_bad_hyperparameters() {
    for hp in [
        Hyperparams { iterations: 0, ..small_hp(0) },
        Hyperparams { batch_m: 0, ..small_hp(0) },
        Hyperparams { k: 0, ..small_hp(0) },
        Hyperparams { keep_p: 0.0, ..small_hp(0) },
        Hyperparams { lr_dis: -1.0, ..small_hp(0) },
    ] {
        assert!(matches!(train(&clusters(3, 2, 0), &hp), Err(TrainError::Invalid(_))));
    }
    assert!(matches!(train::<FeatureExample>(&[], &small_hp(0)), Err(TrainError::Invalid(_))));
}

#[test]
fn single_iteration_gives_one_record() {
    let hp = Hyperparams { iterations: 1, ..small_hp(4) };
    assert_eq!(train(&clusters(3, 2, 0), &hp).unwrap().1.len(), 1);
}

#[test]
fn hyperparams_round_trip_through_entries() {
    let hp = Hyperparams { lr_dis: 0.007, mu_mom: 1.6, seed: 99, adversarial: false, ..Hyperparams::default() };
    let mut back = Hyperparams::default();
    for (k, v) in hp.entries() {
        back.set(k, &v).unwrap();
    }
    assert_eq!(back, hp);
    assert!(back.set("nope", "1").is_err());
    assert!(back.set("k", "x").is_err());
}

#[test]
fn batches_walk_through_epochs() {
    let n = 7;
    let seen: Vec<usize> = (1..=7).flat_map(|t| batch_indices(n, 3, 11, t)).collect();
    for epoch in seen.chunks(n) {
        let mut e = epoch.to_vec();
        e.sort();
        assert_eq!(e, (0..n).collect::<Vec<_>>());
    }
    assert_ne!(&seen[..n], &seen[n..2 * n]);
    assert_eq!(batch_indices(n, 3, 11, 4), batch_indices(n, 3, 11, 4));
}

fn embedded(n: usize, d: usize, seed: u64) -> Vec<EmbeddedInstance> {
    let mut g = rng::stream(seed, &[6]);
    let mut m = |rows: usize| Tensor::matrix(rows, d, (0..rows * d).map(|_| g.random_range(-1.0..1.0)).collect()).unwrap();
    (0..n)
        .map(|i| EmbeddedInstance {
            left: m(1 + i % 3),
            target: m(1 + i % 2),
            right: m(2),
            polarity: Polarity::ALL[i % 3],
            aspect_category: "C".into(),
        })
        .collect()
}

#[test]
fn one_iteration_matches_hand_composed_step() {
    let data = embedded(2, 4, 1);
    let hp = Hyperparams {
        d: 4,
        r: 5,
        hops: 2,
        batch_m: 2,
        k: 1,
        keep_p: 1.0,
        lambda: 0.01,
        lr_dis: 0.05,
        mom_dis: 0.9,
        mu_lr: 0.4,
        seed: 8,
        ..Hyperparams::default()
    };
    let mut state = TrainState::new(hp.clone()).unwrap();
    state.params = ModelParams::init_uniform(hp.network_config(), 3, 0.3, 0.1);
    let before = state.params.clone();
    train_iteration(&mut state, &data).unwrap();

    // generator step on the single-graph objective
    let z_g = noise(hp.seed, 1, PHASE_GENERATOR, 2, hp.r);
    let mut tape = Tape::new();
    let obj = generator_objective_graph(&mut tape, &before, &z_g, hp.lambda).unwrap();
    let g_obj = tape.backward(obj).unwrap();
    let mut expected = before.clone();
    for id in before.group_ids(Group::Generator) {
        let mut t = before.get(id).clone();
        for (p, g) in t.data_mut().iter_mut().zip(g_obj.get(id).unwrap().data()) {
            *p += hp.lr_gen() * g;
        }
        expected.set(id, t).unwrap();
    }
    // discriminator step with the updated generator
    let batch: Vec<&EmbeddedInstance> = batch_indices(2, 2, hp.seed, 1).into_iter().map(|i| &data[i]).collect();
    let z_d = noise(hp.seed, 1, PHASE_FAKE, 2, hp.r);
    let mut tape = Tape::new();
    let loss = discriminator_loss_graph(&mut tape, &expected, &batch, &z_d, hp.lambda).unwrap();
    let g_d = tape.backward(loss).unwrap();
    let mut after = expected.clone();
    for id in before.group_ids(Group::Discriminator) {
        let mut t = expected.get(id).clone();
        for (p, g) in t.data_mut().iter_mut().zip(g_d.get(id).unwrap().data()) {
            *p -= hp.lr_dis * g;
        }
        after.set(id, t).unwrap();
    }
    for id in after.ids() {
        for (a, b) in state.params.get(id).data().iter().zip(after.get(id).data()) {
            assert!((a - b).abs() < 1e-13, "{}: {a} vs {b}", after.name(id));
        }
    }
}

#[test]
fn graph_gradients_match_finite_differences() {
    for hops in [1, 2] {
        let model = ModelParams::init_uniform(NetworkConfig::new(4, 3, hops), 7, 0.5, 0.2);
        let data = embedded(2, 4, 2);
        let z = noise(1, 1, 0, 2, 3);
        let tensors = model.tensors().to_vec();
        let d = grad_check(|t, _| discriminator_loss_graph(t, &model, &data, &z, 0.01), &tensors, 1e-5).unwrap();
        assert!(d.max_rel_error < 1e-4, "hops {hops}: {d:?}");
        let g = grad_check(|t, _| generator_objective_graph(t, &model, &z, 0.01), &tensors, 1e-5).unwrap();
        assert!(g.max_rel_error < 1e-4, "hops {hops}: {g:?}");
    }
}

#[test]
fn batch_path_equals_single_graph() {
    let model = ModelParams::init_uniform(NetworkConfig::new(4, 3, 1), 9, 0.5, 0.2);
    let data = embedded(3, 4, 3);
    let z = noise(2, 1, 0, 3, 3);
    let mut tape = Tape::new();
    let loss = discriminator_loss_graph(&mut tape, &model, &data, &z, 0.0).unwrap();
    let whole = tape.backward(loss).unwrap();
    for exec in [Exec::Sequential, Exec::Parallel] {
        let mut g = real_batch_gradients(&model, &data, None, exec).unwrap().grads;
        let fakes: Vec<Vec<f64>> = z.iter().map(|z| network::generator_forward(z, &model).unwrap()).collect();
        g.accumulate(&fake_batch_gradients(&model, &fakes, None, exec).unwrap().grads);
        let step = group_gradient(&model, Group::Discriminator, &g, 1.0, 0.0);
        for id in model.group_ids(Group::Discriminator) {
            for (a, b) in step.get(id).unwrap().data().iter().zip(whole.get(id).unwrap().data()) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }
}

#[test]
fn zero_lambda_leaves_gradients_untouched() {
    let model = ModelParams::init_uniform(NetworkConfig::new(2, 3, 1), 9, 0.5, 0.2);
    let data = clusters(3, 2, 0);
    let raw = real_batch_gradients(&model, &data, None, Exec::Sequential).unwrap().grads;
    let step = group_gradient(&model, Group::Discriminator, &raw, 1.0, 0.0);
    let head = model.layout().head.w;
    assert_eq!(step.get(head), raw.get(head));
    let with = group_gradient(&model, Group::Discriminator, &raw, 1.0, 0.5);
    for ((a, b), t) in with.get(head).unwrap().data().iter().zip(raw.get(head).unwrap().data()).zip(model.get(head).data()) {
        assert_eq!(*a, b + t);
    }
}

#[test]
fn descent_and_ascent_directions() {
    for seed in 0..4 {
        let hp = Hyperparams { lr_dis: 1e-6, mom_dis: 0.0, mu_lr: 1.0, k: 1, keep_p: 1.0, ..small_hp(seed) };
        let data = clusters(6, 2, seed);
        let mut state = TrainState::new(hp.clone()).unwrap();
        state.params = ModelParams::init_uniform(hp.network_config(), seed, 0.5, 0.2);
        let before = state.params.clone();
        train_iteration(&mut state, &data).unwrap();

        let z_g = noise(hp.seed, 1, PHASE_GENERATOR, hp.batch_m, hp.r);
        let obj = |m: &ModelParams| {
            let mut t = Tape::new();
            let v = generator_objective_graph(&mut t, m, &z_g, hp.lambda).unwrap();
            t.value(v).item()
        };
        let mut g_only = before.clone();
        for id in before.group_ids(Group::Generator) {
            g_only.set(id, state.params.get(id).clone()).unwrap();
        }
        assert!(obj(&g_only) > obj(&before), "seed {seed}");

        let batch: Vec<&FeatureExample> = batch_indices(6, hp.batch_m, hp.seed, 1).into_iter().map(|i| &data[i]).collect();
        let z_d = noise(hp.seed, 1, PHASE_FAKE, hp.batch_m, hp.r);
        let loss = |m: &ModelParams| {
            let mut t = Tape::new();
            let v = discriminator_loss_graph(&mut t, m, &batch, &z_d, hp.lambda).unwrap();
            t.value(v).item()
        };
        assert!(loss(&state.params) < loss(&g_only), "seed {seed}");
    }
}

#[test]
fn same_seed_same_trace_in_both_modes() {
    let data = embedded(7, 4, 4);
    let hp = Hyperparams { d: 4, r: 5, hops: 2, batch_m: 3, iterations: 7, seed: 12, ..Hyperparams::default() };
    let (p1, t1, _) = train(&data, &hp).unwrap();
    let (p2, t2, _) = train(&data, &Hyperparams { exec: Exec::Sequential, ..hp.clone() }).unwrap();
    assert_eq!(t1.to_csv_string(), t2.to_csv_string());
    assert_eq!(p1, p2);
    let (_, t3, _) = train(&data, &Hyperparams { seed: 13, ..hp }).unwrap();
    assert_ne!(t1.to_csv_string(), t3.to_csv_string());
}

#[test]
fn resume_equals_uninterrupted() {
    let data = embedded(5, 4, 5);
    let hp = Hyperparams { d: 4, r: 5, hops: 1, batch_m: 2, iterations: 8, seed: 3, ..Hyperparams::default() };
    let mut full = TrainState::new(hp.clone()).unwrap();
    let (t_full, _) = run(&mut full, &data, 8).unwrap();

    let mut first = TrainState::new(hp).unwrap();
    let (mut t, _) = run(&mut first, &data, 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.ckpt");
    first.save(&path).unwrap();
    let mut resumed = TrainState::load(&path).unwrap();
    assert_eq!(resumed.iteration, 5);
    let (rest, _) = run(&mut resumed, &data, 8).unwrap();
    t.extend(rest);
    assert_eq!(t.to_csv_string(), t_full.to_csv_string());
    assert_eq!(resumed.params, full.params);
    assert_eq!(resumed.velocity, full.velocity);
}

#[test]
fn state_checkpoint_loads_as_a_model() {
    let state = TrainState::new(small_hp(1)).unwrap();
    let (model, seed) = ModelParams::from_checkpoint(&state.to_checkpoint()).unwrap();
    assert_eq!(model, state.params);
    assert_eq!(seed, 1);
    let plain = state.params.to_checkpoint(1);
    assert!(TrainState::from_checkpoint(&plain).is_err());
}

#[test]
fn runaway_momentum_reports_divergence() {
    // the penalty step alone multiplies weights by 1 − 2·lr·λ = −99
    let hp = Hyperparams { lr_dis: 50.0, mom_dis: 0.0, lambda: 1.0, k: 1, iterations: 400, ..small_hp(5) };
    let (params, trace, status) = train(&clusters(9, 2, 0), &hp).unwrap();
    assert_eq!(status, Status::Diverged);
    assert!(trace.len() < 400);
    assert_eq!(params.config(), &hp.network_config());
    assert!(trace.records.iter().all(|r| r.d_loss_real.is_finite()));
}

#[test]
fn trace_csv_layout() {
    let (_, trace, _) = train(&clusters(9, 2, 0), &Hyperparams { iterations: 20, ..small_hp(6) }).unwrap();
    let csv = trace.to_csv_string();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], TRACE_HEADER);
    assert_eq!(lines.len(), 21);
    assert!(lines[3].starts_with("3,") && lines[3].ends_with(",1"));
    assert_eq!(trace.norms.iter().map(|n| n.iteration).collect::<Vec<_>>(), vec![10, 20]);
}

#[test]
fn separable_clusters_are_learned() {
    for seed in 0..5 {
        let data = clusters(60, 4, 100 + seed);
        let hp = Hyperparams { d: 4, r: 10, hops: 1, seed, ..Hyperparams::default() };
        let (model, trace, status) = train(&data, &hp).unwrap();
        assert_eq!(status, Status::Completed);
        assert_eq!(trace.len(), 200);
        let correct = data
            .iter()
            .filter(|ex| {
                let p = network::discriminator_forward_vec(&ex.features, &model, Dropout::Off).unwrap();
                let best = (0..3).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
                best == ex.label.index()
            })
            .count();
        assert!(correct as f64 / data.len() as f64 >= 0.95, "seed {seed}: {correct}/{}", data.len());
    }
}
