use super::*;
use crate::corpus::{EmbeddedInstance, Polarity};
use crate::numerics::rng;
use crate::numerics::{Tape, Tensor};
use rand::Rng as _;

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Tensor {
    let mut r = rng::stream(seed, &[77]);
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
}

fn instance(l: usize, t: usize, r: usize, d: usize, seed: u64) -> EmbeddedInstance {
    EmbeddedInstance {
        left: random_matrix(l, d, seed),
        target: random_matrix(t, d, seed + 1),
        right: random_matrix(r, d, seed + 2),
        polarity: Polarity::Neutral,
        aspect_category: "C".into(),
    }
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

#[test]
fn bilstm_zero_fixed_point() {
    let model = ModelParams::zeros(NetworkConfig::new(3, 4, 1));
    let out = bilstm_forward(&Tensor::zeros(&[5, 3]), &model, &model.layout().left).unwrap();
    assert_eq!(out, Tensor::zeros(&[5, 6]));
}

#[test]
fn bilstm_single_step() {
    let model = ModelParams::init_uniform(NetworkConfig::new(2, 4, 1), 1, 0.8, 0.5);
    let seq = random_matrix(1, 2, 3);
    let out = bilstm_forward(&seq, &model, &model.layout().target).unwrap();
    assert_eq!(out.shape(), &[1, 4]);
    assert!(close(out.data(), &oracle::bilstm(&model, &model.layout().target, &seq)[0], 1e-14));
}

#[test]
fn bilstm_matches_hand_recurrence() {
    let model = ModelParams::init_uniform(NetworkConfig::new(2, 4, 1), 5, 0.8, 0.5);
    let seq = random_matrix(3, 2, 9);
    let out = bilstm_forward(&seq, &model, &model.layout().left).unwrap();
    let expected: Vec<f64> = oracle::bilstm(&model, &model.layout().left, &seq).concat();
    assert!(close(out.data(), &expected, 1e-14));
    assert!(bilstm_forward(&random_matrix(3, 5, 1), &model, &model.layout().left).is_err());
}

fn hop_on(model: &ModelParams, hl: &Tensor, ht: &Tensor, hr: &Tensor, q: &[f64]) -> Vec<Vec<f64>> {
    let mut tape = Tape::new();
    let (l, t, r) = (
        tape.constant(hl.clone()).unwrap(),
        tape.constant(ht.clone()).unwrap(),
        tape.constant(hr.clone()).unwrap(),
    );
    let qv = tape.constant(Tensor::vector(q.to_vec())).unwrap();
    let out = rotary_hop(&mut tape, model, l, t, r, (qv, qv)).unwrap();
    out.iter().map(|v| tape.value(*v).data().to_vec()).collect()
}

#[test]
fn rotary_singletons_pass_rows_through() {
    let model = ModelParams::init_uniform(NetworkConfig::new(2, 4, 1), 2, 0.9, 0.4);
    let (hl, ht, hr) = (random_matrix(1, 4, 1), random_matrix(1, 4, 2), random_matrix(1, 4, 3));
    let out = hop_on(&model, &hl, &ht, &hr, &[0.3, -0.1, 0.2, 0.5]);
    assert!(close(&out[0], hl.row(0), 1e-15));
    assert!(close(&out[1], ht.row(0), 1e-15));
    assert!(close(&out[2], ht.row(0), 1e-15));
    assert!(close(&out[3], hr.row(0), 1e-15));
}

#[test]
fn rotary_identical_context_rows() {
    let model = ModelParams::init_uniform(NetworkConfig::new(2, 4, 1), 2, 0.9, 0.4);
    let row = vec![0.4, -0.2, 0.7, 0.1];
    let hl = Tensor::from_rows(&[row.clone(), row.clone(), row.clone()]).unwrap();
    let out = hop_on(&model, &hl, &random_matrix(2, 4, 5), &random_matrix(2, 4, 6), &[0.1; 4]);
    assert!(close(&out[0], &row, 1e-15));
}

#[test]
fn rotary_matches_transcription() {
    let model = ModelParams::init_uniform(NetworkConfig::new(2, 4, 1), 8, 0.9, 0.4);
    let (hl, ht, hr) = (random_matrix(2, 4, 11), random_matrix(1, 4, 12), random_matrix(2, 4, 13));
    let q = [0.25, -0.5, 0.75, 0.1];
    let out = hop_on(&model, &hl, &ht, &hr, &q);
    let rows = |m: &Tensor| (0..m.rows()).map(|i| m.row(i).to_vec()).collect::<Vec<_>>();
    let expected = oracle::rotary(&model, &rows(&hl), &rows(&ht), &rows(&hr), &q, &q);
    for (a, b) in out.iter().zip(&expected) {
        assert!(close(a, b, 1e-14));
    }
}

fn hier_on(model: &ModelParams, v: &[Vec<f64>; 4]) -> Vec<Vec<f64>> {
    let mut tape = Tape::new();
    let vars: Vec<_> = v.iter().map(|x| tape.constant(Tensor::vector(x.clone())).unwrap()).collect();
    let out = hierarchical_attention(&mut tape, model, [vars[0], vars[1], vars[2], vars[3]]).unwrap();
    out.iter().map(|x| tape.value(*x).data().to_vec()).collect()
}

#[test]
fn hierarchical_equal_scores_is_identity() {
    let model = ModelParams::zeros(NetworkConfig::new(2, 4, 1));
    let v = [vec![1.0, 2.0, 3.0, 4.0], vec![-1.0; 4], vec![0.5; 4], vec![9.0, 0.0, 0.0, 1.0]];
    let out = hier_on(&model, &v);
    for (a, b) in out.iter().zip(&v) {
        assert_eq!(a, b);
    }
}

#[test]
fn hierarchical_scales_by_twice_the_weight() {
    let mut model = ModelParams::zeros(NetworkConfig::new(2, 4, 1));
    let ids = model.layout().hierarchical;
    model.set(ids.w_context, Tensor::vector(vec![1.0; 4])).unwrap();
    let v = [vec![0.0; 4], vec![1.0; 4], vec![1.0; 4], vec![0.5; 4]];
    let out = hier_on(&model, &v);
    // scores tanh(0) = 0 for the zero block, tanh(2) for the sibling
    let alpha = oracle::softmax(&[0.0, 2.0f64.tanh()]);
    assert!(out[3].iter().all(|x| (x - 2.0 * alpha[1] * 0.5).abs() < 1e-15));
    assert!(2.0 * alpha[1] > 1.0);
    assert_eq!(out[0], vec![0.0; 4]);
}

#[test]
fn hierarchical_matches_transcription() {
    let model = ModelParams::init_uniform(NetworkConfig::new(2, 4, 1), 21, 0.9, 0.4);
    let mut r = rng::stream(4, &[]);
    let v: [Vec<f64>; 4] = std::array::from_fn(|_| (0..4).map(|_| r.random_range(-1.0..1.0)).collect());
    let out = hier_on(&model, &v);
    for (a, b) in out.iter().zip(oracle::hierarchical(&model, &v).iter()) {
        assert!(close(a, b, 1e-15));
    }
}

#[test]
fn zero_head_is_uniform() {
    let mut model = ModelParams::init_uniform(NetworkConfig::new(4, 6, 2), 3, 0.5, 0.2);
    let h = model.layout().head;
    model.set(h.w, Tensor::zeros(&[4, 32])).unwrap();
    model.set(h.b, Tensor::zeros(&[4])).unwrap();
    let p = discriminator_forward(&instance(2, 1, 3, 4, 0), &model, Dropout::Off).unwrap();
    assert_eq!(p, [0.25; 4]);
    let p = discriminator_forward_vec(&[0.0; 32], &ModelParams::zeros(NetworkConfig::new(4, 6, 2)), Dropout::Off).unwrap();
    assert_eq!(p, [0.25; 4]);
}

#[test]
fn inference_is_deterministic() {
    let model = ModelParams::init_uniform(NetworkConfig::new(4, 6, 2), 3, 0.5, 0.2);
    let x = instance(2, 2, 3, 4, 4);
    assert_eq!(
        discriminator_forward(&x, &model, Dropout::Off).unwrap(),
        discriminator_forward(&x, &model, Dropout::Off).unwrap()
    );
}

#[test]
fn full_forward_matches_composed_oracle() {
    let model = ModelParams::init_uniform(NetworkConfig::new(4, 6, 2), 13, 0.6, 0.3);
    let x = instance(3, 2, 2, 4, 20);
    let p = discriminator_forward(&x, &model, Dropout::Off).unwrap();
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let expected = oracle::head(&model, &oracle::representation(&model, &x.left, &x.target, &x.right));
    assert!(close(&p, &expected, 1e-14));
}

#[test]
fn forward_factorizes_through_the_representation() {
    let model = ModelParams::init_uniform(NetworkConfig::new(4, 6, 3), 31, 0.6, 0.3);
    let x = instance(2, 1, 4, 4, 40);
    let v = representation_vector(&x, &model).unwrap();
    assert_eq!(v.len(), 32);
    assert_eq!(
        discriminator_forward(&x, &model, Dropout::Off).unwrap(),
        discriminator_forward_vec(&v, &model, Dropout::Off).unwrap()
    );
    assert!(discriminator_forward_vec(&v[..31], &model, Dropout::Off).is_err());
}

#[test]
fn explicit_zero_context_equals_placeholder() {
    let model = ModelParams::init_uniform(NetworkConfig::new(4, 6, 2), 5, 0.6, 0.3);
    let mut x = instance(1, 2, 2, 4, 1);
    x.left = Tensor::zeros(&[1, 4]);
    let placeholder = {
        let inst = crate::corpus::ReviewInstance::new(
            "s".into(),
            vec!["t".into(), "u".into()],
            crate::corpus::Span { begin: 0, end: 2 },
            "C".into(),
            Polarity::Neutral,
        )
        .unwrap();
        let store = crate::corpus::synth_embeddings(std::slice::from_ref(&inst), 4, 0);
        crate::corpus::embed(&inst, &store).unwrap()
    };
    assert_eq!(placeholder.left, x.left);
    assert_eq!(placeholder.right.shape(), &[1, 4]);
    let mut y = x.clone();
    y.left = placeholder.left.clone();
    assert_eq!(
        discriminator_forward(&x, &model, Dropout::Off).unwrap(),
        discriminator_forward(&y, &model, Dropout::Off).unwrap()
    );
}

#[test]
fn extra_hops_keep_a_converged_rotary_fixed_point() {
    // A single target row pins every context2target output to that row, so
    // queries never change; zero hierarchical weights give equal scores.
    let mut model = ModelParams::init_uniform(NetworkConfig::new(4, 6, 1), 17, 0.6, 0.3);
    let h = model.layout().hierarchical;
    for id in [h.w_context, h.b_context, h.w_target, h.b_target] {
        let shape = model.get(id).shape().to_vec();
        model.set(id, Tensor::zeros(&shape)).unwrap();
    }
    let x = instance(3, 1, 2, 4, 8);
    let one = representation_vector(&x, &model).unwrap();
    let mut twice = ModelParams::zeros(NetworkConfig::new(4, 6, 2));
    for id in model.ids() {
        twice.set(id, model.get(id).clone()).unwrap();
    }
    assert_eq!(representation_vector(&x, &twice).unwrap(), one);
}

#[test]
fn dropout_only_in_training() {
    let model = ModelParams::init_uniform(NetworkConfig::new(4, 6, 1), 2, 0.6, 0.3);
    let v: Vec<f64> = (0..32).map(|i| i as f64 / 10.0).collect();
    let off = discriminator_forward_vec(&v, &model, Dropout::Off).unwrap();
    let mut r = rng::stream(1, &[]);
    let on = discriminator_forward_vec(&v, &model, Dropout::On { keep_p: 0.3, rng: &mut r }).unwrap();
    assert_ne!(off, on);
    let mut r = rng::stream(1, &[]);
    let full = discriminator_forward_vec(&v, &model, Dropout::On { keep_p: 1.0, rng: &mut r }).unwrap();
    assert_eq!(off, full);
}

#[test]
fn generator_shapes_and_zero_weights() {
    for d in [4, 768] {
        let model = ModelParams::zeros(NetworkConfig::new(d, 100, 1));
        let out = generator_forward(&[0.5; 100], &model).unwrap();
        assert_eq!(out.len(), 8 * d);
        assert!(out.iter().all(|v| *v == 0.0));
    }
    let model = ModelParams::zeros(NetworkConfig::new(4, 100, 1));
    assert!(generator_forward(&[0.5; 99], &model).is_err());
}

#[test]
fn generator_matches_matrix_oracle() {
    let model = ModelParams::init_uniform(NetworkConfig::new(2, 5, 1), 9, 0.7, 0.3);
    let z = [0.1, 0.9, 0.4, 0.0, 1.0];
    assert!(close(&generator_forward(&z, &model).unwrap(), &oracle::generator(&model, &z), 1e-14));
}

#[test]
fn generated_samples_always_classifiable() {
    let model = ModelParams::init_uniform(NetworkConfig::new(4, 10, 1), 9, 0.7, 0.3);
    let mut r = rng::stream(2, &[]);
    for _ in 0..50 {
        let z: Vec<f64> = (0..10).map(|_| r.random::<f64>()).collect();
        let v = generator_forward(&z, &model).unwrap();
        let p = discriminator_forward_vec(&v, &model, Dropout::Off).unwrap();
        assert!(p.iter().all(|x| *x >= 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn outputs_are_probability_vectors(seed in 0u64..1000, l in 1usize..4, t in 1usize..3, r in 1usize..4, hops in 1usize..3) {
            let model = ModelParams::init_uniform(NetworkConfig::new(3, 4, hops), seed, 1.0, 0.5);
            let p = discriminator_forward(&instance(l, t, r, 3, seed), &model, Dropout::Off).unwrap();
            prop_assert_eq!(p.len(), 4);
            prop_assert!(p.iter().all(|x| *x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
