use nalgebra::DMatrix;
use pinnbasis::network::FeatureNetwork;
use pinnbasis::problems;
use pinnbasis::quadrature::PointSet;
use pinnbasis::trainer::{pinn_loss, pinn_loss_and_gradient, train_adam, TrainConfig, TrainingSet};
use pinnbasis::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn arch() -> impl Strategy<Value = Vec<usize>> {
    (1usize..=2, prop::collection::vec(2usize..=10, 1..=3)).prop_map(|(d, hidden)| {
        let mut dims = vec![d];
        dims.extend(hidden);
        dims.push(1);
        dims
    })
}

fn point(d: usize, raw: &[f64]) -> Vec<f64> {
    raw[..d].to_vec()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn feature_derivatives_match_finite_differences(
        dims in arch(),
        seed in any::<u64>(),
        raw in prop::collection::vec(-1.0f64..1.0, 2),
    ) {
        let net = FeatureNetwork::new(&dims, seed).unwrap();
        let x = point(dims[0], &raw);
        let jac = net.feature_jacobian(&x).unwrap();
        let sec = net.feature_second_derivatives(&x).unwrap();
        let h = 1e-5;
        for a in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[a] += h;
            xm[a] -= h;
            let fd1 = (net.features(&xp).unwrap() - net.features(&xm).unwrap()) / (2.0 * h);
            prop_assert!((fd1 - jac.column(a)).amax() < 1e-6);
            let fd2 = (net.feature_jacobian(&xp).unwrap().column(a) - net.feature_jacobian(&xm).unwrap().column(a))
                / (2.0 * h);
            prop_assert!((fd2 - sec.column(a)).amax() < 1e-5);
        }
        prop_assert_eq!(jac.row(0).amax(), 0.0);
        prop_assert_eq!(net.features(&x).unwrap()[0], 1.0);
    }

    #[test]
    fn output_is_the_last_layer_combination(dims in arch(), seed in any::<u64>(), raw in prop::collection::vec(-1.0f64..1.0, 2)) {
        let net = FeatureNetwork::new(&dims, seed).unwrap();
        let x = point(dims[0], &raw);
        let u = net.forward(&x).unwrap();
        let combo = net.output_weights().dot(&net.features(&x).unwrap());
        prop_assert!((u - combo).abs() < 1e-13);
    }

    #[test]
    fn json_roundtrip_is_bit_identical(dims in arch(), seed in any::<u64>()) {
        let net = FeatureNetwork::new(&dims, seed).unwrap();
        let back = FeatureNetwork::from_json(&net.to_json()).unwrap();
        prop_assert_eq!(back.to_json(), net.to_json());
        prop_assert_eq!(back.fingerprint(), net.fingerprint());
        for (a, b) in net.layers().iter().zip(back.layers()) {
            prop_assert!(a.weights.iter().zip(b.weights.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }
}

#[test]
fn batch_forward_matches_pointwise_evaluation() {
    let net = FeatureNetwork::new(&[2, 7, 5, 1], 9).unwrap();
    let coords = vec![0.1, -0.2, 0.5, 0.5, -0.9, 0.3];
    let pts = PointSet::from_flat(2, coords.clone()).unwrap();
    let tape = net.forward_batch(&pts, true).unwrap();
    let u = tape.output_values();
    let ux = tape.output_gradient(0);
    for i in 0..3 {
        let x = &coords[2 * i..2 * i + 2];
        assert!((u[i] - net.forward(x).unwrap()).abs() < 1e-15);
        let jac = net.feature_jacobian(x).unwrap();
        assert!((ux[i] - net.output_weights().dot(&jac.column(0))).abs() < 1e-13);
    }
}

#[test]
fn parameter_gradient_matches_finite_differences() {
    let net = FeatureNetwork::new(&[1, 4, 3, 1], 5).unwrap();
    let x = [0.37];
    let grad = net.parameter_gradient(&x, 1.0).unwrap();
    let h = 1e-6;
    for (l, layer) in grad.layers.iter().enumerate() {
        for i in 0..layer.weights.nrows() {
            for j in 0..layer.weights.ncols() {
                let mut p = net.clone();
                let mut m = net.clone();
                p.layers_mut()[l].weights[(i, j)] += h;
                m.layers_mut()[l].weights[(i, j)] -= h;
                let fd = (p.forward(&x).unwrap() - m.forward(&x).unwrap()) / (2.0 * h);
                assert!((fd - layer.weights[(i, j)]).abs() < 1e-8, "layer {l} weight ({i},{j})");
            }
            let mut p = net.clone();
            let mut m = net.clone();
            p.layers_mut()[l].biases[i] += h;
            m.layers_mut()[l].biases[i] -= h;
            let fd = (p.forward(&x).unwrap() - m.forward(&x).unwrap()) / (2.0 * h);
            assert!((fd - layer.biases[i]).abs() < 1e-8, "layer {l} bias {i}");
        }
    }
}

#[test]
fn loss_gradient_matches_finite_differences() {
    let problem = problems::poisson_square();
    let net = FeatureNetwork::new(&[2, 5, 4, 1], 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // more points than one chunk, so the accumulation across chunks is covered
    let set = TrainingSet::sample(&problem, 700, 40, &mut rng).unwrap();
    let (loss, grad) = pinn_loss_and_gradient(&net, &set, 1.0).unwrap();
    assert!((loss - pinn_loss(&net, &set, 1.0).unwrap()).abs() < 1e-14 * loss);
    let h = 1e-6;
    for l in 0..net.layers().len() {
        let (i, j) = (0, net.layers()[l].weights.ncols() - 1);
        let mut p = net.clone();
        let mut m = net.clone();
        p.layers_mut()[l].weights[(i, j)] += h;
        m.layers_mut()[l].weights[(i, j)] -= h;
        let fd = (pinn_loss(&p, &set, 1.0).unwrap() - pinn_loss(&m, &set, 1.0).unwrap()) / (2.0 * h);
        let an = grad.layers[l].weights[(i, j)];
        assert!((fd - an).abs() < 1e-5 * (1.0 + an.abs()), "layer {l}: {fd} vs {an}");
    }
}

#[test]
fn zero_epochs_return_the_initial_network() {
    let problem = problems::poisson_1d();
    let net = FeatureNetwork::new(&[1, 6, 6, 1], 11).unwrap();
    let cfg = TrainConfig { epochs: 0, n_collocation: 50, ..TrainConfig::for_domain(&problem.domain) };
    let out = train_adam(&net, &problem, &cfg).unwrap();
    assert_eq!(out.network.to_json(), net.to_json());
}

#[test]
fn training_reduces_the_loss() {
    let problem = problems::poisson_1d();
    let net = FeatureNetwork::new(&[1, 10, 10, 1], 1).unwrap();
    let cfg = TrainConfig { epochs: 300, n_collocation: 200, ..TrainConfig::for_domain(&problem.domain) };
    let out = train_adam(&net, &problem, &cfg).unwrap();
    assert!(out.loss_history.last().unwrap() < &out.loss_history[0]);
    assert!(out.loss_history.iter().all(|l| l.is_finite()));
}

#[test]
fn invalid_architectures_are_rejected() {
    for dims in [vec![], vec![1], vec![1, 5], vec![3, 5, 1], vec![1, 0, 1], vec![1, 5, 2]] {
        assert!(matches!(FeatureNetwork::new(&dims, 0), Err(Error::InvalidArchitecture(_))), "{dims:?}");
    }
}

#[test]
fn malformed_files_are_rejected() {
    let net = FeatureNetwork::new(&[1, 3, 1], 0).unwrap();
    let text = net.to_json();
    assert!(FeatureNetwork::from_json(&text.replace("tanh", "relu")).is_err());
    assert!(FeatureNetwork::from_json(&text.replace("pinnbasis-network", "other")).is_err());
    assert!(FeatureNetwork::from_json("{}").is_err());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    net.save(&path).unwrap();
    assert_eq!(FeatureNetwork::load(&path).unwrap().fingerprint(), net.fingerprint());
    assert!(FeatureNetwork::load(&dir.path().join("missing.json")).is_err());
}

#[test]
fn glorot_scale() {
    let net = FeatureNetwork::new(&[2, 400, 400, 1], 3).unwrap();
    let w: &DMatrix<f64> = &net.layers()[1].weights;
    let var = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
    let expected = 2.0 / 800.0;
    assert!((var / expected - 1.0).abs() < 0.05, "variance {var}, expected {expected}");
}
